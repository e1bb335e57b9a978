use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mapping::{convolve, mapping_kernel, widen_projection, StencilBank};
use crate::scalar::Scalar;
use crate::solver::Parametrization;
use crate::types::{MappingParams, MappingWeights, Padding, Trajectory};

use super::fit::{fit, FitConfig, FitOutcome};
use super::model::{check_channels, Model, ResidualGroup};

/// How the hidden channel is produced from the observed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingMode {
    /// Kernel size 1 projection whose (α, β, γ) are read off the solver's
    /// first row, so mapping and solver share weights.
    #[default]
    Shared,
    /// Free convolution kernel trained alongside, but independent of, the
    /// solver weights.
    Wide { kernel: usize },
}

impl MappingMode {
    /// `1` selects the shared projection, anything else a free kernel.
    pub fn from_kernel_size(kernel: usize) -> Result<Self> {
        match kernel {
            0 => Err(invalid("kernel size must be positive")),
            1 => Ok(MappingMode::Shared),
            k if k % 2 == 0 => Err(invalid(format!("wide kernel length must be odd, got {k}"))),
            k => Ok(MappingMode::Wide { kernel: k }),
        }
    }

    pub fn kernel_size(&self) -> usize {
        match self {
            MappingMode::Shared => 1,
            MappingMode::Wide { kernel } => *kernel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingSetup {
    pub mode: MappingMode,
    pub padding: Padding,
    pub stencil_accuracy: usize,
}

impl Default for MappingSetup {
    fn default() -> Self {
        Self {
            mode: MappingMode::Shared,
            padding: Padding::Valid,
            stencil_accuracy: 5,
        }
    }
}

/// Two-mass chain trained on the first oscillator only. The second channel
/// is replaced by the mapping x̂₂ of x₁, and only the first solver row is
/// fitted; parameters that do not enter that row keep their initial values.
#[derive(Debug, Clone)]
pub struct PartialModel<T: Scalar, P> {
    solver: P,
    mode: MappingMode,
    padding: Padding,
    bank: StencilBank<T>,
    kernel: Vec<T>,
}

impl<T: Scalar, P: Parametrization<T>> PartialModel<T, P> {
    pub fn new(solver: P, setup: &MappingSetup) -> Result<Self> {
        if solver.channels() != 2 {
            return Err(invalid(format!(
                "partial observation needs a two-channel solver, got {}",
                solver.channels()
            )));
        }
        let m = solver.step_matrix();
        if m.get(0, 3) != T::zero() || solver.step_matrix_partials().iter().any(|p| p.get(0, 3) != T::zero()) {
            return Err(invalid("observed row must not depend on the hidden velocity"));
        }
        if m.get(0, 1) == T::zero() {
            return Err(crate::Error::DivisionByZero(
                "observed row has no coupling to the hidden channel",
            ));
        }
        let bank = StencilBank::new(setup.stencil_accuracy)?;
        let mut model = Self {
            solver,
            mode: setup.mode,
            padding: setup.padding,
            bank,
            kernel: Vec::new(),
        };
        if let MappingMode::Wide { kernel } = setup.mode {
            MappingMode::from_kernel_size(kernel)?;
            let (a, b, g) = model.projection();
            model.kernel = widen_projection(a, b, g, &model.bank, kernel)?;
        }
        Ok(model)
    }

    pub fn solver(&self) -> &P {
        &self.solver
    }

    pub fn mode(&self) -> MappingMode {
        self.mode
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn bank(&self) -> &StencilBank<T> {
        &self.bank
    }

    /// (α, β, γ) implied by the solver: the first row solved for x₂.
    pub fn projection(&self) -> (T, T, T) {
        let m = self.solver.step_matrix();
        let (m00, m01, m02) = (m.get(0, 0), m.get(0, 1), m.get(0, 2));
        (T::one() / m01, -m02 / m01, -m00 / m01)
    }

    pub fn mapping_params(&self) -> MappingParams<T> {
        let weights = match self.mode {
            MappingMode::Shared => {
                let (alpha, beta, gamma) = self.projection();
                MappingWeights::Projection { alpha, beta, gamma }
            }
            MappingMode::Wide { .. } => MappingWeights::WideKernel(self.kernel.clone()),
        };
        MappingParams {
            weights,
            padding: self.padding,
            stencil_accuracy: self.bank.accuracy_order,
        }
    }

    /// Effective right-aligned convolution kernel of the mapping.
    pub fn kernel(&self) -> Vec<T> {
        mapping_kernel(&self.mapping_params(), &self.bank).expect("consistent mapping parameters")
    }

    /// x̂₂ for an observed x₁ under the current parameters.
    pub fn mapped(&self, x1: &Trajectory<T>) -> Result<Trajectory<T>> {
        convolve(x1, &self.kernel(), self.padding)
    }

    /// First-row step x₁⁺ given the hidden position at the current time.
    pub fn observed_step(&self, x_prev: T, x_curr: T, hidden: T) -> T {
        let m = self.solver.step_matrix();
        T::lit(2.0) * x_curr - x_prev + m.get(0, 0) * x_curr + m.get(0, 1) * hidden + m.get(0, 2) * (x_curr - x_prev)
    }

    fn solver_len(&self) -> usize {
        self.solver.values().len()
    }
}

impl<T: Scalar, P: Parametrization<T>> Model<T> for PartialModel<T, P> {
    fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.solver.names().into_iter().map(String::from).collect();
        names.extend((0..self.kernel.len()).map(|j| format!("kernel_{j}")));
        names
    }

    fn parameters(&self) -> Vec<T> {
        let mut v = self.solver.values();
        v.extend_from_slice(&self.kernel);
        v
    }

    fn set_parameters(&mut self, values: &[T]) {
        let n = self.solver_len();
        self.solver.set_values(&values[..n]);
        self.kernel.copy_from_slice(&values[n..]);
    }

    /// Solver parameters that enter the observed row, plus every kernel tap.
    fn trainable(&self) -> Vec<bool> {
        let partials = self.solver.step_matrix_partials();
        let mut mask: Vec<bool> = partials
            .iter()
            .map(|p| (0..3).any(|j| p.get(0, j) != T::zero()))
            .collect();
        mask.extend(std::iter::repeat_n(true, self.kernel.len()));
        mask
    }

    fn residuals(&self, data: &[Trajectory<T>]) -> Result<Vec<ResidualGroup<T>>> {
        let kernel = self.kernel();
        let l = kernel.len();
        let min_len = match self.padding {
            Padding::Causal => 3,
            Padding::Valid => l + 2,
        };
        let n = check_channels(data, 1, min_len)?;
        let x = data[0].samples();
        let m = self.solver.step_matrix();
        let (m00, m01, m02) = (m.get(0, 0), m.get(0, 1), m.get(0, 2));
        let partials = self.solver.step_matrix_partials();
        let hidden = convolve(&data[0], &kernel, self.padding)?;
        let offset = n - hidden.len();
        let d1 = match self.mode {
            MappingMode::Shared => Some(convolve(&data[0], self.bank.d1.coefficients(), self.padding)?),
            MappingMode::Wide { .. } => None,
        };
        let two = T::lit(2.0);
        let start = offset.max(1);
        let mut group = ResidualGroup::with_capacity(n - 1 - start);
        for t in start..n - 1 {
            let dx = x[t] - x[t - 1];
            let h = hidden.samples()[t - offset];
            let pred = two * x[t] - x[t - 1] + m00 * x[t] + m01 * h + m02 * dx;
            // sensitivity of the prediction to (M₀₀, M₀₁, M₀₂)
            let sens = match &d1 {
                // the shared projection inverts the first row, so the direct
                // and mapped contributions of M₀₀ and M₀₁ cancel identically,
                // leaving pred = 2x − x⁻ + D₂x + M₀₂(x − x⁻ − D₁x)
                Some(d1) => {
                    let d1_t = d1.samples()[t - (n - d1.len())];
                    [T::zero(), T::zero(), dx - d1_t]
                }
                None => [x[t], h, dx],
            };
            let mut row: Vec<T> = partials
                .iter()
                .map(|p| sens[0] * p.get(0, 0) + sens[1] * p.get(0, 1) + sens[2] * p.get(0, 2))
                .collect();
            if let MappingMode::Wide { .. } = self.mode {
                row.extend((0..l).map(|j| {
                    let idx = t as isize - (l as isize - 1) + j as isize;
                    if idx < 0 {
                        T::zero()
                    } else {
                        m01 * x[idx as usize]
                    }
                }));
            }
            group.push(pred - x[t + 1], row);
        }
        Ok(vec![group])
    }
}

/// Fits a chain whose first oscillator alone is observed.
pub fn fit_partial<T: Scalar, P: Parametrization<T>>(
    solver: P,
    x1: &Trajectory<T>,
    setup: &MappingSetup,
    config: &FitConfig,
) -> Result<FitOutcome<T, PartialModel<T, P>>> {
    let model = PartialModel::new(solver, setup)?;
    fit(model, std::slice::from_ref(x1), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate_coupled, InitialState};
    use crate::solver::{CoupledCanonical, CoupledCombined};
    use crate::training::model::loss_and_gradient;
    use crate::types::{canonical_to_combined, CanonicalWeights};

    const DELTA: f64 = 0.0667;

    fn truth() -> [CanonicalWeights<f64>; 2] {
        [
            CanonicalWeights::new(1.5, 0.5, 14.0).unwrap(),
            CanonicalWeights::new(0.9, 0.3, 35.0).unwrap(),
        ]
    }

    fn init() -> CoupledCanonical<f64> {
        CoupledCanonical {
            weights: [
                CanonicalWeights::new(1.0, 1.0, 15.0).unwrap(),
                CanonicalWeights::new(1.0, 1.0, 15.0).unwrap(),
            ],
            delta: DELTA,
        }
    }

    fn x1(n: usize) -> Trajectory<f64> {
        simulate_coupled(&truth(), &InitialState::coupled_default(), DELTA, n)
            .unwrap()
            .0
    }

    fn numeric_gradient<M: Model<f64> + Clone>(model: &M, data: &[Trajectory<f64>]) -> Vec<f64> {
        let p0 = model.parameters();
        (0..p0.len())
            .map(|i| {
                let h = 1e-6 * p0[i].abs().max(1e-3);
                let mut plus = model.clone();
                let mut minus = model.clone();
                let mut v = p0.clone();
                v[i] += h;
                plus.set_parameters(&v);
                v[i] -= 2.0 * h;
                minus.set_parameters(&v);
                let lp = loss_and_gradient(&plus, data).unwrap().0;
                let lm = loss_and_gradient(&minus, data).unwrap().0;
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn trainable_subset_is_first_row() {
        let m = PartialModel::new(init(), &MappingSetup::default()).unwrap();
        assert_eq!(m.trainable(), vec![true, false, true, false, true, true]);
        let u = canonical_to_combined(&truth()[0], &truth()[1], DELTA).unwrap();
        let c = PartialModel::new(CoupledCombined { weights: u }, &MappingSetup::default()).unwrap();
        assert_eq!(c.trainable(), vec![true, false, true, false, true]);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let data = [x1(60)];
        for mode in [MappingMode::Shared, MappingMode::Wide { kernel: 25 }] {
            for padding in [Padding::Causal, Padding::Valid] {
                let setup = MappingSetup {
                    mode,
                    padding,
                    stencil_accuracy: 5,
                };
                let m = PartialModel::new(init(), &setup).unwrap();
                let (_, g) = loss_and_gradient(&m, &data).unwrap();
                let fd = numeric_gradient(&m, &data);
                let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (i, (a, b)) in g.iter().zip(&fd).enumerate() {
                    assert!(
                        (a - b).abs() <= 1e-5 * scale,
                        "{mode:?} {padding:?} param {i}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn shared_mapping_cancels_spring_gradients() {
        let m = PartialModel::new(init(), &MappingSetup::default()).unwrap();
        let (_, g) = loss_and_gradient(&m, &[x1(60)]).unwrap();
        assert_eq!(g[4], 0.0);
        assert_eq!(g[5], 0.0);
        assert!(g[2] != 0.0);
    }

    #[test]
    fn fit_partial_freezes_parameters_outside_subset() {
        let config = FitConfig {
            max_iterations: 300,
            ..FitConfig::default()
        };
        let out = fit_partial(init(), &x1(60), &MappingSetup::default(), &config).unwrap();
        let learned = &out.report.learned;
        assert_eq!(learned[1], 1.0);
        assert_eq!(learned[3], 1.0);
        assert_eq!(learned[4], 15.0);
        assert_eq!(learned[5], 15.0);
        assert!(out.report.final_loss().unwrap() < out.report.loss_history[0]);
    }

    #[test]
    fn wide_mode_starts_from_shared_map() {
        let data = x1(60);
        let shared = PartialModel::new(init(), &MappingSetup::default()).unwrap();
        let wide = PartialModel::new(
            init(),
            &MappingSetup {
                mode: MappingMode::Wide { kernel: 25 },
                ..MappingSetup::default()
            },
        )
        .unwrap();
        let a = shared.mapped(&data).unwrap();
        let b = wide.mapped(&data).unwrap();
        let tail = b.len();
        assert_eq!(&a.samples()[a.len() - tail..], b.samples());
        assert_eq!(wide.parameters().len(), 6 + 25);
    }

    #[test]
    fn construction_errors() {
        let mut bad = init();
        bad.weights[1].spring = 0.0;
        assert!(PartialModel::new(bad, &MappingSetup::default()).is_err());
        assert!(MappingMode::from_kernel_size(0).is_err());
        assert!(MappingMode::from_kernel_size(4).is_err());
        assert_eq!(MappingMode::from_kernel_size(1).unwrap(), MappingMode::Shared);
        let short = Trajectory::new(vec![0.1; 8], DELTA, 0.0).unwrap();
        let m = PartialModel::new(init(), &MappingSetup::default()).unwrap();
        assert!(m.residuals(&[short]).is_err());
    }
}
