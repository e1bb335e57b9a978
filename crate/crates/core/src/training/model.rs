use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::solver::{Parametrization, SolverState};
use crate::types::Trajectory;

/// Residuals of one observed channel and their parameter Jacobian.
#[derive(Debug, Clone, Default)]
pub struct ResidualGroup<T> {
    pub values: Vec<T>,
    /// `jacobian[i][j]` = ∂ values[i] / ∂ θⱼ.
    pub jacobian: Vec<Vec<T>>,
}

impl<T: Scalar> ResidualGroup<T> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            values: Vec::with_capacity(n),
            jacobian: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, residual: T, partials: Vec<T>) {
        self.values.push(residual);
        self.jacobian.push(partials);
    }
}

/// A trainable one-step predictor.
pub trait Model<T: Scalar> {
    fn parameter_names(&self) -> Vec<String>;
    fn parameters(&self) -> Vec<T>;
    fn set_parameters(&mut self, values: &[T]);

    /// Parameters the optimizer may touch; the rest stay bit-exact.
    fn trainable(&self) -> Vec<bool> {
        vec![true; self.parameters().len()]
    }

    /// One-step prediction residuals over `data`, grouped per channel.
    fn residuals(&self, data: &[Trajectory<T>]) -> Result<Vec<ResidualGroup<T>>>;
}

/// A model that can be iterated as a free forecast.
pub trait Recurrent<T: Scalar>: Model<T> {
    fn channels(&self) -> usize;
    fn predict(&self, state: &SolverState<T>) -> Vec<T>;
}

/// Sum over channels of the mean squared one-step residual.
pub fn one_step_loss<T: Scalar, M: Model<T> + ?Sized>(model: &M, data: &[Trajectory<T>]) -> Result<T> {
    Ok(loss_and_gradient(model, data)?.0)
}

pub fn gradient<T: Scalar, M: Model<T> + ?Sized>(model: &M, data: &[Trajectory<T>]) -> Result<Vec<T>> {
    Ok(loss_and_gradient(model, data)?.1)
}

pub fn loss_and_gradient<T: Scalar, M: Model<T> + ?Sized>(model: &M, data: &[Trajectory<T>]) -> Result<(T, Vec<T>)> {
    let p = model.parameters().len();
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); p];
    let two = T::lit(2.0);
    for group in model.residuals(data)? {
        if group.values.is_empty() {
            continue;
        }
        let n = T::from_usize_lossy(group.values.len());
        for (r, row) in group.values.iter().zip(&group.jacobian) {
            loss = loss + *r * *r / n;
            for (g, &j) in grad.iter_mut().zip(row) {
                *g = *g + two * *r * j / n;
            }
        }
    }
    Ok((loss, grad))
}

pub(crate) fn check_channels<T: Scalar>(data: &[Trajectory<T>], channels: usize, min_len: usize) -> Result<usize> {
    if data.len() != channels {
        return Err(invalid(format!("expected {channels} channel(s), got {}", data.len())));
    }
    let n = data[0].len();
    if data.iter().any(|d| d.len() != n) {
        return Err(invalid("channels have different lengths"));
    }
    if n < min_len {
        return Err(invalid(format!("need at least {min_len} samples, got {n}")));
    }
    Ok(n)
}

/// Every oscillator of the system is observed; the step is driven directly
/// by the parametrization's step matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FullObservation<P> {
    pub parametrization: P,
}

impl<P> FullObservation<P> {
    pub fn new(parametrization: P) -> Self {
        Self { parametrization }
    }
}

impl<T: Scalar, P: Parametrization<T>> Model<T> for FullObservation<P> {
    fn parameter_names(&self) -> Vec<String> {
        self.parametrization.names().into_iter().map(String::from).collect()
    }

    fn parameters(&self) -> Vec<T> {
        self.parametrization.values()
    }

    fn set_parameters(&mut self, values: &[T]) {
        self.parametrization.set_values(values);
    }

    fn residuals(&self, data: &[Trajectory<T>]) -> Result<Vec<ResidualGroup<T>>> {
        let channels = self.parametrization.channels();
        let n = check_channels(data, channels, 3)?;
        let m = self.parametrization.step_matrix();
        let partials = self.parametrization.step_matrix_partials();
        let mut groups = vec![ResidualGroup::with_capacity(n - 2); channels];
        let mut prev = vec![T::zero(); channels];
        let mut curr = vec![T::zero(); channels];
        for t in 1..n - 1 {
            for c in 0..channels {
                prev[c] = data[c].samples()[t - 1];
                curr[c] = data[c].samples()[t];
            }
            let two = T::lit(2.0);
            for (c, group) in groups.iter_mut().enumerate() {
                let pred = two * curr[c] - prev[c] + m.increment_row(c, &prev, &curr);
                let row = partials.iter().map(|dm| dm.increment_row(c, &prev, &curr)).collect();
                group.push(pred - data[c].samples()[t + 1], row);
            }
        }
        Ok(groups)
    }
}

impl<T: Scalar, P: Parametrization<T>> Recurrent<T> for FullObservation<P> {
    fn channels(&self) -> usize {
        self.parametrization.channels()
    }

    fn predict(&self, state: &SolverState<T>) -> Vec<T> {
        self.parametrization.step_matrix().apply(state)
    }
}

/// First-order residual baseline: one linear gain per channel,
/// x⁺ = x + d·g·x.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerResNet<T> {
    pub gains: Vec<T>,
    pub layer_step: T,
}

impl<T: Scalar> EulerResNet<T> {
    pub fn new(gains: Vec<T>, layer_step: T) -> Result<Self> {
        if gains.is_empty() {
            return Err(invalid("at least one channel is required"));
        }
        if !(layer_step > T::zero()) {
            return Err(invalid(format!("layer step must be positive, got {layer_step}")));
        }
        Ok(Self { gains, layer_step })
    }
}

impl<T: Scalar> Model<T> for EulerResNet<T> {
    fn parameter_names(&self) -> Vec<String> {
        (0..self.gains.len()).map(|i| format!("gain_{i}")).collect()
    }

    fn parameters(&self) -> Vec<T> {
        self.gains.clone()
    }

    fn set_parameters(&mut self, values: &[T]) {
        self.gains = values.to_vec();
    }

    fn residuals(&self, data: &[Trajectory<T>]) -> Result<Vec<ResidualGroup<T>>> {
        let channels = self.gains.len();
        let n = check_channels(data, channels, 2)?;
        let d = self.layer_step;
        Ok((0..channels)
            .map(|c| {
                let x = data[c].samples();
                let mut g = ResidualGroup::with_capacity(n - 1);
                for t in 0..n - 1 {
                    let mut row = vec![T::zero(); channels];
                    row[c] = d * x[t];
                    g.push(x[t] + d * self.gains[c] * x[t] - x[t + 1], row);
                }
                g
            })
            .collect())
    }
}

impl<T: Scalar> Recurrent<T> for EulerResNet<T> {
    fn channels(&self) -> usize {
        self.gains.len()
    }

    fn predict(&self, state: &SolverState<T>) -> Vec<T> {
        crate::solver::step_euler_resnet(&self.gains, &state.x_curr, self.layer_step)
            .expect("validated layer step and channel count")
    }
}
