//! Value types shared across the crate and the parametrization conversions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Uniformly sampled scalar time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    samples: Vec<T>,
    delta: T,
    t0: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(samples: Vec<T>, delta: T, t0: T) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(invalid(format!("sampling step must be positive, got {delta}")));
        }
        if !t0.is_finite() {
            return Err(invalid("start time must be finite"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, delta, t0 })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> T {
        self.t0 + self.delta * T::from_usize_lossy(index)
    }

    /// Time stamp one step past the last sample.
    pub fn end_time(&self) -> T {
        self.time(self.len())
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    /// Sub-trajectory `[start, end)` with the start time shifted accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(invalid(format!(
                "slice {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..end].to_vec(),
            delta: self.delta,
            t0: self.time(start),
        })
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Result<Self> {
        self.slice(0, n)
    }

    /// The last `n` samples.
    pub fn tail(&self, n: usize) -> Result<Self> {
        let len = self.len();
        if n > len {
            return Err(invalid(format!("tail of {n} from length {len}")));
        }
        self.slice(len - n, len)
    }
}

/// Physical constants of one oscillator: mass (kg), damping (kg/s), spring (kg/s²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalWeights<T> {
    pub mass: T,
    pub damping: T,
    pub spring: T,
}

impl<T: Scalar> CanonicalWeights<T> {
    pub fn new(mass: T, damping: T, spring: T) -> Result<Self> {
        let w = Self { mass, damping, spring };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > T::zero()) {
            return Err(invalid(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.damping >= T::zero()) {
            return Err(invalid(format!("damping must be non-negative, got {}", self.damping)));
        }
        if !(self.spring > T::zero()) {
            return Err(invalid(format!("spring must be positive, got {}", self.spring)));
        }
        if !(self.mass.is_finite() && self.damping.is_finite() && self.spring.is_finite()) {
            return Err(invalid("canonical weights must be finite"));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            mass: self.mass * factor,
            damping: self.damping * factor,
            spring: self.spring * factor,
        }
    }

    /// Undamped angular frequency `sqrt(k/m)`.
    pub fn natural_frequency(&self) -> T {
        (self.spring / self.mass).sqrt()
    }

    /// Damped angular frequency; `None` unless underdamped.
    pub fn damped_frequency(&self) -> Option<T> {
        let four = T::lit(4.0);
        let disc = four * self.mass * self.spring - self.damping * self.damping;
        (disc > T::zero()).then(|| disc.sqrt() / (T::lit(2.0) * self.mass))
    }
}

/// Unit-normalized parameters of the two-mass chain (a, b in 1/s², c, d in
/// 1/s after multiplication by the step, e dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedWeights<T> {
    pub param_a: T,
    pub param_b: T,
    pub param_c: T,
    pub param_d: T,
    pub param_e: T,
}

impl<T: Scalar> CombinedWeights<T> {
    pub fn to_array(&self) -> [T; 5] {
        [self.param_a, self.param_b, self.param_c, self.param_d, self.param_e]
    }

    pub fn from_array(v: [T; 5]) -> Self {
        Self {
            param_a: v[0],
            param_b: v[1],
            param_c: v[2],
            param_d: v[3],
            param_e: v[4],
        }
    }
}

fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if delta > T::zero() && delta.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("sampling step must be positive, got {delta}")))
    }
}

/// Expresses a two-mass chain in the unit-normalized parameters a–e.
pub fn canonical_to_combined<T: Scalar>(
    first: &CanonicalWeights<T>,
    second: &CanonicalWeights<T>,
    delta: T,
) -> Result<CombinedWeights<T>> {
    check_delta(delta)?;
    first.validate()?;
    second.validate()?;
    let d2 = delta * delta;
    Ok(CombinedWeights {
        param_a: d2 * second.spring / first.mass,
        param_b: d2 * second.spring / second.mass,
        param_c: delta * first.damping / first.mass,
        param_d: delta * second.damping / second.mass,
        param_e: (first.spring + second.spring) / second.spring,
    })
}

/// How the combined parameters b and d are initialized when only first-mass
/// initial guesses are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinedInit {
    /// b and d use the reference (true) second mass and damping, with the
    /// initial coupling spring. Reproduces the published initial values.
    #[default]
    TableConsistent,
    /// All five parameters come from the initial canonical guesses.
    Uniform,
}

/// Initial combined weights from canonical guesses under `convention`.
pub fn combined_init<T: Scalar>(
    init: [&CanonicalWeights<T>; 2],
    reference_second: &CanonicalWeights<T>,
    delta: T,
    convention: CombinedInit,
) -> Result<CombinedWeights<T>> {
    let mut u = canonical_to_combined(init[0], init[1], delta)?;
    if convention == CombinedInit::TableConsistent {
        reference_second.validate()?;
        u.param_b = delta * delta * init[1].spring / reference_second.mass;
        u.param_d = delta * reference_second.damping / reference_second.mass;
    }
    Ok(u)
}

/// Boundary treatment of stencil convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Left zero padding; output length equals input length.
    Causal,
    /// Only fully supported outputs are kept.
    #[default]
    Valid,
}

impl Padding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Padding::Causal => "causal",
            Padding::Valid => "valid",
        }
    }
}

impl std::str::FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(Padding::Causal),
            "valid" => Ok(Padding::Valid),
            other => Err(invalid(format!("unknown padding mode {other:?}"))),
        }
    }
}

/// Either the shared projection (α, β, γ) onto the stencil outputs or a free
/// convolution kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingWeights<T> {
    Projection { alpha: T, beta: T, gamma: T },
    WideKernel(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingParams<T> {
    pub weights: MappingWeights<T>,
    pub padding: Padding,
    pub stencil_accuracy: usize,
}

pub const MAX_STENCIL_ACCURACY: usize = 8;

impl<T: Scalar> MappingParams<T> {
    pub fn projection(alpha: T, beta: T, gamma: T) -> Self {
        Self {
            weights: MappingWeights::Projection { alpha, beta, gamma },
            padding: Padding::Valid,
            stencil_accuracy: 1,
        }
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_accuracy(mut self, accuracy: usize) -> Self {
        self.stencil_accuracy = accuracy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_STENCIL_ACCURACY).contains(&self.stencil_accuracy) {
            return Err(invalid(format!(
                "stencil accuracy must be in 1..={MAX_STENCIL_ACCURACY}, got {}",
                self.stencil_accuracy
            )));
        }
        if let MappingWeights::WideKernel(k) = &self.weights {
            if k.is_empty() || k.len() % 2 == 0 {
                return Err(invalid(format!("wide kernel length must be odd, got {}", k.len())));
            }
        }
        Ok(())
    }

    /// The (α, β, γ) triple, if the projection is active.
    pub fn alpha_beta_gamma(&self) -> Option<(T, T, T)> {
        match self.weights {
            MappingWeights::Projection { alpha, beta, gamma } => Some((alpha, beta, gamma)),
            MappingWeights::WideKernel(_) => None,
        }
    }
}

/// Projection coefficients of the mapping from the shared subset
/// {m₁, b₁, k₁, k₂}: α = m₁/(k₂Δ²), β = b₁/(k₂Δ), γ = (k₁+k₂)/k₂.
pub fn projection_from_canonical<T: Scalar>(
    first: &CanonicalWeights<T>,
    coupling_spring: T,
    delta: T,
) -> Result<MappingParams<T>> {
    check_delta(delta)?;
    if coupling_spring == T::zero() {
        return Err(Error::DivisionByZero("coupling spring k2 is zero"));
    }
    Ok(MappingParams::projection(
        first.mass / (coupling_spring * delta * delta),
        first.damping / (coupling_spring * delta),
        (first.spring + coupling_spring) / coupling_spring,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn w(m: f64, b: f64, k: f64) -> CanonicalWeights<f64> {
        CanonicalWeights::new(m, b, k).unwrap()
    }

    #[test]
    fn combined_true_values_match_table() {
        let u = canonical_to_combined(&w(1.5, 0.5, 14.0), &w(0.9, 0.3, 35.0), 0.0667).unwrap();
        assert!((u.param_a - 0.104).abs() < 5e-4, "{}", u.param_a);
        assert!((u.param_b - 0.173).abs() < 5e-4, "{}", u.param_b);
        assert!((u.param_c - 0.022).abs() < 5e-4, "{}", u.param_c);
        assert!((u.param_d - 0.022).abs() < 5e-4, "{}", u.param_d);
        assert_relative_eq!(u.param_e, 1.4, epsilon = 1e-15);
    }

    #[test]
    fn combined_init_conventions() {
        let truth2 = w(0.9, 0.3, 35.0);
        let init = w(1.0, 1.0, 15.0);
        let table = combined_init([&init, &init], &truth2, 0.0667, CombinedInit::TableConsistent).unwrap();
        // published initial column: 0.066, 0.074, 0.066, 0.022, 2.0
        assert!((table.param_a - 0.0667).abs() < 1e-3);
        assert!((table.param_b - 0.074).abs() < 5e-4);
        assert!((table.param_c - 0.0667).abs() < 1e-3);
        assert!((table.param_d - 0.022).abs() < 5e-4);
        assert_eq!(table.param_e, 2.0);

        let uniform = combined_init([&init, &init], &truth2, 0.0667, CombinedInit::Uniform).unwrap();
        assert_relative_eq!(uniform.param_b, uniform.param_a);
        assert_relative_eq!(uniform.param_d, uniform.param_c);
    }

    #[test]
    fn zero_damping_gives_zero_c_and_d() {
        let u = canonical_to_combined(&w(1.0, 0.0, 3.0), &w(2.0, 0.0, 4.0), 0.1).unwrap();
        assert_eq!(u.param_c, 0.0);
        assert_eq!(u.param_d, 0.0);
    }

    #[test]
    fn combined_rejects_bad_delta_and_mass() {
        assert!(canonical_to_combined(&w(1.0, 0.0, 3.0), &w(2.0, 0.0, 4.0), 0.0).is_err());
        let bad = CanonicalWeights {
            mass: -1.0,
            damping: 0.0,
            spring: 1.0,
        };
        assert!(canonical_to_combined(&bad, &w(2.0, 0.0, 4.0), 0.1).is_err());
    }

    #[test]
    fn projection_values() {
        let p = projection_from_canonical(&w(1.5, 0.5, 14.0), 35.0, 0.0667).unwrap();
        let (_, _, gamma) = p.alpha_beta_gamma().unwrap();
        assert_relative_eq!(gamma, 1.4, epsilon = 1e-15);

        let p = projection_from_canonical(&w(1.0, 1.0, 15.0), 15.0, 0.0667).unwrap();
        let (alpha, _, gamma) = p.alpha_beta_gamma().unwrap();
        assert_eq!(gamma, 2.0);
        assert_relative_eq!(alpha, 1.0 / (15.0 * 0.0667 * 0.0667), epsilon = 1e-12);
        assert!((alpha - 14.99).abs() < 0.01);
    }

    #[test]
    fn projection_rejects_zero_coupling() {
        let first = w(1.0, 1.0, 15.0);
        assert!(matches!(
            projection_from_canonical(&first, 0.0, 0.1),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn trajectory_validation() {
        assert!(Trajectory::new(vec![0.0, 1.0], 0.0, 0.0).is_err());
        assert!(Trajectory::new(vec![0.0, f64::NAN], 0.1, 0.0).is_err());
        let t = Trajectory::new(vec![0.0, 1.0, 2.0, 3.0], 0.5, 1.0).unwrap();
        assert_eq!(t.tail(2).unwrap().t0(), 2.0);
        assert_eq!(t.end_time(), 3.0);
    }

    #[test]
    fn mapping_params_validation() {
        let p = MappingParams::projection(1.0, 1.0, 1.0);
        assert!(p.clone().with_accuracy(0).validate().is_err());
        assert!(p.clone().with_accuracy(9).validate().is_err());
        assert!(p.with_accuracy(8).validate().is_ok());
        let wide: MappingParams<f64> = MappingParams {
            weights: MappingWeights::WideKernel(vec![0.0; 24]),
            padding: Padding::Valid,
            stencil_accuracy: 5,
        };
        assert!(wide.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn combined_is_scale_invariant(
                m1 in 0.1..10.0f64, m2 in 0.1..10.0f64,
                b1 in 0.0..5.0f64, b2 in 0.0..5.0f64,
                k1 in 0.1..50.0f64, k2 in 0.1..50.0f64,
                c in 0.01..100.0f64,
            ) {
                let a = canonical_to_combined(&w(m1, b1, k1), &w(m2, b2, k2), 0.0667).unwrap();
                let s = canonical_to_combined(
                    &w(m1 * c, b1 * c, k1 * c), &w(m2 * c, b2 * c, k2 * c), 0.0667).unwrap();
                for (x, y) in a.to_array().iter().zip(s.to_array()) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }

            #[test]
            fn gamma_depends_on_spring_ratio_only(
                k1 in 0.1..50.0f64, k2 in 0.1..50.0f64, c in 0.01..100.0f64,
                m in 0.1..10.0f64, b in 0.0..5.0f64,
            ) {
                let g1 = projection_from_canonical(&w(m, b, k1), k2, 0.05).unwrap()
                    .alpha_beta_gamma().unwrap().2;
                let g2 = projection_from_canonical(&w(2.0 * m, b, k1 * c), k2 * c, 0.01).unwrap()
                    .alpha_beta_gamma().unwrap().2;
                prop_assert!((g1 - g2).abs() <= 1e-12 * g1);
            }
        }
    }
}
