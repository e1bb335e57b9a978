//! Second-order finite-difference residual steps.
//!
//! Every step has the form `x⁺ = 2x − x⁻ + M·[x; x − x⁻]`: the identity skip
//! connection plus the differential residual `x − x⁻` realize the central
//! second difference, and `M` carries the learned coefficients. The
//! first-order forward-Euler residual block is kept as a baseline.

mod forecast;
mod matrix;

pub use forecast::{forecast_with, free_forecast, RetrainPolicy, DIVERGENCE_FACTOR};
pub use matrix::{CoupledCanonical, CoupledCombined, Parametrization, SingleCanonical, SingleConservative, StepMatrix};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::types::{CanonicalWeights, CombinedWeights};

/// Positions at t − Δ and t, one entry per observed oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T> {
    pub x_prev: Vec<T>,
    pub x_curr: Vec<T>,
}

impl<T: Scalar> SolverState<T> {
    pub fn new(x_prev: Vec<T>, x_curr: Vec<T>) -> Result<Self> {
        if x_prev.len() != x_curr.len() {
            return Err(invalid(format!(
                "state lengths differ: {} vs {}",
                x_prev.len(),
                x_curr.len()
            )));
        }
        if x_prev.iter().chain(&x_curr).any(|v| !v.is_finite()) {
            return Err(invalid("state must be finite"));
        }
        Ok(Self { x_prev, x_curr })
    }

    pub fn single(x_prev: T, x_curr: T) -> Self {
        Self {
            x_prev: vec![x_prev],
            x_curr: vec![x_curr],
        }
    }

    pub fn pair(x_prev: [T; 2], x_curr: [T; 2]) -> Self {
        Self {
            x_prev: x_prev.to_vec(),
            x_curr: x_curr.to_vec(),
        }
    }

    pub fn channels(&self) -> usize {
        self.x_curr.len()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            x_prev: self.x_prev.iter().map(|&v| v * c).collect(),
            x_curr: self.x_curr.iter().map(|&v| v * c).collect(),
        }
    }

    /// Shifts the window forward: `x_curr` becomes `x_prev`.
    pub fn advance(&mut self, next: Vec<T>) {
        self.x_prev = std::mem::replace(&mut self.x_curr, next);
    }
}

fn two<T: Scalar>() -> T {
    T::lit(2.0)
}

/// Damped single oscillator: x⁺ = −(bΔ/m)(x − x⁻) − (kΔ²/m)x + 2x − x⁻.
pub fn step_single<T: Scalar>(w: &CanonicalWeights<T>, x_prev: T, x_curr: T, delta: T) -> T {
    let dx = x_curr - x_prev;
    -(w.damping * delta / w.mass) * dx - (w.spring * delta * delta / w.mass) * x_curr + two::<T>() * x_curr - x_prev
}

/// Single-filter variant without the dissipative term (Störmer–Verlet).
pub fn step_single_conservative<T: Scalar>(w: &CanonicalWeights<T>, x_prev: T, x_curr: T, delta: T) -> T {
    two::<T>() * x_curr - x_prev - (w.spring * delta * delta / w.mass) * x_curr
}

/// Discrete energy ½m((x − x⁻)/Δ)² + ½k·x·x⁻, an exact invariant of
/// [`step_single_conservative`].
pub fn verlet_energy<T: Scalar>(w: &CanonicalWeights<T>, x_prev: T, x_curr: T, delta: T) -> T {
    let half = T::lit(0.5);
    let v = (x_curr - x_prev) / delta;
    half * w.mass * v * v + half * w.spring * x_curr * x_prev
}

/// Two-mass chain step derived from the chain ODEs.
pub fn step_coupled<T: Scalar>(chain: &[CanonicalWeights<T>; 2], state: &SolverState<T>, delta: T) -> Result<[T; 2]> {
    if state.channels() != 2 {
        return Err(invalid(format!(
            "coupled step needs 2 channels, got {}",
            state.channels()
        )));
    }
    let [w1, w2] = chain;
    let (x1, x2) = (state.x_curr[0], state.x_curr[1]);
    let (p1, p2) = (state.x_prev[0], state.x_prev[1]);
    let d2 = delta * delta;
    let next1 = -(w1.damping * delta / w1.mass) * (x1 - p1) - (d2 / w1.mass) * (w1.spring + w2.spring) * x1
        + (w2.spring * d2 / w1.mass) * x2
        + two::<T>() * x1
        - p1;
    let next2 =
        -(w2.damping * delta / w2.mass) * (x2 - p2) + (w2.spring * d2 / w2.mass) * (x1 - x2) + two::<T>() * x2 - p2;
    Ok([next1, next2])
}

/// The coupled step written in the combined parameters a–e; no Δ appears.
pub fn step_combined<T: Scalar>(u: &CombinedWeights<T>, state: &SolverState<T>) -> Result<[T; 2]> {
    if state.channels() != 2 {
        return Err(invalid(format!(
            "combined step needs 2 channels, got {}",
            state.channels()
        )));
    }
    let (x1, x2) = (state.x_curr[0], state.x_curr[1]);
    let (p1, p2) = (state.x_prev[0], state.x_prev[1]);
    let next1 = -u.param_c * (x1 - p1) - u.param_a * u.param_e * x1 + u.param_a * x2 + two::<T>() * x1 - p1;
    let next2 = -u.param_d * (x2 - p2) + u.param_b * (x1 - x2) + two::<T>() * x2 - p2;
    Ok([next1, next2])
}

/// Forward-Euler residual block x⁺ = x + d·F̃(x) with F̃ a per-channel linear
/// gain.
pub fn step_euler_resnet<T: Scalar>(gains: &[T], x: &[T], d: T) -> Result<Vec<T>> {
    if !(d > T::zero()) {
        return Err(invalid(format!("layer step must be positive, got {d}")));
    }
    if gains.len() != x.len() {
        return Err(invalid(format!("{} gains for {} channels", gains.len(), x.len())));
    }
    Ok(x.iter().zip(gains).map(|(&xi, &g)| xi + d * g * xi).collect())
}
