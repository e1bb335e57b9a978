//! Ground-truth trajectories for single oscillators and wall-attached chains.
//!
//! Integration uses classical RK4 with a fixed number of substeps per sample,
//! which keeps the integration error far below anything the learned models
//! can resolve. [`analytic_single`] is the closed-form underdamped solution
//! and serves as an independent check on the integrator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::types::{CanonicalWeights, Trajectory};

pub const DEFAULT_SUBSTEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState<T> {
    pub positions: Vec<T>,
    pub velocities: Vec<T>,
}

impl<T: Scalar> InitialState<T> {
    pub fn new(positions: Vec<T>, velocities: Vec<T>) -> Result<Self> {
        let s = Self { positions, velocities };
        s.validate(s.positions.len())?;
        Ok(s)
    }

    /// x₀ = 1 m at rest.
    pub fn single_default() -> Self {
        Self {
            positions: vec![T::one()],
            velocities: vec![T::zero()],
        }
    }

    /// (x₁, x₂) = (1, 0.5) m at rest.
    pub fn coupled_default() -> Self {
        Self {
            positions: vec![T::one(), T::lit(0.5)],
            velocities: vec![T::zero(), T::zero()],
        }
    }

    fn validate(&self, oscillators: usize) -> Result<()> {
        if self.positions.len() != oscillators || self.velocities.len() != oscillators {
            return Err(invalid(format!(
                "initial state has {} positions and {} velocities, expected {oscillators}",
                self.positions.len(),
                self.velocities.len()
            )));
        }
        if self.positions.iter().chain(&self.velocities).any(|v| !v.is_finite()) {
            return Err(invalid("initial state must be finite"));
        }
        Ok(())
    }
}

/// Positions and velocities of every oscillator at every sample.
#[derive(Debug, Clone)]
pub struct ChainSolution<T> {
    pub positions: Vec<Vec<T>>,
    pub velocities: Vec<Vec<T>>,
    pub delta: T,
}

impl<T: Scalar> ChainSolution<T> {
    pub fn trajectories(&self) -> Result<Vec<Trajectory<T>>> {
        self.positions
            .iter()
            .map(|p| Trajectory::new(p.clone(), self.delta, T::zero()))
            .collect()
    }

    /// Kinetic plus spring potential energy at sample `i`; the first spring
    /// is attached to the wall.
    pub fn energy(&self, chain: &[CanonicalWeights<T>], i: usize) -> T {
        let half = T::lit(0.5);
        let mut e = T::zero();
        let mut left = T::zero();
        for (j, w) in chain.iter().enumerate() {
            let x = self.positions[j][i];
            let v = self.velocities[j][i];
            let stretch = x - left;
            e = e + half * w.mass * v * v + half * w.spring * stretch * stretch;
            left = x;
        }
        e
    }
}

/// Accelerations of a wall-attached chain:
/// mᵢẍᵢ = −bᵢẋᵢ − kᵢ(xᵢ − xᵢ₋₁) + kᵢ₊₁(xᵢ₊₁ − xᵢ), with x₀ ≡ 0 and k_{N+1} ≡ 0.
fn chain_derivative<T: Scalar>(chain: &[CanonicalWeights<T>], state: &[T], out: &mut [T]) {
    let n = chain.len();
    let (x, v) = state.split_at(n);
    for i in 0..n {
        let left = if i == 0 { T::zero() } else { x[i - 1] };
        let mut force = -chain[i].damping * v[i] - chain[i].spring * (x[i] - left);
        if i + 1 < n {
            force = force + chain[i + 1].spring * (x[i + 1] - x[i]);
        }
        out[i] = v[i];
        out[n + i] = force / chain[i].mass;
    }
}

fn rk4_step<T: Scalar>(chain: &[CanonicalWeights<T>], state: &mut [T], h: T, scratch: &mut [Vec<T>; 5]) {
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);
    let [k1, k2, k3, k4, tmp] = scratch;
    chain_derivative(chain, state, k1);
    for i in 0..state.len() {
        tmp[i] = state[i] + half * h * k1[i];
    }
    chain_derivative(chain, tmp, k2);
    for i in 0..state.len() {
        tmp[i] = state[i] + half * h * k2[i];
    }
    chain_derivative(chain, tmp, k3);
    for i in 0..state.len() {
        tmp[i] = state[i] + h * k3[i];
    }
    chain_derivative(chain, tmp, k4);
    for i in 0..state.len() {
        state[i] = state[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
    }
}

/// Integrates a chain of any length. The `spring` of oscillator i couples it
/// to oscillator i−1 (the wall for i = 0).
pub fn simulate_chain_with<T: Scalar>(
    chain: &[CanonicalWeights<T>],
    init: &InitialState<T>,
    delta: T,
    n: usize,
    substeps: usize,
) -> Result<ChainSolution<T>> {
    if chain.is_empty() {
        return Err(invalid("chain must contain at least one oscillator"));
    }
    for w in chain {
        w.validate()?;
    }
    init.validate(chain.len())?;
    if !(delta > T::zero()) {
        return Err(invalid(format!("sampling step must be positive, got {delta}")));
    }
    if n < 3 {
        return Err(invalid(format!("need at least 3 samples, got {n}")));
    }
    if substeps == 0 {
        return Err(invalid("substeps must be at least 1"));
    }
    let m = chain.len();
    let mut state: Vec<T> = init.positions.iter().chain(&init.velocities).copied().collect();
    let mut scratch: [Vec<T>; 5] = std::array::from_fn(|_| vec![T::zero(); 2 * m]);
    let mut positions = vec![Vec::with_capacity(n); m];
    let mut velocities = vec![Vec::with_capacity(n); m];
    let h = delta / T::from_usize_lossy(substeps);
    for sample in 0..n {
        if sample > 0 {
            for _ in 0..substeps {
                rk4_step(chain, &mut state, h, &mut scratch);
            }
        }
        for j in 0..m {
            positions[j].push(state[j]);
            velocities[j].push(state[m + j]);
        }
    }
    Ok(ChainSolution {
        positions,
        velocities,
        delta,
    })
}

pub fn simulate_chain<T: Scalar>(
    chain: &[CanonicalWeights<T>],
    init: &InitialState<T>,
    delta: T,
    n: usize,
) -> Result<Vec<Trajectory<T>>> {
    simulate_chain_with(chain, init, delta, n, DEFAULT_SUBSTEPS)?.trajectories()
}

/// Samples mẍ = −bẋ − kx at spacing `delta`.
pub fn simulate_single<T: Scalar>(
    w: &CanonicalWeights<T>,
    init: &InitialState<T>,
    delta: T,
    n: usize,
) -> Result<Trajectory<T>> {
    let mut out = simulate_chain(std::slice::from_ref(w), init, delta, n)?;
    Ok(out.remove(0))
}

/// Samples the two-mass chain; returns (x₁, x₂).
pub fn simulate_coupled<T: Scalar>(
    chain: &[CanonicalWeights<T>],
    init: &InitialState<T>,
    delta: T,
    n: usize,
) -> Result<(Trajectory<T>, Trajectory<T>)> {
    if chain.len() != 2 {
        return Err(invalid(format!(
            "coupled system needs exactly 2 oscillators, got {}",
            chain.len()
        )));
    }
    let mut out = simulate_chain(chain, init, delta, n)?;
    let second = out.pop().expect("two trajectories");
    let first = out.pop().expect("two trajectories");
    Ok((first, second))
}

/// Closed-form underdamped solution x(t) = e^{−γt}(A cos ω_d t + B sin ω_d t),
/// γ = b/2m.
pub fn analytic_single<T: Scalar>(w: &CanonicalWeights<T>, init: &InitialState<T>, t: T) -> Result<T> {
    w.validate()?;
    init.validate(1)?;
    let omega_d = w.damped_frequency().ok_or_else(|| {
        Error::UnsupportedRegime(format!(
            "b² = {} is not below 4mk = {}",
            w.damping * w.damping,
            T::lit(4.0) * w.mass * w.spring
        ))
    })?;
    let decay = w.damping / (T::lit(2.0) * w.mass);
    let x0 = init.positions[0];
    let v0 = init.velocities[0];
    let b = (v0 + decay * x0) / omega_d;
    Ok((-decay * t).exp() * (x0 * (omega_d * t).cos() + b * (omega_d * t).sin()))
}

/// Adds seeded i.i.d. Gaussian noise. `std == 0` returns the input unchanged.
pub fn add_noise<T: Scalar>(traj: &Trajectory<T>, std: f64, seed: u64) -> Result<Trajectory<T>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(invalid(format!("noise std must be non-negative, got {std}")));
    }
    if std == 0.0 {
        return Ok(traj.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = traj
        .samples()
        .iter()
        .map(|&x| x + T::lit(normal.sample(&mut rng)))
        .collect();
    Trajectory::new(samples, traj.delta(), traj.t0())
}
