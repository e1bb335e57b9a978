use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::types::{CanonicalWeights, CombinedWeights};

use super::SolverState;

/// Coefficients mapping `[x; x − x⁻]` (length 2N) to the learned increment
/// of N oscillators. Row-major, N × 2N.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrix<T> {
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> StepMatrix<T> {
    pub fn zeros(channels: usize) -> Self {
        Self {
            channels,
            data: vec![T::zero(); 2 * channels * channels],
        }
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let channels = rows.len();
        let mut data = Vec::with_capacity(2 * channels * channels);
        for r in rows {
            if r.len() != 2 * channels {
                return Err(invalid(format!(
                    "step matrix row has {} entries, expected {}",
                    r.len(),
                    2 * channels
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { channels, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * 2 * self.channels + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let n = self.channels;
        self.data[row * 2 * n + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        let n = 2 * self.channels;
        &self.data[row * n..(row + 1) * n]
    }

    /// `M·[x; x − x⁻]` for one row.
    pub fn increment_row(&self, row: usize, x_prev: &[T], x_curr: &[T]) -> T {
        let n = self.channels;
        let r = self.row(row);
        (0..n).fold(T::zero(), |acc, j| {
            acc + r[j] * x_curr[j] + r[n + j] * (x_curr[j] - x_prev[j])
        })
    }

    /// Full step `2x − x⁻ + M·[x; x − x⁻]`.
    pub fn apply(&self, state: &SolverState<T>) -> Vec<T> {
        let two = T::lit(2.0);
        (0..self.channels)
            .map(|i| two * state.x_curr[i] - state.x_prev[i] + self.increment_row(i, &state.x_prev, &state.x_curr))
            .collect()
    }
}

/// A set of trainable parameters that determines a [`StepMatrix`].
pub trait Parametrization<T: Scalar>: Clone + std::fmt::Debug {
    fn names(&self) -> Vec<&'static str>;
    fn values(&self) -> Vec<T>;
    fn set_values(&mut self, values: &[T]);
    fn channels(&self) -> usize;
    fn step_matrix(&self) -> StepMatrix<T>;
    /// ∂M/∂θᵢ for every parameter, in `names()` order.
    fn step_matrix_partials(&self) -> Vec<StepMatrix<T>>;
}

/// [m, b, k] of a damped oscillator: M = [−kΔ²/m, −bΔ/m].
#[derive(Debug, Clone, PartialEq)]
pub struct SingleCanonical<T> {
    pub weights: CanonicalWeights<T>,
    pub delta: T,
}

impl<T: Scalar> Parametrization<T> for SingleCanonical<T> {
    fn names(&self) -> Vec<&'static str> {
        vec!["mass", "damping", "spring"]
    }

    fn values(&self) -> Vec<T> {
        vec![self.weights.mass, self.weights.damping, self.weights.spring]
    }

    fn set_values(&mut self, v: &[T]) {
        self.weights = CanonicalWeights {
            mass: v[0],
            damping: v[1],
            spring: v[2],
        };
    }

    fn channels(&self) -> usize {
        1
    }

    fn step_matrix(&self) -> StepMatrix<T> {
        let CanonicalWeights {
            mass: m,
            damping: b,
            spring: k,
        } = self.weights;
        let d = self.delta;
        StepMatrix {
            channels: 1,
            data: vec![-k * d * d / m, -b * d / m],
        }
    }

    fn step_matrix_partials(&self) -> Vec<StepMatrix<T>> {
        let CanonicalWeights {
            mass: m,
            damping: b,
            spring: k,
        } = self.weights;
        let d = self.delta;
        let m2 = m * m;
        vec![
            StepMatrix {
                channels: 1,
                data: vec![k * d * d / m2, b * d / m2],
            },
            StepMatrix {
                channels: 1,
                data: vec![T::zero(), -d / m],
            },
            StepMatrix {
                channels: 1,
                data: vec![-d * d / m, T::zero()],
            },
        ]
    }
}

/// [m, k] of the single-filter network: M = [−kΔ²/m, 0].
#[derive(Debug, Clone, PartialEq)]
pub struct SingleConservative<T> {
    pub mass: T,
    pub spring: T,
    pub delta: T,
}

impl<T: Scalar> SingleConservative<T> {
    pub fn weights(&self) -> CanonicalWeights<T> {
        CanonicalWeights {
            mass: self.mass,
            damping: T::zero(),
            spring: self.spring,
        }
    }
}

impl<T: Scalar> Parametrization<T> for SingleConservative<T> {
    fn names(&self) -> Vec<&'static str> {
        vec!["mass", "spring"]
    }

    fn values(&self) -> Vec<T> {
        vec![self.mass, self.spring]
    }

    fn set_values(&mut self, v: &[T]) {
        self.mass = v[0];
        self.spring = v[1];
    }

    fn channels(&self) -> usize {
        1
    }

    fn step_matrix(&self) -> StepMatrix<T> {
        let d = self.delta;
        StepMatrix {
            channels: 1,
            data: vec![-self.spring * d * d / self.mass, T::zero()],
        }
    }

    fn step_matrix_partials(&self) -> Vec<StepMatrix<T>> {
        let d = self.delta;
        let m = self.mass;
        vec![
            StepMatrix {
                channels: 1,
                data: vec![self.spring * d * d / (m * m), T::zero()],
            },
            StepMatrix {
                channels: 1,
                data: vec![-d * d / m, T::zero()],
            },
        ]
    }
}

/// [m₁, m₂, b₁, b₂, k₁, k₂] of the two-mass chain.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCanonical<T> {
    pub weights: [CanonicalWeights<T>; 2],
    pub delta: T,
}

impl<T: Scalar> Parametrization<T> for CoupledCanonical<T> {
    fn names(&self) -> Vec<&'static str> {
        vec!["m1", "m2", "b1", "b2", "k1", "k2"]
    }

    fn values(&self) -> Vec<T> {
        let [a, b] = self.weights;
        vec![a.mass, b.mass, a.damping, b.damping, a.spring, b.spring]
    }

    fn set_values(&mut self, v: &[T]) {
        self.weights = [
            CanonicalWeights {
                mass: v[0],
                damping: v[2],
                spring: v[4],
            },
            CanonicalWeights {
                mass: v[1],
                damping: v[3],
                spring: v[5],
            },
        ];
    }

    fn channels(&self) -> usize {
        2
    }

    fn step_matrix(&self) -> StepMatrix<T> {
        let [w1, w2] = self.weights;
        let d = self.delta;
        let d2 = d * d;
        let z = T::zero();
        StepMatrix {
            channels: 2,
            data: vec![
                -d2 * (w1.spring + w2.spring) / w1.mass,
                d2 * w2.spring / w1.mass,
                -d * w1.damping / w1.mass,
                z,
                d2 * w2.spring / w2.mass,
                -d2 * w2.spring / w2.mass,
                z,
                -d * w2.damping / w2.mass,
            ],
        }
    }

    fn step_matrix_partials(&self) -> Vec<StepMatrix<T>> {
        let [w1, w2] = self.weights;
        let d = self.delta;
        let d2 = d * d;
        let z = T::zero();
        let (m1, m2) = (w1.mass, w2.mass);
        let (b1, b2) = (w1.damping, w2.damping);
        let (k1, k2) = (w1.spring, w2.spring);
        let mk = |data: [T; 8]| StepMatrix {
            channels: 2,
            data: data.to_vec(),
        };
        vec![
            // m1
            mk([
                d2 * (k1 + k2) / (m1 * m1),
                -d2 * k2 / (m1 * m1),
                d * b1 / (m1 * m1),
                z,
                z,
                z,
                z,
                z,
            ]),
            // m2
            mk([
                z,
                z,
                z,
                z,
                -d2 * k2 / (m2 * m2),
                d2 * k2 / (m2 * m2),
                z,
                d * b2 / (m2 * m2),
            ]),
            // b1
            mk([z, z, -d / m1, z, z, z, z, z]),
            // b2
            mk([z, z, z, z, z, z, z, -d / m2]),
            // k1
            mk([-d2 / m1, z, z, z, z, z, z, z]),
            // k2
            mk([-d2 / m1, d2 / m1, z, z, d2 / m2, -d2 / m2, z, z]),
        ]
    }
}

/// [a, b, c, d, e]: M = [[−ae, a, −c, 0], [b, −b, 0, −d]].
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCombined<T> {
    pub weights: CombinedWeights<T>,
}

impl<T: Scalar> Parametrization<T> for CoupledCombined<T> {
    fn names(&self) -> Vec<&'static str> {
        vec!["param_a", "param_b", "param_c", "param_d", "param_e"]
    }

    fn values(&self) -> Vec<T> {
        self.weights.to_array().to_vec()
    }

    fn set_values(&mut self, v: &[T]) {
        self.weights = CombinedWeights::from_array([v[0], v[1], v[2], v[3], v[4]]);
    }

    fn channels(&self) -> usize {
        2
    }

    fn step_matrix(&self) -> StepMatrix<T> {
        let u = self.weights;
        let z = T::zero();
        StepMatrix {
            channels: 2,
            data: vec![
                -u.param_a * u.param_e,
                u.param_a,
                -u.param_c,
                z,
                u.param_b,
                -u.param_b,
                z,
                -u.param_d,
            ],
        }
    }

    fn step_matrix_partials(&self) -> Vec<StepMatrix<T>> {
        let u = self.weights;
        let z = T::zero();
        let o = T::one();
        let mk = |data: [T; 8]| StepMatrix {
            channels: 2,
            data: data.to_vec(),
        };
        vec![
            mk([-u.param_e, o, z, z, z, z, z, z]),
            mk([z, z, z, z, o, -o, z, z]),
            mk([z, z, -o, z, z, z, z, z]),
            mk([z, z, z, z, z, z, z, -o]),
            mk([-u.param_a, z, z, z, z, z, z, z]),
        ]
    }
}
