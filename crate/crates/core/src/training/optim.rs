use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    PlainGd,
    #[default]
    AdaptiveMoments,
}

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    first: Vec<T>,
    second: Vec<T>,
    steps: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: T, n: usize) -> Self {
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            first: vec![T::zero(); n],
            second: vec![T::zero(); n],
            steps: 0,
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], mask: &[bool]) {
        self.steps += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.steps);
        let c2 = one - self.beta2.powi(self.steps);
        for i in 0..params.len() {
            if !mask[i] {
                continue;
            }
            let g = grad[i];
            self.first[i] = self.beta1 * self.first[i] + (one - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (one - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] = params[i] - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer<T> {
    GradientDescent { learning_rate: T },
    Adam(Adam<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: T, n: usize) -> Self {
        match kind {
            OptimizerKind::PlainGd => Optimizer::GradientDescent { learning_rate },
            OptimizerKind::AdaptiveMoments => Optimizer::Adam(Adam::new(learning_rate, n)),
        }
    }

    /// Updates `params` in place; entries with `mask[i] == false` are never written.
    pub fn step(&mut self, params: &mut [T], grad: &[T], mask: &[bool]) {
        debug_assert_eq!(params.len(), grad.len());
        debug_assert_eq!(params.len(), mask.len());
        match self {
            Optimizer::GradientDescent { learning_rate } => {
                for i in 0..params.len() {
                    if mask[i] {
                        params[i] = params[i] - *learning_rate * grad[i];
                    }
                }
            }
            Optimizer::Adam(adam) => adam.step(params, grad, mask),
        }
    }
}
