use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::types::Trajectory;

use super::model::{loss_and_gradient, Model};
use super::optim::{Optimizer, OptimizerKind};
use super::report::FitReport;
use super::ParametrizationKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once consecutive losses differ by less than this.
    pub tolerance: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub parametrization: ParametrizationKind,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            max_iterations: 5000,
            tolerance: 1e-12,
            optimizer: OptimizerKind::AdaptiveMoments,
            seed: 0,
            parametrization: ParametrizationKind::Canonical,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid(format!(
                "tolerance must be non-negative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// A model together with its optimizer state, so training can be resumed
/// (e.g. between free-forecast steps) without resetting the moments.
#[derive(Debug, Clone)]
pub struct Trainer<T: Scalar, M> {
    model: M,
    optimizer: Optimizer<T>,
    config: FitConfig,
    init: Vec<T>,
    loss_history: Vec<T>,
    iterations: usize,
    converged: bool,
}

impl<T: Scalar, M: Model<T>> Trainer<T, M> {
    pub fn new(model: M, config: FitConfig) -> Result<Self> {
        config.validate()?;
        let init = model.parameters();
        let optimizer = Optimizer::new(config.optimizer, T::lit(config.learning_rate), init.len());
        Ok(Self {
            model,
            optimizer,
            config,
            init,
            loss_history: Vec::new(),
            iterations: 0,
            converged: false,
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn into_model(self) -> M {
        self.model
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn loss_history(&self) -> &[T] {
        &self.loss_history
    }

    /// Runs up to `max_iterations` optimizer steps, stopping early on
    /// loss-change convergence.
    pub fn train(&mut self, data: &[Trajectory<T>]) -> Result<()> {
        self.train_for(data, self.config.max_iterations)
    }

    pub fn train_for(&mut self, data: &[Trajectory<T>], iterations: usize) -> Result<()> {
        let mask = self.model.trainable();
        let tolerance = T::lit(self.config.tolerance);
        let mut params = self.model.parameters();
        let mut previous: Option<T> = None;
        self.converged = false;
        for _ in 0..iterations {
            let (loss, grad) = loss_and_gradient(&self.model, data)?;
            self.check_finite(loss, &grad)?;
            self.loss_history.push(loss);
            if let Some(prev) = previous {
                if (prev - loss).abs() < tolerance {
                    self.converged = true;
                    return Ok(());
                }
            }
            previous = Some(loss);
            self.optimizer.step(&mut params, &grad, &mask);
            self.model.set_parameters(&params);
            self.iterations += 1;
        }
        let (loss, grad) = loss_and_gradient(&self.model, data)?;
        self.check_finite(loss, &grad)?;
        self.loss_history.push(loss);
        Ok(())
    }

    fn check_finite(&self, loss: T, grad: &[T]) -> Result<()> {
        if loss.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Ok(())
        } else {
            Err(Error::DivergedTraining {
                iteration: self.iterations,
                loss: loss.to_f64_lossy(),
            })
        }
    }

    pub fn report(&self) -> FitReport<T> {
        FitReport::new(
            self.model.parameter_names(),
            self.init.clone(),
            self.model.parameters(),
            self.loss_history.clone(),
            self.iterations,
            self.converged,
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T: Scalar, M> {
    pub trainer: Trainer<T, M>,
    pub report: FitReport<T>,
}

impl<T: Scalar, M> FitOutcome<T, M> {
    pub fn model(&self) -> &M {
        &self.trainer.model
    }
}

/// Fits `model` to `data` from its current parameters.
pub fn fit<T: Scalar, M: Model<T>>(model: M, data: &[Trajectory<T>], config: &FitConfig) -> Result<FitOutcome<T, M>> {
    let mut trainer = Trainer::new(model, config.clone())?;
    trainer.train(data)?;
    let report = trainer.report();
    Ok(FitOutcome { trainer, report })
}
