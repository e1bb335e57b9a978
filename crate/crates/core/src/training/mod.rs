//! One-step-ahead losses, closed-form gradients and the optimization loops
//! that fit step coefficients to observed trajectories.

mod fit;
mod model;
mod optim;
mod partial;
mod report;

pub use fit::{fit, FitConfig, FitOutcome, Trainer};
pub use model::{
    gradient, loss_and_gradient, one_step_loss, EulerResNet, FullObservation, Model, Recurrent, ResidualGroup,
};
pub use optim::{Adam, Optimizer, OptimizerKind};
pub use partial::{fit_partial, MappingMode, MappingSetup, PartialModel};
pub use report::{relative_errors, FitReport};

use serde::{Deserialize, Serialize};

/// Which parameter set the solver is trained in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParametrizationKind {
    #[default]
    Canonical,
    Combined,
}
