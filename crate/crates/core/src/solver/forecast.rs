use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{max_abs, Scalar};
use crate::training::{Recurrent, Trainer};
use crate::types::Trajectory;

use super::SolverState;

/// A forecast aborts once |x| exceeds this multiple of the largest
/// magnitude in the data it was seeded from.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Whether the model is re-trained between forecast points. Re-training
/// always uses the original ground-truth window; fed-back predictions are
/// only ever step inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainPolicy {
    None,
    PerStep { iterations: usize },
}

impl Default for RetrainPolicy {
    fn default() -> Self {
        RetrainPolicy::PerStep { iterations: 50 }
    }
}

fn seed_state<T: Scalar>(seed: &[Trajectory<T>], channels: usize) -> Result<SolverState<T>> {
    if seed.len() != channels {
        return Err(invalid(format!(
            "model has {channels} channel(s), seed has {}",
            seed.len()
        )));
    }
    let n = seed[0].len();
    if n < 2 || seed.iter().any(|s| s.len() != n) {
        return Err(invalid(
            "seed window needs at least 2 samples per channel, all of equal length",
        ));
    }
    SolverState::new(
        seed.iter().map(|s| s.samples()[n - 2]).collect(),
        seed.iter().map(|s| s.samples()[n - 1]).collect(),
    )
}

fn bound_of<T: Scalar>(data: &[Trajectory<T>]) -> T {
    let m = data.iter().fold(T::zero(), |a, d| a.max(max_abs(d.samples())));
    T::lit(DIVERGENCE_FACTOR) * m
}

fn pack<T: Scalar>(out: Vec<Vec<T>>, seed: &[Trajectory<T>]) -> Result<Vec<Trajectory<T>>> {
    out.into_iter()
        .zip(seed)
        .map(|(v, s)| Trajectory::new(v, s.delta(), s.end_time()))
        .collect()
}

fn guarded<T: Scalar>(next: &[T], bound: T, step: usize) -> Result<()> {
    match next.iter().find(|v| !v.is_finite() || v.abs() > bound) {
        Some(v) => Err(Error::DivergedForecast {
            step,
            value: v.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        }),
        None => Ok(()),
    }
}

/// Iterates a fixed model from the last two samples of `seed`.
pub fn forecast_with<T: Scalar, M: Recurrent<T>>(
    model: &M,
    seed: &[Trajectory<T>],
    horizon: usize,
) -> Result<Vec<Trajectory<T>>> {
    let mut state = seed_state(seed, model.channels())?;
    let bound = bound_of(seed);
    let mut out = vec![Vec::with_capacity(horizon); seed.len()];
    for step in 0..horizon {
        let next = model.predict(&state);
        guarded(&next, bound, step)?;
        for (o, &v) in out.iter_mut().zip(&next) {
            o.push(v);
        }
        state.advance(next);
    }
    pack(out, seed)
}

/// Free forecast continuing `training`. Each prediction becomes the input of
/// the next step; under [`RetrainPolicy::PerStep`] the trainer runs that many
/// further optimizer iterations on `training` before every point.
pub fn free_forecast<T: Scalar, M: Recurrent<T>>(
    trainer: &mut Trainer<T, M>,
    training: &[Trajectory<T>],
    horizon: usize,
    retrain: RetrainPolicy,
) -> Result<Vec<Trajectory<T>>> {
    let mut state = seed_state(training, trainer.model().channels())?;
    let bound = bound_of(training);
    let mut out = vec![Vec::with_capacity(horizon); training.len()];
    for step in 0..horizon {
        if let RetrainPolicy::PerStep { iterations } = retrain {
            if iterations > 0 {
                trainer.train_for(training, iterations)?;
            }
        }
        let next = trainer.model().predict(&state);
        guarded(&next, bound, step)?;
        for (o, &v) in out.iter_mut().zip(&next) {
            o.push(v);
        }
        state.advance(next);
    }
    pack(out, training)
}
