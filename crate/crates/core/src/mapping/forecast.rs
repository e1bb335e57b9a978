use crate::error::{invalid, Error, Result};
use crate::scalar::{max_abs, Scalar};
use crate::solver::{Parametrization, DIVERGENCE_FACTOR};
use crate::training::PartialModel;
use crate::types::Trajectory;

/// Free forecast of the observed oscillator of a partially observed chain.
///
/// Without the inner feedback loop the hidden position stays at the last
/// value mapped from `x1_window`. With it, x̂₂ is re-derived at every step
/// from the most recent samples of the growing (partly forecast) x₁ window.
pub fn forecast_partial<T: Scalar, P: Parametrization<T>>(
    model: &PartialModel<T, P>,
    x1_window: &Trajectory<T>,
    horizon: usize,
    ifl: bool,
) -> Result<Trajectory<T>> {
    let delta = x1_window.delta();
    let t0 = x1_window.end_time();
    if horizon == 0 {
        return Trajectory::new(Vec::new(), delta, t0);
    }
    let kernel = model.kernel();
    let l = kernel.len();
    if x1_window.len() < l.max(2) {
        return Err(invalid(format!(
            "forecast window needs at least {} samples, got {}",
            l.max(2),
            x1_window.len()
        )));
    }
    let bound = T::lit(DIVERGENCE_FACTOR) * max_abs(x1_window.samples());
    let mut x: Vec<T> = x1_window.samples().to_vec();
    let last_hidden = |x: &[T]| {
        x[x.len() - l..]
            .iter()
            .zip(&kernel)
            .fold(T::zero(), |acc, (&v, &c)| acc + c * v)
    };
    let frozen = last_hidden(&x);
    for step in 0..horizon {
        let hidden = if ifl { last_hidden(&x) } else { frozen };
        let n = x.len();
        let next = model.observed_step(x[n - 2], x[n - 1], hidden);
        if !next.is_finite() || next.abs() > bound {
            return Err(Error::DivergedForecast {
                step,
                value: next.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
            });
        }
        x.push(next);
    }
    let n = x1_window.len();
    Trajectory::new(x.split_off(n), delta, t0)
}
