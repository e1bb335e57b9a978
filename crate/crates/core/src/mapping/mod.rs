//! Reconstruction of an unobserved oscillator from its observed neighbour.
//!
//! Solving the first chain equation for x₂ gives
//! x₂ = (m₁ẍ₁ + b₁ẋ₁ + (k₁+k₂)x₁)/k₂. With backward stencils for the
//! derivatives this is a single causal convolution of x₁, parametrized by
//! the projection (α, β, γ) or, unshared, by a free kernel.

mod forecast;
mod stencil;

pub use forecast::forecast_partial;
pub use stencil::{
    apply_stencil, convolve, exact_backward_stencil, make_backward_stencil, Stencil, StencilBank, StencilField,
};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::types::{CanonicalWeights, MappingParams, MappingWeights, Padding, Trajectory};

/// Right-aligned kernel α·d₂ + β·d₁ + γ·δ of length `bank.support()`.
pub fn projection_kernel<T: Scalar>(alpha: T, beta: T, gamma: T, bank: &StencilBank<T>) -> Vec<T> {
    let len = bank.support();
    let mut kernel = vec![T::zero(); len];
    for (dst, &c) in kernel[len - bank.d2.len()..].iter_mut().zip(bank.d2.coefficients()) {
        *dst = *dst + alpha * c;
    }
    for (dst, &c) in kernel[len - bank.d1.len()..].iter_mut().zip(bank.d1.coefficients()) {
        *dst = *dst + beta * c;
    }
    kernel[len - 1] = kernel[len - 1] + gamma;
    kernel
}

/// Embeds the shared projection into a wider, right-aligned kernel so both
/// mapping modes start from the same map.
pub fn widen_projection<T: Scalar>(alpha: T, beta: T, gamma: T, bank: &StencilBank<T>, width: usize) -> Result<Vec<T>> {
    let narrow = projection_kernel(alpha, beta, gamma, bank);
    if width < narrow.len() {
        return Err(invalid(format!(
            "kernel width {width} is shorter than the stencil support {}",
            narrow.len()
        )));
    }
    let mut kernel = vec![T::zero(); width - narrow.len()];
    kernel.extend(narrow);
    Ok(kernel)
}

/// The convolution kernel realizing `params`.
pub fn mapping_kernel<T: Scalar>(params: &MappingParams<T>, bank: &StencilBank<T>) -> Result<Vec<T>> {
    params.validate()?;
    if params.stencil_accuracy != bank.accuracy_order {
        return Err(invalid(format!(
            "mapping expects stencil accuracy {}, bank has {}",
            params.stencil_accuracy, bank.accuracy_order
        )));
    }
    Ok(match &params.weights {
        MappingWeights::Projection { alpha, beta, gamma } => projection_kernel(*alpha, *beta, *gamma, bank),
        MappingWeights::WideKernel(k) => k.clone(),
    })
}

/// x̂₂ = α·D₂(x₁) + β·D₁(x₁) + γ·x₁, or the wide-kernel convolution of x₁.
/// Valid padding drops the first `kernel_len − 1` samples.
pub fn map_to_hidden<T: Scalar>(
    x1: &Trajectory<T>,
    params: &MappingParams<T>,
    bank: &StencilBank<T>,
) -> Result<Trajectory<T>> {
    let kernel = mapping_kernel(params, bank)?;
    convolve(x1, &kernel, params.padding)
}

/// Position of oscillator `i = prefix.len() + 1` of a wall-attached chain
/// from its predecessors:
/// xᵢ = xᵢ₋₁ + [mᵢ₋₁ẍᵢ₋₁ + bᵢ₋₁ẋᵢ₋₁ + kᵢ₋₁(xᵢ₋₁ − xᵢ₋₂)]/kᵢ with x₀ ≡ 0.
///
/// `chain[j]` holds the weights of oscillator j+1. Prefix trajectories of
/// different lengths are aligned on their last sample.
pub fn recover_xi<T: Scalar>(
    prefix: &[Trajectory<T>],
    chain: &[CanonicalWeights<T>],
    bank: &StencilBank<T>,
    padding: Padding,
) -> Result<Trajectory<T>> {
    let i = prefix.len() + 1;
    if prefix.is_empty() {
        return Err(invalid("recover_xi needs at least one predecessor trajectory"));
    }
    if chain.len() < i {
        return Err(invalid(format!(
            "oscillator {i} needs {i} chain weights, got {}",
            chain.len()
        )));
    }
    let prev = &chain[i - 2];
    prev.validate()?;
    let k_i = chain[i - 1].spring;
    if k_i == T::zero() {
        return Err(crate::Error::DivisionByZero(
            "coupling spring to the recovered oscillator is zero",
        ));
    }
    let x_prev = &prefix[i - 2];
    let delta = x_prev.delta();
    let alpha = prev.mass / (k_i * delta * delta);
    let beta = prev.damping / (k_i * delta);
    let gamma = (prev.spring + k_i) / k_i;
    let kernel = projection_kernel(alpha, beta, gamma, bank);
    let mapped = convolve(x_prev, &kernel, padding)?;
    if i == 2 {
        return Ok(mapped);
    }
    // −(kᵢ₋₁/kᵢ)·xᵢ₋₂, aligned from the end
    let x_pp = &prefix[i - 3];
    let n = mapped.len().min(x_pp.len());
    let ratio = prev.spring / k_i;
    let a = &mapped.samples()[mapped.len() - n..];
    let b = &x_pp.samples()[x_pp.len() - n..];
    let samples = a.iter().zip(b).map(|(&m, &p)| m - ratio * p).collect();
    Trajectory::new(samples, delta, mapped.time(mapped.len() - n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate_chain, simulate_coupled, InitialState};
    use crate::types::projection_from_canonical;
    use proptest::prelude::*;

    const DELTA: f64 = 0.0667;

    fn table3() -> [CanonicalWeights<f64>; 2] {
        [
            CanonicalWeights::new(1.5, 0.5, 14.0).unwrap(),
            CanonicalWeights::new(0.9, 0.3, 35.0).unwrap(),
        ]
    }

    fn simulated(delta: f64, n: usize) -> (Trajectory<f64>, Trajectory<f64>) {
        simulate_coupled(&table3(), &InitialState::coupled_default(), delta, n).unwrap()
    }

    fn amplitude(x: &[f64]) -> f64 {
        x.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn true_params(delta: f64, order: usize) -> MappingParams<f64> {
        let w = table3();
        projection_from_canonical(&w[0], w[1].spring, delta)
            .unwrap()
            .with_accuracy(order)
    }

    fn max_error(delta: f64, order: usize, n: usize) -> f64 {
        let (x1, x2) = simulated(delta, n);
        let bank = StencilBank::new(order).unwrap();
        let mapped = map_to_hidden(&x1, &true_params(delta, order), &bank).unwrap();
        let offset = x1.len() - mapped.len();
        let err = mapped
            .samples()
            .iter()
            .zip(&x2.samples()[offset..])
            .fold(0.0f64, |a, (m, t)| a.max((m - t).abs()));
        err / amplitude(x2.samples())
    }

    #[test]
    fn true_weights_reconstruct_hidden_channel() {
        assert!(max_error(DELTA, 5, 120) <= 0.05);
    }

    #[test]
    fn reconstruction_converges_at_stencil_order() {
        for order in 1..=2 {
            // same physical window at each resolution
            let errs: Vec<f64> = [0.01, 0.005, 0.0025]
                .iter()
                .map(|&d| max_error(d, order, (4.0 / d) as usize))
                .collect();
            let slope = (errs[0] / errs[2]).ln() / 4f64.ln();
            assert!(
                slope >= order as f64 - 0.1,
                "order {order}: slope {slope}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn constant_input_maps_to_gamma_times_constant() {
        let x = Trajectory::new(vec![0.7; 20], DELTA, 0.0).unwrap();
        let p = true_params(DELTA, 5);
        let (_, _, gamma) = p.alpha_beta_gamma().unwrap();
        let bank = StencilBank::new(5).unwrap();
        for v in map_to_hidden(&x, &p, &bank).unwrap().samples() {
            assert!((v - gamma * 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn valid_mapping_starts_after_full_support() {
        let (x1, _) = simulated(DELTA, 60);
        let bank = StencilBank::new(5).unwrap();
        let valid = map_to_hidden(&x1, &true_params(DELTA, 5), &bank).unwrap();
        assert_eq!(valid.len(), 54);
        assert!((valid.t0() - 6.0 * DELTA).abs() < 1e-12);
        let causal = map_to_hidden(&x1, &true_params(DELTA, 5).with_padding(Padding::Causal), &bank).unwrap();
        assert_eq!(causal.len(), 60);
        assert_eq!(&causal.samples()[6..], valid.samples());
    }

    #[test]
    fn wide_kernel_init_matches_shared_map() {
        let (x1, _) = simulated(DELTA, 60);
        let bank = StencilBank::new(5).unwrap();
        let shared = true_params(DELTA, 5).with_padding(Padding::Causal);
        let (a, b, g) = shared.alpha_beta_gamma().unwrap();
        let wide = MappingParams {
            weights: MappingWeights::WideKernel(widen_projection(a, b, g, &bank, 25).unwrap()),
            ..shared.clone()
        };
        assert_eq!(
            map_to_hidden(&x1, &shared, &bank).unwrap().samples(),
            map_to_hidden(&x1, &wide, &bank).unwrap().samples()
        );
        assert!(widen_projection(a, b, g, &bank, 5).is_err());
    }

    #[test]
    fn mismatched_bank_is_rejected() {
        let x = Trajectory::new(vec![0.0; 20], DELTA, 0.0).unwrap();
        let bank = StencilBank::new(2).unwrap();
        assert!(map_to_hidden(&x, &true_params(DELTA, 5), &bank).is_err());
    }

    #[test]
    fn recover_second_oscillator_equals_map_to_hidden() {
        let (x1, _) = simulated(DELTA, 60);
        let bank = StencilBank::new(5).unwrap();
        let direct = map_to_hidden(&x1, &true_params(DELTA, 5), &bank).unwrap();
        let general = recover_xi(&[x1], &table3(), &bank, Padding::Valid).unwrap();
        for (a, b) in direct.samples().iter().zip(general.samples()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        assert_eq!(direct.len(), general.len());
    }

    #[test]
    fn zero_predecessor_gives_zero() {
        let zero = Trajectory::new(vec![0.0; 30], DELTA, 0.0).unwrap();
        let bank = StencilBank::new(3).unwrap();
        let out = recover_xi(
            &[zero.clone(), zero],
            &[table3()[0], table3()[1], table3()[1]],
            &bank,
            Padding::Valid,
        )
        .unwrap();
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn third_oscillator_of_simulated_chain() {
        let chain = [
            CanonicalWeights::new(1.5, 0.5, 14.0).unwrap(),
            CanonicalWeights::new(0.9, 0.3, 35.0).unwrap(),
            CanonicalWeights::new(1.2, 0.2, 20.0).unwrap(),
        ];
        let init = InitialState::new(vec![1.0, 0.5, -0.3], vec![0.0; 3]).unwrap();
        let xs = simulate_chain(&chain, &init, DELTA, 120).unwrap();
        let bank = StencilBank::new(5).unwrap();
        let x3 = recover_xi(&xs[..2], &chain, &bank, Padding::Valid).unwrap();
        let offset = xs[2].len() - x3.len();
        let err = x3
            .samples()
            .iter()
            .zip(&xs[2].samples()[offset..])
            .fold(0.0f64, |a, (m, t)| a.max((m - t).abs()));
        assert!(err <= DELTA * amplitude(xs[2].samples()), "error {err}");
    }

    #[test]
    fn recover_xi_argument_errors() {
        let x = Trajectory::new(vec![0.0; 30], DELTA, 0.0).unwrap();
        let bank = StencilBank::new(3).unwrap();
        assert!(recover_xi(&[], &table3(), &bank, Padding::Valid).is_err());
        assert!(recover_xi(&[x.clone(), x.clone()], &table3(), &bank, Padding::Valid).is_err());
        let mut w = table3();
        w[1].spring = 0.0;
        assert!(recover_xi(&[x], &w, &bank, Padding::Valid).is_err());
    }

    proptest! {
        #[test]
        fn mapping_is_linear(
            a in proptest::collection::vec(-2.0..2.0f64, 30),
            b in proptest::collection::vec(-2.0..2.0f64, 30),
            c in -3.0..3.0f64,
        ) {
            let bank = StencilBank::new(5).unwrap();
            let p = true_params(DELTA, 5).with_padding(Padding::Causal);
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
            let ma = map_to_hidden(&Trajectory::new(a, DELTA, 0.0).unwrap(), &p, &bank).unwrap();
            let mb = map_to_hidden(&Trajectory::new(b, DELTA, 0.0).unwrap(), &p, &bank).unwrap();
            let mc = map_to_hidden(&Trajectory::new(combo, DELTA, 0.0).unwrap(), &p, &bank).unwrap();
            for ((x, y), z) in ma.samples().iter().zip(mb.samples()).zip(mc.samples()) {
                prop_assert!((c * x + y - z).abs() <= 1e-9 * (1.0 + z.abs()));
            }
        }
    }
}
