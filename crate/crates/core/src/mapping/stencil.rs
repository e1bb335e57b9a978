//! Backward finite-difference stencils from the moment (Vandermonde) system.
//!
//! A stencil for derivative order `d` and accuracy order `p` uses the
//! `d + p` grid points `{−(d+p−1), …, −1, 0}` and differentiates every
//! polynomial of degree `< d + p` exactly. Coefficients are stored oldest
//! point first; the last coefficient multiplies the current sample.

use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::types::{Padding, Trajectory, MAX_STENCIL_ACCURACY};

/// Field the moment system can be solved in: `f32`, `f64`, or an exact
/// rational type such as [`BigRational`].
pub trait StencilField: Clone + Num + Signed + PartialOrd + FromPrimitive + Debug {}

impl<T> StencilField for T where T: Clone + Num + Signed + PartialOrd + FromPrimitive + Debug {}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil<T> {
    derivative_order: usize,
    accuracy_order: usize,
    coefficients: Vec<T>,
}

impl<T> Stencil<T> {
    pub fn derivative_order(&self) -> usize {
        self.derivative_order
    }

    pub fn accuracy_order(&self) -> usize {
        self.accuracy_order
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Grid offsets the coefficients apply to, oldest first.
    pub fn grid(&self) -> Vec<i64> {
        let n = self.coefficients.len() as i64;
        (0..n).map(|j| j - (n - 1)).collect()
    }
}

impl<T: ToPrimitive> Stencil<T> {
    /// Converts coefficients to a floating point type.
    pub fn to_scalar<U: Scalar>(&self) -> Stencil<U> {
        Stencil {
            derivative_order: self.derivative_order,
            accuracy_order: self.accuracy_order,
            coefficients: self
                .coefficients
                .iter()
                .map(|c| U::lit(c.to_f64().expect("finite coefficient")))
                .collect(),
        }
    }
}

fn from_int<T: FromPrimitive>(v: i64) -> T {
    T::from_i64(v).expect("small integer representable")
}

/// Solves `A c = rhs` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve<T: StencilField>(mut a: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].is_zero() {
            return None;
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].clone() / a[col][col].clone();
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                let delta = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - delta;
            }
            let delta = factor * rhs[col].clone();
            rhs[row] = rhs[row].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Some(x)
}

/// Backward stencil for `derivative_order` ∈ {1, 2} and
/// `accuracy_order` ∈ 1..=8.
pub fn make_backward_stencil<T: StencilField>(derivative_order: usize, accuracy_order: usize) -> Result<Stencil<T>> {
    if !(1..=2).contains(&derivative_order) {
        return Err(invalid(format!(
            "derivative order must be 1 or 2, got {derivative_order}"
        )));
    }
    if !(1..=MAX_STENCIL_ACCURACY).contains(&accuracy_order) {
        return Err(invalid(format!(
            "accuracy order must be in 1..={MAX_STENCIL_ACCURACY}, got {accuracy_order}"
        )));
    }
    let n = derivative_order + accuracy_order;
    let points: Vec<T> = (0..n as i64).map(|j| from_int(j - (n as i64 - 1))).collect();
    // Row r: Σ_j c_j p_j^r = r!·[r == d]
    let mut rows = Vec::with_capacity(n);
    let mut power = vec![T::one(); n];
    for _ in 0..n {
        rows.push(power.clone());
        for (pw, p) in power.iter_mut().zip(&points) {
            *pw = pw.clone() * p.clone();
        }
    }
    let mut rhs = vec![T::zero(); n];
    rhs[derivative_order] = from_int((1..=derivative_order as i64).product());
    let coefficients = solve(rows, rhs).ok_or_else(|| invalid("singular moment system"))?;
    Ok(Stencil {
        derivative_order,
        accuracy_order,
        coefficients,
    })
}

/// Exact rational stencil.
pub fn exact_backward_stencil(derivative_order: usize, accuracy_order: usize) -> Result<Stencil<BigRational>> {
    make_backward_stencil(derivative_order, accuracy_order)
}

/// First- and second-derivative stencils of a common accuracy order.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilBank<T> {
    pub d1: Stencil<T>,
    pub d2: Stencil<T>,
    pub accuracy_order: usize,
}

impl<T: Scalar> StencilBank<T> {
    /// Generated exactly, then rounded once to `T`.
    pub fn new(accuracy_order: usize) -> Result<Self> {
        Ok(Self {
            d1: exact_backward_stencil(1, accuracy_order)?.to_scalar(),
            d2: exact_backward_stencil(2, accuracy_order)?.to_scalar(),
            accuracy_order,
        })
    }

    /// Number of samples the bank reaches back, including the current one.
    pub fn support(&self) -> usize {
        self.d1.len().max(self.d2.len())
    }
}

/// Raw convolution of `x` with a right-aligned `kernel` (last entry on the
/// current sample). Causal mode zero-pads on the left; valid mode keeps only
/// fully supported outputs and shifts `t0` accordingly.
pub fn convolve<T: Scalar>(x: &Trajectory<T>, kernel: &[T], padding: Padding) -> Result<Trajectory<T>> {
    let l = kernel.len();
    if l == 0 {
        return Err(invalid("empty kernel"));
    }
    let s = x.samples();
    let at = |i: isize| if i < 0 { T::zero() } else { s[i as usize] };
    let output = |t: usize| {
        kernel.iter().enumerate().fold(T::zero(), |acc, (j, &c)| {
            acc + c * at(t as isize - (l as isize - 1) + j as isize)
        })
    };
    match padding {
        Padding::Causal => Trajectory::new((0..s.len()).map(output).collect(), x.delta(), x.t0()),
        Padding::Valid => {
            if s.len() < l {
                return Err(invalid(format!(
                    "valid convolution needs at least {l} samples, got {}",
                    s.len()
                )));
            }
            Trajectory::new((l - 1..s.len()).map(output).collect(), x.delta(), x.time(l - 1))
        }
    }
}

/// Stencil output without the 1/Δᵏ scaling.
pub fn apply_stencil<T: Scalar>(x: &Trajectory<T>, stencil: &Stencil<T>, padding: Padding) -> Result<Trajectory<T>> {
    convolve(x, stencil.coefficients(), padding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn second_order_table_values() {
        let d1 = exact_backward_stencil(1, 2).unwrap();
        assert_eq!(d1.coefficients(), &[q(1, 2), q(-2, 1), q(3, 2)]);
        assert_eq!(d1.grid(), vec![-2, -1, 0]);
        let d2 = exact_backward_stencil(2, 2).unwrap();
        assert_eq!(d2.coefficients(), &[q(-1, 1), q(4, 1), q(-5, 1), q(2, 1)]);
        assert_eq!(d2.grid(), vec![-3, -2, -1, 0]);
    }

    #[test]
    fn first_order_is_plain_backward_difference() {
        let d1 = exact_backward_stencil(1, 1).unwrap();
        assert_eq!(d1.coefficients(), &[q(-1, 1), q(1, 1)]);
        let d2 = exact_backward_stencil(2, 1).unwrap();
        assert_eq!(d2.coefficients(), &[q(1, 1), q(-2, 1), q(1, 1)]);
    }

    #[test]
    fn accuracy_five_lengths() {
        let bank = StencilBank::<f64>::new(5).unwrap();
        assert_eq!(bank.d1.len(), 6);
        assert_eq!(bank.d2.len(), 7);
        assert_eq!(bank.support(), 7);
    }

    #[test]
    fn exact_on_monomials() {
        for order in 1..=MAX_STENCIL_ACCURACY {
            for d in 1..=2usize {
                let s = exact_backward_stencil(d, order).unwrap();
                let grid = s.grid();
                let sum: BigRational = s.coefficients().iter().cloned().sum();
                assert_eq!(sum, q(0, 1));
                for degree in 0..=(order + d - 1) as u32 {
                    // at x = 0: d-th derivative of x^degree is degree! if degree == d
                    let value: BigRational = s
                        .coefficients()
                        .iter()
                        .zip(&grid)
                        .map(|(c, &g)| c * q(g.pow(degree), 1))
                        .sum();
                    let expected = if degree as usize == d {
                        q((1..=d as i64).product(), 1)
                    } else {
                        q(0, 1)
                    };
                    assert_eq!(value, expected, "d={d} order={order} degree={degree}");
                }
            }
        }
    }

    #[test]
    fn float_and_exact_agree() {
        for order in 1..=MAX_STENCIL_ACCURACY {
            for d in 1..=2 {
                let exact = exact_backward_stencil(d, order).unwrap().to_scalar::<f64>();
                let float = make_backward_stencil::<f64>(d, order).unwrap();
                for (a, b) in exact.coefficients().iter().zip(float.coefficients()) {
                    assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn rejects_unsupported_orders() {
        assert!(exact_backward_stencil(3, 2).is_err());
        assert!(exact_backward_stencil(0, 2).is_err());
        assert!(exact_backward_stencil(1, 0).is_err());
        assert!(exact_backward_stencil(1, 9).is_err());
    }

    #[test]
    fn valid_output_length_and_errors() {
        let x = Trajectory::new((0..60).map(f64::from).collect(), 0.1, 0.0).unwrap();
        let d2 = StencilBank::<f64>::new(5).unwrap().d2;
        let out = apply_stencil(&x, &d2, Padding::Valid).unwrap();
        assert_eq!(out.len(), 54);
        assert!((out.t0() - 0.6).abs() < 1e-15);
        let short = x.head(6).unwrap();
        assert!(apply_stencil(&short, &d2, Padding::Valid).is_err());
        assert_eq!(apply_stencil(&short, &d2, Padding::Causal).unwrap().len(), 6);
    }

    #[test]
    fn constant_gives_zero_and_square_gives_two() {
        let delta = 0.05;
        let c = Trajectory::new(vec![3.7; 20], delta, 0.0).unwrap();
        let sq = Trajectory::new((0..20).map(|i| (i as f64 * delta).powi(2)).collect(), delta, 0.0).unwrap();
        for order in 1..=5 {
            let bank = StencilBank::<f64>::new(order).unwrap();
            for v in apply_stencil(&c, &bank.d2, Padding::Valid).unwrap().samples() {
                assert!(v.abs() < 1e-12);
            }
            for v in apply_stencil(&sq, &bank.d2, Padding::Valid).unwrap().samples() {
                assert!((v / (delta * delta) - 2.0).abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn causal_matches_valid_on_supported_region() {
        let x = Trajectory::new((0..30).map(|i| (i as f64 * 0.3).sin()).collect(), 0.1, 0.0).unwrap();
        let d1 = StencilBank::<f64>::new(4).unwrap().d1;
        let causal = apply_stencil(&x, &d1, Padding::Causal).unwrap();
        let valid = apply_stencil(&x, &d1, Padding::Valid).unwrap();
        assert_eq!(&causal.samples()[d1.len() - 1..], valid.samples());
    }

    proptest! {
        #[test]
        fn valid_mode_is_translation_equivariant(
            values in proptest::collection::vec(-5.0..5.0f64, 12..40),
            shift in 1usize..5,
        ) {
            let s = StencilBank::<f64>::new(3).unwrap().d2;
            let x = Trajectory::new(values.clone(), 0.1, 0.0).unwrap();
            let shifted = Trajectory::new(values[shift..].to_vec(), 0.1, 0.0).unwrap();
            let a = apply_stencil(&x, &s, Padding::Valid).unwrap();
            let b = apply_stencil(&shifted, &s, Padding::Valid).unwrap();
            prop_assert_eq!(&a.samples()[shift..], b.samples());
        }
    }
}
