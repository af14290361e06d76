//! Evaluable functions `R^n -> R^k` and their Jacobians.

use std::sync::Arc;

use crate::error::{EvalError, EvalResult, Result};
use crate::numerics::jet::{Jet, Scalar};
use crate::numerics::matrix::DenseMatrix;

/// Type-erased function evaluable at every supported scalar type.
///
/// Implement [`Formula`] instead of this trait; the blanket impl derives
/// all three entry points from one generic `eval`.
pub trait VectorFn: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval_f64(&self, x: &[f64]) -> EvalResult<Vec<f64>>;
    fn eval_jet(&self, x: &[Jet]) -> EvalResult<Vec<Jet>>;
    fn eval_jet2(&self, x: &[Jet<Jet>]) -> EvalResult<Vec<Jet<Jet>>>;

    /// False for black boxes that only evaluate at `f64`.
    fn supports_jets(&self) -> bool {
        true
    }
}

/// A function written once, generically over the scalar type.
pub trait Formula: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>>;
}

fn checked<F: Formula + ?Sized, S: Scalar>(f: &F, x: &[S]) -> EvalResult<Vec<S>> {
    if x.len() != f.dim_in() {
        return Err(EvalError::DimensionMismatch {
            expected: f.dim_in(),
            got: x.len(),
        });
    }
    let out = f.eval(x)?;
    if out.len() != f.dim_out() {
        return Err(EvalError::DimensionMismatch {
            expected: f.dim_out(),
            got: out.len(),
        });
    }
    if out.iter().any(|v| !v.value().is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(out)
}

impl<T: Formula> VectorFn for T {
    fn dim_in(&self) -> usize {
        Formula::dim_in(self)
    }
    fn dim_out(&self) -> usize {
        Formula::dim_out(self)
    }
    fn eval_f64(&self, x: &[f64]) -> EvalResult<Vec<f64>> {
        checked(self, x)
    }
    fn eval_jet(&self, x: &[Jet]) -> EvalResult<Vec<Jet>> {
        checked(self, x)
    }
    fn eval_jet2(&self, x: &[Jet<Jet>]) -> EvalResult<Vec<Jet<Jet>>> {
        checked(self, x)
    }
}

type PlainFn = dyn Fn(&[f64]) -> EvalResult<Vec<f64>> + Send + Sync;

/// Opaque callable without derivative support.
///
/// Jacobians of a black box require the finite-difference fallback.
pub struct BlackBox {
    dim_in: usize,
    dim_out: usize,
    f: Arc<PlainFn>,
}

impl BlackBox {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[f64]) -> EvalResult<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        BlackBox {
            dim_in,
            dim_out,
            f: Arc::new(f),
        }
    }
}

impl VectorFn for BlackBox {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn eval_f64(&self, x: &[f64]) -> EvalResult<Vec<f64>> {
        if x.len() != self.dim_in {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim_in,
                got: x.len(),
            });
        }
        let out = (self.f)(x)?;
        if out.len() != self.dim_out {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim_out,
                got: out.len(),
            });
        }
        Ok(out)
    }
    fn eval_jet(&self, _x: &[Jet]) -> EvalResult<Vec<Jet>> {
        Err(EvalError::DerivativeUnavailable("black-box function"))
    }
    fn eval_jet2(&self, _x: &[Jet<Jet>]) -> EvalResult<Vec<Jet<Jet>>> {
        Err(EvalError::DerivativeUnavailable("black-box function"))
    }
    fn supports_jets(&self) -> bool {
        false
    }
}

/// How derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Forward-mode jets; exact up to rounding.
    #[default]
    Jets,
    /// Central differences, O(h^2); explicit opt-in for black boxes.
    FiniteDifference,
}

/// Value and Jacobian of `f` at `x` with entries in scalar type `S`.
///
/// Differentiating at `S = Jet<f64>` yields a Jacobian whose entries carry
/// their own derivatives.
pub fn value_and_jacobian_in<S: Scalar>(
    f: &dyn VectorFn,
    x: &[S],
) -> EvalResult<(Vec<S>, Vec<Vec<S>>)> {
    let seeded = Jet::seed(x);
    let out = <Jet<S> as Scalar>::eval_dyn(f, &seeded)?;
    let n = x.len();
    let values = out.iter().map(|o| o.value.clone()).collect();
    let rows = out
        .iter()
        .map(|o| (0..n).map(|j| o.partial(j)).collect())
        .collect();
    Ok((values, rows))
}

/// Jacobian (k x n) of `f` at `x` via jets.
pub fn jacobian(f: &dyn VectorFn, x: &[f64]) -> Result<DenseMatrix> {
    let (_, rows) = value_and_jacobian_in(f, x)?;
    DenseMatrix::from_rows(f.dim_out(), x.len(), rows.into_iter().flatten().collect())
}

/// Central-difference Jacobian with step `eps^(1/3) * max(1, |x_j|)`.
pub fn jacobian_fd(f: &dyn VectorFn, x: &[f64]) -> Result<DenseMatrix> {
    let n = x.len();
    let k = f.dim_out();
    let base_step = f64::EPSILON.cbrt();
    let mut m = DenseMatrix::zeros(k, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = base_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let plus = f.eval_f64(&xp)?;
        xp[j] = x[j] - h;
        let minus = f.eval_f64(&xp)?;
        xp[j] = x[j];
        for i in 0..k {
            m[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// Jacobian using the requested mechanism.
pub fn jacobian_with(f: &dyn VectorFn, x: &[f64], mode: DerivativeMode) -> Result<DenseMatrix> {
    match mode {
        DerivativeMode::Jets => jacobian(f, x),
        DerivativeMode::FiniteDifference => jacobian_fd(f, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lyness2 {
        a: f64,
    }

    impl Formula for Lyness2 {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
            let next = (x[1].clone() + S::constant(self.a)).try_div(&x[0])?;
            Ok(vec![x[1].clone(), next])
        }
    }

    #[test]
    fn lyness_jacobian_by_hand() {
        // f = (x2, (x2 + a)/x1) at (1,1), a = 1: [[0,1],[-2,1]]
        let j = jacobian(&Lyness2 { a: 1.0 }, &[1.0, 1.0]).unwrap();
        assert_eq!(j.row(0), &[0.0, 1.0]);
        assert_eq!(j.row(1), &[-2.0, 1.0]);
    }

    #[test]
    fn fd_fallback_matches_jets() {
        let f = Lyness2 { a: 2.0 };
        let x = [1.3, 0.4];
        let exact = jacobian(&f, &x).unwrap();
        let fd = jacobian_fd(&f, &x).unwrap();
        for (a, b) in exact.data().iter().zip(fd.data()) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn black_box_needs_opt_in() {
        let bb = BlackBox::new(1, 1, |x| Ok(vec![x[0] * x[0]]));
        assert!(matches!(
            jacobian(&bb, &[2.0]),
            Err(crate::Error::Eval(EvalError::DerivativeUnavailable(_)))
        ));
        let j = jacobian_with(&bb, &[2.0], DerivativeMode::FiniteDifference).unwrap();
        assert!((j[(0, 0)] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = Lyness2 { a: 1.0 };
        assert_eq!(
            f.eval_f64(&[1.0]),
            Err(EvalError::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn pole_is_domain_error() {
        let f = Lyness2 { a: 1.0 };
        assert_eq!(f.eval_f64(&[0.0, 1.0]), Err(EvalError::DivisionByZero));
        assert!(jacobian(&f, &[0.0, 1.0]).is_err());
    }
}
