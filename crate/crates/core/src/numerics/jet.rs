//! Forward-mode differentiation with multi-seed dual numbers.
//!
//! A [`Jet`] carries a value together with its partial derivatives with
//! respect to `d` independent seeds. An empty partials vector denotes a
//! constant, so constants never allocate.
//!
//! Jets nest: `Jet<Jet<f64>>` carries second derivatives, which the
//! cotangent lift needs to differentiate a map that already contains a
//! Jacobian. Every formula in the crate is written once against the
//! [`Scalar`] trait and evaluated at `f64`, `Jet<f64>` or `Jet<Jet<f64>>`.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{EvalError, EvalResult};
use crate::numerics::function::VectorFn;

/// Number-like type usable by formulas.
///
/// Fallible operations (division, logarithm, real powers) report domain
/// violations as [`EvalError`] instead of producing NaN.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;

    /// Primal value, stripped of every derivative layer.
    fn value(&self) -> f64;

    /// True when no derivative information is attached at any depth.
    fn is_constant(&self) -> bool;

    fn try_div(&self, rhs: &Self) -> EvalResult<Self>;
    fn exp(&self) -> Self;
    fn try_ln(&self) -> EvalResult<Self>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, n: i32) -> Self;

    fn try_powf(&self, exponent: &Self) -> EvalResult<Self> {
        let e = exponent.value();
        if exponent.is_constant() && e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
            if e < 0.0 && self.value() == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            return Ok(self.powi(e as i32));
        }
        if self.value() <= 0.0 {
            return Err(EvalError::PowDomain(self.value()));
        }
        Ok((exponent.clone() * self.try_ln()?).exp())
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::constant(c)
    }

    /// Evaluates a type-erased function at this scalar type.
    fn eval_dyn(f: &dyn VectorFn, x: &[Self]) -> EvalResult<Vec<Self>>;

    #[doc(hidden)]
    fn eval_dyn_in_jet(f: &dyn VectorFn, x: &[Jet<Self>]) -> EvalResult<Vec<Jet<Self>>>;

    #[doc(hidden)]
    fn eval_dyn_in_jet2(f: &dyn VectorFn, x: &[Jet<Jet<Self>>]) -> EvalResult<Vec<Jet<Jet<Self>>>>;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn try_div(&self, rhs: &Self) -> EvalResult<Self> {
        if *rhs == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn try_ln(&self) -> EvalResult<Self> {
        if *self <= 0.0 {
            return Err(EvalError::LogDomain(*self));
        }
        Ok(f64::ln(*self))
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn eval_dyn(f: &dyn VectorFn, x: &[Self]) -> EvalResult<Vec<Self>> {
        f.eval_f64(x)
    }
    fn eval_dyn_in_jet(f: &dyn VectorFn, x: &[Jet<Self>]) -> EvalResult<Vec<Jet<Self>>> {
        f.eval_jet(x)
    }
    fn eval_dyn_in_jet2(f: &dyn VectorFn, x: &[Jet<Jet<Self>>]) -> EvalResult<Vec<Jet<Jet<Self>>>> {
        f.eval_jet2(x)
    }
}

/// Value plus partial derivatives with respect to independent seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S = f64> {
    pub value: S,
    /// Missing trailing entries are zero; empty means constant.
    pub partials: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn new(value: S, partials: Vec<S>) -> Self {
        Jet { value, partials }
    }

    pub fn from_value(value: S) -> Self {
        Jet {
            value,
            partials: Vec::new(),
        }
    }

    /// The `index`-th of `seeds` independent variables.
    pub fn variable(value: S, index: usize, seeds: usize) -> Self {
        let mut partials = vec![S::constant(0.0); seeds];
        partials[index] = S::constant(1.0);
        Jet { value, partials }
    }

    /// Seeds every coordinate of `x` as an independent variable.
    pub fn seed(x: &[S]) -> Vec<Jet<S>> {
        x.iter()
            .enumerate()
            .map(|(i, xi)| Jet::variable(xi.clone(), i, x.len()))
            .collect()
    }

    pub fn partial(&self, i: usize) -> S {
        self.partials
            .get(i)
            .cloned()
            .unwrap_or_else(|| S::constant(0.0))
    }

    // Chain rule for a unary function with derivative `slope` at the value.
    fn chain(&self, value: S, slope: S) -> Self {
        Jet {
            value,
            partials: self
                .partials
                .iter()
                .map(|p| p.clone() * slope.clone())
                .collect(),
        }
    }
}

fn zip_partials<S: Scalar>(a: &[S], b: &[S], f: impl Fn(Option<&S>, Option<&S>) -> S) -> Vec<S> {
    let n = a.len().max(b.len());
    (0..n).map(|i| f(a.get(i), b.get(i))).collect()
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Jet<S>;
    fn add(self, rhs: Jet<S>) -> Jet<S> {
        let partials = if rhs.partials.is_empty() {
            self.partials
        } else if self.partials.is_empty() {
            rhs.partials
        } else {
            zip_partials(&self.partials, &rhs.partials, |a, b| match (a, b) {
                (Some(a), Some(b)) => a.clone() + b.clone(),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => S::constant(0.0),
            })
        };
        Jet {
            value: self.value + rhs.value,
            partials,
        }
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Jet<S>;
    fn neg(self) -> Jet<S> {
        Jet {
            value: -self.value,
            partials: self.partials.into_iter().map(|p| -p).collect(),
        }
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Jet<S>;
    fn sub(self, rhs: Jet<S>) -> Jet<S> {
        self + (-rhs)
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Jet<S>;
    fn mul(self, rhs: Jet<S>) -> Jet<S> {
        let partials = zip_partials(&self.partials, &rhs.partials, |a, b| match (a, b) {
            (Some(a), Some(b)) => a.clone() * rhs.value.clone() + self.value.clone() * b.clone(),
            (Some(a), None) => a.clone() * rhs.value.clone(),
            (None, Some(b)) => self.value.clone() * b.clone(),
            (None, None) => S::constant(0.0),
        });
        Jet {
            value: self.value * rhs.value,
            partials,
        }
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn constant(v: f64) -> Self {
        Jet::from_value(S::constant(v))
    }

    fn value(&self) -> f64 {
        self.value.value()
    }

    fn is_constant(&self) -> bool {
        self.value.is_constant() && self.partials.iter().all(|p| p.is_constant() && p.value() == 0.0)
    }

    fn try_div(&self, rhs: &Self) -> EvalResult<Self> {
        if rhs.value() == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let q = self.value.try_div(&rhs.value)?;
        // (a/b)' = (a' - q b') / b
        let partials = zip_partials(&self.partials, &rhs.partials, |a, b| {
            
            match (a, b) {
                (Some(a), Some(b)) => a.clone() - q.clone() * b.clone(),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => -(q.clone() * b.clone()),
                (None, None) => S::constant(0.0),
            }
        })
        .into_iter()
        .map(|num| num.try_div(&rhs.value))
        .collect::<EvalResult<Vec<S>>>()?;
        Ok(Jet { value: q, partials })
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e.clone(), e)
    }

    fn try_ln(&self) -> EvalResult<Self> {
        if self.value() <= 0.0 {
            return Err(EvalError::LogDomain(self.value()));
        }
        let slope = S::constant(1.0).try_div(&self.value)?;
        Ok(self.chain(self.value.try_ln()?, slope))
    }

    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    fn powi(&self, n: i32) -> Self {
        match n {
            0 => Jet::constant(1.0),
            1 => self.clone(),
            _ => {
                let slope = self.value.powi(n - 1).scale(n as f64);
                self.chain(self.value.powi(n), slope)
            }
        }
    }

    fn eval_dyn(f: &dyn VectorFn, x: &[Self]) -> EvalResult<Vec<Self>> {
        S::eval_dyn_in_jet(f, x)
    }

    fn eval_dyn_in_jet(f: &dyn VectorFn, x: &[Jet<Self>]) -> EvalResult<Vec<Jet<Self>>> {
        S::eval_dyn_in_jet2(f, x)
    }

    fn eval_dyn_in_jet2(_f: &dyn VectorFn, _x: &[Jet<Jet<Self>>]) -> EvalResult<Vec<Jet<Jet<Self>>>> {
        Err(EvalError::DerivativeUnavailable(
            "derivative nesting deeper than second order",
        ))
    }
}

/// Sum of scalars; the empty sum is zero.
pub fn sum<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    items
        .into_iter()
        .fold(S::constant(0.0), |acc, v| acc + v)
}

/// Product of scalars; the empty product is one.
pub fn product<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    items
        .into_iter()
        .fold(S::constant(1.0), |acc, v| acc * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_and_quotient_rules() {
        let x = Jet::variable(3.0, 0, 2);
        let y = Jet::variable(2.0, 1, 2);
        let f = (x.clone() * y.clone()).try_div(&(x.clone() + y.clone())).unwrap();
        // f = xy/(x+y); df/dx = y^2/(x+y)^2, df/dy = x^2/(x+y)^2
        assert!(close(f.value, 1.2, 1e-15));
        assert!(close(f.partial(0), 4.0 / 25.0, 1e-15));
        assert!(close(f.partial(1), 9.0 / 25.0, 1e-15));
    }

    #[test]
    fn transcendental_derivatives() {
        let x = Jet::variable(0.7, 0, 1);
        let f = x.sin() * x.exp() + x.try_ln().unwrap() - x.cos();
        let expected = 0.7f64.cos() * 0.7f64.exp() + 0.7f64.sin() * 0.7f64.exp() + 1.0 / 0.7 + 0.7f64.sin();
        assert!(close(f.partial(0), expected, 1e-14));
    }

    #[test]
    fn powers() {
        let x = Jet::variable(-1.5, 0, 1);
        let cube = x.powi(3);
        assert!(close(cube.partial(0), 3.0 * 2.25, 1e-15));
        // integer exponent given as a scalar takes the integer path
        let cube2 = x.try_powf(&Jet::constant(3.0)).unwrap();
        assert_eq!(cube, cube2);
        assert!(matches!(
            x.try_powf(&Jet::constant(0.5)),
            Err(EvalError::PowDomain(_))
        ));
        let y = Jet::variable(2.0, 0, 1);
        let r = y.try_powf(&Jet::constant(0.5)).unwrap();
        assert!(close(r.partial(0), 0.5 / 2f64.sqrt(), 1e-15));
    }

    #[test]
    fn division_by_zero_value_is_error() {
        let x = Jet::variable(0.0, 0, 1);
        let one = Jet::constant(1.0);
        assert_eq!(one.try_div(&x), Err(EvalError::DivisionByZero));
        assert_eq!(1.0f64.try_div(&0.0), Err(EvalError::DivisionByZero));
        assert!(matches!(x.try_ln(), Err(EvalError::LogDomain(_))));
    }

    #[test]
    fn constants_mix_with_variables() {
        let x = Jet::variable(2.0, 1, 3);
        let f = Jet::constant(5.0) * x.clone() - Jet::constant(1.0);
        assert_eq!(f.value, 9.0);
        assert_eq!(f.partial(0), 0.0);
        assert_eq!(f.partial(1), 5.0);
        assert_eq!(f.partial(2), 0.0);
        assert!(Jet::<f64>::constant(2.0).is_constant());
        assert!(!x.is_constant());
    }

    #[test]
    fn nested_jets_give_second_derivatives() {
        // f(x) = x^3 sin x at x = 1.2
        let inner = Jet::variable(1.2, 0, 1);
        let x = Jet::variable(inner, 0, 1);
        let f = x.powi(3) * x.sin();
        let v = 1.2f64;
        let d2 = 6.0 * v * v.sin() + 6.0 * v * v * v.cos() - v.powi(3) * v.sin();
        assert!(close(f.partial(0).partial(0), d2, 1e-13));
        let d1 = 3.0 * v * v * v.sin() + v.powi(3) * v.cos();
        assert!(close(f.partial(0).value, d1, 1e-14));
        assert!(close(f.value.partial(0), d1, 1e-14));
    }
}
