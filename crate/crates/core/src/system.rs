//! Maps, fields, integrals, claimed structures and sampling regions.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, EvalError, EvalResult, Result};
use crate::numerics::{jacobian_with, DenseMatrix, DerivativeMode, IntegratorConfig, VectorFn};

/// Domain predicate; points outside it are never evaluated on purpose.
pub type Guard = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

type JacobianFn = dyn Fn(&[f64]) -> Result<DenseMatrix> + Send + Sync;

pub fn always_safe() -> Guard {
    Arc::new(|_: &[f64]| true)
}

/// Topology of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordKind {
    Line,
    /// Values are kept in `[0, circumference)`.
    Circle { circumference: f64 },
}

impl CoordKind {
    pub fn reduce(&self, v: f64) -> f64 {
        match *self {
            CoordKind::Line => v,
            CoordKind::Circle { circumference: c } => {
                let r = v.rem_euclid(c);
                // rem_euclid can round up to c itself
                if r >= c {
                    0.0
                } else {
                    r
                }
            }
        }
    }

    /// Signed shortest displacement from `b` to `a`.
    pub fn difference(&self, a: f64, b: f64) -> f64 {
        match *self {
            CoordKind::Line => a - b,
            CoordKind::Circle { circumference: c } => {
                let d = (a - b).rem_euclid(c);
                if d >= 0.5 * c {
                    d - c
                } else {
                    d
                }
            }
        }
    }
}

/// A diffeomorphism given by its lift to `R^n`, with optional inverse.
///
/// `forward` and `inverse` act on lifted coordinates; [`SmoothMap::apply`]
/// reduces circle coordinates afterwards.
#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    forward: Arc<dyn VectorFn>,
    inverse: Option<Arc<dyn VectorFn>>,
    analytic_jacobian: Option<Arc<JacobianFn>>,
    guard: Guard,
    topology: Vec<CoordKind>,
    derivatives: DerivativeMode,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("has_inverse", &self.inverse.is_some())
            .field("topology", &self.topology)
            .finish()
    }
}

impl SmoothMap {
    pub fn new(name: impl Into<String>, forward: Arc<dyn VectorFn>) -> Result<Self> {
        let n = forward.dim_in();
        if n == 0 || forward.dim_out() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: forward.dim_out(),
            });
        }
        Ok(SmoothMap {
            name: name.into(),
            forward,
            inverse: None,
            analytic_jacobian: None,
            guard: always_safe(),
            topology: vec![CoordKind::Line; n],
            derivatives: DerivativeMode::Jets,
        })
    }

    pub fn with_inverse(mut self, inverse: Arc<dyn VectorFn>) -> Result<Self> {
        if inverse.dim_in() != self.dim() || inverse.dim_out() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: inverse.dim_in(),
            });
        }
        self.inverse = Some(inverse);
        Ok(self)
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = guard;
        self
    }

    pub fn with_topology(mut self, topology: Vec<CoordKind>) -> Result<Self> {
        if topology.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: topology.len(),
            });
        }
        for t in &topology {
            if let CoordKind::Circle { circumference } = t {
                if !(*circumference > 0.0 && circumference.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "circle circumference must be positive, got {circumference}"
                    )));
                }
            }
        }
        self.topology = topology;
        Ok(self)
    }

    pub fn with_analytic_jacobian(
        mut self,
        jac: impl Fn(&[f64]) -> Result<DenseMatrix> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_jacobian = Some(Arc::new(jac));
        self
    }

    /// Opt into central differences for black-box maps.
    pub fn with_derivatives(mut self, mode: DerivativeMode) -> Self {
        self.derivatives = mode;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.forward.dim_in()
    }

    pub fn forward(&self) -> &Arc<dyn VectorFn> {
        &self.forward
    }

    pub fn inverse(&self) -> Option<&Arc<dyn VectorFn>> {
        self.inverse.as_ref()
    }

    pub fn guard(&self) -> &Guard {
        &self.guard
    }

    pub fn topology(&self) -> &[CoordKind] {
        &self.topology
    }

    pub fn has_circle_coordinates(&self) -> bool {
        self.topology.iter().any(|t| matches!(t, CoordKind::Circle { .. }))
    }

    pub fn is_safe(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().all(|v| v.is_finite()) && (self.guard)(x)
    }

    pub fn reduce(&self, x: &mut [f64]) {
        for (v, t) in x.iter_mut().zip(&self.topology) {
            *v = t.reduce(*v);
        }
    }

    /// `f(x)` on the lift, without reduction.
    pub fn apply_lift(&self, x: &[f64]) -> EvalResult<Vec<f64>> {
        self.forward.eval_f64(x)
    }

    /// `f(x)` with circle coordinates reduced.
    pub fn apply(&self, x: &[f64]) -> EvalResult<Vec<f64>> {
        let mut y = self.forward.eval_f64(x)?;
        self.reduce(&mut y);
        Ok(y)
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let inv = self.inverse.as_ref().ok_or(Error::MissingInverse)?;
        let mut y = inv.eval_f64(x)?;
        self.reduce(&mut y);
        Ok(y)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        match &self.analytic_jacobian {
            Some(j) => j(x),
            None => jacobian_with(self.forward.as_ref(), x, self.derivatives),
        }
    }

    /// Componentwise `a - b`, using arc displacement on circles.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.topology)
            .map(|((x, y), t)| t.difference(*x, *y))
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        norm(&self.difference(a, b))
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `f^k(x0)`, checking the guard after every step.
///
/// A violation reports the 1-based step that produced the offending point;
/// step 0 means `x0` itself was unsafe.
pub fn iterate(f: &SmoothMap, x0: &[f64], k: i64) -> Result<Vec<f64>> {
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    if !f.is_safe(x0) {
        return Err(Error::GuardViolation { step: 0 });
    }
    if k < 0 && f.inverse.is_none() {
        return Err(Error::MissingInverse);
    }
    let mut x = x0.to_vec();
    f.reduce(&mut x);
    for step in 1..=k.unsigned_abs() as usize {
        let next = if k > 0 {
            f.apply(&x)
        } else {
            f.apply_inverse(&x).map_err(|e| match e {
                Error::Eval(e) => e,
                _ => EvalError::NonFinite,
            })
        };
        x = match next {
            Ok(y) if f.is_safe(&y) => y,
            _ => return Err(Error::GuardViolation { step }),
        };
    }
    Ok(x)
}

/// A vector field on `R^n`.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    func: Arc<dyn VectorFn>,
    derivatives: DerivativeMode,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl VectorField {
    pub fn new(name: impl Into<String>, func: Arc<dyn VectorFn>) -> Result<Self> {
        if func.dim_in() != func.dim_out() {
            return Err(Error::DimensionMismatch {
                expected: func.dim_in(),
                got: func.dim_out(),
            });
        }
        Ok(VectorField {
            name: name.into(),
            func,
            derivatives: DerivativeMode::Jets,
        })
    }

    pub fn with_derivatives(mut self, mode: DerivativeMode) -> Self {
        self.derivatives = mode;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.func.dim_in()
    }

    pub fn func(&self) -> &Arc<dyn VectorFn> {
        &self.func
    }

    /// True when no derivative route is available.
    pub fn derivatives_unavailable(&self) -> bool {
        !self.func.supports_jets() && self.derivatives == DerivativeMode::Jets
    }

    pub fn eval(&self, x: &[f64]) -> EvalResult<Vec<f64>> {
        self.func.eval_f64(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        jacobian_with(self.func.as_ref(), x, self.derivatives)
    }

    pub fn flow(&self, x: &[f64], t: f64, cfg: &IntegratorConfig, guard: &Guard) -> Result<Vec<f64>> {
        let safe = |y: &[f64]| guard(y);
        crate::numerics::integrate_flow(self.func.as_ref(), x, t, cfg, Some(&safe))
    }
}

/// A real-valued function on `R^n`.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    func: Arc<dyn VectorFn>,
    derivatives: DerivativeMode,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, func: Arc<dyn VectorFn>) -> Result<Self> {
        if func.dim_out() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: func.dim_out(),
            });
        }
        Ok(ScalarField {
            name: name.into(),
            func,
            derivatives: DerivativeMode::Jets,
        })
    }

    pub fn with_derivatives(mut self, mode: DerivativeMode) -> Self {
        self.derivatives = mode;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.func.dim_in()
    }

    pub fn func(&self) -> &Arc<dyn VectorFn> {
        &self.func
    }

    pub fn derivatives_unavailable(&self) -> bool {
        !self.func.supports_jets() && self.derivatives == DerivativeMode::Jets
    }

    pub fn eval(&self, x: &[f64]) -> EvalResult<f64> {
        Ok(self.func.eval_f64(x)?[0])
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(jacobian_with(self.func.as_ref(), x, self.derivatives)?
            .row(0)
            .to_vec())
    }
}

/// Claimed `(m, k)` structure: `m` commuting fields and `k` integrals.
///
/// A complete structure has `m + k = n`. Partial structures (fewer
/// integrals than needed) are accepted so that supplied integrals can be
/// checked on their own; reports state completeness.
#[derive(Debug, Clone)]
pub struct IntegrabilityStructure {
    dim: usize,
    fields: Vec<VectorField>,
    integrals: Vec<ScalarField>,
}

impl IntegrabilityStructure {
    pub fn new(dim: usize, fields: Vec<VectorField>, integrals: Vec<ScalarField>) -> Result<Self> {
        for d in fields.iter().map(VectorField::dim).chain(integrals.iter().map(ScalarField::dim)) {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
        }
        if fields.len() + integrals.len() > dim {
            return Err(Error::InvalidConfig(format!(
                "{} fields and {} integrals exceed dimension {dim}",
                fields.len(),
                integrals.len()
            )));
        }
        Ok(IntegrabilityStructure {
            dim,
            fields,
            integrals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn integrals(&self) -> &[ScalarField] {
        &self.integrals
    }

    pub fn is_complete(&self) -> bool {
        self.fields.len() + self.integrals.len() == self.dim
    }
}

/// Axis-aligned box with margin and guard, sampled reproducibly.
#[derive(Clone)]
pub struct SamplingRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
    margin: f64,
    guard: Guard,
    sample_count: usize,
    seed: u64,
}

impl fmt::Debug for SamplingRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SamplingRegion")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("margin", &self.margin)
            .field("sample_count", &self.sample_count)
            .field("seed", &self.seed)
            .finish()
    }
}

impl SamplingRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, margin: f64) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::InvalidConfig(format!("margin must be non-negative, got {margin}")));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo + margin < hi - margin) {
                return Err(Error::InvalidConfig(format!(
                    "coordinate {i}: box [{lo}, {hi}] is empty after margin {margin}"
                )));
            }
        }
        Ok(SamplingRegion {
            lower,
            upper,
            margin,
            guard: always_safe(),
            sample_count: 1000,
            seed: 42,
        })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n], 0.0)
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guard = guard;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sample_count(mut self, count: usize) -> Self {
        self.sample_count = count;
        self
    }

    /// Product with another box; guards apply to their own coordinates.
    pub fn product(&self, other: &SamplingRegion) -> Result<SamplingRegion> {
        let n = self.dim();
        let mut lower = self.lower.clone();
        lower.extend(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend(&other.upper);
        // margins differ per factor; bake them into the bounds
        let shrink = |v: &mut Vec<f64>, split: usize, a: f64, b: f64, sign: f64| {
            for (i, x) in v.iter_mut().enumerate() {
                *x += sign * if i < split { a } else { b };
            }
        };
        shrink(&mut lower, n, self.margin, other.margin, 1.0);
        shrink(&mut upper, n, self.margin, other.margin, -1.0);
        let (g1, g2) = (self.guard.clone(), other.guard.clone());
        Ok(SamplingRegion::new(lower, upper, 0.0)?
            .with_guard(Arc::new(move |z: &[f64]| g1(&z[..n]) && g2(&z[n..])))
            .with_seed(self.seed)
            .with_sample_count(self.sample_count))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn guard(&self) -> &Guard {
        &self.guard
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| {
                *v >= lo + self.margin && *v <= hi - self.margin
            })
            && (self.guard)(x)
    }

    /// `count` points, uniform on the guarded shrunken box.
    ///
    /// Point `i` is drawn from its own ChaCha stream, so the sequence does
    /// not depend on how callers later partition the work.
    pub fn sample(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        let budget = 1000usize.saturating_mul(count.max(1));
        let mut rejections = 0usize;
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(i as u64);
            loop {
                let x: Vec<f64> = self
                    .lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(lo, hi)| rng.gen_range((lo + self.margin)..=(hi - self.margin)))
                    .collect();
                if (self.guard)(&x) {
                    out.push(x);
                    break;
                }
                rejections += 1;
                if rejections > budget {
                    return Err(Error::SamplingExhausted {
                        rejections,
                        requested: count,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn sample_default(&self) -> Result<Vec<Vec<f64>>> {
        self.sample(self.sample_count)
    }
}
