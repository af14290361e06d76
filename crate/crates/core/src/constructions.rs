//! Standard constructions: commuting families of linear maps, symmetries
//! of affine maps, cotangent lifts and their momentum integrals.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, EvalResult, Result};
use crate::numerics::{solve_generic, sum, value_and_jacobian_in, DenseMatrix, Formula, Scalar, VectorFn};
use crate::system::{CoordKind, IntegrabilityStructure, ScalarField, SmoothMap, VectorField};

/// `x -> M x` for a fixed matrix; zero entries are skipped so sparse
/// families stay exact.
#[derive(Debug, Clone)]
pub struct LinearFormula {
    matrix: DenseMatrix,
}

impl LinearFormula {
    pub fn new(matrix: DenseMatrix) -> Self {
        LinearFormula { matrix }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl Formula for LinearFormula {
    fn dim_in(&self) -> usize {
        self.matrix.cols()
    }
    fn dim_out(&self) -> usize {
        self.matrix.rows()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        Ok((0..self.matrix.rows())
            .map(|i| {
                sum(self
                    .matrix
                    .row(i)
                    .iter()
                    .zip(x)
                    .filter(|(a, _)| **a != 0.0)
                    .map(|(a, xi)| if *a == 1.0 { xi.clone() } else { xi.scale(*a) }))
            })
            .collect())
    }
}

/// `x -> slope * x + offset` on the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine1d {
    pub slope: f64,
    pub offset: f64,
}

impl Formula for Affine1d {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        Ok(vec![x[0].scale(self.slope) + S::constant(self.offset)])
    }
}

/// Real Jordan form given block by block.
///
/// Each block has its eigenvalue on the diagonal and ones on the
/// subdiagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JordanBlockSpec {
    blocks: Vec<(f64, usize)>,
}

impl JordanBlockSpec {
    pub fn new(blocks: Vec<(f64, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Parameter("a Jordan spec needs at least one block".into()));
        }
        for &(lambda, size) in &blocks {
            if size == 0 {
                return Err(Error::Parameter("Jordan block sizes must be at least 1".into()));
            }
            if !lambda.is_finite() || lambda == 0.0 {
                return Err(Error::Parameter(format!(
                    "eigenvalue {lambda} does not give a diffeomorphism"
                )));
            }
        }
        Ok(JordanBlockSpec { blocks })
    }

    /// Parses `"lambda:size,lambda:size,..."`.
    pub fn parse(src: &str) -> Result<Self> {
        let blocks = src
            .split(',')
            .map(|item| {
                let (l, s) = item.trim().split_once(':').ok_or_else(|| {
                    Error::Parameter(format!("block `{item}` is not of the form lambda:size"))
                })?;
                let lambda = l
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parameter(format!("bad eigenvalue `{l}`")))?;
                let size = s
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parameter(format!("bad block size `{s}`")))?;
                Ok((lambda, size))
            })
            .collect::<Result<Vec<_>>>()?;
        JordanBlockSpec::new(blocks)
    }

    pub fn blocks(&self) -> &[(f64, usize)] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }

    pub fn matrix(&self) -> DenseMatrix {
        let n = self.dim();
        let mut a = DenseMatrix::zeros(n, n);
        let mut offset = 0;
        for &(lambda, size) in &self.blocks {
            for k in 0..size {
                a[(offset + k, offset + k)] = lambda;
                if k > 0 {
                    a[(offset + k, offset + k - 1)] = 1.0;
                }
            }
            offset += size;
        }
        a
    }
}

impl fmt::Display for JordanBlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|(l, s)| format!("{l}:{s}")).collect();
        f.write_str(&parts.join(","))
    }
}

fn linear_field(name: String, m: DenseMatrix) -> VectorField {
    VectorField::new(name, Arc::new(LinearFormula::new(m))).expect("square matrix")
}

/// `n` pairwise commuting linear fields, each commuting with `x -> Ax`.
///
/// A single block of size `s` yields `Ax` and the shift fields `N^j x`,
/// `j = 1..s-1`. With several blocks, each block contributes its own
/// restriction `A_b x_b` and shifts, and a block of size 1 contributes the
/// scaling field `x_i e_i`. Fields on disjoint blocks commute trivially.
pub fn linear_commutative_family(spec: &JordanBlockSpec) -> Result<IntegrabilityStructure> {
    let n = spec.dim();
    if n == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let a = spec.matrix();
    let mut fields = Vec::with_capacity(n);
    let single = spec.blocks.len() == 1;
    let mut offset = 0;
    for (b, &(_, size)) in spec.blocks.iter().enumerate() {
        let range = offset..offset + size;
        if size == 1 && !single {
            let mut m = DenseMatrix::zeros(n, n);
            m[(offset, offset)] = 1.0;
            fields.push(linear_field(format!("scale[x{}]", offset + 1), m));
        } else {
            let mut m = DenseMatrix::zeros(n, n);
            for i in range.clone() {
                for j in range.clone() {
                    m[(i, j)] = a[(i, j)];
                }
            }
            let label = if single { "Ax".to_string() } else { format!("Ax|block{}", b + 1) };
            fields.push(linear_field(label, m));
            for shift in 1..size {
                let mut m = DenseMatrix::zeros(n, n);
                for k in 0..size - shift {
                    m[(offset + k + shift, offset + k)] = 1.0;
                }
                let label = if single {
                    format!("N^{shift}x")
                } else {
                    format!("N^{shift}x|block{}", b + 1)
                };
                fields.push(linear_field(label, m));
            }
        }
        offset += size;
    }
    IntegrabilityStructure::new(n, fields, Vec::new())
}

/// The map `x -> Ax` for the spec's matrix, with its exact inverse.
pub fn linear_map(spec: &JordanBlockSpec) -> Result<SmoothMap> {
    let a = spec.matrix();
    let inv = a.inverse()?;
    let jac = a.clone();
    Ok(SmoothMap::new(format!("linear[{spec}]"), Arc::new(LinearFormula::new(a)))?
        .with_inverse(Arc::new(LinearFormula::new(inv)))?
        .with_analytic_jacobian(move |_| Ok(jac.clone())))
}

/// Symmetry of `x -> ax + b`: the unit field if `a = 1`, otherwise the
/// field `x + b/(a-1)` vanishing at the fixed point.
pub fn affine1d_symmetry(a: f64, b: f64) -> Result<VectorField> {
    if a == 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(Error::Parameter(format!("x -> {a}x + {b} is not a diffeomorphism")));
    }
    let (formula, name) = if a == 1.0 {
        (Affine1d { slope: 0.0, offset: 1.0 }, "1".to_string())
    } else {
        let shift = b / (a - 1.0);
        (
            Affine1d {
                slope: 1.0,
                offset: shift,
            },
            format!("x + {shift}"),
        )
    };
    VectorField::new(name, Arc::new(formula))
}

/// `(x, p) -> (f(x), Df(x)^{-T} p)`.
struct LiftForward {
    base: Arc<dyn VectorFn>,
}

impl Formula for LiftForward {
    fn dim_in(&self) -> usize {
        2 * self.base.dim_in()
    }
    fn dim_out(&self) -> usize {
        2 * self.base.dim_in()
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
        let n = self.base.dim_in();
        let (fx, jac) = value_and_jacobian_in(self.base.as_ref(), &z[..n])?;
        let jt: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| jac[j][i].clone()).collect()).collect();
        let p = solve_generic(jt, z[n..].to_vec())?;
        Ok(fx.into_iter().chain(p).collect())
    }
}

/// `(x, p) -> (g(x), Df(g(x))^T p)` with `g = f^{-1}`.
struct LiftInverse {
    base: Arc<dyn VectorFn>,
    inverse: Arc<dyn VectorFn>,
}

impl Formula for LiftInverse {
    fn dim_in(&self) -> usize {
        2 * self.base.dim_in()
    }
    fn dim_out(&self) -> usize {
        2 * self.base.dim_in()
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
        let n = self.base.dim_in();
        let y = S::eval_dyn(self.inverse.as_ref(), &z[..n])?;
        let (_, jac) = value_and_jacobian_in(self.base.as_ref(), &y)?;
        let p = &z[n..];
        let q = (0..n).map(|i| sum((0..n).map(|j| jac[j][i].clone() * p[j].clone())));
        Ok(y.iter().cloned().chain(q).collect())
    }
}

/// A base map together with its cotangent lift.
#[derive(Debug, Clone)]
pub struct LiftedMap {
    pub base: SmoothMap,
    pub lifted: SmoothMap,
}

pub fn cotangent_lift(f: &SmoothMap) -> Result<LiftedMap> {
    let n = f.dim();
    let forward = LiftForward {
        base: f.forward().clone(),
    };
    let guard = f.guard().clone();
    let mut topology = f.topology().to_vec();
    topology.extend(std::iter::repeat_n(CoordKind::Line, n));
    let mut lifted = SmoothMap::new(format!("lift({})", f.name()), Arc::new(forward))?
        .with_guard(Arc::new(move |z: &[f64]| guard(&z[..n])))
        .with_topology(topology)?;
    if let Some(inv) = f.inverse() {
        lifted = lifted.with_inverse(Arc::new(LiftInverse {
            base: f.forward().clone(),
            inverse: inv.clone(),
        }))?;
    }
    Ok(LiftedMap {
        base: f.clone(),
        lifted,
    })
}

/// `G(x, p) = p . v(x)`.
struct MomentumPairing {
    field: Arc<dyn VectorFn>,
}

impl Formula for MomentumPairing {
    fn dim_in(&self) -> usize {
        2 * self.field.dim_in()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
        let n = self.field.dim_in();
        let v = S::eval_dyn(self.field.as_ref(), &z[..n])?;
        Ok(vec![sum(v.into_iter().zip(&z[n..]).map(|(vi, pi)| vi * pi.clone()))])
    }
}

/// A function of `x` viewed on phase space `(x, p)`.
struct PositionOnly {
    f: Arc<dyn VectorFn>,
}

impl Formula for PositionOnly {
    fn dim_in(&self) -> usize {
        2 * self.f.dim_in()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
        S::eval_dyn(self.f.as_ref(), &z[..self.f.dim_in()])
    }
}

pub fn lift_integral(v: &VectorField) -> ScalarField {
    ScalarField::new(
        format!("p.({})", v.name()),
        Arc::new(MomentumPairing { field: v.func().clone() }),
    )
    .expect("scalar output")
}

/// Pulls a base integral back to phase space.
pub fn position_integral(f: &ScalarField) -> ScalarField {
    ScalarField::new(f.name(), Arc::new(PositionOnly { f: f.func().clone() })).expect("scalar output")
}

/// Lift of `f` with the base integrals followed by `p . v_j` for every
/// field of the structure.
pub fn lift_structure(f: &SmoothMap, s: &IntegrabilityStructure) -> Result<(LiftedMap, Vec<ScalarField>)> {
    if s.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: s.dim(),
        });
    }
    let lifted = cotangent_lift(f)?;
    let integrals = s
        .integrals()
        .iter()
        .map(position_integral)
        .chain(s.fields().iter().map(lift_integral))
        .collect();
    Ok((lifted, integrals))
}
