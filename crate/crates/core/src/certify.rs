//! Pointwise residuals of the integrability identities and their
//! aggregation into a certification report.
//!
//! Every residual is normalized per point by
//! `scale = 1 + max(|x|, |f(x)|, |F|, |X|, ...)` over the quantities that
//! enter it, so tolerances are relative.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, EvalError, Result};
use crate::numerics::{numerical_rank, DenseMatrix, IntegratorConfig};
use crate::system::{norm, IntegrabilityStructure, SamplingRegion, ScalarField, SmoothMap, VectorField};

/// Verbatim caveat carried by every report.
pub const CAVEAT: &str =
    "PASS means no counterexample was found at these tolerances: numerical evidence, not proof";

/// Most deficient points kept per rank condition.
const MAX_DEFICIENT_LISTED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub algebraic_tol: f64,
    pub flow_tol: f64,
    /// Relative singular-value cutoff for numerical rank.
    pub rank_threshold: f64,
    /// Fraction of points that must be full rank.
    pub ae_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic_tol: 1e-9,
            flow_tol: 1e-7,
            rank_threshold: 1e-8,
            ae_fraction: 0.99,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.algebraic_tol, self.flow_tol, self.rank_threshold]
            .iter()
            .all(|t| *t > 0.0 && t.is_finite());
        if !positive {
            return Err(Error::InvalidConfig("tolerances must be positive and finite".into()));
        }
        if !(self.rank_threshold < 1.0) {
            return Err(Error::InvalidConfig("rank_threshold must be below 1".into()));
        }
        if !(self.ae_fraction > 0.5 && self.ae_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ae_fraction must lie in (0.5, 1], got {}",
                self.ae_fraction
            )));
        }
        Ok(())
    }
}

/// Aggregate of one condition over the sampled points.
///
/// `max_abs`, `mean_abs` and `p99_abs` are normalized residuals; `scale`
/// is the normalization at the worst point, so the raw residual there is
/// `max_abs * scale`. For rank conditions the values are rank deficits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub name: String,
    /// The identity being checked, in formula form.
    pub anchor: String,
    pub count: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub p99_abs: f64,
    pub worst_point: Option<Vec<f64>>,
    pub scale: f64,
    /// `None` when the condition could not be evaluated.
    pub pass: Option<bool>,
    pub tolerance: f64,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_rank_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub deficient_points: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Unverified,
}

impl Verdict {
    pub fn from_conditions(conditions: &[ResidualStats]) -> Verdict {
        if conditions.iter().any(|c| c.pass == Some(false)) {
            Verdict::Fail
        } else if conditions.iter().any(|c| c.pass.is_none()) {
            Verdict::Unverified
        } else {
            Verdict::Pass
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureSummary {
    pub dim: usize,
    pub m: usize,
    pub integral_count: usize,
    /// Whether `m + integral_count` equals the dimension.
    pub complete: bool,
    pub fields: Vec<String>,
    pub integrals: Vec<String>,
}

impl StructureSummary {
    pub fn of(s: &IntegrabilityStructure) -> Self {
        StructureSummary {
            dim: s.dim(),
            m: s.m(),
            integral_count: s.integrals().len(),
            complete: s.is_complete(),
            fields: s.fields().iter().map(|f| f.name().to_string()).collect(),
            integrals: s.integrals().iter().map(|f| f.name().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub caveat: String,
    pub map: String,
    pub structure: StructureSummary,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub flow_times: Vec<f64>,
    /// Sampled points where `f(x)` left the guard.
    pub skipped_points: usize,
    pub conditions: Vec<ResidualStats>,
    pub verdict: Verdict,
}

impl CertificationReport {
    pub fn condition(&self, name: &str) -> Option<&ResidualStats> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ResidualStats> {
        self.conditions.iter().filter(|c| c.pass == Some(false))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub tolerances: Tolerances,
    pub flow_times: Vec<f64>,
    pub integrator: IntegratorConfig,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tolerances: Tolerances::default(),
            flow_times: vec![-1.0, 0.5, 1.0],
            integrator: IntegratorConfig::default(),
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `[Xj, Xk](x) = D Xk(x) Xj(x) - D Xj(x) Xk(x)`.
pub fn lie_bracket_residual(xj: &VectorField, xk: &VectorField, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(xj.dim(), xk.dim())?;
    check_dim(xj.dim(), x.len())?;
    let a = xk.jacobian(x)?.matvec(&xj.eval(x)?)?;
    let b = xj.jacobian(x)?.matvec(&xk.eval(x)?)?;
    Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
}

/// `DF(x) X(x)`.
pub fn first_integral_residual(f: &ScalarField, field: &VectorField, x: &[f64]) -> Result<f64> {
    check_dim(f.dim(), field.dim())?;
    let g = f.gradient(x)?;
    let v = field.eval(x)?;
    Ok(g.iter().zip(&v).map(|(a, b)| a * b).sum())
}

/// `F(f(x)) - F(x)`.
pub fn map_invariance_residual(integral: &ScalarField, f: &SmoothMap, x: &[f64]) -> Result<f64> {
    check_dim(integral.dim(), f.dim())?;
    if !f.is_safe(x) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let fx = f.apply(x)?;
    if !f.is_safe(&fx) {
        return Err(Error::GuardViolation { step: 1 });
    }
    Ok(integral.eval(&fx)? - integral.eval(x)?)
}

/// `Df(x) X(x) - X(f(x))`.
pub fn infinitesimal_commutation_residual(
    f: &SmoothMap,
    field: &VectorField,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_dim(f.dim(), field.dim())?;
    if !f.is_safe(x) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let fx = f.apply(x)?;
    if !f.is_safe(&fx) {
        return Err(Error::GuardViolation { step: 1 });
    }
    let push = f.jacobian(x)?.matvec(&field.eval(x)?)?;
    let at_image = field.eval(&fx)?;
    Ok(push.iter().zip(&at_image).map(|(a, b)| a - b).collect())
}

/// `f(phi^t(x)) - phi^t(f(x))`, arc-aware on circle coordinates.
pub fn flow_commutation_residual(
    f: &SmoothMap,
    field: &VectorField,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    flow_pair(f, field, x, t, cfg).map(|(a, b)| f.difference(&a, &b))
}

fn flow_pair(
    f: &SmoothMap,
    field: &VectorField,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(f.dim(), field.dim())?;
    let branch = |name: &'static str| {
        move |e: Error| Error::FlowBranch {
            branch: name,
            source: Box::new(e),
        }
    };
    let moved = field.flow(x, t, cfg, f.guard()).map_err(branch("f(phi^t(x))"))?;
    let a = f.apply(&moved).map_err(|e| branch("f(phi^t(x))")(e.into()))?;
    if !f.is_safe(&a) {
        return Err(branch("f(phi^t(x))")(Error::GuardViolation { step: 1 }));
    }
    let fx = f.apply(x).map_err(|e| branch("phi^t(f(x))")(e.into()))?;
    if !f.is_safe(&fx) {
        return Err(branch("phi^t(f(x))")(Error::GuardViolation { step: 1 }));
    }
    let b = field.flow(&fx, t, cfg, f.guard()).map_err(branch("phi^t(f(x))"))?;
    Ok((a, b))
}

/// Summary of numerical ranks of column sets over sampled points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSummary {
    pub columns: usize,
    pub count: usize,
    pub full_rank_fraction: f64,
    pub deficient_points: Vec<Vec<f64>>,
}

/// Rank of the columns `columns(x)` at each point.
pub fn independence_rank_stats(
    columns: &(dyn Fn(&[f64]) -> Result<Vec<Vec<f64>>> + Sync),
    points: &[Vec<f64>],
    threshold: f64,
) -> Result<RankSummary> {
    let ranks: Vec<(usize, usize)> = points
        .par_iter()
        .map(|x| {
            let cols = columns(x)?;
            let k = cols.len();
            if k == 0 {
                return Err(Error::EmptyMatrix);
            }
            Ok((numerical_rank(&DenseMatrix::from_columns(&cols)?, threshold)?.rank, k))
        })
        .collect::<Result<_>>()?;
    let columns = ranks.first().map_or(0, |r| r.1);
    let mut deficient = Vec::new();
    for ((rank, k), x) in ranks.iter().zip(points) {
        if rank < k {
            deficient.push(x.clone());
        }
    }
    Ok(RankSummary {
        columns,
        count: points.len(),
        full_rank_fraction: if points.is_empty() {
            0.0
        } else {
            1.0 - deficient.len() as f64 / points.len() as f64
        },
        deficient_points: deficient,
    })
}

fn half_dim(len: usize) -> Result<usize> {
    if len % 2 == 1 || len == 0 {
        Err(Error::OddDimension(len))
    } else {
        Ok(len / 2)
    }
}

/// Canonical bracket `{F,G} = D_q F . D_p G - D_p F . D_q G`, `z = (q, p)`.
pub fn poisson_bracket(f: &ScalarField, g: &ScalarField, z: &[f64]) -> Result<f64> {
    let n = half_dim(z.len())?;
    check_dim(f.dim(), z.len())?;
    check_dim(g.dim(), z.len())?;
    let df = f.gradient(z)?;
    let dg = g.gradient(z)?;
    Ok(poisson_from_gradients(&df, &dg, n))
}

fn poisson_from_gradients(df: &[f64], dg: &[f64], n: usize) -> f64 {
    (0..n).map(|i| df[i] * dg[n + i] - df[n + i] * dg[i]).sum()
}

fn symplectic_defect(m: &DenseMatrix) -> Result<f64> {
    let n = half_dim(m.rows())?;
    check_dim(m.rows(), m.cols())?;
    let mut j = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    Ok(m.transpose().matmul(&j)?.matmul(m)?.sub(&j)?.max_abs())
}

/// Max-abs entry of `M^T J M - J` with `M = Df(z)`.
pub fn symplecticity_residual(f: &SmoothMap, z: &[f64]) -> Result<f64> {
    half_dim(f.dim())?;
    symplectic_defect(&f.jacobian(z)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Check {
    Bracket(usize, usize),
    IntegralAlongField { integral: usize, field: usize },
    Commutation(usize),
    Invariance(usize),
    Flow { field: usize, t: f64 },
    FieldRank,
    GradientRank,
    Symplectic,
    Involution(usize, usize),
}

enum Outcome {
    Value { normalized: f64, scale: f64 },
    Rank { deficit: usize, ratio: f64 },
    Skipped,
    Unavailable,
}

/// Values shared by all checks at one sample.
struct PointContext<'a> {
    x: &'a [f64],
    image: Option<Vec<f64>>,
    field_values: Vec<Result<Vec<f64>>>,
    field_at_image: Vec<Result<Vec<f64>>>,
    integral_values: Vec<Result<f64>>,
    integral_at_image: Vec<Result<f64>>,
    gradients: Vec<Result<Vec<f64>>>,
}

struct Engine<'a> {
    map: &'a SmoothMap,
    fields: &'a [VectorField],
    integrals: &'a [ScalarField],
    opts: &'a CertifyOptions,
}

fn classify(e: &Error) -> Outcome {
    match e {
        Error::Eval(EvalError::DerivativeUnavailable(_)) => Outcome::Unavailable,
        Error::FlowBranch { source, .. } => classify(source),
        _ => Outcome::Skipped,
    }
}

fn value(residual: f64, parts: &[f64]) -> Outcome {
    let scale = 1.0 + parts.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Outcome::Value {
        normalized: residual.abs() / scale,
        scale,
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return classify(&e),
        }
    };
}

impl<'a> Engine<'a> {
    fn context<'x>(&self, x: &'x [f64]) -> PointContext<'x> {
        let image = self.map.apply(x).ok().filter(|y| self.map.is_safe(y));
        let on_image = |y: &Option<Vec<f64>>, g: &dyn Fn(&[f64]) -> Result<f64>| match y {
            Some(y) => g(y),
            None => Err(Error::GuardViolation { step: 1 }),
        };
        PointContext {
            x,
            field_values: self.fields.iter().map(|v| Ok(v.eval(x)?)).collect(),
            field_at_image: self
                .fields
                .iter()
                .map(|v| match &image {
                    Some(y) => Ok(v.eval(y)?),
                    None => Err(Error::GuardViolation { step: 1 }),
                })
                .collect(),
            integral_values: self.integrals.iter().map(|f| Ok(f.eval(x)?)).collect(),
            integral_at_image: self
                .integrals
                .iter()
                .map(|f| on_image(&image, &|y| Ok(f.eval(y)?)))
                .collect(),
            gradients: self.integrals.iter().map(|f| f.gradient(x)).collect(),
            image,
        }
    }

    fn evaluate(&self, ctx: &PointContext<'_>, check: Check) -> Outcome {
        let x = ctx.x;
        let nx = norm(x);
        match check {
            Check::Bracket(j, k) => {
                let (vj, vk) = (
                    tri!(ctx.field_values[j].as_ref().map_err(Clone::clone)),
                    tri!(ctx.field_values[k].as_ref().map_err(Clone::clone)),
                );
                let r = tri!(lie_bracket_residual(&self.fields[j], &self.fields[k], x));
                value(norm(&r), &[nx, norm(vj), norm(vk)])
            }
            Check::IntegralAlongField { integral, field } => {
                let v = tri!(ctx.field_values[field].as_ref().map_err(Clone::clone));
                let g = tri!(ctx.gradients[integral].as_ref().map_err(Clone::clone));
                let fv = tri!(ctx.integral_values[integral].clone());
                let r: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
                value(r, &[nx, fv, norm(v)])
            }
            Check::Commutation(j) => {
                let Some(y) = &ctx.image else {
                    return Outcome::Skipped;
                };
                let v = tri!(ctx.field_values[j].as_ref().map_err(Clone::clone));
                let vy = tri!(ctx.field_at_image[j].as_ref().map_err(Clone::clone));
                let push = tri!(self.map.jacobian(x).and_then(|m| m.matvec(v)));
                let r: Vec<f64> = push.iter().zip(vy).map(|(a, b)| a - b).collect();
                value(norm(&r), &[nx, norm(y), norm(v), norm(vy)])
            }
            Check::Invariance(k) => {
                let Some(y) = &ctx.image else {
                    return Outcome::Skipped;
                };
                let a = tri!(ctx.integral_values[k].clone());
                let b = tri!(ctx.integral_at_image[k].clone());
                value(b - a, &[nx, norm(y), a, b])
            }
            Check::Flow { field, t } => {
                let Some(y) = &ctx.image else {
                    return Outcome::Skipped;
                };
                let v = tri!(ctx.field_values[field].as_ref().map_err(Clone::clone));
                let (a, b) = tri!(flow_pair(
                    self.map,
                    &self.fields[field],
                    x,
                    t,
                    &self.opts.integrator
                ));
                let r = self.map.distance(&a, &b);
                value(r, &[nx, norm(y), norm(v), norm(&a), norm(&b)])
            }
            Check::FieldRank => {
                let cols: Vec<Vec<f64>> = tri!(ctx
                    .field_values
                    .iter().cloned()
                    .collect::<Result<Vec<_>>>());
                rank_outcome(&cols, self.opts.tolerances.rank_threshold)
            }
            Check::GradientRank => {
                let cols: Vec<Vec<f64>> = tri!(ctx
                    .gradients
                    .iter().cloned()
                    .collect::<Result<Vec<_>>>());
                rank_outcome(&cols, self.opts.tolerances.rank_threshold)
            }
            Check::Symplectic => {
                let m = tri!(self.map.jacobian(x));
                let r = tri!(symplectic_defect(&m));
                let big = m.max_abs();
                value(r, &[big * big])
            }
            Check::Involution(j, k) => {
                let gj = tri!(ctx.gradients[j].as_ref().map_err(Clone::clone));
                let gk = tri!(ctx.gradients[k].as_ref().map_err(Clone::clone));
                let r = poisson_from_gradients(gj, gk, x.len() / 2);
                value(r, &[norm(gj) * norm(gk)])
            }
        }
    }

    fn describe(&self, check: Check) -> (String, String, f64) {
        let tol = self.opts.tolerances;
        let fname = |j: usize| self.fields[j].name().to_string();
        let iname = |k: usize| self.integrals[k].name().to_string();
        match check {
            Check::Bracket(j, k) => (
                format!("bracket[{},{}]", fname(j), fname(k)),
                "commuting fields: [X_j,X_k] = DX_k X_j - DX_j X_k = 0".into(),
                tol.algebraic_tol,
            ),
            Check::IntegralAlongField { integral, field } => (
                format!("integral[{}] along {}", iname(integral), fname(field)),
                "shared integrals: DF_k . X_j = 0".into(),
                tol.algebraic_tol,
            ),
            Check::Commutation(j) => (
                format!("commutation[{}]", fname(j)),
                "map symmetry, infinitesimal: Df X_j = X_j o f".into(),
                tol.algebraic_tol,
            ),
            Check::Invariance(k) => (
                format!("invariance[{}]", iname(k)),
                "map symmetry: F_k o f = F_k".into(),
                tol.algebraic_tol,
            ),
            Check::Flow { field, t } => (
                format!("flow_commutation[{}] t={}", fname(field), t),
                "map symmetry: f o phi_j^t = phi_j^t o f".into(),
                tol.flow_tol,
            ),
            Check::FieldRank => (
                "field_independence".into(),
                "independence: X_1..X_m linearly independent a.e.".into(),
                tol.ae_fraction,
            ),
            Check::GradientRank => (
                "gradient_independence".into(),
                "independence: dF_1..dF_k linearly independent a.e.".into(),
                tol.ae_fraction,
            ),
            Check::Symplectic => (
                "symplecticity".into(),
                "M^T J M = J with M = Df".into(),
                tol.algebraic_tol,
            ),
            Check::Involution(j, k) => (
                format!("involution[{},{}]", iname(j), iname(k)),
                "{G_j,G_k} = 0".into(),
                tol.algebraic_tol,
            ),
        }
    }

    fn run(&self, checks: &[Check], points: &[Vec<f64>]) -> (Vec<ResidualStats>, usize) {
        let outcomes: Vec<(Vec<Outcome>, bool)> = points
            .par_iter()
            .map(|x| {
                let ctx = self.context(x);
                let row = checks.iter().map(|c| self.evaluate(&ctx, *c)).collect();
                (row, ctx.image.is_none())
            })
            .collect();
        let skipped_points = outcomes.iter().filter(|o| o.1).count();
        let stats = checks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (name, anchor, tolerance) = self.describe(*c);
                let column = outcomes.iter().map(|o| &o.0[i]);
                aggregate(name, anchor, tolerance, column.zip(points), points.len())
            })
            .collect();
        (stats, skipped_points)
    }
}

fn rank_outcome(cols: &[Vec<f64>], threshold: f64) -> Outcome {
    let m = tri!(DenseMatrix::from_columns(cols));
    let est = tri!(numerical_rank(&m, threshold));
    let sv = &est.singular_values;
    let ratio = match sv.first() {
        Some(&top) if top > 0.0 => sv[sv.len().min(cols.len()) - 1] / top,
        _ => 0.0,
    };
    Outcome::Rank {
        deficit: cols.len().saturating_sub(est.rank),
        ratio,
    }
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

fn aggregate<'o>(
    name: String,
    anchor: String,
    tolerance: f64,
    outcomes: impl Iterator<Item = (&'o Outcome, &'o Vec<f64>)>,
    total: usize,
) -> ResidualStats {
    let mut values = Vec::new();
    let mut worst: Option<(f64, f64, &Vec<f64>)> = None;
    let mut skipped = 0;
    let mut unavailable = 0;
    let mut rank_mode = false;
    let mut deficient = 0usize;
    let mut deficient_points = Vec::new();
    let mut weakest: Option<(f64, &Vec<f64>)> = None;
    for (o, x) in outcomes {
        match o {
            Outcome::Value { normalized, scale } => {
                values.push(*normalized);
                if worst.is_none_or(|w| *normalized > w.0) {
                    worst = Some((*normalized, *scale, x));
                }
            }
            Outcome::Rank { deficit, ratio } => {
                rank_mode = true;
                values.push(*deficit as f64);
                if *deficit > 0 {
                    deficient += 1;
                    if deficient_points.len() < MAX_DEFICIENT_LISTED {
                        deficient_points.push(x.clone());
                    }
                }
                if weakest.is_none_or(|w| *ratio < w.0) {
                    weakest = Some((*ratio, x));
                }
            }
            Outcome::Skipped => skipped += 1,
            Outcome::Unavailable => unavailable += 1,
        }
    }
    let count = values.len();
    let mean = if count == 0 {
        0.0
    } else {
        values.iter().sum::<f64>() / count as f64
    };
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let max = sorted.last().copied().unwrap_or(0.0);
    let mut note = None;
    let mut full_rank_fraction = None;
    let (pass, worst_point, scale) = if unavailable > 0 {
        note = Some("derivatives unavailable; enable finite differences for black-box inputs".into());
        (None, None, 1.0)
    } else if 2 * skipped > total {
        note = Some(format!("{skipped} of {total} points skipped (guard or integration failure)"));
        (Some(false), None, 1.0)
    } else if count == 0 {
        note = Some("no evaluable points".into());
        (Some(false), None, 1.0)
    } else if rank_mode {
        let frac = 1.0 - deficient as f64 / count as f64;
        full_rank_fraction = Some(frac);
        (Some(frac >= tolerance), weakest.map(|w| w.1.clone()), 1.0)
    } else {
        let (_, scale, x) = worst.expect("count > 0");
        (Some(max <= tolerance), Some(x.clone()), scale)
    };
    ResidualStats {
        name,
        anchor,
        count,
        max_abs: max,
        mean_abs: mean,
        p99_abs: percentile(&sorted, 0.99),
        worst_point,
        scale,
        pass,
        tolerance,
        skipped,
        full_rank_fraction,
        deficient_points,
        note,
    }
}

fn flows_disabled(name: &str, tolerance: f64) -> ResidualStats {
    ResidualStats {
        name: name.into(),
        anchor: "map symmetry: f o phi_j^t = phi_j^t o f".into(),
        count: 0,
        max_abs: 0.0,
        mean_abs: 0.0,
        p99_abs: 0.0,
        worst_point: None,
        scale: 1.0,
        pass: None,
        tolerance,
        skipped: 0,
        full_rank_fraction: None,
        deficient_points: Vec::new(),
        note: Some("flow checks disabled by configuration".into()),
    }
}

/// Checks every condition of the claimed structure at sampled points.
pub fn certify_structure(
    f: &SmoothMap,
    s: &IntegrabilityStructure,
    region: &SamplingRegion,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    opts.tolerances.validate()?;
    opts.integrator.validate()?;
    check_dim(f.dim(), s.dim())?;
    check_dim(f.dim(), region.dim())?;
    if let Some(t) = opts.flow_times.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidConfig(format!("flow time {t} is not finite")));
    }
    let m = s.m();
    let k = s.integrals().len();
    let mut checks = Vec::new();
    for j in 0..m {
        for l in j + 1..m {
            checks.push(Check::Bracket(j, l));
        }
    }
    if m > 0 {
        checks.push(Check::FieldRank);
    }
    for integral in 0..k {
        for field in 0..m {
            checks.push(Check::IntegralAlongField { integral, field });
        }
    }
    if k > 0 {
        checks.push(Check::GradientRank);
    }
    for j in 0..m {
        checks.push(Check::Commutation(j));
    }
    for i in 0..k {
        checks.push(Check::Invariance(i));
    }
    for j in 0..m {
        for &t in &opts.flow_times {
            checks.push(Check::Flow { field: j, t });
        }
    }
    let points = region.sample_default()?;
    let engine = Engine {
        map: f,
        fields: s.fields(),
        integrals: s.integrals(),
        opts,
    };
    let (mut conditions, skipped_points) = engine.run(&checks, &points);
    if m > 0 && opts.flow_times.is_empty() {
        conditions.push(flows_disabled("flow_commutation", opts.tolerances.flow_tol));
    }
    Ok(CertificationReport {
        caveat: CAVEAT.into(),
        map: f.name().to_string(),
        structure: StructureSummary::of(s),
        samples: points.len(),
        seed: region.seed(),
        tolerances: opts.tolerances,
        flow_times: opts.flow_times.clone(),
        skipped_points,
        verdict: Verdict::from_conditions(&conditions),
        conditions,
    })
}

/// Checks a symplectic map and a family of integrals on phase space:
/// symplecticity, pairwise involution, invariance and independence.
///
/// The verdict covers only the supplied integrals; `structure.complete`
/// records whether they number `n` on the `2n`-dimensional space.
pub fn certify_symplectic(
    f: &SmoothMap,
    integrals: &[ScalarField],
    region: &SamplingRegion,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    opts.tolerances.validate()?;
    let n = half_dim(f.dim())?;
    check_dim(f.dim(), region.dim())?;
    for g in integrals {
        check_dim(f.dim(), g.dim())?;
    }
    let mut checks = vec![Check::Symplectic];
    for j in 0..integrals.len() {
        for l in j + 1..integrals.len() {
            checks.push(Check::Involution(j, l));
        }
    }
    for j in 0..integrals.len() {
        checks.push(Check::Invariance(j));
    }
    if !integrals.is_empty() {
        checks.push(Check::GradientRank);
    }
    let points = region.sample_default()?;
    let engine = Engine {
        map: f,
        fields: &[],
        integrals,
        opts,
    };
    let (conditions, skipped_points) = engine.run(&checks, &points);
    Ok(CertificationReport {
        caveat: CAVEAT.into(),
        map: f.name().to_string(),
        structure: StructureSummary {
            dim: f.dim(),
            m: 0,
            integral_count: integrals.len(),
            complete: integrals.len() == n,
            fields: Vec::new(),
            integrals: integrals.iter().map(|g| g.name().to_string()).collect(),
        },
        samples: points.len(),
        seed: region.seed(),
        tolerances: opts.tolerances,
        flow_times: Vec::new(),
        skipped_points,
        verdict: Verdict::from_conditions(&conditions),
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::error::EvalResult;
    use crate::expr::{ExprFormula, VarLayout};
    use crate::numerics::{BlackBox, Formula, Scalar};

    fn field(components: &[&str]) -> VectorField {
        let f = ExprFormula::parse(components, VarLayout::positions(components.len())).unwrap();
        VectorField::new(components.join(","), Arc::new(f)).unwrap()
    }

    fn scalar(src: &str, n: usize) -> ScalarField {
        ScalarField::new(src, Arc::new(ExprFormula::parse(&[src], VarLayout::positions(n)).unwrap())).unwrap()
    }

    fn map(components: &[&str]) -> SmoothMap {
        let f = ExprFormula::parse(components, VarLayout::positions(components.len())).unwrap();
        SmoothMap::new("test", Arc::new(f)).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let x = field(&["x1", "x2"]);
        assert_eq!(lie_bracket_residual(&x, &x, &[0.3, -2.0]).unwrap(), vec![0.0, 0.0]);
        // A = [[0,1],[0,0]], B = diag(1,2): (BA - AB)x = (-1, 0) at (1,1)
        let a = field(&["x2", "0"]);
        let b = field(&["x1", "2*x2"]);
        assert_eq!(lie_bracket_residual(&a, &b, &[1.0, 1.0]).unwrap(), vec![-1.0, 0.0]);
        let v1 = field(&["2*x1", "x1 + 2*x2"]);
        let v2 = field(&["0", "x1"]);
        assert_eq!(lie_bracket_residual(&v1, &v2, &[0.7, -1.3]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn first_integral_examples() {
        let rot = field(&["-x2", "x1"]);
        assert_eq!(first_integral_residual(&scalar("3", 2), &rot, &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(
            first_integral_residual(&scalar("x1^2 + x2^2", 2), &rot, &[1.5, -0.5]).unwrap(),
            0.0
        );
        assert_eq!(
            first_integral_residual(&scalar("x1", 2), &field(&["1", "0"]), &[4.0, 4.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn map_invariance_examples() {
        let lyness = map(&["x2", "(x2 + 1)/x1"]);
        let f1 = scalar("(x1 + x2 + 1)*(x1 + 1)*(x2 + 1)/(x1*x2)", 2);
        assert_eq!(f1.eval(&[1.0, 1.0]).unwrap(), 12.0);
        assert_eq!(map_invariance_residual(&f1, &lyness, &[1.0, 1.0]).unwrap(), 0.0);
        let cat = map(&["2*x1 + x2", "x1 + x2"])
            .with_topology(vec![crate::system::CoordKind::Circle { circumference: 1.0 }; 2])
            .unwrap();
        let r = map_invariance_residual(&scalar("x1", 2), &cat, &[0.2, 0.4]).unwrap();
        assert!((r - 0.6).abs() < 1e-15);
        let id = map(&["x1", "x2"]);
        assert_eq!(map_invariance_residual(&f1, &id, &[2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn commutation_examples() {
        let f = map(&["2*x1 + 3"]);
        assert_eq!(infinitesimal_commutation_residual(&f, &field(&["x1 + 3"]), &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(
            infinitesimal_commutation_residual(&f, &field(&["x1 + 2"]), &[1.0]).unwrap(),
            vec![-1.0]
        );
        let cfg = IntegratorConfig::default();
        let r = flow_commutation_residual(&f, &field(&["x1 + 3"]), &[1.0], 1.0, &cfg).unwrap();
        assert!(r[0].abs() < 1e-8);
        let r = flow_commutation_residual(&f, &field(&["x1 + 2"]), &[1.0], 1.0, &cfg).unwrap();
        assert!((r[0] - (1.0 - std::f64::consts::E)).abs() < 1e-8);
    }

    #[test]
    fn rigid_rotation_flows_commute_on_circle() {
        let rot = map(&["x1 + 1"])
            .with_topology(vec![crate::system::CoordKind::Circle {
                circumference: std::f64::consts::TAU,
            }])
            .unwrap();
        let cfg = IntegratorConfig::default();
        for t in [-3.0, 0.5, 7.0] {
            let r = flow_commutation_residual(&rot, &field(&["1"]), &[6.0], t, &cfg).unwrap();
            assert!(r[0].abs() < 1e-9, "t={t}: {r:?}");
        }
    }

    #[test]
    fn rank_examples() {
        let pts = SamplingRegion::cube(2, -1.0, 1.0).unwrap().sample(200).unwrap();
        let basis = |_: &[f64]| Ok(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(independence_rank_stats(&basis, &pts, 1e-8).unwrap().full_rank_fraction, 1.0);
        let v1 = field(&["2*x1", "x1 + 2*x2"]);
        let v2 = field(&["0", "x1"]);
        let fam = |x: &[f64]| Ok(vec![v1.eval(x)?, v2.eval(x)?]);
        assert!(independence_rank_stats(&fam, &pts, 1e-8).unwrap().full_rank_fraction >= 0.99);
        let dup = |x: &[f64]| Ok(vec![v1.eval(x)?, v1.eval(x)?]);
        let s = independence_rank_stats(&dup, &pts, 1e-8).unwrap();
        assert_eq!(s.full_rank_fraction, 0.0);
        assert_eq!(s.deficient_points.len(), 200);
    }

    struct Planar<const K: usize>;
    impl<const K: usize> Formula for Planar<K> {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
            Ok(vec![z[K].clone()])
        }
    }

    #[test]
    fn poisson_examples() {
        let q = ScalarField::new("q1", Arc::new(Planar::<0>)).unwrap();
        let p = ScalarField::new("p1", Arc::new(Planar::<1>)).unwrap();
        assert_eq!(poisson_bracket(&q, &p, &[0.4, 0.9]).unwrap(), 1.0);
        assert_eq!(poisson_bracket(&p, &q, &[0.4, 0.9]).unwrap(), -1.0);
        assert_eq!(poisson_bracket(&q, &q, &[0.4, 0.9]).unwrap(), 0.0);
        let odd = scalar("x1", 3);
        assert!(matches!(
            poisson_bracket(&odd, &odd, &[1.0, 2.0, 3.0]),
            Err(Error::OddDimension(3))
        ));
    }

    #[test]
    fn symplecticity_examples() {
        assert_eq!(symplecticity_residual(&map(&["x1", "x2"]), &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(symplecticity_residual(&map(&["2*x1", "x2/2"]), &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(symplecticity_residual(&map(&["2*x1", "x2"]), &[1.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(
            symplecticity_residual(&map(&["x1"]), &[1.0]),
            Err(Error::OddDimension(1))
        ));
    }

    #[test]
    fn affine_structure_passes_and_corruption_fails() {
        let f = map(&["2*x1 + 3"]);
        let region = SamplingRegion::cube(1, -5.0, 5.0).unwrap().with_sample_count(200);
        let good = IntegrabilityStructure::new(1, vec![field(&["x1 + 3"])], vec![]).unwrap();
        let report = certify_structure(&f, &good, &region, &CertifyOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{report:#?}");
        let bad = IntegrabilityStructure::new(1, vec![field(&["x1 + 2"])], vec![]).unwrap();
        let report = certify_structure(&f, &bad, &region, &CertifyOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
        let failing: Vec<_> = report.failing().collect();
        assert!(failing.iter().any(|c| c.name == "commutation[x1 + 2]"));
        assert!(failing.iter().all(|c| c.worst_point.is_some()));
    }

    #[test]
    fn integrals_only_structure() {
        let lyness = map(&["x2", "(x2 + 1)/x1"]).with_guard(Arc::new(|x: &[f64]| x.iter().all(|v| *v > 1e-3)));
        let f1 = scalar("(x1 + x2 + 1)*(x1 + 1)*(x2 + 1)/(x1*x2)", 2);
        let s = IntegrabilityStructure::new(2, vec![], vec![f1]).unwrap();
        let region = SamplingRegion::cube(2, 0.1, 10.0).unwrap().with_sample_count(300);
        let report = certify_structure(&lyness, &s, &region, &CertifyOptions::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
        let names: Vec<_> = report.conditions.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["gradient_independence", "invariance[(x1 + x2 + 1)*(x1 + 1)*(x2 + 1)/(x1*x2)]"]);
        assert!(!report.structure.complete);
    }

    #[test]
    fn black_box_field_is_unverified() {
        let f = map(&["2*x1 + 3"]);
        let bb = VectorField::new("bb", Arc::new(BlackBox::new(1, 1, |x| Ok(vec![x[0] + 3.0])))).unwrap();
        let region = SamplingRegion::cube(1, -5.0, 5.0).unwrap().with_sample_count(20);
        let s = IntegrabilityStructure::new(1, vec![bb.clone()], vec![]).unwrap();
        let opts = CertifyOptions {
            flow_times: vec![],
            ..CertifyOptions::default()
        };
        assert_eq!(
            certify_structure(&f, &s, &region, &opts).unwrap().verdict,
            Verdict::Unverified
        );
        let s = IntegrabilityStructure::new(1, vec![bb], vec![]).unwrap();
        let report = certify_structure(&f, &s, &region, &CertifyOptions::default()).unwrap();
        // commutation only needs Df, which the map provides through jets
        assert_eq!(report.verdict, Verdict::Pass, "{report:#?}");
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99), 99.0);
        assert_eq!(percentile(&v[..10], 0.99), 10.0);
        assert_eq!(percentile(&[], 0.99), 0.0);
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances {
            ae_fraction: 0.5,
            ..Tolerances::default()
        };
        assert!(bad.validate().is_err());
        let bad = Tolerances {
            flow_tol: 0.0,
            ..Tolerances::default()
        };
        assert!(bad.validate().is_err());
    }
}
