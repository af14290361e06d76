//! Orbit-level evidence: orbits, periodic points and their multipliers,
//! Lyapunov spectra, rotation numbers, conservation drift and the
//! translation vector realizing `f` as a time-`t` map of commuting flows.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{eigen_moduli, qr_decompose, DenseMatrix, IntegratorConfig};
use crate::system::{norm, CoordKind, IntegrabilityStructure, SamplingRegion, ScalarField, SmoothMap};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub map: String,
    pub x0: Vec<f64>,
    /// `points[0] = x0` (reduced); `points[k+1] = f(points[k])`.
    pub points: Vec<Vec<f64>>,
    /// Step whose image left the guard, if the orbit stopped early.
    pub stopped_at: Option<usize>,
    pub guard_failures: usize,
}

/// Up to `n` iterates of `x0`, stopping at the first unsafe image.
pub fn compute_orbit(f: &SmoothMap, x0: &[f64], n: usize) -> Result<Orbit> {
    if n == 0 {
        return Err(Error::InvalidConfig("orbit length must be at least 1".into()));
    }
    if x0.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    if !f.is_safe(x0) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let mut x = x0.to_vec();
    f.reduce(&mut x);
    let mut points = Vec::with_capacity(n + 1);
    points.push(x.clone());
    let mut stopped_at = None;
    for step in 1..=n {
        match f.apply(&x) {
            Ok(y) if f.is_safe(&y) => {
                points.push(y.clone());
                x = y;
            }
            _ => {
                stopped_at = Some(step);
                break;
            }
        }
    }
    Ok(Orbit {
        map: f.name().to_string(),
        x0: x0.to_vec(),
        points,
        guard_failures: usize::from(stopped_at.is_some()),
        stopped_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    /// No multiplier modulus within the tolerance of one.
    #[serde(rename = "hyperbolic")]
    Hyperbolic,
    /// Every multiplier modulus within the tolerance of one.
    #[serde(rename = "elliptic")]
    Elliptic,
    /// Some but not all moduli within the tolerance of one.
    #[serde(rename = "parabolic-tolerance")]
    ParabolicTolerance,
}

pub const MULTIPLIER_TOL: f64 = 1e-6;

pub fn classify_moduli(moduli: &[f64]) -> Stability {
    let near = moduli.iter().filter(|m| (*m - 1.0).abs() <= MULTIPLIER_TOL).count();
    match near {
        0 => Stability::Hyperbolic,
        k if k == moduli.len() => Stability::Elliptic,
        _ => Stability::ParabolicTolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicPoint {
    pub x: Vec<f64>,
    /// Minimal period; divides the requested one.
    pub period: usize,
    /// Moduli of the eigenvalues of `D(f^k)(x)` for the requested `k`.
    pub multiplier_moduli: Vec<f64>,
    pub classification: Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub dedup_radius: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tolerance: 1e-12,
            max_iterations: 50,
            dedup_radius: 1e-6,
        }
    }
}

/// `f^k(x)` on the reduced space and `D(f^k)(x)` by the chain rule.
fn iterate_with_jacobian(f: &SmoothMap, x: &[f64], k: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    let mut y = x.to_vec();
    let mut jac = DenseMatrix::identity(f.dim());
    for step in 1..=k {
        jac = f.jacobian(&y)?.matmul(&jac)?;
        y = f.apply(&y)?;
        if !f.is_safe(&y) {
            return Err(Error::GuardViolation { step });
        }
    }
    Ok((y, jac))
}

fn snap_to_circle(f: &SmoothMap, x: &mut [f64]) {
    for (v, t) in x.iter_mut().zip(f.topology()) {
        if let CoordKind::Circle { circumference } = t {
            if *v < 1e-12 || circumference - *v < 1e-12 {
                *v = 0.0;
            }
        }
    }
}

fn newton_periodic(f: &SmoothMap, start: &[f64], k: usize, cfg: &NewtonConfig) -> Option<Vec<f64>> {
    let n = f.dim();
    let mut x = start.to_vec();
    for _ in 0..cfg.max_iterations {
        let (y, jac) = iterate_with_jacobian(f, &x, k).ok()?;
        let g = f.difference(&y, &x);
        if norm(&g) <= cfg.tolerance * (1.0 + norm(&x)) {
            snap_to_circle(f, &mut x);
            return Some(x);
        }
        let dg = jac.sub(&DenseMatrix::identity(n)).ok()?;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = dg.solve(&neg).ok()?;
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += d;
        }
        f.reduce(&mut x);
        if !f.is_safe(&x) {
            return None;
        }
    }
    None
}

fn minimal_period(f: &SmoothMap, x: &[f64], k: usize) -> usize {
    let mut y = x.to_vec();
    for d in 1..=k {
        y = match f.apply(&y) {
            Ok(v) => v,
            Err(_) => return k,
        };
        if k.is_multiple_of(d) && f.distance(&y, x) <= 1e-9 * (1.0 + norm(x)) {
            return d;
        }
    }
    k
}

/// Roots of `f^k(x) = x` found by Newton from sampled starts.
///
/// Non-converging starts are dropped. Roots closer than the dedup radius
/// are merged; results are sorted lexicographically.
pub fn find_periodic_points(
    f: &SmoothMap,
    k: usize,
    region: &SamplingRegion,
    seed_count: usize,
    cfg: &NewtonConfig,
) -> Result<Vec<PeriodicPoint>> {
    if k == 0 {
        return Err(Error::InvalidConfig("period must be at least 1".into()));
    }
    if region.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: region.dim(),
        });
    }
    let starts = region.sample(seed_count)?;
    let roots: Vec<Option<Vec<f64>>> = starts
        .par_iter()
        .map(|s| newton_periodic(f, s, k, cfg))
        .collect();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for x in roots.into_iter().flatten() {
        if unique.iter().all(|u| f.distance(u, &x) > cfg.dedup_radius) {
            unique.push(x);
        }
    }
    unique.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    unique
        .into_iter()
        .map(|x| {
            let (y, jac) = iterate_with_jacobian(f, &x, k)?;
            debug_assert!(f.distance(&y, &x) <= 1e-10 * (1.0 + norm(&x)));
            let moduli = eigen_moduli(&jac)?;
            Ok(PeriodicPoint {
                period: minimal_period(f, &x, k),
                classification: classify_moduli(&moduli),
                multiplier_moduli: moduli,
                x,
            })
        })
        .collect()
}

/// Lyapunov exponents, descending, with QR re-orthonormalization every step.
pub fn lyapunov_spectrum(f: &SmoothMap, x0: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 100 {
        return Err(Error::InvalidConfig(format!(
            "Lyapunov estimates need at least 100 iterates, got {n}"
        )));
    }
    if !f.is_safe(x0) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let d = f.dim();
    let mut x = x0.to_vec();
    f.reduce(&mut x);
    let mut q = DenseMatrix::identity(d);
    let mut sums = vec![0.0; d];
    for step in 1..=n {
        let z = f.jacobian(&x)?.matmul(&q)?;
        let (q_next, r) = qr_decompose(&z)?;
        for (i, s) in sums.iter_mut().enumerate() {
            *s += r[(i, i)].abs().ln();
        }
        q = q_next;
        x = f.apply(&x)?;
        if !f.is_safe(&x) {
            return Err(Error::GuardViolation { step });
        }
    }
    let mut exps: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    exps.sort_by(|a, b| b.total_cmp(a));
    Ok(exps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationEstimate {
    /// Mean of the window estimates, reduced to `[0, 1)`.
    pub value: f64,
    pub window_estimates: Vec<f64>,
    /// Largest pairwise difference of the window estimates.
    pub dispersion: f64,
    /// Set for estimates that rest on an assumed angular coordinate.
    pub experimental: bool,
}

fn summarize_windows(windows: Vec<f64>, experimental: bool) -> RotationEstimate {
    let mean = windows.iter().sum::<f64>() / windows.len() as f64;
    let max = windows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = windows.iter().copied().fold(f64::INFINITY, f64::min);
    let mut value = mean.rem_euclid(1.0);
    if value >= 1.0 {
        value = 0.0;
    }
    RotationEstimate {
        value,
        window_estimates: windows,
        dispersion: max - min,
        experimental,
    }
}

fn window_lengths(n: usize, windows: usize) -> Result<usize> {
    if windows == 0 || n < windows {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} iterates into {windows} windows"
        )));
    }
    Ok(n / windows)
}

/// Number of grid points used to check that a circle map lifts monotonically.
const MONOTONICITY_GRID: usize = 256;

/// Rotation number of a circle map from its lift, one estimate per window
/// of `n / windows` consecutive iterates.
pub fn rotation_number(f: &SmoothMap, x0: f64, n: usize, windows: usize) -> Result<RotationEstimate> {
    let c = match f.topology() {
        [CoordKind::Circle { circumference }] => *circumference,
        _ => {
            return Err(Error::InvalidConfig(
                "rotation_number needs a one-dimensional circle map".into(),
            ))
        }
    };
    for i in 0..MONOTONICITY_GRID {
        let at = c * i as f64 / MONOTONICITY_GRID as f64;
        let derivative = f.jacobian(&[at])?[(0, 0)];
        if !(derivative > 0.0) {
            return Err(Error::NonMonotone { at, derivative });
        }
    }
    let len = window_lengths(n, windows)?;
    let mut y = x0;
    let mut estimates = Vec::with_capacity(windows);
    for _ in 0..windows {
        let start = y;
        for _ in 0..len {
            y = f.apply_lift(&[y])?[0];
        }
        estimates.push((y - start) / (c * len as f64));
    }
    Ok(summarize_windows(estimates, false))
}

/// Mean winding of the orbit around `center` in the `(i, j)` coordinate
/// plane, in turns per iterate. Each step is assumed to turn by less than
/// half a revolution.
pub fn angular_rotation_number(
    f: &SmoothMap,
    center: &[f64],
    plane: (usize, usize),
    x0: &[f64],
    n: usize,
    windows: usize,
) -> Result<RotationEstimate> {
    let (i, j) = plane;
    if center.len() != f.dim() || i >= f.dim() || j >= f.dim() || i == j {
        return Err(Error::InvalidConfig("bad center or coordinate plane".into()));
    }
    let len = window_lengths(n, windows)?;
    let angle = |x: &[f64]| (x[j] - center[j]).atan2(x[i] - center[i]);
    let mut x = x0.to_vec();
    if !f.is_safe(&x) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let mut theta = angle(&x);
    let mut step = 0;
    let mut estimates = Vec::with_capacity(windows);
    for _ in 0..windows {
        let mut turned = 0.0;
        for _ in 0..len {
            step += 1;
            x = f.apply(&x)?;
            if !f.is_safe(&x) {
                return Err(Error::GuardViolation { step });
            }
            let next = angle(&x);
            let mut d = next - theta;
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            } else if d <= -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            turned += d;
            theta = next;
        }
        estimates.push(turned / (std::f64::consts::TAU * len as f64));
    }
    Ok(summarize_windows(estimates, true))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralDrift {
    pub name: String,
    pub initial: f64,
    pub max_drift: f64,
    /// Drift divided by `1 + |F(x0)|`.
    pub relative_drift: f64,
}

/// Per integral, `max |F(f^k(x0)) - F(x0)|` over `k <= n`.
pub fn level_set_drift(f: &SmoothMap, integrals: &[ScalarField], x0: &[f64], n: usize) -> Result<Vec<IntegralDrift>> {
    if !f.is_safe(x0) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let initial: Vec<f64> = integrals.iter().map(|g| g.eval(x0)).collect::<std::result::Result<_, _>>()?;
    let mut worst = vec![0.0f64; integrals.len()];
    let mut x = x0.to_vec();
    for step in 1..=n {
        x = f.apply(&x)?;
        if !f.is_safe(&x) {
            return Err(Error::GuardViolation { step });
        }
        for ((g, w), v0) in integrals.iter().zip(worst.iter_mut()).zip(&initial) {
            *w = w.max((g.eval(&x)? - v0).abs());
        }
    }
    Ok(integrals
        .iter()
        .zip(initial)
        .zip(worst)
        .map(|((g, initial), max_drift)| IntegralDrift {
            name: g.name().to_string(),
            initial,
            max_drift,
            relative_drift: max_drift / (1.0 + initial.abs()),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingConfig {
    pub integrator: IntegratorConfig,
    /// Forward-difference step in each flow time.
    pub fd_step: f64,
    pub max_iterations: usize,
    /// Accepted residual, relative to `1 + |f(x)|`.
    pub tolerance: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            integrator: IntegratorConfig::default(),
            fd_step: 1e-6,
            max_iterations: 50,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationEstimate {
    pub t0: Vec<f64>,
    /// `|phi^{t0}(x) - f(x)|` at the fitting point.
    pub residual: f64,
    pub iterations: usize,
}

fn compose_flows(f: &SmoothMap, s: &IntegrabilityStructure, x: &[f64], t: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    for (field, &tj) in s.fields().iter().zip(t) {
        y = field.flow(&y, tj, cfg, f.guard())?;
    }
    f.reduce(&mut y);
    Ok(y)
}

/// Flow times `t` with `phi_m^{t_m} o ... o phi_1^{t_1}(x) = f(x)`, by
/// Gauss-Newton from `t = 0`.
pub fn estimate_translation_vector(
    f: &SmoothMap,
    s: &IntegrabilityStructure,
    x: &[f64],
    cfg: &ShootingConfig,
) -> Result<TranslationEstimate> {
    let m = s.m();
    if m == 0 {
        return Err(Error::InvalidConfig("translation vector needs at least one field".into()));
    }
    if !f.is_safe(x) {
        return Err(Error::GuardViolation { step: 0 });
    }
    let target = f.apply(x)?;
    let accept = cfg.tolerance * (1.0 + norm(&target));
    let mut t = vec![0.0; m];
    let mut residual = f64::INFINITY;
    for iteration in 0..=cfg.max_iterations {
        let r = f.difference(&compose_flows(f, s, x, &t, &cfg.integrator)?, &target);
        residual = norm(&r);
        if residual <= accept {
            return Ok(TranslationEstimate {
                t0: t,
                residual,
                iterations: iteration,
            });
        }
        if iteration == cfg.max_iterations {
            break;
        }
        let mut columns = Vec::with_capacity(m);
        for j in 0..m {
            let mut tp = t.clone();
            tp[j] += cfg.fd_step;
            let rp = f.difference(&compose_flows(f, s, x, &tp, &cfg.integrator)?, &target);
            columns.push(rp.iter().zip(&r).map(|(a, b)| (a - b) / cfg.fd_step).collect::<Vec<f64>>());
        }
        let jac = DenseMatrix::from_columns(&columns)?;
        let jt = jac.transpose();
        let normal = jt.matmul(&jac)?;
        let rhs: Vec<f64> = jt.matvec(&r)?.iter().map(|v| -v).collect();
        let delta = normal.solve(&rhs)?;
        for (tj, d) in t.iter_mut().zip(&delta) {
            *tj += d;
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}
