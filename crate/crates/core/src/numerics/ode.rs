//! Adaptive Dormand–Prince 5(4) integration of autonomous flows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::function::VectorFn;

/// Step-size control for [`integrate_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Initial step magnitude; clipped to the integration span.
    pub initial_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 1_000_000,
            initial_step: 1e-2,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("integrator tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidConfig("initial_step must be positive".into()));
        }
        Ok(())
    }
}

// Dormand–Prince tableau; the fields are autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Approximates the time-`t` flow `phi^t(x0)` of the autonomous field.
///
/// `t` may be negative; `t == 0` returns `x0` unchanged. When `safe` is
/// given, every accepted state must satisfy it, otherwise the error carries
/// the time of the last safe state.
pub fn integrate_flow(
    field: &dyn VectorFn,
    x0: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
    safe: Option<&dyn Fn(&[f64]) -> bool>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x0.len() != field.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: field.dim_in(),
            got: x0.len(),
        });
    }
    if !t.is_finite() {
        return Err(Error::InvalidConfig(format!("flow time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let n = x0.len();
    let dir = t.signum();
    let span = t.abs();
    let mut y = x0.to_vec();
    let mut elapsed = 0.0;
    let mut h = cfg.initial_step.min(span);
    let mut k: Vec<Vec<f64>> = vec![field.eval_f64(&y)?; 7];
    let mut stage = vec![0.0; n];

    for _ in 0..cfg.max_steps {
        let remaining = span - elapsed;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + hs * acc;
            }
            k[s] = field.eval_f64(&stage)?;
        }
        // stage 7 was evaluated at the 5th-order solution (FSAL)
        let y5 = stage.clone();
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut diff = 0.0;
            for s in 0..7 {
                diff += (B5[s] - B4[s]) * k[s][i];
            }
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y5[i].abs());
            let e = hs * diff / sc;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }
        if err <= 1.0 {
            if let Some(ok) = safe {
                if !ok(&y5) {
                    return Err(Error::LeftSafeRegion {
                        t_exit: dir * (elapsed + 0.5 * h),
                    });
                }
            }
            elapsed = if last { span } else { elapsed + h };
            y = y5;
            k[0] = k[6].clone();
            if last {
                return Ok(y);
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= factor;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
        if h <= f64::EPSILON * span {
            return Err(Error::StepLimit {
                steps: cfg.max_steps,
                t_reached: dir * elapsed,
            });
        }
    }
    Err(Error::StepLimit {
        steps: cfg.max_steps,
        t_reached: dir * elapsed,
    })
}
