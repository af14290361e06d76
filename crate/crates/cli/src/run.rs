use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use dynint_core::catalog::{self, lyness_fixed_point, variant_search, Built, ParamValue, StructureStatus};
use dynint_core::certify::{certify_structure, certify_symplectic, CertifyOptions, Verdict, CAVEAT};
use dynint_core::constructions::lift_structure;
use dynint_core::dynamics::{
    angular_rotation_number, compute_orbit, estimate_translation_vector, find_periodic_points, level_set_drift,
    lyapunov_spectrum, rotation_number, NewtonConfig, ShootingConfig,
};
use dynint_core::expr::{ExprFormula, VarLayout};
use dynint_core::system::{CoordKind, IntegrabilityStructure, SamplingRegion, ScalarField, VectorField};

use crate::args::Command;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::*;

/// Points used to score each symmetry variant after a failed certification.
pub const VARIANT_SEARCH_POINTS: usize = 50;

/// Rendered report plus the exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub exit_code: i32,
    pub rendered: String,
}

/// User-supplied structure; expressions use `x1..xn`, and `p1..pn` when
/// `phase_space` is set (then `dim = 2n`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureFile {
    pub dim: usize,
    #[serde(default)]
    pub phase_space: bool,
    #[serde(default)]
    pub fields: Vec<Vec<String>>,
    #[serde(default)]
    pub integrals: Vec<String>,
}

impl StructureFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let err = |message: String| CliError::ConfigFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn build(&self) -> Result<IntegrabilityStructure, CliError> {
        let layout = if self.phase_space {
            if !self.dim.is_multiple_of(2) {
                return Err(CliError::Config("a phase-space structure needs an even dimension".into()));
            }
            VarLayout::phase_space(self.dim / 2)
        } else {
            VarLayout::positions(self.dim)
        };
        let mut fields = Vec::with_capacity(self.fields.len());
        for comps in &self.fields {
            if comps.len() != self.dim {
                return Err(CliError::Config(format!(
                    "field ({}) has {} components, expected {}",
                    comps.join(", "),
                    comps.len(),
                    self.dim
                )));
            }
            let f = ExprFormula::parse(comps, layout)?;
            fields.push(VectorField::new(format!("({})", comps.join(", ")), Arc::new(f))?);
        }
        let mut integrals = Vec::with_capacity(self.integrals.len());
        for src in &self.integrals {
            let f = ExprFormula::parse(&[src], layout)?;
            integrals.push(ScalarField::new(src.clone(), Arc::new(f))?);
        }
        Ok(IntegrabilityStructure::new(self.dim, fields, integrals)?)
    }
}

struct Context {
    built: Built,
    structure: Option<IntegrabilityStructure>,
    from_file: bool,
}

impl Context {
    fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let built = catalog::build(cfg.map_name()?, &cfg.params)?;
        let (structure, from_file) = match &cfg.structure_file {
            Some(path) => {
                let s = StructureFile::load(Path::new(path))?.build()?;
                if s.dim() != built.map.dim() {
                    return Err(CliError::Config(format!(
                        "structure dimension {} does not match map dimension {}",
                        s.dim(),
                        built.map.dim()
                    )));
                }
                (Some(s), true)
            }
            None => (built.structure.clone(), false),
        };
        Ok(Context {
            built,
            structure,
            from_file,
        })
    }

    fn status(&self) -> &'static str {
        if self.from_file {
            return "from_file";
        }
        match self.built.structure_status {
            StructureStatus::Verified => "verified",
            StructureStatus::Unverified => "unverified",
            StructureStatus::None => "none",
        }
    }

    fn label(&self) -> &'static str {
        if self.from_file {
            "structure from file"
        } else {
            self.built.structure_label()
        }
    }

    fn structure(&self, cfg: &RunConfig) -> Result<&IntegrabilityStructure, CliError> {
        self.structure.as_ref().ok_or_else(|| {
            CliError::Config(format!(
                "map `{}` has no structure for `{}`; supply --structure-file",
                self.built.name, cfg.command
            ))
        })
    }

    fn region(&self, cfg: &RunConfig) -> SamplingRegion {
        self.built.region.clone().with_seed(cfg.seed).with_sample_count(cfg.samples)
    }

    /// Given start point, or the midpoint of the sampling box.
    fn x0(&self, cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
        let n = self.built.map.dim();
        match &cfg.x0 {
            Some(x) if x.len() == n => Ok(x.clone()),
            Some(x) => Err(CliError::Config(format!("--x0 has {} coordinates, map dimension is {n}", x.len()))),
            None => {
                let r = &self.built.region;
                Ok(r.lower().iter().zip(r.upper()).map(|(a, b)| 0.5 * (a + b)).collect())
            }
        }
    }

    fn param(&self, name: &str) -> Option<&ParamValue> {
        self.built.params.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    fn dynamics<T: Serialize>(&self, result: T) -> DynamicsBody<T> {
        DynamicsBody {
            map: self.built.map.name().to_string(),
            structure: self.label(),
            result,
        }
    }
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions {
    CertifyOptions {
        tolerances: cfg.tolerances,
        flow_times: cfg.flow_times.clone(),
        ..CertifyOptions::default()
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Fail => 1,
        Verdict::Pass | Verdict::Unverified => 0,
    }
}

/// Lyness `(n, a)` when the candidate symmetry was certified.
fn lyness_symmetry_params(ctx: &Context) -> Option<(usize, f64)> {
    if ctx.built.name != "lyness" || ctx.from_file {
        return None;
    }
    match (ctx.param("n"), ctx.param("a"), ctx.param("symmetry")) {
        (Some(ParamValue::Int(n)), Some(ParamValue::Real(a)), Some(ParamValue::Bool(true))) => Some((*n as usize, *a)),
        _ => None,
    }
}

fn certify(cfg: &RunConfig, ctx: &Context) -> Result<(CertifyBody, i32), CliError> {
    let s = ctx.structure(cfg)?;
    let report = certify_structure(&ctx.built.map, s, &ctx.region(cfg), &certify_options(cfg))?;
    let code = verdict_code(report.verdict);
    let mut body = CertifyBody::new(report, ctx.status(), ctx.built.notes.clone());
    if body.verdict == Verdict::Fail {
        if let Some((n, a)) = lyness_symmetry_params(ctx) {
            body.variant_search = Some(variant_search(
                n,
                a,
                VARIANT_SEARCH_POINTS,
                cfg.seed,
                cfg.tolerances.algebraic_tol,
            )?);
        }
    }
    Ok((body, code))
}

fn lift_certify(cfg: &RunConfig, ctx: &Context) -> Result<(CertifyBody, i32), CliError> {
    let n = ctx.built.map.dim();
    let (lifted, integrals) = match &ctx.structure {
        Some(s) => lift_structure(&ctx.built.map, s)?,
        None => (dynint_core::constructions::cotangent_lift(&ctx.built.map)?, vec![]),
    };
    let region = ctx
        .built
        .region
        .product(&SamplingRegion::cube(n, -1.0, 1.0)?)?
        .with_seed(cfg.seed)
        .with_sample_count(cfg.samples);
    let report = certify_symplectic(&lifted.lifted, &integrals, &region, &certify_options(cfg))?;
    let code = verdict_code(report.verdict);
    let mut notes = ctx.built.notes.clone();
    notes.push("momenta sampled in [-1, 1]^n".into());
    Ok((CertifyBody::new(report, ctx.status(), notes), code))
}

fn rotation(cfg: &RunConfig, ctx: &Context) -> Result<DynamicsBody<RotationResult>, CliError> {
    let map = &ctx.built.map;
    let x0 = ctx.x0(cfg)?;
    if let [CoordKind::Circle { .. }] = map.topology() {
        let est = rotation_number(map, x0[0], cfg.iterations, cfg.windows)?;
        return Ok(ctx.dynamics(RotationResult {
            method: "circle_lift",
            x0,
            center: None,
            rotation: est,
        }));
    }
    let center = match (&cfg.center, ctx.built.name, ctx.param("n"), ctx.param("a")) {
        (Some(c), ..) => c.clone(),
        (None, "lyness", Some(ParamValue::Int(n)), Some(ParamValue::Real(a))) => lyness_fixed_point(*n as usize, *a)?,
        _ => return Err(CliError::Config("rotation on a non-circle map needs --center".into())),
    };
    if cfg.x0.is_none() {
        return Err(CliError::Config("angular rotation needs an explicit --x0".into()));
    }
    let est = angular_rotation_number(map, &center, cfg.plane, &x0, cfg.iterations, cfg.windows)?;
    Ok(ctx.dynamics(RotationResult {
        method: "angular_experimental",
        x0,
        center: Some(center),
        rotation: est,
    }))
}

fn finish<B: Serialize + Tabular>(
    cfg: &RunConfig,
    params: Vec<(String, ParamValue)>,
    body: B,
    exit_code: i32,
    started: Instant,
) -> Execution {
    let report = Report {
        version: VERSION,
        caveat: CAVEAT,
        config: cfg,
        params: OrderedParams(params),
        body,
        wall_time_ms: cfg.timing.then(|| started.elapsed().as_millis() as u64),
    };
    Execution {
        exit_code,
        rendered: render(&report, cfg.format),
    }
}

/// Runs one command; the report is returned, not written.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Execution, CliError> {
    let started = Instant::now();
    if command == Command::List {
        return Ok(finish(cfg, vec![], ListBody { maps: catalog::list() }, 0, started));
    }
    let ctx = Context::load(cfg)?;
    let params = ctx.built.params.clone();
    let map = &ctx.built.map;
    Ok(match command {
        Command::List => unreachable!("handled above"),
        Command::Certify => {
            let (body, code) = certify(cfg, &ctx)?;
            finish(cfg, params, body, code, started)
        }
        Command::LiftCertify => {
            let (body, code) = lift_certify(cfg, &ctx)?;
            finish(cfg, params, body, code, started)
        }
        Command::Orbit => {
            let orbit = compute_orbit(map, &ctx.x0(cfg)?, cfg.iterations)?;
            finish(cfg, params, ctx.dynamics(OrbitResult { orbit }), 0, started)
        }
        Command::Lyapunov => {
            let x0 = ctx.x0(cfg)?;
            let exponents = lyapunov_spectrum(map, &x0, cfg.iterations)?;
            let body = ctx.dynamics(LyapunovResult {
                x0,
                iterations: cfg.iterations,
                exponents,
            });
            finish(cfg, params, body, 0, started)
        }
        Command::Rotation => finish(cfg, params, rotation(cfg, &ctx)?, 0, started),
        Command::Periodic => {
            let points = find_periodic_points(
                map,
                cfg.period,
                &ctx.built.region.clone().with_seed(cfg.seed),
                cfg.newton_seeds,
                &NewtonConfig::default(),
            )?;
            let body = ctx.dynamics(PeriodicResult {
                period: cfg.period,
                starts: cfg.newton_seeds,
                points,
            });
            finish(cfg, params, body, 0, started)
        }
        Command::Drift => {
            let s = ctx.structure(cfg)?;
            let x0 = ctx.x0(cfg)?;
            let drift = level_set_drift(map, s.integrals(), &x0, cfg.iterations)?;
            let body = ctx.dynamics(DriftResult {
                x0,
                iterations: cfg.iterations,
                drift,
            });
            finish(cfg, params, body, 0, started)
        }
        Command::Translation => {
            let s = ctx.structure(cfg)?;
            let x = ctx.x0(cfg)?;
            let translation = estimate_translation_vector(map, s, &x, &ShootingConfig::default())?;
            let body = ctx.dynamics(TranslationResult {
                x,
                fields: s.fields().iter().map(|f| f.name().to_string()).collect(),
                translation,
            });
            finish(cfg, params, body, 0, started)
        }
    })
}
