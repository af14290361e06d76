use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dynint_core::catalog::Params;
use dynint_core::certify::Tolerances;

use crate::args::{Command, Format, Options};
use crate::error::CliError;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_FLOW_TIMES: [f64; 3] = [-1.0, 0.5, 1.0];
pub const DEFAULT_ITERATIONS: usize = 10_000;
pub const DEFAULT_NEWTON_SEEDS: usize = 200;
pub const DEFAULT_WINDOWS: usize = 4;

/// Contents of `--config`; keys mirror the long flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub map: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    pub structure_file: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub flow_times: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub seeds: Option<usize>,
    pub windows: Option<usize>,
    pub center: Option<Vec<f64>>,
    pub plane: Option<(usize, usize)>,
    pub output: Option<String>,
    pub format: Option<Format>,
    pub algebraic_tol: Option<f64>,
    pub flow_tol: Option<f64>,
    pub rank_threshold: Option<f64>,
    pub ae_fraction: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let err = |message: String| CliError::ConfigFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

/// Fully resolved settings; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub map: Option<String>,
    /// Raw parameters as given; reports also carry the resolved values.
    #[serde(skip)]
    pub params: Params,
    pub structure_file: Option<String>,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub flow_times: Vec<f64>,
    pub iterations: usize,
    pub x0: Option<Vec<f64>>,
    pub period: usize,
    pub newton_seeds: usize,
    pub windows: usize,
    pub center: Option<Vec<f64>>,
    /// Zero-based coordinate pair.
    pub plane: (usize, usize),
    pub format: Format,
    pub output: Option<String>,
    pub timing: bool,
}

fn parse_list(flag: &str, src: &str) -> Result<Vec<f64>, CliError> {
    if src.trim().is_empty() {
        return Ok(vec![]);
    }
    src.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("--{flag}: `{}` is not a finite number", s.trim())))
        })
        .collect()
}

fn parse_param(raw: &str) -> Result<(String, String), CliError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Config(format!("--param expects NAME=VALUE, got `{raw}`"))),
    }
}

fn json_scalar(name: &str, v: &serde_json::Value) -> Result<String, CliError> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::Config(format!("config parameter `{name}` must be a string, number or boolean"))),
    }
}

impl RunConfig {
    /// Flags first, then the config file, then defaults.
    pub fn resolve(command: Command, opts: &Options) -> Result<Self, CliError> {
        let file = match &opts.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let mut params = Params::new();
        for (k, v) in &file.params {
            params.insert(k.clone(), json_scalar(k, v)?);
        }
        for raw in &opts.params {
            let (k, v) = parse_param(raw)?;
            params.insert(k, v);
        }
        let defaults = Tolerances::default();
        let tolerances = Tolerances {
            algebraic_tol: opts.algebraic_tol.or(file.algebraic_tol).unwrap_or(defaults.algebraic_tol),
            flow_tol: opts.flow_tol.or(file.flow_tol).unwrap_or(defaults.flow_tol),
            rank_threshold: opts.rank_threshold.or(file.rank_threshold).unwrap_or(defaults.rank_threshold),
            ae_fraction: opts.ae_fraction.or(file.ae_fraction).unwrap_or(defaults.ae_fraction),
        };
        tolerances.validate()?;
        let flow_times = match &opts.flow_times {
            Some(s) => parse_list("flow-times", s)?,
            None => file.flow_times.unwrap_or_else(|| DEFAULT_FLOW_TIMES.to_vec()),
        };
        let x0 = match &opts.x0 {
            Some(s) => Some(parse_list("x0", s)?),
            None => file.x0,
        };
        let center = match &opts.center {
            Some(s) => Some(parse_list("center", s)?),
            None => file.center,
        };
        let plane = match &opts.plane {
            Some(s) => {
                let v = parse_list("plane", s)?;
                match v[..] {
                    [i, j] if i >= 1.0 && j >= 1.0 && i.fract() == 0.0 && j.fract() == 0.0 => (i as usize, j as usize),
                    _ => return Err(CliError::Config("--plane expects two one-based indices `i,j`".into())),
                }
            }
            None => file.plane.unwrap_or((1, 2)),
        };
        if plane.0 == 0 || plane.1 == 0 || plane.0 == plane.1 {
            return Err(CliError::Config("plane indices must be distinct and one-based".into()));
        }
        let cfg = RunConfig {
            command: command.name(),
            map: opts.map.clone().or(file.map),
            params,
            structure_file: opts
                .structure_file
                .as_ref()
                .map(|p| p.display().to_string())
                .or(file.structure_file),
            samples: opts.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES),
            seed: opts.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            tolerances,
            flow_times,
            iterations: opts.iterations.or(file.iterations).unwrap_or(DEFAULT_ITERATIONS),
            x0,
            period: opts.k.or(file.k).unwrap_or(1),
            newton_seeds: opts.seeds.or(file.seeds).unwrap_or(DEFAULT_NEWTON_SEEDS),
            windows: opts.windows.or(file.windows).unwrap_or(DEFAULT_WINDOWS),
            center,
            plane: (plane.0 - 1, plane.1 - 1),
            format: opts.format.or(file.format).unwrap_or_default(),
            output: opts.output.as_ref().map(|p| p.display().to_string()).or(file.output),
            timing: opts.timing,
        };
        if cfg.samples == 0 {
            return Err(CliError::Config("--samples must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn map_name(&self) -> Result<&str, CliError> {
        self.map
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("`{}` needs --map", self.command)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_config_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"map": "lyness", "params": {{"n": 3, "a": "2"}}, "samples": 10, "seed": 7}}"#
        )
        .unwrap();
        let opts = Options {
            config: Some(file.path().to_path_buf()),
            params: vec!["a=5".into()],
            seed: Some(9),
            ..Options::default()
        };
        let cfg = RunConfig::resolve(Command::Certify, &opts).unwrap();
        assert_eq!(cfg.map.as_deref(), Some("lyness"));
        assert_eq!(cfg.params["n"], "3");
        assert_eq!(cfg.params["a"], "5");
        assert_eq!(cfg.samples, 10);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.flow_times, DEFAULT_FLOW_TIMES.to_vec());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |opts: Options| RunConfig::resolve(Command::Certify, &opts).unwrap_err().exit_code();
        assert_eq!(bad(Options { params: vec!["n".into()], ..Options::default() }), 2);
        assert_eq!(bad(Options { x0: Some("1,x".into()), ..Options::default() }), 2);
        assert_eq!(bad(Options { ae_fraction: Some(0.2), ..Options::default() }), 2);
        assert_eq!(bad(Options { plane: Some("1,1".into()), ..Options::default() }), 2);
        assert_eq!(
            bad(Options { config: Some("/nonexistent/dynint.json".into()), ..Options::default() }),
            2
        );
    }

    #[test]
    fn empty_flow_times_disable_flows() {
        let opts = Options { flow_times: Some(String::new()), ..Options::default() };
        assert!(RunConfig::resolve(Command::Certify, &opts).unwrap().flow_times.is_empty());
        let opts = Options { flow_times: Some("-1, 0.7".into()), ..Options::default() };
        assert_eq!(RunConfig::resolve(Command::Certify, &opts).unwrap().flow_times, vec![-1.0, 0.7]);
    }
}
