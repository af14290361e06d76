use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use dynint_core::catalog::ParamValue;
use dynint_core::certify::{CertificationReport, ResidualStats, StructureSummary, Verdict};
use dynint_core::dynamics::{IntegralDrift, Orbit, PeriodicPoint, RotationEstimate, TranslationEstimate};

use crate::args::Format;
use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parameters in declaration order, serialized as an object.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedParams(pub Vec<(String, ParamValue)>);

impl Serialize for OrderedParams {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Common envelope; `body` fields are spliced between `params` and `wall_time_ms`.
#[derive(Serialize)]
pub struct Report<'a, B: Serialize> {
    pub version: &'static str,
    pub caveat: &'static str,
    pub config: &'a RunConfig,
    pub params: OrderedParams,
    #[serde(flatten)]
    pub body: B,
    pub wall_time_ms: Option<u64>,
}

/// Flat table view of a report body for CSV output.
pub trait Tabular {
    fn header(&self) -> Vec<String>;
    fn rows(&self) -> Vec<Vec<String>>;
}

/// Seventeen significant digits: round-trips every double.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render<B: Serialize + Tabular>(report: &Report<B>, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => csv_table(&report.body.header(), &report.body.rows()),
    }
}

/// RFC 4180 quoting with LF record terminators.
pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

const CONDITION_HEADER: [&str; 10] = [
    "name",
    "anchor",
    "count",
    "max_abs",
    "mean_abs",
    "p99_abs",
    "worst_point",
    "scale",
    "pass",
    "skipped",
];

fn condition_row(c: &ResidualStats) -> Vec<String> {
    vec![
        c.name.clone(),
        c.anchor.clone(),
        c.count.to_string(),
        num(c.max_abs),
        num(c.mean_abs),
        num(c.p99_abs),
        c.worst_point.as_deref().map(nums).unwrap_or_default(),
        num(c.scale),
        opt(c.pass),
        c.skipped.to_string(),
    ]
}

#[derive(Serialize)]
pub struct CertifyBody {
    pub map: String,
    pub structure_status: &'static str,
    pub structure: StructureSummary,
    pub notes: Vec<String>,
    pub samples: usize,
    pub skipped_points: usize,
    pub conditions: Vec<ResidualStats>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant_search: Option<dynint_core::catalog::VariantSearchReport>,
}

impl CertifyBody {
    pub fn new(report: CertificationReport, structure_status: &'static str, notes: Vec<String>) -> Self {
        CertifyBody {
            map: report.map,
            structure_status,
            structure: report.structure,
            notes,
            samples: report.samples,
            skipped_points: report.skipped_points,
            conditions: report.conditions,
            verdict: report.verdict,
            variant_search: None,
        }
    }
}

impl Tabular for CertifyBody {
    fn header(&self) -> Vec<String> {
        CONDITION_HEADER.iter().map(|s| s.to_string()).collect()
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = self.conditions.iter().map(condition_row).collect();
        let mut verdict = vec![String::new(); CONDITION_HEADER.len()];
        verdict[0] = "verdict".into();
        verdict[8] = format!("{:?}", self.verdict).to_uppercase();
        rows.push(verdict);
        rows
    }
}

#[derive(Serialize)]
pub struct ListBody {
    pub maps: Vec<dynint_core::catalog::EntryInfo>,
}

impl Tabular for ListBody {
    fn header(&self) -> Vec<String> {
        ["name", "description", "structure", "structure_status", "params"]
            .map(String::from)
            .to_vec()
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.maps
            .iter()
            .map(|e| {
                let params = e
                    .params
                    .iter()
                    .map(|p| format!("{}={}", p.name, p.default))
                    .collect::<Vec<_>>()
                    .join(" ");
                let status = serde_json::to_value(e.structure_status).expect("status serializes");
                vec![
                    e.name.to_string(),
                    e.description.to_string(),
                    e.structure.to_string(),
                    status.as_str().unwrap_or_default().to_string(),
                    params,
                ]
            })
            .collect()
    }
}

/// Header shared by the dynamics commands.
#[derive(Serialize)]
pub struct DynamicsBody<T: Serialize> {
    pub map: String,
    pub structure: &'static str,
    #[serde(flatten)]
    pub result: T,
}

fn coordinate_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Serialize)]
pub struct OrbitResult {
    pub orbit: Orbit,
}

impl Tabular for DynamicsBody<OrbitResult> {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string()];
        h.extend(coordinate_header("x", self.result.orbit.x0.len()));
        h
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.result
            .orbit
            .points
            .iter()
            .enumerate()
            .map(|(k, p)| std::iter::once(k.to_string()).chain(p.iter().map(|v| num(*v))).collect())
            .collect()
    }
}

#[derive(Serialize)]
pub struct LyapunovResult {
    pub x0: Vec<f64>,
    pub iterations: usize,
    pub exponents: Vec<f64>,
}

impl Tabular for DynamicsBody<LyapunovResult> {
    fn header(&self) -> Vec<String> {
        vec!["index".into(), "exponent".into()]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.result
            .exponents
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
            .collect()
    }
}

#[derive(Serialize)]
pub struct RotationResult {
    pub method: &'static str,
    pub x0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub rotation: RotationEstimate,
}

impl Tabular for DynamicsBody<RotationResult> {
    fn header(&self) -> Vec<String> {
        vec!["window".into(), "estimate".into()]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        let r = &self.result.rotation;
        let mut rows: Vec<Vec<String>> = r
            .window_estimates
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), num(*v)])
            .collect();
        rows.push(vec!["mean".into(), num(r.value)]);
        rows.push(vec!["dispersion".into(), num(r.dispersion)]);
        rows
    }
}

#[derive(Serialize)]
pub struct PeriodicResult {
    pub period: usize,
    pub starts: usize,
    pub points: Vec<PeriodicPoint>,
}

impl Tabular for DynamicsBody<PeriodicResult> {
    fn header(&self) -> Vec<String> {
        ["x", "minimal_period", "multiplier_moduli", "classification"].map(String::from).to_vec()
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.result
            .points
            .iter()
            .map(|p| {
                let class = serde_json::to_value(p.classification).expect("classification serializes");
                vec![
                    nums(&p.x),
                    p.period.to_string(),
                    nums(&p.multiplier_moduli),
                    class.as_str().unwrap_or_default().to_string(),
                ]
            })
            .collect()
    }
}

#[derive(Serialize)]
pub struct DriftResult {
    pub x0: Vec<f64>,
    pub iterations: usize,
    pub drift: Vec<IntegralDrift>,
}

impl Tabular for DynamicsBody<DriftResult> {
    fn header(&self) -> Vec<String> {
        ["integral", "initial", "max_drift", "relative_drift"].map(String::from).to_vec()
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.result
            .drift
            .iter()
            .map(|d| vec![d.name.clone(), num(d.initial), num(d.max_drift), num(d.relative_drift)])
            .collect()
    }
}

#[derive(Serialize)]
pub struct TranslationResult {
    pub x: Vec<f64>,
    pub fields: Vec<String>,
    pub translation: TranslationEstimate,
}

impl Tabular for DynamicsBody<TranslationResult> {
    fn header(&self) -> Vec<String> {
        vec!["field".into(), "t0".into()]
    }
    fn rows(&self) -> Vec<Vec<String>> {
        self.result
            .fields
            .iter()
            .zip(&self.result.translation.t0)
            .map(|(f, t)| vec![f.clone(), num(*t)])
            .collect()
    }
}
