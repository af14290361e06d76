//! Built-in maps with their claimed structures, sampling regions and the
//! outcomes the test suite expects from them.

pub mod lyness;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::Serialize;

use crate::constructions::{affine1d_symmetry, linear_commutative_family, linear_map, Affine1d, JordanBlockSpec, LinearFormula};
use crate::error::{Error, EvalResult, Result};
use crate::expr::{Expr, VarLayout};
use crate::numerics::{value_and_jacobian_in, DenseMatrix, Formula, Scalar};
use crate::system::{CoordKind, IntegrabilityStructure, SamplingRegion, ScalarField, SmoothMap, VectorField};

pub use lyness::{lyness_fixed_point, lyness_integral_values, variant_search, SymmetryVariant, VariantSearchReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Real,
    Int,
    Bool,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: &'static str,
    pub constraint: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

/// Whether the shipped structure is backed by the certifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureStatus {
    Verified,
    /// Shipped but not confirmed; reports record the outcome.
    Unverified,
    /// No structure exists or none is claimed.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
    pub structure: &'static str,
    pub structure_status: StructureStatus,
    pub expected: Vec<&'static str>,
}

/// Fully wired catalog entry.
#[derive(Debug, Clone)]
pub struct Built {
    pub name: &'static str,
    pub params: Vec<(String, ParamValue)>,
    pub map: SmoothMap,
    pub structure: Option<IntegrabilityStructure>,
    pub region: SamplingRegion,
    pub structure_status: StructureStatus,
    pub notes: Vec<String>,
}

impl Built {
    /// One-line status for dynamics reports.
    pub fn structure_label(&self) -> &'static str {
        match (&self.structure, self.structure_status) {
            (None, _) | (_, StructureStatus::None) => "no structure certified",
            (Some(_), StructureStatus::Unverified) => "structure unverified",
            (Some(_), StructureStatus::Verified) => "structure verified by certification",
        }
    }
}

/// Raw `name=value` parameters.
pub type Params = BTreeMap<String, String>;

struct Reader<'a> {
    raw: &'a Params,
    specs: &'a [ParamSpec],
    resolved: Vec<(String, ParamValue)>,
}

impl<'a> Reader<'a> {
    fn new(raw: &'a Params, specs: &'a [ParamSpec]) -> Result<Self> {
        if let Some(k) = raw.keys().find(|k| specs.iter().all(|s| s.name != k.as_str())) {
            let known: Vec<&str> = specs.iter().map(|s| s.name).collect();
            return Err(Error::Parameter(format!(
                "unknown parameter `{k}` (known: {})",
                known.join(", ")
            )));
        }
        Ok(Reader {
            raw,
            specs,
            resolved: Vec::new(),
        })
    }

    fn text(&self, name: &str) -> String {
        let spec = self.specs.iter().find(|s| s.name == name).expect("declared parameter");
        self.raw.get(name).cloned().unwrap_or_else(|| spec.default.to_string())
    }

    fn real(&mut self, name: &str) -> Result<f64> {
        let s = self.text(name);
        let v = parse_real(&s).ok_or_else(|| Error::Parameter(format!("{name}: `{s}` is not a number")))?;
        self.resolved.push((name.into(), ParamValue::Real(v)));
        Ok(v)
    }

    fn int(&mut self, name: &str) -> Result<i64> {
        let s = self.text(name);
        let v = s
            .trim()
            .parse::<i64>()
            .map_err(|_| Error::Parameter(format!("{name}: `{s}` is not an integer")))?;
        self.resolved.push((name.into(), ParamValue::Int(v)));
        Ok(v)
    }

    fn flag(&mut self, name: &str) -> Result<bool> {
        let s = self.text(name);
        let v = match s.trim() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            _ => return Err(Error::Parameter(format!("{name}: `{s}` is not a boolean"))),
        };
        self.resolved.push((name.into(), ParamValue::Bool(v)));
        Ok(v)
    }

    fn string(&mut self, name: &str) -> String {
        let s = self.text(name);
        self.resolved.push((name.into(), ParamValue::Text(s.clone())));
        s
    }
}

/// Numbers, optionally written with `pi` (e.g. `pi/2`, `2*pi`).
fn parse_real(s: &str) -> Option<f64> {
    let e = Expr::parse(s, VarLayout::positions(0)).ok()?;
    e.eval::<f64>(&[]).ok().filter(|v| v.is_finite())
}

fn usize_param(v: i64, name: &str, lo: i64, hi: i64) -> Result<usize> {
    if v < lo || v > hi {
        return Err(Error::Parameter(format!("{name} must lie in [{lo}, {hi}], got {v}")));
    }
    Ok(v as usize)
}

macro_rules! param {
    ($name:expr, $kind:ident, $default:expr, $constraint:expr) => {
        ParamSpec {
            name: $name,
            kind: ParamKind::$kind,
            default: $default,
            constraint: $constraint,
        }
    };
}

/// Names of all entries, in listing order.
pub const NAMES: [&str; 7] = [
    "affine1d",
    "rigid_rotation",
    "warned_circle",
    "linear",
    "cat_map",
    "lyness",
    "twist",
];

pub fn info(name: &str) -> Result<EntryInfo> {
    Ok(match name {
        "affine1d" => EntryInfo {
            name: "affine1d",
            description: "f(x) = a x + b on the line",
            params: vec![param!("a", Real, "2", "a != 0"), param!("b", Real, "3", "any")],
            structure: "(1,0): v = 1 if a = 1, else v = x + b/(a-1)",
            structure_status: StructureStatus::Verified,
            expected: vec!["certify: PASS (1,0)", "translation at (a,b)=(2,3), x=1: t0 = ln 2"],
        },
        "rigid_rotation" => EntryInfo {
            name: "rigid_rotation",
            description: "f(x) = x + a on the circle of length 2 pi",
            params: vec![param!("a", Real, "1", "any")],
            structure: "(1,0): v = 1",
            structure_status: StructureStatus::Verified,
            expected: vec!["certify: PASS (1,0)", "rotation number a/(2 pi) mod 1"],
        },
        "warned_circle" => EntryInfo {
            name: "warned_circle",
            description: "f(x) = x + pi/k + eps sin^2(k x) on the circle of length 2 pi",
            params: vec![
                param!("k", Int, "2", "k >= 1"),
                param!("eps", Real, "0.3", "0 < eps < 1/k"),
            ],
            structure: "none; not C^1 integrable although near-identity",
            structure_status: StructureStatus::None,
            expected: vec![
                "orbit of 0 is periodic with period 2k through the multiples of pi/k",
                "f^j(x) - j pi/k is increasing and bounded by pi/k",
                "rotation number 1/(2k)",
            ],
        },
        "linear" => EntryInfo {
            name: "linear",
            description: "f(x) = A x with A in real Jordan form",
            params: vec![param!(
                "blocks",
                Text,
                "2:2",
                "comma-separated lambda:size, lambda != 0, total size <= 16"
            )],
            structure: "(n,0): Ax, shift fields N^j x per block, scaling fields for 1x1 blocks",
            structure_status: StructureStatus::Verified,
            expected: vec!["certify: PASS (n,0)"],
        },
        "cat_map" => EntryInfo {
            name: "cat_map",
            description: "x -> [[2,1],[1,1]] x on the torus R^2/Z^2",
            params: vec![],
            structure: "none; not C^1 integrable (hyperbolic periodic points are dense)",
            structure_status: StructureStatus::None,
            expected: vec![
                "largest Lyapunov exponent ln((3+sqrt 5)/2) = 0.962424",
                "(0.2,0.4) has period 2, hyperbolic, multiplier moduli 6.854 and 0.1459",
            ],
        },
        "lyness" => EntryInfo {
            name: "lyness",
            description: "f(x) = (x2, ..., xn, (x2 + ... + xn + a)/x1) on the open positive orthant",
            params: vec![
                param!("n", Int, "2", "2 <= n <= 5"),
                param!("a", Real, "1", "a > 0"),
                param!("symmetry", Bool, "false", "n >= 3; include the candidate field v1"),
                param!("variant", Int, "0", "0..95; symmetry formula variant, 0 = as transcribed"),
            ],
            structure: "integrals F1 (n>=2), F2 (n>=3, pair product j=1..n-1), F3 (odd n); candidate field v1 (n>=3)",
            structure_status: StructureStatus::Unverified,
            expected: vec![
                "integral invariance: PASS",
                "n=2, a=1: f^5 = id",
                "candidate field v1: outcome recorded, not assumed; FAIL as transcribed, with variant search",
            ],
        },
        "twist" => EntryInfo {
            name: "twist",
            description: "(q,p) -> (q + grad H(p), p) on R^2n",
            params: vec![
                param!("n", Int, "2", "1 <= n <= 8"),
                param!("H", Text, "p1^2/2 + p1*p2", "expression in p1..pn"),
                param!("corrupt", Bool, "false", "set the p1 component of field d/dq1 to 1"),
            ],
            structure: "(n,n): fields d/dq_j, integrals p_j",
            structure_status: StructureStatus::Verified,
            expected: vec!["certify: PASS (n,n)", "corrupt=true: FAIL"],
        },
        other => return Err(Error::UnknownMap(other.to_string())),
    })
}

pub fn list() -> Vec<EntryInfo> {
    NAMES.iter().map(|n| info(n).expect("listed entry")).collect()
}

pub fn build(name: &str, raw: &Params) -> Result<Built> {
    let entry = info(name)?;
    let mut r = Reader::new(raw, &entry.params)?;
    let (map, structure, region, notes) = match entry.name {
        "affine1d" => build_affine(&mut r)?,
        "rigid_rotation" => build_rotation(&mut r)?,
        "warned_circle" => build_warned(&mut r)?,
        "linear" => build_linear(&mut r)?,
        "cat_map" => build_cat()?,
        "lyness" => build_lyness(&mut r)?,
        "twist" => build_twist(&mut r)?,
        _ => unreachable!("info() accepted the name"),
    };
    Ok(Built {
        name: entry.name,
        params: r.resolved,
        map,
        structure,
        region,
        structure_status: entry.structure_status,
        notes,
    })
}

type Parts = (SmoothMap, Option<IntegrabilityStructure>, SamplingRegion, Vec<String>);

fn circle(c: f64) -> Vec<CoordKind> {
    vec![CoordKind::Circle { circumference: c }]
}

fn build_affine(r: &mut Reader) -> Result<Parts> {
    let a = r.real("a")?;
    let b = r.real("b")?;
    let v = affine1d_symmetry(a, b)?;
    let map = SmoothMap::new(format!("affine1d[a={a},b={b}]"), Arc::new(Affine1d { slope: a, offset: b }))?
        .with_inverse(Arc::new(Affine1d {
            slope: 1.0 / a,
            offset: -b / a,
        }))?;
    let s = IntegrabilityStructure::new(1, vec![v], vec![])?;
    Ok((map, Some(s), SamplingRegion::cube(1, -10.0, 10.0)?, vec![]))
}

fn build_rotation(r: &mut Reader) -> Result<Parts> {
    let a = r.real("a")?;
    let map = SmoothMap::new(format!("rigid_rotation[a={a}]"), Arc::new(Affine1d { slope: 1.0, offset: a }))?
        .with_inverse(Arc::new(Affine1d { slope: 1.0, offset: -a }))?
        .with_topology(circle(TAU))?;
    let v = VectorField::new("1", Arc::new(Affine1d { slope: 0.0, offset: 1.0 }))?;
    let s = IntegrabilityStructure::new(1, vec![v], vec![])?;
    Ok((map, Some(s), SamplingRegion::new(vec![0.0], vec![TAU], 0.0)?, vec![]))
}

/// `x -> x + pi/k + eps sin^2(k x)`.
#[derive(Debug, Clone, Copy)]
pub struct WarnedCircle {
    pub k: usize,
    pub eps: f64,
}

impl Formula for WarnedCircle {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        let s = x[0].scale(self.k as f64).sin();
        Ok(vec![x[0].clone() + S::constant(PI / self.k as f64) + (s.clone() * s).scale(self.eps)])
    }
}

fn build_warned(r: &mut Reader) -> Result<Parts> {
    let k = usize_param(r.int("k")?, "k", 1, 1000)?;
    let eps = r.real("eps")?;
    if !(eps > 0.0 && eps < 1.0 / k as f64) {
        return Err(Error::Parameter(format!("eps must satisfy 0 < eps < 1/k = {}, got {eps}", 1.0 / k as f64)));
    }
    let map = SmoothMap::new(format!("warned_circle[k={k},eps={eps}]"), Arc::new(WarnedCircle { k, eps }))?
        .with_topology(circle(TAU))?;
    let notes = vec!["not C^1 integrable although near-identity; dynamical facts only".to_string()];
    Ok((map, None, SamplingRegion::new(vec![0.0], vec![TAU], 0.0)?, notes))
}

fn build_linear(r: &mut Reader) -> Result<Parts> {
    let spec = JordanBlockSpec::parse(&r.string("blocks"))?;
    if spec.dim() > 16 {
        return Err(Error::Parameter(format!("total size {} exceeds 16", spec.dim())));
    }
    let n = spec.dim();
    let map = linear_map(&spec)?;
    let s = linear_commutative_family(&spec)?;
    // away from the coordinate hyperplanes where the shift fields degenerate
    Ok((map, Some(s), SamplingRegion::cube(n, 0.5, 2.0)?, vec![]))
}

pub fn cat_matrix() -> DenseMatrix {
    DenseMatrix::from_rows(2, 2, vec![2.0, 1.0, 1.0, 1.0]).expect("2x2")
}

fn build_cat() -> Result<Parts> {
    let a = cat_matrix();
    let inv = DenseMatrix::from_rows(2, 2, vec![1.0, -1.0, -1.0, 2.0])?;
    let jac = a.clone();
    let map = SmoothMap::new("cat_map", Arc::new(LinearFormula::new(a)))?
        .with_inverse(Arc::new(LinearFormula::new(inv)))?
        .with_topology(vec![CoordKind::Circle { circumference: 1.0 }; 2])?
        .with_analytic_jacobian(move |_| Ok(jac.clone()));
    let notes = vec!["not C^1 integrable: hyperbolic periodic points are dense".to_string()];
    Ok((map, None, SamplingRegion::cube(2, 0.0, 1.0)?, notes))
}

fn build_lyness(r: &mut Reader) -> Result<Parts> {
    let n = usize_param(r.int("n")?, "n", 2, 5)?;
    let a = r.real("a")?;
    let symmetry = r.flag("symmetry")?;
    let variant = usize_param(r.int("variant")?, "variant", 0, 95)?;
    let map = lyness::lyness_map(n, a)?;
    let mut integrals = lyness::lyness_integrals(n, a)?;
    let mut notes = vec![format!(
        "F2 pair product runs over j = 1..{} (selected by invariance testing)",
        lyness::f2_bound(n.max(3))
    )];
    if n == 3 {
        // F3 = F2 - F1 + a - 2 identically, so it adds no independent direction
        integrals.retain(|f| f.name() != "F3");
        notes.push("F3 omitted from the structure at n = 3: F3 = F2 - F1 + a - 2".into());
    }
    let fields = if symmetry {
        let v = SymmetryVariant::enumerate(n.max(3))[variant];
        let field = lyness::lyness_symmetry(n, v)?;
        // one field leaves room for n - 1 integrals
        integrals.truncate(n - 1);
        notes.push(format!("candidate field v1 is unverified; variant {variant}: {}", v.describe()));
        vec![field]
    } else {
        if variant != 0 {
            return Err(Error::Parameter("variant requires symmetry=true".into()));
        }
        vec![]
    };
    let s = IntegrabilityStructure::new(n, fields, integrals)?;
    Ok((map, Some(s), lyness::lyness_region(n)?, notes))
}

/// `(q, p) -> (q + grad H(p), p)`.
struct TwistMap {
    n: usize,
    hamiltonian: Arc<crate::expr::ExprFormula>,
    sign: f64,
}

impl Formula for TwistMap {
    fn dim_in(&self) -> usize {
        2 * self.n
    }
    fn dim_out(&self) -> usize {
        2 * self.n
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
        let n = self.n;
        let (_, grad) = value_and_jacobian_in(self.hamiltonian.as_ref(), &z[n..])?;
        let q = (0..n).map(|i| z[i].clone() + grad[0][i].scale(self.sign));
        Ok(q.chain(z[n..].iter().cloned()).collect())
    }
}

/// Constant field; the momentum part is zero unless corrupted.
struct ConstantField {
    value: Vec<f64>,
}

impl Formula for ConstantField {
    fn dim_in(&self) -> usize {
        self.value.len()
    }
    fn dim_out(&self) -> usize {
        self.value.len()
    }
    fn eval<S: Scalar>(&self, _z: &[S]) -> EvalResult<Vec<S>> {
        Ok(self.value.iter().map(|v| S::constant(*v)).collect())
    }
}

struct Coordinate {
    dim: usize,
    index: usize,
}

impl Formula for Coordinate {
    fn dim_in(&self) -> usize {
        self.dim
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, z: &[S]) -> EvalResult<Vec<S>> {
        Ok(vec![z[self.index].clone()])
    }
}

fn build_twist(r: &mut Reader) -> Result<Parts> {
    let n = usize_param(r.int("n")?, "n", 1, 8)?;
    let h_src = r.string("H");
    let corrupt = r.flag("corrupt")?;
    let h = Arc::new(crate::expr::ExprFormula::parse(&[h_src.as_str()], VarLayout::momenta_only(n))?);
    let map = SmoothMap::new(
        format!("twist[n={n},H={h_src}]"),
        Arc::new(TwistMap {
            n,
            hamiltonian: h.clone(),
            sign: 1.0,
        }),
    )?
    .with_inverse(Arc::new(TwistMap {
        n,
        hamiltonian: h,
        sign: -1.0,
    }))?;
    let mut fields = Vec::with_capacity(n);
    for j in 0..n {
        let mut value = vec![0.0; 2 * n];
        value[j] = 1.0;
        if corrupt && j == 0 {
            value[n] = 1.0;
        }
        fields.push(VectorField::new(format!("d/dq{}", j + 1), Arc::new(ConstantField { value }))?);
    }
    let integrals = (0..n)
        .map(|j| ScalarField::new(format!("p{}", j + 1), Arc::new(Coordinate { dim: 2 * n, index: n + j })))
        .collect::<Result<Vec<_>>>()?;
    let s = IntegrabilityStructure::new(2 * n, fields, integrals)?;
    let notes = if corrupt {
        vec!["field d/dq1 corrupted: its p1 component is 1".to_string()]
    } else {
        vec![]
    };
    Ok((map, Some(s), SamplingRegion::cube(2 * n, -2.0, 2.0)?, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_structure, CertifyOptions, Verdict};
    use crate::system::iterate;

    fn params(pairs: &[(&str, &str)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn certify(name: &str, pairs: &[(&str, &str)], samples: usize) -> Verdict {
        let b = build(name, &params(pairs)).unwrap();
        let region = b.region.clone().with_sample_count(samples);
        certify_structure(&b.map, b.structure.as_ref().unwrap(), &region, &CertifyOptions::default())
            .unwrap()
            .verdict
    }

    #[test]
    fn expected_verdicts() {
        assert_eq!(certify("affine1d", &[], 200), Verdict::Pass);
        assert_eq!(certify("affine1d", &[("a", "-0.5"), ("b", "1")], 200), Verdict::Pass);
        assert_eq!(certify("rigid_rotation", &[], 200), Verdict::Pass);
        assert_eq!(certify("linear", &[("blocks", "2:3")], 200), Verdict::Pass);
        assert_eq!(certify("twist", &[], 200), Verdict::Pass);
        assert_eq!(certify("twist", &[("corrupt", "true")], 200), Verdict::Fail);
        assert_eq!(certify("lyness", &[("n", "3")], 200), Verdict::Pass);
        assert_eq!(certify("lyness", &[("n", "3"), ("symmetry", "true")], 100), Verdict::Fail);
    }

    #[test]
    fn build_examples() {
        let b = build("lyness", &params(&[("n", "2"), ("a", "1")])).unwrap();
        let s = b.structure.unwrap();
        assert_eq!(s.integrals().len(), 1);
        assert_eq!(s.integrals()[0].eval(&[1.0, 1.0]).unwrap(), 12.0);
        assert!(matches!(
            build("warned_circle", &params(&[("k", "1"), ("eps", "1.5")])),
            Err(Error::Parameter(_))
        ));
        let cat = build("cat_map", &Params::new()).unwrap();
        assert!(cat.structure.is_none());
        assert_eq!(cat.map.topology(), &[CoordKind::Circle { circumference: 1.0 }; 2]);
        assert_eq!(cat.structure_label(), "no structure certified");
        assert!(matches!(build("henon", &Params::new()), Err(Error::UnknownMap(_))));
        assert!(matches!(build("cat_map", &params(&[("a", "1")])), Err(Error::Parameter(_))));
        assert!(matches!(build("affine1d", &params(&[("a", "0")])), Err(Error::Parameter(_))));
    }

    #[test]
    fn lyness_three_has_a_dependent_integral() {
        for a in [1.0, 2.0, 3.5] {
            for x in lyness::lyness_region(3).unwrap().sample(50).unwrap() {
                let v = lyness_integral_values(3, a, &x).unwrap();
                let (f1, f2, f3) = (v[0].1, v[1].1, v[2].1);
                assert!((f3 - (f2 - f1 + a - 2.0)).abs() <= 1e-12 * f2.abs());
            }
        }
        let b = build("lyness", &params(&[("n", "3")])).unwrap();
        assert_eq!(b.structure.unwrap().integrals().len(), 2);
    }

    #[test]
    fn pi_valued_parameters() {
        let b = build("rigid_rotation", &params(&[("a", "pi/2")])).unwrap();
        assert_eq!(b.params[0].1, ParamValue::Real(PI / 2.0));
    }

    #[test]
    fn inverses_round_trip() {
        for (name, pairs) in [
            ("affine1d", vec![]),
            ("rigid_rotation", vec![]),
            ("linear", vec![("blocks", "-1.5:2,3:1")]),
            ("cat_map", vec![]),
            ("lyness", vec![("n", "4")]),
            ("twist", vec![]),
        ] {
            let b = build(name, &params(&pairs)).unwrap();
            for x in b.region.sample(100).unwrap() {
                let y = iterate(&b.map, &x, 1).unwrap();
                let back = iterate(&b.map, &y, -1).unwrap();
                assert!(
                    b.map.distance(&back, &x) <= 1e-9 * (1.0 + crate::system::norm(&x)),
                    "{name}"
                );
            }
        }
    }

    #[test]
    fn warned_circle_intervals() {
        let b = build("warned_circle", &params(&[("k", "2"), ("eps", "0.3")])).unwrap();
        let step = PI / 2.0;
        for j in 0..4 {
            let lo = b.map.apply_lift(&[j as f64 * step]).unwrap()[0];
            assert_eq!(lo, (j + 1) as f64 * step);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let y = b.map.apply_lift(&[i as f64 * step / 1000.0]).unwrap()[0];
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn listing_flags_lyness_unverified() {
        let l = list();
        assert_eq!(l.len(), NAMES.len());
        let ly = l.iter().find(|e| e.name == "lyness").unwrap();
        assert_eq!(ly.structure_status, StructureStatus::Unverified);
    }
}
