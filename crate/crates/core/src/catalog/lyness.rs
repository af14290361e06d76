//! The n-dimensional Lyness map on the open positive orthant, its first
//! integrals, and the candidate symmetry field with its variant search.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, EvalResult, Result};
use crate::numerics::{product, sum, Formula, Scalar};
use crate::system::{norm, Guard, SamplingRegion, ScalarField, SmoothMap, VectorField};

/// Domain guard shared by the map and its sampling region.
pub const POSITIVITY_FLOOR: f64 = 1e-3;

pub fn positive_guard() -> Guard {
    Arc::new(|x: &[f64]| x.iter().all(|v| *v > POSITIVITY_FLOOR))
}

fn check(n: usize, a: f64) -> Result<()> {
    if !(2..=5).contains(&n) {
        return Err(Error::Parameter(format!("lyness needs 2 <= n <= 5, got {n}")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("lyness needs a > 0, got {a}")));
    }
    Ok(())
}

/// `x -> (x2, ..., xn, (x2 + ... + xn + a) / x1)`.
#[derive(Debug, Clone, Copy)]
pub struct LynessMap {
    pub n: usize,
    pub a: f64,
}

impl Formula for LynessMap {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        let last = (sum(x[1..].iter().cloned()) + S::constant(self.a)).try_div(&x[0])?;
        Ok(x[1..].iter().cloned().chain(std::iter::once(last)).collect())
    }
}

/// `x -> ((x1 + ... + x_{n-1} + a) / xn, x1, ..., x_{n-1})`.
#[derive(Debug, Clone, Copy)]
pub struct LynessInverse {
    pub n: usize,
    pub a: f64,
}

impl Formula for LynessInverse {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        let n = self.n;
        let first = (sum(x[..n - 1].iter().cloned()) + S::constant(self.a)).try_div(&x[n - 1])?;
        Ok(std::iter::once(first).chain(x[..n - 1].iter().cloned()).collect())
    }
}

pub fn lyness_map(n: usize, a: f64) -> Result<SmoothMap> {
    check(n, a)?;
    Ok(SmoothMap::new(format!("lyness[n={n},a={a}]"), Arc::new(LynessMap { n, a }))?
        .with_inverse(Arc::new(LynessInverse { n, a }))?
        .with_guard(positive_guard()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LynessIntegralKind {
    F1,
    /// Product over consecutive pairs `j = 1..=bound`.
    F2 { bound: usize },
    F3,
}

/// Upper bound of the pair product in `F2`, selected by invariance testing.
pub fn f2_bound(n: usize) -> usize {
    n - 1
}

#[derive(Debug, Clone, Copy)]
pub struct LynessIntegral {
    pub n: usize,
    pub a: f64,
    pub kind: LynessIntegralKind,
}

fn pair_product<S: Scalar>(x: &[S], range: impl Iterator<Item = usize>) -> S {
    // 1-based j; factor x_j + x_{j+1} + 1
    product(range.map(|j| x[j - 1].clone() + x[j].clone() + S::constant(1.0)))
}

impl Formula for LynessIntegral {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        let n = self.n;
        let one = || S::constant(1.0);
        let total = sum(x.iter().cloned()) + S::constant(self.a);
        let denom = product(x.iter().cloned());
        let numer = match self.kind {
            LynessIntegralKind::F1 => total * product(x.iter().map(|v| v.clone() + one())),
            LynessIntegralKind::F2 { bound } => {
                (total + x[0].clone() * x[n - 1].clone()) * pair_product(x, 1..=bound)
            }
            LynessIntegralKind::F3 => {
                let k = (n - 1) / 2;
                let odd = product((0..=k).map(|j| x[2 * j].clone() * (x[2 * j].clone() + one())));
                let even = product((1..=k).map(|j| x[2 * j - 1].clone() * (x[2 * j - 1].clone() + one())));
                odd + total * even
            }
        };
        Ok(vec![numer.try_div(&denom)?])
    }
}

/// Applicable integrals: `F1` always, `F2` for `n >= 3`, `F3` for odd `n >= 3`.
pub fn lyness_integrals(n: usize, a: f64) -> Result<Vec<ScalarField>> {
    check(n, a)?;
    let mut kinds = vec![("F1", LynessIntegralKind::F1)];
    if n >= 3 {
        kinds.push(("F2", LynessIntegralKind::F2 { bound: f2_bound(n) }));
    }
    if n >= 3 && n % 2 == 1 {
        kinds.push(("F3", LynessIntegralKind::F3));
    }
    kinds
        .into_iter()
        .map(|(name, kind)| ScalarField::new(name, Arc::new(LynessIntegral { n, a, kind })))
        .collect()
}

/// Values of every applicable integral at `x`, in the order F1, F2, F3.
pub fn lyness_integral_values(n: usize, a: f64, x: &[f64]) -> Result<Vec<(String, f64)>> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if !x.iter().all(|v| *v > 0.0) {
        return Err(Error::Parameter("integrals are defined on the positive orthant".into()));
    }
    lyness_integrals(n, a)?
        .iter()
        .map(|f| Ok((f.name().to_string(), f.eval(x)?)))
        .collect()
}

/// One reading of the candidate symmetry formulas.
///
/// `signs[0]` multiplies the `x2 xn` term of the first component,
/// `signs[1]` the `x1 x_{n-1}` term of the last, `signs[2]` the `x1 xn`
/// term of the middle components and `signs[3]` their difference
/// `x_{l-1} - x_{l+1}`. The bounds are the summation limits of the three
/// linear sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryVariant {
    pub signs: [f64; 4],
    pub first_sum_upper: usize,
    pub last_sum_lower: usize,
    pub middle_sum_upper: usize,
}

impl SymmetryVariant {
    /// The formulas as printed in the source.
    pub fn transcribed(n: usize) -> Self {
        SymmetryVariant {
            signs: [-1.0, -1.0, 1.0, 1.0],
            first_sum_upper: n - 1,
            last_sum_lower: 2,
            middle_sum_upper: n - 1,
        }
    }

    /// Index 0 is the transcription; the rest flip signs and move
    /// summation bounds. 16 sign patterns times 6 bound choices.
    pub fn enumerate(n: usize) -> Vec<SymmetryVariant> {
        let bounds = [
            (n - 1, 2, n - 1),
            (n, 2, n - 1),
            (n - 1, 1, n - 1),
            (n - 1, 2, n),
            (n, 2, n),
            (n, 1, n),
        ];
        let base = Self::transcribed(n).signs;
        let mut out = Vec::with_capacity(96);
        for &(u1, l2, u3) in &bounds {
            for mask in 0..16u32 {
                let mut signs = base;
                for (i, s) in signs.iter_mut().enumerate() {
                    if mask & (1 << i) != 0 {
                        *s = -*s;
                    }
                }
                out.push(SymmetryVariant {
                    signs,
                    first_sum_upper: u1,
                    last_sum_lower: l2,
                    middle_sum_upper: u3,
                });
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        let s = |v: f64| if v > 0.0 { '+' } else { '-' };
        format!(
            "signs=({}{}{}{}) sums: v11 to {}, v1n from {}, v1l to {}",
            s(self.signs[0]),
            s(self.signs[1]),
            s(self.signs[2]),
            s(self.signs[3]),
            self.first_sum_upper,
            self.last_sum_lower,
            self.middle_sum_upper
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LynessSymmetry {
    pub n: usize,
    pub variant: SymmetryVariant,
}

impl Formula for LynessSymmetry {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.n
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        let n = self.n;
        let v = &self.variant;
        let one = || S::constant(1.0);
        // 1-based helpers
        let xi = |j: usize| x[j - 1].clone();
        let lin = |lo: usize, hi: usize| sum((lo..=hi).map(xi));
        let denom = product(x.iter().cloned());
        let mut out = Vec::with_capacity(n);
        let first = (xi(1) + one())
            * (lin(1, v.first_sum_upper) + (xi(2) * xi(n)).scale(v.signs[0]))
            * pair_product(x, 2..n);
        out.push(first.try_div(&denom)?);
        for l in 2..n {
            let pairs = pair_product(x, (1..n).filter(|&j| j != l - 1 && j != l));
            let middle = (xi(l) + one())
                * (lin(1, v.middle_sum_upper) + (xi(1) * xi(n)).scale(v.signs[2]))
                * (xi(l - 1) - xi(l + 1)).scale(v.signs[3])
                * pairs;
            out.push(middle.try_div(&denom)?);
        }
        let last = (xi(n) + one())
            * (lin(v.last_sum_lower, n - 1) + (xi(1) * xi(n - 1)).scale(v.signs[1]))
            * pair_product(x, 1..n - 1);
        out.push(last.try_div(&denom)?);
        Ok(out)
    }
}

pub fn lyness_symmetry(n: usize, variant: SymmetryVariant) -> Result<VectorField> {
    if n < 3 {
        return Err(Error::Parameter(
            "the candidate symmetry formulas need n >= 3".into(),
        ));
    }
    VectorField::new("v1", Arc::new(LynessSymmetry { n, variant }))
}

pub fn lyness_region(n: usize) -> Result<SamplingRegion> {
    Ok(SamplingRegion::cube(n, 0.1, 10.0)?.with_guard(positive_guard()))
}

/// The positive fixed point: every coordinate solves `x^2 = (n-1) x + a`.
pub fn lyness_fixed_point(n: usize, a: f64) -> Result<Vec<f64>> {
    check(n, a)?;
    let b = (n - 1) as f64;
    Ok(vec![(b + (b * b + 4.0 * a).sqrt()) / 2.0; n])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantScore {
    pub index: usize,
    pub variant: String,
    /// Max over the points of `|Df X - X o f| / (1 + max norms)`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSearchReport {
    pub n: usize,
    pub a: f64,
    pub points: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub variants_tested: usize,
    pub transcribed: VariantScore,
    /// Lowest scores first.
    pub best: Vec<VariantScore>,
    pub passing: Vec<VariantScore>,
}

fn commutation_score(f: &SmoothMap, field: &VectorField, points: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for x in points {
        let scored = (|| -> Result<f64> {
            let fx = f.apply(x)?;
            let v = field.eval(x)?;
            let vf = field.eval(&fx)?;
            let push = f.jacobian(x)?.matvec(&v)?;
            let r: Vec<f64> = push.iter().zip(&vf).map(|(p, q)| p - q).collect();
            let scale = 1.0 + [norm(x), norm(&fx), norm(&v), norm(&vf)].into_iter().fold(0.0, f64::max);
            Ok(norm(&r) / scale)
        })();
        // a pole inside the box disqualifies the variant
        worst = worst.max(scored.unwrap_or(f64::INFINITY));
    }
    worst
}

/// Scores every variant by its worst infinitesimal commutation residual.
pub fn variant_search(n: usize, a: f64, points: usize, seed: u64, tolerance: f64) -> Result<VariantSearchReport> {
    let f = lyness_map(n, a)?;
    let sample = lyness_region(n)?.with_seed(seed).sample(points)?;
    let variants = SymmetryVariant::enumerate(n);
    let scores: Vec<VariantScore> = variants
        .par_iter()
        .enumerate()
        .map(|(index, v)| {
            let field = lyness_symmetry(n, *v)?;
            Ok(VariantScore {
                index,
                variant: v.describe(),
                score: commutation_score(&f, &field, &sample),
            })
        })
        .collect::<Result<_>>()?;
    let transcribed = scores[0].clone();
    let passing = scores.iter().filter(|s| s.score <= tolerance).cloned().collect();
    let mut ranked = scores.clone();
    ranked.sort_by(|x, y| x.score.total_cmp(&y.score).then(x.index.cmp(&y.index)));
    ranked.truncate(5);
    Ok(VariantSearchReport {
        n,
        a,
        points,
        seed,
        tolerance,
        variants_tested: scores.len(),
        transcribed,
        best: ranked,
        passing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::map_invariance_residual;
    use crate::system::iterate;

    /// Independent evaluation of the integrals straight from their
    /// definitions, without the shared helpers.
    fn oracle(n: usize, a: f64, x: &[f64]) -> Vec<f64> {
        let s: f64 = x.iter().sum();
        let p: f64 = x.iter().product();
        let mut out = vec![(s + a) * x.iter().map(|v| v + 1.0).product::<f64>() / p];
        if n >= 3 {
            let mut pairs = 1.0;
            for j in 0..n - 1 {
                pairs *= x[j] + x[j + 1] + 1.0;
            }
            out.push((s + x[0] * x[n - 1] + a) * pairs / p);
        }
        if n % 2 == 1 && n >= 3 {
            let mut odd = 1.0;
            let mut even = 1.0;
            for (i, v) in x.iter().enumerate() {
                if i % 2 == 0 {
                    odd *= v * (v + 1.0);
                } else {
                    even *= v * (v + 1.0);
                }
            }
            out.push((odd + (s + a) * even) / p);
        }
        out
    }

    #[test]
    fn hand_values() {
        let v = lyness_integral_values(3, 1.0, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(v[0], ("F1".into(), 32.0));
        assert_eq!(v[2], ("F3".into(), 12.0));
        let v = lyness_integral_values(3, 1.0, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v[1].1, 40.0);
        let v = lyness_integral_values(3, 1.0, &[2.0, 3.0, 6.0]).unwrap();
        assert_eq!(v[1].1, 40.0);
        let v = lyness_integral_values(2, 1.0, &[1.0, 2.0]).unwrap();
        assert_eq!(v, vec![("F1".into(), 12.0)]);
        assert!(lyness_integral_values(2, 1.0, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn integrals_match_oracle_and_are_invariant() {
        for n in 2..=5 {
            for a in [1.0, 2.0] {
                let f = lyness_map(n, a).unwrap();
                let fs = lyness_integrals(n, a).unwrap();
                for x in lyness_region(n).unwrap().sample(100).unwrap() {
                    let expect = oracle(n, a, &x);
                    for (g, e) in fs.iter().zip(&expect) {
                        let v = g.eval(&x).unwrap();
                        assert!((v - e).abs() <= 1e-12 * e.abs(), "n={n} {}", g.name());
                        let r = map_invariance_residual(g, &f, &x).unwrap();
                        assert!(r.abs() <= 1e-10 * (1.0 + e.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn five_periodicity_in_the_plane() {
        let f = lyness_map(2, 1.0).unwrap();
        for x in lyness_region(2).unwrap().sample(100).unwrap() {
            let y = iterate(&f, &x, 5).unwrap();
            assert!(f.distance(&x, &y) <= 1e-9 * norm(&x));
        }
    }

    #[test]
    fn fixed_point_is_fixed() {
        for (n, a) in [(2, 2.0), (3, 1.0), (5, 0.5)] {
            let x = lyness_fixed_point(n, a).unwrap();
            let y = lyness_map(n, a).unwrap().apply(&x).unwrap();
            assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-14));
        }
        assert_eq!(lyness_fixed_point(2, 2.0).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn transcribed_symmetry_fails_at_unit_point() {
        let f = lyness_map(3, 1.0).unwrap();
        let v = lyness_symmetry(3, SymmetryVariant::transcribed(3)).unwrap();
        let r = crate::certify::infinitesimal_commutation_residual(&f, &v, &[1.0, 1.0, 1.0]).unwrap();
        assert!(norm(&r) > 1.0, "{r:?}");
        assert!(lyness_symmetry(2, SymmetryVariant::transcribed(2)).is_err());
    }

    #[test]
    fn variant_enumeration() {
        let vs = SymmetryVariant::enumerate(4);
        assert_eq!(vs.len(), 96);
        assert_eq!(vs[0], SymmetryVariant::transcribed(4));
        for (i, a) in vs.iter().enumerate() {
            assert!(vs[i + 1..].iter().all(|b| b != a));
        }
    }

    #[test]
    fn parameter_checks() {
        assert!(lyness_map(1, 1.0).is_err());
        assert!(lyness_map(6, 1.0).is_err());
        assert!(lyness_map(3, 0.0).is_err());
    }
}
