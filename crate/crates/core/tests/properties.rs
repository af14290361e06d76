use std::sync::Arc;

use dynint_core::catalog::{self, Params};
use dynint_core::certify::{certify_structure, lie_bracket_residual, poisson_bracket, CertifyOptions, Verdict};
use dynint_core::expr::{ExprFormula, VarLayout};
use dynint_core::numerics::{jacobian, jacobian_fd, numerical_rank, DenseMatrix, IntegratorConfig};
use dynint_core::system::{always_safe, iterate, ScalarField, VectorField};
use proptest::prelude::*;

fn field(components: &[String], n: usize) -> VectorField {
    VectorField::new("X", Arc::new(ExprFormula::parse(components, VarLayout::positions(n)).unwrap())).unwrap()
}

fn phase_fn(src: &str, n: usize) -> ScalarField {
    ScalarField::new(src, Arc::new(ExprFormula::parse(&[src], VarLayout::phase_space(n)).unwrap())).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn coef() -> impl Strategy<Value = f64> {
    (-2.0..2.0f64).prop_map(|c| (c * 1000.0).round() / 1000.0)
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_jacobian_matches_finite_differences(c in prop::collection::vec(coef(), 3), x in point(2)) {
        let f = ExprFormula::parse(
            &[
                format!("{}*x1^2*x2 + sin({}*x1)", c[0], c[1]),
                format!("exp({}*x2) * cos(x1) + x1*x2", c[2]),
            ],
            VarLayout::positions(2),
        )
        .unwrap();
        let exact = jacobian(&f, &x).unwrap();
        let approx = jacobian_fd(&f, &x).unwrap();
        prop_assert!(close(exact.data(), approx.data(), 1e-6));
    }

    #[test]
    fn flow_is_a_group_action(c in coef(), x in point(2), t in -1.0..1.0f64, s in -1.0..1.0f64) {
        let v = field(&["x2".into(), format!("-sin(x1) + {c}*sin(x2)")], 2);
        let cfg = IntegratorConfig::default();
        let guard = always_safe();
        let composed = v.flow(&v.flow(&x, t, &cfg, &guard).unwrap(), s, &cfg, &guard).unwrap();
        let direct = v.flow(&x, t + s, &cfg, &guard).unwrap();
        prop_assert!(close(&composed, &direct, 1e-7));
        let back = v.flow(&v.flow(&x, t, &cfg, &guard).unwrap(), -t, &cfg, &guard).unwrap();
        prop_assert!(close(&back, &x, 1e-7));
    }

    #[test]
    fn rank_ignores_column_permutation_and_scaling(
        cols in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), 3),
        scale in prop::collection::vec(0.1..10.0f64, 3),
        dependent in any::<bool>(),
    ) {
        let mut cols = cols;
        if dependent {
            cols[2] = cols[0].iter().zip(&cols[1]).map(|(a, b)| 2.0 * a - b).collect();
        }
        let base = numerical_rank(&DenseMatrix::from_columns(&cols).unwrap(), 1e-8).unwrap();
        let moved: Vec<Vec<f64>> = [2, 0, 1]
            .iter()
            .map(|&j| cols[j].iter().map(|v| v * scale[j]).collect())
            .collect();
        let other = numerical_rank(&DenseMatrix::from_columns(&moved).unwrap(), 1e-8).unwrap();
        prop_assert_eq!(base.rank, other.rank);
        if dependent {
            prop_assert!(base.rank <= 2);
        }
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(c in prop::collection::vec(coef(), 4), x in point(2)) {
        let a = c[3];
        let x_f = field(&[format!("{}*x1*x2", c[0]), "sin(x1)".into()], 2);
        let y_f = field(&["x2^2".into(), format!("{}*x1 + x2", c[1])], 2);
        let z_f = field(&[format!("cos({}*x2)", c[2]), "x1^3".into()], 2);
        let comb = field(
            &[format!("x2^2 + {a}*cos({}*x2)", c[2]), format!("{}*x1 + x2 + {a}*x1^3", c[1])],
            2,
        );
        let xy = lie_bracket_residual(&x_f, &y_f, &x).unwrap();
        let yx = lie_bracket_residual(&y_f, &x_f, &x).unwrap();
        prop_assert!(close(&xy, &yx.iter().map(|v| -v).collect::<Vec<_>>(), 1e-12));
        let xz = lie_bracket_residual(&x_f, &z_f, &x).unwrap();
        let lhs = lie_bracket_residual(&x_f, &comb, &x).unwrap();
        let rhs: Vec<f64> = xy.iter().zip(&xz).map(|(p, q)| p + a * q).collect();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }

    #[test]
    fn poisson_bracket_is_antisymmetric_and_leibniz(c in prop::collection::vec(coef(), 3), z in point(4)) {
        let f = phase_fn(&format!("p1*x2 + {}*x1^2", c[0]), 2);
        let g = phase_fn(&format!("sin(x1)*p2 + {}*p1^2", c[1]), 2);
        let h = phase_fn(&format!("x2*p2 + {}", c[2]), 2);
        let gh_src = format!("(sin(x1)*p2 + {}*p1^2) * (x2*p2 + {})", c[1], c[2]);
        let gh = phase_fn(&gh_src, 2);
        let fg = poisson_bracket(&f, &g, &z).unwrap();
        prop_assert!((fg + poisson_bracket(&g, &f, &z).unwrap()).abs() <= 1e-12 * (1.0 + fg.abs()));
        let lhs = poisson_bracket(&f, &gh, &z).unwrap();
        let rhs = fg * h.eval(&z).unwrap() + g.eval(&z).unwrap() * poisson_bracket(&f, &h, &z).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn iterates_compose(a in -3i64..4, b in -3i64..4, x in point(4)) {
        let twist = catalog::build("twist", &Params::new()).unwrap();
        let split = iterate(&twist.map, &iterate(&twist.map, &x, b).unwrap(), a).unwrap();
        let joint = iterate(&twist.map, &x, a + b).unwrap();
        prop_assert!(close(&split, &joint, 1e-12));

        let lyness = catalog::build("lyness", &Params::from([("n".to_string(), "2".to_string())])).unwrap();
        let y: Vec<f64> = x[..2].iter().map(|v| v.abs() + 0.5).collect();
        let split = iterate(&lyness.map, &iterate(&lyness.map, &y, b).unwrap(), a).unwrap();
        let joint = iterate(&lyness.map, &y, a + b).unwrap();
        prop_assert!(close(&split, &joint, 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn verdicts_do_not_depend_on_seed(seed in any::<u64>()) {
        let opts = CertifyOptions { flow_times: vec![0.5], ..CertifyOptions::default() };
        for (corrupt, expected) in [("false", Verdict::Pass), ("true", Verdict::Fail)] {
            let b = catalog::build("twist", &Params::from([("corrupt".to_string(), corrupt.to_string())])).unwrap();
            let region = b.region.clone().with_seed(seed).with_sample_count(60);
            let report = certify_structure(&b.map, b.structure.as_ref().unwrap(), &region, &opts).unwrap();
            prop_assert_eq!(report.verdict, expected);
        }
    }
}
