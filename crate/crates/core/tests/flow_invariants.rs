use fluidchain::flow::ClosedForm;
use fluidchain::{closed_form_flow, integrate_flow, vec2, FieldKind, Proposal, TargetDensity, VectorField};
use proptest::prelude::*;

fn closed_forms() -> [ClosedForm; 2] {
    [ClosedForm::WedgeSuper, ClosedForm::WedgeWeibull { delta: 0.4 }]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn closed_form_norm_decreases(a in 0.01f64..1.56, scale in 0.2f64..20.0, s in 0.05f64..0.95, which in 0usize..2) {
        let cf = closed_forms()[which];
        let x = scale * vec2(a.cos(), a.sin());
        let t_abs = cf.absorption_time(&x, 1.0);
        let (t1, t2) = (s * t_abs * 0.5, s * t_abs);
        let m1 = closed_form_flow(cf, &x, 1.0, t1).unwrap();
        let m2 = closed_form_flow(cf, &x, 1.0, t2).unwrap();
        prop_assert!(m2.norm() < m1.norm() && m1.norm() < x.norm());
        prop_assert_eq!(closed_form_flow(cf, &x, 1.0, 1.01 * t_abs).unwrap(), vec2(0.0, 0.0));
    }

    #[test]
    fn closed_form_semigroup(a in 0.01f64..1.56, scale in 0.2f64..20.0, s1 in 0.0f64..0.45, s2 in 0.0f64..0.45, which in 0usize..2) {
        let cf = closed_forms()[which];
        let x = scale * vec2(a.cos(), a.sin());
        let t_abs = cf.absorption_time(&x, 1.0);
        let (t1, t2) = (s1 * t_abs, s2 * t_abs);
        let mid = closed_form_flow(cf, &x, 1.0, t1).unwrap();
        let two = closed_form_flow(cf, &mid, 1.0, t2).unwrap();
        let one = closed_form_flow(cf, &x, 1.0, t1 + t2).unwrap();
        prop_assert!((two - one).norm() <= 1e-10 * x.norm(), "{:?} vs {:?}", two, one);
    }
}

#[test]
fn integrated_flow_semigroup() {
    for key in ["wedge-super", "gauss-mixture", "wedge-weibull", "weibull-mixture"] {
        let field = VectorField::new(TargetDensity::with_defaults(key).unwrap(), Proposal::gaussian(1.0).unwrap(), FieldKind::H).unwrap();
        let x = 3.0 * vec2(0.6f64.cos(), 0.6f64.sin());
        let dt = 1e-3;
        let whole = integrate_flow(&field, &x, dt, 0.6).unwrap();
        let first = integrate_flow(&field, &x, dt, 0.25).unwrap();
        let mid = *first.points.last().unwrap();
        let second = integrate_flow(&field, &mid, dt, 0.35).unwrap();
        assert!(whole.absorbed_at.is_none(), "{key}");
        let (a, b) = (whole.eval(0.6).unwrap(), second.eval(0.35).unwrap());
        assert!((a - b).norm() <= 1e-8, "{key}: {a:?} vs {b:?}");
    }
}
