use std::f64::consts::PI;

use fluidchain::{vec2, Target, TargetDensity, Vec2};
use proptest::prelude::*;

fn builtins() -> Vec<TargetDensity> {
    ["wedge-super", "gauss-mixture", "wedge-weibull", "weibull-mixture"]
        .iter()
        .map(|k| TargetDensity::with_defaults(k).unwrap())
        .collect()
}

fn central_difference(d: &TargetDensity, x: &Vec2) -> Vec2 {
    let h = 1e-6 * (1.0 + x.norm());
    let f = |p: Vec2| d.log_density(&p).unwrap();
    vec2(
        (f(x + vec2(h, 0.0)) - f(x - vec2(h, 0.0))) / (2.0 * h),
        (f(x + vec2(0.0, h)) - f(x - vec2(0.0, h))) / (2.0 * h),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gradient_matches_central_differences(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, which in 0usize..4) {
        let x = vec2(x1, x2);
        prop_assume!(x.norm() > 0.05);
        let d = builtins()[which];
        let g = d.grad_log(&x).unwrap();
        let fd = central_difference(&d, &x);
        prop_assert!((g - fd).norm() <= 1e-5 * (1.0 + g.norm()), "{:?} at {:?}: {:?} vs {:?}", d, x, g, fd);
    }

    #[test]
    fn sign_flips_leave_density_unchanged(x1 in -50.0f64..50.0, x2 in -50.0f64..50.0) {
        let x = vec2(x1, x2);
        prop_assume!(x.norm() > 0.0);
        for d in builtins() {
            let v = d.log_density(&x).unwrap();
            for (s1, s2) in [(-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                prop_assert_eq!(d.log_density(&vec2(s1 * x1, s2 * x2)).unwrap(), v);
            }
        }
    }
}

#[test]
fn radial_inner_product_along_rays() {
    for key in ["wedge-super", "wedge-weibull"] {
        let d = TargetDensity::with_defaults(key).unwrap();
        for k in 0..32 {
            let a = 2.0 * PI * k as f64 / 32.0;
            // Exact zeros on the axis rays; x1⁸x2² makes the gradient huge just off them.
            let snap = |c: f64| if c.abs() < 1e-12 { 0.0 } else { c };
            let n = vec2(snap(a.cos()), snap(a.sin()));
            if key == "wedge-super" {
                let ip: Vec<f64> = [10.0f64, 50.0, 100.0].iter().map(|r| d.grad_log(&(*r * n)).unwrap().dot(&n)).collect();
                assert!(ip[0] > ip[1] && ip[1] > ip[2] && ip[2] < -100.0, "{key} ray {k}: {ip:?}");
            } else {
                // |ℓ| first grows while the log factor still cancels the power term.
                let norms: Vec<f64> = [1e2f64, 1e3, 1e4, 1e5, 1e6].iter().map(|r| d.grad_log(&(*r * n)).unwrap().norm()).collect();
                assert!(norms.windows(2).all(|w| w[1] < w[0]), "{key} ray {k}: {norms:?}");
                assert!(norms[4] < 0.06, "{key} ray {k}: {norms:?}");
            }
        }
    }
}

#[test]
fn ell_infinity_is_scale_invariant() {
    for d in builtins() {
        let mut checked = 0;
        for k in 0..64 {
            let a = 2.0 * PI * (k as f64 + 0.37) / 64.0;
            let x = 3.0 * vec2(a.cos(), a.sin());
            if !d.tail_params().in_cone(&x) {
                continue;
            }
            let base = d.ell_infinity(&x).unwrap();
            for lambda in [2.0, 10.0] {
                let scaled = d.ell_infinity(&(lambda * x)).unwrap();
                assert!((scaled - base).norm() <= 1e-12 * base.norm(), "{d:?} at {x:?}");
            }
            checked += 1;
        }
        assert!(checked >= 60);
    }
}
