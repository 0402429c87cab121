use fluidchain::certify::stop_at_tau;
use fluidchain::{ergodic_exponents, vec2, RateFunction, Regime, Vec2};
use proptest::prelude::*;

fn rate_functions() -> Vec<RateFunction> {
    vec![
        RateFunction::polynomial(0.3).unwrap(),
        RateFunction::polynomial(0.5).unwrap(),
        RateFunction::polynomial(0.8).unwrap(),
        RateFunction::custom(vec![1.0, 2.0, 4.0, 8.0], vec![1.0, 1.5, 2.0, 2.25]).unwrap(),
    ]
}

#[test]
fn rate_sequences_are_log_concave() {
    for f in rate_functions() {
        let r = f.rate_sequence(1001).unwrap();
        assert_eq!(r[0], 1.0);
        let inc: Vec<f64> = r.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
        for (n, w) in inc.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-12, "{:?} at n={n}: {} > {}", f.phi_spec(), w[1], w[0]);
        }
    }
}

#[test]
fn rate_sequences_are_subgeometric() {
    for f in rate_functions() {
        let r = f.rate_sequence(20_001).unwrap();
        let g: Vec<f64> = (1..r.len()).map(|n| r[n].ln() / n as f64).collect();
        for (n, w) in g.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-12, "{:?} at n={}", f.phi_spec(), n + 1);
        }
        assert!(g[g.len() - 1] < 2e-3, "{:?}: {}", f.phi_spec(), g[g.len() - 1]);
        assert!(g[g.len() - 1] < g[99] / 5.0);
    }
}

#[test]
fn superexponential_regime_is_general_with_zero_beta() {
    for p in [1.0, 1.5, 2.0, 3.0, 4.5, 8.0] {
        for k in 0..=10 {
            let u = 1.0 + (p - 1.0) * k as f64 / 10.0;
            let a = ergodic_exponents(p, 0.0, u, Regime::General).unwrap();
            let b = ergodic_exponents(p, 0.0, u, Regime::Superexp).unwrap();
            assert_eq!(a, b, "p={p} u={u}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn stopped_runs_end_at_sigma_or_budget(
        norms in prop::collection::vec(0.01f64..3.0, 1..60),
        rho in 0.1f64..0.9,
        budget in 0usize..80,
    ) {
        let states: Vec<Vec2> = std::iter::once(vec2(1.0, 0.0))
            .chain(norms.iter().map(|&n| vec2(0.0, n)))
            .collect();
        let sigma = states.iter().position(|s| s.norm() < rho);
        let expected = match sigma {
            Some(s) if s <= budget => Some((s, false)),
            _ if budget < states.len() => Some((budget, true)),
            _ => None,
        };
        match (stop_at_tau(states.clone(), rho, budget, 2.0), expected) {
            (Ok(run), Some((tau, censored))) => {
                prop_assert_eq!(run.tau, tau);
                prop_assert_eq!(run.censored, censored);
                prop_assert_eq!(run.end_moment, states[tau].norm().powf(2.0));
                let pm: f64 = states[..tau].iter().map(|s| s.norm().powf(2.0)).sum();
                prop_assert!((run.path_moment - pm).abs() <= 1e-12 * pm.max(1.0));
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "got {:?}, want {:?}", got, want),
        }
    }
}
