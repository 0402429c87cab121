use fluidchain::chain::max_partial_sum_stat;
use fluidchain::rng::stream;
use fluidchain::stats::median;
use fluidchain::{delta_infinity, simulate, vec2, ChainConfig, Proposal, TargetDensity};
use rand::RngCore;

#[test]
fn rejected_moves_are_exactly_the_repeated_states() {
    for key in ["wedge-super", "gauss-mixture", "wedge-weibull", "weibull-mixture"] {
        let d = TargetDensity::with_defaults(key).unwrap();
        let traj = simulate(&ChainConfig::new(d, Proposal::gaussian(1.0).unwrap(), vec2(3.0, 2.0), 5, 20_000)).unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.states[k + 1] == traj.states[k], !traj.accepted[k], "{key} step {k}");
        }
    }
}

#[test]
fn neighbouring_seeds_share_no_draws() {
    for s in [0u64, 1, 41, u64::MAX - 1] {
        let mut a = stream(s, 0);
        let mut b = stream(s + 1, 0);
        let da: Vec<u64> = (0..10).map(|_| a.next_u64()).collect();
        let db: Vec<u64> = (0..10).map(|_| b.next_u64()).collect();
        assert!(da.iter().all(|v| !db.contains(v)));
    }
    let cfg = |seed| ChainConfig::new(TargetDensity::WedgeSuper, Proposal::gaussian(1.0).unwrap(), vec2(1.0, 1.0), seed, 10);
    let (t0, t1) = (simulate(&cfg(7)).unwrap(), simulate(&cfg(8)).unwrap());
    assert!(t0.states[1..].iter().zip(&t1.states[1..]).all(|(a, b)| a != b));
}

#[test]
fn martingale_increment_quantile_is_stable_across_blocks() {
    let d = TargetDensity::WedgeSuper;
    let p = Proposal::gaussian(1.0).unwrap();
    let q: Vec<f64> = (0..3)
        .map(|block| {
            let traj = simulate(&ChainConfig::new(d, p.clone(), vec2(0.5, 0.5), 900 + block, 100_000)).unwrap();
            let mut eps: Vec<f64> = traj
                .states
                .windows(2)
                .map(|w| (w[1] - w[0] - delta_infinity(&d, &p, &w[0]).unwrap()).norm())
                .collect();
            eps.sort_by(f64::total_cmp);
            eps[(0.999 * eps.len() as f64) as usize]
        })
        .collect();
    let mean = q.iter().sum::<f64>() / 3.0;
    let spread = (q.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - q.iter().cloned().fold(f64::INFINITY, f64::min)) / mean;
    assert!(q.iter().all(|v| v.is_finite()));
    assert!(spread <= 0.2, "{q:?}");
}

#[test]
fn partial_sum_maximum_grows_like_sqrt_n() {
    let d = TargetDensity::WedgeSuper;
    let p = Proposal::gaussian(1.0).unwrap();
    let x = vec2(1f64.cos(), 1f64.sin());
    let scaled: Vec<f64> = [100.0f64, 400.0, 1600.0]
        .iter()
        .map(|&r| {
            let m: Vec<f64> = (0..50)
                .map(|rep| {
                    let traj = simulate(&ChainConfig::new(d, p.clone(), r * x, rep, r as usize)).unwrap();
                    let stat = max_partial_sum_stat(&traj, |s| delta_infinity(&d, &p, s)).unwrap();
                    *stat.last().unwrap()
                })
                .collect();
            median(&m) / r.sqrt()
        })
        .collect();
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi / lo <= 3.0, "{scaled:?}");
}
