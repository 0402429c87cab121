//! The symmetric random-walk Metropolis kernel and chain simulation.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::density::{Target, TargetDensity};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::proposal::Proposal;
use crate::rng::{stream, Stream};

/// Hard cap on the length of a single simulated chain.
pub const DEFAULT_STEP_CAP: usize = 50_000_000;

/// Result of one kernel application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: Vec2,
    pub accepted: bool,
    /// The proposal landed where the log density is not finite and was rejected.
    pub non_finite: bool,
}

/// One SRWM transition from `x`: propose `x + y` with `y ~ q` and accept iff
/// `ln u < ln π(x + y) - ln π(x)`.
pub fn srwm_step<T, R>(target: &T, proposal: &Proposal, x: &Vec2, rng: &mut R) -> Result<Step>
where
    T: Target + ?Sized,
    R: Rng + ?Sized,
{
    let log_pi = target.log_density(x)?;
    let (step, _) = step_from(target, proposal, x, log_pi, rng);
    Ok(step)
}

/// Kernel step with the current log density supplied by the caller. Returns
/// the step and the log density at the new state.
#[inline]
pub(crate) fn step_from<T, R>(
    target: &T,
    proposal: &Proposal,
    x: &Vec2,
    log_pi: f64,
    rng: &mut R,
) -> (Step, f64)
where
    T: Target + ?Sized,
    R: Rng + ?Sized,
{
    let y = proposal.sample_increment(rng);
    let u: f64 = rng.random();
    let candidate = x + y;
    match target.log_density(&candidate) {
        Ok(lp) => {
            if u.ln() < lp - log_pi {
                (
                    Step {
                        state: candidate,
                        accepted: true,
                        non_finite: false,
                    },
                    lp,
                )
            } else {
                (
                    Step {
                        state: *x,
                        accepted: false,
                        non_finite: false,
                    },
                    log_pi,
                )
            }
        }
        Err(_) => (
            Step {
                state: *x,
                accepted: false,
                non_finite: true,
            },
            log_pi,
        ),
    }
}

/// A running chain that owns its random stream.
pub struct Chain<'a, T: Target + ?Sized> {
    target: &'a T,
    proposal: &'a Proposal,
    state: Vec2,
    log_pi: f64,
    rng: Stream,
    warnings: usize,
}

impl<'a, T: Target + ?Sized> Chain<'a, T> {
    pub fn new(target: &'a T, proposal: &'a Proposal, x0: Vec2, rng: Stream) -> Result<Self> {
        let log_pi = target.log_density(&x0)?;
        Ok(Self {
            target,
            proposal,
            state: x0,
            log_pi,
            rng,
            warnings: 0,
        })
    }

    pub fn state(&self) -> &Vec2 {
        &self.state
    }

    pub fn numeric_warnings(&self) -> usize {
        self.warnings
    }

    pub fn advance(&mut self) -> Step {
        let (step, lp) = step_from(self.target, self.proposal, &self.state, self.log_pi, &mut self.rng);
        if step.non_finite {
            self.warnings += 1;
        }
        self.state = step.state;
        self.log_pi = lp;
        step
    }
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub density: TargetDensity,
    pub proposal: Proposal,
    pub x0: Vec2,
    pub seed: u64,
    pub n_steps: usize,
    pub step_cap: usize,
}

impl ChainConfig {
    pub fn new(density: TargetDensity, proposal: Proposal, x0: Vec2, seed: u64, n_steps: usize) -> Self {
        Self {
            density,
            proposal,
            x0,
            seed,
            n_steps,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    /// Stable identifier of everything that determines the trajectory.
    pub fn config_hash(&self) -> String {
        let spec = self.proposal.spec();
        let canonical = format!(
            "density={};proposal={};x0={:?},{:?};seed={};n={}",
            self.density,
            serde_json::to_string(&spec).expect("proposal spec serializes"),
            self.x0[0].to_bits(),
            self.x0[1].to_bits(),
            self.seed,
            self.n_steps
        );
        short_hash(canonical.as_bytes())
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `Φ_0, ..., Φ_n`.
    pub states: Vec<Vec2>,
    /// `accepted[k]` tells whether the move `Φ_k → Φ_{k+1}` was accepted.
    pub accepted: Vec<bool>,
    pub seed: u64,
    pub config_hash: String,
    pub numeric_warnings: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn start(&self) -> &Vec2 {
        &self.states[0]
    }
}

/// Runs `cfg.n_steps` kernel steps from `cfg.x0`.
///
/// A request above the hard cap runs `cfg.step_cap` steps and returns them
/// inside [`Error::Truncated`].
pub fn simulate(cfg: &ChainConfig) -> Result<Trajectory> {
    let steps = cfg.n_steps.min(cfg.step_cap);
    let mut chain = Chain::new(&cfg.density, &cfg.proposal, cfg.x0, stream(cfg.seed, 0))?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut accepted = Vec::with_capacity(steps);
    states.push(cfg.x0);
    for _ in 0..steps {
        let step = chain.advance();
        states.push(step.state);
        accepted.push(step.accepted);
    }
    let traj = Trajectory {
        states,
        accepted,
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        numeric_warnings: chain.numeric_warnings(),
    };
    if cfg.n_steps > cfg.step_cap {
        return Err(Error::Truncated {
            requested: cfg.n_steps,
            cap: cfg.step_cap,
            partial: Box::new(traj),
        });
    }
    Ok(traj)
}

/// Running maximum `M_∞(ε̂, n) = max_{l ≤ n} |Σ_{k ≤ l} ε̂_k|` of the partial
/// sums of the martingale increments `ε̂_k = Φ_k - Φ_{k-1} - Δ̂(Φ_{k-1})`.
pub fn max_partial_sum_stat<F>(traj: &Trajectory, drift: F) -> Result<Vec<f64>>
where
    F: Fn(&Vec2) -> Result<Vec2>,
{
    let mut sum = Vec2::zeros();
    let mut running = 0.0_f64;
    let mut out = Vec::with_capacity(traj.len());
    for (k, pair) in traj.states.windows(2).enumerate() {
        let d = drift(&pair[0]).map_err(|e| Error::AtIndex {
            index: k,
            source: Box::new(e),
        })?;
        sum += pair[1] - pair[0] - d;
        running = running.max(sum.norm());
        out.push(running);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vec2;

    fn wedge_cfg(n: usize, seed: u64) -> ChainConfig {
        ChainConfig::new(
            TargetDensity::WedgeSuper,
            Proposal::gaussian(1.0).unwrap(),
            vec2(3.0, 2.0),
            seed,
            n,
        )
    }

    #[test]
    fn zero_steps_keeps_start() {
        let t = simulate(&wedge_cfg(0, 1)).unwrap();
        assert_eq!(t.states, vec![vec2(3.0, 2.0)]);
        assert!(t.accepted.is_empty());
    }

    #[test]
    fn deterministic() {
        let a = simulate(&wedge_cfg(500, 9)).unwrap();
        let b = simulate(&wedge_cfg(500, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejected_moves_stay_put() {
        let t = simulate(&wedge_cfg(2000, 4)).unwrap();
        for (k, acc) in t.accepted.iter().enumerate() {
            assert_eq!(t.states[k + 1] == t.states[k], !acc);
        }
    }

    #[test]
    fn uphill_moves_always_accepted() {
        let d = TargetDensity::WedgeSuper;
        let p = Proposal::gaussian(1.0).unwrap();
        let x = vec2(0.5, 3.0);
        let lp = d.log_density(&x).unwrap();
        let mut rng = stream(1, 0);
        let mut uphill = 0;
        for _ in 0..5000 {
            let mut peek = rng.clone();
            let y = p.sample_increment(&mut peek);
            let up = d.log_density(&(x + y)).unwrap() >= lp;
            let s = srwm_step(&d, &p, &x, &mut rng).unwrap();
            if up {
                uphill += 1;
                assert!(s.accepted);
            }
        }
        assert!(uphill > 100);
    }

    struct Flat;
    impl Target for Flat {
        fn log_density(&self, _: &Vec2) -> Result<f64> {
            Ok(0.0)
        }
        fn grad_log(&self, _: &Vec2) -> Result<Vec2> {
            Ok(Vec2::zeros())
        }
    }

    #[test]
    fn zero_increment_is_accepted() {
        // A degenerate flat target makes the ratio exactly one.
        let p = Proposal::gaussian(1.0).unwrap();
        let mut rng = stream(2, 0);
        for _ in 0..100 {
            assert!(srwm_step(&Flat, &p, &vec2(1.0, 1.0), &mut rng).unwrap().accepted);
        }
    }

    #[test]
    fn singular_proposals_rejected_and_counted() {
        struct Spiky;
        impl Target for Spiky {
            fn log_density(&self, x: &Vec2) -> Result<f64> {
                if x[0] > 0.0 {
                    Err(Error::Numeric("spike".into()))
                } else {
                    Ok(0.0)
                }
            }
            fn grad_log(&self, _: &Vec2) -> Result<Vec2> {
                Ok(Vec2::zeros())
            }
        }
        let p = Proposal::gaussian(1.0).unwrap();
        let mut chain = Chain::new(&Spiky, &p, vec2(-0.5, 0.0), stream(5, 0)).unwrap();
        for _ in 0..1000 {
            chain.advance();
            assert!(chain.state()[0] <= 0.0);
        }
        assert!(chain.numeric_warnings() > 0);
    }

    #[test]
    fn truncation_keeps_partial() {
        let mut cfg = wedge_cfg(100, 1);
        cfg.step_cap = 10;
        match simulate(&cfg) {
            Err(Error::Truncated { partial, requested, cap }) => {
                assert_eq!((requested, cap), (100, 10));
                assert_eq!(partial.len(), 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_start_rejected() {
        let cfg = ChainConfig::new(
            TargetDensity::weibull_mixture(4.0, 0.5, 0.4).unwrap(),
            Proposal::ball(1.0).unwrap(),
            Vec2::zeros(),
            0,
            10,
        );
        assert!(matches!(simulate(&cfg), Err(Error::Singularity { .. })));
    }

    fn traj_from(states: Vec<Vec2>) -> Trajectory {
        let accepted = states.windows(2).map(|w| w[0] != w[1]).collect();
        Trajectory {
            states,
            accepted,
            seed: 0,
            config_hash: String::new(),
            numeric_warnings: 0,
        }
    }

    #[test]
    fn partial_sum_stat_trivial_cases() {
        let still = traj_from(vec![vec2(1.0, 1.0); 6]);
        let s = max_partial_sum_stat(&still, |_| Ok(Vec2::zeros())).unwrap();
        assert_eq!(s, vec![0.0; 5]);

        let one = traj_from(vec![vec2(0.0, 0.0), vec2(1.0, 0.0)]);
        assert_eq!(max_partial_sum_stat(&one, |_| Ok(Vec2::zeros())).unwrap(), vec![1.0]);
    }

    #[test]
    fn partial_sum_stat_matches_prefix_recompute() {
        let t = simulate(&wedge_cfg(100, 17)).unwrap();
        let drift = |x: &Vec2| Ok(-0.1 * x);
        let fast = max_partial_sum_stat(&t, drift).unwrap();
        for n in 1..=100 {
            let mut best = 0.0_f64;
            for l in 1..=n {
                let mut s = Vec2::zeros();
                for k in 1..=l {
                    s += t.states[k] - t.states[k - 1] + 0.1 * t.states[k - 1];
                }
                best = best.max(s.norm());
            }
            assert!((fast[n - 1] - best).abs() <= 1e-12 * (1.0 + best));
        }
    }

    #[test]
    fn partial_sum_stat_reports_index() {
        let t = simulate(&wedge_cfg(10, 1)).unwrap();
        let err = max_partial_sum_stat(&t, |_| Err(Error::Numeric("x".into()))).unwrap_err();
        assert!(matches!(err, Error::AtIndex { index: 0, .. }));
    }
}
