//! Empirical checks of the state-dependent drift conditions: moments of
//! `|Φ_τ|^p` with `τ = σ ∧ ⌈T|Φ_0|^{1+β}⌉`, and the diagonal escape times
//! of the mixtures.

use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{short_hash, Chain, DEFAULT_STEP_CAP};
use crate::density::TargetDensity;
use crate::error::{Error, Result};
use crate::geom::{unit, vec2, Vec2};
use crate::proposal::{Proposal, ProposalSpec};
use crate::rng::{mix64, stream};
use crate::stats::{mean_se, proportion, slope, Estimate};
use crate::stopping::{tau_budget, KappaTracker};

/// Outcome of one replica stopped at `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedRun {
    pub tau: usize,
    /// `σ` exceeded the budget, so `τ` is the budget.
    pub censored: bool,
    /// `|Φ_τ|^p`.
    pub end_moment: f64,
    /// `Σ_{k<τ} |Φ_k|^p`.
    pub path_moment: f64,
}

/// Consumes `Φ_0, Φ_1, ...` until `τ = σ ∧ budget`, with
/// `σ = inf{k ≥ 0 : |Φ_k| < ρ|Φ_0|}`. The iterator must yield at least
/// `budget + 1` states unless `σ` comes first.
pub fn stop_at_tau<I: IntoIterator<Item = Vec2>>(states: I, rho: f64, budget: usize, p: f64) -> Result<StoppedRun> {
    let mut it = states.into_iter();
    let x0 = it.next().ok_or_else(|| Error::invalid("empty path"))?;
    let level = rho * x0.norm();
    let mut path_moment = 0.0;
    let mut current = x0;
    let mut k = 0;
    loop {
        if current.norm() < level || k == budget {
            return Ok(StoppedRun {
                tau: k,
                censored: current.norm() >= level,
                end_moment: current.norm().powf(p),
                path_moment,
            });
        }
        path_moment += current.norm().powf(p);
        current = it.next().ok_or_else(|| Error::Coverage {
            required: format!("{} states", budget + 1),
            available: format!("{} states", k + 1),
        })?;
        k += 1;
    }
}

#[derive(Debug, Clone)]
pub struct DriftCheck {
    pub density: TargetDensity,
    pub proposal: Proposal,
    pub rho: f64,
    /// `T` in the budget `⌈T|x|^{1+β}⌉`.
    pub horizon: f64,
    /// `p` in `V(x) = |x|^p`.
    pub p: f64,
    pub x_norms: Vec<f64>,
    pub directions: Vec<Vec2>,
    pub replicas: usize,
    pub base_seed: u64,
    pub step_cap: usize,
}

impl DriftCheck {
    /// Defaults: `ρ = 0.5`, `T = 4`, `p = 2`, direction `(cos 1, sin 1)`,
    /// plus the diagonal for mixtures.
    pub fn new(density: TargetDensity, proposal: Proposal, x_norms: Vec<f64>, replicas: usize, base_seed: u64) -> Self {
        let mut directions = vec![vec2(1f64.cos(), 1f64.sin())];
        if density.is_mixture() {
            directions.push(vec2(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        }
        Self {
            density,
            proposal,
            rho: 0.5,
            horizon: 4.0,
            p: 2.0,
            x_norms,
            directions,
            replicas,
            base_seed,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.horizon > 0.0) || !(self.p > 0.0) {
            return Err(Error::invalid("T and p must be positive"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if self.x_norms.is_empty() || self.x_norms[0] <= 0.0 || self.x_norms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("x_norms must be positive and increasing"));
        }
        if self.directions.is_empty() {
            return Err(Error::invalid("at least one direction is required"));
        }
        for d in &self.directions {
            unit(d)?;
        }
        Ok(())
    }

    pub fn echo(&self) -> DriftEcho {
        DriftEcho {
            density: self.density,
            proposal: self.proposal.spec(),
            rho: self.rho,
            horizon: self.horizon,
            p: self.p,
            x_norms: self.x_norms.clone(),
            directions: self.directions.iter().map(|d| [d[0], d[1]]).collect(),
            replicas: self.replicas,
            base_seed: self.base_seed,
            step_cap: self.step_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftEcho {
    pub density: TargetDensity,
    pub proposal: ProposalSpec,
    pub rho: f64,
    pub horizon: f64,
    pub p: f64,
    pub x_norms: Vec<f64>,
    pub directions: Vec<[f64; 2]>,
    pub replicas: usize,
    pub base_seed: u64,
    pub step_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRow {
    pub x_norm: f64,
    pub direction: [f64; 2],
    pub budget: usize,
    /// False when the budget exceeded the step cap; estimates are then NaN.
    pub completed: bool,
    /// `Ê|Φ_τ|^p / |x|^p` over all replicas, censored ones included.
    pub ratio_p: Estimate,
    /// `P̂(σ > budget)`.
    pub p_sigma_gt: Estimate,
    /// `Ê Σ_{k<τ} |Φ_k|^p / |x|^{p+1+β}`.
    pub mean_path_moment: Estimate,
    pub censored_count: usize,
    pub mean_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub config: DriftEcho,
    pub config_hash: String,
    pub rows: Vec<DriftRow>,
    /// `1 − max ratio_p` over completed rows.
    pub epsilon: f64,
}

fn run_stopped(density: &TargetDensity, proposal: &Proposal, x0: Vec2, seed: u64, rho: f64, budget: usize, p: f64) -> Result<StoppedRun> {
    let mut chain = Chain::new(density, proposal, x0, stream(seed, 0))?;
    let states = std::iter::once(x0).chain(std::iter::from_fn(move || Some(chain.advance().state)));
    stop_at_tau(states, rho, budget, p)
}

/// Simulates replicas from `|x|·d` for every level and direction, stops
/// them at `τ`, and estimates the drift-condition quantities.
pub fn drift_check(cfg: &DriftCheck) -> Result<DriftReport> {
    cfg.validate()?;
    let beta = cfg.density.beta();
    let cells: Vec<(usize, usize)> = (0..cfg.x_norms.len())
        .flat_map(|i| (0..cfg.directions.len()).map(move |j| (i, j)))
        .collect();
    let budgets: Vec<f64> = cfg.x_norms.iter().map(|&r| tau_budget(cfg.horizon, r, beta)).collect();
    let runnable = |i: usize| budgets[i] <= cfg.step_cap as f64;
    let jobs: Vec<(usize, usize, usize)> = cells
        .iter()
        .filter(|(i, _)| runnable(*i))
        .flat_map(|&(i, j)| (0..cfg.replicas).map(move |k| (i, j, k)))
        .collect();
    let runs: Vec<StoppedRun> = jobs
        .par_iter()
        .map(|&(i, j, k)| {
            let x0 = cfg.x_norms[i] * unit(&cfg.directions[j])?;
            let seed = mix64(mix64(mix64(cfg.base_seed, i as u64), j as u64), k as u64);
            run_stopped(&cfg.density, &cfg.proposal, x0, seed, cfg.rho, budgets[i] as usize, cfg.p)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cells.len());
    let mut offset = 0;
    for &(i, j) in &cells {
        let r = cfg.x_norms[i];
        let d = unit(&cfg.directions[j])?;
        let budget = budgets[i];
        let nan = Estimate { value: f64::NAN, stderr: f64::NAN };
        if !runnable(i) {
            rows.push(DriftRow {
                x_norm: r,
                direction: [d[0], d[1]],
                budget: budget.min(usize::MAX as f64) as usize,
                completed: false,
                ratio_p: nan,
                p_sigma_gt: nan,
                mean_path_moment: nan,
                censored_count: 0,
                mean_tau: f64::NAN,
            });
            continue;
        }
        let mine = &runs[offset..offset + cfg.replicas];
        offset += cfg.replicas;
        let ratios: Vec<f64> = mine.iter().map(|s| s.end_moment / r.powf(cfg.p)).collect();
        let paths: Vec<f64> = mine.iter().map(|s| s.path_moment / r.powf(cfg.p + 1.0 + beta)).collect();
        let censored = mine.iter().filter(|s| s.censored).count();
        rows.push(DriftRow {
            x_norm: r,
            direction: [d[0], d[1]],
            budget: budget as usize,
            completed: true,
            ratio_p: mean_se(&ratios),
            p_sigma_gt: proportion(censored, mine.len()),
            mean_path_moment: mean_se(&paths),
            censored_count: censored,
            mean_tau: mine.iter().map(|s| s.tau as f64).sum::<f64>() / mine.len() as f64,
        });
    }
    let epsilon = 1.0
        - rows
            .iter()
            .filter(|r| r.completed)
            .map(|r| r.ratio_p.value)
            .fold(f64::NEG_INFINITY, f64::max);
    let config = cfg.echo();
    let config_hash = short_hash(serde_json::to_string(&config).expect("echo serializes").as_bytes());
    Ok(DriftReport {
        config,
        config_hash,
        rows,
        epsilon,
    })
}

#[derive(Debug, Clone)]
pub struct KappaCheck {
    pub density: TargetDensity,
    pub proposal: Proposal,
    pub delta: f64,
    /// `R` in `κ3 = inf{k : |Φ_k| < R}`.
    pub radius: f64,
    /// Each replica runs at most `⌈budget_factor·|x|⌉` steps.
    pub budget_factor: f64,
    pub x_norms: Vec<f64>,
    pub replicas: usize,
    pub base_seed: u64,
    pub step_cap: usize,
}

impl KappaCheck {
    /// Defaults: `R = 10`, budget `10|x|`.
    pub fn new(density: TargetDensity, proposal: Proposal, delta: f64, x_norms: Vec<f64>, replicas: usize, base_seed: u64) -> Self {
        Self {
            density,
            proposal,
            delta,
            radius: 10.0,
            budget_factor: 10.0,
            x_norms,
            replicas,
            base_seed,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.density.is_mixture() {
            return Err(Error::invalid(format!("escape times need a mixture density, got {}", self.density.key())));
        }
        if !self.proposal.is_compact() {
            return Err(Error::invalid("escape times need a compactly supported proposal"));
        }
        if !(self.delta > 0.0) || !(self.radius > 0.0) || !(self.budget_factor > 0.0) {
            return Err(Error::invalid("delta, radius and budget factor must be positive"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if self.x_norms.len() < 2 || self.x_norms[0] <= 0.0 || self.x_norms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("x_norms must hold at least two positive increasing levels"));
        }
        Ok(())
    }

    pub fn echo(&self) -> KappaEcho {
        KappaEcho {
            density: self.density,
            proposal: self.proposal.spec(),
            delta: self.delta,
            radius: self.radius,
            budget_factor: self.budget_factor,
            x_norms: self.x_norms.clone(),
            replicas: self.replicas,
            base_seed: self.base_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaEcho {
    pub density: TargetDensity,
    pub proposal: ProposalSpec,
    pub delta: f64,
    pub radius: f64,
    pub budget_factor: f64,
    pub x_norms: Vec<f64>,
    pub replicas: usize,
    pub base_seed: u64,
}

/// Means of the escape times, with censored values counted at the budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaRow {
    pub x_norm: f64,
    pub budget: usize,
    pub completed: bool,
    pub kappa1: Estimate,
    pub kappa2: Estimate,
    pub kappa3: Estimate,
    pub kappa: Estimate,
    pub censored1: usize,
    pub censored2: usize,
    pub censored3: usize,
    pub censored: usize,
    /// Replicas with `κ > κ2`; zero by construction.
    pub kappa_exceeds_kappa2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub config: KappaEcho,
    pub config_hash: String,
    pub rows: Vec<KappaRow>,
    /// Least-squares slope of `Ê κ` against `|x|` over completed levels.
    pub slope: f64,
}

/// Escape times `κ1(δ), κ2, κ3` and `κ` from diagonal starts `|x|(1, 1)/√2`.
pub fn kappa_diagnostics(cfg: &KappaCheck) -> Result<KappaReport> {
    cfg.validate()?;
    let budgets: Vec<usize> = cfg.x_norms.iter().map(|r| (cfg.budget_factor * r).ceil() as usize).collect();
    let runnable = |i: usize| budgets[i] <= cfg.step_cap;
    let jobs: Vec<(usize, usize)> = (0..cfg.x_norms.len())
        .filter(|&i| runnable(i))
        .flat_map(|i| (0..cfg.replicas).map(move |k| (i, k)))
        .collect();
    let runs: Vec<[Option<usize>; 4]> = jobs
        .par_iter()
        .map(|&(i, k)| -> Result<[Option<usize>; 4]> {
            let x0 = cfg.x_norms[i] * vec2(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
            let mut chain = Chain::new(&cfg.density, &cfg.proposal, x0, stream(mix64(cfg.base_seed, i as u64), k as u64))?;
            let mut tracker = KappaTracker::new(x0, cfg.delta, cfg.radius);
            for _ in 0..budgets[i] {
                if tracker.all_hit() {
                    break;
                }
                tracker.observe(&chain.advance().state);
            }
            let s = tracker.steps;
            Ok([s.kappa1, s.kappa2, s.kappa3, s.kappa()])
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut offset = 0;
    for (i, &r) in cfg.x_norms.iter().enumerate() {
        let nan = Estimate { value: f64::NAN, stderr: f64::NAN };
        if !runnable(i) {
            rows.push(KappaRow {
                x_norm: r,
                budget: budgets[i],
                completed: false,
                kappa1: nan,
                kappa2: nan,
                kappa3: nan,
                kappa: nan,
                censored1: 0,
                censored2: 0,
                censored3: 0,
                censored: 0,
                kappa_exceeds_kappa2: 0,
            });
            continue;
        }
        let mine = &runs[offset..offset + cfg.replicas];
        offset += cfg.replicas;
        let b = budgets[i];
        let column = |c: usize| -> (Estimate, usize) {
            let vals: Vec<f64> = mine.iter().map(|m| m[c].unwrap_or(b) as f64).collect();
            (mean_se(&vals), mine.iter().filter(|m| m[c].is_none()).count())
        };
        let (k1, c1) = column(0);
        let (k2, c2) = column(1);
        let (k3, c3) = column(2);
        let (k, c) = column(3);
        rows.push(KappaRow {
            x_norm: r,
            budget: b,
            completed: true,
            kappa1: k1,
            kappa2: k2,
            kappa3: k3,
            kappa: k,
            censored1: c1,
            censored2: c2,
            censored3: c3,
            censored: c,
            kappa_exceeds_kappa2: mine.iter().filter(|m| m[3].unwrap_or(b) > m[1].unwrap_or(b)).count(),
        });
    }
    let done: Vec<&KappaRow> = rows.iter().filter(|r| r.completed).collect();
    let xs: Vec<f64> = done.iter().map(|r| r.x_norm).collect();
    let ys: Vec<f64> = done.iter().map(|r| r.kappa.value).collect();
    let config = cfg.echo();
    let config_hash = short_hash(serde_json::to_string(&config).expect("echo serializes").as_bytes());
    Ok(KappaReport {
        config,
        config_hash,
        slope: if xs.len() >= 2 { slope(&xs, &ys) } else { f64::NAN },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(norms: &[f64]) -> Vec<Vec2> {
        norms.iter().map(|&n| vec2(n, 0.0)).collect()
    }

    #[test]
    fn stops_at_sigma() {
        let s = stop_at_tau(line(&[10.0, 8.0, 6.0, 4.0, 2.0]), 0.5, 10, 2.0).unwrap();
        assert_eq!(s.tau, 3);
        assert!(!s.censored);
        assert_eq!(s.end_moment, 16.0);
        assert_eq!(s.path_moment, 100.0 + 64.0 + 36.0);
    }

    #[test]
    fn stops_at_budget() {
        let s = stop_at_tau(line(&[10.0, 9.0, 8.0, 7.0, 1.0]), 0.5, 2, 1.0).unwrap();
        assert_eq!(s.tau, 2);
        assert!(s.censored);
        assert_eq!(s.end_moment, 8.0);
        assert_eq!(s.path_moment, 19.0);
    }

    #[test]
    fn sigma_on_the_budget_is_not_censored() {
        let s = stop_at_tau(line(&[10.0, 9.0, 4.0]), 0.5, 2, 1.0).unwrap();
        assert_eq!(s.tau, 2);
        assert!(!s.censored);
    }

    #[test]
    fn short_paths_are_coverage_errors() {
        assert!(matches!(
            stop_at_tau(line(&[10.0, 9.0]), 0.5, 5, 1.0),
            Err(Error::Coverage { .. })
        ));
    }

    fn wedge(norms: Vec<f64>, replicas: usize) -> DriftCheck {
        DriftCheck::new(TargetDensity::WedgeSuper, Proposal::gaussian(1.0).unwrap(), norms, replicas, 3)
    }

    #[test]
    fn drift_check_small_run() {
        let rep = drift_check(&wedge(vec![20.0, 40.0], 50)).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert!(row.completed);
            assert!(row.ratio_p.value.is_finite() && row.ratio_p.stderr.is_finite());
            assert!(row.ratio_p.value < 1.0);
            assert!(row.mean_path_moment.value > 0.0);
        }
        assert!(rep.epsilon > 0.0);
        let again = drift_check(&wedge(vec![20.0, 40.0], 50)).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn rho_near_one_gives_ratio_near_rho_p() {
        let mut cfg = wedge(vec![1000.0], 100);
        cfg.rho = 0.999;
        let rep = drift_check(&cfg).unwrap();
        let r = &rep.rows[0];
        assert_eq!(r.censored_count, 0);
        assert!(r.ratio_p.value <= 1.0);
        assert!((r.ratio_p.value - 0.999f64.powi(2)).abs() < 0.005);
    }

    #[test]
    fn drift_check_flags_over_budget_levels() {
        let mut cfg = wedge(vec![10.0, 1000.0], 5);
        cfg.step_cap = 100;
        let rep = drift_check(&cfg).unwrap();
        assert!(rep.rows[0].completed);
        assert!(!rep.rows[1].completed);
        assert!(rep.epsilon.is_finite());
    }

    #[test]
    fn drift_check_validation() {
        assert!(drift_check(&wedge(vec![40.0, 20.0], 5)).is_err());
        let mut cfg = wedge(vec![20.0], 5);
        cfg.rho = 0.0;
        assert!(drift_check(&cfg).is_err());
    }

    fn mixture(delta: f64, replicas: usize) -> KappaCheck {
        KappaCheck::new(
            TargetDensity::with_defaults("gauss-mixture").unwrap(),
            Proposal::ball(1.0).unwrap(),
            delta,
            vec![20.0, 40.0],
            replicas,
            11,
        )
    }

    #[test]
    fn kappa_is_at_most_kappa2() {
        let rep = kappa_diagnostics(&mixture(0.1, 40)).unwrap();
        for row in &rep.rows {
            assert_eq!(row.kappa_exceeds_kappa2, 0);
            assert!(row.kappa.value <= row.kappa2.value);
        }
        assert!(rep.slope > 0.0);
    }

    #[test]
    fn unreachable_kappa1_is_censored() {
        let rep = kappa_diagnostics(&mixture(50.0, 10)).unwrap();
        for row in &rep.rows {
            assert_eq!(row.censored1, 10);
        }
    }

    #[test]
    fn kappa_preconditions() {
        let mut cfg = mixture(0.1, 5);
        cfg.proposal = Proposal::gaussian(1.0).unwrap();
        assert!(kappa_diagnostics(&cfg).is_err());
        let mut cfg = mixture(0.1, 5);
        cfg.density = TargetDensity::WedgeSuper;
        assert!(kappa_diagnostics(&cfg).is_err());
    }
}
