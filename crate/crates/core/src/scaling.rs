//! Rescaled chains `η(t) = Φ_{⌊t r^{1+α}⌋} / r` and their distance to the
//! fluid flow, over replica ensembles.

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{short_hash, simulate, ChainConfig, Trajectory, DEFAULT_STEP_CAP};
use crate::density::TargetDensity;
use crate::drift::VectorField;
use crate::error::{Error, Result};
use crate::flow::{branch_flow, integrate_flow, Branch, FluidPath, Interpolation};
use crate::geom::Vec2;
use crate::proposal::{Proposal, ProposalSpec};
use crate::rng::mix64;
use crate::stats::{median, proportion, Estimate};
use crate::stopping::{kappa_steps, sigma_index, KappaSteps};

/// Slack allowed when a grid end time falls a few ulps short of the horizon.
const COVER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    Step,
    Polygonal,
}

fn steps_needed(t_max: f64, r: f64, alpha: f64) -> usize {
    (t_max * r.powf(1.0 + alpha)).ceil() as usize
}

/// Builds `η_r^α` on `[0, t_max]` from a trajectory started at `r·x`.
/// Grid values are `Φ_k / r` at times `k r^{-(1+α)}` in both modes.
pub fn scaled_path(traj: &Trajectory, r: f64, alpha: f64, mode: PathMode, t_max: f64) -> Result<FluidPath> {
    if !(r > 0.0) || !(alpha >= 0.0) || !(t_max >= 0.0) {
        return Err(Error::invalid(format!("need r > 0, alpha >= 0, t_max >= 0; got {r}, {alpha}, {t_max}")));
    }
    let clock = r.powf(1.0 + alpha);
    let need = steps_needed(t_max, r, alpha);
    if traj.len() < need {
        return Err(Error::Coverage {
            required: format!("{need} steps"),
            available: format!("{} steps", traj.len()),
        });
    }
    let n = need.max(1).min(traj.len());
    let times = (0..=n).map(|k| k as f64 / clock).collect();
    let points = traj.states[..=n].iter().map(|s| s / r).collect();
    Ok(FluidPath {
        times,
        points,
        absorbed_at: None,
        cone_exit: None,
        branch: None,
        interpolation: match mode {
            PathMode::Step => Interpolation::Step,
            PathMode::Polygonal => Interpolation::Linear,
        },
    })
}

fn check_cover(p: &FluidPath, t_max: f64) -> Result<()> {
    if p.covers(t_max * (1.0 - COVER_SLACK)) {
        Ok(())
    } else {
        Err(Error::Coverage {
            required: format!("t = {t_max}"),
            available: format!("t = {}", p.end_time()),
        })
    }
}

fn at(p: &FluidPath, t: f64) -> (Vec2, Vec2) {
    let t = if p.absorbed_at.is_some() { t } else { t.min(p.end_time()) };
    (p.eval(t).expect("covered"), p.left_limit(t).expect("covered"))
}

/// `sup_{0 ≤ t ≤ t_max} |a(t) − b(t)|`, evaluated on the union of both time
/// grids (plus left limits of step paths), where the supremum is attained.
pub fn sup_distance(a: &FluidPath, b: &FluidPath, t_max: f64) -> Result<f64> {
    check_cover(a, t_max)?;
    check_cover(b, t_max)?;
    let mut grid: Vec<f64> = a
        .times
        .iter()
        .chain(&b.times)
        .copied()
        .filter(|&t| t <= t_max)
        .chain([t_max])
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut worst = 0.0_f64;
    for t in grid {
        let (av, al) = at(a, t);
        let (bv, bl) = at(b, t);
        worst = worst.max((av - bv).norm()).max((al - bl).norm());
    }
    Ok(worst)
}

/// Distance from the origin to the segment `[a, b]`.
fn segment_min_norm(a: &Vec2, b: &Vec2) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return a.norm();
    }
    let s = (-a.dot(&d) / len2).clamp(0.0, 1.0);
    (a + s * d).norm()
}

/// `inf_{0 ≤ t ≤ t_max} |η(t)|` for a scaled path.
pub fn path_infimum(p: &FluidPath, t_max: f64) -> f64 {
    let m = p.times.partition_point(|&t| t <= t_max);
    let pts = &p.points[..m.max(1)];
    match p.interpolation {
        Interpolation::Step => pts.iter().map(|q| q.norm()).fold(f64::INFINITY, f64::min),
        Interpolation::Linear => {
            let mut best = pts[0].norm();
            for w in pts.windows(2) {
                best = best.min(segment_min_norm(&w[0], &w[1]));
            }
            if let (Some(last), Some(end)) = (pts.last(), p.eval(t_max)) {
                best = best.min(segment_min_norm(last, &end));
            }
            best
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaParams {
    pub delta: f64,
    /// Radius `R` of `κ3 = inf{k : |Φ_k| < R}`, in unscaled units.
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingExperiment {
    pub density: TargetDensity,
    pub proposal: Proposal,
    pub x: Vec2,
    pub r_values: Vec<f64>,
    pub alpha: f64,
    pub t_max: f64,
    pub eps: f64,
    pub rho: f64,
    pub replicas: usize,
    pub base_seed: u64,
    /// Interpolation used for `sup_dist`.
    pub mode: PathMode,
    /// Base step of the reference flow integration.
    pub dt: f64,
    pub step_cap: usize,
    /// Diagonal escape times, recorded for mixture runs when set.
    pub kappa: Option<KappaParams>,
}

impl ScalingExperiment {
    /// Experiment at the nontrivial scaling `α = β` with the stated defaults
    /// `ρ = 0.5`, `ε = 0.1`, polygonal paths and `dt = 1e-3`.
    pub fn new(density: TargetDensity, proposal: Proposal, x: Vec2, r_values: Vec<f64>, t_max: f64, replicas: usize, base_seed: u64) -> Self {
        Self {
            alpha: density.beta(),
            density,
            proposal,
            x,
            r_values,
            t_max,
            eps: 0.1,
            rho: 0.5,
            replicas,
            base_seed,
            mode: PathMode::Polygonal,
            dt: 1e-3,
            step_cap: DEFAULT_STEP_CAP,
            kappa: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let beta = self.density.beta();
        if !(self.alpha >= 0.0 && self.alpha <= beta + 1e-12) {
            return Err(Error::invalid(format!("alpha must lie in [0, beta = {beta}], got {}", self.alpha)));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) || !(self.eps > 0.0) || !(self.dt > 0.0) {
            return Err(Error::invalid("t_max, eps and dt must be positive"));
        }
        if self.r_values.is_empty() || self.r_values.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("r_values must be a nonempty list of positive reals"));
        }
        if !(self.x.norm() > 0.0) {
            return Err(Error::invalid("the initial direction must be nonzero"));
        }
        Ok(())
    }

    pub fn echo(&self) -> ScalingEcho {
        ScalingEcho {
            density: self.density,
            proposal: self.proposal.spec(),
            x: [self.x[0], self.x[1]],
            r_values: self.r_values.clone(),
            alpha: self.alpha,
            t_max: self.t_max,
            eps: self.eps,
            rho: self.rho,
            replicas: self.replicas,
            base_seed: self.base_seed,
            mode: self.mode,
            dt: self.dt,
            step_cap: self.step_cap,
            kappa: self.kappa,
        }
    }

    fn nontrivial(&self) -> bool {
        (self.alpha - self.density.beta()).abs() <= 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingEcho {
    pub density: TargetDensity,
    pub proposal: ProposalSpec,
    pub x: [f64; 2],
    pub r_values: Vec<f64>,
    pub alpha: f64,
    pub t_max: f64,
    pub eps: f64,
    pub rho: f64,
    pub replicas: usize,
    pub base_seed: u64,
    pub mode: PathMode,
    pub dt: f64,
    pub step_cap: usize,
    pub kappa: Option<KappaParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRow {
    pub r: f64,
    pub replica: usize,
    pub sup_dist: f64,
    /// Closest branch for diagonal starts.
    pub branch: Option<Branch>,
    /// `inf |η| ≤ ρ|x|` on the polygonal path.
    pub hit_rho: bool,
    /// Same on the step path.
    pub hit_rho_step: bool,
    pub sigma_steps: Option<usize>,
    pub kappa: Option<KappaSteps>,
    pub numeric_warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub r: f64,
    pub required_steps: usize,
    /// False when the per-replica budget exceeded the step cap; no replicas ran.
    pub completed: bool,
    pub replicas: usize,
    pub p_sup_ge_eps: Estimate,
    pub p_hit_rho: Estimate,
    pub p_hit_rho_step: Estimate,
    pub median_sup_dist: f64,
    pub branch_plus: usize,
    pub branch_minus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub config: ScalingEcho,
    pub config_hash: String,
    pub cells: Vec<CellSummary>,
    pub rows: Vec<ReplicaRow>,
}

impl ScalingReport {
    pub fn complete(&self) -> bool {
        self.cells.iter().all(|c| c.completed)
    }
}

enum Reference {
    Single(FluidPath),
    Branches(FluidPath, FluidPath),
}

impl Reference {
    fn distance(&self, eta: &FluidPath, t_max: f64) -> Result<(f64, Option<Branch>)> {
        match self {
            Reference::Single(p) => Ok((sup_distance(eta, p, t_max)?, None)),
            Reference::Branches(plus, minus) => {
                let dp = sup_distance(eta, plus, t_max)?;
                let dm = sup_distance(eta, minus, t_max)?;
                Ok(if dp <= dm { (dp, Some(Branch::Plus)) } else { (dm, Some(Branch::Minus)) })
            }
        }
    }
}

fn reference(exp: &ScalingExperiment) -> Result<Reference> {
    if !exp.nontrivial() {
        return Ok(Reference::Single(FluidPath {
            times: vec![0.0, exp.t_max],
            points: vec![exp.x, exp.x],
            absorbed_at: None,
            cone_exit: None,
            branch: None,
            interpolation: Interpolation::Linear,
        }));
    }
    let field = VectorField::h(exp.density, exp.proposal.clone())?;
    if field.in_cone(&exp.x) {
        Ok(Reference::Single(integrate_flow(&field, &exp.x, exp.dt, exp.t_max)?))
    } else {
        let (plus, minus) = branch_flow(&field, &exp.x, exp.dt, exp.t_max)?;
        Ok(Reference::Branches(plus, minus))
    }
}

fn replica_seed(base: u64, r_index: usize, replica: usize) -> u64 {
    mix64(mix64(base, r_index as u64), replica as u64)
}

fn run_replica(exp: &ScalingExperiment, reference: &Reference, r: f64, r_index: usize, replica: usize, n: usize) -> Result<ReplicaRow> {
    let cfg = ChainConfig {
        step_cap: exp.step_cap,
        ..ChainConfig::new(exp.density, exp.proposal.clone(), r * exp.x, replica_seed(exp.base_seed, r_index, replica), n)
    };
    let traj = simulate(&cfg)?;
    let poly = scaled_path(&traj, r, exp.alpha, PathMode::Polygonal, exp.t_max)?;
    let step = scaled_path(&traj, r, exp.alpha, PathMode::Step, exp.t_max)?;
    let eta = match exp.mode {
        PathMode::Polygonal => &poly,
        PathMode::Step => &step,
    };
    let (sup_dist, branch) = reference.distance(eta, exp.t_max)?;
    let level = exp.rho * exp.x.norm();
    let kappa = match exp.kappa {
        Some(k) if exp.density.is_mixture() => Some(kappa_steps(&traj.states, k.delta, k.radius)),
        _ => None,
    };
    Ok(ReplicaRow {
        r,
        replica,
        sup_dist,
        branch,
        hit_rho: path_infimum(&poly, exp.t_max) <= level,
        hit_rho_step: path_infimum(&step, exp.t_max) <= level,
        sigma_steps: sigma_index(&traj.states, exp.rho),
        kappa,
        numeric_warnings: traj.numeric_warnings,
    })
}

/// Simulates `replicas` chains from `r·x` for each `r`, and compares the
/// rescaled paths with the fluid flow from `x` (the constant path when
/// `α < β`; the nearer of the two branch flows for diagonal starts).
///
/// Cells whose step budget `⌈t_max r^{1+α}⌉` exceeds the cap are reported
/// with `completed = false`. The result depends only on `exp`.
pub fn ensemble_experiment(exp: &ScalingExperiment) -> Result<ScalingReport> {
    exp.validate()?;
    let reference = reference(exp)?;
    let needs: Vec<usize> = exp.r_values.iter().map(|&r| steps_needed(exp.t_max, r, exp.alpha)).collect();
    let jobs: Vec<(usize, usize)> = (0..exp.r_values.len())
        .filter(|&i| needs[i] <= exp.step_cap)
        .flat_map(|i| (0..exp.replicas).map(move |j| (i, j)))
        .collect();
    let rows: Vec<ReplicaRow> = jobs
        .par_iter()
        .map(|&(i, j)| run_replica(exp, &reference, exp.r_values[i], i, j, needs[i]))
        .collect::<Result<_>>()?;

    let cells = exp
        .r_values
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mine: Vec<&ReplicaRow> = rows.iter().filter(|row| row.r == r && needs[i] <= exp.step_cap).collect();
            let n = mine.len();
            let dists: Vec<f64> = mine.iter().map(|row| row.sup_dist).collect();
            CellSummary {
                r,
                required_steps: needs[i],
                completed: needs[i] <= exp.step_cap,
                replicas: n,
                p_sup_ge_eps: proportion(dists.iter().filter(|&&d| d >= exp.eps).count(), n),
                p_hit_rho: proportion(mine.iter().filter(|row| row.hit_rho).count(), n),
                p_hit_rho_step: proportion(mine.iter().filter(|row| row.hit_rho_step).count(), n),
                median_sup_dist: median(&dists),
                branch_plus: mine.iter().filter(|row| row.branch == Some(Branch::Plus)).count(),
                branch_minus: mine.iter().filter(|row| row.branch == Some(Branch::Minus)).count(),
            }
        })
        .collect();
    let config = exp.echo();
    let config_hash = short_hash(serde_json::to_string(&config).expect("echo serializes").as_bytes());
    Ok(ScalingReport {
        config,
        config_hash,
        cells,
        rows,
    })
}
