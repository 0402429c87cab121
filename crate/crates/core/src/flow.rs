//! Fluid ODE `μ' = h(μ)`: integration up to absorption at the origin,
//! closed-form solutions for the wedge examples, two-branch flows from the
//! mixture diagonals, and stability sweeps over the unit circle.

use std::f64::consts::{FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{on_diagonal, Cone};
use crate::drift::VectorField;
use crate::error::{Error, Result};
use crate::geom::{unit, vec2, Vec2};

/// Below this norm the flow is clamped to the origin.
pub const EPS_STOP: f64 = 1e-6;
/// Relative offset of the two branch starts from a diagonal point.
pub const BRANCH_PERTURB: f64 = 1e-8;
/// Angular half-width (radians) of the band around the mixture diagonals.
pub const CONE_BAND: f64 = 1e-6;
/// A step may move the state by at most this fraction of its norm.
const MAX_RELATIVE_MOVE: f64 = 0.02;
const MIN_DT: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Branch {
    pub fn symbol(&self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Piecewise linear between grid points.
    Linear,
    /// Right-continuous, constant between grid points.
    Step,
}

/// Time-stamped planar path.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidPath {
    pub times: Vec<f64>,
    pub points: Vec<Vec2>,
    /// Time the path was clamped to the origin; it stays there afterwards.
    pub absorbed_at: Option<f64>,
    /// Time the path entered the singular band, ending integration.
    pub cone_exit: Option<f64>,
    pub branch: Option<Branch>,
    pub interpolation: Interpolation,
}

impl FluidPath {
    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("paths are never empty")
    }

    /// Whether the path is defined on all of `[0, t]`.
    pub fn covers(&self, t: f64) -> bool {
        self.absorbed_at.is_some() || self.end_time() >= t
    }

    fn locate(&self, t: f64) -> usize {
        // Index of the last grid time <= t.
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Value at `t`, or `None` outside the covered horizon.
    pub fn eval(&self, t: f64) -> Option<Vec2> {
        if t < 0.0 || !self.covers(t) {
            return None;
        }
        if let Some(ta) = self.absorbed_at {
            if t >= ta {
                return Some(Vec2::zeros());
            }
        }
        let i = self.locate(t);
        if i + 1 >= self.times.len() {
            return Some(self.points[i]);
        }
        match self.interpolation {
            Interpolation::Step => Some(self.points[i]),
            Interpolation::Linear => {
                let (t0, t1) = (self.times[i], self.times[i + 1]);
                let w = (t - t0) / (t1 - t0);
                Some(self.points[i] * (1.0 - w) + self.points[i + 1] * w)
            }
        }
    }

    /// Left limit at `t` (differs from [`eval`](Self::eval) only at jumps of step paths).
    pub fn left_limit(&self, t: f64) -> Option<Vec2> {
        match self.interpolation {
            Interpolation::Linear => self.eval(t),
            Interpolation::Step => {
                let v = self.eval(t)?;
                let i = self.times.partition_point(|&s| s < t);
                if i > 0 && i < self.times.len() && self.times[i] == t {
                    Some(self.points[i - 1])
                } else {
                    Some(v)
                }
            }
        }
    }
}

fn in_band(cone: Cone, x: &Vec2) -> bool {
    match cone {
        Cone::PuncturedPlane => false,
        Cone::OffDiagonals => {
            let theta = x[1].abs().atan2(x[0].abs());
            (theta - FRAC_PI_4).abs() <= CONE_BAND
        }
    }
}

fn rk4(field: &VectorField, x: &Vec2, k1: &Vec2, dt: f64) -> Result<Vec2> {
    let k2 = field.eval(&(x + 0.5 * dt * k1))?;
    let k3 = field.eval(&(x + 0.5 * dt * k2))?;
    let k4 = field.eval(&(x + dt * k3))?;
    Ok(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Integrates `μ' = field(μ)` from `x0` with classical Runge–Kutta.
///
/// The step starts at `dt` and is halved whenever a step would move the
/// state by more than 2% of its norm, which keeps the integrator accurate
/// as the flow accelerates into the origin. Once `|μ| <= EPS_STOP` the path
/// is clamped to zero and `absorbed_at` is set.
pub fn integrate_flow(field: &VectorField, x0: &Vec2, dt: f64, t_max: f64) -> Result<FluidPath> {
    if !(dt > 0.0) || !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("need dt > 0 and t_max >= 0, got {dt}, {t_max}")));
    }
    if x0.norm() == 0.0 {
        return Err(Error::invalid("flow must start away from the origin"));
    }
    if !field.in_cone(x0) {
        return Err(Error::SingularCone {
            density: field.density.key().into(),
            at: *x0,
        });
    }
    let cone = field.density.cone();
    let mut t = 0.0;
    let mut x = *x0;
    let mut step = dt;
    let mut times = vec![0.0];
    let mut points = vec![x];
    let mut absorbed_at = None;
    let mut cone_exit = None;
    let mut was_in_band = in_band(cone, &x);

    while t < t_max {
        if x.norm() <= EPS_STOP {
            *points.last_mut().expect("non-empty") = Vec2::zeros();
            absorbed_at = Some(t);
            break;
        }
        let k1 = field.eval(&x)?;
        let speed = k1.norm();
        while speed * step > MAX_RELATIVE_MOVE * x.norm() {
            step *= 0.5;
        }
        if step < MIN_DT {
            return Err(Error::Stiffness { t, last: x });
        }
        let h = step.min(t_max - t);
        let next = match rk4(field, &x, &k1, h) {
            Ok(v) => v,
            Err(Error::SingularCone { .. }) => {
                cone_exit = Some(t);
                break;
            }
            Err(e) => return Err(e),
        };
        t += h;
        x = next;
        times.push(t);
        points.push(x);
        let now_in_band = in_band(cone, &x) || !field.in_cone(&x) && x.norm() > EPS_STOP;
        if now_in_band && !was_in_band {
            cone_exit = Some(t);
            break;
        }
        was_in_band = now_in_band;
    }
    if absorbed_at.is_none() && cone_exit.is_none() && x.norm() <= EPS_STOP {
        *points.last_mut().expect("non-empty") = Vec2::zeros();
        absorbed_at = Some(t);
    }
    Ok(FluidPath {
        times,
        points,
        absorbed_at,
        cone_exit,
        branch: None,
        interpolation: Interpolation::Linear,
    })
}

/// Examples whose fluid flows are known in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    WedgeSuper,
    WedgeWeibull { delta: f64 },
}

impl ClosedForm {
    pub fn from_key(key: &str, delta: Option<f64>) -> Result<Self> {
        match key {
            "wedge-super" => Ok(ClosedForm::WedgeSuper),
            "wedge-weibull" => {
                let delta = delta.unwrap_or(crate::density::DEFAULT_DELTA);
                if !(delta > 0.0 && delta < 0.5) {
                    return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {delta}")));
                }
                Ok(ClosedForm::WedgeWeibull { delta })
            }
            other => Err(Error::invalid(format!("no closed-form flow for `{other}`"))),
        }
    }

    /// Time at which the flow from `x0` reaches the origin.
    pub fn absorption_time(&self, x0: &Vec2, sigma: f64) -> f64 {
        let r = x0.norm();
        match *self {
            ClosedForm::WedgeSuper => (2.0 * PI).sqrt() * r / sigma,
            ClosedForm::WedgeWeibull { delta } => {
                r.powf(2.0 * (1.0 - delta)) / (2.0 * sigma * sigma * delta * (1.0 - delta))
            }
        }
    }
}

/// Exact flow of the wedge examples under `N(0, σ²I)` increments, clamped at
/// the origin after absorption.
pub fn closed_form_flow(example: ClosedForm, x0: &Vec2, sigma: f64, t: f64) -> Result<Vec2> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let r = x0.norm();
    if r == 0.0 {
        return Ok(Vec2::zeros());
    }
    let n = x0 / r;
    let radius = match example {
        ClosedForm::WedgeSuper => {
            if sigma * t <= (2.0 * PI).sqrt() * r {
                r - sigma * t / (2.0 * PI).sqrt()
            } else {
                0.0
            }
        }
        ClosedForm::WedgeWeibull { delta } => {
            let base = r.powf(2.0 * (1.0 - delta)) - 2.0 * sigma * sigma * delta * (1.0 - delta) * t;
            if base >= 0.0 {
                base.powf(0.5 / (1.0 - delta))
            } else {
                0.0
            }
        }
    };
    Ok(radius * n)
}

/// Integrates the two flows leaving a diagonal point of a mixture, started
/// at `x0 ± perturb·|x0|·v⊥` with `v⊥` the unit normal to the diagonal.
pub fn branch_flow_with(
    field: &VectorField,
    x0: &Vec2,
    dt: f64,
    t_max: f64,
    perturb: f64,
) -> Result<(FluidPath, FluidPath)> {
    if x0.norm() == 0.0 || !on_diagonal(x0) {
        return Err(Error::invalid(format!(
            "branch flows start on a diagonal, got ({}, {})",
            x0[0], x0[1]
        )));
    }
    let d = unit(x0)?;
    let normal = vec2(-d[1], d[0]);
    let offset = perturb * x0.norm() * normal;
    let run = |start: Vec2, tag: Branch| -> Result<FluidPath> {
        let mut p = integrate_flow(field, &start, dt, t_max)?;
        p.branch = Some(tag);
        Ok(p)
    };
    let plus = run(x0 + offset, Branch::Plus)?;
    let minus = run(x0 - offset, Branch::Minus)?;
    let immediate = |p: &FluidPath| p.cone_exit.is_some() && p.times.len() <= 2;
    if immediate(&plus) && immediate(&minus) {
        return Err(Error::DegenerateBranch);
    }
    Ok((plus, minus))
}

pub fn branch_flow(field: &VectorField, x0: &Vec2, dt: f64, t_max: f64) -> Result<(FluidPath, FluidPath)> {
    branch_flow_with(field, x0, dt, t_max, BRANCH_PERTURB)
}

/// First time `|μ(t)| <= rho`, interpolating `|μ|` linearly between grid points.
pub fn first_passage(path: &FluidPath, rho: f64) -> Option<f64> {
    let norms: Vec<f64> = path.points.iter().map(|p| p.norm()).collect();
    if norms[0] <= rho {
        return Some(0.0);
    }
    for i in 1..norms.len() {
        if norms[i] <= rho {
            let (a, b) = (norms[i - 1], norms[i]);
            let w = (a - rho) / (a - b);
            return Some(path.times[i - 1] + w * (path.times[i] - path.times[i - 1]));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub angle: f64,
    pub branch: Option<Branch>,
    pub hit_time: Option<f64>,
    pub absorbed_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub all_hit: bool,
    /// Largest first-passage time; infinite when some direction never hit.
    pub worst_time: f64,
    pub rows: Vec<SweepRow>,
    /// Angles (radians) whose flow did not pass below `rho` before `t_max`.
    pub missed: Vec<f64>,
}

/// Integrates from `n_directions` equally spaced unit vectors (branching at
/// the diagonals of cone-restricted fields) and records when each flow first
/// passes below `rho`.
pub fn stability_sweep(
    field: &VectorField,
    n_directions: usize,
    rho: f64,
    t_max: f64,
    dt: f64,
) -> Result<SweepReport> {
    if n_directions < 8 {
        return Err(Error::invalid(format!("need at least 8 directions, got {n_directions}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1), got {rho}")));
    }
    let per_direction: Vec<Vec<SweepRow>> = (0..n_directions)
        .into_par_iter()
        .map(|k| -> Result<Vec<SweepRow>> {
            let angle = 2.0 * PI * k as f64 / n_directions as f64;
            let u = vec2(angle.cos(), angle.sin());
            let row = |p: &FluidPath| SweepRow {
                angle,
                branch: p.branch,
                hit_time: first_passage(p, rho).filter(|&t| t <= t_max),
                absorbed_at: p.absorbed_at,
            };
            if !field.in_cone(&u) {
                let (plus, minus) = branch_flow(field, &u, dt, t_max)?;
                Ok(vec![row(&plus), row(&minus)])
            } else {
                Ok(vec![row(&integrate_flow(field, &u, dt, t_max)?)])
            }
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = per_direction.into_iter().flatten().collect();
    let missed: Vec<f64> = rows.iter().filter(|r| r.hit_time.is_none()).map(|r| r.angle).collect();
    let worst_time = rows
        .iter()
        .map(|r| r.hit_time.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(SweepReport {
        all_hit: missed.is_empty(),
        worst_time,
        rows,
        missed,
    })
}
