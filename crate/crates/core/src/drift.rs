//! Drift fields: Monte Carlo estimates of the one-step mean drift
//! `Δ(x) = E_x[Φ_1 - Φ_0]` and the analytic limiting fields `Δ_∞` and
//! `h(x) = |x|^{-β} Δ_∞(x)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::step_from;
use crate::density::{TailClass, Target, TargetDensity};
use crate::error::{Error, Result};
use crate::geom::{ensure_finite, vec2, Vec2};
use crate::proposal::Proposal;
use crate::rng::{mix64, stream};

/// Samples per independent stream inside [`delta_mc`].
const CHUNK: usize = 1 << 16;
pub const MIN_MC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Average of `y (ratio - 1) 1{ratio < 1}` over `y ~ q`.
    RejectionIntegrand,
    /// Average one-step displacement of the kernel.
    OneStepMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEstimate {
    pub x: Vec2,
    pub value: Vec2,
    /// Per-coordinate standard error of `value`.
    pub stderr: Vec2,
    pub n_samples: usize,
    pub estimator: Estimator,
}

/// Mean and centred sum of squares per coordinate (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default)]
struct Moments2 {
    n: f64,
    mean: Vec2,
    m2: Vec2,
}

impl Moments2 {
    fn push(&mut self, v: Vec2) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d.component_mul(&(v - self.mean));
    }

    fn merge(self, other: Moments2) -> Moments2 {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments2 {
            n,
            mean: self.mean + d * (other.n / n),
            m2: self.m2 + other.m2 + d.component_mul(&d) * (self.n * other.n / n),
        }
    }
}

/// Monte Carlo estimate of `Δ(x)` from `n` draws.
///
/// Draws are split into fixed-size chunks, each with its own stream derived
/// from `seed`, so the result does not depend on the thread count.
pub fn delta_mc<T: Target + Sync + ?Sized>(
    target: &T,
    proposal: &Proposal,
    x: &Vec2,
    n: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<FieldEstimate> {
    ensure_finite(x)?;
    if n < MIN_MC_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_MC_SAMPLES} Monte Carlo samples, got {n}"
        )));
    }
    let log_pi = target.log_density(x)?;
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<(Moments2, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = CHUNK.min(n - c * CHUNK);
            let mut rng = stream(seed, c as u64);
            let mut acc = Moments2::default();
            let mut bad = 0usize;
            for _ in 0..size {
                let v = match estimator {
                    Estimator::RejectionIntegrand => {
                        let y = proposal.sample_increment(&mut rng);
                        match target.log_density(&(x + y)) {
                            Ok(lp) => {
                                let ratio = (lp - log_pi).exp();
                                if ratio < 1.0 {
                                    y * (ratio - 1.0)
                                } else {
                                    Vec2::zeros()
                                }
                            }
                            Err(_) => {
                                // Rejected by the kernel: ratio taken as 0.
                                bad += 1;
                                -y
                            }
                        }
                    }
                    Estimator::OneStepMean => {
                        let (step, _) = step_from(target, proposal, x, log_pi, &mut rng);
                        if step.non_finite {
                            bad += 1;
                        }
                        step.state - x
                    }
                };
                acc.push(v);
            }
            (acc, bad)
        })
        .collect();
    let (acc, bad) = partial
        .into_iter()
        .fold((Moments2::default(), 0), |(a, b), (m, k)| (a.merge(m), b + k));
    if bad == n {
        return Err(Error::Numeric(format!(
            "every proposal from ({}, {}) hit a non-finite density",
            x[0], x[1]
        )));
    }
    let nf = acc.n;
    let stderr = (acc.m2 / (nf - 1.0)).map(f64::sqrt) / nf.sqrt();
    if !acc.mean.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("drift estimate is not finite".into()));
    }
    Ok(FieldEstimate {
        x: *x,
        value: acc.mean,
        stderr,
        n_samples: n,
        estimator,
    })
}

/// Limiting drift `Δ_∞(x)` on the cone.
///
/// Superexponential tails: `m1 Σℓ_∞ / |Σ^{1/2} ℓ_∞|`.
/// Subexponential tails: `m2 Σℓ_∞`.
pub fn delta_infinity(density: &TargetDensity, proposal: &Proposal, x: &Vec2) -> Result<Vec2> {
    let ell = density.ell_infinity(x)?;
    let m = proposal.moments()?;
    let sigma = proposal.sigma();
    match density.tail_class() {
        TailClass::Superexponential { .. } => {
            let scale = (proposal.sqrt_sigma() * ell).norm();
            Ok(m.m1 * (sigma * ell) / scale)
        }
        TailClass::Subexponential { .. } => Ok(m.m2 * (sigma * ell)),
    }
}

/// ODE vector field `h(x) = |x|^{-β} Δ_∞(x)`.
pub fn h_field(density: &TargetDensity, proposal: &Proposal, x: &Vec2) -> Result<Vec2> {
    let d = delta_infinity(density, proposal, x)?;
    let beta = density.beta();
    if beta == 0.0 {
        Ok(d)
    } else {
        Ok(x.norm().powf(-beta) * d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    DeltaInfinity,
    H,
}

/// A limiting field bound to a density and a proposal.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub density: TargetDensity,
    pub proposal: Proposal,
    pub kind: FieldKind,
}

impl VectorField {
    pub fn new(density: TargetDensity, proposal: Proposal, kind: FieldKind) -> Result<Self> {
        // Warm the moment cache so evaluation never fails on quadrature.
        proposal.moments()?;
        Ok(Self {
            density,
            proposal,
            kind,
        })
    }

    /// The field driving the fluid ODE.
    pub fn h(density: TargetDensity, proposal: Proposal) -> Result<Self> {
        Self::new(density, proposal, FieldKind::H)
    }

    pub fn beta(&self) -> f64 {
        self.density.beta()
    }

    pub fn in_cone(&self, x: &Vec2) -> bool {
        self.density.cone().contains(x)
    }

    pub fn eval(&self, x: &Vec2) -> Result<Vec2> {
        match self.kind {
            FieldKind::DeltaInfinity => delta_infinity(&self.density, &self.proposal, x),
            FieldKind::H => h_field(&self.density, &self.proposal, x),
        }
    }
}

/// Rectangular evaluation grid; `nx × ny` points including the corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<Vec2> {
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                pts.push(vec2(
                    Self::axis(self.xmin, self.xmax, self.nx, i),
                    Self::axis(self.ymin, self.ymax, self.ny, j),
                ));
            }
        }
        pts
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.xmin, self.xmax, self.ymin, self.ymax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.xmin > self.xmax || self.ymin > self.ymax || self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid(format!("bad grid {self:?}")));
        }
        Ok(())
    }
}

/// One row of a field-comparison grid. Missing values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub x: Vec2,
    pub delta_hat: Option<FieldEstimate>,
    pub delta_inf: Option<Vec2>,
    pub h: Option<Vec2>,
    pub in_cone: bool,
    /// Why `delta_hat` is missing, when it is.
    pub error: Option<String>,
}

/// Evaluates `Δ̂`, `Δ_∞` and `h` at every grid point; point `i` uses seed
/// `mix64(seed, i)`.
pub fn field_grid(
    density: &TargetDensity,
    proposal: &Proposal,
    grid: &GridSpec,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<GridRow>> {
    grid.validate()?;
    proposal.moments()?;
    let points = grid.points();
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let in_cone = density.cone().contains(x);
            let (delta_hat, error) = match delta_mc(
                density,
                proposal,
                x,
                n_mc,
                mix64(seed, i as u64),
                Estimator::RejectionIntegrand,
            ) {
                Ok(e) => (Some(e), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let (delta_inf, h) = if in_cone {
                (
                    delta_infinity(density, proposal, x).ok(),
                    h_field(density, proposal, x).ok(),
                )
            } else {
                (None, None)
            };
            GridRow {
                x: *x,
                delta_hat,
                delta_inf,
                h,
                in_cone,
                error,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wedge_limit_field() {
        let p = Proposal::gaussian(1.0).unwrap();
        let d = delta_infinity(&TargetDensity::WedgeSuper, &p, &vec2(0.0, 7.0)).unwrap();
        assert!((d - vec2(0.0, -1.0 / (2.0 * PI).sqrt())).norm() < 1e-10);
        assert!((d[1] + 0.39894).abs() < 1e-5);
    }

    #[test]
    fn scaled_gaussian_limit_field() {
        // σ = 2: Δ_∞ = -σ n(x)/√(2π).
        let p = Proposal::gaussian(2.0).unwrap();
        let d = delta_infinity(&TargetDensity::WedgeSuper, &p, &vec2(3.0, 4.0)).unwrap();
        let expect = -2.0 * vec2(0.6, 0.8) / (2.0 * PI).sqrt();
        assert!((d - expect).norm() < 1e-10);
    }

    #[test]
    fn weibull_wedge_limit_field() {
        let p = Proposal::gaussian(1.0).unwrap();
        let w = TargetDensity::wedge_weibull(0.4).unwrap();
        let d = delta_infinity(&w, &p, &vec2(1.0, 0.0)).unwrap();
        assert!((d - vec2(-0.4, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn mixture_limit_field() {
        let p = Proposal::gaussian(1.0).unwrap();
        let g = TargetDensity::gauss_mixture(4.0, 0.5).unwrap();
        let d = delta_infinity(&g, &p, &vec2(2.0, 1.0)).unwrap();
        let n = vec2(2.0, 16.0) / 260f64.sqrt();
        assert!((d + n / (2.0 * PI).sqrt()).norm() < 1e-10);
        assert!((d + 0.398942 * vec2(0.12403, 0.99228)).norm() < 1e-5);
        assert!(matches!(
            delta_infinity(&g, &p, &vec2(1.0, 1.0)),
            Err(Error::SingularCone { .. })
        ));
    }

    #[test]
    fn h_is_delta_infinity_for_superexponential() {
        let p = Proposal::gaussian(1.0).unwrap();
        for x in [vec2(3.0, 1.0), vec2(-0.2, 5.0)] {
            let g = TargetDensity::gauss_mixture(4.0, 0.5).unwrap();
            assert_eq!(h_field(&g, &p, &x).unwrap(), delta_infinity(&g, &p, &x).unwrap());
        }
    }

    #[test]
    fn h_homogeneity_for_weibull_wedge() {
        let p = Proposal::gaussian(1.0).unwrap();
        let w = TargetDensity::wedge_weibull(0.4).unwrap();
        let unit = vec2(0.6, 0.8);
        assert_eq!(h_field(&w, &p, &unit).unwrap(), delta_infinity(&w, &p, &unit).unwrap());
        let h1 = h_field(&w, &p, &vec2(1.0, 0.0)).unwrap();
        let h2 = h_field(&w, &p, &vec2(2.0, 0.0)).unwrap();
        assert!((h2 - 2f64.powf(-0.2) * h1).norm() < 1e-14);
    }

    #[test]
    fn mc_at_the_mode_is_zero() {
        let p = Proposal::gaussian(1.0).unwrap();
        let e = delta_mc(&TargetDensity::WedgeSuper, &p, &Vec2::zeros(), 200_000, 3, Estimator::RejectionIntegrand)
            .unwrap();
        assert!(e.value[0].abs() <= 3.0 * e.stderr[0]);
        assert!(e.value[1].abs() <= 3.0 * e.stderr[1]);
    }

    #[test]
    fn mc_needs_enough_samples() {
        let p = Proposal::gaussian(1.0).unwrap();
        assert!(delta_mc(&TargetDensity::WedgeSuper, &p, &Vec2::zeros(), 10, 0, Estimator::OneStepMean).is_err());
    }

    #[test]
    fn mc_is_reproducible() {
        let p = Proposal::gaussian(1.0).unwrap();
        let x = vec2(4.0, 1.0);
        let a = delta_mc(&TargetDensity::WedgeSuper, &p, &x, 150_000, 8, Estimator::OneStepMean).unwrap();
        let b = delta_mc(&TargetDensity::WedgeSuper, &p, &x, 150_000, 8, Estimator::OneStepMean).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_single_point_matches_point_ops() {
        let p = Proposal::gaussian(1.0).unwrap();
        let d = TargetDensity::WedgeSuper;
        let grid = GridSpec { xmin: 5.0, xmax: 5.0, ymin: 2.0, ymax: 2.0, nx: 1, ny: 1 };
        let rows = field_grid(&d, &p, &grid, 5000, 42).unwrap();
        assert_eq!(rows.len(), 1);
        let x = vec2(5.0, 2.0);
        let est = delta_mc(&d, &p, &x, 5000, mix64(42, 0), Estimator::RejectionIntegrand).unwrap();
        assert_eq!(rows[0].delta_hat, Some(est));
        assert_eq!(rows[0].delta_inf, Some(delta_infinity(&d, &p, &x).unwrap()));
        assert_eq!(rows[0].h, Some(h_field(&d, &p, &x).unwrap()));
        assert!(rows[0].in_cone);
    }

    #[test]
    fn grid_flags_mixture_diagonal() {
        let p = Proposal::gaussian(1.0).unwrap();
        let d = TargetDensity::gauss_mixture(4.0, 0.5).unwrap();
        let grid = GridSpec { xmin: -2.0, xmax: 2.0, ymin: -2.0, ymax: 2.0, nx: 5, ny: 5 };
        let rows = field_grid(&d, &p, &grid, 1000, 1).unwrap();
        for row in &rows {
            let diag = row.x[0].abs() == row.x[1].abs();
            assert_eq!(row.in_cone, !diag);
            if diag {
                assert!(row.delta_inf.is_none() && row.h.is_none());
            } else {
                assert!(row.delta_inf.is_some());
            }
        }
    }

    #[test]
    fn grid_keeps_going_past_singular_points() {
        let p = Proposal::ball(1.0).unwrap();
        let d = TargetDensity::weibull_mixture(4.0, 0.5, 0.4).unwrap();
        let grid = GridSpec { xmin: -1.0, xmax: 1.0, ymin: 0.0, ymax: 0.0, nx: 3, ny: 1 };
        let rows = field_grid(&d, &p, &grid, 1000, 1).unwrap();
        assert!(rows[1].delta_hat.is_none() && rows[1].error.is_some());
        assert!(rows[0].delta_hat.is_some() && rows[2].delta_hat.is_some());
    }
}
