//! Symmetric increment laws `q(y) = det(Σ)^{-1/2} q0(Σ^{-1/2} y)` with a
//! rotationally invariant base `q0`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{spd_sqrt, vec2, Mat2, Vec2};
use crate::quadrature::{integrate, Tolerance};

const EIGEN_TOL: f64 = 1e-12;
/// Gaussian marginals are integrated on `[0, GAUSS_CUTOFF]`; the tail mass is below 1e-30.
const GAUSS_CUTOFF: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "kebab-case")]
pub enum Base {
    GaussianStd,
    UniformBall { radius: f64 },
}

impl Base {
    /// Density of `q0` at `z`.
    pub fn density(&self, z: &Vec2) -> f64 {
        let r2 = z.norm_squared();
        match *self {
            Base::GaussianStd => (-0.5 * r2).exp() / (2.0 * PI),
            Base::UniformBall { radius } => {
                if r2 <= radius * radius {
                    1.0 / (PI * radius * radius)
                } else {
                    0.0
                }
            }
        }
    }

    /// Density of the first coordinate of `q0`.
    pub fn marginal_density(&self, y: f64) -> f64 {
        match *self {
            Base::GaussianStd => (-0.5 * y * y).exp() / (2.0 * PI).sqrt(),
            Base::UniformBall { radius } => {
                let r2 = radius * radius;
                2.0 * (r2 - y * y).max(0.0).sqrt() / (PI * r2)
            }
        }
    }

    /// Upper end of the integration range of the marginal.
    pub fn marginal_cutoff(&self) -> f64 {
        match *self {
            Base::GaussianStd => GAUSS_CUTOFF,
            Base::UniformBall { radius } => radius,
        }
    }

    /// `E|z|` under `q0`.
    fn mean_radius(&self) -> f64 {
        match *self {
            Base::GaussianStd => (PI / 2.0).sqrt(),
            Base::UniformBall { radius } => 2.0 * radius / 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        match *self {
            Base::GaussianStd => vec2(rng.sample(StandardNormal), rng.sample(StandardNormal)),
            Base::UniformBall { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                vec2(r * theta.cos(), r * theta.sin())
            }
        }
    }
}

/// Moment constants of a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    /// `∫ y1 1{y1 ≥ 0} q0(y) dy`.
    pub m1: f64,
    /// `∫ y1² 1{y1 ≥ 0} q0(y) dy`.
    pub m2: f64,
    /// `∫ |y| q(y) dy`.
    pub mean_abs: f64,
    /// Radius of the support of `q`; infinite for Gaussian increments.
    pub support_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec {
    #[serde(flatten)]
    pub base: Base,
    /// Upper triangle `(s11, s12, s22)` of Σ.
    pub sigma: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Proposal {
    base: Base,
    sigma: Mat2,
    sqrt_sigma: Mat2,
    inv_sqrt_sigma: Mat2,
    inv_sqrt_det: f64,
    moments: OnceLock<Moments>,
}

impl Proposal {
    pub fn new(base: Base, sigma: Mat2) -> Result<Self> {
        if let Base::UniformBall { radius } = base {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
            }
        }
        let sqrt_sigma = spd_sqrt(&sigma, EIGEN_TOL)?;
        let inv_sqrt_sigma = sqrt_sigma
            .try_inverse()
            .ok_or_else(|| Error::invalid("shape matrix is singular"))?;
        Ok(Self {
            base,
            sigma,
            sqrt_sigma,
            inv_sqrt_sigma,
            inv_sqrt_det: 1.0 / sigma.determinant().sqrt(),
            moments: OnceLock::new(),
        })
    }

    /// `N(0, scale² I)` increments.
    pub fn gaussian(scale: f64) -> Result<Self> {
        Self::new(Base::GaussianStd, Mat2::identity() * (scale * scale))
    }

    /// Uniform increments on the disc of radius `radius`.
    pub fn ball(radius: f64) -> Result<Self> {
        Self::new(Base::UniformBall { radius }, Mat2::identity())
    }

    pub fn from_spec(spec: &ProposalSpec) -> Result<Self> {
        let [s11, s12, s22] = spec.sigma;
        Self::new(spec.base, Mat2::new(s11, s12, s12, s22))
    }

    pub fn spec(&self) -> ProposalSpec {
        ProposalSpec {
            base: self.base,
            sigma: [self.sigma[(0, 0)], self.sigma[(0, 1)], self.sigma[(1, 1)]],
        }
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn sigma(&self) -> &Mat2 {
        &self.sigma
    }

    pub fn sqrt_sigma(&self) -> &Mat2 {
        &self.sqrt_sigma
    }

    pub fn is_compact(&self) -> bool {
        matches!(self.base, Base::UniformBall { .. })
    }

    /// Draws `Σ^{1/2} z` with `z ~ q0`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        self.sqrt_sigma * self.base.sample(rng)
    }

    pub fn increment_density(&self, y: &Vec2) -> f64 {
        self.inv_sqrt_det * self.base.density(&(self.inv_sqrt_sigma * y))
    }

    /// Both bases have finite moments of every order.
    pub fn has_moment(&self, p: f64) -> bool {
        p.is_finite()
    }

    pub fn moments(&self) -> Result<Moments> {
        if let Some(m) = self.moments.get() {
            return Ok(*m);
        }
        let m = self.compute_moments()?;
        Ok(*self.moments.get_or_init(|| m))
    }

    fn compute_moments(&self) -> Result<Moments> {
        let tol = Tolerance {
            abs: 1e-15,
            rel: 1e-12,
            ..Tolerance::default()
        };
        let base = self.base;
        let cutoff = base.marginal_cutoff();
        let m1 = integrate(|y| y * base.marginal_density(y), 0.0, cutoff, tol)?;
        let m2 = integrate(|y| y * y * base.marginal_density(y), 0.0, cutoff, tol)?;
        // |Σ^{1/2} ρu| = ρ |Σ^{1/2} u|: radial and angular parts separate.
        let s = self.sqrt_sigma;
        let angular = integrate(
            |theta: f64| (s * vec2(theta.cos(), theta.sin())).norm(),
            0.0,
            2.0 * PI,
            tol,
        )? / (2.0 * PI);
        let support_radius = match base {
            Base::GaussianStd => f64::INFINITY,
            Base::UniformBall { radius } => {
                let eig = self.sigma.symmetric_eigen().eigenvalues;
                radius * eig.max().sqrt()
            }
        };
        Ok(Moments {
            m1,
            m2,
            mean_abs: base.mean_radius() * angular,
            support_radius,
        })
    }
}
