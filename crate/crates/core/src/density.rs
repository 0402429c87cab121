//! Target densities.
//!
//! Four planar families are built in: two "wedge" densities whose contours
//! have sharp spikes along the axes, and two Γ-mixtures whose contours bend
//! along the diagonals. All log densities are unnormalized; only differences
//! of log densities are ever used.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ensure_finite, unit, vec2, Vec2};

/// A point is on a mixture diagonal iff `||x1| - |x2|| <= DIAGONAL_TOL * |x|`.
pub const DIAGONAL_TOL: f64 = 1e-9;

/// Interface for anything the sampler can target.
pub trait Target {
    fn log_density(&self, x: &Vec2) -> Result<f64>;
    fn grad_log(&self, x: &Vec2) -> Result<Vec2>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "key", rename_all = "kebab-case")]
pub enum TargetDensity {
    /// `(1 + x1² + x2² + x1⁸x2²) exp(-(x1² + x2²))`.
    WedgeSuper,
    /// `α exp(-x'Γ₁⁻¹x/2) + (1-α) exp(-x'Γ₂⁻¹x/2)`, `Γ₁⁻¹ = diag(a², 1)`, `Γ₂⁻¹ = diag(1, a²)`.
    GaussMixture { a: f64, alpha: f64 },
    /// `(1 + x1² + x2² + x1⁸x2²)^δ exp(-(x1² + x2²)^δ)`.
    WedgeWeibull { delta: f64 },
    /// `Σ wᵢ (x'Γᵢ⁻¹x)^(δ-1) exp(-(x'Γᵢ⁻¹x)^δ / 2)` with the mixture weights above.
    WeibullMixture { a: f64, alpha: f64, delta: f64 },
}

pub const DEFAULT_DELTA: f64 = 0.4;
pub const DEFAULT_A: f64 = 4.0;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailClass {
    /// `π ∝ g exp(-p)` with `p` of even degree `degree`.
    Superexponential { degree: u32 },
    /// `π ∝ g exp(-p^δ)`, `0 < δ < 1/degree`.
    Subexponential { delta: f64, degree: u32 },
}

/// Open cone on which the radial limits of the drift exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cone {
    /// Whole plane minus the origin.
    PuncturedPlane,
    /// Punctured plane minus the diagonals `|x1| = |x2|`.
    OffDiagonals,
}

impl Cone {
    pub fn contains(&self, x: &Vec2) -> bool {
        let norm = x.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return false;
        }
        match self {
            Cone::PuncturedPlane => true,
            Cone::OffDiagonals => !on_diagonal(x),
        }
    }
}

pub fn on_diagonal(x: &Vec2) -> bool {
    (x[0].abs() - x[1].abs()).abs() <= DIAGONAL_TOL * x.norm()
}

/// Scaling exponent, tail class and radial-limit data of a density.
#[derive(Debug, Clone, Copy)]
pub struct TailLimitData {
    pub beta: f64,
    pub class: TailClass,
    pub cone: Cone,
    density: TargetDensity,
}

impl TailLimitData {
    pub fn ell_infinity(&self, x: &Vec2) -> Result<Vec2> {
        self.density.ell_infinity(x)
    }

    pub fn in_cone(&self, x: &Vec2) -> bool {
        self.cone.contains(x)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(1 + x1² + x2² + x1⁸x2²)` and the weight `x1⁸x2² / (1 + ...)`.
fn wedge_log_factor(x: &Vec2) -> (f64, f64) {
    let s = x.norm_squared();
    let base = s.ln_1p();
    let spike = if x[0] != 0.0 && x[1] != 0.0 {
        8.0 * x[0].abs().ln() + 2.0 * x[1].abs().ln()
    } else {
        f64::NEG_INFINITY
    };
    let total = log_add_exp(base, spike);
    (total, (spike - total).exp())
}

/// Gradient of `ln(1 + x1² + x2² + x1⁸x2²)`.
fn wedge_log_factor_grad(x: &Vec2) -> Vec2 {
    let (total, w) = wedge_log_factor(x);
    let inv_q = (-total).exp();
    let g1 = 2.0 * x[0] * inv_q + if x[0] != 0.0 { 8.0 * w / x[0] } else { 0.0 };
    let g2 = 2.0 * x[1] * inv_q + if x[1] != 0.0 { 2.0 * w / x[1] } else { 0.0 };
    vec2(g1, g2)
}

impl TargetDensity {
    pub fn gauss_mixture(a: f64, alpha: f64) -> Result<Self> {
        let d = TargetDensity::GaussMixture { a, alpha };
        d.validate()?;
        Ok(d)
    }

    pub fn wedge_weibull(delta: f64) -> Result<Self> {
        let d = TargetDensity::WedgeWeibull { delta };
        d.validate()?;
        Ok(d)
    }

    pub fn weibull_mixture(a: f64, alpha: f64, delta: f64) -> Result<Self> {
        let d = TargetDensity::WeibullMixture { a, alpha, delta };
        d.validate()?;
        Ok(d)
    }

    /// Built-in with the default parameters for `key`.
    pub fn with_defaults(key: &str) -> Result<Self> {
        match key {
            "wedge-super" => Ok(TargetDensity::WedgeSuper),
            "gauss-mixture" => Self::gauss_mixture(DEFAULT_A, DEFAULT_ALPHA),
            "wedge-weibull" => Self::wedge_weibull(DEFAULT_DELTA),
            "weibull-mixture" => Self::weibull_mixture(DEFAULT_A, DEFAULT_ALPHA, DEFAULT_DELTA),
            other => Err(Error::invalid(format!("unknown density `{other}`"))),
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            TargetDensity::WedgeSuper => "wedge-super",
            TargetDensity::GaussMixture { .. } => "gauss-mixture",
            TargetDensity::WedgeWeibull { .. } => "wedge-weibull",
            TargetDensity::WeibullMixture { .. } => "weibull-mixture",
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn is_mixture(&self) -> bool {
        matches!(
            self,
            TargetDensity::GaussMixture { .. } | TargetDensity::WeibullMixture { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let check_delta = |delta: f64| {
            // m = 2 for every built-in, so δ must lie in (0, 1/2).
            if delta > 0.0 && delta < 0.5 {
                Ok(())
            } else {
                Err(Error::invalid(format!("delta must lie in (0, 1/2), got {delta}")))
            }
        };
        let check_mixture = |a: f64, alpha: f64| {
            if !(a * a > 1.0) || !a.is_finite() {
                return Err(Error::invalid(format!("need a² > 1, got a = {a}")));
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::invalid(format!(
                    "mixture weight must lie in (0, 1), got {alpha}"
                )));
            }
            Ok(())
        };
        match *self {
            TargetDensity::WedgeSuper => Ok(()),
            TargetDensity::GaussMixture { a, alpha } => check_mixture(a, alpha),
            TargetDensity::WedgeWeibull { delta } => check_delta(delta),
            TargetDensity::WeibullMixture { a, alpha, delta } => {
                check_mixture(a, alpha)?;
                check_delta(delta)
            }
        }
    }

    pub fn tail_class(&self) -> TailClass {
        match *self {
            TargetDensity::WedgeSuper | TargetDensity::GaussMixture { .. } => {
                TailClass::Superexponential { degree: 2 }
            }
            TargetDensity::WedgeWeibull { delta }
            | TargetDensity::WeibullMixture { delta, .. } => {
                TailClass::Subexponential { delta, degree: 2 }
            }
        }
    }

    /// Scaling exponent: 0 for superexponential tails, `1 - mδ` otherwise.
    pub fn beta(&self) -> f64 {
        match self.tail_class() {
            TailClass::Superexponential { .. } => 0.0,
            TailClass::Subexponential { delta, degree } => 1.0 - degree as f64 * delta,
        }
    }

    pub fn cone(&self) -> Cone {
        if self.is_mixture() {
            Cone::OffDiagonals
        } else {
            Cone::PuncturedPlane
        }
    }

    pub fn tail_params(&self) -> TailLimitData {
        TailLimitData {
            beta: self.beta(),
            class: self.tail_class(),
            cone: self.cone(),
            density: *self,
        }
    }

    fn singularity(&self, x: &Vec2) -> Error {
        Error::Singularity {
            density: self.key().into(),
            at: *x,
        }
    }

    /// Quadratic forms `(x'Γ₁⁻¹x, x'Γ₂⁻¹x)` of the mixtures.
    fn quad_forms(a: f64, x: &Vec2) -> (f64, f64) {
        let a2 = a * a;
        (
            a2 * x[0] * x[0] + x[1] * x[1],
            x[0] * x[0] + a2 * x[1] * x[1],
        )
    }

    /// Precision matrix diagonal of the component dominating at `x` in the
    /// tails: `Γ₂⁻¹` when `|x1| > |x2|`, `Γ₁⁻¹` otherwise.
    fn dominant_precision(a: f64, x: &Vec2) -> Vec2 {
        if x[0].abs() > x[1].abs() {
            vec2(1.0, a * a)
        } else {
            vec2(a * a, 1.0)
        }
    }

    /// Limiting gradient direction `ℓ_∞` on the cone.
    pub fn ell_infinity(&self, x: &Vec2) -> Result<Vec2> {
        ensure_finite(x)?;
        if x.norm() == 0.0 {
            return Err(Error::invalid("ℓ_∞ is undefined at the origin"));
        }
        if !self.cone().contains(x) {
            return Err(Error::SingularCone {
                density: self.key().into(),
                at: *x,
            });
        }
        match *self {
            TargetDensity::WedgeSuper => Ok(-unit(x)?),
            TargetDensity::WedgeWeibull { delta } => Ok(-2.0 * delta * unit(x)?),
            TargetDensity::GaussMixture { a, .. } => {
                let v = Self::dominant_precision(a, x).component_mul(x);
                Ok(-unit(&v)?)
            }
            TargetDensity::WeibullMixture { a, delta, .. } => {
                let v = Self::dominant_precision(a, x).component_mul(x);
                let form = x.dot(&v);
                let beta = self.beta();
                Ok(-(x.norm().powf(beta) * delta * form.powf(delta - 1.0)) * v)
            }
        }
    }
}

impl Target for TargetDensity {
    fn log_density(&self, x: &Vec2) -> Result<f64> {
        ensure_finite(x)?;
        let value = match *self {
            TargetDensity::WedgeSuper => wedge_log_factor(x).0 - x.norm_squared(),
            TargetDensity::WedgeWeibull { delta } => {
                delta * wedge_log_factor(x).0 - x.norm_squared().powf(delta)
            }
            TargetDensity::GaussMixture { a, alpha } => {
                let (q1, q2) = Self::quad_forms(a, x);
                log_add_exp(alpha.ln() - 0.5 * q1, (1.0 - alpha).ln() - 0.5 * q2)
            }
            TargetDensity::WeibullMixture { a, alpha, delta } => {
                let (q1, q2) = Self::quad_forms(a, x);
                if q1 == 0.0 || q2 == 0.0 {
                    return Err(self.singularity(x));
                }
                let term = |w: f64, q: f64| w.ln() + (delta - 1.0) * q.ln() - 0.5 * q.powf(delta);
                log_add_exp(term(alpha, q1), term(1.0 - alpha, q2))
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Numeric(format!(
                "log density of {} not finite at ({}, {})",
                self.key(),
                x[0],
                x[1]
            )))
        }
    }

    fn grad_log(&self, x: &Vec2) -> Result<Vec2> {
        ensure_finite(x)?;
        match *self {
            TargetDensity::WedgeSuper => Ok(wedge_log_factor_grad(x) - 2.0 * x),
            TargetDensity::WedgeWeibull { delta } => {
                let s = x.norm_squared();
                if s == 0.0 {
                    return Err(self.singularity(x));
                }
                Ok(delta * wedge_log_factor_grad(x) - 2.0 * delta * s.powf(delta - 1.0) * x)
            }
            TargetDensity::GaussMixture { a, alpha } => {
                let (q1, q2) = Self::quad_forms(a, x);
                let l1 = alpha.ln() - 0.5 * q1;
                let l2 = (1.0 - alpha).ln() - 0.5 * q2;
                let lse = log_add_exp(l1, l2);
                let (w1, w2) = ((l1 - lse).exp(), (l2 - lse).exp());
                let a2 = a * a;
                let g1 = vec2(a2 * x[0], x[1]);
                let g2 = vec2(x[0], a2 * x[1]);
                Ok(-(w1 * g1 + w2 * g2))
            }
            TargetDensity::WeibullMixture { a, alpha, delta } => {
                let (q1, q2) = Self::quad_forms(a, x);
                if q1 == 0.0 || q2 == 0.0 {
                    return Err(self.singularity(x));
                }
                let term = |w: f64, q: f64| w.ln() + (delta - 1.0) * q.ln() - 0.5 * q.powf(delta);
                let (l1, l2) = (term(alpha, q1), term(1.0 - alpha, q2));
                let lse = log_add_exp(l1, l2);
                let (w1, w2) = ((l1 - lse).exp(), (l2 - lse).exp());
                // d/dq of each log term, times ∇q = 2Γ⁻¹x.
                let dq = |q: f64| (delta - 1.0) / q - 0.5 * delta * q.powf(delta - 1.0);
                let a2 = a * a;
                let g1 = 2.0 * dq(q1) * vec2(a2 * x[0], x[1]);
                let g2 = 2.0 * dq(q2) * vec2(x[0], a2 * x[1]);
                Ok(w1 * g1 + w2 * g2)
            }
        }
    }
}

impl fmt::Display for TargetDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TargetDensity::WedgeSuper => write!(f, "wedge-super"),
            TargetDensity::GaussMixture { a, alpha } => write!(f, "gauss-mixture:a={a},alpha={alpha}"),
            TargetDensity::WedgeWeibull { delta } => write!(f, "wedge-weibull:delta={delta}"),
            TargetDensity::WeibullMixture { a, alpha, delta } => {
                write!(f, "weibull-mixture:a={a},alpha={alpha},delta={delta}")
            }
        }
    }
}

/// Parses `key` or `key:name=value,name=value`, e.g. `gauss-mixture:a=4,alpha=0.5`.
impl FromStr for TargetDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let mut density = Self::with_defaults(key)?;
        for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected name=value, got `{pair}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("not a number in `{pair}`")))?;
            let slot = match (&mut density, name.trim()) {
                (TargetDensity::GaussMixture { a, .. }, "a")
                | (TargetDensity::WeibullMixture { a, .. }, "a") => a,
                (TargetDensity::GaussMixture { alpha, .. }, "alpha")
                | (TargetDensity::WeibullMixture { alpha, .. }, "alpha") => alpha,
                (TargetDensity::WedgeWeibull { delta }, "delta")
                | (TargetDensity::WeibullMixture { delta, .. }, "delta") => delta,
                (_, other) => {
                    return Err(Error::invalid(format!(
                        "density `{key}` has no parameter `{other}`"
                    )))
                }
            };
            *slot = value;
        }
        density.validate()?;
        Ok(density)
    }
}
