//! Subgeometric rate sequences `r_φ(u) = φ(H_φ^{-1}(u)) / φ(H_φ^{-1}(0))`
//! with `H_φ(v) = ∫_1^v dx/φ(x)`, and the exponent arithmetic of the
//! polynomial ergodicity theorems.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{compensated_sum, integrate, Tolerance};

const SLOPE_TOL: f64 = 1e-12;
const INVERSION_TOL: f64 = 1e-10;
const LOCAL_TOL: Tolerance = Tolerance {
    abs: 1e-16,
    rel: 1e-15,
    max_panels: 200,
};

/// Piecewise-linear concave `φ` through `(knots[i], values[i])`, constant
/// after the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl Tabulated {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::invalid("tabulated phi needs at least two (v, phi) pairs"));
        }
        if knots.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::invalid("tabulated phi must be finite"));
        }
        if knots[0] > 1.0 {
            return Err(Error::invalid(format!("tabulated phi must start at v <= 1, got {}", knots[0])));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tabulated phi knots must be strictly increasing"));
        }
        if values.iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("tabulated phi must be positive"));
        }
        let slopes: Vec<f64> = (1..knots.len())
            .map(|i| (values[i] - values[i - 1]) / (knots[i] - knots[i - 1]))
            .collect();
        if let Some(i) = slopes.iter().position(|&s| s < -SLOPE_TOL) {
            return Err(Error::invalid(format!("tabulated phi decreases on [{}, {}]", knots[i], knots[i + 1])));
        }
        if let Some(i) = slopes.windows(2).position(|w| w[1] > w[0] + SLOPE_TOL) {
            return Err(Error::invalid(format!("tabulated phi is not concave at v = {}", knots[i + 1])));
        }
        Ok(Self { knots, values })
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.knots.len();
        if v >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let i = self.knots.partition_point(|&k| k <= v).clamp(1, n - 1);
        let (k0, k1) = (self.knots[i - 1], self.knots[i]);
        let w = (v - k0) / (k1 - k0);
        self.values[i - 1] + w * (self.values[i] - self.values[i - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    /// `φ(v) = v^α`.
    Polynomial { alpha: f64 },
    Custom(Tabulated),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    phi: Phi,
}

impl RateFunction {
    pub fn polynomial(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("polynomial exponent must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            phi: Phi::Polynomial { alpha },
        })
    }

    pub fn custom(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            phi: Phi::Custom(Tabulated::new(knots, values)?),
        })
    }

    pub fn phi_spec(&self) -> &Phi {
        &self.phi
    }

    pub fn phi(&self, v: f64) -> f64 {
        match &self.phi {
            Phi::Polynomial { alpha } => v.powf(*alpha),
            Phi::Custom(t) => t.eval(v),
        }
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a];
        if let Phi::Custom(t) = &self.phi {
            pts.extend(t.knots.iter().copied().filter(|&k| k > a && k < b));
        }
        pts.push(b);
        pts
    }

    /// `∫_a^b dx/φ(x)` for `1 <= a <= b`, by adaptive quadrature split at the
    /// knots of a tabulated `φ` and at powers of two.
    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        let mut pts = Vec::new();
        for w in self.breakpoints(a, b).windows(2) {
            let (lo, hi) = (w[0], w[1]);
            pts.push(lo);
            let mut p = lo.log2().floor().exp2() * 2.0;
            while p < hi {
                if p > lo {
                    pts.push(p);
                }
                p *= 2.0;
            }
        }
        pts.push(b);
        let parts = pts
            .windows(2)
            .map(|w| integrate(|x| 1.0 / self.phi(x), w[0], w[1], LOCAL_TOL))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(parts))
    }

    /// `H_φ(v) = ∫_1^v dx/φ(x)`, `v >= 1`.
    pub fn h(&self, v: f64) -> Result<f64> {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::invalid(format!("H is evaluated on [1, inf), got {v}")));
        }
        self.integral(1.0, v)
    }

    /// Solves `∫_a^b dx/φ = target` for `b >= a`: geometric bracketing,
    /// bisection, then Newton from the left, which is monotone because
    /// `b ↦ ∫_a^b 1/φ` is concave.
    fn solve_from(&self, a: f64, target: f64) -> Result<f64> {
        if target == 0.0 {
            return Ok(a);
        }
        // 1/φ is nonincreasing, so the root is at least a + target·φ(a).
        let mut lo = a + target * self.phi(a);
        let mut hi = lo;
        let mut g_lo = self.integral(a, lo)?;
        if g_lo > target {
            lo = a;
            g_lo = 0.0;
        }
        let mut step = hi - a;
        while self.integral(a, hi)? < target {
            step *= 2.0;
            hi = a + step;
            if !hi.is_finite() {
                return Err(Error::Numeric(format!("H^-1({target}) overflows")));
            }
        }
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            let g = self.integral(a, mid)?;
            if g < target {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
            }
        }
        let mut b = lo;
        let mut g = g_lo;
        for _ in 0..60 {
            let next = (b + (target - g) * self.phi(b)).min(hi);
            if (next - b).abs() <= 4.0 * f64::EPSILON * b {
                b = next;
                break;
            }
            b = next;
            g = self.integral(a, b)?;
        }
        let residual = (self.integral(a, b)? - target).abs();
        if residual > INVERSION_TOL * target.max(1.0) {
            return Err(Error::Numeric(format!("H inversion residual {residual:e} at target {target}")));
        }
        Ok(b)
    }

    /// `H_φ^{-1}(u)` for `u >= 0`.
    pub fn h_inv(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::invalid(format!("H^-1 is evaluated on [0, inf), got {u}")));
        }
        self.solve_from(1.0, u)
    }

    /// `r_φ(0), ..., r_φ(n-1)`; closed form for polynomial `φ`, numeric
    /// inversion otherwise.
    pub fn rate_sequence(&self, n: usize) -> Result<Vec<f64>> {
        match self.phi {
            Phi::Polynomial { alpha } => {
                if n == 0 {
                    return Err(Error::invalid("n must be at least 1"));
                }
                Ok((0..n).map(|k| polynomial_rate(alpha, k as f64)).collect())
            }
            Phi::Custom(_) => self.rate_sequence_numeric(n),
        }
    }

    /// Numeric `r_φ(k)` for any `φ`. Consecutive points satisfy
    /// `∫_{v_k}^{v_{k+1}} dx/φ = 1`, so each inversion is local and its
    /// error does not scale with `H(v_k)`.
    pub fn rate_sequence_numeric(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        let phi0 = self.phi(1.0);
        let mut v = 1.0;
        let mut out = Vec::with_capacity(n);
        out.push(1.0);
        for _ in 1..n {
            v = self.solve_from(v, 1.0)?;
            out.push(self.phi(v) / phi0);
        }
        Ok(out)
    }
}

/// `(1 + (1-α)k)^{α/(1-α)}`, the rate sequence of `φ(v) = v^α`.
pub fn polynomial_rate(alpha: f64, k: f64) -> f64 {
    (1.0 + (1.0 - alpha) * k).powf(alpha / (1.0 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "regime")]
pub enum Regime {
    /// `f = 1 + |x|^{p - q(1+β)}`, `r(n) = n^{q-1}`, `1 <= q <= p/(1+β)`.
    General,
    /// `f = 1 + |x|^{p - u}`, `r(n) = n^{u-1}`, `1 <= u <= p`.
    Superexp,
    /// `f = 1 + |x|^{p - u(2 - mδ)}`, `r(n) = n^{u-1}`, `1 <= u <= p/(2 - mδ)`.
    Subexp { m: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub f_exponent: f64,
    pub rate_exponent: f64,
}

/// Exponents of the norm-like function `f` and the rate `r` delivered by the
/// polynomial ergodicity theorems.
pub fn ergodic_exponents(p: f64, beta: f64, q_or_u: f64, regime: Regime) -> Result<Exponents> {
    if !p.is_finite() || !beta.is_finite() || !q_or_u.is_finite() {
        return Err(Error::invalid("exponents must be finite"));
    }
    let (scale, name) = match regime {
        Regime::General => {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid(format!("beta must lie in [0, 1), got {beta}")));
            }
            (1.0 + beta, "q")
        }
        Regime::Superexp => (1.0, "u"),
        Regime::Subexp { m, delta } => {
            if !(m > 0.0 && delta > 0.0 && delta * m < 1.0) {
                return Err(Error::invalid(format!("need m > 0 and 0 < delta < 1/m, got m = {m}, delta = {delta}")));
            }
            (2.0 - m * delta, "u")
        }
    };
    let upper = p / scale;
    if q_or_u < 1.0 {
        return Err(Error::invalid(format!("{name} = {q_or_u} violates {name} >= 1")));
    }
    if q_or_u > upper {
        return Err(Error::invalid(format!("{name} = {q_or_u} violates {name} <= {upper}")));
    }
    Ok(Exponents {
        f_exponent: p - q_or_u * scale,
        rate_exponent: q_or_u - 1.0,
    })
}
