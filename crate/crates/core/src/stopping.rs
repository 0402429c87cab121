//! Stopping times of a trajectory: the contraction time `σ` and the
//! diagonal escape times `κ1, κ2, κ3` of the mixtures.

use serde::Serialize;

use crate::geom::{vec2, Vec2};

/// Unit normal `v⋆ = (1, -1)/√2` to the main diagonal.
pub fn v_star() -> Vec2 {
    vec2(0.5f64.sqrt(), -(0.5f64.sqrt()))
}

/// `σ = inf{k ≥ 0 : |Φ_k| < ρ|Φ_0|}` within the recorded states.
pub fn sigma_index(states: &[Vec2], rho: f64) -> Option<usize> {
    let bound = rho * states.first()?.norm();
    states.iter().position(|s| s.norm() < bound)
}

/// `⌈T |x|^{1+β}⌉`, the truncation level of `τ = σ ∧ ⌈T|Φ_0|^{1+β}⌉`.
pub fn tau_budget(t: f64, x_norm: f64, beta: f64) -> f64 {
    (t * x_norm.powf(1.0 + beta)).ceil()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct KappaSteps {
    pub kappa1: Option<usize>,
    pub kappa2: Option<usize>,
    pub kappa3: Option<usize>,
}

impl KappaSteps {
    /// `κ = κ1 ∧ κ2 ∧ κ3`, or `None` when all three are censored.
    pub fn kappa(&self) -> Option<usize> {
        [self.kappa1, self.kappa2, self.kappa3].into_iter().flatten().min()
    }
}

/// Incremental evaluation of the escape times along a path started at `Φ_0`.
#[derive(Debug, Clone)]
pub struct KappaTracker {
    start: Vec2,
    delta: f64,
    radius: f64,
    k: usize,
    pub steps: KappaSteps,
}

impl KappaTracker {
    pub fn new(start: Vec2, delta: f64, radius: f64) -> Self {
        let mut t = Self {
            start,
            delta,
            radius,
            k: 0,
            steps: KappaSteps::default(),
        };
        t.observe_at(&start, 0);
        t
    }

    fn observe_at(&mut self, x: &Vec2, k: usize) {
        let r0 = self.start.norm();
        let s = &mut self.steps;
        if s.kappa1.is_none() && v_star().dot(x).abs() >= 2.0 * self.delta * r0 {
            s.kappa1 = Some(k);
        }
        if s.kappa2.is_none() && (x - self.start).norm() >= 0.5 * r0 {
            s.kappa2 = Some(k);
        }
        if s.kappa3.is_none() && x.norm() < self.radius {
            s.kappa3 = Some(k);
        }
    }

    /// Records `Φ_{k+1}` after `Φ_k`.
    pub fn observe(&mut self, x: &Vec2) {
        self.k += 1;
        let k = self.k;
        self.observe_at(x, k);
    }

    pub fn all_hit(&self) -> bool {
        let s = &self.steps;
        s.kappa1.is_some() && s.kappa2.is_some() && s.kappa3.is_some()
    }
}

pub fn kappa_steps(states: &[Vec2], delta: f64, radius: f64) -> KappaSteps {
    let mut it = states.iter();
    let Some(first) = it.next() else {
        return KappaSteps::default();
    };
    let mut tr = KappaTracker::new(*first, delta, radius);
    for x in it {
        tr.observe(x);
    }
    tr.steps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_uses_strict_inequality() {
        let s = [vec2(2.0, 0.0), vec2(1.0, 0.0), vec2(0.9, 0.0)];
        assert_eq!(sigma_index(&s, 0.5), Some(2));
        assert_eq!(sigma_index(&s, 0.4), None);
        assert_eq!(sigma_index(&[], 0.5), None);
    }

    #[test]
    fn kappa_components() {
        let s = [vec2(10.0, 10.0), vec2(10.0, 11.0), vec2(12.0, 5.0), vec2(0.5, 0.5)];
        let k = kappa_steps(&s, 0.1, 1.0);
        // 2δ|Φ0| = 2.83; |⟨v⋆, Φ⟩| = 0.71, 4.95, 0.
        assert_eq!(k.kappa1, Some(2));
        // |Φ0|/2 = 7.07; displacements 1, 5.39, 13.4.
        assert_eq!(k.kappa2, Some(3));
        assert_eq!(k.kappa3, Some(3));
        assert_eq!(k.kappa(), Some(2));
        assert_eq!(kappa_steps(&s[..2], 0.1, 1.0).kappa(), None);
    }

    #[test]
    fn budget() {
        assert_eq!(tau_budget(4.0, 100.0, 0.0), 400.0);
        assert_eq!(tau_budget(1.0, 1000.0, 0.2), (1000f64.powf(1.2)).ceil());
    }
}
