//! Brute-force Monte-Carlo simulation of one group's agents facing a
//! threshold, used as an independent check of the analytic statistics.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent_response::{best_response, Action};
use crate::distkit::Grid;
use crate::error::{domain, Result};
use crate::firm_policy::FirmParams;
use crate::post_strategic::{GriddedDensity, GroupModel, Label};

/// Stream of the boost draws; the population uses stream 0 of the same seed.
const BOOST_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimAgent {
    pub x: f64,
    pub y: Label,
    /// Index of the agent's group in the caller's group list.
    pub group: usize,
    /// `None` until the agent has played a round.
    pub action: Option<Action>,
    pub x_post: f64,
    pub y_post: Label,
    pub accepted: bool,
}

/// Sample mean with its normal-approximation standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            s += v;
            s2 += v * v;
        }
        if n == 0 {
            return Estimate { mean: 0.0, se: 0.0, n };
        }
        let mean = s / n as f64;
        let var = if n > 1 { ((s2 - n as f64 * mean * mean) / (n - 1) as f64).max(0.0) } else { 0.0 };
        Estimate { mean, se: libm::sqrt(var / n as f64), n }
    }

    pub fn from_bools(values: impl Iterator<Item = bool>) -> Self {
        Self::from_values(values.map(|b| if b { 1.0 } else { 0.0 }))
    }

    /// Whether `value` lies within `k` standard errors, with `floor` guarding
    /// a zero standard error.
    pub fn agrees(&self, value: f64, k: f64, floor: f64) -> bool {
        (self.mean - value).abs() <= k * self.se.max(floor)
    }
}

/// `round(α·n)` label-1 agents drawn from `G¹` followed by label-0 agents
/// drawn from `G⁰`.
pub fn simulate_population(group: &GroupModel, group_index: usize, n: usize, seed: u64) -> Result<Vec<SimAgent>> {
    if n == 0 {
        return Err(domain("n", 0.0, "population must have at least one agent"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = libm::round(group.alpha * n as f64) as usize;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let y = if k < n1 { Label::One } else { Label::Zero };
        let x = group.density(y).sample(&mut rng);
        out.push(SimAgent { x, y, group: group_index, action: None, x_post: x, y_post: y, accepted: false });
    }
    Ok(out)
}

/// Every agent plays its best response to `theta`; acting agents draw one
/// boost from their action's law.
pub fn run_round(agents: &[SimAgent], theta: f64, group: &GroupModel, seed: u64) -> Result<Vec<SimAgent>> {
    let parts = group.partitions(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BOOST_STREAM);
    let mut out = Vec::with_capacity(agents.len());
    for a in agents {
        let w = best_response(a.x, &parts[a.y.index()])?;
        let mut next = SimAgent { action: Some(w), x_post: a.x, y_post: a.y, ..*a };
        if let Some(tau) = group.profile(a.y).boost(w) {
            next.x_post = a.x + tau.sample(&mut rng);
        }
        if w == Action::I {
            next.y_post = Label::One;
        }
        next.accepted = next.x_post >= theta;
        out.push(next);
    }
    Ok(out)
}

/// Realized per-agent firm utility, scaled by the group share.
pub fn empirical_utility(agents: &[SimAgent], firm: &FirmParams, share: f64) -> Estimate {
    let e = Estimate::from_values(agents.iter().map(|a| match (a.accepted, a.y_post) {
        (false, _) => 0.0,
        (true, Label::One) => firm.u_plus,
        (true, Label::Zero) => -firm.u_minus,
    }));
    Estimate { mean: share * e.mean, se: share * e.se, n: e.n }
}

/// Empirical qualification rate and per-label cell masses of `x_post`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPostStats {
    pub alpha_hat: Estimate,
    pub grid: Grid,
    /// Normalized cell masses of label-0 agents; all zero if there are none.
    pub hist0: Vec<f64>,
    pub hist1: Vec<f64>,
}

pub fn empirical_post_stats(agents: &[SimAgent], grid: Grid) -> EmpiricalPostStats {
    let alpha_hat = Estimate::from_bools(agents.iter().map(|a| a.y_post == Label::One));
    let mut h = [vec![0.0; grid.cells], vec![0.0; grid.cells]];
    let mut counts = [0usize; 2];
    for a in agents {
        let i = a.y_post.index();
        h[i][grid.cell_of(a.x_post)] += 1.0;
        counts[i] += 1;
    }
    for (hist, &c) in h.iter_mut().zip(&counts) {
        if c > 0 {
            hist.iter_mut().for_each(|m| *m /= c as f64);
        }
    }
    let [hist0, hist1] = h;
    EmpiricalPostStats { alpha_hat, grid, hist0, hist1 }
}

/// Largest gap between the cumulative masses of an empirical histogram and
/// a gridded density at the grid nodes.
pub fn cdf_sup_distance(hist: &[f64], density: &GriddedDensity) -> f64 {
    let (mut a, mut b, mut worst) = (0.0f64, 0.0f64, 0.0f64);
    for (h, m) in hist.iter().zip(&density.masses) {
        a += h;
        b += m;
        worst = worst.max((a - b).abs());
    }
    worst
}

/// Empirical Φ^y and Ψ^y: fraction of label-`y` agents who improved
/// (manipulated) and were accepted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalImpacts {
    pub phi: [Estimate; 2],
    pub psi: [Estimate; 2],
}

pub fn empirical_impacts(agents: &[SimAgent]) -> EmpiricalImpacts {
    let rate = |y: Label, w: Action| {
        Estimate::from_bools(agents.iter().filter(|a| a.y == y).map(|a| a.accepted && a.action == Some(w)))
    };
    EmpiricalImpacts {
        phi: [rate(Label::Zero, Action::I), rate(Label::One, Action::I)],
        psi: [rate(Label::Zero, Action::M), rate(Label::One, Action::M)],
    }
}

/// Fraction of all agents that took action `w`.
pub fn action_share(agents: &[SimAgent], w: Action) -> Estimate {
    Estimate::from_bools(agents.iter().map(|a| a.action == Some(w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_response::ActionProfile;
    use crate::distkit::Density1D;

    fn uni(lo: f64, hi: f64) -> Density1D {
        Density1D::uniform(lo, hi).unwrap()
    }

    fn group(alpha: f64, cost_m: f64, cost_i: f64) -> GroupModel {
        let p = ActionProfile::new(cost_m, cost_i, uni(0.0, 0.2), uni(0.1, 0.4)).unwrap();
        GroupModel::new("g", 1.0, alpha, uni(0.0, 1.0), uni(0.5, 1.5), p.clone(), p).unwrap()
    }

    #[test]
    fn label_counts() {
        let g = group(0.338, 0.1, 0.3);
        let pop = simulate_population(&g, 0, 1000, 7).unwrap();
        assert_eq!(pop.iter().filter(|a| a.y == Label::One).count(), 338);
        let g = group(1.0, 0.1, 0.3);
        let pop = simulate_population(&g, 0, 100, 7).unwrap();
        assert!(pop.iter().all(|a| a.y == Label::One));
        assert!(simulate_population(&g, 0, 0, 7).is_err());
    }

    #[test]
    fn zero_threshold_accepts_everyone() {
        let g = group(0.5, 0.1, 0.3);
        let pop = simulate_population(&g, 0, 500, 1).unwrap();
        let r = run_round(&pop, 0.0, &g, 1).unwrap();
        assert!(r.iter().all(|a| a.action == Some(Action::N) && a.accepted));
    }

    #[test]
    fn expensive_actions_are_never_taken() {
        let g = group(0.5, 1.0, 1.0);
        let pop = simulate_population(&g, 0, 500, 2).unwrap();
        let r = run_round(&pop, 0.9, &g, 2).unwrap();
        assert!(r.iter().all(|a| a.action == Some(Action::N) && a.accepted == (a.x >= 0.9)));
    }

    #[test]
    fn deterministic_and_monotone() {
        let g = group(0.5, 0.1, 0.3);
        let pop = simulate_population(&g, 0, 2000, 3).unwrap();
        let r1 = run_round(&pop, 0.8, &g, 3).unwrap();
        let r2 = run_round(&simulate_population(&g, 0, 2000, 3).unwrap(), 0.8, &g, 3).unwrap();
        assert_eq!(r1, r2);
        for a in &r1 {
            assert!(a.x_post >= a.x);
            assert!(a.y_post >= a.y);
            if a.action == Some(Action::I) {
                assert_eq!(a.y_post, Label::One);
            }
        }
    }

    #[test]
    fn utility_examples() {
        let f = FirmParams::default();
        let g = group(1.0, 0.1, 0.3);
        let pop = simulate_population(&g, 0, 100, 4).unwrap();
        let r = run_round(&pop, 5.0, &g, 4).unwrap();
        assert_eq!(empirical_utility(&r, &f, 0.5).mean, 0.0);
        let r = run_round(&pop, 0.0, &g, 4).unwrap();
        assert_eq!(empirical_utility(&r, &f, 0.5).mean, 0.5);
    }

    #[test]
    fn no_improvers_keep_label_mean() {
        let g = group(0.3, 1.0, 1.0);
        let pop = simulate_population(&g, 0, 1000, 5).unwrap();
        let r = run_round(&pop, 0.7, &g, 5).unwrap();
        let s = empirical_post_stats(&r, *g.grid());
        assert_eq!(s.alpha_hat.mean, 0.3);
        assert!((s.hist0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_standard_error() {
        let e = Estimate::from_bools([true, false, true, false].into_iter());
        assert_eq!(e.mean, 0.5);
        assert!((e.se - libm::sqrt(1.0 / 3.0 / 4.0)).abs() < 1e-12);
    }
}
