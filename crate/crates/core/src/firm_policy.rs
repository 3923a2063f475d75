//! Firm utilities, the strategic impact integrals Φ (improvement) and Ψ
//! (manipulation), their θ-derivatives and the unconstrained optimizers.

use alloc::vec;
use alloc::vec::Vec;

use crate::agent_response::{Action, EquilibriumType, Layout, ResponsePartition};
use crate::distkit::{convolve_region, integrate, Density1D, Grid, SupportInterval};
use crate::error::{domain, Error, Result};
use crate::optim::{bisect, golden_max};
use crate::post_strategic::{post_alpha, GroupModel, Label};

/// Refinement tolerance of the threshold optimizers.
pub const THETA_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirmParams {
    /// Benefit per accepted qualified agent.
    pub u_plus: f64,
    /// Loss per accepted unqualified agent.
    pub u_minus: f64,
}

impl FirmParams {
    pub fn new(u_plus: f64, u_minus: f64) -> Result<Self> {
        if !(u_plus > 0.0 && u_plus.is_finite()) {
            return Err(domain("u_plus", u_plus, "benefit must be positive"));
        }
        if !(u_minus > 0.0 && u_minus.is_finite()) {
            return Err(domain("u_minus", u_minus, "penalty must be positive"));
        }
        Ok(FirmParams { u_plus, u_minus })
    }
}

impl Default for FirmParams {
    fn default() -> Self {
        FirmParams { u_plus: 1.0, u_minus: 1.0 }
    }
}

/// Whether the firm anticipates the agents' response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    NonStrategic,
    Strategic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NonStrategic => "non-strategic",
            Mode::Strategic => "strategic",
        }
    }
}

/// Utility of a firm that ignores the response: tail masses of the
/// pre-strategic densities above θ.
pub fn utility_nonstrategic(theta: f64, group: &GroupModel, firm: &FirmParams) -> f64 {
    let a = group.alpha;
    let tail1 = 1.0 - group.density(Label::One).cdf(theta);
    let tail0 = 1.0 - group.density(Label::Zero).cdf(theta);
    group.share * (firm.u_plus * a * tail1 - firm.u_minus * (1.0 - a) * tail0)
}

fn acceptance_integral(g: &Density1D, tau: &Density1D, theta: f64, regions: &[SupportInterval], grid: &Grid) -> f64 {
    if regions.is_empty() {
        return 0.0;
    }
    let mut breaks = Vec::new();
    g.breakpoints(&mut breaks);
    let start = breaks.len();
    tau.breakpoints(&mut breaks);
    for t in &mut breaks[start..] {
        *t = theta - *t;
    }
    regions
        .iter()
        .map(|iv| integrate(|z| g.pdf(z) * (1.0 - tau.cdf(theta - z)), iv.lo, iv.hi, &breaks, grid.panel()))
        .sum()
}

/// `Φ^y = ∫_{𝕀^y} G^y(z)(1 − T_I(θ − z)) dz`: mass of label-`y` agents who
/// improve and are accepted.
pub fn phi(theta: f64, group: &GroupModel, y: Label, partition: &ResponsePartition) -> f64 {
    let p = group.profile(y);
    acceptance_integral(group.density(y), p.boost_i(), theta, &partition.intervals(Action::I), group.grid())
}

/// `Ψ^y = ∫_{𝕄^y} G^y(z)(1 − T_M(θ − z)) dz`: mass of label-`y` agents who
/// manipulate and are accepted.
pub fn psi(theta: f64, group: &GroupModel, y: Label, partition: &ResponsePartition) -> f64 {
    let p = group.profile(y);
    acceptance_integral(group.density(y), p.boost_m(), theta, &partition.intervals(Action::M), group.grid())
}

/// Φ and Ψ of both labels at one θ, with the partitions they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Impacts {
    pub phi: [f64; 2],
    pub psi: [f64; 2],
    pub alpha_hat: f64,
    pub partitions: [ResponsePartition; 2],
}

pub fn impacts(theta: f64, group: &GroupModel) -> Result<Impacts> {
    let partitions = group.partitions(theta)?;
    let phi_v = [phi(theta, group, Label::Zero, &partitions[0]), phi(theta, group, Label::One, &partitions[1])];
    let psi_v = [psi(theta, group, Label::Zero, &partitions[0]), psi(theta, group, Label::One, &partitions[1])];
    let alpha_hat = post_alpha(group, &partitions[0]);
    Ok(Impacts { phi: phi_v, psi: psi_v, alpha_hat, partitions })
}

fn strategic_from(theta: f64, group: &GroupModel, firm: &FirmParams, im: &Impacts) -> f64 {
    let a = group.alpha;
    let (up, um) = (firm.u_plus, firm.u_minus);
    let extra = up * a * im.phi[1] + up * (1.0 - a) * im.phi[0] + up * a * im.psi[1] - um * (1.0 - a) * im.psi[0];
    utility_nonstrategic(theta, group, firm) + group.share * extra
}

/// Utility of a firm that anticipates the response: the non-strategic
/// utility plus the Φ/Ψ terms.
pub fn utility_strategic(theta: f64, group: &GroupModel, firm: &FirmParams) -> Result<f64> {
    let im = impacts(theta, group)?;
    Ok(strategic_from(theta, group, firm, &im))
}

pub fn utility(mode: Mode, theta: f64, group: &GroupModel, firm: &FirmParams) -> Result<f64> {
    match mode {
        Mode::NonStrategic => Ok(utility_nonstrategic(theta, group, firm)),
        Mode::Strategic => utility_strategic(theta, group, firm),
    }
}

// Boundary feature moves one-for-one with θ unless clamped at 0.
fn slope(raw: f64) -> f64 {
    if raw > 0.0 {
        1.0
    } else {
        0.0
    }
}

struct DerivCtx<'a> {
    g: &'a Density1D,
    theta: f64,
    part: ResponsePartition,
    cost_m: f64,
    cost_i: f64,
    bm: &'a Density1D,
    bi: &'a Density1D,
    grid: &'a Grid,
}

impl<'a> DerivCtx<'a> {
    fn new(theta: f64, group: &'a GroupModel, y: Label, ty: EquilibriumType) -> Result<Self> {
        let p = group.profile(y);
        let part = crate::agent_response::classify_response(p, theta)?;
        if part.equilibrium_type != ty {
            return Err(Error::TypeMismatch { expected: ty, found: part.equilibrium_type });
        }
        Ok(DerivCtx {
            g: group.density(y),
            theta,
            part,
            cost_m: p.cost_m(),
            cost_i: p.cost_i(),
            bm: p.boost_m(),
            bi: p.boost_i(),
            grid: group.grid(),
        })
    }

    /// `(G ∗ τ)(θ)` restricted to the intervals of action `w`.
    fn conv(&self, w: Action) -> f64 {
        let tau = if w == Action::I { self.bi } else { self.bm };
        self.part.intervals(w).into_iter().map(|iv| convolve_region(self.g, tau, iv, self.theta, self.grid)).sum()
    }

    fn at(&self, x: f64) -> f64 {
        self.g.pdf(x)
    }
}

/// `dΦ^y/dθ` from the type-specific boundary terms.
pub fn phi_prime(theta: f64, group: &GroupModel, y: Label, ty: EquilibriumType) -> Result<f64> {
    let c = DerivCtx::new(theta, group, y, ty)?;
    if c.cost_i >= 1.0 {
        return Ok(0.0);
    }
    let f = &c.part.features;
    let raw = &c.part.raw;
    let flip_raw = raw.flip.unwrap_or(f64::NEG_INFINITY);
    let v = match c.part.layout {
        Layout::One => slope(raw.risk_taker) * c.at(f.risk_taker) - slope(raw.opt_in_i) * c.at(f.opt_in_i) * c.cost_i,
        Layout::OneFlip => {
            slope(flip_raw) * c.at(f.flip) * (1.0 - c.bi.cdf(theta - f.flip))
                - slope(raw.opt_in_i) * c.at(f.opt_in_i) * c.cost_i
        }
        Layout::Two => {
            slope(raw.risk_taker) * c.at(f.risk_taker)
                - slope(flip_raw) * c.at(f.flip) * (1.0 - c.bi.cdf(theta - f.flip))
        }
        Layout::Three => return Ok(0.0),
    };
    Ok(v - c.conv(Action::I))
}

/// `dΨ^y/dθ` from the type-specific boundary terms.
pub fn psi_prime(theta: f64, group: &GroupModel, y: Label, ty: EquilibriumType) -> Result<f64> {
    let c = DerivCtx::new(theta, group, y, ty)?;
    if c.cost_m >= 1.0 {
        return Ok(0.0);
    }
    let f = &c.part.features;
    let raw = &c.part.raw;
    let flip_raw = raw.flip.unwrap_or(f64::NEG_INFINITY);
    let dc = c.cost_i - c.cost_m;
    let top = c.at(theta);
    let v = match c.part.layout {
        Layout::One => top - slope(raw.risk_taker) * c.at(f.risk_taker) * (1.0 - dc),
        Layout::OneFlip => top - slope(flip_raw) * c.at(f.flip) * (1.0 - c.bm.cdf(theta - f.flip)),
        Layout::Two => {
            top + slope(flip_raw) * c.at(f.flip) * (1.0 - c.bm.cdf(theta - f.flip))
                - slope(raw.opt_in_m) * c.at(f.opt_in_m) * c.cost_m
                - slope(raw.risk_taker) * c.at(f.risk_taker) * (1.0 - dc)
        }
        Layout::Three => top - slope(raw.opt_in_m) * c.at(f.opt_in_m) * c.cost_m,
    };
    Ok(v - c.conv(Action::M))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyResult {
    pub mode: Mode,
    pub theta: f64,
    /// The optimized objective at `theta`: pre-strategic utility for a
    /// non-strategic firm, post-strategic utility for a strategic one.
    pub utility: f64,
    /// Post-strategic utility the firm actually obtains at `theta`.
    pub realized_utility: f64,
    /// Φ of labels 0 and 1 at `theta`.
    pub phi: [f64; 2],
    /// Ψ of labels 0 and 1 at `theta`.
    pub psi: [f64; 2],
    pub alpha_hat: f64,
    pub types: [EquilibriumType; 2],
    /// Solution sits at a support endpoint because the optimality
    /// condition has no interior root.
    pub boundary: bool,
    /// Utility is constant over the search domain.
    pub plateau: bool,
    /// Best θ on the search grid.
    pub grid_argmax: f64,
    /// Relative residual of the first-order condition; `None` when the
    /// condition is undefined at `theta`.
    pub foc_residual: Option<f64>,
}

impl PolicyResult {
    pub fn evaluate(mode: Mode, theta: f64, group: &GroupModel, firm: &FirmParams) -> Result<Self> {
        let im = impacts(theta, group)?;
        let strategic = strategic_from(theta, group, firm, &im);
        let utility = match mode {
            Mode::NonStrategic => utility_nonstrategic(theta, group, firm),
            Mode::Strategic => strategic,
        };
        Ok(PolicyResult {
            mode,
            theta,
            utility,
            realized_utility: strategic,
            phi: im.phi,
            psi: im.psi,
            alpha_hat: im.alpha_hat,
            types: [im.partitions[0].equilibrium_type, im.partitions[1].equilibrium_type],
            boundary: false,
            plateau: false,
            grid_argmax: theta,
            foc_residual: None,
        })
    }
}

fn nonstrategic_gap(theta: f64, group: &GroupModel, firm: &FirmParams) -> f64 {
    // Negative derivative of the per-share pre-strategic utility.
    firm.u_minus * (1.0 - group.alpha) * group.density(Label::Zero).pdf(theta)
        - firm.u_plus * group.alpha * group.density(Label::One).pdf(theta)
}

fn grid_argmax<F: FnMut(f64) -> Result<f64>>(grid: &Grid, mut f: F) -> Result<(usize, f64, f64, f64)> {
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut worst = f64::INFINITY;
    for k in 0..=grid.cells {
        let v = f(grid.node(k))?;
        if v > best.1 {
            best = (k, v);
        }
        worst = worst.min(v);
    }
    Ok((best.0, grid.node(best.0), best.1, worst))
}

/// Optimal threshold of a firm that ignores the response.
///
/// The optimum is where `G¹/G⁰` crosses `u₋(1 − α)/(u₊α)`; it is found by
/// bisection on every downward sign change of the utility derivative over
/// the search grid. Without a crossing the endpoint of the relevant
/// support is returned and flagged.
pub fn optimize_nonstrategic(group: &GroupModel, firm: &FirmParams) -> Result<PolicyResult> {
    let grid = group.theta_grid();
    let gap = |t: f64| nonstrategic_gap(t, group, firm);
    let mut candidates: Vec<(f64, bool)> = Vec::new();
    let mut last: Option<(f64, bool)> = None;
    let (mut any_pos, mut any_neg) = (false, false);
    for k in 0..=grid.cells {
        let t = grid.node(k);
        let v = gap(t);
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        any_pos |= pos;
        any_neg |= !pos;
        match last {
            None if !pos => candidates.push((grid.lo, false)),
            Some((pt, true)) if !pos => candidates.push((bisect(gap, pt, t, 1e-12), false)),
            _ => {}
        }
        last = Some((t, pos));
    }
    if !any_neg {
        candidates = vec![(group.density(Label::Zero).support().hi, true)];
    } else if !any_pos {
        candidates = vec![(group.density(Label::One).support().lo, true)];
    }
    let (mut theta, mut boundary, mut best) = (grid.lo, false, f64::NEG_INFINITY);
    for &(t, b) in &candidates {
        let u = utility_nonstrategic(t, group, firm);
        if u > best {
            (theta, boundary, best) = (t, b, u);
        }
    }
    let (_, arg, umax, umin) = grid_argmax(&grid, |t| Ok(utility_nonstrategic(t, group, firm)))?;
    let mut res = PolicyResult::evaluate(Mode::NonStrategic, theta, group, firm)?;
    res.boundary = boundary;
    res.plateau = umax - umin <= 1e-15;
    res.grid_argmax = arg;
    res.foc_residual = nonstrategic_residual(theta, group, firm);
    Ok(res)
}

fn nonstrategic_residual(theta: f64, group: &GroupModel, firm: &FirmParams) -> Option<f64> {
    let a = group.alpha;
    let g0 = group.density(Label::Zero).pdf(theta);
    if a <= 0.0 || a >= 1.0 || g0 <= 0.0 {
        return None;
    }
    let target = firm.u_minus * (1.0 - a) / (firm.u_plus * a);
    Some(group.density(Label::One).pdf(theta) / g0 / target - 1.0)
}

/// Relative residual of the strategic first-order condition at `theta`,
/// evaluated with the derivative forms of the partition types at `theta`.
pub fn strategic_residual(theta: f64, group: &GroupModel, firm: &FirmParams) -> Result<Option<f64>> {
    let a = group.alpha;
    if a <= 0.0 || a >= 1.0 {
        return Ok(None);
    }
    let parts = group.partitions(theta)?;
    let (t0, t1) = (parts[0].equilibrium_type, parts[1].equilibrium_type);
    let num = group.density(Label::One).pdf(theta)
        - phi_prime(theta, group, Label::One, t1)?
        - psi_prime(theta, group, Label::One, t1)?
        - (1.0 - a) / a * phi_prime(theta, group, Label::Zero, t0)?;
    let den = group.density(Label::Zero).pdf(theta) - psi_prime(theta, group, Label::Zero, t0)?;
    if den.abs() <= 1e-300 {
        return Ok(None);
    }
    let target = firm.u_minus * (1.0 - a) / (firm.u_plus * a);
    Ok(Some(num / den / target - 1.0))
}

fn has_affordable_action(group: &GroupModel) -> bool {
    Label::BOTH.iter().any(|&y| group.profile(y).cost_m() < 1.0 || group.profile(y).cost_i() < 1.0)
}

/// Optimal threshold of a firm that anticipates the response: global grid
/// search over `[0, x̄¹ + b̄_max]` refined by golden-section search.
pub fn optimize_strategic(group: &GroupModel, firm: &FirmParams) -> Result<PolicyResult> {
    if !has_affordable_action(group) {
        let mut r = optimize_nonstrategic(group, firm)?;
        r.mode = Mode::Strategic;
        r.utility = r.realized_utility;
        return Ok(r);
    }
    let grid = group.theta_grid();
    let (k, arg, umax, umin) = grid_argmax(&grid, |t| utility_strategic(t, group, firm))?;
    if umax - umin <= 1e-15 {
        let mut r = PolicyResult::evaluate(Mode::Strategic, grid.lo, group, firm)?;
        r.plateau = true;
        r.grid_argmax = grid.lo;
        return Ok(r);
    }
    let lo = grid.node(k.saturating_sub(1));
    let hi = grid.node((k + 1).min(grid.cells));
    let (theta, _) = golden_max(|t| utility_strategic(t, group, firm).unwrap_or(f64::NEG_INFINITY), lo, hi, THETA_TOL);
    let theta = if utility_strategic(theta, group, firm)? >= umax { theta } else { arg };
    let mut r = PolicyResult::evaluate(Mode::Strategic, theta, group, firm)?;
    r.grid_argmax = arg;
    r.foc_residual = strategic_residual(theta, group, firm)?;
    Ok(r)
}

pub fn optimize(mode: Mode, group: &GroupModel, firm: &FirmParams) -> Result<PolicyResult> {
    match mode {
        Mode::NonStrategic => optimize_nonstrategic(group, firm),
        Mode::Strategic => optimize_strategic(group, firm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent_response::ActionProfile;

    fn tn(lo: f64, hi: f64, m: f64, s: f64) -> Density1D {
        Density1D::truncated_gaussian(lo, hi, m, s).unwrap()
    }

    fn uni(lo: f64, hi: f64) -> Density1D {
        Density1D::uniform(lo, hi).unwrap()
    }

    fn type1_group(alpha: f64) -> GroupModel {
        let p0 = ActionProfile::new(0.1, 0.6, tn(10.0, 50.0, 30.0, 22.0), tn(37.0, 79.0, 58.0, 15.0)).unwrap();
        let p1 = ActionProfile::new(0.1, 0.6, tn(10.0, 50.0, 30.0, 22.0), tn(40.0, 80.0, 60.0, 15.0)).unwrap();
        GroupModel::new("s", 1.0, alpha, tn(20.0, 60.0, 40.0, 15.0), tn(53.0, 113.0, 83.0, 15.0), p0, p1).unwrap()
    }

    fn inert_uniform_group(alpha: f64) -> GroupModel {
        let p = ActionProfile::new(1.0, 1.0, uni(0.0, 0.1), uni(0.0, 0.1)).unwrap();
        GroupModel::new("u", 1.0, alpha, uni(0.0, 1.0), uni(0.5, 1.5), p.clone(), p).unwrap()
    }

    #[test]
    fn nonstrategic_utility_examples() {
        let g = inert_uniform_group(0.5);
        let f = FirmParams::default();
        assert!((utility_nonstrategic(0.75, &g, &f) - 0.25).abs() < 1e-12);
        assert_eq!(utility_nonstrategic(2.0, &g, &f), 0.0);
        assert!((utility_nonstrategic(0.0, &g, &f) - 0.0).abs() < 1e-12);
        let g = inert_uniform_group(0.8);
        assert!((utility_nonstrategic(0.0, &g, &f) - (0.8 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn inert_agents_leave_utility_unchanged() {
        let g = inert_uniform_group(0.5);
        let f = FirmParams::default();
        for t in [0.1, 0.6, 0.9, 1.4] {
            assert_eq!(utility_strategic(t, &g, &f).unwrap(), utility_nonstrategic(t, &g, &f));
        }
        let a = optimize_nonstrategic(&g, &f).unwrap();
        let b = optimize_strategic(&g, &f).unwrap();
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn zero_threshold_impacts_vanish() {
        let g = type1_group(0.5);
        let parts = g.partitions(0.0).unwrap();
        for y in Label::BOTH {
            assert_eq!(phi(0.0, &g, y, &parts[y.index()]), 0.0);
            assert_eq!(psi(0.0, &g, y, &parts[y.index()]), 0.0);
            let ty = parts[y.index()].equilibrium_type;
            assert_eq!(phi_prime(0.0, &g, y, ty).unwrap(), 0.0);
            assert_eq!(psi_prime(0.0, &g, y, ty).unwrap(), 0.0);
        }
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let g = type1_group(0.5);
        assert!(matches!(
            phi_prime(60.0, &g, Label::Zero, EquilibriumType::Three),
            Err(Error::TypeMismatch { .. })
        ));
    }

    #[test]
    fn boundary_rates() {
        let f = FirmParams::default();
        let g = type1_group(1.0);
        let r = optimize_nonstrategic(&g, &f).unwrap();
        assert!(r.boundary);
        assert_eq!(r.theta, 53.0);
        let g = type1_group(0.0);
        let r = optimize_nonstrategic(&g, &f).unwrap();
        assert!(r.boundary);
        assert_eq!(r.theta, 60.0);
    }

    #[test]
    fn symmetric_gaussians_split_at_midpoint() {
        let p = ActionProfile::new(0.2, 0.8, tn(20.0, 70.0, 45.0, 22.0), tn(40.0, 82.0, 61.0, 15.0)).unwrap();
        let g = GroupModel::new("sym", 1.0, 0.5, tn(0.0, 200.0, 80.0, 20.0), tn(0.0, 200.0, 120.0, 20.0), p.clone(), p)
            .unwrap();
        let r = optimize_nonstrategic(&g, &FirmParams::default()).unwrap();
        assert!((r.theta - 100.0).abs() < 1e-9);
        assert!((r.grid_argmax - r.theta).abs() <= g.theta_grid().step());
    }

    #[test]
    fn strategic_threshold_exceeds_nonstrategic() {
        let f = FirmParams::default();
        for alpha in [0.3, 0.5, 0.7] {
            let g = type1_group(alpha);
            let n = optimize_nonstrategic(&g, &f).unwrap();
            let s = optimize_strategic(&g, &f).unwrap();
            assert!(s.theta > n.theta, "alpha {alpha}: {} vs {}", s.theta, n.theta);
            assert!(s.realized_utility >= n.realized_utility);
            assert_eq!(s.utility, utility_strategic(s.theta, &g, &f).unwrap());
        }
    }
}
