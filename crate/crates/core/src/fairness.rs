//! Demographic-parity and equal-opportunity constraints, fairness
//! constrained threshold pairs and ROC points.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::firm_policy::{impacts, utility, FirmParams, Impacts, Mode, PolicyResult, THETA_TOL};
use crate::optim::{bisect, golden_max};
use crate::post_strategic::{GroupModel, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    None,
    /// Equal acceptance rates.
    Dp,
    /// Equal true positive rates.
    Eop,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::None => "none",
            Criterion::Dp => "DP",
            Criterion::Eop => "EOP",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which statistics a rate is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Pre,
    Post,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::Pre => "pre",
            Basis::Post => "post",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FairnessCriterion {
    pub kind: Criterion,
    pub basis: Basis,
}

impl FairnessCriterion {
    /// Criterion on the statistics the firm believes in: post-strategic
    /// for a strategic firm, pre-strategic otherwise.
    pub fn for_mode(kind: Criterion, mode: Mode) -> Self {
        let basis = match mode {
            Mode::Strategic => Basis::Post,
            Mode::NonStrategic => Basis::Pre,
        };
        FairnessCriterion { kind, basis }
    }
}

/// Accepted mass split by final label, per unit group share.
struct Accepted {
    qualified: f64,
    unqualified: f64,
    alpha: f64,
}

fn pre_accepted(theta: f64, group: &GroupModel) -> Accepted {
    Accepted {
        qualified: group.weight(Label::One) * (1.0 - group.density(Label::One).cdf(theta)),
        unqualified: group.weight(Label::Zero) * (1.0 - group.density(Label::Zero).cdf(theta)),
        alpha: group.alpha,
    }
}

fn post_accepted(theta: f64, group: &GroupModel, im: &Impacts) -> Accepted {
    let (w0, w1) = (group.weight(Label::Zero), group.weight(Label::One));
    let tail1 = 1.0 - group.density(Label::One).cdf(theta);
    let tail0 = 1.0 - group.density(Label::Zero).cdf(theta);
    Accepted {
        qualified: w1 * (tail1 + im.psi[1] + im.phi[1]) + w0 * im.phi[0],
        unqualified: w0 * (tail0 + im.psi[0]),
        alpha: im.alpha_hat,
    }
}

fn accepted(theta: f64, group: &GroupModel, basis: Basis, im: Option<&Impacts>) -> Result<Accepted> {
    Ok(match basis {
        Basis::Pre => pre_accepted(theta, group),
        Basis::Post => match im {
            Some(im) => post_accepted(theta, group, im),
            None => post_accepted(theta, group, &impacts(theta, group)?),
        },
    })
}

fn value_of(kind: Criterion, acc: &Accepted) -> Result<f64> {
    match kind {
        Criterion::None => Ok(0.0),
        Criterion::Dp => Ok((acc.qualified + acc.unqualified).clamp(0.0, 1.0)),
        Criterion::Eop => {
            if acc.alpha <= 0.0 {
                return Err(Error::Degenerate { reason: "true positive rate of a group without qualified agents" });
            }
            Ok((acc.qualified / acc.alpha).clamp(0.0, 1.0))
        }
    }
}

/// The group's acceptance rate (DP) or true positive rate (EOP) at
/// `theta` on the criterion's basis. `None` criteria evaluate to 0.
pub fn constraint_value(criterion: FairnessCriterion, theta: f64, group: &GroupModel) -> Result<f64> {
    if criterion.kind == Criterion::None {
        return Ok(0.0);
    }
    value_of(criterion.kind, &accepted(theta, group, criterion.basis, None)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub tpr: f64,
    pub fpr: f64,
    pub basis: Basis,
    /// Basis the threshold was chosen against; a label only.
    pub decisions_basis: Basis,
    /// A rate had an empty denominator and was set to 0.
    pub zero_mass: bool,
}

/// True and false positive rates of threshold `theta` on `basis`.
pub fn roc_point(theta: f64, group: &GroupModel, basis: Basis, decisions_basis: Basis) -> Result<RocPoint> {
    let acc = accepted(theta, group, basis, None)?;
    let mut zero_mass = false;
    let mut rate = |num: f64, den: f64| {
        if den <= 0.0 {
            zero_mass = true;
            0.0
        } else {
            (num / den).clamp(0.0, 1.0)
        }
    };
    let tpr = rate(acc.qualified, acc.alpha);
    let fpr = rate(acc.unqualified, 1.0 - acc.alpha);
    Ok(RocPoint { tpr, fpr, basis, decisions_basis, zero_mass })
}

/// Thresholds of two groups under a pairwise fairness constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct FairPair {
    pub criterion: FairnessCriterion,
    pub a: PolicyResult,
    pub b: PolicyResult,
    /// `|C_a(θ_a) − C_b(θ_b)|` on the criterion's basis.
    pub residual: f64,
    /// `U_a′/C_a′ + U_b′/C_b′` by central differences; `None` where a
    /// constraint derivative vanishes.
    pub stationarity: Option<f64>,
}

impl FairPair {
    pub fn total_utility(&self) -> f64 {
        self.a.utility + self.b.utility
    }
}

/// Number of outer θ_a candidates in [`optimize_fair_pair`].
pub const OUTER_POINTS: usize = 1024;

struct Tabulated {
    nodes: Vec<f64>,
    c: Vec<f64>,
    u: Vec<f64>,
}

struct Side<'a> {
    group: &'a GroupModel,
    firm: &'a FirmParams,
    criterion: FairnessCriterion,
    mode: Mode,
}

impl<'a> Side<'a> {
    /// Constraint value and utility at `theta` sharing one impact evaluation.
    fn eval(&self, theta: f64) -> Result<(f64, f64)> {
        if self.criterion.basis == Basis::Pre && self.mode == Mode::NonStrategic {
            let c = value_of(self.criterion.kind, &pre_accepted(theta, self.group))?;
            return Ok((c, utility(self.mode, theta, self.group, self.firm)?));
        }
        let im = impacts(theta, self.group)?;
        let c = value_of(self.criterion.kind, &accepted(theta, self.group, self.criterion.basis, Some(&im))?)?;
        let u = match self.mode {
            Mode::NonStrategic => utility(Mode::NonStrategic, theta, self.group, self.firm)?,
            Mode::Strategic => strategic_utility(theta, self.group, self.firm, &im),
        };
        Ok((c, u))
    }

    fn constraint(&self, theta: f64) -> Result<f64> {
        value_of(self.criterion.kind, &accepted(theta, self.group, self.criterion.basis, None)?)
    }

    fn tabulate(&self, nodes: Vec<f64>) -> Result<Tabulated> {
        let mut c = Vec::with_capacity(nodes.len());
        let mut u = Vec::with_capacity(nodes.len());
        for &t in &nodes {
            let (ci, ui) = self.eval(t)?;
            c.push(ci);
            u.push(ui);
        }
        Ok(Tabulated { nodes, c, u })
    }
}

fn strategic_utility(theta: f64, group: &GroupModel, firm: &FirmParams, im: &Impacts) -> f64 {
    let a = group.alpha;
    let (up, um) = (firm.u_plus, firm.u_minus);
    let tail1 = 1.0 - group.density(Label::One).cdf(theta);
    let tail0 = 1.0 - group.density(Label::Zero).cdf(theta);
    group.share
        * (up * a * (tail1 + im.phi[1] + im.psi[1]) + up * (1.0 - a) * im.phi[0]
            - um * (1.0 - a) * (tail0 + im.psi[0]))
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Best θ_b with `C_b(θ_b) = target`: `exact` bisects on the constraint,
/// otherwise roots are interpolated between tabulated nodes.
fn solve_b(side: &Side<'_>, tab: &Tabulated, target: f64, exact: bool) -> Result<Option<(f64, f64)>> {
    let mut best: Option<(f64, f64)> = None;
    let mut offer = |t: f64, u: f64| {
        if best.map_or(true, |(_, bu)| u > bu) {
            best = Some((t, u));
        }
    };
    let n = tab.nodes.len();
    for k in 0..n {
        let dk = tab.c[k] - target;
        if dk == 0.0 {
            offer(tab.nodes[k], tab.u[k]);
            continue;
        }
        if k + 1 < n {
            let dn = tab.c[k + 1] - target;
            if dn != 0.0 && (dk < 0.0) != (dn < 0.0) {
                let (lo, hi) = (tab.nodes[k], tab.nodes[k + 1]);
                let t = if exact {
                    bisect(|t| side.constraint(t).map_or(f64::NAN, |c| c - target), lo, hi, 1e-10)
                } else {
                    lo + (hi - lo) * dk / (dk - dn)
                };
                let (_, u) = side.eval(t)?;
                offer(t, u);
            }
        }
    }
    Ok(best)
}

fn fd(f: impl Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    let lo = (x - h).max(0.0);
    Ok((f(x + h)? - f(lo)?) / (x + h - lo))
}

fn stationarity(sa: &Side<'_>, sb: &Side<'_>, ta: f64, tb: f64) -> Result<Option<f64>> {
    const H: f64 = 1e-4;
    let ua = fd(|t| sa.eval(t).map(|v| v.1), ta, H)?;
    let ca = fd(|t| sa.constraint(t), ta, H)?;
    let ub = fd(|t| sb.eval(t).map(|v| v.1), tb, H)?;
    let cb = fd(|t| sb.constraint(t), tb, H)?;
    if ca.abs() < 1e-12 || cb.abs() < 1e-12 {
        return Ok(None);
    }
    Ok(Some(ua / ca + ub / cb))
}

/// Points of the constraint manifold: for each θ_a the utility-best θ_b
/// with `C_b(θ_b) = C_a(θ_a)`, or `None` where no such θ_b exists.
pub fn manifold_trace(
    groups: (&GroupModel, &GroupModel),
    firm: &FirmParams,
    criterion: FairnessCriterion,
    mode: Mode,
    thetas_a: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let sa = Side { group: groups.0, firm, criterion, mode };
    let sb = Side { group: groups.1, firm, criterion, mode };
    let tab_b = sb.tabulate(groups.1.theta_grid().nodes().collect())?;
    thetas_a
        .iter()
        .map(|&ta| Ok((ta, solve_b(&sb, &tab_b, sa.constraint(ta)?, true)?.map(|v| v.0))))
        .collect()
}

/// Utility-maximizing pair `(θ_a, θ_b)` with `C_a(θ_a) = C_b(θ_b)`.
///
/// θ_a runs over [`OUTER_POINTS`] points of group a's search domain; for
/// each, θ_b is the best root of `C_b(θ_b) = C_a(θ_a)` over group b's
/// tabulated search grid. The winner is refined by golden-section search
/// with roots found by bisection. The criterion's basis must match the
/// firm: post for a strategic firm, pre for a non-strategic one.
pub fn optimize_fair_pair(
    groups: (&GroupModel, &GroupModel),
    firm: &FirmParams,
    criterion: FairnessCriterion,
    mode: Mode,
) -> Result<FairPair> {
    let (ga, gb) = groups;
    if criterion.kind == Criterion::None {
        let a = crate::firm_policy::optimize(mode, ga, firm)?;
        let b = crate::firm_policy::optimize(mode, gb, firm)?;
        return Ok(FairPair { criterion, a, b, residual: 0.0, stationarity: None });
    }
    if criterion != FairnessCriterion::for_mode(criterion.kind, mode) {
        return Err(Error::InvalidModel { reason: "fairness basis must be post for strategic and pre for non-strategic firms" });
    }
    let sa = Side { group: ga, firm, criterion, mode };
    let sb = Side { group: gb, firm, criterion, mode };
    let tab_b = sb.tabulate(gb.theta_grid().nodes().collect())?;
    let hi_a = ga.search_hi();
    let outer: Vec<f64> = (0..OUTER_POINTS).map(|k| hi_a * k as f64 / (OUTER_POINTS - 1) as f64).collect();
    let tab_a = sa.tabulate(outer)?;

    let mut best: Option<(usize, f64)> = None;
    for k in 0..tab_a.nodes.len() {
        if let Some((_, ub)) = solve_b(&sb, &tab_b, tab_a.c[k], false)? {
            let total = tab_a.u[k] + ub;
            if best.map_or(true, |(_, bt)| total > bt) {
                best = Some((k, total));
            }
        }
    }
    let Some((k, _)) = best else {
        return Err(Error::Infeasible { range_a: range(&tab_a.c), range_b: range(&tab_b.c) });
    };

    let exact_total = |ta: f64| -> Result<Option<(f64, f64)>> {
        let (ca, ua) = sa.eval(ta)?;
        Ok(solve_b(&sb, &tab_b, ca, true)?.map(|(tb, ub)| (tb, ua + ub)))
    };
    let ta0 = tab_a.nodes[k];
    let lo = tab_a.nodes[k.saturating_sub(1)];
    let hi = tab_a.nodes[(k + 1).min(tab_a.nodes.len() - 1)];
    let (ta_ref, _) = golden_max(
        |t| exact_total(t).ok().flatten().map_or(f64::NEG_INFINITY, |v| v.1),
        lo,
        hi,
        THETA_TOL,
    );
    let start = exact_total(ta0)?;
    let refined = exact_total(ta_ref)?;
    let (ta, tb) = match (start, refined) {
        (Some(s), Some(r)) if r.1 >= s.1 => (ta_ref, r.0),
        (Some(s), _) => (ta0, s.0),
        (None, Some(r)) => (ta_ref, r.0),
        (None, None) => return Err(Error::Infeasible { range_a: range(&tab_a.c), range_b: range(&tab_b.c) }),
    };

    let a = PolicyResult::evaluate(mode, ta, ga, firm)?;
    let b = PolicyResult::evaluate(mode, tb, gb, firm)?;
    let residual = (sa.constraint(ta)? - sb.constraint(tb)?).abs();
    let stationarity = stationarity(&sa, &sb, ta, tb)?;
    Ok(FairPair { criterion, a, b, residual, stationarity })
}
