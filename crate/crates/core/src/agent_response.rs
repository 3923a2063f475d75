//! Indifference features, best-response partitions and per-agent action
//! queries.
//!
//! For an agent at feature `x < θ` the distance to the threshold is
//! `d = θ − x`. Every indifference feature has the form `θ − c` for an
//! offset `c` that depends only on the profile, so the equilibrium type is
//! a property of the profile and is computed once at construction. The
//! features themselves are clamped to `[0, θ]` only when a partition for a
//! concrete θ is built.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::distkit::{check_fosd, Density1D, SupportInterval};
use crate::error::{domain, Error, Result};
use crate::optim::bisect;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    /// Do nothing.
    N,
    /// Manipulate: the feature rises, the label is unchanged.
    M,
    /// Improve: the feature rises and the agent becomes qualified.
    I,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::N => "N",
            Action::M => "M",
            Action::I => "I",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquilibriumType {
    One,
    Two,
    Three,
}

impl EquilibriumType {
    pub fn number(self) -> u8 {
        match self {
            EquilibriumType::One => 1,
            EquilibriumType::Two => 2,
            EquilibriumType::Three => 3,
        }
    }
}

impl fmt::Display for EquilibriumType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Region layout of a partition below θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// `[o_I, r)`: I, `[r, θ)`: M.
    One,
    /// `[o_I, f)`: I, `[f, θ)`: M.
    OneFlip,
    /// `[o_M, f)`: M, `[f, r)`: I, `[r, θ)`: M.
    Two,
    /// `[o_M, θ)`: M.
    Three,
}

impl Layout {
    pub fn equilibrium_type(self) -> EquilibriumType {
        match self {
            Layout::One | Layout::OneFlip => EquilibriumType::One,
            Layout::Two => EquilibriumType::Two,
            Layout::Three => EquilibriumType::Three,
        }
    }
}

const FLIP_SCAN_POINTS: usize = 2048;
const FLIP_TOL: f64 = 1e-10;
const ORDER_TOL: f64 = 1e-9;

/// θ-independent distances `d` at which the agent is indifferent.
#[derive(Clone, Debug, PartialEq)]
struct Offsets {
    // `None` when the action costs at least its maximal benefit.
    afford_m: Option<f64>,
    afford_i: Option<f64>,
    risk: f64,
    flips: Vec<f64>,
}

/// Costs and boost laws of manipulation and improvement for one
/// (group, label). Doing nothing is free and leaves the feature unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionProfile {
    cost_m: f64,
    cost_i: f64,
    boost_m: Density1D,
    boost_i: Density1D,
    offsets: Offsets,
    layout: core::result::Result<Layout, ClassifyFailure>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ClassifyFailure {
    Ambiguous,
    NoRow,
}

impl ActionProfile {
    /// Requires `0 <= cost_m <= cost_i`, boosts supported on `[0, ∞)` and
    /// `boost_i` first-order dominating `boost_m`. A cost of 1 or more makes
    /// the action never worth taking.
    pub fn new(cost_m: f64, cost_i: f64, boost_m: Density1D, boost_i: Density1D) -> Result<Self> {
        if !(cost_m >= 0.0 && cost_m.is_finite()) {
            return Err(domain("cost_m", cost_m, "cost must be finite and nonnegative"));
        }
        if !(cost_i >= cost_m && cost_i.is_finite()) {
            return Err(domain("cost_i", cost_i, "improvement cost must be at least the manipulation cost"));
        }
        if boost_m.support().lo < 0.0 || boost_i.support().lo < 0.0 {
            return Err(Error::InvalidModel { reason: "boosts must be nonnegative" });
        }
        if !check_fosd(&boost_i, &boost_m, 512) {
            return Err(Error::InvalidModel { reason: "improvement boost must dominate manipulation boost" });
        }
        let offsets = offsets(cost_m, cost_i, &boost_m, &boost_i);
        let layout = layout_of(&offsets);
        Ok(ActionProfile { cost_m, cost_i, boost_m, boost_i, offsets, layout })
    }

    pub fn cost(&self, w: Action) -> f64 {
        match w {
            Action::N => 0.0,
            Action::M => self.cost_m,
            Action::I => self.cost_i,
        }
    }

    /// Boost law of `M` or `I`; `None` for `N`.
    pub fn boost(&self, w: Action) -> Option<&Density1D> {
        match w {
            Action::N => None,
            Action::M => Some(&self.boost_m),
            Action::I => Some(&self.boost_i),
        }
    }

    pub fn boost_m(&self) -> &Density1D {
        &self.boost_m
    }

    pub fn boost_i(&self) -> &Density1D {
        &self.boost_i
    }

    pub fn cost_m(&self) -> f64 {
        self.cost_m
    }

    pub fn cost_i(&self) -> f64 {
        self.cost_i
    }

    /// Equilibrium type of this profile; the same for every θ.
    pub fn equilibrium_type(&self) -> Result<EquilibriumType> {
        self.layout_checked(0.0).map(Layout::equilibrium_type)
    }

    pub fn layout(&self) -> Result<Layout> {
        self.layout_checked(0.0)
    }

    fn layout_checked(&self, theta: f64) -> Result<Layout> {
        match self.layout {
            Ok(l) => Ok(l),
            Err(ClassifyFailure::Ambiguous) => {
                Err(Error::FlipAmbiguity { roots: self.offsets.flips.iter().map(|d| theta - d).collect() })
            }
            Err(ClassifyFailure::NoRow) => {
                let f = indifference_features(self, theta).unwrap_or_else(|_| IndifferenceFeatures::zero());
                Err(Error::Unclassifiable {
                    opt_in_m: f.opt_in_m,
                    opt_in_i: f.opt_in_i,
                    flip: f.flip,
                    risk_taker: f.risk_taker,
                })
            }
        }
    }

    fn raw(&self, theta: f64) -> RawFeatures {
        let o = &self.offsets;
        RawFeatures {
            opt_in_m: theta - o.afford_m.unwrap_or(0.0),
            opt_in_i: theta - o.afford_i.unwrap_or(0.0),
            risk_taker: theta - o.risk,
            flip: if o.flips.len() == 1 { Some(theta - o.flips[0]) } else { None },
        }
    }
}

fn offsets(cost_m: f64, cost_i: f64, boost_m: &Density1D, boost_i: &Density1D) -> Offsets {
    let afford = |c: f64, t: &Density1D| if c < 1.0 { Some(t.quantile(1.0 - c)) } else { None };
    let afford_m = afford(cost_m, boost_m);
    let afford_i = afford(cost_i, boost_i);
    let dc = cost_i - cost_m;
    let risk = match afford_m {
        Some(_) => boost_m.quantile(dc.min(1.0 - cost_m)),
        None => 0.0,
    };
    let mut flips = Vec::new();
    if afford_m.is_some() && afford_i.is_some() {
        let lo = boost_i.support().lo;
        let hi = boost_m.support().hi;
        if hi > lo {
            let h = |b: f64| boost_m.cdf(b) - boost_i.cdf(b) - dc;
            let mut last: Option<(f64, bool)> = None;
            for k in 0..FLIP_SCAN_POINTS {
                let b = lo + (hi - lo) * k as f64 / (FLIP_SCAN_POINTS - 1) as f64;
                let v = h(b);
                if v.abs() <= 1e-14 {
                    continue;
                }
                let positive = v > 0.0;
                if let Some((pb, ps)) = last {
                    if ps != positive {
                        flips.push(bisect(h, pb, b, FLIP_TOL));
                    }
                }
                last = Some((b, positive));
            }
        }
    }
    Offsets { afford_m, afford_i, risk, flips }
}

fn layout_of(o: &Offsets) -> core::result::Result<Layout, ClassifyFailure> {
    if o.flips.len() > 1 {
        return Err(ClassifyFailure::Ambiguous);
    }
    // Features relative to θ; a missing flip sits below every feature.
    let om = -o.afford_m.unwrap_or(0.0);
    let oi = -o.afford_i.unwrap_or(0.0);
    let r = -o.risk;
    let f = o.flips.first().map_or(f64::NEG_INFINITY, |d| -d);
    let le = |a: f64, b: f64| a <= b + ORDER_TOL;
    if le(f, oi) && le(oi, om) && le(om, r) {
        Ok(Layout::One)
    } else if le(oi, f) && le(f, om) && le(om, r) {
        Ok(Layout::OneFlip)
    } else if le(oi, om) && le(om, f) && le(f, r) {
        Ok(Layout::OneFlip)
    } else if le(om, oi) && le(oi, f) && le(f, r) {
        Ok(Layout::Two)
    } else if le(f, om) && le(om, oi) {
        Ok(Layout::Three)
    } else {
        Err(ClassifyFailure::NoRow)
    }
}

/// Unclamped indifference features at a given θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawFeatures {
    pub opt_in_m: f64,
    pub opt_in_i: f64,
    pub risk_taker: f64,
    pub flip: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndifferenceFeatures {
    /// Lowest feature at which `M` beats `N`.
    pub opt_in_m: f64,
    /// Lowest feature at which `I` beats `N`.
    pub opt_in_i: f64,
    /// Feature where `M` and `I` give equal utility; 0 without a unique root.
    pub flip: f64,
    /// Lowest feature at which `M` beats an improvement that is certain to pass.
    pub risk_taker: f64,
    /// Every flip root found, unclamped.
    pub flip_roots: Vec<f64>,
}

impl IndifferenceFeatures {
    fn zero() -> Self {
        IndifferenceFeatures { opt_in_m: 0.0, opt_in_i: 0.0, flip: 0.0, risk_taker: 0.0, flip_roots: Vec::new() }
    }
}

/// Indifference features at `theta`, each clamped to `[0, θ]`. An action
/// that is never worth its cost gets the opt-in feature θ.
pub fn indifference_features(profile: &ActionProfile, theta: f64) -> Result<IndifferenceFeatures> {
    if !(theta >= 0.0) {
        return Err(domain("theta", theta, "threshold must be nonnegative"));
    }
    let raw = profile.raw(theta);
    let c = |v: f64| v.clamp(0.0, theta);
    Ok(IndifferenceFeatures {
        opt_in_m: c(raw.opt_in_m),
        opt_in_i: c(raw.opt_in_i),
        flip: raw.flip.map_or(0.0, c),
        risk_taker: c(raw.risk_taker),
        flip_roots: profile.offsets.flips.iter().map(|d| theta - d).collect(),
    })
}

/// `𝓑_w(x) − C_w`, where the benefit is the gain in acceptance probability.
pub fn action_utility(x: f64, w: Action, theta: f64, profile: &ActionProfile) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain("x", x, "features are nonnegative"));
    }
    let benefit = match profile.boost(w) {
        Some(t) if x < theta => 1.0 - t.cdf(theta - x),
        _ => 0.0,
    };
    Ok(benefit - profile.cost(w))
}

/// Half-open range map of best responses at one θ.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponsePartition {
    pub equilibrium_type: EquilibriumType,
    pub layout: Layout,
    /// `(start, action)` pairs; each range runs to the next start and the
    /// last one, `(θ, N)`, to infinity. Starts ascend strictly.
    pub boundaries: Vec<(f64, Action)>,
    pub theta: f64,
    pub features: IndifferenceFeatures,
    pub raw: RawFeatures,
}

impl ResponsePartition {
    /// Intervals below θ on which `w` is played.
    pub fn intervals(&self, w: Action) -> Vec<SupportInterval> {
        let mut out = Vec::new();
        for (k, &(start, a)) in self.boundaries.iter().enumerate() {
            if a != w || start >= self.theta {
                continue;
            }
            let end = self.boundaries.get(k + 1).map_or(self.theta, |b| b.0);
            out.push(SupportInterval { lo: start, hi: end });
        }
        out
    }
}

/// Best-response partition at `theta`.
pub fn classify_response(profile: &ActionProfile, theta: f64) -> Result<ResponsePartition> {
    let features = indifference_features(profile, theta)?;
    let layout = profile.layout_checked(theta)?;
    let raw = profile.raw(theta);
    let flip = raw.flip.unwrap_or(f64::NEG_INFINITY);
    let template: Vec<(f64, Action)> = match layout {
        Layout::One => vec![(0.0, Action::N), (raw.opt_in_i, Action::I), (raw.risk_taker, Action::M)],
        Layout::OneFlip => vec![(0.0, Action::N), (raw.opt_in_i, Action::I), (flip, Action::M)],
        Layout::Two => vec![
            (0.0, Action::N),
            (raw.opt_in_m, Action::M),
            (flip, Action::I),
            (raw.risk_taker, Action::M),
        ],
        Layout::Three => vec![(0.0, Action::N), (raw.opt_in_m, Action::M)],
    };
    let mut starts: Vec<(f64, Action)> = Vec::with_capacity(template.len() + 1);
    let mut floor = 0.0f64;
    for (s, a) in template {
        let s = s.clamp(0.0, theta).max(floor);
        floor = s;
        starts.push((s, a));
    }
    let mut boundaries: Vec<(f64, Action)> = Vec::with_capacity(starts.len() + 1);
    for (k, &(s, a)) in starts.iter().enumerate() {
        let end = starts.get(k + 1).map_or(theta, |n| n.0);
        if end <= s || boundaries.last().map_or(false, |b| b.1 == a) {
            continue;
        }
        boundaries.push((s, a));
    }
    // The accepted range is kept even when it continues an N range.
    boundaries.push((theta, Action::N));
    Ok(ResponsePartition { equilibrium_type: layout.equilibrium_type(), layout, boundaries, theta, features, raw })
}

/// Action of an agent at feature `x`.
pub fn best_response(x: f64, partition: &ResponsePartition) -> Result<Action> {
    if !(x >= 0.0) {
        return Err(domain("x", x, "features are nonnegative"));
    }
    let k = partition.boundaries.partition_point(|b| b.0 <= x);
    Ok(partition.boundaries[k.saturating_sub(1)].1)
}

/// Improvement-cost breakpoints for uniform boosts.
///
/// `C_I <= ceiling1` gives type 1, `ceiling1 < C_I <= ceiling2` type 2 and
/// larger costs type 3. Requires the manipulation span to be at least the
/// improvement span.
pub fn uniform_regime(m: SupportInterval, i: SupportInterval, cost_m: f64) -> Result<(f64, f64)> {
    let (sm, si) = (m.len(), i.len());
    if !(si > 0.0) {
        return Err(domain("boost_i.span", si, "improvement boost needs positive span"));
    }
    if !(sm >= si) {
        return Err(domain("boost_m.span", sm, "manipulation span must be at least the improvement span"));
    }
    let ceiling1 = sm / si * cost_m + (i.hi - m.hi) / si;
    let ceiling2 = cost_m + (i.lo - m.lo) / sm;
    Ok((ceiling1, ceiling2))
}
