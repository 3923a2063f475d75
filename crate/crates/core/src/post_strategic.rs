//! Group model and the population statistics after agents respond.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::agent_response::{classify_response, Action, ActionProfile, ResponsePartition};
use crate::distkit::{convolve_region, mlr_report, Density1D, Grid, MlrReport, SupportInterval, DEFAULT_CELLS};
use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Zero, Label::One];

    pub fn index(self) -> usize {
        match self {
            Label::Zero => 0,
            Label::One => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One demographic group: share of the population, qualification rate,
/// label-conditional feature densities and per-label action profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupModel {
    pub name: String,
    pub share: f64,
    pub alpha: f64,
    g: [Density1D; 2],
    profile: [ActionProfile; 2],
    grid: Grid,
    mlr: MlrReport,
    degenerate: Option<Label>,
}

impl GroupModel {
    /// Builds a group on a grid of [`DEFAULT_CELLS`] cells over the
    /// extended domain `[0, x̄ + b̄_max]`. Analytic densities must satisfy
    /// the monotone likelihood ratio property; for histograms a violation
    /// is only recorded (see [`GroupModel::mlr`]).
    pub fn new(
        name: impl Into<String>,
        share: f64,
        alpha: f64,
        g0: Density1D,
        g1: Density1D,
        profile0: ActionProfile,
        profile1: ActionProfile,
    ) -> Result<Self> {
        Self::build(name.into(), share, alpha, [g0, g1], [profile0, profile1], None, DEFAULT_CELLS)
    }

    /// Group in which one label has no members. `alpha` must be 0 (no
    /// qualified agents) or 1 (no unqualified agents); the density of the
    /// empty label is a placeholder that never carries weight.
    pub fn with_empty_label(
        name: impl Into<String>,
        share: f64,
        present: Density1D,
        empty: Label,
        profile0: ActionProfile,
        profile1: ActionProfile,
    ) -> Result<Self> {
        let alpha = match empty {
            Label::One => 0.0,
            Label::Zero => 1.0,
        };
        let g = [present.clone(), present];
        Self::build(name.into(), share, alpha, g, [profile0, profile1], Some(empty), DEFAULT_CELLS)
    }

    fn build(
        name: String,
        share: f64,
        alpha: f64,
        g: [Density1D; 2],
        profile: [ActionProfile; 2],
        degenerate: Option<Label>,
        cells: usize,
    ) -> Result<Self> {
        if !(share > 0.0 && share <= 1.0) {
            return Err(domain("share", share, "share must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(domain("alpha", alpha, "qualification rate must lie in [0, 1]"));
        }
        if g.iter().any(|d| d.support().lo < 0.0) {
            return Err(Error::InvalidModel { reason: "feature densities must live on [0, ∞)" });
        }
        let mlr = if degenerate.is_some() {
            MlrReport { monotone: true, strict: true }
        } else {
            mlr_report(&g[1], &g[0], 2048)
        };
        let analytic = !g.iter().any(|d| matches!(d, Density1D::Histogram(_)));
        if analytic && !mlr.monotone {
            return Err(Error::InvalidModel { reason: "G1/G0 must be nondecreasing (monotone likelihood ratio)" });
        }
        let mut m = GroupModel {
            name,
            share,
            alpha,
            g,
            profile,
            grid: Grid { lo: 0.0, hi: 1.0, cells },
            mlr,
            degenerate,
        };
        m.grid = Grid::new(0.0, m.feature_max() + m.boost_max(), cells)?;
        Ok(m)
    }

    /// Same group on a grid with `cells` cells.
    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        let mut m = self.clone();
        m.grid = Grid::new(m.grid.lo, m.grid.hi, cells)?;
        Ok(m)
    }

    /// Same group with qualification rate `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(domain("alpha", alpha, "qualification rate must lie in [0, 1]"));
        }
        if self.degenerate.is_some() {
            return Err(Error::Degenerate { reason: "a group with an empty label cannot change its qualification rate" });
        }
        let mut m = self.clone();
        m.alpha = alpha;
        Ok(m)
    }

    pub fn with_share(&self, share: f64) -> Result<Self> {
        if !(share > 0.0 && share <= 1.0) {
            return Err(domain("share", share, "share must lie in (0, 1]"));
        }
        let mut m = self.clone();
        m.share = share;
        Ok(m)
    }

    pub fn density(&self, y: Label) -> &Density1D {
        &self.g[y.index()]
    }

    pub fn profile(&self, y: Label) -> &ActionProfile {
        &self.profile[y.index()]
    }

    /// Weight `α` or `1 − α` of a label.
    pub fn weight(&self, y: Label) -> f64 {
        match y {
            Label::Zero => 1.0 - self.alpha,
            Label::One => self.alpha,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mlr(&self) -> MlrReport {
        self.mlr
    }

    pub fn empty_label(&self) -> Option<Label> {
        self.degenerate
    }

    pub fn feature_max(&self) -> f64 {
        self.g[0].support().hi.max(self.g[1].support().hi)
    }

    pub fn boost_max(&self) -> f64 {
        self.profile
            .iter()
            .flat_map(|p| [p.boost_m().support().hi, p.boost_i().support().hi])
            .fold(0.0, f64::max)
    }

    /// Upper end of the threshold search domain, `x̄¹ + b̄_max`; no agent
    /// is accepted above it.
    pub fn search_hi(&self) -> f64 {
        self.g[1].support().hi + self.boost_max()
    }

    /// Grid on `[0, search_hi]` with the group's cell count.
    pub fn theta_grid(&self) -> Grid {
        Grid { lo: 0.0, hi: self.search_hi(), cells: self.grid.cells }
    }

    /// Best-response partitions of both labels at `theta`.
    pub fn partitions(&self, theta: f64) -> Result<[ResponsePartition; 2]> {
        Ok([classify_response(&self.profile[0], theta)?, classify_response(&self.profile[1], theta)?])
    }
}

/// `α̂ = α + (1 − α)·∫_{𝕀⁰} G⁰`.
pub fn post_alpha(group: &GroupModel, partition0: &ResponsePartition) -> f64 {
    let g0 = group.density(Label::Zero);
    let improved: f64 = partition0.intervals(Action::I).iter().map(|iv| g0.mass(iv.lo, iv.hi)).sum();
    (group.alpha + (1.0 - group.alpha) * improved).min(1.0)
}

/// Density stored as per-cell masses on a grid; pdf is constant within a
/// cell and the cdf is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedDensity {
    pub grid: Grid,
    pub masses: Vec<f64>,
}

impl GriddedDensity {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.grid.lo || x > self.grid.hi {
            return 0.0;
        }
        self.masses[self.grid.cell_of(x)] / self.grid.step()
    }

    /// Mass below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.grid.lo {
            return 0.0;
        }
        let k = self.grid.cell_of(x);
        let below: f64 = self.masses[..k].iter().sum();
        let frac = ((x - self.grid.node(k)) / self.grid.step()).clamp(0.0, 1.0);
        below + frac * self.masses[k]
    }

    /// Cumulative masses at the grid nodes, starting with 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.masses.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for m in &self.masses {
            acc += m;
            out.push(acc);
        }
        out
    }

    /// Pre-strategic density gridded with exact cell masses.
    pub fn from_density(d: &Density1D, grid: Grid) -> Self {
        let masses = (0..grid.cells).map(|k| d.mass(grid.node(k), grid.node(k + 1))).collect();
        GriddedDensity { grid, masses }
    }
}

/// A post-strategic density, or the marker for a label with no members left.
#[derive(Clone, Debug, PartialEq)]
pub enum PostDensity {
    Gridded(GriddedDensity),
    ZeroMass,
}

impl PostDensity {
    pub fn gridded(&self) -> Option<&GriddedDensity> {
        match self {
            PostDensity::Gridded(g) => Some(g),
            PostDensity::ZeroMass => None,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.gridded().map_or(0.0, GriddedDensity::total_mass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostStrategicStats {
    pub alpha_hat: f64,
    pub g0_hat: PostDensity,
    pub g1_hat: PostDensity,
    /// Partitions of labels 0 and 1.
    pub partitions: [ResponsePartition; 2],
}

fn add_region_mass(out: &mut [f64], g: &Density1D, iv: SupportInterval, grid: &Grid, scale: f64) {
    if !(iv.hi > iv.lo) {
        return;
    }
    let (k0, k1) = (grid.cell_of(iv.lo), grid.cell_of(iv.hi));
    for (k, slot) in out.iter_mut().enumerate().take(k1 + 1).skip(k0) {
        let a = iv.lo.max(grid.node(k));
        let b = iv.hi.min(grid.node(k + 1));
        *slot += scale * g.mass(a, b);
    }
}

fn add_convolution(out: &mut [f64], g: &Density1D, tau: &Density1D, iv: SupportInterval, grid: &Grid, scale: f64) {
    if !(iv.hi > iv.lo) || scale == 0.0 {
        return;
    }
    let ts = tau.support();
    let (k0, k1) = (grid.cell_of(iv.lo + ts.lo), grid.cell_of(iv.hi + ts.hi));
    let h = grid.step();
    for (k, slot) in out.iter_mut().enumerate().take(k1 + 1).skip(k0) {
        *slot += scale * h * convolve_region(g, tau, iv, grid.midpoint(k), grid);
    }
}

/// Unnormalized post-strategic masses of label `y` agents (weighted by the
/// label share) split by the label they end with.
fn label_contributions(group: &GroupModel, y: Label, part: &ResponsePartition, to0: &mut [f64], to1: &mut [f64]) {
    let grid = group.grid();
    let g = group.density(y);
    let p = group.profile(y);
    let w = group.weight(y);
    if w == 0.0 {
        return;
    }
    let keep = if y == Label::One { &mut *to1 } else { &mut *to0 };
    for iv in part.intervals(Action::N) {
        add_region_mass(keep, g, iv, grid, w);
    }
    add_region_mass(keep, g, SupportInterval { lo: part.theta, hi: grid.hi }, grid, w);
    for iv in part.intervals(Action::M) {
        add_convolution(keep, g, p.boost_m(), iv, grid, w);
    }
    for iv in part.intervals(Action::I) {
        add_convolution(to1, g, p.boost_i(), iv, grid, w);
    }
}

/// Post-strategic qualification rate and gridded label densities at `theta`.
pub fn post_densities(group: &GroupModel, theta: f64) -> Result<PostStrategicStats> {
    let partitions = group.partitions(theta)?;
    let alpha_hat = post_alpha(group, &partitions[0]);
    if alpha_hat <= 0.0 {
        return Err(Error::Degenerate { reason: "no qualified agents before or after the response" });
    }
    let grid = *group.grid();
    let mut m0 = vec![0.0; grid.cells];
    let mut m1 = vec![0.0; grid.cells];
    for y in Label::BOTH {
        label_contributions(group, y, &partitions[y.index()], &mut m0, &mut m1);
    }
    let g0_hat = if alpha_hat >= 1.0 {
        PostDensity::ZeroMass
    } else {
        let s = 1.0 / (1.0 - alpha_hat);
        PostDensity::Gridded(GriddedDensity { grid, masses: m0.iter().map(|m| m * s).collect() })
    };
    let s = 1.0 / alpha_hat;
    let g1_hat = PostDensity::Gridded(GriddedDensity { grid, masses: m1.iter().map(|m| m * s).collect() });
    Ok(PostStrategicStats { alpha_hat, g0_hat, g1_hat, partitions })
}
