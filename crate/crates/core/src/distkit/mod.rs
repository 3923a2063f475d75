//! Densities on the real line: pdf, cdf, quantiles, sampling,
//! region-restricted convolution and the stochastic-order checks.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{domain, Error, Result};

pub mod normal;
mod quad;

pub use quad::{integrate, Grid, DEFAULT_CELLS};

/// Closed interval `[lo, hi]`, `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SupportInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(domain("interval.hi", hi, "interval needs lo <= hi"));
        }
        Ok(SupportInterval { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedGaussian {
    lo: f64,
    hi: f64,
    mean: f64,
    sd: f64,
    // Standardized bounds; mass is taken on the upper tail when the
    // truncation sits right of the mean, so that neither tail cancels.
    a: f64,
    b: f64,
    upper: bool,
    base: f64,
    norm: f64,
}

impl TruncatedGaussian {
    fn new(lo: f64, hi: f64, mean: f64, sd: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && mean.is_finite()) || !(lo < hi) {
            return Err(domain("truncated-gaussian.upper", hi, "needs finite lower < upper"));
        }
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(domain("truncated-gaussian.stddev", sd, "stddev must be positive"));
        }
        let a = (lo - mean) / sd;
        let b = (hi - mean) / sd;
        let upper = a > 0.0;
        let (base, norm) = if upper {
            let qa = normal::sf(a);
            (qa, qa - normal::sf(b))
        } else {
            let pa = normal::cdf(a);
            (pa, normal::cdf(b) - pa)
        };
        if !(norm > 1e-300) {
            return Err(Error::InvalidModel { reason: "truncation interval carries no gaussian mass" });
        }
        Ok(TruncatedGaussian { lo, hi, mean, sd, a, b, upper, base, norm })
    }

    pub fn params(&self) -> (f64, f64, f64, f64) {
        (self.lo, self.hi, self.mean, self.sd)
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        normal::pdf((x - self.mean) / self.sd) / (self.sd * self.norm)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let z = (x - self.mean) / self.sd;
        let c = if self.upper {
            (self.base - normal::sf(z)) / self.norm
        } else {
            (normal::cdf(z) - self.base) / self.norm
        };
        c.clamp(0.0, 1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        let z = if self.upper {
            -normal::quantile(self.base - p * self.norm)
        } else {
            normal::quantile(self.base + p * self.norm)
        };
        let mut x = (self.mean + self.sd * z.clamp(self.a, self.b)).clamp(self.lo, self.hi);
        for _ in 0..2 {
            let d = self.pdf(x);
            if d <= 0.0 {
                break;
            }
            x = (x - (self.cdf(x) - p) / d).clamp(self.lo, self.hi);
        }
        x
    }

    fn mean(&self) -> f64 {
        self.mean + self.sd * (normal::pdf(self.a) - normal::pdf(self.b)) / self.norm
    }
}

/// Histogram density: constant within bins, linear cdf.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
    cum: Vec<f64>,
}

impl Histogram {
    fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || masses.len() + 1 != edges.len() {
            return Err(Error::InvalidModel { reason: "histogram needs bins + 1 edges" });
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel { reason: "histogram edges must be finite and strictly increasing" });
        }
        if masses.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidModel { reason: "histogram masses must be finite and nonnegative" });
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidModel { reason: "histogram has zero total mass" });
        }
        // Support is trimmed to the bins that carry mass.
        let first = masses.iter().position(|&m| m > 0.0).unwrap_or(0);
        let last = masses.iter().rposition(|&m| m > 0.0).unwrap_or(0);
        let edges = edges[first..=last + 1].to_vec();
        let masses: Vec<f64> = masses[first..=last].iter().map(|m| m / total).collect();
        let mut cum = Vec::with_capacity(edges.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for m in &masses {
            acc += m;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        Ok(Histogram { edges, masses, cum })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn bin(&self, x: f64) -> usize {
        let k = self.edges.partition_point(|&e| e <= x);
        k.saturating_sub(1).min(self.masses.len() - 1)
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.edges[0] || x > *self.edges.last().unwrap() {
            return 0.0;
        }
        let k = self.bin(x);
        self.masses[k] / (self.edges[k + 1] - self.edges[k])
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= *self.edges.last().unwrap() {
            return 1.0;
        }
        let k = self.bin(x);
        let w = self.edges[k + 1] - self.edges[k];
        (self.cum[k] + self.masses[k] * (x - self.edges[k]) / w).min(1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.edges[0];
        }
        // First bin whose upper cumulative mass reaches p; it has positive mass.
        let k = self.cum[1..].partition_point(|&c| c < p).min(self.masses.len() - 1);
        let w = self.edges[k + 1] - self.edges[k];
        let x = self.edges[k] + (p - self.cum[k]) / self.masses[k] * w;
        x.clamp(self.edges[k], self.edges[k + 1])
    }

    fn mean(&self) -> f64 {
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m * 0.5 * (e[0] + e[1]))
            .sum()
    }

    /// Merges each bin narrower than `min_width` into its right neighbour
    /// (the last one into its left neighbour).
    pub fn merge_narrow_bins(&self, min_width: f64) -> Histogram {
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut masses = Vec::with_capacity(self.masses.len());
        edges.push(self.edges[0]);
        let mut pending = 0.0;
        for (k, m) in self.masses.iter().enumerate() {
            pending += m;
            let right = self.edges[k + 1];
            if right - *edges.last().unwrap() >= min_width {
                edges.push(right);
                masses.push(pending);
                pending = 0.0;
            }
        }
        if pending > 0.0 || edges.len() == 1 {
            if masses.is_empty() {
                edges.push(*self.edges.last().unwrap());
                masses.push(pending);
            } else {
                *edges.last_mut().unwrap() = *self.edges.last().unwrap();
                *masses.last_mut().unwrap() += pending;
            }
        }
        Histogram::new(edges, masses).expect("merging preserves histogram validity")
    }
}

/// One-dimensional probability density.
#[derive(Clone, Debug, PartialEq)]
pub enum Density1D {
    TruncatedGaussian(TruncatedGaussian),
    Uniform { lo: f64, hi: f64 },
    Histogram(Histogram),
}

impl Density1D {
    /// Gaussian with mean `mean` and standard deviation `sd` conditioned on `[lo, hi]`.
    pub fn truncated_gaussian(lo: f64, hi: f64, mean: f64, sd: f64) -> Result<Self> {
        TruncatedGaussian::new(lo, hi, mean, sd).map(Density1D::TruncatedGaussian)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || !(lo < hi) {
            return Err(domain("uniform.upper", hi, "needs finite lower < upper"));
        }
        Ok(Density1D::Uniform { lo, hi })
    }

    /// Histogram from bin edges and nonnegative masses. Masses are
    /// normalized to sum to 1 and zero-mass bins at either end are dropped.
    pub fn histogram(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        Histogram::new(edges, masses).map(Density1D::Histogram)
    }

    pub fn support(&self) -> SupportInterval {
        match self {
            Density1D::TruncatedGaussian(t) => SupportInterval { lo: t.lo, hi: t.hi },
            Density1D::Uniform { lo, hi } => SupportInterval { lo: *lo, hi: *hi },
            Density1D::Histogram(h) => SupportInterval { lo: h.edges[0], hi: *h.edges.last().unwrap() },
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Density1D::TruncatedGaussian(t) => t.pdf(x),
            Density1D::Uniform { lo, hi } => {
                if x < *lo || x > *hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Density1D::Histogram(h) => h.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Density1D::TruncatedGaussian(t) => t.cdf(x),
            Density1D::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Density1D::Histogram(h) => h.cdf(x),
        }
    }

    /// Mass of `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn inv_cdf(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain("p", p, "probability must lie in [0, 1]"));
        }
        Ok(self.quantile(p))
    }

    /// [`Density1D::inv_cdf`] for a `p` already known to lie in `[0, 1]`.
    pub(crate) fn quantile(&self, p: f64) -> f64 {
        let s = self.support();
        if p <= 0.0 {
            return s.lo;
        }
        if p >= 1.0 && !matches!(self, Density1D::Histogram(_)) {
            return s.hi;
        }
        match self {
            Density1D::TruncatedGaussian(t) => t.quantile(p),
            Density1D::Uniform { lo, hi } => lo + p * (hi - lo),
            Density1D::Histogram(h) => h.quantile(p),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Density1D::TruncatedGaussian(t) => t.mean(),
            Density1D::Uniform { lo, hi } => 0.5 * (lo + hi),
            Density1D::Histogram(h) => h.mean(),
        }
    }

    /// Inverse-cdf draw.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(unit_uniform(rng))
    }

    /// Points where the pdf may jump.
    pub fn breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Density1D::Histogram(h) => out.extend_from_slice(&h.edges),
            _ => {
                let s = self.support();
                out.push(s.lo);
                out.push(s.hi);
            }
        }
    }
}

/// Uniform draw on `[0, 1)` with 53 random bits.
pub fn unit_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `∫_{z ∈ region} G(z) τ(x − z) dz`.
pub fn convolve_region(g: &Density1D, tau: &Density1D, region: SupportInterval, x: f64, grid: &Grid) -> f64 {
    let gs = g.support();
    let ts = tau.support();
    let a = region.lo.max(gs.lo).max(x - ts.hi);
    let b = region.hi.min(gs.hi).min(x - ts.lo);
    if !(b > a) {
        return 0.0;
    }
    let mut breaks = Vec::new();
    g.breakpoints(&mut breaks);
    let start = breaks.len();
    tau.breakpoints(&mut breaks);
    for t in &mut breaks[start..] {
        *t = x - *t;
    }
    integrate(|z| g.pdf(z) * tau.pdf(x - z), a, b, &breaks, grid.panel())
}

fn union_points(a: &Density1D, b: &Density1D, n_grid: usize) -> impl Iterator<Item = f64> {
    let (sa, sb) = (a.support(), b.support());
    let lo = sa.lo.min(sb.lo);
    let hi = sa.hi.max(sb.hi);
    let n = n_grid.max(2);
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

/// Whether `dominant` first-order stochastically dominates `dominated`:
/// `cdf(dominated) >= cdf(dominant) - 1e-9` on `n_grid` points of the union support.
pub fn check_fosd(dominant: &Density1D, dominated: &Density1D, n_grid: usize) -> bool {
    union_points(dominant, dominated, n_grid).all(|b| dominated.cdf(b) >= dominant.cdf(b) - 1e-9)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlrReport {
    /// `G1/G0` is nondecreasing where `G0 > 0`.
    pub monotone: bool,
    /// Every step of the ratio is a strict increase.
    pub strict: bool,
}

pub fn mlr_report(g1: &Density1D, g0: &Density1D, n_grid: usize) -> MlrReport {
    let mut prev: Option<f64> = None;
    let mut report = MlrReport { monotone: true, strict: true };
    for x in union_points(g1, g0, n_grid) {
        let d0 = g0.pdf(x);
        if d0 <= 0.0 {
            continue;
        }
        let ratio = g1.pdf(x) / d0;
        if let Some(p) = prev {
            let slack = 1e-9 * p.abs().max(1.0);
            if ratio < p - slack {
                report.monotone = false;
            }
            if ratio <= p + slack {
                report.strict = false;
            }
        }
        prev = Some(ratio);
    }
    report
}

/// Whether `G1/G0` is nondecreasing (slack 1e-9) on the grid points where `G0 > 0`.
pub fn check_mlr(g1: &Density1D, g0: &Density1D, n_grid: usize) -> bool {
    mlr_report(g1, g0, n_grid).monotone
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tn(lo: f64, hi: f64, m: f64, s: f64) -> Density1D {
        Density1D::truncated_gaussian(lo, hi, m, s).unwrap()
    }

    // Trapezoid quadrature of an unnormalized gaussian, independent of erf.
    fn trapezoid_gauss_mass(lo: f64, hi: f64, m: f64, s: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let f = |x: f64| libm::exp(-0.5 * ((x - m) / s).powi(2)) / (s * libm::sqrt(2.0 * core::f64::consts::PI));
        let mut acc = 0.5 * (f(lo) + f(hi));
        for k in 1..n {
            acc += f(lo + k as f64 * h);
        }
        acc * h
    }

    #[test]
    fn uniform_basics() {
        let u = Density1D::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.pdf(0.5), 1.0);
        assert_eq!(u.pdf(2.0), 0.0);
        let v = Density1D::uniform(0.1, 0.5).unwrap();
        assert!((v.cdf(0.42) - 0.8).abs() < 1e-12);
        assert!((v.inv_cdf(0.8).unwrap() - 0.42).abs() < 1e-12);
        assert!(v.inv_cdf(1.5).is_err());
    }

    #[test]
    fn truncated_gaussian_density_matches_quadrature_normalizer() {
        let d = tn(20.0, 60.0, 40.0, 15.0);
        let z = trapezoid_gauss_mass(20.0, 60.0, 40.0, 15.0, 200_000);
        let phi40 = 1.0 / (15.0 * libm::sqrt(2.0 * core::f64::consts::PI));
        assert!((d.pdf(40.0) - phi40 / z).abs() < 1e-9);
    }

    #[test]
    fn endpoints_of_every_kind() {
        let ds = [
            tn(20.0, 60.0, 40.0, 15.0),
            tn(53.0, 113.0, 83.0, 15.0),
            tn(0.0, 1.0, 5.0, 0.5),
            Density1D::uniform(0.1, 0.5).unwrap(),
            Density1D::histogram(alloc::vec![0.0, 0.5, 1.0, 2.0], alloc::vec![0.2, 0.3, 0.5]).unwrap(),
        ];
        for d in &ds {
            let s = d.support();
            assert_eq!(d.cdf(s.lo), 0.0);
            assert_eq!(d.cdf(s.hi), 1.0);
            assert_eq!(d.inv_cdf(0.0).unwrap(), s.lo);
            assert_eq!(d.inv_cdf(1.0).unwrap(), s.hi);
        }
    }

    #[test]
    fn far_tail_truncation_is_accurate() {
        let d = tn(0.0, 1.0, 5.0, 0.5);
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let x = d.inv_cdf(p).unwrap();
            assert!((d.cdf(x) - p).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn histogram_pdf_cdf_quantile() {
        let h = Density1D::histogram(alloc::vec![0.0, 1.0, 2.0, 4.0], alloc::vec![1.0, 0.0, 3.0]).unwrap();
        assert_eq!(h.pdf(0.5), 0.25);
        assert_eq!(h.pdf(1.5), 0.0);
        assert!((h.pdf(3.0) - 0.375).abs() < 1e-15);
        assert!((h.cdf(1.5) - 0.25).abs() < 1e-15);
        assert!((h.cdf(3.0) - 0.625).abs() < 1e-15);
        // Smallest x reaching the plateau value is the left end of the plateau.
        assert!((h.inv_cdf(0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!((h.inv_cdf(0.625).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_trims_and_rejects() {
        let h = Density1D::histogram(alloc::vec![0.0, 1.0, 2.0, 3.0], alloc::vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(h.support(), SupportInterval { lo: 1.0, hi: 2.0 });
        assert!(Density1D::histogram(alloc::vec![0.0, 1.0], alloc::vec![0.0]).is_err());
        assert!(Density1D::histogram(alloc::vec![0.0, 0.0, 1.0], alloc::vec![1.0, 1.0]).is_err());
        assert!(Density1D::histogram(alloc::vec![0.0, 1.0, 2.0], alloc::vec![1.0]).is_err());
    }

    #[test]
    fn merge_narrow_bins_conserves_mass() {
        let Density1D::Histogram(h) =
            Density1D::histogram(alloc::vec![0.0, 0.1, 0.15, 1.0, 1.02], alloc::vec![1.0, 1.0, 1.0, 1.0]).unwrap()
        else {
            unreachable!()
        };
        let m = h.merge_narrow_bins(0.2);
        assert!(m.edges().windows(2).all(|w| w[1] - w[0] >= 0.2 - 1e-12) || m.masses().len() == 1);
        assert!((m.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.edges()[0], 0.0);
        assert_eq!(*m.edges().last().unwrap(), 1.02);
    }

    #[test]
    fn sampling_matches_mean_and_cdf() {
        let d = tn(20.0, 60.0, 40.0, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        // Oracle mean by the trapezoid rule on x·pdf.
        let h = 40.0 / 100_000.0;
        let mut qmean = 0.0;
        for k in 0..=100_000 {
            let x = 20.0 + k as f64 * h;
            let w = if k == 0 || k == 100_000 { 0.5 } else { 1.0 };
            qmean += w * x * d.pdf(x) * h;
        }
        let m = xs.iter().sum::<f64>() / n as f64;
        assert!((m - qmean).abs() < 0.1);
        xs.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let c = d.cdf(*x);
            ks = ks.max((c - i as f64 / n as f64).abs()).max((c - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks <= 0.002, "KS distance {ks}");
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(d.sample(&mut a), d.sample(&mut b));
    }

    #[test]
    fn convolution_examples() {
        let grid = Grid::new(0.0, 2.0, 4096).unwrap();
        let g = Density1D::uniform(0.0, 1.0).unwrap();
        let h = grid.step();
        let tau = Density1D::uniform(0.5 - h, 0.5 + h).unwrap();
        let empty = SupportInterval { lo: 0.4, hi: 0.4 };
        assert_eq!(convolve_region(&g, &tau, empty, 0.75, &grid), 0.0);
        let full = SupportInterval { lo: 0.0, hi: 1.0 };
        assert!((convolve_region(&g, &tau, full, 0.75, &grid) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fosd_examples() {
        let i = Density1D::uniform(0.45, 0.85).unwrap();
        let m = Density1D::uniform(0.07, 0.45).unwrap();
        assert!(check_fosd(&i, &i, 100));
        assert!(check_fosd(&i, &m, 100));
        let a = Density1D::uniform(0.0, 1.0).unwrap();
        let b = Density1D::uniform(0.5, 1.5).unwrap();
        assert!(!check_fosd(&a, &b, 100));
    }

    #[test]
    fn mlr_examples() {
        let g0 = tn(0.0, 10.0, 4.0, 1.5);
        let g1 = tn(0.0, 10.0, 6.0, 1.5);
        assert!(check_mlr(&g1, &g0, 500));
        let same = mlr_report(&g0, &g0, 500);
        assert!(same.monotone && !same.strict);
        let u = Density1D::uniform(0.0, 1.0).unwrap();
        let bimodal = Density1D::histogram(
            alloc::vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            alloc::vec![0.4, 0.05, 0.1, 0.05, 0.4],
        )
        .unwrap();
        assert!(!check_mlr(&u, &bimodal, 200));
    }

    fn arb_density() -> impl Strategy<Value = Density1D> {
        prop_oneof![
            (0.0f64..5.0, 0.1f64..5.0, -1.0f64..1.0, 0.05f64..3.0).prop_map(|(lo, w, m, s)| {
                Density1D::truncated_gaussian(lo, lo + w, lo + w * (0.5 + m), s * w).unwrap()
            }),
            (0.0f64..5.0, 0.1f64..5.0).prop_map(|(lo, w)| Density1D::uniform(lo, lo + w).unwrap()),
            (0.0f64..5.0, proptest::collection::vec((0.01f64..1.0, 0.0f64..1.0), 1..12)).prop_filter_map(
                "needs mass",
                |(lo, bins)| {
                    let mut edges = alloc::vec![lo];
                    for (w, _) in &bins {
                        let e = *edges.last().unwrap() + w;
                        edges.push(e);
                    }
                    Density1D::histogram(edges, bins.iter().map(|b| b.1).collect()).ok()
                }
            ),
        ]
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_bounded(d in arb_density(), xs in proptest::collection::vec(-1.0f64..12.0, 2..40)) {
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            let s = d.support();
            prop_assert_eq!(d.cdf(s.lo), 0.0);
            prop_assert_eq!(d.cdf(s.hi), 1.0);
            for w in xs.windows(2) {
                prop_assert!(d.cdf(w[0]) <= d.cdf(w[1]));
            }
        }

        #[test]
        fn quantile_round_trip(d in arb_density()) {
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let x = d.inv_cdf(p).unwrap();
                prop_assert!((d.cdf(x) - p).abs() <= 1e-9, "p={} x={} cdf={}", p, x, d.cdf(x));
            }
        }

        #[test]
        fn convolution_conserves_region_mass(
            g in arb_density(),
            tau in arb_density(),
            (u, v) in (0.0f64..1.0, 0.0f64..1.0),
        ) {
            let gs = g.support();
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            let region = SupportInterval { lo: gs.lo + a * gs.len(), hi: gs.lo + b * gs.len() };
            let ts = tau.support();
            let grid = Grid::new(0.0, gs.hi + ts.hi, 4096).unwrap();
            // Midpoint rule over x on the grid, as used for gridded densities.
            let total: f64 = (0..grid.cells)
                .map(|k| convolve_region(&g, &tau, region, grid.midpoint(k), &grid) * grid.step())
                .sum();
            prop_assert!((total - g.mass(region.lo, region.hi)).abs() <= 1e-3);
        }

        #[test]
        fn fosd_is_antisymmetric(a in arb_density(), b in arb_density()) {
            prop_assert!(check_fosd(&a, &a, 64));
            if check_fosd(&a, &b, 64) && check_fosd(&b, &a, 64) {
                for x in union_points(&a, &b, 64) {
                    prop_assert!((a.cdf(x) - b.cdf(x)).abs() <= 1e-9);
                }
            }
        }
    }
}
