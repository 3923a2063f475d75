use alloc::vec::Vec;

use crate::error::{domain, Result};

/// Uniform partition of `[lo, hi]` into `cells` cells.
///
/// The grid fixes three things at once: the θ search resolution, the cell
/// layout of gridded densities, and the widest quadrature panel
/// ([`Grid::panel`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

pub const DEFAULT_CELLS: usize = 4096;

/// Quadrature panels span this many grid cells.
const PANEL_CELLS: f64 = 16.0;

impl Grid {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(domain("grid.hi", hi, "grid needs finite lo < hi"));
        }
        if cells == 0 {
            return Err(domain("grid.cells", 0.0, "grid needs at least one cell"));
        }
        Ok(Grid { lo, hi, cells })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    /// `k`-th cell edge, `k` in `0..=cells`.
    pub fn node(&self, k: usize) -> f64 {
        if k == self.cells {
            self.hi
        } else {
            self.lo + k as f64 * self.step()
        }
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.step()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cells).map(move |k| self.node(k))
    }

    /// Cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let k = libm::floor((x - self.lo) / self.step());
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.cells - 1)
        }
    }

    pub fn panel(&self) -> f64 {
        PANEL_CELLS * self.step()
    }
}

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        s += w * (f(c - h * x) + f(c + h * x));
    }
    s * h
}

/// Composite 8-point Gauss–Legendre integral of `f` over `[a, b]`.
///
/// `breaks` lists points where `f` or its derivative may jump; each piece
/// between consecutive breaks is split into panels no wider than
/// `max_panel`. Returns 0 when `b <= a`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], max_panel: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let len = hi - lo;
        let panels = libm::ceil(len / max_panel).max(1.0) as usize;
        let step = len / panels as f64;
        for p in 0..panels {
            let pa = lo + p as f64 * step;
            let pb = if p + 1 == panels { hi } else { pa + step };
            total += gauss_legendre(&f, pa, pb);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(7) - 3.0 * x.powi(2), -1.0, 2.0, &[], 10.0);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn breaks_capture_kinks() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate(f, 0.0, 1.0, &[0.3], 1.0);
        assert!((v - (0.045 + 0.245)).abs() < 1e-15);
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(0.0, 2.0, 4).unwrap();
        assert_eq!(g.step(), 0.5);
        assert_eq!(g.node(4), 2.0);
        assert_eq!(g.midpoint(1), 0.75);
        assert_eq!(g.cell_of(2.0), 3);
        assert_eq!(g.cell_of(-1.0), 0);
        assert!(Grid::new(1.0, 1.0, 4).is_err());
    }
}
