#![allow(dead_code)]

use proptest::prelude::*;
use stratclass_core::{ActionProfile, Density1D, GroupModel};

pub fn tn(lo: f64, hi: f64, mean: f64, sd: f64) -> Density1D {
    Density1D::truncated_gaussian(lo, hi, mean, sd).unwrap()
}

pub fn uni(lo: f64, hi: f64) -> Density1D {
    Density1D::uniform(lo, hi).unwrap()
}

/// Single-group truncated-Gaussian configuration with affordable improvement.
pub fn type1_single(alpha: f64) -> GroupModel {
    let p0 = ActionProfile::new(0.1, 0.6, tn(10.0, 50.0, 30.0, 22.0), tn(37.0, 79.0, 58.0, 15.0)).unwrap();
    let p1 = ActionProfile::new(0.1, 0.6, tn(10.0, 50.0, 30.0, 22.0), tn(40.0, 80.0, 60.0, 15.0)).unwrap();
    GroupModel::new("s", 1.0, alpha, tn(20.0, 60.0, 40.0, 15.0), tn(53.0, 113.0, 83.0, 15.0), p0, p1).unwrap()
}

/// Advantaged (`a`, α = 0.7) and disadvantaged (`b`, α = 0.2) groups sharing
/// one type 1 action profile.
pub fn type1_two_group() -> (GroupModel, GroupModel) {
    let m = || tn(20.0, 70.0, 45.0, 22.0);
    let p0 = ActionProfile::new(0.2, 0.3, m(), tn(75.0, 115.0, 95.0, 15.0)).unwrap();
    let p1 = ActionProfile::new(0.2, 0.3, m(), tn(72.0, 118.0, 97.0, 15.0)).unwrap();
    let a = GroupModel::new("a", 0.5, 0.7, tn(20.0, 110.0, 65.0, 15.0), tn(98.0, 188.0, 143.0, 15.0), p0.clone(), p1.clone())
        .unwrap();
    let b = GroupModel::new("b", 0.5, 0.2, tn(0.0, 90.0, 45.0, 15.0), tn(78.0, 168.0, 123.0, 15.0), p0, p1).unwrap();
    (a, b)
}

/// Single-group configuration in which improvement is never chosen.
pub fn type3_single(alpha: f64) -> GroupModel {
    let m = || tn(20.0, 70.0, 45.0, 22.0);
    let p0 = ActionProfile::new(0.2, 0.8, m(), tn(40.0, 82.0, 61.0, 15.0)).unwrap();
    let p1 = ActionProfile::new(0.2, 0.8, m(), tn(42.0, 82.0, 62.0, 15.0)).unwrap();
    GroupModel::new("s", 1.0, alpha, tn(0.0, 90.0, 45.0, 15.0), tn(78.0, 168.0, 123.0, 15.0), p0, p1).unwrap()
}

/// Classifiable profile with uniform or truncated-Gaussian boosts; the
/// improvement law is the manipulation law shifted up by at least zero.
pub fn arb_profile() -> impl Strategy<Value = ActionProfile> {
    (0.0f64..0.15, 0.2f64..0.6, 0.2f64..0.6, 0.0f64..0.4, 0.05f64..0.35, 0.0f64..1.0, any::<bool>()).prop_filter_map(
        "classifiable profile",
        |(lo, w, sdf, d, cm, cf, uniform)| {
            let ci = cm + cf * (0.95 - cm);
            let (m, i) = if uniform {
                (uni(lo, lo + w), uni(lo + d, lo + d + w))
            } else {
                let sd = w * sdf;
                (tn(lo, lo + w, lo + w / 2.0, sd), tn(lo + d, lo + d + w, lo + d + w / 2.0, sd))
            };
            let p = ActionProfile::new(cm, ci, m, i).ok()?;
            p.layout().ok()?;
            Some(p)
        },
    )
}

/// Group with overlapping truncated-Gaussian features of equal spread.
pub fn arb_group() -> impl Strategy<Value = GroupModel> {
    (
        arb_profile(),
        arb_profile(),
        0.05f64..0.95,
        (0.0f64..0.3, 0.4f64..1.0, 0.2f64..0.8, 0.0f64..0.3, 0.1f64..0.4, 0.3f64..0.7, 0.3f64..0.7),
    )
        .prop_filter_map("valid group", |(p0, p1, alpha, (lo0, w0, sf, dw, sd, f0, f1))| {
            let s = w0 * sf;
            let w1 = w0 + dw;
            let mu0 = lo0 + w0 * f0;
            let mu1 = (lo0 + s + w1 * f1).max(mu0 + 0.05);
            let g0 = Density1D::truncated_gaussian(lo0, lo0 + w0, mu0, sd).ok()?;
            let g1 = Density1D::truncated_gaussian(lo0 + s, lo0 + s + w1, mu1, sd).ok()?;
            GroupModel::new("r", 1.0, alpha, g0, g1, p0, p1).ok()
        })
}

/// Threshold between the bottom of `G¹` and just past the top of `G⁰`.
pub fn theta_in(g: &GroupModel, u: f64) -> f64 {
    use stratclass_core::Label;
    let lo = g.density(Label::One).support().lo;
    let hi = g.density(Label::Zero).support().hi + 0.3;
    lo + u * (hi - lo)
}
