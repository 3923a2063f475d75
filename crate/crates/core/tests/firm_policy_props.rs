mod common;

use common::*;
use proptest::prelude::*;
use stratclass_core::firm_policy::{
    impacts, optimize, optimize_nonstrategic, optimize_strategic, utility_nonstrategic, utility_strategic,
};
use stratclass_core::{ActionProfile, FirmParams, GroupModel, Label, Mode, PolicyResult};

fn configs() -> Vec<GroupModel> {
    let (a, b) = type1_two_group();
    let mut v: Vec<GroupModel> = (1..10).map(|k| type1_single(k as f64 / 10.0)).collect();
    v.extend([a.with_share(1.0).unwrap(), b.with_share(1.0).unwrap(), type3_single(0.3), type3_single(0.7)]);
    v
}

#[test]
fn strategic_optimum_satisfies_the_first_order_condition() {
    let firm = FirmParams::default();
    for g in configs() {
        let r = optimize_strategic(&g, &firm).unwrap();
        if r.boundary {
            continue;
        }
        let res = r.foc_residual.expect("interior optimum has a residual");
        assert!(res.abs() <= 1e-2, "{} alpha {}: residual {res}", g.name, g.alpha);
    }
}

#[test]
fn optima_beat_every_grid_point() {
    let firm = FirmParams::default();
    for g in configs() {
        for mode in [Mode::NonStrategic, Mode::Strategic] {
            let r = optimize(mode, &g, &firm).unwrap();
            let u = |t: f64| match mode {
                Mode::NonStrategic => utility_nonstrategic(t, &g, &firm),
                Mode::Strategic => utility_strategic(t, &g, &firm).unwrap(),
            };
            let best = g.theta_grid().nodes().map(u).fold(f64::NEG_INFINITY, f64::max);
            assert!(r.utility >= best - 1e-9, "{} {mode:?}: {} < {best}", g.alpha, r.utility);
        }
    }
}

#[test]
fn reported_utility_matches_reevaluation() {
    let firm = FirmParams::default();
    for g in configs() {
        for mode in [Mode::NonStrategic, Mode::Strategic] {
            let r = optimize(mode, &g, &firm).unwrap();
            let again = PolicyResult::evaluate(mode, r.theta, &g, &firm).unwrap();
            assert!((again.utility - r.utility).abs() <= 1e-9);
            assert!((again.realized_utility - r.realized_utility).abs() <= 1e-9);
        }
    }
}

#[test]
fn anticipating_firm_raises_threshold_and_utility() {
    let firm = FirmParams::default();
    for k in 1..10 {
        let g = type1_single(k as f64 / 10.0);
        let n = optimize_nonstrategic(&g, &firm).unwrap();
        let s = optimize_strategic(&g, &firm).unwrap();
        assert!(s.theta > n.theta);
        assert!(s.realized_utility >= n.realized_utility);
        assert!(s.alpha_hat >= n.alpha_hat);
    }
}

fn inert() -> ActionProfile {
    ActionProfile::new(1.0, 1.0, uni(0.0, 0.2), uni(0.1, 0.3)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Without unqualified manipulation every remaining strategic term helps
    /// the firm.
    #[test]
    fn strategic_utility_dominates_without_unqualified_manipulation(g in arb_group(), u in 0.0f64..1.0) {
        let g = GroupModel::new(
            "d", 1.0, g.alpha, g.density(Label::Zero).clone(), g.density(Label::One).clone(), inert(),
            g.profile(Label::One).clone(),
        ).unwrap();
        let firm = FirmParams::default();
        let theta = theta_in(&g, u);
        prop_assert_eq!(impacts(theta, &g).unwrap().psi[0], 0.0);
        prop_assert!(utility_strategic(theta, &g, &firm).unwrap() >= utility_nonstrategic(theta, &g, &firm));
    }
}
