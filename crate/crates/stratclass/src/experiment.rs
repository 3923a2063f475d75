//! Experiment drivers: α sweeps with Monte-Carlo replications, fairness
//! comparisons, utility surfaces, ROC points and the oracle agreement
//! suite. Every driver is deterministic given the scenario and seed.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use stratclass_core::fairness::{self, manifold_trace, optimize_fair_pair, roc_point, FairPair};
use stratclass_core::firm_policy::{self, impacts, optimize, PolicyResult};
use stratclass_core::mc_oracle::{
    cdf_sup_distance, empirical_impacts, empirical_post_stats, empirical_utility, run_round, simulate_population,
    Estimate,
};
use stratclass_core::post_strategic::post_densities;
use stratclass_core::{Basis, Criterion, FairnessCriterion, FirmParams, GroupModel, Label, Mode};

use crate::scenario::LoadedScenario;
use crate::ConfigError;

pub const MODES: [Mode; 2] = [Mode::NonStrategic, Mode::Strategic];
pub const CRITERIA: [Criterion; 3] = [Criterion::None, Criterion::Dp, Criterion::Eop];
/// Points per axis of utility surfaces and ROC curves.
pub const SURFACE_POINTS: usize = 200;

/// One row of `policy.csv`. `utility` is the post-strategic utility the
/// firm obtains at `theta`, whichever statistics it optimized against.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyRecord {
    pub scenario_hash: String,
    pub seed: u64,
    pub alpha: f64,
    pub group: String,
    pub mode: &'static str,
    pub fairness: &'static str,
    pub theta: f64,
    pub utility: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub psi0: f64,
    pub psi1: f64,
    pub alpha_hat: f64,
    /// Group the fairness constraint pairs this one with.
    pub counterpart: String,
}

impl PolicyRecord {
    pub fn new(hash: &str, seed: u64, group: &GroupModel, r: &PolicyResult, fairness: Criterion, counterpart: &str) -> Self {
        PolicyRecord {
            scenario_hash: hash.to_string(),
            seed,
            alpha: group.alpha,
            group: group.name.clone(),
            mode: r.mode.name(),
            fairness: fairness.name(),
            theta: r.theta,
            utility: r.realized_utility,
            phi0: r.phi[0],
            phi1: r.phi[1],
            psi0: r.psi[0],
            psi1: r.psi[1],
            alpha_hat: r.alpha_hat,
            counterpart: counterpart.to_string(),
        }
    }
}

/// A sweep point or fairness cell that could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub scenario_hash: String,
    pub alpha: f64,
    pub group: String,
    pub mode: &'static str,
    pub fairness: &'static str,
    pub error: String,
}

/// Empirical outcome of one replication of one policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub scenario_hash: String,
    pub seed: u64,
    pub alpha: f64,
    pub group: String,
    pub mode: &'static str,
    pub replication: usize,
    pub theta: f64,
    pub utility: f64,
    pub alpha_hat: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub psi0: f64,
    pub psi1: f64,
}

/// Replication means with standard errors for one (α, group, mode).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub scenario_hash: String,
    pub seed: u64,
    pub alpha: f64,
    pub group: String,
    pub mode: &'static str,
    pub replications: usize,
    pub theta: f64,
    pub utility_mean: f64,
    pub utility_se: f64,
    pub alpha_hat_mean: f64,
    pub alpha_hat_se: f64,
    pub phi0_mean: f64,
    pub phi0_se: f64,
    pub phi1_mean: f64,
    pub phi1_se: f64,
    pub psi0_mean: f64,
    pub psi0_se: f64,
    pub psi1_mean: f64,
    pub psi1_se: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub policy: Vec<PolicyRecord>,
    pub replications: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRecord>,
    pub failures: Vec<FailureRecord>,
}

/// Seed of replication `rep` at sweep point `point`.
pub fn replication_seed(base: u64, point: usize, rep: usize) -> u64 {
    let mut z = base ^ ((point as u64) << 32) ^ rep as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct PointResult {
    policy: Vec<PolicyRecord>,
    replications: Vec<ReplicationRecord>,
    summary: Vec<SummaryRecord>,
    failures: Vec<FailureRecord>,
}

/// Optimal thresholds of both firm types at every α of the sweep grid and
/// every group, each followed by `replications` simulated populations of
/// `agents` agents facing the two thresholds.
pub fn sweep_alpha(sc: &LoadedScenario) -> Result<SweepOutput, ConfigError> {
    let sweep = sc.scenario.sweep.clone().ok_or_else(|| ConfigError::Missing("sweep block".into()))?;
    let firm = sc.scenario.firm()?;
    let groups = sc.groups(sweep.seed)?;
    let points: Vec<(usize, &GroupModel, f64)> = groups
        .iter()
        .flat_map(|g| sweep.alphas.iter().map(move |&a| (g, a)))
        .enumerate()
        .map(|(i, (g, a))| (i, g, a))
        .collect();
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|&(i, g, a)| sweep_point(sc, &firm, g, a, i, sweep.replications, sweep.agents, sweep.seed))
        .collect();
    let mut out = SweepOutput::default();
    for r in results {
        out.policy.extend(r.policy);
        out.replications.extend(r.replications);
        out.summary.extend(r.summary);
        out.failures.extend(r.failures);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn sweep_point(
    sc: &LoadedScenario,
    firm: &FirmParams,
    base: &GroupModel,
    alpha: f64,
    point: usize,
    reps: usize,
    agents: usize,
    seed: u64,
) -> PointResult {
    let mut res = PointResult { policy: vec![], replications: vec![], summary: vec![], failures: vec![] };
    let fail = |mode: Mode, e: String| FailureRecord {
        scenario_hash: sc.hash.clone(),
        alpha,
        group: base.name.clone(),
        mode: mode.name(),
        fairness: Criterion::None.name(),
        error: e,
    };
    let group = match base.with_alpha(alpha) {
        Ok(g) => g,
        Err(e) => {
            res.failures.push(fail(Mode::NonStrategic, e.to_string()));
            return res;
        }
    };
    let mut policies = Vec::new();
    for mode in MODES {
        match optimize(mode, &group, firm) {
            Ok(p) => {
                res.policy.push(PolicyRecord::new(&sc.hash, seed, &group, &p, Criterion::None, ""));
                policies.push(p);
            }
            Err(e) => res.failures.push(fail(mode, e.to_string())),
        }
    }
    let reps_out: Vec<Result<Vec<ReplicationRecord>, String>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = replication_seed(seed, point, r);
            let pop = simulate_population(&group, 0, agents, s).map_err(|e| e.to_string())?;
            policies
                .iter()
                .map(|p| {
                    let played = run_round(&pop, p.theta, &group, s).map_err(|e| e.to_string())?;
                    let u = empirical_utility(&played, firm, group.share);
                    let post = empirical_post_stats(&played, *group.grid());
                    let im = empirical_impacts(&played);
                    Ok(ReplicationRecord {
                        scenario_hash: sc.hash.clone(),
                        seed: s,
                        alpha,
                        group: group.name.clone(),
                        mode: p.mode.name(),
                        replication: r,
                        theta: p.theta,
                        utility: u.mean,
                        alpha_hat: post.alpha_hat.mean,
                        phi0: im.phi[0].mean,
                        phi1: im.phi[1].mean,
                        psi0: im.psi[0].mean,
                        psi1: im.psi[1].mean,
                    })
                })
                .collect()
        })
        .collect();
    for r in reps_out {
        match r {
            Ok(rows) => res.replications.extend(rows),
            Err(e) => res.failures.push(fail(Mode::NonStrategic, e)),
        }
    }
    for p in &policies {
        let rows: Vec<&ReplicationRecord> = res.replications.iter().filter(|r| r.mode == p.mode.name()).collect();
        let est = |f: fn(&ReplicationRecord) -> f64| Estimate::from_values(rows.iter().map(|r| f(r)));
        let (u, ah, f0, f1, s0, s1) = (
            est(|r| r.utility),
            est(|r| r.alpha_hat),
            est(|r| r.phi0),
            est(|r| r.phi1),
            est(|r| r.psi0),
            est(|r| r.psi1),
        );
        res.summary.push(SummaryRecord {
            scenario_hash: sc.hash.clone(),
            seed,
            alpha,
            group: group.name.clone(),
            mode: p.mode.name(),
            replications: rows.len(),
            theta: p.theta,
            utility_mean: u.mean,
            utility_se: u.se,
            alpha_hat_mean: ah.mean,
            alpha_hat_se: ah.se,
            phi0_mean: f0.mean,
            phi0_se: f0.se,
            phi1_mean: f1.mean,
            phi1_se: f1.se,
            psi0_mean: s0.mean,
            psi0_se: s0.se,
            psi1_mean: s1.mean,
            psi1_se: s1.se,
        });
    }
    res
}

/// Index pairs the pairwise fairness constraint applies to: the two
/// groups, or the reference group with every other group.
pub fn fairness_pairs(sc: &LoadedScenario) -> Result<Vec<(usize, usize)>, ConfigError> {
    let n = sc.scenario.groups.len();
    match n {
        0 | 1 => Err(ConfigError::Invalid("fairness comparisons need at least two groups".into())),
        2 => Ok(vec![(0, 1)]),
        _ => {
            let r = sc
                .scenario
                .fairness
                .reference
                .as_deref()
                .ok_or_else(|| ConfigError::Invalid("more than two groups need fairness.reference".into()))?;
            let ri = sc
                .scenario
                .groups
                .iter()
                .position(|g| g.name == r)
                .ok_or_else(|| ConfigError::Invalid(format!("reference group {r} is not in the scenario")))?;
            Ok((0..n).filter(|&i| i != ri).map(|i| (ri, i)).collect())
        }
    }
}

/// Fair or unfair pair of policies for one (pair, mode, criterion).
#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub groups: (usize, usize),
    pub mode: Mode,
    pub criterion: Criterion,
    pub result: Result<FairPair, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldRecord {
    pub scenario_hash: String,
    pub group_a: String,
    pub group_b: String,
    pub mode: &'static str,
    pub fairness: &'static str,
    pub theta_a: f64,
    /// Empty where the constraint cannot be matched.
    pub theta_b: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct FairnessOutput {
    pub outcomes: Vec<PairOutcome>,
    pub policy: Vec<PolicyRecord>,
    pub manifold: Vec<ManifoldRecord>,
    pub failures: Vec<FailureRecord>,
}

/// Unfair, DP-fair and EOP-fair policies for both firm types and every
/// pair, with constraint-manifold traces on [`SURFACE_POINTS`] values of θ_a.
pub fn fairness_comparison(
    sc: &LoadedScenario,
    groups: &[GroupModel],
    modes: &[Mode],
    criteria: &[Criterion],
    seed: u64,
) -> Result<FairnessOutput, ConfigError> {
    let firm = sc.scenario.firm()?;
    let pairs = fairness_pairs(sc)?;
    let cells: Vec<((usize, usize), Mode, Criterion)> = pairs
        .iter()
        .flat_map(|&p| modes.iter().flat_map(move |&m| criteria.iter().map(move |&c| (p, m, c))))
        .collect();
    let outcomes: Vec<PairOutcome> = cells
        .par_iter()
        .map(|&(p, mode, c)| {
            let result = optimize_fair_pair((&groups[p.0], &groups[p.1]), &firm, FairnessCriterion::for_mode(c, mode), mode)
                .map_err(|e| e.to_string());
            PairOutcome { groups: p, mode, criterion: c, result }
        })
        .collect();
    let manifold: Vec<Vec<ManifoldRecord>> = cells
        .par_iter()
        .filter(|c| c.2 != Criterion::None)
        .map(|&(p, mode, c)| {
            let (ga, gb) = (&groups[p.0], &groups[p.1]);
            let hi = ga.search_hi();
            let ta: Vec<f64> = (0..SURFACE_POINTS).map(|k| hi * k as f64 / (SURFACE_POINTS - 1) as f64).collect();
            manifold_trace((ga, gb), &firm, FairnessCriterion::for_mode(c, mode), mode, &ta)
                .map(|pts| {
                    pts.into_iter()
                        .map(|(theta_a, theta_b)| ManifoldRecord {
                            scenario_hash: sc.hash.clone(),
                            group_a: ga.name.clone(),
                            group_b: gb.name.clone(),
                            mode: mode.name(),
                            fairness: c.name(),
                            theta_a,
                            theta_b,
                        })
                        .collect()
                })
                .unwrap_or_default()
        })
        .collect();
    let mut out = FairnessOutput { manifold: manifold.into_iter().flatten().collect(), ..Default::default() };
    for o in &outcomes {
        let (ga, gb) = (&groups[o.groups.0], &groups[o.groups.1]);
        match &o.result {
            Ok(pair) => {
                out.policy.push(PolicyRecord::new(&sc.hash, seed, ga, &pair.a, o.criterion, &gb.name));
                out.policy.push(PolicyRecord::new(&sc.hash, seed, gb, &pair.b, o.criterion, &ga.name));
            }
            Err(e) => out.failures.push(FailureRecord {
                scenario_hash: sc.hash.clone(),
                alpha: ga.alpha,
                group: format!("{}|{}", ga.name, gb.name),
                mode: o.mode.name(),
                fairness: o.criterion.name(),
                error: e.clone(),
            }),
        }
    }
    out.outcomes = outcomes;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceRecord {
    pub theta_a: f64,
    pub theta_b: f64,
    pub utility: f64,
    pub constraint_a: f64,
    pub constraint_b: f64,
}

fn axis(g: &GroupModel) -> Vec<f64> {
    let hi = g.search_hi();
    (0..SURFACE_POINTS).map(|k| hi * k as f64 / (SURFACE_POINTS - 1) as f64).collect()
}

/// Total utility of the pair and both constraint values on a
/// [`SURFACE_POINTS`]² grid over the two search domains.
pub fn utility_surface(
    groups: (&GroupModel, &GroupModel),
    firm: &FirmParams,
    mode: Mode,
    kind: Criterion,
) -> Result<Vec<SurfaceRecord>, ConfigError> {
    let crit = FairnessCriterion::for_mode(kind, mode);
    let side = |g: &GroupModel| -> Result<Vec<(f64, f64, f64)>, ConfigError> {
        axis(g)
            .into_par_iter()
            .map(|t| {
                let u = firm_policy::utility(mode, t, g, firm)?;
                let c = fairness::constraint_value(crit, t, g)?;
                Ok((t, u, c))
            })
            .collect()
    };
    let (a, b) = (side(groups.0)?, side(groups.1)?);
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(ta, ua, ca) in &a {
        for &(tb, ub, cb) in &b {
            out.push(SurfaceRecord { theta_a: ta, theta_b: tb, utility: ua + ub, constraint_a: ca, constraint_b: cb });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocRecord {
    pub scenario_hash: String,
    pub group: String,
    pub basis: &'static str,
    pub decisions_basis: &'static str,
    pub theta: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Policy whose operating point this is.
    pub fairness: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurveRecord {
    pub scenario_hash: String,
    pub group: String,
    pub basis: &'static str,
    pub theta: f64,
    pub tpr: f64,
    pub fpr: f64,
}

fn decisions_basis(mode: Mode) -> Basis {
    match mode {
        Mode::NonStrategic => Basis::Pre,
        Mode::Strategic => Basis::Post,
    }
}

/// Operating points of every successful policy on both bases. Group `b`
/// at a fixed pair is the counterpart; the reference group's rows appear
/// once per pair.
pub fn roc_rows(sc: &LoadedScenario, groups: &[GroupModel], fair: &FairnessOutput) -> Result<Vec<RocRecord>, ConfigError> {
    let mut out = Vec::new();
    for o in &fair.outcomes {
        let Ok(pair) = &o.result else { continue };
        for (gi, theta) in [(o.groups.0, pair.a.theta), (o.groups.1, pair.b.theta)] {
            for basis in [Basis::Pre, Basis::Post] {
                let p = roc_point(theta, &groups[gi], basis, decisions_basis(o.mode))?;
                out.push(RocRecord {
                    scenario_hash: sc.hash.clone(),
                    group: groups[gi].name.clone(),
                    basis: basis.name(),
                    decisions_basis: p.decisions_basis.name(),
                    theta,
                    tpr: p.tpr,
                    fpr: p.fpr,
                    fairness: o.criterion.name(),
                });
            }
        }
    }
    Ok(out)
}

/// ROC curves of every group on both bases over [`SURFACE_POINTS`] thresholds.
pub fn roc_curves(sc: &LoadedScenario, groups: &[GroupModel]) -> Result<Vec<RocCurveRecord>, ConfigError> {
    let rows: Result<Vec<Vec<RocCurveRecord>>, ConfigError> = groups
        .par_iter()
        .map(|g| {
            let mut v = Vec::new();
            for basis in [Basis::Pre, Basis::Post] {
                for t in axis(g) {
                    let p = roc_point(t, g, basis, basis)?;
                    v.push(RocCurveRecord {
                        scenario_hash: sc.hash.clone(),
                        group: g.name.clone(),
                        basis: basis.name(),
                        theta: t,
                        tpr: p.tpr,
                        fpr: p.fpr,
                    });
                }
            }
            Ok(v)
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// One analytic-versus-simulated comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheck {
    pub group: String,
    pub mode: &'static str,
    pub theta: f64,
    pub statistic: &'static str,
    pub analytic: f64,
    pub empirical: f64,
    /// Allowed `|analytic - empirical|`: `ORACLE_SE` standard errors (at
    /// least `ORACLE_SE / n`), or `SUP_NORM_TOL` for distribution checks.
    pub tolerance: f64,
    pub pass: bool,
}

/// Standard errors allowed between a Monte-Carlo estimate and its analytic value.
pub const ORACLE_SE: f64 = 3.0;

/// Sup-norm tolerance between simulated and analytic post-strategic CDFs.
pub const SUP_NORM_TOL: f64 = 0.05;

/// Compares α̂, Φ, Ψ, utility and the post-strategic CDFs of `group` at
/// `theta` with a simulation of `agents` agents.
pub fn oracle_checks(
    group: &GroupModel,
    firm: &FirmParams,
    mode: Mode,
    theta: f64,
    agents: usize,
    seed: u64,
) -> Result<Vec<OracleCheck>, ConfigError> {
    let pop = simulate_population(group, 0, agents, seed)?;
    let played = run_round(&pop, theta, group, seed)?;
    // The simulated population has exactly round(α·n) qualified agents.
    let n1 = (group.alpha * agents as f64).round() / agents as f64;
    let exact = if n1 == group.alpha { group.clone() } else { group.with_alpha(n1)? };
    let im = impacts(theta, &exact)?;
    let u = firm_policy::utility_strategic(theta, &exact, firm)?;
    let post = post_densities(&exact, theta)?;
    let emp_im = empirical_impacts(&played);
    let emp_post = empirical_post_stats(&played, *group.grid());
    let emp_u = empirical_utility(&played, firm, group.share);
    let floor = 1.0 / agents as f64;
    let mut out = Vec::new();
    let mut push = |statistic, analytic: f64, e: Estimate| {
        out.push(OracleCheck {
            group: group.name.clone(),
            mode: mode.name(),
            theta,
            statistic,
            analytic,
            empirical: e.mean,
            tolerance: ORACLE_SE * e.se.max(floor),
            pass: e.agrees(analytic, ORACLE_SE, floor),
        })
    };
    push("alpha_hat", im.alpha_hat, emp_post.alpha_hat);
    if exact.weight(Label::Zero) > 0.0 {
        push("phi0", im.phi[0], emp_im.phi[0]);
        push("psi0", im.psi[0], emp_im.psi[0]);
    }
    if exact.weight(Label::One) > 0.0 {
        push("phi1", im.phi[1], emp_im.phi[1]);
        push("psi1", im.psi[1], emp_im.psi[1]);
    }
    push("utility", u, emp_u);
    for (name, hist, dens) in [("cdf_sup_g0", &emp_post.hist0, &post.g0_hat), ("cdf_sup_g1", &emp_post.hist1, &post.g1_hat)] {
        if let Some(d) = dens.gridded() {
            if hist.iter().sum::<f64>() > 0.0 {
                let dist = cdf_sup_distance(hist, d);
                out.push(OracleCheck {
                    group: group.name.clone(),
                    mode: mode.name(),
                    theta,
                    statistic: name,
                    analytic: 0.0,
                    empirical: dist,
                    tolerance: SUP_NORM_TOL,
                    pass: dist <= SUP_NORM_TOL,
                });
            }
        }
    }
    Ok(out)
}

/// Serializes `rows` as CSV with a header.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `rows` to `dir/name`, creating the directory.
pub fn write_csv_file<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join(name))?;
    write_csv(rows, std::io::BufWriter::new(f))?;
    Ok(())
}
