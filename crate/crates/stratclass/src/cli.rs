//! `stratclass` command line. Exit codes: 0 success, 1 model, scenario or
//! oracle failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stratclass_core::agent_response::classify_response;
use stratclass_core::fairness::constraint_value;
use stratclass_core::firm_policy::optimize;
use stratclass_core::post_strategic::{post_densities, PostDensity};
use stratclass_core::{Action, Basis, Criterion, FairnessCriterion, GroupModel, Label, Mode};

use crate::experiment::{self, write_csv, write_csv_file, PolicyRecord, MODES};
use crate::scenario::{self, LoadedScenario};

#[derive(Parser, Debug)]
#[command(name = "stratclass", version, about = "Strategic threshold classification with manipulation and improvement")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Seed of every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; CSV goes to stdout when unset.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Built-in scenario name or path to a scenario TOML file.
    #[arg(long)]
    scenario: String,
    /// Qualification rate applied to every group.
    #[arg(long)]
    alpha: Option<f64>,
    /// Restrict to one group.
    #[arg(long)]
    group: Option<String>,
    /// Dotted-path overrides, e.g. `groups.0.alpha=0.3`; applied in order.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    #[value(name = "non-strategic")]
    NonStrategic,
    Strategic,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::NonStrategic => vec![Mode::NonStrategic],
            ModeArg::Strategic => vec![Mode::Strategic],
            ModeArg::Both => MODES.to_vec(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    None,
    #[value(name = "DP", alias = "dp")]
    Dp,
    #[value(name = "EOP", alias = "eop")]
    Eop,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::None => Criterion::None,
            CriterionArg::Dp => Criterion::Dp,
            CriterionArg::Eop => Criterion::Eop,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Print the best-response partition of every group and label at a threshold.
    Respond {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
    },
    /// Print post-strategic qualification rates and density summaries.
    PostStats {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
    },
    /// Optimal unconstrained thresholds; writes policy.csv.
    Optimize {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
    },
    /// Fairness-constrained threshold pairs; writes policy.csv and manifold.csv.
    Fair {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Criterion; unfair, DP and EOP policies when unset.
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
    },
    /// α sweep with replications; writes policy.csv, replications.csv and sweep_summary.csv.
    Sweep {
        #[command(flatten)]
        sc: ScenarioArgs,
    },
    /// Utility and constraint surface of a two-group pair; writes surface.csv.
    Surface {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, value_enum, default_value = "strategic")]
        mode: ModeArg,
        /// Constraint reported next to the utility; the scenario's, or DP.
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
    },
    /// Policy operating points and ROC curves; writes roc.csv and roc_curve.csv.
    Roc {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
    },
    /// Monte-Carlo agreement suite at both optimal thresholds (or `--theta`).
    Oracle {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, allow_negative_numbers = true)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        agents: usize,
    },
    /// List the built-in scenarios.
    Scenarios,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Runs with output captured in `out`; returns `Ok(false)` when an oracle
/// check fails.
pub fn run_captured<I, T>(argv: I, out: &mut dyn Write) -> anyhow::Result<bool>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    execute(&cli, out)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<bool> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            b = b.num_threads(n);
        }
        b.build()?
    };
    let mut buf = Vec::new();
    let res = pool.install(|| dispatch(cli, &mut buf));
    out.write_all(&buf)?;
    res
}

struct Ctx {
    sc: LoadedScenario,
    groups: Vec<GroupModel>,
}

fn prepare(args: &ScenarioArgs, seed: u64) -> anyhow::Result<Ctx> {
    let mut overrides = Vec::new();
    if let Some(a) = args.alpha {
        let base = scenario::load(&args.scenario, &[])?;
        for i in 0..base.scenario.groups.len() {
            overrides.push(format!("groups.{i}.alpha={a}"));
        }
    }
    overrides.extend(args.overrides.iter().cloned());
    let sc = scenario::load(&args.scenario, &overrides)?;
    let mut groups = sc.groups(seed)?;
    if let Some(name) = &args.group {
        groups.retain(|g| &g.name == name);
        if groups.is_empty() {
            bail!("scenario {} has no group {name}", sc.scenario.name);
        }
    }
    Ok(Ctx { sc, groups })
}

fn emit<T: Serialize>(cli: &Cli, name: &str, rows: &[T], out: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.out {
        Some(dir) => write_csv_file(dir, name, rows),
        None => Ok(write_csv(rows, out)?),
    }
}

/// Side files are written only under `--out` and only when they have rows.
fn emit_file<T: Serialize>(dir: Option<&Path>, name: &str, rows: &[T]) -> anyhow::Result<()> {
    match dir {
        Some(d) if !rows.is_empty() => write_csv_file(d, name, rows),
        _ => Ok(()),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<bool> {
    match &cli.verb {
        Verb::Scenarios => {
            for name in scenario::builtin_names() {
                let s = scenario::load(name, &[])?;
                writeln!(out, "{name}\t{}", s.scenario.description)?;
            }
        }
        Verb::Respond { sc, theta } => {
            let ctx = prepare(sc, cli.seed)?;
            respond(&ctx, *theta, out)?;
        }
        Verb::PostStats { sc, theta } => {
            let ctx = prepare(sc, cli.seed)?;
            post_stats(&ctx, *theta, out)?;
        }
        Verb::Optimize { sc, mode } => {
            let ctx = prepare(sc, cli.seed)?;
            let firm = ctx.sc.scenario.firm()?;
            let mut rows = Vec::new();
            for g in &ctx.groups {
                for m in mode.modes() {
                    let r = optimize(m, g, &firm).with_context(|| format!("group {} {}", g.name, m.name()))?;
                    rows.push(PolicyRecord::new(&ctx.sc.hash, cli.seed, g, &r, Criterion::None, ""));
                }
            }
            emit(cli, "policy.csv", &rows, out)?;
        }
        Verb::Fair { sc, mode, criterion } => {
            let ctx = prepare(sc, cli.seed)?;
            let criteria: Vec<Criterion> = match criterion {
                Some(c) => vec![Criterion::None, (*c).into()],
                None => experiment::CRITERIA.to_vec(),
            };
            let fair = experiment::fairness_comparison(&ctx.sc, &ctx.groups, &mode.modes(), &criteria, cli.seed)?;
            emit(cli, "policy.csv", &fair.policy, out)?;
            emit_file(cli.out.as_deref(), "manifold.csv", &fair.manifold)?;
            emit_file(cli.out.as_deref(), "failures.csv", &fair.failures)?;
            for o in &fair.outcomes {
                let (a, b) = (&ctx.groups[o.groups.0].name, &ctx.groups[o.groups.1].name);
                match &o.result {
                    Ok(p) => eprintln!(
                        "{a}|{b} {} {}: theta = ({:.6}, {:.6}), residual {:.2e}",
                        o.mode.name(),
                        o.criterion,
                        p.a.theta,
                        p.b.theta,
                        p.residual
                    ),
                    Err(e) => eprintln!("{a}|{b} {} {}: {e}", o.mode.name(), o.criterion),
                }
            }
            if fair.outcomes.iter().all(|o| o.result.is_err()) {
                bail!("no fairness cell could be solved");
            }
        }
        Verb::Sweep { sc } => {
            let ctx = prepare(sc, cli.seed)?;
            let mut loaded = ctx.sc.clone();
            if let Some(s) = loaded.scenario.sweep.as_mut() {
                if cli.seed != 0 {
                    s.seed = cli.seed;
                }
            }
            let res = experiment::sweep_alpha(&loaded)?;
            emit_file(cli.out.as_deref(), "policy.csv", &res.policy)?;
            emit_file(cli.out.as_deref(), "replications.csv", &res.replications)?;
            emit_file(cli.out.as_deref(), "failures.csv", &res.failures)?;
            emit(cli, "sweep_summary.csv", &res.summary, out)?;
            for f in &res.failures {
                eprintln!("alpha {} group {}: {}", f.alpha, f.group, f.error);
            }
        }
        Verb::Surface { sc, mode, criterion } => {
            let ctx = prepare(sc, cli.seed)?;
            let firm = ctx.sc.scenario.firm()?;
            let pairs = experiment::fairness_pairs(&ctx.sc)?;
            let (ia, ib) = pairs[0];
            let kind: Criterion = match criterion {
                Some(c) => (*c).into(),
                None => match Criterion::from(ctx.sc.scenario.fairness.criterion) {
                    Criterion::None => Criterion::Dp,
                    c => c,
                },
            };
            let modes = mode.modes();
            for m in &modes {
                let rows = experiment::utility_surface((&ctx.groups[ia], &ctx.groups[ib]), &firm, *m, kind)?;
                let name = if modes.len() == 1 { "surface.csv".to_string() } else { format!("surface-{}.csv", m.name()) };
                emit(cli, &name, &rows, out)?;
            }
        }
        Verb::Roc { sc, criterion } => {
            let ctx = prepare(sc, cli.seed)?;
            let criteria: Vec<Criterion> = match criterion {
                Some(c) => vec![(*c).into()],
                None => experiment::CRITERIA.to_vec(),
            };
            let fair = experiment::fairness_comparison(&ctx.sc, &ctx.groups, &MODES, &criteria, cli.seed)?;
            let rows = experiment::roc_rows(&ctx.sc, &ctx.groups, &fair)?;
            emit(cli, "roc.csv", &rows, out)?;
            emit_file(cli.out.as_deref(), "roc_curve.csv", &experiment::roc_curves(&ctx.sc, &ctx.groups)?)?;
        }
        Verb::Oracle { sc, mode, theta, agents } => {
            let ctx = prepare(sc, cli.seed)?;
            let firm = ctx.sc.scenario.firm()?;
            let mut checks = Vec::new();
            for g in &ctx.groups {
                for m in mode.modes() {
                    let t = match theta {
                        Some(t) => *t,
                        None => optimize(m, g, &firm)?.theta,
                    };
                    checks.extend(experiment::oracle_checks(g, &firm, m, t, *agents, cli.seed)?);
                }
            }
            for c in &checks {
                writeln!(
                    out,
                    "{} {:<13} {:<10} theta={:<12.6} analytic={:<12.6} empirical={:<12.6} tol={:<10.3e} {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.mode,
                    c.statistic,
                    c.theta,
                    c.analytic,
                    c.empirical,
                    c.tolerance,
                    c.group
                )?;
            }
            emit_file(cli.out.as_deref(), "oracle.csv", &checks)?;
            return Ok(checks.iter().all(|c| c.pass));
        }
    }
    Ok(true)
}

fn fmt_interval(lo: f64, hi: f64, w: Action) -> String {
    format!("[{lo:.6}, {hi:.6}): {w}")
}

fn respond(ctx: &Ctx, theta: f64, out: &mut dyn Write) -> anyhow::Result<()> {
    for g in &ctx.groups {
        for y in Label::BOTH {
            let part = classify_response(g.profile(y), theta)?;
            let f = &part.features;
            writeln!(out, "group {} label {y}: Type {} at theta = {theta}", g.name, part.equilibrium_type)?;
            writeln!(
                out,
                "  o_M = {:.6}  o_I = {:.6}  f = {:.6}  r = {:.6}",
                f.opt_in_m, f.opt_in_i, f.flip, f.risk_taker
            )?;
            for w in part.boundaries.windows(2) {
                writeln!(out, "  {}", fmt_interval(w[0].0, w[1].0, w[0].1))?;
            }
            if let Some(&(last, w)) = part.boundaries.last() {
                writeln!(out, "  [{last:.6}, inf): {w}")?;
            }
        }
    }
    Ok(())
}

fn summary(d: &PostDensity) -> String {
    match d.gridded() {
        None => "no mass".to_string(),
        Some(g) => {
            let mean: f64 = g.masses.iter().enumerate().map(|(k, m)| g.grid.midpoint(k) * m).sum::<f64>() / g.total_mass();
            format!("mass {:.6}, mean {:.6}", g.total_mass(), mean)
        }
    }
}

fn post_stats(ctx: &Ctx, theta: f64, out: &mut dyn Write) -> anyhow::Result<()> {
    for g in &ctx.groups {
        let s = post_densities(g, theta)?;
        writeln!(out, "group {}: alpha = {:.6}, alpha_hat = {:.6}", g.name, g.alpha, s.alpha_hat)?;
        writeln!(out, "  G0_hat: {}", summary(&s.g0_hat))?;
        writeln!(out, "  G1_hat: {}", summary(&s.g1_hat))?;
        for kind in [Criterion::Dp, Criterion::Eop] {
            let pre = constraint_value(FairnessCriterion { kind, basis: Basis::Pre }, theta, g)?;
            let post = constraint_value(FairnessCriterion { kind, basis: Basis::Post }, theta, g)?;
            writeln!(out, "  {kind} rate: pre {pre:.6}, post {post:.6}")?;
        }
    }
    Ok(())
}
