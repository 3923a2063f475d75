use stratclass::cli::{run, run_captured};
use stratclass::experiment::sweep_alpha;

fn capture(args: &[&str]) -> (bool, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("stratclass").chain(args.iter().copied());
    let ok = run_captured(argv, &mut out).unwrap();
    (ok, String::from_utf8(out).unwrap())
}

fn code(args: &[&str]) -> i32 {
    run(std::iter::once("stratclass").chain(args.iter().copied()))
}

fn field(header: &str, row: &str, name: &str) -> String {
    let k = header.split(',').position(|h| h == name).unwrap();
    row.split(',').nth(k).unwrap().to_string()
}

#[test]
fn scenarios_lists_the_builtins() {
    let (_, out) = capture(&["scenarios"]);
    let names: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(
        names,
        [
            "appendixD-type1-single",
            "appendixD-type1-two-group",
            "appendixD-type3-single",
            "appendixD-type3-two-group",
            "sec6-fico-type1",
            "appendixC-type3-fico"
        ]
    );
}

#[test]
fn optimize_writes_one_row_per_mode() {
    let (_, out) = capture(&["optimize", "--scenario", "appendixD-type1-single", "--mode", "both", "--alpha", "0.5"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    let header = lines[0];
    for col in ["scenario_hash", "seed", "alpha", "group", "mode", "fairness", "theta", "utility", "alpha_hat"] {
        assert!(header.split(',').any(|h| h == col), "missing {col}");
    }
    let theta = |row| field(header, row, "theta").parse::<f64>().unwrap();
    assert_eq!(field(header, lines[1], "mode"), "non-strategic");
    assert_eq!(field(header, lines[2], "mode"), "strategic");
    assert_eq!(field(header, lines[1], "alpha"), "0.5");
    assert!(theta(lines[2]) > theta(lines[1]));
}

#[test]
fn respond_prints_a_type3_partition() {
    let (_, out) = capture(&["respond", "--scenario", "appendixD-type3-single", "--theta", "0.7"]);
    assert!(out.contains("label 0: Type 3"));
    assert!(out.contains("label 1: Type 3"));
    assert!(!out.contains("): I"));
}

#[test]
fn overrides_apply_in_order() {
    let args = ["optimize", "--scenario", "appendixD-type1-single", "--mode", "non-strategic"];
    let with = |extra: &[&str]| {
        let mut v = args.to_vec();
        v.extend_from_slice(extra);
        let (_, out) = capture(&v);
        let lines: Vec<String> = out.lines().map(String::from).collect();
        field(&lines[0], &lines[1], "alpha")
    };
    assert_eq!(with(&["groups.0.alpha=0.3"]), "0.3");
    assert_eq!(with(&["groups.0.alpha=0.3", "groups.s.alpha=0.6"]), "0.6");
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["scenarios"]), 0);
    assert_eq!(code(&["optimize", "--bogus"]), 2);
    assert_eq!(code(&["optimize", "--scenario", "appendixD-type1-single", "--mode", "sideways"]), 2);
    assert_eq!(code(&["optimize", "--scenario", "no-such-scenario"]), 1);
    assert_eq!(code(&["optimize", "--scenario", "appendixD-type1-single", "groups.0.alpha=1.5"]), 1);
    assert_eq!(code(&["respond", "--scenario", "appendixD-type1-single", "--theta", "-1"]), 1);
}

#[test]
fn out_directory_receives_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (ok, _) = capture(&["fair", "--scenario", "appendixD-type1-two-group", "--out", out]);
    assert!(ok);
    for f in ["policy.csv", "manifold.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let (ok, _) = capture(&["roc", "--scenario", "appendixD-type1-two-group", "--criterion", "EOP", "--out", out]);
    assert!(ok);
    let roc = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
    assert!(roc.starts_with("scenario_hash,group,basis,decisions_basis,theta,tpr,fpr"));
    assert!(dir.path().join("roc_curve.csv").exists());
    let (ok, _) = capture(&["surface", "--scenario", "appendixD-type1-two-group", "--out", out]);
    assert!(ok);
    let surface = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
    assert_eq!(surface.lines().next().unwrap(), "theta_a,theta_b,utility,constraint_a,constraint_b");
    assert_eq!(surface.lines().count(), 1 + 200 * 200);
}

#[test]
fn oracle_agrees_on_the_single_group_config() {
    let (ok, out) = capture(&["oracle", "--scenario", "appendixD-type1-single", "--agents", "100000"]);
    assert!(ok, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn sweeps_are_reproducible() {
    let sc = stratclass::load("appendixD-type1-single", &["sweep.replications=3".into(), "sweep.agents=200".into()]).unwrap();
    let (a, b) = (sweep_alpha(&sc).unwrap(), sweep_alpha(&sc).unwrap());
    assert_eq!(a.replications, b.replications);
    assert_eq!(a.summary, b.summary);
    let sc2 = stratclass::load("appendixD-type1-single", &["sweep.replications=3".into(), "sweep.agents=200".into(), "sweep.seed=9".into()])
        .unwrap();
    assert_ne!(sweep_alpha(&sc2).unwrap().replications, a.replications);
    assert_ne!(sc.hash, sc2.hash);
}

#[test]
fn fico_scenarios_build_four_groups() {
    for name in ["sec6-fico-type1", "appendixC-type3-fico"] {
        let sc = stratclass::load(name, &[]).unwrap();
        let groups = sc.groups(0).unwrap();
        assert_eq!(groups.iter().map(|g| g.name.as_str()).collect::<Vec<_>>(), ["AA", "H", "C", "A"]);
        for g in &groups {
            assert!(g.grid().hi > 1.0, "{name} {}", g.name);
        }
    }
}
