//! Scenario files: groups, firm parameters, fairness criterion and sweep
//! settings in TOML, with dotted-path overrides and a content hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stratclass_core::distkit::DEFAULT_CELLS;
use stratclass_core::{ActionProfile, Criterion, Density1D, FirmParams, GroupModel};

use crate::table::{self, ScoreTable};
use crate::ConfigError;

const BUILTIN: &[(&str, &str)] = &[
    ("appendixD-type1-single", include_str!("../scenarios/appendixD-type1-single.toml")),
    ("appendixD-type1-two-group", include_str!("../scenarios/appendixD-type1-two-group.toml")),
    ("appendixD-type3-single", include_str!("../scenarios/appendixD-type3-single.toml")),
    ("appendixD-type3-two-group", include_str!("../scenarios/appendixD-type3-two-group.toml")),
    ("sec6-fico-type1", include_str!("../scenarios/sec6-fico-type1.toml")),
    ("appendixC-type3-fico", include_str!("../scenarios/appendixC-type3-fico.toml")),
];

/// Names of the built-in scenarios.
pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Truncnorm { lo: f64, hi: f64, mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Histogram { edges: Vec<f64>, masses: Vec<f64> },
}

impl DensitySpec {
    pub fn build(&self) -> stratclass_core::Result<Density1D> {
        match self {
            DensitySpec::Truncnorm { lo, hi, mean, sd } => Density1D::truncated_gaussian(*lo, *hi, *mean, *sd),
            DensitySpec::Uniform { lo, hi } => Density1D::uniform(*lo, *hi),
            DensitySpec::Histogram { edges, masses } => Density1D::histogram(edges.clone(), masses.clone()),
        }
    }
}

/// Action costs and boost laws; unset fields fall back to the group-wide
/// `actions` block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub cost_m: Option<f64>,
    pub cost_i: Option<f64>,
    pub boost_m: Option<DensitySpec>,
    pub boost_i: Option<DensitySpec>,
}

impl ActionSpec {
    fn merged(&self, base: &ActionSpec) -> ActionSpec {
        ActionSpec {
            cost_m: self.cost_m.or(base.cost_m),
            cost_i: self.cost_i.or(base.cost_i),
            boost_m: self.boost_m.clone().or_else(|| base.boost_m.clone()),
            boost_i: self.boost_i.clone().or_else(|| base.boost_i.clone()),
        }
    }

    fn build(&self, group: &str, label: u8) -> Result<ActionProfile, ConfigError> {
        let missing = |field: &str| ConfigError::Missing(format!("groups.{group}.actions{label}.{field}"));
        let cost_m = self.cost_m.ok_or_else(|| missing("cost_m"))?;
        let cost_i = self.cost_i.ok_or_else(|| missing("cost_i"))?;
        let bm = self.boost_m.as_ref().ok_or_else(|| missing("boost_m"))?.build()?;
        let bi = self.boost_i.as_ref().ok_or_else(|| missing("boost_i"))?.build()?;
        Ok(ActionProfile::new(cost_m, cost_i, bm, bi)?)
    }
}

/// Label-conditional densities sampled from a score table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSource {
    /// `builtin:fico-like` or a CSV path relative to the scenario file.
    pub table: String,
    /// Group name inside the table; defaults to the scenario group name.
    pub group: Option<String>,
    pub samples: usize,
    /// Qualification rate imposed on the sampled pools; the sampled label
    /// mean is used when unset.
    pub alpha_target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    #[serde(default = "one")]
    pub share: f64,
    pub alpha: Option<f64>,
    pub g0: Option<DensitySpec>,
    pub g1: Option<DensitySpec>,
    pub source: Option<TableSource>,
    #[serde(default)]
    pub actions: ActionSpec,
    #[serde(default)]
    pub actions0: ActionSpec,
    #[serde(default)]
    pub actions1: ActionSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmSpec {
    pub u_plus: f64,
    pub u_minus: f64,
}

impl Default for FirmSpec {
    fn default() -> Self {
        FirmSpec { u_plus: 1.0, u_minus: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionName {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "DP")]
    Dp,
    #[serde(rename = "EOP")]
    Eop,
}

impl From<CriterionName> for Criterion {
    fn from(c: CriterionName) -> Self {
        match c {
            CriterionName::None => Criterion::None,
            CriterionName::Dp => Criterion::Dp,
            CriterionName::Eop => Criterion::Eop,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairnessSpec {
    pub criterion: CriterionName,
    /// Group every other group is paired with when there are more than two.
    pub reference: Option<String>,
}

impl Default for FairnessSpec {
    fn default() -> Self {
        FairnessSpec { criterion: CriterionName::None, reference: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub replications: usize,
    pub agents: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub firm: FirmSpec,
    #[serde(default)]
    pub fairness: FairnessSpec,
    pub groups: Vec<GroupSpec>,
    pub sweep: Option<SweepSpec>,
    /// Quadrature cells of every group grid.
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_cells() -> usize {
    DEFAULT_CELLS
}

/// A parsed scenario with its override-applied source tree.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// First 16 hex digits of the SHA-256 of the canonical TOML.
    pub hash: String,
    /// Directory relative table paths resolve against.
    pub base_dir: Option<PathBuf>,
}

/// Reads a built-in scenario by name or a TOML file by path and applies
/// `key=value` overrides in order.
pub fn load(name_or_path: &str, overrides: &[String]) -> Result<LoadedScenario, ConfigError> {
    let (text, base_dir) = match BUILTIN.iter().find(|(n, _)| *n == name_or_path) {
        Some((_, t)) => ((*t).to_string(), None),
        None => {
            let p = Path::new(name_or_path);
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.to_path_buf(), e))?;
            (text, p.parent().map(Path::to_path_buf))
        }
    };
    from_str(&text, overrides, base_dir)
}

pub fn from_str(text: &str, overrides: &[String], base_dir: Option<PathBuf>) -> Result<LoadedScenario, ConfigError> {
    let mut tree: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let canonical = toml::to_string(&tree).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let scenario: Scenario = tree.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    scenario.validate()?;
    let digest = Sha256::digest(canonical.as_bytes());
    let hash = hex::encode(&digest[..8]);
    Ok(LoadedScenario { scenario, hash, base_dir })
}

/// Sets `path` (dotted, integer segments index arrays; a group may also be
/// addressed by name) to `value` parsed as a TOML value, falling back to
/// a bare string.
pub fn apply_override(tree: &mut toml::Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string(), "expected key=value".into()))?;
    let value = parse_value(raw.trim());
    let segments: Vec<&str> = path.trim().split('.').collect();
    let mut node = tree;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let bad = |why: &str| ConfigError::Override(assignment.to_string(), why.to_string());
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert((*seg).to_string(), value);
                    return Ok(());
                }
                t.entry((*seg).to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx = match seg.parse::<usize>() {
                    Ok(k) => k,
                    Err(_) => a
                        .iter()
                        .position(|v| v.get("name").and_then(|n| n.as_str()) == Some(*seg))
                        .ok_or_else(|| bad("no array element with that index or name"))?,
                };
                let len = a.len();
                let slot = a.get_mut(idx).ok_or_else(|| bad(&format!("index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad(&format!("`{}` is not a table", segments[..i].join(".")))),
        };
    }
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl Scenario {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.groups.is_empty() {
            return Err(ConfigError::Invalid("scenario needs at least one group".into()));
        }
        for g in &self.groups {
            let analytic = g.g0.is_some() || g.g1.is_some();
            if analytic == g.source.is_some() {
                return Err(ConfigError::Invalid(format!(
                    "group {}: give either g0/g1 densities or a table source",
                    g.name
                )));
            }
            if analytic && (g.g0.is_none() || g.g1.is_none() || g.alpha.is_none()) {
                return Err(ConfigError::Invalid(format!("group {}: analytic groups need g0, g1 and alpha", g.name)));
            }
        }
        if let Some(s) = &self.sweep {
            if s.replications == 0 {
                return Err(ConfigError::Invalid("sweep.replications must be at least 1".into()));
            }
            if s.agents == 0 {
                return Err(ConfigError::Invalid("sweep.agents must be at least 1".into()));
            }
            if let Some(a) = s.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                return Err(ConfigError::Invalid(format!("sweep alpha {a} outside (0, 1)")));
            }
        }
        if self.groups.len() > 2 && self.fairness.criterion != CriterionName::None {
            let r = self.fairness.reference.as_deref().ok_or_else(|| {
                ConfigError::Invalid("more than two groups under a fairness criterion need fairness.reference".into())
            })?;
            if !self.groups.iter().any(|g| g.name == r) {
                return Err(ConfigError::Invalid(format!("reference group {r} is not in the scenario")));
            }
        }
        Ok(())
    }

    pub fn firm(&self) -> Result<FirmParams, ConfigError> {
        Ok(FirmParams::new(self.firm.u_plus, self.firm.u_minus)?)
    }
}

impl LoadedScenario {
    /// Builds every group model; table sources are sampled with `seed`.
    pub fn groups(&self, seed: u64) -> Result<Vec<GroupModel>, ConfigError> {
        self.scenario.groups.iter().map(|g| self.build_group(g, seed)).collect()
    }

    pub fn group_names(&self) -> Vec<String> {
        self.scenario.groups.iter().map(|g| g.name.clone()).collect()
    }

    fn build_group(&self, g: &GroupSpec, seed: u64) -> Result<GroupModel, ConfigError> {
        let p0 = g.actions0.merged(&g.actions).build(&g.name, 0)?;
        let p1 = g.actions1.merged(&g.actions).build(&g.name, 1)?;
        let model = match &g.source {
            None => {
                let (Some(d0), Some(d1), Some(alpha)) = (&g.g0, &g.g1, g.alpha) else {
                    unreachable!("validated at load time")
                };
                GroupModel::new(g.name.clone(), g.share, alpha, d0.build()?, d1.build()?, p0, p1)?
            }
            Some(src) => {
                let t = self.table(&src.table)?;
                let name = src.group.as_deref().unwrap_or(&g.name);
                let alpha_target = g.alpha.or(src.alpha_target);
                let built = table::build_group_from_table(&t, name, alpha_target, src.samples, seed)?;
                built.into_group(g.name.clone(), g.share, p0, p1)?
            }
        };
        Ok(model.with_cells(self.scenario.cells)?)
    }

    fn table(&self, source: &str) -> Result<ScoreTable, ConfigError> {
        if source == "builtin:fico-like" {
            return Ok(table::fico_like());
        }
        let p = Path::new(source);
        let path = match (&self.base_dir, p.is_relative()) {
            (Some(d), true) => d.join(p),
            _ => p.to_path_buf(),
        };
        table::load_score_table(&path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_build() {
        for name in builtin_names() {
            let s = load(name, &[]).unwrap();
            assert_eq!(s.scenario.name, name);
            assert_eq!(s.hash.len(), 16);
            s.groups(0).unwrap();
        }
    }

    #[test]
    fn overrides_by_index_and_name() {
        let s = load("appendixD-type1-two-group", &["groups.0.alpha=0.3".into(), "groups.b.share=0.25".into()]).unwrap();
        assert_eq!(s.scenario.groups[0].alpha, Some(0.3));
        assert_eq!(s.scenario.groups[1].share, 0.25);
        let base = load("appendixD-type1-two-group", &[]).unwrap();
        assert_ne!(s.hash, base.hash);
    }

    #[test]
    fn last_override_wins() {
        let s = load("appendixD-type1-single", &["groups.0.alpha=0.3".into(), "groups.0.alpha=0.6".into()]).unwrap();
        assert_eq!(s.scenario.groups[0].alpha, Some(0.6));
    }

    #[test]
    fn bad_override_is_rejected() {
        assert!(load("appendixD-type1-single", &["groups.7.alpha=0.3".into()]).is_err());
        assert!(load("appendixD-type1-single", &["noequals".into()]).is_err());
        assert!(load("appendixD-type1-single", &["groups.0.bogus=1".into()]).is_err());
    }

    #[test]
    fn density_records() {
        let src = r#"
name = "t"
[[groups]]
name = "g"
alpha = 0.5
g0 = { kind = "uniform", lo = 0.0, hi = 1.0 }
g1 = { kind = "histogram", edges = [0.5, 1.0, 1.5], masses = [1.0, 3.0] }
actions = { cost_m = 0.1, cost_i = 0.5, boost_m = { kind = "uniform", lo = 0.0, hi = 0.2 }, boost_i = { kind = "truncnorm", lo = 0.1, hi = 0.5, mean = 0.3, sd = 0.1 } }
"#;
        let s = from_str(src, &[], None).unwrap();
        let g = s.groups(0).unwrap();
        assert_eq!(g[0].alpha, 0.5);
    }
}
