//! Score tables: per-group score CDFs with repayment probabilities, the
//! synthetic FICO-like generator and sampling of label-conditional
//! histograms.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use stratclass_core::distkit::unit_uniform;
use stratclass_core::{ActionProfile, Density1D, GroupModel, Label};

use crate::ConfigError;

/// One (score, cdf, repay_prob) knot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub score: f64,
    pub cdf: f64,
    pub repay_prob: f64,
}

/// Validated table; scores are normalized to `[0, 1]` over the whole table.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub groups: BTreeMap<String, Vec<Knot>>,
}

#[derive(Deserialize, Serialize)]
struct Row {
    group: String,
    score: f64,
    cdf: f64,
    repay_prob: f64,
}

/// Reads a `group,score,cdf,repay_prob` CSV.
pub fn load_score_table(path: &Path) -> Result<ScoreTable, ConfigError> {
    let file = std::fs::File::open(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    read_score_table(file)
}

pub fn read_score_table<R: std::io::Read>(reader: R) -> Result<ScoreTable, ConfigError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| ConfigError::Table { row: 0, reason: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != ["group", "score", "cdf", "repay_prob"] {
        return Err(ConfigError::Table { row: 0, reason: "header must be group,score,cdf,repay_prob".into() });
    }
    let mut raw: BTreeMap<String, Vec<(usize, Knot)>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| ConfigError::Table { row, reason: e.to_string() })?;
        for (name, v) in [("cdf", r.cdf), ("repay_prob", r.repay_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Table { row, reason: format!("{name} = {v} outside [0, 1]") });
            }
        }
        if !r.score.is_finite() {
            return Err(ConfigError::Table { row, reason: "score is not finite".into() });
        }
        raw.entry(r.group).or_default().push((row, Knot { score: r.score, cdf: r.cdf, repay_prob: r.repay_prob }));
    }
    if raw.is_empty() {
        return Err(ConfigError::Table { row: 0, reason: "table has no rows".into() });
    }
    for rows in raw.values() {
        for w in rows.windows(2) {
            let ((_, a), (row, b)) = (w[0], w[1]);
            if !(b.score > a.score) {
                return Err(ConfigError::Table { row, reason: "scores must be strictly ascending within a group".into() });
            }
            if b.cdf < a.cdf {
                return Err(ConfigError::Table { row, reason: "cdf decreases".into() });
            }
        }
        let (row, last) = rows[rows.len() - 1];
        if rows.len() < 2 {
            return Err(ConfigError::Table { row, reason: "a group needs at least two knots".into() });
        }
        if (last.cdf - 1.0).abs() > 1e-6 {
            return Err(ConfigError::Table { row, reason: format!("cdf ends at {} instead of 1", last.cdf) });
        }
    }
    let lo = raw.values().flat_map(|r| r.iter().map(|(_, k)| k.score)).fold(f64::INFINITY, f64::min);
    let hi = raw.values().flat_map(|r| r.iter().map(|(_, k)| k.score)).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let groups = raw
        .into_iter()
        .map(|(g, rows)| {
            let knots = rows.into_iter().map(|(_, k)| Knot { score: (k.score - lo) / span, ..k }).collect();
            (g, knots)
        })
        .collect();
    Ok(ScoreTable { groups })
}

impl ScoreTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (g, knots) in &self.groups {
            for k in knots {
                wtr.serialize(Row { group: g.clone(), score: k.score, cdf: k.cdf, repay_prob: k.repay_prob })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Qualification rate implied by the table for `group`.
    pub fn native_alpha(&self, group: &str) -> Option<f64> {
        self.groups.get(group).map(|k| bins(k).iter().map(|b| b.mass * b.repay).sum())
    }
}

struct Bin {
    lo: f64,
    hi: f64,
    mass: f64,
    repay: f64,
}

// The first knot's point mass is folded into the first bin.
fn bins(knots: &[Knot]) -> Vec<Bin> {
    knots
        .windows(2)
        .enumerate()
        .map(|(i, w)| Bin {
            lo: w[0].score,
            hi: w[1].score,
            mass: if i == 0 { w[1].cdf } else { w[1].cdf - w[0].cdf },
            repay: 0.5 * (w[0].repay_prob + w[1].repay_prob),
        })
        .collect()
}

/// Label-conditional histograms sampled from a table.
#[derive(Clone, Debug)]
pub struct SampledPools {
    pub g0: Option<Density1D>,
    pub g1: Option<Density1D>,
    /// Label-1 fraction of the draws.
    pub sampled_alpha: f64,
    pub alpha: f64,
}

impl SampledPools {
    pub fn into_group(self, name: String, share: f64, p0: ActionProfile, p1: ActionProfile) -> Result<GroupModel, ConfigError> {
        let degenerate = |reason: &str| ConfigError::Invalid(format!("group {name}: {reason}"));
        match (self.g0, self.g1) {
            (Some(g0), Some(g1)) => Ok(GroupModel::new(name, share, self.alpha, g0, g1, p0, p1)?),
            (Some(g0), None) if self.alpha == 0.0 => Ok(GroupModel::with_empty_label(name, share, g0, Label::One, p0, p1)?),
            (None, Some(g1)) if self.alpha == 1.0 => Ok(GroupModel::with_empty_label(name, share, g1, Label::Zero, p0, p1)?),
            _ => Err(degenerate("a label needed by the qualification rate has no sampled agents")),
        }
    }
}

/// Draws `n_samples` agents of `group`: a bin by its mass, a score uniform
/// in the bin and a label with the bin's repayment probability. Histograms
/// of each label's pool use the table knots as edges. With `alpha_target`
/// the pools keep their shapes and the group takes the target rate.
pub fn build_group_from_table(
    table: &ScoreTable,
    group: &str,
    alpha_target: Option<f64>,
    n_samples: usize,
    seed: u64,
) -> Result<SampledPools, ConfigError> {
    let knots = table.groups.get(group).ok_or_else(|| ConfigError::Missing(format!("table group {group}")))?;
    if n_samples == 0 {
        return Err(ConfigError::Invalid("samples must be at least 1".into()));
    }
    if let Some(a) = alpha_target {
        if !(0.0..=1.0).contains(&a) {
            return Err(ConfigError::Invalid(format!("alpha_target {a} outside [0, 1]")));
        }
    }
    let bins = bins(knots);
    let mut cum = Vec::with_capacity(bins.len());
    let mut acc = 0.0;
    for b in &bins {
        acc += b.mass;
        cum.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [vec![0.0; bins.len()], vec![0.0; bins.len()]];
    let mut ones = 0usize;
    for _ in 0..n_samples {
        let u = unit_uniform(&mut rng) * acc;
        let k = cum.partition_point(|&c| c <= u).min(bins.len() - 1);
        let y = usize::from(unit_uniform(&mut rng) < bins[k].repay);
        counts[y][k] += 1.0;
        ones += y;
    }
    let edges: Vec<f64> = std::iter::once(bins[0].lo).chain(bins.iter().map(|b| b.hi)).collect();
    let pool = |c: &Vec<f64>| -> Result<Option<Density1D>, ConfigError> {
        if c.iter().all(|&m| m == 0.0) {
            Ok(None)
        } else {
            Ok(Some(Density1D::histogram(edges.clone(), c.clone())?))
        }
    };
    let [c0, c1] = &counts;
    let sampled_alpha = ones as f64 / n_samples as f64;
    let alpha = alpha_target.unwrap_or(sampled_alpha);
    Ok(SampledPools { g0: pool(c0)?, g1: pool(c1)?, sampled_alpha, alpha })
}

/// Qualification rates of the FICO-like groups.
pub const FICO_LIKE_GROUPS: [(&str, f64); 4] = [("AA", 0.33849), ("H", 0.56977), ("C", 0.75972), ("A", 0.80467)];

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Synthetic four-group table on scores 300..850: a shared logistic
/// repayment curve and per-group discretized Gaussian score laws whose
/// means are solved so each group's implied rate matches
/// [`FICO_LIKE_GROUPS`].
pub fn fico_like() -> ScoreTable {
    let scores: Vec<f64> = (0..=55).map(|k| 300.0 + 10.0 * k as f64).collect();
    let repay: Vec<f64> = scores.iter().map(|&s| logistic((s - 640.0) / 45.0)).collect();
    let knots_for = |mean: f64| -> Vec<Knot> {
        let w: Vec<f64> = scores.iter().map(|&s| (-0.5 * ((s - mean) / 95.0).powi(2)).exp()).collect();
        let total: f64 = w[1..].iter().sum();
        let mut acc = 0.0;
        scores
            .iter()
            .zip(&repay)
            .enumerate()
            .map(|(i, (&score, &repay_prob))| {
                if i > 0 {
                    acc += w[i] / total;
                }
                Knot { score, cdf: if i + 1 == scores.len() { 1.0 } else { acc }, repay_prob }
            })
            .collect()
    };
    let implied = |mean: f64| -> f64 { bins(&knots_for(mean)).iter().map(|b| b.mass * b.repay).sum() };
    let mut groups = BTreeMap::new();
    for (name, target) in FICO_LIKE_GROUPS {
        let (mut lo, mut hi) = (300.0, 850.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if implied(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let knots = knots_for(0.5 * (lo + hi))
            .into_iter()
            .map(|k| Knot { score: (k.score - 300.0) / 550.0, ..k })
            .collect();
        groups.insert(name.to_string(), knots);
    }
    ScoreTable { groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stratclass_core::distkit::check_fosd;

    #[test]
    fn minimal_table_parses() {
        let t = read_score_table("group,score,cdf,repay_prob\ng,300,0.0,0.1\ng,400,1.0,0.9\n".as_bytes()).unwrap();
        assert_eq!(t.groups["g"].len(), 2);
        assert_eq!(t.groups["g"][1].score, 1.0);
    }

    #[test]
    fn decreasing_cdf_cites_row() {
        let err = read_score_table("group,score,cdf,repay_prob\ng,1,0.2,0.1\ng,2,0.6,0.2\ng,3,0.5,0.3\ng,4,1,0.4\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, ConfigError::Table { row: 3, .. }), "{err}");
    }

    #[test]
    fn probabilities_and_groups_are_validated() {
        assert!(read_score_table("group,score,cdf,repay_prob\ng,1,0.2,1.5\ng,2,1,0.2\n".as_bytes()).is_err());
        assert!(read_score_table("group,score,cdf,repay_prob\ng,1,0.2,0.5\ng,2,0.9,0.2\n".as_bytes()).is_err());
        let t = read_score_table("group,score,cdf,repay_prob\ng,1,0.2,0.5\ng,2,1,0.2\n".as_bytes()).unwrap();
        assert!(build_group_from_table(&t, "missing", None, 10, 0).is_err());
    }

    #[test]
    fn degenerate_repayment() {
        let t = read_score_table("group,score,cdf,repay_prob\ng,1,0.2,1\ng,2,1,1\n".as_bytes()).unwrap();
        let p = build_group_from_table(&t, "g", None, 1000, 0).unwrap();
        assert_eq!(p.alpha, 1.0);
        assert!(p.g0.is_none());
        let t = read_score_table("group,score,cdf,repay_prob\ng,1,0.2,0\ng,2,1,0\n".as_bytes()).unwrap();
        let p = build_group_from_table(&t, "g", None, 1000, 0).unwrap();
        assert_eq!(p.alpha, 0.0);
        assert!(p.g1.is_none());
        assert!(build_group_from_table(&t, "g", Some(0.5), 1000, 0)
            .unwrap()
            .into_group("g".into(), 1.0, profile(), profile())
            .is_err());
    }

    fn profile() -> ActionProfile {
        ActionProfile::new(0.2, 0.3, Density1D::uniform(0.0, 0.1).unwrap(), Density1D::uniform(0.1, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn fico_like_rates_and_dominance() {
        let t = fico_like();
        for (g, a) in FICO_LIKE_GROUPS {
            assert!((t.native_alpha(g).unwrap() - a).abs() < 1e-9);
        }
        let p = build_group_from_table(&t, "AA", None, 100_000, 3).unwrap();
        let se = (0.33849f64 * (1.0 - 0.33849) / 1e5).sqrt();
        assert!((p.sampled_alpha - 0.33849).abs() < 4.0 * se);
        assert!(check_fosd(p.g1.as_ref().unwrap(), p.g0.as_ref().unwrap(), 512));
    }

    #[test]
    fn csv_round_trip() {
        let t = fico_like();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_score_table(buf.as_slice()).unwrap();
        for (g, k) in &t.groups {
            for (a, b) in k.iter().zip(&back.groups[g]) {
                assert!((a.score - b.score).abs() < 1e-12 && a.cdf == b.cdf);
            }
        }
    }
}
