//! Train/validation/test splitting, ranking, HR@N / NDCG@N, and the ablation
//! variants.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{BinMatrix, InteractionStore};
use crate::model::{group_logits, user_hats, AggregatorKind, Branches, ModelInputs, ModelParams, TargetMode};
use crate::train::TrainConfig;

pub const DEFAULT_NS: [usize; 3] = [5, 10, 20];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&r| !(0.0..=1.0).contains(&r)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be in [0, 1] and sum to 1, got {}/{}/{}",
                self.train, self.validation, self.test
            )));
        }
        Ok(())
    }
}

/// Group-item partitions. `train` is the group rows recomputed after held-out
/// pairs were removed from the members' interactions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: BinMatrix,
    pub validation: BinMatrix,
    pub test: BinMatrix,
    /// Groups with fewer than three interactions: kept whole in training and
    /// left out of evaluation.
    pub excluded_groups: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Validation,
    Test,
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "val" | "validation" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            other => Err(Error::Config(format!("unknown split `{other}` (expected test or validation)"))),
        }
    }
}

impl Split {
    pub fn partition(&self, p: Partition) -> &BinMatrix {
        match p {
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }

    /// One instance per held-out `(group, item)` pair, in group then item order.
    pub fn instances(&self, p: Partition) -> Vec<EvalInstance> {
        self.partition(p)
            .iter()
            .map(|(g, v)| EvalInstance { group: g, item: v as u32 })
            .collect()
    }
}

/// Splits each group's interactions 7:1:2 (by default) and returns the
/// training store together with the partitions.
///
/// Held-out pairs are removed from every member's user-item row, then group
/// rows and multi-hop matrices are re-derived from what remains, so nothing
/// held out leaks into features or targets.
pub fn split_dataset(store: &InteractionStore, spec: &SplitSpec) -> Result<(InteractionStore, Split)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n_g, m) = (store.n_groups(), store.n_items());
    let mut val = BinMatrix::new(n_g, m);
    let mut test = BinMatrix::new(n_g, m);
    let mut excluded = Vec::new();
    for g in 0..n_g {
        let mut items: Vec<u32> = store.y_gv.row(g).to_vec();
        let k = items.len();
        if k < 3 {
            excluded.push(g);
            continue;
        }
        items.shuffle(&mut rng);
        let n_test = ((spec.test * k as f64).round() as usize).min(k - 1);
        let n_val = ((spec.validation * k as f64).round() as usize).min(k - 1 - n_test);
        for &v in &items[..n_test] {
            test.insert(g, v as usize);
        }
        for &v in &items[n_test..n_test + n_val] {
            val.insert(g, v as usize);
        }
    }
    if !excluded.is_empty() {
        info!("{} groups have fewer than 3 interactions; kept in training only", excluded.len());
    }
    let mut train = store.clone();
    for (g, v) in val.iter().chain(test.iter()) {
        for &u in store.groups.members(g) {
            train.y_uv.remove(u, v);
        }
    }
    train.recompute_group_rows();
    train.derive_multi_hop(store.depth)?;
    train.per_path_incidence.clear();
    let split = Split {
        train: train.y_gv.clone(),
        validation: val,
        test,
        excluded_groups: excluded,
    };
    Ok((train, split))
}

/// A held-out `(group, item)` pair. Candidates are all items outside the
/// group's training row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub group: usize,
    pub item: u32,
}

fn before(scores: &[f64], a: u32, b: u32) -> std::cmp::Ordering {
    scores[b as usize]
        .total_cmp(&scores[a as usize])
        .then(a.cmp(&b))
}

/// Candidates sorted by descending score, ties by ascending id.
pub fn rank_items(scores: &[f64], candidates: &[u32]) -> Vec<u32> {
    let mut out = candidates.to_vec();
    out.sort_by(|&a, &b| before(scores, a, b));
    out
}

/// 1-based position `item` would take in [`rank_items`], without sorting.
pub fn rank_of(scores: &[f64], candidates: &[u32], item: u32) -> usize {
    1 + candidates
        .iter()
        .filter(|&&c| c != item && before(scores, c, item).is_lt())
        .count()
}

/// Candidate set for a group: every item not in `train_row`.
pub fn candidates(n_items: usize, train_row: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(n_items - train_row.len());
    let mut it = train_row.iter().peekable();
    for v in 0..n_items as u32 {
        if it.peek() == Some(&&v) {
            it.next();
        } else {
            out.push(v);
        }
    }
    out
}

fn position(ranking: &[u32], item: u32) -> Option<usize> {
    ranking.iter().position(|&v| v == item).map(|p| p + 1)
}

/// Fraction of instances whose held-out item is in the top `n`.
pub fn hr_at_n(instances: &[EvalInstance], rankings: &[Vec<u32>], n: usize) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyInstances);
    }
    let ranks: Vec<usize> = instances
        .iter()
        .zip(rankings)
        .map(|(i, r)| position(r, i.item).unwrap_or(usize::MAX))
        .collect();
    Ok(hr_from_ranks(&ranks, n))
}

/// Mean of `1/log2(rank+1)` over instances ranked within `n`; IDCG = 1.
pub fn ndcg_at_n(instances: &[EvalInstance], rankings: &[Vec<u32>], n: usize) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::EmptyInstances);
    }
    let ranks: Vec<usize> = instances
        .iter()
        .zip(rankings)
        .map(|(i, r)| position(r, i.item).unwrap_or(usize::MAX))
        .collect();
    Ok(ndcg_from_ranks(&ranks, n))
}

pub fn hr_from_ranks(ranks: &[usize], n: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64
}

pub fn ndcg_from_ranks(ranks: &[usize], n: usize) -> f64 {
    ranks.iter().map(|&r| ndcg_gain(r, n)).sum::<f64>() / ranks.len() as f64
}

pub fn ndcg_gain(rank: usize, n: usize) -> f64 {
    if rank <= n {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub instances: usize,
    pub hr: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

impl EvalReport {
    pub fn from_ranks(variant: &str, ranks: &[usize], ns: &[usize]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::EmptyInstances);
        }
        Ok(Self {
            variant: variant.to_owned(),
            instances: ranks.len(),
            hr: ns.iter().map(|&n| (n, hr_from_ranks(ranks, n))).collect(),
            ndcg: ns.iter().map(|&n| (n, ndcg_from_ranks(ranks, n))).collect(),
        })
    }
}

/// Report plus the per-instance ranks behind it (for paired comparisons).
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub instances: Vec<EvalInstance>,
    pub ranks: Vec<usize>,
}

impl Evaluation {
    /// Per-instance hit indicators at cutoff `n`.
    pub fn hits(&self, n: usize) -> Vec<bool> {
        self.ranks.iter().map(|&r| r <= n).collect()
    }
}

pub fn validate_ns(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Config("at least one cutoff N is required".into()));
    }
    for n in ns {
        if !DEFAULT_NS.contains(n) {
            return Err(Error::Config(format!("unsupported cutoff N={n} (allowed: 5, 10, 20)")));
        }
    }
    Ok(())
}

/// Ranks every held-out item against its group's candidates. Read-only with
/// respect to `params`.
pub fn evaluate(
    params: &ModelParams,
    inputs: &ModelInputs,
    instances: &[EvalInstance],
    ns: &[usize],
    variant: &str,
) -> Result<Evaluation> {
    validate_ns(ns)?;
    if instances.is_empty() {
        return Err(Error::EmptyInstances);
    }
    let hats = user_hats(params, inputs);
    let mut groups: Vec<usize> = instances.iter().map(|i| i.group).collect();
    groups.dedup();
    let logits: BTreeMap<usize, Vec<f64>> = groups
        .par_iter()
        .map(|&g| group_logits(params, inputs, &hats, g).map(|l| (g, l)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let ranks: Vec<usize> = instances
        .iter()
        .map(|i| {
            let cands = candidates(inputs.n_items, inputs.group_rows.row(i.group));
            rank_of(&logits[&i.group], &cands, i.item)
        })
        .collect();
    Ok(Evaluation {
        report: EvalReport::from_ranks(variant, &ranks, ns)?,
        instances: instances.to_vec(),
        ranks,
    })
}

/// The full model and its four ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    #[serde(rename = "full")]
    Full,
    /// Remove user pre-training.
    #[serde(rename = "RPT")]
    Rpt,
    /// Remove dependency meta-paths.
    #[serde(rename = "RDMP")]
    Rdmp,
    /// Remove meta-paths.
    #[serde(rename = "RMP")]
    Rmp,
    /// Replace the attention aggregator by meanpool.
    #[serde(rename = "RAA")]
    Raa,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Full, Variant::Rpt, Variant::Rdmp, Variant::Rmp, Variant::Raa];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Rpt => "RPT",
            Variant::Rdmp => "RDMP",
            Variant::Rmp => "RMP",
            Variant::Raa => "RAA",
        }
    }

    pub fn branches(self) -> Branches {
        match self {
            Variant::Rdmp => Branches {
                explicit: true,
                implicit: false,
            },
            Variant::Rmp => Branches {
                explicit: false,
                implicit: true,
            },
            _ => Branches::default(),
        }
    }

    /// Training targets for this variant. Without dependency meta-paths there
    /// are no multi-hop interactions, so RDMP trains on explicit rows only.
    pub fn target_mode(self, base: TargetMode) -> TargetMode {
        match self {
            Variant::Rdmp => TargetMode::Explicit,
            _ => base,
        }
    }

    pub fn skips_pretraining(self) -> bool {
        self == Variant::Rpt
    }

    /// Training config with the variant's aggregator override applied.
    pub fn train_config(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        if self == Variant::Raa {
            cfg.aggregator = AggregatorKind::Meanpool;
        }
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected full, RPT, RDMP, RMP, RAA)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_three_at_five_is_half() {
        let ranks = [3usize];
        assert_eq!(ndcg_from_ranks(&ranks, 5), 0.5);
        assert_eq!(hr_from_ranks(&ranks, 5), 1.0);
    }

    #[test]
    fn ties_break_by_id() {
        assert_eq!(rank_items(&[1.0; 4], &[3, 0, 2, 1]), vec![0, 1, 2, 3]);
        assert_eq!(rank_items(&[0.1, 0.9, 0.5], &[0, 1, 2]), vec![1, 2, 0]);
        assert_eq!(rank_of(&[1.0; 4], &[0, 1, 2, 3], 2), 3);
    }

    #[test]
    fn candidate_masking() {
        assert_eq!(candidates(5, &[1, 3]), vec![0, 2, 4]);
    }

    #[test]
    fn variants_parse() {
        assert_eq!("rdmp".parse::<Variant>().unwrap(), Variant::Rdmp);
        assert!("XYZ".parse::<Variant>().is_err());
    }
}
