use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{enumerate_path_incidence, BinMatrix, GroupTable, InteractionStore, PathIncidence, PathSpec};

/// Which interactions form the training targets `ȳ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Explicit OR multi-hop interactions.
    #[default]
    Merged,
    /// Explicit interactions only.
    Explicit,
}

/// Everything the model reads from a (training) store, precomputed once.
#[derive(Clone, Debug)]
pub struct ModelInputs {
    pub n_users: usize,
    pub n_items: usize,
    /// `p̄_u`: explicit interaction rows.
    pub user_rows: BinMatrix,
    /// `q̄_v`: explicit interaction columns, stored as rows of the transpose.
    pub item_cols: BinMatrix,
    pub explicit: Vec<Vec<Vec<u32>>>,
    /// Dependency incidence grouped by target item: `(j, number of sources)`.
    pub implicit: Vec<Vec<Vec<(u32, f64)>>>,
    pub explicit_labels: Vec<String>,
    pub implicit_labels: Vec<String>,
    pub groups: GroupTable,
    /// Explicit group-item rows (the group's training positives).
    pub group_rows: BinMatrix,
    pub user_targets: BinMatrix,
    pub group_targets: BinMatrix,
}

impl ModelInputs {
    /// Uses cached incidence from `store.per_path_incidence` when present,
    /// otherwise enumerates it.
    pub fn from_store(store: &InteractionStore, specs: &[PathSpec], targets: TargetMode) -> Result<Self> {
        let mut explicit = Vec::new();
        let mut implicit = Vec::new();
        let mut explicit_labels = Vec::new();
        let mut implicit_labels = Vec::new();
        for spec in specs {
            let inc = match store.per_path_incidence.get(&spec.label) {
                Some(inc) => inc.clone(),
                None => enumerate_path_incidence(store, spec, &store.aux)?,
            };
            match (spec.is_dependency(), inc) {
                (false, PathIncidence::Items(rows)) => {
                    explicit.push(rows);
                    explicit_labels.push(spec.label.clone());
                }
                (true, PathIncidence::Pairs(rows)) => {
                    implicit.push(rows.iter().map(|pairs| group_targets(pairs)).collect());
                    implicit_labels.push(spec.label.clone());
                }
                _ => {
                    return Err(Error::InvalidPath {
                        label: spec.label.clone(),
                        reason: "cached incidence does not match path kind".into(),
                    })
                }
            }
        }
        let (user_targets, group_targets) = match targets {
            TargetMode::Merged => {
                let m = store.merged_targets();
                (m.users, m.groups)
            }
            TargetMode::Explicit => (store.y_uv.clone(), store.y_gv.clone()),
        };
        Ok(Self {
            n_users: store.n_users(),
            n_items: store.n_items(),
            user_rows: store.y_uv.clone(),
            item_cols: store.y_uv.transpose(),
            explicit,
            implicit,
            explicit_labels,
            implicit_labels,
            groups: store.groups.clone(),
            group_rows: store.y_gv.clone(),
            user_targets,
            group_targets,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
}

fn group_targets(pairs: &[(u32, u32)]) -> Vec<(u32, f64)> {
    let mut js: Vec<u32> = pairs.iter().map(|&(_, j)| j).collect();
    js.sort_unstable();
    let mut out: Vec<(u32, f64)> = Vec::new();
    for j in js {
        match out.last_mut() {
            Some((last, c)) if *last == j => *c += 1.0,
            _ => out.push((j, 1.0)),
        }
    }
    out
}
