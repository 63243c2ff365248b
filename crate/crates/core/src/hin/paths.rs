use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::BinMatrix;
use super::schema::{PathSpec, ITEM, USER};
use super::store::{AuxRelations, InteractionStore};
use crate::error::{Error, Result};

/// User-to-item incidence induced by one path spec.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathIncidence {
    /// Central items `Y_V(u)` reachable along a meta-path, sorted per user.
    Items(Vec<Vec<u32>>),
    /// `(source i, target j)` pairs along a dependency meta-path, sorted per user.
    Pairs(Vec<Vec<(u32, u32)>>),
}

impl PathIncidence {
    pub fn n_users(&self) -> usize {
        match self {
            PathIncidence::Items(v) => v.len(),
            PathIncidence::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty_for(&self, u: usize) -> bool {
        match self {
            PathIncidence::Items(v) => v[u].is_empty(),
            PathIncidence::Pairs(v) => v[u].is_empty(),
        }
    }
}

fn entity_count(store: &InteractionStore, aux: &AuxRelations, ty: &str) -> Option<usize> {
    match ty {
        USER => Some(store.n_users()),
        ITEM => Some(store.n_items()),
        other => aux.entity_ids(other).map(|m| m.len()),
    }
}

fn step_matrix<'a>(
    store: &'a InteractionStore,
    aux: &'a AuxRelations,
    spec: &PathSpec,
    t: usize,
) -> Result<Cow<'a, BinMatrix>> {
    let (a, b) = (spec.types[t].as_str(), spec.types[t + 1].as_str());
    if spec.dependency_position == Some(t) {
        return Ok(Cow::Borrowed(&store.closure));
    }
    let found = match (a, b) {
        (USER, ITEM) => Some(Cow::Borrowed(&store.y_uv)),
        (ITEM, USER) => Some(Cow::Owned(store.y_uv.transpose())),
        (ITEM, ITEM) => None,
        _ => aux.matrix(a, b),
    };
    found.ok_or_else(|| Error::MissingRelation {
        label: spec.label.clone(),
        entity: if a == USER || a == ITEM { b.to_owned() } else { a.to_owned() },
    })
}

/// Enumerates the user→item incidence of `spec`.
///
/// A central item counts for user `u` iff at least one complete typed walk
/// `u → … → item → … → u'` exists; for dependency specs the walk must cross
/// the dependency closure at the marked step. Each reachable item (or pair)
/// is counted once regardless of how many walks reach it.
pub fn enumerate_path_incidence(
    store: &InteractionStore,
    spec: &PathSpec,
    aux: &AuxRelations,
) -> Result<PathIncidence> {
    spec.validate()?;
    for ty in &spec.types {
        if entity_count(store, aux, ty).is_none() {
            return Err(Error::MissingRelation {
                label: spec.label.clone(),
                entity: ty.clone(),
            });
        }
    }
    let steps = (0..spec.types.len() - 1)
        .map(|t| step_matrix(store, aux, spec, t))
        .collect::<Result<Vec<_>>>()?;

    // valid[t][x]: some walk from node x at position t reaches the final user position
    let last = spec.types.len() - 1;
    let mut valid: Vec<Vec<bool>> = vec![Vec::new(); spec.types.len()];
    valid[last] = vec![true; store.n_users()];
    for t in (0..last).rev() {
        let m = &steps[t];
        valid[t] = (0..m.n_rows())
            .map(|x| m.row(x).iter().any(|&y| valid[t + 1][y as usize]))
            .collect();
    }

    let center = spec.center();
    let frontier_at_center = |u: usize| -> Vec<u32> {
        let mut frontier = vec![u as u32];
        for step in steps.iter().take(center) {
            let mut mark = vec![false; step.n_cols()];
            for &x in &frontier {
                for &y in step.row(x as usize) {
                    mark[y as usize] = true;
                }
            }
            frontier = (0..mark.len() as u32).filter(|&y| mark[y as usize]).collect();
        }
        frontier
    };

    let users: Vec<usize> = (0..store.n_users()).collect();
    match spec.dependency_position {
        None => {
            let rows = users
                .par_iter()
                .map(|&u| {
                    frontier_at_center(u)
                        .into_iter()
                        .filter(|&v| valid[center][v as usize])
                        .collect()
                })
                .collect();
            Ok(PathIncidence::Items(rows))
        }
        Some(k) => {
            let dep = &steps[k];
            let rows = users
                .par_iter()
                .map(|&u| {
                    let mut pairs = Vec::new();
                    for i in frontier_at_center(u) {
                        for &j in dep.row(i as usize) {
                            if valid[k + 1][j as usize] {
                                pairs.push((i, j));
                            }
                        }
                    }
                    pairs
                })
                .collect();
            Ok(PathIncidence::Pairs(rows))
        }
    }
}
