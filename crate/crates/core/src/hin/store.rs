use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ids::IdMap;
use super::matrix::BinMatrix;
use super::paths::{enumerate_path_incidence, PathIncidence};
use super::schema::{NetworkSchema, PathSpec, GROUP, ITEM, USER};
use crate::error::{Error, Result};

/// Group membership: ordered member lists with duplicates removed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTable {
    members: Vec<Vec<usize>>,
}

impl GroupTable {
    pub fn new(members: Vec<Vec<usize>>) -> Result<Self> {
        let mut out = Vec::with_capacity(members.len());
        for (g, list) in members.into_iter().enumerate() {
            if list.is_empty() {
                return Err(Error::EmptyGroup(g));
            }
            let mut seen = BTreeSet::new();
            out.push(list.into_iter().filter(|u| seen.insert(*u)).collect());
        }
        Ok(Self { members: out })
    }

    pub fn members(&self, g: usize) -> &[usize] {
        &self.members[g]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.members.iter().map(Vec::as_slice)
    }
}

/// One auxiliary bipartite relation between two entity types, e.g. user–video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxRelation {
    pub from: String,
    pub to: String,
    pub edges: BinMatrix,
}

/// Raw auxiliary records for one relation, keyed by external ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxRecords {
    pub from: String,
    pub to: String,
    pub pairs: Vec<(String, String)>,
}

/// Intermediate entity types (videos, courses, …) and their relations, used by
/// meta-paths longer than `U → V ← U`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxRelations {
    entities: BTreeMap<String, IdMap>,
    relations: Vec<AuxRelation>,
}

impl AuxRelations {
    /// Resolves raw aux records against the store's user and item id spaces.
    /// Other entity types get their own id space.
    pub fn build(users: &IdMap, items: &IdMap, records: &[AuxRecords]) -> Result<Self> {
        let mut labels: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for rec in records {
            for (a, b) in &rec.pairs {
                if rec.from != USER && rec.from != ITEM {
                    labels.entry(rec.from.clone()).or_default().push(a);
                }
                if rec.to != USER && rec.to != ITEM {
                    labels.entry(rec.to.clone()).or_default().push(b);
                }
            }
            for ty in [&rec.from, &rec.to] {
                if ty != USER && ty != ITEM {
                    labels.entry(ty.clone()).or_default();
                }
            }
        }
        let entities: BTreeMap<String, IdMap> = labels
            .into_iter()
            .map(|(ty, ls)| (ty, IdMap::from_labels(ls)))
            .collect();
        let resolve = |ty: &str, label: &str, index: usize| -> Result<usize> {
            match ty {
                USER => users.get(label).ok_or_else(|| Error::UnknownUser {
                    index,
                    user: label.to_owned(),
                }),
                ITEM => items.get(label).ok_or_else(|| Error::UnknownItem {
                    index,
                    item: label.to_owned(),
                }),
                other => Ok(entities[other].get(label).expect("collected above")),
            }
        };
        let count = |ty: &str| match ty {
            USER => users.len(),
            ITEM => items.len(),
            other => entities[other].len(),
        };
        let mut relations = Vec::new();
        for rec in records {
            let mut pairs = Vec::with_capacity(rec.pairs.len());
            for (index, (a, b)) in rec.pairs.iter().enumerate() {
                pairs.push((resolve(&rec.from, a, index)?, resolve(&rec.to, b, index)?));
            }
            relations.push(AuxRelation {
                from: rec.from.clone(),
                to: rec.to.clone(),
                edges: BinMatrix::from_pairs(count(&rec.from), count(&rec.to), pairs),
            });
        }
        relations.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
        Ok(Self {
            entities,
            relations,
        })
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn entity_ids(&self, ty: &str) -> Option<&IdMap> {
        self.entities.get(ty)
    }

    pub fn relations(&self) -> &[AuxRelation] {
        &self.relations
    }

    /// Edges from `from`-typed nodes to `to`-typed nodes, transposing a stored
    /// relation when only the reverse direction was recorded.
    pub fn matrix(&self, from: &str, to: &str) -> Option<Cow<'_, BinMatrix>> {
        if let Some(r) = self.relations.iter().find(|r| r.from == from && r.to == to) {
            return Some(Cow::Borrowed(&r.edges));
        }
        self.relations
            .iter()
            .find(|r| r.from == to && r.to == from)
            .map(|r| Cow::Owned(r.edges.transpose()))
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

/// Merged explicit + multi-hop targets with the rows that have no target at all.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergedTargets {
    pub users: BinMatrix,
    pub groups: BinMatrix,
    pub empty_users: Vec<usize>,
    pub empty_groups: Vec<usize>,
}

/// All interaction matrices of one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionStore {
    pub users: IdMap,
    pub items: IdMap,
    pub group_ids: IdMap,
    pub groups: GroupTable,
    /// users × items
    pub y_uv: BinMatrix,
    /// groups × items, OR of member rows of `y_uv`
    pub y_gv: BinMatrix,
    /// items × items dependency relation, zero diagonal
    pub y_vv: BinMatrix,
    /// union of `y_vv^1 … y_vv^depth`, zero diagonal
    pub closure: BinMatrix,
    pub y_uvv: BinMatrix,
    pub y_gvv: BinMatrix,
    pub depth: usize,
    pub aux: AuxRelations,
    pub per_path_incidence: BTreeMap<String, PathIncidence>,
}

impl InteractionStore {
    /// Builds a store from raw `(user, item)`, `(src_item, dst_item)` and
    /// `(group, user)` records. Multi-hop matrices are derived at depth 1.
    pub fn build<S: AsRef<str>>(
        user_item: &[(S, S)],
        item_item: &[(S, S)],
        group_user: &[(S, S)],
    ) -> Result<Self> {
        if user_item.is_empty() {
            return Err(Error::EmptyUsers);
        }
        let users = IdMap::from_labels(user_item.iter().map(|(u, _)| u.as_ref()));
        let items = IdMap::from_labels(user_item.iter().map(|(_, v)| v.as_ref()));
        let group_ids = IdMap::from_labels(group_user.iter().map(|(g, _)| g.as_ref()));

        let y_uv = BinMatrix::from_pairs(
            users.len(),
            items.len(),
            user_item.iter().map(|(u, v)| {
                (
                    users.get(u.as_ref()).expect("user collected"),
                    items.get(v.as_ref()).expect("item collected"),
                )
            }),
        );

        let mut deps = Vec::with_capacity(item_item.len());
        for (index, (a, b)) in item_item.iter().enumerate() {
            let lookup = |label: &str| {
                items.get(label).ok_or_else(|| Error::UnknownItem {
                    index,
                    item: label.to_owned(),
                })
            };
            deps.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        let mut y_vv = BinMatrix::from_pairs(items.len(), items.len(), deps);
        y_vv.drop_diagonal();

        // members are gathered in record order, then sorted for order invariance
        let mut members = vec![Vec::new(); group_ids.len()];
        for (index, (g, u)) in group_user.iter().enumerate() {
            let uid = users.get(u.as_ref()).ok_or_else(|| Error::UnknownUser {
                index,
                user: u.as_ref().to_owned(),
            })?;
            members[group_ids.get(g.as_ref()).expect("group collected")].push(uid);
        }
        for list in &mut members {
            list.sort_unstable();
        }
        let groups = GroupTable::new(members)?;

        let mut store = Self {
            y_gv: BinMatrix::new(groups.len(), items.len()),
            closure: BinMatrix::new(items.len(), items.len()),
            y_uvv: BinMatrix::new(users.len(), items.len()),
            y_gvv: BinMatrix::new(groups.len(), items.len()),
            users,
            items,
            group_ids,
            groups,
            y_uv,
            y_vv,
            depth: 1,
            aux: AuxRelations::default(),
            per_path_incidence: BTreeMap::new(),
        };
        store.recompute_group_rows();
        store.derive_multi_hop(1)?;
        Ok(store)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn with_aux(mut self, aux: AuxRelations) -> Self {
        self.aux = aux;
        self.per_path_incidence.clear();
        self
    }

    /// Rebuilds every group row of `y_gv` as the OR of its members' `y_uv` rows.
    pub fn recompute_group_rows(&mut self) {
        let y_uv = &self.y_uv;
        let mut pairs = Vec::new();
        for (g, members) in self.groups.iter().enumerate() {
            for &u in members {
                pairs.extend(y_uv.row(u).iter().map(|&v| (g, v as usize)));
            }
        }
        self.y_gv = BinMatrix::from_pairs(self.groups.len(), self.items.len(), pairs);
    }

    /// Derives `y_uvv` and `y_gvv` through the `depth`-step dependency closure.
    pub fn derive_multi_hop(&mut self, depth: usize) -> Result<()> {
        if depth == 0 {
            return Err(Error::Config("multi-hop depth must be at least 1".into()));
        }
        let mut closure = self.y_vv.clone();
        let mut power = self.y_vv.clone();
        for _ in 1..depth {
            power = power.bool_product(&self.y_vv);
            closure = closure.or(&power);
        }
        closure.drop_diagonal();
        self.y_uvv = self.y_uv.bool_product(&closure);
        self.y_gvv = self.y_gv.bool_product(&closure);
        self.closure = closure;
        self.depth = depth;
        self.per_path_incidence.clear();
        Ok(())
    }

    /// `ȳ^UV = y_uv OR y_uvv` and `ȳ^GV = y_gv OR y_gvv`, with empty rows listed.
    pub fn merged_targets(&self) -> MergedTargets {
        let users = self.y_uv.or(&self.y_uvv);
        let groups = self.y_gv.or(&self.y_gvv);
        let empty = |m: &BinMatrix| {
            (0..m.n_rows())
                .filter(|&r| m.row(r).is_empty())
                .collect::<Vec<_>>()
        };
        MergedTargets {
            empty_users: empty(&users),
            empty_groups: empty(&groups),
            users,
            groups,
        }
    }

    pub fn schema(&self) -> NetworkSchema {
        let mut s = NetworkSchema::new();
        s.add_relation("interacts", USER, ITEM);
        s.add_relation("depends", ITEM, ITEM);
        s.add_relation("member_of", USER, GROUP);
        for r in self.aux.relations() {
            s.add_relation(&format!("{}_{}", r.from, r.to), &r.from, &r.to);
        }
        s
    }

    /// Enumerates and caches the incidence of every spec, keyed by label.
    pub fn index_paths(&mut self, specs: &[PathSpec]) -> Result<()> {
        for spec in specs {
            let inc = enumerate_path_incidence(self, spec, &self.aux)?;
            self.per_path_incidence.insert(spec.label.clone(), inc);
        }
        Ok(())
    }

    pub fn groups_consistent(&self) -> bool {
        self.groups.iter().enumerate().all(|(g, members)| {
            let mut union: Vec<u32> = Vec::new();
            for &u in members {
                union = super::matrix::merge_sorted(&union, self.y_uv.row(u));
            }
            union == self.y_gv.row(g)
        })
    }
}
