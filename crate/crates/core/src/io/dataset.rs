//! Tab-separated dataset directories.
//!
//! ```text
//! user_item.tsv       user_id <TAB> item_id
//! item_item.tsv       src_item <TAB> dst_item
//! groups.tsv          group_id <TAB> user_id
//! aux_<from>_<to>.tsv from_id <TAB> to_id      (optional, any number)
//! ```
//!
//! Blank lines and lines starting with `#` are skipped.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hin::{AuxRecords, AuxRelations, IdMap, InteractionStore, ITEM, USER};

pub const USER_ITEM_FILE: &str = "user_item.tsv";
pub const ITEM_ITEM_FILE: &str = "item_item.tsv";
pub const GROUPS_FILE: &str = "groups.tsv";

/// Raw records of one dataset, keyed by external ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub user_item: Vec<(String, String)>,
    pub item_item: Vec<(String, String)>,
    pub group_user: Vec<(String, String)>,
    pub aux: Vec<AuxRecords>,
}

/// Dense id assignment for users, items and groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdTables {
    pub users: IdMap,
    pub items: IdMap,
    pub groups: IdMap,
}

fn parse_pairs(file: &str, text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        let err = |message: String| Error::Parse {
            file: file.to_owned(),
            line,
            message,
        };
        if fields.len() != 2 {
            return Err(err(format!("expected 2 tab-separated fields, found {}", fields.len())));
        }
        let (a, b) = (fields[0].trim(), fields[1].trim());
        if a.is_empty() || b.is_empty() {
            return Err(err("empty identifier".into()));
        }
        out.push((a.to_owned(), b.to_owned(), line));
    }
    Ok(out)
}

fn read_pairs(dir: &Path, file: &str) -> Result<Vec<(String, String, usize)>> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|e| Error::Parse {
        file: file.to_owned(),
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_pairs(file, &text)
}

/// `aux_video_item.tsv` → `("video", "item")`.
fn aux_types(name: &str) -> Option<(String, String)> {
    let stem = name.strip_prefix("aux_")?.strip_suffix(".tsv")?;
    let (from, to) = stem.split_once('_')?;
    (!from.is_empty() && !to.is_empty()).then(|| (from.to_owned(), to.to_owned()))
}

fn strip(records: Vec<(String, String, usize)>) -> Vec<(String, String)> {
    records.into_iter().map(|(a, b, _)| (a, b)).collect()
}

/// Reads a dataset directory. Every malformed line and every reference to a
/// user or item absent from `user_item.tsv` is reported with file and line.
pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let user_item = read_pairs(dir, USER_ITEM_FILE)?;
    let item_item = read_pairs(dir, ITEM_ITEM_FILE)?;
    let groups = read_pairs(dir, GROUPS_FILE)?;

    let users: HashSet<&str> = user_item.iter().map(|(u, _, _)| u.as_str()).collect();
    let items: HashSet<&str> = user_item.iter().map(|(_, v, _)| v.as_str()).collect();
    let dangling = |file: &str, line: usize, kind: &str, id: &str| Error::Parse {
        file: file.to_owned(),
        line,
        message: format!("unknown {kind} `{id}` (not present in {USER_ITEM_FILE})"),
    };
    for (a, b, line) in &item_item {
        for id in [a, b] {
            if !items.contains(id.as_str()) {
                return Err(dangling(ITEM_ITEM_FILE, *line, ITEM, id));
            }
        }
    }
    for (_, u, line) in &groups {
        if !users.contains(u.as_str()) {
            return Err(dangling(GROUPS_FILE, *line, USER, u));
        }
    }

    let mut aux_names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("aux_") && n.ends_with(".tsv"))
        .collect();
    aux_names.sort();
    let mut aux = Vec::new();
    for name in aux_names {
        let (from, to) = aux_types(&name).ok_or_else(|| Error::Parse {
            file: name.clone(),
            line: 0,
            message: "aux file name must look like aux_<from>_<to>.tsv".into(),
        })?;
        let records = read_pairs(dir, &name)?;
        for (a, b, line) in &records {
            for (ty, id) in [(&from, a), (&to, b)] {
                let known = match ty.as_str() {
                    USER => users.contains(id.as_str()),
                    ITEM => items.contains(id.as_str()),
                    _ => true,
                };
                if !known {
                    return Err(dangling(&name, *line, ty, id));
                }
            }
        }
        aux.push(AuxRecords {
            from,
            to,
            pairs: strip(records),
        });
    }

    Ok(DatasetBundle {
        user_item: strip(user_item),
        item_item: strip(item_item),
        group_user: strip(groups),
        aux,
    })
}

fn write_pairs(path: &Path, header: &str, pairs: &[(String, String)]) -> Result<()> {
    let mut text = String::with_capacity(pairs.len() * 16 + header.len() + 2);
    text.push_str("# ");
    text.push_str(header);
    text.push('\n');
    for (a, b) in pairs {
        let _ = writeln!(text, "{a}\t{b}");
    }
    fs::write(path, text)?;
    Ok(())
}

impl DatasetBundle {
    /// Writes the bundle in the directory layout read by [`load_dataset`].
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_pairs(&dir.join(USER_ITEM_FILE), "user_id\titem_id", &self.user_item)?;
        write_pairs(&dir.join(ITEM_ITEM_FILE), "src_item\tdst_item", &self.item_item)?;
        write_pairs(&dir.join(GROUPS_FILE), "group_id\tuser_id", &self.group_user)?;
        for rec in &self.aux {
            let name = format!("aux_{}_{}.tsv", rec.from, rec.to);
            write_pairs(&dir.join(name), &format!("{}_id\t{}_id", rec.from, rec.to), &rec.pairs)?;
        }
        Ok(())
    }

    pub fn id_tables(&self) -> IdTables {
        IdTables {
            users: IdMap::from_labels(self.user_item.iter().map(|(u, _)| u)),
            items: IdMap::from_labels(self.user_item.iter().map(|(_, v)| v)),
            groups: IdMap::from_labels(self.group_user.iter().map(|(g, _)| g)),
        }
    }

    /// Builds the interaction store with multi-hop matrices at `depth`.
    pub fn build_store(&self, depth: usize) -> Result<InteractionStore> {
        let mut store = InteractionStore::build(&self.user_item, &self.item_item, &self.group_user)?;
        if !self.aux.is_empty() {
            let aux = AuxRelations::build(&store.users, &store.items, &self.aux)?;
            store = store.with_aux(aux);
        }
        if depth != 1 {
            store.derive_multi_hop(depth)?;
        }
        Ok(store)
    }
}

/// Count rows and averages of the dataset summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub groups: usize,
    pub vv_dependencies: usize,
    pub uv_interactions: usize,
    pub uvv_interactions: usize,
    pub gv_interactions: usize,
    pub gvv_interactions: usize,
    pub avg_items_per_user: f64,
    pub avg_item_items_per_user: f64,
    pub avg_items_per_group: f64,
    pub avg_item_items_per_group: f64,
    pub avg_group_size: f64,
    pub depth: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl DatasetStats {
    pub fn of(store: &InteractionStore) -> Self {
        let members: usize = store.groups.iter().map(<[usize]>::len).sum();
        let (n, m, s) = (store.n_users(), store.n_items(), store.n_groups());
        let (uv, uvv, gv, gvv) = (store.y_uv.nnz(), store.y_uvv.nnz(), store.y_gv.nnz(), store.y_gvv.nnz());
        Self {
            users: n,
            items: m,
            groups: s,
            vv_dependencies: store.y_vv.nnz(),
            uv_interactions: uv,
            uvv_interactions: uvv,
            gv_interactions: gv,
            gvv_interactions: gvv,
            avg_items_per_user: ratio(uv, n),
            avg_item_items_per_user: ratio(uvv, n),
            avg_items_per_group: ratio(gv, s),
            avg_item_items_per_group: ratio(gvv, s),
            avg_group_size: ratio(members, s),
            depth: store.depth,
        }
    }

    /// Two-column text table in the row order of the published summary.
    pub fn table(&self) -> String {
        let rows: [(&str, String); 13] = [
            ("# Users", self.users.to_string()),
            ("# Items", self.items.to_string()),
            ("# Groups", self.groups.to_string()),
            ("# V-V dependencies", self.vv_dependencies.to_string()),
            ("# U-V interactions", self.uv_interactions.to_string()),
            ("# U-V-V interactions", self.uvv_interactions.to_string()),
            ("# G-V interactions", self.gv_interactions.to_string()),
            ("# G-V-V interactions", self.gvv_interactions.to_string()),
            ("Avg. # items/user", format!("{:.2}", self.avg_items_per_user)),
            ("Avg. # item-items/user", format!("{:.2}", self.avg_item_items_per_user)),
            ("Avg. # items/group", format!("{:.2}", self.avg_items_per_group)),
            ("Avg. # item-items/group", format!("{:.2}", self.avg_item_items_per_group)),
            ("Avg. group size", format!("{:.2}", self.avg_group_size)),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k}\t{v}");
        }
        out
    }
}

/// Per-item number of groups with an explicit (`y_gv`) and an implicit
/// (`y_gvv`) interaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemHistogram {
    pub items: Vec<String>,
    pub explicit: Vec<usize>,
    pub implicit: Vec<usize>,
}

impl ItemHistogram {
    pub fn of(store: &InteractionStore) -> Self {
        Self {
            items: store.items.labels().to_vec(),
            explicit: store.y_gv.col_counts(),
            implicit: store.y_gvv.col_counts(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("item\texplicit\timplicit\n");
        for ((v, e), i) in self.items.iter().zip(&self.explicit).zip(&self.implicit) {
            let _ = writeln!(out, "{v}\t{e}\t{i}");
        }
        out
    }

    /// Number of items per interaction count, for explicit and implicit counts.
    pub fn frequency(&self) -> BTreeMap<usize, (usize, usize)> {
        let mut out: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for &c in &self.explicit {
            out.entry(c).or_default().0 += 1;
        }
        for &c in &self.implicit {
            out.entry(c).or_default().1 += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skips_comments_and_blanks() {
        let rows = parse_pairs("f", "# header\n\nu1\tv1\r\nu2\tv2\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], ("u2".into(), "v2".into(), 4));
    }

    #[test]
    fn parse_locates_bad_line() {
        match parse_pairs("user_item.tsv", "u1\tv1\nu2 v2\n") {
            Err(Error::Parse { file, line, .. }) => {
                assert_eq!(file, "user_item.tsv");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_pairs("f", "a\t\n").is_err());
        assert!(parse_pairs("f", "a\tb\tc\n").is_err());
    }

    #[test]
    fn aux_file_names() {
        assert_eq!(aux_types("aux_user_video.tsv"), Some(("user".into(), "video".into())));
        assert_eq!(aux_types("aux_user.tsv"), None);
    }
}
