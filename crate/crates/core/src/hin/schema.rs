use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const USER: &str = "user";
pub const ITEM: &str = "item";
pub const GROUP: &str = "group";

/// Entity type labels used by the built-in path families.
pub const VIDEO: &str = "video";
pub const COURSE: &str = "course";

/// A typed node of the network: entity type label plus dense id within that type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub entity: String,
    pub id: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationType {
    pub name: String,
    pub from: String,
    pub to: String,
}

/// Meta-template of the heterogeneous network: entity types, relation types,
/// and the two typing functions over nodes and edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSchema {
    entity_types: BTreeSet<String>,
    relation_types: BTreeMap<String, RelationType>,
}

impl NetworkSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity_type(&mut self, label: &str) {
        self.entity_types.insert(label.to_owned());
    }

    pub fn add_relation(&mut self, name: &str, from: &str, to: &str) {
        self.add_entity_type(from);
        self.add_entity_type(to);
        self.relation_types.insert(
            name.to_owned(),
            RelationType {
                name: name.to_owned(),
                from: from.to_owned(),
                to: to.to_owned(),
            },
        );
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &str> {
        self.entity_types.iter().map(String::as_str)
    }

    pub fn relation_types(&self) -> impl Iterator<Item = &RelationType> {
        self.relation_types.values()
    }

    /// A network only counts as heterogeneous when `|T| + |R| > 2`.
    pub fn is_heterogeneous(&self) -> bool {
        self.entity_types.len() + self.relation_types.len() > 2
    }

    /// Entity-type mapping.
    pub fn entity_type<'a>(&self, node: &'a Node) -> Option<&'a str> {
        self.entity_types
            .contains(&node.entity)
            .then_some(node.entity.as_str())
    }

    /// Relation-type mapping for an edge between two typed nodes. Relations are
    /// traversable in both directions.
    pub fn relation_type(&self, from: &Node, to: &Node) -> Option<&RelationType> {
        self.relation_between(&from.entity, &to.entity)
    }

    pub fn relation_between(&self, a: &str, b: &str) -> Option<&RelationType> {
        self.relation_types
            .values()
            .find(|r| (r.from == a && r.to == b) || (r.from == b && r.to == a))
    }

    /// Checks that every step of `spec` is backed by a relation of this schema.
    pub fn check_path(&self, spec: &PathSpec) -> Result<()> {
        spec.validate()?;
        for entity in &spec.types {
            if !self.entity_types.contains(entity) {
                return Err(Error::MissingRelation {
                    label: spec.label.clone(),
                    entity: entity.clone(),
                });
            }
        }
        for (t, pair) in spec.types.windows(2).enumerate() {
            if spec.dependency_position == Some(t) {
                continue;
            }
            if self.relation_between(&pair[0], &pair[1]).is_none() {
                let entity = if pair[0] == USER || pair[0] == ITEM {
                    pair[1].clone()
                } else {
                    pair[0].clone()
                };
                return Err(Error::MissingRelation {
                    label: spec.label.clone(),
                    entity,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    MetaPath,
    DependencyMetaPath,
}

/// Declarative meta-path (`U → … → V ← … ← U`) or dependency meta-path
/// (`U → … → V ↦ V ← … ← U`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    pub label: String,
    pub kind: PathKind,
    pub types: Vec<String>,
    /// Index `k` such that the step `types[k] ↦ types[k + 1]` is the dependency step.
    pub dependency_position: Option<usize>,
}

impl PathSpec {
    pub fn meta(label: &str, types: &[&str]) -> Self {
        Self {
            label: label.to_owned(),
            kind: PathKind::MetaPath,
            types: types.iter().map(|s| s.to_string()).collect(),
            dependency_position: None,
        }
    }

    pub fn dependency(label: &str, types: &[&str], position: usize) -> Self {
        Self {
            label: label.to_owned(),
            kind: PathKind::DependencyMetaPath,
            types: types.iter().map(|s| s.to_string()).collect(),
            dependency_position: Some(position),
        }
    }

    /// Built-in families: `P1`/`PP1` through items only, `P2`/`PP2` through
    /// videos, `P3`/`PP3` through courses.
    pub fn standard(label: &str) -> Result<Self> {
        let spec = match label {
            "P1" => Self::meta("P1", &[USER, ITEM, USER]),
            "PP1" => Self::dependency("PP1", &[USER, ITEM, ITEM, USER], 1),
            "P2" => Self::meta("P2", &[USER, VIDEO, ITEM, VIDEO, USER]),
            "PP2" => Self::dependency("PP2", &[USER, VIDEO, ITEM, ITEM, VIDEO, USER], 2),
            "P3" => Self::meta("P3", &[USER, COURSE, ITEM, COURSE, USER]),
            "PP3" => Self::dependency("PP3", &[USER, COURSE, ITEM, ITEM, COURSE, USER], 2),
            other => {
                return Err(Error::InvalidPath {
                    label: other.to_owned(),
                    reason: "unknown built-in path label".into(),
                })
            }
        };
        Ok(spec)
    }

    pub fn is_dependency(&self) -> bool {
        self.kind == PathKind::DependencyMetaPath
    }

    /// Position of the central item: the dependency source for dependency
    /// paths, otherwise the first item-typed position.
    pub fn center(&self) -> usize {
        match self.dependency_position {
            Some(k) => k,
            None => self.types.iter().position(|t| t == ITEM).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::InvalidPath {
            label: self.label.clone(),
            reason: reason.to_owned(),
        };
        if self.types.len() < 3 {
            return Err(fail("needs at least three entity types"));
        }
        if self.types.first().map(String::as_str) != Some(USER)
            || self.types.last().map(String::as_str) != Some(USER)
        {
            return Err(fail("must start and end at the user type"));
        }
        match (self.kind, self.dependency_position) {
            (PathKind::MetaPath, Some(_)) => return Err(fail("meta-path cannot carry a dependency step")),
            (PathKind::DependencyMetaPath, None) => return Err(fail("dependency meta-path needs a dependency step")),
            (PathKind::DependencyMetaPath, Some(k)) => {
                if k + 1 >= self.types.len() || self.types[k] != ITEM || self.types[k + 1] != ITEM {
                    return Err(fail("dependency step must join two item positions"));
                }
            }
            (PathKind::MetaPath, None) => {
                if !self.types.iter().any(|t| t == ITEM) {
                    return Err(fail("meta-path must pass through an item"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_schema() -> NetworkSchema {
        let mut s = NetworkSchema::new();
        s.add_relation("interacts", USER, ITEM);
        s.add_relation("depends", ITEM, ITEM);
        s.add_relation("member_of", USER, GROUP);
        s
    }

    #[test]
    fn hin_condition() {
        assert!(base_schema().is_heterogeneous());
        let mut s = NetworkSchema::new();
        s.add_relation("links", USER, USER);
        assert!(!s.is_heterogeneous());
    }

    #[test]
    fn typing_functions() {
        let s = base_schema();
        let u = Node { entity: USER.into(), id: 0 };
        let v = Node { entity: ITEM.into(), id: 3 };
        assert_eq!(s.entity_type(&u), Some(USER));
        assert_eq!(s.relation_type(&v, &u).unwrap().name, "interacts");
        let x = Node { entity: "video".into(), id: 0 };
        assert_eq!(s.entity_type(&x), None);
    }

    #[test]
    fn standard_paths_validate() {
        for l in ["P1", "PP1", "P2", "PP2", "P3", "PP3"] {
            PathSpec::standard(l).unwrap().validate().unwrap();
        }
        assert!(PathSpec::standard("P9").is_err());
    }

    #[test]
    fn malformed_paths_rejected() {
        assert!(PathSpec::meta("x", &[USER, ITEM, GROUP]).validate().is_err());
        assert!(PathSpec::dependency("x", &[USER, ITEM, ITEM, USER], 0).validate().is_err());
        let mut p = PathSpec::meta("x", &[USER, ITEM, USER]);
        p.dependency_position = Some(1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn missing_aux_relation_names_the_path() {
        let err = base_schema().check_path(&PathSpec::standard("P2").unwrap()).unwrap_err();
        match err {
            Error::MissingRelation { label, entity } => {
                assert_eq!(label, "P2");
                assert_eq!(entity, VIDEO);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn centers() {
        assert_eq!(PathSpec::standard("P1").unwrap().center(), 1);
        assert_eq!(PathSpec::standard("P2").unwrap().center(), 2);
        assert_eq!(PathSpec::standard("PP2").unwrap().center(), 2);
    }
}
