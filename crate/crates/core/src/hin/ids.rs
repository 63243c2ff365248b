use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Bijection between raw external identifiers and dense indices.
///
/// Dense ids are assigned in natural order of the labels (integers
/// numerically, then everything else lexicographically), so the mapping does
/// not depend on the order records arrive in.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut labels: Vec<String> = labels.into_iter().map(|s| s.as_ref().to_owned()).collect();
        labels.sort_by(|a, b| natural_cmp(a, b));
        labels.dedup();
        Self::from(labels)
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl PartialEq for IdMap {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for IdMap {}

impl From<Vec<String>> for IdMap {
    fn from(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(map: IdMap) -> Self {
        map.labels
    }
}

pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_labels_sort_numerically() {
        let m = IdMap::from_labels(["10", "2", "b", "a", "2"]);
        assert_eq!(m.labels(), &["2", "10", "a", "b"]);
        assert_eq!(m.get("10"), Some(1));
        assert_eq!(m.get("zz"), None);
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let m = IdMap::from_labels(["u1", "u2"]);
        let json = serde_json::to_string(&m).unwrap();
        let back: IdMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back.get("u2"), Some(1));
    }
}
