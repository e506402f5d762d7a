//! Finite-set attributes attached to nodes and edges.
//!
//! An [`AttrSet`] maps string keys to finite, duplicate-free sets of scalar
//! values. A key never maps to an empty set: removing the last value of a key
//! removes the key itself, so "no values" and "key absent" are the same state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A scalar attribute value. Comparison across variants is always unequal;
/// ordering is by variant (bool < int < string), then by value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Bool(b) => write!(f, "{b}"),
            AttrValue::Int(i) => write!(f, "{i}"),
            AttrValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<bool> for AttrValue {
    fn from(v: bool) -> Self {
        AttrValue::Bool(v)
    }
}

impl From<i64> for AttrValue {
    fn from(v: i64) -> Self {
        AttrValue::Int(v)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Str(v.to_string())
    }
}

impl From<String> for AttrValue {
    fn from(v: String) -> Self {
        AttrValue::Str(v)
    }
}

/// A finite map from attribute keys to non-empty value sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttrSet {
    entries: BTreeMap<String, BTreeSet<AttrValue>>,
}

impl AttrSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an attr set from `(key, values)` pairs; empty value lists are
    /// dropped.
    pub fn from_pairs<K, V, I, VS>(pairs: I) -> Self
    where
        K: Into<String>,
        V: Into<AttrValue>,
        VS: IntoIterator<Item = V>,
        I: IntoIterator<Item = (K, VS)>,
    {
        let mut set = AttrSet::new();
        for (k, vs) in pairs {
            let key = k.into();
            for v in vs {
                set.insert(key.clone(), v.into());
            }
        }
        set
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<AttrValue>) {
        self.entries.entry(key.into()).or_default().insert(value.into());
    }

    pub fn get(&self, key: &str) -> Option<&BTreeSet<AttrValue>> {
        self.entries.get(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<AttrValue>)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn contains(&self, key: &str, value: &AttrValue) -> bool {
        self.entries.get(key).is_some_and(|vs| vs.contains(value))
    }

    /// True if a key maps to an empty set, which violates the invariant.
    /// Only reachable through deserialization of a malformed document.
    pub fn has_empty_value_set(&self) -> bool {
        self.entries.values().any(|vs| vs.is_empty())
    }

    /// Drops keys whose value sets became empty.
    pub fn normalize(&mut self) {
        self.entries.retain(|_, vs| !vs.is_empty());
    }

    /// Per-key subset inclusion: every value of `self` under every key is
    /// also a value of `other` under the same key.
    pub fn included_in(&self, other: &AttrSet) -> bool {
        self.entries.iter().all(|(k, vs)| match other.entries.get(k) {
            Some(ovs) => vs.is_subset(ovs),
            None => vs.is_empty(),
        })
    }

    /// Per-key union.
    pub fn union(&self, other: &AttrSet) -> AttrSet {
        let mut out = self.clone();
        for (k, vs) in &other.entries {
            out.entries.entry(k.clone()).or_default().extend(vs.iter().cloned());
        }
        out.normalize();
        out
    }

    /// Per-key intersection; keys with empty intersections are dropped.
    pub fn intersection(&self, other: &AttrSet) -> AttrSet {
        let mut out = AttrSet::new();
        for (k, vs) in &self.entries {
            if let Some(ovs) = other.entries.get(k) {
                let both: BTreeSet<AttrValue> = vs.intersection(ovs).cloned().collect();
                if !both.is_empty() {
                    out.entries.insert(k.clone(), both);
                }
            }
        }
        out
    }

    /// Per-key difference `self \ other`; keys emptied by the subtraction are
    /// dropped.
    pub fn difference(&self, other: &AttrSet) -> AttrSet {
        let mut out = AttrSet::new();
        for (k, vs) in &self.entries {
            let rest: BTreeSet<AttrValue> = match other.entries.get(k) {
                Some(ovs) => vs.difference(ovs).cloned().collect(),
                None => vs.clone(),
            };
            if !rest.is_empty() {
                out.entries.insert(k.clone(), rest);
            }
        }
        out
    }
}

impl<K: Into<String>, V: Into<AttrValue>> FromIterator<(K, V)> for AttrSet {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        let mut set = AttrSet::new();
        for (k, v) in iter {
            set.insert(k, v);
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusion_is_per_key() {
        let small: AttrSet = [("k", AttrValue::Int(1))].into_iter().collect();
        let big = AttrSet::from_pairs([("k", vec![AttrValue::Int(1), AttrValue::Int(2)])]);
        assert!(small.included_in(&big));
        assert!(!big.included_in(&small));
    }

    #[test]
    fn cross_type_values_are_distinct() {
        let a: AttrSet = [("k", AttrValue::Int(1))].into_iter().collect();
        let b: AttrSet = [("k", AttrValue::Str("1".into()))].into_iter().collect();
        assert!(!a.included_in(&b));
    }

    #[test]
    fn difference_drops_emptied_keys() {
        let a = AttrSet::from_pairs([("k", vec![1i64, 2])]);
        let b = AttrSet::from_pairs([("k", vec![1i64, 2, 3])]);
        assert!(a.difference(&b).is_empty());
    }

    #[test]
    fn union_and_intersection() {
        let a = AttrSet::from_pairs([("k", vec![1i64]), ("j", vec![5])]);
        let b = AttrSet::from_pairs([("k", vec![2i64])]);
        let u = a.union(&b);
        assert_eq!(u.get("k").unwrap().len(), 2);
        assert!(a.intersection(&b).is_empty());
    }
}
