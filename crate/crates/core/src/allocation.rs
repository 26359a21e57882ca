//! Failure allocation: partition analyses into type-topic groups and
//! aggregate each group's error profile.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{make_key, ErrorType, FailureAnalysis, TypeTopicGroup, TypeTopicKey};

/// Aggregates analyses that share one key into a group. Sets are
/// deduplicated by exact string equality.
pub fn build_error_profile(analyses: Vec<FailureAnalysis>) -> Result<TypeTopicGroup> {
    let first = analyses.first().ok_or(Error::EmptyInput)?;
    let key = make_key(first)?;
    for a in &analyses[1..] {
        let k = make_key(a)?;
        if k != key {
            return Err(Error::MixedKeys(key.to_string(), k.to_string()));
        }
    }
    Ok(profile(key, analyses))
}

fn profile(key: TypeTopicKey, analyses: Vec<FailureAnalysis>) -> TypeTopicGroup {
    let error_types = analyses.iter().map(|a| a.error_type).collect();
    let root_causes = analyses.iter().map(|a| a.root_cause.clone()).collect();
    let required_knowledge = analyses
        .iter()
        .flat_map(|a| a.requires_knowledge.iter().cloned())
        .collect();
    let difficulty_factors = analyses
        .iter()
        .flat_map(|a| a.difficulty_factors.iter().cloned())
        .collect();
    TypeTopicGroup {
        key,
        analyses,
        error_types,
        root_causes,
        required_knowledge,
        difficulty_factors,
    }
}

/// Sort key for anything carrying a key and a size: larger first, then
/// by the key's display string.
pub(crate) fn priority_key(size: usize, key: &TypeTopicKey) -> (std::cmp::Reverse<usize>, String) {
    (std::cmp::Reverse(size), key.to_string())
}

/// Partitions analyses by type-topic key. Members keep input order; groups
/// come out largest first, ties broken by key string.
pub fn group_by_type_topic(analyses: &[FailureAnalysis]) -> Result<Vec<TypeTopicGroup>> {
    if analyses.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buckets: BTreeMap<TypeTopicKey, Vec<FailureAnalysis>> = BTreeMap::new();
    for a in analyses {
        buckets.entry(make_key(a)?).or_default().push(a.clone());
    }
    let mut groups: Vec<TypeTopicGroup> =
        buckets.into_iter().map(|(key, members)| profile(key, members)).collect();
    groups.sort_by_cached_key(|g| priority_key(g.len(), g.key()));
    Ok(groups)
}

/// One line of a groups file. Carries the summary fields for inspection
/// and the member analyses so the group can be rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLine {
    pub key: TypeTopicKey,
    pub size: usize,
    pub error_types: BTreeSet<ErrorType>,
    pub root_causes: BTreeSet<String>,
    pub required_knowledge: BTreeSet<String>,
    pub difficulty_factors: BTreeSet<String>,
    pub analyses: Vec<FailureAnalysis>,
}

impl From<&TypeTopicGroup> for GroupLine {
    fn from(g: &TypeTopicGroup) -> Self {
        GroupLine {
            key: g.key().clone(),
            size: g.len(),
            error_types: g.error_types().clone(),
            root_causes: g.root_causes().clone(),
            required_knowledge: g.required_knowledge().clone(),
            difficulty_factors: g.difficulty_factors().clone(),
            analyses: g.analyses().to_vec(),
        }
    }
}

impl TryFrom<GroupLine> for TypeTopicGroup {
    type Error = Error;

    fn try_from(line: GroupLine) -> Result<Self> {
        let group = build_error_profile(line.analyses)?;
        if group.key() != &line.key || group.len() != line.size {
            return Err(Error::SchemaViolation(format!(
                "group line {} does not match its analyses",
                line.key
            )));
        }
        Ok(group)
    }
}
