use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Walk;

/// Walk shape: each position holds the index at which its node first appeared.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnonymousWalkPattern(Vec<u32>);

impl AnonymousWalkPattern {
    /// Validates a raw code against the restricted-growth and no-repeat rules.
    pub fn from_code(code: Vec<u32>) -> Result<Self> {
        if !is_anonymous_code(&code) {
            return Err(Error::Config(format!(
                "{code:?} is not an anonymous walk code"
            )));
        }
        Ok(Self(code))
    }

    pub fn code(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

impl fmt::Display for AnonymousWalkPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

pub(crate) fn is_anonymous_code(code: &[u32]) -> bool {
    let Some(&first) = code.first() else {
        return false;
    };
    if first != 0 {
        return false;
    }
    let mut max = 0;
    for pair in code.windows(2) {
        let next = pair[1];
        if next == pair[0] || next > max + 1 {
            return false;
        }
        max = max.max(next);
    }
    true
}

/// Replaces node ids by the position of their first occurrence in the walk.
pub fn anonymize(walk: &Walk) -> AnonymousWalkPattern {
    anonymize_nodes(walk.nodes())
}

pub(crate) fn anonymize_nodes(nodes: &[usize]) -> AnonymousWalkPattern {
    let mut seen: Vec<usize> = Vec::with_capacity(nodes.len());
    let code = nodes
        .iter()
        .map(|v| match seen.iter().position(|s| s == v) {
            Some(i) => i as u32,
            None => {
                seen.push(*v);
                seen.len() as u32 - 1
            }
        })
        .collect();
    AnonymousWalkPattern(code)
}

/// Dense ids for the anonymous patterns of one walk length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatternVocabulary {
    patterns: Vec<AnonymousWalkPattern>,
    index: HashMap<AnonymousWalkPattern, u32>,
}

impl PatternVocabulary {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn id(&self, pattern: &AnonymousWalkPattern) -> Option<u32> {
        self.index.get(pattern).copied()
    }

    pub fn pattern(&self, id: u32) -> &AnonymousWalkPattern {
        &self.patterns[id as usize]
    }

    pub fn patterns(&self) -> &[AnonymousWalkPattern] {
        &self.patterns
    }

    /// Number of nodes per pattern, or `None` while empty.
    pub fn pattern_len(&self) -> Option<usize> {
        self.patterns.first().map(AnonymousWalkPattern::len)
    }

    /// Returns the id of `pattern`, assigning the next free id if unseen.
    pub fn insert(&mut self, pattern: AnonymousWalkPattern) -> Result<u32> {
        if let Some(id) = self.id(&pattern) {
            return Ok(id);
        }
        if let Some(len) = self.pattern_len() {
            if len != pattern.len() {
                return Err(Error::Config(format!(
                    "pattern {pattern} has length {}, vocabulary holds length {len}",
                    pattern.len()
                )));
            }
        }
        let id = self.patterns.len() as u32;
        self.index.insert(pattern.clone(), id);
        self.patterns.push(pattern);
        Ok(id)
    }
}

/// Builds a vocabulary with ids in first-seen order.
pub fn build_vocabulary<'a>(
    patterns: impl IntoIterator<Item = &'a AnonymousWalkPattern>,
) -> Result<PatternVocabulary> {
    let mut vocab = PatternVocabulary::default();
    for p in patterns {
        vocab.insert(p.clone())?;
    }
    Ok(vocab)
}

/// Every anonymous pattern that an `l`-step walk on a simple graph can take,
/// in lexicographic order.
pub fn enumerate_patterns(l: usize) -> Vec<AnonymousWalkPattern> {
    fn extend(code: &mut Vec<u32>, max: u32, target: usize, out: &mut Vec<AnonymousWalkPattern>) {
        if code.len() == target {
            out.push(AnonymousWalkPattern(code.clone()));
            return;
        }
        let last = *code.last().unwrap();
        for next in 0..=max + 1 {
            if next != last {
                code.push(next);
                extend(code, max.max(next), target, out);
                code.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut vec![0], 0, l + 1, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(code: &[u32]) -> AnonymousWalkPattern {
        AnonymousWalkPattern::from_code(code.to_vec()).unwrap()
    }

    #[test]
    fn first_occurrence_codes() {
        let w = |n: &[usize]| anonymize(&Walk::from_nodes(n.to_vec()));
        assert_eq!(w(&[1, 2, 1]).code(), &[0, 1, 0]);
        assert_eq!(w(&[7]).code(), &[0]);
        assert_eq!(w(&[10, 11, 12, 10, 12]).code(), &[0, 1, 2, 0, 2]);
    }

    #[test]
    fn vocabulary_dedups_in_first_seen_order() {
        let corpus = [pat(&[0, 1, 0]), pat(&[0, 1, 2]), pat(&[0, 1, 0])];
        let v = build_vocabulary(&corpus).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.id(&pat(&[0, 1, 0])), Some(0));
        assert_eq!(v.id(&pat(&[0, 1, 2])), Some(1));
    }

    #[test]
    fn mixed_lengths_rejected() {
        let corpus = [pat(&[0, 1, 0]), pat(&[0, 1])];
        assert!(build_vocabulary(&corpus).is_err());
    }

    #[test]
    fn invalid_codes_rejected() {
        for bad in [&[1u32, 0][..], &[0, 0], &[0, 2], &[]] {
            assert!(AnonymousWalkPattern::from_code(bad.to_vec()).is_err());
        }
    }

    /// Brute-force oracle: filter every sequence over {0..=l} by the rules.
    fn brute_force(l: usize) -> Vec<Vec<u32>> {
        let n = l + 1;
        let base = n as u32;
        let total = (base as u64).pow(n as u32);
        let mut out = Vec::new();
        for mut k in 0..total {
            let mut code = Vec::with_capacity(n);
            for _ in 0..n {
                code.push((k % base as u64) as u32);
                k /= base as u64;
            }
            code.reverse();
            if is_anonymous_code(&code) {
                out.push(code);
            }
        }
        out
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for l in 1..=5 {
            let got: Vec<Vec<u32>> = enumerate_patterns(l)
                .iter()
                .map(|p| p.code().to_vec())
                .collect();
            assert_eq!(got, brute_force(l), "l = {l}");
        }
        assert_eq!(enumerate_patterns(2).len(), 2);
        assert_eq!(enumerate_patterns(3).len(), 5);
    }
}
