use std::collections::{BTreeMap, HashMap};

use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum WlKey {
    Base(u32),
    Refined { own: u32, neighbors: Vec<u32> },
}

/// What a compressed label stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WlLabel {
    /// A raw node label at depth 0.
    Base(u32),
    /// A node whose previous label was `own` and whose neighbours carried the
    /// sorted multiset `neighbors` of previous labels.
    Refined { own: u32, neighbors: Vec<u32> },
}

/// Injective compression of refined labels, shared by every graph that is
/// compared. Ids are global across depths.
#[derive(Debug, Clone, Default)]
pub struct WlDictionary {
    ids: HashMap<WlKey, u32>,
    labels: Vec<(usize, WlLabel)>,
}

impl WlDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Depth and meaning of a compressed label.
    pub fn label(&self, id: u32) -> (usize, &WlLabel) {
        let (d, l) = &self.labels[id as usize];
        (*d, l)
    }

    fn intern(&mut self, depth: usize, key: WlKey) -> u32 {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.labels.len() as u32;
        let label = match &key {
            WlKey::Base(x) => WlLabel::Base(*x),
            WlKey::Refined { own, neighbors } => WlLabel::Refined {
                own: *own,
                neighbors: neighbors.clone(),
            },
        };
        self.labels.push((depth, label));
        self.ids.insert(key, id);
        id
    }

    fn lookup(&self, key: &WlKey) -> Option<u32> {
        self.ids.get(key).copied()
    }
}

/// Per-depth compressed labels of every node, and their histograms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlFeature {
    pub node_labels: Vec<Vec<u32>>,
    pub histograms: Vec<BTreeMap<u32, u64>>,
}

impl WlFeature {
    fn from_labels(node_labels: Vec<Vec<u32>>) -> Self {
        let histograms = node_labels
            .iter()
            .map(|level| {
                let mut h = BTreeMap::new();
                for &l in level {
                    *h.entry(l).or_insert(0) += 1;
                }
                h
            })
            .collect();
        Self {
            node_labels,
            histograms,
        }
    }

    pub fn depth(&self) -> usize {
        self.histograms.len().saturating_sub(1)
    }
}

fn neighbor_multiset(g: &Graph, v: usize, prev: &[u32]) -> Vec<u32> {
    let mut ms: Vec<u32> = g.neighbors(v).iter().map(|&u| prev[u]).collect();
    ms.sort_unstable();
    ms
}

/// Weisfeiler-Lehman relabelling to `depth` rounds, extending `dict` with
/// any label it has not seen.
pub fn wl_refine(dict: &mut WlDictionary, g: &Graph, depth: usize) -> WlFeature {
    let mut levels = Vec::with_capacity(depth + 1);
    levels.push(
        g.node_labels()
            .iter()
            .map(|&x| dict.intern(0, WlKey::Base(x)))
            .collect::<Vec<u32>>(),
    );
    for h in 1..=depth {
        let prev: &Vec<u32> = levels.last().unwrap();
        let next = (0..g.node_count())
            .map(|v| {
                let key = WlKey::Refined {
                    own: prev[v],
                    neighbors: neighbor_multiset(g, v, prev),
                };
                dict.intern(h, key)
            })
            .collect();
        levels.push(next);
    }
    WlFeature::from_labels(levels)
}

/// Relabelling against a fixed dictionary. Labels the dictionary lacks, and
/// every label refined from one, are reported as `None`.
pub fn wl_refine_frozen(dict: &WlDictionary, g: &Graph, depth: usize) -> Vec<Vec<Option<u32>>> {
    let mut levels: Vec<Vec<Option<u32>>> = Vec::with_capacity(depth + 1);
    levels.push(
        g.node_labels()
            .iter()
            .map(|&x| dict.lookup(&WlKey::Base(x)))
            .collect(),
    );
    for _ in 1..=depth {
        let prev = levels.last().unwrap();
        let next = (0..g.node_count())
            .map(|v| {
                let own = prev[v]?;
                let mut neighbors = Vec::with_capacity(g.degree(v));
                for &u in g.neighbors(v) {
                    neighbors.push(prev[u]?);
                }
                neighbors.sort_unstable();
                dict.lookup(&WlKey::Refined { own, neighbors })
            })
            .collect();
        levels.push(next);
    }
    levels
}

/// Sparse counts of known labels over all depths of a frozen refinement.
pub fn frozen_histogram(levels: &[Vec<Option<u32>>]) -> BTreeMap<u32, u64> {
    let mut h = BTreeMap::new();
    for l in levels.iter().flatten().flatten() {
        *h.entry(*l).or_insert(0) += 1;
    }
    h
}

pub fn histogram_dot(a: &BTreeMap<u32, u64>, b: &BTreeMap<u32, u64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(k, x)| large.get(k).map(|y| (*x as f64) * (*y as f64)))
        .sum()
}

/// Sum over depths of the linear kernel between label histograms.
pub fn wl_kernel_features(a: &WlFeature, b: &WlFeature) -> f64 {
    a.histograms
        .iter()
        .zip(&b.histograms)
        .map(|(x, y)| histogram_dot(x, y))
        .sum()
}

pub fn wl_kernel(dict: &mut WlDictionary, g1: &Graph, g2: &Graph, depth: usize) -> f64 {
    let a = wl_refine(dict, g1, depth);
    let b = wl_refine(dict, g2, depth);
    wl_kernel_features(&a, &b)
}
