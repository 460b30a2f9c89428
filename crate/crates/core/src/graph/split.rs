use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng;

/// Fractions of graphs assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

/// Disjoint graph indices; their union covers the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Largest-remainder allocation of `n` items to the three parts.
fn quotas(n: usize, r: &SplitRatios) -> [usize; 3] {
    let total = r.train + r.valid + r.test;
    let exact = [r.train, r.valid, r.test].map(|x| x / total * n as f64);
    let mut q = exact.map(|x| x.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut rest = n - q.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        q[i] += 1;
        rest -= 1;
    }
    q
}

/// Per-stratum allocation whose part totals equal the unstratified quotas.
///
/// Each stratum first receives the floor of its exact share; the leftover
/// units go to (stratum, part) cells in descending order of fractional
/// remainder, as long as both the stratum and the part still have room.
fn strata_quotas(sizes: &[usize], r: &SplitRatios) -> Vec<[usize; 3]> {
    let total = r.train + r.valid + r.test;
    let shares = [r.train, r.valid, r.test].map(|x| x / total);
    let mut need = quotas(sizes.iter().sum(), r);
    let mut cells = Vec::new();
    let mut out: Vec<[usize; 3]> = sizes
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let mut q = [0; 3];
            for j in 0..3 {
                let exact = shares[j] * c as f64;
                q[j] = exact.floor() as usize;
                need[j] -= q[j];
                cells.push((exact - exact.floor(), k, j));
            }
            q
        })
        .collect();
    let mut left: Vec<usize> = sizes
        .iter()
        .zip(&out)
        .map(|(c, q)| c - q.iter().sum::<usize>())
        .collect();
    cells.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });
    while left.iter().any(|&l| l > 0) {
        for &(_, k, j) in &cells {
            if left[k] > 0 && need[j] > 0 {
                out[k][j] += 1;
                left[k] -= 1;
                need[j] -= 1;
            }
        }
    }
    out
}

/// Seeded train/validation/test split.
///
/// When `stratified` is set and every class has at least three members, each
/// class is split separately so that class proportions carry over to all three
/// parts. Otherwise (or for regression targets) the split is a plain shuffle.
pub fn make_splits(
    graphs: &[Graph],
    ratios: SplitRatios,
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit> {
    let n = graphs.len();
    if n < 10 {
        return Err(Error::Config(format!(
            "need at least 10 graphs to split, found {n}"
        )));
    }
    if [ratios.train, ratios.valid, ratios.test]
        .iter()
        .any(|&x| !(x >= 0.0))
        || ratios.train + ratios.valid + ratios.test <= 0.0
    {
        return Err(Error::Config(format!("invalid split ratios {ratios:?}")));
    }
    let mut rng = rng::stream(seed, &[0x5911]);

    let classes: Option<Vec<usize>> = graphs.iter().map(Graph::class).collect();
    let groups: Option<Vec<Vec<usize>>> = classes.filter(|_| stratified).and_then(|cls| {
        let k = cls.iter().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (i, c) in cls.into_iter().enumerate() {
            groups[c].push(i);
        }
        groups.retain(|g| !g.is_empty());
        groups.iter().all(|g| g.len() >= 3).then_some(groups)
    });
    let used_strata = groups.is_some();
    let groups = groups.unwrap_or_else(|| vec![(0..n).collect()]);

    let mut split = DatasetSplit {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        seed,
        stratified: used_strata,
    };
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    for (mut group, [a, b, _]) in groups.into_iter().zip(strata_quotas(&sizes, &ratios)) {
        group.shuffle(&mut rng);
        split.train.extend_from_slice(&group[..a]);
        split.valid.extend_from_slice(&group[a..a + b]);
        split.test.extend_from_slice(&group[a + b..]);
    }
    for part in [&mut split.train, &mut split.valid, &mut split.test] {
        part.sort_unstable();
    }
    Ok(split)
}
