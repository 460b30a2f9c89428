use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::corpus::WalkCorpus;
use super::pattern::{AnonymousWalkPattern, PatternVocabulary};
use super::skipgram::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMethod {
    Arw,
    Gknn,
}

/// Settings of the kernel filters that produced a `Gknn` embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelEmbeddingMeta {
    pub radius: usize,
    pub depth: usize,
    pub samples: usize,
    pub masks: usize,
}

/// Provenance stored in every embedding artifact header.
///
/// `l`, `r` and `w` are the walk length, walks per node and window of an ARW
/// embedding and zero for kernel embeddings, which fill `kernel` instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub format_version: u32,
    pub method: EmbeddingMethod,
    pub l: usize,
    pub r: usize,
    pub w: usize,
    pub d: usize,
    pub seed: u64,
    pub vocab: Vec<AnonymousWalkPattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelEmbeddingMeta>,
}

/// Frozen per-node structural vectors for a graph collection.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralEmbedding {
    pub meta: EmbeddingMeta,
    /// One `node_count × d` matrix per graph.
    pub graphs: Vec<Array2<f64>>,
}

impl StructuralEmbedding {
    pub fn dim(&self) -> usize {
        self.meta.d
    }

    pub fn graph(&self, index: usize) -> Result<&Array2<f64>> {
        self.graphs.get(index).ok_or_else(|| {
            Error::MissingEmbedding(format!(
                "graph {index} has no structural embedding (artifact covers {} graphs)",
                self.graphs.len()
            ))
        })
    }

    /// Checks that graph `index` has exactly `nodes` rows.
    pub fn check_graph(&self, index: usize, nodes: usize) -> Result<&Array2<f64>> {
        let z = self.graph(index)?;
        if z.nrows() != nodes {
            return Err(Error::MissingEmbedding(format!(
                "graph {index}: node {} has no structural embedding ({} rows stored)",
                z.nrows().min(nodes),
                z.nrows()
            )));
        }
        Ok(z)
    }
}

/// Averages the table rows of each node's walk patterns.
///
/// Isolated nodes have no walks; they get the row of the single-node pattern
/// when the vocabulary holds it and the zero vector otherwise.
pub fn aggregate_node_embeddings<T: Scalar>(
    corpus: &WalkCorpus,
    vocab: &PatternVocabulary,
    table: &EmbeddingTable<T>,
    window: usize,
) -> Result<StructuralEmbedding> {
    if table.len() != vocab.len() {
        return Err(Error::Config(format!(
            "table has {} rows for a vocabulary of {}",
            table.len(),
            vocab.len()
        )));
    }
    let d = table.dim();
    let row =
        |id: u32| -> Array1<f64> { table.vectors.row(id as usize).mapv(|x| x.to_f64_lossy()) };
    let stationary = AnonymousWalkPattern::from_code(vec![0])
        .ok()
        .and_then(|p| vocab.id(&p))
        .map(row)
        .unwrap_or_else(|| Array1::zeros(d));

    let graphs = corpus
        .sequences
        .iter()
        .map(|nodes| {
            let mut z = Array2::zeros((nodes.len(), d));
            for (v, seq) in nodes.iter().enumerate() {
                let mut out = z.row_mut(v);
                if seq.is_empty() {
                    out.assign(&stationary);
                    continue;
                }
                for &id in seq {
                    if id as usize >= table.len() {
                        return Err(Error::Config(format!("corpus id {id} outside the table")));
                    }
                    out += &row(id);
                }
                out /= seq.len() as f64;
            }
            Ok(z)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(StructuralEmbedding {
        meta: EmbeddingMeta {
            format_version: EMBEDDING_FORMAT_VERSION,
            method: EmbeddingMethod::Arw,
            l: corpus.steps,
            r: corpus.walks_per_node,
            w: window,
            d,
            seed: corpus.seed,
            vocab: vocab.patterns().to_vec(),
            kernel: None,
        },
        graphs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::pattern::{build_vocabulary, enumerate_patterns};
    use ndarray::array;

    #[test]
    fn mean_of_pattern_rows() {
        let vocab = build_vocabulary(&enumerate_patterns(2)).unwrap();
        let table = EmbeddingTable {
            vectors: array![[1.0, 2.0], [4.0, -1.0]],
        };
        let corpus = WalkCorpus {
            sequences: vec![vec![vec![0, 0, 1], vec![1], vec![]]],
            steps: 2,
            walks_per_node: 3,
            seed: 0,
        };
        let z = aggregate_node_embeddings(&corpus, &vocab, &table, 1).unwrap();
        let g = &z.graphs[0];
        assert_eq!(g.row(0).to_vec(), vec![2.0, 1.0]);
        assert_eq!(g.row(1).to_vec(), vec![4.0, -1.0]);
        assert_eq!(g.row(2).to_vec(), vec![0.0, 0.0]);
        assert_eq!(z.meta.d, 2);
    }

    #[test]
    fn row_count_mismatch_names_node() {
        let z = StructuralEmbedding {
            meta: EmbeddingMeta {
                format_version: 1,
                method: EmbeddingMethod::Arw,
                l: 1,
                r: 1,
                w: 1,
                d: 1,
                seed: 0,
                vocab: vec![],
                kernel: None,
            },
            graphs: vec![Array2::zeros((2, 1))],
        };
        let err = z.check_graph(0, 3).unwrap_err().to_string();
        assert!(err.contains("node 2"), "{err}");
        assert!(z.check_graph(1, 1).is_err());
    }
}
