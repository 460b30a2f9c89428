use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Graph, Target};
use crate::error::{Error, Result};

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn parse_int(path: &Path, line: usize, field: &str) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected an integer, found {field:?}"),
    })
}

fn column(path: &Path) -> Result<Vec<(usize, i64)>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let first = text.split(',').next().unwrap_or_default();
            Ok((line, parse_int(path, line, first)?))
        })
        .collect()
}

/// Maps raw integer values onto dense ids `0..k` in ascending raw order.
fn densify(values: &[i64]) -> (Vec<u32>, Vec<i64>) {
    let distinct: Vec<i64> = values
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ids = values
        .iter()
        .map(|v| distinct.binary_search(v).unwrap() as u32)
        .collect();
    (ids, distinct)
}

/// Loads a dataset in the TU benchmark text format.
///
/// Node ids in the files are 1-based. Graph labels are remapped to dense class
/// ids in ascending order of their raw values (MUTAG's -1/1 become 0/1), and
/// node labels likewise. A missing node-label file gives every node label 0.
pub fn load_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<Vec<Graph>> {
    let dir = dir.as_ref();
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator = column(&file("graph_indicator"))?;
    let graph_labels = column(&file("graph_labels"))?;
    let node_count = indicator.len();
    let graph_count = graph_labels.len();

    let mut graph_of = Vec::with_capacity(node_count);
    let mut local_of = Vec::with_capacity(node_count);
    let mut sizes = vec![0usize; graph_count];
    for &(line, gid) in &indicator {
        if gid < 1 || gid as usize > graph_count {
            return Err(Error::Integrity(format!(
                "{}:{line}: graph id {gid} outside 1..={graph_count}",
                file("graph_indicator").display()
            )));
        }
        let g = gid as usize - 1;
        graph_of.push(g);
        local_of.push(sizes[g]);
        sizes[g] += 1;
    }

    let label_path = file("node_labels");
    let node_labels: Vec<u32> = if label_path.exists() {
        let raw = column(&label_path)?;
        if raw.len() != node_count {
            return Err(Error::Integrity(format!(
                "{} has {} rows for {node_count} nodes",
                label_path.display(),
                raw.len()
            )));
        }
        densify(&raw.iter().map(|&(_, v)| v).collect::<Vec<_>>()).0
    } else {
        vec![0; node_count]
    };

    let adjacency = file("A");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_count];
    let mut self_loops = 0usize;
    for (line, text) in read_lines(&adjacency)? {
        let mut parts = text.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                path: adjacency.clone(),
                line,
                message: format!("expected \"u, v\", found {text:?}"),
            });
        };
        let (u, v) = (
            parse_int(&adjacency, line, a)?,
            parse_int(&adjacency, line, b)?,
        );
        for n in [u, v] {
            if n < 1 || n as usize > node_count {
                return Err(Error::Integrity(format!(
                    "{}:{line}: edge references unknown node {n}",
                    adjacency.display()
                )));
            }
        }
        let (u, v) = (u as usize - 1, v as usize - 1);
        if graph_of[u] != graph_of[v] {
            return Err(Error::Integrity(format!(
                "{}:{line}: edge joins nodes of graphs {} and {}",
                adjacency.display(),
                graph_of[u] + 1,
                graph_of[v] + 1
            )));
        }
        if u == v {
            self_loops += 1;
            continue;
        }
        edges[graph_of[u]].push((local_of[u], local_of[v]));
    }
    if self_loops > 0 {
        log::warn!("{name}: dropped {self_loops} self-loop entries");
    }

    let mut labels_per_graph: Vec<Vec<u32>> =
        sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
    for (node, &g) in graph_of.iter().enumerate() {
        labels_per_graph[g].push(node_labels[node]);
    }
    let (classes, _) = densify(&graph_labels.iter().map(|&(_, v)| v).collect::<Vec<_>>());

    edges
        .into_iter()
        .zip(labels_per_graph)
        .zip(classes)
        .zip(sizes)
        .map(|(((e, labels), class), n)| {
            Ok(Graph::new(n, e, labels)?.with_target(Target::Class(class as usize)))
        })
        .collect()
}

/// One molecule in the JSON interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRecord {
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub node_labels: Vec<u32>,
    pub targets: Vec<f64>,
}

impl MoleculeRecord {
    fn into_graph(self, index: usize) -> Result<Graph> {
        if self.node_labels.len() != self.num_nodes {
            return Err(Error::Schema(format!(
                "record {index}: {} node labels for num_nodes = {}",
                self.node_labels.len(),
                self.num_nodes
            )));
        }
        if let Some(e) = self
            .edges
            .iter()
            .find(|[u, v]| *u >= self.num_nodes || *v >= self.num_nodes)
        {
            return Err(Error::Schema(format!(
                "record {index}: edge {e:?} outside 0..{}",
                self.num_nodes
            )));
        }
        let loops = self.edges.iter().filter(|[u, v]| u == v).count();
        if loops > 0 {
            log::warn!("record {index}: dropped {loops} self-loops");
        }
        let edges = self
            .edges
            .iter()
            .filter(|[u, v]| u != v)
            .map(|&[u, v]| (u, v));
        Ok(
            Graph::new(self.num_nodes, edges.collect::<Vec<_>>(), self.node_labels)?
                .with_target(Target::Values(self.targets)),
        )
    }
}

/// Loads a JSON array of [`MoleculeRecord`]s.
pub fn load_json_molecules(path: impl AsRef<Path>) -> Result<Vec<Graph>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let records: Vec<MoleculeRecord> = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_graph(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn minimal_tu_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T_A.txt", "1, 2\n2, 1\n");
        write(dir.path(), "T_graph_indicator.txt", "1\n1\n");
        write(dir.path(), "T_graph_labels.txt", "1\n");
        let graphs = load_tu_dataset(dir.path(), "T").unwrap();
        assert_eq!(graphs.len(), 1);
        assert_eq!(graphs[0].node_count(), 2);
        assert_eq!(graphs[0].edge_count(), 1);
        assert_eq!(graphs[0].node_labels(), &[0, 0]);
        assert_eq!(graphs[0].class(), Some(0));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T_A.txt", "1, 2\n2; 1\n");
        write(dir.path(), "T_graph_indicator.txt", "1\n1\n");
        write(dir.path(), "T_graph_labels.txt", "1\n");
        match load_tu_dataset(dir.path(), "T") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_node_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T_A.txt", "1, 3\n");
        write(dir.path(), "T_graph_indicator.txt", "1\n1\n");
        write(dir.path(), "T_graph_labels.txt", "1\n");
        assert!(matches!(
            load_tu_dataset(dir.path(), "T"),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn tu_self_loops_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T_A.txt", "1, 1\n1, 2\n");
        write(dir.path(), "T_graph_indicator.txt", "1\n1\n");
        write(dir.path(), "T_graph_labels.txt", "-1\n");
        write(dir.path(), "T_node_labels.txt", "3\n7\n");
        let g = &load_tu_dataset(dir.path(), "T").unwrap()[0];
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_labels(), &[0, 1]);
    }

    #[test]
    fn json_single_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(
            &p,
            r#"[{"num_nodes":2,"edges":[[0,1]],"node_labels":[1,1],"targets":[0.0]}]"#,
        )
        .unwrap();
        let g = load_json_molecules(&p).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].node_count(), 2);
        assert_eq!(g[0].edge_count(), 1);
        assert_eq!(g[0].target(), Some(&Target::Values(vec![0.0])));
    }

    #[test]
    fn json_empty_and_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, "[]").unwrap();
        assert!(load_json_molecules(&p).unwrap().is_empty());
        fs::write(
            &p,
            r#"[{"num_nodes":3,"edges":[[0,1]],"node_labels":[1,1],"targets":[0.0]}]"#,
        )
        .unwrap();
        assert!(matches!(load_json_molecules(&p), Err(Error::Schema(_))));
    }
}
