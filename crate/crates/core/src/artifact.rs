//! Embedding artifact files and flat exports.
//!
//! Binary layout: the magic bytes, a little-endian `u32` format version, a
//! `u64` header length and the JSON header, then a `u64` graph count and for
//! every graph a `u64` row count followed by its rows as little-endian `f64`.
//! A SHA-256 digest of everything before it closes the file.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::walks::{EmbeddingMeta, StructuralEmbedding, EMBEDDING_FORMAT_VERSION};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"GSATEMB\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactFormat {
    Binary,
    Json,
}

impl ArtifactFormat {
    /// Picks the format from a file extension, defaulting to binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ArtifactFormat::Json,
            _ => ArtifactFormat::Binary,
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256(bytes: &[u8]) -> Vec<u8> {
    Sha256::digest(bytes).to_vec()
}

pub fn encode_binary(emb: &StructuralEmbedding) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&emb.meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(emb.graphs.len() as u64).to_le_bytes());
    for z in &emb.graphs {
        if z.ncols() != emb.meta.d {
            return Err(Error::Artifact(format!(
                "embedding rows have {} columns, header says d = {}",
                z.ncols(),
                emb.meta.d
            )));
        }
        out.extend_from_slice(&(z.nrows() as u64).to_le_bytes());
        for x in z.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = sha256(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Artifact("embedding artifact is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_binary(bytes: &[u8], name: &str) -> Result<StructuralEmbedding> {
    if bytes.len() < EMBEDDING_MAGIC.len() + 32 || &bytes[..8] != EMBEDDING_MAGIC {
        return Err(Error::Artifact(format!(
            "{name} is not an embedding artifact"
        )));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if sha256(body) != digest {
        return Err(Error::Checksum(name.to_string()));
    }
    let mut r = Reader {
        bytes: body,
        pos: 8,
    };
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != EMBEDDING_FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "{name}: unsupported format version {version}"
        )));
    }
    let header_len = r.u64()? as usize;
    let meta: EmbeddingMeta = serde_json::from_slice(r.take(header_len)?)?;
    let count = r.u64()? as usize;
    let d = meta.d;
    let mut graphs = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let rows = r.u64()? as usize;
        let len = rows
            .checked_mul(d)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Artifact(format!("{name}: impossible row count")))?;
        let data = r
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        graphs.push(Array2::from_shape_vec((rows, d), data).unwrap());
    }
    if r.pos != body.len() {
        return Err(Error::Artifact(format!(
            "{name}: trailing bytes after the last graph"
        )));
    }
    Ok(StructuralEmbedding { meta, graphs })
}

#[derive(Serialize, Deserialize)]
struct JsonBody {
    header: EmbeddingMeta,
    graphs: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct JsonArtifact {
    #[serde(flatten)]
    body: JsonBody,
    sha256: String,
}

fn json_body(emb: &StructuralEmbedding) -> JsonBody {
    JsonBody {
        header: emb.meta.clone(),
        graphs: emb
            .graphs
            .iter()
            .map(|z| z.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
    }
}

pub fn encode_json(emb: &StructuralEmbedding) -> Result<Vec<u8>> {
    let body = json_body(emb);
    let sha256 = hex(&sha256(&serde_json::to_vec(&body)?));
    let mut out = serde_json::to_vec(&JsonArtifact { body, sha256 })?;
    out.push(b'\n');
    Ok(out)
}

pub fn decode_json(bytes: &[u8], name: &str) -> Result<StructuralEmbedding> {
    let art: JsonArtifact =
        serde_json::from_slice(bytes).map_err(|e| Error::Artifact(format!("{name}: {e}")))?;
    if hex(&sha256(&serde_json::to_vec(&art.body)?)) != art.sha256 {
        return Err(Error::Checksum(name.to_string()));
    }
    let d = art.body.header.d;
    let graphs = art
        .body
        .graphs
        .into_iter()
        .map(|rows| {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::Artifact(format!(
                    "{name}: row width differs from d = {d}"
                )));
            }
            Ok(Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).unwrap())
        })
        .collect::<Result<_>>()?;
    Ok(StructuralEmbedding {
        meta: art.body.header,
        graphs,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn save_embedding(
    emb: &StructuralEmbedding,
    path: &Path,
    format: ArtifactFormat,
) -> Result<()> {
    let bytes = match format {
        ArtifactFormat::Binary => encode_binary(emb)?,
        ArtifactFormat::Json => encode_json(emb)?,
    };
    write_bytes(path, &bytes)
}

/// Loads either format, recognising binary files by their magic bytes.
pub fn load_embedding(path: &Path) -> Result<StructuralEmbedding> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let name = path.display().to_string();
    if bytes.starts_with(EMBEDDING_MAGIC) {
        decode_binary(&bytes, &name)
    } else {
        decode_json(&bytes, &name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

#[derive(Serialize, Deserialize)]
pub struct ExportRow {
    pub graph: usize,
    pub node: usize,
    pub z: Vec<f64>,
}

/// Writes one row per node: graph index, node index and the `d` coordinates.
pub fn export_embedding(
    emb: &StructuralEmbedding,
    out: &mut impl Write,
    format: ExportFormat,
) -> Result<()> {
    let rows = emb.graphs.iter().enumerate().flat_map(|(g, z)| {
        z.rows()
            .into_iter()
            .enumerate()
            .map(move |(v, r)| ExportRow {
                graph: g,
                node: v,
                z: r.to_vec(),
            })
    });
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["graph".to_string(), "node".to_string()];
            header.extend((0..emb.meta.d).map(|i| format!("z{i}")));
            w.write_record(&header)?;
            for row in rows {
                let mut rec = vec![row.graph.to_string(), row.node.to_string()];
                rec.extend(row.z.iter().map(|x| format!("{x:?}")));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io("writing csv export", e))?;
        }
        ExportFormat::Json => {
            let rows: Vec<ExportRow> = rows.collect();
            serde_json::to_writer(&mut *out, &rows)?;
            out.write_all(b"\n")
                .map_err(|e| Error::io("writing json export", e))?;
        }
    }
    Ok(())
}
