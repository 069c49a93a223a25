//! Line-delimited JSON cluster metadata, one cluster per line.
//!
//! ```json
//! {"id":"c0","d":512,
//!  "documents":[[{"text":"...","emb_row":0,"pos":0}, ...], ...],
//!  "references":[[{"text":"...","emb_row":7}, ...]],
//!  "language_tags":["en","fr"]}
//! ```
//!
//! `d`, `pos`, `references` and `language_tags` are optional. When `pos` is
//! absent the sentence's index in its document array is used.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::EmbeddingStore;
use super::{Cluster, RefSentence, ReferenceSummary, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub text: String,
    pub emb_row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub documents: Vec<Vec<SentenceRecord>>,
    #[serde(default)]
    pub references: Vec<Vec<SentenceRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_tags: Option<Vec<String>>,
}

impl MetadataRecord {
    fn row_count(&self) -> usize {
        self.documents.iter().chain(&self.references).map(Vec::len).sum()
    }

    fn into_cluster(self, store: &EmbeddingStore) -> Result<Cluster> {
        if let Some(d) = self.d {
            if d != store.dim() {
                return Err(Error::DimensionMismatch {
                    expected: store.dim(),
                    found: d,
                    context: format!("cluster {} declares d={d}", self.id),
                });
            }
        }
        let documents = self
            .documents
            .into_iter()
            .enumerate()
            .map(|(doc_index, doc)| {
                doc.into_iter()
                    .enumerate()
                    .map(|(i, r)| {
                        Ok(Sentence {
                            doc_index,
                            pos_in_doc: r.pos.unwrap_or(i),
                            embedding: store.row_f64(r.emb_row)?,
                            text: r.text,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let references = self
            .references
            .into_iter()
            .map(|r| {
                let sentences = r
                    .into_iter()
                    .map(|s| {
                        Ok(RefSentence {
                            embedding: store.row_f64(s.emb_row)?,
                            text: s.text,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ReferenceSummary { sentences })
            })
            .collect::<Result<Vec<_>>>()?;
        let cluster = Cluster {
            id: self.id,
            documents,
            references,
            language_tags: self.language_tags,
        };
        cluster.validate()?;
        Ok(cluster)
    }

    fn from_cluster(cluster: &Cluster, store: &mut EmbeddingStore) -> Result<Self> {
        let documents = cluster
            .documents
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|s| {
                        Ok(SentenceRecord {
                            text: s.text.clone(),
                            emb_row: store.push(&s.embedding)?,
                            pos: Some(s.pos_in_doc),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let references = cluster
            .references
            .iter()
            .map(|r| {
                r.sentences
                    .iter()
                    .map(|s| {
                        Ok(SentenceRecord {
                            text: s.text.clone(),
                            emb_row: store.push(&s.embedding)?,
                            pos: None,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetadataRecord {
            id: cluster.id.clone(),
            d: Some(store.dim()),
            documents,
            references,
            language_tags: cluster.language_tags.clone(),
        })
    }
}

/// Parses a metadata file. Blank lines are skipped.
pub fn read_metadata(path: impl AsRef<Path>) -> Result<Vec<MetadataRecord>> {
    Ok(read_numbered(path.as_ref())?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

fn read_numbered(path: &Path) -> Result<Vec<(usize, MetadataRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push((i + 1, record));
    }
    Ok(records)
}

pub fn write_metadata(path: impl AsRef<Path>, records: &[MetadataRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("metadata serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads clusters with their embeddings attached, in file order.
pub fn load_split(
    metadata_path: impl AsRef<Path>,
    embeddings_path: impl AsRef<Path>,
) -> Result<Vec<Cluster>> {
    let metadata_path = metadata_path.as_ref();
    let records = read_numbered(metadata_path)?;
    let store = EmbeddingStore::read(embeddings_path)?;
    let referenced: usize = records.iter().map(|(_, r)| r.row_count()).sum();
    let clusters = records
        .into_iter()
        .map(|(line, record)| {
            record.into_cluster(&store).map_err(|e| match e {
                Error::DimensionMismatch { .. } | Error::DanglingRow { .. } => e,
                other => Error::MalformedLine {
                    path: metadata_path.to_path_buf(),
                    line,
                    message: other.to_string(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if referenced != store.len() {
        return Err(Error::CorruptStore(format!(
            "store holds {} rows but metadata references {referenced}",
            store.len()
        )));
    }
    Ok(clusters)
}

/// Writes clusters as a metadata file plus embedding store. Rows are laid out
/// cluster by cluster: document sentences first, then reference sentences.
pub fn save_split(
    clusters: &[Cluster],
    metadata_path: impl AsRef<Path>,
    embeddings_path: impl AsRef<Path>,
) -> Result<()> {
    let dim = clusters.iter().find_map(Cluster::dim).unwrap_or(0);
    let mut store = EmbeddingStore::new(dim);
    let records = clusters
        .iter()
        .map(|c| MetadataRecord::from_cluster(c, &mut store))
        .collect::<Result<Vec<_>>>()?;
    write_metadata(metadata_path, &records)?;
    store.write(embeddings_path)
}
