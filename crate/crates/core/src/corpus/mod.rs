//! Cluster data model, on-disk formats and preprocessing.

mod crosssum;
mod metadata;
mod store;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector;

pub use crosssum::{
    build_crosssum_clusters, connected_components, interleave_reference, read_pairings,
    SourceDocument, UnionFind,
};
pub use metadata::{load_split, read_metadata, save_split, write_metadata, MetadataRecord};
pub use store::{EmbeddingStore, STORE_MAGIC, STORE_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_index: usize,
    /// Position in the source document, fixed before any filtering.
    pub pos_in_doc: usize,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefSentence {
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub sentences: Vec<RefSentence>,
}

impl ReferenceSummary {
    /// Sentences joined by a single space.
    pub fn text(&self) -> String {
        join_texts(self.sentences.iter().map(|s| s.text.as_str()))
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(|s| word_count(&s.text)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub documents: Vec<Vec<Sentence>>,
    pub references: Vec<ReferenceSummary>,
    pub language_tags: Option<Vec<String>>,
}

impl Cluster {
    /// Embedding dimension, taken from the first sentence.
    pub fn dim(&self) -> Option<usize> {
        self.sentences().next().map(|s| s.embedding.len())
    }

    /// Total sentence count N.
    pub fn len(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sentences in global order: document by document, in source order.
    /// Global sentence indices used by selection refer to this order.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flatten()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim().ok_or_else(|| Error::EmptyCluster(self.id.clone()))?;
        for (d, doc) in self.documents.iter().enumerate() {
            let mut last_pos = None;
            for s in doc {
                if s.embedding.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: s.embedding.len(),
                        context: format!("cluster {} document {d}", self.id),
                    });
                }
                if s.doc_index != d || last_pos.is_some_and(|p| s.pos_in_doc <= p) {
                    return Err(Error::InvalidConfig(format!(
                        "cluster {}: inconsistent sentence indices in document {d}",
                        self.id
                    )));
                }
                last_pos = Some(s.pos_in_doc);
            }
        }
        for r in &self.references {
            for s in &r.sentences {
                if s.embedding.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: s.embedding.len(),
                        context: format!("cluster {} reference", self.id),
                    });
                }
            }
        }
        if let Some(tags) = &self.language_tags {
            if tags.len() != self.documents.len() {
                return Err(Error::InvalidConfig(format!(
                    "cluster {}: {} language tags for {} documents",
                    self.id,
                    tags.len(),
                    self.documents.len()
                )));
            }
        }
        Ok(())
    }
}

/// A d-dimensional target vector for sentence selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Centroid(pub Vec<f64>);

impl Centroid {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Number of maximal whitespace-delimited tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn join_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> String {
    texts.into_iter().collect::<Vec<_>>().join(" ")
}

/// Drops empty, duplicate and over-budget sentences.
///
/// Duplicates are detected cluster-wide on whitespace-normalized text and the
/// first occurrence wins. Documents left without sentences are dropped, and
/// the remaining documents are renumbered; `pos_in_doc` is never touched.
pub fn preprocess_cluster(cluster: &Cluster, budget: usize) -> Result<Cluster> {
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    let mut documents = Vec::with_capacity(cluster.documents.len());
    let mut tags = cluster.language_tags.as_ref().map(|_| Vec::new());
    for (d, doc) in cluster.documents.iter().enumerate() {
        let kept: Vec<Sentence> = doc
            .iter()
            .filter(|s| {
                let words = word_count(&s.text);
                words > 0 && words <= budget && seen.insert(normalize_whitespace(&s.text))
            })
            .cloned()
            .collect();
        if kept.is_empty() {
            continue;
        }
        let index = documents.len();
        documents.push(
            kept.into_iter()
                .map(|s| Sentence {
                    doc_index: index,
                    ..s
                })
                .collect(),
        );
        if let (Some(out), Some(src)) = (tags.as_mut(), cluster.language_tags.as_ref()) {
            out.push(src[d].clone());
        }
    }
    if documents.is_empty() {
        return Err(Error::EmptyCluster(cluster.id.clone()));
    }
    Ok(Cluster {
        id: cluster.id.clone(),
        documents,
        references: cluster.references.clone(),
        language_tags: tags,
    })
}

/// Average over documents of each document's average sentence embedding.
pub fn mean_pool_cluster(cluster: &Cluster) -> Result<Centroid> {
    let dim = cluster
        .dim()
        .ok_or_else(|| Error::EmptyCluster(cluster.id.clone()))?;
    if let Some(d) = cluster.documents.iter().position(Vec::is_empty) {
        return Err(Error::EmptyDocument {
            cluster: cluster.id.clone(),
            document: d,
        });
    }
    let groups = cluster
        .documents
        .iter()
        .map(|doc| doc.iter().map(|s| s.embedding.as_slice()));
    vector::two_stage_mean(dim, groups)
        .map(Centroid)
        .ok_or_else(|| Error::EmptyCluster(cluster.id.clone()))
}

/// Plain average of the reference sentence embeddings.
pub fn gold_centroid(reference: &ReferenceSummary) -> Result<Centroid> {
    let first = reference.sentences.first().ok_or(Error::EmptyReference)?;
    let dim = first.embedding.len();
    let mut acc = vec![0.0; dim];
    for s in &reference.sentences {
        if s.embedding.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.embedding.len(),
                context: "reference sentence".into(),
            });
        }
        vector::add_assign(&mut acc, &s.embedding);
    }
    vector::scale(&mut acc, 1.0 / reference.sentences.len() as f64);
    Ok(Centroid(acc))
}

/// Oracle centroid of a cluster: the mean of the per-reference gold centroids.
pub fn cluster_gold_centroid(cluster: &Cluster) -> Result<Centroid> {
    if cluster.references.is_empty() {
        return Err(Error::MissingReference(cluster.id.clone()));
    }
    let golds = cluster
        .references
        .iter()
        .map(gold_centroid)
        .collect::<Result<Vec<_>>>()?;
    let dim = golds[0].dim();
    let mut acc = vec![0.0; dim];
    for g in &golds {
        vector::add_assign(&mut acc, g.as_slice());
    }
    vector::scale(&mut acc, 1.0 / golds.len() as f64);
    Ok(Centroid(acc))
}
