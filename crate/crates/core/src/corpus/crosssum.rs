//! Turning pairwise-linked single-document data into multi-document clusters.
//!
//! Documents linked through a chain of pairings end up in the same cluster;
//! each cluster's reference is built by interleaving the members' summaries.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::store::EmbeddingStore;
use super::{word_count, Cluster, RefSentence, ReferenceSummary, Sentence};
use crate::error::{Error, Result};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Connected components with at least two members. Members are sorted
/// ascending and components are ordered by their smallest member.
pub fn connected_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        uf.union(a, b);
    }
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for x in 0..n {
        let r = uf.find(x);
        by_root.entry(r).or_default().push(x);
    }
    let mut components: Vec<Vec<usize>> =
        by_root.into_values().filter(|c| c.len() > 1).collect();
    components.sort_by_key(|c| c[0]);
    components
}

/// Round-robin over the summaries, one sentence from each in turn, stopping
/// before the first sentence that would push the total past `limit` words.
pub fn interleave_reference(summaries: &[Vec<RefSentence>], limit: usize) -> ReferenceSummary {
    let longest = summaries.iter().map(Vec::len).max().unwrap_or(0);
    let mut sentences = Vec::new();
    let mut words = 0;
    for i in 0..longest {
        for summary in summaries {
            let Some(s) = summary.get(i) else { continue };
            let w = word_count(&s.text);
            if words + w > limit {
                return ReferenceSummary { sentences };
            }
            words += w;
            sentences.push(s.clone());
        }
    }
    ReferenceSummary { sentences }
}

/// A single source article with its own summary, before clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDocument {
    pub id: String,
    pub language: Option<String>,
    pub sentences: Vec<RefSentence>,
    pub summary: Vec<RefSentence>,
}

/// Groups paired documents into clusters. Singleton components are dropped;
/// cluster members are sorted by id and the cluster takes its smallest
/// member's id.
pub fn build_crosssum_clusters(
    pairings: &[(String, String)],
    documents: &[SourceDocument],
    reference_limit: usize,
) -> Result<Vec<Cluster>> {
    let mut order: Vec<usize> = (0..documents.len()).collect();
    order.sort_by(|&a, &b| documents[a].id.cmp(&documents[b].id));
    // rank in id order, so component order follows the smallest id
    let rank: HashMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(r, &i)| (documents[i].id.as_str(), r))
        .collect();
    let lookup = |id: &str| {
        rank.get(id)
            .copied()
            .ok_or_else(|| Error::UnknownDocument(id.to_string()))
    };
    let edges = pairings
        .iter()
        .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
        .collect::<Result<Vec<_>>>()?;

    let clusters = connected_components(documents.len(), &edges)
        .into_iter()
        .map(|component| {
            let members: Vec<&SourceDocument> =
                component.iter().map(|&r| &documents[order[r]]).collect();
            let docs = members
                .iter()
                .enumerate()
                .map(|(doc_index, m)| {
                    m.sentences
                        .iter()
                        .enumerate()
                        .map(|(pos, s)| Sentence {
                            doc_index,
                            pos_in_doc: pos,
                            text: s.text.clone(),
                            embedding: s.embedding.clone(),
                        })
                        .collect()
                })
                .collect();
            let summaries: Vec<Vec<RefSentence>> =
                members.iter().map(|m| m.summary.clone()).collect();
            let reference = interleave_reference(&summaries, reference_limit);
            let language_tags = members
                .iter()
                .map(|m| m.language.clone())
                .collect::<Option<Vec<_>>>();
            Cluster {
                id: members[0].id.clone(),
                documents: docs,
                references: if reference.sentences.is_empty() {
                    vec![]
                } else {
                    vec![reference]
                },
                language_tags,
            }
        })
        .collect();
    Ok(clusters)
}

/// Reads a two-column file of document-id pairs. Columns may be separated
/// by a tab, a comma or other whitespace; blank lines and `#` comments are
/// ignored.
pub fn read_pairings(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|c| !c.is_empty())
            .collect();
        match cols.as_slice() {
            [a, b] => pairs.push((a.to_string(), b.to_string())),
            _ => {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected 2 columns, found {}", cols.len()),
                })
            }
        }
    }
    Ok(pairs)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceRecord {
    id: String,
    #[serde(default)]
    lang: Option<String>,
    sentences: Vec<RowRef>,
    summary: Vec<RowRef>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RowRef {
    text: String,
    emb_row: usize,
}

impl SourceDocument {
    /// Reads line-delimited source documents:
    /// `{"id", "lang", "sentences": [{text, emb_row}], "summary": [{text, emb_row}]}`.
    pub fn load_all(
        documents_path: impl AsRef<Path>,
        embeddings_path: impl AsRef<Path>,
    ) -> Result<Vec<SourceDocument>> {
        let path = documents_path.as_ref();
        let store = EmbeddingStore::read(embeddings_path)?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut docs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: String| Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let r: SourceRecord =
                serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            let rows = |refs: Vec<RowRef>| {
                refs.into_iter()
                    .map(|s| {
                        Ok(RefSentence {
                            embedding: store.row_f64(s.emb_row)?,
                            text: s.text,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            };
            docs.push(SourceDocument {
                id: r.id,
                language: r.lang,
                sentences: rows(r.sentences)?,
                summary: rows(r.summary)?,
            });
        }
        Ok(docs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(text: &str) -> RefSentence {
        RefSentence {
            text: text.into(),
            embedding: vec![0.0],
        }
    }

    fn doc(id: &str) -> SourceDocument {
        SourceDocument {
            id: id.into(),
            language: Some("en".into()),
            sentences: vec![rs(&format!("{id} body"))],
            summary: vec![rs(&format!("{id} summary"))],
        }
    }

    fn p(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    #[test]
    fn chain_merges_into_one_cluster() {
        let docs = vec![doc("C"), doc("A"), doc("B"), doc("D")];
        let clusters =
            build_crosssum_clusters(&[p("A", "B"), p("B", "C")], &docs, 100).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].id, "A");
        assert_eq!(clusters[0].documents.len(), 3);
        assert_eq!(clusters[0].documents[2][0].text, "C body");
        assert_eq!(
            clusters[0].references[0].text(),
            "A summary B summary C summary"
        );
    }

    #[test]
    fn no_pairs_no_clusters() {
        let docs = vec![doc("A"), doc("B")];
        assert!(build_crosssum_clusters(&[], &docs, 100).unwrap().is_empty());
    }

    #[test]
    fn unknown_id_rejected() {
        let docs = vec![doc("A")];
        assert!(matches!(
            build_crosssum_clusters(&[p("A", "Z")], &docs, 100),
            Err(Error::UnknownDocument(id)) if id == "Z"
        ));
    }

    #[test]
    fn interleave_round_robin_order() {
        let r = interleave_reference(&[vec![rs("s1a"), rs("s1b")], vec![rs("s2a")]], 1000);
        let texts: Vec<_> = r.sentences.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["s1a", "s2a", "s1b"]);
    }

    #[test]
    fn interleave_stops_before_overflow() {
        let r = interleave_reference(
            &[vec![rs("a b c"), rs("d")], vec![rs("e f g h")]],
            6,
        );
        // 3 + 4 > 6, so stop after the first
        assert_eq!(r.word_count(), 3);
        let single = vec![rs("one two"), rs("three")];
        assert_eq!(interleave_reference(std::slice::from_ref(&single), 3).sentences, single);
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1));
        assert!(!uf.union(1, 0));
        assert_eq!(uf.find(0), uf.find(1));
        assert_ne!(uf.find(2), uf.find(3));
    }
}
