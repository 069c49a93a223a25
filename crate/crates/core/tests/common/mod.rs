//! Synthetic corpora shared by the integration and acceptance tests.

#![allow(dead_code)]

use centrosum::corpus::{Cluster, RefSentence, ReferenceSummary, Sentence};
use rand::Rng;

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn random_vec(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    unit(random_vec(rng, dim))
}

/// `words` distinct tokens unique to this sentence.
pub fn filler_text(tag: &str, words: usize) -> String {
    (0..words)
        .map(|k| format!("{tag}w{k}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn sentence(doc: usize, pos: usize, text: String, embedding: Vec<f64>) -> Sentence {
    Sentence {
        doc_index: doc,
        pos_in_doc: pos,
        text,
        embedding,
    }
}

/// Documents of random unit embeddings and unique filler text.
pub fn random_cluster(
    rng: &mut impl Rng,
    id: &str,
    doc_sizes: &[usize],
    dim: usize,
    words: std::ops::RangeInclusive<usize>,
) -> Cluster {
    let documents = doc_sizes
        .iter()
        .enumerate()
        .map(|(d, &size)| {
            (0..size)
                .map(|p| {
                    let w = rng.gen_range(words.clone());
                    sentence(d, p, filler_text(&format!("{id}d{d}p{p}"), w), random_unit(rng, dim))
                })
                .collect()
        })
        .collect();
    Cluster {
        id: id.to_string(),
        documents,
        references: Vec::new(),
        language_tags: None,
    }
}

pub fn reference_from(sentences: &[&Sentence]) -> ReferenceSummary {
    ReferenceSummary {
        sentences: sentences
            .iter()
            .map(|s| RefSentence {
                text: s.text.clone(),
                embedding: s.embedding.clone(),
            })
            .collect(),
    }
}

/// Words drawn from a shared vocabulary so that n-grams overlap across
/// sentences.
pub fn vocab_text(rng: &mut impl Rng, vocab: usize, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("v{}", rng.gen_range(0..vocab))).collect()
}

/// A cluster with a planted summary: a few key sentences, each restated
/// with small edits in every document among unrelated filler. The
/// reference is one statement of every fact.
pub fn planted_cluster(rng: &mut impl Rng, id: &str, dim: usize) -> (Cluster, usize) {
    let n_docs = rng.gen_range(4..=6);
    let facts = rng.gen_range(3..=5);
    let vocab = 400;
    let fact_tokens: Vec<Vec<String>> = (0..facts)
        .map(|_| {
            let len = rng.gen_range(8..=24);
            vocab_text(rng, vocab, len)
        })
        .collect();
    let fact_dirs: Vec<Vec<f64>> = (0..facts).map(|_| random_unit(rng, dim)).collect();

    // (text, embedding, (fact, copy) if planted)
    type Slot = (String, Vec<f64>, Option<(usize, usize)>);
    let mut docs: Vec<Vec<Slot>> = (0..n_docs)
        .map(|_| {
            let len = rng.gen_range(6..=9);
            (0..len)
                .map(|_| {
                    let l = rng.gen_range(5..=30);
                    (vocab_text(rng, vocab, l).join(" "), random_unit(rng, dim), None)
                })
                .collect()
        })
        .collect();
    for f in 0..facts {
        let first = rng.gen_range(0..n_docs);
        for (c, d) in (0..n_docs).map(|i| (first + i) % n_docs).enumerate() {
            // restatements substitute, drop and insert words
            let mut tokens = Vec::new();
            for t in &fact_tokens[f] {
                if c > 0 && rng.gen_bool(0.1) {
                    tokens.push(format!("v{}", rng.gen_range(0..vocab)));
                }
                if c == 0 || !rng.gen_bool(0.1) {
                    tokens.push(if c > 0 && rng.gen_bool(0.2) {
                        format!("v{}", rng.gen_range(0..vocab))
                    } else {
                        t.clone()
                    });
                }
            }
            let noise = random_vec(rng, dim);
            let emb = unit(
                fact_dirs[f]
                    .iter()
                    .zip(&noise)
                    .map(|(a, b)| a + 0.25 * b)
                    .collect(),
            );
            let free: Vec<usize> = (0..docs[d].len().min(6))
                .filter(|&p| docs[d][p].2.is_none())
                .collect();
            let pos = free[rng.gen_range(0..free.len())];
            docs[d][pos] = (tokens.join(" "), emb, Some((f, c)));
        }
    }

    let mut planted_at = vec![(0, 0); facts];
    let documents = docs
        .into_iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.into_iter()
                .enumerate()
                .map(|(p, (text, emb, tag))| {
                    if let Some((f, 0)) = tag {
                        planted_at[f] = (d, p);
                    }
                    sentence(d, p, text, emb)
                })
                .collect()
        })
        .collect();
    let mut cluster = Cluster {
        id: id.to_string(),
        documents,
        references: Vec::new(),
        language_tags: None,
    };
    let planted: Vec<&Sentence> = planted_at
        .iter()
        .map(|&(d, p)| &cluster.documents[d][p])
        .collect();
    let budget = planted
        .iter()
        .map(|s| centrosum::corpus::word_count(&s.text))
        .sum::<usize>();
    let reference = reference_from(&planted);
    cluster.references.push(reference);
    (cluster, budget)
}

/// The first-sentence task: the reference is the first sentence of every
/// document.
pub fn first_sentence_cluster(rng: &mut impl Rng, id: &str, dim: usize) -> Cluster {
    let n_docs = rng.gen_range(3..=5);
    let sizes: Vec<usize> = (0..n_docs).map(|_| rng.gen_range(5..=10)).collect();
    let mut c = random_cluster(rng, id, &sizes, dim, 5..=12);
    let firsts: Vec<&Sentence> = c.documents.iter().map(|d| &d[0]).collect();
    let r = reference_from(&firsts);
    c.references.push(r);
    c
}
