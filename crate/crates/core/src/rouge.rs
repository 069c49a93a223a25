//! ROUGE-N and ROUGE-L with multi-reference aggregation and percentile
//! bootstrap confidence intervals.
//!
//! Tokenization lowercases and splits on anything that is not alphanumeric.
//! No stemming and no stopword removal.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(matches: usize, reference_total: usize, candidate_total: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self::from_pr(
            ratio(matches, candidate_total),
            ratio(matches, reference_total),
        )
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore {
            recall,
            precision,
            f1,
        }
    }
}

/// How per-reference scores combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Arithmetic mean over references.
    #[default]
    Average,
    /// The reference with the highest F1.
    Best,
}

/// Score against several references, with the indices of references that
/// were too short to contain a single n-gram.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRefScore {
    pub score: RougeScore,
    pub degenerate: Vec<usize>,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Single-reference ROUGE-N on token sequences. `None` when the reference
/// has fewer than `n` tokens.
pub fn rouge_n_tokens(candidate: &[String], reference: &[String], n: usize) -> Option<RougeScore> {
    if n == 0 || reference.len() < n {
        return None;
    }
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matches = refs
        .iter()
        .map(|(g, &c)| c.min(cand.get(g).copied().unwrap_or(0)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    Some(RougeScore::from_counts(
        matches,
        reference.len() - n + 1,
        cand_total,
    ))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), reference.len(), candidate.len())
}

fn aggregate(scores: &[RougeScore], how: Aggregation) -> RougeScore {
    match how {
        Aggregation::Average => {
            let n = scores.len() as f64;
            let recall = scores.iter().map(|s| s.recall).sum::<f64>() / n;
            let precision = scores.iter().map(|s| s.precision).sum::<f64>() / n;
            let f1 = scores.iter().map(|s| s.f1).sum::<f64>() / n;
            RougeScore {
                recall,
                precision,
                f1,
            }
        }
        Aggregation::Best => scores
            .iter()
            .copied()
            .reduce(|best, s| if s.f1 > best.f1 { s } else { best })
            .unwrap_or_default(),
    }
}

pub fn rouge_n_with<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    n: usize,
    how: Aggregation,
) -> Result<MultiRefScore> {
    if references.is_empty() {
        return Err(Error::EmptyInput("ROUGE needs at least one reference"));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("ROUGE-N needs n >= 1".into()));
    }
    let cand = tokenize(candidate);
    let mut degenerate = Vec::new();
    let scores: Vec<RougeScore> = references
        .iter()
        .enumerate()
        .map(|(i, r)| {
            rouge_n_tokens(&cand, &tokenize(r.as_ref()), n).unwrap_or_else(|| {
                degenerate.push(i);
                RougeScore::default()
            })
        })
        .collect();
    if !degenerate.is_empty() {
        log::warn!("{} reference(s) shorter than n={n}", degenerate.len());
    }
    Ok(MultiRefScore {
        score: aggregate(&scores, how),
        degenerate,
    })
}

/// ROUGE-N averaged over references.
pub fn rouge_n<S: AsRef<str>>(candidate: &str, references: &[S], n: usize) -> Result<RougeScore> {
    rouge_n_with(candidate, references, n, Aggregation::Average).map(|m| m.score)
}

pub fn rouge_l_with<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    how: Aggregation,
) -> Result<RougeScore> {
    if references.is_empty() {
        return Err(Error::EmptyInput("ROUGE needs at least one reference"));
    }
    let cand = tokenize(candidate);
    let scores: Vec<RougeScore> = references
        .iter()
        .map(|r| rouge_l_tokens(&cand, &tokenize(r.as_ref())))
        .collect();
    Ok(aggregate(&scores, how))
}

/// ROUGE-L (plain token LCS) averaged over references.
pub fn rouge_l<S: AsRef<str>>(candidate: &str, references: &[S]) -> Result<RougeScore> {
    rouge_l_with(candidate, references, Aggregation::Average)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub iterations: usize,
    pub confidence: f64,
}

/// Mean computed relative to the first element, so a constant input gives
/// that constant back exactly.
fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    let n = values.clone().count() as f64;
    first + values.map(|v| v - first).sum::<f64>() / n
}

/// Linear interpolation between order statistics.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap over per-cluster scores. Iteration `i` draws from
/// its own ChaCha stream, so results do not depend on thread scheduling.
pub fn bootstrap_ci(
    scores: &[f64],
    iterations: usize,
    confidence: f64,
    seed: u64,
) -> Result<BootstrapSummary> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("bootstrap needs at least one score"));
    }
    if iterations == 0 || !(0.0..1.0).contains(&confidence) {
        return Err(Error::InvalidConfig(
            "bootstrap needs iterations >= 1 and confidence in [0, 1)".into(),
        ));
    }
    let n = scores.len();
    let mut means: Vec<f64> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let picks: Vec<f64> = (0..n).map(|_| scores[rng.gen_range(0..n)]).collect();
            shifted_mean(picks.iter().copied())
        })
        .collect();
    let mean = shifted_mean(means.iter().copied());
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok(BootstrapSummary {
        mean,
        ci_low: percentile(&means, tail),
        ci_high: percentile(&means, 1.0 - tail),
        iterations,
        confidence,
    })
}

/// ROUGE-1, ROUGE-2 and ROUGE-L for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeReport {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
}

pub fn score_all<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    how: Aggregation,
) -> Result<RougeReport> {
    Ok(RougeReport {
        rouge1: rouge_n_with(candidate, references, 1, how)?.score,
        rouge2: rouge_n_with(candidate, references, 2, how)?.score,
        rouge_l: rouge_l_with(candidate, references, how)?,
    })
}

/// One row of a batch scoring file.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub cluster_id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

/// Reads tab-separated rows: `cluster_id<TAB>candidate<TAB>ref_1[<TAB>ref_2...]`.
pub fn read_batch(path: impl AsRef<Path>) -> Result<Vec<BatchItem>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected cluster_id, candidate and at least one reference".into(),
            });
        }
        items.push(BatchItem {
            cluster_id: cols[0].to_string(),
            candidate: cols[1].to_string(),
            references: cols[2..].iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterScores {
    pub cluster_id: String,
    #[serde(flatten)]
    pub report: RougeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: String,
    #[serde(flatten)]
    pub summary: BootstrapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub clusters: Vec<ClusterScores>,
    pub aggregate: Vec<MetricSummary>,
}

impl EvaluationReport {
    pub fn metric(&self, name: &str) -> Option<&BootstrapSummary> {
        self.aggregate
            .iter()
            .find(|m| m.metric == name)
            .map(|m| &m.summary)
    }

    /// Plain-text table: one row per metric, mean and interval in percent.
    pub fn table(&self) -> String {
        let level = self.aggregate.first().map_or(0.95, |m| m.summary.confidence);
        let header = format!("{}% CI", 100.0 * level);
        let mut out = format!("{:<8} {:>8} {:>18}\n", "metric", "mean", header);
        for m in &self.aggregate {
            let s = &m.summary;
            out.push_str(&format!(
                "{:<8} {:>8.2} [{:>7.2}, {:>7.2}]\n",
                m.metric,
                100.0 * s.mean,
                100.0 * s.ci_low,
                100.0 * s.ci_high
            ));
        }
        out
    }
}

/// Scores every item and bootstraps each metric over clusters.
pub fn evaluate_batch(
    items: &[BatchItem],
    how: Aggregation,
    iterations: usize,
    confidence: f64,
    seed: u64,
) -> Result<EvaluationReport> {
    let clusters = items
        .par_iter()
        .map(|it| {
            Ok(ClusterScores {
                cluster_id: it.cluster_id.clone(),
                report: score_all(&it.candidate, &it.references, how)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    type Getter = fn(&RougeReport) -> f64;
    let metrics: [(&str, Getter); 6] = [
        ("R1-R", |r| r.rouge1.recall),
        ("R1-F", |r| r.rouge1.f1),
        ("R2-R", |r| r.rouge2.recall),
        ("R2-F", |r| r.rouge2.f1),
        ("RL-R", |r| r.rouge_l.recall),
        ("RL-F", |r| r.rouge_l.f1),
    ];
    let aggregate = metrics
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = clusters.iter().map(|c| get(&c.report)).collect();
            Ok(MetricSummary {
                metric: name.to_string(),
                summary: bootstrap_ci(&values, iterations, confidence, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        clusters,
        aggregate,
    })
}
