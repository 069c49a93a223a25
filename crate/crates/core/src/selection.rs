//! Centroid-driven sentence selection.
//!
//! A candidate summary is scored by the cosine similarity between the sum of
//! its sentence embeddings and a target centroid. Three strategies are
//! provided: the plain greedy baseline, beam search over summary states, and
//! beam search followed by a budget-filling greedy pass.
//!
//! Ties are broken by score (descending), then by the chosen sentence
//! sequence compared lexicographically on global indices, which for a single
//! added sentence is the same as (doc_index, pos_in_doc) ascending.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{join_texts, word_count, Centroid, Cluster, Sentence};
use crate::error::{Error, Result};
use crate::vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    BaselineGreedy,
    BeamOnly,
    BeamGreedy,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline-greedy" | "baseline" => Ok(SelectionMode::BaselineGreedy),
            "beam-only" | "bs" => Ok(SelectionMode::BeamOnly),
            "beam+greedy" | "beam-greedy" | "bs+gs" => Ok(SelectionMode::BeamGreedy),
            other => Err(Error::InvalidConfig(format!("unknown selection mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Sentences kept from the head of each document.
    pub n: usize,
    /// Beam size.
    pub beam: usize,
    /// Consecutive oversized candidates tolerated by the greedy pass.
    pub window: usize,
    /// Word limit.
    pub budget: usize,
    pub mode: SelectionMode,
}

impl SelectionConfig {
    /// The tuned defaults (n=9, B=5, T=9) with beam search plus greedy search.
    pub fn with_budget(budget: usize) -> Self {
        SelectionConfig {
            n: 9,
            beam: 5,
            window: 9,
            budget,
            mode: SelectionMode::BeamGreedy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.beam == 0 || self.budget == 0 {
            return Err(Error::InvalidConfig(
                "n, beam size and budget must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// An in-progress extractive summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryState {
    /// Global sentence indices in selection order.
    pub chosen: Vec<usize>,
    pub emb_sum: Vec<f64>,
    pub words: usize,
    pub score: f64,
}

impl SummaryState {
    /// Chosen indices in source order, for rendering.
    pub fn source_order(&self) -> Vec<usize> {
        let mut idx = self.chosen.clone();
        idx.sort_unstable();
        idx
    }

    fn key(&self) -> Vec<usize> {
        self.source_order()
    }
}

/// Cosine similarity clamped to [-1, 1]. Zero-norm inputs are an error.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    let nu = vector::norm(u);
    let nv = vector::norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm("cosine similarity operand"));
    }
    Ok((vector::dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn rank(a: &SummaryState, b: &SummaryState) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.chosen.cmp(&b.chosen))
}

/// What the greedy baseline does when the best candidate does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverflowPolicy {
    /// Consider only sentences that fit; stop when none do.
    Skip,
    /// Stop at the first best candidate that does not fit.
    Stop,
}

/// Per-step record of the search, for debugging.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum TraceEvent {
    BeamStep {
        step: usize,
        live: Vec<TracedState>,
        preserved: Vec<TracedState>,
    },
    GreedyAppend {
        beam: usize,
        sentence: usize,
        score: f64,
    },
    GreedySkip {
        beam: usize,
        sentence: usize,
        misses: usize,
    },
    Final {
        state: TracedState,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracedState {
    pub chosen: Vec<usize>,
    pub words: usize,
    pub score: f64,
}

impl From<&SummaryState> for TracedState {
    fn from(s: &SummaryState) -> Self {
        TracedState {
            chosen: s.chosen.clone(),
            words: s.words,
            score: s.score,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub events: Vec<TraceEvent>,
}

struct Tracer<'t>(Option<&'t mut SelectionTrace>);

impl Tracer<'_> {
    fn emit(&mut self, event: impl FnOnce() -> TraceEvent) {
        if let Some(t) = self.0.as_mut() {
            t.events.push(event());
        }
    }
}

/// Flat view of a cluster bound to one centroid.
struct Scorer<'a> {
    sentences: Vec<&'a Sentence>,
    words: Vec<usize>,
    centroid: &'a [f64],
    centroid_norm: f64,
    dim: usize,
}

impl<'a> Scorer<'a> {
    fn new(cluster: &'a Cluster, centroid: &'a Centroid) -> Result<Self> {
        let sentences: Vec<&Sentence> = cluster.sentences().collect();
        let dim = centroid.dim();
        if let Some(s) = sentences.iter().find(|s| s.embedding.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.embedding.len(),
                context: format!("cluster {} sentence vs centroid", cluster.id),
            });
        }
        let centroid_norm = vector::norm(centroid.as_slice());
        if centroid_norm == 0.0 || !centroid_norm.is_finite() {
            return Err(Error::ZeroNorm("centroid"));
        }
        Ok(Scorer {
            words: sentences.iter().map(|s| word_count(&s.text)).collect(),
            sentences,
            centroid: centroid.as_slice(),
            centroid_norm,
            dim,
        })
    }

    fn check_pool(&self, pool: &[usize]) -> Result<()> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        if let Some(&i) = pool.iter().find(|&&i| i >= self.sentences.len()) {
            return Err(Error::InvalidConfig(format!(
                "pool index {i} out of range for {} sentences",
                self.sentences.len()
            )));
        }
        Ok(())
    }

    /// A zero-norm embedding sum scores 0.
    fn score(&self, sum: &[f64]) -> f64 {
        let n = vector::norm(sum);
        if n == 0.0 {
            return 0.0;
        }
        (vector::dot(sum, self.centroid) / (n * self.centroid_norm)).clamp(-1.0, 1.0)
    }

    fn empty(&self) -> SummaryState {
        SummaryState {
            chosen: Vec::new(),
            emb_sum: vec![0.0; self.dim],
            words: 0,
            score: 0.0,
        }
    }

    fn extend(&self, state: &SummaryState, s: usize) -> SummaryState {
        let mut emb_sum = state.emb_sum.clone();
        vector::add_assign(&mut emb_sum, &self.sentences[s].embedding);
        let mut chosen = state.chosen.clone();
        chosen.push(s);
        SummaryState {
            score: self.score(&emb_sum),
            emb_sum,
            chosen,
            words: state.words + self.words[s],
        }
    }

    /// Best extension of `state` by an unused pool sentence, ignoring budget.
    fn best_extension(&self, state: &SummaryState, pool: &[usize]) -> Option<SummaryState> {
        pool.iter()
            .filter(|s| !state.chosen.contains(s))
            .map(|&s| self.extend(state, s))
            .min_by(rank)
    }
}

/// The first `min(n, len)` sentences of every document, ordered by
/// (doc_index, pos_in_doc), as global indices.
pub fn preselect(cluster: &Cluster, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let mut pool = Vec::new();
    let mut offset = 0;
    for doc in &cluster.documents {
        pool.extend(offset..offset + doc.len().min(n));
        offset += doc.len();
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(pool)
}

/// Greedy selection: repeatedly add the sentence that maximizes the score of
/// the extended summary.
pub fn greedy_select_baseline(
    cluster: &Cluster,
    pool: &[usize],
    centroid: &Centroid,
    budget: usize,
    policy: OverflowPolicy,
) -> Result<SummaryState> {
    let scorer = Scorer::new(cluster, centroid)?;
    scorer.check_pool(pool)?;
    let mut state = scorer.empty();
    loop {
        let next = match policy {
            OverflowPolicy::Skip => pool
                .iter()
                .filter(|s| !state.chosen.contains(s) && state.words + scorer.words[**s] <= budget)
                .map(|&s| scorer.extend(&state, s))
                .min_by(rank),
            OverflowPolicy::Stop => scorer
                .best_extension(&state, pool)
                .filter(|c| c.words <= budget),
        };
        match next {
            Some(c) => state = c,
            None => break,
        }
    }
    if state.chosen.is_empty() {
        return Err(Error::NothingFits(budget));
    }
    Ok(state)
}

/// Beam search over summary states.
///
/// Returns every preserved state, deduplicated by chosen set and
/// sorted best first. A state is preserved when one of its extensions ranks
/// among the top `beam` candidates but exceeds the budget; that beam then
/// stops. Beams that run out of sentences without overflowing are terminal
/// too.
pub fn beam_search(
    cluster: &Cluster,
    pool: &[usize],
    centroid: &Centroid,
    budget: usize,
    beam: usize,
) -> Result<Vec<SummaryState>> {
    beam_search_traced(cluster, pool, centroid, budget, beam, &mut Tracer(None))
}

fn beam_search_traced(
    cluster: &Cluster,
    pool: &[usize],
    centroid: &Centroid,
    budget: usize,
    beam: usize,
    tracer: &mut Tracer<'_>,
) -> Result<Vec<SummaryState>> {
    if beam == 0 {
        return Err(Error::InvalidConfig("beam size must be at least 1".into()));
    }
    let scorer = Scorer::new(cluster, centroid)?;
    scorer.check_pool(pool)?;

    let mut preserved: Vec<SummaryState> = Vec::new();
    // the empty state is the single initial beam; it is never preserved
    let mut live = vec![scorer.empty()];
    let mut step = 0;
    loop {
        let mut candidates: Vec<(usize, SummaryState)> = Vec::new();
        for (b, state) in live.iter().enumerate() {
            let mut exts: Vec<SummaryState> = pool
                .iter()
                .filter(|s| !state.chosen.contains(s))
                .map(|&s| scorer.extend(state, s))
                .collect();
            exts.sort_by(rank);
            exts.truncate(beam);
            candidates.extend(exts.into_iter().map(|e| (b, e)));
        }
        if candidates.is_empty() {
            // pool exhausted without overflowing
            preserved.append(&mut live);
            break;
        }
        candidates.sort_by(|a, b| rank(&a.1, &b.1));
        // one entry per chosen set, remembering every beam that produced it
        let mut merged: Vec<(Vec<usize>, SummaryState)> = Vec::new();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        for (b, c) in candidates {
            match index.entry(c.key()) {
                Entry::Occupied(e) => merged[*e.get()].0.push(b),
                Entry::Vacant(e) => {
                    e.insert(merged.len());
                    merged.push((vec![b], c));
                }
            }
        }
        merged.truncate(beam);

        let mut next = Vec::with_capacity(merged.len());
        let mut stopped = HashSet::new();
        let mut newly_preserved = Vec::new();
        for (parents, c) in merged {
            if c.words > budget {
                for b in parents {
                    if !live[b].chosen.is_empty() && stopped.insert(b) {
                        newly_preserved.push(live[b].clone());
                    }
                }
            } else {
                next.push(c);
            }
        }
        step += 1;
        tracer.emit(|| TraceEvent::BeamStep {
            step,
            live: next.iter().map(TracedState::from).collect(),
            preserved: newly_preserved.iter().map(TracedState::from).collect(),
        });
        preserved.append(&mut newly_preserved);
        live = next;
        if live.is_empty() {
            break;
        }
    }

    preserved.sort_by(rank);
    let mut seen = HashSet::new();
    preserved.retain(|s| seen.insert(s.key()));
    Ok(preserved)
}

/// Budget-filling greedy pass over each state.
///
/// The best-scoring unused sentence is appended if it fits; otherwise it is
/// discarded and counts as a miss. `window` consecutive misses end the pass
/// for that state. Appending does not require the score to improve.
pub fn greedy_extend(
    cluster: &Cluster,
    states: &[SummaryState],
    pool: &[usize],
    centroid: &Centroid,
    budget: usize,
    window: usize,
) -> Result<Vec<SummaryState>> {
    greedy_extend_traced(cluster, states, pool, centroid, budget, window, &mut Tracer(None))
}

fn greedy_extend_traced(
    cluster: &Cluster,
    states: &[SummaryState],
    pool: &[usize],
    centroid: &Centroid,
    budget: usize,
    window: usize,
    tracer: &mut Tracer<'_>,
) -> Result<Vec<SummaryState>> {
    if window == 0 {
        return Ok(states.to_vec());
    }
    let scorer = Scorer::new(cluster, centroid)?;
    scorer.check_pool(pool)?;
    let mut out = Vec::with_capacity(states.len());
    for (b, start) in states.iter().enumerate() {
        let mut state = start.clone();
        let mut remaining: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|s| !state.chosen.contains(s))
            .collect();
        let mut misses = 0;
        while misses < window {
            let Some(best) = scorer.best_extension(&state, &remaining) else {
                break;
            };
            let s = *best.chosen.last().expect("extension adds a sentence");
            remaining.retain(|&r| r != s);
            if best.words <= budget {
                tracer.emit(|| TraceEvent::GreedyAppend {
                    beam: b,
                    sentence: s,
                    score: best.score,
                });
                state = best;
                misses = 0;
            } else {
                misses += 1;
                tracer.emit(|| TraceEvent::GreedySkip {
                    beam: b,
                    sentence: s,
                    misses,
                });
            }
        }
        out.push(state);
    }
    Ok(out)
}

/// Full selection pipeline: pre-selection, then the configured search.
pub fn select_summary(
    cluster: &Cluster,
    centroid: &Centroid,
    config: &SelectionConfig,
) -> Result<SummaryState> {
    select(cluster, centroid, config, &mut Tracer(None))
}

pub fn select_summary_traced(
    cluster: &Cluster,
    centroid: &Centroid,
    config: &SelectionConfig,
) -> Result<(SummaryState, SelectionTrace)> {
    let mut trace = SelectionTrace::default();
    let state = select(cluster, centroid, config, &mut Tracer(Some(&mut trace)))?;
    Ok((state, trace))
}

fn select(
    cluster: &Cluster,
    centroid: &Centroid,
    config: &SelectionConfig,
    tracer: &mut Tracer<'_>,
) -> Result<SummaryState> {
    config.validate()?;
    let pool = preselect(cluster, config.n)?;
    let state = match config.mode {
        SelectionMode::BaselineGreedy => greedy_select_baseline(
            cluster,
            &pool,
            centroid,
            config.budget,
            OverflowPolicy::Skip,
        )?,
        SelectionMode::BeamOnly | SelectionMode::BeamGreedy => {
            let mut best =
                beam_search_traced(cluster, &pool, centroid, config.budget, config.beam, tracer)?;
            best.truncate(config.beam);
            if config.mode == SelectionMode::BeamGreedy {
                best = greedy_extend_traced(
                    cluster,
                    &best,
                    &pool,
                    centroid,
                    config.budget,
                    config.window,
                    tracer,
                )?;
            }
            best.into_iter()
                .min_by(rank)
                .ok_or(Error::NothingFits(config.budget))?
        }
    };
    tracer.emit(|| TraceEvent::Final {
        state: TracedState::from(&state),
    });
    Ok(state)
}

/// Chosen sentences joined by a single space, in source order.
pub fn render(cluster: &Cluster, state: &SummaryState) -> String {
    let sentences: Vec<&Sentence> = cluster.sentences().collect();
    join_texts(
        state
            .source_order()
            .into_iter()
            .map(|i| sentences[i].text.as_str()),
    )
}
