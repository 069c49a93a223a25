use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Centroid, Cluster};
use crate::error::{Error, Result};
use crate::rouge;
use crate::selection::{self, SelectionConfig};
use crate::vector;

use super::adam::{AdamState, StepSchedule};
use super::backward::loss_and_grad;
use super::forward::{cosine_loss, forward, normalize_inputs, ClusterInputs};
use super::params::{CeraParams, Variant, DEFAULT_POSITIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationMetric {
    /// Mean ROUGE-2 recall of summaries selected with the predicted centroid.
    Rouge2Recall,
    /// Mean cosine distance to the gold centroid.
    CosineLoss,
}

impl ValidationMetric {
    fn improves(self, candidate: f64, best: f64) -> bool {
        match self {
            ValidationMetric::Rouge2Recall => candidate > best,
            ValidationMetric::CosineLoss => candidate < best,
        }
    }
}

impl std::str::FromStr for ValidationMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rouge2-recall" | "r2-r" => Ok(ValidationMetric::Rouge2Recall),
            "cosine-loss" | "cosine" => Ok(ValidationMetric::CosineLoss),
            other => Err(Error::InvalidConfig(format!("unknown validation metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub schedule_step: usize,
    pub gamma: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub variant: Variant,
    pub validation: ValidationMetric,
    /// Used to turn predicted centroids into summaries for ROUGE validation.
    pub selection: SelectionConfig,
    pub n_positions: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// lr 5e-4, batch size 2, decay by 0.1 every 3 epochs, patience 3.
    pub fn with_budget(budget: usize) -> Self {
        TrainConfig {
            lr: 5e-4,
            batch_size: 2,
            schedule_step: 3,
            gamma: 0.1,
            max_epochs: 30,
            patience: 3,
            variant: Variant::Cera,
            validation: ValidationMetric::Rouge2Recall,
            selection: SelectionConfig::with_budget(budget),
            n_positions: DEFAULT_POSITIONS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr_ok = self.lr.is_finite() && self.lr > 0.0;
        if !lr_ok || self.batch_size == 0 || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(
                "need lr > 0, batch size >= 1 and 0 < gamma <= 1".into(),
            ));
        }
        if self.max_epochs == 0 || self.schedule_step == 0 || self.n_positions == 0 {
            return Err(Error::InvalidConfig(
                "max epochs, scheduler step and positional rows must be >= 1".into(),
            ));
        }
        self.selection.validate()
    }

    pub fn schedule(&self) -> StepSchedule {
        StepSchedule {
            base: self.lr,
            step: self.schedule_step,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: CeraParams,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub history: Vec<EpochRecord>,
}

/// Mean over references of the mean unit-normalized reference embedding.
pub fn training_target(cluster: &Cluster) -> Result<Vec<f64>> {
    if cluster.references.is_empty() {
        return Err(Error::MissingReference(cluster.id.clone()));
    }
    let mut acc: Option<Vec<f64>> = None;
    for r in &cluster.references {
        if r.sentences.is_empty() {
            return Err(Error::EmptyReference);
        }
        let rows: Vec<Vec<f64>> = r.sentences.iter().map(|s| s.embedding.clone()).collect();
        let rows = normalize_inputs(&rows)?;
        let acc = acc.get_or_insert_with(|| vec![0.0; rows[0].len()]);
        for row in &rows {
            vector::axpy(acc, 1.0 / rows.len() as f64, row);
        }
    }
    let mut acc = acc.expect("at least one reference");
    vector::scale(&mut acc, 1.0 / cluster.references.len() as f64);
    Ok(acc)
}

/// The model's centroid for `cluster`.
pub fn predict_centroid(cluster: &Cluster, params: &CeraParams) -> Result<Centroid> {
    let inputs = ClusterInputs::from_cluster(cluster)?;
    Ok(Centroid(forward(&inputs, params)?.0))
}

struct Example<'a> {
    cluster: &'a Cluster,
    inputs: ClusterInputs,
    gold: Vec<f64>,
}

fn examples(clusters: &[Cluster]) -> Result<Vec<Example<'_>>> {
    clusters
        .iter()
        .map(|c| {
            Ok(Example {
                cluster: c,
                inputs: ClusterInputs::from_cluster(c)?,
                gold: training_target(c)?,
            })
        })
        .collect()
}

fn validation_metric(examples: &[Example<'_>], params: &CeraParams, config: &TrainConfig) -> Result<f64> {
    let values = examples
        .par_iter()
        .map(|ex| {
            let (pred, _) = forward(&ex.inputs, params)?;
            match config.validation {
                ValidationMetric::CosineLoss => cosine_loss(&pred, &ex.gold),
                ValidationMetric::Rouge2Recall => {
                    let state =
                        selection::select_summary(ex.cluster, &Centroid(pred), &config.selection)?;
                    let summary = selection::render(ex.cluster, &state);
                    let refs: Vec<String> =
                        ex.cluster.references.iter().map(|r| r.text()).collect();
                    Ok(rouge::rouge_n(&summary, &refs, 2)?.recall)
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean cosine distance of the model's centroids to the gold centroids.
pub fn mean_cosine_loss(clusters: &[Cluster], params: &CeraParams) -> Result<f64> {
    let ex = examples(clusters)?;
    if ex.is_empty() {
        return Err(Error::EmptyInput("no clusters to score"));
    }
    let mut total = 0.0;
    for e in &ex {
        total += cosine_loss(&forward(&e.inputs, params)?.0, &e.gold)?;
    }
    Ok(total / ex.len() as f64)
}

/// Mini-batch Adam with step decay and early stopping on the validation
/// metric. Returns the parameters of the best validation epoch.
pub fn train(train: &[Cluster], val: &[Cluster], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("validation split"));
    }
    let train_ex = examples(train)?;
    let val_ex = examples(val)?;
    let dim = train_ex[0].inputs.dim();
    if let Some(e) = train_ex.iter().chain(&val_ex).find(|e| e.inputs.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: e.inputs.dim(),
            context: format!("cluster {}", e.cluster.id),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = CeraParams::init(dim, config.n_positions, config.variant, &mut rng);
    let mut adam = AdamState::for_tensors(&params.slices());
    let schedule = config.schedule();
    let mut order: Vec<usize> = (0..train_ex.len()).collect();

    let mut history = Vec::new();
    let mut best: Option<(CeraParams, usize, f64)> = None;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        let lr = schedule.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &train_ex[i];
                let (loss, g) = loss_and_grad(&ex.inputs, &ex.gold, &params)?;
                batch_loss += loss;
                grads.add_scaled(1.0, &g);
            }
            let w = 1.0 / batch.len() as f64;
            for t in grads.slices_mut() {
                vector::scale(t, w);
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {}, batch {b} (clusters {:?})",
                    epoch + 1,
                    batch.iter().map(|&i| &train_ex[i].cluster.id).collect::<Vec<_>>()
                )));
            }
            adam.update(params.slices_mut(), grads.slices(), lr);
            total += batch_loss;
        }
        let train_loss = total / train_ex.len() as f64;
        let val_metric = validation_metric(&val_ex, &params, config)?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_metric,
            lr,
        });
        log::info!(
            "epoch {:>3}  train_loss {train_loss:.6}  val {val_metric:.6}  lr {lr:.3e}",
            epoch + 1
        );
        let improved = best
            .as_ref()
            .is_none_or(|(_, _, m)| config.validation.improves(val_metric, *m));
        if improved {
            best = Some((params.clone(), epoch + 1, val_metric));
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= config.patience {
            break;
        }
    }
    let (params, best_epoch, best_metric) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_metric,
        history,
    })
}

/// Tab-separated `epoch, train_loss, val_metric, lr` with a header row.
pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch\ttrain_loss\tval_metric\tlr\n");
    for r in history {
        out.push_str(&format!(
            "{}\t{:e}\t{:e}\t{:e}\n",
            r.epoch, r.train_loss, r.val_metric, r.lr
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
