//! End-to-end training: regularized stage 1, person-wise sparse-to-sparse
//! rounds, and the ablation baselines.
//!
//! The full method trains an over-parameterized teacher with the invariance
//! penalty, then runs `rounds` rounds of: per-subject importance masks →
//! intersection → zero the weights outside the intersection → fine-tune with
//! the combined objective (mask released, so zeroed weights may regrow)
//! until validation balanced accuracy reaches `threshold` or
//! `inner_epoch_cap` epochs pass. The final model carries the last round's
//! intersection, applied and enforced.
//!
//! Reproducibility contract: all randomness flows from named, seeded streams
//! — model initialization, the validation carve, per-epoch row shuffles, and
//! per-epoch dropout draws. Shuffle and dropout streams are indexed by a
//! global epoch counter that runs across stage 1 and every round, and one
//! optimizer state is carried through the whole run. Mask computation,
//! teacher logits, and validation scoring run in eval mode and consume no
//! randomness. Together these make the ablation collapses exact: with
//! `beta = 0`, `lambda = 0`, `prune_fraction = 0`, `rounds = 1`, the full
//! method replays the plain empirical-risk trajectory bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureDataset, N_CLASSES};
use crate::error::{Error, Result};
use crate::losses::{combined_loss, EnvironmentBatch, IrmVariant, LossWeights};
use crate::metrics::{argmax_predictions, balanced_accuracy};
use crate::net::{AdamState, NetworkArch, NetworkParams};
use crate::pruning::{
    importance_scores, prune_mask, subject_masks, Mask, MaskSettings, Ranking,
};
use crate::rng::{self, salt};

/// Hyperparameters for every training entry point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Hidden layer widths of the over-parameterized network.
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    /// Invariance-penalty weight.
    pub beta: f64,
    /// Soft-label weight.
    pub lambda: f64,
    /// Fraction of weights pruned per subject mask (K).
    pub prune_fraction: f64,
    /// Validation balanced accuracy at which a fine-tune phase stops (T).
    pub threshold: f64,
    /// Number of sparse-to-sparse rounds (R).
    pub rounds: usize,
    pub stage1_epochs: usize,
    /// Hard cap on epochs within one fine-tune phase.
    pub inner_epoch_cap: usize,
    pub batch_size: usize,
    /// Fraction of training subjects carved into a person-disjoint
    /// validation slice used only for the threshold check.
    pub validation_fraction: f64,
    pub irm_variant: IrmVariant,
    pub ranking: Ranking,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![128, 128, 128],
            learning_rate: 1e-4,
            dropout_rate: 0.1,
            beta: 0.3,
            lambda: 0.5,
            prune_fraction: 0.5,
            threshold: 0.70,
            rounds: 50,
            stage1_epochs: 50,
            inner_epoch_cap: 200,
            batch_size: 64,
            validation_fraction: 0.15,
            irm_variant: IrmVariant::Norm,
            ranking: Ranking::Global,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must be in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.prune_fraction) {
            return Err(Error::InvalidConfig(format!(
                "prune fraction must be in [0, 1), got {}",
                self.prune_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.inner_epoch_cap == 0 {
            return Err(Error::InvalidConfig("inner epoch cap must be >= 1".into()));
        }
        self.loss_weights().validate()
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            beta: self.beta,
            lambda: self.lambda,
        }
    }

    pub fn arch_for(&self, n_features: usize) -> Result<NetworkArch> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(n_features);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(N_CLASSES);
        NetworkArch::new(sizes)
    }

    fn mask_settings(&self, weights: LossWeights) -> MaskSettings {
        MaskSettings {
            prune_fraction: self.prune_fraction,
            ranking: self.ranking,
            weights,
            variant: self.irm_variant,
        }
    }
}

/// What happened in one sparse-to-sparse round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    /// 1-based round index.
    pub round: usize,
    /// Fraction of weights kept by this round's intersection mask.
    pub retention: f64,
    /// Fine-tune epochs consumed this round.
    pub inner_epochs: usize,
    /// Whether the phase ended because validation reached the threshold
    /// (as opposed to hitting the epoch cap).
    pub reached_threshold: bool,
    /// Validation balanced accuracy after the last fine-tune epoch; absent
    /// when no validation slice exists.
    pub validation_ba: Option<f64>,
    /// Per-term values of the last epoch's objective (means over rows;
    /// penalty and soft-label terms are unweighted).
    pub cross_entropy: f64,
    pub penalty: f64,
    pub soft_label: f64,
    pub total_loss: f64,
}

impl RoundTrace {
    /// One structured log line, suitable for a line-per-round trace file.
    pub fn log_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Write one JSON line per round.
pub fn write_trace_log(path: &Path, traces: &[RoundTrace]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for t in traces {
        writeln!(out, "{}", t.log_line())?;
    }
    Ok(())
}

pub fn read_trace_log(path: &Path) -> Result<Vec<RoundTrace>> {
    let file = fs::File::open(path)?;
    let mut traces = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        traces.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Serde(format!("bad trace line: {e}")))?,
        );
    }
    Ok(traces)
}

/// A training run's view of the data: the person-disjoint validation slice
/// carved off, environments of the remaining training partition precomputed.
struct Session {
    train: FeatureDataset,
    validation: Option<FeatureDataset>,
    /// Sorted (subject, row indices into `train`) pairs.
    envs: Vec<(String, Vec<usize>)>,
}

impl Session {
    fn new(dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let subjects = dataset.unique_subjects();
        if subjects.len() < 2 {
            return Err(Error::Data(format!(
                "training needs at least 2 subjects, got {}",
                subjects.len()
            )));
        }

        // Person-disjoint validation carve. At least one subject when the
        // fraction is positive, while always leaving >= 2 training
        // subjects; with only 2 subjects no slice is carved and threshold
        // phases run to their epoch cap.
        let n = subjects.len();
        let n_val = if cfg.validation_fraction == 0.0 || n < 3 {
            0
        } else {
            let raw = (cfg.validation_fraction * n as f64).round() as usize;
            raw.clamp(1, n - 2)
        };

        let (train, validation) = if n_val == 0 {
            (dataset.clone(), None)
        } else {
            let mut shuffled = subjects;
            let mut carve_rng = rng::stream(cfg.seed, salt::CARVE, 0);
            shuffled.shuffle(&mut carve_rng);
            let val_subjects: Vec<String> = shuffled.split_off(n - n_val);
            (
                dataset.subset_by_subjects(&shuffled)?,
                Some(dataset.subset_by_subjects(&val_subjects)?),
            )
        };

        let counts = train.class_counts();
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::Data(
                "degenerate training partition: a class has no examples".into(),
            ));
        }

        let envs = train.environments();
        Ok(Self {
            train,
            validation,
            envs,
        })
    }

    /// Validation score for the threshold check: balanced accuracy, or
    /// plain accuracy if the slice happens to hold a single class. `None`
    /// when no slice was carved.
    fn validation_score(&self, model: &NetworkParams) -> Result<Option<f64>> {
        let Some(val) = &self.validation else {
            return Ok(None);
        };
        let (logits, _) = model.forward_eval(&val.features)?;
        let preds = argmax_predictions(&logits);
        let counts = val.class_counts();
        let score = if counts.iter().all(|&c| c > 0) {
            balanced_accuracy(&val.labels, &preds, N_CLASSES)?
        } else {
            let hits = preds
                .iter()
                .zip(&val.labels)
                .filter(|(p, y)| p == y)
                .count();
            hits as f64 / preds.len() as f64
        };
        Ok(Some(score))
    }
}

fn gather_rows(a: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), a.ncols()), |(i, j)| a[[rows[i], j]])
}

/// Stratified minibatch plan for one epoch: every batch takes a contiguous
/// chunk of every subject's freshly shuffled rows, so the per-environment
/// penalty is defined at every step. Subjects with fewer rows than there are
/// batches contribute what they have. Batches are (env index, rows) lists in
/// sorted-subject order.
fn stratified_batches(
    envs: &[(String, Vec<usize>)],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<(usize, Vec<usize>)>> {
    let total: usize = envs.iter().map(|(_, rows)| rows.len()).sum();
    let n_batches = total.div_ceil(batch_size).max(1);
    let shuffled: Vec<Vec<usize>> = envs
        .iter()
        .map(|(_, rows)| {
            let mut v = rows.clone();
            v.shuffle(rng);
            v
        })
        .collect();
    (0..n_batches)
        .map(|b| {
            shuffled
                .iter()
                .enumerate()
                .filter_map(|(e, rows)| {
                    let m = rows.len();
                    let lo = b * m / n_batches;
                    let hi = (b + 1) * m / n_batches;
                    (lo < hi).then(|| (e, rows[lo..hi].to_vec()))
                })
                .collect()
        })
        .collect()
}

/// Row-weighted means of the objective terms over one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct EpochStats {
    cross_entropy: f64,
    penalty: f64,
    soft_label: f64,
    total: f64,
}

/// One pass over the training partition at global epoch `epoch`: stratified
/// batches from the epoch's shuffle stream, dropout from the epoch's dropout
/// stream, one combined-loss backward/update per batch.
fn run_train_epoch(
    model: &mut NetworkParams,
    opt: &mut AdamState,
    session: &Session,
    teacher_logits: Option<&Array2<f64>>,
    weights: LossWeights,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    let mut shuffle_rng = rng::stream(cfg.seed, salt::SHUFFLE, epoch as u64);
    let mut dropout_rng = rng::stream(cfg.seed, salt::DROPOUT, epoch as u64);
    let batches = stratified_batches(&session.envs, cfg.batch_size, &mut shuffle_rng);

    let mut sums = EpochStats::default();
    let mut n_rows = 0usize;
    for batch in &batches {
        let rows: Vec<usize> = batch.iter().flat_map(|(_, r)| r.iter().copied()).collect();
        let x = gather_rows(&session.train.features, &rows);
        let (logits, cache) = model.forward_train(&x, cfg.dropout_rate, &mut dropout_rng)?;

        let mut env_batches = Vec::with_capacity(batch.len());
        let mut offset = 0;
        for (e, r) in batch {
            let block = logits
                .slice(ndarray::s![offset..offset + r.len(), ..])
                .to_owned();
            let labels = r.iter().map(|&i| session.train.labels[i]).collect();
            env_batches.push(EnvironmentBatch {
                env_id: session.envs[*e].0.clone(),
                logits: block,
                labels,
            });
            offset += r.len();
        }

        let teacher_block = teacher_logits.map(|t| gather_rows(t, &rows));
        let loss = combined_loss(
            &env_batches,
            teacher_block.as_ref(),
            &weights,
            cfg.irm_variant,
        )?;
        if !loss.total.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss diverged at epoch {epoch} (total = {})",
                loss.total
            )));
        }
        let grads = model.backward(&cache, &loss.grad)?;
        model.apply_update(&grads, opt, cfg.learning_rate)?;

        let w = rows.len() as f64;
        sums.cross_entropy += loss.cross_entropy * w;
        sums.penalty += loss.penalty_sum * w;
        sums.soft_label += loss.soft_label * w;
        sums.total += loss.total * w;
        n_rows += rows.len();
    }

    let n = n_rows as f64;
    Ok(EpochStats {
        cross_entropy: sums.cross_entropy / n,
        penalty: sums.penalty / n,
        soft_label: sums.soft_label / n,
        total: sums.total / n,
    })
}

enum StopRule {
    /// Exactly this many epochs, no validation involved.
    FixedEpochs(usize),
    /// Until validation reaches the threshold, at most `cap` epochs.
    UntilValidation { threshold: f64, cap: usize },
}

struct PhaseReport {
    epochs_used: usize,
    reached_threshold: bool,
    validation_ba: Option<f64>,
    last_stats: EpochStats,
    epoch_stats: Vec<EpochStats>,
}

/// Run one training phase, advancing the global epoch counter.
fn run_phase(
    model: &mut NetworkParams,
    opt: &mut AdamState,
    session: &Session,
    teacher_logits: Option<&Array2<f64>>,
    weights: LossWeights,
    cfg: &TrainConfig,
    epoch_counter: &mut usize,
    rule: StopRule,
) -> Result<PhaseReport> {
    let mut epoch_stats = Vec::new();
    let mut reached = false;
    let mut validation_ba = None;
    match rule {
        StopRule::FixedEpochs(n) => {
            for _ in 0..n {
                let stats = run_train_epoch(
                    model,
                    opt,
                    session,
                    teacher_logits,
                    weights,
                    cfg,
                    *epoch_counter,
                )?;
                *epoch_counter += 1;
                epoch_stats.push(stats);
            }
        }
        StopRule::UntilValidation { threshold, cap } => {
            while epoch_stats.len() < cap {
                let stats = run_train_epoch(
                    model,
                    opt,
                    session,
                    teacher_logits,
                    weights,
                    cfg,
                    *epoch_counter,
                )?;
                *epoch_counter += 1;
                epoch_stats.push(stats);
                validation_ba = session.validation_score(model)?;
                if let Some(v) = validation_ba {
                    if v >= threshold {
                        reached = true;
                        break;
                    }
                }
            }
        }
    }
    Ok(PhaseReport {
        epochs_used: epoch_stats.len(),
        reached_threshold: reached,
        validation_ba,
        last_stats: epoch_stats.last().copied().unwrap_or_default(),
        epoch_stats,
    })
}

/// Shared first stage: fresh model, fresh optimizer, `stage1_epochs` epochs
/// of the given objective. Returns everything later stages build on.
fn fit_stage1(
    dataset: &FeatureDataset,
    cfg: &TrainConfig,
    weights: LossWeights,
) -> Result<(Session, NetworkParams, AdamState, usize, Vec<EpochStats>)> {
    let session = Session::new(dataset, cfg)?;
    let arch = cfg.arch_for(session.train.n_features())?;
    let mut init_rng = rng::stream(cfg.seed, salt::INIT, 0);
    let mut model = NetworkParams::init(arch.clone(), &mut init_rng);
    let mut opt = AdamState::new(&arch);
    let mut epoch_counter = 0usize;
    let report = run_phase(
        &mut model,
        &mut opt,
        &session,
        None,
        weights,
        cfg,
        &mut epoch_counter,
        StopRule::FixedEpochs(cfg.stage1_epochs),
    )?;
    Ok((session, model, opt, epoch_counter, report.epoch_stats))
}

/// Plain pooled cross-entropy training (the ERM baseline).
pub fn train_erm(dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<NetworkParams> {
    let weights = LossWeights {
        beta: 0.0,
        lambda: 0.0,
    };
    let (_, model, _, _, _) = fit_stage1(dataset, cfg, weights)?;
    Ok(model)
}

/// Stage-1 teacher: cross entropy plus `beta` times the per-subject
/// invariance penalty. Returns the dense, unmasked model.
pub fn train_irm_stage1(dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<NetworkParams> {
    let weights = LossWeights {
        beta: cfg.beta,
        lambda: 0.0,
    };
    let (_, model, _, _, _) = fit_stage1(dataset, cfg, weights)?;
    Ok(model)
}

/// One sparse-to-sparse round: per-subject masks of the current model,
/// intersection, zero the weights outside it, then fine-tune with the mask
/// released until validation reaches the threshold or the epoch cap.
///
/// `opt` and `epoch_offset` carry the optimizer state and global epoch
/// counter across stage 1 and earlier rounds; advance the offset by the
/// returned trace's `inner_epochs`. A numerical breakdown aborts the round
/// with a diagnostic naming it.
pub fn hhiss_round(
    mut model: NetworkParams,
    teacher: &NetworkParams,
    dataset: &FeatureDataset,
    cfg: &TrainConfig,
    round_index: usize,
    opt: &mut AdamState,
    epoch_offset: usize,
) -> Result<(NetworkParams, RoundTrace, Mask)> {
    let session = Session::new(dataset, cfg)?;
    let (teacher_logits, _) = teacher.forward_eval(&session.train.features)?;
    let weights = cfg.loss_weights();

    let masks = subject_masks(
        &model,
        &session.train,
        Some(&teacher_logits),
        &cfg.mask_settings(weights),
    )?;
    let mask_list: Vec<Mask> = masks.into_iter().map(|(_, m)| m).collect();
    let intersection = Mask::intersect_all(&mask_list)?;
    model.apply_mask(&intersection)?;

    let mut epoch_counter = epoch_offset;
    let report = run_phase(
        &mut model,
        opt,
        &session,
        Some(&teacher_logits),
        weights,
        cfg,
        &mut epoch_counter,
        StopRule::UntilValidation {
            threshold: cfg.threshold,
            cap: cfg.inner_epoch_cap,
        },
    )
    .map_err(|e| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("round {round_index}: {msg}")),
        other => other,
    })?;

    let trace = RoundTrace {
        round: round_index,
        retention: intersection.retention(),
        inner_epochs: report.epochs_used,
        reached_threshold: report.reached_threshold,
        validation_ba: report.validation_ba,
        cross_entropy: report.last_stats.cross_entropy,
        penalty: report.last_stats.penalty,
        soft_label: report.last_stats.soft_label,
        total_loss: report.last_stats.total,
    };
    Ok((model, trace, intersection))
}

/// The full method: stage-1 teacher, then `rounds` sparse-to-sparse rounds.
/// The returned model carries the last round's intersection mask, applied
/// and enforced.
pub fn hhiss_train(
    dataset: &FeatureDataset,
    cfg: &TrainConfig,
) -> Result<(NetworkParams, Vec<RoundTrace>)> {
    let stage1_weights = LossWeights {
        beta: cfg.beta,
        lambda: 0.0,
    };
    let (_, teacher, mut opt, mut epoch_offset, _) = fit_stage1(dataset, cfg, stage1_weights)?;

    let mut model = teacher.clone();
    let mut traces = Vec::with_capacity(cfg.rounds);
    let mut last_mask = None;
    for round_index in 1..=cfg.rounds {
        let (next, trace, mask) = hhiss_round(
            model,
            &teacher,
            dataset,
            cfg,
            round_index,
            &mut opt,
            epoch_offset,
        )?;
        model = next;
        epoch_offset += trace.inner_epochs;
        traces.push(trace);
        last_mask = Some(mask);
    }

    let final_mask = last_mask.expect("rounds >= 1 is enforced");
    model.attach_mask(final_mask)?;
    Ok((model, traces))
}

/// Pooled (non-subject-wise) importance mask from one eval-mode pass over
/// the whole training partition.
fn pooled_mask(
    model: &NetworkParams,
    session: &Session,
    teacher_logits: Option<&Array2<f64>>,
    weights: LossWeights,
    cfg: &TrainConfig,
) -> Result<Mask> {
    let rows: Vec<usize> = session
        .envs
        .iter()
        .flat_map(|(_, r)| r.iter().copied())
        .collect();
    let x = gather_rows(&session.train.features, &rows);
    let (logits, cache) = model.forward_eval(&x)?;

    let mut env_batches = Vec::with_capacity(session.envs.len());
    let mut offset = 0;
    for (name, r) in &session.envs {
        let block = logits
            .slice(ndarray::s![offset..offset + r.len(), ..])
            .to_owned();
        let labels = r.iter().map(|&i| session.train.labels[i]).collect();
        env_batches.push(EnvironmentBatch {
            env_id: name.clone(),
            logits: block,
            labels,
        });
        offset += r.len();
    }
    let teacher_block = teacher_logits.map(|t| gather_rows(t, &rows));
    let loss = combined_loss(
        &env_batches,
        teacher_block.as_ref(),
        &weights,
        cfg.irm_variant,
    )?;
    let grads = model.backward(&cache, &loss.grad)?;
    let scores = importance_scores(model, &grads)?;
    prune_mask(&scores, cfg.prune_fraction, cfg.ranking)
}

/// Gradient-magnitude pruning baseline: plain training, one pooled pruning
/// pass at `prune_fraction`, then cross-entropy fine-tuning with the mask
/// enforced. Retention is exactly the pooled mask's (no intersection
/// shrinkage).
pub fn baseline_erm_pruning(dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<NetworkParams> {
    let weights = LossWeights {
        beta: 0.0,
        lambda: 0.0,
    };
    let (session, mut model, mut opt, mut epoch_counter, _) =
        fit_stage1(dataset, cfg, weights)?;
    let mask = pooled_mask(&model, &session, None, weights, cfg)?;
    model.attach_mask(mask)?;
    run_phase(
        &mut model,
        &mut opt,
        &session,
        None,
        weights,
        cfg,
        &mut epoch_counter,
        StopRule::UntilValidation {
            threshold: cfg.threshold,
            cap: cfg.inner_epoch_cap,
        },
    )?;
    Ok(model)
}

/// Sparse-training baseline: regularized stage 1, one pooled pruning pass,
/// then fine-tuning with the same regularized objective and the mask
/// enforced throughout. No per-subject intersection, no soft-label term.
pub fn baseline_sparsetrain(dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<NetworkParams> {
    let weights = LossWeights {
        beta: cfg.beta,
        lambda: 0.0,
    };
    let (session, mut model, mut opt, mut epoch_counter, _) =
        fit_stage1(dataset, cfg, weights)?;
    let mask = pooled_mask(&model, &session, None, weights, cfg)?;
    model.attach_mask(mask)?;
    run_phase(
        &mut model,
        &mut opt,
        &session,
        None,
        weights,
        cfg,
        &mut epoch_counter,
        StopRule::UntilValidation {
            threshold: cfg.threshold,
            cap: cfg.inner_epoch_cap,
        },
    )?;
    Ok(model)
}

/// Distillation baseline: stage-1 teacher, then a fresh student trained with
/// cross entropy plus `lambda` times the soft-label term. No pruning. The
/// student restarts the epoch streams from zero, so with `lambda = 0` it
/// replays the plain baseline exactly.
pub fn baseline_kd(dataset: &FeatureDataset, cfg: &TrainConfig) -> Result<NetworkParams> {
    let stage1_weights = LossWeights {
        beta: cfg.beta,
        lambda: 0.0,
    };
    let (session, teacher, _, _, _) = fit_stage1(dataset, cfg, stage1_weights)?;
    let (teacher_logits, _) = teacher.forward_eval(&session.train.features)?;

    let arch = cfg.arch_for(session.train.n_features())?;
    let mut init_rng = rng::stream(cfg.seed, salt::INIT, 0);
    let mut student = NetworkParams::init(arch.clone(), &mut init_rng);
    let mut opt = AdamState::new(&arch);
    let mut epoch_counter = 0usize;
    let weights = LossWeights {
        beta: 0.0,
        lambda: cfg.lambda,
    };
    run_phase(
        &mut student,
        &mut opt,
        &session,
        Some(&teacher_logits),
        weights,
        cfg,
        &mut epoch_counter,
        StopRule::FixedEpochs(cfg.stage1_epochs),
    )?;
    Ok(student)
}
