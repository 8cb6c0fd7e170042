//! The self-training loop: pool bookkeeping, per-iteration decoding,
//! selection, re-training, evaluation, and run-directory output.
//!
//! One iteration decodes every unlabeled epoch, scores confidences, selects
//! per the active policy, moves accepted epochs into the training pool with
//! pseudo-labels, re-trains all six models from scratch on the updated pool,
//! and evaluates on the held-out set. Gold epochs never change; an epoch is
//! in exactly one of {pool, unlabeled} at all times.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use crate::corpus::{Corpus, LabelClass, PerClass, Role};
use crate::error::{Error, Result};
use crate::eval::{accuracy, score, sensitivity, ConfusionMatrix};
use crate::features::{segment_and_extract, label_epochs, AutoLabel, Epoch, FeatureConfig};
use crate::hmm::{
    baum_welch, confidence, init_model, save_model_set, Emitter, GmmHmm, ModelSet, TrainOptions,
};
use crate::seed::derive_seed;
use crate::selector::{
    adjust_policy, select, write_selection_audit, Decoded, ScoreKind, SelectionPolicy,
    SelectionResult,
};

/// Model size and EM controls shared by every class.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub states: usize,
    pub mixtures: usize,
    pub train: TrainOptions,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            states: 5,
            mixtures: 8,
            train: TrainOptions::default(),
        }
    }
}

/// Loop controls.
#[derive(Debug, Clone, Copy)]
pub struct LoopConfig {
    pub max_iterations: usize,
    /// Stop after eval accuracy falls by more than this for two consecutive
    /// iterations.
    pub accuracy_drop: f64,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_iterations: 7,
            accuracy_drop: 0.02,
            seed: 0,
        }
    }
}

/// Where a pool epoch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Gold,
    Auto { iteration: usize },
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub epoch: Epoch,
    pub provenance: Provenance,
}

/// The growing per-class training set. Gold entries are immutable; an epoch
/// id can be added at most once.
#[derive(Debug, Clone, Default)]
pub struct TrainingPool {
    per_class: PerClass<Vec<PoolEntry>>,
    ids: BTreeSet<crate::features::EpochId>,
}

impl TrainingPool {
    /// Seed the pool from gold-labeled epochs.
    pub fn from_gold(epochs: Vec<Epoch>) -> Result<TrainingPool> {
        let mut pool = TrainingPool::default();
        for epoch in epochs {
            let label = epoch.gold_label.ok_or_else(|| {
                Error::Validation(format!("gold epoch {} has no label", epoch.id))
            })?;
            if !pool.ids.insert(epoch.id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate epoch id {} in gold set",
                    epoch.id
                )));
            }
            pool.per_class[label.index()].push(PoolEntry {
                epoch,
                provenance: Provenance::Gold,
            });
        }
        Ok(pool)
    }

    /// Add a pseudo-labeled epoch. Rejects duplicates.
    pub fn add_auto(
        &mut self,
        mut epoch: Epoch,
        class: LabelClass,
        conf: f64,
        iteration: usize,
    ) -> Result<()> {
        if !self.ids.insert(epoch.id.clone()) {
            return Err(Error::Validation(format!(
                "epoch {} is already in the pool",
                epoch.id
            )));
        }
        epoch.auto_label = Some(AutoLabel {
            class,
            confidence: conf,
            iteration,
        });
        self.per_class[class.index()].push(PoolEntry {
            epoch,
            provenance: Provenance::Auto { iteration },
        });
        Ok(())
    }

    pub fn sizes(&self) -> PerClass<usize> {
        std::array::from_fn(|i| self.per_class[i].len())
    }

    pub fn gold_sizes(&self) -> PerClass<usize> {
        std::array::from_fn(|i| {
            self.per_class[i]
                .iter()
                .filter(|e| e.provenance == Provenance::Gold)
                .count()
        })
    }

    pub fn len(&self) -> usize {
        self.per_class.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self, class: LabelClass) -> &[PoolEntry] {
        &self.per_class[class.index()]
    }

    pub fn contains(&self, id: &crate::features::EpochId) -> bool {
        self.ids.contains(id)
    }

    fn sequences(&self, class: LabelClass) -> Vec<&Array2<f64>> {
        self.per_class[class.index()]
            .iter()
            .map(|e| &e.epoch.frames)
            .collect()
    }
}

/// Everything reported about one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub sensitivity: PerClass<f64>,
    pub accuracy: f64,
    pub selected: PerClass<usize>,
    pub thresholds: PerClass<f64>,
    pub pool_sizes: PerClass<usize>,
    pub train_log_likelihood: PerClass<f64>,
    pub stalled: bool,
}

impl IterationReport {
    pub fn sensitivity_map(&self) -> BTreeMap<LabelClass, f64> {
        LabelClass::ALL
            .iter()
            .map(|&c| (c, self.sensitivity[c.index()]))
            .collect()
    }

    /// `iteration,class,sensitivity,selected,threshold,pool_size,accuracy`
    /// with accuracy repeated per row.
    pub fn to_csv_rows(&self) -> String {
        let mut out = String::new();
        for c in LabelClass::ALL {
            let i = c.index();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.iteration,
                c,
                self.sensitivity[i],
                self.selected[i],
                self.thresholds[i],
                self.pool_sizes[i],
                self.accuracy
            ));
        }
        out
    }
}

pub const REPORT_HEADER: &str = "iteration,class,sensitivity,selected,threshold,pool_size,accuracy\n";

pub fn write_report_csv(path: &Path, reports: &[&IterationReport]) -> Result<()> {
    let mut out = String::from(REPORT_HEADER);
    for r in reports {
        out.push_str(&r.to_csv_rows());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parse rows written by [`write_report_csv`]. Fields not present in the CSV
/// (training log likelihoods, the stalled flag) come back zeroed.
pub fn read_report_csv(path: &Path) -> Result<Vec<IterationReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut by_iter: BTreeMap<usize, IterationReport> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::parse(path, lineno + 1, "expected 7 fields"));
        }
        let bad = |what: &str| Error::parse(path, lineno + 1, format!("bad {what}"));
        let iteration: usize = f[0].parse().map_err(|_| bad("iteration"))?;
        let class = LabelClass::from_name(f[1]).ok_or_else(|| bad("class"))?;
        let report = by_iter.entry(iteration).or_insert_with(|| IterationReport {
            iteration,
            sensitivity: [0.0; 6],
            accuracy: 0.0,
            selected: [0; 6],
            thresholds: [0.0; 6],
            pool_sizes: [0; 6],
            train_log_likelihood: [0.0; 6],
            stalled: false,
        });
        let i = class.index();
        report.sensitivity[i] = f[2].parse().map_err(|_| bad("sensitivity"))?;
        report.selected[i] = f[3].parse().map_err(|_| bad("selected"))?;
        report.thresholds[i] = f[4].parse().map_err(|_| bad("threshold"))?;
        report.pool_sizes[i] = f[5].parse().map_err(|_| bad("pool_size"))?;
        report.accuracy = f[6].parse().map_err(|_| bad("accuracy"))?;
    }
    Ok(by_iter.into_values().collect())
}

/// How the loop builds its per-iteration selection policy.
#[derive(Debug, Clone)]
pub enum SchemeSpec {
    Volume {
        growth_factor: f64,
    },
    Threshold {
        thresholds: PerClass<f64>,
        score_kind: ScoreKind,
    },
}

#[derive(Debug, Clone)]
pub struct PolicySpec {
    pub scheme: SchemeSpec,
    pub include_background: bool,
}

impl PolicySpec {
    pub fn initial_policy(&self, pool_sizes: &PerClass<usize>) -> SelectionPolicy {
        match &self.scheme {
            SchemeSpec::Volume { growth_factor } => {
                SelectionPolicy::volume(*growth_factor, pool_sizes, self.include_background)
            }
            SchemeSpec::Threshold {
                thresholds,
                score_kind,
            } => SelectionPolicy::threshold(*thresholds, *score_kind, self.include_background),
        }
    }
}

/// Train all six models from scratch on the pool. Initialization draws from
/// a per-class stream derived from the root seed alone, so consecutive
/// iterations differ only through their training data and reruns are
/// bit-identical.
pub fn train_models(
    pool: &TrainingPool,
    params: &ModelParams,
    fingerprint: &str,
    root_seed: u64,
) -> Result<(ModelSet, PerClass<f64>)> {
    let outcomes: Vec<Result<(GmmHmm, f64)>> = LabelClass::ALL
        .par_iter()
        .map(|&class| {
            let sequences = pool.sequences(class);
            if sequences.is_empty() {
                return Err(Error::Init {
                    class: class.name().into(),
                    message: "no training epochs in the pool".into(),
                });
            }
            let class_seed = derive_seed(root_seed, &format!("train/{}", class));
            let init = init_model(class, &sequences, params.states, params.mixtures, class_seed)?;
            let (model, history) = baum_welch(&init, &sequences, &params.train)?;
            let ll = *history.last().expect("history is never empty");
            Ok((model, ll))
        })
        .collect();
    let mut models = Vec::with_capacity(6);
    let mut lls = [0.0f64; 6];
    for outcome in outcomes {
        let (model, ll) = outcome?;
        lls[model.class.index()] = ll;
        models.push(model);
    }
    let set = ModelSet::new(models, fingerprint.to_string())?;
    Ok((set, lls))
}

/// Decode a batch of epochs: argmax class and confidence for each.
pub fn decode_epochs(models: &ModelSet, epochs: &[Epoch]) -> Result<Vec<Decoded>> {
    let emitters: Vec<Emitter> = models.models.iter().map(Emitter::new).collect();
    epochs
        .par_iter()
        .map(|epoch| {
            if epoch.frames.ncols() != models.feature_dim() {
                return Err(Error::Decode(format!(
                    "epoch {} has dim {}, models have {}",
                    epoch.id,
                    epoch.frames.ncols(),
                    models.feature_dim()
                )));
            }
            let view = epoch.frames.view();
            let mut scores = [f64::NEG_INFINITY; 6];
            for (model, emitter) in models.models.iter().zip(&emitters) {
                let log_b = emitter.log_emission_matrix(&view);
                scores[model.class.index()] = crate::hmm::forward_ll(model, &log_b);
            }
            let conf = confidence(&scores, epoch.frames.nrows())?;
            Ok(Decoded {
                id: epoch.id.clone(),
                start: epoch.start,
                class: conf.class,
                confidence: conf.value,
                raw_score: scores[conf.class.index()],
                scores,
            })
        })
        .collect()
}

/// Decode an eval set and score it against its gold labels.
pub fn evaluate(
    models: &ModelSet,
    eval_epochs: &[Epoch],
) -> Result<(ConfusionMatrix, PerClass<f64>, f64)> {
    let decoded = decode_epochs(models, eval_epochs)?;
    let predictions: Vec<_> = decoded.iter().map(|d| (d.id.clone(), d.class)).collect();
    let golds: Vec<_> = eval_epochs
        .iter()
        .map(|e| {
            e.gold_label
                .map(|g| (e.id.clone(), g))
                .ok_or_else(|| Error::Scoring(format!("eval epoch {} has no gold label", e.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = score(&predictions, &golds)?;
    let mut sens = [0.0f64; 6];
    for c in LabelClass::ALL {
        sens[c.index()] = sensitivity(&matrix, c)?;
    }
    let acc = accuracy(&matrix)?;
    Ok((matrix, sens, acc))
}

/// Mutable loop state passed between iterations.
#[derive(Debug, Clone)]
pub struct SelfTrainState {
    pub models: ModelSet,
    pub pool: TrainingPool,
    pub unlabeled: Vec<Epoch>,
    pub policy: SelectionPolicy,
}

/// Side artifacts of one iteration, for audit files.
pub struct IterationArtifacts {
    pub decoded: Vec<Decoded>,
    pub selection: SelectionResult,
}

/// Train the baseline models from gold only and produce the iteration-0
/// report.
pub fn train_baseline(
    pool: &TrainingPool,
    eval_epochs: &[Epoch],
    params: &ModelParams,
    fingerprint: &str,
    root_seed: u64,
) -> Result<(ModelSet, IterationReport)> {
    let (models, lls) = train_models(pool, params, fingerprint, root_seed)?;
    let (_, sens, acc) = evaluate(&models, eval_epochs)?;
    let report = IterationReport {
        iteration: 0,
        sensitivity: sens,
        accuracy: acc,
        selected: [0; 6],
        thresholds: [f64::INFINITY; 6],
        pool_sizes: pool.sizes(),
        train_log_likelihood: lls,
        stalled: false,
    };
    Ok((models, report))
}

/// Run one self-training iteration.
///
/// On success the state reflects the completed iteration; on error the state
/// is untouched. A stalled iteration (nothing selected for any class) leaves
/// models, pool and unlabeled set unchanged and copies the previous report's
/// eval numbers.
pub fn run_iteration(
    state: &mut SelfTrainState,
    iteration: usize,
    eval_epochs: &[Epoch],
    params: &ModelParams,
    root_seed: u64,
    previous: &IterationReport,
) -> Result<(IterationReport, IterationArtifacts)> {
    if state.unlabeled.is_empty() {
        return Err(Error::Train("no unlabeled epochs left to decode".into()));
    }
    let decoded = decode_epochs(&state.models, &state.unlabeled)?;
    let selection = select(&decoded, &state.policy)?;
    let thresholds: PerClass<f64> =
        std::array::from_fn(|i| selection.per_class[i].effective_threshold);
    let selected: PerClass<usize> =
        std::array::from_fn(|i| selection.per_class[i].accepted.len());

    if selection.total_accepted() == 0 {
        let report = IterationReport {
            iteration,
            sensitivity: previous.sensitivity,
            accuracy: previous.accuracy,
            selected,
            thresholds,
            pool_sizes: state.pool.sizes(),
            train_log_likelihood: previous.train_log_likelihood,
            stalled: true,
        };
        return Ok((
            report,
            IterationArtifacts {
                decoded,
                selection,
            },
        ));
    }

    // Stage the pool update so a failed re-train leaves the state untouched.
    let mut accepted_ids = BTreeSet::new();
    let mut accepted_info: BTreeMap<crate::features::EpochId, (LabelClass, f64)> = BTreeMap::new();
    for c in LabelClass::ALL {
        for d in &selection.per_class[c.index()].accepted {
            accepted_ids.insert(d.id.clone());
            accepted_info.insert(d.id.clone(), (c, d.confidence));
        }
    }
    let mut candidate_pool = state.pool.clone();
    let mut remaining = Vec::with_capacity(state.unlabeled.len() - accepted_ids.len());
    let mut moved = Vec::new();
    for epoch in state.unlabeled.iter() {
        if accepted_ids.contains(&epoch.id) {
            moved.push(epoch.clone());
        } else {
            remaining.push(epoch.clone());
        }
    }
    for epoch in moved {
        let (class, conf) = accepted_info[&epoch.id];
        candidate_pool.add_auto(epoch, class, conf, iteration)?;
    }

    let (models, lls) = train_models(
        &candidate_pool,
        params,
        &state.models.fingerprint,
        root_seed,
    )?;
    let (_, sens, acc) = evaluate(&models, eval_epochs)?;

    state.policy = adjust_policy(&state.policy, &candidate_pool.sizes());
    state.pool = candidate_pool;
    state.unlabeled = remaining;
    state.models = models;

    let report = IterationReport {
        iteration,
        sensitivity: sens,
        accuracy: acc,
        selected,
        thresholds,
        pool_sizes: state.pool.sizes(),
        train_log_likelihood: lls,
        stalled: false,
    };
    Ok((report, IterationArtifacts { decoded, selection }))
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AllUnlabeledConsumed,
    MaxIterations,
    AccuracyDrop,
    Stalled,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::AllUnlabeledConsumed => "all-unlabeled-consumed",
            StopReason::MaxIterations => "max-iterations",
            StopReason::AccuracyDrop => "accuracy-drop",
            StopReason::Stalled => "stalled",
        }
    }
}

/// Final auto label for one originally-unlabeled epoch. `accepted_iteration`
/// is `None` for epochs never accepted into the pool; their label is the
/// final models' argmax and their confidence is typically low.
#[derive(Debug, Clone)]
pub struct FinalLabel {
    pub id: crate::features::EpochId,
    pub start: f64,
    pub class: LabelClass,
    pub confidence: f64,
    pub accepted_iteration: Option<usize>,
}

/// Everything a self-training run produces.
pub struct RunOutput {
    pub reports: Vec<IterationReport>,
    pub models: ModelSet,
    pub final_labels: Vec<FinalLabel>,
    pub stop: StopReason,
}

/// Label-file schema plus a confidence column.
pub fn write_final_labels(path: &Path, labels: &[FinalLabel], epoch_duration: f64) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            l.id.record_id,
            l.id.channel,
            l.start,
            l.start + epoch_duration,
            l.class.code(),
            l.confidence
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn iter_dir(out: &Path, iteration: usize) -> PathBuf {
    out.join(format!("iter_{iteration}"))
}

fn write_iteration_dir(
    out: &Path,
    iteration: usize,
    models: &ModelSet,
    report: &IterationReport,
    audit: Option<(&[Decoded], &SelectionResult)>,
) -> Result<()> {
    let dir = iter_dir(out, iteration);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_model_set(&dir.join("models.txt"), models)?;
    write_report_csv(&dir.join("report.csv"), &[report])?;
    match audit {
        Some((decoded, selection)) => {
            write_selection_audit(&dir.join("selection_audit.csv"), iteration, decoded, selection)?
        }
        None => {
            let p = dir.join("selection_audit.csv");
            fs::write(
                &p,
                "iteration,class,record_id,channel,start_s,confidence,accepted\n",
            )
            .map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

/// The full loop: baseline, then iterations until a stop condition.
///
/// When `out_dir` is given, every iteration writes
/// `iter_<k>/{models.txt, report.csv, selection_audit.csv}` and the run
/// finishes with `summary.csv`, `final_labels.csv`, and `stop_reason.txt`.
#[allow(clippy::too_many_arguments)]
pub fn run_selftrain(
    gold: Vec<Epoch>,
    eval_epochs: &[Epoch],
    unlabeled: Vec<Epoch>,
    params: &ModelParams,
    loop_cfg: &LoopConfig,
    policy_spec: &PolicySpec,
    feature_cfg: &FeatureConfig,
    out_dir: Option<&Path>,
) -> Result<RunOutput> {
    let fingerprint = feature_cfg.fingerprint();
    let pool = TrainingPool::from_gold(gold)?;
    let (models, baseline_report) =
        train_baseline(&pool, eval_epochs, params, &fingerprint, loop_cfg.seed)?;
    if let Some(out) = out_dir {
        write_iteration_dir(out, 0, &models, &baseline_report, None)?;
    }

    let policy = policy_spec.initial_policy(&pool.sizes());
    let mut state = SelfTrainState {
        models,
        pool,
        unlabeled,
        policy,
    };
    let mut reports = vec![baseline_report];
    let mut stop = StopReason::MaxIterations;

    for iteration in 1..=loop_cfg.max_iterations {
        if state.unlabeled.is_empty() {
            stop = StopReason::AllUnlabeledConsumed;
            break;
        }
        let previous = reports.last().expect("baseline report present").clone();
        let (report, artifacts) = run_iteration(
            &mut state,
            iteration,
            eval_epochs,
            params,
            loop_cfg.seed,
            &previous,
        )?;
        if let Some(out) = out_dir {
            write_iteration_dir(
                out,
                iteration,
                &state.models,
                &report,
                Some((&artifacts.decoded, &artifacts.selection)),
            )?;
        }
        let stalled = report.stalled;
        reports.push(report);
        if stalled {
            stop = StopReason::Stalled;
            break;
        }
        // Two consecutive accuracy drops beyond the guard end the run.
        if reports.len() >= 3 {
            let n = reports.len();
            let d = loop_cfg.accuracy_drop;
            let drop1 = reports[n - 2].accuracy - reports[n - 1].accuracy > d;
            let drop2 = reports[n - 3].accuracy - reports[n - 2].accuracy > d;
            if drop1 && drop2 {
                stop = StopReason::AccuracyDrop;
                break;
            }
        }
        if state.unlabeled.is_empty() {
            stop = StopReason::AllUnlabeledConsumed;
            break;
        }
    }

    // Final labels: accepted epochs keep their pseudo-label; the rest take
    // the final models' argmax.
    let mut final_labels: Vec<FinalLabel> = Vec::new();
    for c in LabelClass::ALL {
        for entry in state.pool.entries(c) {
            if let Provenance::Auto { iteration } = entry.provenance {
                let auto = entry.epoch.auto_label.expect("auto entries carry labels");
                final_labels.push(FinalLabel {
                    id: entry.epoch.id.clone(),
                    start: entry.epoch.start,
                    class: auto.class,
                    confidence: auto.confidence,
                    accepted_iteration: Some(iteration),
                });
            }
        }
    }
    if !state.unlabeled.is_empty() {
        for d in decode_epochs(&state.models, &state.unlabeled)? {
            final_labels.push(FinalLabel {
                id: d.id,
                start: d.start,
                class: d.class,
                confidence: d.confidence,
                accepted_iteration: None,
            });
        }
    }
    final_labels.sort_by(|a, b| a.id.cmp(&b.id));

    if let Some(out) = out_dir {
        let refs: Vec<&IterationReport> = reports.iter().collect();
        write_report_csv(&out.join("summary.csv"), &refs)?;
        write_final_labels(
            &out.join("final_labels.csv"),
            &final_labels,
            feature_cfg.epoch_duration,
        )?;
        let p = out.join("stop_reason.txt");
        fs::write(&p, format!("{}\n", stop.as_str())).map_err(|e| Error::io(&p, e))?;
    }

    Ok(RunOutput {
        reports,
        models: state.models,
        final_labels,
        stop,
    })
}

/// One row of a threshold sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub threshold: f64,
    pub selected: usize,
    pub sensitivity: f64,
    pub accuracy: f64,
}

/// Sweep selection cuts for one class: for every cut, pseudo-label the
/// selected epochs as `class`, retrain that class's model on gold plus the
/// selection, and score its eval sensitivity with the other five baseline
/// models unchanged.
///
/// `ranked` must be sorted descending by `kind`; cuts are in `kind` units.
#[allow(clippy::too_many_arguments)]
pub fn sweep_class(
    class: LabelClass,
    ranked: &[Decoded],
    cuts: &[f64],
    gold_pool: &TrainingPool,
    baseline: &ModelSet,
    unlabeled: &[Epoch],
    eval_epochs: &[Epoch],
    params: &ModelParams,
    kind: ScoreKind,
    root_seed: u64,
) -> Result<Vec<SweepRow>> {
    if cuts.is_empty() {
        return Err(Error::Usage("threshold sweep needs at least one value".into()));
    }
    let by_id: BTreeMap<&crate::features::EpochId, &Epoch> =
        unlabeled.iter().map(|e| (&e.id, e)).collect();
    let mut rows = Vec::with_capacity(cuts.len());
    for (i, &cut) in cuts.iter().enumerate() {
        let selection = crate::selector::select_threshold_by(ranked, cut, kind);
        let mut augmented = gold_pool.clone();
        for d in &selection.accepted {
            let epoch = (*by_id
                .get(&d.id)
                .ok_or_else(|| Error::Decode(format!("unknown epoch {}", d.id)))?)
            .clone();
            augmented.add_auto(epoch, class, d.confidence, 1)?;
        }
        let sweep_seed = derive_seed(root_seed, &format!("sweep/{i}"));
        let (retrained, _) = train_models(&augmented, params, &baseline.fingerprint, sweep_seed)?;
        let mut candidate = baseline.clone();
        candidate.models[class.index()] = retrained.models[class.index()].clone();
        let (matrix, _, acc) = evaluate(&candidate, eval_epochs)?;
        rows.push(SweepRow {
            threshold: cut,
            selected: selection.accepted.len(),
            sensitivity: crate::eval::sensitivity(&matrix, class)?,
            accuracy: acc,
        });
    }
    Ok(rows)
}

/// Segment, extract, and (for labeled roles) gold-label all epochs of a role.
pub fn epochs_for_role(
    corpus: &Corpus,
    role: Role,
    cfg: &FeatureConfig,
    min_overlap: f64,
) -> Result<Vec<Epoch>> {
    let mut all = Vec::new();
    for rec in corpus.with_role(role) {
        let mut epochs = segment_and_extract(&rec.record, cfg)?;
        if role != Role::Unlabeled {
            label_epochs(&mut epochs, &rec.spans, min_overlap, cfg)?;
        }
        all.extend(epochs);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{generate_synthetic, SynthSpec};

    fn small_world() -> (Vec<Epoch>, Vec<Epoch>, Vec<Epoch>, FeatureConfig) {
        let cfg = FeatureConfig::default();
        let mut spec = SynthSpec::default_spec();
        for c in &mut spec.classes {
            c.events = (c.events / 4).max(2);
        }
        spec.record_prefix = "g".into();
        spec.seed = 1;
        let gold_corpus = generate_synthetic(&spec, Role::GoldTrain).unwrap();
        let mut eval_spec = spec.clone();
        eval_spec.record_prefix = "e".into();
        eval_spec.seed = 2;
        let eval_corpus = generate_synthetic(&eval_spec, Role::Eval).unwrap();
        let mut unl_spec = spec.clone();
        unl_spec.record_prefix = "u".into();
        unl_spec.seed = 3;
        let unl_corpus = generate_synthetic(&unl_spec, Role::Unlabeled).unwrap();

        let gold = epochs_for_role(&gold_corpus, Role::GoldTrain, &cfg, 0.5).unwrap();
        let eval = epochs_for_role(&eval_corpus, Role::Eval, &cfg, 0.5).unwrap();
        let unlabeled = epochs_for_role(&unl_corpus, Role::Unlabeled, &cfg, 0.5).unwrap();
        (gold, eval, unlabeled, cfg)
    }

    fn small_params() -> ModelParams {
        ModelParams {
            states: 3,
            mixtures: 2,
            train: TrainOptions {
                max_iters: 5,
                tol: 1e-4,
            },
        }
    }

    #[test]
    fn baseline_report_shape_and_separability() {
        let (gold, eval, _, cfg) = small_world();
        let pool = TrainingPool::from_gold(gold).unwrap();
        let params = small_params();
        let (_, report) =
            train_baseline(&pool, &eval, &params, &cfg.fingerprint(), 7).unwrap();
        assert_eq!(report.iteration, 0);
        assert_eq!(report.sensitivity.len(), 6);
        assert!(report.accuracy > 0.5, "well-separated classes should beat 0.5, got {}", report.accuracy);
        assert!(report.sensitivity.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn report_csv_round_trips() {
        let report = IterationReport {
            iteration: 3,
            sensitivity: [0.5, 0.625, 0.75, 0.8125, 0.875, 0.9375],
            accuracy: 0.71875,
            selected: [10, 20, 30, 0, 0, 0],
            thresholds: [-0.5, -0.25, -0.125, f64::INFINITY, f64::INFINITY, f64::INFINITY],
            pool_sizes: [100, 200, 300, 400, 500, 600],
            train_log_likelihood: [0.0; 6],
            stalled: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("report.csv");
        write_report_csv(&p, &[&report]).unwrap();
        let loaded = read_report_csv(&p).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].sensitivity, report.sensitivity);
        assert_eq!(loaded[0].accuracy, report.accuracy);
        assert_eq!(loaded[0].thresholds, report.thresholds);
        assert_eq!(loaded[0].selected, report.selected);
        assert_eq!(loaded[0].pool_sizes, report.pool_sizes);
    }

    #[test]
    fn pool_rejects_duplicates_and_keeps_gold() {
        let (gold, _, _, _) = small_world();
        let first = gold[0].clone();
        let gold_len = gold.len();
        let mut pool = TrainingPool::from_gold(gold).unwrap();
        assert_eq!(pool.len(), gold_len);
        let gold_sizes = pool.gold_sizes();
        assert_eq!(gold_sizes, pool.sizes());
        // Re-adding a gold epoch as auto is rejected.
        assert!(pool
            .add_auto(first, LabelClass::Spsw, -0.1, 1)
            .is_err());
    }

    #[test]
    fn iteration_bookkeeping_conserves_epochs() {
        let (gold, eval, unlabeled, cfg) = small_world();
        let params = small_params();
        let loop_cfg = LoopConfig {
            max_iterations: 2,
            accuracy_drop: 0.02,
            seed: 11,
        };
        let spec = PolicySpec {
            scheme: SchemeSpec::Volume { growth_factor: 0.5 },
            include_background: false,
        };
        let total = gold.len() + unlabeled.len();
        let out = run_selftrain(
            gold,
            &eval,
            unlabeled,
            &params,
            &loop_cfg,
            &spec,
            &cfg,
            None,
        )
        .unwrap();
        assert!(out.reports.len() >= 2);
        for r in &out.reports[1..] {
            let pool_total: usize = r.pool_sizes.iter().sum();
            assert!(pool_total <= total);
        }
        // Every originally-unlabeled epoch got exactly one final label.
        let labeled: BTreeSet<_> = out.final_labels.iter().map(|l| l.id.clone()).collect();
        assert_eq!(labeled.len(), out.final_labels.len(), "no duplicate ids");
    }

    #[test]
    fn empty_unlabeled_stops_immediately() {
        let (gold, eval, _, cfg) = small_world();
        let params = small_params();
        let loop_cfg = LoopConfig {
            max_iterations: 1,
            accuracy_drop: 0.02,
            seed: 3,
        };
        let spec = PolicySpec {
            scheme: SchemeSpec::Volume { growth_factor: 0.5 },
            include_background: false,
        };
        let out = run_selftrain(
            gold,
            &eval,
            Vec::new(),
            &params,
            &loop_cfg,
            &spec,
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(out.reports.len(), 1, "baseline only");
        assert_eq!(out.stop, StopReason::AllUnlabeledConsumed);
        assert!(out.final_labels.is_empty());
    }

    #[test]
    fn stalled_iteration_changes_nothing() {
        let (gold, eval, unlabeled, cfg) = small_world();
        let params = small_params();
        let loop_cfg = LoopConfig {
            max_iterations: 3,
            accuracy_drop: 0.02,
            seed: 5,
        };
        // An impossible threshold selects nothing for any class.
        let spec = PolicySpec {
            scheme: SchemeSpec::Threshold {
                thresholds: [1.0; 6],
                score_kind: ScoreKind::Confidence,
            },
            include_background: true,
        };
        let out = run_selftrain(
            gold,
            &eval,
            unlabeled,
            &params,
            &loop_cfg,
            &spec,
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::Stalled);
        assert_eq!(out.reports.len(), 2, "baseline + one stalled iteration");
        let (r0, r1) = (&out.reports[0], &out.reports[1]);
        assert!(r1.stalled);
        assert_eq!(r0.accuracy, r1.accuracy);
        assert_eq!(r0.sensitivity, r1.sensitivity);
        assert_eq!(r0.pool_sizes, r1.pool_sizes);
    }

    #[test]
    fn deterministic_reports_under_same_seed() {
        let run = || {
            let (gold, eval, unlabeled, cfg) = small_world();
            let params = small_params();
            let loop_cfg = LoopConfig {
                max_iterations: 2,
                accuracy_drop: 0.02,
                seed: 21,
            };
            let spec = PolicySpec {
                scheme: SchemeSpec::Volume { growth_factor: 0.5 },
                include_background: false,
            };
            run_selftrain(
                gold,
                &eval,
                unlabeled,
                &params,
                &loop_cfg,
                &spec,
                &cfg,
                None,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.reports, b.reports);
        assert_eq!(a.stop, b.stop);
        for (x, y) in a.models.models.iter().zip(&b.models.models) {
            assert_eq!(x, y, "trained parameters are bit-identical");
        }
    }
}
