//! Scoring, randomized trials and worst-case aggregation.
//!
//! A trial draws two disjoint pixel sets and runs both folds of a 2-fold
//! cross-validation: each set trains once and tests once. Every fold senses
//! its pixels with a freshly generated pool (one matrix for FCA), trains the
//! bias-pool classifier, scores the test set with min(TPR, TNR) and compares
//! the learned direction with the full-spectrum classifier of the same fold.

pub mod render;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::{self, tag};
use crate::sensing::{self, MeasurementKind, MeasurementPool};
use crate::sketchsvm::{self, LossConfig};
use crate::solver::SolverConfig;
use crate::specdata::{Label, LabeledDataset, MulticlassDataset, SplitBalance};

/// Number of histogram bins on `[0, 1]`.
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// One fixed matrix for all pixels.
    Fca,
    /// A pool of `k` matrices drawn per pixel.
    Dmd,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Fca => "FCA",
            Scheme::Dmd => "DMD",
        }
    }

    fn code(self) -> u64 {
        match self {
            Scheme::Fca => 1,
            Scheme::Dmd => 2,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fca" => Ok(Scheme::Fca),
            "dmd" => Ok(Scheme::Dmd),
            other => Err(format!("unknown scheme '{other}' (fca|dmd)")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (p, l) in predictions.iter().zip(labels) {
            match (l, p) {
                (Label::Positive, Label::Positive) => c.tp += 1,
                (Label::Positive, Label::Negative) => c.fn_ += 1,
                (Label::Negative, Label::Negative) => c.tn += 1,
                (Label::Negative, Label::Positive) => c.fp += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `min(tp/(tp+fn), tn/(tn+fp))`; undefined when a class is absent.
    pub fn min_rate(&self) -> Result<f64> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        if pos == 0 || neg == 0 {
            return Err(Error::InsufficientSamples(
                "min-rate accuracy needs both classes in the labels".into(),
            ));
        }
        Ok((self.tp as f64 / pos as f64).min(self.tn as f64 / neg as f64))
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Minimum of sensitivity and specificity.
pub fn accuracy_min_rates(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    ConfusionCounts::from_predictions(predictions, labels)?.min_rate()
}

/// `⟨a, b⟩ / (‖a‖‖b‖)`.
pub fn cosine_recovery(w_hat: &[f64], w_star: &[f64]) -> Result<f64> {
    if w_hat.len() != w_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "cosine of vectors of length {} and {}",
            w_hat.len(),
            w_star.len()
        )));
    }
    let na2 = w_hat.iter().map(|v| v * v).sum::<f64>();
    let nb2 = w_star.iter().map(|v| v * v).sum::<f64>();
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::InvalidArgument("cosine of a zero vector".into()));
    }
    // sqrt(fl(a²)) == a, so C(w, ±w) is exactly ±1
    let c = w_hat.iter().zip(w_star).map(|(a, b)| a * b).sum::<f64>() / (na2 * nb2).sqrt();
    Ok(c.clamp(-1.0, 1.0))
}

/// Everything a trial needs besides the data and its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub d_prime: usize,
    /// DMD pool size; FCA always uses one matrix.
    pub k: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub balance: SplitBalance,
    pub kind: MeasurementKind,
    pub loss: LossConfig,
    /// Loss settings of the full-spectrum reference classifier.
    pub loss_ground_truth: LossConfig,
    pub solver: SolverConfig,
}

impl TrialConfig {
    pub fn pool_size(&self, scheme: Scheme) -> usize {
        match scheme {
            Scheme::Fca => 1,
            Scheme::Dmd => self.k,
        }
    }
}

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord {
    pub pool_seed: u64,
    pub train_assign_seed: u64,
    pub test_assign_seed: u64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub recovery: f64,
    pub ground_truth_counts: ConfusionCounts,
    pub ground_truth_accuracy: f64,
    /// Both the sketched and the reference fit met the gradient tolerance.
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub trial_seed: u64,
    pub scheme: Scheme,
    pub d_prime: usize,
    pub k: usize,
    pub folds: Vec<FoldRecord>,
}

impl TrialRecord {
    pub fn fold_accuracies(&self) -> impl Iterator<Item = f64> + '_ {
        self.folds.iter().map(|f| f.accuracy)
    }

    pub fn mean_of_folds(&self) -> f64 {
        self.fold_accuracies().sum::<f64>() / self.folds.len() as f64
    }

    pub fn worst_fold(&self) -> f64 {
        self.fold_accuracies().fold(f64::INFINITY, f64::min)
    }

    /// Min-rate accuracy of all folds' test predictions taken together.
    pub fn pooled(&self) -> f64 {
        let c = self
            .folds
            .iter()
            .fold(ConfusionCounts::default(), |acc, f| acc + f.counts);
        c.min_rate().unwrap_or(f64::NAN)
    }

    /// Mean of the folds' cosine recoveries.
    pub fn recovery(&self) -> f64 {
        self.folds.iter().map(|f| f.recovery).sum::<f64>() / self.folds.len() as f64
    }

    pub fn converged(&self) -> bool {
        self.folds.iter().all(|f| f.converged)
    }
}

fn fold_seed(trial_seed: u64, fold: usize, scheme: Scheme) -> u64 {
    seed::derive(
        seed::derive(seed::derive(trial_seed, tag::FOLD), fold as u64),
        tag::SCHEME ^ (scheme.code() << 8),
    )
}

/// Seed of trial `index` under `master_seed`.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    seed::derive(seed::derive(master_seed, tag::TRIAL), index as u64)
}

/// Pool and classifier of one fold, for dumping alongside the records.
#[derive(Debug, Clone)]
pub struct FoldArtifacts {
    pub pool: Arc<MeasurementPool>,
    pub classifier: sketchsvm::SketchedClassifier,
}

fn run_fold(
    data: &LabeledDataset,
    scheme: Scheme,
    cfg: &TrialConfig,
    trial_seed: u64,
    fold: usize,
) -> Result<(FoldRecord, FoldArtifacts)> {
    let split = crate::specdata::make_split_with(
        data,
        cfg.n_train,
        cfg.n_test,
        seed::derive(trial_seed, tag::SPLIT),
        cfg.balance,
    )?;
    let plan = if fold == 0 { split } else { split.swapped() };
    let k = cfg.pool_size(scheme);
    let base = fold_seed(trial_seed, fold, scheme);
    let pool_seed = seed::derive(base, tag::POOL);
    let train_assign_seed = seed::derive(base, tag::TRAIN_ASSIGN);
    let test_assign_seed = seed::derive(base, tag::TEST_ASSIGN);

    let train = data.subset(&plan.train_indices);
    let test = data.subset(&plan.test_indices);
    let pool = Arc::new(sensing::gen_pool_with(
        cfg.kind,
        k,
        cfg.d_prime,
        data.bands(),
        pool_seed,
    )?);
    let train_c = sensing::sense(
        &train,
        Arc::clone(&pool),
        &sensing::assign(train.len(), k, train_assign_seed)?,
    )?;
    let test_c = sensing::sense(
        &test,
        Arc::clone(&pool),
        &sensing::assign(test.len(), k, test_assign_seed)?,
    )?;

    let sketched = sketchsvm::train_sketched(&train_c, &cfg.loss, &cfg.solver)?;
    let counts =
        ConfusionCounts::from_predictions(&sketched.model.predict_all(&test_c)?, test.labels())?;
    let reference = sketchsvm::train_ground_truth(&train, &cfg.loss_ground_truth, &cfg.solver)?;
    let gt_counts =
        ConfusionCounts::from_predictions(&reference.model.predict_all(&test), test.labels())?;

    let record = FoldRecord {
        pool_seed,
        train_assign_seed,
        test_assign_seed,
        accuracy: counts.min_rate()?,
        counts,
        recovery: cosine_recovery(&sketched.model.w, &reference.model.w)?,
        ground_truth_accuracy: gt_counts.min_rate()?,
        ground_truth_counts: gt_counts,
        converged: sketched.report.converged && reference.report.converged,
        iterations: sketched.report.iterations,
    };
    Ok((
        record,
        FoldArtifacts {
            pool,
            classifier: sketched.model,
        },
    ))
}

/// Runs both folds of one trial.
pub fn run_trial(
    data: &LabeledDataset,
    scheme: Scheme,
    cfg: &TrialConfig,
    trial_index: usize,
    trial_seed: u64,
) -> Result<TrialRecord> {
    let folds = (0..2)
        .map(|f| run_fold(data, scheme, cfg, trial_seed, f).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRecord {
        trial_index,
        trial_seed,
        scheme,
        d_prime: cfg.d_prime,
        k: cfg.pool_size(scheme),
        folds,
    })
}

/// Regenerates the pool and classifier of one fold of a trial.
pub fn fold_artifacts(
    data: &LabeledDataset,
    scheme: Scheme,
    cfg: &TrialConfig,
    trial_seed: u64,
    fold: usize,
) -> Result<FoldArtifacts> {
    run_fold(data, scheme, cfg, trial_seed, fold).map(|(_, a)| a)
}

/// Fold accuracies binned uniformly on `[0, 1]`; 1.0 lands in the last bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = vec![0; HISTOGRAM_BINS];
        for v in values {
            let bin = ((v * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        Histogram { counts }
    }

    pub fn bin_left(i: usize) -> f64 {
        i as f64 / HISTOGRAM_BINS as f64
    }

    pub fn mass(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; 0 for a single value.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

fn min(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::INFINITY, f64::min)
}

/// Aggregate of one scheme over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub d_prime: usize,
    pub k: usize,
    pub trials: usize,
    /// Minimum over trials and folds.
    pub worst_case_accuracy: f64,
    /// Mean over all fold accuracies.
    pub mean_accuracy: f64,
    pub accuracy_variance: f64,
    /// Minimum over trials of the per-trial mean of folds.
    pub worst_case_mean_of_folds: f64,
    pub mean_of_folds_variance: f64,
    /// Minimum over trials of the pooled-prediction accuracy.
    pub worst_case_pooled: f64,
    pub mean_recovery: f64,
    pub histogram: Histogram,
    pub ground_truth_mean_accuracy: f64,
    pub ground_truth_worst_accuracy: f64,
    pub non_converged: usize,
}

impl SchemeSummary {
    /// `records` must all belong to one scheme.
    pub fn from_records(records: &[TrialRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidArgument("no trial records to summarize".into()))?;
        if records.iter().any(|r| r.scheme != first.scheme) {
            return Err(Error::InvalidArgument("records mix schemes".into()));
        }
        let fold_acc: Vec<f64> = records.iter().flat_map(|r| r.fold_accuracies()).collect();
        let mof: Vec<f64> = records.iter().map(TrialRecord::mean_of_folds).collect();
        let gt: Vec<f64> = records
            .iter()
            .flat_map(|r| r.folds.iter().map(|f| f.ground_truth_accuracy))
            .collect();
        Ok(SchemeSummary {
            scheme: first.scheme,
            d_prime: first.d_prime,
            k: first.k,
            trials: records.len(),
            worst_case_accuracy: min(fold_acc.iter().copied()),
            mean_accuracy: mean(&fold_acc),
            accuracy_variance: sample_variance(&fold_acc),
            worst_case_mean_of_folds: min(mof.iter().copied()),
            mean_of_folds_variance: sample_variance(&mof),
            worst_case_pooled: min(records.iter().map(TrialRecord::pooled)),
            mean_recovery: mean(&records.iter().map(TrialRecord::recovery).collect::<Vec<_>>()),
            histogram: Histogram::new(fold_acc.iter().copied()),
            ground_truth_mean_accuracy: mean(&gt),
            ground_truth_worst_accuracy: min(gt.iter().copied()),
            non_converged: records.iter().filter(|r| !r.converged()).count(),
        })
    }

    /// Running worst case (min over folds) after each trial.
    pub fn running_worst_case(records: &[TrialRecord]) -> Vec<f64> {
        records
            .iter()
            .scan(f64::INFINITY, |acc, r| {
                *acc = acc.min(r.worst_fold());
                Some(*acc)
            })
            .collect()
    }
}

/// Class identity of a binary experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInfo {
    pub positive_id: i32,
    pub positive_name: String,
    pub negative_id: i32,
    pub negative_name: String,
}

impl PairInfo {
    pub fn of(data: &LabeledDataset) -> Self {
        match &data.classes {
            Some(c) => PairInfo {
                positive_id: c.positive_id,
                positive_name: c.positive_name.clone(),
                negative_id: c.negative_id,
                negative_name: c.negative_name.clone(),
            },
            None => PairInfo {
                positive_id: 1,
                positive_name: "positive".into(),
                negative_id: -1,
                negative_name: "negative".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub pair: PairInfo,
    pub trial_count: usize,
    pub schemes: Vec<SchemeSummary>,
    /// Per-scheme records in trial order, parallel to `schemes`.
    pub records: Vec<Vec<TrialRecord>>,
}

impl ExperimentReport {
    pub fn from_records(pair: PairInfo, records: Vec<Vec<TrialRecord>>) -> Result<Self> {
        let schemes = records
            .iter()
            .map(|r| SchemeSummary::from_records(r))
            .collect::<Result<Vec<_>>>()?;
        let trial_count = schemes.first().map_or(0, |s| s.trials);
        Ok(ExperimentReport {
            pair,
            trial_count,
            schemes,
            records,
        })
    }

    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }

    pub fn scheme_records(&self, scheme: Scheme) -> Option<&[TrialRecord]> {
        self.schemes
            .iter()
            .position(|s| s.scheme == scheme)
            .map(|i| self.records[i].as_slice())
    }

    pub fn non_converged(&self) -> usize {
        self.schemes.iter().map(|s| s.non_converged).sum()
    }
}

/// Runs `trials` trials of every scheme in parallel on the current rayon
/// pool. Output does not depend on the number of worker threads.
pub fn run_experiment(
    data: &LabeledDataset,
    schemes: &[Scheme],
    cfg: &TrialConfig,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if schemes.is_empty() {
        return Err(Error::InvalidArgument("no schemes selected".into()));
    }
    let records = schemes
        .iter()
        .map(|&scheme| {
            (0..trials)
                .into_par_iter()
                .map(|i| run_trial(data, scheme, cfg, i, trial_seed(master_seed, i)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::from_records(PairInfo::of(data), records)
}

/// Seed of the experiment for class pair `(a, b)`.
pub fn pair_seed(master_seed: u64, a: i32, b: i32) -> u64 {
    let key = ((a as u32 as u64) << 32) | b as u32 as u64;
    seed::derive(seed::derive(master_seed, tag::PAIR), key)
}

/// One-against-one sweep over every class pair `(classes[i], classes[j])`,
/// `i < j`, in row-major upper-triangular order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub classes: Vec<(i32, String)>,
    pub entries: Vec<ExperimentReport>,
}

impl SweepReport {
    pub fn entry(&self, a: i32, b: i32) -> Option<&ExperimentReport> {
        self.entries
            .iter()
            .find(|e| e.pair.positive_id == a && e.pair.negative_id == b)
    }
}

pub fn class_pairs(classes: &[i32]) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for (i, &a) in classes.iter().enumerate() {
        for &b in &classes[i + 1..] {
            out.push((a, b));
        }
    }
    out
}

pub fn pairwise_sweep(
    data: &MulticlassDataset,
    classes: &[i32],
    schemes: &[Scheme],
    cfg: &TrialConfig,
    trials: usize,
    master_seed: u64,
) -> Result<SweepReport> {
    if classes.len() < 2 {
        return Err(Error::InvalidPair("sweep needs at least two classes".into()));
    }
    let entries = class_pairs(classes)
        .into_iter()
        .map(|(a, b)| {
            let pair = data.extract_pair(a, b)?;
            run_experiment(&pair, schemes, cfg, trials, pair_seed(master_seed, a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let classes = classes
        .iter()
        .map(|&c| (c, data.class_name(c).map_or_else(|| c.to_string(), str::to_owned)))
        .collect();
    Ok(SweepReport { classes, entries })
}
