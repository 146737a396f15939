//! Multi-class boosting with the softmax negative log-likelihood.
//!
//! One trainer covers four algorithms through two switches:
//!
//! | algorithm   | split criterion         | class handling                 |
//! |-------------|-------------------------|--------------------------------|
//! | `mart`      | unit weights            | K trees per iteration          |
//! | `logit`     | weights `p(1 − p)`      | K trees per iteration          |
//! | `abc-mart`  | unit weights            | K − 1 trees + chosen base class|
//! | `abc-logit` | sum-to-zero Hessian     | K − 1 trees + chosen base class|
//!
//! Leaf values are always the Newton step `Σg / Σh`, scaled by `(K − 1)/K`
//! for the plain variants.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{build_sorted_index, Dataset, FeatureColumnIndex};
use crate::error::{Error, Result};
use crate::eval::{MetricLog, MetricRow};
use crate::tree::{build_tree, leaf_value, LeafRegion, RegressionTree, WorkingSample};

/// Training-loss threshold per sample used when no early-stop loss is set.
pub const DEFAULT_EARLY_STOP_PER_SAMPLE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Mart,
    Logit,
    AbcMart,
    AbcLogit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// First-order split: unit weights.
    Mart,
    /// Second-order split: Hessian weights.
    Logit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Mart,
        Algorithm::AbcMart,
        Algorithm::Logit,
        Algorithm::AbcLogit,
    ];

    pub fn criterion(self) -> Criterion {
        match self {
            Algorithm::Mart | Algorithm::AbcMart => Criterion::Mart,
            Algorithm::Logit | Algorithm::AbcLogit => Criterion::Logit,
        }
    }

    pub fn is_abc(self) -> bool {
        matches!(self, Algorithm::AbcMart | Algorithm::AbcLogit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Mart => "mart",
            Algorithm::Logit => "logit",
            Algorithm::AbcMart => "abc-mart",
            Algorithm::AbcLogit => "abc-logit",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mart" => Ok(Algorithm::Mart),
            "logit" | "logitboost" => Ok(Algorithm::Logit),
            "abc-mart" => Ok(Algorithm::AbcMart),
            "abc-logit" | "abc-logitboost" => Ok(Algorithm::AbcLogit),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm `{other}` (expected mart, logit, abc-mart or abc-logit)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Terminal nodes per tree (J).
    pub max_leaves: usize,
    /// Shrinkage (ν).
    pub shrinkage: f64,
    /// Maximum boosting iterations (M).
    pub iterations: usize,
    /// Stop once the training loss drops below this; `None` means
    /// `DEFAULT_EARLY_STOP_PER_SAMPLE * N`.
    pub early_stop_loss: Option<f64>,
    pub min_leaf: usize,
    /// Log a metric row every this many iterations (and at the last one).
    pub eval_stride: usize,
    /// Recorded for reproducibility; training itself draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::AbcLogit,
            max_leaves: 20,
            shrinkage: 0.1,
            iterations: 10_000,
            early_stop_loss: None,
            min_leaf: 1,
            eval_stride: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, max_leaves: usize, shrinkage: f64, iterations: usize) -> Self {
        TrainConfig {
            algorithm,
            max_leaves,
            shrinkage,
            iterations,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_leaves < 2 {
            return Err(Error::InvalidConfig(format!(
                "tree size must be at least 2, got {}",
                self.max_leaves
            )));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrinkage must lie in (0, 1], got {}",
                self.shrinkage
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.min_leaf < 1 {
            return Err(Error::InvalidConfig("min-leaf must be at least 1".into()));
        }
        if self.eval_stride < 1 {
            return Err(Error::InvalidConfig("eval stride must be at least 1".into()));
        }
        if let Some(e) = self.early_stop_loss {
            if !(e >= 0.0) {
                return Err(Error::InvalidConfig(format!("early-stop loss must be >= 0, got {e}")));
            }
        }
        Ok(())
    }
}

/// Writes the softmax of `scores` into `out`, shifting by the maximum.
pub fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &f) in out.iter_mut().zip(scores) {
        *o = (f - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax_row(scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    softmax_into(scores, &mut out);
    out
}

/// Negative log-likelihood `Σ_i −ln p[i, y_i]` of a row-major probability matrix.
pub fn total_loss(probs: &[f64], n_classes: usize, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs[i * n_classes + y].ln())
        .sum()
}

/// Negative gradient `r − p` and Hessian `p(1 − p)` of the loss in one score.
#[inline]
pub fn grads_plain(r: f64, p: f64) -> (f64, f64) {
    (r - p, p * (1.0 - p))
}

/// Negative gradient and diagonal Hessian of the loss in score `k` when
/// class `b` is the base class under the sum-to-zero constraint.
#[inline]
pub fn grads_abc(r_b: f64, p_b: f64, r_k: f64, p_k: f64) -> (f64, f64) {
    let g = (r_k - p_k) - (r_b - p_b);
    let h = p_b * (1.0 - p_b) + p_k * (1.0 - p_k) + 2.0 * p_b * p_k;
    (g, h)
}

#[inline]
fn indicator(y: usize, k: usize) -> f64 {
    if y == k {
        1.0
    } else {
        0.0
    }
}

/// Mutable training state: scores `F`, probabilities `P` (both row-major
/// N × K), completed iterations and the current training loss.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostState {
    n_samples: usize,
    n_classes: usize,
    scores: Vec<f64>,
    probs: Vec<f64>,
    iteration: usize,
    loss: f64,
}

impl BoostState {
    /// All scores zero, all probabilities `1/K`.
    pub fn new(labels: &[usize], n_classes: usize) -> Self {
        let n = labels.len();
        let probs = vec![1.0 / n_classes as f64; n * n_classes];
        let loss = total_loss(&probs, n_classes, labels);
        BoostState {
            n_samples: n,
            n_classes,
            scores: vec![0.0; n * n_classes],
            probs,
            iteration: 0,
            loss,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn score_row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn prob_row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    fn refresh(&mut self, labels: &[usize]) {
        let k = self.n_classes;
        for (f, p) in self.scores.chunks_exact(k).zip(self.probs.chunks_exact_mut(k)) {
            softmax_into(f, p);
        }
        self.loss = total_loss(&self.probs, k, labels);
    }

    /// Number of training samples whose argmax class differs from the label.
    pub fn training_errors(&self, labels: &[usize]) -> usize {
        labels
            .iter()
            .enumerate()
            .filter(|&(i, &y)| argmax(self.score_row(i)) != y)
            .count()
    }
}

/// Index of the largest entry, smallest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

fn fit_tree(
    dataset: &Dataset,
    index: &FeatureColumnIndex,
    grads: &[(f64, f64)],
    criterion: Criterion,
    config: &TrainConfig,
    scale: f64,
) -> (RegressionTree, Vec<LeafRegion>) {
    let samples: Vec<WorkingSample> = grads
        .iter()
        .map(|&(g, h)| match criterion {
            Criterion::Mart => WorkingSample::new(g, 1.0),
            Criterion::Logit => WorkingSample::new(g, h),
        })
        .collect();
    let grown = build_tree(dataset, index, &samples, config.max_leaves, config.min_leaf);
    grown.assign(|region| match criterion {
        Criterion::Logit => leaf_value(region.sum_zw, region.sum_w, scale),
        Criterion::Mart => {
            let (sg, sh) = region.samples.iter().fold((0.0, 0.0), |(a, b), &i| {
                let (g, h) = grads[i as usize];
                (a + g, b + h)
            });
            leaf_value(sg, sh, scale)
        }
    })
}

/// One plain (mart / logit) iteration: a tree per class on the responses
/// `r − p`, leaf values scaled by `(K − 1)/K`, then `F += ν·β`.
/// Returns the K new trees in class order.
pub fn iterate_plain(
    state: &mut BoostState,
    dataset: &Dataset,
    index: &FeatureColumnIndex,
    config: &TrainConfig,
    criterion: Criterion,
) -> Vec<RegressionTree> {
    let n = state.n_samples;
    let k_classes = state.n_classes;
    let labels = dataset.labels();
    let scale = (k_classes as f64 - 1.0) / k_classes as f64;

    let fits: Vec<(RegressionTree, Vec<LeafRegion>)> = (0..k_classes)
        .into_par_iter()
        .map(|k| {
            let grads: Vec<(f64, f64)> = (0..n)
                .map(|i| grads_plain(indicator(labels[i], k), state.probs[i * k_classes + k]))
                .collect();
            fit_tree(dataset, index, &grads, criterion, config, scale)
        })
        .collect();

    let nu = config.shrinkage;
    let mut trees = Vec::with_capacity(k_classes);
    for (k, (tree, regions)) in fits.into_iter().enumerate() {
        for region in &regions {
            let step = nu * tree_leaf(&tree, region.node);
            for &i in &region.samples {
                state.scores[i as usize * k_classes + k] += step;
            }
        }
        trees.push(tree);
    }
    state.refresh(labels);
    state.iteration += 1;
    trees
}

fn tree_leaf(tree: &RegressionTree, node: usize) -> f64 {
    match tree.nodes()[node] {
        crate::tree::Node::Leaf { value } => value,
        crate::tree::Node::Split { .. } => unreachable!("region points at a split node"),
    }
}

/// Outcome of one adaptive-base-class iteration.
#[derive(Clone, Debug)]
pub struct AbcStep {
    pub base: usize,
    /// `(class, tree)` for every class except `base`, in class order.
    pub trees: Vec<(usize, RegressionTree)>,
    /// Training loss of every candidate base class.
    pub candidate_losses: Vec<f64>,
}

/// Per-sample leaf values of one fitted pair tree.
struct PairFit {
    tree: RegressionTree,
    values: Vec<f64>,
}

/// One adaptive-base-class iteration with exhaustive search over the base.
///
/// For a candidate base `b` and class `k` the response is
/// `(r_k − p_k) − (r_b − p_b)` with weight
/// `p_b(1 − p_b) + p_k(1 − p_k) + 2 p_b p_k`. Swapping `b` and `k` negates
/// the response and keeps the weight, so the tree for `(k, b)` is the tree
/// for `(b, k)` with negated leaves; only `K(K − 1)/2` trees are grown.
pub fn iterate_abc(
    state: &mut BoostState,
    dataset: &Dataset,
    index: &FeatureColumnIndex,
    config: &TrainConfig,
    criterion: Criterion,
) -> AbcStep {
    let n = state.n_samples;
    let kc = state.n_classes;
    let labels = dataset.labels();
    let nu = config.shrinkage;

    let pairs: Vec<(usize, usize)> = (0..kc).flat_map(|b| (b + 1..kc).map(move |k| (b, k))).collect();
    let fits: Vec<PairFit> = pairs
        .par_iter()
        .map(|&(b, k)| {
            let grads: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    let y = labels[i];
                    let p = &state.probs[i * kc..(i + 1) * kc];
                    grads_abc(indicator(y, b), p[b], indicator(y, k), p[k])
                })
                .collect();
            let (tree, regions) = fit_tree(dataset, index, &grads, criterion, config, 1.0);
            let mut values = vec![0.0; n];
            for region in &regions {
                let v = tree_leaf(&tree, region.node);
                for &i in &region.samples {
                    values[i as usize] = v;
                }
            }
            PairFit { tree, values }
        })
        .collect();

    let pair_slot = |b: usize, k: usize| -> (usize, f64) {
        let (lo, hi, sign) = if b < k { (b, k, 1.0) } else { (k, b, -1.0) };
        // offset of (lo, hi) in the row-major upper triangle
        let slot = lo * kc - lo * (lo + 1) / 2 + (hi - lo - 1);
        (slot, sign)
    };

    let candidate_losses: Vec<f64> = (0..kc)
        .into_par_iter()
        .map(|b| {
            let mut g = vec![0.0; kc];
            let mut q = vec![0.0; kc];
            let mut loss = 0.0;
            for i in 0..n {
                candidate_row(state.score_row(i), b, i, nu, &fits, &pair_slot, &mut g);
                softmax_into(&g, &mut q);
                loss += -q[labels[i]].ln();
            }
            loss
        })
        .collect();

    let mut base = 0;
    for b in 1..kc {
        if candidate_losses[b] < candidate_losses[base] {
            base = b;
        }
    }

    let mut g = vec![0.0; kc];
    for i in 0..n {
        candidate_row(state.score_row(i), base, i, nu, &fits, &pair_slot, &mut g);
        state.scores[i * kc..(i + 1) * kc].copy_from_slice(&g);
    }
    state.refresh(labels);
    state.iteration += 1;

    let trees = (0..kc)
        .filter(|&k| k != base)
        .map(|k| {
            let (slot, sign) = pair_slot(base, k);
            let tree = if sign > 0.0 {
                fits[slot].tree.clone()
            } else {
                fits[slot].tree.negated()
            };
            (k, tree)
        })
        .collect();

    AbcStep {
        base,
        trees,
        candidate_losses,
    }
}

/// Candidate scores of sample `i` for base `b`: `F_k + ν·β_k` for `k ≠ b`
/// and minus their sum for `b`.
#[inline]
fn candidate_row(
    f: &[f64],
    b: usize,
    i: usize,
    nu: f64,
    fits: &[PairFit],
    pair_slot: &impl Fn(usize, usize) -> (usize, f64),
    out: &mut [f64],
) {
    let mut sum = 0.0;
    for k in 0..f.len() {
        if k == b {
            continue;
        }
        let (slot, sign) = pair_slot(b, k);
        let v = f[k] + nu * (sign * fits[slot].values[i]);
        out[k] = v;
        sum += v;
    }
    out[b] = -sum;
}

/// Trees of one boosting iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    /// Base class of an adaptive-base-class iteration.
    pub base: Option<usize>,
    /// `(class, tree)` pairs in class order.
    pub trees: Vec<(usize, RegressionTree)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostModel {
    pub algorithm: Algorithm,
    pub n_classes: usize,
    pub shrinkage: f64,
    pub n_features: usize,
    pub label_names: Vec<String>,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub label: usize,
}

impl BoostModel {
    pub fn new(algorithm: Algorithm, shrinkage: f64, n_features: usize, label_names: Vec<String>) -> Self {
        BoostModel {
            algorithm,
            n_classes: label_names.len(),
            shrinkage,
            n_features,
            label_names,
            stages: Vec::new(),
        }
    }

    pub fn n_iterations(&self) -> usize {
        self.stages.len()
    }

    /// Checks the per-stage tree layout against the algorithm tag.
    pub fn validate(&self) -> Result<()> {
        let kc = self.n_classes;
        if kc < 2 || self.label_names.len() != kc {
            return Err(Error::InvalidArgument(format!("bad class count {kc}")));
        }
        for (m, stage) in self.stages.iter().enumerate() {
            let expected: Vec<usize> = match (self.algorithm.is_abc(), stage.base) {
                (false, None) => (0..kc).collect(),
                (true, Some(b)) if b < kc => (0..kc).filter(|&k| k != b).collect(),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "iteration {} has a base class inconsistent with {}",
                        m + 1,
                        self.algorithm
                    )))
                }
            };
            let classes: Vec<usize> = stage.trees.iter().map(|t| t.0).collect();
            if classes != expected {
                return Err(Error::InvalidArgument(format!(
                    "iteration {} has trees for classes {classes:?}, expected {expected:?}",
                    m + 1
                )));
            }
            for (_, tree) in &stage.trees {
                if tree.max_feature().is_some_and(|f| f >= self.n_features) {
                    return Err(Error::InvalidArgument(format!(
                        "iteration {} splits on a feature beyond dimension {}",
                        m + 1,
                        self.n_features
                    )));
                }
            }
        }
        Ok(())
    }

    /// Adds one stage's contribution to `scores`.
    #[inline]
    fn apply_stage(&self, stage: &Stage, get: impl Fn(usize) -> f64 + Copy, scores: &mut [f64]) {
        let nu = self.shrinkage;
        match stage.base {
            None => {
                for (k, tree) in &stage.trees {
                    scores[*k] += nu * tree.predict_with(get);
                }
            }
            Some(b) => {
                let mut sum = 0.0;
                for (k, tree) in &stage.trees {
                    scores[*k] += nu * tree.predict_with(get);
                    sum += scores[*k];
                }
                scores[b] = -sum;
            }
        }
    }

    /// Raw class scores for a sample whose feature `d` is `get(d)`.
    pub fn scores_with(&self, get: impl Fn(usize) -> f64 + Copy) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_classes];
        for stage in &self.stages {
            self.apply_stage(stage, get, &mut scores);
        }
        scores
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.prediction_from_scores(self.scores_with(|d| x[d])))
    }

    fn prediction_from_scores(&self, scores: Vec<f64>) -> Prediction {
        let probabilities = softmax_row(&scores);
        let label = argmax(&scores);
        Prediction {
            scores,
            probabilities,
            label,
        }
    }

    /// Predictions for every sample of a dataset.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Prediction>> {
        if data.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: data.n_features(),
            });
        }
        Ok((0..data.n_samples())
            .into_par_iter()
            .map(|i| self.prediction_from_scores(self.scores_with(|d| data.value(i, d))))
            .collect())
    }
}

/// Free-function form of [`BoostModel::predict`].
pub fn predict_model(model: &BoostModel, x: &[f64]) -> Result<Prediction> {
    model.predict(x)
}

/// What happened in one call to [`Trainer::step`].
#[derive(Clone, Debug)]
pub struct IterationReport {
    pub iteration: usize,
    pub train_loss: f64,
    pub base: Option<usize>,
    pub candidate_losses: Vec<f64>,
    pub test_errors: Option<usize>,
}

/// Incrementally maintained test-set scores.
struct TestTracker<'a> {
    data: &'a Dataset,
    scores: Vec<f64>,
}

impl TestTracker<'_> {
    fn apply(&mut self, model: &BoostModel, stage: &Stage) {
        let kc = model.n_classes;
        let data = self.data;
        self.scores
            .par_chunks_exact_mut(kc)
            .enumerate()
            .for_each(|(i, row)| model.apply_stage(stage, |d| data.value(i, d), row));
    }

    fn errors(&self, kc: usize) -> usize {
        self.scores
            .chunks_exact(kc)
            .zip(self.data.labels())
            .filter(|(row, &y)| argmax(row) != y)
            .count()
    }
}

/// Step-wise trainer; [`train`] drives it to completion.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    index: FeatureColumnIndex,
    config: TrainConfig,
    state: BoostState,
    model: BoostModel,
    test: Option<TestTracker<'a>>,
    log: MetricLog,
    started: Instant,
    stop_loss: f64,
}

impl<'a> Trainer<'a> {
    pub fn new(dataset: &'a Dataset, test: Option<&'a Dataset>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if let Some(t) = test {
            if t.n_features() != dataset.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: dataset.n_features(),
                    actual: t.n_features(),
                });
            }
            if t.label_names() != dataset.label_names() {
                return Err(Error::LabelMismatch);
            }
        }
        let kc = dataset.n_classes();
        let stop_loss = config
            .early_stop_loss
            .unwrap_or(DEFAULT_EARLY_STOP_PER_SAMPLE * dataset.n_samples() as f64);
        Ok(Trainer {
            dataset,
            index: build_sorted_index(dataset),
            state: BoostState::new(dataset.labels(), kc),
            model: BoostModel::new(
                config.algorithm,
                config.shrinkage,
                dataset.n_features(),
                dataset.label_names().to_vec(),
            ),
            test: test.map(|data| TestTracker {
                data,
                scores: vec![0.0; data.n_samples() * kc],
            }),
            log: MetricLog::default(),
            started: Instant::now(),
            stop_loss,
            config,
        })
    }

    pub fn state(&self) -> &BoostState {
        &self.state
    }

    pub fn model(&self) -> &BoostModel {
        &self.model
    }

    pub fn log(&self) -> &MetricLog {
        &self.log
    }

    /// True once the iteration budget is spent or the loss is below the
    /// early-stop threshold.
    pub fn finished(&self) -> bool {
        self.state.iteration >= self.config.iterations || self.state.loss < self.stop_loss
    }

    /// Runs one boosting iteration.
    pub fn step(&mut self) -> IterationReport {
        let criterion = self.config.algorithm.criterion();
        let (stage, candidate_losses) = if self.config.algorithm.is_abc() {
            let step = iterate_abc(&mut self.state, self.dataset, &self.index, &self.config, criterion);
            (
                Stage {
                    base: Some(step.base),
                    trees: step.trees,
                },
                step.candidate_losses,
            )
        } else {
            let trees = iterate_plain(&mut self.state, self.dataset, &self.index, &self.config, criterion);
            (
                Stage {
                    base: None,
                    trees: trees.into_iter().enumerate().collect(),
                },
                Vec::new(),
            )
        };
        let kc = self.model.n_classes;
        if let Some(t) = self.test.as_mut() {
            t.apply(&self.model, &stage);
        }
        let base = stage.base;
        self.model.stages.push(stage);

        let m = self.state.iteration;
        let test_errors = self.test.as_ref().map(|t| t.errors(kc));
        if m % self.config.eval_stride == 0 || self.finished() {
            self.log.push(MetricRow {
                iteration: m,
                train_loss: self.state.loss,
                test_errors,
                seconds: self.started.elapsed().as_secs_f64(),
            });
        }
        IterationReport {
            iteration: m,
            train_loss: self.state.loss,
            base,
            candidate_losses,
            test_errors,
        }
    }

    pub fn run(mut self) -> (BoostModel, MetricLog) {
        while !self.finished() {
            self.step();
        }
        (self.model, self.log)
    }

    pub fn into_parts(self) -> (BoostModel, MetricLog, BoostState) {
        (self.model, self.log, self.state)
    }
}

/// Trains a model, optionally tracking test errors.
pub fn train(dataset: &Dataset, test: Option<&Dataset>, config: &TrainConfig) -> Result<(BoostModel, MetricLog)> {
    Ok(Trainer::new(dataset, test, config.clone())?.run())
}

/// Determinants of the 3-class loss Hessian at probabilities `p`.
///
/// `full` uses the unconstrained second derivatives and is singular;
/// `reduced` is the 2 × 2 Hessian in the two non-base scores under the
/// sum-to-zero constraint and does not depend on the base.
pub fn hessian_diagnostics(p: [f64; 3], base: usize) -> Result<(f64, f64)> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| v < -1e-9) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{p:?} is not on the probability simplex")));
    }
    if base > 2 {
        return Err(Error::InvalidArgument(format!("base class {base} out of range for 3 classes")));
    }
    let h = |j: usize, k: usize| {
        if j == k {
            p[j] * (1.0 - p[j])
        } else {
            -p[j] * p[k]
        }
    };
    let full = h(0, 0) * (h(1, 1) * h(2, 2) - h(1, 2) * h(2, 1)) - h(0, 1) * (h(1, 0) * h(2, 2) - h(1, 2) * h(2, 0))
        + h(0, 2) * (h(1, 0) * h(2, 1) - h(1, 1) * h(2, 0));

    let (j, k) = match base {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let pb = p[base];
    let diag = |c: usize| pb * (1.0 - pb) + p[c] * (1.0 - p[c]) + 2.0 * pb * p[c];
    let off = pb - pb * pb + pb * p[j] + pb * p[k] - p[j] * p[k];
    let reduced = diag(j) * diag(k) - off * off;
    Ok((full, reduced))
}
