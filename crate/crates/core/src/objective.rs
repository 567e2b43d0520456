//! Fitness of a genome: k-fold cross-validated classification error of the
//! decoded network.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::MaskedDataset;
use crate::error::{Error, Result};
use crate::genome::{decode, Genome, NetworkSpec, SearchSpace};
use crate::network::{MaskedMlp, N_CLASSES};
use crate::seed::seed_derive;
use crate::solvers::{make_solver, SolverSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { folds: 10, epochs: 50, batch_size: 32, seed: 0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds = {} (need at least 2)", self.folds)));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub error: f64,
    pub f_measure: f64,
    /// Training hit a non-finite gradient; the fold counts as fully wrong.
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Mean fold classification error, in percent.
    pub fitness: f64,
    pub accuracy: f64,
    pub f_measure: f64,
    pub per_fold: Vec<FoldScore>,
}

/// Percentage of predictions that differ from the truth.
pub fn classification_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let wrong = pred.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(100.0 / truth.len() as f64 * wrong as f64)
}

/// Macro-averaged F1 in percent over the classes that occur in either
/// `pred` or `truth`.
pub fn f_measure(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let mut tp = [0usize; N_CLASSES];
    let mut n_pred = [0usize; N_CLASSES];
    let mut n_true = [0usize; N_CLASSES];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= N_CLASSES || t >= N_CLASSES {
            return Err(Error::invalid(format!("label outside 0..{N_CLASSES}")));
        }
        n_pred[p] += 1;
        n_true[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let mut sum = 0.0;
    let mut present = 0;
    for c in 0..N_CLASSES {
        if n_pred[c] == 0 && n_true[c] == 0 {
            continue;
        }
        present += 1;
        // F1 = 2TP / (|pred| + |true|), zero when either side misses the class.
        sum += 2.0 * tp[c] as f64 / (n_pred[c] + n_true[c]) as f64;
    }
    Ok(100.0 * sum / present as f64)
}

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    Ok(())
}

/// Stratified fold index for every row: each class is shuffled and dealt
/// round-robin, continuing the deal across classes so fold sizes differ by
/// at most one.
pub fn stratified_folds(y: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; y.len()];
    let mut next = 0;
    for c in 0..N_CLASSES {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

struct Fold {
    train_x: Array2<f64>,
    train_y: Vec<usize>,
    test_x: Array2<f64>,
    test_y: Vec<usize>,
}

/// Scores genomes against one dataset. Fold splits, scaling and masking do
/// not depend on the genome and are prepared once.
pub struct Evaluator {
    space: SearchSpace,
    cfg: EvalConfig,
    n_features: usize,
    folds: Vec<Fold>,
}

impl Evaluator {
    pub fn new(ds: &MaskedDataset, space: &SearchSpace, cfg: &EvalConfig) -> Result<Self> {
        cfg.validate()?;
        if ds.n_rows() < cfg.folds {
            return Err(Error::invalid(format!("{} rows cannot fill {} folds", ds.n_rows(), cfg.folds)));
        }
        let assignment = stratified_folds(&ds.y, cfg.folds, seed_derive(cfg.seed, &["folds"]));
        let mask = ds.mask_f64();
        let folds = (0..cfg.folds)
            .map(|f| {
                let train: Vec<usize> = (0..ds.n_rows()).filter(|&i| assignment[i] != f).collect();
                let test: Vec<usize> = (0..ds.n_rows()).filter(|&i| assignment[i] == f).collect();
                let (lo, hi) = observed_range(ds, &train);
                let prepare = |rows: &[usize]| {
                    let mut x = ds.x.select(Axis(0), rows);
                    let m = mask.select(Axis(0), rows);
                    for mut row in x.rows_mut() {
                        for (j, v) in row.iter_mut().enumerate() {
                            let width = hi[j] - lo[j];
                            *v = if width > 0.0 { (*v - lo[j]) / width } else { 0.0 };
                        }
                    }
                    x.zip_mut_with(&m, |v, &keep| {
                        if keep == 0.0 {
                            *v = 0.0;
                        }
                    });
                    x
                };
                Fold {
                    train_x: prepare(&train),
                    train_y: train.iter().map(|&i| ds.y[i]).collect(),
                    test_x: prepare(&test),
                    test_y: test.iter().map(|&i| ds.y[i]).collect(),
                }
            })
            .collect();
        Ok(Evaluator { space: space.clone(), cfg: cfg.clone(), n_features: ds.n_features(), folds })
    }

    pub fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    /// Held-out rows of every fold; together they partition the dataset.
    pub fn fold_sizes(&self) -> Vec<usize> {
        self.folds.iter().map(|f| f.test_y.len()).collect()
    }

    pub fn evaluate(&self, genome: &Genome) -> Result<EvalResult> {
        let spec = decode(genome, &self.space);
        let mut per_fold = Vec::with_capacity(self.folds.len());
        for (i, fold) in self.folds.iter().enumerate() {
            per_fold.push(self.run_fold(&spec, fold, i)?);
        }
        let k = per_fold.len() as f64;
        let fitness = per_fold.iter().map(|f| f.error).sum::<f64>() / k;
        let f_measure = per_fold.iter().map(|f| f.f_measure).sum::<f64>() / k;
        Ok(EvalResult { fitness, accuracy: 100.0 - fitness, f_measure, per_fold })
    }

    fn run_fold(&self, spec: &NetworkSpec, fold: &Fold, index: usize) -> Result<FoldScore> {
        let fold_label = index.to_string();
        let mut net = MaskedMlp::new(
            &spec.hidden_layer_sizes,
            self.n_features,
            seed_derive(self.cfg.seed, &["init", &fold_label]),
        )?;
        let diverged = !self.train(&mut net, spec, fold, seed_derive(self.cfg.seed, &["shuffle", &fold_label]))?;
        if diverged {
            return Ok(FoldScore { error: 100.0, f_measure: 0.0, diverged });
        }
        let pred = net.predict_masked(fold.test_x.view());
        Ok(FoldScore {
            error: classification_error(&pred, &fold.test_y)?,
            f_measure: f_measure(&pred, &fold.test_y)?,
            diverged,
        })
    }

    /// Returns false if training produced a non-finite gradient.
    fn train(&self, net: &mut MaskedMlp, spec: &NetworkSpec, fold: &Fold, seed: u64) -> Result<bool> {
        let solver_spec = SolverSpec { solver_id: spec.solver_id, params: spec.active_params.clone() };
        let mut solver = make_solver(&solver_spec, &net.param_shapes())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..fold.train_y.len()).collect();
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(self.cfg.batch_size) {
                let x = fold.train_x.select(Axis(0), batch);
                let y: Vec<usize> = batch.iter().map(|&i| fold.train_y[i]).collect();
                let (loss, grads) = net.loss_and_gradients_masked(x.view(), &y)?;
                if !loss.is_finite() {
                    return Ok(false);
                }
                match solver.step(&mut net.params_mut(), &grads.as_slices()) {
                    Ok(()) => {}
                    Err(Error::NumericFault { .. }) => return Ok(false),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(net.params().iter().all(|t| t.iter().all(|v| v.is_finite())))
    }
}

/// Per-feature min and max over the observed entries of `rows`.
fn observed_range(ds: &MaskedDataset, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = ds.n_features();
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for &i in rows {
        for j in 0..p {
            if ds.mask[[i, j]] == 1 {
                lo[j] = lo[j].min(ds.x[[i, j]]);
                hi[j] = hi[j].max(ds.x[[i, j]]);
            }
        }
    }
    for j in 0..p {
        if lo[j] > hi[j] {
            lo[j] = 0.0;
            hi[j] = 0.0;
        }
    }
    (lo, hi)
}

/// One-shot evaluation.
pub fn evaluate(genome: &Genome, ds: &MaskedDataset, space: &SearchSpace, cfg: &EvalConfig) -> Result<EvalResult> {
    Evaluator::new(ds, space, cfg)?.evaluate(genome)
}
