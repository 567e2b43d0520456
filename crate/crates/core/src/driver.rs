//! Layer-growth search and the benchmark grid.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{inject_missing, LabeledDataset, MaskedDataset};
use crate::error::{Error, Result};
use crate::genome::{decode, grow, Genome, Hyperparam, SearchSpace};
use crate::objective::{EvalConfig, EvalResult, Evaluator};
use crate::pbmh::{optimize_stage, Algorithm, OptimizerConfig};
pub use crate::seed::seed_derive;
use crate::solvers::id_table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub algorithms: Vec<Algorithm>,
    pub max_layers: usize,
    pub stage_budget: usize,
    pub population_size: usize,
    pub repeats: usize,
    pub missing_rates: Vec<f64>,
    pub eval: EvalConfig,
    pub master_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithms: Algorithm::ALL.to_vec(),
            max_layers: 8,
            stage_budget: 30,
            population_size: 10,
            repeats: 10,
            missing_rates: vec![0.0, 0.05, 0.2, 0.4],
            eval: EvalConfig::default(),
            master_seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.max_layers < 1 {
            return Err(Error::Config("max_layers must be at least 1".into()));
        }
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.missing_rates.is_empty() {
            return Err(Error::Config("no missing rates given".into()));
        }
        for &r in &self.missing_rates {
            if !(0.0..=crate::data::MAX_MISSING_RATE).contains(&r) {
                return Err(Error::Config(format!("missing rate {r} outside [0, {}]", crate::data::MAX_MISSING_RATE)));
            }
        }
        self.eval.validate()?;
        self.optimizer(Algorithm::De, 0).validate()?;
        self.space().validate()
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace { max_layers: self.max_layers, ..SearchSpace::default() }
    }

    pub fn optimizer(&self, algorithm: Algorithm, seed: u64) -> OptimizerConfig {
        OptimizerConfig { algorithm, population_size: self.population_size, stage_budget: self.stage_budget, seed }
    }

    /// Evaluation settings shared by every run of a benchmark, so all
    /// algorithms face the same folds and initial weights.
    pub fn shared_eval(&self) -> EvalConfig {
        EvalConfig { seed: seed_derive(self.master_seed, &["eval"]), ..self.eval.clone() }
    }
}

/// Human-readable form of a decoded genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_layer_sizes: Vec<usize>,
    pub solver_id: u8,
    pub solver_name: String,
    pub learning_rate: f64,
    pub active_params: BTreeMap<Hyperparam, f64>,
}

impl Architecture {
    pub fn from_genome(genome: &Genome, space: &SearchSpace) -> Self {
        let spec = decode(genome, space);
        Architecture {
            hidden_layer_sizes: spec.hidden_layer_sizes.clone(),
            solver_id: spec.solver_id,
            solver_name: spec.solver().name().to_string(),
            learning_rate: spec.active_params.get(&Hyperparam::LearningRate).copied().unwrap_or(f64::NAN),
            active_params: spec.active_params,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub architecture: Architecture,
    pub genome: Genome,
    pub fitness: f64,
    pub accuracy: f64,
    pub f_measure: f64,
    /// Fitness of every evaluation, one list per layer count.
    pub stage_traces: Vec<Vec<f64>>,
    pub stage_best: Vec<f64>,
    pub evaluations: usize,
}

/// Runs one stage per hidden-layer count, each warm-started from the overall
/// incumbent grown to that depth, and returns the best genome of all stages.
pub fn layer_growth_search(
    algorithm: Algorithm,
    evaluator: &Evaluator,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<SearchOutcome> {
    let space = evaluator.space().clone();
    let calls = AtomicUsize::new(0);
    let results: Mutex<HashMap<Vec<u64>, EvalResult>> = Mutex::new(HashMap::new());
    let objective = |g: &Genome| -> Result<f64> {
        calls.fetch_add(1, Ordering::Relaxed);
        let r = evaluator.evaluate(g)?;
        let f = r.fitness;
        results.lock().expect("no panics while locked").insert(genome_key(g), r);
        Ok(f)
    };

    let mut best: Option<(Genome, f64)> = None;
    let mut stage_traces = Vec::with_capacity(space.max_layers);
    let mut stage_best = Vec::with_capacity(space.max_layers);
    for layers in 1..=space.max_layers {
        let label = layers.to_string();
        let warm = match &best {
            Some((g, _)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_derive(seed, &["grow", &label]));
                let mut w = g.clone();
                while w.n_layers() < layers {
                    w = grow(&w, &space, &mut rng)?;
                }
                Some(w)
            }
            None => None,
        };
        let opt = cfg.optimizer(algorithm, seed_derive(seed, &["stage", &label]));
        let stage = optimize_stage(&opt, &space, layers, &objective, warm.as_ref())
            .map_err(|e| Error::Stage { stage: layers, source: Box::new(e) })?;
        if best.as_ref().is_none_or(|b| stage.best_fitness < b.1) {
            best = Some((stage.best.clone(), stage.best_fitness));
        }
        stage_best.push(stage.best_fitness);
        stage_traces.push(stage.trace);
    }
    let (genome, fitness) = best.expect("at least one stage");
    let result = results
        .into_inner()
        .expect("no panics while locked")
        .remove(&genome_key(&genome))
        .expect("incumbent was evaluated");
    Ok(SearchOutcome {
        architecture: Architecture::from_genome(&genome, &space),
        genome,
        fitness,
        accuracy: result.accuracy,
        f_measure: result.f_measure,
        stage_traces,
        stage_best,
        evaluations: calls.into_inner(),
    })
}

fn genome_key(g: &Genome) -> Vec<u64> {
    g.to_vec().iter().map(|v| v.to_bits()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed(Box<SearchOutcome>),
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub missing_rate: f64,
    pub repeat: usize,
    pub seed: u64,
    pub mask_seed: u64,
    #[serde(flatten)]
    pub outcome: RunOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunRecord {
    pub fn completed(&self) -> Option<&SearchOutcome> {
        match &self.outcome {
            RunOutcome::Completed(o) => Some(o),
            RunOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BenchmarkOptions {
    /// Omit wall-clock times so repeated runs produce identical bytes.
    pub deterministic: bool,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

fn rate_label(rate: f64) -> String {
    format!("{rate}")
}

pub fn run_seed(master: u64, algorithm: Algorithm, rate: f64, repeat: usize) -> u64 {
    seed_derive(master, &["run", algorithm.name(), &rate_label(rate), &repeat.to_string()])
}

pub fn mask_seed(master: u64, rate: f64) -> u64 {
    seed_derive(master, &["mask", &rate_label(rate)])
}

/// Runs every (rate, algorithm, repeat) cell. Records reach `sink` in grid
/// order as soon as every earlier cell is done; a failed cell yields a
/// failure record and the grid continues.
pub fn run_benchmark(
    ds: &LabeledDataset,
    cfg: &SearchConfig,
    opts: BenchmarkOptions,
    mut sink: impl FnMut(&RunRecord) -> Result<()>,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let space = cfg.space();
    let eval_cfg = cfg.shared_eval();
    let masked: Vec<MaskedDataset> = cfg
        .missing_rates
        .iter()
        .map(|&r| inject_missing(ds, r, mask_seed(cfg.master_seed, r)))
        .collect::<Result<_>>()?;
    let evaluators: Vec<Evaluator> =
        masked.iter().map(|m| Evaluator::new(m, &space, &eval_cfg)).collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (ri, &rate) in cfg.missing_rates.iter().enumerate() {
        for &alg in &cfg.algorithms {
            for repeat in 0..cfg.repeats {
                cells.push((ri, rate, alg, repeat));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let run_cell = |&(ri, rate, alg, repeat): &(usize, f64, Algorithm, usize)| {
        let seed = run_seed(cfg.master_seed, alg, rate, repeat);
        let start = Instant::now();
        let outcome = match layer_growth_search(alg, &evaluators[ri], cfg, seed) {
            Ok(o) => RunOutcome::Completed(Box::new(o)),
            Err(e) => RunOutcome::Failed { error: e.to_string() },
        };
        RunRecord {
            algorithm: alg,
            missing_rate: rate,
            repeat,
            seed,
            mask_seed: mask_seed(cfg.master_seed, rate),
            outcome,
            wall_time_s: (!opts.deterministic).then(|| start.elapsed().as_secs_f64()),
        }
    };

    let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();
    let mut records: Vec<Option<RunRecord>> = vec![None; cells.len()];
    let mut flushed = 0;
    std::thread::scope(|scope| -> Result<()> {
        scope.spawn(|| {
            pool.install(|| {
                cells.par_iter().enumerate().for_each_with(tx, |tx, (i, cell)| {
                    // The receiver only disappears after a sink error.
                    let _ = tx.send((i, run_cell(cell)));
                })
            })
        });
        for (i, record) in rx {
            records[i] = Some(record);
            while flushed < records.len() {
                match &records[flushed] {
                    Some(r) => sink(r)?,
                    None => break,
                }
                flushed += 1;
            }
        }
        Ok(())
    })?;
    Ok(records.into_iter().map(|r| r.expect("every cell reports")).collect())
}

/// Appends one JSON object per line.
pub struct JsonlWriter<W: Write> {
    out: W,
}

impl JsonlWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(JsonlWriter { out: BufWriter::new(f) })
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter { out }
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
        self.out.flush().map_err(|e| Error::io("<jsonl>", e))
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records(BufReader::new(f))
}

pub fn parse_records(reader: impl BufRead) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| Error::Row { line: i as u64 + 1, message: e.to_string() })?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub algorithm: Algorithm,
    pub missing_rate: f64,
    pub repeat: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: SearchConfig,
    /// Data source as given in the config file, when known.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
    pub master_seed: u64,
    pub eval_seed: u64,
    pub algorithm_constants: BTreeMap<String, BTreeMap<String, f64>>,
    pub solver_table: BTreeMap<u8, String>,
    pub records: usize,
    pub failures: Vec<FailedCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Manifest {
    pub fn new(cfg: &SearchConfig, records: &[RunRecord], wall_time_s: Option<f64>) -> Self {
        let failures = records
            .iter()
            .filter_map(|r| match &r.outcome {
                RunOutcome::Failed { error } => Some(FailedCell {
                    algorithm: r.algorithm,
                    missing_rate: r.missing_rate,
                    repeat: r.repeat,
                    error: error.clone(),
                }),
                RunOutcome::Completed(_) => None,
            })
            .collect();
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            data: serde_json::Value::Null,
            master_seed: cfg.master_seed,
            eval_seed: cfg.shared_eval().seed,
            algorithm_constants: cfg
                .algorithms
                .iter()
                .map(|a| (a.name().to_string(), a.constants().into_iter().map(|(k, v)| (k.to_string(), v)).collect()))
                .collect(),
            solver_table: id_table().into_iter().map(|(k, v)| (k, v.to_string())).collect(),
            records: records.len(),
            failures,
            wall_time_s,
        }
    }
}
