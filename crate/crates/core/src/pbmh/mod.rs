//! Population-based metaheuristics behind one minimizing interface.
//!
//! Every algorithm works on a real box. Evaluations go through [`Budget`],
//! which clamps candidates into bounds, counts calls, records the fitness
//! trace and keeps the incumbent, so elitism and exact budgets hold for all
//! of them regardless of their native survivor rules.

mod cmaes;
mod de;
mod ga;
mod pso;
mod shade;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Genome, Interval, SearchSpace};

pub use shade::lshade_target_size;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "MA")]
    Ma,
    #[serde(rename = "PSO")]
    Pso,
    #[serde(rename = "CMA-ES")]
    CmaEs,
    #[serde(rename = "HPSO")]
    Hpso,
    #[serde(rename = "CPSO")]
    Cpso,
    #[serde(rename = "CLPSO")]
    Clpso,
    #[serde(rename = "SAP-DE")]
    SapDe,
    #[serde(rename = "JADE")]
    Jade,
    #[serde(rename = "SHADE")]
    Shade,
    #[serde(rename = "LSHADE")]
    Lshade,
    #[serde(rename = "PPSO")]
    Ppso,
}

impl Algorithm {
    pub const ALL: [Algorithm; 13] = [
        Algorithm::Ga,
        Algorithm::De,
        Algorithm::Ma,
        Algorithm::Pso,
        Algorithm::CmaEs,
        Algorithm::Hpso,
        Algorithm::Cpso,
        Algorithm::Clpso,
        Algorithm::SapDe,
        Algorithm::Jade,
        Algorithm::Shade,
        Algorithm::Lshade,
        Algorithm::Ppso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "GA",
            Algorithm::De => "DE",
            Algorithm::Ma => "MA",
            Algorithm::Pso => "PSO",
            Algorithm::CmaEs => "CMA-ES",
            Algorithm::Hpso => "HPSO",
            Algorithm::Cpso => "CPSO",
            Algorithm::Clpso => "CLPSO",
            Algorithm::SapDe => "SAP-DE",
            Algorithm::Jade => "JADE",
            Algorithm::Shade => "SHADE",
            Algorithm::Lshade => "LSHADE",
            Algorithm::Ppso => "PPSO",
        }
    }

    /// Fixed constants of the algorithm, for run manifests.
    pub fn constants(self) -> BTreeMap<&'static str, f64> {
        let pairs: &[(&str, f64)] = match self {
            Algorithm::Ga => &[
                ("crossover_prob", ga::CROSSOVER_PROB),
                ("mutation_prob", ga::MUTATION_PROB),
                ("mutation_sigma", ga::MUTATION_SIGMA),
                ("tournament_size", 2.0),
            ],
            Algorithm::Ma => &[
                ("crossover_prob", ga::CROSSOVER_PROB),
                ("mutation_prob", ga::MUTATION_PROB),
                ("mutation_sigma", ga::MUTATION_SIGMA),
                ("tournament_size", 2.0),
                ("local_search_prob", ga::LOCAL_SEARCH_PROB),
                ("local_search_trials", ga::LOCAL_SEARCH_TRIALS as f64),
                ("local_search_sigma", ga::LOCAL_SEARCH_SIGMA),
            ],
            Algorithm::De => &[("f", de::F), ("cr", de::CR)],
            Algorithm::SapDe => &[("np_min", de::SAPDE_MIN_POP as f64)],
            Algorithm::Jade => &[
                ("c", shade::JADE_C),
                ("p", shade::JADE_P),
                ("mu_cr_init", 0.5),
                ("mu_f_init", 0.5),
                ("strategy_window", shade::JADE_WINDOW as f64),
            ],
            Algorithm::Shade => &[("history_size", shade::HISTORY as f64)],
            Algorithm::Lshade => {
                &[("history_size", shade::HISTORY as f64), ("min_population", shade::LSHADE_MIN_POP as f64)]
            }
            Algorithm::CmaEs => &[("sigma0", cmaes::SIGMA0)],
            Algorithm::Pso => &[("c1", pso::C), ("c2", pso::C), ("w_start", pso::W_START), ("w_end", pso::W_END)],
            Algorithm::Hpso => &[
                ("c1_start", 2.5),
                ("c1_end", 0.5),
                ("c2_start", 0.5),
                ("c2_end", 2.5),
                ("stagnation_generations", pso::HPSO_STAGNATION as f64),
                ("mutation_step_start", 1.0),
                ("mutation_step_end", 0.1),
            ],
            Algorithm::Cpso => &[
                ("c1", pso::C),
                ("c2", pso::C),
                ("w_min", pso::W_END),
                ("w_max", pso::W_START),
                ("chaotic_points", pso::CLS_POINTS as f64),
                ("chaotic_radius", pso::CLS_RADIUS),
            ],
            Algorithm::Clpso => &[
                ("c", pso::CLPSO_C),
                ("w_start", pso::W_START),
                ("w_end", pso::W_END),
                ("refreshing_gap", pso::CLPSO_GAP as f64),
                ("pc_min", 0.05),
                ("pc_max", 0.5),
            ],
            Algorithm::Ppso => &[],
        };
        pairs.iter().copied().collect()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key || a.name().replace('-', "") == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub stage_budget: usize,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::Config(format!("population_size = {} (need at least 4)", self.population_size)));
        }
        if self.stage_budget < self.population_size {
            return Err(Error::Config(format!(
                "stage_budget {} is below population_size {}",
                self.stage_budget, self.population_size
            )));
        }
        Ok(())
    }
}

/// Objective over raw coordinates. Must be safe to call from several threads.
pub type Objective<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fitness: f64,
    /// Fitness of every evaluation, in call order.
    pub trace: Vec<f64>,
}

impl Minimum {
    /// Best fitness among the first `n` evaluations.
    pub fn best_of_first(&self, n: usize) -> f64 {
        self.trace.iter().take(n).copied().fold(f64::INFINITY, f64::min)
    }
}

/// Counted, clamped access to the objective.
pub struct Budget<'a> {
    objective: &'a Objective<'a>,
    bounds: &'a [Interval],
    max: usize,
    trace: Vec<f64>,
    best: Option<(Vec<f64>, f64)>,
}

impl<'a> Budget<'a> {
    pub fn new(objective: &'a Objective<'a>, bounds: &'a [Interval], max: usize) -> Self {
        Budget { objective, bounds, max, trace: Vec::with_capacity(max), best: None }
    }

    pub fn bounds(&self) -> &[Interval] {
        self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn used(&self) -> usize {
        self.trace.len()
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn remaining(&self) -> usize {
        self.max - self.trace.len()
    }

    pub fn exhausted(&self) -> bool {
        self.trace.len() >= self.max
    }

    /// Fraction of the budget spent, in [0, 1].
    pub fn progress(&self) -> f64 {
        self.trace.len() as f64 / self.max as f64
    }

    pub fn best_fitness(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
    }

    pub fn best_x(&self) -> Option<&[f64]> {
        self.best.as_ref().map(|b| b.0.as_slice())
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(self.bounds) {
            *v = b.clamp(*v);
        }
    }

    /// Evaluates one point after clamping it in place. Returns `INFINITY`
    /// without calling the objective once the budget is spent.
    pub fn eval(&mut self, x: &mut [f64]) -> Result<f64> {
        if self.exhausted() {
            return Ok(f64::INFINITY);
        }
        self.clamp(x);
        let f = sanitize((self.objective)(x)?);
        self.record(x, f);
        Ok(f)
    }

    /// Evaluates points in parallel and records them in index order. Points
    /// past the budget are clamped but left unevaluated with `INFINITY`.
    pub fn eval_batch(&mut self, xs: &mut [Vec<f64>]) -> Result<Vec<f64>> {
        for x in xs.iter_mut() {
            self.clamp(x);
        }
        let n = xs.len().min(self.remaining());
        let objective = self.objective;
        let results: Vec<Result<f64>> = xs[..n].par_iter().map(|x| objective(x)).collect();
        let mut out = Vec::with_capacity(xs.len());
        for (x, r) in xs[..n].iter().zip(results) {
            let f = sanitize(r?);
            self.record(x, f);
            out.push(f);
        }
        out.resize(xs.len(), f64::INFINITY);
        Ok(out)
    }

    fn record(&mut self, x: &[f64], f: f64) {
        self.trace.push(f);
        if self.best.as_ref().is_none_or(|b| f < b.1) {
            self.best = Some((x.to_vec(), f));
        }
    }

    fn finish(self) -> Result<Minimum> {
        let (x, fitness) = self.best.ok_or_else(|| Error::Config("no evaluations were made".into()))?;
        Ok(Minimum { x, fitness, trace: self.trace })
    }
}

fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

/// Minimizes `objective` over `bounds` with exactly `cfg.stage_budget` calls.
pub fn minimize(
    cfg: &OptimizerConfig,
    bounds: &[Interval],
    objective: &Objective<'_>,
    warm_start: Option<&[f64]>,
) -> Result<Minimum> {
    cfg.validate()?;
    if bounds.is_empty() {
        return Err(Error::Config("empty search box".into()));
    }
    if let Some(w) = warm_start {
        if w.len() != bounds.len() {
            return Err(Error::Shape(format!("warm start has {} genes, box has {}", w.len(), bounds.len())));
        }
    }
    let mut budget = Budget::new(objective, bounds, cfg.stage_budget);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.population_size;
    match cfg.algorithm {
        Algorithm::Ga => ga::run(&mut budget, &mut rng, n, warm_start, false)?,
        Algorithm::Ma => ga::run(&mut budget, &mut rng, n, warm_start, true)?,
        Algorithm::De => de::run_de(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::SapDe => de::run_sapde(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Jade => shade::run_jade(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Shade => shade::run_shade(&mut budget, &mut rng, n, warm_start, false)?,
        Algorithm::Lshade => shade::run_shade(&mut budget, &mut rng, n, warm_start, true)?,
        Algorithm::CmaEs => cmaes::run(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Pso => pso::run_pso(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Hpso => pso::run_hpso(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Cpso => pso::run_cpso(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Clpso => pso::run_clpso(&mut budget, &mut rng, n, warm_start)?,
        Algorithm::Ppso => pso::run_ppso(&mut budget, &mut rng, n, warm_start)?,
    }
    // Every loop stops on exhaustion; spend any leftover on the incumbent's
    // neighbourhood so the count is exact even if an algorithm stalls early.
    while !budget.exhausted() {
        let mut x = budget.best_x().map(<[f64]>::to_vec).unwrap_or_else(|| uniform_point(bounds, &mut rng));
        for (v, b) in x.iter_mut().zip(bounds) {
            *v += 0.01 * b.width() * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        budget.eval(&mut x)?;
    }
    budget.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub best: Genome,
    pub best_fitness: f64,
    pub trace: Vec<f64>,
}

/// Searches genomes with `n_layers` hidden layers.
pub fn optimize_stage(
    cfg: &OptimizerConfig,
    space: &SearchSpace,
    n_layers: usize,
    evaluator: &(dyn Fn(&Genome) -> Result<f64> + Sync),
    warm_start: Option<&Genome>,
) -> Result<StageResult> {
    space.validate()?;
    if n_layers == 0 || n_layers > space.max_layers {
        return Err(Error::Capacity { max_layers: space.max_layers });
    }
    if let Some(w) = warm_start {
        if w.n_layers() != n_layers {
            return Err(Error::invalid(format!("warm start has {} layers, stage expects {n_layers}", w.n_layers())));
        }
    }
    let bounds = space.bounds(n_layers);
    let objective = |x: &[f64]| evaluator(&Genome::from_slice(x)?);
    let warm = warm_start.map(Genome::to_vec);
    let m = minimize(cfg, &bounds, &objective, warm.as_deref())?;
    Ok(StageResult { best: Genome::from_slice(&m.x)?, best_fitness: m.fitness, trace: m.trace })
}

// Shared building blocks.

pub(crate) fn uniform_point(bounds: &[Interval], rng: &mut ChaCha8Rng) -> Vec<f64> {
    bounds.iter().map(|b| if b.width() > 0.0 { rng.random_range(b.lo..=b.hi) } else { b.lo }).collect()
}

/// `n` random members, the first replaced by the warm start when given.
pub(crate) fn initial_population(
    budget: &mut Budget<'_>,
    rng: &mut ChaCha8Rng,
    n: usize,
    warm_start: Option<&[f64]>,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs: Vec<Vec<f64>> = (0..n).map(|_| uniform_point(budget.bounds(), rng)).collect();
    if let Some(w) = warm_start {
        xs[0] = w.to_vec();
    }
    let fs = budget.eval_batch(&mut xs)?;
    Ok((xs, fs))
}

pub(crate) fn argmin(fs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fs.iter().enumerate() {
        if f < fs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmax(fs: &[f64]) -> usize {
    let mut worst = 0;
    for (i, &f) in fs.iter().enumerate() {
        if f > fs[worst] {
            worst = i;
        }
    }
    worst
}

/// Indices sorted by ascending fitness; ties keep index order.
pub(crate) fn ranking(fs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fs.len()).collect();
    idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
    idx
}

/// `k` distinct indices from `0..n`, none of them in `exclude`.
pub(crate) fn distinct(rng: &mut ChaCha8Rng, n: usize, exclude: &[usize], k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let r = rng.random_range(0..n);
        if !exclude.contains(&r) && !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

/// Winner of a two-way tournament; the first contender wins ties.
pub fn tournament_winner(i: usize, j: usize, fs: &[f64]) -> usize {
    if fs[j] < fs[i] {
        j
    } else {
        i
    }
}

/// Greedy replacement: the trial survives when no worse than its target.
pub fn de_select(trial: f64, target: f64) -> bool {
    trial <= target
}

/// PSO velocity for one dimension.
#[allow(clippy::too_many_arguments)]
pub fn pso_velocity(v: f64, x: f64, p: f64, g: f64, w: f64, c1: f64, c2: f64, r1: f64, r2: f64) -> f64 {
    w * v + c1 * r1 * (p - x) + c2 * r2 * (g - x)
}

/// Adaptive inertia weight: members at or above the mean fitness keep the
/// largest inertia, better ones interpolate down towards `w_min`.
pub fn aiwf(f: f64, f_avg: f64, f_min: f64, w_min: f64, w_max: f64) -> f64 {
    if f >= f_avg {
        w_max
    } else if f_avg <= f_min {
        w_min
    } else {
        w_min + (w_max - w_min) * (f - f_min) / (f_avg - f_min)
    }
}

/// Comprehensive-learning velocity for one dimension.
pub fn clpso_velocity(v: f64, x: f64, exemplar: f64, w: f64, c: f64, r: f64) -> f64 {
    w * v + c * r * (exemplar - x)
}

/// Learning probability of particle `i` (0-based) in a swarm of `n`.
pub fn clpso_learning_probability(i: usize, n: usize) -> f64 {
    if n < 2 {
        return 0.05;
    }
    let t = 10.0 * i as f64 / (n - 1) as f64;
    0.05 + 0.45 * (t.exp() - 1.0) / (10f64.exp() - 1.0)
}

/// Phasor coefficients `(|cos θ|^(2 sin θ), |sin θ|^(2 cos θ))`, with 0⁰ = 1.
pub fn ppso_coefficients(theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c.abs().powf(2.0 * s), s.abs().powf(2.0 * c))
}

/// Phasor velocity for one dimension. A zero attraction contributes zero
/// even where its coefficient is infinite.
pub fn ppso_velocity(theta: f64, x: f64, pbest: f64, gbest: f64) -> f64 {
    let (a, b) = ppso_coefficients(theta);
    let term = |coef: f64, d: f64| if d == 0.0 { 0.0 } else { coef * d };
    term(a, pbest - x) + term(b, gbest - x)
}

/// Next phase angle, wrapped into [0, 2π).
pub fn ppso_next_theta(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    (theta + (theta.cos() + theta.sin()).abs() * tau).rem_euclid(tau)
}

/// One step of the logistic map at full chaos.
pub fn logistic_map(z: f64) -> f64 {
    4.0 * z * (1.0 - z)
}

#[cfg(test)]
mod tests;
