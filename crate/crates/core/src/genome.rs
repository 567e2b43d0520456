//! Two-segment candidate encoding.
//!
//! A [`Genome`] holds a fixed hyperparameter segment (seven real genes plus a
//! relaxed solver gene) followed by one neuron-count gene per hidden layer.
//! All genes are real so every metaheuristic can work on a plain box-bounded
//! vector; integer genes are rounded (ties away from zero) and clamped when a
//! genome is decoded into a [`NetworkSpec`].

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::{self, SolverKind};

/// Names of the real-valued genes in the hyperparameter segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparam {
    LearningRate,
    WeightDecay,
    Rho,
    Beta1,
    Beta2,
    Lambda,
    Momentum,
}

impl Hyperparam {
    pub const ALL: [Hyperparam; 7] = [
        Hyperparam::LearningRate,
        Hyperparam::WeightDecay,
        Hyperparam::Rho,
        Hyperparam::Beta1,
        Hyperparam::Beta2,
        Hyperparam::Lambda,
        Hyperparam::Momentum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Hyperparam::LearningRate => "learning_rate",
            Hyperparam::WeightDecay => "weight_decay",
            Hyperparam::Rho => "rho",
            Hyperparam::Beta1 => "beta1",
            Hyperparam::Beta2 => "beta2",
            Hyperparam::Lambda => "lambda",
            Hyperparam::Momentum => "momentum",
        }
    }
}

impl fmt::Display for Hyperparam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver-filtered hyperparameters handed to a solver constructor.
pub type ActiveParams = BTreeMap<Hyperparam, f64>;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// The first genome segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamVector {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    pub momentum: f64,
    pub solver_gene: f64,
}

impl HyperparamVector {
    /// Number of genes in the segment.
    pub const LEN: usize = 8;

    pub fn get(&self, p: Hyperparam) -> f64 {
        match p {
            Hyperparam::LearningRate => self.learning_rate,
            Hyperparam::WeightDecay => self.weight_decay,
            Hyperparam::Rho => self.rho,
            Hyperparam::Beta1 => self.beta1,
            Hyperparam::Beta2 => self.beta2,
            Hyperparam::Lambda => self.lambda,
            Hyperparam::Momentum => self.momentum,
        }
    }

    /// Centre of every bound, with the given solver gene.
    pub fn midrange(bounds: &HyperBounds, solver: SolverKind) -> Self {
        HyperparamVector {
            learning_rate: bounds.learning_rate.mid(),
            weight_decay: bounds.weight_decay.mid(),
            rho: bounds.rho.mid(),
            beta1: bounds.beta1.mid(),
            beta2: bounds.beta2.mid(),
            lambda: bounds.lambda.mid(),
            momentum: bounds.momentum.mid(),
            solver_gene: f64::from(solver.id()),
        }
    }

    fn to_array(self) -> [f64; Self::LEN] {
        [
            self.learning_rate,
            self.weight_decay,
            self.rho,
            self.beta1,
            self.beta2,
            self.lambda,
            self.momentum,
            self.solver_gene,
        ]
    }

    fn from_slice(v: &[f64]) -> Self {
        HyperparamVector {
            learning_rate: v[0],
            weight_decay: v[1],
            rho: v[2],
            beta1: v[3],
            beta2: v[4],
            lambda: v[5],
            momentum: v[6],
            solver_gene: v[7],
        }
    }
}

/// Bounds of the hyperparameter segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub learning_rate: Interval,
    pub weight_decay: Interval,
    pub rho: Interval,
    pub beta1: Interval,
    pub beta2: Interval,
    pub lambda: Interval,
    pub momentum: Interval,
    pub solver_gene: Interval,
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            learning_rate: Interval::new(0.0, 1.0),
            weight_decay: Interval::new(0.0, 0.2),
            rho: Interval::new(0.0, 1.0),
            beta1: Interval::new(0.8, 1.0),
            beta2: Interval::new(0.8, 1.0),
            lambda: Interval::new(0.0, 1.0),
            momentum: Interval::new(0.0, 1.0),
            solver_gene: Interval::new(1.0, solvers::SOLVER_COUNT as f64),
        }
    }
}

impl HyperBounds {
    fn to_array(self) -> [Interval; HyperparamVector::LEN] {
        [
            self.learning_rate,
            self.weight_decay,
            self.rho,
            self.beta1,
            self.beta2,
            self.lambda,
            self.momentum,
            self.solver_gene,
        ]
    }
}

/// Box bounds of the whole search problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub hyper: HyperBounds,
    pub neuron_min: u32,
    pub neuron_max: u32,
    pub max_layers: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace { hyper: HyperBounds::default(), neuron_min: 1, neuron_max: 400, max_layers: 8 }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.neuron_min < 1 || self.neuron_max < self.neuron_min {
            return Err(Error::invalid(format!(
                "neuron bounds [{}, {}] must satisfy 1 <= min <= max",
                self.neuron_min, self.neuron_max
            )));
        }
        if self.max_layers < 1 {
            return Err(Error::invalid("max_layers must be at least 1"));
        }
        for b in self.hyper.to_array() {
            if b.lo.is_nan() || b.hi.is_nan() || b.lo > b.hi {
                return Err(Error::invalid(format!("empty hyperparameter bound [{}, {}]", b.lo, b.hi)));
            }
        }
        Ok(())
    }

    pub fn neuron_interval(&self) -> Interval {
        Interval::new(f64::from(self.neuron_min), f64::from(self.neuron_max))
    }

    /// Per-dimension bounds of a flattened genome with `n_layers` hidden layers.
    pub fn bounds(&self, n_layers: usize) -> Vec<Interval> {
        let mut b = self.hyper.to_array().to_vec();
        b.extend(std::iter::repeat_n(self.neuron_interval(), n_layers));
        b
    }

    fn check_layers(&self, n_layers: usize) -> Result<()> {
        if n_layers == 0 || n_layers > self.max_layers {
            return Err(Error::invalid(format!("layer count {n_layers} outside 1..={}", self.max_layers)));
        }
        Ok(())
    }
}

/// A candidate solution: hyperparameter segment plus one gene per hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    #[serde(flatten)]
    pub hyper: HyperparamVector,
    pub neurons: Vec<f64>,
}

impl Genome {
    pub fn n_layers(&self) -> usize {
        self.neurons.len()
    }

    pub fn dim(&self) -> usize {
        HyperparamVector::LEN + self.neurons.len()
    }

    /// Flattened gene vector: hyperparameters first, then neuron genes.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.hyper.to_array().to_vec();
        v.extend_from_slice(&self.neurons);
        v
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() <= HyperparamVector::LEN {
            return Err(Error::invalid(format!("gene vector of length {} has no neuron segment", v.len())));
        }
        Ok(Genome {
            hyper: HyperparamVector::from_slice(&v[..HyperparamVector::LEN]),
            neurons: v[HyperparamVector::LEN..].to_vec(),
        })
    }

    /// Checks every Genome invariant against `space`.
    pub fn validate(&self, space: &SearchSpace) -> Result<()> {
        space.check_layers(self.n_layers())?;
        for (x, b) in self.to_vec().iter().zip(space.bounds(self.n_layers())) {
            if !b.contains(*x) {
                return Err(Error::invalid(format!("gene {x} outside [{}, {}]", b.lo, b.hi)));
            }
        }
        Ok(())
    }
}

/// Decoded architecture and solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub hidden_layer_sizes: Vec<usize>,
    pub solver_id: u8,
    pub active_params: ActiveParams,
}

impl NetworkSpec {
    pub fn solver(&self) -> SolverKind {
        SolverKind::from_id(self.solver_id).expect("decoded solver id is always valid")
    }
}

/// Draws a genome uniformly inside `space` with `n_layers` hidden layers.
pub fn random_genome<R: Rng + ?Sized>(space: &SearchSpace, n_layers: usize, rng: &mut R) -> Result<Genome> {
    space.check_layers(n_layers)?;
    let v: Vec<f64> = space.bounds(n_layers).iter().map(|b| uniform(b, rng)).collect();
    Genome::from_slice(&v)
}

fn uniform<R: Rng + ?Sized>(b: &Interval, rng: &mut R) -> f64 {
    if b.hi > b.lo {
        rng.random_range(b.lo..=b.hi)
    } else {
        b.lo
    }
}

/// Nearest integer, ties away from zero, then clamped into `[lo, hi]`.
pub fn round_clamp(x: f64, lo: u32, hi: u32) -> u32 {
    let r = x.round();
    if r.is_nan() || r <= f64::from(lo) {
        lo
    } else if r >= f64::from(hi) {
        hi
    } else {
        r as u32
    }
}

/// Decodes a genome into the network it describes.
pub fn decode(genome: &Genome, space: &SearchSpace) -> NetworkSpec {
    let solver_id = round_clamp(genome.hyper.solver_gene, 1, solvers::SOLVER_COUNT as u32) as u8;
    let hidden_layer_sizes =
        genome.neurons.iter().map(|&g| round_clamp(g, space.neuron_min, space.neuron_max) as usize).collect();
    let active_params = selective_exclusion(solver_id, &genome.hyper).expect("clamped solver id is valid");
    NetworkSpec { hidden_layer_sizes, solver_id, active_params }
}

/// Keeps only the hyperparameters the identified solver consumes.
pub fn selective_exclusion(solver_id: u8, hyper: &HyperparamVector) -> Result<ActiveParams> {
    let kind = SolverKind::from_id(solver_id)?;
    Ok(solvers::consumed_parameters(kind).iter().map(|&p| (p, hyper.get(p))).collect())
}

/// Appends one uniformly drawn hidden layer gene.
pub fn grow<R: Rng + ?Sized>(genome: &Genome, space: &SearchSpace, rng: &mut R) -> Result<Genome> {
    if genome.n_layers() >= space.max_layers {
        return Err(Error::Capacity { max_layers: space.max_layers });
    }
    let mut next = genome.clone();
    next.neurons.push(uniform(&space.neuron_interval(), rng));
    Ok(next)
}
