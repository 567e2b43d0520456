//! Gradient-based weight-update rules selected by the solver gene.
//!
//! Each rule follows the update of its original formulation, in the form
//! popularised by the common deep-learning libraries (L2-style weight decay
//! folded into the gradient, except AdamW which decouples it). Parameters and
//! gradients are passed as flat per-tensor slices.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{ActiveParams, HyperBounds, Hyperparam, HyperparamVector};

pub const SOLVER_COUNT: usize = 10;

/// Stabiliser added to every adaptive denominator.
pub const EPSILON: f64 = 1e-8;
/// Adadelta needs a larger stabiliser: its first steps have magnitude ~sqrt(eps).
pub const ADADELTA_EPSILON: f64 = 1e-6;
/// Decay rates are capped below 1 so bias corrections stay finite.
pub const MAX_DECAY: f64 = 0.9999;

pub const RPROP_ETA_PLUS: f64 = 1.2;
pub const RPROP_ETA_MINUS: f64 = 0.5;
pub const RPROP_STEP_MIN: f64 = 1e-6;
pub const RPROP_STEP_MAX: f64 = 50.0;

const ASGD_ALPHA: f64 = 0.75;
const ASGD_T0: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    Adam,
    Adadelta,
    AdamW,
    Adamax,
    Asgd,
    NAdam,
    RAdam,
    RmsProp,
    Rprop,
    Sgd,
}

impl SolverKind {
    pub const ALL: [SolverKind; SOLVER_COUNT] = [
        SolverKind::Adam,
        SolverKind::Adadelta,
        SolverKind::AdamW,
        SolverKind::Adamax,
        SolverKind::Asgd,
        SolverKind::NAdam,
        SolverKind::RAdam,
        SolverKind::RmsProp,
        SolverKind::Rprop,
        SolverKind::Sgd,
    ];

    /// Gene value, 1-based.
    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1..=10 => Ok(Self::ALL[usize::from(id) - 1]),
            _ => Err(Error::invalid(format!("unknown solver id {id}; expected 1..=10"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Adam => "Adam",
            SolverKind::Adadelta => "Adadelta",
            SolverKind::AdamW => "AdamW",
            SolverKind::Adamax => "Adamax",
            SolverKind::Asgd => "ASGD",
            SolverKind::NAdam => "NAdam",
            SolverKind::RAdam => "RAdam",
            SolverKind::RmsProp => "RMSprop",
            SolverKind::Rprop => "Rprop",
            SolverKind::Sgd => "SGD",
        }
    }

    fn slot_names(self) -> &'static [&'static str] {
        match self {
            SolverKind::Adam | SolverKind::AdamW | SolverKind::NAdam | SolverKind::RAdam => &["exp_avg", "exp_avg_sq"],
            SolverKind::Adadelta => &["square_avg", "acc_delta"],
            SolverKind::Adamax => &["exp_avg", "exp_inf"],
            SolverKind::Asgd => &["ax"],
            SolverKind::RmsProp => &["square_avg", "momentum_buffer"],
            SolverKind::Rprop => &["prev", "step_size"],
            SolverKind::Sgd => &["momentum_buffer"],
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown solver `{s}`")))
    }
}

/// Hyperparameters each solver reads. Selective exclusion keeps exactly these.
pub fn consumed_parameters(kind: SolverKind) -> &'static [Hyperparam] {
    use Hyperparam::*;
    match kind {
        SolverKind::Adam | SolverKind::AdamW | SolverKind::Adamax | SolverKind::RAdam => {
            &[LearningRate, Beta1, Beta2, WeightDecay]
        }
        SolverKind::Adadelta => &[Rho, WeightDecay, LearningRate],
        SolverKind::Asgd => &[LearningRate, Lambda, WeightDecay],
        SolverKind::NAdam => &[LearningRate, Beta1, Beta2, WeightDecay, Lambda],
        SolverKind::RmsProp => &[LearningRate, Rho, Momentum, WeightDecay],
        SolverKind::Rprop => &[LearningRate],
        SolverKind::Sgd => &[LearningRate, Momentum, WeightDecay],
    }
}

/// Solver id table for reports.
pub fn id_table() -> BTreeMap<u8, &'static str> {
    SolverKind::ALL.iter().map(|k| (k.id(), k.name())).collect()
}

/// A solver choice with its active parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub solver_id: u8,
    pub params: ActiveParams,
}

impl SolverSpec {
    pub fn new(kind: SolverKind, params: ActiveParams) -> Result<Self> {
        let spec = SolverSpec { solver_id: kind.id(), params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> Result<SolverKind> {
        SolverKind::from_id(self.solver_id)
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let declared = consumed_parameters(kind);
        if self.params.len() != declared.len() || declared.iter().any(|p| !self.params.contains_key(p)) {
            return Err(Error::invalid(format!(
                "{kind} consumes {:?}, got {:?}",
                declared,
                self.params.keys().collect::<Vec<_>>()
            )));
        }
        if let Some((p, v)) = self.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("{p} = {v} is not finite")));
        }
        Ok(())
    }

    /// Default configuration: the centre of every gene bound, except RMSprop
    /// whose sign-like steps need a small rate to settle.
    pub fn default_for(kind: SolverKind) -> Self {
        let bounds = HyperBounds::default();
        let mid = HyperparamVector::midrange(&bounds, kind);
        let mut params: ActiveParams = consumed_parameters(kind).iter().map(|&p| (p, mid.get(p))).collect();
        if kind == SolverKind::RmsProp {
            params.insert(Hyperparam::LearningRate, 0.01);
            params.insert(Hyperparam::Rho, 0.99);
            params.insert(Hyperparam::Momentum, 0.0);
        }
        SolverSpec { solver_id: kind.id(), params }
    }
}

/// Name and element count of one trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamShape {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Coefficients {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    rho: f64,
    momentum: f64,
    lambda: f64,
    // Whether the decay term is applied at all; false when weight_decay is 0.
    decay: bool,
}

/// Running state of one solver bound to one set of parameter tensors.
#[derive(Debug, Clone)]
pub struct SolverState {
    kind: SolverKind,
    coef: Coefficients,
    shapes: Vec<ParamShape>,
    /// `slots[s][t]` is slot `s` for tensor `t`.
    slots: Vec<Vec<Vec<f64>>>,
    step: u64,
    // NAdam running product of momentum coefficients.
    mu_product: f64,
    // ASGD step size and averaging coefficient.
    eta: f64,
    mu: f64,
}

/// Creates zero-initialised state for `spec` over tensors of the given shapes.
pub fn make_solver(spec: &SolverSpec, shapes: &[ParamShape]) -> Result<SolverState> {
    spec.validate()?;
    let kind = spec.kind()?;
    let p = |h| spec.params.get(&h).copied().unwrap_or(0.0);
    let coef = Coefficients {
        lr: p(Hyperparam::LearningRate),
        weight_decay: p(Hyperparam::WeightDecay),
        beta1: p(Hyperparam::Beta1).min(MAX_DECAY),
        beta2: p(Hyperparam::Beta2).min(MAX_DECAY),
        rho: p(Hyperparam::Rho),
        momentum: p(Hyperparam::Momentum),
        lambda: p(Hyperparam::Lambda),
        decay: p(Hyperparam::WeightDecay) != 0.0,
    };
    let mut slots: Vec<Vec<Vec<f64>>> =
        kind.slot_names().iter().map(|_| shapes.iter().map(|s| vec![0.0; s.len]).collect()).collect();
    if kind == SolverKind::Rprop {
        for t in &mut slots[1] {
            t.fill(coef.lr);
        }
    }
    Ok(SolverState { kind, coef, shapes: shapes.to_vec(), slots, step: 0, mu_product: 1.0, eta: coef.lr, mu: 1.0 })
}

impl SolverState {
    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Slot tensors by name, e.g. `"exp_avg"` for Adam.
    pub fn slot(&self, name: &str) -> Option<&[Vec<f64>]> {
        let idx = self.kind.slot_names().iter().position(|n| *n == name)?;
        Some(&self.slots[idx])
    }

    pub fn slot_names(&self) -> &'static [&'static str] {
        self.kind.slot_names()
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.shapes.len() || grads.len() != self.shapes.len() {
            return Err(Error::Shape(format!(
                "solver bound to {} tensors, got {} params / {} grads",
                self.shapes.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, shape) in self.shapes.iter().enumerate() {
            if params[i].len() != shape.len || grads[i].len() != shape.len {
                return Err(Error::Shape(format!("tensor `{}` expects {} elements", shape.name, shape.len)));
            }
            if grads[i].iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericFault { tensor: shape.name.clone() });
            }
        }

        self.step += 1;
        let t = self.step as f64;
        let c = self.coef;
        let step = self.step;

        // Scalar schedules shared by all tensors in this step.
        let (nadam_mu, nadam_mu_next) = if self.kind == SolverKind::NAdam {
            let mu = c.beta1 * (1.0 - 0.5 * 0.96f64.powf(t * c.lambda));
            let mu_next = c.beta1 * (1.0 - 0.5 * 0.96f64.powf((t + 1.0) * c.lambda));
            self.mu_product *= mu;
            (mu, mu_next)
        } else {
            (0.0, 0.0)
        };
        let asgd_eta = self.eta;
        let asgd_mu = self.mu;

        for (ti, (w, g_raw)) in params.iter_mut().zip(grads).enumerate() {
            match self.kind {
                SolverKind::Adam | SolverKind::AdamW => {
                    let decoupled = self.kind == SolverKind::AdamW;
                    let (m, rest) = self.slots.split_at_mut(1);
                    let (m, v) = (&mut m[0][ti], &mut rest[0][ti]);
                    let bc1 = 1.0 - c.beta1.powi(step as i32);
                    let bc2 = 1.0 - c.beta2.powi(step as i32);
                    let step_size = c.lr / bc1;
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            if decoupled {
                                w[j] *= 1.0 - c.lr * c.weight_decay;
                            } else {
                                g += c.weight_decay * w[j];
                            }
                        }
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                        let denom = (v[j] / bc2).sqrt() + EPSILON;
                        w[j] -= step_size * m[j] / denom;
                    }
                }
                SolverKind::Adadelta => {
                    let (sq, rest) = self.slots.split_at_mut(1);
                    let (sq, acc) = (&mut sq[0][ti], &mut rest[0][ti]);
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        sq[j] = c.rho * sq[j] + (1.0 - c.rho) * g * g;
                        let delta = (acc[j] + ADADELTA_EPSILON).sqrt() / (sq[j] + ADADELTA_EPSILON).sqrt() * g;
                        acc[j] = c.rho * acc[j] + (1.0 - c.rho) * delta * delta;
                        w[j] -= c.lr * delta;
                    }
                }
                SolverKind::Adamax => {
                    let (m, rest) = self.slots.split_at_mut(1);
                    let (m, u) = (&mut m[0][ti], &mut rest[0][ti]);
                    let clr = c.lr / (1.0 - c.beta1.powi(step as i32));
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                        u[j] = (c.beta2 * u[j]).max(g.abs() + EPSILON);
                        w[j] -= clr * m[j] / u[j];
                    }
                }
                SolverKind::Asgd => {
                    let ax = &mut self.slots[0][ti];
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        w[j] *= 1.0 - c.lambda * asgd_eta;
                        w[j] -= asgd_eta * g;
                        if asgd_mu != 1.0 {
                            ax[j] += (w[j] - ax[j]) * asgd_mu;
                        } else {
                            ax[j] = w[j];
                        }
                    }
                }
                SolverKind::NAdam => {
                    let (m, rest) = self.slots.split_at_mut(1);
                    let (m, v) = (&mut m[0][ti], &mut rest[0][ti]);
                    let bc2 = 1.0 - c.beta2.powi(step as i32);
                    let grad_coef = c.lr * (1.0 - nadam_mu) / (1.0 - self.mu_product);
                    let mom_coef = c.lr * nadam_mu_next / (1.0 - self.mu_product * nadam_mu_next);
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                        let denom = (v[j] / bc2).sqrt() + EPSILON;
                        w[j] -= grad_coef * g / denom;
                        w[j] -= mom_coef * m[j] / denom;
                    }
                }
                SolverKind::RAdam => {
                    let (m, rest) = self.slots.split_at_mut(1);
                    let (m, v) = (&mut m[0][ti], &mut rest[0][ti]);
                    let b2t = c.beta2.powi(step as i32);
                    let bc1 = 1.0 - c.beta1.powi(step as i32);
                    let bc2 = 1.0 - b2t;
                    let rho_inf = 2.0 / (1.0 - c.beta2) - 1.0;
                    let rho_t = rho_inf - 2.0 * t * b2t / bc2;
                    let rect = if rho_t > 5.0 {
                        Some(
                            ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                                .sqrt(),
                        )
                    } else {
                        None
                    };
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                        let m_hat = m[j] / bc1;
                        match rect {
                            Some(r) => {
                                let adaptive = bc2.sqrt() / (v[j].sqrt() + EPSILON);
                                w[j] -= m_hat * c.lr * adaptive * r;
                            }
                            None => w[j] -= m_hat * c.lr,
                        }
                    }
                }
                SolverKind::RmsProp => {
                    let (sq, rest) = self.slots.split_at_mut(1);
                    let (sq, buf) = (&mut sq[0][ti], &mut rest[0][ti]);
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        sq[j] = c.rho * sq[j] + (1.0 - c.rho) * g * g;
                        let avg = sq[j].sqrt() + EPSILON;
                        if c.momentum > 0.0 {
                            buf[j] = c.momentum * buf[j] + g / avg;
                            w[j] -= c.lr * buf[j];
                        } else {
                            w[j] -= c.lr * g / avg;
                        }
                    }
                }
                SolverKind::Rprop => {
                    let (prev, rest) = self.slots.split_at_mut(1);
                    let (prev, steps) = (&mut prev[0][ti], &mut rest[0][ti]);
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        let agreement = g * prev[j];
                        if agreement > 0.0 {
                            steps[j] = (steps[j] * RPROP_ETA_PLUS).min(RPROP_STEP_MAX);
                        } else if agreement < 0.0 {
                            steps[j] = (steps[j] * RPROP_ETA_MINUS).max(RPROP_STEP_MIN);
                            g = 0.0;
                        } else {
                            steps[j] = steps[j].clamp(RPROP_STEP_MIN, RPROP_STEP_MAX);
                        }
                        if g > 0.0 {
                            w[j] -= steps[j];
                        } else if g < 0.0 {
                            w[j] += steps[j];
                        }
                        prev[j] = g;
                    }
                }
                SolverKind::Sgd => {
                    let buf = &mut self.slots[0][ti];
                    for j in 0..w.len() {
                        let mut g = g_raw[j];
                        if c.decay {
                            g += c.weight_decay * w[j];
                        }
                        if c.momentum != 0.0 {
                            buf[j] = if step == 1 { g } else { c.momentum * buf[j] + g };
                            g = buf[j];
                        }
                        w[j] -= c.lr * g;
                    }
                }
            }
        }

        if self.kind == SolverKind::Asgd {
            self.eta = c.lr / (1.0 + c.lambda * c.lr * t).powf(ASGD_ALPHA);
            self.mu = 1.0 / (t - ASGD_T0).max(1.0);
        }
        Ok(())
    }
}
