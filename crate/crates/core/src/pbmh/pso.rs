//! Particle swarm family.
#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    aiwf, argmax, argmin, clpso_learning_probability, clpso_velocity, initial_population, logistic_map,
    ppso_next_theta, ppso_velocity, pso_velocity, tournament_winner, Budget,
};
use crate::error::Result;

pub(super) const C: f64 = 2.05;
pub(super) const W_START: f64 = 0.9;
pub(super) const W_END: f64 = 0.4;
pub(super) const HPSO_STAGNATION: usize = 5;
pub(super) const CLS_POINTS: usize = 10;
pub(super) const CLS_RADIUS: f64 = 0.1;
pub(super) const CLPSO_C: f64 = 1.49445;
pub(super) const CLPSO_GAP: usize = 7;

struct Swarm {
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    f: Vec<f64>,
    p: Vec<Vec<f64>>,
    pf: Vec<f64>,
    /// Generations since each personal best last improved.
    stale: Vec<usize>,
    widths: Vec<f64>,
}

impl Swarm {
    fn new(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<Self> {
        let (x, f) = initial_population(budget, rng, n, warm)?;
        let widths: Vec<f64> = budget.bounds().iter().map(|b| b.width()).collect();
        let v = (0..n)
            .map(|_| widths.iter().map(|&w| if w > 0.0 { rng.random_range(-w..=w) * 0.1 } else { 0.0 }).collect())
            .collect();
        Ok(Swarm { p: x.clone(), pf: f.clone(), x, v, f, stale: vec![0; n], widths })
    }

    fn len(&self) -> usize {
        self.x.len()
    }

    fn gbest(&self) -> usize {
        argmin(&self.pf)
    }

    fn clamp_velocity(&mut self, i: usize) {
        for (v, &w) in self.v[i].iter_mut().zip(&self.widths) {
            *v = v.clamp(-w, w);
        }
    }

    /// Moves every particle by its velocity, evaluates, and updates the
    /// personal bests.
    fn advance(&mut self, budget: &mut Budget<'_>) -> Result<()> {
        let mut moved: Vec<Vec<f64>> =
            self.x.iter().zip(&self.v).map(|(x, v)| x.iter().zip(v).map(|(a, b)| a + b).collect()).collect();
        let fs = budget.eval_batch(&mut moved)?;
        for (i, (x, f)) in moved.into_iter().zip(fs).enumerate() {
            if f == f64::INFINITY && budget.exhausted() {
                continue;
            }
            self.x[i] = x;
            self.f[i] = f;
            if f < self.pf[i] {
                self.p[i] = self.x[i].clone();
                self.pf[i] = f;
                self.stale[i] = 0;
            } else {
                self.stale[i] += 1;
            }
        }
        Ok(())
    }
}

pub(super) fn run_pso(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let mut s = Swarm::new(budget, rng, n, warm)?;
    while !budget.exhausted() {
        let w = W_START - (W_START - W_END) * budget.progress();
        let g = s.p[s.gbest()].clone();
        for i in 0..s.len() {
            for d in 0..g.len() {
                let (r1, r2) = (rng.random(), rng.random());
                s.v[i][d] = pso_velocity(s.v[i][d], s.x[i][d], s.p[i][d], g[d], w, C, C, r1, r2);
            }
            s.clamp_velocity(i);
        }
        s.advance(budget)?;
    }
    Ok(())
}

/// Self-organizing hierarchical PSO with time-varying acceleration: no
/// inertia term, mutation keeps velocities alive and stagnant particles get
/// fresh velocities.
pub(super) fn run_hpso(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let mut s = Swarm::new(budget, rng, n, warm)?;
    let dim = budget.dim();
    let p_mut = 1.0 / dim as f64;
    while !budget.exhausted() {
        let t = budget.progress();
        let c1 = 2.5 - 2.0 * t;
        let c2 = 0.5 + 2.0 * t;
        let step = 1.0 - 0.9 * t;
        let g = s.p[s.gbest()].clone();
        for i in 0..s.len() {
            let reinit = s.stale[i] >= HPSO_STAGNATION;
            for d in 0..dim {
                let w = s.widths[d];
                s.v[i][d] = if reinit && w > 0.0 {
                    rng.random_range(-1.0..=1.0) * step * w
                } else {
                    let (r1, r2) = (rng.random(), rng.random());
                    pso_velocity(s.v[i][d], s.x[i][d], s.p[i][d], g[d], 0.0, c1, c2, r1, r2)
                };
                if rng.random_bool(p_mut) {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    s.v[i][d] += sign * rng.random::<f64>() * step * w;
                }
            }
            if reinit {
                s.stale[i] = 0;
            }
            s.clamp_velocity(i);
        }
        s.advance(budget)?;
    }
    Ok(())
}

/// PSO with adaptive inertia and a chaotic local search around the global
/// best after every generation.
pub(super) fn run_cpso(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let mut s = Swarm::new(budget, rng, n, warm)?;
    let dim = budget.dim();
    while !budget.exhausted() {
        let finite: Vec<f64> = s.f.iter().copied().filter(|f| f.is_finite()).collect();
        let f_avg = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        let f_min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let g = s.p[s.gbest()].clone();
        for i in 0..s.len() {
            let w = aiwf(s.f[i], f_avg, f_min, W_END, W_START);
            for d in 0..dim {
                let (r1, r2) = (rng.random(), rng.random());
                s.v[i][d] = pso_velocity(s.v[i][d], s.x[i][d], s.p[i][d], g[d], w, C, C, r1, r2);
            }
            s.clamp_velocity(i);
        }
        s.advance(budget)?;

        let gi = s.gbest();
        let center = s.p[gi].clone();
        let radius = (CLS_RADIUS * (1.0 - budget.progress())).max(1e-3);
        // Seeds away from the map's fixed and periodic points.
        let mut z: Vec<f64> = (0..dim).map(|_| rng.random_range(0.01..0.99)).collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..CLS_POINTS {
            if budget.exhausted() {
                break;
            }
            for zj in z.iter_mut() {
                *zj = logistic_map(*zj);
                if !(1e-9..=1.0 - 1e-9).contains(zj) {
                    *zj = rng.random_range(0.01..0.99);
                }
            }
            let mut cand: Vec<f64> = (0..dim).map(|j| center[j] + radius * s.widths[j] * (2.0 * z[j] - 1.0)).collect();
            let f = budget.eval(&mut cand)?;
            if best.as_ref().is_none_or(|b| f < b.1) {
                best = Some((cand, f));
            }
        }
        if let Some((x, f)) = best {
            if f < s.pf[gi] {
                let worst = argmax(&s.f);
                s.x[worst] = x.clone();
                s.f[worst] = f;
                s.p[worst] = x;
                s.pf[worst] = f;
                s.stale[worst] = 0;
            }
        }
    }
    Ok(())
}

/// Comprehensive-learning PSO: each dimension learns from its own or a
/// tournament-chosen peer's personal best.
pub(super) fn run_clpso(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let mut s = Swarm::new(budget, rng, n, warm)?;
    let dim = budget.dim();
    let pc: Vec<f64> = (0..n).map(|i| clpso_learning_probability(i, n)).collect();
    let mut exemplars: Vec<Vec<usize>> = (0..n).map(|i| choose_exemplar(i, pc[i], &s.pf, dim, rng)).collect();
    while !budget.exhausted() {
        let w = W_START - (W_START - W_END) * budget.progress();
        for i in 0..n {
            if s.stale[i] >= CLPSO_GAP {
                exemplars[i] = choose_exemplar(i, pc[i], &s.pf, dim, rng);
                s.stale[i] = 0;
            }
            for d in 0..dim {
                let e = s.p[exemplars[i][d]][d];
                s.v[i][d] = clpso_velocity(s.v[i][d], s.x[i][d], e, w, CLPSO_C, rng.random());
            }
            s.clamp_velocity(i);
        }
        s.advance(budget)?;
    }
    Ok(())
}

/// Per-dimension source particle for particle `i`.
fn choose_exemplar(i: usize, pc: f64, pf: &[f64], dim: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = pf.len();
    let peer = |rng: &mut ChaCha8Rng| {
        let others = super::distinct(rng, n, &[i], 2);
        tournament_winner(others[0], others[1], pf)
    };
    let mut e: Vec<usize> = (0..dim).map(|_| if rng.random::<f64>() < pc { peer(rng) } else { i }).collect();
    if e.iter().all(|&k| k == i) {
        let d = rng.random_range(0..dim);
        e[d] = peer(rng);
    }
    e
}

/// Phasor PSO: phase angles replace inertia and acceleration constants.
pub(super) fn run_ppso(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let mut s = Swarm::new(budget, rng, n, warm)?;
    let mut theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    while !budget.exhausted() {
        let g = s.p[s.gbest()].clone();
        for i in 0..n {
            for d in 0..g.len() {
                s.v[i][d] = ppso_velocity(theta[i], s.x[i][d], s.p[i][d], g[d]);
            }
            s.clamp_velocity(i);
            theta[i] = ppso_next_theta(theta[i]);
        }
        s.advance(budget)?;
    }
    Ok(())
}
