//! Adaptive differential evolution: JADE and the success-history pair
//! SHADE / LSHADE.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};

use super::de::binomial;
use super::{argmax, de_select, distinct, initial_population, ranking, Budget};
use crate::error::Result;

pub(super) const JADE_C: f64 = 0.1;
pub(super) const JADE_P: f64 = 0.1;
pub(super) const JADE_WINDOW: usize = 50;
pub(super) const HISTORY: usize = 50;
pub(super) const LSHADE_MIN_POP: usize = 4;

/// Population size after `nfe` of `max_nfe` evaluations under linear
/// reduction from `init` to `min`.
pub fn lshade_target_size(init: usize, min: usize, nfe: usize, max_nfe: usize) -> usize {
    if max_nfe == 0 {
        return min;
    }
    let size = (min as f64 - init as f64) / max_nfe as f64 * nfe.min(max_nfe) as f64 + init as f64;
    (size.round() as usize).clamp(min.min(init), init.max(min))
}

fn sample_cr(rng: &mut ChaCha8Rng, mu: f64) -> f64 {
    Normal::new(mu, 0.1).expect("positive sd").sample(rng).clamp(0.0, 1.0)
}

/// Cauchy draw, redrawn while non-positive and capped at 1.
fn sample_f(rng: &mut ChaCha8Rng, mu: f64) -> f64 {
    let dist = Cauchy::new(mu, 0.1).expect("positive scale");
    loop {
        let f = dist.sample(rng);
        if f > 0.0 {
            return f.min(1.0);
        }
    }
}

fn lehmer_mean(values: &[f64], weights: &[f64]) -> f64 {
    let num: f64 = values.iter().zip(weights).map(|(v, w)| w * v * v).sum();
    let den: f64 = values.iter().zip(weights).map(|(v, w)| w * v).sum();
    num / den
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v).sum::<f64>() / weights.iter().sum::<f64>()
}

/// current-to-pbest/1 donor; `r2` indexes the population followed by the
/// archive.
fn pbest_donor(
    xs: &[Vec<f64>],
    archive: &[Vec<f64>],
    i: usize,
    pbest: usize,
    f: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = xs.len();
    let r1 = distinct(rng, n, &[i], 1)[0];
    let r2 = distinct(rng, n + archive.len(), &[i, r1], 1)[0];
    let x2 = if r2 < n { &xs[r2] } else { &archive[r2 - n] };
    (0..xs[i].len()).map(|j| xs[i][j] + f * (xs[pbest][j] - xs[i][j]) + f * (xs[r1][j] - x2[j])).collect()
}

fn push_archive(archive: &mut Vec<Vec<f64>>, x: Vec<f64>, cap: usize, rng: &mut ChaCha8Rng) {
    archive.push(x);
    while archive.len() > cap {
        let k = rng.random_range(0..archive.len());
        archive.swap_remove(k);
    }
}

/// JADE with an archive. Each member picks between current-to-pbest/1 and
/// current-to-rand/1 in proportion to their success ratios over the recent
/// window of generations.
pub(super) fn run_jade(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let (mut xs, mut fs) = initial_population(budget, rng, n, warm)?;
    let mut archive: Vec<Vec<f64>> = Vec::new();
    let (mut mu_cr, mut mu_f) = (0.5, 0.5);
    // Per generation: (successes, failures) for each strategy.
    let mut window: VecDeque<[(usize, usize); 2]> = VecDeque::new();
    while !budget.exhausted() {
        let ratio = |k: usize| {
            let (s, f) = window.iter().fold((0, 0), |acc, g| (acc.0 + g[k].0, acc.1 + g[k].1));
            if s + f == 0 {
                0.5
            } else {
                s as f64 / (s + f) as f64 + 0.01
            }
        };
        let p_pbest = ratio(0) / (ratio(0) + ratio(1));
        let top = ((JADE_P * n as f64).round() as usize).max(1);
        let order = ranking(&fs);
        let mut trials = Vec::with_capacity(n);
        let mut params = Vec::with_capacity(n);
        for i in 0..n {
            let cr = sample_cr(rng, mu_cr);
            let f = sample_f(rng, mu_f);
            let strategy = usize::from(rng.random::<f64>() >= p_pbest);
            let donor = if strategy == 0 {
                let pbest = order[rng.random_range(0..top)];
                pbest_donor(&xs, &archive, i, pbest, f, rng)
            } else {
                let r = distinct(rng, n, &[i], 3);
                let k: f64 = rng.random();
                (0..xs[i].len())
                    .map(|j| xs[i][j] + k * (xs[r[0]][j] - xs[i][j]) + f * (xs[r[1]][j] - xs[r[2]][j]))
                    .collect()
            };
            trials.push(binomial(&xs[i], &donor, cr, rng));
            params.push((cr, f, strategy));
        }
        let tf = budget.eval_batch(&mut trials)?;
        let mut s_cr = Vec::new();
        let mut s_f = Vec::new();
        let mut counts = [(0, 0); 2];
        for (i, (t, ft)) in trials.into_iter().zip(tf).enumerate() {
            let (cr, f, strategy) = params[i];
            if ft < fs[i] {
                s_cr.push(cr);
                s_f.push(f);
                counts[strategy].0 += 1;
                push_archive(&mut archive, std::mem::take(&mut xs[i]), n, rng);
            } else {
                counts[strategy].1 += 1;
            }
            if de_select(ft, fs[i]) {
                xs[i] = t;
                fs[i] = ft;
            }
        }
        window.push_back(counts);
        if window.len() > JADE_WINDOW {
            window.pop_front();
        }
        if !s_cr.is_empty() {
            let ones = vec![1.0; s_f.len()];
            mu_cr = (1.0 - JADE_C) * mu_cr + JADE_C * s_cr.iter().sum::<f64>() / s_cr.len() as f64;
            mu_f = (1.0 - JADE_C) * mu_f + JADE_C * lehmer_mean(&s_f, &ones);
        }
    }
    Ok(())
}

/// SHADE, or LSHADE when `reduce` shrinks the population linearly in
/// evaluations.
pub(super) fn run_shade(
    budget: &mut Budget<'_>,
    rng: &mut ChaCha8Rng,
    n_init: usize,
    warm: Option<&[f64]>,
    reduce: bool,
) -> Result<()> {
    let (mut xs, mut fs) = initial_population(budget, rng, n_init, warm)?;
    let mut archive: Vec<Vec<f64>> = Vec::new();
    // None marks the terminal crossover value: once all successful CR were
    // zero, later draws from that slot are zero.
    let mut m_cr: Vec<Option<f64>> = vec![Some(0.5); HISTORY];
    let mut m_f = vec![0.5; HISTORY];
    let mut k = 0;
    while !budget.exhausted() {
        let n = xs.len();
        let order = ranking(&fs);
        let p_min = 2.0 / n as f64;
        let mut trials = Vec::with_capacity(n);
        let mut params = Vec::with_capacity(n);
        for i in 0..n {
            let r = rng.random_range(0..HISTORY);
            let cr = m_cr[r].map_or(0.0, |mu| sample_cr(rng, mu));
            let f = sample_f(rng, m_f[r]);
            let p = rng.random_range(p_min..=0.2f64.max(p_min));
            let top = ((p * n as f64).round() as usize).clamp(1, n);
            let pbest = order[rng.random_range(0..top)];
            let donor = pbest_donor(&xs, &archive, i, pbest, f, rng);
            trials.push(binomial(&xs[i], &donor, cr, rng));
            params.push((cr, f));
        }
        let tf = budget.eval_batch(&mut trials)?;
        let (mut s_cr, mut s_f, mut delta) = (Vec::new(), Vec::new(), Vec::new());
        for (i, (t, ft)) in trials.into_iter().zip(tf).enumerate() {
            if ft < fs[i] {
                s_cr.push(params[i].0);
                s_f.push(params[i].1);
                delta.push(fs[i] - ft);
                push_archive(&mut archive, std::mem::take(&mut xs[i]), n, rng);
            }
            if de_select(ft, fs[i]) {
                xs[i] = t;
                fs[i] = ft;
            }
        }
        // Infinite improvements (from unevaluated incumbents) carry no
        // usable weight.
        if !s_cr.is_empty() && delta.iter().all(|d| d.is_finite()) && delta.iter().sum::<f64>() > 0.0 {
            let total: f64 = delta.iter().sum();
            let w: Vec<f64> = delta.iter().map(|d| d / total).collect();
            m_cr[k] = match m_cr[k] {
                Some(_) if s_cr.iter().any(|&c| c > 0.0) => Some(weighted_mean(&s_cr, &w)),
                _ => None,
            };
            m_f[k] = lehmer_mean(&s_f, &w);
            k = (k + 1) % HISTORY;
        }
        if reduce {
            let target = lshade_target_size(n_init, LSHADE_MIN_POP, budget.used(), budget.max());
            while xs.len() > target {
                let worst = argmax(&fs);
                xs.swap_remove(worst);
                fs.swap_remove(worst);
            }
            while archive.len() > xs.len() {
                let r = rng.random_range(0..archive.len());
                archive.swap_remove(r);
            }
        }
    }
    Ok(())
}
