//! Differential evolution (current-to-rand/1/bin) and its self-adaptive
//! population variant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{argmax, de_select, distinct, initial_population, Budget};
use crate::error::Result;

pub(super) const F: f64 = 0.8;
pub(super) const CR: f64 = 0.9;
pub(super) const SAPDE_MIN_POP: usize = 4;

/// Binomial crossover of `donor` into `target`; one gene always comes from
/// the donor.
pub(super) fn binomial(target: &[f64], donor: &[f64], cr: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let jrand = rng.random_range(0..target.len());
    target
        .iter()
        .zip(donor)
        .enumerate()
        .map(|(j, (&t, &d))| if j == jrand || rng.random::<f64>() < cr { d } else { t })
        .collect()
}

pub(super) fn run_de(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let (mut xs, mut fs) = initial_population(budget, rng, n, warm)?;
    while !budget.exhausted() {
        let mut trials = Vec::with_capacity(n);
        for i in 0..n {
            let r = distinct(rng, n, &[i], 3);
            let k: f64 = rng.random();
            let donor: Vec<f64> = (0..budget.dim())
                .map(|j| xs[i][j] + k * (xs[r[0]][j] - xs[i][j]) + F * (xs[r[1]][j] - xs[r[2]][j]))
                .collect();
            trials.push(binomial(&xs[i], &donor, CR, rng));
        }
        let tf = budget.eval_batch(&mut trials)?;
        for (i, (t, f)) in trials.into_iter().zip(tf).enumerate() {
            if de_select(f, fs[i]) {
                xs[i] = t;
                fs[i] = f;
            }
        }
    }
    Ok(())
}

#[derive(Clone)]
struct Member {
    x: Vec<f64>,
    f: f64,
    scale: f64,
    cr: f64,
    size: f64,
}

/// Self-adaptive population DE, absolute-encoding variant: each member
/// carries its own scale factor, crossover rate and population-size vote,
/// all evolved alongside the position.
pub(super) fn run_sapde(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, n: usize, warm: Option<&[f64]>) -> Result<()> {
    let (xs, fs) = initial_population(budget, rng, n, warm)?;
    let mut pop: Vec<Member> = xs
        .into_iter()
        .zip(fs)
        .map(|(x, f)| Member {
            x,
            f,
            scale: rng.random(),
            cr: rng.random(),
            size: n as f64 + rng.sample::<f64, _>(StandardNormal),
        })
        .collect();
    let max_pop = 2 * n;
    while !budget.exhausted() {
        let np = pop.len();
        let mut children = Vec::with_capacity(np);
        for i in 0..np {
            let r = distinct(rng, np, &[i], 3);
            let (a, b, c) = (&pop[r[0]], &pop[r[1]], &pop[r[2]]);
            let g: f64 = rng.sample(StandardNormal);
            let scale = (a.scale + g * (b.scale - c.scale)).abs().clamp(1e-3, 1.0);
            let cr = (a.cr + g * (b.cr - c.cr)).abs().min(1.0);
            let size = (a.size + g * (b.size - c.size)).abs();
            let donor: Vec<f64> = (0..budget.dim()).map(|j| a.x[j] + scale * (b.x[j] - c.x[j])).collect();
            let x = binomial(&pop[i].x, &donor, cr, rng);
            children.push(Member { x, f: f64::INFINITY, scale, cr, size });
        }
        let mut cx: Vec<Vec<f64>> = children.iter().map(|c| c.x.clone()).collect();
        let cf = budget.eval_batch(&mut cx)?;
        for (i, ((mut child, x), f)) in children.into_iter().zip(cx).zip(cf).enumerate() {
            if de_select(f, pop[i].f) {
                child.x = x;
                child.f = f;
                pop[i] = child;
            }
        }
        let mean = pop.iter().map(|m| m.size).sum::<f64>() / pop.len() as f64;
        let target = (mean.round() as usize).clamp(SAPDE_MIN_POP, max_pop);
        while pop.len() > target {
            let fs: Vec<f64> = pop.iter().map(|m| m.f).collect();
            pop.remove(argmax(&fs));
        }
        while pop.len() < target {
            let k = rng.random_range(0..pop.len());
            pop.push(pop[k].clone());
        }
    }
    Ok(())
}
