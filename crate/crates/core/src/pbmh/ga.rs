//! Generational GA with an elite slot, and the memetic variant that adds a
//! Gaussian hill climb to some offspring.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{argmin, initial_population, tournament_winner, Budget};
use crate::error::Result;

pub(super) const CROSSOVER_PROB: f64 = 0.95;
pub(super) const MUTATION_PROB: f64 = 0.05;
pub(super) const MUTATION_SIGMA: f64 = 0.1;
pub(super) const LOCAL_SEARCH_PROB: f64 = 0.5;
pub(super) const LOCAL_SEARCH_TRIALS: usize = 5;
pub(super) const LOCAL_SEARCH_SIGMA: f64 = 0.05;

fn tournament(fs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let i = rng.random_range(0..fs.len());
    let j = rng.random_range(0..fs.len());
    tournament_winner(i, j, fs)
}

pub(super) fn run(
    budget: &mut Budget<'_>,
    rng: &mut ChaCha8Rng,
    n: usize,
    warm: Option<&[f64]>,
    memetic: bool,
) -> Result<()> {
    let (mut xs, mut fs) = initial_population(budget, rng, n, warm)?;
    let widths: Vec<f64> = budget.bounds().iter().map(|b| b.width()).collect();
    while !budget.exhausted() {
        let elite = argmin(&fs);
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        for _ in 1..n {
            let a = &xs[tournament(&fs, rng)];
            let b = &xs[tournament(&fs, rng)];
            let mut child = if rng.random_bool(CROSSOVER_PROB) {
                a.iter().zip(b).map(|(&u, &v)| if rng.random_bool(0.5) { u } else { v }).collect()
            } else {
                a.clone()
            };
            for (g, w) in child.iter_mut().zip(&widths) {
                if rng.random_bool(MUTATION_PROB) {
                    *g += MUTATION_SIGMA * w * rng.sample::<f64, _>(StandardNormal);
                }
            }
            children.push(child);
        }
        let mut child_fs = budget.eval_batch(&mut children)?;
        if memetic {
            for (child, f) in children.iter_mut().zip(child_fs.iter_mut()) {
                if budget.exhausted() || !rng.random_bool(LOCAL_SEARCH_PROB) {
                    continue;
                }
                for _ in 0..LOCAL_SEARCH_TRIALS {
                    let mut trial: Vec<f64> = child
                        .iter()
                        .zip(&widths)
                        .map(|(&g, w)| g + LOCAL_SEARCH_SIGMA * w * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let ft = budget.eval(&mut trial)?;
                    if ft < *f {
                        *child = trial;
                        *f = ft;
                    }
                }
            }
        }
        let mut next_xs = vec![xs[elite].clone()];
        let mut next_fs = vec![fs[elite]];
        next_xs.extend(children);
        next_fs.extend(child_fs);
        xs = next_xs;
        fs = next_fs;
    }
    Ok(())
}
