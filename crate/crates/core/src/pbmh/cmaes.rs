//! (μ/μ_w, λ)-CMA-ES in coordinates normalized to the unit box.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{argmin, initial_population, ranking, Budget};
use crate::error::Result;

/// Initial step size as a fraction of each range.
pub(super) const SIGMA0: f64 = 0.3;

pub(super) fn run(budget: &mut Budget<'_>, rng: &mut ChaCha8Rng, lambda: usize, warm: Option<&[f64]>) -> Result<()> {
    let (xs, fs) = initial_population(budget, rng, lambda, warm)?;
    let bounds = budget.bounds().to_vec();
    let n = bounds.len();
    let nf = n as f64;
    let to_unit = |x: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            n,
            x.iter().zip(&bounds).map(|(&v, b)| if b.width() > 0.0 { (v - b.lo) / b.width() } else { 0.5 }),
        )
    };
    let from_unit =
        |z: &DVector<f64>| -> Vec<f64> { z.iter().zip(&bounds).map(|(&u, b)| b.lo + u * b.width()).collect() };

    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let sum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let damps = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = to_unit(&xs[argmin(&fs)]);
    let mut sigma = SIGMA0;
    let mut c = DMatrix::<f64>::identity(n, n);
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);
    let mut generation = 0usize;

    while !budget.exhausted() {
        generation += 1;
        let eig = SymmetricEigen::new(c.clone());
        let b = eig.eigenvectors;
        let d = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let mut ys = Vec::with_capacity(lambda);
        let mut cand = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &b * z.component_mul(&d);
            let u = (&mean + sigma * &y).map(|v| v.clamp(0.0, 1.0));
            // Repair: learn from the step actually taken.
            ys.push((&u - &mean) / sigma);
            cand.push(from_unit(&u));
        }
        let cf = budget.eval_batch(&mut cand)?;
        let order = ranking(&cf);

        let old_mean = mean.clone();
        let mut y_w = DVector::<f64>::zeros(n);
        for (w, &i) in weights.iter().zip(&order) {
            y_w += *w * &ys[i];
        }
        mean = (&old_mean + sigma * &y_w).map(|v| v.clamp(0.0, 1.0));

        let inv_sqrt_c = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mu_eff).sqrt() * (&inv_sqrt_c * &y_w);
        let ps_norm = ps.norm();
        let h_sig = ps_norm / (1.0 - (1.0 - cs).powi(2 * generation as i32)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let h = if h_sig { 1.0 } else { 0.0 };
        pc = (1.0 - cc) * &pc + h * (cc * (2.0 - cc) * mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &i) in weights.iter().zip(&order) {
            rank_mu += *w * &ys[i] * ys[i].transpose();
        }
        let delta_h = (1.0 - h) * cc * (2.0 - cc);
        c = (1.0 - c1 - cmu + c1 * delta_h) * &c + c1 * &pc * pc.transpose() + cmu * rank_mu;
        c = (&c + c.transpose()) * 0.5;

        sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();
        sigma = sigma.clamp(1e-12, 1.0);
        if !c.iter().all(|v| v.is_finite()) {
            c = DMatrix::identity(n, n);
            pc.fill(0.0);
            ps.fill(0.0);
        }
    }
    Ok(())
}
