use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Gaussian class blobs for desk-scale experiments.
///
/// Class `c` has unit-variance noise around `separation / √2 · u_c`, where
/// the `u_c` are random orthonormal directions, so any two class means are
/// exactly `separation` apart and the class signal is spread over all
/// features. Rows cycle through the classes, giving counts that differ by at
/// most one.
pub fn synthesize(n: usize, p: usize, n_classes: usize, separation: f64, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || p == 0 || n_classes == 0 {
        return Err(Error::invalid("n, p and n_classes must all be at least 1"));
    }
    if n_classes > 3 {
        return Err(Error::invalid("datasets carry at most 3 energy classes"));
    }
    if p < n_classes {
        return Err(Error::invalid(format!("{p} features cannot separate {n_classes} classes")));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::invalid(format!("separation {separation} must be finite and non-negative")));
    }
    let offset = separation / std::f64::consts::SQRT_2;
    let mut frame_rng = ChaCha8Rng::seed_from_u64(seed);
    frame_rng.set_stream(1);
    let centers: Vec<Vec<f64>> = orthonormal_frame(p, n_classes, &mut frame_rng)
        .into_iter()
        .map(|u| u.iter().map(|v| offset * v).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, p));
    let mut y = Vec::with_capacity(n);
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let class = i % n_classes;
        for (v, c) in row.iter_mut().zip(&centers[class]) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *v = c + noise;
        }
        y.push(class);
    }
    let names = (0..p).map(|j| format!("f{j}")).collect();
    LabeledDataset::new(x, y, names)
}

/// `k` orthonormal vectors in `R^p` by Gram-Schmidt on Gaussian draws.
fn orthonormal_frame(p: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    while frame.len() < k {
        let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        for u in &frame {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= d * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            frame.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_counts() {
        let ds = synthesize(600, 12, 3, 4.0, 1).unwrap();
        assert_eq!(ds.class_counts(), [200, 200, 200]);
        let ds = synthesize(601, 5, 3, 4.0, 1).unwrap();
        assert_eq!(ds.class_counts(), [201, 200, 200]);
    }

    #[test]
    fn seeded() {
        assert_eq!(synthesize(50, 4, 3, 2.0, 9).unwrap(), synthesize(50, 4, 3, 2.0, 9).unwrap());
    }

    #[test]
    fn zero_separation_has_identical_class_laws() {
        // With no offset the generator never looks at the label, so the
        // features are the same noise draws whatever the class layout.
        let a = synthesize(90, 3, 3, 0.0, 4).unwrap();
        let b = synthesize(90, 3, 1, 0.0, 4).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn class_means_are_separation_apart() {
        let ds = synthesize(30_000, 6, 3, 4.0, 2).unwrap();
        let mut means = vec![vec![0.0; 6]; 3];
        for (row, &c) in ds.x.rows().into_iter().zip(&ds.y) {
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v / 10_000.0;
            }
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let d: f64 = means[a].iter().zip(&means[b]).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            assert!((d - 4.0).abs() < 0.1, "distance {d}");
        }
    }

    #[test]
    fn signal_reaches_every_feature() {
        let ds = synthesize(30_000, 12, 3, 4.0, 5).unwrap();
        let mut means = vec![vec![0.0; 12]; 3];
        for (row, &c) in ds.x.rows().into_iter().zip(&ds.y) {
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v / 10_000.0;
            }
        }
        let moved = (0..12).filter(|&j| means.iter().any(|m| m[j].abs() > 0.05)).count();
        assert!(moved >= 10, "only {moved} features carry class signal");
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(synthesize(0, 1, 1, 1.0, 0).is_err());
        assert!(synthesize(1, 0, 1, 1.0, 0).is_err());
        assert!(synthesize(1, 1, 0, 1.0, 0).is_err());
        assert!(synthesize(10, 2, 3, 1.0, 0).is_err());
    }
}
