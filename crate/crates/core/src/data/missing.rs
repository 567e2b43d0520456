use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LabeledDataset, MaskedDataset};
use crate::error::{Error, Result};

pub const MAX_MISSING_RATE: f64 = 0.95;

/// Number of entries concealed at `rate` on an `n × p` grid: `floor(rate·n·p)`.
pub fn missing_count(rate: f64, n: usize, p: usize) -> usize {
    let exact = rate * (n * p) as f64;
    // Guard against products such as 0.05 * 18400 = 919.9999...
    (exact + 1e-9 * exact.max(1.0)).floor() as usize
}

/// Conceals exactly `floor(rate·n·p)` entries chosen uniformly without replacement.
pub fn inject_missing(ds: &LabeledDataset, rate: f64, seed: u64) -> Result<MaskedDataset> {
    if !(0.0..=MAX_MISSING_RATE).contains(&rate) {
        return Err(Error::invalid(format!("missing rate {rate} outside [0, {MAX_MISSING_RATE}]")));
    }
    let (n, p) = ds.x.dim();
    let total = n * p;
    let k = missing_count(rate, n, p).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masked = ds.fully_observed();
    let x = masked.x.as_slice_mut().expect("standard layout");
    let mask = masked.mask.as_slice_mut().expect("standard layout");
    for idx in rand::seq::index::sample(&mut rng, total, k) {
        mask[idx] = 0;
        x[idx] = 0.0;
    }
    Ok(masked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn dataset(n: usize, p: usize) -> LabeledDataset {
        let x = Array2::from_shape_fn((n, p), |(i, j)| 1.0 + (i * p + j) as f64);
        LabeledDataset::new(x, vec![0; n], (0..p).map(|j| format!("f{j}")).collect()).unwrap()
    }

    #[test]
    fn zero_rate_is_identity() {
        let ds = dataset(10, 4);
        let m = inject_missing(&ds, 0.0, 3).unwrap();
        assert!(m.mask.iter().all(|&v| v == 1));
        assert_eq!(m.x, ds.x);
    }

    #[test]
    fn five_percent_of_18400() {
        let ds = dataset(800, 23);
        let m = inject_missing(&ds, 0.05, 11).unwrap();
        assert_eq!(m.missing_entries(), 920);
    }

    #[test]
    fn seeded() {
        let ds = dataset(50, 7);
        assert_eq!(inject_missing(&ds, 0.2, 5).unwrap(), inject_missing(&ds, 0.2, 5).unwrap());
        assert_ne!(inject_missing(&ds, 0.2, 5).unwrap().mask, inject_missing(&ds, 0.2, 6).unwrap().mask);
    }

    #[test]
    fn rate_range_checked() {
        let ds = dataset(3, 3);
        assert!(inject_missing(&ds, -0.1, 0).is_err());
        assert!(inject_missing(&ds, 0.96, 0).is_err());
        assert!(inject_missing(&ds, 0.95, 0).is_ok());
    }

    proptest! {
        #[test]
        fn exact_count_and_concealment(n in 1usize..60, p in 1usize..15, ri in 0usize..4, seed in any::<u64>()) {
            let rate = [0.0, 0.05, 0.2, 0.4][ri];
            let ds = dataset(n, p);
            let m = inject_missing(&ds, rate, seed).unwrap();
            prop_assert_eq!(m.missing_entries(), (rate * (n * p) as f64 + 1e-9).floor() as usize);
            for ((x, mk), orig) in m.x.iter().zip(m.mask.iter()).zip(ds.x.iter()) {
                prop_assert_eq!(x * (1.0 - f64::from(*mk)), 0.0);
                if *mk == 1 { prop_assert_eq!(x, orig); }
            }
        }
    }
}
