use neuroenergy::data::{inject_missing, synthesize, LabeledDataset};
use neuroenergy::genome::{Genome, HyperBounds, HyperparamVector, SearchSpace};
use neuroenergy::objective::{evaluate, EvalConfig};
use neuroenergy::solvers::SolverKind;

fn adam_genome(layers: Vec<f64>) -> Genome {
    let mut hyper = HyperparamVector::midrange(&HyperBounds::default(), SolverKind::Adam);
    hyper.learning_rate = 0.01;
    hyper.weight_decay = 0.0;
    Genome { hyper, neurons: layers }
}

/// Cross-validated error of a nearest-class-mean rule, which is close to the
/// Bayes rule for equal-covariance Gaussian blobs.
fn nearest_mean_error(ds: &LabeledDataset, folds: usize) -> f64 {
    let p = ds.n_features();
    let mut wrong = 0;
    for f in 0..folds {
        let mut sums = vec![vec![0.0; p]; 3];
        let mut counts = [0usize; 3];
        for (i, row) in ds.x.rows().into_iter().enumerate() {
            if i % folds != f {
                counts[ds.y[i]] += 1;
                for (s, v) in sums[ds.y[i]].iter_mut().zip(row) {
                    *s += v;
                }
            }
        }
        for (i, row) in ds.x.rows().into_iter().enumerate() {
            if i % folds == f {
                let dist = |c: usize| -> f64 {
                    row.iter().zip(&sums[c]).map(|(v, s)| (v - s / counts[c] as f64).powi(2)).sum()
                };
                let pred = (0..3).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap();
                wrong += (pred != ds.y[i]) as usize;
            }
        }
    }
    100.0 * wrong as f64 / ds.n_rows() as f64
}

#[test]
fn well_separated_blobs_are_learned() {
    let ds = synthesize(300, 6, 3, 5.0, 21).unwrap();
    let oracle = nearest_mean_error(&ds, 3);
    let cfg = EvalConfig { folds: 3, epochs: 50, batch_size: 32, seed: 1 };
    let result = evaluate(&adam_genome(vec![16.0]), &ds.fully_observed(), &SearchSpace::default(), &cfg).unwrap();
    assert!(result.fitness < 10.0, "fitness {}", result.fitness);
    assert!(result.fitness <= oracle + 5.0, "fitness {} vs nearest-mean {oracle}", result.fitness);
    assert!(result.f_measure > 90.0);
}

#[test]
fn missing_values_cost_accuracy() {
    let ds = synthesize(300, 6, 3, 3.0, 22).unwrap();
    let cfg = EvalConfig { folds: 3, epochs: 30, batch_size: 32, seed: 2 };
    let g = adam_genome(vec![16.0]);
    let space = SearchSpace::default();
    let clean = evaluate(&g, &ds.fully_observed(), &space, &cfg).unwrap();
    let holed = evaluate(&g, &inject_missing(&ds, 0.5, 3).unwrap(), &space, &cfg).unwrap();
    assert!(holed.accuracy < clean.accuracy, "{} vs {}", holed.accuracy, clean.accuracy);
    assert!(holed.accuracy > 100.0 / 3.0);
}
