use super::*;
use crate::genome::Interval;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::atomic::{AtomicUsize, Ordering};

fn sphere(x: &[f64]) -> Result<f64> {
    Ok(x.iter().map(|v| v * v).sum())
}

fn box10() -> Vec<Interval> {
    vec![Interval::new(-5.0, 5.0); 10]
}

fn cfg(algorithm: Algorithm, seed: u64) -> OptimizerConfig {
    OptimizerConfig { algorithm, population_size: 10, stage_budget: 2000, seed }
}

#[test]
fn every_algorithm_shrinks_sphere_tenfold() {
    let bounds = box10();
    for alg in Algorithm::ALL {
        for seed in 0..10 {
            let m = minimize(&cfg(alg, seed), &bounds, &sphere, None).unwrap();
            let initial = m.best_of_first(10);
            assert!(m.fitness <= 0.1 * initial, "{alg} seed {seed}: {} vs initial {initial}", m.fitness);
        }
    }
}

#[test]
fn budget_is_exact_and_incumbent_monotone() {
    let bounds = vec![Interval::new(-2.0, 3.0); 4];
    for alg in Algorithm::ALL {
        for budget in [10, 17, 30, 101] {
            let calls = AtomicUsize::new(0);
            let f = |x: &[f64]| {
                calls.fetch_add(1, Ordering::SeqCst);
                for (v, b) in x.iter().zip(&bounds) {
                    assert!(b.contains(*v));
                }
                sphere(x)
            };
            let c = OptimizerConfig { algorithm: alg, population_size: 10, stage_budget: budget, seed: 3 };
            let m = minimize(&c, &bounds, &f, None).unwrap();
            assert_eq!(calls.load(Ordering::SeqCst), budget, "{alg}");
            assert_eq!(m.trace.len(), budget);
            let mut running = f64::INFINITY;
            for &t in &m.trace {
                running = running.min(t);
            }
            assert_eq!(m.fitness, running);
            assert!(m.trace.iter().all(|&t| m.fitness <= t));
        }
    }
}

#[test]
fn identical_seed_identical_result() {
    let bounds = box10();
    for alg in Algorithm::ALL {
        let c = OptimizerConfig { stage_budget: 300, ..cfg(alg, 11) };
        let a = minimize(&c, &bounds, &sphere, None).unwrap();
        let b = minimize(&c, &bounds, &sphere, None).unwrap();
        assert_eq!(a, b, "{alg}");
    }
}

#[test]
fn comparison_based_algorithms_ignore_positive_scaling() {
    // Scaling by a power of two is exact, so any rule that only compares
    // (or takes ratios of) fitness values must visit the same points.
    let bounds = box10();
    let scaled = |x: &[f64]| sphere(x).map(|f| 8.0 * f);
    for alg in Algorithm::ALL {
        let c = OptimizerConfig { stage_budget: 400, ..cfg(alg, 5) };
        let a = minimize(&c, &bounds, &sphere, None).unwrap();
        let b = minimize(&c, &bounds, &scaled, None).unwrap();
        assert_eq!(a.x, b.x, "{alg}");
        let rescaled: Vec<f64> = a.trace.iter().map(|f| 8.0 * f).collect();
        assert_eq!(rescaled, b.trace, "{alg}");
    }
}

#[test]
fn warm_start_is_first_evaluation() {
    let bounds = box10();
    let warm = vec![0.5; 10];
    for alg in Algorithm::ALL {
        let c = OptimizerConfig { stage_budget: 20, ..cfg(alg, 1) };
        let m = minimize(&c, &bounds, &sphere, Some(&warm)).unwrap();
        assert_eq!(m.trace[0], 2.5, "{alg}");
        assert!(m.fitness <= 2.5);
    }
}

#[test]
fn config_errors() {
    let bounds = box10();
    let small_pop = OptimizerConfig { population_size: 3, ..cfg(Algorithm::De, 0) };
    assert!(matches!(minimize(&small_pop, &bounds, &sphere, None), Err(Error::Config(_))));
    let small_budget = OptimizerConfig { stage_budget: 9, ..cfg(Algorithm::De, 0) };
    assert!(matches!(minimize(&small_budget, &bounds, &sphere, None), Err(Error::Config(_))));
}

#[test]
fn algorithm_names_round_trip() {
    for alg in Algorithm::ALL {
        assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        let json = serde_json::to_string(&alg).unwrap();
        assert_eq!(json, format!("\"{}\"", alg.name()));
    }
    assert_eq!("cmaes".parse::<Algorithm>().unwrap(), Algorithm::CmaEs);
    assert!("XYZ".parse::<Algorithm>().is_err());
}

#[test]
fn velocity_examples() {
    assert_eq!(pso_velocity(1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.3, 0.7), 0.5);
    assert!((pso_velocity(7.0, 1.0, 1.2, 1.4, 0.0, 1.0, 1.0, 1.0, 1.0) - 0.6).abs() < 1e-12);
    assert_eq!(pso_velocity(2.0, 3.0, 3.0, 3.0, 0.7, 2.05, 2.05, 0.4, 0.9), 0.7 * 2.0);
    assert_eq!(clpso_velocity(3.0, 1.0, 1.0, 0.5, 1.2, 0.8), 1.5);
    assert!((clpso_velocity(3.0, 1.0, 2.0, 0.5, 1.2, 1.0) - (1.5 + 1.2)).abs() < 1e-12);
}

#[test]
fn aiwf_examples() {
    assert_eq!(aiwf(5.0, 5.0, 1.0, 0.4, 0.9), 0.9);
    assert_eq!(aiwf(1.0, 5.0, 1.0, 0.4, 0.9), 0.4);
    assert!((aiwf(3.0, 5.0, 1.0, 0.4, 0.9) - 0.65).abs() < 1e-12);
    assert_eq!(aiwf(2.0, 2.0, 2.0, 0.4, 0.9), 0.9);
}

#[test]
fn ppso_examples() {
    assert_eq!(ppso_velocity(0.0, 1.0, 3.0, 7.0), 2.0);
    let v = ppso_velocity(FRAC_PI_2, 1.0, 3.0, 7.0);
    assert!((v - 6.0).abs() < 1e-12, "{v}");
    let (a, b) = ppso_coefficients(FRAC_PI_4);
    let expected = (2f64.sqrt() / 2.0).powf(2f64.sqrt());
    assert!((a - expected).abs() < 1e-12 && (b - expected).abs() < 1e-12);
    assert!((expected - 0.6125).abs() < 1e-4);
    let t = ppso_next_theta(1.0);
    assert!((0.0..std::f64::consts::TAU).contains(&t));
}

#[test]
fn clpso_probability_profile() {
    assert!((clpso_learning_probability(0, 10) - 0.05).abs() < 1e-12);
    assert!((clpso_learning_probability(9, 10) - 0.5).abs() < 1e-12);
    for i in 1..10 {
        assert!(clpso_learning_probability(i, 10) > clpso_learning_probability(i - 1, 10));
    }
}

#[test]
fn selection_rules() {
    assert!(de_select(3.0, 5.0));
    assert!(de_select(5.0, 5.0));
    assert!(!de_select(6.0, 5.0));
    let fs = [1.0, 5.0];
    assert_eq!(tournament_winner(0, 1, &fs), 0);
    assert_eq!(tournament_winner(1, 0, &fs), 0);
    assert!((logistic_map(0.3) - 0.84).abs() < 1e-15);
}

#[test]
fn lshade_schedule() {
    assert_eq!(lshade_target_size(10, 4, 0, 2000), 10);
    assert_eq!(lshade_target_size(10, 4, 2000, 2000), 4);
    assert_eq!(lshade_target_size(10, 4, 1000, 2000), 7);
    // Size 10 - 6t/2000 rounds to 9 once t passes 1000/6.
    assert_eq!(lshade_target_size(10, 4, 166, 2000), 10);
    assert_eq!(lshade_target_size(10, 4, 167, 2000), 9);
    let mut last = 10;
    for t in 0..=2000 {
        let s = lshade_target_size(10, 4, t, 2000);
        assert!(s <= last && s >= 4);
        last = s;
    }
}

#[test]
fn stage_over_genomes() {
    let space = SearchSpace::default();
    let eval = |g: &Genome| -> Result<f64> { Ok(g.neurons.iter().map(|n| (n - 50.0).abs()).sum()) };
    let c = OptimizerConfig { algorithm: Algorithm::De, population_size: 10, stage_budget: 30, seed: 2 };
    let warm = crate::genome::random_genome(&space, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let r = optimize_stage(&c, &space, 2, &eval, Some(&warm)).unwrap();
    assert_eq!(r.trace.len(), 30);
    assert_eq!(r.best.n_layers(), 2);
    assert!(r.best.validate(&space).is_ok());
    assert!(optimize_stage(&c, &space, 3, &eval, Some(&warm)).is_err());
}
