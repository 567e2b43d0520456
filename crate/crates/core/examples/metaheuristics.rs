//! All thirteen population-based optimizers on the 10-D sphere.

use neuroenergy::genome::Interval;
use neuroenergy::pbmh::{minimize, Algorithm, OptimizerConfig};

fn main() -> neuroenergy::Result<()> {
    let bounds = vec![Interval { lo: -5.0, hi: 5.0 }; 10];
    let sphere = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
    println!("{:<7} {:>12} {:>12} {:>8}", "alg", "initial", "final", "evals");
    for algorithm in Algorithm::ALL {
        let cfg = OptimizerConfig { algorithm, population_size: 10, stage_budget: 2000, seed: 42 };
        let min = minimize(&cfg, &bounds, &sphere, None)?;
        println!(
            "{:<7} {:>12.4} {:>12.3e} {:>8}",
            algorithm.name(),
            min.best_of_first(10),
            min.fitness,
            min.trace.len()
        );
    }
    Ok(())
}
