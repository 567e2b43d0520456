//! Benchmark records through to the statistics and report files that the
//! `stats` and `report` subcommands write.
//!
//! Usage: `cargo run --release --example report [OUT_DIR]`

use std::path::PathBuf;

use neuroenergy::analysis::{analyze, write_stats};
use neuroenergy::data::synthesize;
use neuroenergy::driver::{run_benchmark, BenchmarkOptions, SearchConfig};
use neuroenergy::objective::EvalConfig;
use neuroenergy::pbmh::Algorithm;
use neuroenergy::report::{architecture_rows, write_report};

fn main() -> neuroenergy::Result<()> {
    let out: PathBuf =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("neuroenergy-report"));
    let cfg = SearchConfig {
        algorithms: vec![Algorithm::Ga, Algorithm::Jade, Algorithm::Clpso],
        max_layers: 2,
        stage_budget: 6,
        population_size: 4,
        repeats: 5,
        missing_rates: vec![0.0, 0.2, 0.4],
        eval: EvalConfig { folds: 3, epochs: 8, batch_size: 32, seed: 0 },
        master_seed: 3,
    };
    let ds = synthesize(180, 6, 3, 4.0, 8)?;
    let records = run_benchmark(&ds, &cfg, BenchmarkOptions { deterministic: true, jobs: 0 }, |_| Ok(()))?;

    let stats = analyze(&records, 0.05)?;
    println!("Friedman chi2 {:.3}, p {:.4}", stats.friedman.chi2, stats.friedman.p_value);
    for (alg, rank) in &stats.friedman.average_ranks {
        println!("  {alg:<6} {rank:.2}");
    }
    for row in architecture_rows(&records) {
        println!("{row:?}");
    }
    write_stats(&stats, &out.join("stats"))?;
    write_report(&records, &out.join("report"))?;
    println!("wrote {}", out.display());
    Ok(())
}
