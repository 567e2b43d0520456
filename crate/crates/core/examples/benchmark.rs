//! A small algorithm × missing-rate × repeat grid streamed to JSON lines.

use std::io::Write;

use neuroenergy::data::synthesize;
use neuroenergy::driver::{run_benchmark, BenchmarkOptions, JsonlWriter, RunOutcome, SearchConfig};
use neuroenergy::objective::EvalConfig;
use neuroenergy::pbmh::Algorithm;

fn main() -> neuroenergy::Result<()> {
    let cfg = SearchConfig {
        algorithms: vec![Algorithm::De, Algorithm::Pso, Algorithm::CmaEs],
        max_layers: 1,
        stage_budget: 6,
        population_size: 4,
        repeats: 2,
        missing_rates: vec![0.0, 0.3],
        eval: EvalConfig { folds: 3, epochs: 10, batch_size: 32, seed: 0 },
        master_seed: 2024,
    };
    let ds = synthesize(240, 6, 3, 4.0, 5)?;
    let mut jsonl = JsonlWriter::new(Vec::new());
    let opts = BenchmarkOptions { deterministic: true, jobs: 0 };
    let records = run_benchmark(&ds, &cfg, opts, |r| {
        if let RunOutcome::Completed(o) = &r.outcome {
            eprintln!("{:<7} rate {:<4} repeat {}: {:.2}%", r.algorithm.name(), r.missing_rate, r.repeat, o.accuracy);
        }
        jsonl.write(r)
    })?;
    let bytes = jsonl.into_inner();
    println!("{} records, {} bytes of JSON lines; first record:", records.len(), bytes.len());
    let first = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    std::io::stdout().write_all(first).ok();
    println!();
    Ok(())
}
