//! One layer-growth search: the optimizer tunes solver, hyperparameters and
//! neuron counts for one hidden layer, then two, each stage warm-started from
//! the best network so far.
//!
//! Usage: `cargo run --release --example layer_growth [ALGORITHM]`

use neuroenergy::data::{inject_missing, synthesize};
use neuroenergy::driver::{layer_growth_search, SearchConfig};
use neuroenergy::objective::{EvalConfig, Evaluator};
use neuroenergy::pbmh::Algorithm;

fn main() -> neuroenergy::Result<()> {
    let algorithm: Algorithm = std::env::args().nth(1).as_deref().unwrap_or("SHADE").parse()?;
    let cfg = SearchConfig {
        algorithms: vec![algorithm],
        max_layers: 2,
        stage_budget: 12,
        population_size: 6,
        repeats: 1,
        missing_rates: vec![0.2],
        eval: EvalConfig { folds: 3, epochs: 20, batch_size: 32, seed: 0 },
        master_seed: 1,
    };
    let ds = inject_missing(&synthesize(300, 8, 3, 4.0, 9)?, 0.2, 10)?;
    let evaluator = Evaluator::new(&ds, &cfg.space(), &cfg.shared_eval())?;

    let out = layer_growth_search(algorithm, &evaluator, &cfg, 77)?;
    for (layers, best) in out.stage_best.iter().enumerate() {
        println!("{} hidden layer(s): best error {best:.2}%", layers + 1);
    }
    let arch = &out.architecture;
    println!(
        "{algorithm}: layers {:?}, solver {}, lr {:.4}, accuracy {:.2}%, F-measure {:.2}, {} evaluations",
        arch.hidden_layer_sizes, arch.solver_name, arch.learning_rate, out.accuracy, out.f_measure, out.evaluations
    );
    Ok(())
}
