//! Every weight-update rule on f(w) = w², starting from w = 1.

use neuroenergy::solvers::{make_solver, ParamShape, SolverKind, SolverSpec};

fn main() -> neuroenergy::Result<()> {
    let shapes = [ParamShape { name: "w".into(), len: 1 }];
    println!("{:<3} {:<9} {:>12} {:>12} {:>12}", "id", "solver", "step 10", "step 100", "step 500");
    for kind in SolverKind::ALL {
        let spec = SolverSpec::default_for(kind);
        let mut state = make_solver(&spec, &shapes)?;
        let mut w = [1.0];
        let mut checkpoints = Vec::new();
        for step in 1..=500 {
            let g = [2.0 * w[0]];
            state.step(&mut [&mut w[..]], &[&g[..]])?;
            if [10, 100, 500].contains(&step) {
                checkpoints.push(w[0] * w[0]);
            }
        }
        println!(
            "{:<3} {:<9} {:>12.3e} {:>12.3e} {:>12.3e}",
            kind.id(),
            kind.name(),
            checkpoints[0],
            checkpoints[1],
            checkpoints[2]
        );
    }
    Ok(())
}
