//! Trains a small masked MLP by hand and shows that concealed inputs have no
//! effect on its output.

use ndarray::Array2;
use neuroenergy::data::{inject_missing, synthesize};
use neuroenergy::network::MaskedMlp;
use neuroenergy::solvers::{make_solver, SolverKind, SolverSpec};

fn main() -> neuroenergy::Result<()> {
    let ds = synthesize(300, 6, 3, 4.0, 3)?;
    let data = inject_missing(&ds, 0.2, 4)?;
    let mask = data.mask_f64();

    let mut net = MaskedMlp::new(&[16, 8], data.n_features(), 5)?;
    let mut solver = make_solver(&SolverSpec::default_for(SolverKind::Adam), &net.param_shapes())?;
    for epoch in 0..=200 {
        let (loss, grads) = net.loss_and_gradients(data.x.view(), mask.view(), &data.y)?;
        if epoch % 50 == 0 {
            println!("epoch {epoch:>3}: loss {loss:.4}");
        }
        solver.step(&mut net.params_mut(), &grads.as_slices())?;
    }

    let preds = net.predict_masked((&data.x * &mask).view());
    let correct = preds.iter().zip(&data.y).filter(|(p, y)| p == y).count();
    println!("training accuracy {:.1}%", 100.0 * correct as f64 / data.n_rows() as f64);

    let x = data.x.row(0).to_vec();
    let m = mask.row(0).to_vec();
    let mut scrambled = x.clone();
    for (v, keep) in scrambled.iter_mut().zip(&m) {
        if *keep == 0.0 {
            *v = f64::NAN;
        }
    }
    println!("mask {m:?}");
    println!("probabilities            {:?}", net.forward(&x, &m)?);
    println!("with NaN in hidden cells {:?}", net.forward(&scrambled, &m)?);

    let raw = ds.x.slice(ndarray::s![0..1, ..]);
    let ones = Array2::ones(raw.dim());
    let masked = net.forward_batch(raw, ones.view())?;
    println!("all-ones mask equals plain evaluation: {}", masked == net.probabilities(raw)?);
    Ok(())
}
