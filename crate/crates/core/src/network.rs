//! Feed-forward classifier with input concealing.
//!
//! Missing inputs are concealed by multiplying each sample with its binary
//! mask before the first hidden layer, so a missing feature contributes
//! nothing to the first-layer activations. Deeper layers are ordinary
//! affine + rectifier layers; the output layer is a softmax over the three
//! energy classes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::NetworkSpec;
use crate::solvers::{ParamShape, SolverKind};

pub const N_CLASSES: usize = 3;

/// One affine layer; `weights` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer { weights: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMlp {
    /// Hidden layers followed by the output layer.
    layers: Vec<Layer>,
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn as_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().expect("standard layout"), l.bias.as_slice().expect("standard layout")])
            .collect()
    }
}

/// Element-wise product `x ⊙ m`. Concealed entries become `+0.0` whatever
/// they held, including non-finite values.
pub fn mask_input(x: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.len() {
        return Err(Error::Shape(format!("input has {} features, mask has {}", x.len(), m.len())));
    }
    if let Some(v) = m.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("mask value {v} is not binary")));
    }
    Ok(x.iter().zip(m).map(|(&a, &b)| conceal(a, b)).collect())
}

#[inline]
fn conceal(x: f64, m: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        x
    }
}

fn conceal_batch(x: ArrayView2<f64>, m: ArrayView2<f64>) -> Result<Array2<f64>> {
    if let Some(v) = m.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("mask value {v} is not binary")));
    }
    let mut masked = x.to_owned();
    masked.zip_mut_with(&m, |a, &b| *a = conceal(*a, b));
    Ok(masked)
}

/// Builds a network for `spec` with He-uniform weights and zero biases.
pub fn init(spec: &NetworkSpec, input_dim: usize, seed: u64) -> Result<MaskedMlp> {
    MaskedMlp::new(&spec.hidden_layer_sizes, input_dim, seed)
}

impl MaskedMlp {
    pub fn new(hidden: &[usize], input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if hidden.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = input_dim;
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        for &fan_out in hidden.iter().chain(std::iter::once(&N_CLASSES)) {
            let limit = (6.0 / fan_in as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..=limit));
            layers.push(Layer { weights, bias: Array1::zeros(fan_out) });
            fan_in = fan_out;
        }
        Ok(MaskedMlp { layers })
    }

    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Shape("network needs at least an output layer".into()));
        };
        if last.weights.ncols() != N_CLASSES {
            return Err(Error::Shape(format!("output layer has {} units", last.weights.ncols())));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::Shape(format!("layer {i}: bias/weight width mismatch")));
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(Error::Shape(format!("layer {i} does not chain from layer {}", i - 1)));
            }
        }
        Ok(MaskedMlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.weights.ncols()).collect()
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let n = self.layers.len();
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                let prefix = if i + 1 == n { "output".to_string() } else { format!("hidden{}", i + 1) };
                [
                    ParamShape { name: format!("{prefix}.weight"), len: l.weights.len() },
                    ParamShape { name: format!("{prefix}.bias"), len: l.bias.len() },
                ]
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [l.weights.as_slice_mut().expect("standard layout"), l.bias.as_slice_mut().expect("standard layout")]
            })
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice().expect("standard layout"), l.bias.as_slice().expect("standard layout")])
            .collect()
    }

    fn check_input(&self, x: &ArrayView2<f64>, m: &ArrayView2<f64>) -> Result<()> {
        if x.dim() != m.dim() {
            return Err(Error::Shape(format!("inputs {:?} vs mask {:?}", x.dim(), m.dim())));
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("network expects {} features, got {}", self.input_dim(), x.ncols())));
        }
        Ok(())
    }

    /// Class probabilities for one sample.
    pub fn forward(&self, x: &[f64], m: &[f64]) -> Result<[f64; N_CLASSES]> {
        let masked = mask_input(x, m)?;
        if masked.len() != self.input_dim() {
            return Err(Error::Shape(format!("network expects {} features, got {}", self.input_dim(), masked.len())));
        }
        let row = ArrayView2::from_shape((1, masked.len()), &masked).expect("contiguous row");
        let probs = self.probabilities_of_masked(row);
        Ok([probs[[0, 0]], probs[[0, 1]], probs[[0, 2]]])
    }

    /// Class probabilities for a batch (`n × p` inputs and masks).
    pub fn forward_batch(&self, x: ArrayView2<f64>, m: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x, &m)?;
        let masked = conceal_batch(x, m)?;
        Ok(self.probabilities_of_masked(masked.view()))
    }

    /// Most probable class per row of already-concealed inputs.
    pub fn predict_masked(&self, masked: ArrayView2<f64>) -> Vec<usize> {
        self.logits(masked).rows().into_iter().map(argmax).collect()
    }

    /// Class probabilities for inputs taken as they are, with no mask.
    pub fn probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("network expects {} features, got {}", self.input_dim(), x.ncols())));
        }
        Ok(self.probabilities_of_masked(x))
    }

    fn probabilities_of_masked(&self, masked: ArrayView2<f64>) -> Array2<f64> {
        let mut z = self.logits(masked);
        for mut row in z.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        z
    }

    fn logits(&self, masked: ArrayView2<f64>) -> Array2<f64> {
        let mut h = masked.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weights) + &layer.bias;
            if i < last {
                h.mapv_inplace(relu);
            }
        }
        h
    }

    /// Mean cross-entropy and its exact gradient over a batch.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, m: ArrayView2<f64>, y: &[usize]) -> Result<(f64, Gradients)> {
        self.check_input(&x, &m)?;
        let masked = conceal_batch(x, m)?;
        self.loss_and_gradients_masked(masked.view(), y)
    }

    /// Same as [`Self::loss_and_gradients`] for inputs already multiplied by their mask.
    pub fn loss_and_gradients_masked(&self, masked: ArrayView2<f64>, y: &[usize]) -> Result<(f64, Gradients)> {
        let n = masked.nrows();
        if n == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if y.len() != n {
            return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
        }
        if masked.ncols() != self.input_dim() {
            return Err(Error::Shape(format!("network expects {} features, got {}", self.input_dim(), masked.ncols())));
        }
        if let Some(&c) = y.iter().find(|&&c| c >= N_CLASSES) {
            return Err(Error::invalid(format!("label {c} outside 0..{N_CLASSES}")));
        }

        // Forward, keeping every layer input.
        let last = self.layers.len() - 1;
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = masked.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weights) + &layer.bias;
            inputs.push(h);
            h = if i < last { z.mapv(relu) } else { z };
        }

        // Softmax cross-entropy; `h` now holds logits and becomes dL/dz.
        let inv_n = 1.0 / n as f64;
        let mut loss = 0.0;
        for (mut row, &label) in h.rows_mut().into_iter().zip(y) {
            let s = row.as_slice_mut().expect("standard layout");
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - s[label];
            for v in s.iter_mut() {
                *v = (*v - lse).exp() * inv_n;
            }
            s[label] -= inv_n;
        }
        loss *= inv_n;

        let mut delta = h;
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &inputs[i];
            let g = Layer {
                weights: input.t().dot(&delta).as_standard_layout().into_owned(),
                bias: delta.sum_axis(Axis(0)),
            };
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                // `input` is the rectified output of layer i-1.
                ndarray::Zip::from(&mut back).and(input).for_each(|b, &a| {
                    if a <= 0.0 {
                        *b = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(g);
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, x: ArrayView2<f64>, m: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        let probs = self.forward_batch(x, m)?;
        if y.is_empty() || y.len() != probs.nrows() {
            return Err(Error::Shape("labels do not match batch".into()));
        }
        let logits = self.logits(conceal_batch(x, m)?.view());
        Ok(logits
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, &c)| {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() - row[c]
            })
            .sum::<f64>()
            / y.len() as f64)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients { layers: self.layers.iter().map(|l| Layer::zeros(l.weights.nrows(), l.weights.ncols())).collect() }
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        // NaN never wins, so a diverged network predicts class 0.
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in s.iter_mut() {
        *v /= sum;
    }
}

/// Persisted form of a trained network. Weight matrices are flattened
/// row-major (`fan_in` rows of `fan_out` values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub input_dim: usize,
    pub hidden_layer_sizes: Vec<usize>,
    pub n_classes: usize,
    pub solver_id: u8,
    pub solver_name: String,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetworkRecord {
    pub fn new(net: &MaskedMlp, solver: SolverKind) -> Self {
        NetworkRecord {
            input_dim: net.input_dim(),
            hidden_layer_sizes: net.hidden_sizes(),
            n_classes: N_CLASSES,
            solver_id: solver.id(),
            solver_name: solver.name().to_string(),
            weights: net.layers.iter().map(|l| l.weights.iter().copied().collect()).collect(),
            biases: net.layers.iter().map(|l| l.bias.to_vec()).collect(),
        }
    }

    pub fn to_network(&self) -> Result<MaskedMlp> {
        let mut fan_in = self.input_dim;
        let widths: Vec<usize> = self.hidden_layer_sizes.iter().copied().chain([self.n_classes]).collect();
        if self.weights.len() != widths.len() || self.biases.len() != widths.len() {
            return Err(Error::Shape("record layer count mismatch".into()));
        }
        let mut layers = Vec::with_capacity(widths.len());
        for (i, &fan_out) in widths.iter().enumerate() {
            let weights = Array2::from_shape_vec((fan_in, fan_out), self.weights[i].clone())
                .map_err(|e| Error::Shape(format!("layer {i}: {e}")))?;
            let bias = Array1::from(self.biases[i].clone());
            layers.push(Layer { weights, bias });
            fan_in = fan_out;
        }
        MaskedMlp::from_layers(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{selective_exclusion, HyperBounds, HyperparamVector};
    use ndarray::array;

    fn spec(hidden: Vec<usize>) -> NetworkSpec {
        let h = HyperparamVector::midrange(&HyperBounds::default(), SolverKind::Rprop);
        NetworkSpec { hidden_layer_sizes: hidden, solver_id: 9, active_params: selective_exclusion(9, &h).unwrap() }
    }

    #[test]
    fn mask_input_examples() {
        assert_eq!(mask_input(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(mask_input(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).unwrap(), vec![1.0, 0.0, 3.0]);
        assert_eq!(mask_input(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(matches!(mask_input(&[1.0], &[1.0, 0.0]), Err(Error::Shape(_))));
        assert!(mask_input(&[1.0], &[0.5]).is_err());
    }

    #[test]
    fn init_shapes_and_determinism() {
        let net = init(&spec(vec![302, 11]), 32, 5).unwrap();
        let shapes: Vec<_> = net.layers().iter().map(|l| l.weights.dim()).collect();
        assert_eq!(shapes, vec![(32, 302), (302, 11), (11, 3)]);
        assert!(net.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let limit = (6.0f64 / 32.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= limit));
        assert_eq!(net, init(&spec(vec![302, 11]), 32, 5).unwrap());
        assert_ne!(net, init(&spec(vec![302, 11]), 32, 6).unwrap());
        assert!(init(&spec(vec![4]), 0, 1).is_err());
    }

    #[test]
    fn zero_network_is_uniform() {
        let layers = vec![Layer::zeros(2, 4), Layer::zeros(4, 3)];
        let net = MaskedMlp::from_layers(layers).unwrap();
        let p = net.forward(&[0.3, -2.0], &[1.0, 1.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_neuron_hand_trace() {
        let hidden = Layer { weights: array![[1.0]], bias: array![0.0] };
        let out = Layer { weights: array![[1.0, 0.0, 0.0]], bias: array![0.0, 0.0, 0.0] };
        let net = MaskedMlp::from_layers(vec![hidden, out]).unwrap();
        let p = net.forward(&[2.0], &[1.0]).unwrap();
        let z = [2.0f64.exp(), 1.0, 1.0];
        let s: f64 = z.iter().sum();
        for (a, b) in p.iter().zip(z.iter().map(|v| v / s)) {
            assert!((a - b).abs() < 1e-15);
        }
        // Masking the only input leaves relu(0) = 0 and a uniform output.
        let p = net.forward(&[2.0], &[0.0]).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn masked_entries_do_not_matter() {
        let net = init(&spec(vec![5, 4]), 3, 11).unwrap();
        let a = net.forward(&[0.1, 0.2, 0.3], &[1.0, 0.0, 1.0]).unwrap();
        let b = net.forward(&[0.1, 1e6, 0.3], &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_rejects_bad_batches() {
        let net = init(&spec(vec![2]), 2, 1).unwrap();
        let x = Array2::<f64>::zeros((0, 2));
        assert!(net.loss_and_gradients(x.view(), x.view(), &[]).is_err());
        let x = Array2::<f64>::zeros((1, 3));
        assert!(matches!(net.loss_and_gradients(x.view(), x.view(), &[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn confident_correct_predictions_have_vanishing_loss() {
        let hidden = Layer { weights: array![[1.0]], bias: array![0.0] };
        let out = Layer { weights: array![[50.0, 0.0, 0.0]], bias: array![0.0, 0.0, 0.0] };
        let net = MaskedMlp::from_layers(vec![hidden, out]).unwrap();
        let x = array![[1.0], [2.0]];
        let m = Array2::ones((2, 1));
        let (loss, grads) = net.loss_and_gradients(x.view(), m.view(), &[0, 0]).unwrap();
        assert!(loss < 1e-20);
        assert!(grads.as_slices().iter().flat_map(|s| s.iter()).all(|g| g.abs() < 1e-18));
    }

    #[test]
    fn duplicated_batch_keeps_mean_loss() {
        let net = init(&spec(vec![6, 3]), 4, 2).unwrap();
        let x = array![[0.1, 0.5, -0.3, 0.9], [1.0, -1.0, 0.2, 0.0]];
        let m = array![[1.0, 0.0, 1.0, 1.0], [1.0, 1.0, 1.0, 0.0]];
        let y = [2, 1];
        let x2 = ndarray::concatenate![Axis(0), x, x];
        let m2 = ndarray::concatenate![Axis(0), m, m];
        let (l1, _) = net.loss_and_gradients(x.view(), m.view(), &y).unwrap();
        let (l2, _) = net.loss_and_gradients(x2.view(), m2.view(), &[2, 1, 2, 1]).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        assert!((l1 - net.loss(x.view(), m.view(), &y).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn record_round_trip() {
        let net = init(&spec(vec![4, 2]), 3, 9).unwrap();
        let rec = NetworkRecord::new(&net, SolverKind::Rprop);
        assert_eq!(rec.weights[0].len(), 12);
        // Row-major: element (1, 0) of the 3x4 first matrix sits at index 4.
        assert_eq!(rec.weights[0][4], net.layers()[0].weights[[1, 0]]);
        let json = serde_json::to_string(&rec).unwrap();
        let back: NetworkRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_network().unwrap(), net);
    }

    #[test]
    fn gradients_are_contiguous_for_any_shape() {
        for (hidden, p, n) in [(vec![1], 1, 1), (vec![7], 5, 1), (vec![3, 9], 2, 13), (vec![16, 1, 4], 11, 32)] {
            let net = init(&spec(hidden), p, 3).unwrap();
            let x = Array2::from_shape_fn((n, p), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
            let m = Array2::from_shape_fn((n, p), |(i, j)| ((i + j) % 3 != 0) as u8 as f64);
            let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let (_, grads) = net.loss_and_gradients(x.view(), m.view(), &y).unwrap();
            let sizes: Vec<usize> = grads.as_slices().iter().map(|s| s.len()).collect();
            let expected: Vec<usize> = net.params().iter().map(|s| s.len()).collect();
            assert_eq!(sizes, expected);
        }
    }

    #[test]
    fn concealed_non_finite_values_are_ignored() {
        let net = init(&spec(vec![5]), 3, 4).unwrap();
        let m = [1.0, 0.0, 1.0];
        let clean = net.forward(&[0.3, 0.0, -0.2], &m).unwrap();
        for junk in [f64::NAN, f64::INFINITY, -1e300, -0.0] {
            let got = net.forward(&[0.3, junk, -0.2], &m).unwrap();
            assert_eq!(got.map(f64::to_bits), clean.map(f64::to_bits));
        }
        let bad = array![[0.3, 1.0, 0.2]];
        assert!(net.forward_batch(bad.view(), array![[1.0, 0.5, 1.0]].view()).is_err());
    }
}
