use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with a binary prune mask over `W`.
///
/// A masked entry (`mask == false`) always holds a weight of exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    mask: Vec<bool>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let mask = vec![true; weights.len()];
        Self::with_mask(weights, bias, mask, activation)
    }

    pub fn with_mask(mut weights: Matrix, bias: Vec<f64>, mask: Vec<bool>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dim(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weights.rows()
            )));
        }
        if mask.len() != weights.len() {
            return Err(Error::dim(format!(
                "mask length {} does not match {} weights",
                mask.len(),
                weights.len()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::dim("bias contains non-finite values"));
        }
        for (w, &keep) in weights.as_mut_slice().iter_mut().zip(&mask) {
            if !keep {
                *w = 0.0;
            }
        }
        Ok(Self {
            weights,
            bias,
            mask,
            activation,
        })
    }

    /// He-uniform initialisation with zero bias.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / inputs.max(1) as f64).sqrt();
        let data = (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect();
        Self {
            weights: Matrix::new(outputs, inputs, data).expect("sized above"),
            bias: vec![0.0; outputs],
            mask: vec![true; inputs * outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Overwrites an unmasked weight. Writes to masked positions are ignored.
    pub fn set_weight(&mut self, flat: usize, value: f64) {
        if self.mask[flat] {
            self.weights.as_mut_slice()[flat] = value;
        }
    }

    /// Masks the weight at `flat` and zeroes it. Returns whether it was unmasked before.
    pub fn prune(&mut self, flat: usize) -> bool {
        let was = self.mask[flat];
        self.mask[flat] = false;
        self.weights.as_mut_slice()[flat] = 0.0;
        was
    }

    pub fn pruned_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn unmasked_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .as_slice()
            .iter()
            .zip(&self.mask)
            .filter_map(|(&w, &m)| m.then_some(w))
    }

    fn forward_pre(&self, x: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(x.rows(), self.outputs());
        for b in 0..x.rows() {
            let xr = x.row(b);
            let zr = z.row_mut(b);
            for (o, zo) in zr.iter_mut().enumerate() {
                let wr = self.weights.row(o);
                let mut acc = self.bias[o];
                for (w, xi) in wr.iter().zip(xr) {
                    acc += w * xi;
                }
                *zo = acc;
            }
        }
        z
    }

    fn activate(&self, z: &Matrix) -> Matrix {
        let mut a = z.clone();
        if self.activation != Activation::Identity {
            for v in a.as_mut_slice() {
                *v = self.activation.apply(*v);
            }
        }
        a
    }
}

/// Per-parameter gradients of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Gradients for every layer of a [`Network`], in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.outputs(), l.inputs()),
                    bias: vec![0.0; l.outputs()],
                })
                .collect(),
        }
    }
}

/// Intermediate values of a forward pass, needed for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Feed-forward stack of dense layers. The last layer produces logits (or Q-values).
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::dim("network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::dim(format!(
                    "layer {i} outputs {} but layer {} expects {} inputs",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Random MLP with ReLU hidden layers and an identity output layer.
    /// `sizes` lists every width including input and output, so `sizes.len() - 1` layers are built.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::random(w[0], w[1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn layer(&self, i: usize) -> &DenseLayer {
        &self.layers[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut DenseLayer {
        &mut self.layers[i]
    }

    /// Number of prunable layers. Every dense layer's weight matrix is prunable; biases are not.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(batch)?.output)
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        if batch.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward_pre(&x);
            if !z.all_finite() {
                return Err(Error::Numeric {
                    layer: i,
                    detail: "pre-activation overflow".into(),
                });
            }
            let a = layer.activate(&z);
            inputs.push(x);
            pre_activations.push(z);
            x = a;
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            output: x,
        })
    }

    /// Backpropagates `d_output` (gradient of the loss w.r.t. the network output).
    ///
    /// Gradients at masked positions are returned as computed; optimizers drop them.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Matrix) -> Result<Gradients> {
        if d_output.rows() != cache.output.rows() || d_output.cols() != cache.output.cols() {
            return Err(Error::dim("output gradient shape does not match forward output"));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[i];
            if layer.activation != Activation::Identity {
                for (d, &zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *d *= layer.activation.derivative(zv);
                }
            }
            let x = &cache.inputs[i];
            let mut dw = Matrix::zeros(layer.outputs(), layer.inputs());
            let mut db = vec![0.0; layer.outputs()];
            for b in 0..x.rows() {
                let xr = x.row(b);
                for (o, &d) in delta.row(b).iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    db[o] += d;
                    for (g, &xi) in dw.row_mut(o).iter_mut().zip(xr) {
                        *g += d * xi;
                    }
                }
            }
            if i > 0 {
                let mut dx = Matrix::zeros(x.rows(), layer.inputs());
                for b in 0..x.rows() {
                    let dxr = dx.row_mut(b);
                    for (o, &d) in delta.row(b).iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        for (g, &w) in dxr.iter_mut().zip(layer.weights.row(o)) {
                            *g += d * w;
                        }
                    }
                }
                delta = dx;
            }
            grads.push(LayerGrads { weights: dw, bias: db });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Mean softmax cross-entropy over the batch and its gradients.
    pub fn loss_and_grads(&self, batch: &Matrix, labels: &[usize]) -> Result<(f64, Gradients)> {
        if batch.rows() == 0 {
            return Err(Error::dim("empty batch"));
        }
        if labels.len() != batch.rows() {
            return Err(Error::dim(format!(
                "{} labels for a batch of {} rows",
                labels.len(),
                batch.rows()
            )));
        }
        let cache = self.forward_cached(batch)?;
        let logits = cache.output();
        let classes = logits.cols();
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::dim(format!("label {bad} out of range for {classes} classes")));
        }
        let n = batch.rows() as f64;
        let probs = softmax(logits);
        let mut loss = 0.0;
        let mut d_out = probs.clone();
        for (b, &y) in labels.iter().enumerate() {
            let row = logits.row(b);
            loss += log_sum_exp(row) - row[y];
            d_out.row_mut(b)[y] -= 1.0;
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                layer: self.layers.len() - 1,
                detail: format!("cross-entropy loss is {loss}"),
            });
        }
        for v in d_out.as_mut_slice() {
            *v /= n;
        }
        let grads = self.backward(&cache, &d_out)?;
        Ok((loss, grads))
    }

    /// Plain cross-entropy loss without gradients.
    pub fn loss(&self, batch: &Matrix, labels: &[usize]) -> Result<f64> {
        let logits = self.forward(batch)?;
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(b, &y)| log_sum_exp(logits.row(b)) - logits.row(b)[y])
            .sum();
        Ok(total / labels.len() as f64)
    }

    /// `w <- w - lr * g` at unmasked positions. Masked weights stay exactly zero.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for ((w, &m), &gw) in layer
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(&layer.mask)
                .zip(g.weights.as_slice())
            {
                if m {
                    *w -= lr * gw;
                } else {
                    *w = 0.0;
                }
            }
            for (b, &gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }

    /// FNV-1a over the bit patterns of every weight, bias and mask entry.
    pub fn checksum(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        for layer in &self.layers {
            eat(&(layer.inputs() as u64).to_le_bytes());
            eat(&(layer.outputs() as u64).to_le_bytes());
            for w in layer.weights.as_slice() {
                eat(&w.to_bits().to_le_bytes());
            }
            for b in &layer.bias {
                eat(&b.to_bits().to_le_bytes());
            }
            for &m in &layer.mask {
                eat(&[m as u8]);
            }
        }
        h
    }

    /// True when every masked weight is exactly zero.
    pub fn masks_respected(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.as_slice().iter().zip(&l.mask).all(|(&w, &m)| m || w == 0.0))
    }

    /// Copies parameters from `other`, which must have identical shapes.
    pub fn copy_from(&mut self, other: &Network) -> Result<()> {
        if self.layers.len() != other.layers.len()
            || self
                .layers
                .iter()
                .zip(&other.layers)
                .any(|(a, b)| a.inputs() != b.inputs() || a.outputs() != b.outputs())
        {
            return Err(Error::dim("cannot copy parameters between differently shaped networks"));
        }
        self.layers.clone_from(&other.layers);
        Ok(())
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for b in 0..out.rows() {
        let row = out.row_mut(b);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(rows: &[&[f64]], bias: &[f64], act: Activation) -> DenseLayer {
        DenseLayer::new(Matrix::from_rows(rows).unwrap(), bias.to_vec(), act).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Network::new(vec![DenseLayer::new(
            Matrix::identity(3),
            vec![0.0; 3],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let x = Matrix::from_rows(&[[0.5, -2.0, 3.0], [1.0, 0.0, -1.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn fully_pruned_net_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Network::random(&[4, 5, 3], &mut rng).unwrap();
        for l in net.layers_mut() {
            for i in 0..l.weights().len() {
                l.prune(i);
            }
        }
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert!(net.forward(&x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_layer_relu_by_hand() {
        // hidden = relu([[1,-1],[2,1]] x + [0, -1]); out = [[1, 2]] hidden + 0.5
        // x = (3, 1): z1 = (2, 6), h = (2, 6), out = 2 + 12 + 0.5 = 14.5
        // x = (1, 3): z1 = (-2, 4), h = (0, 4), out = 8 + 0.5 = 8.5
        let net = Network::new(vec![
            layer(&[&[1.0, -1.0], &[2.0, 1.0]], &[0.0, -1.0], Activation::Relu),
            layer(&[&[1.0, 2.0]], &[0.5], Activation::Identity),
        ])
        .unwrap();
        let x = Matrix::from_rows(&[[3.0, 1.0], [1.0, 3.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().as_slice(), &[14.5, 8.5]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let net = Network::new(vec![layer(&[&[1.0, 1.0]], &[0.0], Activation::Identity)]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(matches!(net.forward(&x), Err(Error::Dimension(_))));
        let bad = vec![
            layer(&[&[1.0, 1.0]], &[0.0], Activation::Relu),
            layer(&[&[1.0, 1.0]], &[0.0], Activation::Identity),
        ];
        assert!(Network::new(bad).is_err());
    }

    #[test]
    fn uniform_logits_give_log_c_loss() {
        let net = Network::new(vec![DenseLayer::new(
            Matrix::zeros(4, 2),
            vec![0.0; 4],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, -3.0], [0.2, 0.7]]).unwrap();
        let (loss, _) = net.loss_and_grads(&x, &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::random(&[3, 4, 4, 2], &mut rng).unwrap();
        for l in net.layers_mut() {
            l.bias_mut().iter_mut().for_each(|b| *b = 0.0);
        }
        let x = Matrix::zeros(5, 3);
        let (_, g) = net.loss_and_grads(&x, &[0, 1, 0, 1, 1]).unwrap();
        assert!(g.layers[0].weights.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sgd_step_arithmetic_and_mask() {
        let mut net = Network::new(vec![layer(&[&[1.0, 2.0]], &[0.0], Activation::Identity)]).unwrap();
        net.layer_mut(0).prune(1);
        let grads = Gradients {
            layers: vec![LayerGrads {
                weights: Matrix::from_rows(&[[0.5, 3.0]]).unwrap(),
                bias: vec![0.0],
            }],
        };
        net.sgd_step(&grads, 0.1);
        assert_eq!(net.layer(0).weights().as_slice(), &[0.95, 0.0]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn checksum_tracks_changes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::random(&[3, 3, 2], &mut rng).unwrap();
        let mut other = net.clone();
        assert_eq!(net.checksum(), other.checksum());
        other.layer_mut(1).prune(0);
        assert_ne!(net.checksum(), other.checksum());
    }
}
