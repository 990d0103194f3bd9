//! Fully connected network with ReLU hidden layers.
//!
//! Ops: seeded initialization, forward in train mode (inverted dropout) or
//! eval mode, exact backpropagation (parameter and input gradients), Adam
//! updates with optional mask enforcement, hidden-layer embeddings, and JSON
//! checkpoints that round-trip bit-exactly.
//!
//! Weights for a layer with `n_in` inputs and `n_out` outputs are stored as
//! an `n_in x n_out` matrix, so a batch `x` of shape `(n, n_in)` maps to
//! `x.dot(w) + b`. The output layer produces raw logits; softmax lives with
//! the losses.

use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pruning::Mask;

pub const CHECKPOINT_MAGIC: &str = "HHISS-CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Layer widths, input first and output last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArch {
    layer_sizes: Vec<usize>,
}

impl NetworkArch {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArch(format!(
                "need at least input and output sizes, got {layer_sizes:?}"
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArch(format!(
                "layer {pos} has zero width in {layer_sizes:?}"
            )));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of weight layers (one less than the number of sizes).
    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Number of hidden (ReLU) layers.
    pub fn n_hidden(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `(n_in, n_out)` of weight layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_sizes[l], self.layer_sizes[l + 1])
    }

    /// Total weight entries (prunable parameters; biases excluded).
    pub fn n_weights(&self) -> usize {
        (0..self.n_layers())
            .map(|l| {
                let (i, o) = self.layer_shape(l);
                i * o
            })
            .sum()
    }

    /// Total parameters including biases.
    pub fn n_params(&self) -> usize {
        self.n_weights() + self.layer_sizes[1..].iter().sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter gradients from one backward pass, plus the gradient with respect
/// to the network input (used for saliency maps).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.bias.iter().all(|b| b.iter().all(|v| v.is_finite()))
            && self.input.iter().all(|v| v.is_finite())
    }
}

/// Activations recorded by a forward pass, consumed by [`NetworkParams::backward`].
///
/// The cache is tied to the parameter state that produced it; updating the
/// parameters invalidates it.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    /// Input to each weight layer (`inputs[0]` is the batch itself).
    inputs: Vec<Array2<f64>>,
    /// Combined ReLU/dropout derivative multiplier per hidden layer.
    hidden_grad: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Adam first/second moment state, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(arch: &NetworkArch) -> Self {
        let mut m_w = Vec::with_capacity(arch.n_layers());
        let mut m_b = Vec::with_capacity(arch.n_layers());
        for l in 0..arch.n_layers() {
            let (i, o) = arch.layer_shape(l);
            m_w.push(Array2::zeros((i, o)));
            m_b.push(Array1::zeros(o));
        }
        Self {
            v_w: m_w.clone(),
            v_b: m_b.clone(),
            m_w,
            m_b,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: NetworkArch,
    layers: Vec<DenseLayer>,
    mask: Option<Mask>,
    version: u64,
}

impl NetworkParams {
    /// Initialize with weights drawn uniformly from
    /// `(-1/sqrt(n_in), 1/sqrt(n_in))` per layer and zero biases. Draw order
    /// is layer by layer, row-major within a layer, so a given stream always
    /// produces the same parameters.
    pub fn init(arch: NetworkArch, rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(arch.n_layers());
        for l in 0..arch.n_layers() {
            let (n_in, n_out) = arch.layer_shape(l);
            let bound = 1.0 / (n_in as f64).sqrt();
            let flat: Vec<f64> = (0..n_in * n_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            layers.push(DenseLayer {
                weights: Array2::from_shape_vec((n_in, n_out), flat).expect("init shape"),
                bias: Array1::zeros(n_out),
            });
        }
        Self {
            arch,
            layers,
            mask: None,
            version: 0,
        }
    }

    pub fn arch(&self) -> &NetworkArch {
        &self.arch
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable layer access for tests and surgery; invalidates outstanding
    /// forward caches.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn mask(&self) -> Option<&Mask> {
        self.mask.as_ref()
    }

    /// Zero the weights the mask prunes, without enforcing it on later updates.
    pub fn apply_mask(&mut self, mask: &Mask) -> Result<()> {
        mask.check_arch(&self.arch)?;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            Zip::from(&mut layer.weights)
                .and(mask.layer(l))
                .for_each(|w, &keep| {
                    if keep == 0 {
                        *w = 0.0;
                    }
                });
        }
        self.version += 1;
        Ok(())
    }

    /// Zero the pruned weights and keep them at zero through every later
    /// update.
    pub fn attach_mask(&mut self, mask: Mask) -> Result<()> {
        self.apply_mask(&mask)?;
        self.mask = Some(mask);
        Ok(())
    }

    pub fn detach_mask(&mut self) -> Option<Mask> {
        self.mask.take()
    }

    /// Fraction of weight entries that are exactly zero.
    pub fn zero_weight_fraction(&self) -> f64 {
        let zeros: usize = self
            .layers
            .iter()
            .map(|l| l.weights.iter().filter(|v| **v == 0.0).count())
            .sum();
        zeros as f64 / self.arch.n_weights() as f64
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.arch.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.arch.input_dim()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Eval-mode forward pass: no dropout.
    pub fn forward_eval(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.forward_impl(x, None)
    }

    /// Train-mode forward pass with inverted dropout on hidden activations.
    /// A rate of zero consumes no randomness. Draws happen row-major per
    /// hidden layer, so a fixed stream reproduces the same masks.
    pub fn forward_train(
        &self,
        x: &Array2<f64>,
        dropout_rate: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {dropout_rate}"
            )));
        }
        self.forward_impl(x, Some((dropout_rate, rng)))
    }

    fn forward_impl(
        &self,
        x: &Array2<f64>,
        mut dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x)?;
        let n_layers = self.arch.n_layers();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut hidden_grad = Vec::with_capacity(self.arch.n_hidden());
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(a.clone());
            let z = a.dot(&layer.weights) + &layer.bias;
            if l + 1 == n_layers {
                a = z;
            } else {
                let mut mult = z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                let mut act = z.mapv(|v| v.max(0.0));
                if let Some((rate, rng)) = dropout.as_mut() {
                    if *rate > 0.0 {
                        let keep = 1.0 - *rate;
                        for i in 0..act.nrows() {
                            for j in 0..act.ncols() {
                                if rng.gen::<f64>() < keep {
                                    act[[i, j]] /= keep;
                                    mult[[i, j]] /= keep;
                                } else {
                                    act[[i, j]] = 0.0;
                                    mult[[i, j]] = 0.0;
                                }
                            }
                        }
                    }
                }
                hidden_grad.push(mult);
                a = act;
            }
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("logits".into()));
        }
        Ok((
            a,
            ForwardCache {
                version: self.version,
                inputs,
                hidden_grad,
            },
        ))
    }

    /// Exact gradients of a scalar loss given `d loss / d logits`.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Array2<f64>) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(Error::StaleCache(
                "parameters changed since this cache was built; rerun forward".into(),
            ));
        }
        let n_layers = self.arch.n_layers();
        let expect = (cache.batch_size(), self.arch.output_dim());
        if grad_logits.dim() != expect {
            return Err(Error::ShapeMismatch(format!(
                "logit gradient has shape {:?}, expected {:?}",
                grad_logits.dim(),
                expect
            )));
        }
        let mut weights = Vec::with_capacity(n_layers);
        let mut bias = Vec::with_capacity(n_layers);
        let mut g = grad_logits.clone();
        for l in (0..n_layers).rev() {
            weights.push(cache.inputs[l].t().dot(&g));
            bias.push(g.sum_axis(Axis(0)));
            g = g.dot(&self.layers[l].weights.t());
            if l > 0 {
                g *= &cache.hidden_grad[l - 1];
            }
        }
        weights.reverse();
        bias.reverse();
        Ok(Gradients {
            weights,
            bias,
            input: g,
        })
    }

    /// One Adam step (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
    /// If a mask is attached, pruned weights are re-zeroed afterwards so they
    /// can never drift off zero.
    pub fn apply_update(
        &mut self,
        grads: &Gradients,
        opt: &mut AdamState,
        learning_rate: f64,
    ) -> Result<()> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and positive, got {learning_rate}"
            )));
        }
        if grads.weights.len() != self.layers.len() || opt.m_w.len() != self.layers.len() {
            return Err(Error::ShapeMismatch(
                "gradient/optimizer layer count does not match network".into(),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        opt.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(opt.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(opt.t as i32);
        for (l, layer) in self.layers.iter_mut().enumerate() {
            if grads.weights[l].dim() != layer.weights.dim()
                || grads.bias[l].dim() != layer.bias.dim()
            {
                return Err(Error::ShapeMismatch(format!(
                    "gradient shape mismatch at layer {l}"
                )));
            }
            Zip::from(&mut layer.weights)
                .and(&mut opt.m_w[l])
                .and(&mut opt.v_w[l])
                .and(&grads.weights[l])
                .for_each(|w, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *w -= learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
                });
            Zip::from(&mut layer.bias)
                .and(&mut opt.m_b[l])
                .and(&mut opt.v_b[l])
                .and(&grads.bias[l])
                .for_each(|w, m, v, &g| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *w -= learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
                });
        }
        if let Some(mask) = &self.mask {
            for (l, layer) in self.layers.iter_mut().enumerate() {
                Zip::from(&mut layer.weights)
                    .and(mask.layer(l))
                    .for_each(|w, &keep| {
                        if keep == 0 {
                            *w = 0.0;
                        }
                    });
            }
        }
        self.version += 1;
        Ok(())
    }

    /// Eval-mode activations of hidden layer `layer_index` (0-based).
    pub fn embeddings(&self, x: &Array2<f64>, layer_index: usize) -> Result<Array2<f64>> {
        if layer_index >= self.arch.n_hidden() {
            return Err(Error::InvalidConfig(format!(
                "hidden layer index {layer_index} out of range (network has {} hidden layers)",
                self.arch.n_hidden()
            )));
        }
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in self.layers.iter().take(layer_index + 1) {
            a = (a.dot(&layer.weights) + &layer.bias).mapv(|v| v.max(0.0));
        }
        Ok(a)
    }
}

// --- checkpoint ---

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// Row-major flattened `n_in x n_out` weights.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AdamFile {
    t: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    magic: String,
    version: u32,
    arch: Vec<usize>,
    layers: Vec<LayerFile>,
    #[serde(default)]
    mask: Option<Vec<String>>,
    #[serde(default)]
    adam: Option<AdamFile>,
    #[serde(default)]
    registry_hash: Option<String>,
    #[serde(default)]
    config_fingerprint: Option<String>,
}

/// A saved model: parameters, optional attached mask, optional optimizer
/// state, and provenance strings tying it to the feature registry and the
/// training configuration.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub adam: Option<AdamState>,
    pub registry_hash: Option<String>,
    pub config_fingerprint: Option<String>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let params = &self.params;
        let mut layers = Vec::with_capacity(params.layers.len());
        for layer in &params.layers {
            if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite("cannot save non-finite parameters".into()));
            }
            layers.push(LayerFile {
                weights: layer.weights.iter().copied().collect(),
                bias: layer.bias.to_vec(),
            });
        }
        let mask = params.mask.as_ref().map(|m| {
            (0..params.arch.n_layers())
                .map(|l| {
                    m.layer(l)
                        .iter()
                        .map(|&keep| if keep == 0 { '0' } else { '1' })
                        .collect()
                })
                .collect()
        });
        let adam = self.adam.as_ref().map(|a| AdamFile {
            t: a.t,
            m_w: a.m_w.iter().map(|m| m.iter().copied().collect()).collect(),
            v_w: a.v_w.iter().map(|m| m.iter().copied().collect()).collect(),
            m_b: a.m_b.iter().map(|m| m.to_vec()).collect(),
            v_b: a.v_b.iter().map(|m| m.to_vec()).collect(),
        });
        let file = CheckpointFile {
            magic: CHECKPOINT_MAGIC.into(),
            version: CHECKPOINT_VERSION,
            arch: params.arch.layer_sizes.clone(),
            layers,
            mask,
            adam,
            registry_hash: self.registry_hash.clone(),
            config_fingerprint: self.config_fingerprint.clone(),
        };
        let json = serde_json::to_string(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: not a checkpoint ({e})", path.display())))?;
        if file.magic != CHECKPOINT_MAGIC {
            return Err(Error::Schema(format!(
                "{}: bad magic {:?}",
                path.display(),
                file.magic
            )));
        }
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint version {}",
                file.version
            )));
        }
        let arch = NetworkArch::new(file.arch)?;
        if file.layers.len() != arch.n_layers() {
            return Err(Error::Schema(format!(
                "checkpoint has {} layers, architecture needs {}",
                file.layers.len(),
                arch.n_layers()
            )));
        }
        let mut layers = Vec::with_capacity(arch.n_layers());
        for (l, lf) in file.layers.into_iter().enumerate() {
            let (n_in, n_out) = arch.layer_shape(l);
            if lf.weights.len() != n_in * n_out || lf.bias.len() != n_out {
                return Err(Error::Schema(format!("layer {l} has wrong element count")));
            }
            if !lf.weights.iter().chain(lf.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} in checkpoint")));
            }
            layers.push(DenseLayer {
                weights: Array2::from_shape_vec((n_in, n_out), lf.weights)
                    .expect("validated shape"),
                bias: Array1::from_vec(lf.bias),
            });
        }
        let mask = match file.mask {
            None => None,
            Some(lines) => Some(Mask::from_bit_strings(&arch, &lines)?),
        };
        let adam = match file.adam {
            None => None,
            Some(af) => {
                let mut state = AdamState::new(&arch);
                state.t = af.t;
                if af.m_w.len() != arch.n_layers()
                    || af.v_w.len() != arch.n_layers()
                    || af.m_b.len() != arch.n_layers()
                    || af.v_b.len() != arch.n_layers()
                {
                    return Err(Error::Schema("optimizer state layer count mismatch".into()));
                }
                for l in 0..arch.n_layers() {
                    let (n_in, n_out) = arch.layer_shape(l);
                    if af.m_w[l].len() != n_in * n_out
                        || af.v_w[l].len() != n_in * n_out
                        || af.m_b[l].len() != n_out
                        || af.v_b[l].len() != n_out
                    {
                        return Err(Error::Schema(format!(
                            "optimizer state shape mismatch at layer {l}"
                        )));
                    }
                    state.m_w[l] =
                        Array2::from_shape_vec((n_in, n_out), af.m_w[l].clone()).expect("shape");
                    state.v_w[l] =
                        Array2::from_shape_vec((n_in, n_out), af.v_w[l].clone()).expect("shape");
                    state.m_b[l] = Array1::from_vec(af.m_b[l].clone());
                    state.v_b[l] = Array1::from_vec(af.v_b[l].clone());
                }
                Some(state)
            }
        };
        let mut params = NetworkParams {
            arch,
            layers,
            mask: None,
            version: 0,
        };
        if let Some(mask) = mask {
            params.attach_mask(mask)?;
        }
        Ok(Self {
            params,
            adam,
            registry_hash: file.registry_hash,
            config_fingerprint: file.config_fingerprint,
        })
    }
}
