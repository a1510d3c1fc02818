//! Grouped convolution layers with batch normalization and bounded
//! activations, and the three weight parameterizations.
//!
//! Tensors are `[batch][channel][row][col]`. Layer weights are stored
//! `[out][in/groups][i][j]`. In the symmetric modes the effective weight is
//! `B ∘ P`, with `P` the ternary pattern of a frozen structure per output
//! feature and `B` the only trainable weight parameter.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::{activation_backward, noisy_relu_forward, threshold_forward};
use crate::compiler::{CORE_INPUTS, CORE_NEURONS};
use crate::error::{Error, Result};
use crate::kernels::{StrengthFunction, SymmetricStructure};
use crate::projection::{project_exact, ProjectionResult};
use crate::tensor::Kernel;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    Unconstrained,
    /// Frozen `(f, ρ, σ1, σ2)`, real `B ∈ [0,1]` trained.
    RelaxedSymmetric,
    /// Frozen `(f, ρ, σ1, σ2)` and binary `B`.
    FrozenSymmetric,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationMode {
    #[default]
    NoisyRelu,
    Threshold,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub patch: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    pub in_features: usize,
    pub out_features: usize,
    #[serde(default = "one")]
    pub groups: usize,
    #[serde(default)]
    pub weight_mode: WeightMode,
    #[serde(default)]
    pub activation: ActivationMode,
}

impl LayerSpec {
    pub fn in_per_group(&self) -> usize {
        self.in_features / self.groups
    }

    pub fn out_per_group(&self) -> usize {
        self.out_features / self.groups
    }

    pub fn weight_len(&self) -> usize {
        self.out_features * self.in_per_group() * self.patch * self.patch
    }

    /// Checks grouping and the per-group core limits.
    pub fn validate(&self, index: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("layer {index}: {msg}")));
        if self.patch == 0 || self.stride == 0 || self.groups == 0 {
            return fail("patch, stride and groups must be positive".into());
        }
        if self.in_features == 0 || self.out_features == 0 {
            return fail("feature counts must be positive".into());
        }
        if !self.in_features.is_multiple_of(self.groups) || !self.out_features.is_multiple_of(self.groups) {
            return fail(format!(
                "{} -> {} features do not split into {} groups",
                self.in_features, self.out_features, self.groups
            ));
        }
        let filter = self.patch * self.patch * self.in_per_group();
        if filter > CORE_INPUTS {
            return fail(format!("filter size {filter} per group exceeds {CORE_INPUTS}"));
        }
        if self.out_per_group() > CORE_NEURONS {
            return fail(format!(
                "{} output features per group exceed {CORE_NEURONS}",
                self.out_per_group()
            ));
        }
        Ok(())
    }

    pub fn output_side(&self, input: usize) -> Result<usize> {
        let padded = input + 2 * self.padding;
        if padded < self.patch {
            return Err(Error::Config(format!(
                "patch {} does not fit padded input {padded}",
                self.patch
            )));
        }
        Ok((padded - self.patch) / self.stride + 1)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

fn default_logit_scale() -> f64 {
    8.0
}

fn default_t() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub classes: usize,
    /// Logit for class `c` is `logit_scale` times the mean activation of the
    /// final features assigned to `c`.
    #[serde(default = "default_logit_scale")]
    pub logit_scale: f64,
    /// Saturation level of the bounded ReLU.
    #[serde(rename = "T", default = "default_t")]
    pub t: f64,
}

impl NetworkSpec {
    /// Validates the stack and returns each layer's output `(c, h, w)`.
    pub fn validate(&self) -> Result<Vec<(usize, usize, usize)>> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        if !(self.t > 0.0) {
            return Err(Error::Config("T must be positive".into()));
        }
        let mut shape = (self.input.channels, self.input.height, self.input.width);
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
            if layer.in_features != shape.0 {
                return Err(Error::Config(format!(
                    "layer {i} expects {} input features, previous layer has {}",
                    layer.in_features, shape.0
                )));
            }
            shape = (
                layer.out_features,
                layer.output_side(shape.1)?,
                layer.output_side(shape.2)?,
            );
            out.push(shape);
        }
        if self.classes == 0 || !shape.0.is_multiple_of(self.classes) {
            return Err(Error::Config(format!(
                "{} final features cannot be divided uniformly among {} classes",
                shape.0, self.classes
            )));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, r: usize, col: usize) -> usize {
        ((n * self.c + c) * self.h + r) * self.w + col
    }

    pub fn sample(&self, n: usize) -> &[f64] {
        let s = self.c * self.h * self.w;
        &self.data[n * s..(n + 1) * s]
    }
}

/// Trainable state of one layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    /// Unconstrained weights; empty once the layer is symmetric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    /// One frozen structure per output feature in the symmetric modes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub structures: Vec<SymmetricStructure>,
    /// `B` in weight layout in the symmetric modes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mask: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_distance: Option<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    #[serde(skip)]
    pattern: Vec<f64>,
    #[serde(skip)]
    velocity: Velocity,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Velocity {
    weights: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

impl Velocity {
    fn zeros(weights: usize, features: usize) -> Self {
        Self {
            weights: vec![0.0; weights],
            gamma: vec![0.0; features],
            beta: vec![0.0; features],
        }
    }
}

/// Per-layer gradients. `weights` is with respect to the effective weight.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

struct LayerCache {
    input: Tensor4,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    pre: Vec<f64>,
    drop: Vec<f64>,
}

/// Options for one training forward pass.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct StepOptions {
    pub epsilon: f64,
    pub dropout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerState>,
}

/// Maps weight layout `[o][ci][i][j]` to `(o, i, j, ci)`.
#[inline]
fn weight_index(l: usize, fin_g: usize, o: usize, ci: usize, i: usize, j: usize) -> usize {
    ((o * fin_g + ci) * l + i) * l + j
}

fn conv_forward(x: &Tensor4, w: &[f64], spec: &LayerSpec, ho: usize, wo: usize) -> Tensor4 {
    let (l, s, p) = (spec.patch, spec.stride, spec.padding as isize);
    let (fin_g, fout_g) = (spec.in_per_group(), spec.out_per_group());
    let mut z = Tensor4::zeros(x.n, spec.out_features, ho, wo);
    for n in 0..x.n {
        for o in 0..spec.out_features {
            let g = o / fout_g;
            for a in 0..ho {
                for b in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..fin_g {
                        let c = g * fin_g + ci;
                        for i in 0..l {
                            let r = (a * s + i) as isize - p;
                            if r < 0 || r >= x.h as isize {
                                continue;
                            }
                            for j in 0..l {
                                let cc = (b * s + j) as isize - p;
                                if cc < 0 || cc >= x.w as isize {
                                    continue;
                                }
                                acc += x.data[x.idx(n, c, r as usize, cc as usize)]
                                    * w[weight_index(l, fin_g, o, ci, i, j)];
                            }
                        }
                    }
                    let zi = z.idx(n, o, a, b);
                    z.data[zi] = acc;
                }
            }
        }
    }
    z
}

/// Returns `(dW, dX)`; `dX` is skipped when `need_input` is false.
fn conv_backward(
    x: &Tensor4,
    w: &[f64],
    dz: &Tensor4,
    spec: &LayerSpec,
    need_input: bool,
) -> (Vec<f64>, Option<Tensor4>) {
    let (l, s, p) = (spec.patch, spec.stride, spec.padding as isize);
    let (fin_g, fout_g) = (spec.in_per_group(), spec.out_per_group());
    let mut dw = vec![0.0; w.len()];
    let mut dx = need_input.then(|| Tensor4::zeros(x.n, x.c, x.h, x.w));
    for n in 0..x.n {
        for o in 0..spec.out_features {
            let g = o / fout_g;
            for a in 0..dz.h {
                for b in 0..dz.w {
                    let d = dz.data[dz.idx(n, o, a, b)];
                    if d == 0.0 {
                        continue;
                    }
                    for ci in 0..fin_g {
                        let c = g * fin_g + ci;
                        for i in 0..l {
                            let r = (a * s + i) as isize - p;
                            if r < 0 || r >= x.h as isize {
                                continue;
                            }
                            for j in 0..l {
                                let cc = (b * s + j) as isize - p;
                                if cc < 0 || cc >= x.w as isize {
                                    continue;
                                }
                                let xi = x.idx(n, c, r as usize, cc as usize);
                                let wi = weight_index(l, fin_g, o, ci, i, j);
                                dw[wi] += d * x.data[xi];
                                if let Some(dx) = dx.as_mut() {
                                    dx.data[xi] += d * w[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (dw, dx)
}

impl LayerState {
    fn new(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (spec.patch * spec.patch * spec.in_per_group()) as f64;
        let a = (3.0 / fan_in).sqrt();
        let weights = (0..spec.weight_len()).map(|_| rng.gen_range(-a..=a)).collect();
        let f = spec.out_features;
        Self {
            weights,
            structures: Vec::new(),
            mask: Vec::new(),
            projection_distance: None,
            gamma: vec![1.0; f],
            beta: vec![0.0; f],
            running_mean: vec![0.0; f],
            running_var: vec![1.0; f],
            pattern: Vec::new(),
            velocity: Velocity::zeros(spec.weight_len(), f),
        }
    }

    fn rebuild(&mut self, spec: &LayerSpec) {
        let (l, fin_g) = (spec.patch, spec.in_per_group());
        self.pattern = if self.structures.is_empty() {
            Vec::new()
        } else {
            let mut p = vec![0.0; spec.weight_len()];
            for (o, s) in self.structures.iter().enumerate() {
                let k = s.pattern(l);
                for ci in 0..fin_g {
                    for i in 0..l {
                        for j in 0..l {
                            p[weight_index(l, fin_g, o, ci, i, j)] = f64::from(k.get(i, j, ci));
                        }
                    }
                }
            }
            p
        };
        self.velocity = Velocity::zeros(spec.weight_len(), spec.out_features);
    }

    /// Effective convolution weights.
    pub fn effective_weights(&self, mode: WeightMode) -> Vec<f64> {
        match mode {
            WeightMode::Unconstrained => self.weights.clone(),
            _ => self.pattern.iter().zip(&self.mask).map(|(p, b)| p * b).collect(),
        }
    }

    /// Kernel of output feature `o` as an `l × l × (in/groups)` tensor.
    pub fn kernel(&self, spec: &LayerSpec, o: usize) -> Kernel<f64> {
        let w = self.effective_weights(spec.weight_mode);
        let (l, fin_g) = (spec.patch, spec.in_per_group());
        Kernel::from_fn(l, fin_g, |i, j, ci| w[weight_index(l, fin_g, o, ci, i, j)])
    }
}

impl Network {
    pub fn new(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers.iter().map(|l| LayerState::new(l, rng)).collect();
        Ok(Self { spec, layers })
    }

    /// Loads a checkpoint and restores derived state.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut net: Network = serde_json::from_str(text)?;
        net.spec.validate()?;
        for (state, spec) in net.layers.iter_mut().zip(&net.spec.layers) {
            let expect = spec.weight_len();
            let ok = match spec.weight_mode {
                WeightMode::Unconstrained => state.weights.len() == expect,
                _ => state.structures.len() == spec.out_features && state.mask.len() == expect,
            };
            if !ok || state.gamma.len() != spec.out_features {
                return Err(Error::Config("checkpoint layer state does not match its spec".into()));
            }
            state.rebuild(spec);
        }
        if net.layers.len() != net.spec.layers.len() {
            return Err(Error::Config("checkpoint layer count does not match its spec".into()));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn t(&self) -> f64 {
        self.spec.t
    }

    /// Packs the given samples of `data` into a batch tensor.
    pub fn batch(data: &super::data::Dataset, indices: &[usize]) -> Tensor4 {
        let mut t = Tensor4::zeros(indices.len(), data.channels, data.height, data.width);
        let s = data.sample_size();
        for (k, &i) in indices.iter().enumerate() {
            t.data[k * s..(k + 1) * s].copy_from_slice(data.image(i));
        }
        t
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        let i = self.spec.input;
        if (x.c, x.h, x.w) != (i.channels, i.height, i.width) {
            return Err(Error::Dimension(format!(
                "network expects {}x{}x{} inputs, got {}x{}x{}",
                i.channels, i.height, i.width, x.c, x.h, x.w
            )));
        }
        Ok(())
    }

    /// Inference pass with running statistics and no noise; returns every
    /// layer's activations.
    pub fn forward_eval(&self, x: &Tensor4) -> Result<Vec<Tensor4>> {
        self.check_input(x)?;
        let t = self.t();
        let mut cur = x.clone();
        let mut outs = Vec::with_capacity(self.layers.len());
        for (state, spec) in self.layers.iter().zip(&self.spec.layers) {
            let (ho, wo) = (spec.output_side(cur.h)?, spec.output_side(cur.w)?);
            let mut z = conv_forward(&cur, &state.effective_weights(spec.weight_mode), spec, ho, wo);
            let plane = ho * wo;
            for (k, v) in z.data.iter_mut().enumerate() {
                let c = (k / plane) % spec.out_features;
                let xhat = (*v - state.running_mean[c]) / (state.running_var[c] + BN_EPS).sqrt();
                let u = state.gamma[c] * xhat + state.beta[c];
                *v = match spec.activation {
                    ActivationMode::NoisyRelu => noisy_relu_forward(u, t, 0.0),
                    ActivationMode::Threshold => threshold_forward(u, t),
                };
            }
            outs.push(z.clone());
            cur = z;
        }
        Ok(outs)
    }

    fn forward_train(
        &mut self,
        x: &Tensor4,
        opts: &StepOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Tensor4, Vec<LayerCache>)> {
        self.check_input(x)?;
        let t = self.t();
        let last = self.layers.len() - 1;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (li, (state, spec)) in self.layers.iter_mut().zip(&self.spec.layers).enumerate() {
            let (ho, wo) = (spec.output_side(cur.h)?, spec.output_side(cur.w)?);
            let mut z = conv_forward(&cur, &state.effective_weights(spec.weight_mode), spec, ho, wo);
            let plane = ho * wo;
            let count = (z.n * plane) as f64;
            let mut xhat = vec![0.0; z.data.len()];
            let mut pre = vec![0.0; z.data.len()];
            let mut inv_std = vec![0.0; spec.out_features];
            for c in 0..spec.out_features {
                let mut mean = 0.0;
                for n in 0..z.n {
                    let base = z.idx(n, c, 0, 0);
                    mean += z.data[base..base + plane].iter().sum::<f64>();
                }
                mean /= count;
                let mut var = 0.0;
                for n in 0..z.n {
                    let base = z.idx(n, c, 0, 0);
                    var += z.data[base..base + plane]
                        .iter()
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>();
                }
                var /= count;
                let is = 1.0 / (var + BN_EPS).sqrt();
                inv_std[c] = is;
                state.running_mean[c] = (1.0 - BN_MOMENTUM) * state.running_mean[c] + BN_MOMENTUM * mean;
                state.running_var[c] = (1.0 - BN_MOMENTUM) * state.running_var[c] + BN_MOMENTUM * var;
                for n in 0..z.n {
                    let base = z.idx(n, c, 0, 0);
                    for k in base..base + plane {
                        xhat[k] = (z.data[k] - mean) * is;
                        pre[k] = state.gamma[c] * xhat[k] + state.beta[c];
                    }
                }
            }
            let use_drop = li < last && opts.dropout > 0.0;
            let mut drop = Vec::new();
            if use_drop {
                drop.reserve(z.data.len());
            }
            for (k, v) in z.data.iter_mut().enumerate() {
                let u = pre[k];
                let mut a = match spec.activation {
                    ActivationMode::NoisyRelu => {
                        let noise = if opts.epsilon > 0.0 {
                            rng.gen_range(-opts.epsilon..=opts.epsilon)
                        } else {
                            0.0
                        };
                        noisy_relu_forward(u, t, noise)
                    }
                    ActivationMode::Threshold => threshold_forward(u, t),
                };
                if use_drop {
                    let keep = if rng.gen::<f64>() < opts.dropout {
                        0.0
                    } else {
                        1.0 / (1.0 - opts.dropout)
                    };
                    a *= keep;
                    drop.push(keep);
                }
                *v = a;
            }
            caches.push(LayerCache {
                input: std::mem::replace(&mut cur, z),
                xhat,
                inv_std,
                pre,
                drop,
            });
        }
        Ok((cur, caches))
    }

    /// Class logits from final activations.
    pub fn logits(&self, out: &Tensor4) -> Vec<Vec<f64>> {
        let classes = self.spec.classes;
        let per = out.c / classes;
        let norm = self.spec.logit_scale / (per * out.h * out.w) as f64;
        (0..out.n)
            .map(|n| {
                (0..classes)
                    .map(|cl| {
                        let start = out.idx(n, cl * per, 0, 0);
                        let end = out.idx(n, (cl + 1) * per - 1, out.h - 1, out.w - 1) + 1;
                        out.data[start..end].iter().sum::<f64>() * norm
                    })
                    .collect()
            })
            .collect()
    }

    /// Argmax of the class scores, lowest class on ties.
    pub fn predict(&self, x: &Tensor4) -> Result<Vec<usize>> {
        let outs = self.forward_eval(x)?;
        let logits = self.logits(outs.last().expect("nonempty network"));
        Ok(logits.iter().map(|row| argmax_lowest(row)).collect())
    }

    /// Mean cross-entropy over the batch and gradients for every layer.
    pub fn loss_and_gradients(
        &mut self,
        x: &Tensor4,
        labels: &[u8],
        opts: &StepOptions,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<LayerGradients>)> {
        if labels.len() != x.n {
            return Err(Error::Dimension("one label per sample is required".into()));
        }
        let (out, caches) = self.forward_train(x, opts, rng)?;
        let logits = self.logits(&out);
        let classes = self.spec.classes;
        let per = out.c / classes;
        let norm = self.spec.logit_scale / (per * out.h * out.w) as f64;
        let batch = x.n as f64;

        let mut loss = 0.0;
        let mut d = Tensor4::zeros(out.n, out.c, out.h, out.w);
        for (n, row) in logits.iter().enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exp.iter().sum();
            let y = labels[n] as usize;
            loss -= (exp[y] / sum).ln();
            for cl in 0..classes {
                let dl = (exp[cl] / sum - if cl == y { 1.0 } else { 0.0 }) / batch * norm;
                let start = d.idx(n, cl * per, 0, 0);
                for v in &mut d.data[start..start + per * out.h * out.w] {
                    *v = dl;
                }
            }
        }
        loss /= batch;

        let t = self.t();
        let mut grads = Vec::with_capacity(self.layers.len());
        for (li, cache) in caches.iter().enumerate().rev() {
            let spec = &self.spec.layers[li];
            let state = &self.layers[li];
            if !cache.drop.is_empty() {
                for (v, k) in d.data.iter_mut().zip(&cache.drop) {
                    *v *= k;
                }
            }
            for (v, &u) in d.data.iter_mut().zip(&cache.pre) {
                *v *= activation_backward(u, t);
            }
            let plane = d.h * d.w;
            let count = (d.n * plane) as f64;
            let mut dgamma = vec![0.0; spec.out_features];
            let mut dbeta = vec![0.0; spec.out_features];
            let mut dz = Tensor4::zeros(d.n, d.c, d.h, d.w);
            for c in 0..spec.out_features {
                let (mut sum_d, mut sum_dx) = (0.0, 0.0);
                for n in 0..d.n {
                    let base = d.idx(n, c, 0, 0);
                    for k in base..base + plane {
                        dgamma[c] += d.data[k] * cache.xhat[k];
                        dbeta[c] += d.data[k];
                    }
                }
                // dx̂ = du · γ
                for n in 0..d.n {
                    let base = d.idx(n, c, 0, 0);
                    for k in base..base + plane {
                        let dxh = d.data[k] * state.gamma[c];
                        sum_d += dxh;
                        sum_dx += dxh * cache.xhat[k];
                    }
                }
                let is = cache.inv_std[c];
                for n in 0..d.n {
                    let base = d.idx(n, c, 0, 0);
                    for k in base..base + plane {
                        let dxh = d.data[k] * state.gamma[c];
                        dz.data[k] = is / count * (count * dxh - sum_d - cache.xhat[k] * sum_dx);
                    }
                }
            }
            let w = state.effective_weights(spec.weight_mode);
            let (dw, dx) = conv_backward(&cache.input, &w, &dz, spec, li > 0);
            grads.push(LayerGradients {
                weights: dw,
                gamma: dgamma,
                beta: dbeta,
            });
            if let Some(dx) = dx {
                d = dx;
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// One momentum SGD step. In the relaxed mode `dB = dW ∘ P`, `B` is
    /// clamped to `[0, 1]` and entries within `snap` of 0 or 1 are snapped.
    /// Frozen masks do not move.
    pub fn apply_gradients(&mut self, grads: &[LayerGradients], lr: f64, momentum: f64, decay: f64, snap: f64) {
        for ((state, spec), g) in self.layers.iter_mut().zip(&self.spec.layers).zip(grads) {
            let step = |p: &mut f64, v: &mut f64, grad: f64| {
                *v = momentum * *v - lr * (grad + decay * *p);
                *p += *v;
            };
            match spec.weight_mode {
                WeightMode::Unconstrained => {
                    for ((p, v), &gr) in state
                        .weights
                        .iter_mut()
                        .zip(&mut state.velocity.weights)
                        .zip(&g.weights)
                    {
                        step(p, v, gr);
                    }
                }
                WeightMode::RelaxedSymmetric => {
                    for (((b, v), &gr), &pat) in state
                        .mask
                        .iter_mut()
                        .zip(&mut state.velocity.weights)
                        .zip(&g.weights)
                        .zip(&state.pattern)
                    {
                        step(b, v, gr * pat);
                        *b = b.clamp(0.0, 1.0);
                        if *b < snap {
                            *b = 0.0;
                        } else if *b > 1.0 - snap {
                            *b = 1.0;
                        }
                    }
                }
                WeightMode::FrozenSymmetric => {}
            }
            for ((p, v), &gr) in state.gamma.iter_mut().zip(&mut state.velocity.gamma).zip(&g.gamma) {
                step(p, v, gr);
            }
            for ((p, v), &gr) in state.beta.iter_mut().zip(&mut state.velocity.beta).zip(&g.beta) {
                step(p, v, gr);
            }
        }
    }

    /// Clips layer `index` to `[-1, 1]`, projects every output kernel onto
    /// the symmetric family and switches the layer to the relaxed mode.
    /// Returns the Frobenius distance over the whole layer.
    pub fn project_layer(&mut self, index: usize, f_choices: &[StrengthFunction]) -> Result<f64> {
        let spec = self.spec.layers[index].clone();
        if spec.weight_mode != WeightMode::Unconstrained {
            return Err(Error::Config(format!("layer {index} is already symmetric")));
        }
        let (l, fin_g) = (spec.patch, spec.in_per_group());
        let state = &mut self.layers[index];
        let mut structures = Vec::with_capacity(spec.out_features);
        let mut mask = vec![0.0; spec.weight_len()];
        let mut sq = 0.0;
        for o in 0..spec.out_features {
            let k = Kernel::from_fn(l, fin_g, |i, j, ci| {
                state.weights[weight_index(l, fin_g, o, ci, i, j)].clamp(-1.0, 1.0)
            });
            let ProjectionResult { spec: r, distance, .. } = project_exact(&k, f_choices)?;
            sq += distance * distance;
            for ci in 0..fin_g {
                for i in 0..l {
                    for j in 0..l {
                        mask[weight_index(l, fin_g, o, ci, i, j)] = r.mask.get(i, j, ci);
                    }
                }
            }
            structures.push(r.structure());
        }
        state.weights.clear();
        state.structures = structures;
        state.mask = mask;
        let distance = sq.sqrt();
        state.projection_distance = Some(distance);
        self.spec.layers[index].weight_mode = WeightMode::RelaxedSymmetric;
        state.rebuild(&spec);
        Ok(distance)
    }

    /// Snaps `B` of a relaxed layer at `threshold` and freezes it.
    pub fn freeze_layer(&mut self, index: usize, threshold: f64) -> Result<()> {
        let spec = &mut self.spec.layers[index];
        if spec.weight_mode == WeightMode::Unconstrained {
            return Err(Error::Config(format!("layer {index} has not been projected")));
        }
        for b in &mut self.layers[index].mask {
            *b = if *b >= threshold { 1.0 } else { 0.0 };
        }
        spec.weight_mode = WeightMode::FrozenSymmetric;
        Ok(())
    }

    pub fn set_activation(&mut self, index: usize, mode: ActivationMode) {
        self.spec.layers[index].activation = mode;
    }

    /// All trainable values in a fixed order: per layer the weight
    /// parameter (`W` or `B`), then `γ`, then `β`.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (state, spec) in self.layers.iter().zip(&self.spec.layers) {
            match spec.weight_mode {
                WeightMode::Unconstrained => out.extend(&state.weights),
                _ => out.extend(&state.mask),
            }
            out.extend(&state.gamma);
            out.extend(&state.beta);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameters().len() {
            return Err(Error::Dimension("parameter vector length mismatch".into()));
        }
        let mut it = values.iter().copied();
        for (state, spec) in self.layers.iter_mut().zip(&self.spec.layers) {
            let target = match spec.weight_mode {
                WeightMode::Unconstrained => &mut state.weights,
                _ => &mut state.mask,
            };
            for slot in target.iter_mut().chain(&mut state.gamma).chain(&mut state.beta) {
                *slot = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Gradients in [`Network::parameters`] order.
    pub fn flatten_gradients(&self, grads: &[LayerGradients]) -> Vec<f64> {
        let mut out = Vec::new();
        for ((state, spec), g) in self.layers.iter().zip(&self.spec.layers).zip(grads) {
            match spec.weight_mode {
                WeightMode::Unconstrained => out.extend(&g.weights),
                _ => out.extend(g.weights.iter().zip(&state.pattern).map(|(d, p)| d * p)),
            }
            out.extend(&g.gamma);
            out.extend(&g.beta);
        }
        out
    }

    /// Pre-activations of a training pass, for checking distance to kinks.
    pub fn train_preactivations(&mut self, x: &Tensor4, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let opts = StepOptions {
            epsilon: 0.0,
            dropout: 0.0,
        };
        let (_, caches) = self.forward_train(x, &opts, rng)?;
        Ok(caches.into_iter().map(|c| c.pre).collect())
    }
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
