//! Minimal dense neural networks with analytic backpropagation.
//!
//! Everything is f64 and hand-rolled: a multilayer perceptron over a flat
//! parameter vector, reverse-mode gradients, Adam with bias correction, a
//! global-norm gradient clip, and the Gaussian policy head (tanh means,
//! softplus standard deviations). Parameters live in one contiguous
//! layer-ordered vector — weights row-major, then biases — which is also the
//! checkpoint wire format.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floor applied to softplus standard-deviation outputs.
pub const STD_FLOOR: f64 = 1e-6;
/// Adam defaults.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Per-layer activation. `SplitTanhSoftplus` is the Gaussian policy head:
/// tanh on the first half of the layer (means), floored softplus on the
/// second half (standard deviations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Softplus,
    Identity,
    SplitTanhSoftplus,
}

/// A fully connected network over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    acts: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs: a_0 = x through a_{L-1}.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations z_1 through z_L.
    pre_acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Builds a zero-initialized network. `sizes` lists the input width and
    /// every layer width; `acts` names one activation per layer.
    pub fn new(sizes: Vec<usize>, acts: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 || acts.len() != sizes.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} sizes with {} activations",
                sizes.len(),
                acts.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::ShapeMismatch("zero-width layer".into()));
        }
        for (l, &act) in acts.iter().enumerate() {
            if act == Activation::SplitTanhSoftplus && sizes[l + 1] % 2 != 0 {
                return Err(Error::ShapeMismatch(
                    "split head needs an even layer width".into(),
                ));
            }
        }
        let n_params = Self::param_count(&sizes);
        Ok(Mlp { sizes, acts, params: vec![0.0; n_params] })
    }

    /// Rebuilds a network from its shape and a flat parameter vector.
    pub fn from_parts(sizes: Vec<usize>, acts: Vec<Activation>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::new(sizes, acts)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for a {:?} network expecting {}",
                params.len(),
                net.sizes,
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Draws fresh weights: He-uniform (fan-in) ahead of ReLU layers,
    /// Xavier-uniform elsewhere; biases zero. The last layer's weights are
    /// multiplied by `final_scale` (small scales keep an initial policy
    /// near-uniform).
    pub fn init_weights<R: Rng>(&mut self, rng: &mut R, final_scale: f64) {
        let n_layers = self.acts.len();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let limit = match self.acts[l] {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let scale = if l == n_layers - 1 { final_scale } else { 1.0 };
            let (w_off, b_off) = self.layer_offsets(l);
            for w in &mut self.params[w_off..w_off + fan_in * fan_out] {
                *w = rng.gen_range(-limit..=limit) * scale;
            }
            for b in &mut self.params[b_off..b_off + fan_out] {
                *b = 0.0;
            }
        }
    }

    /// Layer widths, input first.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Activations, one per layer.
    pub fn activations(&self) -> &[Activation] {
        &self.acts
    }

    /// Flat parameter vector (weights row-major then bias, per layer).
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable flat parameter vector.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mutable bias slice of the final layer, for head-specific
    /// initialization offsets.
    pub fn final_bias_mut(&mut self) -> &mut [f64] {
        let l = self.acts.len() - 1;
        let (_, b_off) = self.layer_offsets(l);
        let fan_out = self.sizes[l + 1];
        &mut self.params[b_off..b_off + fan_out]
    }

    /// Offsets of layer l's weight block and bias block in the flat vector.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    /// Weight and bias slices of one layer.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w_off, b_off) = self.layer_offsets(l);
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        (&self.params[w_off..w_off + fan_in * fan_out], &self.params[b_off..b_off + fan_out])
    }

    /// Forward pass returning the output and the cache for [`Mlp::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.sizes[0] {
            return Err(Error::ShapeMismatch(format!(
                "input width {} vs expected {}",
                input.len(),
                self.sizes[0]
            )));
        }
        let mut cache = ForwardCache { inputs: Vec::with_capacity(self.acts.len()), pre_acts: Vec::with_capacity(self.acts.len()) };
        let mut activation = input.to_vec();
        for l in 0..self.acts.len() {
            let (w, b) = self.layer(l);
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = vec![0.0; fan_out];
            for i in 0..fan_out {
                let row = &w[i * fan_in..(i + 1) * fan_in];
                let mut acc = b[i];
                for (wij, aj) in row.iter().zip(&activation) {
                    acc += wij * aj;
                }
                z[i] = acc;
            }
            let next = apply_activation(self.acts[l], &z);
            cache.inputs.push(activation);
            cache.pre_acts.push(z);
            activation = next;
        }
        Ok((activation, cache))
    }

    /// Forward pass without keeping the cache.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Reverse-mode gradients for one sample.
    ///
    /// `upstream` is dLoss/dOutput. Returns (parameter gradient aligned with
    /// [`Mlp::params`], input gradient dLoss/dInput).
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n_layers = self.acts.len();
        if upstream.len() != self.sizes[n_layers] {
            return Err(Error::ShapeMismatch(format!(
                "upstream width {} vs output width {}",
                upstream.len(),
                self.sizes[n_layers]
            )));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let z = &cache.pre_acts[l];
            let a_in = &cache.inputs[l];
            for (i, d) in delta.iter_mut().enumerate() {
                *d *= activation_derivative(self.acts[l], z[i], z.len(), i);
            }
            let (w_off, b_off) = self.layer_offsets(l);
            let w = &self.params[w_off..w_off + fan_in * fan_out];
            let mut d_input = vec![0.0; fan_in];
            for i in 0..fan_out {
                let di = delta[i];
                let row = &w[i * fan_in..(i + 1) * fan_in];
                let grad_row = &mut grad[w_off + i * fan_in..w_off + (i + 1) * fan_in];
                for j in 0..fan_in {
                    grad_row[j] = di * a_in[j];
                    d_input[j] += row[j] * di;
                }
                grad[b_off + i] = di;
            }
            if l > 0 {
                delta = d_input;
                // chain through the previous layer's activation on the next loop turn
            } else {
                return Ok((grad, d_input));
            }
        }
        unreachable!("loop returns at l == 0")
    }
}

fn apply_activation(act: Activation, z: &[f64]) -> Vec<f64> {
    match act {
        Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Tanh => z.iter().map(|&v| v.tanh()).collect(),
        Activation::Softplus => z.iter().map(|&v| softplus(v).max(STD_FLOOR)).collect(),
        Activation::Identity => z.to_vec(),
        Activation::SplitTanhSoftplus => {
            let half = z.len() / 2;
            z.iter()
                .enumerate()
                .map(|(i, &v)| if i < half { v.tanh() } else { softplus(v).max(STD_FLOOR) })
                .collect()
        }
    }
}

fn activation_derivative(act: Activation, z: f64, width: usize, index: usize) -> f64 {
    match act {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
        Activation::Softplus => {
            if softplus(z) <= STD_FLOOR {
                0.0
            } else {
                sigmoid(z)
            }
        }
        Activation::Identity => 1.0,
        Activation::SplitTanhSoftplus => {
            if index < width / 2 {
                activation_derivative(Activation::Tanh, z, width, index)
            } else {
                activation_derivative(Activation::Softplus, z, width, index)
            }
        }
    }
}

/// Numerically stable ln(1 + e^z).
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    /// Standard Adam with the usual moment defaults.
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update in place. Rejects non-finite gradients.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch("Adam state size mismatch".into()));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(self.t + 1));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t.min(i32::MAX as u64) as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Scales `grads` so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// A draw from a diagonal Gaussian policy with its log density and entropy.
#[derive(Debug, Clone)]
pub struct GaussianSample {
    pub action: Vec<f64>,
    pub log_density: f64,
    pub entropy: f64,
}

/// Samples a diagonal Gaussian (or returns the mean when `rng` is `None`),
/// with the sample's log density and the distribution entropy.
pub fn gaussian_sample<R: Rng>(
    mean: &[f64],
    std: &[f64],
    rng: Option<&mut R>,
) -> Result<GaussianSample> {
    check_std(mean, std)?;
    let action: Vec<f64> = match rng {
        Some(rng) => mean
            .iter()
            .zip(std)
            .map(|(&mu, &sigma)| mu + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        None => mean.to_vec(),
    };
    Ok(GaussianSample {
        log_density: gaussian_log_density(mean, std, &action)?,
        entropy: gaussian_entropy(std),
        action,
    })
}

/// Log density of `action` under the diagonal Gaussian.
pub fn gaussian_log_density(mean: &[f64], std: &[f64], action: &[f64]) -> Result<f64> {
    check_std(mean, std)?;
    if action.len() != mean.len() {
        return Err(Error::ShapeMismatch("action width vs mean width".into()));
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    Ok(mean
        .iter()
        .zip(std)
        .zip(action)
        .map(|((&mu, &sigma), &a)| {
            let z = (a - mu) / sigma;
            -0.5 * ln_2pi - sigma.ln() - 0.5 * z * z
        })
        .sum())
}

/// Gradients of the log density with respect to the mean and std vectors.
pub fn gaussian_log_density_grad(
    mean: &[f64],
    std: &[f64],
    action: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_std(mean, std)?;
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_std = Vec::with_capacity(std.len());
    for ((&mu, &sigma), &a) in mean.iter().zip(std).zip(action) {
        let diff = a - mu;
        d_mean.push(diff / (sigma * sigma));
        d_std.push(diff * diff / (sigma * sigma * sigma) - 1.0 / sigma);
    }
    Ok((d_mean, d_std))
}

/// Differential entropy of the diagonal Gaussian: sum of 0.5 ln(2 pi e s^2).
pub fn gaussian_entropy(std: &[f64]) -> f64 {
    let c = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    std.iter().map(|&s| c + s.ln()).sum()
}

fn check_std(mean: &[f64], std: &[f64]) -> Result<()> {
    if mean.len() != std.len() {
        return Err(Error::ShapeMismatch("mean width vs std width".into()));
    }
    if let Some(&bad) = std.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::NonPositiveStd(bad));
    }
    Ok(())
}
