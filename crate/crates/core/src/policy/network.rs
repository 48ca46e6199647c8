//! Diagonal-Gaussian policy network: a tanh MLP whose last layer emits the
//! action mean and the log standard deviation side by side.

use rand::Rng;
use rand_distr::{StandardNormal, Uniform};

use super::PolicyError;

/// `ln(1e-3)`
pub const LOG_STD_MIN: f64 = -6.907_755_278_982_137;
/// `ln(10)`
pub const LOG_STD_MAX: f64 = std::f64::consts::LN_10;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkShape {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

impl NetworkShape {
    pub fn new(input: usize, hidden: Vec<usize>, actions: usize) -> Self {
        Self { input, hidden, actions }
    }

    /// Default architecture: two hidden layers of 64 units.
    pub fn standard(input: usize, actions: usize) -> Self {
        Self::new(input, vec![64, 64], actions)
    }

    /// `[input, hidden.., 2 * actions]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(2 * self.actions);
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Initial output of a freshly initialized network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyInit {
    pub mean: f64,
    pub std: f64,
    /// Scale of the output-layer weights relative to Glorot.
    pub output_gain: f64,
}

impl Default for PolicyInit {
    fn default() -> Self {
        Self {
            mean: 0.5,
            std: 0.3,
            output_gain: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOutput {
    pub mean: Vec<f64>,
    /// Clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
}

impl GaussianOutput {
    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| (2.0 * l).exp()).collect()
    }
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_density(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * (z * z + LN_2PI) - ls
        })
        .sum()
}

struct Cache {
    /// Layer inputs: `activations[0]` is the feature vector, then each hidden
    /// layer's tanh output.
    activations: Vec<Vec<f64>>,
    raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    shape: NetworkShape,
    params: Vec<f64>,
}

impl GaussianPolicy {
    pub fn zeros(shape: NetworkShape) -> Self {
        let params = vec![0.0; shape.param_count()];
        Self { shape, params }
    }

    pub fn from_params(shape: NetworkShape, params: Vec<f64>) -> Result<Self, PolicyError> {
        if params.len() != shape.param_count() {
            return Err(PolicyError::Dimension {
                what: "parameter vector",
                expected: shape.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { shape, params })
    }

    /// Glorot-uniform hidden layers; the output layer is scaled down and its
    /// biases set so the initial policy is close to `N(init.mean, init.std²)`.
    pub fn random<R: Rng + ?Sized>(shape: NetworkShape, init: PolicyInit, rng: &mut R) -> Self {
        let sizes = shape.layer_sizes();
        let layers = sizes.len() - 1;
        let mut params = Vec::with_capacity(shape.param_count());
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let last = l + 1 == layers;
            if last {
                bound *= init.output_gain;
            }
            let dist = Uniform::new_inclusive(-bound, bound).unwrap();
            params.extend((0..fan_in * fan_out).map(|_| rng.sample(dist)));
            if last {
                params.extend(std::iter::repeat_n(init.mean, shape.actions));
                params.extend(std::iter::repeat_n(init.std.ln(), shape.actions));
            } else {
                params.extend(std::iter::repeat_n(0.0, fan_out));
            }
        }
        Self { shape, params }
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn actions(&self) -> usize {
        self.shape.actions
    }

    fn check_input(&self, features: &[f64]) -> Result<(), PolicyError> {
        if features.len() != self.shape.input {
            return Err(PolicyError::Dimension {
                what: "feature vector",
                expected: self.shape.input,
                got: features.len(),
            });
        }
        Ok(())
    }

    fn check_action(&self, action: &[f64]) -> Result<(), PolicyError> {
        if action.len() != self.shape.actions {
            return Err(PolicyError::Dimension {
                what: "action",
                expected: self.shape.actions,
                got: action.len(),
            });
        }
        Ok(())
    }

    fn run(&self, features: &[f64]) -> Cache {
        let sizes = self.shape.layer_sizes();
        let layers = sizes.len() - 1;
        let mut activations = Vec::with_capacity(layers);
        let mut input = features.to_vec();
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut out: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(bias)
                .map(|(row, b)| b + row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>())
                .collect();
            if l + 1 < layers {
                out.iter_mut().for_each(|z| *z = z.tanh());
            }
            activations.push(std::mem::replace(&mut input, out));
        }
        Cache { activations, raw: input }
    }

    fn split(&self, raw: &[f64]) -> GaussianOutput {
        let k = self.shape.actions;
        GaussianOutput {
            mean: raw[..k].to_vec(),
            log_std: raw[k..].iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect(),
        }
    }

    /// Vector-Jacobian product: gradient of `d_raw · raw(γ)` with respect to
    /// the parameters, where `raw` is the unclamped output layer.
    fn backward(&self, cache: &Cache, d_raw: &[f64]) -> Vec<f64> {
        let sizes = self.shape.layer_sizes();
        let layers = sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = d_raw.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.activations[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                }
                grad[off + n_in * n_out + o] = d;
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[off..off + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, row) in weights.chunks_exact(n_in).enumerate() {
                let d = delta[o];
                if d != 0.0 {
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
            }
            // through tanh: input is tanh(z), dtanh = 1 - tanh²
            prev.iter_mut().zip(input).for_each(|(p, a)| *p *= 1.0 - a * a);
            delta = prev;
        }
        grad
    }

    pub fn forward(&self, features: &[f64]) -> Result<GaussianOutput, PolicyError> {
        self.check_input(features)?;
        Ok(self.split(&self.run(features).raw))
    }

    /// Gradient of `Σ_k c_k μ_k(γ)`; with `c = e_k` it is row `k` of the mean
    /// Jacobian.
    pub fn mean_vjp(&self, features: &[f64], cotangent: &[f64]) -> Result<Vec<f64>, PolicyError> {
        self.check_input(features)?;
        self.check_action(cotangent)?;
        let cache = self.run(features);
        let mut d_raw = vec![0.0; 2 * self.shape.actions];
        d_raw[..self.shape.actions].copy_from_slice(cotangent);
        Ok(self.backward(&cache, &d_raw))
    }

    pub fn log_density(&self, features: &[f64], action: &[f64]) -> Result<f64, PolicyError> {
        self.check_action(action)?;
        let out = self.forward(features)?;
        Ok(gaussian_log_density(action, &out.mean, &out.log_std))
    }

    /// `(log π(a|s), ∇_γ log π(a|s))`.
    pub fn score(&self, features: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>), PolicyError> {
        self.check_input(features)?;
        self.check_action(action)?;
        let cache = self.run(features);
        let k = self.shape.actions;
        let out = self.split(&cache.raw);
        let mut d_raw = vec![0.0; 2 * k];
        for j in 0..k {
            let inv_var = (-2.0 * out.log_std[j]).exp();
            let diff = action[j] - out.mean[j];
            d_raw[j] = diff * inv_var;
            let raw_ls = cache.raw[k + j];
            // clamped heads carry no gradient
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_ls) {
                d_raw[k + j] = diff * diff * inv_var - 1.0;
            }
        }
        let logp = gaussian_log_density(action, &out.mean, &out.log_std);
        Ok((logp, self.backward(&cache, &d_raw)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, features: &[f64], rng: &mut R) -> Result<Vec<f64>, PolicyError> {
        let out = self.forward(features)?;
        Ok(sample_gaussian(&out.mean, &out.log_std, rng))
    }
}

pub fn sample_gaussian<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let z: f64 = rng.sample(StandardNormal);
            m + ls.exp() * z
        })
        .collect()
}
