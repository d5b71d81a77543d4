use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths plus one activation per affine layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("layer_sizes", "need at least input and output widths, all > 0"));
        }
        if self.activations.len() != self.layer_sizes.len() - 1 {
            return Err(Error::invalid("activations", "one activation per layer"));
        }
        Ok(())
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        let acts: Vec<&str> = self
            .activations
            .iter()
            .map(|a| match a {
                Activation::Relu => "relu",
                Activation::Tanh => "tanh",
                Activation::Identity => "identity",
            })
            .collect();
        write!(f, "{} [{}]", sizes.join("-"), acts.join(","))
    }
}

/// Flat parameter-space gradient, laid out like [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    arch: Architecture,
    params: Vec<f64>,
}

/// Layer outputs retained for the backward pass. `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    values: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.values.last().expect("cache holds the input at least")
    }
}

impl Network {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let n = arch.param_count();
        Ok(Network { arch, params: vec![0.0; n] })
    }

    /// He-uniform weights for relu layers, Xavier-uniform otherwise; zero
    /// biases.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        let mut net = Network::zeros(arch)?;
        let mut offset = 0;
        for (l, w) in net.arch.layer_sizes.clone().windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = match net.arch.activations[l] {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.gen_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// `input -> hidden... (relu) -> output (output_activation)`.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer_sizes = vec![input];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(output);
        let mut activations = vec![Activation::Relu; hidden.len()];
        activations.push(output_activation);
        Network::new(Architecture { layer_sizes, activations }, rng)
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch { expected: arch.param_count(), got: params.len() });
        }
        Ok(Network { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.arch.layer_sizes.last().expect("validated")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.cols });
        }
        Ok(())
    }

    fn layer_forward(&self, l: usize, offset: usize, x: &Matrix) -> Matrix {
        let (fan_in, fan_out) = (self.arch.layer_sizes[l], self.arch.layer_sizes[l + 1]);
        let w = &self.params[offset..offset + fan_in * fan_out];
        let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        let mut out = Matrix::zeros(x.rows, fan_out);
        for r in 0..x.rows {
            out.row_mut(r).copy_from_slice(b);
        }
        gemm(x.rows, fan_in, fan_out, &x.data, false, w, false, &mut out.data, true);
        let act = self.arch.activations[l];
        if act != Activation::Identity {
            for v in &mut out.data {
                *v = act.apply(*v);
            }
        }
        out
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut offset = 0;
        let mut cur: Option<Matrix> = None;
        for l in 0..self.arch.activations.len() {
            let next = self.layer_forward(l, offset, cur.as_ref().unwrap_or(x));
            offset += self.arch.layer_sizes[l] * self.arch.layer_sizes[l + 1] + self.arch.layer_sizes[l + 1];
            cur = Some(next);
        }
        Ok(cur.expect("at least one layer"))
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.arch.layer_sizes.len());
        values.push(x.clone());
        let mut offset = 0;
        for l in 0..self.arch.activations.len() {
            let next = self.layer_forward(l, offset, values.last().expect("non-empty"));
            offset += self.arch.layer_sizes[l] * self.arch.layer_sizes[l + 1] + self.arch.layer_sizes[l + 1];
            values.push(next);
        }
        let out = values.last().expect("non-empty").clone();
        Ok((out, ForwardCache { values }))
    }

    fn backward_impl(&self, cache: &ForwardCache, upstream: &Matrix, want_params: bool) -> Result<(Option<Gradient>, Matrix)> {
        let out = cache.output();
        if upstream.rows != out.rows || upstream.cols != out.cols {
            return Err(Error::DimensionMismatch { expected: out.cols, got: upstream.cols });
        }
        let n_layers = self.arch.activations.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut o = 0;
        for l in 0..n_layers {
            offsets.push(o);
            o += self.arch.layer_sizes[l] * self.arch.layer_sizes[l + 1] + self.arch.layer_sizes[l + 1];
        }
        let mut grad = if want_params { Some(vec![0.0; self.params.len()]) } else { None };
        let mut delta = upstream.clone();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.arch.layer_sizes[l], self.arch.layer_sizes[l + 1]);
            let act = self.arch.activations[l];
            let y = &cache.values[l + 1];
            if act != Activation::Identity {
                for (d, &yv) in delta.data.iter_mut().zip(&y.data) {
                    *d *= act.derivative_from_output(yv);
                }
            }
            let x = &cache.values[l];
            let off = offsets[l];
            if let Some(g) = grad.as_mut() {
                // dW = x^T delta, db = column sums of delta
                gemm(fan_in, x.rows, fan_out, &x.data, true, &delta.data, false, &mut g[off..off + fan_in * fan_out], false);
                let gb = &mut g[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
                for r in 0..delta.rows {
                    for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                        *b += d;
                    }
                }
            }
            // dX = delta W^T
            let w = &self.params[off..off + fan_in * fan_out];
            let mut dx = Matrix::zeros(delta.rows, fan_in);
            gemm(delta.rows, fan_out, fan_in, &delta.data, false, w, true, &mut dx.data, false);
            delta = dx;
        }
        Ok((grad.map(Gradient), delta))
    }

    /// Exact gradients of a scalar loss given `upstream = dL/d(output)`.
    /// Returns the parameter gradient and the gradient with respect to the
    /// network input, so losses can be chained through composed networks.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Gradient, Matrix)> {
        let (g, dx) = self.backward_impl(cache, upstream, true)?;
        Ok((g.expect("requested"), dx))
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn input_gradient(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Matrix> {
        Ok(self.backward_impl(cache, upstream, false)?.1)
    }
}

/// `target <- (1 - tau) target + tau online`, elementwise.
pub fn polyak_update(target: &mut Network, online: &Network, tau: f64) -> Result<()> {
    if target.arch != online.arch {
        return Err(Error::ArchitectureMismatch {
            expected: target.arch.to_string(),
            found: online.arch.to_string(),
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("tau", "must lie in [0, 1]"));
    }
    if tau == 1.0 {
        target.params.copy_from_slice(&online.params);
    } else if tau > 0.0 {
        for (t, o) in target.params.iter_mut().zip(&online.params) {
            *t = (1.0 - tau) * *t + tau * o;
        }
    }
    Ok(())
}
