//! Dense multilayer perceptrons with ReLU, sine and identity activations,
//! reverse-mode gradients and plain gradient descent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

pub const DEFAULT_OMEGA0: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// `sin(omega0 · z)`.
    Sine { omega0: f64 },
    Identity,
}

impl Activation {
    pub fn sine() -> Self {
        Activation::Sine { omega0: DEFAULT_OMEGA0 }
    }

    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Sine { omega0 } => (T::lit(omega0) * z).sin(),
            Activation::Identity => z,
        }
    }

    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sine { omega0 } => {
                let w = T::lit(omega0);
                w * (w * z).cos()
            }
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Layer<T: Scalar> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
            activation,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return invalid("layer dimensions must be positive");
        }
        if self.weights.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return invalid(format!(
                "layer {}x{} has {} weights and {} biases",
                self.out_dim,
                self.in_dim,
                self.weights.len(),
                self.bias.len()
            ));
        }
        if let Activation::Sine { omega0 } = self.activation {
            if !(omega0 > 0.0 && omega0.is_finite()) {
                return invalid(format!("omega0 must be positive, got {omega0}"));
            }
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("layer parameter".into()));
        }
        Ok(())
    }

    fn pre_activation(&self, x: &[T]) -> Vec<T> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + *w * *xi))
            .collect()
    }
}

/// Per-layer inputs and pre-activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T: Scalar> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Gradients<T: Scalar> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(m: &Mlp<T>) -> Self {
        Self {
            weights: m.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            bias: m.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights).chain(self.bias.iter_mut().zip(&other.bias)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = *x + s * *y;
            }
        }
    }

    /// Parameters in [`Mlp::params`] order.
    pub fn flatten(&self) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|g| *g == T::zero())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T: Scalar> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Mlp<T> {
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("network needs at least one layer");
        }
        for l in &layers {
            l.validate()?;
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return invalid(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_dim,
                    i + 1,
                    w[1].in_dim
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Zero-parameter network with layer widths `dims`, `hidden` activations
    /// on every layer but the last, which uses `output`.
    pub fn new(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return invalid("need at least input and output widths");
        }
        let n = dims.len() - 1;
        Self::from_layers(
            (0..n)
                .map(|i| Layer::zeros(dims[i], dims[i + 1], if i + 1 == n { output } else { hidden }))
                .collect(),
        )
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::LengthMismatch { expected: self.num_params(), found: p.len() });
        }
        let mut it = p.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// SIREN initialization: first layer `U[−1/n, 1/n]`, later layers
    /// `U[−√(6/n)/ω0, √(6/n)/ω0]` with `n` the fan-in, zero biases. Hidden
    /// layers must be sine; the output layer may be identity, in which case
    /// it uses the preceding layer's `ω0`.
    pub fn siren_init(&mut self, rng: &mut SeededRng) -> Result<()> {
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let ok = matches!(l.activation, Activation::Sine { .. })
                || (i == last && i > 0 && l.activation == Activation::Identity);
            if !ok {
                return invalid(format!("siren_init requires sine layers, layer {i} is {:?}", l.activation));
            }
        }
        let mut omega = DEFAULT_OMEGA0;
        for (i, l) in self.layers.iter_mut().enumerate() {
            if let Activation::Sine { omega0 } = l.activation {
                omega = omega0;
            }
            let n = l.in_dim as f64;
            let bound = if i == 0 { 1.0 / n } else { (6.0 / n).sqrt() / omega };
            fill_uniform(l, bound, rng);
        }
        Ok(())
    }

    /// He-uniform initialization `U[−√(6/n), √(6/n)]`, zero biases.
    pub fn he_init(&mut self, rng: &mut SeededRng) {
        for l in &mut self.layers {
            let bound = (6.0 / l.in_dim as f64).sqrt();
            fill_uniform(l, bound, rng);
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::LengthMismatch { expected: self.input_dim(), found: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in &self.layers {
            a = l.pre_activation(&a).into_iter().map(|z| l.activation.apply(z)).collect();
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let mut cache = ForwardCache { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::with_capacity(self.layers.len()) };
        let mut a = x.to_vec();
        for l in &self.layers {
            let z = l.pre_activation(&a);
            let next = z.iter().map(|v| l.activation.apply(*v)).collect();
            cache.inputs.push(a);
            cache.pre.push(z);
            a = next;
        }
        Ok((a, cache))
    }

    /// Hidden-layer outputs of a forward pass.
    pub fn activations(&self, cache: &ForwardCache<T>) -> Vec<Vec<T>> {
        cache.inputs[1..].to_vec()
    }

    /// Gradients of `upstream · output` through the recorded pass.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &[T]) -> Result<Gradients<T>> {
        if cache.pre.len() != self.layers.len() {
            return invalid("forward cache does not belong to this network");
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::LengthMismatch { expected: self.output_dim(), found: upstream.len() });
        }
        let mut g = Gradients::zeros_like(self);
        let mut delta_out = upstream.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let delta: Vec<T> = delta_out
                .iter()
                .zip(&cache.pre[i])
                .map(|(d, z)| *d * l.activation.derivative(*z))
                .collect();
            let input = &cache.inputs[i];
            for (r, d) in delta.iter().enumerate() {
                g.bias[i][r] = *d;
                let row = &mut g.weights[i][r * l.in_dim..(r + 1) * l.in_dim];
                for (w, x) in row.iter_mut().zip(input) {
                    *w = *d * *x;
                }
            }
            if i > 0 {
                let mut prev = vec![T::zero(); l.in_dim];
                for (r, d) in delta.iter().enumerate() {
                    for (p, w) in prev.iter_mut().zip(&l.weights[r * l.in_dim..(r + 1) * l.in_dim]) {
                        *p = *p + *d * *w;
                    }
                }
                delta_out = prev;
            }
        }
        Ok(g)
    }

    fn check_shape(&self, g: &Gradients<T>) -> Result<()> {
        let ok = g.weights.len() == self.layers.len()
            && g.bias.len() == self.layers.len()
            && self
                .layers
                .iter()
                .zip(g.weights.iter().zip(&g.bias))
                .all(|(l, (w, b))| w.len() == l.weights.len() && b.len() == l.bias.len());
        if ok {
            Ok(())
        } else {
            invalid("gradient shape does not match network")
        }
    }

    /// `θ ← θ − lr·∇θ` in place.
    pub fn apply_sgd(&mut self, g: &Gradients<T>, lr: T) -> Result<()> {
        if !(lr >= T::zero() && lr.is_finite()) {
            return invalid(format!("learning rate must be non-negative, got {lr}"));
        }
        self.check_shape(g)?;
        for (l, (gw, gb)) in self.layers.iter_mut().zip(g.weights.iter().zip(&g.bias)) {
            for (w, d) in l.weights.iter_mut().zip(gw).chain(l.bias.iter_mut().zip(gb)) {
                *w = *w - lr * *d;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        Self::from_layers(m.layers)
    }
}

fn fill_uniform<T: Scalar>(l: &mut Layer<T>, bound: f64, rng: &mut SeededRng) {
    for w in &mut l.weights {
        *w = T::lit(rng.random_range(-bound..=bound));
    }
    for b in &mut l.bias {
        *b = T::zero();
    }
}

/// Functional form of [`Mlp::apply_sgd`].
pub fn sgd_step<T: Scalar>(m: &Mlp<T>, g: &Gradients<T>, lr: T) -> Result<Mlp<T>> {
    let mut out = m.clone();
    out.apply_sgd(g, lr)?;
    Ok(out)
}

/// Mean squared error over all samples and output components, with its
/// gradient.
pub fn mse_and_gradient<T: Scalar>(m: &Mlp<T>, samples: &[(T, Vec<T>)]) -> Result<(T, Gradients<T>)> {
    if samples.is_empty() {
        return invalid("no samples");
    }
    let d = m.output_dim();
    let norm = T::lit((samples.len() * d) as f64);
    let mut loss = T::zero();
    let mut grad = Gradients::zeros_like(m);
    for (t, y) in samples {
        if y.len() != d {
            return Err(Error::LengthMismatch { expected: d, found: y.len() });
        }
        let (out, cache) = m.forward_cached(&[*t])?;
        let resid: Vec<T> = out.iter().zip(y).map(|(o, y)| *o - *y).collect();
        loss = loss + resid.iter().map(|r| *r * *r).sum::<T>();
        let up: Vec<T> = resid.iter().map(|r| T::lit(2.0) * *r / norm).collect();
        grad.add_scaled(&m.backward(&cache, &up)?, T::one());
    }
    Ok((loss / norm, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitResult<T: Scalar> {
    /// Loss before the update of each epoch.
    pub losses: Vec<T>,
    /// Loss after the last update.
    pub final_loss: T,
}

/// Full-batch gradient descent on the mean squared error of a scalar-input
/// network against `samples`.
pub fn fit_signal<T: Scalar>(m: &mut Mlp<T>, samples: &[(T, Vec<T>)], epochs: usize, lr: T) -> Result<FitResult<T>> {
    if samples.is_empty() {
        return invalid("fit_signal needs at least one sample");
    }
    if m.input_dim() != 1 {
        return invalid(format!("fit_signal needs a scalar-input network, got input dim {}", m.input_dim()));
    }
    let mut losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (loss, g) = mse_and_gradient(m, samples)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteValue("training loss diverged".into()));
        }
        losses.push(loss);
        m.apply_sgd(&g, lr)?;
    }
    let (final_loss, _) = mse_and_gradient(m, samples)?;
    Ok(FitResult { losses, final_loss })
}
