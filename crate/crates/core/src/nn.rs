//! Small fully connected networks with reverse-mode gradients and Adam.
//!
//! Batches are rows: an input of shape `(batch, in)` maps to `(batch, out)`.
//! Weights are stored `(fan_in, fan_out)`, so a layer computes `x W + b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Layer inputs and pre-activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Gradients shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Mlp {
    /// Standard `[input, 64, 64, output]` network.
    pub fn init(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_sizes(&[input_dim, HIDDEN[0], HIDDEN[1], output_dim], &mut rng)
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, zero biases.
    pub fn with_sizes<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|s| *s >= 1), "layer sizes must be positive");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((pair[0], pair[1]), |_| rng.gen_range(-bound..bound)));
            biases.push(Array1::zeros(pair[1]));
        }
        Self { weights, biases }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].ncols()
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.layers() - 1;
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.dot(w) + b;
            if l < last {
                h.mapv_inplace(relu);
            }
        }
        Ok(h)
    }

    /// Single-row convenience wrapper around [`Mlp::forward`].
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let last = self.layers() - 1;
        let mut inputs = Vec::with_capacity(self.layers());
        let mut pre = Vec::with_capacity(self.layers());
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = h.dot(w) + b;
            inputs.push(h);
            h = if l < last { z.mapv(relu) } else { z.clone() };
            pre.push(z);
        }
        Ok((h, ForwardCache { inputs, pre }))
    }

    /// Parameter gradients given the loss gradient with respect to the output.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Result<Gradients> {
        let last = self.layers() - 1;
        let expected = cache.pre[last].raw_dim();
        if grad_out.raw_dim() != expected {
            return Err(Error::ShapeMismatch(format!(
                "output gradient {:?} does not match output {:?}",
                grad_out.shape(),
                cache.pre[last].shape()
            )));
        }
        let mut weights = vec![Array2::zeros((0, 0)); self.layers()];
        let mut biases = vec![Array1::zeros(0); self.layers()];
        let mut delta = grad_out.clone();
        for l in (0..self.layers()).rev() {
            if l < last {
                Zip::from(&mut delta).and(&cache.pre[l]).for_each(|d, z| {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let g = cache.inputs[l].t().dot(&delta);
            weights[l] = if g.is_standard_layout() { g } else { g.as_standard_layout().into_owned() };
            biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.weights[l].t());
            }
        }
        Ok(Gradients { weights, biases })
    }

    /// Loss value and parameter gradients for a loss given as a function of
    /// the network output returning `(value, d value / d output)`.
    pub fn gradients<F>(&self, x: ArrayView2<f64>, loss: F) -> Result<(f64, Gradients)>
    where
        F: FnOnce(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
    {
        let (out, cache) = self.forward_cached(x)?;
        let (value, grad_out) = loss(&out)?;
        Ok((value, self.backward(&cache, &grad_out)?))
    }

    /// Versioned plain-text form: a header line, then per layer a shape line,
    /// the row-major weights and the biases, each on one line.
    pub fn to_text(&self) -> String {
        let mut out = format!("mlp v1 layers {}\n", self.layers());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push_str(&format!("{} {}\n", w.nrows(), w.ncols()));
            out.push_str(&join(w.iter()));
            out.push('\n');
            out.push_str(&join(b.iter()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let header = lines.next().ok_or_else(|| bad("empty network text"))?;
        let layers: usize = header
            .strip_prefix("mlp v1 layers ")
            .ok_or_else(|| bad("unsupported network header"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad layer count"))?;
        if layers == 0 {
            return Err(bad("network without layers"));
        }
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for _ in 0..layers {
            let shape: Vec<usize> = lines
                .next()
                .ok_or_else(|| bad("missing shape line"))?
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("bad shape")))
                .collect::<Result<_>>()?;
            let [rows, cols] = shape[..] else { return Err(bad("shape line needs two sizes")) };
            let w = parse_floats(lines.next().ok_or_else(|| bad("missing weights"))?)?;
            let b = parse_floats(lines.next().ok_or_else(|| bad("missing biases"))?)?;
            if w.len() != rows * cols || b.len() != cols {
                return Err(bad("value count does not match shape"));
            }
            if let Some(prev) = weights.last().map(|p: &Array2<f64>| p.ncols()) {
                if prev != rows {
                    return Err(bad("consecutive layers disagree"));
                }
            }
            weights.push(Array2::from_shape_vec((rows, cols), w).map_err(|e| bad(&e.to_string()))?);
            biases.push(Array1::from(b));
        }
        Ok(Self { weights, biases })
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| Error::Checkpoint(format!("bad number {s:?}"))))
        .collect()
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        let z = net.zeros_like();
        Self { weights: z.weights, biases: z.biases }
    }

    pub fn squared_norm(&self) -> f64 {
        let sq = |v: &[f64]| {
            let a = ArrayView1::from(v);
            a.dot(&a)
        };
        self.weights.iter().map(|w| sq(w.as_slice().expect("contiguous"))).sum::<f64>()
            + self.biases.iter().map(|b| sq(b.as_slice().expect("contiguous"))).sum::<f64>()
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

/// Scales all gradient sets together so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut Gradients], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.squared_norm()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale(factor);
        }
    }
    norm
}

/// Bias-corrected Adam for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, lr: f64, eps: f64) -> Self {
        Self { lr, eps, beta1: 0.9, beta2: 0.999, step: 0, m: Gradients::zeros_like(net), v: Gradients::zeros_like(net) }
    }

    pub fn adam_step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (step, inv_root_c2, eps) = (self.lr / c1, 1.0 / c2.sqrt(), self.eps);
        let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for (((p, m), v), g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step * *m / (v.sqrt() * inv_root_c2 + eps);
            }
        };
        fn flat<S, D>(a: &mut ndarray::ArrayBase<S, D>) -> &mut [f64]
        where
            S: ndarray::DataMut<Elem = f64>,
            D: ndarray::Dimension,
        {
            a.as_slice_mut().expect("contiguous")
        }
        for l in 0..net.layers() {
            let g = grads.weights[l].as_slice().expect("contiguous");
            update(flat(&mut net.weights[l]), flat(&mut self.m.weights[l]), flat(&mut self.v.weights[l]), g);
            let g = grads.biases[l].as_slice().expect("contiguous");
            update(flat(&mut net.biases[l]), flat(&mut self.m.biases[l]), flat(&mut self.v.biases[l]), g);
        }
    }
}
