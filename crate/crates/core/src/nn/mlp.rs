use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    /// Exponential linear unit with `α = 1`.
    Elu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    /// Derivative at pre-activation `z` given the output `a = apply(z)`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Elu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Elu),
            _ => Err(argument(format!("unknown activation tag {tag}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Elu => "elu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "elu" => Ok(Activation::Elu),
            _ => Err(crate::error::config(format!("unknown activation '{s}'"))),
        }
    }
}

/// Layer widths `(input, hidden…, output)` with one activation per hidden
/// layer; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(argument("an MLP needs at least one hidden layer"));
        }
        if widths.contains(&0) {
            return Err(argument("layer widths must be at least 1"));
        }
        if activations.len() != widths.len() - 2 {
            return Err(argument("one activation per hidden layer is required"));
        }
        Ok(Self { widths, activations })
    }

    pub fn uniform(input: usize, hidden: &[usize], activation: Activation, output: usize) -> Result<Self> {
        let widths = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(output))
            .collect();
        Self::new(widths, vec![activation; hidden.len()])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    widths: Vec<usize>,
    /// Input to each layer (`inputs[0]` is the network input).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Fully connected network over a flat parameter vector.
///
/// Parameters are stored per layer in declaration order: the weight matrix
/// (`in × out`, row-major) followed by the bias (`out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Self {
        let params = vec![0.0; spec.n_params()];
        Self { spec, params }
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.n_params() {
            return Err(argument(format!(
                "expected {} parameters, got {}",
                spec.n_params(),
                params.len()
            )));
        }
        Ok(Self { spec, params })
    }

    /// Fan-in scaled uniform weights `U(-1/√in, 1/√in)`, zero biases; the
    /// output layer's weights are further multiplied by `output_scale`.
    pub fn init(spec: MlpSpec, output_scale: f64, rng: &mut SimRng) -> Self {
        let mut mlp = Self::zeros(spec);
        let n_layers = mlp.spec.n_layers();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (mlp.spec.widths[l], mlp.spec.widths[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == n_layers { output_scale } else { 1.0 };
            let off = mlp.weight_offset(l);
            for w in &mut mlp.params[off..off + fan_in * fan_out] {
                *w = rng.random_range(-bound..bound) * scale;
            }
        }
        mlp
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn weight_offset(&self, layer: usize) -> usize {
        self.spec.widths.windows(2).take(layer).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let (fan_in, fan_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
        let off = self.weight_offset(l);
        let w = ArrayView2::from_shape((fan_in, fan_out), &self.params[off..off + fan_in * fan_out])
            .expect("layer shape");
        let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        (w, b)
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.spec.input_width() {
            return Err(argument(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.spec.input_width()
            )));
        }
        Ok(())
    }

    /// Batched forward pass (one sample per row) retaining the cache needed
    /// by [`Mlp::backward`].
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let n_layers = self.spec.n_layers();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut current = x.to_owned();
        for l in 0..n_layers {
            let (w, b) = self.layer(l);
            let mut z = current.dot(&w);
            z.rows_mut().into_iter().for_each(|mut row| {
                row.iter_mut().zip(b).for_each(|(v, bias)| *v += bias);
            });
            inputs.push(current);
            if l + 1 == n_layers {
                current = z;
            } else {
                let act = self.spec.activations[l];
                current = z.mapv(|v| act.apply(v));
                pre.push(z);
            }
        }
        let cache = ForwardCache { widths: self.spec.widths.clone(), inputs, pre };
        Ok((current, cache))
    }

    /// Forward pass without a cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let n_layers = self.spec.n_layers();
        let mut current = x.to_owned();
        for l in 0..n_layers {
            let (w, b) = self.layer(l);
            let mut z = current.dot(&w);
            let act = (l + 1 < n_layers).then(|| self.spec.activations[l]);
            z.rows_mut().into_iter().for_each(|mut row| {
                row.iter_mut().zip(b).for_each(|(v, bias)| {
                    *v += bias;
                    if let Some(act) = act {
                        *v = act.apply(*v);
                    }
                });
            });
            current = z;
        }
        Ok(current)
    }

    pub fn forward_one(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let (out, cache) = self.forward(x)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Reverse pass: given `∂L/∂output` per row, returns the parameter
    /// gradient (summed over the batch, flat layout) and `∂L/∂input`.
    pub fn backward(&self, cache: &ForwardCache, dout: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        if cache.widths != self.spec.widths {
            return Err(Error::State("forward cache belongs to a different architecture".into()));
        }
        if dout.nrows() != cache.batch_size() || dout.ncols() != self.spec.output_width() {
            return Err(argument("output gradient shape does not match the forward batch"));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = dout.to_owned();
        for l in (0..self.spec.n_layers()).rev() {
            let (w, _) = self.layer(l);
            let (fan_in, fan_out) = (self.spec.widths[l], self.spec.widths[l + 1]);
            let off = self.weight_offset(l);
            let dw = cache.inputs[l].t().dot(&delta);
            grads[off..off + fan_in * fan_out]
                .iter_mut()
                .zip(dw.iter())
                .for_each(|(g, d)| *g = *d);
            let db = delta.sum_axis(Axis(0));
            grads[off + fan_in * fan_out..off + fan_in * fan_out + fan_out]
                .iter_mut()
                .zip(db.iter())
                .for_each(|(g, d)| *g = *d);
            let mut dx = delta.dot(&w.t());
            if l > 0 {
                let act = self.spec.activations[l - 1];
                ndarray::Zip::from(&mut dx)
                    .and(&cache.pre[l - 1])
                    .and(&cache.inputs[l])
                    .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            }
            delta = dx;
        }
        Ok((grads, delta))
    }
}
