use rand::Rng;

use super::matrix::{axpy, dot};
use super::{Fingerprint, Matrix};
use crate::{rng, Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
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
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Parameter(format!("unknown activation `{other}`"))),
        }
    }
}

/// Where one dense layer's weights and bias sit in a flat parameter vector.
///
/// Weights are stored row-major as `fan_out x fan_in`, followed by the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl LayerLayout {
    pub fn end(&self) -> usize {
        self.bias + self.fan_out
    }
}

/// Layer widths from input to output plus the hidden activation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MlpSpec {
    widths: Vec<usize>,
    hidden: Activation,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, hidden: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Parameter("an MLP needs at least one layer".into()));
        }
        if widths.contains(&0) {
            return Err(Error::Parameter("layer widths must be >= 1".into()));
        }
        Ok(Self { widths, hidden })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> Activation {
        self.hidden
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("spec has widths")
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layouts(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let l = LayerLayout {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: offset,
                    bias: offset + w[0] * w[1],
                };
                offset = l.end();
                l
            })
            .collect()
    }

    /// Sum over layers of `(fan_in + 1) * fan_out`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
}

/// Flat learnable parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layouts: Vec<LayerLayout>,
}

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self { values: vec![0.0; spec.param_count()], layouts: spec.layouts() }
    }

    pub fn from_values(spec: &MlpSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, spec needs {}",
                values.len(),
                spec.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("parameter vector has non-finite entries".into()));
        }
        Ok(Self { values, layouts: spec.layouts() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layouts(&self) -> &[LayerLayout] {
        &self.layouts
    }

    /// `(weights, bias)` of layer `i`.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let l = self.layouts[i];
        (&self.values[l.weights..l.bias], &self.values[l.bias..l.end()])
    }

    fn matches(&self, spec: &MlpSpec) -> Result<()> {
        if self.values.len() != spec.param_count() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, spec needs {}",
                self.values.len(),
                spec.param_count()
            )));
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut p = ParamVector::zeros(spec);
    let mut rng = rng::stream(seed, 0x1417);
    for l in spec.layouts() {
        let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        for w in &mut p.values[l.weights..l.bias] {
            *w = rng.random_range(-limit..limit);
        }
    }
    p
}

/// Activations recorded by a forward pass.
///
/// `outputs[0]` is the input batch and `outputs[l + 1]` the output of layer
/// `l` after its activation.
#[derive(Debug, Clone)]
pub struct Trace {
    pub outputs: Vec<Matrix>,
    hidden: Activation,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("trace holds the input")
    }

    pub fn into_output(mut self) -> Matrix {
        self.outputs.pop().expect("trace holds the input")
    }

    /// Folds the on/off pattern of every ReLU unit into `fp`.
    pub fn fingerprint(&self, fp: &mut Fingerprint) {
        if self.hidden != Activation::Relu {
            return;
        }
        let hidden = &self.outputs[1..self.outputs.len() - 1];
        for m in hidden {
            for chunk in m.data().chunks(64) {
                let mut bits = 0u64;
                for (k, &v) in chunk.iter().enumerate() {
                    if v > 0.0 {
                        bits |= 1 << k;
                    }
                }
                fp.push(bits);
            }
        }
    }
}

fn check_input(spec: &MlpSpec, params: &ParamVector, input: &Matrix) -> Result<()> {
    params.matches(spec)?;
    if input.cols() != spec.input_width() {
        return Err(Error::Shape(format!(
            "batch rows have width {}, network expects {}",
            input.cols(),
            spec.input_width()
        )));
    }
    Ok(())
}

pub fn forward_traced(spec: &MlpSpec, params: &ParamVector, input: &Matrix) -> Result<Trace> {
    check_input(spec, params, input)?;
    let layouts = spec.layouts();
    let rows = input.rows();
    let mut outputs = Vec::with_capacity(layouts.len() + 1);
    outputs.push(input.clone());
    for (li, l) in layouts.iter().enumerate() {
        let (w, b) = params.layer(li);
        let x = outputs.last().expect("has input");
        let mut y = Matrix::zeros(rows, l.fan_out);
        let last = li + 1 == layouts.len();
        for r in 0..rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for (o, out) in yr.iter_mut().enumerate() {
                let z = b[o] + dot(&w[o * l.fan_in..(o + 1) * l.fan_in], xr);
                *out = if last { z } else { spec.hidden.apply(z) };
            }
        }
        outputs.push(y);
    }
    Ok(Trace { outputs, hidden: spec.hidden })
}

pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &Matrix) -> Result<Matrix> {
    forward_traced(spec, params, input).map(Trace::into_output)
}

/// Reverse pass over a recorded trace.
///
/// Adds the parameter gradient of `sum(loss_grad * output)` into
/// `grad_params` and, when `want_input_grad` is set, returns the gradient
/// with respect to the input rows.
pub fn backward_traced(
    spec: &MlpSpec,
    params: &ParamVector,
    trace: &Trace,
    loss_grad: &Matrix,
    grad_params: &mut [f64],
    want_input_grad: bool,
) -> Result<Option<Matrix>> {
    params.matches(spec)?;
    if loss_grad.shape() != trace.output().shape() {
        return Err(Error::Shape(format!(
            "loss gradient is {:?}, network output is {:?}",
            loss_grad.shape(),
            trace.output().shape()
        )));
    }
    if grad_params.len() != params.len() {
        return Err(Error::Shape("gradient buffer length differs from parameters".into()));
    }
    let layouts = spec.layouts();
    let rows = loss_grad.rows();
    let mut delta = loss_grad.clone();
    for li in (0..layouts.len()).rev() {
        let l = layouts[li];
        let (w, _) = params.layer(li);
        let x = &trace.outputs[li];
        let need_dx = li > 0 || want_input_grad;
        let mut dx = if need_dx { Matrix::zeros(rows, l.fan_in) } else { Matrix::default() };
        let (gw_all, gb_all) = grad_params[l.weights..l.end()].split_at_mut(l.fan_in * l.fan_out);
        for r in 0..rows {
            let xr = x.row(r);
            let dr = delta.row(r);
            for (o, &d) in dr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                axpy(d, xr, &mut gw_all[o * l.fan_in..(o + 1) * l.fan_in]);
                gb_all[o] += d;
                if need_dx {
                    axpy(d, &w[o * l.fan_in..(o + 1) * l.fan_in], dx.row_mut(r));
                }
            }
        }
        if li > 0 {
            // Through the activation that produced this layer's input.
            for (g, &y) in dx.data_mut().iter_mut().zip(x.data()) {
                *g *= spec.hidden.derivative_from_output(y);
            }
            delta = dx;
        } else {
            return Ok(need_dx.then_some(dx));
        }
    }
    unreachable!("spec has at least one layer")
}

/// Gradients of `sum(loss_grad * forward(batch))` with respect to the
/// parameters and the input rows.
pub fn backward(
    spec: &MlpSpec,
    params: &ParamVector,
    batch: &Matrix,
    loss_grad: &Matrix,
) -> Result<(ParamVector, Matrix)> {
    let trace = forward_traced(spec, params, batch)?;
    let mut grads = ParamVector::zeros(spec);
    let dx = backward_traced(spec, params, &trace, loss_grad, grads.values_mut(), true)?
        .expect("input gradient requested");
    Ok((grads, dx))
}

#[cfg(test)]
mod tests;
