use crate::error::{Error, Result};
use crate::rng::SeededStream;

use super::arch::{Layer, ModelArch};
use super::tensor::{Sample, Tensor};

/// Flat parameter vector for a [`ModelArch`].
///
/// Layout, layer by layer: dense weights `[output][input]` then biases;
/// convolution weights `[out_ch][in_ch][ky][kx]` then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: ModelArch,
    theta: Vec<f64>,
}

impl ModelParams {
    pub fn new(arch: ModelArch, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != arch.param_count() {
            return Err(Error::Shape {
                expected: vec![arch.param_count()],
                got: vec![theta.len()],
            });
        }
        if let Some(bad) = theta.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite parameter {bad}")));
        }
        Ok(ModelParams { arch, theta })
    }

    pub fn zeros(arch: ModelArch) -> Self {
        let theta = vec![0.0; arch.param_count()];
        ModelParams { arch, theta }
    }

    /// Every weight and bias drawn from `uniform(−1/√fan_in, 1/√fan_in)`,
    /// in parameter-index order.
    pub fn init(arch: ModelArch, stream: &mut SeededStream) -> Self {
        let mut theta = Vec::with_capacity(arch.param_count());
        for layer in arch.layers() {
            let count = layer.param_count();
            if count == 0 {
                continue;
            }
            let bound = 1.0 / (layer.fan_in() as f64).sqrt();
            theta.extend((0..count).map(|_| stream.uniform_symmetric(bound)));
        }
        ModelParams { arch, theta }
    }

    pub fn arch(&self) -> &ModelArch {
        &self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub(crate) fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }
}

/// `−log softmax(logits)[y]`, stabilized by subtracting the max logit.
pub fn cross_entropy(logits: &[f64], y: usize) -> Result<f64> {
    if y >= logits.len() {
        return Err(Error::domain(format!("label {y} out of range for {} classes", logits.len())));
    }
    if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite logit {bad}")));
    }
    Ok(log_sum_exp(logits) - logits[y])
}

/// Dot product with four independent accumulators, so the reduction is not
/// serialized on floating-point add latency. Summation order is fixed.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    lanes4(n, |i| a[i] * b[i])
}

/// `‖s·v‖²`, accumulated exactly as `dot(&w, &w)` would for the
/// materialized `w = s·v`.
pub(crate) fn scaled_sq_norm(v: &[f64], s: f64) -> f64 {
    lanes4(v.len(), |i| {
        let w = v[i] * s;
        w * w
    })
}

#[inline(always)]
fn lanes4(n: usize, term: impl Fn(usize) -> f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let body = n - n % 4;
    let mut i = 0;
    while i < body {
        for (k, slot) in acc.iter_mut().enumerate() {
            *slot += term(i + k);
        }
        i += 4;
    }
    let mut tail = 0.0;
    for j in body..n {
        tail += term(j);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_input(params: &ModelParams, x: &Tensor) -> Result<()> {
    if x.shape() != params.arch.input_shape() {
        return Err(Error::Shape {
            expected: params.arch.input_shape().to_vec(),
            got: x.shape().to_vec(),
        });
    }
    Ok(())
}

fn check_label(params: &ModelParams, y: usize) -> Result<()> {
    if y >= params.arch.classes() {
        return Err(Error::domain(format!(
            "label {y} out of range for {} classes",
            params.arch.classes()
        )));
    }
    Ok(())
}

/// Logits of the model on `x`.
pub fn forward(params: &ModelParams, x: &Tensor) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let mut activations = run_forward(params, x.data());
    Ok(activations.pop().unwrap())
}

/// Cross-entropy of the model on a labelled sample.
pub fn sample_loss(params: &ModelParams, sample: &Sample) -> Result<f64> {
    check_label(params, sample.y)?;
    let logits = forward(params, &sample.x)?;
    cross_entropy(&logits, sample.y)
}

/// Gradient of the sample's cross-entropy with respect to `theta`.
pub fn param_gradient(params: &ModelParams, sample: &Sample) -> Result<Vec<f64>> {
    let (_, grads) = backprop(params, sample, true, false)?;
    Ok(grads.params.unwrap())
}

/// Gradient of the sample's cross-entropy with respect to its pixels.
pub fn input_gradient(params: &ModelParams, sample: &Sample) -> Result<Tensor> {
    let (_, grads) = backprop(params, sample, false, true)?;
    sample.x.with_data(grads.input.unwrap())
}

/// Loss and input gradient from a single forward/backward pass.
pub fn loss_and_input_gradient(params: &ModelParams, sample: &Sample) -> Result<(f64, Vec<f64>)> {
    let (loss, grads) = backprop(params, sample, false, true)?;
    Ok((loss, grads.input.unwrap()))
}

/// Loss and parameter gradient from a single forward/backward pass.
pub fn loss_and_param_gradient(params: &ModelParams, sample: &Sample) -> Result<(f64, Vec<f64>)> {
    let (loss, grads) = backprop(params, sample, true, false)?;
    Ok((loss, grads.params.unwrap()))
}

struct Gradients {
    params: Option<Vec<f64>>,
    input: Option<Vec<f64>>,
}

// Activations entering each layer, followed by the logits.
fn run_forward(params: &ModelParams, x: &[f64]) -> Vec<Vec<f64>> {
    let arch = &params.arch;
    let mut activations = Vec::with_capacity(arch.layers().len() + 1);
    activations.push(x.to_vec());
    let mut offset = 0;
    for (index, layer) in arch.layers().iter().enumerate() {
        let input = activations.last().unwrap();
        let weights = &params.theta[offset..offset + layer.param_count()];
        let out = match *layer {
            Layer::Dense { input: n_in, output } => dense_forward(weights, input, n_in, output),
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let shape = arch.layer_input_shape(index);
                conv_forward(
                    weights,
                    input,
                    ConvDims::new(in_channels, out_channels, kernel, stride, shape),
                )
            }
            Layer::Relu => input.iter().map(|v| v.max(0.0)).collect(),
            Layer::Flatten => input.clone(),
        };
        offset += layer.param_count();
        activations.push(out);
    }
    activations
}

fn backprop(
    params: &ModelParams,
    sample: &Sample,
    want_params: bool,
    want_input: bool,
) -> Result<(f64, Gradients)> {
    check_input(params, &sample.x)?;
    check_label(params, sample.y)?;
    let arch = &params.arch;
    let activations = run_forward(params, sample.x.data());
    let logits = activations.last().unwrap();
    let loss = cross_entropy(logits, sample.y)?;

    // d loss / d logits = softmax − one_hot(y)
    let lse = log_sum_exp(logits);
    let mut upstream: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    upstream[sample.y] -= 1.0;

    let mut param_grad = if want_params {
        vec![0.0; params.theta.len()]
    } else {
        Vec::new()
    };
    let mut offset = params.theta.len();
    let layers = arch.layers();
    for index in (0..layers.len()).rev() {
        let layer = layers[index];
        offset -= layer.param_count();
        let input = &activations[index];
        // The first layer's input gradient is only needed for pixel gradients.
        let need_input_grad = index > 0 || want_input;
        let weights = &params.theta[offset..offset + layer.param_count()];
        let grad_slot = if want_params {
            Some(&mut param_grad[offset..offset + layer.param_count()])
        } else {
            None
        };
        upstream = match layer {
            Layer::Dense { input: n_in, output } => {
                dense_backward(weights, input, &upstream, n_in, output, grad_slot, need_input_grad)
            }
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let dims = ConvDims::new(
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    arch.layer_input_shape(index),
                );
                conv_backward(weights, input, &upstream, dims, grad_slot, need_input_grad)
            }
            Layer::Relu => input
                .iter()
                .zip(&upstream)
                .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                .collect(),
            Layer::Flatten => upstream,
        };
    }

    Ok((
        loss,
        Gradients {
            params: want_params.then_some(param_grad),
            input: want_input.then_some(upstream),
        },
    ))
}

fn dense_forward(weights: &[f64], input: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let (w, b) = weights.split_at(n_in * n_out);
    (0..n_out)
        .map(|o| {
            let row = &w[o * n_in..(o + 1) * n_in];
            b[o] + dot(row, input)
        })
        .collect()
}

fn dense_backward(
    weights: &[f64],
    input: &[f64],
    upstream: &[f64],
    n_in: usize,
    n_out: usize,
    grad: Option<&mut [f64]>,
    need_input_grad: bool,
) -> Vec<f64> {
    if let Some(grad) = grad {
        let (gw, gb) = grad.split_at_mut(n_in * n_out);
        for o in 0..n_out {
            let g = upstream[o];
            gb[o] += g;
            if g != 0.0 {
                for (slot, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                    *slot += g * x;
                }
            }
        }
    }
    if !need_input_grad {
        return Vec::new();
    }
    let w = &weights[..n_in * n_out];
    let mut down = vec![0.0; n_in];
    for o in 0..n_out {
        let g = upstream[o];
        if g == 0.0 {
            continue;
        }
        for (slot, a) in down.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
            *slot += a * g;
        }
    }
    down
}

#[derive(Clone, Copy)]
struct ConvDims {
    in_ch: usize,
    out_ch: usize,
    k: usize,
    stride: usize,
    h: usize,
    w: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvDims {
    fn new(in_ch: usize, out_ch: usize, k: usize, stride: usize, shape: &[usize]) -> Self {
        let (h, w) = (shape[1], shape[2]);
        ConvDims {
            in_ch,
            out_ch,
            k,
            stride,
            h,
            w,
            out_h: (h - k) / stride + 1,
            out_w: (w - k) / stride + 1,
        }
    }

    fn weight_index(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_ch + ic) * self.k + ky) * self.k + kx
    }

    fn input_index(&self, ic: usize, y: usize, x: usize) -> usize {
        (ic * self.h + y) * self.w + x
    }
}

fn conv_forward(weights: &[f64], input: &[f64], d: ConvDims) -> Vec<f64> {
    let n_w = d.out_ch * d.in_ch * d.k * d.k;
    let (w, b) = weights.split_at(n_w);
    let mut out = vec![0.0; d.out_ch * d.out_h * d.out_w];
    for oc in 0..d.out_ch {
        for oy in 0..d.out_h {
            for ox in 0..d.out_w {
                let mut acc = b[oc];
                for ic in 0..d.in_ch {
                    for ky in 0..d.k {
                        for kx in 0..d.k {
                            acc += w[d.weight_index(oc, ic, ky, kx)]
                                * input[d.input_index(ic, oy * d.stride + ky, ox * d.stride + kx)];
                        }
                    }
                }
                out[(oc * d.out_h + oy) * d.out_w + ox] = acc;
            }
        }
    }
    out
}

fn conv_backward(
    weights: &[f64],
    input: &[f64],
    upstream: &[f64],
    d: ConvDims,
    mut grad: Option<&mut [f64]>,
    need_input_grad: bool,
) -> Vec<f64> {
    let n_w = d.out_ch * d.in_ch * d.k * d.k;
    let mut down = if need_input_grad {
        vec![0.0; input.len()]
    } else {
        Vec::new()
    };
    for oc in 0..d.out_ch {
        for oy in 0..d.out_h {
            for ox in 0..d.out_w {
                let g = upstream[(oc * d.out_h + oy) * d.out_w + ox];
                if g == 0.0 {
                    continue;
                }
                if let Some(grad) = grad.as_deref_mut() {
                    grad[n_w + oc] += g;
                }
                for ic in 0..d.in_ch {
                    for ky in 0..d.k {
                        for kx in 0..d.k {
                            let wi = d.weight_index(oc, ic, ky, kx);
                            let xi = d.input_index(ic, oy * d.stride + ky, ox * d.stride + kx);
                            if let Some(grad) = grad.as_deref_mut() {
                                grad[wi] += g * input[xi];
                            }
                            if need_input_grad {
                                down[xi] += g * weights[wi];
                            }
                        }
                    }
                }
            }
        }
    }
    down
}
