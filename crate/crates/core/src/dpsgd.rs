//! Full-batch DP-SGD: per-example clipping, one Gaussian noise vector per
//! step, and only the final parameters returned.

use crate::error::{Error, Result};
use crate::nn::{loss_and_param_gradient, ModelArch, ModelParams, Sample};
use crate::rng::SeededStream;

/// Training hyperparameters. The batch is always the full dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSgdConfig {
    pub learning_rate: f64,
    pub iterations: u64,
    pub clip_norm: f64,
    pub noise_multiplier: f64,
    /// Poisson sampling rate; only 1.0 (full batch) is supported.
    pub sampling_rate: f64,
    pub seed: u64,
}

impl DpSgdConfig {
    pub fn new(learning_rate: f64, iterations: u64, clip_norm: f64, noise_multiplier: f64, seed: u64) -> Self {
        DpSgdConfig {
            learning_rate,
            iterations,
            clip_norm,
            noise_multiplier,
            sampling_rate: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::config(format!("clip norm must be positive, got {}", self.clip_norm)));
        }
        if !(self.noise_multiplier >= 0.0 && self.noise_multiplier.is_finite()) {
            return Err(Error::config(format!(
                "noise multiplier must be finite and >= 0, got {}",
                self.noise_multiplier
            )));
        }
        if self.sampling_rate != 1.0 {
            return Err(Error::config(format!(
                "only full-batch training is supported (sampling rate 1), got {}",
                self.sampling_rate
            )));
        }
        Ok(())
    }
}

/// A non-empty list of samples with a common shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::domain("dataset is empty"))?;
        let shape = first.x.shape().to_vec();
        if let Some(bad) = samples.iter().find(|s| s.x.shape() != shape.as_slice()) {
            return Err(Error::Shape {
                expected: shape,
                got: bad.x.shape().to_vec(),
            });
        }
        Ok(Dataset { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `self ∪ {extra}`, appended last.
    pub fn with_extra(&self, extra: Sample) -> Result<Dataset> {
        let mut samples = self.samples.clone();
        samples.push(extra);
        Dataset::new(samples)
    }

    /// Every label must be a valid class for `arch` and every sample must fit
    /// its input shape.
    pub fn check_against(&self, arch: &ModelArch) -> Result<()> {
        if self.samples[0].x.shape() != arch.input_shape() {
            return Err(Error::Shape {
                expected: arch.input_shape().to_vec(),
                got: self.samples[0].x.shape().to_vec(),
            });
        }
        if let Some(bad) = self.samples.iter().find(|s| s.y >= arch.classes()) {
            return Err(Error::domain(format!(
                "label {} out of range for {} classes",
                bad.y,
                arch.classes()
            )));
        }
        Ok(())
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    crate::nn::dot(v, v).sqrt()
}

/// `g / max(1, ‖g‖₂ / C)`. Vectors already within the ball are returned
/// unchanged, and the result's computed norm never exceeds `C`.
pub fn clip_gradient(g: &[f64], clip_norm: f64) -> Vec<f64> {
    let scale = clip_scale(g, l2_norm(g), clip_norm);
    if scale == 1.0 {
        return g.to_vec();
    }
    g.iter().map(|x| x * scale).collect()
}

/// Factor that brings `g` (of norm `norm`) into the `C`-ball. When rounding
/// would leave the scaled norm a few ulps above `C`, the factor is nudged
/// down until it does not.
fn clip_scale(g: &[f64], norm: f64, clip_norm: f64) -> f64 {
    if norm <= clip_norm {
        return 1.0;
    }
    let mut scale = clip_norm / norm;
    while scale > 0.0 && scaled_norm(g, scale) > clip_norm {
        scale = scale.next_down();
    }
    scale
}

fn scaled_norm(g: &[f64], scale: f64) -> f64 {
    crate::nn::scaled_sq_norm(g, scale).sqrt()
}

/// `Σᵢ clip(∇ℓ(θ; xᵢ), C)` over the whole dataset, summed in dataset order.
pub fn clipped_gradient_sum(params: &ModelParams, data: &Dataset, clip_norm: f64) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; params.theta().len()];
    for (i, sample) in data.samples().iter().enumerate() {
        let (_, g) = loss_and_param_gradient(params, sample)?;
        let norm = l2_norm(&g);
        if !norm.is_finite() && g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient for example {i}")));
        }
        let scale = clip_scale(&g, norm, clip_norm);
        if scale == 1.0 {
            for (s, v) in sum.iter_mut().zip(&g) {
                *s += v;
            }
        } else {
            for (s, v) in sum.iter_mut().zip(&g) {
                *s += v * scale;
            }
        }
    }
    Ok(sum)
}

/// Applies `θ ← θ − η/B · (clipped_sum + z)` with `z ~ N(0, (Cσ)² I)` drawn
/// in parameter-index order. Exactly `θ.len()` variates are drawn, even
/// when `σ = 0`, so the stream position depends only on the step count.
pub fn noisy_update(
    theta: &mut [f64],
    clipped_sum: &[f64],
    batch_size: usize,
    cfg: &DpSgdConfig,
    stream: &mut SeededStream,
) -> Result<()> {
    let noise_std = cfg.clip_norm * cfg.noise_multiplier;
    let scale = cfg.learning_rate / batch_size as f64;
    for (t, g) in theta.iter_mut().zip(clipped_sum) {
        let z = noise_std * stream.standard_normal();
        *t -= scale * (g + z);
        if !t.is_finite() {
            return Err(Error::Numerical("parameter became non-finite".into()));
        }
    }
    Ok(())
}

/// One DP-SGD iteration over the full dataset.
pub fn dp_sgd_step(
    params: &ModelParams,
    data: &Dataset,
    cfg: &DpSgdConfig,
    stream: &mut SeededStream,
) -> Result<ModelParams> {
    let sum = clipped_gradient_sum(params, data, cfg.clip_norm)?;
    let mut next = params.clone();
    noisy_update(next.theta_mut(), &sum, data.len(), cfg, stream)?;
    Ok(next)
}

/// Trains from a seeded initialization and returns `θ_T` along with the
/// stream, so callers can inspect how many variates were consumed.
pub fn train_with_stream(arch: &ModelArch, data: &Dataset, cfg: &DpSgdConfig) -> Result<(ModelParams, SeededStream)> {
    cfg.validate()?;
    data.check_against(arch)?;
    let mut stream = SeededStream::new(cfg.seed);
    let mut params = ModelParams::init(arch.clone(), &mut stream);
    for _ in 0..cfg.iterations {
        params = dp_sgd_step(&params, data, cfg, &mut stream)?;
    }
    Ok((params, stream))
}

/// Trains and returns only the final model.
pub fn train(arch: &ModelArch, data: &Dataset, cfg: &DpSgdConfig) -> Result<ModelParams> {
    train_with_stream(arch, data, cfg).map(|(params, _)| params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn toy_data(n: usize, dim: usize) -> Dataset {
        let mut stream = SeededStream::new(99);
        let samples = (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..dim).map(|_| 0.5 + 0.5 * stream.uniform_symmetric(1.0)).collect();
                Sample::new(Tensor::new(vec![dim], x).unwrap(), i % 2).unwrap()
            })
            .collect();
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn clip_examples() {
        let g = vec![0.3, 0.4];
        assert_eq!(clip_gradient(&g, 1.0), g);
        let big = vec![1.2, 1.6];
        let clipped = clip_gradient(&big, 1.0);
        assert!(l2_norm(&clip_gradient(&[0.1, 0.2, 0.3, 0.7, 1e3, -3.3, 2.2], 0.3)) <= 0.3);
        assert!((clipped[0] - 0.6).abs() < 1e-15 && (clipped[1] - 0.8).abs() < 1e-15);
        assert!((l2_norm(&clipped) - 1.0).abs() < 1e-15);
        assert_eq!(clip_gradient(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let ok = DpSgdConfig::new(1.0, 3, 1.0, 0.5, 0);
        assert!(ok.validate().is_ok());
        assert!(DpSgdConfig { iterations: 0, ..ok.clone() }.validate().is_err());
        assert!(DpSgdConfig { clip_norm: 0.0, ..ok.clone() }.validate().is_err());
        assert!(DpSgdConfig { noise_multiplier: -1.0, ..ok.clone() }.validate().is_err());
        assert!(DpSgdConfig { sampling_rate: 0.1, ..ok }.validate().is_err());
    }

    #[test]
    fn identical_samples_without_noise_step_by_clipped_gradient() {
        let one = toy_data(1, 4).samples()[0].clone();
        let data = Dataset::new(vec![one.clone(), one.clone(), one.clone()]).unwrap();
        let arch = ModelArch::mlp(4, 3, 2).unwrap();
        let params = ModelParams::init(arch, &mut SeededStream::new(1));
        let cfg = DpSgdConfig::new(0.7, 1, 0.01, 0.0, 0);
        let next = dp_sgd_step(&params, &data, &cfg, &mut SeededStream::new(2)).unwrap();
        let g = clip_gradient(&crate::nn::param_gradient(&params, &one).unwrap(), 0.01);
        for ((a, b), gi) in next.theta().iter().zip(params.theta()).zip(&g) {
            assert!((a - (b - 0.7 * gi)).abs() < 1e-15);
        }
    }

    #[test]
    fn one_iteration_equals_one_step_from_init() {
        let data = toy_data(6, 3);
        let arch = ModelArch::mlp(3, 4, 2).unwrap();
        let cfg = DpSgdConfig::new(0.5, 1, 1.0, 1.3, 17);
        let trained = train(&arch, &data, &cfg).unwrap();
        let mut stream = SeededStream::new(17);
        let init = ModelParams::init(arch, &mut stream);
        let stepped = dp_sgd_step(&init, &data, &cfg, &mut stream).unwrap();
        assert_eq!(trained, stepped);
    }

    #[test]
    fn training_is_deterministic_and_consumes_fixed_draws() {
        let data = toy_data(8, 3);
        let arch = ModelArch::mlp(3, 4, 2).unwrap();
        let cfg = DpSgdConfig::new(0.5, 4, 1.0, 2.0, 3);
        let (a, stream) = train_with_stream(&arch, &data, &cfg).unwrap();
        let b = train(&arch, &data, &cfg).unwrap();
        assert_eq!(a, b);
        let p = arch.param_count() as u64;
        assert_eq!(stream.draws(), p + cfg.iterations * p);
    }

    #[test]
    fn label_outside_arch_rejected() {
        let data = toy_data(4, 3);
        let arch = ModelArch::new(vec![3], vec![crate::nn::Layer::Dense { input: 3, output: 1 }], 1).unwrap();
        let cfg = DpSgdConfig::new(0.5, 1, 1.0, 0.0, 0);
        assert!(train(&arch, &data, &cfg).is_err());
    }

    #[test]
    fn dataset_rejects_mixed_shapes() {
        let a = Sample::new(Tensor::new(vec![2], vec![0.0; 2]).unwrap(), 0).unwrap();
        let b = Sample::new(Tensor::new(vec![3], vec![0.0; 3]).unwrap(), 0).unwrap();
        assert!(Dataset::new(vec![a, b]).is_err());
        assert!(Dataset::new(vec![]).is_err());
    }
}
