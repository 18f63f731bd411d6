//! Canary construction and adversarial audit-sample crafting.
//!
//! The audit sample starts at the canary and its pixels are moved by
//! projected gradient descent on an objective that rewards separating the
//! loss distribution of models trained without the canary from that of
//! models trained with it. Each arm's losses are summarized as one Gaussian
//! (mean and floored variance across the arm's models).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{loss_and_input_gradient, sample_loss, ModelParams, Sample, Tensor};
use crate::par;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

/// A blank (all-zero) input with the given label.
pub fn make_canary(input_shape: &[usize], label: usize) -> Result<Sample> {
    let x = Tensor::zeros(input_shape.to_vec())?;
    Sample::new(x, label)
}

/// Cross-entropy of `sample` under each model, in model order.
pub fn ensemble_losses(models: &[ModelParams], sample: &Sample) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::domain("ensemble_losses needs at least one model"));
    }
    par::map(models, |m| sample_loss(m, sample)).into_iter().collect()
}

/// Mean and variance of one arm's losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSummary {
    pub mean: f64,
    pub var: f64,
}

impl GaussianSummary {
    /// Population variance plus `var_floor`.
    pub fn of(losses: &[f64], var_floor: f64) -> Self {
        let n = losses.len() as f64;
        let mean = losses.iter().sum::<f64>() / n;
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        GaussianSummary {
            mean,
            var: var + var_floor,
        }
    }
}

/// Losses of the same sample under both arms, with their summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEnsemble {
    pub losses_without: Vec<f64>,
    pub losses_with: Vec<f64>,
    pub without: GaussianSummary,
    pub with: GaussianSummary,
    pub var_floor: f64,
}

impl LossEnsemble {
    pub fn new(losses_without: Vec<f64>, losses_with: Vec<f64>, var_floor: f64) -> Result<Self> {
        if losses_without.is_empty() || losses_with.is_empty() {
            return Err(Error::domain("both loss arms must be non-empty"));
        }
        if !(var_floor > 0.0) {
            return Err(Error::domain(format!("variance floor must be positive, got {var_floor}")));
        }
        let without = GaussianSummary::of(&losses_without, var_floor);
        let with = GaussianSummary::of(&losses_with, var_floor);
        Ok(LossEnsemble {
            losses_without,
            losses_with,
            without,
            with,
            var_floor,
        })
    }
}

/// `mean(ℓ with) − mean(ℓ without)`.
pub fn objective_l2(ens: &LossEnsemble) -> f64 {
    ens.with.mean - ens.without.mean
}

/// Negative Bhattacharyya distance between the arms' Gaussians.
pub fn objective_bhattacharyya(ens: &LossEnsemble) -> f64 {
    -bhattacharyya_distance(ens.without, ens.with)
}

/// `−(μ′ − μ)² / (σ′² + σ²)`.
pub fn objective_fisher(ens: &LossEnsemble) -> f64 {
    -fisher_ratio(ens.without, ens.with)
}

pub fn bhattacharyya_distance(a: GaussianSummary, b: GaussianSummary) -> f64 {
    let s = a.var + b.var;
    (a.mean - b.mean).powi(2) / (4.0 * s) + 0.5 * (s / (2.0 * (a.var * b.var).sqrt())).ln()
}

pub fn fisher_ratio(a: GaussianSummary, b: GaussianSummary) -> f64 {
    (b.mean - a.mean).powi(2) / (a.var + b.var)
}

/// Which separation objective crafting minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    L2,
    Bhattacharyya,
    Fisher,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::L2, Objective::Bhattacharyya, Objective::Fisher];

    pub fn value(self, ens: &LossEnsemble) -> f64 {
        match self {
            Objective::L2 => objective_l2(ens),
            Objective::Bhattacharyya => objective_bhattacharyya(ens),
            Objective::Fisher => objective_fisher(ens),
        }
    }

    /// Partial derivatives of the objective with respect to every per-model
    /// loss, `(∂/∂ℓ without, ∂/∂ℓ with)`. The arm means and variances are
    /// differentiated through, not held fixed.
    pub fn loss_gradients(self, ens: &LossEnsemble) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = (ens.without, ens.with);
        // ∂objective/∂(mean, var) for each arm.
        let (da_mean, da_var, db_mean, db_var) = match self {
            Objective::L2 => (-1.0, 0.0, 1.0, 0.0),
            Objective::Fisher => {
                let s = a.var + b.var;
                let diff = b.mean - a.mean;
                let dvar = diff * diff / (s * s);
                (2.0 * diff / s, dvar, -2.0 * diff / s, dvar)
            }
            Objective::Bhattacharyya => {
                let s = a.var + b.var;
                let diff = a.mean - b.mean;
                let dmean = diff / (2.0 * s);
                let common = -diff * diff / (4.0 * s * s) + 0.5 / s;
                // objective = −distance
                (
                    -dmean,
                    -(common - 0.25 / a.var),
                    dmean,
                    -(common - 0.25 / b.var),
                )
            }
        };
        let chain = |losses: &[f64], summary: GaussianSummary, dmean: f64, dvar: f64| -> Vec<f64> {
            let n = losses.len() as f64;
            losses
                .iter()
                .map(|l| dmean / n + dvar * 2.0 * (l - summary.mean) / n)
                .collect()
        };
        (
            chain(&ens.losses_without, a, da_mean, da_var),
            chain(&ens.losses_with, b, db_mean, db_var),
        )
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::L2 => "l2",
            Objective::Bhattacharyya => "bhattacharyya",
            Objective::Fisher => "fisher",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Objective::L2),
            "bhattacharyya" | "bd" => Ok(Objective::Bhattacharyya),
            "fisher" => Ok(Objective::Fisher),
            other => Err(Error::config(format!("unknown objective {other:?}"))),
        }
    }
}

/// Projected-gradient-descent settings for crafting.
#[derive(Debug, Clone, PartialEq)]
pub struct CraftConfig {
    pub objective: Objective,
    pub steps: usize,
    pub step_size: f64,
    /// Pixels are projected into `[pixel_min, pixel_max]` after each step.
    pub pixel_min: f64,
    pub pixel_max: f64,
    pub var_floor: f64,
}

impl CraftConfig {
    pub fn new(objective: Objective) -> Self {
        CraftConfig {
            objective,
            steps: 500,
            step_size: 0.05,
            pixel_min: 0.0,
            pixel_max: 1.0,
            var_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("crafting needs at least one step"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config(format!("crafting step size must be positive, got {}", self.step_size)));
        }
        if !(0.0 <= self.pixel_min && self.pixel_min < self.pixel_max && self.pixel_max <= 1.0) {
            return Err(Error::config(format!(
                "pixel box [{}, {}] must be a non-empty subset of [0, 1]",
                self.pixel_min, self.pixel_max
            )));
        }
        if !(self.var_floor > 0.0) {
            return Err(Error::config(format!("variance floor must be positive, got {}", self.var_floor)));
        }
        Ok(())
    }
}

/// Objective value and its gradient with respect to the sample's pixels.
pub fn objective_and_pixel_gradient(
    models_without: &[ModelParams],
    models_with: &[ModelParams],
    sample: &Sample,
    objective: Objective,
    var_floor: f64,
) -> Result<(f64, Vec<f64>)> {
    let eval = |models: &[ModelParams]| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let results: Result<Vec<_>> = par::map(models, |m| loss_and_input_gradient(m, sample))
            .into_iter()
            .collect();
        Ok(results?.into_iter().unzip())
    };
    let (losses_without, grads_without) = eval(models_without)?;
    let (losses_with, grads_with) = eval(models_with)?;
    let ens = LossEnsemble::new(losses_without, losses_with, var_floor)?;
    let value = objective.value(&ens);
    if !value.is_finite() {
        return Err(Error::Numerical(format!("{objective} objective is {value}")));
    }
    let (w_without, w_with) = objective.loss_gradients(&ens);
    let mut grad = vec![0.0; sample.x.len()];
    for (weight, g) in w_without.iter().zip(&grads_without).chain(w_with.iter().zip(&grads_with)) {
        for (slot, v) in grad.iter_mut().zip(g) {
            *slot += weight * v;
        }
    }
    Ok((value, grad))
}

/// Result of [`craft_adversarial`].
#[derive(Debug, Clone, PartialEq)]
pub struct Crafted {
    pub sample: Sample,
    /// Objective at the canary.
    pub initial_objective: f64,
    /// Objective at the returned iterate; never above `initial_objective`.
    pub objective: f64,
    /// Iteration at which the returned iterate was reached (0 = the canary).
    pub best_step: usize,
}

/// Crafts an audit sample from the canary by projected gradient descent,
/// returning the best iterate seen. The label stays fixed at the canary's.
pub fn craft_adversarial(
    models_without: &[ModelParams],
    models_with: &[ModelParams],
    canary: &Sample,
    cfg: &CraftConfig,
) -> Result<Crafted> {
    cfg.validate()?;
    if models_without.is_empty() || models_with.is_empty() {
        return Err(Error::domain("crafting needs models in both arms"));
    }
    let mut x = canary.x.data().to_vec();
    let mut current = canary.clone();
    let mut initial_objective = f64::NAN;
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for step in 0..=cfg.steps {
        let (value, grad) =
            objective_and_pixel_gradient(models_without, models_with, &current, cfg.objective, cfg.var_floor)?;
        if step == 0 {
            initial_objective = value;
        }
        if best.as_ref().is_none_or(|(b, _, _)| value < *b) {
            best = Some((value, x.clone(), step));
        }
        if step == cfg.steps {
            break;
        }
        for (p, g) in x.iter_mut().zip(&grad) {
            *p = (*p - cfg.step_size * g).clamp(cfg.pixel_min, cfg.pixel_max);
        }
        current = Sample::new(canary.x.with_data(x.clone())?, canary.y)?;
    }
    let (objective, pixels, best_step) = best.expect("at least one iterate");
    Ok(Crafted {
        sample: Sample::new(canary.x.with_data(pixels)?, canary.y)?,
        initial_objective,
        objective,
        best_step,
    })
}
