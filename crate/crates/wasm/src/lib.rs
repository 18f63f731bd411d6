//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers and returns either a number array or a
//! small result object, so the page needs no glue beyond what
//! `wasm-bindgen --target web` generates.

use wasm_bindgen::prelude::*;

use dp_audit::accountant::{calibrate_sigma, epsilon_to_mu, mu_to_epsilon, PrivacyBudget};
use dp_audit::auditor::{audit, AuditReport, ObservationSet};
use dp_audit::crafting::{craft_adversarial, ensemble_losses, Objective};
use dp_audit::harness::config::{ArchSpec, DatasetSpec, ExperimentConfig};
use dp_audit::harness::ensemble::run_ensemble;
use dp_audit::rng::SeededStream;
use dp_audit::stats::{normal_cdf, normal_quantile};

const HISTOGRAM_BINS: usize = 24;

fn js_err(e: dp_audit::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `ε` reached by `μ`-GDP at the given `δ`.
#[wasm_bindgen(js_name = muToEpsilon)]
pub fn mu_to_epsilon_js(mu: f64, delta: f64) -> Result<f64, JsError> {
    mu_to_epsilon(mu, delta).map_err(js_err)
}

/// Smallest `μ` whose `(ε, δ)` curve passes through the given point.
#[wasm_bindgen(js_name = epsilonToMu)]
pub fn epsilon_to_mu_js(epsilon: f64, delta: f64) -> Result<f64, JsError> {
    epsilon_to_mu(epsilon, delta).map(|m| m.mu()).map_err(js_err)
}

/// Noise multiplier for `steps` full-batch steps at `(ε, δ)`.
#[wasm_bindgen(js_name = calibrateSigma)]
pub fn calibrate_sigma_js(epsilon: f64, delta: f64, steps: u32) -> Result<f64, JsError> {
    calibrate_sigma(PrivacyBudget::new(epsilon, delta).map_err(js_err)?, steps as u64).map_err(js_err)
}

/// The `μ`-GDP trade-off curve `β(α) = Φ(Φ⁻¹(1 − α) − μ)` at `points`
/// evenly spaced `α` in `[0, 1]`, returned as `[α₀, β₀, α₁, β₁, …]`.
#[wasm_bindgen(js_name = tradeoffCurve)]
pub fn tradeoff_curve(mu: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let points = points.max(2);
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let alpha = i as f64 / (points - 1) as f64;
        let beta = if alpha == 0.0 {
            1.0
        } else if alpha == 1.0 {
            0.0
        } else {
            normal_cdf(normal_quantile(1.0 - alpha).map_err(js_err)? - mu).map_err(js_err)?
        };
        out.push(alpha);
        out.push(beta);
    }
    Ok(out)
}

/// Outcome of one audit, with histograms of both arms' observations.
#[wasm_bindgen]
pub struct AuditView {
    report: AuditReport,
    bin_edges: Vec<f64>,
    counts_without: Vec<f64>,
    counts_with: Vec<f64>,
    note: String,
}

#[wasm_bindgen]
impl AuditView {
    #[wasm_bindgen(getter, js_name = epsEmp)]
    pub fn eps_emp(&self) -> f64 {
        self.report.eps_emp
    }
    #[wasm_bindgen(getter, js_name = muEmp)]
    pub fn mu_emp(&self) -> f64 {
        self.report.mu_emp
    }
    #[wasm_bindgen(getter)]
    pub fn tau(&self) -> f64 {
        self.report.tau
    }
    #[wasm_bindgen(getter, js_name = fprBar)]
    pub fn fpr_bar(&self) -> f64 {
        self.report.fpr_upper
    }
    #[wasm_bindgen(getter, js_name = fnrBar)]
    pub fn fnr_bar(&self) -> f64 {
        self.report.fnr_upper
    }
    #[wasm_bindgen(getter)]
    pub fn direction(&self) -> String {
        self.report.direction.to_string()
    }
    #[wasm_bindgen(getter, js_name = binEdges)]
    pub fn bin_edges(&self) -> Vec<f64> {
        self.bin_edges.clone()
    }
    #[wasm_bindgen(getter, js_name = countsWithout)]
    pub fn counts_without(&self) -> Vec<f64> {
        self.counts_without.clone()
    }
    #[wasm_bindgen(getter, js_name = countsWith)]
    pub fn counts_with(&self) -> Vec<f64> {
        self.counts_with.clone()
    }
    /// Free-form context, e.g. the crafting objective before and after.
    #[wasm_bindgen(getter)]
    pub fn note(&self) -> String {
        self.note.clone()
    }
}

fn view(obs: &ObservationSet, alpha: f64, delta: f64, note: String) -> Result<AuditView, JsError> {
    let report = audit(obs, alpha, delta).map_err(js_err)?;
    let lo = obs.without.iter().chain(&obs.with).copied().fold(f64::INFINITY, f64::min);
    let hi = obs.without.iter().chain(&obs.with).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let count = |values: &[f64]| {
        let mut c = vec![0.0; HISTOGRAM_BINS];
        for v in values {
            c[(((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1)] += 1.0;
        }
        c
    };
    Ok(AuditView {
        bin_edges: (0..=HISTOGRAM_BINS).map(|i| lo + i as f64 * width).collect(),
        counts_without: count(&obs.without),
        counts_with: count(&obs.with),
        report,
        note,
    })
}

/// Audits two simulated Gaussian loss distributions, `N(0, 1)` without the
/// canary and `N(−shift, 1)` with it, `n` draws each.
#[wasm_bindgen(js_name = simulateAudit)]
pub fn simulate_audit(shift: f64, n: usize, alpha: f64, delta: f64, seed: u32) -> Result<AuditView, JsError> {
    let mut stream = SeededStream::new(seed as u64);
    let without: Vec<f64> = (0..n).map(|_| stream.standard_normal()).collect();
    let with: Vec<f64> = (0..n).map(|_| stream.standard_normal() - shift).collect();
    let obs = ObservationSet::new(without, with).map_err(js_err)?;
    view(&obs, alpha, delta, format!("{n} draws per arm, true μ = {shift}"))
}

/// Results of [`mini_pipeline`].
#[wasm_bindgen]
pub struct PipelineView {
    sigma: f64,
    canary: Option<AuditView>,
    crafted: Option<AuditView>,
    crafted_pixels: Vec<f64>,
}

#[wasm_bindgen]
impl PipelineView {
    #[wasm_bindgen(getter)]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    /// Audit of the blank canary. Can be taken only once.
    #[wasm_bindgen(js_name = takeCanary)]
    pub fn take_canary(&mut self) -> Option<AuditView> {
        self.canary.take()
    }
    /// Audit of the crafted sample. Can be taken only once.
    #[wasm_bindgen(js_name = takeCrafted)]
    pub fn take_crafted(&mut self) -> Option<AuditView> {
        self.crafted.take()
    }
    #[wasm_bindgen(getter, js_name = craftedPixels)]
    pub fn crafted_pixels(&self) -> Vec<f64> {
        self.crafted_pixels.clone()
    }
}

/// Trains a tiny paired ensemble on synthetic 16-pixel data, crafts a sample
/// with `objective` on half of it, and audits canary and crafted sample on
/// the other half.
#[wasm_bindgen(js_name = miniPipeline)]
pub fn mini_pipeline(
    eps_target: f64,
    models_per_arm: usize,
    objective: &str,
    craft_steps: usize,
    seed: u32,
) -> Result<PipelineView, JsError> {
    let objective: Objective = objective.parse().map_err(js_err)?;
    let cfg = ExperimentConfig {
        dataset: DatasetSpec::Synthetic {
            dim: 16,
            classes: 2,
            size: 64,
            seed: 0,
            noise: 0.5,
        },
        arch: ArchSpec::Mlp { hidden: 8 },
        iterations: 10,
        eps_target,
        models_per_arm,
        craft_steps,
        base_seed: seed as u64,
        ..ExperimentConfig::default()
    };
    let ensemble = run_ensemble(&cfg).map_err(js_err)?;
    let sigma = ensemble.manifest.sigma;
    let crafted = craft_adversarial(
        &ensemble.craft.without,
        &ensemble.craft.with,
        &ensemble.canary,
        &cfg.craft_config(objective),
    )
    .map_err(js_err)?;
    let observe = |sample| -> Result<ObservationSet, JsError> {
        ObservationSet::new(
            ensemble_losses(&ensemble.eval.without, sample).map_err(js_err)?,
            ensemble_losses(&ensemble.eval.with, sample).map_err(js_err)?,
        )
        .map_err(js_err)
    };
    let canary_view = view(&observe(&ensemble.canary)?, cfg.alpha, cfg.delta, "blank canary".into())?;
    let crafted_view = view(
        &observe(&crafted.sample)?,
        cfg.alpha,
        cfg.delta,
        format!(
            "{objective}: craft-split objective {:.4} → {:.4} (best step {})",
            crafted.initial_objective, crafted.objective, crafted.best_step
        ),
    )?;
    Ok(PipelineView {
        sigma,
        canary: Some(canary_view),
        crafted: Some(crafted_view),
        crafted_pixels: crafted.sample.x.data().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_endpoints() {
        let c = tradeoff_curve(1.0, 5).unwrap();
        assert_eq!(c.len(), 10);
        assert_eq!((c[0], c[1]), (0.0, 1.0));
        assert_eq!((c[8], c[9]), (1.0, 0.0));
        assert!(c[3] < 1.0 - c[2]);
    }

    #[test]
    fn separated_arms_give_positive_epsilon() {
        let v = simulate_audit(3.0, 200, 0.05, 1e-5, 1).unwrap();
        assert!(v.eps_emp() > 0.0);
        assert_eq!(v.counts_without().iter().sum::<f64>(), 200.0);
        assert_eq!(v.bin_edges().len(), HISTOGRAM_BINS + 1);
    }

    #[test]
    fn pipeline_runs() {
        let mut p = mini_pipeline(10.0, 6, "fisher", 20, 3).unwrap();
        assert!(p.sigma() > 0.0);
        assert!(p.take_canary().is_some());
        assert!(p.take_canary().is_none());
        assert_eq!(p.crafted_pixels().len(), 16);
    }
}
