//! Repeated runs: fresh ensembles per (target `ε`, seed), audited with every
//! requested sample source.

use crate::error::Result;

use super::audit::{audit_sample_on, run_audit, SampleSource};
use super::config::ExperimentConfig;
use super::ensemble::run_ensemble;
use super::report::AuditRecord;

/// What to repeat and what to audit.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub eps_targets: Vec<f64>,
    /// Run `r` uses base seed `cfg.base_seed + r`.
    pub runs: u64,
    pub sources: Vec<SampleSource>,
    /// Eval models per arm to audit on, taken as prefixes of the eval split.
    /// Empty means the whole split.
    pub eval_sizes: Vec<usize>,
}

impl RunPlan {
    pub fn seeds(&self, cfg: &ExperimentConfig) -> Vec<u64> {
        (0..self.runs).map(|r| cfg.base_seed.wrapping_add(r)).collect()
    }
}

/// Trains one ensemble for `seed` at `eps_target` and audits it.
///
/// A crafted sample is crafted once, then audited on every eval size. When
/// `cfg.out_dir` is set, models go under `eps_<target>/seed_<seed>/`.
pub fn run_once(cfg: &ExperimentConfig, eps_target: f64, seed: u64, plan: &RunPlan) -> Result<Vec<AuditRecord>> {
    let mut cfg = cfg.clone();
    cfg.eps_target = eps_target;
    cfg.base_seed = seed;
    if let Some(dir) = &cfg.out_dir {
        cfg.out_dir = Some(dir.join(format!("eps_{eps_target}")).join(format!("seed_{seed}")));
    }
    let ensemble = run_ensemble(&cfg)?;
    let mut records = Vec::new();
    for &source in &plan.sources {
        let outcome = run_audit(&ensemble, source, &cfg)?;
        let sizes = if plan.eval_sizes.is_empty() {
            vec![None]
        } else {
            plan.eval_sizes.iter().map(|n| Some(*n)).collect()
        };
        for n in sizes {
            let outcome = match n {
                None => outcome.clone(),
                Some(n) => audit_sample_on(
                    &ensemble.eval.truncated(n),
                    source,
                    outcome.sample.clone(),
                    outcome.crafted.clone(),
                    &cfg,
                )?,
            };
            records.push(AuditRecord {
                objective: source.to_string(),
                eps_target,
                seed,
                report: outcome.report,
                observations: outcome.observations,
            });
        }
    }
    Ok(records)
}

/// Every (target, seed) pair of the plan, targets outermost.
pub fn run_plan(cfg: &ExperimentConfig, plan: &RunPlan) -> Result<Vec<AuditRecord>> {
    let mut records = Vec::new();
    for &eps in &plan.eps_targets {
        for seed in plan.seeds(cfg) {
            records.extend(run_once(cfg, eps, seed, plan)?);
        }
    }
    Ok(records)
}
