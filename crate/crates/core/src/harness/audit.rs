//! Runs one audit: choose the audit sample on craft-split models, observe
//! its losses on eval-split models, and bound `ε`.

use std::fmt;
use std::str::FromStr;

use crate::auditor::{audit, AuditReport, ObservationSet};
use crate::crafting::{craft_adversarial, ensemble_losses, Crafted, Objective};
use crate::error::{Error, Result};
use crate::nn::Sample;

use super::config::ExperimentConfig;
use super::ensemble::{with_threads, ArmModels, Ensemble};

/// Where the audit sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleSource {
    Canary,
    Crafted(Objective),
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSource::Canary => f.write_str("canary"),
            SampleSource::Crafted(o) => write!(f, "{o}"),
        }
    }
}

impl FromStr for SampleSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("canary") {
            Ok(SampleSource::Canary)
        } else {
            s.parse().map(SampleSource::Crafted)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub source: SampleSource,
    pub sample: Sample,
    pub crafted: Option<Crafted>,
    pub observations: ObservationSet,
    pub report: AuditReport,
}

/// Losses of `sample` on the given split's models.
pub fn observe(models: &ArmModels, sample: &Sample) -> Result<ObservationSet> {
    if models.without.is_empty() || models.with.is_empty() {
        return Err(Error::config("the eval split of an arm is empty; nothing to audit"));
    }
    ObservationSet::new(ensemble_losses(&models.without, sample)?, ensemble_losses(&models.with, sample)?)
}

/// Crafts (if requested) on the craft split and audits on the eval split.
pub fn run_audit(ensemble: &Ensemble, source: SampleSource, cfg: &ExperimentConfig) -> Result<AuditOutcome> {
    ensemble.manifest.assert_disjoint_splits();
    let (sample, crafted) = match source {
        SampleSource::Canary => (ensemble.canary.clone(), None),
        SampleSource::Crafted(objective) => {
            let crafted = with_threads(cfg.threads, || {
                craft_adversarial(
                    &ensemble.craft.without,
                    &ensemble.craft.with,
                    &ensemble.canary,
                    &cfg.craft_config(objective),
                )
            })?;
            (crafted.sample.clone(), Some(crafted))
        }
    };
    audit_sample(ensemble, source, sample, crafted, cfg)
}

/// Audits an already chosen sample on the eval split.
pub fn audit_sample(
    ensemble: &Ensemble,
    source: SampleSource,
    sample: Sample,
    crafted: Option<Crafted>,
    cfg: &ExperimentConfig,
) -> Result<AuditOutcome> {
    audit_sample_on(&ensemble.eval, source, sample, crafted, cfg)
}

/// Audits `sample` on an explicit set of eval models (e.g. a subsample of
/// the eval split).
pub fn audit_sample_on(
    eval: &ArmModels,
    source: SampleSource,
    sample: Sample,
    crafted: Option<Crafted>,
    cfg: &ExperimentConfig,
) -> Result<AuditOutcome> {
    let observations = with_threads(cfg.threads, || observe(eval, &sample))?;
    let report = audit(&observations, cfg.alpha, cfg.delta)?;
    Ok(AuditOutcome {
        source,
        sample,
        crafted,
        observations,
        report,
    })
}

/// Audits several sources against one ensemble, in the given order.
pub fn run_audits(ensemble: &Ensemble, sources: &[SampleSource], cfg: &ExperimentConfig) -> Result<Vec<AuditOutcome>> {
    // Crafting already parallelizes over models; sources run one at a time.
    sources.iter().map(|s| run_audit(ensemble, *s, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_names() {
        assert_eq!("canary".parse::<SampleSource>().unwrap(), SampleSource::Canary);
        assert_eq!(
            "fisher".parse::<SampleSource>().unwrap(),
            SampleSource::Crafted(Objective::Fisher)
        );
        assert_eq!(SampleSource::Crafted(Objective::L2).to_string(), "l2");
        assert!("nope".parse::<SampleSource>().is_err());
    }

    #[test]
    fn empty_eval_split_refused() {
        let sample = crate::crafting::make_canary(&[2], 0).unwrap();
        assert!(observe(&ArmModels::default(), &sample).is_err());
    }
}
