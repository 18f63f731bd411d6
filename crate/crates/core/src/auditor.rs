//! Threshold distinguisher over loss observations, Clopper-Pearson bounding
//! of its error rates, and conversion to an empirical `ε` lower bound.

use std::fmt;
use std::str::FromStr;

use crate::accountant::{mu_empirical, mu_to_epsilon};
use crate::error::{Error, Result};
use crate::stats::clopper_pearson_upper;

/// Losses of the audit sample under held-out models of each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    /// Models trained without the canary.
    pub without: Vec<f64>,
    /// Models trained with the canary.
    pub with: Vec<f64>,
}

impl ObservationSet {
    pub fn new(without: Vec<f64>, with: Vec<f64>) -> Result<Self> {
        if without.is_empty() || with.is_empty() {
            return Err(Error::domain("both observation arms must be non-empty"));
        }
        if without.iter().chain(&with).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite observation".into()));
        }
        Ok(ObservationSet { without, with })
    }
}

/// Orientation of the threshold test.
///
/// `HighWithout` counts a false positive when a without-canary loss is
/// `≥ τ` and a false negative when a with-canary loss is `< τ`. `LowWithout`
/// swaps the inequalities (`≤ τ` / `> τ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    HighWithout,
    LowWithout,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HighWithout => "high_without",
            Direction::LowWithout => "low_without",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high_without" => Ok(Direction::HighWithout),
            "low_without" => Ok(Direction::LowWithout),
            other => Err(Error::config(format!("unknown direction {other:?}"))),
        }
    }
}

fn error_counts(obs: &ObservationSet, tau: f64, direction: Direction) -> (u64, u64) {
    let count = |values: &[f64], pred: &dyn Fn(f64) -> bool| values.iter().filter(|v| pred(**v)).count() as u64;
    match direction {
        Direction::HighWithout => (count(&obs.without, &|o| o >= tau), count(&obs.with, &|o| o < tau)),
        Direction::LowWithout => (count(&obs.without, &|o| o <= tau), count(&obs.with, &|o| o > tau)),
    }
}

/// Raw `(FPR, FNR)` of the threshold test at `tau`.
pub fn rates_at_threshold(obs: &ObservationSet, tau: f64, direction: Direction) -> (f64, f64) {
    let (fp, fn_) = error_counts(obs, tau, direction);
    (fp as f64 / obs.without.len() as f64, fn_ as f64 / obs.with.len() as f64)
}

/// Outcome of [`estimate_dp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpEstimate {
    pub mu: f64,
    pub epsilon: f64,
    /// True when a bound sat at 0 or 1 and `ε` was forced to 0.
    pub degenerate: bool,
}

/// `ε` lower bound at `delta` implied by upper bounds on both error rates.
pub fn estimate_dp(fpr_upper: f64, fnr_upper: f64, delta: f64) -> Result<DpEstimate> {
    match mu_empirical(fpr_upper, fnr_upper) {
        Ok(mu) => Ok(DpEstimate {
            mu: mu.mu(),
            epsilon: mu_to_epsilon(mu.mu(), delta)?,
            degenerate: false,
        }),
        Err(Error::DegenerateRate(_)) => Ok(DpEstimate {
            mu: 0.0,
            epsilon: 0.0,
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

/// The best threshold test found by [`audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub tau: f64,
    pub direction: Direction,
    pub fpr: f64,
    pub fnr: f64,
    pub fpr_upper: f64,
    pub fnr_upper: f64,
    pub mu_emp: f64,
    pub eps_emp: f64,
    /// Joint confidence parameter; each rate is bounded at `alpha / 2`.
    pub alpha: f64,
    pub delta: f64,
    pub n_without: usize,
    pub n_with: usize,
    /// Candidate thresholds whose bounds were degenerate.
    pub degenerate_candidates: usize,
}

/// Field order of [`AuditReport::to_key_values`] and [`AuditReport::csv_row`].
pub const REPORT_FIELDS: [&str; 13] = [
    "tau",
    "direction",
    "fpr",
    "fnr",
    "fpr_bar",
    "fnr_bar",
    "mu_emp",
    "eps_emp",
    "alpha",
    "delta",
    "n_without",
    "n_with",
    "degenerate_candidates",
];

impl AuditReport {
    fn values(&self) -> [String; 13] {
        [
            format!("{:?}", self.tau),
            self.direction.to_string(),
            format!("{:?}", self.fpr),
            format!("{:?}", self.fnr),
            format!("{:?}", self.fpr_upper),
            format!("{:?}", self.fnr_upper),
            format!("{:?}", self.mu_emp),
            format!("{:?}", self.eps_emp),
            format!("{:?}", self.alpha),
            format!("{:?}", self.delta),
            self.n_without.to_string(),
            self.n_with.to_string(),
            self.degenerate_candidates.to_string(),
        ]
    }

    /// `key = value` lines in [`REPORT_FIELDS`] order. Floats use Rust's
    /// shortest round-trip formatting.
    pub fn to_key_values(&self) -> String {
        REPORT_FIELDS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn csv_header() -> String {
        REPORT_FIELDS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().join(",")
    }

    /// Parses the output of [`AuditReport::to_key_values`]; unknown keys are
    /// ignored so reports can carry extra metadata.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let map = crate::harness::config::parse_key_values(text)?;
        let get = |k: &str| -> Result<&str> {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::config(format!("report is missing {k:?}")))
        };
        let float = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::config(format!("report field {k:?} is not a number")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::config(format!("report field {k:?} is not an integer")))
        };
        Ok(AuditReport {
            tau: float("tau")?,
            direction: get("direction")?.parse()?,
            fpr: float("fpr")?,
            fnr: float("fnr")?,
            fpr_upper: float("fpr_bar")?,
            fnr_upper: float("fnr_bar")?,
            mu_emp: float("mu_emp")?,
            eps_emp: float("eps_emp")?,
            alpha: float("alpha")?,
            delta: float("delta")?,
            n_without: int("n_without")?,
            n_with: int("n_with")?,
            degenerate_candidates: int("degenerate_candidates")?,
        })
    }
}

/// Midpoints between consecutive distinct values of the pooled observations,
/// plus one sentinel below the minimum and one above the maximum.
pub fn candidate_thresholds(obs: &ObservationSet) -> Vec<f64> {
    let mut pooled: Vec<f64> = obs.without.iter().chain(&obs.with).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let first = pooled[0];
    let last = *pooled.last().unwrap();
    let mut out = Vec::with_capacity(pooled.len() + 1);
    out.push(first - 1.0);
    out.extend(pooled.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(last + 1.0);
    out
}

// Clopper-Pearson bounds for every possible count of one arm.
struct BoundTable {
    n: u64,
    alpha: f64,
    values: Vec<Option<f64>>,
}

impl BoundTable {
    fn new(n: usize, alpha: f64) -> Self {
        BoundTable {
            n: n as u64,
            alpha,
            values: vec![None; n + 1],
        }
    }

    fn get(&mut self, k: u64) -> Result<f64> {
        if let Some(v) = self.values[k as usize] {
            return Ok(v);
        }
        let v = clopper_pearson_upper(k, self.n, self.alpha)?;
        self.values[k as usize] = Some(v);
        Ok(v)
    }
}

/// Sweeps every candidate threshold in both directions and returns the test
/// with the largest `ε` lower bound. Ties go to the smaller threshold, then
/// to [`Direction::HighWithout`].
pub fn audit(obs: &ObservationSet, alpha: f64, delta: f64) -> Result<AuditReport> {
    if obs.without.len() < 2 || obs.with.len() < 2 {
        return Err(Error::domain("audit needs at least two observations per arm"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let alpha_each = alpha / 2.0;
    let mut fpr_bounds = BoundTable::new(obs.without.len(), alpha_each);
    let mut fnr_bounds = BoundTable::new(obs.with.len(), alpha_each);
    let (n0, n1) = (obs.without.len() as f64, obs.with.len() as f64);

    let mut best: Option<AuditReport> = None;
    let mut degenerate_candidates = 0;
    for tau in candidate_thresholds(obs) {
        for direction in [Direction::HighWithout, Direction::LowWithout] {
            let (fp, fn_) = error_counts(obs, tau, direction);
            let fpr_upper = fpr_bounds.get(fp)?;
            let fnr_upper = fnr_bounds.get(fn_)?;
            let est = estimate_dp(fpr_upper, fnr_upper, delta)?;
            if est.degenerate {
                degenerate_candidates += 1;
            }
            if best.as_ref().is_none_or(|b| est.epsilon > b.eps_emp) {
                best = Some(AuditReport {
                    tau,
                    direction,
                    fpr: fp as f64 / n0,
                    fnr: fn_ as f64 / n1,
                    fpr_upper,
                    fnr_upper,
                    mu_emp: est.mu,
                    eps_emp: est.epsilon,
                    alpha,
                    delta,
                    n_without: obs.without.len(),
                    n_with: obs.with.len(),
                    degenerate_candidates: 0,
                });
            }
        }
    }
    let mut report = best.expect("at least two candidates");
    report.degenerate_candidates = degenerate_candidates;
    Ok(report)
}
