//! Gaussian differential privacy accounting.
//!
//! A full-batch DP-SGD run with noise multiplier `σ` is a composition of `T`
//! Gaussian mechanisms with sensitivity equal to the clipping norm, i.e. it is
//! `μ`-GDP with `μ = √T / σ`. The `(ε, δ)` curve of a `μ`-GDP mechanism is
//!
//! ```text
//! δ(ε) = Φ(−ε/μ + μ/2) − e^ε · Φ(−ε/μ − μ/2)
//! ```
//!
//! and empirical attack error rates map back to `μ` through
//! `μ = Φ⁻¹(1 − FPR) − Φ⁻¹(FNR)`.

use crate::error::{Error, Result};
use crate::stats::{log_normal_cdf, normal_quantile, phi};

const EPSILON_BRACKET: (f64, f64) = (0.0, 1000.0);
const MU_BRACKET: (f64, f64) = (1e-6, 100.0);
const MAX_BISECTION_STEPS: usize = 200;

/// An `(ε, δ)` privacy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        check_delta(delta)?;
        Ok(PrivacyBudget { epsilon, delta })
    }
}

/// The `μ` of a `μ`-GDP guarantee.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GdpParam(f64);

impl GdpParam {
    pub fn new(mu: f64) -> Result<Self> {
        if mu >= 0.0 && mu.is_finite() {
            Ok(GdpParam(mu))
        } else {
            Err(Error::domain(format!("mu must be finite and >= 0, got {mu}")))
        }
    }

    pub fn mu(self) -> f64 {
        self.0
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Composition of Gaussian mechanisms: `sqrt(Σ μᵢ²)`. Empty input gives 0.
pub fn gdp_compose(step_mus: &[f64]) -> Result<GdpParam> {
    if let Some(bad) = step_mus.iter().find(|m| !(**m >= 0.0)) {
        return Err(Error::domain(format!("negative step mu {bad}")));
    }
    GdpParam::new(step_mus.iter().map(|m| m * m).sum::<f64>().sqrt())
}

/// `δ(ε)` of a `μ`-GDP mechanism. The subtracted term is evaluated in log
/// space so that large `ε` does not produce `∞ · 0`.
pub fn delta_from_epsilon_mu(epsilon: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!("mu must be positive, got {mu}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    Ok(delta_unchecked(epsilon, mu))
}

fn delta_unchecked(epsilon: f64, mu: f64) -> f64 {
    let ratio = epsilon / mu;
    let first = phi(-ratio + 0.5 * mu);
    let second = (epsilon + log_normal_cdf(-ratio - 0.5 * mu)).exp();
    (first - second).max(0.0)
}

/// Smallest `ε ≥ 0` with `δ(ε) ≤ delta` for a `μ`-GDP mechanism.
pub fn mu_to_epsilon(mu: f64, delta: f64) -> Result<f64> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!("mu must be finite and >= 0, got {mu}")));
    }
    check_delta(delta)?;
    if mu == 0.0 || delta_unchecked(0.0, mu) <= delta {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = EPSILON_BRACKET;
    if delta_unchecked(hi, mu) > delta {
        return Err(Error::NotBracketed(format!(
            "delta({hi}, mu = {mu}) still exceeds {delta}"
        )));
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if delta_unchecked(mid, mu) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// The `μ` whose `(ε, δ)` curve passes through `(epsilon, delta)`: the
/// inverse of [`mu_to_epsilon`] at fixed `delta`.
///
/// `δ(ε, μ)` increases with `μ`, so bisecting on it directly gives the same
/// root as bisecting on `mu_to_epsilon(μ) − ε`, without the nested search.
pub fn epsilon_to_mu(epsilon: f64, delta: f64) -> Result<GdpParam> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::domain(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    check_delta(delta)?;
    if epsilon == 0.0 {
        return GdpParam::new(0.0);
    }
    let (mut lo, mut hi) = MU_BRACKET;
    if delta_unchecked(epsilon, lo) > delta || delta_unchecked(epsilon, hi) <= delta {
        return Err(Error::NotBracketed(format!(
            "no mu in [{lo}, {hi}] reaches delta = {delta} at epsilon = {epsilon}"
        )));
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if delta_unchecked(epsilon, mid) > delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    GdpParam::new(lo)
}

/// Noise multiplier that makes `steps` full-batch DP-SGD iterations satisfy
/// `budget`: `σ = √steps / μ(budget)`.
pub fn calibrate_sigma(budget: PrivacyBudget, steps: u64) -> Result<f64> {
    if steps == 0 {
        return Err(Error::domain("calibrate_sigma needs at least one step"));
    }
    if !(budget.epsilon > 0.0) {
        return Err(Error::domain("calibrate_sigma needs epsilon > 0"));
    }
    let mu = epsilon_to_mu(budget.epsilon, budget.delta)?;
    Ok((steps as f64).sqrt() / mu.mu())
}

/// `ε` spent by `steps` full-batch iterations with noise multiplier `sigma`.
pub fn theoretical_epsilon(sigma: f64, steps: u64, delta: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if sigma.is_infinite() {
        return Ok(0.0);
    }
    mu_to_epsilon((steps as f64).sqrt() / sigma, delta)
}

/// `max(0, Φ⁻¹(1 − fpr_upper) − Φ⁻¹(fnr_upper))`.
pub fn mu_empirical(fpr_upper: f64, fnr_upper: f64) -> Result<GdpParam> {
    for rate in [fpr_upper, fnr_upper] {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::DegenerateRate(rate));
        }
    }
    let mu = normal_quantile(1.0 - fpr_upper)? - normal_quantile(fnr_upper)?;
    GdpParam::new(mu.max(0.0))
}
