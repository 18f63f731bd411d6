//! Scalar special functions: the standard normal CDF and quantile, binomial
//! lower tails and one-sided Clopper-Pearson upper confidence bounds.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Standard normal CDF, `Φ(x)`.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("normal_cdf of non-finite {x}")));
    }
    Ok(phi(x))
}

/// Standard normal density.
pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

// Unchecked CDF for internal callers that already validated their input.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, accurate deep into the lower tail where `Φ(x)` itself underflows.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return phi(x).ln();
    }
    // Asymptotic series: Φ(x) = φ(x)/|x| · (1 − 1/x² + 3/x⁴ − 15/x⁶ + ...)
    let inv_x2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..=10 {
        term *= -((2 * k - 1) as f64) * inv_x2;
        series += term;
    }
    -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
}

// Acklam's rational approximation, relative error about 1.15e-9.
fn quantile_initial_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal quantile, `Φ⁻¹(p)`, for `0 < p < 1`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("normal_quantile of {p}")));
    }
    if p == 0.0 || p == 1.0 {
        return Err(Error::InfiniteQuantile(p));
    }
    if p > 0.5 {
        // 1 - p is exact here, and the lower tail keeps full relative precision.
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let mut x = quantile_initial_guess(p);
    for _ in 0..2 {
        let density = normal_pdf(x);
        if density <= 0.0 {
            break;
        }
        x -= (phi(x) - p) / density;
    }
    x
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma((n + 1) as f64) - libm::lgamma((k + 1) as f64) - libm::lgamma((n - k + 1) as f64)
}

/// `Pr[X ≤ k]` for `X ~ Binomial(n, p)`, by direct summation of the mass
/// function.
pub fn binomial_tail(k: u64, n: u64, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::domain(format!("binomial_tail with k = {k} > n = {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("binomial_tail with p = {p}")));
    }
    Ok(binomial_tail_unchecked(k, n, p))
}

fn binomial_tail_unchecked(k: u64, n: u64, p: f64) -> f64 {
    if k == n || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let odds = (1.0 - p) / p;
    if k as f64 > n as f64 * p {
        // Above the mode: 1 - Pr[X >= k+1], walking up where terms shrink.
        let first = k + 1;
        let ln_term =
            ln_choose(n, first) + first as f64 * p.ln() + (n - first) as f64 * (-p).ln_1p();
        let mut term = ln_term.exp();
        let mut upper = term;
        for i in first..n {
            term *= (n - i) as f64 / (i + 1) as f64 / odds;
            upper += term;
            if term < upper * 1e-18 {
                break;
            }
        }
        return (1.0 - upper).clamp(0.0, 1.0);
    }
    // At or below the mode: start from the k-th term and walk down with
    // pmf(i-1) = pmf(i) · i/(n-i+1) · (1-p)/p.
    let ln_term = ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p();
    let mut term = ln_term.exp();
    let mut sum = term;
    let mut i = k;
    while i > 0 {
        term *= i as f64 / (n - i + 1) as f64 * odds;
        sum += term;
        i -= 1;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum.min(1.0)
}

/// One-sided upper Clopper-Pearson bound: the smallest `p` with
/// `Pr[X ≤ k | Binomial(n, p)] ≤ alpha`. Returns 1 when `k == n`.
pub fn clopper_pearson_upper(k: u64, n: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("clopper_pearson_upper with n = 0"));
    }
    if k > n {
        return Err(Error::domain(format!("clopper_pearson_upper with k = {k} > n = {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("clopper_pearson_upper with alpha = {alpha}")));
    }
    if k == n {
        return Ok(1.0);
    }
    // The tail is strictly decreasing in p; bisect on [k/n, 1].
    let mut lo = k as f64 / n as f64;
    let mut hi = 1.0;
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binomial_tail_unchecked(k, n, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
