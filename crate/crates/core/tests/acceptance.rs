//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines show up in `cargo test` output.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dp_audit::accountant::{delta_from_epsilon_mu, epsilon_to_mu, mu_to_epsilon};
use dp_audit::auditor::{audit, ObservationSet};
use dp_audit::crafting::{objective_and_pixel_gradient, Objective};
use dp_audit::dpsgd::{clip_gradient, clipped_gradient_sum, dp_sgd_step, l2_norm, noisy_update, Dataset, DpSgdConfig};
use dp_audit::harness::audit::{run_audit, SampleSource};
use dp_audit::harness::config::{ArchSpec, DatasetSpec, ExperimentConfig};
use dp_audit::harness::ensemble::run_ensemble;
use dp_audit::harness::experiment::{run_plan, RunPlan};
use dp_audit::harness::report::{emit_report, AuditRecord};
use dp_audit::nn::io::encode_sample;
use dp_audit::nn::{loss_and_input_gradient, loss_and_param_gradient, sample_loss, ModelArch, ModelParams, Sample, Tensor};
use dp_audit::rng::SeededStream;
use dp_audit::stats::{clopper_pearson_upper, normal_cdf, normal_quantile};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

/// `P(X ≤ k)` for `X ~ Bin(n, p)` from exact integer binomial coefficients.
fn binomial_cdf_exact(k: u64, n: u64, p: f64) -> f64 {
    let mut coeff: u128 = 1;
    let mut total = 0.0;
    for i in 0..=k {
        if i > 0 {
            coeff = coeff * (n - i + 1) as u128 / i as u128;
        }
        total += coeff as f64 * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
    }
    total
}

fn cp_upper_oracle(k: u64, n: u64, alpha: f64) -> f64 {
    if k == n {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf_exact(k, n, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Outcome {
    let mut worst_cp = 0.0f64;
    for alpha in [0.01, 0.025, 0.05] {
        for n in 1..=50u64 {
            for k in 0..=n {
                let got = clopper_pearson_upper(k, n, alpha).unwrap();
                worst_cp = worst_cp.max((got - cp_upper_oracle(k, n, alpha)).abs());
            }
        }
    }
    let mut worst_rt = 0.0f64;
    for i in 0..1000 {
        let p = (i as f64 + 0.5) / 1000.0;
        let back = normal_cdf(normal_quantile(p).unwrap()).unwrap();
        worst_rt = worst_rt.max((back - p).abs());
    }
    outcome(
        worst_cp <= 1e-9 && worst_rt <= 1e-10,
        format!("max |CP - oracle| = {worst_cp:.2e} (tol 1e-9), max |Φ(Φ⁻¹(p)) - p| = {worst_rt:.2e} (tol 1e-10)"),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let delta = 1e-5;
    let mut worst_rt = 0.0f64;
    for mu in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let eps = mu_to_epsilon(mu, delta).unwrap();
        let back = epsilon_to_mu(eps, delta).unwrap().mu();
        worst_rt = worst_rt.max((back - mu).abs());
    }
    let mut worst_d0 = 0.0f64;
    for mu in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let expected = normal_cdf(mu / 2.0).unwrap() - normal_cdf(-mu / 2.0).unwrap();
        worst_d0 = worst_d0.max((delta_from_epsilon_mu(0.0, mu).unwrap() - expected).abs());
    }
    outcome(
        worst_rt <= 1e-6 && worst_d0 <= 1e-12,
        format!("max μ round-trip error = {worst_rt:.2e} (tol 1e-6), max |δ(0, μ) - (Φ(μ/2) - Φ(-μ/2))| = {worst_d0:.2e} (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------- 3

/// Dense(d→h) → ReLU → Dense(h→c) loss gradient, written out by hand with
/// the same parameter layout as the library: W1 `[h][d]`, b1, W2 `[c][h]`, b2.
fn mlp_gradient_by_hand(theta: &[f64], x: &[f64], y: usize, d: usize, h: usize, c: usize) -> Vec<f64> {
    let (w1, rest) = theta.split_at(d * h);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(c * h);
    let pre: Vec<f64> = (0..h)
        .map(|j| b1[j] + (0..d).map(|i| w1[j * d + i] * x[i]).sum::<f64>())
        .collect();
    let hid: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
    let logits: Vec<f64> = (0..c)
        .map(|k| b2[k] + (0..h).map(|j| w2[k * h + j] * hid[j]).sum::<f64>())
        .collect();
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let mut dlog: Vec<f64> = logits.iter().map(|l| (l - m).exp() / z).collect();
    dlog[y] -= 1.0;
    let mut g = vec![0.0; theta.len()];
    let (gw1, rest) = g.split_at_mut(d * h);
    let (gb1, rest) = rest.split_at_mut(h);
    let (gw2, gb2) = rest.split_at_mut(c * h);
    for k in 0..c {
        gb2[k] = dlog[k];
        for j in 0..h {
            gw2[k * h + j] = dlog[k] * hid[j];
        }
    }
    for j in 0..h {
        let dh: f64 = (0..c).map(|k| dlog[k] * w2[k * h + j]).sum();
        let dpre = if pre[j] > 0.0 { dh } else { 0.0 };
        gb1[j] = dpre;
        for i in 0..d {
            gw1[j * d + i] = dpre * x[i];
        }
    }
    g
}

fn random_dataset(stream: &mut SeededStream, n: usize, dim: usize, classes: usize) -> Dataset {
    let samples = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..dim).map(|_| 0.5 + 0.5 * stream.uniform_symmetric(1.0)).collect();
            Sample::new(Tensor::new(vec![dim], x).unwrap(), i % classes).unwrap()
        })
        .collect();
    Dataset::new(samples).unwrap()
}

fn criterion_3() -> Outcome {
    let (d, h, c) = (5, 7, 3);
    let mut stream = SeededStream::new(3);
    let data = random_dataset(&mut stream, 20, d, c);
    let arch = ModelArch::mlp(d, h, c).unwrap();
    let eta = 0.5;
    let cfg = DpSgdConfig::new(eta, 50, 1e9, 0.0, 0);
    let mut params = ModelParams::init(arch.clone(), &mut SeededStream::new(17));
    let mut reference = params.theta().to_vec();
    let mut noise_stream = SeededStream::new(99);
    let mut worst_gd = 0.0f64;
    for _ in 0..50 {
        params = dp_sgd_step(&params, &data, &cfg, &mut noise_stream).unwrap();
        let mut sum = vec![0.0; reference.len()];
        for s in data.samples() {
            for (acc, g) in sum.iter_mut().zip(mlp_gradient_by_hand(&reference, s.x.data(), s.y, d, h, c)) {
                *acc += g;
            }
        }
        for (t, g) in reference.iter_mut().zip(&sum) {
            *t -= eta / data.len() as f64 * g;
        }
        for (a, b) in params.theta().iter().zip(&reference) {
            worst_gd = worst_gd.max((a - b).abs());
        }
    }

    let mut sensitivity_ok = true;
    let mut worst_ratio = 0.0f64;
    for instance in 0..100u64 {
        let mut s = SeededStream::new(1000 + instance);
        let clip = 0.1 + 2.0 * (s.uniform_symmetric(1.0) + 1.0);
        let data = random_dataset(&mut s, 6, d, c);
        let arch = ModelArch::mlp(d, h, c).unwrap();
        let params = ModelParams::init(arch, &mut s);
        let x: Vec<f64> = (0..d).map(|_| 0.5 + 0.5 * s.uniform_symmetric(1.0)).collect();
        let extra = Sample::new(Tensor::new(vec![d], x).unwrap(), instance as usize % c).unwrap();
        let (_, g) = loss_and_param_gradient(&params, &extra).unwrap();
        let clipped = clip_gradient(&g, clip);
        sensitivity_ok &= l2_norm(&clipped) <= clip;
        let without = clipped_gradient_sum(&params, &data, clip).unwrap();
        let with = clipped_gradient_sum(&params, &data.with_extra(extra).unwrap(), clip).unwrap();
        let diff: Vec<f64> = with.iter().zip(&without).map(|(a, b)| a - b).collect();
        worst_ratio = worst_ratio.max(l2_norm(&diff) / clip);
    }
    // The summed difference carries one rounding per coordinate.
    sensitivity_ok &= worst_ratio <= 1.0 + 1e-12;

    let (eta, sigma, batch) = (2.0, 1.5, 40);
    let noise_cfg = DpSgdConfig::new(eta, 1, 1.0, sigma, 0);
    let mut stream = SeededStream::new(123);
    let mut theta = [0.0f64];
    let steps = 100_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..steps {
        let before = theta[0];
        noisy_update(&mut theta, &[0.0], batch, &noise_cfg, &mut stream).unwrap();
        let step = theta[0] - before;
        sum += step;
        sum_sq += step * step;
    }
    let mean = sum / steps as f64;
    let std = (sum_sq / steps as f64 - mean * mean).sqrt();
    let expected = eta * sigma / batch as f64;
    let rel = (std / expected - 1.0).abs();

    outcome(
        worst_gd <= 1e-12 && sensitivity_ok && rel <= 0.02,
        format!(
            "plain-GD max deviation {worst_gd:.2e} (tol 1e-12); max ‖Δ clipped sum‖/C over 100 instances {worst_ratio:.15}; noise std {std:.5} vs ησ/B {expected:.5} (rel {rel:.4}, tol 0.02)"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = l2_norm(a).max(l2_norm(b)).max(1e-12);
    diff / scale
}

fn fd_param_gradient(params: &ModelParams, sample: &Sample, h: f64) -> Vec<f64> {
    (0..params.theta().len())
        .map(|i| {
            let mut plus = params.theta().to_vec();
            let mut minus = params.theta().to_vec();
            plus[i] += h;
            minus[i] -= h;
            let lp = sample_loss(&ModelParams::new(params.arch().clone(), plus).unwrap(), sample).unwrap();
            let lm = sample_loss(&ModelParams::new(params.arch().clone(), minus).unwrap(), sample).unwrap();
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

fn fd_pixels(x: &Sample, h: f64, f: impl Fn(&Sample) -> f64) -> Vec<f64> {
    (0..x.x.len())
        .map(|i| {
            let mut plus = x.x.data().to_vec();
            let mut minus = x.x.data().to_vec();
            plus[i] += h;
            minus[i] -= h;
            let sp = Sample::new(x.x.with_data(plus).unwrap(), x.y).unwrap();
            let sm = Sample::new(x.x.with_data(minus).unwrap(), x.y).unwrap();
            (f(&sp) - f(&sm)) / (2.0 * h)
        })
        .collect()
}

fn random_sample(stream: &mut SeededStream, shape: &[usize], y: usize) -> Sample {
    let n: usize = shape.iter().product();
    // Keep pixels away from the box edges so ±h stays inside [0, 1].
    let x: Vec<f64> = (0..n).map(|_| 0.5 + 0.4 * stream.uniform_symmetric(1.0)).collect();
    Sample::new(Tensor::new(shape.to_vec(), x).unwrap(), y).unwrap()
}

fn criterion_4() -> Outcome {
    let h = 1e-6;
    let mut stream = SeededStream::new(5);
    let nets = [
        ModelArch::mlp(12, 16, 3).unwrap(),
        ModelArch::small_convnet(1, 9, 9, 4).unwrap(),
        ModelArch::small_convnet(2, 7, 7, 3).unwrap(),
    ];
    let mut worst_param = 0.0f64;
    let mut worst_input = 0.0f64;
    let mut largest = 0;
    for arch in &nets {
        largest = largest.max(arch.param_count());
        for trial in 0..3 {
            let params = ModelParams::init(arch.clone(), &mut stream);
            let sample = random_sample(&mut stream, arch.input_shape(), trial % arch.classes());
            let (_, g) = loss_and_param_gradient(&params, &sample).unwrap();
            worst_param = worst_param.max(rel_err(&g, &fd_param_gradient(&params, &sample, h)));
            let (_, gx) = loss_and_input_gradient(&params, &sample).unwrap();
            let fd = fd_pixels(&sample, h, |s| sample_loss(&params, s).unwrap());
            worst_input = worst_input.max(rel_err(&gx, &fd));
        }
    }

    // Two-model fixture: one model per arm.
    let arch = ModelArch::mlp(6, 8, 2).unwrap();
    let without = vec![ModelParams::init(arch.clone(), &mut stream)];
    let with = vec![ModelParams::init(arch.clone(), &mut stream)];
    let sample = random_sample(&mut stream, arch.input_shape(), 0);
    let mut worst_objective = 0.0f64;
    for objective in Objective::ALL {
        let (_, g) = objective_and_pixel_gradient(&without, &with, &sample, objective, 1e-6).unwrap();
        let fd = fd_pixels(&sample, h, |s| {
            objective_and_pixel_gradient(&without, &with, s, objective, 1e-6).unwrap().0
        });
        worst_objective = worst_objective.max(rel_err(&g, &fd));
    }
    outcome(
        largest <= 5000 && worst_param <= 1e-4 && worst_input <= 1e-4 && worst_objective <= 1e-3,
        format!(
            "param grad rel err {worst_param:.2e}, input grad rel err {worst_input:.2e} (tol 1e-4, nets up to {largest} params); objective pixel grad rel err {worst_objective:.2e} (tol 1e-3)"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut stream = SeededStream::new(2024);
    let mut exceed = 0;
    let mut largest = 0.0f64;
    for _ in 0..200 {
        let without: Vec<f64> = (0..256).map(|_| stream.standard_normal()).collect();
        let with: Vec<f64> = (0..256).map(|_| stream.standard_normal()).collect();
        let report = audit(&ObservationSet::new(without, with).unwrap(), 0.05, 1e-5).unwrap();
        largest = largest.max(report.eps_emp);
        if report.eps_emp > 0.5 {
            exceed += 1;
        }
    }
    outcome(
        exceed <= 10,
        format!("{exceed}/200 same-distribution audits with ε_emp > 0.5 (allowed 10), largest ε_emp {largest:.4}"),
    )
}

// ---------------------------------------------------------------- 6-8

const FIXTURE_EVAL_SIZES: [usize; 4] = [16, 32, 48, 64];

fn fixture_records() -> Vec<AuditRecord> {
    let cfg = ExperimentConfig::default();
    let plan = RunPlan {
        eps_targets: vec![1.0, 10.0],
        runs: 10,
        sources: vec![SampleSource::Canary, SampleSource::Crafted(Objective::Fisher)],
        eval_sizes: FIXTURE_EVAL_SIZES.to_vec(),
    };
    run_plan(&cfg, &plan).unwrap()
}

fn pick<'a>(records: &'a [AuditRecord], objective: &str, eps: f64, n_eval: usize) -> Vec<&'a AuditRecord> {
    let mut out: Vec<&AuditRecord> = records
        .iter()
        .filter(|r| r.objective == objective && r.eps_target == eps && r.n_eval() == n_eval)
        .collect();
    out.sort_by_key(|r| r.seed);
    out
}

fn criterion_6(records: &[AuditRecord]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1.0, 10.0] {
        let rows = pick(records, "canary", eps, 64);
        let ok = rows.iter().filter(|r| r.report.eps_emp <= eps).count();
        let max = rows.iter().map(|r| r.report.eps_emp).fold(0.0, f64::max);
        pass &= rows.len() == 10 && ok >= 9;
        parts.push(format!("ε_theory {eps}: {ok}/{} runs with ε_emp ≤ ε_theory (max {max:.3})", rows.len()));
    }
    outcome(pass, format!("{} (need ≥ 9/10 each)", parts.join("; ")))
}

fn criterion_7(records: &[AuditRecord]) -> Outcome {
    let canary: Vec<f64> = pick(records, "canary", 10.0, 64).iter().take(5).map(|r| r.report.eps_emp).collect();
    let fisher: Vec<f64> = pick(records, "fisher", 10.0, 64).iter().take(5).map(|r| r.report.eps_emp).collect();
    let wins = canary.iter().zip(&fisher).filter(|(c, f)| f >= c).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mf) = (mean(&canary), mean(&fisher));
    outcome(
        wins >= 3 && mf >= mc,
        format!(
            "fisher ≥ canary in {wins}/5 runs (need ≥ 3); mean ε_emp fisher {mf:.3} vs canary {mc:.3}; canary {:?}, fisher {:?}",
            canary.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            fisher.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_8(records: &[AuditRecord]) -> Outcome {
    let medians: Vec<f64> = FIXTURE_EVAL_SIZES
        .iter()
        .map(|&n| median(pick(records, "fisher", 10.0, n).iter().take(5).map(|r| r.report.eps_emp).collect()))
        .collect();
    let inversions = medians.windows(2).filter(|w| w[1] < w[0]).count();
    let canary: Vec<String> = FIXTURE_EVAL_SIZES
        .iter()
        .map(|&n| {
            let m = median(pick(records, "canary", 10.0, n).iter().take(5).map(|r| r.report.eps_emp).collect());
            format!("{m:.3}")
        })
        .collect();
    let cells: Vec<String> = FIXTURE_EVAL_SIZES
        .iter()
        .zip(&medians)
        .map(|(n, m)| format!("N={} (eval {n}/arm): {m:.3}", 2 * n))
        .collect();
    outcome(
        inversions <= 1,
        format!(
            "median fisher ε_emp over 5 seeds: {}; {inversions} inversion(s) (allowed 1); canary medians for reference: {}",
            cells.join(", "),
            canary.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 9

fn small_config(dir: &Path, threads: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic {
            dim: 16,
            classes: 2,
            size: 48,
            seed: 4,
            noise: 0.5,
        },
        arch: ArchSpec::Mlp { hidden: 8 },
        iterations: 5,
        models_per_arm: 8,
        craft_steps: 30,
        out_dir: Some(dir.to_path_buf()),
        threads: Some(threads),
        base_seed: 77,
        ..ExperimentConfig::default()
    }
}

/// Every file under `dir`, as (relative path, bytes), sorted.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(dir: &Path, threads: usize) -> Vec<(String, Vec<u8>)> {
    let cfg = small_config(dir, threads);
    let ensemble = run_ensemble(&cfg).unwrap();
    let mut records = Vec::new();
    for source in [SampleSource::Canary, SampleSource::Crafted(Objective::Fisher), SampleSource::Crafted(Objective::L2)] {
        let outcome = run_audit(&ensemble, source, &cfg).unwrap();
        fs::write(dir.join(format!("{source}.sample")), encode_sample(&outcome.sample)).unwrap();
        records.push(AuditRecord {
            objective: source.to_string(),
            eps_target: cfg.eps_target,
            seed: cfg.base_seed,
            report: outcome.report,
            observations: outcome.observations,
        });
    }
    emit_report(&records, &dir.join("report.csv"), true).unwrap();
    snapshot(dir)
}

fn criterion_9() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let first = pipeline(a.path(), 1);
    let again = pipeline(b.path(), 1);
    let parallel = pipeline(c.path(), 3);
    let bytes: usize = first.iter().map(|(_, v)| v.len()).sum();
    outcome(
        first == again && first == parallel,
        format!(
            "{} files ({bytes} bytes: manifest, models, samples, report, histograms) identical across repeat and 1 vs 3 threads: {}",
            first.len(),
            first == again && first == parallel
        ),
    )
}

// ----------------------------------------------------------------

fn report(number: usize, title: &str, elapsed: Duration, limit: Option<Duration>, o: Outcome) -> bool {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = o.pass && in_time;
    let limit_note = limit.map_or(String::new(), |l| format!(", limit {}s", l.as_secs()));
    println!(
        "criterion {number} [{title}]: {} ({:.1}s{limit_note}) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        o.detail
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }

    let mut all = true;
    let secs = Duration::from_secs;
    let (o, t) = timed(criterion_1);
    all &= report(1, "special-function oracles", t, Some(secs(10)), o);
    let (o, t) = timed(criterion_2);
    all &= report(2, "GDP conversion", t, Some(secs(1)), o);
    let (o, t) = timed(criterion_3);
    all &= report(3, "DP-SGD correctness", t, Some(secs(120)), o);
    let (o, t) = timed(criterion_4);
    all &= report(4, "gradient fidelity", t, Some(secs(60)), o);
    let (o, t) = timed(criterion_5);
    all &= report(5, "auditor calibration at ε = 0", t, Some(secs(30)), o);

    let (records, t) = timed(fixture_records);
    let (o, t6) = timed(|| criterion_6(&records));
    all &= report(6, "end-to-end soundness", t + t6, Some(secs(1800)), o);
    let (o, t) = timed(|| criterion_7(&records));
    all &= report(7, "fisher vs canary ordering", t, None, o);
    let (o, t) = timed(|| criterion_8(&records));
    all &= report(8, "eval-size trend", t, None, o);
    let (o, t) = timed(criterion_9);
    all &= report(9, "determinism", t, None, o);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
