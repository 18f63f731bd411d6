//! Report and histogram CSV emission.

use std::fs;
use std::path::{Path, PathBuf};

use crate::auditor::{AuditReport, ObservationSet};
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "objective,eps_target,N_eval,fpr_bar,fnr_bar,mu_emp,eps_emp,tau,direction,seed";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count_without,count_with";
pub const HISTOGRAM_BINS: usize = 20;
pub const OBSERVATIONS_HEADER: &str = "arm,loss";
const REPORT_SUFFIX: &str = ".report.txt";
const OBSERVATIONS_SUFFIX: &str = ".observations.csv";

/// One audit row: what was audited, under which target budget and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    /// `canary` or the crafting objective's name.
    pub objective: String,
    pub eps_target: f64,
    pub seed: u64,
    pub report: AuditReport,
    pub observations: ObservationSet,
}

impl AuditRecord {
    /// Eval models per arm (the smaller arm if they differ).
    pub fn n_eval(&self) -> usize {
        self.report.n_without.min(self.report.n_with)
    }

    fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{:?},{},{:?},{:?},{:?},{:?},{:?},{},{}",
            self.objective,
            self.eps_target,
            self.n_eval(),
            r.fpr_upper,
            r.fnr_upper,
            r.mu_emp,
            r.eps_emp,
            r.tau,
            r.direction,
            self.seed
        )
    }
}

/// Writes `<dir>/<name>.report.txt` (run metadata followed by the report's
/// key-value form) and `<dir>/<name>.observations.csv`.
pub fn save_record(record: &AuditRecord, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report_path = dir.join(format!("{name}{REPORT_SUFFIX}"));
    let text = format!(
        "objective = {}\neps_target = {:?}\nseed = {}\n{}",
        record.objective,
        record.eps_target,
        record.seed,
        record.report.to_key_values()
    );
    fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    let obs_path = dir.join(format!("{name}{OBSERVATIONS_SUFFIX}"));
    fs::write(&obs_path, observations_csv(&record.observations)).map_err(|e| Error::io(&obs_path, e))?;
    Ok((report_path, obs_path))
}

/// Reads a record written by [`save_record`], given its `.report.txt` path.
pub fn load_record(report_path: &Path) -> Result<AuditRecord> {
    let text = fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let map = super::config::parse_key_values(&text)?;
    let meta = |k: &str| {
        map.get(k)
            .ok_or_else(|| Error::config(format!("{} is missing {k:?}", report_path.display())))
    };
    let bad = |k: &str| Error::config(format!("{} has an invalid {k:?}", report_path.display()));
    let objective = meta("objective")?.clone();
    let eps_target = meta("eps_target")?.parse().map_err(|_| bad("eps_target"))?;
    let seed = meta("seed")?.parse().map_err(|_| bad("seed"))?;
    let report = AuditReport::from_key_values(&text)?;

    let name = report_path.to_string_lossy();
    let stem = name.strip_suffix(REPORT_SUFFIX).ok_or_else(|| {
        Error::config(format!("{} does not end in {REPORT_SUFFIX}", report_path.display()))
    })?;
    let obs_path = PathBuf::from(format!("{stem}{OBSERVATIONS_SUFFIX}"));
    let obs_text = fs::read_to_string(&obs_path).map_err(|e| Error::io(&obs_path, e))?;
    let observations = parse_observations(&obs_text, &obs_path)?;
    Ok(AuditRecord {
        objective,
        eps_target,
        seed,
        report,
        observations,
    })
}

/// Every record saved in `dir`, in file-name order.
pub fn load_records(dir: &Path) -> Result<Vec<AuditRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(REPORT_SUFFIX))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_record(p)).collect()
}

pub fn observations_csv(obs: &ObservationSet) -> String {
    let mut out = String::from(OBSERVATIONS_HEADER);
    out.push('\n');
    for v in &obs.without {
        out.push_str(&format!("without,{v:?}\n"));
    }
    for v in &obs.with {
        out.push_str(&format!("with,{v:?}\n"));
    }
    out
}

pub fn parse_observations(text: &str, path: &Path) -> Result<ObservationSet> {
    let mut lines = text.lines();
    if lines.next() != Some(OBSERVATIONS_HEADER) {
        return Err(Error::config(format!("{} lacks the {OBSERVATIONS_HEADER:?} header", path.display())));
    }
    let (mut without, mut with) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::config(format!("{} line {}: {line:?}", path.display(), i + 2));
        let (arm, value) = line.split_once(',').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        match arm.trim() {
            "without" => without.push(value),
            "with" => with.push(value),
            _ => return Err(bad()),
        }
    }
    ObservationSet::new(without, with)
}

/// Equal-width bins over the pooled observation range; the last bin is
/// closed on the right. Returns `(lo, hi, count_without, count_with)`.
pub fn histogram(obs: &ObservationSet, bins: usize) -> Vec<(f64, f64, usize, usize)> {
    let lo = obs.without.iter().chain(&obs.with).copied().fold(f64::INFINITY, f64::min);
    let hi = obs.without.iter().chain(&obs.with).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bin_of = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut counts = vec![(0usize, 0usize); bins];
    for v in &obs.without {
        counts[bin_of(*v)].0 += 1;
    }
    for v in &obs.with {
        counts[bin_of(*v)].1 += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| (lo + i as f64 * width, lo + (i + 1) as f64 * width, a, b))
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Writes the report CSV at `path` (rows sorted by objective, target `ε`,
/// then seed) and one histogram CSV per record next to it, named
/// `<stem>.hist.<row>.<objective>.csv`. With `summary`, a `mean` and a `std`
/// row per (objective, target, N_eval) group are appended after the data
/// rows; their `tau` and `direction` columns are empty.
///
/// Returns every file written, report first.
pub fn emit_report(records: &[AuditRecord], path: &Path, summary: bool) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::domain("no audit records to report"));
    }
    let mut sorted: Vec<&AuditRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.objective
            .cmp(&b.objective)
            .then(a.eps_target.total_cmp(&b.eps_target))
            .then(a.seed.cmp(&b.seed))
            .then(a.n_eval().cmp(&b.n_eval()))
    });

    let mut text = String::from(REPORT_HEADER);
    text.push('\n');
    for r in &sorted {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    if summary {
        let mut groups: Vec<(String, f64, usize, Vec<&AuditRecord>)> = Vec::new();
        for r in &sorted {
            match groups
                .iter_mut()
                .find(|g| g.0 == r.objective && g.1 == r.eps_target && g.2 == r.n_eval())
            {
                Some(g) => g.3.push(r),
                None => groups.push((r.objective.clone(), r.eps_target, r.n_eval(), vec![r])),
            }
        }
        for (objective, eps_target, n_eval, rows) in &groups {
            let stats: Vec<(f64, f64)> = [
                rows.iter().map(|r| r.report.fpr_upper).collect::<Vec<_>>(),
                rows.iter().map(|r| r.report.fnr_upper).collect(),
                rows.iter().map(|r| r.report.mu_emp).collect(),
                rows.iter().map(|r| r.report.eps_emp).collect(),
            ]
            .iter()
            .map(|v| mean_std(v))
            .collect();
            for (label, pick) in [("mean", 0usize), ("std", 1)] {
                let col = |i: usize| if pick == 0 { stats[i].0 } else { stats[i].1 };
                text.push_str(&format!(
                    "{objective},{eps_target:?},{n_eval},{:?},{:?},{:?},{:?},,,{label}\n",
                    col(0),
                    col(1),
                    col(2),
                    col(3)
                ));
            }
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;

    let mut written = vec![path.to_path_buf()];
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dir = path.parent().unwrap_or(Path::new(""));
    for (row, r) in sorted.iter().enumerate() {
        let hist_path = dir.join(format!("{stem}.hist.{row:03}.{}.csv", r.objective));
        let mut hist = String::from(HISTOGRAM_HEADER);
        hist.push('\n');
        for (lo, hi, a, b) in histogram(&r.observations, HISTOGRAM_BINS) {
            hist.push_str(&format!("{lo:?},{hi:?},{a},{b}\n"));
        }
        fs::write(&hist_path, hist).map_err(|e| Error::io(&hist_path, e))?;
        written.push(hist_path);
    }
    Ok(written)
}
