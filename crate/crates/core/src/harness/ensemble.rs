//! Paired ensemble training on neighbouring datasets.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::accountant::{calibrate_sigma, PrivacyBudget};
use crate::crafting::make_canary;
use crate::dpsgd::{train, Dataset};
use crate::error::{Error, Result};
use crate::nn::io::{read_model, write_model};
use crate::nn::{sample_loss, ModelArch, ModelParams, Sample};
use crate::par;
use crate::rng::mix64;

use super::config::{DatasetSpec, ExperimentConfig};
use super::data::{class_count, load_mnist_idx, make_synthetic};

pub const MANIFEST_FILE: &str = "manifest.csv";
const MANIFEST_HEADER: &str = "index,arm,split,seed,path,train_loss,status";

/// Which neighbouring dataset a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    /// `D`
    Without,
    /// `D ∪ {canary}`
    With,
}

impl Arm {
    fn tag(self) -> u64 {
        match self {
            Arm::Without => 0,
            Arm::With => 1,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Without => "without",
            Arm::With => "with",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    /// Used only to craft audit samples.
    Craft,
    /// Used only to collect audit observations.
    Eval,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Craft => "craft",
            Split::Eval => "eval",
        })
    }
}

/// Training seed of model `index` in `arm`: the base seed mixed with the arm
/// tag and index, so every (arm, index) pair gets an independent stream.
pub fn model_seed(base_seed: u64, arm: Arm, index: usize) -> u64 {
    mix64(base_seed ^ mix64((arm.tag() << 32) | index as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    /// Unique across both arms: without-arm models come first.
    pub index: usize,
    pub arm: Arm,
    /// Position within the arm.
    pub arm_index: usize,
    pub split: Split,
    pub seed: u64,
    /// Relative to the ensemble directory.
    pub path: PathBuf,
    /// Mean cross-entropy of the final model on its own training set.
    pub train_loss: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleManifest {
    pub dataset_size: usize,
    pub dataset_with_canary_size: usize,
    pub sigma: f64,
    pub records: Vec<ModelRecord>,
}

impl EnsembleManifest {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# dataset_size = {}\n# dataset_with_canary_size = {}\n# sigma = {:?}\n{MANIFEST_HEADER}\n",
            self.dataset_size, self.dataset_with_canary_size, self.sigma
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{:?},{}\n",
                r.index,
                r.arm,
                r.split,
                r.seed,
                r.path.display(),
                r.train_loss,
                if r.ok { "ok" } else { "failed" }
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::config(format!("manifest: {msg}"));
        let mut meta = String::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.next_if(|l| l.starts_with('#')) {
            meta.push_str(&line[1..]);
            meta.push('\n');
        }
        let meta = super::config::parse_key_values(&meta)?;
        let field = |k: &str| meta.get(k).ok_or_else(|| bad(format!("missing {k}")));
        let dataset_size = field("dataset_size")?.parse().map_err(|_| bad("bad dataset_size".into()))?;
        let dataset_with_canary_size = field("dataset_with_canary_size")?
            .parse()
            .map_err(|_| bad("bad dataset_with_canary_size".into()))?;
        let sigma = field("sigma")?.parse().map_err(|_| bad("bad sigma".into()))?;
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(bad("missing column header".into()));
        }
        let mut records = Vec::new();
        let mut arm_counts = [0usize; 2];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns in {line:?}")));
            }
            let arm = match cols[1] {
                "without" => Arm::Without,
                "with" => Arm::With,
                other => return Err(bad(format!("unknown arm {other:?}"))),
            };
            let split = match cols[2] {
                "craft" => Split::Craft,
                "eval" => Split::Eval,
                other => return Err(bad(format!("unknown split {other:?}"))),
            };
            let arm_index = arm_counts[arm.tag() as usize];
            arm_counts[arm.tag() as usize] += 1;
            records.push(ModelRecord {
                index: cols[0].parse().map_err(|_| bad(format!("bad index in {line:?}")))?,
                arm,
                arm_index,
                split,
                seed: cols[3].parse().map_err(|_| bad(format!("bad seed in {line:?}")))?,
                path: PathBuf::from(cols[4]),
                train_loss: cols[5].parse().map_err(|_| bad(format!("bad loss in {line:?}")))?,
                ok: cols[6] == "ok",
            });
        }
        Ok(EnsembleManifest {
            dataset_size,
            dataset_with_canary_size,
            sigma,
            records,
        })
    }

    /// Panics if any model index is assigned to both splits.
    pub fn assert_disjoint_splits(&self) {
        let mut seen = std::collections::HashMap::new();
        for r in &self.records {
            let prev = seen.insert(r.index, r.split);
            assert!(
                prev.is_none_or(|s| s == r.split),
                "model {} appears in both craft and eval splits",
                r.index
            );
        }
    }
}

/// Models of one split, grouped by arm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmModels {
    pub without: Vec<ModelParams>,
    pub with: Vec<ModelParams>,
    /// Manifest indices, parallel to `without` and `with`.
    pub without_indices: Vec<usize>,
    pub with_indices: Vec<usize>,
}

impl ArmModels {
    fn push(&mut self, arm: Arm, index: usize, model: ModelParams) {
        match arm {
            Arm::Without => {
                self.without.push(model);
                self.without_indices.push(index);
            }
            Arm::With => {
                self.with.push(model);
                self.with_indices.push(index);
            }
        }
    }

    /// Keeps only the first `n` models of each arm.
    pub fn truncated(&self, n: usize) -> ArmModels {
        ArmModels {
            without: self.without.iter().take(n).cloned().collect(),
            with: self.with.iter().take(n).cloned().collect(),
            without_indices: self.without_indices.iter().take(n).copied().collect(),
            with_indices: self.with_indices.iter().take(n).copied().collect(),
        }
    }
}

/// Datasets, architecture, canary, and noise level shared by every model of
/// an experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub arch: ModelArch,
    pub data: Dataset,
    pub data_with_canary: Dataset,
    pub canary: Sample,
    pub sigma: f64,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match spec {
        DatasetSpec::Synthetic { dim, classes, size, seed, noise } => make_synthetic(*dim, *classes, *size, *seed, *noise),
        DatasetSpec::Mnist { images, labels, limit } => {
            let data = load_mnist_idx(images, labels)?;
            match limit {
                Some(n) if *n < data.len() => Dataset::new(data.samples()[..*n].to_vec()),
                _ => Ok(data),
            }
        }
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let data = load_dataset(&cfg.dataset)?;
    let classes = match cfg.dataset {
        DatasetSpec::Synthetic { classes, .. } => classes,
        DatasetSpec::Mnist { .. } => class_count(&data).max(10),
    };
    let arch = cfg.arch.build(data.samples()[0].x.shape(), classes)?;
    if cfg.canary_label >= classes {
        return Err(Error::config(format!("canary_label {} out of range", cfg.canary_label)));
    }
    let canary = make_canary(arch.input_shape(), cfg.canary_label)?;
    let data_with_canary = data.with_extra(canary.clone())?;
    let sigma = match cfg.noise_multiplier {
        Some(s) => s,
        None => calibrate_sigma(PrivacyBudget::new(cfg.eps_target, cfg.delta)?, cfg.iterations)?,
    };
    Ok(Prepared {
        arch,
        data,
        data_with_canary,
        canary,
        sigma,
    })
}

/// A trained ensemble, held in memory and split into craft and eval models.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub manifest: EnsembleManifest,
    pub canary: Sample,
    pub craft: ArmModels,
    pub eval: ArmModels,
}

fn model_file(arm: Arm, arm_index: usize) -> PathBuf {
    PathBuf::from("models").join(format!("{arm}_{arm_index:04}.model"))
}

/// Runs `f` on a pool with `threads` workers, or directly when unset.
pub(crate) fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            return pool.install(f);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    f()
}

/// Trains `N` models on `D` and `N` on `D ∪ {canary}`.
///
/// The first `⌈fraction·N⌉` models of each arm form the craft split. When
/// `cfg.out_dir` is set, every model and the manifest are written there.
/// A model whose training fails is marked failed and left out of both splits.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<Ensemble> {
    let prepared = prepare(cfg)?;
    run_ensemble_prepared(cfg, &prepared)
}

pub fn run_ensemble_prepared(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<Ensemble> {
    let n = cfg.models_per_arm;
    let craft_count = cfg.craft_count();
    let jobs: Vec<(Arm, usize)> = [Arm::Without, Arm::With]
        .into_iter()
        .flat_map(|arm| (0..n).map(move |i| (arm, i)))
        .collect();

    let trained: Vec<Result<(ModelParams, f64)>> = with_threads(cfg.threads, || {
        par::map(&jobs, |&(arm, i)| {
            let data = match arm {
                Arm::Without => &prepared.data,
                Arm::With => &prepared.data_with_canary,
            };
            let dp = cfg.dp_config(prepared.sigma, model_seed(cfg.base_seed, arm, i));
            let model = train(&prepared.arch, data, &dp)?;
            let mut loss = 0.0;
            for s in data.samples() {
                loss += sample_loss(&model, s)?;
            }
            Ok((model, loss / data.len() as f64))
        })
    });

    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir.join("models")).map_err(|e| Error::io(dir, e))?;
    }

    let mut records = Vec::with_capacity(jobs.len());
    let mut craft = ArmModels::default();
    let mut eval = ArmModels::default();
    for (index, (&(arm, arm_index), result)) in jobs.iter().zip(trained).enumerate() {
        let split = if arm_index < craft_count { Split::Craft } else { Split::Eval };
        let path = model_file(arm, arm_index);
        let (ok, train_loss) = match result {
            Ok((model, loss)) => {
                if let Some(dir) = &cfg.out_dir {
                    write_model(&model, &dir.join(&path))?;
                }
                match split {
                    Split::Craft => craft.push(arm, index, model),
                    Split::Eval => eval.push(arm, index, model),
                }
                (true, loss)
            }
            Err(Error::Numerical(_)) => (false, f64::NAN),
            Err(e) => return Err(e),
        };
        records.push(ModelRecord {
            index,
            arm,
            arm_index,
            split,
            seed: model_seed(cfg.base_seed, arm, arm_index),
            path,
            train_loss,
            ok,
        });
    }

    let manifest = EnsembleManifest {
        dataset_size: prepared.data.len(),
        dataset_with_canary_size: prepared.data_with_canary.len(),
        sigma: prepared.sigma,
        records,
    };
    if let Some(dir) = &cfg.out_dir {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_csv()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(Ensemble {
        manifest,
        canary: prepared.canary.clone(),
        craft,
        eval,
    })
}

/// Reloads an ensemble written by [`run_ensemble`].
pub fn load_ensemble(dir: &Path, canary: Sample) -> Result<Ensemble> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = EnsembleManifest::from_csv(&text)?;
    let mut craft = ArmModels::default();
    let mut eval = ArmModels::default();
    for r in manifest.records.iter().filter(|r| r.ok) {
        let model = read_model(&dir.join(&r.path))?;
        match r.split {
            Split::Craft => craft.push(r.arm, r.index, model),
            Split::Eval => eval.push(r.arm, r.index, model),
        }
    }
    Ok(Ensemble {
        manifest,
        canary,
        craft,
        eval,
    })
}
