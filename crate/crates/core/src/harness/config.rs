//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Later assignments override earlier ones, and a `preset` key is applied
//! before every other key regardless of its position.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::crafting::{CraftConfig, Objective, DEFAULT_VARIANCE_FLOOR};
use crate::dpsgd::DpSgdConfig;
use crate::error::{Error, Result};
use crate::nn::ModelArch;

/// Parses `key = value` lines into an ordered map.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::config(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Gaussian class blobs, see [`super::data::make_synthetic`].
    Synthetic {
        dim: usize,
        classes: usize,
        size: usize,
        seed: u64,
        noise: f64,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` examples.
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchSpec {
    /// `dense(d→hidden) → relu → dense(hidden→classes)` on flattened input.
    Mlp { hidden: usize },
    /// `conv2d(1→8,k3,s2) → relu → flatten → dense(→classes)` on images.
    ConvNet,
}

impl ArchSpec {
    fn parse(s: &str) -> Result<Self> {
        if s == "convnet" {
            return Ok(ArchSpec::ConvNet);
        }
        if let Some(h) = s.strip_prefix("mlp:") {
            let hidden = h
                .parse()
                .map_err(|_| Error::config(format!("bad mlp width in {s:?}")))?;
            return Ok(ArchSpec::Mlp { hidden });
        }
        Err(Error::config(format!("unknown arch {s:?} (expected mlp:<width> or convnet)")))
    }

    fn name(&self) -> String {
        match self {
            ArchSpec::Mlp { hidden } => format!("mlp:{hidden}"),
            ArchSpec::ConvNet => "convnet".into(),
        }
    }

    /// Concrete architecture for inputs of `input_shape` and `classes`.
    pub fn build(&self, input_shape: &[usize], classes: usize) -> Result<ModelArch> {
        match self {
            ArchSpec::Mlp { hidden } => {
                if input_shape.len() != 1 {
                    return Err(Error::config(format!(
                        "mlp needs flat inputs, dataset has shape {input_shape:?}"
                    )));
                }
                ModelArch::mlp(input_shape[0], *hidden, classes)
            }
            ArchSpec::ConvNet => match input_shape {
                [c, h, w] => ModelArch::small_convnet(*c, *h, *w, classes),
                _ => Err(Error::config(format!(
                    "convnet needs [channels, height, width] inputs, dataset has shape {input_shape:?}"
                ))),
            },
        }
    }
}

/// Everything needed to train, craft, and audit one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub arch: ArchSpec,
    pub learning_rate: f64,
    pub iterations: u64,
    pub clip_norm: f64,
    /// Fixed noise multiplier; `None` calibrates it from the target budget.
    pub noise_multiplier: Option<f64>,
    pub eps_target: f64,
    pub delta: f64,
    pub models_per_arm: usize,
    pub craft_fraction: f64,
    pub craft_steps: usize,
    pub craft_step_size: f64,
    pub var_floor: f64,
    pub alpha: f64,
    pub base_seed: u64,
    pub canary_label: usize,
    /// Where models, samples, and reports go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for training and crafting; `None` uses the default pool.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    /// The desk-scale synthetic configuration.
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Synthetic {
                dim: 64,
                classes: 2,
                size: 512,
                seed: 0,
                noise: 0.5,
            },
            arch: ArchSpec::Mlp { hidden: 32 },
            learning_rate: 4.0,
            iterations: 30,
            clip_norm: 1.0,
            noise_multiplier: None,
            eps_target: 10.0,
            delta: 1e-5,
            models_per_arm: 128,
            craft_fraction: 0.5,
            craft_steps: 500,
            craft_step_size: 0.05,
            var_floor: DEFAULT_VARIANCE_FLOOR,
            alpha: 0.05,
            base_seed: 0,
            canary_label: 0,
            out_dir: None,
            threads: None,
        }
    }
}

/// Every recognized key, in the order [`ExperimentConfig::to_key_values`]
/// writes them.
pub const CONFIG_KEYS: &[&str] = &[
    "preset",
    "dataset",
    "synthetic_dim",
    "synthetic_classes",
    "synthetic_size",
    "synthetic_seed",
    "synthetic_noise",
    "mnist_images",
    "mnist_labels",
    "mnist_limit",
    "arch",
    "learning_rate",
    "iterations",
    "clip_norm",
    "noise_multiplier",
    "eps_target",
    "delta",
    "models_per_arm",
    "craft_fraction",
    "craft_steps",
    "craft_step_size",
    "var_floor",
    "alpha",
    "base_seed",
    "canary_label",
    "out_dir",
    "threads",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for {key}")))
}

impl ExperimentConfig {
    /// The full-scale MNIST setting: convnet, `η = 4`, `T = 100`, 512 models
    /// per arm. Image and label paths must still be supplied.
    pub fn mnist_full() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::Mnist {
                images: PathBuf::new(),
                labels: PathBuf::new(),
                limit: None,
            },
            arch: ArchSpec::ConvNet,
            learning_rate: 4.0,
            iterations: 100,
            models_per_arm: 512,
            ..ExperimentConfig::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(ExperimentConfig::default()),
            "mnist-full" => Ok(ExperimentConfig::mnist_full()),
            other => Err(Error::config(format!("unknown preset {other:?} (expected desk or mnist-full)"))),
        }
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        let mut cfg = match map.get("preset") {
            Some(p) => ExperimentConfig::preset(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&map)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_key_values(&text)
    }

    /// Applies overrides. Setting `dataset` switches variant with that
    /// variant's defaults; a `preset` key here is ignored.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for key in map.keys() {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::config(format!("unknown config key {key:?}")));
            }
        }
        if let Some(kind) = map.get("dataset") {
            match (kind.as_str(), &self.dataset) {
                ("synthetic", DatasetSpec::Synthetic { .. }) | ("mnist", DatasetSpec::Mnist { .. }) => {}
                ("synthetic", _) => self.dataset = ExperimentConfig::default().dataset,
                ("mnist", _) => self.dataset = ExperimentConfig::mnist_full().dataset,
                (other, _) => return Err(Error::config(format!("unknown dataset kind {other:?}"))),
            }
        }
        for (key, value) in map {
            let v = value.as_str();
            match (key.as_str(), &mut self.dataset) {
                ("preset" | "dataset", _) => {}
                ("synthetic_dim", DatasetSpec::Synthetic { dim, .. }) => *dim = parse_value(key, v)?,
                ("synthetic_classes", DatasetSpec::Synthetic { classes, .. }) => *classes = parse_value(key, v)?,
                ("synthetic_size", DatasetSpec::Synthetic { size, .. }) => *size = parse_value(key, v)?,
                ("synthetic_seed", DatasetSpec::Synthetic { seed, .. }) => *seed = parse_value(key, v)?,
                ("synthetic_noise", DatasetSpec::Synthetic { noise, .. }) => *noise = parse_value(key, v)?,
                ("mnist_images", DatasetSpec::Mnist { images, .. }) => *images = PathBuf::from(v),
                ("mnist_labels", DatasetSpec::Mnist { labels, .. }) => *labels = PathBuf::from(v),
                ("mnist_limit", DatasetSpec::Mnist { limit, .. }) => {
                    *limit = if v == "none" { None } else { Some(parse_value(key, v)?) }
                }
                (k, _) if k.starts_with("synthetic_") || k.starts_with("mnist_") => {
                    return Err(Error::config(format!("{k} does not apply to the selected dataset")));
                }
                ("arch", _) => self.arch = ArchSpec::parse(v)?,
                ("learning_rate", _) => self.learning_rate = parse_value(key, v)?,
                ("iterations", _) => self.iterations = parse_value(key, v)?,
                ("clip_norm", _) => self.clip_norm = parse_value(key, v)?,
                ("noise_multiplier", _) => {
                    self.noise_multiplier = if v == "auto" { None } else { Some(parse_value(key, v)?) }
                }
                ("eps_target", _) => self.eps_target = parse_value(key, v)?,
                ("delta", _) => self.delta = parse_value(key, v)?,
                ("models_per_arm", _) => self.models_per_arm = parse_value(key, v)?,
                ("craft_fraction", _) => self.craft_fraction = parse_value(key, v)?,
                ("craft_steps", _) => self.craft_steps = parse_value(key, v)?,
                ("craft_step_size", _) => self.craft_step_size = parse_value(key, v)?,
                ("var_floor", _) => self.var_floor = parse_value(key, v)?,
                ("alpha", _) => self.alpha = parse_value(key, v)?,
                ("base_seed", _) => self.base_seed = parse_value(key, v)?,
                ("canary_label", _) => self.canary_label = parse_value(key, v)?,
                ("out_dir", _) => self.out_dir = Some(PathBuf::from(v)),
                ("threads", _) => {
                    self.threads = if v == "auto" { None } else { Some(parse_value(key, v)?) }
                }
                (other, _) => return Err(Error::config(format!("unknown config key {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.models_per_arm < 2 {
            return Err(Error::config("models_per_arm must be at least 2"));
        }
        if !(self.craft_fraction > 0.0 && self.craft_fraction < 1.0) {
            return Err(Error::config(format!("craft_fraction must lie in (0, 1), got {}", self.craft_fraction)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.noise_multiplier.is_none() && !(self.eps_target > 0.0) {
            return Err(Error::config("eps_target must be positive when noise_multiplier is calibrated"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be at least 1"));
        }
        match &self.dataset {
            DatasetSpec::Synthetic { dim, classes, size, noise, .. } => {
                if *dim == 0 || *classes < 2 || *size < *classes || !(*noise >= 0.0) {
                    return Err(Error::config(
                        "synthetic data needs dim >= 1, classes >= 2, size >= classes, noise >= 0",
                    ));
                }
            }
            DatasetSpec::Mnist { images, labels, .. } => {
                if images.as_os_str().is_empty() || labels.as_os_str().is_empty() {
                    return Err(Error::config("mnist_images and mnist_labels must be set"));
                }
            }
        }
        self.dp_config(0.0, 0).validate()?;
        self.craft_config(Objective::Fisher).validate()
    }

    /// Training configuration for one model.
    pub fn dp_config(&self, sigma: f64, seed: u64) -> DpSgdConfig {
        DpSgdConfig::new(self.learning_rate, self.iterations, self.clip_norm, sigma, seed)
    }

    pub fn craft_config(&self, objective: Objective) -> CraftConfig {
        CraftConfig {
            steps: self.craft_steps,
            step_size: self.craft_step_size,
            var_floor: self.var_floor,
            ..CraftConfig::new(objective)
        }
    }

    /// Number of craft-split models per arm: `⌈fraction · N⌉`.
    pub fn craft_count(&self) -> usize {
        ((self.craft_fraction * self.models_per_arm as f64).ceil() as usize).min(self.models_per_arm)
    }

    /// Canonical `key = value` text; parsing it back yields an equal config.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.dataset {
            DatasetSpec::Synthetic { dim, classes, size, seed, noise } => {
                put("dataset", "synthetic".into());
                put("synthetic_dim", dim.to_string());
                put("synthetic_classes", classes.to_string());
                put("synthetic_size", size.to_string());
                put("synthetic_seed", seed.to_string());
                put("synthetic_noise", format!("{noise:?}"));
            }
            DatasetSpec::Mnist { images, labels, limit } => {
                put("dataset", "mnist".into());
                put("mnist_images", images.display().to_string());
                put("mnist_labels", labels.display().to_string());
                put("mnist_limit", limit.map_or("none".into(), |l| l.to_string()));
            }
        }
        put("arch", self.arch.name());
        put("learning_rate", format!("{:?}", self.learning_rate));
        put("iterations", self.iterations.to_string());
        put("clip_norm", format!("{:?}", self.clip_norm));
        put("noise_multiplier", self.noise_multiplier.map_or("auto".into(), |s| format!("{s:?}")));
        put("eps_target", format!("{:?}", self.eps_target));
        put("delta", format!("{:?}", self.delta));
        put("models_per_arm", self.models_per_arm.to_string());
        put("craft_fraction", format!("{:?}", self.craft_fraction));
        put("craft_steps", self.craft_steps.to_string());
        put("craft_step_size", format!("{:?}", self.craft_step_size));
        put("var_floor", format!("{:?}", self.var_floor));
        put("alpha", format!("{:?}", self.alpha));
        put("base_seed", self.base_seed.to_string());
        put("canary_label", self.canary_label.to_string());
        if let Some(dir) = &self.out_dir {
            put("out_dir", dir.display().to_string());
        }
        put("threads", self.threads.map_or("auto".into(), |t| t.to_string()));
        out
    }
}
