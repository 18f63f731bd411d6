use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dp_audit::accountant::{calibrate_sigma, theoretical_epsilon, PrivacyBudget};
use dp_audit::crafting::{craft_adversarial, Objective};
use dp_audit::harness::audit::{audit_sample, SampleSource};
use dp_audit::harness::config::ExperimentConfig;
use dp_audit::harness::ensemble::{load_ensemble, prepare, run_ensemble_prepared};
use dp_audit::harness::experiment::{run_plan, RunPlan};
use dp_audit::harness::report::{emit_report, load_records, save_record, AuditRecord};
use dp_audit::nn::io::{read_sample, write_sample};
use dp_audit::{Error, Result};

const CONFIG_FILE: &str = "config.txt";
const CANARY_FILE: &str = "canary.sample";

#[derive(Parser)]
#[command(name = "dp-audit", version, about = "Empirical privacy auditing of full-batch DP-SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the noise multiplier that meets (ε, δ) after T full-batch steps.
    Calibrate {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        #[arg(long)]
        steps: u64,
    },
    /// Train both arms of an ensemble into the output directory.
    TrainEnsemble(ConfigArgs),
    /// Craft an audit sample from a trained ensemble's craft split.
    Craft {
        #[arg(long)]
        objective: Objective,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Audit a sample on a trained ensemble's eval split.
    Audit {
        /// `canary`, an objective name (uses `samples/<name>.sample`), or a
        /// path to a sample file.
        #[arg(long, default_value = "canary")]
        sample: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Collect saved audits into a report CSV and histograms.
    Report {
        /// Directory of `.report.txt` files; defaults to `<out_dir>/audits`.
        #[arg(long)]
        audits: Option<PathBuf>,
        /// Report path; defaults to `<out_dir>/report.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Append mean and std rows.
        #[arg(long)]
        summary: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train, craft, audit and report over several seeds and target budgets.
    E2e {
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, value_delimiter = ',', default_value = "canary,l2,bhattacharyya,fisher")]
        objectives: Vec<SampleSource>,
        /// Defaults to the configured `eps_target`.
        #[arg(long, value_delimiter = ',')]
        eps_targets: Vec<f64>,
        /// Eval models per arm to audit on; defaults to the whole eval split.
        #[arg(long, value_delimiter = ',')]
        eval_sizes: Vec<usize>,
        #[arg(long)]
        summary: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

macro_rules! config_flags {
    ($($field:ident => $key:literal),* $(,)?) => {
        /// Configuration sources, applied in order: preset, config file,
        /// `--set` pairs, then individual flags.
        #[derive(Args, Default)]
        struct ConfigArgs {
            /// Key-value configuration file.
            #[arg(long)]
            config: Option<PathBuf>,
            /// `desk` or `mnist-full`.
            #[arg(long)]
            preset: Option<String>,
            /// Any configuration key as `key=value`.
            #[arg(long = "set", value_name = "KEY=VALUE")]
            set: Vec<String>,
            $(
                #[arg(long, value_name = "VALUE")]
                $field: Option<String>,
            )*
        }

        impl ConfigArgs {
            fn flag_pairs(&self) -> Vec<(&'static str, String)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push(($key, v.clone()));
                    }
                )*
                out
            }
        }
    };
}

config_flags! {
    dataset => "dataset",
    synthetic_dim => "synthetic_dim",
    synthetic_classes => "synthetic_classes",
    synthetic_size => "synthetic_size",
    synthetic_seed => "synthetic_seed",
    synthetic_noise => "synthetic_noise",
    mnist_images => "mnist_images",
    mnist_labels => "mnist_labels",
    mnist_limit => "mnist_limit",
    arch => "arch",
    learning_rate => "learning_rate",
    iterations => "iterations",
    clip_norm => "clip_norm",
    noise_multiplier => "noise_multiplier",
    eps_target => "eps_target",
    delta => "delta",
    models_per_arm => "models_per_arm",
    craft_fraction => "craft_fraction",
    craft_steps => "craft_steps",
    craft_step_size => "craft_step_size",
    var_floor => "var_floor",
    alpha => "alpha",
    base_seed => "base_seed",
    canary_label => "canary_label",
    out_dir => "out_dir",
    threads => "threads",
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.preset {
            Some(name) => ExperimentConfig::preset(name)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let map = dp_audit::harness::config::parse_key_values(&text)?;
            if self.preset.is_none() {
                if let Some(name) = map.get("preset") {
                    cfg = ExperimentConfig::preset(name)?;
                }
            }
            cfg.apply(&map)?;
        }
        let mut overrides = BTreeMap::new();
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::config(format!("--set expects key=value, got {pair:?}")))?;
            overrides.insert(k.trim().to_string(), v.trim().to_string());
        }
        cfg.apply(&overrides)?;
        let flags: BTreeMap<String, String> = self.flag_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        cfg.apply(&flags)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_with_out_dir(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let cfg = self.resolve()?;
        let dir = cfg
            .out_dir
            .clone()
            .ok_or_else(|| Error::config("this command needs --out-dir (or out_dir in the config)"))?;
        Ok((cfg, dir))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Calibrate { epsilon, delta, steps } => {
            let sigma = calibrate_sigma(PrivacyBudget::new(epsilon, delta)?, steps)?;
            println!("sigma = {sigma:?}");
            println!("mu = {:?}", (steps as f64).sqrt() / sigma);
            println!("epsilon_check = {:?}", theoretical_epsilon(sigma, steps, delta)?);
            Ok(())
        }
        Command::TrainEnsemble(args) => train_ensemble(&args),
        Command::Craft { objective, config } => craft(objective, &config),
        Command::Audit { sample, config } => audit(&sample, &config),
        Command::Report {
            audits,
            output,
            summary,
            config,
        } => {
            let (_, dir) = config.resolve_with_out_dir()?;
            let records = load_records(&audits.unwrap_or_else(|| dir.join("audits")))?;
            let written = emit_report(&records, &output.unwrap_or_else(|| dir.join("report.csv")), summary)?;
            print_written(&written);
            Ok(())
        }
        Command::E2e {
            runs,
            objectives,
            eps_targets,
            eval_sizes,
            summary,
            config,
        } => {
            let (cfg, dir) = config.resolve_with_out_dir()?;
            write_config(&cfg, &dir)?;
            let plan = RunPlan {
                eps_targets: if eps_targets.is_empty() { vec![cfg.eps_target] } else { eps_targets },
                runs,
                sources: objectives,
                eval_sizes,
            };
            let records = run_plan(&cfg, &plan)?;
            for r in &records {
                println!(
                    "{} eps_target={} seed={} N_eval={} eps_emp={:.4}",
                    r.objective,
                    r.eps_target,
                    r.seed,
                    r.n_eval(),
                    r.report.eps_emp
                );
            }
            print_written(&emit_report(&records, &dir.join("report.csv"), summary)?);
            Ok(())
        }
    }
}

fn print_written(paths: &[PathBuf]) {
    if let Some(first) = paths.first() {
        println!("wrote {} ({} histograms)", first.display(), paths.len() - 1);
    }
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.to_key_values()).map_err(|e| Error::io(&path, e))
}

fn train_ensemble(args: &ConfigArgs) -> Result<()> {
    let (cfg, dir) = args.resolve_with_out_dir()?;
    let prepared = prepare(&cfg)?;
    write_config(&cfg, &dir)?;
    write_sample(&prepared.canary, &dir.join(CANARY_FILE))?;
    let ensemble = run_ensemble_prepared(&cfg, &prepared)?;
    let failed = ensemble.manifest.records.iter().filter(|r| !r.ok).count();
    println!(
        "trained {} models per arm (sigma = {:?}, {} failed) into {}",
        cfg.models_per_arm,
        prepared.sigma,
        failed,
        dir.display()
    );
    Ok(())
}

fn craft(objective: Objective, args: &ConfigArgs) -> Result<()> {
    let (cfg, dir) = args.resolve_with_out_dir()?;
    let canary = read_sample(&dir.join(CANARY_FILE))?;
    let ensemble = load_ensemble(&dir, canary)?;
    ensemble.manifest.assert_disjoint_splits();
    let crafted = craft_adversarial(
        &ensemble.craft.without,
        &ensemble.craft.with,
        &ensemble.canary,
        &cfg.craft_config(objective),
    )?;
    let path = dir.join("samples").join(format!("{objective}.sample"));
    fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
    write_sample(&crafted.sample, &path)?;
    println!(
        "{objective}: objective {:?} -> {:?} (best step {}), wrote {}",
        crafted.initial_objective,
        crafted.objective,
        crafted.best_step,
        path.display()
    );
    Ok(())
}

fn audit(sample_arg: &str, args: &ConfigArgs) -> Result<()> {
    let (cfg, dir) = args.resolve_with_out_dir()?;
    let canary = read_sample(&dir.join(CANARY_FILE))?;
    let (source, name, sample) = match sample_arg.parse::<SampleSource>() {
        Ok(SampleSource::Canary) => (SampleSource::Canary, "canary".to_string(), canary.clone()),
        Ok(SampleSource::Crafted(o)) => {
            let path = dir.join("samples").join(format!("{o}.sample"));
            (SampleSource::Crafted(o), o.to_string(), read_sample(&path)?)
        }
        Err(_) => {
            let path = Path::new(sample_arg);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sample".into());
            (SampleSource::Canary, name, read_sample(path)?)
        }
    };
    let ensemble = load_ensemble(&dir, canary)?;
    ensemble.manifest.assert_disjoint_splits();
    let outcome = audit_sample(&ensemble, source, sample, None, &cfg)?;
    let record = AuditRecord {
        objective: name.clone(),
        eps_target: cfg.eps_target,
        seed: cfg.base_seed,
        report: outcome.report,
        observations: outcome.observations,
    };
    let (report_path, _) = save_record(&record, &dir.join("audits"), &name)?;
    println!(
        "{name}: eps_emp = {:.4} (mu_emp = {:.4}, tau = {:.4}, {}), wrote {}",
        record.report.eps_emp,
        record.report.mu_emp,
        record.report.tau,
        record.report.direction,
        report_path.display()
    );
    Ok(())
}
