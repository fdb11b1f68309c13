//! `mannlab`: generate data, train, evaluate, trace, probe, verify and plot.
//!
//! Every subcommand resolves one [`RunConfig`] from `--config` plus flag
//! overrides, writes it to `<out>/config.toml`, and then produces plain
//! files in `<out>`.

pub mod config;
mod error;
mod plot;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mann_core::checkpoint::Checkpoint;
use mann_core::config::{Precision, Variant};
use mann_core::eval::{evaluate, BucketKey};
use mann_core::introspect::{record, TraceLevel, TraceSet};
use mann_core::model::Model;
use mann_core::train::{train, write_metrics_csv, TrainStatus};
use mann_tasks::dataset::Dataset;
use mann_tasks::m10ae::gen_m10ae_dataset;
use mann_tasks::mirror::gen_mirror_dataset;
use mann_tasks::probe::gen_probe_set;
use mann_tasks::TaskKind;
use mann_tensor::Scalar;
use mann_verify::report::verify_traces;
use mann_verify::HypothesisSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind};
pub use plot::PlotKind;

pub const TRAIN_FILE: &str = "train.txt";
pub const DEV_FILE: &str = "dev.txt";
pub const TEST_FILE: &str = "test.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const PROBE_FILE: &str = "probes.txt";

#[derive(Debug, Parser)]
#[command(name = "mannlab", version, about = "Memory-augmented network laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run config file (TOML); defaults apply to anything it omits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for model initialization and batch sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Light,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train, dev and test datasets.
    Gen {
        #[arg(long)]
        task: Option<TaskKind>,
        /// Longest training mirror sequence, or largest training #LPO.
        #[arg(long)]
        lmax: Option<usize>,
        /// Longest test mirror sequence, or largest test #LPO.
        #[arg(long)]
        test_lmax: Option<usize>,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        dev_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
    },
    /// Train a model; writes the best checkpoint, metrics and a summary.
    Train {
        #[arg(long)]
        task: Option<TaskKind>,
        #[arg(long)]
        variant: Option<Variant>,
        /// Directory with datasets from `gen`.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Bucketed accuracy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset file; a test set is generated from the config otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Longest generated test sequence, or largest test #LPO.
        #[arg(long)]
        lmax: Option<usize>,
    },
    /// Record per-step traces of a checkpoint over a probe set.
    Trace {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        probes: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = LevelArg::Full)]
        level: LevelArg,
    },
    /// Generate a 500-sample probe set.
    Probe {
        #[arg(long)]
        task: Option<TaskKind>,
        /// Mirror probe length.
        #[arg(long)]
        len: Option<usize>,
    },
    /// Verify hypothesis spec files.
    Verify {
        #[arg(long = "spec", required = true)]
        specs: Vec<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        probes: Option<PathBuf>,
        /// Full trace file to verify against instead of re-running the model.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Render SVG plots from metrics, evaluation or trace files.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
}

/// Parses `args` and runs the subcommand. Returns the stdout summary line.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.common.out {
        cfg.out = out.clone();
    }
    match cli.command {
        Command::Gen { task, lmax, test_lmax, train_size, dev_size, test_size } => {
            if let Some(t) = task {
                cfg.task = t;
            }
            set_limits(&mut cfg, lmax, test_lmax);
            cfg.data.train_size = train_size.or(cfg.data.train_size);
            cfg.data.dev_size = dev_size.or(cfg.data.dev_size);
            cfg.data.test_size = test_size.or(cfg.data.test_size);
            cfg.resolve();
            cfg.validate()?;
            cfg.write_to_out()?;
            gen(&cfg)
        }
        Command::Train { task, variant, data, steps } => {
            if let Some(t) = task {
                cfg.task = t;
            }
            if let Some(v) = variant {
                cfg.model.variant = v;
            }
            if data.is_some() {
                cfg.data.dir = data;
            }
            if let Some(s) = steps {
                cfg.set_max_steps(s);
            }
            cfg.resolve();
            cfg.validate()?;
            cfg.write_to_out()?;
            match cfg.model.precision {
                Precision::F32 => run_train::<f32>(&cfg),
                Precision::F64 => run_train::<f64>(&cfg),
            }
        }
        Command::Eval { checkpoint, data, lmax } => {
            override_path(&mut cfg.paths.checkpoint, checkpoint);
            let ckpt = load_checkpoint(&cfg)?;
            cfg.task = checkpoint_task(&ckpt);
            set_limits(&mut cfg, None, lmax);
            if let Some(d) = data {
                cfg.paths.inputs = vec![d];
            }
            cfg.resolve();
            cfg.validate()?;
            cfg.write_to_out()?;
            match ckpt.config.precision {
                Precision::F32 => run_eval(&cfg, &ckpt.to_model::<f32>()?),
                Precision::F64 => run_eval(&cfg, &ckpt.to_model::<f64>()?),
            }
        }
        Command::Trace { checkpoint, probes, level } => {
            override_path(&mut cfg.paths.checkpoint, checkpoint);
            override_path(&mut cfg.paths.probes, probes);
            let ckpt = load_checkpoint(&cfg)?;
            cfg.task = checkpoint_task(&ckpt);
            cfg.resolve();
            cfg.validate()?;
            cfg.write_to_out()?;
            let level = match level {
                LevelArg::Light => TraceLevel::Light,
                LevelArg::Full => TraceLevel::Full,
            };
            let probes = probe_set(&cfg)?;
            let traces = match ckpt.config.precision {
                Precision::F32 => record(&ckpt.to_model::<f32>()?, &probes, level)?,
                Precision::F64 => record(&ckpt.to_model::<f64>()?, &probes, level)?,
            };
            let mut buf = Vec::new();
            traces.write_jsonl(&mut buf)?;
            write_file(&cfg.out.join(TRACE_FILE), &buf)?;
            Ok(json!({"command": "trace", "samples": traces.traces.len(), "out": cfg.out}).to_string())
        }
        Command::Probe { task, len } => {
            if let Some(t) = task {
                cfg.task = t;
            }
            if let Some(l) = len {
                cfg.data.probe_len = l;
            }
            cfg.resolve();
            cfg.validate()?;
            cfg.write_to_out()?;
            let probes = gen_probe_set(cfg.task, cfg.data.probe_len, &mut ChaCha8Rng::seed_from_u64(cfg.data.seed));
            let path = cfg.out.join(PROBE_FILE);
            probes.save(&path)?;
            Ok(json!({"command": "probe", "task": cfg.task, "samples": probes.len(), "path": path}).to_string())
        }
        Command::Verify { specs, checkpoint, probes, traces } => {
            override_path(&mut cfg.paths.checkpoint, checkpoint);
            override_path(&mut cfg.paths.probes, probes);
            override_path(&mut cfg.paths.traces, traces);
            cfg.paths.specs = specs;
            cfg.resolve();
            cfg.validate()?;
            cfg.write_to_out()?;
            run_verify(&cfg)
        }
        Command::Plot { kind, inputs } => {
            cfg.paths.inputs = inputs;
            cfg.resolve();
            cfg.validate()?;
            let written = plot::render(kind, &cfg.paths.inputs)?;
            cfg.write_to_out()?;
            let mut names = Vec::new();
            for (name, content) in written {
                write_file(&cfg.out.join(&name), content.as_bytes())?;
                names.push(name);
            }
            Ok(json!({"command": "plot", "files": names}).to_string())
        }
    }
}

fn override_path(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

fn set_limits(cfg: &mut RunConfig, lmax: Option<usize>, test_lmax: Option<usize>) {
    match cfg.task {
        TaskKind::Mirror => {
            if let Some(l) = lmax {
                cfg.data.max_len = l;
                cfg.data.test_max_len = cfg.data.test_max_len.max(l);
            }
            if let Some(l) = test_lmax {
                cfg.data.test_max_len = l;
            }
        }
        TaskKind::M10ae => {
            if let Some(l) = lmax {
                cfg.data.max_lpo = l;
                cfg.data.test_max_lpo = cfg.data.test_max_lpo.max(l);
            }
            if let Some(l) = test_lmax {
                cfg.data.test_max_lpo = l;
            }
        }
    }
}

/// Writes through a temporary file so failures never leave partial output.
fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Train, dev and test sets generated from the data seed.
pub fn generate(cfg: &RunConfig) -> Result<(Dataset, Dataset, Dataset), CliError> {
    let d = &cfg.data;
    let (n_train, n_dev, n_test) = d.sizes(cfg.task);
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    Ok(match cfg.task {
        TaskKind::Mirror => (
            Dataset::Mirror(gen_mirror_dataset(n_train, d.min_len, d.max_len, &mut rng)?),
            Dataset::Mirror(gen_mirror_dataset(n_dev, d.min_len, d.max_len, &mut rng)?),
            Dataset::Mirror(gen_mirror_dataset(n_test, d.min_len, d.test_max_len, &mut rng)?),
        ),
        TaskKind::M10ae => {
            let mut seen = HashSet::new();
            let train = gen_m10ae_dataset(n_train, d.max_lpo, &mut seen, &mut rng);
            let dev = gen_m10ae_dataset(n_dev, d.max_lpo, &mut seen, &mut rng);
            let test = gen_m10ae_dataset(n_test, d.test_max_lpo, &mut seen, &mut rng);
            (Dataset::M10ae(train), Dataset::M10ae(dev), Dataset::M10ae(test))
        }
    })
}

fn gen(cfg: &RunConfig) -> Result<String, CliError> {
    let (train, dev, test) = generate(cfg)?;
    for (name, set) in [(TRAIN_FILE, &train), (DEV_FILE, &dev), (TEST_FILE, &test)] {
        set.save(cfg.out.join(name))?;
    }
    Ok(json!({"command": "gen", "task": cfg.task, "train": train.len(), "dev": dev.len(), "test": test.len()})
        .to_string())
}

fn load_dataset(path: &Path, task: TaskKind) -> Result<Dataset, CliError> {
    let set = Dataset::load(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if set.task() != task {
        return Err(CliError::data(format!("{} holds {} data, expected {task}", path.display(), set.task())));
    }
    Ok(set)
}

fn datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset, Dataset), CliError> {
    match &cfg.data.dir {
        Some(dir) => Ok((
            load_dataset(&dir.join(TRAIN_FILE), cfg.task)?,
            load_dataset(&dir.join(DEV_FILE), cfg.task)?,
            load_dataset(&dir.join(TEST_FILE), cfg.task)?,
        )),
        None => generate(cfg),
    }
}

fn run_train<T: Scalar>(cfg: &RunConfig) -> Result<String, CliError> {
    let (train_set, dev_set, _) = datasets(cfg)?;
    let mut model = Model::<T>::new(cfg.model_config())?;
    let outcome = train(&mut model, &cfg.train_config(), &train_set, &dev_set)?;
    let mut csv = Vec::new();
    write_metrics_csv(&outcome.metrics, &mut csv)?;
    write_file(&cfg.out.join(METRICS_FILE), &csv)?;
    let ckpt = serde_json::to_vec(&Checkpoint::from_model(&model)).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&cfg.out.join(CHECKPOINT_FILE), &ckpt)?;
    let summary = serde_json::to_vec_pretty(&outcome.summary).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&cfg.out.join(SUMMARY_FILE), &summary)?;
    if outcome.summary.status == TrainStatus::Diverged {
        return Err(CliError::numerical(format!(
            "training diverged after {} non-finite steps; last good parameters saved",
            outcome.summary.skipped_steps
        )));
    }
    Ok(json!({"command": "train", "summary": outcome.summary}).to_string())
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Checkpoint, CliError> {
    let path = cfg
        .paths
        .checkpoint
        .as_ref()
        .ok_or_else(|| CliError::config("no checkpoint given (--checkpoint or paths.checkpoint)"))?;
    Checkpoint::load(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn checkpoint_task(ckpt: &Checkpoint) -> TaskKind {
    match ckpt.config.input {
        mann_core::config::InputSpec::Embedding { .. } => TaskKind::M10ae,
        mann_core::config::InputSpec::Vector { .. } => TaskKind::Mirror,
    }
}

fn run_eval<T: Scalar>(cfg: &RunConfig, model: &Model<T>) -> Result<String, CliError> {
    let data = match cfg.paths.inputs.first() {
        Some(path) => load_dataset(path, cfg.task)?,
        None => generate(cfg)?.2,
    };
    let (key, bounds) = match cfg.task {
        TaskKind::Mirror => (BucketKey::Length, (1, cfg.data.test_max_len)),
        TaskKind::M10ae => (BucketKey::NLpo, (0, cfg.data.test_max_lpo)),
    };
    let report = evaluate(model, &data, key, Some(bounds))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&cfg.out.join("eval.csv"), &csv)?;
    let json_report = serde_json::to_vec_pretty(&report).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&cfg.out.join("eval.json"), &json_report)?;
    Ok(json!({"command": "eval", "count": report.count, "accuracy": report.accuracy}).to_string())
}

fn probe_set(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match &cfg.paths.probes {
        Some(path) => load_dataset(path, cfg.task),
        None => Ok(gen_probe_set(cfg.task, cfg.data.probe_len, &mut ChaCha8Rng::seed_from_u64(cfg.data.seed))),
    }
}

/// Relative paths inside a spec file are taken relative to that file.
fn spec_relative(spec_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        spec_path.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn run_verify(cfg: &RunConfig) -> Result<String, CliError> {
    let mut lines = Vec::new();
    for spec_path in &cfg.paths.specs {
        let spec = HypothesisSpec::load(spec_path).map_err(|e| match e {
            mann_verify::VerifyError::Io(io) => CliError::data(format!("{}: {io}", spec_path.display())),
            other => CliError::config(format!("{}: {other}", spec_path.display())),
        })?;
        let mut local = cfg.clone();
        local.task = spec.task;
        if local.paths.checkpoint.is_none() {
            local.paths.checkpoint = spec.checkpoint.as_ref().map(|p| spec_relative(spec_path, p));
        }
        if local.paths.probes.is_none() {
            local.paths.probes = spec.probes.as_ref().map(|p| spec_relative(spec_path, p));
        }
        let probes = probe_set(&local)?;
        let traces = match &local.paths.traces {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
                TraceSet::read_jsonl(std::io::BufReader::new(file))?
            }
            None => {
                let ckpt = load_checkpoint(&local)?;
                match ckpt.config.precision {
                    Precision::F32 => record(&ckpt.to_model::<f32>()?, &probes, TraceLevel::Full)?,
                    Precision::F64 => record(&ckpt.to_model::<f64>()?, &probes, TraceLevel::Full)?,
                }
            }
        };
        let report = verify_traces(&traces, &probes, &spec)?;
        let stem = spec_path.file_stem().and_then(|s| s.to_str()).unwrap_or("hypothesis");
        let mut buf = Vec::new();
        report.write_json(&mut buf)?;
        write_file(&cfg.out.join(format!("{stem}.report.json")), &buf)?;
        write_file(&cfg.out.join(format!("{stem}.svg")), report.scatter_svg().as_bytes())?;
        lines.push(json!({
            "spec": stem,
            "verdict": report.verdict,
            "score": report.score,
            "chance": report.chance,
            "count": report.count,
        }));
    }
    Ok(json!({"command": "verify", "reports": lines}).to_string())
}
