// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use deobtime::attack::{sat_attack, AttackConfig, AttackLogLine, LabelKind};
use deobtime::cnf::{build_miter, to_dimacs, tseitin};
use deobtime::experiments::{
    attention_report, evaluate, generate_dataset, parse_range, Dataset, ExperimentError, GenConfig,
};
use deobtime::icnet::{partition, train, Aggregation, FeatureSet, LossScale, Model, ModelConfig, OutputHead, Sample};
use deobtime::netlist::{emit_bench, parse_bench, Circuit, GraphKind};
use deobtime::obfuscate::{random_obfuscate, InstanceRecord, ObfuscationInstance, ObfuscationKind};

#[derive(Parser, Debug)]
#[command(name = "deobtime", version, about = "Lock netlists, attack them, and learn the attack runtime")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML file with optional `[model]` and `[attack]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a .bench file and print its statistics.
    Parse {
        #[arg(long)]
        bench: PathBuf,
    },
    /// Lock a circuit at random locations.
    Obfuscate(LockArgs),
    /// Run the SAT attack on a freshly locked circuit or a saved instance.
    Attack {
        #[command(flatten)]
        lock: LockArgs,
        /// Saved instance record; overrides the locking flags.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Generate a labelled dataset.
    GenData {
        #[arg(long)]
        bench: PathBuf,
        /// `lo:hi` or a single count.
        #[arg(long, default_value = "1:3")]
        locations: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "xor")]
        kind: ObfuscationKind,
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Train a model on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "log1p_seconds")]
        label: LabelKind,
    },
    /// Evaluate a checkpoint on the held-out split of a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "log1p_seconds")]
        label: LabelKind,
        /// Score every record instead of the held-out split.
        #[arg(long)]
        all: bool,
    },
    /// Attention shares and Σmask correlations on a dataset.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "log1p_seconds")]
        label: LabelKind,
    },
    /// Write a circuit or miter formula in DIMACS format.
    ExportDimacs {
        #[command(flatten)]
        lock: LockArgs,
        #[arg(long, value_enum, default_value_t = DimacsMode::Circuit)]
        mode: DimacsMode,
    },
}

#[derive(Args, Debug)]
struct LockArgs {
    #[arg(long)]
    bench: Option<PathBuf>,
    #[arg(long, default_value = "xor")]
    kind: ObfuscationKind,
    /// Number of locked gates; `export-dimacs --mode circuit` accepts 0.
    #[arg(long, default_value_t = 1)]
    locations: usize,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Sets both feature and gate aggregation.
    #[arg(long, value_enum)]
    agg: Option<Agg>,
    #[arg(long, value_enum)]
    feat_agg: Option<Agg>,
    #[arg(long, value_enum)]
    gate_agg: Option<Agg>,
    #[arg(long, value_enum)]
    graph: Option<Graph>,
    #[arg(long, value_enum)]
    head: Option<Head>,
    #[arg(long, value_enum)]
    features: Option<Features>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Agg {
    Attention,
    Sum,
    Mean,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Graph {
    Adjacency,
    Laplacian,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Head {
    Exp,
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Features {
    LocationOnly,
    AllFeatures,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum DimacsMode {
    /// Tseitin encoding of the (locked) circuit.
    Circuit,
    /// Two-copy miter with the difference clause.
    Miter,
}

impl From<Agg> for Aggregation {
    fn from(a: Agg) -> Self {
        match a {
            Agg::Attention => Aggregation::Attention,
            Agg::Sum => Aggregation::Sum,
            Agg::Mean => Aggregation::Mean,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    model: ModelConfig,
    attack: AttackConfig,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Experiment(ExperimentError::Io { .. }) => "io",
            CliError::Experiment(ExperimentError::Format { .. }) => "format",
            CliError::Experiment(ExperimentError::Netlist(_)) => "netlist",
            CliError::Experiment(ExperimentError::Obfuscation(_)) => "obfuscation",
            CliError::Experiment(ExperimentError::Instance { .. }) => "instance",
            CliError::Experiment(ExperimentError::Attack(_)) => "attack",
            CliError::Experiment(ExperimentError::Cnf(_)) => "cnf",
            CliError::Experiment(ExperimentError::Icnet(_)) => "model",
            CliError::Experiment(_) => "experiment",
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
        }
    }
}

macro_rules! lift {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Experiment(e.into())
            }
        }
    )*};
}
lift!(
    deobtime::netlist::NetlistError,
    deobtime::obfuscate::ObfuscationError,
    deobtime::attack::AttackError,
    deobtime::icnet::IcnetError
);

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).map_err(|source| ExperimentError::Io {
            path: p.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    toml::from_str(&read(path)?).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn load_circuit(path: &Path) -> Result<Arc<Circuit>> {
    Ok(Arc::new(parse_bench(&read(path)?)?))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn lock(args: &LockArgs, seed: u64) -> Result<(ObfuscationInstance, String)> {
    let bench = args.bench.as_deref().ok_or_else(|| CliError::Usage("--bench is required".into()))?;
    let base = load_circuit(bench)?;
    Ok((random_obfuscate(base, args.locations, args.kind, seed)?, file_name(bench)))
}

fn load_instance(path: &Path) -> Result<ObfuscationInstance> {
    let text = read(path)?;
    let record: InstanceRecord = serde_json::from_str(&text).map_err(|e| ExperimentError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let bench = path.parent().unwrap_or(Path::new(".")).join(&record.base_file);
    let base = load_circuit(&bench)?;
    Ok(ObfuscationInstance::from_record(base, &record)?)
}

fn model_config(base: ModelConfig, args: &ModelArgs, seed: u64) -> ModelConfig {
    let mut c = base;
    c.seed = seed;
    if let Some(a) = args.agg {
        c.feat_agg = a.into();
        c.gate_agg = a.into();
    }
    if let Some(a) = args.feat_agg {
        c.feat_agg = a.into();
    }
    if let Some(a) = args.gate_agg {
        c.gate_agg = a.into();
    }
    if let Some(g) = args.graph {
        c.graph_repr = match g {
            Graph::Adjacency => GraphKind::Adjacency,
            Graph::Laplacian => GraphKind::Laplacian,
        };
    }
    if let Some(h) = args.head {
        c.output_head = match h {
            Head::Exp => OutputHead::Exp,
            Head::Linear => OutputHead::Linear,
        };
        if c.output_head == OutputHead::Linear {
            c.loss_scale = LossScale::Raw;
        }
    }
    if let Some(f) = args.features {
        c.feature_set = match f {
            Features::LocationOnly => FeatureSet::LocationOnly,
            Features::AllFeatures => FeatureSet::AllFeatures,
        };
    }
    if let Some(e) = args.epochs {
        c.max_epochs = e;
    }
    if let Some(lr) = args.lr {
        c.learning_rate = lr;
    }
    c
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(Model::from_checkpoint_json(&read(path)?)?)
}

fn run(cli: Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    let out = &cli.out;
    match cli.command {
        Command::Parse { bench } => {
            let c = load_circuit(&bench)?;
            let hist: serde_json::Map<String, serde_json::Value> = deobtime::netlist::GateType::ALL
                .iter()
                .zip(c.type_histogram())
                .map(|(g, n)| (g.keyword().to_string(), json!(n)))
                .collect();
            println!(
                "{}",
                pretty(&json!({
                    "file": file_name(&bench),
                    "nodes": c.len(),
                    "primary_inputs": c.primary_inputs().len(),
                    "key_inputs": c.key_inputs().len(),
                    "primary_outputs": c.primary_outputs().len(),
                    "gate_types": hist,
                }))
                .trim_end()
            );
        }
        Command::Obfuscate(args) => {
            let (inst, base_file) = lock(&args, cli.seed)?;
            let stem = format!("locked_{}", cli.seed);
            write(&out.join(format!("{stem}.bench")), &emit_bench(&inst.obfuscated))?;
            write(&out.join(format!("{stem}.json")), &pretty(&inst.to_record(&base_file)))?;
            if let Some(bench) = &args.bench {
                write(&out.join(&base_file), &read(bench)?)?;
            }
            println!("{}", json!({ "bench": format!("{stem}.bench"), "record": format!("{stem}.json") }));
        }
        Command::Attack { lock: args, instance, timeout } => {
            let inst = match instance {
                Some(p) => load_instance(&p)?,
                None => lock(&args, cli.seed)?.0,
            };
            let mut cfg = file.attack;
            if timeout.is_some() {
                cfg.timeout_seconds = timeout;
            }
            let r = sat_attack(&inst, &cfg)?;
            println!("{}", serde_json::to_string(&AttackLogLine::new(0, inst.n_locations(), &r)).expect("json"));
            write(&out.join("attack.json"), &pretty(&r))?;
        }
        Command::GenData { bench, locations, count, kind, timeout } => {
            let base = load_circuit(&bench)?;
            let mut attack = file.attack;
            if timeout.is_some() {
                attack.timeout_seconds = timeout;
            }
            let cfg = GenConfig {
                bench_file: file_name(&bench),
                location_range: parse_range(&locations)?,
                count,
                kind,
                seed: cli.seed,
                attack,
            };
            let (ds, log) = generate_dataset(base, &cfg)?;
            ds.save(out, &log)?;
            let censored = ds.records.iter().filter(|r| r.labels.censored).count();
            println!("{}", json!({ "records": ds.records.len(), "censored": censored, "out": out }));
        }
        Command::Train { data, model, label } => {
            let cfg = model_config(file.model, &model, cli.seed);
            let ds = Dataset::load(&data)?;
            let samples = ds.samples(&cfg, label)?;
            let outcome = train(&samples, &cfg)?;
            write(&out.join("model.ckpt"), &(outcome.model.to_checkpoint_json() + "\n"))?;
            write(&out.join("train_log.csv"), &outcome.log_csv())?;
            println!(
                "{}",
                json!({
                    "epochs": outcome.log.len(),
                    "converged": outcome.converged,
                    "final_val_mse": outcome.final_val_mse(),
                    "train": outcome.train_idx.len(),
                    "test": outcome.test_idx.len(),
                })
            );
        }
        Command::Eval { model, data, label, all } => {
            let m = load_model(&model)?;
            let samples = Dataset::load(&data)?.samples(&m.config, label)?;
            let chosen = select(&samples, &m.config, all)?;
            let report = evaluate(&m, &chosen, label)?;
            write(&out.join("metrics.json"), &pretty(&report))?;
            write(&out.join("metrics.csv"), &report.csv())?;
            print!("{}", report.csv());
        }
        Command::Report { model, data, label } => {
            let m = load_model(&model)?;
            let samples = Dataset::load(&data)?.samples(&m.config, label)?;
            let chosen = select(&samples, &m.config, true)?;
            let report = attention_report(&m, &chosen, label)?;
            write(&out.join("report.json"), &pretty(&report))?;
            print!("{}", report.table());
        }
        Command::ExportDimacs { lock: args, mode } => {
            let formula = if mode == DimacsMode::Circuit && args.locations == 0 {
                let bench = args.bench.as_deref().ok_or_else(|| CliError::Usage("--bench is required".into()))?;
                tseitin(&*load_circuit(bench)?).map_err(ExperimentError::from)?.0
            } else {
                let (inst, _) = lock(&args, cli.seed)?;
                match mode {
                    DimacsMode::Circuit => tseitin(&inst.obfuscated).map_err(ExperimentError::from)?.0,
                    DimacsMode::Miter => build_miter(&inst.obfuscated).map_err(ExperimentError::from)?.miter_formula(),
                }
            };
            let name = format!("{}.cnf", if mode == DimacsMode::Miter { "miter" } else { "circuit" });
            write(&out.join(&name), &to_dimacs(&formula))?;
            println!(
                "{}",
                json!({ "file": name, "vars": formula.num_vars(), "clauses": formula.num_clauses() })
            );
        }
    }
    Ok(())
}

fn select<'a>(samples: &'a [Sample], config: &ModelConfig, all: bool) -> Result<Vec<&'a Sample>> {
    if all {
        return Ok(samples.iter().collect());
    }
    let (_, test) = partition(samples, config)?;
    Ok(test.iter().map(|&i| &samples[i]).collect())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", json!({ "error": "usage", "message": e.kind().to_string() }));
            eprint!("{}", e.render());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(if matches!(e, CliError::Usage(_)) { 2 } else { 1 })
        }
    }
}
