//! `grouprec` command-line front end.

use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use grouprec::eval::{evaluate, validate_ns, Partition, Variant, DEFAULT_NS};
use grouprec::hin::InteractionStore;
use grouprec::io::{
    checkpoint_json, generate_synthetic, load_checkpoint, load_dataset, reports_csv, round6, save_checkpoint,
    shaped_bundle, write_loss, DatasetStats, GroupSizes, ItemHistogram, MetricsFormat, SignalMode, SyntheticSpec,
    MOOCCUBE_SHAPE, MOVIELENS_SHAPE,
};
use grouprec::model::{AggregatorKind, TargetMode};
use grouprec::pipeline::{
    ablation, init_state, micro_grad_check, run_stages, sweep, sweep_csv, Experiment, Grid, RunConfig, Stages,
};
use grouprec::train::Stage;
use grouprec::{Error as CoreError, ErrorKind};
use log::{info, warn};
use serde_json::json;

const CHECKPOINT_FILE: &str = "checkpoint.grck";
const STORE_FILE: &str = "store.json";

#[derive(Parser, Debug)]
#[command(name = "grouprec", version, about = "Group recommendation with item dependencies")]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a dataset directory, persist the store and write statistics.
    Prepare(PrepareArgs),
    /// Two-stage training; writes a checkpoint and the loss stream.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the validation or test split.
    Evaluate(EvaluateArgs),
    /// Train and evaluate several variants under one seed.
    Ablate(AblateArgs),
    /// Train and evaluate along one hyperparameter grid.
    Sweep(SweepArgs),
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Finite-difference gradient check on the micro-instance.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct PrepareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Dependency closure depth.
    #[arg(long, default_value_t = 1)]
    depth: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggArg {
    Attention,
    Meanpool,
}

impl From<AggArg> for AggregatorKind {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Attention => AggregatorKind::Attention,
            AggArg::Meanpool => AggregatorKind::Meanpool,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    Merged,
    Explicit,
}

/// Values that override the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Dataset directory or prepared directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    pretrain_lr: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long, value_enum)]
    aggregator: Option<AggArg>,
    #[arg(long)]
    freeze_user: Option<bool>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    depth: Option<usize>,
    /// Active path labels, comma-separated (e.g. P1,PP1).
    #[arg(long, value_delimiter = ',')]
    paths: Option<Vec<String>>,
    #[arg(long, value_enum)]
    targets: Option<TargetArg>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        let t = &mut cfg.train;
        if let Some(v) = &self.data {
            cfg.data = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            t.learning_rate = v;
        }
        if let Some(v) = self.pretrain_lr {
            t.pretrain_lr = v;
        }
        if let Some(v) = self.dim {
            t.dim = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = self.aggregator {
            t.aggregator = v.into();
        }
        if let Some(v) = self.freeze_user {
            t.freeze_user_in_stage2 = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(v) = &self.paths {
            cfg.path_labels = v.clone();
        }
        if let Some(v) = self.targets {
            cfg.targets = match v {
                TargetArg::Merged => TargetMode::Merged,
                TargetArg::Explicit => TargetMode::Explicit,
            };
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// 1, 2 or both.
    #[arg(long, default_value = "both")]
    stage: Stages,
    /// Checkpoint to continue from with --stage 2 (default: <out>/checkpoint.grck).
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Also write a JSON mirror of the checkpoint.
    #[arg(long)]
    json_mirror: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// test or validation.
    #[arg(long, default_value = "test")]
    split: Partition,
    /// Cutoffs, comma-separated, from {5, 10, 20}.
    #[arg(long = "N", value_delimiter = ',', default_values_t = DEFAULT_NS)]
    n: Vec<usize>,
    /// Dataset directory (default: the one recorded in the checkpoint).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory (default: the checkpoint's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Variants, comma-separated, from full, RPT, RDMP, RMP, RAA.
    #[arg(long, value_delimiter = ',', default_values_t = Variant::ALL)]
    variants: Vec<Variant>,
    #[arg(long, default_value = "test")]
    split: Partition,
    #[arg(long = "N", value_delimiter = ',', default_values_t = DEFAULT_NS)]
    n: Vec<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// lr, dim, batch or decay.
    #[arg(long)]
    grid: Grid,
    /// Points to run instead of the full grid, comma-separated.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long, default_value = "validation")]
    split: Partition,
    #[arg(long = "N", value_delimiter = ',', default_values_t = DEFAULT_NS)]
    n: Vec<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeArg {
    Mooccube,
    Movielens,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Explicit,
    Implicit,
    Mixed,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Synthetic spec as JSON; flags below override its fields.
    #[arg(long, conflicts_with = "shape")]
    spec: Option<PathBuf>,
    /// Count-matched bundle for a published dataset summary.
    #[arg(long, value_enum)]
    shape: Option<ShapeArg>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    chain_length: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Group sizes drawn from MIN..=MAX instead of an even split.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    group_size: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, value_enum, default_value = "attention")]
    aggregator: AggArg,
    /// Also accept entries whose absolute error is below this floor.
    #[arg(long)]
    abs_floor: Option<f64>,
    /// Add 0.1 to one analytic gradient entry (detector sanity check).
    #[arg(long)]
    corrupt: bool,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors in how the tool was invoked.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A check that ran but did not pass.
#[derive(Debug)]
struct NumericalFailure(String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            };
        }
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<NumericalFailure>() {
            return 3;
        }
    }
    2
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn require_dir(opt: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    opt.clone()
        .ok_or_else(|| usage(format!("no {what} directory: set `{what}` in the config or pass --{what}")))
}

/// A prepared directory (with `store.json`) or a raw TSV dataset directory.
fn load_store(data: &Path, depth: usize) -> Result<InteractionStore> {
    let prepared = data.join(STORE_FILE);
    if prepared.is_file() {
        let file = File::open(&prepared).with_context(|| format!("opening {}", prepared.display()))?;
        let mut store: InteractionStore =
            serde_json::from_reader(BufReader::new(file)).map_err(CoreError::from)?;
        if store.depth != depth {
            store.derive_multi_hop(depth)?;
        }
        Ok(store)
    } else {
        Ok(load_dataset(data)?.build_store(depth)?)
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_prepare(args: &PrepareArgs) -> Result<()> {
    if args.depth == 0 {
        return Err(usage("--depth must be at least 1"));
    }
    let bundle = load_dataset(&args.data)?;
    let store = bundle.build_store(args.depth)?;
    let stats = DatasetStats::of(&store);
    fs::create_dir_all(&args.out)?;
    let file = File::create(args.out.join(STORE_FILE))?;
    serde_json::to_writer(std::io::BufWriter::new(file), &store).map_err(CoreError::from)?;
    write_text(&args.out.join("stats.tsv"), &stats.table())?;
    write_json(
        &args.out.join("stats.json"),
        &json!({ "data": args.data, "depth": args.depth, "stats": stats }),
    )?;
    let hist = ItemHistogram::of(&store);
    write_text(&args.out.join("item_histogram.tsv"), &hist.to_tsv())?;
    let mut freq = String::from("count\texplicit_items\timplicit_items\n");
    for (c, (e, i)) in hist.frequency() {
        freq.push_str(&format!("{c}\t{e}\t{i}\n"));
    }
    write_text(&args.out.join("interaction_frequency.tsv"), &freq)?;
    print!("{}", stats.table());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = load_config(&args.config, &args.overrides)?;
    let data = require_dir(&cfg.data, "data")?;
    let out = require_dir(&cfg.out, "out")?;
    let store = load_store(&data, cfg.depth)?;
    let exp = Experiment::prepare(&store, &cfg)?;
    let inputs = exp.inputs(cfg.variant.target_mode(cfg.targets))?;

    let mut state = if args.stage == Stages::Second {
        let path = args.resume.clone().unwrap_or_else(|| out.join(CHECKPOINT_FILE));
        let ck = load_checkpoint(&path).with_context(|| format!("loading {}", path.display()))?;
        if ck.config != cfg.echo() {
            warn!("configuration differs from the one recorded in {}", path.display());
        }
        let ready = match ck.state.stage {
            Stage::Pretrained => true,
            Stage::Initialized => cfg.variant.skips_pretraining(),
            Stage::Trained => false,
        };
        if !ready {
            return Err(usage(format!(
                "{} is at stage {:?}; --stage 2 needs a stage-1 checkpoint",
                path.display(),
                ck.state.stage
            )));
        }
        ck.state
    } else {
        init_state(&inputs, &cfg.train, cfg.variant)?
    };
    if args.resume.is_some() && args.stage != Stages::Second {
        warn!("--resume is only used with --stage 2");
    }

    run_stages(&mut state, &inputs, &cfg.train, cfg.variant, args.stage, None)?;

    fs::create_dir_all(&out)?;
    let echo = cfg.echo();
    let ck_path = out.join(CHECKPOINT_FILE);
    save_checkpoint(&ck_path, &state, &echo, cfg.train.seed)?;
    if args.json_mirror {
        write_text(&out.join("checkpoint.json"), &checkpoint_json(&state, &echo, cfg.train.seed)?)?;
    }
    write_loss(&out.join("loss.csv"), &state.history, &state.wall_secs, MetricsFormat::Csv)?;
    match state.history.last() {
        Some(last) => println!(
            "{}: stage {} epoch {} loss {:.6}; checkpoint {}",
            cfg.variant,
            last.stage,
            last.epoch,
            last.loss,
            ck_path.display()
        ),
        None => println!("{}: no epochs run; checkpoint {}", cfg.variant, ck_path.display()),
    }
    Ok(())
}

fn report_json(echo: &serde_json::Value, split: Partition, reports: &[grouprec::eval::EvalReport]) -> serde_json::Value {
    let rounded: Vec<_> = reports.iter().map(|r| r.rounded()).collect();
    json!({ "config": echo, "split": split, "reports": rounded })
}

fn warn_if_small(exp: &Experiment, split: Partition) {
    let n = exp.split.instances(split).len();
    if n < 20 {
        warn!("the {} split has only {n} held-out interactions; metrics will be coarse", split_name(split));
    }
}

fn split_name(p: Partition) -> &'static str {
    match p {
        Partition::Test => "test",
        Partition::Validation => "validation",
    }
}

fn print_reports(reports: &[grouprec::eval::EvalReport]) {
    for r in reports {
        let hr: Vec<String> = r.hr.iter().map(|(n, v)| format!("HR@{n}={}", round6(*v))).collect();
        let nd: Vec<String> = r.ndcg.iter().map(|(n, v)| format!("NDCG@{n}={}", round6(*v))).collect();
        println!("{:<5} {} {}", r.variant, hr.join(" "), nd.join(" "));
    }
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    validate_ns(&args.n)?;
    let ck = load_checkpoint(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let mut cfg: RunConfig = serde_json::from_value(ck.config.clone())
        .map_err(|e| CoreError::Checkpoint(format!("recorded configuration is unreadable: {e}")))?;
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    let data = require_dir(&cfg.data, "data")?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None => args.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let store = load_store(&data, cfg.depth)?;
    let exp = Experiment::prepare(&store, &cfg)?;
    warn_if_small(&exp, args.split);
    let inputs = exp.inputs(cfg.variant.target_mode(cfg.targets))?;
    let evaluation = evaluate(
        &ck.state.params,
        &inputs,
        &exp.split.instances(args.split),
        &args.n,
        cfg.variant.label(),
    )?;
    let reports = [evaluation.report];
    fs::create_dir_all(&out)?;
    let name = split_name(args.split);
    write_text(&out.join(format!("report_{name}.csv")), &reports_csv(&reports))?;
    write_json(&out.join(format!("report_{name}.json")), &report_json(&ck.config, args.split, &reports))?;
    print_reports(&reports);
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    validate_ns(&args.n)?;
    let cfg = load_config(&args.config, &args.overrides)?;
    let data = require_dir(&cfg.data, "data")?;
    let out = require_dir(&cfg.out, "out")?;
    let store = load_store(&data, cfg.depth)?;
    let exp = Experiment::prepare(&store, &cfg)?;
    warn_if_small(&exp, args.split);
    let runs = ablation(&exp, &cfg, &args.variants, args.split, &args.n)?;
    let reports: Vec<_> = runs.into_iter().map(|r| r.evaluation.report).collect();
    fs::create_dir_all(&out)?;
    write_text(&out.join("ablation.csv"), &reports_csv(&reports))?;
    write_json(&out.join("ablation.json"), &report_json(&cfg.echo(), args.split, &reports))?;
    print_reports(&reports);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    validate_ns(&args.n)?;
    let cfg = load_config(&args.config, &args.overrides)?;
    let data = require_dir(&cfg.data, "data")?;
    let out = require_dir(&cfg.out, "out")?;
    let store = load_store(&data, cfg.depth)?;
    let exp = Experiment::prepare(&store, &cfg)?;
    warn_if_small(&exp, args.split);
    let values = args.values.clone().unwrap_or_else(|| args.grid.points());
    if values.is_empty() {
        return Err(usage("--values needs at least one point"));
    }
    let points = sweep(&exp, &cfg, args.grid, &values, args.split, &args.n)?;
    fs::create_dir_all(&out)?;
    let name = match args.grid {
        Grid::Lr => "lr",
        Grid::Dim => "dim",
        Grid::Batch => "batch",
        Grid::Decay => "decay",
    };
    write_text(&out.join(format!("sweep_{name}.csv")), &sweep_csv(&points))?;
    let rounded: Vec<_> = points
        .iter()
        .map(|p| json!({ "parameter": p.parameter, "value": p.value, "report": p.report.rounded() }))
        .collect();
    write_json(
        &out.join(format!("sweep_{name}.json")),
        &json!({ "config": cfg.echo(), "split": args.split, "points": rounded }),
    )?;
    print!("{}", sweep_csv(&points));
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (bundle, echo) = if let Some(shape) = args.shape {
        let target = match shape {
            ShapeArg::Mooccube => MOOCCUBE_SHAPE,
            ShapeArg::Movielens => MOVIELENS_SHAPE,
        };
        (shaped_bundle(&target)?, json!({ "shape": target }))
    } else {
        let mut spec = match &args.spec {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("spec {}: {e}", p.display())))?
            }
            None => SyntheticSpec::default(),
        };
        if let Some(v) = args.users {
            spec.n_users = v;
        }
        if let Some(v) = args.items {
            spec.n_items = v;
        }
        if let Some(v) = args.groups {
            spec.n_groups = v;
        }
        if let Some(v) = args.chain_length {
            spec.chain_length = v;
        }
        if let Some(v) = args.mode {
            spec.mode = match v {
                ModeArg::Explicit => SignalMode::Explicit,
                ModeArg::Implicit => SignalMode::Implicit,
                ModeArg::Mixed => SignalMode::Mixed,
            };
        }
        if let Some(v) = args.noise {
            spec.noise = v;
        }
        if let Some(v) = args.seed {
            spec.seed = v;
        }
        if let Some(v) = &args.group_size {
            spec.group_sizes = GroupSizes::Uniform { min: v[0], max: v[1] };
        }
        (generate_synthetic(&spec)?, json!({ "spec": spec }))
    };
    bundle.save(&args.out)?;
    write_json(&args.out.join("synth.json"), &echo)?;
    println!(
        "{} user-item, {} item-item, {} group-user records in {}",
        bundle.user_item.len(),
        bundle.item_item.len(),
        bundle.group_user.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let check = micro_grad_check(args.seed, args.aggregator.into(), args.step, args.tol, args.corrupt)?;
    for (loss, report) in [("user", &check.user), ("group", &check.group)] {
        for p in &report.params {
            println!(
                "{loss:<5} {:<16} rel {:.3e} abs {:.3e}",
                p.name, p.max_rel_error, p.max_abs_error
            );
        }
    }
    if let Some(path) = &args.out {
        write_json(path, &serde_json::to_value(&check)?)?;
    }
    let (ok, criterion) = match args.abs_floor {
        Some(floor) => (check.mixed_violations(floor) == 0, format!("tol {:e}, abs floor {floor:e}", args.tol)),
        None => (check.passed(), format!("tol {:e}", args.tol)),
    };
    println!(
        "max relative error {:.3e} ({criterion}): {}",
        check.max_rel_error(),
        if ok { "pass" } else { "FAIL" }
    );
    if ok {
        return Ok(());
    }
    let floor = args.abs_floor.unwrap_or(0.0);
    let mut names: Vec<&str> = check
        .user
        .failures()
        .chain(check.group.failures())
        .filter(|p| p.max_abs_error >= floor)
        .map(|p| p.name.as_str())
        .collect();
    names.sort_unstable();
    names.dedup();
    Err(NumericalFailure(format!("gradient check failed for {}", names.join(", "))).into())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    info!("{:?}", cli.command);
    match &cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
