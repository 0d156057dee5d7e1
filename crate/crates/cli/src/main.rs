//! `rila` command-line tool: generate data, corrupt and filter it, train
//! HQMMs with ILA, RILA or EM, evaluate models and check the posterior circuit.

mod bundle;
mod presets;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rila::circuit::prop1_sweep;
use rila::filter::{rcr_ef, FilterOptions};
use rila::gen::{corrupt, generate, CorruptionPolicy, ModelSpec, ObsMatrix};
use rila::hqmm::DensityMatrix;
use rila::learn::{random_kraus, train_em, train_ila, train_rila, RunRecord};
use rila::{Error, Result};
use serde_json::{json, Value};

use crate::settings::{parse_objective, parse_resample, parse_solver, Settings, TrainerKind};

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_THRESHOLD: u8 = 5;

/// Largest circuit/classical posterior gap `prop1` accepts.
const PROP1_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "rila", version, about = "Learn hidden quantum Markov models from noisy sequences")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample train and validation sequences from a model.
    Generate(GenerateArgs),
    /// Overwrite a fraction of rows with a constant symbol.
    Corrupt(CorruptArgs),
    /// Drop the rows the entropy filter flags as outliers.
    Filter(FilterArgs),
    /// Train a model on sequence files.
    Train(TrainCmd),
    /// Log-likelihood of sequences under a model.
    Eval(EvalArgs),
    /// Compare the posterior circuit against classical filtering.
    Prop1(Prop1Args),
    /// Run a named experiment end to end.
    Preset(PresetArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Benchmark name (m2010_24, s2018_26, hmm_88) or model JSON file.
    #[arg(long)]
    model: Option<String>,
    /// Training sequences.
    #[arg(long)]
    n: Option<usize>,
    /// Validation sequences.
    #[arg(long)]
    n_val: Option<usize>,
    /// Sequence length.
    #[arg(long)]
    t: Option<usize>,
}

#[derive(Args, Debug)]
struct CorruptArgs {
    #[arg(long)]
    input: PathBuf,
    /// Fraction of rows to overwrite, in [0, 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Replacement symbol.
    #[arg(long)]
    symbol: Option<u32>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Rows to remove.
    #[arg(long)]
    count: usize,
    /// Keep the highest-scoring rows instead of the lowest.
    #[arg(long)]
    keep_high_s: bool,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    trainer: Option<String>,
    /// regular or l1.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// pattern or fd.
    #[arg(long)]
    solver: Option<String>,
    /// softmax or literal.
    #[arg(long)]
    resample: Option<String>,
    #[arg(long)]
    keep_high_s: bool,
    /// Hidden dimension of the learned model.
    #[arg(long)]
    states: Option<usize>,
    /// Alphabet size.
    #[arg(long)]
    symbols: Option<usize>,
    /// Kraus operators per symbol.
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    proposals: Option<usize>,
    #[arg(long)]
    filter_count: Option<usize>,
    /// Start each proposal from the previous one instead of the shared base.
    #[arg(long)]
    chain_proposals: bool,
    /// EM restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Seed for training only (data seed stays `--seed`).
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainCmd {
    /// Training sequences (CSV).
    #[arg(long)]
    train: PathBuf,
    /// Validation sequences (CSV).
    #[arg(long)]
    val: PathBuf,
    /// Model whose initial state and dimensions the learner adopts.
    #[arg(long)]
    model: Option<String>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Benchmark name or model JSON file.
    #[arg(long)]
    model: String,
    /// Sequences (CSV).
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct Prop1Args {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Args, Debug)]
struct PresetArgs {
    /// Preset name, e.g. s2018-corrupt-rila-b4.
    name: Option<String>,
    /// Print every preset name.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    flags: TrainFlags,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Shape(_) | Error::Index(_) | Error::Config(_) | Error::Parse(_) => EXIT_USAGE,
        Error::Validation(_) | Error::ZeroProbability => EXIT_VALIDATION,
        Error::Io(_) => EXIT_IO,
    }
}

fn base_settings(cli: &Cli, preset: Option<Settings>) -> Result<Settings> {
    let mut s = preset.unwrap_or_default();
    if let Some(path) = &cli.config {
        s.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(out) = &cli.out {
        s.out = out.clone();
    }
    Ok(s)
}

fn apply_flags(s: &mut Settings, f: &TrainFlags) -> Result<()> {
    if let Some(t) = &f.trainer {
        s.trainer = TrainerKind::parse(t)?;
    }
    if let Some(o) = &f.objective {
        s.use_l1 = parse_objective(o)?;
    }
    if let Some(l) = f.lambda {
        s.lambda = l;
    }
    if let Some(k) = &f.solver {
        s.train.solver.kind = parse_solver(k)?;
    }
    if let Some(r) = &f.resample {
        s.train.resample = parse_resample(r)?;
    }
    if f.keep_high_s {
        s.train.filter = FilterOptions { keep_high_s: true };
    }
    if f.chain_proposals {
        s.train.chain_proposals = true;
    }
    s.states = f.states.or(s.states);
    s.symbols = f.symbols.or(s.symbols);
    s.copies = f.copies.unwrap_or(s.copies);
    s.train.batches = f.batches.unwrap_or(s.train.batches);
    s.train.batch_size = f.batch_size.unwrap_or(s.train.batch_size);
    s.train.iterations = f.iterations.unwrap_or(s.train.iterations);
    s.train.proposals = f.proposals.unwrap_or(s.train.proposals);
    s.train.filter_count = f.filter_count.unwrap_or(s.train.filter_count);
    s.em_restarts = f.restarts.unwrap_or(s.em_restarts);
    s.train_seed = f.train_seed.or(s.train_seed);
    Ok(())
}

fn ll_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("-inf")
    }
}

/// Generates `n_train + n_val` rows and splits them in order.
fn make_data(model: &ModelSpec, s: &Settings) -> Result<(ObsMatrix, ObsMatrix)> {
    let all = generate(model, s.n_train + s.n_val, s.t, s.seed)?;
    let train = all.select_rows(&(0..s.n_train).collect::<Vec<_>>());
    let val = all.select_rows(&(s.n_train..s.n_train + s.n_val).collect::<Vec<_>>());
    Ok((train, val))
}

/// Trains according to `s` and writes the bundle to `s.out`.
fn train_and_write(
    s: &Settings,
    train: &ObsMatrix,
    val: &ObsMatrix,
    reference: Option<&ModelSpec>,
    mut extra: serde_json::Map<String, Value>,
) -> Result<RunRecord> {
    let n = s.states.or(reference.map(ModelSpec::n)).ok_or_else(|| {
        Error::Config("--states is required when no reference model is given".into())
    })?;
    let observed = train.max_symbol().max(val.max_symbol()).unwrap_or(1) as usize;
    let m = s.symbols.or(reference.map(ModelSpec::m)).unwrap_or(observed);
    train.check_alphabet(m)?;
    val.check_alphabet(m)?;
    if let Some(r) = reference {
        extra.insert("reference_model".into(), json!(r.name()));
        extra.insert("reference_validation_ll".into(), ll_json(r.batch_loglik(val)?));
    }
    extra.insert("states".into(), json!(n));
    extra.insert("symbols".into(), json!(m));

    if s.trainer == TrainerKind::Em {
        let cfg = s.em_config();
        let rec = train_em(train, val, n, m, &cfg)?;
        let hmm = rec.hmm.as_ref().expect("EM returns its HMM");
        let rho0 = rila::learn::em_rho0(hmm);
        bundle::write_bundle(&s.out, &rec, &rho0, None, None, Value::Object(extra))?;
        return Ok(rec);
    }

    let rho0 = match reference {
        Some(r) if r.n() == n => r.rho0(),
        _ => DensityMatrix::basis(n, 0),
    };
    let cfg = s.train_config();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let kappa0 = random_kraus(n, m, s.copies, &mut rng);
    extra.insert("copies".into(), json!(s.copies));
    match s.trainer {
        TrainerKind::Rila => {
            let (rec, stats, trace) = train_rila(train, val, &kappa0, &rho0, &cfg)?;
            extra.insert("filtered_rows".into(), json!(stats.removed()));
            bundle::write_bundle(&s.out, &rec, &rho0, Some(&stats), Some(&trace), Value::Object(extra))?;
            Ok(rec)
        }
        TrainerKind::Ila => {
            let rec = train_ila(train, val, &kappa0, &rho0, &cfg)?;
            bundle::write_bundle(&s.out, &rec, &rho0, None, None, Value::Object(extra))?;
            Ok(rec)
        }
        TrainerKind::Em => unreachable!("handled above"),
    }
}

fn report(rec: &RunRecord, out: &Path) {
    println!(
        "{}: validation LL {} ({} per obs), train LL {}; bundle in {}",
        rec.trainer.name(),
        ll_json(rec.best_validation_ll),
        ll_json(rec.val_ll_per_obs()),
        ll_json(rec.train_ll_final),
        out.display()
    );
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let mut s = base_settings(cli, None)?;
    if let Some(m) = &a.model {
        s.model = m.clone();
    }
    s.n_train = a.n.unwrap_or(s.n_train);
    s.n_val = a.n_val.unwrap_or(s.n_val);
    s.t = a.t.unwrap_or(s.t);
    let model = bundle::resolve_model(&s.model)?;
    let (train, val) = make_data(&model, &s)?;
    std::fs::create_dir_all(&s.out)?;
    train.save(s.out.join("train.csv"))?;
    val.save(s.out.join("val.csv"))?;
    bundle::save_model(&model, &s.out.join("model.json"))?;
    println!(
        "wrote {}x{} train and {}x{} validation sequences from {} to {}",
        train.n_seq(),
        train.len(),
        val.n_seq(),
        val.len(),
        model.name(),
        s.out.display()
    );
    Ok(())
}

fn cmd_corrupt(cli: &Cli, a: &CorruptArgs) -> Result<()> {
    let mut s = base_settings(cli, None)?;
    s.gamma = a.gamma.unwrap_or(s.gamma);
    s.corrupt_symbol = a.symbol.unwrap_or(s.corrupt_symbol);
    let y = ObsMatrix::load(&a.input)?;
    let policy = CorruptionPolicy::constant(s.gamma, s.corrupt_symbol, s.seed);
    let rows = policy.rows(y.n_seq())?;
    let out = corrupt(&y, &policy)?;
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("corrupted.csv"));
    out.save(&path)?;
    println!("corrupted rows {:?}; wrote {}", rows, path.display());
    Ok(())
}

fn cmd_filter(cli: &Cli, a: &FilterArgs) -> Result<()> {
    let s = base_settings(cli, None)?;
    let y = ObsMatrix::load(&a.input)?;
    if a.count >= y.n_seq() && a.count > 0 {
        return Err(Error::Config(format!("cannot filter {} of {} rows", a.count, y.n_seq())));
    }
    let (kept, stats) = rcr_ef(&y, a.count, FilterOptions { keep_high_s: a.keep_high_s });
    std::fs::create_dir_all(&s.out)?;
    kept.save(s.out.join("filtered.csv"))?;
    std::fs::write(s.out.join("filter_report.csv"), stats.to_csv())?;
    if stats.passthrough {
        warn!("filter count {} leaves the data unchanged", a.count);
    }
    println!("removed rows {:?}; wrote {}", stats.removed(), s.out.display());
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainCmd) -> Result<()> {
    let mut s = base_settings(cli, None)?;
    apply_flags(&mut s, &a.flags)?;
    let train = ObsMatrix::load(&a.train)?;
    let val = ObsMatrix::load(&a.val)?;
    let reference = a.model.as_deref().map(bundle::resolve_model).transpose()?;
    let mut extra = serde_json::Map::new();
    extra.insert("train_file".into(), json!(a.train.display().to_string()));
    let rec = train_and_write(&s, &train, &val, reference.as_ref(), extra)?;
    report(&rec, &s.out);
    Ok(())
}

/// Returns `Ok(false)` when the data has zero probability under the model.
fn cmd_eval(a: &EvalArgs) -> Result<bool> {
    let model = bundle::resolve_model(&a.model)?;
    let y = ObsMatrix::load(&a.data)?;
    y.check_alphabet(model.m())?;
    let ll = model.batch_loglik(&y)?;
    let per_obs = if y.n_obs() > 0 { ll / y.n_obs() as f64 } else { 0.0 };
    let doc = json!({
        "model": model.name(),
        "sequences": y.n_seq(),
        "observations": y.n_obs(),
        "ll_sum": ll_json(ll),
        "ll_per_obs": ll_json(per_obs),
        "zero_probability": ll == f64::NEG_INFINITY,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json values serialize"));
    Ok(ll != f64::NEG_INFINITY)
}

fn cmd_prop1(cli: &Cli, a: &Prop1Args) -> Result<bool> {
    let s = base_settings(cli, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let rep = prop1_sweep(a.trials, &mut rng);
    let ok = rep.passes(PROP1_TOL, PROP1_TOL);
    let doc = json!({
        "trials": rep.trials,
        "zero_probability": rep.zero_probability,
        "max_diag_deviation": rep.max_diag_deviation,
        "max_trace_deviation": rep.max_trace_deviation,
        "tolerance": PROP1_TOL,
        "pass": ok,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json values serialize"));
    Ok(ok)
}

fn cmd_preset(cli: &Cli, a: &PresetArgs) -> Result<()> {
    if a.list {
        for n in presets::all_names() {
            println!("{n}");
        }
        return Ok(());
    }
    let name = a
        .name
        .as_deref()
        .ok_or_else(|| Error::Config("preset name required (or --list)".into()))?;
    let mut s = base_settings(cli, Some(presets::preset(name)?))?;
    if cli.out.is_none() {
        s.out = PathBuf::from(name);
    }
    apply_flags(&mut s, &a.flags)?;
    let model = bundle::resolve_model(&s.model)?;
    let (clean, val) = make_data(&model, &s)?;
    let train = if s.gamma > 0.0 {
        corrupt(&clean, &CorruptionPolicy::constant(s.gamma, s.corrupt_symbol, s.seed))?
    } else {
        clean
    };
    let data_dir = s.out.join("data");
    std::fs::create_dir_all(&data_dir)?;
    train.save(data_dir.join("train.csv"))?;
    val.save(data_dir.join("val.csv"))?;
    bundle::save_model(&model, &data_dir.join("model.json"))?;
    info!("preset {name}: {} train rows, gamma {}", train.n_seq(), s.gamma);
    let mut extra = serde_json::Map::new();
    extra.insert("preset".into(), json!(name));
    extra.insert("data_seed".into(), json!(s.seed));
    extra.insert("gamma".into(), json!(s.gamma));
    let rec = train_and_write(&s, &train, &val, Some(&model), extra)?;
    report(&rec, &s.out);
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.cmd {
        Command::Generate(a) => cmd_generate(cli, a).map(|_| true),
        Command::Corrupt(a) => cmd_corrupt(cli, a).map(|_| true),
        Command::Filter(a) => cmd_filter(cli, a).map(|_| true),
        Command::Train(a) => cmd_train(cli, a).map(|_| true),
        Command::Eval(a) => match cmd_eval(a)? {
            true => Ok(true),
            false => Err(Error::ZeroProbability),
        },
        Command::Prop1(a) => cmd_prop1(cli, a),
        Command::Preset(a) => cmd_preset(cli, a).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_THRESHOLD),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
