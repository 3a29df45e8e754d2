//! `peckfit`: fit, compare and inspect prototype/exemplar models of 2AFC
//! behavior.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 a fit that
//! diverged (non-finite loss).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use peckfit::data::{
    assign_folds, load_catalog, load_features, load_trials, read_trials, Stimuli, StimulusCatalog, TrialTable,
    DEFAULT_FOLDS,
};
use peckfit::eval::{compare_models, condition_summaries, noise_ceiling, scatter_svg, DEFAULT_REPEATS};
use peckfit::fit::{
    cross_validate, FitConfig, Objective, DEFAULT_BATCH_SIZE, DEFAULT_CLAMP_EPS, DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_EPOCHS,
};
use peckfit::{Aggregation, Execution, FitReport, ModelKind};

#[derive(Parser)]
#[command(name = "peckfit", version, about = "Prototype and exemplar models of two-alternative forced-choice behavior")]
struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, env = "PECKFIT_THREADS", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate one model on one feature set and write fit_report.json.
    Fit(FitArgs),
    /// Compare fit reports: comparison.csv, comparison.txt and one SVG per report.
    Eval(EvalArgs),
    /// Per-trial and per-condition predictions from a fit report.
    Predict(PredictArgs),
    /// Split-half noise ceiling of the behavioral data.
    NoiseCeiling(CeilingArgs),
    /// Print a fit report summary, optionally with its scatter plot.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Stimulus catalog (JSON).
    #[arg(long)]
    catalog: PathBuf,
    /// Feature file (CSV or binary).
    #[arg(long)]
    features: PathBuf,
    /// Trial table (CSV).
    #[arg(long)]
    trials: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// prototype or exemplar.
    #[arg(long, default_value = "exemplar")]
    model: ModelKind,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Seed for fold assignment and minibatch order (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Cross-validation folds over test conditions.
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    lr: f64,
    /// Minibatch size in trials.
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    /// Training epochs; the epoch with the lowest held-out NLL is kept.
    #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
    max_epochs: usize,
    /// Predicted probabilities are clamped to [eps, 1 - eps].
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    clamp_eps: f64,
    /// sim_mean or prob_mean.
    #[arg(long, default_value = "sim_mean")]
    aggregation: Aggregation,
    /// L2 penalty on the log attention weights.
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Name for this feature set in comparison tables [default: feature file stem].
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Fit report; repeat for several.
    #[arg(long = "report", required = true)]
    reports: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Trial table the reports were fit to; checked against them and used
    /// for the noise ceiling column.
    #[arg(long)]
    trials: Option<PathBuf>,
    /// Seed for the noise ceiling (needed with --trials).
    #[arg(long)]
    seed: Option<u64>,
    /// Split-half repeats for the noise ceiling.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Fit report whose parameters to use.
    #[arg(long)]
    report: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Predict every trial with this fold's parameters.
    #[arg(long, conflicts_with = "pooled", required_unless_present = "pooled")]
    fold: Option<usize>,
    /// Predict each trial with the fold that held its condition out.
    #[arg(long)]
    pooled: bool,
}

#[derive(Args)]
struct CeilingArgs {
    /// Trial table (CSV).
    #[arg(long)]
    trials: PathBuf,
    /// Validate the trial table against this catalog.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Seed for the random splits (required).
    #[arg(long)]
    seed: Option<u64>,
    /// Random split-half repeats to average.
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Directory for noise_ceiling.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Fit report (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Directory for the predicted-vs-observed scatter plot.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let runtime = e
                .chain()
                .any(|c| c.downcast_ref::<peckfit::Error>().is_some_and(peckfit::Error::is_runtime));
            ExitCode::from(if runtime { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let execution = setup_threads(cli.threads)?;
    match cli.command {
        Command::Fit(args) => fit(args, execution),
        Command::Eval(args) => eval(args, execution),
        Command::Predict(args) => predict(args),
        Command::NoiseCeiling(args) => ceiling(args, execution),
        Command::Report(args) => report(args),
    }
}

fn setup_threads(threads: usize) -> Result<Execution> {
    if threads == 0 {
        bail!("--threads must be at least 1");
    }
    if threads == 1 {
        return Ok(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("starting thread pool")?;
        Ok(Execution::Parallel)
    }
    #[cfg(not(feature = "parallel"))]
    {
        log::warn!("built without parallel support; ignoring --threads {threads}");
        Ok(Execution::Sequential)
    }
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("seed required for reproducibility (pass --seed)"))
}

fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            bail!("input file not found: {}", p.display());
        }
    }
    Ok(())
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

struct Loaded {
    catalog: StimulusCatalog,
    features: peckfit::data::FeatureStore,
    trials: TrialTable,
}

fn load_data(data: &DataArgs) -> Result<Loaded> {
    require_files([data.catalog.as_path(), data.features.as_path(), data.trials.as_path()])?;
    let catalog = load_catalog(&data.catalog)?;
    let features = load_features(&data.features, &catalog)?;
    let trials = load_trials(&data.trials, &catalog)?;
    Ok(Loaded {
        catalog,
        features,
        trials,
    })
}

fn fit(args: FitArgs, execution: Execution) -> Result<()> {
    let seed = require_seed(args.seed)?;
    let cfg = FitConfig {
        model_kind: args.model,
        learning_rate: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.max_epochs,
        clamp_eps: args.clamp_eps,
        seed,
        aggregation: args.aggregation,
        l2_penalty: args.l2,
        execution,
        ..FitConfig::default()
    };
    cfg.validate()?;
    let data = load_data(&args.data)?;
    if data.trials.is_empty() {
        bail!("trial table {} has no trials", args.data.trials.display());
    }
    create_out(&args.out)?;

    let folds = assign_folds(data.trials.conditions(), args.folds, seed)?;
    let stimuli = Stimuli::new(&data.catalog, &data.features);
    let outcome = cross_validate(&data.trials, &folds, &stimuli, &cfg)?;
    let label = args.label.unwrap_or_else(|| {
        args.data
            .features
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "features".into())
    });
    let report = FitReport::new(label, &cfg, &folds, &data.trials, &outcome);
    let path = args.out.join("fit_report.json");
    report.save(&path)?;
    println!(
        "{} {}: cv nll {:.3}, r {:.3}{} -> {}",
        report.features_label,
        report.config.model_kind,
        report.summary.mean_heldout_nll,
        report.summary.pearson_r,
        if report.summary.zero_variance { " (zero variance)" } else { "" },
        path.display()
    );
    Ok(())
}

fn load_reports(paths: &[PathBuf]) -> Result<Vec<FitReport>> {
    require_files(paths.iter().map(PathBuf::as_path))?;
    paths.iter().map(|p| Ok(FitReport::load(p)?)).collect()
}

/// File-name-safe rendering of a label.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn eval(args: EvalArgs, execution: Execution) -> Result<()> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let reports = load_reports(&args.reports)?;
    let trials = match &args.trials {
        Some(path) => {
            require_files([path.as_path()])?;
            Some(read_trials(path)?)
        }
        None => None,
    };
    let ceiling = match &trials {
        Some(t) => Some(noise_ceiling(t, args.repeats, require_seed(args.seed)?, execution)?.mean_corrected_r),
        None => None,
    };
    let table = compare_models(&reports, trials.as_ref(), ceiling)?;
    create_out(&args.out)?;
    write(&args.out.join("comparison.csv"), table.to_csv())?;
    let text = table.to_text();
    write(&args.out.join("comparison.txt"), &text)?;
    for r in &reports {
        let name = format!("{}_{}", r.features_label, r.config.model_kind);
        let title = format!("{} / {}", r.features_label, r.config.model_kind);
        write(
            &args.out.join(format!("{}.svg", slug(&name))),
            scatter_svg(&title, &r.summary.conditions),
        )?;
    }
    print!("{text}");
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    require_files([args.report.as_path()])?;
    let report = FitReport::load(&args.report)?;
    if let Some(k) = args.fold {
        report.fold(k)?;
    }
    let data = load_data(&args.data)?;
    if data.trials.digest() != report.trials_digest {
        log::warn!("trial table differs from the one the report was fit to");
    }
    let stimuli = Stimuli::new(&data.catalog, &data.features);
    let cfg = &report.config;
    let objective = Objective::new(&stimuli, cfg.model_kind, cfg.aggregation, cfg.clamp_eps, Execution::Sequential)?;

    // Which fold's parameters predict each trial.
    let mut fold_of = Vec::with_capacity(data.trials.len());
    for t in data.trials.records() {
        let f = match args.fold {
            Some(k) => k,
            None => report
                .folds
                .fold_of(&t.condition_id)
                .ok_or_else(|| anyhow!("condition '{}' is not in the report's folds", t.condition_id))?,
        };
        fold_of.push(f);
    }
    let mut probs = vec![f64::NAN; data.trials.len()];
    let mut by_fold: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &f) in fold_of.iter().enumerate() {
        by_fold.entry(f).or_default().push(i);
    }
    for (f, idx) in &by_fold {
        let params = &report.fold(*f)?.raw_params;
        let subset: Vec<_> = idx.iter().map(|&i| data.trials.records()[i].clone()).collect();
        let p = objective.probabilities(params, &objective.compile(&subset)?)?;
        for (&i, p) in idx.iter().zip(p) {
            probs[i] = p;
        }
    }

    create_out(&args.out)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "subject_id",
        "imprint_animation_id",
        "condition_id",
        "familiar_animation_id",
        "novel_animation_id",
        "correct",
        "fold",
        "p_correct",
    ])?;
    for ((t, f), p) in data.trials.records().iter().zip(&fold_of).zip(&probs) {
        w.write_record([
            t.subject_id.as_str(),
            &t.imprint_animation_id,
            &t.condition_id,
            &t.familiar_animation_id,
            &t.novel_animation_id,
            if t.correct { "1" } else { "0" },
            &f.to_string(),
            &p.to_string(),
        ])?;
    }
    write(&args.out.join("predictions.csv"), w.into_inner()?)?;

    let summaries = condition_summaries(data.trials.records(), &probs)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["condition_id", "n_trials", "observed_accuracy", "predicted_accuracy"])?;
    for c in &summaries {
        w.write_record([
            c.condition_id.clone(),
            c.n_trials.to_string(),
            format!("{:.3}", c.observed_accuracy),
            format!("{:.3}", c.predicted_accuracy),
        ])?;
    }
    write(&args.out.join("condition_summaries.csv"), w.into_inner()?)?;
    println!(
        "{} trials, {} conditions -> {}",
        probs.len(),
        summaries.len(),
        args.out.display()
    );
    Ok(())
}

fn ceiling(args: CeilingArgs, execution: Execution) -> Result<()> {
    let seed = require_seed(args.seed)?;
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    require_files([args.trials.as_path()])?;
    let trials = match &args.catalog {
        Some(c) => {
            require_files([c.as_path()])?;
            load_trials(&args.trials, &load_catalog(c)?)?
        }
        None => read_trials(&args.trials)?,
    };
    let est = noise_ceiling(&trials, args.repeats, seed, execution)?;
    if est.zero_variance_repeats > 0 {
        log::warn!(
            "{} of {} repeats had a constant half profile",
            est.zero_variance_repeats,
            est.repeats
        );
    }
    if let Some(out) = &args.out {
        create_out(out)?;
        let json = serde_json::to_string_pretty(&est)? + "\n";
        write(&out.join("noise_ceiling.json"), json)?;
    }
    println!("{:.3}", est.mean_corrected_r);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    require_files([args.report.as_path()])?;
    let report = FitReport::load(&args.report)?;
    print!("{}", report.to_text());
    if let Some(out) = &args.out {
        create_out(out)?;
        let name = format!("{}_{}", report.features_label, report.config.model_kind);
        let title = format!("{} / {}", report.features_label, report.config.model_kind);
        write(
            &out.join(format!("{}.svg", slug(&name))),
            scatter_svg(&title, &report.summary.conditions),
        )?;
    }
    Ok(())
}
