use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nail::config::{default_grid, DataSource, ExperimentConfig, SyntheticConfig, VariantName};
use nail::harness::load_data;
use nail::single::{fit_dataset, score_predictions, write_fit};
use nail::{emit_report, io, run_experiment, NailError, Result};
use nail_core::{synthesize, SolverConfig};

/// Incomplete multi-view weak-label learning.
#[derive(Parser, Debug)]
#[command(name = "nail", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mask a dataset once, fit one model and write its predictions.
    Fit(FitArgs),
    /// Run the repeated grid-search protocol and write report files.
    Sweep(SweepArgs),
    /// Write a synthetic dataset in manifest format.
    Synth(SynthArgs),
    /// Score stored predictions against held-out truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "synthetic")]
    manifest: Option<PathBuf>,
    /// JSON synthetic dataset spec.
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Keep only this many randomly chosen rows.
    #[arg(long)]
    subsample: Option<usize>,
    /// Fraction of rows removed from each view.
    #[arg(long)]
    mask_r: Option<f64>,
    /// Fraction of labels hidden per class and column.
    #[arg(long)]
    mask_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Keep the label weights nonnegative.
    #[arg(long)]
    strict_paper: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    variant: Option<VariantName>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    rk: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated variant names.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<VariantName>,
    /// Comma-separated λ grid.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    rk: Vec<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Worker threads (0 uses every core).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    mask_r: f64,
    #[arg(long, default_value_t = 0.0)]
    mask_s: f64,
    /// Overrides the spec's seed; also seeds the masks.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Ground truth, `NaN` outside the evaluated entries.
    #[arg(long)]
    truth: PathBuf,
    /// Predicted probabilities.
    #[arg(long)]
    scores: PathBuf,
    /// Hard predictions; thresholded scores when absent.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

fn read_synthetic(path: &PathBuf) -> Result<SyntheticConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| NailError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| NailError::Config(format!("{}: {e}", path.display())))
}

fn base_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &c.manifest {
        cfg.data = DataSource::Manifest(m.clone());
    }
    if let Some(s) = &c.synthetic {
        cfg.data = DataSource::Synthetic(read_synthetic(s)?);
    }
    if c.subsample.is_some() {
        cfg.subsample = c.subsample;
    }
    if let Some(r) = c.mask_r {
        cfg.mask.r = r;
    }
    if let Some(s) = c.mask_s {
        cfg.mask.s = s;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(n) = c.max_outer {
        cfg.solver.max_outer = n;
    }
    if let Some(t) = c.tol {
        cfg.solver.tol = t;
    }
    if c.strict_paper {
        cfg.solver.strict_paper = true;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

/// A flag, else a one-entry grid, else the solver default when the grid
/// was left at its default.
fn single_value(name: &str, flag: Option<f64>, grid: &[f64], default_grid: &[f64], fallback: f64) -> Result<f64> {
    match (flag, grid) {
        (Some(x), _) => Ok(x),
        (None, [x]) => Ok(*x),
        (None, g) if g == default_grid => Ok(fallback),
        _ => Err(NailError::Config(format!("fit needs a single {name}; pass --{name}"))),
    }
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    let defaults = SolverConfig::default();
    let lambda = single_value("lambda", args.lambda, &cfg.lambda_grid, &default_grid(), defaults.lambda)?;
    let mu = single_value("mu", args.mu, &cfg.mu_grid, &default_grid(), defaults.mu)?;
    let rk = single_value("rk", args.rk, &cfg.rk_grid, &[0.2, 0.5, 0.8], defaults.latent_ratio)?;
    let variant = match (args.variant, cfg.variants.as_slice()) {
        (Some(v), _) => v,
        (None, [v]) => *v,
        _ => return Err(NailError::Config("fit needs a single variant; pass --variant".into())),
    };
    cfg.lambda_grid = vec![lambda];
    cfg.mu_grid = vec![mu];
    cfg.rk_grid = vec![rk];
    cfg.variants = vec![variant];
    cfg.validate()?;
    let ds = load_data(&cfg)?;
    let mask = cfg.mask.spec(cfg.seed);
    let ds = ds.apply_feature_mask(&mask)?.apply_label_mask(&mask)?;
    let solver = cfg.solver.solver_config(variant.0, lambda, mu, rk, cfg.seed);
    let result = fit_dataset(ds, &solver, cfg.solver.threshold)?;
    write_fit(&result, &cfg.out)?;
    let show = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{} iterations={} converged={} hs={} ap={} out={}",
        variant,
        result.trace.iterations,
        result.trace.converged,
        show(result.hs),
        show(result.ap),
        cfg.out.display()
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if !args.variant.is_empty() {
        cfg.variants = args.variant;
    }
    if !args.lambda.is_empty() {
        cfg.lambda_grid = args.lambda;
    }
    if !args.mu.is_empty() {
        cfg.mu_grid = args.mu;
    }
    if !args.rk.is_empty() {
        cfg.rk_grid = args.rk;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let report = run_experiment(&cfg)?;
    emit_report(&report, &cfg.out)?;
    let failed = report.runs.iter().filter(|r| r.status != nail::RunStatus::Ok).count();
    println!("{} runs ({failed} not ok) written to {}", report.runs.len(), cfg.out.display());
    for &b in &report.best {
        let s = &report.summary[b];
        println!(
            "best {}: lambda={} mu={} rk={} val_ap={:.4} hs={:.4}±{:.4} ap={:.4}±{:.4}",
            s.cell.variant.name(),
            s.cell.lambda,
            s.cell.mu,
            s.cell.rk,
            s.val_ap_mean,
            s.hs_mean,
            s.hs_std,
            s.ap_mean,
            s.ap_std
        );
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.synthetic {
        Some(path) => read_synthetic(path)?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let spec = spec.to_spec();
    spec.validate().map_err(|e| NailError::Config(e.to_string()))?;
    let (ds, _) = synthesize(&spec)?;
    let mask = nail_core::MaskSpec { feature_removal_rate: args.mask_r, label_removal_rate: args.mask_s, seed: spec.seed };
    mask.validate().map_err(|e| NailError::Config(e.to_string()))?;
    let ds = ds.apply_feature_mask(&mask)?.apply_label_mask(&mask)?;
    let manifest = io::write_dataset(&ds, &args.out)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let truth = io::read_matrix(&args.truth)?;
    let scores = io::read_matrix(&args.scores)?;
    let labels = args.predictions.as_deref().map(io::read_matrix).transpose()?;
    let (hs, ap) = score_predictions(&truth, &scores, labels.as_ref(), args.threshold)?;
    println!("hs={hs} ap={ap}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Synth(a) => run_synth(a),
        Command::Eval(a) => run_eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
