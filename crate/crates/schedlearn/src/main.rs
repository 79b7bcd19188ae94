//! Command-line harness around the library pipeline. Each subcommand runs
//! one stage against the shared output directory so a full experiment can
//! be driven step by step or end to end with `run`.
//!
//! Exit codes: 0 success, 1 usage error, 2 stage failure.

use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand, ValueEnum};

use schedlearn::datagen::DatasetMode;
use schedlearn::pipeline::{
    evaluate_mode, generate_family_files, generate_mode_dataset, load_mode_dataset,
    load_mode_model, read_family_dir, run_experiment, train_on_dataset, ExperimentConfig,
    StageError,
};
use schedlearn::pwl::{
    approximation_bound, lipschitz_capacity, random_admissible_pair, relu_capacity,
};

#[derive(Parser)]
#[command(
    name = "schedlearn",
    version,
    about = "Generate, learn from, and report on job-shop scheduling dataset designs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a single config key (repeatable); wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; wins over the config file and SCHEDLEARN_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Standard,
    Od,
}

impl From<ModeArg> for DatasetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Standard => DatasetMode::Standard,
            ModeArg::Od => DatasetMode::Od,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the slowdown family to <out>/family/.
    GenFamily(CommonArgs),
    /// Solve the family and write <out>/<mode>.jsonl.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Worker threads for parallel solving (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train a surrogate on <out>/<mode>.jsonl and write the checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: ModeArg,
    },
    /// Evaluate the trained checkpoint on the held-out entries.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Worker threads for parallel evaluation (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Exercise the capacity formulas and the approximation bound.
    TheoryCheck {
        /// Number of random target/approximant pairs to check.
        #[arg(long, default_value_t = 1000)]
        pairs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Most pieces a random target may have.
        #[arg(long, default_value_t = 8)]
        max_pieces: usize,
    },
    /// Full pipeline: family, both datasets, both models, report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for the parallel stages (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, StageError> {
    let mut cfg = match &common.config {
        Some(path) => stage_cfg(ExperimentConfig::from_file(path))?,
        None => ExperimentConfig::default(),
    };
    for pair in &common.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| StageError {
            stage: "config",
            source: format!("--set needs KEY=VALUE, got `{pair}`").into(),
        })?;
        stage_cfg(cfg.apply(key.trim(), value.trim()))?;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    stage_cfg(cfg.validate())?;
    Ok(cfg)
}

fn stage_cfg<T>(r: Result<T, schedlearn::pipeline::ConfigError>) -> Result<T, StageError> {
    r.map_err(|e| StageError { stage: "config", source: Box::new(e) })
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(f),
        _ => f(),
    }
}

fn mode_name(mode: DatasetMode) -> &'static str {
    match mode {
        DatasetMode::Standard => "standard",
        DatasetMode::Od => "od",
    }
}

fn real_main(cli: Cli) -> Result<(), StageError> {
    match cli.cmd {
        Cmd::GenFamily(common) => {
            let cfg = load_config(&common)?;
            let family = generate_family_files(&cfg)?;
            println!("wrote {} instances to {}", family.len(), cfg.out.join("family").display());
        }
        Cmd::GenData { common, mode, workers } => {
            let cfg = load_config(&common)?;
            let mode = DatasetMode::from(mode);
            let family = read_family_dir(&cfg.out.join("family"))?;
            let (ds, secs) =
                with_workers(workers, || generate_mode_dataset(&cfg, mode, &family))?;
            println!(
                "wrote {} entries to {} in {:.2}s",
                ds.len(),
                cfg.out.join(format!("{}.jsonl", mode_name(mode))).display(),
                secs
            );
        }
        Cmd::Train { common, mode } => {
            let cfg = load_config(&common)?;
            let mode = DatasetMode::from(mode);
            let ds = load_mode_dataset(&cfg, mode)?;
            let (_, _, history, secs) = train_on_dataset(&cfg, mode, &ds)?;
            let last = history.epochs.last();
            println!(
                "trained {} for {} epochs in {:.2}s (final loss {})",
                mode_name(mode),
                history.epochs.len(),
                secs,
                last.map_or("n/a".into(), |e| format!("{:.6}", e.loss)),
            );
        }
        Cmd::Evaluate { common, mode, workers } => {
            let cfg = load_config(&common)?;
            let mode = DatasetMode::from(mode);
            let ds = load_mode_dataset(&cfg, mode)?;
            let model = load_mode_model(&cfg, mode)?;
            let metrics = with_workers(workers, || evaluate_mode(&cfg, mode, &model, &ds))?;
            println!(
                "{}: prediction error {:.2}%, constraint violation {:.2}%, optimality gap {:.2}%",
                mode_name(mode),
                metrics.prediction_error,
                metrics.constraint_violation,
                metrics.optimality_gap
            );
        }
        Cmd::TheoryCheck { pairs, seed, max_pieces } => theory_check(pairs, seed, max_pieces)?,
        Cmd::Run { common, workers } => {
            let cfg = load_config(&common)?;
            let report = with_workers(workers, || run_experiment(&cfg))?;
            println!(
                "{:<10} {:>14} {:>12} {:>8} {:>8} {:>8}",
                "mode", "total_var", "lipschitz", "pred%", "viol%", "gap%"
            );
            for row in &report.rows {
                println!(
                    "{:<10} {:>14.1} {:>12} {:>8.2} {:>8.2} {:>8.2}",
                    mode_name(row.mode),
                    row.total_variation,
                    row.lipschitz.map_or("n/a".into(), |c| format!("{c:.4}")),
                    row.prediction_error,
                    row.constraint_violation,
                    row.optimality_gap
                );
            }
            println!("artifacts in {}", cfg.out.display());
        }
    }
    Ok(())
}

fn theory_check(pairs: u64, seed: u64, max_pieces: usize) -> Result<(), StageError> {
    let fail = |msg: String| StageError { stage: "theory-check", source: msg.into() };

    let mut violations = 0;
    for i in 0..pairs {
        let (f, g) = random_admissible_pair(max_pieces, seed.wrapping_add(i));
        let (bound, actual) =
            approximation_bound(&f, &g).map_err(|e| fail(format!("pair {i}: {e}")))?;
        if actual > bound {
            violations += 1;
            eprintln!("pair {i}: actual {actual} exceeds bound {bound}");
        }
    }
    println!("approximation bound: {pairs} random pairs, {violations} violations");

    let f = schedlearn::pwl::PwlFunction::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 1.0]).unwrap();
    let g = schedlearn::pwl::PwlFunction::new(vec![0.0, 2.0], vec![0.0, 0.0]).unwrap();
    let (bound, actual) = approximation_bound(&f, &g).map_err(|e| fail(e.to_string()))?;
    println!("tightness witness: bound {bound}, actual {actual}");

    let (min_size, max_pieces_fn) = relu_capacity(4, 1);
    println!(
        "relu capacity: 4 pieces at depth 2 need size >= {min_size}; size 4 gives at most {} pieces",
        max_pieces_fn(4.0)
    );
    let n = lipschitz_capacity(2, 2.0, 1.0).map_err(|e| fail(e.to_string()))?;
    println!("lipschitz capacity: n=2, L=2, eps=1 -> single-layer size {n}");

    if violations > 0 {
        return Err(fail(format!("{violations} bound violations")));
    }
    if actual != bound {
        return Err(fail(format!("tightness witness not tight: {actual} != {bound}")));
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    if let Err(e) = real_main(cli) {
        eprintln!("error: {e}");
        // the stage error's display already includes its immediate cause
        let mut source = std::error::Error::source(&e).and_then(|s| s.source());
        while let Some(s) = source {
            eprintln!("  caused by: {s}");
            source = s.source();
        }
        exit(2);
    }
}
