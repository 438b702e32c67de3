//! `convwatt`: batch front end for feature extraction, power-trace energy
//! accounting, model training, feature-selection studies, evaluation and
//! report generation.
//!
//! Exit statuses: 0 success, 1 validation or usage error, 2 I/O error.
//! Diagnostics go to stderr; data goes to stdout or `--out` files, written
//! atomically (temp file + rename). Identical inputs and seed produce
//! byte-identical data outputs.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convwatt_core::Error;

pub const SEED_ENV: &str = "CONVWATT_SEED";

#[derive(Parser)]
#[command(name = "convwatt", version, about = "ConvNet inference energy accounting and prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit per-layer cost features and per-kind aggregate totals as CSV.
    Features {
        /// Network spec file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Polynomial degree of the per-layer features (1 or 2).
        #[arg(long, default_value_t = 1)]
        degree: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a power trace over annotated layer windows (or one window).
    Integrate {
        /// Power trace CSV (`timestamp_us,power_mw`).
        #[arg(long)]
        trace: PathBuf,
        /// Annotation CSV (`layer_name,layer_kind,begin_us,end_us,run_id`).
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Window start in microseconds (used without --annotations).
        #[arg(long)]
        begin: Option<f64>,
        /// Window end in microseconds (used without --annotations).
        #[arg(long)]
        end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer-kind energy and time shares for an annotated trace.
    Breakdown {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train per-layer-type energy models and write a model bundle.
    Train {
        /// Energy dataset CSV.
        #[arg(long)]
        dataset: PathBuf,
        /// Hardware-software combination label recorded in the bundle.
        #[arg(long)]
        provenance: String,
        /// Comma-separated kinds to train (default: every kind present).
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Bundle output path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict per-kind and total inference energy for a network spec.
    Predict {
        /// Model bundle (JSON) produced by `train`.
        #[arg(long)]
        bundle: PathBuf,
        /// Network spec file (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Label of the data the prediction is compared against; mismatches
        /// with the bundle provenance produce a warning.
        #[arg(long)]
        provenance: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BIC-vs-size selection path over the dataset's feature columns.
    SelectFeatures {
        #[arg(long)]
        dataset: PathBuf,
        /// Dataset provenance label (informational).
        #[arg(long, default_value = "unspecified")]
        provenance: String,
        /// 1 uses the columns as-is; 2 adds squares and cross terms.
        #[arg(long, default_value_t = 1)]
        degree: u8,
        #[arg(long, value_parser = ["exhaustive", "stepwise", "auto"], default_value = "auto")]
        method: String,
        /// Largest subset size to visit (stepwise only; default: all).
        #[arg(long)]
        max_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated accuracy of energy models over a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "unspecified")]
        provenance: String,
        /// `random` shuffles rows; `networks` holds out whole networks.
        #[arg(long, value_parser = ["random", "networks"], default_value = "random")]
        split: String,
        /// Train fraction for --split random.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        /// Fold count for --split random.
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Held-out networks per fold for --split networks.
        #[arg(long, default_value_t = 3)]
        test_networks: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = ["relacc", "rmspe", "both"], default_value = "both")]
        metric: String,
        /// Comma-separated feature columns for --split random
        /// (default: every column).
        #[arg(long)]
        features: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the bundled reference tables from the demo data.
    Report {
        /// Directory holding `models/` and `demo/`.
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Write one CSV per table here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Seed precedence: flag, then CONVWATT_SEED, then 42.
fn resolve_seed(flag: Option<u64>) -> Result<u64, Error> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| Error::invalid(SEED_ENV, format!("malformed seed '{raw}'"))),
        Err(_) => Ok(convwatt_core::evaluation::DEFAULT_SEED),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let mut ctx = commands::RunContext::new();
    let result = match cli.command {
        Command::Features { model, degree, out } => {
            commands::features(&mut ctx, &model, degree, out.as_deref())
        }
        Command::Integrate {
            trace,
            annotations,
            begin,
            end,
            out,
        } => commands::integrate(&mut ctx, &trace, annotations.as_deref(), begin, end, out.as_deref()),
        Command::Breakdown {
            trace,
            annotations,
            out,
        } => commands::breakdown(&mut ctx, &trace, &annotations, out.as_deref()),
        Command::Train {
            dataset,
            provenance,
            kinds,
            seed,
            out,
        } => resolve_seed(seed).and_then(|seed| {
            ctx.seed = Some(seed);
            commands::train(&mut ctx, &dataset, &provenance, kinds.as_deref(), seed, &out)
        }),
        Command::Predict {
            bundle,
            model,
            provenance,
            out,
        } => commands::predict(&mut ctx, &bundle, &model, provenance.as_deref(), out.as_deref()),
        Command::SelectFeatures {
            dataset,
            provenance,
            degree,
            method,
            max_size,
            out,
        } => commands::select_features(
            &mut ctx,
            &dataset,
            &provenance,
            degree,
            &method,
            max_size,
            out.as_deref(),
        ),
        Command::Evaluate {
            dataset,
            provenance,
            split,
            ratio,
            repeats,
            test_networks,
            seed,
            metric,
            features,
            out,
        } => resolve_seed(seed).and_then(|seed| {
            ctx.seed = Some(seed);
            commands::evaluate(
                &mut ctx,
                &dataset,
                &provenance,
                &split,
                ratio,
                repeats,
                test_networks,
                seed,
                &metric,
                features.as_deref(),
                out.as_deref(),
            )
        }),
        Command::Report { data_dir, out_dir } => {
            commands::report(&mut ctx, &data_dir, out_dir.as_deref())
        }
    };

    ctx.print_footer();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
