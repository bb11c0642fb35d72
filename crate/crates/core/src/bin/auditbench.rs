//! Command-line front end: generate, encode, train, score, eval, sweep and
//! the full pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use auditbench::detect::DetectorKind;
use auditbench::encode::Encoding;
use auditbench::pipeline::{cell_name, workers_from_env, PipelineConfig, Workspace, WORKERS_ENV};
use auditbench::{Error, Result};

#[derive(Parser)]
#[command(name = "auditbench", version, about = "Vehicle-claims generator and anomaly-detection benchmark")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults to <out>/config.toml when present.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory holding every artifact.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Global seed; every stage seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Tau grid as lo:hi:step or a comma-separated list.
    #[arg(long)]
    tau_grid: Option<String>,
}

#[derive(Args)]
struct Cell {
    /// Encodings: comma-separated names or "all".
    #[arg(short, long)]
    encoding: Option<String>,
    /// Detectors: comma-separated names or "all".
    #[arg(short, long)]
    detector: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the claims dataset (dataset.csv plus manifest).
    Generate {
        #[command(flatten)]
        common: Common,
        /// Rows of the synthetic base population.
        #[arg(long)]
        rows: Option<usize>,
        /// Vehicle CSV to use as the base instead of a synthetic one.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        missing_rate: Option<f64>,
        #[arg(long)]
        target_ratio: Option<f64>,
        #[arg(long)]
        with_dates: bool,
    },
    /// Split the dataset and write encoded train/test CSVs.
    Encode {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// Train detectors on encoded training data.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// Score the encoded test set with trained models.
    Score {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// AUC and weighted-F1 sweep of persisted scores.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
    },
    /// Evaluate SOMs at every map size.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
        /// Map side lengths.
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25")]
        grids: Vec<usize>,
    },
    /// Run every stage for all configured encodings and detectors.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: Cell,
        /// Worker threads for the matrix; overrides the environment.
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
}

fn parse_list<T: std::str::FromStr<Err = Error> + Copy>(s: &str, all: &[T]) -> Result<Vec<T>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    s.split(',').map(str::parse).collect()
}

fn workspace(common: &Common, cell: Option<&Cell>) -> Result<Workspace> {
    let mut config = match &common.config {
        Some(p) => Some(PipelineConfig::load(p)?),
        None => None,
    };
    let out = common
        .out
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.out.clone()))
        .ok_or_else(|| Error::Config("an output directory is required (--out or `out` in the config)".into()))?;
    let saved = out.join("config.toml");
    if config.is_none() && saved.exists() {
        config = Some(PipelineConfig::load(&saved)?);
    }
    let mut config = config.unwrap_or_default();
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(g) = &common.tau_grid {
        config.tau_grid = Some(g.clone());
    }
    if let Some(cell) = cell {
        if let Some(e) = &cell.encoding {
            config.encodings = parse_list(e, &Encoding::ALL)?;
        }
        if let Some(d) = &cell.detector {
            config.detectors = parse_list(d, &DetectorKind::ALL)?;
        }
    }
    Workspace::new(config, out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            common,
            rows,
            base,
            missing_rate,
            target_ratio,
            with_dates,
        } => {
            let mut ws = workspace(&common, None)?;
            let d = &mut ws.config.dataset;
            d.source = auditbench::pipeline::SourceKind::Generate;
            if let Some(r) = rows {
                d.rows = r;
            }
            if base.is_some() {
                d.path = base;
            }
            if let Some(m) = missing_rate {
                d.anomalies.missing_rate = m;
            }
            if target_ratio.is_some() {
                d.anomalies.target_ratio = target_ratio;
            }
            d.with_dates |= with_dates;
            let ws = Workspace::new(ws.config, ws.layout.root)?;
            ws.save_config()?;
            let ds = ws.generate()?;
            let c = &ds.manifest.counts;
            println!(
                "{}: {} rows, {} anomalies (ratio {:.4})",
                ws.layout.dataset().display(),
                ds.records.len(),
                c.anomalies,
                ds.manifest.achieved_ratio
            );
        }
        Command::Encode { common, cell } => {
            let ws = workspace(&common, Some(&cell))?;
            ws.save_config()?;
            ws.split()?;
            for &e in &ws.config.encodings {
                let enc = ws.encode(e)?;
                println!("{}: {} schema columns", ws.layout.encoded_dir(e.name()).display(), enc.schema.columns.len());
            }
        }
        Command::Train { common, cell } => {
            let ws = workspace(&common, Some(&cell))?;
            for &(e, d) in &cells(&ws) {
                ws.train(e, d)?;
                println!("{}", ws.layout.model(&cell_name(e, d)).display());
            }
        }
        Command::Score { common, cell } => {
            let ws = workspace(&common, Some(&cell))?;
            for &(e, d) in &cells(&ws) {
                let (s, _) = ws.score(e, d)?;
                println!("{}: {} rows", ws.layout.scores(&cell_name(e, d)).display(), s.len());
            }
        }
        Command::Eval { common, cell } => {
            let ws = workspace(&common, Some(&cell))?;
            for &(e, d) in &cells(&ws) {
                let r = ws.evaluate(e, d)?;
                print_report_line(&cell_name(e, d), &r);
            }
        }
        Command::Sweep { common, cell, grids } => {
            let ws = workspace(&common, Some(&cell))?;
            if grids.iter().any(|&g| g == 0) {
                return Err(Error::Config("map sizes must be >= 1".into()));
            }
            for &e in &ws.config.encodings {
                for r in ws.som_sweep(e, &grids)? {
                    print_report_line(&format!("{e}-{}", r.detector), &r);
                }
            }
        }
        Command::Pipeline { common, cell, workers } => {
            let ws = workspace(&common, Some(&cell))?;
            let workers = match workers {
                Some(0) => return Err(Error::Config("--workers must be >= 1".into())),
                Some(w) => w,
                None => workers_from_env()?,
            };
            let results = ws.run(workers)?;
            println!("{:<20} {:>8} {:>9} {:>9}", "cell", "auc", "best_tau", "best_wf1");
            for (_, s) in &results {
                println!(
                    "{:<20} {:>8.4} {:>9.2} {:>9.4}",
                    cell_name(s.encoding, s.detector),
                    s.auc,
                    s.best_tau,
                    s.best_weighted_f1
                );
            }
            println!("summary: {}", ws.layout.summary().display());
        }
    }
    Ok(())
}

fn cells(ws: &Workspace) -> Vec<(Encoding, DetectorKind)> {
    let c = &ws.config;
    c.encodings.iter().flat_map(|&e| c.detectors.iter().map(move |&d| (e, d))).collect()
}

fn print_report_line(name: &str, r: &auditbench::eval::EvalReport) {
    match r.best() {
        Some(b) => println!("{name}: auc {:.4}, best weighted F1 {:.4} at tau {:.2}", r.auc, b.weighted_f1, b.tau),
        None => println!("{name}: auc {:.4}", r.auc),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e.root(), Error::Config(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
