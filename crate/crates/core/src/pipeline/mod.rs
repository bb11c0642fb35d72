//! Stage wiring: generate, split, encode, train, score, evaluate. Each
//! stage persists its artifact with a manifest so any stage can be rerun
//! from disk.

mod artifacts;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

pub use artifacts::{sha256_bytes, sha256_file, Layout, StageManifest, TOOL, VERSION};
pub use config::{DatasetConfig, PipelineConfig, SourceKind, SplitConfig, ZScoreConfig};

use crate::detect::{DetectorKind, DetectorParams, Input, Model, ScoreVector};
use crate::encode::{split_embedding_input, ColumnKind, EncodedMatrix, Encoding, FittedEncoder};
use crate::eval::{split, EvalReport, Split, SplitSpec};
use crate::rng::derive_seed;
use crate::table::{LabeledTable, Table};
use crate::vcgen::{self, AnomalyConfig, BaseSource, ComplexityTable, Dataset, IssueCatalog, SynthSpec, DATE_COLUMNS};
use crate::{Error, Result};

/// Environment variable holding the worker count of the matrix mode.
pub const WORKERS_ENV: &str = "AUDITBENCH_WORKERS";

/// Name of one (encoding, detector) cell, used for artifact file names.
pub fn cell_name(encoding: Encoding, detector: DetectorKind) -> String {
    format!("{encoding}-{detector}")
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available cores.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs the claims generator as configured; stage seeds come from `seed`.
pub fn generate(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let source = match &cfg.path {
        Some(p) => BaseSource::Csv(p.clone()),
        None => BaseSource::Synth(SynthSpec {
            n_rows: cfg.rows,
            seed: derive_seed(seed, "base"),
            ..cfg.synth.clone()
        }),
    };
    let base = vcgen::acquire_base(&source)?;
    let anomalies = AnomalyConfig {
        seed: derive_seed(seed, "generate"),
        ..cfg.anomalies.clone()
    };
    vcgen::generate_dataset(base, &IssueCatalog::default(), &ComplexityTable::default(), &anomalies, cfg.with_dates)
}

fn drop_columns(table: &mut Table, names: &[&str]) {
    let keep: Vec<usize> = (0..table.columns.len())
        .filter(|&j| !names.iter().any(|n| table.columns[j].eq_ignore_ascii_case(n)))
        .collect();
    if keep.len() == table.columns.len() {
        return;
    }
    table.columns = keep.iter().map(|&j| table.columns[j].clone()).collect();
    for row in &mut table.rows {
        *row = keep.iter().map(|&j| row[j].clone()).collect();
    }
}

/// Scoring input for `detector`: embedding-index matrices stay as indices
/// for the autoencoder and are expanded through the frozen tables for every
/// other detector.
enum Prepared {
    Dense(Array2<f64>),
    Embedded(Array2<usize>, Array2<f64>),
}

impl Prepared {
    fn new(encoder: &FittedEncoder, m: &EncodedMatrix, detector: DetectorKind) -> Result<(Self, EncodedMatrix)> {
        if encoder.encoding == Encoding::Embedding && detector == DetectorKind::Ae {
            let (idx, num, _) = split_embedding_input(m)?;
            return Ok((Prepared::Embedded(idx, num), m.clone()));
        }
        let dense = encoder.expand_embeddings(m)?;
        Ok((Prepared::Dense(dense.values.clone()), dense))
    }

    fn input(&self) -> Input<'_> {
        match self {
            Prepared::Dense(x) => Input::Dense(x.view()),
            Prepared::Embedded(i, n) => Input::Embedded {
                indices: i.view(),
                numeric: n.view(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub encoding: Encoding,
    pub detector: DetectorKind,
    pub auc: f64,
    pub best_tau: f64,
    pub best_weighted_f1: f64,
    pub seconds: f64,
}

/// A configured output directory; each method runs one stage.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: PipelineConfig,
    pub layout: Layout,
}

impl Workspace {
    pub fn new(config: PipelineConfig, root: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        Ok(Workspace {
            config,
            layout: Layout::new(root),
        })
    }

    /// Uses `config` if given, else the `config.toml` saved in `root`, else
    /// defaults.
    pub fn open(config: Option<PipelineConfig>, root: impl Into<PathBuf>) -> Result<Self> {
        let layout = Layout::new(root);
        let config = match config {
            Some(c) => c,
            None if layout.config().exists() => PipelineConfig::load(&layout.config())?,
            None => PipelineConfig::default(),
        };
        Workspace::new(config, layout.root)
    }

    fn seed(&self, stage: &str) -> u64 {
        derive_seed(self.config.seed, stage)
    }

    pub fn save_config(&self) -> Result<()> {
        artifacts::write_file(&self.layout.config(), self.config.to_toml()?.as_bytes())
    }

    /// Path of the labeled dataset the later stages read.
    pub fn dataset_path(&self) -> PathBuf {
        match self.config.dataset.source {
            SourceKind::Generate => self.layout.dataset(),
            SourceKind::Csv => self.config.dataset.path.clone().expect("validated csv source has a path"),
        }
    }

    /// Writes `dataset.csv` and its manifest (generator source only).
    pub fn generate(&self) -> Result<Dataset> {
        (|| {
            let cfg = &self.config.dataset;
            if cfg.source != SourceKind::Generate {
                return Err(Error::Config("dataset.source is csv; nothing to generate".into()));
            }
            let ds = generate(cfg, self.config.seed)?;
            let path = self.layout.dataset();
            artifacts::write_file(&path, &ds.to_csv_bytes()?)?;
            let inputs: Vec<&Path> = cfg.path.iter().map(|p| p.as_path()).collect();
            StageManifest::build(
                &self.layout,
                "generate",
                self.config.seed,
                serde_json::to_value(&ds.manifest)?,
                &inputs,
                &[&path],
            )?
            .write_for(&path)?;
            Ok(ds)
        })()
        .map_err(|e: Error| e.in_stage("generate"))
    }

    /// Feature table, labels and column kinds of the dataset on disk.
    pub fn load_dataset(&self) -> Result<(LabeledTable, Vec<(String, ColumnKind)>)> {
        let cfg = &self.config.dataset;
        let table = Table::read_csv(&self.dataset_path())?;
        let mut data = LabeledTable::from_table(table, &cfg.label_column)?;
        let kinds = match cfg.source {
            SourceKind::Generate => {
                drop_columns(&mut data.table, &DATE_COLUMNS);
                vcgen::column_kinds()
            }
            SourceKind::Csv => {
                let mut kinds = Vec::new();
                for (cols, kind) in [
                    (&cfg.numerical_columns, ColumnKind::Numerical),
                    (&cfg.categorical_columns, ColumnKind::Categorical),
                ] {
                    kinds.extend(cols.iter().flatten().map(|c| (c.clone(), kind)));
                }
                kinds
            }
        };
        Ok((data, kinds))
    }

    pub fn split(&self) -> Result<Split> {
        (|| {
            let (data, _) = self.load_dataset()?;
            let spec = SplitSpec {
                strategy: self.config.split.strategy,
                seed: self.seed("split"),
            };
            let s = split(&data.labels, &spec)?;
            let path = self.layout.split();
            artifacts::write_json(&path, &s)?;
            StageManifest::build(&self.layout, "split", spec.seed, serde_json::to_value(spec)?, &[&self.dataset_path()], &[&path])?
                .write_for(&path)?;
            Ok(s)
        })()
        .map_err(|e: Error| e.in_stage("split"))
    }

    /// The persisted split, created first if missing.
    pub fn load_split(&self) -> Result<Split> {
        let path = self.layout.split();
        if path.exists() {
            artifacts::read_json(&path)
        } else {
            self.split()
        }
    }

    /// Fits `encoding` on the training rows and writes the encoder sidecar
    /// and the encoded train/test CSVs.
    pub fn encode(&self, encoding: Encoding) -> Result<FittedEncoder> {
        (|| {
            let (data, kinds) = self.load_dataset()?;
            let s = self.load_split()?;
            let train = data.select(&s.train);
            let test = data.select(&s.test);
            let enc_cfg = crate::encode::EncoderConfig {
                seed: self.seed(&format!("encode/{encoding}")),
                ..self.config.encoder.clone()
            };
            let encoder = FittedEncoder::fit(encoding, &train.table, &kinds, &enc_cfg)?;
            let (sidecar, tr, te) = (
                self.layout.encoder(encoding.name()),
                self.layout.encoded_train(encoding.name()),
                self.layout.encoded_test(encoding.name()),
            );
            std::fs::create_dir_all(self.layout.encoded_dir(encoding.name()))
                .map_err(|e| Error::io(self.layout.encoded_dir(encoding.name()), e))?;
            encoder.save(&sidecar)?;
            encoder.transform_labeled(&train)?.save_csv(&tr)?;
            encoder.transform_labeled(&test)?.save_csv(&te)?;
            StageManifest::build(
                &self.layout,
                "encode",
                enc_cfg.seed,
                serde_json::json!({ "encoding": encoding, "config": enc_cfg }),
                &[&self.dataset_path(), &self.layout.split()],
                &[&sidecar, &tr, &te],
            )?
            .write_for(&sidecar)?;
            Ok(encoder)
        })()
        .map_err(|e: Error| e.in_stage(&format!("encode/{encoding}")))
    }

    fn detector_params(&self, encoding: Encoding, detector: DetectorKind, dense: &EncodedMatrix) -> Result<DetectorParams> {
        let mut p = self.config.detector.clone().with_seed(self.seed(&format!("train/{encoding}/{detector}")));
        if detector == DetectorKind::ZScore {
            let name = &self.config.zscore.column;
            p.zscore_column = dense.column_named(name).ok_or_else(|| {
                Error::MissingColumn(format!("{name} (z-score column in the {encoding} matrix)"))
            })?;
        }
        Ok(p)
    }

    /// Trains `detector` on the encoded training matrix and writes the model.
    pub fn train(&self, encoding: Encoding, detector: DetectorKind) -> Result<Model> {
        let cell = cell_name(encoding, detector);
        (|| {
            let sidecar = self.layout.encoder(encoding.name());
            let tr = self.layout.encoded_train(encoding.name());
            let encoder = FittedEncoder::load(&sidecar)?;
            let train = EncodedMatrix::load_csv(&tr)?;
            let (prepared, dense) = Prepared::new(&encoder, &train, detector)?;
            let params = self.detector_params(encoding, detector, &dense)?;
            let model = Model::fit(detector, &prepared.input(), &params, encoder.embedding.clone())?;
            let path = self.layout.model(&cell);
            artifacts::write_file(&path, &[])?;
            model.save(&path)?;
            let seed = self.seed(&format!("train/{encoding}/{detector}"));
            StageManifest::build(&self.layout, "train", seed, serde_json::to_value(&params)?, &[&sidecar, &tr], &[&path])?
                .write_for(&path)?;
            Ok(model)
        })()
        .map_err(|e: Error| e.in_stage(&format!("train/{cell}")))
    }

    /// Scores the encoded test rows; writes `row,label,score` with the
    /// original dataset row numbers.
    pub fn score(&self, encoding: Encoding, detector: DetectorKind) -> Result<(ScoreVector, Vec<u8>)> {
        let cell = cell_name(encoding, detector);
        (|| {
            let sidecar = self.layout.encoder(encoding.name());
            let te = self.layout.encoded_test(encoding.name());
            let model_path = self.layout.model(&cell);
            let encoder = FittedEncoder::load(&sidecar)?;
            let test = EncodedMatrix::load_csv(&te)?;
            let model = Model::load(&model_path)?;
            if model.kind() != detector {
                return Err(Error::ModelFormat(format!("{} holds a {} model", model_path.display(), model.kind())));
            }
            let (prepared, _) = Prepared::new(&encoder, &test, detector)?;
            let scores = ScoreVector::try_new(model.score(&prepared.input())?.into_inner())?;
            let labels = test
                .labels
                .clone()
                .ok_or_else(|| Error::InvalidInput(format!("{} has no label column", te.display())))?;
            let rows = self.load_split()?.test;
            if rows.len() != labels.len() {
                return Err(Error::InvalidInput("split and encoded test set disagree in length".into()));
            }
            let mut out = String::from("row,label,score\n");
            for ((r, l), s) in rows.iter().zip(&labels).zip(scores.values()) {
                let _ = writeln!(out, "{r},{l},{s:?}");
            }
            let path = self.layout.scores(&cell);
            artifacts::write_file(&path, out.as_bytes())?;
            StageManifest::build(&self.layout, "score", 0, serde_json::json!({ "cell": cell }), &[&sidecar, &te, &model_path], &[&path])?
                .write_for(&path)?;
            Ok((scores, labels))
        })()
        .map_err(|e: Error| e.in_stage(&format!("score/{cell}")))
    }

    /// AUC and tau sweep of the persisted scores.
    pub fn evaluate(&self, encoding: Encoding, detector: DetectorKind) -> Result<EvalReport> {
        let cell = cell_name(encoding, detector);
        (|| {
            let scores_path = self.layout.scores(&cell);
            let (scores, labels) = read_scores(&scores_path)?;
            let meta = self.load_split()?.meta;
            let grid = self.config.tau_grid()?;
            let report = EvalReport::evaluate(detector.name(), encoding.name(), &scores, &labels, &grid, Some(meta))?;
            let files = report.write_all(&self.layout.reports_dir(), &cell)?;
            let outputs: Vec<&Path> = files.iter().map(|p| p.as_path()).collect();
            StageManifest::build(&self.layout, "eval", 0, serde_json::json!({ "tau_grid": grid }), &[&scores_path], &outputs)?
                .write_for(&files[0])?;
            Ok(report)
        })()
        .map_err(|e: Error| e.in_stage(&format!("eval/{cell}")))
    }

    /// Train, score and evaluate one cell.
    pub fn run_cell(&self, encoding: Encoding, detector: DetectorKind) -> Result<EvalReport> {
        self.train(encoding, detector)?;
        self.score(encoding, detector)?;
        self.evaluate(encoding, detector)
    }

    /// Full pipeline over every configured encoding and detector. Encoded
    /// CSVs are written once per encoding and shared by all detectors; the
    /// cells run on a pool of `workers` threads.
    pub fn run(&self, workers: usize) -> Result<Vec<(EvalReport, CellSummary)>> {
        std::fs::create_dir_all(&self.layout.root).map_err(|e| Error::io(&self.layout.root, e))?;
        self.save_config()?;
        if self.config.dataset.source == SourceKind::Generate {
            self.generate()?;
        }
        self.split()?;
        let cells: Vec<(Encoding, DetectorKind)> = self
            .config
            .encodings
            .iter()
            .flat_map(|&e| self.config.detectors.iter().map(move |&d| (e, d)))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let results: Vec<Result<(EvalReport, CellSummary)>> = pool.install(|| {
            self.config.encodings.par_iter().map(|&e| self.encode(e).map(|_| ())).collect::<Result<Vec<()>>>()?;
            Ok::<_, Error>(
                cells
                    .par_iter()
                    .map(|&(e, d)| {
                        let start = std::time::Instant::now();
                        let report = self.run_cell(e, d)?;
                        let best = report.best().cloned();
                        let summary = CellSummary {
                            encoding: e,
                            detector: d,
                            auc: report.auc,
                            best_tau: best.as_ref().map_or(f64::NAN, |b| b.tau),
                            best_weighted_f1: best.as_ref().map_or(f64::NAN, |b| b.weighted_f1),
                            seconds: start.elapsed().as_secs_f64(),
                        };
                        log::info!("{}: auc {:.4}", cell_name(e, d), report.auc);
                        Ok((report, summary))
                    })
                    .collect(),
            )
        })?;
        let results: Vec<(EvalReport, CellSummary)> = results.into_iter().collect::<Result<_>>()?;
        let mut csv = String::from("encoding,detector,auc,best_tau,best_weighted_f1,seconds\n");
        for (_, s) in &results {
            let _ = writeln!(csv, "{},{},{:.6},{:.2},{:.6},{:.3}", s.encoding, s.detector, s.auc, s.best_tau, s.best_weighted_f1, s.seconds);
        }
        artifacts::write_file(&self.layout.summary(), csv.as_bytes())?;
        Ok(results)
    }

    /// Trains and evaluates SOMs at every grid size, one report each
    /// (`<encoding>-som<grid>`); no size is singled out.
    pub fn som_sweep(&self, encoding: Encoding, grids: &[usize]) -> Result<Vec<EvalReport>> {
        (|| {
            if !self.layout.encoder(encoding.name()).exists() {
                self.encode(encoding)?;
            }
            let encoder = FittedEncoder::load(&self.layout.encoder(encoding.name()))?;
            let train = EncodedMatrix::load_csv(&self.layout.encoded_train(encoding.name()))?;
            let test = EncodedMatrix::load_csv(&self.layout.encoded_test(encoding.name()))?;
            let (tr, _) = Prepared::new(&encoder, &train, DetectorKind::Som)?;
            let (te, _) = Prepared::new(&encoder, &test, DetectorKind::Som)?;
            let labels = test.labels.clone().ok_or_else(|| Error::InvalidInput("encoded test set has no labels".into()))?;
            let meta = self.load_split()?.meta;
            let grid_tau = self.config.tau_grid()?;
            grids
                .iter()
                .map(|&g| {
                    let mut params = self.config.detector.clone().with_seed(self.seed(&format!("train/{encoding}/som{g}")));
                    params.som.grid = g;
                    let model = Model::fit(DetectorKind::Som, &tr.input(), &params, None)?;
                    let scores = model.score(&te.input())?;
                    let mut report = EvalReport::evaluate("som", encoding.name(), scores.values(), &labels, &grid_tau, Some(meta.clone()))?;
                    report.detector = format!("som{g}");
                    report.write_all(&self.layout.reports_dir(), &format!("{encoding}-som{g}"))?;
                    Ok(report)
                })
                .collect::<Result<Vec<_>>>()
        })()
        .map_err(|e: Error| e.in_stage(&format!("sweep/{encoding}")))
    }
}

/// Reads a `row,label,score` file.
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    let table = Table::read_csv(path)?;
    let col = |name: &str| table.column_index(name).ok_or_else(|| Error::MissingColumn(name.into()));
    let (li, si) = (col("label")?, col("score")?);
    let mut scores = Vec::with_capacity(table.len());
    let mut labels = Vec::with_capacity(table.len());
    for (i, row) in table.rows.iter().enumerate() {
        let bad = || Error::InvalidInput(format!("{}: row {} is malformed", path.display(), i + 1));
        labels.push(row[li].parse::<u8>().map_err(|_| bad())?);
        scores.push(row[si].parse::<f64>().map_err(|_| bad())?);
    }
    Ok((scores, labels))
}

/// Runs the configured pipeline into `out` with the worker count from the
/// environment.
pub fn run_pipeline(config: PipelineConfig, out: &Path) -> Result<Vec<EvalReport>> {
    let ws = Workspace::new(config, out)?;
    Ok(ws.run(workers_from_env()?)?.into_iter().map(|(r, _)| r).collect())
}
