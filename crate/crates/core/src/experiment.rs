//! Experiment configuration and the pipelines behind the command-line tool.
//!
//! A run is fully described by an [`ExperimentConfig`]. Every random stream
//! is derived from its top-level `seed`, and every artifact starts with the
//! config digest and seed so any file can be traced back to its run. The
//! digest ignores `output_dir`, so the same experiment written to two
//! directories produces identical files.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{BaselineError, BoostParams, BoostedTrees, DecisionTree, ForestParams, RandomForest, TreeParams};
use crate::data::{
    load_csv, load_csv_available, pearson_matrix, stratified_split, synthesize_dataset, DataError, Dataset, Scaler,
    HEART_FEATURES,
};
use crate::eval::{comparison_report, EvalError, EvaluationReport};
use crate::pixmap::Heatmap;
use crate::rng::{derive_seed, stream};
use crate::search::{
    read_search_log, search_with, write_log_iteration, HyperSearchSpec, LogEntry, SearchError, SearchOptions,
    TransformerFitness, LOG_HEADER,
};
use crate::transformer::{self, ModelFileError, ModelParams, TrainError, TransformerConfig};

pub const MODEL_TREE: &str = "decision_tree";
pub const MODEL_FOREST: &str = "random_forest";
pub const MODEL_BOOSTED: &str = "boosted_trees";
pub const MODEL_TRANSFORMER: &str = "pso_transformer";
pub const BASELINE_MODELS: [&str; 3] = [MODEL_TREE, MODEL_FOREST, MODEL_BOOSTED];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("{}: {source}", .path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    DataFile {
        path: PathBuf,
        #[source]
        source: DataError,
    },
    #[error("{}: {source}", .path.display())]
    ModelFile {
        path: PathBuf,
        #[source]
        source: ModelFileError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Mismatch(String),
}

type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub baselines: BaselineConfig,
    /// Seeds inside this table are derived from `seed` and must stay unset.
    pub search: HyperSearchSpec,
    /// A fixed transformer configuration. `search` writes the winner here in
    /// `best_config.toml`; `report` trains it when no model file exists.
    pub transformer: Option<TransformerConfig>,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            baselines: BaselineConfig::default(),
            search: HyperSearchSpec::default(),
            transformer: None,
            output: OutputConfig::default(),
        }
    }
}

/// Exactly one of `path` and `synthetic` must be set. Omitting the whole
/// `[data]` table selects the default synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            synthetic: Some(SyntheticConfig::default()),
            test_fraction: default_test_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    /// Probability that a label is flipped.
    pub noise: f64,
    /// Generator seed; derived from the experiment seed when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_rows: 1000,
            noise: 0.05,
            seed: None,
        }
    }
}

/// Depth limits of 0 mean unlimited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub forest_min_leaf: usize,
    pub forest_m_try: usize,
    pub boost_rounds: usize,
    pub boost_eta: f64,
    pub boost_max_depth: usize,
    pub boost_min_leaf: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            tree_max_depth: 8,
            tree_min_leaf: 1,
            forest_trees: 100,
            forest_max_depth: 0,
            forest_min_leaf: 1,
            forest_m_try: 4,
            boost_rounds: 100,
            boost_eta: 0.1,
            boost_max_depth: 3,
            boost_min_leaf: 1,
        }
    }
}

fn depth_limit(depth: usize) -> Option<usize> {
    (depth > 0).then_some(depth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write measured wall time in the search log. Turn off for
    /// byte-reproducible logs.
    pub record_timings: bool,
    /// Side of one heatmap cell in pixels.
    pub heatmap_cell_px: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            record_timings: true,
            heatmap_cell_px: 16,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::File {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ExperimentError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Every problem with the config, not just the first.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.output_dir.as_os_str().is_empty() {
            out.push("output_dir must not be empty".into());
        }
        let d = &self.data;
        match (&d.path, &d.synthetic) {
            (Some(_), Some(_)) => out.push("data: set either path or [data.synthetic], not both".into()),
            (None, None) => out.push("data: set path or [data.synthetic]".into()),
            _ => {}
        }
        if let Some(s) = &d.synthetic {
            if s.n_rows < 20 {
                out.push(format!("data.synthetic.n_rows must be at least 20, got {}", s.n_rows));
            }
            if !(0.0..=0.5).contains(&s.noise) {
                out.push(format!("data.synthetic.noise must be in [0, 0.5], got {}", s.noise));
            }
        }
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            out.push(format!("data.test_fraction must be in (0, 1), got {}", d.test_fraction));
        }
        let b = &self.baselines;
        for (name, v) in [
            ("tree_min_leaf", b.tree_min_leaf),
            ("forest_trees", b.forest_trees),
            ("forest_min_leaf", b.forest_min_leaf),
            ("boost_max_depth", b.boost_max_depth),
            ("boost_min_leaf", b.boost_min_leaf),
        ] {
            if v < 1 {
                out.push(format!("baselines.{name} must be at least 1"));
            }
        }
        if !(1..=HEART_FEATURES.len()).contains(&b.forest_m_try) {
            out.push(format!(
                "baselines.forest_m_try must be in 1..={}, got {}",
                HEART_FEATURES.len(),
                b.forest_m_try
            ));
        }
        if !(b.boost_eta.is_finite() && b.boost_eta >= 0.0) {
            out.push(format!("baselines.boost_eta must be finite and non-negative, got {}", b.boost_eta));
        }
        out.extend(self.search.issues().into_iter().map(|s| format!("search: {s}")));
        if self.search.seed != 0 || self.search.swarm.seed != 0 {
            out.push("search: seeds are derived from the top-level seed; remove search.seed and search.swarm.seed".into());
        }
        if let Some(t) = &self.transformer {
            out.extend(t.issues().into_iter().map(|s| format!("transformer: {s}")));
        }
        if !(1..=64).contains(&self.output.heatmap_cell_px) {
            out.push(format!(
                "output.heatmap_cell_px must be in 1..=64, got {}",
                self.output.heatmap_cell_px
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::InvalidConfig(issues))
        }
    }

    /// SHA-256 of the canonical TOML form, with `output_dir` blanked.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    /// Comment line that heads every text artifact.
    pub fn provenance(&self) -> String {
        format!("# config_digest={} seed={}", self.digest(), self.seed)
    }

    /// The search spec with its seeds derived from the experiment seed.
    pub fn search_spec(&self) -> HyperSearchSpec {
        let mut spec = self.search.clone();
        spec.seed = derive_seed(self.seed, &[stream::SEARCH]);
        spec.swarm.seed = derive_seed(self.seed, &[stream::SWARM]);
        spec
    }
}

/// Load the configured dataset. With `full_schema` every canonical feature
/// must be present; otherwise whichever ones the file has are used.
pub fn load_dataset(cfg: &ExperimentConfig, full_schema: bool) -> Result<Dataset> {
    if let Some(path) = &cfg.data.path {
        let file = File::open(path).map_err(|source| ExperimentError::File {
            path: path.clone(),
            source,
        })?;
        let reader = BufReader::new(file);
        let loaded = if full_schema {
            load_csv(reader, &HEART_FEATURES)
        } else {
            load_csv_available(reader, &HEART_FEATURES)
        };
        return loaded.map_err(|source| ExperimentError::DataFile {
            path: path.clone(),
            source,
        });
    }
    let s = cfg.data.synthetic.clone().unwrap_or_default();
    let seed = s.seed.unwrap_or_else(|| derive_seed(cfg.seed, &[stream::DATA]));
    Ok(synthesize_dataset(s.n_rows, s.noise, seed)?)
}

/// Standardized train/test split. The scaler is fitted on the training rows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let data = load_dataset(cfg, true)?;
    let (train, test) = stratified_split(&data, cfg.data.test_fraction, derive_seed(cfg.seed, &[stream::SPLIT]))?;
    let scaler = Scaler::fit(&train)?;
    Ok(Prepared {
        train: scaler.transform(&train)?,
        test: scaler.transform(&test)?,
        scaler,
    })
}

/// Hold out the search-validation slice of the (standardized) training split.
pub fn inner_split(cfg: &ExperimentConfig, train: &Dataset) -> Result<(Dataset, Dataset)> {
    Ok(stratified_split(
        train,
        cfg.search.validation_fraction,
        derive_seed(cfg.seed, &[stream::INNER_SPLIT]),
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Correlation matrix and heatmap of the raw data.
    Correlate,
    /// Tree, forest and boosted baselines on the test split.
    Baselines,
    /// Swarm search, final retrain and the comparison table.
    Search,
    /// Evaluate a saved or fixed transformer and rebuild the comparison.
    Report,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Continue an interrupted search from its log.
    pub resume: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    /// Human-readable results, one per line.
    pub lines: Vec<String>,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
}

/// Validate the config, then run one command.
pub fn run(command: Command, cfg: &ExperimentConfig, options: RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|source| ExperimentError::File {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let mut art = Artifacts {
        dir: cfg.output_dir.clone(),
        provenance: cfg.provenance(),
        summary: RunSummary::default(),
    };
    match command {
        Command::Correlate => cmd_correlate(cfg, &mut art)?,
        Command::Baselines => {
            let prepared = prepare(cfg)?;
            let reports = cmd_baselines(cfg, &prepared, &mut art)?;
            write_comparison(&mut art, &reports)?;
        }
        Command::Search => cmd_search(cfg, options, &mut art)?,
        Command::Report => cmd_report(cfg, &mut art)?,
    }
    Ok(art.summary)
}

struct Artifacts {
    dir: PathBuf,
    provenance: String,
    summary: RunSummary,
}

impl Artifacts {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
        move |source| ExperimentError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(name);
        let file = File::create(&path).map_err(Self::io_err(&path))?;
        self.summary.files.push(path.clone());
        Ok((path, BufWriter::new(file)))
    }

    /// Write a text artifact headed by the provenance comment.
    fn text(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let (path, mut w) = self.open(name)?;
        writeln!(w, "{}", self.provenance).map_err(Self::io_err(&path))?;
        body(&mut w)?;
        w.flush().map_err(Self::io_err(&path))
    }

    fn heatmap(&mut self, name: &str, map: &Heatmap<'_>, note: &str) -> Result<()> {
        let (path, w) = self.open(name)?;
        let comments = [self.provenance.trim_start_matches("# ").to_string(), note.to_string()];
        map.write_pgm(w, &comments).map_err(Self::io_err(&path))
    }

    fn line(&mut self, s: impl Into<String>) {
        self.summary.lines.push(s.into());
    }
}

fn cmd_correlate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let data = load_dataset(cfg, false)?;
    let matrix = pearson_matrix(&data)?;
    art.text("correlation.csv", |w| Ok(matrix.write_csv(w)?))?;
    let k = matrix.size();
    art.heatmap(
        "correlation.pgm",
        &Heatmap {
            values: matrix.values(),
            rows: k,
            cols: k,
            lo: -1.0,
            hi: 1.0,
            cell_px: cfg.output.heatmap_cell_px,
        },
        &format!("pearson correlation, order: {}", matrix.names().join(" ")),
    )?;
    art.line(format!("{} rows, {} columns", data.n_rows(), k));
    art.line("strongest correlations:");
    for (i, j, r) in matrix.strongest_pairs(5) {
        art.line(format!("  {} ~ {}: r = {:+.3}", matrix.names()[i], matrix.names()[j], r));
    }
    Ok(())
}

fn report_for(cfg: &ExperimentConfig, model: &str, test: &Dataset, predicted: &[u8]) -> Result<EvaluationReport> {
    Ok(EvaluationReport::from_predictions(model, "test", test.targets(), predicted, cfg.seed, cfg.digest())?)
}

fn write_model_report(cfg: &ExperimentConfig, art: &mut Artifacts, report: &EvaluationReport) -> Result<()> {
    let name = &report.model;
    art.text(&format!("confusion_{name}.csv"), |w| Ok(report.confusion.write_csv(w)?))?;
    let counts: Vec<f64> = report.confusion.counts().iter().flatten().map(|&c| c as f64).collect();
    let hi = counts.iter().copied().fold(0.0, f64::max);
    art.heatmap(
        &format!("confusion_{name}.pgm"),
        &Heatmap {
            values: &counts,
            rows: 2,
            cols: 2,
            lo: 0.0,
            hi,
            cell_px: cfg.output.heatmap_cell_px,
        },
        &format!("{name} confusion matrix on the {} split, rows true class, columns predicted", report.split),
    )?;
    art.text(&format!("metrics_{name}.csv"), |w| Ok(report.write_csv(w)?))?;
    art.line(format!("{name}: test accuracy {:.3}", report.metrics.accuracy));
    Ok(())
}

/// Fit the three baselines on the training split and evaluate them on test.
fn cmd_baselines(cfg: &ExperimentConfig, p: &Prepared, art: &mut Artifacts) -> Result<Vec<EvaluationReport>> {
    let b = &cfg.baselines;
    let tree = DecisionTree::fit(
        &p.train,
        &TreeParams {
            max_depth: depth_limit(b.tree_max_depth),
            min_leaf: b.tree_min_leaf,
        },
    )?;
    let forest = RandomForest::fit(
        &p.train,
        &ForestParams {
            n_trees: b.forest_trees,
            max_depth: depth_limit(b.forest_max_depth),
            min_leaf: b.forest_min_leaf,
            m_try: b.forest_m_try,
            bootstrap: true,
            seed: derive_seed(cfg.seed, &[stream::FOREST]),
        },
    )?;
    let boosted = BoostedTrees::fit(
        &p.train,
        &BoostParams {
            n_trees: b.boost_rounds,
            max_depth: b.boost_max_depth,
            min_leaf: b.boost_min_leaf,
            eta: b.boost_eta,
        },
    )?;
    let reports = vec![
        report_for(cfg, MODEL_TREE, &p.test, &tree.predict(&p.test))?,
        report_for(cfg, MODEL_FOREST, &p.test, &forest.predict(&p.test))?,
        report_for(cfg, MODEL_BOOSTED, &p.test, &boosted.predict(&p.test))?,
    ];
    for r in &reports {
        write_model_report(cfg, art, r)?;
    }
    Ok(reports)
}

/// Baseline reports from an earlier run with the same config, or fresh ones.
fn baselines_for_comparison(cfg: &ExperimentConfig, p: &Prepared, art: &mut Artifacts) -> Result<Vec<EvaluationReport>> {
    let digest = cfg.digest();
    let mut loaded = Vec::new();
    for name in BASELINE_MODELS {
        let path = art.path(&format!("metrics_{name}.csv"));
        let Ok(file) = File::open(&path) else { break };
        match EvaluationReport::read_csv(BufReader::new(file)) {
            Ok(r) if r.config_digest == digest && r.model == name => loaded.push(r),
            _ => break,
        }
    }
    if loaded.len() == BASELINE_MODELS.len() {
        art.line("baselines: reusing reports from this output directory");
        return Ok(loaded);
    }
    cmd_baselines(cfg, p, art)
}

fn write_comparison(art: &mut Artifacts, reports: &[EvaluationReport]) -> Result<()> {
    let table = comparison_report(reports);
    art.text("comparison.csv", |w| Ok(table.write_csv(w)?))?;
    art.text("comparison_deltas.csv", |w| Ok(table.write_deltas_csv(w)?))?;
    let text = table.to_text();
    art.text("comparison.txt", |w| {
        w.write_all(text.as_bytes()).map_err(EvalError::from)?;
        Ok(())
    })?;
    art.line("");
    for l in text.lines() {
        art.line(l);
    }
    Ok(())
}

fn evaluate_transformer(cfg: &ExperimentConfig, art: &mut Artifacts, model: &ModelParams, test: &Dataset) -> Result<EvaluationReport> {
    if model.shape.n_features != test.n_features() {
        return Err(ExperimentError::Mismatch(format!(
            "model expects {} features but the data has {}",
            model.shape.n_features,
            test.n_features()
        )));
    }
    let predicted = transformer::predict(model, test).labels;
    let report = report_for(cfg, MODEL_TRANSFORMER, test, &predicted)?;
    write_model_report(cfg, art, &report)?;
    Ok(report)
}

fn save_model(cfg: &ExperimentConfig, art: &mut Artifacts, model: &ModelParams) -> Result<()> {
    let (path, w) = art.open("model.bin")?;
    model
        .save(w, &cfg.digest())
        .map_err(|source| ExperimentError::ModelFile { path, source })
}

fn cmd_search(cfg: &ExperimentConfig, options: RunOptions, art: &mut Artifacts) -> Result<()> {
    let prepared = prepare(cfg)?;
    let (fit, val) = inner_split(cfg, &prepared.train)?;
    let spec = cfg.search_spec();

    let log_name = "search_log.csv";
    let log_path = art.path(log_name);
    let mut resume = HashMap::new();
    if options.resume && log_path.exists() {
        let file = File::open(&log_path).map_err(Artifacts::io_err(&log_path))?;
        let state = read_search_log(BufReader::new(file))?;
        if !state.preamble.contains(&art.provenance) {
            return Err(ExperimentError::Mismatch(format!(
                "{} was written by a different config or seed; refusing to resume",
                log_path.display()
            )));
        }
        art.line(match state.last_completed {
            Some(k) => format!("resuming after iteration {k} ({} cached evaluations)", state.cache.len()),
            None => "search log has no completed iteration; starting over".to_string(),
        });
        resume = state.cache;
    }

    let (_, mut log) = art.open(log_name)?;
    let header = format!("{}\n{}\n", art.provenance, LOG_HEADER.join(","));
    log.write_all(header.as_bytes()).map_err(Artifacts::io_err(&log_path))?;
    log.flush().map_err(Artifacts::io_err(&log_path))?;
    let record_timings = cfg.output.record_timings;
    let hook = |k: usize, entries: &[LogEntry]| write_log_iteration(&mut log, k, entries, record_timings);
    let outcome = search_with(
        &spec,
        &fit,
        &val,
        &TransformerFitness,
        SearchOptions {
            resume,
            on_iteration: Some(Box::new(hook)),
            final_train: Some(&prepared.train),
        },
    )?;
    let result = &outcome.result;
    let failures = result.log.iter().filter(|e| e.failure.is_some()).count();
    let h = result.best_hyper;
    art.line(format!(
        "search: {} evaluations, {} failed, best validation accuracy {:.3}",
        result.evaluations, failures, result.best_fitness
    ));
    art.line(format!(
        "best: lr {:.3e}, {} layers, d_model {}, {} heads",
        h.learning_rate, h.n_layers, h.d_model, h.n_heads
    ));

    art.text("convergence.csv", |w| {
        writeln!(w, "iteration,best_validation_accuracy").map_err(EvalError::from)?;
        for (k, a) in result.history.iter().enumerate() {
            writeln!(w, "{k},{a}").map_err(EvalError::from)?;
        }
        Ok(())
    })?;
    let mut best = cfg.clone();
    best.transformer = Some(result.best_config.clone());
    let best_toml = best.to_toml();
    art.text("best_config.toml", |w| {
        w.write_all(best_toml.as_bytes()).map_err(EvalError::from)?;
        Ok(())
    })?;
    save_model(cfg, art, &outcome.model)?;

    let mut reports = baselines_for_comparison(cfg, &prepared, art)?;
    reports.push(evaluate_transformer(cfg, art, &outcome.model, &prepared.test)?);
    write_comparison(art, &reports)
}

fn cmd_report(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let prepared = prepare(cfg)?;
    let model_path = art.path("model.bin");
    let model = if model_path.exists() {
        let file = File::open(&model_path).map_err(Artifacts::io_err(&model_path))?;
        let (model, digest) = ModelParams::load(BufReader::new(file)).map_err(|source| ExperimentError::ModelFile {
            path: model_path.clone(),
            source,
        })?;
        art.line(format!("loaded {} (config digest {digest})", model_path.display()));
        model
    } else if let Some(t) = &cfg.transformer {
        let (model, report) = transformer::train(t, &prepared.train, None)?;
        art.line(format!(
            "trained the configured transformer for {} epochs, final loss {:.4}",
            t.epochs,
            report.epoch_loss.last().copied().unwrap_or(f64::NAN)
        ));
        save_model(cfg, art, &model)?;
        model
    } else {
        return Err(ExperimentError::Mismatch(format!(
            "no model at {} and no [transformer] section to train one",
            model_path.display()
        )));
    };
    let mut reports = baselines_for_comparison(cfg, &prepared, art)?;
    reports.push(evaluate_transformer(cfg, art, &model, &prepared.test)?);
    write_comparison(art, &reports)
}
