//! Particle-swarm search over transformer hyperparameters.
//!
//! A particle position decodes to a learning rate (log scale), a layer count
//! and indices into the `d_model` and head-count menus. Fitness is validation
//! accuracy after a short training run, negated because the swarm minimizes.
//! Training failures score accuracy 0 and the search carries on.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::pso::{optimize_with, Candidate, Decoded, Dimension, ObjectiveError, PsoError, SearchSpace, SwarmConfig};
use crate::rng::{derive_seed, stream};
use crate::transformer::{self, ModelParams, TrainError, TrainReport, TransformerConfig};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Swarm(#[from] PsoError),
    #[error("final training failed: {0}")]
    FinalTraining(#[from] TrainError),
    #[error("malformed search log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperSearchSpec {
    pub lr_min: f64,
    pub lr_max: f64,
    pub min_layers: usize,
    pub max_layers: usize,
    pub d_model_menu: Vec<usize>,
    pub head_menu: Vec<usize>,
    /// `d_ff = ff_multiplier × d_model`.
    pub ff_multiplier: usize,
    pub batch_size: usize,
    /// Epochs for the final retrain of the best configuration.
    pub epochs: usize,
    /// Epochs for each fitness evaluation.
    pub fitness_epochs: usize,
    /// Share of the training split held out for fitness.
    pub validation_fraction: f64,
    pub swarm: SwarmConfig,
    pub seed: u64,
}

impl Default for HyperSearchSpec {
    fn default() -> Self {
        Self {
            lr_min: 1e-4,
            lr_max: 1e-1,
            min_layers: 1,
            max_layers: 4,
            d_model_menu: vec![16, 32, 64, 128, 256, 512],
            head_menu: vec![1, 2, 4, 8],
            ff_multiplier: 4,
            batch_size: 32,
            epochs: 50,
            fitness_epochs: 10,
            validation_fraction: 0.25,
            swarm: SwarmConfig::default(),
            seed: 0,
        }
    }
}

/// Names of the search dimensions, also used as search-log columns.
pub const DIM_NAMES: [&str; 4] = ["lr", "n_layers", "d_model", "n_heads"];

impl HyperSearchSpec {
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lr_min > 0.0 && self.lr_min < self.lr_max && self.lr_max.is_finite()) {
            out.push(format!(
                "learning-rate range must satisfy 0 < lr_min < lr_max, got [{}, {}]",
                self.lr_min, self.lr_max
            ));
        }
        if self.min_layers < 1 || self.min_layers > self.max_layers {
            out.push(format!(
                "layer range must satisfy 1 <= min_layers <= max_layers, got [{}, {}]",
                self.min_layers, self.max_layers
            ));
        }
        for (name, menu) in [("d_model_menu", &self.d_model_menu), ("head_menu", &self.head_menu)] {
            if menu.len() < 2 {
                out.push(format!("{name} needs at least 2 entries"));
            }
            if menu.contains(&0) {
                out.push(format!("{name} entries must be positive"));
            }
        }
        if let Some(&smallest) = self.head_menu.iter().filter(|&&h| h > 0).min() {
            if let Some(d) = self.d_model_menu.iter().find(|&&d| d > 0 && d % smallest != 0) {
                out.push(format!(
                    "smallest head count {smallest} must divide every d_model, but not {d}"
                ));
            }
        }
        for (name, v) in [
            ("ff_multiplier", self.ff_multiplier),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("fitness_epochs", self.fitness_epochs),
        ] {
            if v < 1 {
                out.push(format!("{name} must be at least 1"));
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            out.push(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        out.extend(self.swarm.issues().into_iter().map(|s| format!("swarm: {s}")));
        out
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SearchError::InvalidSpec(issues))
        }
    }

    pub fn space(&self) -> Result<SearchSpace, SearchError> {
        Ok(SearchSpace::new(vec![
            Dimension::continuous(DIM_NAMES[0], self.lr_min, self.lr_max).log(),
            Dimension::integer(DIM_NAMES[1], self.min_layers as i64, self.max_layers as i64),
            Dimension::integer(DIM_NAMES[2], 0, self.d_model_menu.len() as i64 - 1),
            Dimension::integer(DIM_NAMES[3], 0, self.head_menu.len() as i64 - 1),
        ])?)
    }

    /// Turn decoded dimension values into concrete hyperparameters, repairing
    /// the head count when it does not divide `d_model`.
    pub fn hyper(&self, decoded: &Decoded) -> Hyper {
        let index = |name: &str, len: usize| (decoded.get(name).unwrap_or(0.0) as usize).min(len - 1);
        let d_model = self.d_model_menu[index(DIM_NAMES[2], self.d_model_menu.len())];
        let requested_heads = self.head_menu[index(DIM_NAMES[3], self.head_menu.len())];
        Hyper {
            learning_rate: decoded.get(DIM_NAMES[0]).unwrap_or(self.lr_min),
            n_layers: decoded.get(DIM_NAMES[1]).unwrap_or(self.min_layers as f64) as usize,
            d_model,
            requested_heads,
            n_heads: repair_heads(d_model, requested_heads, &self.head_menu),
        }
    }

    pub fn transformer_config(&self, h: &Hyper, epochs: usize, seed: u64) -> TransformerConfig {
        TransformerConfig {
            n_layers: h.n_layers,
            d_model: h.d_model,
            n_heads: h.n_heads,
            d_ff: self.ff_multiplier * h.d_model,
            learning_rate: h.learning_rate,
            batch_size: self.batch_size,
            epochs,
            seed,
        }
    }

    /// Seed of the fitness run for one particle at one iteration.
    pub fn particle_seed(&self, iteration: usize, particle: usize) -> u64 {
        derive_seed(self.seed, &[stream::SEARCH, iteration as u64, particle as u64])
    }

    pub fn final_seed(&self) -> u64 {
        derive_seed(self.seed, &[stream::FINAL_TRAIN])
    }
}

/// Largest menu head count that divides `d_model` and does not exceed the
/// requested one. Falls back to 1 when no menu entry qualifies.
pub fn repair_heads(d_model: usize, requested: usize, menu: &[usize]) -> usize {
    menu.iter()
        .copied()
        .filter(|&h| h > 0 && h <= requested && d_model.is_multiple_of(h))
        .max()
        .unwrap_or(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub learning_rate: f64,
    pub n_layers: usize,
    pub d_model: usize,
    pub requested_heads: usize,
    /// Head count after repair; always divides `d_model`.
    pub n_heads: usize,
}

/// One fitness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub iteration: usize,
    pub particle: usize,
    pub position: Vec<f64>,
    pub hyper: Hyper,
    /// Validation accuracy; 0 when training failed.
    pub accuracy: f64,
    pub seconds: f64,
    pub failure: Option<String>,
}

/// What a fitness evaluation runs. The default trains a transformer; tests
/// substitute cheap analytic stand-ins.
pub trait FitnessTrainer: Sync {
    fn validation_accuracy(
        &self,
        cfg: &TransformerConfig,
        train: &Dataset,
        val: &Dataset,
    ) -> Result<f64, TrainError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TransformerFitness;

impl FitnessTrainer for TransformerFitness {
    fn validation_accuracy(
        &self,
        cfg: &TransformerConfig,
        train: &Dataset,
        val: &Dataset,
    ) -> Result<f64, TrainError> {
        let (params, _) = transformer::train(cfg, train, None)?;
        Ok(transformer::accuracy(&params, val))
    }
}

/// A result recovered from an earlier, interrupted run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedEvaluation {
    pub accuracy: f64,
    pub seconds: f64,
}

type IterationHook<'a> = Box<dyn FnMut(usize, &[LogEntry]) -> std::io::Result<()> + 'a>;

#[derive(Default)]
pub struct SearchOptions<'a> {
    /// Evaluations keyed by `(iteration, particle)` that are reused instead of
    /// retrained. Because the swarm is seeded, replaying them reproduces the
    /// interrupted trajectory exactly.
    pub resume: HashMap<(usize, usize), CachedEvaluation>,
    /// Called after every iteration with its entries in particle order.
    pub on_iteration: Option<IterationHook<'a>>,
    /// Rows for the final retrain; `train` when unset. Passing the training
    /// split with the validation slice folded back in uses every row.
    pub final_train: Option<&'a Dataset>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Best configuration, set up for the full-length final retrain.
    pub best_config: TransformerConfig,
    pub best_hyper: Hyper,
    /// Validation accuracy of the best configuration.
    pub best_fitness: f64,
    /// Best-so-far validation accuracy after each iteration.
    pub history: Vec<f64>,
    /// Every evaluation, ordered by iteration then particle.
    pub log: Vec<LogEntry>,
    /// Fitness evaluations, including ones replayed from a resume cache.
    pub evaluations: usize,
}

pub struct SearchOutcome {
    pub result: SearchResult,
    pub model: ModelParams,
    pub final_report: TrainReport,
}

/// Run the swarm and retrain the winner for the full epoch budget.
pub fn search(spec: &HyperSearchSpec, train: &Dataset, val: &Dataset) -> Result<SearchOutcome, SearchError> {
    search_with(spec, train, val, &TransformerFitness, SearchOptions::default())
}

pub fn search_with<T: FitnessTrainer>(
    spec: &HyperSearchSpec,
    train: &Dataset,
    val: &Dataset,
    trainer: &T,
    options: SearchOptions<'_>,
) -> Result<SearchOutcome, SearchError> {
    let final_train = options.final_train.unwrap_or(train);
    let result = run_swarm(spec, train, val, trainer, options)?;
    let (model, final_report) = transformer::train(&result.best_config, final_train, None)?;
    Ok(SearchOutcome {
        result,
        model,
        final_report,
    })
}

/// The swarm phase alone, without the final retrain.
pub fn run_swarm<T: FitnessTrainer>(
    spec: &HyperSearchSpec,
    train: &Dataset,
    val: &Dataset,
    trainer: &T,
    options: SearchOptions<'_>,
) -> Result<SearchResult, SearchError> {
    spec.validate()?;
    for d in [train, val] {
        if d.n_rows() == 0 {
            return Err(DataError::EmptyDataset.into());
        }
    }
    if let Some(class) = train.class_counts().iter().position(|&c| c == 0) {
        return Err(DataError::ClassTooSmall { class: class as u8 }.into());
    }
    if train.n_features() != val.n_features() {
        return Err(DataError::Shape("training and validation widths differ".into()).into());
    }
    let space = spec.space()?;
    let SearchOptions {
        resume,
        mut on_iteration,
        ..
    } = options;
    let pending: Mutex<Vec<LogEntry>> = Mutex::new(Vec::new());

    let objective = |c: &Candidate<'_>| -> Result<f64, ObjectiveError> {
        let hyper = spec.hyper(&c.values);
        let (accuracy, seconds, failure) = match resume.get(&(c.iteration, c.particle)) {
            Some(cached) => (cached.accuracy, cached.seconds, None),
            None => {
                let cfg = spec.transformer_config(&hyper, spec.fitness_epochs, spec.particle_seed(c.iteration, c.particle));
                let start = Instant::now();
                let outcome = trainer.validation_accuracy(&cfg, train, val);
                let seconds = start.elapsed().as_secs_f64();
                match outcome {
                    Ok(a) if a.is_finite() => (a, seconds, None),
                    Ok(a) => (0.0, seconds, Some(format!("non-finite accuracy {a}"))),
                    Err(e) => (0.0, seconds, Some(e.to_string())),
                }
            }
        };
        pending.lock().expect("log lock").push(LogEntry {
            iteration: c.iteration,
            particle: c.particle,
            position: c.position.to_vec(),
            hyper,
            accuracy,
            seconds,
            failure,
        });
        Ok(-accuracy)
    };

    let mut log: Vec<LogEntry> = Vec::new();
    let mut hook_error: Option<std::io::Error> = None;
    let outcome = optimize_with(&space, objective, &spec.swarm, |record| {
        let mut batch = std::mem::take(&mut *pending.lock().expect("log lock"));
        batch.sort_by_key(|e| e.particle);
        if hook_error.is_none() {
            if let Some(hook) = on_iteration.as_mut() {
                if let Err(e) = hook(record.iteration, &batch) {
                    hook_error = Some(e);
                }
            }
        }
        log.extend(batch);
    });
    if let Some(e) = hook_error {
        return Err(e.into());
    }
    let outcome = outcome?;

    // The first maximum in log order is the swarm's gbest: bests only move on
    // strict improvement, scanned in the same order.
    let best = log
        .iter()
        .fold(None::<&LogEntry>, |acc, e| match acc {
            Some(b) if b.accuracy >= e.accuracy => Some(b),
            _ => Some(e),
        })
        .expect("swarm evaluates at least one particle");
    debug_assert_eq!(-best.accuracy, outcome.gbest_fitness);
    Ok(SearchResult {
        best_config: spec.transformer_config(&best.hyper, spec.epochs, spec.final_seed()),
        best_hyper: best.hyper,
        best_fitness: best.accuracy,
        history: outcome.history.iter().map(|f| -f).collect(),
        evaluations: outcome.evaluations,
        log: log.clone(),
    })
}

/// Search-log columns.
pub const LOG_HEADER: [&str; 8] = ["iteration", "particle", "lr", "n_layers", "d_model", "n_heads", "fitness", "seconds"];

/// Marker line written after each completed iteration.
pub const COMPLETED_MARKER: &str = "# completed_iteration=";

/// Append one iteration to a search log: its rows, a comment per failed
/// training, then the completion marker. With `record_timings` off the
/// `seconds` column is 0 so logs are byte-reproducible.
pub fn write_log_iteration<W: Write>(
    mut sink: W,
    iteration: usize,
    entries: &[LogEntry],
    record_timings: bool,
) -> std::io::Result<()> {
    for e in entries {
        let seconds = if record_timings { e.seconds } else { 0.0 };
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{}",
            e.iteration, e.particle, e.hyper.learning_rate, e.hyper.n_layers, e.hyper.d_model, e.hyper.n_heads, e.accuracy, seconds
        )?;
        if let Some(f) = &e.failure {
            writeln!(sink, "# failed iteration={} particle={}: {}", e.iteration, e.particle, f.replace('\n', " "))?;
        }
    }
    writeln!(sink, "{COMPLETED_MARKER}{iteration}")?;
    sink.flush()
}

/// Evaluations recovered from a search log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResumeState {
    /// Comment lines before the header (run provenance).
    pub preamble: Vec<String>,
    pub cache: HashMap<(usize, usize), CachedEvaluation>,
    pub last_completed: Option<usize>,
}

/// Read a possibly truncated log. Rows after the last completion marker are
/// dropped.
pub fn read_search_log<R: BufRead>(source: R) -> Result<ResumeState, SearchError> {
    let mut state = ResumeState::default();
    let mut pending: Vec<((usize, usize), CachedEvaluation)> = Vec::new();
    let mut header_seen = false;
    for line in source.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix(COMPLETED_MARKER) {
            let k: usize = rest
                .trim()
                .parse()
                .map_err(|_| SearchError::Log(format!("bad completion marker {line:?}")))?;
            state.cache.extend(pending.drain(..));
            state.last_completed = Some(k);
            continue;
        }
        if line.starts_with('#') {
            if !header_seen {
                state.preamble.push(line);
            }
            continue;
        }
        if !header_seen {
            if line.split(',').ne(LOG_HEADER) {
                return Err(SearchError::Log(format!("unexpected header {line:?}")));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != LOG_HEADER.len() {
            // A row cut off mid-write.
            continue;
        }
        let parse_err = || SearchError::Log(format!("bad row {line:?}"));
        let iteration = cells[0].parse().map_err(|_| parse_err())?;
        let particle = cells[1].parse().map_err(|_| parse_err())?;
        let accuracy = cells[6].parse().map_err(|_| parse_err())?;
        let seconds = cells[7].parse().map_err(|_| parse_err())?;
        pending.push(((iteration, particle), CachedEvaluation { accuracy, seconds }));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthesize_dataset;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct LrCloseness {
        calls: AtomicUsize,
    }

    impl FitnessTrainer for LrCloseness {
        fn validation_accuracy(&self, cfg: &TransformerConfig, _: &Dataset, _: &Dataset) -> Result<f64, TrainError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(1.0 / (1.0 + (cfg.learning_rate.log10() + 2.0).powi(2)))
        }
    }

    struct AlwaysDiverges;

    impl FitnessTrainer for AlwaysDiverges {
        fn validation_accuracy(&self, _: &TransformerConfig, _: &Dataset, _: &Dataset) -> Result<f64, TrainError> {
            Err(TrainError::NonFiniteLoss)
        }
    }

    fn tiny_spec(particles: usize, iters: usize) -> HyperSearchSpec {
        HyperSearchSpec {
            d_model_menu: vec![4, 8],
            head_menu: vec![1, 2],
            max_layers: 2,
            batch_size: 16,
            epochs: 2,
            fitness_epochs: 1,
            swarm: SwarmConfig {
                n_particles: particles,
                max_iters: iters,
                seed: 9,
                ..SwarmConfig::default()
            },
            seed: 4,
            ..HyperSearchSpec::default()
        }
    }

    fn data() -> (Dataset, Dataset) {
        (synthesize_dataset(60, 0.0, 1).unwrap(), synthesize_dataset(30, 0.0, 2).unwrap())
    }

    #[test]
    fn head_repair() {
        let menu = [1, 2, 4, 8];
        assert_eq!(repair_heads(64, 8, &menu), 8);
        for h in menu {
            assert_eq!(repair_heads(16, h, &menu), h);
        }
        assert_eq!(repair_heads(12, 8, &menu), 4);
        assert_eq!(repair_heads(6, 4, &[2, 4]), 2);
    }

    #[test]
    fn default_spec_is_valid() {
        assert!(HyperSearchSpec::default().issues().is_empty());
    }

    #[test]
    fn invalid_spec_lists_every_problem() {
        let spec = HyperSearchSpec {
            lr_min: 0.0,
            d_model_menu: vec![16],
            head_menu: vec![3, 4],
            fitness_epochs: 0,
            validation_fraction: 1.0,
            ..HyperSearchSpec::default()
        };
        let issues = spec.issues();
        assert_eq!(issues.len(), 5, "{issues:?}");
    }

    #[test]
    fn corners_decode_to_menu_ends() {
        let spec = HyperSearchSpec::default();
        let space = spec.space().unwrap();
        let lo = spec.hyper(&space.decode(&[0.0; 4]));
        assert_eq!((lo.learning_rate, lo.n_layers, lo.d_model, lo.n_heads), (1e-4, 1, 16, 1));
        let hi = spec.hyper(&space.decode(&[1.0; 4]));
        assert_eq!((hi.n_layers, hi.d_model, hi.n_heads), (4, 512, 8));
        assert!((hi.learning_rate - 0.1).abs() < 1e-15);
    }

    #[test]
    fn one_particle_one_iteration_accounting() {
        let (train, val) = data();
        let stub = LrCloseness { calls: AtomicUsize::new(0) };
        let out = search_with(&tiny_spec(1, 1), &train, &val, &stub, SearchOptions::default()).unwrap();
        assert_eq!(stub.calls.load(Ordering::SeqCst), 2);
        assert_eq!(out.result.evaluations, 2);
        assert_eq!(out.result.log.len(), 2);
        assert_eq!(out.final_report.epoch_loss.len(), 2);
    }

    #[test]
    fn stub_objective_finds_learning_rate() {
        let (train, val) = data();
        let stub = LrCloseness { calls: AtomicUsize::new(0) };
        let r = run_swarm(&tiny_spec(10, 20), &train, &val, &stub, SearchOptions::default()).unwrap();
        let lr = r.best_config.learning_rate;
        assert!((lr.log10() + 2.0).abs() < 1.0, "lr {lr}");
        let max = r.log.iter().map(|e| e.accuracy).fold(f64::MIN, f64::max);
        assert_eq!(r.best_fitness, max);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(r.evaluations, 10 * 21);
    }

    #[test]
    fn failures_score_zero_and_continue() {
        let (train, val) = data();
        let r = run_swarm(&tiny_spec(3, 2), &train, &val, &AlwaysDiverges, SearchOptions::default()).unwrap();
        assert_eq!(r.log.len(), 9);
        assert!(r.log.iter().all(|e| e.accuracy == 0.0 && e.failure.is_some()));
    }

    #[test]
    fn log_round_trip_and_resume_replay() {
        let (train, val) = data();
        let spec = tiny_spec(3, 3);
        let stub = LrCloseness { calls: AtomicUsize::new(0) };
        let mut text = format!("# provenance\n{}\n", LOG_HEADER.join(","));
        let mut buf = Vec::new();
        let options = SearchOptions {
            on_iteration: Some(Box::new(|k, entries: &[LogEntry]| write_log_iteration(&mut buf, k, entries, true))),
            ..SearchOptions::default()
        };
        let full = run_swarm(&spec, &train, &val, &stub, options).unwrap();
        text.push_str(std::str::from_utf8(&buf).unwrap());

        // Cut the log in the middle of iteration 2.
        let cut = text.find(&format!("{COMPLETED_MARKER}1\n")).unwrap() + COMPLETED_MARKER.len() + 2;
        let truncated = format!("{}2,0,0.01,1", &text[..cut]);
        let state = read_search_log(truncated.as_bytes()).unwrap();
        assert_eq!(state.last_completed, Some(1));
        assert_eq!(state.cache.len(), 6);
        assert_eq!(state.preamble, vec!["# provenance".to_string()]);

        let fresh = LrCloseness { calls: AtomicUsize::new(0) };
        let resumed = run_swarm(
            &spec,
            &train,
            &val,
            &fresh,
            SearchOptions {
                resume: state.cache,
                ..SearchOptions::default()
            },
        )
        .unwrap();
        assert_eq!(fresh.calls.load(Ordering::SeqCst), 6);
        let strip = |log: &[LogEntry]| -> Vec<(usize, usize, Vec<f64>, f64)> {
            log.iter().map(|e| (e.iteration, e.particle, e.position.clone(), e.accuracy)).collect()
        };
        assert_eq!(strip(&resumed.log), strip(&full.log));
        assert_eq!(resumed.log[..6], full.log[..6]);
        assert_eq!(resumed.best_config, full.best_config);
    }

    #[test]
    fn real_transformer_search_runs() {
        let (train, val) = data();
        let out = search(&tiny_spec(2, 1), &train, &val).unwrap();
        assert_eq!(out.result.log.len(), 4);
        for e in &out.result.log {
            assert_eq!(e.hyper.d_model % e.hyper.n_heads, 0);
            assert!((0.0..=1.0).contains(&e.accuracy));
        }
        assert!(out.model.is_finite());
    }
}
