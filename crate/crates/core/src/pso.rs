//! Global-best particle swarm optimization over bounded mixed
//! continuous/integer spaces.
//!
//! Particles live in the unit hypercube `[0, 1]^D`; a [`SearchSpace`] decodes
//! a position into named values only when the objective is evaluated, so one
//! velocity limit works for every dimension. The optimizer minimizes.
//!
//! Each iteration draws the random factors for every particle serially, then
//! evaluates all particles (in parallel when a rayon pool with more than one
//! thread is active), then folds personal and global bests in particle-index
//! order. Results therefore do not depend on evaluation scheduling.

use std::error::Error as StdError;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{seeded, SeededRng};

pub type ObjectiveError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum PsoError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid swarm configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("objective failed for particle {particle} at iteration {iteration}: {source}")]
    Objective {
        iteration: usize,
        particle: usize,
        /// gbest fitness per completed iteration before the failure.
        history: Vec<f64>,
        #[source]
        source: ObjectiveError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub kind: DimKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub log_scale: bool,
}

impl Dimension {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Continuous,
            lower,
            upper,
            log_scale: false,
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self {
            name: name.into(),
            kind: DimKind::Integer,
            lower: lower as f64,
            upper: upper as f64,
            log_scale: false,
        }
    }

    /// Map geometrically instead of affinely.
    pub fn log(mut self) -> Self {
        self.log_scale = true;
        self
    }

    /// Value at unit coordinate `u`; integers round half-up. The bounds are
    /// hit exactly at `u = 0` and `u = 1`.
    pub fn decode(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let raw = if u == 0.0 {
            self.lower
        } else if u == 1.0 {
            self.upper
        } else if self.log_scale {
            let (lo, hi) = (self.lower.ln(), self.upper.ln());
            (lo + u * (hi - lo)).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        };
        let value = match self.kind {
            DimKind::Continuous => raw,
            DimKind::Integer => (raw + 0.5).floor(),
        };
        value.clamp(self.lower, self.upper)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(format!("{}: bounds must be finite", self.name));
        }
        if self.lower >= self.upper {
            return Err(format!(
                "{}: lower bound {} must be below upper bound {}",
                self.name, self.lower, self.upper
            ));
        }
        if self.log_scale && self.lower <= 0.0 {
            return Err(format!("{}: log scale needs a positive lower bound", self.name));
        }
        if self.kind == DimKind::Integer
            && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0)
        {
            return Err(format!("{}: integer bounds must be whole numbers", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    dims: Vec<Dimension>,
}

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self, PsoError> {
        if dims.is_empty() {
            return Err(PsoError::InvalidSpace("no dimensions".into()));
        }
        for d in &dims {
            d.check().map_err(PsoError::InvalidSpace)?;
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn decode(&self, position: &[f64]) -> Decoded {
        assert_eq!(position.len(), self.dims.len(), "position has wrong dimension");
        Decoded(
            self.dims
                .iter()
                .zip(position)
                .map(|(d, &u)| (d.name.clone(), d.decode(u)))
                .collect(),
        )
    }
}

/// Decoded values in dimension order, addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded(Vec<(String, f64)>);

impl Decoded {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|&(_, v)| v).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(n, v)| (n.as_str(), *v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub max_iters: usize,
    pub w_start: f64,
    pub w_end: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity limit as a fraction of each dimension's range.
    pub vmax_fraction: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 30,
            max_iters: 100,
            w_start: 0.9,
            w_end: 0.4,
            c1: 2.0,
            c2: 2.0,
            vmax_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    /// Every violated constraint, as readable messages.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_particles < 1 {
            out.push("n_particles must be at least 1".to_string());
        }
        if self.max_iters < 1 {
            out.push("max_iters must be at least 1".to_string());
        }
        if !(self.w_end > 0.0 && self.w_end <= self.w_start) {
            out.push(format!(
                "inertia must satisfy 0 < w_end <= w_start (got {} and {})",
                self.w_end, self.w_start
            ));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            out.push("c1 and c2 must be non-negative".to_string());
        }
        if !(self.vmax_fraction > 0.0 && self.vmax_fraction <= 1.0) {
            out.push(format!(
                "vmax_fraction must lie in (0, 1], got {}",
                self.vmax_fraction
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PsoError::InvalidConfig(issues))
        }
    }

    /// Linearly decaying inertia weight for step `iter`.
    pub fn inertia(&self, iter: usize) -> f64 {
        if self.max_iters <= 1 {
            return self.w_start;
        }
        self.w_start - (self.w_start - self.w_end) * iter as f64 / (self.max_iters - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: f64,
}

/// What the objective sees for one evaluation.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    /// 0 for the initial evaluation, `k + 1` after step `k`.
    pub iteration: usize,
    pub particle: usize,
    pub position: &'a [f64],
    pub values: Decoded,
}

/// Summary handed to observers after each evaluated iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord<'a> {
    pub iteration: usize,
    pub fitness: &'a [f64],
    pub gbest_fitness: f64,
    pub gbest_position: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: f64,
    pub evaluations: usize,
    space: SearchSpace,
    cfg: SwarmConfig,
    rng: SeededRng,
}

impl Swarm {
    /// Random positions in `[0, 1]^D` and velocities in `[−vmax, vmax]`.
    /// Nothing is evaluated yet; every fitness starts at `+∞`.
    pub fn new(space: &SearchSpace, cfg: &SwarmConfig) -> Result<Self, PsoError> {
        cfg.validate()?;
        let mut rng = seeded(cfg.seed);
        let dim = space.len();
        let vmax = cfg.vmax_fraction;
        let particles: Vec<Particle> = (0..cfg.n_particles)
            .map(|_| {
                let position: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                let velocity = (0..dim).map(|_| rng.gen_range(-vmax..=vmax)).collect();
                Particle {
                    pbest_position: position.clone(),
                    position,
                    velocity,
                    pbest_fitness: f64::INFINITY,
                }
            })
            .collect();
        Ok(Self {
            gbest_position: particles[0].position.clone(),
            gbest_fitness: f64::INFINITY,
            particles,
            evaluations: 0,
            space: space.clone(),
            cfg: cfg.clone(),
            rng,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.cfg
    }

    /// Evaluate the initial positions and seed pbest/gbest from them.
    pub fn evaluate_initial<F>(&mut self, objective: &F) -> Result<Vec<f64>, PsoError>
    where
        F: Fn(&Candidate<'_>) -> Result<f64, ObjectiveError> + Sync,
    {
        let fitness = self.evaluate_all(objective, 0)?;
        self.absorb(&fitness);
        Ok(fitness)
    }

    /// One synchronous velocity/position update followed by evaluation.
    ///
    /// `v ← w·v + c1·r1⊙(pbest − x) + c2·r2⊙(gbest − x)`, clamped to
    /// `±vmax`; `x ← clamp(x + v, 0, 1)`. Bests move only on strict
    /// improvement.
    pub fn step<F>(&mut self, objective: &F, iter_index: usize) -> Result<Vec<f64>, PsoError>
    where
        F: Fn(&Candidate<'_>) -> Result<f64, ObjectiveError> + Sync,
    {
        let w = self.cfg.inertia(iter_index);
        let (c1, c2, vmax) = (self.cfg.c1, self.cfg.c2, self.cfg.vmax_fraction);
        let gbest = self.gbest_position.clone();
        for p in &mut self.particles {
            for d in 0..p.position.len() {
                let r1: f64 = self.rng.gen();
                let r2: f64 = self.rng.gen();
                let x = p.position[d];
                let v = w * p.velocity[d]
                    + c1 * r1 * (p.pbest_position[d] - x)
                    + c2 * r2 * (gbest[d] - x);
                let v = v.clamp(-vmax, vmax);
                p.velocity[d] = v;
                p.position[d] = (x + v).clamp(0.0, 1.0);
            }
        }
        let fitness = self.evaluate_all(objective, iter_index + 1)?;
        self.absorb(&fitness);
        Ok(fitness)
    }

    fn evaluate_all<F>(&mut self, objective: &F, iteration: usize) -> Result<Vec<f64>, PsoError>
    where
        F: Fn(&Candidate<'_>) -> Result<f64, ObjectiveError> + Sync,
    {
        let space = &self.space;
        let results: Vec<Result<f64, ObjectiveError>> = self
            .particles
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                objective(&Candidate {
                    iteration,
                    particle: i,
                    position: &p.position,
                    values: space.decode(&p.position),
                })
            })
            .collect();
        self.evaluations += results.len();
        results
            .into_iter()
            .enumerate()
            .map(|(particle, r)| match r {
                Ok(f) if f.is_nan() => Err(PsoError::Objective {
                    iteration,
                    particle,
                    history: Vec::new(),
                    source: "objective returned NaN".into(),
                }),
                Ok(f) => Ok(f),
                Err(source) => Err(PsoError::Objective {
                    iteration,
                    particle,
                    history: Vec::new(),
                    source,
                }),
            })
            .collect()
    }

    fn absorb(&mut self, fitness: &[f64]) {
        for (p, &f) in self.particles.iter_mut().zip(fitness) {
            if f < p.pbest_fitness {
                p.pbest_fitness = f;
                p.pbest_position.clone_from(&p.position);
            }
        }
        for p in &self.particles {
            if p.pbest_fitness < self.gbest_fitness {
                self.gbest_fitness = p.pbest_fitness;
                self.gbest_position.clone_from(&p.pbest_position);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub gbest_position: Vec<f64>,
    pub gbest_decoded: Decoded,
    pub gbest_fitness: f64,
    /// gbest fitness after the initial evaluation and after every step.
    pub history: Vec<f64>,
    /// gbest position at each history entry.
    pub gbest_trace: Vec<Vec<f64>>,
    pub evaluations: usize,
}

impl OptimizationResult {
    /// Convergence CSV: `iteration, gbest_fitness`, then one column per dimension
    /// holding the decoded gbest value.
    pub fn write_history_csv<W: Write>(&self, space: &SearchSpace, sink: W) -> Result<(), PsoError> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["iteration".to_string(), "gbest_fitness".to_string()];
        header.extend(space.dims().iter().map(|d| d.name.clone()));
        w.write_record(&header).map_err(std::io::Error::from)?;
        for (i, (f, pos)) in self.history.iter().zip(&self.gbest_trace).enumerate() {
            let mut rec = vec![i.to_string(), f.to_string()];
            rec.extend(space.decode(pos).values().iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Initialize, then run `max_iters` steps.
pub fn optimize<F>(space: &SearchSpace, objective: F, cfg: &SwarmConfig) -> Result<OptimizationResult, PsoError>
where
    F: Fn(&Candidate<'_>) -> Result<f64, ObjectiveError> + Sync,
{
    optimize_with(space, objective, cfg, |_| {})
}

/// [`optimize`] with a callback after every evaluated iteration.
pub fn optimize_with<F, O>(
    space: &SearchSpace,
    objective: F,
    cfg: &SwarmConfig,
    mut observer: O,
) -> Result<OptimizationResult, PsoError>
where
    F: Fn(&Candidate<'_>) -> Result<f64, ObjectiveError> + Sync,
    O: FnMut(&IterationRecord<'_>),
{
    let mut swarm = Swarm::new(space, cfg)?;
    let mut history = Vec::with_capacity(cfg.max_iters + 1);
    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let with_history = |e: PsoError, history: &[f64]| match e {
        PsoError::Objective {
            iteration,
            particle,
            source,
            ..
        } => PsoError::Objective {
            iteration,
            particle,
            history: history.to_vec(),
            source,
        },
        other => other,
    };

    for iteration in 0..=cfg.max_iters {
        let fitness = if iteration == 0 {
            swarm.evaluate_initial(&objective)
        } else {
            swarm.step(&objective, iteration - 1)
        }
        .map_err(|e| with_history(e, &history))?;
        history.push(swarm.gbest_fitness);
        trace.push(swarm.gbest_position.clone());
        observer(&IterationRecord {
            iteration,
            fitness: &fitness,
            gbest_fitness: swarm.gbest_fitness,
            gbest_position: &swarm.gbest_position,
        });
    }

    Ok(OptimizationResult {
        gbest_decoded: space.decode(&swarm.gbest_position),
        gbest_position: swarm.gbest_position,
        gbest_fitness: swarm.gbest_fitness,
        history,
        gbest_trace: trace,
        evaluations: swarm.evaluations,
    })
}
