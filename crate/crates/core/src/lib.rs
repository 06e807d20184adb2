pub mod baselines;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod pixmap;
pub mod pso;
pub mod rng;
pub mod search;
pub mod transformer;

mod linalg;
