//! Particle swarm on the 5-D sphere function with a mixed search space.
//!
//! cargo run --example swarm_sphere

use swarmformer::pso::{optimize, Candidate, Dimension, ObjectiveError, SearchSpace, SwarmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = SearchSpace::new((0..5).map(|i| Dimension::continuous(format!("x{i}"), -5.0, 5.0)).collect())?;
    let sphere = |c: &Candidate<'_>| -> Result<f64, ObjectiveError> { Ok(c.values.iter().map(|(_, x)| x * x).sum()) };
    let cfg = SwarmConfig {
        seed: 1,
        ..SwarmConfig::default()
    };
    let result = optimize(&space, sphere, &cfg)?;
    for (i, f) in result.history.iter().enumerate().step_by(10) {
        println!("iteration {i:>3}  gbest {f:.3e}");
    }
    println!("best {:?} after {} evaluations", result.gbest_decoded.values(), result.evaluations);

    // Integer and log-scaled dimensions decode from the same unit cube.
    let mixed = SearchSpace::new(vec![
        Dimension::continuous("lr", 1e-4, 1e-1).log(),
        Dimension::integer("layers", 1, 6),
    ])?;
    let target = |c: &Candidate<'_>| -> Result<f64, ObjectiveError> {
        let lr = c.values.get("lr").unwrap();
        let layers = c.values.get("layers").unwrap();
        Ok((lr.log10() + 2.0).powi(2) + (layers - 3.0).abs())
    };
    let cfg = SwarmConfig {
        n_particles: 10,
        max_iters: 30,
        seed: 2,
        ..SwarmConfig::default()
    };
    let result = optimize(&mixed, target, &cfg)?;
    for (name, v) in result.gbest_decoded.iter() {
        println!("{name} = {v}");
    }
    Ok(())
}
