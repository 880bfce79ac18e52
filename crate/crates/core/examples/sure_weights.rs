//! Noise estimates, SURE thresholds and the per-level weights that reduce the
//! penalty to one parameter per level.

use hnn::simgen::{generate, preprocess, ScoreScheme, SimulationConfig};
use hnn::tuning::{compute_weights, estimate_noise, hyperplane_load, level_maxima};

fn main() -> hnn::error::Result<()> {
    let mut cfg = SimulationConfig::three_view(ScoreScheme::Orthogonal, 2);
    cfg.n = 50;
    cfg.p = vec![30, 30, 30];
    let truth = generate(&cfg)?;
    let data = preprocess(&truth.data)?;

    let noise = estimate_noise(&data)?;
    let weights = compute_weights(&data, &noise)?;
    for w in &weights.subsets {
        println!(
            "{}: noise sd {:.4}, SURE lambda {:.4}, weight {:.4}",
            w.subset, w.noise_sd, w.sure_lambda, w.weight
        );
    }

    let maxima = level_maxima(&data, &weights)?;
    println!("level maxima {maxima:.4?}");
    let point: Vec<f64> = maxima.iter().map(|m| m / 6.0).collect();
    println!("point {point:.4?} has hyperplane load {:.3}", hyperplane_load(&point, &maxima));
    for (s, lambda) in weights.penalty(&point)?.iter() {
        println!("  lambda{s} = {lambda:.4}");
    }
    Ok(())
}
