//! Generate a two-view data set and report its structure ranks and noise.

use hnn::hierarchy::SubsetLattice;
use hnn::linalg::{singular_values, DEFAULT_ANGLE_TOL, DEFAULT_RANK_TOL};
use hnn::simgen::{generate, ScoreScheme, SimulationConfig};

fn main() -> hnn::error::Result<()> {
    let cfg = SimulationConfig::two_view(ScoreScheme::NonOrthogonal, 11);
    let truth = generate(&cfg)?;
    println!("{} views, n = {}, p = {:?}", cfg.views(), cfg.n, cfg.p);

    let profile = truth.rank_profile(DEFAULT_RANK_TOL, DEFAULT_ANGLE_TOL)?;
    for s in SubsetLattice::new(cfg.views())?.iter() {
        println!("  rank of {s}: {}", profile.get(s));
    }
    for (d, signal) in truth.signals.iter().enumerate() {
        let top: Vec<String> = singular_values(signal)?.iter().take(6).map(|v| format!("{v:.3}")).collect();
        println!("  view {} noise sd {:.4}, top singular values [{}]", d + 1, truth.noise_sd[d], top.join(", "));
    }
    Ok(())
}
