//! Principal angles between estimated structures and the true score spaces.

use hnn::hierarchy::PenaltySpec;
use hnn::linalg::{estimate_noise_mad, DEFAULT_ANGLE_TOL, DEFAULT_RANK_TOL};
use hnn::refit::refit;
use hnn::simgen::{generate, ScoreScheme, SimulationConfig};
use hnn::solver::{fit_hnn, SolverConfig};
use hnn::subspaces::{compare_angles, decompose};

fn main() -> hnn::error::Result<()> {
    let mut cfg = SimulationConfig::two_view(ScoreScheme::Orthogonal, 5);
    cfg.n = 60;
    cfg.p = vec![20, 20];
    cfg.snr = 4.0;
    let truth = generate(&cfg)?;
    let sigma = estimate_noise_mad(&truth.data.views()[0])?;
    let lambda = 0.6 * sigma * ((cfg.n as f64).sqrt() + (20f64).sqrt());
    let fit = fit_hnn(&truth.data, &PenaltySpec::uniform(2, lambda)?, &SolverConfig::default())?;
    let refitted = refit(&truth.data, &fit, DEFAULT_RANK_TOL)?;
    let decomp = decompose(&refitted.estimate, DEFAULT_RANK_TOL, DEFAULT_ANGLE_TOL)?;

    for (s, estimated) in decomp.structures() {
        let Some(true_scores) = truth.scores.get(&s) else { continue };
        let cosines = compare_angles(estimated, true_scores)?;
        let degrees: Vec<String> = cosines.iter().map(|c| format!("{:.2}", c.clamp(-1.0, 1.0).acos().to_degrees())).collect();
        println!(
            "{s}: estimated dim {}, true dim {}, angles (deg) [{}]",
            estimated.dim(),
            true_scores.dim(),
            degrees.join(", ")
        );
    }
    Ok(())
}
