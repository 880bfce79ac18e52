//! Fit the hierarchical nuclear norm penalty at a uniform level and undo the
//! shrinkage with the column-space refit.

use hnn::hierarchy::PenaltySpec;
use hnn::linalg::{estimate_noise_mad, singular_values, DEFAULT_RANK_TOL};
use hnn::refit::refit;
use hnn::simgen::{generate, preprocess, scaled_frobenius_error, ScoreScheme, SimulationConfig};
use hnn::solver::{fit_hnn, SolverConfig};

fn main() -> hnn::error::Result<()> {
    let mut cfg = SimulationConfig::two_view(ScoreScheme::Orthogonal, 3);
    cfg.n = 60;
    cfg.p = vec![20, 20];
    cfg.snr = 3.0;
    let truth = generate(&cfg)?;
    let data = truth.data.clone();

    // About half the noise edge per penalty term.
    let sigma = estimate_noise_mad(&data.views()[0])?;
    let lambda = 0.6 * sigma * ((cfg.n as f64).sqrt() + (20f64).sqrt());
    println!("noise sd estimate {sigma:.4}, lambda {lambda:.4}");
    let spec = PenaltySpec::uniform(2, lambda)?;
    let fit = fit_hnn(&data, &spec, &SolverConfig::default())?;
    println!(
        "converged {} after {} sweeps, objective {:.4}",
        fit.converged, fit.iters, fit.final_objective
    );
    let refitted = refit(&data, &fit, DEFAULT_RANK_TOL)?;
    println!("refit ranks {:?}", refitted.per_view_rank);

    let top = |m| -> hnn::error::Result<Vec<String>> {
        Ok(singular_values(m)?.iter().take(4).map(|v| format!("{v:.2}")).collect())
    };
    for d in 0..2 {
        println!("view {}", d + 1);
        println!("  truth      {:?}", top(&truth.signals[d])?);
        println!("  penalized  {:?}", top(&fit.estimate[d])?);
        println!("  refit      {:?}", top(&refitted.estimate[d])?);
    }
    println!(
        "scaled error: penalized {:.4}, refit {:.4}",
        scaled_frobenius_error(&truth.signals, &fit.estimate)?,
        scaled_frobenius_error(&truth.signals, &refitted.estimate)?
    );

    // Standardized views behave the same way.
    let scaled = preprocess(&data)?;
    let sigma = estimate_noise_mad(&scaled.views()[0])?;
    let lambda = 0.6 * sigma * ((cfg.n as f64).sqrt() + (20f64).sqrt());
    let fit = fit_hnn(&scaled, &PenaltySpec::uniform(2, lambda)?, &SolverConfig::default())?;
    println!("standardized fit ranks {:?}", refit(&scaled, &fit, DEFAULT_RANK_TOL)?.per_view_rank);
    Ok(())
}
