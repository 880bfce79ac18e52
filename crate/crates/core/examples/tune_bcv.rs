//! Select the penalty by bi-cross-validation with the one-standard-error rule.

use hnn::simgen::{generate, preprocess, ScoreScheme, SimulationConfig};
use hnn::tuning::{tune, TuneConfig};

fn main() -> hnn::error::Result<()> {
    let mut cfg = SimulationConfig::two_view(ScoreScheme::Orthogonal, 8);
    cfg.n = 80;
    cfg.p = vec![40, 40];
    cfg.snr = 3.0;
    cfg.center_scores = true;
    let truth = generate(&cfg)?;
    let data = preprocess(&truth.data)?;

    let result = tune(&data, &TuneConfig { points_per_axis: 5, n_splits: 2, seed: 8, ..TuneConfig::default() })?;
    println!("{} grid points, level maxima {:.4?}", result.grid.len(), result.grid.maxima);
    for (r, report) in result.reports.iter().enumerate() {
        let best = report.avg_err.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "split {r}: min average error {best:.4}, selected {:.4?} with total rank {} and view ranks {:?}",
            report.selected_point, report.selected_total_rank, report.selected_per_view_ranks
        );
    }
    let c = &result.consensus;
    println!("consensus point {:.4?}, total rank {}, per view {:?}", c.point, c.ranks.total, c.ranks.per_view);
    println!("refit ranks {:?}", result.refit.per_view_rank);
    Ok(())
}
