use serde::{Deserialize, Serialize};

use super::{
    calibrated_bound, check_grid, column, fit_median_rate, fmt_list, nonincreasing, prefix_trials, Check,
    ExperimentResult, PointStats,
};
use crate::error::Result;
use crate::map::MapModel;
use crate::measure::UlamMeasure;
use crate::observables::{empirical_w1_observable, QUANTILE_ATOMS};
use crate::rng::{derive_seed, StreamId};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Slack allowed between adjacent medians in the monotonicity check.
    pub monotone_slack: f64,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 1_000, 10_000, 100_000],
            trials: 500,
            monotone_slack: 0.0,
        }
    }
}

/// Distribution of `W1(E_n(x), mu)` over `x ~ mu`, for every `n`.
pub fn run_empirical_measure(
    model: &MapModel,
    measure: &UlamMeasure,
    config: &EmpiricalConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    check_grid(&config.n_grid)?;
    let seed = derive_seed(seed, StreamId::EMPIRICAL.0);
    // the target does not depend on n
    let k = empirical_w1_observable(measure, 1);
    let table = prefix_trials(model, measure, &config.n_grid, config.trials, seed, |_, z| {
        vec![k.distance_to_target(z)]
    });
    let cols: Vec<Vec<f64>> = table.iter().map(|rows| column(rows, 0)).collect();
    let points = config
        .n_grid
        .iter()
        .zip(&cols)
        .map(|(&n, c)| PointStats::from_values(n, None, "kappa", c))
        .collect();
    let med: Vec<f64> = cols.iter().map(|c| median(c)).collect();
    let scale: Vec<f64> = config.n_grid.iter().map(|&n| (n as f64).powf(-0.25)).collect();
    let fit = fit_median_rate("kappa", &config.n_grid, &cols, seed);
    let beta = fit.as_ref().map_or(f64::NAN, |f| -f.exponent);
    // quantile discretization of mu moves W1 by at most 1/(2m)
    let disc = 0.5 / QUANTILE_ATOMS as f64;
    let checks = vec![
        Check::new(
            "median_nonincreasing",
            nonincreasing(&med, config.monotone_slack),
            format!("medians {}", fmt_list(&med)),
        ),
        calibrated_bound("median_below_calibrated_n^-1/4", &med, &scale, disc),
        Check::new("fitted_rate_at_least_1/4", beta >= 0.25, format!("fitted beta = {beta:.4}")),
    ];
    Ok(ExperimentResult {
        experiment: "empirical_measure".into(),
        alpha: model.alpha(),
        seed,
        points,
        fits: fit.into_iter().collect(),
        checks,
    })
}
