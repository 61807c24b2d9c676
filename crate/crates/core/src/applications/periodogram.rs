use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    calibrated_bound, check_grid, column, fit_median_rate, fmt_list, nonincreasing, prefix_trials, Check,
    ExperimentResult, PointStats,
};
use crate::error::Result;
use crate::map::MapModel;
use crate::measure::{CovarianceSeries, UlamMeasure};
use crate::observables::{
    autocovariances, integrated_periodogram, periodogram_on_grid, periodogram_sup_observable, Observable,
    ScalarFn, OMEGA_INTERVALS,
};
use crate::rng::{derive_seed, StreamId};
use crate::stats::{mean, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodogramConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub omega_intervals: usize,
}

impl Default for PeriodogramConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![256, 1024, 4096],
            trials: 500,
            omega_intervals: OMEGA_INTERVALS,
        }
    }
}

/// Mean of `(sup_w |J_n(w) - J(w)|)^2` over `x ~ mu`, for every `n`.
/// `v` must be centered and `series` must be its autocovariance.
pub fn run_periodogram(
    model: &MapModel,
    measure: &UlamMeasure,
    v: &ScalarFn,
    series: &CovarianceSeries,
    config: &PeriodogramConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    check_grid(&config.n_grid)?;
    let seed = derive_seed(seed, StreamId::PERIODOGRAM.0);
    let obs = config
        .n_grid
        .iter()
        .map(|&n| periodogram_sup_observable(v.clone(), n, config.omega_intervals, series))
        .collect::<Result<Vec<_>>>()?;
    let table = prefix_trials(model, measure, &config.n_grid, config.trials, seed, |i, z| {
        let k = obs[i].evaluate(z);
        vec![k * k]
    });
    let cols: Vec<Vec<f64>> = table.iter().map(|rows| column(rows, 0)).collect();
    let points = config
        .n_grid
        .iter()
        .zip(&cols)
        .map(|(&n, c)| PointStats::from_values(n, None, "sup_sq", c))
        .collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let medians: Vec<f64> = cols.iter().map(|c| median(c)).collect();
    let scale: Vec<f64> = config
        .n_grid
        .iter()
        .map(|&n| (1.0 + (n as f64).ln()).powf(4.0 / 3.0) * (n as f64).powf(-2.0 / 3.0))
        .collect();
    let parseval = parseval_check(model, measure, v, 64, config.omega_intervals, seed);
    let checks = vec![
        Check::new(
            "mean_sup_sq_decreasing",
            means.windows(2).all(|w| w[1] < w[0]),
            format!("means {}", fmt_list(&means)),
        ),
        calibrated_bound("mean_sup_sq_below_calibrated_rate", &means, &scale, 0.0),
        Check::new(
            "median_nonincreasing_10pct",
            nonincreasing(&medians, 0.1),
            format!("medians {}", fmt_list(&medians)),
        ),
        Check::new(
            "parseval_n64",
            parseval.error <= 1e-8 && parseval.endpoint_error <= 1e-8,
            format!("{parseval:?}"),
        ),
    ];
    Ok(ExperimentResult {
        experiment: "periodogram".into(),
        alpha: model.alpha(),
        seed,
        points,
        fits: fit_median_rate("sup_sq", &config.n_grid, &cols, seed).into_iter().collect(),
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsevalCheck {
    pub n: usize,
    /// Mean of `I_n` over the frequency grid.
    pub mean_periodogram: f64,
    /// `(1/n) sum_j v(z_j)^2`.
    pub second_moment: f64,
    pub error: f64,
    /// `|J_n(2 pi) - 2 pi mean I_n|`.
    pub endpoint_error: f64,
}

/// Parseval identity on one orbit of length `n <= grid`.
pub fn parseval_check(
    model: &MapModel,
    measure: &UlamMeasure,
    v: &ScalarFn,
    n: usize,
    grid: usize,
    seed: u64,
) -> ParsevalCheck {
    let x0 = measure.sample_mu(1, derive_seed(seed, n as u64))[0];
    let mut z = vec![0.0; n];
    model.fill_orbit(x0, &mut z);
    let x: Vec<f64> = z.iter().map(|&p| v.eval(p)).collect();
    let i = periodogram_on_grid(&x, grid);
    let mean_periodogram = mean(&i);
    let second_moment = x.iter().map(|a| a * a).sum::<f64>() / n as f64;
    let j = integrated_periodogram(&autocovariances(&x), grid);
    ParsevalCheck {
        n,
        mean_periodogram,
        second_moment,
        error: (mean_periodogram - second_moment).abs(),
        endpoint_error: (j[grid] - 2.0 * PI * mean_periodogram).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_ulam, covariance_series, GridScheme};

    #[test]
    fn zero_observable_has_zero_deviation() {
        let model = MapModel::new(0.1).unwrap();
        let (m, op) = build_ulam(&model, 512, GridScheme::MarkovRefined).unwrap();
        let zero = ScalarFn::zero();
        let s = covariance_series(&op, &m, &vec![0.0; 512], &vec![0.0; 512], 20).unwrap();
        let cfg = PeriodogramConfig {
            n_grid: vec![32, 64],
            trials: 100,
            omega_intervals: 128,
        };
        let r = run_periodogram(&model, &m, &zero, &s, &cfg, 1).unwrap();
        assert!(r.points.iter().all(|p| p.max == 0.0));
    }

    #[test]
    fn parseval_holds_at_64() {
        let model = MapModel::new(0.1).unwrap();
        let (m, _) = build_ulam(&model, 512, GridScheme::MarkovRefined).unwrap();
        let v = ScalarFn::identity().centered(&m);
        let p = parseval_check(&model, &m, &v, 64, OMEGA_INTERVALS, 5);
        assert!(p.error < 1e-8 && p.endpoint_error < 1e-8, "{p:?}");
    }
}
