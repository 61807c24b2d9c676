//! End-to-end statistical experiments on orbits: almost-sure CLT, kernel
//! density estimation, empirical measure, integrated periodogram and
//! shadowing.
//!
//! Every experiment draws `trials` starting points from the invariant
//! measure, runs one orbit of the largest length per trial and evaluates its
//! statistic on every prefix in the `n` grid. Bound checks calibrate their
//! constant at the smallest `n` and are one-sided.

mod asclt;
mod empirical;
mod kde;
mod periodogram;
mod shadowing;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use asclt::{asclt_weights, run_asclt, AscltConfig};
pub use empirical::{run_empirical_measure, EmpiricalConfig};
pub use kde::{run_kde, BandwidthSchedule, KdeConfig};
pub use periodogram::{parseval_check, run_periodogram, ParsevalCheck, PeriodogramConfig};
pub use shadowing::{run_shadowing, ShadowingConfig};

use crate::concentration::csv_err;
use crate::error::{invalid, Result};
use crate::map::MapModel;
use crate::measure::UlamMeasure;
use crate::rng::{stream, StreamId};
use crate::stats::{fit_power_law, mean, quantile_sorted};

/// Below this many trials a point is flagged as small-sample.
pub const SMALL_SAMPLE: usize = 100;
/// Bootstrap resamples for fitted-rate intervals.
pub const FIT_RESAMPLES: usize = 200;

/// Summary of one statistic at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub n: usize,
    /// Name and value of the secondary parameter (`a_n`, `eps`), if any.
    pub param: Option<(String, f64)>,
    pub statistic: String,
    pub trials: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
    pub small_sample: bool,
}

impl PointStats {
    pub fn from_values(n: usize, param: Option<(String, f64)>, statistic: &str, values: &[f64]) -> Self {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            n,
            param,
            statistic: statistic.to_string(),
            trials: s.len(),
            mean: mean(&s),
            median: quantile_sorted(&s, 0.5),
            q25: quantile_sorted(&s, 0.25),
            q75: quantile_sorted(&s, 0.75),
            q90: quantile_sorted(&s, 0.9),
            min: s.first().copied().unwrap_or(f64::NAN),
            max: s.last().copied().unwrap_or(f64::NAN),
            small_sample: s.len() < SMALL_SAMPLE,
        }
    }
}

/// Power law `c n^-beta` fitted to a per-`n` summary, with a bootstrap
/// interval for the exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub statistic: String,
    /// Fitted exponent of `n` (negative for decay).
    pub exponent: f64,
    pub prefactor: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub alpha: f64,
    pub seed: u64,
    pub points: Vec<PointStats>,
    pub fits: Vec<RateFit>,
    pub checks: Vec<Check>,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Points of one statistic, in grid order.
    pub fn series(&self, statistic: &str) -> Vec<&PointStats> {
        self.points.iter().filter(|p| p.statistic == statistic).collect()
    }
}

pub const POINT_COLUMNS: [&str; 15] = [
    "experiment", "alpha", "n", "param", "param_value", "statistic", "trials", "mean", "median",
    "q25", "q75", "q90", "min", "max", "small_sample",
];

/// One CSV row per grid point and statistic.
pub fn write_points_csv<W: Write>(out: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POINT_COLUMNS).map_err(csv_err)?;
    for r in results {
        for p in &r.points {
            let (pname, pval) = match &p.param {
                Some((k, v)) => (k.clone(), v.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                r.experiment.clone(),
                r.alpha.to_string(),
                p.n.to_string(),
                pname,
                pval,
                p.statistic.clone(),
                p.trials.to_string(),
                p.mean.to_string(),
                p.median.to_string(),
                p.q25.to_string(),
                p.q75.to_string(),
                p.q90.to_string(),
                p.min.to_string(),
                p.max.to_string(),
                p.small_sample.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(invalid("empty n grid"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(invalid("n grid must be positive and strictly increasing"));
    }
    Ok(())
}

/// Runs one orbit of length `max(n_grid)` per trial and applies `stat` to
/// every prefix. Output is indexed `[n][trial][k]`.
pub(crate) fn prefix_trials<F>(
    model: &MapModel,
    measure: &UlamMeasure,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
    stat: F,
) -> Vec<Vec<Vec<f64>>>
where
    F: Fn(usize, &[f64]) -> Vec<f64> + Sync,
{
    let n_max = *n_grid.last().expect("nonempty grid");
    let starts = measure.sample_mu(trials, seed);
    let per_trial: Vec<Vec<Vec<f64>>> = starts
        .par_iter()
        .map_init(
            || vec![0.0; n_max],
            |orbit, &x0| {
                model.fill_orbit(x0, orbit);
                n_grid
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| stat(i, &orbit[..n]))
                    .collect()
            },
        )
        .collect();
    (0..n_grid.len())
        .map(|i| per_trial.iter().map(|t| t[i].clone()).collect())
        .collect()
}

/// Column `k` of a `[trial][k]` table.
pub(crate) fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// Fits `median ~ c n^e` and bootstraps the exponent by resampling trials
/// independently at each `n`.
pub(crate) fn fit_median_rate(
    statistic: &str,
    n_grid: &[usize],
    columns: &[Vec<f64>],
    seed: u64,
) -> Option<RateFit> {
    let t: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let med: Vec<f64> = columns.iter().map(|c| crate::stats::median(c)).collect();
    let fit = fit_power_law(&t, &med)?;
    let mut exps = Vec::with_capacity(FIT_RESAMPLES);
    let mut rng = stream(seed, StreamId::BOOTSTRAP, 1);
    let mut draw = Vec::new();
    for _ in 0..FIT_RESAMPLES {
        let meds: Vec<f64> = columns
            .iter()
            .map(|c| {
                draw.clear();
                draw.extend((0..c.len()).map(|_| c[rand::Rng::random_range(&mut rng, 0..c.len())]));
                crate::stats::median(&draw)
            })
            .collect();
        if let Some(f) = fit_power_law(&t, &meds) {
            exps.push(f.exponent);
        }
    }
    exps.sort_by(f64::total_cmp);
    let (ci_lo, ci_hi) = if exps.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile_sorted(&exps, 0.025), quantile_sorted(&exps, 0.975))
    };
    Some(RateFit {
        statistic: statistic.to_string(),
        exponent: fit.exponent,
        prefactor: fit.prefactor,
        ci_lo,
        ci_hi,
    })
}

/// `values[i+1] <= values[i] * (1 + slack)` for all adjacent pairs.
pub(crate) fn nonincreasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

pub(crate) fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Calibrates `c = value[0] / scale[0]` and checks
/// `value[i] <= c scale[i] + slack` at every point.
pub(crate) fn calibrated_bound(name: &str, values: &[f64], scale: &[f64], slack: f64) -> Check {
    let c = values[0] / scale[0];
    let ok = values.iter().zip(scale).all(|(v, s)| *v <= c * s + slack);
    let bounds: Vec<f64> = scale.iter().map(|s| c * s).collect();
    Check::new(
        name,
        ok,
        format!("values {} vs calibrated bound {} (C = {c:.4e})", fmt_list(values), fmt_list(&bounds)),
    )
}
