use serde::{Deserialize, Serialize};

use super::{check_grid, column, fit_median_rate, fmt_list, prefix_trials, Check, ExperimentResult, PointStats};
use crate::error::{Error, Result};
use crate::map::MapModel;
use crate::measure::UlamMeasure;
use crate::observables::ScalarFn;
use crate::rng::{derive_seed, StreamId};
use crate::stats::{median, stable_sum};
use crate::wasserstein::{w1_to_gaussian, EmpiricalDistribution, GaussianTarget, Support};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscltConfig {
    pub n_grid: Vec<usize>,
    /// Number of orbits.
    pub trials: usize,
    /// Required median distance at the largest `n`.
    pub kappa_max: f64,
    /// Required relative decrease of the median from the first to the last `n`.
    pub min_decrease: f64,
}

impl Default for AscltConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![1_000, 10_000, 100_000],
            trials: 10,
            kappa_max: 0.1,
            min_decrease: 0.3,
        }
    }
}

/// Harmonic weights `(1/k) / D_n`, `D_n = sum_{k<=n} 1/k`.
pub fn asclt_weights(n: usize) -> Vec<f64> {
    let d = stable_sum((1..=n).map(|k| 1.0 / k as f64));
    (1..=n).map(|k| 1.0 / (k as f64 * d)).collect()
}

/// `A_n = sum_k w_k delta_{S_k v / sqrt k}` for the orbit prefix `z`.
fn log_average(v: &ScalarFn, z: &[f64]) -> Result<EmpiricalDistribution> {
    let w = asclt_weights(z.len());
    let mut s = 0.0;
    let atoms = z
        .iter()
        .zip(w)
        .enumerate()
        .map(|(k, (&x, wk))| {
            s += v.eval(x);
            (s / ((k + 1) as f64).sqrt(), wk)
        })
        .collect();
    EmpiricalDistribution::new(atoms, Support::RealLine)
}

/// W1 distance between the log-averaged empirical law of normalized
/// Birkhoff sums and `N(0, sigma2)`, along orbits drawn from `measure`.
pub fn run_asclt(
    model: &MapModel,
    measure: &UlamMeasure,
    v: &ScalarFn,
    sigma2: f64,
    config: &AscltConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    check_grid(&config.n_grid)?;
    if model.alpha() >= 0.5 {
        return Err(Error::Domain {
            what: "alpha",
            value: model.alpha(),
            domain: "(0, 1/2) for the CLT",
        });
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    let target = GaussianTarget::centered(sigma2)?;
    let seed = derive_seed(seed, StreamId::ASCLT.0);
    let table = prefix_trials(model, measure, &config.n_grid, config.trials, seed, |_, z| {
        let a = log_average(v, z).expect("harmonic weights are normalized");
        vec![w1_to_gaussian(&a, &target).expect("positive variance")]
    });
    let cols: Vec<Vec<f64>> = table.iter().map(|rows| column(rows, 0)).collect();
    let points: Vec<PointStats> = config
        .n_grid
        .iter()
        .zip(&cols)
        .map(|(&n, c)| PointStats::from_values(n, None, "kappa", c))
        .collect();
    let med: Vec<f64> = cols.iter().map(|c| median(c)).collect();
    let last = *med.last().expect("nonempty");
    let decrease = 1.0 - last / med[0];
    let weight_err = config
        .n_grid
        .iter()
        .map(|&n| (stable_sum(asclt_weights(n)) - 1.0).abs())
        .fold(0.0, f64::max);
    let checks = vec![
        Check::new("weights_sum_to_one", weight_err <= 1e-12, format!("max |sum w - 1| = {weight_err:e}")),
        Check::new(
            "median_kappa_small",
            last <= config.kappa_max,
            format!("median kappa at n = {} is {last:.4} (limit {})", config.n_grid.last().unwrap(), config.kappa_max),
        ),
        Check::new(
            "median_kappa_decreases",
            config.n_grid.len() > 1 && decrease >= config.min_decrease,
            format!("medians {} decrease by {:.1}% (need {:.0}%)", fmt_list(&med), 100.0 * decrease, 100.0 * config.min_decrease),
        ),
    ];
    Ok(ExperimentResult {
        experiment: "asclt".into(),
        alpha: model.alpha(),
        seed,
        points,
        fits: fit_median_rate("kappa", &config.n_grid, &cols, seed).into_iter().collect(),
        checks,
    })
}
