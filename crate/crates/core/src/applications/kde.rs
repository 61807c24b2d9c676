use serde::{Deserialize, Serialize};

use super::{check_grid, column, fit_median_rate, fmt_list, prefix_trials, Check, ExperimentResult, PointStats};
use crate::concentration::CALIBRATION_SAFETY;
use crate::error::{invalid, Result};
use crate::map::MapModel;
use crate::measure::UlamMeasure;
use crate::observables::{kde_tv_observable, Kernel, KdeTvObservable};
use crate::rng::{derive_seed, StreamId};
use crate::stats::{mean, median, variance};

/// `a_n = scale * n^-exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandwidthSchedule {
    pub scale: f64,
    pub exponent: f64,
}

impl Default for BandwidthSchedule {
    fn default() -> Self {
        Self {
            scale: 1.0,
            exponent: 0.25,
        }
    }
}

impl BandwidthSchedule {
    pub fn bandwidth(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }

    /// Along the grid `a_n` must decrease towards 0 and `n a_n` must
    /// increase, with every `a_n` in `(0, 1)`.
    pub fn validate(&self, n_grid: &[usize]) -> Result<()> {
        if !(self.scale > 0.0) || !(self.exponent > 0.0 && self.exponent < 1.0) {
            return Err(invalid(format!(
                "bandwidth schedule needs scale > 0 and exponent in (0, 1) so that a_n -> 0 and n a_n -> infinity; got scale {}, exponent {}",
                self.scale, self.exponent
            )));
        }
        for &n in n_grid {
            let a = self.bandwidth(n);
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid(format!("a_n = {a} at n = {n} is outside (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdeConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub kernel: Kernel,
    pub schedule: BandwidthSchedule,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![1_000, 10_000, 100_000],
            trials: 200,
            kernel: Kernel::Triangular,
            schedule: BandwidthSchedule::default(),
        }
    }
}

/// Distribution of `TV(h_n(x), h)` over `x ~ mu`, for every `(n, a_n)`.
pub fn run_kde(model: &MapModel, measure: &UlamMeasure, config: &KdeConfig, seed: u64) -> Result<ExperimentResult> {
    check_grid(&config.n_grid)?;
    config.schedule.validate(&config.n_grid)?;
    let seed = derive_seed(seed, StreamId::KDE.0);
    let obs: Vec<KdeTvObservable> = config
        .n_grid
        .iter()
        .map(|&n| kde_tv_observable(measure, config.kernel, config.schedule.bandwidth(n), n))
        .collect::<Result<_>>()?;
    let table = prefix_trials(model, measure, &config.n_grid, config.trials, seed, |i, z| {
        let h = obs[i].density(z);
        vec![obs[i].tv(z), (h.integral() - 1.0).abs()]
    });
    let alpha = model.alpha();
    let mut points = Vec::new();
    let mut cols = Vec::new();
    let mut worst_mass = 0.0f64;
    for (i, &n) in config.n_grid.iter().enumerate() {
        let tv = column(&table[i], 0);
        worst_mass = worst_mass.max(column(&table[i], 1).into_iter().fold(0.0, f64::max));
        let a = config.schedule.bandwidth(n);
        points.push(PointStats::from_values(n, Some(("a_n".into(), a)), "tv", &tv));
        cols.push(tv);
    }
    let med: Vec<f64> = cols.iter().map(|c| median(c)).collect();

    // Deviation tail at twice the bias scale a^{1-alpha} + 1/(sqrt(n) a^2)
    // against C / (t^2 n a^2), with C calibrated from the variance at the
    // smallest n.
    let na2 = |n: usize| n as f64 * config.schedule.bandwidth(n).powi(2);
    let c = CALIBRATION_SAFETY * variance(&cols[0]) * na2(config.n_grid[0]);
    let mut tail_ok = true;
    let mut rows = Vec::new();
    for (i, &n) in config.n_grid.iter().enumerate() {
        let a = config.schedule.bandwidth(n);
        let t = 2.0 * (a.powf(1.0 - alpha) + 1.0 / ((n as f64).sqrt() * a * a));
        let m = mean(&cols[i]);
        let emp = cols[i].iter().filter(|&&v| (v - m).abs() >= t).count() as f64 / cols[i].len() as f64;
        let bound = c / (t * t * na2(n));
        tail_ok &= emp <= bound;
        rows.push(format!("n={n}: P={emp:.3e} <= {bound:.3e} at t={t:.3e}"));
    }
    let checks = vec![
        Check::new("density_integrates_to_one", worst_mass <= 1e-8, format!("max |int h_n - 1| = {worst_mass:e}")),
        Check::new(
            "median_tv_decreasing",
            med.windows(2).all(|w| w[1] < w[0]),
            format!("medians {}", fmt_list(&med)),
        ),
        Check::new("tail_below_calibrated_bound", tail_ok, rows.join("; ")),
    ];
    Ok(ExperimentResult {
        experiment: "kde".into(),
        alpha,
        seed,
        points,
        fits: fit_median_rate("tv", &config.n_grid, &cols, seed).into_iter().collect(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_preconditions() {
        let grid = [100, 1000];
        assert!(BandwidthSchedule::default().validate(&grid).is_ok());
        let flat = BandwidthSchedule { scale: 0.1, exponent: 0.0 };
        assert!(flat.validate(&grid).is_err());
        // n a_n decreasing
        let steep = BandwidthSchedule { scale: 0.5, exponent: 1.2 };
        assert!(steep.validate(&grid).is_err());
        let wide = BandwidthSchedule { scale: 5.0, exponent: 0.25 };
        assert!(wide.validate(&grid).is_err());
    }
}
