//! Monte Carlo check of the variance inequality
//! `Var(K(x, Tx, ..., T^{n-1}x)) <= D sum_j Lip_j(K)^2`
//! and of its Chebyshev tail corollary.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::map::MapModel;
use crate::measure::{covariance_series, CovarianceSeries, UlamMeasure, UlamOperator};
use crate::observables::{
    birkhoff_observable, certify_lipschitz, empirical_w1_observable, kde_tv_observable,
    periodogram_sup_observable, shadowing_observables, Certificate, IntervalUnion, Kernel,
    Normalization, Observable, ScalarFn, SharedObservable, OMEGA_INTERVALS,
};
use crate::rng::{derive_seed, stream, StreamId};
use crate::stats::{bootstrap_variance_ci, mean, variance};

/// Upper end `4 - sqrt(15)` of the range of `alpha` where the inequality is
/// proven.
pub fn proven_alpha_limit() -> f64 {
    4.0 - 15f64.sqrt()
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const CI_LEVEL: f64 = 0.95;
pub const MIN_TRIALS: usize = 100;
/// Factor applied to the largest Birkhoff ratio when calibrating `D`.
pub const CALIBRATION_SAFETY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Proven,
    /// Outside `alpha < 4 - sqrt(15)`; verdicts are informative only.
    Exploratory,
}

impl Regime {
    pub fn of(alpha: f64) -> Self {
        if alpha < proven_alpha_limit() {
            Regime::Proven
        } else {
            Regime::Exploratory
        }
    }
}

/// Evaluates every observable on `trials` orbit segments of length `n`
/// started from points drawn from `measure`. Returns one column per
/// observable, rows in trial order regardless of scheduling.
pub fn evaluate_on_orbits(
    observables: &[&dyn Observable],
    model: &MapModel,
    measure: &UlamMeasure,
    n: usize,
    trials: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let starts = measure.sample_mu(trials, seed);
    let rows: Vec<Vec<f64>> = starts
        .par_iter()
        .map_init(
            || vec![0.0; n],
            |orbit, &x0| {
                model.fill_orbit(x0, orbit);
                observables.iter().map(|k| k.evaluate(orbit)).collect()
            },
        )
        .collect();
    (0..observables.len())
        .map(|i| rows.iter().map(|r| r[i]).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub mean: f64,
    pub variance: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: usize,
}

/// Unbiased variance with a percentile bootstrap interval.
pub fn variance_of(values: &[f64], seed: u64) -> VarianceEstimate {
    let mut rng = stream(seed, StreamId::BOOTSTRAP, 0);
    let (ci_lo, ci_hi) = bootstrap_variance_ci(values, BOOTSTRAP_RESAMPLES, CI_LEVEL, &mut rng);
    VarianceEstimate {
        mean: mean(values),
        variance: variance(values),
        ci_lo,
        ci_hi,
        trials: values.len(),
    }
}

pub fn estimate_variance(
    obs: &dyn Observable,
    model: &MapModel,
    measure: &UlamMeasure,
    trials: usize,
    seed: u64,
) -> Result<VarianceEstimate> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("trials = {trials}, need at least {MIN_TRIALS}")));
    }
    let values = evaluate_on_orbits(&[obs], model, measure, obs.arity(), trials, seed)
        .pop()
        .unwrap_or_default();
    Ok(variance_of(&values, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    /// Fraction of trials with `|K - mean| >= t`.
    pub empirical: f64,
    /// `D sum Lip_j^2 / t^2`.
    pub bound: f64,
    /// True when `bound >= 1`, so nothing is checked.
    pub vacuous: bool,
    pub passed: bool,
}

pub fn tail_table(values: &[f64], t_grid: &[f64], d_hat: f64, lip_sq_sum: f64) -> Vec<TailRow> {
    let m = mean(values);
    t_grid
        .iter()
        .map(|&t| {
            let hits = values.iter().filter(|&&v| (v - m).abs() >= t).count();
            let empirical = hits as f64 / values.len() as f64;
            let bound = d_hat * lip_sq_sum / (t * t);
            let vacuous = bound >= 1.0;
            TailRow {
                t,
                empirical,
                bound,
                vacuous,
                passed: vacuous || empirical <= bound,
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn chebyshev_tail_check(
    obs: &dyn Observable,
    model: &MapModel,
    measure: &UlamMeasure,
    trials: usize,
    t_grid: &[f64],
    d_hat: f64,
    seed: u64,
) -> Result<Vec<TailRow>> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("trials = {trials}, need at least {MIN_TRIALS}")));
    }
    let values = evaluate_on_orbits(&[obs], model, measure, obs.arity(), trials, seed)
        .pop()
        .unwrap_or_default();
    Ok(tail_table(&values, t_grid, d_hat, obs.lip_sq_sum()))
}

/// Multiples of the sample standard deviation used as tail thresholds.
pub const TAIL_MULTIPLES: [f64; 8] = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub label: String,
    pub alpha: f64,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub variance: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub lip_sq_sum: f64,
    /// `variance / lip_sq_sum`.
    pub ratio: f64,
    pub tail: Vec<TailRow>,
}

impl ConcentrationReport {
    pub fn new(label: String, alpha: f64, n: usize, est: VarianceEstimate, lip_sq_sum: f64) -> Self {
        Self {
            label,
            alpha,
            n,
            trials: est.trials,
            mean: est.mean,
            variance: est.variance,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            lip_sq_sum,
            ratio: est.variance / lip_sq_sum,
            tail: Vec::new(),
        }
    }
}

/// `CALIBRATION_SAFETY` times the largest ratio among reports whose label
/// starts with `family`, at the smallest `n` present for that family.
pub fn calibrate_d_hat(reports: &[ConcentrationReport], family: &str) -> Result<f64> {
    let fam: Vec<&ConcentrationReport> =
        reports.iter().filter(|r| r.label.starts_with(family)).collect();
    let n0 = fam
        .iter()
        .map(|r| r.n)
        .min()
        .ok_or_else(|| invalid(format!("no '{family}' report to calibrate on")))?;
    let worst = fam
        .iter()
        .filter(|r| r.n == n0)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    Ok(CALIBRATION_SAFETY * worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: String,
    pub n: usize,
    pub upper_ci: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub alpha: f64,
    pub d_hat: f64,
    pub regime: Regime,
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
}

/// Checks `upper CI <= d_hat * sum Lip_j^2` for every report.
pub fn verify_inequality(reports: &[ConcentrationReport], d_hat: f64) -> Result<Verification> {
    let Some(first) = reports.first() else {
        return Err(invalid("no reports to verify"));
    };
    if !(d_hat > 0.0 && d_hat.is_finite()) {
        return Err(invalid(format!("D = {d_hat} must be positive and finite")));
    }
    if reports.iter().any(|r| r.alpha != first.alpha) {
        return Err(invalid("reports mix different alpha"));
    }
    let regime = Regime::of(first.alpha);
    if regime == Regime::Exploratory {
        log::warn!(
            "alpha = {} is outside the proven range alpha < {:.4}; verdicts are exploratory",
            first.alpha,
            proven_alpha_limit()
        );
    }
    let verdicts: Vec<Verdict> = reports
        .iter()
        .map(|r| {
            let bound = d_hat * r.lip_sq_sum;
            Verdict {
                label: r.label.clone(),
                n: r.n,
                upper_ci: r.ci_hi,
                bound,
                passed: r.ci_hi <= bound,
            }
        })
        .collect();
    Ok(Verification {
        alpha: first.alpha,
        d_hat,
        regime,
        all_passed: verdicts.iter().all(|v| v.passed),
        verdicts,
    })
}

/// Parameters of the standard observable battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub shadow_set: Vec<(f64, f64)>,
    pub shadow_candidates: usize,
    pub kernel: Kernel,
    /// Bandwidth `a_n = n^-kde_exponent`.
    pub kde_exponent: f64,
    pub omega_intervals: usize,
    pub covariance_lags: usize,
    pub certify_samples: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            shadow_set: vec![(0.4, 0.6)],
            shadow_candidates: 64,
            kernel: Kernel::Triangular,
            kde_exponent: 0.25,
            omega_intervals: OMEGA_INTERVALS,
            covariance_lags: 1000,
            certify_samples: 40,
        }
    }
}

/// Everything the battery needs that does not depend on `n`.
pub struct BatteryContext<'a> {
    model: &'a MapModel,
    measure: &'a UlamMeasure,
    config: BatteryConfig,
    v: ScalarFn,
    series: CovarianceSeries,
    set: IntervalUnion,
}

impl<'a> BatteryContext<'a> {
    pub fn new(
        model: &'a MapModel,
        measure: &'a UlamMeasure,
        op: &UlamOperator,
        config: BatteryConfig,
    ) -> Result<Self> {
        let v = ScalarFn::identity().centered(measure);
        let grid_v = v.project(measure.grid());
        let series = covariance_series(op, measure, &grid_v, &grid_v, config.covariance_lags)?;
        let set = IntervalUnion::new(config.shadow_set.clone())?;
        if set.mass(measure) <= 0.0 {
            return Err(invalid("shadowing set has zero mass"));
        }
        Ok(Self {
            model,
            measure,
            config,
            v,
            series,
            set,
        })
    }

    /// The five families at orbit length `n`, each certified before use.
    pub fn observables(&self, n: usize, seed: u64) -> Result<(Vec<SharedObservable>, Vec<Certificate>)> {
        let c = &self.config;
        let bandwidth = (n as f64).powf(-c.kde_exponent);
        let (za, _) = shadowing_observables(&self.set, n, 0.1, c.shadow_candidates, self.model)?;
        let members: Vec<SharedObservable> = vec![
            std::sync::Arc::new(birkhoff_observable(self.v.clone(), n, Normalization::SqrtN)),
            std::sync::Arc::new(empirical_w1_observable(self.measure, n)),
            std::sync::Arc::new(kde_tv_observable(self.measure, c.kernel, bandwidth, n)?),
            std::sync::Arc::new(periodogram_sup_observable(
                self.v.clone(),
                n,
                c.omega_intervals,
                &self.series,
            )?),
            std::sync::Arc::new(za),
        ];
        let mut certs = Vec::with_capacity(members.len());
        for (i, k) in members.iter().enumerate() {
            let cert = certify_lipschitz(k.as_ref(), c.certify_samples, derive_seed(seed, i as u64));
            certs.push(cert.into_result()?);
        }
        Ok((members, certs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryOutcome {
    pub alpha: f64,
    pub regime: Regime,
    pub reports: Vec<ConcentrationReport>,
    pub certificates: Vec<Certificate>,
    pub verification: Verification,
    /// Largest over smallest `sqrt n` Birkhoff ratio across `n`.
    pub birkhoff_spread: f64,
    /// Every non-vacuous tail row is below its bound.
    pub tails_passed: bool,
}

/// Runs the battery at every `n`, calibrates `D` on the Birkhoff member at
/// the smallest `n`, then checks variances and tails against it.
pub fn run_battery(
    ctx: &BatteryContext<'_>,
    n_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<BatteryOutcome> {
    if n_grid.is_empty() {
        return Err(invalid("empty n grid"));
    }
    if trials < MIN_TRIALS {
        return Err(invalid(format!("trials = {trials}, need at least {MIN_TRIALS}")));
    }
    let alpha = ctx.model.alpha();
    let mut reports = Vec::new();
    let mut values = Vec::new();
    let mut certificates = Vec::new();
    for &n in n_grid {
        let cell_seed = derive_seed(seed, n as u64);
        let (members, certs) = ctx.observables(n, cell_seed)?;
        let refs: Vec<&dyn Observable> = members.iter().map(|k| k.as_ref() as &dyn Observable).collect();
        let columns = evaluate_on_orbits(&refs, ctx.model, ctx.measure, n, trials, cell_seed);
        for (i, (k, col)) in members.iter().zip(columns).enumerate() {
            let est = variance_of(&col, derive_seed(cell_seed, i as u64));
            reports.push(ConcentrationReport::new(k.label(), alpha, n, est, k.lip_sq_sum()));
            values.push(col);
        }
        certificates.extend(certs);
    }
    let d_hat = calibrate_d_hat(&reports, "birkhoff")?;
    for (r, col) in reports.iter_mut().zip(&values) {
        let sd = r.variance.sqrt();
        let t_grid: Vec<f64> = TAIL_MULTIPLES
            .iter()
            .map(|m| m * sd)
            .filter(|&t| t > 0.0)
            .collect();
        r.tail = tail_table(col, &t_grid, d_hat, r.lip_sq_sum);
    }
    let verification = verify_inequality(&reports, d_hat)?;
    let birk: Vec<f64> = reports
        .iter()
        .filter(|r| r.label.starts_with("birkhoff"))
        .map(|r| r.ratio)
        .collect();
    let birkhoff_spread = birk.iter().cloned().fold(0.0, f64::max)
        / birk.iter().cloned().fold(f64::INFINITY, f64::min);
    let tails_passed = reports.iter().all(|r| r.tail.iter().all(|t| t.passed));
    Ok(BatteryOutcome {
        alpha,
        regime: Regime::of(alpha),
        reports,
        certificates,
        verification,
        birkhoff_spread,
        tails_passed,
    })
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "label", "alpha", "n", "trials", "mean", "variance", "ci_lo", "ci_hi", "lip_sq_sum", "ratio",
    "regime",
];

/// One CSV row per report.
pub fn write_reports_csv<W: Write>(out: W, reports: &[ConcentrationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.label.clone(),
            r.alpha.to_string(),
            r.n.to_string(),
            r.trials.to_string(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
            r.lip_sq_sum.to_string(),
            r.ratio.to_string(),
            serde_json::to_string(&Regime::of(r.alpha))?.trim_matches('"').to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const TAIL_COLUMNS: [&str; 7] = ["label", "n", "t", "empirical", "bound", "vacuous", "passed"];

/// One CSV row per `(report, t)`.
pub fn write_tails_csv<W: Write>(out: W, reports: &[ConcentrationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TAIL_COLUMNS).map_err(csv_err)?;
    for r in reports {
        for t in &r.tail {
            w.write_record([
                r.label.clone(),
                r.n.to_string(),
                t.t.to_string(),
                t.empirical.to_string(),
                t.bound.to_string(),
                t.vacuous.to_string(),
                t.passed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => invalid(format!("csv: {other:?}")),
    }
}
