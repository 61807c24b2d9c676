use serde::{Deserialize, Serialize};

use super::{UlamMeasure, UlamOperator};
use crate::error::{invalid, Error, Result};
use crate::map::MapModel;
use crate::rng::{stream, StreamId};
use crate::stats::{fit_power_law, stable_sum, PowerLawFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    Ulam,
    MonteCarlo,
}

/// `Cov_{v,w}(l) = int v o T^l w dmu - int v dmu int w dmu` for `l = 0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSeries {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub method: CovarianceMethod,
    /// True when computed with `v = w`.
    pub auto: bool,
}

impl CovarianceSeries {
    pub fn lag_max(&self) -> usize {
        self.lags.len() - 1
    }

    /// The same series cut at `lag_max`.
    pub fn truncated(&self, lag_max: usize) -> Self {
        let k = (lag_max + 1).min(self.lags.len());
        Self {
            lags: self.lags[..k].to_vec(),
            values: self.values[..k].to_vec(),
            method: self.method,
            auto: self.auto,
        }
    }

    /// Power-law fit of `|Cov|` over lags in `[lo, hi]`.
    pub fn decay_fit(&self, lo: usize, hi: usize) -> Option<PowerLawFit> {
        let hi = hi.min(self.lag_max());
        let t: Vec<f64> = (lo..=hi).map(|l| l as f64).collect();
        let v: Vec<f64> = (lo..=hi).map(|l| self.values[l].abs()).collect();
        fit_power_law(&t, &v)
    }
}

fn check_len(measure: &UlamMeasure, f: &[f64], name: &str) -> Result<()> {
    if f.len() != measure.cells() {
        return Err(Error::GridMismatch(format!(
            "{name} has {} values for {} cells",
            f.len(),
            measure.cells()
        )));
    }
    Ok(())
}

/// Covariances through repeated application of the Ulam matrix:
/// `Cov(l) = sum_i pi_i w_i (P^l v_c)_i` with `v_c` the centered `v`.
pub fn covariance_series(
    op: &UlamOperator,
    measure: &UlamMeasure,
    v: &[f64],
    w: &[f64],
    lag_max: usize,
) -> Result<CovarianceSeries> {
    check_len(measure, v, "v")?;
    check_len(measure, w, "w")?;
    let mv = measure.expectation(v);
    let mut cur: Vec<f64> = v.iter().map(|x| x - mv).collect();
    let mut next = vec![0.0; cur.len()];
    let mut values = Vec::with_capacity(lag_max + 1);
    for l in 0..=lag_max {
        if l > 0 {
            op.transfer.apply(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        values.push(measure.expectation(
            &cur.iter().zip(w).map(|(a, b)| a * b).collect::<Vec<_>>(),
        ));
    }
    Ok(CovarianceSeries {
        lags: (0..=lag_max).collect(),
        values,
        method: CovarianceMethod::Ulam,
        auto: v == w,
    })
}

/// Orbit-average estimate of the same covariances from `trials` orbits
/// started from the discretized measure.
pub fn covariance_monte_carlo<V, W>(
    model: &MapModel,
    measure: &UlamMeasure,
    v: V,
    w: W,
    lag_max: usize,
    trials: usize,
    seed: u64,
) -> Result<CovarianceSeries>
where
    V: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    let mut orbit = vec![0.0; lag_max + 1];
    let mut sum_vw = vec![0.0; lag_max + 1];
    let mut sum_v = vec![0.0; lag_max + 1];
    let mut sum_w = 0.0;
    for t in 0..trials {
        let mut rng = stream(seed, StreamId::SAMPLER, t as u64);
        model.fill_orbit(measure.draw(&mut rng), &mut orbit);
        let w0 = w(orbit[0]);
        sum_w += w0;
        for (l, &x) in orbit.iter().enumerate() {
            let vx = v(x);
            sum_vw[l] += vx * w0;
            sum_v[l] += vx;
        }
    }
    let m = trials as f64;
    let values = (0..=lag_max)
        .map(|l| sum_vw[l] / m - (sum_v[l] / m) * (sum_w / m))
        .collect();
    Ok(CovarianceSeries {
        lags: (0..=lag_max).collect(),
        values,
        method: CovarianceMethod::MonteCarlo,
        auto: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    /// `int |L^q (f - int f dmu)| dmu` for `q = 0..=q_max`.
    pub values: Vec<f64>,
    pub fit: Option<PowerLawFit>,
}

/// L1 decay of the normalized operator on a centered grid function. The
/// power-law fit uses `q >= 5`.
pub fn operator_l1_decay_probe(
    op: &UlamOperator,
    measure: &UlamMeasure,
    f: &[f64],
    q_max: usize,
) -> Result<DecayProbe> {
    check_len(measure, f, "f")?;
    let mf = measure.expectation(f);
    let mut cur: Vec<f64> = f.iter().map(|x| x - mf).collect();
    let mut next = vec![0.0; cur.len()];
    let mut values = Vec::with_capacity(q_max + 1);
    for q in 0..=q_max {
        if q > 0 {
            op.normalized.apply(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        values.push(stable_sum(
            measure.masses().iter().zip(&cur).map(|(m, x)| m * x.abs()),
        ));
    }
    let fit = if q_max > 5 {
        let t: Vec<f64> = (5..=q_max).map(|q| q as f64).collect();
        fit_power_law(&t, &values[5..])
    } else {
        None
    };
    Ok(DecayProbe { values, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKubo {
    /// Truncated sum plus tail, clamped at zero.
    pub sigma2: f64,
    pub truncated: f64,
    /// Extrapolated contribution of lags beyond the series.
    pub tail: f64,
    /// Estimate of the truncation error; infinite when the fitted tail is not
    /// summable.
    pub error_estimate: f64,
    pub tail_fit: Option<PowerLawFit>,
    pub summable: bool,
    pub lag_max: usize,
}

/// `sigma^2 = Cov(0) + 2 sum_{l>=1} Cov(l)`. The tail beyond the last lag is
/// taken from a power law `c l^-b` fitted on the last decade of lags.
pub fn green_kubo_sigma2(series: &CovarianceSeries) -> Result<GreenKubo> {
    if !series.auto {
        return Err(invalid("Green-Kubo needs an autocovariance series"));
    }
    let lag_max = series.lag_max();
    let v = &series.values;
    let truncated = v[0] + 2.0 * stable_sum(v[1..].iter().copied());
    if v.iter().all(|&c| c == 0.0) || lag_max < 10 {
        return Ok(GreenKubo {
            sigma2: truncated.max(0.0),
            truncated,
            tail: 0.0,
            error_estimate: 0.0,
            tail_fit: None,
            summable: true,
            lag_max,
        });
    }
    let lo = (lag_max / 10).max(1);
    let last = &v[lo..];
    let sign = if last.iter().all(|&c| c > 0.0) {
        1.0
    } else if last.iter().all(|&c| c < 0.0) {
        -1.0
    } else {
        0.0
    };
    let (tail, error_estimate, fit, summable) = if sign == 0.0 {
        // mixed signs: noise floor, no extrapolation
        let crude = 2.0 * stable_sum(last.iter().copied()).abs();
        (0.0, crude, None, true)
    } else {
        let fit = series.decay_fit(lo, lag_max);
        match fit {
            Some(f) if -f.exponent > 1.0 => {
                let beta = -f.exponent;
                let tail = sign * 2.0 * f.prefactor * (lag_max as f64 + 0.5).powf(1.0 - beta)
                    / (beta - 1.0);
                (tail, tail.abs(), Some(f), true)
            }
            other => {
                log::warn!(
                    "covariance tail not summable (fitted exponent {:?}); CLT variance is not finite",
                    other.map(|f| f.exponent)
                );
                (0.0, f64::INFINITY, other, false)
            }
        }
    };
    Ok(GreenKubo {
        sigma2: (truncated + tail).max(0.0),
        truncated,
        tail,
        error_estimate,
        tail_fit: fit,
        summable,
        lag_max,
    })
}
