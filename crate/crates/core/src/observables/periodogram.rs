//! Raw and integrated periodograms on the frequency grid
//! `w_m = 2 pi m / G`, `m = 0..=G`.
//!
//! With `g(h) = (1/n) sum_j x_j x_{j+h}` the integrated periodogram is
//! `J_n(w) = g(0) w + 2 sum_{h>=1} g(h) sin(h w) / h`, and the target is the
//! same series with the covariances of the stationary process in place of
//! `g`. Both sine series are folded modulo `G` and summed with one FFT.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Observable, ScalarFn};
use crate::error::{invalid, Result};
use crate::measure::CovarianceSeries;

/// Default number of grid intervals `G` on `[0, 2 pi]`.
pub const OMEGA_INTERVALS: usize = 1024;

/// Empirical autocovariances `g(0..n)` (not re-centered) via FFT.
pub fn autocovariances(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    autocovariances_with(x, len, fwd.as_ref(), inv.as_ref())
}

fn autocovariances_with(x: &[f64], len: usize, fwd: &dyn Fft<f64>, inv: &dyn Fft<f64>) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / (len as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// `c0 w_m + sum_{h>=1} (2 c_h / h) sin(h w_m)` for `m = 0..=G`.
fn sine_series(c: &[f64], grid: usize, inv: &dyn Fft<f64>) -> Vec<f64> {
    let mut folded = vec![Complex::new(0.0, 0.0); grid];
    for (h, &ch) in c.iter().enumerate().skip(1) {
        folded[h % grid].re += 2.0 * ch / h as f64;
    }
    inv.process(&mut folded);
    let c0 = c.first().copied().unwrap_or(0.0);
    let mut out: Vec<f64> = (0..grid)
        .map(|m| c0 * 2.0 * PI * m as f64 / grid as f64 + folded[m].im)
        .collect();
    out.push(c0 * 2.0 * PI);
    out
}

/// Integrated periodogram `J_n(w_m)` from autocovariances, `m = 0..=G`.
pub fn integrated_periodogram(gamma: &[f64], grid: usize) -> Vec<f64> {
    let inv = FftPlanner::new().plan_fft_inverse(grid);
    sine_series(gamma, grid, inv.as_ref())
}

/// Target `J(w_m)` from a covariance series, `m = 0..=G`.
pub fn spectral_target(series: &CovarianceSeries, grid: usize) -> Vec<f64> {
    integrated_periodogram(&series.values, grid)
}

/// Raw periodogram `I_n(w_m) = |sum_j x_j e^{-i j w_m}|^2 / n`, `m = 0..G`.
pub fn periodogram_on_grid(x: &[f64], grid: usize) -> Vec<f64> {
    let mut folded = vec![Complex::new(0.0, 0.0); grid];
    for (j, &v) in x.iter().enumerate() {
        folded[j % grid].re += v;
    }
    FftPlanner::new().plan_fft_forward(grid).process(&mut folded);
    folded.iter().map(|c| c.norm_sqr() / x.len() as f64).collect()
}

/// `K(z) = max_m |J_n(w_m; v(z)) - J(w_m)|`.
#[derive(Clone)]
pub struct PeriodogramSupObservable {
    v: ScalarFn,
    n: usize,
    grid: usize,
    target: Vec<f64>,
    pad: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    grid_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodogramSupObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodogramSupObservable")
            .field("v", &self.v)
            .field("n", &self.n)
            .field("grid", &self.grid)
            .finish()
    }
}

/// `v` must already be centered; `series` holds its autocovariances.
pub fn periodogram_sup_observable(
    v: ScalarFn,
    n: usize,
    grid: usize,
    series: &CovarianceSeries,
) -> Result<PeriodogramSupObservable> {
    if series.values.is_empty() || !series.auto {
        return Err(invalid("periodogram target needs the autocovariance series of v"));
    }
    if grid < 2 || n == 0 {
        return Err(invalid("grid and n must be positive"));
    }
    let pad = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    Ok(PeriodogramSupObservable {
        target: spectral_target(series, grid),
        fwd: planner.plan_fft_forward(pad),
        inv: planner.plan_fft_inverse(pad),
        grid_inv: planner.plan_fft_inverse(grid),
        v,
        n,
        grid,
        pad,
    })
}

impl PeriodogramSupObservable {
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// `J_n(w_m)` for the orbit segment `z`.
    pub fn integrated(&self, z: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = z.iter().map(|&p| self.v.eval(p)).collect();
        let gamma = autocovariances_with(&x, self.pad, self.fwd.as_ref(), self.inv.as_ref());
        sine_series(&gamma, self.grid, self.grid_inv.as_ref())
    }
}

impl Observable for PeriodogramSupObservable {
    fn label(&self) -> String {
        "periodogram_sup".into()
    }

    fn arity(&self) -> usize {
        self.n
    }

    fn evaluate(&self, z: &[f64]) -> f64 {
        if self.v.is_zero() {
            return 0.0;
        }
        self.integrated(z)
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn lip_bound(&self, _j: usize) -> f64 {
        (4.0 * PI * self.v.sup_abs() * self.v.lip()).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_ulam, covariance_series, CovarianceMethod, GridScheme};
    use crate::observables::certify_lipschitz;
    use crate::rng::{stream, StreamId};
    use crate::MapModel;
    use rand::Rng;

    fn random_series(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, StreamId::PERIODOGRAM, 0);
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn autocovariances_match_direct_sum() {
        let x = random_series(37, 1);
        let g = autocovariances(&x);
        for h in [0, 1, 5, 36] {
            let direct: f64 = (0..37 - h).map(|j| x[j] * x[j + h]).sum::<f64>() / 37.0;
            assert!((g[h] - direct).abs() < 1e-14);
        }
    }

    // I_n by direct complex summation.
    fn raw(x: &[f64], w: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            re += v * (j as f64 * w).cos();
            im -= v * (j as f64 * w).sin();
        }
        (re * re + im * im) / x.len() as f64
    }

    #[test]
    fn two_ways_to_integrate_agree() {
        let x = random_series(64, 2);
        let grid = 128;
        let j = integrated_periodogram(&autocovariances(&x), grid);
        // composite Gauss-Legendre of the raw periodogram on [0, w_m]
        let nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
        let weights = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
        for m in [1, 17, 64, 100, 128] {
            let w = 2.0 * PI * m as f64 / grid as f64;
            let pieces = 64 * m;
            let h = w / pieces as f64;
            let mut q = 0.0;
            for p in 0..pieces {
                let c = (p as f64 + 0.5) * h;
                for (t, wt) in nodes.iter().zip(weights) {
                    q += 0.5 * h * wt * raw(&x, c + 0.5 * h * t);
                }
            }
            assert!((q - j[m]).abs() < 1e-8, "m {m}: {q} vs {}", j[m]);
        }
    }

    #[test]
    fn parseval_on_grid() {
        let x = random_series(64, 3);
        let i = periodogram_on_grid(&x, OMEGA_INTERVALS);
        let mean = i.iter().sum::<f64>() / i.len() as f64;
        let second: f64 = x.iter().map(|v| v * v).sum::<f64>() / 64.0;
        assert!((mean - second).abs() < 1e-12);
        let j = integrated_periodogram(&autocovariances(&x), OMEGA_INTERVALS);
        assert!((j[OMEGA_INTERVALS] - 2.0 * PI * mean).abs() < 1e-12);
        for m in [0, 3, 500] {
            assert!((i[m] - raw(&x, 2.0 * PI * m as f64 / OMEGA_INTERVALS as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_target_is_linear() {
        let series = CovarianceSeries {
            lags: vec![0, 1, 2],
            values: vec![0.3, 0.0, 0.0],
            method: CovarianceMethod::Ulam,
            auto: true,
        };
        let t = spectral_target(&series, 64);
        for (m, v) in t.iter().enumerate() {
            assert!((v - 0.3 * 2.0 * PI * m as f64 / 64.0).abs() < 1e-14);
        }
    }

    #[test]
    fn observable_zero_and_certified() {
        let model = MapModel::new(0.1).unwrap();
        let (m, op) = build_ulam(&model, 512, GridScheme::MarkovRefined).unwrap();
        let zero = ScalarFn::zero();
        let zs = covariance_series(&op, &m, &vec![0.0; 512], &vec![0.0; 512], 50).unwrap();
        let k0 = periodogram_sup_observable(zero, 32, 256, &zs).unwrap();
        assert_eq!(k0.evaluate(&[0.3; 32]), 0.0);

        let v = ScalarFn::identity().centered(&m);
        let grid_v = v.project(m.grid());
        let s = covariance_series(&op, &m, &grid_v, &grid_v, 200).unwrap();
        let k = periodogram_sup_observable(v, 64, OMEGA_INTERVALS, &s).unwrap();
        assert!(certify_lipschitz(&k, 200, 5).passed);
    }
}
