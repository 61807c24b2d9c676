//! Ulam discretization of the transfer operator, the stationary measure it
//! induces, and covariance estimates built on top of it.

mod covariance;
mod grid;
mod io;
mod sparse;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use covariance::{
    covariance_monte_carlo, covariance_series, green_kubo_sigma2, operator_l1_decay_probe,
    CovarianceMethod, CovarianceSeries, DecayProbe, GreenKubo,
};
pub use grid::{Grid, GridScheme};
pub use io::{load_ulam, save_ulam, CacheStatus, UlamCache};
pub use sparse::CsrMatrix;

use crate::error::{invalid, Error, Result};
use crate::map::{Branch, MapModel};
use crate::rng::{stream, StreamId};
use crate::stats::stable_sum;

/// Stationary residual targeted by the power iteration.
pub const STATIONARY_TOL: f64 = 1e-10;
const CESARO_BLOCK: usize = 50;
const MAX_ITERATIONS: usize = 2_000_000;
// Transition probabilities below this are dropped before renormalizing.
const DROP_BELOW: f64 = 1e-15;

/// Per-cell masses of the discretized invariant measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamMeasure {
    alpha: f64,
    scheme: GridScheme,
    grid: Grid,
    masses: Vec<f64>,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

/// The Ulam matrix `P` (Koopman direction, row-stochastic) and the
/// normalized transfer operator `L`, its time reversal under the stationary
/// masses.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator {
    transfer: CsrMatrix,
    normalized: CsrMatrix,
    residual: f64,
}

/// Builds the Ulam matrix on the requested grid and solves for its
/// stationary vector.
pub fn build_ulam(
    model: &MapModel,
    cells: usize,
    scheme: GridScheme,
) -> Result<(UlamMeasure, UlamOperator)> {
    let grid = Grid::build(model, cells, scheme)?;
    let transfer = ulam_matrix(model, &grid)?;
    let initial = initial_guess(model, &grid);
    let (masses, residual) = stationary(&transfer, initial)?;
    let measure = UlamMeasure::from_masses(model.alpha(), scheme, grid, masses)?;
    let normalized = transfer.reversed(measure.masses());
    Ok((
        measure,
        UlamOperator {
            transfer,
            normalized,
            residual,
        },
    ))
}

fn ulam_matrix(model: &MapModel, grid: &Grid) -> Result<CsrMatrix> {
    let b = grid.boundaries();
    let n = grid.cells();
    let left: Vec<f64> = b
        .iter()
        .map(|&y| model.inverse(y, Branch::Left))
        .collect::<Result<_>>()?;
    let right: Vec<f64> = b.iter().map(|&y| 0.5 * (y + 1.0)).collect();

    let mut rows = Vec::with_capacity(n);
    let mut jl = 0usize;
    let mut jr = 0usize;
    for i in 0..n {
        let (lo, hi) = grid.cell(i);
        let (pre, j) = if hi <= 0.5 {
            (&left, &mut jl)
        } else {
            (&right, &mut jr)
        };
        while *j + 1 < pre.len() && pre[*j + 1] <= lo {
            *j += 1;
        }
        let width = hi - lo;
        let mut row = Vec::new();
        let mut k = *j;
        while k < n && pre[k] < hi {
            let overlap = hi.min(pre[k + 1]) - lo.max(pre[k]);
            let p = overlap / width;
            if p > DROP_BELOW {
                row.push((k, p));
            }
            k += 1;
        }
        if row.is_empty() {
            return Err(Error::Corrupt(format!("cell {i} has no image")));
        }
        rows.push(row);
    }
    let mut m = CsrMatrix::from_rows(rows);
    m.normalize_rows();
    Ok(m)
}

// Cell masses of x^-a, a cheap approximation of the stationary vector.
fn initial_guess(model: &MapModel, grid: &Grid) -> Vec<f64> {
    let e = 1.0 - model.alpha();
    let v: Vec<f64> = (0..grid.cells())
        .map(|i| {
            let (a, b) = grid.cell(i);
            (b.powf(e) - a.powf(e)) / e
        })
        .collect();
    let s = stable_sum(v.iter().copied());
    v.into_iter().map(|x| x / s).collect()
}

/// Power iteration `pi <- pi P` with Cesaro averaging over blocks.
fn stationary(p: &CsrMatrix, mut pi: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let n = pi.len();
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..CESARO_BLOCK {
            p.apply_left(&pi, &mut next);
            std::mem::swap(&mut pi, &mut next);
            for (a, &x) in acc.iter_mut().zip(&pi) {
                *a += x;
            }
        }
        iterations += CESARO_BLOCK;
        let s = stable_sum(acc.iter().copied());
        for (x, &a) in pi.iter_mut().zip(&acc) {
            *x = a / s;
        }
        residual = l1_residual(p, &pi, &mut next);
        if residual <= STATIONARY_TOL {
            log::debug!("power iteration converged after {iterations} steps, residual {residual:e}");
            return Ok((pi, residual));
        }
    }
    Err(Error::PowerIteration {
        residual,
        iterations,
    })
}

fn l1_residual(p: &CsrMatrix, pi: &[f64], scratch: &mut [f64]) -> f64 {
    p.apply_left(pi, scratch);
    stable_sum(scratch.iter().zip(pi).map(|(a, b)| (a - b).abs()))
}

impl UlamMeasure {
    pub(crate) fn from_masses(
        alpha: f64,
        scheme: GridScheme,
        grid: Grid,
        masses: Vec<f64>,
    ) -> Result<Self> {
        if masses.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "{} masses for {} cells",
                masses.len(),
                grid.cells()
            )));
        }
        if masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(invalid("cell masses must be nonnegative"));
        }
        let sum = stable_sum(masses.iter().copied());
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization { sum });
        }
        let density = masses
            .iter()
            .enumerate()
            .map(|(i, m)| m / grid.width(i))
            .collect();
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        cumulative.push(0.0);
        let mut run = 0.0;
        for &m in &masses {
            run += m;
            cumulative.push(run);
        }
        Ok(Self {
            alpha,
            scheme,
            grid,
            masses,
            density,
            cumulative,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `sum_i pi_i f_i` for a grid function.
    pub fn expectation(&self, f: &[f64]) -> f64 {
        stable_sum(self.masses.iter().zip(f).map(|(m, v)| m * v))
    }

    /// `int f dmu` with `f` projected onto the grid.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.expectation(&self.grid.project(f))
    }

    /// Distribution function, linear inside each cell.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.grid.cell_of(x);
        let (lo, _) = self.grid.cell(i);
        self.cumulative[i] + self.masses[i] * (x - lo) / self.grid.width(i)
    }

    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// Inverse of [`cdf`](Self::cdf).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.cells();
        let i = (self.cumulative.partition_point(|&c| c <= p).max(1) - 1).min(n - 1);
        let (lo, hi) = self.grid.cell(i);
        if self.masses[i] == 0.0 {
            return lo;
        }
        let t = ((p - self.cumulative[i]) / self.masses[i]).clamp(0.0, 1.0);
        (lo + t * (hi - lo)).min(hi)
    }

    /// One draw from the measure: inverse CDF over cells, uniform inside.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `count` i.i.d. draws, deterministic given `seed`.
    pub fn sample_mu(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, StreamId::SAMPLER, 0);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }

    /// Mean and variance of the identity under the measure, computed exactly
    /// for the piecewise-constant density.
    pub fn identity_moments(&self) -> (f64, f64) {
        let mut m1 = Vec::with_capacity(self.cells());
        let mut m2 = Vec::with_capacity(self.cells());
        for i in 0..self.cells() {
            let (a, b) = self.grid.cell(i);
            m1.push(self.masses[i] * 0.5 * (a + b));
            m2.push(self.masses[i] * (a * a + a * b + b * b) / 3.0);
        }
        let mean = stable_sum(m1);
        (mean, stable_sum(m2) - mean * mean)
    }

    /// Measure of `T^-1 [a, b]`, computed from both inverse branches.
    pub fn preimage_mass(&self, model: &MapModel, a: f64, b: f64) -> Result<f64> {
        let la = model.inverse(a, Branch::Left)?;
        let lb = model.inverse(b, Branch::Left)?;
        let ra = model.inverse(a, Branch::Right)?;
        let rb = model.inverse(b, Branch::Right)?;
        Ok(self.mass_between(la, lb) + self.mass_between(ra, rb))
    }
}

/// Alternative sampler: Lebesgue-uniform start followed by `steps` iterates.
pub fn burn_in_sample(model: &MapModel, count: usize, steps: usize, seed: u64) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let mut rng = stream(seed, StreamId::BURN_IN, i as u64);
            let mut x: f64 = rng.random();
            for _ in 0..steps {
                x = model.apply(x);
            }
            x
        })
        .collect()
}

impl UlamOperator {
    pub fn transfer(&self) -> &CsrMatrix {
        &self.transfer
    }

    pub fn normalized(&self) -> &CsrMatrix {
        &self.normalized
    }

    /// Stationarity residual reached by the power iteration.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn cells(&self) -> usize {
        self.transfer.size()
    }

    /// `v o T` on the grid, i.e. `P v`.
    pub fn koopman(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.transfer.apply(v, &mut out);
        out
    }

    /// `L f` for a grid function `f`.
    pub fn apply_normalized(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.normalized.apply(f, &mut out);
        out
    }

    /// `|pi P - pi|_1` for the given masses.
    pub fn stationarity_residual(&self, masses: &[f64]) -> f64 {
        let mut scratch = vec![0.0; masses.len()];
        l1_residual(&self.transfer, masses, &mut scratch)
    }

    pub(crate) fn from_transfer(transfer: CsrMatrix, masses: &[f64]) -> Self {
        let normalized = transfer.reversed(masses);
        let mut scratch = vec![0.0; masses.len()];
        let residual = l1_residual(&transfer, masses, &mut scratch);
        Self {
            transfer,
            normalized,
            residual,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(alpha: f64, scheme: GridScheme) -> (UlamMeasure, UlamOperator) {
        build_ulam(&MapModel::new(alpha).unwrap(), 512, scheme).unwrap()
    }

    #[test]
    fn stationary_and_normalized() {
        for scheme in [GridScheme::Uniform, GridScheme::MarkovRefined] {
            let (m, op) = small(0.3, scheme);
            assert!(op.residual() <= STATIONARY_TOL);
            assert!(op.stationarity_residual(m.masses()) <= STATIONARY_TOL);
            assert!((stable_sum(m.masses().iter().copied()) - 1.0).abs() < 1e-12);
            for s in op.normalized().row_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
            for s in op.transfer().row_sums() {
                assert!((s - 1.0).abs() < 1e-12);
            }
            let ones = op.apply_normalized(&vec![1.0; m.cells()]);
            assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn density_decreases_toward_right() {
        let (m, _) = small(0.3, GridScheme::Uniform);
        let near0 = m.density()[0];
        for i in m.grid().cell_of(0.5)..m.cells() {
            assert!(m.density()[i] <= near0);
        }
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        let (m, _) = small(0.3, GridScheme::MarkovRefined);
        for p in [0.0, 1e-6, 0.1, 0.5, 0.9, 0.999999] {
            assert!((m.cdf(m.quantile(p)) - p).abs() < 1e-12, "{p}");
        }
        assert_eq!(m.cdf(1.0), 1.0);
    }

    #[test]
    fn sampler_is_deterministic() {
        let (m, _) = small(0.3, GridScheme::MarkovRefined);
        assert!(m.sample_mu(0, 1).is_empty());
        assert_eq!(m.sample_mu(100, 7), m.sample_mu(100, 7));
        assert_ne!(m.sample_mu(100, 7), m.sample_mu(100, 8));
    }

    #[test]
    fn identity_moments_match_quadrature() {
        let (m, _) = small(0.3, GridScheme::MarkovRefined);
        let (mean, var) = m.identity_moments();
        assert!((mean - m.integrate(|x| x)).abs() < 1e-12);
        let second = m.integrate(|x| x * x);
        assert!((var - (second - mean * mean)).abs() < 1e-6);
    }

    #[test]
    fn burn_in_agrees_with_measure() {
        let model = MapModel::new(0.1).unwrap();
        let (m, _) = build_ulam(&model, 1024, GridScheme::MarkovRefined).unwrap();
        let xs = burn_in_sample(&model, 4000, 10_000, 3);
        let emp = xs.iter().sum::<f64>() / xs.len() as f64;
        let (mean, var) = m.identity_moments();
        assert!((emp - mean).abs() < 4.0 * (var / 4000.0).sqrt());
    }
}
