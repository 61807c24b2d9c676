//! Componentwise-Lipschitz functionals of orbit segments and their
//! numerical certification.

mod birkhoff;
mod empirical;
mod kde;
mod periodogram;
mod scalar;
mod shadowing;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use birkhoff::{birkhoff_observable, BirkhoffObservable, Normalization};
pub use empirical::{empirical_w1_observable, quantile_discretization, EmpiricalW1Observable, QUANTILE_ATOMS};
pub use kde::{kde_density, kde_tv_observable, Kernel, KdeTvObservable};
pub use periodogram::{
    autocovariances, integrated_periodogram, periodogram_on_grid, periodogram_sup_observable,
    spectral_target, PeriodogramSupObservable, OMEGA_INTERVALS,
};
pub use scalar::ScalarFn;
pub use shadowing::{
    shadowing_observables, IntervalUnion, MismatchObservable, OrbitScores, ShadowingObservable,
};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamId};

/// A real functional `K` of `n` coordinates in `[0, 1]` with known upper
/// bounds on its per-coordinate Lipschitz constants.
pub trait Observable: Send + Sync {
    fn label(&self) -> String;

    /// Number of coordinates `n`.
    fn arity(&self) -> usize;

    fn evaluate(&self, z: &[f64]) -> f64;

    /// Upper bound on `Lip_j(K)`.
    fn lip_bound(&self, j: usize) -> f64;

    fn lip_bounds(&self) -> Vec<f64> {
        (0..self.arity()).map(|j| self.lip_bound(j)).collect()
    }

    fn lip_sq_sum(&self) -> f64 {
        (0..self.arity()).map(|j| self.lip_bound(j).powi(2)).sum()
    }
}

pub type SharedObservable = Arc<dyn Observable>;

impl<T: Observable + ?Sized> Observable for Arc<T> {
    fn label(&self) -> String {
        (**self).label()
    }
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn evaluate(&self, z: &[f64]) -> f64 {
        (**self).evaluate(z)
    }
    fn lip_bound(&self, j: usize) -> f64 {
        (**self).lip_bound(j)
    }
    fn lip_bounds(&self) -> Vec<f64> {
        (**self).lip_bounds()
    }
    fn lip_sq_sum(&self) -> f64 {
        (**self).lip_sq_sum()
    }
}

type Eval = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Observable from a closure and explicit bounds.
#[derive(Clone)]
pub struct FnObservable {
    label: String,
    f: Arc<Eval>,
    bounds: Vec<f64>,
}

impl FnObservable {
    pub fn new<F>(label: impl Into<String>, bounds: Vec<f64>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            f: Arc::new(f),
            bounds,
        }
    }

    /// `K(z) = z_1`.
    pub fn first_coordinate(n: usize, bound: f64) -> Self {
        let mut bounds = vec![f64::MIN_POSITIVE; n];
        bounds[0] = bound;
        Self::new("first_coordinate", bounds, |z| z[0])
    }

    /// `K(z) = c`; bounds are a tiny positive floor.
    pub fn constant(n: usize, c: f64) -> Self {
        Self::new("constant", vec![f64::MIN_POSITIVE; n], move |_| c)
    }
}

impl std::fmt::Debug for FnObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnObservable")
            .field("label", &self.label)
            .field("arity", &self.bounds.len())
            .finish()
    }
}

impl Observable for FnObservable {
    fn label(&self) -> String {
        self.label.clone()
    }
    fn arity(&self) -> usize {
        self.bounds.len()
    }
    fn evaluate(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }
    fn lip_bound(&self, j: usize) -> f64 {
        self.bounds[j]
    }
}

/// `c K`.
#[derive(Debug, Clone)]
pub struct Scaled<O> {
    pub inner: O,
    pub factor: f64,
}

impl<O: Observable> Observable for Scaled<O> {
    fn label(&self) -> String {
        format!("{}x{}", self.factor, self.inner.label())
    }
    fn arity(&self) -> usize {
        self.inner.arity()
    }
    fn evaluate(&self, z: &[f64]) -> f64 {
        self.factor * self.inner.evaluate(z)
    }
    fn lip_bound(&self, j: usize) -> f64 {
        self.factor.abs() * self.inner.lip_bound(j)
    }
}

/// Perturbation sizes probed by [`certify_lipschitz`].
pub const CERTIFY_SCALES: [f64; 3] = [1e-2, 1e-4, 1e-6];
const CERTIFY_SLACK: f64 = 1e-8;
const ROUNDING_ULPS: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub coordinate: usize,
    pub point: Vec<f64>,
    pub step: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub label: String,
    pub passed: bool,
    /// Largest `|dK| / (Lip_j |dz_j|)` seen.
    pub worst_ratio: f64,
    /// Same, per coordinate; zero where a coordinate was never probed.
    pub per_coordinate: Vec<f64>,
    pub violation: Option<Violation>,
}

impl Certificate {
    pub fn into_result(self) -> Result<Self> {
        match &self.violation {
            None => Ok(self),
            Some(v) => Err(Error::Certification {
                label: self.label.clone(),
                coordinate: v.coordinate,
                bound: 1.0 + CERTIFY_SLACK,
                ratio: v.ratio,
                step: v.step,
            }),
        }
    }
}

/// Probes `samples` random base points, each with one random coordinate
/// perturbed at every scale in [`CERTIFY_SCALES`], and checks
/// `|dK| <= Lip_j |dz_j| (1 + 1e-8)` up to a few ulps of `K` for the
/// rounding of the two evaluations.
pub fn certify_lipschitz(obs: &dyn Observable, samples: usize, seed: u64) -> Certificate {
    let n = obs.arity();
    let mut per = vec![0.0f64; n];
    let mut violation: Option<Violation> = None;
    for s in 0..samples {
        let mut rng = stream(seed, StreamId::CERTIFY, s as u64);
        let mut z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let j = rng.random_range(0..n);
        let base = obs.evaluate(&z);
        let zj = z[j];
        let bound = obs.lip_bound(j);
        for &h in &CERTIFY_SCALES {
            let step = if zj + h <= 1.0 { h } else { -h };
            z[j] = zj + step;
            let actual = (z[j] - zj).abs();
            let moved = obs.evaluate(&z);
            let change = (moved - base).abs();
            let ratio = change / (bound * actual);
            per[j] = per[j].max(ratio);
            let rounding = ROUNDING_ULPS * f64::EPSILON * (base.abs() + moved.abs());
            let allowed = bound * actual * (1.0 + CERTIFY_SLACK) + rounding;
            if change > allowed && violation.as_ref().map_or(true, |v| ratio > v.ratio) {
                let mut point = z.clone();
                point[j] = zj;
                violation = Some(Violation {
                    coordinate: j,
                    point,
                    step,
                    ratio,
                });
            }
        }
    }
    let worst_ratio = per.iter().cloned().fold(0.0, f64::max);
    Certificate {
        label: obs.label(),
        passed: violation.is_none(),
        worst_ratio,
        per_coordinate: per,
        violation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzScan {
    /// Largest observed `|dK| / |dz_j|` over all probes.
    pub max_ratio: f64,
    /// `max_ratio` inflated by the 25% safety factor.
    pub bound: f64,
}

pub const SCAN_SAFETY: f64 = 1.25;

/// Finite-difference sup scan of `|dK| / |dz_j|`, with the same probe design
/// as [`certify_lipschitz`] but without reference to declared bounds.
pub fn lipschitz_scan(obs: &dyn Observable, samples: usize, seed: u64) -> LipschitzScan {
    let n = obs.arity();
    let mut max_ratio = 0.0f64;
    for s in 0..samples {
        let mut rng = stream(seed, StreamId::CERTIFY, s as u64);
        let mut z: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let j = rng.random_range(0..n);
        let base = obs.evaluate(&z);
        let zj = z[j];
        for &h in &CERTIFY_SCALES {
            let step = if zj + h <= 1.0 { h } else { -h };
            z[j] = zj + step;
            max_ratio = max_ratio.max((obs.evaluate(&z) - base).abs() / (z[j] - zj).abs());
        }
        z[j] = zj;
    }
    LipschitzScan {
        max_ratio,
        bound: SCAN_SAFETY * max_ratio,
    }
}
