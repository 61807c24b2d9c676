use std::fmt;
use std::sync::Arc;

use crate::measure::{Grid, UlamMeasure};

/// Lipschitz function `v : [0, 1] -> R` with a known Lipschitz constant and
/// range, optionally shifted by a constant (for centering).
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lip: f64,
    range: (f64, f64),
    shift: f64,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn")
            .field("label", &self.label)
            .field("lip", &self.lip)
            .field("range", &self.range)
            .field("shift", &self.shift)
            .finish()
    }
}

impl ScalarFn {
    /// `range` must contain the values of `f` on `[0, 1]`.
    pub fn new<F>(label: impl Into<String>, lip: f64, range: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            f: Arc::new(f),
            lip,
            range,
            shift: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self::new("x", 1.0, (0.0, 1.0), |x| x)
    }

    pub fn zero() -> Self {
        Self::new("0", 0.0, (0.0, 0.0), |_| 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x) - self.shift
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    /// Bound on `sup |v|` after the shift.
    pub fn sup_abs(&self) -> f64 {
        (self.range.0 - self.shift)
            .abs()
            .max((self.range.1 - self.shift).abs())
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn is_zero(&self) -> bool {
        self.lip == 0.0 && self.sup_abs() == 0.0
    }

    /// `v - int v dmu`.
    pub fn centered(&self, measure: &UlamMeasure) -> Self {
        let f = self.f.clone();
        let mean = measure.integrate(move |x| f(x));
        Self {
            label: format!("{}-mean", self.label),
            f: self.f.clone(),
            lip: self.lip,
            range: self.range,
            shift: mean,
        }
    }

    /// Cell averages on a grid, shift included.
    pub fn project(&self, grid: &Grid) -> Vec<f64> {
        grid.project(|x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_ulam, GridScheme};
    use crate::MapModel;

    #[test]
    fn centering() {
        let (m, _) = build_ulam(&MapModel::new(0.3).unwrap(), 256, GridScheme::MarkovRefined).unwrap();
        let v = ScalarFn::identity().centered(&m);
        let (mean, _) = m.identity_moments();
        assert!((v.shift() - mean).abs() < 1e-12);
        assert!(m.integrate(|x| v.eval(x)).abs() < 1e-12);
        assert_eq!(v.sup_abs(), mean.max(1.0 - mean));
        assert!(ScalarFn::zero().is_zero());
    }
}
