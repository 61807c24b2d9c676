//! The intermittent interval map
//!
//! ```text
//! T(x) = x + 2^a x^(1+a)   on [0, 1/2]
//! T(x) = 2x - 1            on (1/2, 1]
//! ```
//!
//! with an indifferent fixed point at 0 (`T'(0) = 1`). Both branches map onto
//! `[0, 1]`, so the preimages `x_l` of `1/2` under the left branch generate a
//! Markov partition `I_l = (x_{l+1}, x_l]`.

mod distortion;
mod partition;

pub use distortion::{distortion_ratio_check, DistortionConfig, DistortionReport};
pub use partition::MarkovPartition;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which monotone branch of `T` to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

/// The map `T` for a fixed intermittency exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParams", into = "ModelParams")]
pub struct MapModel {
    alpha: f64,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelParams {
    alpha: f64,
}

impl TryFrom<ModelParams> for MapModel {
    type Error = Error;
    fn try_from(p: ModelParams) -> Result<Self> {
        MapModel::new(p.alpha)
    }
}

impl From<MapModel> for ModelParams {
    fn from(m: MapModel) -> Self {
        ModelParams { alpha: m.alpha }
    }
}

/// Boundary between the two branches.
pub const BRANCH_SPLIT: f64 = 0.5;

const BISECTION_REL_WIDTH: f64 = 1e-10;
const NEWTON_STEPS: usize = 5;
const INVERSE_REL_TOL: f64 = 1e-14;

impl MapModel {
    /// `alpha` must lie in `(0, 1]`. The invariant probability measure only
    /// exists for `alpha < 1`; the endpoint is accepted for the map itself.
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
                domain: "(0, 1]",
            });
        }
        Ok(Self {
            alpha,
            coeff: 2f64.powf(alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `T(x)` without domain checks. Points at exactly `1/2` take the left
    /// branch, so `T(1/2) = 1` and atoms stay closed on the right.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x <= BRANCH_SPLIT {
            (x + self.coeff * x * x.powf(self.alpha)).min(1.0)
        } else {
            2.0 * x - 1.0
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x, "x")?;
        Ok(self.apply(x))
    }

    /// `|T'(x)|`; one-sided (left) at `x = 1/2`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_unit(x, "x")?;
        Ok(self.derivative_unchecked(x))
    }

    #[inline]
    pub fn derivative_unchecked(&self, x: f64) -> f64 {
        if x <= BRANCH_SPLIT {
            1.0 + self.coeff * (1.0 + self.alpha) * x.powf(self.alpha)
        } else {
            2.0
        }
    }

    /// `T(b + d) - T(b)` on the left branch, accurate when `d` is small
    /// relative to `b`.
    pub fn left_gap_image(&self, b: f64, d: f64) -> f64 {
        if b <= 0.0 {
            return self.apply(b + d) - self.apply(b);
        }
        let p = 1.0 + self.alpha;
        let pow_diff = b * b.powf(self.alpha) * ((p * (d / b).ln_1p()).exp_m1());
        d + self.coeff * pow_diff
    }

    /// Preimage of `y` under one branch.
    ///
    /// The left branch is inverted by bisection on `[y/2, min(y, 1/2)]` (valid
    /// since `z <= T(z) <= 2z` there) down to relative width `1e-10`, followed
    /// by at most five Newton steps. The result satisfies
    /// `|T(z) - y| <= 1e-14 * y`.
    pub fn inverse(&self, y: f64, branch: Branch) -> Result<f64> {
        check_unit(y, "y")?;
        match branch {
            Branch::Right => Ok(0.5 * (y + 1.0)),
            Branch::Left => self.inverse_left(y),
        }
    }

    fn inverse_left(&self, y: f64) -> Result<f64> {
        if y == 0.0 {
            return Ok(0.0);
        }
        if y >= 1.0 {
            return Ok(BRANCH_SPLIT);
        }
        let mut lo = 0.5 * y;
        let mut hi = y.min(BRANCH_SPLIT);
        while hi - lo > BISECTION_REL_WIDTH * hi {
            let mid = 0.5 * (lo + hi);
            if self.apply(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        let tol = INVERSE_REL_TOL * y;
        let mut residual = self.apply(z) - y;
        for _ in 0..NEWTON_STEPS {
            if residual.abs() <= tol {
                break;
            }
            let step = residual / self.derivative_unchecked(z);
            z = (z - step).clamp(lo, hi);
            residual = self.apply(z) - y;
        }
        if residual.abs() <= tol {
            Ok(z)
        } else {
            Err(Error::Convergence {
                target: y,
                residual: residual.abs(),
            })
        }
    }

    /// Orbit segment `x0, T(x0), ..., T^{n-1}(x0)`.
    pub fn orbit(&self, x0: f64, n: usize) -> Result<OrbitSegment> {
        check_unit(x0, "x0")?;
        if n == 0 {
            return Err(crate::error::invalid("orbit length must be positive"));
        }
        let mut values = vec![0.0; n];
        self.fill_orbit(x0, &mut values);
        Ok(OrbitSegment { start: x0, values })
    }

    /// Writes the orbit of `x0` into `buf` (`buf[0] = x0`).
    pub fn fill_orbit(&self, x0: f64, buf: &mut [f64]) {
        let mut x = x0;
        for slot in buf.iter_mut() {
            *slot = x;
            x = self.apply(x);
        }
    }

    /// Markov partition points `x_0 = 1, x_1 = 1/2, ..., x_depth`.
    pub fn partition(&self, depth: usize) -> Result<MarkovPartition> {
        MarkovPartition::build(self, depth)
    }
}

fn check_unit(x: f64, what: &'static str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            domain: "[0, 1]",
        })
    }
}

/// `T_0^{n-1}(x)`: the first `n` points of an orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSegment {
    pub start: f64,
    pub values: Vec<f64>,
}

impl OrbitSegment {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad() -> MapModel {
        MapModel::new(1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        let t = quad();
        assert_eq!(t.eval(0.0).unwrap(), 0.0);
        assert!((t.eval(0.25).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(t.eval(0.75).unwrap(), 0.5);
        for alpha in [0.1, 0.3, 0.5, 0.9] {
            let t = MapModel::new(alpha).unwrap();
            let below = t.eval(0.5 - 1e-12).unwrap();
            assert!((below - 1.0).abs() < 1e-10, "alpha {alpha}: {below}");
        }
    }

    #[test]
    fn derivative_examples() {
        let t = quad();
        assert_eq!(t.derivative(0.0).unwrap(), 1.0);
        assert!((t.derivative(0.25).unwrap() - 2.0).abs() < 1e-15);
        for alpha in [0.1, 0.3, 1.0] {
            assert_eq!(MapModel::new(alpha).unwrap().derivative(0.9).unwrap(), 2.0);
        }
    }

    #[test]
    fn domain_errors() {
        let t = quad();
        assert!(matches!(t.eval(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(t.eval(1.5), Err(Error::Domain { .. })));
        assert!(t.derivative(f64::NAN).is_err());
        assert!(t.inverse(2.0, Branch::Left).is_err());
        assert!(MapModel::new(0.0).is_err());
        assert!(MapModel::new(1.2).is_err());
    }

    #[test]
    fn inverse_examples() {
        let t = quad();
        // 2z^2 + z - 1/2 = 0
        let closed = (5f64.sqrt() - 1.0) / 4.0;
        assert!((t.inverse(0.5, Branch::Left).unwrap() - closed).abs() < 1e-14);
        for alpha in [0.1, 0.3, 1.0] {
            let t = MapModel::new(alpha).unwrap();
            assert_eq!(t.inverse(0.0, Branch::Left).unwrap(), 0.0);
            assert_eq!(t.inverse(0.0, Branch::Right).unwrap(), 0.5);
        }
    }

    #[test]
    fn orbit_examples() {
        let t = quad();
        assert_eq!(t.orbit(0.0, 5).unwrap().values, vec![0.0; 5]);
        assert_eq!(t.orbit(0.75, 3).unwrap().values, vec![0.75, 0.5, 1.0]);
        assert_eq!(t.orbit(1.0, 2).unwrap().values, vec![1.0, 1.0]);
        assert!(t.orbit(0.3, 0).is_err());
    }

    #[test]
    fn inverse_round_trip_on_grid() {
        for alpha in [0.1, 0.3, 0.7] {
            let t = MapModel::new(alpha).unwrap();
            for i in 0..=10_000 {
                let y = i as f64 / 10_000.0;
                for b in [Branch::Left, Branch::Right] {
                    // the right branch covers (0, 1] since T(1/2) = 1
                    if y == 0.0 && b == Branch::Right {
                        continue;
                    }
                    let z = t.inverse(y, b).unwrap();
                    assert!((t.apply(z) - y).abs() <= 1e-12, "alpha {alpha} y {y} {b:?}");
                }
            }
        }
    }

    #[test]
    fn tiny_targets_keep_relative_accuracy() {
        let t = MapModel::new(0.1).unwrap();
        for y in [1e-30, 1e-80, 1e-200] {
            let z = t.inverse(y, Branch::Left).unwrap();
            assert!(((t.apply(z) - y) / y).abs() <= 1e-14);
        }
    }

    #[test]
    fn left_gap_image_matches_direct() {
        let t = MapModel::new(0.3).unwrap();
        let direct = t.apply(0.31) - t.apply(0.3);
        assert!((t.left_gap_image(0.3, 0.01) - direct).abs() < 1e-14);
        let b = 1e-8;
        let d = t.left_gap_image(b, 1e-20);
        let slope = t.derivative_unchecked(b);
        assert!((d / 1e-20 - slope).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn maps_into_unit_interval(alpha in 0.01f64..1.0, x in 0.0f64..=1.0) {
            let t = MapModel::new(alpha).unwrap();
            let y = t.eval(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&y));
            prop_assert!(t.derivative(x).unwrap() >= 1.0);
        }

        #[test]
        fn monotone_on_each_branch(alpha in 0.01f64..1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let t = MapModel::new(alpha).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let same_branch = (hi <= BRANCH_SPLIT) || (lo > BRANCH_SPLIT);
            prop_assume!(same_branch && hi - lo > 1e-12);
            prop_assert!(t.apply(lo) < t.apply(hi));
        }

        #[test]
        fn inverse_round_trip(alpha in 0.01f64..1.0, y in 0.0f64..=1.0) {
            let t = MapModel::new(alpha).unwrap();
            for b in [Branch::Left, Branch::Right] {
                let z = t.inverse(y, b).unwrap();
                prop_assert!((t.apply(z) - y).abs() <= 1e-12);
            }
        }
    }
}
