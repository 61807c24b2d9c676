use super::Observable;
use crate::measure::UlamMeasure;
use crate::wasserstein::{w1_distance, EmpiricalDistribution, Support};

/// Atoms in the equal-mass quantile discretization of the invariant measure.
pub const QUANTILE_ATOMS: usize = 10_000;

/// `K(z) = W1(E_n(z), mu)` with `mu` replaced by a fixed equal-mass quantile
/// discretization. Moving one point by `d` moves `E_n` by at most `d / n`.
#[derive(Debug, Clone)]
pub struct EmpiricalW1Observable {
    n: usize,
    target: EmpiricalDistribution,
}

pub fn empirical_w1_observable(measure: &UlamMeasure, n: usize) -> EmpiricalW1Observable {
    EmpiricalW1Observable {
        n,
        target: quantile_discretization(measure, QUANTILE_ATOMS),
    }
}

/// Atoms at the mid-quantiles `(k + 1/2) / m` with weight `1/m` each.
pub fn quantile_discretization(measure: &UlamMeasure, m: usize) -> EmpiricalDistribution {
    let pts: Vec<f64> = (0..m)
        .map(|k| measure.quantile((k as f64 + 0.5) / m as f64))
        .collect();
    EmpiricalDistribution::uniform(&pts, Support::UnitInterval)
        .expect("quantiles lie in [0, 1]")
}

impl EmpiricalW1Observable {
    pub fn target(&self) -> &EmpiricalDistribution {
        &self.target
    }

    pub fn distance_to_target(&self, z: &[f64]) -> f64 {
        let e = EmpiricalDistribution::uniform(z, Support::UnitInterval)
            .expect("orbit points lie in [0, 1]");
        w1_distance(&e, &self.target)
    }
}

impl Observable for EmpiricalW1Observable {
    fn label(&self) -> String {
        "empirical_w1".into()
    }

    fn arity(&self) -> usize {
        self.n
    }

    fn evaluate(&self, z: &[f64]) -> f64 {
        self.distance_to_target(z)
    }

    fn lip_bound(&self, _j: usize) -> f64 {
        1.0 / self.n as f64
    }

    fn lip_sq_sum(&self) -> f64 {
        1.0 / self.n as f64
    }
}
