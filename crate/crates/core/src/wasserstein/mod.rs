//! One-dimensional Kantorovich (W1) distances.

mod gaussian;
mod piecewise;

use serde::{Deserialize, Serialize};

pub use gaussian::{w1_to_gaussian, GaussianTarget};
pub use piecewise::{tv_distance_density, PiecewisePoly};

use crate::error::{invalid, Error, Result};
use crate::stats::stable_sum;

/// Weights below this are dropped after merging.
pub const WEIGHT_FLOOR: f64 = 1e-15;
/// Largest atom count accepted by [`w1_lp_oracle`].
pub const ORACLE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    UnitInterval,
    RealLine,
}

/// Finite point measure with sorted, distinct atom locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    locations: Vec<f64>,
    weights: Vec<f64>,
    support: Support,
}

impl EmpiricalDistribution {
    /// Builds from `(location, weight)` pairs whose weights sum to one
    /// within `1e-12`. Equal locations are merged, tiny weights dropped and
    /// the remainder renormalized.
    pub fn new(mut atoms: Vec<(f64, f64)>, support: Support) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("empirical distribution needs at least one atom"));
        }
        for &(x, w) in &atoms {
            if !x.is_finite() || !(w >= 0.0) || !w.is_finite() {
                return Err(invalid(format!("bad atom ({x}, {w})")));
            }
            if support == Support::UnitInterval && !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain {
                    what: "atom location",
                    value: x,
                    domain: "[0, 1]",
                });
            }
        }
        let sum = stable_sum(atoms.iter().map(|a| a.1));
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization { sum });
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match locations.last() {
                Some(&last) if last == x => *weights.last_mut().unwrap() += w,
                _ => {
                    locations.push(x);
                    weights.push(w);
                }
            }
        }
        let keep: Vec<bool> = weights.iter().map(|&w| w >= WEIGHT_FLOOR).collect();
        let mut k = keep.iter();
        locations.retain(|_| *k.next().unwrap());
        weights.retain(|&w| w >= WEIGHT_FLOOR);
        let total = stable_sum(weights.iter().copied());
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            locations,
            weights,
            support,
        })
    }

    /// Equal weights `1/n` on the given points.
    pub fn uniform(points: &[f64], support: Support) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::new(points.iter().map(|&x| (x, w)).collect(), support)
    }

    /// Unit mass at `x`.
    pub fn dirac(x: f64, support: Support) -> Result<Self> {
        Self::new(vec![(x, 1.0)], support)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn mean(&self) -> f64 {
        stable_sum(self.locations.iter().zip(&self.weights).map(|(x, w)| x * w))
    }

    /// The same measure moved by `t`, on the real line.
    pub fn shifted(&self, t: f64) -> Self {
        Self {
            locations: self.locations.iter().map(|x| x + t).collect(),
            weights: self.weights.clone(),
            support: Support::RealLine,
        }
    }

    /// Push-forward under `x -> c x` with `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0, "scale must be positive");
        Self {
            locations: self.locations.iter().map(|x| c * x).collect(),
            weights: self.weights.clone(),
            support: Support::RealLine,
        }
    }

    /// Upper tail masses `1 - F` just right of each atom, from suffix sums
    /// so they stay accurate when `F` is close to one.
    pub(crate) fn upper_tails(&self) -> Vec<f64> {
        let mut tails = vec![0.0; self.len()];
        let mut run = 0.0;
        for i in (0..self.len()).rev() {
            tails[i] = run;
            run += self.weights[i];
        }
        tails
    }
}

/// `int |F_a - F_b|` over the real line, by a merge over both atom lists.
pub fn w1_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (xa, wa) = (&a.locations, &a.weights);
    let (xb, wb) = (&b.locations, &b.weights);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev = f64::NAN;
    let mut terms = Vec::with_capacity(xa.len() + xb.len());
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        if !prev.is_nan() {
            terms.push((fa - fb).abs() * (x - prev));
        }
        while i < xa.len() && xa[i] == x {
            fa += wa[i];
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            fb += wb[j];
            j += 1;
        }
        prev = x;
    }
    stable_sum(terms)
}

/// Primal transport cost of the monotone (north-west corner) coupling of
/// the sorted atoms, optimal for `|x - y|` cost on the line.
pub fn w1_lp_oracle(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    for (what, m) in [("first measure atoms", a), ("second measure atoms", b)] {
        if m.len() > ORACLE_CAP {
            return Err(Error::SizeCap {
                what,
                size: m.len(),
                cap: ORACLE_CAP,
            });
        }
    }
    let mut ra = a.weights.clone();
    let mut rb = b.weights.clone();
    let (mut i, mut j) = (0, 0);
    let mut cost = Vec::new();
    while i < ra.len() && j < rb.len() {
        let moved = ra[i].min(rb[j]);
        cost.push(moved * (a.locations[i] - b.locations[j]).abs());
        ra[i] -= moved;
        rb[j] -= moved;
        // the smaller side is emptied exactly; ties advance both
        if ra[i] <= 0.0 {
            i += 1;
        }
        if rb[j] <= 0.0 {
            j += 1;
        }
    }
    Ok(stable_sum(cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamId};
    use proptest::prelude::*;
    use rand::Rng;

    fn m(atoms: &[(f64, f64)]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(atoms.to_vec(), Support::RealLine).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(w1_distance(&m(&[(0.3, 1.0)]), &m(&[(0.3, 1.0)])), 0.0);
        assert_eq!(w1_distance(&m(&[(0.0, 1.0)]), &m(&[(1.0, 1.0)])), 1.0);
        let a = m(&[(0.0, 0.5), (0.5, 0.5)]);
        let b = m(&[(0.25, 1.0)]);
        assert!((w1_distance(&a, &b) - 0.25).abs() < 1e-15);
        assert!((w1_lp_oracle(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        let c = m(&[(0.0, 1.0)]);
        let d = m(&[(0.0, 0.5), (1.0, 0.5)]);
        assert!((w1_lp_oracle(&c, &d).unwrap() - 0.5).abs() < 1e-15);
        assert!((w1_lp_oracle(&d, &c).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn construction_rules() {
        let e = m(&[(0.2, 0.25), (0.1, 0.5), (0.2, 0.25)]);
        assert_eq!(e.locations(), &[0.1, 0.2]);
        assert_eq!(e.weights(), &[0.5, 0.5]);
        let tiny = m(&[(0.0, 1e-17), (1.0, 1.0 - 1e-17)]);
        assert_eq!(tiny.len(), 1);
        assert!(matches!(
            EmpiricalDistribution::new(vec![(0.0, 0.5)], Support::RealLine),
            Err(Error::Normalization { .. })
        ));
        assert!(EmpiricalDistribution::new(vec![(1.5, 1.0)], Support::UnitInterval).is_err());
        assert!(EmpiricalDistribution::new(vec![], Support::RealLine).is_err());
    }

    #[test]
    fn oracle_size_cap() {
        let pts: Vec<f64> = (0..65).map(|i| i as f64).collect();
        let big = EmpiricalDistribution::uniform(&pts, Support::RealLine).unwrap();
        assert!(matches!(w1_lp_oracle(&big, &big), Err(Error::SizeCap { .. })));
    }

    fn random_measure<R: Rng>(rng: &mut R) -> EmpiricalDistribution {
        let k = rng.random_range(1..=8);
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = raw.iter().sum();
        let atoms = raw.iter().map(|w| (rng.random::<f64>(), w / s)).collect();
        EmpiricalDistribution::new(atoms, Support::UnitInterval).unwrap()
    }

    #[test]
    fn oracle_agrees_on_random_pairs() {
        let mut rng = stream(42, StreamId::EMPIRICAL, 0);
        for _ in 0..1000 {
            let a = random_measure(&mut rng);
            let b = random_measure(&mut rng);
            let d = w1_distance(&a, &b);
            assert!((d - w1_lp_oracle(&a, &b).unwrap()).abs() <= 1e-10);
            assert!(d <= 1.0);
        }
    }

    proptest! {
        #[test]
        fn metric_axioms(seed in 0u64..10_000) {
            let mut rng = stream(seed, StreamId::EMPIRICAL, 1);
            let (a, b, c) = (random_measure(&mut rng), random_measure(&mut rng), random_measure(&mut rng));
            let ab = w1_distance(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - w1_distance(&b, &a)).abs() <= 1e-12);
            prop_assert!(ab <= w1_distance(&a, &c) + w1_distance(&c, &b) + 1e-10);
            prop_assert!((w1_distance(&a.shifted(3.5), &b.shifted(3.5)) - ab).abs() <= 1e-12);
            prop_assert!(w1_distance(&a, &a) == 0.0);
        }
    }
}
