use serde::{Deserialize, Serialize};

use super::{Branch, MapModel};
use crate::error::{invalid, Result};
use crate::stats::linear_fit;

/// Preimages `x_0 = 1 > x_1 = 1/2 > x_2 > ... > x_L` of `1/2` along the left
/// branch, and the atoms `I_l = (x_{l+1}, x_l]` for `l < L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPartition {
    alpha: f64,
    points: Vec<f64>,
}

impl MarkovPartition {
    pub(super) fn build(model: &MapModel, depth: usize) -> Result<Self> {
        if depth < 2 {
            return Err(invalid(format!("partition depth must be >= 2, got {depth}")));
        }
        let mut points = Vec::with_capacity(depth + 1);
        points.push(1.0);
        points.push(0.5);
        for l in 2..=depth {
            let next = model.inverse(points[l - 1], Branch::Left)?;
            points.push(next);
        }
        Ok(Self {
            alpha: model.alpha(),
            points,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest index `L`.
    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, l: usize) -> f64 {
        self.points[l]
    }

    /// `(x_{l+1}, x_l)`, the endpoints of `I_l`.
    pub fn atom(&self, l: usize) -> (f64, f64) {
        (self.points[l + 1], self.points[l])
    }

    /// `|I_l|`. For `l >= 1` this is `x_l - x_{l+1} = 2^a x_{l+1}^{1+a}`,
    /// which avoids cancellation deep in the partition.
    pub fn atom_length(&self, l: usize) -> f64 {
        if l == 0 {
            0.5
        } else {
            let x = self.points[l + 1];
            2f64.powf(self.alpha) * x * x.powf(self.alpha)
        }
    }

    /// Index `l` with `x` in `I_l`, or `None` when `x <= x_L`.
    pub fn atom_index(&self, x: f64) -> Option<usize> {
        if x > 1.0 || x <= *self.points.last().unwrap() {
            return None;
        }
        // points are descending: count how many satisfy x <= x_l.
        let count = self.points.partition_point(|&p| p >= x);
        Some(count - 1)
    }

    /// Least-squares slopes of `log x_l` and `log |I_l|` against `log l`
    /// over `lo <= l <= hi`.
    pub fn asymptotic_slopes(&self, lo: usize, hi: usize) -> Result<(f64, f64)> {
        if lo < 1 || hi >= self.depth() || lo >= hi {
            return Err(invalid(format!(
                "slope range [{lo}, {hi}] not inside [1, {})",
                self.depth()
            )));
        }
        let logl: Vec<f64> = (lo..=hi).map(|l| (l as f64).ln()).collect();
        let logx: Vec<f64> = (lo..=hi).map(|l| self.points[l].ln()).collect();
        let logi: Vec<f64> = (lo..=hi).map(|l| self.atom_length(l).ln()).collect();
        Ok((linear_fit(&logl, &logx).slope, linear_fit(&logl, &logi).slope))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points() {
        for alpha in [0.1, 0.3, 1.0] {
            let p = MapModel::new(alpha).unwrap().partition(5).unwrap();
            assert_eq!(p.point(0), 1.0);
            assert_eq!(p.point(1), 0.5);
        }
        let p = MapModel::new(1.0).unwrap().partition(3).unwrap();
        assert!((p.point(2) - (5f64.sqrt() - 1.0) / 4.0).abs() < 1e-14);
        let x3 = (-1.0 + (2.0 * 5f64.sqrt() - 1.0).sqrt()) / 4.0;
        assert!((p.point(3) - x3).abs() < 1e-14);
        assert!((p.point(3) - 0.21584).abs() < 1e-5);
    }

    #[test]
    fn recursion_and_monotonicity() {
        for alpha in [0.1, 0.3] {
            let t = MapModel::new(alpha).unwrap();
            let p = t.partition(2000).unwrap();
            for l in 2..=p.depth() {
                assert!((t.apply(p.point(l)) - p.point(l - 1)).abs() <= 1e-12);
                assert!(p.point(l) < p.point(l - 1));
            }
        }
    }

    #[test]
    fn atom_lookup() {
        let p = MapModel::new(0.3).unwrap().partition(50).unwrap();
        assert_eq!(p.atom_index(1.0), Some(0));
        assert_eq!(p.atom_index(0.75), Some(0));
        assert_eq!(p.atom_index(0.5), Some(1));
        for l in 0..49 {
            let (lo, hi) = p.atom(l);
            assert_eq!(p.atom_index(0.5 * (lo + hi)), Some(l));
            assert_eq!(p.atom_index(hi), Some(l));
        }
        assert_eq!(p.atom_index(0.0), None);
        assert_eq!(p.atom_index(p.point(50)), None);
    }

    #[test]
    fn atom_length_matches_difference() {
        let p = MapModel::new(0.3).unwrap().partition(20).unwrap();
        for l in 1..19 {
            let (lo, hi) = p.atom(l);
            assert!(((hi - lo) - p.atom_length(l)).abs() < 1e-15);
        }
    }

    #[test]
    fn depth_must_be_at_least_two() {
        assert!(MapModel::new(0.3).unwrap().partition(1).is_err());
    }
}
