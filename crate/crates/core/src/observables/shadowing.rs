//! Shadowing distance `Z_A` and mismatch count `Z'_{A,eps}`.
//!
//! The infimum over `y in A` is replaced by a minimum over a fixed grid of
//! candidates whose orbits are computed once. A minimum of `1/n`-Lipschitz
//! sums is again `1/n`-Lipschitz in each coordinate.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Observable;
use crate::error::{invalid, Result};
use crate::map::{Branch, MapModel};
use crate::measure::UlamMeasure;

/// Finite union of closed intervals in `[0, 1]`, kept sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("A is empty"));
        }
        for &(a, b) in &intervals {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
                return Err(invalid(format!("[{a}, {b}] is not a nondegenerate interval in [0, 1]")));
            }
        }
        intervals.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// `mu(A)` under the discretized invariant measure.
    pub fn mass(&self, measure: &UlamMeasure) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| measure.mass_between(a, b))
            .sum()
    }

    /// Points `a + k h` in each interval plus its right end, with
    /// `h = |A| / count`. Doubling `count` yields a superset.
    pub fn grid(&self, count: usize) -> Vec<f64> {
        let h = self.length() / count.max(1) as f64;
        let mut pts = Vec::with_capacity(count + 2 * self.intervals.len());
        for &(a, b) in &self.intervals {
            let steps = ((b - a) / h).floor() as usize;
            pts.extend((0..=steps).map(|k| a + k as f64 * h).filter(|&y| y < b));
            pts.push(b);
        }
        pts
    }
}

/// Candidate starting points and their orbits, row-major `count x n`.
#[derive(Debug)]
struct Candidates {
    starts: Vec<f64>,
    orbits: Vec<f64>,
    n: usize,
}

impl Candidates {
    fn build(model: &MapModel, starts: Vec<f64>, n: usize) -> Self {
        let mut orbits = vec![0.0; starts.len() * n];
        for (y, row) in starts.iter().zip(orbits.chunks_mut(n.max(1))) {
            model.fill_orbit(*y, row);
        }
        Self { starts, orbits, n }
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.orbits.chunks(self.n.max(1))
    }

    /// `min_y sum_j cost(|z_j - T^j y|)`, abandoning a candidate once its
    /// partial sum exceeds the best so far.
    fn min_cost<C: Fn(f64) -> f64>(&self, z: &[f64], cost: C) -> f64 {
        let mut best = f64::INFINITY;
        for row in self.rows() {
            let mut s = 0.0;
            for (chunk_z, chunk_y) in z.chunks(64).zip(row.chunks(64)) {
                s += chunk_z
                    .iter()
                    .zip(chunk_y)
                    .map(|(a, b)| cost((a - b).abs()))
                    .sum::<f64>();
                if s >= best {
                    break;
                }
            }
            best = best.min(s);
        }
        best
    }
}

/// `Z_A(z) = (1/n) min_y sum_j |z_j - T^j y|` over the candidate grid.
#[derive(Debug, Clone)]
pub struct ShadowingObservable {
    set: IntervalUnion,
    candidates: Arc<Candidates>,
}

/// `Z'_{A,eps}`: fraction of times with `|z_j - T^j y| > eps`, minimized
/// over the same candidates. The indicator is replaced by a linear ramp of
/// width `eps/10` centered at `eps`, which is `10/(n eps)`-Lipschitz; the
/// raw count is available through [`MismatchObservable::raw`].
#[derive(Debug, Clone)]
pub struct MismatchObservable {
    eps: f64,
    candidates: Arc<Candidates>,
}

pub fn shadowing_observables(
    set: &IntervalUnion,
    n: usize,
    eps: f64,
    y_candidates: usize,
    model: &MapModel,
) -> Result<(ShadowingObservable, MismatchObservable)> {
    if n == 0 || y_candidates == 0 {
        return Err(invalid("n and y_candidates must be positive"));
    }
    if !(eps > 0.0) {
        return Err(invalid(format!("eps = {eps} must be positive")));
    }
    let candidates = Arc::new(Candidates::build(model, set.grid(y_candidates), n));
    Ok((
        ShadowingObservable {
            set: set.clone(),
            candidates: candidates.clone(),
        },
        MismatchObservable { eps, candidates },
    ))
}

impl ShadowingObservable {
    pub fn set(&self) -> &IntervalUnion {
        &self.set
    }

    pub fn candidate_starts(&self) -> &[f64] {
        &self.candidates.starts
    }

    /// Mismatch observable for another `eps` on the same candidates.
    pub fn mismatch(&self, eps: f64) -> MismatchObservable {
        MismatchObservable {
            eps,
            candidates: self.candidates.clone(),
        }
    }

    /// Scores of an exact orbit segment `z` (so `z_{j+1} = T z_j`), with
    /// extra candidates the grid cannot offer: `z_0` itself when it lies in
    /// `A`, and every `y in A` with `T^k y = z_k` for `1 <= k <= depth`.
    /// Such a `y` follows `z` from time `k` on, so only the first `k`
    /// distances count.
    pub fn orbit_scores(&self, model: &MapModel, z: &[f64], eps: f64, depth: usize) -> OrbitScores {
        let n = z.len() as f64;
        let mut dist = self.candidates.min_cost(z, |d| d);
        let mut raw = self.candidates.min_cost(z, indicator(eps));
        let mut smooth = self.candidates.min_cost(z, ramp(eps));
        if self.set.contains(z[0]) {
            dist = 0.0;
            raw = 0.0;
            smooth = 0.0;
        }
        let mut buf = Vec::new();
        for k in 1..=depth.min(z.len() - 1) {
            for y in preimages(model, z[k], k) {
                if !self.set.contains(y) {
                    continue;
                }
                buf.resize(k, 0.0);
                model.fill_orbit(y, &mut buf);
                let d = buf.iter().zip(z).map(|(a, b)| (a - b).abs());
                dist = dist.min(d.clone().sum());
                raw = raw.min(d.clone().map(indicator(eps)).sum());
                smooth = smooth.min(d.map(ramp(eps)).sum());
            }
        }
        OrbitScores {
            z_a: dist / n,
            mismatch_raw: raw / n,
            mismatch: smooth / n,
        }
    }
}

fn preimages(model: &MapModel, y: f64, k: usize) -> Vec<f64> {
    let mut level = vec![y];
    for _ in 0..k {
        let mut next = Vec::with_capacity(2 * level.len());
        for &p in &level {
            for b in [Branch::Left, Branch::Right] {
                if let Ok(q) = model.inverse(p, b) {
                    next.push(q);
                }
            }
        }
        level = next;
    }
    level
}

/// Scores of one orbit segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitScores {
    pub z_a: f64,
    pub mismatch_raw: f64,
    pub mismatch: f64,
}

fn indicator(eps: f64) -> impl Fn(f64) -> f64 {
    move |d| if d > eps { 1.0 } else { 0.0 }
}

fn ramp(eps: f64) -> impl Fn(f64) -> f64 {
    let w = eps / 10.0;
    move |d| ((d - (eps - 0.5 * w)) / w).clamp(0.0, 1.0)
}

impl Observable for ShadowingObservable {
    fn label(&self) -> String {
        "shadowing_z_a".into()
    }

    fn arity(&self) -> usize {
        self.candidates.n
    }

    fn evaluate(&self, z: &[f64]) -> f64 {
        self.candidates.min_cost(z, |d| d) / z.len() as f64
    }

    fn lip_bound(&self, _j: usize) -> f64 {
        1.0 / self.candidates.n as f64
    }
}

impl MismatchObservable {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Unsmoothed fraction of mismatches; not Lipschitz.
    pub fn raw(&self, z: &[f64]) -> f64 {
        self.candidates.min_cost(z, indicator(self.eps)) / z.len() as f64
    }
}

impl Observable for MismatchObservable {
    fn label(&self) -> String {
        "shadowing_mismatch".into()
    }

    fn arity(&self) -> usize {
        self.candidates.n
    }

    fn evaluate(&self, z: &[f64]) -> f64 {
        self.candidates.min_cost(z, ramp(self.eps)) / z.len() as f64
    }

    fn lip_bound(&self, _j: usize) -> f64 {
        10.0 / (self.candidates.n as f64 * self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::certify_lipschitz;

    fn model() -> MapModel {
        MapModel::new(0.3).unwrap()
    }

    #[test]
    fn union_is_normalized() {
        let u = IntervalUnion::new(vec![(0.5, 0.7), (0.1, 0.2), (0.15, 0.3)]).unwrap();
        assert_eq!(u.intervals(), &[(0.1, 0.3), (0.5, 0.7)]);
        assert!((u.length() - 0.4).abs() < 1e-15);
        assert!(IntervalUnion::new(vec![]).is_err());
        assert!(IntervalUnion::interval(0.3, 0.3).is_err());
    }

    #[test]
    fn true_orbit_from_grid_scores_zero() {
        let a = IntervalUnion::interval(0.4, 0.6).unwrap();
        let (za, zp) = shadowing_observables(&a, 50, 0.05, 20, &model()).unwrap();
        let y = za.candidate_starts()[7];
        let z = model().orbit(y, 50).unwrap();
        assert_eq!(za.evaluate(z.as_slice()), 0.0);
        assert_eq!(zp.evaluate(z.as_slice()), 0.0);
    }

    #[test]
    fn refinement_never_increases() {
        let m = model();
        let a = IntervalUnion::new(vec![(0.1, 0.2), (0.4, 0.6)]).unwrap();
        let z = m.orbit(0.913, 80).unwrap();
        let mut prev = f64::INFINITY;
        for count in [5, 10, 20, 40, 80] {
            let (za, _) = shadowing_observables(&a, 80, 0.1, count, &m).unwrap();
            let coarse = a.grid(count);
            let fine = a.grid(2 * count);
            assert!(coarse.iter().all(|p| fine.contains(p)));
            let v = za.evaluate(z.as_slice());
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn mismatch_bounds() {
        let m = model();
        let a = IntervalUnion::interval(0.4, 0.6).unwrap();
        let (za, _) = shadowing_observables(&a, 40, 0.1, 30, &m).unwrap();
        for x0 in [0.01, 0.33, 0.77, 0.999] {
            let z = m.orbit(x0, 40).unwrap();
            let z = z.as_slice();
            let d = za.evaluate(z);
            let mut prev = f64::INFINITY;
            for eps in [0.01, 0.05, 0.1, 0.3, 0.6] {
                let zp = za.mismatch(eps);
                let (s, r) = (zp.evaluate(z), zp.raw(z));
                assert!((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&r));
                assert!(s <= d / eps && r <= d / eps);
                assert!(s <= prev);
                prev = s;
            }
        }
    }

    #[test]
    fn orbit_scores_use_preimages() {
        let m = model();
        let a = IntervalUnion::interval(0.4, 0.6).unwrap();
        let (za, _) = shadowing_observables(&a, 200, 0.1, 16, &m).unwrap();
        let z = m.orbit(0.05, 200).unwrap();
        let s = za.orbit_scores(&m, z.as_slice(), 0.1, 8);
        assert!(s.z_a <= za.evaluate(z.as_slice()));
        // A has preimages of everything after a few steps
        assert!(s.z_a < 8.0 / 200.0);
        assert!(s.mismatch <= s.z_a / 0.1 && s.mismatch_raw <= s.z_a / 0.1);
        let inside = m.orbit(0.5, 200).unwrap();
        assert_eq!(za.orbit_scores(&m, inside.as_slice(), 0.1, 8).z_a, 0.0);
    }

    #[test]
    fn certified() {
        let a = IntervalUnion::interval(0.4, 0.6).unwrap();
        let (za, zp) = shadowing_observables(&a, 30, 0.1, 25, &model()).unwrap();
        assert!(certify_lipschitz(&za, 300, 8).passed);
        assert!(certify_lipschitz(&zp, 300, 9).passed);
    }
}
