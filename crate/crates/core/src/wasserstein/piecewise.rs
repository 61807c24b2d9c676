use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::stable_sum;

/// Piecewise polynomial of degree at most two. Piece `k` lives on
/// `[breaks[k], breaks[k+1]]` and is written in local coordinates,
/// `c0 + c1 (x - breaks[k]) + c2 (x - breaks[k])^2`. Repeated breakpoints
/// give zero-length pieces, which is how jumps are represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    coeffs: Vec<[f64; 3]>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, coeffs: Vec<[f64; 3]>) -> Result<Self> {
        if breaks.len() != coeffs.len() + 1 || coeffs.is_empty() {
            return Err(invalid("need one more breakpoint than pieces"));
        }
        if breaks.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(invalid("breakpoints must be nondecreasing"));
        }
        Ok(Self { breaks, coeffs })
    }

    /// Piecewise-constant function with `values[i]` on `[edges[i], edges[i+1]]`.
    pub fn piecewise_constant(edges: &[f64], values: &[f64]) -> Result<Self> {
        if edges.len() != values.len() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} values for {} edges",
                values.len(),
                edges.len()
            )));
        }
        Self::new(edges.to_vec(), values.iter().map(|&v| [v, 0.0, 0.0]).collect())
    }

    /// Continuous piecewise-linear interpolant of `(nodes, values)`.
    pub fn piecewise_linear(nodes: &[f64], values: &[f64]) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::GridMismatch("nodes and values differ in length".into()));
        }
        let coeffs = nodes
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| {
                let slope = if x[1] > x[0] {
                    (y[1] - y[0]) / (x[1] - x[0])
                } else {
                    0.0
                };
                [y[0], slope, 0.0]
            })
            .collect();
        Self::new(nodes.to_vec(), coeffs)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    pub fn pieces(&self) -> usize {
        self.coeffs.len()
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn coeffs(&self) -> &[[f64; 3]] {
        &self.coeffs
    }

    /// Pads with zero pieces so the domain covers `[lo, hi]`.
    pub fn extended_to(&self, lo: f64, hi: f64) -> Self {
        let (a, b) = self.domain();
        let mut breaks = Vec::with_capacity(self.breaks.len() + 2);
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 2);
        if lo < a {
            breaks.push(lo);
            coeffs.push([0.0; 3]);
        }
        breaks.extend_from_slice(&self.breaks);
        coeffs.extend_from_slice(&self.coeffs);
        if hi > b {
            breaks.push(hi);
            coeffs.push([0.0; 3]);
        }
        Self { breaks, coeffs }
    }

    /// Value at `x`, right-continuous at jumps; zero outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.domain();
        if x < a || x > b {
            return 0.0;
        }
        let k = (self.breaks.partition_point(|&p| p <= x).max(1) - 1).min(self.pieces() - 1);
        let [c0, c1, c2] = self.coeffs[k];
        let d = x - self.breaks[k];
        c0 + d * (c1 + d * c2)
    }

    pub fn integral(&self) -> f64 {
        stable_sum((0..self.pieces()).map(|k| {
            let h = self.breaks[k + 1] - self.breaks[k];
            let [c0, c1, c2] = self.coeffs[k];
            h * (c0 + h * (c1 / 2.0 + h * c2 / 3.0))
        }))
    }
}

// Coefficients of piece `k` re-expanded around `x0`.
fn shift(c: [f64; 3], origin: f64, x0: f64) -> [f64; 3] {
    let d = x0 - origin;
    [c[0] + d * (c[1] + d * c[2]), c[1] + 2.0 * c[2] * d, c[2]]
}

fn poly_integral(c: [f64; 3], a: f64, b: f64) -> f64 {
    let f = |t: f64| t * (c[0] + t * (c[1] / 2.0 + t * c[2] / 3.0));
    f(b) - f(a)
}

/// Roots of `c0 + c1 t + c2 t^2` strictly inside `(0, h)`, ascending.
fn roots_inside(c: [f64; 3], h: f64) -> Vec<f64> {
    let [c0, c1, c2] = c;
    let scale = c0.abs() + c1.abs() * h + c2.abs() * h * h;
    let mut r = Vec::new();
    if scale == 0.0 {
        return r;
    }
    if c2.abs() * h * h <= 1e-14 * scale {
        if c1 != 0.0 {
            r.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
            if q != 0.0 {
                r.push(q / c2);
                r.push(c0 / q);
            } else {
                r.push(0.0);
            }
        }
    }
    r.retain(|&t| t > 0.0 && t < h);
    r.sort_by(f64::total_cmp);
    r
}

fn abs_integral(c: [f64; 3], h: f64) -> f64 {
    let mut total = 0.0;
    let mut prev = 0.0;
    for t in roots_inside(c, h).into_iter().chain(std::iter::once(h)) {
        total += poly_integral(c, prev, t).abs();
        prev = t;
    }
    total
}

/// `int |f - g|` over the common domain, exact up to rounding. Both
/// functions must be defined on the same interval; use
/// [`PiecewisePoly::extended_to`] to pad with zeros first.
pub fn tv_distance_density(f: &PiecewisePoly, g: &PiecewisePoly) -> Result<f64> {
    let (fa, fb) = f.domain();
    let (ga, gb) = g.domain();
    if fa != ga || fb != gb {
        return Err(Error::GridMismatch(format!(
            "domains [{fa}, {fb}] and [{ga}, {gb}] differ"
        )));
    }
    let mut parts = Vec::with_capacity(f.pieces() + g.pieces());
    let (mut i, mut j) = (0usize, 0usize);
    let mut x = fa;
    while i < f.pieces() && j < g.pieces() {
        let fe = f.breaks[i + 1];
        let ge = g.breaks[j + 1];
        let next = fe.min(ge);
        if next > x {
            let cf = shift(f.coeffs[i], f.breaks[i], x);
            let cg = shift(g.coeffs[j], g.breaks[j], x);
            let d = [cf[0] - cg[0], cf[1] - cg[1], cf[2] - cg[2]];
            parts.push(abs_integral(d, next - x));
            x = next;
        }
        if fe <= x {
            i += 1;
        }
        if ge <= x {
            j += 1;
        }
    }
    Ok(stable_sum(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_functions() {
        let f = PiecewisePoly::piecewise_linear(&[0.0, 0.3, 1.0], &[1.0, 2.0, 0.5]).unwrap();
        assert_eq!(tv_distance_density(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports() {
        let f = PiecewisePoly::piecewise_constant(&[0.0, 0.5, 1.0], &[2.0, 0.0]).unwrap();
        let g = PiecewisePoly::piecewise_constant(&[0.0, 0.5, 1.0], &[0.0, 2.0]).unwrap();
        assert!((tv_distance_density(&f, &g).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tent_difference() {
        // f - g is a tent of height 1 on base [0.25, 0.75]
        let g = PiecewisePoly::piecewise_linear(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        let f = PiecewisePoly::piecewise_linear(&[0.0, 0.25, 0.5, 0.75, 1.0], &[1.0, 1.0, 2.0, 1.0, 1.0])
            .unwrap();
        assert!((tv_distance_density(&f, &g).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn crossing_quadratics() {
        // x^2 vs 1/4 on [0,1]: int |x^2 - 1/4| = 1/4
        let f = PiecewisePoly::new(vec![0.0, 1.0], vec![[0.0, 0.0, 1.0]]).unwrap();
        let g = PiecewisePoly::piecewise_constant(&[0.0, 1.0], &[0.25]).unwrap();
        assert!((tv_distance_density(&f, &g).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn jumps_and_padding() {
        let f = PiecewisePoly::new(vec![0.0, 0.5, 0.5, 1.0], vec![[1.0, 0.0, 0.0], [9.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
            .unwrap();
        assert_eq!(f.eval(0.5), 3.0);
        assert!((f.integral() - 2.0).abs() < 1e-15);
        let g = PiecewisePoly::piecewise_constant(&[0.0, 1.0], &[2.0]).unwrap();
        assert!((tv_distance_density(&f, &g).unwrap() - 1.0).abs() < 1e-15);
        let wide = g.extended_to(-1.0, 2.0);
        assert!(tv_distance_density(&f, &wide).is_err());
        let f2 = f.extended_to(-1.0, 2.0);
        assert!((tv_distance_density(&f2, &wide).unwrap() - 1.0).abs() < 1e-15);
    }
}
