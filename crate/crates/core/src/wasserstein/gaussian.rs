use serde::{Deserialize, Serialize};

use super::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_pdf, normal_sf, stable_sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTarget {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianTarget {
    pub fn centered(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::DegenerateVariance(variance));
        }
        Ok(Self {
            mean: 0.0,
            variance,
        })
    }
}

// int_{-inf}^t Phi = t Phi(t) + phi(t)
fn lower_integral(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        0.0
    } else {
        t * normal_cdf(t) + normal_pdf(t)
    }
}

// int_t^inf (1 - Phi) = phi(t) - t Q(t)
fn upper_integral(t: f64) -> f64 {
    if t == f64::INFINITY {
        0.0
    } else {
        normal_pdf(t) - t * normal_sf(t)
    }
}

/// `int_s^u (Phi - c)`, with `q = 1 - c` given separately. The form is picked
/// so that neither side of the normal law suffers cancellation.
fn signed_segment(s: f64, u: f64, c: f64, q: f64) -> f64 {
    let mid = if s.is_finite() && u.is_finite() {
        0.5 * (s + u)
    } else if s.is_finite() {
        s
    } else {
        u
    };
    if mid < 0.0 {
        let width = if c == 0.0 { 0.0 } else { u - s };
        lower_integral(u) - lower_integral(s) - c * width
    } else {
        let width = if q == 0.0 { 0.0 } else { u - s };
        q * width - (upper_integral(s) - upper_integral(u))
    }
}

/// Point in `(s, u)` where `Phi = c`, with `Phi(s) < c < Phi(u)`.
fn crossing(s: f64, u: f64, c: f64, q: f64) -> f64 {
    // g(t) < 0 left of the root, > 0 right of it, evaluated on the accurate side
    let g = |t: f64| {
        if c <= 0.5 {
            normal_cdf(t) - c
        } else {
            q - normal_sf(t)
        }
    };
    let (mut lo, mut hi) = (s, u);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - gt / normal_pdf(t);
        t = if newton > lo && newton < hi && normal_pdf(t) > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
    }
    t
}

/// `int |F_a - Phi_{m, s^2}|` over the real line, evaluated in closed form
/// segment by segment between atoms.
pub fn w1_to_gaussian(a: &EmpiricalDistribution, g: &GaussianTarget) -> Result<f64> {
    if !(g.variance > 0.0) || !g.variance.is_finite() {
        return Err(Error::DegenerateVariance(g.variance));
    }
    let sigma = g.variance.sqrt();
    let z: Vec<f64> = a.locations().iter().map(|x| (x - g.mean) / sigma).collect();
    let tails = a.upper_tails();
    let mut parts = Vec::with_capacity(z.len() + 2);
    // left of the first atom F_a = 0, right of the last F_a = 1
    parts.push(lower_integral(z[0]));
    parts.push(upper_integral(z[z.len() - 1]));
    let mut c = 0.0;
    for i in 0..z.len() - 1 {
        c += a.weights()[i];
        let q = tails[i];
        let cc = 1.0 - q;
        let c_seg = if cc > 0.5 { cc } else { c };
        let (s, u) = (z[i], z[i + 1]);
        let at = |t: f64| {
            if c_seg <= 0.5 {
                normal_cdf(t) - c_seg
            } else {
                q - normal_sf(t)
            }
        };
        let (gs, gu) = (at(s), at(u));
        if gs < 0.0 && gu > 0.0 {
            let t = crossing(s, u, c_seg, q);
            parts.push(-signed_segment(s, t, c_seg, q));
            parts.push(signed_segment(t, u, c_seg, q));
        } else {
            parts.push(signed_segment(s, u, c_seg, q).abs());
        }
    }
    Ok(sigma * stable_sum(parts))
}
