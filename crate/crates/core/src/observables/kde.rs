use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Observable;
use crate::error::{invalid, Error, Result};
use crate::measure::UlamMeasure;
use crate::wasserstein::{tv_distance_density, PiecewisePoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(1 - |u|)_+`
    Triangular,
    /// `3/4 (1 - u^2)_+`, Lipschitz with constant 3/2.
    Epanechnikov,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Triangular => 1.0 - u.abs(),
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
        }
    }

    /// Total variation of the kernel on the line.
    pub fn total_variation(self) -> f64 {
        match self {
            Kernel::Triangular => 2.0,
            Kernel::Epanechnikov => 1.5,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Triangular => "triangular",
            Kernel::Epanechnikov => "epanechnikov",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(Kernel::Triangular),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `h_n(s) = 1/(n a) sum_j psi((s - z_j) / a)` as an exact piecewise
/// polynomial, built by sweeping the kernel breakpoints and accumulating
/// monomial coefficients.
pub fn kde_density(z: &[f64], bandwidth: f64, kernel: Kernel) -> PiecewisePoly {
    let n = z.len() as f64;
    let a = bandwidth;
    let mut events: Vec<(f64, [f64; 3])> = Vec::with_capacity(3 * z.len());
    match kernel {
        Kernel::Triangular => {
            let k = 1.0 / (n * a * a);
            for &x in z {
                events.push((x - a, [k * (a - x), k, 0.0]));
                events.push((x, [2.0 * k * x, -2.0 * k, 0.0]));
                events.push((x + a, [-k * (a + x), k, 0.0]));
            }
        }
        Kernel::Epanechnikov => {
            let k = 0.75 / (n * a);
            let ia2 = 1.0 / (a * a);
            for &x in z {
                let c = [k * (1.0 - x * x * ia2), k * 2.0 * x * ia2, -k * ia2];
                events.push((x - a, c));
                events.push((x + a, [-c[0], -c[1], -c[2]]));
            }
        }
    }
    events.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut acc = [Compensated::default(); 3];
    let mut breaks = Vec::with_capacity(events.len());
    let mut coeffs = Vec::with_capacity(events.len());
    let mut i = 0;
    while i < events.len() {
        let x = events[i].0;
        while i < events.len() && events[i].0 == x {
            for (slot, d) in acc.iter_mut().zip(events[i].1) {
                slot.add(d);
            }
            i += 1;
        }
        breaks.push(x);
        if i < events.len() {
            let [c0, c1, c2] = [acc[0].value(), acc[1].value(), acc[2].value()];
            coeffs.push([c0 + x * (c1 + x * c2), c1 + 2.0 * c2 * x, c2]);
        }
    }
    PiecewisePoly::new(breaks, coeffs).expect("sorted breakpoints")
}

/// `K(z) = int |h_n(z; s) - h(s)| ds` with `h` the discretized invariant
/// density. Moving one point by `d` moves one bump, which changes `h_n` in
/// L1 by at most `TV(psi) d / (n a)`.
#[derive(Debug, Clone)]
pub struct KdeTvObservable {
    n: usize,
    bandwidth: f64,
    kernel: Kernel,
    target: PiecewisePoly,
}

// Common domain for both densities; bumps reach at most `a < 1` past [0, 1].
const PAD: (f64, f64) = (-1.0, 2.0);

pub fn kde_tv_observable(
    measure: &UlamMeasure,
    kernel: Kernel,
    bandwidth: f64,
    n: usize,
) -> Result<KdeTvObservable> {
    if !(bandwidth > 0.0 && bandwidth < 1.0) {
        return Err(Error::Domain {
            what: "bandwidth",
            value: bandwidth,
            domain: "(0, 1)",
        });
    }
    let h = PiecewisePoly::piecewise_constant(measure.grid().boundaries(), measure.density())?;
    Ok(KdeTvObservable {
        n,
        bandwidth,
        kernel,
        target: h.extended_to(PAD.0, PAD.1),
    })
}

impl KdeTvObservable {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn density(&self, z: &[f64]) -> PiecewisePoly {
        kde_density(z, self.bandwidth, self.kernel)
    }

    pub fn tv(&self, z: &[f64]) -> f64 {
        let hn = self.density(z).extended_to(PAD.0, PAD.1);
        tv_distance_density(&hn, &self.target).expect("common padded domain")
    }
}

impl Observable for KdeTvObservable {
    fn label(&self) -> String {
        format!("kde_tv_{}", self.kernel)
    }

    fn arity(&self) -> usize {
        self.n
    }

    fn evaluate(&self, z: &[f64]) -> f64 {
        self.tv(z)
    }

    fn lip_bound(&self, _j: usize) -> f64 {
        self.kernel.total_variation() / (self.n as f64 * self.bandwidth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_ulam, GridScheme};
    use crate::observables::{certify_lipschitz, lipschitz_scan};
    use crate::MapModel;

    fn measure() -> UlamMeasure {
        build_ulam(&MapModel::new(0.3).unwrap(), 1024, GridScheme::MarkovRefined)
            .unwrap()
            .0
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, m: usize) -> f64 {
        let h = (hi - lo) / m as f64;
        let mut s = f(lo) + f(hi);
        for k in 1..m {
            s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn kernels_integrate_to_one() {
        for k in [Kernel::Triangular, Kernel::Epanechnikov] {
            let left = simpson(|u| k.eval(u), -1.0, 0.0, 1000);
            let right = simpson(|u| k.eval(u), 0.0, 1.0, 1000);
            assert!((left + right - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_matches_direct_sum() {
        let z = [0.1, 0.15, 0.7, 0.71, 0.99];
        for kernel in [Kernel::Triangular, Kernel::Epanechnikov] {
            let h = kde_density(&z, 0.08, kernel);
            assert!((h.integral() - 1.0).abs() < 1e-12);
            for s in [0.05, 0.12, 0.3, 0.705, 1.0, 1.05] {
                let direct: f64 =
                    z.iter().map(|x| kernel.eval((s - x) / 0.08)).sum::<f64>() / (5.0 * 0.08);
                assert!((h.eval(s) - direct).abs() < 1e-12, "{kernel} {s}");
            }
        }
    }

    #[test]
    fn single_bump_matches_quadrature() {
        let m = measure();
        let k = kde_tv_observable(&m, Kernel::Triangular, 0.2, 1).unwrap();
        let s0 = 0.4;
        let value = k.evaluate(&[s0]);
        // piecewise Simpson, split at every kink of either density
        let hfun = |s: f64| {
            let hn = Kernel::Triangular.eval((s - s0) / 0.2) / 0.2;
            let hu = if (0.0..1.0).contains(&s) {
                m.density()[m.grid().cell_of(s)]
            } else {
                0.0
            };
            (hn - hu).abs()
        };
        let mut knots: Vec<f64> = m.grid().boundaries().to_vec();
        knots.extend([s0 - 0.2, s0, s0 + 0.2]);
        knots.sort_by(f64::total_cmp);
        let mut oracle = 0.0;
        for w in knots.windows(2) {
            if w[1] > w[0] {
                let e = 1e-13;
                // |hn - hu| may cross zero inside a piece; fine resolution handles it
                oracle += simpson(hfun, w[0] + e, w[1] - e, 200);
            }
        }
        assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
    }

    #[test]
    fn degenerate_orbit_at_zero() {
        let m = measure();
        let k = kde_tv_observable(&m, Kernel::Epanechnikov, 0.1, 4).unwrap();
        let z = [0.0; 4];
        let h = k.density(&z);
        assert!((h.integral() - 1.0).abs() < 1e-12);
        // half of the bump lies below 0 where h vanishes
        let v = k.evaluate(&z);
        assert!(v > 0.5 && v <= 2.0);
    }

    #[test]
    fn analytic_bound_certifies() {
        let m = measure();
        for kernel in [Kernel::Triangular, Kernel::Epanechnikov] {
            let k = kde_tv_observable(&m, kernel, 0.1, 100).unwrap();
            let c = certify_lipschitz(&k, 300, 7);
            assert!(c.passed, "{kernel}: {:?}", c.violation.map(|v| v.ratio));
        }
    }

    #[test]
    fn scan_is_stable_across_seeds() {
        let m = measure();
        let k = kde_tv_observable(&m, Kernel::Triangular, 0.1, 100).unwrap();
        let a = lipschitz_scan(&k, 400, 1).bound;
        let b = lipschitz_scan(&k, 400, 2).bound;
        assert!((a / b - 1.0).abs() < 0.1, "{a} {b}");
        assert!(a <= 1.25 * k.lip_bound(0) * (1.0 + 1e-8));
    }

    #[test]
    fn bandwidth_range() {
        let m = measure();
        assert!(kde_tv_observable(&m, Kernel::Triangular, 0.0, 10).is_err());
        assert!(kde_tv_observable(&m, Kernel::Triangular, 1.0, 10).is_err());
    }
}
