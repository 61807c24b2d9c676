//! Sampled estimates of the distortion constants for pairs of points that
//! share Markov atoms along `m` iterates:
//!
//! ```text
//! C1(m) = sup (|z - z'| / z) / (|T^m z - T^m z'| / T^m z)
//! C2(m) = sup |z - z'| (m+1)^(1/a) T^m z / |T^m z - T^m z'|
//! ```
//!
//! Pairs are built backwards: two close points `w, w'` in one atom `I_l` are
//! pulled back `m` times along a common branch word, which keeps every
//! intermediate pair inside a common atom. The separation is carried
//! alongside the base point so that it never suffers cancellation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Branch, MapModel, MarkovPartition};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, StreamId};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionConfig {
    pub m_max: usize,
    /// Candidate pairs drawn for each `m`.
    pub samples: usize,
    /// Deepest atom used as the landing atom of `T^m`.
    pub max_atom: usize,
    pub seed: u64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self {
            m_max: 30,
            samples: 10_000,
            max_atom: 1000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    pub alpha: f64,
    pub m: Vec<usize>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub accepted: Vec<usize>,
}

impl DistortionReport {
    /// Largest ratio `max / median` and smallest `min / median` over `m`, for
    /// `C1` and `C2` respectively.
    pub fn spread(&self) -> ((f64, f64), (f64, f64)) {
        (spread_of(&self.c1), spread_of(&self.c2))
    }
}

fn spread_of(values: &[f64]) -> (f64, f64) {
    let med = crate::stats::median(values);
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    (max / med, min / med)
}

// Pairs closer than this (relative to the point) are discarded as degenerate.
const DEGENERATE_REL: f64 = 1e-13;

/// Runs the sampled check. `partition` must reach depth
/// `max_atom + m_max + 2`.
pub fn distortion_ratio_check(
    model: &MapModel,
    partition: &MarkovPartition,
    config: &DistortionConfig,
) -> Result<DistortionReport> {
    if config.m_max == 0 || config.samples == 0 {
        return Err(invalid("m_max and samples must be positive"));
    }
    let needed = config.max_atom + config.m_max + 2;
    if partition.depth() < needed {
        return Err(invalid(format!(
            "partition depth {} too shallow, need {needed}",
            partition.depth()
        )));
    }
    let exponent = 1.0 / model.alpha();
    let mut report = DistortionReport {
        alpha: model.alpha(),
        m: Vec::new(),
        c1: Vec::new(),
        c2: Vec::new(),
        accepted: Vec::new(),
    };
    for m in 1..=config.m_max {
        let mut rng = stream(config.seed, StreamId::DISTORTION, m as u64);
        let mut c1 = 0.0f64;
        let mut c2 = 0.0f64;
        let mut accepted = 0usize;
        for _ in 0..config.samples {
            let Some(pair) = sample_pair(model, partition, config.max_atom, m, &mut rng)? else {
                continue;
            };
            accepted += 1;
            let rel_z = pair.dz.abs() / pair.z;
            let rel_w = pair.dw.abs() / pair.w;
            c1 = c1.max(rel_z / rel_w);
            c2 = c2.max(pair.dz.abs() * ((m + 1) as f64).powf(exponent) * pair.w / pair.dw.abs());
        }
        if accepted == 0 {
            return Err(Error::Sampling(format!("no same-atom pair accepted for m = {m}")));
        }
        report.m.push(m);
        report.c1.push(c1);
        report.c2.push(c2);
        report.accepted.push(accepted);
    }
    Ok(report)
}

struct Pair {
    z: f64,
    dz: f64,
    w: f64,
    dw: f64,
}

fn sample_pair<R: Rng>(
    model: &MapModel,
    partition: &MarkovPartition,
    max_atom: usize,
    m: usize,
    rng: &mut R,
) -> Result<Option<Pair>> {
    // Landing atom: log-uniform over 0..=max_atom.
    let atom = ((rng.random::<f64>() * ((max_atom + 1) as f64).ln()).exp() as usize)
        .saturating_sub(1)
        .min(max_atom);
    let (lo, hi) = partition.atom(atom);
    let len = partition.atom_length(atom);
    let w = lo + len * rng.random::<f64>();
    let gap = len * 10f64.powf(-6.0 * rng.random::<f64>()) * rng.random::<f64>();
    let w2 = if w + gap <= hi {
        w + gap
    } else if w - gap > lo {
        w - gap
    } else {
        return Ok(None);
    };
    let dw = w2 - w;
    if dw == 0.0 || dw.abs() < DEGENERATE_REL * w || partition.atom_index(w2) != Some(atom) {
        return Ok(None);
    }

    // Word: a leading run of left pulls of uniform length, then fair coins.
    let run = rng.random_range(0..=m);
    let mut z = w;
    let mut dz = dw;
    let mut expected = atom;
    for step in 0..m {
        let branch = if step < run || rng.random::<bool>() {
            Branch::Left
        } else {
            Branch::Right
        };
        match branch {
            Branch::Right => {
                z = model.inverse(z, Branch::Right)?;
                dz *= 0.5;
                expected = 0;
            }
            Branch::Left => {
                let z_new = model.inverse(z, Branch::Left)?;
                dz = left_pullback_gap(model, z_new, dz);
                z = z_new;
                expected += 1;
            }
        }
        if partition.atom_index(z) != Some(expected)
            || partition.atom_index(z + dz) != Some(expected)
        {
            return Ok(None);
        }
    }
    if dz == 0.0 || dz.abs() < DEGENERATE_REL * z {
        return Ok(None);
    }
    Ok(Some(Pair { z, dz, w, dw }))
}

/// Solves `T(z + d) - T(z) = gap` for `d` on the left branch.
fn left_pullback_gap(model: &MapModel, z: f64, gap: f64) -> f64 {
    let mut d = gap / model.derivative_unchecked(z);
    for _ in 0..6 {
        let f = model.left_gap_image(z, d) - gap;
        let fp = model.derivative_unchecked((z + d).max(0.0));
        let step = f / fp;
        d -= step;
        if step.abs() <= 1e-15 * d.abs() {
            break;
        }
    }
    d
}
