use serde::{Deserialize, Serialize};

use super::{check_grid, column, fit_median_rate, fmt_list, prefix_trials, Check, ExperimentResult, PointStats};
use crate::error::{invalid, Result};
use crate::map::MapModel;
use crate::measure::UlamMeasure;
use crate::observables::{shadowing_observables, IntervalUnion, ShadowingObservable};
use crate::rng::{derive_seed, StreamId};
use crate::stats::quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowingConfig {
    pub set: Vec<(f64, f64)>,
    pub n_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
    pub trials: usize,
    /// Grid candidates in `A`.
    pub candidates: usize,
    /// Backward depth for exact preimage candidates.
    pub preimage_depth: usize,
    /// Allowed growth of the upper quartile over its value at the smallest `n`.
    pub stability_factor: f64,
}

impl Default for ShadowingConfig {
    fn default() -> Self {
        Self {
            set: vec![(0.4, 0.6)],
            n_grid: vec![100, 1_000, 10_000],
            eps_grid: vec![0.05, 0.1, 0.2],
            trials: 500,
            candidates: 64,
            preimage_depth: 8,
            stability_factor: 2.0,
        }
    }
}

/// Distributions of `Z_A` and `Z'_{A,eps}` along orbits drawn from `mu`,
/// with the `n^{1/3}` and `eps^{2/3} n^{1/3}` scalings checked one-sidedly.
pub fn run_shadowing(
    model: &MapModel,
    measure: &UlamMeasure,
    config: &ShadowingConfig,
    seed: u64,
) -> Result<ExperimentResult> {
    check_grid(&config.n_grid)?;
    if config.eps_grid.is_empty() || config.eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("eps grid must be nonempty and positive"));
    }
    let set = IntervalUnion::new(config.set.clone())?;
    let mass = set.mass(measure);
    if !(mass > 0.0) {
        return Err(invalid("A has zero invariant mass"));
    }
    let seed = derive_seed(seed, StreamId::SHADOWING.0);
    let obs: Vec<ShadowingObservable> = config
        .n_grid
        .iter()
        .map(|&n| shadowing_observables(&set, n, config.eps_grid[0], config.candidates, model).map(|p| p.0))
        .collect::<Result<_>>()?;
    let eps = &config.eps_grid;
    // columns: z_a, then (smoothed, raw, pointwise-ok) per eps
    let table = prefix_trials(model, measure, &config.n_grid, config.trials, seed, |i, z| {
        let mut out = Vec::with_capacity(1 + 3 * eps.len());
        let base = obs[i].orbit_scores(model, z, eps[0], config.preimage_depth);
        out.push(base.z_a);
        for &e in eps {
            let s = obs[i].orbit_scores(model, z, e, config.preimage_depth);
            out.push(s.mismatch);
            out.push(s.mismatch_raw);
            let ok = s.mismatch <= s.z_a / e && s.mismatch_raw <= s.z_a / e;
            out.push(if ok { 1.0 } else { 0.0 });
        }
        out
    });

    let mut points = Vec::new();
    let mut za_cols = Vec::new();
    let mut q_za = Vec::new();
    let mut q_mis: Vec<Vec<f64>> = vec![Vec::new(); eps.len()];
    let mut pointwise_fail = 0usize;
    for (i, &n) in config.n_grid.iter().enumerate() {
        let n13 = (n as f64).cbrt();
        let za = column(&table[i], 0);
        points.push(PointStats::from_values(n, None, "z_a", &za));
        q_za.push(n13 * quantile(&za, 0.75));
        for (k, &e) in eps.iter().enumerate() {
            let s = column(&table[i], 1 + 3 * k);
            let r = column(&table[i], 2 + 3 * k);
            pointwise_fail += column(&table[i], 3 + 3 * k).iter().filter(|&&ok| ok == 0.0).count();
            points.push(PointStats::from_values(n, Some(("eps".into(), e)), "mismatch", &s));
            points.push(PointStats::from_values(n, Some(("eps".into(), e)), "mismatch_raw", &r));
            q_mis[k].push(e.powf(2.0 / 3.0) * n13 * quantile(&s, 0.75));
        }
        za_cols.push(za);
    }
    let f = config.stability_factor;
    let bounded = |q: &[f64]| q.iter().all(|&v| v <= f * q[0]);
    let mut checks = vec![
        Check::new(
            "z_a_upper_quartile_bounded",
            bounded(&q_za),
            format!("q75 of n^(1/3) Z_A: {} (limit {f} x first)", fmt_list(&q_za)),
        ),
        Check::new(
            "mismatch_below_z_a_over_eps",
            pointwise_fail == 0,
            format!("{pointwise_fail} pointwise violations"),
        ),
    ];
    for (k, &e) in eps.iter().enumerate() {
        checks.push(Check::new(
            &format!("mismatch_upper_quartile_bounded_eps{e}"),
            bounded(&q_mis[k]),
            format!("q75 of eps^(2/3) n^(1/3) Z': {}", fmt_list(&q_mis[k])),
        ));
    }
    Ok(ExperimentResult {
        experiment: "shadowing".into(),
        alpha: model.alpha(),
        seed,
        points,
        fits: fit_median_rate("z_a", &config.n_grid, &za_cols, seed).into_iter().collect(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_ulam, GridScheme};

    #[test]
    fn whole_interval_gives_zero() {
        let model = MapModel::new(0.3).unwrap();
        let (m, _) = build_ulam(&model, 512, GridScheme::MarkovRefined).unwrap();
        let cfg = ShadowingConfig {
            set: vec![(0.0, 1.0)],
            n_grid: vec![20, 40],
            trials: 100,
            ..Default::default()
        };
        let r = run_shadowing(&model, &m, &cfg, 2).unwrap();
        assert!(r.series("z_a").iter().all(|p| p.max == 0.0));
        assert!(r.check("mismatch_below_z_a_over_eps").unwrap().passed);
    }

    #[test]
    fn empty_set_is_rejected() {
        let model = MapModel::new(0.3).unwrap();
        let (m, _) = build_ulam(&model, 256, GridScheme::MarkovRefined).unwrap();
        let cfg = ShadowingConfig {
            set: vec![],
            ..Default::default()
        };
        assert!(run_shadowing(&model, &m, &cfg, 2).is_err());
    }
}
