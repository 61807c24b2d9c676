use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::map::MapModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    Uniform,
    MarkovRefined,
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridScheme::Uniform => "uniform",
            GridScheme::MarkovRefined => "markov_refined",
        })
    }
}

impl FromStr for GridScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GridScheme::Uniform),
            "markov_refined" => Ok(GridScheme::MarkovRefined),
            other => Err(invalid(format!("unknown grid scheme '{other}'"))),
        }
    }
}

/// Ascending cell boundaries `0 = b_0 < b_1 < ... < b_N = 1`. The branch
/// split `1/2` is always a boundary, so every cell lies in one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    boundaries: Vec<f64>,
}

impl Grid {
    pub fn build(model: &MapModel, cells: usize, scheme: GridScheme) -> Result<Self> {
        if cells < 64 {
            return Err(invalid(format!("grid needs at least 64 cells, got {cells}")));
        }
        let boundaries = match scheme {
            GridScheme::Uniform => {
                if cells % 2 != 0 {
                    return Err(invalid("uniform grid needs an even cell count"));
                }
                (0..=cells).map(|k| k as f64 / cells as f64).collect()
            }
            GridScheme::MarkovRefined => markov_refined(model, cells)?,
        };
        Ok(Self { boundaries })
    }

    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        let ok = boundaries.len() >= 3
            && boundaries[0] == 0.0
            && *boundaries.last().unwrap() == 1.0
            && boundaries.windows(2).all(|w| w[0] < w[1])
            && boundaries.contains(&0.5);
        if !ok {
            return Err(invalid(
                "boundaries must increase from 0 to 1 and contain 1/2",
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.boundaries[i + 1] - self.boundaries[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.boundaries[i] + self.boundaries[i + 1])
    }

    /// Index of the cell `[b_i, b_{i+1})` holding `x`; `1` maps to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        let k = self.boundaries.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.cells() - 1)
    }

    /// Cell averages of `f` by 4-point Gauss-Legendre quadrature.
    pub fn project<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        const NODES: [f64; 4] = [
            -0.861_136_311_594_052_6,
            -0.339_981_043_584_856_3,
            0.339_981_043_584_856_3,
            0.861_136_311_594_052_6,
        ];
        const WEIGHTS: [f64; 4] = [
            0.347_854_845_137_453_85,
            0.652_145_154_862_546_1,
            0.652_145_154_862_546_1,
            0.347_854_845_137_453_85,
        ];
        (0..self.cells())
            .map(|i| {
                let (a, b) = self.cell(i);
                let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
                0.5 * NODES
                    .iter()
                    .zip(WEIGHTS)
                    .map(|(&t, w)| w * f(c + h * t))
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Bottom cell `[0, x_{L+1}]`, then each atom `I_l` (from deep to shallow)
/// split into equal cells, with `L = N/4`. Cells are handed out roughly in
/// proportion to the mass `|I_l| x_l^-a`, at least one per atom.
fn markov_refined(model: &MapModel, cells: usize) -> Result<Vec<f64>> {
    let depth = cells / 4;
    let partition = model.partition(depth + 1)?;
    let atoms = depth + 1;
    let extra = cells - (atoms + 1);
    let weights: Vec<f64> = (0..atoms)
        .map(|l| partition.atom_length(l) * partition.point(l).powf(-model.alpha()))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| 1 + (extra as f64 * w / total).floor() as usize)
        .collect();
    let used: usize = counts.iter().sum::<usize>() + 1;
    counts[0] += cells - used;

    let mut boundaries = Vec::with_capacity(cells + 1);
    boundaries.push(0.0);
    for l in (0..atoms).rev() {
        let (lo, _) = partition.atom(l);
        let len = partition.atom_length(l);
        let k = counts[l];
        boundaries.push(lo);
        for m in 1..k {
            boundaries.push(lo + len * m as f64 / k as f64);
        }
    }
    boundaries.push(1.0);
    debug_assert_eq!(boundaries.len(), cells + 1);
    Ok(boundaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_grid_shape() {
        let model = MapModel::new(0.3).unwrap();
        let g = Grid::build(&model, 256, GridScheme::MarkovRefined).unwrap();
        assert_eq!(g.cells(), 256);
        assert!(g.boundaries().windows(2).all(|w| w[0] < w[1]));
        assert!(g.boundaries().contains(&0.5));
        let p = model.partition(65).unwrap();
        for l in 0..=65 {
            assert!(g.boundaries().contains(&p.point(l)));
        }
    }

    #[test]
    fn uniform_grid_needs_even_count() {
        let model = MapModel::new(0.3).unwrap();
        assert!(Grid::build(&model, 65, GridScheme::Uniform).is_err());
        assert!(Grid::build(&model, 32, GridScheme::Uniform).is_err());
        let g = Grid::build(&model, 64, GridScheme::Uniform).unwrap();
        assert_eq!(g.cell_of(0.5), 32);
        assert_eq!(g.cell_of(1.0), 63);
        assert_eq!(g.cell_of(0.0), 0);
    }

    #[test]
    fn projection_is_exact_for_cubics() {
        let model = MapModel::new(0.3).unwrap();
        let g = Grid::build(&model, 64, GridScheme::Uniform).unwrap();
        let p = g.project(|x| x * x * x);
        let (a, b) = g.cell(10);
        let exact = (b.powi(4) - a.powi(4)) / 4.0 / (b - a);
        assert!((p[10] - exact).abs() < 1e-15);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [GridScheme::Uniform, GridScheme::MarkovRefined] {
            assert_eq!(s.to_string().parse::<GridScheme>().unwrap(), s);
        }
    }
}
