use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub(crate) size: usize,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<usize>,
    pub(crate) values: Vec<f64>,
}

impl CsrMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `y = A x` (the matrix acting on functions).
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, slot) in y.iter_mut().enumerate() {
            *slot = self.row(i).map(|(j, a)| a * x[j]).sum();
        }
    }

    /// `y = x A` (the matrix acting on row vectors, i.e. on measures).
    pub fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, a) in self.row(i) {
                y[j] += xi * a;
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.row(i).map(|(_, a)| a).sum()).collect()
    }

    /// Rescales each nonempty row to sum to one.
    pub(crate) fn normalize_rows(&mut self) {
        for i in 0..self.size {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let s: f64 = self.values[span.clone()].iter().sum();
            if s > 0.0 {
                self.values[span].iter_mut().for_each(|v| *v /= s);
            }
        }
    }

    /// Builds from per-row `(col, value)` lists. Columns within a row must be
    /// distinct.
    pub(crate) fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let size = rows.len();
        let mut row_ptr = Vec::with_capacity(size + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                cols.push(j);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            size,
            row_ptr,
            cols,
            values,
        }
    }

    /// Time reversal with respect to `pi`: `R_ji = pi_i A_ij / pi_j`, rows
    /// renormalized. Rows with `pi_j = 0` become a self-loop.
    pub(crate) fn reversed(&self, pi: &[f64]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.size];
        for i in 0..self.size {
            for (j, a) in self.row(i) {
                if pi[j] > 0.0 {
                    rows[j].push((i, pi[i] * a / pi[j]));
                }
            }
        }
        for (j, row) in rows.iter_mut().enumerate() {
            if row.is_empty() {
                row.push((j, 1.0));
            }
        }
        let mut m = Self::from_rows(rows);
        m.normalize_rows();
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_rows(vec![
            vec![(1, 0.5), (0, 0.5)],
            vec![(0, 1.0)],
            vec![(2, 0.25), (0, 0.75)],
        ])
    }

    #[test]
    fn products() {
        let m = sample();
        let mut y = vec![0.0; 3];
        m.apply(&[1.0, 2.0, 4.0], &mut y);
        assert_eq!(y, vec![1.5, 1.0, 1.75]);
        m.apply_left(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![2.25, 0.5, 0.25]);
        assert_eq!(m.row_sums(), vec![1.0; 3]);
    }

    #[test]
    fn reversal_is_stochastic() {
        let m = sample();
        let pi = [2.0 / 3.0, 1.0 / 3.0, 0.0];
        let r = m.reversed(&pi);
        for s in r.row_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert_eq!(r.row(2).collect::<Vec<_>>(), vec![(2, 1.0)]);
    }
}
