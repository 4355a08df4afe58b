//! Minimal compressed-sparse-row matrix: just what assembly and projected SOR
//! need (row iteration, diagonal lookup, matvec, exact symmetry check).

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists; entries in a row are sorted by column
    /// and duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows, row_ptr, col_idx, values }
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    /// Diagonal entry of row i, or 0 if absent.
    pub fn diag(&self, i: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
    }

    /// True iff A(i,j) == A(j,i) bitwise for every stored entry.
    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if self.get(j, i) != v {
                    return false;
                }
            }
        }
        true
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> CsrMatrix {
        CsrMatrix::from_rows(vec![
            vec![(0, 2.0), (1, -1.0)],
            vec![(1, 2.0), (0, -1.0), (2, -1.0)],
            vec![(2, 2.0), (1, -1.0)],
        ])
    }

    #[test]
    fn rows_sorted_and_indexed() {
        let a = example();
        assert_eq!(a.row(1), (&[0usize, 1, 2][..], &[-1.0, 2.0, -1.0][..]));
        assert_eq!(a.diag(1), 2.0);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.nnz(), 7);
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0), (0, 1.5)]]);
        assert_eq!(a.diag(0), 2.5);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = example();
        let mut y = vec![0.0; 3];
        a.mul_vec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn symmetry_check() {
        assert!(example().is_symmetric());
        let skew = CsrMatrix::from_rows(vec![vec![(0, 1.0), (1, 0.5)], vec![(1, 1.0)]]);
        assert!(!skew.is_symmetric());
    }
}
