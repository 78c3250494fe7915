use super::LinalgError;

/// Compressed sparse row matrix with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicates are summed in insertion order.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut t = TripletBuilder::new(n, m);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.add(i, j, v);
                }
            }
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[s..e].binary_search(&j) {
            Ok(k) => self.values[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `b - A x`.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut r = self.mul(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    /// Square sub-matrix on the contiguous index range `range`.
    pub fn submatrix(&self, range: std::ops::Range<usize>) -> SparseMatrix {
        let n = range.len();
        let mut t = TripletBuilder::new(n, n);
        for i in range.clone() {
            for (j, v) in self.row(i) {
                if range.contains(&j) {
                    t.add(i - range.start, j - range.start, v);
                }
            }
        }
        t.build()
    }

    pub fn check_square(&self) -> Result<(), LinalgError> {
        if self.nrows != self.ncols {
            return Err(LinalgError::Dimension(format!(
                "matrix is {}x{}",
                self.nrows, self.ncols
            )));
        }
        Ok(())
    }

    /// Largest `|A_ij - A_ji|` over the index range.
    pub fn asymmetry(&self, range: std::ops::Range<usize>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in range.clone() {
            for (j, v) in self.row(i) {
                if range.contains(&j) {
                    worst = worst.max((v - self.get(j, i)).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.add(0, 0, 1.0);
        t.add(1, 0, 2.0);
        t.add(0, 0, 3.0);
        let a = t.build();
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = SparseMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        assert_eq!(a.mul(&[1.0, 2.0]), vec![6.0, 7.0]);
    }

    #[test]
    fn submatrix_extracts_block() {
        let a = SparseMatrix::from_dense(&[
            vec![1.0, 2.0, 0.0],
            vec![3.0, 4.0, 5.0],
            vec![0.0, 6.0, 7.0],
        ]);
        let s = a.submatrix(1..3);
        assert_eq!(s.get(0, 0), 4.0);
        assert_eq!(s.get(0, 1), 5.0);
        assert_eq!(s.get(1, 0), 6.0);
        assert_eq!(s.get(1, 1), 7.0);
    }

    #[test]
    fn permuted_assembly_is_order_independent() {
        let entries: Vec<(usize, usize, f64)> = (0..200)
            .map(|k| ((k * 7) % 13, (k * 11) % 13, ((k as f64) * 0.731).sin()))
            .collect();
        let mut t1 = TripletBuilder::new(13, 13);
        for &(i, j, v) in &entries {
            t1.add(i, j, v);
        }
        let mut t2 = TripletBuilder::new(13, 13);
        for &(i, j, v) in entries.iter().rev() {
            t2.add(i, j, v);
        }
        let (a, b) = (t1.build(), t2.build());
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..13 {
            for j in 0..13 {
                assert!((a.get(i, j) - b.get(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }
}
