use super::{NumericsError, Tensor};

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing inside each row and every stored
/// value is finite; [`SparseMatrix::from_triplets`] enforces both.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, NumericsError> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &entries {
            if r >= rows || c >= cols {
                return Err(NumericsError::SparseIndex { row: r, col: c, rows, cols });
            }
            if !v.is_finite() {
                return Err(NumericsError::NonFinite(format!("sparse entry ({r}, {c}) = {v}")));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(SparseMatrix { rows, cols, indptr, indices, values })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SparseMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so the transposed rows come out sorted.
        for (r, c, v) in self.iter() {
            let slot = next[c];
            indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out.set(r, c, v);
        }
        out
    }

    /// Sparse-dense product `self * x`. Cost is `O(nnz * x.cols())`.
    pub fn matmul_dense(&self, x: &Tensor) -> Result<Tensor, NumericsError> {
        if self.cols != x.rows() {
            return Err(NumericsError::shape("spmm", self.shape(), x.shape()));
        }
        let width = x.cols();
        let mut out = Tensor::zeros(self.rows, width);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let out_row = out.row_mut(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(c)) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * g`, used by the backward rule of the sparse product.
    pub(crate) fn t_matmul_dense(&self, g: &Tensor) -> Tensor {
        debug_assert_eq!(self.rows, g.rows());
        let width = g.cols();
        let mut out = Tensor::zeros(self.cols, width);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            let g_row = g.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &gv) in out.row_mut(c).iter_mut().zip(g_row) {
                    *o += v * gv;
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| (self.get(c, r) - v).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_spmm_is_noop() {
        let m = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let out = SparseMatrix::identity(3).matmul_dense(&m).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let s = SparseMatrix::from_triplets(2, 3, vec![(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5)]).unwrap();
        assert_eq!(s.row(0), (&[0usize, 2][..], &[2.0, 1.5][..]));
        assert_eq!(s.nnz(), 2);
    }

    #[test]
    fn rejects_out_of_bounds_and_nan() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let s = SparseMatrix::identity(3);
        assert!(s.matmul_dense(&Tensor::zeros(2, 2)).is_err());
    }

    fn sparse_and_dense() -> impl Strategy<Value = (SparseMatrix, Tensor)> {
        (1usize..=50, 1usize..=50, 1usize..=6).prop_flat_map(|(r, c, w)| {
            let trip = prop::collection::vec((0..r, 0..c, -3.0f64..3.0), 0..(r * c).min(200));
            let dense = prop::collection::vec(-3.0f64..3.0, c * w);
            (trip, dense).prop_map(move |(t, d)| {
                (
                    SparseMatrix::from_triplets(r, c, t).unwrap(),
                    Tensor::from_vec(c, w, d).unwrap(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn spmm_agrees_with_dense((s, x) in sparse_and_dense()) {
            let sparse = s.matmul_dense(&x).unwrap();
            let dense = s.to_dense().matmul(&x).unwrap();
            prop_assert!(sparse.max_abs_diff(&dense) < 1e-12);
        }

        #[test]
        fn transpose_is_involution((s, _x) in sparse_and_dense()) {
            prop_assert_eq!(s.transpose().transpose(), s.clone());
            prop_assert_eq!(s.transpose().to_dense(), s.to_dense().transpose());
        }
    }
}
