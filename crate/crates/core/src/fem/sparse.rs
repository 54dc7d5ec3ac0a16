use std::io::Write;

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

/// Sparse matrix in compressed-row storage.
///
/// The sparsity pattern is structural: explicit zeros produced by assembly
/// are kept, so operators assembled on the same space share a pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds from (row, col, value) triplets; duplicates are summed in input
    /// order, so the result is deterministic.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values, symmetric: false }
    }

    /// Zero-valued operator with a given pattern; columns must be sorted
    /// within each row.
    pub fn from_pattern(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1);
        assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        let values = vec![0.0; col_idx.len()];
        Self { nrows, ncols, row_ptr, col_idx, values, symmetric: false }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Storage index of entry (r, c), if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.col_idx[start..self.row_ptr[r + 1]].binary_search(&c).ok().map(|k| start + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Bilinear form yᵀ A x.
    pub fn dot(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        (0..self.nrows).map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self + alpha * other` on the union of both patterns.
    pub fn add_scaled(&self, other: &Self, alpha: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for r in 0..self.nrows {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        col_idx.push(ca);
                        values.push(va + alpha * vb);
                        a.next();
                        b.next();
                    }
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        col_idx.push(ca);
                        values.push(va);
                        a.next();
                    }
                    (Some((ca, va)), None) => {
                        col_idx.push(ca);
                        values.push(va);
                        a.next();
                    }
                    (_, Some((cb, vb))) => {
                        col_idx.push(cb);
                        values.push(alpha * vb);
                        b.next();
                    }
                    (None, None) => break,
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric && other.symmetric,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            let start = col_idx.len();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        col_idx.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            col_idx[start..].sort_unstable();
            values.extend(col_idx[start..].iter().map(|&c| acc[c]));
            row_ptr.push(col_idx.len());
        }
        Self { nrows: self.nrows, ncols: other.ncols, row_ptr, col_idx, values, symmetric: false }
    }

    /// Block-diagonal operator with `copies` copies of `self`.
    pub fn block_diag(&self, copies: usize) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::with_capacity(copies * self.nnz());
        let mut values = Vec::with_capacity(copies * self.nnz());
        for b in 0..copies {
            for r in 0..self.nrows {
                for (c, v) in self.row(r) {
                    col_idx.push(b * self.ncols + c);
                    values.push(v);
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self {
            nrows: copies * self.nrows,
            ncols: copies * self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let diff = self.add_scaled(&t, -1.0);
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            diff.max_abs() / scale
        }
    }

    /// Compressed-column copy for the sparse direct solver, plus the map from
    /// CSR storage index to CSC storage index.
    pub fn to_csc(&self) -> (SparseColMat<usize, f64>, Vec<usize>) {
        let t = self.transpose();
        let mut csr_to_csc = vec![0; self.nnz()];
        // position in CSC (= CSR of transpose) of each CSR entry
        let mut next = t.row_ptr.clone();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                csr_to_csc[k] = next[c];
                next[c] += 1;
            }
        }
        let symbolic = SymbolicSparseColMat::new_checked(self.nrows, self.ncols, t.row_ptr, None, t.col_idx);
        (SparseColMat::new(symbolic, t.values), csr_to_csc)
    }

    /// Writes one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{r} {c} {v:?}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseOperator {
        SparseOperator::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, -1.0), (0, 0, 1.0), (2, 2, 4.0)],
        )
    }

    #[test]
    fn duplicates_sum_and_matvec() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![4.0, 3.0, 3.0]);
        assert_eq!(a.dot(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]), 1.0);
    }

    #[test]
    fn transpose_add_matmul() {
        let a = sample();
        let at = a.transpose();
        assert_eq!(at.get(0, 2), -1.0);
        assert_eq!(at.get(2, 0), 1.0);
        let s = a.add_scaled(&at, 1.0);
        assert_eq!(s.symmetry_defect(), 0.0);
        let p = a.matmul(&SparseOperator::identity(3));
        assert_eq!(p, a);
        let sq = a.matmul(&a);
        // row 0 of A^2: [3,0,1]*A = [3*3 + 1*(-1), 0, 3*1 + 1*4]
        assert_eq!(sq.get(0, 0), 8.0);
        assert_eq!(sq.get(0, 2), 7.0);
    }

    #[test]
    fn block_diag_and_csc() {
        let a = sample();
        let b = a.block_diag(2);
        assert_eq!(b.nrows(), 6);
        assert_eq!(b.get(3, 5), 1.0);
        let (csc, map) = b.to_csc();
        let (_, vals) = csc.parts();
        for r in 0..b.nrows() {
            for k in b.row_ptr()[r]..b.row_ptr()[r + 1] {
                assert_eq!(vals[map[k]], b.values()[k]);
            }
        }
    }

    #[test]
    fn triplet_export() {
        let mut buf = Vec::new();
        sample().write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "0 0 3.0");
        assert_eq!(text.lines().count(), 5);
    }
}
