use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and no explicit
/// zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

/// Coordinate-format accumulator; duplicates are summed by [`CooBuilder::finish`].
#[derive(Debug, Clone)]
pub struct CooBuilder<T> {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> CooBuilder<T> {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        CooBuilder {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, capacity: usize) -> Self {
        CooBuilder {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    /// Sorts, sums duplicates in insertion order (deterministic) and drops exact zeros.
    pub fn finish(mut self) -> CsrMatrix<T> {
        // Stable sort keeps the summation order of duplicates fixed.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut iter = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v != T::zero() {
                rows.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            row_offsets[r + 1] += 1;
        }
        for i in 0..self.n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from raw CSR arrays, checking the structural invariants.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::validation("row_offsets must have n_rows + 1 entries starting at 0"));
        }
        if col_indices.len() != values.len() || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::validation("col_indices/values length disagrees with row_offsets"));
        }
        for r in 0..n_rows {
            let (s, e) = (row_offsets[r], row_offsets[r + 1]);
            if s > e {
                return Err(Error::validation(format!("row_offsets decrease at row {r}")));
            }
            let cols = &col_indices[s..e];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::validation(format!(
                    "row {r}: column indices must be strictly increasing and < {n_cols}"
                )));
            }
            if values[s..e].iter().any(|v| *v == T::zero()) {
                return Err(Error::validation(format!("row {r} stores an explicit zero")));
            }
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut b = CooBuilder::with_capacity(d.len(), d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.push(i, i, v);
        }
        b.finish()
    }

    /// Dense row-major input, mostly for tests and small oracles.
    pub fn from_dense(n_rows: usize, n_cols: usize, dense: &[T]) -> Self {
        assert_eq!(dense.len(), n_rows * n_cols);
        let mut b = CooBuilder::new(n_rows, n_cols);
        for r in 0..n_rows {
            for c in 0..n_cols {
                b.push(r, c, dense[r * n_cols + c]);
            }
        }
        b.finish()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Iterates over `(col, value)` of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal_values(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = self * x`
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n_cols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.n_rows, "matvec: y has wrong length");
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T S y`
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        crate::scalar::dot(x, &self.mul_vec(y))
    }

    pub fn transpose(&self) -> Self {
        let mut b = CooBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                b.push(c, r, v);
            }
        }
        b.finish()
    }

    pub fn scale(&self, alpha: T) -> Self {
        self.map_values(|v| alpha * v)
    }

    fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut b = CooBuilder::with_capacity(self.n_rows, self.n_cols, self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                b.push(r, c, f(v));
            }
        }
        b.finish()
    }

    /// `sum_i alpha_i * S_i` over matrices of equal shape.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let (n_rows, n_cols) = (first.n_rows, first.n_cols);
        let mut b = CooBuilder::with_capacity(n_rows, n_cols, terms.iter().map(|(_, m)| m.nnz()).sum());
        for (alpha, m) in terms {
            if m.n_rows != n_rows || m.n_cols != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    found: m.n_rows,
                });
            }
            for r in 0..n_rows {
                for (c, v) in m.row(r) {
                    b.push(r, c, *alpha * v);
                }
            }
        }
        Ok(b.finish())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |S - S^T|`
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        CsrMatrix::linear_combination(&[(T::one(), self), (-T::one(), &t)])
            .map(|d| d.max_abs())
            .unwrap_or_else(|_| T::infinity())
    }

    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        self.is_square() && self.asymmetry() <= rel_tol * self.max_abs()
    }

    /// `(S - S^T) / 2`, skew-symmetric to the last bit: entry `(j, i)` is
    /// computed as the exact negation of entry `(i, j)`.
    pub fn skew_part(&self) -> Self {
        let t = self.transpose();
        let mut b = CooBuilder::with_capacity(self.n_rows, self.n_cols, 2 * self.nnz());
        let half = T::of(0.5);
        let mut upper = Vec::new();
        for r in 0..self.n_rows {
            upper.clear();
            // Merge row r of S and S^T.
            let mut a = self.row(r).peekable();
            let mut bt = t.row(r).peekable();
            loop {
                let next = match (a.peek(), bt.peek()) {
                    (None, None) => break,
                    (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                        a.next();
                        bt.next();
                        (ca, va - vb)
                    }
                    (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                        a.next();
                        (ca, va)
                    }
                    (Some(_), Some(&(cb, vb))) => {
                        bt.next();
                        (cb, -vb)
                    }
                    (Some(&(ca, va)), None) => {
                        a.next();
                        (ca, va)
                    }
                    (None, Some(&(cb, vb))) => {
                        bt.next();
                        (cb, -vb)
                    }
                };
                if next.0 > r {
                    upper.push(next);
                }
            }
            for &(c, d) in &upper {
                let v = half * d;
                b.push(r, c, v);
                b.push(c, r, -v);
            }
        }
        b.finish()
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                d[r * self.n_cols + c] = v;
            }
        }
        d
    }

    /// MatrixMarket coordinate format (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let _ = writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v);
            }
        }
        out
    }
}

/// Precomputed union pattern of two matrices, for refilling
/// `alpha * A + beta * B` cheaply when only the weights change.
#[derive(Debug, Clone)]
pub struct PatternSum<T> {
    pattern: CsrMatrix<T>,
    // Per union slot: index into A's values and B's values.
    from_a: Vec<Option<usize>>,
    from_b: Vec<Option<usize>>,
}

impl<T: Real> PatternSum<T> {
    pub fn new(a: &CsrMatrix<T>, b: &CsrMatrix<T>) -> Result<Self> {
        if a.n_rows != b.n_rows || a.n_cols != b.n_cols {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows,
                found: b.n_rows,
            });
        }
        let mut row_offsets = vec![0];
        let mut cols = Vec::new();
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        for r in 0..a.n_rows {
            let (mut i, ie) = (a.row_offsets[r], a.row_offsets[r + 1]);
            let (mut j, je) = (b.row_offsets[r], b.row_offsets[r + 1]);
            while i < ie || j < je {
                let ca = (i < ie).then(|| a.col_indices[i]);
                let cb = (j < je).then(|| b.col_indices[j]);
                match (ca, cb) {
                    (Some(x), Some(y)) if x == y => {
                        cols.push(x);
                        from_a.push(Some(i));
                        from_b.push(Some(j));
                        i += 1;
                        j += 1;
                    }
                    (Some(x), Some(y)) if x < y => {
                        cols.push(x);
                        from_a.push(Some(i));
                        from_b.push(None);
                        i += 1;
                    }
                    (Some(x), None) => {
                        cols.push(x);
                        from_a.push(Some(i));
                        from_b.push(None);
                        i += 1;
                    }
                    (_, Some(y)) => {
                        cols.push(y);
                        from_a.push(None);
                        from_b.push(Some(j));
                        j += 1;
                    }
                    (None, None) => unreachable!(),
                }
            }
            row_offsets.push(cols.len());
        }
        let n = cols.len();
        Ok(PatternSum {
            pattern: CsrMatrix {
                n_rows: a.n_rows,
                n_cols: a.n_cols,
                row_offsets,
                col_indices: cols,
                values: vec![T::zero(); n],
            },
            from_a,
            from_b,
        })
    }

    /// Returns `alpha * A + beta * B` (explicit zeros removed).
    pub fn combine(&self, alpha: T, a: &CsrMatrix<T>, beta: T, b: &CsrMatrix<T>) -> CsrMatrix<T> {
        let values: Vec<T> = self
            .from_a
            .iter()
            .zip(&self.from_b)
            .map(|(ia, ib)| {
                let va = ia.map_or(T::zero(), |k| alpha * a.values[k]);
                let vb = ib.map_or(T::zero(), |k| beta * b.values[k]);
                va + vb
            })
            .collect();
        if values.iter().all(|v| *v != T::zero()) {
            let mut m = self.pattern.clone();
            m.values = values;
            return m;
        }
        let p = &self.pattern;
        let mut builder = CooBuilder::with_capacity(p.n_rows, p.n_cols, values.len());
        for r in 0..p.n_rows {
            for k in p.row_offsets[r]..p.row_offsets[r + 1] {
                builder.push(r, p.col_indices[k], values[k]);
            }
        }
        builder.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        CsrMatrix::from_dense(3, 3, &[4.0, 1.0, 0.0, 2.0, 5.0, -1.0, 0.0, 0.5, 3.0])
    }

    #[test]
    fn coo_sums_duplicates_and_drops_zeros() {
        let mut b = CooBuilder::new(2, 2);
        b.push(1, 1, 2.0);
        b.push(0, 1, 1.0);
        b.push(0, 1, -1.0);
        b.push(1, 1, 3.0);
        b.push(1, 0, 0.0);
        let m = b.finish();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 1), 5.0);
        assert_eq!(m.row_offsets(), &[0, 0, 1]);
    }

    #[test]
    fn from_raw_rejects_unsorted_columns() {
        assert!(CsrMatrix::from_raw(1, 3, vec![0, 2], vec![2, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_raw(1, 3, vec![0, 1], vec![1], vec![0.0]).is_err());
        assert!(CsrMatrix::from_raw(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn matvec_and_transpose() {
        let m = sample();
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![5.0, 6.0, 3.5]);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.get(0, 1), 2.0);
        assert_eq!(t.transpose(), m);
        assert_eq!(m.asymmetry(), 1.5);
        assert!(!m.is_symmetric(1e-13));
    }

    #[test]
    fn skew_part_is_exactly_antisymmetric() {
        let m = sample();
        let s = m.skew_part();
        let sum = CsrMatrix::linear_combination(&[(1.0, &s), (1.0, &s.transpose())]).unwrap();
        assert_eq!(sum.nnz(), 0);
        assert_eq!(s.get(0, 1), -0.5);
        assert_eq!(s.get(1, 2), -0.75);
    }

    #[test]
    fn pattern_sum_matches_linear_combination() {
        let a = sample();
        let b = CsrMatrix::diagonal(&[1.0, -5.0, 2.0]);
        let ps = PatternSum::new(&a, &b).unwrap();
        let direct = CsrMatrix::linear_combination(&[(2.0, &a), (3.0, &b)]).unwrap();
        assert_eq!(ps.combine(2.0, &a, 3.0, &b), direct);
        // (1,1): 5 - 5 = 0 must be dropped.
        let cancel = ps.combine(1.0, &a, 1.0, &b);
        assert_eq!(cancel.get(1, 1), 0.0);
        assert_eq!(cancel.nnz(), a.nnz() - 1);
    }

    #[test]
    fn matrix_market_header() {
        let mm = CsrMatrix::<f64>::identity(2).to_matrix_market();
        assert!(mm.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 "));
    }
}
