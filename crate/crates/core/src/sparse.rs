//! Thin wrapper around a compressed-column complex sparse matrix.

use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, Complex64>,
}

impl SparseMatrix {
    /// Compresses `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, Complex64>> =
            triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &t)
            .map_err(|e| Error::invalid(format!("bad sparse triplets: {e:?}")))?;
        Ok(Self { inner })
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect();
        Self::from_triplets(n, n, &t).expect("identity triplets are valid")
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    /// Number of stored entries (explicit zeros included).
    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    pub fn as_faer(&self) -> &SparseColMat<usize, Complex64> {
        &self.inner
    }

    /// Stored entries in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let sym = self.inner.symbolic();
        let (ptr, rows, vals) = (sym.col_ptr(), sym.row_idx(), self.inner.val());
        (0..self.ncols()).flat_map(move |j| (ptr[j]..ptr[j + 1]).map(move |k| (rows[k], j, vals[k])))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let sym = self.inner.symbolic();
        let (ptr, rows) = (sym.col_ptr(), sym.row_idx());
        let range = ptr[j]..ptr[j + 1];
        match rows[range.clone()].binary_search(&i) {
            Ok(k) => self.inner.val()[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y += alpha · self · x`.
    pub fn mul_add(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let sym = self.inner.symbolic();
        let (ptr, rows, vals) = (sym.col_ptr(), sym.row_idx(), self.inner.val());
        for (j, &xj) in x.iter().enumerate() {
            let a = alpha * xj;
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in ptr[j]..ptr[j + 1] {
                y[rows[k]] += vals[k] * a;
            }
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows()];
        self.mul_add(Complex64::new(1.0, 0.0), x, &mut y);
        y
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let sym = self.inner.symbolic();
        let ptr = sym.col_ptr();
        let vals = self.inner.val();
        (0..self.ncols())
            .map(|j| vals[ptr[j]..ptr[j + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.val().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Entrywise `self + sign · selfᵀ` magnitude, maximum over stored positions.
    /// With `sign = -1` this measures symmetry, with `+1` skew-symmetry.
    pub fn transpose_defect(&self, sign: f64) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v + self.get(j, i) * sign).norm())
            .fold(0.0, f64::max)
    }

    /// `a·self + b·other` on the union pattern.
    pub fn linear_combination(&self, a: Complex64, other: &SparseMatrix, b: Complex64) -> Result<SparseMatrix> {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return Err(Error::invalid("dimension mismatch in sparse combination"));
        }
        let t: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, v * a))
            .chain(other.triplets().map(|(i, j, v)| (i, j, v * b)))
            .collect();
        SparseMatrix::from_triplets(self.nrows(), self.ncols(), &t)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.ncols()]; self.nrows()];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, c64(1.0, 0.0)),
                (0, 0, c64(1.0, 1.0)),
                (2, 1, c64(-3.0, 0.0)),
                (1, 2, c64(3.0, 0.0)),
                (1, 1, c64(0.0, 2.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = sample();
        assert_eq!(m.get(0, 0), c64(2.0, 1.0));
        assert_eq!(m.get(2, 2), c64(0.0, 0.0));
        assert_eq!(m.nnz(), 4);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = sample();
        let x = vec![c64(1.0, 2.0), c64(-1.0, 0.5), c64(0.0, 1.0)];
        let y = m.matvec(&x);
        let d = m.to_dense();
        for i in 0..3 {
            let yi: Complex64 = (0..3).map(|j| d[i][j] * x[j]).sum();
            assert!((yi - y[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn norms_and_defects() {
        let m = sample();
        assert!((m.norm_1() - 5.0).abs() < 1e-15);
        assert!((m.max_abs() - 3.0).abs() < 1e-15);
        let skew = SparseMatrix::from_triplets(2, 2, &[(0, 1, c64(1.0, 1.0)), (1, 0, c64(-1.0, -1.0))]).unwrap();
        assert_eq!(skew.transpose_defect(1.0), 0.0);
        assert!(skew.transpose_defect(-1.0) > 0.0);
    }

    #[test]
    fn combination() {
        let m = sample();
        let i = SparseMatrix::identity(3);
        let s = m.linear_combination(c64(2.0, 0.0), &i, c64(0.0, 1.0)).unwrap();
        assert_eq!(s.get(0, 0), c64(4.0, 3.0));
        assert_eq!(s.get(2, 2), c64(0.0, 1.0));
        assert!(m.linear_combination(c64(1.0, 0.0), &SparseMatrix::identity(2), c64(1.0, 0.0)).is_err());
    }
}
