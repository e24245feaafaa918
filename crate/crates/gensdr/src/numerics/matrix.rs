//! Dense row-major matrices, just enough linear algebra for the rest of the
//! crate. Products are dispatched to a packed gemm kernel through
//! [`Real::gemm`].

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<R>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("Matrix::from_vec", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::shape("Matrix::from_rows", c, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    /// n x 1 column from a slice.
    pub fn column(v: &[R]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = R::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Gather the given rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// Copy of columns `lo..hi`.
    pub fn slice_cols(&self, lo: usize, hi: usize) -> Self {
        assert!(lo <= hi && hi <= self.cols);
        let mut out = Self::zeros(self.rows, hi - lo);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[lo..hi]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn gemm_into(&self, ta: bool, other: &Matrix<R>, tb: bool, out: &mut Matrix<R>) {
        let (m, ka) = if ta {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        };
        let (kb, n) = if tb {
            (other.cols, other.rows)
        } else {
            (other.rows, other.cols)
        };
        assert_eq!(ka, kb, "gemm inner dimension");
        assert_eq!(out.rows, m);
        assert_eq!(out.cols, n);
        let (rsa, csa) = if ta {
            (1isize, self.cols as isize)
        } else {
            (self.cols as isize, 1isize)
        };
        let (rsb, csb) = if tb {
            (1isize, other.cols as isize)
        } else {
            (other.cols as isize, 1isize)
        };
        unsafe {
            R::gemm(
                m,
                ka,
                n,
                R::one(),
                self.data.as_ptr(),
                rsa,
                csa,
                other.data.as_ptr(),
                rsb,
                csb,
                R::zero(),
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
    }

    /// `self * other`
    pub fn matmul(&self, other: &Matrix<R>) -> Result<Matrix<R>> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        self.gemm_into(false, other, false, &mut out);
        Ok(out)
    }

    /// `self * other^T`
    pub fn matmul_nt(&self, other: &Matrix<R>) -> Result<Matrix<R>> {
        if self.cols != other.cols {
            return Err(Error::shape("matmul_nt", self.cols, other.cols));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        self.gemm_into(false, other, true, &mut out);
        Ok(out)
    }

    /// `self^T * other`
    pub fn matmul_tn(&self, other: &Matrix<R>) -> Result<Matrix<R>> {
        if self.rows != other.rows {
            return Err(Error::shape("matmul_tn", self.rows, other.rows));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        self.gemm_into(true, other, false, &mut out);
        Ok(out)
    }

    /// Add `v` to every row.
    pub fn add_row_vector(&mut self, v: &[R]) {
        assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            for (x, b) in self.row_mut(i).iter_mut().zip(v) {
                *x += *b;
            }
        }
    }

    /// Column sums.
    pub fn col_sums(&self) -> Vec<R> {
        let mut out = vec![R::zero(); self.cols];
        for i in 0..self.rows {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += *x;
            }
        }
        out
    }
}

impl<R: Real> std::ops::Index<(usize, usize)> for Matrix<R> {
    type Output = R;
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R: Real> std::ops::IndexMut<(usize, usize)> for Matrix<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transposed_products_agree_with_plain() {
        let a = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 5.0, -6.0]).unwrap();
        let b = Matrix::from_vec(4, 3, vec![1.0, 0.0, 2.0, -1.0, 3.0, 1.0, 0.0, 1.0, 0.0, 2.0, 2.0, 2.0]).unwrap();
        // a * b^T
        let c = a.matmul_nt(&b).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                let direct: f64 = (0..3).map(|k| a[(i, k)] * b[(j, k)]).sum();
                assert!((c[(i, j)] - direct).abs() < 1e-14);
            }
        }
        // a^T * a
        let g = a.matmul_tn(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct: f64 = (0..2).map(|k| a[(k, i)] * a[(k, j)]).sum();
                assert!((g[(i, j)] - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
    }
}
