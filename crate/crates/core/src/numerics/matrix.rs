//! Small dense matrices (n <= 16) with rank and spectrum helpers.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, EvalError, EvalResult, Result};
use crate::numerics::jet::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        DenseMatrix::from_rows(rows.len(), cols, rows.concat())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = DenseMatrix::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: rhs.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: rhs.rows * rhs.cols,
            });
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let rows: Vec<Vec<f64>> = (0..self.rows).map(|i| self.row(i).to_vec()).collect();
        solve_generic(rows, b.to_vec()).map_err(|_| Error::SingularMatrix)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        let n = self.rows;
        let mut inv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Gaussian elimination over any scalar type, pivoting on primal values.
pub fn solve_generic<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> EvalResult<Vec<S>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(|v| v.value().abs()))
        .fold(0.0, f64::max);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .value()
                    .abs()
                    .total_cmp(&a[j][col].value().abs())
            })
            .expect("non-empty pivot range");
        if a[pivot][col].value().abs() <= f64::EPSILON * scale * n as f64 {
            return Err(EvalError::SingularJacobian);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col].try_div(&a[col][col])?;
            if factor.is_constant() && factor.value() == 0.0 {
                continue;
            }
            for k in col..n {
                let t = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - t;
            }
            let t = factor * b[col].clone();
            b[row] = b[row].clone() - t;
        }
    }
    let mut x = vec![S::constant(0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc.try_div(&a[row][row])?;
    }
    Ok(x)
}

/// Numerical rank with a relative singular-value threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEstimate {
    pub rank: usize,
    /// Non-negative, sorted descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl RankEstimate {
    /// Smallest over largest singular value; 0 for a zero matrix.
    pub fn relative_gap(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&max), Some(&min)) if max > 0.0 => min / max,
            _ => 0.0,
        }
    }
}

/// Counts singular values above `threshold * sigma_max`.
pub fn numerical_rank(m: &DenseMatrix, threshold: f64) -> Result<RankEstimate> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "rank threshold must lie in (0,1), got {threshold}"
        )));
    }
    let mut sv: Vec<f64> = m.to_nalgebra().singular_values().iter().map(|s| s.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let cutoff = threshold * sv[0];
    let rank = if sv[0] == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > cutoff).count()
    };
    Ok(RankEstimate {
        rank,
        singular_values: sv,
        threshold,
    })
}

/// Moduli of all eigenvalues, descending.
///
/// Uses the characteristic polynomial for n <= 2 and a real Schur
/// reduction otherwise.
pub fn eigen_moduli(m: &DenseMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let mut moduli = match m.rows {
        0 => return Err(Error::EmptyMatrix),
        1 => vec![m[(0, 0)].abs()],
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            let disc = tr * tr - 4.0 * det;
            if disc >= 0.0 {
                // larger root first, smaller from Vieta to avoid cancellation
                let sign = if tr >= 0.0 { 1.0 } else { -1.0 };
                let big = 0.5 * (tr + sign * disc.sqrt());
                let small = if big != 0.0 { det / big } else { 0.0 };
                vec![big.abs(), small.abs()]
            } else {
                let r = det.sqrt();
                vec![r, r]
            }
        }
        _ => m
            .to_nalgebra()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect(),
    };
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli)
}

/// Thin QR factorization `m = q r`; `r` is upper triangular.
pub fn qr_decompose(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    let qr = m.to_nalgebra().qr();
    Ok((DenseMatrix::from_nalgebra(&qr.q()), DenseMatrix::from_nalgebra(&qr.r())))
}

/// True when no modulus lies within `tol` of one.
pub fn is_hyperbolic(moduli: &[f64], tol: f64) -> bool {
    moduli.iter().all(|m| (m - 1.0).abs() > tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_reconstructs() {
        let m = DenseMatrix::from_nested(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let (q, r) = qr_decompose(&m).unwrap();
        assert_eq!(r[(1, 0)], 0.0);
        let back = q.matmul(&r).unwrap();
        assert!(back.sub(&m).unwrap().max_abs() < 1e-14);
        let qtq = q.transpose().matmul(&q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn rank_examples() {
        let id = DenseMatrix::identity(3);
        assert_eq!(numerical_rank(&id, 1e-8).unwrap().rank, 3);
        let dup = DenseMatrix::from_nested(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(numerical_rank(&dup, 1e-8).unwrap().rank, 1);
        let fam = DenseMatrix::from_nested(&[vec![2.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let est = numerical_rank(&fam, 1e-8).unwrap();
        assert_eq!(est.rank, 2);
        assert!(est.singular_values[0] >= est.singular_values[1]);
    }

    #[test]
    fn rank_errors() {
        assert_eq!(
            numerical_rank(&DenseMatrix::zeros(0, 0), 1e-8),
            Err(Error::EmptyMatrix)
        );
        assert!(numerical_rank(&DenseMatrix::identity(2), 1.5).is_err());
        assert_eq!(numerical_rank(&DenseMatrix::zeros(2, 2), 1e-8).unwrap().rank, 0);
    }

    #[test]
    fn cat_map_moduli() {
        let a = DenseMatrix::from_nested(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let m = eigen_moduli(&a).unwrap();
        let s5 = 5f64.sqrt();
        assert!((m[0] - (3.0 + s5) / 2.0).abs() < 1e-15);
        assert!((m[1] - (3.0 - s5) / 2.0).abs() < 1e-15);
        assert!(is_hyperbolic(&m, 1e-6));
    }

    #[test]
    fn rotation_and_identity_moduli() {
        let th = 0.83f64;
        let r = DenseMatrix::from_nested(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]).unwrap();
        for m in eigen_moduli(&r).unwrap() {
            assert!((m - 1.0).abs() < 1e-15);
        }
        for n in 1..6 {
            for m in eigen_moduli(&DenseMatrix::identity(n)).unwrap() {
                assert!((m - 1.0).abs() < 1e-12);
            }
        }
        assert!(matches!(
            eigen_moduli(&DenseMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn negative_trace_two_by_two() {
        let a = DenseMatrix::from_nested(&[vec![-3.0, 0.0], vec![0.0, -0.5]]).unwrap();
        assert_eq!(eigen_moduli(&a).unwrap(), vec![3.0, 0.5]);
        let z = DenseMatrix::from_nested(&[vec![0.0, 1.0], vec![4.0, 0.0]]).unwrap();
        assert_eq!(eigen_moduli(&z).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn schur_path_block_matrix() {
        // 3x3: rotation block (moduli 2) and a real eigenvalue 0.5
        let m = DenseMatrix::from_nested(&[
            vec![0.0, -2.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let moduli = eigen_moduli(&m).unwrap();
        assert!((moduli[0] - 2.0).abs() < 1e-12);
        assert!((moduli[1] - 2.0).abs() < 1e-12);
        assert!((moduli[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solve_and_inverse() {
        let a = DenseMatrix::from_nested(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let inv = a.inverse().unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-15);
        let dup = DenseMatrix::from_nested(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(dup.solve(&[1.0, 2.0]), Err(Error::SingularMatrix));
    }
}
