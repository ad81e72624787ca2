use num_complex::Complex64;
use ndarray::Array2;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Compressed-row complex matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<Complex64>,
}

/// Coordinate-format accumulator.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn extend(&mut self, other: Triplets) {
        self.rows.extend(other.rows);
        self.cols.extend(other.cols);
        self.vals.extend(other.vals);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.rows, &self.cols, &self.vals)
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Duplicates are summed; explicit zeros are kept so that the pattern
    /// only depends on which entries were touched.
    pub fn from_triplets(nrows: usize, ncols: usize, rows: &[usize], cols: &[usize], vals: &[Complex64]) -> Self {
        let mut count = vec![0usize; nrows + 1];
        for &r in rows {
            count[r + 1] += 1;
        }
        for i in 0..nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut tc = vec![0usize; rows.len()];
        let mut tv = vec![ZERO; rows.len()];
        for k in 0..rows.len() {
            let p = next[rows[k]];
            tc[p] = cols[k];
            tv[p] = vals[k];
            next[rows[k]] += 1;
        }
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len());
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            order.clear();
            order.extend(count[i]..count[i + 1]);
            order.sort_by_key(|&p| tc[p]);
            let start = indices.len();
            for &p in &order {
                if indices.len() > start && *indices.last().unwrap() == tc[p] {
                    *data.last_mut().unwrap() += tv[p];
                } else {
                    indices.push(tc[p]);
                    data.push(tv[p]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_dense(a: &Array2<Complex64>) -> Self {
        let mut t = Triplets::new(a.nrows(), a.ncols());
        for ((i, j), v) in a.indexed_iter() {
            if *v != ZERO {
                t.push(i, j, *v);
            }
        }
        t.to_csr()
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => ZERO,
        }
    }

    /// Removes entries that are exactly zero.
    pub fn recompress(&self) -> Self {
        let mut out = CsrMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                if *v != ZERO {
                    out.indices.push(*j);
                    out.data.push(*v);
                }
            }
            out.indptr[i + 1] = out.indices.len();
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension(format!(
                "matrix has {} columns, vector has {} entries",
                self.ncols,
                x.len()
            )));
        }
        Ok((0..self.nrows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(|(j, v)| v * x[*j]).sum()
            })
            .collect())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                t.push(*j, i, *v);
            }
        }
        t.to_csr()
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut a = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                a[[i, *j]] += *v;
            }
        }
        a
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Same set of stored positions as the transpose.
    pub fn is_pattern_symmetric(&self) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        t.indptr == self.indptr && t.indices == self.indices
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                worst = worst.max((v - t.get(i, *j)).norm());
            }
            let (idx, val) = t.row(i);
            for (j, v) in idx.iter().zip(val) {
                worst = worst.max((v - self.get(i, *j)).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self + s·other` on the union pattern.
    pub fn add_scaled(&self, other: &CsrMatrix, s: Complex64) -> Result<CsrMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension("matrix sizes differ".into()));
        }
        let mut t = Triplets::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                t.push(i, *j, *v);
            }
            let (idx, val) = other.row(i);
            for (j, v) in idx.iter().zip(val) {
                t.push(i, *j, s * v);
            }
        }
        Ok(t.to_csr())
    }

    /// Compressed-column view: `(colptr, rowind, values)`.
    pub fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<Complex64>) {
        let t = self.transpose();
        (t.indptr, t.indices, t.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn duplicates_summed_zeros_kept() {
        let a = CsrMatrix::from_triplets(2, 2, &[0, 0, 1, 1], &[1, 1, 0, 1], &[c(1.0), c(2.0), c(0.0), c(4.0)]);
        assert_eq!(a.get(0, 1), c(3.0));
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.recompress().nnz(), 2);
        assert!(!a.recompress().is_pattern_symmetric());
        assert!(a.is_pattern_symmetric());
    }

    #[test]
    fn matvec_and_transpose() {
        let a = CsrMatrix::from_triplets(2, 3, &[0, 1, 1], &[2, 0, 1], &[c(1.0), c(2.0), c(3.0)]);
        let y = a.matvec(&[c(1.0), c(1.0), c(1.0)]).unwrap();
        assert_eq!(y, vec![c(1.0), c(5.0)]);
        assert_eq!(a.transpose().transpose(), a);
        assert!(a.matvec(&[c(1.0)]).is_err());
    }
}
