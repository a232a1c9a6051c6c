//! Compressed-row storage for the symmetric finite-element matrices and a
//! banded Cholesky factorization for solving with them.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square matrix in CSR form. Both triangles are stored; symmetry is a
/// property of how the matrix was built, checked by [`SparseSymMatrix::symmetry_defect`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates in input
    /// order so the result does not depend on how the triplets were produced.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = trips.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::OutOfRange(format!(
                "entry ({r}, {c}) outside {n}x{n}"
            )));
        }
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(trips.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last = None;
        for (r, c, v) in trips {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseSymMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn zeros(n: usize) -> Self {
        SparseSymMatrix {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseSymMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    /// Tridiagonal Toeplitz matrix with the given diagonal and off-diagonal.
    pub fn tridiagonal(n: usize, diag: f64, off: f64) -> Self {
        let mut t = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, off));
            }
            t.push((i, i, diag));
            if i + 1 < n {
                t.push((i, i + 1, off));
            }
        }
        SparseSymMatrix::from_triplets(n, t).expect("indices in range")
    }

    /// Keeps every nonzero of a dense square matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("matrix is not square"));
        }
        let n = m.nrows();
        let t = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0)
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        SparseSymMatrix::from_triplets(n, t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(p) => self.vals[span.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "matvec length mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::invalid("matrix sizes differ"));
        }
        let t = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, s * v)))
            .collect();
        SparseSymMatrix::from_triplets(self.n, t)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let n = self.n * other.n;
        let t = self
            .triplets()
            .flat_map(|(i, j, a)| {
                other
                    .triplets()
                    .map(move |(k, l, b)| (i * other.n + k, j * other.n + l, a * b))
            })
            .collect();
        SparseSymMatrix::from_triplets(n, t).expect("indices in range")
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.n];
        for (p, &i) in idx.iter().enumerate() {
            pos[i] = p;
        }
        let t = idx
            .iter()
            .enumerate()
            .flat_map(|(p, &i)| {
                let pos = &pos;
                self.row(i)
                    .filter(move |&(j, _)| pos[j] != usize::MAX)
                    .map(move |(j, v)| (p, pos[j], v))
            })
            .collect();
        SparseSymMatrix::from_triplets(idx.len(), t).expect("indices in range")
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest number of stored nonzeros in any row.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.n)
            .map(|i| self.row(i).filter(|&(_, v)| v != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets()
            .map(|(i, j, _)| i.abs_diff(j))
            .max()
            .unwrap_or(0)
    }

    /// Largest absolute row sum, an upper bound for the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |a_ij - a_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Writes a header line `n nnz` followed by one `row col value` line per
    /// stored entry (0-based indices, shortest round-trip floats).
    pub fn write_triplets(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.n, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:?}")?;
        }
        Ok(())
    }

    pub fn read_triplets(r: impl BufRead) -> Result<Self> {
        let bad = |line: &str| Error::invalid(format!("malformed triplet line `{line}`"));
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty triplet file"))?
            .map_err(|e| Error::io("<triplets>", e))?;
        let mut head = header.split_whitespace().map(str::parse::<usize>);
        let (n, nnz) = match (head.next(), head.next()) {
            (Some(Ok(n)), Some(Ok(nnz))) => (n, nnz),
            _ => return Err(bad(&header)),
        };
        let mut t = Vec::with_capacity(nnz);
        for line in lines {
            let line = line.map_err(|e| Error::io("<triplets>", e))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(&line));
            }
            let i = f[0].parse().map_err(|_| bad(&line))?;
            let j = f[1].parse().map_err(|_| bad(&line))?;
            let v = f[2].parse().map_err(|_| bad(&line))?;
            t.push((i, j, v));
        }
        if t.len() != nnz {
            return Err(Error::invalid(format!(
                "expected {nnz} entries, found {}",
                t.len()
            )));
        }
        SparseSymMatrix::from_triplets(n, t)
    }
}

/// Cholesky factor of a symmetric positive definite band matrix, stored as
/// the lower band row by row.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `band[i * (bw + 1) + (j + bw - i)]` holds `L[i][j]` for `i - bw <= j <= i`.
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factorizes `a`. Fails with `InvalidArgument` when `a` is not positive
    /// definite.
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.n();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            if j <= i {
                band[i * w + (j + bw - i)] += v;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = band[i * w + (j + bw - i)];
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if !s.is_finite() || s <= 0.0 {
                        return Err(Error::invalid(format!(
                            "matrix is not positive definite (pivot {s:.3e} at row {i})"
                        )));
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n, "solve length mismatch");
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let row = &self.band[i * w + (lo + bw - i)..i * w + bw];
            let s = x[i] - row.iter().zip(&x[lo..i]).map(|(a, b)| a * b).sum::<f64>();
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..self.n).rev() {
            let xi = x[i] / self.band[i * w + bw];
            x[i] = xi;
            let lo = i.saturating_sub(bw);
            let row = &self.band[i * w + (lo + bw - i)..i * w + bw];
            for (xk, a) in x[lo..i].iter_mut().zip(row) {
                *xk -= a * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m =
            SparseSymMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn kron_matches_dense() {
        let a = SparseSymMatrix::tridiagonal(3, 2.0, -1.0);
        let b = SparseSymMatrix::tridiagonal(2, 4.0, 1.0);
        let k = a.kron(&b).to_dense();
        assert_eq!(k, a.to_dense().kronecker(&b.to_dense()));
    }

    #[test]
    fn banded_cholesky_solves() {
        let a = SparseSymMatrix::tridiagonal(7, 2.0, -1.0)
            .kron(&SparseSymMatrix::identity(3))
            .add_scaled(
                &SparseSymMatrix::identity(21).kron(&SparseSymMatrix::identity(1)),
                0.5,
            )
            .unwrap();
        let f = BandedCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..21).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = a.matvec(&x);
        let err = r
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn indefinite_fails() {
        let a = SparseSymMatrix::tridiagonal(3, 1.0, 2.0);
        assert!(BandedCholesky::factor(&a).is_err());
    }

    #[test]
    fn triplet_io_round_trip() {
        let a = SparseSymMatrix::tridiagonal(4, 1.0 / 3.0, -0.1);
        let mut buf = Vec::new();
        a.write_triplets(&mut buf).unwrap();
        let b = SparseSymMatrix::read_triplets(&buf[..]).unwrap();
        assert_eq!(a, b);
    }
}
