//! Multilevel interpolation and the BPX preconditioner.
//!
//! The hierarchy stacks the interior nodes of levels `1..=L`; level `l` has
//! weight `2^{-l(2-d)/2}` and is lifted to level `L` by the tensor-product
//! linear interpolation.

use nalgebra::DMatrix;

use crate::dense::{self, pinv_sym, spectral_norm};
use crate::error::{Error, Result};
use crate::geometry::multilevel_size;
use crate::sparse::{BandedCholesky, SparseSymMatrix};

/// Largest hierarchy size for which the dense `F` is formed.
pub const MAX_DENSE_HIERARCHY: usize = 20_000;

/// Relative singular-value cutoff used for `(FᵀLF)⁺`.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Weight of level `l` in `dim` dimensions.
pub fn level_weight(dim: usize, l: u32) -> f64 {
    (-(l as f64) * (2.0 - dim as f64) / 2.0).exp2()
}

/// 1D interpolation from level `l` to `l + 1`: column `k` carries
/// `1/2, 1, 1/2` in rows `2k, 2k+1, 2k+2`.
pub fn interp_1d_one_level(l: u32) -> DMatrix<f64> {
    let nc = (1usize << l) - 1;
    let nf = (1usize << (l + 1)) - 1;
    let mut m = DMatrix::zeros(nf, nc);
    for k in 0..nc {
        m[(2 * k, k)] = 0.5;
        m[(2 * k + 1, k)] = 1.0;
        m[(2 * k + 2, k)] = 0.5;
    }
    m
}

/// Dense interpolation operator between two levels of a `dim`-dimensional mesh.
#[derive(Clone, Debug)]
pub struct InterpOp {
    pub dim: usize,
    pub from_level: u32,
    pub to_level: u32,
    pub matrix: DMatrix<f64>,
}

/// `I_{from→to}` in `dim` dimensions, the Kronecker power of the 1D
/// telescoped product.
pub fn interp_multi(dim: usize, from: u32, to: u32) -> Result<InterpOp> {
    if from == 0 || from > to {
        return Err(Error::invalid(format!(
            "cannot interpolate from level {from} to {to}"
        )));
    }
    let n = (1usize << from) - 1;
    let one_d = (from..to).fold(DMatrix::identity(n, n), |acc, l| {
        interp_1d_one_level(l) * acc
    });
    let matrix = dense::kron_all(std::iter::repeat_n(&one_d, dim));
    Ok(InterpOp {
        dim,
        from_level: from,
        to_level: to,
        matrix,
    })
}

/// Applies a 1D map along `axis` of a row-major array with per-axis sizes `shape`.
fn along_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    out_len: usize,
    f: impl Fn(&[f64], &mut [f64]),
) -> (Vec<f64>, Vec<usize>) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let n_in = shape[axis];
    let mut out = vec![0.0; outer * out_len * inner];
    let mut line_in = vec![0.0; n_in];
    let mut line_out = vec![0.0; out_len];
    for o in 0..outer {
        for i in 0..inner {
            for (k, v) in line_in.iter_mut().enumerate() {
                *v = data[(o * n_in + k) * inner + i];
            }
            line_out.iter_mut().for_each(|v| *v = 0.0);
            f(&line_in, &mut line_out);
            for (k, v) in line_out.iter().enumerate() {
                out[(o * out_len + k) * inner + i] = *v;
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = out_len;
    (out, new_shape)
}

fn prolong_line(x: &[f64], y: &mut [f64]) {
    for (k, &v) in x.iter().enumerate() {
        y[2 * k] += 0.5 * v;
        y[2 * k + 1] += v;
        y[2 * k + 2] += 0.5 * v;
    }
}

fn restrict_line(y: &[f64], x: &mut [f64]) {
    for (k, v) in x.iter_mut().enumerate() {
        *v = 0.5 * y[2 * k] + y[2 * k + 1] + 0.5 * y[2 * k + 2];
    }
}

/// Matrix-free `I_{from→to} x`.
pub fn prolongate(dim: usize, from: u32, to: u32, x: &[f64]) -> Vec<f64> {
    let mut data = x.to_vec();
    let mut shape = vec![(1usize << from) - 1; dim];
    assert_eq!(
        data.len(),
        shape.iter().product::<usize>(),
        "prolongate length mismatch"
    );
    for l in from..to {
        let nf = (1usize << (l + 1)) - 1;
        for axis in 0..dim {
            (data, shape) = along_axis(&data, &shape, axis, nf, prolong_line);
        }
    }
    data
}

/// Matrix-free `I_{from→to}ᵀ y`.
pub fn restrict(dim: usize, from: u32, to: u32, y: &[f64]) -> Vec<f64> {
    let mut data = y.to_vec();
    let mut shape = vec![(1usize << to) - 1; dim];
    assert_eq!(
        data.len(),
        shape.iter().product::<usize>(),
        "restrict length mismatch"
    );
    for l in (from..to).rev() {
        let nc = (1usize << l) - 1;
        for axis in 0..dim {
            (data, shape) = along_axis(&data, &shape, axis, nc, restrict_line);
        }
    }
    data
}

/// Dense BPX frame `F = [w_1 I_{1→L}, ..., w_L I]` of shape `n_L^d × N_L`.
#[derive(Clone, Debug)]
pub struct BpxOp {
    pub dim: usize,
    pub level: u32,
    pub weights: Vec<f64>,
    pub frame: DMatrix<f64>,
}

impl BpxOp {
    /// Column offset of level `l` inside the hierarchy.
    pub fn level_offset(&self, l: u32) -> usize {
        multilevel_size(self.dim, l - 1)
    }

    /// Square embedding `F̂`: zero rows on top, `F` in the last `n_L^d` rows.
    pub fn embedded(&self) -> DMatrix<f64> {
        let big = self.frame.ncols();
        let fine = self.frame.nrows();
        let mut m = DMatrix::zeros(big, big);
        m.rows_mut(big - fine, fine).copy_from(&self.frame);
        m
    }
}

pub fn bpx_build(dim: usize, level: u32) -> Result<BpxOp> {
    if !(1..=3).contains(&dim) || level == 0 {
        return Err(Error::invalid(format!(
            "bad BPX shape dim={dim} level={level}"
        )));
    }
    let big = multilevel_size(dim, level);
    if big > MAX_DENSE_HIERARCHY {
        return Err(Error::ResourceLimit(format!(
            "hierarchy of {big} nodes exceeds the dense limit {MAX_DENSE_HIERARCHY}"
        )));
    }
    let fine = ((1usize << level) - 1).pow(dim as u32);
    let mut frame = DMatrix::zeros(fine, big);
    let mut weights = Vec::with_capacity(level as usize);
    let mut col = 0;
    for l in 1..=level {
        let w = level_weight(dim, l);
        weights.push(w);
        let block = interp_multi(dim, l, level)?.matrix * w;
        frame.columns_mut(col, block.ncols()).copy_from(&block);
        col += block.ncols();
    }
    Ok(BpxOp {
        dim,
        level,
        weights,
        frame,
    })
}

/// `FᵀLF`.
pub fn precond_operator(bpx: &BpxOp, l_mat: &SparseSymMatrix) -> Result<SparseSymMatrix> {
    SparseSymMatrix::from_dense(&flf_dense(bpx, l_mat)?)
}

fn flf_dense(bpx: &BpxOp, l_mat: &SparseSymMatrix) -> Result<DMatrix<f64>> {
    if l_mat.n() != bpx.frame.nrows() {
        return Err(Error::invalid(format!(
            "stiffness has {} rows, frame has {}",
            l_mat.n(),
            bpx.frame.nrows()
        )));
    }
    let lf = l_mat.to_dense() * &bpx.frame;
    Ok(bpx.frame.transpose() * lf)
}

/// Relative spectral-norm residual `‖F(FᵀLF)⁺Fᵀ - L⁻¹‖ / ‖L⁻¹‖`.
pub fn verify_flft(bpx: &BpxOp, l_mat: &SparseSymMatrix) -> Result<f64> {
    let flf = flf_dense(bpx, l_mat)?;
    let chol = l_mat
        .to_dense()
        .cholesky()
        .ok_or_else(|| Error::invalid("stiffness matrix is singular or indefinite"))?;
    let l_inv = chol.inverse();
    let approx = &bpx.frame * pinv_sym(&flf, PINV_CUTOFF) * bpx.frame.transpose();
    Ok(spectral_norm(&(approx - &l_inv)) / spectral_norm(&l_inv))
}

/// Matrix-free application of `FFᵀ`.
#[derive(Clone, Copy, Debug)]
pub struct BpxPreconditioner {
    pub dim: usize,
    pub level: u32,
}

impl BpxPreconditioner {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if !(1..=3).contains(&dim) || level == 0 {
            return Err(Error::invalid(format!(
                "bad BPX shape dim={dim} level={level}"
            )));
        }
        Ok(BpxPreconditioner { dim, level })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut residuals = vec![v.to_vec()];
        for l in (1..self.level).rev() {
            let next = restrict(d, l, l + 1, residuals.last().unwrap());
            residuals.push(next);
        }
        residuals.reverse();
        let w1 = level_weight(d, 1);
        let mut s: Vec<f64> = residuals[0].iter().map(|r| w1 * w1 * r).collect();
        for l in 1..self.level {
            let w = level_weight(d, l + 1);
            s = prolongate(d, l, l + 1, &s);
            dense::axpy(w * w, &residuals[l as usize], &mut s);
        }
        s
    }
}

/// Result of a preconditioned conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b - Ax‖ / ‖b‖`.
    pub residual: f64,
}

/// Preconditioned CG for a symmetric positive definite operator.
pub fn pcg(
    op: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Result<Vec<f64>>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome> {
    let bnorm = dense::norm2(rhs);
    let mut x = vec![0.0; rhs.len()];
    if bnorm == 0.0 {
        return Ok(PcgOutcome {
            solution: x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = rhs.to_vec();
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = dense::dot(&r, &z);
    for it in 1..=max_iter {
        let ap = op(&p);
        let pap = dense::dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::invalid("operator is not positive definite"));
        }
        let alpha = rz / pap;
        dense::axpy(alpha, &p, &mut x);
        dense::axpy(-alpha, &ap, &mut r);
        let res = dense::norm2(&r) / bnorm;
        if res <= tol {
            return Ok(PcgOutcome {
                solution: x,
                iterations: it,
                residual: res,
            });
        }
        z = precond(&r)?;
        let rz_new = dense::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut()
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::ConvergenceFailure {
        what: "preconditioned CG".into(),
        iterations: max_iter,
        residual: dense::norm2(&r) / bnorm,
    })
}

/// Iteration cap for [`bpx_pcg_solve`].
pub const PCG_MAX_ITER: usize = 2000;

/// Solves `L x = rhs` by CG preconditioned with `FFᵀ`.
pub fn bpx_pcg_solve(
    l_mat: &SparseSymMatrix,
    precond: &BpxPreconditioner,
    rhs: &[f64],
    tol: f64,
) -> Result<PcgOutcome> {
    let fine = ((1usize << precond.level) - 1).pow(precond.dim as u32);
    if l_mat.n() != fine || rhs.len() != fine {
        return Err(Error::invalid(
            "matrix, right-hand side and hierarchy sizes disagree",
        ));
    }
    pcg(
        |v| l_mat.matvec(v),
        |v| Ok(precond.apply(v)),
        rhs,
        tol,
        PCG_MAX_ITER,
    )
}

/// Solver for `(L + A) x = b` that only ever inverts `L` through BPX-CG:
/// CG on `L + A` preconditioned by `L⁻¹`, i.e. CG on `I + L⁻¹A` in the
/// `L`-inner product.
#[derive(Clone, Debug)]
pub struct FastInversion {
    stiffness: SparseSymMatrix,
    loss: SparseSymMatrix,
    precond: BpxPreconditioner,
    inner_tol: f64,
}

impl FastInversion {
    pub fn new(
        stiffness: SparseSymMatrix,
        absorption: &SparseSymMatrix,
        precond: BpxPreconditioner,
        inner_tol: f64,
    ) -> Result<Self> {
        let loss = stiffness.add_scaled(absorption, 1.0)?;
        Ok(FastInversion {
            stiffness,
            loss,
            precond,
            inner_tol,
        })
    }

    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let inner = |r: &[f64]| {
            bpx_pcg_solve(&self.stiffness, &self.precond, r, self.inner_tol).map(|o| o.solution)
        };
        Ok(pcg(|v| self.loss.matvec(v), inner, b, tol, PCG_MAX_ITER)?.solution)
    }
}

/// Dense reference solve used for small systems and tests.
pub fn direct_solve(l_mat: &SparseSymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(BandedCholesky::factor(l_mat)?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::tensor_stiffness;

    #[test]
    fn one_level_shape_and_norm() {
        let m = interp_1d_one_level(2);
        assert_eq!(m.shape(), (7, 3));
        assert_eq!(m[(0, 0)], 0.5);
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m[(2, 0)], 0.5);
        assert!(spectral_norm(&m) <= 2f64.sqrt() + 1e-14);
    }

    #[test]
    fn matrix_free_matches_dense() {
        for dim in 1..=3 {
            let op = interp_multi(dim, 1, 3).unwrap();
            let x: Vec<f64> = (0..op.matrix.ncols())
                .map(|i| (i as f64 + 1.0).ln())
                .collect();
            let y = prolongate(dim, 1, 3, &x);
            let yd = &op.matrix * nalgebra::DVector::from_column_slice(&x);
            assert!(y.iter().zip(yd.iter()).all(|(a, b)| (a - b).abs() < 1e-14));
            let z = restrict(dim, 1, 3, &y);
            let zd = op.matrix.transpose() * yd;
            assert!(z.iter().zip(zd.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn finest_block_is_weighted_identity() {
        let b = bpx_build(2, 3).unwrap();
        let off = b.level_offset(3);
        let n = b.frame.nrows();
        let blk = b.frame.columns(off, n);
        assert_eq!(
            blk.clone_owned(),
            DMatrix::identity(n, n) * level_weight(2, 3)
        );
    }

    #[test]
    fn preconditioner_matches_frame() {
        let b = bpx_build(2, 3).unwrap();
        let p = BpxPreconditioner::new(2, 3).unwrap();
        let v: Vec<f64> = (0..49).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let fft = &b.frame * b.frame.transpose() * nalgebra::DVector::from_column_slice(&v);
        let mf = p.apply(&v);
        assert!(mf
            .iter()
            .zip(fft.iter())
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn single_node_solve() {
        let l = SparseSymMatrix::from_triplets(1, vec![(0, 0, 4.0)]).unwrap();
        let p = BpxPreconditioner::new(2, 1).unwrap();
        let out = bpx_pcg_solve(&l, &p, &[1.0], 1e-12).unwrap();
        assert!((out.solution[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn flft_small() {
        let l = tensor_stiffness(1, 2);
        let b = bpx_build(1, 2).unwrap();
        assert!(verify_flft(&b, &l).unwrap() < 1e-12);
    }
}
