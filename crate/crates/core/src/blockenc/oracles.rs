//! Row and column oracles, their combination into a block encoding, and the
//! sparse data-loading encodings built on them.
//!
//! Oracle registers are ordered data-row ⊗ data-col ⊗ row-slack ⊗ col-slack ⊗
//! flag, row register most significant. With `b` qubits per data register
//! the oracle index of `(r, c, rs, cs, flag)` is
//! `(((r·2^b + c)·2 + rs)·2 + cs)·2 + flag`.

use nalgebra::DMatrix;

use super::{check_dim, BlockEncoding};
use crate::bpx::interp_1d_one_level;
use crate::dense;
use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// Largest data register length (`m = 2^b`) accepted by the interpolation oracles.
pub const MAX_ORACLE_REGISTER: usize = 64;

/// Which register an oracle prepares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    /// Controlled on the column, prepares the row register (`P`).
    Column,
    /// Controlled on the row, prepares the column register (`Q`).
    Row,
}

/// An oracle unitary stored column by column.
#[derive(Clone, Debug)]
pub struct OracleUnitary {
    pub kind: OracleKind,
    /// Qubits per data register.
    pub register_qubits: usize,
    /// Normalization the amplitudes were divided by (`c_max` or `r_max`).
    pub norm: f64,
    /// Rows and columns of the unpadded target.
    pub data_shape: (usize, usize),
    cols: Vec<Vec<(usize, f64)>>,
}

fn oracle_index(b: usize, r: usize, c: usize, rs: usize, cs: usize, flag: usize) -> usize {
    ((((r << b) | c) * 2 + rs) * 2 + cs) * 2 + flag
}

fn oracle_split(b: usize, i: usize) -> (usize, usize, usize, usize, usize) {
    let flag = i & 1;
    let cs = (i >> 1) & 1;
    let rs = (i >> 2) & 1;
    let rc = i >> 3;
    (rc >> b, rc & ((1 << b) - 1), rs, cs, flag)
}

impl OracleUnitary {
    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Image of the basis state `(r, c, rs, cs, flag)` as sparse amplitudes.
    pub fn apply_basis(
        &self,
        r: usize,
        c: usize,
        rs: usize,
        cs: usize,
        flag: usize,
    ) -> &[(usize, f64)] {
        &self.cols[oracle_index(self.register_qubits, r, c, rs, cs, flag)]
    }

    /// Decodes an oracle index into `(r, c, rs, cs, flag)`.
    pub fn split_index(&self, i: usize) -> (usize, usize, usize, usize, usize) {
        oracle_split(self.register_qubits, i)
    }

    /// `‖OᵀO - I‖_F` computed from the sparse columns.
    pub fn unitarity_defect(&self) -> f64 {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim()];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                rows[i].push((j, v));
            }
        }
        let n = self.dim();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for row in &rows {
            for &(a, va) in row {
                for &(b, vb) in row {
                    gram[(a, b)] += va * vb;
                }
            }
        }
        (gram - DMatrix::identity(n, n)).norm()
    }
}

/// Builds the controlled state preparations for `target` (at most `2^b` on
/// each side) with the given column and row normalizations.
pub fn row_col_oracles(
    target: &DMatrix<f64>,
    b: usize,
    c_norm: f64,
    r_norm: f64,
) -> Result<(OracleUnitary, OracleUnitary)> {
    let m = 1usize << b;
    let (nr, nc) = target.shape();
    if nr > m || nc > m {
        return Err(Error::invalid(format!(
            "{nr}x{nc} target does not fit a {b}-qubit register"
        )));
    }
    let dim = 1usize << (2 * b + 3);
    check_dim(dim, "row/column oracle")?;
    for k in 0..nc {
        let ck: f64 = target.column(k).iter().map(|v| v.abs()).sum();
        if ck > c_norm * (1.0 + 1e-12) {
            return Err(Error::NormTooSmall {
                requested: c_norm,
                natural: ck,
            });
        }
    }
    for j in 0..nr {
        let rj: f64 = target.row(j).iter().map(|v| v.abs()).sum();
        if rj > r_norm * (1.0 + 1e-12) {
            return Err(Error::NormTooSmall {
                requested: r_norm,
                natural: rj,
            });
        }
    }

    // Column oracle: controlled on c = k, prepare (r, rs).
    let mut p_cols = vec![Vec::new(); dim];
    for k in 0..m {
        let prep = (k < nc).then(|| {
            let mut psi = vec![0.0; 2 * m];
            let mut sum = 0.0;
            for j in 0..nr {
                let a = target[(j, k)];
                psi[2 * j] = a.signum() * (a.abs() / c_norm).sqrt();
                sum += a.abs();
            }
            psi[1] = (1.0 - sum / c_norm).max(0.0).sqrt();
            dense::householder_prep(&psi)
        });
        for r in 0..m {
            for rs in 0..2 {
                for cs in 0..2 {
                    for flag in 0..2 {
                        let col = &mut p_cols[oracle_index(b, r, k, rs, cs, flag)];
                        match &prep {
                            Some(v) => {
                                for r2 in 0..m {
                                    for rs2 in 0..2 {
                                        let a = v[(2 * r2 + rs2, 2 * r + rs)];
                                        if a != 0.0 {
                                            col.push((oracle_index(b, r2, k, rs2, cs, flag), a));
                                        }
                                    }
                                }
                            }
                            None => col.push((oracle_index(b, r, k, rs, cs, 1 - flag), 1.0)),
                        }
                    }
                }
            }
        }
    }

    // Row oracle: controlled on r = j, prepare (c, cs).
    let mut q_cols = vec![Vec::new(); dim];
    for j in 0..m {
        let prep = (j < nr).then(|| {
            let mut phi = vec![0.0; 2 * m];
            let mut sum = 0.0;
            for k in 0..nc {
                let a = target[(j, k)].abs();
                phi[2 * k] = (a / r_norm).sqrt();
                sum += a;
            }
            phi[1] = (1.0 - sum / r_norm).max(0.0).sqrt();
            dense::householder_prep(&phi)
        });
        for c in 0..m {
            for cs in 0..2 {
                for rs in 0..2 {
                    for flag in 0..2 {
                        let col = &mut q_cols[oracle_index(b, j, c, rs, cs, flag)];
                        match &prep {
                            Some(v) => {
                                for c2 in 0..m {
                                    for cs2 in 0..2 {
                                        let a = v[(2 * c2 + cs2, 2 * c + cs)];
                                        if a != 0.0 {
                                            col.push((oracle_index(b, j, c2, rs, cs2, flag), a));
                                        }
                                    }
                                }
                            }
                            None => col.push((oracle_index(b, j, c, rs, cs, 1 - flag), 1.0)),
                        }
                    }
                }
            }
        }
    }

    let p = OracleUnitary {
        kind: OracleKind::Column,
        register_qubits: b,
        norm: c_norm,
        data_shape: (nr, nc),
        cols: p_cols,
    };
    let q = OracleUnitary {
        kind: OracleKind::Row,
        register_qubits: b,
        norm: r_norm,
        data_shape: (nr, nc),
        cols: q_cols,
    };
    Ok((p, q))
}

/// The one-level 1D interpolation `I_{l→l+1}` padded to `2^{reg_level+1}` slots.
pub fn interp_target(l: u32, reg_level: u32) -> Result<DMatrix<f64>> {
    if l == 0 || l > reg_level {
        return Err(Error::invalid(format!(
            "interpolation level {l} outside 1..={reg_level}"
        )));
    }
    let m = 1usize << (reg_level + 1);
    if m > MAX_ORACLE_REGISTER {
        return Err(Error::ResourceLimit(format!(
            "register of {m} slots exceeds {MAX_ORACLE_REGISTER}"
        )));
    }
    let inner = interp_1d_one_level(l);
    let mut t = DMatrix::zeros(m, m);
    t.view_mut((0, 0), inner.shape()).copy_from(&inner);
    Ok(t)
}

fn interp_oracles(l: u32, reg_level: u32) -> Result<(OracleUnitary, OracleUnitary)> {
    interp_target(l, reg_level)?;
    let inner = interp_1d_one_level(l);
    let (c_max, r_max) = abs_sum_maxima(&inner);
    row_col_oracles(&inner, reg_level as usize + 1, c_max, r_max)
}

/// Largest absolute column sum and largest absolute row sum.
pub fn abs_sum_maxima(m: &DMatrix<f64>) -> (f64, f64) {
    let c = m
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let r = m
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    (c, r)
}

/// Column oracle for the padded one-level interpolation (`c_max = 2`).
pub fn oracle_p_interp(l: u32, reg_level: u32) -> Result<OracleUnitary> {
    Ok(interp_oracles(l, reg_level)?.0)
}

/// Row oracle for the padded one-level interpolation (`r_max = 1`).
pub fn oracle_q_interp(l: u32, reg_level: u32) -> Result<OracleUnitary> {
    Ok(interp_oracles(l, reg_level)?.1)
}

/// `SWAP_{r,c} · Qᵀ · P`, moved to the canonical layout (column register as
/// system) and checked against `target` to `1e-10`.
pub fn combine_pq(
    p: &OracleUnitary,
    q: &OracleUnitary,
    target: &DMatrix<f64>,
) -> Result<BlockEncoding> {
    if p.kind != OracleKind::Column || q.kind != OracleKind::Row {
        return Err(Error::invalid(
            "combine_pq expects a column oracle then a row oracle",
        ));
    }
    if p.dim() != q.dim() || p.register_qubits != q.register_qubits {
        return Err(Error::invalid("oracles act on different registers"));
    }
    let b = p.register_qubits;
    let m = 1usize << b;
    if target.shape() != (m, m) {
        return Err(Error::invalid("target must be padded to the register size"));
    }
    let dim = p.dim();
    // Rows of Q, so that (Qᵀ v)_y = Σ_i Q[i, y] v_i.
    let mut q_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for (y, col) in q.cols.iter().enumerate() {
        for &(i, v) in col {
            q_rows[i].push((y, v));
        }
    }
    let canonical = |r: usize, c: usize, rs: usize, cs: usize, flag: usize| -> usize {
        (((r * 2 + rs) * 2 + cs) * 2 + flag) * m + c
    };
    // SWAP exchanges r and c on the output side only.
    let input = |i: usize| {
        let (r, c, rs, cs, flag) = oracle_split(b, i);
        canonical(r, c, rs, cs, flag)
    };
    let output = |i: usize| {
        let (r, c, rs, cs, flag) = oracle_split(b, i);
        canonical(c, r, rs, cs, flag)
    };
    let mut unitary = DMatrix::zeros(dim, dim);
    let mut acc = vec![0.0; dim];
    for x in 0..dim {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for &(i, pv) in &p.cols[x] {
            for &(y, qv) in &q_rows[i] {
                acc[y] += qv * pv;
            }
        }
        let col = input(x);
        for (y, &v) in acc.iter().enumerate() {
            if v != 0.0 {
                unitary[(output(y), col)] = v;
            }
        }
    }
    BlockEncoding {
        name: "combine_pq".into(),
        unitary,
        system_qubits: b,
        ancilla_qubits: b + 3,
        alpha: (p.norm * q.norm).sqrt(),
        target: target.clone(),
        epsilon_claim: 1e-10,
    }
    .verified()
}

/// Sparse-access encoding of `m / norm`. Entry amplitudes are normalised
/// by `s · max|m_ij|` (`s` the largest row/column nonzero count), which is
/// the natural `alpha`; a larger `norm` is reached by subnormalization.
pub fn load_sparse_encoding(m: &SparseSymMatrix, norm: f64) -> Result<BlockEncoding> {
    let n = m.n();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let b = (n.next_power_of_two().trailing_zeros() as usize).max(1);
    let size = 1usize << b;
    let sparsity = m.max_row_nnz().max(1) as f64;
    let natural = sparsity * m.max_abs();
    if natural == 0.0 {
        return Err(Error::invalid("matrix is zero"));
    }
    if norm < natural * (1.0 - 1e-12) {
        return Err(Error::NormTooSmall {
            requested: norm,
            natural,
        });
    }
    let dense_m = m.to_dense();
    let (p, q) = row_col_oracles(&dense_m, b, natural, natural)?;
    let mut padded = DMatrix::zeros(size, size);
    padded.view_mut((0, 0), (n, n)).copy_from(&dense_m);
    let enc = combine_pq(&p, &q, &padded)?.compressed()?;
    let enc = if norm > natural {
        enc.subnormalized(natural / norm)?.compressed()?
    } else {
        enc
    };
    Ok(enc.with_name("sparse-load"))
}

/// Diagonal 0/1 projector `D` as `[[D, I-D], [I-D, D]]` on `system_qubits`.
pub fn projector_encoding(indicator: &[bool], system_qubits: usize) -> Result<BlockEncoding> {
    let n = 1usize << system_qubits;
    if indicator.len() > n {
        return Err(Error::invalid("indicator longer than the system register"));
    }
    check_dim(2 * n, "projector")?;
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    let mut target = DMatrix::zeros(n, n);
    for i in 0..n {
        let on = indicator.get(i).copied().unwrap_or(false);
        if on {
            u[(i, i)] = 1.0;
            u[(n + i, n + i)] = 1.0;
            target[(i, i)] = 1.0;
        } else {
            u[(i, n + i)] = 1.0;
            u[(n + i, i)] = 1.0;
        }
    }
    Ok(BlockEncoding {
        name: "projector".into(),
        unitary: u,
        system_qubits,
        ancilla_qubits: 1,
        alpha: 1.0,
        target,
        epsilon_claim: 0.0,
    })
}
