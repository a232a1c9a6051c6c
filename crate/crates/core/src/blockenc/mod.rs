//! Dense emulation of block encodings.
//!
//! A [`BlockEncoding`] is an explicit real orthogonal matrix `U` on
//! `q` ancilla qubits and `s` system qubits. Basis index `anc * 2^s + sys`
//! puts the ancillas in the most significant positions, so the encoded
//! block is the top-left `2^s × 2^s` corner of `U`, scaled by `alpha`.
//!
//! The constructions here never need complex phases (all oracle signs are
//! real), so `U†` is `Uᵀ` throughout.

mod chain;
mod embed;
mod oracles;

use std::fmt;

use nalgebra::DMatrix;

use crate::dense::{self, spectral_norm};
use crate::error::{Error, Result};

pub use chain::{hamiltonian_chain_emulate, ChainLedger, FactorReport};
pub use embed::{
    embed_level_shift, fhat_padded, lcu_assemble_fhat, level_encoding, one_level_encoding,
    pc_forward, pc_inverse, perm_embed_fixup, shifted_interp_target, FactorShape,
};
pub use oracles::{
    combine_pq, interp_target, load_sparse_encoding, oracle_p_interp, oracle_q_interp,
    projector_encoding, row_col_oracles, OracleKind, OracleUnitary,
};

/// Largest dense unitary dimension any construction may form.
pub const MAX_UNITARY_DIM: usize = 4096;

/// Unitarity tolerance every encoding must meet.
pub const UNITARITY_TOL: f64 = 1e-10;

pub(crate) fn check_dim(dim: usize, what: &str) -> Result<()> {
    if dim > MAX_UNITARY_DIM {
        Err(Error::ResourceLimit(format!(
            "{what} needs a {dim}-dimensional unitary (limit {MAX_UNITARY_DIM})"
        )))
    } else {
        Ok(())
    }
}

/// An explicit `(alpha, q, epsilon)` block encoding of `target`.
#[derive(Clone, Debug)]
pub struct BlockEncoding {
    pub name: String,
    pub unitary: DMatrix<f64>,
    pub system_qubits: usize,
    pub ancilla_qubits: usize,
    pub alpha: f64,
    /// The encoded matrix, padded to `2^s × 2^s`.
    pub target: DMatrix<f64>,
    pub epsilon_claim: f64,
}

/// Structured outcome of checking one encoding.
#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub name: String,
    pub alpha: f64,
    pub ancilla_qubits: usize,
    pub unitarity_defect: f64,
    pub block_defect: f64,
    pub tolerance: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.unitarity_defect <= UNITARITY_TOL && self.block_defect <= self.tolerance
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "operator={} alpha={:.12} q={} unitarity={:.3e} defect={:.3e} tol={:.1e} status={}",
            self.name,
            self.alpha,
            self.ancilla_qubits,
            self.unitarity_defect,
            self.block_defect,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

impl BlockEncoding {
    pub fn system_dim(&self) -> usize {
        1 << self.system_qubits
    }

    /// Unscaled top-left block (ancillas in `|0⟩`).
    pub fn raw_block(&self) -> DMatrix<f64> {
        let n = self.system_dim();
        self.unitary.view((0, 0), (n, n)).clone_owned()
    }

    /// `alpha` times the top-left block: the matrix actually encoded.
    pub fn block(&self) -> DMatrix<f64> {
        self.raw_block() * self.alpha
    }

    pub fn unitarity_defect(&self) -> f64 {
        dense::unitarity_defect(&self.unitary)
    }

    /// `‖target - alpha·block‖₂`.
    pub fn block_defect(&self) -> f64 {
        spectral_norm(&(&self.target - self.block()))
    }

    pub fn report(&self) -> VerificationReport {
        VerificationReport {
            name: self.name.clone(),
            alpha: self.alpha,
            ancilla_qubits: self.ancilla_qubits,
            unitarity_defect: self.unitarity_defect(),
            block_defect: self.block_defect(),
            tolerance: self.epsilon_claim,
        }
    }

    /// Checks both invariants, failing with the measured defect.
    pub fn verified(self) -> Result<Self> {
        let r = self.report();
        if r.unitarity_defect > UNITARITY_TOL {
            return Err(Error::EncodingDefect {
                name: format!("{} (unitarity)", r.name),
                defect: r.unitarity_defect,
                tolerance: UNITARITY_TOL,
            });
        }
        if r.block_defect > r.tolerance {
            return Err(Error::EncodingDefect {
                name: r.name,
                defect: r.block_defect,
                tolerance: r.tolerance,
            });
        }
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Reinterprets the same unitary as an encoding of `scale * target`.
    pub fn rescaled(mut self, scale: f64) -> Self {
        self.alpha *= scale;
        self.target *= scale;
        self.epsilon_claim *= scale;
        self
    }

    /// Replaces the ancilla register by a single qubit while keeping the
    /// block: `[[X, (I-XXᵀ)^½], [(I-XᵀX)^½, -Xᵀ]]`, built from one SVD of `X`.
    pub fn compressed(&self) -> Result<Self> {
        let x = self.raw_block();
        let n = x.nrows();
        let svd = x.svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let sig = &svd.singular_values;
        if sig.max() > 1.0 + 1e-9 {
            return Err(Error::invalid(format!(
                "{}: block has norm {} > 1",
                self.name,
                sig.max()
            )));
        }
        let root = sig.map(|s| (1.0 - (s * s).min(1.0)).sqrt());
        let d_sig = DMatrix::from_diagonal(sig);
        let d_root = DMatrix::from_diagonal(&root);
        let v = vt.transpose();
        let mut w = DMatrix::zeros(2 * n, 2 * n);
        w.view_mut((0, 0), (n, n)).copy_from(&(&u * &d_sig * &vt));
        w.view_mut((0, n), (n, n))
            .copy_from(&(&u * &d_root * u.transpose()));
        w.view_mut((n, 0), (n, n)).copy_from(&(&v * &d_root * &vt));
        w.view_mut((n, n), (n, n))
            .copy_from(&(-(&v * &d_sig * u.transpose())));
        Ok(BlockEncoding {
            name: self.name.clone(),
            unitary: w,
            system_qubits: self.system_qubits,
            ancilla_qubits: 1,
            alpha: self.alpha,
            target: self.target.clone(),
            epsilon_claim: self.epsilon_claim,
        })
    }

    /// Shrinks the block by `factor ∈ (0, 1]` with one extra rotated
    /// ancilla, so the same target is encoded with `alpha / factor`.
    pub fn subnormalized(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::invalid(format!(
                "subnormalization {factor} not in (0, 1]"
            )));
        }
        let dim = 2 * self.unitary.nrows();
        check_dim(dim, &self.name)?;
        let c = (1.0 - factor * factor).sqrt();
        let rot = DMatrix::from_row_slice(2, 2, &[factor, -c, c, factor]);
        Ok(BlockEncoding {
            name: self.name.clone(),
            unitary: rot.kronecker(&self.unitary),
            system_qubits: self.system_qubits,
            ancilla_qubits: self.ancilla_qubits + 1,
            alpha: self.alpha / factor,
            target: self.target.clone(),
            epsilon_claim: self.epsilon_claim,
        })
    }

    /// Relabels system indices: the new block is `B'[j, k] = B[rows(j), cols(k)]`,
    /// realised as `(I ⊗ Πᵣᵀ) U (I ⊗ Π꜀)`.
    pub fn permute_system(
        &self,
        rows: impl Fn(usize) -> usize,
        cols: impl Fn(usize) -> usize,
    ) -> Self {
        let n = self.system_dim();
        let dim = self.unitary.nrows();
        let rmap: Vec<usize> = (0..dim).map(|i| (i / n) * n + rows(i % n)).collect();
        let cmap: Vec<usize> = (0..dim).map(|i| (i / n) * n + cols(i % n)).collect();
        let unitary = DMatrix::from_fn(dim, dim, |i, j| self.unitary[(rmap[i], cmap[j])]);
        let target = DMatrix::from_fn(n, n, |i, j| self.target[(rows(i), cols(j))]);
        BlockEncoding {
            unitary,
            target,
            ..self.clone()
        }
    }

    /// Tensor product: systems and ancillas are concatenated, `alpha` multiplies.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let (sa, sb) = (self.system_qubits, other.system_qubits);
        let (qa, qb) = (self.ancilla_qubits, other.ancilla_qubits);
        let dim = 1usize << (sa + sb + qa + qb);
        check_dim(dim, "tensor product")?;
        let db = other.unitary.nrows();
        let new_index = |ia: usize, ib: usize| -> usize {
            let (aa, xa) = (ia >> sa, ia & ((1 << sa) - 1));
            let (ab, xb) = (ib >> sb, ib & ((1 << sb) - 1));
            ((((aa << qb) | ab) << sa | xa) << sb) | xb
        };
        let map: Vec<usize> = (0..dim).map(|i| new_index(i / db, i % db)).collect();
        let kron = self.unitary.kronecker(&other.unitary);
        let mut unitary = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..dim {
                unitary[(map[i], map[j])] = kron[(i, j)];
            }
        }
        Ok(BlockEncoding {
            name: format!("{}⊗{}", self.name, other.name),
            unitary,
            system_qubits: sa + sb,
            ancilla_qubits: qa + qb,
            alpha: self.alpha * other.alpha,
            target: self.target.kronecker(&other.target),
            epsilon_claim: self.epsilon_claim * other.alpha
                + other.epsilon_claim * self.alpha
                + self.epsilon_claim * other.epsilon_claim,
        })
    }

    /// Product `self · other` with separate ancilla registers.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.system_qubits != other.system_qubits {
            return Err(Error::invalid("product of encodings on different systems"));
        }
        let s = self.system_qubits;
        let (qa, qb) = (self.ancilla_qubits, other.ancilla_qubits);
        let dim = 1usize << (s + qa + qb);
        check_dim(dim, "product")?;
        let n = 1usize << s;
        let split = |i: usize| ((i / n) >> qb, (i / n) & ((1 << qb) - 1), i % n);
        let ua = DMatrix::from_fn(dim, dim, |i, j| {
            let (aa, ab, x) = split(i);
            let (aa2, ab2, y) = split(j);
            if ab == ab2 {
                self.unitary[(aa * n + x, aa2 * n + y)]
            } else {
                0.0
            }
        });
        let ub = DMatrix::from_fn(dim, dim, |i, j| {
            let (aa, ab, x) = split(i);
            let (aa2, ab2, y) = split(j);
            if aa == aa2 {
                other.unitary[(ab * n + x, ab2 * n + y)]
            } else {
                0.0
            }
        });
        Ok(BlockEncoding {
            name: format!("{}·{}", self.name, other.name),
            unitary: ua * ub,
            system_qubits: s,
            ancilla_qubits: qa + qb,
            alpha: self.alpha * other.alpha,
            target: &self.target * &other.target,
            epsilon_claim: self.alpha * other.epsilon_claim + other.alpha * self.epsilon_claim,
        })
    }
}

/// A pair of orthogonal matrices whose first columns carry `c` and `d`
/// with `beta · c_j · d_j = y_j`.
#[derive(Clone, Debug)]
pub struct StatePrepPair {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub beta: f64,
    /// Selector width in qubits.
    pub width: usize,
}

impl StatePrepPair {
    pub fn for_coefficients(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("no coefficients"));
        }
        let beta: f64 = y.iter().map(|v| v.abs()).sum();
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::invalid(
                "coefficients must be finite and not all zero",
            ));
        }
        let width = y.len().next_power_of_two().trailing_zeros() as usize;
        let m = 1usize << width;
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for (j, &v) in y.iter().enumerate() {
            c[j] = (v.abs() / beta).sqrt();
            d[j] = v.signum() * c[j];
        }
        Ok(StatePrepPair {
            left: dense::householder_prep(&c),
            right: dense::householder_prep(&d),
            beta,
            width,
        })
    }

    pub fn uniform(terms: usize) -> Result<Self> {
        StatePrepPair::for_coefficients(&vec![1.0; terms])
    }

    /// `Σ_j |beta c_j d_j - y_j|`, with `y` zero-padded.
    pub fn defect(&self, y: &[f64]) -> f64 {
        (0..self.left.nrows())
            .map(|j| {
                let got = self.beta * self.left[(j, 0)] * self.right[(j, 0)];
                (got - y.get(j).copied().unwrap_or(0.0)).abs()
            })
            .sum()
    }
}

/// Linear combination `Σ y_j A_j` of encodings sharing `alpha`, `s` and `q`.
pub fn lcu(terms: &[BlockEncoding], prep: &StatePrepPair) -> Result<BlockEncoding> {
    let first = terms.first().ok_or_else(|| Error::invalid("no terms"))?;
    if terms.len() > 1 << prep.width {
        return Err(Error::invalid("state preparation pair is too narrow"));
    }
    for t in terms {
        if t.system_qubits != first.system_qubits || t.ancilla_qubits != first.ancilla_qubits {
            return Err(Error::invalid(format!(
                "LCU term {} has a different register layout",
                t.name
            )));
        }
        if (t.alpha - first.alpha).abs() > 1e-12 * first.alpha {
            return Err(Error::invalid(format!(
                "LCU term {} has alpha {} instead of {}",
                t.name, t.alpha, first.alpha
            )));
        }
    }
    let sel = 1usize << prep.width;
    let inner = first.unitary.nrows();
    check_dim(sel * inner, "LCU")?;
    let id = DMatrix::identity(inner, inner);
    let unit = |k: usize| {
        if k < terms.len() {
            &terms[k].unitary
        } else {
            &id
        }
    };
    // Block (i, j) of (P_Lᵀ ⊗ I) W (P_R ⊗ I) is Σ_k P_L[k,i] P_R[k,j] U_k.
    let mut unitary = DMatrix::zeros(sel * inner, sel * inner);
    for i in 0..sel {
        for j in 0..sel {
            let mut blk = DMatrix::zeros(inner, inner);
            for k in 0..sel {
                let w = prep.left[(k, i)] * prep.right[(k, j)];
                if w != 0.0 {
                    blk += unit(k) * w;
                }
            }
            unitary
                .view_mut((i * inner, j * inner), (inner, inner))
                .copy_from(&blk);
        }
    }
    let y: Vec<f64> = (0..terms.len())
        .map(|k| prep.beta * prep.left[(k, 0)] * prep.right[(k, 0)])
        .collect();
    let target = terms.iter().zip(&y).fold(
        DMatrix::zeros(first.system_dim(), first.system_dim()),
        |acc, (t, w)| acc + &t.target * *w,
    );
    Ok(BlockEncoding {
        name: "lcu".into(),
        unitary,
        system_qubits: first.system_qubits,
        ancilla_qubits: first.ancilla_qubits + prep.width,
        alpha: prep.beta * first.alpha,
        target,
        epsilon_claim: terms.iter().map(|t| t.epsilon_claim).fold(0.0, f64::max) * prep.beta
            + prep.defect(&y) * first.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_encoding(x: f64) -> BlockEncoding {
        let c = (1.0 - x * x).sqrt();
        BlockEncoding {
            name: "rot".into(),
            unitary: DMatrix::from_row_slice(2, 2, &[x, -c, c, x]),
            system_qubits: 0,
            ancilla_qubits: 1,
            alpha: 2.0,
            target: DMatrix::from_element(1, 1, 2.0 * x),
            epsilon_claim: 1e-12,
        }
    }

    #[test]
    fn product_and_tensor_of_scalars() {
        let a = rotation_encoding(0.3);
        let b = rotation_encoding(-0.5);
        let p = a.multiply(&b).unwrap().verified().unwrap();
        assert!((p.block()[(0, 0)] - 4.0 * 0.3 * -0.5).abs() < 1e-14);
        let t = a.tensor(&b).unwrap().verified().unwrap();
        assert_eq!(t.alpha, 4.0);
    }

    #[test]
    fn compress_keeps_block() {
        let a = rotation_encoding(0.3)
            .tensor(&rotation_encoding(0.7))
            .unwrap();
        let c = a.compressed().unwrap().verified().unwrap();
        assert_eq!(c.ancilla_qubits, 1);
        assert!((c.raw_block() - a.raw_block()).amax() < 1e-15);
    }

    #[test]
    fn lcu_of_scalars() {
        let terms = [
            rotation_encoding(0.3),
            rotation_encoding(0.1),
            rotation_encoding(-0.2),
        ];
        let prep = StatePrepPair::uniform(3).unwrap();
        assert!(prep.defect(&[1.0, 1.0, 1.0]) < 1e-15);
        let e = lcu(&terms, &prep).unwrap().verified().unwrap();
        assert_eq!(e.alpha, 6.0);
        assert!((e.block()[(0, 0)] - 2.0 * 0.2).abs() < 1e-14);
    }

    #[test]
    fn signed_prep_pair() {
        let y = [0.5, -1.5, 2.0];
        let p = StatePrepPair::for_coefficients(&y).unwrap();
        assert_eq!(p.beta, 4.0);
        assert!(p.defect(&y) < 1e-14);
    }
}
