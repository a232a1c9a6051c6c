//! Zero-embedding fix-ups, level shifts and the LCU assembly of the
//! embedded BPX frame `F̂`.
//!
//! A matrix `A` of inner shape `n_r × n_c` padded with zeros to `N_r × N_c`
//! is written `A'`. The tensor product of padded factors is not the padding
//! of the tensor product, but the two differ only by index permutations.

use nalgebra::DMatrix;

use super::oracles::{
    combine_pq, interp_target, oracle_p_interp, oracle_q_interp, projector_encoding,
};
use super::{check_dim, lcu, BlockEncoding, StatePrepPair};
use crate::bpx::{bpx_build, interp_multi, level_weight};
use crate::error::{Error, Result};
use crate::geometry::multilevel_size;

/// Outer (padded) and inner sizes of one tensor factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactorShape {
    pub outer_rows: usize,
    pub inner_rows: usize,
    pub outer_cols: usize,
    pub inner_cols: usize,
}

/// Position in `A' ⊗ B'` of compact index `k` of `(A ⊗ B)'`.
pub fn pc_forward(k: usize, n_a: usize, n_b: usize, big_b: usize) -> usize {
    if k < n_a * n_b {
        (k / n_b) * big_b + k % n_b
    } else if k < n_a * big_b {
        let rest = k - n_a * n_b;
        let pad = big_b - n_b;
        (rest / pad) * big_b + n_b + rest % pad
    } else {
        k
    }
}

/// Inverse of [`pc_forward`].
pub fn pc_inverse(p: usize, n_a: usize, n_b: usize, big_b: usize) -> usize {
    if p < n_a * big_b {
        let (t, tp) = (p / big_b, p % big_b);
        if tp < n_b {
            t * n_b + tp
        } else {
            n_a * n_b + t * (big_b - n_b) + (tp - n_b)
        }
    } else {
        p
    }
}

/// Index maps with `(⊗A_i)'[j, k] = (⊗A_i')[rows[j], cols[k]]`.
fn fixup_maps(shapes: &[FactorShape]) -> Result<(Vec<usize>, Vec<usize>)> {
    let first = shapes.first().ok_or_else(|| Error::invalid("no factors"))?;
    for s in shapes {
        if s.inner_rows > s.outer_rows || s.inner_cols > s.outer_cols {
            return Err(Error::invalid(format!("inconsistent factor shape {s:?}")));
        }
    }
    let fold = |outer: fn(&FactorShape) -> (usize, usize)| -> Vec<usize> {
        let (mut big, mut small) = outer(first);
        let mut map: Vec<usize> = (0..big).collect();
        for s in &shapes[1..] {
            let (big_b, n_b) = outer(s);
            map = (0..big * big_b)
                .map(|k| {
                    let p = pc_forward(k, small, n_b, big_b);
                    map[p / big_b] * big_b + p % big_b
                })
                .collect();
            big *= big_b;
            small *= n_b;
        }
        map
    };
    Ok((
        fold(|s| (s.outer_rows, s.inner_rows)),
        fold(|s| (s.outer_cols, s.inner_cols)),
    ))
}

/// 0/1 matrices with `(⊗A_i)' = P_r (⊗A_i') P_c`.
pub fn perm_embed_fixup(shapes: &[FactorShape]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (rows, cols) = fixup_maps(shapes)?;
    let mut pr = DMatrix::zeros(rows.len(), rows.len());
    for (j, &r) in rows.iter().enumerate() {
        pr[(j, r)] = 1.0;
    }
    let mut pc = DMatrix::zeros(cols.len(), cols.len());
    for (k, &c) in cols.iter().enumerate() {
        pc[(c, k)] = 1.0;
    }
    Ok((pr, pc))
}

fn nodes(dim: usize, l: u32) -> usize {
    ((1usize << l) - 1).pow(dim as u32)
}

/// Moves an encoding of `(I_{l→l+1})'` on `dim·(reg_level+1)` qubits to the
/// level-block position `(l+1, l)` of the stacked hierarchy.
pub fn embed_level_shift(
    enc: &BlockEncoding,
    l: u32,
    dim: usize,
    reg_level: u32,
) -> Result<BlockEncoding> {
    let s = dim * (reg_level as usize + 1);
    if enc.system_qubits != s {
        return Err(Error::invalid(format!(
            "encoding has {} system qubits, expected {s}",
            enc.system_qubits
        )));
    }
    if l == 0 || l >= reg_level {
        return Err(Error::invalid(format!(
            "level {l} has no successor below {reg_level}"
        )));
    }
    let m = 1usize << s;
    let sub = multilevel_size(dim, l - 1);
    let add = multilevel_size(dim, l);
    Ok(enc
        .permute_system(|p| (p + m - add) % m, |q| (q + m - sub) % m)
        .with_name(format!("shift[{l}->{}]", l + 1)))
}

/// Encoding of the padded `dim`-dimensional one-level interpolation
/// `(I_{l→l+1})'` on registers sized for `reg_level` (`alpha = 2^{dim/2}`).
pub fn one_level_encoding(dim: usize, l: u32, reg_level: u32) -> Result<BlockEncoding> {
    let target = interp_target(l, reg_level)?;
    let p = oracle_p_interp(l, reg_level)?;
    let q = oracle_q_interp(l, reg_level)?;
    let one_d = combine_pq(&p, &q, &target)?.compressed()?;
    let mut enc = one_d.clone();
    for _ in 1..dim {
        enc = enc.tensor(&one_d)?.compressed()?;
    }
    let m = target.nrows();
    let shape = FactorShape {
        outer_rows: m,
        inner_rows: (1 << (l + 1)) - 1,
        outer_cols: m,
        inner_cols: (1 << l) - 1,
    };
    let (rows, cols) = fixup_maps(&vec![shape; dim])?;
    Ok(enc
        .permute_system(|j| rows[j], |k| cols[k])
        .with_name(format!("interp{dim}d[{l}->{}]", l + 1)))
}

/// `Î_{l→l+1}` on the stacked hierarchy, compressed to one ancilla.
pub fn level_encoding(dim: usize, l: u32, reg_level: u32) -> Result<BlockEncoding> {
    embed_level_shift(&one_level_encoding(dim, l, reg_level)?, l, dim, reg_level)?.compressed()
}

/// Directly built `Î_{l→l+1}` padded to `2^{dim(reg_level+1)}`.
pub fn shifted_interp_target(dim: usize, l: u32, reg_level: u32) -> Result<DMatrix<f64>> {
    let m = 1usize << (dim * (reg_level as usize + 1));
    let blk = interp_multi(dim, l, l + 1)?.matrix;
    let mut t = DMatrix::zeros(m, m);
    t.view_mut(
        (multilevel_size(dim, l), multilevel_size(dim, l - 1)),
        blk.shape(),
    )
    .copy_from(&blk);
    Ok(t)
}

/// `F̂` from the BPX module, padded to the register size used by the LCU.
pub fn fhat_padded(dim: usize, level: u32) -> Result<DMatrix<f64>> {
    let fhat = bpx_build(dim, level)?.embedded();
    let m = 1usize << (dim * (level as usize + 1));
    let mut t = DMatrix::zeros(m, m);
    t.view_mut((0, 0), fhat.shape()).copy_from(&fhat);
    Ok(t)
}

/// Tolerance of the final comparison against the BPX module's `F̂`.
pub const FHAT_TOL: f64 = 1e-8;

/// Encodes `F̂ = Σ_l Ĝ_l`, `Ĝ_l = 2^{-l(2-d)/2} Î_{l→L}`, as a uniform LCU.
/// Each term is subnormalized to the common `alpha = 2^{dL/2}`, so the
/// result has `alpha = L·2^{dL/2}`.
pub fn lcu_assemble_fhat(dim: usize, level: u32) -> Result<BlockEncoding> {
    if !(1..=3).contains(&dim) || level == 0 {
        return Err(Error::invalid(format!("bad shape dim={dim} level={level}")));
    }
    let s = dim * (level as usize + 1);
    let width = (level as usize).next_power_of_two().trailing_zeros() as usize;
    check_dim(1 << (s + 1 + width), "F̂ LCU")?;
    let steps: Vec<BlockEncoding> = (1..level)
        .map(|l| level_encoding(dim, l, level))
        .collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(level as usize);
    for l in 1..=level {
        let lift = if l == level {
            let lo = multilevel_size(dim, level - 1);
            let hi = lo + nodes(dim, level);
            let ind: Vec<bool> = (0..hi).map(|i| i >= lo).collect();
            projector_encoding(&ind, s)?
        } else {
            let mut acc = steps[l as usize - 1].clone();
            for step in &steps[l as usize..] {
                acc = step.multiply(&acc)?.compressed()?;
            }
            acc
        };
        let term = lift
            .rescaled(level_weight(dim, l))
            .subnormalized((-(l as f64)).exp2())?
            .compressed()?
            .with_name(format!("G[{l}]"));
        terms.push(term);
    }
    let mut enc = lcu(&terms, &StatePrepPair::uniform(level as usize)?)?;
    enc.name = format!("Fhat[d={dim},L={level}]");
    enc.target = fhat_padded(dim, level)?;
    enc.epsilon_claim = FHAT_TOL;
    enc.verified()
}
