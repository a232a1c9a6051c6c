//! Sums of squares of interpolated values over fine-node boxes, and the
//! hierarchical amplitude preparation built on them.
//!
//! Inside one coarse cell the interpolant is multilinear, so along each axis
//! `u(t) = v0 (1-t) + v1 t` and `Σ u(t_j)² = (v0, v1) G (v0, v1)ᵀ` with a 2×2
//! Gram matrix `G` of the sums `Σ 1`, `Σ t`, `Σ t²`. Over a box the Gram
//! matrices multiply as a Kronecker product, so the cost does not depend on
//! how many fine nodes the box holds.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};

/// Fine nodes `first..=last` of a coarse cell split into `subdivisions`
/// intervals; node `j` sits at `t = j / subdivisions`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisRange {
    pub subdivisions: u64,
    pub first: u64,
    pub last: u64,
}

impl AxisRange {
    pub fn new(subdivisions: u64, first: u64, last: u64) -> Result<Self> {
        if subdivisions == 0 {
            return Err(Error::invalid("a cell needs at least one subdivision"));
        }
        if first > last {
            return Err(Error::invalid(format!("empty node range {first}..={last}")));
        }
        if last > subdivisions {
            return Err(Error::OutOfRange(format!(
                "node {last} lies beyond the cell ({subdivisions} subdivisions); split the range per cell first"
            )));
        }
        Ok(AxisRange {
            subdivisions,
            first,
            last,
        })
    }

    /// Number of fine nodes in the range.
    pub fn count(&self) -> u64 {
        self.last - self.first + 1
    }

    /// `[[Σ(1-t)², Σt(1-t)], [Σt(1-t), Σt²]]` over the range.
    pub fn gram(&self) -> Matrix2<f64> {
        // Exact integer power sums, then a single division each.
        let p1 = |n: u128| n * (n + 1) / 2;
        let p2 = |n: u128| n * (n + 1) * (2 * n + 1) / 6;
        let (a, b) = (self.first as u128, self.last as u128);
        let below = |f: &dyn Fn(u128) -> u128| if a == 0 { 0 } else { f(a - 1) };
        let q = self.subdivisions as f64;
        let s0 = self.count() as f64;
        let s1 = (p1(b) - below(&p1)) as f64 / q;
        let s2 = (p2(b) - below(&p2)) as f64 / (q * q);
        let cross = s1 - s2;
        Matrix2::new(s0 - 2.0 * s1 + s2, cross, cross, s2)
    }
}

/// Per-axis Gram matrices and the `2^d` corner values of one coarse cell.
#[derive(Clone, Debug)]
pub struct GramPrefix {
    grams: Vec<Matrix2<f64>>,
    values: Vec<f64>,
}

impl GramPrefix {
    /// `values` are the cell's corner values, last axis fastest.
    pub fn new(values: &[f64], ranges: &[AxisRange]) -> Result<Self> {
        if ranges.is_empty() || ranges.len() > 3 {
            return Err(Error::invalid(format!(
                "{} axes, expected 1..=3",
                ranges.len()
            )));
        }
        if values.len() != 1 << ranges.len() {
            return Err(Error::invalid(format!(
                "{} corner values for a {}-dimensional cell",
                values.len(),
                ranges.len()
            )));
        }
        Ok(GramPrefix {
            grams: ranges.iter().map(AxisRange::gram).collect(),
            values: values.to_vec(),
        })
    }

    pub fn grams(&self) -> &[Matrix2<f64>] {
        &self.grams
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `vᵀ (G_1 ⊗ ... ⊗ G_d) v`.
    pub fn sum(&self) -> f64 {
        let g = self
            .grams
            .iter()
            .fold(DMatrix::from_element(1, 1, 1.0), |acc, g| {
                acc.kronecker(&DMatrix::from_column_slice(2, 2, g.as_slice()))
            });
        let v = DVector::from_column_slice(&self.values);
        v.dot(&(g * &v))
    }
}

/// Sum of squares of the multilinear interpolant of `coarse_values` over the
/// fine nodes described by `ranges`, one per axis.
pub fn gram_prefix_sum(coarse_values: &[f64], ranges: &[AxisRange]) -> Result<f64> {
    Ok(GramPrefix::new(coarse_values, ranges)?.sum())
}

/// Which child the hierarchical preparation visits first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitOrder {
    #[default]
    LeftFirst,
    RightFirst,
}

/// Coarse interpolant seen through the fine grid.
struct FineView<'a> {
    coarse: &'a [f64],
    dim: usize,
    coarse_nodes: usize,
    fine_nodes: usize,
    ratio: usize,
}

impl FineView<'_> {
    /// Coarse value at per-axis node indices `0..=2^c`, zero on the boundary.
    fn coarse_at(&self, idx: &[usize]) -> f64 {
        let mut k = 0;
        for &i in idx {
            if i == 0 || i > self.coarse_nodes {
                return 0.0;
            }
            k = k * self.coarse_nodes + (i - 1);
        }
        self.coarse[k]
    }

    fn corners(&self, cell: &[usize]) -> Vec<f64> {
        (0..1usize << self.dim)
            .map(|c| {
                let idx: Vec<usize> = (0..self.dim)
                    .map(|a| cell[a] + ((c >> (self.dim - 1 - a)) & 1))
                    .collect();
                self.coarse_at(&idx)
            })
            .collect()
    }

    /// Interpolated value at a fine node (1-based per-axis indices).
    fn value(&self, fine: &[usize]) -> f64 {
        let cell: Vec<usize> = fine.iter().map(|&p| p / self.ratio).collect();
        let corners = self.corners(&cell);
        let q = self.ratio as f64;
        corners
            .iter()
            .enumerate()
            .map(|(c, v)| {
                (0..self.dim).fold(*v, |acc, a| {
                    let t = (fine[a] % self.ratio) as f64 / q;
                    if (c >> (self.dim - 1 - a)) & 1 == 1 {
                        acc * t
                    } else {
                        acc * (1.0 - t)
                    }
                })
            })
            .sum()
    }

    /// Σ u² over the box of fine 0-based node indices `lo[a]..hi[a]`.
    fn box_weight(&self, lo: &[usize], hi: &[usize]) -> Result<f64> {
        // Per axis: (cell, local range) pieces covering the interval.
        let pieces: Vec<Vec<(usize, AxisRange)>> = (0..self.dim)
            .map(|a| {
                let (p_lo, p_hi) = (lo[a] + 1, hi[a]);
                (p_lo / self.ratio..=p_hi / self.ratio)
                    .map(|cell| {
                        let base = cell * self.ratio;
                        let first = p_lo.max(base) - base;
                        let last = p_hi.min(base + self.ratio - 1) - base;
                        AxisRange::new(self.ratio as u64, first as u64, last as u64)
                            .map(|r| (cell, r))
                    })
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut pick = vec![0usize; self.dim];
        loop {
            let cell: Vec<usize> = (0..self.dim).map(|a| pieces[a][pick[a]].0).collect();
            let ranges: Vec<AxisRange> = (0..self.dim).map(|a| pieces[a][pick[a]].1).collect();
            total += gram_prefix_sum(&self.corners(&cell), &ranges)?;
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return Ok(total);
                }
                axis -= 1;
                pick[axis] += 1;
                if pick[axis] < pieces[axis].len() {
                    break;
                }
                pick[axis] = 0;
            }
        }
    }

    /// Σ u² over the flat fine indices `lo..hi` (first axis slowest).
    fn range_weight(&self, lo: usize, hi: usize) -> Result<f64> {
        let total = self.fine_nodes.pow(self.dim as u32);
        let (lo, hi) = (lo.min(total), hi.min(total));
        if lo >= hi {
            return Ok(0.0);
        }
        let mut boxes = Vec::new();
        decompose(
            lo,
            hi,
            &vec![self.fine_nodes; self.dim],
            &mut Vec::new(),
            &mut boxes,
        );
        boxes.iter().map(|(l, h)| self.box_weight(l, h)).sum()
    }
}

/// Splits the flat range `lo..hi` of a row-major array of `shape` into
/// axis-aligned boxes, each given by per-axis half-open bounds.
fn decompose(
    lo: usize,
    hi: usize,
    shape: &[usize],
    prefix: &mut Vec<(usize, usize)>,
    out: &mut Vec<(Vec<usize>, Vec<usize>)>,
) {
    if lo >= hi {
        return;
    }
    let Some((&n0, rest)) = shape.split_first() else {
        out.push((
            prefix.iter().map(|b| b.0).collect(),
            prefix.iter().map(|b| b.1).collect(),
        ));
        return;
    };
    let stride: usize = rest.iter().product();
    let full = |prefix: &mut Vec<(usize, usize)>, a: usize, b: usize, out: &mut Vec<_>| {
        if a < b {
            prefix.push((a, b));
            let (l, h): (Vec<usize>, Vec<usize>) = prefix
                .iter()
                .copied()
                .chain(rest.iter().map(|&n| (0, n)))
                .unzip();
            out.push((l, h));
            prefix.pop();
        }
    };
    let (a0, b0) = (lo / stride, hi / stride);
    let (lo_r, hi_r) = (lo % stride, hi % stride);
    if a0 == b0 {
        prefix.push((a0, a0 + 1));
        decompose(lo_r, hi_r, rest, prefix, out);
        prefix.pop();
        return;
    }
    let mut first_full = a0;
    if lo_r != 0 {
        prefix.push((a0, a0 + 1));
        decompose(lo_r, stride, rest, prefix, out);
        prefix.pop();
        first_full += 1;
    }
    full(prefix, first_full, b0.min(n0), out);
    if hi_r != 0 {
        prefix.push((b0, b0 + 1));
        decompose(0, hi_r, rest, prefix, out);
        prefix.pop();
    }
}

/// Fine-grid amplitudes of the interpolated coarse vector, assembled top-down
/// by binary splitting of a power-of-two index space with one Gram sum per
/// child. Signs come from the interpolant at each leaf. The result is the
/// normalized interpolation of `coarse_eigvec`.
pub fn stateprep_amplitudes(
    coarse_eigvec: &[f64],
    dim: usize,
    coarse_level: u32,
    fine_level: u32,
    order: SplitOrder,
) -> Result<Vec<f64>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
    }
    if coarse_level == 0 || coarse_level > fine_level || fine_level > 12 {
        return Err(Error::invalid(format!(
            "need 1 <= coarse level {coarse_level} <= fine level {fine_level} <= 12"
        )));
    }
    let coarse_nodes = (1usize << coarse_level) - 1;
    if coarse_eigvec.len() != coarse_nodes.pow(dim as u32) {
        return Err(Error::invalid(
            "coarse vector does not match the coarse mesh",
        ));
    }
    let view = FineView {
        coarse: coarse_eigvec,
        dim,
        coarse_nodes,
        fine_nodes: (1usize << fine_level) - 1,
        ratio: 1usize << (fine_level - coarse_level),
    };
    let n = view.fine_nodes.pow(dim as u32);
    let padded = n.next_power_of_two();
    let total = view.range_weight(0, padded)?;
    if total <= 0.0 {
        return Err(Error::invalid("coarse vector is zero"));
    }
    let mut amps = vec![0.0; n];
    // Depth-first over (lo, hi, amplitude of the node).
    let mut stack = vec![(0usize, padded, 1.0f64, total)];
    while let Some((lo, hi, amp, weight)) = stack.pop() {
        if hi - lo == 1 {
            let multi: Vec<usize> = crate::geometry::unflatten(lo, view.fine_nodes, dim)
                .into_iter()
                .map(|i| i + 1)
                .collect();
            let sign = if view.value(&multi) < 0.0 { -1.0 } else { 1.0 };
            amps[lo] = sign * amp;
            continue;
        }
        let mid = lo + (hi - lo) / 2;
        let children = [(lo, mid), (mid, hi)].map(|(a, b)| -> Result<_> {
            let w = view.range_weight(a, b)?;
            Ok((a, b, amp * (w / weight).sqrt(), w))
        });
        let [left, right] = children;
        let (left, right) = (left?, right?);
        // The stack pops last-in first.
        let visit = match order {
            SplitOrder::LeftFirst => [right, left],
            SplitOrder::RightFirst => [left, right],
        };
        stack.extend(visit.into_iter().filter(|c| c.3 > 0.0));
    }
    Ok(amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_points() {
        let r = AxisRange::new(4, 1, 3).unwrap();
        assert!((gram_prefix_sum(&[0.0, 1.0], &[r]).unwrap() - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_range_past_cell() {
        assert!(AxisRange::new(4, 1, 5).is_err());
    }

    #[test]
    fn decompose_covers_range() {
        let shape = [3, 4, 5];
        for (lo, hi) in [(0, 60), (7, 43), (13, 14), (19, 41), (0, 64)] {
            let mut boxes = Vec::new();
            decompose(lo, hi.min(60), &shape, &mut Vec::new(), &mut boxes);
            let mut seen = vec![0; 60];
            for (l, h) in &boxes {
                for i in l[0]..h[0] {
                    for j in l[1]..h[1] {
                        for k in l[2]..h[2] {
                            seen[(i * 4 + j) * 5 + k] += 1;
                        }
                    }
                }
            }
            for (idx, s) in seen.iter().enumerate() {
                assert_eq!(
                    *s,
                    usize::from(idx >= lo && idx < hi.min(60)),
                    "{lo}..{hi} at {idx}"
                );
            }
        }
    }

    #[test]
    fn single_coarse_node() {
        let a = stateprep_amplitudes(&[1.0], 1, 1, 2, SplitOrder::LeftFirst).unwrap();
        let s = 1.5f64.sqrt();
        for (x, want) in a.iter().zip([0.5 / s, 1.0 / s, 0.5 / s]) {
            assert!((x - want).abs() < 1e-15);
        }
    }
}
