//! Meshes, material maps and node indexing on the unit cube.
//!
//! A mesh at level `L` splits `[0,1]^d` into `2^L` cells per axis. Interior
//! nodes are numbered lexicographically with the last axis varying fastest,
//! using 1-based per-axis indices in `1..=2^L - 1` (indices `0` and `2^L` sit
//! on the Dirichlet boundary and carry no unknown).
//!
//! Material regions are axis-aligned boxes with dyadic-rational corners, so
//! that "does this cell lie inside that box" is decided exactly.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dyadic denominator exponent.
pub const MAX_DYADIC_EXP: u32 = 40;

/// Largest supported refinement level.
pub const MAX_LEVEL: u32 = 20;

/// A dyadic rational `num / 2^exp` in `[0, 1]`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Dyadic {
    num: u64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: u64, exp: u32) -> Result<Self> {
        if exp > MAX_DYADIC_EXP {
            return Err(Error::invalid(format!(
                "dyadic denominator 2^{exp} exceeds 2^{MAX_DYADIC_EXP}"
            )));
        }
        if num > (1u64 << exp) {
            return Err(Error::invalid(format!("{num}/2^{exp} lies outside [0, 1]")));
        }
        let (mut num, mut exp) = (num, exp);
        while exp > 0 && num % 2 == 0 {
            num /= 2;
            exp -= 1;
        }
        if num == 0 {
            exp = 0;
        }
        Ok(Dyadic { num, exp })
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn log2_denominator(self) -> u32 {
        self.exp
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / (1u64 << self.exp) as f64
    }

    /// Numerator over the common denominator `2^exp` (requires `exp >= self.exp`).
    fn scaled(self, exp: u32) -> u128 {
        (self.num as u128) << (exp - self.exp)
    }

    /// Difference `self - other` as (numerator, exponent), `None` if negative.
    fn minus(self, other: Dyadic) -> Option<(u128, u32)> {
        let e = self.exp.max(other.exp);
        self.scaled(e).checked_sub(other.scaled(e)).map(|n| (n, e))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        self.scaled(e).cmp(&other.scaled(e))
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1u64 << self.exp)
        }
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("`{s}` is not a dyadic rational in [0, 1]"));
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num: u64 = num.parse().map_err(|_| bad())?;
        let den: u64 = match den.strip_prefix("2^") {
            Some(e) => {
                let e: u32 = e.parse().map_err(|_| bad())?;
                1u64.checked_shl(e).ok_or_else(bad)?
            }
            None => den.parse().map_err(|_| bad())?,
        };
        if den == 0 || !den.is_power_of_two() {
            return Err(bad());
        }
        Dyadic::new(num, den.trailing_zeros())
    }
}

impl TryFrom<String> for Dyadic {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Dyadic> for String {
    fn from(d: Dyadic) -> String {
        d.to_string()
    }
}

/// Diffusion coefficient, absorption and fission production of one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialProps {
    pub diffusion: f64,
    pub absorption: f64,
    pub nu_fission: f64,
}

impl MaterialProps {
    pub fn new(diffusion: f64, absorption: f64, nu_fission: f64) -> Result<Self> {
        let m = MaterialProps {
            diffusion,
            absorption,
            nu_fission,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.diffusion.is_finite()
            && self.absorption.is_finite()
            && self.nu_fission.is_finite();
        if !finite || self.diffusion <= 0.0 || self.absorption < 0.0 || self.nu_fission < 0.0 {
            return Err(Error::invalid(format!(
                "material needs D > 0, sigma_a >= 0, nu_sigma_f >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// An axis-aligned box `[lo, hi]` with uniform material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: Vec<Dyadic>,
    pub hi: Vec<Dyadic>,
    #[serde(flatten)]
    pub props: MaterialProps,
}

impl Region {
    fn contains_box(&self, lo: &[Dyadic], hi: &[Dyadic]) -> bool {
        self.lo.iter().zip(lo).all(|(a, b)| a <= b) && self.hi.iter().zip(hi).all(|(a, b)| b <= a)
    }

    fn overlaps(&self, other: &Region) -> bool {
        (0..self.lo.len()).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionMapRepr {
    dim: usize,
    #[serde(rename = "region")]
    regions: Vec<Region>,
}

/// A piecewise-constant material description that tiles `[0,1]^d` exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionMapRepr")]
pub struct RegionMap {
    dim: usize,
    #[serde(rename = "region")]
    regions: Vec<Region>,
}

impl TryFrom<RegionMapRepr> for RegionMap {
    type Error = Error;
    fn try_from(r: RegionMapRepr) -> Result<Self> {
        RegionMap::new(r.dim, r.regions)
    }
}

impl RegionMap {
    /// Validates that the boxes are well formed, pairwise disjoint and cover
    /// the unit cube.
    pub fn new(dim: usize, regions: Vec<Region>) -> Result<Self> {
        check_dim(dim)?;
        if regions.is_empty() {
            return Err(Error::invalid("region map has no regions"));
        }
        for (i, r) in regions.iter().enumerate() {
            if r.lo.len() != dim || r.hi.len() != dim {
                return Err(Error::invalid(format!(
                    "region {i} does not have {dim} corners"
                )));
            }
            if r.lo.iter().zip(&r.hi).any(|(a, b)| a >= b) {
                return Err(Error::invalid(format!("region {i} is empty")));
            }
            r.props.validate()?;
        }
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                if regions[i].overlaps(&regions[j]) {
                    return Err(Error::invalid(format!("regions {i} and {j} overlap")));
                }
            }
        }
        // Disjoint boxes inside the unit cube tile it iff their volumes sum to one.
        let exp_total = dim as u32 * MAX_DYADIC_EXP;
        let mut total: u128 = 0;
        for r in &regions {
            let mut vol: u128 = 1;
            let mut exp = 0;
            for a in 0..dim {
                let (n, e) = r.hi[a].minus(r.lo[a]).expect("hi > lo checked above");
                vol *= n;
                exp += e;
            }
            total += vol << (exp_total - exp);
        }
        if total != 1u128 << exp_total {
            return Err(Error::invalid("regions do not cover the unit domain"));
        }
        Ok(RegionMap { dim, regions })
    }

    pub fn homogeneous(dim: usize, props: MaterialProps) -> Result<Self> {
        RegionMap::new(
            dim,
            vec![Region {
                lo: vec![Dyadic::ZERO; dim],
                hi: vec![Dyadic::ONE; dim],
                props,
            }],
        )
    }

    /// A uniform grid of `blocks^d` boxes; `material` receives the 0-based
    /// block multi-index.
    pub fn from_block_grid(
        dim: usize,
        blocks: usize,
        mut material: impl FnMut(&[usize]) -> MaterialProps,
    ) -> Result<Self> {
        check_dim(dim)?;
        if blocks == 0 || !blocks.is_power_of_two() {
            return Err(Error::invalid(format!(
                "block count {blocks} must be a positive power of two"
            )));
        }
        let exp = blocks.trailing_zeros();
        let mut regions = Vec::with_capacity(blocks.pow(dim as u32));
        for flat in 0..blocks.pow(dim as u32) {
            let idx = unflatten(flat, blocks, dim);
            let lo = idx
                .iter()
                .map(|&i| Dyadic::new(i as u64, exp))
                .collect::<Result<Vec<_>>>()?;
            let hi = idx
                .iter()
                .map(|&i| Dyadic::new(i as u64 + 1, exp))
                .collect::<Result<Vec<_>>>()?;
            regions.push(Region {
                lo,
                hi,
                props: material(&idx),
            });
        }
        RegionMap::new(dim, regions)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Largest diffusion coefficient over all regions.
    pub fn max_diffusion(&self) -> f64 {
        self.regions
            .iter()
            .map(|r| r.props.diffusion)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Material at a point of `[0,1]^d` (boxes are treated as half-open,
    /// closed at the far faces of the domain).
    pub fn material_at(&self, x: &[f64]) -> Result<MaterialProps> {
        if x.len() != self.dim || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange(format!(
                "point {x:?} outside [0,1]^{}",
                self.dim
            )));
        }
        self.regions
            .iter()
            .find(|r| {
                (0..self.dim).all(|a| {
                    let (lo, hi) = (r.lo[a].to_f64(), r.hi[a].to_f64());
                    lo <= x[a] && (x[a] < hi || (hi == 1.0 && x[a] == 1.0))
                })
            })
            .map(|r| r.props)
            .ok_or_else(|| Error::OutOfRange(format!("no region contains {x:?}")))
    }

    /// Material of the cell with 0-based multi-index `cell` on `spec`'s mesh.
    /// Fails when the cell straddles a region boundary.
    pub fn cell_material(&self, spec: &MeshSpec, cell: &[usize]) -> Result<MaterialProps> {
        if spec.dim != self.dim || cell.len() != self.dim {
            return Err(Error::invalid("cell dimension does not match the map"));
        }
        let cells = spec.cells_per_axis();
        if cell.iter().any(|&c| c >= cells) {
            return Err(Error::OutOfRange(format!("cell {cell:?} outside the mesh")));
        }
        let lo = cell
            .iter()
            .map(|&c| Dyadic::new(c as u64, spec.level))
            .collect::<Result<Vec<_>>>()?;
        let hi = cell
            .iter()
            .map(|&c| Dyadic::new(c as u64 + 1, spec.level))
            .collect::<Result<Vec<_>>>()?;
        self.regions
            .iter()
            .find(|r| r.contains_box(&lo, &hi))
            .map(|r| r.props)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "cell {cell:?} at level {} straddles a region boundary",
                    spec.level
                ))
            })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("region maps always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Checkerboard of `blocks^d` squares: blocks with even index sum get
/// `d_high`, odd ones `d_low`.
pub fn build_checkerboard(
    dim: usize,
    blocks: usize,
    d_low: f64,
    d_high: f64,
    absorption: f64,
    nu_fission: f64,
) -> Result<RegionMap> {
    let low = MaterialProps::new(d_low, absorption, nu_fission)?;
    let high = MaterialProps::new(d_high, absorption, nu_fission)?;
    RegionMap::from_block_grid(dim, blocks, |idx| {
        if idx.iter().sum::<usize>() % 2 == 0 {
            high
        } else {
            low
        }
    })
}

/// Finite-element family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    /// Tensor-product multilinear elements on the cube cells.
    Q1,
    /// Linear triangles (2D only), each square cut along its rising diagonal.
    P1,
}

impl FromStr for ElementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" => Ok(ElementKind::Q1),
            "p1" => Ok(ElementKind::P1),
            _ => Err(Error::invalid(format!(
                "unknown element `{s}` (expected q1 or p1)"
            ))),
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Q1 => "q1",
            ElementKind::P1 => "p1",
        })
    }
}

/// Dimension, refinement level and element family of a uniform mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeshSpec {
    pub dim: usize,
    pub level: u32,
    pub element: ElementKind,
}

impl MeshSpec {
    pub fn new(dim: usize, level: u32, element: ElementKind) -> Result<Self> {
        check_dim(dim)?;
        if level == 0 || level > MAX_LEVEL {
            return Err(Error::OutOfRange(format!(
                "level {level} not in 1..={MAX_LEVEL}"
            )));
        }
        if element == ElementKind::P1 && dim != 2 {
            return Err(Error::invalid("P1 elements are only available in 2D"));
        }
        Ok(MeshSpec {
            dim,
            level,
            element,
        })
    }

    pub fn q1(dim: usize, level: u32) -> Result<Self> {
        MeshSpec::new(dim, level, ElementKind::Q1)
    }

    pub fn h(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn cells_per_axis(&self) -> usize {
        1 << self.level
    }

    pub fn nodes_per_axis(&self) -> usize {
        (1 << self.level) - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    /// Number of elements: cubes for Q1, triangles for P1.
    pub fn num_elements(&self) -> usize {
        let cubes = self.cells_per_axis().pow(self.dim as u32);
        match self.element {
            ElementKind::Q1 => cubes,
            ElementKind::P1 => 2 * cubes,
        }
    }

    /// Linear index of the node with 1-based per-axis indices `multi`.
    pub fn node_linear_index(&self, multi: &[usize]) -> Result<usize> {
        let n = self.nodes_per_axis();
        if multi.len() != self.dim {
            return Err(Error::invalid("multi-index has the wrong length"));
        }
        multi.iter().try_fold(0usize, |acc, &i| {
            if i == 0 || i > n {
                Err(Error::OutOfRange(format!(
                    "node index {i} not interior (1..={n})"
                )))
            } else {
                Ok(acc * n + (i - 1))
            }
        })
    }

    /// Inverse of [`MeshSpec::node_linear_index`].
    pub fn node_multi_index(&self, k: usize) -> Result<Vec<usize>> {
        if k >= self.num_nodes() {
            return Err(Error::OutOfRange(format!(
                "node {k} >= {} nodes",
                self.num_nodes()
            )));
        }
        Ok(unflatten(k, self.nodes_per_axis(), self.dim)
            .into_iter()
            .map(|i| i + 1)
            .collect())
    }
}

/// Total number of interior nodes over levels `1..=level`.
pub fn multilevel_size(dim: usize, level: u32) -> usize {
    (1..=level)
        .map(|l| ((1usize << l) - 1).pow(dim as u32))
        .sum()
}

/// Splits `flat` into `dim` digits of base `base`, most significant first.
pub(crate) fn unflatten(mut flat: usize, base: usize, dim: usize) -> Vec<usize> {
    let mut out = vec![0; dim];
    for slot in out.iter_mut().rev() {
        *slot = flat % base;
        flat /= base;
    }
    out
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension {dim} not in 1..=3")))
    }
}
