//! Assembly of the stiffness (`L`), absorption (`A`) and fission (`C`)
//! matrices with homogeneous Dirichlet conditions.
//!
//! Q1 cell matrices are tensor products of the 1D element matrices
//! `h/6 [[2,1],[1,2]]` (mass) and `1/h [[1,-1],[-1,1]]` (stiffness), kept as
//! exact integer patterns times a power of `h`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{unflatten, ElementKind, MeshSpec, RegionMap};
use crate::sparse::SparseSymMatrix;

/// 1D mass matrix `h/6 tridiag(1,4,1)` on the interior nodes of `level`.
pub fn mass_1d(level: u32) -> SparseSymMatrix {
    let n = (1usize << level) - 1;
    let h = (-(level as f64)).exp2();
    SparseSymMatrix::tridiagonal(n, 4.0 * h / 6.0, h / 6.0)
}

/// 1D stiffness matrix `1/h tridiag(-1,2,-1)`.
pub fn stiffness_1d(level: u32) -> SparseSymMatrix {
    let n = (1usize << level) - 1;
    let inv_h = (level as f64).exp2();
    SparseSymMatrix::tridiagonal(n, 2.0 * inv_h, -inv_h)
}

/// `M ⊗ ... ⊗ M` (`dim` factors).
pub fn tensor_mass(dim: usize, level: u32) -> SparseSymMatrix {
    let m = mass_1d(level);
    (1..dim).fold(m.clone(), |acc, _| acc.kron(&m))
}

/// `Σ_a M ⊗ .. ⊗ P (slot a) ⊗ .. ⊗ M`: the unit-coefficient Laplacian.
pub fn tensor_stiffness(dim: usize, level: u32) -> SparseSymMatrix {
    let m = mass_1d(level);
    let p = stiffness_1d(level);
    let n = m.n().pow(dim as u32);
    (0..dim).fold(SparseSymMatrix::zeros(n), |acc, slot| {
        let term = (1..dim).fold(if slot == 0 { p.clone() } else { m.clone() }, |t, a| {
            t.kron(if a == slot { &p } else { &m })
        });
        acc.add_scaled(&term, 1.0).expect("equal sizes")
    })
}

fn kron_int(a: &[i64], an: usize, b: &[i64], bn: usize) -> Vec<i64> {
    let n = an * bn;
    let mut out = vec![0; n * n];
    for i in 0..an {
        for j in 0..an {
            for k in 0..bn {
                for l in 0..bn {
                    out[(i * bn + k) * n + (j * bn + l)] = a[i * an + j] * b[k * bn + l];
                }
            }
        }
    }
    out
}

/// Integer pattern of the Q1 cell mass matrix; the matrix is `pattern * h^d / 6^d`.
pub fn cell_mass_pattern(dim: usize) -> Vec<i64> {
    let m1 = [2, 1, 1, 2];
    (1..dim).fold(m1.to_vec(), |acc, a| kron_int(&acc, 1 << a, &m1, 2))
}

/// Integer pattern of the Q1 cell stiffness matrix; the matrix is
/// `pattern * h^(d-2) / 6^(d-1)`.
pub fn cell_stiffness_pattern(dim: usize) -> Vec<i64> {
    let m1 = [2, 1, 1, 2];
    let k1 = [1, -1, -1, 1];
    let n = 1 << dim;
    let mut out = vec![0; n * n];
    for slot in 0..dim {
        let first: &[i64] = if slot == 0 { &k1 } else { &m1 };
        let term = (1..dim).fold(first.to_vec(), |acc, a| {
            kron_int(&acc, 1 << a, if a == slot { &k1 } else { &m1 }, 2)
        });
        out.iter_mut().zip(term).for_each(|(o, t)| *o += t);
    }
    out
}

/// Q1 cell mass matrix for cell width `h`.
pub fn cell_mass_matrix(dim: usize, h: f64) -> DMatrix<f64> {
    let n = 1 << dim;
    let s = h.powi(dim as i32) / 6f64.powi(dim as i32);
    DMatrix::from_row_iterator(
        n,
        n,
        cell_mass_pattern(dim).into_iter().map(|v| v as f64 * s),
    )
}

/// Q1 cell stiffness matrix for cell width `h` and unit diffusion.
pub fn cell_stiffness_matrix(dim: usize, h: f64) -> DMatrix<f64> {
    let n = 1 << dim;
    let s = h.powi(dim as i32 - 2) / 6f64.powi(dim as i32 - 1);
    DMatrix::from_row_iterator(
        n,
        n,
        cell_stiffness_pattern(dim)
            .into_iter()
            .map(|v| v as f64 * s),
    )
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    (e.min(), e.max())
}

/// The three assembled operators of one mesh.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    pub spec: MeshSpec,
    /// Diffusion stiffness `L`.
    pub stiffness: SparseSymMatrix,
    /// Absorption mass `A`.
    pub absorption: SparseSymMatrix,
    /// Fission mass `C`.
    pub fission: SparseSymMatrix,
}

impl SystemMatrices {
    /// `L + A`.
    pub fn loss(&self) -> SparseSymMatrix {
        self.stiffness
            .add_scaled(&self.absorption, 1.0)
            .expect("equal sizes")
    }
}

type Triplets = Vec<(usize, usize, f64)>;

/// Assembles `L`, `A`, `C` for `spec` with materials from `map`.
pub fn assemble(spec: &MeshSpec, map: &RegionMap) -> Result<SystemMatrices> {
    if spec.dim != map.dim() {
        return Err(Error::invalid(format!(
            "mesh is {}D but the region map is {}D",
            spec.dim,
            map.dim()
        )));
    }
    let per_cell = match spec.element {
        ElementKind::Q1 => q1_contributions(spec, map)?,
        ElementKind::P1 => p1_contributions(spec, map)?,
    };
    let n = spec.num_nodes();
    let (mut tl, mut ta, mut tc) = (Vec::new(), Vec::new(), Vec::new());
    for (l, a, c) in per_cell {
        tl.extend(l);
        ta.extend(a);
        tc.extend(c);
    }
    Ok(SystemMatrices {
        spec: *spec,
        stiffness: SparseSymMatrix::from_triplets(n, tl)?,
        absorption: SparseSymMatrix::from_triplets(n, ta)?,
        fission: SparseSymMatrix::from_triplets(n, tc)?,
    })
}

fn q1_contributions(
    spec: &MeshSpec,
    map: &RegionMap,
) -> Result<Vec<(Triplets, Triplets, Triplets)>> {
    let d = spec.dim;
    let nloc = 1usize << d;
    let h = spec.h();
    let mass = cell_mass_matrix(d, h);
    let stiff = cell_stiffness_matrix(d, h);
    let cells = spec.cells_per_axis();
    let n_axis = spec.nodes_per_axis();
    (0..cells.pow(d as u32))
        .into_par_iter()
        .map(|flat| {
            let cell = unflatten(flat, cells, d);
            let props = map.cell_material(spec, &cell)?;
            // Global index of each local corner, None on the boundary.
            let nodes: Vec<Option<usize>> = (0..nloc)
                .map(|corner| {
                    let bits = unflatten(corner, 2, d);
                    cell.iter().zip(bits).try_fold(0usize, |acc, (&c, b)| {
                        let i = c + b;
                        (1..=n_axis).contains(&i).then(|| acc * n_axis + (i - 1))
                    })
                })
                .collect();
            let (mut l, mut a, mut c) = (Vec::new(), Vec::new(), Vec::new());
            for (p, gp) in nodes.iter().enumerate() {
                let Some(gp) = *gp else { continue };
                for (q, gq) in nodes.iter().enumerate() {
                    let Some(gq) = *gq else { continue };
                    l.push((gp, gq, props.diffusion * stiff[(p, q)]));
                    a.push((gp, gq, props.absorption * mass[(p, q)]));
                    c.push((gp, gq, props.nu_fission * mass[(p, q)]));
                }
            }
            Ok((l, a, c))
        })
        .collect()
}

/// Vertex offsets (axis 0, axis 1) of the two triangles in each square.
const P1_TRIANGLES: [[(usize, usize); 3]; 2] = [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]];

fn p1_contributions(
    spec: &MeshSpec,
    map: &RegionMap,
) -> Result<Vec<(Triplets, Triplets, Triplets)>> {
    let h = spec.h();
    let cells = spec.cells_per_axis();
    let n_axis = spec.nodes_per_axis();
    let area = h * h / 2.0;
    (0..cells * cells)
        .into_par_iter()
        .map(|flat| {
            let (c0, c1) = (flat / cells, flat % cells);
            let props = map.cell_material(spec, &[c0, c1])?;
            let (mut l, mut a, mut c) = (Vec::new(), Vec::new(), Vec::new());
            for tri in P1_TRIANGLES {
                let pts: Vec<(f64, f64)> = tri
                    .iter()
                    .map(|&(x, y)| (x as f64 * h, y as f64 * h))
                    .collect();
                // Gradient of the hat at vertex i is the rotated opposite edge / (2 area).
                let grads: Vec<(f64, f64)> = (0..3)
                    .map(|i| {
                        let (p, q) = (pts[(i + 1) % 3], pts[(i + 2) % 3]);
                        let (ex, ey) = (q.0 - p.0, q.1 - p.1);
                        let (ox, oy) = (pts[i].0 - p.0, pts[i].1 - p.1);
                        let (gx, gy) = (-ey, ex);
                        let s = if gx * ox + gy * oy > 0.0 { 1.0 } else { -1.0 };
                        (s * gx / (2.0 * area), s * gy / (2.0 * area))
                    })
                    .collect();
                let nodes: Vec<Option<usize>> = tri
                    .iter()
                    .map(|&(x, y)| {
                        let (i, j) = (c0 + x, c1 + y);
                        ((1..=n_axis).contains(&i) && (1..=n_axis).contains(&j))
                            .then(|| (i - 1) * n_axis + (j - 1))
                    })
                    .collect();
                for p in 0..3 {
                    let Some(gp) = nodes[p] else { continue };
                    for q in 0..3 {
                        let Some(gq) = nodes[q] else { continue };
                        let k = area * (grads[p].0 * grads[q].0 + grads[p].1 * grads[q].1);
                        let m = area / 12.0 * if p == q { 2.0 } else { 1.0 };
                        l.push((gp, gq, props.diffusion * k));
                        a.push((gp, gq, props.absorption * m));
                        c.push((gp, gq, props.nu_fission * m));
                    }
                }
            }
            Ok((l, a, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MaterialProps;

    fn unit_map(dim: usize) -> RegionMap {
        RegionMap::homogeneous(dim, MaterialProps::new(1.0, 1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn one_node_3d() {
        let s = MeshSpec::q1(3, 1).unwrap();
        let sys = assemble(&s, &unit_map(3)).unwrap();
        assert!((sys.stiffness.get(0, 0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((sys.absorption.get(0, 0) - 1.0 / 27.0).abs() < 1e-15);
        assert!((sys.fission.get(0, 0) - 1.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn cell_mass_first_row() {
        assert_eq!(&cell_mass_pattern(3)[..8], &[8, 4, 4, 2, 4, 2, 2, 1]);
        let (lo, hi) = eigen_extremes(&cell_mass_matrix(3, 0.5));
        let h3 = 0.125;
        assert!((lo - h3 / 216.0).abs() < 1e-15);
        assert!((hi - 27.0 * h3 / 216.0).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_matches_tensor_form() {
        for dim in 1..=3 {
            for level in 1..=3 {
                let s = MeshSpec::q1(dim, level).unwrap();
                let sys = assemble(&s, &unit_map(dim)).unwrap();
                let dl =
                    (sys.stiffness.to_dense() - tensor_stiffness(dim, level).to_dense()).amax();
                let dm = (sys.absorption.to_dense() - tensor_mass(dim, level).to_dense()).amax();
                assert!(
                    dl < 1e-12 && dm < 1e-14,
                    "dim {dim} level {level}: {dl} {dm}"
                );
            }
        }
    }

    #[test]
    fn p1_row_sums() {
        let s = MeshSpec::new(2, 3, ElementKind::P1).unwrap();
        let sys = assemble(&s, &unit_map(2)).unwrap();
        let h = s.h();
        // Node (3,3) has no boundary neighbours.
        let k = s.node_linear_index(&[3, 3]).unwrap();
        let row: f64 = sys.absorption.row(k).map(|(_, v)| v).sum();
        assert!((row - h * h).abs() < 1e-15);
        let lrow: f64 = sys.stiffness.row(k).map(|(_, v)| v).sum();
        assert!(lrow.abs() < 1e-12);
        assert!(sys.stiffness.symmetry_defect() < 1e-14);
    }
}
