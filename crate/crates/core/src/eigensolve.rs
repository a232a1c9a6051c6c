//! Leading eigenpairs of the diffusion k-eigenvalue problem.
//!
//! The discrete problem `(L + A) u = λ C u` is handled in two forms:
//!
//! * directly, by subspace inverse iteration with a banded Cholesky factor of
//!   `L + A` ([`smallest_generalized`]), which is what the refinement ladders use;
//! * through the symmetric operator `H = C^{1/2} (L + A)^{-1} C^{1/2}` whose
//!   largest eigenvalue is `k = 1/λ` ([`HamiltonianAction`], [`leading_eig`]).
//!
//! `C` may be singular: nodes whose incident cells are all non-fissile form a
//! zero block, and `H` vanishes there.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, SystemMatrices};
use crate::bpx::{prolongate, BpxPreconditioner, FastInversion};
use crate::dense::{self, dot, norm2};
use crate::error::{Error, Result};
use crate::geometry::{MeshSpec, RegionMap};
use crate::sparse::{BandedCholesky, SparseSymMatrix};

/// Largest fissile block whose square root is formed densely.
pub const DENSE_SQRT_LIMIT: usize = 1500;

/// Iteration cap for the subspace iterations.
pub const MAX_ITERATIONS: usize = 20_000;

/// Relative gap below which the two leading eigenvalues are called degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Overlap probability below which an emulated phase estimate is flagged.
pub const MIN_RELIABLE_OVERLAP: f64 = 1e-3;

const BLOCK: usize = 4;
const PROBE_SEED: u64 = 0x6b65_6666;

/// Indices of the nodes with a positive fission diagonal.
pub fn fissile_nodes(fission: &SparseSymMatrix) -> Vec<usize> {
    fission
        .diagonal()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Square root of the fissile block of `C`.
#[derive(Clone, Debug)]
enum RootKind {
    Dense(DMatrix<f64>),
    /// Chebyshev expansion of `sqrt` on `[lo, hi]` evaluated by Clenshaw.
    Chebyshev {
        block: SparseSymMatrix,
        lo: f64,
        hi: f64,
        coeffs: Vec<f64>,
    },
}

/// The operator `C^{1/2}` restricted to the fissile nodes.
#[derive(Clone, Debug)]
pub struct FissionRoot {
    n: usize,
    fissile: Vec<usize>,
    kind: RootKind,
}

impl FissionRoot {
    /// Dense square root of the fissile block.
    pub fn dense(fission: &SparseSymMatrix) -> Result<Self> {
        let fissile = fissile_nodes(fission);
        let block = fission.principal_submatrix(&fissile).to_dense();
        let kind = RootKind::Dense(dense::sqrt_psd(&block, 1e-10)?);
        Ok(FissionRoot {
            n: fission.n(),
            fissile,
            kind,
        })
    }

    /// Polynomial square root, valid when every eigenvalue of the fissile
    /// block is at least `lower_bound`.
    pub fn chebyshev(fission: &SparseSymMatrix, lower_bound: f64) -> Result<Self> {
        let fissile = fissile_nodes(fission);
        let block = fission.principal_submatrix(&fissile);
        let hi = block.gershgorin_bound();
        if !(lower_bound > 0.0 && lower_bound < hi) {
            return Err(Error::invalid(format!(
                "spectral lower bound {lower_bound:.3e} not in (0, {hi:.3e})"
            )));
        }
        let coeffs = chebyshev_sqrt_coeffs(lower_bound, hi);
        Ok(FissionRoot {
            n: fission.n(),
            fissile,
            kind: RootKind::Chebyshev {
                block,
                lo: lower_bound,
                hi,
                coeffs,
            },
        })
    }

    /// Dense when small, otherwise Chebyshev using `lower_bound`.
    pub fn auto(fission: &SparseSymMatrix, lower_bound: Option<f64>) -> Result<Self> {
        let size = fissile_nodes(fission).len();
        match lower_bound {
            Some(lb) if size > DENSE_SQRT_LIMIT => FissionRoot::chebyshev(fission, lb),
            None if size > DENSE_SQRT_LIMIT => Err(Error::ResourceLimit(format!(
                "fissile block of {size} nodes needs a spectral lower bound for its square root"
            ))),
            _ => FissionRoot::dense(fission),
        }
    }

    pub fn fissile(&self) -> &[usize] {
        &self.fissile
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = self.fissile.iter().map(|&i| v[i]).collect();
        let y = match &self.kind {
            RootKind::Dense(r) => (r * nalgebra::DVector::from_vec(x)).data.into(),
            RootKind::Chebyshev {
                block,
                lo,
                hi,
                coeffs,
            } => clenshaw(block, *lo, *hi, coeffs, &x),
        };
        let mut out = vec![0.0; self.n];
        for (&i, v) in self.fissile.iter().zip(y) {
            out[i] = v;
        }
        out
    }
}

fn chebyshev_sqrt_coeffs(lo: f64, hi: f64) -> Vec<f64> {
    let nodes = 1024;
    let f = |x: f64| (((hi - lo) * x + (hi + lo)) / 2.0).sqrt();
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|j| {
            let th = std::f64::consts::PI * (j as f64 + 0.5) / nodes as f64;
            (th, f(th.cos()))
        })
        .collect();
    let mut coeffs: Vec<f64> = (0..nodes)
        .map(|k| {
            2.0 / nodes as f64
                * samples
                    .iter()
                    .map(|(th, fx)| fx * (k as f64 * th).cos())
                    .sum::<f64>()
        })
        .collect();
    let scale = coeffs[0].abs();
    let keep = coeffs
        .iter()
        .rposition(|c| c.abs() > 1e-17 * scale)
        .map_or(1, |p| p + 1);
    coeffs.truncate(keep);
    coeffs
}

fn clenshaw(block: &SparseSymMatrix, lo: f64, hi: f64, coeffs: &[f64], x: &[f64]) -> Vec<f64> {
    // t(y) = (2 B y - (hi + lo) y) / (hi - lo)
    let t = |y: &[f64]| -> Vec<f64> {
        let by = block.matvec(y);
        by.iter()
            .zip(y)
            .map(|(b, v)| (2.0 * b - (hi + lo) * v) / (hi - lo))
            .collect()
    };
    let n = x.len();
    let mut b1 = vec![0.0; n];
    let mut b2 = vec![0.0; n];
    for &c in coeffs.iter().skip(1).rev() {
        let tb = t(&b1);
        let next: Vec<f64> = (0..n).map(|i| c * x[i] + 2.0 * tb[i] - b2[i]).collect();
        b2 = std::mem::replace(&mut b1, next);
    }
    let tb = t(&b1);
    (0..n)
        .map(|i| 0.5 * coeffs[0] * x[i] + tb[i] - b2[i])
        .collect()
}

/// How `(L + A)^{-1}` is applied inside [`HamiltonianAction`].
#[derive(Clone, Debug)]
pub enum InnerSolver {
    /// Banded Cholesky factor of `L + A`.
    Direct(BandedCholesky),
    /// BPX-preconditioned CG on `L` nested inside CG on `L + A`.
    FastInversion { solver: FastInversion, tol: f64 },
}

impl InnerSolver {
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            InnerSolver::Direct(c) => Ok(c.solve(b)),
            InnerSolver::FastInversion { solver, tol } => solver.solve(b, *tol),
        }
    }
}

/// Matrix-free `H = C^{1/2} (L + A)^{-1} C^{1/2}`.
#[derive(Clone, Debug)]
pub struct HamiltonianAction {
    loss: SparseSymMatrix,
    fission: SparseSymMatrix,
    root: FissionRoot,
    solver: InnerSolver,
    mesh: Option<MeshSpec>,
}

/// Builds `H` from `L`, `A`, `C` with a direct inner solve.
pub fn build_h(
    stiffness: &SparseSymMatrix,
    absorption: &SparseSymMatrix,
    fission: &SparseSymMatrix,
) -> Result<HamiltonianAction> {
    check_sizes(stiffness, absorption, fission)?;
    let loss = stiffness.add_scaled(absorption, 1.0)?;
    let solver = InnerSolver::Direct(BandedCholesky::factor(&loss)?);
    let root = FissionRoot::auto(fission, None)?;
    Ok(HamiltonianAction {
        loss,
        fission: fission.clone(),
        root,
        solver,
        mesh: None,
    })
}

fn check_sizes(l: &SparseSymMatrix, a: &SparseSymMatrix, c: &SparseSymMatrix) -> Result<()> {
    if l.n() != a.n() || l.n() != c.n() {
        return Err(Error::invalid("L, A and C differ in size"));
    }
    if l.n() == 0 {
        return Err(Error::invalid("empty system"));
    }
    Ok(())
}

/// Spectral lower bound for the fissile block of `C` on `spec`'s mesh:
/// smallest positive `νΣ_f` times the smallest cell-mass eigenvalue.
pub fn fission_lower_bound(spec: &MeshSpec, map: &RegionMap) -> Option<f64> {
    let nu_min = map
        .regions()
        .iter()
        .map(|r| r.props.nu_fission)
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let cell_min = match spec.element {
        crate::geometry::ElementKind::Q1 => (spec.h() / 6.0).powi(spec.dim as i32),
        // Triangle mass area/12 [[2,1,1],[1,2,1],[1,1,2]] has smallest eigenvalue area/12.
        crate::geometry::ElementKind::P1 => spec.h() * spec.h() / 24.0,
    };
    nu_min.is_finite().then_some(nu_min * cell_min)
}

impl HamiltonianAction {
    /// Builds `H` for an assembled system. `fast_inversion` selects the BPX
    /// inner solver with the given tolerance; otherwise a banded Cholesky is used.
    pub fn for_system(
        sys: &SystemMatrices,
        map: &RegionMap,
        fast_inversion: Option<f64>,
    ) -> Result<Self> {
        check_sizes(&sys.stiffness, &sys.absorption, &sys.fission)?;
        let loss = sys.loss();
        let solver = match fast_inversion {
            Some(tol) => {
                let pre = BpxPreconditioner::new(sys.spec.dim, sys.spec.level)?;
                InnerSolver::FastInversion {
                    solver: FastInversion::new(
                        sys.stiffness.clone(),
                        &sys.absorption,
                        pre,
                        tol * 1e-2,
                    )?,
                    tol,
                }
            }
            None => InnerSolver::Direct(BandedCholesky::factor(&loss)?),
        };
        let root = FissionRoot::auto(&sys.fission, fission_lower_bound(&sys.spec, map))?;
        Ok(HamiltonianAction {
            loss,
            fission: sys.fission.clone(),
            root,
            solver,
            mesh: Some(sys.spec),
        })
    }

    pub fn n(&self) -> usize {
        self.loss.n()
    }

    pub fn mesh(&self) -> Option<MeshSpec> {
        self.mesh
    }

    pub fn fissile(&self) -> &[usize] {
        self.root.fissile()
    }

    pub fn loss(&self) -> &SparseSymMatrix {
        &self.loss
    }

    pub fn fission(&self) -> &SparseSymMatrix {
        &self.fission
    }

    pub fn fission_root(&self) -> &FissionRoot {
        &self.root
    }

    pub fn solve_loss(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve(b)
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n() {
            return Err(Error::invalid("vector length does not match H"));
        }
        let w = self.root.apply(v);
        let x = self.solver.solve(&w)?;
        Ok(self.root.apply(&x))
    }

    /// Dense matrix of `H`, column by column.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            m.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = 0.0;
        }
        Ok(m)
    }
}

/// A converged leading eigenpair.
#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Smallest generalized eigenvalue `λ` of `(L + A, C)`.
    pub lambda: f64,
    /// `k = 1/λ`, the largest eigenvalue of `H`.
    pub k: f64,
    /// Generalized eigenvector `u`, unit Euclidean norm, nonnegative sum.
    pub u: Vec<f64>,
    /// Eigenvector of `H` (`∝ C^{1/2} u`), when it was computed.
    pub hamiltonian_vector: Option<Vec<f64>>,
    /// `‖(L+A)u - λCu‖ / ‖(L+A)u‖`.
    pub residual: f64,
    pub iterations: usize,
    /// Set when the two leading eigenvalues agree to [`DEGENERACY_GAP`].
    pub degenerate: bool,
    pub mesh: Option<MeshSpec>,
}

fn orient(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    let pivot = if s.abs() > 1e-12 * norm2(v) {
        s
    } else {
        v.iter()
            .copied()
            .fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m })
    };
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn start_block(n: usize, first: &[f64], size: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut block = vec![first.to_vec()];
    for _ in 1..size {
        block.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    block
}

/// Gram-Schmidt in the inner product `ip`; drops vectors that collapse.
fn orthonormalize(vs: Vec<Vec<f64>>, ip: impl Fn(&[f64], &[f64]) -> f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        let before = ip(&v, &v).max(0.0).sqrt();
        for _ in 0..2 {
            for q in &out {
                let c = ip(q, &v);
                dense::axpy(-c, q, &mut v);
            }
        }
        let nrm = ip(&v, &v).max(0.0).sqrt();
        if nrm > 1e-10 * before && nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
            out.push(v);
        }
    }
    out
}

/// Smallest eigenpair of `loss u = λ fission u` by subspace inverse iteration.
pub fn smallest_generalized(
    loss: &SparseSymMatrix,
    fission: &SparseSymMatrix,
    tol: f64,
) -> Result<EigenPair> {
    if loss.n() != fission.n() || loss.n() == 0 {
        return Err(Error::invalid("loss and fission matrices differ in size"));
    }
    if fissile_nodes(fission).is_empty() {
        return Err(Error::invalid("fission matrix is zero"));
    }
    let n = loss.n();
    let chol = BandedCholesky::factor(loss)?;
    let c_ip = |x: &[f64], y: &[f64]| dot(x, &fission.matvec(y));
    let mut basis = start_block(n, &vec![1.0; n], BLOCK.min(n));
    let mut last_res = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let w: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| chol.solve(&fission.matvec(v)))
            .collect();
        let w = orthonormalize(w, c_ip);
        let p = w.len();
        let kw: Vec<Vec<f64>> = w.iter().map(|x| loss.matvec(x)).collect();
        let ks = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&w[i], &kw[j]) + dot(&w[j], &kw[i])));
        let eig = SymmetricEigen::new(ks);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        basis = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (i, wi) in w.iter().enumerate() {
                    dense::axpy(eig.eigenvectors[(i, c)], wi, &mut v);
                }
                v
            })
            .collect();
        let lambda = eig.eigenvalues[order[0]];
        let u = &basis[0];
        let ku = loss.matvec(u);
        let cu = fission.matvec(u);
        let r: Vec<f64> = ku.iter().zip(&cu).map(|(a, b)| a - lambda * b).collect();
        let res = norm2(&r) / norm2(&ku);
        if res <= tol {
            let mut u = u.clone();
            normalize(&mut u);
            orient(&mut u);
            let degenerate = p > 1
                && (eig.eigenvalues[order[1]] - lambda).abs() <= DEGENERACY_GAP * lambda.abs();
            return Ok(EigenPair {
                lambda,
                k: 1.0 / lambda,
                u,
                hamiltonian_vector: None,
                residual: res,
                iterations: it,
                degenerate,
                mesh: None,
            });
        }
        if it > 200 && res >= last_res * (1.0 - 1e-9) && it % 50 == 0 {
            return Err(Error::ConvergenceFailure {
                what: "generalized inverse iteration".into(),
                iterations: it,
                residual: res,
            });
        }
        if it % 50 == 0 {
            last_res = res;
        }
    }
    Err(Error::ConvergenceFailure {
        what: "generalized inverse iteration".into(),
        iterations: MAX_ITERATIONS,
        residual: last_res,
    })
}

/// Leading eigenpair of `H`, started from `v0` (plus a few fixed probe
/// vectors), converged to `‖Hv - kv‖ <= tol * k`.
pub fn leading_eig(h: &HamiltonianAction, v0: &[f64], tol: f64) -> Result<EigenPair> {
    let n = h.n();
    if v0.len() != n {
        return Err(Error::invalid("start vector has the wrong length"));
    }
    if norm2(v0) == 0.0 {
        return Err(Error::invalid("start vector is zero"));
    }
    if h.fissile().is_empty() {
        return Err(Error::invalid("H is the zero operator (no fissile nodes)"));
    }
    let size = BLOCK.min(h.fissile().len());
    let mut basis = orthonormalize(start_block(n, v0, size), dot);
    let mut last_res = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let hv: Vec<Vec<f64>> = basis.iter().map(|v| h.apply(v)).collect::<Result<_>>()?;
        let p = basis.len();
        let t = DMatrix::from_fn(p, p, |i, j| {
            0.5 * (dot(&basis[i], &hv[j]) + dot(&basis[j], &hv[i]))
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let rotate = |vs: &[Vec<f64>]| -> Vec<Vec<f64>> {
            order
                .iter()
                .map(|&c| {
                    let mut v = vec![0.0; n];
                    for (i, x) in vs.iter().enumerate() {
                        dense::axpy(eig.eigenvectors[(i, c)], x, &mut v);
                    }
                    v
                })
                .collect()
        };
        let v = rotate(&basis);
        let w = rotate(&hv);
        let k = eig.eigenvalues[order[0]];
        let r: Vec<f64> = w[0].iter().zip(&v[0]).map(|(a, b)| a - k * b).collect();
        let res = norm2(&r) / k.abs().max(f64::MIN_POSITIVE);
        if res <= tol {
            let mut hv0 = v[0].clone();
            normalize(&mut hv0);
            orient(&mut hv0);
            // u = (L+A)^{-1} C^{1/2} v solves (L+A)u = λ C u.
            let mut u = h.solve_loss(&h.root.apply(&hv0))?;
            normalize(&mut u);
            orient(&mut u);
            let lambda = 1.0 / k;
            let ku = h.loss.matvec(&u);
            let cu = h.fission.matvec(&u);
            let gr: Vec<f64> = ku.iter().zip(&cu).map(|(a, b)| a - lambda * b).collect();
            let degenerate =
                p > 1 && (k - eig.eigenvalues[order[1]]).abs() <= DEGENERACY_GAP * k.abs();
            return Ok(EigenPair {
                lambda,
                k,
                residual: norm2(&gr) / norm2(&ku),
                u,
                hamiltonian_vector: Some(hv0),
                iterations: it,
                degenerate,
                mesh: h.mesh,
            });
        }
        if it % 50 == 0 {
            if it > 200 && res >= last_res * (1.0 - 1e-9) {
                return Err(Error::ConvergenceFailure {
                    what: "subspace iteration on H".into(),
                    iterations: it,
                    residual: res,
                });
            }
            last_res = res;
        }
        basis = orthonormalize(w, dot);
    }
    Err(Error::ConvergenceFailure {
        what: "subspace iteration on H".into(),
        iterations: MAX_ITERATIONS,
        residual: last_res,
    })
}

/// Smallest generalized eigenpair of an assembled system.
pub fn solve_system(sys: &SystemMatrices, tol: f64) -> Result<EigenPair> {
    let mut pair = smallest_generalized(&sys.loss(), &sys.fission, tol)?;
    pair.mesh = Some(sys.spec);
    Ok(pair)
}

/// Seed for the fine problem built from a coarse eigenvector.
#[derive(Clone, Debug)]
pub struct SeedState {
    /// `C_f^{1/2} û`, normalized: the input to phase estimation on `H_f`.
    pub vector: Vec<f64>,
    /// The interpolated coarse eigenvector `û`, normalized.
    pub interpolated: Vec<f64>,
    pub coarse: EigenPair,
    /// Set when coarse and fine levels coincide (no interpolation happened).
    pub same_level: bool,
}

/// Solves the coarse problem, interpolates its eigenvector to the fine mesh
/// and maps it through `C_f^{1/2}`.
pub fn coarse_seed(
    map: &RegionMap,
    coarse_level: u32,
    fine_level: u32,
    tol: f64,
) -> Result<SeedState> {
    if coarse_level > fine_level {
        return Err(Error::invalid(format!(
            "coarse level {coarse_level} is finer than {fine_level}"
        )));
    }
    let dim = map.dim();
    let coarse_spec = MeshSpec::q1(dim, coarse_level)?;
    let fine_spec = MeshSpec::q1(dim, fine_level)?;
    let coarse = solve_system(&assemble(&coarse_spec, map)?, tol)?;
    let mut interpolated = prolongate(dim, coarse_level, fine_level, &coarse.u);
    normalize(&mut interpolated);
    let fine = assemble(&fine_spec, map)?;
    let root = FissionRoot::auto(&fine.fission, fission_lower_bound(&fine_spec, map))?;
    let mut vector = root.apply(&interpolated);
    if normalize(&mut vector) == 0.0 {
        return Err(Error::invalid("seed has no fissile component"));
    }
    Ok(SeedState {
        vector,
        interpolated,
        coarse,
        same_level: coarse_level == fine_level,
    })
}

/// Squared overlap `⟨C^{1/2}a, C^{1/2}b⟩² / (‖C^{1/2}a‖² ‖C^{1/2}b‖²)`,
/// computed without forming the square root.
pub fn fission_overlap(fission: &SparseSymMatrix, a: &[f64], b: &[f64]) -> f64 {
    let ca = fission.matvec(a);
    let ab = dot(&ca, b);
    let aa = dot(&ca, a);
    let bb = dot(&fission.matvec(b), b);
    ab * ab / (aa * bb)
}

/// Outcome of emulated phase estimation.
#[derive(Clone, Debug)]
pub struct QpeOutcome {
    /// `k` rounded to the nearest multiple of the precision.
    pub k_estimate: f64,
    /// The converged `k` the estimate was rounded from.
    pub k_converged: f64,
    /// Squared overlap of the seed with the leading eigenvector of `H`.
    pub success_prob: f64,
    pub reliable: bool,
    pub pair: EigenPair,
}

/// Emulates phase estimation of the leading eigenvalue of `H` to precision
/// `epsilon`: returns the rounded eigenvalue and the probability that the
/// seed collapses onto the leading eigenvector.
pub fn qpe_emulate(h: &HamiltonianAction, seed: &[f64], epsilon: f64) -> Result<QpeOutcome> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!(
            "precision {epsilon} must be positive"
        )));
    }
    if seed.len() != h.n() || norm2(seed) == 0.0 {
        return Err(Error::invalid(
            "seed must be a nonzero vector of the right length",
        ));
    }
    let tol = (epsilon * 1e-2).min(1e-10);
    let pair = leading_eig(h, seed, tol)?;
    let v = pair
        .hamiltonian_vector
        .as_ref()
        .expect("set by leading_eig");
    let ov = dot(seed, v) / norm2(seed);
    let success_prob = ov * ov;
    Ok(QpeOutcome {
        k_estimate: (pair.k / epsilon).round() * epsilon,
        k_converged: pair.k,
        success_prob,
        reliable: success_prob >= MIN_RELIABLE_OVERLAP,
        pair,
    })
}

/// Euclidean norm of `u` on the fissile nodes.
pub fn fission_weight(u: &[f64], fission: &SparseSymMatrix) -> f64 {
    fissile_nodes(fission)
        .iter()
        .map(|&i| u[i] * u[i])
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MaterialProps;

    fn unit(dim: usize) -> RegionMap {
        RegionMap::homogeneous(dim, MaterialProps::new(1.0, 1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn one_node_3d() {
        let sys = assemble(&MeshSpec::q1(3, 1).unwrap(), &unit(3)).unwrap();
        let h = build_h(&sys.stiffness, &sys.absorption, &sys.fission).unwrap();
        let p = leading_eig(&h, &[1.0], 1e-12).unwrap();
        assert!((p.k - 1.0 / 37.0).abs() < 1e-15);
        assert!((p.lambda - 37.0).abs() < 1e-12);
    }

    #[test]
    fn two_forms_agree() {
        let sys = assemble(&MeshSpec::q1(2, 3).unwrap(), &unit(2)).unwrap();
        let direct = solve_system(&sys, 1e-12).unwrap();
        let h = build_h(&sys.stiffness, &sys.absorption, &sys.fission).unwrap();
        let via_h = leading_eig(&h, &vec![1.0; sys.spec.num_nodes()], 1e-12).unwrap();
        assert!((direct.lambda - via_h.lambda).abs() < 1e-9 * direct.lambda);
        let diff = direct
            .u
            .iter()
            .zip(&via_h.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn chebyshev_root_matches_dense() {
        let map = crate::geometry::build_checkerboard(2, 2, 1.0, 3.0, 1.0, 1.0).unwrap();
        let spec = MeshSpec::q1(2, 3).unwrap();
        let sys = assemble(&spec, &map).unwrap();
        let lb = fission_lower_bound(&spec, &map).unwrap();
        let a = FissionRoot::chebyshev(&sys.fission, lb).unwrap();
        let b = FissionRoot::dense(&sys.fission).unwrap();
        let x: Vec<f64> = (0..49).map(|i| (i as f64 * 0.3).cos()).collect();
        let (ya, yb) = (a.apply(&x), b.apply(&x));
        let err = ya
            .iter()
            .zip(&yb)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-13 * norm2(&yb), "{err}");
    }

    #[test]
    fn qpe_rounding() {
        let sys = assemble(&MeshSpec::q1(3, 1).unwrap(), &unit(3)).unwrap();
        let h = build_h(&sys.stiffness, &sys.absorption, &sys.fission).unwrap();
        let out = qpe_emulate(&h, &[1.0], 1e-3).unwrap();
        assert!((out.k_estimate - 0.027).abs() < 1e-15);
        assert!((out.success_prob - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_fission_is_rejected() {
        let sys = assemble(&MeshSpec::q1(1, 2).unwrap(), &unit(1)).unwrap();
        let zero = SparseSymMatrix::zeros(3);
        let h = build_h(&sys.stiffness, &sys.absorption, &zero).unwrap();
        assert!(h.apply(&[1.0, 2.0, 3.0]).unwrap().iter().all(|&x| x == 0.0));
        assert!(leading_eig(&h, &[1.0, 1.0, 1.0], 1e-10).is_err());
    }
}
