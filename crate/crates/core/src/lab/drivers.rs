//! The work behind each `keff-lab` subcommand. Every driver returns the text
//! to print; files go under `out` when one is given.

use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use super::config::{LabConfig, MaterialSpec};
use super::ladder::{run_ladder, theoretical_order, LadderPlan};
use super::report::{
    emit_plot, error_plot, exponent_plot, export_estimates_csv, export_ladder_csv,
    import_ladder_csv, CHI_ORIENTATION,
};
use super::stateprep::{stateprep_amplitudes, SplitOrder};
use crate::assembly::assemble;
use crate::blockenc::{
    combine_pq, hamiltonian_chain_emulate, interp_target, lcu_assemble_fhat, oracle_p_interp,
    oracle_q_interp,
};
use crate::bpx::{bpx_build, bpx_pcg_solve, precond_operator, verify_flft, BpxPreconditioner};
use crate::dense::{norm2, spectral_norm};
use crate::eigensolve::{
    build_h, coarse_seed, fission_overlap, qpe_emulate, solve_system, HamiltonianAction,
};
use crate::error::{Error, Result};
use crate::geometry::{ElementKind, MeshSpec, RegionMap};

/// Command-line overrides on top of an optional config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: Option<LabConfig>,
    pub levels: Option<RangeInclusive<u32>>,
    pub d_max: Option<f64>,
    pub element: Option<ElementKind>,
    pub tolerance: Option<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed_level: Option<u32>,
    pub epsilon: Option<f64>,
}

/// Tolerance used by the verification subcommands.
pub const FLFT_TOL: f64 = 1e-9;
pub const CHAIN_TOL: f64 = 1e-7;
pub const STATEPREP_TOL: f64 = 1e-12;

impl RunOptions {
    fn dim(&self) -> usize {
        self.config.as_ref().map_or(2, |c| c.dim)
    }

    /// Material from the config, with `--dmax` replacing the high diffusion
    /// of a checkerboard. Without a config: unit homogeneous, or a 4×4
    /// checkerboard when `--dmax` is given.
    pub fn material(&self) -> Result<MaterialSpec> {
        let base = self.config.as_ref().map(|c| c.material.clone());
        match (base, self.d_max) {
            (
                Some(MaterialSpec::Checkerboard {
                    blocks,
                    d_low,
                    absorption,
                    nu_fission,
                    ..
                }),
                Some(d),
            ) => Ok(MaterialSpec::Checkerboard {
                blocks,
                d_low,
                d_high: d * d_low,
                absorption,
                nu_fission,
            }),
            (Some(_), Some(_)) => Err(Error::Config(
                "--dmax only applies to checkerboard materials".into(),
            )),
            (Some(m), None) => Ok(m),
            (None, Some(d)) => Ok(MaterialSpec::Checkerboard {
                blocks: 4,
                d_low: 1.0,
                d_high: d,
                absorption: 1.0,
                nu_fission: 1.0,
            }),
            (None, None) => Ok(MaterialSpec::Homogeneous {
                diffusion: 1.0,
                absorption: 1.0,
                nu_fission: 1.0,
            }),
        }
    }

    pub fn region_map(&self) -> Result<RegionMap> {
        self.material()?
            .region_map(self.dim())
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn levels(&self, default: RangeInclusive<u32>) -> RangeInclusive<u32> {
        self.levels
            .clone()
            .or_else(|| {
                self.config
                    .as_ref()
                    .and_then(|c| c.levels)
                    .map(|[a, b]| a..=b)
            })
            .unwrap_or(default)
    }

    /// Finest level of the range, for subcommands that work at one level.
    fn level(&self, default: u32) -> Result<u32> {
        let r = self.levels(default..=default);
        if r.is_empty() {
            return Err(Error::Config(format!("level range {r:?} is empty")));
        }
        Ok(*r.end())
    }

    pub fn element(&self) -> ElementKind {
        self.element
            .or_else(|| self.config.as_ref().map(|c| c.element))
            .unwrap_or(ElementKind::Q1)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
            .or_else(|| self.config.as_ref().map(|c| c.tolerance))
            .unwrap_or(1e-9)
    }

    fn workers(&self) -> usize {
        self.workers
            .or_else(|| self.config.as_ref().and_then(|c| c.workers))
            .unwrap_or(0)
    }

    fn seed_level(&self) -> u32 {
        self.seed_level
            .or_else(|| self.config.as_ref().and_then(|c| c.seed_level))
            .unwrap_or(2)
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
            .or_else(|| self.config.as_ref().and_then(|c| c.epsilon))
            .unwrap_or(1e-4)
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        match &self.out {
            Some(p) => {
                fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
                Ok(Some(p.as_path()))
            }
            None => Ok(None),
        }
    }
}

/// Writes the three system matrices as triplet files.
pub fn run_assemble(opts: &RunOptions) -> Result<String> {
    let map = opts.region_map()?;
    let spec = MeshSpec::new(map.dim(), opts.level(3)?, opts.element())?;
    let sys = assemble(&spec, &map)?;
    let mut text = format!(
        "dim={} level={} element={} nodes={} elements={}\n",
        spec.dim,
        spec.level,
        spec.element,
        spec.num_nodes(),
        spec.num_elements()
    );
    for (name, m) in [
        ("stiffness", &sys.stiffness),
        ("absorption", &sys.absorption),
        ("fission", &sys.fission),
    ] {
        let _ = write!(
            text,
            "{name}: n={} nnz={} symmetry={:.1e}",
            m.n(),
            m.nnz(),
            m.symmetry_defect()
        );
        if let Some(dir) = opts.out_dir()? {
            let path = dir.join(format!("{name}.txt"));
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            m.write_triplets(std::io::BufWriter::new(file))
                .map_err(|e| Error::io(&path, e))?;
            let _ = write!(text, " -> {}", path.display());
        }
        text.push('\n');
    }
    Ok(text)
}

/// One eigensolve at the finest requested level.
pub fn run_eig(opts: &RunOptions) -> Result<String> {
    let map = opts.region_map()?;
    let spec = MeshSpec::new(map.dim(), opts.level(4)?, opts.element())?;
    let pair = solve_system(&assemble(&spec, &map)?, opts.tolerance())?;
    let mut text = format!(
        "level={} N={} lambda={} k={} residual={:.3e} iterations={}{}\n",
        spec.level,
        spec.num_elements(),
        pair.lambda,
        pair.k,
        pair.residual,
        pair.iterations,
        if pair.degenerate { " degenerate" } else { "" }
    );
    if let Some(dir) = opts.out_dir()? {
        let path = dir.join("eigenvector.txt");
        let body: String = pair.u.iter().map(|x| format!("{x}\n")).collect();
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        let _ = writeln!(text, "eigenvector -> {}", path.display());
    }
    Ok(text)
}

/// Refinement ladder plus order estimates, CSV tables and plots.
pub fn run_ladder_cmd(opts: &RunOptions) -> Result<String> {
    let material = opts.material()?;
    let plan = LadderPlan {
        map: opts.region_map()?,
        element: opts.element(),
        levels: opts.levels(1..=5),
        tolerance: opts.tolerance(),
        workers: opts.workers(),
    };
    let ladder = run_ladder(&plan)?;
    let contrast = material.contrast();
    let p_star = theoretical_order(contrast)?.p_star;
    let estimates = ladder.estimates(Some(contrast))?;
    let mut text = format!(
        "# tolerance={:.1e} D_max/D_min={contrast}\nlevel,N,lambda\n",
        ladder.tolerance
    );
    for r in &ladder.rungs {
        let _ = writeln!(text, "{},{},{}", r.level, r.elements, r.lambda);
    }
    for s in &ladder.skipped {
        let _ = writeln!(text, "# skipped level {}: {}", s.level, s.reason);
    }
    let _ = writeln!(text, "# {CHI_ORIENTATION}\nlevel,chi_prime,p_prime,p_star");
    for e in &estimates {
        let _ = writeln!(text, "{},{},{},{p_star}", e.level, e.chi_prime, e.p_prime);
    }
    if let Some(dir) = opts.out_dir()? {
        export_ladder_csv(&ladder, &dir.join("ladder.csv"))?;
        export_estimates_csv(&estimates, &dir.join("estimates.csv"))?;
        if !estimates.is_empty() {
            emit_plot(&exponent_plot(&estimates), &dir.join("exponent.svg"))?;
        }
        if let MaterialSpec::Homogeneous {
            diffusion,
            absorption,
            nu_fission,
        } = material
        {
            let exact = (diffusion * plan.map.dim() as f64 * std::f64::consts::PI.powi(2)
                + absorption)
                / nu_fission;
            if ladder.rungs.len() >= 2 {
                let plot = error_plot(&ladder, exact);
                if let Some(slope) = plot.fitted_slope()? {
                    let _ = writeln!(text, "# log-log error slope {slope:.4}");
                }
                emit_plot(&plot, &dir.join("error.svg"))?;
            }
        }
        let _ = writeln!(text, "# wrote {}", dir.display());
    }
    Ok(text)
}

/// Order estimates from a ladder CSV.
pub fn run_order(opts: &RunOptions, input: &Path) -> Result<String> {
    let ladder = import_ladder_csv(input)?;
    let d_max = opts
        .d_max
        .or_else(|| opts.config.as_ref().map(|c| c.material.contrast()));
    let estimates = ladder.estimates(d_max)?;
    let mut text = format!("# {CHI_ORIENTATION}\nlevel,chi_prime,p_prime,p_star\n");
    for e in &estimates {
        let star = e.p_star.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(text, "{},{},{},{star}", e.level, e.chi_prime, e.p_prime);
    }
    if let Some(out) = &opts.out {
        export_estimates_csv(&estimates, out)?;
        if !estimates.is_empty() {
            emit_plot(&exponent_plot(&estimates), &out.with_extension("svg"))?;
        }
    }
    Ok(text)
}

fn defect(name: impl Into<String>, defect: f64, tolerance: f64) -> Result<()> {
    if defect <= tolerance {
        Ok(())
    } else {
        Err(Error::EncodingDefect {
            name: name.into(),
            defect,
            tolerance,
        })
    }
}

/// FLFT identity, frame norm bound, effective conditioning and PCG
/// iteration counts for every level in the range.
pub fn run_bpx_verify(opts: &RunOptions) -> Result<String> {
    let map = opts.region_map()?;
    let dim = map.dim();
    let mut text = String::new();
    let mut first_failure = None;
    for level in opts.levels(2..=3) {
        let spec = MeshSpec::q1(dim, level)?;
        let sys = assemble(&spec, &map)?;
        let bpx = bpx_build(dim, level)?;
        let residual = verify_flft(&bpx, &sys.stiffness)?;
        let norm = spectral_norm(&bpx.frame);
        let bound = 2.0 * (0.5 * (dim as f64) * level as f64).exp2();
        let eig = precond_operator(&bpx, &sys.stiffness)?
            .to_dense()
            .symmetric_eigenvalues();
        let top = eig.amax();
        let bottom = eig
            .iter()
            .filter(|x| x.abs() > 1e-10 * top)
            .fold(f64::INFINITY, |m, x| m.min(x.abs()));
        let rhs = vec![1.0; spec.num_nodes()];
        let pcg = bpx_pcg_solve(
            &sys.stiffness,
            &BpxPreconditioner::new(dim, level)?,
            &rhs,
            1e-10,
        )?;
        let _ = writeln!(
            text,
            "dim={dim} level={level} flft={residual:.3e} |F|={norm:.4} bound={bound:.4} cond_eff={:.3} pcg_iterations={}",
            top / bottom,
            pcg.iterations
        );
        let check = defect(format!("FLFT d={dim} L={level}"), residual, FLFT_TOL)
            .and_then(|_| defect(format!("|F| bound d={dim} L={level}"), norm - bound, 0.0));
        if let Err(e) = check {
            first_failure.get_or_insert(e);
        }
    }
    match first_failure {
        Some(e) => Err(e),
        None => Ok(text),
    }
}

/// Interpolation encodings, the `F̂` LCU and the factor chain.
pub fn run_blockenc_verify(opts: &RunOptions) -> Result<String> {
    let mut text = String::new();
    for l in 1..=2 {
        let p = oracle_p_interp(l, l)?;
        let q = oracle_q_interp(l, l)?;
        let enc = combine_pq(&p, &q, &interp_target(l, l)?)?;
        let _ = writeln!(text, "{}", enc.report());
    }
    for level in 2..=3 {
        let enc = lcu_assemble_fhat(1, level)?;
        let _ = writeln!(text, "{}", enc.report());
    }
    let map = opts.region_map()?;
    let dim = map.dim();
    if dim > 2 {
        return Err(Error::Config(
            "the chain check runs in 1D and 2D only".into(),
        ));
    }
    for level in opts.levels(2..=3) {
        let sys = assemble(&MeshSpec::q1(dim, level)?, &map)?;
        let bpx = bpx_build(dim, level)?;
        let (chain, ledger) =
            hamiltonian_chain_emulate(&sys.stiffness, &sys.absorption, &sys.fission, &bpx)?;
        let direct = build_h(&sys.stiffness, &sys.absorption, &sys.fission)?.to_dense()?;
        let gap = spectral_norm(&(chain - direct));
        let _ = writeln!(
            text,
            "chain dim={dim} level={level} |H_chain - H|={gap:.3e}\n{ledger}"
        );
        defect(format!("chain d={dim} L={level}"), gap, CHAIN_TOL)?;
    }
    Ok(text)
}

/// Coarse seed, hierarchical amplitude preparation and emulated phase
/// estimation at the finest level.
pub fn run_stateprep(opts: &RunOptions) -> Result<String> {
    let map = opts.region_map()?;
    let dim = map.dim();
    let fine = opts.level(4)?;
    let coarse = opts.seed_level();
    let tol = opts.tolerance().min(1e-10);
    let seed = coarse_seed(&map, coarse, fine, tol)?;
    let mut text = String::new();
    let mut worst: f64 = 0.0;
    for order in [SplitOrder::LeftFirst, SplitOrder::RightFirst] {
        let amps = stateprep_amplitudes(&seed.coarse.u, dim, coarse, fine, order)?;
        let gap = amps
            .iter()
            .zip(&seed.interpolated)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(gap);
        let _ = writeln!(
            text,
            "stateprep order={order:?} norm={:.15} max_diff={gap:.3e}",
            norm2(&amps)
        );
    }
    defect("stateprep vs interpolation", worst, STATEPREP_TOL)?;
    let sys = assemble(&MeshSpec::q1(dim, fine)?, &map)?;
    let h = HamiltonianAction::for_system(&sys, &map, None)?;
    let epsilon = opts.epsilon();
    let qpe = qpe_emulate(&h, &seed.vector, epsilon)?;
    let fine_pair = qpe.pair.u.clone();
    let overlap = fission_overlap(&sys.fission, &seed.interpolated, &fine_pair).sqrt();
    let _ = writeln!(
        text,
        "seed coarse={coarse} fine={fine} overlap={overlap:.6} k_est={:.*} k={} success_prob={:.6}{}",
        (-epsilon.log10()).ceil().max(0.0) as usize,
        qpe.k_estimate,
        qpe.k_converged,
        qpe.success_prob,
        if qpe.reliable { "" } else { " (unreliable)" }
    );
    Ok(text)
}
