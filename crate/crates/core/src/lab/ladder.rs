//! Refinement ladders and order-of-convergence estimates.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;

use crate::assembly::assemble;
use crate::eigensolve::solve_system;
use crate::error::{Error, Result};
use crate::geometry::{ElementKind, MeshSpec, RegionMap};

/// One solved level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rung {
    pub level: u32,
    /// Element count `N`.
    pub elements: usize,
    pub lambda: f64,
}

/// A level that could not be assembled or solved.
#[derive(Clone, Debug, PartialEq)]
pub struct SkippedLevel {
    pub level: u32,
    pub reason: String,
}

/// Eigenvalues on a sequence of uniformly refined meshes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceLadder {
    pub rungs: Vec<Rung>,
    pub skipped: Vec<SkippedLevel>,
    /// Solver tolerance the rungs were finally computed with.
    pub tolerance: f64,
}

impl ConvergenceLadder {
    /// Checks that `N` grows by a constant factor and every `λ` is finite.
    pub fn from_rungs(rungs: Vec<Rung>, tolerance: f64) -> Result<Self> {
        let ladder = ConvergenceLadder {
            rungs,
            skipped: Vec::new(),
            tolerance,
        };
        ladder.ratio()?;
        if let Some(r) = ladder.rungs.iter().find(|r| !r.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "level {} has eigenvalue {}",
                r.level, r.lambda
            )));
        }
        Ok(ladder)
    }

    /// Common ratio between consecutive element counts (`None` below two rungs).
    pub fn ratio(&self) -> Result<Option<f64>> {
        let mut ratio = None;
        for w in self.rungs.windows(2) {
            if w[1].elements <= w[0].elements {
                return Err(Error::invalid(format!(
                    "element counts {} -> {} do not increase",
                    w[0].elements, w[1].elements
                )));
            }
            let r = w[1].elements as f64 / w[0].elements as f64;
            match ratio {
                None => ratio = Some(r),
                Some(r0) if (r - r0).abs() > 1e-12 * r0 => {
                    return Err(Error::invalid(format!(
                        "element ratio changes from {r0} to {r}"
                    )));
                }
                _ => {}
            }
        }
        Ok(ratio)
    }

    /// Smallest `|λ_i - λ_{i+1}|`.
    pub fn min_gap(&self) -> Option<f64> {
        self.rungs
            .windows(2)
            .map(|w| (w[1].lambda - w[0].lambda).abs())
            .min_by(f64::total_cmp)
    }

    /// Order estimates at every complete triple; triples whose differences
    /// vanish or change sign are left out.
    pub fn estimates(&self, d_max: Option<f64>) -> Result<Vec<OrderEstimate>> {
        let p_star = d_max.map(theoretical_order).transpose()?.map(|t| t.p_star);
        let mut out = Vec::new();
        for i in 0..self.rungs.len().saturating_sub(2) {
            match observed_order(self, i) {
                Ok(e) => out.push(OrderEstimate { p_star, ..e }),
                Err(Error::UndefinedEstimate(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

/// What [`run_ladder`] solves.
#[derive(Clone, Debug)]
pub struct LadderPlan {
    pub map: RegionMap,
    pub element: ElementKind,
    pub levels: std::ops::RangeInclusive<u32>,
    /// Relative residual tolerance of each eigensolve.
    pub tolerance: f64,
    /// Size of the worker pool; `0` lets rayon choose.
    pub workers: usize,
}

/// Required ratio between the smallest eigenvalue gap and the solver's
/// eigenvalue accuracy.
pub const GAP_SAFETY: f64 = 100.0;

const MIN_TOLERANCE: f64 = 1e-14;

fn solve_level(map: &RegionMap, element: ElementKind, level: u32, tol: f64) -> Result<Rung> {
    let spec = MeshSpec::new(map.dim(), level, element)?;
    let sys = assemble(&spec, map)?;
    let pair = solve_system(&sys, tol)?;
    Ok(Rung {
        level,
        elements: spec.num_elements(),
        lambda: pair.lambda,
    })
}

/// Assembles and solves every level of the plan concurrently.
///
/// Levels the material map cannot be resolved on are recorded in
/// `skipped`. When the solver tolerance is not [`GAP_SAFETY`] times below
/// the smallest relative gap between consecutive eigenvalues, all levels are
/// solved again with a tighter tolerance.
pub fn run_ladder(plan: &LadderPlan) -> Result<ConvergenceLadder> {
    if plan.tolerance.is_nan() || plan.tolerance <= 0.0 {
        return Err(Error::invalid(format!(
            "tolerance {} must be positive",
            plan.tolerance
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let levels: Vec<u32> = plan.levels.clone().collect();
    let mut tol = plan.tolerance;
    loop {
        let results: Vec<(u32, Result<Rung>)> = pool.install(|| {
            levels
                .par_iter()
                .map(|&l| (l, solve_level(&plan.map, plan.element, l, tol)))
                .collect()
        });
        let mut rungs = Vec::new();
        let mut skipped = Vec::new();
        for (level, r) in results {
            match r {
                Ok(rung) => rungs.push(rung),
                Err(e @ Error::ConvergenceFailure { .. }) => return Err(e),
                Err(e) => skipped.push(SkippedLevel {
                    level,
                    reason: e.to_string(),
                }),
            }
        }
        let mut ladder = ConvergenceLadder::from_rungs(rungs, tol)?;
        ladder.skipped = skipped;
        let scale = ladder
            .rungs
            .iter()
            .map(|r| r.lambda.abs())
            .fold(0.0, f64::max);
        let needed = match ladder.min_gap() {
            Some(gap) if scale > 0.0 => gap / (GAP_SAFETY * scale),
            _ => tol,
        };
        if tol <= needed || tol <= MIN_TOLERANCE {
            return Ok(ladder);
        }
        tol = (needed * 0.1).max(MIN_TOLERANCE);
    }
}

/// Observed exponent from three consecutive rungs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderEstimate {
    pub level: u32,
    pub chi_prime: f64,
    pub p_prime: f64,
    pub triple: (usize, usize, usize),
    pub p_star: Option<f64>,
}

/// `χ' = log((λ_i - λ_{i+1}) / (λ_{i+1} - λ_{i+2})) / log r` at rung `i`,
/// oriented so that `λ_N = λ* + c N^{-χ}` gives `χ' = χ`.
pub fn observed_order(ladder: &ConvergenceLadder, i: usize) -> Result<OrderEstimate> {
    let r = ladder
        .ratio()?
        .ok_or_else(|| Error::UndefinedEstimate("fewer than three rungs".into()))?;
    let [a, b, c] = match ladder.rungs.get(i..i + 3) {
        Some(&[a, b, c]) => [a, b, c],
        _ => {
            return Err(Error::UndefinedEstimate(format!(
                "rungs {i}..{} not present ({} rungs)",
                i + 3,
                ladder.rungs.len()
            )))
        }
    };
    let d1 = a.lambda - b.lambda;
    let d2 = b.lambda - c.lambda;
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return Err(Error::UndefinedEstimate(format!(
            "differences {d1:.3e} and {d2:.3e} at level {}",
            a.level
        )));
    }
    let chi = (d1 / d2).ln() / r.ln();
    Ok(OrderEstimate {
        level: a.level,
        chi_prime: chi,
        p_prime: 1.0 / chi,
        triple: (a.elements, b.elements, c.elements),
        p_star: None,
    })
}

/// Worst-case exponents for a diffusion contrast `D_max` (with `D_min = 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoreticalOrder {
    pub chi_star: f64,
    pub p_star: f64,
}

/// `χ* = (4/π) atan(√(1/D_max))`, `p* = 1/χ*`.
pub fn theoretical_order(d_max: f64) -> Result<TheoreticalOrder> {
    if !d_max.is_finite() || d_max < 1.0 {
        return Err(Error::invalid(format!(
            "D_max = {d_max} must be finite and >= 1 (normalize by D_min first)"
        )));
    }
    let chi_star = (1.0 / d_max).sqrt().atan() / FRAC_PI_4;
    Ok(TheoreticalOrder {
        chi_star,
        p_star: 1.0 / chi_star,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::UndefinedEstimate(
            "need two points for a slope".into(),
        ));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::UndefinedEstimate(
            "log-log fit needs positive data".into(),
        ));
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    if sxx == 0.0 {
        return Err(Error::UndefinedEstimate("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}
