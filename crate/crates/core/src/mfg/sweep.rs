use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient, integrate};
use crate::model::{critical_exponents, Regime};

use super::{solve_fixed_point, InitialDensity, MfgProblem, OuterStatus};

/// Growth of `max m` under one halving of `h` that marks a row as concentrating.
pub const CONCENTRATION_GROWTH: f64 = 1.5;
/// Growth of `max m` over its initial value that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Outcome of one run inside a sweep row.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub n: usize,
    pub converged: bool,
    pub status: Option<OuterStatus>,
    pub lambda: f64,
    pub max_m: f64,
    /// `int |grad u|^gamma m`.
    pub energy: f64,
    /// `int m^(alpha+1)`.
    pub mass_power: f64,
    pub outer_iters: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub regime: Regime,
    pub coarse: RunSummary,
    pub fine: Option<RunSummary>,
    /// `max m` on the fine grid over `max m` on the coarse grid.
    pub growth: Option<f64>,
    pub concentrating: bool,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        self.coarse.converged
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub alpha1: f64,
    /// `None` stands for an infinite exponent.
    pub alpha2: Option<f64>,
    pub gamma_conj: f64,
    pub rows: Vec<SweepRow>,
}

fn run_one(p: &MfgProblem, initial: &InitialDensity) -> RunSummary {
    let mut out = RunSummary {
        n: p.grid.n(),
        converged: false,
        status: None,
        lambda: f64::NAN,
        max_m: f64::NAN,
        energy: f64::NAN,
        mass_power: f64::NAN,
        outer_iters: 0,
        error: None,
    };
    let result = initial
        .sample(&p.grid)
        .and_then(|m0| solve_fixed_point(p, Some(&m0)));
    match result {
        Ok(s) => {
            let gamma = p.hamiltonian.gamma();
            let du = gradient(&s.u).norm();
            out.converged = s.converged;
            out.status = Some(s.status);
            out.lambda = s.lambda;
            out.max_m = s.m.max();
            out.energy = integrate(&du.zip_map(&s.m, |g, m| g.powf(gamma) * m));
            out.mass_power = integrate(&s.m.map(|m| m.powf(p.coupling.beta())));
            out.outer_iters = s.outer_iters;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Runs the fixed point for each exponent, optionally repeating on the grid
/// with `h` halved, and flags concentration.
///
/// A row is concentrating when `max m` grows by at least
/// [`CONCENTRATION_GROWTH`] under refinement, or when a run diverges.
pub fn sweep_alpha(
    template: &MfgProblem,
    alphas: &[f64],
    refine: bool,
    initial: &InitialDensity,
) -> Result<SweepReport> {
    if alphas.is_empty() {
        return Err(Error::param("sweep_alphas", "need at least one exponent"));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("sweep_alphas", "exponents must be strictly increasing"));
    }
    let crit = critical_exponents(template.hamiltonian.gamma(), template.grid.dim())?;
    let fine_template = if refine { Some(template.refined()?) } else { None };
    let rows: Vec<Result<SweepRow>> = alphas
        .par_iter()
        .map(|&alpha| {
            let regime = crit.regime(alpha);
            if regime == Regime::Unknown {
                log::warn!("alpha = {alpha} equals the critical exponent {}: UNKNOWN-REGIME", crit.alpha2);
            }
            let coupling = template.coupling.with_alpha(alpha)?;
            let coarse = run_one(&MfgProblem { coupling, ..template.clone() }, initial);
            let fine = fine_template
                .as_ref()
                .map(|f| run_one(&MfgProblem { coupling, ..f.clone() }, initial));
            let diverged = |r: &RunSummary| r.status == Some(OuterStatus::Diverged);
            let growth = fine.as_ref().map(|f| f.max_m / coarse.max_m);
            let concentrating = diverged(&coarse)
                || fine.as_ref().is_some_and(diverged)
                || growth.is_some_and(|g| g >= CONCENTRATION_GROWTH);
            Ok(SweepRow {
                alpha,
                regime,
                coarse,
                fine,
                growth,
                concentrating,
            })
        })
        .collect();
    Ok(SweepReport {
        dim: template.grid.dim(),
        n: template.grid.n(),
        length: template.grid.length(),
        alpha1: crit.alpha1,
        alpha2: crit.alpha2.is_finite().then_some(crit.alpha2),
        gamma_conj: crit.gamma_conj,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}
