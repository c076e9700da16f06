//! Energy bounds along families of solutions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, lp_norm};
use crate::mfg::MfgSolution;
use crate::model::{Coupling, Hamiltonian};

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    /// `int |grad u|^gamma m`.
    pub energy: f64,
    /// `int |A|^gamma' m` with `A = -grad H(grad u)`.
    pub drift_energy: f64,
    /// `int m^(alpha+1)`.
    pub mass_power: f64,
    pub lambda: f64,
    /// `(beta, ||m||_beta)` pairs.
    pub lbeta_norms: Vec<(f64, f64)>,
}

impl EnergyReport {
    pub fn lbeta(&self, beta: f64) -> Option<f64> {
        self.lbeta_norms.iter().find(|(b, _)| *b == beta).map(|(_, v)| *v)
    }
}

/// Quadratures of the energy-type quantities of a solution. `alpha + 1` is
/// always among the reported `L^beta` exponents.
pub fn energy_report(
    s: &MfgSolution,
    coupling: &Coupling,
    hamiltonian: &Hamiltonian,
    betas: &[f64],
) -> Result<EnergyReport> {
    let gamma = hamiltonian.gamma();
    let gc = hamiltonian.gamma_conj();
    let du = gradient(&s.u);
    let energy = integrate(&du.norm().zip_map(&s.m, |g, m| g.powf(gamma) * m));
    let a = hamiltonian.drift_field(&du).norm();
    let drift_energy = integrate(&a.zip_map(&s.m, |g, m| g.powf(gc) * m));
    let beta0 = coupling.beta();
    let mass_power = integrate(&s.m.map(|m| m.powf(beta0)));
    let mut exps = vec![beta0];
    exps.extend(betas.iter().copied().filter(|b| *b != beta0));
    let lbeta_norms = exps
        .into_iter()
        .map(|b| lp_norm(&s.m, b).map(|v| (b, v)))
        .collect::<Result<_>>()?;
    Ok(EnergyReport {
        energy,
        drift_energy,
        mass_power,
        lambda: s.lambda,
        lbeta_norms,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityAudit {
    pub beta: f64,
    /// Fitted exponent in `||m||_beta^delta <= C (E + 1)`.
    pub delta_fit: f64,
    /// Smallest `C` that works for every member of the suite at `delta_fit`.
    pub c_fit: f64,
    pub pass: bool,
    /// `(E, ||m||_beta)` per member.
    pub points: Vec<(f64, f64)>,
}

/// Largest admissible `beta` (exclusive), infinite when `gamma' >= dim`.
pub fn beta_limit(hamiltonian: &Hamiltonian, dim: usize) -> f64 {
    let gc = hamiltonian.gamma_conj();
    let n = dim as f64;
    if gc < n {
        1.0 + gc / (n - gc)
    } else {
        f64::INFINITY
    }
}

/// Fits `delta` in `||m||_beta^delta <= C (int |grad u|^gamma m + 1)` by
/// least squares on `log ||m||_beta` against `log(E + 1)`, `delta = 1 / slope`.
///
/// A suite with no spread in `E`, or with a nonpositive slope, gets
/// `delta = inf`; the constant then follows from `x^inf` conventions.
pub fn audit_energy_inequality(
    suite: &[MfgSolution],
    hamiltonian: &Hamiltonian,
    beta: f64,
) -> Result<InequalityAudit> {
    let first = suite
        .first()
        .ok_or_else(|| Error::param("suite", "need at least one solution"))?;
    let dim = first.grid().dim();
    let limit = beta_limit(hamiltonian, dim);
    if !(beta > 1.0 && beta < limit) {
        return Err(Error::param(
            "beta",
            format!("need 1 < beta < 1 + gamma'/(N - gamma') = {limit} (gamma' = {}, N = {dim}), got {beta}", hamiltonian.gamma_conj()),
        ));
    }
    let gamma = hamiltonian.gamma();
    let points: Vec<(f64, f64)> = suite
        .iter()
        .map(|s| {
            let du = gradient(&s.u).norm();
            let e = integrate(&du.zip_map(&s.m, |g, m| g.powf(gamma) * m));
            lp_norm(&s.m, beta).map(|v| (e, v))
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = points.iter().map(|(e, _)| (e + 1.0).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let delta_fit = if sxx <= 1e-300 || sxy <= 0.0 {
        f64::INFINITY
    } else {
        sxx / sxy
    };
    let c_fit = points
        .iter()
        .map(|(e, v)| v.powf(delta_fit) / (e + 1.0))
        .fold(0.0, f64::max);
    Ok(InequalityAudit {
        beta,
        delta_fit,
        c_fit,
        pass: delta_fit > 1.0 && c_fit.is_finite(),
        points,
    })
}
