//! Quadratic Hamiltonian: the Hopf-Cole substitution `phi = e^(-u/2)`,
//! `m = phi^2`, turns the system into the ground-state problem
//!
//! ```text
//! 2 lap phi + lambda phi - V phi + c_f phi^(2 alpha + 1) = 0,   int phi^2 = 1,  phi > 0,
//! ```
//!
//! the constrained critical point of
//! `E(phi) = int |grad phi|^2 + 1/2 int V phi^2 - c_f/(2 beta) int phi^(2 beta)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{integrate, laplacian, ScalarField, SpectralSolver, TorusGrid};
use crate::mfg::MfgSolution;
use crate::model::{Coupling, CouplingSign, Hamiltonian, Potential};

/// Unit-mass square root of the density, `phi = sqrt(m)`.
pub fn hopf_cole_forward(s: &MfgSolution, hamiltonian: &Hamiltonian) -> Result<ScalarField> {
    if hamiltonian.gamma() != 2.0 {
        return Err(Error::param(
            "gamma",
            format!("the Hopf-Cole transform needs gamma = 2, got {}", hamiltonian.gamma()),
        ));
    }
    if s.m.min() <= 0.0 {
        return Err(Error::param("m", "density must be positive"));
    }
    let phi = s.m.map(f64::sqrt);
    let mass = integrate(&phi.map(|p| p * p));
    Ok(phi.map(|p| p / mass.sqrt()))
}

/// `e^(-u/2)` scaled to unit `L^2` mass.
pub fn hopf_cole_from_value(u: &ScalarField) -> ScalarField {
    let shift = u.min();
    let phi = u.map(|x| (-(x - shift) / 2.0).exp());
    let mass = integrate(&phi.map(|p| p * p));
    phi.map(|p| p / mass.sqrt())
}

fn focusing_only(coupling: &Coupling) -> Result<()> {
    if coupling.sign() != CouplingSign::Focusing {
        return Err(Error::param("sign", "the ground-state problem is stated for focusing coupling"));
    }
    Ok(())
}

/// `|| 2 lap phi + lambda phi - V phi + c_f phi^(2 alpha + 1) ||_inf`.
pub fn nls_residual(phi: &ScalarField, lambda: f64, coupling: &Coupling, potential: &Potential) -> Result<f64> {
    if phi.min() <= 0.0 {
        return Err(Error::param("phi", "amplitude must be positive"));
    }
    let v = potential.values(phi.grid())?;
    let lap = laplacian(phi);
    let p = 2.0 * coupling.alpha() + 1.0;
    let c = coupling.c_f();
    Ok((0..phi.grid().len())
        .map(|i| {
            let f = phi.values()[i];
            (2.0 * lap.values()[i] + (lambda - v.values()[i]) * f + c * f.powf(p)).abs()
        })
        .fold(0.0, f64::max))
}

/// `E(phi)` with the discrete Dirichlet form `-int phi lap phi`.
pub fn nls_energy(phi: &ScalarField, coupling: &Coupling, v: &ScalarField) -> f64 {
    let lap = laplacian(phi);
    let beta = coupling.beta();
    let grad = -integrate(&phi.zip_map(&lap, |a, b| a * b));
    let pot = 0.5 * integrate(&phi.zip_map(v, |a, b| a * a * b));
    let inter = coupling.c_f() / (2.0 * beta) * integrate(&phi.map(|a| a.powf(2.0 * beta)));
    grad + pot - inter
}

/// `lambda = -2 int phi lap phi + int V phi^2 - c_f int phi^(2 alpha + 2)` for unit-mass `phi`.
pub fn nls_lambda(phi: &ScalarField, coupling: &Coupling, v: &ScalarField) -> f64 {
    let lap = laplacian(phi);
    -2.0 * integrate(&phi.zip_map(&lap, |a, b| a * b)) + integrate(&phi.zip_map(v, |a, b| a * a * b))
        - coupling.c_f() * integrate(&phi.map(|a| a.powf(2.0 * coupling.alpha() + 2.0)))
}

/// Round-off level of [`nls_residual`]: `64 eps` times the size of its largest term.
pub fn roundoff_floor(phi: &ScalarField, lambda: f64, v: &ScalarField, coupling: &Coupling) -> f64 {
    let grid = phi.grid();
    let h = grid.h();
    let top = phi.max();
    let stiff = 8.0 * grid.dim() as f64 / (h * h) + lambda.abs() + v.max().abs()
        + coupling.c_f() * top.powf(2.0 * coupling.alpha());
    64.0 * f64::EPSILON * stiff * top
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub phi: ScalarField,
    pub lambda: f64,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlsOptions {
    /// Target for [`nls_residual`].
    pub tol: f64,
    /// Pseudo-time step; defaults to `h / 2`.
    pub tau: Option<f64>,
    pub max_iters: usize,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            tau: None,
            max_iters: 200_000,
        }
    }
}

/// Normalised gradient flow preconditioned by the implicit Laplacian:
///
/// ```text
/// r = 2 lap phi + lambda(phi) phi - V phi + c_f phi^(2 alpha + 1),
/// phi* = phi + (I/tau - 2 lap)^(-1) r,   phi <- phi* / ||phi*||_2.
/// ```
///
/// Since `r` is orthogonal to `phi`, a fixed point has `r = 0` for every `tau`.
/// The step is halved whenever the energy would increase. Without `initial`
/// the flow starts from a constant with a one-percent cosine ripple.
pub fn solve_nls_ground_state(
    grid: TorusGrid,
    coupling: &Coupling,
    potential: &Potential,
    opts: &NlsOptions,
    initial: Option<&ScalarField>,
) -> Result<GroundState> {
    focusing_only(coupling)?;
    if !(opts.tol > 0.0) {
        return Err(Error::param("nls_tol", format!("need tol > 0, got {}", opts.tol)));
    }
    let mut tau = opts.tau.unwrap_or(0.5 * grid.h());
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("nls_tau", format!("need tau > 0, got {tau}")));
    }
    let v = potential.values(&grid)?;
    let normalise = |f: ScalarField| -> ScalarField {
        let mass = integrate(&f.map(|p| p * p));
        f.map(|p| p / mass.sqrt())
    };
    let mut phi = match initial {
        Some(f) => {
            if !f.grid().same_shape(&grid) {
                return Err(Error::FieldMismatch("initial amplitude lives on another grid".into()));
            }
            if f.min() <= 0.0 {
                return Err(Error::param("initial", "initial amplitude must be positive"));
            }
            normalise(f.clone())
        }
        None => {
            let l = grid.length();
            normalise(ScalarField::from_fn(grid, |x| {
                1.0 + 1e-2 * (2.0 * std::f64::consts::PI * x[0] / l).cos()
            }))
        }
    };
    let solver = SpectralSolver::new(grid);
    let p = 2.0 * coupling.alpha() + 1.0;
    let c = coupling.c_f();
    let mut energy = nls_energy(&phi, coupling, &v);
    let mut iterations = 0;
    loop {
        let lambda = nls_lambda(&phi, coupling, &v);
        let residual = nls_residual(&phi, lambda, coupling, potential)?;
        if residual <= opts.tol.max(roundoff_floor(&phi, lambda, &v, coupling)) {
            return Ok(GroundState {
                phi,
                lambda,
                energy,
                residual,
                iterations,
            });
        }
        if iterations >= opts.max_iters || !residual.is_finite() {
            return Err(Error::NotConverged {
                solver: "ground-state flow",
                iterations,
                residual,
            });
        }
        iterations += 1;
        let lap = laplacian(&phi);
        let r: Vec<f64> = (0..grid.len())
            .map(|i| {
                let f = phi.values()[i];
                2.0 * lap.values()[i] + (lambda - v.values()[i]) * f + c * f.powf(p)
            })
            .collect();
        let step = solver.solve(&r, 1.0 / tau, 2.0);
        let next = normalise(phi.zip_map(&ScalarField::from_vec(grid, step), |a, b| a + b));
        if next.min() <= 0.0 {
            return Err(Error::SchemeViolation("ground-state amplitude lost positivity".into()));
        }
        let e = nls_energy(&next, coupling, &v);
        if e > energy + 1e-12 * energy.abs().max(1.0) {
            tau *= 0.5;
            if tau < 1e-14 {
                return Err(Error::NotConverged {
                    solver: "ground-state flow",
                    iterations,
                    residual,
                });
            }
            continue;
        }
        phi = next;
        energy = e;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossValidation {
    /// `|| m - phi^2 ||_inf`.
    pub density_mismatch: f64,
    /// `|lambda_mfg - lambda_nls|`.
    pub lambda_mismatch: f64,
    pub lambda_mfg: f64,
    pub lambda_nls: f64,
    pub nls_residual: f64,
    pub nls_iterations: usize,
}

/// Solves the ground-state problem on the same lattice and compares.
pub fn cross_validate_quadratic(
    s: &MfgSolution,
    hamiltonian: &Hamiltonian,
    coupling: &Coupling,
    potential: &Potential,
    opts: &NlsOptions,
) -> Result<CrossValidation> {
    if hamiltonian.gamma() != 2.0 {
        return Err(Error::param("gamma", "cross validation needs gamma = 2"));
    }
    let gs = solve_nls_ground_state(*s.grid(), coupling, potential, opts, None)?;
    let rho = gs.phi.map(|p| p * p);
    Ok(CrossValidation {
        density_mismatch: s.m.max_abs_diff(&rho),
        lambda_mismatch: (s.lambda - gs.lambda).abs(),
        lambda_mfg: s.lambda,
        lambda_nls: gs.lambda,
        nls_residual: gs.residual,
        nls_iterations: gs.iterations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MassScalingReport {
    pub lambda: f64,
    /// `(N alpha - 2) / (2 alpha)`.
    pub exponent: f64,
    /// `|lambda|^exponent`.
    pub predicted_mass: f64,
    /// `int psi^2` on the rescaled lattice.
    pub mass: f64,
    pub mismatch: f64,
    /// `|| 2 psi'' - psi + psi^(2 alpha + 1) ||_inf` on the rescaled lattice.
    pub residual: f64,
    /// Whole-line mass `int psi_ref^2` of the explicit one-dimensional profile.
    pub reference_mass: Option<f64>,
    /// `|int psi^2 - int psi_ref^2|`.
    pub reference_mismatch: Option<f64>,
    /// `alpha = 2 / N`: the exponent vanishes and the relation carries no information.
    pub degenerate: bool,
    pub concentration: f64,
}

/// Minimum `max phi / min phi` for the torus to stand in for the whole space.
pub const CONCENTRATION_RATIO: f64 = 100.0;

/// `int psi_ref^2` for `psi_ref(y) = (alpha + 1)^(1/(2 alpha)) sech(alpha y / sqrt 2)^(1/alpha)`,
/// the positive even solution of `2 psi'' - psi + psi^(2 alpha + 1) = 0` on the line.
pub fn reference_mass_1d(alpha: f64) -> f64 {
    // trapezoid on a truncated line; spectrally accurate for this profile
    let amp = (alpha + 1.0).powf(1.0 / alpha);
    let k = alpha / std::f64::consts::SQRT_2;
    let half = 60.0 / k;
    let steps = 20_000;
    let dy = 2.0 * half / steps as f64;
    let profile = |y: f64| amp * (1.0 / (k * y).cosh()).powf(2.0 / alpha);
    (0..=steps)
        .map(|j| {
            let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
            w * profile(-half + j as f64 * dy)
        })
        .sum::<f64>()
        * dy
}

/// Rescales `psi(y) = |lambda|^(-1/(2 alpha)) phi(y / |lambda|^(1/2))` and
/// checks `|lambda|^((N alpha - 2)/(2 alpha)) = int psi^2`.
pub fn mass_scaling_check(
    gs: &GroundState,
    coupling: &Coupling,
    potential: &Potential,
) -> Result<MassScalingReport> {
    focusing_only(coupling)?;
    if !potential.is_zero() {
        return Err(Error::param("potential", "the scaling relation needs V = 0"));
    }
    if coupling.c_f() != 1.0 {
        return Err(Error::param("c_f", "the scaling relation is stated for c_f = 1"));
    }
    if !(gs.lambda < 0.0) {
        return Err(Error::param(
            "lambda",
            format!("the scaling relation needs lambda < 0, got {}", gs.lambda),
        ));
    }
    let concentration = gs.phi.max() / gs.phi.min();
    if concentration < CONCENTRATION_RATIO {
        return Err(Error::param(
            "phi",
            format!("ground state not concentrated enough: max/min = {concentration:.3} < {CONCENTRATION_RATIO}"),
        ));
    }
    let grid = *gs.phi.grid();
    let dim = grid.dim() as f64;
    let alpha = coupling.alpha();
    let mu = -gs.lambda;
    let exponent = (dim * alpha - 2.0) / (2.0 * alpha);
    let degenerate = (dim * alpha - 2.0).abs() < 1e-12;
    if degenerate {
        log::warn!("alpha = 2/N: the mass-scaling relation degenerates");
    }
    let zoom = TorusGrid::with_length(grid.dim(), grid.n(), grid.length() * mu.sqrt())?;
    let amp = mu.powf(-1.0 / (2.0 * alpha));
    let psi = gs.phi.relabel(zoom)?.map(|p| amp * p);
    let mass = integrate(&psi.map(|p| p * p));
    let predicted_mass = mu.powf(exponent);
    let lap = laplacian(&psi);
    let q = 2.0 * alpha + 1.0;
    let residual = psi
        .values()
        .iter()
        .zip(lap.values())
        .map(|(&p, &l)| (2.0 * l - p + p.powf(q)).abs())
        .fold(0.0, f64::max);
    let reference_mass = (grid.dim() == 1).then(|| reference_mass_1d(alpha));
    Ok(MassScalingReport {
        lambda: gs.lambda,
        exponent,
        predicted_mass,
        mass,
        mismatch: (predicted_mass - mass).abs(),
        residual,
        reference_mass,
        reference_mismatch: reference_mass.map(|r| (mass - r).abs()),
        degenerate,
        concentration,
    })
}
