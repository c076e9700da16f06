//! Coupled fixed-point solver for the regularized system
//!
//! ```text
//! focusing:    -lap u + H(grad u) + lambda = V - f(m * psi)
//! defocusing:  -lap u + H(grad u) + lambda = V + f(m * psi) * psi
//!              -lap m - div(grad H(grad u) m) = 0
//! ```
//!
//! together with the blow-up rescaling and the exponent sweep.

mod rescale;
mod sweep;

pub use rescale::{rescale_blowup, rescale_with_peak, rescaling_residual, RescaledSolution};
pub use sweep::{sweep_alpha, SweepReport, SweepRow, CONCENTRATION_GROWTH, DIVERGENCE_FACTOR};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fokker_planck::{assemble_fp_operator, fp_residual, solve_invariant_measure_from, DriftField, FpOptions};
use crate::grid::{gradient, integrate, mollify, Mollifier, ScalarField, TorusGrid};
use crate::hjb::{fit_lambda, roundoff_floor as hjb_roundoff_floor, solve_ergodic_hjb_from, ErgodicHjbProblem, HjbOptions};
use crate::model::{Coupling, CouplingSign, Hamiltonian, Potential};

/// Starting density for the fixed point.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDensity {
    Uniform,
    /// `1 + eps * prod_d cos(2 pi x_d / L)`, normalised.
    Cosine(f64),
    /// `1 + amplitude * exp(-|x - c|^2 / (2 width^2))` around the domain
    /// centre `c`, normalised.
    Bump { amplitude: f64, width: f64 },
    Field(ScalarField),
}

impl InitialDensity {
    pub fn sample(&self, grid: &TorusGrid) -> Result<ScalarField> {
        let l = grid.length();
        let raw = match self {
            Self::Uniform => ScalarField::constant(*grid, 1.0),
            Self::Cosine(eps) => {
                if eps.abs() >= 1.0 {
                    return Err(Error::param("initial", "cosine amplitude must lie in (-1, 1)"));
                }
                let dim = grid.dim();
                ScalarField::from_fn(*grid, |x| {
                    let p: f64 = (0..dim)
                        .map(|d| (2.0 * std::f64::consts::PI * x[d] / l).cos())
                        .product();
                    1.0 + eps * p
                })
            }
            Self::Bump { amplitude, width } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) || !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::param("initial", "bump needs amplitude >= 0 and width > 0"));
                }
                let dim = grid.dim();
                ScalarField::from_fn(*grid, |x| {
                    let r2: f64 = (0..dim).map(|d| (x[d] - 0.5 * l).powi(2)).sum();
                    1.0 + amplitude * (-r2 / (2.0 * width * width)).exp()
                })
            }
            Self::Field(m) => {
                if !m.grid().same_shape(grid) {
                    return Err(Error::FieldMismatch("initial density lives on another grid".into()));
                }
                m.clone()
            }
        };
        if raw.min() <= 0.0 {
            return Err(Error::param("initial", "initial density must be positive"));
        }
        let mass = integrate(&raw);
        Ok(raw.map(|v| v / mass))
    }
}

#[derive(Clone, Debug)]
pub struct MfgProblem {
    pub grid: TorusGrid,
    pub hamiltonian: Hamiltonian,
    pub coupling: Coupling,
    pub potential: Potential,
    pub mollifier: Mollifier,
    /// Damping in `(0, 1]`.
    pub theta: f64,
    pub tol: f64,
    pub max_outer_iters: usize,
    pub hjb: HjbOptions,
    pub fp: FpOptions,
}

impl MfgProblem {
    /// Problem with default controls: `theta = 0.5`, `tol = 1e-8`, 500 outer
    /// iterations, inner tolerances a tenth of the outer one, mollifier
    /// support spanning eight cells.
    pub fn new(
        grid: TorusGrid,
        hamiltonian: Hamiltonian,
        coupling: Coupling,
        potential: Potential,
    ) -> Result<Self> {
        let mollifier = Mollifier::new(&grid, Mollifier::default_k(&grid))?;
        let tol = 1e-8;
        Ok(Self {
            grid,
            hamiltonian,
            coupling,
            potential,
            mollifier,
            theta: 0.5,
            tol,
            max_outer_iters: 500,
            hjb: HjbOptions {
                tol: 0.1 * tol,
                ..HjbOptions::default()
            },
            fp: FpOptions {
                tol: 0.1 * tol,
                ..FpOptions::default()
            },
        })
    }

    /// Sets the outer tolerance and ties the inner tolerances to it.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.hjb.tol = 0.1 * tol;
        self.fp.tol = 0.1 * tol;
        self
    }

    pub fn with_mollifier_k(mut self, k: u32) -> Result<Self> {
        self.mollifier = Mollifier::new(&self.grid, k)?;
        Ok(self)
    }

    /// Same problem with `h` halved; the mollifier index doubles so its
    /// support keeps the same number of cells.
    pub fn refined(&self) -> Result<Self> {
        let grid = TorusGrid::with_length(self.grid.dim(), 2 * self.grid.n(), self.grid.length())?;
        let potential = match &self.potential {
            Potential::Field(_) => {
                return Err(Error::param("potential", "nodal potentials cannot be refined"))
            }
            p => p.clone(),
        };
        Ok(Self {
            grid,
            potential,
            mollifier: Mollifier::new(&grid, 2 * self.mollifier.k())?,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::param("theta", format!("need 0 < theta <= 1, got {}", self.theta)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param("outer_tol", format!("need tol > 0, got {}", self.tol)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::param("outer_max_iters", "need at least one iteration"));
        }
        Ok(())
    }

    /// Right-hand side `V -/+ f(m)` with the regularization applied.
    pub fn coupling_rhs(&self, v: &ScalarField, m: &ScalarField) -> Result<ScalarField> {
        let fm = self.coupling.f_field(&mollify(m, &self.mollifier)?)?;
        Ok(match self.coupling.sign() {
            CouplingSign::Focusing => v.zip_map(&fm, |a, b| a - b),
            CouplingSign::Defocusing => {
                let ffm = mollify(&fm, &self.mollifier)?;
                v.zip_map(&ffm, |a, b| a + b)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OuterStatus {
    Converged,
    MaxIterations,
    /// `max m` exceeded [`DIVERGENCE_FACTOR`] times its initial value.
    Diverged,
}

#[derive(Clone, Debug)]
pub struct MfgSolution {
    pub u: ScalarField,
    pub lambda: f64,
    pub m: ScalarField,
    pub outer_iters: usize,
    pub hjb_res: f64,
    pub fp_res: f64,
    /// `|| f(m * psi) - f(m) ||_inf`, reported only.
    pub coupling_res: f64,
    pub converged: bool,
    pub status: OuterStatus,
    /// `|| m_new - m ||_L1` per outer iteration.
    pub history: Vec<f64>,
    /// Largest value of `m` at the start.
    pub initial_max: f64,
}

impl MfgSolution {
    pub fn grid(&self) -> &TorusGrid {
        self.m.grid()
    }
}

fn l1_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.grid().cell_volume()
        * a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
}

/// Residuals of a candidate triple against the regularized system.
pub fn mfg_residuals(
    p: &MfgProblem,
    u: &ScalarField,
    m: &ScalarField,
) -> Result<(f64, f64, f64)> {
    let v = p.potential.values(&p.grid)?;
    let rhs = p.coupling_rhs(&v, m)?;
    let (lambda, hjb_res) = fit_lambda(u, &rhs, &p.hamiltonian);
    let fp_res = fp_residual(m, &DriftField::from_value_function(u, &p.hamiltonian));
    Ok((lambda, hjb_res, fp_res))
}

/// Round-off level of the Fokker-Planck residual for this drift and density.
fn fp_floor(p: &MfgProblem, u: &ScalarField, m: &ScalarField) -> f64 {
    assemble_fp_operator(&DriftField::from_value_function(u, &p.hamiltonian)).roundoff_floor(m.max())
}

/// Damped fixed-point iteration `m -> (u, lambda) -> m_new`.
///
/// Stops when `||m_new - m||_L1 <= tol` and both PDE residuals of the
/// returned triple are `<= tol`, or at their round-off floors when those sit
/// above `tol` (large potentials on fine grids). Failure to converge is reported through
/// [`MfgSolution::status`], not as an error; inner solver failures are errors.
pub fn solve_fixed_point(p: &MfgProblem, m0: Option<&ScalarField>) -> Result<MfgSolution> {
    p.validate()?;
    let grid = p.grid;
    let mut m = match m0 {
        Some(m0) => {
            let mass = integrate(m0);
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::param("initial", format!("initial density has mass {mass}, expected 1")));
            }
            InitialDensity::Field(m0.clone()).sample(&grid)?
        }
        None => InitialDensity::Uniform.sample(&grid)?,
    };
    let v = p.potential.values(&grid)?;
    let initial_max = m.max();
    let mut theta = p.theta;
    let mut u: Option<ScalarField> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut increases = 0usize;

    let mut iter = 0;
    let mut out = loop {
        iter += 1;
        let rhs = p.coupling_rhs(&v, &m).map_err(|e| e.context("coupling"))?;
        let hjb = solve_ergodic_hjb_from(&ErgodicHjbProblem::new(p.hamiltonian, rhs), u.as_ref(), &p.hjb)
            .map_err(|e| e.context(format!("HJB solve in outer iteration {iter}")))?;
        let drift = DriftField::from_value_function(&hjb.u, &p.hamiltonian);
        let fp = solve_invariant_measure_from(&drift, Some(&m), &p.fp)
            .map_err(|e| e.context(format!("Fokker-Planck solve in outer iteration {iter}")))?;
        let diff = l1_diff(&fp.m, &m);
        if let Some(&last) = history.last() {
            increases = if diff > last { increases + 1 } else { 0 };
        }
        history.push(diff);
        log::debug!("outer {iter}: |m_new - m|_1 = {diff:e}, theta = {theta}");
        u = Some(hjb.u);

        let mut status = None;
        if diff <= p.tol {
            let (_, hjb_res, fp_res) = mfg_residuals(p, u.as_ref().unwrap(), &fp.m)?;
            let u_ref = u.as_ref().unwrap();
            let fp_ok = fp_res <= p.tol.max(fp_floor(p, u_ref, &fp.m));
            let rhs_new = p.coupling_rhs(&v, &fp.m)?;
            let hjb_ok = hjb_res <= p.tol.max(hjb_roundoff_floor(u_ref, &rhs_new, &p.hamiltonian));
            if hjb_ok && fp_ok {
                status = Some(OuterStatus::Converged);
            }
        }
        if status.is_none() && fp.m.max() > DIVERGENCE_FACTOR * initial_max {
            status = Some(OuterStatus::Diverged);
        }
        if status.is_none() && iter >= p.max_outer_iters {
            status = Some(OuterStatus::MaxIterations);
        }
        if let Some(status) = status {
            break (fp.m, status);
        }

        if increases >= 3 {
            theta *= 0.5;
            increases = 0;
            log::debug!("oscillation detected, damping reduced to {theta}");
        }
        m = m.zip_map(&fp.m, |a, b| (1.0 - theta) * a + theta * b);
    };
    let u = u.expect("at least one outer iteration");
    let m_ret = std::mem::replace(&mut out.0, ScalarField::zeros(grid));
    let (lambda, hjb_res, fp_res) = mfg_residuals(p, &u, &m_ret)?;
    let fm = p.coupling.f_field(&m_ret)?;
    let fmm = p.coupling.f_field(&mollify(&m_ret, &p.mollifier)?)?;
    let coupling_res = fm.max_abs_diff(&fmm);
    if out.1 != OuterStatus::Converged {
        log::warn!(
            "outer iteration stopped ({:?}) after {iter} iterations, last L1 change {:e}",
            out.1,
            history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(MfgSolution {
        u,
        lambda,
        m: m_ret,
        outer_iters: iter,
        hjb_res,
        fp_res,
        coupling_res,
        converged: out.1 == OuterStatus::Converged,
        status: out.1,
        history,
        initial_max,
    })
}

/// `(1/gamma') int |A|^gamma' m - (c_f / beta) int m^beta` with `A = -grad H(grad u)`.
pub fn energy_functional(
    m: &ScalarField,
    u: &ScalarField,
    coupling: &Coupling,
    hamiltonian: &Hamiltonian,
) -> Result<f64> {
    let gc = hamiltonian.gamma_conj();
    let a = hamiltonian.drift_field(&gradient(u)).norm();
    let kinetic = integrate(&a.zip_map(m, |an, mv| an.powf(gc) * mv)) / gc;
    let beta = coupling.beta();
    if m.min() < 0.0 {
        return Err(Error::param("m", "density must be nonnegative"));
    }
    let potential = coupling.c_f() / beta * integrate(&m.map(|x| x.powf(beta)));
    Ok(kinetic - potential)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(n: usize, sign: CouplingSign) -> MfgProblem {
        let grid = TorusGrid::new(1, n).unwrap();
        MfgProblem::new(
            grid,
            Hamiltonian::power_law(2.0).unwrap(),
            Coupling::new(0.5, 1.0, sign).unwrap(),
            Potential::Zero,
        )
        .unwrap()
    }

    #[test]
    fn constant_solution_both_signs() {
        for (sign, lam) in [(CouplingSign::Focusing, -1.0), (CouplingSign::Defocusing, 1.0)] {
            let s = solve_fixed_point(&problem(64, sign), None).unwrap();
            assert!(s.converged);
            assert!((s.lambda - lam).abs() < 1e-12);
            assert!(s.m.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn energy_of_constant_pair() {
        let g = TorusGrid::new(1, 16).unwrap();
        let h = Hamiltonian::power_law(2.0).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let zero = ScalarField::zeros(g);
        let c = Coupling::new(1.0, 1.0, CouplingSign::Focusing).unwrap();
        assert!((energy_functional(&one, &zero, &c, &h).unwrap() + 0.5).abs() < 1e-15);
        let c = Coupling::new(3.0, 2.0, CouplingSign::Focusing).unwrap();
        assert!((energy_functional(&one, &zero, &c, &h).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_controls() {
        let mut p = problem(32, CouplingSign::Focusing);
        p.theta = 0.0;
        assert!(solve_fixed_point(&p, None).is_err());
        let p = problem(32, CouplingSign::Focusing);
        let bad = ScalarField::constant(p.grid, 2.0);
        assert!(solve_fixed_point(&p, Some(&bad)).is_err());
    }
}
