//! Ergodic Hamilton-Jacobi-Bellman solver: find `(u, lambda)` with
//! `-lap u + H(grad u) + lambda = R` and `mean(u) = 0`.
//!
//! The equation is marched in pseudo-time with implicit diffusion and an
//! explicit Hamiltonian,
//!
//! ```text
//! (I - dt lap) v_new = v + dt (R - H(grad v)),
//! ```
//!
//! each step solved exactly by FFT. At a steady state the quantity
//! `w = R + lap v - H(grad v)` is constant and equals `lambda`.

use crate::error::{Error, Result};
use crate::grid::{gradient, laplacian, ScalarField, SpectralSolver, TorusGrid};
use crate::model::Hamiltonian;

/// Largest tolerated condition number of `I - dt lap`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct ErgodicHjbProblem {
    pub grid: TorusGrid,
    pub hamiltonian: Hamiltonian,
    pub rhs: ScalarField,
}

impl ErgodicHjbProblem {
    pub fn new(hamiltonian: Hamiltonian, rhs: ScalarField) -> Self {
        Self {
            grid: *rhs.grid(),
            hamiltonian,
            rhs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ErgodicSolution {
    pub u: ScalarField,
    pub lambda: f64,
    pub residual_inf: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HjbMethod {
    /// Semi-implicit pseudo-time marching.
    #[default]
    Marching,
    /// Pseudo-transient Newton continuation; for stiff right-hand sides.
    Newton,
}

impl std::str::FromStr for HjbMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marching" => Ok(Self::Marching),
            "newton" => Ok(Self::Newton),
            other => Err(Error::param(
                "hjb_method",
                format!("expected marching or newton, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HjbOptions {
    /// Pseudo-time step; `None` means `0.5 h`. Newton uses it as the initial step.
    pub dt: Option<f64>,
    pub tol: f64,
    /// Step budget (marching steps or Newton steps).
    pub max_steps: usize,
    pub method: HjbMethod,
}

impl Default for HjbOptions {
    fn default() -> Self {
        Self {
            dt: None,
            tol: 1e-10,
            max_steps: 200_000,
            method: HjbMethod::Marching,
        }
    }
}

/// `R + lap u - H(grad u)`.
fn defect(u: &ScalarField, rhs: &ScalarField, h: &Hamiltonian) -> Vec<f64> {
    let lap = laplacian(u);
    let hv = h.eval_field(&gradient(u));
    rhs.values()
        .iter()
        .zip(lap.values())
        .zip(hv.values())
        .map(|((r, l), hh)| r + l - hh)
        .collect()
}

/// Multiple of machine epsilon used for the round-off floor of the residual.
pub const ROUNDOFF_FACTOR: f64 = 64.0;

/// Round-off level of the defect `R + lap v - H(grad v)`.
pub fn roundoff_floor(v: &ScalarField, rhs: &ScalarField, h: &Hamiltonian) -> f64 {
    let g = v.grid();
    let inf = |x: &[f64]| x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let lap_scale = 4.0 * g.dim() as f64 / (g.h() * g.h()) * inf(v.values());
    let ham = inf(h.eval_field(&gradient(v)).values());
    ROUNDOFF_FACTOR * f64::EPSILON * (inf(rhs.values()) + lap_scale + ham)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// `|| -lap u + H(grad u) + lambda - R ||_inf`.
pub fn hjb_residual(u: &ScalarField, lambda: f64, rhs: &ScalarField, h: &Hamiltonian) -> f64 {
    defect(u, rhs, h)
        .iter()
        .fold(0.0, |acc, w| acc.max((lambda - w).abs()))
}

/// Residual-minimising ergodic constant for a given `u`: the midrange of the defect.
pub fn fit_lambda(u: &ScalarField, rhs: &ScalarField, h: &Hamiltonian) -> (f64, f64) {
    let (lo, hi) = min_max(&defect(u, rhs, h));
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

pub fn solve_ergodic_hjb(
    problem: &ErgodicHjbProblem,
    dt: f64,
    tol: f64,
    max_steps: usize,
) -> Result<ErgodicSolution> {
    let opts = HjbOptions {
        dt: Some(dt),
        tol,
        max_steps,
        method: HjbMethod::Marching,
    };
    solve_ergodic_hjb_from(problem, None, &opts)
}

/// Marching from an optional initial guess (warm start).
pub fn solve_ergodic_hjb_from(
    problem: &ErgodicHjbProblem,
    initial: Option<&ScalarField>,
    opts: &HjbOptions,
) -> Result<ErgodicSolution> {
    let grid = problem.grid;
    let h = grid.h();
    if !problem.rhs.grid().same_shape(&grid) {
        return Err(Error::FieldMismatch("right-hand side lives on another grid".into()));
    }
    let dt = opts.dt.unwrap_or(0.5 * h);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("hjb_dt", format!("need dt > 0, got {dt}")));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::param("hjb_tol", format!("need tol > 0, got {}", opts.tol)));
    }
    let cond = 1.0 + dt * 4.0 * grid.dim() as f64 / (h * h);
    if cond > MAX_CONDITION {
        return Err(Error::param(
            "hjb_dt",
            format!("implicit step has condition number {cond:e} > {MAX_CONDITION:e}"),
        ));
    }
    if let Some(u0) = initial {
        if !u0.grid().same_shape(&grid) {
            return Err(Error::FieldMismatch("initial guess lives on another grid".into()));
        }
    }

    if opts.method == HjbMethod::Newton {
        return newton(problem, initial, dt, opts);
    }
    let ham = &problem.hamiltonian;
    let solver = SpectralSolver::new(grid);
    let mut v = initial
        .cloned()
        .unwrap_or_else(|| ScalarField::zeros(grid));
    let mut warned = false;
    let mut residual = f64::INFINITY;
    for step in 0..=opts.max_steps {
        let du = gradient(&v);
        let hv = ham.eval_field(&du);
        let lap = laplacian(&v);
        let w: Vec<f64> = problem
            .rhs
            .values()
            .iter()
            .zip(lap.values())
            .zip(hv.values())
            .map(|((r, l), hh)| r + l - hh)
            .collect();
        let (lo, hi) = min_max(&w);
        residual = 0.5 * (hi - lo);
        if residual <= opts.tol
            || (step % 64 == 0 && residual <= roundoff_floor(&v, &problem.rhs, ham))
        {
            let mean = v.mean();
            let u = v.map(|x| x - mean);
            return Ok(ErgodicSolution {
                u,
                lambda: 0.5 * (lo + hi),
                residual_inf: residual,
                iterations: step,
            });
        }
        if !residual.is_finite() {
            break;
        }
        if step == opts.max_steps {
            break;
        }

        let b = ham.drift_field(&du).max_norm();
        if !warned && b * h / 2.0 >= 1.0 {
            log::warn!("mesh Peclet number {:.3} >= 1 in HJB march", b * h / 2.0);
            warned = true;
        }
        let dt_step = if b > 0.0 { dt.min(1.0 / (b * b)) } else { dt };
        let rhs: Vec<f64> = v
            .values()
            .iter()
            .zip(problem.rhs.values())
            .zip(hv.values())
            .map(|((vi, r), hh)| vi + dt_step * (r - hh))
            .collect();
        let mut next = solver.solve(&rhs, 1.0, dt_step);
        let mean = next.iter().sum::<f64>() / next.len() as f64;
        for x in &mut next {
            *x -= mean;
        }
        v = ScalarField::from_vec(grid, next);
    }
    Err(Error::NotConverged {
        solver: "ergodic HJB",
        iterations: opts.max_steps,
        residual,
    })
}

fn project(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Pseudo-transient continuation: `(I/dt + J) d = -P F(v)` on mean-zero
/// corrections, with `F(v) = -lap v + H(grad v) - R`, `J` its Jacobian and
/// `dt` grown by switched evolution relaxation until the step is pure Newton.
fn newton(
    problem: &ErgodicHjbProblem,
    initial: Option<&ScalarField>,
    dt0: f64,
    opts: &HjbOptions,
) -> Result<ErgodicSolution> {
    let grid = problem.grid;
    let ham = &problem.hamiltonian;
    let solver = SpectralSolver::new(grid);
    let neighbours: Vec<Vec<(usize, usize)>> = (0..grid.dim())
        .map(|axis| {
            (0..grid.len())
                .map(|i| (grid.shift(i, axis, -1), grid.shift(i, axis, 1)))
                .collect()
        })
        .collect();
    let inv2h = 0.5 / grid.h();
    let mut v = initial.cloned().unwrap_or_else(|| ScalarField::zeros(grid));
    project(v.values_mut());
    let eval = |v: &ScalarField| -> (Vec<f64>, f64, f64) {
        let w = defect(v, &problem.rhs, ham);
        let (lo, hi) = min_max(&w);
        (w, 0.5 * (lo + hi), 0.5 * (hi - lo))
    };
    let (mut w, mut mid, mut residual) = eval(&v);
    let mut dt = dt0;
    let mut steps = 0;
    while residual > opts.tol && residual > roundoff_floor(&v, &problem.rhs, ham) {
        if steps >= opts.max_steps || !residual.is_finite() {
            return Err(Error::NotConverged {
                solver: "ergodic HJB (Newton)",
                iterations: steps,
                residual,
            });
        }
        steps += 1;
        let du = gradient(&v);
        let b: Vec<[f64; 2]> = (0..grid.len()).map(|i| ham.grad(du.at(i))).collect();
        let shift = 1.0 / dt;
        let apply = |d: &[f64]| -> Vec<f64> {
            let df = ScalarField::from_vec(grid, d.to_vec());
            let lap = laplacian(&df);
            let mut out: Vec<f64> = d
                .iter()
                .zip(lap.values())
                .map(|(x, l)| shift * x - l)
                .collect();
            for (axis, nb) in neighbours.iter().enumerate() {
                for (i, &(m, p)) in nb.iter().enumerate() {
                    out[i] += b[i][axis] * (d[p] - d[m]) * inv2h;
                }
            }
            project(&mut out);
            out
        };
        let precond = |r: &[f64]| {
            let mut y = solver.solve(r, shift, 1.0);
            project(&mut y);
            y
        };
        // F = -w; the target is the mean-zero part of -F = w
        let mut rhs: Vec<f64> = w.iter().map(|x| x - mid).collect();
        project(&mut rhs);
        let rnorm = crate::linalg::norm2(&rhs);
        let mut d = vec![0.0; grid.len()];
        crate::linalg::gmres(
            apply,
            precond,
            &rhs,
            &mut d,
            &crate::linalg::GmresOptions {
                restart: 300,
                max_iters: 1200,
                tol: (1e-6 * rnorm).max(1e-3 * opts.tol),
            },
        );
        let trial = v.zip_map(&ScalarField::from_vec(grid, d), |a, b| a + b);
        let (tw, tmid, tres) = eval(&trial);
        if tres.is_finite() && tres < 2.0 * residual {
            dt = (dt * residual / tres).min(1e12);
            v = trial;
            w = tw;
            mid = tmid;
            residual = tres;
        } else {
            dt *= 0.25;
        }
    }
    project(v.values_mut());
    Ok(ErgodicSolution {
        u: v,
        lambda: mid,
        residual_inf: residual,
        iterations: steps,
    })
}
