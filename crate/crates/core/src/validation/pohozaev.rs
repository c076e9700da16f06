//! Pohozaev-type balance on balls.
//!
//! For a solution of `-lap u + |grad u|^gamma / gamma + lambda = V -/+ f(m)`
//! with its Fokker-Planck partner `m`, and `G = V m - lambda m -/+ F(m)`,
//! `x` measured from the ball centre, `nu` the outer normal:
//!
//! ```text
//! N int G + int m grad V . x + (1 - N/gamma) int |grad u|^gamma m + (2 - N) int grad u . grad m
//!   = int_{dB} (G - grad u . grad m - |grad u|^gamma m / gamma)(x . nu)
//!            + (grad u . nu)(grad m . x) + (grad m . nu)(grad u . x)
//!            + |grad u|^(gamma-2) (grad u . nu)(grad u . x) m
//! ```
//!
//! Fields are interpolated with cubic Lagrange stencils. The ball is
//! integrated in polar coordinates: composite 4-point Gauss-Legendre panels
//! of width about `h` in the radius, trapezoidal in the angle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient, sample_cubic, ScalarField};
use crate::mfg::MfgSolution;
use crate::model::{Coupling, CouplingSign, Hamiltonian, Potential};

const GAUSS_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_W: [f64; 4] = [
    0.347_854_845_137_453_8,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_8,
];

/// Largest admissible radius as a fraction of the period.
pub const MAX_RADIUS: f64 = 0.45;

#[derive(Clone, Debug, Serialize)]
pub struct PohozaevReport {
    pub radius: f64,
    pub center: [f64; 2],
    /// `N int G`, `int m grad V . x`, `(1 - N/gamma) int |grad u|^gamma m`, `(2 - N) int grad u . grad m`.
    pub interior_terms: [f64; 4],
    pub interior_lhs: f64,
    pub boundary_rhs: f64,
    pub residual: f64,
}

impl PohozaevReport {
    /// Largest magnitude among the interior terms and the boundary side.
    pub fn scale(&self) -> f64 {
        self.interior_terms
            .iter()
            .fold(self.boundary_rhs.abs(), |a, t| a.max(t.abs()))
    }
}

/// Pointwise data at a physical location.
struct Local {
    m: f64,
    du: [f64; 2],
    dm: [f64; 2],
    v: f64,
    dv: [f64; 2],
}

struct Sampler {
    dim: usize,
    m: ScalarField,
    du: Vec<ScalarField>,
    dm: Vec<ScalarField>,
    potential: Potential,
}

impl Sampler {
    fn at(&self, y: [f64; 2]) -> Local {
        let mut du = [0.0; 2];
        let mut dm = [0.0; 2];
        for d in 0..self.dim {
            du[d] = sample_cubic(&self.du[d], y);
            dm[d] = sample_cubic(&self.dm[d], y);
        }
        let (dv, v) = self.potential.value_and_gradient(y, self.dim);
        Local {
            m: sample_cubic(&self.m, y).max(0.0),
            du,
            dm,
            v,
            dv,
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Both sides of the balance on the ball `|x - center| < radius`.
pub fn pohozaev_residual(
    s: &MfgSolution,
    coupling: &Coupling,
    hamiltonian: &Hamiltonian,
    potential: &Potential,
    radius: f64,
    center: [f64; 2],
) -> Result<PohozaevReport> {
    let grid = *s.grid();
    let dim = grid.dim();
    let l = grid.length();
    if !(radius > 0.0 && radius <= MAX_RADIUS * l) {
        return Err(Error::param(
            "pohozaev_radius",
            format!("radius must lie in (0, {}], got {radius}", MAX_RADIUS * l),
        ));
    }
    if (0..dim).any(|d| !(center[d] >= 0.0 && center[d] < l)) {
        return Err(Error::param("pohozaev_center", "centre must lie in the fundamental domain"));
    }
    let split = |f: &ScalarField| -> Vec<ScalarField> {
        let g = gradient(f);
        (0..dim)
            .map(|d| ScalarField::from_vec(grid, g.component(d).to_vec()))
            .collect()
    };
    let sampler = Sampler {
        dim,
        m: s.m.clone(),
        du: split(&s.u),
        dm: split(&s.m),
        potential: potential.clone(),
    };
    let gamma = hamiltonian.gamma();
    let n = dim as f64;
    let lambda = s.lambda;
    let sign = match coupling.sign() {
        CouplingSign::Focusing => -1.0,
        CouplingSign::Defocusing => 1.0,
    };
    let big_g = |p: &Local| p.v * p.m - lambda * p.m + sign * coupling.antiderivative_unchecked(p.m);
    let interior = |p: &Local, x: [f64; 2]| -> [f64; 4] {
        let gu = dot(p.du, p.du).sqrt();
        [
            n * big_g(p),
            p.m * dot(p.dv, x),
            (1.0 - n / gamma) * gu.powf(gamma) * p.m,
            (2.0 - n) * dot(p.du, p.dm),
        ]
    };
    let boundary = |p: &Local, x: [f64; 2], nu: [f64; 2]| -> f64 {
        let gu = dot(p.du, p.du).sqrt();
        let xn = dot(x, nu);
        let un = dot(p.du, nu);
        let ux = dot(p.du, x);
        let tail = if gu > 0.0 { gu.powf(gamma - 2.0) * un * ux * p.m } else { 0.0 };
        (big_g(p) - dot(p.du, p.dm) - gu.powf(gamma) * p.m / gamma) * xn
            + un * dot(p.dm, x)
            + dot(p.dm, nu) * ux
            + tail
    };
    let at = |x: [f64; 2]| sampler.at([center[0] + x[0], center[1] + x[1]]);

    let h = grid.h();
    let panels = (radius / h).ceil().max(1.0) as usize;
    let pw = radius / panels as f64;
    let mut terms = [0.0f64; 4];
    let rhs;
    if dim == 1 {
        // the segment [-R, R]
        let panels = 2 * panels;
        for k in 0..panels {
            let a = -radius + k as f64 * pw;
            for (gx, gw) in GAUSS_X.iter().zip(GAUSS_W) {
                let x = [a + 0.5 * pw * (gx + 1.0), 0.0];
                let t = interior(&at(x), x);
                for (acc, v) in terms.iter_mut().zip(t) {
                    *acc += 0.5 * pw * gw * v;
                }
            }
        }
        rhs = [-1.0, 1.0]
            .iter()
            .map(|&sgn| {
                let x = [sgn * radius, 0.0];
                boundary(&at(x), x, [sgn, 0.0])
            })
            .sum();
    } else {
        let nth = ((4.0 * 2.0 * std::f64::consts::PI * radius / h).ceil() as usize).max(16);
        let dth = 2.0 * std::f64::consts::PI / nth as f64;
        let dirs: Vec<[f64; 2]> = (0..nth)
            .map(|j| {
                let th = j as f64 * dth;
                [th.cos(), th.sin()]
            })
            .collect();
        for k in 0..panels {
            let a = k as f64 * pw;
            for (gx, gw) in GAUSS_X.iter().zip(GAUSS_W) {
                let r = a + 0.5 * pw * (gx + 1.0);
                let wr = 0.5 * pw * gw * r * dth;
                for nu in &dirs {
                    let x = [r * nu[0], r * nu[1]];
                    let t = interior(&at(x), x);
                    for (acc, v) in terms.iter_mut().zip(t) {
                        *acc += wr * v;
                    }
                }
            }
        }
        rhs = dirs
            .iter()
            .map(|nu| {
                let x = [radius * nu[0], radius * nu[1]];
                boundary(&at(x), x, *nu) * radius * dth
            })
            .sum();
    }
    let lhs: f64 = terms.iter().sum();
    Ok(PohozaevReport {
        radius,
        center,
        interior_terms: terms,
        interior_lhs: lhs,
        boundary_rhs: rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::validation::fixtures::constant;

    #[test]
    fn constant_solution_balances_on_every_ball() {
        let h = Hamiltonian::power_law(2.0).unwrap();
        for (dim, c_f, alpha) in [(1, 1.0, 1.0), (2, 2.0, 3.0)] {
            let g = TorusGrid::new(dim, 32).unwrap();
            let c = Coupling::new(alpha, c_f, CouplingSign::Focusing).unwrap();
            let s = constant(g, -c_f);
            for (r, center) in [(0.25, [0.5, 0.5]), (0.1, [0.0, 0.0]), (0.45, [0.3, 0.7]), (0.07, [0.93, 0.01])] {
                let rep = pohozaev_residual(&s, &c, &h, &Potential::Zero, r, center).unwrap();
                assert!(rep.residual <= 1e-10, "dim {dim} r {r}: {rep:?}");
                assert!(rep.interior_lhs.abs() > 1e-3);
            }
        }
    }

    #[test]
    fn rejects_balls_outside_the_cell() {
        let g = TorusGrid::new(2, 16).unwrap();
        let c = Coupling::new(1.0, 1.0, CouplingSign::Focusing).unwrap();
        let h = Hamiltonian::power_law(2.0).unwrap();
        let s = constant(g, -1.0);
        assert!(pohozaev_residual(&s, &c, &h, &Potential::Zero, 0.46, [0.5, 0.5]).is_err());
        assert!(pohozaev_residual(&s, &c, &h, &Potential::Zero, 0.0, [0.5, 0.5]).is_err());
        assert!(pohozaev_residual(&s, &c, &h, &Potential::Zero, 0.2, [1.0, 0.5]).is_err());
    }
}
