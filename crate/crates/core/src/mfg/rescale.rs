//! Blow-up rescaling around the density peak.
//!
//! With `M = max m` attained at `x0` and `a = M^(-alpha/gamma')`,
//!
//! ```text
//! v(x) = a^(gamma'-2) u(x0 + a x),   mu(x) = m(x0 + a x) / M,
//! Lambda = a^gamma' lambda,  H_a(p) = a^gamma' H(a^(1-gamma') p),
//! W(x) = a^gamma' V(x0 + a x),  F_a(mu) = a^gamma' f(M mu).
//! ```
//!
//! On the lattice this is the original node array rolled so the peak sits at
//! index 0, with spacing `h / a`.

use crate::error::{Error, Result};
use crate::fokker_planck::{fp_residual, DriftField};
use crate::grid::{gradient, laplacian, mollify, Mollifier, ScalarField, TorusGrid, VectorField};
use crate::model::{Coupling, CouplingSign, Hamiltonian, Potential};

use super::MfgSolution;

#[derive(Clone, Debug)]
pub struct RescaledSolution {
    pub v: ScalarField,
    pub mu: ScalarField,
    pub lambda: f64,
    pub a: f64,
    pub peak: f64,
    /// Node index of the peak on the original lattice.
    pub x0: usize,
    /// Rescaled potential `W`.
    pub w: ScalarField,
    pub hamiltonian: Hamiltonian,
    pub coupling: Coupling,
    /// Kernel in lattice units; unchanged by the zoom.
    pub mollifier: Mollifier,
}

impl RescaledSolution {
    fn gc(&self) -> f64 {
        self.hamiltonian.gamma_conj()
    }

    /// `H_a(p) = a^gamma' H(a^(1-gamma') p)`.
    pub fn h_k(&self, p: [f64; 2]) -> f64 {
        let s = self.a.powf(1.0 - self.gc());
        self.a.powf(self.gc()) * self.hamiltonian.eval([s * p[0], s * p[1]])
    }

    /// `grad H_a(p) = a grad H(a^(1-gamma') p)`.
    pub fn grad_h_k(&self, p: [f64; 2]) -> [f64; 2] {
        let s = self.a.powf(1.0 - self.gc());
        let g = self.hamiltonian.grad([s * p[0], s * p[1]]);
        [self.a * g[0], self.a * g[1]]
    }

    /// `F_a(mu) = a^gamma' f(M mu)`.
    pub fn f_k(&self, mu: f64) -> f64 {
        self.a.powf(self.gc()) * self.coupling.f_unchecked(self.peak * mu)
    }

    /// Factor relating the rescaled HJB residual to the original one.
    pub fn hjb_factor(&self) -> f64 {
        self.a.powf(self.gc())
    }

    /// Factor relating the rescaled Fokker-Planck residual to the original one.
    pub fn fp_factor(&self) -> f64 {
        self.a * self.a / self.peak
    }
}

/// Zoom around the maximum of `m`.
pub fn rescale_blowup(
    s: &MfgSolution,
    coupling: &Coupling,
    hamiltonian: &Hamiltonian,
    potential: &Potential,
    mollifier: &Mollifier,
) -> Result<RescaledSolution> {
    let x0 = s.m.argmax();
    rescale_with_peak(s, coupling, hamiltonian, potential, mollifier, x0, s.m.values()[x0])
}

/// Zoom around node `x0` with an explicit peak value `peak` (the scale).
pub fn rescale_with_peak(
    s: &MfgSolution,
    coupling: &Coupling,
    hamiltonian: &Hamiltonian,
    potential: &Potential,
    mollifier: &Mollifier,
    x0: usize,
    peak: f64,
) -> Result<RescaledSolution> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::param("M", format!("peak density must be positive, got {peak}")));
    }
    let grid = *s.grid();
    if x0 >= grid.len() {
        return Err(Error::param("x0", "node index out of range"));
    }
    let gc = hamiltonian.gamma_conj();
    let a = peak.powf(-coupling.alpha() / gc);
    let zoom = TorusGrid::with_length(grid.dim(), grid.n(), grid.length() / a)?;
    let vscale = a.powf(gc - 2.0);
    let v = s.u.recentered(x0).relabel(zoom)?.map(|x| vscale * x);
    let mu = s.m.recentered(x0).relabel(zoom)?.map(|x| x / peak);
    let ag = a.powf(gc);
    let w = potential
        .values(&grid)?
        .recentered(x0)
        .relabel(zoom)?
        .map(|x| ag * x);
    Ok(RescaledSolution {
        v,
        mu,
        lambda: ag * s.lambda,
        a,
        peak,
        x0,
        w,
        hamiltonian: *hamiltonian,
        coupling: *coupling,
        mollifier: mollifier.clone(),
    })
}

/// Max-norm residuals `(hjb, fp)` of the rescaled system on the zoomed lattice.
pub fn rescaling_residual(r: &RescaledSolution) -> Result<(f64, f64)> {
    let grid = *r.v.grid();
    let dv = gradient(&r.v);
    let lap = laplacian(&r.v);
    let smooth = mollify(&r.mu, &r.mollifier)?;
    let fk = smooth.map(|x| r.f_k(x));
    let coupling = match r.coupling.sign() {
        CouplingSign::Focusing => fk.map(|x| -x),
        CouplingSign::Defocusing => mollify(&fk, &r.mollifier)?,
    };
    let mut hjb = 0.0f64;
    for i in 0..grid.len() {
        let res = -lap.values()[i] + r.h_k(dv.at(i)) + r.lambda - r.w.values()[i] - coupling.values()[i];
        hjb = hjb.max(res.abs());
    }
    let drift = if r.hamiltonian.gamma() == 2.0 {
        // for gamma = 2, grad H_a(p) = p and the face drift is exact
        DriftField::from_potential(&r.v)
    } else {
        let comps = (0..grid.dim())
            .map(|d| (0..grid.len()).map(|i| -r.grad_h_k(dv.at(i))[d]).collect())
            .collect();
        DriftField::from_nodal(&VectorField::new(grid, comps)?)
    };
    Ok((hjb, fp_residual(&r.mu, &drift)))
}
