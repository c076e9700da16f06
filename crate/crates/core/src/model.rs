//! Problem data: the power-law Hamiltonian, the local coupling, the
//! potential, the critical exponents, and audits of the structural bounds
//! on `H`, `f` and `V`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, sample_cubic, ScalarField, TorusGrid, VectorField};

/// `H(p) = |p|^gamma / gamma`. `c_h` only enters the assumption audit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    gamma: f64,
    c_h: f64,
}

impl Hamiltonian {
    pub fn new(gamma: f64, c_h: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::param("gamma", format!("need gamma > 1, got {gamma}")));
        }
        if !(c_h.is_finite() && c_h > 0.0) {
            return Err(Error::param("c_h", format!("need c_h > 0, got {c_h}")));
        }
        Ok(Self { gamma, c_h })
    }

    /// Power law with the audit constant `max(1, 1/gamma, gamma - 1) + 1`.
    pub fn power_law(gamma: f64) -> Result<Self> {
        let c_h = 1.0f64.max(1.0 / gamma).max(gamma - 1.0) + 1.0;
        Self::new(gamma, c_h)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    pub fn gamma_conj(&self) -> f64 {
        self.gamma / (self.gamma - 1.0)
    }

    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if self.gamma == 2.0 {
            0.5 * r2
        } else {
            r2.powf(0.5 * self.gamma) / self.gamma
        }
    }

    /// `|p|^(gamma-2) p`, extended by 0 at the origin.
    #[inline]
    pub fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        if self.gamma == 2.0 {
            return p;
        }
        let r2 = p[0] * p[0] + p[1] * p[1];
        if r2 == 0.0 {
            return [0.0, 0.0];
        }
        let s = r2.powf(0.5 * (self.gamma - 2.0));
        [s * p[0], s * p[1]]
    }

    /// Nodal `H(grad u)`.
    pub fn eval_field(&self, du: &VectorField) -> ScalarField {
        let grid = *du.grid();
        let values = (0..grid.len()).map(|i| self.eval(du.at(i))).collect();
        ScalarField::from_vec(grid, values)
    }

    /// Nodal drift `-grad H(grad u)`.
    pub fn drift_field(&self, du: &VectorField) -> VectorField {
        let grid = *du.grid();
        let mut comps = vec![vec![0.0; grid.len()]; grid.dim()];
        for i in 0..grid.len() {
            let g = self.grad(du.at(i));
            for (a, c) in comps.iter_mut().enumerate() {
                c[i] = -g[a];
            }
        }
        VectorField::from_components(grid, comps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSign {
    Focusing,
    Defocusing,
}

impl std::str::FromStr for CouplingSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "focusing" => Ok(Self::Focusing),
            "defocusing" => Ok(Self::Defocusing),
            other => Err(Error::param(
                "sign",
                format!("expected focusing or defocusing, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for CouplingSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Focusing => "focusing",
            Self::Defocusing => "defocusing",
        })
    }
}

/// `f(m) = c_f m^alpha` with antiderivative `F(m) = c_f m^(alpha+1)/(alpha+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    alpha: f64,
    c_f: f64,
    sign: CouplingSign,
}

impl Coupling {
    pub fn new(alpha: f64, c_f: f64, sign: CouplingSign) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::param("alpha", format!("need alpha > 0, got {alpha}")));
        }
        if !(c_f.is_finite() && c_f > 0.0) {
            return Err(Error::param("c_f", format!("need c_f > 0, got {c_f}")));
        }
        Ok(Self { alpha, c_f, sign })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn sign(&self) -> CouplingSign {
        self.sign
    }

    /// `alpha + 1`.
    pub fn beta(&self) -> f64 {
        self.alpha + 1.0
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.c_f, self.sign)
    }

    pub fn f(&self, m: f64) -> Result<f64> {
        if m < 0.0 || m.is_nan() {
            return Err(Error::param("m", format!("density must be nonnegative, got {m}")));
        }
        Ok(self.f_unchecked(m))
    }

    #[allow(non_snake_case)]
    pub fn F(&self, m: f64) -> Result<f64> {
        if m < 0.0 || m.is_nan() {
            return Err(Error::param("m", format!("density must be nonnegative, got {m}")));
        }
        Ok(self.antiderivative_unchecked(m))
    }

    #[inline]
    pub(crate) fn f_unchecked(&self, m: f64) -> f64 {
        if self.alpha == 1.0 {
            self.c_f * m
        } else {
            self.c_f * m.powf(self.alpha)
        }
    }

    #[inline]
    pub(crate) fn antiderivative_unchecked(&self, m: f64) -> f64 {
        self.c_f * m.powf(self.alpha + 1.0) / (self.alpha + 1.0)
    }

    /// Nodal `f(m)`; rejects negative densities.
    pub fn f_field(&self, m: &ScalarField) -> Result<ScalarField> {
        if let Some(v) = m.values().iter().find(|v| **v < 0.0) {
            return Err(Error::param("m", format!("density must be nonnegative, got {v}")));
        }
        Ok(m.map(|v| self.f_unchecked(v)))
    }
}

/// The external potential `V >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// `(amplitude / (2 dim)) * sum_d (1 - cos(2 pi modes x_d))`, ranging over `[0, amplitude]`.
    Cosine { amplitude: f64, modes: u32 },
    /// Nodal values on a fixed lattice.
    Field(ScalarField),
}

impl Potential {
    pub fn cosine(amplitude: f64, modes: u32) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::param("potential", "cosine amplitude must be >= 0"));
        }
        if modes == 0 {
            return Err(Error::param("potential", "cosine mode count must be >= 1"));
        }
        Ok(Self::Cosine { amplitude, modes })
    }

    pub fn field(v: ScalarField) -> Result<Self> {
        if v.min() < 0.0 {
            return Err(Error::param("potential", "values must be nonnegative"));
        }
        Ok(Self::Field(v))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Cosine { amplitude, .. } => *amplitude == 0.0,
            Self::Field(v) => v.values().iter().all(|x| *x == 0.0),
        }
    }

    /// Smallest admissible bound `C_V`.
    pub fn c_v(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Cosine { amplitude, .. } => *amplitude,
            Self::Field(v) => v.max().max(0.0),
        }
    }

    /// Nodal values on `grid`.
    pub fn values(&self, grid: &TorusGrid) -> Result<ScalarField> {
        match self {
            Self::Zero => Ok(ScalarField::zeros(*grid)),
            Self::Cosine { .. } => Ok(ScalarField::from_fn(*grid, |x| self.eval_at(x, grid.dim()))),
            Self::Field(v) => {
                if !v.grid().same_shape(grid) {
                    return Err(Error::FieldMismatch(
                        "potential field lives on a different lattice".into(),
                    ));
                }
                Ok(v.clone())
            }
        }
    }

    fn eval_at(&self, x: [f64; 2], dim: usize) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Cosine { amplitude, modes } => {
                let w = 2.0 * PI * *modes as f64;
                let s: f64 = (0..dim).map(|d| 1.0 - (w * x[d]).cos()).sum();
                amplitude / (2.0 * dim as f64) * s
            }
            Self::Field(v) => sample_cubic(v, x),
        }
    }

    /// Value and gradient at an arbitrary point (cubic interpolation for fields).
    pub fn value_and_gradient(&self, x: [f64; 2], dim: usize) -> ([f64; 2], f64) {
        match self {
            Self::Zero => ([0.0; 2], 0.0),
            Self::Cosine { amplitude, modes } => {
                let w = 2.0 * PI * *modes as f64;
                let mut g = [0.0; 2];
                for d in 0..dim {
                    g[d] = amplitude / (2.0 * dim as f64) * w * (w * x[d]).sin();
                }
                (g, self.eval_at(x, dim))
            }
            Self::Field(v) => {
                let dv = gradient(v);
                let mut g = [0.0; 2];
                for (d, gd) in g.iter_mut().enumerate().take(dim) {
                    let comp = ScalarField::from_vec(*v.grid(), dv.component(d).to_vec());
                    *gd = sample_cubic(&comp, x);
                }
                (g, sample_cubic(v, x))
            }
        }
    }

    /// Config-style descriptor.
    pub fn describe(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Cosine { amplitude, modes } => format!("cosine:{amplitude},{modes}"),
            Self::Field(_) => "field".into(),
        }
    }
}

/// Potential together with the bound `C_V` used by the audit.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    pub potential: Potential,
    pub c_v: f64,
}

impl PotentialSpec {
    pub fn new(potential: Potential) -> Self {
        let c_v = potential.c_v();
        Self { potential, c_v }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub alpha1: f64,
    /// `f64::INFINITY` when `gamma' >= N`.
    pub alpha2: f64,
    pub gamma_conj: f64,
}

/// Which of the three existence regimes an exponent falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `alpha < alpha1`.
    Subcritical,
    /// `alpha1 <= alpha < alpha2`.
    SmallCoupling,
    /// `alpha == alpha2`, not covered by the theory.
    Unknown,
    /// `alpha > alpha2`.
    Supercritical,
}

impl CriticalExponents {
    pub fn regime(&self, alpha: f64) -> Regime {
        let tol = 1e-12 * self.alpha2.abs().max(1.0);
        if alpha < self.alpha1 {
            Regime::Subcritical
        } else if self.alpha2.is_finite() && (alpha - self.alpha2).abs() <= tol {
            Regime::Unknown
        } else if alpha < self.alpha2 {
            Regime::SmallCoupling
        } else {
            Regime::Supercritical
        }
    }
}

pub fn conjugate_exponent(gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 1.0) {
        return Err(Error::param("gamma", format!("need gamma > 1, got {gamma}")));
    }
    Ok(gamma / (gamma - 1.0))
}

pub fn critical_exponents(gamma: f64, dim_n: usize) -> Result<CriticalExponents> {
    if dim_n == 0 {
        return Err(Error::param("dim", "need dimension >= 1"));
    }
    let gc = conjugate_exponent(gamma)?;
    let n = dim_n as f64;
    let alpha2 = if gc >= n { f64::INFINITY } else { gc / (n - gc) };
    Ok(CriticalExponents {
        alpha1: gc / n,
        alpha2,
        gamma_conj: gc,
    })
}

/// True iff `(N - gamma') f(m) m - N F(m) > 0` for every sample; for the
/// power law this is `alpha > gamma'/(N - gamma')` with `gamma' < N`.
pub fn pohozaev_supercriticality(
    coupling: &Coupling,
    gamma: f64,
    dim_n: usize,
    m_samples: &[f64],
) -> Result<bool> {
    let gc = conjugate_exponent(gamma)?;
    let n = dim_n as f64;
    if gc >= n {
        return Ok(false);
    }
    let closed = coupling.alpha() > gc / (n - gc);
    for &m in m_samples {
        let lhs = (n - gc) * coupling.f(m)? * m - n * coupling.F(m)?;
        if m > 0.0 && (lhs > 0.0) != closed {
            log::debug!("sampled supercriticality test disagrees with closed form at m = {m}");
        }
    }
    Ok(closed)
}

/// Anything that can be audited as a Hamiltonian.
pub trait HamiltonianEval {
    fn value(&self, p: [f64; 2]) -> f64;
    fn gradient(&self, p: [f64; 2]) -> [f64; 2];
}

impl HamiltonianEval for Hamiltonian {
    fn value(&self, p: [f64; 2]) -> f64 {
        self.eval(p)
    }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        self.grad(p)
    }
}

/// User-supplied Hamiltonian given by two closures.
pub struct FnHamiltonian<H, G> {
    pub value: H,
    pub gradient: G,
}

impl<H: Fn([f64; 2]) -> f64, G: Fn([f64; 2]) -> [f64; 2]> HamiltonianEval for FnHamiltonian<H, G> {
    fn value(&self, p: [f64; 2]) -> f64 {
        (self.value)(p)
    }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        (self.gradient)(p)
    }
}

/// Anything that can be audited as a coupling.
pub trait CouplingEval {
    fn value(&self, m: f64) -> f64;
}

impl CouplingEval for Coupling {
    fn value(&self, m: f64) -> f64 {
        self.f_unchecked(m)
    }
}

impl<F: Fn(f64) -> f64> CouplingEval for F {
    fn value(&self, m: f64) -> f64 {
        self(m)
    }
}

/// Outcome of one inequality over the sample set. `margin` is the smallest
/// value of `rhs - lhs`; the check passes iff it is nonnegative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionAudit {
    pub checks: Vec<InequalityCheck>,
}

impl AssumptionAudit {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sample points for the audit.
#[derive(Clone, Debug, Default)]
pub struct AuditSamples {
    pub p: Vec<[f64; 2]>,
    pub m: Vec<f64>,
}

impl AuditSamples {
    /// Radial and angular grid of `p` with `|p| <= p_max` plus densities in `[0, m_max]`.
    pub fn uniform(p_max: f64, m_max: f64, count: usize) -> Self {
        let mut p = Vec::new();
        for i in 0..=count {
            let r = p_max * i as f64 / count as f64;
            for j in 0..8 {
                let t = 2.0 * PI * j as f64 / 8.0;
                p.push([r * t.cos(), r * t.sin()]);
            }
        }
        let m = (0..=count).map(|i| m_max * i as f64 / count as f64).collect();
        Self { p, m }
    }
}

/// Checks the structural bounds on `H`, `f` and `V` over finite samples:
///
/// * `c_h^-1 |p|^g - c_h <= H(p) <= c_h (|p|^g + 1)`
/// * `|grad H(p)| <= c_h (|p|^(g-1) + 1)`
/// * `grad H(p).p - H(p) >= c_h^-1 |p|^g - c_h`
/// * `0 <= f(m) <= c_f (m^alpha + 1)`
/// * `0 <= V <= c_v` at the nodes of `grid`
#[allow(clippy::too_many_arguments)]
pub fn audit_assumptions(
    h: &dyn HamiltonianEval,
    gamma: f64,
    c_h: f64,
    f: &dyn CouplingEval,
    alpha: f64,
    c_f: f64,
    v: &PotentialSpec,
    grid: &TorusGrid,
    samples: &AuditSamples,
) -> Result<AssumptionAudit> {
    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    let mut grad_bound = f64::INFINITY;
    let mut legendre = f64::INFINITY;
    for &p in &samples.p {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let rg = r.powf(gamma);
        let hv = h.value(p);
        let g = h.gradient(p);
        lower = lower.min(hv - (rg / c_h - c_h));
        upper = upper.min(c_h * (rg + 1.0) - hv);
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        grad_bound = grad_bound.min(c_h * (r.powf(gamma - 1.0) + 1.0) - gn);
        legendre = legendre.min(g[0] * p[0] + g[1] * p[1] - hv - (rg / c_h - c_h));
    }
    let mut f_nonneg = f64::INFINITY;
    let mut f_growth = f64::INFINITY;
    for &m in &samples.m {
        let fv = f.value(m);
        f_nonneg = f_nonneg.min(fv);
        f_growth = f_growth.min(c_f * (m.powf(alpha) + 1.0) - fv);
    }
    let vals = v.potential.values(grid)?;
    let v_nonneg = vals.min();
    let v_bound = v.c_v - vals.max();
    let check = |name, margin: f64| InequalityCheck {
        name,
        pass: margin >= 0.0,
        margin,
    };
    Ok(AssumptionAudit {
        checks: vec![
            check("h_lower", lower),
            check("h_upper", upper),
            check("h_gradient", grad_bound),
            check("h_legendre", legendre),
            check("f_nonnegative", f_nonneg),
            check("f_growth", f_growth),
            check("v_nonnegative", v_nonneg),
            check("v_bound", v_bound),
        ],
    })
}
