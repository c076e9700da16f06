//! Stationary Fokker-Planck equation `-lap m + div(b m) = 0`, `b = -grad H(grad u)`,
//! discretised with Scharfetter-Gummel (exponentially fitted) face fluxes
//!
//! ```text
//! J_{i+1/2} = ( B(-z) m_i - B(z) m_{i+1} ) / h,   z = h b_{i+1/2},   B(z) = z / (e^z - 1).
//! ```
//!
//! The assembled operator `L` maps `m` to the discrete flux divergence. Its
//! columns sum to zero and its off-diagonal entries are nonpositive, so `L`
//! is a singular M-matrix whose one-dimensional kernel is spanned by a
//! positive vector.

use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, ScalarField, SpectralSolver, TorusGrid, VectorField};
use crate::linalg::{gmres, norm2, GmresOptions};
use crate::model::Hamiltonian;

/// Bernoulli function `z / (e^z - 1)` with `B(0) = 1`.
#[inline]
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - 0.5 * z + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

/// Drift sampled on cell faces: `faces[axis][i]` is the drift component along
/// `axis` between node `i` and its `+1` neighbour.
#[derive(Clone, Debug)]
pub struct DriftField {
    grid: TorusGrid,
    faces: Vec<Vec<f64>>,
}

impl DriftField {
    pub fn zero(grid: TorusGrid) -> Self {
        Self {
            grid,
            faces: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    /// Face values by averaging adjacent nodal values.
    pub fn from_nodal(b: &VectorField) -> Self {
        let grid = *b.grid();
        let faces = (0..grid.dim())
            .map(|axis| {
                let c = b.component(axis);
                (0..grid.len())
                    .map(|i| 0.5 * (c[i] + c[grid.shift(i, axis, 1)]))
                    .collect()
            })
            .collect();
        Self { grid, faces }
    }

    /// Face values `-(u_{i+1} - u_i)/h`, the drift of a gradient field taken
    /// from exact potential differences.
    pub fn from_potential(u: &ScalarField) -> Self {
        let grid = *u.grid();
        let h = grid.h();
        let v = u.values();
        let faces = (0..grid.dim())
            .map(|axis| {
                (0..grid.len())
                    .map(|i| -(v[grid.shift(i, axis, 1)] - v[i]) / h)
                    .collect()
            })
            .collect();
        Self { grid, faces }
    }

    /// Optimal feedback `-grad H(grad u)`: potential differences when
    /// `gamma = 2`, averaged nodal values otherwise.
    pub fn from_value_function(u: &ScalarField, ham: &Hamiltonian) -> Self {
        if ham.gamma() == 2.0 {
            Self::from_potential(u)
        } else {
            Self::from_nodal(&ham.drift_field(&gradient(u)))
        }
    }

    /// Raw face values; `faces.len()` must equal the grid dimension.
    pub fn from_faces(grid: TorusGrid, faces: Vec<Vec<f64>>) -> Result<Self> {
        if faces.len() != grid.dim() || faces.iter().any(|f| f.len() != grid.len()) {
            return Err(Error::FieldMismatch("face drift has the wrong shape".into()));
        }
        if faces.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::FieldMismatch("non-finite face drift".into()));
        }
        Ok(Self { grid, faces })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn faces(&self) -> &[Vec<f64>] {
        &self.faces
    }

    pub fn max_abs(&self) -> f64 {
        self.faces.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Matrix-free Scharfetter-Gummel operator.
///
/// Row `i`: `(L m)_i = sum_axes a_i m_i - c_i m_{i+1} - a_{i-1} m_{i-1} + c_{i-1} m_i`
/// with `a = B(-z)/h^2` and `c = B(z)/h^2` per face.
#[derive(Clone, Debug)]
pub struct FpOperator {
    grid: TorusGrid,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
}

pub fn assemble_fp_operator(b: &DriftField) -> FpOperator {
    let grid = b.grid;
    let h = grid.h();
    let inv = 1.0 / (h * h);
    let mut a = Vec::with_capacity(grid.dim());
    let mut c = Vec::with_capacity(grid.dim());
    let mut plus = Vec::with_capacity(grid.dim());
    let mut minus = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let f = &b.faces[axis];
        a.push(f.iter().map(|&bf| bernoulli(-h * bf) * inv).collect());
        c.push(f.iter().map(|&bf| bernoulli(h * bf) * inv).collect());
        plus.push((0..grid.len()).map(|i| grid.shift(i, axis, 1)).collect());
        minus.push((0..grid.len()).map(|i| grid.shift(i, axis, -1)).collect());
    }
    FpOperator {
        grid,
        a,
        c,
        plus,
        minus,
    }
}

impl FpOperator {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.len()];
        for axis in 0..self.grid.dim() {
            let (a, c) = (&self.a[axis], &self.c[axis]);
            let (p, q) = (&self.plus[axis], &self.minus[axis]);
            for i in 0..m.len() {
                let im = q[i];
                out[i] += a[i] * m[i] - c[i] * m[p[i]] - a[im] * m[im] + c[im] * m[i];
            }
        }
        out
    }

    /// Nonzero entries as `(row, col, value)`, duplicates summed.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut map = std::collections::BTreeMap::new();
        for axis in 0..self.grid.dim() {
            for i in 0..self.grid.len() {
                let ip = self.plus[axis][i];
                let im = self.minus[axis][i];
                *map.entry((i, i)).or_insert(0.0) += self.a[axis][i] + self.c[axis][im];
                *map.entry((i, ip)).or_insert(0.0) -= self.c[axis][i];
                *map.entry((i, im)).or_insert(0.0) -= self.a[axis][im];
            }
        }
        map.into_iter().map(|((r, c), v)| (r, c, v)).collect()
    }

    /// Max-norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        // diagonal a_i + c_{i-1} plus off-diagonal magnitudes c_i + a_{i-1}, per axis
        let mut rows = vec![0.0f64; self.grid.len()];
        for axis in 0..self.grid.dim() {
            let (a, c, q) = (&self.a[axis], &self.c[axis], &self.minus[axis]);
            for (i, r) in rows.iter_mut().enumerate() {
                let im = q[i];
                *r += a[i] + c[im] + c[i] + a[im];
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Round-off level of `||L m||_inf` for a density with max value `m_max`.
    pub fn roundoff_floor(&self, m_max: f64) -> f64 {
        ROUNDOFF_FACTOR * f64::EPSILON * self.norm_inf() * m_max
    }

    /// Dense row-major copy, for small grids.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut out = vec![vec![0.0; n]; n];
        for (r, c, v) in self.triplets() {
            out[r][c] += v;
        }
        out
    }
}

/// Multiple of `eps ||L|| ||m||` below which `||L m||_inf` is treated as zero.
pub const ROUNDOFF_FACTOR: f64 = 16.0;

#[derive(Clone, Debug)]
pub struct InvariantMeasure {
    pub m: ScalarField,
    pub residual_inf: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpOptions {
    /// Target for `||L m||_inf`.
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 2000,
            restart: 50,
        }
    }
}

/// `||L m||_inf`.
pub fn fp_residual(m: &ScalarField, b: &DriftField) -> f64 {
    assemble_fp_operator(b)
        .apply(m.values())
        .iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn solve_invariant_measure(b: &DriftField) -> Result<InvariantMeasure> {
    solve_invariant_measure_from(b, None, &FpOptions::default())
}

/// Kernel of the operator, normalised to unit mass.
///
/// Writing `m = g + w` with `g` the (positive, unit-mass) initial guess and
/// `w` mean-zero, the singular problem becomes `L w = -L g` on the mean-zero
/// subspace, where `L` is invertible. It is solved by GMRES right-preconditioned
/// with the FFT pseudo-inverse of `-lap`.
pub fn solve_invariant_measure_from(
    b: &DriftField,
    initial: Option<&ScalarField>,
    opts: &FpOptions,
) -> Result<InvariantMeasure> {
    let grid = b.grid;
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::param("fp_tol", format!("need tol > 0, got {}", opts.tol)));
    }
    let volume = grid.length().powi(grid.dim() as i32);
    let guess: Vec<f64> = match initial {
        Some(m0) => {
            if !m0.grid().same_shape(&grid) {
                return Err(Error::FieldMismatch("initial density lives on another grid".into()));
            }
            if m0.min() <= 0.0 {
                return Err(Error::param("initial", "initial density must be positive"));
            }
            let mass = integrate(m0);
            m0.values().iter().map(|v| v / mass).collect()
        }
        None => vec![1.0 / volume; grid.len()],
    };
    let op = assemble_fp_operator(b);

    let floor_scale = op.norm_inf() * ROUNDOFF_FACTOR * f64::EPSILON;
    let accept = |m: &[f64]| {
        let residual = inf_norm(&op.apply(m));
        (residual, residual <= opts.tol.max(floor_scale * inf_norm(m)))
    };
    let peclet = grid.h() * b.max_abs();
    let krylov = if peclet <= DIRECT_PECLET {
        krylov_kernel(&op, &guess, opts, &accept)
    } else {
        Err(Error::NotConverged {
            solver: "Fokker-Planck",
            iterations: 0,
            residual: f64::INFINITY,
        })
    };
    let (mut m, iterations) = match krylov {
        Ok(found) => found,
        Err(Error::NotConverged { iterations, .. }) => {
            log::debug!("Fokker-Planck: direct elimination (mesh Peclet {peclet:.3})");
            let m = gth_kernel(&op)?;
            let mass = grid.cell_volume() * m.iter().sum::<f64>();
            let m: Vec<f64> = m.iter().map(|v| v / mass).collect();
            let (residual, ok) = accept(&m);
            if !ok {
                return Err(Error::NotConverged {
                    solver: "Fokker-Planck",
                    iterations,
                    residual,
                });
            }
            (m, iterations)
        }
        Err(e) => return Err(e),
    };
    if let Some((i, v)) = m.iter().enumerate().find(|(_, v)| **v <= 0.0 || !v.is_finite()) {
        return Err(Error::SchemeViolation(format!(
            "invariant density is nonpositive ({v:e}) at node {i}"
        )));
    }
    let mass = grid.cell_volume() * m.iter().sum::<f64>();
    for v in &mut m {
        *v /= mass;
    }
    let m = ScalarField::from_vec(grid, m);
    let residual_inf = fp_residual(&m, b);
    Ok(InvariantMeasure {
        m,
        residual_inf,
        iterations,
    })
}

/// Mesh Peclet number `h max|b|` above which the Krylov path is skipped.
pub const DIRECT_PECLET: f64 = 2.0;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn project(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// GMRES on `L w = -L g`, `m = g + w`; see [`solve_invariant_measure_from`].
fn krylov_kernel(
    op: &FpOperator,
    guess: &[f64],
    opts: &FpOptions,
    accept: &dyn Fn(&[f64]) -> (f64, bool),
) -> Result<(Vec<f64>, usize)> {
    let grid = op.grid;
    let spectral = SpectralSolver::new(grid);
    let precond = |v: &[f64]| {
        let mut y = spectral.solve(v, 0.0, 1.0);
        project(&mut y);
        y
    };
    let mut rhs = op.apply(guess);
    for r in &mut rhs {
        *r = -*r;
    }
    project(&mut rhs);
    let mut w = vec![0.0; grid.len()];
    let sqrt_n = (grid.len() as f64).sqrt();
    let mut inner_tol = 0.1 * opts.tol * sqrt_n;
    let mut iterations = 0;
    loop {
        let out = gmres(
            |x| op.apply(x),
            precond,
            &rhs,
            &mut w,
            &GmresOptions {
                restart: opts.restart,
                max_iters: opts.max_iters - iterations,
                tol: inner_tol,
            },
        );
        iterations += out.iterations;
        let m: Vec<f64> = guess.iter().zip(&w).map(|(g, x)| g + x).collect();
        let (residual, ok) = accept(&m);
        if ok {
            return Ok((m, iterations));
        }
        let stuck = Error::NotConverged {
            solver: "Fokker-Planck",
            iterations,
            residual,
        };
        if !out.converged || iterations >= opts.max_iters {
            return Err(stuck);
        }
        // the Euclidean target was not strict enough for the max-norm goal
        let achieved = out.residual_norm.max(f64::MIN_POSITIVE);
        inner_tol = achieved * 0.5 * opts.tol / residual;
        if inner_tol <= 1e-3 * norm2(&rhs) * f64::EPSILON {
            return Err(stuck);
        }
    }
}

/// Kernel of the operator by banded Gaussian elimination with
/// Grassmann-Taksar-Heyman pivots: each pivot is recomputed as minus the sum
/// of the off-diagonal entries left in its column. Elimination then never
/// subtracts like-signed numbers and the kernel comes out positive.
///
/// Nodes are reordered `0, n-1, 1, n-2, ...` along each axis, which brings
/// periodic neighbours within two positions and the bandwidth to about `2n`
/// in two dimensions.
fn gth_kernel(op: &FpOperator) -> Result<Vec<f64>> {
    let grid = op.grid;
    let n = grid.n();
    let len = grid.len();
    let fold: Vec<usize> = {
        let mut slot = vec![0; n];
        for p in 0..n {
            slot[if p % 2 == 0 { p / 2 } else { n - 1 - p / 2 }] = p;
        }
        slot
    };
    let pos = |i: usize| -> usize {
        let idx = grid.multi_index(i);
        if grid.dim() == 1 {
            fold[idx[0]]
        } else {
            fold[idx[1]] * n + fold[idx[0]]
        }
    };
    let entries: Vec<(usize, usize, f64)> = op
        .triplets()
        .into_iter()
        .map(|(r, c, v)| (pos(r), pos(c), v))
        .collect();
    let bw = entries.iter().map(|(r, c, _)| r.abs_diff(*c)).max().unwrap_or(0);
    let width = 2 * bw + 1;
    let mut band = vec![0.0f64; len * width];
    let at = |i: usize, j: usize| i * width + j + bw - i;
    for &(r, c, v) in &entries {
        band[at(r, c)] = v;
    }
    for k in 0..len - 1 {
        let last = (k + bw).min(len - 1);
        let pivot: f64 = -(k + 1..=last).map(|i| band[at(i, k)]).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(Error::SchemeViolation(format!(
                "elimination pivot {pivot:e} at position {k}: operator is reducible"
            )));
        }
        band[at(k, k)] = pivot;
        for i in k + 1..=last {
            let l = band[at(i, k)] / pivot;
            if l == 0.0 {
                continue;
            }
            let (row_k, row_i) = (at(k, k + 1), at(i, k + 1));
            let count = last - k;
            for j in 0..count {
                band[row_i + j] -= l * band[row_k + j];
            }
        }
    }
    // back substitution on U m = 0 with the last entry pinned
    let mut folded = vec![0.0f64; len];
    folded[len - 1] = 1.0;
    for k in (0..len - 1).rev() {
        let last = (k + bw).min(len - 1);
        let s: f64 = (k + 1..=last).map(|j| band[at(k, j)] * folded[j]).sum();
        folded[k] = -s / band[at(k, k)];
        if folded[k] > 1e250 {
            for v in &mut folded[k..] {
                *v *= 1e-250;
            }
        }
    }
    Ok((0..len).map(|i| folded[pos(i)]).collect())
}
