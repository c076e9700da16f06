//! Periodic uniform lattices in one or two dimensions and the discrete
//! calculus used by every solver in the crate.
//!
//! Nodes are stored with the first axis varying fastest: node `(i, j)` of a
//! two-dimensional grid lives at linear index `i + n * j` and sits at the
//! physical point `(i h, j h)`. All operators are periodic.
//!
//! * [`gradient`] and [`divergence`] use centered second-order differences
//!   and are mutually adjoint under [`integrate`].
//! * [`laplacian`] is the compact 3-point / 5-point stencil.
//! * [`SpectralSolver`] inverts `shift - coef * laplacian` exactly with FFTs.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of points per axis accepted by [`TorusGrid`].
pub const MIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl TorusGrid {
    /// Unit-period torus `[0, 1)^dim` sampled with `n` points per axis.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Self::with_length(dim, n, 1.0)
    }

    /// Torus of period `length` per axis. Used for rescaled lattices and for
    /// the large-domain runs of the ground-state checks.
    pub fn with_length(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points per axis, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "period must be positive and finite, got {length}"
            )));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of one node, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Total node count `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice multi-index of a linear node index (unused axes are zero).
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx % self.n, idx / self.n]
        }
    }

    pub fn linear_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[0] + self.n * mi[1]
        }
    }

    /// Physical coordinates of a node; the second entry is zero in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        let mi = self.multi_index(idx);
        [mi[0] as f64 * h, mi[1] as f64 * h]
    }

    /// Index of the node reached from `idx` by moving `offset` steps along `axis`.
    #[inline]
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.n as isize;
        let mut mi = self.multi_index(idx);
        let v = (mi[axis] as isize + offset).rem_euclid(n);
        mi[axis] = v as usize;
        self.linear_index(mi)
    }

    /// Index of the node translated by a lattice vector.
    pub fn translate(&self, idx: usize, offset: [isize; 2]) -> usize {
        let n = self.n as isize;
        let mi = self.multi_index(idx);
        let a = (mi[0] as isize + offset[0]).rem_euclid(n) as usize;
        let b = if self.dim == 2 {
            (mi[1] as isize + offset[1]).rem_euclid(n) as usize
        } else {
            0
        };
        self.linear_index([a, b])
    }

    /// Precomputed neighbour table: `table[axis][idx] = (minus, plus)`.
    fn neighbours(&self) -> Vec<Vec<(usize, usize)>> {
        (0..self.dim)
            .map(|axis| {
                (0..self.len())
                    .map(|i| (self.shift(i, axis, -1), self.shift(i, axis, 1)))
                    .collect()
            })
            .collect()
    }

    pub fn same_shape(&self, other: &TorusGrid) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

/// One real value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::FieldMismatch(format!(
                "non-finite value at node {pos}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Constructor for values that are finite by construction.
    pub(crate) fn from_vec(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self::from_vec(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples a closure of the physical coordinates at every node.
    pub fn from_fn(grid: TorusGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::from_vec(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_vec(self.grid, values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Node index of the (first) maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.length().powi(self.grid.dim() as i32)
    }

    /// Largest absolute nodal difference.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Copy with the lattice translated so that node `origin` moves to index 0.
    pub fn recentered(&self, origin: usize) -> Self {
        let mi = self.grid.multi_index(origin);
        let off = [mi[0] as isize, mi[1] as isize];
        let values = (0..self.grid.len())
            .map(|i| self.values[self.grid.translate(i, off)])
            .collect();
        Self::from_vec(self.grid, values)
    }

    /// Same nodal values on another lattice with identical node count.
    pub fn relabel(&self, grid: TorusGrid) -> Result<Self> {
        if grid.dim() != self.grid.dim() || grid.n() != self.grid.n() {
            return Err(Error::FieldMismatch(
                "relabelling requires identical node layout".into(),
            ));
        }
        Ok(Self::from_vec(grid, self.values.clone()))
    }
}

/// One `dim`-vector per node, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: TorusGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::FieldMismatch(format!(
                "expected {} components of length {}",
                grid.dim(),
                grid.len()
            )));
        }
        if components.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::FieldMismatch("non-finite vector component".into()));
        }
        Ok(Self { grid, components })
    }

    pub(crate) fn from_components(grid: TorusGrid, components: Vec<Vec<f64>>) -> Self {
        Self { grid, components }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::from_components(grid, vec![vec![0.0; grid.len()]; grid.dim()])
    }

    pub fn constant(grid: TorusGrid, value: &[f64]) -> Self {
        Self::from_components(
            grid,
            (0..grid.dim()).map(|a| vec![value[a]; grid.len()]).collect(),
        )
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Vector at one node (second entry zero in 1D).
    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (a, c) in self.components.iter().enumerate() {
            out[a] = c[idx];
        }
        out
    }

    /// Pointwise Euclidean norm.
    pub fn norm(&self) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| {
                let p = self.at(i);
                (p[0] * p[0] + p[1] * p[1]).sqrt()
            })
            .collect();
        ScalarField::from_vec(self.grid, values)
    }

    /// Pointwise dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| {
                let p = self.at(i);
                let q = other.at(i);
                p[0] * q[0] + p[1] * q[1]
            })
            .collect();
        ScalarField::from_vec(self.grid, values)
    }

    pub fn max_norm(&self) -> f64 {
        self.norm().max()
    }
}

/// Centered periodic gradient.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = *f.grid();
    let inv = 0.5 / grid.h();
    let v = f.values();
    let components = grid
        .neighbours()
        .into_iter()
        .map(|nb| nb.iter().map(|&(m, p)| (v[p] - v[m]) * inv).collect())
        .collect();
    VectorField::from_components(grid, components)
}

/// Compact periodic Laplacian (3-point in 1D, 5-point in 2D).
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let inv = 1.0 / (grid.h() * grid.h());
    let v = f.values();
    let mut out = vec![0.0; grid.len()];
    for nb in grid.neighbours() {
        for (i, &(m, p)) in nb.iter().enumerate() {
            out[i] += (v[p] - 2.0 * v[i] + v[m]) * inv;
        }
    }
    ScalarField::from_vec(grid, out)
}

/// Centered periodic divergence, the negative adjoint of [`gradient`].
pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = *v.grid();
    let inv = 0.5 / grid.h();
    let mut out = vec![0.0; grid.len()];
    for (axis, nb) in grid.neighbours().into_iter().enumerate() {
        let c = v.component(axis);
        for (i, &(m, p)) in nb.iter().enumerate() {
            out[i] += (c[p] - c[m]) * inv;
        }
    }
    ScalarField::from_vec(grid, out)
}

/// `h^dim * sum(values)`; exact for trigonometric polynomials below the Nyquist limit.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid().cell_volume() * f.values().iter().sum::<f64>()
}

/// `(integral |f|^p)^(1/p)`, or `max |f|` for `p = f64::INFINITY`.
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::param("p", format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.values().iter().fold(0.0, |acc, v| acc.max(v.abs())));
    }
    let s: f64 = f.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((f.grid().cell_volume() * s).powf(1.0 / p))
}

/// Radially symmetric compactly supported smoothing kernel, discretised on a
/// lattice and renormalised so the weights sum to one.
///
/// The profile is `(1 - (k r)^2)^3` on `r < 1/k`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    k: u32,
    dim: usize,
    n: usize,
    stencil: Vec<([isize; 2], f64)>,
}

impl Mollifier {
    pub fn new(grid: &TorusGrid, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("mollifier_k", "must be a positive integer"));
        }
        let radius = 1.0 / k as f64;
        if radius > 0.5 * grid.length() {
            return Err(Error::param(
                "mollifier_k",
                format!("support radius 1/k = {radius} exceeds half the period"),
            ));
        }
        let h = grid.h();
        let reach = radius / h;
        // Count of nodes with positive weight along one axis through the centre.
        let across = 2 * (reach.ceil() as usize) - 1;
        if reach <= 1.0 || across < 3 {
            return Err(Error::param(
                "mollifier_k",
                format!(
                    "support of radius 1/{k} covers fewer than 3 nodes across at h = {h}"
                ),
            ));
        }
        let span = reach.ceil() as isize;
        let jrange = if grid.dim() == 2 { -span..=span } else { 0..=0 };
        let mut stencil = Vec::new();
        for j in jrange {
            for i in -span..=span {
                let r = h * ((i * i + j * j) as f64).sqrt();
                let s = r * k as f64;
                if s < 1.0 {
                    let w = (1.0 - s * s).powi(3);
                    stencil.push(([i, j], w));
                }
            }
        }
        let total: f64 = stencil.iter().map(|(_, w)| w).sum();
        for entry in &mut stencil {
            entry.1 /= total;
        }
        Ok(Self {
            k,
            dim: grid.dim(),
            n: grid.n(),
            stencil,
        })
    }

    /// Default smoothing index: support spanning eight cells.
    pub fn default_k(grid: &TorusGrid) -> u32 {
        ((grid.n() as f64 / (8.0 * grid.length())).round() as u32).max(1)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Lattice offsets and weights.
    pub fn stencil(&self) -> &[([isize; 2], f64)] {
        &self.stencil
    }

    pub fn weight_sum(&self) -> f64 {
        self.stencil.iter().map(|(_, w)| w).sum()
    }

    fn check(&self, grid: &TorusGrid) -> Result<()> {
        if grid.dim() != self.dim || grid.n() != self.n {
            return Err(Error::FieldMismatch(
                "mollifier was built for a different lattice".into(),
            ));
        }
        Ok(())
    }
}

/// Periodic discrete convolution with the mollifier weights.
///
/// The stencil acts in index space, so the same kernel applies unchanged on a
/// rescaled copy of the lattice.
pub fn mollify(f: &ScalarField, psi: &Mollifier) -> Result<ScalarField> {
    let grid = *f.grid();
    psi.check(&grid)?;
    let v = f.values();
    let n = grid.n() as isize;
    let out = if grid.dim() == 1 {
        (0..grid.len())
            .map(|i| {
                psi.stencil
                    .iter()
                    .map(|(o, w)| w * v[(i as isize - o[0]).rem_euclid(n) as usize])
                    .sum()
            })
            .collect()
    } else {
        let nu = grid.n();
        (0..grid.len())
            .map(|idx| {
                let (i, j) = ((idx % nu) as isize, (idx / nu) as isize);
                psi.stencil
                    .iter()
                    .map(|(o, w)| {
                        let a = (i - o[0]).rem_euclid(n) as usize;
                        let b = (j - o[1]).rem_euclid(n) as usize;
                        w * v[a + nu * b]
                    })
                    .sum()
            })
            .collect()
    };
    Ok(ScalarField::from_vec(grid, out))
}

/// Exact FFT inversion of `shift * I - coef * laplacian` on a fixed lattice.
///
/// With `shift = 0` the operator is singular on constants; the solve then
/// returns the mean-zero pseudo-inverse.
pub struct SpectralSolver {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Eigenvalues of `-laplacian`, in the (symmetric) frequency layout.
    symbol: Vec<f64>,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver")
            .field("grid", &self.grid)
            .finish()
    }
}

impl SpectralSolver {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let h = grid.h();
        let axis: Vec<f64> = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        let symbol = (0..grid.len())
            .map(|i| {
                let mi = grid.multi_index(i);
                if grid.dim() == 1 {
                    axis[mi[0]]
                } else {
                    axis[mi[0]] + axis[mi[1]]
                }
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            symbol,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Largest eigenvalue of `-laplacian` on this lattice.
    pub fn max_symbol(&self) -> f64 {
        self.symbol.iter().copied().fold(0.0, f64::max)
    }

    fn transform(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        fft.process(buf);
        if self.grid.dim() == 2 {
            transpose_square(buf, self.grid.n());
            fft.process(buf);
        }
    }

    fn transform_back(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        fft.process(buf);
        if self.grid.dim() == 2 {
            transpose_square(buf, self.grid.n());
            fft.process(buf);
        }
    }

    /// Solves `(shift - coef * laplacian) x = rhs`.
    pub fn solve(&self, rhs: &[f64], shift: f64, coef: f64) -> Vec<f64> {
        assert_eq!(rhs.len(), self.grid.len());
        let mut buf: Vec<Complex<f64>> = rhs.iter().map(|&r| Complex::new(r, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        // The symbol is symmetric in its two axes, so the transposed layout
        // left behind by the 2D forward pass can be scaled in place.
        for (c, &s) in buf.iter_mut().zip(&self.symbol) {
            let d = shift + coef * s;
            if d == 0.0 {
                *c = Complex::new(0.0, 0.0);
            } else {
                *c /= d;
            }
        }
        self.transform_back(&mut buf, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

fn transpose_square(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

fn locate(grid: &TorusGrid, x: f64) -> (isize, f64) {
    let s = x / grid.h();
    let base = s.floor();
    (base as isize, s - base)
}

/// Multilinear periodic interpolation of nodal values at a physical point.
pub fn sample_linear(f: &ScalarField, x: [f64; 2]) -> f64 {
    let grid = f.grid();
    let n = grid.n() as isize;
    let v = f.values();
    let (i0, t0) = locate(grid, x[0]);
    let w0 = [(i0, 1.0 - t0), (i0 + 1, t0)];
    if grid.dim() == 1 {
        return w0
            .iter()
            .map(|&(i, w)| w * v[i.rem_euclid(n) as usize])
            .sum();
    }
    let (i1, t1) = locate(grid, x[1]);
    let w1 = [(i1, 1.0 - t1), (i1 + 1, t1)];
    let nu = grid.n();
    let mut acc = 0.0;
    for &(j, wj) in &w1 {
        for &(i, wi) in &w0 {
            acc += wi * wj * v[i.rem_euclid(n) as usize + nu * j.rem_euclid(n) as usize];
        }
    }
    acc
}

fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Tensor-product cubic Lagrange interpolation (4 nodes per axis), fourth order.
pub fn sample_cubic(f: &ScalarField, x: [f64; 2]) -> f64 {
    let grid = f.grid();
    let n = grid.n() as isize;
    let v = f.values();
    let (i0, t0) = locate(grid, x[0]);
    let w0 = cubic_weights(t0);
    if grid.dim() == 1 {
        return (0..4)
            .map(|a| w0[a] * v[(i0 - 1 + a as isize).rem_euclid(n) as usize])
            .sum();
    }
    let (i1, t1) = locate(grid, x[1]);
    let w1 = cubic_weights(t1);
    let nu = grid.n();
    let mut acc = 0.0;
    for b in 0..4 {
        let row = nu * (i1 - 1 + b as isize).rem_euclid(n) as usize;
        let mut inner = 0.0;
        for a in 0..4 {
            inner += w0[a] * v[row + (i0 - 1 + a as isize).rem_euclid(n) as usize];
        }
        acc += w1[b] * inner;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_field(grid: TorusGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).cos())
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::new(1, 4).is_err());
        assert!(TorusGrid::with_length(1, 16, -1.0).is_err());
        for n in [8, 12, 16, 100, 128, 333] {
            let g = TorusGrid::new(1, n).unwrap();
            assert_eq!(g.h() * n as f64, 1.0);
        }
    }

    #[test]
    fn gradient_symbol_of_cosine() {
        let g = TorusGrid::new(1, 64).unwrap();
        let h = g.h();
        let d = gradient(&cos_field(g));
        for j in 0..64 {
            let x = j as f64 * h;
            let expect = -(2.0 * PI * x).sin() * (2.0 * PI * h).sin() / h;
            assert!((d.component(0)[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_symbol_of_cosine() {
        let g = TorusGrid::new(1, 64).unwrap();
        let h = g.h();
        let l = laplacian(&cos_field(g));
        let eig = -(2.0 / (h * h)) * (1.0 - (2.0 * PI * h).cos());
        for j in 0..64 {
            let x = j as f64 * h;
            assert!((l.values()[j] - eig * (2.0 * PI * x).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        for dim in [1, 2] {
            let g = TorusGrid::new(dim, 16).unwrap();
            let c = ScalarField::constant(g, 3.25);
            assert!(gradient(&c).max_norm() == 0.0);
            assert!(laplacian(&c).values().iter().all(|v| *v == 0.0));
            let v = VectorField::constant(g, &[1.5, -2.0]);
            assert!(divergence(&v).values().iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn quadrature_of_modes() {
        let g = TorusGrid::new(2, 32).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g, 1.0)), 1.0);
        assert!(integrate(&cos_field(g)).abs() < 1e-15);
    }

    #[test]
    fn lp_norm_cases() {
        let g = TorusGrid::new(1, 16).unwrap();
        let one = ScalarField::constant(g, 1.0);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((lp_norm(&one, p).unwrap() - 1.0).abs() < 1e-14);
        }
        let half = ScalarField::from_fn(g, |x| if x[0] < 0.5 { 2.0 } else { 0.0 });
        assert!((lp_norm(&half, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(lp_norm(&one, 0.5).is_err());
    }

    #[test]
    fn mollifier_weights_and_rejections() {
        let g = TorusGrid::new(2, 64).unwrap();
        let psi = Mollifier::new(&g, 8).unwrap();
        assert!((psi.weight_sum() - 1.0).abs() < 1e-15);
        assert!(psi.stencil().iter().all(|(_, w)| *w >= 0.0));
        // too small k: support wider than half the torus
        assert!(Mollifier::new(&g, 1).is_err());
        // too large k: support under-resolved
        assert!(Mollifier::new(&g, 64).is_err());
        assert_eq!(Mollifier::default_k(&g), 8);
    }

    #[test]
    fn mollify_dirac_gives_kernel() {
        let g = TorusGrid::new(1, 64).unwrap();
        let psi = Mollifier::new(&g, 8).unwrap();
        let mut v = vec![0.0; 64];
        v[10] = 1.0;
        let out = mollify(&ScalarField::new(g, v).unwrap(), &psi).unwrap();
        for (o, w) in psi.stencil() {
            let idx = (10 + o[0]).rem_euclid(64) as usize;
            assert!((out.values()[idx] - w).abs() < 1e-16);
        }
    }

    #[test]
    fn spectral_solve_inverts_helmholtz() {
        for dim in [1, 2] {
            let g = TorusGrid::new(dim, 16).unwrap();
            let solver = SpectralSolver::new(g);
            let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + 0.3 * (4.0 * PI * x[1]).cos() + 0.7);
            let x = solver.solve(f.values(), 1.0, 0.01);
            let xf = ScalarField::new(g, x).unwrap();
            let lap = laplacian(&xf);
            for i in 0..g.len() {
                let lhs = xf.values()[i] - 0.01 * lap.values()[i];
                assert!((lhs - f.values()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_polynomials() {
        let g = TorusGrid::new(2, 16).unwrap();
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin());
        for idx in [0, 17, 100, 255] {
            let x = g.coords(idx);
            assert!((sample_linear(&f, x) - f.values()[idx]).abs() < 1e-14);
            assert!((sample_cubic(&f, x) - f.values()[idx]).abs() < 1e-14);
        }
        // affine data away from the wrap is reproduced exactly
        let g1 = TorusGrid::new(1, 32).unwrap();
        let lin = ScalarField::from_fn(g1, |x| 2.0 * x[0] + 1.0);
        assert!((sample_linear(&lin, [0.4 + 0.3 / 32.0, 0.0]) - (2.0 * (0.4 + 0.3 / 32.0) + 1.0)).abs() < 1e-13);
        let cub = ScalarField::from_fn(g1, |x| x[0].powi(3));
        let p = 0.5 + 0.37 / 32.0;
        assert!((sample_cubic(&cub, [p, 0.0]) - p.powi(3)).abs() < 1e-13);
    }
}
