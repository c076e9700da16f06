//! Monte Carlo check of the invariant measure:
//! `dX = -grad H(grad u(X)) dt + sqrt(2) dW` on the torus.

use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient, ScalarField};
use crate::model::Hamiltonian;

/// Smallest accepted ensemble.
pub const MIN_PARTICLES: usize = 10_000;
const CHUNK: usize = 1024;
/// Positions are binned every `STRIDE` steps; consecutive steps are nearly
/// identical, so denser sampling buys almost nothing.
const STRIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    Gaussian,
    /// Symmetric `+-1` increments; same first two moments, weak order one.
    TwoPoint,
}

impl FromStr for Noise {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "two-point" => Ok(Self::TwoPoint),
            other => Err(Error::param("particles_noise", format!("expected gaussian or two-point, got {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParticleOptions {
    pub count: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub noise: Noise,
}

impl Default for ParticleOptions {
    fn default() -> Self {
        Self {
            count: 100_000,
            horizon: 50.0,
            dt: 1e-3,
            seed: 0,
            noise: Noise::TwoPoint,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParticleReport {
    /// Histogram density on the solver lattice (node-centred cells).
    pub density: ScalarField,
    /// `sum_j h^N |rho_j - m_j|`.
    pub l1: f64,
    /// `sqrt(nodes / count)`.
    pub noise_floor: f64,
    pub steps: usize,
    pub samples: u64,
}

/// Euler-Maruyama with multilinear drift interpolation. Particles start
/// uniformly; positions are binned every few steps after the burn-in `T/2`.
///
/// Particles are processed in chunks of 1024, chunk `c` drawing from the
/// ChaCha8 stream `c` of `seed`, so results do not depend on the thread count.
pub fn simulate_particles(
    u: &ScalarField,
    m: &ScalarField,
    hamiltonian: &Hamiltonian,
    opts: &ParticleOptions,
) -> Result<ParticleReport> {
    let grid = *u.grid();
    if !m.grid().same_shape(&grid) {
        return Err(Error::FieldMismatch("u and m live on different grids".into()));
    }
    if opts.count < MIN_PARTICLES {
        return Err(Error::param(
            "particles_count",
            format!("need at least {MIN_PARTICLES} particles, got {}", opts.count),
        ));
    }
    if !(opts.dt > 0.0 && opts.dt <= grid.h()) {
        return Err(Error::param(
            "particles_dt",
            format!("need 0 < dt <= h = {}, got {}", grid.h(), opts.dt),
        ));
    }
    if !(opts.horizon >= opts.dt && opts.horizon.is_finite()) {
        return Err(Error::param("particles_horizon", "horizon must be at least one step"));
    }
    let dim = grid.dim();
    let n = grid.n();
    let nf = n as f64;
    let h = grid.h();
    let steps = (opts.horizon / opts.dt).round() as usize;
    let burn = steps / 2;
    // positions are kept in lattice units, s = x / h in [0, n)
    let drift = hamiltonian.drift_field(&gradient(u));
    let scaled: Vec<Vec<f64>> = (0..dim)
        .map(|d| drift.component(d).iter().map(|b| b * opts.dt / h).collect())
        .collect();
    let sigma = (2.0 * opts.dt).sqrt() / h;
    // one-dimensional fast path: value and slope per cell
    let line: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let b = &scaled[0];
            (b[i], b[(i + 1) % n] - b[i])
        })
        .collect();
    let noise = opts.noise;
    let wrap = |x: f64| -> f64 {
        let mut y = x;
        if !(0.0..nf).contains(&y) {
            y = y.rem_euclid(nf);
            if y >= nf {
                y = 0.0;
            }
        }
        y
    };
    let bin = |x: f64| -> usize {
        let j = (x + 0.5) as usize;
        if j >= n {
            j - n
        } else {
            j
        }
    };
    let advect = |p: &[f64; 2]| -> [f64; 2] {
        let i0 = p[0] as usize;
        let t0 = p[0] - i0 as f64;
        let j0 = if i0 + 1 == n { 0 } else { i0 + 1 };
        let i1 = p[1] as usize;
        let t1 = p[1] - i1 as f64;
        let j1 = if i1 + 1 == n { 0 } else { i1 + 1 };
        let (r0, r1) = (i1 * n, j1 * n);
        let mut out = [0.0; 2];
        for (d, b) in scaled.iter().enumerate() {
            let lo = b[r0 + i0] * (1.0 - t0) + b[r0 + j0] * t0;
            let hi = b[r1 + i0] * (1.0 - t0) + b[r1 + j0] * t0;
            out[d] = lo * (1.0 - t1) + hi * t1;
        }
        out
    };

    let chunks = opts.count.div_ceil(CHUNK);
    let counts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(c as u64);
            let size = CHUNK.min(opts.count - c * CHUNK);
            if dim == 1 && noise == Noise::TwoPoint {
                return line_chunk(&mut rng, size, steps, burn, &line, sigma);
            }
            let mut pos: Vec<[f64; 2]> = (0..size)
                .map(|_| {
                    let mut p = [0.0; 2];
                    for x in p.iter_mut().take(dim) {
                        *x = wrap(rng.random::<f64>() * nf);
                    }
                    p
                })
                .collect();
            let mut hist = vec![0u64; grid.len()];
            let draws = size * dim;
            let mut xi = vec![0.0f64; draws];
            let mut words = vec![0u64; draws.div_ceil(64)];
            for step in 0..steps {
                match noise {
                    Noise::Gaussian => {
                        for x in xi.iter_mut() {
                            *x = rng.sample(StandardNormal);
                        }
                    }
                    Noise::TwoPoint => {
                        for w in words.iter_mut() {
                            *w = rng.next_u64();
                        }
                        for (k, x) in xi.iter_mut().enumerate() {
                            *x = ((words[k >> 6] >> (k & 63)) & 1) as f64 * 2.0 - 1.0;
                        }
                    }
                }
                if dim == 1 {
                    let record = step >= burn && (step - burn) % STRIDE == 0;
                    for (p, x) in pos.iter_mut().zip(&xi) {
                        let s = p[0];
                        let i = s as usize;
                        let (b0, db) = line[i];
                        let drift = b0 + db * (s - i as f64);
                        let y = wrap(s + drift + sigma * x);
                        p[0] = y;
                        if record {
                            hist[bin(y)] += 1;
                        }
                    }
                    continue;
                }
                for (k, p) in pos.iter_mut().enumerate() {
                    let b = advect(p);
                    for d in 0..dim {
                        p[d] = wrap(p[d] + b[d] + sigma * xi[k * dim + d]);
                    }
                    if step >= burn && (step - burn) % STRIDE == 0 {
                        let j = if dim == 1 { bin(p[0]) } else { bin(p[0]) + n * bin(p[1]) };
                        hist[j] += 1;
                    }
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let samples: u64 = counts.iter().sum();
    let vol = grid.cell_volume();
    let density = ScalarField::from_vec(grid, counts.iter().map(|&k| k as f64 / (samples as f64 * vol)).collect());
    let l1 = vol
        * density
            .values()
            .iter()
            .zip(m.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    Ok(ParticleReport {
        density,
        l1,
        noise_floor: (grid.len() as f64 / opts.count as f64).sqrt(),
        steps,
        samples,
    })
}

/// One-dimensional two-point chunk. Positions live in lattice units; the
/// noise sign is read straight from the random words, and the histogram is
/// split in four interleaved copies so that consecutive particles landing in
/// the same bin do not serialise on one counter.
fn line_chunk(
    rng: &mut ChaCha8Rng,
    size: usize,
    steps: usize,
    burn: usize,
    line: &[(f64, f64)],
    sigma: f64,
) -> Vec<u64> {
    let n = line.len();
    let nf = n as f64;
    let mut pos: Vec<f64> = (0..size).map(|_| (rng.random::<f64>() * nf).min(nf - 1e-9)).collect();
    let mut words = vec![0u64; size.div_ceil(64)];
    let mut hist = vec![[0u32; 4]; n];
    let mut out = vec![0u64; n];
    let sig = sigma.to_bits();
    let mut pending = 0u32;
    for step in 0..steps {
        for w in words.iter_mut() {
            *w = rng.next_u64();
        }
        let record = step >= burn && (step - burn) % STRIDE == 0;
        for (k, p) in pos.iter_mut().enumerate() {
            let s = *p;
            // through i32: a single truncating conversion on x86-64
            let i = s as i32 as usize;
            let (b0, db) = line[i];
            let kick = f64::from_bits(sig ^ (((words[k >> 6] >> (k & 63)) & 1) << 63));
            let mut y = s + b0 + db * (s - i as f64) + kick;
            if y < 0.0 {
                y += nf;
                if !(0.0..nf).contains(&y) {
                    y = y.rem_euclid(nf);
                    if y >= nf {
                        y = 0.0;
                    }
                }
            } else if y >= nf {
                y -= nf;
                if y >= nf {
                    y = y.rem_euclid(nf);
                }
            }
            *p = y;
            if record {
                let j = (y + 0.5) as i32 as usize;
                let j = if j >= n { j - n } else { j };
                hist[j][k & 3] += 1;
            }
        }
        if record {
            // flush before the u32 counters can overflow
            pending += 1;
            if pending as usize * size >= u32::MAX as usize / 2 {
                flush(&mut hist, &mut out);
                pending = 0;
            }
        }
    }
    flush(&mut hist, &mut out);
    out
}

fn flush(hist: &mut [[u32; 4]], out: &mut [u64]) {
    for (h, o) in hist.iter_mut().zip(out.iter_mut()) {
        *o += h.iter().map(|&v| v as u64).sum::<u64>();
        *h = [0; 4];
    }
}
