//! Dense-matrix oracles for the discrete HJB and Fokker-Planck systems.

use mfg_core::fokker_planck::{assemble_fp_operator, bernoulli, solve_invariant_measure, DriftField};
use mfg_core::grid::{ScalarField, TorusGrid};
use mfg_core::hjb::{solve_ergodic_hjb_from, ErgodicHjbProblem, HjbMethod, HjbOptions};
use mfg_core::model::Hamiltonian;
mod common;

use common::{dense_solve, hjb_newton_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hjb_matches_dense_newton_at_n8() {
    let grid = TorusGrid::new(1, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (a, b, c): (f64, f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let two_pi = 2.0 * std::f64::consts::PI;
    let rhs = ScalarField::from_fn(grid, |x| a * (two_pi * x[0]).cos() + b * (2.0 * two_pi * x[0]).sin() + c);
    for gamma in [2.0, 3.0, 1.5] {
        let (u_ref, lambda_ref) = hjb_newton_oracle(rhs.values(), gamma);
        let problem = ErgodicHjbProblem::new(Hamiltonian::power_law(gamma).unwrap(), rhs.clone());
        for method in [HjbMethod::Marching, HjbMethod::Newton] {
            let opts = HjbOptions {
                tol: 1e-12,
                method,
                ..HjbOptions::default()
            };
            let s = solve_ergodic_hjb_from(&problem, None, &opts).unwrap();
            let du = s.u.values().iter().zip(&u_ref).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(du <= 1e-8, "gamma {gamma} {method:?}: |u - u_ref| = {du:e}");
            assert!((s.lambda - lambda_ref).abs() <= 1e-8, "gamma {gamma} {method:?}: lambda {} vs {lambda_ref}", s.lambda);
        }
    }
}

/// `L` built from the flux formula `J = (B(-z) m_i - B(z) m_{i+1}) / h`,
/// `(L m)_i = sum_axes (J_{i+1/2} - J_{i-1/2}) / h`.
fn flux_matrix(grid: &TorusGrid, faces: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = grid.len();
    let h = grid.h();
    let mut l = vec![vec![0.0; n]; n];
    for (axis, f) in faces.iter().enumerate() {
        for i in 0..n {
            let ip = grid.shift(i, axis, 1);
            let z = h * f[i];
            // face i+1/2 carries J out of i and into ip
            let (wi, wp) = (bernoulli(-z) / (h * h), -bernoulli(z) / (h * h));
            l[i][i] += wi;
            l[i][ip] += wp;
            l[ip][i] -= wi;
            l[ip][ip] -= wp;
        }
    }
    l
}

fn random_faces(grid: &TorusGrid, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.dim())
        .map(|_| (0..grid.len()).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

#[test]
fn hand_assembled_circulant_for_constant_drift() {
    // constant drift b = 3 on n = 8: every row is the same shifted stencil
    let grid = TorusGrid::new(1, 8).unwrap();
    let b = 3.0;
    let h = grid.h();
    let drift = DriftField::from_faces(grid, vec![vec![b; 8]]).unwrap();
    let dense = assemble_fp_operator(&drift).to_dense();
    let z = h * b;
    let bp = z / (z.exp() - 1.0);
    let bm = -z / ((-z).exp() - 1.0);
    let diag = (bm + bp) / (h * h);
    let right = -bp / (h * h);
    let left = -bm / (h * h);
    for i in 0..8 {
        for j in 0..8 {
            let want = if j == i {
                diag
            } else if j == (i + 1) % 8 {
                right
            } else if j == (i + 7) % 8 {
                left
            } else {
                0.0
            };
            assert!((dense[i][j] - want).abs() <= 1e-12 * diag, "entry ({i},{j}): {} vs {want}", dense[i][j]);
        }
    }
}

#[test]
fn operator_matches_flux_assembly() {
    for (dim, seed) in [(1, 1), (2, 2)] {
        let grid = TorusGrid::new(dim, 8).unwrap();
        let faces = random_faces(&grid, 20.0, seed);
        let l = flux_matrix(&grid, &faces);
        let dense = assemble_fp_operator(&DriftField::from_faces(grid, faces).unwrap()).to_dense();
        let scale = l.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        for (r1, r2) in l.iter().zip(&dense) {
            for (x, y) in r1.iter().zip(r2) {
                assert!((x - y).abs() <= 1e-13 * scale);
            }
        }
    }
}

#[test]
fn invariant_measure_matches_dense_null_space() {
    for (dim, scale, seed) in [(1, 5.0, 3), (1, 60.0, 4), (2, 5.0, 5), (2, 30.0, 6)] {
        let grid = TorusGrid::new(dim, 8).unwrap();
        let faces = random_faces(&grid, scale, seed);
        let mut l = flux_matrix(&grid, &faces);
        let n = grid.len();
        // replace the last equation by the mass constraint
        l[n - 1] = vec![grid.cell_volume(); n];
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = 1.0;
        let m_ref = dense_solve(l, rhs);
        let s = solve_invariant_measure(&DriftField::from_faces(grid, faces).unwrap()).unwrap();
        let err = s.m.values().iter().zip(&m_ref).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let top = m_ref.iter().fold(0.0f64, |a, v| a.max(*v));
        assert!(err <= 1e-10 * top.max(1.0), "dim {dim} scale {scale}: {err:e}");
        assert!(m_ref.iter().all(|&v| v > 0.0));
    }
}
