//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Criteria run one after another so the
//! reported runtimes are not inflated by other tests.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use mfg_core::fokker_planck::{solve_invariant_measure, DriftField};
use mfg_core::grid::{gradient, integrate, laplacian, lp_norm, ScalarField, TorusGrid, VectorField};
use mfg_core::hjb::{hjb_residual, solve_ergodic_hjb_from, ErgodicHjbProblem, HjbMethod, HjbOptions};
use mfg_core::fokker_planck::fp_residual;
use mfg_core::mfg::{
    rescale_with_peak, rescaling_residual, solve_fixed_point, sweep_alpha, InitialDensity, MfgProblem, MfgSolution,
    OuterStatus,
};
use mfg_core::model::{Coupling, CouplingSign, Hamiltonian, Potential, Regime};
use mfg_core::validation::{
    audit_energy_inequality, beta_limit, cross_validate_quadratic, mass_scaling_check, pohozaev_residual,
    simulate_particles, solve_nls_ground_state, NlsOptions, Noise, ParticleOptions,
};

use common::hjb_newton_oracle;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn quad() -> Hamiltonian {
    Hamiltonian::power_law(2.0).unwrap()
}

fn focusing(alpha: f64, c_f: f64) -> Coupling {
    Coupling::new(alpha, c_f, CouplingSign::Focusing).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn ratio_ok(r: f64) -> bool {
    (4.0 * 0.7..=4.0 * 1.3).contains(&r)
}

fn ac01() -> Outcome {
    let t = Instant::now();
    let grid = TorusGrid::new(1, 128).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (sign, want) in [(CouplingSign::Focusing, -1.0), (CouplingSign::Defocusing, 1.0)] {
        let p = MfgProblem::new(grid, quad(), Coupling::new(0.5, 1.0, sign).unwrap(), Potential::Zero).unwrap();
        let s = solve_fixed_point(&p, None).unwrap();
        let dm = s.m.values().iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs()));
        let dl = (s.lambda - want).abs();
        pass &= s.converged && dm <= 1e-8 && dl <= 1e-8 && s.outer_iters <= 50;
        parts.push(format!("{sign}: |m-1|={dm:.1e} |lambda-({want})|={dl:.1e} iters={}", s.outer_iters));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 1.0;
    outcome(pass, format!("{}; {secs:.2}s (limit 1s)", parts.join("; ")))
}

fn ac02() -> Outcome {
    let t = Instant::now();
    let grid = TorusGrid::new(1, 256).unwrap();
    let h = quad();
    let u_star = ScalarField::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).cos());
    // R makes u* an exact discrete solution with lambda = 0
    let rhs = h
        .eval_field(&gradient(&u_star))
        .zip_map(&laplacian(&u_star), |hv, l| hv - l);
    let problem = ErgodicHjbProblem::new(h, rhs);
    let opts = HjbOptions {
        tol: 1e-10,
        ..HjbOptions::default()
    };
    let s = solve_ergodic_hjb_from(&problem, None, &opts).unwrap();
    let du = s.u.max_abs_diff(&u_star);
    let mut pass = s.lambda.abs() <= 1e-6 && du <= 1e-6;
    // dense Newton oracle on the 9-unknown system at n = 8
    let g8 = TorusGrid::new(1, 8).unwrap();
    let r8 = ScalarField::from_fn(g8, |x| 0.4 * (2.0 * PI * x[0]).cos() - 0.3 * (4.0 * PI * x[0]).sin() + 0.2);
    let (u_ref, l_ref) = hjb_newton_oracle(r8.values(), 2.0);
    let s8 = solve_ergodic_hjb_from(
        &ErgodicHjbProblem::new(h, r8),
        None,
        &HjbOptions {
            tol: 1e-12,
            ..HjbOptions::default()
        },
    )
    .unwrap();
    let du8 = max_diff(s8.u.values(), &u_ref).max((s8.lambda - l_ref).abs());
    pass &= du8 <= 1e-8;
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 5.0;
    outcome(
        pass,
        format!(
            "n=256: |lambda|={:.1e} |u-u*|={du:.1e} (tol 1e-6); n=8 dense Newton gap {du8:.1e} (tol 1e-8); {secs:.2}s (limit 5s)",
            s.lambda.abs()
        ),
    )
}

fn gibbs(u: &ScalarField) -> ScalarField {
    let w = u.map(|v| (-v).exp());
    let z = integrate(&w);
    w.map(|v| v / z)
}

fn ac03() -> Outcome {
    let t = Instant::now();
    let g1 = TorusGrid::new(1, 128).unwrap();
    let u1 = ScalarField::from_fn(g1, |x| (2.0 * PI * x[0]).cos() + 0.3 * (4.0 * PI * x[0]).sin());
    let m1 = solve_invariant_measure(&DriftField::from_value_function(&u1, &quad())).unwrap().m;
    let e1 = m1.max_abs_diff(&gibbs(&u1));
    // 2D with drift -grad u from nodal centred differences: O(h^2) consistent
    let err2 = |n: usize| {
        let g = TorusGrid::new(2, n).unwrap();
        let u = ScalarField::from_fn(g, |x| 0.5 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin() + 0.3 * (2.0 * PI * x[1]).cos());
        let du = gradient(&u);
        let b = VectorField::new(g, (0..2).map(|d| du.component(d).iter().map(|v| -v).collect()).collect()).unwrap();
        let m = solve_invariant_measure(&DriftField::from_nodal(&b)).unwrap().m;
        m.max_abs_diff(&gibbs(&u))
    };
    let (a, b) = (err2(64), err2(128));
    let pass = e1 <= 1e-10 && ratio_ok(a / b);
    outcome(
        pass,
        format!(
            "1D n=128 error {e1:.1e} (tol 1e-10); 2D error {a:.2e} -> {b:.2e}, ratio {:.2} (4 +/- 30%); {:.2}s",
            a / b,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn hopf_cole_problem(n: usize) -> MfgProblem {
    let grid = TorusGrid::new(1, n).unwrap();
    MfgProblem::new(grid, quad(), focusing(1.0, 1.0), Potential::cosine(1.0, 1).unwrap())
        .unwrap()
        .with_tol(1e-11)
}

fn ac04() -> Outcome {
    let t = Instant::now();
    let opts = NlsOptions {
        tol: 1e-11,
        ..NlsOptions::default()
    };
    let run = |n: usize| {
        let p = hopf_cole_problem(n);
        let s = solve_fixed_point(&p, None).unwrap();
        assert!(s.converged, "MFG solve at n={n} did not converge");
        cross_validate_quadratic(&s, &p.hamiltonian, &p.coupling, &p.potential, &opts).unwrap()
    };
    let (c, f) = (run(256), run(512));
    let (rd, rl) = (c.density_mismatch / f.density_mismatch, c.lambda_mismatch / f.lambda_mismatch);
    let secs = t.elapsed().as_secs_f64();
    let pass = c.density_mismatch <= 1e-5 && c.lambda_mismatch <= 1e-5 && ratio_ok(rd) && ratio_ok(rl) && secs < 30.0;
    outcome(
        pass,
        format!(
            "n=256 |m-phi^2|={:.2e} |dlambda|={:.2e} (tol 1e-5); n=512 {:.2e} {:.2e}; ratios {rd:.2} {rl:.2}; {secs:.1}s (limit 30s)",
            c.density_mismatch, c.lambda_mismatch, f.density_mismatch, f.lambda_mismatch
        ),
    )
}

fn constant_solution(grid: TorusGrid, lambda: f64) -> MfgSolution {
    MfgSolution {
        u: ScalarField::zeros(grid),
        lambda,
        m: ScalarField::constant(grid, 1.0),
        outer_iters: 0,
        hjb_res: 0.0,
        fp_res: 0.0,
        coupling_res: 0.0,
        converged: true,
        status: OuterStatus::Converged,
        history: Vec::new(),
        initial_max: 1.0,
    }
}

fn ac05() -> Outcome {
    let t = Instant::now();
    let h = quad();
    let c = focusing(1.0, 1.0);
    let mut worst = 0.0f64;
    for dim in [1, 2] {
        let s = constant_solution(TorusGrid::new(dim, 64).unwrap(), -1.0);
        for r in [0.05, 0.2, 0.3, 0.45] {
            for center in [[0.5, 0.5], [0.0, 0.0], [0.9, 0.15]] {
                let rep = pohozaev_residual(&s, &c, &h, &Potential::Zero, r, center).unwrap();
                worst = worst.max(rep.residual);
            }
        }
    }
    let run = |n: usize| {
        let grid = TorusGrid::new(2, n).unwrap();
        let p = MfgProblem::new(grid, h, c, Potential::cosine(1.0, 1).unwrap()).unwrap().with_tol(1e-10);
        let s = solve_fixed_point(&p, None).unwrap();
        assert!(s.converged, "2D solve at n={n} did not converge");
        pohozaev_residual(&s, &c, &h, &p.potential, 0.25, [0.5, 0.5]).unwrap()
    };
    let (a, b) = (run(128), run(256));
    let ratio = a.residual / b.residual;
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && ratio_ok(ratio) && a.residual <= 1e-2 * a.scale() && secs < 60.0;
    outcome(
        pass,
        format!(
            "constant worst {worst:.1e} (tol 1e-10); 2D R=0.25 residual {:.2e} -> {:.2e}, ratio {ratio:.2} (4 +/- 30%), largest term {:.2e}; {secs:.1}s (limit 60s)",
            a.residual,
            b.residual,
            a.scale()
        ),
    )
}

fn ac06() -> Outcome {
    let t = Instant::now();
    // H_a = H for the power law, through the rescaled evaluator
    let grid = TorusGrid::new(1, 128).unwrap();
    let mut worst_h = 0.0f64;
    for gamma in [1.5, 2.0, 3.0, 4.5] {
        let h = Hamiltonian::power_law(gamma).unwrap();
        let c = focusing(1.0, 1.0);
        let p = MfgProblem::new(grid, h, c, Potential::cosine(1.0, 1).unwrap()).unwrap();
        let s = constant_solution(grid, -1.0);
        for peak in [0.01, 0.7, 3.0, 250.0] {
            let r = rescale_with_peak(&s, &c, &h, &p.potential, &p.mollifier, 0, peak).unwrap();
            for k in 0..50 {
                let q = [(k as f64 * 0.37).sin() * 7.0, (k as f64 * 0.11).cos() * 3.0];
                let (a, b) = (r.h_k(q), h.eval(q));
                worst_h = worst_h.max((a - b).abs() / b.max(1.0));
            }
        }
    }
    // a converged solution peaked well above the mean
    let h3 = quad();
    let c = focusing(1.0, 1.0);
    let p = MfgProblem::new(grid, h3, c, Potential::cosine(200.0, 1).unwrap()).unwrap().with_tol(1e-10);
    let s = solve_fixed_point(&p, None).unwrap();
    assert!(s.converged);
    // original residual vectors, as the oracle
    let v = p.potential.values(&grid).unwrap();
    let rhs = p.coupling_rhs(&v, &s.m).unwrap();
    let hjb0 = hjb_residual(&s.u, s.lambda, &rhs, &h3);
    let fp0 = fp_residual(&s.m, &DriftField::from_value_function(&s.u, &h3));
    let unit = rescale_with_peak(&s, &c, &h3, &p.potential, &p.mollifier, s.m.argmax(), 1.0).unwrap();
    let (h1, f1) = rescaling_residual(&unit).unwrap();
    let gap_unit = (h1 - hjb0).abs().max((f1 - fp0).abs());
    let peak = s.m.max();
    let zoom = rescale_with_peak(&s, &c, &h3, &p.potential, &p.mollifier, s.m.argmax(), peak).unwrap();
    let (hz, fz) = rescaling_residual(&zoom).unwrap();
    let gap_zoom = (hz - zoom.hjb_factor() * hjb0).abs().max((fz - zoom.fp_factor() * fp0).abs());
    let pass = worst_h <= 1e-12 && gap_unit <= 1e-12 && gap_zoom <= 1e-8;
    outcome(
        pass,
        format!(
            "|H_a - H| {worst_h:.1e} (tol 1e-12); M=1 residual gap {gap_unit:.1e}; M={peak:.3} rescaled vs substituted gap {gap_zoom:.1e} (tol 1e-8); {:.2}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn ac07() -> Outcome {
    let t = Instant::now();
    let grid = TorusGrid::new(2, 96).unwrap();
    let mut p = MfgProblem::new(grid, Hamiltonian::power_law(3.0).unwrap(), focusing(1.0, 5.0), Potential::Zero).unwrap();
    p.hjb.method = HjbMethod::Newton;
    let init = InitialDensity::Bump {
        amplitude: 10.0,
        width: 0.15,
    };
    let report = sweep_alpha(&p, &[0.25, 0.5, 5.0], true, &init).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &report.rows {
        let growth = r.growth.unwrap_or(f64::NAN);
        if r.alpha <= 0.5 {
            let fine_ok = r.fine.as_ref().is_some_and(|f| f.converged);
            pass &= r.regime == Regime::Subcritical && r.converged() && fine_ok && (growth - 1.0).abs() < 0.1;
        } else {
            pass &= r.regime == Regime::Supercritical && r.concentrating;
        }
        parts.push(format!(
            "alpha={} {:?} converged={} max m {:.3} growth {growth:.3} concentrating={}",
            r.alpha, r.regime, r.coarse.converged, r.coarse.max_m, r.concentrating
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    outcome(pass, format!("{}; {secs:.0}s (limit 600s)", parts.join("; ")))
}

fn ac08() -> Outcome {
    let t = Instant::now();
    let grid = TorusGrid::new(1, 128).unwrap();
    let h = quad();
    let c = focusing(1.0, 1.0);
    let suite: Vec<MfgSolution> = (1..=10)
        .map(|k| {
            let p = MfgProblem::new(grid, h, c, Potential::cosine(k as f64, 1).unwrap()).unwrap();
            solve_fixed_point(&p, None).unwrap()
        })
        .collect();
    let all_converged = suite.iter().all(|s| s.converged);
    let beta = c.alpha() + 1.0;
    let a = audit_energy_inequality(&suite, &h, beta).unwrap();
    // every run satisfies the fitted inequality
    let holds = suite.iter().all(|s| {
        let e = integrate(&gradient(&s.u).norm().zip_map(&s.m, |g, m| g * g * m));
        lp_norm(&s.m, beta).unwrap().powf(a.delta_fit) <= a.c_fit * (e + 1.0) * (1.0 + 1e-12)
    });
    // gamma = 3 in 2D has gamma' = 1.5 < N and the bound 1 + gamma'/(N - gamma') = 4
    let h3 = Hamiltonian::power_law(3.0).unwrap();
    let limit = beta_limit(&h3, 2);
    let rejected = audit_energy_inequality(&[constant_solution(TorusGrid::new(2, 16).unwrap(), -1.0)], &h3, limit).is_err();
    let pass = all_converged && a.pass && a.delta_fit > 1.0 && a.c_fit.is_finite() && holds && rejected;
    outcome(
        pass,
        format!(
            "10 runs converged={all_converged}; beta={beta} delta={:.3} C={:.4} holds={holds}; beta={limit} rejected={rejected}; {:.1}s",
            a.delta_fit,
            a.c_fit,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn ac09() -> Outcome {
    let t = Instant::now();
    let h = quad();
    let g0 = TorusGrid::new(1, 64).unwrap();
    let zero = simulate_particles(
        &ScalarField::zeros(g0),
        &ScalarField::constant(g0, 1.0),
        &h,
        &ParticleOptions {
            count: 100_000,
            horizon: 1.0,
            dt: 1e-3,
            seed: 0,
            noise: Noise::TwoPoint,
        },
    )
    .unwrap();
    let grid = TorusGrid::new(1, 128).unwrap();
    let u = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).cos());
    let m = solve_invariant_measure(&DriftField::from_potential(&u)).unwrap().m;
    let l1s: Vec<f64> = (0..3)
        .map(|seed| {
            let opts = ParticleOptions {
                count: 100_000,
                horizon: 50.0,
                dt: 1e-3,
                seed,
                noise: Noise::TwoPoint,
            };
            simulate_particles(&u, &m, &h, &opts).unwrap().l1
        })
        .collect();
    let med = median(l1s.clone());
    let secs = t.elapsed().as_secs_f64();
    let pass = zero.l1 <= 3.0 * zero.noise_floor && med <= 0.05 && secs < 120.0;
    outcome(
        pass,
        format!(
            "zero drift L1 {:.4} (limit {:.4}); Gibbs L1 {:?} median {med:.4} (limit 0.05); {secs:.1}s (limit 120s)",
            zero.l1,
            3.0 * zero.noise_floor,
            l1s.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn ac10() -> Outcome {
    let t = Instant::now();
    let h = quad();
    let mut min_def = f64::INFINITY;
    for (dim, n, amp) in [(1, 128, 0.0), (1, 128, 1.0), (1, 128, 5.0), (2, 48, 2.0)] {
        let grid = TorusGrid::new(dim, n).unwrap();
        let c = Coupling::new(1.0, 1.0, CouplingSign::Defocusing).unwrap();
        let p = MfgProblem::new(grid, h, c, Potential::cosine(amp, 1).unwrap()).unwrap();
        let s = solve_fixed_point(&p, None).unwrap();
        assert!(s.converged);
        min_def = min_def.min(s.lambda);
    }
    let mut max_nls = f64::NEG_INFINITY;
    for (len, c_f) in [(1.0, 0.5), (1.0, 3.0), (20.0, 1.0)] {
        let grid = TorusGrid::with_length(1, 128, len).unwrap();
        let gs = solve_nls_ground_state(grid, &focusing(1.0, c_f), &Potential::Zero, &NlsOptions::default(), None).unwrap();
        max_nls = max_nls.max(gs.lambda);
    }
    let pass = min_def >= -1e-8 && max_nls <= 1e-8;
    outcome(
        pass,
        format!(
            "defocusing min lambda {min_def:.4} (>= -1e-8); focusing NLS max lambda {max_nls:.4} (<= 1e-8); {:.1}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn ac11() -> Outcome {
    let t = Instant::now();
    let c = focusing(1.0, 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    let mut last = f64::INFINITY;
    for (len, n) in [(100.0, 1024), (120.0, 2048), (140.0, 4096)] {
        let grid = TorusGrid::with_length(1, n, len).unwrap();
        let opts = NlsOptions {
            tol: 1e-10,
            tau: Some(2.0),
            ..NlsOptions::default()
        };
        let gs = solve_nls_ground_state(grid, &c, &Potential::Zero, &opts, None).unwrap();
        let r = mass_scaling_check(&gs, &c, &Potential::Zero).unwrap();
        let refm = r.reference_mismatch.unwrap();
        pass &= !r.degenerate && r.residual <= 1e-2 && r.mismatch <= 1e-2 && refm < last;
        last = refm;
        parts.push(format!(
            "L={len}: lambda={:.6} residual {:.1e} mismatch {:.1e} vs whole-line mass {refm:.2e}",
            r.lambda, r.residual, r.mismatch
        ));
    }
    outcome(pass, format!("{}; {:.1}s", parts.join("; "), t.elapsed().as_secs_f64()))
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; ignore them,
    // but honour a name filter so `cargo test -- ac04` runs one criterion
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        ("ac01", "constant solution recovery", ac01),
        ("ac02", "manufactured ergodic HJB", ac02),
        ("ac03", "Gibbs exactness", ac03),
        ("ac04", "Hopf-Cole cross-validation", ac04),
        ("ac05", "Pohozaev identity", ac05),
        ("ac06", "scaling invariance", ac06),
        ("ac07", "regime trichotomy sweep", ac07),
        ("ac08", "energy-inequality audit", ac08),
        ("ac09", "particle validation", ac09),
        ("ac10", "lambda sign checks", ac10),
        ("ac11", "mass-scaling relation", ac11),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let o = run();
        println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
