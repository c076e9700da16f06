use mfg_core::fokker_planck::{assemble_fp_operator, fp_residual, solve_invariant_measure, DriftField};
use mfg_core::grid::{gradient, integrate, laplacian, mollify, Mollifier, ScalarField, TorusGrid};
use mfg_core::io::{field_from_csv, field_to_csv};
use mfg_core::model::{critical_exponents, Hamiltonian, Regime};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = TorusGrid> {
    (1usize..=2, 8usize..=20).prop_map(|(d, n)| TorusGrid::new(d, n).unwrap())
}

fn faces_strategy() -> impl Strategy<Value = (TorusGrid, Vec<Vec<f64>>)> {
    grid_strategy().prop_flat_map(|g| {
        let faces = prop::collection::vec(prop::collection::vec(-30.0f64..30.0, g.len()), g.dim());
        (Just(g), faces)
    })
}

fn field_strategy() -> impl Strategy<Value = ScalarField> {
    grid_strategy().prop_flat_map(|g| {
        prop::collection::vec(-1e3f64..1e3, g.len()).prop_map(move |v| ScalarField::new(g, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariant_measure_is_a_positive_probability((grid, faces) in faces_strategy()) {
        let b = DriftField::from_faces(grid, faces).unwrap();
        let s = solve_invariant_measure(&b).unwrap();
        prop_assert!(s.m.min() > 0.0);
        prop_assert!((integrate(&s.m) - 1.0).abs() < 1e-12);
        let floor = assemble_fp_operator(&b).roundoff_floor(s.m.max());
        prop_assert!(fp_residual(&s.m, &b) <= 1e-9_f64.max(floor));
    }

    #[test]
    fn operator_columns_sum_to_zero((grid, faces) in faces_strategy()) {
        let op = assemble_fp_operator(&DriftField::from_faces(grid, faces).unwrap());
        let dense = op.to_dense();
        let scale = op.norm_inf();
        for j in 0..grid.len() {
            let s: f64 = dense.iter().map(|row| row[j]).sum();
            prop_assert!(s.abs() <= 1e-12 * scale);
            for (i, row) in dense.iter().enumerate() {
                if i != j {
                    prop_assert!(row[j] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn constants_are_in_the_kernels(grid in grid_strategy(), c in -5.0f64..5.0) {
        let f = ScalarField::constant(grid, c);
        prop_assert!(gradient(&f).max_norm() <= 1e-12);
        prop_assert!(laplacian(&f).values().iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn mollification_keeps_mass(f in field_strategy(), k in 3u32..9) {
        let m = Mollifier::new(f.grid(), k);
        prop_assume!(m.is_ok());
        let m = m.unwrap();
        let g = mollify(&f, &m).unwrap();
        let scale = f.values().iter().fold(1.0f64, |a, v| a.max(v.abs()));
        prop_assert!((integrate(&g) - integrate(&f)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn csv_round_trip(f in field_strategy()) {
        let back = field_from_csv(&field_to_csv(&f)).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn power_law_is_scale_invariant(gamma in 1.05f64..6.0, a in 1e-3f64..1e3, p0 in -50.0f64..50.0, p1 in -50.0f64..50.0) {
        // a^gamma' H(a^(1-gamma') p) = H(p)
        let h = Hamiltonian::power_law(gamma).unwrap();
        let gc = h.gamma_conj();
        let s = a.powf(1.0 - gc);
        let lhs = a.powf(gc) * h.eval([s * p0, s * p1]);
        let rhs = h.eval([p0, p1]);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn regimes_are_ordered(gamma in 1.05f64..6.0, dim in 1usize..=2, alpha in 0.01f64..20.0) {
        let c = critical_exponents(gamma, dim).unwrap();
        prop_assert!(c.alpha1 <= c.alpha2);
        let r = c.regime(alpha);
        match r {
            Regime::Subcritical => prop_assert!(alpha < c.alpha1),
            Regime::SmallCoupling => prop_assert!(alpha >= c.alpha1 && alpha < c.alpha2),
            Regime::Unknown => prop_assert!((alpha - c.alpha2).abs() < 1e-9),
            Regime::Supercritical => prop_assert!(alpha > c.alpha2),
        }
    }
}
