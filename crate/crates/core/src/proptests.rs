//! Property tests over randomly generated platoons and matrices.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use crate::dde_sim::{random_state, simulate, DelaySpec, SimParams, SimSystem};
use crate::{linalg, spectral, Dynamics, GroundedSystem, PlatoonTopology};

fn platoon() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=200).prop_flat_map(|n| (Just(n), 1usize..=n.min(12)))
}

/// Platoon plus a reference mask with at least one reference and one follower.
fn grounded(max_n: usize) -> impl Strategy<Value = GroundedSystem> {
    (2usize..=max_n, 1usize..=6)
        .prop_flat_map(|(n, k)| (Just(n), Just(k), proptest::collection::vec(any::<bool>(), n)))
        .prop_filter_map("need a reference and a follower", |(n, k, mask)| {
            let refs: Vec<usize> = (1..=n).filter(|&i| mask[i - 1]).collect();
            if refs.is_empty() || refs.len() == n {
                return None;
            }
            GroundedSystem::from_parts(n, k, refs).ok()
        })
}

fn symmetric(max: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=max).prop_flat_map(|n| {
        proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
            let a = DMatrix::from_vec(n, n, v);
            (&a + a.transpose()) * 0.5
        })
    })
}

proptest! {
    #[test]
    fn degree_formula((n, k) in platoon()) {
        let topo = PlatoonTopology::new(n, k).unwrap();
        for i in 1..=n {
            prop_assert_eq!(topo.degree(i), (i - 1).min(k) + (n - i).min(k));
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero((n, k) in platoon()) {
        let l = PlatoonTopology::new(n, k).unwrap().laplacian();
        for r in l.row_iter() {
            prop_assert_eq!(r.iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn betas_sum_to_boundary(gs in grounded(80)) {
        prop_assert_eq!(gs.betas().iter().sum::<usize>(), gs.boundary_size());
    }

    #[test]
    fn lg_trace_equals_spectrum_sum(gs in grounded(60)) {
        let lg = gs.lg_f64();
        let trace: f64 = (0..lg.nrows()).map(|i| lg[(i, i)]).sum();
        let sum: f64 = spectral::lg_spectrum(&gs).unwrap().values().iter().sum();
        prop_assert!((trace - sum).abs() <= 1e-9 * trace.max(1.0));
    }

    #[test]
    fn coupling_rows_close_the_laplacian(gs in grounded(60)) {
        // Lg·1 + L12·1 = 0
        let f = gs.follower_count();
        let r = gs.refs().refs().len();
        let s = gs.lg_f64() * DVector::repeat(f, 1.0) + gs.l12_f64() * DVector::repeat(r, 1.0);
        prop_assert!(s.amax() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jacobi_matches_bisection(m in symmetric(24)) {
        let (jac, _) = linalg::jacobi_eigen(&m, false).unwrap();
        let bis = linalg::bisection_eigenvalues(&m).unwrap();
        prop_assert_eq!(jac.len(), bis.len());
        for (a, b) in jac.iter().zip(&bis) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn jacobi_vectors_diagonalize(m in symmetric(12)) {
        let (vals, vecs) = linalg::jacobi_eigen(&m, true).unwrap();
        let v = vecs.unwrap();
        let d = v.transpose() * &m * &v;
        for i in 0..vals.len() {
            prop_assert!((d[(i, i)] - vals[i]).abs() <= 1e-9 * (1.0 + m.norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simulation_is_linear(gs in grounded(12), sa in any::<u64>(), sb in any::<u64>(), tau in 0.0f64..0.3) {
        for kind in [Dynamics::Velocity, Dynamics::Formation] {
            let sys = SimSystem::new(kind, &gs);
            let a = random_state(sys.state_dim(), sa);
            let b = random_state(sys.state_dim(), sb);
            let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let delay = if tau > 0.0 { DelaySpec::full(tau) } else { DelaySpec::none() };
            let p = SimParams::new(2.0, 1e-2);
            let run = |x0: &[f64]| DVector::from_column_slice(&simulate(&sys, delay, x0, &p, None).unwrap().final_state);
            let lhs = run(&ab);
            let rhs = run(&a) + run(&b);
            prop_assert!((&lhs - &rhs).amax() <= 1e-9 * (1.0 + rhs.amax()));
        }
    }

    #[test]
    fn undelayed_run_matches_exponential(gs in grounded(10), seed in any::<u64>()) {
        let sys = SimSystem::velocity(&gs);
        let x0 = random_state(sys.state_dim(), seed);
        let t = simulate(&sys, DelaySpec::none(), &x0, &SimParams::new(1.0, 1e-3), None).unwrap();
        let exact = linalg::expm(&(-gs.lg_f64())) * DVector::from_column_slice(&x0);
        let got = DVector::from_column_slice(&t.final_state);
        prop_assert!((got - &exact).norm() <= 1e-6 * exact.norm().max(1e-300));
    }

    #[test]
    fn formation_matrix_spectrum_matches_mapping(gs in grounded(16)) {
        let mapped = spectral::map_formation_spectrum(&spectral::lg_spectrum(&gs).unwrap()).unwrap();
        let dense = spectral::dense_eigenvalues(&spectral::build_formation_matrix(&gs)).unwrap();
        prop_assert!(spectral::spectrum_mismatch(mapped.values(), &dense) <= 1e-6);
    }
}

#[test]
fn expm_of_rotation_generator() {
    let t = 0.7f64;
    let m = nalgebra::dmatrix![0.0, -t; t, 0.0];
    let e = linalg::expm(&m);
    let want = nalgebra::dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()];
    assert!((e - want).amax() < 1e-14);
}

#[test]
fn step_halving_ratio_is_fourth_order() {
    let gs = GroundedSystem::from_parts(5, 2, [3]).unwrap();
    let sys = SimSystem::velocity(&gs);
    let x0 = random_state(4, 3);
    let run = |h: f64| {
        let t = simulate(&sys, DelaySpec::none(), &x0, &SimParams::new(1.0, h), None).unwrap();
        DVector::from_column_slice(&t.final_state)
    };
    let (a, b, c) = (run(1e-2), run(5e-3), run(2.5e-3));
    let ratio = (&a - &b).norm() / (&b - &c).norm();
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}
