//! Property tests for the invariants of each module.

use proptest::prelude::*;

use cmc_core::blocks::{alpha_k, make_type1, make_type2, solve_balancing, weighted_norm, DFunctions, GraphModel};
use cmc_core::delaunay::{solve_profile, DelaunayParameter, DEFAULT_TOL};
use cmc_core::gluing::{cutoff_xi, lambda_gamma, matching_residual, y_neck};
use cmc_core::jacobi::monodromy;
use cmc_core::{Grid, ScalarField};

fn tau_value() -> impl Strategy<Value = f64> {
    prop_oneof![0.05f64..0.99, -1.5f64..-0.05]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn profiles_conserve_energy(t in tau_value()) {
        let p = solve_profile(DelaunayParameter::new(t).unwrap(), 1, DEFAULT_TOL).unwrap();
        prop_assert!(p.max_energy_residual() <= 1e-8);
        prop_assert!(p.sigma[0] < 0.0);
        let kappa_up = p.kappa.windows(2).all(|w| w[1] > w[0]);
        prop_assert_eq!(kappa_up, t > 0.0);
    }

    #[test]
    fn floquet_invariants(t in prop_oneof![0.1f64..0.99, -1.0f64..-0.1]) {
        let tau = DelaunayParameter::new(t).unwrap();
        for j in 0..=2 {
            let f = monodromy(tau, j, DEFAULT_TOL).unwrap();
            prop_assert!((f.det - 1.0).abs() <= 1e-8, "j = {}: det {}", j, f.det);
            if j < 2 {
                prop_assert!(f.zeta_real <= 1e-6);
            } else {
                prop_assert!(f.zeta_real > 0.0);
            }
        }
    }

    #[test]
    fn blocks_are_symmetric_and_balanced(t in prop_oneof![0.1f64..0.95, -1.0f64..-0.1], k in 3usize..9) {
        let d = DFunctions::default();
        let g = GraphModel::default();
        // For τ < 0 the balancing partner is an unduloid and exists only while τ̄ ≤ 1.
        let tb = solve_balancing(t, alpha_k(k)).unwrap();
        let t1 = make_type1(t, k, &d, &g);
        prop_assert_eq!(t1.is_ok(), tb <= 1.0, "τ̄ = {}", tb);
        let mut blocks = vec![make_type2(t, k, &d, &g).unwrap()];
        blocks.extend(t1);
        for b in blocks {
            prop_assert!(b.balancing_residual().unwrap().norm() <= 1e-12);
            for el in b.symmetry.elements() {
                prop_assert!(b.is_invariant_under(&el));
            }
        }
    }
}

proptest! {
    #[test]
    fn balancing_identity(t in prop_oneof![0.001f64..1.0, -1.5f64..-0.001], a in 0.01f64..1.56) {
        let tb = solve_balancing(t, a).unwrap();
        prop_assert!(tb * t < 0.0);
        prop_assert!((t * t.abs() + 2.0 * a.cos() * tb * tb.abs()).abs() <= 1e-15);
    }

    #[test]
    fn cutoff_is_antisymmetric_and_monotone(s in -3.0f64..3.0, ds in 0.0f64..0.5) {
        let xi = cutoff_xi();
        prop_assert!((xi.eval(-s) - (1.0 - xi.eval(s))).abs() <= 1e-15);
        prop_assert!(xi.eval(s + ds) <= xi.eval(s));
        prop_assert!((0.0..=1.0).contains(&xi.eval(s)));
    }

    #[test]
    fn matching_residual_is_affine(
        t in 0.2f64..0.8, k in 3usize..9, n in 1usize..40, m in 1usize..80,
    ) {
        let d = DFunctions::default();
        let (lam, gam) = lambda_gamma(t, k, &d).unwrap();
        let tb = solve_balancing(t, alpha_k(k)).unwrap();
        let tbp = cmc_core::delaunay::physical_period_quadrature(
            DelaunayParameter::new(tb).unwrap(),
            cmc_core::delaunay::PERIOD_QUAD_TOL,
        ).unwrap();
        let r = matching_residual(n, m, t, k, &d).unwrap();
        let scale = 1.0 + (lam + n as f64 * gam).abs() * tbp;
        prop_assert!((r - tbp * (lam + n as f64 * gam - m as f64)).abs() <= 1e-14 * scale);
    }

    #[test]
    fn weighted_norm_is_monotone_in_mu(
        gamma in 0.2f64..3.0, mu1 in -3.0f64..1.0, dmu in 0.0f64..2.0, r in 0usize..3,
    ) {
        let grid = Grid::spanning(0.0, 10.0, 501, 8).unwrap();
        let f = ScalarField::from_fn(&grid, |s, th| (-gamma * s).exp() * (2.0 * th).sin() + 0.1 * (-gamma * s).exp());
        let a = weighted_norm(&f, mu1, r).unwrap();
        let b = weighted_norm(&f, mu1 + dmu, r).unwrap();
        prop_assert!(a >= b, "μ = {} → {}, μ = {} → {}", mu1, a, mu1 + dmu, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn blend_is_exact_outside_the_annulus(n in 2usize..8, s in 1.0f64..6.0, th in 0.0f64..6.3) {
        let d = DFunctions::default();
        let g = GraphModel::default();
        let t1 = make_type1(0.5, 3, &d, &g).unwrap();
        let t2 = make_type2(0.5, 3, &d, &g).unwrap();
        let neck = y_neck(&t1, &t2, n, 0, &d).unwrap();
        let s = s.min(neck.half_window);
        prop_assert_eq!(neck.blended_graph(-s, th), neck.graph_a(-s, th));
        prop_assert_eq!(neck.blended_graph(s, th), neck.graph_b(s, th));
    }
}
