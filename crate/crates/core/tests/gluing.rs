//! Cutoffs, matching, necks, assemblies and Jacobi-field extensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmc_core::blocks::{make_type1, make_type2, DFunctions, GraphModel, Rational};
use cmc_core::delaunay::{physical_period_quadrature, DelaunayParameter, PERIOD_QUAD_TOL};
use cmc_core::gluing::{
    annulus_deviation, assemble, cutoff_xi, delta_offset, empirical_n_min, extend_jacobi_field, genus, lambda_gamma,
    matching_function, matching_residual, orbit_check, partition_sum, solve_matching, y_neck, z_neck, ExtensionKind,
    GluedAssembly, Location, NeckGrid,
};

const T_HALF: f64 = 1.2110560275684595248;
const GAMMA_K6_04: f64 = 1.3361556585318794203;

fn period(t: f64) -> f64 {
    physical_period_quadrature(DelaunayParameter::new(t).unwrap(), PERIOD_QUAD_TOL).unwrap()
}

fn zero_d() -> DFunctions {
    DFunctions {
        d0: Rational::Constant(0.0),
        d0_bar: Rational::Constant(0.0),
        d1: Rational::Constant(0.0),
    }
}

fn matched(k: usize, n: usize) -> GluedAssembly {
    let d = DFunctions::default();
    let g = GraphModel::default();
    let sol = solve_matching(n, k, 0.2, 0.8, &d, 1e-12).unwrap()[0];
    assemble(k, &sol, &make_type1(sol.tau, k, &d, &g).unwrap(), &make_type2(sol.tau, k, &d, &g).unwrap(), &d).unwrap()
}

#[test]
fn cutoff_values() {
    let xi = cutoff_xi();
    assert_eq!(xi.eval(-2.0), 1.0);
    assert_eq!(xi.eval(2.0), 0.0);
    assert_eq!(xi.eval(0.0), 0.5);
    assert!((xi.eval(0.3) + xi.eval(-0.3) - 1.0).abs() <= 1e-15);
    // Second differences stay small across ±1: no kink at the plateaus.
    let h = 1e-3;
    for s in [-1.0, 1.0] {
        let d2 = (xi.eval(s + h) - 2.0 * xi.eval(s) + xi.eval(s - h)) / (h * h);
        assert!(d2.abs() < 1e-3);
    }
}

#[test]
fn offsets() {
    let z = zero_d();
    assert!((delta_offset(1, 0.5, &z).unwrap() - 2.0 * T_HALF).abs() < 1e-14);
    let d = DFunctions::default();
    assert!((delta_offset(3, 0.5, &d).unwrap() - (2.0 + 6.0 * T_HALF)).abs() < 1e-13);
    for n in 1..6 {
        let step = delta_offset(n + 1, 0.37, &d).unwrap() - delta_offset(n, 0.37, &d).unwrap();
        assert!((step - 2.0 * period(0.37)).abs() < 1e-14);
    }
    assert!(delta_offset(0, 0.5, &d).is_err());
}

#[test]
fn lambda_and_gamma() {
    assert_eq!(lambda_gamma(0.4, 5, &zero_d()).unwrap().0, 0.0);
    let (_, g) = lambda_gamma(0.4, 6, &DFunctions::default()).unwrap();
    assert!((g - GAMMA_K6_04).abs() < 1e-12);
    let gs: Vec<f64> = (0..20)
        .map(|i| lambda_gamma(0.2 + 0.03 * i as f64, 3, &DFunctions::default()).unwrap().1)
        .collect();
    assert!(gs.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn matching_residual_identities() {
    let d = DFunctions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let k = rng.gen_range(3..9);
        let t: f64 = rng.gen_range(0.2..0.8);
        let (n, m) = (rng.gen_range(1..30), rng.gen_range(1..60));
        let (lam, gam) = lambda_gamma(t, k, &d).unwrap();
        let tb = period(cmc_core::solve_balancing(t, cmc_core::blocks::alpha_k(k)).unwrap());
        let r = matching_residual(n, m, t, k, &d).unwrap();
        assert!((r - tb * (lam + n as f64 * gam - m as f64)).abs() <= 1e-14 * (1.0 + r.abs()) * 10.0);
        let r1 = matching_residual(n, m + 1, t, k, &d).unwrap();
        assert!((r - r1 - tb).abs() < 1e-12);
    }
}

#[test]
fn matching_solutions_are_consistent() {
    let d = DFunctions::default();
    for k in [3, 6] {
        let sols = solve_matching(7, k, 0.2, 0.8, &d, 1e-12).unwrap();
        assert!(!sols.is_empty());
        for s in &sols {
            let f = matching_function(s.tau, 7, k, &d).unwrap();
            assert_eq!(f.round() as usize, s.m);
            assert!(s.residual.abs() <= 1e-10 * period(s.tau_bar));
            assert!(s.tau * s.tau_bar < 0.0);
        }
        // Loosening the tolerance moves each root by about tol/(dF/dτ).
        let loose = solve_matching(7, k, 0.2, 0.8, &d, 1e-6).unwrap();
        assert_eq!(loose.len(), sols.len());
        for (a, b) in sols.iter().zip(&loose) {
            let h = 1e-6;
            let slope = (matching_function(a.tau + h, 7, k, &d).unwrap() - matching_function(a.tau - h, 7, k, &d).unwrap())
                / (2.0 * h);
            assert!((a.tau - b.tau).abs() <= 1e-6 / slope.abs() * 1.01);
        }
    }
    // Wider images admit more solutions.
    let few = solve_matching(2, 3, 0.2, 0.8, &d, 1e-12).unwrap().len();
    let many = solve_matching(20, 3, 0.2, 0.8, &d, 1e-12).unwrap().len();
    assert!(many > few);
    let (n_min, n_guaranteed) = empirical_n_min(3, 0.2, 0.8, &d, 1e-12).unwrap();
    assert!(n_min >= 1 && n_min <= n_guaranteed);
}

#[test]
fn zero_graphs_give_an_exact_delaunay_neck() {
    let d = DFunctions::default();
    let g = GraphModel {
        amplitude: 0.0,
        ..GraphModel::default()
    };
    let t1 = make_type1(0.5, 3, &d, &g).unwrap();
    let t2 = make_type2(0.5, 3, &d, &g).unwrap();
    let neck = y_neck(&t1, &t2, 4, 0, &d).unwrap();
    for s in [-3.0, 0.0, 0.4, 5.0] {
        assert_eq!(neck.blended_graph(s, 0.7), 0.0);
    }
    let dev = annulus_deviation(&neck, &NeckGrid::default()).unwrap();
    assert_eq!(dev.sup_annulus, 0.0);
    assert!(dev.base_discretization < 1e-4);
}

#[test]
fn equal_end_graphs_give_a_symmetric_neck() {
    let d = DFunctions::default();
    let g = GraphModel::default();
    let t1 = make_type1(0.5, 3, &d, &g).unwrap();
    let t2 = make_type2(0.5, 3, &d, &g).unwrap();
    let neck = y_neck(&t1, &t2, 3, 0, &d).unwrap();
    for s in [0.2, 0.6, 1.5] {
        for th in [0.0, 0.4, 2.0] {
            let (a, b) = (neck.blended_graph(s, th), neck.blended_graph(-s, th));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "s = {s}, θ = {th}: {a} vs {b}");
        }
    }
}

#[test]
fn annulus_graph_is_exponentially_small() {
    let d = DFunctions::default();
    let g = GraphModel::default();
    let t1 = make_type1(0.5, 3, &d, &g).unwrap();
    let t2 = make_type2(0.5, 3, &d, &g).unwrap();
    let neck = y_neck(&t1, &t2, 6, 0, &d).unwrap();
    let rate = neck.end_a.decay_rate;
    let bound = 2.0 * g.amplitude * rate.exp() * (-rate * neck.half_window).exp();
    for i in 0..=40 {
        let s = -1.0 + i as f64 / 20.0;
        for th in [0.0, 0.9, 2.5] {
            let w = neck.blended_graph(s, th);
            assert!(w.abs() <= bound);
            assert!(w.abs() <= neck.graph_a(s, th).abs() + neck.graph_b(s, th).abs() + 1e-300);
        }
    }
}

#[test]
fn assemblies_have_the_expected_topology() {
    for k in [3, 6] {
        let asm = matched(k, 3);
        assert_eq!(asm.gluing_graph.nodes, k + 1);
        assert_eq!(asm.gluing_graph.edges.len(), 2 * k);
        assert_eq!(genus(&asm).unwrap(), k);
        assert!(orbit_check(&asm));
    }
    let d = DFunctions::default();
    let g = GraphModel::default();
    assert!(make_type2(0.4, 2, &d, &g).is_err());
}

#[test]
fn z_necks_need_the_matching_condition() {
    let d = DFunctions::default();
    let g = GraphModel::default();
    let mut sol = solve_matching(5, 3, 0.2, 0.8, &d, 1e-12).unwrap()[0];
    let t1 = make_type1(sol.tau, 3, &d, &g).unwrap();
    assert!(z_neck(&t1, 3, &sol, 0, &d).is_ok());
    sol.m += 1;
    assert!(z_neck(&t1, 3, &sol, 0, &d).is_err());
}

#[test]
fn partition_of_unity_sums_to_one() {
    let asm = matched(5, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ly = asm.necks[0].neck.half_window;
    let lz = asm.necks[asm.k].neck.half_window;
    for _ in 0..200 {
        let l = rng.gen_range(0..asm.k);
        let p = match rng.gen_range(0..4) {
            0 => Location::Type2Core,
            1 => Location::Type1Core(l),
            2 => Location::YNeck(l, rng.gen_range(-ly..ly)),
            _ => Location::ZNeck(l, rng.gen_range(-lz..lz)),
        };
        assert!((partition_sum(&asm, p) - 1.0).abs() <= 1e-12, "{p:?}");
    }
}

#[test]
fn extensions_are_jacobi_fields_away_from_the_annulus() {
    let asm = matched(3, 5);
    let grid = NeckGrid::default();
    let bar = extend_jacobi_field(&asm, ExtensionKind::TranslationBar, &grid, None).unwrap();
    assert!(bar.residual.base_outside < 1e-2);
    assert!(bar.residual.base_residual < 1e-2);
    let perp = extend_jacobi_field(&asm, ExtensionKind::TranslationAPerp, &grid, None).unwrap();
    assert!(perp.residual.base_outside < 1e-2);
    assert_eq!(bar.orbit, 3);
}

#[test]
fn delaunay_extension_needs_t_equal_to_n_p() {
    let asm = matched(3, 5);
    let grid = NeckGrid::default();
    let good = extend_jacobi_field(&asm, ExtensionKind::Delaunay, &grid, None).unwrap();
    let (t, p) = (good.t.unwrap(), good.p_tau.unwrap());
    let neck = &asm.necks[0].neck;
    assert!((t - neck.half_periods as f64 * p).abs() < 1e-12);
    // The alternative t = n p_τ s_τ leaves an O(1) mismatch on the bare model.
    let s_half = neck.model.profile.s_half;
    let bad = extend_jacobi_field(&asm, ExtensionKind::Delaunay, &grid, Some(t * s_half)).unwrap();
    assert!(
        bad.residual.base_residual > 100.0 * good.residual.base_residual,
        "{} vs {}",
        bad.residual.base_residual,
        good.residual.base_residual
    );
}

#[test]
fn z_neck_curvature_decays_with_m() {
    let d = DFunctions::default();
    let g = GraphModel::default();
    let mut pts = Vec::new();
    for n in [3, 9, 15] {
        let sol = solve_matching(n, 3, 0.2, 0.8, &d, 1e-12).unwrap()[0];
        let t1 = make_type1(sol.tau, 3, &d, &g).unwrap();
        let neck = z_neck(&t1, 3, &sol, 0, &d).unwrap();
        let dev = annulus_deviation(&neck, &NeckGrid::default()).unwrap();
        let rate = neck.end_a.decay_rate * neck.model.profile.s_half;
        pts.push((sol.m, dev.log_sup_annulus, rate));
    }
    for &(m, log, rate) in &pts {
        // Bounded by c e^{−mγ̄s̄} with a moderate constant.
        assert!(log <= -(m as f64) * rate + 10.0, "m = {m}: {log} vs {}", -(m as f64) * rate);
    }
}
