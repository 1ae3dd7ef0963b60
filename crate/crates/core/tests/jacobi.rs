//! Jacobi operator, explicit Jacobi fields, Φ^D and Floquet roots.

use std::sync::Arc;

use cmc_core::delaunay::{solve_profile_with, DEFAULT_TOL};
use cmc_core::jacobi::{
    delaunay_grid, delaunay_variation, jacobi_apply, kernel_check, nonlinear_remainder, rotation_field,
    translation_field, PATCH_NTHETA,
};
use cmc_core::numerics::linear_fit;
use cmc_core::patch::{delaunay_patch, sphere_patch};
use cmc_core::{indicial_root, mean_curvature, normal_graph, DelaunayParameter, DelaunaySurface, FdOrder, ScalarField};
use nalgebra::Vector3;

// Reference values from an independent arbitrary-precision Hill-equation
// integration; p_τ uses the normalization Φ^D(0) = 1/σ''(0).
const GAMMA2_HALF: f64 = 1.76283655606321852;
const GAMMA2_MINUS_HALF: f64 = 1.70566873685238005;
const P_HALF: f64 = -5.04245130629964646;
const P_MINUS_HALF: f64 = -3.85932954936068471;

fn tau(v: f64) -> DelaunayParameter {
    DelaunayParameter::new(v).unwrap()
}

fn surface(t: f64, periods: usize, npp: usize) -> DelaunaySurface {
    DelaunaySurface::canonical(Arc::new(solve_profile_with(tau(t), periods, npp, DEFAULT_TOL).unwrap()))
}

#[test]
fn indicial_roots_match_reference() {
    assert!((indicial_root(tau(0.5), 2, DEFAULT_TOL).unwrap() - GAMMA2_HALF).abs() < 1e-8);
    assert!((indicial_root(tau(-0.5), 2, DEFAULT_TOL).unwrap() - GAMMA2_MINUS_HALF).abs() < 1e-8);
    for j in [0, 1] {
        assert!(indicial_root(tau(0.5), j, DEFAULT_TOL).unwrap() <= 1e-6);
    }
}

#[test]
fn shift_coefficient_matches_reference() {
    for (t, p) in [(0.5, P_HALF), (-0.5, P_MINUS_HALF)] {
        let v = delaunay_variation(tau(t), 1e-3, DEFAULT_TOL).unwrap();
        assert!((v.p_tau - p).abs() < 1e-7 * p.abs(), "τ = {t}: {}", v.p_tau);
        assert!((v.p_tau_endpoint - p).abs() < 1e-7 * p.abs());
        assert!(v.shift_residual < 1e-6);
    }
}

#[test]
fn delaunay_variation_grows_linearly_and_matches_the_family() {
    let v = delaunay_variation(tau(0.5), 1e-3, DEFAULT_TOL).unwrap();
    let per = v.period();
    // Values at the start of each period climb by p_τσ'(0) = 0, so compare
    // at a quarter period where σ' is largest.
    let xs: Vec<f64> = (0..6).map(|i| 0.25 * per + i as f64 * per).collect();
    let ys: Vec<f64> = xs.iter().map(|&s| v.eval(s)).collect();
    let fit = linear_fit(&xs, &ys);
    assert!(fit.slope.abs() > 0.1 && fit.r2 > 0.999_999);
    let coarse = v.family_check.deviation;
    let fine = delaunay_variation(tau(0.5), 5e-4, DEFAULT_TOL).unwrap().family_check.deviation;
    assert!(coarse < 1e-2, "family deviation {coarse}");
    assert!(fine < 0.7 * coarse, "deviation should shrink with h: {coarse} → {fine}");
}

#[test]
fn sphere_patch_is_unit_mean_curvature() {
    let p = sphere_patch(256, 256, 1.2, FdOrder::Fourth).unwrap();
    let h = mean_curvature(&p);
    assert!(h.map(|v| v - 1.0).interior_sup(2) <= 1e-6);
    let c = 0.25;
    let grown = normal_graph(&p, &ScalarField::from_fn(&p.grid, |_, _| -c)).unwrap();
    // The inward normal points to the centre, so w = −c moves outwards.
    let hg = mean_curvature(&grown);
    assert!(hg.map(|v| v - 1.0 / (1.0 + c)).interior_sup(2) <= 1e-6);
}

#[test]
fn zero_graph_is_the_identity() {
    let surf = surface(0.5, 2, 256);
    let p = surf.profile.period();
    let grid = delaunay_grid(&surf.profile, 0.5 * p, 1.5 * p, 1, 16).unwrap();
    let base = delaunay_patch(&surf, &grid, FdOrder::Second).unwrap();
    let same = normal_graph(&base, &ScalarField::zeros(&grid)).unwrap();
    assert_eq!(base.positions, same.positions);
    assert_eq!(mean_curvature(&base).values, mean_curvature(&same).values);
    let q = nonlinear_remainder(&surf, &ScalarField::zeros(&grid)).unwrap();
    assert!(q.sup() < 1e-9);
    let w = ScalarField::from_fn(&grid, |s, th| 1e-3 * (-(s - 0.5 * p)).exp() * (2.0 * th).cos());
    assert!(normal_graph(&base, &w).is_ok());
}

#[test]
fn translation_fields_have_the_expected_angular_shape() {
    let surf = surface(0.5, 2, 256);
    let p = surf.profile.period();
    let grid = delaunay_grid(&surf.profile, 0.0, p, 4, 16).unwrap();
    let axial = translation_field(&surf, &grid, Vector3::z()).unwrap().field;
    for i in 0..grid.ns {
        let row = &axial.values[i * 16..(i + 1) * 16];
        assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-14));
    }
    let side = translation_field(&surf, &grid, Vector3::x()).unwrap().field;
    for i in 0..grid.ns {
        let amp = side.at(i, 0);
        for j in 0..16 {
            assert!((side.at(i, j) - amp * grid.theta(j).cos()).abs() < 1e-14);
        }
    }
    assert!(translation_field(&surf, &grid, Vector3::new(1.0, 1.0, 0.0)).is_err());
}

#[test]
fn rotation_fields_grow_linearly() {
    let surf = surface(0.5, 3, 128);
    let p = surf.profile.period();
    let grid = delaunay_grid(&surf.profile, 0.0, 3.0 * p, 1, 8).unwrap();
    let f = rotation_field(&surf, &grid, Vector3::x()).unwrap().field;
    // At a neck the field is ρ κ/2 sin θ; sample θ = π/2 at s = 0, p, 2p, 3p.
    let stride = surf.profile.nodes_per_period;
    let xs: Vec<f64> = (0..=3).map(|i| (i * stride) as f64).collect();
    let ys: Vec<f64> = (0..=3).map(|i| f.at(i * stride, 2)).collect();
    let fit = linear_fit(&xs, &ys);
    assert!(f.at(0, 0).is_finite());
    assert!(fit.slope.abs() > 1e-6 && fit.r2 > 0.999_999);
}

#[test]
fn kernel_residuals_converge_at_fourth_order() {
    for t in [0.5, -0.5] {
        let c = kernel_check(tau(t), 256, PATCH_NTHETA).unwrap();
        let f = kernel_check(tau(t), 512, PATCH_NTHETA).unwrap();
        for i in 0..3 {
            for (a, b) in [(c.translation[i], f.translation[i]), (c.rotation[i], f.rotation[i])] {
                if a > 1e-9 {
                    assert!((a / b).log2() >= 1.8, "τ = {t}, direction {i}: {a} → {b}");
                }
            }
        }
    }
    let fine = kernel_check(tau(0.5), 1024, PATCH_NTHETA).unwrap();
    assert!(fine.translation[0] <= 1e-6);
}

#[test]
fn cylinder_patch_is_exact() {
    let surf = surface(1.0, 1, 64);
    let grid = delaunay_grid(&surf.profile, 0.0, 3.0, 1, 16).unwrap();
    let h = mean_curvature(&delaunay_patch(&surf, &grid, FdOrder::Second).unwrap());
    assert!(h.map(|v| v - 1.0).interior_sup(1) < 1e-12);
    let lu = jacobi_apply(&surf.profile, &ScalarField::from_fn(&grid, |_, _| 1.0)).unwrap();
    assert!(lu.values.iter().all(|v| (v - 4.0).abs() < 1e-9));
}
