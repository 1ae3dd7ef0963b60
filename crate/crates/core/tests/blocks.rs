//! Building blocks: balancing, end placement, symmetry, truncation and
//! weighted norms.

use std::f64::consts::PI;

use cmc_core::blocks::{
    alpha_k, check_balancing, make_type1, make_type2, reflection_s1, reflection_s3, rotation_z, solve_balancing,
    truncate, weighted_norm, DFunctions, GraphModel, SymmetryGroup,
};
use cmc_core::{Grid, ScalarField};
use nalgebra::Vector3;

// −0.4/3^{1/4} to 20 digits.
const TAU_BAR_K3: f64 = -0.30393427426063701893;

#[test]
fn balancing_closed_forms() {
    assert!((solve_balancing(0.4, alpha_k(6)).unwrap() + 0.4).abs() < 1e-15);
    assert!((solve_balancing(0.4, alpha_k(3)).unwrap() - TAU_BAR_K3).abs() < 1e-15);
    let tb = solve_balancing(-0.7, 0.4).unwrap();
    assert!(tb > 0.0);
    assert!((-0.49 + 2.0 * 0.4f64.cos() * tb * tb).abs() < 1e-15);
}

#[test]
fn end_sums_vanish() {
    let r = check_balancing(&[(0.3, Vector3::x()), (0.3, -Vector3::x())]).unwrap();
    assert_eq!(r.norm(), 0.0);
    assert!(check_balancing(&[(0.3, Vector3::new(1.0, 1.0, 0.0))]).is_err());
    let d = DFunctions::default();
    let g = GraphModel::default();
    for k in 3..=8 {
        assert!(make_type2(0.3, k, &d, &g).unwrap().balancing_residual().unwrap().norm() < 1e-14);
        assert!(make_type1(0.3, k, &d, &g).unwrap().balancing_residual().unwrap().norm() < 1e-12);
    }
}

#[test]
fn type2_ends_are_evenly_spaced() {
    let b = make_type2(0.3, 4, &DFunctions::default(), &GraphModel::default()).unwrap();
    assert_eq!(b.ends.len(), 4);
    for (l, e) in b.ends.iter().enumerate() {
        let want = rotation_z(PI / 2.0 * l as f64) * Vector3::y();
        assert!((e.direction - want).norm() < 1e-15);
        assert_eq!(e.tau(), 0.3);
    }
}

#[test]
fn type1_ends_follow_balancing() {
    let b = make_type1(0.3, 6, &DFunctions::default(), &GraphModel::default()).unwrap();
    let e1 = b.end("E1").unwrap();
    assert!((e1.tau() + 0.3).abs() < 1e-15);
    let angle = e1.direction.dot(&-Vector3::y()).acos();
    assert!((angle - PI / 3.0).abs() < 1e-12);
    let e0 = b.end("E0").unwrap();
    assert_eq!(e0.direction, -Vector3::y());
    let mirrored = e1.transformed(&reflection_s1(), &Vector3::zeros());
    assert_eq!(mirrored.canonical_key(), b.end("E-1").unwrap().canonical_key());
}

#[test]
fn every_group_element_permutes_the_ends() {
    let d = DFunctions::default();
    let g = GraphModel::default();
    for k in [3, 5, 8] {
        for b in [make_type1(0.45, k, &d, &g).unwrap(), make_type2(0.45, k, &d, &g).unwrap()] {
            for el in b.symmetry.elements() {
                assert!(b.is_invariant_under(&el));
            }
        }
        let b = make_type2(0.45, k, &d, &g).unwrap();
        assert_eq!(b.symmetry.order(), k);
        assert!(!b.is_invariant_under(&rotation_z(PI / k as f64)));
    }
    let t1 = make_type1(0.45, 3, &d, &g).unwrap();
    assert_eq!(t1.symmetry.order(), 4);
    assert!(!t1.is_invariant_under(&rotation_z(PI / 2.0)));
}

#[test]
fn group_rejects_non_orthogonal_maps() {
    assert!(SymmetryGroup::new(vec![reflection_s1() * 2.0]).is_err());
    let g = SymmetryGroup::new(vec![reflection_s1(), reflection_s3()]).unwrap();
    let prod = reflection_s1() * reflection_s3();
    assert!(g.elements().iter().any(|m| (m - prod).abs().max() < 1e-15));
}

#[test]
fn truncation_counts_boundaries() {
    let d = DFunctions::default();
    let g = GraphModel::default();
    let t2 = truncate(&make_type2(0.4, 5, &d, &g).unwrap(), 10.0, 10.0).unwrap();
    assert_eq!(t2.boundary_circles.len(), 5);
    assert_eq!(t2.euler_characteristic, -3);
    let t1 = truncate(&make_type1(0.4, 5, &d, &g).unwrap(), 3.0, 7.0).unwrap();
    assert_eq!(t1.boundary_circles.len(), 3);
    assert_eq!(t1.euler_characteristic, -1);
    assert_eq!(t1.windows.iter().find(|w| w.0 == "E0").unwrap().1, 3.0);
    assert_eq!(t1.windows.iter().find(|w| w.0 == "E1").unwrap().1, 7.0);
    assert!(truncate(&make_type2(0.4, 5, &d, &g).unwrap(), -1.0, 1.0).is_err());
}

fn decaying(gamma: f64) -> ScalarField {
    let grid = Grid::spanning(0.0, 12.0, 1201, 16).unwrap();
    ScalarField::from_fn(&grid, |s, th| (-gamma * s).exp() * (2.0 * th).cos())
}

#[test]
fn weighted_norm_examples() {
    let gamma = 1.5;
    let f = decaying(gamma);
    let exact = weighted_norm(&f, -gamma, 0).unwrap();
    assert!((exact - 1.0).abs() < 1e-12);
    let half = weighted_norm(&f, -gamma / 2.0, 0).unwrap();
    assert!(half.is_finite() && half <= 1.0);
    let one = ScalarField::from_fn(&f.grid, |_, _| 1.0);
    assert_eq!(weighted_norm(&one, -0.2, 0).unwrap(), f64::INFINITY);
    assert!(weighted_norm(&one, 0.0, 2).unwrap().is_finite());
    assert!(weighted_norm(&one, 0.0, 3).is_err());
    // Derivatives raise the norm: |∂_θ| = 2|f| for the cos 2θ mode.
    let c2 = weighted_norm(&f, -gamma, 2).unwrap();
    assert!(c2 >= 2.0 * exact - 1e-9);
}

#[test]
fn d_functions_round_trip_through_json() {
    let d = DFunctions::default();
    let text = serde_json::to_string(&d).unwrap();
    let back = DFunctions::from_json(&text).unwrap();
    for t in [0.2, 0.5, -0.3] {
        assert_eq!(back.d0.eval(t), d.d0.eval(t));
        assert_eq!(back.d1.eval(t), d.d1.eval(t));
    }
    assert!(DFunctions::from_json("{\"d0\": \"x\"}").is_err());
}
