//! Numerical substrate for gluing constructions of compact constant mean
//! curvature surfaces out of Delaunay ends: profiles and periods, Jacobi
//! fields and indicial roots, building blocks, necks and assemblies.

pub mod blocks;
pub mod delaunay;
pub mod error;
pub mod gluing;
pub mod io;
pub mod jacobi;
pub mod numerics;
pub mod patch;

pub use blocks::{
    check_balancing, make_type1, make_type2, solve_balancing, truncate, weighted_norm, BuildingBlock, DFunctions,
    EndDescriptor, EndGraph, GraphModel, Rational, SymmetryGroup, TruncatedBlock,
};
pub use delaunay::{
    half_period, physical_period, solve_profile, surface_point, Branch, DelaunayParameter, DelaunayProfile,
    DelaunaySurface,
};
pub use error::{CmcError, Result};
pub use gluing::{
    assemble, cutoff_xi, genus, glue_neck, lambda_gamma, matching_residual, solve_matching, CutoffProfile,
    GluedAssembly, GluedNeck, MatchingSolution, NeckGrid,
};
pub use jacobi::{indicial_root, monodromy, FloquetData, JacobiField};
pub use numerics::fd::FdOrder;
pub use patch::{mean_curvature, normal_graph, Grid, Patch, ScalarField};
