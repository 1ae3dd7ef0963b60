//! Gluing construction: cutoffs, the matching condition, necks, the
//! assembled surface, and the decay of curvature and Jacobi residuals.

pub mod assembly;
pub mod cutoff;
pub mod extension;
pub mod matching;
pub mod neck;

pub use assembly::{
    assemble, chi, chi_bar, curvature_sweep, euler_characteristic, extend_jacobi_field, extension_sweep, genus,
    orbit_check, partition_sum, y_neck, z_neck, CurvatureSweep, ExtensionKind, ExtensionReport, ExtensionSweep,
    GluedAssembly, GluingGraph, Location, NeckEdge, NeckKind, PlacedPiece,
};
pub use cutoff::{cutoff_xi, CutoffProfile};
pub use extension::{decay_fit, growth_exponent, neck_residual, DecayFit, NeckField, NeckResidual};
pub use matching::{
    delta_offset, empirical_n_min, lambda_gamma, matching_function, matching_residual, sample_matching_function,
    solve_matching,
    MatchingSolution,
};
pub use neck::{
    annulus_deviation, band_profile, curvature_deviation, glue_neck, BandSup, CurvatureDeviation, GluedNeck, NeckGrid,
};
