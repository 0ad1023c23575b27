//! Numerical engine for eigenvalue-moment bounds of twisted waveguides with a
//! local slowdown of the twist.
//!
//! The pipeline: rasterize a cross section ([`geometry`]), assemble the
//! cross-section and fibre operators ([`discretize`]), compute their lowest
//! spectra ([`eigensolve`]), integrate the fibre traces into the moment bound
//! ([`bound`]) and, for checking, solve the truncated 3D problem directly
//! ([`direct3d`]).

pub mod bound;
pub mod direct3d;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod profiles;
pub mod sparse;

pub use bound::{
    alpha_sq, angular_energy_ratio, compute_bound, gamma_beta0, lt_constant, ribbon_lower_bound, simpson,
    trace_neg_power, BoundConfig, BoundReport, ConvergenceGate, PerSRow,
};
pub use direct3d::{direct_spectrum, verify_inequality, DirectConfig, DirectResult, Verdict, Verification};
pub use discretize::{
    assemble_3d, assemble_angular, assemble_h_beta0, assemble_h_of_s, assemble_laplacian, effective_potential,
    BoundaryTreatment, SecondDerivative,
};
pub use eigensolve::{
    dense_eigs, ground_state, ground_state_with, lobpcg, negative_eigs, smallest_eigs, EigenOptions, GroundState, Spectrum,
};
pub use error::{Error, Result};
pub use geometry::{build_cross_section, radius, CrossSection, ShapeSpec};
pub use profiles::{check_admissibility, Admissibility, TwistProfile};
pub use sparse::{CsrMatrix, Provenance, SparseOperator, SparseSymOperator};
