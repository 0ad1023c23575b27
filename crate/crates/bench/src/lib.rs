//! Shared fixtures for the benchmarks.

use twistwave_core::{
    assemble_h_beta0, build_cross_section, ground_state, BoundConfig, CrossSection, GroundState, ShapeSpec,
    SparseSymOperator, TwistProfile,
};

/// Ellipse of eccentricity 0.3 at spacing `h`.
pub fn ellipse(h: f64) -> CrossSection {
    build_cross_section(&ShapeSpec::Ellipse { eccentricity: 0.3 }, h).expect("ellipse fixture")
}

pub fn profile() -> TwistProfile {
    TwistProfile::new(1.0, 0.005, 1.0).expect("profile fixture")
}

/// `h_β₀` with `β₀ = 1` and its ground state.
pub fn operator_and_ground(cs: &CrossSection) -> (SparseSymOperator, GroundState) {
    let h = assemble_h_beta0(cs, 1.0);
    let g = ground_state(&h).expect("ground state");
    (h, g)
}

/// A bound run small enough to repeat.
pub fn quick_bound() -> BoundConfig {
    BoundConfig { n_q: 9, gate: false, ..Default::default() }
}
