use approx::assert_relative_eq;
use twistwave_core::bound::{quadrature_nodes, ribbon_lower_bound_with};
use twistwave_core::*;

// j_{0,1}^2
const BESSEL_SQ: f64 = 5.783185962946784;

#[test]
fn disc_threshold_against_bessel_zero() {
    let cs = build_cross_section(&ShapeSpec::Disc, 1.0 / 32.0).unwrap();
    let g = ground_state(&assemble_h_beta0(&cs, 1.0)).unwrap();
    assert_relative_eq!(g.energy, BESSEL_SQ, max_relative = 1e-3);
    assert!(g.margin > 0.0);
    assert_eq!(g.degeneracy, 1);
}

#[test]
fn disc_threshold_ignores_twist_rate() {
    let cs = build_cross_section(&ShapeSpec::Disc, 1.0 / 16.0).unwrap();
    let slow = ground_state(&assemble_h_beta0(&cs, 0.25)).unwrap().energy;
    let fast = ground_state(&assemble_h_beta0(&cs, 2.0)).unwrap().energy;
    assert_relative_eq!(slow, fast, max_relative = 1e-3);
}

#[test]
fn semiclassical_constants() {
    // mpmath, 30 digits
    assert_relative_eq!(lt_constant(1.0).unwrap(), 0.424413181578387562, max_relative = 1e-13);
    assert_relative_eq!(lt_constant(2.0).unwrap(), 0.169765272631355025, max_relative = 1e-13);
    assert_relative_eq!(lt_constant(3.0).unwrap(), 0.145513090826875736, max_relative = 1e-13);
}

#[test]
fn bump_derivative_supremum() {
    let p = TwistProfile::new(1.0, 1.0, 1.0).unwrap();
    assert_relative_eq!(p.mu_dot_sup(), 2.17035708571033869, max_relative = 1e-8);
    let q = TwistProfile::new(2.0, 0.5, 4.0).unwrap();
    assert_relative_eq!(q.mu_dot_sup(), 0.5 * 2.17035708571033869 / 4.0, max_relative = 1e-8);
}

#[test]
fn bump_integral_by_simpson() {
    let p = TwistProfile::new(1.0, 1.0, 1.0).unwrap();
    let g: Vec<f64> = quadrature_nodes(1.0, 65).iter().map(|&s| p.mu(s)).collect();
    assert_relative_eq!(simpson(&g, 2.0 / 64.0), 1.20690032243787618, max_relative = 1e-5);
}

#[test]
fn ribbon_lower_bound_against_adaptive_quadrature() {
    let p = TwistProfile::new(1.0, 0.01, 1.0).unwrap();
    let lb = ribbon_lower_bound_with(1, 1.5, &p, 1.0, 129).unwrap();
    assert_relative_eq!(lb, 0.00102479938009048514, max_relative = 1e-6);
}

#[test]
fn dense_oracle_on_a_sampled_operator() {
    let cs = build_cross_section(&ShapeSpec::Ellipse { eccentricity: 0.3 }, 1.0 / 8.0).unwrap();
    let h = assemble_h_beta0(&cs, 1.0);
    let it = lobpcg(&h, 5, &EigenOptions::default(), &[]).unwrap();
    let dense = dense_eigs(&h, 5);
    for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
        assert!((a - b).abs() <= 1e-8 * h.scale(), "{a} vs {b}");
    }
}
