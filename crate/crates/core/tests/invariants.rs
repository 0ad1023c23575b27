use proptest::prelude::*;
use twistwave_core::eigensolve::negative_threshold;
use twistwave_core::*;

fn shape() -> impl Strategy<Value = ShapeSpec> {
    prop_oneof![
        Just(ShapeSpec::Disc),
        (0.0..0.6f64).prop_map(|e| ShapeSpec::Ellipse { eccentricity: e }),
        (0.0..0.5f64, 0.3..0.9f64).prop_map(|(x, w)| ShapeSpec::PolygonWithHoles {
            outer: vec![[-1.0, -w], [1.0 + x, -w], [1.0, w], [-1.0, w]],
            holes: vec![],
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nodes_lie_inside_the_analytic_radius(spec in shape(), inv in 6.0..14.0f64) {
        let h = 1.0 / inv;
        let cs = build_cross_section(&spec, h).unwrap();
        let d = spec.analytic_radius();
        prop_assert!(radius(&cs) <= d);
        // acute polygon corners can keep every node further away
        if !matches!(spec, ShapeSpec::PolygonWithHoles { .. }) {
            prop_assert!(radius(&cs) >= d - h * 2f64.sqrt() - 1e-12);
        }
    }

    #[test]
    fn h_beta0_is_symmetric_and_positive(spec in shape(), beta0 in 0.1..2.0f64) {
        let cs = build_cross_section(&spec, 1.0 / 8.0).unwrap();
        let h = assemble_h_beta0(&cs, beta0);
        prop_assert_eq!(h.asymmetry(), 0.0);
        let g = ground_state(&h).unwrap();
        prop_assert!(g.energy > 0.0);
        // the angular term only adds energy
        let lap = ground_state(&assemble_laplacian(&cs)).unwrap();
        prop_assert!(g.energy >= lap.energy - 1e-9 * h.scale());
    }

    #[test]
    fn twist_energy_grows_with_beta0(e in 0.1..0.6f64, b in 0.2..1.5f64) {
        let cs = build_cross_section(&ShapeSpec::Ellipse { eccentricity: e }, 1.0 / 8.0).unwrap();
        let lo = ground_state(&assemble_h_beta0(&cs, b)).unwrap().energy;
        let hi = ground_state(&assemble_h_beta0(&cs, 1.5 * b)).unwrap().energy;
        prop_assert!(hi >= lo - 1e-9 * lo);
    }

    #[test]
    fn profile_stays_in_its_support(a in 0.0..0.5f64, s0 in 0.2..5.0f64, x in -3.0..3.0f64) {
        let p = TwistProfile::new(1.0, a, s0).unwrap();
        let s = x * s0;
        prop_assert!(p.mu(s) >= 0.0 && p.mu(s) <= a);
        if x.abs() >= 1.0 {
            prop_assert_eq!(p.mu(s), 0.0);
            prop_assert_eq!(p.mu_dot(s), 0.0);
        }
        prop_assert!(p.mu_dot(s).abs() <= p.mu_dot_sup() * (1.0 + 1e-9));
    }

    #[test]
    fn trace_power_is_monotone_in_the_exponent(v in prop::collection::vec(-3.0..3.0f64, 0..12)) {
        let spec = Spectrum {
            residuals: vec![0.0; v.len()],
            eigenvectors: vec![],
            eigenvalues: v.clone(),
            iterations: 0,
            converged: true,
        };
        let t1 = trace_neg_power(&spec, 1.0);
        let t2 = trace_neg_power(&spec, 2.0);
        prop_assert!(t1 >= 0.0 && t2 >= 0.0);
        if v.iter().all(|x| *x >= -1.0) {
            prop_assert!(t2 <= t1 + 1e-12);
        }
    }

    #[test]
    fn gamma_and_alpha(beta0 in 0.01..5.0f64, d in 0.1..4.0f64, frac in 0.01..0.99f64) {
        let g = gamma_beta0(beta0, d);
        prop_assert!(g > 0.0 && g <= 1.0 / 3.0);
        let c = frac * g / 3.0;
        let a = alpha_sq(g, c).unwrap();
        prop_assert!(a > 0.0 && a < g);
        prop_assert!(alpha_sq(g, g / 3.0).is_err());
    }
}

#[test]
fn fibre_operator_is_nonnegative_off_support() {
    let cs = build_cross_section(&ShapeSpec::Ellipse { eccentricity: 0.3 }, 1.0 / 8.0).unwrap();
    let p = TwistProfile::new(1.0, 0.01, 1.0).unwrap();
    let h0 = assemble_h_beta0(&cs, 1.0);
    let g = ground_state(&h0).unwrap();
    let hs = assemble_h_of_s(&cs, &g.vector, g.energy, &p, 0.1, 1.5).unwrap();
    let neg = negative_eigs(&hs, 8).unwrap();
    assert!(neg.is_empty());
    assert!(negative_threshold(&hs) > 0.0);
}
