//! Moment bound: constants, the fibre sweep over the perturbation support,
//! Simpson integration of the fibre traces, and the ribbon lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_angular, assemble_h_beta0, h_of_s, GroundRatios, SecondDerivative};
use crate::eigensolve::{ground_state_with, negative_eigs_with, EigenOptions, Spectrum};
use crate::error::{Error, Result};
use crate::geometry::{build_cross_section, CrossSection, ShapeSpec};
use crate::profiles::{check_admissibility, Admissibility, TwistProfile};
use crate::sparse::dot;

/// Relative tolerance of the two-resolution convergence gate.
pub const GATE_TOLERANCE: f64 = 0.05;

/// `γ = min{1/3, 1/(48β₀²d²)}`.
pub fn gamma_beta0(beta0: f64, d: f64) -> f64 {
    (1.0 / 3.0_f64).min(1.0 / (48.0 * beta0 * beta0 * d * d))
}

/// `α² = γ − 3c`, defined for `0 < c < γ/3`.
pub fn alpha_sq(gamma: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < gamma / 3.0) {
        return Err(Error::InvalidC { c, gamma });
    }
    Ok(gamma - 3.0 * c)
}

/// Semiclassical constant `Γ(σ+1)/(√(4π)·Γ(σ+3/2))`, doubled for `σ < 3/2`.
pub fn lt_constant(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.5) {
        return Err(Error::SigmaOutOfRange(sigma));
    }
    let base = gamma_ratio_exact(sigma).unwrap_or_else(|| {
        (statrs::function::gamma::ln_gamma(sigma + 1.0) - statrs::function::gamma::ln_gamma(sigma + 1.5)).exp()
            / (4.0 * std::f64::consts::PI).sqrt()
    });
    Ok(if sigma < 1.5 { 2.0 * base } else { base })
}

/// The constant for integer or half-integer `σ ≤ 15` from integer products,
/// so that the rational cases come out exact.
fn gamma_ratio_exact(sigma: f64) -> Option<f64> {
    let twice = 2.0 * sigma;
    if twice.fract() != 0.0 || sigma > 15.0 {
        return None;
    }
    let m = sigma.floor() as u32;
    // ∏ (2j+1) and 2^m·∏ (j+1), j = 1..m
    let odd: f64 = (1..=m).map(|j| f64::from(2 * j + 1)).product();
    let even: f64 = (1..=m).map(|j| f64::from(2 * j + 2)).product();
    Some(if sigma.fract() == 0.0 {
        // Γ(m+1)/Γ(m+3/2) = 2·m!·2^m/(∏(2j+1)·√π)
        let fact: f64 = (1..=m).map(|j| f64::from(2 * j)).product();
        fact / odd / std::f64::consts::PI
    } else {
        // Γ(m+3/2)/Γ(m+2) = √π·∏(2j+1)/(2·2^m·(m+1)!)
        odd / even / 4.0
    })
}

/// `Σ_{λ<0} |λ|^p`.
pub fn trace_neg_power(spec: &Spectrum, p: f64) -> f64 {
    spec.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| (-l).powf(p)).sum::<f64>() + 0.0
}

/// Composite Simpson rule on an odd number of equispaced samples.
pub fn simpson(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd number (>= 3) of samples, got {n}");
    let mut acc = values[0] + values[n - 1];
    for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * step / 3.0
}

/// Equispaced Simpson nodes on `[−s0, s0]`.
pub fn quadrature_nodes(s0: f64, n_q: usize) -> Vec<f64> {
    (0..n_q).map(|j| -s0 + 2.0 * s0 * j as f64 / (n_q - 1) as f64).collect()
}

/// Settings of [`compute_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Moment order, at least 1/2.
    pub sigma: f64,
    /// The constant `c`; `None` picks `γ/6`.
    pub c: Option<f64>,
    /// Odd number of Simpson nodes on the support.
    pub n_q: usize,
    /// Largest number of negative eigenvalues accepted per fibre.
    pub cap: usize,
    /// Also compute at a coarser spacing and compare.
    pub gate: bool,
    /// Spacing of the coarse run; `None` doubles `h`.
    pub gate_h: Option<f64>,
    /// Clamp `|V|` at the percentile cap. Off by default: the cap is still
    /// computed and nodes beyond it are counted.
    pub clamp: bool,
    pub second_derivative: SecondDerivative,
    pub eigen: EigenOptions,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            sigma: 1.5,
            c: None,
            n_q: 33,
            cap: 256,
            gate: true,
            gate_h: None,
            clamp: false,
            second_derivative: SecondDerivative::default(),
            eigen: EigenOptions::default(),
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        lt_constant(self.sigma)?;
        if self.n_q < 3 || self.n_q % 2 == 0 {
            return Err(Error::InvalidArgument(format!("n_q must be odd and at least 3, got {}", self.n_q)));
        }
        if self.cap == 0 {
            return Err(Error::InvalidArgument("cap must be at least 1".into()));
        }
        if let Some(h) = self.gate_h {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("gate_h must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// One row of the fibre table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerSRow {
    pub s: f64,
    pub n_neg: usize,
    /// `tr H(s)₋^{σ+1/2}`.
    pub trace_power: f64,
    /// Lowest eigenvalue of `H(s)` when negative.
    pub lowest: Option<f64>,
    pub clamped: usize,
    pub v_cap: f64,
}

/// Potential clamping summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClampStats {
    /// Whether values beyond the cap were cut.
    pub applied: bool,
    pub q99: f64,
    pub q99_second: f64,
    pub total_clamped: usize,
    pub max_clamped: usize,
    pub nodes: usize,
}

/// Two-resolution comparison with second-order Richardson extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceGate {
    pub h_coarse: f64,
    pub h_fine: f64,
    pub bound_coarse: f64,
    pub bound_fine: f64,
    pub extrapolated: f64,
    pub relative_difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl ConvergenceGate {
    pub fn new(h_coarse: f64, bound_coarse: f64, h_fine: f64, bound_fine: f64) -> Self {
        let ratio = h_coarse / h_fine;
        let w = ratio * ratio;
        let extrapolated = (w * bound_fine - bound_coarse) / (w - 1.0);
        let relative_difference = if bound_fine == 0.0 && bound_coarse == 0.0 {
            0.0
        } else if extrapolated == 0.0 {
            f64::INFINITY
        } else {
            ((bound_fine - extrapolated) / extrapolated).abs()
        };
        ConvergenceGate {
            h_coarse,
            h_fine,
            bound_coarse,
            bound_fine,
            extrapolated,
            relative_difference,
            tolerance: GATE_TOLERANCE,
            passed: relative_difference < GATE_TOLERANCE,
        }
    }
}

/// Ribbon-only diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RibbonDiagnostics {
    pub level: u32,
    /// `‖Af‖²/‖f‖²`.
    pub angular_energy_ratio: f64,
    /// `4^{k+1}/π²`.
    pub angular_energy_floor: f64,
    pub lower_bound: f64,
}

/// Everything computed by [`compute_bound`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub label: &'static str,
    pub h: f64,
    pub nodes: usize,
    pub shape: ShapeSpec,
    pub beta0: f64,
    pub amplitude: f64,
    pub s0: f64,
    pub sigma: f64,
    pub c: f64,
    pub gamma: f64,
    pub alpha_sq: f64,
    pub energy: f64,
    /// Size of the lowest eigenvalue cluster of `h_β₀`.
    pub degeneracy: usize,
    /// Nodes where the ground state is at round-off level.
    pub floor_nodes: usize,
    pub d: f64,
    pub lt_constant: f64,
    pub n_q: usize,
    pub per_s: Vec<PerSRow>,
    pub integral: f64,
    pub bound: f64,
    pub admissibility: Admissibility,
    pub clamp: ClampStats,
    pub convergence: Option<ConvergenceGate>,
    pub ribbon: Option<RibbonDiagnostics>,
    pub notes: Vec<String>,
}

/// Per-resolution result, before the gate.
struct Sweep {
    energy: f64,
    gamma: f64,
    c: f64,
    alpha_sq: f64,
    d: f64,
    per_s: Vec<PerSRow>,
    integral: f64,
    bound: f64,
    clamp: ClampStats,
    admissibility: Admissibility,
    ground: Vec<f64>,
    degeneracy: usize,
    floor_nodes: usize,
    nodes: usize,
}

fn sweep(cs: &CrossSection, profile: &TwistProfile, config: &BoundConfig) -> Result<Sweep> {
    let beta0 = profile.beta0();
    let h0 = assemble_h_beta0(cs, beta0);
    let ground = ground_state_with(&h0, &config.eigen)?;
    let energy = ground.energy;
    let f = ground.vector.clone();

    let d = cs.spec().analytic_radius();
    let gamma = gamma_beta0(beta0, d);
    let c = config.c.unwrap_or(gamma / 6.0);
    let alpha_sq = alpha_sq(gamma, c)?;
    let admissibility = check_admissibility(profile, c, gamma, alpha_sq);
    let p = config.sigma + 0.5;

    let angular = assemble_angular(cs);
    let ratios = GroundRatios::new(cs, &angular, &f, beta0, config.second_derivative)?;
    let nodes = quadrature_nodes(profile.s0(), config.n_q);
    let rows: Vec<Result<PerSRow>> = nodes
        .par_iter()
        .map(|&s| {
            if profile.mu(s) == 0.0 && profile.mu_dot(s) == 0.0 {
                return Ok(PerSRow { s, n_neg: 0, trace_power: 0.0, lowest: None, clamped: 0, v_cap: 0.0 });
            }
            let v = ratios.potential_with(profile, alpha_sq, s, config.clamp);
            let hs = h_of_s(&h0, &v.values, energy);
            let neg = negative_eigs_with(&hs, config.cap, &config.eigen, &ground.low.eigenvectors)?;
            Ok(PerSRow {
                s,
                n_neg: neg.len(),
                trace_power: trace_neg_power(&neg, p),
                lowest: neg.eigenvalues.first().copied(),
                clamped: v.clamped,
                v_cap: v.cap,
            })
        })
        .collect();
    let per_s = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let g: Vec<f64> = per_s.iter().map(|r| r.trace_power).collect();
    check_quadrature(&g)?;
    let step = 2.0 * profile.s0() / (config.n_q - 1) as f64;
    let integral = simpson(&g, step);
    let bound = alpha_sq.powf(config.sigma) * lt_constant(config.sigma)? * integral;
    let clamp = ClampStats {
        applied: config.clamp,
        q99: ratios.q99(),
        q99_second: ratios.q99_second(),
        total_clamped: per_s.iter().map(|r| r.clamped).sum(),
        max_clamped: per_s.iter().map(|r| r.clamped).max().unwrap_or(0),
        nodes: cs.len(),
    };
    Ok(Sweep { energy, gamma, c, alpha_sq, d, per_s, integral, bound, clamp, admissibility, ground: f, degeneracy: ground.degeneracy, floor_nodes: ratios.floor_nodes(), nodes: cs.len() })
}

/// Flags an integrand whose discrete curvature flips sign at more than half
/// of the nodes.
fn check_quadrature(g: &[f64]) -> Result<()> {
    let top = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top == 0.0 || g.len() < 4 {
        return Ok(());
    }
    let floor = 1e-6 * top;
    let curv: Vec<f64> = g.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).filter(|c| c.abs() > floor).collect();
    let changes = curv.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    if changes > g.len() / 2 {
        return Err(Error::QuadratureTooCoarse { changes, nodes: g.len() });
    }
    Ok(())
}

/// Fibre sweep, Simpson integral and final bound, plus the coarse-grid gate.
pub fn compute_bound(cs: &CrossSection, profile: &TwistProfile, config: &BoundConfig) -> Result<BoundReport> {
    config.validate()?;
    let fine = sweep(cs, profile, config)?;
    let convergence = if config.gate {
        let hc = config.gate_h.unwrap_or(2.0 * cs.spacing());
        let coarse_cs = build_cross_section(cs.spec(), hc)?;
        let coarse = sweep(&coarse_cs, profile, config)?;
        Some(ConvergenceGate::new(hc, coarse.bound, cs.spacing(), fine.bound))
    } else {
        None
    };

    let ribbon = match cs.spec() {
        ShapeSpec::Ribbon { level, .. } => {
            let level = *level;
            Some(RibbonDiagnostics {
                level,
                angular_energy_ratio: angular_energy_ratio(cs, &fine.ground),
                angular_energy_floor: 4f64.powi(level as i32 + 1) / std::f64::consts::PI.powi(2),
                lower_bound: ribbon_lower_bound_with(level, config.sigma, profile, fine.alpha_sq, config.n_q)?,
            })
        }
        _ => None,
    };

    let mut notes = vec![format!(
        "potential cap (|mu'| q1 + mu(2 beta0 - mu) q2) / alpha^2 with 99th-percentile ratios q1 = {:.6e}, q2 = {:.6e}; {} node samples beyond it were {}",
        fine.clamp.q99,
        fine.clamp.q99_second,
        fine.clamp.total_clamped,
        if config.clamp { "clamped (implementation policy)" } else { "kept" }
    )];
    if fine.degeneracy > 1 {
        notes.push(format!(
            "lowest eigenvalue is a cluster of {} numerically equal values; f is the symmetric combination, V = 0 at {} round-off nodes",
            fine.degeneracy, fine.floor_nodes
        ));
    }
    if !fine.admissibility.theorem1_ok {
        notes.push("parameters outside the admissible window; bound reported for exploration only".into());
    }
    if let Some(g) = &convergence {
        if !g.passed {
            notes.push(format!(
                "convergence gate failed: relative difference {:.3e} against the extrapolated value",
                g.relative_difference
            ));
        }
    }

    Ok(BoundReport {
        label: if fine.admissibility.theorem1_ok { "RIGOROUS" } else { "NON-RIGOROUS" },
        h: cs.spacing(),
        nodes: fine.nodes,
        shape: cs.spec().clone(),
        beta0: profile.beta0(),
        amplitude: profile.amplitude(),
        s0: profile.s0(),
        sigma: config.sigma,
        c: fine.c,
        gamma: fine.gamma,
        alpha_sq: fine.alpha_sq,
        energy: fine.energy,
        degeneracy: fine.degeneracy,
        floor_nodes: fine.floor_nodes,
        d: fine.d,
        lt_constant: lt_constant(config.sigma)?,
        n_q: config.n_q,
        per_s: fine.per_s,
        integral: fine.integral,
        bound: fine.bound,
        admissibility: fine.admissibility,
        clamp: fine.clamp,
        convergence,
        ribbon,
        notes,
    })
}

/// `(1/α)·(4^{k+1}/π²)^{σ+1/2}·∫ μ^{σ+1/2}(2β₀−μ)^{σ+1/2} ds`, with the
/// default 33 Simpson nodes.
pub fn ribbon_lower_bound(k: u32, sigma: f64, profile: &TwistProfile, alpha_sq: f64) -> Result<f64> {
    ribbon_lower_bound_with(k, sigma, profile, alpha_sq, 33)
}

pub fn ribbon_lower_bound_with(k: u32, sigma: f64, profile: &TwistProfile, alpha_sq: f64, n_q: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("ribbon level must be at least 1".into()));
    }
    if !(alpha_sq > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha^2 must be positive, got {alpha_sq}")));
    }
    let p = sigma + 0.5;
    let geometric = (4f64.powi(k as i32 + 1) / std::f64::consts::PI.powi(2)).powf(p);
    let b = profile.beta0();
    let g: Vec<f64> = quadrature_nodes(profile.s0(), n_q)
        .iter()
        .map(|&s| {
            let m = profile.mu(s);
            (m * (2.0 * b - m)).max(0.0).powf(p)
        })
        .collect();
    let integral = simpson(&g, 2.0 * profile.s0() / (n_q - 1) as f64);
    Ok(geometric * integral / alpha_sq.sqrt())
}

/// `‖Af‖²/‖f‖²`.
pub fn angular_energy_ratio(cs: &CrossSection, f: &[f64]) -> f64 {
    let af = assemble_angular(cs).apply(f);
    dot(&af, &af) / dot(f, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        assert_eq!(gamma_beta0(1.0, 2.0), 1.0 / 192.0);
        assert_eq!(gamma_beta0(0.1, 1.0), 1.0 / 3.0);
        assert_eq!(gamma_beta0(0.25, 1.0), 1.0 / 3.0);
        assert_relative_eq!(alpha_sq(1.0 / 3.0, 0.01).unwrap(), 0.30333333333333334, max_relative = 1e-15);
        assert_relative_eq!(alpha_sq(1.0 / 192.0, 0.001).unwrap(), 1.0 / 192.0 - 0.003, max_relative = 1e-15);
        assert!(alpha_sq(0.3, 0.1).is_err());
        assert!(alpha_sq(0.3, 0.0).is_err());
        assert_eq!(lt_constant(1.5).unwrap(), 3.0 / 16.0);
        assert_eq!(lt_constant(2.5).unwrap(), 5.0 / 32.0);
        assert_eq!(lt_constant(0.5).unwrap(), 0.5);
        for s in [0.75, 1.0, 1.25, 2.0, 3.5, 7.0, 14.5] {
            let slow = (statrs::function::gamma::ln_gamma(s + 1.0) - statrs::function::gamma::ln_gamma(s + 1.5)).exp()
                / (4.0 * std::f64::consts::PI).sqrt();
            let slow = if s < 1.5 { 2.0 * slow } else { slow };
            assert_relative_eq!(lt_constant(s).unwrap(), slow, max_relative = 1e-12);
        }
        assert!(matches!(lt_constant(0.4), Err(Error::SigmaOutOfRange(_))));
    }

    #[test]
    fn trace_powers() {
        let spec = |v: Vec<f64>| Spectrum {
            eigenvectors: vec![],
            residuals: vec![0.0; v.len()],
            eigenvalues: v,
            iterations: 0,
            converged: true,
        };
        assert_eq!(trace_neg_power(&spec(vec![]), 2.0), 0.0);
        assert_eq!(trace_neg_power(&spec(vec![-1.0, -4.0]), 2.0), 17.0);
        assert_eq!(trace_neg_power(&spec(vec![-1.0, -4.0, 3.0]), 2.5), 33.0);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let xs = quadrature_nodes(1.0, 9);
        let g: Vec<f64> = xs.iter().map(|x| x * x * x + 2.0 * x * x - 1.0).collect();
        assert_relative_eq!(simpson(&g, 0.25), 4.0 / 3.0 - 2.0, max_relative = 1e-14);
    }

    #[test]
    fn ribbon_factor() {
        let p = TwistProfile::new(1.0, 0.01, 1.0).unwrap();
        let one = ribbon_lower_bound(1, 1.5, &p, 1.0).unwrap();
        let two = ribbon_lower_bound(2, 1.5, &p, 1.0).unwrap();
        assert_relative_eq!(two / one, 16.0, max_relative = 1e-12);
        let flat = TwistProfile::new(1.0, 0.0, 1.0).unwrap();
        assert_eq!(ribbon_lower_bound(1, 1.5, &flat, 1.0).unwrap(), 0.0);
        let geometric = (16.0 / std::f64::consts::PI.powi(2)).powi(2);
        assert_relative_eq!(geometric, 2.628091, max_relative = 1e-6);
    }

    #[test]
    fn gate_extrapolation() {
        let g = ConvergenceGate::new(0.1, 1.04, 0.05, 1.01);
        assert_relative_eq!(g.extrapolated, 1.0, max_relative = 1e-12);
        assert!(g.passed);
        let z = ConvergenceGate::new(0.1, 0.0, 0.05, 0.0);
        assert!(z.passed);
    }

    #[test]
    fn oscillating_integrand_is_flagged() {
        let g: Vec<f64> = (0..33).map(|k| if k % 2 == 0 { 1.0 } else { 2.0 }).collect();
        assert!(matches!(check_quadrature(&g), Err(Error::QuadratureTooCoarse { .. })));
        let smooth: Vec<f64> = (0..33).map(|k| ((k as f64 - 16.0) / 8.0).powi(2)).collect();
        assert!(check_quadrature(&smooth).is_ok());
    }
}
