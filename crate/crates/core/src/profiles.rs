//! Twist-rate profiles `θ̇(s) = β₀ − μ(s)` and the admissibility windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the slowdown `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFamily {
    /// `a·exp(1 − 1/(1 − (s/s0)²))` on `|s| < s0`.
    #[default]
    Bump,
}

/// A constant twist `beta0` slowed down by a compactly supported bump.
#[derive(Debug, Clone, Serialize)]
pub struct TwistProfile {
    beta0: f64,
    amplitude: f64,
    s0: f64,
    family: ProfileFamily,
    #[serde(skip)]
    mu_dot_sup: f64,
}

impl TwistProfile {
    pub fn new(beta0: f64, amplitude: f64, s0: f64) -> Result<Self> {
        Self::with_family(beta0, amplitude, s0, ProfileFamily::Bump)
    }

    pub fn with_family(beta0: f64, amplitude: f64, s0: f64, family: ProfileFamily) -> Result<Self> {
        if !(beta0.is_finite() && beta0 > 0.0) {
            return Err(Error::InvalidSpec(format!("beta0 must be positive, got {beta0}")));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidSpec(format!("amplitude a must be >= 0, got {amplitude}")));
        }
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(Error::InvalidSpec(format!("s0 must be positive, got {s0}")));
        }
        if amplitude >= beta0 {
            log::warn!("amplitude {amplitude} >= beta0 {beta0}: the twist reverses inside the support");
        }
        let mut p = TwistProfile { beta0, amplitude, s0, family, mu_dot_sup: 0.0 };
        p.mu_dot_sup = if amplitude == 0.0 {
            0.0
        } else {
            let x = golden_max(|s| p.mu_dot(s).abs(), 0.0, s0, 1e-12 * s0);
            p.mu_dot(x).abs()
        };
        Ok(p)
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn family(&self) -> ProfileFamily {
        self.family
    }

    /// `‖μ‖_∞`, attained at `s = 0`.
    pub fn mu_sup(&self) -> f64 {
        self.amplitude
    }

    /// `‖μ̇‖_∞`, located once by golden-section search.
    pub fn mu_dot_sup(&self) -> f64 {
        self.mu_dot_sup
    }

    pub fn mu(&self, s: f64) -> f64 {
        match self.family {
            ProfileFamily::Bump => {
                let x = s / self.s0;
                if x.abs() >= 1.0 || self.amplitude == 0.0 {
                    return 0.0;
                }
                self.amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
            }
        }
    }

    pub fn mu_dot(&self, s: f64) -> f64 {
        match self.family {
            ProfileFamily::Bump => {
                let x = s / self.s0;
                if x.abs() >= 1.0 || self.amplitude == 0.0 {
                    return 0.0;
                }
                let q = 1.0 - x * x;
                -self.mu(s) * 2.0 * x / (q * q * self.s0)
            }
        }
    }

    /// `θ̇(s) = β₀ − μ(s)`.
    pub fn theta_dot(&self, s: f64) -> f64 {
        self.beta0 - self.mu(s)
    }

    /// Check both admissibility windows for the given constants.
    pub fn check_admissibility(&self, c: f64, gamma: f64, alpha_sq: f64) -> Admissibility {
        check_admissibility(self, c, gamma, alpha_sq)
    }
}

/// Maximizer of a unimodal `g` on `[lo, hi]`.
fn golden_max(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while hi - lo > tol {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Diagnostic flags for the two admissibility windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub c: f64,
    pub gamma: f64,
    pub alpha_sq: f64,
    /// `‖μ‖_∞ < c·β₀` and `0 < c < γ/3`.
    pub theorem1_ok: bool,
    /// `max{2‖μ‖_∞/β₀, ‖μ̇‖_∞/(2β₀²)} < α²`.
    pub theorem2_ok: bool,
    pub messages: Vec<String>,
}

pub fn check_admissibility(profile: &TwistProfile, c: f64, gamma: f64, alpha_sq: f64) -> Admissibility {
    let b = profile.beta0();
    let mut messages = Vec::new();
    let c_ok = c > 0.0 && c < gamma / 3.0;
    if !c_ok {
        messages.push(format!("c = {c} lies outside (0, gamma/3) = (0, {})", gamma / 3.0));
    }
    let amp_ok = profile.mu_sup() < c * b;
    if !amp_ok {
        messages.push(format!(
            "sup mu = {} is not below c*beta0 = {}",
            profile.mu_sup(),
            c * b
        ));
    }
    let lhs = (2.0 * profile.mu_sup() / b).max(profile.mu_dot_sup() / (2.0 * b * b));
    let theorem2_ok = lhs < alpha_sq;
    if !theorem2_ok {
        messages.push(format!(
            "max(2 sup mu / beta0, sup |mu'| / (2 beta0^2)) = {lhs} is not below alpha^2 = {alpha_sq}"
        ));
    }
    if profile.amplitude() >= b {
        messages.push("amplitude reaches beta0; the twist changes sign".into());
    }
    Admissibility { c, gamma, alpha_sq, theorem1_ok: c_ok && amp_ok, theorem2_ok, messages }
}
