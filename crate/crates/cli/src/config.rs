//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twistwave_core::{
    alpha_sq, gamma_beta0, BoundConfig, DirectConfig, EigenOptions, ShapeSpec, TwistProfile,
};

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "TWISTWAVE_WORKERS";

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shape: ShapeSpec,
    /// Grid spacing.
    #[serde(default = "default_h")]
    pub h: f64,
    /// Spacings for the `resolution` sweep when none are given on the
    /// command line.
    #[serde(default)]
    pub resolutions: Vec<f64>,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub direct: DirectSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub verbose: bool,
}

fn default_h() -> f64 {
    1.0 / 32.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub beta0: f64,
    /// Amplitude `a` of the slowdown.
    pub a: f64,
    pub s0: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { beta0: 1.0, a: 0.005, s0: 1.0 }
    }
}

impl ProfileConfig {
    pub fn build(&self) -> twistwave_core::Result<TwistProfile> {
        TwistProfile::new(self.beta0, self.a, self.s0)
    }
}

/// Direct 3D solve settings; `verify` requires `enabled`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectSection {
    pub enabled: bool,
    pub l_trunc: Option<f64>,
    pub n_s: Option<usize>,
    pub cap: usize,
    pub memory_budget: usize,
    pub eigen: EigenOptions,
}

impl Default for DirectSection {
    fn default() -> Self {
        let d = DirectConfig::default();
        DirectSection {
            enabled: false,
            l_trunc: d.l_trunc,
            n_s: d.n_s,
            cap: d.cap,
            memory_budget: d.memory_budget,
            eigen: d.eigen,
        }
    }
}

impl DirectSection {
    pub fn to_config(&self) -> DirectConfig {
        DirectConfig {
            l_trunc: self.l_trunc,
            n_s: self.n_s,
            cap: self.cap,
            memory_budget: self.memory_budget,
            eigen: self.eigen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    EllipseEps,
    RibbonK,
    Resolution,
    Amplitude,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::EllipseEps => "ellipse-eps",
            SweepAxis::RibbonK => "ribbon-k",
            SweepAxis::Resolution => "resolution",
            SweepAxis::Amplitude => "amplitude",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

/// A configuration problem; maps to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| invalid(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks every invariant the core types rely on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("h must be a positive number, got {}", self.h)));
        }
        for (k, r) in self.resolutions.iter().enumerate() {
            if !(*r > 0.0) {
                return Err(invalid(format!("resolutions[{k}] must be positive, got {r}")));
            }
        }
        self.shape.validate().map_err(|e| invalid(format!("shape: {e}")))?;
        self.profile.build().map_err(|e| invalid(format!("profile: {e}")))?;
        self.bound.validate().map_err(|e| invalid(format!("bound: {e}")))?;
        if let Some(c) = self.bound.c {
            let gamma = gamma_beta0(self.profile.beta0, self.shape.analytic_radius());
            alpha_sq(gamma, c).map_err(|e| invalid(format!("bound.c: {e}")))?;
        }
        if let Some(l) = self.direct.l_trunc {
            if !(l > self.profile.s0) {
                return Err(invalid(format!("direct.l_trunc must exceed profile.s0 = {}, got {l}", self.profile.s0)));
            }
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be at least 1"));
        }
        Ok(())
    }
}
