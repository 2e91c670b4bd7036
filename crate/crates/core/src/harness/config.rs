//! Declarative run configuration (TOML).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eikonal::{solve_phase, PhaseSolution};
use crate::expr::Expr;
use crate::geometry::{trace_level_set, Bounds, DomainWall, LevelCurve, RectificationMap};
use crate::pde_reference::Scheme;
use crate::spectral::{BranchSpec, Model, ModelSpec, Sign};
use crate::wavepacket::{Envelope, RealProfile, WavepacketSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
}

/// A config error blamed on `field`.
pub fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    #[serde(rename = "props")]
    Props,
    #[serde(rename = "custom")]
    Custom,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::E1 => "E1",
            ExperimentId::E2 => "E2",
            ExperimentId::E3 => "E3",
            ExperimentId::E4 => "E4",
            ExperimentId::E5 => "E5",
            ExperimentId::E6 => "E6",
            ExperimentId::Props => "props",
            ExperimentId::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallType {
    Flat,
    Circle,
    Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallConfig {
    pub kind: WallType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bounds: [f64; 4],
    /// Point near Γ where tracing starts; also the arclength origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<f64>,
    /// Klein-Gordon shift `m(x, y)`; defaults to `|∇κ|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<String>,
    /// Tube half-width η of the rectification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl WallConfig {
    pub fn flat(bounds: [f64; 4]) -> Self {
        Self {
            kind: WallType::Flat,
            radius: None,
            expression: None,
            bounds,
            seed: None,
            step: None,
            max_length: None,
            shift: None,
            eta: None,
        }
    }

    pub fn circle(radius: f64, bounds: [f64; 4]) -> Self {
        Self { kind: WallType::Circle, radius: Some(radius), ..Self::flat(bounds) }
    }

    pub fn build(&self) -> Result<DomainWall, ConfigError> {
        let [x0, x1, y0, y1] = self.bounds;
        if !(x0 < x1 && y0 < y1) {
            return Err(invalid("wall.bounds", "expected [x_min, x_max, y_min, y_max] with min < max"));
        }
        let b = Bounds::new(x0, x1, y0, y1);
        Ok(match self.kind {
            WallType::Flat => DomainWall::flat_y(b),
            WallType::Circle => {
                let r = self.radius.ok_or_else(|| invalid("wall.radius", "required for a circle wall"))?;
                if !(r > 0.0) {
                    return Err(invalid("wall.radius", "must be positive"));
                }
                DomainWall::circle(r, b)
            }
            WallType::Expr => {
                let src = self.expression.as_deref().ok_or_else(|| invalid("wall.expression", "required for an expr wall"))?;
                let e = Expr::parse(src).map_err(|e| invalid("wall.expression", e.to_string()))?;
                DomainWall::analytic(e, b)
            }
        })
    }

    pub fn shift_expr(&self) -> Result<Option<Expr>, ConfigError> {
        self.shift.as_deref().map(|s| Expr::parse(s).map_err(|e| invalid("wall.shift", e.to_string()))).transpose()
    }

    pub fn seed_point(&self) -> [f64; 2] {
        self.seed.unwrap_or(match self.kind {
            WallType::Circle => [self.radius.unwrap_or(1.0), 0.0],
            _ => [0.5 * (self.bounds[0] + self.bounds[1]), 0.0],
        })
    }

    pub fn trace(&self) -> Result<(DomainWall, Arc<LevelCurve>), ConfigError> {
        let wall = self.build()?;
        let step = self.step.unwrap_or(0.005);
        let max_length = self.max_length.unwrap_or(50.0);
        if !(step > 0.0 && max_length > step) {
            return Err(invalid("wall.step", "step and max_length must be positive with max_length > step"));
        }
        let curve = trace_level_set(&wall, self.seed_point(), step, max_length)
            .map_err(|e| invalid("wall", format!("tracing failed: {e}")))?;
        Ok((wall, Arc::new(curve)))
    }

    pub fn rectification(&self, wall: &DomainWall, curve: &Arc<LevelCurve>) -> Result<RectificationMap, ConfigError> {
        RectificationMap::new(Arc::clone(curve), self.eta, &wall.bounds).map_err(|e| invalid("wall.eta", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: Model,
    /// Semiclassical parameters, sorted descending.
    pub epsilon: Vec<f64>,
}

impl ModelConfig {
    pub fn specs(&self) -> Result<Vec<ModelSpec>, ConfigError> {
        if self.epsilon.is_empty() {
            return Err(invalid("model.epsilon", "at least one value is required"));
        }
        if self.epsilon.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("model.epsilon", "values must be sorted strictly descending"));
        }
        self.epsilon
            .iter()
            .map(|&e| ModelSpec::new(self.kind, e).map_err(|err| invalid("model.epsilon", err.to_string())))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub m: u32,
    pub sign: Sign,
}

impl BranchConfig {
    pub fn build(&self, model: Model) -> Result<BranchSpec, ConfigError> {
        BranchSpec::new(model, self.m, self.sign).map_err(|e| invalid("branch", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeConfig {
    /// Frequency envelope `exp(−(ξ−c)²/(4σ²))`.
    Gaussian { center: f64, width: f64 },
    /// Smooth bump supported in `[min, max]`.
    Bump { min: f64, max: f64 },
    /// Real-space Gaussian profile of width `width` in `(x̃ − x̃_c)/√ε` (relativistic branches).
    Profile { width: f64 },
}

impl EnvelopeConfig {
    pub fn envelope(&self) -> Result<Envelope, ConfigError> {
        match *self {
            EnvelopeConfig::Gaussian { center, width } => {
                Envelope::gaussian(center, width).map_err(|e| invalid("envelope", e.to_string()))
            }
            EnvelopeConfig::Bump { min, max } => Envelope::bump(min, max).map_err(|e| invalid("envelope", e.to_string())),
            EnvelopeConfig::Profile { .. } => {
                Err(invalid("envelope.kind", "a real-space profile only describes relativistic branches"))
            }
        }
    }

    pub fn profile(&self) -> Result<RealProfile, ConfigError> {
        match *self {
            EnvelopeConfig::Profile { width } if width > 0.0 => Ok(RealProfile::gaussian(width)),
            EnvelopeConfig::Profile { .. } => Err(invalid("envelope.width", "must be positive")),
            _ => Ok(RealProfile::from_envelope(self.envelope()?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Grid points per `√ε`.
    #[serde(default = "default_ppse")]
    pub points_per_sqrt_eps: f64,
    /// Transverse padding in units of `√(ε/μ)`.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Largest admissible points per direction.
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_ppse() -> f64 {
    8.0
}
fn default_margin() -> f64 {
    60f64.sqrt()
}
fn default_max_points() -> usize {
    2048
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points_per_sqrt_eps: default_ppse(), margin: default_margin(), max_points: default_max_points() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Dirac time step in units of `√ε`.
    #[serde(default = "default_dt")]
    pub dt_over_sqrt_eps: f64,
    /// Klein-Gordon time step as a fraction of the stability limit.
    #[serde(default = "default_kg_fraction")]
    pub kg_stability_fraction: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Yoshida4
}
fn default_dt() -> f64 {
    0.04
}
fn default_kg_fraction() -> f64 {
    0.5
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { scheme: default_scheme(), dt_over_sqrt_eps: default_dt(), kg_stability_fraction: default_kg_fraction() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentId>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall: Option<WallConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: None,
            seed: 0,
            output: None,
            wall: None,
            model: None,
            branch: None,
            envelope: None,
            x0: None,
            times: None,
            grid: GridConfig::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        if let Some(w) = &self.wall {
            w.build()?;
            w.shift_expr()?;
        }
        if let Some(m) = &self.model {
            m.specs()?;
            if let Some(b) = &self.branch {
                b.build(m.kind)?;
            }
        }
        if let Some(e) = &self.envelope {
            match e {
                EnvelopeConfig::Profile { .. } => {
                    e.profile()?;
                }
                _ => {
                    e.envelope()?;
                }
            }
        }
        if let Some(ts) = &self.times {
            if ts.iter().any(|t| !t.is_finite()) {
                return Err(invalid("times", "must be finite"));
            }
        }
        if !(self.grid.points_per_sqrt_eps >= 2.0) {
            return Err(invalid("grid.points_per_sqrt_eps", "must be at least 2"));
        }
        if !(self.solver.dt_over_sqrt_eps > 0.0) {
            return Err(invalid("solver.dt_over_sqrt_eps", "must be positive"));
        }
        if !(self.solver.kg_stability_fraction > 0.0 && self.solver.kg_stability_fraction < 1.0) {
            return Err(invalid("solver.kg_stability_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn require_wall(&self) -> Result<&WallConfig, ConfigError> {
        self.wall.as_ref().ok_or_else(|| invalid("wall", "missing"))
    }

    pub fn require_model(&self) -> Result<&ModelConfig, ConfigError> {
        self.model.as_ref().ok_or_else(|| invalid("model", "missing"))
    }

    pub fn require_branch(&self) -> Result<BranchConfig, ConfigError> {
        self.branch.ok_or_else(|| invalid("branch", "missing"))
    }

    pub fn require_envelope(&self) -> Result<&EnvelopeConfig, ConfigError> {
        self.envelope.as_ref().ok_or_else(|| invalid("envelope", "missing"))
    }

    pub fn require_times(&self) -> Result<&[f64], ConfigError> {
        self.times.as_deref().ok_or_else(|| invalid("times", "missing"))
    }
}

/// Phase and wavepacket for a dispersive branch described by a config.
pub fn build_packet(
    model: &ModelSpec,
    branch: &BranchSpec,
    curve: Arc<LevelCurve>,
    x0: f64,
    envelope: Envelope,
    x_range: (f64, f64),
) -> Result<WavepacketSpec, ConfigError> {
    let support = envelope.support();
    let phase: PhaseSolution = solve_phase(model, branch, curve, x0, &[support], x_range)
        .map_err(|e| invalid("envelope", format!("phase construction failed: {e}")))?;
    WavepacketSpec::new(Arc::new(phase), envelope).map_err(|e| invalid("envelope", e.to_string()))
}
