//! Domain wall κ, its zero level set Γ, the arclength frame, and the
//! tubular rectification map Φ.

mod curve;
mod tube;
mod wall;

pub use curve::{trace_level_set, trace_level_set_with, wall_slope, CurveSample, LevelCurve, TraceOptions};
pub use tube::RectificationMap;
pub use wall::{Bounds, DomainWall, WallKind};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("Newton projection onto the wall failed near ({:.6}, {:.6}), residual {residual:e}", point[0], point[1])]
    NoConvergence { point: [f64; 2], residual: f64 },
    #[error("|grad kappa| = {gradient_norm:e} is degenerate at ({:.6}, {:.6})", point[0], point[1])]
    DegenerateGradient { point: [f64; 2], gradient_norm: f64 },
    #[error("level curve leaves the domain at ({:.6}, {:.6})", point[0], point[1])]
    CurveLeavesDomain { point: [f64; 2] },
    #[error("point ({:.6}, {:.6}) is outside the tube of half-width 2*eta = {:.6}", point[0], point[1], 2.0 * eta)]
    OutsideTube { point: [f64; 2], eta: f64 },
    #[error("arclength {s} outside the traced range [{min}, {max}]")]
    OutOfRange { s: f64, min: f64, max: f64 },
    #[error("tube half-width eta = {eta} incompatible with max curvature {max_curvature} (need 2*eta*|k| < 1)")]
    InvalidTube { eta: f64, max_curvature: f64 },
}
