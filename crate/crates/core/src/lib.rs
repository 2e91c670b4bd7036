//! Semiclassical edge wavepackets along curved domain walls.

pub mod eikonal;
pub mod expr;
pub mod fft;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod pde_reference;
pub mod quadrature;
pub mod spectral;
pub mod wavepacket;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Eikonal(#[from] eikonal::EikonalError),
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Wavepacket(#[from] wavepacket::WavepacketError),
    #[error(transparent)]
    Solver(#[from] pde_reference::SolverError),
    #[error(transparent)]
    Config(#[from] harness::config::ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
