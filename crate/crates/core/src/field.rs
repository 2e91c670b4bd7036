//! Complex fields on uniform rectangular grids and their file formats.
//!
//! Binary layout (little endian): 8-byte magic `WWFIELD\0`, `u32` version,
//! `u32` nx, `u32` ny, `u32` kind, then `f64` x_min, y_min, hx, hy, time, ε,
//! then every component as `nx·ny` pairs `(re, im)` in row-major order
//! (x fastest).

use std::io::{Read, Write};

use num_complex::Complex64;
use thiserror::Error;

const MAGIC: &[u8; 8] = b"WWFIELD\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grids differ: {0}")]
    GridMismatch(String),
    #[error("not a field file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Uniform grid; point `(i, j)` is `(x_min + i·hx, y_min + j·hy)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, x_min: f64, y_min: f64, hx: f64, hy: f64) -> Self {
        Self { nx, ny, x_min, y_min, hx, hy }
    }

    /// Periodic grid with `nx × ny` cells on `[x_min, x_max) × [y_min, y_max)`.
    pub fn periodic(nx: usize, ny: usize, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self::new(nx, ny, x_min, y_min, (x_max - x_min) / nx as f64, (y_max - y_min) / ny as f64)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        [self.x(idx % self.nx), self.y(idx / self.nx)]
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.hx
    }

    pub fn ly(&self) -> f64 {
        self.ny as f64 * self.hy
    }

    pub fn matches(&self, other: &Grid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.x_min, other.x_min)
            && close(self.y_min, other.y_min)
            && close(self.hx, other.hx)
            && close(self.hy, other.hy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Two-component spinor.
    Dirac,
    /// Scalar.
    KleinGordon,
    /// Scalar `u` followed by `ε∂_t u`.
    KleinGordonWithVelocity,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::KleinGordon => 1,
            _ => 2,
        }
    }

    fn code(self) -> u32 {
        match self {
            FieldKind::Dirac => 0,
            FieldKind::KleinGordon => 1,
            FieldKind::KleinGordonWithVelocity => 2,
        }
    }

    fn from_code(c: u32) -> Option<Self> {
        match c {
            0 => Some(FieldKind::Dirac),
            1 => Some(FieldKind::KleinGordon),
            2 => Some(FieldKind::KleinGordonWithVelocity),
            _ => None,
        }
    }
}

/// Complex scalar or spinor samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub kind: FieldKind,
    pub time: f64,
    pub epsilon: f64,
    pub data: Vec<Vec<Complex64>>,
}

impl Field {
    pub fn zeros(grid: Grid, kind: FieldKind, time: f64, epsilon: f64) -> Self {
        let data = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; kind.components()];
        Self { grid, kind, time, epsilon, data }
    }

    /// Squared discrete L² norm of the physical components (the velocity
    /// slot of a Klein-Gordon state is excluded).
    pub fn norm_sqr(&self) -> f64 {
        let comps = if self.kind == FieldKind::KleinGordonWithVelocity { 1 } else { self.data.len() };
        self.data[..comps].iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// max over the grid of the pointwise (spinor) modulus.
    pub fn max_abs(&self) -> f64 {
        let comps = if self.kind == FieldKind::KleinGordonWithVelocity { 1 } else { self.data.len() };
        (0..self.grid.len())
            .map(|i| (0..comps).map(|c| self.data[c][i].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Pointwise squared modulus of the physical components.
    pub fn density(&self, idx: usize) -> f64 {
        let comps = if self.kind == FieldKind::KleinGordonWithVelocity { 1 } else { self.data.len() };
        (0..comps).map(|c| self.data[c][idx].norm_sqr()).sum()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), FieldError> {
        let g = &self.grid;
        w.write_all(MAGIC)?;
        for v in [VERSION, g.nx as u32, g.ny as u32, self.kind.code()] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [g.x_min, g.y_min, g.hx, g.hy, self.time, self.epsilon] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(16 * g.len());
        for comp in &self.data {
            buf.clear();
            for z in comp {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, FieldError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(FieldError::Format("bad magic".into()));
        }
        let mut u = [0u32; 4];
        for v in &mut u {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        if u[0] != VERSION {
            return Err(FieldError::Format(format!("unsupported version {}", u[0])));
        }
        let kind = FieldKind::from_code(u[3]).ok_or_else(|| FieldError::Format(format!("unknown kind {}", u[3])))?;
        let mut f = [0f64; 6];
        for v in &mut f {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let grid = Grid::new(u[1] as usize, u[2] as usize, f[0], f[1], f[2], f[3]);
        let mut data = Vec::with_capacity(kind.components());
        let mut bytes = vec![0u8; 16 * grid.len()];
        for _ in 0..kind.components() {
            r.read_exact(&mut bytes)?;
            let comp = bytes
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                    let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                    Complex64::new(re, im)
                })
                .collect();
            data.push(comp);
        }
        Ok(Self { grid, kind, time: f[4], epsilon: f[5], data })
    }

    /// Writes the row `j` (fixed y) as CSV `x,y,re0,im0[,re1,im1],abs`.
    pub fn write_row_csv<W: Write>(&self, w: W, j: usize) -> Result<(), FieldError> {
        let idx: Vec<usize> = (0..self.grid.nx).map(|i| j * self.grid.nx + i).collect();
        self.write_points_csv(w, &idx)
    }

    /// Writes the column `i` (fixed x) as CSV.
    pub fn write_column_csv<W: Write>(&self, w: W, i: usize) -> Result<(), FieldError> {
        let idx: Vec<usize> = (0..self.grid.ny).map(|j| j * self.grid.nx + i).collect();
        self.write_points_csv(w, &idx)
    }

    fn write_points_csv<W: Write>(&self, w: W, idx: &[usize]) -> Result<(), FieldError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string(), "y".to_string()];
        for c in 0..self.data.len() {
            header.push(format!("re{c}"));
            header.push(format!("im{c}"));
        }
        header.push("abs".into());
        wr.write_record(&header)?;
        for &k in idx {
            let p = self.grid.point(k);
            let mut rec = vec![format!("{:.9e}", p[0]), format!("{:.9e}", p[1])];
            for comp in &self.data {
                rec.push(format!("{:.9e}", comp[k].re));
                rec.push(format!("{:.9e}", comp[k].im));
            }
            rec.push(format!("{:.9e}", self.density(k).sqrt()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let grid = Grid::periodic(5, 3, -1.0, 1.0, -0.5, 0.25);
        let mut f = Field::zeros(grid, FieldKind::Dirac, 0.125, 0.01);
        for (c, comp) in f.data.iter_mut().enumerate() {
            for (i, z) in comp.iter_mut().enumerate() {
                *z = Complex64::new((i as f64).sin() / 3.0, c as f64 - 1e-300 * i as f64);
            }
        }
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 48 + 2 * 15 * 16);
        let g = Field::read_binary(buf.as_slice()).unwrap();
        assert_eq!(f, g);
        assert!(Field::read_binary(&buf[1..]).is_err());
    }

    #[test]
    fn norms_and_slices() {
        let grid = Grid::periodic(4, 4, 0.0, 2.0, 0.0, 2.0);
        let mut f = Field::zeros(grid, FieldKind::KleinGordonWithVelocity, 0.0, 0.1);
        f.data[0][5] = Complex64::new(3.0, 4.0);
        f.data[1][5] = Complex64::new(100.0, 0.0);
        assert!((f.l2_norm() - 5.0 * 0.5).abs() < 1e-15);
        assert_eq!(f.max_abs(), 5.0);
        let mut out = Vec::new();
        f.write_row_csv(&mut out, 1).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("x,y,re0,im0,re1,im1,abs"));
        assert_eq!(s.lines().count(), 5);
    }
}
