//! Two-dimensional FFTs on row-major `nx × ny` arrays.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.nx, self.ny)
    }
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: p.plan_fft_forward(nx),
            inv_x: p.plan_fft_inverse(nx),
            fwd_y: p.plan_fft_forward(ny),
            inv_y: p.plan_fft_inverse(ny),
        }
    }

    fn apply(&self, data: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.nx, self.ny);
        let rows = (ny / rayon::current_num_threads().max(1)).max(1);
        data.par_chunks_mut(nx * rows).for_each(|chunk| fx.process(chunk));
        let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
        transpose(data, &mut t, nx, ny);
        let cols = (nx / rayon::current_num_threads().max(1)).max(1);
        t.par_chunks_mut(ny * cols).for_each(|chunk| fy.process(chunk));
        transpose(&t, data, ny, nx);
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.fwd_x, &self.fwd_y);
    }

    /// Inverse transform including the `1/(nx·ny)` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inv_x, &self.inv_y);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], nx: usize, ny: usize) {
    // src is ny rows of nx; dst is nx rows of ny
    dst.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        for (j, d) in row.iter_mut().enumerate() {
            *d = src[j * nx + i];
        }
    });
}

/// Angular wavenumbers of an `n`-point periodic grid with spacing `h`.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let base = 2.0 * PI / (n as f64 * h);
    (0..n).map(|i| base * if i <= (n - 1) / 2 { i as f64 } else { i as f64 - n as f64 }).collect()
}

/// Smallest `m ≥ n` whose only prime factors are 2, 3 and 5.
pub fn fast_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_plane_wave() {
        let (nx, ny) = (12, 10);
        let f = Fft2::new(nx, ny);
        let mut d: Vec<Complex64> = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                Complex64::from_polar(1.0, 2.0 * PI * (3.0 * i as f64 / nx as f64 - 2.0 * j as f64 / ny as f64))
            })
            .collect();
        let orig = d.clone();
        f.forward(&mut d);
        for (k, z) in d.iter().enumerate() {
            let want = if k == (ny - 2) * nx + 3 { (nx * ny) as f64 } else { 0.0 };
            assert!((z - want).norm() < 1e-9);
        }
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn helpers() {
        assert_eq!(fast_size(601), 625);
        assert_eq!(fast_size(512), 512);
        let k = wavenumbers(4, 0.5);
        assert_eq!(k, vec![0.0, PI, -2.0 * PI, -PI]);
    }
}
