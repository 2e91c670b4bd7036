use std::collections::HashMap;
use std::sync::Arc;

use super::curve::LevelCurve;
use super::wall::Bounds;
use super::GeometryError;

/// Tubular coordinates Φ(x̃, ỹ) = γ(x̃) + ỹ ν(x̃) around Γ.
///
/// Defined on `|ỹ| ≤ 2η`; for closed Γ the map is a covering in x̃ and
/// [`phi_inverse`](Self::phi_inverse) returns the representative in `[0, L)`.
#[derive(Clone, Debug)]
pub struct RectificationMap {
    curve: Arc<LevelCurve>,
    eta: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
    cell: f64,
}

impl RectificationMap {
    /// Uses `eta` if given, else `min(0.4/max|k|, d)/2` with `d` the smallest
    /// normal distance from Γ to the boundary of `bounds`.
    pub fn new(curve: Arc<LevelCurve>, eta: Option<f64>, bounds: &Bounds) -> Result<Self, GeometryError> {
        let kmax = curve.max_abs_curvature();
        let eta = match eta {
            Some(e) => e,
            None => default_eta(&curve, bounds),
        };
        if !(eta > 0.0) || 2.0 * eta * kmax >= 1.0 {
            return Err(GeometryError::InvalidTube { eta, max_curvature: kmax });
        }
        let cell = 2.0 * eta + 2.0 * curve.spacing();
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, s) in curve.samples().iter().enumerate() {
            let key = ((s.point[0] / cell).floor() as i64, (s.point[1] / cell).floor() as i64);
            buckets.entry(key).or_default().push(i as u32);
        }
        Ok(Self { curve, eta, buckets, cell })
    }

    pub fn curve(&self) -> &LevelCurve {
        &self.curve
    }

    pub fn curve_arc(&self) -> Arc<LevelCurve> {
        Arc::clone(&self.curve)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn half_width(&self) -> f64 {
        2.0 * self.eta
    }

    /// Φ(x̃, ỹ).
    pub fn phi_forward(&self, s: f64, n: f64) -> Result<[f64; 2], GeometryError> {
        if n.abs() > 2.0 * self.eta {
            return Err(GeometryError::OutsideTube { point: [s, n], eta: self.eta });
        }
        let (p, _, nu) = self.curve.point_and_frame(s)?;
        Ok([p[0] + n * nu[0], p[1] + n * nu[1]])
    }

    /// det DΦ = 1 − ỹ k(x̃).
    pub fn jacobian(&self, s: f64, n: f64) -> Result<f64, GeometryError> {
        Ok(1.0 - n * self.curve.curvature(s)?)
    }

    fn nearest_sample(&self, p: [f64; 2]) -> Option<(usize, f64)> {
        let (ci, cj) = ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64);
        let mut best: Option<(usize, f64)> = None;
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(list) = self.buckets.get(&(ci + di, cj + dj)) {
                    for &i in list {
                        let q = self.curve.samples()[i as usize].point;
                        let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                        if best.map_or(true, |b| d < b.1) {
                            best = Some((i as usize, d));
                        }
                    }
                }
            }
        }
        best
    }

    /// Φ⁻¹(p) by Newton on the orthogonality condition (p − γ(x̃))·τ(x̃) = 0.
    pub fn phi_inverse(&self, p: [f64; 2]) -> Result<(f64, f64), GeometryError> {
        let limit = 2.0 * self.eta;
        let (i, d) = self.nearest_sample(p).ok_or(GeometryError::OutsideTube { point: p, eta: self.eta })?;
        if d > limit + self.curve.spacing() {
            return Err(GeometryError::OutsideTube { point: p, eta: self.eta });
        }
        let mut s = self.curve.samples()[i].s;
        let (s_lo, s_hi) = self.curve.s_range();
        let closed = self.curve.is_closed();
        let mut converged = false;
        for _ in 0..50 {
            let (g, tau, nu) = self.curve.point_and_frame(s)?;
            let r = [p[0] - g[0], p[1] - g[1]];
            let along = r[0] * tau[0] + r[1] * tau[1];
            let n = r[0] * nu[0] + r[1] * nu[1];
            let k = self.curve.curvature(s)?;
            let ds = along / (1.0 - n * k);
            s += ds;
            if closed {
                s = self.curve.reduce(s)?;
            } else if s < s_lo - self.curve.spacing() || s > s_hi + self.curve.spacing() {
                return Err(GeometryError::OutsideTube { point: p, eta: self.eta });
            } else {
                s = s.clamp(s_lo, s_hi);
            }
            if ds.abs() < 1e-14 * (1.0 + s.abs()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GeometryError::NoConvergence { point: p, residual: f64::NAN });
        }
        let (g, _, nu) = self.curve.point_and_frame(s)?;
        let n = (p[0] - g[0]) * nu[0] + (p[1] - g[1]) * nu[1];
        if n.abs() > limit {
            return Err(GeometryError::OutsideTube { point: p, eta: self.eta });
        }
        Ok((s, n))
    }
}

fn default_eta(curve: &LevelCurve, bounds: &Bounds) -> f64 {
    let kmax = curve.max_abs_curvature();
    let curv_limit = if kmax > 0.0 { 0.4 / kmax } else { f64::INFINITY };
    let boundary = curve
        .samples()
        .iter()
        .map(|c| {
            let up = bounds.exit_distance(c.point, c.normal);
            let down = bounds.exit_distance(c.point, [-c.normal[0], -c.normal[1]]);
            up.min(down)
        })
        .fold(f64::INFINITY, f64::min);
    0.5 * curv_limit.min(boundary)
}
