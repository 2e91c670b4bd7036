use std::f64::consts::PI;
use std::io::Write;

use super::wall::DomainWall;
use super::GeometryError;

/// Knobs for [`trace_level_set_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub step: f64,
    /// Arclength budget per tracing direction.
    pub max_length: f64,
    /// Largest single Newton correction accepted when projecting onto Γ.
    pub capture_radius: f64,
    pub newton_max_iter: usize,
    pub min_gradient: f64,
    /// Bound on |κ| at accepted samples.
    pub curve_tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            step: 0.005,
            max_length: 100.0,
            capture_radius: 0.5,
            newton_max_iter: 60,
            min_gradient: 1e-8,
            curve_tol: 1e-10,
        }
    }
}

/// One arclength sample of Γ with its frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveSample {
    pub s: f64,
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    /// Signed curvature k = τ'·ν.
    pub curvature: f64,
    /// Wall slope μ = ∇κ·ν = |∇κ|.
    pub slope: f64,
    /// Second normal derivative νᵀ(∇²κ)ν.
    pub normal_hessian: f64,
    /// Tangent angle, unwrapped along the curve.
    pub angle: f64,
}

/// The zero level set Γ of a wall, sampled at uniform arclength.
///
/// Samples are exact points of Γ (Newton-projected); the frame satisfies
/// `det[τ ν] = +1` with ν = ∇κ/|∇κ|, so μ > 0. Between samples γ is a
/// quintic Hermite interpolant (values, τ, kν) and scalar fields are
/// cubic Hermite.
#[derive(Clone, Debug)]
pub struct LevelCurve {
    samples: Vec<CurveSample>,
    spacing: f64,
    closed: bool,
    total_length: Option<f64>,
    /// Net change of the tangent angle over one loop (closed curves).
    winding: f64,
    d_curvature: Vec<f64>,
    d_slope: Vec<f64>,
    d_normal_hessian: Vec<f64>,
}

fn frame_from_gradient(g: [f64; 2]) -> ([f64; 2], [f64; 2], f64) {
    let norm = g[0].hypot(g[1]);
    let nu = [g[0] / norm, g[1] / norm];
    let tau = [nu[1], -nu[0]];
    (tau, nu, norm)
}

fn tangent_field(wall: &DomainWall, p: [f64; 2], min_gradient: f64) -> Result<[f64; 2], GeometryError> {
    let g = wall.gradient(p[0], p[1]);
    let n = g[0].hypot(g[1]);
    if !(n >= min_gradient) {
        return Err(GeometryError::DegenerateGradient { point: p, gradient_norm: n });
    }
    Ok([g[1] / n, -g[0] / n])
}

/// Newton projection onto κ = 0 along ∇κ.
pub(crate) fn project_onto_wall(
    wall: &DomainWall,
    mut p: [f64; 2],
    opts: &TraceOptions,
) -> Result<[f64; 2], GeometryError> {
    for _ in 0..opts.newton_max_iter {
        let j = wall.jet(p[0], p[1]);
        let g2 = j.dx * j.dx + j.dy * j.dy;
        if !(g2.sqrt() >= opts.min_gradient) {
            return Err(GeometryError::DegenerateGradient { point: p, gradient_norm: g2.sqrt() });
        }
        let c = j.v / g2;
        let d = [c * j.dx, c * j.dy];
        let len = d[0].hypot(d[1]);
        if !(len <= opts.capture_radius) {
            return Err(GeometryError::NoConvergence { point: p, residual: j.v });
        }
        p = [p[0] - d[0], p[1] - d[1]];
        if len <= 1e-15 * (1.0 + p[0].abs() + p[1].abs()) {
            return Ok(p);
        }
    }
    let r = wall.value(p[0], p[1]);
    if r.abs() <= opts.curve_tol {
        Ok(p)
    } else {
        Err(GeometryError::NoConvergence { point: p, residual: r })
    }
}

fn rk4_step(
    wall: &DomainWall,
    p: [f64; 2],
    h: f64,
    opts: &TraceOptions,
) -> Result<[f64; 2], GeometryError> {
    let k1 = tangent_field(wall, p, opts.min_gradient)?;
    let k2 = tangent_field(wall, [p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]], opts.min_gradient)?;
    let k3 = tangent_field(wall, [p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]], opts.min_gradient)?;
    let k4 = tangent_field(wall, [p[0] + h * k3[0], p[1] + h * k3[1]], opts.min_gradient)?;
    let q = [
        p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ];
    project_onto_wall(wall, q, opts)
}

fn sample_at(wall: &DomainWall, s: f64, p: [f64; 2], prev_angle: Option<f64>) -> CurveSample {
    let j = wall.jet(p[0], p[1]);
    let (tau, nu, mu) = frame_from_gradient(j.grad());
    let h = j.hessian();
    let quad = |a: [f64; 2], b: [f64; 2]| {
        a[0] * (h[0][0] * b[0] + h[0][1] * b[1]) + a[1] * (h[1][0] * b[0] + h[1][1] * b[1])
    };
    let mut angle = tau[1].atan2(tau[0]);
    if let Some(prev) = prev_angle {
        angle += 2.0 * PI * ((prev - angle) / (2.0 * PI)).round();
    }
    CurveSample {
        s,
        point: p,
        tangent: tau,
        normal: nu,
        curvature: -quad(tau, tau) / mu,
        slope: mu,
        normal_hessian: quad(nu, nu),
        angle,
    }
}

/// Traces Γ = κ⁻¹(0) through `seed` with default options.
pub fn trace_level_set(
    wall: &DomainWall,
    seed: [f64; 2],
    step: f64,
    max_length: f64,
) -> Result<LevelCurve, GeometryError> {
    trace_level_set_with(wall, seed, &TraceOptions { step, max_length, ..TraceOptions::default() })
}

enum ForwardOutcome {
    Closed { length: f64 },
    Open { points: Vec<[f64; 2]> },
}

/// Predictor (RK4 along the unit tangent field) / corrector (Newton along
/// ∇κ) tracing. Closed curves are detected when the path crosses the seed's
/// normal line near the seed; they are then re-traced with the spacing
/// adjusted so an integer number of steps spans the loop exactly.
pub fn trace_level_set_with(
    wall: &DomainWall,
    seed: [f64; 2],
    opts: &TraceOptions,
) -> Result<LevelCurve, GeometryError> {
    let h = opts.step;
    assert!(h > 0.0 && opts.max_length > h, "step and max_length must be positive");
    let p0 = project_onto_wall(wall, seed, opts)?;
    if !wall.bounds.contains(p0) {
        return Err(GeometryError::CurveLeavesDomain { point: p0 });
    }
    let tau0 = tangent_field(wall, p0, opts.min_gradient)?;

    let forward = {
        let mut pts = vec![p0];
        let mut p = p0;
        let mut s = 0.0;
        let mut outcome = None;
        while s + h <= opts.max_length {
            let q = rk4_step(wall, p, h, opts)?;
            if !wall.bounds.contains(q) {
                break;
            }
            let before = (p[0] - p0[0]) * tau0[0] + (p[1] - p0[1]) * tau0[1];
            let after = (q[0] - p0[0]) * tau0[0] + (q[1] - p0[1]) * tau0[1];
            let near = (q[0] - p0[0]).hypot(q[1] - p0[1]) < 3.0 * h;
            if s > 4.0 * h && near && before < 0.0 && after >= 0.0 {
                // locate the crossing with the seed's normal line
                let mut delta = h * (-before) / (after - before);
                for _ in 0..20 {
                    let r = rk4_step(wall, p, delta, opts)?;
                    let f = (r[0] - p0[0]) * tau0[0] + (r[1] - p0[1]) * tau0[1];
                    let t = tangent_field(wall, r, opts.min_gradient)?;
                    let fp = t[0] * tau0[0] + t[1] * tau0[1];
                    let step = f / fp;
                    delta -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                outcome = Some(ForwardOutcome::Closed { length: s + delta });
                break;
            }
            p = q;
            s += h;
            pts.push(p);
        }
        outcome.unwrap_or(ForwardOutcome::Open { points: pts })
    };

    match forward {
        ForwardOutcome::Closed { length } => {
            let n = ((length / h).round() as usize).max(8);
            let hh = length / n as f64;
            let mut samples = Vec::with_capacity(n);
            let mut p = p0;
            let mut prev = None;
            for i in 0..n {
                let smp = sample_at(wall, i as f64 * hh, p, prev);
                prev = Some(smp.angle);
                samples.push(smp);
                p = rk4_step(wall, p, hh, opts)?;
            }
            let end_angle = sample_at(wall, length, p, prev).angle;
            let winding = end_angle - samples[0].angle;
            Ok(LevelCurve::from_samples(samples, hh, true, Some(length), winding))
        }
        ForwardOutcome::Open { points: fwd } => {
            let mut back = Vec::new();
            let mut p = p0;
            let mut s = 0.0;
            while s + h <= opts.max_length {
                let q = rk4_step(wall, p, -h, opts)?;
                if !wall.bounds.contains(q) {
                    break;
                }
                p = q;
                s += h;
                back.push(p);
            }
            let mut samples = Vec::with_capacity(back.len() + fwd.len());
            let mut prev = None;
            let nb = back.len();
            for (i, p) in back.iter().rev().enumerate() {
                let smp = sample_at(wall, -((nb - i) as f64) * h, *p, prev);
                prev = Some(smp.angle);
                samples.push(smp);
            }
            for (i, p) in fwd.iter().enumerate() {
                let smp = sample_at(wall, i as f64 * h, *p, prev);
                prev = Some(smp.angle);
                samples.push(smp);
            }
            if samples.len() < 4 {
                return Err(GeometryError::CurveLeavesDomain { point: p0 });
            }
            Ok(LevelCurve::from_samples(samples, h, false, None, 0.0))
        }
    }
}

// Quintic Hermite basis on [0, 1] and derivatives.
fn quintic_basis(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * (t3 - 2.0 * t4 + t5),
    ]
}

fn quintic_basis_deriv(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
    ]
}

fn cubic_hermite(f0: f64, d0: f64, f1: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * h * d1
}

fn fd_derivatives(values: &[f64], h: f64, closed: bool) -> Vec<f64> {
    let n = values.len();
    let at = |i: isize| -> f64 { values[i.rem_euclid(n as isize) as usize] };
    (0..n)
        .map(|i| {
            let ii = i as isize;
            if closed || (i >= 2 && i + 2 < n) {
                (at(ii - 2) - 8.0 * at(ii - 1) + 8.0 * at(ii + 1) - at(ii + 2)) / (12.0 * h)
            } else if n < 3 {
                (values[n - 1] - values[0]) / (h * (n - 1) as f64)
            } else if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Location of an arclength inside the sample table.
#[derive(Clone, Copy, Debug)]
struct Locator {
    i0: usize,
    i1: usize,
    t: f64,
}

impl LevelCurve {
    fn from_samples(
        samples: Vec<CurveSample>,
        spacing: f64,
        closed: bool,
        total_length: Option<f64>,
        winding: f64,
    ) -> Self {
        let k: Vec<f64> = samples.iter().map(|s| s.curvature).collect();
        let mu: Vec<f64> = samples.iter().map(|s| s.slope).collect();
        let nh: Vec<f64> = samples.iter().map(|s| s.normal_hessian).collect();
        Self {
            d_curvature: fd_derivatives(&k, spacing, closed),
            d_slope: fd_derivatives(&mu, spacing, closed),
            d_normal_hessian: fd_derivatives(&nh, spacing, closed),
            samples,
            spacing,
            closed,
            total_length,
            winding,
        }
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn total_length(&self) -> Option<f64> {
        self.total_length
    }

    /// Net tangent rotation over one loop (±2π for a simple closed curve).
    pub fn winding(&self) -> f64 {
        self.winding
    }

    /// Parameter range: `[0, L)` when closed, `[s_first, s_last]` when open.
    pub fn s_range(&self) -> (f64, f64) {
        match self.total_length {
            Some(l) => (0.0, l),
            None => (self.samples[0].s, self.samples[self.samples.len() - 1].s),
        }
    }

    /// Reduces `s` into the parameter range; errors for open curves outside it.
    pub fn reduce(&self, s: f64) -> Result<f64, GeometryError> {
        match self.total_length {
            Some(l) => {
                let r = s.rem_euclid(l);
                Ok(if r >= l { 0.0 } else { r })
            }
            None => {
                let (a, b) = self.s_range();
                let tol = 1e-9 * self.spacing;
                if s < a - tol || s > b + tol {
                    Err(GeometryError::OutOfRange { s, min: a, max: b })
                } else {
                    Ok(s.clamp(a, b))
                }
            }
        }
    }

    fn locate(&self, s: f64) -> Result<Locator, GeometryError> {
        let r = self.reduce(s)?;
        let n = self.samples.len();
        let s0 = self.samples[0].s;
        let u = (r - s0) / self.spacing;
        if self.closed {
            let i0 = (u.floor() as usize).min(n - 1);
            Ok(Locator { i0, i1: (i0 + 1) % n, t: u - i0 as f64 })
        } else {
            let i0 = (u.floor().max(0.0) as usize).min(n - 2);
            Ok(Locator { i0, i1: i0 + 1, t: u - i0 as f64 })
        }
    }

    fn scalar(&self, loc: Locator, vals: impl Fn(&CurveSample) -> f64, ders: &[f64]) -> f64 {
        cubic_hermite(
            vals(&self.samples[loc.i0]),
            ders[loc.i0],
            vals(&self.samples[loc.i1]),
            ders[loc.i1],
            self.spacing,
            loc.t,
        )
    }

    /// γ(s).
    pub fn point(&self, s: f64) -> Result<[f64; 2], GeometryError> {
        let loc = self.locate(s)?;
        Ok(self.point_at(loc))
    }

    fn point_at(&self, loc: Locator) -> [f64; 2] {
        let (a, b) = (&self.samples[loc.i0], &self.samples[loc.i1]);
        let h = self.spacing;
        let w = quintic_basis(loc.t);
        let mut out = [0.0; 2];
        for d in 0..2 {
            out[d] = w[0] * a.point[d]
                + w[1] * h * a.tangent[d]
                + w[2] * h * h * a.curvature * a.normal[d]
                + w[3] * b.point[d]
                + w[4] * h * b.tangent[d]
                + w[5] * h * h * b.curvature * b.normal[d];
        }
        out
    }

    /// dγ/ds of the interpolant (unit up to interpolation error).
    pub fn derivative(&self, s: f64) -> Result<[f64; 2], GeometryError> {
        let loc = self.locate(s)?;
        Ok(self.derivative_at(loc))
    }

    fn derivative_at(&self, loc: Locator) -> [f64; 2] {
        let (a, b) = (&self.samples[loc.i0], &self.samples[loc.i1]);
        let h = self.spacing;
        let w = quintic_basis_deriv(loc.t);
        let mut out = [0.0; 2];
        for d in 0..2 {
            out[d] = (w[0] * a.point[d]
                + w[1] * h * a.tangent[d]
                + w[2] * h * h * a.curvature * a.normal[d]
                + w[3] * b.point[d]
                + w[4] * h * b.tangent[d]
                + w[5] * h * h * b.curvature * b.normal[d])
                / h;
        }
        out
    }

    /// Unit tangent and positively oriented unit normal at `s`.
    pub fn frame(&self, s: f64) -> Result<([f64; 2], [f64; 2]), GeometryError> {
        let d = self.derivative(s)?;
        let n = d[0].hypot(d[1]);
        let tau = [d[0] / n, d[1] / n];
        Ok((tau, [-tau[1], tau[0]]))
    }

    /// γ(s) together with its frame.
    pub fn point_and_frame(&self, s: f64) -> Result<([f64; 2], [f64; 2], [f64; 2]), GeometryError> {
        let loc = self.locate(s)?;
        let p = self.point_at(loc);
        let d = self.derivative_at(loc);
        let n = d[0].hypot(d[1]);
        let tau = [d[0] / n, d[1] / n];
        Ok((p, tau, [-tau[1], tau[0]]))
    }

    pub fn curvature(&self, s: f64) -> Result<f64, GeometryError> {
        let loc = self.locate(s)?;
        Ok(self.scalar(loc, |c| c.curvature, &self.d_curvature))
    }

    /// μ(s) = ∇κ·ν, cubic between samples.
    pub fn slope(&self, s: f64) -> Result<f64, GeometryError> {
        let loc = self.locate(s)?;
        Ok(self.scalar(loc, |c| c.slope, &self.d_slope))
    }

    pub fn normal_hessian(&self, s: f64) -> Result<f64, GeometryError> {
        let loc = self.locate(s)?;
        Ok(self.scalar(loc, |c| c.normal_hessian, &self.d_normal_hessian))
    }

    /// Tangent angle on the universal cover: continuous in `s ∈ ℝ` for
    /// closed curves, picking up `winding` per loop.
    pub fn angle(&self, s: f64) -> Result<f64, GeometryError> {
        let n = self.samples.len();
        let (loops, loc) = match self.total_length {
            Some(l) => ((s / l).floor(), self.locate(s)?),
            None => (0.0, self.locate(s)?),
        };
        // derivative of the angle is the curvature
        let a0 = self.samples[loc.i0].angle;
        let mut a1 = self.samples[loc.i1].angle;
        if self.closed && loc.i1 == 0 && loc.i0 == n - 1 {
            a1 += self.winding;
        }
        let base = cubic_hermite(
            a0,
            self.samples[loc.i0].curvature,
            a1,
            self.samples[loc.i1].curvature,
            self.spacing,
            loc.t,
        );
        Ok(base + loops * self.winding)
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.samples.iter().map(|s| s.curvature.abs()).fold(0.0, f64::max)
    }

    pub fn min_slope(&self) -> f64 {
        self.samples.iter().map(|s| s.slope).fold(f64::INFINITY, f64::min)
    }

    /// True when μ varies by less than `tol` (relative) over the samples.
    pub fn has_constant_slope(&self, tol: f64) -> bool {
        let lo = self.min_slope();
        let hi = self.samples.iter().map(|s| s.slope).fold(0.0, f64::max);
        hi - lo <= tol * hi
    }

    /// Writes the sample table as CSV: `s,x,y,tx,ty,nx,ny,k,mu`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["s", "x", "y", "tx", "ty", "nx", "ny", "k", "mu"])?;
        for c in &self.samples {
            wr.write_record(
                [c.s, c.point[0], c.point[1], c.tangent[0], c.tangent[1], c.normal[0], c.normal[1], c.curvature, c.slope]
                    .iter()
                    .map(|v| format!("{v:.17e}")),
            )?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `wall_slope(curve, s)`: the coefficient μ(s) of the linearized wall.
pub fn wall_slope(curve: &LevelCurve, s: f64) -> Result<f64, GeometryError> {
    curve.slope(s)
}
