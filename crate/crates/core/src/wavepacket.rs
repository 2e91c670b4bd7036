//! Wavepackets along Γ.
//!
//! In tube coordinates the leading term of the ansatz is
//! `v(t, x̃, ỹ) = ε^{-1/2} ∫ e^{iG(t,x̃,ξ)/√ε} f(ξ) P(ξ, ỹ/√ε) dξ`
//! with `P` the normalized transverse eigenfunction. Each profile is a short
//! sum of `spinor · μ^{1/4} φ_n(√μ z)` terms, so `v` is a sum of products of
//! a longitudinal integral and an explicit transverse factor.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::eikonal::{phase_hessian, stationary_point, EikonalError, PhaseSolution};
use crate::field::{Field, FieldKind, Grid};
use crate::geometry::{GeometryError, LevelCurve, RectificationMap};
use crate::quadrature::PanelRule;
use crate::spectral::{self, hermite_all, BranchKind, BranchSpec, Model, ModelSpec};

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WavepacketError {
    #[error("xi quadrature needs {needed} nodes, limit is {limit}")]
    UnderResolvedQuadrature { needed: usize, limit: usize },
    #[error("outside the validity of the construction: {0}")]
    OutsideValidity(String),
    #[error("no stationary point in the frequency support: the field is negligible here")]
    NoStationaryPoint,
    #[error("degenerate phase Hessian {0:e}")]
    DegenerateHessian(f64),
    #[error("invalid branch: {0}")]
    InvalidBranch(String),
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error(transparent)]
    Eikonal(#[from] EikonalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Frequency envelope `f(ξ)`, normalized in L²(dξ).
#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    /// `f ∝ exp(−(ξ−c)²/(4σ²))`, so `|f|²` is a normal density of width σ.
    Gaussian { center: f64, width: f64, scale: f64 },
    /// `f ∝ exp(−1/(1−u²))` with `u` mapping `[min, max]` to `[−1, 1]`.
    Bump { min: f64, max: f64, scale: f64 },
}

impl Envelope {
    pub fn gaussian(center: f64, width: f64) -> Result<Self, WavepacketError> {
        if !(width > 0.0) || !center.is_finite() {
            return Err(WavepacketError::InvalidEnvelope(format!("gaussian width {width} must be positive")));
        }
        Ok(Envelope::Gaussian { center, width, scale: (2.0 * PI * width * width).powf(-0.25) })
    }

    pub fn bump(min: f64, max: f64) -> Result<Self, WavepacketError> {
        if !(min < max) {
            return Err(WavepacketError::InvalidEnvelope(format!("bump needs min < max, got [{min}, {max}]")));
        }
        let raw = Envelope::Bump { min, max, scale: 1.0 };
        let n2 = PanelRule::new(min, max, 64, 16).integrate(|x| raw.eval(x).powi(2));
        Ok(Envelope::Bump { min, max, scale: 1.0 / n2.sqrt() })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            Envelope::Gaussian { center, width, scale } => {
                let d = xi - center;
                scale * (-d * d / (4.0 * width * width)).exp()
            }
            Envelope::Bump { min, max, scale } => {
                let u = (2.0 * xi - min - max) / (max - min);
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    scale * (-1.0 / (1.0 - u * u)).exp()
                }
            }
        }
    }

    /// Quadrature window; `f` is below `1e-14·max f` outside it.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Envelope::Gaussian { center, width, .. } => (center - 12.0 * width, center + 12.0 * width),
            Envelope::Bump { min, max, .. } => (min, max),
        }
    }

    /// Width of the packet in the scaled variable `X = x̃/√ε` beyond which
    /// the Fourier synthesis of `f` is negligible.
    pub fn spatial_extent(&self) -> f64 {
        match *self {
            Envelope::Gaussian { width, .. } => 9.0 / width,
            Envelope::Bump { min, max, .. } => 120.0 / (max - min),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        let (a, b) = self.support();
        PanelRule::new(a, b, 64, 16).integrate(|x| self.eval(x).powi(2))
    }
}

/// Leading-order (J = 0) wavepacket on one branch.
#[derive(Clone, Debug)]
pub struct WavepacketSpec {
    pub phase: Arc<PhaseSolution>,
    pub envelope: Envelope,
    order: u32,
}

impl WavepacketSpec {
    pub fn new(phase: Arc<PhaseSolution>, envelope: Envelope) -> Result<Self, WavepacketError> {
        let (a, b) = envelope.support();
        let inside = phase.support().iter().any(|&(lo, hi)| lo <= a + 1e-12 && b <= hi + 1e-12);
        if !inside {
            return Err(WavepacketError::InvalidEnvelope(format!(
                "envelope window [{a}, {b}] not contained in the phase support {:?}",
                phase.support()
            )));
        }
        Ok(Self { phase, envelope, order: 0 })
    }

    /// Only the leading order J = 0 is implemented.
    pub fn with_order(self, order: u32) -> Result<Self, WavepacketError> {
        if order != 0 {
            return Err(WavepacketError::OutsideValidity(format!("expansion order J = {order} is not implemented")));
        }
        Ok(self)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn model(&self) -> &ModelSpec {
        self.phase.model()
    }

    pub fn branch(&self) -> &BranchSpec {
        self.phase.branch()
    }

    pub fn x0(&self) -> f64 {
        self.phase.x0()
    }

    pub fn epsilon(&self) -> f64 {
        self.phase.model().epsilon()
    }

    pub fn field_kind(&self) -> FieldKind {
        match self.model().model() {
            Model::Dirac => FieldKind::Dirac,
            Model::KleinGordon => FieldKind::KleinGordon,
        }
    }

    /// Arclength window outside of which the packet at time `t` is negligible.
    pub fn window(&self, t: f64) -> (f64, f64) {
        let (a, b) = self.envelope.support();
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for i in 0..=64 {
            let xi = a + (b - a) * i as f64 / 64.0;
            let v = self.phase.energy(xi).1;
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        let spread = self.envelope.spatial_extent() * self.epsilon().sqrt();
        let (lo, hi) = if t >= 0.0 { (vmin * t, vmax * t) } else { (vmax * t, vmin * t) };
        let pad = 0.1 * (hi - lo) + spread;
        (self.x0() + lo - pad, self.x0() + hi + pad)
    }

    /// Message when `√ε·|t|` exceeds `horizon` (default 0.5).
    pub fn validity_warning(&self, t: f64, horizon: f64) -> Option<String> {
        let s = self.epsilon().sqrt() * t.abs();
        (s > horizon).then(|| format!("sqrt(eps)*|t| = {s:.3} exceeds the validity horizon {horizon}"))
    }
}

/// Composite Gauss–Legendre rule in ξ resolving the phase oscillations.
#[derive(Clone, Debug)]
pub struct XiQuadrature {
    pub rule: PanelRule,
    /// Number of oscillations of `G/√ε` across the support.
    pub oscillations: f64,
}

impl XiQuadrature {
    pub const ORDER: usize = 16;
    pub const POINTS_PER_OSCILLATION: f64 = 8.0;
    pub const DEFAULT_LIMIT: usize = 400_000;

    /// `max_rate` bounds `|∂_ξ G|` over the evaluation window.
    pub fn new(support: (f64, f64), max_rate: f64, sqrt_eps: f64, limit: usize) -> Result<Self, WavepacketError> {
        let (a, b) = support;
        let oscillations = max_rate * (b - a) / (2.0 * PI * sqrt_eps);
        let needed = (Self::POINTS_PER_OSCILLATION * (oscillations + 2.0)).ceil() as usize;
        let panels = needed.div_ceil(Self::ORDER).max(24);
        let total = panels * Self::ORDER;
        if total > limit {
            return Err(WavepacketError::UnderResolvedQuadrature { needed: total, limit });
        }
        let rule = PanelRule::new(a, b, panels, Self::ORDER);
        let q = Self { rule, oscillations };
        debug_assert!(q.points_per_oscillation() >= Self::POINTS_PER_OSCILLATION);
        Ok(q)
    }

    pub fn points_per_oscillation(&self) -> f64 {
        if self.oscillations <= 0.0 {
            f64::INFINITY
        } else {
            self.rule.len() as f64 / self.oscillations
        }
    }
}

fn max_phase_rate(spec: &WavepacketSpec, t: f64, xs: &[f64]) -> Result<f64, WavepacketError> {
    let (a, b) = spec.envelope.support();
    let mut rate: f64 = 0.0;
    let xe = [xs[0], xs[xs.len() - 1]];
    for i in 0..=8 {
        let xi = a + (b - a) * i as f64 / 8.0;
        for &x in &xe {
            rate = rate.max(spec.phase.g_xi(t, x, xi)?.abs());
        }
    }
    Ok(1.25 * rate + 1.0)
}

#[derive(Clone, Debug)]
struct TermShape {
    hermite: usize,
    direction: [Complex64; 2],
}

fn term_shapes(branch: &BranchSpec, mu: f64) -> Vec<TermShape> {
    let e = spectral::energy_unchecked(branch, 1.0, mu);
    spectral::profile_unchecked(branch, e, 1.0, mu)
        .terms
        .iter()
        .map(|t| TermShape { hermite: t.hermite, direction: [C0 + 1.0, t.spinor[1] / t.spinor[0]] })
        .collect()
}

fn term_coefficients(branch: &BranchSpec, b: f64, k: f64, mu: f64, out: &mut [f64]) {
    let p = spectral::profile_unchecked(branch, b, k, mu);
    for (o, t) in out.iter_mut().zip(&p.terms) {
        *o = t.spinor[0].re;
    }
}

/// Longitudinal integrals `∫ e^{iG/√ε} f α_j dξ` (and the same with the
/// extra factor `−i√ε B` that produces `ε∂_t`) at sorted `xs`.
struct Longitudinal {
    shapes: Vec<TermShape>,
    values: Vec<Vec<Complex64>>,
    dt_values: Vec<Vec<Complex64>>,
}

fn longitudinal(spec: &WavepacketSpec, t: f64, xs: &[f64], limit: usize) -> Result<Longitudinal, WavepacketError> {
    let phase = &spec.phase;
    let (lo, hi) = phase.valid_range();
    if xs[0] < lo - 1e-9 || xs[xs.len() - 1] > hi + 1e-9 {
        return Err(WavepacketError::OutsideValidity(format!(
            "arclength window [{}, {}] leaves the turning-point-free range [{lo}, {hi}]",
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    let se = spec.epsilon().sqrt();
    let rate = max_phase_rate(spec, t, xs)?;
    let quad = XiQuadrature::new(spec.envelope.support(), rate, se, limit)?;
    let branch = *spec.branch();
    let shapes = term_shapes(&branch, phase.mu0());
    let nt = shapes.len();
    let nx = xs.len();
    let constant = phase.has_constant_slope() || branch.kind() == BranchKind::Relativistic;
    let mus: Vec<f64> = if constant {
        vec![phase.mu0(); nx]
    } else {
        xs.iter().map(|&x| phase.mu(x)).collect::<Result<_, _>>()?
    };
    let nodes: Vec<(f64, f64)> = quad.rule.nodes.iter().copied().zip(quad.rule.weights.iter().copied()).collect();
    // fixed chunks summed in order keep the result independent of scheduling
    let partials: Vec<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> = nodes
        .par_chunks(nodes.len().div_ceil(64).max(64))
        .map(|part| -> Result<_, WavepacketError> {
            let mut acc = vec![vec![C0; nx]; nt];
            let mut acc_dt = vec![vec![C0; nx]; nt];
            let mut alpha = vec![0.0; nt];
            for &(xi, w) in part {
                let f = spec.envelope.eval(xi);
                if f == 0.0 {
                    continue;
                }
                let (b, _, _) = phase.energy(xi);
                let tab = phase.tabulate(xs, xi)?;
                if constant {
                    term_coefficients(&branch, b, xi, phase.mu0(), &mut alpha);
                }
                let dt_factor = Complex64::new(0.0, -se * b);
                for (i, v) in tab.iter().enumerate() {
                    if !constant {
                        term_coefficients(&branch, b, v.k, mus[i], &mut alpha);
                    }
                    let e = Complex64::from_polar(w * f, (-b * t + v.a) / se);
                    for j in 0..nt {
                        let c = e * alpha[j];
                        acc[j][i] += c;
                        acc_dt[j][i] += c * dt_factor;
                    }
                }
            }
            Ok((acc, acc_dt))
        })
        .collect::<Result<_, _>>()?;
    let mut values = vec![vec![C0; nx]; nt];
    let mut dt_values = vec![vec![C0; nx]; nt];
    for (a, ad) in partials {
        for j in 0..nt {
            for i in 0..nx {
                values[j][i] += a[j][i];
                dt_values[j][i] += ad[j][i];
            }
        }
    }
    Ok(Longitudinal { shapes, values, dt_values })
}

fn transverse(shapes: &[TermShape], mu: f64, n: f64, sqrt_eps: f64, out: &mut [f64]) {
    let nmax = shapes.iter().map(|s| s.hermite).max().unwrap_or(0);
    let phis = hermite_all(nmax, mu.sqrt() * n / sqrt_eps);
    let scale = mu.powf(0.25) / sqrt_eps;
    for (o, s) in out.iter_mut().zip(shapes) {
        *o = scale * phis[s.hermite];
    }
}

/// Anything that can be sampled in tube coordinates `(x̃, ỹ)`.
pub trait RectifiedSource: Sync {
    fn kind(&self) -> FieldKind;
    fn time(&self) -> f64;
    fn epsilon(&self) -> f64;
    /// Arclength window (on the universal cover) outside of which the source vanishes.
    fn x_range(&self) -> (f64, f64);
    fn eval(&self, s: f64, n: f64) -> [Complex64; 2];
    /// `ε∂_t` of the field, when the source knows it.
    fn eval_dt(&self, _s: f64, _n: f64) -> Option<[Complex64; 2]> {
        None
    }
}

/// A wavepacket at fixed `t`, with longitudinal integrals tabulated on a
/// uniform arclength grid and interpolated by 6-point Lagrange stencils.
#[derive(Clone, Debug)]
pub struct SeparablePacket {
    kind: FieldKind,
    t: f64,
    eps: f64,
    phase: Arc<PhaseSolution>,
    x_start: f64,
    h: f64,
    n: usize,
    shapes: Vec<TermShape>,
    values: Vec<Vec<Complex64>>,
    dt_values: Vec<Vec<Complex64>>,
}

impl SeparablePacket {
    /// Tabulates on `window` (default [`WavepacketSpec::window`]) with spacing `√ε/24`.
    pub fn new(spec: &WavepacketSpec, t: f64, window: Option<(f64, f64)>) -> Result<Self, WavepacketError> {
        Self::with_limit(spec, t, window, XiQuadrature::DEFAULT_LIMIT)
    }

    pub fn with_limit(
        spec: &WavepacketSpec,
        t: f64,
        window: Option<(f64, f64)>,
        limit: usize,
    ) -> Result<Self, WavepacketError> {
        let (a, b) = window.unwrap_or_else(|| spec.window(t));
        let (vlo, vhi) = spec.phase.valid_range();
        let (a, b) = (a.max(vlo), b.min(vhi));
        if !(a < b) {
            return Err(WavepacketError::OutsideValidity("empty arclength window".into()));
        }
        let h = spec.epsilon().sqrt() / 24.0;
        let n = ((b - a) / h).ceil() as usize + 1;
        let xs: Vec<f64> = (0..n).map(|i| (a + i as f64 * h).min(vhi)).collect();
        let lon = longitudinal(spec, t, &xs, limit)?;
        Ok(Self {
            kind: spec.field_kind(),
            t,
            eps: spec.epsilon(),
            phase: Arc::clone(&spec.phase),
            x_start: a,
            h,
            n,
            shapes: lon.shapes,
            values: lon.values,
            dt_values: lon.dt_values,
        })
    }

    fn interp(&self, table: &[Complex64], s: f64) -> Option<Complex64> {
        let u = (s - self.x_start) / self.h;
        if u < 0.0 || u > (self.n - 1) as f64 {
            return None;
        }
        let i = (u.floor() as isize - 2).clamp(0, self.n as isize - 6) as usize;
        Some(lagrange_uniform(&table[i..i + 6], u - i as f64))
    }

    fn combine(&self, tables: &[Vec<Complex64>], s: f64, n: f64) -> [Complex64; 2] {
        let mu = match self.phase.mu(s) {
            Ok(m) => m,
            Err(_) => return [C0; 2],
        };
        let mut g = [0.0; 2];
        transverse(&self.shapes, mu, n, self.eps.sqrt(), &mut g);
        let mut out = [C0; 2];
        for (j, sh) in self.shapes.iter().enumerate() {
            let Some(v) = self.interp(&tables[j], s) else { return [C0; 2] };
            let c = v * g[j];
            out[0] += sh.direction[0] * c;
            out[1] += sh.direction[1] * c;
        }
        if self.kind == FieldKind::KleinGordon {
            out[1] = C0;
        }
        out
    }

    /// `max_{x̃, ỹ} |v|` over the tabulated window and `|ỹ| ≤ 6√(ε/μ0)`.
    pub fn max_abs(&self) -> f64 {
        let se = self.eps.sqrt();
        let mu = self.phase.mu0();
        let ny = 241;
        let yh = 12.0 * se / mu.sqrt() / (ny - 1) as f64;
        let mut best: f64 = 0.0;
        for k in 0..ny {
            let n = -6.0 * se / mu.sqrt() + k as f64 * yh;
            let mut g = [0.0; 2];
            transverse(&self.shapes, mu, n, se, &mut g);
            for i in 0..self.n {
                let mut out = [C0; 2];
                for (j, sh) in self.shapes.iter().enumerate() {
                    let c = self.values[j][i] * g[j];
                    out[0] += sh.direction[0] * c;
                    out[1] += sh.direction[1] * c;
                }
                best = best.max((out[0].norm_sqr() + out[1].norm_sqr()).sqrt());
            }
        }
        best
    }

    /// Arclength nodes of the table.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x_start + i as f64 * self.h).collect()
    }

    /// `∫|v|² dỹ` at each node (the transverse profile has unit norm per term
    /// and distinct Hermite indices are orthogonal).
    pub fn line_density(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut by_h: std::collections::BTreeMap<usize, [Complex64; 2]> = Default::default();
                for (j, sh) in self.shapes.iter().enumerate() {
                    let e = by_h.entry(sh.hermite).or_insert([C0; 2]);
                    e[0] += sh.direction[0] * self.values[j][i];
                    e[1] += sh.direction[1] * self.values[j][i];
                }
                by_h.values().map(|v| v[0].norm_sqr() + v[1].norm_sqr()).sum::<f64>() / self.eps.sqrt()
            })
            .collect()
    }
}

impl RectifiedSource for SeparablePacket {
    fn kind(&self) -> FieldKind {
        self.kind
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn epsilon(&self) -> f64 {
        self.eps
    }
    fn x_range(&self) -> (f64, f64) {
        (self.x_start, self.x_start + (self.n - 1) as f64 * self.h)
    }
    fn eval(&self, s: f64, n: f64) -> [Complex64; 2] {
        self.combine(&self.values, s, n)
    }
    fn eval_dt(&self, s: f64, n: f64) -> Option<[Complex64; 2]> {
        Some(self.combine(&self.dt_values, s, n))
    }
}

fn lagrange_uniform(v: &[Complex64], u: f64) -> Complex64 {
    let m = v.len();
    let mut out = C0;
    for i in 0..m {
        let mut w = 1.0;
        for j in 0..m {
            if j != i {
                w *= (u - j as f64) / (i as f64 - j as f64);
            }
        }
        out += v[i] * w;
    }
    out
}

/// The ansatz sampled on a tensor grid of tube coordinates.
#[derive(Clone, Debug)]
pub struct RectifiedGrid {
    pub kind: FieldKind,
    pub time: f64,
    pub epsilon: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Per component, row-major with x̃ fastest.
    pub data: Vec<Vec<Complex64>>,
}

/// Evaluates `v(t, x̃, ỹ)` on `xs × ys` by direct ξ-quadrature.
pub fn assemble_rectified(
    spec: &WavepacketSpec,
    t: f64,
    xs: &[f64],
    ys: &[f64],
) -> Result<RectifiedGrid, WavepacketError> {
    if xs.is_empty() || ys.is_empty() || xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WavepacketError::OutsideValidity("sample coordinates must be strictly increasing".into()));
    }
    let lon = longitudinal(spec, t, xs, XiQuadrature::DEFAULT_LIMIT)?;
    let se = spec.epsilon().sqrt();
    let kind = spec.field_kind();
    let mut data = vec![vec![C0; xs.len() * ys.len()]; kind.components()];
    let mut g = [0.0; 2];
    for (jy, &n) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let mu = spec.phase.mu(x)?;
            transverse(&lon.shapes, mu, n, se, &mut g);
            for (j, sh) in lon.shapes.iter().enumerate() {
                let c = lon.values[j][ix] * g[j];
                for (comp, d) in data.iter_mut().enumerate() {
                    d[jy * xs.len() + ix] += sh.direction[comp] * c;
                }
            }
        }
    }
    Ok(RectifiedGrid { kind, time: t, epsilon: spec.epsilon(), xs: xs.to_vec(), ys: ys.to_vec(), data })
}

fn stencil(nodes: &[f64], x: f64) -> Option<(usize, [f64; 4])> {
    let n = nodes.len();
    if n < 4 || x < nodes[0] || x > nodes[n - 1] {
        return None;
    }
    let k = nodes.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
    let i = k.saturating_sub(1).min(n - 4);
    let mut w = [1.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            if a != b {
                w[a] *= (x - nodes[i + b]) / (nodes[i + a] - nodes[i + b]);
            }
        }
    }
    Some((i, w))
}

impl RectifiedSource for RectifiedGrid {
    fn kind(&self) -> FieldKind {
        self.kind
    }
    fn time(&self) -> f64 {
        self.time
    }
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
    /// Bicubic (4×4 Lagrange) interpolation; zero outside the sampled box.
    fn eval(&self, s: f64, n: f64) -> [Complex64; 2] {
        let (Some((i, wx)), Some((j, wy))) = (stencil(&self.xs, s), stencil(&self.ys, n)) else {
            return [C0; 2];
        };
        let nx = self.xs.len();
        let mut out = [C0; 2];
        for (c, d) in self.data.iter().enumerate() {
            for b in 0..4 {
                for a in 0..4 {
                    out[c] += d[(j + b) * nx + i + a] * (wx[a] * wy[b]);
                }
            }
        }
        out
    }
}

/// Smooth cutoff: 1 for `|ỹ| ≤ η`, 0 for `|ỹ| ≥ 2η`, C^∞ in between.
pub fn cutoff(n: f64, eta: f64) -> f64 {
    let a = n.abs();
    if a <= eta {
        return 1.0;
    }
    if a >= 2.0 * eta {
        return 0.0;
    }
    let u = (a - eta) / eta;
    let p = (-1.0 / u).exp();
    let q = (-1.0 / (1.0 - u)).exp();
    1.0 - p / (p + q)
}

/// Spinor expressed in the physical basis: tube-frame spinors are rotated by
/// `diag(e^{−iθ/2}, e^{iθ/2})` with θ the tangent angle on the cover.
fn rotate(v: [Complex64; 2], theta: f64) -> [Complex64; 2] {
    [v[0] * Complex64::from_polar(1.0, -0.5 * theta), v[1] * Complex64::from_polar(1.0, 0.5 * theta)]
}

fn sample_physical<S: RectifiedSource + ?Sized>(
    map: &RectificationMap,
    src: &S,
    p: [f64; 2],
    velocity: bool,
) -> Option<[Complex64; 2]> {
    let (s, n) = map.phi_inverse(p).ok()?;
    let w = cutoff(n, map.eta());
    if w == 0.0 {
        return None;
    }
    let curve = map.curve();
    let (lo, hi) = src.x_range();
    let lifts: Vec<f64> = match curve.total_length() {
        Some(l) => {
            let a = ((lo - s) / l).floor() as i64;
            let b = ((hi - s) / l).ceil() as i64;
            (a..=b).map(|k| s + k as f64 * l).filter(|&x| x >= lo && x <= hi).collect()
        }
        None => vec![s],
    };
    let mut acc = [C0; 2];
    for x in lifts {
        let v = if velocity { src.eval_dt(x, n)? } else { src.eval(x, n) };
        let v = if src.kind() == FieldKind::Dirac { rotate(v, curve.angle(x).ok()?) } else { v };
        acc[0] += v[0] * w;
        acc[1] += v[1] * w;
    }
    Some(acc)
}

/// `u = Φ^{−*}v` on a physical grid, with the smooth tube cutoff, spinor
/// frame rotation (Dirac) and summation over lifts for closed Γ.
pub fn push_forward<S: RectifiedSource + ?Sized>(map: &RectificationMap, src: &S, grid: Grid) -> Field {
    let kind = src.kind();
    let mut field = Field::zeros(grid, kind, src.time(), src.epsilon());
    let vals: Vec<Option<[Complex64; 2]>> =
        (0..grid.len()).into_par_iter().map(|idx| sample_physical(map, src, grid.point(idx), false)).collect();
    for (idx, v) in vals.into_iter().enumerate() {
        if let Some(v) = v {
            for c in 0..kind.components() {
                field.data[c][idx] = v[c];
            }
        }
    }
    field
}

/// Klein-Gordon state `(u, ε∂_t u)` on a physical grid.
pub fn push_forward_with_velocity<S: RectifiedSource + ?Sized>(
    map: &RectificationMap,
    src: &S,
    grid: Grid,
) -> Result<Field, WavepacketError> {
    if src.kind() != FieldKind::KleinGordon {
        return Err(WavepacketError::InvalidBranch("velocity data is only defined for Klein-Gordon packets".into()));
    }
    let mut field = Field::zeros(grid, FieldKind::KleinGordonWithVelocity, src.time(), src.epsilon());
    let vals: Vec<(Option<[Complex64; 2]>, Option<[Complex64; 2]>)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.point(idx);
            (sample_physical(map, src, p, false), sample_physical(map, src, p, true))
        })
        .collect();
    for (idx, (u, w)) in vals.into_iter().enumerate() {
        if let Some(u) = u {
            field.data[0][idx] = u[0];
        }
        if let Some(w) = w {
            field.data[1][idx] = w[0];
        }
    }
    Ok(field)
}

/// Real-space longitudinal profile `f̌(X)` of a relativistic mode.
#[derive(Clone, Debug)]
pub enum RealProfile {
    /// `(πw²)^{−1/4} e^{−X²/(2w²)}`, unit L² norm.
    Gaussian { width: f64 },
    /// Fourier synthesis `∫ f(ξ) e^{iξX} dξ` of a frequency envelope.
    Synthesized { envelope: Envelope, rule: PanelRule },
}

impl RealProfile {
    pub fn gaussian(width: f64) -> Self {
        RealProfile::Gaussian { width }
    }

    pub fn from_envelope(envelope: Envelope) -> Self {
        let (a, b) = envelope.support();
        let rule = PanelRule::new(a, b, 96, 16);
        RealProfile::Synthesized { envelope, rule }
    }

    /// `(f̌(X), f̌'(X))`.
    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        match self {
            RealProfile::Gaussian { width } => {
                let g = (PI * width * width).powf(-0.25) * (-0.5 * x * x / (width * width)).exp();
                (Complex64::new(g, 0.0), Complex64::new(-x / (width * width) * g, 0.0))
            }
            RealProfile::Synthesized { envelope, rule } => {
                let mut v = C0;
                let mut d = C0;
                for (&xi, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let e = Complex64::from_polar(w * envelope.eval(xi), xi * x);
                    v += e;
                    d += e * Complex64::new(0.0, xi);
                }
                (v, d)
            }
        }
    }

    /// Half-width in `X` beyond which the profile is negligible.
    pub fn extent(&self) -> f64 {
        match self {
            RealProfile::Gaussian { width } => 9.0 * width,
            RealProfile::Synthesized { envelope, .. } => envelope.spatial_extent(),
        }
    }
}

/// Closed-form relativistic (m = 0) mode transported rigidly along Γ.
#[derive(Clone, Debug)]
pub struct RelativisticMode {
    kind: FieldKind,
    curve: Arc<LevelCurve>,
    profile: RealProfile,
    eps: f64,
    t: f64,
    center: f64,
    speed: f64,
}

/// Builds `ε^{−1/2} f̌((x̃ − x̃_c(t))/√ε) (μ/π)^{1/4} e^{−μỹ²/(2ε)}` (times
/// `(1,−1)/√2` for Dirac), with `x̃_c = x0 + c t` and `c` the branch speed.
pub fn relativistic_mode(
    model: &ModelSpec,
    branch: &BranchSpec,
    curve: Arc<LevelCurve>,
    x0: f64,
    profile: RealProfile,
    t: f64,
) -> Result<RelativisticMode, WavepacketError> {
    if branch.model() != model.model() {
        return Err(WavepacketError::InvalidBranch("branch and model disagree".into()));
    }
    let speed = branch
        .relativistic_speed()
        .ok_or_else(|| WavepacketError::InvalidBranch(format!("m = {} is dispersive", branch.m())))?;
    let kind = match model.model() {
        Model::Dirac => FieldKind::Dirac,
        Model::KleinGordon => FieldKind::KleinGordon,
    };
    Ok(RelativisticMode { kind, curve, profile, eps: model.epsilon(), t, center: x0 + speed * t, speed })
}

impl RelativisticMode {
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    fn parts(&self, s: f64, n: f64) -> Option<(Complex64, Complex64, f64, [f64; 2])> {
        let mu = self.curve.slope(s).ok()?;
        let se = self.eps.sqrt();
        let (f, df) = self.profile.eval((s - self.center) / se);
        let trans = (mu / PI).powf(0.25) * (-mu * n * n / (2.0 * self.eps)).exp() / se;
        let spinor = match self.kind {
            FieldKind::Dirac => [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
            _ => [1.0, 0.0],
        };
        Some((f, df, trans, spinor))
    }
}

impl RectifiedSource for RelativisticMode {
    fn kind(&self) -> FieldKind {
        self.kind
    }
    fn time(&self) -> f64 {
        self.t
    }
    fn epsilon(&self) -> f64 {
        self.eps
    }
    fn x_range(&self) -> (f64, f64) {
        let w = self.profile.extent() * self.eps.sqrt();
        (self.center - w, self.center + w)
    }
    fn eval(&self, s: f64, n: f64) -> [Complex64; 2] {
        match self.parts(s, n) {
            Some((f, _, g, sp)) => [f * (g * sp[0]), f * (g * sp[1])],
            None => [C0; 2],
        }
    }
    fn eval_dt(&self, s: f64, n: f64) -> Option<[Complex64; 2]> {
        // ε∂_t f̌((x̃ − x0 − ct)/√ε) = −c√ε f̌'
        let (_, df, g, sp) = self.parts(s, n)?;
        let c = -self.speed * self.eps.sqrt() * g;
        Some([df * (c * sp[0]), df * (c * sp[1])])
    }
}

/// One-term stationary-phase value of `v(t, x̃, ỹ)`.
#[derive(Clone, Copy, Debug)]
pub struct StationaryPhaseValue {
    pub value: [Complex64; 2],
    pub xi: f64,
    pub hessian: f64,
}

/// `ε^{−1/4} f(ξ*) (2π/|∂²_ξG|)^{1/2} e^{i(G/√ε + (π/4) sgn ∂²_ξG)} P(ξ*, ỹ/√ε)`.
///
/// `∂²_ξG` already contains the factor `t`.
pub fn stationary_phase_eval(
    spec: &WavepacketSpec,
    t: f64,
    x: f64,
    y: f64,
) -> Result<StationaryPhaseValue, WavepacketError> {
    let se = spec.epsilon().sqrt();
    if t.abs() < 10.0 * se {
        return Err(WavepacketError::OutsideValidity(format!("|t| = {t} is below the asymptotic threshold 10*sqrt(eps)")));
    }
    if spec.branch().kind() == BranchKind::Relativistic {
        return Err(WavepacketError::DegenerateHessian(0.0));
    }
    let phase = &spec.phase;
    let xi = stationary_point(phase, t, x)?.ok_or(WavepacketError::NoStationaryPoint)?;
    let g2 = phase_hessian(phase, t, x, xi).map_err(|e| match e {
        EikonalError::DegenerateHessian { value } => WavepacketError::DegenerateHessian(value),
        other => other.into(),
    })?;
    let g = phase.g(t, x, xi)?;
    let (b, _, _) = phase.energy(xi);
    let k = phase.wavenumber(x, xi)?;
    let mu = phase.mu(x)?;
    let amp = spec.envelope.eval(xi) * se.powf(-0.5) * (2.0 * PI / g2.abs()).sqrt();
    let e = Complex64::from_polar(amp, g / se + 0.25 * PI * g2.signum());
    let shapes = term_shapes(spec.branch(), mu);
    let mut alpha = vec![0.0; shapes.len()];
    term_coefficients(spec.branch(), b, k, mu, &mut alpha);
    let mut gt = [0.0; 2];
    transverse(&shapes, mu, y, se, &mut gt);
    let mut value = [C0; 2];
    for (j, sh) in shapes.iter().enumerate() {
        // transverse() carries ε^{−1/2}; the rectified amplitude carries only ε^{−1/4}
        let c = e * (alpha[j] * gt[j] * se);
        value[0] += sh.direction[0] * c;
        value[1] += sh.direction[1] * c;
    }
    if spec.field_kind() == FieldKind::KleinGordon {
        value[1] = C0;
    }
    Ok(StationaryPhaseValue { value, xi, hessian: g2 })
}

/// Direct adaptive-quadrature value of `v(t, x̃, ỹ)`; the reference for
/// the stationary-phase and panel evaluations.
pub fn quadrature_reference(spec: &WavepacketSpec, t: f64, x: f64, y: f64, rel_tol: f64) -> Result<[Complex64; 2], WavepacketError> {
    let phase = &spec.phase;
    let se = spec.epsilon().sqrt();
    let mu = phase.mu(x)?;
    let branch = *spec.branch();
    let shapes = term_shapes(&branch, mu);
    let mut gt = [0.0; 2];
    transverse(&shapes, mu, y, se, &mut gt);
    let (a, b) = spec.envelope.support();
    // |α_j| ≤ 1, so this bounds the integral of the modulus
    let l1 = PanelRule::new(a, b, 64, 16).integrate(|xi| spec.envelope.eval(xi)) * gt.iter().map(|g| g.abs()).sum::<f64>();
    let mut out = [C0; 2];
    for comp in 0..spec.field_kind().components() {
        let mut err = None;
        let r = crate::quadrature::adaptive_gk(
            |xi| {
                let (e, _, _) = phase.energy(xi);
                let v = match phase.values(x, xi) {
                    Ok(v) => v,
                    Err(er) => {
                        err = Some(er);
                        return C0;
                    }
                };
                let mut alpha = [0.0; 2];
                term_coefficients(&branch, e, v.k, mu, &mut alpha);
                let mut s = C0;
                for (j, sh) in shapes.iter().enumerate() {
                    s += sh.direction[comp] * (alpha[j] * gt[j]);
                }
                s * Complex64::from_polar(spec.envelope.eval(xi), (-e * t + v.a) / se)
            },
            a,
            b,
            rel_tol * l1,
            rel_tol,
            200_000,
        );
        if let Some(e) = err {
            return Err(e.into());
        }
        out[comp] = r.value;
    }
    Ok(out)
}

/// `(t, max|v|)` for each `t`, the maximum taken over the packet window.
pub fn max_amplitude_decay(spec: &WavepacketSpec, times: &[f64]) -> Result<Vec<(f64, f64)>, WavepacketError> {
    times
        .iter()
        .map(|&t| {
            let p = SeparablePacket::new(spec, t, None)?;
            Ok((t, p.max_abs()))
        })
        .collect()
}

/// Flat-wall (κ = y) packet with the ξ-integral replaced by a Riemann sum on
/// the lattice `ξ_j = 2π√ε j/L_x`, `L_x` the grid period. Every term is an
/// exact plane-wave solution and the sum is periodic on the grid.
pub fn flat_lattice_packet(
    model: &ModelSpec,
    branch: &BranchSpec,
    envelope: &Envelope,
    x0: f64,
    grid: Grid,
    t: f64,
) -> Result<Field, WavepacketError> {
    if branch.model() != model.model() {
        return Err(WavepacketError::InvalidBranch("branch and model disagree".into()));
    }
    let se = model.sqrt_eps();
    let dxi = 2.0 * PI * se / grid.lx();
    let (a, b) = envelope.support();
    let kind = match model.model() {
        Model::Dirac => FieldKind::Dirac,
        Model::KleinGordon => FieldKind::KleinGordon,
    };
    let mut terms = Vec::new();
    for j in (a / dxi).ceil() as i64..=(b / dxi).floor() as i64 {
        let xi = j as f64 * dxi;
        let f = envelope.eval(xi);
        if f == 0.0 {
            continue;
        }
        let e = spectral::dispersion(model, branch, xi, 1.0)
            .map_err(|err| WavepacketError::InvalidBranch(err.to_string()))?;
        let p = spectral::transverse_profile(model, branch, xi, 1.0)
            .map_err(|err| WavepacketError::InvalidBranch(err.to_string()))?;
        let cols: Vec<[Complex64; 2]> = (0..grid.ny).map(|jy| p.eval(grid.y(jy) / se)).collect();
        terms.push((xi, e, f * dxi / se, cols));
    }
    let mut field = Field::zeros(grid, kind, t, model.epsilon());
    let vals: Vec<[Complex64; 2]> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, jy) = (idx % grid.nx, idx / grid.nx);
            let x = grid.x(i);
            let mut acc = [C0; 2];
            for (xi, e, w, cols) in &terms {
                let ph = Complex64::from_polar(*w, (xi * (x - x0) - e * t) / se);
                acc[0] += ph * cols[jy][0];
                acc[1] += ph * cols[jy][1];
            }
            acc
        })
        .collect();
    for (idx, v) in vals.into_iter().enumerate() {
        for c in 0..kind.components() {
            field.data[c][idx] = v[c];
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eikonal::solve_phase;
    use crate::fft::Fft2;
    use crate::geometry::{trace_level_set, Bounds, DomainWall};
    use crate::spectral::Sign;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_curve() -> Arc<LevelCurve> {
        let wall = DomainWall::flat_y(Bounds::new(-6.0, 6.0, -1.0, 1.0));
        Arc::new(trace_level_set(&wall, [0.0, 0.0], 0.01, 20.0).unwrap())
    }

    fn circle_curve() -> Arc<LevelCurve> {
        let wall = DomainWall::circle(1.0, Bounds::new(-2.0, 2.0, -2.0, 2.0));
        Arc::new(trace_level_set(&wall, [1.0, 0.0], 0.005, 20.0).unwrap())
    }

    fn spec(model: ModelSpec, branch: BranchSpec, curve: Arc<LevelCurve>, env: Envelope) -> WavepacketSpec {
        let (a, b) = env.support();
        let range = if curve.is_closed() { (-20.0, 20.0) } else { (-5.5, 5.5) };
        let phase = solve_phase(&model, &branch, curve, 0.0, &[(a, b)], range).unwrap();
        WavepacketSpec::new(Arc::new(phase), env).unwrap()
    }

    fn d1(eps: f64) -> WavepacketSpec {
        spec(
            ModelSpec::dirac(eps).unwrap(),
            BranchSpec::new(Model::Dirac, 1, Sign::Plus).unwrap(),
            flat_curve(),
            Envelope::gaussian(0.5, 0.8).unwrap(),
        )
    }

    #[test]
    fn envelopes_are_normalized_and_decay() {
        let g = Envelope::gaussian(1.0, 0.3).unwrap();
        assert!((g.norm_sqr() - 1.0).abs() < 1e-8);
        let (a, b) = g.support();
        assert!(g.eval(a) < 1e-14 * g.eval(1.0) && g.eval(b) < 1e-14 * g.eval(1.0));
        let bump = Envelope::bump(0.7, 1.3).unwrap();
        assert!((bump.norm_sqr() - 1.0).abs() < 1e-8);
        assert_eq!(bump.eval(0.7), 0.0);
        assert!(Envelope::bump(1.0, 0.5).is_err());
        assert!(Envelope::gaussian(0.0, -1.0).is_err());
    }

    #[test]
    fn spec_checks_support_and_order() {
        let s = d1(0.01);
        assert_eq!(s.order(), 0);
        assert!(s.clone().with_order(1).is_err());
        let phase = s.phase.clone();
        assert!(WavepacketSpec::new(phase, Envelope::gaussian(5.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn quadrature_resolution_rule() {
        let q = XiQuadrature::new((0.0, 2.0), 5.0, 0.01, 100_000).unwrap();
        assert!(q.points_per_oscillation() >= 8.0);
        assert!(matches!(
            XiQuadrature::new((0.0, 2.0), 5.0, 0.01, 100),
            Err(WavepacketError::UnderResolvedQuadrature { .. })
        ));
    }

    #[test]
    fn zero_time_synthesis_matches_fft() {
        let eps = 0.01;
        let s = d1(eps);
        let se = eps.sqrt();
        // Riemann sum on a periodic ξ lattice evaluated by FFT
        let (a, b) = s.envelope.support();
        let n = 4096;
        let dxi = (b - a) / n as f64;
        let shapes = term_shapes(s.branch(), 1.0);
        let mut alpha = [0.0; 2];
        let mut cols: Vec<Vec<Complex64>> = vec![vec![C0; n]; 2];
        for k in 0..n {
            let xi = a + k as f64 * dxi;
            let (e, _, _) = s.phase.energy(xi);
            term_coefficients(s.branch(), e, xi, 1.0, &mut alpha);
            for j in 0..2 {
                cols[j][k] = Complex64::new(s.envelope.eval(xi) * alpha[j] * dxi, 0.0);
            }
        }
        let fft = Fft2::new(n, 1);
        let ms: Vec<usize> = (0..40).collect();
        let xs: Vec<f64> = ms.iter().map(|&m| se * 2.0 * PI * m as f64 / (n as f64 * dxi)).collect();
        let mut synth = [vec![C0; n], vec![C0; n]];
        for j in 0..2 {
            synth[j] = cols[j].clone();
            fft.inverse(&mut synth[j]);
            for z in synth[j].iter_mut() {
                *z *= n as f64;
            }
        }
        let ys = [-0.05, 0.0, 0.07];
        let grid = assemble_rectified(&s, 0.0, &xs, &ys).unwrap();
        let mut g = [0.0; 2];
        let mut max_ref: f64 = 0.0;
        let mut max_err: f64 = 0.0;
        for (jy, &y) in ys.iter().enumerate() {
            transverse(&shapes, 1.0, y, se, &mut g);
            for (i, &m) in ms.iter().enumerate() {
                // e^{iξX} with ξ = a + kΔξ: the lattice offset contributes e^{iaX}
                let x = xs[i] / se;
                let shift = Complex64::from_polar(1.0, a * x);
                let mut want = [C0; 2];
                for j in 0..2 {
                    let c = synth[j][m] * shift * g[j];
                    want[0] += shapes[j].direction[0] * c;
                    want[1] += shapes[j].direction[1] * c;
                }
                for c in 0..2 {
                    max_ref = max_ref.max(want[c].norm());
                    max_err = max_err.max((grid.data[c][jy * xs.len() + i] - want[c]).norm());
                }
            }
        }
        assert!(max_err < 1e-8 * max_ref, "{max_err} vs {max_ref}");
    }

    #[test]
    fn panel_quadrature_matches_adaptive_oracle() {
        let s = d1(0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = {
            let mut v: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let ys: Vec<f64> = vec![0.03];
        let grid = assemble_rectified(&s, 1.0, &xs, &ys).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let r = quadrature_reference(&s, 1.0, x, 0.03, 1e-12).unwrap();
            for c in 0..2 {
                assert!((grid.data[c][i] - r[c]).norm() < 1e-7, "x={x}");
            }
        }
    }

    #[test]
    fn tabulated_packet_matches_direct_assembly() {
        let s = d1(0.01);
        let p = SeparablePacket::new(&s, 0.7, None).unwrap();
        let xs = [-0.4, -0.123, 0.0, 0.31, 0.555];
        let ys = [-0.1, 0.02];
        let g = assemble_rectified(&s, 0.7, &xs, &ys).unwrap();
        for (jy, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let v = p.eval(x, y);
                for c in 0..2 {
                    assert!((v[c] - g.data[c][jy * xs.len() + i]).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn kg_relativistic_packet_is_rigid_transport() {
        let eps = 0.01;
        let model = ModelSpec::klein_gordon(eps).unwrap();
        let branch = BranchSpec::new(Model::KleinGordon, 0, Sign::Minus).unwrap();
        let env = Envelope::gaussian(2.0, 0.15).unwrap();
        let s = spec(model, branch, flat_curve(), env.clone());
        let t = 0.8;
        let xs: Vec<f64> = (0..30).map(|i| -t - 0.3 + 0.02 * i as f64).collect();
        let grid = assemble_rectified(&s, t, &xs, &[0.0, 0.05]).unwrap();
        let mode = relativistic_mode(&model, &branch, flat_curve(), 0.0, RealProfile::from_envelope(env), t).unwrap();
        assert!((mode.center() + t).abs() < 1e-15);
        for (jy, y) in [0.0, 0.05].into_iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let want = mode.eval(x, y)[0];
                assert!((grid.data[0][jy * xs.len() + i] - want).norm() < 1e-8 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn relativistic_mode_rejects_dispersive_branches() {
        let m = ModelSpec::dirac(0.01).unwrap();
        let b = BranchSpec::new(Model::Dirac, 1, Sign::Plus).unwrap();
        assert!(matches!(
            relativistic_mode(&m, &b, flat_curve(), 0.0, RealProfile::gaussian(1.0), 0.0),
            Err(WavepacketError::InvalidBranch(_))
        ));
    }

    #[test]
    fn flat_push_forward_is_sampling() {
        let eps = 0.01;
        let model = ModelSpec::dirac(eps).unwrap();
        let curve = flat_curve();
        let map = RectificationMap::new(Arc::clone(&curve), Some(0.5), &Bounds::new(-6.0, 6.0, -1.0, 1.0)).unwrap();
        let mode =
            relativistic_mode(&model, &BranchSpec::dirac_edge(), curve, 0.0, RealProfile::gaussian(1.0), 0.3).unwrap();
        let grid = Grid::periodic(64, 32, -1.0, 1.0, -0.4, 0.4);
        let f = push_forward(&map, &mode, grid);
        for idx in [0, 100, 1000, 1500, 2047] {
            let p = grid.point(idx);
            let v = mode.eval(p[0], p[1]);
            assert!((f.data[0][idx] - v[0]).norm() < 1e-14 && (f.data[1][idx] - v[1]).norm() < 1e-14);
        }
        assert!((f.l2_norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn circle_push_forward_places_and_weights_the_packet() {
        let eps = 1e-3;
        let model = ModelSpec::dirac(eps).unwrap();
        let curve = circle_curve();
        let map = RectificationMap::new(Arc::clone(&curve), Some(0.3), &Bounds::new(-2.0, 2.0, -2.0, 2.0)).unwrap();
        let mode =
            relativistic_mode(&model, &BranchSpec::dirac_edge(), curve, 0.0, RealProfile::gaussian(1.0), 0.0).unwrap();
        let grid = Grid::periodic(300, 300, 0.7, 1.3, -0.3, 0.3);
        let f = push_forward(&map, &mode, grid);
        let (mut best, mut at) = (0.0, 0);
        for i in 0..grid.len() {
            if f.density(i) > best {
                best = f.density(i);
                at = i;
            }
        }
        let p = grid.point(at);
        assert!((p[0] - 1.0).abs() < 0.003 && p[1].abs() < 0.003);
        // ‖u‖² = ∫∫|v|² (1 − ỹk) dx̃ dỹ, evaluated by Gauss-Legendre in tube coordinates
        let rule_x = PanelRule::new(-0.4, 0.4, 40, 16);
        let rule_y = PanelRule::new(-0.25, 0.25, 40, 16);
        let mut want = 0.0;
        for (&x, &wx) in rule_x.nodes.iter().zip(&rule_x.weights) {
            for (&y, &wy) in rule_y.nodes.iter().zip(&rule_y.weights) {
                let v = mode.eval(x, y);
                want += wx * wy * (v[0].norm_sqr() + v[1].norm_sqr()) * map.jacobian(x, y).unwrap();
            }
        }
        assert!((f.norm_sqr().sqrt() - want.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn spinor_frame_rotation_is_antiperiodic_per_loop() {
        let curve = circle_curve();
        let l = curve.total_length().unwrap();
        let v = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let a = rotate(v, curve.angle(0.3).unwrap());
        let b = rotate(v, curve.angle(0.3 + l).unwrap());
        assert!((a[0] + b[0]).norm() < 1e-9 && (a[1] + b[1]).norm() < 1e-9);
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.1, 0.2), 1.0);
        assert_eq!(cutoff(-0.4, 0.2), 0.0);
        assert!((cutoff(0.3, 0.2) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(0.2 + 0.2 * i as f64 / 100.0, 0.2);
            assert!(c <= prev + 1e-15);
            prev = c;
        }
    }

    #[test]
    fn stationary_phase_matches_quadrature_and_improves_with_eps() {
        let err = |eps: f64| {
            let s = d1(eps);
            let sp = stationary_phase_eval(&s, 1.0, 0.0, 0.0).unwrap();
            let q = quadrature_reference(&s, 1.0, 0.0, 0.0, 1e-12).unwrap();
            let qn = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
            let d = ((sp.value[0] - q[0]).norm_sqr() + (sp.value[1] - q[1]).norm_sqr()).sqrt();
            d / qn
        };
        let e1 = err(1e-3);
        let e2 = err(2.5e-4);
        assert!(e1 < 0.03, "{e1}");
        let ratio = e1 / e2;
        assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn outside_the_light_cone_is_negligible() {
        let eps = 1e-3;
        let s = d1(eps);
        assert!(matches!(stationary_phase_eval(&s, 1.0, 1.5, 0.0), Err(WavepacketError::NoStationaryPoint)));
        let q = quadrature_reference(&s, 1.0, 1.5, 0.0, 1e-10).unwrap();
        assert!((q[0].norm_sqr() + q[1].norm_sqr()).sqrt() < eps * eps);
        assert!(matches!(stationary_phase_eval(&s, 0.1, 0.0, 0.0), Err(WavepacketError::OutsideValidity(_))));
    }

    #[test]
    fn amplitude_decays_like_inverse_sqrt_time() {
        let s = d1(1e-3);
        let tab = max_amplitude_decay(&s, &[0.5, 2.0]).unwrap();
        let slope = (tab[1].1 / tab[0].1).ln() / 4f64.ln();
        assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn norm_is_conserved_on_the_flat_wall() {
        let s = d1(1e-3);
        let n0: f64 = {
            let p = SeparablePacket::new(&s, 0.0, None).unwrap();
            p.line_density().iter().sum::<f64>() * s.epsilon().sqrt() / 24.0
        };
        let n1: f64 = {
            let p = SeparablePacket::new(&s, 1.5, None).unwrap();
            p.line_density().iter().sum::<f64>() * s.epsilon().sqrt() / 24.0
        };
        assert!((n1 / n0 - 1.0).abs() < 0.01, "{n0} {n1}");
        assert!((n0 - 2.0 * PI).abs() < 1e-6, "{n0}");
    }
}
