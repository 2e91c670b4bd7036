//! Pseudo-spectral time integrators on periodic boxes.
//!
//! Dirac: `iε∂_t u = −iε(σ1∂x + σ2∂y)u + κσ3u`, split into a pointwise mass
//! rotation and the exact free propagator in Fourier space.
//!
//! Klein-Gordon: `ε²∂²_t u = ε²Δu − V u` with `V = κ² − ε·m`, advanced as the
//! first-order pair `(u, w = ε∂_t u)` by Störmer–Verlet.
//!
//! Both integrators come in a second-order form and a fourth-order Yoshida
//! composition of it.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::fft::{wavenumbers, Fft2};
use crate::field::{Field, FieldError, FieldKind, Grid};
use crate::geometry::{DomainWall, RectificationMap};
use crate::spectral::{Model, ModelSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("unstable step: {0}")]
    UnstableStep(String),
    #[error("field does not fit the solver: {0}")]
    IncompatibleField(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Strang splitting (Dirac) or Störmer–Verlet (Klein-Gordon).
    Second,
    /// Yoshida triple-jump composition of the second-order step.
    Yoshida4,
}

impl Scheme {
    fn weights(self) -> &'static [f64] {
        const Y: [f64; 3] = [1.351_207_191_959_657_8, -1.702_414_383_919_315_3, 1.351_207_191_959_657_8];
        match self {
            Scheme::Second => &[1.0],
            Scheme::Yoshida4 => &Y,
        }
    }
}

/// Coefficients sampled on the grid: κ and the Klein-Gordon shift `m`.
#[derive(Clone, Debug)]
pub struct Medium {
    pub grid: Grid,
    pub kappa: Vec<f64>,
    pub shift: Vec<f64>,
}

impl Medium {
    /// Samples κ; `m` defaults to `|∇κ|`.
    pub fn sample(wall: &DomainWall, grid: Grid, shift: Option<&Expr>) -> Self {
        let pts: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.point(i)).collect();
        let kappa = pts.par_iter().map(|p| wall.value(p[0], p[1])).collect();
        let shift = pts
            .par_iter()
            .map(|p| match shift {
                Some(e) => e.eval(p[0], p[1]),
                None => wall.gradient_norm(p[0], p[1]),
            })
            .collect();
        Self { grid, kappa, shift }
    }

    pub fn constant(grid: Grid, kappa: f64, shift: f64) -> Self {
        Self { grid, kappa: vec![kappa; grid.len()], shift: vec![shift; grid.len()] }
    }

    fn potential(&self, eps: f64) -> Vec<f64> {
        self.kappa.iter().zip(&self.shift).map(|(k, m)| k * k - eps * m).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub model: ModelSpec,
    pub grid: Grid,
    pub dt: f64,
    pub scheme: Scheme,
}

impl SolverConfig {
    /// Largest stable Verlet step `2ε/√(ε²k²_max + max|V|)`.
    pub fn kg_stability_limit(model: &ModelSpec, medium: &Medium) -> f64 {
        let eps = model.epsilon();
        let g = medium.grid;
        let kx = std::f64::consts::PI / g.hx;
        let ky = std::f64::consts::PI / g.hy;
        let vmax = medium.potential(eps).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        2.0 * eps / (eps * eps * (kx * kx + ky * ky) + vmax).sqrt()
    }
}

/// Spatial operators shared by the integrators.
struct Spectral {
    grid: Grid,
    fft: Fft2,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl Spectral {
    fn new(grid: Grid) -> Self {
        Self { grid, fft: Fft2::new(grid.nx, grid.ny), kx: wavenumbers(grid.nx, grid.hx), ky: wavenumbers(grid.ny, grid.hy) }
    }

    fn k(&self, idx: usize) -> (f64, f64) {
        (self.kx[idx % self.grid.nx], self.ky[idx / self.grid.nx])
    }

    /// `∂x` and `∂y` of `u`.
    fn gradient(&self, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut hat = u.to_vec();
        self.fft.forward(&mut hat);
        let mut dx = hat.clone();
        let mut dy = hat;
        dx.par_iter_mut().enumerate().for_each(|(i, z)| *z *= I * self.k(i).0);
        dy.par_iter_mut().enumerate().for_each(|(i, z)| *z *= I * self.k(i).1);
        self.fft.inverse(&mut dx);
        self.fft.inverse(&mut dy);
        (dx, dy)
    }

    fn laplacian(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut hat = u.to_vec();
        self.fft.forward(&mut hat);
        hat.par_iter_mut().enumerate().for_each(|(i, z)| {
            let (a, b) = self.k(i);
            *z *= -(a * a + b * b);
        });
        self.fft.inverse(&mut hat);
        hat
    }
}

/// Time integrator for one model on one grid.
pub trait Propagator {
    fn kind(&self) -> FieldKind;
    fn dt(&self) -> f64;
    /// Advances by one step of size `dt`.
    fn step(&mut self, state: &mut Field) -> Result<(), SolverError>;

    /// Steps until `t_end` (the last step is shortened to land on it),
    /// calling `observe` after every `every` steps and at the end.
    fn advance(
        &mut self,
        state: &mut Field,
        t_end: f64,
        every: usize,
        observe: &mut dyn FnMut(&Field),
    ) -> Result<(), SolverError> {
        let dt = self.dt();
        let n = ((t_end - state.time) / dt).abs().round() as usize;
        let mut count = 0;
        while count < n {
            self.step(state)?;
            count += 1;
            if every > 0 && count % every == 0 && count < n {
                observe(state);
            }
        }
        state.time = t_end;
        observe(state);
        Ok(())
    }
}

pub struct DiracSolver {
    spectral: Spectral,
    eps: f64,
    dt: f64,
    scheme: Scheme,
    kappa: Vec<f64>,
    /// Per distinct substep length: pointwise half mass rotation and per-mode kinetic factors.
    stages: Vec<DiracStage>,
}

struct DiracStage {
    tau: f64,
    half_mass: Vec<Complex64>,
    cos: Vec<f64>,
    sin_over_k: Vec<f64>,
}

impl DiracSolver {
    pub fn new(config: &SolverConfig, medium: &Medium) -> Result<Self, SolverError> {
        if config.model.model() != Model::Dirac {
            return Err(SolverError::IncompatibleField("Dirac solver needs a Dirac model".into()));
        }
        if !medium.grid.matches(&config.grid) {
            return Err(FieldError::GridMismatch("medium and solver grids differ".into()).into());
        }
        let mut s = Self {
            spectral: Spectral::new(config.grid),
            eps: config.model.epsilon(),
            dt: config.dt,
            scheme: config.scheme,
            kappa: medium.kappa.clone(),
            stages: Vec::new(),
        };
        s.rebuild();
        Ok(s)
    }

    fn rebuild(&mut self) {
        let mut taus: Vec<f64> = Vec::new();
        for w in self.scheme.weights() {
            let tau = w * self.dt;
            if !taus.iter().any(|t| (t - tau).abs() < 1e-15) {
                taus.push(tau);
            }
        }
        let n = self.spectral.grid.len();
        self.stages = taus
            .into_iter()
            .map(|tau| {
                // exp(−iτκσ3/(2ε)) acts as e^{−iθ} on the upper and e^{iθ} on the lower component
                let half_mass = self.kappa.iter().map(|k| Complex64::from_polar(1.0, -0.5 * tau * k / self.eps)).collect();
                let (mut cos, mut sin_over_k) = (vec![0.0; n], vec![0.0; n]);
                for i in 0..n {
                    let (a, b) = self.spectral.k(i);
                    let k = (a * a + b * b).sqrt();
                    cos[i] = (k * tau).cos();
                    sin_over_k[i] = if k > 0.0 { (k * tau).sin() / k } else { tau };
                }
                DiracStage { tau, half_mass, cos, sin_over_k }
            })
            .collect();
    }

    /// Reverses the direction of time.
    pub fn reverse(&mut self) {
        self.dt = -self.dt;
        self.rebuild();
    }

    fn mass(data: &mut [Vec<Complex64>], phase: &[Complex64]) {
        let (a, b) = data.split_at_mut(1);
        a[0].par_iter_mut().zip(b[0].par_iter_mut()).zip(phase.par_iter()).for_each(|((u, v), p)| {
            *u *= p;
            *v *= p.conj();
        });
    }

    fn strang(&self, data: &mut [Vec<Complex64>], stage: &DiracStage) {
        Self::mass(data, &stage.half_mass);
        let fft = &self.spectral.fft;
        fft.forward(&mut data[0]);
        fft.forward(&mut data[1]);
        {
            // exp(−iτ(kxσ1 + kyσ2)) = cos(|k|τ) − i sin(|k|τ)/|k| (kxσ1 + kyσ2)
            let (a, b) = data.split_at_mut(1);
            a[0].par_iter_mut().zip(b[0].par_iter_mut()).enumerate().for_each(|(i, (u, v))| {
                let (kx, ky) = self.spectral.k(i);
                let c = stage.cos[i];
                let s = stage.sin_over_k[i];
                let up = Complex64::new(kx, -ky);
                let dn = Complex64::new(kx, ky);
                let (u0, v0) = (*u, *v);
                *u = u0 * c - I * s * up * v0;
                *v = v0 * c - I * s * dn * u0;
            });
        }
        fft.inverse(&mut data[0]);
        fft.inverse(&mut data[1]);
        Self::mass(data, &stage.half_mass);
    }
}

impl Propagator for DiracSolver {
    fn kind(&self) -> FieldKind {
        FieldKind::Dirac
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut Field) -> Result<(), SolverError> {
        if state.kind != FieldKind::Dirac || !state.grid.matches(&self.spectral.grid) {
            return Err(SolverError::IncompatibleField("expected a Dirac field on the solver grid".into()));
        }
        for w in self.scheme.weights() {
            let tau = w * self.dt;
            let stage = self.stages.iter().find(|s| (s.tau - tau).abs() < 1e-15).expect("stage for every weight");
            self.strang(&mut state.data, stage);
        }
        state.time += self.dt;
        Ok(())
    }
}

pub struct KleinGordonSolver {
    spectral: Spectral,
    eps: f64,
    dt: f64,
    scheme: Scheme,
    potential: Vec<f64>,
    /// `(ε²Δu − Vu)/ε` at the current `u`, reused by the next kick.
    force: Option<Vec<Complex64>>,
    reference_norm: Option<f64>,
}

impl KleinGordonSolver {
    pub fn new(config: &SolverConfig, medium: &Medium) -> Result<Self, SolverError> {
        if config.model.model() != Model::KleinGordon {
            return Err(SolverError::IncompatibleField("Klein-Gordon solver needs a Klein-Gordon model".into()));
        }
        if !medium.grid.matches(&config.grid) {
            return Err(FieldError::GridMismatch("medium and solver grids differ".into()).into());
        }
        let limit = SolverConfig::kg_stability_limit(&config.model, medium);
        let longest = config.scheme.weights().iter().fold(0.0f64, |a, w| a.max(w.abs())) * config.dt.abs();
        if longest >= limit {
            return Err(SolverError::UnstableStep(format!(
                "substep {longest:e} exceeds the Verlet stability limit {limit:e}"
            )));
        }
        Ok(Self {
            spectral: Spectral::new(config.grid),
            eps: config.model.epsilon(),
            dt: config.dt,
            scheme: config.scheme,
            potential: medium.potential(config.model.epsilon()),
            force: None,
            reference_norm: None,
        })
    }

    fn force(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut lap = self.spectral.laplacian(u);
        let e = self.eps;
        lap.par_iter_mut().zip(u.par_iter()).zip(self.potential.par_iter()).for_each(|((l, u), v)| {
            *l = (*l * (e * e) - u * v) / e;
        });
        lap
    }

    fn verlet(&mut self, state: &mut Field, tau: f64) {
        let f = self.force.take().unwrap_or_else(|| self.force(&state.data[0]));
        let e = self.eps;
        let (u, w) = state.data.split_at_mut(1);
        let (u, w) = (&mut u[0], &mut w[0]);
        w.par_iter_mut().zip(f.par_iter()).for_each(|(w, f)| *w += f * (0.5 * tau));
        u.par_iter_mut().zip(w.par_iter()).for_each(|(u, w)| *u += w * (tau / e));
        let f = self.force(u);
        w.par_iter_mut().zip(f.par_iter()).for_each(|(w, f)| *w += f * (0.5 * tau));
        self.force = Some(f);
    }
}

impl Propagator for KleinGordonSolver {
    fn kind(&self) -> FieldKind {
        FieldKind::KleinGordonWithVelocity
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&mut self, state: &mut Field) -> Result<(), SolverError> {
        if state.kind != FieldKind::KleinGordonWithVelocity || !state.grid.matches(&self.spectral.grid) {
            return Err(SolverError::IncompatibleField("expected a (u, ε∂_t u) field on the solver grid".into()));
        }
        let reference = *self.reference_norm.get_or_insert_with(|| kg_scale(state));
        for &w in self.scheme.weights() {
            self.verlet(state, w * self.dt);
        }
        state.time += self.dt;
        let now = kg_scale(state);
        if !now.is_finite() || now > 10.0 * reference.max(f64::MIN_POSITIVE) {
            return Err(SolverError::UnstableStep(format!("norm grew from {reference:e} to {now:e} at t = {}", state.time)));
        }
        Ok(())
    }
}

fn kg_scale(state: &Field) -> f64 {
    state.data.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Model-dependent norm used for errors: L² for Dirac and
/// `(‖ε∂_t u‖² + ‖ε∇u‖² + ‖|κ|u‖² + ε‖u‖²)^{1/2}` for Klein-Gordon.
pub struct EnergyNorm {
    model: ModelSpec,
    kappa: Vec<f64>,
    spectral: Spectral,
}

impl EnergyNorm {
    pub fn new(model: ModelSpec, medium: &Medium) -> Self {
        Self { model, kappa: medium.kappa.clone(), spectral: Spectral::new(medium.grid) }
    }

    pub fn eval(&self, f: &Field) -> Result<f64, SolverError> {
        if !f.grid.matches(&self.spectral.grid) {
            return Err(FieldError::GridMismatch("field grid differs from the norm's grid".into()).into());
        }
        match self.model.model() {
            Model::Dirac => {
                if f.kind != FieldKind::Dirac {
                    return Err(SolverError::IncompatibleField("Dirac norm needs a spinor field".into()));
                }
                Ok(f.l2_norm())
            }
            Model::KleinGordon => {
                if f.kind != FieldKind::KleinGordonWithVelocity {
                    return Err(SolverError::IncompatibleField("Klein-Gordon norm needs (u, ε∂_t u)".into()));
                }
                let e = self.model.epsilon();
                let u = &f.data[0];
                let (dx, dy) = self.spectral.gradient(u);
                let mut s = 0.0;
                for i in 0..u.len() {
                    s += f.data[1][i].norm_sqr()
                        + e * e * (dx[i].norm_sqr() + dy[i].norm_sqr())
                        + (self.kappa[i] * self.kappa[i] + e) * u[i].norm_sqr();
                }
                Ok((s * f.grid.cell_area()).sqrt())
            }
        }
    }
}

/// Conserved Klein-Gordon energy `‖w‖² + ‖ε∇u‖² + ⟨Vu, u⟩`.
pub fn kg_energy(model: &ModelSpec, medium: &Medium, f: &Field) -> f64 {
    let e = model.epsilon();
    let v = medium.potential(e);
    let sp = Spectral::new(f.grid);
    let (dx, dy) = sp.gradient(&f.data[0]);
    let mut s = 0.0;
    for i in 0..f.grid.len() {
        s += f.data[1][i].norm_sqr() + e * e * (dx[i].norm_sqr() + dy[i].norm_sqr()) + v[i] * f.data[0][i].norm_sqr();
    }
    s * f.grid.cell_area()
}

/// `norm(a − b)/norm(a)`.
pub fn compare(numeric: &Field, asymptotic: &Field, norm: &EnergyNorm) -> Result<f64, SolverError> {
    if !numeric.grid.matches(&asymptotic.grid) {
        return Err(FieldError::GridMismatch(format!("{:?} vs {:?}", numeric.grid, asymptotic.grid)).into());
    }
    if numeric.kind != asymptotic.kind {
        return Err(SolverError::IncompatibleField(format!("{:?} vs {:?}", numeric.kind, asymptotic.kind)));
    }
    let mut d = numeric.clone();
    for (dc, ac) in d.data.iter_mut().zip(&asymptotic.data) {
        for (x, y) in dc.iter_mut().zip(ac) {
            *x -= y;
        }
    }
    let top = norm.eval(&d)?;
    let bottom = norm.eval(numeric)?;
    Ok(if bottom == 0.0 { if top == 0.0 { 0.0 } else { f64::INFINITY } } else { top / bottom })
}

/// `‖L u(t)‖/‖u(t)‖` with spectral space derivatives and fourth-order
/// central differences in time of step `h`. `provider` must return the
/// physical field (without velocity slot) at any time.
pub fn residual(
    model: &ModelSpec,
    medium: &Medium,
    provider: &dyn Fn(f64) -> Field,
    t: f64,
    h: f64,
) -> Result<f64, SolverError> {
    let e = model.epsilon();
    let u: Vec<Field> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| provider(t + k * h)).collect();
    let c = &u[2];
    for f in &u {
        if !f.grid.matches(&medium.grid) {
            return Err(FieldError::GridMismatch("provider grid differs from the medium grid".into()).into());
        }
    }
    let sp = Spectral::new(c.grid);
    let n = c.grid.len();
    let lu: Vec<Vec<Complex64>> = match model.model() {
        Model::Dirac => {
            if c.kind != FieldKind::Dirac {
                return Err(SolverError::IncompatibleField("Dirac residual needs spinor fields".into()));
            }
            let dt: Vec<Vec<Complex64>> = (0..2)
                .map(|k| {
                    (0..n)
                        .map(|i| {
                            (u[0].data[k][i] - u[1].data[k][i] * 8.0 + u[3].data[k][i] * 8.0 - u[4].data[k][i]) / (12.0 * h)
                        })
                        .collect()
                })
                .collect();
            let (ax, ay) = sp.gradient(&c.data[0]);
            let (bx, by) = sp.gradient(&c.data[1]);
            // εD_t u + εD_xσ1u + εD_yσ2u + κσ3u with D = −i∂
            let mi = -I * e;
            vec![
                (0..n)
                    .map(|i| mi * dt[0][i] + mi * bx[i] + mi * (-I) * by[i] + c.data[0][i] * medium.kappa[i])
                    .collect(),
                (0..n).map(|i| mi * dt[1][i] + mi * ax[i] + mi * I * ay[i] - c.data[1][i] * medium.kappa[i]).collect(),
            ]
        }
        Model::KleinGordon => {
            let v = medium.potential(e);
            let lap = sp.laplacian(&c.data[0]);
            vec![(0..n)
                .map(|i| {
                    let d2 = (-u[0].data[0][i] + u[1].data[0][i] * 16.0 - c.data[0][i] * 30.0 + u[3].data[0][i] * 16.0
                        - u[4].data[0][i])
                        / (12.0 * h * h);
                    d2 * (e * e) - lap[i] * (e * e) + c.data[0][i] * v[i]
                })
                .collect()]
        }
    };
    let top: f64 = lu.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum::<f64>() * c.grid.cell_area();
    let bottom = c.norm_sqr();
    Ok((top / bottom).sqrt())
}

/// Scalar diagnostics of a snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    /// Mass-weighted mean arclength (circular mean for closed Γ, unwrapped by the tracker).
    pub center: f64,
    /// RMS normal distance from Γ.
    pub spread: f64,
    pub max_abs: f64,
}

/// Collects [`Observables`] over a run; keeps the arclength center continuous across the seam of closed Γ.
pub struct ObservableTracker<'a> {
    map: &'a RectificationMap,
    energy: Box<dyn Fn(&Field) -> f64 + 'a>,
    pub rows: Vec<Observables>,
    unwrap_from: Option<f64>,
}

impl<'a> ObservableTracker<'a> {
    pub fn new(map: &'a RectificationMap, energy: Box<dyn Fn(&Field) -> f64 + 'a>) -> Self {
        Self { map, energy, rows: Vec::new(), unwrap_from: None }
    }

    /// Starts unwrapping near `s` (e.g. the launch point on the cover).
    pub fn with_start(mut self, s: f64) -> Self {
        self.unwrap_from = Some(s);
        self
    }

    pub fn record(&mut self, f: &Field) {
        let (center, spread) = center_along(self.map, f, self.unwrap_from);
        self.unwrap_from = Some(center);
        self.rows.push(Observables {
            t: f.time,
            norm: f.l2_norm(),
            energy: (self.energy)(f),
            center,
            spread,
            max_abs: f.max_abs(),
        });
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SolverError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "norm", "energy", "center", "spread", "max_abs"]).map_err(FieldError::from)?;
        for r in &self.rows {
            wr.write_record(
                [r.t, r.norm, r.energy, r.center, r.spread, r.max_abs].iter().map(|v| format!("{v:.9e}")),
            )
            .map_err(FieldError::from)?;
        }
        wr.flush().map_err(FieldError::Io)?;
        Ok(())
    }
}

/// Mass-weighted arclength center and RMS normal distance of the part of
/// `f` inside the tube. For closed Γ the center is the lift nearest `near`.
pub fn center_along(map: &RectificationMap, f: &Field, near: Option<f64>) -> (f64, f64) {
    let peak = (0..f.grid.len()).map(|i| f.density(i)).fold(0.0, f64::max);
    let cut = 1e-14 * peak;
    let pts: Vec<(f64, f64, f64)> = (0..f.grid.len())
        .into_par_iter()
        .filter_map(|i| {
            let d = f.density(i);
            if d <= cut {
                return None;
            }
            map.phi_inverse(f.grid.point(i)).ok().map(|(s, n)| (s, n, d))
        })
        .collect();
    let mass: f64 = pts.iter().map(|p| p.2).sum();
    if mass == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let spread = (pts.iter().map(|p| p.1 * p.1 * p.2).sum::<f64>() / mass).sqrt();
    let center = match map.curve().total_length() {
        Some(l) => {
            let k = 2.0 * std::f64::consts::PI / l;
            let (c, s) = pts.iter().fold((0.0, 0.0), |(c, s), p| (c + p.2 * (k * p.0).cos(), s + p.2 * (k * p.0).sin()));
            let base = s.atan2(c).rem_euclid(2.0 * std::f64::consts::PI) / k;
            match near {
                Some(r) => base + ((r - base) / l).round() * l,
                None => base,
            }
        }
        None => pts.iter().map(|p| p.0 * p.2).sum::<f64>() / mass,
    };
    (center, spread)
}

/// Builds the solver matching `model`.
pub fn make_solver(config: &SolverConfig, medium: &Medium) -> Result<Box<dyn Propagator>, SolverError> {
    Ok(match config.model.model() {
        Model::Dirac => Box::new(DiracSolver::new(config, medium)?),
        Model::KleinGordon => Box::new(KleinGordonSolver::new(config, medium)?),
    })
}

/// Returns the field with every component multiplied by `c`.
pub fn scaled(f: &Field, c: Complex64) -> Field {
    let mut g = f.clone();
    for comp in g.data.iter_mut() {
        for z in comp.iter_mut() {
            *z *= c;
        }
    }
    g
}

/// Copy with the velocity slot dropped.
pub fn physical_part(f: &Field) -> Field {
    match f.kind {
        FieldKind::KleinGordonWithVelocity => {
            Field { grid: f.grid, kind: FieldKind::KleinGordon, time: f.time, epsilon: f.epsilon, data: vec![f.data[0].clone()] }
        }
        _ => f.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{trace_level_set, Bounds};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn u0(eps: f64, grid: Grid, t: f64) -> Field {
        let mut f = Field::zeros(grid, FieldKind::Dirac, t, eps);
        let se = eps.sqrt();
        for i in 0..grid.len() {
            let [x, y] = grid.point(i);
            let g = PI.powf(-0.5) * (-0.5 * ((x + t) / se).powi(2)).exp() * (-0.5 * (y / se).powi(2)).exp() / se;
            f.data[0][i] = Complex64::new(g / 2f64.sqrt(), 0.0);
            f.data[1][i] = Complex64::new(-g / 2f64.sqrt(), 0.0);
        }
        f
    }

    fn flat_grid(eps: f64) -> Grid {
        let se = eps.sqrt();
        let h = se / 8.0;
        let nx = crate::fft::fast_size((4.0 / h) as usize);
        let ny = crate::fft::fast_size((16.0 * se / h) as usize);
        Grid::periodic(nx, ny, -2.0, 2.0, -8.0 * se, 8.0 * se)
    }

    fn flat_medium(grid: Grid) -> Medium {
        Medium::sample(&DomainWall::flat_y(Bounds::new(-10.0, 10.0, -10.0, 10.0)), grid, None)
    }

    #[test]
    fn free_dirac_plane_wave_rotates_phase() {
        let grid = Grid::periodic(16, 16, 0.0, 2.0 * PI, 0.0, 2.0 * PI);
        let model = ModelSpec::dirac(0.01).unwrap();
        let (kx, ky) = (3.0, -2.0);
        let k = (kx * kx + ky * ky as f64).sqrt();
        // eigenvector of kxσ1 + kyσ2 with eigenvalue +|k|
        let a = Complex64::new(1.0, 0.0) / 2f64.sqrt();
        let b = Complex64::new(kx, ky) / (k * 2f64.sqrt());
        let mut f = Field::zeros(grid, FieldKind::Dirac, 0.0, 0.01);
        for i in 0..grid.len() {
            let [x, y] = grid.point(i);
            let e = Complex64::from_polar(1.0, kx * x + ky * y);
            f.data[0][i] = a * e;
            f.data[1][i] = b * e;
        }
        let init = f.clone();
        let dt = 0.013;
        let mut s = DiracSolver::new(&SolverConfig { model, grid, dt, scheme: Scheme::Second }, &Medium::constant(grid, 0.0, 0.0)).unwrap();
        s.step(&mut f).unwrap();
        let ph = Complex64::from_polar(1.0, -k * dt);
        for c in 0..2 {
            for i in 0..grid.len() {
                assert!((f.data[c][i] - init.data[c][i] * ph).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dirac_reproduces_the_flat_edge_mode_and_is_unitary_and_reversible() {
        let eps = 0.01;
        let model = ModelSpec::dirac(eps).unwrap();
        let grid = flat_grid(eps);
        let medium = flat_medium(grid);
        let mut f = u0(eps, grid, 0.0);
        let init = f.clone();
        let mut s = DiracSolver::new(&SolverConfig { model, grid, dt: 0.002, scheme: Scheme::Yoshida4 }, &medium).unwrap();
        s.advance(&mut f, 0.5, 0, &mut |_| {}).unwrap();
        let exact = u0(eps, grid, 0.5);
        let norm = EnergyNorm::new(model, &medium);
        let err = compare(&exact, &f, &norm).unwrap();
        assert!(err < 1e-6, "{err}");
        assert!((f.l2_norm() - init.l2_norm()).abs() < 1e-12);
        s.reverse();
        s.advance(&mut f, 0.0, 0, &mut |_| {}).unwrap();
        let back = compare(&init, &f, &norm).unwrap();
        assert!(back < 1e-11, "{back}");
    }

    #[test]
    fn dirac_residual_of_exact_mode_is_small() {
        let eps = 0.01;
        let model = ModelSpec::dirac(eps).unwrap();
        let grid = flat_grid(eps);
        let medium = flat_medium(grid);
        let r = residual(&model, &medium, &|t| u0(eps, grid, t), 0.3, 1e-4 * eps.sqrt()).unwrap();
        assert!(r < 1e-8, "{r}");
        // a wrong direction of travel is far from the kernel
        let r = residual(&model, &medium, &|t| u0(eps, grid, -t), 0.3, 1e-4 * eps.sqrt()).unwrap();
        assert!(r > 0.1);
    }

    #[test]
    fn kg_single_mode_oscillates_at_the_dispersion_frequency() {
        let grid = Grid::periodic(8, 8, 0.0, 2.0 * PI, 0.0, 2.0 * PI);
        let model = ModelSpec::klein_gordon(0.25).unwrap();
        let eps = 0.25;
        let medium = Medium::constant(grid, 1.0, 0.0);
        let (kx, ky) = (2.0, 1.0);
        let omega = (eps * eps * (kx * kx + ky * ky) + 1.0f64).sqrt() / eps;
        let mut f = Field::zeros(grid, FieldKind::KleinGordonWithVelocity, 0.0, eps);
        for i in 0..grid.len() {
            let [x, y] = grid.point(i);
            let e = Complex64::from_polar(1.0, kx * x + ky * y);
            f.data[0][i] = e;
            f.data[1][i] = e * Complex64::new(0.0, -eps * omega);
        }
        let init = f.clone();
        let mut s = KleinGordonSolver::new(&SolverConfig { model, grid, dt: 1e-3, scheme: Scheme::Yoshida4 }, &medium).unwrap();
        s.advance(&mut f, 1.0, 0, &mut |_| {}).unwrap();
        let ph = Complex64::from_polar(1.0, -omega);
        for i in 0..grid.len() {
            assert!((f.data[0][i] - init.data[0][i] * ph).norm() < 1e-6);
        }
    }

    #[test]
    fn kg_rejects_unstable_steps() {
        let grid = Grid::periodic(64, 64, 0.0, 1.0, 0.0, 1.0);
        let model = ModelSpec::klein_gordon(0.01).unwrap();
        let medium = Medium::constant(grid, 1.0, 0.0);
        let limit = SolverConfig::kg_stability_limit(&model, &medium);
        assert!(matches!(
            KleinGordonSolver::new(&SolverConfig { model, grid, dt: 1.1 * limit, scheme: Scheme::Second }, &medium),
            Err(SolverError::UnstableStep(_))
        ));
    }

    #[test]
    fn compare_checks_grids() {
        let eps = 0.01;
        let model = ModelSpec::dirac(eps).unwrap();
        let grid = flat_grid(eps);
        let medium = flat_medium(grid);
        let a = u0(eps, grid, 0.0);
        let norm = EnergyNorm::new(model, &medium);
        assert_eq!(compare(&a, &a, &norm).unwrap(), 0.0);
        let other = u0(eps, Grid::periodic(32, 32, -1.0, 1.0, -1.0, 1.0), 0.0);
        assert!(matches!(compare(&a, &other, &norm), Err(SolverError::Field(FieldError::GridMismatch(_)))));
    }

    #[test]
    fn center_tracks_a_packet_on_the_circle() {
        let eps = 4e-3;
        let wall = DomainWall::circle(1.0, Bounds::new(-2.0, 2.0, -2.0, 2.0));
        let curve = Arc::new(trace_level_set(&wall, [1.0, 0.0], 0.005, 20.0).unwrap());
        let map = RectificationMap::new(Arc::clone(&curve), Some(0.3), &wall.bounds).unwrap();
        let grid = Grid::periodic(256, 256, -1.5, 1.5, -1.5, 1.5);
        let mut f = Field::zeros(grid, FieldKind::KleinGordon, 0.0, eps);
        // a blob sitting on Γ at arclength 1
        let p = curve.point(1.0).unwrap();
        for i in 0..grid.len() {
            let q = grid.point(i);
            let r2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            f.data[0][i] = Complex64::new((-r2 / (2.0 * eps)).exp(), 0.0);
        }
        let (c, _) = center_along(&map, &f, Some(1.0 - 2.0 * PI));
        assert!((c - (1.0 - 2.0 * PI)).abs() < 0.01, "{c}");
    }
}
