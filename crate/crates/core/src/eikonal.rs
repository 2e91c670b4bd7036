//! Separable eikonal phase `G(t, x̃, ξ) = −B(ξ) t + A(x̃, ξ)` along Γ.
//!
//! `B` is the branch energy at the launch point `x0`; the local wavenumber
//! `k = ∂_x̃ A` solves `E(k; μ(x̃)) = B`, so `k² = B² − 2mμ(x̃)` with `k(x0) = ξ`.
//! Because `B ∂_ξ B = ξ` on every dispersive branch, the ξ-derivatives of `k`
//! are `ξ/k` and `2m(μ0 − μ)/k³`, which keeps all derivatives analytic.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{GeometryError, LevelCurve};
use crate::quadrature::GaussLegendre;
use crate::spectral::{self, BranchKind, BranchSpec, Model, ModelSpec, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EikonalError {
    #[error("empty or malformed frequency support")]
    EmptySupport,
    #[error("turning point at the launch point x0 = {x0} (B^2 - 2 m mu <= margin)")]
    TurningPointAtLaunch { x0: f64 },
    #[error("launch point {x0} outside the requested range [{lo}, {hi}]")]
    InvalidLaunch { x0: f64, lo: f64, hi: f64 },
    #[error("x = {x} outside the turning-point-free range [{lo}, {hi}]")]
    OutsideValidRange { x: f64, lo: f64, hi: f64 },
    #[error("{} stationary points: {roots:?}", roots.len())]
    MultipleRoots { roots: Vec<f64> },
    #[error("Newton iteration for the stationary point did not converge")]
    NoConvergence,
    #[error("second xi-derivative of the phase {value:e} is degenerate")]
    DegenerateHessian { value: f64 },
    #[error("stationary point requires t != 0")]
    ZeroTime,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Where the phase stops being valid because `k` would become imaginary.
#[derive(Clone, Debug, PartialEq)]
pub struct TurningReport {
    /// First x̃ (on either side of `x0`) where the threshold is crossed.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Phase and its derivatives at one `(x̃, ξ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseValues {
    pub a: f64,
    pub k: f64,
    pub a_xi: f64,
    pub a_xixi: f64,
}

#[derive(Clone, Debug)]
enum Slope {
    Constant(f64),
    Variable(Arc<LevelCurve>),
}

#[derive(Clone, Debug)]
pub struct PhaseOptions {
    pub turning_margin: f64,
    /// Relative variation of μ below which the wall slope counts as constant.
    pub constant_slope_tol: f64,
    /// Scan step for turning points and longitudinal quadrature panels.
    pub panel: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { turning_margin: 1e-6, constant_slope_tol: 1e-9, panel: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseSolution {
    model: ModelSpec,
    branch: BranchSpec,
    x0: f64,
    mu0: f64,
    support: Vec<(f64, f64)>,
    valid_range: (f64, f64),
    turning: Option<TurningReport>,
    slope: Slope,
    panel: f64,
    gl: GaussLegendre,
}

/// Builds the phase for a branch launched at `x0` with frequency support `support`.
pub fn solve_phase(
    model: &ModelSpec,
    branch: &BranchSpec,
    curve: Arc<LevelCurve>,
    x0: f64,
    support: &[(f64, f64)],
    x_range: (f64, f64),
) -> Result<PhaseSolution, EikonalError> {
    solve_phase_with(model, branch, curve, x0, support, x_range, &PhaseOptions::default())
}

pub fn solve_phase_with(
    model: &ModelSpec,
    branch: &BranchSpec,
    curve: Arc<LevelCurve>,
    x0: f64,
    support: &[(f64, f64)],
    x_range: (f64, f64),
    opts: &PhaseOptions,
) -> Result<PhaseSolution, EikonalError> {
    if support.is_empty() || support.iter().any(|&(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
        return Err(EikonalError::EmptySupport);
    }
    if !(x_range.0 <= x0 && x0 <= x_range.1) {
        return Err(EikonalError::InvalidLaunch { x0, lo: x_range.0, hi: x_range.1 });
    }
    if !curve.is_closed() {
        let (a, b) = curve.s_range();
        if x_range.0 < a - 1e-9 || x_range.1 > b + 1e-9 {
            return Err(EikonalError::Geometry(GeometryError::OutOfRange {
                s: if x_range.0 < a { x_range.0 } else { x_range.1 },
                min: a,
                max: b,
            }));
        }
    }
    let mu0 = curve.slope(x0)?;
    spectral::dispersion(model, branch, 1.0, mu0)?;
    let min_abs_xi = support
        .iter()
        .map(|&(a, b)| if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) })
        .fold(f64::INFINITY, f64::min);
    if model.model() == Model::KleinGordon && branch.m() == 0 && min_abs_xi == 0.0 {
        return Err(EikonalError::Spectral(SpectralError::ZeroEnergy { m: 0, xi: 0.0 }));
    }

    let constant = curve.has_constant_slope(opts.constant_slope_tol);
    let slope = if constant {
        let mean = curve.samples().iter().map(|c| c.slope).sum::<f64>() / curve.samples().len() as f64;
        Slope::Constant(mean)
    } else {
        Slope::Variable(Arc::clone(&curve))
    };
    let mu0 = if let Slope::Constant(m) = slope { m } else { mu0 };

    let mut valid_range = x_range;
    let mut turning = None;
    if branch.kind() == BranchKind::Dispersive && !constant {
        let m2 = 2.0 * branch.m() as f64;
        let disc = |x: f64| -> Result<f64, EikonalError> {
            let mu = curve.slope(x)?;
            Ok(min_abs_xi * min_abs_xi + m2 * (mu0 - mu))
        };
        let blocked = |x: f64| -> Result<bool, EikonalError> {
            let d = disc(x)?;
            Ok(d <= opts.turning_margin && d < min_abs_xi * min_abs_xi)
        };
        if blocked(x0)? {
            return Err(EikonalError::TurningPointAtLaunch { x0 });
        }
        let h = opts.panel.min(curve.spacing());
        let mut report = TurningReport { lower: None, upper: None };
        let mut x = x0;
        while x < x_range.1 {
            let nx = (x + h).min(x_range.1);
            if blocked(nx)? {
                report.upper = Some(nx);
                valid_range.1 = x;
                break;
            }
            x = nx;
        }
        x = x0;
        while x > x_range.0 {
            let nx = (x - h).max(x_range.0);
            if blocked(nx)? {
                report.lower = Some(nx);
                valid_range.0 = x;
                break;
            }
            x = nx;
        }
        if report.lower.is_some() || report.upper.is_some() {
            turning = Some(report);
        }
    }

    Ok(PhaseSolution {
        model: *model,
        branch: *branch,
        x0,
        mu0,
        support: support.to_vec(),
        valid_range,
        turning,
        slope,
        panel: opts.panel,
        gl: GaussLegendre::new(10),
    })
}

impl PhaseSolution {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn branch(&self) -> &BranchSpec {
        &self.branch
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Wall slope at the launch point.
    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn valid_range(&self) -> (f64, f64) {
        self.valid_range
    }

    pub fn turning(&self) -> Option<&TurningReport> {
        self.turning.as_ref()
    }

    pub fn has_constant_slope(&self) -> bool {
        matches!(self.slope, Slope::Constant(_))
    }

    pub fn in_support(&self, xi: f64) -> bool {
        self.support.iter().any(|&(a, b)| a <= xi && xi <= b)
    }

    /// Sorted sample of the support, `per_interval` points per interval.
    pub fn xi_grid(&self, per_interval: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for &(a, b) in &self.support {
            for i in 0..per_interval {
                out.push(a + (b - a) * i as f64 / (per_interval - 1) as f64);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Wall slope μ(x̃) used by the phase.
    pub fn mu(&self, x: f64) -> Result<f64, EikonalError> {
        match &self.slope {
            Slope::Constant(m) => Ok(*m),
            Slope::Variable(c) => Ok(c.slope(x)?),
        }
    }

    /// `(B, ∂_ξB, ∂²_ξB)`.
    pub fn energy(&self, xi: f64) -> (f64, f64, f64) {
        let b = spectral::energy_unchecked(&self.branch, xi, self.mu0);
        match (self.model.model(), self.branch.m()) {
            (Model::Dirac, 0) => (b, -1.0, 0.0),
            (Model::KleinGordon, 0) => (b, self.branch.sign().value() * xi.signum(), 0.0),
            (_, m) => (b, xi / b, 2.0 * m as f64 * self.mu0 / (b * b * b)),
        }
    }

    fn check_range(&self, x: f64) -> Result<(), EikonalError> {
        let (lo, hi) = self.valid_range;
        let tol = 1e-12 * (1.0 + x.abs());
        if x < lo - tol || x > hi + tol {
            return Err(EikonalError::OutsideValidRange { x, lo, hi });
        }
        Ok(())
    }

    fn local_k(&self, x: f64, xi: f64) -> Result<(f64, f64, f64), EikonalError> {
        let m2 = 2.0 * self.branch.m() as f64;
        let mu = self.mu(x)?;
        let b = self.energy(xi).0;
        let d = (b * b - m2 * mu).max(0.0);
        let sgn = if xi >= 0.0 { 1.0 } else { -1.0 };
        let k = sgn * d.sqrt();
        Ok((k, xi / k, m2 * (self.mu0 - mu) / (k * k * k)))
    }

    /// Local wavenumber `k = ∂_x̃ A`.
    pub fn wavenumber(&self, x: f64, xi: f64) -> Result<f64, EikonalError> {
        self.check_range(x)?;
        if self.branch.kind() == BranchKind::Relativistic || self.has_constant_slope() {
            return Ok(xi);
        }
        Ok(self.local_k(x, xi)?.0)
    }

    /// A and its derivatives at `(x̃, ξ)`.
    pub fn values(&self, x: f64, xi: f64) -> Result<PhaseValues, EikonalError> {
        self.check_range(x)?;
        if self.branch.kind() == BranchKind::Relativistic || self.has_constant_slope() {
            return Ok(PhaseValues { a: xi * (x - self.x0), k: xi, a_xi: x - self.x0, a_xixi: 0.0 });
        }
        let mut acc = [0.0; 3];
        self.accumulate(self.x0, x, xi, &mut acc)?;
        let k = self.local_k(x, xi)?.0;
        Ok(PhaseValues { a: acc[0], k, a_xi: acc[1], a_xixi: acc[2] })
    }

    fn accumulate(&self, from: f64, to: f64, xi: f64, acc: &mut [f64; 3]) -> Result<(), EikonalError> {
        if from == to {
            return Ok(());
        }
        let panels = ((to - from).abs() / self.panel).ceil().max(1.0) as usize;
        let w = (to - from) / panels as f64;
        for p in 0..panels {
            let a = from + p as f64 * w;
            for (s, wt) in self.gl.mapped(a, a + w) {
                let (k, k1, k2) = self.local_k(s, xi)?;
                acc[0] += wt * k;
                acc[1] += wt * k1;
                acc[2] += wt * k2;
            }
        }
        Ok(())
    }

    /// Phase values along sorted `xs` for one ξ, integrating outward from `x0`.
    pub fn tabulate(&self, xs: &[f64], xi: f64) -> Result<Vec<PhaseValues>, EikonalError> {
        if let (Some(&a), Some(&b)) = (xs.first(), xs.last()) {
            self.check_range(a)?;
            self.check_range(b)?;
        }
        if self.branch.kind() == BranchKind::Relativistic || self.has_constant_slope() {
            return xs.iter().map(|&x| self.values(x, xi)).collect();
        }
        let mut out = vec![PhaseValues { a: 0.0, k: 0.0, a_xi: 0.0, a_xixi: 0.0 }; xs.len()];
        let split = xs.partition_point(|&x| x < self.x0);
        let mut acc = [0.0; 3];
        let mut prev = self.x0;
        for i in split..xs.len() {
            self.accumulate(prev, xs[i], xi, &mut acc)?;
            prev = xs[i];
            out[i] = PhaseValues { a: acc[0], k: self.local_k(xs[i], xi)?.0, a_xi: acc[1], a_xixi: acc[2] };
        }
        acc = [0.0; 3];
        prev = self.x0;
        for i in (0..split).rev() {
            self.accumulate(prev, xs[i], xi, &mut acc)?;
            prev = xs[i];
            out[i] = PhaseValues { a: acc[0], k: self.local_k(xs[i], xi)?.0, a_xi: acc[1], a_xixi: acc[2] };
        }
        Ok(out)
    }

    /// G(t, x̃, ξ).
    pub fn g(&self, t: f64, x: f64, xi: f64) -> Result<f64, EikonalError> {
        Ok(-self.energy(xi).0 * t + self.values(x, xi)?.a)
    }

    /// ∂_ξ G(t, x̃, ξ).
    pub fn g_xi(&self, t: f64, x: f64, xi: f64) -> Result<f64, EikonalError> {
        Ok(-self.energy(xi).1 * t + self.values(x, xi)?.a_xi)
    }

    /// ∂²_ξ G(t, x̃, ξ).
    pub fn g_xixi(&self, t: f64, x: f64, xi: f64) -> Result<f64, EikonalError> {
        Ok(-self.energy(xi).2 * t + self.values(x, xi)?.a_xixi)
    }

    /// Writes `x,xi,A,dA_dx,dA_dxi` over the tensor grid `xs × xis`.
    pub fn write_csv<W: Write>(&self, w: W, xs: &[f64], xis: &[f64]) -> Result<(), crate::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "xi", "A", "dA_dx", "dA_dxi"])?;
        for &xi in xis {
            let vals = self.tabulate(xs, xi)?;
            for (x, v) in xs.iter().zip(vals) {
                wr.write_record([x, &xi, &v.a, &v.k, &v.a_xi].iter().map(|v| format!("{v:.9e}")))?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Solves ∂_ξG(t, x̃, ξ) = 0 over the support: bracket sign changes on a
/// fine grid, then safeguarded Newton inside each bracket.
pub fn stationary_point(phase: &PhaseSolution, t: f64, x: f64) -> Result<Option<f64>, EikonalError> {
    if t == 0.0 {
        return Err(EikonalError::ZeroTime);
    }
    if phase.branch.kind() == BranchKind::Relativistic {
        return Ok(None);
    }
    let mut roots: Vec<f64> = Vec::new();
    for &(a, b) in &phase.support {
        let n = 400;
        let h = (b - a) / n as f64;
        let mut xa = a;
        let mut fa = phase.g_xi(t, x, xa)?;
        if fa == 0.0 {
            roots.push(xa);
        }
        for i in 1..=n {
            let xb = a + i as f64 * h;
            let fb = phase.g_xi(t, x, xb)?;
            if fb == 0.0 {
                roots.push(xb);
            } else if fa * fb < 0.0 {
                roots.push(safeguarded_newton(phase, t, x, xa, xb, fa)?);
            }
            xa = xb;
            fa = fb;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    match roots.len() {
        0 => Ok(None),
        1 => Ok(Some(roots[0])),
        _ => Err(EikonalError::MultipleRoots { roots }),
    }
}

fn safeguarded_newton(phase: &PhaseSolution, t: f64, x: f64, lo: f64, hi: f64, f_lo: f64) -> Result<f64, EikonalError> {
    let (mut lo, mut hi) = (lo, hi);
    let lo_negative = f_lo < 0.0;
    let mut xi = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = phase.g_xi(t, x, xi)?;
        if f == 0.0 {
            return Ok(xi);
        }
        if (f < 0.0) == lo_negative {
            lo = xi;
        } else {
            hi = xi;
        }
        let d = phase.g_xixi(t, x, xi)?;
        let mut next = if d != 0.0 { xi - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - xi).abs() <= 1e-15 * (1.0 + xi.abs()) || hi - lo <= 4e-16 * (1.0 + xi.abs()) {
            return Ok(next);
        }
        xi = next;
    }
    Err(EikonalError::NoConvergence)
}

/// ∂²_ξG at a stationary point; refuses caustics.
pub fn phase_hessian(phase: &PhaseSolution, t: f64, x: f64, xi: f64) -> Result<f64, EikonalError> {
    let v = phase.g_xixi(t, x, xi)?;
    if v.abs() < 1e-10 * (1.0 + t.abs()) {
        return Err(EikonalError::DegenerateHessian { value: v });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geometry::{trace_level_set, Bounds, DomainWall};
    use crate::spectral::Sign;

    fn flat() -> Arc<LevelCurve> {
        let wall = DomainWall::flat_y(Bounds::new(-6.0, 6.0, -1.0, 1.0));
        Arc::new(trace_level_set(&wall, [0.0, 0.0], 0.01, 20.0).unwrap())
    }

    fn circle() -> Arc<LevelCurve> {
        let wall = DomainWall::circle(1.0, Bounds::new(-3.0, 3.0, -3.0, 3.0));
        Arc::new(trace_level_set(&wall, [1.0, 0.0], 0.005, 20.0).unwrap())
    }

    fn ripple() -> Arc<LevelCurve> {
        let e = Expr::parse("y*(1.5 + 0.3*sin(x))").unwrap();
        let wall = DomainWall::analytic(e, Bounds::new(-6.0, 6.0, -1.0, 1.0));
        Arc::new(trace_level_set(&wall, [0.0, 0.0], 0.01, 20.0).unwrap())
    }

    fn dirac() -> ModelSpec {
        ModelSpec::dirac(0.01).unwrap()
    }

    fn d1(s: Sign) -> BranchSpec {
        BranchSpec::new(Model::Dirac, 1, s).unwrap()
    }

    #[test]
    fn flat_dispersive_phase_is_the_plane_wave_phase() {
        let p = solve_phase(&dirac(), &d1(Sign::Plus), flat(), 0.0, &[(-4.0, 4.0)], (-5.0, 5.0)).unwrap();
        assert!(p.turning().is_none());
        for (t, x, xi) in [(0.3, 1.2, 0.7), (1.0, -2.0, -1.5)] {
            let g = p.g(t, x, xi).unwrap();
            let want = -(2.0 + xi * xi as f64).sqrt() * t + xi * x;
            assert!((g - want).abs() < 1e-12);
        }
        let m = BranchSpec::new(Model::Dirac, 1, Sign::Minus).unwrap();
        let p = solve_phase(&dirac(), &m, flat(), 0.0, &[(-4.0, 4.0)], (-5.0, 5.0)).unwrap();
        assert!((p.g(1.0, 0.5, 1.0).unwrap() - (3f64.sqrt() + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn relativistic_dirac_phase() {
        let p = solve_phase(&dirac(), &BranchSpec::dirac_edge(), flat(), 0.0, &[(-3.0, 3.0)], (-5.0, 5.0)).unwrap();
        for (t, x, xi) in [(0.4, 1.0, 2.0), (1.0, -0.3, -0.9)] {
            assert!((p.g(t, x, xi).unwrap() - xi * (t + x)).abs() < 1e-13);
        }
        assert!(matches!(phase_hessian(&p, 1.0, 0.0, 1.0), Err(EikonalError::DegenerateHessian { .. })));
        assert_eq!(stationary_point(&p, 1.0, 0.0).unwrap(), None);
    }

    #[test]
    fn circle_phase_has_constant_wavenumber() {
        let p = solve_phase(&dirac(), &d1(Sign::Plus), circle(), 0.0, &[(0.5, 1.5)], (-10.0, 10.0)).unwrap();
        assert!(p.has_constant_slope());
        assert!((p.mu0() - 2.0).abs() < 1e-9);
        assert!((p.energy(1.0).0 - 5f64.sqrt()).abs() < 1e-8);
        for x in [-7.0, 0.0, 2.5, 9.0] {
            assert_eq!(p.wavenumber(x, 1.0).unwrap(), 1.0);
            let e = spectral::dispersion(&dirac(), &d1(Sign::Plus), 1.0, p.mu(x).unwrap()).unwrap();
            assert!((e - p.energy(1.0).0).abs() < 1e-10);
        }
    }

    #[test]
    fn variable_slope_eikonal_residual() {
        let c = ripple();
        assert!(!c.has_constant_slope(1e-6));
        let b = d1(Sign::Plus);
        let p = solve_phase(&dirac(), &b, c, 0.0, &[(1.0, 3.0)], (-4.0, 4.0)).unwrap();
        assert!(p.turning().is_none());
        let mut x = -4.0;
        while x <= 4.0 {
            for xi in [1.0, 1.7, 3.0] {
                let k = p.wavenumber(x, xi).unwrap();
                let e = spectral::dispersion(&dirac(), &b, k, p.mu(x).unwrap()).unwrap();
                assert!((e - p.energy(xi).0).abs() < 1e-10, "x={x} xi={xi}");
            }
            x += 0.1;
        }
        assert_eq!(p.wavenumber(0.0, 1.3).unwrap(), 1.3);
    }

    #[test]
    fn variable_slope_xi_derivatives_match_finite_differences() {
        let p = solve_phase(&dirac(), &d1(Sign::Minus), ripple(), 0.5, &[(0.8, 3.0)], (-4.0, 4.0)).unwrap();
        let h = 1e-4;
        for (x, xi) in [(2.0, 1.2), (-3.0, 2.0), (0.6, 0.9)] {
            let v = p.values(x, xi).unwrap();
            let ap = p.values(x, xi + h).unwrap();
            let am = p.values(x, xi - h).unwrap();
            assert!(((ap.a - am.a) / (2.0 * h) - v.a_xi).abs() < 1e-7);
            assert!(((ap.a_xi - am.a_xi) / (2.0 * h) - v.a_xixi).abs() < 1e-7);
            let xp = p.values(x + h, xi).unwrap();
            let xm = p.values(x - h, xi).unwrap();
            assert!(((xp.a - xm.a) / (2.0 * h) - v.k).abs() < 1e-7);
        }
        let xs: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let tab = p.tabulate(&xs, 1.4).unwrap();
        for (x, v) in xs.iter().zip(tab) {
            let w = p.values(*x, 1.4).unwrap();
            assert!((v.a - w.a).abs() < 1e-11 && (v.a_xi - w.a_xi).abs() < 1e-11);
        }
    }

    #[test]
    fn turning_points_truncate_the_range() {
        // μ(x) = 1.5 + 0.3 sin x exceeds μ(x0 = −π/2) = 1.2, so small ξ turn.
        let b = d1(Sign::Plus);
        let x0 = -std::f64::consts::FRAC_PI_2;
        let p = solve_phase(&dirac(), &b, ripple(), x0, &[(0.3, 1.0)], (-5.0, 5.0)).unwrap();
        let r = p.turning().expect("turning point expected");
        assert!(r.upper.is_some() && r.lower.is_some());
        let (lo, hi) = p.valid_range();
        assert!(lo > -5.0 && hi < 5.0 && lo < x0 && x0 < hi);
        let mu_edge = p.mu(hi).unwrap();
        assert!(0.09 + 2.0 * (p.mu0() - mu_edge) > 0.0);
        assert!(matches!(p.values(4.9, 0.5), Err(EikonalError::OutsideValidRange { .. })));
        assert!(matches!(
            solve_phase(&dirac(), &b, ripple(), x0, &[(-1.0, 1.0)], (-5.0, 5.0)),
            Ok(_)
        ));
        let p_hi = solve_phase(&dirac(), &b, ripple(), x0, &[(4.0, 5.0)], (-5.0, 5.0)).unwrap();
        assert!(p_hi.turning().is_none());
    }

    #[test]
    fn support_validation() {
        let kg = ModelSpec::klein_gordon(0.01).unwrap();
        let b = BranchSpec::new(Model::KleinGordon, 0, Sign::Plus).unwrap();
        assert!(solve_phase(&kg, &b, flat(), 0.0, &[(-1.0, 1.0)], (-5.0, 5.0)).is_err());
        assert!(solve_phase(&kg, &b, flat(), 0.0, &[(0.5, 1.0)], (-5.0, 5.0)).is_ok());
        assert!(matches!(
            solve_phase(&dirac(), &d1(Sign::Plus), flat(), 0.0, &[], (-5.0, 5.0)),
            Err(EikonalError::EmptySupport)
        ));
        assert!(matches!(
            solve_phase(&dirac(), &d1(Sign::Plus), flat(), 7.0, &[(0.0, 1.0)], (-5.0, 5.0)),
            Err(EikonalError::InvalidLaunch { .. })
        ));
    }

    #[test]
    fn stationary_point_examples() {
        let p = solve_phase(&dirac(), &d1(Sign::Plus), flat(), 0.0, &[(-5.0, 5.0)], (-5.0, 5.0)).unwrap();
        assert_eq!(stationary_point(&p, 1.0, 0.0).unwrap().unwrap().abs(), 0.0);
        let xi = stationary_point(&p, 1.0, 1.0 / 3f64.sqrt()).unwrap().unwrap();
        assert!((xi - 1.0).abs() < 1e-8);
        assert!(stationary_point(&p, 1.0, 1.2).unwrap().is_none());
        assert!(matches!(stationary_point(&p, 0.0, 0.0), Err(EikonalError::ZeroTime)));
        for r in [-0.9, -0.4, 0.2, 0.75] {
            let xi = stationary_point(&p, 2.0, 2.0 * r).unwrap().unwrap();
            let closed = r * 2f64.sqrt() / (1.0 - r * r).sqrt();
            assert!((xi - closed).abs() < 1e-10, "r={r}");
            assert!(p.g_xi(2.0, 2.0 * r, xi).unwrap().abs() < 1e-11);
        }
    }

    #[test]
    fn hessian_examples_and_finite_differences() {
        let p = solve_phase(&dirac(), &d1(Sign::Plus), flat(), 0.0, &[(-5.0, 5.0)], (-5.0, 5.0)).unwrap();
        let h1 = phase_hessian(&p, 1.0, 0.0, 0.0).unwrap();
        assert!((h1 + 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let h2 = phase_hessian(&p, 2.0, 0.0, 0.0).unwrap();
        assert!((h2 + 2f64.sqrt()).abs() < 1e-12);
        let q = solve_phase(&dirac(), &d1(Sign::Plus), ripple(), 0.0, &[(1.0, 4.0)], (-4.0, 4.0)).unwrap();
        for (t, x) in [(1.0, 0.3), (2.0, 1.0), (0.7, -0.2)] {
            if let Some(xi) = stationary_point(&q, t, x).unwrap() {
                assert!(q.g_xi(t, x, xi).unwrap().abs() < 1e-11);
                let g2 = phase_hessian(&q, t, x, xi).unwrap();
                let d = 1e-5;
                let fd = (q.g_xi(t, x, xi + d).unwrap() - q.g_xi(t, x, xi - d).unwrap()) / (2.0 * d);
                assert!((fd - g2).abs() < 1e-6 * (1.0 + g2.abs()));
            }
        }
    }

    #[test]
    fn hamiltonian_flow_matches_local_group_velocity() {
        let b = d1(Sign::Plus);
        let q = solve_phase(&dirac(), &b, ripple(), 0.0, &[(1.0, 4.0)], (-4.0, 4.0)).unwrap();
        let xi0 = 1.5;
        let center = |t: f64| {
            // ∂_ξG(t, x, ξ0) = 0 solved for x by bisection
            let (mut lo, mut hi) = (-3.9, 3.9);
            let f = |x: f64| q.g_xi(t, x, xi0).unwrap();
            let flo = f(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) < 0.0) == (flo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for t in [0.5, 1.0, 2.0] {
            let h = 1e-4;
            let v = (center(t + h) - center(t - h)) / (2.0 * h);
            let xc = center(t);
            let k = q.wavenumber(xc, xi0).unwrap();
            let vg = spectral::group_velocity(&dirac(), &b, k, q.mu(xc).unwrap()).unwrap();
            assert!((v - vg).abs() < 1e-6, "t={t}: {v} vs {vg}");
        }
    }

    #[test]
    fn csv_export() {
        let p = solve_phase(&dirac(), &d1(Sign::Plus), flat(), 0.0, &[(-1.0, 1.0)], (-1.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &[-1.0, 0.0, 1.0], &[0.5, 1.0]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,xi,A,dA_dx,dA_dxi"));
        assert_eq!(s.lines().count(), 7);
    }
}
