//! The acceptance experiments E1–E6, the property suites and custom runs.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{build_packet, invalid, ConfigError, EnvelopeConfig, ExperimentConfig, ExperimentId, GridConfig, WallConfig};
use super::report::{ReportRow, Tolerance};
use crate::eikonal::{phase_hessian, solve_phase, stationary_point};
use crate::fft::fast_size;
use crate::field::{Field, FieldKind, Grid};
use crate::geometry::{DomainWall, LevelCurve, RectificationMap};
use crate::pde_reference::{
    compare, kg_energy, make_solver, residual, EnergyNorm, Medium, ObservableTracker, Scheme,
    SolverConfig,
};
use crate::quadrature::GaussLegendre;
use crate::spectral::{self, hermite_all, BranchSpec, Model, ModelSpec, Sign};
use crate::wavepacket::{
    assemble_rectified, flat_lattice_packet, push_forward, push_forward_with_velocity, quadrature_reference,
    relativistic_mode, stationary_phase_eval, Envelope, RealProfile, RectifiedSource, SeparablePacket,
    WavepacketSpec,
};
use crate::Error;

type R<T> = Result<T, Error>;

/// A measured value, or the reason it could not be measured.
type Measured = Result<f64, String>;

/// Rows collected by one experiment.
struct Rows {
    experiment: &'static str,
    rows: Vec<ReportRow>,
}

impl Rows {
    fn new(experiment: &'static str) -> Self {
        Self { experiment, rows: Vec::new() }
    }

    fn push<E: std::fmt::Display>(&mut self, eps: Option<f64>, t: Option<f64>, metric: &str, value: Result<f64, E>, tol: Tolerance) {
        self.rows.push(match value {
            Ok(v) => ReportRow::new(self.experiment, eps, t, metric, v, tol),
            Err(e) => ReportRow::failed(self.experiment, eps, t, metric, &e.to_string()),
        });
    }
}

/// Runs the configured experiment; writes `report.csv` (and artifacts) when `out` is given.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> R<Vec<ReportRow>> {
    cfg.validate()?;
    let id = cfg.experiment.ok_or_else(|| invalid("experiment", "missing"))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let rows = match id {
        ExperimentId::E1 => e1(cfg)?,
        ExperimentId::E2 => e2(cfg)?,
        ExperimentId::E3 => e3(cfg)?,
        ExperimentId::E4 => e4(cfg, out)?,
        ExperimentId::E5 => e5(cfg)?,
        ExperimentId::E6 => e6(cfg)?,
        ExperimentId::Props => props(cfg)?,
        ExperimentId::Custom => custom(cfg, out)?,
    };
    if let Some(dir) = out {
        super::report::write_report(BufWriter::new(File::create(dir.join("report.csv"))?), &rows)?;
    }
    Ok(rows)
}

fn epsilons(cfg: &ExperimentConfig, default: &[f64], kind: Option<Model>) -> R<Vec<f64>> {
    match &cfg.model {
        Some(m) => {
            if let Some(k) = kind {
                if m.kind != k {
                    return Err(invalid("model.kind", format!("this experiment needs {k:?}")).into());
                }
            }
            m.specs()?;
            Ok(m.epsilon.clone())
        }
        None => Ok(default.to_vec()),
    }
}

fn times(cfg: &ExperimentConfig, default: &[f64]) -> Vec<f64> {
    cfg.times.clone().unwrap_or_else(|| default.to_vec())
}

fn envelope_or(cfg: &ExperimentConfig, default: Envelope) -> R<Envelope> {
    match &cfg.envelope {
        Some(EnvelopeConfig::Profile { .. }) => Err(invalid("envelope.kind", "a frequency envelope is required").into()),
        Some(e) => Ok(e.envelope()?),
        None => Ok(default),
    }
}

fn profile_or(cfg: &ExperimentConfig, default: RealProfile) -> R<RealProfile> {
    match &cfg.envelope {
        Some(e) => Ok(e.profile()?),
        None => Ok(default),
    }
}

/// Periodic grid covering `x_range × y_range` with spacing `√ε/points_per_sqrt_eps`.
fn box_grid(eps: f64, gc: &GridConfig, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Grid, ConfigError> {
    let h = eps.sqrt() / gc.points_per_sqrt_eps;
    let count = |len: f64, field: &str| -> Result<usize, ConfigError> {
        let n = fast_size((len / h).ceil() as usize);
        if n > gc.max_points {
            return Err(ConfigError::ResourceLimit(format!(
                "{field}: {n} points exceed grid.max_points = {}",
                gc.max_points
            )));
        }
        Ok(n)
    };
    let nx = count(x_range.1 - x_range.0, "x")?;
    let ny = count(y_range.1 - y_range.0, "y")?;
    Ok(Grid::new(nx, ny, x_range.0, y_range.0, h, h))
}

/// Box around a traced curve padded by `margin·√(ε/μ_min)`.
fn curve_grid(curve: &LevelCurve, eps: f64, gc: &GridConfig) -> Result<Grid, ConfigError> {
    let pad = gc.margin * (eps / curve.min_slope()).sqrt();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for s in curve.samples() {
        x0 = x0.min(s.point[0]);
        x1 = x1.max(s.point[0]);
        y0 = y0.min(s.point[1]);
        y1 = y1.max(s.point[1]);
    }
    box_grid(eps, gc, (x0 - pad, x1 + pad), (y0 - pad, y1 + pad))
}

struct Setup {
    wall: DomainWall,
    curve: Arc<LevelCurve>,
    map: RectificationMap,
    shift: Option<crate::expr::Expr>,
}

fn setup(w: &WallConfig) -> R<Setup> {
    let (wall, curve) = w.trace()?;
    let map = w.rectification(&wall, &curve)?;
    Ok(Setup { shift: w.shift_expr()?, wall, curve, map })
}

fn flat_wall() -> WallConfig {
    WallConfig { eta: Some(1.0), ..WallConfig::flat([-6.0, 6.0, -2.0, 2.0]) }
}

fn circle_wall() -> WallConfig {
    WallConfig { eta: Some(0.3), ..WallConfig::circle(1.0, [-2.0, 2.0, -2.0, 2.0]) }
}

fn flat_grid(eps: f64, gc: &GridConfig, x_range: (f64, f64)) -> Result<Grid, ConfigError> {
    let pad = gc.margin * eps.sqrt();
    box_grid(eps, gc, x_range, (-pad, pad))
}

/// Integrates from the initial field to each time in `ts`, calling `at` there.
fn evolve(
    model: &ModelSpec,
    medium: &Medium,
    settings: &super::config::SolverSettings,
    mut state: Field,
    ts: &[f64],
    at: &mut dyn FnMut(&Field) -> R<()>,
) -> R<Field> {
    let eps = model.epsilon();
    let mut dt = settings.dt_over_sqrt_eps * eps.sqrt();
    if model.model() == Model::KleinGordon {
        let longest = match settings.scheme {
            Scheme::Second => 1.0,
            Scheme::Yoshida4 => 1.702_414_383_919_315_3,
        };
        dt = dt.min(settings.kg_stability_fraction * SolverConfig::kg_stability_limit(model, medium) / longest);
    }
    let mut prev = state.time;
    for &t in ts {
        let span = t - prev;
        if span != 0.0 {
            let n = (span.abs() / dt).ceil().max(1.0);
            let cfg = SolverConfig { model: *model, grid: state.grid, dt: span / n, scheme: settings.scheme };
            let mut solver = make_solver(&cfg, medium)?;
            solver.advance(&mut state, t, 0, &mut |_| {})?;
        }
        at(&state)?;
        prev = t;
    }
    Ok(state)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn e1(cfg: &ExperimentConfig) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("E1");
    let s = setup(cfg.wall.as_ref().unwrap_or(&flat_wall()))?;
    let t = times(cfg, &[0.3])[0];
    for eps in epsilons(cfg, &[0.01], None)? {
        let grid = flat_grid(eps, &cfg.grid, (-2.0, 2.0))?;
        let medium = Medium::sample(&s.wall, grid, s.shift.as_ref());
        let h = 1e-4 * eps.sqrt();
        let dirac = ModelSpec::dirac(eps)?;
        let kg = ModelSpec::klein_gordon(eps)?;
        let profile = profile_or(cfg, RealProfile::gaussian(1.0))?;

        let u0 = |tt: f64| -> R<Field> {
            let mode = relativistic_mode(&dirac, &BranchSpec::dirac_edge(), s.curve.clone(), 0.0, profile.clone(), tt)?;
            Ok(push_forward(&s.map, &mode, grid))
        };
        let r = u0(t).and_then(|_| Ok(residual(&dirac, &medium, &|tt| u0(tt).expect("checked above"), t, h)?));
        rows.push(Some(eps), Some(t), "residual_dirac_u0", r, Tolerance::Below(1e-7));

        let bump = Envelope::bump(0.7, 1.3)?;
        for sign in [Sign::Plus, Sign::Minus] {
            let branch = BranchSpec::new(Model::Dirac, 1, sign)?;
            let f = |tt: f64| flat_lattice_packet(&dirac, &branch, &bump, 0.0, grid, tt);
            let r = f(t).map_err(Error::from).and_then(|_| Ok(residual(&dirac, &medium, &|tt| f(tt).expect("checked"), t, h)?));
            let name = format!("residual_dirac_u1{}", if sign == Sign::Plus { "+" } else { "-" });
            rows.push(Some(eps), Some(t), &name, r, Tolerance::Below(1e-7));
        }

        for sign in [Sign::Plus, Sign::Minus] {
            let branch = BranchSpec::new(Model::KleinGordon, 0, sign)?;
            let f = |tt: f64| -> R<Field> {
                let mode = relativistic_mode(&kg, &branch, s.curve.clone(), 0.0, profile.clone(), tt)?;
                Ok(push_forward(&s.map, &mode, grid))
            };
            let r = f(t).and_then(|_| Ok(residual(&kg, &medium, &|tt| f(tt).expect("checked"), t, h)?));
            let name = format!("residual_kg_speed{}", if sign == Sign::Plus { "+1" } else { "-1" });
            rows.push(Some(eps), Some(t), &name, r, Tolerance::Below(1e-7));
        }
    }
    Ok(rows.rows)
}

/// Relative errors between the solver and the push-forward of `make(t)` at each of `ts`.
fn curved_errors(
    s: &Setup,
    model: &ModelSpec,
    cfg: &ExperimentConfig,
    ts: &[f64],
    make: &dyn Fn(f64) -> R<Box<dyn RectifiedSource>>,
) -> R<Vec<f64>> {
    let eps = model.epsilon();
    let grid = curve_grid(&s.curve, eps, &cfg.grid)?;
    let medium = Medium::sample(&s.wall, grid, s.shift.as_ref());
    let norm = EnergyNorm::new(*model, &medium);
    let physical = |t: f64| -> R<Field> {
        let src = make(t)?;
        Ok(match model.model() {
            Model::Dirac => push_forward(&s.map, src.as_ref(), grid),
            Model::KleinGordon => push_forward_with_velocity(&s.map, src.as_ref(), grid)?,
        })
    };
    let mut errs = Vec::with_capacity(ts.len());
    evolve(model, &medium, &cfg.solver, physical(0.0)?, ts, &mut |f| {
        errs.push(compare(f, &physical(f.time)?, &norm)?);
        Ok(())
    })?;
    Ok(errs)
}

fn ratio_rows(rows: &mut Rows, label: &str, t: f64, errs: &[(f64, Measured)]) {
    for (eps, e) in errs {
        let v = match e {
            Ok(v) => Measured::Ok(*v),
            Err(err) => Err(err.to_string()),
        };
        rows.push(Some(*eps), Some(t), &format!("{label}_error"), v, Tolerance::Info);
    }
    for w in errs.windows(2) {
        let (e0, e1) = (&w[0].1, &w[1].1);
        let v = match (e0, e1) {
            (Ok(a), Ok(b)) if (w[0].0 / w[1].0 - 4.0).abs() < 1e-9 => Ok(a / b),
            (Ok(_), Ok(_)) => Err(String::from("consecutive values must differ by a factor 4")),
            _ => Err(String::from("an error value is missing")),
        };
        rows.push(Some(w[0].0), Some(t), &format!("{label}_ratio_eps_over_eps/4"), v, Tolerance::Range { lo: 1.5, hi: 3.0 });
    }
}

fn e2(cfg: &ExperimentConfig) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("E2");
    let s = setup(cfg.wall.as_ref().unwrap_or(&circle_wall()))?;
    let t = times(cfg, &[1.0])[0];
    let eps_list = epsilons(cfg, &[1.6e-2, 4e-3, 1e-3], Some(Model::Dirac))?;
    let profile = profile_or(cfg, RealProfile::gaussian(1.0))?;
    let x0 = cfg.x0.unwrap_or(0.0);

    let errs: Vec<(f64, Measured)> = eps_list
        .iter()
        .map(|&eps| {
            let model = ModelSpec::dirac(eps).expect("validated");
            let make = |tt: f64| -> R<Box<dyn RectifiedSource>> {
                Ok(Box::new(relativistic_mode(&model, &BranchSpec::dirac_edge(), s.curve.clone(), x0, profile.clone(), tt)?))
            };
            (eps, curved_errors(&s, &model, cfg, &[t], &make).map(|e| e[0]).map_err(|e| e.to_string()))
        })
        .collect();
    ratio_rows(&mut rows, "relativistic", t, &errs);

    let env = match &cfg.envelope {
        Some(EnvelopeConfig::Profile { .. }) | None => Envelope::gaussian(1.0, 0.3)?,
        Some(e) => e.envelope()?,
    };
    let range = match s.curve.total_length() {
        Some(l) => (x0 - l, x0 + l),
        None => s.curve.s_range(),
    };
    let runs: Vec<(f64, R<Vec<f64>>, f64)> = eps_list
        .iter()
        .map(|&eps| {
            let model = ModelSpec::dirac(eps).expect("validated");
            let branch = BranchSpec::new(Model::Dirac, 1, Sign::Plus).expect("valid branch");
            let samples = beat_samples(&model, &branch, &env, s.curve.min_slope(), t);
            let spec = build_packet(&model, &branch, s.curve.clone(), x0, env.clone(), range);
            let run = spec.map_err(Error::from).and_then(|spec| {
                let make = |tt: f64| -> R<Box<dyn RectifiedSource>> { Ok(Box::new(SeparablePacket::new(&spec, tt, None)?)) };
                curved_errors(&s, &model, cfg, &samples.0, &make)
            });
            (eps, run, samples.1)
        })
        .collect();
    let errs: Vec<(f64, Measured)> =
        runs.iter().map(|(eps, r, _)| (*eps, r.as_ref().map(|v| *v.last().expect("t is sampled")).map_err(clone_err))).collect();
    ratio_rows(&mut rows, "dispersive_m1", t, &errs);
    for (eps, _, period) in &runs {
        rows.push(Some(*eps), Some(t), "dispersive_m1_beat_period", Measured::Ok(*period), Tolerance::Info);
    }
    let sup: Vec<(f64, Measured)> = runs
        .iter()
        .map(|(eps, r, _)| (*eps, r.as_ref().map(|v| v.iter().cloned().fold(0.0, f64::max)).map_err(clone_err)))
        .collect();
    ratio_rows(&mut rows, "dispersive_m1_sup_over_time", t, &sup);
    Ok(rows.rows)
}

fn clone_err(e: &Error) -> String {
    e.to_string()
}

/// Sample times in `(0, t]` spaced by an eighth of the period at which the
/// `m` and `m + 1` bands beat, and that period.
fn beat_samples(model: &ModelSpec, branch: &BranchSpec, env: &Envelope, mu: f64, t: f64) -> (Vec<f64>, f64) {
    let xi = match *env {
        Envelope::Gaussian { center, .. } => center,
        Envelope::Bump { min, max, .. } => 0.5 * (min + max),
    };
    let period = BranchSpec::new(branch.model(), branch.m() + 1, branch.sign())
        .and_then(|next| {
            let gap = spectral::dispersion(model, &next, xi, mu)? - spectral::dispersion(model, branch, xi, mu)?;
            Ok(2.0 * PI * model.sqrt_eps() / gap.abs())
        })
        .unwrap_or(t);
    let n = ((8.0 * t / period).ceil() as usize).max(1);
    ((1..=n).map(|k| t * k as f64 / n as f64).collect(), period)
}

fn flat_m1_spec(cfg: &ExperimentConfig, s: &Setup, eps: f64) -> R<WavepacketSpec> {
    let env = envelope_or(cfg, Envelope::gaussian(0.5, 1.0)?)?;
    let model = ModelSpec::dirac(eps)?;
    let branch = BranchSpec::new(Model::Dirac, 1, Sign::Plus)?;
    let (a, b) = s.curve.s_range();
    Ok(build_packet(&model, &branch, s.curve.clone(), cfg.x0.unwrap_or(0.0), env, (a + 0.5, b - 0.5))?)
}

fn e3(cfg: &ExperimentConfig) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("E3");
    let s = setup(cfg.wall.as_ref().unwrap_or(&flat_wall()))?;
    let ts = times(cfg, &[0.5, 0.75, 1.0, 1.5, 2.0]);
    let eps = epsilons(cfg, &[1e-3], Some(Model::Dirac))?[0];

    let decay = |eps: f64, ts: &[f64]| -> R<Vec<f64>> {
        let spec = flat_m1_spec(cfg, &s, eps)?;
        ts.iter().map(|&t| Ok(SeparablePacket::new(&spec, t, None)?.max_abs())).collect()
    };
    let slope = decay(eps, &ts).map(|m| {
        let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = m.iter().map(|v| v.ln()).collect();
        least_squares_slope(&lx, &ly)
    });
    rows.push(Some(eps), None, "loglog_slope_max_amplitude", slope, Tolerance::Within { target: -0.5, tol: 0.05 });

    let t1 = 1.0;
    let ratio = decay(eps, &[t1]).and_then(|a| Ok(a[0] / decay(2.0 * eps, &[t1])?[0]));
    rows.push(
        Some(eps),
        Some(t1),
        "max_amplitude_ratio_eps_vs_2eps",
        ratio,
        Tolerance::Within { target: 2f64.powf(0.25), tol: 0.05 * 2f64.powf(0.25) },
    );

    // the relativistic branch is transported without change of shape
    let rel = (|| -> R<f64> {
        let model = ModelSpec::dirac(eps)?;
        let env = Envelope::gaussian(1.0, 0.5)?;
        let (a, b) = s.curve.s_range();
        let spec = build_packet(&model, &BranchSpec::dirac_edge(), s.curve.clone(), 1.5, env, (a + 0.5, b - 0.5))?;
        let m: Vec<f64> = ts.iter().map(|&t| Ok(SeparablePacket::new(&spec, t, None)?.max_abs())).collect::<R<_>>()?;
        let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = m.iter().map(|v| v.ln()).collect();
        Ok(least_squares_slope(&lx, &ly))
    })();
    rows.push(Some(eps), None, "loglog_slope_relativistic", rel, Tolerance::Within { target: 0.0, tol: 0.02 });
    Ok(rows.rows)
}

/// `‖Π u‖/‖u‖` with `Π` the projection onto the Dirac edge profile
/// `(1,−1)ᵀ/√2·(μ/π)^{1/4}ε^{−1/4}e^{−μỹ²/(2ε)}` along each normal line of Γ.
pub fn edge_mode_fraction(map: &RectificationMap, f: &Field) -> f64 {
    let eps = f.epsilon;
    let curve = map.curve();
    let h = f.grid.hx.min(f.grid.hy);
    let mut bins: std::collections::BTreeMap<i64, Complex64> = Default::default();
    for idx in 0..f.grid.len() {
        let d = f.density(idx);
        if d == 0.0 {
            continue;
        }
        let Ok((s, n)) = map.phi_inverse(f.grid.point(idx)) else { continue };
        let (Ok(mu), Ok(theta), Ok(k)) = (curve.slope(s), curve.angle(s), curve.curvature(s)) else { continue };
        let chi = (mu / PI).powf(0.25) * eps.powf(-0.25) * (-mu * n * n / (2.0 * eps)).exp();
        // back to the tube frame, then onto (1, −1)/√2
        let a = f.data[0][idx] * Complex64::from_polar(1.0, 0.5 * theta);
        let b = f.data[1][idx] * Complex64::from_polar(1.0, -0.5 * theta);
        let proj = (a - b) / 2f64.sqrt();
        // dA = (1 − n k) ds dn, so a cell contributes dA/(1 − n k) to ds dn
        let w = f.grid.cell_area() / (1.0 - n * k);
        *bins.entry((s / h).floor() as i64).or_default() += proj * chi * w;
    }
    let num: f64 = bins.values().map(|c| c.norm_sqr() / h).sum();
    (num / f.norm_sqr()).sqrt()
}

fn track_center(
    s: &Setup,
    model: &ModelSpec,
    cfg: &ExperimentConfig,
    grid: Grid,
    init: Field,
    ts: &[f64],
    log: Option<&Path>,
) -> R<(f64, Field)> {
    let medium = Medium::sample(&s.wall, grid, s.shift.as_ref());
    let energy: Box<dyn Fn(&Field) -> f64> = match model.model() {
        Model::Dirac => Box::new(|f: &Field| f.norm_sqr()),
        Model::KleinGordon => {
            let (m, md) = (*model, medium.clone());
            Box::new(move |f: &Field| kg_energy(&m, &md, f))
        }
    };
    let mut tracker = ObservableTracker::new(&s.map, energy).with_start(0.0);
    tracker.record(&init);
    let last = evolve(model, &medium, &cfg.solver, init, ts, &mut |f| {
        tracker.record(f);
        Ok(())
    })?;
    if let Some(p) = log {
        tracker.write_csv(BufWriter::new(File::create(p)?))?;
    }
    let t: Vec<f64> = tracker.rows.iter().map(|r| r.t).collect();
    let c: Vec<f64> = tracker.rows.iter().map(|r| r.center).collect();
    Ok((least_squares_slope(&t, &c), last))
}

fn e4(cfg: &ExperimentConfig, out: Option<&Path>) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("E4");
    let ts = times(cfg, &[0.2, 0.4, 0.6, 0.8, 1.0]);
    let t_end = *ts.last().ok_or_else(|| invalid("times", "empty"))?;
    let profile = profile_or(cfg, RealProfile::gaussian(1.0))?;
    let log = |name: &str| out.map(|d| d.join(name));

    for (label, wall, eps) in [("flat", flat_wall(), 1e-2), ("circle", circle_wall(), 4e-3)] {
        let eps = match &cfg.model {
            Some(m) if m.kind == Model::Dirac => m.epsilon[0],
            _ => eps,
        };
        let run = (|| -> R<(f64, f64, f64)> {
            let s = setup(&wall)?;
            let model = ModelSpec::dirac(eps)?;
            let grid = match label {
                "flat" => flat_grid(eps, &cfg.grid, (-2.0, 1.0))?,
                _ => curve_grid(&s.curve, eps, &cfg.grid)?,
            };
            let mode = relativistic_mode(&model, &BranchSpec::dirac_edge(), s.curve.clone(), 0.0, profile.clone(), 0.0)?;
            let init = push_forward(&s.map, &mode, grid);
            let mut reversed = init.clone();
            for z in reversed.data[1].iter_mut() {
                *z = -*z;
            }
            let (speed, last) =
                track_center(&s, &model, cfg, grid, init, &ts, log(&format!("e4_dirac_{label}.csv")).as_deref())?;
            let kept = edge_mode_fraction(&s.map, &last);
            let medium = Medium::sample(&s.wall, grid, None);
            let rev = evolve(&model, &medium, &cfg.solver, reversed, &[t_end], &mut |_| Ok(()))?;
            Ok((speed, kept, edge_mode_fraction(&s.map, &rev)))
        })();
        let (speed, kept, rev) = match run {
            Ok((a, b, c)) => (Ok(a), Ok(b), Ok(c)),
            Err(e) => {
                let m = e.to_string();
                let f = || Err(m.clone());
                (f(), f(), f())
            }
        };
        rows.push(Some(eps), Some(t_end), &format!("dirac_{label}_center_speed"), speed, Tolerance::Within { target: -1.0, tol: 0.01 });
        rows.push(Some(eps), Some(t_end), &format!("dirac_{label}_edge_overlap"), kept, Tolerance::AtLeast(0.99));
        rows.push(Some(eps), Some(t_end), &format!("dirac_{label}_reversed_spinor_overlap"), rev, Tolerance::Below(0.2));
    }

    let eps = 1e-2;
    for sign in [Sign::Plus, Sign::Minus] {
        let run = (|| -> R<f64> {
            let s = setup(&flat_wall())?;
            let model = ModelSpec::klein_gordon(eps)?;
            let branch = BranchSpec::new(Model::KleinGordon, 0, sign)?;
            let grid = flat_grid(eps, &cfg.grid, (-2.0, 2.0))?;
            let mode = relativistic_mode(&model, &branch, s.curve.clone(), 0.0, profile.clone(), 0.0)?;
            let init = push_forward_with_velocity(&s.map, &mode, grid)?;
            let name = format!("e4_kg_{}.csv", if sign == Sign::Plus { "plus" } else { "minus" });
            Ok(track_center(&s, &model, cfg, grid, init, &ts, log(&name).as_deref())?.0)
        })();
        let target = sign.value();
        let name = format!("kg_speed{}_center_speed", if sign == Sign::Plus { "+1" } else { "-1" });
        rows.push(Some(eps), Some(t_end), &name, run, Tolerance::Within { target, tol: 0.01 });
    }
    Ok(rows.rows)
}

fn e5(cfg: &ExperimentConfig) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("E5");
    let s = setup(cfg.wall.as_ref().unwrap_or(&flat_wall()))?;
    let eps = epsilons(cfg, &[1e-3], Some(Model::Dirac))?[0];
    let t = times(cfg, &[1.0])[0];
    let run = (|| -> R<(f64, f64, f64)> {
        let spec = flat_m1_spec(cfg, &s, eps)?;
        let x0 = spec.x0();
        let p0 = SeparablePacket::new(&spec, 0.0, None)?;
        let (xs0, d0) = (p0.nodes(), p0.line_density());
        let m0: f64 = d0.iter().sum();
        let mean = xs0.iter().zip(&d0).map(|(x, d)| x * d).sum::<f64>() / m0;
        let rms = (xs0.iter().zip(&d0).map(|(x, d)| (x - mean).powi(2) * d).sum::<f64>() / m0).sqrt();
        let w = 3.0 * rms;
        let p = SeparablePacket::new(&spec, t, None)?;
        let (xs, d) = (p.nodes(), p.line_density());
        let total: f64 = d.iter().sum();
        let inside: f64 = xs.iter().zip(&d).filter(|(x, _)| (**x - x0).abs() <= 1.05 * t + w).map(|(_, d)| d).sum();
        let peak = p.max_abs();
        let ys: Vec<f64> = (0..121).map(|j| (j as f64 - 60.0) * 0.1 * eps.sqrt()).collect();
        let mut far: f64 = 0.0;
        for x in [x0 - 1.5 * t, x0 + 1.5 * t] {
            let g = assemble_rectified(&spec, t, &[x], &ys)?;
            for j in 0..ys.len() {
                far = far.max((g.data[0][j].norm_sqr() + g.data[1][j].norm_sqr()).sqrt());
            }
        }
        Ok((inside / total, far / peak, w))
    })();
    let (frac, far, w) = match run {
        Ok((a, b, c)) => (Ok(a), Ok(b), Ok(c)),
        Err(e) => {
            let m = e.to_string();
            let f = || Err(m.clone());
            (f(), f(), f())
        }
    };
    rows.push(Some(eps), Some(t), "initial_width_w", w, Tolerance::Info);
    rows.push(Some(eps), Some(t), "mass_fraction_in_cone", frac, Tolerance::AtLeast(0.99));
    rows.push(Some(eps), Some(t), "relative_magnitude_at_1.5t", far, Tolerance::Below(1e-4));
    Ok(rows.rows)
}

fn e6(cfg: &ExperimentConfig) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("E6");
    let s = setup(cfg.wall.as_ref().unwrap_or(&flat_wall()))?;
    let eps = epsilons(cfg, &[1e-3], Some(Model::Dirac))?[0];
    let t = times(cfg, &[1.0])[0];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let offsets: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.8..=0.8) * t).collect();

    let errors = |eps: f64| -> R<Vec<f64>> {
        let spec = flat_m1_spec(cfg, &s, eps)?;
        offsets
            .iter()
            .map(|&dx| {
                let x = spec.x0() + dx;
                let sp = stationary_phase_eval(&spec, t, x, 0.0)?;
                let q = quadrature_reference(&spec, t, x, 0.0, 1e-12)?;
                let qn = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
                let d = ((sp.value[0] - q[0]).norm_sqr() + (sp.value[1] - q[1]).norm_sqr()).sqrt();
                Ok(d / qn)
            })
            .collect()
    };
    let rms = |v: &[f64]| (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt();
    let coarse = errors(eps);
    let fine = errors(eps / 4.0);
    rows.push(
        Some(eps),
        Some(t),
        "max_relative_error",
        coarse.as_ref().map(|v| v.iter().cloned().fold(0.0, f64::max)).map_err(|e| e.to_string()),
        Tolerance::Below(0.05),
    );
    let ratio = match (&coarse, &fine) {
        (Ok(a), Ok(b)) => Ok(rms(a) / rms(b)),
        (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
    };
    rows.push(Some(eps), Some(t), "rms_error_ratio_eps_over_eps/4", ratio, Tolerance::Range { lo: 1.5, hi: 3.0 });

    let xi = (|| -> R<f64> {
        let spec = flat_m1_spec(cfg, &s, eps)?;
        let x = spec.x0() + t / 3f64.sqrt();
        stationary_point(&spec.phase, t, x)?.ok_or_else(|| crate::wavepacket::WavepacketError::NoStationaryPoint.into())
    })();
    rows.push(Some(eps), Some(t), "stationary_point_at_x/t=1/sqrt3", xi, Tolerance::Within { target: 1.0, tol: 1e-8 });
    Ok(rows.rows)
}

fn props(cfg: &ExperimentConfig) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("props");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // geometry: frame, inverse and Jacobian on a curved open wall and on the circle
    for (label, w) in [
        ("sine", WallConfig {
            kind: super::config::WallType::Expr,
            expression: Some("y - 0.4*sin(x)".into()),
            ..WallConfig::flat([-3.0, 3.0, -2.0, 2.0])
        }),
        ("circle", circle_wall()),
    ] {
        let res = (|| -> R<(f64, f64, f64)> {
            let s = setup(&w)?;
            let (a, b) = s.curve.s_range();
            let two_eta = s.map.half_width();
            let (mut frame, mut inv, mut jac) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..1000 {
                let x = rng.gen_range(a + 0.2..b - 0.2);
                let n = rng.gen_range(-0.95 * two_eta..0.95 * two_eta);
                let (_, tau, nu) = s.curve.point_and_frame(x)?;
                let det = tau[0] * nu[1] - tau[1] * nu[0];
                frame = frame
                    .max((tau[0].hypot(tau[1]) - 1.0).abs())
                    .max((nu[0].hypot(nu[1]) - 1.0).abs())
                    .max((tau[0] * nu[0] + tau[1] * nu[1]).abs())
                    .max((det - 1.0).abs());
                let p = s.map.phi_forward(x, n)?;
                let (xs, ns) = s.map.phi_inverse(p)?;
                let dx = match s.curve.total_length() {
                    Some(l) => (xs - x + 0.5 * l).rem_euclid(l) - 0.5 * l,
                    None => xs - x,
                };
                inv = inv.max(dx.abs()).max((ns - n).abs());
                let hh = 1e-5;
                let px = [s.map.phi_forward(x + hh, n)?, s.map.phi_forward(x - hh, n)?];
                let py = [s.map.phi_forward(x, n + hh)?, s.map.phi_forward(x, n - hh)?];
                let j = ((px[0][0] - px[1][0]) * (py[0][1] - py[1][1]) - (px[0][1] - px[1][1]) * (py[0][0] - py[1][0]))
                    / (4.0 * hh * hh);
                jac = jac.max((j - s.map.jacobian(x, n)?).abs());
            }
            Ok((frame, inv, jac))
        })();
        let (f, i, j) = split3(res);
        rows.push(None, None, &format!("geometry_{label}_frame_defect"), f, Tolerance::Below(1e-12));
        rows.push(None, None, &format!("geometry_{label}_inverse_defect"), i, Tolerance::Below(1e-10));
        rows.push(None, None, &format!("geometry_{label}_jacobian_vs_fd"), j, Tolerance::Below(1e-6));
    }

    // spectral: Hermite orthonormality and ladder identity
    {
        let gl = GaussLegendre::new(40);
        let mut gram = vec![vec![0.0; 13]; 13];
        for p in 0..60 {
            let lo = -15.0 + 0.5 * p as f64;
            for (z, w) in gl.mapped(lo, lo + 0.5) {
                let ph = hermite_all(12, z);
                for i in 0..13 {
                    for j in 0..13 {
                        gram[i][j] += w * ph[i] * ph[j];
                    }
                }
            }
        }
        let mut orth: f64 = 0.0;
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                orth = orth.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        rows.push(None, None, "hermite_orthonormality_defect_n<=12", Measured::Ok(orth), Tolerance::Below(1e-12));
        let mut ladder: f64 = 0.0;
        for _ in 0..200 {
            let z = rng.gen_range(-5.0..5.0);
            let h = 1e-5;
            let (p, m) = (hermite_all(13, z + h), hermite_all(13, z - h));
            let c = hermite_all(13, z);
            for n in 0..12 {
                let d = (p[n] - m[n]) / (2.0 * h);
                let lower = if n > 0 { (n as f64 / 2.0).sqrt() * c[n - 1] } else { 0.0 };
                let want = lower - ((n + 1) as f64 / 2.0).sqrt() * c[n + 1];
                ladder = ladder.max((d - want).abs());
            }
        }
        rows.push(None, None, "hermite_ladder_identity_defect", Measured::Ok(ladder), Tolerance::Below(1e-8));

        let mut diag: f64 = 0.0;
        let mut fail = None;
        for model in [Model::Dirac, Model::KleinGordon] {
            let spec = ModelSpec::new(model, 0.01)?;
            for m in 0..=3 {
                for sign in [Sign::Plus, Sign::Minus] {
                    let Ok(b) = BranchSpec::new(model, m, sign) else { continue };
                    for xi in [-1.5, 0.0, 1.5] {
                        if model == Model::KleinGordon && m == 0 && xi == 0.0 {
                            continue;
                        }
                        match spectral::dispersion(&spec, &b, xi, 1.0) {
                            Ok(e) => {
                                let o = match model {
                                    Model::Dirac => crate::oracle::dirac_transverse_eigenvalue_near(xi, 1.0, e),
                                    Model::KleinGordon => crate::oracle::kg_transverse_energy_near(xi, 1.0, e),
                                };
                                diag = diag.max((o - e).abs());
                            }
                            Err(e) => fail = Some(e.to_string()),
                        }
                    }
                }
            }
        }
        let v = match fail {
            Some(m) => Err(m),
            None => Ok(diag),
        };
        rows.push(None, None, "dispersion_vs_diagonalization_m<=3", v, Tolerance::Below(1e-4));
    }

    // eikonal: residual and Hessian on a wall with variable slope
    {
        let res = (|| -> R<(f64, f64)> {
            let w = WallConfig {
                kind: super::config::WallType::Expr,
                expression: Some("y*(1.5 + 0.3*sin(x))".into()),
                ..WallConfig::flat([-6.0, 6.0, -1.0, 1.0])
            };
            let s = setup(&w)?;
            let model = ModelSpec::dirac(0.01)?;
            let b = BranchSpec::new(Model::Dirac, 1, Sign::Plus)?;
            let phase = solve_phase(&model, &b, s.curve.clone(), 0.0, &[(1.0, 4.0)], (-4.0, 4.0))?;
            let (lo, hi) = phase.valid_range();
            let mut resid: f64 = 0.0;
            let xis = phase.xi_grid(33);
            for i in 0..=40 {
                let x = lo + (hi - lo) * i as f64 / 40.0;
                let mu = phase.mu(x)?;
                for &xi in &xis {
                    let k = phase.values(x, xi)?.k;
                    let e = spectral::dispersion(&model, &b, k, mu)?;
                    resid = resid.max((e - phase.energy(xi).0).abs());
                }
            }
            let mut hess: f64 = 0.0;
            for _ in 0..50 {
                let x = rng.gen_range(lo.max(-3.0)..hi.min(3.0));
                let t = rng.gen_range(0.5..2.0);
                let Some(xi) = stationary_point(&phase, t, x)? else { continue };
                let g2 = phase_hessian(&phase, t, x, xi)?;
                let h = 1e-4;
                let fd = (phase.g_xi(t, x, xi + h)? - phase.g_xi(t, x, xi - h)?) / (2.0 * h);
                hess = hess.max((fd - g2).abs() / (1.0 + g2.abs()));
            }
            Ok((resid, hess))
        })();
        let (r, h) = match res {
            Ok((a, b)) => (Ok(a), Ok(b)),
            Err(e) => {
                let m = e.to_string();
                (Err(m.clone()), Err(m))
            }
        };
        rows.push(None, None, "eikonal_residual", r, Tolerance::Below(1e-10));
        rows.push(None, None, "eikonal_hessian_vs_fd", h, Tolerance::Below(1e-6));
    }

    // solvers: unitarity, reversibility, spectral accuracy and energy conservation
    {
        let eps = 0.05;
        let s = setup(&flat_wall())?;
        let model = ModelSpec::dirac(eps)?;
        let grid = flat_grid(eps, &GridConfig { points_per_sqrt_eps: 4.0, ..cfg.grid.clone() }, (-2.0, 2.0))?;
        let medium = Medium::sample(&s.wall, grid, None);
        let mode = relativistic_mode(&model, &BranchSpec::dirac_edge(), s.curve.clone(), 0.0, RealProfile::gaussian(1.0), 0.0)?;
        let init = push_forward(&s.map, &mode, grid);
        let run = (|| -> R<(f64, f64)> {
            let mut f = init.clone();
            let c = SolverConfig { model, grid, dt: 1e-3, scheme: Scheme::Second };
            let mut solver = crate::pde_reference::DiracSolver::new(&c, &medium)?;
            use crate::pde_reference::Propagator;
            for _ in 0..10_000 {
                solver.step(&mut f)?;
            }
            let drift = (f.l2_norm() - init.l2_norm()).abs() / init.l2_norm();
            solver.reverse();
            for _ in 0..10_000 {
                solver.step(&mut f)?;
            }
            Ok((drift, compare(&init, &f, &EnergyNorm::new(model, &medium))?))
        })();
        let (d, back) = match run {
            Ok((a, b)) => (Ok(a), Ok(b)),
            Err(e) => {
                let m = e.to_string();
                (Err(m.clone()), Err(m))
            }
        };
        rows.push(Some(eps), Some(10.0), "dirac_norm_drift_1e4_steps", d, Tolerance::Below(1e-10));
        rows.push(Some(eps), Some(10.0), "dirac_time_reversal_defect", back, Tolerance::Below(1e-11));

        let refine = (|| -> R<f64> {
            let coarse = evolve(&model, &medium, &cfg.solver, init.clone(), &[0.5], &mut |_| Ok(()))?;
            let fine_grid = Grid::new(2 * grid.nx, 2 * grid.ny, grid.x_min, grid.y_min, grid.hx / 2.0, grid.hy / 2.0);
            let fine_medium = Medium::sample(&s.wall, fine_grid, None);
            let fine_init = push_forward(&s.map, &mode, fine_grid);
            let fine = evolve(&model, &fine_medium, &cfg.solver, fine_init, &[0.5], &mut |_| Ok(()))?;
            let mut sub = Field::zeros(grid, FieldKind::Dirac, fine.time, eps);
            for c in 0..2 {
                for j in 0..grid.ny {
                    for i in 0..grid.nx {
                        sub.data[c][j * grid.nx + i] = fine.data[c][2 * j * fine_grid.nx + 2 * i];
                    }
                }
            }
            Ok(compare(&coarse, &sub, &EnergyNorm::new(model, &medium))?)
        })();
        rows.push(Some(eps), Some(0.5), "dirac_grid_doubling_change", refine, Tolerance::Below(1e-9));

        let kg = (|| -> R<f64> {
            let model = ModelSpec::klein_gordon(eps)?;
            let branch = BranchSpec::new(Model::KleinGordon, 0, Sign::Plus)?;
            let mode = relativistic_mode(&model, &branch, s.curve.clone(), 0.0, RealProfile::gaussian(1.0), 0.0)?;
            let mut f = push_forward_with_velocity(&s.map, &mode, grid)?;
            let limit = SolverConfig::kg_stability_limit(&model, &medium);
            let c = SolverConfig { model, grid, dt: 0.5 * limit, scheme: Scheme::Second };
            let mut solver = crate::pde_reference::KleinGordonSolver::new(&c, &medium)?;
            let scale = EnergyNorm::new(model, &medium).eval(&f)?.powi(2);
            let e0 = kg_energy(&model, &medium, &f);
            let t_end = 1.0;
            let mut worst: f64 = 0.0;
            use crate::pde_reference::Propagator;
            solver.advance(&mut f, t_end, 1, &mut |g| worst = worst.max((kg_energy(&model, &medium, g) - e0).abs()))?;
            Ok(worst / scale / t_end)
        })();
        rows.push(Some(eps), Some(1.0), "kg_energy_drift_per_unit_time", kg, Tolerance::Below(1e-6));
    }
    Ok(rows.rows)
}

fn split3(r: R<(f64, f64, f64)>) -> (Measured, Measured, Measured) {
    match r {
        Ok((a, b, c)) => (Ok(a), Ok(b), Ok(c)),
        Err(e) => {
            let m = e.to_string();
            let f = || Err(m.clone());
            (f(), f(), f())
        }
    }
}

/// Builds the configured packet at time `t` in tube coordinates.
pub fn configured_source(cfg: &ExperimentConfig, s_curve: Arc<LevelCurve>, model: &ModelSpec, t: f64) -> R<Box<dyn RectifiedSource>> {
    let branch = cfg.require_branch()?.build(model.model())?;
    let x0 = cfg.x0.unwrap_or(0.0);
    let env = cfg.require_envelope()?;
    if branch.m() == 0 && matches!(env, EnvelopeConfig::Profile { .. }) {
        return Ok(Box::new(relativistic_mode(model, &branch, s_curve, x0, env.profile()?, t)?));
    }
    let range = match s_curve.total_length() {
        Some(l) => (x0 - l, x0 + l),
        None => {
            let (a, b) = s_curve.s_range();
            (a + 1e-9, b - 1e-9)
        }
    };
    let spec = build_packet(model, &branch, s_curve, x0, env.envelope()?, range)?;
    if let Some(w) = spec.validity_warning(t, 0.5) {
        eprintln!("warning: {w}");
    }
    Ok(Box::new(SeparablePacket::new(&spec, t, None)?))
}

/// Packs the configured wavepacket on the solver grid of `wall`.
pub fn pack(cfg: &ExperimentConfig, eps: f64, t: f64) -> R<Field> {
    let s = setup(cfg.require_wall()?)?;
    let model = ModelSpec::new(cfg.require_model()?.kind, eps)?;
    let grid = curve_grid(&s.curve, eps, &cfg.grid)?;
    let src = configured_source(cfg, s.curve.clone(), &model, t)?;
    Ok(match model.model() {
        Model::Dirac => push_forward(&s.map, src.as_ref(), grid),
        Model::KleinGordon => push_forward_with_velocity(&s.map, src.as_ref(), grid)?,
    })
}

/// Runs the solver from `init` through `ts`; returns the final field and observables.
pub fn solve(cfg: &ExperimentConfig, init: Field, ts: &[f64], log: Option<&Path>) -> R<Field> {
    let s = setup(cfg.require_wall()?)?;
    let model = ModelSpec::new(cfg.require_model()?.kind, init.epsilon)?;
    let expected = match model.model() {
        Model::Dirac => FieldKind::Dirac,
        Model::KleinGordon => FieldKind::KleinGordonWithVelocity,
    };
    if init.kind != expected {
        return Err(invalid("model.kind", format!("initial field is {:?}, model needs {expected:?}", init.kind)).into());
    }
    let medium = Medium::sample(&s.wall, init.grid, s.shift.as_ref());
    let energy: Box<dyn Fn(&Field) -> f64> = match model.model() {
        Model::Dirac => Box::new(|f: &Field| f.norm_sqr()),
        Model::KleinGordon => {
            let md = medium.clone();
            Box::new(move |f: &Field| kg_energy(&model, &md, f))
        }
    };
    let mut tracker = ObservableTracker::new(&s.map, energy).with_start(cfg.x0.unwrap_or(0.0));
    tracker.record(&init);
    let last = evolve(&model, &medium, &cfg.solver, init, ts, &mut |f| {
        tracker.record(f);
        Ok(())
    })?;
    if let Some(p) = log {
        tracker.write_csv(BufWriter::new(File::create(p)?))?;
    }
    Ok(last)
}

fn custom(cfg: &ExperimentConfig, out: Option<&Path>) -> R<Vec<ReportRow>> {
    let mut rows = Rows::new("custom");
    let ts = cfg.require_times()?.to_vec();
    let s = setup(cfg.require_wall()?)?;
    let kind = cfg.require_model()?.kind;
    for eps in cfg.require_model()?.epsilon.clone() {
        let model = ModelSpec::new(kind, eps)?;
        let grid = curve_grid(&s.curve, eps, &cfg.grid)?;
        let medium = Medium::sample(&s.wall, grid, s.shift.as_ref());
        let norm = EnergyNorm::new(model, &medium);
        let asym = |t: f64| -> R<Field> {
            let src = configured_source(cfg, s.curve.clone(), &model, t)?;
            Ok(match kind {
                Model::Dirac => push_forward(&s.map, src.as_ref(), grid),
                Model::KleinGordon => push_forward_with_velocity(&s.map, src.as_ref(), grid)?,
            })
        };
        let init = asym(0.0)?;
        let mut errs = Vec::new();
        let last = evolve(&model, &medium, &cfg.solver, init, &ts, &mut |f| {
            errs.push((f.time, compare(f, &asym(f.time)?, &norm)?));
            Ok(())
        })?;
        if let Some(dir) = out {
            last.write_binary(BufWriter::new(File::create(dir.join(format!("solution_eps{eps:e}.bin")))?))?;
        }
        for (t, e) in errs {
            let metric = match kind {
                Model::Dirac => "relative_error_l2",
                Model::KleinGordon => "relative_error_surrogate_energy_norm",
            };
            rows.push(Some(eps), Some(t), metric, Measured::Ok(e), Tolerance::Info);
        }
    }
    Ok(rows.rows)
}
