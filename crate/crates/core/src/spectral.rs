//! Transverse oscillator basis and dispersion branches.
//!
//! Near Γ the wall is `ỹ μ(x̃)`, so the transverse operators are harmonic
//! oscillators in the slope-scaled variable `z' = √μ z` with `z = ỹ/√ε`.
//! Branch `m` has energy `E = s √(2 m μ + ξ²)`; the Dirac `m = 0` branch is
//! the single chiral mode `E = -ξ`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid branch: {0}")]
    InvalidBranch(String),
    #[error("zero energy at xi = {xi} on branch m = {m}: group velocity undefined")]
    ZeroEnergy { m: u32, xi: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Dirac,
    KleinGordon,
}

/// Operator selection and the semiclassical parameter ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    model: Model,
    epsilon: f64,
}

impl ModelSpec {
    pub fn new(model: Model, epsilon: f64) -> Result<Self, SpectralError> {
        if !(epsilon > 0.0 && epsilon <= 0.25) {
            return Err(SpectralError::InvalidModel(format!("epsilon = {epsilon} must lie in (0, 0.25]")));
        }
        Ok(Self { model, epsilon })
    }

    pub fn dirac(epsilon: f64) -> Result<Self, SpectralError> {
        Self::new(Model::Dirac, epsilon)
    }

    pub fn klein_gordon(epsilon: f64) -> Result<Self, SpectralError> {
        Self::new(Model::KleinGordon, epsilon)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sqrt_eps(&self) -> f64 {
        self.epsilon.sqrt()
    }

    /// Scaling exponent of the multiscale expansion: 1 for Dirac, 2 for Klein-Gordon.
    pub fn q(&self) -> u32 {
        match self.model {
            Model::Dirac => 1,
            Model::KleinGordon => 2,
        }
    }

    /// Number of field components (spinor vs scalar).
    pub fn components(&self) -> usize {
        match self.model {
            Model::Dirac => 2,
            Model::KleinGordon => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchKind {
    Relativistic,
    Dispersive,
}

/// A branch `(m, s)` of a given model. Constructed only through
/// [`BranchSpec::new`], which refuses the Dirac `(0, +)` branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BranchSpec {
    model: Model,
    m: u32,
    sign: Sign,
}

impl BranchSpec {
    pub fn new(model: Model, m: u32, sign: Sign) -> Result<Self, SpectralError> {
        if model == Model::Dirac && m == 0 && sign == Sign::Plus {
            return Err(SpectralError::InvalidBranch(
                "the Dirac m = 0 branch exists only with negative chirality (speed -1)".into(),
            ));
        }
        Ok(Self { model, m, sign })
    }

    /// The chiral Dirac edge mode `(0, −)`.
    pub fn dirac_edge() -> Self {
        Self { model: Model::Dirac, m: 0, sign: Sign::Minus }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn kind(&self) -> BranchKind {
        if self.m == 0 {
            BranchKind::Relativistic
        } else {
            BranchKind::Dispersive
        }
    }

    /// Transport speed along Γ of a relativistic branch (`None` if dispersive).
    ///
    /// For Klein-Gordon `m = 0` the sign labels the direction for ξ > 0.
    pub fn relativistic_speed(&self) -> Option<f64> {
        match (self.kind(), self.model) {
            (BranchKind::Relativistic, Model::Dirac) => Some(-1.0),
            (BranchKind::Relativistic, Model::KleinGordon) => Some(self.sign.value()),
            _ => None,
        }
    }
}

fn check_model(model: &ModelSpec, branch: &BranchSpec) -> Result<(), SpectralError> {
    if model.model != branch.model {
        return Err(SpectralError::InvalidBranch(format!(
            "branch built for {:?} used with {:?}",
            branch.model, model.model
        )));
    }
    Ok(())
}

/// L²-normalized Hermite function φ_m(z), by the normalized three-term
/// recurrence (no raw polynomials, so no overflow for large m).
pub fn hermite(m: usize, z: f64) -> f64 {
    let mut prev = PI.powf(-0.25) * (-0.5 * z * z).exp();
    if m == 0 {
        return prev;
    }
    let mut cur = std::f64::consts::SQRT_2 * z * prev;
    for n in 1..m {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * z * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// All φ_0..=φ_m at `z`.
pub fn hermite_all(m: usize, z: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(PI.powf(-0.25) * (-0.5 * z * z).exp());
    if m >= 1 {
        out.push(std::f64::consts::SQRT_2 * z * out[0]);
    }
    for n in 1..m {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * z * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// E_{m,s}(ξ; μ).
pub fn dispersion(model: &ModelSpec, branch: &BranchSpec, xi: f64, mu: f64) -> Result<f64, SpectralError> {
    check_model(model, branch)?;
    if !(mu > 0.0) {
        return Err(SpectralError::InvalidModel(format!("wall slope mu = {mu} must be positive")));
    }
    Ok(energy_unchecked(branch, xi, mu))
}

pub(crate) fn energy_unchecked(branch: &BranchSpec, xi: f64, mu: f64) -> f64 {
    if branch.model == Model::Dirac && branch.m == 0 {
        return -xi;
    }
    branch.sign.value() * (2.0 * branch.m as f64 * mu + xi * xi).sqrt()
}

/// ∂_ξ E.
pub fn group_velocity(model: &ModelSpec, branch: &BranchSpec, xi: f64, mu: f64) -> Result<f64, SpectralError> {
    let e = dispersion(model, branch, xi, mu)?;
    if branch.model == Model::Dirac && branch.m == 0 {
        return Ok(-1.0);
    }
    if e == 0.0 {
        return Err(SpectralError::ZeroEnergy { m: branch.m, xi });
    }
    Ok(xi / e)
}

/// ∂²_ξ E = 2mμ/E³ (zero on relativistic branches away from ξ = 0).
pub fn dispersion_curvature(model: &ModelSpec, branch: &BranchSpec, xi: f64, mu: f64) -> Result<f64, SpectralError> {
    let e = dispersion(model, branch, xi, mu)?;
    if branch.m == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * branch.m as f64 * mu / (e * e * e))
}

/// One separable piece `spinor · μ^{1/4} φ_n(√μ z)` of a transverse profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileTerm {
    pub hermite: usize,
    pub spinor: [Complex64; 2],
}

/// Transverse eigenfunction in `z = ỹ/√ε`, unit norm in L²(dz).
#[derive(Clone, Debug, PartialEq)]
pub struct TransverseProfile {
    pub components: usize,
    pub mu: f64,
    pub terms: Vec<ProfileTerm>,
    /// Factor that normalizes the unnormalized closed-form spinor.
    pub normalization: f64,
}

impl TransverseProfile {
    pub fn eval(&self, z: f64) -> [Complex64; 2] {
        let nmax = self.terms.iter().map(|t| t.hermite).max().unwrap_or(0);
        let phis = hermite_all(nmax, self.mu.sqrt() * z);
        let scale = self.mu.powf(0.25);
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for t in &self.terms {
            let a = scale * phis[t.hermite];
            out[0] += t.spinor[0] * a;
            out[1] += t.spinor[1] * a;
        }
        out
    }
}

/// Spinor coefficients of the Dirac `m ≥ 1` eigenvector.
///
/// Conjugating by `(σ₁+σ₃)/√2` turns the transverse Dirac operator into
/// `[[ξ, a], [a*, −ξ]]` with `a = ∂_z + μz`; the eigenvector there is
/// `(c φ_{m−1}, (E − ξ) φ_m)` with `c = √(2mμ)`.
fn dirac_dispersive_terms(m: u32, e: f64, xi: f64, mu: f64) -> (Vec<ProfileTerm>, f64) {
    let c = (2.0 * m as f64 * mu).sqrt();
    let d = e - xi;
    let norm = 1.0 / (c * c + d * d).sqrt();
    let r = std::f64::consts::FRAC_1_SQRT_2 * norm;
    let terms = vec![
        ProfileTerm { hermite: m as usize - 1, spinor: [Complex64::new(c * r, 0.0), Complex64::new(c * r, 0.0)] },
        ProfileTerm { hermite: m as usize, spinor: [Complex64::new(d * r, 0.0), Complex64::new(-d * r, 0.0)] },
    ];
    (terms, norm)
}

pub fn transverse_profile(
    model: &ModelSpec,
    branch: &BranchSpec,
    xi: f64,
    mu: f64,
) -> Result<TransverseProfile, SpectralError> {
    let e = dispersion(model, branch, xi, mu)?;
    Ok(profile_unchecked(branch, e, xi, mu))
}

pub(crate) fn profile_unchecked(branch: &BranchSpec, e: f64, xi: f64, mu: f64) -> TransverseProfile {
    let zero = Complex64::new(0.0, 0.0);
    match branch.model {
        Model::Dirac if branch.m == 0 => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            TransverseProfile {
                components: 2,
                mu,
                terms: vec![ProfileTerm { hermite: 0, spinor: [Complex64::new(r, 0.0), Complex64::new(-r, 0.0)] }],
                normalization: r,
            }
        }
        Model::Dirac => {
            let (terms, normalization) = dirac_dispersive_terms(branch.m, e, xi, mu);
            TransverseProfile { components: 2, mu, terms, normalization }
        }
        Model::KleinGordon => TransverseProfile {
            components: 1,
            mu,
            terms: vec![ProfileTerm { hermite: branch.m as usize, spinor: [Complex64::new(1.0, 0.0), zero] }],
            normalization: 1.0,
        },
    }
}

/// Writes `xi,E,dE` for `xi` in `xis`.
pub fn write_branch_table<W: Write>(
    w: W,
    model: &ModelSpec,
    branch: &BranchSpec,
    mu: f64,
    xis: &[f64],
) -> Result<(), crate::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["xi", "E", "dE"])?;
    for &xi in xis {
        let e = dispersion(model, branch, xi, mu)?;
        let v = group_velocity(model, branch, xi, mu).unwrap_or(f64::NAN);
        wr.write_record([format!("{xi:.9e}"), format!("{e:.9e}"), format!("{v:.9e}")])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::quadrature::PanelRule;
    use proptest::prelude::*;

    fn dirac() -> ModelSpec {
        ModelSpec::dirac(0.01).unwrap()
    }

    fn kg() -> ModelSpec {
        ModelSpec::klein_gordon(0.01).unwrap()
    }

    fn br(model: Model, m: u32, s: Sign) -> BranchSpec {
        BranchSpec::new(model, m, s).unwrap()
    }

    #[test]
    fn model_spec_validation() {
        assert_eq!(dirac().q(), 1);
        assert_eq!(kg().q(), 2);
        assert!(ModelSpec::dirac(0.3).is_err());
        assert!(ModelSpec::dirac(0.0).is_err());
        assert!(ModelSpec::dirac(0.25).is_ok());
    }

    #[test]
    fn dirac_plus_edge_mode_is_unrepresentable() {
        assert!(matches!(BranchSpec::new(Model::Dirac, 0, Sign::Plus), Err(SpectralError::InvalidBranch(_))));
        assert!(BranchSpec::new(Model::KleinGordon, 0, Sign::Plus).is_ok());
        assert_eq!(BranchSpec::dirac_edge().kind(), BranchKind::Relativistic);
        assert_eq!(br(Model::Dirac, 2, Sign::Plus).kind(), BranchKind::Dispersive);
    }

    #[test]
    fn hermite_examples() {
        assert!((hermite(0, 0.0) - PI.powf(-0.25)).abs() < 1e-15);
        assert!((hermite(0, 0.0) - 0.751_125_544_464_942_5).abs() < 1e-15);
        assert_eq!(hermite(1, 0.0), 0.0);
        let rule = PanelRule::new(-14.0, 14.0, 56, 16);
        let n = rule.integrate(|z| hermite(3, z).powi(2));
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_orthonormality() {
        let rule = PanelRule::new(-16.0, 16.0, 64, 20);
        for i in 0..=12 {
            for j in 0..=i {
                let ip = rule.integrate(|z| hermite(i, z) * hermite(j, z));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-9, "<{i},{j}> = {ip}");
            }
        }
    }

    #[test]
    fn hermite_ladder_identity() {
        let h = 1e-5;
        for m in 1..=10 {
            let mut z = -8.0;
            while z <= 8.0 {
                let d = (hermite(m, z + h) - hermite(m, z - h)) / (2.0 * h);
                let lhs = z * hermite(m, z) + d;
                let rhs = (2.0 * m as f64).sqrt() * hermite(m - 1, z);
                assert!((lhs - rhs).abs() < 1e-8, "m={m} z={z}");
                z += 0.25;
            }
        }
    }

    #[test]
    fn hermite_high_order_is_finite() {
        for z in [-9.0, -3.3, 0.0, 0.7, 9.5] {
            let v = hermite(50, z);
            assert!(v.is_finite() && v.abs() < 1.0);
        }
        assert_eq!(hermite_all(7, 0.4)[7], hermite(7, 0.4));
    }

    #[test]
    fn dispersion_examples() {
        let e = dispersion(&dirac(), &br(Model::Dirac, 1, Sign::Plus), 0.0, 1.0).unwrap();
        assert!((e - 2f64.sqrt()).abs() < 1e-15);
        let e = dispersion(&kg(), &br(Model::KleinGordon, 0, Sign::Minus), 3.0, 1.0).unwrap();
        assert_eq!(e, -3.0);
        let e = dispersion(&dirac(), &br(Model::Dirac, 2, Sign::Minus), 1.0, 2.0).unwrap();
        assert!((e + 3.0).abs() < 1e-15);
        for xi in [-1.5, 0.0, 0.7] {
            let e = dispersion(&dirac(), &br(Model::Dirac, 1, Sign::Minus), xi, 1.0).unwrap();
            assert_eq!(e, -(2.0 + xi * xi).sqrt());
        }
        assert!(dispersion(&dirac(), &br(Model::KleinGordon, 1, Sign::Plus), 0.0, 1.0).is_err());
        assert!(dispersion(&dirac(), &br(Model::Dirac, 1, Sign::Plus), 0.0, 0.0).is_err());
    }

    #[test]
    fn dispersion_matches_diagonalized_transverse_operator() {
        for mu in [1.0, 2.0] {
            for xi in [-2.0, 0.0, 2.0] {
                let e0 = dispersion(&dirac(), &BranchSpec::dirac_edge(), xi, mu).unwrap();
                let num = oracle::dirac_transverse_eigenvalue_near(xi, mu, e0);
                assert!((num - e0).abs() < 1e-4, "m=0 xi={xi} mu={mu}: {num} vs {e0}");
                for m in 1..=3 {
                    for s in [Sign::Plus, Sign::Minus] {
                        let e = dispersion(&dirac(), &br(Model::Dirac, m, s), xi, mu).unwrap();
                        let num = oracle::dirac_transverse_eigenvalue_near(xi, mu, e);
                        assert!((num - e).abs() < 1e-4, "m={m} xi={xi} mu={mu}: {num} vs {e}");
                    }
                    let e = dispersion(&kg(), &br(Model::KleinGordon, m, Sign::Plus), xi, mu).unwrap();
                    let num = oracle::kg_transverse_energy_near(xi, mu, e);
                    assert!((num - e).abs() < 1e-4, "KG m={m}: {num} vs {e}");
                }
            }
        }
    }

    #[test]
    fn group_velocity_examples() {
        let b = br(Model::Dirac, 1, Sign::Plus);
        assert_eq!(group_velocity(&dirac(), &b, 0.0, 1.0).unwrap(), 0.0);
        let v = group_velocity(&dirac(), &b, 100.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-4 && v < 1.0);
        for xi in [-5.0, 0.0, 3.0] {
            assert_eq!(group_velocity(&dirac(), &BranchSpec::dirac_edge(), xi, 1.0).unwrap(), -1.0);
        }
        assert!(matches!(
            group_velocity(&kg(), &br(Model::KleinGordon, 0, Sign::Plus), 0.0, 1.0),
            Err(SpectralError::ZeroEnergy { .. })
        ));
        assert_eq!(group_velocity(&kg(), &br(Model::KleinGordon, 0, Sign::Minus), 2.0, 1.0).unwrap(), -1.0);
    }

    proptest! {
        #[test]
        fn group_velocity_matches_finite_differences(xi in -6.0f64..6.0, mu in 0.3f64..4.0, m in 1u32..4, plus in any::<bool>()) {
            let s = if plus { Sign::Plus } else { Sign::Minus };
            let b = br(Model::Dirac, m, s);
            let h = 1e-5;
            let fd = (dispersion(&dirac(), &b, xi + h, mu).unwrap() - dispersion(&dirac(), &b, xi - h, mu).unwrap()) / (2.0 * h);
            let v = group_velocity(&dirac(), &b, xi, mu).unwrap();
            prop_assert!((fd - v).abs() < 1e-8);
            prop_assert!(v.abs() < 1.0);
            let h2 = 1e-4;
            let fd2 = (dispersion(&dirac(), &b, xi + h2, mu).unwrap() - 2.0 * dispersion(&dirac(), &b, xi, mu).unwrap()
                + dispersion(&dirac(), &b, xi - h2, mu).unwrap()) / (h2 * h2);
            let c = dispersion_curvature(&dirac(), &b, xi, mu).unwrap();
            prop_assert!((fd2 - c).abs() < 1e-5 * (1.0 + c.abs()));
        }

        #[test]
        fn profiles_are_unit_norm_with_gaussian_decay(xi in -4.0f64..4.0, mu in 0.5f64..3.0, m in 0u32..4, plus in any::<bool>()) {
            let s = if plus || m == 0 { if m == 0 { Sign::Minus } else { Sign::Plus } } else { Sign::Minus };
            let b = br(Model::Dirac, m, s);
            let p = transverse_profile(&dirac(), &b, xi, mu).unwrap();
            let rule = PanelRule::new(-20.0, 20.0, 80, 16);
            let n = rule.integrate(|z| { let v = p.eval(z); v[0].norm_sqr() + v[1].norm_sqr() });
            prop_assert!((n - 1.0).abs() < 1e-10);
            for z in [6.0f64, 7.5, -9.0] {
                let v = p.eval(z);
                let a = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
                prop_assert!(a <= 10.0 * (1.0 + z.abs()).powi(m as i32) * (-mu * z * z / 2.0).exp());
            }
        }
    }

    #[test]
    fn dirac_edge_profile_is_the_paper_gaussian() {
        let p = transverse_profile(&dirac(), &BranchSpec::dirac_edge(), 0.3, 1.0).unwrap();
        for z in [-1.0, 0.0, 0.5, 2.0] {
            let v = p.eval(z);
            let g = PI.powf(-0.25) * (-0.5 * z * z).exp() / 2f64.sqrt();
            assert!((v[0].re - g).abs() < 1e-15 && (v[1].re + g).abs() < 1e-15);
        }
    }

    #[test]
    fn dirac_first_branch_matches_closed_form_spinor() {
        // (σ1+σ3)(1, (E−ξ) z)ᵀ e^{−z²/2}, normalized
        for (xi, s) in [(0.0, Sign::Plus), (0.8, Sign::Minus), (-1.3, Sign::Plus)] {
            let b = br(Model::Dirac, 1, s);
            let e = dispersion(&dirac(), &b, xi, 1.0).unwrap();
            let p = transverse_profile(&dirac(), &b, xi, 1.0).unwrap();
            let raw = |z: f64| {
                let g = (-0.5 * z * z).exp() / PI.powf(0.25);
                let v = [1.0, (e - xi) * z];
                [g * (v[0] + v[1]), g * (v[0] - v[1])]
            };
            let rule = PanelRule::new(-15.0, 15.0, 60, 16);
            let n2 = rule.integrate(|z| { let r = raw(z); r[0] * r[0] + r[1] * r[1] });
            for z in [-1.2, 0.0, 0.4, 2.5] {
                let r = raw(z);
                let v = p.eval(z);
                assert!((v[0].re - r[0] / n2.sqrt()).abs() < 1e-12);
                assert!((v[1].re - r[1] / n2.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kg_ground_profile_width_scales_with_slope() {
        let p = transverse_profile(&kg(), &br(Model::KleinGordon, 0, Sign::Minus), 1.0, 4.0).unwrap();
        let rule = PanelRule::new(-12.0, 12.0, 48, 16);
        let raw_norm = rule.integrate(|z| (-4.0 * z * z).exp()).sqrt();
        for z in [0.0f64, 0.3, -0.8] {
            let want = (-2.0 * z * z).exp() / raw_norm;
            assert!((p.eval(z)[0].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn profiles_are_kernel_vectors_of_the_transverse_operator() {
        // Apply ξσ1 − iσ2∂_z + μzσ3 by finite differences; expect E·ψ.
        let mu = 1.7;
        for (m, s, xi) in [(0u32, Sign::Minus, 0.4), (1, Sign::Plus, -0.9), (2, Sign::Minus, 1.6), (3, Sign::Plus, 0.0)] {
            let b = br(Model::Dirac, m, s);
            let e = dispersion(&dirac(), &b, xi, mu).unwrap();
            let p = transverse_profile(&dirac(), &b, xi, mu).unwrap();
            let h = 1e-5;
            for z in [-1.1, 0.2, 0.9] {
                let v = p.eval(z);
                let vp = p.eval(z + h);
                let vm = p.eval(z - h);
                let d = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
                // −iσ2 = [[0, −1], [1, 0]]
                let h0 = v[1] * xi - d[1] + v[0] * (mu * z);
                let h1 = v[0] * xi + d[0] - v[1] * (mu * z);
                assert!((h0 - v[0] * e).norm() < 1e-8, "m={m}");
                assert!((h1 - v[1] * e).norm() < 1e-8, "m={m}");
            }
        }
    }

    #[test]
    fn branch_table_csv() {
        let mut buf = Vec::new();
        write_branch_table(&mut buf, &dirac(), &br(Model::Dirac, 1, Sign::Plus), 1.0, &[-1.0, 0.0, 1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("xi,E,dE"));
    }
}
