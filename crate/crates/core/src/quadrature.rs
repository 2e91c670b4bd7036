//! Quadrature rules.
//!
//! [`GaussLegendre`] and [`PanelRule`] drive the oscillatory ξ-integrals of
//! the wavepacket ansatz. [`adaptive_gk`] is a globally adaptive
//! Gauss–Kronrod (7/15) integrator used as an independent reference.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A composite Gauss–Legendre rule: `panels` equal panels of `order` points.
#[derive(Clone, Debug)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub panels: usize,
    pub order: usize,
}

impl PanelRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (x, w) in gl.mapped(lo, lo + width) {
                nodes.push(x);
                weights.push(w);
            }
        }
        Self { nodes, weights, panels, order }
    }

    /// Union of disjoint intervals, each panelized with the same panel width.
    pub fn over_intervals(intervals: &[(f64, f64)], panel_width: f64, order: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut panels = 0;
        for &(a, b) in intervals {
            let n = ((b - a) / panel_width).ceil().max(1.0) as usize;
            let width = (b - a) / n as f64;
            for p in 0..n {
                let lo = a + p as f64 * width;
                for (x, w) in gl.mapped(lo, lo + width) {
                    nodes.push(x);
                    weights.push(w);
                }
            }
            panels += n;
        }
        Self { nodes, weights, panels, order }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let k = kron * h;
    let g = gauss * h;
    (k, (k - g).norm())
}

/// Result of [`adaptive_gk`].
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveResult {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod integration of a complex integrand.
///
/// Bisects the interval with the largest error estimate until the total
/// estimate drops below `max(abs_tol, rel_tol·|I|)` or `max_intervals` is hit.
pub fn adaptive_gk<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> AdaptiveResult {
    // start from a handful of subintervals so oscillatory integrands are sampled
    let init = 8;
    let mut heap: Vec<(f64, f64, Complex64, f64)> = (0..init)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / init as f64;
            let hi = a + (b - a) * (i + 1) as f64 / init as f64;
            let (v, e) = gk15(&mut f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: Complex64 = heap.iter().map(|s| s.2).sum();
        let err: f64 = heap.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return AdaptiveResult { value: total, error: err, intervals: heap.len(), converged: true };
        }
        if heap.len() >= max_intervals {
            return AdaptiveResult { value: total, error: err, intervals: heap.len(), converged: false };
        }
        let (idx, _) = heap
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = heap.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        heap.push((lo, mid, v1, e1));
        heap.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [1, 2, 5, 12, 33] {
            let gl = GaussLegendre::new(n);
            let wsum: f64 = gl.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
            assert!((got - exact).abs() < 1e-13, "n={n}");
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(2 * (n as i32 - 1)));
            assert!((got - 2.0 / (2.0 * n as f64 - 1.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn panel_rule_integrates_oscillatory_exponential() {
        // ∫_0^1 e^{i 200 x} dx
        let rule = PanelRule::new(0.0, 1.0, 64, 12);
        let re = rule.integrate(|x| (200.0 * x).cos());
        let im = rule.integrate(|x| (200.0 * x).sin());
        let exact = (Complex64::new(0.0, 200.0).exp() - 1.0) / Complex64::new(0.0, 200.0);
        assert!((re - exact.re).abs() < 1e-13);
        assert!((im - exact.im).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let r = adaptive_gk(|x| Complex64::new(1.0 / (1e-4 + x * x), 0.0), -1.0, 1.0, 1e-12, 1e-12, 4000);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!(r.converged);
        assert!((r.value.re - exact).abs() / exact < 1e-11);
    }
}
