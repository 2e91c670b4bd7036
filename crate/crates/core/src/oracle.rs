//! Independent numerical checks that share no code with the closed forms.
//!
//! The transverse operators are discretized by finite differences on a
//! truncated interval and diagonalized by Sturm-sequence bisection; two grid
//! sizes are combined by Richardson extrapolation.

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (1.0 + x.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalue closest to `target`.
pub fn tridiagonal_eigenvalue_near(diag: &[f64], off: &[f64], target: f64) -> f64 {
    let below = sturm_count(diag, off, target);
    let mut best = f64::NAN;
    for k in [below.wrapping_sub(1), below] {
        if k < diag.len() {
            let v = tridiagonal_eigenvalue(diag, off, k);
            if best.is_nan() || (v - target).abs() < (best - target).abs() {
                best = v;
            }
        }
    }
    best
}

/// Staggered discretization of `[[ξ, ∂+μz], [−∂+μz, −ξ]]` on `[−Z, Z]`:
/// the first component lives on nodes, the second on midpoints, interleaved.
pub fn dirac_transverse_matrix(xi: f64, mu: f64, half_width: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * half_width / (nodes - 1) as f64;
    let total = 2 * nodes - 1;
    let mut diag = Vec::with_capacity(total);
    let mut off = Vec::with_capacity(total - 1);
    for i in 0..total {
        diag.push(if i % 2 == 0 { xi } else { -xi });
    }
    for i in 0..total - 1 {
        let z_mid = -half_width + (i as f64 + 0.5) * 0.5 * h;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        off.push(sign / h + 0.5 * mu * z_mid);
    }
    (diag, off)
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Transverse Dirac eigenvalue nearest `target`, extrapolated from 2000 and 4000 nodes.
pub fn dirac_transverse_eigenvalue_near(xi: f64, mu: f64, target: f64) -> f64 {
    let z = 12.0 / mu.sqrt();
    let solve = |n: usize| {
        let (d, o) = dirac_transverse_matrix(xi, mu, z, n);
        tridiagonal_eigenvalue_near(&d, &o, target)
    };
    richardson(solve(2000), solve(4000))
}

/// Klein-Gordon energy `±√(ξ² + λ)` with λ the eigenvalue of
/// `−∂² + μ²z² − μ` nearest `target² − ξ²`.
pub fn kg_transverse_energy_near(xi: f64, mu: f64, target: f64) -> f64 {
    let z = 12.0 / mu.sqrt();
    let want = target * target - xi * xi;
    let solve = |n: usize| {
        let h = 2.0 * z / (n + 1) as f64;
        let diag: Vec<f64> = (1..=n)
            .map(|j| {
                let zj = -z + j as f64 * h;
                2.0 / (h * h) + mu * mu * zj * zj - mu
            })
            .collect();
        let off = vec![-1.0 / (h * h); n - 1];
        tridiagonal_eigenvalue_near(&diag, &off, want)
    };
    let lambda = richardson(solve(2000), solve(4000));
    target.signum() * (xi * xi + lambda).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_bisection_on_a_known_matrix() {
        // 1-D Laplacian: eigenvalues 2 − 2cos(kπ/(n+1))
        let n = 50;
        let d = vec![2.0; n];
        let o = vec![-1.0; n - 1];
        for k in [0, 7, 49] {
            let want = 2.0 - 2.0 * (((k + 1) as f64) * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((tridiagonal_eigenvalue(&d, &o, k) - want).abs() < 1e-12);
        }
    }
}
