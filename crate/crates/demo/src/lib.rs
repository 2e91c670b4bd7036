//! Browser bindings for three interactive views: tracing a wall, the edge
//! dispersion branches and the spreading of a dispersive packet.

use wallwave::geometry::{trace_level_set, Bounds, DomainWall};
use wallwave::harness::config::build_packet;
use wallwave::spectral::{dispersion, BranchSpec, Model, ModelSpec, Sign};
use wallwave::wavepacket::{Envelope, SeparablePacket};
use wasm_bindgen::prelude::*;

/// A traced wall, flattened for plotting.
#[wasm_bindgen]
pub struct WallTrace {
    xy: Vec<f64>,
    curvature: Vec<f64>,
    slope: Vec<f64>,
    length: f64,
    closed: bool,
}

#[wasm_bindgen]
impl WallTrace {
    /// Interleaved `x0, y0, x1, y1, …`.
    pub fn xy(&self) -> Vec<f64> {
        self.xy.clone()
    }

    pub fn curvature(&self) -> Vec<f64> {
        self.curvature.clone()
    }

    pub fn slope(&self) -> Vec<f64> {
        self.slope.clone()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn closed(&self) -> bool {
        self.closed
    }
}

/// Traces the zero set of `expression` (in `x`, `y`) inside the box, starting
/// from the point of the box closest to the set along the line `x = mid`.
pub fn trace_expression(expression: &str, bounds: [f64; 4]) -> Result<WallTrace, String> {
    let expr = wallwave::expr::Expr::parse(expression).map_err(|e| e.to_string())?;
    let [x0, x1, y0, y1] = bounds;
    if !(x1 > x0 && y1 > y0) {
        return Err("the box must have positive width and height".into());
    }
    let wall = DomainWall::analytic(expr, Bounds::new(x0, x1, y0, y1));
    let xm = 0.5 * (x0 + x1);
    let seed = (0..=400)
        .map(|k| [xm, y0 + (y1 - y0) * k as f64 / 400.0])
        .min_by(|a, b| wall.value(a[0], a[1]).abs().total_cmp(&wall.value(b[0], b[1]).abs()))
        .expect("non-empty scan");
    let step = 0.002 * (x1 - x0).max(y1 - y0);
    let curve = trace_level_set(&wall, seed, step, 40.0 * (x1 - x0).max(y1 - y0)).map_err(|e| e.to_string())?;
    let samples = curve.samples();
    let stride = samples.len().div_ceil(2000).max(1);
    let picked: Vec<_> = samples.iter().step_by(stride).collect();
    let (a, b) = curve.s_range();
    Ok(WallTrace {
        xy: picked.iter().flat_map(|s| s.point).collect(),
        curvature: picked.iter().map(|s| s.curvature).collect(),
        slope: picked.iter().map(|s| s.slope).collect(),
        length: curve.total_length().unwrap_or(b - a),
        closed: curve.is_closed(),
    })
}

/// Branch energies `E(ξ)` at slope `mu` for `m ≤ m_max`, one row per ξ:
/// `ξ, E_0, E_{1,+}, E_{1,−}, …, E_{m_max,−}`; missing branches are NaN.
pub fn branch_table(model: &str, mu: f64, m_max: u32, xi_min: f64, xi_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let model = match model {
        "dirac" => Model::Dirac,
        "klein_gordon" | "kg" => Model::KleinGordon,
        other => return Err(format!("unknown model `{other}`")),
    };
    if !(mu > 0.0) || n < 2 || !(xi_max > xi_min) || m_max > 12 {
        return Err("need mu > 0, n ≥ 2, xi_max > xi_min and m_max ≤ 12".into());
    }
    let spec = ModelSpec::new(model, 0.01).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(n * (2 + 2 * m_max as usize));
    for i in 0..n {
        let xi = xi_min + (xi_max - xi_min) * i as f64 / (n - 1) as f64;
        out.push(xi);
        let zero = BranchSpec::new(model, 0, Sign::Minus).map_err(|e| e.to_string())?;
        out.push(dispersion(&spec, &zero, xi, mu).unwrap_or(f64::NAN));
        for m in 1..=m_max {
            for sign in [Sign::Plus, Sign::Minus] {
                let e = BranchSpec::new(model, m, sign).and_then(|b| dispersion(&spec, &b, xi, mu));
                out.push(e.unwrap_or(f64::NAN));
            }
        }
    }
    Ok(out)
}

/// Line density `∫|v|² dỹ` of a flat-wall Dirac `m = 1` packet with a
/// Gaussian frequency envelope, as interleaved `x̃, density` pairs, followed
/// by the maximal amplitude.
pub fn dispersive_packet(epsilon: f64, center: f64, width: f64, t: f64) -> Result<Vec<f64>, String> {
    if !(1e-4..=0.1).contains(&epsilon) {
        return Err("epsilon must lie in [1e-4, 0.1]".into());
    }
    let half = 6.0 + t.abs() * 1.2;
    let wall = DomainWall::flat_y(Bounds::new(-half - 1.0, half + 1.0, -1.0, 1.0));
    let curve = trace_level_set(&wall, [0.0, 0.0], 0.01, 4.0 * half).map_err(|e| e.to_string())?;
    let model = ModelSpec::dirac(epsilon).map_err(|e| e.to_string())?;
    let branch = BranchSpec::new(Model::Dirac, 1, Sign::Plus).map_err(|e| e.to_string())?;
    let envelope = Envelope::gaussian(center, width).map_err(|e| e.to_string())?;
    let (a, b) = curve.s_range();
    let spec = build_packet(&model, &branch, std::sync::Arc::new(curve), 0.0, envelope, (a + 0.5, b - 0.5))
        .map_err(|e| e.to_string())?;
    let packet = SeparablePacket::new(&spec, t, None).map_err(|e| e.to_string())?;
    let (xs, d) = (packet.nodes(), packet.line_density());
    let stride = xs.len().div_ceil(1500).max(1);
    let mut out: Vec<f64> = xs.iter().zip(&d).step_by(stride).flat_map(|(x, v)| [*x, *v]).collect();
    out.push(packet.max_abs());
    Ok(out)
}

#[wasm_bindgen(js_name = traceWall)]
pub fn trace_wall(expression: &str, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<WallTrace, JsValue> {
    trace_expression(expression, [x_min, x_max, y_min, y_max]).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = branchTable)]
pub fn branch_table_js(model: &str, mu: f64, m_max: u32, xi_min: f64, xi_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    branch_table(model, mu, m_max, xi_min, xi_max, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = dispersivePacket)]
pub fn dispersive_packet_js(epsilon: f64, center: f64, width: f64, t: f64) -> Result<Vec<f64>, JsValue> {
    dispersive_packet(epsilon, center, width, t).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_trace_has_length_two_pi() {
        let c = trace_expression("x^2 + y^2 - 1", [-2.0, 2.0, -2.0, 2.0]).unwrap();
        assert!(c.closed());
        assert!((c.length() - 2.0 * std::f64::consts::PI).abs() < 1e-6);
        assert_eq!(c.xy().len(), 2 * c.curvature().len());
        assert!(trace_expression("x +", [-1.0, 1.0, -1.0, 1.0]).is_err());
        let ellipse = trace_expression("x^2 + y^2/0.5 - 1", [-2.0, 2.0, -2.0, 2.0]).unwrap();
        assert!(ellipse.closed());
        assert!(ellipse.length() > 2.0 * std::f64::consts::PI * 0.5f64.sqrt() && ellipse.length() < 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn branch_rows_match_the_dispersion_law() {
        let t = branch_table("dirac", 2.0, 2, -1.0, 1.0, 3).unwrap();
        assert_eq!(t.len(), 3 * 6);
        let row = &t[6..12];
        assert_eq!(row[0], 0.0);
        assert!((row[1] - 0.0).abs() < 1e-14);
        assert!((row[2] - 2.0).abs() < 1e-12);
        assert!((row[3] + 2.0).abs() < 1e-12);
        assert!(branch_table("schrodinger", 1.0, 1, 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn packet_amplitude_decays() {
        let early = dispersive_packet(0.004, 1.0, 0.5, 1.0).unwrap();
        let late = dispersive_packet(0.004, 1.0, 0.5, 4.0).unwrap();
        let ratio = early.last().unwrap() / late.last().unwrap();
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }
}
