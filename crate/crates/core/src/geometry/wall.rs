use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Jet2};

/// Axis-aligned rectangle in physical `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    /// Distance from an interior point to the boundary along direction `d` (unit).
    pub fn exit_distance(&self, p: [f64; 2], d: [f64; 2]) -> f64 {
        let mut t = f64::INFINITY;
        for (pi, di, lo, hi) in [(p[0], d[0], self.x_min, self.x_max), (p[1], d[1], self.y_min, self.y_max)] {
            if di > 0.0 {
                t = t.min((hi - pi) / di);
            } else if di < 0.0 {
                t = t.min((lo - pi) / di);
            }
        }
        t.max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WallKind {
    /// κ = y.
    FlatY,
    /// κ = x² + y² − R².
    Circle { radius: f64 },
    /// κ given by a parsed expression; derivatives are exact.
    Analytic(Expr),
}

/// The domain-wall coefficient κ(x, y) and the rectangle it is studied on.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainWall {
    pub kind: WallKind,
    pub bounds: Bounds,
}

impl DomainWall {
    pub fn flat_y(bounds: Bounds) -> Self {
        Self { kind: WallKind::FlatY, bounds }
    }

    pub fn circle(radius: f64, bounds: Bounds) -> Self {
        Self { kind: WallKind::Circle { radius }, bounds }
    }

    pub fn analytic(expr: Expr, bounds: Bounds) -> Self {
        Self { kind: WallKind::Analytic(expr), bounds }
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet2 {
        match &self.kind {
            WallKind::FlatY => Jet2 { v: y, dx: 0.0, dy: 1.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 },
            WallKind::Circle { radius } => Jet2 {
                v: x * x + y * y - radius * radius,
                dx: 2.0 * x,
                dy: 2.0 * y,
                dxx: 2.0,
                dxy: 0.0,
                dyy: 2.0,
            },
            WallKind::Analytic(e) => e.jet(x, y),
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            WallKind::FlatY => y,
            WallKind::Circle { radius } => x * x + y * y - radius * radius,
            WallKind::Analytic(e) => e.eval(x, y),
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        self.jet(x, y).grad()
    }

    pub fn gradient_norm(&self, x: f64, y: f64) -> f64 {
        let g = self.gradient(x, y);
        g[0].hypot(g[1])
    }
}
