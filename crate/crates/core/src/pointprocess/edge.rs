//! Edge-correction weights for a rectangular window.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Window;
use crate::curves::Vec2;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeCorrection {
    /// Minus sampling (border method).
    Minus,
    /// Translation correction, `|X| / |X ∩ (X + y)|`.
    #[default]
    Translational,
    /// Ripley's isotropic correction.
    Isotropic,
}

impl EdgeCorrection {
    pub const ALL: [EdgeCorrection; 3] = [
        EdgeCorrection::Minus,
        EdgeCorrection::Translational,
        EdgeCorrection::Isotropic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeCorrection::Minus => "minus",
            EdgeCorrection::Translational => "translational",
            EdgeCorrection::Isotropic => "isotropic",
        }
    }
}

impl fmt::Display for EdgeCorrection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeCorrection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "minus" => Ok(EdgeCorrection::Minus),
            "translational" | "translation" => Ok(EdgeCorrection::Translational),
            "isotropic" => Ok(EdgeCorrection::Isotropic),
            other => Err(Error::InvalidArgument(format!(
                "unknown edge correction '{other}' (expected minus, translational or isotropic)"
            ))),
        }
    }
}

/// Weight `w(x, x1)` for the pair `(x, x1)`. `None` marks a pair the
/// translation correction cannot weight (displacement as long as a side).
pub fn edge_weight(kind: EdgeCorrection, x: Vec2, x1: Vec2, window: &Window) -> Option<f64> {
    let y = x1 - x;
    match kind {
        EdgeCorrection::Translational => {
            let ox = window.width() - y.x.abs();
            let oy = window.height() - y.y.abs();
            if ox <= 0.0 || oy <= 0.0 {
                None
            } else {
                Some(window.area() / (ox * oy))
            }
        }
        EdgeCorrection::Minus => Some(minus_weight(x, y.norm(), window)),
        EdgeCorrection::Isotropic => {
            let d = y.norm();
            if d == 0.0 {
                return Some(1.0);
            }
            let inside = circle_arc_inside(x, d, window);
            if inside <= 0.0 {
                None
            } else {
                Some(TAU * d / inside)
            }
        }
    }
}

fn minus_weight(x: Vec2, d: f64, window: &Window) -> f64 {
    let ex = window.width() - 2.0 * d;
    let ey = window.height() - 2.0 * d;
    if ex <= 0.0 || ey <= 0.0 {
        return 0.0;
    }
    let inside = x.x - window.xmin >= d && window.xmax - x.x >= d && x.y - window.ymin >= d && window.ymax - x.y >= d;
    if inside {
        window.area() / (ex * ey)
    } else {
        0.0
    }
}

/// Length of the circle `∂B_center(radius)` lying inside the window.
pub fn circle_arc_inside(center: Vec2, radius: f64, window: &Window) -> f64 {
    let mut angles = vec![0.0, TAU];
    let mut push = |a: f64| angles.push(a.rem_euclid(TAU));
    for c in [window.xmin, window.xmax] {
        let u = (c - center.x) / radius;
        if u.abs() < 1.0 {
            let a = u.acos();
            push(a);
            push(-a);
        }
    }
    for c in [window.ymin, window.ymax] {
        let u = (c - center.y) / radius;
        if u.abs() < 1.0 {
            let a = u.asin();
            push(a);
            push(PI - a);
        }
    }
    angles.sort_by(f64::total_cmp);
    let mut inside = 0.0;
    for w in angles.windows(2) {
        let span = w[1] - w[0];
        if span <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let p = center + Vec2::new(mid.cos(), mid.sin()) * radius;
        if window.contains(p) {
            inside += span;
        }
    }
    inside * radius
}
