//! Closed-form return map over one coefficient period.
//!
//! From a positive constant history `h`, a solution of the two-zero shape has a
//! zero at `t1 = h / a1`, a second zero at `t1 + 2`, turns downward again at
//! `t1 + 3` and stays positive until `T`. Tracking the affine pieces gives
//!
//! ```text
//! x(p1)     = -h + a1*p1 - 2*a1
//! x(t1 + 3) = (a2/a1 - 1)*h + a1*p1 - 2*a1 + 3*a2 - a2*p1
//! x(T)      = m*h + b,  m = 2*a2/a1 - 1,  b = a1*(p1 - 2) + a2*(6 - 2*p1 - p2)
//! ```
//!
//! The fixed point `h* = b / (1 - m)` generates a periodic orbit, stable when
//! `|m| < 1`, i.e. `0 < a2 < a1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::model::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapCoeffs {
    pub m: f64,
    pub b: f64,
    pub h_star: f64,
}

impl MapCoeffs {
    pub fn apply(&self, h: f64) -> f64 {
        self.m * h + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeValues {
    pub h: f64,
    pub t1: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Conditions {
    pub p1_gt_2: bool,
    pub b_positive: bool,
    /// `a1 > a2`, equivalently `|m| < 1`.
    pub contraction: bool,
    /// `t1 + 2 <= p1` and `p1 < t1 + 3 < T` at `h = h*`.
    pub shape_window: bool,
    pub x3_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub conditions: Conditions,
    pub overall: bool,
    pub h_star: Option<f64>,
}

/// Half-open interval `(lower, upper]` (or `(lower, upper)` when the binding
/// upper bound is strict).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HInterval {
    pub lower: f64,
    pub upper: f64,
    pub upper_closed: bool,
}

impl HInterval {
    pub fn contains(&self, h: f64) -> bool {
        h > self.lower && (h < self.upper || (self.upper_closed && h == self.upper))
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Point at relative position `frac` in `(0, 1]` from the lower end.
    pub fn point_at(&self, frac: f64) -> f64 {
        let frac = frac.clamp(f64::MIN_POSITIVE, 1.0);
        let h = self.lower + frac * self.width();
        if self.contains(h) {
            h
        } else {
            // strict upper bound hit exactly
            self.lower + 0.5 * self.width()
        }
    }
}

/// `(m, b, h*)` of the return map `h -> m*h + b`.
pub fn map_coefficients(params: &Params) -> Result<MapCoeffs> {
    let (a1, a2, p1, p2) = (params.a1(), params.a2(), params.p1(), params.p2());
    if a1 == a2 {
        return Err(Error::DegenerateMap);
    }
    let m = 2.0 * a2 / a1 - 1.0;
    let b = a1 * (p1 - 2.0) + a2 * (6.0 - (2.0 * p1 + p2));
    Ok(MapCoeffs {
        m,
        b,
        h_star: b / (1.0 - m),
    })
}

pub fn shape_values(params: &Params, h: f64) -> ShapeValues {
    let (a1, a2, p1, p2) = (params.a1(), params.a2(), params.p1(), params.p2());
    let m = 2.0 * a2 / a1 - 1.0;
    let b = a1 * (p1 - 2.0) + a2 * (6.0 - (2.0 * p1 + p2));
    ShapeValues {
        h,
        t1: h / a1,
        x1: -h + a1 * p1 - 2.0 * a1,
        x2: (a2 / a1 - 1.0) * h + a1 * p1 - 2.0 * a1 + 3.0 * a2 - a2 * p1,
        x3: m * h + b,
    }
}

/// The set of `h > 0` on which the solution has the two-zero shape over one
/// period, so that `x(T) = m*h + b` holds exactly. `None` when empty.
///
/// Bounds: `a1*(p1 - 3) < h` (third zero-delay after `p1`), `h <= a1*(p1 - 2)`
/// (second zero no later than `p1`), `h < a1*(T - 3)` (turn before `T`) and
/// `m*h + b > 0`.
pub fn valid_h_interval(params: &Params) -> Option<HInterval> {
    let (a1, a2, p1, p2) = (params.a1(), params.a2(), params.p1(), params.p2());
    let m = 2.0 * a2 / a1 - 1.0;
    let b = a1 * (p1 - 2.0) + a2 * (6.0 - (2.0 * p1 + p2));

    let mut lower = (a1 * (p1 - 3.0)).max(0.0);
    // (bound, closed); strict bounds win ties
    let mut uppers = vec![(a1 * (p1 - 2.0), true), (a1 * (p1 + p2 - 3.0), false)];
    if m < 0.0 {
        uppers.push((-b / m, false));
    } else if m > 0.0 {
        lower = lower.max(-b / m);
    } else if b <= 0.0 {
        return None;
    }
    let (upper, upper_closed) = uppers
        .into_iter()
        .reduce(|best, c| {
            if c.0 < best.0 || (c.0 == best.0 && !c.1) {
                c
            } else {
                best
            }
        })
        .expect("non-empty bound list");
    (upper > lower).then_some(HInterval {
        lower,
        upper,
        upper_closed,
    })
}

/// Evaluates the hypotheses for a stable slowly oscillating periodic orbit.
pub fn check_theorem1(params: &Params) -> ConditionReport {
    let (a1, a2, p1) = (params.a1(), params.a2(), params.p1());
    let period = params.period();
    let coeffs = map_coefficients(params).ok();
    let b = a1 * (p1 - 2.0) + a2 * (6.0 - (2.0 * p1 + params.p2()));

    let (shape_window, x3_positive) = match coeffs {
        Some(c) => {
            let h = c.h_star;
            let t1 = h / a1;
            let window = h > 0.0 && t1 + 2.0 <= p1 && p1 < t1 + 3.0 && t1 + 3.0 < period;
            (window, c.apply(h) > 0.0)
        }
        None => (false, false),
    };
    let conditions = Conditions {
        p1_gt_2: p1 > 2.0,
        b_positive: b > 0.0,
        contraction: a1 > a2,
        shape_window,
        x3_positive,
    };
    let overall = conditions.p1_gt_2
        && conditions.b_positive
        && conditions.contraction
        && conditions.shape_window
        && conditions.x3_positive;
    ConditionReport {
        conditions,
        overall,
        h_star: coeffs.map(|c| c.h_star),
    }
}

/// `h_1, ..., h_n` with `h_{k+1} = m*h_k + b`.
pub fn iterate_map(params: &Params, h0: f64, n: usize) -> Result<Vec<f64>> {
    let c = map_coefficients(params)?;
    Ok(std::iter::successors(Some(h0), |&h| Some(c.apply(h)))
        .skip(1)
        .take(n)
        .collect())
}

/// `x(T)` of the exact solution from constant history `h`, restricted to the
/// window where it must agree with the closed form.
pub fn empirical_map(params: &Params, h: f64) -> Result<f64> {
    let interval = valid_h_interval(params).ok_or_else(|| {
        Error::Precondition("no h gives a two-zero solution for these parameters".into())
    })?;
    if !interval.contains(h) {
        return Err(Error::Precondition(format!(
            "h = {h} outside the valid interval ({}, {}{}",
            interval.lower,
            interval.upper,
            if interval.upper_closed { "]" } else { ")" }
        )));
    }
    let period = params.period();
    solve_exact(params, h, period)?.eval(period)
}

/// JSON-facing summary of the map analysis.
#[derive(Debug, Clone, Serialize)]
pub struct MapReport {
    pub m: f64,
    pub b: f64,
    pub h_star: f64,
    pub conditions: Conditions,
    pub overall: bool,
    pub valid_h_interval: Option<HInterval>,
}

impl MapReport {
    pub fn new(params: &Params) -> Result<Self> {
        let c = map_coefficients(params)?;
        let report = check_theorem1(params);
        Ok(MapReport {
            m: c.m,
            b: c.b,
            h_star: c.h_star,
            conditions: report.conditions,
            overall: report.overall,
            valid_h_interval: valid_h_interval(params),
        })
    }
}
