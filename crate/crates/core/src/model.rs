//! Problem data: the periodic coefficient `a`, the feedback nonlinearity `f`
//! and the initial history, in both their discontinuous and ramp-smoothed
//! forms.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::return_map::map_coefficients;

/// Coefficient data `(a1, a2, p1, p2)`: `a(t) = a1` on `[0, p1)`, `a2` on
/// `[p1, p1 + p2)`, extended periodically with period `T = p1 + p2`.
///
/// The delay is normalized to 1, so `T > 1` is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    a1: f64,
    a2: f64,
    p1: f64,
    p2: f64,
}

#[derive(Deserialize)]
struct RawParams {
    a1: f64,
    a2: f64,
    p1: f64,
    p2: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.a1, raw.a2, raw.p1, raw.p2)
    }
}

impl Params {
    pub fn new(a1: f64, a2: f64, p1: f64, p2: f64) -> Result<Self> {
        for (name, v) in [("a1", a1), ("a2", a2), ("p1", p1), ("p2", p2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if p1 + p2 <= 1.0 {
            return Err(Error::InvalidParams(format!(
                "period T = p1 + p2 = {} must exceed the delay 1",
                p1 + p2
            )));
        }
        Ok(Params { a1, a2, p1, p2 })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    /// Coefficient period `T = p1 + p2`.
    pub fn period(&self) -> f64 {
        self.p1 + self.p2
    }

    /// Reduces `t` into `[0, T)`.
    pub(crate) fn phase(&self, t: f64) -> f64 {
        let period = self.period();
        let s = t.rem_euclid(period);
        // rem_euclid can round up to exactly T for tiny negative t
        if s >= period {
            0.0
        } else {
            s
        }
    }

    /// Discontinuous coefficient `a0(t)`, left-closed at the jumps.
    pub fn coefficient(&self, t: f64) -> f64 {
        if self.phase(t) < self.p1 {
            self.a1
        } else {
            self.a2
        }
    }
}

/// Half-width `delta` of the affine ramps that replace each jump of `f0` and
/// `a0`. `delta = 0` selects the discontinuous originals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub delta: f64,
}

impl SmoothingConfig {
    pub const EXACT: SmoothingConfig = SmoothingConfig { delta: 0.0 };

    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidSmoothing(format!(
                "delta must be finite and nonnegative, got {delta}"
            )));
        }
        Ok(SmoothingConfig { delta })
    }

    pub fn is_exact(&self) -> bool {
        self.delta == 0.0
    }

    /// Checks that the ramps do not overlap (`2*delta < min(p1, p2)`) and that
    /// the fixed point clears the feedback ramp (`delta < h*`).
    pub fn validate_for(&self, params: &Params) -> Result<()> {
        let delta = self.delta;
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidSmoothing(format!(
                "delta must be finite and nonnegative, got {delta}"
            )));
        }
        if delta == 0.0 {
            return Ok(());
        }
        let min_p = params.p1.min(params.p2);
        if 2.0 * delta >= min_p {
            return Err(Error::InvalidSmoothing(format!(
                "ramps overlap: 2*delta = {} >= min(p1, p2) = {min_p}",
                2.0 * delta
            )));
        }
        let h_star = map_coefficients(params)
            .map_err(|e| Error::InvalidSmoothing(format!("no fixed point to bound delta: {e}")))?
            .h_star;
        if delta >= h_star {
            return Err(Error::InvalidSmoothing(format!(
                "delta = {delta} must be below the fixed point h* = {h_star}"
            )));
        }
        Ok(())
    }
}

/// The right-hand side `a(t) * f(x(t - 1))` for a validated parameter and
/// smoothing pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equation {
    params: Params,
    smoothing: SmoothingConfig,
}

impl Equation {
    pub fn new(params: Params, smoothing: SmoothingConfig) -> Result<Self> {
        smoothing.validate_for(&params)?;
        Ok(Equation { params, smoothing })
    }

    /// The discontinuous equation `a0(t) * f0(x(t - 1))`.
    pub fn exact(params: Params) -> Self {
        Equation {
            params,
            smoothing: SmoothingConfig::EXACT,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn smoothing(&self) -> &SmoothingConfig {
        &self.smoothing
    }

    pub fn delta(&self) -> f64 {
        self.smoothing.delta
    }

    /// `a0(t)` for `delta = 0`, otherwise the continuous ramped `a_delta(t)`.
    ///
    /// Ramps are centred on each jump: rising from `a2` to `a1` across
    /// `[kT - delta, kT + delta]` and falling from `a1` to `a2` across
    /// `[kT + p1 - delta, kT + p1 + delta]`.
    pub fn coefficient(&self, t: f64) -> f64 {
        let Params { a1, a2, p1, .. } = self.params;
        let delta = self.smoothing.delta;
        if delta == 0.0 {
            return self.params.coefficient(t);
        }
        let period = self.params.period();
        let s = self.params.phase(t);
        let rate = (a1 - a2) / (2.0 * delta);
        if s < delta {
            a2 + rate * (s + delta)
        } else if s < p1 - delta {
            a1
        } else if s <= p1 + delta {
            a1 - rate * (s - (p1 - delta))
        } else if s < period - delta {
            a2
        } else {
            a2 + rate * (s - (period - delta))
        }
    }

    /// `f0(x) = -sign(x)` for `delta = 0`, otherwise `f_delta`, which is
    /// `-x / delta` on `[-delta, delta]` and saturates at `-1` / `+1`.
    pub fn feedback(&self, x: f64) -> f64 {
        feedback(self.smoothing.delta, x)
    }

    pub fn rhs(&self, t: f64, delayed: f64) -> f64 {
        self.coefficient(t) * self.feedback(delayed)
    }
}

pub(crate) fn feedback(delta: f64, x: f64) -> f64 {
    if delta == 0.0 {
        if x > 0.0 {
            -1.0
        } else if x < 0.0 {
            1.0
        } else {
            0.0
        }
    } else if x >= delta {
        -1.0
    } else if x <= -delta {
        1.0
    } else {
        -x / delta
    }
}

/// Initial function on `[-1, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl History {
    pub fn function<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        History::Function(Arc::new(f))
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            History::Constant(h) => *h,
            History::Function(f) => f(s),
        }
    }

    /// `phi(0)`, the only value the forward solution depends on when the
    /// history has constant sign.
    pub fn initial_value(&self) -> f64 {
        self.value(0.0)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            History::Constant(_) => 0.0,
            History::Function(f) => {
                let eps = 1e-6;
                let lo = (s - eps).max(-1.0);
                let hi = (s + eps).min(0.0);
                (f(hi) - f(lo)) / (hi - lo)
            }
        }
    }

    /// Sign of the history if it is strictly one-signed on `[-1, 0]`
    /// (checked on a 1001-point grid for general functions).
    pub fn strict_sign(&self) -> Option<f64> {
        match self {
            History::Constant(h) if *h != 0.0 => Some(h.signum()),
            History::Constant(_) => None,
            History::Function(f) => {
                let sign = f(0.0).signum();
                if f(0.0) == 0.0 || f(0.0).is_nan() {
                    return None;
                }
                (0..=1000)
                    .map(|i| f(-1.0 + i as f64 / 1000.0))
                    .all(|v| v * sign > 0.0)
                    .then_some(sign)
            }
        }
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(h) => f.debug_tuple("Constant").field(h).finish(),
            History::Function(_) => f.write_str("Function(..)"),
        }
    }
}
