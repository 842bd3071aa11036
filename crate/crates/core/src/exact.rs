//! Exact event-driven solution of `x'(t) = a0(t) * f0(x(t - 1))`.
//!
//! The right-hand side is piecewise constant: `a0` only changes at the
//! coefficient switches `kT` and `kT + p1`, and `f0(x(t - 1))` only changes one
//! delay after a zero of `x`. Between consecutive events the solution is
//! affine, so the trajectory is assembled segment by segment with no
//! discretization error.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_float;
use crate::model::{History, Params};

/// Event times closer than this are treated as the same instant.
pub const COINCIDENT_TOL: f64 = 1e-12;

/// Default cap on the number of queued events.
pub const DEFAULT_MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub x_start: f64,
    pub slope: f64,
}

impl AffineSegment {
    pub fn eval(&self, t: f64) -> f64 {
        self.x_start + self.slope * (t - self.t_start)
    }

    pub fn x_end(&self) -> f64 {
        self.eval(self.t_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    CoefficientSwitch,
    DelayedZero,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time)
    }
}

/// Pending breakpoints of the right-hand side.
#[derive(Debug, Clone)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    horizon: f64,
    pushed: usize,
    cap: usize,
}

impl EventQueue {
    /// Queue preloaded with every coefficient switch `kT`, `kT + p1` in
    /// `[0, horizon]`.
    pub fn new(params: &Params, horizon: f64, cap: usize) -> Result<Self> {
        let mut queue = EventQueue {
            heap: BinaryHeap::new(),
            horizon,
            pushed: 0,
            cap,
        };
        let period = params.period();
        let mut k = 0u64;
        loop {
            let start = k as f64 * period;
            if start > horizon {
                break;
            }
            queue.push(start, EventKind::CoefficientSwitch)?;
            let mid = start + params.p1();
            if mid <= horizon {
                queue.push(mid, EventKind::CoefficientSwitch)?;
            }
            k += 1;
        }
        Ok(queue)
    }

    fn push(&mut self, time: f64, kind: EventKind) -> Result<()> {
        self.pushed += 1;
        if self.pushed > self.cap {
            return Err(Error::Runaway { cap: self.cap });
        }
        self.heap.push(Reverse(Event { time, kind }));
        Ok(())
    }

    /// Enqueues the feedback switch one delay after the zero `z`, if it falls
    /// within the horizon.
    pub fn push_delayed_zero(&mut self, z: f64) -> Result<bool> {
        let time = z + 1.0;
        if time > self.horizon {
            return Ok(false);
        }
        self.push(time, EventKind::DelayedZero)?;
        Ok(true)
    }

    /// Earliest pending event strictly after `t` (beyond the coincidence
    /// tolerance). Stale events are discarded.
    pub fn next_after(&mut self, t: f64) -> Option<(f64, EventKind)> {
        while let Some(Reverse(ev)) = self.heap.peek() {
            if ev.time <= t + COINCIDENT_TOL {
                self.heap.pop();
            } else {
                return Some((ev.time, ev.kind));
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Pending events in time order.
    pub fn snapshot(&self) -> Vec<(f64, EventKind)> {
        let mut v: Vec<_> = self
            .heap
            .iter()
            .map(|Reverse(e)| (e.time, e.kind))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub max_events: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

/// A continuous piecewise-affine solution on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    segments: Vec<AffineSegment>,
    initial: f64,
    horizon: f64,
    zeros: Vec<f64>,
}

impl Trajectory {
    pub fn segments(&self) -> &[AffineSegment] {
        &self.segments
    }

    /// The history value `phi(0) = h` the trajectory was started from.
    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(eval_segments(&self.segments, t))
    }

    /// Sign changes of the trajectory in increasing order. Points where the
    /// solution touches zero without changing sign are excluded.
    pub fn zero_crossings(&self) -> &[f64] {
        &self.zeros
    }

    /// Samples `(t, x)` at `t = k * step`, plus the horizon if it is off-grid.
    pub fn samples(&self, step: f64) -> Result<Vec<(f64, f64)>> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample step must be positive, got {step}"
            )));
        }
        let n = (self.horizon / step + 1e-9).floor() as usize;
        let mut out: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let t = (k as f64 * step).min(self.horizon);
                (t, eval_segments(&self.segments, t))
            })
            .collect();
        if let Some(&(last, _)) = out.last() {
            if self.horizon - last > COINCIDENT_TOL {
                out.push((self.horizon, eval_segments(&self.segments, self.horizon)));
            }
        }
        Ok(out)
    }

    /// Writes `t_start,t_end,x_start,slope` rows.
    pub fn write_segments_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_start", "t_end", "x_start", "slope"])?;
        for s in &self.segments {
            wtr.write_record([
                fmt_float(s.t_start),
                fmt_float(s.t_end),
                fmt_float(s.x_start),
                fmt_float(s.slope),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `t,x` rows sampled every `step`.
    pub fn write_samples_csv<W: Write>(&self, w: W, step: f64) -> Result<()> {
        crate::io::write_tx_csv(w, &self.samples(step)?)
    }
}

fn eval_segments(segments: &[AffineSegment], t: f64) -> f64 {
    let idx = segments
        .partition_point(|s| s.t_end < t)
        .min(segments.len() - 1);
    segments[idx].eval(t)
}

fn crossings(segments: &[AffineSegment]) -> Vec<f64> {
    let mut zeros = Vec::new();
    let mut last_sign = 0.0;
    // time at which the solution landed exactly on zero, awaiting a sign
    let mut landed: Option<f64> = None;
    for s in segments {
        let (xs, xe) = (s.x_start, s.x_end());
        if xs != 0.0 {
            last_sign = xs.signum();
        }
        if xe == 0.0 {
            if xs != 0.0 {
                landed = Some(s.t_end);
            }
            continue;
        }
        if xs != 0.0 && xe.signum() != xs.signum() {
            zeros.push((s.t_start - xs / s.slope).clamp(s.t_start, s.t_end));
        } else if xs == 0.0 {
            if let Some(z) = landed.take() {
                if last_sign != 0.0 && xe.signum() != last_sign {
                    zeros.push(z);
                }
            }
        }
        last_sign = xe.signum();
    }
    zeros
}

/// Exact solution from the constant history `phi = h` on `[0, horizon]`.
pub fn solve_exact(params: &Params, h: f64, horizon: f64) -> Result<Trajectory> {
    solve_exact_with(
        params,
        &History::Constant(h),
        horizon,
        &ExactOptions::default(),
    )
}

/// Exact solution from a one-signed history.
///
/// A history that is strictly positive (or strictly negative) on `[-1, 0]`
/// is replaced by the constant `phi(0)`: the forward solution only depends on
/// that value. Histories that change sign are rejected.
pub fn solve_exact_with(
    params: &Params,
    history: &History,
    horizon: f64,
    opts: &ExactOptions,
) -> Result<Trajectory> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let h = history.initial_value();
    if !h.is_finite() || h == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "initial value h must be nonzero and finite, got {h}"
        )));
    }
    if history.strict_sign().is_none() {
        return Err(Error::InvalidArgument(
            "history must not change sign on [-1, 0]".into(),
        ));
    }

    let mut queue = EventQueue::new(params, horizon, opts.max_events)?;
    let mut segments: Vec<AffineSegment> = Vec::new();
    let mut t = 0.0;
    let mut x = h;

    while t < horizon {
        let mut end = queue
            .next_after(t)
            .map_or(horizon, |(time, _)| time.min(horizon));
        if horizon - end <= COINCIDENT_TOL {
            end = horizon;
        }

        // f0(x(s - 1)) is constant for s in (t, end); probe it just after t - 1.
        let probe = t - 1.0 + 0.5 * (end - t).min(1.0);
        let delayed = if probe < 0.0 {
            h
        } else {
            eval_segments(&segments, probe)
        };
        if delayed == 0.0 {
            return Err(Error::ZeroSlope { t });
        }
        let slope = -delayed.signum() * params.coefficient(0.5 * (t + end));

        let mut seg = AffineSegment {
            t_start: t,
            t_end: end,
            x_start: x,
            slope,
        };
        let x_end = seg.x_end();
        if x != 0.0 && (x_end == 0.0 || x_end.signum() != x.signum()) {
            let z = (t - x / slope).clamp(t, end);
            if z + 1.0 < end - COINCIDENT_TOL {
                // the zero flips the feedback before the next queued event
                seg.t_end = z + 1.0;
            } else if z + 1.0 > end + COINCIDENT_TOL {
                queue.push_delayed_zero(z)?;
            }
        }
        t = seg.t_end;
        x = seg.x_end();
        segments.push(seg);
    }

    let zeros = crossings(&segments);
    Ok(Trajectory {
        segments,
        initial: h,
        horizon,
        zeros,
    })
}

/// True iff every gap between consecutive zeros exceeds `delay`.
pub fn is_slowly_oscillating(zeros: &[f64], delay: f64) -> bool {
    zeros.windows(2).all(|w| w[1] - w[0] > delay)
}
