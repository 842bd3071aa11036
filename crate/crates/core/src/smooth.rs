//! Numerical method of steps for the smoothed equation
//! `x'(t) = a_delta(t) * f_delta(x(t - 1))`.
//!
//! The grid step divides the delay, so `x(t_k - 1)` is always a stored node.
//! Each step is classical RK4; since the right-hand side does not depend on
//! the current state this is Simpson's rule on the known delayed forcing.
//! Steps are split at breakpoints of the forcing so that every RK4 stage
//! sees a smooth integrand, which keeps the scheme fourth order with cubic
//! Hermite dense output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::with_jobs;
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::io::write_tx_csv;
use crate::model::{Equation, History, Params, SmoothingConfig};
use crate::return_map::{check_theorem1, map_coefficients};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Residual target for `|P(h) - h|` in [`find_fixed_point`].
pub const FIXED_POINT_TOL: f64 = 1e-9;

pub const DEFAULT_DELTAS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: DEFAULT_STEP,
            interpolation: Interpolation::Cubic,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, interpolation: Interpolation) -> Self {
        IntegratorConfig {
            step,
            interpolation,
        }
    }

    /// Largest admissible step not above `min(1e-3, delta / 4)`.
    pub fn for_delta(delta: f64) -> Self {
        let mut n = (1.0 / DEFAULT_STEP).round();
        if delta > 0.0 {
            n = n.max((4.0 / delta).ceil());
        }
        IntegratorConfig::new(1.0 / n, Interpolation::Cubic)
    }

    /// Number of grid steps per unit delay.
    pub fn steps_per_delay(&self) -> Result<usize> {
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidIntegrator(format!(
                "step must be in (0, 1], got {}",
                self.step
            )));
        }
        let inv = 1.0 / self.step;
        let n = inv.round();
        if (inv - n).abs() > 1e-9 * n {
            return Err(Error::InvalidIntegrator(format!(
                "1/step = {inv} is not an integer"
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self, smoothing: &SmoothingConfig) -> Result<usize> {
        let n = self.steps_per_delay()?;
        let delta = smoothing.delta;
        if delta > 0.0 && self.step > delta / 4.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidIntegrator(format!(
                "step {} does not resolve the ramps: need step <= delta/4 = {}",
                self.step,
                delta / 4.0
            )));
        }
        Ok(n)
    }
}

/// Breakpoints of the right-hand side are carried this many derivative
/// orders forward along the delay before being dropped.
const MAX_BREAK_ORDER: u8 = 5;

/// Breakpoints closer than this to each other or to a grid node are merged.
const BREAK_TOL: f64 = 1e-12;

/// Solution on the uniform grid `t_k = k * step`, `k >= -1/step`, with
/// dense output between nodes.
///
/// Besides the grid, the solution is stored at every breakpoint of the
/// right-hand side (ramp corners of `a_delta`, times where the delayed value
/// enters or leaves the feedback ramp, and their images one delay later) so
/// the interpolant never spans a kink.
#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    per_delay: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Derivative order of the jump at each node; 0 for plain grid nodes.
    orders: Vec<u8>,
    /// Node index of each uniform grid point.
    grid: Vec<usize>,
    interpolation: Interpolation,
    history: History,
    horizon: f64,
}

impl SampledTrajectory {
    pub fn step(&self) -> f64 {
        1.0 / self.per_delay as f64
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Forward grid nodes `(t_k, x_k)` for `t_k` in `[0, last grid point]`.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid[self.per_delay..]
            .iter()
            .map(|&i| (self.times[i], self.values[i]))
    }

    /// Number of stored breakpoint nodes between grid points.
    pub fn breakpoint_count(&self) -> usize {
        self.orders.iter().filter(|&&o| o > 0).count()
    }

    /// Interpolates inside the node range `[lo, hi]`, which must bracket `t`.
    fn interpolate_in(&self, t: f64, lo: usize, hi: usize) -> f64 {
        let mut j = lo;
        while j + 1 < hi && self.times[j + 1] < t {
            j += 1;
        }
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let w = t1 - t0;
        let theta = ((t - t0) / w).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        match self.interpolation {
            Interpolation::Linear => y0 + theta * (y1 - y0),
            Interpolation::Cubic => {
                hermite(y0, y1, self.slopes[j] * w, self.slopes[j + 1] * w, theta)
            }
        }
    }

    fn interpolate(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.history.value(t);
        }
        let n = self.per_delay;
        let g = ((t * n as f64).floor() as usize + n).min(self.grid.len() - 2);
        self.interpolate_in(t, self.grid[g], self.grid[g + 1])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= -1.0 && t <= self.last_time()) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside [-1, {}]",
                self.last_time()
            )));
        }
        Ok(self.interpolate(t))
    }

    /// Sign changes on `t >= 0`, located by linear interpolation between
    /// stored nodes.
    pub fn zero_crossings(&self) -> Vec<f64> {
        let mut zeros = Vec::new();
        let mut last: Option<(f64, f64)> = None;
        for i in self.grid[self.per_delay]..self.times.len() {
            let (t, x) = (self.times[i], self.values[i]);
            if x == 0.0 {
                continue;
            }
            if let Some((t0, x0)) = last {
                if x0.signum() != x.signum() {
                    zeros.push(t0 + (t - t0) * x0 / (x0 - x));
                }
            }
            last = Some((t, x));
        }
        zeros
    }

    /// `(t, x)` every `step` on `[0, horizon]`.
    pub fn samples(&self, step: f64) -> Result<Vec<(f64, f64)>> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample step must be positive, got {step}"
            )));
        }
        let end = self.horizon.min(self.last_time());
        let n = (end / step + 1e-9).floor() as usize;
        let mut out: Vec<_> = (0..=n)
            .map(|k| {
                let t = (k as f64 * step).min(end);
                (t, self.interpolate(t))
            })
            .collect();
        if end - out[out.len() - 1].0 > 1e-12 {
            out.push((end, self.interpolate(end)));
        }
        Ok(out)
    }

    pub fn write_samples_csv<W: std::io::Write>(&self, w: W, step: f64) -> Result<()> {
        write_tx_csv(w, &self.samples(step)?)
    }
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + theta) * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * d1
}

/// Root of `g` on `[lo, hi]` given a strict sign change.
fn bisect_root(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let g_lo = g(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Corners of `a_delta` (jumps of `a0` when `delta = 0`) in `(0, end]`.
fn coefficient_breaks(params: &Params, delta: f64, end: f64) -> Vec<f64> {
    let period = params.period();
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let base = k as f64 * period;
        if base - delta > end {
            break;
        }
        for c in [0.0, params.p1()] {
            for s in [-delta, delta] {
                let t = base + c + s;
                if t > 0.0 && t <= end {
                    out.push(t);
                }
                if delta == 0.0 {
                    break;
                }
            }
        }
        k += 1;
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

struct Stepper<'a> {
    eq: Equation,
    history: &'a History,
    traj: SampledTrajectory,
}

impl Stepper<'_> {
    fn delayed(&self, s: f64, window: (usize, usize)) -> f64 {
        if s <= 0.0 {
            self.history.value(s)
        } else {
            self.traj.interpolate_in(s, window.0, window.1)
        }
    }

    /// Breakpoints in `(t0, t1)` coming from the delayed window
    /// `[t0 - 1, t1 - 1]`: propagated node breaks and ramp crossings.
    fn delayed_breaks(
        &self,
        t0: f64,
        t1: f64,
        window: Option<(usize, usize)>,
        out: &mut Vec<(f64, u8)>,
    ) {
        let delta = self.eq.delta();
        let levels: &[f64] = if delta == 0.0 {
            &[0.0]
        } else {
            &[delta, -delta]
        };
        let crossing_order = if delta == 0.0 { 1 } else { 2 };
        match window {
            None => {
                let (s0, s1) = (t0 - 1.0, (t1 - 1.0).min(0.0));
                for &c in levels {
                    let g = |s: f64| self.history.value(s) - c;
                    if g(s0) * g(s1) < 0.0 {
                        out.push((bisect_root(s0, s1, g) + 1.0, crossing_order));
                    }
                }
            }
            Some((lo, hi)) => {
                let tr = &self.traj;
                for j in lo..hi {
                    if j > lo && tr.orders[j] > 0 && tr.orders[j] < MAX_BREAK_ORDER {
                        out.push((tr.times[j] + 1.0, tr.orders[j] + 1));
                    }
                    for &c in levels {
                        if (tr.values[j] - c) * (tr.values[j + 1] - c) < 0.0 {
                            let g = |s: f64| tr.interpolate_in(s, j, j + 1) - c;
                            let s = bisect_root(tr.times[j], tr.times[j + 1], g);
                            out.push((s + 1.0, crossing_order));
                        }
                    }
                }
            }
        }
    }

    /// Right-hand side at `t`, taken from inside `[u, v]` when the forcing is
    /// discontinuous.
    fn rhs(&self, t: f64, u: f64, v: f64, window: Option<(usize, usize)>) -> f64 {
        let t = if self.eq.delta() == 0.0 {
            let nudge = 1e-9 * (v - u);
            t.clamp(u + nudge, v - nudge)
        } else {
            t
        };
        let w = window.unwrap_or((0, 0));
        self.eq.rhs(t, self.delayed(t - 1.0, w))
    }

    fn push_node(&mut self, t: f64, x: f64, slope: f64, order: u8) {
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.values.push(x);
        tr.slopes.push(slope);
        tr.orders.push(order);
    }
}

/// Integrates the smoothed equation from `history` over `[0, horizon]`.
///
/// `delta = 0` is accepted for cross-checks; the jumps are then treated as
/// breakpoints like the ramp corners.
pub fn integrate(
    params: &Params,
    smoothing: &SmoothingConfig,
    icfg: &IntegratorConfig,
    history: &History,
    horizon: f64,
) -> Result<SampledTrajectory> {
    let eq = Equation::new(*params, *smoothing)?;
    let n = icfg.validate(smoothing)?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let steps = (horizon * n as f64 - 1e-9).ceil() as usize;
    let nf = n as f64;
    let end = steps as f64 / nf;
    let kinks = coefficient_breaks(params, smoothing.delta, end);

    let capacity = n + steps + 1;
    let mut st = Stepper {
        eq,
        history,
        traj: SampledTrajectory {
            per_delay: n,
            times: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            slopes: Vec::with_capacity(capacity),
            orders: Vec::with_capacity(capacity),
            grid: Vec::with_capacity(capacity),
            interpolation: icfg.interpolation,
            history: history.clone(),
            horizon,
        },
    };
    for i in 0..=n {
        let s = (i as f64 - nf) / nf;
        st.push_node(s, history.value(s), history.derivative(s), 0);
        st.traj.grid.push(i);
    }
    // node 0 carries the forward derivative; t <= 0 is served by the history
    st.traj.slopes[n] = st.rhs(0.0, 0.0, 1.0 / nf, None);

    let mut kink = 0;
    let mut breaks: Vec<(f64, u8)> = Vec::new();
    for k in 0..steps {
        let t0 = k as f64 / nf;
        let t1 = (k + 1) as f64 / nf;
        let window = (k >= n).then(|| (st.traj.grid[k], st.traj.grid[k + 1]));

        breaks.clear();
        while kink < kinks.len() && kinks[kink] < t1 {
            let order = if smoothing.delta == 0.0 { 1 } else { 2 };
            breaks.push((kinks[kink], order));
            kink += 1;
        }
        st.delayed_breaks(t0, t1, window, &mut breaks);
        breaks.retain(|&(b, _)| b > t0 + BREAK_TOL && b < t1 - BREAK_TOL);
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));
        breaks.dedup_by(|later, earlier| {
            if later.0 - earlier.0 <= BREAK_TOL {
                earlier.1 = earlier.1.min(later.1);
                true
            } else {
                false
            }
        });
        breaks.push((t1, 0));

        let mut u = t0;
        let mut x = st.traj.values[st.traj.values.len() - 1];
        for &(v, order) in &breaks {
            // RK4 with a state-independent right-hand side
            let mid = 0.5 * (u + v);
            let k1 = st.rhs(u, u, v, window);
            let k2 = st.rhs(mid, u, v, window);
            let k3 = k2;
            let k4 = st.rhs(v, u, v, window);
            x += (v - u) / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            st.push_node(v, x, k4, order);
            u = v;
        }
        let idx = st.traj.times.len() - 1;
        st.traj.grid.push(idx);
    }

    Ok(st.traj)
}

/// `x(T)` from the constant history `h`. Routed to the exact solver when
/// `delta = 0`.
pub fn poincare_map(
    params: &Params,
    smoothing: &SmoothingConfig,
    icfg: &IntegratorConfig,
    h: f64,
) -> Result<f64> {
    let period = params.period();
    if smoothing.is_exact() {
        return solve_exact(params, h, period)?.eval(period);
    }
    integrate(params, smoothing, icfg, &History::Constant(h), period)?.eval(period)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub h_delta: f64,
    /// Central-difference estimate of `P'(h_delta)`.
    pub map_slope: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `P(h) = h` by bisection on `[0.8 h*, 1.2 h*]`.
pub fn find_fixed_point(
    params: &Params,
    smoothing: &SmoothingConfig,
    icfg: &IntegratorConfig,
) -> Result<FixedPointResult> {
    let report = check_theorem1(params);
    if !report.overall {
        return Err(Error::Precondition(format!(
            "stability conditions fail: {:?}",
            report.conditions
        )));
    }
    Equation::new(*params, *smoothing)?;
    if !smoothing.is_exact() {
        icfg.validate(smoothing)?;
    }
    let h_star = map_coefficients(params)?.h_star;
    let g = |h: f64| poincare_map(params, smoothing, icfg, h).map(|p| p - h);

    let r = 0.2 * h_star;
    let (mut lo, mut hi) = (h_star - r, h_star + r);
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if g_lo.signum() == g_hi.signum() && g_lo != 0.0 && g_hi != 0.0 {
        return Err(Error::BracketFailure { lo, hi, g_lo, g_hi });
    }

    let mut iterations = 0;
    let (mut h, mut residual) = if g_lo.abs() < g_hi.abs() {
        (lo, g_lo.abs())
    } else {
        (hi, g_hi.abs())
    };
    let lo_sign = g_lo.signum();
    while residual > FIXED_POINT_TOL && iterations < 200 && hi - lo > f64::EPSILON * h_star {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid)?;
        if g_mid.abs() < residual {
            h = mid;
            residual = g_mid.abs();
        }
        if g_mid == 0.0 {
            break;
        }
        if g_mid.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let eps = 1e-4 * h_star;
    let map_slope = (poincare_map(params, smoothing, icfg, h + eps)?
        - poincare_map(params, smoothing, icfg, h - eps)?)
        / (2.0 * eps);
    Ok(FixedPointResult {
        h_delta: h,
        map_slope,
        iterations,
        residual,
    })
}

/// Sup-distance on the grid over one period between the smoothed orbit from
/// `h_delta` and the exact periodic orbit from `h*`.
pub fn orbit_distance_from(
    params: &Params,
    smoothing: &SmoothingConfig,
    icfg: &IntegratorConfig,
    h_delta: f64,
) -> Result<f64> {
    let period = params.period();
    let h_star = map_coefficients(params)?.h_star;
    let exact = solve_exact(params, h_star, period)?;
    let n = icfg.steps_per_delay()?;
    let nodes = (period * n as f64 + 1e-9).floor() as usize;
    let grid = (0..=nodes).map(|k| k as f64 / n as f64);

    let dist = if smoothing.is_exact() {
        let other = solve_exact(params, h_delta, period)?;
        grid.map(|t| (other.eval(t).unwrap_or(f64::NAN) - exact.eval(t).unwrap_or(f64::NAN)).abs())
            .fold(0.0, f64::max)
    } else {
        let traj = integrate(params, smoothing, icfg, &History::Constant(h_delta), period)?;
        traj.nodes()
            .take_while(|(t, _)| *t <= period)
            .map(|(t, x)| (x - exact.eval(t).unwrap_or(f64::NAN)).abs())
            .fold(0.0, f64::max)
    };
    Ok(dist)
}

pub fn orbit_distance(
    params: &Params,
    smoothing: &SmoothingConfig,
    icfg: &IntegratorConfig,
) -> Result<f64> {
    let fp = find_fixed_point(params, smoothing, icfg)?;
    orbit_distance_from(params, smoothing, icfg, fp.h_delta)
}

/// Per-delta results of the smoothing study, ordered as the input grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub h_star: f64,
    pub delta: Vec<f64>,
    pub step: Vec<f64>,
    pub h_delta: Vec<Option<f64>>,
    pub slope: Vec<Option<f64>>,
    pub residual: Vec<Option<f64>>,
    pub orbit_distance: Vec<Option<f64>>,
    /// Least-squares `K` in `orbit_distance ~ K * delta`.
    #[serde(rename = "fitted_K")]
    pub fitted_k: Option<f64>,
    pub largest_successful_delta: Option<f64>,
    pub errors: Vec<Option<String>>,
}

impl ConvergenceReport {
    pub fn successes(&self) -> usize {
        self.errors.iter().filter(|e| e.is_none()).count()
    }
}

/// Runs [`find_fixed_point`] and the orbit distance for each delta
/// concurrently. `step = None` picks the step of [`IntegratorConfig::for_delta`].
pub fn convergence_study(
    params: &Params,
    deltas: &[f64],
    step: Option<f64>,
    interpolation: Interpolation,
    jobs: usize,
) -> Result<ConvergenceReport> {
    let h_star = map_coefficients(params)?.h_star;
    let run = |delta: f64| -> (f64, Result<(FixedPointResult, f64)>) {
        let step = step.unwrap_or_else(|| IntegratorConfig::for_delta(delta).step);
        let icfg = IntegratorConfig::new(step, interpolation);
        let res = SmoothingConfig::new(delta).and_then(|cfg| {
            let fp = find_fixed_point(params, &cfg, &icfg)?;
            let d = orbit_distance_from(params, &cfg, &icfg, fp.h_delta)?;
            Ok((fp, d))
        });
        (icfg.step, res)
    };
    let results: Vec<_> = with_jobs(jobs, || deltas.par_iter().map(|&d| run(d)).collect())?;

    let mut report = ConvergenceReport {
        h_star,
        delta: deltas.to_vec(),
        step: Vec::new(),
        h_delta: Vec::new(),
        slope: Vec::new(),
        residual: Vec::new(),
        orbit_distance: Vec::new(),
        fitted_k: None,
        largest_successful_delta: None,
        errors: Vec::new(),
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (&delta, (step, res)) in deltas.iter().zip(results) {
        report.step.push(step);
        match res {
            Ok((fp, d)) => {
                report.h_delta.push(Some(fp.h_delta));
                report.slope.push(Some(fp.map_slope));
                report.residual.push(Some(fp.residual));
                report.orbit_distance.push(Some(d));
                report.errors.push(None);
                num += d * delta;
                den += delta * delta;
                report.largest_successful_delta = Some(
                    report
                        .largest_successful_delta
                        .map_or(delta, |m: f64| m.max(delta)),
                );
            }
            Err(e) => {
                report.h_delta.push(None);
                report.slope.push(None);
                report.residual.push(None);
                report.orbit_distance.push(None);
                report.errors.push(Some(e.to_string()));
            }
        }
    }
    if den > 0.0 {
        report.fitted_k = Some(num / den);
    }
    Ok(report)
}
