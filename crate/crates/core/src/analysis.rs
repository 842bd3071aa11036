//! Batch studies: table verification, parameter sweeps, the symmetry check
//! and openness probes around known-good parameter sets.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::io::fmt_float;
use crate::model::Params;
use crate::return_map::{
    check_theorem1, empirical_map, map_coefficients, valid_h_interval, Conditions,
};

/// Runs `f` on a rayon pool with `jobs` threads (`0` = rayon's default).
pub fn with_jobs<T, F>(jobs: usize, f: F) -> Result<T>
where
    F: FnOnce() -> T + Send,
    T: Send,
{
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub a1: f64,
    pub a2: f64,
    pub p1: f64,
    pub p2: f64,
    pub h_star_expected: f64,
    pub t_expected: f64,
    /// The expected fixed point is an exact fraction rather than a two-decimal
    /// rounding.
    pub exact: bool,
}

impl TableRow {
    const fn new(a1: f64, a2: f64, p1: f64, p2: f64, h: f64, t: f64, exact: bool) -> Self {
        TableRow {
            a1,
            a2,
            p1,
            p2,
            h_star_expected: h,
            t_expected: t,
            exact,
        }
    }

    pub fn params(&self) -> Result<Params> {
        Params::new(self.a1, self.a2, self.p1, self.p2)
    }
}

/// Published parameter sets with stable periodic orbits.
pub fn table1_rows() -> Vec<TableRow> {
    vec![
        TableRow::new(1.0, 0.25, 2.5, 1.5, 0.25, 4.0, false),
        TableRow::new(2.0, 0.5, 2.5, 2.0, 1.0 / 3.0, 4.5, true),
        TableRow::new(2.0, 0.25, 2.5, 1.0, 4.0 / 7.0, 3.5, true),
        TableRow::new(1.0, 0.5, 3.0, 1.0, 0.5, 4.0, false),
        TableRow::new(2.0, 1.0, 3.0, 1.5, 0.5, 4.5, false),
        TableRow::new(2.5, 0.5, 3.0, 4.0, 0.31, 7.0, false),
        TableRow::new(3.0, 0.5, 3.0, 4.5, 0.45, 7.5, false),
        TableRow::new(5.0, 0.5, 3.0, 3.0, 1.94, 6.0, false),
        TableRow::new(5.0, 1.0, 3.0, 2.0, 1.88, 5.0, false),
    ]
}

/// Tolerance for two-decimal table entries.
pub const ROUNDED_TOL: f64 = 0.005;
/// Tolerance for entries given as exact fractions.
pub const EXACT_TOL: f64 = 1e-12;
/// Allowed `|x(T) - h*|` for the exact orbit from `h*`.
pub const RETURN_TOL: f64 = 1e-10;

fn parse_number(field: &str) -> Result<(f64, bool)> {
    let field = field.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse number '{field}'"));
    match field.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            Ok((num / den, true))
        }
        None => Ok((field.parse().map_err(|_| bad())?, false)),
    }
}

/// Reads rows from CSV with header `a1,a2,p1,p2,h_star,T`. The `h_star`
/// column accepts fractions such as `1/3`, which mark the row as exact.
pub fn read_table_rows<R: Read>(r: R) -> Result<Vec<TableRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::InvalidArgument(format!("rows file lacks column '{name}'")))
    };
    let idx = [
        col("a1")?,
        col("a2")?,
        col("p1")?,
        col("p2")?,
        col("h_star")?,
        col("T")?,
    ];
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| parse_number(rec.get(idx[i]).unwrap_or(""));
        let (h, exact) = get(4)?;
        rows.push(TableRow::new(
            get(0)?.0,
            get(1)?.0,
            get(2)?.0,
            get(3)?.0,
            h,
            get(5)?.0,
            exact,
        ));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct RowVerdict {
    pub row: usize,
    pub a1: f64,
    pub a2: f64,
    pub p1: f64,
    pub p2: f64,
    pub h_star_expected: f64,
    pub h_star_computed: Option<f64>,
    pub h_star_delta: Option<f64>,
    pub h_star_tolerance: f64,
    pub conditions: Option<Conditions>,
    pub theorem1: bool,
    /// `|x(T) - h*|` of the exact solution from `h*`.
    pub return_error: Option<f64>,
    pub period: f64,
    pub period_ok: bool,
    pub pass: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub all_pass: bool,
    pub rows: Vec<RowVerdict>,
}

fn verify_row(row_no: usize, row: &TableRow) -> RowVerdict {
    let tolerance = if row.exact { EXACT_TOL } else { ROUNDED_TOL };
    let mut v = RowVerdict {
        row: row_no,
        a1: row.a1,
        a2: row.a2,
        p1: row.p1,
        p2: row.p2,
        h_star_expected: row.h_star_expected,
        h_star_computed: None,
        h_star_delta: None,
        h_star_tolerance: tolerance,
        conditions: None,
        theorem1: false,
        return_error: None,
        period: row.p1 + row.p2,
        period_ok: (row.t_expected - (row.p1 + row.p2)).abs() <= EXACT_TOL,
        pass: false,
        failures: Vec::new(),
    };
    if !v.period_ok {
        v.failures.push(format!(
            "period {} != p1 + p2 = {}",
            row.t_expected,
            row.p1 + row.p2
        ));
    }
    let params = match row.params() {
        Ok(p) => p,
        Err(e) => {
            v.failures.push(e.to_string());
            return v;
        }
    };
    let report = check_theorem1(&params);
    v.conditions = Some(report.conditions);
    v.theorem1 = report.overall;
    if !report.overall {
        v.failures.push(format!(
            "stability conditions fail: {:?}",
            report.conditions
        ));
    }
    match map_coefficients(&params) {
        Ok(c) => {
            let delta = (c.h_star - row.h_star_expected).abs();
            v.h_star_computed = Some(c.h_star);
            v.h_star_delta = Some(delta);
            if delta > tolerance {
                v.failures.push(format!(
                    "h* = {} differs from expected {} by {delta:e} > {tolerance:e}",
                    c.h_star, row.h_star_expected
                ));
            }
            let period = params.period();
            match solve_exact(&params, c.h_star, period).and_then(|t| t.eval(period)) {
                Ok(x_t) => {
                    let err = (x_t - c.h_star).abs();
                    v.return_error = Some(err);
                    if err > RETURN_TOL {
                        v.failures
                            .push(format!("x(T) - h* = {err:e} exceeds {RETURN_TOL:e}"));
                    }
                }
                Err(e) => v.failures.push(e.to_string()),
            }
        }
        Err(e) => v.failures.push(e.to_string()),
    }
    v.pass = v.failures.is_empty();
    v
}

/// Checks every row; failures are reported per row rather than as errors.
pub fn verify_table(rows: &[TableRow]) -> TableReport {
    let rows: Vec<_> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| verify_row(i + 1, r))
        .collect();
    TableReport {
        all_pass: !rows.is_empty() && rows.iter().all(|r| r.pass),
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    A1,
    A2,
    P1,
    P2,
}

impl ParamName {
    pub const ALL: [ParamName; 4] = [ParamName::A1, ParamName::A2, ParamName::P1, ParamName::P2];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamName::A1 => "a1",
            ParamName::A2 => "a2",
            ParamName::P1 => "p1",
            ParamName::P2 => "p2",
        })
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a1" => Ok(ParamName::A1),
            "a2" => Ok(ParamName::A2),
            "p1" => Ok(ParamName::P1),
            "p2" => Ok(ParamName::P2),
            other => Err(Error::InvalidArgument(format!(
                "unknown parameter '{other}' (expected a1, a2, p1 or p2)"
            ))),
        }
    }
}

/// `count` evenly spaced values of one parameter from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub param: ParamName,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(param: ParamName, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "axis {param}: bounds must be positive and finite, got {lo}:{hi}"
            )));
        }
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "axis {param}: lo = {lo} exceeds hi = {hi}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidArgument(format!(
                "axis {param}: count must be >= 1"
            )));
        }
        Ok(Axis {
            param,
            lo,
            hi,
            count,
        })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `name=lo:hi:count`, e.g. `a1=0.5:5:10`.
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidArgument(format!("malformed axis '{s}', expected name=lo:hi:count"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(bad());
        };
        Axis::new(
            name.parse()?,
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            count.trim().parse().map_err(|_| bad())?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    /// Values of `(a1, a2, p1, p2)` for parameters without an axis.
    pub base: [f64; 4],
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn new(base: [f64; 4], axes: Vec<Axis>) -> Result<Self> {
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.param == a.param) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate axis {}",
                    a.param
                )));
            }
        }
        Ok(SweepSpec { base, axes })
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Parameter values of cell `index`; the first axis varies slowest.
    pub fn cell_values(&self, mut index: usize) -> [f64; 4] {
        let mut v = self.base;
        for axis in self.axes.iter().rev() {
            v[axis.param.index()] = axis.value(index % axis.count);
            index /= axis.count;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub index: usize,
    pub a1: f64,
    pub a2: f64,
    pub p1: f64,
    pub p2: f64,
    /// Parameters pass basic validation (positive, `T > 1`).
    pub valid: bool,
    pub overall: bool,
    pub m: Option<f64>,
    pub b: Option<f64>,
    /// Present only where the map is non-degenerate and all conditions hold.
    pub h_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub base: [f64; 4],
    pub axes: Vec<Axis>,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn passing(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(|c| c.overall)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "index", "a1", "a2", "p1", "p2", "valid", "overall", "m", "b", "h_star",
        ])?;
        for c in &self.cells {
            wtr.write_record([
                c.index.to_string(),
                fmt_float(c.a1),
                fmt_float(c.a2),
                fmt_float(c.p1),
                fmt_float(c.p2),
                c.valid.to_string(),
                c.overall.to_string(),
                opt(c.m),
                opt(c.b),
                opt(c.h_star),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn classify(index: usize, v: [f64; 4]) -> SweepCell {
    let mut cell = SweepCell {
        index,
        a1: v[0],
        a2: v[1],
        p1: v[2],
        p2: v[3],
        valid: false,
        overall: false,
        m: None,
        b: None,
        h_star: None,
    };
    let Ok(params) = Params::new(v[0], v[1], v[2], v[3]) else {
        return cell;
    };
    cell.valid = true;
    cell.m = Some(2.0 * v[1] / v[0] - 1.0);
    cell.b = Some(v[0] * (v[2] - 2.0) + v[1] * (6.0 - (2.0 * v[2] + v[3])));
    let report = check_theorem1(&params);
    cell.overall = report.overall;
    if report.overall {
        cell.h_star = report.h_star;
    }
    cell
}

/// Classifies every grid cell. Cells are evaluated concurrently and returned
/// in index order.
pub fn sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepReport> {
    let cells = with_jobs(jobs, || {
        (0..spec.cell_count())
            .into_par_iter()
            .map(|i| classify(i, spec.cell_values(i)))
            .collect()
    })?;
    Ok(SweepReport {
        base: spec.base,
        axes: spec.axes.clone(),
        cells,
    })
}

/// Largest `|empirical_map(h) - (m*h + b)|` over `samples` randomly chosen
/// passing cells, each at a random `h` in its valid interval.
pub fn region_consistency(report: &SweepReport, samples: usize, seed: u64) -> Result<f64> {
    let passing: Vec<&SweepCell> = report.passing().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    if passing.is_empty() {
        return Ok(worst);
    }
    for _ in 0..samples {
        let cell = passing[rng.random_range(0..passing.len())];
        let params = Params::new(cell.a1, cell.a2, cell.p1, cell.p2)?;
        let Some(interval) = valid_h_interval(&params) else {
            continue;
        };
        let h = interval.point_at(rng.random_range(0.0..1.0));
        let c = map_coefficients(&params)?;
        worst = worst.max((empirical_map(&params, h)? - c.apply(h)).abs());
    }
    Ok(worst)
}

/// Compares the orbits from `h*` and `-h*` at 1000 points of `[0, 2T]`.
pub fn symmetry_check(params: &Params) -> Result<bool> {
    let h_star = map_coefficients(params)?.h_star;
    let horizon = 2.0 * params.period();
    let pos = solve_exact(params, h_star, horizon)?;
    let neg = solve_exact(params, -h_star, horizon)?;
    for k in 0..1000 {
        let t = (horizon * k as f64 / 999.0).min(horizon);
        if (pos.eval(t)? + neg.eval(t)?).abs() > 1e-10 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The 8 points at distance `radius` along each parameter axis (the vertices
/// of the L1 ball around `params`).
pub fn corner_perturbations(params: &Params, radius: f64) -> Result<Vec<Params>> {
    let base = [params.a1(), params.a2(), params.p1(), params.p2()];
    let mut out = Vec::with_capacity(8);
    for i in 0..4 {
        for sign in [1.0, -1.0] {
            let mut v = base;
            v[i] += sign * radius;
            out.push(Params::new(v[0], v[1], v[2], v[3])?);
        }
    }
    Ok(out)
}
