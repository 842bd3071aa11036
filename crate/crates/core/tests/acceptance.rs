//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ddeperiod_core::{
    check_theorem1, convergence_study, empirical_map, solve_exact, table1_rows, valid_h_interval,
    verify_table, ConvergenceReport, Interpolation, Params, TableRow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The published table, typed in independently of the library copy:
/// (a1, a2, p1, p2, h*, T). Rows 2 and 3 are exact fractions.
const TABLE: [(f64, f64, f64, f64, f64, f64); 9] = [
    (1.0, 0.25, 2.5, 1.5, 0.25, 4.0),
    (2.0, 0.5, 2.5, 2.0, 1.0 / 3.0, 4.5),
    (2.0, 0.25, 2.5, 1.0, 4.0 / 7.0, 3.5),
    (1.0, 0.5, 3.0, 1.0, 0.5, 4.0),
    (2.0, 1.0, 3.0, 1.5, 0.5, 4.5),
    (2.5, 0.5, 3.0, 4.0, 0.31, 7.0),
    (3.0, 0.5, 3.0, 4.5, 0.45, 7.5),
    (5.0, 0.5, 3.0, 3.0, 1.94, 6.0),
    (5.0, 1.0, 3.0, 2.0, 1.88, 5.0),
];

const SMOOTH_DELTAS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

/// Return-map slope and intercept from the printed formulas.
fn oracle_mb(a1: f64, a2: f64, p1: f64, p2: f64) -> (f64, f64) {
    let m = 2.0 * a2 / a1 - 1.0;
    let b = a1 * (p1 - 2.0) + a2 * (6.0 - 2.0 * p1 - p2);
    (m, b)
}

/// Fixed point from the closed form `a1 [a1(p1-2) + a2(6-(2p1+p2))] / (2(a1-a2))`.
fn oracle_h_star(a1: f64, a2: f64, p1: f64, p2: f64) -> f64 {
    a1 * (a1 * (p1 - 2.0) + a2 * (6.0 - (2.0 * p1 + p2))) / (2.0 * (a1 - a2))
}

fn table_params() -> Vec<(Params, f64)> {
    TABLE
        .iter()
        .map(|&(a1, a2, p1, p2, _, _)| {
            (
                Params::new(a1, a2, p1, p2).unwrap(),
                oracle_h_star(a1, a2, p1, p2),
            )
        })
        .collect()
}

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn run<F>(id: &'static str, title: &'static str, limit: Duration, f: F) -> Outcome
where
    F: FnOnce() -> (bool, String),
{
    let start = Instant::now();
    let res = panic::catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (ok, mut detail) = res.unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    let in_time = elapsed <= limit;
    detail.push_str(&format!(
        "; runtime {:.3}s (limit {}s)",
        elapsed.as_secs_f64(),
        limit.as_secs()
    ));
    Outcome {
        id,
        title,
        pass: ok && in_time,
        detail,
    }
}

fn criterion1() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, &(a1, a2, p1, p2, expected, period)) in TABLE.iter().enumerate() {
        let p = Params::new(a1, a2, p1, p2).unwrap();
        let h = ddeperiod_core::map_coefficients(&p).unwrap().h_star;
        let tol = if i == 1 || i == 2 { 1e-12 } else { 0.005 };
        let err = (h - expected).abs();
        worst = worst.max(err);
        if err > tol || (p.period() - period).abs() > 1e-12 {
            failures.push(format!("row {}: h*={h} vs {expected}", i + 1));
        }
    }
    let ok = failures.is_empty();
    (ok, format!("max |h* - table| = {worst:.3e} {failures:?}"))
}

fn criterion2() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, (p, h)) in table_params().into_iter().enumerate() {
        let period = p.period();
        let traj = solve_exact(&p, h, 10.0 * period).unwrap();
        for k in 1..=10 {
            let t = (k as f64 * period).min(traj.horizon());
            let err = (traj.eval(t).unwrap() - h).abs();
            worst = worst.max(err);
            if err > 1e-10 {
                failures.push(format!("row {} k={k}: {err:e}", i + 1));
            }
        }
        // consecutive gaps alternate between 2 and T - 2
        let zeros = traj.zero_crossings();
        for (j, w) in zeros.windows(2).enumerate() {
            let gap = w[1] - w[0];
            let want = if j % 2 == 0 { 2.0 } else { period - 2.0 };
            if (gap - want).abs() > 1e-9 || gap <= 1.0 {
                failures.push(format!("row {} gap {gap} at {}", i + 1, w[0]));
            }
        }
        if zeros.len() < 20 {
            failures.push(format!("row {}: only {} zeros", i + 1, zeros.len()));
        }
    }
    let ok = failures.is_empty();
    (ok, format!("max |x(kT) - h*| = {worst:.3e} {failures:?}"))
}

fn criterion3() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    while samples < 200 {
        let a1 = rng.random_range(0.2..6.0);
        let a2 = rng.random_range(0.05..6.0);
        let p1 = rng.random_range(1.5..5.0);
        let p2 = rng.random_range(0.5..6.0);
        let Ok(p) = Params::new(a1, a2, p1, p2) else {
            continue;
        };
        if !check_theorem1(&p).overall {
            continue;
        }
        let Some(iv) = valid_h_interval(&p) else {
            return (false, format!("no valid interval for {p:?}"));
        };
        let h = iv.point_at(rng.random_range(0.0..=1.0));
        let (m, b) = oracle_mb(a1, a2, p1, p2);
        let err = (empirical_map(&p, h).unwrap() - (m * h + b)).abs();
        worst = worst.max(err);
        samples += 1;
    }
    (
        worst <= 1e-9,
        format!("{samples} samples, max error {worst:.3e}"),
    )
}

fn criterion4() -> (bool, String) {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, ((p, h), row)) in table_params().into_iter().zip(TABLE).enumerate() {
        let (m, _) = oracle_mb(row.0, row.1, row.2, row.3);
        let period = p.period();
        let traj = solve_exact(&p, 1.2 * h, 5.0 * period).unwrap();
        let mut prev = (1.2 * h - h).abs();
        for k in 1..=5 {
            let t = (k as f64 * period).min(traj.horizon());
            let err = (traj.eval(t).unwrap() - h).abs();
            if m == 0.0 {
                // one period lands exactly on h*, so the ratio is undefined
                if err > 1e-12 {
                    failures.push(format!("row {} k={k}: err {err:e} with m = 0", i + 1));
                }
            } else {
                let ratio = err / prev;
                let rel = (ratio - m.abs()).abs() / m.abs();
                worst = worst.max(rel);
                if rel > 0.1 {
                    failures.push(format!(
                        "row {} k={k}: ratio {ratio} vs |m| {}",
                        i + 1,
                        m.abs()
                    ));
                }
            }
            prev = err;
        }
    }
    let ok = failures.is_empty();
    (
        ok,
        format!("max relative ratio error {worst:.3e} {failures:?}"),
    )
}

fn criterion5() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for (p, h) in table_params() {
        let horizon = 2.0 * p.period();
        let up = solve_exact(&p, h, horizon).unwrap();
        let down = solve_exact(&p, -h, horizon).unwrap();
        for i in 0..1000 {
            let t = (horizon * i as f64 / 999.0).min(horizon);
            worst = worst.max((up.eval(t).unwrap() + down.eval(t).unwrap()).abs());
        }
    }
    (worst <= 1e-10, format!("max |x_h + x_-h| = {worst:.3e}"))
}

fn criterion6a(r: &ConvergenceReport) -> (bool, String) {
    let residuals: Vec<Option<f64>> = r.residual.clone();
    let steps_ok = r
        .step
        .iter()
        .zip(&r.delta)
        .all(|(s, d)| *s <= d / 4.0 && *s <= 1e-3);
    let ok = steps_ok
        && r.errors.iter().all(Option::is_none)
        && residuals.iter().all(|x| x.is_some_and(|x| x <= 1e-9));
    (ok, format!("residuals {residuals:?}, steps {:?}", r.step))
}

fn criterion6b(r: &ConvergenceReport) -> (bool, String) {
    let errs: Vec<f64> = r
        .h_delta
        .iter()
        .map(|h| h.map_or(f64::INFINITY, |h| (h - r.h_star).abs()))
        .collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last_delta = *r.delta.last().unwrap();
    let last = *errs.last().unwrap();
    let small = last <= 0.1 * last_delta;
    (
        monotone && small,
        format!(
            "|h_delta - h*| = {errs:?}; non-increasing {monotone}; at delta {last_delta}: {last:.6} vs bound {:.6}",
            0.1 * last_delta
        ),
    )
}

fn criterion6c(r: &ConvergenceReport) -> (bool, String) {
    let ok = r.slope.iter().all(|s| s.is_some_and(|s| s.abs() < 1.0));
    (ok, format!("slopes {:?}", r.slope))
}

fn criterion6d(r: &ConvergenceReport) -> (bool, String) {
    let d: Vec<f64> = r
        .orbit_distance
        .iter()
        .map(|x| x.unwrap_or(f64::INFINITY))
        .collect();
    let ok = d.iter().all(|x| x.is_finite()) && d.windows(2).all(|w| w[1] <= w[0]);
    (
        ok,
        format!("orbit distances {d:?}, fitted K {:?}", r.fitted_k),
    )
}

fn criterion7() -> (bool, String) {
    let mut failures = Vec::new();
    let r = 0.01;
    for (i, &(a1, a2, p1, p2, _, _)) in TABLE.iter().enumerate() {
        let base = [a1, a2, p1, p2];
        for axis in 0..4 {
            for sign in [-1.0, 1.0] {
                let mut v = base;
                v[axis] += sign * r;
                let p = Params::new(v[0], v[1], v[2], v[3]).unwrap();
                if !check_theorem1(&p).overall {
                    failures.push(format!("row {} {v:?}", i + 1));
                }
            }
        }
    }
    let ok = failures.is_empty();
    (ok, format!("72 corners checked, failures {failures:?}"))
}

fn criterion8() -> (bool, String) {
    let short = check_theorem1(&Params::new(1.0, 0.25, 1.5, 2.5).unwrap());
    let at_two = check_theorem1(&Params::new(1.0, 0.25, 2.0, 1.5).unwrap());
    let reversed = check_theorem1(&Params::new(1.0, 2.0, 2.5, 1.5).unwrap());
    let equal = check_theorem1(&Params::new(1.0, 1.0, 2.5, 1.5).unwrap());
    let mut rows: Vec<TableRow> = table1_rows();
    rows[0].h_star_expected += 0.05;
    let report = verify_table(&rows);
    let flagged = !report.all_pass
        && !report.rows[0].pass
        && report.rows[0]
            .h_star_delta
            .is_some_and(|d| (d - 0.05).abs() < 1e-12)
        && report.rows[1..].iter().all(|r| r.pass);
    let ok = !short.conditions.p1_gt_2
        && !short.overall
        && !at_two.conditions.p1_gt_2
        && !reversed.conditions.contraction
        && !reversed.overall
        && !equal.conditions.contraction
        && flagged;
    (
        ok,
        format!(
            "p1<=2 rejected {}, a2>=a1 rejected {}, tampered row flagged {flagged}",
            !short.conditions.p1_gt_2 && !at_two.conditions.p1_gt_2,
            !reversed.conditions.contraction && !equal.conditions.contraction
        ),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut outcomes = vec![
        run("1", "table reproduction", secs(1), criterion1),
        run("2", "periodicity and slow oscillation", secs(1), criterion2),
        run("3", "return-map oracle equivalence", secs(5), criterion3),
        run("4", "stability realized dynamically", secs(2), criterion4),
        run("5", "symmetry", secs(1), criterion5),
    ];

    // the four smoothing checks share one study, timed once
    let start = Instant::now();
    let params = Params::new(1.0, 0.25, 2.5, 1.5).unwrap();
    let study = convergence_study(&params, &SMOOTH_DELTAS, None, Interpolation::Cubic, 0);
    let study_time = start.elapsed();
    let limit = secs(30).saturating_sub(study_time);
    type Check = fn(&ConvergenceReport) -> (bool, String);
    let smooth: [(&str, &str, Check); 4] = [
        ("6a", "smoothed fixed point found", criterion6a),
        ("6b", "smoothed fixed point converges to h*", criterion6b),
        ("6c", "smoothed map contracts", criterion6c),
        ("6d", "orbit distance non-increasing", criterion6d),
    ];
    for (id, title, check) in smooth {
        let mut o = match &study {
            Ok(r) => run(id, title, limit, || check(r)),
            Err(e) => Outcome {
                id,
                title,
                pass: false,
                detail: format!("study failed: {e}"),
            },
        };
        o.detail
            .push_str(&format!(" + shared study {:.3}s", study_time.as_secs_f64()));
        outcomes.push(o);
    }

    outcomes.push(run("7", "openness probe", secs(1), criterion7));
    outcomes.push(run("8", "negative controls", secs(1), criterion8));

    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {} ({}): {}", o.id, o.title, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
