#![allow(dead_code)]

use ddeperiod_core::{check_theorem1, table1_rows, Params};
use rand::Rng;

pub fn row(i: usize) -> Params {
    table1_rows()[i - 1].params().unwrap()
}

pub fn all_rows() -> Vec<Params> {
    table1_rows().iter().map(|r| r.params().unwrap()).collect()
}

/// Random parameter set satisfying every stability condition.
pub fn random_stable_params<R: Rng>(rng: &mut R) -> Params {
    loop {
        let a1 = rng.random_range(0.5..5.0);
        let a2 = a1 * rng.random_range(0.05..0.95);
        let p1 = rng.random_range(2.05..4.0);
        let p2 = rng.random_range(0.5..5.0);
        let Ok(p) = Params::new(a1, a2, p1, p2) else {
            continue;
        };
        if check_theorem1(&p).overall {
            return p;
        }
    }
}

/// Brute-force solution of x' = a0(t) f0(x(t-1)) on a uniform grid with
/// `per_delay` steps per unit, from constant history `h`. Returns x at grid
/// points `k / per_delay`, k = 0..=horizon*per_delay. Shares no code with
/// the library solvers.
pub fn brute_force(p: &Params, h: f64, horizon: f64, per_delay: usize) -> Vec<f64> {
    let (a1, a2, p1, period) = (p.a1(), p.a2(), p.p1(), p.p1() + p.p2());
    let coef = |t: f64| {
        let s = t - period * (t / period).floor();
        if s < p1 {
            a1
        } else {
            a2
        }
    };
    let sign = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let dt = 1.0 / per_delay as f64;
    let steps = (horizon * per_delay as f64).round() as usize;
    let mut xs = vec![h; per_delay + 1];
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let lag = 0.5 * (xs[k] + xs[k + 1]);
        let x = xs[per_delay + k] - dt * coef(t_mid) * sign(lag);
        xs.push(x);
    }
    xs.split_off(per_delay)
}
