//! Shared fixtures for the criterion benches.

use ddeperiod_core::{Axis, ParamName, Params, SweepSpec};

/// Parameter set with `h* = 0.25` and period 4.
pub fn row1() -> Params {
    Params::new(1.0, 0.25, 2.5, 1.5).expect("valid parameters")
}

/// Parameter set with a long period, `T = 7.5`.
pub fn row7() -> Params {
    Params::new(3.0, 0.5, 3.0, 4.5).expect("valid parameters")
}

/// A four-axis grid with `n^4` cells around `row1`.
pub fn grid(n: usize) -> SweepSpec {
    let axes = vec![
        Axis::new(ParamName::A1, 0.5, 5.0, n),
        Axis::new(ParamName::A2, 0.1, 2.0, n),
        Axis::new(ParamName::P1, 1.5, 4.0, n),
        Axis::new(ParamName::P2, 0.5, 5.0, n),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .expect("valid axes");
    SweepSpec::new([1.0, 0.25, 2.5, 1.5], axes).expect("distinct axes")
}
