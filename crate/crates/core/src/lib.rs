//! Exact and smoothed solvers for the scalar delay equation
//!
//! ```text
//! x'(t) = a(t) * f(x(t - 1))
//! ```
//!
//! where `a` is a two-level piecewise-constant periodic coefficient and
//! `f(x) = -sign(x)` is negative feedback. Solutions from a positive constant
//! history are piecewise affine and can be computed exactly with an
//! event-driven method of steps ([`exact`]). Over one coefficient period the
//! solution defines an affine return map `h -> m*h + b` whose fixed point
//! generates a stable slowly oscillating periodic orbit ([`return_map`]).
//! The [`smooth`] module integrates the ramp-smoothed equation numerically and
//! checks that the orbit persists, and [`analysis`] runs table checks and
//! parameter sweeps.
//!
//! ```
//! use ddeperiod_core::{map_coefficients, solve_exact, Params};
//!
//! let params = Params::new(1.0, 0.25, 2.5, 1.5).unwrap();
//! let coeffs = map_coefficients(&params).unwrap();
//! assert!((coeffs.h_star - 0.25).abs() < 1e-12);
//!
//! let traj = solve_exact(&params, coeffs.h_star, params.period()).unwrap();
//! assert!((traj.eval(params.period()).unwrap() - coeffs.h_star).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod error;
pub mod exact;
pub mod io;
pub mod model;
pub mod return_map;
pub mod smooth;

pub use analysis::{
    corner_perturbations, sweep, symmetry_check, table1_rows, verify_table, Axis, ParamName,
    SweepCell, SweepReport, SweepSpec, TableReport, TableRow,
};
pub use error::{Error, Result};
pub use exact::{
    is_slowly_oscillating, solve_exact, solve_exact_with, AffineSegment, EventKind, EventQueue,
    ExactOptions, Trajectory,
};
pub use model::{Equation, History, Params, SmoothingConfig};
pub use return_map::{
    check_theorem1, empirical_map, iterate_map, map_coefficients, shape_values, valid_h_interval,
    ConditionReport, Conditions, HInterval, MapCoeffs, MapReport, ShapeValues,
};
pub use smooth::{
    convergence_study, find_fixed_point, integrate, orbit_distance, orbit_distance_from,
    poincare_map, ConvergenceReport, FixedPointResult, IntegratorConfig, Interpolation,
    SampledTrajectory,
};
