use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::controllers::{bang_bang_1d, memoryless_binary};
use crate::dynamics::{LinearSystem, PlantState};
use crate::linopt::ReachableSet;
use crate::minjerk::{initial_jerk, nsctp_fixed_t, separating_time, AxisState};
use crate::{Error, Result};

/// Two states that agree on every observable but need opposite optimal controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub s1: f64,
    pub s2: f64,
    /// Shared task, the midpoint of the two states.
    pub x_star: f64,
    pub u1: f64,
    pub u2: f64,
    /// True iff the time-optimal controls at `s1` and `s2` differ.
    ///
    /// Any controller fed the same delayed observation and memory in both
    /// trials emits the same control, so it is wrong in one of them unless
    /// it reconstructs the current state.
    pub controls_differ: bool,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::usage(format!("{name} must lie in [-1, 1], got {v}")))
    }
}

/// Builds the shared task `(s1 + s2) / 2` on `x' = −x + u` and evaluates the
/// time-optimal control `sgn(x* − s)` at both states.
pub fn necessity_counterexample(s1: f64, s2: f64) -> Result<CounterexampleReport> {
    check_unit("s1", s1)?;
    check_unit("s2", s2)?;
    if s1 == s2 {
        return Err(Error::usage("the two states must differ"));
    }
    let x_star = 0.5 * (s1 + s2);
    let (u1, u2) = (bang_bang_1d(x_star, s1), bang_bang_1d(x_star, s2));
    Ok(CounterexampleReport {
        s1,
        s2,
        x_star,
        u1,
        u2,
        controls_differ: u1 != u2,
    })
}

/// Controls of the memoryless binary law at both states for every task in
/// `{-1, 1}`: `(x*, u1, u2)`. They always agree, so no counterexample exists
/// on this task set.
pub fn binary_task_set_check(s1: f64, s2: f64) -> Result<Vec<(f64, f64, f64)>> {
    check_unit("s1", s1)?;
    check_unit("s2", s2)?;
    [-1.0, 1.0]
        .into_iter()
        .map(|x_star| {
            // the law ignores the state, which is the point
            let u = memoryless_binary(x_star)?;
            Ok((x_star, u, u))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NsctpProblem {
    /// Minimum time on `x' = −x + u`.
    ScalarTimeOptimal,
    /// Minimum jerk with a free choice of horizon.
    MinJerk,
    /// Minimum jerk with the horizon fixed to `T`.
    MinJerkFixed(f64),
}

/// Why a pair is or is not separable by correct task performing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NsctpWitness {
    /// A task whose optimal controls differ at the two states.
    Task { x_star: f64, u_a: f64, u_b: f64 },
    /// A horizon whose initial jerks differ (target-independent gap).
    Horizon { horizon: f64, roots: Vec<f64>, jerk_gap: f64 },
    /// Fixed horizon; `jerk_gap` is zero exactly when the pair is inseparable.
    FixedHorizon { horizon: f64, jerk_gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsctpVerdict {
    /// True when every task admits correct controls that agree at time 0.
    pub nsctp: bool,
    pub witness: NsctpWitness,
}

fn axis(values: &[f64], name: &str) -> Result<AxisState> {
    match *values {
        [p] => Ok(AxisState::rest(p)),
        [p, v, a] => Ok(AxisState::new(p, v, a)),
        _ => Err(Error::usage(format!(
            "{name} must be a position or (position, velocity, acceleration), got {} values",
            values.len()
        ))),
    }
}

/// Decides whether two states form a pair that no task separates.
pub fn nsctp_scan(problem: NsctpProblem, a: &[f64], b: &[f64]) -> Result<NsctpVerdict> {
    match problem {
        NsctpProblem::ScalarTimeOptimal => {
            let ([a], [b]) = (a, b) else {
                return Err(Error::usage("the scalar problem takes one value per state"));
            };
            let report = necessity_counterexample(*a, *b)?;
            Ok(NsctpVerdict {
                nsctp: !report.controls_differ,
                witness: NsctpWitness::Task {
                    x_star: report.x_star,
                    u_a: report.u1,
                    u_b: report.u2,
                },
            })
        }
        NsctpProblem::MinJerk => {
            let sep = separating_time(axis(a, "a")?, axis(b, "b")?)?;
            Ok(NsctpVerdict {
                nsctp: false,
                witness: NsctpWitness::Horizon {
                    horizon: sep.chosen,
                    roots: sep.roots,
                    jerk_gap: sep.jerk_gap,
                },
            })
        }
        NsctpProblem::MinJerkFixed(horizon) => {
            let (a, b) = (axis(a, "a")?, axis(b, "b")?);
            let nsctp = nsctp_fixed_t(a, b, horizon)?;
            let jerk_gap = initial_jerk(a, 0.0, horizon)? - initial_jerk(b, 0.0, horizon)?;
            Ok(NsctpVerdict {
                nsctp,
                witness: NsctpWitness::FixedHorizon { horizon, jerk_gap },
            })
        }
    }
}

/// Writes the reachable set `K(t, x0)` as CSV: `theta,x1` rows for the two
/// interval ends of a scalar system, `theta,x1,x2` boundary points for a
/// planar one.
pub fn write_reachset_csv<W: Write>(
    mut out: W,
    sys: &LinearSystem,
    x0: &PlantState,
    t: f64,
    h: f64,
    points: usize,
) -> Result<()> {
    let set = ReachableSet::new(sys, x0, t, h)?;
    match set.dim() {
        1 => {
            let (lo, hi) = set.interval()?;
            writeln!(out, "theta,x1")?;
            writeln!(out, "{:.16e},{lo:.16e}", std::f64::consts::PI)?;
            writeln!(out, "{:.16e},{hi:.16e}", 0.0)?;
        }
        2 => {
            writeln!(out, "theta,x1,x2")?;
            for (theta, p) in set.boundary(points)? {
                writeln!(out, "{theta:.16e},{:.16e},{:.16e}", p[0], p[1])?;
            }
        }
        n => return Err(Error::UnsupportedDimension(n)),
    }
    Ok(())
}
