//! Tasks, switching schedules, cost functionals and correctness audits.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSignal, PlantState, Trajectory};
use crate::{Error, Result, Vector};

/// Default reach band (∞-norm) for setpoint tasks.
pub const DEFAULT_REACH_TOL: f64 = 1e-4;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    /// Reach the target in minimum time.
    #[serde(rename = "setpoint")]
    Setpoint,
    /// Reach the target at rest after exactly `T` seconds, minimizing jerk.
    #[serde(rename = "setpoint-fixed-time")]
    FixedTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    /// Full plant state for setpoint tasks; reduced (position-only) target for fixed-time tasks.
    pub target: Vector,
    /// `T` for fixed-time tasks.
    pub horizon: Option<f64>,
}

impl Task {
    pub fn setpoint(target: &[f64]) -> Result<Self> {
        Self::new(TaskKind::Setpoint, target.to_vec(), None)
    }

    pub fn fixed_time(target: &[f64], horizon: f64) -> Result<Self> {
        Self::new(TaskKind::FixedTime, target.to_vec(), Some(horizon))
    }

    pub fn new(kind: TaskKind, target: Vec<f64>, horizon: Option<f64>) -> Result<Self> {
        if target.is_empty() || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("task target must be non-empty and finite"));
        }
        match (kind, horizon) {
            (TaskKind::FixedTime, Some(t)) if t > 0.0 && t.is_finite() => {}
            (TaskKind::FixedTime, _) => {
                return Err(Error::usage("fixed-time task needs a horizon T > 0"));
            }
            (TaskKind::Setpoint, Some(_)) => {
                return Err(Error::usage("setpoint task takes no horizon"));
            }
            (TaskKind::Setpoint, None) => {}
        }
        Ok(Task {
            kind,
            target: Vector::from_vec(target),
            horizon,
        })
    }

    pub fn target_state(&self) -> Result<PlantState> {
        PlantState::new(self.target.clone())
    }
}

/// One entry of the schedule file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub t: f64,
    pub kind: TaskKind,
    pub target: Vec<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

/// Piecewise-constant task signal: `tasks[i]` is active on `[t_i, t_{i+1})`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskSchedule {
    switches: Vec<(f64, Task)>,
}

/// An inter-switch interval clipped to the trajectory span.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub task: Task,
}

impl TaskSchedule {
    /// Switch times must start at 0 and increase strictly.
    pub fn new(switches: Vec<(f64, Task)>) -> Result<Self> {
        if let Some((t0, _)) = switches.first() {
            if *t0 != 0.0 {
                return Err(Error::usage(format!("first switch must be at t = 0, got {t0}")));
            }
        }
        for pair in switches.windows(2) {
            if !(pair[1].0 > pair[0].0) || !pair[1].0.is_finite() {
                return Err(Error::usage(format!(
                    "switch times must increase strictly: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(TaskSchedule { switches })
    }

    pub fn single(task: Task) -> Self {
        TaskSchedule {
            switches: vec![(0.0, task)],
        }
    }

    pub fn from_entries(entries: Vec<TaskEntry>) -> Result<Self> {
        let switches = entries
            .into_iter()
            .map(|e| Ok((e.t, Task::new(e.kind, e.target, e.horizon)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(switches)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_entries(serde_json::from_str(text)?)
    }

    pub fn entries(&self) -> Vec<TaskEntry> {
        self.switches
            .iter()
            .map(|(t, task)| TaskEntry {
                t: *t,
                kind: task.kind,
                target: task.target.iter().copied().collect(),
                horizon: task.horizon,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries())?)
    }

    pub fn is_empty(&self) -> bool {
        self.switches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.switches.len()
    }

    pub fn switches(&self) -> &[(f64, Task)] {
        &self.switches
    }

    pub fn last_switch(&self) -> f64 {
        self.switches.last().map_or(0.0, |(t, _)| *t)
    }

    /// Index of the task active at `t`.
    pub fn active_index(&self, t: f64) -> Option<usize> {
        let idx = self.switches.partition_point(|(s, _)| *s <= t + TIME_EPS);
        idx.checked_sub(1)
    }

    pub fn task_at(&self, t: f64) -> Option<&Task> {
        self.active_index(t).map(|i| &self.switches[i].1)
    }

    /// Whether a switch time falls in the step `[t, t + h)`.
    pub fn switch_in_step(&self, t: f64, h: f64) -> bool {
        self.switches
            .iter()
            .any(|(s, _)| *s >= t - TIME_EPS && *s < t + h - TIME_EPS)
    }

    /// Segments `[t_i, min(t_{i+1}, end)]` starting before `end`.
    pub fn segments(&self, end: f64) -> Vec<Segment> {
        self.switches
            .iter()
            .enumerate()
            .take_while(|(_, (t, _))| *t < end - TIME_EPS || *t == 0.0)
            .map(|(i, (t, task))| {
                let next = self.switches.get(i + 1).map_or(end, |(s, _)| s.min(end));
                Segment {
                    index: i,
                    start: *t,
                    end: next,
                    task: task.clone(),
                }
            })
            .collect()
    }
}

/// Cost of one task segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Seconds for time cost (equal to the completion time relative to the
    /// segment start), `½∫|jerk|²` for jerk cost; `None` when never completed.
    pub value: Option<f64>,
    /// Absolute completion time.
    pub completed_at: Option<f64>,
}

impl CostReport {
    pub fn completed(&self) -> bool {
        self.completed_at.is_some()
    }
}

/// Sub-interval of `[0, 1]` where `|a + s d| <= tol`.
fn band_interval(a: f64, d: f64, tol: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        return (a.abs() <= tol).then_some((0.0, 1.0));
    }
    let (s1, s2) = ((-tol - a) / d, (tol - a) / d);
    let (lo, hi) = (s1.min(s2).max(0.0), s1.max(s2).min(1.0));
    (lo <= hi).then_some((lo, hi))
}

/// First time the trajectory enters the ∞-norm band `tol` around `x_star`,
/// with linear interpolation inside the grid step where it happens.
pub fn time_cost(traj: &Trajectory, x_star: &PlantState, tol: f64) -> Result<CostReport> {
    time_cost_between(traj, x_star, tol, 0, traj.len().saturating_sub(1))
}

fn time_cost_between(
    traj: &Trajectory,
    x_star: &PlantState,
    tol: f64,
    first: usize,
    last: usize,
) -> Result<CostReport> {
    if !(tol > 0.0) {
        return Err(Error::usage("reach tolerance must be positive"));
    }
    if traj.is_empty() {
        return Ok(CostReport {
            value: None,
            completed_at: None,
        });
    }
    if x_star.dim() != traj.state_dim() {
        return Err(Error::usage("target dimension does not match the trajectory"));
    }
    let t0 = traj.times[first];
    let done = |t: f64| CostReport {
        value: Some(t - t0),
        completed_at: Some(t),
    };
    if (traj.states[first].as_vector() - x_star.as_vector()).amax() <= tol {
        return Ok(done(t0));
    }
    for k in first..last {
        let a = traj.states[k].as_vector() - x_star.as_vector();
        let d = traj.states[k + 1].as_vector() - traj.states[k].as_vector();
        let mut window = Some((0.0f64, 1.0f64));
        for i in 0..a.len() {
            window = window.and_then(|(lo, hi)| {
                let (l, h) = band_interval(a[i], d[i], tol)?;
                let (lo, hi) = (lo.max(l), hi.min(h));
                (lo <= hi).then_some((lo, hi))
            });
        }
        if let Some((s, _)) = window {
            let (ta, tb) = (traj.times[k], traj.times[k + 1]);
            return Ok(done(ta + s * (tb - ta)));
        }
    }
    Ok(CostReport {
        value: None,
        completed_at: None,
    })
}

/// `½∫₀ᵀ |u|² dt` by composite Simpson with `intervals` (rounded up to even) panels.
pub fn jerk_cost(control: &dyn ControlSignal, horizon: f64, intervals: usize) -> Result<f64> {
    if !(horizon >= 0.0) {
        return Err(Error::usage("horizon must be >= 0"));
    }
    if horizon == 0.0 {
        return Ok(0.0);
    }
    let n = (intervals.max(2) + 1) / 2 * 2;
    let q = horizon / n as f64;
    let sum: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * control.control_at(k as f64 * q).norm_squared()
        })
        .sum();
    Ok(0.5 * sum * q / 3.0)
}

/// `½∫|u|²` of a trajectory's held controls over `[t0, t1]` (exact for zero-order hold).
pub fn jerk_cost_held(traj: &Trajectory, t0: f64, t1: f64) -> f64 {
    traj.controls
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let a = traj.times[k].max(t0);
            let b = traj.times[k + 1].min(t1);
            if b > a {
                0.5 * u.norm_squared() * (b - a)
            } else {
                0.0
            }
        })
        .sum()
}

/// Verdict for one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVerdict {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub pass: bool,
    /// Why the segment failed, or a note when it was only partially scored.
    pub reason: Option<String>,
    pub cost: Option<CostReport>,
    /// Largest ∞-norm distance from the target after first reaching it.
    pub overshoot: Option<f64>,
}

impl SegmentVerdict {
    fn new(seg: &Segment) -> Self {
        SegmentVerdict {
            index: seg.index,
            start: seg.start,
            end: seg.end,
            pass: true,
            reason: None,
            cost: None,
            overshoot: None,
        }
    }

    fn fail(mut self, reason: impl Into<String>) -> Self {
        self.pass = false;
        self.reason = Some(reason.into());
        self
    }

    fn note(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }
}

/// Per-task correctness checker.
pub trait TaskOracle {
    fn judge(&self, segment: &Segment, traj: &Trajectory) -> SegmentVerdict;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub segments: Vec<SegmentVerdict>,
    /// True iff every segment passed (vacuously true with no segments).
    pub ctps: bool,
}

/// Scores every segment of the schedule that the trajectory covers.
pub fn ctps_audit(schedule: &TaskSchedule, traj: &Trajectory, oracle: &dyn TaskOracle) -> AuditReport {
    let end = traj.times.last().copied().unwrap_or(0.0);
    let segments: Vec<SegmentVerdict> = schedule
        .segments(end)
        .iter()
        .map(|seg| oracle.judge(seg, traj))
        .collect();
    let ctps = segments.iter().all(|v| v.pass);
    AuditReport { segments, ctps }
}

/// Grid index range of a segment.
fn segment_indices(seg: &Segment, traj: &Trajectory) -> (usize, usize) {
    (traj.index_at(seg.start), traj.index_at(seg.end))
}

/// Criteria for minimum-time setpoint segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachCriteria {
    pub reach_tol: f64,
    /// Allowed gap between achieved and optimal arrival time (s).
    pub time_tol: f64,
    /// After arrival the state must be back inside the reach band within this
    /// long (or by the end of the segment, if sooner) and stay there (s).
    pub settle_window: f64,
    /// Allowed deviation from the optimal path on segments interrupted before arrival.
    pub track_tol: f64,
}

impl ReachCriteria {
    /// `optimal_time` is the minimum time from the segment's start state;
    /// `optimal_state` gives the optimal path at an elapsed time, if known.
    pub fn judge(
        &self,
        seg: &Segment,
        traj: &Trajectory,
        optimal_time: Result<f64>,
        optimal_state: &dyn Fn(f64) -> Option<Vector>,
    ) -> SegmentVerdict {
        let verdict = SegmentVerdict::new(seg);
        let target = match seg.task.target_state() {
            Ok(t) => t,
            Err(e) => return verdict.fail(e.to_string()),
        };
        let optimal = match optimal_time {
            Ok(t) => t,
            Err(e) => return verdict.fail(format!("no optimal reference: {e}")),
        };
        let (first, last) = segment_indices(seg, traj);
        let cost = match time_cost_between(traj, &target, self.reach_tol, first, last) {
            Ok(c) => c,
            Err(e) => return verdict.fail(e.to_string()),
        };
        let mut verdict = SegmentVerdict {
            cost: Some(cost.clone()),
            ..verdict
        };

        let Some(reached) = cost.completed_at else {
            let span = seg.end - seg.start;
            if span + self.time_tol >= optimal {
                return verdict.fail(format!(
                    "target not reached; optimal time {optimal:.6} s fits in the {span:.6} s segment"
                ));
            }
            // interrupted: compare with the optimal path where it is known
            let end_state = traj.states[last].as_vector();
            return match optimal_state(traj.times[last] - traj.times[first]) {
                Some(reference) => {
                    let dev = (end_state - reference).amax();
                    if dev <= self.track_tol {
                        verdict.note("interrupted before arrival; on the optimal path")
                    } else {
                        verdict.fail(format!("interrupted {dev:.3e} away from the optimal path"))
                    }
                }
                None => verdict.note("interrupted before arrival; not scored"),
            };
        };

        let elapsed = reached - seg.start;
        if (elapsed - optimal).abs() > self.time_tol {
            return verdict.fail(format!(
                "arrival after {elapsed:.6} s, optimal {optimal:.6} s"
            ));
        }

        // settle check after the first arrival
        let first_after = traj.times.partition_point(|t| *t < reached);
        let mut overshoot: f64 = 0.0;
        let mut last_outside = None;
        for k in first_after..=last {
            let dist = (traj.states[k].as_vector() - target.as_vector()).amax();
            overshoot = overshoot.max(dist);
            if dist > self.reach_tol {
                last_outside = Some(traj.times[k]);
            }
        }
        verdict.overshoot = Some(overshoot);
        if let Some(t_out) = last_outside {
            // a segment that ends first must at least end inside the band
            let settled_by = (reached + self.settle_window).min(traj.times[last]);
            if t_out >= settled_by {
                verdict = verdict.fail(format!(
                    "left the reach band after arrival (overshoot {overshoot:.3e}) and did not settle within {:.3} s",
                    self.settle_window
                ));
            }
        }
        verdict
    }
}

/// Criteria for fixed-time minimum-jerk segments.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTimeCriteria {
    /// Allowed terminal error (∞-norm over position, velocity, acceleration).
    pub endpoint_tol: f64,
    /// Allowed relative excess of jerk cost over the optimum.
    pub cost_rel_tol: f64,
    /// Allowed deviation from the optimal path on interrupted segments.
    pub track_tol: f64,
}

impl FixedTimeCriteria {
    /// `terminal` is the required terminal plant state; `optimal_cost` and
    /// `optimal_state` describe the optimal move from the segment's start state.
    pub fn judge(
        &self,
        seg: &Segment,
        traj: &Trajectory,
        terminal: &Vector,
        optimal_cost: f64,
        optimal_state: &dyn Fn(f64) -> Vector,
    ) -> SegmentVerdict {
        let mut verdict = SegmentVerdict::new(seg);
        let Some(horizon) = seg.task.horizon else {
            return verdict.fail("fixed-time task without horizon");
        };
        let (first, last) = segment_indices(seg, traj);
        let t_start = traj.times[first];
        if seg.end - seg.start + 1e-9 < horizon {
            let dev = (traj.states[last].as_vector() - optimal_state(traj.times[last] - t_start)).amax();
            return if dev <= self.track_tol {
                verdict.note("interrupted before the horizon; on the optimal path")
            } else {
                verdict.fail(format!("interrupted {dev:.3e} away from the optimal path"))
            };
        }
        let k_end = traj.index_at(t_start + horizon);
        let err = (traj.states[k_end].as_vector() - terminal).amax();
        let cost = jerk_cost_held(traj, t_start, traj.times[k_end]);
        verdict.cost = Some(CostReport {
            value: Some(cost),
            completed_at: (err <= self.endpoint_tol).then_some(traj.times[k_end]),
        });
        if err > self.endpoint_tol {
            return verdict.fail(format!("terminal error {err:.3e} exceeds {:.1e}", self.endpoint_tol));
        }
        let excess = (cost - optimal_cost).abs() / optimal_cost.max(1e-12);
        if excess > self.cost_rel_tol && (cost - optimal_cost).abs() > 1e-9 {
            verdict = verdict.fail(format!(
                "jerk cost {cost:.6} vs optimal {optimal_cost:.6} (relative gap {excess:.2e})"
            ));
        }
        verdict
    }
}
