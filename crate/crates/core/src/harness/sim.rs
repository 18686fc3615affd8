use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::{PlantSpec, Scenario};
use crate::controllers::{Controller, ControllerInput};
use crate::delay::{ControlMemory, ObservationChannel};
use crate::dynamics::{clamp_to_box, rk4_step, step_count, LinearSystem, PlantState, Trajectory};
use crate::linopt::{synthesize_time_optimal, SynthesisOptions};
use crate::minjerk::{AxisState, MinJerkPlan, MinJerkTask};
use crate::tasks::{
    ctps_audit, jerk_cost, AuditReport, CostReport, FixedTimeCriteria, ReachCriteria, Segment, SegmentVerdict,
    TaskOracle, TaskSchedule,
};
use crate::{Error, Result, Vector};

const TIME_EPS: f64 = 1e-9;

/// Everything recorded during a closed-loop run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub trajectory: Trajectory,
    pub audit: AuditReport,
    /// `(t, ‖x̂_t − x_t‖∞)` at every decision of a predicting controller; empty otherwise.
    pub prediction_error: Vec<(f64, f64)>,
}

impl SimResult {
    pub fn costs(&self) -> Vec<Option<&CostReport>> {
        self.audit.segments.iter().map(|v| v.cost.as_ref()).collect()
    }

    /// Arrival (completion) time of each segment, if any.
    pub fn arrival_times(&self) -> Vec<Option<f64>> {
        self.audit
            .segments
            .iter()
            .map(|v| v.cost.as_ref().and_then(|c| c.completed_at))
            .collect()
    }

    pub fn max_prediction_error(&self) -> Option<f64> {
        self.prediction_error.iter().map(|(_, e)| *e).reduce(f64::max)
    }

    pub fn summary(&self, scenario: &Scenario) -> SimSummary {
        SimSummary {
            name: scenario.name.clone(),
            controller: scenario.controller,
            delay: scenario.delay,
            h: scenario.h,
            duration: scenario.duration,
            steps: self.trajectory.len().saturating_sub(1),
            ctps: self.audit.ctps,
            arrival_times: self.arrival_times(),
            segments: self.audit.segments.clone(),
            max_prediction_error: self.max_prediction_error(),
            clamped: self.trajectory.clamped,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub name: Option<String>,
    pub controller: super::scenario::ControllerSpec,
    pub delay: f64,
    pub h: f64,
    pub duration: f64,
    pub steps: usize,
    pub ctps: bool,
    pub arrival_times: Vec<Option<f64>>,
    pub segments: Vec<SegmentVerdict>,
    pub max_prediction_error: Option<f64>,
    pub clamped: bool,
}

/// Validates the scenario, builds its controller and runs it.
pub fn run_simulation(scenario: &Scenario) -> Result<SimResult> {
    scenario.validate()?;
    let mut controller = scenario.build_controller()?;
    simulate_with(scenario, controller.as_mut())
}

/// Runs the scenario's plant and schedule in closed loop with `controller`.
///
/// Each step `[t, t + h)`: advance the control memory to `t`, hand the
/// controller the active task, the switch flag, the memory and the
/// observation `x(t − D)`, clamp the answer into the admissible box, store it
/// in memory, and take one RK4 step with it held.
pub fn simulate_with(scenario: &Scenario, controller: &mut dyn Controller) -> Result<SimResult> {
    let plant = scenario.plant.dynamics()?;
    let schedule = scenario.task_schedule()?;
    if schedule.is_empty() {
        return Err(Error::usage("schedule has no tasks"));
    }
    let x0 = scenario.initial_state()?;
    if x0.dim() != plant.state_dim() {
        return Err(Error::usage("x0 does not match the plant"));
    }
    let (h, duration) = (scenario.h, scenario.duration);
    let delay = scenario.effective_delay();

    let steps = step_count(duration, h);
    let mut channel = ObservationChannel::new(delay, h)?;
    let mut memory = ControlMemory::new(delay, h)?;
    let mut traj = Trajectory::with_capacity(plant.control_dim(), steps + 1);
    let mut prediction_error = Vec::new();

    let mut x = x0.into_inner();
    channel.record(0.0, PlantState::new(x.clone())?)?;
    traj.push_state(0.0, PlantState::new(x.clone())?);

    for k in 0..steps {
        let t = k as f64 * h;
        let t_next = if k + 1 == steps { duration } else { (k + 1) as f64 * h };
        memory.advance(t)?;
        let task = &schedule.switches()[active_in_step(&schedule, t, h)].1;
        let delayed = channel.observe(t)?;
        let input = ControllerInput {
            task,
            switched: schedule.switch_in_step(t, h),
            memory: &memory,
            delayed_state: &delayed,
        };
        let mut u = controller.decide(&input)?;
        if u.len() != plant.control_dim() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage(format!("controller returned an invalid control at t = {t}")));
        }
        if let Some(report) = controller.last_prediction() {
            prediction_error.push((t, (report.state.as_vector() - &x).amax()));
        }
        if plant.bounded_controls() {
            let (clamped, hit) = clamp_to_box(&u);
            u = clamped;
            traj.clamped |= hit;
        }
        memory.record_control(t, u.clone())?;
        x = rk4_step(plant.as_ref(), &x, &u, t_next - t);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t_next });
        }
        let state = PlantState::new(x.clone())?;
        channel.record(t_next, state.clone())?;
        traj.push_step(u, t_next, state);
    }

    let oracle = ScenarioOracle::new(scenario)?;
    let audit = ctps_audit(&schedule, &traj, &oracle);
    Ok(SimResult {
        trajectory: traj,
        audit,
        prediction_error,
    })
}

/// Index of the last task switched on before the end of the step `[t, t + h)`.
fn active_in_step(schedule: &TaskSchedule, t: f64, h: f64) -> usize {
    schedule
        .switches()
        .partition_point(|(s, _)| *s < t + h - TIME_EPS)
        .saturating_sub(1)
}

/// Audits segments against the optimum for the scenario's plant.
struct ScenarioOracle {
    plant: PlantSpec,
    sys: Option<LinearSystem>,
    reach: ReachCriteria,
    fixed: FixedTimeCriteria,
    h: f64,
}

impl ScenarioOracle {
    fn new(scenario: &Scenario) -> Result<Self> {
        let h = scenario.h;
        Ok(ScenarioOracle {
            plant: scenario.plant.clone(),
            sys: scenario.plant.linear_system()?,
            reach: ReachCriteria {
                reach_tol: scenario.reach_tol(),
                time_tol: 2e-3,
                settle_window: (5.0 * scenario.delay).max(10.0 * h),
                track_tol: 1e-3,
            },
            fixed: FixedTimeCriteria {
                endpoint_tol: 1e-3,
                cost_rel_tol: 1e-2,
                track_tol: 1e-3,
            },
            h,
        })
    }
}

impl TaskOracle for ScenarioOracle {
    fn judge(&self, seg: &Segment, traj: &Trajectory) -> SegmentVerdict {
        let start = traj.states[traj.index_at(seg.start)].clone();
        match &self.plant {
            PlantSpec::ScalarLinear => {
                let (x0, x_star) = (start[0], seg.task.target[0]);
                let optimal = scalar_optimal_time(x0, x_star);
                let path = move |t: f64| Some(Vector::from_element(1, scalar_optimal_path(x0, x_star, t)));
                self.reach.judge(seg, traj, optimal, &path)
            }
            PlantSpec::Linear { .. } => {
                let sys = self.sys.as_ref().expect("linear plant has a system");
                let opts = SynthesisOptions {
                    h: self.h,
                    ..SynthesisOptions::default()
                };
                let solution = seg
                    .task
                    .target_state()
                    .and_then(|target| synthesize_time_optimal(sys, &start, &target, &opts));
                let optimal = solution.as_ref().map(|s| s.tau).map_err(clone_error);
                let path = |t: f64| {
                    let s = solution.as_ref().ok()?;
                    (t <= s.tau).then(|| s.trajectory.states[s.trajectory.index_at(t)].as_vector().clone())
                };
                self.reach.judge(seg, traj, optimal, &path)
            }
            PlantSpec::MinJerk => {
                let target = [seg.task.target[0], seg.task.target[1]];
                let plan = seg
                    .task
                    .horizon
                    .ok_or_else(|| Error::usage("fixed-time task without horizon"))
                    .and_then(|t| MinJerkTask::new(target, t))
                    .and_then(|task| MinJerkPlan::new(&AxisState::split_planar(start.as_vector()), &task));
                let plan = match plan {
                    Ok(p) => p,
                    Err(e) => return self.reach.judge(seg, traj, Err(e), &|_| None),
                };
                let terminal = AxisState::join_planar(&[AxisState::rest(target[0]), AxisState::rest(target[1])]);
                let optimal_cost = plan_cost(&plan);
                let path = |t: f64| AxisState::join_planar(&plan.state_at(t)).into_inner();
                self.fixed
                    .judge(seg, traj, terminal.as_vector(), optimal_cost, &path)
            }
        }
    }
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Unreachable { horizon } => Error::Unreachable { horizon: *horizon },
        other => Error::Precondition(other.to_string()),
    }
}

/// Minimum time to move `x' = −x + u` from `x0` to `x_star`.
pub fn scalar_optimal_time(x0: f64, x_star: f64) -> Result<f64> {
    if x0 == x_star {
        return Ok(0.0);
    }
    if x_star.abs() >= 1.0 {
        return Err(Error::Unreachable { horizon: f64::INFINITY });
    }
    let sigma = if x_star > x0 { 1.0 } else { -1.0 };
    Ok(((x0 - sigma) / (x_star - sigma)).ln())
}

/// Optimal path of `x' = −x + u` towards `x_star`; holds the target after arrival.
pub fn scalar_optimal_path(x0: f64, x_star: f64, t: f64) -> f64 {
    match scalar_optimal_time(x0, x_star) {
        Ok(tau) if t < tau => {
            let sigma = if x_star > x0 { 1.0 } else { -1.0 };
            sigma + (x0 - sigma) * (-t).exp()
        }
        Ok(_) => x_star,
        Err(_) => {
            let sigma = x_star.signum();
            sigma + (x0 - sigma) * (-t).exp()
        }
    }
}

/// `½∫|jerk|²` of a planar plan.
pub fn plan_cost(plan: &MinJerkPlan) -> f64 {
    // jerk is quadratic in t, so Simpson on a fine grid is exact to rounding
    let signal = |t: f64| Vector::from_column_slice(&plan.jerk_at(t));
    jerk_cost(&signal, plan.horizon, 2000).expect("plan horizon is positive")
}

/// Writes `trajectory.csv`, `prediction_error.csv` (when present) and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, scenario: &Scenario, result: &SimResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("trajectory.csv");
    result.trajectory.write_csv(std::io::BufWriter::new(fs::File::create(&path)?))?;
    written.push(path);

    if !result.prediction_error.is_empty() {
        let path = dir.join("prediction_error.csv");
        let mut text = String::from("t,error\n");
        for (t, e) in &result.prediction_error {
            text.push_str(&format!("{t:.16e},{e:.16e}\n"));
        }
        fs::write(&path, text)?;
        written.push(path);
    }

    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&result.summary(scenario))?)?;
    written.push(path);
    Ok(written)
}
