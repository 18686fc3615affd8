//! The controller contract and concrete controllers.
//!
//! A controller sees exactly four things at each decision: the current task,
//! whether a task switch happened in this step, its own control memory, and
//! the delayed plant state. [`ForwardModelController`] turns any undelayed
//! state-feedback law into such a controller by replaying the remembered
//! controls through a plant model, starting from the delayed observation.

use std::sync::Arc;

use crate::delay::ControlMemory;
use crate::dynamics::{integrate_zoh, Dynamics, LinearSystem, PlantState};
use crate::linopt::{synthesize_time_optimal, SynthesisOptions, TimeOptimalSolution};
use crate::minjerk::{solve_quintic, AxisState};
use crate::tasks::{Task, TaskKind};
use crate::{Error, Result, Vector};

/// What a controller may look at when deciding.
#[derive(Debug, Clone, Copy)]
pub struct ControllerInput<'a> {
    pub task: &'a Task,
    /// True exactly on the step containing a task switch.
    pub switched: bool,
    /// Past controls; `memory.now()` is the decision time.
    pub memory: &'a ControlMemory,
    pub delayed_state: &'a PlantState,
}

pub trait Controller {
    fn decide(&mut self, input: &ControllerInput<'_>) -> Result<Vector>;

    /// Prediction made during the last decision, for controllers that predict.
    fn last_prediction(&self) -> Option<&PredictionReport> {
        None
    }
}

/// Output of the forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub state: PlantState,
    /// Length of the replayed control window, `min(t, D)` (s).
    pub window: f64,
    pub step: f64,
}

/// Predicts the current state by integrating the plant from the delayed
/// observation over the last `min(t, D)` seconds of remembered controls.
pub fn forward_model_predict(
    dynamics: &dyn Dynamics,
    delayed_state: &PlantState,
    memory: &ControlMemory,
    t: f64,
    delay: f64,
) -> Result<PredictionReport> {
    let h = memory.step();
    if ((memory.now() - t) / h).abs() > 0.5 {
        return Err(Error::usage(format!(
            "memory clock at {} but prediction asked for t = {t}",
            memory.now()
        )));
    }
    let window = t.min(delay).max(0.0);
    let segment = memory.memory_segment(0.0, window)?;
    let window = segment.len() as f64 * h;
    let state = integrate_zoh(dynamics, delayed_state.as_vector(), segment.samples, h)?;
    Ok(PredictionReport {
        state: PlantState::new(state)?,
        window,
        step: h,
    })
}

/// `sgn(x* − x)` with `sgn(0) = 0`. Meant for targets in `[-1, 1]`.
pub fn bang_bang_1d(x_star: f64, x: f64) -> f64 {
    let e = x_star - x;
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `u = x*` for the two-point task set `{-1, 1}`.
pub fn memoryless_binary(x_star: f64) -> Result<f64> {
    if x_star == 1.0 || x_star == -1.0 {
        Ok(x_star)
    } else {
        Err(Error::usage(format!("binary task set is {{-1, 1}}, got {x_star}")))
    }
}

/// Undelayed state-feedback law.
pub trait StateFeedback {
    /// `elapsed` is the time since the current task was issued.
    fn control(&mut self, task: &Task, switched: bool, elapsed: f64, state: &PlantState) -> Result<Vector>;
}

impl<L: StateFeedback + ?Sized> StateFeedback for Box<L> {
    fn control(&mut self, task: &Task, switched: bool, elapsed: f64, state: &PlantState) -> Result<Vector> {
        (**self).control(task, switched, elapsed, state)
    }
}

/// Adapts a closure `(task, state) -> control`.
pub struct FeedbackFn<F>(pub F);

impl<F> StateFeedback for FeedbackFn<F>
where
    F: FnMut(&Task, &PlantState) -> Vector,
{
    fn control(&mut self, task: &Task, _switched: bool, _elapsed: f64, state: &PlantState) -> Result<Vector> {
        Ok((self.0)(task, state))
    }
}

fn scalar_target(task: &Task) -> Result<f64> {
    match (task.kind, task.target.len()) {
        (TaskKind::Setpoint, 1) => Ok(task.target[0]),
        _ => Err(Error::usage("expected a one-dimensional setpoint task")),
    }
}

/// The plain sign law `u = sgn(x* − x)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BangBang1d;

impl StateFeedback for BangBang1d {
    fn control(&mut self, task: &Task, _: bool, _: f64, state: &PlantState) -> Result<Vector> {
        Ok(Vector::from_element(1, bang_bang_1d(scalar_target(task)?, state[0])))
    }
}

/// Time-optimal law for `x' = −x + u` under a zero-order hold of step `h`.
///
/// Far from the target this is `sgn(x* − x)`. When the target can be hit
/// within one step, it emits the held control that lands on it exactly,
/// which at the target is `u = x*`, so the plant stays there.
#[derive(Debug, Clone, Copy)]
pub struct SampledBangBang1d {
    decay: f64,
}

impl SampledBangBang1d {
    pub fn new(h: f64) -> Self {
        SampledBangBang1d { decay: (-h).exp() }
    }

    pub fn control_for(&self, x_star: f64, x: f64) -> f64 {
        let landing = (x_star - self.decay * x) / (1.0 - self.decay);
        landing.clamp(-1.0, 1.0)
    }
}

impl StateFeedback for SampledBangBang1d {
    fn control(&mut self, task: &Task, _: bool, _: f64, state: &PlantState) -> Result<Vector> {
        Ok(Vector::from_element(1, self.control_for(scalar_target(task)?, state[0])))
    }
}

/// Time-optimal control of a linear plant: plans a bang-bang transfer when a
/// task arrives and then plays it back; after arrival it holds the
/// equilibrium control of the target (clamped to the box).
#[derive(Debug, Clone)]
pub struct LinearTimeOptimal {
    sys: LinearSystem,
    opts: SynthesisOptions,
    plan: Option<(Vector, TimeOptimalSolution)>,
}

impl LinearTimeOptimal {
    pub fn new(sys: LinearSystem, opts: SynthesisOptions) -> Self {
        LinearTimeOptimal { sys, opts, plan: None }
    }

    fn hold_control(&self, target: &Vector) -> Vector {
        let rhs = -(self.sys.state_matrix() * target);
        let svd = self.sys.input_matrix().clone().svd(true, true);
        let u = svd
            .solve(&rhs, 1e-12)
            .unwrap_or_else(|_| Vector::zeros(self.sys.control_dim()));
        u.map(|v| v.clamp(-1.0, 1.0))
    }
}

impl StateFeedback for LinearTimeOptimal {
    fn control(&mut self, task: &Task, switched: bool, elapsed: f64, state: &PlantState) -> Result<Vector> {
        if task.kind != TaskKind::Setpoint {
            return Err(Error::usage("time-optimal control needs a setpoint task"));
        }
        let stale = match &self.plan {
            Some((target, _)) => switched || *target != task.target,
            None => true,
        };
        if stale {
            let solution = synthesize_time_optimal(&self.sys, state, &task.target_state()?, &self.opts)?;
            self.plan = Some((task.target.clone(), solution));
        }
        let (target, plan) = self.plan.as_ref().expect("plan set above");
        let h = self.opts.h;
        let hold = self.hold_control(target);
        if elapsed >= plan.tau {
            return Ok(hold);
        }
        if elapsed + h <= plan.tau {
            if let Some(u) = plan.step_control(elapsed, h) {
                return Ok(u);
            }
        }
        // the step may straddle the arrival; hold the target's control for the rest of it
        let played = plan.control_integral(elapsed, elapsed + h).unwrap_or_else(|| hold.clone() * 0.0);
        let rest = (elapsed + h - plan.tau).max(0.0);
        Ok((played + hold * rest) / h)
    }
}

/// Receding-horizon minimum-jerk law on the planar plant.
///
/// Every step re-plans the quintic from the current state over the remaining
/// horizon and holds its mean jerk over the step, so that the held jerk
/// carries the plan's acceleration exactly to the next grid point. Emits zero
/// jerk once the horizon is over.
#[derive(Debug, Clone, Copy)]
pub struct MinJerkTracker {
    h: f64,
}

impl MinJerkTracker {
    pub fn new(h: f64) -> Self {
        MinJerkTracker { h }
    }
}

impl StateFeedback for MinJerkTracker {
    fn control(&mut self, task: &Task, _: bool, elapsed: f64, state: &PlantState) -> Result<Vector> {
        let (TaskKind::FixedTime, Some(horizon), 2) = (task.kind, task.horizon, task.target.len()) else {
            return Err(Error::usage("minimum-jerk tracking needs a planar fixed-time task"));
        };
        if state.dim() != 6 {
            return Err(Error::usage("minimum-jerk tracking needs the 6-dimensional planar state"));
        }
        let remaining = horizon - elapsed;
        if remaining <= 0.5 * self.h {
            return Ok(Vector::zeros(2));
        }
        let span = self.h.min(remaining);
        let axes = AxisState::split_planar(state);
        let mut jerk = Vector::zeros(2);
        for (i, axis) in axes.into_iter().enumerate() {
            let plan = solve_quintic(axis, task.target[i], remaining)?;
            jerk[i] = (plan.derivative(2, span) - plan.derivative(2, 0.0)) / span;
        }
        Ok(jerk)
    }
}

/// Tracks the time since the last task switch from the switch flag and memory clock.
#[derive(Debug, Clone, Copy, Default)]
struct SwitchClock {
    since: f64,
}

impl SwitchClock {
    fn elapsed(&mut self, input: &ControllerInput<'_>) -> f64 {
        let now = input.memory.now();
        if input.switched {
            self.since = now;
        }
        now - self.since
    }
}

/// Wraps an undelayed law with a forward model of the plant.
pub struct ForwardModelController<L> {
    model: Arc<dyn Dynamics>,
    inner: L,
    delay: f64,
    clock: SwitchClock,
    last: Option<PredictionReport>,
}

/// Builds a controller that predicts the current state from the delayed
/// observation and its memory, then applies `inner` to the prediction.
pub fn make_forward_model_controller<L: StateFeedback>(
    model: Arc<dyn Dynamics>,
    inner: L,
    delay: f64,
) -> ForwardModelController<L> {
    ForwardModelController {
        model,
        inner,
        delay,
        clock: SwitchClock::default(),
        last: None,
    }
}

impl<L: StateFeedback> Controller for ForwardModelController<L> {
    fn decide(&mut self, input: &ControllerInput<'_>) -> Result<Vector> {
        let elapsed = self.clock.elapsed(input);
        let t = input.memory.now();
        let report = forward_model_predict(self.model.as_ref(), input.delayed_state, input.memory, t, self.delay)?;
        let u = self.inner.control(input.task, input.switched, elapsed, &report.state)?;
        self.last = Some(report);
        Ok(u)
    }

    fn last_prediction(&self) -> Option<&PredictionReport> {
        self.last.as_ref()
    }
}

/// Applies an undelayed law directly to the delayed observation.
pub struct NaiveDelayedController<L> {
    inner: L,
    clock: SwitchClock,
}

impl<L: StateFeedback> NaiveDelayedController<L> {
    pub fn new(inner: L) -> Self {
        NaiveDelayedController {
            inner,
            clock: SwitchClock::default(),
        }
    }
}

impl<L: StateFeedback> Controller for NaiveDelayedController<L> {
    fn decide(&mut self, input: &ControllerInput<'_>) -> Result<Vector> {
        let elapsed = self.clock.elapsed(input);
        self.inner.control(input.task, input.switched, elapsed, input.delayed_state)
    }
}

/// `u = x*` on the two-point task set; ignores state and memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct MemorylessBinaryController;

impl Controller for MemorylessBinaryController {
    fn decide(&mut self, input: &ControllerInput<'_>) -> Result<Vector> {
        Ok(Vector::from_element(1, memoryless_binary(scalar_target(input.task)?)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ConstantControl, integrate_plant};
    use proptest::prelude::*;

    fn scalar_plant() -> Arc<dyn Dynamics> {
        Arc::new(LinearSystem::scalar_decay())
    }

    fn memory_with(delay: f64, h: f64, u: f64, until: f64) -> ControlMemory {
        let mut mem = ControlMemory::new(delay, h).unwrap();
        let steps = (until / h).round() as usize;
        for k in 0..steps {
            mem.record_control(k as f64 * h, Vector::from_element(1, u)).unwrap();
        }
        mem.advance(until).unwrap();
        mem
    }

    #[test]
    fn prediction_examples() {
        let plant = scalar_plant();
        let h = 1e-3;
        let mem = memory_with(0.0, h, 0.0, 0.5);
        let x = PlantState::scalar(0.3);
        let r = forward_model_predict(plant.as_ref(), &x, &mem, 0.5, 0.0).unwrap();
        assert_eq!(r.state, x);
        assert_eq!(r.window, 0.0);

        let mem = memory_with(1.0, h, 0.0, 1.0);
        let r = forward_model_predict(plant.as_ref(), &PlantState::scalar(1.0), &mem, 1.0, 1.0).unwrap();
        assert!((r.state[0] - (-1f64).exp()).abs() < 1e-6);
        assert!((r.window - 1.0).abs() < 1e-12);

        // delays are quantized to whole steps, so use a step that divides ln 2
        let d = 2f64.ln();
        let mem = memory_with(d, d / 700.0, 1.0, d);
        let r = forward_model_predict(plant.as_ref(), &PlantState::scalar(0.0), &mem, d, d).unwrap();
        assert!((r.state[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn prediction_needs_history() {
        let plant = scalar_plant();
        let mem = memory_with(0.5, 1e-3, 1.0, 0.5);
        // window shorter than the delay
        assert!(forward_model_predict(plant.as_ref(), &PlantState::scalar(0.0), &mem, 0.5, 1.0).is_ok());
        let short = memory_with(0.2, 1e-3, 1.0, 0.5);
        assert!(forward_model_predict(plant.as_ref(), &PlantState::scalar(0.0), &short, 0.5, 0.4).is_err());
        assert!(forward_model_predict(plant.as_ref(), &PlantState::scalar(0.0), &mem, 0.3, 0.2).is_err());
    }

    #[test]
    fn sign_law_examples() {
        assert_eq!(bang_bang_1d(0.5, 0.0), 1.0);
        assert_eq!(bang_bang_1d(0.3, 0.3), 0.0);
        assert_eq!(bang_bang_1d(0.1, 0.4), -1.0);
    }

    #[test]
    fn binary_law_examples() {
        assert_eq!(memoryless_binary(1.0).unwrap(), 1.0);
        assert_eq!(memoryless_binary(-1.0).unwrap(), -1.0);
        assert!(memoryless_binary(0.3).is_err());
    }

    #[test]
    fn sampled_law_lands_and_holds() {
        let h = 1e-3;
        let law = SampledBangBang1d::new(h);
        assert_eq!(law.control_for(0.5, 0.0), 1.0);
        assert_eq!(law.control_for(-0.5, 0.0), -1.0);
        assert!((law.control_for(0.5, 0.5) - 0.5).abs() < 1e-12);
        // one held step from just below the target lands on it
        let x = 0.4999;
        let u = law.control_for(0.5, x);
        assert!(u.abs() <= 1.0);
        let traj = integrate_plant(
            &LinearSystem::scalar_decay(),
            &PlantState::scalar(x),
            &ConstantControl::scalar(u),
            0.0,
            h,
            h,
        )
        .unwrap();
        assert!((traj.final_state()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_delay_wrapper_matches_inner_law() {
        let h = 1e-3;
        let mut wrapped = make_forward_model_controller(scalar_plant(), BangBang1d, 0.0);
        let mut mem = ControlMemory::new(0.0, h).unwrap();
        let task = Task::setpoint(&[0.25]).unwrap();
        for (k, x) in [-1.0, -0.2, 0.25, 0.3, 0.9].into_iter().enumerate() {
            mem.advance(k as f64 * h).unwrap();
            let state = PlantState::scalar(x);
            let input = ControllerInput {
                task: &task,
                switched: k == 0,
                memory: &mem,
                delayed_state: &state,
            };
            let u = wrapped.decide(&input).unwrap();
            assert_eq!(u[0], bang_bang_1d(0.25, x));
            mem.record_control(k as f64 * h, u).unwrap();
        }
    }

    #[test]
    fn min_jerk_tracker_first_step() {
        let mut law = MinJerkTracker::new(1e-3);
        let task = Task::fixed_time(&[1.0, 0.0], 1.0).unwrap();
        let rest = PlantState::from_slice(&[0.0; 6]).unwrap();
        let u = law.control(&task, true, 0.0, &rest).unwrap();
        // mean of 60 − 360t + 360t² over the first step
        let h: f64 = 1e-3;
        let mean = 60.0 - 180.0 * h + 120.0 * h * h;
        assert!((u[0] - mean).abs() < 1e-9 && u[1] == 0.0);
        assert_eq!(law.control(&task, false, 1.0, &rest).unwrap(), Vector::zeros(2));
        assert!(law.control(&Task::setpoint(&[1.0]).unwrap(), true, 0.0, &rest).is_err());
    }

    #[test]
    fn linear_planner_holds_after_arrival() {
        let sys = LinearSystem::double_integrator();
        let mut law = LinearTimeOptimal::new(sys, SynthesisOptions::default());
        let task = Task::setpoint(&[0.0, 0.0]).unwrap();
        let start = PlantState::from_slice(&[-1.0, 0.0]).unwrap();
        assert_eq!(law.control(&task, true, 0.0, &start).unwrap()[0], 1.0);
        assert_eq!(law.control(&task, false, 1.5, &start).unwrap()[0], -1.0);
        assert_eq!(law.control(&task, false, 5.0, &start).unwrap()[0], 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn wrapper_ignores_everything_but_its_inputs(x in -1.0f64..1.0, truth in -1.0f64..1.0, u in -1.0f64..1.0) {
            // the decision depends on the four inputs only; the true state never enters
            let h = 1e-3;
            let mem = memory_with(0.1, h, u, 0.3);
            let task = Task::setpoint(&[0.2]).unwrap();
            let delayed = PlantState::scalar(x);
            let decide = || {
                let mut c = make_forward_model_controller(scalar_plant(), SampledBangBang1d::new(h), 0.1);
                let input = ControllerInput { task: &task, switched: false, memory: &mem, delayed_state: &delayed };
                c.decide(&input).unwrap()
            };
            let _unused_truth = PlantState::scalar(truth);
            prop_assert_eq!(decide(), decide());
        }
    }
}
