use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controllers::{
    make_forward_model_controller, BangBang1d, Controller, LinearTimeOptimal, MemorylessBinaryController,
    MinJerkTracker, NaiveDelayedController, SampledBangBang1d, StateFeedback,
};
use crate::dynamics::{Dynamics, LinearSystem, MinJerkPlant, PlantState, DEFAULT_STEP};
use crate::linopt::SynthesisOptions;
use crate::tasks::{TaskEntry, TaskKind, TaskSchedule, DEFAULT_REACH_TOL};
use crate::{Error, Result};

/// Which plant to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantSpec {
    /// `x' = −x + u`, `|u| <= 1`.
    ScalarLinear,
    /// `x' = M x + N u` with row-major `m` and `n`, `|u_j| <= 1`.
    Linear { m: Vec<Vec<f64>>, n: Vec<Vec<f64>> },
    /// Planar triple integrator driven by jerk.
    MinJerk,
}

impl PlantSpec {
    pub fn linear_system(&self) -> Result<Option<LinearSystem>> {
        match self {
            PlantSpec::ScalarLinear => Ok(Some(LinearSystem::scalar_decay())),
            PlantSpec::Linear { m, n } => LinearSystem::from_rows(m, n).map(Some),
            PlantSpec::MinJerk => Ok(None),
        }
    }

    pub fn dynamics(&self) -> Result<Arc<dyn Dynamics>> {
        Ok(match self.linear_system()? {
            Some(sys) => Arc::new(sys),
            None => Arc::new(MinJerkPlant),
        })
    }

    fn default_law(&self) -> LawSpec {
        match self {
            PlantSpec::ScalarLinear => LawSpec::SampledSign,
            PlantSpec::Linear { .. } => LawSpec::TimeOptimal,
            PlantSpec::MinJerk => LawSpec::MinJerk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerSpec {
    /// Inner law applied to the forward-model prediction.
    ForwardModel,
    /// Inner law applied to the delayed observation.
    NaiveDelayed,
    /// `u = x*` on the task set `{-1, 1}`.
    MemorylessBinary,
    /// Inner law on an undelayed observation; the scenario's delay is ignored.
    UndelayedReference,
}

/// Undelayed state-feedback law wrapped by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawSpec {
    /// `u = sgn(x* − x)` (scalar plant).
    Sign,
    /// Sign law that lands exactly on the target within a step (scalar plant).
    SampledSign,
    /// Planned bang-bang transfer (linear plants of dimension 1 or 2).
    TimeOptimal,
    /// Receding-horizon minimum jerk (minimum-jerk plant).
    MinJerk,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

/// A closed-loop run: plant, delay, controller, task schedule, grid and duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub plant: PlantSpec,
    pub x0: Vec<f64>,
    /// Observation delay `D` (s).
    pub delay: f64,
    pub controller: ControllerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    pub schedule: Vec<TaskEntry>,
    #[serde(default = "default_step")]
    pub h: f64,
    pub duration: f64,
    /// Reach band for setpoint tasks (∞-norm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reach_tol: Option<f64>,
    /// Output directory for `trajectory.csv` and `summary.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn law(&self) -> LawSpec {
        self.law.unwrap_or_else(|| self.plant.default_law())
    }

    pub fn reach_tol(&self) -> f64 {
        self.reach_tol.unwrap_or(DEFAULT_REACH_TOL)
    }

    /// Delay seen by the controller (zero for the undelayed reference).
    pub fn effective_delay(&self) -> f64 {
        match self.controller {
            ControllerSpec::UndelayedReference => 0.0,
            _ => self.delay,
        }
    }

    pub fn task_schedule(&self) -> Result<TaskSchedule> {
        TaskSchedule::from_entries(self.schedule.clone())
    }

    pub fn initial_state(&self) -> Result<PlantState> {
        PlantState::from_slice(&self.x0)
    }

    /// Checks the whole scenario and reports every violation found.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            errs.push(format!("delay must be finite and >= 0, got {}", self.delay));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            errs.push(format!("step h must be positive, got {}", self.h));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            errs.push(format!("duration must be positive, got {}", self.duration));
        }
        if let Some(tol) = self.reach_tol {
            if !(tol > 0.0) {
                errs.push(format!("reach_tol must be positive, got {tol}"));
            }
        }

        let plant = match self.plant.dynamics() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(format!("plant: {e}"));
                None
            }
        };
        let n = plant.as_ref().map(|p| p.state_dim());
        if let Some(n) = n {
            if self.x0.len() != n {
                errs.push(format!("x0 has {} entries, plant state has {n}", self.x0.len()));
            }
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            errs.push("x0 must be finite".into());
        }

        match self.task_schedule() {
            Err(e) => errs.push(format!("schedule: {e}")),
            Ok(schedule) if schedule.is_empty() => errs.push("schedule has no tasks".into()),
            Ok(schedule) => {
                if self.duration < schedule.last_switch() {
                    errs.push(format!(
                        "duration {} ends before the last switch at {}",
                        self.duration,
                        schedule.last_switch()
                    ));
                }
                for (i, (_, task)) in schedule.switches().iter().enumerate() {
                    let want = match self.plant {
                        PlantSpec::MinJerk => (TaskKind::FixedTime, 2),
                        _ => (TaskKind::Setpoint, n.unwrap_or(task.target.len())),
                    };
                    if (task.kind, task.target.len()) != want {
                        errs.push(format!(
                            "task {i}: plant expects a {:?} task with a {}-entry target, got {:?} with {}",
                            want.0,
                            want.1,
                            task.kind,
                            task.target.len()
                        ));
                    }
                    if self.controller == ControllerSpec::MemorylessBinary
                        && !(task.target.len() == 1 && task.target[0].abs() == 1.0)
                    {
                        errs.push(format!("task {i}: memoryless-binary only accepts targets -1 and 1"));
                    }
                }
            }
        }

        let law = self.law();
        let law_ok = match (&self.plant, law) {
            (PlantSpec::ScalarLinear, LawSpec::Sign | LawSpec::SampledSign | LawSpec::TimeOptimal) => true,
            (PlantSpec::Linear { .. }, LawSpec::TimeOptimal) => n.is_some_and(|n| n <= 2),
            (PlantSpec::MinJerk, LawSpec::MinJerk) => true,
            _ => false,
        };
        if !law_ok {
            errs.push(format!("law {law:?} is not available for this plant"));
        }
        if self.controller == ControllerSpec::MemorylessBinary && self.plant != PlantSpec::ScalarLinear {
            errs.push("memoryless-binary needs the scalar-linear plant".into());
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Builds the controller described by the scenario.
    pub fn build_controller(&self) -> Result<Box<dyn Controller>> {
        let law = self.build_law()?;
        Ok(match self.controller {
            ControllerSpec::ForwardModel => Box::new(make_forward_model_controller(
                self.plant.dynamics()?,
                law,
                self.delay,
            )),
            ControllerSpec::NaiveDelayed | ControllerSpec::UndelayedReference => {
                Box::new(NaiveDelayedController::new(law))
            }
            ControllerSpec::MemorylessBinary => Box::new(MemorylessBinaryController),
        })
    }

    fn build_law(&self) -> Result<Box<dyn StateFeedback>> {
        Ok(match self.law() {
            LawSpec::Sign => Box::new(BangBang1d),
            LawSpec::SampledSign => Box::new(SampledBangBang1d::new(self.h)),
            LawSpec::TimeOptimal => {
                let sys = self
                    .plant
                    .linear_system()?
                    .ok_or_else(|| Error::usage("time-optimal law needs a linear plant"))?;
                let opts = SynthesisOptions {
                    h: self.h,
                    ..SynthesisOptions::default()
                };
                Box::new(LinearTimeOptimal::new(sys, opts))
            }
            LawSpec::MinJerk => Box::new(MinJerkTracker::new(self.h)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_task() -> Scenario {
        Scenario::from_json(
            r#"{"plant":{"kind":"scalar-linear"},"x0":[0],"delay":0.2,"controller":"forward-model",
                "schedule":[{"t":0,"kind":"setpoint","target":[0.5]}],"duration":2}"#,
        )
        .unwrap()
    }

    #[test]
    fn parses_with_defaults() {
        let sc = scalar_task();
        assert_eq!(sc.h, DEFAULT_STEP);
        assert_eq!(sc.law(), LawSpec::SampledSign);
        assert_eq!(sc.reach_tol(), DEFAULT_REACH_TOL);
        sc.validate().unwrap();
        let back = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut sc = scalar_task();
        sc.delay = -1.0;
        sc.x0 = vec![0.0, 1.0];
        sc.law = Some(LawSpec::MinJerk);
        sc.duration = 0.0;
        let Err(Error::Validation(errs)) = sc.validate() else {
            panic!("expected validation error");
        };
        assert_eq!(errs.len(), 4, "{errs:?}");
    }

    #[test]
    fn binary_controller_needs_binary_tasks() {
        let mut sc = scalar_task();
        sc.controller = ControllerSpec::MemorylessBinary;
        assert!(sc.validate().is_err());
        sc.schedule[0].target = vec![-1.0];
        sc.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(Scenario::from_json(r#"{"plant":{"kind":"min-jerk"},"bogus":1}"#).is_err());
    }
}
