//! Closed-loop scenario runner, the forward-model necessity counterexample,
//! and the file formats used by the command-line tool.
//!
//! A scenario file is JSON:
//!
//! ```json
//! {
//!   "plant": {"kind": "scalar-linear"},
//!   "x0": [0.0],
//!   "delay": 0.2,
//!   "controller": "forward-model",
//!   "schedule": [{"t": 0.0, "kind": "setpoint", "target": [0.5]}],
//!   "h": 0.001,
//!   "duration": 2.0
//! }
//! ```
//!
//! `plant.kind` is `scalar-linear`, `linear` (with row-major `m` and `n`) or
//! `min-jerk`. `controller` is `forward-model`, `naive-delayed`,
//! `memoryless-binary` or `undelayed-reference`. Optional fields: `name`,
//! `law` (`sign`, `sampled-sign`, `time-optimal`, `min-jerk`), `reach_tol`,
//! `output`. Fixed-time tasks carry `"T"`.

mod analysis;
mod scenario;
mod sim;

pub use analysis::{
    binary_task_set_check, necessity_counterexample, nsctp_scan, write_reachset_csv, CounterexampleReport,
    NsctpProblem, NsctpVerdict, NsctpWitness,
};
pub use scenario::{ControllerSpec, LawSpec, PlantSpec, Scenario};
pub use sim::{
    plan_cost, run_simulation, scalar_optimal_path, scalar_optimal_time, simulate_with, write_outputs, SimResult,
    SimSummary,
};
