//! Minimum-jerk planning and the separability analysis of initial jerks.
//!
//! Each axis of the planar point-mass plant is a triple integrator driven by
//! its jerk. The rest-terminal minimum-jerk solution is a quintic per axis,
//! and its jerk at time zero is
//!
//! ```text
//! δ0 = 60/T³ · x_T − 60/T³ · x0 − 36/T² · x_d0 − 9/T · x_dd0
//! ```
//!
//! Two initial states yield the same `δ0` for every target exactly when
//! `60 Δx + 36 T Δx_d + 9 T² Δx_dd = 0`. For a fixed `T` that holds on a whole
//! hyperplane of pairs; letting `T` vary always separates them.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::PlantState;
use crate::{Error, Result, Vector};

/// Position, velocity and acceleration of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisState {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
}

impl AxisState {
    pub const fn new(pos: f64, vel: f64, acc: f64) -> Self {
        AxisState { pos, vel, acc }
    }

    pub const fn rest(pos: f64) -> Self {
        AxisState::new(pos, 0.0, 0.0)
    }

    fn check(&self) -> Result<()> {
        if [self.pos, self.vel, self.acc].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::usage("axis state must be finite"))
        }
    }

    /// Splits a planar plant state `(x, y, x', y', x'', y'')` into its two axes.
    pub fn split_planar(state: &Vector) -> [AxisState; 2] {
        assert_eq!(state.len(), 6, "planar minimum-jerk state has 6 entries");
        [
            AxisState::new(state[0], state[2], state[4]),
            AxisState::new(state[1], state[3], state[5]),
        ]
    }

    pub fn join_planar(axes: &[AxisState; 2]) -> PlantState {
        let [x, y] = axes;
        PlantState::from_slice(&[x.pos, y.pos, x.vel, y.vel, x.acc, y.acc])
            .expect("finite axis states")
    }
}

/// Coefficients `a0..a5` of `a0 + a1 t + ... + a5 t⁵`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticCoeffs(pub [f64; 6]);

impl QuinticCoeffs {
    /// `order`-th derivative at `t` (orders above 5 vanish).
    pub fn derivative(&self, order: usize, t: f64) -> f64 {
        let mut acc = 0.0;
        for k in (order..6).rev() {
            let falling: f64 = (k - order + 1..=k).map(|j| j as f64).product();
            acc = acc * t + self.0[k] * falling;
        }
        acc
    }

    pub fn position(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    pub fn jerk(&self, t: f64) -> f64 {
        self.derivative(3, t)
    }

    pub fn axis_state(&self, t: f64) -> AxisState {
        AxisState::new(self.derivative(0, t), self.derivative(1, t), self.derivative(2, t))
    }
}

/// A planar move to a rest target in fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinJerkTask {
    pub target: [f64; 2],
    pub horizon: f64,
}

impl MinJerkTask {
    pub fn new(target: [f64; 2], horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::usage(format!("horizon must be positive, got {horizon}")));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("target must be finite"));
        }
        Ok(MinJerkTask { target, horizon })
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::usage(format!("horizon must be positive, got {horizon}")))
    }
}

/// The unique quintic from `init` to the rest state at `target` in time `horizon`.
pub fn solve_quintic(init: AxisState, target: f64, horizon: f64) -> Result<QuinticCoeffs> {
    check_horizon(horizon)?;
    init.check()?;
    let t = horizon;
    let (a0, a1, a2) = (init.pos, init.vel, init.acc / 2.0);
    let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
    #[rustfmt::skip]
    let lhs = Matrix3::new(
        t3,        t4,         t5,
        3.0 * t2,  4.0 * t3,   5.0 * t4,
        6.0 * t,   12.0 * t2,  20.0 * t3,
    );
    let rhs = Vector3::new(
        target - a0 - a1 * t - a2 * t2,
        -a1 - 2.0 * a2 * t,
        -2.0 * a2,
    );
    let high = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Precondition(format!("boundary system singular for T = {horizon}")))?;
    Ok(QuinticCoeffs([a0, a1, a2, high[0], high[1], high[2]]))
}

/// Jerk at time zero of the minimum-jerk move.
pub fn initial_jerk(init: AxisState, target: f64, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    let t = horizon;
    let t3 = t * t * t;
    Ok(60.0 / t3 * target - 60.0 / t3 * init.pos - 36.0 / (t * t) * init.vel - 9.0 / t * init.acc)
}

fn distinct(a: &AxisState, b: &AxisState) -> Result<()> {
    if a == b {
        return Err(Error::usage("pair analysis needs two distinct states"));
    }
    a.check()?;
    b.check()
}

/// Whether `a` and `b` get the same initial jerk for every target at horizon `T`.
pub fn nsctp_fixed_t(a: AxisState, b: AxisState, horizon: f64) -> Result<bool> {
    distinct(&a, &b)?;
    check_horizon(horizon)?;
    let t = horizon;
    let terms = [
        60.0 * (a.pos - b.pos),
        36.0 * t * (a.vel - b.vel),
        9.0 * t * t * (a.acc - b.acc),
    ];
    let sum: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|v| v.abs()).sum();
    Ok(sum.abs() <= 1e-9 * scale)
}

/// Horizons at which a pair's initial jerks coincide, and a horizon at which they don't.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatingTime {
    /// Positive roots of `9 Δx_dd T² + 36 Δx_d T + 60 Δx`, ascending.
    pub roots: Vec<f64>,
    pub chosen: f64,
    /// `δ0(a) − δ0(b)` at the chosen horizon (independent of the target).
    pub jerk_gap: f64,
}

/// Finds a horizon separating `a` from `b`: `max(1, 2 · largest positive root)`.
pub fn separating_time(a: AxisState, b: AxisState) -> Result<SeparatingTime> {
    distinct(&a, &b)?;
    let qa = 9.0 * (a.acc - b.acc);
    let qb = 36.0 * (a.vel - b.vel);
    let qc = 60.0 * (a.pos - b.pos);

    let mut roots: Vec<f64> = real_roots(qa, qb, qc)
        .into_iter()
        .filter(|r| *r > 0.0)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup();

    let chosen = roots.last().map_or(1.0, |r| (2.0 * r).max(1.0));
    let jerk_gap = initial_jerk(a, 0.0, chosen)? - initial_jerk(b, 0.0, chosen)?;
    Ok(SeparatingTime {
        roots,
        chosen,
        jerk_gap,
    })
}

/// Real roots of `a t² + b t + c`; degenerate cases fall back to lower degree.
fn real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // avoid cancellation
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Receding-horizon minimum-jerk feedback: re-plan from `current` over the
/// remaining horizon and return the initial jerk of each axis.
pub fn minjerk_control(current: &[AxisState; 2], task: &MinJerkTask, elapsed: f64) -> Result<[f64; 2]> {
    if elapsed >= task.horizon {
        return Err(Error::HorizonExpired {
            elapsed,
            horizon: task.horizon,
        });
    }
    let remaining = task.horizon - elapsed;
    Ok([
        initial_jerk(current[0], task.target[0], remaining)?,
        initial_jerk(current[1], task.target[1], remaining)?,
    ])
}

/// Open-loop planar minimum-jerk plan.
#[derive(Debug, Clone, PartialEq)]
pub struct MinJerkPlan {
    pub axes: [QuinticCoeffs; 2],
    pub horizon: f64,
}

impl MinJerkPlan {
    pub fn new(init: &[AxisState; 2], task: &MinJerkTask) -> Result<Self> {
        Ok(MinJerkPlan {
            axes: [
                solve_quintic(init[0], task.target[0], task.horizon)?,
                solve_quintic(init[1], task.target[1], task.horizon)?,
            ],
            horizon: task.horizon,
        })
    }

    pub fn state_at(&self, t: f64) -> [AxisState; 2] {
        [self.axes[0].axis_state(t), self.axes[1].axis_state(t)]
    }

    pub fn jerk_at(&self, t: f64) -> [f64; 2] {
        [self.axes[0].jerk(t), self.axes[1].jerk(t)]
    }

    /// `t,x,y,xd,yd,xdd,ydd,jerk_x,jerk_y` sampled every `h`, endpoint included.
    pub fn write_csv<W: Write>(&self, mut out: W, h: f64) -> Result<()> {
        if !(h > 0.0) {
            return Err(Error::usage("sample step must be positive"));
        }
        writeln!(out, "t,x,y,xd,yd,xdd,ydd,jerk_x,jerk_y")?;
        let steps = crate::dynamics::step_count(self.horizon, h);
        for k in 0..=steps {
            let t = if k == steps { self.horizon } else { k as f64 * h };
            let [x, y] = self.state_at(t);
            let [jx, jy] = self.jerk_at(t);
            let row = [t, x.pos, y.pos, x.vel, y.vel, x.acc, y.acc, jx, jy];
            let row: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    /// Full 6x6 boundary-condition solve, independent of the reduced 3x3 route.
    fn dense_quintic(init: AxisState, target: f64, horizon: f64) -> [f64; 6] {
        let row = |order: usize, t: f64| -> Vec<f64> {
            (0..6)
                .map(|k| {
                    if k < order {
                        0.0
                    } else {
                        let falling: f64 = (k - order + 1..=k).map(|j| j as f64).product();
                        falling * t.powi((k - order) as i32)
                    }
                })
                .collect()
        };
        let mut rows = Vec::new();
        for order in 0..3 {
            rows.extend(row(order, 0.0));
        }
        for order in 0..3 {
            rows.extend(row(order, horizon));
        }
        let a = DMatrix::from_row_slice(6, 6, &rows);
        let b = DVector::from_column_slice(&[init.pos, init.vel, init.acc, target, 0.0, 0.0]);
        let x = a.full_piv_lu().solve(&b).unwrap();
        [x[0], x[1], x[2], x[3], x[4], x[5]]
    }

    #[test]
    fn oracle_agrees_on_rest_to_rest() {
        let dense = dense_quintic(AxisState::rest(0.0), 1.0, 1.0);
        let expected = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (d, e) in dense.iter().zip(expected) {
            assert!((d - e).abs() < 1e-10);
        }
    }

    #[test]
    fn quintic_examples() {
        let c = solve_quintic(AxisState::rest(0.0), 1.0, 1.0).unwrap();
        for (a, e) in c.0.iter().zip([0.0, 0.0, 0.0, 10.0, -15.0, 6.0]) {
            assert!((a - e).abs() < 1e-10, "{c:?}");
        }
        let c = solve_quintic(AxisState::rest(0.7), 0.7, 3.0).unwrap();
        assert!(c.0[1..].iter().all(|a| a.abs() < 1e-12));
        assert_eq!(c.0[0], 0.7);
        let c = solve_quintic(AxisState::rest(0.0), 1.0, 2.0).unwrap();
        assert!((c.0[3] - 10.0 / 8.0).abs() < 1e-10);
        assert!((c.0[4] + 15.0 / 16.0).abs() < 1e-10);
        assert!((c.0[5] - 6.0 / 32.0).abs() < 1e-10);
        assert!(solve_quintic(AxisState::rest(0.0), 1.0, 0.0).is_err());
        assert!(solve_quintic(AxisState::rest(0.0), 1.0, -1.0).is_err());
    }

    #[test]
    fn initial_jerk_examples() {
        assert!((initial_jerk(AxisState::rest(0.0), 1.0, 1.0).unwrap() - 60.0).abs() < 1e-9);
        assert_eq!(initial_jerk(AxisState::rest(2.0), 2.0, 1.5).unwrap(), 0.0);
        assert!((initial_jerk(AxisState::new(0.0, 1.0, 0.0), 0.0, 1.0).unwrap() + 36.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_horizon_pairs() {
        let a = AxisState::rest(0.0);
        assert!(nsctp_fixed_t(a, AxisState::new(3.0, -5.0, 0.0), 1.0).unwrap());
        assert!(!nsctp_fixed_t(a, AxisState::rest(1.0), 1.0).unwrap());
        assert!(nsctp_fixed_t(a, a, 1.0).is_err());
    }

    #[test]
    fn separating_time_examples() {
        let a = AxisState::rest(0.0);
        let sep = separating_time(a, AxisState::new(3.0, -5.0, 0.0)).unwrap();
        assert_eq!(sep.roots.len(), 1);
        assert!((sep.roots[0] - 1.0).abs() < 1e-12);
        assert_eq!(sep.chosen, 2.0);
        // a − b = (−3, 5, 0): −60·(−3)/8 − 36·5/4 = −22.5
        let direct = initial_jerk(a, 0.0, 2.0).unwrap()
            - initial_jerk(AxisState::new(3.0, -5.0, 0.0), 0.0, 2.0).unwrap();
        assert_eq!(sep.jerk_gap, direct);
        assert!((sep.jerk_gap.abs() - 22.5).abs() < 1e-9);

        let sep = separating_time(AxisState::rest(1.0), a).unwrap();
        assert!(sep.roots.is_empty());
        assert_eq!(sep.chosen, 1.0);
        assert!((sep.jerk_gap + 60.0).abs() < 1e-12);

        let sep = separating_time(AxisState::new(0.0, 0.0, 1.0), a).unwrap();
        assert!(sep.roots.is_empty());
        assert_eq!(sep.chosen, 1.0);

        assert!(separating_time(a, a).is_err());
    }

    #[test]
    fn receding_control_examples() {
        let task = MinJerkTask::new([1.0, 0.0], 1.0).unwrap();
        let rest = [AxisState::rest(0.0), AxisState::rest(0.0)];
        let u = minjerk_control(&rest, &task, 0.0).unwrap();
        assert!((u[0] - 60.0).abs() < 1e-9);
        assert_eq!(u[1], 0.0);

        let at_target = [AxisState::rest(1.0), AxisState::rest(0.0)];
        assert_eq!(minjerk_control(&at_target, &task, 0.0).unwrap(), [0.0, 0.0]);

        let plan = MinJerkPlan::new(&rest, &task).unwrap();
        let mid = plan.state_at(0.5);
        let u = minjerk_control(&mid, &task, 0.5).unwrap();
        assert!((u[0] + 30.0).abs() < 1e-4);

        assert!(matches!(
            minjerk_control(&rest, &task, 1.0),
            Err(Error::HorizonExpired { .. })
        ));
    }

    #[test]
    fn plan_csv_has_endpoints() {
        let task = MinJerkTask::new([1.0, -1.0], 1.0).unwrap();
        let plan = MinJerkPlan::new(&[AxisState::rest(0.0), AxisState::rest(0.0)], &task).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf, 0.25).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,y,xd,yd,xdd,ydd,jerk_x,jerk_y");
        assert_eq!(lines.len(), 6);
        let last: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
        assert!((last[1] - 1.0).abs() < 1e-12 && (last[2] + 1.0).abs() < 1e-12);
    }

    fn axis() -> impl Strategy<Value = AxisState> {
        (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(p, v, a)| AxisState::new(p, v, a))
    }

    proptest! {
        #[test]
        fn boundary_conditions_hold(init in axis(), target in -5.0f64..5.0, horizon in 0.1f64..10.0) {
            let c = solve_quintic(init, target, horizon).unwrap();
            let scale = 1.0 + target.abs() + init.pos.abs() + init.vel.abs() + init.acc.abs();
            prop_assert!((c.derivative(0, 0.0) - init.pos).abs() <= 1e-9 * scale);
            prop_assert!((c.derivative(1, 0.0) - init.vel).abs() <= 1e-9 * scale);
            prop_assert!((c.derivative(2, 0.0) - init.acc).abs() <= 1e-9 * scale);
            prop_assert!((c.derivative(0, horizon) - target).abs() <= 1e-9 * scale);
            prop_assert!(c.derivative(1, horizon).abs() <= 1e-9 * scale);
            prop_assert!(c.derivative(2, horizon).abs() <= 1e-9 * scale);
            let dense = dense_quintic(init, target, horizon);
            for (a, d) in c.0.iter().zip(dense) {
                prop_assert!((a - d).abs() <= 1e-9 * scale * (1.0 + d.abs()));
            }
            let jerk = initial_jerk(init, target, horizon).unwrap();
            prop_assert!((jerk - 6.0 * c.0[3]).abs() <= 1e-9 * (1.0 + jerk.abs()));
        }

        #[test]
        fn replanning_is_idempotent(init in axis(), target in -5.0f64..5.0, horizon in 0.5f64..5.0, frac in 0.0f64..0.9) {
            let c = solve_quintic(init, target, horizon).unwrap();
            let t0 = frac * horizon;
            let replanned = solve_quintic(c.axis_state(t0), target, horizon - t0).unwrap();
            let mut worst = 0.0f64;
            for k in 0..=50 {
                let s = (horizon - t0) * k as f64 / 50.0;
                worst = worst.max((replanned.position(s) - c.position(t0 + s)).abs());
            }
            prop_assert!(worst <= 1e-6, "worst {}", worst);
        }

        #[test]
        fn fixed_horizon_gap_ignores_target(
            a in axis(), dv in -5.0f64..5.0, da in -5.0f64..5.0, horizon in 0.2f64..5.0,
            targets in prop::collection::vec(-10.0f64..10.0, 20),
        ) {
            // choose b so the pair is inseparable at this horizon
            let dp = -(36.0 * horizon * dv + 9.0 * horizon * horizon * da) / 60.0;
            let b = AxisState::new(a.pos - dp, a.vel - dv, a.acc - da);
            prop_assume!(a != b);
            prop_assert!(nsctp_fixed_t(a, b, horizon).unwrap());
            for x_t in targets {
                let gap = initial_jerk(a, x_t, horizon).unwrap() - initial_jerk(b, x_t, horizon).unwrap();
                prop_assert!(gap.abs() <= 1e-9 * (1.0 + 60.0 * x_t.abs() / horizon.powi(3)));
            }
        }

        #[test]
        fn separation_is_complete(a in axis(), b in axis()) {
            prop_assume!(a != b);
            let sep = separating_time(a, b).unwrap();
            prop_assert!(sep.chosen > 0.0);
            prop_assert!(sep.roots.iter().all(|r| (r - sep.chosen).abs() > 1e-9));
            prop_assert!(sep.jerk_gap.abs() >= 1e-6);
        }
    }
}
