use super::{clamp_to_box, ControlSignal, Dynamics, PlantState, Trajectory};
use crate::{Error, Result, Vector};

/// Default integrator step (s).
pub const DEFAULT_STEP: f64 = 1e-3;

/// Number of steps covering `span` with step `h`; the last step may be shorter.
pub fn step_count(span: f64, h: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    (span / h - 1e-9).ceil().max(1.0) as usize
}

/// One classical Runge-Kutta step with the control held constant.
pub fn rk4_step(dynamics: &dyn Dynamics, x: &Vector, u: &Vector, h: f64) -> Vector {
    let k1 = dynamics.derivative(x, u);
    let k2 = dynamics.derivative(&(x + &k1 * (h / 2.0)), u);
    let k3 = dynamics.derivative(&(x + &k2 * (h / 2.0)), u);
    let k4 = dynamics.derivative(&(x + &k3 * h), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn check_control(dynamics: &dyn Dynamics, u: Vector, clamped: &mut bool) -> Result<Vector> {
    if u.len() != dynamics.control_dim() {
        return Err(Error::usage(format!(
            "control has dimension {}, plant expects {}",
            u.len(),
            dynamics.control_dim()
        )));
    }
    if !dynamics.bounded_controls() {
        return Ok(u);
    }
    let (u, changed) = clamp_to_box(&u);
    *clamped |= changed;
    Ok(u)
}

/// Fixed-step RK4 solution of the plant over `[t0, t1]`.
///
/// The control is sampled at the start of each step and held over it. Bounded
/// plants have out-of-box controls clamped, which sets `Trajectory::clamped`.
pub fn integrate_plant(
    dynamics: &dyn Dynamics,
    x0: &PlantState,
    u: &dyn ControlSignal,
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<Trajectory> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::usage(format!("step must be positive, got {h}")));
    }
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::usage(format!("invalid time span [{t0}, {t1}]")));
    }
    if x0.dim() != dynamics.state_dim() {
        return Err(Error::usage(format!(
            "initial state has dimension {}, plant expects {}",
            x0.dim(),
            dynamics.state_dim()
        )));
    }

    let steps = step_count(t1 - t0, h);
    let mut traj = Trajectory::with_capacity(dynamics.control_dim(), steps + 1);
    traj.push_state(t0, x0.clone());
    let mut x = x0.as_vector().clone();
    let mut clamped = false;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        let uk = check_control(dynamics, u.control_at(t), &mut clamped)?;
        x = rk4_step(dynamics, &x, &uk, t_next - t);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t_next });
        }
        traj.push_step(uk, t_next, PlantState::new(x.clone())?);
    }
    traj.clamped = clamped;
    Ok(traj)
}

/// Final state after applying `controls` one per step of length `h`.
///
/// Performs exactly the same arithmetic as stepping the plant one sample at a
/// time, so a replay of recorded controls reproduces the recorded states bit
/// for bit.
pub fn integrate_zoh(
    dynamics: &dyn Dynamics,
    x0: &Vector,
    controls: impl IntoIterator<Item = Vector>,
    h: f64,
) -> Result<Vector> {
    let mut x = x0.clone();
    let mut clamped = false;
    for (k, u) in controls.into_iter().enumerate() {
        let u = check_control(dynamics, u, &mut clamped)?;
        x = rk4_step(dynamics, &x, &u, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: (k + 1) as f64 * h });
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ConstantControl, FnDynamics, LinearSystem};

    #[test]
    fn first_order_step_response() {
        let sys = LinearSystem::scalar_decay();
        let traj = integrate_plant(
            &sys,
            &PlantState::scalar(0.0),
            &ConstantControl::scalar(1.0),
            0.0,
            2f64.ln(),
            1e-4,
        )
        .unwrap();
        assert!((traj.final_state()[0] - 0.5).abs() < 1e-8);
        assert_eq!(*traj.times.last().unwrap(), 2f64.ln());
        assert_eq!(traj.states.len(), step_count(2f64.ln(), 1e-4) + 1);
        assert_eq!(traj.controls.len(), traj.states.len() - 1);
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let zero = FnDynamics::new(1, 1, |_, _| Vector::zeros(1));
        let traj = integrate_plant(
            &zero,
            &PlantState::scalar(3.7),
            &ConstantControl::scalar(0.3),
            1.0,
            4.0,
            0.01,
        )
        .unwrap();
        assert!(traj.states.iter().all(|s| s[0] == 3.7));
    }

    #[test]
    fn exponential_decay() {
        let sys = LinearSystem::scalar_decay();
        let traj = integrate_plant(
            &sys,
            &PlantState::scalar(1.0),
            &ConstantControl::scalar(0.0),
            0.0,
            1.0,
            1e-3,
        )
        .unwrap();
        assert!((traj.final_state()[0] - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn shortened_last_step() {
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(1.0, 0.25), 4);
        assert_eq!(step_count(0.0, 0.1), 0);
        let sys = LinearSystem::scalar_decay();
        let traj = integrate_plant(
            &sys,
            &PlantState::scalar(1.0),
            &ConstantControl::scalar(0.0),
            0.0,
            1.0,
            0.3,
        )
        .unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_eq!(traj.times[4], 1.0);
    }

    #[test]
    fn divergence_names_time() {
        let blowup = FnDynamics::new(1, 1, |x, _| x.map(|v| v * v * 1e6));
        let err = integrate_plant(
            &blowup,
            &PlantState::scalar(1.0),
            &ConstantControl::scalar(0.0),
            0.0,
            1.0,
            0.01,
        )
        .unwrap_err();
        match err {
            Error::Divergence { time } => assert!(time > 0.0 && time <= 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bounded_plants_clamp() {
        let sys = LinearSystem::scalar_decay();
        let traj = integrate_plant(
            &sys,
            &PlantState::scalar(0.0),
            &ConstantControl::scalar(3.0),
            0.0,
            0.1,
            0.01,
        )
        .unwrap();
        assert!(traj.clamped);
        assert!(traj.controls.iter().all(|u| u[0] == 1.0));
    }

    #[test]
    fn rk4_error_ratio_under_halving() {
        let sys = LinearSystem::scalar_decay();
        let err = |h: f64| {
            let traj = integrate_plant(
                &sys,
                &PlantState::scalar(0.0),
                &ConstantControl::scalar(1.0),
                0.0,
                2.0,
                h,
            )
            .unwrap();
            (traj.final_state()[0] - (1.0 - (-2f64).exp())).abs()
        };
        let ratio = err(0.2) / err(0.1);
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }
}
