use super::{expm, step_count, ControlSignal, Dynamics, LinearSystem, PlantState};
use crate::{Error, Matrix, Result, Vector};

/// Rank threshold relative to the largest singular value.
const RANK_TOLERANCE: f64 = 1e-9;

/// State transition matrix `X_t = exp(t M)`.
pub fn linear_transition(sys: &LinearSystem, t: f64) -> Matrix {
    expm(&(sys.state_matrix() * t))
}

/// Variation-of-constants solution `x_t = X_t x0 + X_t ∫ X_s^{-1} N u_s ds`.
///
/// The integral is taken by Simpson's rule on each integrator step, with the
/// control held at its step-start value, so the result is directly comparable
/// with [`super::integrate_plant`] on the same grid.
pub fn linear_solve(
    sys: &LinearSystem,
    x0: &PlantState,
    u: &dyn ControlSignal,
    t: f64,
    h: f64,
) -> Result<PlantState> {
    if x0.dim() != sys.state_dim() {
        return Err(Error::usage("initial state dimension does not match the system"));
    }
    if !(h > 0.0) || !t.is_finite() || t < 0.0 {
        return Err(Error::usage(format!("invalid horizon {t} or step {h}")));
    }
    let m = sys.state_matrix();
    let n = sys.input_matrix();
    let inv_transition = |s: f64| expm(&(m * -s));

    let mut integral = Vector::zeros(sys.state_dim());
    let steps = step_count(t, h);
    for k in 0..steps {
        let a = k as f64 * h;
        let b = if k + 1 == steps { t } else { (k + 1) as f64 * h };
        let uk = u.control_at(a);
        if uk.len() != sys.control_dim() {
            return Err(Error::usage("control dimension does not match the system"));
        }
        let drive = n * uk;
        let mid = 0.5 * (a + b);
        let weights = inv_transition(a) + inv_transition(mid) * 4.0 + inv_transition(b);
        integral += weights * &drive * ((b - a) / 6.0);
    }
    let xt = linear_transition(sys, t) * (x0.as_vector() + integral);
    PlantState::new(xt)
}

/// Per-column normality verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    pub columns: Vec<bool>,
    pub normal: bool,
}

/// Checks that `{N^j, M N^j, ..., M^{n-1} N^j}` has full rank for every input column `j`.
pub fn normality_check(sys: &LinearSystem) -> NormalityReport {
    let m = sys.state_matrix();
    let dim = sys.state_dim();
    let columns: Vec<bool> = sys
        .input_matrix()
        .column_iter()
        .map(|col| {
            let mut krylov = Matrix::zeros(dim, dim);
            let mut v: Vector = col.into_owned();
            for i in 0..dim {
                krylov.set_column(i, &v);
                v = m * v;
            }
            let sv = krylov.singular_values();
            let max = sv.max();
            let min = sv.min();
            max > 0.0 && min > RANK_TOLERANCE * max
        })
        .collect();
    let normal = columns.iter().all(|&c| c);
    NormalityReport { columns, normal }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_plant, ConstantControl};
    use proptest::prelude::*;

    #[test]
    fn transition_examples() {
        let sys = LinearSystem::scalar_decay();
        assert!((linear_transition(&sys, 1.0)[(0, 0)] - 0.367_879_441_171_442_3).abs() < 1e-10);
        let di = LinearSystem::double_integrator();
        assert_eq!(linear_transition(&di, 0.0), Matrix::identity(2, 2));
        assert_eq!(
            linear_transition(&di, 2.0),
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])
        );
    }

    #[test]
    fn solve_examples() {
        let sys = LinearSystem::scalar_decay();
        let x = linear_solve(&sys, &PlantState::scalar(0.0), &ConstantControl::scalar(1.0), 2f64.ln(), 1e-3)
            .unwrap();
        assert!((x[0] - 0.5).abs() < 1e-8);
        let x = linear_solve(&sys, &PlantState::scalar(1.0), &ConstantControl::scalar(0.0), 1.0, 1e-3).unwrap();
        assert!((x[0] - (-1f64).exp()).abs() < 1e-8);
        let x0 = PlantState::from_slice(&[0.3, -0.2]).unwrap();
        let di = LinearSystem::double_integrator();
        let x = linear_solve(&di, &x0, &ConstantControl::scalar(1.0), 0.0, 1e-3).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn normality_examples() {
        assert!(normality_check(&LinearSystem::scalar_decay()).normal);
        assert!(normality_check(&LinearSystem::double_integrator()).normal);
        let zero_col = LinearSystem::from_rows(
            &[vec![0.0, 1.0], vec![0.0, 0.0]],
            &[vec![0.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let report = normality_check(&zero_col);
        assert_eq!(report.columns, vec![true, false]);
        assert!(!report.normal);
        // actuating only the position of a double integrator loses the velocity
        let uncontrollable = LinearSystem::from_rows(
            &[vec![0.0, 1.0], vec![0.0, 0.0]],
            &[vec![1.0], vec![0.0]],
        )
        .unwrap();
        assert!(!normality_check(&uncontrollable).normal);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rk4_agrees_with_closed_form(
            m in proptest::collection::vec(-1.0f64..1.0, 4),
            n in proptest::collection::vec(-1.0f64..1.0, 2),
            x0 in proptest::collection::vec(-1.0f64..1.0, 2),
            u in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let sys = LinearSystem::new(Matrix::from_row_slice(2, 2, &m), Matrix::from_column_slice(2, 1, &n)).unwrap();
            let x0 = PlantState::from_slice(&x0).unwrap();
            // four equal pieces over [0, 1] on a 1e-3 grid
            let control = move |t: f64| Vector::from_element(1, u[((t * 4.0 + 1e-9) as usize).min(3)]);
            let rk4 = integrate_plant(&sys, &x0, &control, 0.0, 1.0, 1e-3).unwrap();
            let closed = linear_solve(&sys, &x0, &control, 1.0, 1e-3).unwrap();
            prop_assert!((rk4.final_state().as_vector() - closed.as_vector()).amax() <= 1e-9);
        }
    }
}
