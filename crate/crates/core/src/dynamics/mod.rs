//! Plants, fixed-step integration and closed-form linear solutions.

mod expm;
mod integrate;
mod linear;
mod trajectory;

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::{Error, Matrix, Result, Vector};

pub use expm::expm;
pub use integrate::{integrate_plant, integrate_zoh, rk4_step, step_count, DEFAULT_STEP};
pub use linear::{linear_solve, linear_transition, normality_check, NormalityReport};
pub use trajectory::Trajectory;

/// Plant state vector. Never empty, always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState(Vector);

impl PlantState {
    pub fn new(values: Vector) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::usage("plant state must have dimension >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("plant state entries must be finite"));
        }
        Ok(PlantState(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(values))
    }

    /// One-dimensional state. Panics on a non-finite value.
    pub fn scalar(value: f64) -> Self {
        Self::from_slice(&[value]).expect("finite scalar state")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

impl Deref for PlantState {
    type Target = Vector;

    fn deref(&self) -> &Vector {
        &self.0
    }
}

impl fmt::Display for PlantState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Continuous-time plant `x' = f(x, u)`.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    fn derivative(&self, x: &Vector, u: &Vector) -> Vector;

    /// Whether admissible controls are confined to the box `[-1, 1]^m`.
    fn bounded_controls(&self) -> bool {
        true
    }
}

/// Linear plant `x' = M x + N u` with controls in `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    m: Matrix,
    n: Matrix,
}

impl LinearSystem {
    pub fn new(m: Matrix, n: Matrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::usage(format!(
                "state matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if n.nrows() != m.nrows() || n.ncols() == 0 {
            return Err(Error::usage(format!(
                "input matrix must be {}xm with m >= 1, got {}x{}",
                m.nrows(),
                n.nrows(),
                n.ncols()
            )));
        }
        if m.iter().chain(n.iter()).any(|v| !v.is_finite()) {
            return Err(Error::usage("system matrices must be finite"));
        }
        Ok(LinearSystem { m, n })
    }

    /// Row-major construction from nested slices.
    pub fn from_rows(m: &[Vec<f64>], n: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(m)?, matrix_from_rows(n)?)
    }

    /// The scalar plant `x' = -x + u`.
    pub fn scalar_decay() -> Self {
        Self::scalar(-1.0, 1.0)
    }

    pub fn scalar(m: f64, n: f64) -> Self {
        LinearSystem {
            m: Matrix::from_element(1, 1, m),
            n: Matrix::from_element(1, 1, n),
        }
    }

    /// Position/velocity double integrator `p'' = u`.
    pub fn double_integrator() -> Self {
        LinearSystem {
            m: Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            n: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        }
    }

    pub fn state_matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn input_matrix(&self) -> &Matrix {
        &self.n
    }
}

impl Dynamics for LinearSystem {
    fn state_dim(&self) -> usize {
        self.m.nrows()
    }

    fn control_dim(&self) -> usize {
        self.n.ncols()
    }

    fn derivative(&self, x: &Vector, u: &Vector) -> Vector {
        &self.m * x + &self.n * u
    }
}

/// Planar minimum-jerk plant: state `(x, y, x', y', x'', y'')`, controls are the jerks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MinJerkPlant;

impl Dynamics for MinJerkPlant {
    fn state_dim(&self) -> usize {
        6
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn derivative(&self, x: &Vector, u: &Vector) -> Vector {
        Vector::from_column_slice(&[x[2], x[3], x[4], x[5], u[0], u[1]])
    }

    fn bounded_controls(&self) -> bool {
        false
    }
}

type DerivativeFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// Plant defined by a closure.
#[derive(Clone)]
pub struct FnDynamics {
    n: usize,
    m: usize,
    bounded: bool,
    f: Arc<DerivativeFn>,
}

impl FnDynamics {
    pub fn new<F>(n: usize, m: usize, f: F) -> Self
    where
        F: Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    {
        FnDynamics {
            n,
            m,
            bounded: false,
            f: Arc::new(f),
        }
    }

    pub fn bounded(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }
}

impl fmt::Debug for FnDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDynamics")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("bounded", &self.bounded)
            .finish_non_exhaustive()
    }
}

impl Dynamics for FnDynamics {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn control_dim(&self) -> usize {
        self.m
    }

    fn derivative(&self, x: &Vector, u: &Vector) -> Vector {
        (self.f)(x, u)
    }

    fn bounded_controls(&self) -> bool {
        self.bounded
    }
}

/// A control signal read under zero-order hold: the value returned for the
/// start time of an integration step is applied over the whole step.
pub trait ControlSignal {
    fn control_at(&self, t: f64) -> Vector;
}

impl<F> ControlSignal for F
where
    F: Fn(f64) -> Vector,
{
    fn control_at(&self, t: f64) -> Vector {
        self(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantControl(pub Vector);

impl ConstantControl {
    pub fn scalar(value: f64) -> Self {
        ConstantControl(Vector::from_element(1, value))
    }
}

impl ControlSignal for ConstantControl {
    fn control_at(&self, _t: f64) -> Vector {
        self.0.clone()
    }
}

/// Piecewise-constant samples on a uniform grid starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZohControl {
    pub t0: f64,
    pub h: f64,
    pub samples: Vec<Vector>,
}

impl ZohControl {
    pub fn new(t0: f64, h: f64, samples: Vec<Vector>) -> Self {
        ZohControl { t0, h, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time span covered by the samples.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.h
    }
}

impl ControlSignal for ZohControl {
    /// Outside the sampled span the nearest sample is held. Panics when empty.
    fn control_at(&self, t: f64) -> Vector {
        let last = self.samples.len() - 1;
        let k = ((t - self.t0) / self.h + 1e-9).floor();
        let k = if k <= 0.0 { 0 } else { (k as usize).min(last) };
        self.samples[k].clone()
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::usage("matrix rows must be non-empty and of equal length"));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Clamp each component into `[-1, 1]`; reports whether anything changed.
pub fn clamp_to_box(u: &Vector) -> (Vector, bool) {
    let clamped = u.map(|v| v.clamp(-1.0, 1.0));
    let changed = clamped != *u;
    (clamped, changed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plant_state_rejects_bad_values() {
        assert!(PlantState::from_slice(&[]).is_err());
        assert!(PlantState::from_slice(&[1.0, f64::NAN]).is_err());
        assert_eq!(PlantState::scalar(2.0).dim(), 1);
    }

    #[test]
    fn linear_system_dimension_checks() {
        assert!(LinearSystem::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]], &[vec![0.0], vec![1.0]]).is_ok());
        assert!(LinearSystem::from_rows(&[vec![0.0, 1.0]], &[vec![1.0]]).is_err());
        assert!(LinearSystem::from_rows(&[vec![-1.0]], &[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn zoh_holds_samples_per_interval() {
        let z = ZohControl::new(0.0, 0.1, (0..5).map(|k| Vector::from_element(1, k as f64)).collect());
        assert_eq!(z.control_at(0.0)[0], 0.0);
        assert_eq!(z.control_at(0.1)[0], 1.0);
        assert_eq!(z.control_at(0.15)[0], 1.0);
        assert_eq!(z.control_at(0.3)[0], 3.0);
        assert_eq!(z.control_at(9.0)[0], 4.0);
    }

    #[test]
    fn clamp_reports_changes() {
        let (u, changed) = clamp_to_box(&Vector::from_column_slice(&[0.5, -2.0]));
        assert!(changed);
        assert_eq!(u, Vector::from_column_slice(&[0.5, -1.0]));
        assert!(!clamp_to_box(&Vector::from_element(1, 1.0)).1);
    }
}
