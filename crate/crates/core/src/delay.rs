//! Delayed observation of the plant and the controller's control memory.
//!
//! Both buffers live on the integrator grid: times are snapped to the nearest
//! multiple of the step `h`, and a delay `D` becomes `round(D / h)` steps.

use std::collections::VecDeque;

use crate::dynamics::{PlantState, ZohControl};
use crate::{Error, Result, Vector};

fn check_grid(delay: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::usage(format!("grid step must be positive, got {h}")));
    }
    if !(delay >= 0.0 && delay.is_finite()) {
        return Err(Error::usage(format!("delay must be finite and >= 0, got {delay}")));
    }
    Ok((delay / h).round() as usize)
}

fn to_step(t: f64, h: f64) -> Result<i64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::usage(format!("time must be finite and >= 0, got {t}")));
    }
    Ok((t / h).round() as i64)
}

/// Returns `x_{(t - D)+}`: the plant state `D` seconds ago, or the initial
/// state while `t < D`.
#[derive(Debug, Clone)]
pub struct ObservationChannel {
    h: f64,
    delay_steps: usize,
    history: VecDeque<(i64, PlantState)>,
}

impl ObservationChannel {
    pub fn new(delay: f64, h: f64) -> Result<Self> {
        let delay_steps = check_grid(delay, h)?;
        Ok(ObservationChannel {
            h,
            delay_steps,
            history: VecDeque::with_capacity(delay_steps + 1),
        })
    }

    /// Delay actually applied, after snapping to the grid.
    pub fn delay(&self) -> f64 {
        self.delay_steps as f64 * self.h
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Stores the plant state at time `t`. Times must not go backwards.
    pub fn record(&mut self, t: f64, state: PlantState) -> Result<()> {
        let step = to_step(t, self.h)?;
        match self.history.back() {
            Some(&(last, _)) if step < last => {
                return Err(Error::usage(format!(
                    "observation time went backwards: {t} after {}",
                    last as f64 * self.h
                )));
            }
            Some(&(last, _)) if step == last => {
                self.history.pop_back();
            }
            _ => {}
        }
        self.history.push_back((step, state));
        let keep_from = step - self.delay_steps as i64;
        while self.history.len() > 1 && self.history[0].0 < keep_from {
            // keep the first entry until something at or before keep_from exists
            if self.history[1].0 <= keep_from {
                self.history.pop_front();
            } else {
                break;
            }
        }
        Ok(())
    }

    /// Delayed state at time `t` (nearest grid point).
    pub fn observe(&self, t: f64) -> Result<PlantState> {
        let Some(&(latest, _)) = self.history.back() else {
            return Err(Error::usage("no plant history recorded yet"));
        };
        let step = to_step(t, self.h)?;
        if step > latest {
            return Err(Error::usage(format!(
                "history only recorded up to t = {}, asked for t = {t}",
                latest as f64 * self.h
            )));
        }
        // before the delay has elapsed the channel shows the state at t = 0
        let target = (step - self.delay_steps as i64).max(0);
        let idx = self.history.partition_point(|(s, _)| *s <= target);
        if idx == 0 {
            return Err(Error::usage(format!("state at t = {t} minus delay was evicted")));
        }
        Ok(self.history[idx - 1].1.clone())
    }

    /// Number of stored states.
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}

/// Buffer of the controller's own past controls, `x^c(α) = u_{t-α}` for `0 <= α <= D`.
///
/// Each sample covers one grid interval `[s, s + h)`. The buffer keeps a
/// wall clock `now`, advanced by the simulation; samples older than
/// `now - D` are evicted, so at most `ceil(D / h) + 1` are held.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMemory {
    h: f64,
    window_steps: usize,
    now: i64,
    samples: VecDeque<(i64, Vector)>,
}

impl ControlMemory {
    pub fn new(window: f64, h: f64) -> Result<Self> {
        let window_steps = check_grid(window, h)?;
        Ok(ControlMemory {
            h,
            window_steps,
            now: 0,
            samples: VecDeque::with_capacity(window_steps + 1),
        })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn window(&self) -> f64 {
        self.window_steps as f64 * self.h
    }

    pub fn window_steps(&self) -> usize {
        self.window_steps
    }

    /// Current wall time of the memory.
    pub fn now(&self) -> f64 {
        self.now as f64 * self.h
    }

    pub fn now_step(&self) -> i64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Seconds of history a query may reach back: `min(now, D)`.
    pub fn available(&self) -> f64 {
        self.available_steps() as f64 * self.h
    }

    fn available_steps(&self) -> usize {
        (self.now.max(0) as usize).min(self.window_steps)
    }

    /// Moves the wall clock forward without recording.
    pub fn advance(&mut self, t: f64) -> Result<()> {
        let step = to_step(t, self.h)?;
        if step < self.now {
            return Err(Error::usage(format!(
                "memory clock cannot go back from {} to {t}",
                self.now()
            )));
        }
        self.now = step;
        self.evict();
        Ok(())
    }

    /// Stores `u` as the control for `[t, t + h)` and moves the clock to `t`.
    pub fn record_control(&mut self, t: f64, u: Vector) -> Result<()> {
        let step = to_step(t, self.h)?;
        let last = self.samples.back().map(|(s, _)| *s);
        if step < self.now || last.is_some_and(|s| step < s) {
            return Err(Error::usage(format!(
                "control recorded at {t} is earlier than memory time {}",
                self.now()
            )));
        }
        if last == Some(step) {
            self.samples.pop_back();
        }
        self.samples.push_back((step, u));
        self.now = step;
        self.evict();
        Ok(())
    }

    fn evict(&mut self) {
        let oldest = self.now - self.window_steps as i64;
        while self.samples.front().is_some_and(|(s, _)| *s < oldest) {
            self.samples.pop_front();
        }
    }

    fn sample_at(&self, step: i64) -> Option<&Vector> {
        let idx = self.samples.partition_point(|(s, _)| *s < step);
        self.samples.get(idx).filter(|(s, _)| *s == step).map(|(_, u)| u)
    }

    fn alpha_steps(&self, alpha: f64) -> Result<usize> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::usage(format!("lag must be finite and >= 0, got {alpha}")));
        }
        let steps = (alpha / self.h).round() as usize;
        if steps > self.available_steps() {
            return Err(Error::usage(format!(
                "lag {alpha} exceeds buffered history of {} s",
                self.available()
            )));
        }
        Ok(steps)
    }

    /// `u_{now - α}`, snapped to the grid.
    pub fn query(&self, alpha: f64) -> Result<Vector> {
        let back = self.alpha_steps(alpha)?;
        let step = self.now - back as i64;
        self.sample_at(step).cloned().ok_or_else(|| {
            Error::usage(format!("no control recorded for t = {}", step as f64 * self.h))
        })
    }

    /// Controls applied on `[now - to_alpha, now - from_alpha)`, re-indexed as a
    /// forward-time signal starting at 0.
    pub fn memory_segment(&self, from_alpha: f64, to_alpha: f64) -> Result<ZohControl> {
        if from_alpha > to_alpha {
            return Err(Error::usage(format!(
                "segment bounds reversed: {from_alpha} > {to_alpha}"
            )));
        }
        let near = self.alpha_steps(from_alpha)?;
        let far = self.alpha_steps(to_alpha)?;
        let samples = (self.now - far as i64..self.now - near as i64)
            .map(|step| {
                self.sample_at(step).cloned().ok_or_else(|| {
                    Error::usage(format!("no control recorded for t = {}", step as f64 * self.h))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ZohControl::new(0.0, self.h, samples))
    }
}
