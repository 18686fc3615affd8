use std::io::Write;

use super::PlantState;
use crate::{Result, Vector};

/// Time-indexed plant history on a uniform grid.
///
/// `controls[k]` is the control held on `[times[k], times[k + 1])`, so there is
/// one control fewer than states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PlantState>,
    pub controls: Vec<Vector>,
    pub control_dim: usize,
    /// Set when any control was clamped into the admissible box.
    pub clamped: bool,
}

impl Trajectory {
    pub fn with_capacity(control_dim: usize, points: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(points),
            states: Vec::with_capacity(points),
            controls: Vec::with_capacity(points.saturating_sub(1)),
            control_dim,
            clamped: false,
        }
    }

    pub(crate) fn push_state(&mut self, t: f64, x: PlantState) {
        self.times.push(t);
        self.states.push(x);
    }

    /// Appends the control applied from the current last point and the state it led to.
    pub(crate) fn push_step(&mut self, u: Vector, t: f64, x: PlantState) {
        self.controls.push(u);
        self.push_state(t, x);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &PlantState {
        self.states.last().expect("trajectory has at least one point")
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, PlantState::dim)
    }

    /// Index of the grid point nearest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        match self.times.binary_search_by(|probe| probe.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if t - self.times[i - 1] <= self.times[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Control in effect at grid point `k` (the last interval's control is repeated at the end).
    pub fn control_at_point(&self, k: usize) -> Option<&Vector> {
        self.controls.get(k.min(self.controls.len().saturating_sub(1)))
    }

    /// Writes `t,x1..xn,u1..um` with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.state_dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=self.control_dim).map(|j| format!("u{j}")));
        writeln!(out, "{}", header.join(","))?;
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![fmt_sig17(*t)];
            row.extend(x.iter().map(|v| fmt_sig17(*v)));
            match self.control_at_point(k) {
                Some(u) => row.extend(u.iter().map(|v| fmt_sig17(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), self.control_dim)),
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Scientific notation with 17 significant digits.
pub(crate) fn fmt_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let mut t = Trajectory::with_capacity(1, 3);
        t.push_state(0.0, PlantState::scalar(0.0));
        t.push_step(Vector::from_element(1, 1.0), 0.5, PlantState::scalar(0.25));
        t.push_step(Vector::from_element(1, -1.0), 1.0, PlantState::scalar(0.1));
        t
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,u1");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0");
        // final row repeats the last interval's control
        assert!(lines[3].ends_with("-1.0000000000000000e0"));
        let parsed: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, 0.1);
    }

    #[test]
    fn nearest_index() {
        let t = sample();
        assert_eq!(t.index_at(-1.0), 0);
        assert_eq!(t.index_at(0.2), 0);
        assert_eq!(t.index_at(0.3), 1);
        assert_eq!(t.index_at(1.0), 2);
        assert_eq!(t.index_at(7.0), 2);
    }
}
