use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::error::{DpError, Result};

const GRID_TOL: f64 = 1e-6;

/// Uniformly sampled history of a generalized force with a fixed read-back delay.
///
/// Samples are pushed at `t0, t0 + dt, t0 + 2 dt, ...`. Reads before `t0` return the
/// configured pre-history value. Between samples the signal is piecewise linear, so a read
/// landing on a sample returns that sample bit-exactly.
#[derive(Debug, Clone)]
pub struct DelayLine {
    delay: f64,
    dt: f64,
    prehistory: Vector3<f64>,
    start: Option<f64>,
    first_index: u64,
    samples: VecDeque<Vector3<f64>>,
    capacity: usize,
}

impl DelayLine {
    pub fn new(delay: f64, dt: f64) -> Result<Self> {
        Self::with_prehistory(delay, dt, Vector3::zeros())
    }

    pub fn with_prehistory(delay: f64, dt: f64, prehistory: Vector3<f64>) -> Result<Self> {
        if !(delay >= 0.0) || !delay.is_finite() {
            return Err(DpError::Config(format!("delay must be non-negative, got {delay}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DpError::Config(format!("sample period must be positive, got {dt}")));
        }
        let capacity = (delay / dt).ceil() as usize + 2;
        Ok(Self {
            delay,
            dt,
            prehistory,
            start: None,
            first_index: 0,
            samples: VecDeque::with_capacity(capacity + 1),
            capacity,
        })
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn sample_time(&self, index: u64) -> f64 {
        self.start.unwrap_or(0.0) + index as f64 * self.dt
    }

    fn next_index(&self) -> u64 {
        self.first_index + self.samples.len() as u64
    }

    /// Time of the newest stored sample.
    pub fn newest_time(&self) -> Option<f64> {
        self.start.map(|_| self.sample_time(self.next_index() - 1))
    }

    pub fn newest(&self) -> Option<Vector3<f64>> {
        self.samples.back().copied()
    }

    /// Append the sample for time `t`, which must be the next grid point.
    pub fn push(&mut self, t: f64, value: Vector3<f64>) -> Result<()> {
        match self.start {
            None => self.start = Some(t),
            Some(_) => {
                let expected = self.sample_time(self.next_index());
                if (t - expected).abs() > GRID_TOL * self.dt {
                    return Err(DpError::DelayOutOfOrder {
                        t,
                        newest: self.newest_time().unwrap_or(f64::NEG_INFINITY),
                    });
                }
            }
        }
        self.samples.push_back(value);
        while self.samples.len() > self.capacity {
            self.samples.pop_front();
            self.first_index += 1;
        }
        Ok(())
    }

    /// Overwrite the newest sample, e.g. once the value for the current instant is final.
    pub fn update_newest(&mut self, value: Vector3<f64>) -> Result<()> {
        match self.samples.back_mut() {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(DpError::DelayNotPopulated {
                requested: 0.0,
                newest: f64::NEG_INFINITY,
            }),
        }
    }

    /// Signal value at an arbitrary instant inside the stored window.
    pub fn value_at(&self, time: f64) -> Result<Vector3<f64>> {
        let Some(start) = self.start else {
            return Ok(self.prehistory);
        };
        let pos = (time - start) / self.dt;
        if pos < -GRID_TOL {
            return Ok(self.prehistory);
        }
        let newest = self.next_index() - 1;
        if pos > newest as f64 + GRID_TOL {
            return Err(DpError::DelayNotPopulated {
                requested: time,
                newest: self.sample_time(newest),
            });
        }
        let nearest = pos.round();
        if (pos - nearest).abs() <= GRID_TOL {
            return self.sample(nearest.max(0.0) as u64, time);
        }
        let lo = pos.floor() as u64;
        let frac = pos - lo as f64;
        let a = self.sample(lo, time)?;
        let b = self.sample(lo + 1, time)?;
        Ok(a + (b - a) * frac)
    }

    fn sample(&self, index: u64, time: f64) -> Result<Vector3<f64>> {
        if index < self.first_index {
            return Err(DpError::DelayNotPopulated {
                requested: time,
                newest: self.sample_time(index),
            });
        }
        self.samples
            .get((index - self.first_index) as usize)
            .copied()
            .ok_or(DpError::DelayNotPopulated {
                requested: time,
                newest: self.sample_time(index),
            })
    }

    /// Value at `t - delay` and the trapezoidal integral of the signal over `[t - delay, t]`.
    pub fn read_and_integral(&self, t: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let newest = self.newest_time().ok_or(DpError::DelayNotPopulated {
            requested: t,
            newest: f64::NEG_INFINITY,
        })?;
        if t > newest + GRID_TOL * self.dt {
            return Err(DpError::DelayNotPopulated { requested: t, newest });
        }
        let from = t - self.delay;
        let delayed = self.value_at(from)?;
        Ok((delayed, self.integral(from, t)?))
    }

    fn integral(&self, from: f64, to: f64) -> Result<Vector3<f64>> {
        let mut acc = Vector3::zeros();
        if to - from <= 0.0 {
            return Ok(acc);
        }
        let start = self.start.unwrap_or(0.0);
        let mut a = from;
        if a < start {
            let b = to.min(start);
            acc += self.prehistory * (b - a);
            a = start;
            if a >= to {
                return Ok(acc);
            }
        }
        // Walk grid segments between a and to.
        let mut left_value = self.value_at(a)?;
        loop {
            let pos = (a - start) / self.dt;
            let mut next_idx = pos.floor() + 1.0;
            if (next_idx - pos).abs() <= GRID_TOL {
                next_idx += 1.0;
            }
            let grid = start + next_idx * self.dt;
            let b = if grid >= to - GRID_TOL * self.dt { to } else { grid };
            let right_value = self.value_at(b)?;
            acc += (left_value + right_value) * (0.5 * (b - a));
            if b >= to {
                break;
            }
            a = b;
            left_value = right_value;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn filled(delay: f64, dt: f64, until: f64, f: impl Fn(f64) -> Vector3<f64>) -> DelayLine {
        let mut line = DelayLine::new(delay, dt).unwrap();
        let n = (until / dt).round() as usize;
        for k in 0..=n {
            let t = k as f64 * dt;
            line.push(t, f(t)).unwrap();
        }
        line
    }

    #[test]
    fn constant_history() {
        let c = Vector3::new(0.3, -0.1, 0.05);
        let line = filled(2.0, 0.02, 10.0, |_| c);
        let (d, i) = line.read_and_integral(10.0).unwrap();
        assert_eq!(d, c);
        assert_relative_eq!(i, c * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn early_read_returns_prehistory() {
        let line = filled(2.0, 0.02, 1.0, |_| Vector3::new(1.0, 1.0, 1.0));
        let (d, _) = line.read_and_integral(1.0).unwrap();
        assert_eq!(d, Vector3::zeros());
    }

    #[test]
    fn linear_signal_is_exact() {
        let line = filled(2.0, 0.02, 4.0, |t| Vector3::new(t, 0.0, 0.0));
        let (d, i) = line.read_and_integral(4.0).unwrap();
        assert_relative_eq!(d, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(i, Vector3::new(6.0, 0.0, 0.0), epsilon = 1e-10);
    }

    #[test]
    fn zero_delay_reads_newest() {
        let line = filled(0.0, 0.1, 3.0, |t| Vector3::new(t * t, 1.0, -t));
        let (d, i) = line.read_and_integral(3.0).unwrap();
        assert_eq!(d, line.newest().unwrap());
        assert_eq!(i, Vector3::zeros());
    }

    #[test]
    fn delayed_read_is_bit_exact_sample() {
        let f = |t: f64| Vector3::new((0.7 * t).sin(), t.cos(), 0.1 * t);
        let line = filled(2.0, 0.02, 7.0, f);
        let (d, _) = line.read_and_integral(7.0).unwrap();
        // sample 250 is exactly the value pushed at 5.0 s
        assert_eq!(d, f(250.0 * 0.02));
    }

    #[test]
    fn non_grid_delay_interpolates() {
        let line = filled(0.25, 0.1, 2.0, |t| Vector3::new(3.0 * t + 1.0, 0.0, 0.0));
        let (d, i) = line.read_and_integral(2.0).unwrap();
        assert_relative_eq!(d[0], 3.0 * 1.75 + 1.0, epsilon = 1e-12);
        // integral of 3t+1 over [1.75, 2]
        assert_relative_eq!(i[0], 1.5 * (4.0 - 1.75 * 1.75) + 0.25, epsilon = 1e-12);
    }

    #[test]
    fn reading_ahead_of_history_fails() {
        let line = filled(2.0, 0.02, 1.0, |_| Vector3::zeros());
        assert!(matches!(
            line.read_and_integral(1.5),
            Err(DpError::DelayNotPopulated { .. })
        ));
    }

    #[test]
    fn off_grid_push_fails() {
        let mut line = DelayLine::new(1.0, 0.1).unwrap();
        line.push(0.0, Vector3::zeros()).unwrap();
        assert!(line.push(0.25, Vector3::zeros()).is_err());
    }

    #[test]
    fn buffer_is_bounded() {
        let line = filled(2.0, 0.02, 50.0, |t| Vector3::new(t, 0.0, 0.0));
        assert!(line.samples.len() <= line.capacity());
        assert!(line.capacity() > (2.0f64 / 0.02).ceil() as usize);
    }
}
