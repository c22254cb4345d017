use crate::error::{Error, Result};
use crate::grid::{norm, Point};

/// Piecewise-linear trajectories of the body centers.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPath {
    times: Vec<f64>,
    /// `centers[s][i]`: body `i` at sample `s`, unwrapped.
    centers: Vec<Vec<Point>>,
}

impl BodyPath {
    pub fn new(times: Vec<f64>, centers: Vec<Vec<Point>>) -> Result<Self> {
        if times.len() < 2 || times.len() != centers.len() {
            return Err(Error::Argument(
                "a path needs at least two samples and one center set per sample".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("sample times must increase strictly".into()));
        }
        let n = centers[0].len();
        if n == 0 || centers.iter().any(|c| c.len() != n) {
            return Err(Error::Argument("every sample must list the same bodies".into()));
        }
        Ok(Self { times, centers })
    }

    /// Straight motion `h_i(t) = h_i + (t - t0) Y_i` on `[t0, t1]`.
    pub fn constant_velocity(start: &[Point], velocity: &[Point], t0: f64, t1: f64) -> Result<Self> {
        if start.len() != velocity.len() {
            return Err(Error::Argument("one velocity per body required".into()));
        }
        let end = start
            .iter()
            .zip(velocity)
            .map(|(h, y)| {
                let mut e = *h;
                for k in 0..3 {
                    e[k] += (t1 - t0) * y[k];
                }
                e
            })
            .collect();
        Self::new(vec![t0, t1], vec![start.to_vec(), end])
    }

    pub fn num_bodies(&self) -> usize {
        self.centers[0].len()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn interval(&self, t: f64) -> Result<usize> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::TimeOutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let s = self.times.partition_point(|&x| x <= t);
        Ok(s.saturating_sub(1).min(self.times.len() - 2))
    }

    pub fn centers_at(&self, t: f64) -> Result<Vec<Point>> {
        let s = self.interval(t)?;
        let (t0, t1) = (self.times[s], self.times[s + 1]);
        let theta = (t - t0) / (t1 - t0);
        Ok(self.centers[s]
            .iter()
            .zip(&self.centers[s + 1])
            .map(|(a, b)| {
                let mut p = [0.0; 3];
                for k in 0..3 {
                    p[k] = a[k] + theta * (b[k] - a[k]);
                }
                p
            })
            .collect())
    }

    /// `Y_i = dh_i/dt` on the interval containing `t` (the later one at a sample time).
    pub fn velocities_at(&self, t: f64) -> Result<Vec<Point>> {
        let s = self.interval(t)?;
        let dt = self.times[s + 1] - self.times[s];
        Ok(self.centers[s]
            .iter()
            .zip(&self.centers[s + 1])
            .map(|(a, b)| {
                let mut y = [0.0; 3];
                for k in 0..3 {
                    y[k] = (b[k] - a[k]) / dt;
                }
                y
            })
            .collect())
    }

    /// Lipschitz constant of the trajectories, `max |Y_i|`.
    pub fn lipschitz(&self) -> f64 {
        let mut m: f64 = 0.0;
        for s in 0..self.times.len() - 1 {
            let dt = self.times[s + 1] - self.times[s];
            for (a, b) in self.centers[s].iter().zip(&self.centers[s + 1]) {
                let y = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt, (b[2] - a[2]) / dt];
                m = m.max(norm(&y));
            }
        }
        m
    }
}
