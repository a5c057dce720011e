use super::Vec3;
use crate::error::{NavError, Result};

/// Maximum C0 mismatch tolerated between consecutive pieces.
pub const CONTINUITY_TOL: f64 = 1e-6;

/// A single Bézier piece over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierPiece {
    pub control_points: Vec<Vec3>,
    pub duration: f64,
}

fn de_casteljau(points: &[Vec3], u: f64) -> Vec3 {
    let mut work: Vec<Vec3> = points.to_vec();
    let n = work.len();
    for level in 1..n {
        for i in 0..n - level {
            work[i] = work[i] * (1.0 - u) + work[i + 1] * u;
        }
    }
    work[0]
}

/// Control points of the derivative curve with respect to time.
fn hodograph(points: &[Vec3], duration: f64) -> Vec<Vec3> {
    let d = (points.len() - 1) as f64;
    points.windows(2).map(|w| (w[1] - w[0]) * (d / duration)).collect()
}

impl BezierPiece {
    pub fn new(control_points: Vec<Vec3>, duration: f64) -> Result<Self> {
        if control_points.len() < 2 {
            return Err(NavError::InvalidTrajectory("piece degree must be at least 1".into()));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(NavError::InvalidTrajectory(format!("piece duration {duration} must be > 0")));
        }
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(NavError::InvalidTrajectory("non-finite control point".into()));
        }
        Ok(Self { control_points, duration })
    }

    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn first(&self) -> Vec3 {
        self.control_points[0]
    }

    pub fn last(&self) -> Vec3 {
        *self.control_points.last().unwrap()
    }

    /// Velocity control points (degree - 1 curve).
    pub fn velocity_points(&self) -> Vec<Vec3> {
        hodograph(&self.control_points, self.duration)
    }

    /// Acceleration control points; empty for linear pieces.
    pub fn acceleration_points(&self) -> Vec<Vec3> {
        let v = self.velocity_points();
        if v.len() < 2 {
            Vec::new()
        } else {
            hodograph(&v, self.duration)
        }
    }

    /// Position, velocity and acceleration at local time `tau` in `[0, duration]`.
    pub fn evaluate_local(&self, tau: f64) -> (Vec3, Vec3, Vec3) {
        let u = (tau / self.duration).clamp(0.0, 1.0);
        let pos = de_casteljau(&self.control_points, u);
        let vpts = self.velocity_points();
        let vel = de_casteljau(&vpts, u);
        let acc = if vpts.len() >= 2 {
            de_casteljau(&hodograph(&vpts, self.duration), u)
        } else {
            Vec3::ZERO
        };
        (pos, vel, acc)
    }
}

/// Time-parameterized chain of Bézier pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory {
    pub pieces: Vec<BezierPiece>,
    pub start_time: f64,
}

/// A sampled trajectory state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajSample {
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
}

impl PiecewiseTrajectory {
    pub fn new(pieces: Vec<BezierPiece>, start_time: f64) -> Result<Self> {
        if pieces.is_empty() {
            return Err(NavError::InvalidTrajectory("no pieces".into()));
        }
        for (i, w) in pieces.windows(2).enumerate() {
            let gap = (w[0].last() - w[1].first()).norm();
            if gap > CONTINUITY_TOL {
                return Err(NavError::InvalidTrajectory(format!(
                    "C0 gap {gap:e} between pieces {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(Self { pieces, start_time })
    }

    /// Zero-velocity trajectory holding `pos` for `duration` seconds.
    pub fn hold(pos: Vec3, start_time: f64, duration: f64) -> Self {
        Self {
            pieces: vec![BezierPiece { control_points: vec![pos, pos], duration }],
            start_time,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.total_duration()
    }

    pub fn start_point(&self) -> Vec3 {
        self.pieces[0].first()
    }

    pub fn end_point(&self) -> Vec3 {
        self.pieces.last().unwrap().last()
    }

    /// Exact state at `t`. A boundary time belongs to the earlier piece.
    pub fn evaluate(&self, t: f64) -> Result<TrajSample> {
        let end = self.end_time();
        let eps = 1e-9;
        if t < self.start_time - eps || t > end + eps || !t.is_finite() {
            return Err(NavError::Domain { t, start: self.start_time, end });
        }
        let mut local = (t - self.start_time).max(0.0);
        let last = self.pieces.len() - 1;
        for (i, piece) in self.pieces.iter().enumerate() {
            if local <= piece.duration || i == last {
                let (pos, vel, acc) = piece.evaluate_local(local.min(piece.duration));
                return Ok(TrajSample { pos, vel, acc });
            }
            local -= piece.duration;
        }
        unreachable!()
    }

    /// Samples with `t` clamped to the domain; outside it the trajectory is
    /// treated as resting at its endpoint.
    pub fn sample_clamped(&self, t: f64) -> TrajSample {
        if t <= self.start_time {
            TrajSample { pos: self.start_point(), ..Default::default() }
        } else if t >= self.end_time() {
            TrajSample { pos: self.end_point(), ..Default::default() }
        } else {
            self.evaluate(t).expect("t inside domain")
        }
    }

    /// One line per piece: `duration cp0x cp0y cp0z cp1x ...`.
    pub fn to_log_lines(&self) -> String {
        let mut out = String::new();
        for piece in &self.pieces {
            out.push_str(&format!("{}", piece.duration));
            for p in &piece.control_points {
                out.push_str(&format!(" {} {} {}", p.x, p.y, p.z));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_log_lines(text: &str, start_time: f64) -> Result<Self> {
        let mut pieces = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| NavError::Parse { line: lineno + 1, msg: e.to_string() })?;
            if nums.len() < 7 || (nums.len() - 1) % 3 != 0 {
                return Err(NavError::Parse {
                    line: lineno + 1,
                    msg: format!("expected duration plus 3k coordinates, got {} numbers", nums.len()),
                });
            }
            let cps = nums[1..].chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
            pieces.push(BezierPiece::new(cps, nums[0])?);
        }
        Self::new(pieces, start_time)
    }
}
