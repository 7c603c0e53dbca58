//! Brownian paths with generator `Delta`: every coordinate increment over a
//! step `dt` is `N(0, 2 dt)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, Length, Point3, TracePolyline};
use crate::rng::RngStream;
use crate::stats::Estimate;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("path did not exit within {max_steps} steps")]
    MaxStepsExceeded {
        max_steps: usize,
        partial: Box<TracePolyline>,
    },
    #[error("start point {0:?} is not inside the domain")]
    StartOutside(Point3),
    #[error("start mode {mode:?} needs {needs}")]
    UnsupportedStart { mode: StartMode, needs: &'static str },
    #[error("invalid path configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    pub max_steps: usize,
}

impl PathConfig {
    /// `dt = 1e-4 R^2` for a domain of radius `R`.
    pub fn for_radius(radius: f64) -> Self {
        Self {
            dt: 1e-4 * radius * radius,
            max_steps: 50_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(StochasticError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(StochasticError::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

fn gaussian_step<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Point3 {
    Point3::new(
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Run a path from `start` until it first leaves `domain`. The last vertex is
/// the crossing point on the boundary, found by clipping the final step.
pub fn sample_trace_with<R: Rng + ?Sized>(
    start: Point3,
    domain: &Domain,
    cfg: &PathConfig,
    rng: &mut R,
) -> Result<TracePolyline, StochasticError> {
    cfg.validate()?;
    if !domain.contains(start) {
        return Err(StochasticError::StartOutside(start));
    }
    let sigma = (2.0 * cfg.dt).sqrt();
    let mut vertices = vec![start];
    let mut x = start;
    for _ in 0..cfg.max_steps {
        let next = x + gaussian_step(rng, sigma);
        if domain.contains(next) {
            vertices.push(next);
            x = next;
            continue;
        }
        let s = domain.exit_parameter(x, next);
        vertices.push(x + (next - x) * s);
        return Ok(TracePolyline::new(vertices, cfg.dt)?);
    }
    if vertices.len() < 2 {
        vertices.push(x);
    }
    Err(StochasticError::MaxStepsExceeded {
        max_steps: cfg.max_steps,
        partial: Box::new(TracePolyline::new(vertices, cfg.dt)?),
    })
}

pub fn sample_trace(
    start: Point3,
    domain: &Domain,
    cfg: &PathConfig,
    stream: &RngStream,
) -> Result<TracePolyline, StochasticError> {
    sample_trace_with(start, domain, cfg, &mut stream.rng())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Uniform over a finite cylinder.
    UniformCylinder,
    /// Uniform on the axis of a finite cylinder.
    Axis,
    /// Centre of a ball, or the origin of a cylinder.
    Center,
}

/// Uniform point of the disc of radius `r`, by rejection from the square.
pub fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, r: f64) -> (f64, f64) {
    loop {
        let u: f64 = rng.random_range(-1.0..1.0);
        let v: f64 = rng.random_range(-1.0..1.0);
        if u * u + v * v < 1.0 {
            return (r * u, r * v);
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Point3 {
    let [x, y, z]: [f64; 3] = rng.sample(rand_distr::UnitSphere);
    Point3::new(x, y, z)
}

pub fn sample_start<R: Rng + ?Sized>(
    mode: StartMode,
    domain: &Domain,
    rng: &mut R,
) -> Result<Point3, StochasticError> {
    match (mode, domain) {
        (StartMode::Center, Domain::Ball(b)) => Ok(b.center()),
        (StartMode::Center, Domain::Cylinder(_)) => Ok(Point3::ORIGIN),
        (StartMode::UniformCylinder | StartMode::Axis, Domain::Cylinder(c)) => {
            let Length::Finite(l) = c.length() else {
                return Err(StochasticError::UnsupportedStart {
                    mode,
                    needs: "a finite cylinder",
                });
            };
            let x1 = loop {
                // Open interval: resample the endpoint.
                let u = rng.random_range(-0.5 * l..0.5 * l);
                if u > -0.5 * l {
                    break u;
                }
            };
            if mode == StartMode::Axis {
                return Ok(Point3::new(x1, 0.0, 0.0));
            }
            let (y, z) = uniform_in_disc(rng, c.radius());
            Ok(Point3::new(x1, y, z))
        }
        (_, Domain::Ball(_)) => Err(StochasticError::UnsupportedStart {
            mode,
            needs: "a cylinder",
        }),
    }
}

/// Expected range of a generator-`Delta` path on `[0, t]`: `4 sqrt(t / pi)`.
pub fn expected_range(t: f64) -> f64 {
    4.0 * (t / PI).sqrt()
}

/// Second moment of the range of a generator-`Delta` path on `[0, t]`:
/// `8 ln 2 t` (twice the standard-Brownian value `4 ln 2 t`).
pub fn expected_range_squared(t: f64) -> f64 {
    8.0 * std::f64::consts::LN_2 * t
}

/// Comparison of a Monte Carlo second moment with a candidate closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub candidate: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub agrees: bool,
}

impl MomentCheck {
    /// Agreement within `3 SE + budget`.
    pub fn new(candidate: f64, est: &Estimate, budget: f64) -> Self {
        Self {
            candidate,
            estimate: est.mean,
            std_error: est.std_error,
            agrees: (est.mean - candidate).abs() <= 3.0 * est.std_error + budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeStats {
    pub t: f64,
    pub dt: f64,
    pub mean_range: Estimate,
    pub mean_squared_range: Estimate,
}

/// Range `max - min` of `n` one-dimensional paths on `[0, t]`.
pub fn range_statistics(t: f64, n: usize, cfg: &PathConfig, stream: &RngStream) -> Result<RangeStats, StochasticError> {
    cfg.validate()?;
    if !(t.is_finite() && t > 0.0) || n == 0 {
        return Err(StochasticError::InvalidConfig(format!("need t > 0 and n >= 1, got t={t}, n={n}")));
    }
    let steps = (t / cfg.dt).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let sigma = (2.0 * dt).sqrt();
    let ranges: Vec<f64> = (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut rng = stream.substream(i as u64).rng();
            let (mut x, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..steps {
                x += sigma * rng.sample::<f64, _>(StandardNormal);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            hi - lo
        })
        .collect();
    let squares: Vec<f64> = ranges.iter().map(|r| r * r).collect();
    Ok(RangeStats {
        t,
        dt,
        mean_range: Estimate::from_samples(&ranges, stream.seed),
        mean_squared_range: Estimate::from_samples(&squares, stream.seed),
    })
}
