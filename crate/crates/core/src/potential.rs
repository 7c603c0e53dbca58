//! Walk-on-spheres estimators: torsion values (mean exit times), the torsion
//! deficit caused by an obstacle, plane-hitting probabilities in a cylinder,
//! and Newtonian capacity.
//!
//! Each jump goes to a uniform point on the largest sphere that avoids both the
//! domain boundary and the obstacle. For generator `Delta` in three dimensions
//! the mean exit time of a ball of radius `r` from its centre is `r^2 / 6`,
//! which is what the exit-time accumulator adds per jump.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BallSpec, CylinderSpec, Domain, Length, Point3, TracePolyline};
use crate::rng::RngStream;
use crate::spectral::{rigidity_cylinder, SpectralError};
use crate::stats::Estimate;
use crate::stochastic::{sample_trace_with, uniform_direction, uniform_in_disc, PathConfig, StochasticError};

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("walk did not terminate within {0} jumps")]
    MaxJumps(usize),
    #[error("invalid walk-on-spheres configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WosConfig {
    /// Absorption distance to the domain boundary or the obstacle.
    pub eps_shell: f64,
    /// Thickening radius of a trace obstacle.
    pub eps_tube: f64,
    /// Launch sphere radius for capacity; defaults to the obstacle's bounding
    /// radius plus `eps_shell`.
    pub launch_radius: Option<f64>,
    pub max_jumps: usize,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self {
            eps_shell: 1e-4,
            eps_tube: 0.02,
            launch_radius: None,
            max_jumps: 1_000_000,
        }
    }
}

impl WosConfig {
    pub fn validate(&self, with_obstacle: bool) -> Result<(), PotentialError> {
        let bad = |m: String| Err(PotentialError::InvalidConfig(m));
        if !(self.eps_shell.is_finite() && self.eps_shell > 0.0) {
            return bad(format!("eps_shell must be positive, got {}", self.eps_shell));
        }
        if !(self.eps_tube.is_finite() && self.eps_tube > 0.0) {
            return bad(format!("eps_tube must be positive, got {}", self.eps_tube));
        }
        if with_obstacle && self.eps_shell > self.eps_tube / 4.0 {
            return bad(format!(
                "eps_shell ({}) must not exceed eps_tube / 4 ({})",
                self.eps_shell,
                self.eps_tube / 4.0
            ));
        }
        if let Some(rho) = self.launch_radius {
            if !(rho.is_finite() && rho > 0.0) {
                return bad(format!("launch_radius must be positive, got {rho}"));
            }
        }
        if self.max_jumps == 0 {
            return bad("max_jumps must be at least 1".into());
        }
        Ok(())
    }

    /// Same configuration with every length multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            eps_shell: self.eps_shell * a,
            eps_tube: self.eps_tube * a,
            launch_radius: self.launch_radius.map(|r| r * a),
            max_jumps: self.max_jumps,
        }
    }
}

/// A compact set walkers are absorbed on.
pub trait Obstacle: Sync {
    /// Distance from `x` to the set (non-positive inside). Exact when below
    /// `cap`; otherwise any value `>= cap`.
    fn distance(&self, x: Point3, cap: f64) -> f64;

    /// Centre and radius of a ball containing the set, if bounded and nonempty.
    fn bounding_sphere(&self) -> Option<(Point3, f64)>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoObstacle;

impl Obstacle for NoObstacle {
    fn distance(&self, _: Point3, _: f64) -> f64 {
        f64::INFINITY
    }

    fn bounding_sphere(&self) -> Option<(Point3, f64)> {
        None
    }
}

/// A solid ball, the analytic obstacle.
#[derive(Debug, Clone, Copy)]
pub struct BallObstacle(pub BallSpec);

impl Obstacle for BallObstacle {
    fn distance(&self, x: Point3, _: f64) -> f64 {
        x.distance(self.0.center()) - self.0.radius()
    }

    fn bounding_sphere(&self) -> Option<(Point3, f64)> {
        Some((self.0.center(), self.0.radius()))
    }
}

/// Closed `eps`-neighbourhood of a trace polyline.
#[derive(Debug, Clone, Copy)]
pub struct Tube<'a> {
    trace: &'a TracePolyline,
    eps: f64,
}

impl<'a> Tube<'a> {
    pub fn new(trace: &'a TracePolyline, eps: f64) -> Self {
        Self { trace, eps }
    }

    pub fn trace(&self) -> &TracePolyline {
        self.trace
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl Obstacle for Tube<'_> {
    fn distance(&self, x: Point3, cap: f64) -> f64 {
        self.trace.distance_within(x, cap + self.eps) - self.eps
    }

    fn bounding_sphere(&self) -> Option<(Point3, f64)> {
        let c = self.trace.bounds().center();
        Some((c, self.trace.circumradius(c) + self.eps))
    }
}

/// Where a walk ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Absorption {
    Boundary,
    Obstacle,
}

/// Walk from `x` until within `eps_shell` of the domain boundary or the
/// obstacle, adding `r^2 / 6` to `acc` per jump. `x` is left at the end point.
pub fn walk<R: Rng + ?Sized>(
    x: &mut Point3,
    domain: &Domain,
    obstacle: &dyn Obstacle,
    cfg: &WosConfig,
    rng: &mut R,
    acc: &mut f64,
) -> Result<Absorption, PotentialError> {
    for _ in 0..cfg.max_jumps {
        let d_dom = domain.boundary_distance(*x);
        if d_dom < cfg.eps_shell {
            return Ok(Absorption::Boundary);
        }
        let d_obs = obstacle.distance(*x, d_dom);
        if d_obs < cfg.eps_shell {
            return Ok(Absorption::Obstacle);
        }
        let r = d_dom.min(d_obs);
        *acc += r * r / 6.0;
        *x = *x + uniform_direction(rng) * r;
    }
    Err(PotentialError::MaxJumps(cfg.max_jumps))
}

/// One sample of the torsion function of `domain` minus the obstacle at `x`.
/// Points outside the domain or inside the obstacle give 0.
pub fn wos_exit_time_sample<R: Rng + ?Sized>(
    x: Point3,
    domain: &Domain,
    obstacle: &dyn Obstacle,
    cfg: &WosConfig,
    rng: &mut R,
) -> Result<f64, PotentialError> {
    if !domain.contains(x) || obstacle.distance(x, 0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut p = x;
    let mut acc = 0.0;
    walk(&mut p, domain, obstacle, cfg, rng, &mut acc)?;
    Ok(acc)
}

fn parallel_estimate<F>(n: usize, stream: &RngStream, f: F) -> Result<Estimate, PotentialError>
where
    F: Fn(&RngStream) -> Result<f64, PotentialError> + Sync,
{
    if n == 0 {
        return Err(PotentialError::InvalidConfig("sample count must be at least 1".into()));
    }
    let samples = (0..n)
        .into_par_iter()
        .with_min_len(32)
        .map(|i| f(&stream.substream(i as u64)))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Estimate::from_samples(&samples, stream.seed))
}

/// Mean of `n` exit-time samples at `x`.
pub fn torsion_value(
    x: Point3,
    domain: &Domain,
    obstacle: &dyn Obstacle,
    cfg: &WosConfig,
    n: usize,
    stream: &RngStream,
) -> Result<Estimate, PotentialError> {
    parallel_estimate(n, stream, |s| wos_exit_time_sample(x, domain, obstacle, cfg, &mut s.rng()))
}

/// Torsion function of the infinite cylinder `C_R`: `(R^2 - |x'|^2) / 4`.
pub fn torsion_infinite_cylinder(x: Point3, radius: f64) -> f64 {
    let (_, xp) = x.split();
    (0.25 * (radius * radius - xp.norm_squared())).max(0.0)
}

/// How the obstacle-free torsion function is evaluated at a hit point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// The domain is an infinite cylinder: use the closed form.
    InfiniteCylinder,
    /// Continue the walk from the hit point ignoring the obstacle.
    Continuation,
}

/// One sample of `v_D(x) - v_{D-K}(x)`.
///
/// The two torsion functions differ by the harmonic function that equals
/// `v_D` on the obstacle, so the sample is `v_D(X)` at the absorption point
/// `X` when the walk is absorbed on the obstacle and 0 otherwise.
pub fn deficit_sample<R: Rng + ?Sized>(
    x: Point3,
    domain: &Domain,
    obstacle: &dyn Obstacle,
    reference: Reference,
    cfg: &WosConfig,
    rng: &mut R,
) -> Result<f64, PotentialError> {
    if !domain.contains(x) {
        return Ok(0.0);
    }
    let mut p = x;
    let mut ignored = 0.0;
    if walk(&mut p, domain, obstacle, cfg, rng, &mut ignored)? == Absorption::Boundary {
        return Ok(0.0);
    }
    match (reference, domain) {
        (Reference::InfiniteCylinder, Domain::Cylinder(c)) if c.finite_length().is_none() => {
            Ok(torsion_infinite_cylinder(p, c.radius()))
        }
        (Reference::InfiniteCylinder, _) => Err(PotentialError::InvalidConfig(
            "the closed-form reference needs an infinite cylinder".into(),
        )),
        (Reference::Continuation, _) => {
            let mut acc = 0.0;
            walk(&mut p, domain, &NoObstacle, cfg, rng, &mut acc)?;
            Ok(acc)
        }
    }
}

/// Uniform point of the slab `a < x1 < b` of a cylinder of radius `r`.
fn point_in_slab<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, r: f64) -> Point3 {
    let x1 = a + (b - a) * rng.random::<f64>();
    let (y, z) = uniform_in_disc(rng, r);
    Point3::new(x1, y, z)
}

/// Estimate of `int_D (v_D - v_{D-K}) dx`, the rigidity removed by the
/// obstacle, for a cylinder `D`.
///
/// `n_window` points are uniform in the slab `window` (clipped to `D`);
/// `n_rest` points cover the remainder of a finite cylinder. With an infinite
/// cylinder the remainder is skipped, so the window must contain the region
/// where the deficit is non-negligible.
#[allow(clippy::too_many_arguments)]
pub fn deficit_integral(
    domain: &CylinderSpec,
    obstacle: &dyn Obstacle,
    reference: Reference,
    window: (f64, f64),
    n_window: usize,
    n_rest: usize,
    cfg: &WosConfig,
    stream: &RngStream,
) -> Result<f64, PotentialError> {
    let r = domain.radius();
    let area = PI * r * r;
    let dom = Domain::Cylinder(*domain);
    let (half, finite) = match domain.length() {
        Length::Finite(l) => (0.5 * l, true),
        Length::Infinite => (f64::INFINITY, false),
    };
    let a = window.0.max(-half);
    let b = window.1.min(half);
    let mut total = 0.0;
    if b > a && n_window > 0 {
        let s = stream.labelled("window");
        let m = parallel_estimate(n_window, &s, |st| {
            let mut rng = st.rng();
            let x = point_in_slab(&mut rng, a, b, r);
            deficit_sample(x, &dom, obstacle, reference, cfg, &mut rng)
        })?;
        total += area * (b - a) * m.mean;
    }
    let rest = if finite { 2.0 * half - (b - a).max(0.0) } else { 0.0 };
    if rest > 0.0 && n_rest > 0 {
        let left = (a.min(half) + half).max(0.0);
        let s = stream.labelled("rest");
        let m = parallel_estimate(n_rest, &s, |st| {
            let mut rng = st.rng();
            let u = rest * rng.random::<f64>();
            let x1 = if u < left { -half + u } else { b.max(-half) + (u - left) };
            let (y, z) = uniform_in_disc(&mut rng, r);
            deficit_sample(Point3::new(x1, y, z), &dom, obstacle, reference, cfg, &mut rng)
        })?;
        total += area * rest * m.mean;
    }
    Ok(total)
}

/// Rigidity of a finite cylinder with the obstacle removed: the exact rigidity
/// minus the Monte Carlo deficit integral over `n_points` uniform points, each
/// averaged over `n_walks` walks.
pub fn fractured_rigidity(
    domain: &CylinderSpec,
    obstacle: &dyn Obstacle,
    cfg: &WosConfig,
    n_points: usize,
    n_walks: usize,
    stream: &RngStream,
) -> Result<Estimate, PotentialError> {
    let Length::Finite(l) = domain.length() else {
        return Err(PotentialError::InvalidConfig("fractured rigidity needs a finite cylinder".into()));
    };
    let exact = rigidity_cylinder(l, domain.radius())?.value;
    let volume = PI * domain.radius().powi(2) * l;
    let dom = Domain::Cylinder(*domain);
    let walks = n_walks.max(1);
    let per_point = parallel_estimate(n_points, stream, |st| {
        let mut rng = st.rng();
        let x = point_in_slab(&mut rng, -0.5 * l, 0.5 * l, domain.radius());
        let mut acc = 0.0;
        for _ in 0..walks {
            acc += deficit_sample(x, &dom, obstacle, Reference::Continuation, cfg, &mut rng)?;
        }
        Ok(acc / walks as f64)
    })?;
    let deficit = per_point.scaled(volume);
    Ok(Estimate {
        mean: exact - deficit.mean,
        ..deficit
    })
}

/// Sample a point of the sphere `|y| = rho` from the hitting distribution of a
/// walker at `rel` (`|rel| = r > rho`) conditioned to hit the sphere. The
/// density is proportional to `|rel - y|^{-3}`, under which `1 / |rel - y|` is
/// uniform on `[1/(r + rho), 1/(r - rho)]`.
pub fn reentry_point<R: Rng + ?Sized>(rel: Point3, rho: f64, rng: &mut R) -> Point3 {
    let r = rel.norm();
    let lo = 1.0 / (r + rho);
    let hi = 1.0 / (r - rho);
    let s = lo + (hi - lo) * rng.random::<f64>();
    let d = 1.0 / s;
    let u = ((r * r + rho * rho - d * d) / (2.0 * r * rho)).clamp(-1.0, 1.0);
    let w = (1.0 - u * u).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    let e = rel * (1.0 / r);
    // Any unit vector orthogonal to e.
    let helper = if e.x.abs() < 0.9 { Point3::new(1.0, 0.0, 0.0) } else { Point3::new(0.0, 1.0, 0.0) };
    let e1 = {
        let p = helper - e * e.dot(helper);
        p * (1.0 / p.norm())
    };
    let e2 = Point3::new(e.y * e1.z - e.z * e1.y, e.z * e1.x - e.x * e1.z, e.x * e1.y - e.y * e1.x);
    (e * u + e1 * (w * phi.cos()) + e2 * (w * phi.sin())) * rho
}

/// Launch radius for `obstacle` under `cfg`.
pub fn launch_radius(obstacle: &dyn Obstacle, cfg: &WosConfig) -> Result<(Point3, f64), PotentialError> {
    let (center, bound) = obstacle
        .bounding_sphere()
        .ok_or_else(|| PotentialError::InvalidConfig("capacity needs a bounded obstacle".into()))?;
    let rho = cfg.launch_radius.unwrap_or(bound + cfg.eps_shell);
    if rho <= bound {
        return Err(PotentialError::InvalidConfig(format!(
            "launch radius {rho} must exceed the obstacle's bounding radius {bound}"
        )));
    }
    Ok((center, rho))
}

/// Whether a walker launched uniformly on the launch sphere hits the obstacle.
fn capacity_walk<R: Rng + ?Sized>(
    obstacle: &dyn Obstacle,
    center: Point3,
    rho: f64,
    cfg: &WosConfig,
    rng: &mut R,
) -> Result<bool, PotentialError> {
    let mut x = center + uniform_direction(rng) * rho;
    for _ in 0..cfg.max_jumps {
        let rel = x - center;
        let r = rel.norm();
        if r > rho {
            if rng.random::<f64>() * r >= rho {
                return Ok(false);
            }
            x = center + reentry_point(rel, rho, rng);
        }
        let d = obstacle.distance(x, f64::INFINITY);
        if d < cfg.eps_shell {
            return Ok(true);
        }
        x = x + uniform_direction(rng) * d;
    }
    Err(PotentialError::MaxJumps(cfg.max_jumps))
}

/// Newtonian capacity `4 pi rho P(hit)`, with walkers launched uniformly on a
/// sphere of radius `rho` enclosing the obstacle. A walker at distance
/// `r > rho` returns to the sphere with probability `rho / r` and otherwise
/// escapes.
pub fn capacity_estimate(
    obstacle: &dyn Obstacle,
    cfg: &WosConfig,
    n: usize,
    stream: &RngStream,
) -> Result<Estimate, PotentialError> {
    cfg.validate(false)?;
    let (center, rho) = launch_radius(obstacle, cfg)?;
    let p = parallel_estimate(n, stream, |s| {
        Ok(if capacity_walk(obstacle, center, rho, cfg, &mut s.rng())? { 1.0 } else { 0.0 })
    })?;
    Ok(p.scaled(4.0 * PI * rho))
}

/// Inputs of [`kappa_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaConfig {
    /// Radius `a` of the ball the trace runs in.
    pub ball_radius: f64,
    pub path: PathConfig,
    pub wos: WosConfig,
    /// Smallest tube radius `eps0`; capacities are taken at `2 eps0` and `eps0`.
    pub eps0: f64,
}

impl KappaConfig {
    /// Unit-ball configuration rescaled to a ball of radius `a`: time by `a^2`,
    /// lengths by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            ball_radius: self.ball_radius * a,
            path: PathConfig {
                dt: self.path.dt * a * a,
                max_steps: self.path.max_steps,
            },
            wos: self.wos.scaled(a),
            eps0: self.eps0 * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    /// `(eps_tube, capacity estimate)` for `2 eps0` and `eps0`.
    pub by_eps: Vec<(f64, Estimate)>,
    /// `2 cap(eps0) - cap(2 eps0)`, paired per trace.
    pub extrapolated: Estimate,
    /// The raw estimate at the smallest tube radius.
    pub headline: Estimate,
}

/// Expected capacity of the tube around a trace run from the centre of a ball
/// until it exits.
pub fn kappa_estimate(
    cfg: &KappaConfig,
    n_traces: usize,
    n_walkers: usize,
    stream: &RngStream,
) -> Result<KappaEstimate, PotentialError> {
    if n_traces == 0 || n_walkers == 0 {
        return Err(PotentialError::InvalidConfig("n_traces and n_walkers must be at least 1".into()));
    }
    let eps = [2.0 * cfg.eps0, cfg.eps0];
    for e in eps {
        WosConfig { eps_tube: e, ..cfg.wos }.validate(true)?;
    }
    let ball = BallSpec::new(Point3::ORIGIN, cfg.ball_radius)
        .map_err(|e| PotentialError::InvalidConfig(e.to_string()))?;
    let domain = Domain::Ball(ball);
    let per_trace = (0..n_traces)
        .into_par_iter()
        .map(|i| {
            let s = stream.substream(i as u64);
            let trace = sample_trace_with(ball.center(), &domain, &cfg.path, &mut s.labelled("trace").rng())?;
            let mut caps = [0.0; 2];
            for (k, &e) in eps.iter().enumerate() {
                let wos = WosConfig { eps_tube: e, ..cfg.wos };
                let tube = Tube::new(&trace, e);
                caps[k] = capacity_estimate(&tube, &wos, n_walkers, &s.substream(k as u64))?.mean;
            }
            Ok(caps)
        })
        .collect::<Result<Vec<[f64; 2]>, PotentialError>>()?;
    let column = |k: usize| -> Vec<f64> { per_trace.iter().map(|c| c[k]).collect() };
    let by_eps: Vec<(f64, Estimate)> = (0..2)
        .map(|k| (eps[k], Estimate::from_samples(&column(k), stream.seed)))
        .collect();
    let extrap: Vec<f64> = per_trace.iter().map(|c| 2.0 * c[1] - c[0]).collect();
    Ok(KappaEstimate {
        headline: by_eps[1].1,
        extrapolated: Estimate::from_samples(&extrap, stream.seed),
        by_eps,
    })
}

/// Probability that a walk from `x` reaches one of the planes `x1 = +-L/2`
/// before leaving the infinite cylinder `C_R` laterally.
pub fn plane_hitting_probability(
    x: Point3,
    length: f64,
    radius: f64,
    cfg: &WosConfig,
    n: usize,
    stream: &RngStream,
) -> Result<Estimate, PotentialError> {
    let c = CylinderSpec::finite(length, radius).map_err(|e| PotentialError::InvalidConfig(e.to_string()))?;
    let half = 0.5 * length;
    parallel_estimate(n, stream, |s| {
        let mut rng = s.rng();
        let mut p = x;
        let mut ignored = 0.0;
        walk(&mut p, &Domain::Cylinder(c), &NoObstacle, cfg, &mut rng, &mut ignored)?;
        let (x1, xp) = p.split();
        Ok(if half - x1.abs() < radius - xp.norm() { 1.0 } else { 0.0 })
    })
}
