//! Expected rigidity loss, the limiting constants `c` and `c'`, and the bounds
//! report.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::geometry::{CylinderSpec, Domain, Point3};
use crate::potential::{
    deficit_integral, kappa_estimate, plane_hitting_probability, KappaConfig, KappaEstimate, PotentialError,
    Reference, Tube, WosConfig,
};
use crate::report::{BoundEntry, BoundsReport};
use crate::rng::RngStream;
use crate::spectral::{
    inverse_zero_power_sum, rigidity_cylinder, rigidity_disc, rigidity_disc_series, rigidity_sandwich_check, unit_zeros,
    BoundConstants, DiscSpectrum, SpectralError, DEFAULT_TERMS,
};
use crate::stats::Estimate;
use crate::stochastic::{sample_start, sample_trace_with, uniform_in_disc, PathConfig, StartMode, StochasticError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid experiment parameter: {0}")]
    Invalid(String),
}

/// Sample sizes and discretisation. Lengths are in units of the cylinder
/// radius (or ball radius for `kappa`), `dt_factor` in units of its square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub name: String,
    pub dt_factor: f64,
    pub eps_tube: f64,
    pub eps_shell: f64,
    /// Axial margin `W` added on both sides of a trace for the x-integration.
    pub window: f64,
    /// Truncation length of the cylinder in which traces for `c`, `c'` run.
    pub l_trunc: f64,
    pub n_traces: usize,
    /// Integration points per trace inside the window.
    pub n_points: usize,
    /// Integration points per trace in the rest of a finite cylinder.
    pub n_rest: usize,
    pub n_constant_traces: usize,
    pub n_kappa_traces: usize,
    pub n_walkers: usize,
    pub n_hitting_walkers: usize,
    pub max_steps: usize,
    pub max_jumps: usize,
}

impl Budgets {
    pub fn small() -> Self {
        Self {
            name: "small".into(),
            dt_factor: 1e-4,
            eps_tube: 0.02,
            eps_shell: 0.002,
            window: 6.0,
            l_trunc: 36.0,
            n_traces: 60,
            n_points: 200,
            n_rest: 40,
            n_constant_traces: 60,
            n_kappa_traces: 8,
            n_walkers: 400,
            n_hitting_walkers: 100_000,
            max_steps: 50_000_000,
            max_jumps: 1_000_000,
        }
    }

    pub fn default_budget() -> Self {
        Self {
            name: "default".into(),
            n_traces: 600,
            n_points: 400,
            n_rest: 100,
            n_constant_traces: 1000,
            n_kappa_traces: 48,
            n_walkers: 2000,
            n_hitting_walkers: 1_000_000,
            ..Self::small()
        }
    }

    pub fn large() -> Self {
        Self {
            name: "large".into(),
            n_traces: 2400,
            n_points: 800,
            n_rest: 200,
            n_constant_traces: 4000,
            n_kappa_traces: 192,
            n_walkers: 4000,
            n_hitting_walkers: 4_000_000,
            ..Self::small()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "small" => Some(Self::small()),
            "default" => Some(Self::default_budget()),
            "large" => Some(Self::large()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let positive = [
            ("dt_factor", self.dt_factor),
            ("eps_tube", self.eps_tube),
            ("eps_shell", self.eps_shell),
            ("window", self.window),
            ("l_trunc", self.l_trunc),
        ];
        for (what, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ExperimentError::Invalid(format!("{what} must be positive, got {v}")));
            }
        }
        let counts = [
            ("n_traces", self.n_traces),
            ("n_points", self.n_points),
            ("n_constant_traces", self.n_constant_traces),
            ("n_kappa_traces", self.n_kappa_traces),
            ("n_walkers", self.n_walkers),
            ("n_hitting_walkers", self.n_hitting_walkers),
            ("max_steps", self.max_steps),
            ("max_jumps", self.max_jumps),
        ];
        for (what, v) in counts {
            if v == 0 {
                return Err(ExperimentError::Invalid(format!("{what} must be at least 1")));
            }
        }
        self.wos(1.0).validate(true)?;
        Ok(())
    }

    pub fn path(&self, radius: f64) -> PathConfig {
        PathConfig {
            dt: self.dt_factor * radius * radius,
            max_steps: self.max_steps,
        }
    }

    pub fn wos(&self, radius: f64) -> WosConfig {
        WosConfig {
            eps_shell: self.eps_shell * radius,
            eps_tube: self.eps_tube * radius,
            launch_radius: None,
            max_jumps: self.max_jumps,
        }
    }

    /// `kappa` configuration for the ball of radius `a`; `eps_tube` is the
    /// smaller of the two tube radii.
    pub fn kappa(&self, a: f64) -> KappaConfig {
        KappaConfig {
            ball_radius: 1.0,
            path: self.path(1.0),
            wos: self.wos(1.0),
            eps0: self.eps_tube,
        }
        .scaled(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Start uniform over the cylinder.
    Uniform,
    /// Start uniform on the axis.
    Axis,
}

impl LossMode {
    fn start_mode(self) -> StartMode {
        match self {
            LossMode::Uniform => StartMode::UniformCylinder,
            LossMode::Axis => StartMode::Axis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub length: f64,
    pub radius: f64,
    pub mode: LossMode,
    /// Expected loss of rigidity.
    pub value: Estimate,
    /// Exact rigidity of the unfractured cylinder.
    pub exact: f64,
    /// Expected rigidity of the fractured cylinder, `exact - value`.
    pub fractured: Estimate,
}

/// Expected loss of torsional rigidity of `C_{L,R}` when the trace of a path
/// started by `mode` is removed.
///
/// Per trace, the removed rigidity `int (v_C - v_{C-K})` is integrated by
/// points stratified between the trace's axial extent widened by `W R` and
/// the rest of the cylinder; only this term is random.
pub fn estimate_loss(
    length: f64,
    radius: f64,
    mode: LossMode,
    budgets: &Budgets,
    stream: &RngStream,
) -> Result<LossEstimate, ExperimentError> {
    budgets.validate()?;
    let cyl = CylinderSpec::finite(length, radius).map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let domain = Domain::Cylinder(cyl);
    let exact = rigidity_cylinder(length, radius)?.value;
    let path = budgets.path(radius);
    let wos = budgets.wos(radius);
    let margin = budgets.window * radius;
    let losses = (0..budgets.n_traces)
        .into_par_iter()
        .map(|i| {
            let s = stream.substream(i as u64);
            let mut rng = s.labelled("trace").rng();
            let start = sample_start(mode.start_mode(), &domain, &mut rng)?;
            let trace = sample_trace_with(start, &domain, &path, &mut rng)?;
            let (a, b) = trace.axial_extent();
            let tube = Tube::new(&trace, wos.eps_tube);
            Ok(deficit_integral(
                &cyl,
                &tube,
                Reference::Continuation,
                (a - margin, b + margin),
                budgets.n_points,
                budgets.n_rest,
                &wos,
                &s.labelled("deficit"),
            )?)
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    let value = Estimate::from_samples(&losses, stream.seed);
    Ok(LossEstimate {
        length,
        radius,
        mode,
        value,
        exact,
        fractured: Estimate {
            mean: exact - value.mean,
            ..value
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    /// `c`: start `(0, y')` with `y'` uniform on the unit disc.
    C,
    /// `c'`: start at the origin.
    CPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub mode: ConstantMode,
    pub value: Estimate,
    pub l_trunc: f64,
    pub window: f64,
    /// Upper bound on the probability that a trace reaches the truncation
    /// planes before leaving laterally.
    pub truncation_probability_bound: f64,
    /// Upper bound on the part of the deficit integral outside the window.
    pub window_bias_bound: f64,
}

/// `sum_k 2 pi exp(-j_k W) / j_k^3`: with `v <= 1/4` and the plane-hitting
/// probability of the unit cylinder, this bounds the deficit integral beyond
/// axial distance `W` from the trace, both sides together.
pub fn window_bias_bound(window: f64) -> f64 {
    unit_zeros(64)
        .iter()
        .rev()
        .map(|j| 2.0 * PI * (-j * window).exp() / j.powi(3))
        .sum()
}

/// The constant `c` (or `c'`) as the expected deficit integral, over the
/// infinite unit cylinder, of the trace of a path started on the cross-section
/// `x1 = 0`.
///
/// Traces run in `C_{L_trunc, 1}`; the deficit is integrated over the trace's
/// axial extent widened by `W` on each side, with the closed-form torsion
/// function of the infinite cylinder at absorption points.
pub fn estimate_constant(
    mode: ConstantMode,
    budgets: &Budgets,
    stream: &RngStream,
) -> Result<ConstantEstimate, ExperimentError> {
    budgets.validate()?;
    let truncated = CylinderSpec::finite(budgets.l_trunc, 1.0).map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let infinite = CylinderSpec::infinite(1.0).map_err(|e| ExperimentError::Invalid(e.to_string()))?;
    let domain = Domain::Cylinder(truncated);
    let path = budgets.path(1.0);
    let wos = budgets.wos(1.0);
    let values = (0..budgets.n_constant_traces)
        .into_par_iter()
        .map(|i| {
            let s = stream.substream(i as u64);
            let mut rng = s.labelled("trace").rng();
            let start = match mode {
                ConstantMode::C => {
                    let (y, z) = uniform_in_disc(&mut rng, 1.0);
                    Point3::new(0.0, y, z)
                }
                ConstantMode::CPrime => Point3::ORIGIN,
            };
            let trace = sample_trace_with(start, &domain, &path, &mut rng)?;
            let (a, b) = trace.axial_extent();
            let tube = Tube::new(&trace, wos.eps_tube);
            Ok(deficit_integral(
                &infinite,
                &tube,
                Reference::InfiniteCylinder,
                (a - budgets.window, b + budgets.window),
                budgets.n_points,
                0,
                &wos,
                &s.labelled("deficit"),
            )?)
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    Ok(ConstantEstimate {
        mode,
        value: Estimate::from_samples(&values, stream.seed),
        l_trunc: budgets.l_trunc,
        window: budgets.window,
        truncation_probability_bound: BoundConstants::compute().plane_hitting_bound(budgets.l_trunc, 1.0),
        window_bias_bound: window_bias_bound(budgets.window),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneHittingCheck {
    pub entry: BoundEntry,
    /// Estimate at the start with the largest empirical probability.
    pub worst: Estimate,
    pub worst_start: Point3,
}

/// Empirical plane-hitting probability against its exponential bound. The
/// worst of three starts in `|y1| <= L/2 - sqrt(R L)` is reported.
pub fn plane_hitting_check(
    length: f64,
    radius: f64,
    n: usize,
    budgets: &Budgets,
    stream: &RngStream,
) -> Result<PlaneHittingCheck, ExperimentError> {
    if !(radius > 0.0 && length >= 4.0 * radius) {
        return Err(ExperimentError::Invalid(format!("need L >= 4R, got L={length}, R={radius}")));
    }
    let edge = 0.5 * length - (radius * length).sqrt();
    let starts = [
        Point3::new(edge, 0.0, 0.0),
        Point3::new(edge, 0.5 * radius, 0.0),
        Point3::ORIGIN,
    ];
    let wos = budgets.wos(radius);
    let mut worst: Option<(Estimate, Point3)> = None;
    for (k, &y) in starts.iter().enumerate() {
        let e = plane_hitting_probability(y, length, radius, &wos, n, &stream.substream(k as u64))?;
        if worst.is_none_or(|(w, _)| e.mean > w.mean) {
            worst = Some((e, y));
        }
    }
    let (est, y) = worst.expect("three starts");
    let bound = BoundConstants::compute().plane_hitting_bound(length, radius);
    let entry = BoundEntry::statistical(
        format!("plane_hitting[L={length},R={radius}]"),
        None,
        est.mean,
        est.std_error,
        Some(bound),
        3.0,
        json!({"L": length, "R": radius, "n": n, "start": [y.x, y.y, y.z], "seed": stream.seed}),
    );
    Ok(PlaneHittingCheck {
        entry,
        worst: est,
        worst_start: y,
    })
}

fn budget_inputs(b: &Budgets, seed: u64) -> serde_json::Value {
    json!({"budget": b, "seed": seed})
}

fn loss_json(l: &LossEstimate) -> serde_json::Value {
    json!({"L": l.length, "R": l.radius, "mode": l.mode, "n": l.value.n, "exact": l.exact})
}

/// Every bound, with its computed or estimated quantity.
pub fn full_report(budgets: &Budgets, stream: &RngStream) -> Result<BoundsReport, ExperimentError> {
    budgets.validate()?;
    let k = BoundConstants::compute();
    let mut report = BoundsReport::default();
    let seed = stream.seed;

    let s2 = inverse_zero_power_sum(2.0, DEFAULT_TERMS);
    report.push(BoundEntry::new(
        "zero_sum_inverse_square",
        Some(0.25),
        s2.value + s2.tail_bound,
        0.0,
        Some(0.25),
        1e-8,
        json!({"n_terms": s2.n_terms, "tail": s2.tail_bound}),
    ));
    let s4 = inverse_zero_power_sum(4.0, DEFAULT_TERMS);
    report.push(BoundEntry::new(
        "zero_sum_inverse_fourth",
        Some(1.0 / 32.0),
        s4.value,
        0.0,
        Some(1.0 / 32.0),
        1e-10,
        json!({"n_terms": s4.n_terms}),
    ));
    let disc = rigidity_disc_series(&DiscSpectrum::new(1.0, DEFAULT_TERMS)?);
    report.push(BoundEntry::new(
        "disc_rigidity_series",
        Some(rigidity_disc(1.0)),
        disc.value,
        0.0,
        Some(rigidity_disc(1.0)),
        1e-10,
        json!({"R": 1.0, "n_terms": disc.n_terms}),
    ));
    for &(l, r) in &[(2.0, 1.0), (5.0, 1.0), (10.0, 1.0), (20.0, 1.0), (10.0, 0.5), (10.0, 2.0)] {
        report.push(rigidity_sandwich_check(l, r)?);
    }

    let kappa: KappaEstimate = kappa_estimate(
        &budgets.kappa(1.0),
        budgets.n_kappa_traces,
        budgets.n_walkers,
        &stream.labelled("kappa"),
    )?;
    let kh = kappa.headline;
    let kappa_inputs = json!({
        "eps_tube": kappa.by_eps.iter().map(|(e, _)| *e).collect::<Vec<_>>(),
        "by_eps": kappa.by_eps.iter().map(|(_, est)| est.mean).collect::<Vec<_>>(),
        "n_traces": budgets.n_kappa_traces,
        "n_walkers": budgets.n_walkers,
        "seed": seed,
    });
    report.push(BoundEntry::new(
        "kappa",
        Some(0.0),
        kh.mean,
        kh.std_error,
        Some(4.0 * PI),
        0.0,
        kappa_inputs.clone(),
    ));
    report.push(
        BoundEntry::new(
            "kappa_extrapolated",
            Some(0.0),
            kappa.extrapolated.mean,
            kappa.extrapolated.std_error,
            Some(4.0 * PI),
            0.0,
            kappa_inputs,
        )
        .informational(),
    );
    let kappa_low = kh.lower(3.0).max(0.0);

    let loss12 = estimate_loss(12.0, 1.0, LossMode::Uniform, budgets, &stream.labelled("loss12"))?;
    report.push(BoundEntry::statistical(
        "loss_upper[L=12,R=1]",
        Some(0.0),
        loss12.value.mean,
        loss12.value.std_error,
        Some(k.loss_upper(1.0)),
        3.0,
        loss_json(&loss12),
    ));
    let loss24 = estimate_loss(24.0, 1.0, LossMode::Uniform, budgets, &stream.labelled("loss24"))?;
    report.push(
        BoundEntry::statistical(
            "loss_limsup_upper[L=24,R=1]",
            Some(0.0),
            loss24.value.mean,
            loss24.value.std_error,
            Some(k.loss_limsup_upper(1.0)),
            3.0,
            loss_json(&loss24),
        )
        .informational(),
    );
    let axis12 = estimate_loss(12.0, 1.0, LossMode::Axis, budgets, &stream.labelled("axis12"))?;
    let se = axis12.value.combined_se(&loss12.value);
    report.push(
        BoundEntry::statistical(
            "axis_minus_uniform[L=12,R=1]",
            Some(0.0),
            axis12.value.mean - loss12.value.mean,
            se,
            None,
            3.0,
            json!({"axis": axis12.value, "uniform": loss12.value}),
        )
        .informational(),
    );

    let c = estimate_constant(ConstantMode::C, budgets, &stream.labelled("c"))?;
    report.push(BoundEntry::statistical(
        "c",
        Some(k.c_lower_coeff * kappa_low),
        c.value.mean,
        c.value.std_error,
        Some(k.c_upper),
        3.0,
        json!({
            "kappa_low": kappa_low,
            "l_trunc": c.l_trunc,
            "window": c.window,
            "truncation_probability_bound": c.truncation_probability_bound,
            "window_bias_bound": c.window_bias_bound,
            "n": c.value.n,
        }),
    ));
    let cp = estimate_constant(ConstantMode::CPrime, budgets, &stream.labelled("cprime"))?;
    report.push(BoundEntry::statistical(
        "c_prime",
        Some(k.cp_lower_coeff * kappa_low),
        cp.value.mean,
        cp.value.std_error,
        Some(k.cp_upper),
        3.0,
        json!({
            "kappa_low": kappa_low,
            "l_trunc": cp.l_trunc,
            "window": cp.window,
            "truncation_probability_bound": cp.truncation_probability_bound,
            "window_bias_bound": cp.window_bias_bound,
            "n": cp.value.n,
        }),
    ));
    let se = c.value.combined_se(&loss24.value);
    report.push(
        BoundEntry::new(
            "c_minus_loss[L=24,R=1]",
            Some(-3.0 * se),
            c.value.mean - loss24.value.mean,
            se,
            Some(3.0 * se),
            0.0,
            json!({"c": c.value, "loss24": loss24.value}),
        )
        .informational(),
    );

    for &l in &[16.0, 36.0] {
        let r = plane_hitting_check(l, 1.0, budgets.n_hitting_walkers, budgets, &stream.labelled(&format!("hitting{l}")))?;
        report.push(r.entry);
    }

    for e in &mut report.entries {
        if let serde_json::Value::Object(m) = &mut e.inputs {
            m.entry("config").or_insert_with(|| budget_inputs(budgets, seed));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in ["small", "default", "large"] {
            let b = Budgets::preset(name).unwrap();
            assert_eq!(b.name, name);
            b.validate().unwrap();
        }
        assert!(Budgets::preset("huge").is_none());
        let bad = Budgets { eps_shell: 0.01, ..Budgets::small() };
        assert!(bad.validate().is_err());
        let bad = Budgets { n_traces: 0, ..Budgets::small() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn window_bias_is_tiny_at_default_window() {
        let j0 = crate::spectral::first_zero();
        let leading = 2.0 * PI / j0.powi(3);
        assert!((leading - 0.4518).abs() < 1e-4);
        let b = window_bias_bound(6.0);
        assert!(b > leading * (-j0 * 6.0).exp());
        assert!(b < 1.001 * leading * (-j0 * 6.0).exp());
        assert!(b < 1e-6);
    }

    #[test]
    fn plane_hitting_check_rejects_short_cylinders() {
        assert!(plane_hitting_check(3.0, 1.0, 10, &Budgets::small(), &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn loss_is_reproducible() {
        let b = Budgets {
            n_traces: 4,
            n_points: 20,
            n_rest: 5,
            ..Budgets::small()
        };
        let s = RngStream::new(3, 0);
        let a = estimate_loss(4.0, 1.0, LossMode::Axis, &b, &s).unwrap();
        let c = estimate_loss(4.0, 1.0, LossMode::Axis, &b, &s).unwrap();
        assert_eq!(a, c);
        assert!((a.fractured.mean + a.value.mean - a.exact).abs() < 1e-12);
    }
}
