//! Eigenseries for heat content and torsional rigidity of discs, intervals and
//! the cylinders built from them, plus the closed-form bound constants.
//!
//! Every series value is returned with the number of terms used and a rigorous
//! bound on the discarded tail. Tail bounds rely on `j_{0,k} > (k - 1/4) pi`.

mod bessel;

use std::f64::consts::PI;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::report::BoundEntry;

pub use bessel::{bessel_j0, bessel_zero, bessel_zeros};

/// Relative accuracy every series is truncated to.
pub const SERIES_REL_TOL: f64 = 1e-12;

/// Number of Bessel zeros a default disc spectrum carries.
pub const DEFAULT_TERMS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("{what} must be positive and finite, got {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("series needs more than the {have} available terms (tail bound {tail:e})")]
    InsufficientTerms { have: usize, tail: f64 },
}

fn positive(what: &'static str, value: f64) -> Result<f64, SpectralError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(SpectralError::InvalidParameter { what, value })
    }
}

fn positive_time(t: f64) -> Result<f64, SpectralError> {
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(SpectralError::NonPositiveTime(t))
    }
}

/// A truncated series: partial sum, terms used, and a bound on the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub n_terms: usize,
    pub tail_bound: f64,
}

static UNIT_ZEROS: RwLock<Vec<f64>> = RwLock::new(Vec::new());

/// First `n` zeros of `J0`, computed once per process and shared.
pub fn unit_zeros(n: usize) -> Vec<f64> {
    {
        let cache = UNIT_ZEROS.read().unwrap_or_else(|e| e.into_inner());
        if cache.len() >= n {
            return cache[..n].to_vec();
        }
    }
    let mut cache = UNIT_ZEROS.write().unwrap_or_else(|e| e.into_inner());
    let have = cache.len();
    if have < n {
        cache.extend((have + 1..=n).map(bessel_zero));
    }
    cache[..n].to_vec()
}

/// `j0`, the first positive zero of `J0`.
pub fn first_zero() -> f64 {
    unit_zeros(1)[0]
}

/// Dirichlet eigendata of the disc `D_R`: eigenvalues `j_{0,k}^2 / R^2` of the
/// radial modes, the only ones with nonzero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscSpectrum {
    radius: f64,
    zeros: Vec<f64>,
}

impl DiscSpectrum {
    pub fn new(radius: f64, n_terms: usize) -> Result<Self, SpectralError> {
        let radius = positive("disc radius", radius)?;
        if n_terms == 0 {
            return Err(SpectralError::InsufficientTerms { have: 0, tail: f64::INFINITY });
        }
        Ok(Self {
            radius,
            zeros: unit_zeros(n_terms),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Unit-disc zeros `j_{0,k}`.
    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn n_terms(&self) -> usize {
        self.zeros.len()
    }

    pub fn first_eigenvalue(&self) -> f64 {
        (self.zeros[0] / self.radius).powi(2)
    }

    /// Terms needed for the heat content tail bound at time `t` to drop below
    /// `rel_tol * value`, using `Q'(t) >= (4 pi R^2 / j0^2) exp(-j0^2 t / R^2)`.
    pub fn terms_for_time(radius: f64, t: f64, rel_tol: f64) -> usize {
        let r2 = radius * radius;
        let j0 = first_zero();
        let floor = (4.0 * PI * r2 / (j0 * j0)) * (-j0 * j0 * t / r2).exp();
        let mut k = 1usize;
        while disc_heat_tail(radius, t, k) > rel_tol * floor {
            k *= 2;
            if k > 1 << 24 {
                break;
            }
        }
        k
    }

    /// Spectrum with enough terms to evaluate the heat content at `t`.
    pub fn for_time(radius: f64, t: f64) -> Result<Self, SpectralError> {
        positive_time(t)?;
        Self::new(radius, Self::terms_for_time(radius, t, SERIES_REL_TOL).max(16))
    }
}

/// Bound on `sum_{k > K} (4 pi R^2 / j_k^2) exp(-j_k^2 t / R^2)`.
fn disc_heat_tail(radius: f64, t: f64, used: usize) -> f64 {
    let k = used as f64;
    let r2 = radius * radius;
    let decay = (-(PI * PI) * t * (k + 0.75) * (k + 0.75) / r2).exp();
    4.0 * r2 / PI * decay / (k - 0.25)
}

/// Heat content of the disc,
/// `Q'(t) = sum_k (4 pi R^2 / j_k^2) exp(-j_k^2 t / R^2)`.
pub fn disc_heat_content(t: f64, s: &DiscSpectrum) -> Result<SeriesValue, SpectralError> {
    let t = positive_time(t)?;
    let r2 = s.radius * s.radius;
    let mut partial = 0.0;
    let mut tail = f64::INFINITY;
    for (i, &j) in s.zeros.iter().enumerate() {
        let lambda = j * j;
        partial += 4.0 * PI * r2 / lambda * (-lambda * t / r2).exp();
        tail = disc_heat_tail(s.radius, t, i + 1);
        if tail <= SERIES_REL_TOL * partial {
            return Ok(SeriesValue {
                value: partial,
                n_terms: i + 1,
                tail_bound: tail,
            });
        }
    }
    Err(SpectralError::InsufficientTerms {
        have: s.zeros.len(),
        tail,
    })
}

/// Sine-mode data of the interval `(-L/2, L/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSpectrum {
    length: f64,
    n_terms: usize,
}

impl IntervalSpectrum {
    pub fn new(length: f64, n_terms: usize) -> Result<Self, SpectralError> {
        Ok(Self {
            length: positive("interval length", length)?,
            n_terms,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }
}

/// Heat content of the interval,
/// `Q1(t) = sum_{n odd} (8L / (n^2 pi^2)) exp(-n^2 pi^2 t / L^2)`.
pub fn interval_heat_content(t: f64, s: &IntervalSpectrum) -> Result<SeriesValue, SpectralError> {
    let t = positive_time(t)?;
    let l = s.length;
    let mut partial = 0.0;
    let mut tail = f64::INFINITY;
    for m in 0..s.n_terms {
        let n = (2 * m + 1) as f64;
        let a = n * n * PI * PI;
        partial += 8.0 * l / a * (-a * t / (l * l)).exp();
        // Remaining odd modes start at n + 2; sum_{odd > n} 1/n'^2 <= 1/(2n).
        let next = n + 2.0;
        tail = 8.0 * l / (PI * PI) * (-next * next * PI * PI * t / (l * l)).exp() / (2.0 * n);
        if tail <= SERIES_REL_TOL * partial {
            return Ok(SeriesValue {
                value: partial,
                n_terms: m + 1,
                tail_bound: tail,
            });
        }
    }
    Err(SpectralError::InsufficientTerms { have: s.n_terms, tail })
}

/// Torsional rigidity of the disc, `pi R^4 / 8`.
pub fn rigidity_disc(radius: f64) -> f64 {
    PI * radius.powi(4) / 8.0
}

/// `sum_k 4 pi R^4 / j_k^4`, the eigenseries form of [`rigidity_disc`].
pub fn rigidity_disc_series(s: &DiscSpectrum) -> SeriesValue {
    let r4 = s.radius.powi(4);
    let value: f64 = s.zeros.iter().rev().map(|j| 4.0 * PI * r4 / j.powi(4)).sum();
    let k = s.zeros.len() as f64;
    SeriesValue {
        value,
        n_terms: s.zeros.len(),
        tail_bound: 4.0 * r4 / PI.powi(3) / (3.0 * (k - 0.25).powi(3)),
    }
}

/// `1 - tanh(z) / z`, accurate for small `z`.
fn one_minus_tanhc(z: f64) -> f64 {
    if z < 0.1 {
        let z2 = z * z;
        // Taylor series of tanh(z)/z through z^14.
        const C: [f64; 7] = [
            1.0 / 3.0,
            -2.0 / 15.0,
            17.0 / 315.0,
            -62.0 / 2835.0,
            1382.0 / 155_925.0,
            -21844.0 / 6_081_075.0,
            929_569.0 / 638_512_875.0,
        ];
        z2 * C.iter().rev().fold(0.0, |acc, c| acc * z2 + c)
    } else {
        1.0 - z.tanh() / z
    }
}

/// Torsional rigidity of `C_{L,R}` from the factorised heat content.
///
/// `T = int Q1(t) Q'(t) dt` is the double series
/// `sum_{n odd, k} (8L/(n^2 pi^2)) (4 pi R^2/j_k^2) / (n^2 pi^2/L^2 + j_k^2/R^2)`;
/// the sum over `n` has the closed form used here, leaving
/// `sum_k (4 pi R^4 L / j_k^4) (1 - (2R/(j_k L)) tanh(j_k L / (2R)))`.
pub fn rigidity_cylinder_with(length: f64, s: &DiscSpectrum) -> Result<SeriesValue, SpectralError> {
    let l = positive("cylinder length", length)?;
    let r = s.radius;
    let r4 = r.powi(4);
    let value: f64 = s
        .zeros
        .iter()
        .rev()
        .map(|&j| 4.0 * PI * r4 * l / j.powi(4) * one_minus_tanhc(j * l / (2.0 * r)))
        .sum();
    let k = s.zeros.len() as f64;
    let tail = 4.0 * r4 * l / PI.powi(3) / (3.0 * (k - 0.25).powi(3));
    if tail > SERIES_REL_TOL * value {
        return Err(SpectralError::InsufficientTerms {
            have: s.zeros.len(),
            tail,
        });
    }
    Ok(SeriesValue {
        value,
        n_terms: s.zeros.len(),
        tail_bound: tail,
    })
}

/// [`rigidity_cylinder_with`], doubling the number of zeros until the tail
/// bound meets [`SERIES_REL_TOL`].
pub fn rigidity_cylinder(length: f64, radius: f64) -> Result<SeriesValue, SpectralError> {
    let mut n = DEFAULT_TERMS;
    loop {
        match rigidity_cylinder_with(length, &DiscSpectrum::new(radius, n)?) {
            Err(SpectralError::InsufficientTerms { .. }) if n < 1 << 20 => n *= 2,
            other => return other,
        }
    }
}

/// Exponent of `t` in the heat-content moments `int t^p Q'(t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentPower {
    /// `p = 1/2`
    Half,
    /// `p = -1/2`
    NegHalf,
    /// `p = 1`
    One,
}

impl MomentPower {
    pub fn exponent(self) -> f64 {
        match self {
            MomentPower::Half => 0.5,
            MomentPower::NegHalf => -0.5,
            MomentPower::One => 1.0,
        }
    }

    /// `Gamma(p + 1)`.
    fn gamma_next(self) -> f64 {
        match self {
            MomentPower::Half => 0.5 * PI.sqrt(),
            MomentPower::NegHalf => PI.sqrt(),
            MomentPower::One => 1.0,
        }
    }
}

/// `int_0^inf t^p Q'(t) dt = sum_k 4 pi R^2 Gamma(p+1) R^{2(p+1)} / j_k^{2(p+2)}`.
pub fn weighted_moment(power: MomentPower, s: &DiscSpectrum) -> SeriesValue {
    let p = power.exponent();
    let q = 2.0 * (p + 2.0);
    let r = s.radius;
    let coeff = 4.0 * PI * r * r * power.gamma_next() * r.powf(2.0 * (p + 1.0));
    let value: f64 = s.zeros.iter().rev().map(|&j| coeff / j.powf(q)).sum();
    let k = s.zeros.len() as f64;
    SeriesValue {
        value,
        n_terms: s.zeros.len(),
        tail_bound: coeff * PI.powf(-q) * (k - 0.25).powf(1.0 - q) / (q - 1.0),
    }
}

/// `sum_{k <= K} j_k^{-p}` with the midpoint-rule tail
/// `(K + 1/4)^{1-p} / (pi^p (p - 1))`, an upper bound on the true remainder.
pub fn inverse_zero_power_sum(p: f64, k: usize) -> SeriesValue {
    let zeros = unit_zeros(k);
    let value: f64 = zeros.iter().rev().map(|j| j.powf(-p)).sum();
    SeriesValue {
        value,
        n_terms: k,
        tail_bound: (k as f64 + 0.25).powf(1.0 - p) / (PI.powf(p) * (p - 1.0)),
    }
}

/// The closed-form constants bounding `c` and `c'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub j0: f64,
    /// Upper bound of `c`: `pi / (2 j0)`.
    pub c_upper: f64,
    /// `c >= c_lower_coeff * kappa`.
    pub c_lower_coeff: f64,
    /// `c' >= cp_lower_coeff * kappa`.
    pub cp_lower_coeff: f64,
    /// Upper bound of `c'`: `(pi/4)(1 + 1/j0)`.
    pub cp_upper: f64,
    /// Ball radius maximising the `c` lower bound.
    pub a_opt: f64,
    /// Ball radius maximising the `c'` lower bound.
    pub ap_opt: f64,
}

impl BoundConstants {
    pub fn compute() -> Self {
        let j0 = first_zero();
        let s79 = 79f64.sqrt();
        let s61 = 61f64.sqrt();
        Self {
            j0,
            c_upper: PI / (2.0 * j0),
            c_lower_coeff: (67703.0 * s79 - 582_194.0) / 5_059_848_192.0,
            cp_lower_coeff: (2867.0 * s61 - 21773.0) / 303_750.0,
            cp_upper: 0.25 * PI * (1.0 + 1.0 / j0),
            a_opt: (s79 - 3.0) / 28.0,
            ap_opt: (s61 - 4.0) / 15.0,
        }
    }

    /// `(1 - 4a)(1 + 2a) a^5 / 24`, the lower-bound factor for `c` before optimising `a`.
    pub fn c_lower_factor(a: f64) -> f64 {
        (1.0 - 4.0 * a) * (1.0 + 2.0 * a) * a.powi(5) / 24.0
    }

    /// `(1 - 3a)(1 + a) a^3 / 24`, the lower-bound factor for `c'` before optimising `a`.
    pub fn cp_lower_factor(a: f64) -> f64 {
        (1.0 - 3.0 * a) * (1.0 + a) * a.powi(3) / 24.0
    }

    /// `6 lambda_1'^{-1/2} T'(D_R)`, the bound on the expected loss for every `L`.
    pub fn loss_upper(&self, radius: f64) -> f64 {
        6.0 * radius / self.j0 * rigidity_disc(radius)
    }

    /// `4 lambda_1'^{-1/2} T'(D_R)`, the bound on the limsup of the expected loss.
    pub fn loss_limsup_upper(&self, radius: f64) -> f64 {
        4.0 * radius / self.j0 * rigidity_disc(radius)
    }

    /// Upper bound on the plane-hitting probability before lateral exit,
    /// `(j0 + 1) sqrt(pi) exp(-j0 sqrt(L) / (2 sqrt(R)))`, valid for `L >= 4R`.
    pub fn plane_hitting_bound(&self, length: f64, radius: f64) -> f64 {
        (self.j0 + 1.0) * PI.sqrt() * (-self.j0 * (length / radius).sqrt() / 2.0).exp()
    }
}

/// Sandwich for the rigidity of a finite cylinder:
/// `0 <= T(C_{L,R}) - T'(D_R) L + (4/sqrt(pi)) int t^{1/2} Q' dt <= (8/L) T'(D_R) / lambda_1'`.
pub fn rigidity_sandwich_check(length: f64, radius: f64) -> Result<BoundEntry, SpectralError> {
    let s = DiscSpectrum::new(radius, DEFAULT_TERMS)?;
    let rigidity = rigidity_cylinder_with(length, &s)?;
    let moment = weighted_moment(MomentPower::Half, &s);
    let disc = rigidity_disc(radius);
    let k = 4.0 / PI.sqrt();
    let delta = rigidity.value - disc * length + k * moment.value;
    let upper = 8.0 / length * disc / s.first_eigenvalue();
    // Tails plus rounding in the cancellation of O(L) terms.
    let tol = rigidity.tail_bound + k * moment.tail_bound + 1e-14 * disc * length;
    Ok(BoundEntry::new(
        format!("rigidity_sandwich[L={length},R={radius}]"),
        Some(0.0),
        delta,
        0.0,
        Some(upper),
        tol,
        json!({
            "L": length,
            "R": radius,
            "rigidity": rigidity.value,
            "weighted_moment_half": moment.value,
            "n_terms": s.n_terms(),
            "tail_bound": tol,
        }),
    ))
}
