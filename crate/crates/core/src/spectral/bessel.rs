//! Bessel function `J0` and its positive zeros.
//!
//! Three evaluation regimes:
//! - `|x| <= 4`: ascending power series (largest term ~4, so cancellation
//!   costs under one digit);
//! - `4 < |x| < 25`: Miller backward recurrence normalised by
//!   `J0 + 2 (J2 + J4 + ...) = 1`;
//! - `|x| >= 25`: Hankel asymptotic expansion, truncated at its smallest term
//!   (error below `exp(-2|x|)`).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SERIES_LIMIT: f64 = 4.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else if x < ASYMPTOTIC_LIMIT {
        j0_miller(x)
    } else {
        j0_asymptotic(x)
    }
}

pub(crate) fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2.0 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    sum
}

pub(crate) fn j0_miller(x: f64) -> f64 {
    // Start well above the turning point n ~ x.
    let mut n = (x as usize + 40) & !1;
    let mut next = 0.0; // J_{n+1}
    let mut cur = 1e-30; // J_n
    let mut norm = 0.0;
    let mut j0 = 0.0;
    while n > 0 {
        if n.is_multiple_of(2) {
            norm += 2.0 * cur;
        }
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        n -= 1;
        if cur.abs() > 1e250 {
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
        }
        if n == 0 {
            j0 = cur;
        }
    }
    norm += j0;
    j0 / norm
}

pub(crate) fn j0_asymptotic(x: f64) -> f64 {
    // P ~ sum (-1)^m t_{2m}, Q ~ sum (-1)^m t_{2m+1},
    // t_k = prod_{i<=k} (-(2i-1)^2) / (k! (8x)^k).
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut k = 1usize;
    loop {
        let odd = (2 * k - 1) as f64;
        let nt = term * (-odd * odd) / (k as f64 * 8.0 * x);
        if nt.abs() >= term.abs() || nt.abs() < 1e-18 {
            break;
        }
        term = nt;
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k.is_multiple_of(2) {
            p += sign * term;
        } else {
            q += sign * term;
        }
        k += 1;
    }
    // cos(x - pi/4) and sin(x - pi/4) without rounding pi/4 into x.
    let (s, c) = x.sin_cos();
    let cos_chi = (c + s) * FRAC_1_SQRT_2;
    let sin_chi = (s - c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// The `k`-th positive zero of `J0` (1-based), bracketed near McMahon's
/// estimate and refined by bisection to full double precision.
pub fn bessel_zero(k: usize) -> f64 {
    assert!(k >= 1, "zeros are numbered from 1");
    let beta = (k as f64 - 0.25) * PI;
    // j_{0,k} lies in ((k - 1/4) pi, (k - 1/4) pi + 1/(8 beta)).
    let mut lo = beta;
    let mut hi = beta + 1.0 / (8.0 * beta) + 1e-3;
    let mut flo = bessel_j0(lo);
    while flo * bessel_j0(hi) > 0.0 {
        lo = hi;
        flo = bessel_j0(lo);
        hi += 0.05;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = bessel_j0(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // Endpoint with the smaller residual.
    if bessel_j0(lo).abs() <= bessel_j0(hi).abs() {
        lo
    } else {
        hi
    }
}

/// First `n` positive zeros of `J0`, increasing.
pub fn bessel_zeros(n: usize) -> Vec<f64> {
    (1..=n).map(bessel_zero).collect()
}
