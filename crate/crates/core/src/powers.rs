//! Integer rounding of real powers `n^t`.
//!
//! Every method that classifies a prime against an endpoint `n^t` goes
//! through these functions, so all of them agree on boundary primes.
//! Comparisons are made in log space; inside a narrow guard band the
//! exponent is matched to a small-denominator fraction `a/b` and the
//! question `m >= n^(a/b)` is settled exactly as `m^b >= n^a`.

use std::cmp::Ordering;

use num_bigint::BigUint;

const GUARD_BAND: f64 = 1e-12;
const MAX_DENOMINATOR: u64 = 1000;

/// Compares the integer `m` with the real number `n^t`.
pub fn cmp_pow(m: u64, n: u64, t: f64) -> Ordering {
    if m == 0 {
        return Ordering::Less;
    }
    let lhs = (m as f64).ln();
    let rhs = t * (n as f64).ln();
    let diff = lhs - rhs;
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    if diff.abs() > GUARD_BAND * scale {
        return if diff > 0.0 {
            Ordering::Greater
        } else {
            Ordering::Less
        };
    }
    match small_fraction(t) {
        Some((a, b)) => {
            let left = BigUint::from(m).pow(b as u32);
            let right = BigUint::from(n).pow(a as u32);
            left.cmp(&right)
        }
        None => diff.partial_cmp(&0.0).unwrap_or(Ordering::Equal),
    }
}

/// `t ≈ a / b` with `b <= MAX_DENOMINATOR`, when `t` is within rounding of
/// such a fraction.
fn small_fraction(t: f64) -> Option<(u64, u64)> {
    if !(t >= 0.0) || !t.is_finite() {
        return None;
    }
    (1..=MAX_DENOMINATOR).find_map(|b| {
        let a = (t * b as f64).round();
        ((t - a / b as f64).abs() <= 1e-12 * t.max(1.0)).then_some((a as u64, b))
    })
}

/// Smallest integer `m >= 1` with `m >= n^t`.
pub fn ceil_pow(n: u64, t: f64) -> u64 {
    let guess = (t * (n as f64).ln()).exp();
    let mut m = if guess.is_finite() && guess < 1.8e19 {
        guess.ceil().max(1.0) as u64
    } else {
        u64::MAX
    };
    while m > 1 && cmp_pow(m - 1, n, t) != Ordering::Less {
        m -= 1;
    }
    while m < u64::MAX && cmp_pow(m, n, t) == Ordering::Less {
        m += 1;
    }
    m
}

/// Largest integer `m >= 0` with `m <= n^t`.
pub fn floor_pow(n: u64, t: f64) -> u64 {
    let guess = (t * (n as f64).ln()).exp();
    let mut m = if guess.is_finite() && guess < 1.8e19 {
        guess.floor().max(0.0) as u64
    } else {
        u64::MAX
    };
    while m < u64::MAX && cmp_pow(m + 1, n, t) != Ordering::Greater {
        m += 1;
    }
    while m > 0 && cmp_pow(m, n, t) == Ordering::Greater {
        m -= 1;
    }
    m
}
