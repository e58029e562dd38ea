//! Counting y-smooth integers: Ψ(x, y) = #{1 <= m <= x : P(m) <= y}.
//!
//! Two exact routes are kept side by side, a direct scan over the factor
//! table and a memoized Buchstab recursion, so each can check the other.
//! The integer 1 is smooth for every y.

use std::num::NonZeroUsize;

use lru::LruCache;

use crate::dickman::DickmanTable;
use crate::error::{Error, Result};
use crate::primes::PrimeSieve;

/// Default cap on memoized `(x, j)` entries.
pub const DEFAULT_MEMO_CAPACITY: usize = 1 << 20;

/// Sieve size used by [`psi_exact`] for its prime-counting shortcut.
const STANDALONE_PI_LIMIT: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsiQuery {
    pub x: u64,
    pub y: u64,
}

impl PsiQuery {
    pub fn new(x: u64, y: u64) -> Result<Self> {
        if x < 1 || y < 1 {
            return Err(Error::Parameter(format!(
                "Ψ needs x >= 1 and y >= 1, got ({x}, {y})"
            )));
        }
        Ok(Self { x, y })
    }
}

/// Ψ(x, y) by scanning every `m <= x` in the sieve.
pub fn psi_bruteforce(sieve: &PrimeSieve, x: u64, y: u64) -> Result<u64> {
    Ok(psi_bruteforce_many(sieve, x, &[y])?[0])
}

/// Ψ(x, y) for several y from a single scan of `1..=x`.
pub fn psi_bruteforce_many(sieve: &PrimeSieve, x: u64, ys: &[u64]) -> Result<Vec<u64>> {
    if x > sieve.limit() {
        return Err(Error::Domain(format!(
            "x = {x} exceeds the sieve limit {}",
            sieve.limit()
        )));
    }
    let mut counts = vec![0; ys.len()];
    for m in 1..=x {
        let p = sieve.largest_prime_factor(m)?;
        for (c, &y) in counts.iter_mut().zip(ys) {
            if p <= y {
                *c += 1;
            }
        }
    }
    Ok(counts)
}

/// Memoized Buchstab recursion over a borrowed sieve.
///
/// With `p_0 = 1` and `p_j` the j-th prime, the recursion
/// `Ψ(x, p_j) = Ψ(x, p_{j-1}) + Ψ(⌊x/p_j⌋, p_j)` is unrolled to
/// `Ψ(x, p_j) = 1 + Σ_{i <= j} Ψ(⌊x/p_i⌋, p_i)`. Two closed forms cut it
/// short: `Ψ(x, p_j) = x` once `p_j >= x`, and when `p_j² >= x` (with x in
/// sieve range) each `m <= x` has at most one prime factor above `p_j`, so
/// `Ψ(x, p_j) = x - Σ_{p_j < p <= x} ⌊x/p⌋`.
pub struct SmoothCounter<'a> {
    sieve: &'a PrimeSieve,
    memo: LruCache<(u64, u32), u64>,
}

impl<'a> SmoothCounter<'a> {
    pub fn new(sieve: &'a PrimeSieve) -> Self {
        Self::with_capacity(sieve, DEFAULT_MEMO_CAPACITY)
    }

    pub fn with_capacity(sieve: &'a PrimeSieve, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("capacity is at least 1");
        Self {
            sieve,
            memo: LruCache::new(cap),
        }
    }

    pub fn sieve(&self) -> &PrimeSieve {
        self.sieve
    }

    /// Number of memoized entries currently held.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// Ψ(x, y); `x = 0` gives 0. Needs `min(x, y)` within the sieve.
    pub fn count(&mut self, x: u64, y: u64) -> Result<u64> {
        if x == 0 {
            return Ok(0);
        }
        if y == 0 {
            return Err(Error::Parameter("Ψ needs y >= 1".into()));
        }
        if y >= x {
            return Ok(x);
        }
        if y > self.sieve.limit() {
            return Err(Error::Domain(format!(
                "y = {y} exceeds the sieve limit {}",
                self.sieve.limit()
            )));
        }
        let j = self.sieve.prime_count(y) as u32;
        Ok(self.psi(x, j))
    }

    fn psi(&mut self, x: u64, j: u32) -> u64 {
        if x == 0 {
            return 0;
        }
        if j == 0 || x == 1 {
            return 1;
        }
        let primes = self.sieve.primes();
        let pj = primes[j as usize - 1] as u64;
        if pj >= x {
            return x;
        }
        if j == 1 {
            // powers of two
            return 64 - x.leading_zeros() as u64;
        }
        if pj.saturating_mul(pj) >= x && x <= self.sieve.limit() {
            return x - self.large_prime_multiples(x, pj);
        }
        if let Some(&v) = self.memo.get(&(x, j)) {
            return v;
        }
        let mut total = 1u64;
        for i in 1..=j {
            let p = primes[i as usize - 1] as u64;
            let q = x / p;
            if q == 0 {
                break;
            }
            total += if p >= q { q } else { self.psi(q, i) };
        }
        self.memo.put((x, j), total);
        total
    }
}

impl SmoothCounter<'_> {
    /// `Σ_{y < p <= x} ⌊x/p⌋`, grouping primes by the common quotient.
    fn large_prime_multiples(&self, x: u64, y: u64) -> u64 {
        let mut total = 0;
        let mut start = y + 1;
        let mut below = self.sieve.prime_count(y) as u64;
        while start <= x {
            let q = x / start;
            let end = x / q;
            let upto = self.sieve.prime_count(end) as u64;
            total += q * (upto - below);
            below = upto;
            start = end + 1;
        }
        total
    }
}

/// Ψ(x, y) through the Buchstab recursion with its own sieve.
pub fn psi_exact(x: u64, y: u64) -> Result<u64> {
    let q = PsiQuery::new(x, y)?;
    if q.y >= q.x {
        return Ok(q.x);
    }
    let limit = q.y.max(q.x.min(STANDALONE_PI_LIMIT)).max(2);
    let sieve = PrimeSieve::new(limit)?;
    SmoothCounter::new(&sieve).count(q.x, q.y)
}

/// Dickman's approximation `x · ρ(log x / log y)`.
pub fn psi_dickman(table: &DickmanTable, x: f64, y: f64) -> Result<f64> {
    if !(y >= 2.0) || !(x >= y) || !x.is_finite() {
        return Err(Error::Parameter(format!(
            "Dickman estimate needs x >= y >= 2, got ({x}, {y})"
        )));
    }
    let u = x.ln() / y.ln();
    Ok(x * table.rho(u)?)
}
