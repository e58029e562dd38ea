//! Ranked prime factors of integers and the probability that the scaled
//! vector `(log_n P_1(N), …, log_n P_k(N))` of a uniform `N <= n` lands in a
//! box.
//!
//! Three routes to `P(X_n ∈ B)` are provided: a scan over every `m <= n`,
//! the prime-tuple sum `(1/n) Σ Ψ(n / (p_1⋯p_k), p_k)`, and Monte Carlo.
//! All of them classify primes against the box endpoints through the same
//! integer ranges `[⌈n^{t_i}⌉, ⌊n^{t_i + dt_i}⌋]`.

use rand::distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{self, EmpiricalEstimate};
use crate::powers::{ceil_pow, floor_pow};
use crate::primes::PrimeSieve;
use crate::region::BoxSpec;
use crate::smoothcount::{psi_exact, SmoothCounter};

/// Integers per work item of the exhaustive scan.
const SCAN_BLOCK: u64 = 1 << 16;

/// A sampled integer with its ranked prime factors, padded with 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorVector {
    pub n: u64,
    pub value: u64,
    pub primes: Vec<u64>,
    pub logs: Vec<f64>,
}

impl FactorVector {
    pub fn new(sieve: &PrimeSieve, n: u64, value: u64, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("n must be >= 2, got {n}")));
        }
        if value < 1 || value > n {
            return Err(Error::Domain(format!("value {value} outside [1, {n}]")));
        }
        let primes = ranked_factors(sieve, value, k)?;
        let ln_n = (n as f64).ln();
        let logs = primes.iter().map(|&p| (p as f64).ln() / ln_n).collect();
        Ok(Self {
            n,
            value,
            primes,
            logs,
        })
    }
}

/// The `k` largest prime factors of `value` with multiplicity, descending,
/// padded with 1.
pub fn ranked_factors(sieve: &PrimeSieve, value: u64, k: usize) -> Result<Vec<u64>> {
    let mut buf = Vec::new();
    sieve.factors_into(value, &mut buf)?;
    let mut out: Vec<u64> = buf.iter().rev().take(k).copied().collect();
    out.resize(k, 1);
    Ok(out)
}

/// Inclusive integer ranges `[⌈n^{t_i}⌉, ⌊n^{t_i + dt_i}⌋]` for each axis.
pub fn prime_ranges(n: u64, b: &BoxSpec) -> Vec<(u64, u64)> {
    (0..b.k())
        .map(|i| (ceil_pow(n, b.lower()[i]), floor_pow(n, b.upper(i))))
        .collect()
}

/// Exact hit count over `1..=total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxCount {
    pub count: u64,
    pub total: u64,
}

impl BoxCount {
    pub fn ratio(&self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

fn factors_hit(factors_ascending: &[u64], ranges: &[(u64, u64)]) -> bool {
    let mut ranked = factors_ascending.iter().rev();
    ranges.iter().all(|&(lo, hi)| {
        let p = ranked.next().copied().unwrap_or(1);
        lo <= p && p <= hi
    })
}

/// `|{m <= n : P_i(m) ∈ [n^{t_i}, n^{t_i + dt_i}] for all i}|` by factoring
/// every `m`.
pub fn box_probability_exact(sieve: &PrimeSieve, n: u64, b: &BoxSpec) -> Result<BoxCount> {
    if n < 1 || n > sieve.limit() {
        return Err(Error::Domain(format!(
            "n = {n} must lie in [1, {}]",
            sieve.limit()
        )));
    }
    let ranges = prime_ranges(n, b);
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(BoxCount { count: 0, total: n });
    }
    let blocks = n.div_ceil(SCAN_BLOCK);
    let count = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let start = blk * SCAN_BLOCK + 1;
            let end = (start + SCAN_BLOCK - 1).min(n);
            let mut buf = Vec::with_capacity(64);
            let mut hits = 0u64;
            for m in start..=end {
                sieve
                    .factors_into(m, &mut buf)
                    .expect("m is within the sieve");
                if factors_hit(&buf, &ranges) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(BoxCount { count, total: n })
}

/// The same count through the prime-tuple identity: sum over non-increasing
/// prime tuples `p_1 >= … >= p_k`, `p_i` in the i-th range, of
/// `Ψ(⌊n / (p_1⋯p_k)⌋, p_k)`.
///
/// For boxes inside U the ranges are disjoint and the tuples strictly
/// decreasing; the non-strict enumeration also makes the identity hold for
/// boxes outside U.
pub fn box_probability_via_psi(sieve: &PrimeSieve, n: u64, b: &BoxSpec) -> Result<BoxCount> {
    let mut counter = SmoothCounter::new(sieve);
    box_probability_via_psi_with(&mut counter, n, b)
}

/// [`box_probability_via_psi`] with a caller-owned memo.
pub fn box_probability_via_psi_with(
    counter: &mut SmoothCounter<'_>,
    n: u64,
    b: &BoxSpec,
) -> Result<BoxCount> {
    if n < 1 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    if b.lower().iter().any(|&t| t <= 0.0) {
        return Err(Error::Precondition(
            "the prime-tuple identity needs every t_i > 0".into(),
        ));
    }
    let ranges: Vec<(u64, u64)> = prime_ranges(n, b)
        .into_iter()
        .map(|(lo, hi)| (lo.max(2), hi.min(n)))
        .collect();
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(BoxCount { count: 0, total: n });
    }
    let need = ranges.iter().map(|r| r.1).max().unwrap_or(0);
    if need > counter.sieve().limit() {
        return Err(Error::Domain(format!(
            "prime range reaches {need}, beyond the sieve limit {}",
            counter.sieve().limit()
        )));
    }
    let count = tuple_sum(counter, &ranges, 0, n, u64::MAX)?;
    Ok(BoxCount { count, total: n })
}

/// Σ over primes in `ranges[i..]` not exceeding `cap`, with `rest = ⌊n / (p_1⋯p_{i})⌋`.
fn tuple_sum(
    counter: &mut SmoothCounter<'_>,
    ranges: &[(u64, u64)],
    i: usize,
    rest: u64,
    cap: u64,
) -> Result<u64> {
    let (lo, hi) = ranges[i];
    let hi = hi.min(cap).min(rest);
    if lo > hi {
        return Ok(0);
    }
    let primes: Vec<u64> = counter
        .sieve()
        .primes_in(lo, hi)
        .iter()
        .map(|&p| p as u64)
        .collect();
    let mut total = 0;
    for p in primes {
        let next = rest / p;
        if next == 0 {
            break;
        }
        total += if i + 1 == ranges.len() {
            counter.count(next, p)?
        } else {
            tuple_sum(counter, ranges, i + 1, next, p)?
        };
    }
    Ok(total)
}

/// Monte-Carlo estimate of `P(X_n ∈ B)` with `N` uniform on `[1, n]`.
///
/// `n` may exceed the sieve limit up to its square; such draws are
/// factored by trial division. Deterministic in `(seed, samples)`.
pub fn sample_box_probability(
    sieve: &PrimeSieve,
    n: u64,
    b: &BoxSpec,
    samples: u64,
    seed: u64,
) -> Result<EmpiricalEstimate> {
    if samples < 1 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    if n < 1 || (n as u128) > (sieve.limit() as u128).pow(2) {
        return Err(Error::Domain(format!(
            "n = {n} must lie in [1, {}²]",
            sieve.limit()
        )));
    }
    let ranges = prime_ranges(n, b);
    if ranges.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(EmpiricalEstimate::new(0, samples, seed));
    }
    let dist = Uniform::new_inclusive(1, n).map_err(|e| Error::Parameter(e.to_string()))?;
    montecarlo::count_hits(samples, seed, |rng, count| {
        let mut buf = Vec::with_capacity(64);
        let mut hits = 0;
        for _ in 0..count {
            let m = dist.sample(rng);
            sieve.factors_into(m, &mut buf)?;
            if factors_hit(&buf, &ranges) {
                hits += 1;
            }
        }
        Ok(hits)
    })
}

/// Draws `count` uniform integers in `[1, n]` with their ranked factors.
pub fn sample_factors(
    sieve: &PrimeSieve,
    n: u64,
    count: u64,
    k: usize,
    seed: u64,
) -> Result<Vec<FactorVector>> {
    if n < 2 || (n as u128) > (sieve.limit() as u128).pow(2) {
        return Err(Error::Domain(format!(
            "n = {n} must lie in [2, {}²]",
            sieve.limit()
        )));
    }
    let dist = Uniform::new_inclusive(1, n).map_err(|e| Error::Parameter(e.to_string()))?;
    let chunks = count.div_ceil(montecarlo::CHUNK_SIZE);
    let parts: Vec<Result<Vec<FactorVector>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = montecarlo::CHUNK_SIZE.min(count - c * montecarlo::CHUNK_SIZE);
            let mut rng = montecarlo::stream_rng(seed, c);
            (0..len)
                .map(|_| FactorVector::new(sieve, n, dist.sample(&mut rng), k))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// `P(L_1(n) <= 1/t) = Ψ(n, n^{1/t}) / n`.
pub fn marginal_l1_cdf(n: u64, t: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Parameter(format!("n must be >= 2, got {n}")));
    }
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::Parameter(format!("t must be >= 1, got {t}")));
    }
    let y = floor_pow(n, 1.0 / t).max(1);
    Ok(psi_exact(n, y)? as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranked_examples() {
        let s = PrimeSieve::new(1000).unwrap();
        assert_eq!(ranked_factors(&s, 12, 3).unwrap(), vec![3, 2, 2]);
        assert_eq!(ranked_factors(&s, 1, 2).unwrap(), vec![1, 1]);
        assert_eq!(ranked_factors(&s, 97, 2).unwrap(), vec![97, 1]);
        assert!(ranked_factors(&s, 0, 2).is_err());
    }

    #[test]
    fn factor_vector_logs() {
        let s = PrimeSieve::new(1000).unwrap();
        let v = FactorVector::new(&s, 1000, 360, 3).unwrap();
        assert_eq!(v.primes, vec![5, 3, 3]);
        assert!((v.logs[0] - 5f64.ln() / 1000f64.ln()).abs() < 1e-15);
        assert!(v.logs.windows(2).all(|w| w[0] >= w[1]));
        let one = FactorVector::new(&s, 1000, 1, 2).unwrap();
        assert_eq!(one.logs, vec![0.0, 0.0]);
        assert!(FactorVector::new(&s, 1000, 1001, 2).is_err());
    }

    #[test]
    fn k1_example_by_enumeration() {
        // n = 100, box [0.5, 0.9]: largest prime factor in [10, 63.09…]
        let s = PrimeSieve::new(100).unwrap();
        let b = BoxSpec::from_pairs(&[(0.5, 0.4)]).unwrap();
        assert_eq!(prime_ranges(100, &b), vec![(10, 63)]);
        let oracle = (1..=100u64)
            .filter(|&m| {
                let p = s.largest_prime_factor(m).unwrap();
                (11..=61).contains(&p)
            })
            .count() as u64;
        let exact = box_probability_exact(&s, 100, &b).unwrap();
        assert_eq!(exact.count, oracle);
        assert_eq!(box_probability_via_psi(&s, 100, &b).unwrap().count, oracle);
    }

    #[test]
    fn box_beyond_one_is_empty() {
        let s = PrimeSieve::new(10_000).unwrap();
        let b = BoxSpec::from_pairs(&[(1.1, 0.1)]).unwrap();
        assert_eq!(box_probability_exact(&s, 10_000, &b).unwrap().count, 0);
        assert_eq!(box_probability_via_psi(&s, 10_000, &b).unwrap().count, 0);
        assert_eq!(
            sample_box_probability(&s, 10_000, &b, 100, 1)
                .unwrap()
                .p_hat,
            0.0
        );
    }

    #[test]
    fn psi_route_k1() {
        let s = PrimeSieve::new(1000).unwrap();
        let b = BoxSpec::from_pairs(&[(0.5, 0.3)]).unwrap();
        let mut direct = 0;
        for p in s.primes_in(32, 251) {
            direct += psi_exact(1000 / *p as u64, *p as u64).unwrap();
        }
        let via = box_probability_via_psi(&s, 1000, &b).unwrap();
        assert_eq!(via.count, direct);
        assert_eq!(
            via.count,
            box_probability_exact(&s, 1000, &b).unwrap().count
        );
    }

    #[test]
    fn empty_prime_range() {
        // [1000^0.6, 1000^0.601] = [63.09, 63.37] contains no integer
        let s = PrimeSieve::new(1000).unwrap();
        let b = BoxSpec::from_pairs(&[(0.6, 0.001)]).unwrap();
        assert_eq!(box_probability_via_psi(&s, 1000, &b).unwrap().count, 0);
        assert_eq!(box_probability_exact(&s, 1000, &b).unwrap().count, 0);
    }

    #[test]
    fn boxes_outside_region_still_agree() {
        let s = PrimeSieve::new(20_000).unwrap();
        for b in [
            BoxSpec::from_pairs(&[(0.2, 0.3), (0.2, 0.3)]).unwrap(),
            BoxSpec::from_pairs(&[(0.1, 0.2), (0.1, 0.2), (0.1, 0.2)]).unwrap(),
        ] {
            let e = box_probability_exact(&s, 20_000, &b).unwrap();
            let p = box_probability_via_psi(&s, 20_000, &b).unwrap();
            assert_eq!(e, p, "box {b}");
        }
    }

    #[test]
    fn marginal_cdf() {
        assert_eq!(marginal_l1_cdf(1000, 1.0).unwrap(), 1.0);
        let s = PrimeSieve::new(10_000).unwrap();
        let scan = (1..=10_000u64)
            .filter(|&m| s.largest_prime_factor(m).unwrap() <= 10)
            .count() as f64
            / 10_000.0;
        assert_eq!(marginal_l1_cdf(10_000, 4.0).unwrap(), scan);
        assert!(marginal_l1_cdf(1, 2.0).is_err());
        assert!(marginal_l1_cdf(100, 0.5).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = PrimeSieve::new(100_000).unwrap();
        let b = BoxSpec::from_pairs(&[(0.5, 0.1)]).unwrap();
        let a = sample_box_probability(&s, 100_000, &b, 50_000, 9).unwrap();
        assert_eq!(
            a,
            sample_box_probability(&s, 100_000, &b, 50_000, 9).unwrap()
        );
        assert_eq!(a.total, 50_000);
        assert!(sample_box_probability(&s, 100_000, &b, 0, 9).is_err());
    }

    #[test]
    fn sampling_beyond_sieve() {
        let s = PrimeSieve::new(2_000).unwrap();
        let b = BoxSpec::from_pairs(&[(0.5, 0.1)]).unwrap();
        let e = sample_box_probability(&s, 4_000_000, &b, 20_000, 3).unwrap();
        assert!(e.p_hat > 0.1 && e.p_hat < 0.3);
        assert!(sample_box_probability(&s, 4_000_001, &b, 10, 3).is_err());
    }

    #[test]
    fn sample_factors_rows() {
        let s = PrimeSieve::new(10_000).unwrap();
        let rows = sample_factors(&s, 10_000, 100, 3, 5).unwrap();
        assert_eq!(rows.len(), 100);
        for r in &rows {
            let prod: u64 = r.primes.iter().product();
            assert_eq!(r.value % prod, 0);
            assert!(r.primes.windows(2).all(|w| w[0] >= w[1]));
            assert!(r.logs.iter().all(|&l| (0.0..=1.0).contains(&l)));
        }
        assert_eq!(rows, sample_factors(&s, 10_000, 100, 3, 5).unwrap());
    }
}
