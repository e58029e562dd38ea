//! Smallest-prime-factor sieve and prime reciprocal sums.

use crate::error::{Error, Result};

/// Largest supported sieve limit.
pub const MAX_LIMIT: u64 = 1 << 31;

/// Default memory budget for the factor table, in bytes.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;

/// Least prime factor of every `2 <= m <= limit`, plus the ascending prime list.
#[derive(Debug, Clone)]
pub struct PrimeSieve {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u32>,
}

impl PrimeSieve {
    pub fn new(limit: u64) -> Result<Self> {
        Self::with_budget(limit, DEFAULT_MEMORY_BUDGET)
    }

    /// Linear sieve; every composite is struck exactly once by its least prime.
    pub fn with_budget(limit: u64, budget_bytes: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::Parameter(format!(
                "sieve limit must be >= 2, got {limit}"
            )));
        }
        if limit > MAX_LIMIT {
            return Err(Error::Resource(format!(
                "sieve limit {limit} exceeds the supported maximum {MAX_LIMIT}"
            )));
        }
        let need = (limit + 1) * 4;
        if need > budget_bytes {
            return Err(Error::Resource(format!(
                "sieve to {limit} needs {need} bytes, budget is {budget_bytes}"
            )));
        }
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                if p > si {
                    break;
                }
                let Some(m) = i.checked_mul(p as usize) else {
                    break;
                };
                if m > n {
                    break;
                }
                spf[m] = p;
            }
        }
        Ok(Self { limit, spf, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// All primes up to the limit, ascending.
    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    pub fn is_prime(&self, m: u64) -> bool {
        m >= 2 && m <= self.limit && self.spf[m as usize] as u64 == m
    }

    pub fn smallest_prime_factor(&self, m: u64) -> Option<u64> {
        (m >= 2 && m <= self.limit).then(|| self.spf[m as usize] as u64)
    }

    /// π(x) for `x <= limit`.
    pub fn prime_count(&self, x: u64) -> usize {
        let x = x.min(self.limit);
        self.primes.partition_point(|&p| p as u64 <= x)
    }

    /// Primes in `[lo, hi]`, ascending.
    pub fn primes_in(&self, lo: u64, hi: u64) -> &[u32] {
        if hi < lo {
            return &[];
        }
        let a = self.primes.partition_point(|&p| (p as u64) < lo);
        let b = self.primes.partition_point(|&p| p as u64 <= hi);
        &self.primes[a..b.max(a)]
    }

    /// Prime factors of `m <= limit` with multiplicity, ascending.
    pub fn factors(&self, m: u64) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        self.factors_into(m, &mut out)?;
        Ok(out)
    }

    /// Like [`factors`](Self::factors), but also accepts `limit < m <= limit²`
    /// by trial division with the sieved primes until the cofactor is in range.
    pub fn factors_into(&self, m: u64, out: &mut Vec<u64>) -> Result<()> {
        out.clear();
        if m == 0 {
            return Err(Error::Domain("cannot factor 0".into()));
        }
        let mut r = m;
        if r > self.limit {
            if (r as u128) > (self.limit as u128) * (self.limit as u128) {
                return Err(Error::Domain(format!(
                    "{m} exceeds the square of the sieve limit {}",
                    self.limit
                )));
            }
            for &p in &self.primes {
                let p = p as u64;
                if p * p > r || r <= self.limit {
                    break;
                }
                while r % p == 0 {
                    out.push(p);
                    r /= p;
                }
            }
            if r > self.limit {
                // no prime factor up to sqrt(r): r is prime
                out.push(r);
                return Ok(());
            }
        }
        while r > 1 {
            let p = self.spf[r as usize] as u64;
            out.push(p);
            r /= p;
        }
        Ok(())
    }

    /// Largest prime factor of `m <= limit`; 1 for `m = 1`.
    pub fn largest_prime_factor(&self, m: u64) -> Result<u64> {
        if m == 0 || m > self.limit {
            return Err(Error::Domain(format!(
                "{m} is outside the sieve range [1, {}]",
                self.limit
            )));
        }
        let mut r = m;
        let mut last = 1;
        while r > 1 {
            last = self.spf[r as usize] as u64;
            r /= last;
        }
        Ok(last)
    }

    fn check_range(&self, a: u64, b: u64) -> Result<()> {
        if a < 2 || a > b || b > self.limit {
            return Err(Error::Domain(format!(
                "prime range [{a}, {b}] must satisfy 2 <= a <= b <= {}",
                self.limit
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`PrimeSieve::new`].
pub fn build_sieve(limit: u64) -> Result<PrimeSieve> {
    PrimeSieve::new(limit)
}

/// Σ 1/p over primes `a <= p <= b`, accumulated in ascending order of p.
pub fn mertens_sum(sieve: &PrimeSieve, a: u64, b: u64) -> Result<f64> {
    mertens_accumulate(sieve, 0.0, a, b)
}

/// Continues an ascending reciprocal sum from `acc`. Splitting a range and
/// chaining the pieces through this function reproduces the one-shot sum
/// bit for bit.
pub fn mertens_accumulate(sieve: &PrimeSieve, acc: f64, a: u64, b: u64) -> Result<f64> {
    sieve.check_range(a, b)?;
    Ok(sieve
        .primes_in(a, b)
        .iter()
        .fold(acc, |s, &p| s + 1.0 / p as f64))
}

/// `Σ_{p <= x} 1/p - log log x`, which tends to the Mertens constant.
pub fn mertens_constant_estimate(sieve: &PrimeSieve, x: u64) -> Result<f64> {
    if x < 3 {
        return Err(Error::Domain(format!(
            "Mertens estimate needs x >= 3, got {x}"
        )));
    }
    Ok(mertens_sum(sieve, 2, x)? - (x as f64).ln().ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division_is_prime(m: u64) -> bool {
        m >= 2 && (2..).take_while(|d| d * d <= m).all(|d| m % d != 0)
    }

    #[test]
    fn small_sieve() {
        let s = build_sieve(10).unwrap();
        assert_eq!(s.primes(), &[2, 3, 5, 7]);
        assert_eq!(s.smallest_prime_factor(9), Some(3));
        assert_eq!(s.smallest_prime_factor(10), Some(2));
        assert_eq!(s.smallest_prime_factor(11), None);
        let s = build_sieve(40).unwrap();
        assert_eq!(s.smallest_prime_factor(35), Some(5));
    }

    #[test]
    fn matches_trial_division() {
        let s = build_sieve(100_000).unwrap();
        for m in 2..=100_000u64 {
            assert_eq!(s.is_prime(m), trial_division_is_prime(m), "m = {m}");
            let p = s.smallest_prime_factor(m).unwrap();
            assert_eq!(m % p, 0);
            assert!(trial_division_is_prime(p));
        }
        assert_eq!(s.primes().len(), 9592);
    }

    #[test]
    fn limit_errors() {
        assert!(matches!(build_sieve(1), Err(Error::Parameter(_))));
        assert!(matches!(
            build_sieve(MAX_LIMIT + 1),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            PrimeSieve::with_budget(1000, 100),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn factorization() {
        let s = build_sieve(1000).unwrap();
        assert_eq!(s.factors(360).unwrap(), vec![2, 2, 2, 3, 3, 5]);
        assert_eq!(s.factors(1).unwrap(), Vec::<u64>::new());
        // beyond the limit, through trial division
        assert_eq!(s.factors(999_983).unwrap(), vec![999_983]);
        assert_eq!(s.factors(997 * 991).unwrap(), vec![991, 997]);
        assert_eq!(s.factors(2 * 3 * 83 * 1009).unwrap(), vec![2, 3, 83, 1009]);
        assert!(s.factors(1_000_001 * 1000).is_err());
        assert_eq!(s.largest_prime_factor(1).unwrap(), 1);
        assert_eq!(s.largest_prime_factor(12).unwrap(), 3);
    }

    #[test]
    fn mertens_examples() {
        let s = build_sieve(100).unwrap();
        let v = mertens_sum(&s, 2, 10).unwrap();
        assert!((v - (0.5 + 1.0 / 3.0 + 0.2 + 1.0 / 7.0)).abs() < 1e-15);
        assert_eq!(mertens_sum(&s, 2, 2).unwrap(), 0.5);
        assert_eq!(mertens_sum(&s, 24, 28).unwrap(), 0.0);
        let c3 = mertens_constant_estimate(&s, 3).unwrap();
        assert!((c3 - (0.5 + 1.0 / 3.0 - 3f64.ln().ln())).abs() < 1e-15);
        assert!((c3 - 0.7392).abs() < 1e-4);
        let c10 = mertens_constant_estimate(&s, 10).unwrap();
        assert!((c10 - 0.3422).abs() < 1e-4);
    }

    #[test]
    fn mertens_errors() {
        let s = build_sieve(100).unwrap();
        assert!(matches!(mertens_sum(&s, 1, 10), Err(Error::Domain(_))));
        assert!(matches!(mertens_sum(&s, 10, 5), Err(Error::Domain(_))));
        assert!(matches!(mertens_sum(&s, 2, 101), Err(Error::Domain(_))));
        assert!(matches!(
            mertens_constant_estimate(&s, 2),
            Err(Error::Domain(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn mertens_sum_is_additive(a in 2u64..5000, m in 2u64..5000, b in 2u64..5000) {
            let s = build_sieve(5000).unwrap();
            let mut v = [a, m, b];
            v.sort();
            let [a, m, b] = v;
            proptest::prop_assume!(m < b);
            let whole = mertens_sum(&s, a, b).unwrap();
            let left = mertens_sum(&s, a, m).unwrap();
            let chained = mertens_accumulate(&s, left, m + 1, b).unwrap();
            proptest::prop_assert_eq!(chained.to_bits(), whole.to_bits());
            let split = left + mertens_sum(&s, m + 1, b).unwrap();
            proptest::prop_assert!((split - whole).abs() <= 1e-14 * whole.max(1e-300));
        }
    }
}
