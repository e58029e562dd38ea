//! A finite-n harness for the box criterion of weak convergence to PD(1).
//!
//! For a closed box `B ⊂ U` with `R · diam(B) < d(B, U^c)`, the criterion
//! asks for `P(X_n ∈ B) >= (1 - ε) vol(B) inf_B f` in the limit. Here the
//! left side is computed along a finite ladder of n and compared against
//! the right side box by box.

use serde::{Deserialize, Serialize};

use crate::dickman::DickmanTable;
use crate::error::{Error, Result};
use crate::factor_stats::{box_probability_via_psi_with, sample_box_probability};
use crate::powers::floor_pow;
use crate::primes::PrimeSieve;
use crate::region::BoxSpec;
use crate::smoothcount::SmoothCounter;

/// Monte-Carlo verdicts allow this many standard errors of slack.
pub const STAT_MARGIN_SIGMAS: f64 = 4.0;

/// Ladder entries at or below this n are computed exactly.
pub const DEFAULT_EXACT_THRESHOLD: u64 = 1_000_000;

/// Default per-axis subdivision for [`inf_density_on_box`].
pub const DEFAULT_INF_SUBDIVISIONS: usize = 8;

/// Largest sieve the harness builds for Monte-Carlo factoring.
const MC_SIEVE_CAP: u64 = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCriterion {
    pub epsilon: f64,
    pub r: f64,
    pub k: usize,
}

impl BoxCriterion {
    /// `R = k / (2ε)`.
    pub fn new(epsilon: f64, k: usize) -> Result<Self> {
        Self::with_r(epsilon, k as f64 / (2.0 * epsilon), k)
    }

    pub fn with_r(epsilon: f64, r: f64, k: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Parameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Parameter(format!(
                "R must be finite and >= 0, got {r}"
            )));
        }
        if k < 1 {
            return Err(Error::Parameter("k must be >= 1".into()));
        }
        Ok(Self { epsilon, r, k })
    }
}

/// `d(B, U^c)`, the distance from the box to the complement of U.
///
/// U is cut out by the half-spaces `t_i - t_{i+1} > 0`, `t_k > 0` and
/// `1 - Σ t_i > 0`. The distance to a half-space is an affine function of
/// the point divided by the normal length, so its minimum over the box sits
/// at a vertex and can be written down per facet.
pub fn distance_to_complement(b: &BoxSpec) -> Result<f64> {
    b.require_inside_region()?;
    let k = b.k();
    let t = b.lower();
    let mut d = t[k - 1];
    for i in 0..k - 1 {
        d = d.min((t[i] - b.upper(i + 1)) / std::f64::consts::SQRT_2);
    }
    let top: f64 = b.uppers().iter().sum();
    d = d.min((1.0 - top) / (k as f64).sqrt());
    Ok(d)
}

/// `R · diam(B) < d(B, U^c)`.
pub fn box_admissible(b: &BoxSpec, crit: &BoxCriterion) -> Result<bool> {
    check_dimension(b, crit)?;
    Ok(crit.r * b.diameter() < distance_to_complement(b)?)
}

fn check_dimension(b: &BoxSpec, crit: &BoxCriterion) -> Result<()> {
    if b.k() != crit.k {
        return Err(Error::Parameter(format!(
            "box has dimension {} but the criterion is for k = {}",
            b.k(),
            crit.k
        )));
    }
    Ok(())
}

/// Factor-wise lower bound on f over the box: `∏ 1/(t_i + dt_i)` times
/// `ρ((1 - Σ t_i) / t_k)`. Both factors are monotone in every coordinate,
/// so each is minimized at a vertex.
pub fn density_lower_bound(table: &DickmanTable, b: &BoxSpec) -> Result<f64> {
    b.require_inside_region()?;
    let inv: f64 = b.uppers().iter().map(|u| 1.0 / u).product();
    Ok(inv * table.rho(b.u0())?)
}

/// Certified lower bound on `inf_B f`.
///
/// The box is split into `subdivisions^k` cells and the smallest
/// factor-wise bound over the cells is returned. Every cell bound is a valid
/// lower bound for f on that cell, so the result is one for f on B, and it
/// never falls below the undivided bound.
pub fn inf_density_on_box(table: &DickmanTable, b: &BoxSpec, subdivisions: usize) -> Result<f64> {
    b.require_inside_region()?;
    let m = subdivisions.max(1);
    let k = b.k();
    let h: Vec<f64> = b.widths().iter().map(|d| d / m as f64).collect();
    let mut idx = vec![0usize; k];
    let mut best = f64::INFINITY;
    loop {
        let t: Vec<f64> = (0..k)
            .map(|i| b.lower()[i] + idx[i] as f64 * h[i])
            .collect();
        let cell = BoxSpec::new(t, h.clone())?;
        best = best.min(density_lower_bound(table, &cell)?);
        let mut axis = k;
        loop {
            if axis == 0 {
                return Ok(best.max(density_lower_bound(table, b)?));
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < m {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub n: u64,
    pub method: Method,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    #[serde(rename = "box")]
    pub box_spec: String,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub admissible: bool,
    pub lower_bound: f64,
    pub entries: Vec<LadderEntry>,
    /// Estimates non-decreasing along the ladder within statistical slack.
    pub trend: bool,
}

impl ConvergenceReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.verdict)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub samples: u64,
    pub seed: u64,
    pub exact_threshold: u64,
    pub inf_subdivisions: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: crate::DEFAULT_SEED,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            inf_subdivisions: DEFAULT_INF_SUBDIVISIONS,
        }
    }
}

/// Evaluates the criterion at every n of the ladder.
///
/// Entries with `n <= exact_threshold` use the prime-tuple identity; larger
/// n are sampled. Monte-Carlo entry `i` uses seed `seed + i`.
pub fn run_criterion(
    table: &DickmanTable,
    ladder: &[u64],
    b: &BoxSpec,
    crit: &BoxCriterion,
    opts: &RunOptions,
) -> Result<ConvergenceReport> {
    check_dimension(b, crit)?;
    b.require_inside_region()?;
    let dist = distance_to_complement(b)?;
    let lhs = crit.r * b.diameter();
    if !(lhs < dist) {
        return Err(Error::Precondition(format!(
            "box is not admissible: R·diam(B) = {lhs} is not < d(B, U^c) = {dist}"
        )));
    }
    if ladder.iter().any(|&n| n < 2) {
        return Err(Error::Parameter("ladder entries must be >= 2".into()));
    }
    if opts.samples < 1 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }

    let lower_bound =
        (1.0 - crit.epsilon) * b.volume() * inf_density_on_box(table, b, opts.inf_subdivisions)?;

    let top = b.upper(0).min(1.0);
    let mut limit = 2u64;
    for &n in ladder {
        if n <= opts.exact_threshold {
            limit = limit.max(floor_pow(n, top));
        } else {
            limit = limit.max(n.min(MC_SIEVE_CAP)).max(integer_sqrt(n) + 1);
        }
    }
    let sieve = PrimeSieve::new(limit)?;
    let mut counter = SmoothCounter::new(&sieve);

    let mut entries = Vec::with_capacity(ladder.len());
    for (i, &n) in ladder.iter().enumerate() {
        let entry = if n <= opts.exact_threshold {
            let c = box_probability_via_psi_with(&mut counter, n, b)?;
            let p = c.ratio();
            LadderEntry {
                n,
                method: Method::Exact,
                p,
                std_err: None,
                verdict: p >= lower_bound,
            }
        } else {
            let e = sample_box_probability(
                &sieve,
                n,
                b,
                opts.samples,
                opts.seed.wrapping_add(i as u64),
            )?;
            let verdict = e.p_hat >= lower_bound - STAT_MARGIN_SIGMAS * e.std_err;
            LadderEntry {
                n,
                method: Method::Mc,
                p: e.p_hat,
                std_err: Some(e.std_err),
                verdict,
            }
        };
        entries.push(entry);
    }
    let trend = entries.windows(2).all(|w| {
        let slack =
            STAT_MARGIN_SIGMAS * (w[0].std_err.unwrap_or(0.0) + w[1].std_err.unwrap_or(0.0));
        w[1].p >= w[0].p - slack
    });

    Ok(ConvergenceReport {
        box_spec: b.to_string(),
        epsilon: crit.epsilon,
        r: crit.r,
        admissible: true,
        lower_bound,
        entries,
        trend,
    })
}

fn integer_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}
