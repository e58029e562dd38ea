//! The acceptance bundle: one function per criterion, grouped into named
//! suites, with a JSON report that carries no timings so that repeated runs
//! are byte-identical.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::convergence::{self, BoxCriterion, RunOptions};
use crate::dickman::{self, DickmanTable, DEFAULT_STEP, DEFAULT_U_MAX};
use crate::error::{Error, Result};
use crate::factor_stats::{box_probability_exact, box_probability_via_psi_with};
use crate::pd_process::{pd_box_probability, pd_sample_l1_cdf, DEFAULT_TRUNCATION};
use crate::powers::{ceil_pow, floor_pow};
use crate::primes::{mertens_constant_estimate, mertens_sum, PrimeSieve};
use crate::quadrature::QuadratureConfig;
use crate::region::BoxSpec;
use crate::smoothcount::{psi_bruteforce, psi_bruteforce_many, psi_exact, SmoothCounter};

pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    Identities,
    Convergence,
    All,
}

impl SuiteName {
    pub fn criteria(self) -> &'static [u32] {
        match self {
            SuiteName::Identities => &[1, 2, 3, 4, 6, 7],
            SuiteName::Convergence => &[5, 8, 9, 10],
            SuiteName::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        }
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(SuiteName::Identities),
            "convergence" => Ok(SuiteName::Convergence),
            "all" => Ok(SuiteName::All),
            other => Err(Error::Parameter(format!(
                "unknown suite '{other}', expected identities, convergence or all"
            ))),
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteName::Identities => "identities",
            SuiteName::Convergence => "convergence",
            SuiteName::All => "all",
        })
    }
}

/// Settings that affect results. The thread count is deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
    pub u_max: f64,
    pub step: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: crate::DEFAULT_SEED,
            cache_dir: None,
            u_max: DEFAULT_U_MAX,
            step: DEFAULT_STEP,
        }
    }
}

impl SuiteConfig {
    pub fn table(&self) -> Result<DickmanTable> {
        match &self.cache_dir {
            Some(dir) => DickmanTable::load_or_build(dir, self.u_max, self.step),
            None => DickmanTable::build(self.u_max, self.step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub metrics: Value,
}

impl CheckResult {
    fn new(id: u32, passed: bool, metrics: Value) -> Self {
        Self {
            id,
            name: criterion_name(id).to_string(),
            passed,
            metrics,
        }
    }
}

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "dickman_analytic_segment",
        2 => "alternating_sum_identity",
        3 => "psi_oracle_equivalence",
        4 => "prime_tuple_psi_identity",
        5 => "dickman_convergence_ladder",
        6 => "mertens_stabilization",
        7 => "mertens_range_form",
        8 => "pd_sampler_marginal",
        9 => "box_convergence_k2",
        10 => "box_criterion_harness",
        _ => "unknown",
    }
}

/// Runs one criterion. `table` must have been built with step 1e-4 or finer
/// for criterion 1 to be meaningful.
pub fn run_check(id: u32, table: &DickmanTable, seed: u64) -> Result<CheckResult> {
    match id {
        1 => check_dickman_segment(table),
        2 => check_alternating_sum(table),
        3 => check_psi_oracle(),
        4 => check_prime_tuple_identity(),
        5 => check_dickman_ladder(),
        6 => check_mertens_stabilization(),
        7 => check_mertens_range(),
        8 => check_pd_marginal(seed),
        9 => check_box_convergence(table),
        10 => check_box_criterion(table, seed),
        other => Err(Error::Parameter(format!("no acceptance criterion {other}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub version: String,
    pub command: String,
    pub config: Value,
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.results.iter().find(|r| !r.passed)
    }
}

pub fn run_suite(name: SuiteName, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let table = cfg.table()?;
    let mut results = Vec::new();
    for &id in name.criteria() {
        results.push(run_check(id, &table, cfg.seed)?);
    }
    Ok(SuiteReport {
        version: REPORT_VERSION.to_string(),
        command: format!("suite --name {name}"),
        config: json!({ "seed": cfg.seed, "u_max": cfg.u_max, "step": cfg.step }),
        results,
    })
}

fn check_dickman_segment(table: &DickmanTable) -> Result<CheckResult> {
    let mut max_err = 0.0f64;
    for j in 0..=1000 {
        let u = 1.0 + j as f64 * 1e-3;
        max_err = max_err.max((table.rho(u)? - (1.0 - u.ln())).abs());
    }
    Ok(CheckResult::new(
        1,
        max_err < 1e-9,
        json!({ "max_abs_err": max_err, "tolerance": 1e-9, "step": table.step() }),
    ))
}

fn check_alternating_sum(table: &DickmanTable) -> Result<CheckResult> {
    let cfg = QuadratureConfig::default();
    let mut rows = Vec::new();
    let mut passed = true;
    for u in [1.5, 2.5, 3.5] {
        let direct = table.rho(u)?;
        let alt = dickman::rho_via_alternating_sum(u, &cfg)?;
        let err = (direct - alt).abs();
        passed &= err < 1e-6;
        rows.push(json!({ "u": u, "rho": direct, "alternating_sum": alt, "abs_err": err }));
    }
    Ok(CheckResult::new(
        2,
        passed,
        json!({ "points": rows, "tolerance": 1e-6 }),
    ))
}

const PSI_ORACLE_X_MAX: u64 = 10_000;

fn check_psi_oracle() -> Result<CheckResult> {
    let sieve = PrimeSieve::new(PSI_ORACLE_X_MAX)?;
    let mismatches: Vec<(u64, u64)> = (1..=PSI_ORACLE_X_MAX)
        .into_par_iter()
        .map(|x| -> Result<Vec<(u64, u64)>> {
            let ys = [1, 2, 3, 5, 7, 11, 13, x];
            let brute = psi_bruteforce_many(&sieve, x, &ys)?;
            let mut counter = SmoothCounter::with_capacity(&sieve, 256);
            let mut bad = Vec::new();
            for (&y, &b) in ys.iter().zip(&brute) {
                if counter.count(x, y)? != b {
                    bad.push((x, y));
                }
            }
            Ok(bad)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    // the standalone entry point builds its own sieve; spot-check it too
    let mut standalone_ok = true;
    for (x, y) in [(10_000, 13), (9_973, 97), (4_096, 2), (10_000, 10_000)] {
        standalone_ok &= psi_exact(x, y)? == psi_bruteforce(&sieve, x, y)?;
    }
    Ok(CheckResult::new(
        3,
        mismatches.is_empty() && standalone_ok,
        json!({
            "x_max": PSI_ORACLE_X_MAX,
            "pairs": PSI_ORACLE_X_MAX * 8,
            "mismatches": mismatches.len(),
            "first_mismatch": mismatches.first(),
            "standalone_spot_checks": standalone_ok,
        }),
    ))
}

/// Fixed regression boxes inside U, three per dimension.
pub fn regression_boxes() -> Vec<BoxSpec> {
    let boxes: [&[(f64, f64)]; 9] = [
        &[(0.5, 0.1)],
        &[(0.3, 0.2)],
        &[(0.15, 0.1)],
        &[(0.45, 0.1), (0.15, 0.1)],
        &[(0.5, 0.15), (0.2, 0.1)],
        &[(0.35, 0.1), (0.1, 0.15)],
        &[(0.4, 0.1), (0.2, 0.1), (0.05, 0.1)],
        &[(0.3, 0.1), (0.15, 0.1), (0.1, 0.04)],
        &[(0.35, 0.15), (0.2, 0.1), (0.08, 0.1)],
    ];
    boxes
        .iter()
        .map(|pairs| BoxSpec::from_pairs(pairs).expect("regression boxes are well formed"))
        .collect()
}

fn check_prime_tuple_identity() -> Result<CheckResult> {
    let sieve = PrimeSieve::new(100_000)?;
    let mut counter = SmoothCounter::new(&sieve);
    let mut rows = Vec::new();
    let mut passed = true;
    for n in [1_000u64, 10_000, 100_000] {
        for b in regression_boxes() {
            let exact = box_probability_exact(&sieve, n, &b)?;
            let psi = box_probability_via_psi_with(&mut counter, n, &b)?;
            passed &= exact == psi;
            rows.push(json!({
                "n": n,
                "box": b.to_string(),
                "exact_count": exact.count,
                "psi_count": psi.count,
            }));
        }
    }
    Ok(CheckResult::new(4, passed, json!({ "cases": rows })))
}

fn check_dickman_ladder() -> Result<CheckResult> {
    let rho2 = 1.0 - 2f64.ln();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for n in [10_000u64, 100_000, 1_000_000, 10_000_000] {
        let y = floor_pow(n, 0.5);
        let psi = psi_exact(n, y)?;
        let ratio = psi as f64 / n as f64;
        let err = (ratio - rho2).abs();
        errors.push(err);
        rows.push(json!({ "n": n, "y": y, "psi": psi, "psi_over_n": ratio, "abs_err": err }));
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let last = *errors.last().unwrap();
    Ok(CheckResult::new(
        5,
        decreasing && last <= 0.05,
        json!({ "ladder": rows, "strictly_decreasing": decreasing, "final_err": last, "tolerance": 0.05 }),
    ))
}

fn check_mertens_stabilization() -> Result<CheckResult> {
    let sieve = PrimeSieve::new(10_000_000)?;
    let m6 = mertens_constant_estimate(&sieve, 1_000_000)?;
    let m7 = mertens_constant_estimate(&sieve, 10_000_000)?;
    let diff = (m7 - m6).abs();
    Ok(CheckResult::new(
        6,
        diff < 0.005,
        json!({ "estimate_1e6": m6, "estimate_1e7": m7, "abs_diff": diff, "tolerance": 0.005 }),
    ))
}

fn check_mertens_range() -> Result<CheckResult> {
    let n = 10_000_000u64;
    let (t, dt) = (0.3, 0.05);
    let (a, b) = (ceil_pow(n, t), floor_pow(n, t + dt));
    let sieve = PrimeSieve::new(b)?;
    let sum = mertens_sum(&sieve, a, b)?;
    let target = (1.0 + dt / t).ln();
    let err = (sum - target).abs();
    Ok(CheckResult::new(
        7,
        err < 0.05,
        json!({ "n": n, "lo": a, "hi": b, "sum": sum, "log_ratio": target, "abs_err": err, "tolerance": 0.05 }),
    ))
}

const PD_MARGINAL_SAMPLES: u64 = 100_000;

fn check_pd_marginal(seed: u64) -> Result<CheckResult> {
    let rho2 = 1.0 - 2f64.ln();
    let est = pd_sample_l1_cdf(0.5, PD_MARGINAL_SAMPLES, seed, DEFAULT_TRUNCATION)?;
    let tol = 3.0 * (rho2 * (1.0 - rho2) / PD_MARGINAL_SAMPLES as f64).sqrt();
    let err = (est.p_hat - rho2).abs();
    Ok(CheckResult::new(
        8,
        err <= tol,
        json!({ "samples": est.total, "hits": est.hits, "p_hat": est.p_hat, "rho2": rho2, "abs_err": err, "tolerance": tol }),
    ))
}

/// Grid for the PD box integral in the convergence checks.
const PD_BOX_GRID: usize = 400;

fn check_box_convergence(table: &DickmanTable) -> Result<CheckResult> {
    let b = BoxSpec::from_pairs(&[(0.45, 0.1), (0.15, 0.1)])?;
    let target = pd_box_probability(table, &b, PD_BOX_GRID)?;
    let ladder = [10_000u64, 100_000, 1_000_000];
    let sieve = PrimeSieve::new(floor_pow(*ladder.last().unwrap(), b.upper(0)))?;
    let mut counter = SmoothCounter::new(&sieve);
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for n in ladder {
        let c = box_probability_via_psi_with(&mut counter, n, &b)?;
        let gap = (c.ratio() - target.value).abs();
        gaps.push(gap);
        rows.push(json!({ "n": n, "count": c.count, "p": c.ratio(), "abs_gap": gap }));
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let relative = gaps.last().unwrap() / target.value;
    Ok(CheckResult::new(
        9,
        monotone && relative < 0.05,
        json!({
            "box": b.to_string(),
            "pd_probability": target.value,
            "pd_error_estimate": target.error_estimate,
            "ladder": rows,
            "gap_strictly_decreasing": monotone,
            "final_relative_gap": relative,
            "tolerance": 0.05,
        }),
    ))
}

/// Admissible regression boxes for the harness at ε = 0.25.
pub fn admissible_boxes() -> Vec<BoxSpec> {
    let boxes: [&[(f64, f64)]; 5] = [
        &[(0.5, 0.1)],
        &[(0.3, 0.05)],
        &[(0.49, 0.03), (0.21, 0.025)],
        &[(0.5, 0.025), (0.19, 0.025)],
        &[(0.46, 0.03), (0.2, 0.025)],
    ];
    boxes
        .iter()
        .map(|pairs| BoxSpec::from_pairs(pairs).expect("regression boxes are well formed"))
        .collect()
}

pub const HARNESS_EPSILON: f64 = 0.25;
pub const HARNESS_LADDER: [u64; 4] = [10_000, 100_000, 1_000_000, 10_000_000];
const HARNESS_SAMPLES: u64 = 200_000;

fn check_box_criterion(table: &DickmanTable, seed: u64) -> Result<CheckResult> {
    let mut geometry_ok = true;
    let k1 = BoxSpec::from_pairs(&[(0.4, 0.1)])?;
    geometry_ok &= (convergence::distance_to_complement(&k1)? - 0.4).abs() < 1e-12;
    let k2 = BoxSpec::from_pairs(&[(0.5, 0.05), (0.2, 0.05)])?;
    geometry_ok &= (convergence::distance_to_complement(&k2)? - 0.2 / 2f64.sqrt()).abs() < 1e-12;

    let opts = RunOptions {
        samples: HARNESS_SAMPLES,
        seed,
        ..RunOptions::default()
    };
    let mut reports = Vec::new();
    let mut passed = geometry_ok;
    for b in admissible_boxes() {
        let crit = BoxCriterion::new(HARNESS_EPSILON, b.k())?;
        let rep = convergence::run_criterion(table, &HARNESS_LADDER, &b, &crit, &opts)?;
        passed &= rep.all_pass();
        reports.push(serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?);
    }
    Ok(CheckResult::new(
        10,
        passed,
        json!({ "geometry_ok": geometry_ok, "reports": reports }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("all".parse::<SuiteName>().unwrap(), SuiteName::All);
        assert!("bogus".parse::<SuiteName>().is_err());
        assert_eq!(SuiteName::Identities.to_string(), "identities");
        let mut ids: Vec<u32> = SuiteName::Identities.criteria().to_vec();
        ids.extend(SuiteName::Convergence.criteria());
        ids.sort();
        assert_eq!(ids, SuiteName::All.criteria());
    }

    #[test]
    fn regression_boxes_are_inside_region() {
        for b in regression_boxes() {
            assert!(b.inside_region(), "{b}");
        }
        for b in admissible_boxes() {
            let crit = BoxCriterion::new(HARNESS_EPSILON, b.k()).unwrap();
            assert!(convergence::box_admissible(&b, &crit).unwrap(), "{b}");
        }
    }

    #[test]
    fn unknown_criterion() {
        let t = DickmanTable::build(4.0, 1e-3).unwrap();
        assert!(run_check(11, &t, 1).is_err());
    }
}
