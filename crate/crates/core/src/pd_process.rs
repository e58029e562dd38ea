//! The Poisson–Dirichlet (θ = 1) limit: finite-dimensional densities and a
//! stick-breaking sampler.
//!
//! The density of the first k ranked components is
//! `f(t) = ρ((1 - Σ t_i) / t_k) / (t_1 ⋯ t_k)` on U and 0 elsewhere.

use rand::distr::{Distribution, Open01};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dickman::DickmanTable;
use crate::error::{Error, Result};
use crate::montecarlo::{self, EmpiricalEstimate};
use crate::region::{in_region, BoxSpec};

pub const DEFAULT_TRUNCATION: usize = 60;

/// A ranked, truncated draw from PD(1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdSample {
    /// Stick lengths sorted in descending order.
    pub components: Vec<f64>,
    /// Mass left after the last stick, `∏ U_i`.
    pub tail_mass: f64,
    pub truncation: usize,
}

impl PdSample {
    /// The i-th ranked component (0-based), or 0 past the truncation.
    pub fn component(&self, i: usize) -> f64 {
        self.components.get(i).copied().unwrap_or(0.0)
    }

    /// Whether the first `k` ranked components fall in the closed box.
    pub fn hits(&self, b: &BoxSpec) -> bool {
        (0..b.k()).all(|i| {
            let x = self.component(i);
            b.lower()[i] <= x && x <= b.upper(i)
        })
    }
}

/// A point at which to evaluate the k-dimensional density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub t: Vec<f64>,
}

impl DensityPoint {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter(
                "density point needs finite coordinates".into(),
            ));
        }
        Ok(Self { t })
    }

    pub fn k(&self) -> usize {
        self.t.len()
    }
}

/// `f(t)`; exactly 0 outside U, boundary included.
pub fn pd_density(table: &DickmanTable, t: &[f64]) -> Result<f64> {
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter(
            "density point needs finite coordinates".into(),
        ));
    }
    if !in_region(t) {
        return Ok(0.0);
    }
    let k = t.len();
    let u = (1.0 - t.iter().sum::<f64>()) / t[k - 1];
    if u > table.u_max() {
        return Err(Error::Domain(format!(
            "density needs rho({u}), beyond table u_max {}; rebuild with a larger u_max",
            table.u_max()
        )));
    }
    Ok(table.rho(u)? / t.iter().product::<f64>())
}

/// One stick-breaking draw: sticks `1 - U_1, U_1(1 - U_2), …`, ranked.
pub fn pd_sample<R: Rng + ?Sized>(rng: &mut R, truncation: usize) -> Result<PdSample> {
    if truncation < 1 {
        return Err(Error::Parameter("truncation must be >= 1".into()));
    }
    let mut remaining = 1.0f64;
    let mut components = Vec::with_capacity(truncation);
    for _ in 0..truncation {
        let u: f64 = Open01.sample(rng);
        components.push(remaining * (1.0 - u));
        remaining *= u;
    }
    components.sort_by(|a, b| b.total_cmp(a));
    Ok(PdSample {
        components,
        tail_mass: remaining,
        truncation,
    })
}

/// A single draw from a fresh RNG seeded with `seed`.
pub fn pd_sample_seeded(seed: u64, truncation: usize) -> Result<PdSample> {
    pd_sample(&mut montecarlo::stream_rng(seed, 0), truncation)
}

/// `count` draws, deterministic in `(seed, count)`.
pub fn pd_samples(seed: u64, count: u64, truncation: usize) -> Result<Vec<PdSample>> {
    let chunks = count.div_ceil(montecarlo::CHUNK_SIZE);
    let mut out = Vec::with_capacity(count as usize);
    for c in 0..chunks {
        let len = montecarlo::CHUNK_SIZE.min(count - c * montecarlo::CHUNK_SIZE);
        let mut rng = montecarlo::stream_rng(seed, c);
        for _ in 0..len {
            out.push(pd_sample(&mut rng, truncation)?);
        }
    }
    Ok(out)
}

/// Fraction of draws whose first k ranked components lie in the box.
pub fn pd_sample_box_frequency(
    b: &BoxSpec,
    samples: u64,
    seed: u64,
    truncation: usize,
) -> Result<EmpiricalEstimate> {
    if samples < 1 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    if truncation < b.k() {
        return Err(Error::Parameter(format!(
            "truncation {truncation} is below the box dimension {}",
            b.k()
        )));
    }
    montecarlo::count_hits(samples, seed, |rng, count| {
        let mut hits = 0;
        for _ in 0..count {
            if pd_sample(rng, truncation)?.hits(b) {
                hits += 1;
            }
        }
        Ok(hits)
    })
}

/// Empirical `P(L_1 <= x)` under PD(1).
pub fn pd_sample_l1_cdf(
    x: f64,
    samples: u64,
    seed: u64,
    truncation: usize,
) -> Result<EmpiricalEstimate> {
    if samples < 1 {
        return Err(Error::Parameter("samples must be >= 1".into()));
    }
    montecarlo::count_hits(samples, seed, |rng, count| {
        let mut hits = 0;
        for _ in 0..count {
            if pd_sample(rng, truncation)?.component(0) <= x {
                hits += 1;
            }
        }
        Ok(hits)
    })
}

/// `∫_B f` with its refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdBoxProbability {
    pub value: f64,
    /// `|Q(grid) - Q(grid / 2)|`, or 0 when the grid is too coarse to halve.
    pub error_estimate: f64,
    pub grid: usize,
}

/// Tensor-product midpoint rule with `grid` points per axis.
pub fn pd_box_probability(
    table: &DickmanTable,
    b: &BoxSpec,
    grid: usize,
) -> Result<PdBoxProbability> {
    if grid < 1 {
        return Err(Error::Parameter("grid must be >= 1".into()));
    }
    b.require_inside_region()?;
    if b.volume() == 0.0 {
        return Ok(PdBoxProbability {
            value: 0.0,
            error_estimate: 0.0,
            grid,
        });
    }
    let value = midpoint(table, b, grid)?;
    let error_estimate = if grid >= 2 {
        (value - midpoint(table, b, grid / 2)?).abs()
    } else {
        0.0
    };
    Ok(PdBoxProbability {
        value,
        error_estimate,
        grid,
    })
}

fn midpoint(table: &DickmanTable, b: &BoxSpec, grid: usize) -> Result<f64> {
    let k = b.k();
    let h: Vec<f64> = b.widths().iter().map(|d| d / grid as f64).collect();
    let cell: f64 = h.iter().product();
    let mut idx = vec![0usize; k];
    let mut point = vec![0.0; k];
    let mut sum = 0.0;
    loop {
        for i in 0..k {
            point[i] = b.lower()[i] + (idx[i] as f64 + 0.5) * h[i];
        }
        sum += pd_density(table, &point)?;
        // odometer increment
        let mut axis = k;
        loop {
            if axis == 0 {
                return Ok(sum * cell);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < grid {
                break;
            }
            idx[axis] = 0;
        }
    }
}
