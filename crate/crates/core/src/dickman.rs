//! The Dickman function ρ and Billingsley's H_i functions.
//!
//! ρ is tabulated from the integral form `u ρ(u) = ∫_{u-1}^{u} ρ(t) dt`,
//! with ρ ≡ 1 on `[0, 1]`. Each new grid value comes from a trapezoid sum
//! over the trailing unit window plus an Euler-Maclaurin end correction, and
//! that window sum only ever adds positive terms, so the relative accuracy
//! holds even where ρ is astronomically small. Off-grid values use cubic
//! interpolation that never straddles an integer.
//!
//! The H_i functions are evaluated independently by nested adaptive
//! quadrature, which gives a second route to ρ through the alternating sum
//! `ρ(u) = 1 + Σ_{1 <= i < u} (-1)^i H_i(u)`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, QuadratureConfig};

pub const DEFAULT_U_MAX: f64 = 20.0;
pub const DEFAULT_STEP: f64 = 1e-4;
pub const MAX_STEP: f64 = 0.01;

/// Grid points closer than this to an integer are treated as lying on it.
const GRID_SNAP: f64 = 1e-9;

/// Tabulated Dickman function on the grid `0, h, 2h, …, u_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DickmanTable {
    u_max: f64,
    step: f64,
    values: Vec<f64>,
    interpolation_order: u8,
}

impl DickmanTable {
    /// Builds the table on a grid whose spacing divides 1 exactly: the
    /// requested `step` is snapped down to `1 / ceil(1 / step)`. The grid end
    /// is the first grid point at or beyond `u_max`.
    pub fn build(u_max: f64, step: f64) -> Result<Self> {
        if !(u_max.is_finite() && u_max >= 1.0) {
            return Err(Error::Parameter(format!("u_max must be >= 1, got {u_max}")));
        }
        if !(step > 0.0 && step <= MAX_STEP) {
            return Err(Error::Parameter(format!(
                "step must lie in (0, {MAX_STEP}], got {step}"
            )));
        }
        let (per_unit, intervals) = grid_shape(u_max, step);
        let h = 1.0 / per_unit as f64;
        let mut table = DickmanTable {
            u_max: intervals as f64 * h,
            step: h,
            values: Vec::with_capacity(intervals + 1),
            interpolation_order: 3,
        };
        let mut window = BlockSums::new(per_unit);

        for _ in 0..=intervals.min(per_unit) {
            table.values.push(1.0);
            window.push(1.0);
        }

        // u ρ(u) = ∫_{u-1}^{u} ρ(t) dt, by the trapezoid rule with the
        // Euler-Maclaurin h^2 end correction; ρ'(t) = -ρ(t-1)/t supplies the
        // end derivatives and ρ' jumps by -1 at t = 1.
        for j in (per_unit + 1)..=intervals {
            let u = j as f64 * h;
            let start = j - per_unit;
            let u_start = start as f64 * h;
            let rho_start = table.values[start];
            let interior = window.range_sum(start + 1, j - 1);

            let deriv_end = -rho_start / u;
            let deriv_start = if start < per_unit {
                0.0
            } else {
                -table.values[start - per_unit] / u_start
            };
            let jump = if start < per_unit { -1.0 } else { 0.0 };
            let correction = -h * h / 12.0 * (deriv_end - deriv_start - jump);

            let rho = (h * (0.5 * rho_start + interior) + correction) / (u - 0.5 * h);
            table.values.push(rho);
            window.push(rho);
        }
        Ok(table)
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation_order(&self) -> u8 {
        self.interpolation_order
    }

    /// Grid abscissa of index `j`.
    pub fn grid_point(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    /// ρ(u) for `0 <= u <= u_max`; exactly 1 on `[0, 1]`.
    pub fn rho(&self, u: f64) -> Result<f64> {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Domain(format!("rho argument {u} is negative")));
        }
        let slack = 8.0 * f64::EPSILON * self.u_max.max(1.0);
        let u = if u > self.u_max {
            if u - self.u_max <= slack {
                self.u_max
            } else {
                return Err(Error::Domain(format!(
                    "rho argument {u} exceeds table u_max {}; rebuild with a larger u_max",
                    self.u_max
                )));
            }
        } else {
            u
        };
        Ok(self.interpolate(u))
    }

    /// Cubic Lagrange interpolation with a stencil kept inside one unit
    /// interval `[s, s + 1]`, since ρ loses a derivative at each integer.
    fn interpolate(&self, u: f64) -> f64 {
        if u <= 1.0 {
            return 1.0;
        }
        let h = self.step;
        let last = self.values.len() - 1;
        let x = u / h;
        let j = x.floor() as usize;
        if (x - j as f64) == 0.0 && j <= last {
            return self.values[j];
        }

        let seg = (u - GRID_SNAP).floor();
        let seg_lo = ((seg / h) - GRID_SNAP).ceil().max(0.0) as usize;
        let seg_hi = (((seg + 1.0) / h) + GRID_SNAP).floor() as usize;
        let seg_hi = seg_hi.min(last);

        let mut start = j.saturating_sub(1);
        if start < seg_lo {
            start = seg_lo;
        }
        if start + 3 > seg_hi {
            start = seg_hi.saturating_sub(3);
        }
        let nodes = [start, start + 1, start + 2, start + 3];

        let mut acc = 0.0;
        for (a, &ja) in nodes.iter().enumerate() {
            let xa = ja as f64;
            let mut w = 1.0;
            for (b, &jb) in nodes.iter().enumerate() {
                if a != b {
                    let xb = jb as f64;
                    w *= (x - xb) / (xa - xb);
                }
            }
            acc += w * self.values[ja];
        }
        acc
    }

    /// `ρ(u) - ρ(v) + ∫_v^u ρ(t - 1) dt / t` for `0 <= u - 1 <= v <= u`,
    /// with ρ = 0 on negative arguments; it vanishes for the exact ρ.
    pub fn recursion_residual(&self, u: f64, v: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if !(u - 1.0 >= 0.0 && u - 1.0 <= v && v <= u) {
            return Err(Error::Parameter(format!(
                "recursion needs 0 <= u - 1 <= v <= u, got u = {u}, v = {v}"
            )));
        }
        let f = |t: f64| Ok(self.rho(t - 1.0)? / t);
        // ρ vanishes on negative arguments
        let v0 = v.max(1.0);
        // ρ(t - 1) has a kink at every integer t >= 2
        let kink = v0.floor() + 1.0;
        let integral = if kink >= 2.0 && kink < u {
            adaptive_simpson(f, v0, kink, cfg)? + adaptive_simpson(f, kink, u, cfg)?
        } else if u > v0 {
            adaptive_simpson(f, v0, u, cfg)?
        } else {
            0.0
        };
        Ok(self.rho(u)? - self.rho(v)? + integral)
    }

    /// Writes `u,rho` rows in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "u,rho")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid_point(j), v)?;
        }
        Ok(())
    }

    fn cache_header(u_max: f64, step: f64) -> String {
        format!("# dickman-rho u_max={u_max} step={step}")
    }

    fn cache_file(dir: &Path, u_max: f64, step: f64) -> PathBuf {
        dir.join(format!("rho_umax{u_max}_step{step}.csv"))
    }

    /// Loads the table from `dir` when a file with a matching header exists,
    /// otherwise builds it and writes the cache file.
    pub fn load_or_build(dir: &Path, u_max: f64, step: f64) -> Result<Self> {
        let path = Self::cache_file(dir, u_max, step);
        if let Some(table) = Self::read_cache(&path, u_max, step)? {
            return Ok(table);
        }
        let table = Self::build(u_max, step)?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("csv.tmp");
        {
            let mut w = BufWriter::new(fs::File::create(&tmp)?);
            writeln!(w, "{}", Self::cache_header(u_max, step))?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(table)
    }

    fn read_cache(path: &Path, u_max: f64, step: f64) -> Result<Option<Self>> {
        let file = match fs::File::open(path) {
            Ok(f) => f,
            Err(_) => return Ok(None),
        };
        let mut lines = BufReader::new(file).lines();
        match lines.next() {
            Some(Ok(h)) if h == Self::cache_header(u_max, step) => {}
            _ => return Ok(None),
        }
        match lines.next() {
            Some(Ok(h)) if h == "u,rho" => {}
            _ => return Ok(None),
        }
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            let Some((_, v)) = line.split_once(',') else {
                return Ok(None);
            };
            match v.trim().parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) => return Ok(None),
            }
        }
        let (per_unit, intervals) = grid_shape(u_max, step);
        if values.len() != intervals + 1 {
            return Ok(None);
        }
        let h = 1.0 / per_unit as f64;
        Ok(Some(DickmanTable {
            u_max: intervals as f64 * h,
            step: h,
            values,
            interpolation_order: 3,
        }))
    }
}

/// Grid points per unit interval and total number of intervals.
fn grid_shape(u_max: f64, step: f64) -> (usize, usize) {
    let per_unit = (1.0 / step - GRID_SNAP).ceil() as usize;
    let intervals = (u_max * per_unit as f64 - GRID_SNAP).ceil() as usize;
    (per_unit, intervals)
}

/// Running sums over fixed blocks, so that a window sum of positive values is
/// always formed from positive partial sums and never by subtraction.
struct BlockSums {
    block: usize,
    values: Vec<f64>,
    sums: Vec<f64>,
}

impl BlockSums {
    fn new(window: usize) -> Self {
        let block = ((window as f64).sqrt() as usize).max(16);
        Self {
            block,
            values: Vec::new(),
            sums: Vec::new(),
        }
    }

    fn push(&mut self, v: f64) {
        self.values.push(v);
        if self.values.len() % self.block == 0 {
            let b = self.values.len() / self.block - 1;
            let s = self.values[b * self.block..].iter().sum();
            self.sums.push(s);
        }
    }

    /// Sum of values at indices `lo..=hi` (empty when `hi < lo`).
    fn range_sum(&self, lo: usize, hi: usize) -> f64 {
        if hi < lo {
            return 0.0;
        }
        let bs = self.block;
        let first_full = lo.div_ceil(bs);
        let end_full = (hi + 1) / bs;
        if first_full >= end_full {
            return self.values[lo..=hi].iter().sum();
        }
        let head: f64 = self.values[lo..first_full * bs].iter().sum();
        let mid: f64 = self.sums[first_full..end_full].iter().sum();
        let tail: f64 = self.values[end_full * bs..=hi].iter().sum();
        head + mid + tail
    }
}

/// Free-function form of [`DickmanTable::build`].
pub fn build_rho_table(u_max: f64, step: f64) -> Result<DickmanTable> {
    DickmanTable::build(u_max, step)
}

/// Billingsley's `H_i(u)`: the integral of `∏ dt_k / t_k` over
/// `1 < t_1 < … < t_i < u` with `Σ 1/t_k < 1`.
pub fn h_function(i: u32, u: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Parameter(format!("H_i needs u > 0, got {u}")));
    }
    cfg.validate()?;
    if i == 0 {
        return Ok(1.0);
    }
    if u <= i as f64 {
        return Ok(0.0);
    }
    nested(i, u, 1.0, cfg)
}

/// Integral over `1 < t_1 < … < t_j < upper` with `Σ 1/t < budget`.
///
/// The outermost variable is the largest, `t_j`. The remaining `j - 1`
/// reciprocals each exceed `1/t_j`, so the region is empty unless
/// `t_j > j / budget`; that bound is applied to the integration interval.
fn nested(j: u32, upper: f64, budget: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if j == 0 {
        return Ok(if budget >= 0.0 { 1.0 } else { 0.0 });
    }
    if budget <= 0.0 {
        return Ok(0.0);
    }
    let lower = (j as f64 / budget).max(1.0);
    if lower >= upper {
        return Ok(0.0);
    }
    if j == 1 {
        return Ok((upper / lower).ln());
    }
    let integrand = |t: f64| Ok(nested(j - 1, t, budget - 1.0 / t, cfg)? / t);
    // the inner lower limit stops being clamped at 1 where (j-1)/(budget - 1/t) = 1
    let kink = if j >= 2 && budget > (j - 1) as f64 {
        1.0 / (budget - (j - 1) as f64)
    } else {
        f64::NAN
    };
    if kink > lower && kink < upper {
        Ok(adaptive_simpson(integrand, lower, kink, cfg)?
            + adaptive_simpson(integrand, kink, upper, cfg)?)
    } else {
        adaptive_simpson(integrand, lower, upper, cfg)
    }
}

/// ρ(u) via the finite alternating sum of H_i.
pub fn rho_via_alternating_sum(u: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Parameter(format!(
            "alternating sum needs u > 0, got {u}"
        )));
    }
    let mut total = 1.0;
    let mut i = 1u32;
    while (i as f64) < u {
        let term = h_function(i, u, cfg)?;
        if i % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
        i += 1;
    }
    Ok(total)
}
