//! Coordinate boxes and the open region
//! `U = {t_1 > … > t_k > 0, t_1 + … + t_k < 1}` that carries the
//! Poisson–Dirichlet density.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether `t` lies in the open region U (boundary excluded).
pub fn in_region(t: &[f64]) -> bool {
    if t.is_empty() || t.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let ordered = t.windows(2).all(|w| w[0] > w[1]);
    ordered && *t.last().unwrap() > 0.0 && t.iter().sum::<f64>() < 1.0
}

/// The closed box `∏ [t_i, t_i + dt_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    t: Vec<f64>,
    dt: Vec<f64>,
}

impl BoxSpec {
    /// Widths may be zero (a degenerate box); membership in U is not
    /// required here and is checked by the operations that need it.
    pub fn new(t: Vec<f64>, dt: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::Parameter("box needs at least one coordinate".into()));
        }
        if t.len() != dt.len() {
            return Err(Error::Parameter(format!(
                "box has {} left endpoints but {} widths",
                t.len(),
                dt.len()
            )));
        }
        if t.iter().chain(&dt).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("box coordinates must be finite".into()));
        }
        if dt.iter().any(|&d| d < 0.0) {
            return Err(Error::Parameter("box widths must be non-negative".into()));
        }
        Ok(Self { t, dt })
    }

    /// Builds a box from `(t_i, dt_i)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.t.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.t
    }

    pub fn widths(&self) -> &[f64] {
        &self.dt
    }

    /// Right endpoint `t_i + dt_i`.
    pub fn upper(&self, i: usize) -> f64 {
        self.t[i] + self.dt[i]
    }

    pub fn uppers(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.upper(i)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.dt.iter().product()
    }

    pub fn diameter(&self) -> f64 {
        self.dt.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.t
            .iter()
            .zip(&self.dt)
            .map(|(t, d)| t + 0.5 * d)
            .collect()
    }

    /// `α = 1 - Σ (t_i + dt_i)`.
    pub fn alpha(&self) -> f64 {
        1.0 - (0..self.k()).map(|i| self.upper(i)).sum::<f64>()
    }

    /// `u_0 = (1 - Σ t_i) / t_k`, the largest Dickman argument over the box.
    pub fn u0(&self) -> f64 {
        (1.0 - self.t.iter().sum::<f64>()) / self.t[self.k() - 1]
    }

    /// `B ⊂ U`: `t_k > 0`, `t_i + dt_i < t_{i-1}` and `Σ (t_i + dt_i) < 1`.
    pub fn inside_region(&self) -> bool {
        self.region_violation().is_none()
    }

    /// The first constraint of `B ⊂ U` that fails, if any.
    pub fn region_violation(&self) -> Option<String> {
        let k = self.k();
        if !(self.t[k - 1] > 0.0) {
            return Some(format!("t_{k} = {} must be > 0", self.t[k - 1]));
        }
        for i in 1..k {
            if !(self.upper(i) < self.t[i - 1]) {
                return Some(format!(
                    "t_{} + dt_{} = {} must be < t_{} = {}",
                    i + 1,
                    i + 1,
                    self.upper(i),
                    i,
                    self.t[i - 1]
                ));
            }
        }
        let top: f64 = self.uppers().iter().sum();
        if !(top < 1.0) {
            return Some(format!("Σ (t_i + dt_i) = {top} must be < 1"));
        }
        None
    }

    pub fn require_inside_region(&self) -> Result<()> {
        match self.region_violation() {
            None => Ok(()),
            Some(msg) => Err(Error::Precondition(format!("box is not inside U: {msg}"))),
        }
    }

    /// The box with the same center and every width scaled by `factor`.
    pub fn shrink(&self, factor: f64) -> Result<Self> {
        let c = self.center();
        let dt: Vec<f64> = self.dt.iter().map(|d| d * factor).collect();
        let t = c.iter().zip(&dt).map(|(c, d)| c - 0.5 * d).collect();
        Self::new(t, dt)
    }
}

impl FromStr for BoxSpec {
    type Err = Error;

    /// Parses `"t1,dt1;t2,dt2;…"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (a, b) = part
                .split_once(',')
                .ok_or_else(|| Error::Parameter(format!("box component '{part}' is not 't,dt'")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("bad number '{x}' in box: {e}")))
            };
            pairs.push((parse(a)?, parse(b)?));
        }
        Self::from_pairs(&pairs)
    }
}

impl fmt::Display for BoxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.k() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{},{}", self.t[i], self.dt[i])?;
        }
        Ok(())
    }
}
