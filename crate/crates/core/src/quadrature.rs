//! Adaptive Simpson quadrature with fallible integrands.
//!
//! Integrands return `Result` so that nested integrals can surface an inner
//! failure instead of silently feeding a bad value to the outer rule.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_depth: 48,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Parameter(format!(
                "quadrature tolerances must be positive (rel_tol={}, abs_tol={})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::Parameter("quadrature max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

/// Integrates `f` over `[a, b]`.
///
/// The local acceptance test is `|S_left + S_right - S| <= 15 * tol`, with the
/// tolerance halved at each bisection. A panel that is still unresolved at
/// `max_depth` makes the whole call fail with the partial sum attached.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Parameter(format!(
            "non-finite integration limits [{a}, {b}]"
        )));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let fa = f(lo)?;
    let fb = f(hi)?;
    let m = 0.5 * (lo + hi);
    let fm = f(m)?;
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = cfg.abs_tol.max(cfg.rel_tol * whole.abs());

    let mut failed = false;
    let panel = Panel {
        a: lo,
        b: hi,
        fa,
        fm,
        fb,
        whole,
    };
    let value = refine(&mut f, panel, tol, cfg.max_depth, &mut failed)?;
    if failed {
        return Err(Error::Numerical {
            message: format!(
                "adaptive Simpson did not converge on [{lo}, {hi}] within depth {}",
                cfg.max_depth
            ),
            estimate: sign * value,
        });
    }
    Ok(sign * value)
}

fn refine<F>(f: &mut F, p: Panel, tol: f64, depth: u32, failed: &mut bool) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (p.a + p.b);
    let lm = 0.5 * (p.a + m);
    let rm = 0.5 * (m + p.b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
    let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
    let delta = left + right - p.whole;

    let floor = 4.0 * f64::EPSILON * (left.abs() + right.abs());
    if delta.abs() <= 15.0 * tol.max(floor) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || m <= p.a || m >= p.b {
        *failed = true;
        return Ok(left + right + delta / 15.0);
    }
    let l = Panel {
        a: p.a,
        b: m,
        fa: p.fa,
        fm: flm,
        fb: p.fm,
        whole: left,
    };
    let r = Panel {
        a: m,
        b: p.b,
        fa: p.fm,
        fm: frm,
        fb: p.fb,
        whole: right,
    };
    Ok(refine(f, l, 0.5 * tol, depth - 1, failed)? + refine(f, r, 0.5 * tol, depth - 1, failed)?)
}
