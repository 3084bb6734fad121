//! Strong Wolfe line search: bracketing followed by a safeguarded cubic zoom.

use super::{Objective, QuasiNewtonConfig};
use crate::error::{Error, Result};

pub(crate) struct Trial {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub evaluations: usize,
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn probe<O: Objective + ?Sized>(obj: &O, x0: &[f64], dir: &[f64], alpha: f64, iteration: usize) -> Result<Probe> {
    let x: Vec<f64> = x0.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
    let (f, g) = obj.value_and_gradient(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimizer {
            iteration,
            reason: format!("non-finite objective at step {alpha:e} along the search direction, iterate {x:?}"),
        });
    }
    let slope = dot(&g, dir);
    Ok(Probe { alpha, f, slope, x, g })
}

/// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped into
/// the interior of the interval.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let fallback = 0.5 * (lo + hi);
    if disc < 0.0 {
        return fallback;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return fallback;
    }
    let t = b - (b - a) * (db + d2 - d1) / denom;
    if !t.is_finite() {
        return fallback;
    }
    t.clamp(lo + 0.1 * width, hi - 0.1 * width)
}

/// Finds a step satisfying both strong Wolfe conditions along a descent direction.
///
/// Returns `Ok(None)` when no such step is found within the evaluation budget.
pub(crate) fn strong_wolfe<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    f0: f64,
    g0: &[f64],
    dir: &[f64],
    alpha_init: f64,
    cfg: &QuasiNewtonConfig,
    iteration: usize,
) -> Result<Option<Trial>> {
    let slope0 = dot(g0, dir);
    debug_assert!(slope0 < 0.0);
    let (c1, c2) = (cfg.wolfe_c1, cfg.wolfe_c2);
    let armijo = |p: &Probe| p.f <= f0 + c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= c2 * slope0.abs();
    let accept = |p: Probe, evals: usize| Trial {
        alpha: p.alpha,
        x: p.x,
        f: p.f,
        g: p.g,
        evaluations: evals,
    };

    let mut evals = 0;
    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: x0.to_vec(),
        g: g0.to_vec(),
    };
    let mut alpha = alpha_init;
    let mut first = true;
    let (mut lo, mut hi);
    loop {
        if evals >= cfg.max_line_search {
            return Ok(None);
        }
        let cur = probe(obj, x0, dir, alpha, iteration)?;
        evals += 1;
        if !armijo(&cur) || (!first && cur.f >= prev.f) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return Ok(Some(accept(cur, evals)));
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        first = false;
        alpha = (2.0 * alpha).min(cfg.max_step);
        if cur.alpha >= cfg.max_step {
            return Ok(None);
        }
        prev = cur;
    }

    // zoom: lo satisfies Armijo with the lowest value seen so far
    loop {
        if evals >= cfg.max_line_search {
            return Ok(None);
        }
        if (hi.alpha - lo.alpha).abs() <= f64::EPSILON * lo.alpha.abs().max(1e-300) {
            return Ok(None);
        }
        let a = cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
        let cur = probe(obj, x0, dir, a, iteration)?;
        evals += 1;
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(Some(accept(cur, evals)));
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
}
