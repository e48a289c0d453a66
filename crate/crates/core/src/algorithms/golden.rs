//! Golden-section minimization of a convex (possibly extended-valued)
//! function of one variable.
//!
//! Infeasible probes count as `+inf`. The best point ever evaluated is
//! returned, so a caller that passes its current point as `hint` never gets
//! back something worse than what it already had.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: f64,
    pub value: f64,
    pub payload: T,
    pub evaluations: usize,
}

struct Tracker<T> {
    best: Option<(f64, f64, T)>,
    evaluations: usize,
    last_error: Option<Error>,
}

impl<T> Tracker<T> {
    fn eval<F>(&mut self, x: f64, f: &mut F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<(f64, T)>,
    {
        self.evaluations += 1;
        match f(x) {
            Ok((v, payload)) if v.is_finite() => {
                if self.best.as_ref().is_none_or(|b| v < b.1) {
                    self.best = Some((x, v, payload));
                }
                Ok(v)
            }
            Ok(_) => Ok(f64::INFINITY),
            Err(e @ (Error::Infeasible { .. } | Error::NumericalLimit(_) | Error::SingularFisher(_))) => {
                // Keep the most informative failure: a numerical limit beats infeasibility.
                let keep = !matches!(
                    (&self.last_error, &e),
                    (Some(Error::NumericalLimit(_)), Error::Infeasible { .. })
                );
                if keep {
                    self.last_error = Some(e);
                }
                Ok(f64::INFINITY)
            }
            Err(e) => Err(e),
        }
    }

    fn best_x(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.0)
    }

    fn finish(self) -> Result<Minimum<T>> {
        match self.best {
            Some((x, value, payload)) => Ok(Minimum {
                x,
                value,
                payload,
                evaluations: self.evaluations,
            }),
            None => Err(self.last_error.unwrap_or(Error::Infeasible { certificate: f64::NAN })),
        }
    }
}

/// Minimizes `f` over `[lo, hi]` to bracket width `tol`.
///
/// Without a hint the search starts from a uniform grid of `grid` points;
/// with one it expands a small bracket around the hint until the minimum is
/// enclosed.
pub fn minimize<T, F>(lo: f64, hi: f64, tol: f64, grid: usize, hint: Option<f64>, mut f: F) -> Result<Minimum<T>>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    if !(lo <= hi) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("bad search interval [{lo}, {hi}] tol {tol}")));
    }
    let mut tr = Tracker {
        best: None,
        evaluations: 0,
        last_error: None,
    };
    if hi - lo <= tol {
        let x = hint.map_or(lo, |h| h.clamp(lo, hi));
        tr.eval(x, &mut f)?;
        if x != lo {
            tr.eval(lo, &mut f)?;
        }
        return tr.finish();
    }

    let mut bracket = None;
    if let Some(h) = hint {
        let h = h.clamp(lo, hi);
        let fh = tr.eval(h, &mut f)?;
        if fh.is_finite() {
            bracket = Some(expand(lo, hi, h, fh, tol, &mut tr, &mut f)?);
        }
    }
    let (a, c) = match bracket {
        Some(b) => b,
        None => {
            let n = grid.max(3);
            let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let mut vals = Vec::with_capacity(n);
            for &x in &xs {
                vals.push(tr.eval(x, &mut f)?);
            }
            let Some(i) = (0..n).filter(|&i| vals[i].is_finite()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])) else {
                return tr.finish();
            };
            (xs[i.saturating_sub(1)], xs[(i + 1).min(n - 1)])
        }
    };
    golden(a, c, tol, &mut tr, &mut f)?;
    tr.finish()
}

/// Grows `[h - d, h + d]` geometrically until both ends are no better than
/// the interior point.
fn expand<T, F>(lo: f64, hi: f64, h: f64, fh: f64, tol: f64, tr: &mut Tracker<T>, f: &mut F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    let mut step = ((hi - lo) * 1e-3).max(4.0 * tol);
    let (mut b, mut fb) = (h, fh);
    let mut a = (b - step).max(lo);
    let mut c = (b + step).min(hi);
    let mut fa = if a < b { tr.eval(a, f)? } else { f64::INFINITY };
    let mut fc = if c > b { tr.eval(c, f)? } else { f64::INFINITY };
    while fa < fb && a > lo {
        c = b;
        b = a;
        fb = fa;
        step *= 2.0;
        a = (b - step).max(lo);
        fa = tr.eval(a, f)?;
    }
    if fa < fb {
        return Ok((lo, c));
    }
    while fc < fb && c < hi {
        a = b;
        b = c;
        fb = fc;
        step *= 2.0;
        c = (b + step).min(hi);
        fc = tr.eval(c, f)?;
    }
    if fc < fb {
        return Ok((a, hi));
    }
    Ok((a, c))
}

fn golden<T, F>(mut a: f64, mut c: f64, tol: f64, tr: &mut Tracker<T>, f: &mut F) -> Result<()>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = tr.eval(x1, f)?;
    let mut f2 = tr.eval(x2, f)?;
    while c - a > tol {
        let go_left = if f1.is_infinite() && f2.is_infinite() {
            // The feasible interval lies outside [x1, x2]; follow the best point.
            tr.best_x().is_some_and(|b| b < x1)
        } else {
            f1 <= f2
        };
        if go_left {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = tr.eval(x1, f)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = tr.eval(x2, f)?;
        }
    }
    Ok(())
}
