//! Modeling fragments: Hermitian linking, 2x2 LMIs, squares, inverses and the
//! trace-inverse epigraph.

use super::{ConicProblem, LinExpr};
use crate::linalg::CMat;

/// Square sub-block `[offset, offset + n)` of a PSD block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermView {
    pub block: usize,
    pub offset: usize,
    pub n: usize,
}

impl HermView {
    pub fn whole(block: usize, n: usize) -> Self {
        Self { block, offset: 0, n }
    }

    pub fn re(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::entry_re(self.block, self.offset + i, self.offset + j)
    }

    pub fn im(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::entry_im(self.block, self.offset + i, self.offset + j)
    }

    /// `tr` of the view.
    pub fn trace(&self) -> LinExpr {
        (0..self.n).fold(LinExpr::new(), |e, i| e.plus(self.re(i, i)))
    }
}

/// Adds the `n^2` real equalities `target = sum_k c_k part_k + constant`.
pub fn link_hermitian(p: &mut ConicProblem, target: HermView, parts: &[(HermView, f64)], constant: Option<&CMat>, label: &str) {
    let n = target.n;
    debug_assert!(parts.iter().all(|(v, _)| v.n == n));
    for i in 0..n {
        for j in 0..=i {
            let mut re = target.re(i, j);
            for (v, c) in parts {
                re = re.plus_scaled(v.re(i, j), -c);
            }
            let rhs = constant.map_or(0.0, |m| m[(i, j)].re);
            p.add_eq(re, rhs, format!("{label}.re[{i},{j}]"));
            if i != j {
                let mut im = target.im(i, j);
                for (v, c) in parts {
                    im = im.plus_scaled(v.im(i, j), -c);
                }
                let rhs = constant.map_or(0.0, |m| m[(i, j)].im);
                p.add_eq(im, rhs, format!("{label}.im[{i},{j}]"));
            }
        }
    }
}

/// Adds a 2x2 Hermitian block `P` with `P00 = p00`, `Re P01 = p01_re`,
/// `Im P01 = p01_im`, `P11 = p11`; `None` leaves the entry free.
pub fn lmi_2x2(
    p: &mut ConicProblem,
    p00: Option<LinExpr>,
    p01_re: Option<LinExpr>,
    p01_im: Option<LinExpr>,
    p11: Option<LinExpr>,
    label: &str,
) -> usize {
    let b = p.add_psd(2, label);
    let pin = |p: &mut ConicProblem, entry: LinExpr, e: Option<LinExpr>, name: &str| {
        if let Some(e) = e {
            p.add_eq(entry.plus_scaled(e, -1.0), 0.0, format!("{label}.{name}"));
        }
    };
    pin(p, LinExpr::entry_re(b, 0, 0), p00, "00");
    pin(p, LinExpr::entry_re(b, 0, 1), p01_re, "01re");
    pin(p, LinExpr::entry_im(b, 0, 1), p01_im, "01im");
    pin(p, LinExpr::entry_re(b, 1, 1), p11, "11");
    b
}

/// `u >= y^2` through `[[u, y], [y, 1]] >= 0`; returns `u`.
pub fn lift_square(p: &mut ConicProblem, y: LinExpr, label: &str) -> LinExpr {
    let b = lmi_2x2(p, None, Some(y), Some(LinExpr::new()), Some(LinExpr::constant(1.0)), label);
    LinExpr::entry_re(b, 0, 0)
}

/// `w >= c^2 / gamma` through `[[w, c], [c, gamma]] >= 0`; returns `w`.
pub fn lift_inverse(p: &mut ConicProblem, gamma: LinExpr, c: f64, label: &str) -> LinExpr {
    let b = lmi_2x2(
        p,
        None,
        Some(LinExpr::constant(c)),
        Some(LinExpr::new()),
        Some(gamma),
        label,
    );
    LinExpr::entry_re(b, 0, 0)
}

/// The block `[[U, I], [I, R]] >= 0`, so `U >= R^-1`.
#[derive(Debug, Clone, Copy)]
pub struct TraceInverseLift {
    pub block: usize,
    pub n: usize,
}

impl TraceInverseLift {
    /// `tr(U)`, an upper bound on `tr(R^-1)` that is tight at the optimum.
    pub fn objective(&self) -> LinExpr {
        HermView::whole(self.block, self.n).trace()
    }

    pub fn r_view(&self) -> HermView {
        HermView {
            block: self.block,
            offset: self.n,
            n: self.n,
        }
    }
}

/// Adds the trace-inverse block with its off-diagonal part pinned to `I`;
/// tie the returned `R` view to other variables with [`link_hermitian`].
pub fn lift_trace_inverse(p: &mut ConicProblem, n: usize, label: &str) -> TraceInverseLift {
    let block = p.add_psd(2 * n, label);
    for i in 0..n {
        for j in 0..n {
            let rhs = if i == j { 1.0 } else { 0.0 };
            p.add_eq(LinExpr::entry_re(block, n + i, j), rhs, format!("{label}.off.re[{i},{j}]"));
            p.add_eq(LinExpr::entry_im(block, n + i, j), 0.0, format!("{label}.off.im[{i},{j}]"));
        }
    }
    TraceInverseLift { block, n }
}
