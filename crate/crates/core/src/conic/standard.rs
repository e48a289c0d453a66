//! Real symmetric standard form used by the interior-point core.

use nalgebra::DVector;

use super::{BlockKind, Coef, ConicProblem, LinExpr, Relation, Term};
use crate::linalg::{embed_unchecked, hermitian_part, RMat};

/// Real symmetric coefficient matrix; sparse entries are `(r, c, v)` with
/// `r >= c`, standing for both `(r, c)` and `(c, r)`.
#[derive(Debug, Clone)]
pub(crate) enum SymMat {
    Dense(RMat),
    Sparse(Vec<(usize, usize, f64)>),
}

impl SymMat {
    pub fn dot(&self, x: &RMat) -> f64 {
        match self {
            SymMat::Dense(a) => a.dot(x),
            SymMat::Sparse(es) => es
                .iter()
                .map(|&(r, c, v)| if r == c { v * x[(r, c)] } else { 2.0 * v * x[(r, c)] })
                .sum(),
        }
    }

    pub fn axpy_into(&self, alpha: f64, out: &mut RMat) {
        match self {
            SymMat::Dense(a) => *out += a * alpha,
            SymMat::Sparse(es) => {
                for &(r, c, v) in es {
                    out[(r, c)] += alpha * v;
                    if r != c {
                        out[(c, r)] += alpha * v;
                    }
                }
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            SymMat::Dense(a) => a.norm_squared(),
            SymMat::Sparse(es) => es.iter().map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v }).sum(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            SymMat::Dense(a) => a.trace(),
            SymMat::Sparse(es) => es.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match self {
            SymMat::Dense(a) => *a *= s,
            SymMat::Sparse(es) => es.iter_mut().for_each(|e| e.2 *= s),
        }
    }

    pub fn sparse_entries(&self) -> &[(usize, usize, f64)] {
        match self {
            SymMat::Sparse(es) => es,
            SymMat::Dense(_) => &[],
        }
    }
}

/// Accumulates the real embedding (halved) of Hermitian coefficients for one block.
struct Accum {
    n: usize,
    dense: Option<RMat>,
    sparse: Vec<(usize, usize, f64)>,
}

impl Accum {
    fn new(n: usize) -> Self {
        Self {
            n,
            dense: None,
            sparse: Vec::new(),
        }
    }

    fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.sparse.push(if r >= c { (r, c, v) } else { (c, r, v) });
        }
    }

    fn add(&mut self, coef: &Coef) {
        let n = self.n;
        match coef {
            Coef::Dense(m) => {
                let e = embed_unchecked(&hermitian_part(m)) * 0.5;
                match &mut self.dense {
                    Some(d) => *d += e,
                    None => self.dense = Some(e),
                }
            }
            Coef::Entries(es) => {
                for &(i, j, c) in es {
                    if i == j {
                        self.push(i, i, 0.5 * c.re);
                        self.push(n + i, n + i, 0.5 * c.re);
                    } else {
                        self.push(i, j, 0.5 * c.re);
                        self.push(n + i, n + j, 0.5 * c.re);
                        self.push(i, n + j, -0.5 * c.im);
                        self.push(n + i, j, 0.5 * c.im);
                    }
                }
            }
        }
    }

    fn finish(mut self) -> Option<SymMat> {
        let dim = 2 * self.n;
        if let Some(mut d) = self.dense.take() {
            SymMat::Sparse(std::mem::take(&mut self.sparse)).axpy_into(1.0, &mut d);
            return Some(SymMat::Dense(d));
        }
        if self.sparse.is_empty() {
            return None;
        }
        self.sparse.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.sparse.len());
        for e in self.sparse {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        if merged.is_empty() {
            return None;
        }
        if merged.len() * 8 > dim * dim {
            let mut d = RMat::zeros(dim, dim);
            SymMat::Sparse(merged).axpy_into(1.0, &mut d);
            Some(SymMat::Dense(d))
        } else {
            Some(SymMat::Sparse(merged))
        }
    }
}

/// `min <C, X> + c_lp . x  s.t.  A(X) + A_lp x = b,  X_b >= 0, x >= 0`.
#[derive(Debug, Clone)]
pub(crate) struct Std {
    /// Real dimension (`2n`) of each PSD block.
    pub dims: Vec<usize>,
    pub n_lp: usize,
    pub c: Vec<Option<SymMat>>,
    pub c_lp: DVector<f64>,
    /// For each PSD block, the rows touching it.
    pub rows: Vec<Vec<(usize, SymMat)>>,
    /// Dense `m x n_lp`.
    pub a_lp: RMat,
    pub b: DVector<f64>,
}

impl Std {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn nu(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.n_lp) as f64
    }
}

/// Where each original block landed in the standard form.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Slot {
    Psd(usize),
    Lp(usize),
}

pub(crate) struct Lowered {
    pub std: Std,
    pub slots: Vec<Slot>,
    pub obj_constant: f64,
}

fn lower_expr(p: &ConicProblem, slots: &[Slot], expr: &LinExpr, n_psd: usize) -> (Vec<Option<SymMat>>, Vec<(usize, f64)>) {
    let mut acc: Vec<Option<Accum>> = (0..n_psd).map(|_| None).collect();
    let mut lp = Vec::new();
    for t in &expr.terms {
        match t {
            Term::Psd { block, coef } => {
                let Slot::Psd(k) = slots[*block] else { unreachable!() };
                let n = p.block_dim(*block).expect("validated");
                acc[k].get_or_insert_with(|| Accum::new(n)).add(coef);
            }
            Term::Scalar { block, coef } => {
                let Slot::Lp(k) = slots[*block] else { unreachable!() };
                lp.push((k, *coef));
            }
        }
    }
    (acc.into_iter().map(|a| a.and_then(Accum::finish)).collect(), lp)
}

pub(crate) fn lower(p: &ConicProblem) -> Lowered {
    let mut slots = Vec::with_capacity(p.blocks.len());
    let mut dims = Vec::new();
    let mut n_lp = 0;
    for b in &p.blocks {
        match b.kind {
            BlockKind::HermitianPsd(n) => {
                slots.push(Slot::Psd(dims.len()));
                dims.push(2 * n);
            }
            BlockKind::NonnegScalar => {
                slots.push(Slot::Lp(n_lp));
                n_lp += 1;
            }
        }
    }
    let n_scalar = n_lp;
    let n_slack = p.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let n_lp = n_scalar + n_slack;
    let m = p.constraints.len();
    let n_psd = dims.len();

    let (c, c_lp_terms) = lower_expr(p, &slots, &p.objective, n_psd);
    let mut c_lp = DVector::zeros(n_lp);
    for (k, v) in c_lp_terms {
        c_lp[k] += v;
    }

    let mut rows: Vec<Vec<(usize, SymMat)>> = vec![Vec::new(); n_psd];
    let mut a_lp = RMat::zeros(m, n_lp);
    let mut b = DVector::zeros(m);
    let mut slack = n_scalar;
    for (i, con) in p.constraints.iter().enumerate() {
        let (blocks, lp) = lower_expr(p, &slots, &con.expr, n_psd);
        for (k, s) in blocks.into_iter().enumerate() {
            if let Some(s) = s {
                rows[k].push((i, s));
            }
        }
        for (k, v) in lp {
            a_lp[(i, k)] += v;
        }
        match con.relation {
            Relation::Eq => {}
            Relation::Le => {
                a_lp[(i, slack)] = 1.0;
                slack += 1;
            }
            Relation::Ge => {
                a_lp[(i, slack)] = -1.0;
                slack += 1;
            }
        }
        b[i] = con.rhs;
    }
    Lowered {
        std: Std {
            dims,
            n_lp,
            c,
            c_lp,
            rows,
            a_lp,
            b,
        },
        slots,
        obj_constant: p.objective.constant,
    }
}
