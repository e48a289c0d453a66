//! Small dense linear-conic programs over Hermitian PSD blocks and
//! nonnegative scalars.
//!
//! A [`ConicProblem`] is built block by block; every linear functional is a
//! [`LinExpr`] whose PSD terms carry a Hermitian coefficient `C` and evaluate
//! to `Re tr(C X)`. [`solve`] runs a primal-dual interior-point method on the
//! real symmetric embedding of the complex blocks.

mod ipm;
mod lifts;
mod phase1;
mod standard;
mod text;

pub use ipm::{solve, solve_detailed, SolverOptions};
pub use lifts::{lift_inverse, lift_square, lift_trace_inverse, link_hermitian, lmi_2x2, HermView, TraceInverseLift};
pub use phase1::{phase1_start, Phase1Outcome};
pub use text::{dump, load};

use crate::error::{Error, Result};
use crate::linalg::{is_hermitian, trace_product, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    HermitianPsd(usize),
    NonnegScalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub label: String,
}

/// Hermitian coefficient of a PSD term.
#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Dense(CMat),
    /// `(i, j, c)` sets `C[i][j] = c` and `C[j][i] = conj(c)`; the term then
    /// contributes `2 Re(c conj(X_ij))` off the diagonal and `Re(c) X_ii` on it.
    Entries(Vec<(usize, usize, C64)>),
}

impl Coef {
    pub fn to_dense(&self, n: usize) -> CMat {
        match self {
            Coef::Dense(m) => m.clone(),
            Coef::Entries(es) => {
                let mut m = CMat::zeros(n, n);
                for &(i, j, c) in es {
                    if i == j {
                        m[(i, i)] += C64::new(c.re, 0.0);
                    } else {
                        m[(i, j)] += c;
                        m[(j, i)] += c.conj();
                    }
                }
                m
            }
        }
    }

    fn eval(&self, x: &CMat) -> f64 {
        match self {
            Coef::Dense(c) => trace_product(c, x).re,
            Coef::Entries(es) => es
                .iter()
                .map(|&(i, j, c)| {
                    if i == j {
                        c.re * x[(i, i)].re
                    } else {
                        2.0 * (c * x[(i, j)].conj()).re
                    }
                })
                .sum(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Coef::Dense(m) => *m *= C64::new(s, 0.0),
            Coef::Entries(es) => es.iter_mut().for_each(|e| e.2 *= s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Psd { block: usize, coef: Coef },
    Scalar { block: usize, coef: f64 },
}

/// Real affine functional of the block variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub terms: Vec<Term>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn scalar(block: usize, coef: f64) -> Self {
        Self::new().add_scalar(block, coef)
    }

    /// `Re tr(M X)` for any square `M` (its Hermitian part is used).
    pub fn re_trace(block: usize, m: &CMat) -> Self {
        let (p, _) = crate::linalg::re_im_parts(m);
        Self::new().add_psd(block, Coef::Dense(p))
    }

    /// `Im tr(M X)` for Hermitian `X`.
    pub fn im_trace(block: usize, m: &CMat) -> Self {
        let (_, q) = crate::linalg::re_im_parts(m);
        Self::new().add_psd(block, Coef::Dense(q))
    }

    /// `Re tr(X)`.
    pub fn trace(block: usize, n: usize) -> Self {
        Self::new().add_psd(block, Coef::Entries((0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect()))
    }

    pub fn entry_re(block: usize, i: usize, j: usize) -> Self {
        let c = if i == j { 1.0 } else { 0.5 };
        Self::new().add_psd(block, Coef::Entries(vec![(i, j, C64::new(c, 0.0))]))
    }

    pub fn entry_im(block: usize, i: usize, j: usize) -> Self {
        if i == j {
            return Self::new();
        }
        Self::new().add_psd(block, Coef::Entries(vec![(i, j, C64::new(0.0, 0.5))]))
    }

    pub fn add_psd(mut self, block: usize, coef: Coef) -> Self {
        self.terms.push(Term::Psd { block, coef });
        self
    }

    pub fn add_scalar(mut self, block: usize, coef: f64) -> Self {
        self.terms.push(Term::Scalar { block, coef });
        self
    }

    pub fn plus(mut self, other: LinExpr) -> Self {
        self.terms.extend(other.terms);
        self.constant += other.constant;
        self
    }

    pub fn plus_scaled(self, other: LinExpr, s: f64) -> Self {
        self.plus(other.scaled(s))
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            match t {
                Term::Psd { coef, .. } => coef.scale(s),
                Term::Scalar { coef, .. } => *coef *= s,
            }
        }
        self.constant *= s;
        self
    }

    /// Value at the given block values.
    pub fn eval(&self, values: &[BlockValue]) -> f64 {
        let mut acc = self.constant;
        for t in &self.terms {
            match (t, values.get(term_block(t))) {
                (Term::Psd { coef, .. }, Some(BlockValue::Psd(x))) => acc += coef.eval(x),
                (Term::Scalar { coef, .. }, Some(BlockValue::Scalar(x))) => acc += coef * x,
                _ => return f64::NAN,
            }
        }
        acc
    }
}

fn term_block(t: &Term) -> usize {
    match t {
        Term::Psd { block, .. } | Term::Scalar { block, .. } => *block,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Constant part is always zero; it is folded into `rhs` on insertion.
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
    pub label: String,
}

/// `minimize objective` subject to the constraints, all PSD blocks `>= 0` and
/// all scalar blocks `>= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProblem {
    pub blocks: Vec<Block>,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_psd(&mut self, n: usize, label: impl Into<String>) -> usize {
        self.blocks.push(Block {
            kind: BlockKind::HermitianPsd(n),
            label: label.into(),
        });
        self.blocks.len() - 1
    }

    pub fn add_scalar(&mut self, label: impl Into<String>) -> usize {
        self.blocks.push(Block {
            kind: BlockKind::NonnegScalar,
            label: label.into(),
        });
        self.blocks.len() - 1
    }

    pub fn block_dim(&self, block: usize) -> Option<usize> {
        match self.blocks.get(block)?.kind {
            BlockKind::HermitianPsd(n) => Some(n),
            BlockKind::NonnegScalar => None,
        }
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = expr;
    }

    /// Adds `expr (rel) rhs`; a constant inside `expr` moves to the right.
    pub fn add_constraint(&mut self, expr: LinExpr, relation: Relation, rhs: f64, label: impl Into<String>) -> usize {
        let shift = expr.constant;
        let mut expr = expr;
        expr.constant = 0.0;
        self.constraints.push(Constraint {
            expr,
            relation,
            rhs: rhs - shift,
            label: label.into(),
        });
        self.constraints.len() - 1
    }

    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64, label: impl Into<String>) -> usize {
        self.add_constraint(expr, Relation::Eq, rhs, label)
    }

    pub fn add_le(&mut self, expr: LinExpr, rhs: f64, label: impl Into<String>) -> usize {
        self.add_constraint(expr, Relation::Le, rhs, label)
    }

    pub fn add_ge(&mut self, expr: LinExpr, rhs: f64, label: impl Into<String>) -> usize {
        self.add_constraint(expr, Relation::Ge, rhs, label)
    }

    /// Checks block references, coefficient shapes and Hermitian symmetry.
    pub fn validate(&self) -> Result<()> {
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            for t in &e.terms {
                match t {
                    Term::Psd { block, coef } => {
                        let n = self.block_dim(*block).ok_or_else(|| {
                            Error::InvalidArgument(format!("{what}: block {block} is not a PSD block"))
                        })?;
                        match coef {
                            Coef::Dense(m) => {
                                if m.nrows() != n || m.ncols() != n {
                                    return Err(Error::DimensionMismatch(format!(
                                        "{what}: coefficient is {}x{}, block {block} is {n}x{n}",
                                        m.nrows(),
                                        m.ncols()
                                    )));
                                }
                                if !is_hermitian(m, 1e-12) {
                                    return Err(Error::InvalidArgument(format!(
                                        "{what}: coefficient on block {block} is not Hermitian"
                                    )));
                                }
                            }
                            Coef::Entries(es) => {
                                if es.iter().any(|&(i, j, _)| i >= n || j >= n) {
                                    return Err(Error::DimensionMismatch(format!(
                                        "{what}: entry outside block {block}"
                                    )));
                                }
                            }
                        }
                    }
                    Term::Scalar { block, coef } => {
                        if !matches!(self.blocks.get(*block).map(|b| b.kind), Some(BlockKind::NonnegScalar)) {
                            return Err(Error::InvalidArgument(format!(
                                "{what}: block {block} is not a scalar block"
                            )));
                        }
                        if !coef.is_finite() {
                            return Err(Error::InvalidArgument(format!("{what}: non-finite coefficient")));
                        }
                    }
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.expr, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("constraint {i}: non-finite rhs")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Psd(CMat),
    Scalar(f64),
}

impl BlockValue {
    pub fn psd(&self) -> &CMat {
        match self {
            BlockValue::Psd(m) => m,
            BlockValue::Scalar(_) => panic!("scalar block accessed as PSD"),
        }
    }

    pub fn scalar(&self) -> f64 {
        match self {
            BlockValue::Scalar(x) => *x,
            BlockValue::Psd(_) => panic!("PSD block accessed as scalar"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: Vec<BlockValue>,
    /// One multiplier per constraint, sign convention `C - sum y_i A_i = Phi`.
    pub dual: Vec<f64>,
    /// `Phi` per PSD block, reduced cost per scalar block.
    pub dual_slack: Vec<BlockValue>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    /// `||b - A(x)|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||C - A^T y - Z|| / (1 + ||C||)`.
    pub dual_residual: f64,
    pub iterations: usize,
    /// Phase-I certificate when `status == Infeasible`.
    pub certificate: Option<f64>,
    pub message: String,
}

impl ConicSolution {
    pub fn value(&self, expr: &LinExpr) -> f64 {
        expr.eval(&self.primal)
    }

    pub fn psd(&self, block: usize) -> &CMat {
        self.primal[block].psd()
    }

    pub fn scalar(&self, block: usize) -> f64 {
        self.primal[block].scalar()
    }
}

#[cfg(test)]
mod tests;
