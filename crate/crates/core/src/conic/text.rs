//! Plain-text problem format.
//!
//! ```text
//! conic 1
//! blocks <count>
//! psd <n> <label> | scalar <label>        (one line per block)
//! objective <constant> <term count>
//! <terms>
//! constraints <count>
//! constraint <eq|le|ge> <rhs> <term count> <label>
//! <terms>
//! end
//! ```
//!
//! A term is either `scalar <block> <coef>` or `psd <block>` followed by `n`
//! lines, line `i` listing `re im` pairs of the Hermitian coefficient row `i`
//! for columns `0..=i`. Numbers use shortest round-trip formatting, so a
//! dump/load cycle is exact. Labels are single tokens (`-` when empty).

use super::{BlockKind, Coef, ConicProblem, LinExpr, Relation, Term};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

fn label_token(s: &str) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s.split_whitespace().collect::<Vec<_>>().join("_")
    }
}

fn write_expr(out: &mut String, p: &ConicProblem, e: &LinExpr) {
    for t in &e.terms {
        match t {
            Term::Scalar { block, coef } => out.push_str(&format!("scalar {block} {coef:e}\n")),
            Term::Psd { block, coef } => {
                let n = p.block_dim(*block).unwrap_or(0);
                let m = coef.to_dense(n);
                out.push_str(&format!("psd {block}\n"));
                for i in 0..n {
                    let row: Vec<String> = (0..=i)
                        .map(|j| {
                            let im = if i == j { 0.0 } else { m[(i, j)].im + 0.0 };
                            format!("{:e} {:e}", m[(i, j)].re + 0.0, im)
                        })
                        .collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
            }
        }
    }
}

pub fn dump(p: &ConicProblem) -> String {
    let mut out = String::from("conic 1\n");
    out.push_str(&format!("blocks {}\n", p.blocks.len()));
    for b in &p.blocks {
        match b.kind {
            BlockKind::HermitianPsd(n) => out.push_str(&format!("psd {n} {}\n", label_token(&b.label))),
            BlockKind::NonnegScalar => out.push_str(&format!("scalar {}\n", label_token(&b.label))),
        }
    }
    out.push_str(&format!("objective {:e} {}\n", p.objective.constant, p.objective.terms.len()));
    write_expr(&mut out, p, &p.objective);
    out.push_str(&format!("constraints {}\n", p.constraints.len()));
    for c in &p.constraints {
        let rel = match c.relation {
            Relation::Eq => "eq",
            Relation::Le => "le",
            Relation::Ge => "ge",
        };
        out.push_str(&format!(
            "constraint {rel} {:e} {} {}\n",
            c.rhs,
            c.expr.terms.len(),
            label_token(&c.label)
        ));
        write_expr(&mut out, p, &c.expr);
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let (i, l) = self
                .it
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of problem text".into()))?;
            self.line = i + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() && !toks[0].starts_with('#') {
                return Ok(toks);
            }
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("line {}: {msg}", self.line))
    }

    fn num<T: std::str::FromStr>(&self, tok: Option<&&str>) -> Result<T> {
        tok.and_then(|t| t.parse().ok()).ok_or_else(|| self.err("expected a number"))
    }

    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next()?;
        if toks[0] != key {
            return Err(self.err(&format!("expected `{key}`, found `{}`", toks[0])));
        }
        Ok(toks)
    }
}

fn from_label(tok: Option<&&str>) -> String {
    match tok {
        None | Some(&"-") => String::new(),
        Some(t) => t.to_string(),
    }
}

fn read_terms(lines: &mut Lines, p: &ConicProblem, count: usize) -> Result<LinExpr> {
    let mut e = LinExpr::new();
    for _ in 0..count {
        let toks = lines.next()?;
        let block: usize = lines.num(toks.get(1))?;
        match toks[0] {
            "scalar" => {
                if !matches!(p.blocks.get(block).map(|b| b.kind), Some(BlockKind::NonnegScalar)) {
                    return Err(lines.err("scalar term on a non-scalar block"));
                }
                e = e.add_scalar(block, lines.num(toks.get(2))?);
            }
            "psd" => {
                let n = p.block_dim(block).ok_or_else(|| lines.err("psd term on a non-PSD block"))?;
                let mut m = CMat::zeros(n, n);
                for i in 0..n {
                    let row = lines.next()?;
                    if row.len() != 2 * (i + 1) {
                        return Err(lines.err(&format!("row {i} needs {} numbers", 2 * (i + 1))));
                    }
                    for j in 0..=i {
                        let z = C64::new(lines.num(row.get(2 * j))?, lines.num(row.get(2 * j + 1))?);
                        m[(i, j)] = z;
                        m[(j, i)] = z.conj();
                    }
                }
                let nnz = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).filter(|&(i, j)| m[(i, j)] != C64::new(0.0, 0.0)).count();
                let coef = if nnz * 8 <= n * n {
                    let mut es = Vec::with_capacity(nnz);
                    for i in 0..n {
                        for j in 0..=i {
                            if m[(i, j)] != C64::new(0.0, 0.0) {
                                es.push((i, j, m[(i, j)]));
                            }
                        }
                    }
                    Coef::Entries(es)
                } else {
                    Coef::Dense(m)
                };
                e = e.add_psd(block, coef);
            }
            other => return Err(lines.err(&format!("unknown term kind `{other}`"))),
        }
    }
    Ok(e)
}

pub fn load(text: &str) -> Result<ConicProblem> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    let head = lines.expect("conic")?;
    if head.get(1) != Some(&"1") {
        return Err(lines.err("unsupported format version"));
    }
    let toks = lines.expect("blocks")?;
    let nb: usize = lines.num(toks.get(1))?;
    let mut p = ConicProblem::new();
    for _ in 0..nb {
        let toks = lines.next()?;
        match toks[0] {
            "psd" => {
                let n: usize = lines.num(toks.get(1))?;
                p.add_psd(n, from_label(toks.get(2)));
            }
            "scalar" => {
                p.add_scalar(from_label(toks.get(1)));
            }
            other => return Err(lines.err(&format!("unknown block kind `{other}`"))),
        }
    }
    let toks = lines.expect("objective")?;
    let constant: f64 = lines.num(toks.get(1))?;
    let nt: usize = lines.num(toks.get(2))?;
    let mut obj = read_terms(&mut lines, &p, nt)?;
    obj.constant = constant;
    p.set_objective(obj);
    let toks = lines.expect("constraints")?;
    let nc: usize = lines.num(toks.get(1))?;
    for _ in 0..nc {
        let toks = lines.expect("constraint")?;
        let rel = match toks.get(1) {
            Some(&"eq") => Relation::Eq,
            Some(&"le") => Relation::Le,
            Some(&"ge") => Relation::Ge,
            _ => return Err(lines.err("relation must be eq, le or ge")),
        };
        let rhs: f64 = lines.num(toks.get(2))?;
        let nt: usize = lines.num(toks.get(3))?;
        let label = from_label(toks.get(4));
        let expr = read_terms(&mut lines, &p, nt)?;
        p.add_constraint(expr, rel, rhs, label);
    }
    lines.expect("end")?;
    p.validate()?;
    Ok(p)
}
