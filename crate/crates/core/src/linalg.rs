//! Dense complex linear-algebra helpers shared by the whole crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

/// `v v^H`.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Real part of `v^H M v`.
pub fn quad_form(m: &CMat, v: &CVec) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Splits an arbitrary square `M` into Hermitian `(P, Q)` with
/// `tr(M X) = tr(P X) + j tr(Q X)` for every Hermitian `X`.
pub fn re_im_parts(m: &CMat) -> (CMat, CMat) {
    let p = hermitian_part(m);
    let q = (m - m.adjoint()) * C64::new(0.0, -0.5);
    (p, q)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = 1.0f64.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max));
    for i in 0..m.nrows() {
        for j in 0..=i {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: CMat,
}

pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Real symmetric eigenvalues sorted ascending.
pub fn sym_eigenvalues(m: &RMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
pub fn fix_global_phase(v: &mut CVec) {
    let Some((idx, _)) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
    else {
        return;
    };
    let pivot = v[idx];
    if pivot.norm() == 0.0 {
        return;
    }
    let rot = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|z| *z *= rot);
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn embed_complex(h: &CMat) -> Result<RMat> {
    if !is_hermitian(h, 1e-12) {
        return Err(Error::InvalidArgument(
            "embed_complex expects a Hermitian matrix".into(),
        ));
    }
    Ok(embed_unchecked(h))
}

pub(crate) fn embed_unchecked(h: &CMat) -> RMat {
    let n = h.nrows();
    let mut out = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(n + i, n + j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
        }
    }
    out
}

/// Hermitian matrix whose embedding is the orthogonal projection of `x` onto
/// the embedded subspace.
pub fn unembed(x: &RMat) -> CMat {
    let n = x.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        C64::new(
            0.5 * (x[(i, j)] + x[(n + i, n + j)]),
            0.5 * (x[(n + i, j)] - x[(i, n + j)]),
        )
    })
}

/// `F` with `F F^H = M` for Hermitian PSD `M`; negative eigenvalues are
/// treated as zero. Columns are `sqrt(lambda_i) v_i` for `lambda_i > 0`.
pub fn psd_factor(m: &CMat) -> CMat {
    let n = m.nrows();
    let eig = hermitian_eigen(m);
    let lmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.values[i] > 1e-14 * lmax && eig.values[i] > 0.0)
        .collect();
    CMat::from_fn(n, keep.len(), |r, c| {
        let i = keep[c];
        eig.vectors[(r, i)] * eig.values[i].sqrt()
    })
}

/// Pivoted (rank-revealing) Cholesky of a Hermitian PSD matrix.
///
/// Returns `L` (`n x r`) with `L L^H ~= M`, stopping once the largest
/// remaining diagonal falls below `tol * max_diag`.
pub fn pivoted_cholesky(m: &CMat, tol: f64) -> CMat {
    let n = m.nrows();
    let mut a = hermitian_part(m);
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
    let mut cols: Vec<CVec> = Vec::new();
    if max_diag <= 0.0 {
        return CMat::zeros(n, 0);
    }
    for k in 0..n {
        let (piv, dmax) = (k..n)
            .map(|i| (i, a[(perm[i], perm[i])].re))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if dmax <= tol * max_diag {
            break;
        }
        perm.swap(k, piv);
        let p = perm[k];
        let root = dmax.sqrt();
        let mut col = CVec::zeros(n);
        col[p] = C64::new(root, 0.0);
        for &i in &perm[k + 1..] {
            col[i] = a[(i, p)] / root;
        }
        for &i in &perm[k + 1..] {
            for &j in &perm[k + 1..] {
                let delta = col[i] * col[j].conj();
                a[(i, j)] -= delta;
            }
        }
        cols.push(col);
    }
    CMat::from_fn(n, cols.len(), |r, c| cols[c][r])
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hpd_inverse(m: &CMat) -> Option<CMat> {
    nalgebra::Cholesky::new(hermitian_part(m)).map(|c| c.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn embedding_of_identity_is_identity() {
        let e = embed_complex(&CMat::identity(2, 2)).unwrap();
        assert_eq!(e, RMat::identity(4, 4));
    }

    #[test]
    fn embedding_doubles_spectrum() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        let ev = sym_eigenvalues(&embed_complex(&h).unwrap());
        for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn embedding_rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(embed_complex(&m), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unembed_inverts_embed() {
        let h = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3), c(1.0, 0.0)]);
        let back = unembed(&embed_unchecked(&h));
        assert_relative_eq!(frobenius(&(back - h)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pivoted_cholesky_recovers_rank_deficient_matrix() {
        let v1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)]);
        let v2 = CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.2)]);
        let m = outer(&v1) + outer(&v2);
        let l = pivoted_cholesky(&m, 1e-12);
        assert_eq!(l.ncols(), 2);
        assert_relative_eq!(frobenius(&(&l * l.adjoint() - &m)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn global_phase_makes_pivot_real_positive() {
        let mut v = CVec::from_vec(vec![c(0.1, 0.0), c(0.0, -2.0)]);
        fix_global_phase(&mut v);
        assert_relative_eq!(v[1].re, 2.0, epsilon = 1e-15);
        assert_relative_eq!(v[1].im, 0.0, epsilon = 1e-15);
    }
}
