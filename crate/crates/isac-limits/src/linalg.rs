//! Hermitian linear algebra used by all solvers.
//!
//! Eigendecompositions carry a fixed ordering (descending eigenvalues) and a
//! fixed phase convention so that downstream water-filling outputs are
//! reproducible bit for bit.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{IsacError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative tolerance on ‖A − A†‖_F / ‖A‖_F.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues down to −EIG_CLAMP_TOL·‖A‖ are roundoff and clamp to 0.
pub const EIG_CLAMP_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// Re Tr(A B) for Hermitian A, B; the inner product used by the gradient code.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

/// (A + A†)/2.
pub fn hermitize(a: &CMat) -> CMat {
    let mut out = a.clone();
    let n = a.nrows();
    for i in 0..n {
        out[(i, i)] = c(a[(i, i)].re);
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

pub fn check_square(a: &CMat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(IsacError::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn check_hermitian(a: &CMat, what: &str) -> Result<()> {
    check_square(a, what)?;
    let scale = frobenius(a);
    let defect = hermitian_defect(a);
    if !defect.is_finite() || defect > HERMITIAN_TOL * scale {
        return Err(IsacError::Domain(format!(
            "{what} is not Hermitian (defect {defect:.3e}, norm {scale:.3e})"
        )));
    }
    Ok(())
}

/// Eigendecomposition A = U diag(λ) U† of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMat {
        reassemble(&self.vectors, &self.values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Eigenvalues descending; each eigenvector's largest-magnitude entry is made
/// real positive (first such entry on ties).
pub fn eig_hermitian(a: &CMat) -> Result<HermitianEigen> {
    check_hermitian(a, "matrix")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for i in 0..n {
            let m = col[i].norm();
            if m > best_mag * (1.0 + 1e-12) {
                best_mag = m;
                best = i;
            }
        }
        let pivot = col[best];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            c(1.0)
        };
        for i in 0..n {
            vectors[(i, k)] = col[i] * phase;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(IsacError::Domain("non-finite eigenvalue".into()));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigendecomposition of a PSD matrix with roundoff-level negatives clamped to 0.
pub fn eig_psd(a: &CMat) -> Result<HermitianEigen> {
    let mut e = eig_hermitian(a)?;
    let scale = frobenius(a);
    for v in e.values.iter_mut() {
        if *v < 0.0 {
            if *v < -EIG_CLAMP_TOL * scale {
                return Err(IsacError::Domain(format!(
                    "matrix is not positive semidefinite (eigenvalue {v:.3e}, norm {scale:.3e})"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(e)
}

/// U diag(λ) U†, returned exactly Hermitian.
pub fn reassemble(u: &CMat, values: &[f64]) -> CMat {
    let mut scaled = u.clone();
    for (k, &v) in values.iter().enumerate() {
        let mut col = scaled.column_mut(k);
        col *= c(v);
    }
    hermitize(&(scaled * u.adjoint()))
}

/// L = U diag(√λ) with L L† = A for PSD A. Roundoff-level eigenvalues are
/// dropped so the column space of L is exactly that of A.
pub fn psd_factor(a: &CMat) -> Result<CMat> {
    let e = eig_psd(a)?;
    let floor = EIG_CLAMP_TOL * frobenius(a);
    let mut l = e.vectors.clone();
    for (k, &v) in e.values.iter().enumerate() {
        let mut col = l.column_mut(k);
        col *= c(if v > floor { v.sqrt() } else { 0.0 });
    }
    Ok(l)
}

fn cholesky(m: &CMat, what: &str) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let h = hermitize(m);
    let err = || IsacError::Domain(format!("{what} is not positive definite"));
    let ch = Cholesky::new(h.clone()).ok_or_else(err)?;
    // the complex factorization accepts zero pivots; reject numerically singular input
    let l = ch.l_dirty();
    for i in 0..h.nrows() {
        let p = l[(i, i)].re;
        if !(p.is_finite() && p > 0.0 && p * p > PIVOT_TOL * h[(i, i)].re) {
            return Err(err());
        }
    }
    Ok(ch)
}

/// Smallest accepted squared Cholesky pivot relative to the matching diagonal entry.
const PIVOT_TOL: f64 = 1e-14;

/// Tr(M⁻¹) for Hermitian positive-definite M via its Cholesky factor:
/// Tr(M⁻¹) = ‖L⁻¹‖_F².
pub fn trace_inverse_hpd(m: &CMat) -> Result<f64> {
    check_square(m, "matrix")?;
    let ch = cholesky(m, "matrix")?;
    let n = m.nrows();
    let linv = ch
        .l()
        .solve_lower_triangular(&identity(n))
        .ok_or_else(|| IsacError::Domain("singular Cholesky factor".into()))?;
    Ok(linv.iter().map(|z| z.norm_sqr()).sum())
}

/// M⁻¹ for Hermitian positive-definite M.
pub fn inverse_hpd(m: &CMat) -> Result<CMat> {
    check_square(m, "matrix")?;
    let ch = cholesky(m, "matrix")?;
    Ok(hermitize(&ch.inverse()))
}

/// M⁻¹ B for Hermitian positive-definite M.
pub fn solve_hpd(m: &CMat, b: &CMat) -> Result<CMat> {
    let ch = cholesky(m, "system matrix")?;
    Ok(ch.solve(b))
}

/// log det M for Hermitian positive-definite M.
pub fn logdet_hpd(m: &CMat) -> Result<f64> {
    check_square(m, "matrix")?;
    let ch = cholesky(m, "matrix")?;
    let l = ch.l_dirty();
    Ok((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// I_k ⊗ B.
pub fn kron_identity(k: usize, b: &CMat) -> CMat {
    let (r, cdim) = b.shape();
    let mut out = CMat::zeros(k * r, k * cdim);
    for blk in 0..k {
        out.view_mut((blk * r, blk * cdim), (r, cdim)).copy_from(b);
    }
    out
}

/// If `a` equals I_k ⊗ B exactly (within `tol` relative), returns B.
pub fn kron_identity_block(a: &CMat, k: usize, tol: f64) -> Option<CMat> {
    if k == 0 || a.nrows() % k != 0 || a.ncols() != a.nrows() {
        return None;
    }
    let n = a.nrows() / k;
    let b: CMat = a.view((0, 0), (n, n)).into_owned();
    let scale = frobenius(a).max(f64::MIN_POSITIVE);
    let mut dev = 0.0;
    for bi in 0..k {
        for bj in 0..k {
            let blk = a.view((bi * n, bj * n), (n, n));
            for i in 0..n {
                for j in 0..n {
                    let target = if bi == bj { b[(i, j)] } else { c(0.0) };
                    dev += (blk[(i, j)] - target).norm_sqr();
                }
            }
        }
    }
    if dev.sqrt() <= tol * scale {
        Some(b)
    } else {
        None
    }
}

/// Σ_i M[i-th n×n diagonal block], the partial trace over the k blocks.
pub fn block_partial_trace(m: &CMat, k: usize) -> CMat {
    let n = m.nrows() / k;
    let mut out = CMat::zeros(n, n);
    for blk in 0..k {
        out += m.view((blk * n, blk * n), (n, n));
    }
    out
}

/// vec(A) stacking columns.
pub fn vec_columns(a: &CMat) -> CVec {
    CVec::from_iterator(a.len(), a.iter().copied())
}

/// vec(G†), the vectorization used for channel estimation.
pub fn vec_adjoint(g: &CMat) -> CVec {
    vec_columns(&g.adjoint())
}

/// Inverse of [`vec_adjoint`]: rebuilds the rows×cols matrix G from vec(G†).
pub fn unvec_adjoint(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(IsacError::Dimension(format!(
            "vector of length {} cannot be reshaped to {rows}x{cols}",
            v.len()
        )));
    }
    let gd = CMat::from_column_slice(cols, rows, v.as_slice());
    Ok(gd.adjoint())
}

/// Real diagonal matrix.
pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    let mut d = CMat::zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        d[(i, i)] = c(v);
    }
    d
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}
