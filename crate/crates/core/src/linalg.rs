//! Dense complex linear algebra helpers shared by the spectral, symplectic and
//! inverse-construction modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Parlett-Reinsch balancing with radix-2 scalings.
///
/// Returns `(D^-1 M D, diag(D))`. Similarity with a power-of-two diagonal is
/// exact in floating point, so spectra and ranks are unchanged.
pub fn balance(m: &CMat) -> (CMat, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut scale = vec![1.0; n];
    const RADIX: f64 = 2.0;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].l1_norm();
                    r += a[(i, j)].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                converged = false;
                scale[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (a, scale)
}

/// Eigenvalues of a square complex matrix via balancing and complex Schur.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Eigensolver);
    }
    let (b, _) = balance(m);
    let schur = b.try_schur(f64::EPSILON, 100_000).ok_or(Error::Eigensolver)?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Real form `[[Re M, -Im M], [Im M, Re M]]` of a complex matrix. Its
/// singular values are those of `M`, each twice.
///
/// The subspace routines below work on this form: the complex SVD in
/// nalgebra loses accuracy in its singular vectors when singular values come
/// in close pairs, which is the normal situation for these endomorphisms.
fn realify(m: &CMat) -> RMat {
    let (r, c) = m.shape();
    RMat::from_fn(2 * r, 2 * c, |i, j| {
        let v = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Complex vector `a + i b` from a real column `(a, b)`.
fn complexify(v: nalgebra::DVectorView<'_, f64>) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(n, |i, _| C64::new(v[i], v[i + n]))
}

/// Orthonormal basis of the complex span of `vs` with `count` vectors,
/// picking at each step the candidate with the largest remaining component.
fn complex_basis(vs: Vec<CVec>, dim: usize, count: usize) -> CMat {
    let mut basis: Vec<CVec> = Vec::with_capacity(count);
    let mut rest = vs;
    for _ in 0..count {
        let Some((k, _)) = rest.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())) else {
            break;
        };
        let v = rest.swap_remove(k);
        let v = v.unscale(v.norm());
        for r in &mut rest {
            let c = v.dotc(r);
            *r -= &v * c;
        }
        basis.push(v);
    }
    if basis.is_empty() {
        CMat::zeros(dim, 0)
    } else {
        CMat::from_columns(&basis)
    }
}

/// Real SVD of the real form, padded with zero rows when wide so that the
/// right singular vectors are complete. Returns the complex singular values
/// (descending) together with the real `V`, columns sorted to match the
/// doubled real values.
fn real_svd(m: &CMat) -> (Vec<f64>, RMat) {
    let (r, c) = m.shape();
    let mut real = realify(m);
    if r < c {
        real = real.insert_rows(2 * r, 2 * (c - r), 0.0);
    }
    let svd = real.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vv = RMat::from_columns(&order.iter().map(|&i| vt.row(i).transpose()).collect::<Vec<_>>());
    let sigma = order.iter().step_by(2).map(|&i| svd.singular_values[i]).take(r.min(c)).collect();
    (sigma, vv)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    real_svd(m).0
}

/// Numerical rank: number of singular values above `tol * scale`, where the
/// scale is the largest singular value (or `scale_floor` if larger).
pub fn numerical_rank(m: &CMat, tol: f64, scale_floor: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0).max(scale_floor);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > tol * smax).count()
}

fn rank_of(sigma: &[f64], tol: f64) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * smax).count()
}

/// Orthonormal basis (columns) of the null space of `m`, with rank decided by
/// `tol` relative to the largest singular value.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let c = m.ncols();
    if m.nrows() == 0 || c == 0 {
        return CMat::identity(c, c);
    }
    let (sigma, v) = real_svd(m);
    let rank = rank_of(&sigma, tol);
    let cands: Vec<CVec> = (2 * rank..2 * c).map(|k| complexify(v.column(k))).collect();
    complex_basis(cands, c, c - rank)
}

/// Orthonormal basis (columns) of the column space of `m`, as the orthogonal
/// complement of `ker m^H`.
pub fn column_space(m: &CMat, tol: f64) -> CMat {
    let r = m.nrows();
    if r == 0 || m.ncols() == 0 {
        return CMat::zeros(r, 0);
    }
    let left = null_space(&m.adjoint(), tol);
    if left.ncols() == 0 {
        return CMat::identity(r, r);
    }
    null_space(&left.adjoint(), tol)
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// The standard symplectic matrix `[[0, 1], [-1, 0]]` repeated `n` times.
pub fn standard_symplectic(n: usize) -> CMat {
    let mut w = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(2 * i, 2 * i + 1)] = ONE;
        w[(2 * i + 1, 2 * i)] = -ONE;
    }
    w
}
