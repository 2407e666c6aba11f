//! Rebuilding the surface from `(W, A, Omega)`: the minimal-polynomial
//! fibration `mu`, the incidence set of eigenvalues, the distribution
//! `D = Im(z - A)`, its integrability, leaf coordinates and the recovered
//! 2-form on the leaf space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::endo::{coeff_endo, spectral_analysis, SpectralTol};
use crate::error::{Error, Result};
use crate::fd;
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::poly::{self, MonicPoly};
use crate::scheme::CoeffChartPoint;
use crate::surfaces::uniform_disk;
use crate::symplectic::coordinate_steps;

/// Rank tolerance for `z - A`.
pub const RANK_TOL: f64 = 1e-8;
/// Relative step used by the integrability test.
pub const FROBENIUS_STEP: f64 = 1e-4;

/// A pair `(z, w)` with `z` an eigenvalue of `A` at `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidencePoint {
    pub z: C64,
    pub w: CoeffChartPoint,
    pub multiplicity: usize,
}

/// Orthonormal basis of `Im(z - A)` at an incidence point.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionFrame {
    pub vectors: CMat,
    pub dim: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafCoordinates {
    pub z: C64,
    pub t: C64,
}

/// `max |min(M) - q|` over coefficients, relative to `max(1, max |q_k|)`.
pub fn min_poly_residual(m: &CMat, q: &MonicPoly) -> Result<f64> {
    let rep = spectral_analysis(m, &SpectralTol::default())?;
    if rep.min_poly.degree_usize() != q.degree_usize() {
        return Ok(f64::INFINITY);
    }
    let scale = q.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
    Ok(q.coeffs().iter().zip(rep.min_poly.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale)
}

/// The minimal polynomial of `A`, which is `q` itself; cross-checked against
/// the rank-sequence minimal polynomial.
pub fn mu(pt: &CoeffChartPoint) -> Result<MonicPoly> {
    let res = min_poly_residual(&coeff_endo(&pt.q)?.m, &pt.q)?;
    if res > 1e-6 {
        return Err(Error::MuInconsistent(res));
    }
    Ok(pt.q.clone())
}

/// One incidence point per eigenvalue cluster of `A`, with multiplicity
/// `algebraic / 2`.
pub fn incidence_fiber(pt: &CoeffChartPoint) -> Result<Vec<IncidencePoint>> {
    let rep = spectral_analysis(&coeff_endo(&pt.q)?.m, &SpectralTol::default())?;
    Ok(rep
        .clusters
        .iter()
        .map(|c| IncidencePoint { z: c.value, w: pt.clone(), multiplicity: c.algebraic / 2 })
        .collect())
}

fn shifted(pt: &CoeffChartPoint, z: C64) -> Result<CMat> {
    let a = coeff_endo(&pt.q)?.m;
    let n = a.nrows();
    Ok(CMat::identity(n, n) * z - a)
}

fn require_simple(ip: &IncidencePoint) -> Result<()> {
    if ip.multiplicity != 1 {
        return Err(Error::Unsupported(format!("eigenvalue of multiplicity {} (only simple eigenvalues)", ip.multiplicity)));
    }
    Ok(())
}

/// Orthonormal basis of `Im(z - A)`; its dimension must be `2d - 2`.
pub fn distribution_frame(ip: &IncidencePoint) -> Result<DistributionFrame> {
    require_simple(ip)?;
    let m = shifted(&ip.w, ip.z)?;
    let n = m.nrows();
    let vectors = linalg::column_space(&m, RANK_TOL);
    if vectors.ncols() != n - 2 {
        return Err(Error::DistributionRank { expected: n - 2, computed: vectors.ncols() });
    }
    Ok(DistributionFrame { dim: vectors.ncols(), vectors })
}

/// `max |l^T v|` over left eigenvectors `l` of `A` for `z` and frame vectors `v`.
pub fn left_eigen_residual(ip: &IncidencePoint, frame: &DistributionFrame) -> Result<f64> {
    let m = shifted(&ip.w, ip.z)?;
    let left = linalg::null_space(&m.transpose(), RANK_TOL);
    Ok(linalg::max_abs(&(left.transpose() * &frame.vectors)))
}

/// `max |d/ds q_{w + s v}(z)|` over frame vectors: `D` moves `q` only within
/// polynomials vanishing at `z`.
pub fn mu_variation_residual(ip: &IncidencePoint, frame: &DistributionFrame) -> Result<f64> {
    let x = ip.w.coords();
    let eval = |y: &[C64]| Ok(vec![ip.w.with_coords(y).q.eval(ip.z)]);
    let h = fd::REL_STEP * (1.0 + x.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let mut worst: f64 = 0.0;
    for k in 0..frame.dim {
        let v: Vec<C64> = frame.vectors.column(k).iter().copied().collect();
        worst = worst.max(fd::directional(eval, &x, &v, h)?[0].norm());
    }
    Ok(worst)
}

/// `max |Omega(u, v)| / (1 + |W|_F)` for unit `u` in `Im(z - A)` and `v` in `ker(z - A)`.
pub fn omega_orthogonality(ip: &IncidencePoint, w: &CMat) -> Result<f64> {
    let frame = distribution_frame(ip)?;
    let kernel = linalg::null_space(&shifted(&ip.w, ip.z)?, RANK_TOL);
    Ok(linalg::max_abs(&(frame.vectors.transpose() * w * kernel)) / (1.0 + w.norm()))
}

/// Smallest, over eigenvalues, of the largest `|d mu(v)|` for `v` in the
/// eigenspace (the `Q` block of `v`): no eigenspace lies inside `ker d mu`.
pub fn mu_transversality(pt: &CoeffChartPoint) -> Result<f64> {
    let d = pt.degree();
    let mut worst = f64::INFINITY;
    for ip in incidence_fiber(pt)? {
        let kernel = linalg::null_space(&shifted(pt, ip.z)?, RANK_TOL);
        let top = kernel.rows(0, d).into_owned();
        let s = linalg::singular_values(&top).first().copied().unwrap_or(0.0);
        worst = worst.min(s);
    }
    Ok(worst)
}

/// Eigenvalue of `A` at coordinates `x` continued from `z_ref`, with the
/// distance to the nearest other eigenvalue.
pub fn continued_eigenvalue(template: &CoeffChartPoint, x: &[C64], z_ref: C64) -> Result<(C64, f64)> {
    let rs = poly::roots(&template.with_coords(x).q)?;
    let (i, _) = rs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - z_ref).norm().total_cmp(&(b.1 - z_ref).norm()))
        .ok_or_else(|| Error::Continuation("no eigenvalues".into()))?;
    let gap = rs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| (r - rs[i]).norm()).fold(f64::INFINITY, f64::min);
    Ok((rs[i], gap))
}

/// Columns of `z - A` forming a well-conditioned basis of its image
/// (greedy Gram-Schmidt pivoting).
pub fn frame_columns(m: &CMat, count: usize) -> Vec<usize> {
    let mut chosen = Vec::new();
    let mut basis: Vec<CVec> = Vec::new();
    for _ in 0..count {
        let mut best = (0, -1.0, CVec::zeros(m.nrows()));
        for j in (0..m.ncols()).filter(|j| !chosen.contains(j)) {
            let mut v = m.column(j).into_owned();
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
            let nv = v.norm();
            if nv > best.1 {
                best = (j, nv, v);
            }
        }
        chosen.push(best.0);
        basis.push(best.2.unscale(best.1.max(f64::MIN_POSITIVE)));
    }
    chosen
}

/// `max |z_i^k / q'(z_i)|`: how far the roots move per unit change of a
/// coefficient.
pub fn root_sensitivity(q: &MonicPoly) -> Result<f64> {
    let dq = q.as_poly().derivative();
    let mut worst: f64 = 0.0;
    for z in poly::roots(q)? {
        let slope = dq.eval(z).norm();
        let top = (0..q.degree_usize()).map(|k| z.norm().powi(k as i32)).fold(0.0, f64::max);
        worst = worst.max(top / slope);
    }
    Ok(worst)
}

/// Frame field `V_k(x) = (z(x) - A(x)) e_k` of `D` near the incidence point,
/// with `z(x)` the continued eigenvalue.
fn frame_field<'a>(ip: &'a IncidencePoint, cols: &'a [usize]) -> impl Fn(&[C64]) -> Result<Vec<CVec>> + 'a {
    move |x: &[C64]| {
        let pt = ip.w.with_coords(x);
        let (z, _) = continued_eigenvalue(&ip.w, x, ip.z)?;
        let m = shifted(&pt, z)?;
        Ok(cols.iter().map(|&k| m.column(k).into_owned()).collect())
    }
}

/// A vector field on the coefficient chart.
type Field<'a> = Box<dyn Fn(&[C64]) -> Result<CVec> + 'a>;

fn bracket_orthogonal_residual(fields: &[Field<'_>], x: &[C64], span: &CMat, h: f64) -> Result<f64> {
    let q = linalg::column_space(span, RANK_TOL);
    let vals: Vec<CVec> = fields.iter().map(|f| f(x)).collect::<Result<_>>()?;
    let jacs: Vec<CMat> = fields
        .iter()
        .map(|f| fd::jacobian_steps(|y| Ok(f(y)?.iter().copied().collect()), x, &vec![h; x.len()]))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            let (ab, ba) = (&jacs[j] * &vals[i], &jacs[i] * &vals[j]);
            let scale = 1.0 + ab.norm() + ba.norm();
            let br = ab - ba;
            let perp = &br - &q * (q.adjoint() * &br);
            worst = worst.max(perp.norm() / scale);
        }
    }
    Ok(worst)
}

/// Largest component orthogonal to `D` of the brackets `[V_i, V_j]` of a
/// smooth frame of `D`, relative to `1 + |DV_j V_i| + |DV_i V_j|`.
///
/// Jacobians are central differences with step `h` divided by
/// [`root_sensitivity`], so the eigenvalues move by about `h`.
pub fn frobenius_residual(ip: &IncidencePoint, h: f64) -> Result<f64> {
    frobenius_with_extra(ip, h, None)
}

/// Affine vector field `x -> offset + slope (x - x0)` used to spoil `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtraField {
    pub offset: CVec,
    pub slope: CMat,
}

impl ExtraField {
    /// Random offset `r`, random slope plus `n w^*` where `n` is the unit
    /// normal of `span{D, r}` and `w` a unit vector of `D`, so that
    /// `span{D, r(x)}` is not involutive at the incidence point.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, ip: &IncidencePoint) -> Result<Self> {
        let frame = distribution_frame(ip)?;
        let n = frame.vectors.nrows();
        let offset = random_direction(rng, n);
        let mut cols: Vec<CVec> = frame.vectors.column_iter().map(|c| c.into_owned()).collect();
        cols.push(offset.clone());
        let normal = linalg::null_space(&CMat::from_columns(&cols).adjoint(), RANK_TOL);
        let mut slope = CMat::from_fn(n, n, |_, _| uniform_disk(rng, 1.0));
        if normal.ncols() > 0 && frame.dim > 0 {
            slope += normal.column(0) * frame.vectors.column(0).adjoint();
        }
        Ok(ExtraField { offset, slope })
    }
}

/// Same test on `span{D, extra}`, a distribution that is not integrable.
pub fn frobenius_sabotaged(ip: &IncidencePoint, h: f64, extra: &ExtraField) -> Result<f64> {
    frobenius_with_extra(ip, h, Some(extra))
}

fn frobenius_with_extra(ip: &IncidencePoint, h: f64, extra: Option<&ExtraField>) -> Result<f64> {
    require_simple(ip)?;
    let n = 2 * ip.w.degree();
    if n == 2 && extra.is_none() {
        return Ok(0.0);
    }
    let m = shifted(&ip.w, ip.z)?;
    let cols = frame_columns(&m, n - 2);
    let field = frame_field(ip, &cols);
    let x = ip.w.coords();
    let mut fields: Vec<Field<'_>> = Vec::new();
    for k in 0..cols.len() {
        let f = &field;
        fields.push(Box::new(move |y: &[C64]| Ok(f(y)?.swap_remove(k))));
    }
    let mut cols_at_x = field(&x)?;
    if let Some(e) = extra {
        cols_at_x.push(e.offset.clone());
        let x0 = CVec::from_column_slice(&x);
        fields.push(Box::new(move |y: &[C64]| Ok(&e.offset + &e.slope * (CVec::from_column_slice(y) - &x0))));
    }
    let span = CMat::from_columns(&cols_at_x);
    let step = h / root_sensitivity(&ip.w.q)?.max(1.0);
    bracket_orthogonal_residual(&fields, &x, &span, step)
}

/// Random unit vector of `C^n` for the sabotage control.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| uniform_disk(rng, 1.0));
    let nv = v.norm();
    v.unscale(nv)
}

/// `(z, T(z))`: the base value and the fiber polynomial at the eigenvalue.
pub fn leaf_invariants(ip: &IncidencePoint) -> LeafCoordinates {
    LeafCoordinates { z: ip.z, t: ip.w.t.eval(ip.z) }
}

fn leaf_map<'a>(ip: &'a IncidencePoint) -> impl Fn(&[C64]) -> Result<Vec<C64>> + 'a {
    move |x: &[C64]| {
        let (z, _) = continued_eigenvalue(&ip.w, x, ip.z)?;
        Ok(vec![z, ip.w.with_coords(x).t.eval(z)])
    }
}

/// Largest change of the leaf coordinates along the flow of the `D`-field
/// `(z(x) - A(x)) r` (classical Runge-Kutta, fixed steps, eigenvalue continued
/// step by step).
pub fn leaf_drift(ip: &IncidencePoint, r: &CVec, time: f64, steps: usize) -> Result<f64> {
    require_simple(ip)?;
    let start = leaf_invariants(ip);
    let h = time / steps as f64;
    let mut x = ip.w.coords();
    let mut z = ip.z;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let z_ref = z;
        let field = |y: &[C64]| -> Result<Vec<C64>> {
            let (zz, _) = continued_eigenvalue(&ip.w, y, z_ref)?;
            Ok((shifted(&ip.w.with_coords(y), zz)? * r).iter().copied().collect())
        };
        let k1 = field(&x)?;
        let speed = k1.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let next = crate::symplectic::rk4(&x, h, 1, field)?;
        let (zn, gap) = continued_eigenvalue(&ip.w, &next, z_ref)?;
        if gap < 10.0 * h * speed.max(1.0) {
            return Err(Error::Continuation(format!("eigenvalue gap {gap:.2e} along the flow")));
        }
        x = next;
        z = zn;
        let t = ip.w.with_coords(&x).t.eval(z);
        worst = worst.max((z - start.z).norm()).max((t - start.t).norm());
    }
    Ok(worst)
}

/// The 2-form induced on the leaf space at an incidence point, as a matrix
/// in the leaf coordinates `(z, T(z))`.
///
/// With `V` in `ker(z - A)` normalised by `dz(V) = 1` and `Y` tangent to the
/// level set of `z` with `d(T(z))(Y) = 1`, the coefficient is `W(V, Y)`.
/// `lift_shift` adds that multiple of a vector in `ker(z - A) ∩ ker(dz)` to
/// `V`; the result must not depend on it.
pub fn recovered_form(ip: &IncidencePoint, w: &CMat, lift_shift: C64) -> Result<CMat> {
    require_simple(ip)?;
    let x = ip.w.coords();
    let kernel = linalg::null_space(&shifted(&ip.w, ip.z)?, RANK_TOL);
    let dl = fd::jacobian_steps(leaf_map(ip), &x, &coordinate_steps(&ip.w)?)?;
    let dz = dl.row(0).into_owned();
    // coefficients c with dz(K c) = 1 (least norm), plus the vertical direction
    let g = &dz * &kernel;
    let gn = g.norm();
    if gn < 1e-6 {
        return Err(Error::LiftFailure);
    }
    let c = g.adjoint().unscale(gn * gn);
    let mut v = &kernel * c;
    if lift_shift != ZERO {
        let vert = linalg::null_space(&CMat::from_row_slice(1, g.len(), g.as_slice()), 1e-10);
        v += &kernel * vert.column(0) * lift_shift;
    }
    // least-norm Y with dL(Y) = (0, 1)
    let gram = (&dl * dl.adjoint()).try_inverse().ok_or(Error::LiftFailure)?;
    let y = dl.adjoint() * (gram * CVec::from_vec(vec![ZERO, ONE]));
    let tau = (v.transpose() * w * y)[(0, 0)];
    let mut out = CMat::zeros(2, 2);
    out[(0, 1)] = tau;
    out[(1, 0)] = -tau;
    Ok(out)
}
