//! The induced symplectic form `Omega` in the roots chart, the coefficient
//! chart and the `ah` model, with Poisson brackets, the compatibility with
//! `A` and Hamiltonian flows.
//!
//! Orientation: `Omega = sum dz_i ^ dt_i` and brackets satisfy
//! `{z_i, t_i} = +1`, so the Poisson tensor is `(W^-1)^T = -W^-1` and the
//! Hamiltonian vector field of `f` is `(W^-1)^T grad f`.

use crate::endo;
use crate::error::{Error, Result};
use crate::fd;
use crate::linalg::{self, standard_symplectic, CMat, CVec, C64, ONE};
use crate::poly::{self, lagrange_interpolate, min_separation};
use crate::scheme::{AhPoint, CoeffChartPoint, SchemePoint, TOL_SEP};
use crate::surfaces::{Chart, SurfaceKind};

/// Smallest `|det W|` accepted as nondegenerate.
pub const TOL_DET: f64 = 1e-10;

/// Smallest accepted `sigma_min / sigma_max` before a form counts as singular.
pub const TOL_COND: f64 = 1e-10;

/// `blockdiag([[0, 1], [-1, 0]], ...)` in `(z_1, t_1, ..., z_d, t_d)`.
pub fn omega_roots(d: usize) -> CMat {
    standard_symplectic(d)
}

/// `(W - W^T) / 2`.
pub fn antisymmetrize(w: &CMat) -> CMat {
    (w - w.transpose()) * C64::new(0.5, 0.0)
}

/// Matrix of `sum c dx_a ^ dx_b` over `(c, a, b)`.
pub fn two_form(n: usize, terms: &[(C64, usize, usize)]) -> CMat {
    let mut w = CMat::zeros(n, n);
    for &(c, a, b) in terms {
        w[(a, b)] += c;
        w[(b, a)] -= c;
    }
    w
}

/// Sorted roots of `q`, refusing confluent points.
fn reference_roots(q: &poly::MonicPoly) -> Result<Vec<C64>> {
    let rs = poly::roots(q)?;
    let sep = min_separation(&rs);
    if sep < TOL_SEP {
        return Err(Error::ConfluentPoint(sep));
    }
    Ok(rs)
}

/// The chart map `(Q, T) -> (z_1, t_1, ..., z_d, t_d)` near `pt`, with root
/// labels continued from `pt`.
pub fn coeff_roots_map(pt: &CoeffChartPoint) -> Result<impl Fn(&[C64]) -> Result<Vec<C64>> + '_> {
    let reference = reference_roots(&pt.q)?;
    Ok(move |x: &[C64]| {
        let pairs = pt.with_coords(x).pairs_near(&reference)?;
        Ok(pairs.into_iter().flat_map(|(z, t)| [z, t]).collect())
    })
}

/// Finite-difference steps for the coefficient chart: `1e-5 (1 + |x_k|)`,
/// shrunk where the points `(z_i, t_i)` move faster in `x_k` than that scale
/// allows (large coefficients at higher degree).
pub fn coordinate_steps(pt: &CoeffChartPoint) -> Result<Vec<f64>> {
    let d = pt.degree();
    let zs = reference_roots(&pt.q)?;
    let dq = pt.q.as_poly().derivative();
    let dt = pt.t.derivative();
    let darboux = pt.kind.linear_fiber_is_darboux();
    let mut out_scale: f64 = 0.0;
    // (|z|, 1/|q'(z)|, |T'(z)|, dt/dT)
    let mut per_root = Vec::with_capacity(zs.len());
    for &z in &zs {
        let value = pt.t.eval(z);
        let (t, fiber) = if darboux { (value, 1.0) } else { (value.ln(), 1.0 / value.norm()) };
        out_scale = out_scale.max(z.norm()).max(t.norm());
        per_root.push((z.norm(), 1.0 / dq.eval(z).norm(), dt.eval(z).norm(), fiber));
    }
    let x = pt.coords();
    Ok((0..2 * d)
        .map(|k| {
            let power = (k % d) as i32;
            let speed = per_root
                .iter()
                .map(|&(r, inv_dq, slope, fiber)| {
                    let rk = r.powi(power);
                    if k < d {
                        rk * inv_dq * (1.0 + slope * fiber)
                    } else {
                        rk * fiber
                    }
                })
                .fold(f64::MIN_POSITIVE, f64::max);
            fd::REL_STEP * (1.0 + x[k].norm()).min((1.0 + out_scale) / speed)
        })
        .collect())
}

/// `Omega` in `(Q_0..Q_{d-1}, T_0..T_{d-1})`: the roots-chart form pulled back
/// through the finite-difference Jacobian of the chart map.
pub fn omega_coeff(pt: &CoeffChartPoint) -> Result<CMat> {
    let map = coeff_roots_map(pt)?;
    let j = fd::jacobian_steps(map, &pt.coords(), &coordinate_steps(pt)?)?;
    Ok(antisymmetrize(&(j.transpose() * omega_roots(pt.degree()) * &j)))
}

/// `Q_1 dT_1^dQ_1 + dT_1^dQ_0 + dT_0^dQ_1` in `(Q_0, Q_1, T_0, T_1)`. This is
/// `-Omega` for the orientation used here; see [`omega_closed_form`].
pub fn reference_form_d2(q1: C64) -> CMat {
    two_form(4, &[(q1, 3, 1), (ONE, 3, 0), (ONE, 2, 1)])
}

/// Closed form of `Omega` in the coefficient chart, valid on the whole chart
/// including the discriminant. Available for `d <= 2` on surfaces whose
/// coefficient chart interpolates a Darboux fiber (`flat`, `xy`).
///
/// For `d = 2`: `Omega = dQ_1^dT_0 + Q_1 dQ_1^dT_1 + dQ_0^dT_1`.
pub fn omega_closed_form(pt: &CoeffChartPoint) -> Result<CMat> {
    if !pt.kind.linear_fiber_is_darboux() {
        return Err(Error::NoClosedForm);
    }
    match pt.degree() {
        1 => Ok(standard_symplectic(1)),
        2 => Ok(-reference_form_d2(pt.q.scheme_coords()[1])),
        _ => Err(Error::NoClosedForm),
    }
}

/// `Omega` at a coefficient-chart point: the closed form where one exists,
/// otherwise the pullback (which needs distinct roots).
pub fn omega_coeff_any(pt: &CoeffChartPoint) -> Result<CMat> {
    match omega_closed_form(pt) {
        Ok(w) => Ok(w),
        Err(Error::NoClosedForm) => match omega_coeff(pt) {
            Err(Error::ConfluentPoint(_)) => Err(Error::NoClosedForm),
            other => other,
        },
        Err(e) => Err(e),
    }
}

/// Poisson tensor `(W^-1)^T`.
pub fn poisson_tensor(w: &CMat) -> Result<CMat> {
    let cond = conditioning(w);
    if cond < TOL_COND {
        return Err(Error::SingularForm(cond));
    }
    let inv = w.clone().try_inverse().ok_or(Error::SingularForm(cond))?;
    Ok(inv.transpose())
}

/// `{f, g} = grad f^T (W^-1)^T grad g` with finite-difference gradients.
pub fn poisson_bracket<F, G>(f: F, g: G, x: &[C64], w: &CMat) -> Result<C64>
where
    F: Fn(&[C64]) -> Result<C64>,
    G: Fn(&[C64]) -> Result<C64>,
{
    let p = poisson_tensor(w)?;
    let gf = fd::gradient(f, x, fd::REL_STEP)?;
    let gg = fd::gradient(g, x, fd::REL_STEP)?;
    Ok((gf.transpose() * p * gg)[(0, 0)])
}

/// Table of `{Q_i, Q_j}` (the Hamiltonians are coordinates, so this is the
/// upper-left block of the Poisson tensor).
pub fn bracket_table(w: &CMat) -> Result<CMat> {
    let d = w.nrows() / 2;
    Ok(poisson_tensor(w)?.view((0, 0), (d, d)).into_owned())
}

/// `|A^T W - W A|_F / (1 + |W|_F)`.
pub fn check_compatibility(a: &CMat, w: &CMat) -> f64 {
    (a.transpose() * w - w * a).norm() / (1.0 + w.norm())
}

/// Largest `|W_ab|` with `a, b` in `idx`.
pub fn isotropy_residual(w: &CMat, idx: &[usize]) -> f64 {
    let mut m: f64 = 0.0;
    for &a in idx {
        for &b in idx {
            m = m.max(w[(a, b)].norm());
        }
    }
    m
}

/// Isotropy of the fibers of `Q` in the coefficient chart (`T` block).
pub fn lagrangian_residual_coeff(w: &CMat) -> f64 {
    let d = w.nrows() / 2;
    isotropy_residual(w, &(d..2 * d).collect::<Vec<_>>())
}

/// Isotropy of the fibers of the base map in the roots chart (`t` entries).
pub fn lagrangian_residual_roots(w: &CMat) -> f64 {
    let d = w.nrows() / 2;
    isotropy_residual(w, &(0..d).map(|i| 2 * i + 1).collect::<Vec<_>>())
}

/// Largest cyclic sum `d_a W_bc + d_b W_ca + d_c W_ab` of a form field.
pub fn closedness_residual<F>(form: F, x: &[C64], rel: f64) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<CMat>,
{
    let jac = fd::jacobian(|y| Ok(form(y)?.iter().copied().collect()), x, rel)?;
    Ok(cyclic_sum(&jac, x.len()))
}

/// Cyclic-sum residual divided by `max(1, max |d_a W_bc|)`.
pub fn relative_closedness<F>(form: F, x: &[C64], rel: f64) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<CMat>,
{
    let jac = fd::jacobian(|y| Ok(form(y)?.iter().copied().collect()), x, rel)?;
    Ok(cyclic_sum(&jac, x.len()) / linalg::max_abs(&jac).max(1.0))
}

fn cyclic_sum(jac: &CMat, n: usize) -> f64 {
    // nalgebra stores column-major: entry (b, c) sits at b + c n
    let dw = |a: usize, b: usize, c: usize| jac[(b + c * n, a)];
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                worst = worst.max((dw(a, b, c) + dw(b, c, a) + dw(c, a, b)).norm());
            }
        }
    }
    worst
}

/// Fixed-step classical Runge-Kutta.
pub fn rk4<F>(x0: &[C64], time: f64, steps: usize, f: F) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let mut x = x0.to_vec();
    if steps == 0 || time == 0.0 {
        return Ok(x);
    }
    let h = time / steps as f64;
    let axpy = |x: &[C64], k: &[C64], s: f64| -> Vec<C64> { x.iter().zip(k).map(|(a, b)| a + b * s).collect() };
    for _ in 0..steps {
        let k1 = f(&x)?;
        let k2 = f(&axpy(&x, &k1, h / 2.0))?;
        let k3 = f(&axpy(&x, &k2, h / 2.0))?;
        let k4 = f(&axpy(&x, &k3, h))?;
        for i in 0..x.len() {
            x[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    Ok(x)
}

/// A Hamiltonian on the coefficient chart.
#[derive(Copy, Clone, Debug)]
pub enum Hamiltonian {
    /// The coordinate `Q_j`.
    Q(usize),
    /// Any holomorphic function of the coordinates (gradient by finite differences).
    Function(fn(&[C64]) -> C64),
}

impl Hamiltonian {
    pub fn eval(&self, x: &[C64]) -> C64 {
        match self {
            Hamiltonian::Q(j) => x[*j],
            Hamiltonian::Function(f) => f(x),
        }
    }

    pub fn gradient(&self, x: &[C64]) -> Result<CVec> {
        match self {
            Hamiltonian::Q(j) => {
                let mut g = CVec::zeros(x.len());
                g[*j] = ONE;
                Ok(g)
            }
            Hamiltonian::Function(f) => fd::gradient(|y| Ok(f(y)), x, fd::REL_STEP),
        }
    }
}

fn flow_error(e: Error) -> Error {
    match e {
        Error::ConfluentPoint(s) => Error::FlowCrossedDiscriminant(format!("root separation {s:.2e}")),
        Error::SingularForm(c) => Error::FlowCrossedDiscriminant(format!("W conditioning {c:.2e}")),
        Error::NoClosedForm => Error::FlowCrossedDiscriminant("confluent roots".into()),
        other => other,
    }
}

/// Hamiltonian vector field of `ham` at coordinates `x`.
pub fn hamiltonian_velocity(template: &CoeffChartPoint, ham: Hamiltonian, x: &[C64]) -> Result<Vec<C64>> {
    let pt = template.with_coords(x);
    let w = omega_coeff_any(&pt).map_err(flow_error)?;
    let p = poisson_tensor(&w).map_err(flow_error)?;
    Ok((p * ham.gradient(x)?).iter().copied().collect())
}

/// Time-`time` flow of `ham` with `steps` classical Runge-Kutta steps.
pub fn hamiltonian_flow(pt: &CoeffChartPoint, ham: Hamiltonian, time: f64, steps: usize) -> Result<CoeffChartPoint> {
    let x = rk4(&pt.coords(), time, steps, |y| hamiltonian_velocity(pt, ham, y))?;
    Ok(pt.with_coords(&x))
}

/// Coefficient-chart transition on `xy` between the lifts of `u1` and `u2`:
/// roots are kept and the fibers change by `chi2 = chi1 + log z`.
pub fn xy_coeff_transition(pt: &CoeffChartPoint, target: Chart, reference: &[C64]) -> Result<CoeffChartPoint> {
    if pt.kind != SurfaceKind::Xy {
        return Err(Error::WrongChart { kind: pt.kind.to_string(), chart: target.to_string() });
    }
    SurfaceKind::Xy.check_chart(target)?;
    if target == pt.surface_chart {
        return Ok(pt.clone());
    }
    let pairs = pt.pairs_near(reference)?;
    let sign = if target == Chart::U2 { 1.0 } else { -1.0 };
    let zs: Vec<C64> = pairs.iter().map(|p| p.0).collect();
    let fibers: Vec<C64> = pairs.iter().map(|&(z, chi)| chi + z.ln() * sign).collect();
    let t = lagrange_interpolate(&zs, &fibers)?;
    CoeffChartPoint::new(SurfaceKind::Xy, target, pt.q.clone(), t)
}

/// `max |J^T W_2 J - W_1|` for the `xy` coefficient-chart transition `J`
/// from the point's chart to the other one.
pub fn xy_naturality_residual(pt: &CoeffChartPoint) -> Result<f64> {
    let reference = reference_roots(&pt.q)?;
    let target = if pt.surface_chart == Chart::U2 { Chart::U1 } else { Chart::U2 };
    let other = xy_coeff_transition(pt, target, &reference)?;
    let phi = |x: &[C64]| Ok(xy_coeff_transition(&pt.with_coords(x), target, &reference)?.coords());
    let j = fd::jacobian(phi, &pt.coords(), fd::REL_STEP)?;
    let w1 = omega_coeff(pt)?;
    let w2 = omega_coeff(&other)?;
    Ok(linalg::max_abs(&(j.transpose() * w2 * &j - w1)))
}

/// The `ah` chart map `(p, Q) -> (z_1, t_1, ..., z_d, t_d)` near `pt`.
pub fn ah_roots_map(pt: &AhPoint) -> Result<impl Fn(&[C64]) -> Result<Vec<C64>>> {
    let reference = reference_roots(&pt.q)?;
    let d = pt.degree();
    Ok(move |x: &[C64]| {
        let pairs = AhPoint::from_coords(d, x).pairs_near(&reference)?;
        Ok(pairs.into_iter().flat_map(|(z, t)| [z, t]).collect())
    })
}

/// `Omega` on the `ah` tangent space in the basis `basis` (columns in ambient
/// coordinates): `(dF E)^T W_roots (dF E)`.
pub fn ah_omega(pt: &AhPoint, basis: &CMat) -> Result<CMat> {
    let map = ah_roots_map(pt)?;
    let x = pt.coords();
    let h = fd::REL_STEP * (1.0 + x.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let n = basis.ncols();
    let mut jf = CMat::zeros(2 * pt.degree(), n);
    for k in 0..n {
        let v: Vec<C64> = basis.column(k).iter().copied().collect();
        let col = fd::directional(&map, &x, &v, h)?;
        for (i, c) in col.into_iter().enumerate() {
            jf[(i, k)] = c;
        }
    }
    Ok(antisymmetrize(&(jf.transpose() * omega_roots(pt.degree()) * &jf)))
}

/// Hamiltonian vector field of `Q_j` on the `ah` model, in ambient coordinates.
pub fn ah_velocity(d: usize, j: usize, x: &[C64]) -> Result<Vec<C64>> {
    let pt = AhPoint::from_coords(d, x);
    let e = endo::ah_tangent_basis(&pt)?;
    let w = ah_omega(&pt, &e).map_err(flow_error)?;
    let p = poisson_tensor(&w).map_err(flow_error)?;
    let grad: CVec = e.row(2 * d + j).transpose();
    Ok((&e * (p * grad)).iter().copied().collect())
}

/// Time-`time` flow of `Q_j` on the `ah` model.
pub fn ah_flow(pt: &AhPoint, j: usize, time: f64, steps: usize) -> Result<AhPoint> {
    let d = pt.degree();
    let x = rk4(&pt.coords(), time, steps, |y| ah_velocity(d, j, y))?;
    Ok(AhPoint::from_coords(d, &x))
}

/// `{Q_i, Q_j}` on the `ah` model, from the form `w` in the tangent basis `basis`.
pub fn ah_bracket_table(w: &CMat, basis: &CMat) -> Result<CMat> {
    let d = basis.ncols() / 2;
    let dq = basis.rows(2 * d, d).into_owned();
    Ok(&dq * poisson_tensor(w)? * dq.transpose())
}

/// `Omega` at a point in the chart (or tangent basis) the point is given in.
pub fn omega_at(pt: &SchemePoint) -> Result<CMat> {
    match pt {
        SchemePoint::Roots(r) => Ok(omega_roots(r.degree())),
        SchemePoint::Coeff(c) => omega_coeff_any(c),
        SchemePoint::Ah(a) => ah_omega(a, &endo::ah_tangent_basis(a)?),
    }
}

/// `{Q_i, Q_j}` at any point; roots-chart points are read in the coefficient chart.
pub fn q_bracket_table(pt: &SchemePoint) -> Result<CMat> {
    match pt {
        SchemePoint::Ah(a) => {
            let basis = endo::ah_tangent_basis(a)?;
            ah_bracket_table(&ah_omega(a, &basis)?, &basis)
        }
        other => bracket_table(&omega_coeff_any(&other.to_coeff()?)?),
    }
}

/// Time-`time` flow of `Q_j` from any point; roots-chart points flow in the
/// coefficient chart.
pub fn q_flow(pt: &SchemePoint, j: usize, time: f64, steps: usize) -> Result<SchemePoint> {
    let d = pt.degree();
    if j >= d {
        return Err(Error::InvalidPoint(format!("no Hamiltonian Q_{j} in degree {d}")));
    }
    match pt {
        SchemePoint::Ah(a) => Ok(SchemePoint::Ah(ah_flow(a, j, time, steps)?)),
        other => Ok(SchemePoint::Coeff(hamiltonian_flow(&other.to_coeff()?, Hamiltonian::Q(j), time, steps)?)),
    }
}

/// Isotropy of `ker dQ` on the `ah` model: `max |W(u, v)|` over an
/// orthonormal basis of tangent vectors with vanishing `Q` component.
pub fn ah_lagrangian_residual(w: &CMat, basis: &CMat) -> f64 {
    let d = basis.ncols() / 2;
    let k = linalg::null_space(&basis.rows(2 * d, d).into_owned(), 1e-10);
    linalg::max_abs(&(k.transpose() * w * k))
}

/// `sigma_min / sigma_max`, a basis-scale-free nondegeneracy measure.
pub fn conditioning(w: &CMat) -> f64 {
    let s = linalg::singular_values(w);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Determinant magnitude, for nondegeneracy reports.
pub fn det_norm(w: &CMat) -> f64 {
    w.determinant().norm()
}

/// `max_i |x_i - y_i|`.
pub fn max_distance(x: &[C64], y: &[C64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endo::{build_endo, coeff_endo};
    use crate::linalg::ZERO;
    use crate::poly::{companion, MonicPoly, Poly};
    use crate::scheme::{random_scheme_point, SampleMode, SchemePoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generic_coeff(kind: SurfaceKind, d: usize, seed: u64) -> CoeffChartPoint {
        let pt = random_scheme_point(kind, d, &mut ChaCha8Rng::seed_from_u64(seed), SampleMode::Generic).unwrap();
        pt.to_coeff().unwrap()
    }

    /// Independent oracle for the linear-fiber surfaces: `Omega = sum dP_k ^ dT_k`
    /// with `P_k = tr(C^{k+1}) / (k+1)`, power sums of the roots read off the
    /// companion matrix.
    fn power_sum_form(pt: &CoeffChartPoint) -> CMat {
        let d = pt.degree();
        let psum = |x: &[C64]| -> Result<Vec<C64>> {
            let c = companion(&MonicPoly::from_scheme_coords(&x[..d]))?;
            let mut pw = CMat::identity(d, d);
            Ok((0..d)
                .map(|k| {
                    pw = &pw * &c;
                    pw.trace() / (k + 1) as f64
                })
                .collect())
        };
        let x = pt.coords();
        let b = fd::jacobian(psum, &x[..d], fd::REL_STEP).unwrap();
        let mut terms = Vec::new();
        for k in 0..d {
            for j in 0..d {
                terms.push((b[(k, j)], j, d + k));
            }
        }
        two_form(2 * d, &terms)
    }

    #[test]
    fn roots_form_is_standard() {
        let w = omega_roots(2);
        assert_eq!(w[(0, 1)], ONE);
        assert_eq!(w[(2, 3)], ONE);
        assert_eq!(w[(0, 2)], ZERO);
        for d in 1..=4 {
            assert!((omega_roots(d).determinant() - ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn pullback_matches_power_sum_oracle() {
        for d in 1..=6 {
            for seed in 0..10 {
                for kind in [SurfaceKind::Flat, SurfaceKind::Xy] {
                    let pt = generic_coeff(kind, d, seed);
                    let w = omega_coeff(&pt).unwrap();
                    let oracle = power_sum_form(&pt);
                    let err = linalg::max_abs(&(&w - &oracle)) / (1.0 + linalg::max_abs(&oracle));
                    assert!(err < 1e-6, "d={d} seed={seed} {kind} err={err:e}");
                }
            }
        }
    }

    #[test]
    fn d2_pullback_is_minus_reference_form() {
        for seed in 0..20 {
            let pt = generic_coeff(SurfaceKind::Flat, 2, seed);
            let w = omega_coeff(&pt).unwrap();
            let q1 = pt.q.scheme_coords()[1];
            assert!(linalg::max_abs(&(&w + reference_form_d2(q1))) < 1e-8);
            assert!(linalg::max_abs(&(&w - omega_closed_form(&pt).unwrap())) < 1e-8);
        }
    }

    #[test]
    fn single_point_form_and_bracket() {
        let pt = generic_coeff(SurfaceKind::Flat, 1, 3);
        let w = omega_coeff(&pt).unwrap();
        assert!(linalg::max_abs(&(&w - standard_symplectic(1))) < 1e-10);
        let x = pt.coords();
        let b = poisson_bracket(|y| Ok(y[0]), |y| Ok(y[1]), &x, &w).unwrap();
        assert!((b - ONE).norm() < 1e-9);
        let ff = poisson_bracket(|y| Ok(y[0] * y[1]), |y| Ok(y[0] * y[1]), &x, &w).unwrap();
        assert!(ff.norm() < 1e-9);
    }

    #[test]
    fn closed_form_on_double_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let SchemePoint::Coeff(pt) = random_scheme_point(SurfaceKind::Flat, 2, &mut rng, SampleMode::OneDouble).unwrap() else {
                panic!()
            };
            assert!(omega_coeff(&pt).is_err());
            let w = omega_closed_form(&pt).unwrap();
            assert_eq!(w, -w.transpose());
            assert!(det_norm(&w) > TOL_DET);
            let form = |x: &[C64]| omega_closed_form(&pt.with_coords(x));
            assert!(closedness_residual(form, &pt.coords(), fd::REL_STEP).unwrap() < 1e-6);
        }
        let pt = generic_coeff(SurfaceKind::Flat, 3, 1);
        assert_eq!(omega_closed_form(&pt), Err(Error::NoClosedForm));
    }

    #[test]
    fn pullback_is_closed() {
        for kind in [SurfaceKind::Flat, SurfaceKind::Cstar] {
            let pt = generic_coeff(kind, 3, 4);
            let form = |x: &[C64]| omega_coeff(&pt.with_coords(x));
            // nested differences: a coarser outer step balances truncation and rounding
            let r = closedness_residual(form, &pt.coords(), 1e-3).unwrap();
            assert!(r < 1e-4, "{kind} {r:e}");
        }
    }

    #[test]
    fn hamiltonians_commute_and_fibers_are_lagrangian() {
        for kind in [SurfaceKind::Flat, SurfaceKind::Cstar, SurfaceKind::Xy] {
            for d in 1..=5 {
                let pt = generic_coeff(kind, d, 11);
                let w = omega_coeff(&pt).unwrap();
                assert!(lagrangian_residual_coeff(&w) < 1e-8);
                assert!(linalg::max_abs(&bracket_table(&w).unwrap()) < 1e-6);
                let a = build_endo(&SchemePoint::Coeff(pt.clone())).unwrap();
                assert!(check_compatibility(&a.m, &w) < 1e-6, "{kind} d={d}");
            }
        }
    }

    #[test]
    fn compatibility_control_fails() {
        let pt = generic_coeff(SurfaceKind::Flat, 2, 5);
        let w = omega_coeff(&pt).unwrap();
        let mut q = pt.q.scheme_coords();
        q[0] += ONE;
        let c1 = companion(&MonicPoly::from_scheme_coords(&q)).unwrap();
        let c0 = companion(&pt.q).unwrap();
        let bad = linalg::block_diag(&[&c1, &c0]);
        assert!(check_compatibility(&bad, &w) > 1e-2);
        assert!(check_compatibility(&coeff_endo(&pt.q).unwrap().m, &w) < 1e-8);
    }

    #[test]
    fn flows_conserve_and_commute() {
        for kind in [SurfaceKind::Flat, SurfaceKind::Cstar] {
            let pt = generic_coeff(kind, 2, 6);
            assert_eq!(hamiltonian_flow(&pt, Hamiltonian::Q(0), 0.0, 10).unwrap(), pt);
            let end = hamiltonian_flow(&pt, Hamiltonian::Q(0), 0.1, 100).unwrap();
            let (x0, x1) = (pt.coords(), end.coords());
            assert!((x0[0] - x1[0]).norm() < 1e-8);
            assert!((x0[1] - x1[1]).norm() < 1e-6);
            assert!(max_distance(&x0[2..], &x1[2..]) > 1e-3);
            let a = hamiltonian_flow(&hamiltonian_flow(&pt, Hamiltonian::Q(1), 0.05, 50).unwrap(), Hamiltonian::Q(0), 0.05, 50).unwrap();
            let b = hamiltonian_flow(&hamiltonian_flow(&pt, Hamiltonian::Q(0), 0.05, 50).unwrap(), Hamiltonian::Q(1), 0.05, 50).unwrap();
            assert!(max_distance(&a.coords(), &b.coords()) < 1e-6);
        }
    }

    #[test]
    fn general_hamiltonian_is_conserved() {
        let pt = generic_coeff(SurfaceKind::Flat, 2, 8);
        fn energy(x: &[C64]) -> C64 {
            x[0] * x[2] + x[1] * x[3] * x[3]
        }
        let end = hamiltonian_flow(&pt, Hamiltonian::Function(energy), 0.1, 100).unwrap();
        assert!((energy(&end.coords()) - energy(&pt.coords())).norm() < 1e-8);
    }

    #[test]
    fn xy_chart_lifts_agree() {
        for d in 1..=3 {
            for seed in 0..5 {
                let pt = generic_coeff(SurfaceKind::Xy, d, seed);
                assert!(xy_naturality_residual(&pt).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn ah_form_and_flows() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in 1..=3 {
            let SchemePoint::Ah(a) = random_scheme_point(SurfaceKind::Ah, d, &mut rng, SampleMode::Generic).unwrap() else { panic!() };
            let t = endo::ah_tangent(&a).unwrap();
            let w = ah_omega(&a, &t.basis).unwrap();
            assert!(det_norm(&w) > TOL_DET);
            assert!(check_compatibility(&t.reduced, &w) < 1e-6);
            let end = ah_flow(&a, 0, 0.1, 20).unwrap();
            assert!(end.unit_residual().unwrap() < 1e-6);
            assert!((end.q.as_poly() - a.q.as_poly()).norm_inf() < 1e-8);
            assert!((&end.p - &a.p).norm_inf() > 1e-4);
        }
    }

    #[test]
    fn singular_forms_are_refused() {
        assert!(matches!(poisson_tensor(&CMat::zeros(2, 2)), Err(Error::SingularForm(_))));
        let pt = CoeffChartPoint::new(SurfaceKind::Cstar, Chart::Main, poly::from_roots(&[ONE, ONE]), Poly::constant(ONE)).unwrap();
        assert!(matches!(hamiltonian_flow(&pt, Hamiltonian::Q(0), 0.1, 1), Err(Error::FlowCrossedDiscriminant(_))));
    }
}
