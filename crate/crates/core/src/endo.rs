//! The tangent endomorphism `A` (multiplication by the base coordinate) and
//! its spectral structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, CMat, C64, ONE};
use crate::poly::{self, companion, div_rem, from_roots, mult_matrix, reduce_mod, MonicPoly, Poly};
use crate::scheme::{AhPoint, SchemePoint};

/// Which tangent basis an [`EndoMatrix`] is written in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisTag {
    /// `(dQ_0..dQ_{d-1}, dT_0..dT_{d-1})`.
    Coefficient,
    /// `(dz_1, dt_1, ..., dz_d, dt_d)`.
    Roots,
    /// Columns of the `ah` tangent basis.
    AhConstrained,
    /// Plain coordinates of `C^{2d}`.
    Standard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EndoMatrix {
    pub m: CMat,
    pub basis: BasisTag,
}

impl EndoMatrix {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
}

/// Matrix of `A` at a point in the chart the point is given in.
pub fn build_endo(pt: &SchemePoint) -> Result<EndoMatrix> {
    match pt {
        SchemePoint::Roots(r) => {
            let diag: Vec<C64> = r.pairs.iter().flat_map(|&(z, _)| [z, z]).collect();
            Ok(EndoMatrix { m: CMat::from_diagonal(&diag.into()), basis: BasisTag::Roots })
        }
        SchemePoint::Coeff(c) => Ok(coeff_endo(&c.q)?),
        SchemePoint::Ah(a) => Ok(EndoMatrix { m: ah_tangent(a)?.reduced, basis: BasisTag::AhConstrained }),
    }
}

/// `blockdiag(C_q, C_q)`.
pub fn coeff_endo(q: &MonicPoly) -> Result<EndoMatrix> {
    let c = companion(q)?;
    Ok(EndoMatrix { m: block_diag(&[&c, &c]), basis: BasisTag::Coefficient })
}

/// Tangent data of an `ah` point in ambient coordinates `(dp_0..dp_{2d-1}, dQ_0..dQ_{d-1})`.
#[derive(Clone, Debug)]
pub struct AhTangent {
    /// Linearised constraint, `2d x 3d`.
    pub system: CMat,
    /// Orthonormal basis of the tangent space, `3d x 2d`.
    pub basis: CMat,
    /// Multiplication by `u^2` (resp. `z`) on ambient tangent vectors.
    pub ambient_mult: CMat,
    /// `A` in the tangent basis.
    pub reduced: CMat,
}

impl AhTangent {
    /// `|M E - E A_E|_F / (1 + |M|_F)`: distance of `M E` from the span of `E`.
    pub fn invariance_residual(&self) -> f64 {
        let lhs = &self.ambient_mult * &self.basis;
        (&lhs - &self.basis * &self.reduced).norm() / (1.0 + self.ambient_mult.norm())
    }
}

/// Rank threshold for the `ah` tangent system.
pub const AH_RANK_TOL: f64 = 1e-8;

/// Linearisation of `p(u) p(-u) = 1 mod q(u^2)`.
///
/// Writing `p(u) p(-u) - 1 = h(u) q(u^2)`, a tangent vector `(dp, dq)` must
/// satisfy `dp(u) p(-u) + p(u) dp(-u) - h(u) dq(u^2) = 0 mod q(u^2)`, where
/// `dq = -sum dQ_j z^j`. Rows are the `2d` residue coefficients.
pub fn ah_tangent_system(pt: &AhPoint) -> Result<CMat> {
    let d = pt.degree();
    let n = 2 * d;
    let qe = pt.q_even();
    let pr = pt.p.reflect();
    let unit = &(&pt.p * &pr) - &Poly::constant(ONE);
    let (h, _) = div_rem(&unit, &qe)?;
    let mut sys = CMat::zeros(n, 3 * d);
    for k in 0..n {
        let mono = Poly::monomial(k, ONE);
        let lin = &(&mono * &pr) + &(&pt.p * &mono.reflect());
        let col = reduce_mod(&lin, &qe)?.rep().padded(n);
        for (i, v) in col.into_iter().enumerate() {
            sys[(i, k)] = v;
        }
    }
    for j in 0..d {
        let col = reduce_mod(&(&h * &Poly::monomial(2 * j, ONE)), &qe)?.rep().padded(n);
        for (i, v) in col.into_iter().enumerate() {
            sys[(i, n + j)] = v;
        }
    }
    Ok(sys)
}

/// Tangent basis and the restricted endomorphism at an `ah` point.
pub fn ah_tangent(pt: &AhPoint) -> Result<AhTangent> {
    let d = pt.degree();
    let system = ah_tangent_system(pt)?;
    let basis = linalg::null_space(&system, AH_RANK_TOL);
    if basis.ncols() != 2 * d {
        return Err(Error::TangentDimension { expected: 2 * d, computed: basis.ncols() });
    }
    let qe = pt.q_even();
    let u2 = reduce_mod(&Poly::monomial(2, ONE), &qe)?;
    let ambient_mult = block_diag(&[&mult_matrix(&u2), &companion(&pt.q)?]);
    let reduced = basis.adjoint() * &ambient_mult * &basis;
    Ok(AhTangent { system, basis, ambient_mult, reduced })
}

/// Orthonormal basis of the `ah` tangent space (`3d x 2d`).
pub fn ah_tangent_basis(pt: &AhPoint) -> Result<CMat> {
    Ok(ah_tangent(pt)?.basis)
}

/// Tolerances of [`spectral_analysis`].
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTol {
    /// Clustering radius relative to `max(1, max |lambda|, |M|_F)`.
    pub cluster: f64,
    /// Singular-value threshold relative to the largest.
    pub rank: f64,
}

impl Default for SpectralTol {
    fn default() -> Self {
        SpectralTol { cluster: 1e-6, rank: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenCluster {
    pub value: C64,
    pub algebraic: usize,
    pub geometric: usize,
    /// Jordan block sizes, largest first.
    pub blocks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<C64>,
    pub clusters: Vec<EigenCluster>,
    pub char_poly: MonicPoly,
    pub min_poly: MonicPoly,
}

fn cluster_values(vals: &[C64], radius: f64) -> Vec<Vec<C64>> {
    // single linkage via union-find
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (vals[i] - vals[j]).norm() <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<C64>)> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(v),
            None => groups.push((r, vec![v])),
        }
    }
    groups.into_iter().map(|g| g.1).collect()
}

/// Eigenvalue clusters with algebraic and geometric multiplicities, Jordan
/// block sizes from the rank sequence of `(M - lambda)^k`, and the
/// characteristic and minimal polynomials.
pub fn spectral_analysis(m: &CMat, tol: &SpectralTol) -> Result<SpectralReport> {
    let n = m.nrows();
    let mut eigenvalues = linalg::eigenvalues(m)?;
    poly::sort_lex(&mut eigenvalues);
    let scale = eigenvalues.iter().map(|v| v.norm()).fold(1.0, f64::max);
    // a perturbed Jordan block splits by about sqrt(eps |M|), so the radius follows |M|
    let groups = cluster_values(&eigenvalues, tol.cluster * scale.max(m.norm()));
    let mut clusters = Vec::with_capacity(groups.len());
    for g in groups {
        let value = g.iter().sum::<C64>() / g.len() as f64;
        let alg = g.len();
        let shifted = m - CMat::identity(n, n) * value;
        // ranks[k] = rank((M - lambda)^k)
        let mut ranks = vec![n];
        let mut power = CMat::identity(n, n);
        for k in 1..=alg {
            power = &power * &shifted;
            ranks.push(linalg::numerical_rank(&power, tol.rank, scale.powi(k as i32)));
            // stop once the generalized eigenspace is exhausted
            if ranks[k] == ranks[k - 1] || n - ranks[k] >= alg {
                break;
            }
        }
        let geometric = n - ranks[1];
        // at_least[k] = number of blocks of size >= k
        let at_least: Vec<usize> = (1..ranks.len()).map(|k| ranks[k - 1] - ranks[k]).collect();
        let mut blocks = Vec::new();
        for k in (1..=at_least.len()).rev() {
            let exact = at_least[k - 1] - at_least.get(k).copied().unwrap_or(0);
            blocks.extend(std::iter::repeat_n(k, exact));
        }
        clusters.push(EigenCluster { value, algebraic: alg, geometric, blocks });
    }
    let mut char_roots = Vec::new();
    let mut min_roots = Vec::new();
    for c in &clusters {
        char_roots.extend(std::iter::repeat_n(c.value, c.algebraic));
        min_roots.extend(std::iter::repeat_n(c.value, c.blocks.first().copied().unwrap_or(0)));
    }
    Ok(SpectralReport { eigenvalues, clusters, char_poly: from_roots(&char_roots), min_poly: from_roots(&min_roots) })
}

/// Result of [`check_square_property`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareCheck {
    /// `max |char - min^2| / max(1, max |char|)` over coefficients.
    pub residual: f64,
    pub passed: bool,
    /// Clusters whose eigenspace is not 2-dimensional: `(eigenvalue, geometric multiplicity)`.
    pub bad_clusters: Vec<(C64, usize)>,
}

/// `char(A) = min(A)^2` with every eigenspace of dimension 2.
pub fn check_square_property(report: &SpectralReport, tol: f64) -> SquareCheck {
    let sq = report.min_poly.as_poly() * report.min_poly.as_poly();
    let len = (sq.coeffs().len()).max(report.char_poly.coeffs().len());
    let a = report.char_poly.padded(len);
    let b = sq.padded(len);
    let scale = a.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let residual = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
    let bad_clusters: Vec<(C64, usize)> =
        report.clusters.iter().filter(|c| c.geometric != 2).map(|c| (c.value, c.geometric)).collect();
    SquareCheck { residual, passed: residual < tol && bad_clusters.is_empty(), bad_clusters }
}

/// `diag(z_1, z_1, ..., z_d, z_d)` on `C^{2d}`: an endomorphism with the right
/// spectrum for distinct `z_i` that cannot come from a scheme point once two
/// of them coincide.
pub fn negative_diag_example(zvals: &[C64]) -> Result<EndoMatrix> {
    if zvals.len() < 2 {
        return Err(Error::InvalidPoint("the diagonal example needs d >= 2".into()));
    }
    let diag: Vec<C64> = zvals.iter().flat_map(|&z| [z, z]).collect();
    Ok(EndoMatrix { m: CMat::from_diagonal(&diag.into()), basis: BasisTag::Standard })
}

/// Sorted eigenvalues of `A`, for comparisons between charts.
pub fn spectrum(e: &EndoMatrix) -> Result<Vec<C64>> {
    let mut v = linalg::eigenvalues(&e.m)?;
    poly::sort_lex(&mut v);
    Ok(v)
}

/// Largest distance between two multisets after nearest matching.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let m = poly::match_to_reference(a, b);
    m.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Roots of `q`, each listed twice.
pub fn doubled_roots(q: &MonicPoly) -> Result<Vec<C64>> {
    Ok(poly::roots(q)?.into_iter().flat_map(|r| [r, r]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::scheme::{random_scheme_point, SampleMode};
    use crate::surfaces::SurfaceKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn quadratic_coefficient_block() {
        let (q0, q1) = (c(0.3, -1.0), c(2.0, 0.5));
        let e = coeff_endo(&MonicPoly::from_scheme_coords(&[q0, q1])).unwrap();
        let blk = CMat::from_row_slice(2, 2, &[ZERO, q0, ONE, q1]);
        assert_eq!(e.m.view((0, 0), (2, 2)), blk);
        assert_eq!(e.m.view((2, 2), (2, 2)), blk);
        assert!(e.m.view((0, 2), (2, 2)).iter().all(|v| *v == ZERO));
    }

    #[test]
    fn single_flat_point_is_scalar() {
        let pt = random_scheme_point(SurfaceKind::Flat, 1, &mut ChaCha8Rng::seed_from_u64(1), SampleMode::Generic).unwrap();
        let e = build_endo(&pt).unwrap();
        let z = pt.to_roots().unwrap().pairs[0].0;
        assert_eq!(e.m, CMat::identity(2, 2) * z);
        let rep = spectral_analysis(&e.m, &SpectralTol::default()).unwrap();
        assert!(check_square_property(&rep, 1e-8).passed);
    }

    #[test]
    fn scaled_identity_spectrum() {
        let cst = c(2.0, -1.0);
        let rep = spectral_analysis(&(CMat::identity(2, 2) * cst), &SpectralTol::default()).unwrap();
        assert_eq!(rep.min_poly.coeffs(), &[-cst, ONE]);
        assert_eq!(rep.char_poly.coeffs(), &[cst * cst, -cst * 2.0, ONE]);
        assert_eq!(rep.clusters[0].blocks, vec![1, 1]);
    }

    #[test]
    fn double_pole_gives_two_jordan_blocks() {
        let beta = c(0.7, -0.4);
        let q = MonicPoly::from_scheme_coords(&[-beta * beta, beta * 2.0]);
        let rep = spectral_analysis(&coeff_endo(&q).unwrap().m, &SpectralTol::default()).unwrap();
        assert_eq!(rep.clusters.len(), 1);
        let cl = &rep.clusters[0];
        assert_eq!((cl.algebraic, cl.geometric), (4, 2));
        assert_eq!(cl.blocks, vec![2, 2]);
        assert!((cl.value - beta).norm() < 1e-6);
        assert!(check_square_property(&rep, 1e-8).passed);
    }

    #[test]
    fn negative_examples() {
        let tol = SpectralTol::default();
        let ok = negative_diag_example(&[c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert!(check_square_property(&spectral_analysis(&ok.m, &tol).unwrap(), 1e-8).passed);
        let bad = negative_diag_example(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let chk = check_square_property(&spectral_analysis(&bad.m, &tol).unwrap(), 1e-8);
        assert!(!chk.passed);
        assert_eq!(chk.bad_clusters, vec![(c(1.0, 0.0), 4)]);
        let three = negative_diag_example(&[c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let chk = check_square_property(&spectral_analysis(&three.m, &tol).unwrap(), 1e-8);
        assert_eq!(chk.bad_clusters, vec![(c(1.0, 0.0), 4)]);
        assert!(negative_diag_example(&[ONE]).is_err());
    }

    #[test]
    fn charts_give_similar_endomorphisms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 1..=6 {
            let pt = random_scheme_point(SurfaceKind::Flat, d, &mut rng, SampleMode::Generic).unwrap();
            let a_roots = spectrum(&build_endo(&pt).unwrap()).unwrap();
            let cp = SchemePoint::Coeff(pt.to_coeff().unwrap());
            let a_coeff = spectrum(&build_endo(&cp).unwrap()).unwrap();
            assert!(multiset_distance(&a_roots, &a_coeff) < 1e-8);
        }
    }

    #[test]
    fn ah_single_point_tangent_by_hand() {
        // d = 1, q = z - z0, p = p0 + p1 u. Residues mod u^2 - z0 of
        // dp(u)p(-u) + p(u)dp(-u) - h dq(u^2); the constraint is
        // p0^2 - z0 p1^2 = 1, so the tangent space is {2 p0 dp0 - 2 z0 p1 dp1 - p1^2 dz0 = 0}.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let SchemePoint::Ah(a) = random_scheme_point(SurfaceKind::Ah, 1, &mut rng, SampleMode::Generic).unwrap() else { panic!() };
        let (p0, p1, z0) = (a.p.coeff(0), a.p.coeff(1), a.q.scheme_coords()[0]);
        let e = ah_tangent_basis(&a).unwrap();
        assert_eq!(e.ncols(), 2);
        let normal = [p0 * 2.0, -z0 * p1 * 2.0, -p1 * p1];
        for j in 0..2 {
            let dot: C64 = (0..3).map(|i| normal[i] * e[(i, j)]).sum();
            assert!(dot.norm() < 1e-12);
        }
    }

    #[test]
    fn ah_tangent_dimension_and_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in 1..=4 {
            for mode in [SampleMode::Generic, SampleMode::OneDouble] {
                if d == 1 && mode == SampleMode::OneDouble {
                    continue;
                }
                let SchemePoint::Ah(a) = random_scheme_point(SurfaceKind::Ah, d, &mut rng, mode).unwrap() else { panic!() };
                let t = ah_tangent(&a).unwrap();
                assert_eq!(t.basis.ncols(), 2 * d);
                assert!(t.invariance_residual() < 1e-8, "{}", t.invariance_residual());
                assert!((&t.system * &t.basis).norm() < 1e-10);
                let rep = spectral_analysis(&t.reduced, &SpectralTol::default()).unwrap();
                assert!(check_square_property(&rep, 1e-8).passed, "d={d} {mode:?} {rep:?}");
                let expected = doubled_roots(&a.q).unwrap();
                assert!(multiset_distance(&rep.eigenvalues, &expected) < 1e-6);
            }
        }
    }

    #[test]
    fn off_null_space_perturbation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let SchemePoint::Ah(a) = random_scheme_point(SurfaceKind::Ah, 3, &mut rng, SampleMode::Generic).unwrap() else { panic!() };
        let t = ah_tangent(&a).unwrap();
        let v = t.basis.column(0).into_owned();
        let mut w = v.clone();
        for eps in [1e-6, 1e-4, 1e-2] {
            w[0] = v[0] + eps;
            let r = (&t.system * &w).norm();
            let expected = t.system.column(0).norm() * eps;
            assert!((r / expected - 1.0).abs() < 1e-3);
        }
    }
}
