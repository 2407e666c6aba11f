//! Complex univariate polynomials and arithmetic in the quotient ring `C[z]/(q)`.
//!
//! Coefficients are stored lowest degree first. The zero polynomial has an
//! empty coefficient vector and degree `-1`.

use std::fmt;
use std::ops::{Add, Deref, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

/// Dense polynomial with complex coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<C64>", into = "Vec<C64>")]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl From<Vec<C64>> for Poly {
    fn from(v: Vec<C64>) -> Self {
        Poly::new(v)
    }
}

impl From<Poly> for Vec<C64> {
    fn from(p: Poly) -> Self {
        p.coeffs
    }
}

impl Poly {
    /// Builds a polynomial, trimming exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Poly::new(vec![c])
    }

    /// `c * z^k`
    pub fn monomial(k: usize, c: C64) -> Self {
        let mut v = vec![ZERO; k + 1];
        v[k] = c;
        Poly::new(v)
    }

    pub fn degree(&self) -> isize {
        self.coeffs.len() as isize - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `z^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    /// Coefficients padded with zeros to exactly `len` entries (truncating is an error).
    pub fn padded(&self, len: usize) -> Vec<C64> {
        assert!(self.coeffs.len() <= len, "polynomial of degree {} does not fit in {len} coefficients", self.degree());
        let mut v = self.coeffs.clone();
        v.resize(len, ZERO);
        v
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Max-norm of the coefficient vector.
    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `p(-u)`
    pub fn reflect(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
        )
    }

    /// `p(u^2)`
    pub fn compose_square(&self) -> Poly {
        let mut v = vec![ZERO; 2 * self.coeffs.len()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            v[2 * k] = c;
        }
        Poly::new(v)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == ZERO {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({:.6}{:+.6}i)", c.re, c.im)?,
                1 => write!(f, "({:.6}{:+.6}i)z", c.re, c.im)?,
                _ => write!(f, "({:.6}{:+.6}i)z^{k}", c.re, c.im)?,
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-ONE)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::new(v)
    }
}

/// Monic polynomial; the leading coefficient is exactly one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<C64>", into = "Vec<C64>")]
pub struct MonicPoly(Poly);

impl TryFrom<Vec<C64>> for MonicPoly {
    type Error = Error;
    fn try_from(v: Vec<C64>) -> Result<Self> {
        MonicPoly::normalize(&Poly::new(v))
            .ok_or_else(|| Error::InvalidPoint("monic polynomial needs a nonzero leading coefficient".into()))
    }
}

impl From<MonicPoly> for Vec<C64> {
    fn from(p: MonicPoly) -> Self {
        p.0.coeffs
    }
}

impl Deref for MonicPoly {
    type Target = Poly;
    fn deref(&self) -> &Poly {
        &self.0
    }
}

impl fmt::Display for MonicPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl MonicPoly {
    /// `z^d + lower[d-1] z^(d-1) + ... + lower[0]` with `d = lower.len()`.
    pub fn from_lower(lower: &[C64]) -> Self {
        let mut v = lower.to_vec();
        v.push(ONE);
        MonicPoly(Poly { coeffs: v })
    }

    /// `z^d - Q[d-1] z^(d-1) - ... - Q[0]`, the sign convention used for
    /// scheme coordinates.
    pub fn from_scheme_coords(q: &[C64]) -> Self {
        let lower: Vec<C64> = q.iter().map(|&c| -c).collect();
        MonicPoly::from_lower(&lower)
    }

    /// Inverse of [`MonicPoly::from_scheme_coords`].
    pub fn scheme_coords(&self) -> Vec<C64> {
        let d = self.degree_usize();
        self.0.coeffs[..d].iter().map(|&c| -c).collect()
    }

    /// Divides by the leading coefficient; `None` for the zero polynomial.
    pub fn normalize(p: &Poly) -> Option<Self> {
        if p.is_zero() {
            return None;
        }
        let lead = p.leading();
        let mut v: Vec<C64> = p.coeffs.iter().map(|&c| c / lead).collect();
        *v.last_mut().unwrap() = ONE;
        Some(MonicPoly(Poly { coeffs: v }))
    }

    pub fn degree_usize(&self) -> usize {
        self.0.coeffs.len() - 1
    }

    pub fn as_poly(&self) -> &Poly {
        &self.0
    }

    /// `q(u^2)`, still monic.
    pub fn compose_square(&self) -> MonicPoly {
        MonicPoly(self.0.compose_square())
    }
}

/// Element of `C[z]/(q)` with its canonical representative of degree `< deg q`.
#[derive(Clone, Debug, PartialEq)]
pub struct Residue {
    modulus: MonicPoly,
    rep: Poly,
}

impl Residue {
    pub fn modulus(&self) -> &MonicPoly {
        &self.modulus
    }

    pub fn rep(&self) -> &Poly {
        &self.rep
    }

    /// Ring product, reduced.
    pub fn mul(&self, other: &Residue) -> Residue {
        debug_assert_eq!(self.modulus, other.modulus);
        let prod = &self.rep * &other.rep;
        reduce_mod(&prod, &self.modulus).expect("modulus already validated")
    }
}

/// Quotient and remainder of `a` by the monic `q`.
pub fn div_rem(a: &Poly, q: &MonicPoly) -> Result<(Poly, Poly)> {
    let d = q.degree_usize();
    if d == 0 {
        return Err(Error::TrivialModulus);
    }
    let mut r = a.coeffs.clone();
    if r.len() <= d {
        return Ok((Poly::zero(), a.clone()));
    }
    let mut quot = vec![ZERO; r.len() - d];
    let qc = q.coeffs();
    for k in (d..r.len()).rev() {
        let c = r[k];
        quot[k - d] = c;
        if c == ZERO {
            continue;
        }
        for i in 0..d {
            r[k - d + i] -= c * qc[i];
        }
        r[k] = ZERO;
    }
    r.truncate(d);
    Ok((Poly::new(quot), Poly::new(r)))
}

/// Reduces `a` modulo the monic `q` by long division.
pub fn reduce_mod(a: &Poly, q: &MonicPoly) -> Result<Residue> {
    let (_, rep) = div_rem(a, q)?;
    Ok(Residue { modulus: q.clone(), rep })
}

/// Matrix of multiplication by `f` on `C[z]/(q)` in the monomial basis
/// `1, z, ..., z^(d-1)`; column `j` holds the coefficients of `f z^j mod q`.
pub fn mult_matrix(f: &Residue) -> CMat {
    let q = &f.modulus;
    let d = q.degree_usize();
    let mut m = CMat::zeros(d, d);
    let mut col = f.rep.clone();
    for j in 0..d {
        for (i, &c) in col.coeffs().iter().enumerate() {
            m[(i, j)] = c;
        }
        if j + 1 < d {
            let shifted = &col * &Poly::monomial(1, ONE);
            col = reduce_mod(&shifted, q).expect("d >= 1").rep;
        }
    }
    m
}

/// Companion matrix of `q`: multiplication by `z` modulo `q`.
pub fn companion(q: &MonicPoly) -> Result<CMat> {
    let z = reduce_mod(&Poly::monomial(1, ONE), q)?;
    Ok(mult_matrix(&z))
}

/// Roots of `q` with multiplicity, sorted lexicographically by `(re, im)`.
///
/// Eigenvalues of the balanced companion matrix, each polished by one Newton
/// step that is kept only when it lowers `|q(r)|`.
pub fn roots(q: &MonicPoly) -> Result<Vec<C64>> {
    let d = q.degree_usize();
    if d == 0 {
        return Err(Error::RootExtraction("constant polynomial".into()));
    }
    let mut rs = if d == 1 {
        vec![-q.coeff(0)]
    } else {
        let c = companion(q)?;
        linalg::eigenvalues(&c).map_err(|e| Error::RootExtraction(e.to_string()))?
    };
    let dq = q.derivative();
    for r in rs.iter_mut() {
        let v = q.eval(*r);
        let dv = dq.eval(*r);
        if dv.norm() > 0.0 {
            let cand = *r - v / dv;
            if cand.re.is_finite() && cand.im.is_finite() && q.eval(cand).norm() < v.norm() {
                *r = cand;
            }
        }
    }
    if rs.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::RootExtraction("non-finite root".into()));
    }
    sort_lex(&mut rs);
    Ok(rs)
}

/// Sorts complex numbers by `(re, im)`.
pub fn sort_lex(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Reorders `found` so that entry `i` is the one nearest `reference[i]`
/// (greedy matching on pairwise distances).
pub fn match_to_reference(found: &[C64], reference: &[C64]) -> Vec<C64> {
    let n = reference.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, r) in reference.iter().enumerate() {
        for (j, f) in found.iter().enumerate() {
            pairs.push(((r - f).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![ZERO; n];
    let mut used_ref = vec![false; n];
    let mut used_found = vec![false; found.len()];
    for (_, i, j) in pairs {
        if !used_ref[i] && !used_found[j] {
            out[i] = found[j];
            used_ref[i] = true;
            used_found[j] = true;
        }
    }
    out
}

/// Roots of `q` ordered to follow `reference` (continuation of a root labelling).
pub fn roots_near(q: &MonicPoly, reference: &[C64]) -> Result<Vec<C64>> {
    let rs = roots(q)?;
    Ok(match_to_reference(&rs, reference))
}

/// The monic polynomial `prod (z - r_i)`.
pub fn from_roots(rs: &[C64]) -> MonicPoly {
    let mut v = vec![ONE];
    for &r in rs {
        let mut next = vec![ZERO; v.len() + 1];
        for (i, &c) in v.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        v = next;
    }
    MonicPoly(Poly { coeffs: v })
}

/// Minimum pairwise distance between nodes (infinite for fewer than two).
pub fn min_separation(nodes: &[C64]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            m = m.min((nodes[i] - nodes[j]).norm());
        }
    }
    m
}

/// Hermite interpolation. Each entry is a node with the prescribed values
/// `[f(x), f'(x), f''(x), ...]`; the result has degree below the total
/// number of conditions. Confluent divided differences in Newton form.
pub fn hermite_interpolate(data: &[(C64, Vec<C64>)]) -> Result<Poly> {
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            let scale = 1.0 + data[i].0.norm().max(data[j].0.norm());
            if (data[i].0 - data[j].0).norm() <= 1e-13 * scale {
                return Err(Error::ConfluentNodes(i, j));
            }
        }
    }
    // expanded node list z_k with the index of its source entry
    let mut z: Vec<C64> = Vec::new();
    let mut src: Vec<usize> = Vec::new();
    for (i, (x, vals)) in data.iter().enumerate() {
        for _ in 0..vals.len() {
            z.push(*x);
            src.push(i);
        }
    }
    let n = z.len();
    if n == 0 {
        return Err(Error::LengthMismatch("no interpolation conditions".into()));
    }
    // table[k] holds f[z_k, ..., z_{k+level}] after each pass
    let mut table: Vec<C64> = src.iter().map(|&i| data[i].1[0]).collect();
    let mut newton = vec![table[0]];
    let mut factorial = 1.0;
    for level in 1..n {
        factorial *= level as f64;
        let mut next = Vec::with_capacity(n - level);
        for k in 0..n - level {
            let (a, b) = (z[k], z[k + level]);
            if src[k] == src[k + level] {
                next.push(data[src[k]].1[level] / factorial);
            } else {
                next.push((table[k + 1] - table[k]) / (b - a));
            }
        }
        table = next;
        newton.push(table[0]);
    }
    // expand the Newton form into monomial coefficients (Horner on the basis)
    let mut p = Poly::constant(newton[n - 1]);
    for k in (0..n - 1).rev() {
        let lin = Poly::new(vec![-z[k], ONE]);
        p = &(&p * &lin) + &Poly::constant(newton[k]);
    }
    Ok(p)
}

/// Unique polynomial of degree `<= n-1` through `(nodes[i], values[i])`.
pub fn lagrange_interpolate(nodes: &[C64], values: &[C64]) -> Result<Poly> {
    if nodes.len() != values.len() || nodes.is_empty() {
        return Err(Error::LengthMismatch(format!("{} nodes, {} values", nodes.len(), values.len())));
    }
    let data: Vec<(C64, Vec<C64>)> = nodes.iter().zip(values).map(|(&x, &v)| (x, vec![v])).collect();
    hermite_interpolate(&data)
}

fn no_shared_roots(a: &Poly, b: &Poly, tol: f64) -> bool {
    if b.degree() < 1 {
        return true;
    }
    let mb = MonicPoly::normalize(b).expect("nonzero");
    let Ok(rs) = roots(&mb) else {
        return false;
    };
    let bound = tol * (1.0 + a.norm_inf());
    rs.iter().all(|&r| a.eval(r).norm() > bound)
}

/// True iff `a` and `b` have no common root at tolerance `tol`, checked from
/// both sides.
pub fn coprime(a: &Poly, b: &Poly, tol: f64) -> bool {
    no_shared_roots(a, b, tol) && no_shared_roots(b, a, tol)
}
