//! Points of the transverse Hilbert scheme of `d` points in the roots chart,
//! the coefficient chart and the `(p(u), q(u^2))` model of the `ah` surface.
//!
//! Coefficient-chart coordinates are `x = (Q_0..Q_{d-1}, T_0..T_{d-1})` with
//! `q(z) = z^d - sum Q_j z^j` and `T(z) = sum T_j z^j`. The fiber polynomial
//! interpolates the linear fiber of the surface (see
//! [`SurfaceKind::to_linear_fiber`]).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::poly::{self, from_roots, hermite_interpolate, lagrange_interpolate, min_separation, reduce_mod, MonicPoly, Poly};
use crate::surfaces::{self, sample_fiber_values, uniform_disk, uniform_sector, Chart, SurfaceKind, SurfacePoint};

/// Default separation below which roots count as confluent.
pub const TOL_SEP: f64 = 1e-6;
/// Radius of the disk base values are drawn from.
pub const SAMPLE_RADIUS: f64 = 1.5;
/// Minimum root separation of sampled points.
pub const SAMPLE_SEPARATION: f64 = 0.4;
/// Smallest `|z|` of an `xy` base point; keeps `|y| >= 0.125`.
pub const XY_BASE_MIN: f64 = 0.25;
/// Annulus for `ah` base values, keeping `u = sqrt z` away from the ramification.
pub const AH_BASE_ANNULUS: (f64, f64) = (0.25, 2.0);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Generic,
    OneDouble,
}

/// `d` distinct surface points `(z_i, t_i)` in one surface chart.
#[derive(Clone, Debug, PartialEq)]
pub struct RootsChartPoint {
    pub kind: SurfaceKind,
    pub surface_chart: Chart,
    pub pairs: Vec<(C64, C64)>,
}

/// Polynomial pair `(q, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffChartPoint {
    pub kind: SurfaceKind,
    pub surface_chart: Chart,
    pub q: MonicPoly,
    pub t: Poly,
}

/// Point `(p(u), q)` of the `ah` model with `p(u) p(-u) = 1 mod q(u^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AhPoint {
    pub p: Poly,
    pub q: MonicPoly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemePointRepr", into = "SchemePointRepr")]
pub enum SchemePoint {
    Roots(RootsChartPoint),
    Coeff(CoeffChartPoint),
    Ah(AhPoint),
}

impl RootsChartPoint {
    pub fn new(kind: SurfaceKind, surface_chart: Chart, pairs: Vec<(C64, C64)>) -> Result<Self> {
        kind.check_chart(surface_chart)?;
        if pairs.is_empty() {
            return Err(Error::InvalidPoint("a scheme point needs at least one pair".into()));
        }
        Ok(RootsChartPoint { kind, surface_chart, pairs })
    }

    pub fn degree(&self) -> usize {
        self.pairs.len()
    }

    pub fn bases(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    /// Interleaved coordinates `(z_1, t_1, ..., z_d, t_d)`.
    pub fn coords(&self) -> Vec<C64> {
        self.pairs.iter().flat_map(|&(z, t)| [z, t]).collect()
    }

    pub fn surface_points(&self) -> Vec<SurfacePoint> {
        self.pairs
            .iter()
            .map(|&(base, fiber)| SurfacePoint { kind: self.kind, chart: self.surface_chart, base, fiber })
            .collect()
    }
}

impl CoeffChartPoint {
    pub fn new(kind: SurfaceKind, surface_chart: Chart, q: MonicPoly, t: Poly) -> Result<Self> {
        kind.check_chart(surface_chart)?;
        if kind == SurfaceKind::Ah {
            return Err(Error::Unsupported("the ah surface uses the (p(u), q(u^2)) model".into()));
        }
        if q.degree_usize() == 0 {
            return Err(Error::TrivialModulus);
        }
        Ok(CoeffChartPoint { kind, surface_chart, q, t })
    }

    pub fn degree(&self) -> usize {
        self.q.degree_usize()
    }

    /// Coordinates `(Q_0..Q_{d-1}, T_0..T_{d-1})`.
    pub fn coords(&self) -> Vec<C64> {
        let d = self.degree();
        let mut x = self.q.scheme_coords();
        x.extend(self.t.padded(d));
        x
    }

    /// Rebuilds a point of the same surface and chart from coordinates.
    pub fn with_coords(&self, x: &[C64]) -> CoeffChartPoint {
        let d = self.degree();
        CoeffChartPoint {
            kind: self.kind,
            surface_chart: self.surface_chart,
            q: MonicPoly::from_scheme_coords(&x[..d]),
            t: Poly::new(x[d..2 * d].to_vec()),
        }
    }

    /// Pairs `(root, fiber)` with roots labelled to follow `reference`.
    pub fn pairs_near(&self, reference: &[C64]) -> Result<Vec<(C64, C64)>> {
        let rs = poly::roots_near(&self.q, reference)?;
        rs.into_iter().map(|z| Ok((z, self.kind.from_linear_fiber(self.t.eval(z))?))).collect()
    }
}

impl AhPoint {
    pub fn degree(&self) -> usize {
        self.q.degree_usize()
    }

    /// Ambient coordinates `(p_0..p_{2d-1}, Q_0..Q_{d-1})`.
    pub fn coords(&self) -> Vec<C64> {
        let mut x = self.p.padded(2 * self.degree());
        x.extend(self.q.scheme_coords());
        x
    }

    pub fn from_coords(d: usize, x: &[C64]) -> AhPoint {
        AhPoint { p: Poly::new(x[..2 * d].to_vec()), q: MonicPoly::from_scheme_coords(&x[2 * d..3 * d]) }
    }

    /// `q(u^2)`.
    pub fn q_even(&self) -> MonicPoly {
        self.q.compose_square()
    }

    /// Largest coefficient of `p(u) p(-u) - 1 mod q(u^2)`.
    pub fn unit_residual(&self) -> Result<f64> {
        let prod = &(&self.p * &self.p.reflect()) - &Poly::constant(ONE);
        Ok(reduce_mod(&prod, &self.q_even())?.rep().norm_inf())
    }

    /// Surface points `(z_i, t_i)` with roots labelled to follow `reference`.
    pub fn pairs_near(&self, reference: &[C64]) -> Result<Vec<(C64, C64)>> {
        let rs = poly::roots_near(&self.q, reference)?;
        rs.into_iter()
            .map(|z| {
                let u = z.sqrt();
                let a = self.p.eval(u);
                if u.norm() == 0.0 || a.norm() == 0.0 {
                    return Err(Error::InvalidPoint("ah point meets the ramification locus".into()));
                }
                Ok((z, a.ln() / (u * 2.0)))
            })
            .collect()
    }
}

impl SchemePoint {
    pub fn kind(&self) -> SurfaceKind {
        match self {
            SchemePoint::Roots(p) => p.kind,
            SchemePoint::Coeff(p) => p.kind,
            SchemePoint::Ah(_) => SurfaceKind::Ah,
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            SchemePoint::Roots(p) => p.degree(),
            SchemePoint::Coeff(p) => p.degree(),
            SchemePoint::Ah(p) => p.degree(),
        }
    }

    pub fn chart_name(&self) -> &'static str {
        match self {
            SchemePoint::Roots(_) => "roots",
            SchemePoint::Coeff(_) => "coeff",
            SchemePoint::Ah(_) => "ah",
        }
    }

    /// Base polynomial `q` (expanding the roots in the roots chart).
    pub fn modulus(&self) -> MonicPoly {
        match self {
            SchemePoint::Roots(p) => from_roots(&p.bases()),
            SchemePoint::Coeff(p) => p.q.clone(),
            SchemePoint::Ah(p) => p.q.clone(),
        }
    }

    /// The same point in the coefficient chart (identity there).
    pub fn to_coeff(&self) -> Result<CoeffChartPoint> {
        match self {
            SchemePoint::Roots(p) => roots_to_coeff(p),
            SchemePoint::Coeff(p) => Ok(p.clone()),
            SchemePoint::Ah(_) => Err(Error::Unsupported("the ah surface has no (Q, T) chart".into())),
        }
    }

    /// The same point in the roots chart.
    pub fn to_roots(&self) -> Result<RootsChartPoint> {
        match self {
            SchemePoint::Roots(p) => Ok(p.clone()),
            SchemePoint::Coeff(p) => coeff_to_roots(p),
            SchemePoint::Ah(p) => ah_to_roots(p),
        }
    }
}

/// Vieta expansion of the bases and interpolation of the linear fibers.
pub fn roots_to_coeff(pt: &RootsChartPoint) -> Result<CoeffChartPoint> {
    if pt.kind == SurfaceKind::Ah {
        return Err(Error::Unsupported("use roots_to_ah for the ah surface".into()));
    }
    let zs = pt.bases();
    let sep = min_separation(&zs);
    if sep < TOL_SEP {
        return Err(Error::ConfluentPoint(sep));
    }
    let values: Vec<C64> = pt.pairs.iter().map(|&(_, t)| pt.kind.to_linear_fiber(t)).collect();
    let t = lagrange_interpolate(&zs, &values)?;
    CoeffChartPoint::new(pt.kind, pt.surface_chart, from_roots(&zs), t)
}

/// Roots of `q` sorted by `(re, im)`, paired with the fiber values of `T`.
pub fn coeff_to_roots(pt: &CoeffChartPoint) -> Result<RootsChartPoint> {
    let rs = poly::roots(&pt.q)?;
    let sep = min_separation(&rs);
    if sep < TOL_SEP {
        return Err(Error::ConfluentPoint(sep));
    }
    let pairs = pt.pairs_near(&rs)?;
    RootsChartPoint::new(pt.kind, pt.surface_chart, pairs)
}

/// `ah` points in the roots chart: `t_i = log p(u_i) / (2 u_i)`, `u_i = sqrt z_i`.
pub fn ah_to_roots(pt: &AhPoint) -> Result<RootsChartPoint> {
    let rs = poly::roots(&pt.q)?;
    let sep = min_separation(&rs);
    if sep < TOL_SEP {
        return Err(Error::ConfluentPoint(sep));
    }
    RootsChartPoint::new(SurfaceKind::Ah, Chart::Main, pt.pairs_near(&rs)?)
}

/// Inverse of [`ah_to_roots`]: interpolates `p(u_i) = a_i`, `p(-u_i) = 1/a_i`.
pub fn roots_to_ah(pt: &RootsChartPoint) -> Result<AhPoint> {
    if pt.kind != SurfaceKind::Ah {
        return Err(Error::WrongChart { kind: pt.kind.to_string(), chart: "ah".into() });
    }
    let zs = pt.bases();
    let sep = min_separation(&zs);
    if sep < TOL_SEP {
        return Err(Error::ConfluentPoint(sep));
    }
    let mut data = Vec::with_capacity(2 * zs.len());
    for &(z, t) in &pt.pairs {
        let u = z.sqrt();
        if u.norm() == 0.0 {
            return Err(Error::InvalidPoint("ah base value at the ramification point".into()));
        }
        let a = (u * t * 2.0).exp();
        data.push((u, vec![a]));
        data.push((-u, vec![a.inv()]));
    }
    Ok(AhPoint { p: hermite_interpolate(&data)?, q: from_roots(&zs) })
}

/// Draws `count` items whose base values are pairwise at least
/// [`SAMPLE_SEPARATION`] apart.
fn separated<R: Rng + ?Sized, T>(count: usize, rng: &mut R, mut draw: impl FnMut(&mut R) -> (C64, T)) -> Vec<(C64, T)> {
    'restart: loop {
        let mut out: Vec<(C64, T)> = Vec::with_capacity(count);
        while out.len() < count {
            let mut tries = 0;
            loop {
                let (z, extra) = draw(rng);
                if out.iter().all(|r| (r.0 - z).norm() >= SAMPLE_SEPARATION) {
                    out.push((z, extra));
                    break;
                }
                tries += 1;
                if tries > 200 {
                    continue 'restart;
                }
            }
        }
        return out;
    }
}

fn sample_bases<R: Rng + ?Sized>(kind: SurfaceKind, count: usize, rng: &mut R) -> Vec<C64> {
    let pts = match kind {
        SurfaceKind::Ah => {
            let (lo, hi) = AH_BASE_ANNULUS;
            separated(count, rng, |r| (uniform_sector(r, lo, hi, std::f64::consts::PI - surfaces::CUT_MARGIN), ()))
        }
        _ => separated(count, rng, |r| (uniform_disk(r, SAMPLE_RADIUS), ())),
    };
    pts.into_iter().map(|p| p.0).collect()
}

/// `xy` points: bases in the same disk as the other surfaces (kept off
/// `z = 0` and the cut), `x` with `|x|` in `[0.5, 2]`, and `y = z / x`, so both
/// charts are valid and `chi2 = chi1 + log z` holds on the principal branch.
fn sample_xy_pairs<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<(C64, C64)> {
    let max_arg = std::f64::consts::FRAC_PI_2 - surfaces::CUT_MARGIN;
    separated(count, rng, |r| {
        let z = uniform_sector(r, XY_BASE_MIN, SAMPLE_RADIUS, max_arg);
        let x = uniform_sector(r, 0.5, 2.0, max_arg);
        (z, -x.ln())
    })
}

fn ah_log_fiber<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let a = sample_fiber_values(SurfaceKind::Ah, Chart::Main, rng, 1).expect("ah chart")[0];
    a.ln()
}

/// Random scheme point. `Generic` points come in the roots chart (or the `ah`
/// model) with root separation at least [`SAMPLE_SEPARATION`]; `OneDouble`
/// points come in the coefficient chart (or the `ah` model) with exactly one
/// double root. `OneDouble` needs `d >= 2`.
pub fn random_scheme_point<R: Rng + ?Sized>(kind: SurfaceKind, d: usize, rng: &mut R, mode: SampleMode) -> Result<SchemePoint> {
    if d == 0 {
        return Err(Error::InvalidPoint("degree must be at least 1".into()));
    }
    let chart = kind.default_chart();
    match mode {
        SampleMode::Generic => {
            let pairs: Vec<(C64, C64)> = match kind {
                SurfaceKind::Xy => sample_xy_pairs(d, rng),
                SurfaceKind::Ah => {
                    let zs = sample_bases(kind, d, rng);
                    zs.into_iter().map(|z| (z, ah_log_fiber(rng) / (z.sqrt() * 2.0))).collect()
                }
                _ => {
                    let zs = sample_bases(kind, d, rng);
                    let ts = sample_fiber_values(kind, chart, rng, d)?;
                    zs.into_iter().zip(ts).collect()
                }
            };
            let pt = RootsChartPoint::new(kind, chart, pairs)?;
            if kind == SurfaceKind::Ah {
                Ok(SchemePoint::Ah(roots_to_ah(&pt)?))
            } else {
                Ok(SchemePoint::Roots(pt))
            }
        }
        SampleMode::OneDouble => {
            if d < 2 {
                return Err(Error::Unsupported("a double point needs d >= 2".into()));
            }
            let (zs, fibers): (Vec<C64>, Vec<C64>) = match kind {
                SurfaceKind::Xy => sample_xy_pairs(d - 1, rng).into_iter().unzip(),
                SurfaceKind::Ah => {
                    let zs = sample_bases(kind, d - 1, rng);
                    let fs = (0..d - 1).map(|_| ah_log_fiber(rng)).collect();
                    (zs, fs)
                }
                _ => {
                    let zs = sample_bases(kind, d - 1, rng);
                    let fs = sample_fiber_values(kind, chart, rng, d - 1)?;
                    (zs, fs)
                }
            };
            let slope = uniform_disk(rng, 1.0);
            let mut all = vec![zs[0]];
            all.extend_from_slice(&zs);
            let q = from_roots(&all);
            if kind == SurfaceKind::Ah {
                // fibers hold log a_i; p(u) p(-u) - 1 must vanish to second order at +-u_0
                let mut data = Vec::with_capacity(2 * d);
                for (i, (&z, &s)) in zs.iter().zip(&fibers).enumerate() {
                    let (u, a) = (z.sqrt(), s.exp());
                    if i == 0 {
                        data.push((u, vec![a, slope]));
                        data.push((-u, vec![a.inv(), slope / (a * a)]));
                    } else {
                        data.push((u, vec![a]));
                        data.push((-u, vec![a.inv()]));
                    }
                }
                return Ok(SchemePoint::Ah(AhPoint { p: hermite_interpolate(&data)?, q }));
            }
            let data: Vec<(C64, Vec<C64>)> = zs
                .iter()
                .zip(&fibers)
                .enumerate()
                .map(|(i, (&z, &f))| {
                    let v = kind.to_linear_fiber(f);
                    if i == 0 {
                        (z, vec![v, slope])
                    } else {
                        (z, vec![v])
                    }
                })
                .collect();
            let t = hermite_interpolate(&data)?;
            Ok(SchemePoint::Coeff(CoeffChartPoint::new(kind, chart, q, t)?))
        }
    }
}

/// One named constraint of [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl ConstraintCheck {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        ConstraintCheck { name: name.into(), value, limit, passed: value <= limit }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        ConstraintCheck { name: name.into(), value, limit, passed: value >= limit }
    }
}

impl fmt::Display for ConstraintCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "ok" } else { "FAILED" };
        write!(f, "{:<16} {:>11.3e} (limit {:.1e}) {}", self.name, self.value, self.limit, status)
    }
}

fn finite(vals: impl IntoIterator<Item = C64>) -> f64 {
    if vals.into_iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Residuals of every constraint of the point; failures are reported, not raised.
pub fn validate(pt: &SchemePoint, tol: f64) -> Vec<ConstraintCheck> {
    let mut out = Vec::new();
    match pt {
        SchemePoint::Roots(r) => {
            out.push(ConstraintCheck::at_most("finite", finite(r.coords()), 0.0));
            out.push(ConstraintCheck::at_least("separation", min_separation(&r.bases()), TOL_SEP));
            let chart_ok = r.kind.check_chart(r.surface_chart).is_ok();
            out.push(ConstraintCheck::at_most("surface-chart", if chart_ok { 0.0 } else { 1.0 }, 0.0));
            if r.kind == SurfaceKind::Ah {
                let m = r.pairs.iter().map(|p| p.0.norm()).fold(f64::INFINITY, f64::min);
                out.push(ConstraintCheck::at_least("base-nonzero", m, tol));
            }
        }
        SchemePoint::Coeff(c) => {
            let d = c.degree();
            out.push(ConstraintCheck::at_most("finite", finite(c.coords()), 0.0));
            out.push(ConstraintCheck::at_most("fiber-degree", (c.t.degree() + 1 - d as isize).max(0) as f64, 0.0));
            if c.kind == SurfaceKind::Cstar {
                let m = match poly::roots(&c.q) {
                    Ok(rs) => rs.iter().map(|&r| c.t.eval(r).norm()).fold(f64::INFINITY, f64::min) / (1.0 + c.t.norm_inf()),
                    Err(_) => 0.0,
                };
                out.push(ConstraintCheck::at_least("fiber-nonzero", m, tol));
            }
        }
        SchemePoint::Ah(a) => {
            let d = a.degree();
            out.push(ConstraintCheck::at_most("finite", finite(a.coords()), 0.0));
            out.push(ConstraintCheck::at_most("fiber-degree", (a.p.degree() + 1 - 2 * d as isize).max(0) as f64, 0.0));
            out.push(ConstraintCheck::at_most("unit-constraint", a.unit_residual().unwrap_or(f64::INFINITY), tol));
            out.push(ConstraintCheck::at_least("base-nonzero", a.q.eval(ZERO).norm(), tol));
        }
    }
    out
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ChartTag {
    Roots,
    Coeff,
    Ah,
}

/// On-disk form: complex values as `[re, im]`, `Q` in the scheme sign
/// convention (`q = z^d - sum Q_j z^j`), `T` and `pu` lowest degree first.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemePointRepr {
    kind: SurfaceKind,
    chart: ChartTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surface_chart: Option<Chart>,
    #[serde(rename = "Q", default, skip_serializing_if = "Vec::is_empty")]
    q: Vec<C64>,
    #[serde(rename = "T", default, skip_serializing_if = "Vec::is_empty")]
    t: Vec<C64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pairs: Vec<[C64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pu: Vec<C64>,
}

impl From<SchemePoint> for SchemePointRepr {
    fn from(pt: SchemePoint) -> Self {
        let mut r = SchemePointRepr {
            kind: pt.kind(),
            chart: ChartTag::Roots,
            surface_chart: None,
            q: Vec::new(),
            t: Vec::new(),
            pairs: Vec::new(),
            pu: Vec::new(),
        };
        match pt {
            SchemePoint::Roots(p) => {
                r.surface_chart = (p.surface_chart != Chart::Main).then_some(p.surface_chart);
                r.pairs = p.pairs.iter().map(|&(z, t)| [z, t]).collect();
            }
            SchemePoint::Coeff(p) => {
                r.chart = ChartTag::Coeff;
                r.surface_chart = (p.surface_chart != Chart::Main).then_some(p.surface_chart);
                r.q = p.q.scheme_coords();
                r.t = p.t.padded(p.degree());
            }
            SchemePoint::Ah(p) => {
                r.chart = ChartTag::Ah;
                r.q = p.q.scheme_coords();
                r.pu = p.p.padded(2 * p.degree());
            }
        }
        r
    }
}

impl TryFrom<SchemePointRepr> for SchemePoint {
    type Error = Error;
    fn try_from(r: SchemePointRepr) -> Result<Self> {
        let chart = r.surface_chart.unwrap_or_else(|| r.kind.default_chart());
        match r.chart {
            ChartTag::Roots => {
                let pairs = r.pairs.iter().map(|p| (p[0], p[1])).collect();
                Ok(SchemePoint::Roots(RootsChartPoint::new(r.kind, chart, pairs)?))
            }
            ChartTag::Coeff => {
                let d = r.q.len();
                if d == 0 || r.t.len() > d {
                    return Err(Error::LengthMismatch(format!("field Q has {d} entries, field T has {}", r.t.len())));
                }
                let q = MonicPoly::from_scheme_coords(&r.q);
                Ok(SchemePoint::Coeff(CoeffChartPoint::new(r.kind, chart, q, Poly::new(r.t))?))
            }
            ChartTag::Ah => {
                if r.kind != SurfaceKind::Ah {
                    return Err(Error::WrongChart { kind: r.kind.to_string(), chart: "ah".into() });
                }
                let d = r.q.len();
                if d == 0 || r.pu.len() > 2 * d {
                    return Err(Error::LengthMismatch(format!("field Q has {d} entries, field pu has {}", r.pu.len())));
                }
                Ok(SchemePoint::Ah(AhPoint { p: Poly::new(r.pu), q: MonicPoly::from_scheme_coords(&r.q) }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn vieta_signs_for_two_points() {
        let (b1, b2) = (c(0.3, 1.0), c(-1.2, 0.4));
        let pt = RootsChartPoint::new(SurfaceKind::Flat, Chart::Main, vec![(b1, c(1.0, 0.0)), (b2, c(0.0, 2.0))]).unwrap();
        let cp = roots_to_coeff(&pt).unwrap();
        let q = cp.q.scheme_coords();
        assert!((q[1] - (b1 + b2)).norm() < 1e-15);
        assert!((q[0] + b1 * b2).norm() < 1e-15);
        assert!((cp.t.eval(b1) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((cp.t.eval(b2) - c(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn single_point_charts() {
        let pt = RootsChartPoint::new(SurfaceKind::Flat, Chart::Main, vec![(c(0.5, 0.5), c(2.0, -1.0))]).unwrap();
        let cp = roots_to_coeff(&pt).unwrap();
        assert_eq!(cp.coords(), vec![c(0.5, 0.5), c(2.0, -1.0)]);
        assert_eq!(coeff_to_roots(&cp).unwrap(), pt);
    }

    #[test]
    fn coefficient_example_to_roots() {
        let cp = CoeffChartPoint::new(
            SurfaceKind::Flat,
            Chart::Main,
            MonicPoly::from_scheme_coords(&[c(-2.0, 0.0), c(3.0, 0.0)]),
            Poly::monomial(1, ONE),
        )
        .unwrap();
        let r = coeff_to_roots(&cp).unwrap();
        assert!((r.pairs[0].0 - c(1.0, 0.0)).norm() < 1e-12 && (r.pairs[0].1 - c(1.0, 0.0)).norm() < 1e-12);
        assert!((r.pairs[1].0 - c(2.0, 0.0)).norm() < 1e-12 && (r.pairs[1].1 - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn confluent_coefficients_refuse_roots_chart() {
        let cp = CoeffChartPoint::new(SurfaceKind::Flat, Chart::Main, from_roots(&[ONE, ONE]), Poly::constant(ONE)).unwrap();
        assert!(matches!(coeff_to_roots(&cp), Err(Error::ConfluentPoint(_))));
    }

    #[test]
    fn cstar_zero_fiber_fails_validation() {
        let q = from_roots(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let t = Poly::new(vec![c(-1.0, 0.0), ONE]);
        let cp = CoeffChartPoint::new(SurfaceKind::Cstar, Chart::Main, q, t).unwrap();
        let report = validate(&SchemePoint::Coeff(cp.clone()), 1e-8);
        let check = report.iter().find(|c| c.name == "fiber-nonzero").unwrap();
        assert!(!check.passed);
        assert!(coeff_to_roots(&cp).is_err());
    }

    #[test]
    fn generic_sampling_is_reproducible_and_separated() {
        let a = random_scheme_point(SurfaceKind::Flat, 3, &mut rng(7), SampleMode::Generic).unwrap();
        let b = random_scheme_point(SurfaceKind::Flat, 3, &mut rng(7), SampleMode::Generic).unwrap();
        assert_eq!(a, b);
        let SchemePoint::Roots(r) = a else { panic!("roots chart expected") };
        assert!(min_separation(&r.bases()) >= 0.1);
    }

    #[test]
    fn one_double_discriminant_vanishes() {
        for kind in SurfaceKind::ALL {
            let pt = random_scheme_point(kind, 2, &mut rng(3), SampleMode::OneDouble).unwrap();
            let q = pt.modulus().scheme_coords();
            assert!((q[1] * q[1] + q[0] * 4.0).norm() < 1e-12, "{kind}");
            assert!(validate(&pt, 1e-8).iter().all(|c| c.passed), "{kind}");
        }
        assert!(random_scheme_point(SurfaceKind::Flat, 1, &mut rng(3), SampleMode::OneDouble).is_err());
    }

    #[test]
    fn ah_points_satisfy_unit_constraint() {
        let mut r = rng(19);
        for d in 1..=4 {
            for mode in [SampleMode::Generic, SampleMode::OneDouble] {
                if mode == SampleMode::OneDouble && d == 1 {
                    continue;
                }
                let SchemePoint::Ah(a) = random_scheme_point(SurfaceKind::Ah, d, &mut r, mode).unwrap() else { panic!() };
                assert!(a.unit_residual().unwrap() < 1e-8);
                assert!(a.p.degree() < 2 * d as isize);
            }
        }
    }

    #[test]
    fn ah_single_point_by_hand() {
        // d = 1: q = z - z0, p = p0 + p1 u with (p0 + p1 u)(p0 - p1 u) = 1 mod u^2 - z0
        let z0 = c(0.8, 0.3);
        let pt = RootsChartPoint::new(SurfaceKind::Ah, Chart::Main, vec![(z0, c(0.2, -0.1))]).unwrap();
        let a = roots_to_ah(&pt).unwrap();
        let (p0, p1) = (a.p.coeff(0), a.p.coeff(1));
        assert!((p0 * p0 - p1 * p1 * z0 - ONE).norm() < 1e-12);
        let back = ah_to_roots(&a).unwrap();
        assert!((back.pairs[0].1 - c(0.2, -0.1)).norm() < 1e-12);
    }

    #[test]
    fn ah_perturbation_scales_residual() {
        let SchemePoint::Ah(mut a) = random_scheme_point(SurfaceKind::Ah, 3, &mut rng(5), SampleMode::Generic).unwrap() else {
            panic!()
        };
        let mut coeffs = a.p.padded(6);
        coeffs[2] += 1e-3;
        a.p = Poly::new(coeffs);
        let res = validate(&SchemePoint::Ah(a), 1e-8).into_iter().find(|c| c.name == "unit-constraint").unwrap();
        assert!(!res.passed);
        assert!(res.value > 1e-4 && res.value < 1e-2, "{}", res.value);
    }

    #[test]
    fn json_round_trip_all_charts() {
        let mut r = rng(1);
        for kind in SurfaceKind::ALL {
            for mode in [SampleMode::Generic, SampleMode::OneDouble] {
                let pt = random_scheme_point(kind, 3, &mut r, mode).unwrap();
                let s = serde_json::to_string(&pt).unwrap();
                let back: SchemePoint = serde_json::from_str(&s).unwrap();
                assert_eq!(back, pt);
            }
        }
        let js = r#"{"kind":"flat","chart":"coeff","Q":[[-2,0],[3,0]],"T":[[0,0],[1,0]]}"#;
        let pt: SchemePoint = serde_json::from_str(js).unwrap();
        assert_eq!(pt.degree(), 2);
        assert!(serde_json::from_str::<SchemePoint>(r#"{"kind":"flat","chart":"coeff","Q":[]}"#).is_err());
        assert!(serde_json::from_str::<SchemePoint>(r#"{"kind":"flat","chart":"ah","Q":[[1,0]]}"#).is_err());
    }

    #[test]
    fn xy_points_carry_valid_charts() {
        let pt = random_scheme_point(SurfaceKind::Xy, 4, &mut rng(2), SampleMode::Generic).unwrap();
        let r = pt.to_roots().unwrap();
        for sp in r.surface_points() {
            let q = surfaces::chart_transition(&sp, Chart::U2).unwrap();
            assert!((q.fiber - (sp.fiber + sp.base.ln())).norm() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn chart_round_trip(seed in any::<u64>(), d in 1usize..=6, k in 0usize..3) {
            let kind = [SurfaceKind::Flat, SurfaceKind::Cstar, SurfaceKind::Xy][k];
            let pt = random_scheme_point(kind, d, &mut rng(seed), SampleMode::Generic).unwrap();
            let SchemePoint::Roots(r) = pt else { panic!() };
            let back = coeff_to_roots(&roots_to_coeff(&r).unwrap()).unwrap();
            let mut expected = r.pairs.clone();
            expected.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
            for (a, b) in back.pairs.iter().zip(&expected) {
                prop_assert!((a.0 - b.0).norm() < 1e-8);
                prop_assert!((a.1 - b.1).norm() < 1e-8);
            }
        }

        #[test]
        fn ah_round_trip(seed in any::<u64>(), d in 1usize..=4) {
            let SchemePoint::Ah(a) = random_scheme_point(SurfaceKind::Ah, d, &mut rng(seed), SampleMode::Generic).unwrap() else { panic!() };
            let back = roots_to_ah(&ah_to_roots(&a).unwrap()).unwrap();
            prop_assert!((&back.p - &a.p).norm_inf() < 1e-8);
            prop_assert!((back.q.as_poly() - a.q.as_poly()).norm_inf() < 1e-8);
        }
    }
}
