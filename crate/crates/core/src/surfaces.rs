//! The example symplectic surfaces `(S, p, omega)` with Darboux charts adapted
//! to the projection `p`.
//!
//! Every chart uses coordinates `(z, fiber)` where `z` is the base value and
//! `fiber` is a Darboux fiber coordinate, so `omega = dz ^ d(fiber)`:
//!
//! | surface | ambient | charts | fiber |
//! |---------|---------|--------|-------|
//! | `flat`  | `C x C`, `p(z, t) = z` | main | `t` |
//! | `cstar` | `C x C*`, `p(z, e) = z` | main | `t = log e` |
//! | `xy`    | `C x C`, `p(x, y) = xy` | `u1` (`x != 0`), `u2` (`y != 0`) | `-log x`, `log y` |
//! | `ah`    | `x^2 - z y^2 = 1` | main | `t = log(x + u y) / (2u)`, `u^2 = z` |
//!
//! Logarithms use the principal branch.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{standard_symplectic, CMat, C64, ONE};

/// Minimum ambient distance kept between samples and the critical set.
pub const CRITICAL_MARGIN: f64 = 0.1;
/// Radius of the disk fiber values are drawn from.
pub const FIBER_RADIUS: f64 = 2.0;
/// Angular margin kept from logarithm branch cuts when sampling.
pub const CUT_MARGIN: f64 = 0.1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Flat,
    Cstar,
    Xy,
    Ah,
}

impl SurfaceKind {
    pub const ALL: [SurfaceKind; 4] = [SurfaceKind::Flat, SurfaceKind::Cstar, SurfaceKind::Xy, SurfaceKind::Ah];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceKind::Flat => "flat",
            SurfaceKind::Cstar => "cstar",
            SurfaceKind::Xy => "xy",
            SurfaceKind::Ah => "ah",
        }
    }

    pub fn charts(self) -> &'static [Chart] {
        match self {
            SurfaceKind::Xy => &[Chart::U1, Chart::U2],
            _ => &[Chart::Main],
        }
    }

    pub fn default_chart(self) -> Chart {
        self.charts()[0]
    }

    pub fn check_chart(self, chart: Chart) -> Result<()> {
        if self.charts().contains(&chart) {
            Ok(())
        } else {
            Err(Error::WrongChart { kind: self.to_string(), chart: chart.to_string() })
        }
    }

    /// Map from the Darboux fiber to the fiber value interpolated by the
    /// coefficient chart (`e = exp t` on `cstar`, identity elsewhere).
    pub fn to_linear_fiber(self, fiber: C64) -> C64 {
        match self {
            SurfaceKind::Cstar => fiber.exp(),
            _ => fiber,
        }
    }

    /// Inverse of [`SurfaceKind::to_linear_fiber`].
    pub fn from_linear_fiber(self, value: C64) -> Result<C64> {
        match self {
            SurfaceKind::Cstar => {
                if value.norm() == 0.0 || !value.norm().is_finite() {
                    Err(Error::InvalidPoint("cstar fiber value must be nonzero".into()))
                } else {
                    Ok(value.ln())
                }
            }
            _ => Ok(value),
        }
    }

    /// Whether the coefficient-chart fiber polynomial interpolates a Darboux
    /// coordinate (true except on `cstar`).
    pub fn linear_fiber_is_darboux(self) -> bool {
        !matches!(self, SurfaceKind::Cstar)
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(SurfaceKind::Flat),
            "cstar" => Ok(SurfaceKind::Cstar),
            "xy" => Ok(SurfaceKind::Xy),
            "ah" => Ok(SurfaceKind::Ah),
            other => Err(Error::Unsupported(format!("unknown surface '{other}' (expected flat, cstar, xy or ah)"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    #[default]
    Main,
    U1,
    U2,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chart::Main => "main",
            Chart::U1 => "u1",
            Chart::U2 => "u2",
        })
    }
}

/// A point of a surface in one of its Darboux charts.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub kind: SurfaceKind,
    pub chart: Chart,
    pub base: C64,
    pub fiber: C64,
}

impl SurfacePoint {
    pub fn new(kind: SurfaceKind, chart: Chart, base: C64, fiber: C64) -> Result<Self> {
        kind.check_chart(chart)?;
        Ok(SurfacePoint { kind, chart, base, fiber })
    }

    /// Ambient coordinates: `(z, t)` flat, `(z, e)` cstar, `(x, y)` xy, `(z, x, y)` ah.
    pub fn ambient(&self) -> Result<Vec<C64>> {
        let (z, f) = (self.base, self.fiber);
        Ok(match (self.kind, self.chart) {
            (SurfaceKind::Flat, _) => vec![z, f],
            (SurfaceKind::Cstar, _) => vec![z, f.exp()],
            (SurfaceKind::Xy, Chart::U2) => vec![z * (-f).exp(), f.exp()],
            (SurfaceKind::Xy, _) => vec![(-f).exp(), z * f.exp()],
            (SurfaceKind::Ah, _) => {
                let u = z.sqrt();
                if u.norm() == 0.0 {
                    return Err(Error::InvalidPoint("ah chart is undefined at the ramification point".into()));
                }
                let a = (u * f * 2.0).exp();
                vec![z, (a + a.inv()) * 0.5, (a - a.inv()) / (u * 2.0)]
            }
        })
    }

    /// Inverse of [`SurfacePoint::ambient`] in the requested chart.
    pub fn from_ambient(kind: SurfaceKind, chart: Chart, amb: &[C64]) -> Result<Self> {
        kind.check_chart(chart)?;
        let (base, fiber) = match kind {
            SurfaceKind::Flat => (amb[0], amb[1]),
            SurfaceKind::Cstar => (amb[0], kind.from_linear_fiber(amb[1])?),
            SurfaceKind::Xy => {
                let (x, y) = (amb[0], amb[1]);
                let fiber = match chart {
                    Chart::U2 => {
                        if y.norm() == 0.0 {
                            return Err(Error::NotInOverlap("y = 0 lies outside chart u2".into()));
                        }
                        y.ln()
                    }
                    _ => {
                        if x.norm() == 0.0 {
                            return Err(Error::NotInOverlap("x = 0 lies outside chart u1".into()));
                        }
                        -x.ln()
                    }
                };
                (x * y, fiber)
            }
            SurfaceKind::Ah => {
                let (z, x, y) = (amb[0], amb[1], amb[2]);
                let u = z.sqrt();
                let a = x + u * y;
                if u.norm() == 0.0 || a.norm() == 0.0 {
                    return Err(Error::InvalidPoint("ah point at the ramification locus".into()));
                }
                (z, a.ln() / (u * 2.0))
            }
        };
        Ok(SurfacePoint { kind, chart, base, fiber })
    }

    /// Ambient distance to the critical set `B` (infinite where `B` is empty).
    pub fn critical_distance(&self) -> Result<f64> {
        Ok(match self.kind {
            SurfaceKind::Flat | SurfaceKind::Cstar => f64::INFINITY,
            SurfaceKind::Xy => {
                let a = self.ambient()?;
                (a[0].norm_sqr() + a[1].norm_sqr()).sqrt()
            }
            SurfaceKind::Ah => self.base.sqrt().norm(),
        })
    }
}

/// Changes chart, going through ambient coordinates. Only `xy` has more than
/// one chart; on the overlap `chi2 = chi1 + log z` up to the branch of `log`.
pub fn chart_transition(pt: &SurfacePoint, target: Chart) -> Result<SurfacePoint> {
    pt.kind.check_chart(target)?;
    if pt.chart == target {
        return Ok(*pt);
    }
    let amb = pt.ambient()?;
    if amb[0].norm() < CRITICAL_MARGIN || amb[1].norm() < CRITICAL_MARGIN {
        return Err(Error::NotInOverlap(format!("|x| = {:.3e}, |y| = {:.3e}", amb[0].norm(), amb[1].norm())));
    }
    SurfacePoint::from_ambient(pt.kind, target, &amb)
}

/// Matrix of `omega` in Darboux chart coordinates `(z, fiber)`.
pub fn symplectic_form_chart(kind: SurfaceKind, chart: Chart) -> Result<CMat> {
    kind.check_chart(chart)?;
    Ok(standard_symplectic(1))
}

/// Matrix of `omega` in the coordinates `(z, linear fiber)` used by the
/// coefficient chart: `dz ^ de / e` on `cstar`, the standard form elsewhere.
pub fn symplectic_form_linear(kind: SurfaceKind, linear_fiber: C64) -> CMat {
    let mut w = standard_symplectic(1);
    if kind == SurfaceKind::Cstar {
        let s = linear_fiber.inv();
        w[(0, 1)] = s;
        w[(1, 0)] = -s;
    }
    w
}

pub(crate) fn uniform_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>().sqrt();
    let th = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    C64::from_polar(r, th)
}

/// Uniform in the annulus `rmin <= |w| <= rmax` with `|arg w| <= max_arg`.
pub(crate) fn uniform_sector<R: Rng + ?Sized>(rng: &mut R, rmin: f64, rmax: f64, max_arg: f64) -> C64 {
    let r = (rng.random_range(rmin * rmin..rmax * rmax)).sqrt();
    let th = rng.random_range(-max_arg..max_arg);
    C64::from_polar(r, th)
}

/// Samples ambient `(x, y)` on the `xy` surface inside the overlap of both
/// charts, keeping `arg(xy)` off the branch cut so that `chi2 = chi1 + log z`.
pub fn sample_xy_ambient<R: Rng + ?Sized>(rng: &mut R) -> (C64, C64) {
    let max_arg = std::f64::consts::FRAC_PI_2 - CUT_MARGIN;
    (uniform_sector(rng, 0.5, 2.0, max_arg), uniform_sector(rng, 0.5, 2.0, max_arg))
}

/// Fiber coordinates drawn for the given chart.
///
/// `flat`: uniform in the disk of radius 2. `cstar`: `log e` with `e` in that
/// disk, `|e| >= 0.1` and away from the cut. `xy`: chart fibers of ambient
/// values with `|x|, |y|` in `[0.5, 2]`. `ah`: the value `a = x + u y` of the
/// u-parametrization, kept away from zero and the negative real axis.
pub fn sample_fiber_values<R: Rng + ?Sized>(kind: SurfaceKind, chart: Chart, rng: &mut R, count: usize) -> Result<Vec<C64>> {
    kind.check_chart(chart)?;
    let max_arg = std::f64::consts::PI - CUT_MARGIN;
    Ok((0..count)
        .map(|_| match (kind, chart) {
            (SurfaceKind::Flat, _) => uniform_disk(rng, FIBER_RADIUS),
            (SurfaceKind::Cstar, _) => uniform_sector(rng, CRITICAL_MARGIN, FIBER_RADIUS, max_arg).ln(),
            (SurfaceKind::Xy, Chart::U2) => sample_xy_ambient(rng).1.ln(),
            (SurfaceKind::Xy, _) => -sample_xy_ambient(rng).0.ln(),
            (SurfaceKind::Ah, _) => {
                let s = C64::new(rng.random_range(-0.7..0.7), rng.random_range(-2.5..2.5));
                s.exp()
            }
        })
        .collect())
}

/// `(x + u y)(x - u y) - 1` for an ambient `ah` point with `u^2 = z`.
pub fn ah_unit_residual(amb: &[C64]) -> f64 {
    let (z, x, y) = (amb[0], amb[1], amb[2]);
    let u = z.sqrt();
    ((x + u * y) * (x - u * y) - ONE).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd;
    use crate::linalg::ZERO;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn xy_transition_example() {
        // x = 1, y = 2: chi1 = -log 1 = 0, z = 2, chi2 = log 2
        let p = SurfacePoint::from_ambient(SurfaceKind::Xy, Chart::U1, &[c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(p.base, c(2.0, 0.0));
        assert!(p.fiber.norm() < 1e-15);
        let q = chart_transition(&p, Chart::U2).unwrap();
        assert!((q.fiber - c(2f64.ln(), 0.0)).norm() < 1e-15);
        assert!((q.fiber - (p.fiber + p.base.ln())).norm() < 1e-15);
    }

    #[test]
    fn single_chart_transition_is_identity() {
        let p = SurfacePoint::new(SurfaceKind::Flat, Chart::Main, c(1.0, 2.0), c(-0.5, 0.0)).unwrap();
        assert_eq!(chart_transition(&p, Chart::Main).unwrap(), p);
        assert!(chart_transition(&p, Chart::U1).is_err());
    }

    #[test]
    fn transition_outside_overlap_fails() {
        let p = SurfacePoint::from_ambient(SurfaceKind::Xy, Chart::U1, &[c(1.0, 0.0), c(0.01, 0.0)]).unwrap();
        assert!(matches!(chart_transition(&p, Chart::U2), Err(Error::NotInOverlap(_))));
    }

    #[test]
    fn xy_round_trip_and_symplectic_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (x, y) = sample_xy_ambient(&mut rng);
            let p = SurfacePoint::from_ambient(SurfaceKind::Xy, Chart::U1, &[x, y]).unwrap();
            let q = chart_transition(&p, Chart::U2).unwrap();
            let back = chart_transition(&q, Chart::U1).unwrap();
            assert!((back.fiber - p.fiber).norm() < 1e-12);
            assert!((back.base - p.base).norm() < 1e-12);
            // Jacobian of (z, chi1) -> (z, chi2) preserves the standard form
            let map = |v: &[C64]| {
                let s = SurfacePoint::new(SurfaceKind::Xy, Chart::U1, v[0], v[1])?;
                let t = chart_transition(&s, Chart::U2)?;
                Ok(vec![t.base, t.fiber])
            };
            let j = fd::jacobian(map, &[p.base, p.fiber], fd::REL_STEP).unwrap();
            let w0 = standard_symplectic(1);
            assert!((j.transpose() * &w0 * &j - &w0).norm() < 1e-10);
        }
    }

    fn pullback_of_dx_dy(chart: Chart, z: C64, chi: C64) -> CMat {
        let map = move |v: &[C64]| -> Result<Vec<C64>> {
            Ok(match chart {
                Chart::U2 => vec![v[0] * (-v[1]).exp(), v[1].exp()],
                _ => vec![(-v[1]).exp(), v[0] * v[1].exp()],
            })
        };
        let j = fd::jacobian(map, &[z, chi], fd::REL_STEP).unwrap();
        j.transpose() * standard_symplectic(1) * j
    }

    #[test]
    fn xy_charts_are_darboux() {
        for chart in [Chart::U1, Chart::U2] {
            let expected = symplectic_form_chart(SurfaceKind::Xy, chart).unwrap();
            for (z, chi) in [(c(0.7, 0.2), c(0.1, -0.4)), (c(-1.5, 1.0), c(0.3, 0.9))] {
                assert!((pullback_of_dx_dy(chart, z, chi) - &expected).norm() < 1e-9);
            }
        }
        let flat = symplectic_form_chart(SurfaceKind::Flat, Chart::Main).unwrap();
        assert_eq!(flat, CMat::from_row_slice(2, 2, &[ZERO, ONE, -ONE, ZERO]));
    }

    #[test]
    fn ah_parametrization_satisfies_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let z = uniform_sector(&mut rng, 0.25, 2.0, 3.0);
            let p = SurfacePoint::new(SurfaceKind::Ah, Chart::Main, z, uniform_disk(&mut rng, 1.0)).unwrap();
            let amb = p.ambient().unwrap();
            assert!(ah_unit_residual(&amb) < 1e-12);
            let (x, y) = (amb[1], amb[2]);
            assert!((x * x - z * y * y - ONE).norm() < 1e-12);
            let back = SurfacePoint::from_ambient(SurfaceKind::Ah, Chart::Main, &amb).unwrap();
            assert!(p.critical_distance().unwrap() >= CRITICAL_MARGIN);
            // the same surface point, possibly on the other log branch
            let amb2 = back.ambient().unwrap();
            assert!((amb2[1] - x).norm() < 1e-10 && (amb2[2] - y).norm() < 1e-10);
        }
    }

    #[test]
    fn fiber_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let flat = sample_fiber_values(SurfaceKind::Flat, Chart::Main, &mut rng, 3).unwrap();
        assert_eq!(flat.len(), 3);
        assert!(flat.iter().all(|v| v.norm() <= FIBER_RADIUS));
        let cs = sample_fiber_values(SurfaceKind::Cstar, Chart::Main, &mut rng, 200).unwrap();
        assert!(cs.iter().all(|t| SurfaceKind::Cstar.to_linear_fiber(*t).norm() >= CRITICAL_MARGIN - 1e-12));
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            sample_fiber_values(SurfaceKind::Xy, Chart::U2, &mut r, 5).unwrap()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn surface_names_round_trip() {
        for k in SurfaceKind::ALL {
            assert_eq!(k.name().parse::<SurfaceKind>().unwrap(), k);
        }
        assert!("torus".parse::<SurfaceKind>().is_err());
    }
}
