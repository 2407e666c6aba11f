//! Central finite differences for holomorphic maps of complex coordinates.
//!
//! Derivatives use the five-point central stencil, so the truncation error is
//! `O(h^4)` and rounding (about `eps / h`) dominates.
//!
//! Steps are taken along the real part of each coordinate; for a holomorphic
//! map that is the complex partial derivative. Stepping the imaginary part
//! instead gives `i` times the same derivative, which [`holomorphy_defect`]
//! uses as a consistency check.

use crate::error::Result;
use crate::linalg::{CMat, CVec, C64};

/// Default relative step: `h = 1e-5 * (1 + |x|)`.
pub const REL_STEP: f64 = 1e-5;

pub fn step_for(x: C64, rel: f64) -> f64 {
    rel * (1.0 + x.norm())
}

/// `(8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`.
fn stencil(p1: &[C64], m1: &[C64], p2: &[C64], m2: &[C64], h: f64) -> Vec<C64> {
    (0..p1.len()).map(|i| ((p1[i] - m1[i]) * 8.0 - (p2[i] - m2[i])) / (12.0 * h)).collect()
}

/// Jacobian `dF/dx` (rows: outputs, columns: inputs).
pub fn jacobian<F>(f: F, x: &[C64], rel: f64) -> Result<CMat>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let n = x.len();
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = step_for(x[k], rel);
        let mut at = |s: f64| {
            xp[k] = x[k] + s * h;
            f(&xp)
        };
        let (p1, m1, p2, m2) = (at(1.0)?, at(-1.0)?, at(2.0)?, at(-2.0)?);
        xp[k] = x[k];
        cols.push(stencil(&p1, &m1, &p2, &m2, h));
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok(CMat::from_fn(m, n, |i, j| cols[j][i]))
}

/// Jacobian with an absolute step per coordinate.
pub fn jacobian_steps<F>(f: F, x: &[C64], steps: &[f64]) -> Result<CMat>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        e[k] = C64::new(1.0, 0.0);
        cols.push(directional(&f, x, &e, steps[k])?);
        e[k] = C64::new(0.0, 0.0);
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok(CMat::from_fn(m, n, |i, j| cols[j][i]))
}

/// Directional derivative `dF(x)[v]` with a real step along the complex direction `v`.
pub fn directional<F>(f: F, x: &[C64], v: &[C64], h: f64) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let at = |s: f64| {
        let y: Vec<C64> = x.iter().zip(v).map(|(a, b)| a + b * (s * h)).collect();
        f(&y)
    };
    Ok(stencil(&at(1.0)?, &at(-1.0)?, &at(2.0)?, &at(-2.0)?, h))
}

/// Gradient of a scalar function.
pub fn gradient<F>(f: F, x: &[C64], rel: f64) -> Result<CVec>
where
    F: Fn(&[C64]) -> Result<C64>,
{
    let j = jacobian(|y| Ok(vec![f(y)?]), x, rel)?;
    Ok(j.row(0).transpose())
}

/// Largest `|dF/d(re x_k) + i dF/d(im x_k)|` over all entries; small iff the
/// finite-difference Jacobian is consistent with a holomorphic map.
pub fn holomorphy_defect<F>(f: F, x: &[C64], rel: f64) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = step_for(x[k], rel);
        let i_h = C64::new(0.0, h);
        xp[k] = x[k] + i_h;
        let fp = f(&xp)?;
        xp[k] = x[k] - i_h;
        let fm = f(&xp)?;
        xp[k] = x[k] + h;
        let gp = f(&xp)?;
        xp[k] = x[k] - h;
        let gm = f(&xp)?;
        xp[k] = x[k];
        for i in 0..fp.len() {
            let d_re = (gp[i] - gm[i]) / (2.0 * h);
            let d_im = (fp[i] - fm[i]) / (2.0 * h);
            let scale = 1.0 + d_re.norm();
            worst = worst.max((d_re + C64::i() * d_im).norm() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_polynomial_map() {
        let f = |x: &[C64]| Ok(vec![x[0] * x[1], x[0] * x[0] * x[0]]);
        let x = [C64::new(0.5, -1.0), C64::new(2.0, 0.3)];
        let j = jacobian(f, &x, REL_STEP).unwrap();
        let exact = CMat::from_row_slice(2, 2, &[x[1], x[0], x[0] * x[0] * 3.0, C64::new(0.0, 0.0)]);
        assert!((j - exact).norm() < 1e-8);
        assert!(holomorphy_defect(f, &x, REL_STEP).unwrap() < 1e-8);
    }

    #[test]
    fn conjugation_is_not_holomorphic() {
        let f = |x: &[C64]| Ok(vec![x[0].conj()]);
        assert!(holomorphy_defect(f, &[C64::new(1.0, 1.0)], REL_STEP).unwrap() > 0.5);
    }
}
