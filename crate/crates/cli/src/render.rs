use std::fmt::Write;

use ths_core::endo::SpectralReport;
use ths_core::poly::Poly;
use ths_core::{CMat, C64};

fn clean(x: f64) -> f64 {
    if x.abs() < 5e-7 {
        0.0
    } else {
        x
    }
}

pub fn complex(c: C64) -> String {
    let (re, im) = (clean(c.re), clean(c.im));
    if im == 0.0 {
        format!("{re:.6}")
    } else {
        format!("{re:.6}{im:+.6}i")
    }
}

/// `z^2 - 2z + 1` style, highest degree first, zero terms dropped.
pub fn poly(p: &Poly) -> String {
    let mut terms = Vec::new();
    for (k, &c) in p.coeffs().iter().enumerate().rev() {
        let c = C64::new(clean(c.re), clean(c.im));
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let monomial = match k {
            0 => String::new(),
            1 => "z".into(),
            _ => format!("z^{k}"),
        };
        let coeff = if c == C64::new(1.0, 0.0) && k > 0 {
            String::new()
        } else if c.im == 0.0 {
            complex(c)
        } else {
            format!("({})", complex(c))
        };
        terms.push(format!("{coeff}{monomial}"));
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ").replace("+ -", "- ")
    }
}

pub fn matrix(m: &CMat, indent: &str) -> String {
    let cells: Vec<Vec<String>> = m.row_iter().map(|r| r.iter().map(|&c| complex(c)).collect()).collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "{indent}{}", line.join("  "));
    }
    out
}

pub fn rows(m: &CMat) -> Vec<Vec<C64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn spectrum(rep: &SpectralReport) -> String {
    let mut out = String::new();
    let eig: Vec<String> = rep.eigenvalues.iter().map(|&z| complex(z)).collect();
    let _ = writeln!(out, "eigenvalues: {}", eig.join(", "));
    let _ = writeln!(out, "jordan blocks:");
    for c in &rep.clusters {
        let blocks: Vec<String> = c.blocks.iter().map(|b| format!("[{}; {b}]", complex(c.value))).collect();
        let _ = writeln!(out, "  {}  (algebraic {}, geometric {})", blocks.join(" "), c.algebraic, c.geometric);
    }
    let _ = writeln!(out, "characteristic polynomial: {}", poly(&rep.char_poly));
    let _ = writeln!(out, "minimal polynomial: {}", poly(&rep.min_poly));
    out
}
