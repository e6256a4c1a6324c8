//! Quadrature reference for the inner products of the basis functions.
//!
//! Works in normalized time `u = f t` with integer ratio `r = f_n / f`; callers
//! multiply by `T_c` to get physical units. The pulses are rebuilt here from
//! their definitions so nothing is shared with the library.

#![allow(dead_code)]

use gauss_quad::GaussLegendre;

const LN2: f64 = std::f64::consts::LN_2;
/// The integrands decay as 2^{-2|u|}; 60 periods is far below f64 precision.
const TAIL: i32 = 60;

fn h(u: f64, r: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * r;
    (LN2 * (u - 1.0)).exp() * ((w * u).cos() - LN2 / w * (w * u).sin())
}

pub fn p(u: f64, r: f64) -> f64 {
    if u < 0.0 {
        h(u, r)
    } else if u < 1.0 {
        1.0 - h(u, r)
    } else {
        0.0
    }
}

pub fn o(u: f64, r: f64) -> f64 {
    if u < 0.0 {
        h(u, r)
    } else if u < 1.0 {
        -h(u, r)
    } else {
        0.0
    }
}

pub struct Oracle {
    rule: GaussLegendre,
}

impl Oracle {
    pub fn new() -> Self {
        Oracle {
            rule: GaussLegendre::new(48).unwrap(),
        }
    }

    /// Integral over the real line of a product with breakpoints on the
    /// integers (all shifts used here are whole symbol periods).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        (-TAIL - 2..TAIL + 2)
            .map(|k| self.rule.integrate(k as f64, k as f64 + 1.0, &f))
            .sum()
    }

    /// `∫_{-∞}^{1} h_1 h_2`, the raw kernel overlap.
    pub fn kernel_overlap(&self, r1: f64, r2: f64) -> f64 {
        self.integrate(|u| if u < 1.0 { h(u, r1) * h(u, r2) } else { 0.0 })
    }

    pub fn pp(&self, rn: f64, rk: f64, shift: f64) -> f64 {
        self.integrate(|u| p(u, rn) * p(u + shift, rk))
    }

    /// `∫ p_k(u + shift) o_n(u) du`.
    pub fn po(&self, rk: f64, rn: f64, shift: f64) -> f64 {
        self.integrate(|u| p(u + shift, rk) * o(u, rn))
    }
}

/// Every analysis term for subcarrier index `n` (0-based) at lag `lag >= 1`.
pub struct Reference {
    pub e: f64,
    pub i: f64,
    pub b_cross: f64,
    pub delta2: f64,
    pub q: f64,
    pub a: f64,
    pub b_fut: f64,
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub cross_isi_mf: f64,
}

pub fn reference(o: &Oracle, r: [f64; 2], n: usize, lag: f64) -> Reference {
    let (rn, rk) = (r[n], r[1 - n]);
    Reference {
        e: o.pp(rn, rn, 0.0),
        i: o.pp(rn, rn, lag),
        b_cross: o.pp(rn, rk, 0.0),
        delta2: o.kernel_overlap(r[0], r[1]) / (1.0 - (-LN2).exp()),
        q: o.po(rn, rn, 0.0),
        a: o.po(rn, rn, lag),
        b_fut: o.po(rn, rn, -lag),
        c: o.po(rk, rn, 0.0),
        x: o.po(rk, rn, lag),
        y: o.po(rk, rn, -lag),
        cross_isi_mf: o.pp(rn, rk, -lag),
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}
