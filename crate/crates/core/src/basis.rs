//! Chaotic basis functions and their sampled filter taps.
//!
//! Every subcarrier `n` (1-based) owns three filters built from the same
//! exponential-oscillatory kernel
//!
//! ```text
//! h_n(t) = e^{β(t - T_c)} (cos ω_n t - (β/ω_n) sin ω_n t),   β = f ln 2
//! ```
//!
//! * shaping `p_n`: `h_n` for `t < 0`, `1 - h_n` on `[0, T_c)`, zero after;
//! * matched `g_n(t) = p_n(-t)`;
//! * correlation `o_n`: `h_n` for `t < 0`, `-h_n` on `[0, T_c)`, zero after.
//!
//! All evaluation goes through normalized time `u = f t` and the ratio
//! `f_n / f`, so scaling `f`, `f_n` and `fs` together leaves the taps unchanged.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Default truncation of the `t < 0` tail, in symbol periods.
pub const DEFAULT_TAIL_SYMBOLS: usize = 20;

/// Raw carrier parameters as they appear in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierParams {
    /// Symbol frequency `f` in Hz.
    pub f: f64,
    pub num_subcarriers: usize,
    /// Per-subcarrier base frequencies; `n f` for `n = 1..=N` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_freqs: Option<Vec<f64>>,
    pub sample_rate: f64,
    #[serde(default = "default_tail")]
    pub tail_symbols: usize,
}

fn default_tail() -> usize {
    DEFAULT_TAIL_SYMBOLS
}

/// Validated filter-bank parameters.
///
/// `beta` is derived (`f ln 2`) and cannot be set independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CarrierParams", into = "CarrierParams")]
pub struct CarrierConfig {
    f: f64,
    base_freqs: Vec<f64>,
    sample_rate: f64,
    tail_symbols: usize,
    sps: usize,
    ratios: Vec<u32>,
}

impl CarrierConfig {
    /// `N` subcarriers on the default grid `f_n = n f`, with the default tail.
    pub fn new(f: f64, num_subcarriers: usize, sample_rate: f64) -> Result<Self> {
        CarrierParams {
            f,
            num_subcarriers,
            base_freqs: None,
            sample_rate,
            tail_symbols: DEFAULT_TAIL_SYMBOLS,
        }
        .try_into()
    }

    pub fn with_tail_symbols(self, tail_symbols: usize) -> Result<Self> {
        let mut p = CarrierParams::from(self);
        p.tail_symbols = tail_symbols;
        p.try_into()
    }

    pub fn with_base_freqs(self, base_freqs: Vec<f64>) -> Result<Self> {
        let mut p = CarrierParams::from(self);
        p.num_subcarriers = base_freqs.len();
        p.base_freqs = Some(base_freqs);
        p.try_into()
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn num_subcarriers(&self) -> usize {
        self.base_freqs.len()
    }

    pub fn base_freqs(&self) -> &[f64] {
        &self.base_freqs
    }

    pub fn beta(&self) -> f64 {
        self.f * LN_2
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn tail_symbols(&self) -> usize {
        self.tail_symbols
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.f
    }

    /// Samples per symbol, `fs / f`.
    pub fn samples_per_symbol(&self) -> usize {
        self.sps
    }

    /// `f_n / f` for a 1-based subcarrier index.
    pub fn ratio(&self, n: usize) -> Result<u32> {
        self.check_index(n)?;
        Ok(self.ratios[n - 1])
    }

    /// Angular base frequency `ω_n = 2π f_n`.
    pub fn omega(&self, n: usize) -> Result<f64> {
        self.check_index(n)?;
        Ok(2.0 * PI * self.base_freqs[n - 1])
    }

    /// Length of a shaping filter: `(K + 1) sps + 1`.
    pub fn taps_len(&self) -> usize {
        (self.tail_symbols + 1) * self.sps + 1
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.num_subcarriers() {
            return Err(SimError::config(
                "subcarrier",
                format!(
                    "subcarrier index {n} outside 1..={}",
                    self.num_subcarriers()
                ),
            ));
        }
        Ok(())
    }
}

impl TryFrom<CarrierParams> for CarrierConfig {
    type Error = SimError;

    fn try_from(p: CarrierParams) -> Result<Self> {
        if !(p.f.is_finite() && p.f > 0.0) {
            return Err(SimError::config(
                "f",
                "symbol frequency must be positive and finite",
            ));
        }
        if p.num_subcarriers == 0 {
            return Err(SimError::config(
                "num_subcarriers",
                "need at least one subcarrier",
            ));
        }
        if !(p.sample_rate.is_finite() && p.sample_rate > 0.0) {
            return Err(SimError::config(
                "sample_rate",
                "must be positive and finite",
            ));
        }
        let sps_f = p.sample_rate / p.f;
        let sps = sps_f.round();
        if (sps_f - sps).abs() > 1e-9 * sps_f.max(1.0) {
            return Err(SimError::config(
                "sample_rate",
                format!("sample_rate / f = {sps_f} is not an integer"),
            ));
        }
        if sps < 8.0 {
            return Err(SimError::config(
                "sample_rate",
                format!("need at least 8 samples per symbol, got {sps}"),
            ));
        }
        if p.tail_symbols == 0 {
            return Err(SimError::config("tail_symbols", "must be at least 1"));
        }
        let base_freqs = match p.base_freqs {
            Some(b) => {
                if b.len() != p.num_subcarriers {
                    return Err(SimError::config(
                        "base_freqs",
                        format!(
                            "{} base frequencies given for {} subcarriers",
                            b.len(),
                            p.num_subcarriers
                        ),
                    ));
                }
                b
            }
            None => (1..=p.num_subcarriers).map(|n| n as f64 * p.f).collect(),
        };
        let mut ratios = Vec::with_capacity(base_freqs.len());
        for (i, &fr) in base_freqs.iter().enumerate() {
            let r = fr / p.f;
            let ri = r.round();
            if !(fr.is_finite() && ri >= 1.0 && (r - ri).abs() <= 1e-9 * r.max(1.0)) {
                return Err(SimError::config(
                    format!("base_freqs[{i}]"),
                    format!(
                        "{fr} Hz is not a positive integer multiple of f = {} Hz",
                        p.f
                    ),
                ));
            }
            if ratios.contains(&(ri as u32)) {
                return Err(SimError::config(
                    format!("base_freqs[{i}]"),
                    "duplicate base frequency",
                ));
            }
            ratios.push(ri as u32);
        }
        Ok(CarrierConfig {
            f: p.f,
            base_freqs,
            sample_rate: p.sample_rate,
            tail_symbols: p.tail_symbols,
            sps: sps as usize,
            ratios,
        })
    }
}

impl From<CarrierConfig> for CarrierParams {
    fn from(c: CarrierConfig) -> Self {
        CarrierParams {
            f: c.f,
            num_subcarriers: c.base_freqs.len(),
            base_freqs: Some(c.base_freqs),
            sample_rate: c.sample_rate,
            tail_symbols: c.tail_symbols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Shaping,
    Matched,
    Correlation,
}

/// Sampled filter impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTaps {
    pub taps: Vec<f64>,
    /// Index of the tap at continuous time `t = 0`.
    pub origin_index: usize,
    pub kind: FilterKind,
    /// 1-based subcarrier index.
    pub subcarrier: usize,
}

/// The shared kernel in normalized time `u = f t` for ratio `r = f_n / f`.
#[inline]
fn kernel(u: f64, r: f64) -> f64 {
    let w = 2.0 * PI * r;
    let (s, c) = (w * u).sin_cos();
    (LN_2 * (u - 1.0)).exp() * (c - LN_2 / w * s)
}

#[inline]
fn shaping_normalized(u: f64, r: f64) -> f64 {
    if u < 0.0 {
        kernel(u, r)
    } else if u < 1.0 {
        1.0 - kernel(u, r)
    } else {
        0.0
    }
}

#[inline]
fn correlation_normalized(u: f64, r: f64) -> f64 {
    if u < 0.0 {
        kernel(u, r)
    } else if u < 1.0 {
        -kernel(u, r)
    } else {
        0.0
    }
}

/// `o` sampled for a filter: at its two jumps (`u = 0` and `u = 1`) the tap
/// takes the mean of the one-sided limits, so the sampled correlation is
/// trapezoidal there instead of biased by half a jump.
fn correlation_tap(u: f64, r: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else if u == 1.0 {
        -0.5 * kernel(1.0, r)
    } else {
        correlation_normalized(u, r)
    }
}

/// Shaping basis function `p_n(t)`.
pub fn eval_p(n: usize, t: f64, cfg: &CarrierConfig) -> Result<f64> {
    let r = cfg.ratio(n)? as f64;
    Ok(shaping_normalized(t * cfg.f, r))
}

/// Orthogonal correlation function `o_n(t)`.
pub fn eval_o(n: usize, t: f64, cfg: &CarrierConfig) -> Result<f64> {
    let r = cfg.ratio(n)? as f64;
    Ok(correlation_normalized(t * cfg.f, r))
}

/// Samples one filter on the grid `t_k = (k - origin) / fs`.
///
/// Shaping and correlation taps cover `[-K T_c, T_c]` with the origin at
/// `K sps`; matched taps are the exact reversal of the shaping taps, so their
/// origin sits at `sps`.
pub fn make_taps(kind: FilterKind, n: usize, cfg: &CarrierConfig) -> Result<FilterTaps> {
    let r = cfg.ratio(n)? as f64;
    let sps = cfg.samples_per_symbol();
    let origin = cfg.tail_symbols() * sps;
    let len = cfg.taps_len();
    let u = |k: usize| (k as f64 - origin as f64) / sps as f64;
    let (taps, origin_index) = match kind {
        FilterKind::Shaping => (
            (0..len).map(|k| shaping_normalized(u(k), r)).collect(),
            origin,
        ),
        FilterKind::Correlation => ((0..len).map(|k| correlation_tap(u(k), r)).collect(), origin),
        FilterKind::Matched => {
            let mut t: Vec<f64> = (0..len).map(|k| shaping_normalized(u(k), r)).collect();
            t.reverse();
            (t, len - 1 - origin)
        }
    };
    Ok(FilterTaps {
        taps,
        origin_index,
        kind,
        subcarrier: n,
    })
}

/// Taps of one kind for every subcarrier, in subcarrier order.
pub fn make_bank(kind: FilterKind, cfg: &CarrierConfig) -> Vec<FilterTaps> {
    (1..=cfg.num_subcarriers())
        .map(|n| make_taps(kind, n, cfg).expect("index in range"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize, sps: usize) -> CarrierConfig {
        CarrierConfig::new(1.0, n, sps as f64).unwrap()
    }

    #[test]
    fn branch_values() {
        let c = unit(2, 16);
        assert_eq!(eval_p(1, 2.0, &c).unwrap(), 0.0);
        assert_eq!(eval_o(1, 2.0, &c).unwrap(), 0.0);
        assert!((eval_p(1, 0.0, &c).unwrap() - 0.5).abs() < 1e-15);
        assert!((eval_o(1, 0.0, &c).unwrap() + 0.5).abs() < 1e-15);
        assert!(eval_p(3, 0.0, &c).is_err());
        assert!(eval_o(0, 0.0, &c).is_err());
    }

    #[test]
    fn continuity_at_edges() {
        for c in [unit(4, 16), CarrierConfig::new(2.5e6, 4, 40e6).unwrap()] {
            let tc = c.symbol_period();
            // ±1e-12 s at f = 1 Hz, the same normalized offset at 2.5 MHz
            let eps = 1e-12 * tc;
            for n in 1..=4 {
                let l = eval_p(n, -eps, &c).unwrap();
                let r = eval_p(n, 0.0, &c).unwrap();
                assert!((l - r).abs() < 1e-9, "n={n}: {l} vs {r}");
                assert!(eval_p(n, tc - eps, &c).unwrap().abs() < 1e-9);
                // o_n = p_n - 1 on [0, T_c): it jumps by exactly one at both edges
                let lo = eval_o(n, -eps, &c).unwrap();
                assert!((lo - 0.5).abs() < 1e-9);
                assert!((lo - eval_o(n, 0.0, &c).unwrap() - 1.0).abs() < 1e-9);
                assert!((eval_o(n, tc - eps, &c).unwrap() + 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tail_halves_each_symbol() {
        let c = unit(3, 16);
        for n in 1..=3 {
            let p0 = eval_p(n, -1e-15, &c).unwrap();
            for k in 1..=20 {
                let pk = eval_p(n, -(k as f64), &c).unwrap();
                let expect = p0 * 0.5f64.powi(k);
                assert!((pk - expect).abs() <= 1e-9 * expect.abs());
            }
        }
    }

    #[test]
    fn tap_layout() {
        let c = unit(1, 16);
        let s = make_taps(FilterKind::Shaping, 1, &c).unwrap();
        assert_eq!(s.taps.len(), 337);
        assert_eq!(s.origin_index, 320);
        assert_eq!(*s.taps.last().unwrap(), 0.0);
        assert!((s.taps[0] - 0.5 * 2f64.powi(-20)).abs() < 1e-15);
        let m = make_taps(FilterKind::Matched, 1, &c).unwrap();
        assert_eq!(m.origin_index, 16);
        let mut r = m.taps.clone();
        r.reverse();
        assert_eq!(r, s.taps);
    }

    #[test]
    fn correlation_is_shaping_minus_box() {
        let c = unit(2, 32);
        for n in 1..=2 {
            let p = make_taps(FilterKind::Shaping, n, &c).unwrap();
            let o = make_taps(FilterKind::Correlation, n, &c).unwrap();
            for (k, (a, b)) in p.taps.iter().zip(&o.taps).enumerate() {
                // the box edges carry half weight in the sampled taps
                let o0 = p.origin_index;
                let boxed = match k {
                    _ if k == o0 || k == o0 + 32 => 0.5,
                    _ if k > o0 && k < o0 + 32 => 1.0,
                    _ => 0.0,
                };
                let d = a - b - boxed;
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert_eq!(
            CarrierConfig::new(1.0, 2, 16.5)
                .unwrap_err()
                .path
                .as_deref(),
            Some("sample_rate")
        );
        assert!(CarrierConfig::new(1.0, 2, 4.0).is_err());
        assert!(CarrierConfig::new(1.0, 0, 16.0).is_err());
        let c = unit(2, 16);
        assert!(c.clone().with_base_freqs(vec![1.0, 1.0]).is_err());
        assert!(c.clone().with_base_freqs(vec![1.0, 1.5]).is_err());
        assert!(c.clone().with_tail_symbols(0).is_err());
        let d = c.with_base_freqs(vec![2.0, 3.0]).unwrap();
        assert_eq!(d.ratio(2).unwrap(), 3);
        assert!((d.beta() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let c = CarrierConfig::new(0.3125e6, 4, 40e6).unwrap();
        let s = toml::to_string(&c).unwrap();
        let back: CarrierConfig = toml::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad = "f = 1.0\nnum_subcarriers = 2\nsample_rate = 3.0\n";
        assert!(toml::from_str::<CarrierConfig>(bad).is_err());
    }

    proptest! {
        #[test]
        fn scale_covariance(c in 1e-3f64..1e7, n in 1usize..5, sps in 8usize..40) {
            let a = CarrierConfig::new(1.0, n, sps as f64).unwrap();
            let b = CarrierConfig::new(c, n, c * sps as f64).unwrap();
            for kind in [FilterKind::Shaping, FilterKind::Matched, FilterKind::Correlation] {
                prop_assert_eq!(make_taps(kind, n, &a).unwrap(), make_taps(kind, n, &b).unwrap());
            }
        }

        #[test]
        fn reversal_involution(n in 1usize..6, sps in 8usize..64, k in 1usize..8) {
            let c = CarrierConfig::new(1.0, 5, sps as f64).unwrap().with_tail_symbols(k).unwrap();
            let s = make_taps(FilterKind::Shaping, n, &c).unwrap();
            let mut t = s.taps.clone();
            t.reverse();
            t.reverse();
            prop_assert_eq!(t, s.taps);
        }
    }
}
