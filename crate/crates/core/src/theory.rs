//! Closed-form bit error rate for two subcarriers in AWGN.
//!
//! All inner products reduce to three primitives of the kernel `h_n`
//! (see [`crate::basis`]), evaluated in normalized time `u = f t`:
//!
//! ```text
//! a_n  = ∫_0^1 h_n        = 2β(1 - e^{-β}) / (β² + ω_n²)
//! S_nk = ∫_{-∞}^1 h_n h_k
//! ```
//!
//! Shifting a kernel by `L` whole symbols scales it by `e^{-βL}`, which turns
//! every inter-symbol term into a multiple of `a_n` and `S_nk`. Energies in
//! physical units are the normalized values times `T_c`.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::basis::CarrierConfig;
use crate::error::{Result, SimError};

/// Default number of inter-symbol lags kept on each side.
pub const DEFAULT_SPAN: usize = 40;

/// How the data-dependent ISI sums `Ξ` and `Φ_n` enter the erfc arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PatternPolicy {
    /// `Ξ = Φ_n = 0`.
    Zero,
    /// Use the `xi_isi` and `phi` stored in the terms (one realized pattern).
    Fixed,
    /// Average the conditional probabilities over random `±1` neighbour
    /// patterns.
    Expectation { patterns: usize, seed: u64 },
}

impl Default for PatternPolicy {
    fn default() -> Self {
        PatternPolicy::Expectation {
            patterns: 1000,
            seed: 0x5eed,
        }
    }
}

/// Which erfc arguments to use for `P_M6`, `P_C1` and `P_C2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulas {
    /// Signs chosen so every conditional error probability vanishes as the
    /// noise vanishes.
    #[default]
    Corrected,
    /// The arguments exactly as printed; `P_M6` and `P_C1`, `P_C2` then tend to
    /// one and one half respectively as `σ → 0`.
    AsPrinted,
}

/// Every term of the two-subcarrier analysis. Lagged terms are indexed by
/// `lag - 1`, `lag = 1..=span`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryTerms {
    pub e: [f64; 2],
    /// Self ISI of the matched filter, symmetric in the lag sign.
    pub i: [Vec<f64>; 2],
    /// Same-instant cross term of the matched filter, `∫ p_1 p_2`.
    pub b_cross: [f64; 2],
    /// `S_12 / (1 - e^{-β})`.
    pub delta2: [f64; 2],
    pub q: [f64; 2],
    /// Correlation-filter self ISI from past symbols.
    pub a: [Vec<f64>; 2],
    /// Correlation-filter self ISI from future symbols.
    pub b_fut: [Vec<f64>; 2],
    /// `∫ p_k o_n`, `k ≠ n`.
    pub c: [f64; 2],
    /// Correlation-filter cross ISI from past symbols of the other subcarrier.
    pub x: [Vec<f64>; 2],
    /// Correlation-filter cross ISI from future symbols of the other subcarrier.
    pub y: [Vec<f64>; 2],
    pub sigma: f64,
    /// `Ξ` of one realized pattern, read by `PatternPolicy::Fixed`.
    pub xi_isi: f64,
    pub phi: [f64; 2],
    /// Decision threshold `Δ = |ξ̄|` of the equal-bits case.
    pub delta_threshold: f64,
}

/// One evaluated point of the theory curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub eb_n0_db: f64,
    pub sigma: f64,
    pub p_cpomf: f64,
    pub p_cpocf: f64,
    pub p_e: f64,
}

#[derive(Debug, Clone, Copy)]
struct Primitives {
    a: [f64; 2],
    s11: f64,
    s22: f64,
    s12: f64,
}

fn a_n(w: f64) -> f64 {
    let b = LN_2;
    2.0 * b * (1.0 - (-b).exp()) / (b * b + w * w)
}

/// `∫_{-∞}^1 h_n h_k` in normalized time.
fn s_nk(wn: f64, wk: f64) -> f64 {
    let b = LN_2;
    let r = b * b / (wn * wk);
    let wp = wn + wk;
    let wm = wn - wk;
    let dp = 4.0 * b * b + wp * wp;
    let dm = 4.0 * b * b + wm * wm;
    (1.0 + r) * b / dm + (1.0 - r) * b / dp + 0.5 * b * (1.0 / wn + 1.0 / wk) * wp / dp
        - 0.5 * b * wm * wm / (wn * wk * dm)
}

fn primitives(r1: f64, r2: f64) -> Primitives {
    let (w1, w2) = (2.0 * PI * r1, 2.0 * PI * r2);
    Primitives {
        a: [a_n(w1), a_n(w2)],
        s11: s_nk(w1, w1),
        s22: s_nk(w2, w2),
        s12: s_nk(w1, w2),
    }
}

fn two_ratios(cfg: &CarrierConfig) -> Result<(f64, f64)> {
    if cfg.num_subcarriers() != 2 {
        return Err(SimError::config(
            "num_subcarriers",
            format!(
                "the closed-form analysis covers N = 2, got N = {}",
                cfg.num_subcarriers()
            ),
        ));
    }
    Ok((cfg.ratio(1)? as f64, cfg.ratio(2)? as f64))
}

/// Evaluates every closed-form term with lags `1..=span`.
pub fn compute_terms(cfg: &CarrierConfig, sigma: f64, span: usize) -> Result<TheoryTerms> {
    let (r1, r2) = two_ratios(cfg)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SimError::config("sigma", "must be finite and nonnegative"));
    }
    let p = primitives(r1, r2);
    let tc = cfg.symbol_period();
    let s = [p.s11, p.s22];
    let lagged = |k: [f64; 2]| {
        k.map(|v| {
            (1..=span)
                .map(|l| (-LN_2 * l as f64).exp() * v * tc)
                .collect::<Vec<_>>()
        })
    };

    let e = [0, 1].map(|n| (1.0 - 2.0 * p.a[n] + s[n]) * tc);
    let b = (1.0 - p.a[0] - p.a[1] + p.s12) * tc;
    let q = [0, 1].map(|n| (s[n] - p.a[n]) * tc);
    let c = [0, 1].map(|n| (p.s12 - p.a[n]) * tc);
    let delta2 = [p.s12 / (1.0 - (-LN_2).exp()) * tc; 2];
    let self_isi = lagged([0, 1].map(|n| p.a[n] - 0.5 * s[n]));
    let b_fut = lagged([0, 1].map(|n| -0.5 * s[n]));
    let x = lagged([0, 1].map(|n| p.a[n] - 0.5 * p.s12));
    let y = lagged([-0.5 * p.s12; 2]);
    let zc = e[0] + e[1] + 2.0 * b;
    Ok(TheoryTerms {
        e,
        i: self_isi.clone(),
        b_cross: [b, b],
        delta2,
        q,
        a: self_isi,
        b_fut,
        c,
        x,
        y,
        sigma,
        xi_isi: 0.0,
        phi: [0.0, 0.0],
        delta_threshold: 0.5 * zc,
    })
}

/// Matched-filter cross ISI `∫ p_n(τ) p_k(τ - L T_c) dτ` for `k ≠ n`.
///
/// Dropped from the error probabilities; kept to show it is small against
/// the same-instant cross term.
pub fn cross_isi_mf(cfg: &CarrierConfig, n: usize, lag: i32) -> Result<f64> {
    let (r1, r2) = two_ratios(cfg)?;
    if !(n == 1 || n == 2) || lag == 0 {
        return Err(SimError::config(
            "lag",
            "need n in {1, 2} and a nonzero lag",
        ));
    }
    let p = primitives(r1, r2);
    let k = 2 - n;
    // the kernel whose tail overlaps the other pulse sets which a_n appears
    let tail = if lag > 0 { k } else { n - 1 };
    let l = lag.unsigned_abs() as f64;
    Ok((-LN_2 * l).exp() * (p.a[tail] - 0.5 * p.s12) * cfg.symbol_period())
}

/// Continuous-time noise deviation `σ = sqrt(N0 / 2)` with `Eb = (E_1 + E_2) / 2`.
pub fn sigma_for_eb_n0(terms: &TheoryTerms, eb_n0_db: f64) -> f64 {
    let eb = 0.5 * (terms.e[0] + terms.e[1]);
    (eb / 10f64.powf(eb_n0_db / 10.0) / 2.0).sqrt()
}

/// `num / den`, with `σ = 0` mapped to `±∞` (and exact ties to zero).
fn scaled(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

fn half_erfc(x: f64) -> f64 {
    0.5 * erfc(x)
}

/// `P_M1 .. P_M6` for one value of `Ξ`.
pub fn mf_components(t: &TheoryTerms, xi: f64, formulas: Formulas) -> [f64; 6] {
    let [e1, e2] = t.e;
    let zc = e1 + e2 + t.b_cross[0] + t.b_cross[1];
    let h = t.delta_threshold / 2.0;
    let den = 2f64.sqrt() * (e1 + e2).sqrt() * t.sigma;
    let arg = |num: f64| scaled(num, den);
    let m6 = match formulas {
        Formulas::Corrected => half_erfc(arg(zc - xi + h)),
        Formulas::AsPrinted => half_erfc(arg(-zc + xi + h)),
    };
    [
        half_erfc(arg(e1 - e2 - xi + h)),
        half_erfc(arg(-e1 + e2 - xi + h)),
        0.25 * (erfc(arg(zc + xi - h)) - erfc(arg(zc + xi + h))),
        0.25 * (erfc(arg(-zc + xi - h)) - erfc(arg(-zc + xi + h))),
        half_erfc(arg(zc + xi + h)),
        m6,
    ]
}

/// `P_C1, P_C2` for one pair `Φ_1, Φ_2`.
pub fn cf_components(t: &TheoryTerms, phi: [f64; 2], formulas: Formulas) -> [f64; 2] {
    let [q1, q2] = t.q;
    let [c1, c2] = t.c;
    let den = 2f64.sqrt() * (q1 + q2).sqrt() * t.sigma;
    let arg = |num: f64| scaled(num, den);
    let (g1, g2) = match formulas {
        Formulas::Corrected => (q1 + q2, q1 + q2),
        Formulas::AsPrinted => (q1 - q2, -q1 + q2),
    };
    [
        half_erfc(arg(g1 - c1 - c2 + phi[0] - phi[1])),
        half_erfc(arg(g2 - c1 - c2 - phi[0] + phi[1])),
    ]
}

/// Random neighbour patterns: per pattern and per lag, the past and future
/// symbols of both subcarriers, drawn in that order so a shorter span is a
/// prefix of a longer one.
fn patterns(span: usize, count: usize, seed: u64) -> Vec<Vec<[f64; 4]>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..span)
                .map(|_| [0; 4].map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }))
                .collect()
        })
        .collect()
}

fn isi_sums(t: &TheoryTerms, pat: &[[f64; 4]]) -> (f64, [f64; 2]) {
    let mut xi = 0.0;
    let mut phi = [0.0; 2];
    // pat[l] = [s1 past, s2 past, s1 future, s2 future] at lag l + 1
    for (l, s) in pat.iter().enumerate() {
        for n in 0..2 {
            let k = 1 - n;
            xi += (s[n] + s[n + 2]) * t.i[n][l];
            phi[n] += s[n] * t.a[n][l]
                + s[n + 2] * t.b_fut[n][l]
                + s[k] * t.x[n][l]
                + s[k + 2] * t.y[n][l];
        }
    }
    (xi, phi)
}

/// Evaluates `P_CPOMF`, `P_CPOCF` and `P_e` at the noise level in `terms`.
pub fn evaluate(terms: &TheoryTerms, policy: PatternPolicy, formulas: Formulas) -> TheoryPoint {
    let zc = terms.e[0] + terms.e[1] + terms.b_cross[0] + terms.b_cross[1];
    let (p_mf, p_cf) = match policy {
        PatternPolicy::Zero | PatternPolicy::Fixed => {
            let (xi, phi) = match policy {
                PatternPolicy::Fixed => (terms.xi_isi, terms.phi),
                _ => (0.0, [0.0; 2]),
            };
            let mut t = terms.clone();
            t.delta_threshold = 0.5 * (zc + xi);
            let m: f64 = mf_components(&t, xi, formulas).iter().sum();
            let c: f64 = cf_components(&t, phi, formulas).iter().sum();
            (0.25 * m, 0.25 * c)
        }
        PatternPolicy::Expectation { patterns: r, seed } => {
            let span = terms.i[0].len();
            let pats = patterns(span, r.max(1), seed);
            let sums: Vec<(f64, [f64; 2])> = pats.iter().map(|p| isi_sums(terms, p)).collect();
            let mean_xi = sums.iter().map(|s| s.0).sum::<f64>() / sums.len() as f64;
            let mut t = terms.clone();
            t.delta_threshold = 0.5 * (zc + mean_xi);
            let (mut m, mut c) = (0.0, 0.0);
            for (xi, phi) in &sums {
                m += mf_components(&t, *xi, formulas).iter().sum::<f64>();
                c += cf_components(&t, *phi, formulas).iter().sum::<f64>();
            }
            let k = sums.len() as f64;
            (0.25 * m / k, 0.25 * c / k)
        }
    };
    TheoryPoint {
        eb_n0_db: f64::NAN,
        sigma: terms.sigma,
        p_cpomf: p_mf,
        p_cpocf: p_cf,
        p_e: combine(p_mf, p_cf),
    }
}

/// `P_e = P_MF P_CF + (1 - P_MF) P_CF + P_MF (1 - P_CF)`.
pub fn combine(p_mf: f64, p_cf: f64) -> f64 {
    p_mf * p_cf + (1.0 - p_mf) * p_cf + p_mf * (1.0 - p_cf)
}

pub fn p_cpomf(terms: &TheoryTerms, policy: PatternPolicy) -> f64 {
    evaluate(terms, policy, Formulas::Corrected).p_cpomf
}

pub fn p_cpocf(terms: &TheoryTerms, policy: PatternPolicy) -> f64 {
    evaluate(terms, policy, Formulas::Corrected).p_cpocf
}

/// `P_e` for a carrier at noise deviation `sigma`.
pub fn p_e(cfg: &CarrierConfig, sigma: f64, policy: PatternPolicy, span: usize) -> Result<f64> {
    Ok(evaluate(
        &compute_terms(cfg, sigma, span)?,
        policy,
        Formulas::Corrected,
    )
    .p_e)
}

/// Theory curve over an Eb/N0 grid in dB.
pub fn ber_curve(
    cfg: &CarrierConfig,
    grid_db: &[f64],
    policy: PatternPolicy,
    span: usize,
) -> Result<Vec<TheoryPoint>> {
    let base = compute_terms(cfg, 0.0, span)?;
    Ok(grid_db
        .iter()
        .map(|&db| {
            let mut t = base.clone();
            t.sigma = sigma_for_eb_n0(&base, db);
            TheoryPoint {
                eb_n0_db: db,
                ..evaluate(&t, policy, Formulas::Corrected)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(r1: u32, r2: u32) -> CarrierConfig {
        CarrierConfig::new(1.0, 2, 16.0)
            .unwrap()
            .with_base_freqs(vec![r1 as f64, r2 as f64])
            .unwrap()
    }

    #[test]
    fn reference_values() {
        let t = compute_terms(&unit(1, 2), 0.1, 5).unwrap();
        assert!((t.e[0] - 1.343327).abs() < 1e-6);
        assert!((t.e[1] - 1.356298).abs() < 1e-6);
        assert!((t.b_cross[0] - 0.997231).abs() < 1e-6);
        assert!((t.q[0] - 0.360674).abs() < 1e-6);
        assert!((t.i[0][0] + 0.085832).abs() < 1e-6);
        assert!((t.b_fut[0][0] + 0.094505).abs() < 1e-6);
    }

    #[test]
    fn requires_two_subcarriers() {
        let c = CarrierConfig::new(1.0, 3, 16.0).unwrap();
        assert!(compute_terms(&c, 0.1, 5).is_err());
    }

    #[test]
    fn terms_scale_with_symbol_period() {
        let a = compute_terms(&unit(1, 2), 0.1, 3).unwrap();
        let c = CarrierConfig::new(0.5, 2, 8.0).unwrap();
        let b = compute_terms(&c, 0.1, 3).unwrap();
        assert!((b.e[0] - 2.0 * a.e[0]).abs() < 1e-12);
        assert!((b.y[1][2] - 2.0 * a.y[1][2]).abs() < 1e-12);
    }

    #[test]
    fn isi_decays_geometrically() {
        let t = compute_terms(&unit(1, 3), 0.1, 30).unwrap();
        for v in [&t.i[0], &t.a[1], &t.b_fut[0], &t.x[1], &t.y[0]] {
            for l in 1..v.len() {
                assert!((v[l] / v[l - 1] - 0.5).abs() < 1e-12);
            }
        }
        assert!(t.i[0][29].abs() < 1e-9);
    }

    #[test]
    fn m1_at_zero_isi() {
        let t = compute_terms(&unit(1, 2), 0.3, 4).unwrap();
        let m = mf_components(&t, 0.0, Formulas::Corrected);
        let den = 2f64.sqrt() * (t.e[0] + t.e[1]).sqrt() * 0.3;
        let expect = 0.5 * erfc((t.e[0] - t.e[1] + t.delta_threshold / 2.0) / den);
        assert!((m[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn printed_cf_symmetric_reduction() {
        let mut t = compute_terms(&unit(1, 2), 0.3, 4).unwrap();
        t.q = [0.4, 0.4];
        let p = cf_components(&t, [0.1, 0.1], Formulas::AsPrinted);
        let den = 2f64.sqrt() * 0.8f64.sqrt() * 0.3;
        let expect = 0.5 * erfc((-t.c[0] - t.c[1]) / den);
        assert!((p[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn vanishing_noise() {
        let t = compute_terms(&unit(1, 2), 1e-6, 20).unwrap();
        let pt = evaluate(&t, PatternPolicy::default(), Formulas::Corrected);
        assert!(pt.p_cpomf < 1e-12 && pt.p_cpocf < 1e-12 && pt.p_e < 1e-12);
        // the printed arguments do not vanish
        let printed = evaluate(&t, PatternPolicy::Zero, Formulas::AsPrinted);
        assert!(printed.p_cpocf > 0.2);
        let z = compute_terms(&unit(1, 2), 0.0, 20).unwrap();
        assert_eq!(
            evaluate(&z, PatternPolicy::Zero, Formulas::Corrected).p_e,
            0.0
        );
    }

    #[test]
    fn combine_limits() {
        assert_eq!(combine(0.0, 0.3), 0.3);
        assert_eq!(combine(0.2, 0.0), 0.2);
    }

    #[test]
    fn probabilities_bounded_and_monotone() {
        let cfg = unit(1, 2);
        for policy in [
            PatternPolicy::Zero,
            PatternPolicy::Expectation {
                patterns: 200,
                seed: 1,
            },
        ] {
            let mut prev = 0.0;
            for k in 0..40 {
                let sigma = 1e-3 * 10f64.powf(k as f64 / 10.0);
                let t = compute_terms(&cfg, sigma, 20).unwrap();
                let pt = evaluate(&t, policy, Formulas::Corrected);
                for p in mf_components(&t, 0.0, Formulas::Corrected)
                    .into_iter()
                    .chain(cf_components(&t, [0.0, 0.0], Formulas::Corrected))
                    .chain([pt.p_cpomf, pt.p_cpocf, pt.p_e])
                {
                    assert!((0.0..=1.0).contains(&p));
                }
                assert!(pt.p_cpocf <= 0.5);
                assert!(pt.p_e >= prev - 1e-15, "sigma {sigma}: {} < {prev}", pt.p_e);
                prev = pt.p_e;
            }
        }
    }

    #[test]
    fn pattern_prefix_property() {
        let short = patterns(5, 3, 9);
        let long = patterns(12, 3, 9);
        for (s, l) in short.iter().zip(&long) {
            assert_eq!(&l[..5], &s[..]);
        }
    }
}
