//! Receiver: matched and correlation filter banks, slot sampling, the
//! averaging/decision-line bit counter and the sort-based bit assignment.
//!
//! Filtering is realized as Riemann sums (`1/fs` times a discrete
//! convolution). The sample taken for slot `m` is the zero-lag correlation of
//! the received signal with the slot's basis function; the filtered
//! waveforms are re-timed so that this value sits at `T_c (m - 1) + T_c / 2`.

use serde::{Deserialize, Serialize};

use crate::basis::{make_bank, CarrierConfig, FilterKind};
use crate::error::{ensure_finite, Result, SimError};
use crate::tx::{BitFrame, Waveform};

/// `N x M` filter-bank samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub kind: FilterKind,
}

impl SampleMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, kind: FilterKind) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(SimError::dimension(
                "sample matrix rows must be nonempty and equal length",
            ));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        ensure_finite(&values, "sample matrix")?;
        Ok(SampleMatrix {
            rows: n,
            cols: m,
            values,
            kind,
        })
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[n * self.cols + m]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.cols..(n + 1) * self.cols]
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        (0..self.rows).map(|n| self.get(n, m)).collect()
    }
}

/// Bit-count decision for one slot. `d_index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub slot: usize,
    pub d_index: usize,
    pub n_plus: usize,
    pub n_minus: usize,
}

/// How the decision-line scale `Δ` is obtained from a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaRule {
    /// `Δ = max |ξ̄|`.
    Literal,
    /// `Δ = max |ξ̄| · N / k`, where `k` is the largest per-slot imbalance
    /// `|N_+ - N_-|` the frame actually contains. `k` is the candidate whose
    /// `Δ` lies closest (in log scale) to a level predicted from the
    /// correlation-bank magnitudes. Reduces to `Literal` whenever some slot
    /// carries all-equal bits.
    #[default]
    Anchored,
}

fn check_rate(r: &Waveform, cfg: &CarrierConfig) -> Result<()> {
    if (r.sample_rate - cfg.sample_rate()).abs() > 1e-9 * cfg.sample_rate() {
        return Err(SimError::config(
            "sample_rate",
            format!(
                "waveform sampled at {} Hz, carrier expects {} Hz",
                r.sample_rate,
                cfg.sample_rate()
            ),
        ));
    }
    Ok(())
}

fn convolve(x: &[f64], h: &[f64], scale: f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let a = xi * scale;
        for (yk, hk) in y[i..i + h.len()].iter_mut().zip(h) {
            *yk += a * hk;
        }
    }
    y
}

fn filter_bank(r: &Waveform, cfg: &CarrierConfig, kind: FilterKind) -> Result<Vec<Waveform>> {
    check_rate(r, cfg)?;
    let sps = cfg.samples_per_symbol();
    let mid = sps / 2;
    let scale = 1.0 / cfg.sample_rate();
    // convolving with the reversed taps puts slot m's zero-lag correlation at
    // index symbol_offset + m sps + sps
    make_bank(kind, cfg)
        .into_iter()
        .map(|t| {
            let mut h = t.taps;
            h.reverse();
            Ok(Waveform {
                samples: convolve(&r.samples, &h, scale),
                sample_rate: r.sample_rate,
                symbol_offset: r.symbol_offset + sps - mid,
            })
        })
        .collect()
}

/// Outputs `ξ_n(t)` of the matched filters `g_n(t) = p_n(-t)`.
pub fn matched_filter_bank(r: &Waveform, cfg: &CarrierConfig) -> Result<Vec<Waveform>> {
    filter_bank(r, cfg, FilterKind::Shaping)
}

/// Outputs `y_n(t)`: the received signal correlated against `o_n`.
pub fn correlation_filter_waveforms(r: &Waveform, cfg: &CarrierConfig) -> Result<Vec<Waveform>> {
    filter_bank(r, cfg, FilterKind::Correlation)
}

/// Picks the sample nearest `T_c (m - 1) + T_c / 2` for `m = 1..=M`.
pub fn sample_at_slots(w: &Waveform, cfg: &CarrierConfig, m: usize) -> Result<Vec<f64>> {
    let sps = cfg.samples_per_symbol();
    let first = w.symbol_offset + sps / 2;
    let last = first + m.saturating_sub(1) * sps;
    if m == 0 || last >= w.len() {
        return Err(SimError::dimension(format!(
            "{m} slots need {} samples, waveform has {}",
            last + 1,
            w.len()
        )));
    }
    Ok((0..m).map(|k| w.samples[first + k * sps]).collect())
}

fn sample_bank(
    ws: &[Waveform],
    cfg: &CarrierConfig,
    m: usize,
    kind: FilterKind,
) -> Result<SampleMatrix> {
    let rows = ws
        .iter()
        .map(|w| sample_at_slots(w, cfg, m))
        .collect::<Result<Vec<_>>>()?;
    SampleMatrix::from_rows(rows, kind)
}

/// `ξ_{n,m}` via full convolution followed by slot sampling.
pub fn matched_samples(r: &Waveform, cfg: &CarrierConfig, m: usize) -> Result<SampleMatrix> {
    sample_bank(&matched_filter_bank(r, cfg)?, cfg, m, FilterKind::Matched)
}

/// `y_{n,m}` via full convolution followed by slot sampling.
pub fn correlation_filter_bank(
    r: &Waveform,
    cfg: &CarrierConfig,
    m: usize,
) -> Result<SampleMatrix> {
    sample_bank(
        &correlation_filter_waveforms(r, cfg)?,
        cfg,
        m,
        FilterKind::Correlation,
    )
}

/// Column means `ξ̄_m = (1/N) Σ_n ξ_{n,m}`.
pub fn average_rows(xi: &SampleMatrix) -> Result<Vec<f64>> {
    if xi.kind != FilterKind::Matched {
        return Err(SimError::config(
            "kind",
            "averaging applies to matched-filter samples",
        ));
    }
    let n = xi.rows as f64;
    Ok((0..xi.cols)
        .map(|m| (0..xi.rows).map(|r| xi.get(r, m)).sum::<f64>() / n)
        .collect())
}

/// `L_i = (1 - 2(i - 1)/N) Δ` for `i = 1..=N+1`.
pub fn lines_for_delta(delta: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| (1.0 - 2.0 * i as f64 / n as f64) * delta)
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Decision lines with the literal scale `Δ = max |ξ̄|`.
pub fn decision_lines(xi_bar: &[f64], n: usize) -> Result<Vec<f64>> {
    if xi_bar.is_empty() || n == 0 {
        return Err(SimError::dimension(
            "need a nonempty average vector and N >= 1",
        ));
    }
    let delta = max_abs(xi_bar);
    if delta == 0.0 {
        return Err(SimError::numeric(
            "all averaged samples are zero; Δ is degenerate",
        ));
    }
    Ok(lines_for_delta(delta, n))
}

/// Nearest line wins; ties go to the smaller index.
pub fn classify_slot(xi_bar_m: f64, lines: &[f64], slot: usize) -> SlotDecision {
    let n = lines.len() - 1;
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, l) in lines.iter().enumerate() {
        let d = (l - xi_bar_m).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    SlotDecision {
        slot,
        d_index: best + 1,
        n_plus: n - best,
        n_minus: best,
    }
}

/// Gives `+1` to the `n_plus` largest correlation outputs (ties to the lower
/// subcarrier index) and `-1` to the rest, in subcarrier order.
pub fn sort_assign(y_col: &[f64], decision: &SlotDecision) -> Vec<i8> {
    let mut order: Vec<usize> = (0..y_col.len()).collect();
    order.sort_by(|&a, &b| y_col[b].total_cmp(&y_col[a]).then(a.cmp(&b)));
    let mut out = vec![-1i8; y_col.len()];
    for &i in order.iter().take(decision.n_plus) {
        out[i] = 1;
    }
    out
}

/// Single-subcarrier matched-filter slicer: `ξ >= 0` decodes as `+1`.
pub fn sign_slice(xi_row: &[f64]) -> Vec<i8> {
    xi_row
        .iter()
        .map(|&x| if x >= 0.0 { 1 } else { -1 })
        .collect()
}

/// Everything the decoder computed for one frame.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub frame: BitFrame,
    pub xi: SampleMatrix,
    pub y: SampleMatrix,
    pub xi_bar: Vec<f64>,
    pub delta: f64,
    pub decisions: Vec<SlotDecision>,
}

/// Reusable receiver holding the filter banks for one carrier configuration.
#[derive(Debug, Clone)]
pub struct Demodulator {
    cfg: CarrierConfig,
    shaping: Vec<Vec<f64>>,
    correlation: Vec<Vec<f64>>,
    kappa: f64,
    rule: DeltaRule,
}

impl Demodulator {
    pub fn new(cfg: &CarrierConfig) -> Self {
        Self::with_rule(cfg, DeltaRule::default())
    }

    pub fn with_rule(cfg: &CarrierConfig, rule: DeltaRule) -> Self {
        let shaping: Vec<Vec<f64>> = make_bank(FilterKind::Shaping, cfg)
            .into_iter()
            .map(|t| t.taps)
            .collect();
        let correlation: Vec<Vec<f64>> = make_bank(FilterKind::Correlation, cfg)
            .into_iter()
            .map(|t| t.taps)
            .collect();
        let fs = cfg.sample_rate();
        let n = shaping.len() as f64;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / fs;
        // noiseless ξ̄ of an all-(+1) slot, ignoring ISI
        let mut delta_ref = 0.0;
        for a in &shaping {
            for b in &shaping {
                delta_ref += dot(a, b);
            }
        }
        delta_ref /= n;
        // mean self response of the correlation bank
        let y_ref = shaping
            .iter()
            .zip(&correlation)
            .map(|(p, o)| dot(p, o))
            .sum::<f64>()
            / n;
        Demodulator {
            cfg: cfg.clone(),
            shaping,
            correlation,
            kappa: delta_ref / y_ref,
            rule,
        }
    }

    pub fn config(&self) -> &CarrierConfig {
        &self.cfg
    }

    pub fn rule(&self) -> DeltaRule {
        self.rule
    }

    /// `ξ_{n,m}` and `y_{n,m}` computed directly as slot dot products.
    pub fn sample(&self, r: &Waveform, m: usize) -> Result<(SampleMatrix, SampleMatrix)> {
        check_rate(r, &self.cfg)?;
        if m == 0 {
            return Err(SimError::dimension("need at least one slot"));
        }
        let sps = self.cfg.samples_per_symbol() as isize;
        let origin = (self.cfg.tail_symbols() * self.cfg.samples_per_symbol()) as isize;
        let len = self.shaping[0].len() as isize;
        // same reach as sampling the full convolution output
        let last_needed = r.symbol_offset as isize + m as isize * sps;
        if last_needed >= r.len() as isize + len - 1 {
            return Err(SimError::dimension(format!(
                "waveform of {} samples is too short for {m} slots",
                r.len()
            )));
        }
        let scale = 1.0 / self.cfg.sample_rate();
        let n = self.shaping.len();
        let mut xi = vec![0.0; n * m];
        let mut y = vec![0.0; n * m];
        let x = &r.samples;
        for slot in 0..m {
            let base = r.symbol_offset as isize + slot as isize * sps - origin;
            let lo = (-base).max(0);
            let hi = (x.len() as isize - base).min(len);
            if hi <= lo {
                continue;
            }
            let seg = &x[(base + lo) as usize..(base + hi) as usize];
            for sub in 0..n {
                let p = &self.shaping[sub][lo as usize..hi as usize];
                let o = &self.correlation[sub][lo as usize..hi as usize];
                let (mut sp, mut so) = (0.0, 0.0);
                for ((xv, pv), ov) in seg.iter().zip(p).zip(o) {
                    sp += xv * pv;
                    so += xv * ov;
                }
                xi[sub * m + slot] = sp * scale;
                y[sub * m + slot] = so * scale;
            }
        }
        ensure_finite(&xi, "matched-filter samples")?;
        ensure_finite(&y, "correlation samples")?;
        Ok((
            SampleMatrix {
                rows: n,
                cols: m,
                values: xi,
                kind: FilterKind::Matched,
            },
            SampleMatrix {
                rows: n,
                cols: m,
                values: y,
                kind: FilterKind::Correlation,
            },
        ))
    }

    /// The decision-line scale for one frame under the configured rule.
    pub fn estimate_delta(&self, xi_bar: &[f64], y: &SampleMatrix) -> Result<f64> {
        let n = self.shaping.len();
        let peak = max_abs(xi_bar);
        if peak == 0.0 {
            return Err(SimError::numeric(
                "all averaged samples are zero; Δ is degenerate",
            ));
        }
        if self.rule == DeltaRule::Literal || n <= 2 {
            return Ok(peak);
        }
        let anchor =
            self.kappa * y.values.iter().map(|v| v.abs()).sum::<f64>() / y.values.len() as f64;
        if !(anchor > 0.0) {
            return Ok(peak);
        }
        let target = anchor.ln();
        let mut best = (f64::INFINITY, peak);
        // k = N, N-2, ... >= 1 are the imbalances a slot can have
        let mut k = n;
        loop {
            let d = peak * n as f64 / k as f64;
            let dist = (d.ln() - target).abs();
            if dist < best.0 {
                best = (dist, d);
            }
            if k <= 2 {
                break;
            }
            k -= 2;
        }
        Ok(best.1)
    }

    /// Combines already-sampled bank outputs into a decoded frame.
    pub fn decide(&self, xi: SampleMatrix, y: SampleMatrix) -> Result<Decoded> {
        let n = xi.rows;
        let m = xi.cols;
        let xi_bar = average_rows(&xi)?;
        let delta = self.estimate_delta(&xi_bar, &y)?;
        let lines = lines_for_delta(delta, n);
        let mut flat = vec![0i8; n * m];
        let mut decisions = Vec::with_capacity(m);
        for (slot, &xb) in xi_bar.iter().enumerate() {
            let d = classify_slot(xb, &lines, slot + 1);
            let bits = sort_assign(&y.column(slot), &d);
            debug_assert_eq!(bits.iter().filter(|&&b| b > 0).count(), d.n_plus);
            for (sub, b) in bits.into_iter().enumerate() {
                flat[sub * m + slot] = b;
            }
            decisions.push(d);
        }
        Ok(Decoded {
            frame: BitFrame::from_flat(n, m, flat)?,
            xi,
            y,
            xi_bar,
            delta,
            decisions,
        })
    }

    pub fn demodulate_detailed(&self, r: &Waveform, m: usize) -> Result<Decoded> {
        let (xi, y) = self.sample(r, m)?;
        self.decide(xi, y)
    }

    pub fn demodulate(&self, r: &Waveform, m: usize) -> Result<BitFrame> {
        Ok(self.demodulate_detailed(r, m)?.frame)
    }
}

/// Full receiver pipeline with the default `Δ` rule.
pub fn demodulate(r: &Waveform, cfg: &CarrierConfig, m: usize) -> Result<BitFrame> {
    Demodulator::new(cfg).demodulate(r, m)
}
