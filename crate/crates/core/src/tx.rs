//! Transmitter: serial/parallel mapping, subcarrier synthesis and the
//! optional carrier mixer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{make_taps, CarrierConfig, FilterKind};
use crate::error::{ensure_finite, Result, SimError};

/// `N x M` matrix of `±1` symbols, row `n` belonging to subcarrier `n + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitFrame {
    rows: usize,
    cols: usize,
    symbols: Vec<i8>,
}

impl BitFrame {
    /// Builds a frame from row vectors; every entry must be `+1` or `-1`.
    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(SimError::dimension("frame needs at least one row"));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(SimError::dimension("frame needs at least one slot"));
        }
        let mut symbols = Vec::with_capacity(n * m);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != m {
                return Err(SimError::dimension(format!(
                    "row {i} has {} slots, expected {m}",
                    r.len()
                )));
            }
            symbols.extend(r);
        }
        Self::from_flat(n, m, symbols)
    }

    /// Row-major storage: entry `(n, m)` lives at `n * cols + m`.
    pub fn from_flat(rows: usize, cols: usize, symbols: Vec<i8>) -> Result<Self> {
        if rows == 0 || cols == 0 || symbols.len() != rows * cols {
            return Err(SimError::dimension(format!(
                "{} symbols do not fill a {rows}x{cols} frame",
                symbols.len()
            )));
        }
        if let Some(i) = symbols.iter().position(|&s| s != 1 && s != -1) {
            return Err(SimError::config(
                "frame",
                format!("symbol {} at flat index {i} is not ±1", symbols[i]),
            ));
        }
        Ok(BitFrame {
            rows,
            cols,
            symbols,
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.rows
    }

    /// Slots per subcarrier, `M`.
    pub fn len(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, n: usize, m: usize) -> i8 {
        self.symbols[n * self.cols + m]
    }

    pub fn row(&self, n: usize) -> &[i8] {
        &self.symbols[n * self.cols..(n + 1) * self.cols]
    }

    pub fn as_flat(&self) -> &[i8] {
        &self.symbols
    }

    pub fn negated(&self) -> BitFrame {
        BitFrame {
            symbols: self.symbols.iter().map(|s| -s).collect(),
            ..self.clone()
        }
    }

    /// Number of positions where the two frames differ.
    pub fn count_errors(&self, other: &BitFrame) -> Result<usize> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(SimError::dimension(format!(
                "cannot compare {}x{} with {}x{} frame",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self
            .symbols
            .iter()
            .zip(&other.symbols)
            .filter(|(a, b)| a != b)
            .count())
    }
}

/// Uniformly sampled real signal.
///
/// `symbol_offset` is the sample index where slot `m = 1` begins, so the
/// continuous time of sample `i` is `(i - symbol_offset) / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub symbol_offset: usize,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64, symbol_offset: usize) -> Result<Self> {
        ensure_finite(&samples, "waveform")?;
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SimError::config(
                "sample_rate",
                "must be positive and finite",
            ));
        }
        Ok(Waveform {
            samples,
            sample_rate,
            symbol_offset,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Σ x² / fs`, the Riemann-sum energy.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.sample_rate
    }

    pub fn time_of(&self, i: usize) -> f64 {
        (i as f64 - self.symbol_offset as f64) / self.sample_rate
    }
}

/// Distributes bit `i` to subcarrier `i mod N`, slot `i / N`.
pub fn serial_to_parallel(bits: &[i8], n: usize) -> Result<BitFrame> {
    if n == 0 {
        return Err(SimError::config("num_subcarriers", "must be positive"));
    }
    if bits.is_empty() || bits.len() % n != 0 {
        return Err(SimError::dimension(format!(
            "{} bits cannot be split evenly over {n} subcarriers",
            bits.len()
        )));
    }
    let m = bits.len() / n;
    let mut flat = vec![0i8; bits.len()];
    for (i, &b) in bits.iter().enumerate() {
        flat[(i % n) * m + i / n] = b;
    }
    BitFrame::from_flat(n, m, flat)
}

/// Inverse of [`serial_to_parallel`].
pub fn parallel_to_serial(frame: &BitFrame) -> Vec<i8> {
    let (n, m) = (frame.num_subcarriers(), frame.len());
    let mut out = Vec::with_capacity(n * m);
    for slot in 0..m {
        for sub in 0..n {
            out.push(frame.get(sub, slot));
        }
    }
    out
}

/// Length of a transmitted frame of `m` slots: `(2K + M) sps + 1`.
///
/// The first `K sps` samples hold the leading tails, slot 1 starts at
/// `K sps`, and the last `K sps` samples are a trailing guard.
pub fn frame_len(cfg: &CarrierConfig, m: usize) -> usize {
    (2 * cfg.tail_symbols() + m) * cfg.samples_per_symbol() + 1
}

fn synthesize(acc: &mut [f64], row: &[i8], taps: &[f64], sps: usize) {
    for (m, &s) in row.iter().enumerate() {
        let start = m * sps;
        let dst = &mut acc[start..start + taps.len()];
        if s > 0 {
            dst.iter_mut().zip(taps).for_each(|(d, t)| *d += t);
        } else {
            dst.iter_mut().zip(taps).for_each(|(d, t)| *d -= t);
        }
    }
}

/// One subcarrier's output `u_n(t)`: the `±1` impulse train convolved with
/// the shaping taps of subcarrier `n` (1-based).
pub fn modulate_subcarrier(row: &[i8], n: usize, cfg: &CarrierConfig) -> Result<Waveform> {
    if row.is_empty() {
        return Err(SimError::dimension("empty symbol row"));
    }
    if row.iter().any(|&s| s != 1 && s != -1) {
        return Err(SimError::config("frame", "symbols must be ±1"));
    }
    let taps = make_taps(FilterKind::Shaping, n, cfg)?;
    let sps = cfg.samples_per_symbol();
    let mut acc = vec![0.0; frame_len(cfg, row.len())];
    synthesize(&mut acc, row, &taps.taps, sps);
    Ok(Waveform {
        samples: acc,
        sample_rate: cfg.sample_rate(),
        symbol_offset: cfg.tail_symbols() * sps,
    })
}

/// Sum of all subcarrier outputs with unit weights.
pub fn transmit(frame: &BitFrame, cfg: &CarrierConfig) -> Result<Waveform> {
    if frame.num_subcarriers() != cfg.num_subcarriers() {
        return Err(SimError::dimension(format!(
            "frame has {} rows but the carrier has {} subcarriers",
            frame.num_subcarriers(),
            cfg.num_subcarriers()
        )));
    }
    let sps = cfg.samples_per_symbol();
    let mut acc = vec![0.0; frame_len(cfg, frame.len())];
    for n in 0..frame.num_subcarriers() {
        let taps = make_taps(FilterKind::Shaping, n + 1, cfg)?;
        synthesize(&mut acc, frame.row(n), &taps.taps, sps);
    }
    Ok(Waveform {
        samples: acc,
        sample_rate: cfg.sample_rate(),
        symbol_offset: cfg.tail_symbols() * sps,
    })
}

/// Mixes up to `fc`: `x(t) cos(2π fc t)` on the waveform's own time grid.
///
/// `baseband_bw` is the one-sided bandwidth of `w`; the product must stay
/// below Nyquist.
pub fn upconvert(w: &Waveform, fc: f64, baseband_bw: f64) -> Result<Waveform> {
    if !(fc >= 0.0 && fc.is_finite()) {
        return Err(SimError::config(
            "passband.carrier_freq",
            "must be nonnegative",
        ));
    }
    if fc > 0.0 && fc + baseband_bw >= w.sample_rate / 2.0 {
        return Err(SimError::config(
            "passband.carrier_freq",
            format!(
                "fc + bandwidth = {} Hz aliases at fs = {} Hz",
                fc + baseband_bw,
                w.sample_rate
            ),
        ));
    }
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| x * (2.0 * PI * fc * w.time_of(i)).cos())
        .collect();
    Ok(Waveform {
        samples,
        ..w.clone()
    })
}

/// Windowed-sinc low-pass (Blackman), odd length, unity DC gain.
pub fn lowpass_taps(cutoff: f64, sample_rate: f64, len: usize) -> Vec<f64> {
    let len = len | 1;
    let mid = (len / 2) as f64;
    let fc = cutoff / sample_rate;
    let mut h: Vec<f64> = (0..len)
        .map(|k| {
            let x = k as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let a = 2.0 * PI * k as f64 / (len - 1) as f64;
            sinc * (0.42 - 0.5 * a.cos() + 0.08 * (2.0 * a).cos())
        })
        .collect();
    let g: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= g);
    h
}

/// Coherent down-mixer: multiplies by `2 cos(2π fc t)` and low-passes at
/// `cutoff`, compensating the filter's group delay so alignment is kept.
pub fn downconvert(w: &Waveform, fc: f64, cutoff: f64) -> Result<Waveform> {
    if !(cutoff > 0.0 && cutoff < w.sample_rate / 2.0) {
        return Err(SimError::config(
            "passband.lowpass_cutoff",
            "must lie in (0, fs/2)",
        ));
    }
    if fc == 0.0 {
        return Ok(w.clone());
    }
    let mixed: Vec<f64> = w
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| 2.0 * x * (2.0 * PI * fc * w.time_of(i)).cos())
        .collect();
    let len = ((16.0 * w.sample_rate / cutoff).ceil() as usize).max(31);
    let h = lowpass_taps(cutoff, w.sample_rate, len);
    let half = h.len() / 2;
    let n = mixed.len();
    let samples = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                // output i is centred on input i
                let j = i as isize + half as isize - k as isize;
                if j >= 0 && (j as usize) < n {
                    acc += hk * mixed[j as usize];
                }
            }
            acc
        })
        .collect();
    Ok(Waveform {
        samples,
        ..w.clone()
    })
}
