//! Reference modems at the same data rate as the chaotic system: a
//! rectangular-pulse BPSK control, synchronous Walsh-coded CDMA and
//! SRRC-shaped FDMA.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::tx::{BitFrame, Waveform};

pub const DEFAULT_ROLLOFF: f64 = 0.25;
/// SRRC length in symbols (chips for CDMA).
pub const DEFAULT_SPAN: usize = 32;
pub const DEFAULT_SPREADING_GAIN: usize = 16;

/// Unit-energy square-root raised cosine, `span * sps + 1` taps, centred.
pub fn srrc_taps(rolloff: f64, span: usize, sps: usize) -> Vec<f64> {
    let a = rolloff;
    let len = span * sps + 1;
    let mid = (span * sps / 2) as f64;
    let mut h: Vec<f64> = (0..len)
        .map(|k| {
            let t = (k as f64 - mid) / sps as f64;
            if t == 0.0 {
                1.0 - a + 4.0 * a / PI
            } else if ((4.0 * a * t).abs() - 1.0).abs() < 1e-12 {
                let x = PI / (4.0 * a);
                a * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * x.sin() + (1.0 - 2.0 / PI) * x.cos())
            } else {
                ((PI * t * (1.0 - a)).sin() + 4.0 * a * t * (PI * t * (1.0 + a)).cos())
                    / (PI * t * (1.0 - (4.0 * a * t).powi(2)))
            }
        })
        .collect();
    let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    h.iter_mut().for_each(|x| *x /= norm);
    h
}

/// Rows of the order-`p` Sylvester orthogonal matrix (`p` a power of two).
pub fn walsh_codes(p: usize) -> Result<Vec<Vec<i8>>> {
    if p == 0 || !p.is_power_of_two() {
        return Err(SimError::config(
            "spreading_gain",
            format!("{p} is not a power of two"),
        ));
    }
    let mut h = vec![vec![1i8]];
    while h.len() < p {
        let n = h.len();
        let mut next = vec![vec![0i8; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = h[i][j];
                next[i][j + n] = h[i][j];
                next[i + n][j] = h[i][j];
                next[i + n][j + n] = -h[i][j];
            }
        }
        h = next;
    }
    Ok(h)
}

fn check_frame(frame: &BitFrame, users: usize) -> Result<()> {
    if frame.num_subcarriers() != users {
        return Err(SimError::dimension(format!(
            "frame has {} rows for {users} users",
            frame.num_subcarriers()
        )));
    }
    Ok(())
}

fn check_rate(w: &Waveform, fs: f64) -> Result<()> {
    if (w.sample_rate - fs).abs() > 1e-9 * fs {
        return Err(SimError::config(
            "sample_rate",
            "waveform and modem sample rates differ",
        ));
    }
    Ok(())
}

/// `Σ_j x[start + j] h[j]`, treating samples outside the waveform as zero.
fn dot_at(x: &[f64], start: isize, h: &[f64]) -> f64 {
    let lo = (-start).max(0) as usize;
    let hi = ((x.len() as isize - start).max(0) as usize).min(h.len());
    if hi <= lo {
        return 0.0;
    }
    let s = (start + lo as isize) as usize;
    x[s..s + hi - lo]
        .iter()
        .zip(&h[lo..hi])
        .map(|(a, b)| a * b)
        .sum()
}

/// Rectangular NRZ BPSK with an integrate-and-dump receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpskConfig {
    pub samples_per_symbol: usize,
    pub sample_rate: f64,
}

pub fn bpsk_modulate(bits: &[i8], cfg: &BpskConfig) -> Result<Waveform> {
    if cfg.samples_per_symbol == 0 {
        return Err(SimError::config("samples_per_symbol", "must be positive"));
    }
    let samples = bits
        .iter()
        .flat_map(|&b| std::iter::repeat(b as f64).take(cfg.samples_per_symbol))
        .collect();
    Waveform::new(samples, cfg.sample_rate, 0)
}

pub fn bpsk_demodulate(w: &Waveform, cfg: &BpskConfig, nbits: usize) -> Result<Vec<i8>> {
    check_rate(w, cfg.sample_rate)?;
    let sps = cfg.samples_per_symbol;
    if w.symbol_offset + nbits * sps > w.len() {
        return Err(SimError::dimension(
            "waveform too short for the requested bits",
        ));
    }
    Ok((0..nbits)
        .map(|m| {
            let s = w.symbol_offset + m * sps;
            let z: f64 = w.samples[s..s + sps].iter().sum();
            if z >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect())
}

/// Synchronous CDMA: each user's bit is spread over `P` SRRC-shaped chips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdmaConfig {
    pub num_users: usize,
    pub spreading_gain: usize,
    /// Samples per information bit; must be a multiple of the spreading gain.
    pub samples_per_bit: usize,
    pub sample_rate: f64,
    pub rolloff: f64,
    pub span: usize,
}

impl CdmaConfig {
    pub fn new(num_users: usize, samples_per_bit: usize, sample_rate: f64) -> Result<Self> {
        let c = CdmaConfig {
            num_users,
            spreading_gain: DEFAULT_SPREADING_GAIN,
            samples_per_bit,
            sample_rate,
            rolloff: DEFAULT_ROLLOFF,
            span: DEFAULT_SPAN,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.spreading_gain;
        walsh_codes(p)?;
        if self.num_users == 0 || self.num_users + 1 > p {
            return Err(SimError::config(
                "cdma.num_users",
                format!(
                    "{} users need {} codes; order {p} offers {} usable",
                    self.num_users,
                    self.num_users + 1,
                    p - 1
                ),
            ));
        }
        if self.samples_per_bit % p != 0 || self.samples_per_bit / p < 2 {
            return Err(SimError::config(
                "cdma.spreading_gain",
                format!(
                    "{} samples per bit cannot carry {p} chips of at least 2 samples",
                    self.samples_per_bit
                ),
            ));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) || self.span == 0 || self.span % 2 != 0 {
            return Err(SimError::config(
                "cdma.rolloff",
                "need 0 < rolloff <= 1 and an even span",
            ));
        }
        Ok(())
    }

    pub fn samples_per_chip(&self) -> usize {
        self.samples_per_bit / self.spreading_gain
    }

    /// User `u` (0-based) gets row `u + 2` of the orthogonal matrix.
    pub fn codes(&self) -> Vec<Vec<i8>> {
        walsh_codes(self.spreading_gain)
            .expect("validated")
            .into_iter()
            .skip(1)
            .take(self.num_users)
            .collect()
    }

    fn guard(&self) -> usize {
        self.span * self.samples_per_chip() / 2
    }
}

pub fn cdma_modulate(frame: &BitFrame, cfg: &CdmaConfig) -> Result<Waveform> {
    cfg.validate()?;
    check_frame(frame, cfg.num_users)?;
    let codes = cfg.codes();
    let p = cfg.spreading_gain;
    let spc = cfg.samples_per_chip();
    let h = srrc_taps(cfg.rolloff, cfg.span, spc);
    let g = cfg.guard();
    let chips = frame.len() * p;
    let mut out = vec![0.0; chips * spc + 2 * g + 1];
    for k in 0..chips {
        let (m, j) = (k / p, k % p);
        let amp: f64 = (0..cfg.num_users)
            .map(|u| (frame.get(u, m) * codes[u][j]) as f64)
            .sum();
        if amp != 0.0 {
            for (o, hv) in out[k * spc..].iter_mut().zip(&h) {
                *o += amp * hv;
            }
        }
    }
    Waveform::new(out, cfg.sample_rate, g)
}

pub fn cdma_demodulate(w: &Waveform, cfg: &CdmaConfig, m: usize) -> Result<BitFrame> {
    cfg.validate()?;
    check_rate(w, cfg.sample_rate)?;
    let codes = cfg.codes();
    let p = cfg.spreading_gain;
    let spc = cfg.samples_per_chip();
    let h = srrc_taps(cfg.rolloff, cfg.span, spc);
    let g = cfg.guard() as isize;
    let base = w.symbol_offset as isize - g;
    let z: Vec<f64> = (0..m * p)
        .map(|k| dot_at(&w.samples, base + (k * spc) as isize, &h))
        .collect();
    let mut flat = Vec::with_capacity(cfg.num_users * m);
    for code in &codes {
        for slot in 0..m {
            let d: f64 = code
                .iter()
                .zip(&z[slot * p..(slot + 1) * p])
                .map(|(c, v)| *c as f64 * v)
                .sum();
            flat.push(if d >= 0.0 { 1 } else { -1 });
        }
    }
    BitFrame::from_flat(cfg.num_users, m, flat)
}

/// Correlates chips with a code: `Σ_j c_j x_j`.
pub fn despread(chips: &[f64], code: &[i8]) -> f64 {
    chips.iter().zip(code).map(|(x, c)| x * *c as f64).sum()
}

/// Each user on its own real carrier with SRRC-shaped BPSK.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdmaConfig {
    pub num_users: usize,
    pub symbol_rate: f64,
    pub sample_rate: f64,
    pub rolloff: f64,
    pub span: usize,
}

impl FdmaConfig {
    pub fn new(num_users: usize, symbol_rate: f64, sample_rate: f64) -> Result<Self> {
        let c = FdmaConfig {
            num_users,
            symbol_rate,
            sample_rate,
            rolloff: DEFAULT_ROLLOFF,
            span: DEFAULT_SPAN,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn samples_per_symbol(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    /// `f_k = (k - 1/2)(1 + α) R`: adjacent bands just touch.
    pub fn carriers(&self) -> Vec<f64> {
        let spacing = (1.0 + self.rolloff) * self.symbol_rate;
        (0..self.num_users)
            .map(|k| (k as f64 + 0.5) * spacing)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(SimError::config("fdma.num_users", "must be positive"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) || self.span == 0 || self.span % 2 != 0 {
            return Err(SimError::config(
                "fdma.rolloff",
                "need 0 < rolloff <= 1 and an even span",
            ));
        }
        let sps = self.sample_rate / self.symbol_rate;
        if (sps - sps.round()).abs() > 1e-9 * sps || sps.round() < 2.0 {
            return Err(SimError::config(
                "fdma.sample_rate",
                "need an integer number (>= 2) of samples per symbol",
            ));
        }
        let top = self.num_users as f64 * (1.0 + self.rolloff) * self.symbol_rate;
        if top >= self.sample_rate / 2.0 {
            return Err(SimError::config(
                "fdma.num_users",
                format!("{} bands reach {top} Hz, past Nyquist", self.num_users),
            ));
        }
        Ok(())
    }

    fn guard(&self) -> usize {
        self.span * self.samples_per_symbol() / 2
    }
}

pub fn fdma_modulate(frame: &BitFrame, cfg: &FdmaConfig) -> Result<Waveform> {
    cfg.validate()?;
    check_frame(frame, cfg.num_users)?;
    let sps = cfg.samples_per_symbol();
    let h = srrc_taps(cfg.rolloff, cfg.span, sps);
    let g = cfg.guard();
    let len = frame.len() * sps + 2 * g + 1;
    let fs = cfg.sample_rate;
    let mut out = vec![0.0; len];
    for (u, fc) in cfg.carriers().into_iter().enumerate() {
        let mut base = vec![0.0; len];
        for m in 0..frame.len() {
            let s = frame.get(u, m) as f64;
            for (o, hv) in base[m * sps..].iter_mut().zip(&h) {
                *o += s * hv;
            }
        }
        for (i, (o, b)) in out.iter_mut().zip(&base).enumerate() {
            let t = (i as f64 - g as f64) / fs;
            *o += SQRT_2 * b * (2.0 * PI * fc * t).cos();
        }
    }
    Waveform::new(out, fs, g)
}

pub fn fdma_demodulate(w: &Waveform, cfg: &FdmaConfig, m: usize) -> Result<BitFrame> {
    cfg.validate()?;
    check_rate(w, cfg.sample_rate)?;
    let sps = cfg.samples_per_symbol();
    let h = srrc_taps(cfg.rolloff, cfg.span, sps);
    let g = cfg.guard() as isize;
    let base = w.symbol_offset as isize - g;
    let mut flat = Vec::with_capacity(cfg.num_users * m);
    for fc in cfg.carriers() {
        let mixed: Vec<f64> = w
            .samples
            .iter()
            .enumerate()
            .map(|(i, x)| SQRT_2 * x * (2.0 * PI * fc * w.time_of(i)).cos())
            .collect();
        for slot in 0..m {
            let z = dot_at(&mixed, base + (slot * sps) as isize, &h);
            flat.push(if z >= 0.0 { 1 } else { -1 });
        }
    }
    BitFrame::from_flat(cfg.num_users, m, flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(seed: u64, n: usize, m: usize) -> BitFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat = (0..n * m)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        BitFrame::from_flat(n, m, flat).unwrap()
    }

    #[test]
    fn srrc_nyquist() {
        for sps in [2, 4, 8, 16, 128] {
            let h = srrc_taps(DEFAULT_ROLLOFF, DEFAULT_SPAN, sps);
            let n = h.len();
            let mut full = vec![0.0; 2 * n - 1];
            for i in 0..n {
                for j in 0..n {
                    full[i + j] += h[i] * h[j];
                }
            }
            let c = n - 1;
            assert!((full[c] - 1.0).abs() < 1e-12);
            for k in 1..=DEFAULT_SPAN {
                assert!(
                    full[c + k * sps].abs() < 1e-3,
                    "sps {sps} lag {k}: {}",
                    full[c + k * sps]
                );
            }
        }
    }

    #[test]
    fn walsh_orthogonal() {
        let h = walsh_codes(16).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let d: i32 = h[i]
                    .iter()
                    .zip(&h[j])
                    .map(|(a, b)| (*a as i32) * (*b as i32))
                    .sum();
                assert_eq!(d, if i == j { 16 } else { 0 });
            }
        }
        assert!(h[0].iter().all(|&c| c == 1));
        assert!(walsh_codes(12).is_err());
    }

    #[test]
    fn spreading_identity() {
        let codes = walsh_codes(16).unwrap();
        for b in [1i8, -1] {
            let chips: Vec<f64> = codes[3].iter().map(|c| (b * c) as f64).collect();
            assert_eq!(despread(&chips, &codes[3]), 16.0 * b as f64);
        }
    }

    #[test]
    fn cdma_config_limits() {
        assert!(CdmaConfig::new(15, 128, 128.0).is_ok());
        assert!(CdmaConfig::new(16, 128, 128.0).is_err());
        assert!(CdmaConfig::new(2, 16, 16.0).is_err());
    }

    #[test]
    fn fdma_config_limits() {
        let c = FdmaConfig::new(4, 1.0, 16.0).unwrap();
        let f = c.carriers();
        assert!((f[0] - 0.625).abs() < 1e-12 && (f[3] - 4.375).abs() < 1e-12);
        assert!(FdmaConfig::new(7, 1.0, 16.0).is_err());
    }

    #[test]
    fn noiseless_round_trips() {
        let bp = BpskConfig {
            samples_per_symbol: 8,
            sample_rate: 8.0,
        };
        let bits: Vec<i8> = random_frame(1, 1, 40).as_flat().to_vec();
        assert_eq!(
            bpsk_demodulate(&bpsk_modulate(&bits, &bp).unwrap(), &bp, 40).unwrap(),
            bits
        );
        for n in 1..=5 {
            let f = random_frame(n as u64, n, 32);
            let c = CdmaConfig::new(n, 128, 128.0).unwrap();
            assert_eq!(
                cdma_demodulate(&cdma_modulate(&f, &c).unwrap(), &c, 32).unwrap(),
                f
            );
            let d = FdmaConfig::new(n, 1.0, 16.0).unwrap();
            assert_eq!(
                fdma_demodulate(&fdma_modulate(&f, &d).unwrap(), &d, 32).unwrap(),
                f
            );
        }
    }

    proptest! {
        #[test]
        fn cdma_all_users_recover(seed in 0u64..200, n in 1usize..8) {
            let f = random_frame(seed, n, 8);
            let c = CdmaConfig::new(n, 64, 64.0).unwrap();
            prop_assert_eq!(cdma_demodulate(&cdma_modulate(&f, &c).unwrap(), &c, 8).unwrap(), f);
        }
    }
}
