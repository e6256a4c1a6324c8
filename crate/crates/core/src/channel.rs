//! AWGN and tapped-delay-line multipath.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::tx::Waveform;

/// One multipath ray: linear power gain and excess delay in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathTap {
    pub power_gain: f64,
    pub delay: f64,
}

/// Channel model for one simulated operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Per-bit SNR in dB; `+inf` means noiseless.
    pub eb_n0_db: f64,
    #[serde(default = "flat")]
    pub taps: Vec<PathTap>,
    #[serde(default)]
    pub seed: u64,
}

fn flat() -> Vec<PathTap> {
    vec![PathTap {
        power_gain: 1.0,
        delay: 0.0,
    }]
}

impl ChannelSpec {
    pub fn awgn(eb_n0_db: f64, seed: u64) -> Self {
        ChannelSpec {
            eb_n0_db,
            taps: flat(),
            seed,
        }
    }

    pub fn noiseless() -> Self {
        Self::awgn(f64::INFINITY, 0)
    }

    /// Three rays with power gains 0.7, 0.2, 0.1 at 0, 0.1 and 0.125 µs.
    pub fn three_ray(eb_n0_db: f64, seed: u64) -> Self {
        ChannelSpec {
            eb_n0_db,
            taps: three_ray_taps(),
            seed,
        }
    }

    pub fn is_flat(&self) -> bool {
        self.taps.len() == 1 && self.taps[0].power_gain == 1.0 && self.taps[0].delay == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.eb_n0_db.is_nan() || self.eb_n0_db == f64::NEG_INFINITY {
            return Err(SimError::config("eb_n0_db", "must be a number or +inf"));
        }
        validate_taps(&self.taps)
    }
}

pub fn three_ray_taps() -> Vec<PathTap> {
    [(0.7, 0.0), (0.2, 0.1e-6), (0.1, 0.125e-6)]
        .into_iter()
        .map(|(power_gain, delay)| PathTap { power_gain, delay })
        .collect()
}

pub fn validate_taps(taps: &[PathTap]) -> Result<()> {
    if taps.is_empty() {
        return Err(SimError::config("taps", "need at least one tap"));
    }
    let mut total = 0.0;
    for (i, t) in taps.iter().enumerate() {
        if !(t.power_gain.is_finite() && t.power_gain >= 0.0) {
            return Err(SimError::config(
                format!("taps[{i}].power_gain"),
                "must be finite and nonnegative",
            ));
        }
        if !(t.delay.is_finite() && t.delay >= 0.0) {
            return Err(SimError::config(
                format!("taps[{i}].delay"),
                "must be finite and nonnegative",
            ));
        }
        if i == 0 && t.delay != 0.0 {
            return Err(SimError::config(
                "taps[0].delay",
                "first tap must have zero delay",
            ));
        }
        if i > 0 && t.delay < taps[i - 1].delay {
            return Err(SimError::config(
                format!("taps[{i}].delay"),
                "delays must be nondecreasing",
            ));
        }
        total += t.power_gain;
    }
    if total > 1.0 + 1e-9 {
        return Err(SimError::config(
            "taps",
            format!("power gains sum to {total}, more than 1"),
        ));
    }
    Ok(())
}

/// Per-sample noise deviation for a target Eb/N0.
///
/// `Eb = (Σ x² / fs) / total_bits`, `N0 = Eb / 10^(Eb/N0 / 10)` and
/// `σ = sqrt(N0 fs / 2)`.
pub fn calibrate_noise_sigma(eb_n0_db: f64, w: &Waveform, total_bits: usize) -> Result<f64> {
    if total_bits == 0 {
        return Err(SimError::config("total_bits", "must be at least 1"));
    }
    let eb = w.energy() / total_bits as f64;
    if !(eb > 0.0 && eb.is_finite()) {
        return Err(SimError::numeric(
            "cannot calibrate noise on a zero-energy waveform",
        ));
    }
    if eb_n0_db.is_nan() {
        return Err(SimError::config("eb_n0_db", "is NaN"));
    }
    let n0 = eb / 10f64.powf(eb_n0_db / 10.0);
    Ok((n0 * w.sample_rate / 2.0).sqrt())
}

/// Adds zero-mean Gaussian noise of deviation `sigma`, reproducible per seed.
pub fn apply_awgn(w: &Waveform, sigma: f64, seed: u64) -> Result<Waveform> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SimError::numeric(format!(
            "noise deviation {sigma} is invalid"
        )));
    }
    if sigma == 0.0 {
        return Ok(w.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| SimError::numeric(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = w
        .samples
        .iter()
        .map(|x| x + normal.sample(&mut rng))
        .collect();
    Ok(Waveform {
        samples,
        ..w.clone()
    })
}

/// `y[k] = Σ_i sqrt(g_i) x[k - round(d_i fs)]`; the output grows by the
/// largest delay so no energy is cut off.
pub fn apply_multipath(w: &Waveform, taps: &[PathTap]) -> Result<Waveform> {
    validate_taps(taps)?;
    let shifts: Vec<(f64, usize)> = taps
        .iter()
        .map(|t| {
            (
                t.power_gain.sqrt(),
                (t.delay * w.sample_rate).round() as usize,
            )
        })
        .collect();
    let max_shift = shifts.iter().map(|s| s.1).max().unwrap_or(0);
    let mut out = vec![0.0; w.len() + max_shift];
    for &(a, d) in &shifts {
        for (o, x) in out[d..].iter_mut().zip(&w.samples) {
            *o += a * x;
        }
    }
    Ok(Waveform {
        samples: out,
        ..w.clone()
    })
}

/// Multipath then receiver-referred noise, calibrated on the clean input.
pub fn apply_channel(w: &Waveform, spec: &ChannelSpec, total_bits: usize) -> Result<Waveform> {
    let sigma = calibrate_noise_sigma(spec.eb_n0_db, w, total_bits)?;
    let faded = if spec.is_flat() {
        w.clone()
    } else {
        apply_multipath(w, &spec.taps)?
    };
    apply_awgn(&faded, sigma, spec.seed)
}
