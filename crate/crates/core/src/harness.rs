//! Monte Carlo BER sweeps, spectrum and occupied bandwidth, throughput per
//! hertz and the image round trip.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::api::{modulate, simulate_frame, RunParams, SimSetup, SystemKind};
use crate::channel::{ChannelSpec, PathTap};
use crate::error::{Result, SimError};
use crate::tx::{parallel_to_serial, serial_to_parallel, BitFrame, Waveform};

/// Points with fewer errors than this are flagged in the output.
pub const LOW_CONFIDENCE_ERRORS: u64 = 10;
pub const SEGMENT_LEN: usize = 4096;
pub const MIN_SPECTRUM_LEN: usize = 1 << 14;
pub const DEFAULT_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub system: SystemKind,
    pub num_subcarriers: usize,
    pub eb_n0_db: f64,
    pub total_bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub seed: u64,
    pub low_confidence: bool,
}

/// Seeds for the bits and the noise of one frame, fixed by
/// `(master, point, frame)` alone so batch order cannot change results.
pub fn frame_seeds(master: u64, point: u64, frame: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(point);
    rng.set_word_pos(frame as u128 * 4);
    (rng.next_u64(), rng.next_u64())
}

pub fn random_frame(n: usize, m: usize, seed: u64) -> Result<BitFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat = (0..n * m)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    BitFrame::from_flat(n, m, flat)
}

/// Runs each grid point until at least `min_bits` are counted and either
/// `target_errors` errors or `max_bits` bits are reached.
pub fn run_ber_sweep(
    system: SystemKind,
    setup: &SimSetup,
    taps: &[PathTap],
    grid_db: &[f64],
    run: &RunParams,
) -> Result<Vec<BerPoint>> {
    run.validate()?;
    setup.check(system)?;
    let n = setup.num_users();
    let m = run.frame_symbols;
    let bits_per_frame = (n * m) as u64;
    grid_db
        .iter()
        .enumerate()
        .map(|(p, &db)| {
            let channel = ChannelSpec {
                eb_n0_db: db,
                taps: taps.to_vec(),
                seed: 0,
            };
            channel.validate()?;
            let (mut bits, mut errors, mut next) = (0u64, 0u64, 0u64);
            loop {
                let batch: Vec<u64> = (next..next + run.batch_frames as u64)
                    .into_par_iter()
                    .map(|k| {
                        let (bit_seed, noise_seed) = frame_seeds(run.seed, p as u64, k);
                        let frame = random_frame(n, m, bit_seed)?;
                        simulate_frame(system, setup, &channel, &frame, noise_seed)
                            .map(|o| o.bit_errors as u64)
                    })
                    .collect::<Result<_>>()?;
                next += run.batch_frames as u64;
                errors += batch.iter().sum::<u64>();
                bits += bits_per_frame * batch.len() as u64;
                if bits >= run.min_bits && (errors >= run.target_errors || bits >= run.max_bits) {
                    break;
                }
            }
            Ok(BerPoint {
                system,
                num_subcarriers: n,
                eb_n0_db: db,
                total_bits: bits,
                bit_errors: errors,
                ber: errors as f64 / bits as f64,
                seed: run.seed,
                low_confidence: errors < LOW_CONFIDENCE_ERRORS,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    /// One-sided power spectral density per hertz.
    pub psd: Vec<f64>,
    pub fraction: f64,
    pub peak_freq: f64,
    pub low_edge: f64,
    pub high_edge: f64,
    /// `high - low` for a band clear of DC; `2 high` when the band reaches
    /// DC, i.e. the two-sided width of a baseband signal.
    pub occupied_bandwidth: f64,
}

/// Welch PSD (Hann, 50% overlap) and the smallest band symmetric about the
/// peak that holds `fraction` of the power.
pub fn estimate_bandwidth(w: &Waveform, fraction: f64) -> Result<SpectrumEstimate> {
    if w.len() < MIN_SPECTRUM_LEN {
        return Err(SimError::dimension(format!(
            "spectrum needs at least {MIN_SPECTRUM_LEN} samples, got {}",
            w.len()
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SimError::config("fraction", "must lie in (0, 1)"));
    }
    let l = SEGMENT_LEN;
    let window: Vec<f64> = (0..l)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (l - 1) as f64).cos())
        .collect();
    let wpow: f64 = window.iter().map(|x| x * x).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
    let bins = l / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); l];
    let mut start = 0;
    while start + l <= w.len() {
        for ((b, x), h) in buf
            .iter_mut()
            .zip(&w.samples[start..start + l])
            .zip(&window)
        {
            *b = Complex::new(x * h, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += l / 2;
    }
    let fs = w.sample_rate;
    let scale = 1.0 / (fs * wpow * segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            if k == 0 || k == bins - 1 {
                a * scale
            } else {
                2.0 * a * scale
            }
        })
        .collect();
    let df = fs / l as f64;
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * df).collect();
    let total: f64 = psd.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(SimError::numeric("spectrum of a zero or non-finite signal"));
    }
    let k0 = psd
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let (mut lo, mut hi, mut inside) = (k0, k0, psd[k0]);
    while inside < fraction * total {
        if lo > 0 {
            lo -= 1;
            inside += psd[lo];
        }
        if hi + 1 < bins {
            hi += 1;
            inside += psd[hi];
        }
    }
    let high_edge = ((hi as f64 + 0.5) * df).min(fs / 2.0);
    let low_edge = if lo == 0 { 0.0 } else { (lo as f64 - 0.5) * df };
    let occupied_bandwidth = if lo == 0 {
        2.0 * high_edge
    } else {
        high_edge - low_edge
    };
    Ok(SpectrumEstimate {
        peak_freq: freqs[k0],
        freqs,
        psd,
        fraction,
        low_edge,
        high_edge,
        occupied_bandwidth,
    })
}

/// Spectrum of a long noiseless transmission of random bits.
pub fn system_spectrum(
    system: SystemKind,
    setup: &SimSetup,
    fraction: f64,
    seed: u64,
) -> Result<SpectrumEstimate> {
    setup.check(system)?;
    let sps = setup.carrier.samples_per_symbol();
    let m = (8 * MIN_SPECTRUM_LEN).div_ceil(sps);
    let frame = random_frame(setup.num_users(), m, seed)?;
    estimate_bandwidth(&modulate(system, setup, &frame)?, fraction)
}

/// Occupied bandwidth `B_N` in hertz. CDMA uses its chip-rate band
/// `(1 + α) P f`; the others are measured.
pub fn occupied_bandwidth(system: SystemKind, setup: &SimSetup, seed: u64) -> Result<f64> {
    match system {
        SystemKind::Cdma => {
            let c = setup.cdma()?;
            Ok((1.0 + c.rolloff) * c.spreading_gain as f64 * setup.carrier.f())
        }
        _ => Ok(system_spectrum(system, setup, DEFAULT_FRACTION, seed)?.occupied_bandwidth),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub system: SystemKind,
    pub eb_n0_db: f64,
    /// Fraction of bits received correctly.
    pub throughput: f64,
    pub bandwidth: f64,
    /// `throughput / bandwidth`, per hertz.
    pub theta: f64,
    pub ber: BerPoint,
}

pub fn throughput_per_hz(
    system: SystemKind,
    setup: &SimSetup,
    taps: &[PathTap],
    grid_db: &[f64],
    run: &RunParams,
) -> Result<Vec<ThroughputPoint>> {
    let bandwidth = occupied_bandwidth(system, setup, run.seed)?;
    Ok(run_ber_sweep(system, setup, taps, grid_db, run)?
        .into_iter()
        .map(|b| {
            let throughput = 1.0 - b.ber;
            ThroughputPoint {
                system,
                eb_n0_db: b.eb_n0_db,
                throughput,
                bandwidth,
                theta: throughput / bandwidth,
                ber: b,
            }
        })
        .collect())
}

/// 8-bit raster, grey (`channels == 1`) or RGB (`channels == 3`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(SimError::config(
                "image",
                "only grey or RGB images are supported",
            ));
        }
        if data.len() != width as usize * height as usize * channels as usize {
            return Err(SimError::dimension(
                "pixel buffer does not match the image size",
            ));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    /// Parses PGM or PPM, plain or binary.
    pub fn from_pnm(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Pnm)
            .map_err(|e| SimError::config("image", format!("malformed image: {e}")))?;
        let (w, h) = (img.width(), img.height());
        if img.color().has_color() {
            Raster::new(w, h, 3, img.into_rgb8().into_raw())
        } else {
            Raster::new(w, h, 1, img.into_luma8().into_raw())
        }
    }

    /// Binary PGM or PPM.
    pub fn to_pnm(&self) -> Vec<u8> {
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        use image::{ExtendedColorType, ImageEncoder};
        let (subtype, color) = if self.channels == 1 {
            (
                PnmSubtype::Graymap(SampleEncoding::Binary),
                ExtendedColorType::L8,
            )
        } else {
            (
                PnmSubtype::Pixmap(SampleEncoding::Binary),
                ExtendedColorType::Rgb8,
            )
        };
        let mut out = Vec::new();
        PnmEncoder::new(&mut out)
            .with_subtype(subtype)
            .write_image(&self.data, self.width, self.height, color)
            .expect("in-memory encode");
        out
    }

    /// Smooth gradients with a few hard edges, for demos and tests.
    pub fn test_pattern(width: u32, height: u32) -> Self {
        let mut data = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            for x in 0..width {
                let g = (255 * (x + y) / (width + height).max(1)) as u8;
                let in_box =
                    x > width / 4 && x < 3 * width / 4 && y > height / 3 && y < 2 * height / 3;
                data.push(if in_box { 255 - g } else { g });
            }
        }
        Raster::new(width, height, 1, data).expect("sized buffer")
    }
}

/// Pixel bytes to `±1` symbols, most significant bit first (`1 -> +1`).
pub fn bytes_to_bits(data: &[u8]) -> Vec<i8> {
    data.iter()
        .flat_map(|b| {
            (0..8)
                .rev()
                .map(move |i| if (b >> i) & 1 == 1 { 1 } else { -1 })
        })
        .collect()
}

pub fn bits_to_bytes(bits: &[i8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | u8::from(b > 0)))
        .collect()
}

/// `10 log10(255² / MSE)`; identical images give `+inf`.
pub fn psnr(a: &Raster, b: &Raster) -> Result<f64> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(SimError::dimension(
            "images differ in size or channel count",
        ));
    }
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum::<f64>()
        / a.data.len().max(1) as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64.powi(2) / mse).log10()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutcome {
    pub decoded: Raster,
    pub psnr: f64,
    pub total_bits: u64,
    pub bit_errors: u64,
}

/// Sends the raster through `system` and `channel` in frames of
/// `frame_symbols` symbol periods. The last frame is padded with `+1`.
pub fn image_roundtrip(
    img: &Raster,
    system: SystemKind,
    setup: &SimSetup,
    channel: &ChannelSpec,
    frame_symbols: usize,
    seed: u64,
) -> Result<ImageOutcome> {
    setup.check(system)?;
    channel.validate()?;
    if frame_symbols == 0 {
        return Err(SimError::config("run.frame_symbols", "must be positive"));
    }
    let n = setup.num_users();
    let per_frame = n * frame_symbols;
    let bits = Arc::new(bytes_to_bits(&img.data));
    let frames = bits.len().div_ceil(per_frame);
    let decoded: Vec<Vec<i8>> = (0..frames)
        .into_par_iter()
        .map(|k| {
            let mut chunk: Vec<i8> =
                bits[k * per_frame..((k + 1) * per_frame).min(bits.len())].to_vec();
            chunk.resize(per_frame, 1);
            let frame = serial_to_parallel(&chunk, n)?;
            let (_, noise_seed) = frame_seeds(seed, 0, k as u64);
            let out = simulate_frame(system, setup, channel, &frame, noise_seed)?;
            Ok(parallel_to_serial(&out.decoded))
        })
        .collect::<Result<_>>()?;
    let mut rx: Vec<i8> = decoded.into_iter().flatten().collect();
    rx.truncate(bits.len());
    let bit_errors = rx.iter().zip(bits.iter()).filter(|(a, b)| a != b).count() as u64;
    let decoded = Raster {
        data: bits_to_bytes(&rx),
        ..img.clone()
    };
    Ok(ImageOutcome {
        psnr: psnr(img, &decoded)?,
        decoded,
        total_bits: bits.len() as u64,
        bit_errors,
    })
}
