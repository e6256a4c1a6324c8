//! One facade over the modems, channel and configuration: what the CLI and
//! other callers program against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    bpsk_demodulate, bpsk_modulate, cdma_demodulate, cdma_modulate, fdma_demodulate, fdma_modulate,
    BpskConfig, CdmaConfig, FdmaConfig, DEFAULT_ROLLOFF, DEFAULT_SPAN, DEFAULT_SPREADING_GAIN,
};
pub use crate::basis::{CarrierConfig, CarrierParams, DEFAULT_TAIL_SYMBOLS};
use crate::channel::{apply_channel, three_ray_taps, validate_taps};
pub use crate::channel::{ChannelSpec, PathTap};
pub use crate::error::{ErrorCategory, Result, SimError};
pub use crate::rx::DeltaRule;
use crate::rx::Demodulator;
use crate::theory::{compute_terms, evaluate, sigma_for_eb_n0};
pub use crate::theory::{Formulas, PatternPolicy, TheoryPoint};
use crate::tx::{downconvert, parallel_to_serial, serial_to_parallel, transmit, upconvert};
pub use crate::tx::{BitFrame, Waveform};

pub use crate::harness::{
    estimate_bandwidth, image_roundtrip, occupied_bandwidth, psnr, run_ber_sweep, system_spectrum,
    throughput_per_hz, BerPoint, ImageOutcome, Raster, SpectrumEstimate, ThroughputPoint,
    DEFAULT_FRACTION,
};

/// Library version, stamped into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    #[default]
    Cpocma,
    Cdma,
    Fdma,
    /// Single-stream rectangular BPSK used to check the noise calibration.
    #[serde(rename = "bpsk")]
    BpskControl,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::Cpocma,
        SystemKind::Cdma,
        SystemKind::Fdma,
        SystemKind::BpskControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Cpocma => "cpocma",
            SystemKind::Cdma => "cdma",
            SystemKind::Fdma => "fdma",
            SystemKind::BpskControl => "bpsk",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                SimError::config(
                    "system",
                    format!("unknown system `{s}` (cpocma, cdma, fdma, bpsk)"),
                )
            })
    }
}

/// Knobs of the CDMA and FDMA reference modems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    pub spreading_gain: usize,
    pub rolloff: f64,
    pub span: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            spreading_gain: DEFAULT_SPREADING_GAIN,
            rolloff: DEFAULT_ROLLOFF,
            span: DEFAULT_SPAN,
        }
    }
}

/// Optional real-carrier stage around the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Passband {
    pub carrier_freq: f64,
    /// Low-pass cutoff of the down-mixer; also taken as the one-sided
    /// baseband bandwidth when checking for aliasing.
    pub lowpass_cutoff: f64,
}

/// Everything needed to run one frame of any system.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup {
    pub carrier: CarrierConfig,
    pub baseline: BaselineParams,
    pub rule: DeltaRule,
    pub passband: Option<Passband>,
}

impl SimSetup {
    pub fn new(carrier: CarrierConfig) -> Self {
        SimSetup {
            carrier,
            baseline: BaselineParams::default(),
            rule: DeltaRule::default(),
            passband: None,
        }
    }

    pub fn num_users(&self) -> usize {
        self.carrier.num_subcarriers()
    }

    pub fn cdma(&self) -> Result<CdmaConfig> {
        let c = CdmaConfig {
            num_users: self.num_users(),
            spreading_gain: self.baseline.spreading_gain,
            samples_per_bit: self.carrier.samples_per_symbol(),
            sample_rate: self.carrier.sample_rate(),
            rolloff: self.baseline.rolloff,
            span: self.baseline.span,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn fdma(&self) -> Result<FdmaConfig> {
        let c = FdmaConfig {
            num_users: self.num_users(),
            symbol_rate: self.carrier.f(),
            sample_rate: self.carrier.sample_rate(),
            rolloff: self.baseline.rolloff,
            span: self.baseline.span,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn bpsk(&self) -> BpskConfig {
        BpskConfig {
            samples_per_symbol: self.carrier.samples_per_symbol(),
            sample_rate: self.carrier.sample_rate(),
        }
    }

    /// Checks that `system` can run on this setup.
    pub fn check(&self, system: SystemKind) -> Result<()> {
        match system {
            SystemKind::Cdma => self.cdma().map(|_| ()),
            SystemKind::Fdma => self.fdma().map(|_| ()),
            SystemKind::Cpocma | SystemKind::BpskControl => Ok(()),
        }?;
        if let Some(p) = self.passband {
            let fs = self.carrier.sample_rate();
            if !(p.lowpass_cutoff > 0.0 && p.lowpass_cutoff < fs / 2.0) {
                return Err(SimError::config(
                    "passband.lowpass_cutoff",
                    "must lie in (0, fs/2)",
                ));
            }
            if !(p.carrier_freq > 0.0) || p.carrier_freq + p.lowpass_cutoff >= fs / 2.0 {
                return Err(SimError::config(
                    "passband.carrier_freq",
                    "need 0 < carrier_freq and carrier_freq + lowpass_cutoff < fs/2",
                ));
            }
        }
        Ok(())
    }

    /// Information bits per second. The control modem carries one stream.
    pub fn data_rate(&self, system: SystemKind) -> f64 {
        let per_stream = self.carrier.f();
        match system {
            SystemKind::BpskControl => per_stream,
            _ => per_stream * self.num_users() as f64,
        }
    }
}

/// Fails unless all `systems` carry the same information rate.
pub fn assert_rate_parity(setup: &SimSetup, systems: &[SystemKind]) -> Result<()> {
    if let Some(first) = systems.first() {
        let r0 = setup.data_rate(*first);
        for s in systems {
            let r = setup.data_rate(*s);
            if (r - r0).abs() > 1e-9 * r0 {
                return Err(SimError::config(
                    "system",
                    format!("{s} runs at {r} bit/s but {first} at {r0} bit/s"),
                ));
            }
        }
    }
    Ok(())
}

/// Noiseless transmit waveform of `system` for one frame.
pub fn modulate(system: SystemKind, setup: &SimSetup, bits: &BitFrame) -> Result<Waveform> {
    match system {
        SystemKind::Cpocma => transmit(bits, &setup.carrier),
        SystemKind::Cdma => cdma_modulate(bits, &setup.cdma()?),
        SystemKind::Fdma => fdma_modulate(bits, &setup.fdma()?),
        SystemKind::BpskControl => bpsk_modulate(&parallel_to_serial(bits), &setup.bpsk()),
    }
}

/// Decodes `m` symbol periods of `system` from a baseband waveform.
pub fn demodulate(
    system: SystemKind,
    setup: &SimSetup,
    r: &Waveform,
    m: usize,
) -> Result<BitFrame> {
    let n = setup.num_users();
    match system {
        SystemKind::Cpocma => Demodulator::with_rule(&setup.carrier, setup.rule).demodulate(r, m),
        SystemKind::Cdma => cdma_demodulate(r, &setup.cdma()?, m),
        SystemKind::Fdma => fdma_demodulate(r, &setup.fdma()?, m),
        SystemKind::BpskControl => {
            serial_to_parallel(&bpsk_demodulate(r, &setup.bpsk(), n * m)?, n)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub decoded: BitFrame,
    pub bit_errors: usize,
}

/// One modulate, channel, demodulate pass. `seed` drives the noise; the
/// seed stored in `channel` is ignored.
pub fn simulate_frame(
    system: SystemKind,
    setup: &SimSetup,
    channel: &ChannelSpec,
    bits: &BitFrame,
    seed: u64,
) -> Result<FrameOutcome> {
    setup.check(system)?;
    channel.validate()?;
    if bits.num_subcarriers() != setup.num_users() {
        return Err(SimError::dimension(format!(
            "frame has {} rows, setup has {} users",
            bits.num_subcarriers(),
            setup.num_users()
        )));
    }
    let m = bits.len();
    let mut w = modulate(system, setup, bits)?;
    if let Some(p) = setup.passband {
        w = upconvert(&w, p.carrier_freq, p.lowpass_cutoff)?;
    }
    let spec = ChannelSpec {
        seed,
        ..channel.clone()
    };
    let mut r = apply_channel(&w, &spec, bits.as_flat().len())?;
    if let Some(p) = setup.passband {
        r = downconvert(&r, p.carrier_freq, p.lowpass_cutoff)?;
    }
    let decoded = demodulate(system, setup, &r, m)?;
    let bit_errors = bits.count_errors(&decoded)?;
    Ok(FrameOutcome {
        decoded,
        bit_errors,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    #[default]
    Awgn,
    ThreeRay,
    Custom(Vec<PathTap>),
}

impl ChannelModel {
    pub fn taps(&self) -> Vec<PathTap> {
        match self {
            ChannelModel::Awgn => vec![PathTap {
                power_gain: 1.0,
                delay: 0.0,
            }],
            ChannelModel::ThreeRay => three_ray_taps(),
            ChannelModel::Custom(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub model: ChannelModel,
    pub eb_n0_db: Vec<f64>,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            model: ChannelModel::Awgn,
            eb_n0_db: (0..=7).map(|k| 2.0 * k as f64).collect(),
        }
    }
}

/// Monte Carlo depth and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunParams {
    pub seed: u64,
    pub min_bits: u64,
    pub max_bits: u64,
    pub target_errors: u64,
    /// Symbol periods per simulated frame.
    pub frame_symbols: usize,
    /// Frames evaluated between stopping-rule checks.
    pub batch_frames: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            seed: 1,
            min_bits: 10_000,
            max_bits: 1_000_000,
            target_errors: 100,
            frame_symbols: 256,
            batch_frames: 32,
        }
    }
}

impl RunParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_bits < 10_000 {
            return Err(SimError::config(
                "run.min_bits",
                "need at least 10000 bits per point",
            ));
        }
        if self.max_bits < self.min_bits {
            return Err(SimError::config(
                "run.max_bits",
                "must be at least run.min_bits",
            ));
        }
        if self.target_errors == 0 {
            return Err(SimError::config("run.target_errors", "must be positive"));
        }
        if self.frame_symbols == 0 {
            return Err(SimError::config("run.frame_symbols", "must be positive"));
        }
        if self.batch_frames == 0 {
            return Err(SimError::config("run.batch_frames", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryParams {
    pub policy: PatternPolicy,
    pub formulas: Formulas,
    pub span: usize,
}

impl Default for TheoryParams {
    fn default() -> Self {
        TheoryParams {
            policy: PatternPolicy::default(),
            formulas: Formulas::default(),
            span: crate::theory::DEFAULT_SPAN,
        }
    }
}

/// The file-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub system: SystemKind,
    pub carrier: CarrierParams,
    #[serde(default)]
    pub baseline: BaselineParams,
    #[serde(default)]
    pub decision: DeltaRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passband: Option<Passband>,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub theory: TheoryParams,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::config("config", e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A configuration that passed [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    pub config: SimConfig,
    pub setup: SimSetup,
    pub taps: Vec<PathTap>,
}

impl ValidatedConfig {
    pub fn system(&self) -> SystemKind {
        self.config.system
    }

    pub fn grid(&self) -> &[f64] {
        &self.config.channel.eb_n0_db
    }

    pub fn channel_at(&self, eb_n0_db: f64) -> ChannelSpec {
        ChannelSpec {
            eb_n0_db,
            taps: self.taps.clone(),
            seed: self.config.run.seed,
        }
    }
}

/// Checks every parameter before any simulation starts.
pub fn validate(config: SimConfig) -> Result<ValidatedConfig> {
    let carrier =
        CarrierConfig::try_from(config.carrier.clone()).map_err(|e| e.within("carrier"))?;
    let setup = SimSetup {
        carrier,
        baseline: config.baseline,
        rule: config.decision,
        passband: config.passband,
    };
    setup.check(config.system)?;
    let taps = config.channel.model.taps();
    validate_taps(&taps).map_err(|e| e.within("channel.model"))?;
    if config.channel.eb_n0_db.is_empty() {
        return Err(SimError::config("channel.eb_n0_db", "grid is empty"));
    }
    for (i, v) in config.channel.eb_n0_db.iter().enumerate() {
        if v.is_nan() || *v == f64::NEG_INFINITY {
            return Err(SimError::config(
                format!("channel.eb_n0_db[{i}]"),
                "must be a number or +inf",
            ));
        }
    }
    config.run.validate()?;
    if config.theory.span == 0 {
        return Err(SimError::config("theory.span", "must be positive"));
    }
    if let PatternPolicy::Expectation { patterns: 0, .. } = config.theory.policy {
        return Err(SimError::config(
            "theory.policy.patterns",
            "must be positive",
        ));
    }
    Ok(ValidatedConfig {
        config,
        setup,
        taps,
    })
}

/// Closed-form BER over `grid_db` (two subcarriers only).
pub fn theory_curve(
    setup: &SimSetup,
    grid_db: &[f64],
    params: &TheoryParams,
) -> Result<Vec<TheoryPoint>> {
    let base = compute_terms(&setup.carrier, 0.0, params.span)?;
    Ok(grid_db
        .iter()
        .map(|&db| {
            let mut t = base.clone();
            t.sigma = sigma_for_eb_n0(&base, db);
            TheoryPoint {
                eb_n0_db: db,
                ..evaluate(&t, params.policy, params.formulas)
            }
        })
        .collect())
}

pub const PRESETS: [&str; 3] = ["passband", "awgn", "three-ray"];

/// Named parameter sets: `passband` is the single-user passband experiment,
/// `awgn` the two-subcarrier AWGN study and `three-ray` four users on
/// the three-ray channel.
pub fn preset(name: &str) -> Result<SimConfig> {
    let carrier = |f: f64, n: usize| CarrierParams {
        f,
        num_subcarriers: n,
        base_freqs: None,
        sample_rate: 40e6,
        tail_symbols: DEFAULT_TAIL_SYMBOLS,
    };
    let grid = |hi: u32| (0..=hi / 2).map(|k| 2.0 * k as f64).collect::<Vec<_>>();
    let base = |c: CarrierParams, channel: ChannelParams| SimConfig {
        system: SystemKind::Cpocma,
        carrier: c,
        baseline: BaselineParams::default(),
        decision: DeltaRule::default(),
        passband: None,
        channel,
        run: RunParams::default(),
        theory: TheoryParams::default(),
    };
    match name {
        "passband" => Ok(SimConfig {
            passband: Some(Passband {
                carrier_freq: 5e6,
                lowpass_cutoff: 5e6,
            }),
            ..base(
                carrier(2.5e6, 1),
                ChannelParams {
                    model: ChannelModel::Awgn,
                    eb_n0_db: grid(10),
                },
            )
        }),
        "awgn" => Ok(base(
            carrier(0.3125e6, 2),
            ChannelParams {
                model: ChannelModel::Awgn,
                eb_n0_db: grid(14),
            },
        )),
        "three-ray" => Ok(base(
            carrier(0.3125e6, 4),
            ChannelParams {
                model: ChannelModel::ThreeRay,
                eb_n0_db: grid(20),
            },
        )),
        _ => Err(SimError::config(
            "preset",
            format!("unknown preset `{name}` (one of {})", PRESETS.join(", ")),
        )),
    }
}
