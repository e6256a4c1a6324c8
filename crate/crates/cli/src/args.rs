use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cpocma",
    version,
    about = "Chaotic multi-carrier modem simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo BER sweep of one system.
    Ber(Common),
    /// Closed-form BER curve (two subcarriers).
    Theory(Common),
    /// Power spectral density and occupied bandwidth.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Power fraction defining the occupied band.
        #[arg(long, default_value_t = 0.99)]
        fraction: f64,
    },
    /// Throughput per hertz over the Eb/N0 grid.
    Throughput(Common),
    /// Sends an 8-bit PGM/PPM image through the link and reports PSNR.
    Image {
        #[command(flatten)]
        common: Common,
        /// Source image; a 64x64 test pattern when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write the decoded image, one file per grid point
        /// (`<stem>_<eb_n0>dB.<ext>`).
        #[arg(long)]
        decoded: Option<PathBuf>,
    },
    /// BER sweep of cpocma, fdma and cdma under one configuration.
    Compare(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Ber(c) | Command::Theory(c) | Command::Throughput(c) | Command::Compare(c) => {
                c
            }
            Command::Spectrum { common, .. } | Command::Image { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Ber(_) => "ber",
            Command::Theory(_) => "theory",
            Command::Spectrum { .. } => "spectrum",
            Command::Throughput(_) => "throughput",
            Command::Image { .. } => "image",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Awgn,
    ThreeRay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Literal,
    Anchored,
}

/// Configuration source plus per-field overrides; flags win over the file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, short, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named parameter set (passband, awgn, three-ray); awgn by default.
    #[arg(long)]
    pub preset: Option<String>,
    /// cpocma, cdma, fdma or bpsk.
    #[arg(long)]
    pub system: Option<String>,
    /// Number of subcarriers / users.
    #[arg(long, short = 'n')]
    pub num_subcarriers: Option<usize>,
    /// Symbol frequency in Hz.
    #[arg(long)]
    pub f: Option<f64>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long, value_enum)]
    pub channel: Option<ChannelArg>,
    /// Eb/N0 grid in dB: `0,2,4`, `0:14:2` or `inf`.
    #[arg(long = "eb-n0")]
    pub eb_n0: Option<String>,
    #[arg(long, value_enum)]
    pub decision: Option<RuleArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_bits: Option<u64>,
    #[arg(long)]
    pub max_bits: Option<u64>,
    #[arg(long)]
    pub target_errors: Option<u64>,
    #[arg(long)]
    pub frame_symbols: Option<usize>,
    /// CSV output path; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}
