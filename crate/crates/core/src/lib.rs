//! Simulation of chaotic pseudo-orthogonal multi-carrier access: shaping and
//! correlation filter banks, transmitter, channel, receiver, closed-form BER,
//! reference CDMA/FDMA modems and a Monte Carlo harness.
//!
//! [`api`] is the stable facade; the other modules expose the building blocks.

pub mod api;
pub mod baselines;
pub mod basis;
pub mod channel;
pub mod error;
pub mod harness;
pub mod rx;
pub mod theory;
pub mod tx;

pub use api::{
    simulate_frame, validate, FrameOutcome, SimConfig, SimSetup, SystemKind, ValidatedConfig,
};
pub use basis::{eval_o, eval_p, make_taps, CarrierConfig, CarrierParams, FilterKind, FilterTaps};
pub use channel::{ChannelSpec, PathTap};
pub use error::{ErrorCategory, Result, SimError};
pub use rx::{demodulate, DeltaRule, Demodulator, SampleMatrix};
pub use theory::{Formulas, PatternPolicy, TheoryTerms};
pub use tx::{
    downconvert, modulate_subcarrier, parallel_to_serial, serial_to_parallel, transmit, upconvert,
    BitFrame, Waveform,
};
