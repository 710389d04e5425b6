//! Link-level simulation and closed-form analysis of the 1-bit massive
//! MU-MIMO-OFDM downlink under symbol-timing and carrier-frequency offsets.
//!
//! The crate has two halves that are meant to be cross-checked against each
//! other:
//!
//! * a sample-accurate transmit/receive chain ([`frame`], [`air`], [`sync`],
//!   [`rx`]) with 1-bit DACs at the base station, Schmidl-Cox timing and
//!   frequency synchronization at the terminals and LS effective-gain
//!   estimation;
//! * the Bussgang-based SINDR decomposition ([`bussgang`], [`sindr`]) for
//!   frequency-flat channels.
//!
//! [`experiment`] drives Monte-Carlo sweeps over both and emits CSV tables.
//! Trial loops run on rayon when the `parallel` feature is enabled (default)
//! and fall back to plain iteration otherwise; see [`par`].

pub mod air;
pub mod bussgang;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod numerics;
pub mod par;
pub mod precoder;
pub mod rx;
pub mod sindr;
pub mod sync;

pub use config::{DacMode, GainMode, SystemConfig};
pub use error::{Error, Result};
pub use numerics::{ComplexVector, RngStream, C64};
