//! Radar-based ECG reconstruction toolkit.
//!
//! The crate covers the classical pieces of a radar-to-ECG chain: a two-pulse
//! chest-vibration model, synchrosqueezed spectrograms, KDE-based beat
//! interval estimation, a limit-cycle ODE that synthesizes single-cycle ECG,
//! a derivative-free fitter for that ODE, reconstruction metrics, and the
//! radar link budget. [`pipeline`] wires them into a reproducible batch run.

pub mod ecg_ode;
pub mod error;
pub mod io;
pub mod link_budget;
pub mod metrics;
pub mod ode_fit;
pub mod peaks;
pub mod pipeline;
pub mod ppi;
pub mod signal_model;
mod simplex;
pub mod spectral;
pub mod trace;

pub use error::{Error, Result};
