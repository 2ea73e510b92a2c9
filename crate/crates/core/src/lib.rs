//! Core library for a desk-scale simulation of a weak-measurement Sagnac
//! tilt/angular-velocity experiment with two readout techniques:
//!
//! * **WVA** — dark-port weak-value amplification: only the nearly-dark output
//!   is detected; the pulse envelope arrives time-shifted by `2·ω₀·τ²/φ`, at
//!   the cost of post-selecting a `sin²(k₀Lφ)` fraction of the light and
//!   needing a separately recorded bright calibration pulse.
//! * **ABWV** — almost-balanced weak values: the interferometer is biased to
//!   near-equal outputs and the difference signal is read against the sum;
//!   the shift is `ω₀·τ²/φ`, every photon is detected, and the sum channel
//!   makes the measurement self-calibrating.
//!
//! The crate is organized as a small pipeline:
//!
//! * [`signal`] — closed-form optics: the exact two-port interference law,
//!   its first-order approximations, lever-arm and ramp-drive calibration.
//! * [`instrument`] — pulse-train synthesis, shot/additive noise, the
//!   cascaded one-pole low-pass preamplifier model, digitization, slicing.
//! * [`estimator`] — per-pulse Gaussian fitting (damped Gauss–Newton with a
//!   Levenberg–Marquardt schedule) and the inversion to `(φ̂, ω̂₀)` with
//!   ensemble statistics.
//! * [`harness`] — configuration-driven φ sweeps over both techniques,
//!   well-behaved-interval detection, and report generation.
//! * [`io`] — trace CSV / binary formats and fit-table CSV export.
//! * [`config`] — the flat sectioned key-value (TOML) run configuration, with
//!   defaults reproducing the headline bench setup.
//! * [`rng`] — counter-based deterministic noise streams keyed by
//!   `(seed, channel, pulse)` so parallel generation is reproducible.
//! * [`selftest`] — fast invariant suite behind the CLI `selftest` command.
//!
//! Commonly used types are re-exported at the crate root.

pub mod config;
pub mod estimator;
pub mod harness;
pub mod instrument;
pub mod io;
pub mod rng;
pub mod selftest;
pub mod signal;
pub mod svg;

pub use estimator::{EnsembleStats, EstimatorError, GaussianFit, GaussianInit, VelocityEstimate};
pub use harness::{HarnessError, IntervalSummary, Report, SweepConfig, SweepRow};
pub use instrument::{
    Channel, FilterConfig, InstrumentError, NoiseConfig, PulseTrainConfig, SampledTrace, TraceSet,
};
pub use signal::{
    BeamGeometry, InterferometerGeometry, PulseEnvelope, RampDrive, SignalError, Technique,
    TiltState, ValidityMargin, WorkingPoint,
};
