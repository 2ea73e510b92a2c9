//! Detection-chain model: pulse-train synthesis, photon shot noise,
//! additive electronics noise, the preamplifier low-pass, and window
//! slicing into per-pulse traces.
//!
//! The simulated record mirrors the bench acquisition: the tilt ramp runs at
//! the pulse repetition rate, so every window sees the same mid-pulse tilt
//! `φ` and the same sweep rate `ω₀`, and the noiseless signal repeats
//! exactly from pulse to pulse.  Noise is drawn from counter-based streams
//! keyed by `(seed, channel, pulse)` — see [`crate::rng`] — which makes the
//! generated record a pure function of the configuration and safe to
//! produce pulse-parallel.
//!
//! Channel conventions: at the balanced working point the recorded channels
//! are `Sum = I₁ + I₂` and `Difference = I₂ − I₁`; at the dark-port working
//! point they are `Dark = I₁` plus a `Bright` calibration train that records
//! the undisturbed envelope for normalization.

use crate::rng::NoiseStream;
use crate::signal::{
    exact_port_intensities, InterferometerGeometry, PulseEnvelope, Technique, TiltState,
};
use rayon::prelude::*;
use thiserror::Error;

/// Errors from the instrument layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstrumentError {
    /// The requested readout does not match the interferometer working
    /// point or the noise model lacks a needed parameter.
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    /// A pulse does not fit its repetition window.
    #[error("invalid pulse window: {0}")]
    InvalidWindow(String),
    /// A trace cannot be cut into an integer number of equal windows.
    #[error("misaligned window: {0}")]
    MisalignedWindow(String),
    /// A constructor argument was out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Identity of a recorded channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Balanced-point port sum.
    Sum,
    /// Balanced-point port difference (port 2 minus port 1).
    Difference,
    /// Dark-port intensity.
    Dark,
    /// Bright calibration envelope.
    Bright,
}

impl Channel {
    /// Stable numeric code used in the binary trace format.
    pub fn code(self) -> u32 {
        match self {
            Channel::Sum => 0,
            Channel::Difference => 1,
            Channel::Dark => 2,
            Channel::Bright => 3,
        }
    }

    /// Inverse of [`Channel::code`].
    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Channel::Sum),
            1 => Some(Channel::Difference),
            2 => Some(Channel::Dark),
            3 => Some(Channel::Bright),
            _ => None,
        }
    }

    /// Lowercase name used in file names and CSV headers.
    pub fn name(self) -> &'static str {
        match self {
            Channel::Sum => "sum",
            Channel::Difference => "difference",
            Channel::Dark => "dark",
            Channel::Bright => "bright",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// Noise-stream labels.  Shot noise acts on physical port intensities before
// channels are formed; additive noise acts on the recorded channels.
const SHOT_PORT1: u64 = 100;
const SHOT_PORT2: u64 = 101;
const SHOT_BRIGHT: u64 = 103;

/// Pulse-train timing and digitization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrainConfig {
    /// Envelope of a single pulse; `center` is measured from the start of
    /// its repetition window.
    pub envelope: PulseEnvelope,
    /// Repetition rate (Hz); also the tilt-ramp rate.
    pub repetition_hz: f64,
    /// Number of pulses in the record.
    pub n_pulses: usize,
    /// Sampling interval (s).
    pub sample_dt: f64,
    /// Photons per intensity unit per sample for shot noise; `None` means
    /// shot noise cannot be applied.
    pub photon_scale: Option<f64>,
    /// Run seed for every noise stream attached to this train.
    pub seed: u64,
}

impl PulseTrainConfig {
    /// Validate and build a train configuration.
    ///
    /// Requires a positive sampling interval shorter than the period, at
    /// least one pulse, a repetition window that is an integer number of
    /// samples, a pulse that fits its window (`τ ≤ 0.15/f_r`, keeping
    /// truncated tails below `4·10⁻⁶` of the peak), and an envelope center
    /// inside the window.
    pub fn new(
        envelope: PulseEnvelope,
        repetition_hz: f64,
        n_pulses: usize,
        sample_dt: f64,
        photon_scale: Option<f64>,
        seed: u64,
    ) -> Result<Self, InstrumentError> {
        if !(repetition_hz.is_finite() && repetition_hz > 0.0) {
            return Err(InstrumentError::InvalidConfig(format!(
                "repetition rate must be positive, got {repetition_hz}"
            )));
        }
        if n_pulses == 0 {
            return Err(InstrumentError::InvalidConfig(
                "n_pulses must be at least 1".into(),
            ));
        }
        if !(sample_dt.is_finite() && sample_dt > 0.0) {
            return Err(InstrumentError::InvalidConfig(format!(
                "sample interval must be positive, got {sample_dt}"
            )));
        }
        let period = 1.0 / repetition_hz;
        if sample_dt >= period {
            return Err(InstrumentError::InvalidConfig(format!(
                "sample interval {sample_dt} must be shorter than the period {period}"
            )));
        }
        if let Some(scale) = photon_scale {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(InstrumentError::InvalidConfig(format!(
                    "photon scale must be positive, got {scale}"
                )));
            }
        }
        let cfg = Self {
            envelope,
            repetition_hz,
            n_pulses,
            sample_dt,
            photon_scale,
            seed,
        };
        cfg.samples_per_period()?;
        if envelope.tau > 0.15 * period {
            return Err(InstrumentError::InvalidWindow(format!(
                "pulse width tau = {} s does not fit the {} s repetition window \
                 (tau must not exceed 0.15/f_r = {} s)",
                envelope.tau,
                period,
                0.15 * period
            )));
        }
        if !(0.0..=period).contains(&envelope.center) {
            return Err(InstrumentError::InvalidWindow(format!(
                "envelope center {} s lies outside the [0, {}] s window",
                envelope.center, period
            )));
        }
        Ok(cfg)
    }

    /// Repetition period `1/f_r` (s).
    pub fn period(&self) -> f64 {
        1.0 / self.repetition_hz
    }

    /// Samples in one repetition window; errors if the window is not an
    /// integer number of samples (to one part in 10⁶).
    pub fn samples_per_period(&self) -> Result<usize, InstrumentError> {
        let raw = self.period() / self.sample_dt;
        let rounded = raw.round();
        if rounded < 1.0 || (raw - rounded).abs() > 1e-6 * rounded {
            return Err(InstrumentError::MisalignedWindow(format!(
                "period / sample_dt = {raw} is not an integer"
            )));
        }
        Ok(rounded as usize)
    }

    /// Total samples in the record.
    pub fn total_samples(&self) -> Result<usize, InstrumentError> {
        Ok(self.samples_per_period()? * self.n_pulses)
    }
}

/// Additive-noise and baseline model of the detection electronics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// RMS of white Gaussian noise added per sample (detector units).
    pub additive_rms: f64,
    /// Whether photon shot noise is applied (needs a photon scale on the
    /// train configuration).
    pub shot_noise: bool,
    /// Constant electronic offset added to every sample.
    pub baseline_offset: f64,
}

impl NoiseConfig {
    /// Noise-free, offset-free configuration.
    pub fn noiseless() -> Self {
        Self {
            additive_rms: 0.0,
            shot_noise: false,
            baseline_offset: 0.0,
        }
    }

    /// Validate the noise parameters.
    pub fn validate(&self) -> Result<(), InstrumentError> {
        if !(self.additive_rms.is_finite() && self.additive_rms >= 0.0) {
            return Err(InstrumentError::InvalidConfig(format!(
                "additive noise rms must be non-negative, got {}",
                self.additive_rms
            )));
        }
        if !self.baseline_offset.is_finite() {
            return Err(InstrumentError::InvalidConfig(
                "baseline offset must be finite".into(),
            ));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Preamplifier low-pass model: a cascade of identical one-pole sections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Corner frequency of each section (Hz).
    pub corner_hz: f64,
    /// Number of cascaded one-pole sections (1–4); two sections give the
    /// conventional 12 dB/octave roll-off.
    pub poles: u32,
    /// Whether the filter is applied at all.
    pub enabled: bool,
}

impl FilterConfig {
    /// The bench preamplifier: 30 Hz, two poles.
    pub fn bench_default() -> Self {
        Self {
            corner_hz: 30.0,
            poles: 2,
            enabled: true,
        }
    }

    /// Disabled filter.
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::bench_default()
        }
    }

    /// Validate against a sampling interval.
    pub fn validate(&self, sample_dt: f64) -> Result<(), InstrumentError> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.corner_hz.is_finite() && self.corner_hz > 0.0) {
            return Err(InstrumentError::InvalidConfig(format!(
                "filter corner must be positive, got {}",
                self.corner_hz
            )));
        }
        if !(1..=4).contains(&self.poles) {
            return Err(InstrumentError::InvalidConfig(format!(
                "filter pole count must lie in 1..=4, got {}",
                self.poles
            )));
        }
        if self.corner_hz * sample_dt >= 0.5 {
            return Err(InstrumentError::InvalidConfig(format!(
                "filter corner {} Hz is at or above the Nyquist rate for dt = {} s",
                self.corner_hz, sample_dt
            )));
        }
        Ok(())
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self::bench_default()
    }
}

/// A uniformly sampled single-channel record.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    /// Time of the first sample (s).
    pub t0: f64,
    /// Sampling interval (s), positive.
    pub dt: f64,
    /// Which recorded channel this is.
    pub channel: Channel,
    /// Sample values (detector units), all finite.
    pub samples: Vec<f64>,
}

impl SampledTrace {
    /// Build a trace, validating the timing and sample finiteness.
    pub fn new(
        t0: f64,
        dt: f64,
        channel: Channel,
        samples: Vec<f64>,
    ) -> Result<Self, InstrumentError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(InstrumentError::InvalidConfig(format!(
                "trace dt must be positive, got {dt}"
            )));
        }
        if !t0.is_finite() {
            return Err(InstrumentError::InvalidConfig(
                "trace t0 must be finite".into(),
            ));
        }
        if samples.is_empty() {
            return Err(InstrumentError::InvalidConfig(
                "trace must contain at least one sample".into(),
            ));
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(InstrumentError::InvalidConfig(format!(
                "sample {bad} is not finite"
            )));
        }
        Ok(Self {
            t0,
            dt,
            channel,
            samples,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Whether the trace is empty (never true for validated traces).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// The channel pair produced for one readout technique.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSet {
    /// Balanced readout: sum and difference channels.
    Abwv {
        /// Port-sum channel.
        sum: SampledTrace,
        /// Port-difference channel (port 2 minus port 1).
        difference: SampledTrace,
    },
    /// Dark-port readout: dark channel plus the bright calibration train.
    Wva {
        /// Dark-port channel.
        dark: SampledTrace,
        /// Bright calibration train (absent on imported data).
        bright: Option<SampledTrace>,
    },
}

impl TraceSet {
    /// The technique this set belongs to.
    pub fn technique(&self) -> Technique {
        match self {
            TraceSet::Abwv { .. } => Technique::Abwv,
            TraceSet::Wva { .. } => Technique::Wva,
        }
    }

    /// All traces in the set, primary channel first.
    pub fn traces(&self) -> Vec<&SampledTrace> {
        match self {
            TraceSet::Abwv { sum, difference } => vec![difference, sum],
            TraceSet::Wva { dark, bright } => {
                let mut v = vec![dark];
                v.extend(bright.as_ref());
                v
            }
        }
    }
}

/// Synthesize the full digitized record for one technique.
///
/// The pipeline per channel is: exact port intensities → per-port shot
/// noise (if enabled) → channel combination → per-channel additive noise
/// and baseline → low-pass filter.  Because the tilt ramp is synchronous
/// with the repetition window, the noiseless signal is identical in every
/// window and is computed once; noise is then drawn per `(channel, pulse)`
/// stream, so the record is independent of pulse evaluation order.
///
/// Errors: [`InstrumentError::ConfigMismatch`] when the working point does
/// not match the technique (ABWV requires the balanced point, WVA the dark
/// port) or when shot noise is requested without a photon scale;
/// [`InstrumentError::InvalidWindow`] / [`InstrumentError::MisalignedWindow`]
/// for timing problems.
pub fn generate_pulse_train(
    train: &PulseTrainConfig,
    tilt: &TiltState,
    geom: &InterferometerGeometry,
    mode: Technique,
    noise: &NoiseConfig,
    filt: &FilterConfig,
) -> Result<TraceSet, InstrumentError> {
    if geom.working_point() != mode.working_point() {
        return Err(InstrumentError::ConfigMismatch(format!(
            "{mode} readout requires the {:?} working point, geometry is at {:?}",
            mode.working_point(),
            geom.working_point()
        )));
    }
    noise.validate()?;
    filt.validate(train.sample_dt)?;
    if noise.shot_noise && train.photon_scale.is_none() {
        return Err(InstrumentError::ConfigMismatch(
            "shot noise requested but the train has no photon scale".into(),
        ));
    }
    let sp = train.samples_per_period()?;
    let dt = train.sample_dt;

    // One noiseless window, tilt referenced to the envelope center.  The
    // same block serves every pulse (see module docs).
    let mut port1 = vec![0.0f64; sp];
    let mut port2 = vec![0.0f64; sp];
    let mut bright = vec![0.0f64; sp];
    for i in 0..sp {
        let t = i as f64 * dt;
        let (a, b) = exact_port_intensities(t, tilt, geom, &train.envelope);
        port1[i] = a;
        port2[i] = b;
        bright[i] = train.envelope.value(t);
    }

    match mode {
        Technique::Abwv => {
            let (sum, diff) = synth_two_channel(
                train,
                noise,
                &port1,
                &port2,
                (SHOT_PORT1, SHOT_PORT2),
                (Channel::Sum, Channel::Difference),
            );
            Ok(TraceSet::Abwv {
                sum: finish_channel(train, filt, Channel::Sum, sum)?,
                difference: finish_channel(train, filt, Channel::Difference, diff)?,
            })
        }
        Technique::Wva => {
            let dark = synth_one_channel(train, noise, &port1, SHOT_PORT1, Channel::Dark);
            let bright = synth_one_channel(train, noise, &bright, SHOT_BRIGHT, Channel::Bright);
            Ok(TraceSet::Wva {
                dark: finish_channel(train, filt, Channel::Dark, dark)?,
                bright: Some(finish_channel(train, filt, Channel::Bright, bright)?),
            })
        }
    }
}

/// Shot-noise draw for one intensity sample.
#[inline]
fn shot_sample(clean: f64, scale: f64, stream: &mut NoiseStream) -> f64 {
    stream.poisson_approx(clean * scale) / scale
}

/// Build the sum and difference channels from the two port blocks.
fn synth_two_channel(
    train: &PulseTrainConfig,
    noise: &NoiseConfig,
    port1: &[f64],
    port2: &[f64],
    shot_labels: (u64, u64),
    channels: (Channel, Channel),
) -> (Vec<f64>, Vec<f64>) {
    let sp = port1.len();
    let use_shot = noise.shot_noise && train.photon_scale.is_some();
    let scale = train.photon_scale.unwrap_or(1.0);
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..train.n_pulses)
        .into_par_iter()
        .map(|pulse| {
            let pulse = pulse as u64;
            let mut first = Vec::with_capacity(sp);
            let mut second = Vec::with_capacity(sp);
            if use_shot {
                let mut s1 = NoiseStream::new(train.seed, &[shot_labels.0, pulse]);
                let mut s2 = NoiseStream::new(train.seed, &[shot_labels.1, pulse]);
                for i in 0..sp {
                    let a = shot_sample(port1[i], scale, &mut s1);
                    let b = shot_sample(port2[i], scale, &mut s2);
                    first.push(a + b);
                    second.push(b - a);
                }
            } else {
                for i in 0..sp {
                    first.push(port1[i] + port2[i]);
                    second.push(port2[i] - port1[i]);
                }
            }
            add_channel_noise(&mut first, train, noise, channels.0, pulse);
            add_channel_noise(&mut second, train, noise, channels.1, pulse);
            (first, second)
        })
        .collect();
    let mut sum = Vec::with_capacity(sp * train.n_pulses);
    let mut diff = Vec::with_capacity(sp * train.n_pulses);
    for (a, b) in blocks {
        sum.extend(a);
        diff.extend(b);
    }
    (sum, diff)
}

/// Build a single channel from one intensity block.
fn synth_one_channel(
    train: &PulseTrainConfig,
    noise: &NoiseConfig,
    block: &[f64],
    shot_label: u64,
    channel: Channel,
) -> Vec<f64> {
    let sp = block.len();
    let use_shot = noise.shot_noise && train.photon_scale.is_some();
    let scale = train.photon_scale.unwrap_or(1.0);
    let blocks: Vec<Vec<f64>> = (0..train.n_pulses)
        .into_par_iter()
        .map(|pulse| {
            let pulse = pulse as u64;
            let mut out = Vec::with_capacity(sp);
            if use_shot {
                let mut s = NoiseStream::new(train.seed, &[shot_label, pulse]);
                for &v in block {
                    out.push(shot_sample(v, scale, &mut s));
                }
            } else {
                out.extend_from_slice(block);
            }
            add_channel_noise(&mut out, train, noise, channel, pulse);
            out
        })
        .collect();
    let mut all = Vec::with_capacity(sp * train.n_pulses);
    for b in blocks {
        all.extend(b);
    }
    all
}

/// Additive Gaussian noise plus baseline for one pulse of one channel.
fn add_channel_noise(
    samples: &mut [f64],
    train: &PulseTrainConfig,
    noise: &NoiseConfig,
    channel: Channel,
    pulse: u64,
) {
    let b = noise.baseline_offset;
    if noise.additive_rms > 0.0 {
        let mut s = NoiseStream::new(train.seed, &[channel.code() as u64, pulse]);
        for v in samples.iter_mut() {
            *v += b + s.normal(noise.additive_rms);
        }
    } else if b != 0.0 {
        for v in samples.iter_mut() {
            *v += b;
        }
    }
}

/// Filter (when enabled) and wrap a raw channel into a trace.
fn finish_channel(
    train: &PulseTrainConfig,
    filt: &FilterConfig,
    channel: Channel,
    samples: Vec<f64>,
) -> Result<SampledTrace, InstrumentError> {
    let trace = SampledTrace::new(0.0, train.sample_dt, channel, samples)?;
    if filt.enabled {
        apply_lowpass(&trace, filt)
    } else {
        Ok(trace)
    }
}

/// Apply the cascaded one-pole low-pass to a trace, starting from rest.
///
/// Each section is the bilinear discretization of `H(s) = 1/(1 + s/ω_p)`
/// with the pole prewarped so the digital −3 dB point lands exactly on
/// `corner_hz`:
///
/// ```text
/// y[n] = (x[n] + x[n−1] + (K − 1)·y[n−1]) / (K + 1),   K = cot(π·f_c·dt)
/// ```
///
/// The DC gain of every section is exactly 1 and the gain at the corner is
/// exactly `1/√2` per section.  A disabled filter returns the trace
/// unchanged.
pub fn apply_lowpass(
    trace: &SampledTrace,
    filt: &FilterConfig,
) -> Result<SampledTrace, InstrumentError> {
    if !filt.enabled {
        return Ok(trace.clone());
    }
    filt.validate(trace.dt)?;
    let k = 1.0 / (std::f64::consts::PI * filt.corner_hz * trace.dt).tan();
    let a0 = 1.0 / (k + 1.0);
    let fb = (k - 1.0) * a0;
    let mut data = trace.samples.clone();
    for _ in 0..filt.poles {
        let mut x_prev = 0.0;
        let mut y_prev = 0.0;
        for v in data.iter_mut() {
            let x = *v;
            let y = (x + x_prev) * a0 + fb * y_prev;
            x_prev = x;
            y_prev = y;
            *v = y;
        }
    }
    SampledTrace::new(trace.t0, trace.dt, trace.channel, data)
}

/// Add baseline offset and white Gaussian noise to a trace using the given
/// stream.  Shot noise is not applied here — it acts on port intensities
/// inside [`generate_pulse_train`], before channels are formed.
pub fn add_noise(
    trace: &SampledTrace,
    noise: &NoiseConfig,
    stream: &mut NoiseStream,
) -> Result<SampledTrace, InstrumentError> {
    noise.validate()?;
    let mut data = trace.samples.clone();
    if noise.additive_rms > 0.0 {
        for v in data.iter_mut() {
            *v += noise.baseline_offset + stream.normal(noise.additive_rms);
        }
    } else if noise.baseline_offset != 0.0 {
        for v in data.iter_mut() {
            *v += noise.baseline_offset;
        }
    }
    SampledTrace::new(trace.t0, trace.dt, trace.channel, data)
}

/// Cut a trace into consecutive repetition windows of length `period`.
///
/// Errors with [`InstrumentError::MisalignedWindow`] when the period is not
/// an integer number of samples or the trace length is not a whole number
/// of windows.
pub fn slice_pulses(
    trace: &SampledTrace,
    period: f64,
) -> Result<Vec<SampledTrace>, InstrumentError> {
    let raw = period / trace.dt;
    let rounded = raw.round();
    if !(rounded >= 1.0 && (raw - rounded).abs() <= 1e-6 * rounded) {
        return Err(InstrumentError::MisalignedWindow(format!(
            "period / dt = {raw} is not an integer"
        )));
    }
    let sp = rounded as usize;
    if trace.len() % sp != 0 {
        return Err(InstrumentError::MisalignedWindow(format!(
            "trace length {} is not a multiple of the {sp}-sample window",
            trace.len()
        )));
    }
    Ok(trace
        .samples
        .chunks(sp)
        .enumerate()
        .map(|(kk, chunk)| SampledTrace {
            t0: trace.t0 + (kk * sp) as f64 * trace.dt,
            dt: trace.dt,
            channel: trace.channel,
            samples: chunk.to_vec(),
        })
        .collect())
}

/// Average a trace over its repetition windows, yielding one window whose
/// sample `i` is the mean of sample `i` across all windows.  Used to build
/// the bright calibration reference before fitting it once.
pub fn average_pulse_windows(
    trace: &SampledTrace,
    period: f64,
) -> Result<SampledTrace, InstrumentError> {
    let windows = slice_pulses(trace, period)?;
    let n = windows.len() as f64;
    let sp = windows[0].len();
    let mut acc = vec![0.0f64; sp];
    for w in &windows {
        for (a, &v) in acc.iter_mut().zip(&w.samples) {
            *a += v;
        }
    }
    for a in acc.iter_mut() {
        *a /= n;
    }
    SampledTrace::new(trace.t0, trace.dt, trace.channel, acc)
}
