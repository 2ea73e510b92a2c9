//! Sweep harness: run both readout techniques over tilt-offset grids,
//! tabulate recovered quantities against theory, detect the well-behaved
//! interval of each technique, and produce the comparison report.
//!
//! Every sweep point is simulated, sliced, fitted, and inverted in
//! isolation with noise streams keyed by `(seed, mode, φ, repeat)`, so the
//! row produced for a given point is independent of which other points are
//! in the grid and of evaluation order — grids can be subset, extended, or
//! run in parallel without changing any number.
//!
//! Failures at a point (degenerate inversion, non-converged fits, invalid
//! configuration) never abort the sweep; the row carries an error tag and
//! `NaN` measurements instead.

use crate::estimator::{
    abwv_estimate, ensemble_stats, fit_gaussian, wva_estimate, GaussianFit, PulseEstimate,
};
use crate::instrument::{
    average_pulse_windows, generate_pulse_train, slice_pulses, FilterConfig, NoiseConfig,
    PulseTrainConfig, SampledTrace, TraceSet,
};
use crate::io::IoError;
use crate::rng::mix_label;
use crate::signal::{
    postselection_probability, predicted_time_shift, ramp_angular_velocity, validity_margin,
    InterferometerGeometry, RampDrive, SignalError, Technique, TiltState, WorkingPoint,
};
use rayon::prelude::*;
use std::io::{Read, Write};
use thiserror::Error;

/// Errors from the harness layer.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// No sweep point satisfies the interval tolerance.
    #[error("no sweep point satisfies the tolerance")]
    NoValidPoints,
    /// The sweep configuration is inconsistent.
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    /// File-format failure while reading or writing tables.
    #[error(transparent)]
    Io(#[from] IoError),
}

/// How the tilt ramp is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveSpec {
    /// Physical triangle-wave drive; the sweep rate follows from the
    /// calibration.
    Ramp(RampDrive),
    /// Direct angular velocity (rad/s), bypassing the drive model.
    Explicit(f64),
}

impl DriveSpec {
    /// The true angular velocity applied to the mirror.
    pub fn omega0(&self) -> f64 {
        match self {
            DriveSpec::Ramp(d) => ramp_angular_velocity(d),
            DriveSpec::Explicit(w) => *w,
        }
    }
}

/// Tilt-offset grid for one technique.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiGrid {
    /// Explicit list of offsets (rad).
    List(Vec<f64>),
    /// Logarithmically spaced between two positive endpoints.
    Log {
        /// Smallest offset (rad).
        min: f64,
        /// Largest offset (rad).
        max: f64,
        /// Number of points (≥ 1).
        points: usize,
    },
}

impl PhiGrid {
    /// The conventional balanced-readout grid: 12 points, 83 nrad – 2.5 µrad.
    pub fn default_abwv() -> Self {
        PhiGrid::Log {
            min: 83e-9,
            max: 2.5e-6,
            points: 12,
        }
    }

    /// The conventional dark-port grid: 8 points, 1 µrad – 9 µrad.
    pub fn default_wva() -> Self {
        PhiGrid::Log {
            min: 1e-6,
            max: 9e-6,
            points: 8,
        }
    }

    /// Materialize the grid values.
    pub fn values(&self) -> Vec<f64> {
        match self {
            PhiGrid::List(v) => v.clone(),
            PhiGrid::Log { min, max, points } => {
                if *points <= 1 {
                    return vec![*min];
                }
                let n = *points;
                let ratio = (max / min).ln();
                (0..n)
                    .map(|i| min * (ratio * i as f64 / (n - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

/// How the leakage pedestal is split between the ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakageMode {
    /// Technique-appropriate default: symmetric at the balanced point
    /// (common-mode leakage cancels in the difference), asymmetric at the
    /// dark port (the pedestal lands on the monitored port — the
    /// pessimistic case the dark-port readout actually faces).
    Auto,
    /// Full pedestal on port 1 regardless of technique.
    Asymmetric,
    /// Even split regardless of technique.
    Symmetric,
}

impl LeakageMode {
    fn symmetric_for(self, mode: Technique) -> bool {
        match self {
            LeakageMode::Auto => mode == Technique::Abwv,
            LeakageMode::Asymmetric => false,
            LeakageMode::Symmetric => true,
        }
    }
}

impl std::str::FromStr for LeakageMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(LeakageMode::Auto),
            "asymmetric" => Ok(LeakageMode::Asymmetric),
            "symmetric" => Ok(LeakageMode::Symmetric),
            other => Err(format!(
                "unknown leakage mode {other:?} (expected auto, asymmetric, or symmetric)"
            )),
        }
    }
}

/// Full description of a comparison sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Techniques to sweep, in output order.
    pub modes: Vec<Technique>,
    /// Grid for the balanced readout.
    pub abwv_grid: PhiGrid,
    /// Grid for the dark-port readout.
    pub wva_grid: PhiGrid,
    /// Independent repeats pooled per point.
    pub repeats: usize,
    /// Pulse-train timing template; its seed field is replaced by the
    /// per-point derived seed.
    pub train: PulseTrainConfig,
    /// Tilt drive.
    pub drive: DriveSpec,
    /// Noise model.
    pub noise: NoiseConfig,
    /// Preamplifier filter.
    pub filter: FilterConfig,
    /// Vacuum wavelength (m).
    pub wavelength: f64,
    /// Effective lever arm (m).
    pub lever_arm: f64,
    /// Interference-contrast leakage fraction.
    pub leakage_epsilon: f64,
    /// Leakage bookkeeping.
    pub leakage_mode: LeakageMode,
    /// Master seed; every point derives its streams from it.
    pub seed: u64,
    /// Worker-thread override (`None`: the global pool decides).
    pub workers: Option<usize>,
}

impl SweepConfig {
    /// Geometry for one technique of this sweep.
    pub fn geometry_for(&self, mode: Technique) -> Result<InterferometerGeometry, SignalError> {
        let geom = InterferometerGeometry::new(self.wavelength, self.lever_arm, mode.working_point())?;
        let geom = if self.leakage_epsilon > 0.0 {
            geom.with_leakage(self.leakage_epsilon)?
                .with_symmetric_leakage(self.leakage_mode.symmetric_for(mode))
        } else {
            geom
        };
        Ok(geom)
    }

    /// Grid used by one technique.
    pub fn grid_for(&self, mode: Technique) -> &PhiGrid {
        match mode {
            Technique::Abwv => &self.abwv_grid,
            Technique::Wva => &self.wva_grid,
        }
    }

    /// Check global consistency; per-point problems surface as row tags.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.modes.is_empty() {
            return Err(HarnessError::InvalidConfig("no techniques selected".into()));
        }
        if self.repeats == 0 {
            return Err(HarnessError::InvalidConfig(
                "repeats must be at least 1".into(),
            ));
        }
        let probe = InterferometerGeometry::new(self.wavelength, self.lever_arm, WorkingPoint::Balanced)
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        for mode in &self.modes {
            for phi in self.grid_for(*mode).values() {
                if !(phi.is_finite() && phi > 0.0) {
                    return Err(HarnessError::InvalidConfig(format!(
                        "sweep offsets must be positive, got {phi}"
                    )));
                }
                if 2.0 * probe.phase_per_tilt() * phi >= std::f64::consts::FRAC_PI_2 {
                    return Err(HarnessError::InvalidConfig(format!(
                        "offset {phi} rad leaves the invertible range of the amplitude map"
                    )));
                }
            }
        }
        self.geometry_for(Technique::Abwv)
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.noise
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.filter
            .validate(self.train.sample_dt)
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        if self.noise.shot_noise && self.train.photon_scale.is_none() {
            return Err(HarnessError::InvalidConfig(
                "shot noise requested but no photon scale configured".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Technique of this point.
    pub mode: Technique,
    /// Commanded tilt offset (rad).
    pub phi_set: f64,
    /// Mean recovered tilt offset (rad).
    pub phi_hat: f64,
    /// Standard error of `phi_hat` over pulses, when at least two were
    /// pooled.
    pub phi_sem: Option<f64>,
    /// Mean measured time shift (s).
    pub delta_t: f64,
    /// Standard error of the time shift.
    pub delta_t_sem: Option<f64>,
    /// Mean recovered angular velocity (rad/s).
    pub omega0_hat: f64,
    /// Standard error of the angular velocity.
    pub omega0_sem: Option<f64>,
    /// Applied angular velocity (rad/s).
    pub omega0_true: f64,
    /// First-order predicted time shift at the nominal width (s).
    pub delta_t_theory: f64,
    /// Time-shift amplification `m/φ̂`.
    pub amplification: f64,
    /// Detected light fraction: `sin²(k₀Lφ)` at the dark port, 1 for the
    /// balanced readout.
    pub postselection: f64,
    /// Weakness parameter `ω₀τ/φ` at the nominal values.
    pub weak1: f64,
    /// Weakness parameter `2k₀Lφ`.
    pub weak2: f64,
    /// Pulses pooled into the means.
    pub n_pulses_used: usize,
    /// Pulses excluded for non-convergence.
    pub n_excluded: usize,
    /// Failure tag when the point produced no measurement.
    pub error: Option<String>,
}

fn mode_label(mode: Technique) -> u64 {
    match mode {
        Technique::Wva => 11,
        Technique::Abwv => 12,
    }
}

/// Seed for one `(mode, φ, repeat)` cell, derived so that every cell is
/// independent of grid composition and ordering.
pub fn point_seed(seed: u64, mode: Technique, phi: f64, repeat: usize) -> u64 {
    mix_label(
        mix_label(mix_label(seed, mode_label(mode)), phi.to_bits()),
        repeat as u64,
    )
}

struct PointMeasurement {
    per_pulse: Vec<PulseEstimate>,
    n_excluded: usize,
}

fn fit_windows(trace: &SampledTrace, period: f64) -> Result<Vec<GaussianFit>, String> {
    let windows = slice_pulses(trace, period).map_err(|e| e.to_string())?;
    windows
        .iter()
        .map(|w| fit_gaussian(w, None).map_err(|e| e.to_string()))
        .collect()
}

fn simulate_point(
    cfg: &SweepConfig,
    mode: Technique,
    phi: f64,
    omega_true: f64,
) -> Result<PointMeasurement, String> {
    let geom = cfg.geometry_for(mode).map_err(|e| e.to_string())?;
    let tilt = TiltState::new(phi, omega_true);
    let period = cfg.train.period();
    let mut per_pulse: Vec<PulseEstimate> = Vec::new();
    let mut n_excluded = 0usize;
    for repeat in 0..cfg.repeats {
        let mut train = cfg.train.clone();
        train.seed = point_seed(cfg.seed, mode, phi, repeat);
        let set = generate_pulse_train(&train, &tilt, &geom, mode, &cfg.noise, &cfg.filter)
            .map_err(|e| e.to_string())?;
        let est = match set {
            TraceSet::Abwv { sum, difference } => {
                let sum_fits = fit_windows(&sum, period)?;
                let diff_fits = fit_windows(&difference, period)?;
                abwv_estimate(&sum_fits, &diff_fits, &geom).map_err(|e| e.to_string())?
            }
            TraceSet::Wva { dark, bright } => {
                let bright = bright.ok_or_else(|| "bright train missing".to_string())?;
                let dark_fits = fit_windows(&dark, period)?;
                let avg = average_pulse_windows(&bright, period).map_err(|e| e.to_string())?;
                let bright_fit = fit_gaussian(&avg, None).map_err(|e| e.to_string())?;
                wva_estimate(&dark_fits, &bright_fit, &geom, period).map_err(|e| e.to_string())?
            }
        };
        let base = per_pulse.len();
        per_pulse.extend(est.per_pulse.iter().enumerate().map(|(i, p)| PulseEstimate {
            pulse_index: base + i,
            ..*p
        }));
        n_excluded += est.n_excluded;
    }
    if per_pulse.is_empty() {
        return Err("no converged pulse fits to invert".into());
    }
    Ok(PointMeasurement {
        per_pulse,
        n_excluded,
    })
}

fn run_point(cfg: &SweepConfig, mode: Technique, phi: f64) -> SweepRow {
    let omega_true = cfg.drive.omega0();
    let tau = cfg.train.envelope.tau;
    let delta_t_theory = predicted_time_shift(mode, omega_true, tau, phi).unwrap_or(f64::NAN);
    let (weak1, weak2, postselection) = match cfg.geometry_for(mode) {
        Ok(geom) => {
            let margin = validity_margin(&TiltState::new(phi, omega_true), &geom, &cfg.train.envelope);
            let (w1, w2) = margin.map(|m| (m.weak1, m.weak2)).unwrap_or((f64::NAN, f64::NAN));
            let post = match mode {
                Technique::Wva => postselection_probability(phi, &geom),
                Technique::Abwv => 1.0,
            };
            (w1, w2, post)
        }
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };
    let mut row = SweepRow {
        mode,
        phi_set: phi,
        phi_hat: f64::NAN,
        phi_sem: None,
        delta_t: f64::NAN,
        delta_t_sem: None,
        omega0_hat: f64::NAN,
        omega0_sem: None,
        omega0_true: omega_true,
        delta_t_theory,
        amplification: f64::NAN,
        postselection,
        weak1,
        weak2,
        n_pulses_used: 0,
        n_excluded: 0,
        error: None,
    };
    match simulate_point(cfg, mode, phi, omega_true) {
        Ok(m) => {
            let n = m.per_pulse.len();
            let mean = |f: fn(&PulseEstimate) -> f64| {
                m.per_pulse.iter().map(f).sum::<f64>() / n as f64
            };
            row.phi_hat = mean(|p| p.phi_hat);
            row.delta_t = mean(|p| p.delta_t);
            row.omega0_hat = mean(|p| p.omega0_hat);
            row.amplification = if row.phi_hat != 0.0 {
                mode.shift_factor() / row.phi_hat
            } else {
                f64::NAN
            };
            row.n_pulses_used = n;
            row.n_excluded = m.n_excluded;
            if n >= 2 {
                let sem = |f: fn(&PulseEstimate) -> f64| {
                    ensemble_stats(&m.per_pulse.iter().map(f).collect::<Vec<_>>())
                        .map(|s| s.sem)
                        .ok()
                };
                row.phi_sem = sem(|p| p.phi_hat);
                row.delta_t_sem = sem(|p| p.delta_t);
                row.omega0_sem = sem(|p| p.omega0_hat);
            }
        }
        Err(tag) => row.error = Some(tag),
    }
    row
}

/// Run the full sweep.  Never aborts: configuration problems and per-point
/// failures are recorded as row error tags.
pub fn run_sweep(cfg: &SweepConfig) -> Vec<SweepRow> {
    let points: Vec<(Technique, f64)> = cfg
        .modes
        .iter()
        .flat_map(|&m| cfg.grid_for(m).values().into_iter().map(move |p| (m, p)))
        .collect();
    if let Err(e) = cfg.validate() {
        let tag = e.to_string();
        return points
            .iter()
            .map(|&(m, phi)| SweepRow {
                mode: m,
                phi_set: phi,
                phi_hat: f64::NAN,
                phi_sem: None,
                delta_t: f64::NAN,
                delta_t_sem: None,
                omega0_hat: f64::NAN,
                omega0_sem: None,
                omega0_true: cfg.drive.omega0(),
                delta_t_theory: f64::NAN,
                amplification: f64::NAN,
                postselection: f64::NAN,
                weak1: f64::NAN,
                weak2: f64::NAN,
                n_pulses_used: 0,
                n_excluded: 0,
                error: Some(tag.clone()),
            })
            .collect();
    }
    let run = |points: &[(Technique, f64)]| {
        points
            .par_iter()
            .map(|&(m, phi)| run_point(cfg, m, phi))
            .collect::<Vec<_>>()
    };
    match cfg.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| run(&points)),
            Err(_) => run(&points),
        },
        None => run(&points),
    }
}

/// Contiguous φ range over which a technique tracks the applied velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSummary {
    /// Technique the interval belongs to.
    pub mode: Technique,
    /// Smallest offset in the interval (rad).
    pub phi_min: f64,
    /// Largest offset in the interval (rad).
    pub phi_max: f64,
    /// Number of grid points in the interval.
    pub n_points: usize,
}

/// Find, per technique, the longest contiguous run of sweep points whose
/// recovered velocity stays within `rel_tol` of the applied one.
///
/// Points carrying error tags, non-finite estimates, or a zero applied
/// velocity never qualify.  Techniques with no qualifying point are
/// omitted; when no technique qualifies at all the result is
/// [`HarnessError::NoValidPoints`].
pub fn detect_well_behaved_interval(
    rows: &[SweepRow],
    rel_tol: f64,
) -> Result<Vec<IntervalSummary>, HarnessError> {
    let mut out = Vec::new();
    let mut seen_modes: Vec<Technique> = Vec::new();
    for row in rows {
        if !seen_modes.contains(&row.mode) {
            seen_modes.push(row.mode);
        }
    }
    for mode in seen_modes {
        let mut pts: Vec<&SweepRow> = rows.iter().filter(|r| r.mode == mode).collect();
        pts.sort_by(|a, b| a.phi_set.total_cmp(&b.phi_set));
        let ok = |r: &SweepRow| {
            r.error.is_none()
                && r.omega0_hat.is_finite()
                && r.omega0_true != 0.0
                && ((r.omega0_hat / r.omega0_true) - 1.0).abs() <= rel_tol
        };
        let mut best: Option<(usize, usize)> = None;
        let mut start = None;
        for (i, r) in pts.iter().enumerate() {
            if ok(r) {
                if start.is_none() {
                    start = Some(i);
                }
                let s = start.unwrap();
                let len = i - s + 1;
                if best.map(|(bs, be)| be - bs + 1 < len).unwrap_or(true) {
                    best = Some((s, i));
                }
            } else {
                start = None;
            }
        }
        if let Some((s, e)) = best {
            out.push(IntervalSummary {
                mode,
                phi_min: pts[s].phi_set,
                phi_max: pts[e].phi_set,
                n_points: e - s + 1,
            });
        }
    }
    if out.is_empty() {
        Err(HarnessError::NoValidPoints)
    } else {
        Ok(out)
    }
}

/// Per-technique summary of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    /// Technique summarized.
    pub mode: Technique,
    /// Well-behaved interval, when one was detected.
    pub interval: Option<IntervalSummary>,
    /// Largest amplification inside the interval.
    pub max_amplification: Option<f64>,
    /// Offset at which the largest amplification occurs.
    pub best_phi: Option<f64>,
    /// Largest measured |time shift| inside the interval (s).
    pub max_abs_delta_t: Option<f64>,
    /// Smallest detected light fraction inside the interval.
    pub min_postselection: Option<f64>,
}

/// Comparison report across techniques.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// One entry per technique present in the sweep.
    pub entries: Vec<ReportEntry>,
    /// Ratio of the balanced-readout maximum amplification to the
    /// dark-port one, when both intervals exist.
    pub amplification_ratio: Option<f64>,
    /// Interferometric phase enhancement `2k₀L` (rad of interference phase
    /// per rad of tilt).
    pub phase_enhancement: f64,
}

/// Build the comparison report from sweep rows and detected intervals.
pub fn report(
    rows: &[SweepRow],
    intervals: &[IntervalSummary],
    geom: &InterferometerGeometry,
) -> Report {
    let mut entries = Vec::new();
    let mut modes: Vec<Technique> = Vec::new();
    for row in rows {
        if !modes.contains(&row.mode) {
            modes.push(row.mode);
        }
    }
    for mode in modes {
        let interval = intervals.iter().find(|i| i.mode == mode).cloned();
        let mut entry = ReportEntry {
            mode,
            interval: interval.clone(),
            max_amplification: None,
            best_phi: None,
            max_abs_delta_t: None,
            min_postselection: None,
        };
        if let Some(iv) = &interval {
            let in_iv = rows.iter().filter(|r| {
                r.mode == mode
                    && r.error.is_none()
                    && r.phi_set >= iv.phi_min
                    && r.phi_set <= iv.phi_max
            });
            for r in in_iv {
                if r.amplification.is_finite()
                    && entry
                        .max_amplification
                        .map(|m| r.amplification > m)
                        .unwrap_or(true)
                {
                    entry.max_amplification = Some(r.amplification);
                    entry.best_phi = Some(r.phi_set);
                }
                if r.delta_t.is_finite()
                    && entry
                        .max_abs_delta_t
                        .map(|m| r.delta_t.abs() > m)
                        .unwrap_or(true)
                {
                    entry.max_abs_delta_t = Some(r.delta_t.abs());
                }
                if r.postselection.is_finite()
                    && entry
                        .min_postselection
                        .map(|m| r.postselection < m)
                        .unwrap_or(true)
                {
                    entry.min_postselection = Some(r.postselection);
                }
            }
        }
        entries.push(entry);
    }
    let amp = |mode: Technique| {
        entries
            .iter()
            .find(|e| e.mode == mode)
            .and_then(|e| e.max_amplification)
    };
    let amplification_ratio = match (amp(Technique::Abwv), amp(Technique::Wva)) {
        (Some(a), Some(w)) if w != 0.0 => Some(a / w),
        _ => None,
    };
    Report {
        entries,
        amplification_ratio,
        phase_enhancement: 2.0 * geom.phase_per_tilt(),
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "tilt-to-interference phase enhancement 2k0L = {:.4e}", self.phase_enhancement)?;
        for e in &self.entries {
            writeln!(f, "technique {}:", e.mode)?;
            match &e.interval {
                Some(iv) => {
                    writeln!(
                        f,
                        "  well-behaved interval: [{:.4e}, {:.4e}] rad ({} points)",
                        iv.phi_min, iv.phi_max, iv.n_points
                    )?;
                    if let (Some(a), Some(p)) = (e.max_amplification, e.best_phi) {
                        writeln!(f, "  max amplification: {:.4e} at phi = {:.4e} rad", a, p)?;
                    }
                    if let Some(d) = e.max_abs_delta_t {
                        writeln!(f, "  max |time shift|: {:.4e} s", d)?;
                    }
                    if let Some(p) = e.min_postselection {
                        writeln!(f, "  min detected fraction: {:.4e}", p)?;
                    }
                }
                None => writeln!(f, "  no well-behaved interval detected")?,
            }
        }
        match self.amplification_ratio {
            Some(r) => {
                writeln!(f, "amplification ratio (balanced / dark-port): {:.2}", r)?;
                writeln!(
                    f,
                    "  (convention: each technique's maximum is its amplification column at the \
                     smallest tilt offset of its well-behaved interval)"
                )?;
            }
            None => writeln!(f, "amplification ratio: not available")?,
        }
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "NA".to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.12e}"),
        _ => "NA".to_string(),
    }
}

/// Column order of the sweep-row CSV.
pub const ROWS_HEADER: [&str; 17] = [
    "mode",
    "phi_set",
    "phi_hat",
    "phi_sem",
    "delta_t",
    "delta_t_sem",
    "omega0_hat",
    "omega0_sem",
    "omega0_true",
    "delta_t_theory",
    "amplification",
    "postselection",
    "weak1",
    "weak2",
    "n_pulses_used",
    "n_excluded",
    "error",
];

/// Write sweep rows as CSV (missing values as `NA`).
pub fn write_rows_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ROWS_HEADER).map_err(IoError::from)?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            fmt_f64(r.phi_set),
            fmt_f64(r.phi_hat),
            fmt_opt(r.phi_sem),
            fmt_f64(r.delta_t),
            fmt_opt(r.delta_t_sem),
            fmt_f64(r.omega0_hat),
            fmt_opt(r.omega0_sem),
            fmt_f64(r.omega0_true),
            fmt_f64(r.delta_t_theory),
            fmt_f64(r.amplification),
            fmt_f64(r.postselection),
            fmt_f64(r.weak1),
            fmt_f64(r.weak2),
            r.n_pulses_used.to_string(),
            r.n_excluded.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(IoError::from)?;
    }
    w.flush().map_err(IoError::from)?;
    Ok(())
}

/// Read sweep rows back from CSV.
pub fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<SweepRow>, HarnessError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = r.headers().map_err(IoError::from)?;
        if headers.len() != ROWS_HEADER.len() {
            return Err(HarnessError::Io(IoError::Malformed(format!(
                "expected {} columns, got {}",
                ROWS_HEADER.len(),
                headers.len()
            ))));
        }
    }
    let parse_f = |s: &str| -> Result<f64, HarnessError> {
        if s == "NA" {
            Ok(f64::NAN)
        } else {
            s.parse()
                .map_err(|_| HarnessError::Io(IoError::Malformed(format!("bad number {s:?}"))))
        }
    };
    let parse_opt = |s: &str| -> Result<Option<f64>, HarnessError> {
        if s == "NA" {
            Ok(None)
        } else {
            Ok(Some(parse_f(s)?))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(IoError::from)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let mode: Technique = field(0)
            .parse()
            .map_err(|e: SignalError| HarnessError::Io(IoError::Malformed(e.to_string())))?;
        let error = {
            let e = field(16);
            if e.is_empty() {
                None
            } else {
                Some(e.to_string())
            }
        };
        rows.push(SweepRow {
            mode,
            phi_set: parse_f(field(1))?,
            phi_hat: parse_f(field(2))?,
            phi_sem: parse_opt(field(3))?,
            delta_t: parse_f(field(4))?,
            delta_t_sem: parse_opt(field(5))?,
            omega0_hat: parse_f(field(6))?,
            omega0_sem: parse_opt(field(7))?,
            omega0_true: parse_f(field(8))?,
            delta_t_theory: parse_f(field(9))?,
            amplification: parse_f(field(10))?,
            postselection: parse_f(field(11))?,
            weak1: parse_f(field(12))?,
            weak2: parse_f(field(13))?,
            n_pulses_used: field(14).parse().map_err(|_| {
                HarnessError::Io(IoError::Malformed(format!(
                    "bad pulse count {:?}",
                    field(14)
                )))
            })?,
            n_excluded: field(15).parse().map_err(|_| {
                HarnessError::Io(IoError::Malformed(format!(
                    "bad exclusion count {:?}",
                    field(15)
                )))
            })?,
            error,
        });
    }
    Ok(rows)
}
