//! TOML configuration for the simulator.
//!
//! Every key is optional; an empty document yields the benchmark setup
//! (795 nm probe, 5.64 mm lever arm, 3 % leakage, 100 ms pulses at 1 Hz,
//! 60 pulses, 20 µs sampling, 30 Hz two-pole filter, triangle drive at
//! 156 nrad/s).  Unknown keys are rejected so typos fail loudly instead of
//! silently falling back to defaults.
//!
//! ```toml
//! [geometry]
//! wavelength_m = 795e-9
//! lever_arm_m = 5.64e-3
//! leakage_epsilon = 0.03
//! leakage_mode = "auto"
//!
//! [sweep]
//! modes = ["abwv", "wva"]
//! seed = 1
//! ```

use crate::harness::{DriveSpec, LeakageMode, PhiGrid, SweepConfig};
use crate::instrument::{FilterConfig, NoiseConfig, PulseTrainConfig};
use crate::signal::{effective_lever_arm, BeamGeometry, PulseEnvelope, RampDrive, Technique};
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

/// Errors raised while loading or resolving a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The file could not be read.
    #[error("cannot read configuration: {0}")]
    Io(#[from] std::io::Error),
    /// The document is not valid TOML for this schema.
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    /// The document parsed but the values are inconsistent.
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// `[geometry.beam]`: derive the lever arm from the beam layout.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    /// Path length of the long arm (m).
    pub l1_m: f64,
    /// Path length of the short arm (m).
    pub l2_m: f64,
    /// Folding angle of the long arm (rad).
    #[serde(default)]
    pub theta1_rad: f64,
    /// Folding angle of the short arm (rad).
    #[serde(default)]
    pub theta2_rad: f64,
}

/// `[geometry]` section.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Vacuum wavelength of the probe (m).
    pub wavelength_m: f64,
    /// Effective lever arm (m); mutually exclusive with `beam`.
    pub lever_arm_m: Option<f64>,
    /// Beam layout from which to derive the lever arm.
    pub beam: Option<BeamSection>,
    /// Interference-contrast leakage fraction in [0, 1).
    pub leakage_epsilon: f64,
    /// Leakage bookkeeping: `"auto"`, `"asymmetric"`, or `"symmetric"`.
    pub leakage_mode: String,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            wavelength_m: 795e-9,
            lever_arm_m: None,
            beam: None,
            leakage_epsilon: 0.03,
            leakage_mode: "auto".to_string(),
        }
    }
}

impl GeometrySection {
    /// Resolve the effective lever arm (m).
    pub fn lever_arm(&self) -> Result<f64, ConfigError> {
        match (&self.lever_arm_m, &self.beam) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid(
                "specify either lever_arm_m or beam, not both".into(),
            )),
            (Some(l), None) => Ok(*l),
            (None, Some(b)) => {
                let beam = BeamGeometry {
                    l1: b.l1_m,
                    l2: b.l2_m,
                    theta1: b.theta1_rad,
                    theta2: b.theta2_rad,
                };
                effective_lever_arm(&beam).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            (None, None) => Ok(5.64e-3),
        }
    }
}

/// `[pulse]` section.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    /// Peak intensity of the input envelope (arbitrary units).
    pub peak_intensity: f64,
    /// Gaussian width of the envelope (s).
    pub tau_s: f64,
    /// Envelope center within the repetition window (s).
    pub center_s: f64,
    /// Number of pulses per acquisition.
    pub n_pulses: usize,
    /// Sampling interval (s).
    pub sample_dt_s: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            peak_intensity: 1.0,
            tau_s: 0.1,
            center_s: 0.5,
            n_pulses: 60,
            sample_dt_s: 2e-5,
        }
    }
}

/// `[drive]` section.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// Mirror tilt per applied volt (rad/V).
    pub alpha_rad_per_v: f64,
    /// Peak-to-peak drive amplitude (V).
    pub vpp_v: f64,
    /// Repetition rate shared by the drive and the pulse train (Hz).
    pub f_r_hz: f64,
    /// Fraction of the period spent on the active ramp.
    pub duty_cycle: f64,
    /// Direct angular-velocity override (rad/s); bypasses the drive model.
    pub omega0_rad_s: Option<f64>,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            alpha_rad_per_v: 3.12e-6,
            vpp_v: 0.03,
            f_r_hz: 1.0,
            duty_cycle: 0.6,
            omega0_rad_s: None,
        }
    }
}

/// `[noise]` section.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Additive Gaussian noise RMS per sample (intensity units).
    pub additive_rms: f64,
    /// Enable photon shot noise (requires `photon_scale`).
    pub shot_noise: bool,
    /// Constant detector baseline added to every sample.
    pub baseline_offset: f64,
    /// Photons per intensity unit per sample, for shot noise.
    pub photon_scale: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            additive_rms: 0.005,
            shot_noise: false,
            baseline_offset: 0.0,
            photon_scale: None,
        }
    }
}

/// `[filter]` section.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// Corner frequency (Hz).
    pub corner_hz: f64,
    /// Number of cascaded one-pole sections.
    pub poles: u32,
    /// Whether the filter is applied at all.
    pub enabled: bool,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            corner_hz: 30.0,
            poles: 2,
            enabled: true,
        }
    }
}

/// `[sweep]` section.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Techniques to run, `"abwv"` and/or `"wva"`.
    pub modes: Vec<String>,
    /// Independent repeats pooled per sweep point.
    pub repeats: usize,
    /// Master seed for all noise streams.
    pub seed: u64,
    /// Worker-thread override.
    pub workers: Option<usize>,
    /// Relative velocity tolerance defining the well-behaved interval.
    pub rel_tol: f64,
    /// Balanced-readout grid: smallest offset (rad).
    pub abwv_phi_min: f64,
    /// Balanced-readout grid: largest offset (rad).
    pub abwv_phi_max: f64,
    /// Balanced-readout grid: number of log-spaced points.
    pub abwv_points: usize,
    /// Dark-port grid: smallest offset (rad).
    pub wva_phi_min: f64,
    /// Dark-port grid: largest offset (rad).
    pub wva_phi_max: f64,
    /// Dark-port grid: number of log-spaced points.
    pub wva_points: usize,
    /// Explicit balanced-readout offsets; overrides the log grid.
    pub abwv_phi_list: Option<Vec<f64>>,
    /// Explicit dark-port offsets; overrides the log grid.
    pub wva_phi_list: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            modes: vec!["abwv".to_string(), "wva".to_string()],
            repeats: 1,
            seed: 1,
            workers: None,
            rel_tol: 0.15,
            abwv_phi_min: 83e-9,
            abwv_phi_max: 2.5e-6,
            abwv_points: 12,
            wva_phi_min: 1e-6,
            wva_phi_max: 9e-6,
            wva_points: 8,
            abwv_phi_list: None,
            wva_phi_list: None,
        }
    }
}

/// Root of the configuration document.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    /// `[geometry]` section.
    pub geometry: GeometrySection,
    /// `[pulse]` section.
    pub pulse: PulseSection,
    /// `[drive]` section.
    pub drive: DriveSection,
    /// `[noise]` section.
    pub noise: NoiseSection,
    /// `[filter]` section.
    pub filter: FilterSection,
    /// `[sweep]` section.
    pub sweep: SweepSection,
}

impl ConfigFile {
    /// Parse a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Read and parse a TOML file.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Build the pulse-train template (seed 0; the harness derives
    /// per-point seeds, and single-shot callers set their own).
    pub fn to_train(&self) -> Result<PulseTrainConfig, ConfigError> {
        let envelope = PulseEnvelope::new(
            self.pulse.peak_intensity,
            self.pulse.tau_s,
            self.pulse.center_s,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        PulseTrainConfig::new(
            envelope,
            self.drive.f_r_hz,
            self.pulse.n_pulses,
            self.pulse.sample_dt_s,
            self.noise.photon_scale,
            0,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Resolve the drive specification.
    pub fn to_drive(&self) -> Result<DriveSpec, ConfigError> {
        match self.drive.omega0_rad_s {
            Some(w) => Ok(DriveSpec::Explicit(w)),
            None => {
                let ramp = RampDrive::with_duty_cycle(
                    self.drive.vpp_v,
                    self.drive.alpha_rad_per_v,
                    self.drive.f_r_hz,
                    self.drive.duty_cycle,
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(DriveSpec::Ramp(ramp))
            }
        }
    }

    /// Resolve the noise model.
    pub fn to_noise(&self) -> Result<NoiseConfig, ConfigError> {
        if self.noise.shot_noise && self.noise.photon_scale.is_none() {
            return Err(ConfigError::Invalid(
                "shot_noise = true requires photon_scale".into(),
            ));
        }
        let noise = NoiseConfig {
            additive_rms: self.noise.additive_rms,
            shot_noise: self.noise.shot_noise,
            baseline_offset: self.noise.baseline_offset,
        };
        noise
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(noise)
    }

    /// Resolve the filter model.
    pub fn to_filter(&self) -> Result<FilterConfig, ConfigError> {
        let filt = FilterConfig {
            corner_hz: self.filter.corner_hz,
            poles: self.filter.poles,
            enabled: self.filter.enabled,
        };
        filt.validate(self.pulse.sample_dt_s)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(filt)
    }

    /// Parse the technique list.
    pub fn to_modes(&self) -> Result<Vec<Technique>, ConfigError> {
        if self.sweep.modes.is_empty() {
            return Err(ConfigError::Invalid("sweep.modes must not be empty".into()));
        }
        self.sweep
            .modes
            .iter()
            .map(|m| m.parse().map_err(|e: crate::signal::SignalError| {
                ConfigError::Invalid(e.to_string())
            }))
            .collect()
    }

    /// Assemble the full sweep configuration.
    pub fn to_sweep_config(&self) -> Result<SweepConfig, ConfigError> {
        let abwv_grid = match &self.sweep.abwv_phi_list {
            Some(list) => PhiGrid::List(list.clone()),
            None => PhiGrid::Log {
                min: self.sweep.abwv_phi_min,
                max: self.sweep.abwv_phi_max,
                points: self.sweep.abwv_points,
            },
        };
        let wva_grid = match &self.sweep.wva_phi_list {
            Some(list) => PhiGrid::List(list.clone()),
            None => PhiGrid::Log {
                min: self.sweep.wva_phi_min,
                max: self.sweep.wva_phi_max,
                points: self.sweep.wva_points,
            },
        };
        let leakage_mode: LeakageMode = self
            .geometry
            .leakage_mode
            .parse()
            .map_err(ConfigError::Invalid)?;
        Ok(SweepConfig {
            modes: self.to_modes()?,
            abwv_grid,
            wva_grid,
            repeats: self.sweep.repeats,
            train: self.to_train()?,
            drive: self.to_drive()?,
            noise: self.to_noise()?,
            filter: self.to_filter()?,
            wavelength: self.geometry.wavelength_m,
            lever_arm: self.geometry.lever_arm()?,
            leakage_epsilon: self.geometry.leakage_epsilon,
            leakage_mode,
            seed: self.sweep.seed,
            workers: self.sweep.workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_document_yields_benchmark_defaults() {
        let cfg = ConfigFile::from_toml_str("").unwrap();
        let sweep = cfg.to_sweep_config().unwrap();
        assert_eq!(sweep.modes, vec![Technique::Abwv, Technique::Wva]);
        assert_eq!(sweep.repeats, 1);
        assert_eq!(sweep.seed, 1);
        assert_relative_eq!(sweep.wavelength, 795e-9, max_relative = 1e-12);
        assert_relative_eq!(sweep.lever_arm, 5.64e-3, max_relative = 1e-12);
        assert_relative_eq!(sweep.leakage_epsilon, 0.03, max_relative = 1e-12);
        assert_eq!(sweep.leakage_mode, LeakageMode::Auto);
        assert_eq!(sweep.train.n_pulses, 60);
        assert_relative_eq!(sweep.train.sample_dt, 2e-5, max_relative = 1e-12);
        assert_relative_eq!(sweep.train.envelope.tau, 0.1, max_relative = 1e-12);
        assert_relative_eq!(sweep.drive.omega0(), 156e-9, max_relative = 1e-9);
        assert!(sweep.filter.enabled);
        assert_relative_eq!(sweep.filter.corner_hz, 30.0, max_relative = 1e-12);
        assert_eq!(sweep.filter.poles, 2);
        assert_relative_eq!(sweep.noise.additive_rms, 0.005, max_relative = 1e-12);
        assert!(!sweep.noise.shot_noise);
        let abwv = sweep.abwv_grid.values();
        assert_eq!(abwv.len(), 12);
        assert_relative_eq!(abwv[0], 83e-9, max_relative = 1e-12);
        assert_relative_eq!(abwv[11], 2.5e-6, max_relative = 1e-12);
        let wva = sweep.wva_grid.values();
        assert_eq!(wva.len(), 8);
        assert_relative_eq!(wva[0], 1e-6, max_relative = 1e-12);
        assert_relative_eq!(wva[7], 9e-6, max_relative = 1e-12);
    }

    #[test]
    fn custom_document_overrides_everything() {
        let text = r#"
            [geometry]
            wavelength_m = 800e-9
            leakage_epsilon = 0.0
            leakage_mode = "symmetric"

            [geometry.beam]
            l1_m = 8e-3
            l2_m = 2.36e-3

            [pulse]
            peak_intensity = 2.0
            tau_s = 0.05
            center_s = 0.25
            n_pulses = 4
            sample_dt_s = 1e-4

            [drive]
            alpha_rad_per_v = 1e-6
            vpp_v = 0.1
            f_r_hz = 2.0
            duty_cycle = 0.5

            [noise]
            additive_rms = 0.0
            shot_noise = true
            photon_scale = 1e6

            [filter]
            enabled = false

            [sweep]
            modes = ["wva"]
            repeats = 3
            seed = 42
            rel_tol = 0.05
            wva_phi_list = [2e-6, 5e-6]
        "#;
        let cfg = ConfigFile::from_toml_str(text).unwrap();
        let sweep = cfg.to_sweep_config().unwrap();
        assert_eq!(sweep.modes, vec![Technique::Wva]);
        assert_eq!(sweep.repeats, 3);
        assert_eq!(sweep.seed, 42);
        assert_relative_eq!(sweep.wavelength, 800e-9, max_relative = 1e-12);
        // 8 mm − 2.36 mm at zero folding angles.
        assert_relative_eq!(sweep.lever_arm, 5.64e-3, max_relative = 1e-12);
        assert_eq!(sweep.leakage_mode, LeakageMode::Symmetric);
        assert_eq!(sweep.train.n_pulses, 4);
        assert_eq!(sweep.train.photon_scale, Some(1e6));
        assert_relative_eq!(sweep.train.repetition_hz, 2.0, max_relative = 1e-12);
        // ω₀ = αV·f_r/duty = 1e-6·0.1·2/0.5.
        assert_relative_eq!(sweep.drive.omega0(), 4e-7, max_relative = 1e-12);
        assert!(!sweep.filter.enabled);
        assert!(sweep.noise.shot_noise);
        assert_eq!(sweep.wva_grid, PhiGrid::List(vec![2e-6, 5e-6]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ConfigFile::from_toml_str("[geometry]\nwavelenght_m = 1e-6\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        let err = ConfigFile::from_toml_str("[typo_section]\nx = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn conflicting_lever_arm_sources_are_rejected() {
        let text = r#"
            [geometry]
            lever_arm_m = 5.64e-3

            [geometry.beam]
            l1_m = 8e-3
            l2_m = 2.36e-3
        "#;
        let cfg = ConfigFile::from_toml_str(text).unwrap();
        let err = cfg.to_sweep_config().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn invalid_values_are_rejected_with_context() {
        let cfg = ConfigFile::from_toml_str("[sweep]\nmodes = [\"sideways\"]\n").unwrap();
        assert!(matches!(cfg.to_modes(), Err(ConfigError::Invalid(_))));

        let cfg = ConfigFile::from_toml_str("[geometry]\nleakage_mode = \"left\"\n").unwrap();
        assert!(matches!(
            cfg.to_sweep_config(),
            Err(ConfigError::Invalid(_))
        ));

        let cfg = ConfigFile::from_toml_str("[noise]\nshot_noise = true\n").unwrap();
        assert!(matches!(cfg.to_noise(), Err(ConfigError::Invalid(_))));

        let cfg = ConfigFile::from_toml_str("[pulse]\ntau_s = -0.1\n").unwrap();
        assert!(matches!(cfg.to_train(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn explicit_velocity_override_takes_effect() {
        let cfg = ConfigFile::from_toml_str("[drive]\nomega0_rad_s = 1e-8\n").unwrap();
        assert_eq!(cfg.to_drive().unwrap(), DriveSpec::Explicit(1e-8));
    }
}
