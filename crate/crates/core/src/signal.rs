//! Closed-form optical signal model for the tilt interferometer.
//!
//! A pulsed Gaussian envelope enters a Sagnac loop whose counter-propagating
//! beams pick up a relative phase `δ(t) = 2·k₀·L·(φ + ω₀·t)` from a slowly
//! ramped mirror tilt, where `k₀ = 2π/λ`, `L` is the effective lever arm of
//! the tilting mirror, `φ` is the tilt offset at the pulse center and `ω₀`
//! its angular velocity.  Time is measured from the envelope center
//! throughout, so `φ` is always the mid-pulse tilt.
//!
//! The two output ports share the pulse energy according to the interference
//! phase and the chosen working point:
//!
//! * [`WorkingPoint::DarkPort`] — the classic weak-value configuration; port
//!   1 is nearly dark and carries the amplified time shift `2·ω₀·τ²/φ`.
//! * [`WorkingPoint::Balanced`] — biased a quarter wave away; the
//!   sum/difference pair realizes the almost-balanced readout with shift
//!   `ω₀·τ²/φ`.
//!
//! [`exact_port_intensities`] is the ground truth used by the instrument
//! layer; the `*_approx` functions are the first-order displaced-Gaussian
//! models that the fitting stage inverts.

use thiserror::Error;

/// Errors from the signal-model layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalError {
    /// `φ = 0` makes the first-order displaced-Gaussian models and the
    /// predicted time shift singular.
    #[error("phi = 0 is degenerate: the first-order time shift diverges")]
    DegeneratePhi,
    /// The beam geometry yields a non-positive effective lever arm.
    #[error("beam geometry yields a non-positive effective lever arm")]
    NonPositiveLeverArm,
    /// A constructor argument was out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Interferometer bias point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkingPoint {
    /// Bias phase 0: port 1 is dark except for the `sin²` post-selection
    /// leak — the weak-value-amplification configuration.
    DarkPort,
    /// Bias phase π/2: both ports carry half the light — the
    /// almost-balanced configuration read out via sum and difference.
    Balanced,
}

impl WorkingPoint {
    /// Bias phase `δ₀` in radians.
    pub fn bias_phase(self) -> f64 {
        match self {
            WorkingPoint::DarkPort => 0.0,
            WorkingPoint::Balanced => std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Readout technique selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    /// Dark-port weak-value amplification.
    Wva,
    /// Almost-balanced weak values (sum/difference homodyne).
    Abwv,
}

impl Technique {
    /// Stable lowercase name used in CSV columns and CLI flags.
    pub fn name(self) -> &'static str {
        match self {
            Technique::Wva => "wva",
            Technique::Abwv => "abwv",
        }
    }

    /// Working point the technique is operated at.
    pub fn working_point(self) -> WorkingPoint {
        match self {
            Technique::Wva => WorkingPoint::DarkPort,
            Technique::Abwv => WorkingPoint::Balanced,
        }
    }

    /// The factor `m` in the first-order time shift `m·ω₀·τ²/φ`.
    pub fn shift_factor(self) -> f64 {
        match self {
            Technique::Wva => 2.0,
            Technique::Abwv => 1.0,
        }
    }
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Technique {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wva" => Ok(Technique::Wva),
            "abwv" => Ok(Technique::Abwv),
            other => Err(SignalError::InvalidParameter(format!(
                "unknown technique {other:?} (expected \"wva\" or \"abwv\")"
            ))),
        }
    }
}

/// Folded-beam geometry of the tilting mirror: two reflections at distances
/// `l1 > l2` from the pivot under incidence angles `theta1`, `theta2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    /// Distance from the pivot to the first reflection point (m).
    pub l1: f64,
    /// Distance from the pivot to the second reflection point (m).
    pub l2: f64,
    /// Incidence angle at the first reflection (rad), in `[0, π/2)`.
    pub theta1: f64,
    /// Incidence angle at the second reflection (rad), in `[0, π/2)`.
    pub theta2: f64,
}

/// Effective lever arm `L = l1·cos θ1 − l2·cos θ2` of a folded two-bounce
/// beam path on the tilting mirror.
///
/// Returns [`SignalError::NonPositiveLeverArm`] when the inputs are out of
/// range (`l1 ≤ l2`, negative distances, angles outside `[0, π/2)`) or when
/// the combination evaluates to `L ≤ 0` — a degenerate geometry in which the
/// two bounces cancel.
pub fn effective_lever_arm(beam: &BeamGeometry) -> Result<f64, SignalError> {
    let ok_angle = |th: f64| th.is_finite() && (0.0..std::f64::consts::FRAC_PI_2).contains(&th);
    if !(beam.l1.is_finite() && beam.l2.is_finite() && beam.l2 >= 0.0 && beam.l1 > beam.l2) {
        return Err(SignalError::NonPositiveLeverArm);
    }
    if !ok_angle(beam.theta1) || !ok_angle(beam.theta2) {
        return Err(SignalError::NonPositiveLeverArm);
    }
    let arm = beam.l1 * beam.theta1.cos() - beam.l2 * beam.theta2.cos();
    if arm > 0.0 {
        Ok(arm)
    } else {
        Err(SignalError::NonPositiveLeverArm)
    }
}

/// Static optical parameters of the interferometer.
///
/// The lever arm may either be given directly or derived from a
/// [`BeamGeometry`]; in the latter case the stored arm is exactly
/// `effective_lever_arm(beam)` and the geometry is kept for reference.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerGeometry {
    wavelength: f64,
    lever_arm: f64,
    beam: Option<BeamGeometry>,
    working_point: WorkingPoint,
    leakage_epsilon: f64,
    leakage_symmetric: bool,
}

impl InterferometerGeometry {
    /// Build a geometry from an explicit lever arm.
    ///
    /// `wavelength` and `lever_arm` must be positive and finite.
    pub fn new(
        wavelength: f64,
        lever_arm: f64,
        working_point: WorkingPoint,
    ) -> Result<Self, SignalError> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(SignalError::InvalidParameter(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(lever_arm.is_finite() && lever_arm > 0.0) {
            return Err(SignalError::NonPositiveLeverArm);
        }
        Ok(Self {
            wavelength,
            lever_arm,
            beam: None,
            working_point,
            leakage_epsilon: 0.0,
            leakage_symmetric: false,
        })
    }

    /// Build a geometry whose lever arm is derived from a folded-beam layout.
    pub fn from_beam_geometry(
        wavelength: f64,
        beam: BeamGeometry,
        working_point: WorkingPoint,
    ) -> Result<Self, SignalError> {
        let arm = effective_lever_arm(&beam)?;
        let mut geom = Self::new(wavelength, arm, working_point)?;
        geom.beam = Some(beam);
        Ok(geom)
    }

    /// Set the interference-contrast leakage fraction `ε ∈ [0, 1)`.
    ///
    /// Leakage models imperfect mode overlap: a fraction `ε` of the light in
    /// the nominally interfering mode bypasses interference and lands on the
    /// monitored port as an envelope-shaped pedestal.
    pub fn with_leakage(mut self, epsilon: f64) -> Result<Self, SignalError> {
        if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
            return Err(SignalError::InvalidParameter(format!(
                "leakage epsilon must lie in [0, 1), got {epsilon}"
            )));
        }
        self.leakage_epsilon = epsilon;
        Ok(self)
    }

    /// Choose the symmetric leakage bookkeeping: the non-interfering fraction
    /// splits evenly between the ports, so the port sum stays exactly equal
    /// to the envelope and leakage cancels in the balanced difference.  The
    /// default (asymmetric) form puts the full pedestal on the monitored
    /// port 1 and leaves port 2 untouched — the pessimistic dark-port case.
    pub fn with_symmetric_leakage(mut self, symmetric: bool) -> Self {
        self.leakage_symmetric = symmetric;
        self
    }

    /// Replace the working point, keeping everything else.
    pub fn with_working_point(mut self, wp: WorkingPoint) -> Self {
        self.working_point = wp;
        self
    }

    /// Vacuum wavelength (m).
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Effective lever arm `L` (m).
    pub fn lever_arm(&self) -> f64 {
        self.lever_arm
    }

    /// Folded-beam layout the arm was derived from, if any.
    pub fn beam_geometry(&self) -> Option<&BeamGeometry> {
        self.beam.as_ref()
    }

    /// Interferometer bias point.
    pub fn working_point(&self) -> WorkingPoint {
        self.working_point
    }

    /// Leakage fraction `ε`.
    pub fn leakage_epsilon(&self) -> f64 {
        self.leakage_epsilon
    }

    /// Whether leakage splits evenly between the ports.
    pub fn leakage_symmetric(&self) -> bool {
        self.leakage_symmetric
    }

    /// Wavenumber `k₀ = 2π/λ` (rad/m).
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Phase-per-tilt coefficient `k₀·L` (rad per rad of tilt), always
    /// derived, never stored.
    pub fn phase_per_tilt(&self) -> f64 {
        self.wavenumber() * self.lever_arm
    }
}

/// Mirror tilt at the pulse center and its angular velocity.
///
/// The instantaneous tilt seen by a sample at time `t` of a pulse centered
/// at `t_c` is `φ + ω₀·(t − t_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltState {
    /// Tilt offset at the pulse center (rad).
    pub phi: f64,
    /// Tilt angular velocity (rad/s).
    pub omega0: f64,
}

impl TiltState {
    /// Convenience constructor.
    pub fn new(phi: f64, omega0: f64) -> Self {
        Self { phi, omega0 }
    }
}

/// Gaussian pulse envelope `E(t) = I₀·exp(−(t − t_c)²/(2τ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEnvelope {
    /// Peak intensity `I₀` (detector units), must be positive.
    pub peak_intensity: f64,
    /// Temporal width `τ` (s), must be positive.
    pub tau: f64,
    /// Center time `t_c` (s) within the pulse window.
    pub center: f64,
}

impl PulseEnvelope {
    /// Build an envelope, validating `I₀ > 0` and `τ > 0`.
    pub fn new(peak_intensity: f64, tau: f64, center: f64) -> Result<Self, SignalError> {
        if !(peak_intensity.is_finite() && peak_intensity > 0.0) {
            return Err(SignalError::InvalidParameter(format!(
                "peak intensity must be positive, got {peak_intensity}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(SignalError::InvalidParameter(format!(
                "pulse width tau must be positive, got {tau}"
            )));
        }
        if !center.is_finite() {
            return Err(SignalError::InvalidParameter(format!(
                "pulse center must be finite, got {center}"
            )));
        }
        Ok(Self {
            peak_intensity,
            tau,
            center,
        })
    }

    /// Envelope value at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.tau;
        self.peak_intensity * (-0.5 * z * z).exp()
    }
}

/// Triangle-wave piezo ramp driving the mirror tilt.
///
/// The mirror angle follows `α·V(t)` where `V` is a triangle wave of
/// peak-to-peak amplitude `V_pp` at repetition rate `f_r`; during the rising
/// fraction `duty` of each period the tilt sweeps linearly through its full
/// range, giving the constant angular velocity returned by
/// [`ramp_angular_velocity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampDrive {
    /// Peak-to-peak drive voltage (V).
    pub vpp: f64,
    /// Piezo tilt calibration `α` (rad/V).
    pub alpha: f64,
    /// Ramp repetition rate (Hz).
    pub repetition_hz: f64,
    /// Rising-edge fraction of the period, in `(0, 1)`.
    pub duty_cycle: f64,
}

impl RampDrive {
    /// Build a ramp drive with the conventional 60 % rising edge.
    pub fn new(vpp: f64, alpha: f64, repetition_hz: f64) -> Result<Self, SignalError> {
        Self::with_duty_cycle(vpp, alpha, repetition_hz, 0.6)
    }

    /// Build a ramp drive with an explicit duty cycle.
    pub fn with_duty_cycle(
        vpp: f64,
        alpha: f64,
        repetition_hz: f64,
        duty_cycle: f64,
    ) -> Result<Self, SignalError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SignalError::InvalidParameter(format!(
                    "{name} must be non-negative and finite, got {v}"
                )))
            }
        };
        pos("vpp", vpp)?;
        pos("alpha", alpha)?;
        if !(repetition_hz.is_finite() && repetition_hz > 0.0) {
            return Err(SignalError::InvalidParameter(format!(
                "repetition rate must be positive, got {repetition_hz}"
            )));
        }
        if !(duty_cycle.is_finite() && duty_cycle > 0.0 && duty_cycle < 1.0) {
            return Err(SignalError::InvalidParameter(format!(
                "duty cycle must lie in (0, 1), got {duty_cycle}"
            )));
        }
        Ok(Self {
            vpp,
            alpha,
            repetition_hz,
            duty_cycle,
        })
    }
}

/// Constant tilt angular velocity on the rising edge of the ramp:
/// `ω₀ = α·V_pp·f_r / duty`.
///
/// With the conventional 60 % duty cycle this is `5·α·V_pp·f_r/3`.
pub fn ramp_angular_velocity(drive: &RampDrive) -> f64 {
    drive.alpha * drive.vpp * drive.repetition_hz / drive.duty_cycle
}

/// Exact instantaneous intensities `(I₁, I₂)` at the two output ports.
///
/// With `ψ(t) = (δ(t) − δ₀)/2`, `δ(t) = 2·k₀·L·(φ + ω₀·(t − t_c))` and the
/// bias `δ₀` from the working point, the ideal split is
/// `I₁ = E(t)·sin²ψ`, `I₂ = E(t)·cos²ψ`: at the dark-port point (`δ₀ = 0`)
/// port 1 carries `E·sin²(k₀L(φ + ω₀Δt))` and at the balanced point
/// (`δ₀ = π/2`) the difference `I₂ − I₁ = E·sin δ` is first-order in the
/// tilt.  Leakage `ε` adds a non-interfering pedestal according to the
/// bookkeeping chosen on the geometry:
///
/// * asymmetric (default): `I₁ = E·[(1−ε)·sin²ψ + ε]`, `I₂ = E·cos²ψ`;
/// * symmetric: `I₁ = E·[(1−ε)·sin²ψ + ε/2]`, and likewise for `I₂` with
///   `cos²ψ`, so `I₁ + I₂ = E` exactly.
///
/// Energy conservation `I₁ + I₂ = E(t)` holds exactly at `ε = 0`.
pub fn exact_port_intensities(
    t: f64,
    tilt: &TiltState,
    geom: &InterferometerGeometry,
    env: &PulseEnvelope,
) -> (f64, f64) {
    let e = env.value(t);
    let delta = 2.0 * geom.phase_per_tilt() * (tilt.phi + tilt.omega0 * (t - env.center));
    let psi = 0.5 * (delta - geom.working_point.bias_phase());
    let s = psi.sin();
    let s2 = s * s;
    let c2 = 1.0 - s2;
    let eps = geom.leakage_epsilon;
    if eps == 0.0 {
        (e * s2, e * c2)
    } else if geom.leakage_symmetric {
        (
            e * ((1.0 - eps) * s2 + 0.5 * eps),
            e * ((1.0 - eps) * c2 + 0.5 * eps),
        )
    } else {
        (e * ((1.0 - eps) * s2 + eps), e * c2)
    }
}

/// First-order sum signal at the balanced point: the bare envelope
/// `I₊(t) = E(t)`, independent of the tilt.
///
/// `tilt` and `geom` are accepted so the signature matches the other channel
/// models; neither enters the first-order sum.
pub fn sum_signal_approx(
    t: f64,
    _tilt: &TiltState,
    _geom: &InterferometerGeometry,
    env: &PulseEnvelope,
) -> f64 {
    env.value(t)
}

/// First-order difference signal at the balanced point: a displaced Gaussian
/// `I₋(t) = I₀·sin(2k₀Lφ)·exp(−(t − t_c − ω₀τ²/φ)²/(2τ²))`.
///
/// Valid in the weak regime `|ω₀|τ ≪ |φ|` and `2k₀L|φ| ≪ 1`; degenerate at
/// `φ = 0` where the displacement diverges.
pub fn diff_signal_approx(
    t: f64,
    tilt: &TiltState,
    geom: &InterferometerGeometry,
    env: &PulseEnvelope,
) -> Result<f64, SignalError> {
    if tilt.phi == 0.0 {
        return Err(SignalError::DegeneratePhi);
    }
    let shift = tilt.omega0 * env.tau * env.tau / tilt.phi;
    let z = (t - env.center - shift) / env.tau;
    Ok(env.peak_intensity * (2.0 * geom.phase_per_tilt() * tilt.phi).sin() * (-0.5 * z * z).exp())
}

/// First-order dark-port signal: a displaced Gaussian
/// `I(t) = I₀·sin²(k₀Lφ)·exp(−(t − t_c − 2ω₀τ²/φ)²/(2τ²))`.
///
/// The time shift is twice the balanced-point one; the price is the
/// `sin²(k₀Lφ)` post-selection factor on the amplitude.  Degenerate at
/// `φ = 0`.
pub fn wva_dark_approx(
    t: f64,
    tilt: &TiltState,
    geom: &InterferometerGeometry,
    env: &PulseEnvelope,
) -> Result<f64, SignalError> {
    if tilt.phi == 0.0 {
        return Err(SignalError::DegeneratePhi);
    }
    let shift = 2.0 * tilt.omega0 * env.tau * env.tau / tilt.phi;
    let z = (t - env.center - shift) / env.tau;
    let s = (geom.phase_per_tilt() * tilt.phi).sin();
    Ok(env.peak_intensity * s * s * (-0.5 * z * z).exp())
}

/// Dark-port post-selection probability `sin²(k₀·L·φ)` — the detected
/// fraction of the input light in the WVA configuration.
pub fn postselection_probability(phi: f64, geom: &InterferometerGeometry) -> f64 {
    let s = (geom.phase_per_tilt() * phi).sin();
    s * s
}

/// First-order predicted envelope time shift for a technique:
/// `Δt = m·ω₀·τ²/φ` with `m = 1` (ABWV) or `m = 2` (WVA).
///
/// Degenerate at `φ = 0`.
pub fn predicted_time_shift(
    mode: Technique,
    omega0: f64,
    tau: f64,
    phi: f64,
) -> Result<f64, SignalError> {
    if phi == 0.0 {
        return Err(SignalError::DegeneratePhi);
    }
    Ok(mode.shift_factor() * omega0 * tau * tau / phi)
}

/// Dimensionless smallness parameters of the first-order expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityMargin {
    /// `ω₀·τ/φ` — the tilt swept during one pulse width relative to the
    /// offset; the displaced-Gaussian picture needs `|weak1| ≪ 1`.
    pub weak1: f64,
    /// `2·k₀·L·φ` — the interference phase offset; linearizing the
    /// interference law needs `|weak2| ≪ 1`.
    pub weak2: f64,
}

/// Evaluate both weakness parameters for a working point of a sweep.
///
/// Degenerate at `φ = 0` where `weak1` diverges.
pub fn validity_margin(
    tilt: &TiltState,
    geom: &InterferometerGeometry,
    env: &PulseEnvelope,
) -> Result<ValidityMargin, SignalError> {
    if tilt.phi == 0.0 {
        return Err(SignalError::DegeneratePhi);
    }
    Ok(ValidityMargin {
        weak1: tilt.omega0 * env.tau / tilt.phi,
        weak2: 2.0 * geom.phase_per_tilt() * tilt.phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 795e-9;
    const LEVER: f64 = 5.64e-3;

    fn geom(wp: WorkingPoint) -> InterferometerGeometry {
        InterferometerGeometry::new(LAMBDA, LEVER, wp).unwrap()
    }

    #[test]
    fn phase_per_tilt_matches_reference_value() {
        // 2π/795e-9 · 5.64e-3, evaluated independently with 50-digit
        // arithmetic and rounded to f64.
        let g = geom(WorkingPoint::Balanced);
        assert_relative_eq!(g.phase_per_tilt(), 44575.0504811231, max_relative = 1e-12);
        assert_relative_eq!(
            2.0 * g.phase_per_tilt(),
            89150.1009622462,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lever_arm_formula_and_degenerate_cases() {
        // Equal bounces cancel exactly.
        let degenerate = BeamGeometry {
            l1: 10e-3,
            l2: 10e-3,
            theta1: 0.3,
            theta2: 0.3,
        };
        assert_eq!(
            effective_lever_arm(&degenerate),
            Err(SignalError::NonPositiveLeverArm)
        );

        // Normal incidence: the arm is just the length difference.
        let straight = BeamGeometry {
            l1: 10e-3,
            l2: 4e-3,
            theta1: 0.0,
            theta2: 0.0,
        };
        assert_relative_eq!(
            effective_lever_arm(&straight).unwrap(),
            6e-3,
            max_relative = 1e-15
        );

        // Single bounce at 22.5 degrees: L = l1·cos(22.5°),
        // cos(22.5°) = 0.9238795325112867.
        let folded = BeamGeometry {
            l1: 6.1047e-3,
            l2: 0.0,
            theta1: 22.5f64.to_radians(),
            theta2: 0.0,
        };
        assert_relative_eq!(
            effective_lever_arm(&folded).unwrap(),
            6.1047e-3 * 0.9238795325112867,
            max_relative = 1e-14
        );

        // Out-of-range angle.
        let bad_angle = BeamGeometry {
            l1: 10e-3,
            l2: 0.0,
            theta1: 1.6,
            theta2: 0.0,
        };
        assert!(effective_lever_arm(&bad_angle).is_err());
    }

    #[test]
    fn geometry_from_beam_stores_exact_arm() {
        let beam = BeamGeometry {
            l1: 8e-3,
            l2: 2e-3,
            theta1: 0.2,
            theta2: 0.1,
        };
        let g =
            InterferometerGeometry::from_beam_geometry(LAMBDA, beam, WorkingPoint::DarkPort)
                .unwrap();
        assert_eq!(g.lever_arm(), effective_lever_arm(&beam).unwrap());
        assert_eq!(g.beam_geometry(), Some(&beam));
    }

    #[test]
    fn ramp_velocity_bench_calibration() {
        // α = 3.12 µrad/V, V_pp = 30 mV, f_r = 1 Hz, 60 % duty
        // → ω₀ = 3.12e-6 · 0.03 · 1 / 0.6 = 156 nrad/s.
        let d = RampDrive::new(0.03, 3.12e-6, 1.0).unwrap();
        assert_relative_eq!(ramp_angular_velocity(&d), 156e-9, max_relative = 1e-12);

        // Ten times the drive voltage scales linearly.
        let d10 = RampDrive::new(0.3, 3.12e-6, 1.0).unwrap();
        assert_relative_eq!(ramp_angular_velocity(&d10), 1.56e-6, max_relative = 1e-12);

        // Zero drive voltage freezes the mirror.
        let still = RampDrive::new(0.0, 3.12e-6, 1.0).unwrap();
        assert_eq!(ramp_angular_velocity(&still), 0.0);

        // General duty cycle: 50 % doubles the slope of a unit drive.
        let half = RampDrive::with_duty_cycle(1.0, 1.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(ramp_angular_velocity(&half), 2.0, max_relative = 1e-15);

        assert!(RampDrive::with_duty_cycle(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(RampDrive::with_duty_cycle(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(RampDrive::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn dark_port_is_dark_at_zero_tilt() {
        let g = geom(WorkingPoint::DarkPort);
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();
        let tilt = TiltState::new(0.0, 0.0);
        for &t in &[0.0, 0.25, 0.5, 0.6, 1.0] {
            let (i1, i2) = exact_port_intensities(t, &tilt, &g, &env);
            assert_eq!(i1, 0.0);
            assert_relative_eq!(i2, env.value(t), max_relative = 1e-15);
        }
    }

    #[test]
    fn balanced_point_splits_evenly_at_zero_tilt() {
        let g = geom(WorkingPoint::Balanced);
        let env = PulseEnvelope::new(2.0, 0.1, 0.5).unwrap();
        let tilt = TiltState::new(0.0, 0.0);
        let (i1, i2) = exact_port_intensities(0.5, &tilt, &g, &env);
        assert_relative_eq!(i1, 1.0, max_relative = 1e-12);
        assert_relative_eq!(i2, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn dark_port_peak_equals_postselection_probability() {
        // sin²(k₀L·4µrad) = 0.031455498347385, frozen from an independent
        // high-precision evaluation.
        let g = geom(WorkingPoint::DarkPort);
        let env = PulseEnvelope::new(1.0, 0.1, 0.0).unwrap();
        let tilt = TiltState::new(4e-6, 0.0);
        let (i1, _) = exact_port_intensities(0.0, &tilt, &g, &env);
        assert_relative_eq!(i1, 0.031455498347385, max_relative = 1e-12);
        assert_relative_eq!(
            postselection_probability(4e-6, &g),
            0.031455498347385,
            max_relative = 1e-12
        );
    }

    #[test]
    fn energy_is_conserved_without_leakage() {
        for wp in [WorkingPoint::DarkPort, WorkingPoint::Balanced] {
            let g = geom(wp);
            let env = PulseEnvelope::new(1.7, 0.1, 0.5).unwrap();
            for &phi in &[-4e-6, -83e-9, 83e-9, 1e-6, 9e-6] {
                for &omega in &[0.0, 156e-9, -1.56e-6] {
                    let tilt = TiltState::new(phi, omega);
                    for k in 0..=20 {
                        let t = 0.05 * k as f64;
                        let (i1, i2) = exact_port_intensities(t, &tilt, &g, &env);
                        let e = env.value(t);
                        assert!((i1 + i2 - e).abs() <= 1e-12 * e.max(1e-300));
                        assert!(i1 >= 0.0 && i2 >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn leakage_bookkeeping_identities() {
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();
        let tilt = TiltState::new(2e-6, 156e-9);
        let eps = 0.03;

        // Asymmetric: port 2 untouched, port sum gains ε·cos²ψ·E.
        let asym = geom(WorkingPoint::DarkPort).with_leakage(eps).unwrap();
        let clean = geom(WorkingPoint::DarkPort);
        for k in 0..=10 {
            let t = 0.1 * k as f64;
            let (l1, l2) = exact_port_intensities(t, &tilt, &asym, &env);
            let (c1, c2) = exact_port_intensities(t, &tilt, &clean, &env);
            let e = env.value(t);
            assert_relative_eq!(l2, c2, max_relative = 1e-14);
            assert!((l1 - ((1.0 - eps) * c1 + eps * e)).abs() <= 1e-14 * e.max(1e-300));
            assert!(((l1 + l2) - (e + eps * (c2 - 0.0))).abs() <= 1e-12 * e.max(1e-300));
        }

        // Symmetric: the port sum equals the envelope exactly.
        let sym = geom(WorkingPoint::Balanced)
            .with_leakage(eps)
            .unwrap()
            .with_symmetric_leakage(true);
        for k in 0..=10 {
            let t = 0.1 * k as f64;
            let (s1, s2) = exact_port_intensities(t, &tilt, &sym, &env);
            let e = env.value(t);
            assert!((s1 + s2 - e).abs() <= 1e-12 * e.max(1e-300));
        }

        assert!(geom(WorkingPoint::DarkPort).with_leakage(1.0).is_err());
        assert!(geom(WorkingPoint::DarkPort).with_leakage(-0.1).is_err());
    }

    #[test]
    fn sum_approx_is_tilt_independent() {
        let g = geom(WorkingPoint::Balanced);
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();
        let a = sum_signal_approx(0.42, &TiltState::new(1e-6, 156e-9), &g, &env);
        let b = sum_signal_approx(0.42, &TiltState::new(0.0, 0.0), &g, &env);
        assert_eq!(a, b);
        assert_relative_eq!(a, env.value(0.42), max_relative = 1e-15);
        // Peak value and 1/√e point of the envelope.
        assert_relative_eq!(env.value(0.5), 1.0, max_relative = 1e-15);
        assert_relative_eq!(env.value(0.6), (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn diff_approx_displaced_gaussian() {
        let g = geom(WorkingPoint::Balanced);
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();

        // φ = 83 nrad: amplitude sin(2k₀L·φ) = 7.399390857546e-3 (frozen
        // from an independent high-precision evaluation), peak displaced by
        // ω₀τ²/φ = 18.795180722891564 ms.
        let tilt = TiltState::new(83e-9, 156e-9);
        let shift = 156e-9 * 0.01 / 83e-9;
        assert_relative_eq!(shift, 18.795180722891564e-3, max_relative = 1e-12);
        let peak = diff_signal_approx(0.5 + shift, &tilt, &g, &env).unwrap();
        assert_relative_eq!(peak, 7.399390857546e-3, max_relative = 1e-11);
        // One τ off the displaced center: down by exp(-1/2).
        let off = diff_signal_approx(0.5 + shift + 0.1, &tilt, &g, &env).unwrap();
        assert_relative_eq!(off, peak * (-0.5f64).exp(), max_relative = 1e-12);

        // ω₀ = 0: centered at the envelope center.
        let still = TiltState::new(1e-6, 0.0);
        let v = diff_signal_approx(0.5, &still, &g, &env).unwrap();
        assert_relative_eq!(
            v,
            (2.0 * g.phase_per_tilt() * 1e-6).sin(),
            max_relative = 1e-13
        );

        assert_eq!(
            diff_signal_approx(0.5, &TiltState::new(0.0, 156e-9), &g, &env),
            Err(SignalError::DegeneratePhi)
        );
    }

    #[test]
    fn wva_approx_has_twice_the_shift() {
        let g = geom(WorkingPoint::DarkPort);
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();
        let tilt = TiltState::new(4e-6, 156e-9);

        let abwv = predicted_time_shift(Technique::Abwv, 156e-9, 0.1, 4e-6).unwrap();
        let wva = predicted_time_shift(Technique::Wva, 156e-9, 0.1, 4e-6).unwrap();
        assert_relative_eq!(wva / abwv, 2.0, max_relative = 1e-15);
        assert_relative_eq!(wva, 0.78e-3, max_relative = 1e-12);

        // The dark-port approx peaks at center + 2ω₀τ²/φ with the
        // post-selection amplitude.
        let peak = wva_dark_approx(0.5 + wva, &tilt, &g, &env).unwrap();
        assert_relative_eq!(
            peak,
            postselection_probability(4e-6, &g),
            max_relative = 1e-13
        );

        assert_eq!(
            predicted_time_shift(Technique::Wva, 156e-9, 0.1, 0.0),
            Err(SignalError::DegeneratePhi)
        );
        // Frozen headline shift: ABWV at 83 nrad.
        let headline = predicted_time_shift(Technique::Abwv, 156e-9, 0.1, 83e-9).unwrap();
        assert_relative_eq!(headline, 18.795180722891564e-3, max_relative = 1e-12);
        // Still mirror: no shift.
        assert_eq!(
            predicted_time_shift(Technique::Abwv, 0.0, 0.1, 1e-6).unwrap(),
            0.0
        );
    }

    #[test]
    fn postselection_periodicity_and_parity() {
        let g = geom(WorkingPoint::DarkPort);
        let period = std::f64::consts::PI / g.phase_per_tilt();
        for &phi in &[0.0, 83e-9, 4e-6, 9e-6] {
            let p0 = postselection_probability(phi, &g);
            let p1 = postselection_probability(phi + period, &g);
            assert!((p0 - p1).abs() < 1e-9);
            assert!((p0 - postselection_probability(-phi, &g)).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&p0));
        }
        // Quarter-wave tilt reaches full transmission.
        let bright = postselection_probability(0.5 * period, &g);
        assert_relative_eq!(bright, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn validity_margins_at_reference_points() {
        let g = geom(WorkingPoint::Balanced);
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();

        // φ = 83 nrad: weak1 = 156e-9·0.1/83e-9 ≈ 0.188, weak2 =
        // 2k₀L·83e-9 = 7.3994583798664e-3 (frozen).
        let m = validity_margin(&TiltState::new(83e-9, 156e-9), &g, &env).unwrap();
        assert_relative_eq!(m.weak1, 0.18795180722891567, max_relative = 1e-12);
        assert_relative_eq!(m.weak2, 7.3994583798664e-3, max_relative = 1e-11);

        // φ = 4 µrad: weak2 = 0.35660040384898476.
        let m4 = validity_margin(&TiltState::new(4e-6, 156e-9), &g, &env).unwrap();
        assert_relative_eq!(m4.weak2, 0.35660040384898476, max_relative = 1e-12);

        // Frozen mirror.
        let still = validity_margin(&TiltState::new(1e-6, 0.0), &g, &env).unwrap();
        assert_eq!(still.weak1, 0.0);

        assert_eq!(
            validity_margin(&TiltState::new(0.0, 156e-9), &g, &env),
            Err(SignalError::DegeneratePhi)
        );
    }

    #[test]
    fn difference_signal_is_odd_under_tilt_reversal() {
        let g = geom(WorkingPoint::Balanced);
        let env = PulseEnvelope::new(1.0, 0.1, 0.5).unwrap();
        for k in 0..=10 {
            let t = 0.1 * k as f64;
            let (p1, p2) = exact_port_intensities(
                t,
                &TiltState::new(2e-7, 1.56e-6),
                &g,
                &env,
            );
            let (m1, m2) = exact_port_intensities(
                t,
                &TiltState::new(-2e-7, -1.56e-6),
                &g,
                &env,
            );
            // Reversing both tilt parameters mirrors the two ports.
            assert_relative_eq!(p1, m2, max_relative = 1e-12);
            assert_relative_eq!(p2, m1, max_relative = 1e-12);
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(InterferometerGeometry::new(0.0, LEVER, WorkingPoint::Balanced).is_err());
        assert!(InterferometerGeometry::new(LAMBDA, -1.0, WorkingPoint::Balanced).is_err());
        assert!(PulseEnvelope::new(0.0, 0.1, 0.0).is_err());
        assert!(PulseEnvelope::new(1.0, 0.0, 0.0).is_err());
        assert!(PulseEnvelope::new(1.0, 0.1, f64::NAN).is_err());
        assert!("wva".parse::<Technique>().is_ok());
        assert!("ABWV".parse::<Technique>().is_ok());
        assert!("sagnac".parse::<Technique>().is_err());
    }
}
