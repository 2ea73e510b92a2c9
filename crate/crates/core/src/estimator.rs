//! Per-pulse Gaussian fitting and velocity inversion.
//!
//! Every sliced pulse window is fit with the four-parameter model
//! `f(t) = b + A·exp(−(t − t₀)²/(2σ²))` by damped Gauss–Newton iteration
//! with a Levenberg–Marquardt schedule on hand-rolled 4×4 normal equations.
//! The fitted amplitudes and centers are then inverted through the
//! first-order signal model:
//!
//! * ABWV: `φ̂ = asin(A₋/A₊)/(2k₀L)`, `Δt = t₀₋ − t₀₊`,
//!   `ω̂₀ = Δt·φ̂/τ̂²` with `τ̂` the fitted sum width — the sum channel
//!   calibrates amplitude, timing, and width in one shot.
//! * WVA: `φ̂ = asin(√(A_dark/A_bright))/(k₀L)`,
//!   `ω̂₀ = Δt·φ̂/(2τ̂²)` against a separately fitted bright reference.
//!
//! Ensemble means, standard deviations, and standard errors over the pulse
//! train quantify the statistical precision of each quantity.

use crate::instrument::SampledTrace;
use crate::signal::{InterferometerGeometry, Technique};
use thiserror::Error;

/// Errors from the fitting and inversion layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    /// Fewer samples than the fit can support.
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    /// The data carry no structure to fit (for example a flat trace).
    #[error("degenerate data: trace has no structure to fit")]
    DegenerateData,
    /// Paired channel fit lists have different lengths.
    #[error("mismatched pulse lists: {left} vs {right} fits")]
    MismatchedPulses { left: usize, right: usize },
    /// Every pulse was excluded as non-converged.
    #[error("no converged pulse fits to invert")]
    NoConvergedPulses,
    /// The bright calibration fit did not converge.
    #[error("bright reference fit did not converge")]
    NonConvergedReference,
    /// A fitted amplitude ratio exceeds 1 by more than its propagated
    /// uncertainty allows.
    #[error("amplitude ratio {ratio} outside physical range (bound {bound})")]
    AmplitudeRatioOutOfRange { ratio: f64, bound: f64 },
    /// The mean recovered tilt is zero, so amplification and angular
    /// velocity are undefined.
    #[error("recovered phi is zero; amplification is undefined")]
    DegeneratePhi,
}

/// Starting point for the Gaussian fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInit {
    /// Peak height above baseline (may be negative).
    pub amplitude: f64,
    /// Peak position (s).
    pub center: f64,
    /// Width (s), positive.
    pub sigma: f64,
    /// Constant offset.
    pub baseline: f64,
}

/// Options controlling the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit the constant baseline (default); when false the baseline is
    /// frozen at its initial value and only three parameters vary.
    pub fit_baseline: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { fit_baseline: true }
    }
}

/// Converged (or best-effort) Gaussian fit of one pulse window.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    /// Peak height above baseline.
    pub amplitude: f64,
    /// Peak position (s).
    pub center: f64,
    /// Width (s), positive.
    pub sigma: f64,
    /// Constant offset.
    pub baseline: f64,
    /// Parameter covariance in `[amplitude, center, sigma, baseline]`
    /// order, scaled by the residual variance; `NaN` when not estimable.
    pub covariance: [[f64; 4]; 4],
    /// Root-mean-square residual.
    pub residual_rms: f64,
    /// Damped Gauss–Newton steps taken (accepted and rejected).
    pub iterations: u32,
    /// Whether the relative SSE change fell below 10⁻¹² within the
    /// iteration budget.
    pub converged: bool,
}

impl GaussianFit {
    /// 1σ uncertainty of the fitted amplitude.
    pub fn amplitude_sigma(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    /// 1σ uncertainty of the fitted center.
    pub fn center_sigma(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }
}

const MIN_SAMPLES: usize = 16;
const MAX_ITERATIONS: u32 = 200;
const SSE_REL_TOL: f64 = 1e-12;

/// Moment-based starting point: baseline from the median of the first and
/// last 5 % of samples, amplitude from the larger signed excursion, center
/// and width from the first and second moments of `|y − b|`.
pub fn moment_init(pulse: &SampledTrace) -> Result<GaussianInit, EstimatorError> {
    let n = pulse.len();
    if n < MIN_SAMPLES {
        return Err(EstimatorError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let y = &pulse.samples;
    let k = (n / 20).max(1);
    let mut edges: Vec<f64> = Vec::with_capacity(2 * k);
    edges.extend_from_slice(&y[..k]);
    edges.extend_from_slice(&y[n - k..]);
    edges.sort_by(f64::total_cmp);
    let m = edges.len();
    let baseline = if m % 2 == 0 {
        0.5 * (edges[m / 2 - 1] + edges[m / 2])
    } else {
        edges[m / 2]
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in y {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        return Err(EstimatorError::DegenerateData);
    }
    let amplitude = if (lo - baseline).abs() > (hi - baseline).abs() {
        lo - baseline
    } else {
        hi - baseline
    };

    let mut sw = 0.0;
    let mut swt = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let w = (v - baseline).abs();
        sw += w;
        swt += w * pulse.time(i);
    }
    if sw <= 0.0 {
        return Err(EstimatorError::DegenerateData);
    }
    let center = swt / sw;
    let mut swv = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let w = (v - baseline).abs();
        let d = pulse.time(i) - center;
        swv += w * d * d;
    }
    let sigma = (swv / sw).sqrt().max(pulse.dt);
    Ok(GaussianInit {
        amplitude,
        center,
        sigma,
        baseline,
    })
}

/// Model and analytic Jacobian row at one sample.
#[inline]
fn model_row(t: f64, p: &[f64; 4]) -> (f64, [f64; 4]) {
    let z = (t - p[1]) / p[2];
    let g = (-0.5 * z * z).exp();
    let f = p[3] + p[0] * g;
    let agz = p[0] * g * z / p[2];
    (f, [g, agz, agz * z, 1.0])
}

/// Evaluate the pulse model and its analytic partial derivatives at one
/// time, in `[amplitude, center, sigma, baseline]` order — the exact rows
/// the fitter assembles into its normal equations, exposed so external
/// checks can difference them against numerical derivatives.
pub fn model_gradient(
    t: f64,
    amplitude: f64,
    center: f64,
    sigma: f64,
    baseline: f64,
) -> (f64, [f64; 4]) {
    model_row(t, &[amplitude, center, sigma, baseline])
}

/// Sum of squared residuals at the given parameters.
fn sse_at(pulse: &SampledTrace, p: &[f64; 4]) -> f64 {
    let (t0, dt) = (pulse.t0, pulse.dt);
    let inv_s = 1.0 / p[2];
    let mut sse = 0.0;
    for (i, &y) in pulse.samples.iter().enumerate() {
        let z = (t0 + i as f64 * dt - p[1]) * inv_s;
        let r = y - p[3] - p[0] * (-0.5 * z * z).exp();
        sse += r * r;
    }
    sse
}

/// One full pass: SSE plus the normal equations `JᵀJ`, `Jᵀr` over the
/// first `np` parameters.
fn normal_equations(
    pulse: &SampledTrace,
    p: &[f64; 4],
    np: usize,
) -> (f64, [[f64; 4]; 4], [f64; 4]) {
    let (t0, dt) = (pulse.t0, pulse.dt);
    let mut jtj = [[0.0f64; 4]; 4];
    let mut jtr = [0.0f64; 4];
    let mut sse = 0.0;
    for (i, &y) in pulse.samples.iter().enumerate() {
        let (f, j) = model_row(t0 + i as f64 * dt, p);
        let r = y - f;
        sse += r * r;
        for a in 0..np {
            jtr[a] += j[a] * r;
            for b in a..np {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }
    (sse, jtj, jtr)
}

/// Cholesky factor of a symmetric positive-definite `np`×`np` matrix.
fn cholesky(a: &[[f64; 4]; 4], np: usize) -> Option<[[f64; 4]; 4]> {
    let mut l = [[0.0f64; 4]; 4];
    for i in 0..np {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve `L·Lᵀ·x = b` from a Cholesky factor.
fn chol_solve(l: &[[f64; 4]; 4], b: &[f64; 4], np: usize) -> [f64; 4] {
    let mut y = [0.0f64; 4];
    for i in 0..np {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0f64; 4];
    for i in (0..np).rev() {
        let mut s = y[i];
        for k in i + 1..np {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Inverse of a symmetric positive-definite matrix from its Cholesky
/// factor, by solving against unit vectors.
fn chol_inverse(l: &[[f64; 4]; 4], np: usize) -> [[f64; 4]; 4] {
    let mut inv = [[f64::NAN; 4]; 4];
    for j in 0..np {
        let mut e = [0.0f64; 4];
        e[j] = 1.0;
        let col = chol_solve(l, &e, np);
        for i in 0..np {
            inv[i][j] = col[i];
        }
    }
    inv
}

/// Fit the four-parameter Gaussian to a pulse window with default options.
///
/// `init` overrides the [`moment_init`] starting point.  Requires at least
/// 16 samples; a structureless trace yields
/// [`EstimatorError::DegenerateData`].  Non-convergence within 200
/// iterations is reported through the `converged` flag, not an error, so
/// ensemble callers can count and exclude such pulses.
pub fn fit_gaussian(
    pulse: &SampledTrace,
    init: Option<GaussianInit>,
) -> Result<GaussianFit, EstimatorError> {
    fit_gaussian_opts(pulse, init, &FitOptions::default())
}

/// [`fit_gaussian`] with explicit options.
pub fn fit_gaussian_opts(
    pulse: &SampledTrace,
    init: Option<GaussianInit>,
    opts: &FitOptions,
) -> Result<GaussianFit, EstimatorError> {
    let n = pulse.len();
    if n < MIN_SAMPLES {
        return Err(EstimatorError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let start = match init {
        Some(g) => g,
        None => moment_init(pulse)?,
    };
    let min_sigma = 0.25 * pulse.dt;
    let mut p = [
        start.amplitude,
        start.center,
        start.sigma.abs().max(min_sigma),
        start.baseline,
    ];
    let np = if opts.fit_baseline { 4 } else { 3 };

    let mut lambda = 1e-4;
    let mut iterations = 0u32;
    let mut converged = false;
    let (mut sse, mut jtj, mut jtr) = normal_equations(pulse, &p, np);
    // An exact fit leaves only rounding residue: each residual is a few
    // ulps of the sample scale, so the SSE floor is n·(eps·scale)² up to a
    // comfortable margin.  Below it, relative-improvement tests are
    // meaningless and the minimum is found.
    let scale = pulse
        .samples
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let sse_floor = n as f64 * (16.0 * f64::EPSILON * scale).powi(2);
    // Sequential summation of n squared residuals carries rounding noise of
    // order n·eps relative to the total, so SSE differences below that are
    // unresolvable and count as convergence.
    let rel_tol = SSE_REL_TOL.max(4.0 * n as f64 * f64::EPSILON);

    while iterations < MAX_ITERATIONS {
        if sse <= sse_floor {
            converged = true;
            break;
        }
        iterations += 1;
        // Marquardt damping on the diagonal.
        let mut damped = jtj;
        for a in 0..np {
            damped[a][a] *= 1.0 + lambda;
            if damped[a][a] == 0.0 {
                damped[a][a] = lambda.max(1e-30);
            }
        }
        let Some(l) = cholesky(&damped, np) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let step = chol_solve(&l, &jtr, np);
        let mut trial = p;
        for a in 0..np {
            trial[a] += step[a];
        }
        trial[2] = trial[2].abs().max(min_sigma);
        let trial_sse = sse_at(pulse, &trial);
        if !trial_sse.is_finite() {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        }
        let improvement = sse - trial_sse;
        // A step that changes the SSE by less than the relative tolerance —
        // in either direction, which happens at the numerical floor — means
        // the minimum is found.
        if improvement.abs() <= rel_tol * sse.max(f64::MIN_POSITIVE) {
            if improvement >= 0.0 {
                p = trial;
                sse = trial_sse;
            }
            converged = true;
            break;
        }
        if improvement > 0.0 {
            p = trial;
            lambda = (lambda / 3.0).max(1e-14);
            let refreshed = normal_equations(pulse, &p, np);
            sse = refreshed.0;
            jtj = refreshed.1;
            jtr = refreshed.2;
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }

    // Covariance from the undamped normal matrix at the solution.
    let dof = n.saturating_sub(np).max(1) as f64;
    let s2 = sse / dof;
    let mut covariance = [[f64::NAN; 4]; 4];
    let (_, jtj_final, _) = normal_equations(pulse, &p, np);
    if let Some(l) = cholesky(&jtj_final, np) {
        let inv = chol_inverse(&l, np);
        for a in 0..np {
            for b in 0..np {
                covariance[a][b] = inv[a][b] * s2;
            }
        }
    }
    if np == 3 {
        for a in 0..4 {
            covariance[3][a] = 0.0;
            covariance[a][3] = 0.0;
        }
    }

    Ok(GaussianFit {
        amplitude: p[0],
        center: p[1],
        sigma: p[2],
        baseline: p[3],
        covariance,
        residual_rms: (sse / n as f64).sqrt(),
        iterations,
        converged,
    })
}

/// Mean, sample standard deviation (Bessel-corrected), and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    /// Arithmetic mean.
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    /// Standard error of the mean.
    pub sem: f64,
}

/// Compute ensemble statistics over at least two values.
pub fn ensemble_stats(values: &[f64]) -> Result<EnsembleStats, EstimatorError> {
    let n = values.len();
    if n < 2 {
        return Err(EstimatorError::TooFewSamples { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    Ok(EnsembleStats {
        mean,
        std,
        sem: std / (n as f64).sqrt(),
    })
}

/// Per-pulse recovered quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEstimate {
    /// Index of the pulse in the record.
    pub pulse_index: usize,
    /// Recovered tilt offset (rad).
    pub phi_hat: f64,
    /// Measured envelope time shift (s).
    pub delta_t: f64,
    /// Recovered angular velocity (rad/s).
    pub omega0_hat: f64,
}

/// Ensemble statistics of the recovered quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateStats {
    /// Statistics of the per-pulse tilt.
    pub phi: EnsembleStats,
    /// Statistics of the per-pulse time shift.
    pub delta_t: EnsembleStats,
    /// Statistics of the per-pulse angular velocity.
    pub omega0: EnsembleStats,
}

/// Aggregated velocity estimate from one pulse train.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEstimate {
    /// Readout technique that produced the estimate.
    pub mode: Technique,
    /// Mean recovered tilt offset (rad).
    pub phi_hat: f64,
    /// Mean envelope time shift (s).
    pub delta_t: f64,
    /// Mean recovered angular velocity (rad/s).
    pub omega0_hat: f64,
    /// Recovered pulse width (s).
    pub tau_hat: f64,
    /// Time-shift amplification factor relative to `ω₀·τ²`: `1/φ̂` for
    /// ABWV, `2/φ̂` for WVA.
    pub amplification: f64,
    /// Pulses that entered the ensemble.
    pub n_pulses_used: usize,
    /// Pulses excluded for non-convergence.
    pub n_excluded: usize,
    /// Per-pulse breakdown.
    pub per_pulse: Vec<PulseEstimate>,
    /// Ensemble statistics, present when at least two pulses were used.
    pub stats: Option<EstimateStats>,
}

/// Ratio uncertainty from the two amplitude covariances, used for the
/// physical-range guard on amplitude ratios.
fn ratio_sigma(ratio: f64, num: &GaussianFit, den: &GaussianFit) -> f64 {
    let vn = num.covariance[0][0];
    let vd = den.covariance[0][0];
    if !(vn.is_finite() && vd.is_finite()) || num.amplitude == 0.0 || den.amplitude == 0.0 {
        return 0.0;
    }
    let rel2 = vn / (num.amplitude * num.amplitude) + vd / (den.amplitude * den.amplitude);
    (ratio * ratio * rel2).max(0.0).sqrt()
}

fn finalize_estimate(
    mode: Technique,
    per_pulse: Vec<PulseEstimate>,
    tau_hat: f64,
    n_excluded: usize,
) -> Result<VelocityEstimate, EstimatorError> {
    if per_pulse.is_empty() {
        return Err(EstimatorError::NoConvergedPulses);
    }
    let n = per_pulse.len() as f64;
    let phi_hat = per_pulse.iter().map(|p| p.phi_hat).sum::<f64>() / n;
    let delta_t = per_pulse.iter().map(|p| p.delta_t).sum::<f64>() / n;
    let omega0_hat = per_pulse.iter().map(|p| p.omega0_hat).sum::<f64>() / n;
    if phi_hat == 0.0 {
        return Err(EstimatorError::DegeneratePhi);
    }
    let amplification = mode.shift_factor() / phi_hat;
    let stats = if per_pulse.len() >= 2 {
        let col = |f: fn(&PulseEstimate) -> f64| {
            ensemble_stats(&per_pulse.iter().map(f).collect::<Vec<_>>()).expect("n >= 2")
        };
        Some(EstimateStats {
            phi: col(|p| p.phi_hat),
            delta_t: col(|p| p.delta_t),
            omega0: col(|p| p.omega0_hat),
        })
    } else {
        None
    };
    Ok(VelocityEstimate {
        mode,
        phi_hat,
        delta_t,
        omega0_hat,
        tau_hat,
        amplification,
        n_pulses_used: per_pulse.len(),
        n_excluded,
        per_pulse,
        stats,
    })
}

/// Invert paired sum/difference fits into a velocity estimate.
///
/// Pulses whose sum or difference fit failed to converge are excluded and
/// counted in `n_excluded`.  A difference/sum amplitude ratio beyond
/// `1 + 3σ` of its propagated uncertainty is unphysical and aborts with
/// [`EstimatorError::AmplitudeRatioOutOfRange`]; ratios inside the guard
/// band are clamped to `[−1, 1]` before inversion.
pub fn abwv_estimate(
    sum_fits: &[GaussianFit],
    diff_fits: &[GaussianFit],
    geom: &InterferometerGeometry,
) -> Result<VelocityEstimate, EstimatorError> {
    if sum_fits.len() != diff_fits.len() {
        return Err(EstimatorError::MismatchedPulses {
            left: sum_fits.len(),
            right: diff_fits.len(),
        });
    }
    let two_k0l = 2.0 * geom.phase_per_tilt();
    let mut per_pulse = Vec::with_capacity(sum_fits.len());
    let mut n_excluded = 0usize;
    let mut tau_acc = 0.0;
    for (idx, (s, d)) in sum_fits.iter().zip(diff_fits).enumerate() {
        if !(s.converged && d.converged) {
            n_excluded += 1;
            continue;
        }
        let ratio = d.amplitude / s.amplitude;
        let bound = 1.0 + 3.0 * ratio_sigma(ratio, d, s);
        if !ratio.is_finite() || ratio.abs() > bound {
            return Err(EstimatorError::AmplitudeRatioOutOfRange { ratio, bound });
        }
        let phi_hat = ratio.clamp(-1.0, 1.0).asin() / two_k0l;
        let delta_t = d.center - s.center;
        let tau_hat = s.sigma;
        tau_acc += tau_hat;
        let omega0_hat = delta_t * phi_hat / (tau_hat * tau_hat);
        per_pulse.push(PulseEstimate {
            pulse_index: idx,
            phi_hat,
            delta_t,
            omega0_hat,
        });
    }
    let tau_hat = if per_pulse.is_empty() {
        0.0
    } else {
        tau_acc / per_pulse.len() as f64
    };
    finalize_estimate(Technique::Abwv, per_pulse, tau_hat, n_excluded)
}

/// Invert dark-port fits against a bright reference fit.
///
/// `period` reduces the raw center difference modulo the repetition window
/// so dark pulses may be compared against a bright reference recorded in
/// any window of its train.  The bright fit must have converged.
pub fn wva_estimate(
    dark_fits: &[GaussianFit],
    bright: &GaussianFit,
    geom: &InterferometerGeometry,
    period: f64,
) -> Result<VelocityEstimate, EstimatorError> {
    if !bright.converged {
        return Err(EstimatorError::NonConvergedReference);
    }
    let k0l = geom.phase_per_tilt();
    let tau_hat = bright.sigma;
    let mut per_pulse = Vec::with_capacity(dark_fits.len());
    let mut n_excluded = 0usize;
    for (idx, d) in dark_fits.iter().enumerate() {
        if !d.converged {
            n_excluded += 1;
            continue;
        }
        let ratio = d.amplitude / bright.amplitude;
        let bound = 1.0 + 3.0 * ratio_sigma(ratio, d, bright);
        if !ratio.is_finite() || ratio.abs() > bound {
            return Err(EstimatorError::AmplitudeRatioOutOfRange { ratio, bound });
        }
        let phi_hat = ratio.clamp(0.0, 1.0).sqrt().asin() / k0l;
        let raw = d.center - bright.center;
        let delta_t = if period > 0.0 {
            raw - period * (raw / period).round()
        } else {
            raw
        };
        let omega0_hat = delta_t * phi_hat / (2.0 * tau_hat * tau_hat);
        per_pulse.push(PulseEstimate {
            pulse_index: idx,
            phi_hat,
            delta_t,
            omega0_hat,
        });
    }
    finalize_estimate(Technique::Wva, per_pulse, tau_hat, n_excluded)
}
