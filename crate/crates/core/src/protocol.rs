//! Error model of the Ramsey-type detection protocol.
//!
//! A `pi/2` pulse opens a window of length `Tw`; a photon arriving inside
//! the window flips the phase of the qubit superposition and the closing
//! `-pi/2` pulse maps that phase onto the qubit population. Three effects
//! limit the contrast: dephasing during the window, photon loss before
//! the detector, and the part of the photon envelope that arrives after
//! the window closes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result, Warned, Warning};

/// Functional form of the Ramsey coherence decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RamseyDecay {
    #[default]
    Exponential,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Detection window length (us).
    pub tw: f64,
    /// Source preparation angle (rad).
    pub theta: f64,
    /// Emission delay after the opening pulse (us).
    pub t0: f64,
    /// Photon linewidth (MHz); the envelope decays at `2 pi gamma_photon`.
    pub gamma_photon: f64,
    pub ramsey: RamseyDecay,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { tw: 0.250, theta: PI, t0: 0.020, gamma_photon: 1.77, ramsey: RamseyDecay::Exponential }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tw <= self.t0 {
            return Err(Error::Config(format!(
                "window length {} us must exceed emission delay {} us",
                self.tw, self.t0
            )));
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, pi], got {}", self.theta)));
        }
        if self.gamma_photon <= 0.0 {
            return Err(Error::Config("gamma_photon must be positive".into()));
        }
        Ok(())
    }

    /// Photon envelope decay rate in 1/us.
    pub fn photon_rate(&self) -> f64 {
        2.0 * PI * self.gamma_photon
    }

    pub fn with_window(&self, tw: f64) -> Self {
        Self { tw, ..*self }
    }
}

/// Temporal amplitude of the emitted photon (us^-1/2), normalised so that
/// `int |xi|^2 dt = 1`.
pub fn photon_envelope(t: f64, cfg: &ProtocolConfig) -> f64 {
    if t < cfg.t0 {
        return 0.0;
    }
    let rate = cfg.photon_rate();
    rate.sqrt() * (-rate * (t - cfg.t0) / 2.0).exp()
}

/// Fraction of the photon's energy arriving before the window closes.
pub fn capture_fraction(cfg: &ProtocolConfig) -> Warned<f64> {
    if cfg.tw <= cfg.t0 {
        return Warned::flagged(0.0, Warning::PhotonOutsideWindow);
    }
    Warned::clean(1.0 - (-cfg.photon_rate() * (cfg.tw - cfg.t0)).exp())
}

/// Ramsey contrast after a free evolution of `tw`.
pub fn ramsey_coherence(tw: f64, t2_star: f64, decay: RamseyDecay) -> f64 {
    let x = tw.max(0.0) / t2_star;
    match decay {
        RamseyDecay::Exponential => (-x).exp(),
        RamseyDecay::Gaussian => (-x * x).exp(),
    }
}

/// Probability of a click without a photon, `(1 - C(Tw)) / 2`.
pub fn dark_count(tw: f64, params: &DeviceParams, decay: RamseyDecay) -> f64 {
    0.5 * (1.0 - ramsey_coherence(tw, params.t2_star, decay))
}

/// Probability of a click given a single photon emitted by the source.
///
/// A photon that reaches the detector inside the window flips the Ramsey
/// phase, so the qubit ends in `e` with probability `(1 + C)/2`. A lost or
/// late photon leaves the interferometer untouched and the outcome follows
/// the dark-count statistics.
pub fn detection_efficiency(cfg: &ProtocolConfig, params: &DeviceParams) -> f64 {
    let c = ramsey_coherence(cfg.tw, params.t2_star, cfg.ramsey);
    let p_int = (1.0 - params.loss) * capture_fraction(cfg).value;
    let dark = 0.5 * (1.0 - c);
    p_int * 0.5 * (1.0 + c) + (1.0 - p_int) * dark
}

/// Click probabilities and the figures of merit derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionProbs {
    pub p_e_given_1: f64,
    pub p_e_given_0: f64,
    /// `P(e|1) - P(e|0)`.
    pub fidelity: f64,
    /// `P(e|1) / P(e|0)`, infinite when there are no dark counts.
    pub ratio: f64,
}

impl DetectionProbs {
    pub fn new(p_e_given_1: f64, p_e_given_0: f64) -> Self {
        let ratio = if p_e_given_0 > 0.0 { p_e_given_1 / p_e_given_0 } else { f64::INFINITY };
        Self { p_e_given_1, p_e_given_0, fidelity: p_e_given_1 - p_e_given_0, ratio }
    }
}

pub fn fidelity_metrics(cfg: &ProtocolConfig, params: &DeviceParams) -> DetectionProbs {
    DetectionProbs::new(detection_efficiency(cfg, params), dark_count(cfg.tw, params, cfg.ramsey))
}

/// Excited-state probability versus source angle, `P(e|0) + F sin^2(theta/2)`.
pub fn theta_sweep(cfg: &ProtocolConfig, params: &DeviceParams, thetas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let probs = fidelity_metrics(cfg, params);
    thetas
        .iter()
        .map(|&theta| {
            if !(0.0..=PI).contains(&theta) {
                return Err(Error::Argument(format!("theta {theta} outside [0, pi]")));
            }
            Ok((theta, probs.p_e_given_0 + probs.fidelity * (theta / 2.0).sin().powi(2)))
        })
        .collect()
}

/// Detection figures across a set of window lengths.
pub fn window_sweep(cfg: &ProtocolConfig, params: &DeviceParams, windows: &[f64]) -> Vec<(f64, DetectionProbs)> {
    windows.iter().map(|&tw| (tw, fidelity_metrics(&cfg.with_window(tw), params))).collect()
}

/// Window length maximising `P(e|1)` in `[lo, hi]`, by golden-section search.
pub fn optimal_window(cfg: &ProtocolConfig, params: &DeviceParams, lo: f64, hi: f64) -> f64 {
    let f = |tw: f64| -detection_efficiency(&cfg.with_window(tw), params);
    golden_section_min(f, lo, hi, 1e-10)
}

pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Probability of reading `e` given the true excited population, through
/// assignment errors `eps_ge = P(g|e)` and `eps_eg = P(e|g)`.
pub fn readout_composition(p_true: f64, eps_ge: f64, eps_eg: f64) -> f64 {
    p_true * (1.0 - eps_ge) + (1.0 - p_true) * eps_eg
}

/// Inverse of [`readout_composition`].
pub fn readout_correction(p_measured: f64, eps_ge: f64, eps_eg: f64) -> Result<f64> {
    let contrast = 1.0 - eps_ge - eps_eg;
    if contrast <= 0.0 {
        return Err(Error::Argument(format!("readout errors ({eps_ge}, {eps_eg}) leave no contrast")));
    }
    Ok((p_measured - eps_eg) / contrast)
}

/// Single-shot figures predicted from the averaged model plus readout errors.
pub fn single_shot_prediction(cfg: &ProtocolConfig, params: &DeviceParams) -> DetectionProbs {
    let avg = fidelity_metrics(cfg, params);
    DetectionProbs::new(
        readout_composition(avg.p_e_given_1, params.eps_ge, params.eps_eg),
        readout_composition(avg.p_e_given_0, params.eps_ge, params.eps_eg),
    )
}

/// Miss probability inside the detector once transmission loss is removed,
/// `(P(g|1) - L) / (1 - L)`.
pub fn loss_deconvolution(p_g_given_1: f64, loss: f64) -> Result<Warned<f64>> {
    if !(0.0..1.0).contains(&loss) {
        return Err(Error::Argument(format!("loss must lie in [0, 1), got {loss}")));
    }
    let p = (p_g_given_1 - loss) / (1.0 - loss);
    if p < 0.0 {
        return Ok(Warned::flagged(0.0, Warning::ClampedToZero));
    }
    Ok(Warned::clean(p))
}

/// `1 - P_in(g|1) - P(e|0)`.
pub fn internal_fidelity(p_in_g_given_1: f64, p_e_given_0: f64) -> f64 {
    1.0 - p_in_g_given_1 - p_e_given_0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (ProtocolConfig, DeviceParams) {
        (ProtocolConfig::default(), DeviceParams::default())
    }

    #[test]
    fn envelope_values() {
        let (cfg, _) = reference();
        assert_eq!(photon_envelope(0.0, &cfg), 0.0);
        assert!((photon_envelope(cfg.t0, &cfg) - 3.3348).abs() < 1e-3);
        // midpoint quadrature of |xi|^2 out to 40 decay times
        let h = 1e-5;
        let n = (40.0 / cfg.photon_rate() / h) as usize;
        let norm: f64 = (0..n).map(|k| photon_envelope(cfg.t0 + (k as f64 + 0.5) * h, &cfg).powi(2) * h).sum();
        assert!((norm - 1.0).abs() < 1e-6, "{norm}");
    }

    #[test]
    fn capture_fraction_values() {
        let (cfg, _) = reference();
        assert!((capture_fraction(&cfg).value - 0.9226).abs() < 1e-4);
        assert!((capture_fraction(&cfg.with_window(100.0)).value - 1.0).abs() < 1e-15);
        let at_t0 = capture_fraction(&cfg.with_window(cfg.t0));
        assert_eq!(at_t0.value, 0.0);
        assert_eq!(at_t0.warning, Some(Warning::PhotonOutsideWindow));
    }

    #[test]
    fn ramsey_values() {
        assert_eq!(ramsey_coherence(0.0, 1.8, RamseyDecay::Exponential), 1.0);
        assert!((ramsey_coherence(0.25, 1.8, RamseyDecay::Exponential) - 0.8703).abs() < 1e-4);
        assert!((ramsey_coherence(1.8, 1.8, RamseyDecay::Exponential) - (-1f64).exp()).abs() < 1e-15);
        assert!((ramsey_coherence(1.8, 1.8, RamseyDecay::Gaussian) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dark_count_values() {
        let (_, p) = reference();
        let e = RamseyDecay::Exponential;
        assert!((dark_count(0.25, &p, e) - 0.0649).abs() < 1e-4);
        assert_eq!(dark_count(0.0, &p, e), 0.0);
        assert!((dark_count(18.0, &p, e) - 0.49998).abs() < 1e-5);
    }

    #[test]
    fn efficiency_values() {
        let (cfg, p) = reference();
        // 0.6920 * 0.9352 + 0.3080 * 0.0649
        let expected = 0.75 * 0.92256 * (1.0 + 0.87032) / 2.0 + (1.0 - 0.75 * 0.92256) * 0.06484;
        assert!((detection_efficiency(&cfg, &p) - expected).abs() < 1e-4);
        assert!((detection_efficiency(&cfg, &p) - 0.667).abs() < 1e-3);
        let lost = DeviceParams { loss: 0.9999999999, ..p };
        assert!((detection_efficiency(&cfg, &lost) - dark_count(cfg.tw, &p, cfg.ramsey)).abs() < 1e-9);
        let ideal = DeviceParams { loss: 0.0, t2_star: 1e9, t1: 1e9, ..p };
        assert!(detection_efficiency(&cfg.with_window(10.0), &ideal) > 1.0 - 1e-6);
    }

    #[test]
    fn metrics_at_reference_window() {
        let (cfg, p) = reference();
        let m = fidelity_metrics(&cfg, &p);
        assert!((m.fidelity - 0.602).abs() < 1e-3);
        let m100 = fidelity_metrics(&cfg.with_window(0.1), &p);
        assert!((m100.ratio - 16.5).abs() < 0.1, "{}", m100.ratio);
    }

    #[test]
    fn no_dark_counts_gives_infinite_ratio() {
        let m = DetectionProbs::new(0.5, 0.0);
        assert!(m.ratio.is_infinite());
    }

    #[test]
    fn theta_sweep_endpoints() {
        let (cfg, p) = reference();
        let m = fidelity_metrics(&cfg, &p);
        let s = theta_sweep(&cfg, &p, &[0.0, PI / 2.0, PI]).unwrap();
        assert_eq!(s[0].1, m.p_e_given_0);
        assert!((s[2].1 - m.p_e_given_1).abs() < 1e-15);
        assert!((s[1].1 - 0.366).abs() < 1e-3);
        assert!(theta_sweep(&cfg, &p, &[4.0]).is_err());
    }

    #[test]
    fn readout_composition_values() {
        let p = readout_composition(0.658, 0.063, 0.022);
        assert!((1.0 - p - 0.376).abs() < 1e-3);
        assert_eq!(readout_composition(0.3, 0.0, 0.0), 0.3);
        assert_eq!(readout_composition(0.0, 0.063, 0.022), 0.022);
    }

    #[test]
    fn loss_deconvolution_values() {
        assert!((loss_deconvolution(0.37, 0.25).unwrap().value - 0.16).abs() < 1e-15);
        assert_eq!(loss_deconvolution(0.37, 0.0).unwrap().value, 0.37);
        assert_eq!(loss_deconvolution(0.25, 0.25).unwrap().value, 0.0);
        let clamped = loss_deconvolution(0.2, 0.25).unwrap();
        assert_eq!(clamped.value, 0.0);
        assert_eq!(clamped.warning, Some(Warning::ClampedToZero));
        assert!(loss_deconvolution(0.5, 1.0).is_err());
    }

    #[test]
    fn internal_fidelity_values() {
        assert!((internal_fidelity(0.16, 0.13) - 0.71).abs() < 1e-12);
        assert_eq!(internal_fidelity(0.0, 0.0), 1.0);
        assert!((internal_fidelity(0.16, 0.134) - 0.706).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(ProtocolConfig::default().validate().is_ok());
        assert!(ProtocolConfig { tw: 0.01, ..Default::default() }.validate().is_err());
        assert!(ProtocolConfig { theta: -0.1, ..Default::default() }.validate().is_err());
    }
}
