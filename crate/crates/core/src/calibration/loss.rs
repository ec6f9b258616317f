//! Transmission loss between source and detector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::mollow::{fit_mollow, MollowDataset, MollowFit};
use super::stark::{detector_output_flux, stark_fit, StarkDataset, StarkFit};
use crate::error::{Error, Result, Warned, Warning};
use crate::grid::UniformGrid;

/// `1 - G_s / G_d` from the source and detector gain calibrations.
pub fn extract_loss(g_s: f64, g_d: f64) -> Result<Warned<f64>> {
    if !(g_d > 0.0) {
        return Err(Error::Argument(format!("detector gain must be positive, got {g_d}")));
    }
    let loss = 1.0 - g_s / g_d;
    if g_s > g_d {
        return Ok(Warned::flagged(loss, Warning::NegativeLoss));
    }
    Ok(Warned::clean(loss))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBudget {
    pub components: Vec<(String, f64)>,
    /// Sum of the component losses.
    pub total_additive: f64,
    /// `1 - prod(1 - f_i)`.
    pub total_multiplicative: f64,
}

pub fn loss_budget(components: &[(&str, f64)]) -> Result<LossBudget> {
    for &(name, f) in components {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Argument(format!("loss of {name} must lie in [0, 1), got {f}")));
        }
    }
    Ok(LossBudget {
        components: components.iter().map(|&(n, f)| (n.to_string(), f)).collect(),
        total_additive: components.iter().map(|c| c.1).sum(),
        total_multiplicative: 1.0 - components.iter().map(|c| 1.0 - c.1).product::<f64>(),
    })
}

/// Identified loss contributions of the reference setup.
pub fn default_loss_components() -> Vec<(&'static str, f64)> {
    vec![("circulator", 0.08), ("switch", 0.05), ("connectors", 0.05), ("cables", 0.02)]
}

/// Settings of the synthetic end-to-end loss calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossPipeline {
    pub loss_truth: f64,
    /// Gain from the detector cavity output to the measurement.
    pub detector_gain: f64,
    /// Source linewidth (MHz).
    pub gamma: f64,
    pub drive_ratios: Vec<f64>,
    pub chi: f64,
    pub kappa: f64,
    pub nu_q0: f64,
    pub nu_cav: f64,
    pub photons_per_unit: f64,
    pub stark_powers: Vec<f64>,
    /// Relative noise on every synthetic measurement.
    pub noise: f64,
}

impl Default for LossPipeline {
    fn default() -> Self {
        Self {
            loss_truth: 0.25,
            detector_gain: 0.8,
            gamma: 1.77,
            drive_ratios: vec![2.0, 4.0, 6.0],
            chi: -2.4,
            kappa: 19.0,
            nu_q0: 6475.0,
            nu_cav: 6135.0,
            photons_per_unit: 1.0,
            stark_powers: (1..=10).map(|k| 0.5 * k as f64).collect(),
            noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossResult {
    pub mollow: MollowFit,
    pub stark: StarkFit,
    pub g_s: f64,
    pub g_d: f64,
    pub loss: f64,
    pub negative: bool,
}

/// Calibrates both gains on synthetic data and infers the loss.
///
/// The source side measures Mollow spectra through `G_d (1 - L)`; the
/// detector side measures the cavity output flux through `G_d`, with the
/// intracavity photon number taken from a Stark-shift line fit.
pub fn run_loss_pipeline(cfg: &LossPipeline, grid: &UniformGrid, seed: u64) -> Result<LossResult> {
    let g_s_truth = cfg.detector_gain * (1.0 - cfg.loss_truth);
    let mollow_data = MollowDataset::synthetic(&cfg.drive_ratios, cfg.gamma, g_s_truth, cfg.noise, grid, seed)?;
    let mollow = fit_mollow(&mollow_data, cfg.gamma)?;

    let stark_data =
        StarkDataset::synthetic(cfg.chi, cfg.photons_per_unit, cfg.nu_q0, &cfg.stark_powers, cfg.noise, seed ^ 0x5a5a)?;
    let stark = stark_fit(&stark_data)?;

    // measured output flux at each power, against kappa n_p from the Stark fit
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let (mut num, mut den) = (0.0, 0.0);
    for &p in &cfg.stark_powers {
        let truth = detector_output_flux(cfg.photons_per_unit * p, cfg.kappa, cfg.nu_cav)?.per_us;
        let z: f64 = StandardNormal.sample(&mut rng);
        let measured = cfg.detector_gain * truth * (1.0 + cfg.noise * z);
        let model = detector_output_flux(stark.photon_number(p, cfg.chi)?.max(0.0), cfg.kappa, cfg.nu_cav)?.per_us;
        num += measured * model;
        den += model * model;
    }
    if den == 0.0 {
        return Err(Error::Argument("Stark calibration predicts no photons".into()));
    }
    let g_d = num / den;
    let loss = extract_loss(mollow.gain, g_d)?;
    Ok(LossResult { g_s: mollow.gain, g_d, loss: loss.value, negative: loss.warning.is_some(), mollow, stark })
}
