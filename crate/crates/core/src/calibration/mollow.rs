//! Resonance fluorescence of the driven source qubit.
//!
//! Rates: `gamma` is given in MHz and the drive as `Omega / Gamma`. The
//! drive Hamiltonian is `(Omega/2) sigma_x` in the frame of the drive, so
//! the sidebands sit at `delta = +/- Omega / 2pi` MHz.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::PhotonFlux;
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::grid::{SpectrumTrace, UniformGrid};
use crate::quantum::{
    fluctuation_spectrum, psd_on, steady_state, two_time_correlation, DensityMatrix, LindbladModel, Operator,
};

/// Delay grid length in units of `1/Gamma`.
const DELAY_SPAN: f64 = 24.0;
const DELAY_POINTS: usize = 8192;

/// Resonantly driven two-level emitter with radiative decay only.
pub fn two_level_model(omega_ratio: f64, gamma: f64) -> Result<LindbladModel> {
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!("linewidth must be positive, got {gamma}")));
    }
    if !(omega_ratio >= 0.0) {
        return Err(Error::Argument(format!("drive ratio must be non-negative, got {omega_ratio}")));
    }
    let rate = 2.0 * PI * gamma;
    let h = Operator::pauli_x().scale(0.5 * omega_ratio * rate);
    LindbladModel::new(h, vec![Operator::sigma_minus().scale(rate.sqrt())])
}

/// Excited population `Omega^2 / (2 Omega^2 + Gamma^2)`.
pub fn steady_population(omega: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!("linewidth must be positive, got {gamma}")));
    }
    Ok(omega * omega / (2.0 * omega * omega + gamma * gamma))
}

/// Emitted photon flux `n_q Gamma`, tagged with the emitter frequency.
pub fn source_power(n_q: f64, gamma: f64, nu_ge: f64) -> Result<PhotonFlux> {
    if !(0.0..=1.0).contains(&n_q) || !(gamma >= 0.0) {
        return Err(Error::Argument(format!("invalid population {n_q} or linewidth {gamma}")));
    }
    Ok(PhotonFlux { per_us: n_q * 2.0 * PI * gamma, carrier_mhz: nu_ge })
}

fn coherent_part(rho: &DensityMatrix) -> Result<f64> {
    Ok(rho.expect(&Operator::sigma_plus())?.norm_sqr())
}

/// Inelastic emission spectrum on a detuning grid (MHz), computed from the
/// regression-theorem correlator. Values are photon flux densities in
/// photons per second per hertz (equivalently photons/us per MHz).
pub fn mollow_spectrum(omega_ratio: f64, gamma: f64, grid: &UniformGrid) -> Result<SpectrumTrace> {
    if !(omega_ratio > 0.0) {
        return Err(Error::Argument(format!("drive ratio must be positive, got {omega_ratio}")));
    }
    let half_span = 2.0 * omega_ratio * gamma;
    if grid.start() > -half_span || grid.stop() < half_span {
        return Err(Error::Argument(format!("detuning grid must cover ±{half_span} MHz")));
    }
    let model = two_level_model(omega_ratio, gamma)?;
    let rho = steady_state(&model)?;
    let rate = 2.0 * PI * gamma;
    let taus = UniformGrid::linspace(0.0, DELAY_SPAN / rate, DELAY_POINTS)?;
    let mut corr = two_time_correlation(&model, &rho, &Operator::sigma_plus(), &Operator::sigma_minus(), &taus)?;
    let elastic = coherent_part(&rho)?;
    for c in corr.values.iter_mut() {
        *c -= Complex64::new(elastic, 0.0);
    }
    let s = psd_on(&corr, grid)?;
    let values = s.values.iter().map(|v| rate * 2.0 * PI * v).collect();
    SpectrumTrace::new(*grid, values, format!("Omega/Gamma = {omega_ratio}"))
}

/// Same quantity as [`mollow_spectrum`], evaluated from the Liouvillian
/// resolvent. Cheap enough to serve as a fit model.
pub fn inelastic_flux_density(omega_ratio: f64, gamma: f64, grid: &UniformGrid) -> Result<SpectrumTrace> {
    let model = two_level_model(omega_ratio, gamma)?;
    let rho = steady_state(&model)?;
    let s = fluctuation_spectrum(&model, &rho, &Operator::sigma_plus(), &Operator::sigma_minus(), grid)?;
    let rate = 2.0 * PI * gamma;
    let values = s.values.iter().map(|v| rate * 2.0 * PI * v).collect();
    SpectrumTrace::new(*grid, values, format!("Omega/Gamma = {omega_ratio}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollowDataset {
    pub drive_ratios: Vec<f64>,
    pub spectra: Vec<SpectrumTrace>,
    /// Gain used to generate synthetic data, if known.
    pub gain_truth: Option<f64>,
}

impl MollowDataset {
    pub fn new(drive_ratios: Vec<f64>, spectra: Vec<SpectrumTrace>) -> Result<Self> {
        if drive_ratios.len() != spectra.len() {
            return Err(Error::Dimension(format!("{} drive ratios for {} spectra", drive_ratios.len(), spectra.len())));
        }
        if spectra.iter().any(|s| s.values.iter().any(|&v| v < 0.0)) {
            return Err(Error::Argument("measured spectra must be non-negative".into()));
        }
        Ok(Self { drive_ratios, spectra, gain_truth: None })
    }

    /// Spectra scaled by `gain` with multiplicative Gaussian noise of
    /// relative size `noise`, clipped at zero.
    pub fn synthetic(
        drive_ratios: &[f64],
        gamma: f64,
        gain: f64,
        noise: f64,
        grid: &UniformGrid,
        seed: u64,
    ) -> Result<Self> {
        let clean: Result<Vec<SpectrumTrace>> =
            drive_ratios.par_iter().map(|&r| mollow_spectrum(r, gamma, grid)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectra = clean?
            .into_iter()
            .map(|s| {
                let values = s
                    .values
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (gain * v * (1.0 + noise * z)).max(0.0)
                    })
                    .collect();
                SpectrumTrace { values, ..s }
            })
            .collect();
        Ok(Self { drive_ratios: drive_ratios.to_vec(), spectra, gain_truth: Some(gain) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollowFit {
    pub gain: f64,
    pub gain_se: f64,
    /// Linewidth (MHz).
    pub gamma: f64,
    pub gamma_se: f64,
    /// Fitted `Omega / Gamma`, one per spectrum.
    pub omega_ratios: Vec<f64>,
    pub omega_ratios_se: Vec<f64>,
    /// Root-mean-square residual relative to the largest data value.
    pub relative_rms: f64,
    pub iterations: usize,
}

/// Joint least-squares fit: shared gain and linewidth, one drive per spectrum.
///
/// Initial drives are taken from the nominal ratios in the dataset.
pub fn fit_mollow(data: &MollowDataset, gamma_init: f64) -> Result<MollowFit> {
    let k = data.spectra.len();
    if k < 3 {
        return Err(Error::Argument(format!("a global fit needs at least 3 spectra, got {k}")));
    }
    let peak = data.spectra.iter().map(|s| s.max()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Argument("spectra carry no signal".into()));
    }
    let n_points: usize = data.spectra.iter().map(|s| s.values.len()).sum();

    // residuals are normalised by the global peak so the solver sees O(1) numbers
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let (gain, gamma) = (p[0], p[1]);
        if !(gamma > 0.0) {
            return Err(Error::Argument("non-positive linewidth".into()));
        }
        let mut out = Vec::with_capacity(n_points);
        for (j, s) in data.spectra.iter().enumerate() {
            let model = inelastic_flux_density(p[2 + j].abs(), gamma, &s.grid)?;
            out.extend(model.values.iter().zip(&s.values).map(|(m, d)| (gain * m - d) / peak));
        }
        Ok(out)
    };

    let gain0 = {
        let model_peak = data
            .spectra
            .iter()
            .zip(&data.drive_ratios)
            .map(|(s, &r)| inelastic_flux_density(r, gamma_init, &s.grid).map(|m| m.max()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        peak / model_peak
    };
    let mut x0 = vec![gain0, gamma_init];
    x0.extend(&data.drive_ratios);

    let fit = levenberg_marquardt(residuals, &x0, &LmOptions::default())?;
    Ok(MollowFit {
        gain: fit.params[0],
        gain_se: fit.std_errors[0],
        gamma: fit.params[1],
        gamma_se: fit.std_errors[1],
        omega_ratios: fit.params[2..].iter().map(|v| v.abs()).collect(),
        omega_ratios_se: fit.std_errors[2..].to_vec(),
        relative_rms: (fit.rss / n_points as f64).sqrt(),
        iterations: fit.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 1.77;

    fn grid_for(ratio: f64) -> UniformGrid {
        let span = (3.0 * ratio * GAMMA).max(10.0 * GAMMA);
        UniformGrid::linspace(-span, span, 601).unwrap()
    }

    #[test]
    fn population_limits() {
        assert_eq!(steady_population(0.0, 1.0).unwrap(), 0.0);
        assert!((steady_population(1.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((steady_population(1e6, 1.0).unwrap() - 0.5).abs() < 1e-9);
        assert!(steady_population(1.0, 0.0).is_err());
    }

    #[test]
    fn population_matches_master_equation() {
        for ratio in [0.1, 1.0, 5.0, 100.0] {
            let rho = steady_state(&two_level_model(ratio, GAMMA).unwrap()).unwrap();
            let closed = steady_population(ratio, 1.0).unwrap();
            assert!((rho.population(1) - closed).abs() < 1e-6, "{ratio}");
        }
    }

    #[test]
    fn source_power_values() {
        let f = source_power(0.5, GAMMA, 6475.0).unwrap();
        assert!((f.per_us - 5.56).abs() < 0.01);
        assert_eq!(f.carrier_mhz, 6475.0);
        assert_eq!(source_power(0.0, GAMMA, 6475.0).unwrap().per_us, 0.0);
    }

    #[test]
    fn regression_and_resolvent_routes_agree() {
        let grid = grid_for(4.0);
        let a = mollow_spectrum(4.0, GAMMA, &grid).unwrap();
        let b = inelastic_flux_density(4.0, GAMMA, &grid).unwrap();
        let peak = b.max();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-3 * peak, "{x} vs {y}");
        }
    }

    #[test]
    fn sidebands_at_rabi_frequency() {
        for ratio in [4.0, 6.0] {
            let s = mollow_spectrum(ratio, GAMMA, &grid_for(ratio)).unwrap();
            let maxima = s.local_maxima();
            let side = ratio * GAMMA;
            for target in [-side, side] {
                let best = maxima
                    .iter()
                    .map(|m| m.0)
                    .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                    .unwrap();
                assert!((best - target).abs() < 0.05 * side, "{ratio}: {best} vs {target}");
            }
        }
    }

    #[test]
    fn weak_drive_has_no_sidebands() {
        let s = mollow_spectrum(0.1, GAMMA, &grid_for(0.1)).unwrap();
        let mut maxima = s.local_maxima();
        maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
        assert!(maxima.len() == 1 || maxima[1].1 < 0.05 * maxima[0].1);
    }

    #[test]
    fn strong_drive_height_ratio() {
        let s = mollow_spectrum(5.0, GAMMA, &grid_for(5.0)).unwrap();
        let center = s.values[s.values.len() / 2];
        let side = s.local_maxima().iter().map(|m| m.1).filter(|&v| v < 0.9 * center).fold(0.0, f64::max);
        assert!((center / side - 3.0).abs() < 0.45, "{}", center / side);
    }

    #[test]
    fn integrated_flux_matches_inelastic_rate() {
        for ratio in [2.0, 4.0, 6.0] {
            let span = 60.0 * GAMMA + 3.0 * ratio * GAMMA;
            let grid = UniformGrid::linspace(-span, span, 4001).unwrap();
            let s = inelastic_flux_density(ratio, GAMMA, &grid).unwrap();
            let n_q = steady_population(ratio, 1.0).unwrap();
            let coherent = ratio * ratio / (2.0 * ratio * ratio + 1.0).powi(2);
            let exact = 2.0 * PI * GAMMA * (n_q - coherent);
            assert!((s.integral() - exact).abs() < 0.01 * exact, "{ratio}: {} vs {exact}", s.integral());
            if ratio >= 4.0 {
                let total = source_power(n_q, GAMMA, 0.0).unwrap().per_us;
                assert!((s.integral() - total).abs() < 0.05 * total);
            }
        }
    }

    #[test]
    fn spectrum_is_symmetric() {
        let s = mollow_spectrum(3.0, GAMMA, &grid_for(3.0)).unwrap();
        let n = s.values.len();
        let peak = s.max();
        for k in 0..n / 2 {
            assert!((s.values[k] - s.values[n - 1 - k]).abs() < 0.02 * peak);
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let grid = UniformGrid::linspace(-5.0, 5.0, 11).unwrap();
        assert!(mollow_spectrum(4.0, GAMMA, &grid).is_err());
    }

    fn fit_grid() -> UniformGrid {
        UniformGrid::linspace(-25.0, 25.0, 201).unwrap()
    }

    #[test]
    fn noiseless_self_fit() {
        let ratios = [2.0, 4.0, 6.0];
        let data = MollowDataset::synthetic(&ratios, GAMMA, 0.8, 0.0, &fit_grid(), 0).unwrap();
        let fit = fit_mollow(&data, 1.5).unwrap();
        assert!((fit.gain - 0.8).abs() < 1e-6, "{}", fit.gain);
        assert!((fit.gamma - GAMMA).abs() < 1e-6, "{}", fit.gamma);
        assert!(fit.relative_rms < 1e-6, "{}", fit.relative_rms);
    }

    #[test]
    fn noisy_fit_recovers_gain() {
        let ratios = [2.0, 4.0, 6.0];
        let data = MollowDataset::synthetic(&ratios, GAMMA, 0.8, 0.01, &fit_grid(), 17).unwrap();
        let fit = fit_mollow(&data, 1.5).unwrap();
        assert!((fit.gain - 0.8).abs() < 0.02 * 0.8);
        assert!((fit.gamma - GAMMA).abs() < 0.02 * GAMMA);
        for (got, want) in fit.omega_ratios.iter().zip(ratios) {
            assert!((got - want).abs() < 0.02 * want);
        }
    }

    #[test]
    fn too_few_spectra() {
        let data = MollowDataset::synthetic(&[2.0, 4.0], GAMMA, 0.8, 0.0, &fit_grid(), 0).unwrap();
        assert!(fit_mollow(&data, GAMMA).is_err());
    }
}
