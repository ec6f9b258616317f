//! AC-Stark photon-number calibration of the detector cavity.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::PhotonFlux;
use crate::error::{Error, Result};
use crate::fit::linear_fit;

/// Qubit frequency (MHz) measured at each input power (arbitrary units).
#[derive(Debug, Clone, PartialEq)]
pub struct StarkDataset {
    pub points: Vec<(f64, f64)>,
}

impl StarkDataset {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Argument(format!("need at least 3 points, got {}", points.len())));
        }
        if points.iter().any(|&(p, _)| !(p >= 0.0)) {
            return Err(Error::Argument("input powers must be non-negative".into()));
        }
        Ok(Self { points })
    }

    /// Line `nu_q0 + 2 chi n_per_unit P` with additive Gaussian noise whose
    /// standard deviation is `noise` times the largest shift.
    pub fn synthetic(chi: f64, n_per_unit: f64, nu_q0: f64, powers: &[f64], noise: f64, seed: u64) -> Result<Self> {
        let shift = |p: f64| 2.0 * chi * n_per_unit * p;
        let sigma = noise * powers.iter().map(|&p| shift(p).abs()).fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = powers
            .iter()
            .map(|&p| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (p, nu_q0 + shift(p) + sigma * z)
            })
            .collect();
        Self::new(points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarkFit {
    /// MHz per power unit.
    pub slope: f64,
    pub slope_se: f64,
    /// Unshifted qubit frequency (MHz).
    pub nu_q0: f64,
    pub nu_q0_se: f64,
}

impl StarkFit {
    /// Intracavity photon number `(nu_q(P) - nu_q0) / (2 chi)` at input power `p_in`.
    pub fn photon_number(&self, p_in: f64, chi: f64) -> Result<f64> {
        if chi == 0.0 {
            return Err(Error::Argument("dispersive shift must be non-zero".into()));
        }
        Ok(self.slope * p_in / (2.0 * chi))
    }
}

pub fn stark_fit(data: &StarkDataset) -> Result<StarkFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = data.points.iter().copied().unzip();
    let line = linear_fit(&x, &y)?;
    Ok(StarkFit { slope: line.slope, slope_se: line.slope_se, nu_q0: line.intercept, nu_q0_se: line.intercept_se })
}

/// Photon flux `kappa n_p` leaking out of the detector cavity.
pub fn detector_output_flux(n_p: f64, kappa: f64, nu_cav: f64) -> Result<PhotonFlux> {
    if !(n_p >= 0.0) {
        return Err(Error::Argument(format!("photon number must be non-negative, got {n_p}")));
    }
    Ok(PhotonFlux { per_us: 2.0 * PI * kappa * n_p, carrier_mhz: nu_cav })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn powers() -> Vec<f64> {
        (0..11).map(|k| k as f64 * 0.5).collect()
    }

    #[test]
    fn noiseless_slope() {
        let data = StarkDataset::synthetic(-2.4, 1.0, 6475.0, &powers(), 0.0, 0).unwrap();
        let fit = stark_fit(&data).unwrap();
        assert!((fit.slope + 4.8).abs() < 1e-9);
        assert!((fit.nu_q0 - 6475.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_slope_within_errors() {
        for seed in 0..20 {
            let data = StarkDataset::synthetic(-2.4, 1.0, 6475.0, &powers(), 0.01, seed).unwrap();
            let fit = stark_fit(&data).unwrap();
            assert!((fit.slope + 4.8).abs() < 3.0 * fit.slope_se, "seed {seed}");
        }
    }

    #[test]
    fn photon_number_conversion() {
        let fit = StarkFit { slope: -4.8, slope_se: 0.0, nu_q0: 6475.0, nu_q0_se: 0.0 };
        assert!((fit.photon_number(2.0, -2.4).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit.photon_number(0.0, -2.4).unwrap(), 0.0);
        let half = fit.photon_number(2.0, -4.8).unwrap();
        assert!((half - 1.0).abs() < 1e-12);
        assert!(fit.photon_number(1.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_powers_rejected() {
        let data = StarkDataset::new(vec![(1.0, 6470.0), (1.0, 6471.0), (1.0, 6469.0)]).unwrap();
        assert!(matches!(stark_fit(&data), Err(Error::Argument(_))));
        assert!(StarkDataset::new(vec![(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(StarkDataset::new(vec![(-1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
    }

    #[test]
    fn output_flux_values() {
        let f = detector_output_flux(1.0, 19.0, 6135.0).unwrap();
        assert!((f.per_us - 119.38).abs() < 0.01);
        assert_eq!(detector_output_flux(0.0, 19.0, 6135.0).unwrap().per_us, 0.0);
        assert!((detector_output_flux(2.0, 19.0, 6135.0).unwrap().per_us - 2.0 * f.per_us).abs() < 1e-12);
    }
}
