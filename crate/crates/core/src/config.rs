//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::protocol::ProtocolConfig;

/// Evenly spaced grid `start..=stop` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::linspace(self.start, self.stop, self.points)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Config(format!("sweeps.{name}: grid is empty")));
        }
        if self.points > 1 && !(self.stop > self.start) {
            return Err(Error::Config(format!("sweeps.{name}: stop must exceed start")));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config(format!("sweeps.{name}: bounds must be finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweeps {
    /// Probe frequency (MHz) for the reflection spectrum.
    pub frequency: GridSpec,
    /// Detection window length (us).
    pub window: GridSpec,
    /// Source angle (rad) for the averaged detection curve.
    pub theta: GridSpec,
    /// Source angle (rad) for the field-moment measurement.
    pub qnd_theta: GridSpec,
    /// Detuning (MHz) for the fluorescence spectra.
    pub detuning: GridSpec,
    /// Drive strengths `Omega / Gamma`.
    pub drive_ratios: Vec<f64>,
    /// Input powers (arbitrary units) for the Stark calibration.
    pub stark_power: GridSpec,
}

impl Default for Sweeps {
    fn default() -> Self {
        Self {
            frequency: GridSpec::new(5635.0, 6635.0, 10001),
            window: GridSpec::new(0.03, 1.0, 971),
            theta: GridSpec::new(0.0, std::f64::consts::PI, 181),
            qnd_theta: GridSpec::new(0.0, std::f64::consts::PI, 9),
            detuning: GridSpec::new(-25.0, 25.0, 201),
            drive_ratios: vec![2.0, 4.0, 6.0],
            stark_power: GridSpec::new(0.0, 5.0, 11),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSettings {
    /// Separation of the readout Gaussians in units of their width.
    pub snr: f64,
    pub shots: usize,
    pub bins: usize,
    /// Preselection threshold distance from the ground-state mean, in widths.
    pub preselect_sigmas: f64,
}

impl Default for ReadoutSettings {
    fn default() -> Self {
        Self { snr: 5.75, shots: 12_500, bins: 101, preselect_sigmas: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QndSettings {
    pub shots: usize,
    /// Added amplifier noise in photons.
    pub noise_photons: f64,
    /// Number of seeds in the Monte Carlo pass-rate estimate.
    pub monte_carlo_seeds: u64,
    /// Denominator floor of the relative deviation; full scale when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    /// Residual ON-mode coherence.
    pub on_coherence: f64,
}

impl Default for QndSettings {
    fn default() -> Self {
        Self { shots: 12_500, noise_photons: 0.1, monte_carlo_seeds: 100, floor: None, on_coherence: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    /// Gain from the detector cavity output to the measurement.
    pub detector_gain: f64,
    /// Gain injected into the synthetic fluorescence spectra.
    pub mollow_gain: f64,
    /// Relative noise of synthetic calibration data.
    pub noise: f64,
    /// Intracavity photons per unit input power.
    pub photons_per_unit: f64,
    /// Vertical offset between stacked spectra in the CSV.
    pub spectrum_offset: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self { detector_gain: 0.8, mollow_gain: 0.8, noise: 0.01, photons_per_unit: 1.0, spectrum_offset: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub device: DeviceParams,
    pub protocol: ProtocolConfig,
    pub sweeps: Sweeps,
    pub readout: ReadoutSettings,
    pub qnd: QndSettings,
    pub calibration: CalibrationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            device: DeviceParams::default(),
            protocol: ProtocolConfig::default(),
            sweeps: Sweeps::default(),
            readout: ReadoutSettings::default(),
            qnd: QndSettings::default(),
            calibration: CalibrationSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.protocol.validate()?;
        let s = &self.sweeps;
        for (name, g) in [
            ("frequency", &s.frequency),
            ("window", &s.window),
            ("theta", &s.theta),
            ("qnd_theta", &s.qnd_theta),
            ("detuning", &s.detuning),
            ("stark_power", &s.stark_power),
        ] {
            g.validate(name)?;
        }
        if s.drive_ratios.is_empty() || s.drive_ratios.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweeps.drive_ratios must be non-empty and increasing".into()));
        }
        if s.drive_ratios.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Config("sweeps.drive_ratios must be positive".into()));
        }
        if s.stark_power.start < 0.0 {
            return Err(Error::Config("sweeps.stark_power must be non-negative".into()));
        }
        if self.readout.shots == 0 || self.qnd.shots == 0 {
            return Err(Error::Config("shot counts must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the configuration, output location excluded.
    pub fn digest(&self) -> String {
        let stripped = Self { output_dir: PathBuf::new(), ..self.clone() };
        let canonical = serde_json::to_string(&stripped).expect("configuration serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig { seed: 17, ..RunConfig::default() };
        cfg.qnd.floor = Some(0.1);
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = RunConfig::from_toml("[device]\nkapa = 19.0\n").unwrap_err();
        let Error::Config(msg) = err else { panic!("{err:?}") };
        assert!(msg.contains("kapa") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(RunConfig::from_toml("[sweeps.window]\nstart = 1.0\nstop = 0.5\npoints = 3\n").is_err());
        assert!(RunConfig::from_toml("[sweeps]\ndrive_ratios = []\n").is_err());
        assert!(RunConfig::from_toml("[sweeps]\ndrive_ratios = [4.0, 2.0]\n").is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::default();
        assert_eq!(a.digest(), RunConfig::default().digest());
        let b = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let moved = RunConfig { output_dir: PathBuf::from("elsewhere"), ..RunConfig::default() };
        assert_eq!(a.digest(), moved.digest());
    }
}
