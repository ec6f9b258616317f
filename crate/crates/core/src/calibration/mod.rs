//! Power and loss calibration of the source–detector link.

pub mod loss;
pub mod mollow;
pub mod stark;

use serde::Serialize;

pub use loss::{
    default_loss_components, extract_loss, loss_budget, run_loss_pipeline, LossBudget, LossPipeline, LossResult,
};
pub use mollow::{
    fit_mollow, inelastic_flux_density, mollow_spectrum, source_power, steady_population, two_level_model,
    MollowDataset, MollowFit,
};
pub use stark::{detector_output_flux, stark_fit, StarkDataset, StarkFit};

/// Planck constant (J s).
const PLANCK: f64 = 6.626_070_15e-34;

/// Photon flux tagged with its carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonFlux {
    /// Photons per microsecond.
    pub per_us: f64,
    /// Carrier frequency (MHz).
    pub carrier_mhz: f64,
}

impl PhotonFlux {
    /// Power in watts, `flux * h * nu`.
    pub fn watts(&self) -> f64 {
        self.per_us * 1e6 * PLANCK * self.carrier_mhz * 1e6
    }
}
