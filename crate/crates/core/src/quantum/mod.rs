//! Small dense open-quantum-system engine: operator algebra, Lindblad
//! evolution, steady states, regression-theorem correlators and spectra.

pub mod correlation;
pub mod integrator;
pub mod lindblad;
pub mod space;

pub use correlation::{fluctuation_spectrum, psd, psd_at, psd_on, two_time_correlation};
pub use integrator::{Dopri5, Tolerances};
pub use lindblad::{evolve, evolve_with, lindblad_rhs, propagate, steady_state, LindbladModel};
pub use space::{embed, tensor, CMatrix, DensityMatrix, HilbertSpace, Operator};
