//! Static device physics: parameters, dispersive shift, dressed states and
//! the reflection coefficient that realises the photon–qubit phase gate.
//!
//! Frequencies are carried in MHz (i.e. `omega / 2pi`) and times in us.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::quantum::{embed, CMatrix, HilbertSpace, Operator};

/// Device parameters. Defaults are the measured values of the reference device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// g–e transition frequency (MHz).
    pub nu_ge: f64,
    /// e–f transition frequency, resonant with the detector cavity (MHz).
    pub nu_ef: f64,
    /// Anharmonicity `nu_ef - nu_ge` (MHz).
    pub alpha: f64,
    /// Qubit–cavity coupling (MHz).
    pub g0: f64,
    /// Effective detector-cavity linewidth (MHz).
    pub kappa: f64,
    /// Readout resonator frequency (MHz).
    pub nu_ro: f64,
    /// Emission linewidth of the source qubit (MHz).
    pub gamma_source: f64,
    /// Energy relaxation time of the detection qubit (us).
    pub t1: f64,
    /// Ramsey coherence time of the detection qubit (us).
    pub t2_star: f64,
    /// Photon loss between source and detector.
    pub loss: f64,
    /// Readout error P(g|e).
    pub eps_ge: f64,
    /// Readout error P(e|g).
    pub eps_eg: f64,
    /// Thermally excited fraction removed by preselection.
    pub p_thermal: f64,
    /// Qubit–cavity detuning at the sweet spot, `nu_cav - nu_ge` (MHz).
    pub delta_qc: f64,
    /// Linewidth of the e–f transition used in the reflection model (MHz).
    /// Not measured; small values regularise the dressed resonances.
    pub gamma_atom: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            nu_ge: 6475.0,
            nu_ef: 6135.0,
            alpha: -340.0,
            g0: 40.0,
            kappa: 19.0,
            nu_ro: 4800.0,
            gamma_source: 1.77,
            t1: 3.0,
            t2_star: 1.8,
            loss: 0.25,
            eps_ge: 0.063,
            eps_eg: 0.022,
            p_thermal: 0.06,
            delta_qc: -676.0,
            gamma_atom: 0.1,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if (self.nu_ef - (self.nu_ge + self.alpha)).abs() > 1e-9 {
            return fail(format!("nu_ef ({}) must equal nu_ge + alpha ({})", self.nu_ef, self.nu_ge + self.alpha));
        }
        if !(0.0..1.0).contains(&self.loss) {
            return fail(format!("loss must lie in [0, 1), got {}", self.loss));
        }
        if self.eps_ge < 0.0 || self.eps_eg < 0.0 || self.eps_ge + self.eps_eg >= 1.0 {
            return fail(format!(
                "readout errors ({}, {}) must be non-negative with sum < 1",
                self.eps_ge, self.eps_eg
            ));
        }
        if self.kappa <= 0.0 {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.t1 <= 0.0 || self.t2_star <= 0.0 {
            return fail("t1 and t2_star must be positive".into());
        }
        if self.t2_star > 2.0 * self.t1 {
            return fail(format!("t2_star ({}) exceeds 2 * t1 ({})", self.t2_star, 2.0 * self.t1));
        }
        if self.gamma_atom < 0.0 || self.gamma_source <= 0.0 {
            return fail("linewidths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.p_thermal) {
            return fail(format!("p_thermal must lie in [0, 1), got {}", self.p_thermal));
        }
        Ok(())
    }

    /// Detector cavity frequency (MHz), taken equal to the e–f transition.
    pub fn nu_cav(&self) -> f64 {
        self.nu_ef
    }
}

/// Transmon dispersive shift `chi = alpha g^2 / (Delta (Delta - alpha))`, all in MHz.
pub fn dispersive_shift(alpha: f64, g: f64, delta: f64) -> Result<f64> {
    let scale = alpha.abs().max(delta.abs()).max(1.0);
    if delta.abs() <= 1e-12 * scale {
        return Err(Error::Singularity("qubit resonant with the cavity (delta = 0)".into()));
    }
    if (delta - alpha).abs() <= 1e-12 * scale {
        return Err(Error::Singularity("e–f transition resonant with the cavity (delta = alpha)".into()));
    }
    Ok(alpha * g * g / (delta * (delta - alpha)))
}

/// Dressed-state frequencies `nu_ef -/+ sqrt(n) sqrt(2) g0` of the n-th manifold (MHz).
pub fn dressed_frequencies(params: &DeviceParams, n: u32) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Argument("manifold index must be at least 1".into()));
    }
    let split = (n as f64).sqrt() * 2f64.sqrt() * params.g0;
    Ok((params.nu_ef - split, params.nu_ef + split))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitState {
    G,
    E,
}

/// Complex reflection coefficient off the detector cavity at probe
/// frequency `nu` (MHz).
///
/// With the qubit in `g` the cavity is bare; in `e` the e–f transition is
/// resonant with the cavity and couples with `sqrt(2) g0`.
pub fn reflection_coefficient(params: &DeviceParams, nu: f64, state: QubitState, gamma_atom: f64) -> Complex64 {
    let w = |x: f64| 2.0 * PI * x;
    let kappa = w(params.kappa);
    let detuning = w(params.nu_cav() - nu);
    let d_cav = Complex64::new(kappa / 2.0, detuning);
    let one = Complex64::new(1.0, 0.0);
    match state {
        QubitState::G => one - kappa / d_cav,
        QubitState::E => {
            let g_eff = w(2f64.sqrt() * params.g0);
            let d_atom = Complex64::new(w(gamma_atom) / 2.0, detuning);
            one - kappa * d_atom / (d_cav * d_atom + g_eff * g_eff)
        }
    }
}

/// Wraps a phase into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPoint {
    pub nu: f64,
    pub r_g: Complex64,
    pub r_e: Complex64,
    /// `arg r_g - arg r_e` wrapped into `(-pi, pi]`.
    pub delta_phi: f64,
}

impl ReflectionPoint {
    pub fn at(params: &DeviceParams, nu: f64) -> Self {
        let r_g = reflection_coefficient(params, nu, QubitState::G, params.gamma_atom);
        let r_e = reflection_coefficient(params, nu, QubitState::E, params.gamma_atom);
        Self { nu, r_g, r_e, delta_phi: wrap_phase(r_g.arg() - r_e.arg()) }
    }
}

/// Reflection coefficients and phase difference across `grid` (MHz).
pub fn phase_difference_spectrum(params: &DeviceParams, grid: &UniformGrid) -> Result<Vec<ReflectionPoint>> {
    let lo = params.nu_ef - 500.0;
    let hi = params.nu_ef + 500.0;
    if grid.start() < lo || grid.stop() > hi {
        return Err(Error::Argument(format!(
            "frequency grid [{}, {}] leaves the ±500 MHz window around {}",
            grid.start(),
            grid.stop(),
            params.nu_ef
        )));
    }
    Ok(grid.points().into_iter().map(|nu| ReflectionPoint::at(params, nu)).collect())
}

/// Number of grid intervals in which the phase difference passes through `pi`.
///
/// Because the phase is wrapped into `(-pi, pi]`, a crossing shows up as a
/// jump between the two branch ends.
pub fn count_pi_crossings(points: &[ReflectionPoint]) -> usize {
    points.windows(2).filter(|w| (w[1].delta_phi - w[0].delta_phi).abs() > PI).count()
}

/// Which transmon levels to keep when building the coupled Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmonLevels {
    /// g, e and f.
    Full,
    /// e and f only: the resonant Jaynes–Cummings pair without the dispersive
    /// pull of the detuned g–e transition.
    EfOnly,
}

/// Transmon ⊗ cavity Hamiltonian in the frame rotating at the cavity
/// frequency, in rad/us. Transmon is subsystem 0, cavity subsystem 1.
pub fn transmon_cavity_hamiltonian(params: &DeviceParams, levels: TransmonLevels, fock_dim: usize) -> Result<Operator> {
    let w = |x: f64| 2.0 * PI * x;
    let nu_c = params.nu_cav();
    // level energies minus nu_c times their excitation number
    let (energies, ladder): (Vec<f64>, CMatrix) = match levels {
        TransmonLevels::Full => {
            let e = vec![0.0, params.nu_ge - nu_c, params.nu_ge + params.nu_ef - 2.0 * nu_c];
            let mut b = CMatrix::zeros(3, 3);
            b[(0, 1)] = Complex64::new(1.0, 0.0);
            b[(1, 2)] = Complex64::new(2f64.sqrt(), 0.0);
            (e, b)
        }
        TransmonLevels::EfOnly => {
            let e = vec![params.nu_ge - nu_c, params.nu_ge + params.nu_ef - 2.0 * nu_c];
            let mut b = CMatrix::zeros(2, 2);
            b[(0, 1)] = Complex64::new(2f64.sqrt(), 0.0);
            (e, b)
        }
    };
    let nt = energies.len();
    let space = HilbertSpace::new(vec![nt, fock_dim])?;
    let h_t = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        nt,
        energies.iter().map(|&e| Complex64::new(w(e), 0.0)),
    ));
    let h_t = embed(&Operator::from_matrix(h_t)?, &space, 0)?;
    let b = embed(&Operator::from_matrix(ladder)?, &space, 0)?;
    let a = embed(&Operator::destroy(fock_dim), &space, 1)?;
    let coupling = a.mul(&b.dag())?.add(&a.dag().mul(&b)?)?.scale(w(params.g0));
    h_t.add(&coupling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn reference() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn dispersive_shift_reference_point() {
        let chi = dispersive_shift(-340.0, 40.0, -676.0).unwrap();
        assert!((chi - (-2.395)).abs() < 5e-4, "{chi}");
    }

    #[test]
    fn dispersive_shift_edge_cases() {
        assert_eq!(dispersive_shift(-340.0, 0.0, -676.0).unwrap(), 0.0);
        let chi = dispersive_shift(-340.0, 40.0, 340.0).unwrap();
        assert!((chi + 2.353).abs() < 5e-4);
        assert!(matches!(dispersive_shift(-340.0, 40.0, 0.0), Err(Error::Singularity(_))));
        assert!(matches!(dispersive_shift(-340.0, 40.0, -340.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn dressed_frequency_values() {
        let (lo, hi) = dressed_frequencies(&reference(), 1).unwrap();
        assert!((hi - 6191.5685).abs() < 1e-3 && (lo - 6078.4315).abs() < 1e-3);
        let (lo, hi) = dressed_frequencies(&reference(), 4).unwrap();
        assert!((hi - 6135.0 - 113.137).abs() < 1e-3 && (6135.0 - lo - 113.137).abs() < 1e-3);
        let flat = DeviceParams { g0: 0.0, ..reference() };
        assert_eq!(dressed_frequencies(&flat, 1).unwrap(), (6135.0, 6135.0));
        assert!(dressed_frequencies(&reference(), 0).is_err());
    }

    /// Eigenvalues of the n-excitation manifold of the e–f–cavity Hamiltonian.
    fn manifold_split(fock: usize, n: usize) -> (f64, f64) {
        let h = transmon_cavity_hamiltonian(&reference(), TransmonLevels::EfOnly, fock).unwrap();
        // |e, n> has index n, |f, n-1> has index fock + n - 1
        let idx = [n, fock + n - 1];
        let sub = CMatrix::from_fn(2, 2, |i, j| h.matrix()[(idx[i], idx[j])]);
        let mut ev: Vec<f64> = SymmetricEigen::new(sub).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        (ev[0] / (2.0 * PI), ev[1] / (2.0 * PI))
    }

    #[test]
    fn dressed_frequencies_match_diagonalisation() {
        for n in 1..=3u32 {
            let (lo, hi) = manifold_split(6, n as usize);
            let center = 0.5 * (lo + hi);
            let (d_lo, d_hi) = dressed_frequencies(&reference(), n).unwrap();
            assert!(((hi - center) - (d_hi - reference().nu_ef)).abs() < 1e-9);
            assert!(((lo - center) - (d_lo - reference().nu_ef)).abs() < 1e-9);
        }
    }

    #[test]
    fn low_manifolds_independent_of_truncation() {
        // excitation number is conserved, so each manifold is a diagonal block
        let manifold = |fock: usize, n: usize| {
            let h = transmon_cavity_hamiltonian(&reference(), TransmonLevels::Full, fock).unwrap();
            assert!(h.is_hermitian());
            let idx: Vec<usize> = (0..3usize).filter(|&t| t <= n).map(|t| t * fock + (n - t)).collect();
            let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, j| h.matrix()[(idx[i], idx[j])]);
            let mut ev: Vec<f64> = SymmetricEigen::new(sub).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.total_cmp(b));
            ev
        };
        for n in 1..=2 {
            let (s5, s7) = (manifold(5, n), manifold(7, n));
            for (a, b) in s5.iter().zip(&s7) {
                assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn reflection_on_resonance() {
        let p = reference();
        let rg = reflection_coefficient(&p, 6135.0, QubitState::G, 0.1);
        assert!((rg + Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((wrap_phase(rg.arg()) - PI).abs() < 1e-12);
        let re = reflection_coefficient(&p, 6135.0, QubitState::E, 0.0);
        assert!((re - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reflection_far_detuned() {
        let p = reference();
        for nu in [6135.0 + 100.0 * 19.0, 6135.0 - 100.0 * 19.0] {
            for s in [QubitState::G, QubitState::E] {
                assert!(reflection_coefficient(&p, nu, s, 0.1).arg().abs() < 0.02);
            }
        }
    }

    #[test]
    fn lossless_reflection_is_unitary() {
        let p = reference();
        let grid = UniformGrid::linspace(5700.0, 6600.0, 9001).unwrap();
        for nu in grid.points() {
            for s in [QubitState::G, QubitState::E] {
                assert!((reflection_coefficient(&p, nu, s, 0.0).norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn phase_difference_features() {
        let p = reference();
        assert!((ReflectionPoint::at(&p, 6135.0).delta_phi - PI).abs() < 1e-6);
        for nu in [6135.0 - 300.0, 6135.0 + 300.0] {
            assert!(ReflectionPoint::at(&p, nu).delta_phi.abs() < 0.1);
        }
        for x in [1.0, 13.0, 56.0, 70.0, 240.0] {
            let a = ReflectionPoint::at(&p, 6135.0 + x).delta_phi;
            let b = ReflectionPoint::at(&p, 6135.0 - x).delta_phi;
            // mirror images up to the branch cut at pi
            let diff = wrap_phase(a + b);
            assert!(diff.abs() < 1e-9 || (a - b).abs() < 1e-9, "x={x}: {a} {b}");
        }
    }

    #[test]
    fn three_pi_crossings() {
        let p = reference();
        let reach = 2.0 * 2f64.sqrt() * p.g0;
        let n = (2.0 * reach / 0.1).floor() as usize + 1;
        let grid = UniformGrid::new(p.nu_ef - reach, 0.1, n).unwrap();
        let pts = phase_difference_spectrum(&p, &grid).unwrap();
        assert_eq!(count_pi_crossings(&pts), 3);
    }

    #[test]
    fn spectrum_window_enforced() {
        let grid = UniformGrid::linspace(5000.0, 6200.0, 10).unwrap();
        assert!(phase_difference_spectrum(&reference(), &grid).is_err());
    }

    #[test]
    fn wrap_phase_branch() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn default_params_are_valid() {
        reference().validate().unwrap();
        assert!(DeviceParams { alpha: -300.0, ..reference() }.validate().is_err());
        assert!(DeviceParams { loss: 1.0, ..reference() }.validate().is_err());
        assert!(DeviceParams { t2_star: 7.0, ..reference() }.validate().is_err());
    }
}
