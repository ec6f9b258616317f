//! End-to-end acceptance checks with pinned tolerances.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::calibration::{
    default_loss_components, fit_mollow, loss_budget, mollow_spectrum, run_loss_pipeline, stark_fit, steady_population,
    two_level_model, LossPipeline, MollowDataset, StarkDataset,
};
use crate::config::RunConfig;
use crate::device::{count_pi_crossings, dispersive_shift, phase_difference_spectrum, wrap_phase, ReflectionPoint};
use crate::error::Result;
use crate::grid::UniformGrid;
use crate::moments::{expected_moments, qnd_pass_count, DetectorMode, MeasurementNoise};
use crate::protocol::{
    fidelity_metrics, internal_fidelity, loss_deconvolution, readout_composition, single_shot_prediction, window_sweep,
};
use crate::quantum::{evolve, psd_on, steady_state, two_time_correlation, DensityMatrix, LindbladModel, Operator};
use crate::readout::{
    assignment_fidelity, fit_double_gaussian, overlap_error, preselect, sample_shots, GaussianMixture, Histogram,
    Threshold, DEFAULT_BINS,
};
use crate::runner::{run, Subcommand};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

/// Collects sub-checks of one criterion.
struct Checks {
    pass: bool,
    parts: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { pass: true, parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, text: String) {
        self.pass &= ok;
        self.parts.push(if ok { text } else { format!("{text} !!") });
    }

    fn within(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{label} = {got:.6} (want {want} ± {tol})"));
    }

    fn finish(self, id: u32, name: &'static str) -> Outcome {
        Outcome { id, name, pass: self.pass, detail: self.parts.join("; ") }
    }
}

fn guarded(id: u32, name: &'static str, body: impl FnOnce(&mut Checks) -> Result<()>) -> Outcome {
    let mut c = Checks::new();
    match body(&mut c) {
        Ok(()) => c.finish(id, name),
        Err(e) => Outcome { id, name, pass: false, detail: format!("error: {e}") },
    }
}

pub fn dispersive_shift_criterion() -> Outcome {
    guarded(1, "dispersive shift", |c| {
        c.within("chi [MHz]", dispersive_shift(-340.0, 40.0, -676.0)?, -2.40, 0.01);
        Ok(())
    })
}

pub fn reflection_criterion(cfg: &RunConfig) -> Outcome {
    guarded(2, "reflection spectrum", |c| {
        let d = &cfg.device;
        let at = |nu: f64| ReflectionPoint::at(d, nu).delta_phi;
        c.within("dphi(nu_ef) [rad]", at(d.nu_ef), PI, 1e-6);
        let split = 2f64.sqrt() * d.g0;
        for nu in [d.nu_ef - split, d.nu_ef + split] {
            let dev = wrap_phase(at(nu) - PI).abs();
            c.check(dev <= 0.05, format!("|dphi({nu:.2}) - pi| = {dev:.4} (want <= 0.05)"));
        }
        let grid = UniformGrid::new(d.nu_ef - 500.0, 0.1, 10_001)?;
        let crossings = count_pi_crossings(&phase_difference_spectrum(d, &grid)?);
        c.check(crossings == 3, format!("pi crossings = {crossings} (want 3)"));
        Ok(())
    })
}

pub fn detection_point_criterion(cfg: &RunConfig) -> Outcome {
    guarded(3, "detection point", |c| {
        let m = fidelity_metrics(&cfg.protocol.with_window(0.250), &cfg.device);
        c.within("P(e|1)", m.p_e_given_1, 0.658, 0.03);
        c.within("P(e|0)", m.p_e_given_0, 0.059, 0.015);
        c.within("F", m.fidelity, 0.599, 0.04);
        Ok(())
    })
}

pub fn window_sweep_criterion(cfg: &RunConfig) -> Outcome {
    guarded(4, "window sweep", |c| {
        let grid = UniformGrid::linspace(0.025, 1.0, 976)?;
        let sweep = window_sweep(&cfg.protocol, &cfg.device, &grid.points());
        let p1: Vec<f64> = sweep.iter().map(|(_, p)| p.p_e_given_1).collect();
        let peaks: Vec<usize> = (1..p1.len() - 1).filter(|&k| p1[k] > p1[k - 1] && p1[k] >= p1[k + 1]).collect();
        c.check(peaks.len() == 1, format!("local maxima of P(e|1) = {} (want 1)", peaks.len()));
        if let Some(&k) = peaks.first() {
            c.within("peak Tw [us]", grid.at(k), 0.300, 0.050);
        }
        let monotone = sweep.windows(2).all(|w| w[1].1.p_e_given_0 > w[0].1.p_e_given_0);
        c.check(monotone, format!("P(e|0) strictly increasing = {monotone}"));
        let ratio = fidelity_metrics(&cfg.protocol.with_window(0.100), &cfg.device).ratio;
        c.check((13.0..=20.0).contains(&ratio), format!("ratio(100 ns) = {ratio:.3} (want in [13, 20])"));
        Ok(())
    })
}

pub fn single_shot_criterion(cfg: &RunConfig) -> Outcome {
    guarded(5, "single-shot composition", |c| {
        let d = &cfg.device;
        c.within("P(g|1)", 1.0 - readout_composition(0.658, d.eps_ge, d.eps_eg), 0.37, 0.02);
        c.within("F_ro", assignment_fidelity(0.063, 0.022)?, 0.915, 1e-12);
        let f = single_shot_prediction(&cfg.protocol.with_window(0.250), d).fidelity;
        c.check((0.49..=0.56).contains(&f), format!("composed F = {f:.4} (want in [0.49, 0.56])"));
        Ok(())
    })
}

pub fn internal_fidelity_criterion() -> Outcome {
    guarded(6, "internal fidelity", |c| {
        c.within("P_in(g|1)", loss_deconvolution(0.37, 0.25)?.value, 0.16, 1e-12);
        c.within("F_in", internal_fidelity(0.16, 0.134), 0.706, 0.005);
        Ok(())
    })
}

pub fn qnd_criterion(cfg: &RunConfig) -> Outcome {
    guarded(7, "QND power conservation", |c| {
        let scale = 1.0 - cfg.device.loss;
        let thetas = UniformGrid::linspace(0.0, PI, 9)?.points();
        let mut identical = true;
        for &t in &thetas {
            let on = expected_moments(t, DetectorMode::On, scale)?;
            let off = expected_moments(t, DetectorMode::Off, scale)?;
            identical &= on.n_avg == off.n_avg;
        }
        c.check(identical, format!("expected ON/OFF powers identical = {identical}"));
        let noise = MeasurementNoise { shots: 12_500, noise_photons: cfg.qnd.noise_photons };
        let seeds: Vec<u64> = (0..100).collect();
        let passes = qnd_pass_count(&thetas, scale, &noise, cfg.qnd.floor, &seeds)?;
        c.check(passes >= 95, format!("Monte Carlo passes = {passes}/100 (want >= 95)"));
        Ok(())
    })
}

pub fn mollow_criterion(cfg: &RunConfig) -> Outcome {
    guarded(8, "Mollow pipeline", |c| {
        let gamma = cfg.device.gamma_source;
        let ratios = [2.0, 4.0, 6.0];
        for r in ratios {
            let span = 3.0 * r * gamma;
            let s = mollow_spectrum(r, gamma, &UniformGrid::linspace(-span, span, 1201)?)?;
            let side = r * gamma;
            let maxima = s.local_maxima();
            let mut worst: f64 = 0.0;
            for target in [-side, side] {
                let best = maxima
                    .iter()
                    .map(|m| m.0)
                    .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                    .unwrap_or(0.0);
                worst = worst.max((best - target).abs() / side);
            }
            c.check(worst <= 0.05, format!("Omega/Gamma = {r}: sideband offset {:.2}% (want <= 5%)", 100.0 * worst));
        }
        let grid = UniformGrid::linspace(-25.0, 25.0, 201)?;
        let data = MollowDataset::synthetic(&ratios, gamma, 0.8, 0.01, &grid, 7)?;
        let fit = fit_mollow(&data, gamma)?;
        c.within("gain", fit.gain, 0.8, 0.02 * 0.8);
        let mut worst: f64 = 0.0;
        for r in [0.1, 1.0, 5.0, 100.0] {
            let rho = steady_state(&two_level_model(r, gamma)?)?;
            worst = worst.max((rho.population(1) - steady_population(r, 1.0)?).abs());
        }
        c.check(worst <= 1e-6, format!("max |n_q - rho_ee| = {worst:.2e} (want <= 1e-6)"));
        c.within("n_q(Omega/Gamma = 1e4)", steady_population(1e4, 1.0)?, 0.5, 1e-6);
        Ok(())
    })
}

pub fn stark_loss_criterion(cfg: &RunConfig) -> Outcome {
    guarded(9, "Stark and loss pipeline", |c| {
        let d = &cfg.device;
        let chi = -2.4;
        let powers: Vec<f64> = (0..11).map(|k| 0.5 * k as f64).collect();
        let exact = stark_fit(&StarkDataset::synthetic(chi, 1.0, d.nu_ge, &powers, 0.0, 0)?)?;
        let rel = (exact.slope - 2.0 * chi).abs() / (2.0 * chi).abs();
        c.check(rel < 0.01, format!("noiseless slope error = {rel:.2e} (want < 1%)"));
        let mut inside = 0;
        for seed in 0..20 {
            let fit = stark_fit(&StarkDataset::synthetic(chi, 1.0, d.nu_ge, &powers, 0.01, seed)?)?;
            inside += usize::from((fit.slope - 2.0 * chi).abs() <= 3.0 * fit.slope_se);
        }
        c.check(inside == 20, format!("noisy slopes within 3 SE = {inside}/20"));
        let grid = UniformGrid::linspace(-25.0, 25.0, 201)?;
        let result = run_loss_pipeline(&LossPipeline { loss_truth: 0.25, ..LossPipeline::default() }, &grid, 3)?;
        c.within("L", result.loss, 0.25, 0.02);
        c.within("additive budget", loss_budget(&default_loss_components())?.total_additive, 0.20, 1e-12);
        Ok(())
    })
}

pub fn engine_criterion() -> Outcome {
    guarded(10, "engine validation", |c| {
        let gamma = 2.0 * PI * 1.77;
        let decay =
            LindbladModel::new(Operator::pauli_z().scale(0.0), vec![Operator::sigma_minus().scale(gamma.sqrt())])?;
        let excited = DensityMatrix::basis(decay.space().clone(), 1)?;
        let grid = UniformGrid::linspace(0.0, 5.0 / gamma, 201)?;
        let states = evolve(&decay, &excited, &grid)?;
        let err = grid
            .points()
            .iter()
            .zip(&states)
            .map(|(t, s)| (s.population(1) - (-gamma * t).exp()).abs())
            .fold(0.0, f64::max);
        c.check(err <= 1e-6, format!("decay error = {err:.2e} (want <= 1e-6)"));

        let omega = 2.0 * PI * 5.0;
        let driven = two_level_model(omega / gamma, 1.77)?;
        let grid = UniformGrid::linspace(0.0, 2.0, 401)?;
        let trace_err =
            evolve(&driven, &excited, &grid)?.iter().map(|s| (s.trace().re - 1.0).abs()).fold(0.0, f64::max);
        c.check(trace_err <= 1e-7, format!("trace drift = {trace_err:.2e} (want <= 1e-7)"));

        let rabi = LindbladModel::new(Operator::pauli_x().scale(omega / 2.0), vec![])?;
        let ground = DensityMatrix::basis(rabi.space().clone(), 0)?;
        let period = 2.0 * PI / omega;
        let grid = UniformGrid::linspace(0.0, period, 2001)?;
        let z: Vec<f64> = evolve(&rabi, &ground, &grid)?
            .iter()
            .map(|s| s.expect(&Operator::pauli_z()).map(|v| v.re))
            .collect::<Result<_>>()?;
        let crossings: Vec<f64> = (1..z.len())
            .filter(|&k| z[k - 1].signum() != z[k].signum())
            .map(|k| grid.at(k - 1) + grid.step() * z[k - 1] / (z[k - 1] - z[k]))
            .collect();
        let measured = if crossings.len() == 2 { 2.0 * (crossings[1] - crossings[0]) } else { f64::NAN };
        let rel = (measured - period).abs() / period;
        c.check(rel <= 1e-6, format!("Rabi period error = {rel:.2e} (want <= 1e-6)"));

        let mut worst: f64 = 0.0;
        for g in [1.0, 1.77, 5.0] {
            worst = worst.max(lorentzian_width_error(g)?);
        }
        c.check(worst <= 0.02, format!("Lorentzian width error = {:.3}% (want <= 2%)", 100.0 * worst));
        Ok(())
    })
}

/// Relative error of the regression-theorem linewidth of a decaying atom.
pub fn lorentzian_width_error(gamma_mhz: f64) -> Result<f64> {
    let rate = 2.0 * PI * gamma_mhz;
    let model = LindbladModel::new(Operator::pauli_z().scale(0.0), vec![Operator::sigma_minus().scale(rate.sqrt())])?;
    let rho = steady_state(&model)?;
    let taus = UniformGrid::linspace(0.0, 24.0 / rate, 8192)?;
    let corr = two_time_correlation(&model, &rho, &Operator::sigma_minus(), &Operator::sigma_plus(), &taus)?;
    let freqs = UniformGrid::linspace(-5.0 * gamma_mhz, 5.0 * gamma_mhz, 2001)?;
    let s = psd_on(&corr, &freqs)?;
    let half = 0.5 * s.max();
    let edges: Vec<f64> = (1..s.values.len())
        .filter(|&k| (s.values[k - 1] - half).signum() != (s.values[k] - half).signum())
        .map(|k| freqs.at(k - 1) + freqs.step() * (s.values[k - 1] - half) / (s.values[k - 1] - s.values[k]))
        .collect();
    if edges.len() != 2 {
        return Ok(f64::INFINITY);
    }
    Ok(((edges[1] - edges[0]) - gamma_mhz).abs() / gamma_mhz)
}

pub fn readout_criterion(cfg: &RunConfig) -> Outcome {
    guarded(11, "readout statistics", |c| {
        let truth = GaussianMixture::new(0.0, 6.0, 1.0, 0.5)?;
        let mut inside = 0;
        for seed in 0..20 {
            let shots = sample_shots(&truth, 0.5, 12_500, seed, "round trip")?;
            let fit = fit_double_gaussian(&Histogram::from_shots(&shots, DEFAULT_BINS)?)?;
            let m = fit.mixture;
            let se = fit.std_errors;
            let ok = (m.mu_g - truth.mu_g).abs() <= 3.0 * se[0]
                && (m.mu_e - truth.mu_e).abs() <= 3.0 * se[1]
                && (m.sigma_g - truth.sigma_g).abs() <= 3.0 * se[2]
                && (m.w_e - truth.w_e).abs() <= 3.0 * se[4];
            inside += usize::from(ok);
        }
        c.check(inside == 20, format!("round trips within 3 SE = {inside}/20"));
        let overlap = overlap_error(&GaussianMixture::from_snr(5.75, 0.5)?);
        c.within("overlap error", overlap, 0.002, 0.1 * 0.002);
        let n = 12_500;
        let mix = GaussianMixture::from_snr(cfg.readout.snr, 0.0)?;
        let shots = sample_shots(&mix, 0.06, n, 11, "thermal")?;
        let (_, discard) = preselect(&shots, &Threshold::conservative(&mix, 3.0));
        c.within("discard fraction", discard, 0.06, 3.0 * (0.06 * 0.94 / n as f64).sqrt());
        Ok(())
    })
}

/// Runs every subcommand twice into fresh directories and compares bytes.
pub fn determinism_criterion(cfg: &RunConfig) -> Outcome {
    guarded(12, "determinism", |c| {
        let a = tempfile::tempdir()?;
        let b = tempfile::tempdir()?;
        let mut mismatched = Vec::new();
        let mut files = 0;
        for cmd in Subcommand::ALL {
            let ra = run(cmd, cfg, a.path())?;
            let rb = run(cmd, cfg, b.path())?;
            if ra != rb {
                mismatched.push(ra.file_name());
            }
            for name in ra.files.iter().chain(std::iter::once(&ra.file_name())) {
                files += 1;
                if !same_bytes(&a.path().join(name), &b.path().join(name))? {
                    mismatched.push(name.clone());
                }
            }
        }
        c.check(mismatched.is_empty(), format!("{files} files compared, mismatched: {mismatched:?}"));
        Ok(())
    })
}

fn same_bytes(a: &Path, b: &Path) -> Result<bool> {
    Ok(std::fs::read(a)? == std::fs::read(b)?)
}

pub fn run_all(cfg: &RunConfig) -> Vec<Outcome> {
    vec![
        dispersive_shift_criterion(),
        reflection_criterion(cfg),
        detection_point_criterion(cfg),
        window_sweep_criterion(cfg),
        single_shot_criterion(cfg),
        internal_fidelity_criterion(),
        qnd_criterion(cfg),
        mollow_criterion(cfg),
        stark_loss_criterion(cfg),
        engine_criterion(),
        readout_criterion(cfg),
        determinism_criterion(cfg),
    ]
}
