//! Batch experiments, one per subcommand of the command line tool.

use std::path::Path;

use clap::ValueEnum;

use crate::calibration::{
    default_loss_components, detector_output_flux, fit_mollow, loss_budget, mollow_spectrum, run_loss_pipeline,
    source_power, stark_fit, steady_population, LossPipeline, MollowDataset, StarkDataset,
};
use crate::config::RunConfig;
use crate::device::{count_pi_crossings, dispersive_shift, phase_difference_spectrum, ReflectionPoint};
use crate::error::Result;
use crate::moments::{
    expected_moments_with_offset, qnd_check, qnd_pass_count, simulate_moments, DetectorMode, MeasurementNoise,
};
use crate::output::{Cell, Emitter, RunReport};
use crate::protocol::{
    fidelity_metrics, optimal_window, single_shot_prediction, theta_sweep, window_sweep, DetectionProbs,
};
use crate::readout::{
    assign, assignment_fidelity, fit_double_gaussian, overlap_error, preselect, sample_shots, GaussianMixture,
    Histogram, Threshold,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    /// Reflection phase difference versus probe frequency.
    Spectrum,
    /// Click probability versus source angle.
    ThetaSweep,
    /// Detection figures versus window length.
    WindowSweep,
    /// Field moments with the detector on and off.
    Qnd,
    /// Fluorescence spectra and gain calibration.
    Mollow,
    /// AC-Stark photon-number calibration.
    Stark,
    /// Single-shot readout histograms and fits.
    Readout,
    /// Loss budget and end-to-end loss extraction.
    Loss,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Spectrum,
        Subcommand::ThetaSweep,
        Subcommand::WindowSweep,
        Subcommand::Qnd,
        Subcommand::Mollow,
        Subcommand::Stark,
        Subcommand::Readout,
        Subcommand::Loss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::ThetaSweep => "theta-sweep",
            Subcommand::WindowSweep => "window-sweep",
            Subcommand::Qnd => "qnd",
            Subcommand::Mollow => "mollow",
            Subcommand::Stark => "stark",
            Subcommand::Readout => "readout",
            Subcommand::Loss => "loss",
        }
    }
}

pub fn run(cmd: Subcommand, cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut em = Emitter::new(out, cmd.name(), cfg.digest(), cfg.seed)?;
    match cmd {
        Subcommand::Spectrum => run_spectrum(cfg, &mut em)?,
        Subcommand::ThetaSweep => run_theta_sweep(cfg, &mut em)?,
        Subcommand::WindowSweep => run_window_sweep(cfg, &mut em)?,
        Subcommand::Qnd => run_qnd(cfg, &mut em)?,
        Subcommand::Mollow => run_mollow(cfg, &mut em)?,
        Subcommand::Stark => run_stark(cfg, &mut em)?,
        Subcommand::Readout => run_readout(cfg, &mut em)?,
        Subcommand::Loss => run_loss(cfg, &mut em)?,
    }
    em.finish()
}

/// Independent stream index for the `k`-th random process of a run.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k)
}

fn run_spectrum(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let d = &cfg.device;
    let points = phase_difference_spectrum(d, &cfg.sweeps.frequency.grid()?)?;
    let rows: Vec<Vec<Cell>> = points
        .iter()
        .map(|p| {
            vec![p.nu.into(), p.r_g.re.into(), p.r_g.im.into(), p.r_e.re.into(), p.r_e.im.into(), p.delta_phi.into()]
        })
        .collect();
    em.csv("spectrum.csv", &["nu_MHz", "re_rg", "im_rg", "re_re", "im_re", "delta_phi_rad"], &rows)?;
    em.metric("pi_crossings", count_pi_crossings(&points));
    em.number("delta_phi_at_cavity_rad", ReflectionPoint::at(d, d.nu_cav()).delta_phi);
    em.number("chi_MHz", dispersive_shift(d.alpha, d.g0, d.delta_qc)?);
    Ok(())
}

fn probs_metrics(em: &mut Emitter, prefix: &str, p: &DetectionProbs) {
    em.number(&format!("{prefix}p_e_given_1"), p.p_e_given_1);
    em.number(&format!("{prefix}p_e_given_0"), p.p_e_given_0);
    em.number(&format!("{prefix}fidelity"), p.fidelity);
    em.number(&format!("{prefix}ratio"), p.ratio);
}

fn run_theta_sweep(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let sweep = theta_sweep(&cfg.protocol, &cfg.device, &cfg.sweeps.theta.grid()?.points())?;
    let rows: Vec<Vec<Cell>> = sweep.iter().map(|&(t, p)| vec![t.into(), p.into()]).collect();
    em.csv("theta_sweep.csv", &["theta_rad", "p_e"], &rows)?;
    probs_metrics(em, "", &fidelity_metrics(&cfg.protocol, &cfg.device));
    probs_metrics(em, "single_shot_", &single_shot_prediction(&cfg.protocol, &cfg.device));
    em.number("tw_us", cfg.protocol.tw);
    Ok(())
}

fn run_window_sweep(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let grid = cfg.sweeps.window.grid()?;
    let sweep = window_sweep(&cfg.protocol, &cfg.device, &grid.points());
    let rows: Vec<Vec<Cell>> = sweep
        .iter()
        .map(|(tw, p)| {
            vec![(*tw).into(), p.p_e_given_1.into(), p.p_e_given_0.into(), p.fidelity.into(), p.ratio.into()]
        })
        .collect();
    em.csv("window_sweep.csv", &["Tw_us", "p_e1", "p_e0", "fidelity", "ratio"], &rows)?;
    let peak = optimal_window(&cfg.protocol, &cfg.device, grid.start(), grid.stop());
    em.number("peak_tw_us", peak);
    em.number("peak_p_e_given_1", fidelity_metrics(&cfg.protocol.with_window(peak), &cfg.device).p_e_given_1);
    em.number("max_ratio", sweep.iter().map(|(_, p)| p.ratio).fold(0.0, f64::max));
    em.number("ratio_at_100ns", fidelity_metrics(&cfg.protocol.with_window(0.1), &cfg.device).ratio);
    Ok(())
}

fn run_qnd(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let thetas = cfg.sweeps.qnd_theta.grid()?.points();
    let scale = 1.0 - cfg.device.loss;
    let q = &cfg.qnd;
    let noise = MeasurementNoise { shots: q.shots, noise_photons: q.noise_photons };
    let header = ["theta_rad", "n_on", "n_off", "re_a_on", "re_a_off"];

    let mut expected_on = Vec::new();
    let mut expected_off = Vec::new();
    let mut rows = Vec::new();
    for &t in &thetas {
        let on = expected_moments_with_offset(t, DetectorMode::On, scale, q.on_coherence)?;
        let off = expected_moments_with_offset(t, DetectorMode::Off, scale, q.on_coherence)?;
        rows.push(vec![t.into(), on.n_avg.into(), off.n_avg.into(), on.re_a.into(), off.re_a.into()]);
        expected_on.push((t, on));
        expected_off.push((t, off));
    }
    em.csv("qnd_expected.csv", &header, &rows)?;

    let sim = simulate_moments(&thetas, scale, q.on_coherence, &noise, sub_seed(cfg.seed, 0))?;
    let rows: Vec<Vec<Cell>> = thetas
        .iter()
        .zip(sim.on.iter().zip(&sim.off))
        .map(|(&t, (on, off))| vec![t.into(), on.n_avg.into(), off.n_avg.into(), on.re_a.into(), off.re_a.into()])
        .collect();
    em.csv("qnd.csv", &header, &rows)?;

    let check = sim.check(q.floor)?;
    em.number("expected_max_deviation", qnd_check(&expected_on, &expected_off, q.floor)?.max_deviation);
    em.number("max_deviation", check.max_deviation);
    em.metric("pass", check.pass);
    let seeds: Vec<u64> = (0..q.monte_carlo_seeds).map(|k| sub_seed(cfg.seed, 1 + k)).collect();
    let passes = qnd_pass_count(&thetas, scale, &noise, q.floor, &seeds)?;
    em.metric("monte_carlo_passes", passes);
    em.metric("monte_carlo_seeds", q.monte_carlo_seeds);
    Ok(())
}

fn run_mollow(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let gamma = cfg.device.gamma_source;
    let grid = cfg.sweeps.detuning.grid()?;
    let ratios = &cfg.sweeps.drive_ratios;
    let c = &cfg.calibration;
    let data = MollowDataset::synthetic(ratios, gamma, c.mollow_gain, c.noise, &grid, sub_seed(cfg.seed, 0))?;

    let mut rows = Vec::new();
    let mut worst_sideband: f64 = 0.0;
    for (k, (&r, measured)) in ratios.iter().zip(&data.spectra).enumerate() {
        let clean = mollow_spectrum(r, gamma, &grid)?;
        let offset = k as f64 * c.spectrum_offset;
        for j in 0..grid.len() {
            rows.push(vec![
                r.into(),
                grid.at(j).into(),
                clean.values[j].into(),
                measured.values[j].into(),
                offset.into(),
            ]);
        }
        let side = r * gamma;
        for target in [-side, side] {
            if let Some(best) = clean
                .local_maxima()
                .iter()
                .map(|m| m.0)
                .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            {
                worst_sideband = worst_sideband.max((best - target).abs() / side);
            }
        }
    }
    em.csv("mollow_spectra.csv", &["omega_over_gamma", "delta_MHz", "psd", "measured", "offset"], &rows)?;

    let fit = fit_mollow(&data, gamma)?;
    let mut rows = vec![
        vec!["gain".into(), fit.gain.into(), fit.gain_se.into(), c.mollow_gain.into()],
        vec!["gamma_MHz".into(), fit.gamma.into(), fit.gamma_se.into(), gamma.into()],
    ];
    for (k, ((&got, &se), &r)) in fit.omega_ratios.iter().zip(&fit.omega_ratios_se).zip(ratios).enumerate() {
        rows.push(vec![Cell::Text(format!("omega_over_gamma_{k}")), got.into(), se.into(), r.into()]);
    }
    em.csv("mollow_fit.csv", &["parameter", "value", "std_error", "truth"], &rows)?;

    em.number("gain", fit.gain);
    em.number("gain_relative_error", (fit.gain - c.mollow_gain).abs() / c.mollow_gain);
    em.number("gamma_MHz", fit.gamma);
    em.number("sideband_relative_offset", worst_sideband);
    let n_q = steady_population(1e3, 1.0)?;
    em.number("saturated_source_flux_per_us", source_power(n_q, gamma, cfg.device.nu_ge)?.per_us);
    Ok(())
}

fn run_stark(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let d = &cfg.device;
    let c = &cfg.calibration;
    let chi = dispersive_shift(d.alpha, d.g0, d.delta_qc)?;
    let powers = cfg.sweeps.stark_power.grid()?.points();
    let data = StarkDataset::synthetic(chi, c.photons_per_unit, d.nu_ge, &powers, c.noise, sub_seed(cfg.seed, 0))?;
    let fit = stark_fit(&data)?;
    let rows = data
        .points
        .iter()
        .map(|&(p, nu)| Ok(vec![p.into(), nu.into(), fit.photon_number(p, chi)?.into()]))
        .collect::<Result<Vec<Vec<Cell>>>>()?;
    em.csv("stark.csv", &["P_in", "nu_q_MHz", "n_p"], &rows)?;
    em.number("chi_MHz", chi);
    em.number("slope_MHz_per_unit", fit.slope);
    em.number("slope_se", fit.slope_se);
    em.number("expected_slope", 2.0 * chi * c.photons_per_unit);
    em.number("nu_q0_MHz", fit.nu_q0);
    let flux = detector_output_flux(fit.photon_number(1.0, chi)?, d.kappa, d.nu_cav())?;
    em.number("output_flux_per_unit_power_per_us", flux.per_us);
    em.number("output_power_per_unit_power_W", flux.watts());
    Ok(())
}

fn run_readout(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let d = &cfg.device;
    let r = &cfg.readout;
    let mix = GaussianMixture::from_snr(r.snr, 0.5)?;
    let midpoint = Threshold::midpoint(&mix);
    let preparations = [("g", d.eps_eg), ("e", 1.0 - d.eps_ge), ("thermal", d.p_thermal)];

    let mut fit_rows = Vec::new();
    let mut assigned = Vec::new();
    for (k, &(label, p_e)) in preparations.iter().enumerate() {
        let shots = sample_shots(&mix, p_e, r.shots, sub_seed(cfg.seed, k as u64), label)?;
        let rows: Vec<Vec<Cell>> = shots.values.iter().enumerate().map(|(i, &q)| vec![i.into(), q.into()]).collect();
        em.csv(&format!("shots_{label}.csv"), &["index", "q"], &rows)?;
        let hist = Histogram::from_shots(&shots, r.bins)?;
        let rows: Vec<Vec<Cell>> =
            hist.counts.iter().enumerate().map(|(i, &c)| vec![hist.centers.at(i).into(), c.into()]).collect();
        em.csv(&format!("histogram_{label}.csv"), &["bin_center", "count"], &rows)?;
        let fit = fit_double_gaussian(&hist)?;
        let m = fit.mixture;
        fit_rows.push(vec![label.into(), m.mu_g.into(), m.mu_e.into(), m.sigma().into(), m.w_e.into(), fit.rss.into()]);
        assigned.push(assign(&shots, &midpoint));
        if label == "thermal" {
            let (_, discard) = preselect(&shots, &Threshold::conservative(&mix, r.preselect_sigmas));
            em.number("preselection_discard_fraction", discard);
        }
    }
    em.csv("readout_fit.csv", &["label", "mu_g", "mu_e", "sigma", "w_e", "rss"], &fit_rows)?;

    em.number("readout_fidelity", assignment_fidelity(d.eps_ge, d.eps_eg)?);
    em.number("measured_p_e_given_g", assigned[0]);
    em.number("measured_p_g_given_e", 1.0 - assigned[1]);
    em.number("measured_readout_fidelity", assigned[1] - assigned[0]);
    em.number("overlap_error", overlap_error(&mix));
    Ok(())
}

fn run_loss(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let budget = loss_budget(&default_loss_components())?;
    let mut cumulative = 0.0;
    let rows: Vec<Vec<Cell>> = budget
        .components
        .iter()
        .map(|(name, f)| {
            cumulative += f;
            vec![name.as_str().into(), (*f).into(), cumulative.into()]
        })
        .collect();
    em.csv("loss_budget.csv", &["name", "fraction", "cumulative"], &rows)?;

    let d = &cfg.device;
    let c = &cfg.calibration;
    let pipeline = LossPipeline {
        loss_truth: d.loss,
        detector_gain: c.detector_gain,
        gamma: d.gamma_source,
        drive_ratios: cfg.sweeps.drive_ratios.clone(),
        chi: dispersive_shift(d.alpha, d.g0, d.delta_qc)?,
        kappa: d.kappa,
        nu_q0: d.nu_ge,
        nu_cav: d.nu_cav(),
        photons_per_unit: c.photons_per_unit,
        stark_powers: cfg.sweeps.stark_power.grid()?.points(),
        noise: c.noise,
    };
    let result = run_loss_pipeline(&pipeline, &cfg.sweeps.detuning.grid()?, sub_seed(cfg.seed, 0))?;
    let rows = vec![
        vec!["g_s".into(), result.g_s.into()],
        vec!["g_d".into(), result.g_d.into()],
        vec!["loss".into(), result.loss.into()],
        vec!["loss_truth".into(), d.loss.into()],
    ];
    em.csv("loss_extraction.csv", &["quantity", "value"], &rows)?;
    em.number("total_additive", budget.total_additive);
    em.number("total_multiplicative", budget.total_multiplicative);
    em.number("loss", result.loss);
    em.metric("negative_loss", result.negative);
    Ok(())
}
