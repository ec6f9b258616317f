//! Moments of the reflected field with the detector running (ON) or idle
//! (OFF), and the power-conservation check that certifies QND operation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{trapezoid, TimeTrace, UniformGrid};
use crate::protocol::{photon_envelope, ProtocolConfig};

/// Maximum relative power deviation accepted by [`qnd_check`].
pub const QND_GATE: f64 = 0.02;

/// Normalised temporal mode used to integrate a field trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFilter {
    envelope: TimeTrace,
}

impl ModeFilter {
    pub fn new(envelope: TimeTrace) -> Result<Self> {
        let energy = envelope.energy();
        if !(energy > 0.0) {
            return Err(Error::Argument("filter envelope has no weight".into()));
        }
        let norm = energy.sqrt();
        let values = envelope.values.iter().map(|v| v / norm).collect();
        Ok(Self { envelope: TimeTrace::new(envelope.grid, values, envelope.label)? })
    }

    /// Filter matched to the emitted photon on `grid` (us).
    pub fn photon(cfg: &ProtocolConfig, grid: UniformGrid) -> Result<Self> {
        Self::new(TimeTrace::from_fn(grid, "photon mode", |t| Complex64::new(photon_envelope(t, cfg), 0.0)))
    }

    pub fn envelope(&self) -> &TimeTrace {
        &self.envelope
    }
}

/// `int f*(t) s(t) dt` on the shared grid.
pub fn matched_filter(trace: &TimeTrace, filt: &ModeFilter) -> Result<Complex64> {
    let f = filt.envelope();
    if !trace.grid.matches(&f.grid) {
        return Err(Error::Argument("trace and filter live on different grids".into()));
    }
    let h = f.grid.step();
    let re = trapezoid(h, f.values.iter().zip(&trace.values).map(|(f, s)| (f.conj() * s).re));
    let im = trapezoid(h, f.values.iter().zip(&trace.values).map(|(f, s)| (f.conj() * s).im));
    Ok(Complex64::new(re, im))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentPair {
    /// `<a^dag a>`.
    pub n_avg: f64,
    /// `Re <a>` in the optimised quadrature.
    pub re_a: f64,
}

impl MomentPair {
    /// Physical for a single mode: `n >= 0`, `|Re a| <= sqrt(n)`.
    pub fn is_physical(&self) -> bool {
        self.n_avg >= 0.0 && self.re_a.abs() <= self.n_avg.sqrt() + 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetectorMode {
    On,
    Off,
}

/// Ideal moments of the reflected source photon.
///
/// `scale` rescales powers by the calibrated transmission and amplitudes
/// by its square root. `on_coherence` is an additive residual coherence
/// in ON mode, zero for an ideal detector.
pub fn expected_moments(theta: f64, mode: DetectorMode, scale: f64) -> Result<MomentPair> {
    expected_moments_with_offset(theta, mode, scale, 0.0)
}

pub fn expected_moments_with_offset(
    theta: f64,
    mode: DetectorMode,
    scale: f64,
    on_coherence: f64,
) -> Result<MomentPair> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Argument(format!("theta {theta} outside [0, pi]")));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Argument(format!("scale {scale} outside (0, 1]")));
    }
    let n_avg = scale * (theta / 2.0).sin().powi(2);
    let re_a = match mode {
        DetectorMode::On => on_coherence,
        DetectorMode::Off => scale.sqrt() * theta.sin() / 2.0,
    };
    Ok(MomentPair { n_avg, re_a })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QndCheck {
    pub max_deviation: f64,
    pub pass: bool,
}

/// Largest `|n_ON - n_OFF| / max(n_OFF, floor)` over a shared theta grid.
///
/// Without an explicit floor the largest OFF power is used, i.e. the
/// deviation is quoted relative to full scale.
pub fn qnd_check(on: &[(f64, MomentPair)], off: &[(f64, MomentPair)], floor: Option<f64>) -> Result<QndCheck> {
    if on.len() != off.len() || on.is_empty() {
        return Err(Error::Argument(format!("theta grids differ in length ({} vs {})", on.len(), off.len())));
    }
    if on.iter().zip(off).any(|(a, b)| (a.0 - b.0).abs() > 1e-12) {
        return Err(Error::Argument("ON and OFF theta grids differ".into()));
    }
    let floor = floor.unwrap_or_else(|| off.iter().map(|(_, m)| m.n_avg).fold(0.0, f64::max));
    let max_deviation = on
        .iter()
        .zip(off)
        .map(|((_, a), (_, b))| {
            let denom = b.n_avg.max(floor);
            if denom > 0.0 {
                (a.n_avg - b.n_avg).abs() / denom
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(QndCheck { max_deviation, pass: max_deviation <= QND_GATE })
}

/// Measurement model for averaged field moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementNoise {
    /// Repetitions averaged per estimate.
    pub shots: usize,
    /// Added noise in photons per mode (variance of the complex amplitude).
    pub noise_photons: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self { shots: 12_500, noise_photons: 0.1 }
    }
}

fn complex_noise(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
}

/// Averaged `|S|^2` of noise-only records, subtracted from power estimates.
fn reference_power(noise: &MeasurementNoise, rng: &mut ChaCha8Rng) -> f64 {
    (0..noise.shots).map(|_| complex_noise(rng, noise.noise_photons).norm_sqr()).sum::<f64>() / noise.shots as f64
}

/// One averaged estimate of the moments. Each repetition returns a field
/// amplitude with the right mean and power whose random part has a
/// uniformly distributed phase, plus amplifier noise.
fn estimate(truth: &MomentPair, noise: &MeasurementNoise, reference: f64, rng: &mut ChaCha8Rng) -> MomentPair {
    let spread = (truth.n_avg - truth.re_a.powi(2)).max(0.0).sqrt();
    let (mut power, mut re) = (0.0, 0.0);
    for _ in 0..noise.shots {
        let phi = rng.random::<f64>() * 2.0 * PI;
        let s = truth.re_a + Complex64::from_polar(spread, phi) + complex_noise(rng, noise.noise_photons);
        power += s.norm_sqr();
        re += s.re;
    }
    let n = noise.shots as f64;
    MomentPair { n_avg: power / n - reference, re_a: re / n }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedMoments {
    pub thetas: Vec<f64>,
    pub on: Vec<MomentPair>,
    pub off: Vec<MomentPair>,
}

impl SimulatedMoments {
    pub fn check(&self, floor: Option<f64>) -> Result<QndCheck> {
        let pair = |v: &[MomentPair]| self.thetas.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        qnd_check(&pair(&self.on), &pair(&self.off), floor)
    }
}

/// Noisy ON/OFF moment estimates across `thetas`, deterministic in `seed`.
pub fn simulate_moments(
    thetas: &[f64],
    scale: f64,
    on_coherence: f64,
    noise: &MeasurementNoise,
    seed: u64,
) -> Result<SimulatedMoments> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = reference_power(noise, &mut rng);
    let mut on = Vec::with_capacity(thetas.len());
    let mut off = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let ideal_on = expected_moments_with_offset(theta, DetectorMode::On, scale, on_coherence)?;
        on.push(estimate(&ideal_on, noise, reference, &mut rng));
        off.push(estimate(&expected_moments(theta, DetectorMode::Off, scale)?, noise, reference, &mut rng));
    }
    Ok(SimulatedMoments { thetas: thetas.to_vec(), on, off })
}

/// Number of `seeds` whose simulated data pass the QND gate.
pub fn qnd_pass_count(
    thetas: &[f64],
    scale: f64,
    noise: &MeasurementNoise,
    floor: Option<f64>,
    seeds: &[u64],
) -> Result<usize> {
    let results: Result<Vec<bool>> = seeds
        .par_iter()
        .map(|&seed| Ok(simulate_moments(thetas, scale, 0.0, noise, seed)?.check(floor)?.pass))
        .collect();
    Ok(results?.into_iter().filter(|&p| p).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> UniformGrid {
        UniformGrid::linspace(0.0, 2.0, 4001).unwrap()
    }

    #[test]
    fn filter_is_normalised() {
        let f = ModeFilter::photon(&ProtocolConfig::default(), grid()).unwrap();
        assert!((f.envelope().energy() - 1.0).abs() < 1e-9);
        assert!(ModeFilter::new(TimeTrace::from_fn(grid(), "0", |_| Complex64::new(0.0, 0.0))).is_err());
    }

    #[test]
    fn self_overlap_and_linearity() {
        let f = ModeFilter::photon(&ProtocolConfig::default(), grid()).unwrap();
        let a = matched_filter(f.envelope(), &f).unwrap();
        assert!((a - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        let c = Complex64::new(0.3, -0.7);
        let scaled = TimeTrace::new(grid(), f.envelope().values.iter().map(|v| v * c).collect(), "c f").unwrap();
        assert!((matched_filter(&scaled, &f).unwrap() - c).norm() < 1e-9);
    }

    #[test]
    fn disjoint_support_gives_zero() {
        let early = TimeTrace::from_fn(grid(), "early", |t| Complex64::new(if t < 0.5 { 1.0 } else { 0.0 }, 0.0));
        let late = TimeTrace::from_fn(grid(), "late", |t| Complex64::new(if t > 1.0 { 1.0 } else { 0.0 }, 0.0));
        let f = ModeFilter::new(early).unwrap();
        assert!(matched_filter(&late, &f).unwrap().norm() < 1e-9);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let f = ModeFilter::photon(&ProtocolConfig::default(), grid()).unwrap();
        let other = TimeTrace::from_fn(UniformGrid::linspace(0.0, 1.0, 10).unwrap(), "s", |_| Complex64::new(1.0, 0.0));
        assert!(matches!(matched_filter(&other, &f), Err(Error::Argument(_))));
    }

    #[test]
    fn expected_moment_values() {
        let on = expected_moments(PI, DetectorMode::On, 1.0).unwrap();
        assert!((on.n_avg - 1.0).abs() < 1e-15 && on.re_a == 0.0);
        let off = expected_moments(PI / 2.0, DetectorMode::Off, 1.0).unwrap();
        assert!((off.n_avg - 0.5).abs() < 1e-15 && (off.re_a - 0.5).abs() < 1e-15);
        for mode in [DetectorMode::On, DetectorMode::Off] {
            let vac = expected_moments(0.0, mode, 1.0).unwrap();
            assert_eq!((vac.n_avg, vac.re_a), (0.0, 0.0));
        }
        assert!(expected_moments(1.0, DetectorMode::On, 0.0).is_err());
        assert!(expected_moments(4.0, DetectorMode::On, 1.0).is_err());
        let offset = expected_moments_with_offset(1.0, DetectorMode::On, 1.0, 0.05).unwrap();
        assert_eq!(offset.re_a, 0.05);
    }

    #[test]
    fn qnd_check_examples() {
        let grid: Vec<(f64, MomentPair)> = (0..9)
            .map(|k| {
                let th = PI * k as f64 / 8.0;
                (th, expected_moments(th, DetectorMode::Off, 0.75).unwrap())
            })
            .collect();
        let same = qnd_check(&grid, &grid, None).unwrap();
        assert_eq!(same.max_deviation, 0.0);
        assert!(same.pass);
        let louder: Vec<_> = grid.iter().map(|&(t, m)| (t, MomentPair { n_avg: 1.05 * m.n_avg, ..m })).collect();
        let c = qnd_check(&louder, &grid, None).unwrap();
        assert!((c.max_deviation - 0.05).abs() < 1e-12);
        assert!(!c.pass);
        assert!(qnd_check(&grid[..3], &grid, None).is_err());
    }

    #[test]
    fn simulation_is_reproducible() {
        let thetas = [0.0, PI / 2.0, PI];
        let noise = MeasurementNoise { shots: 1000, ..Default::default() };
        assert_eq!(
            simulate_moments(&thetas, 0.75, 0.0, &noise, 3).unwrap(),
            simulate_moments(&thetas, 0.75, 0.0, &noise, 3).unwrap()
        );
    }

    #[test]
    fn simulated_estimates_are_unbiased() {
        let noise = MeasurementNoise::default();
        let sim = simulate_moments(&[PI / 2.0], 0.75, 0.0, &noise, 8).unwrap();
        let truth = expected_moments(PI / 2.0, DetectorMode::Off, 0.75).unwrap();
        assert!((sim.off[0].n_avg - truth.n_avg).abs() < 0.03);
        assert!((sim.off[0].re_a - truth.re_a).abs() < 0.03);
        assert!(sim.on[0].re_a.abs() < 0.03);
    }
}
