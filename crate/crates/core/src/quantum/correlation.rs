//! Stationary two-time correlators via the quantum regression theorem and
//! their power spectral densities.
//!
//! Spectra use the convention
//!
//! ```text
//! S(nu) = (1/pi) Re  int_0^inf  C(tau) exp(-i 2 pi nu tau) dtau
//! ```
//!
//! with `nu` in MHz and `tau` in us, so `S` is a density per unit angular
//! frequency (us) and `2 pi * int S(nu) dnu = C(0)` for a decaying `C`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::lindblad::{propagate, stationarity_residual, LindbladModel};
use super::space::{CMatrix, DensityMatrix, Operator};
use crate::error::{Error, Result};
use crate::grid::{SpectrumTrace, TimeTrace, UniformGrid};

/// Residual above which a state is not accepted as stationary.
pub const STATIONARITY_TOL: f64 = 1e-8;
/// Required decay of a correlator at the end of its delay grid.
pub const DECAY_TOL: f64 = 1e-4;

/// `<A(tau) B(0)>` in the stationary state `rho_ss`, for `tau` on `tau_grid`.
pub fn two_time_correlation(
    model: &LindbladModel,
    rho_ss: &DensityMatrix,
    a: &Operator,
    b: &Operator,
    tau_grid: &UniformGrid,
) -> Result<TimeTrace> {
    check_inputs(model, rho_ss, a, b)?;
    if tau_grid.start() != 0.0 {
        return Err(Error::Argument(format!("delay grid must start at 0, not {}", tau_grid.start())));
    }
    let residual = stationarity_residual(model, rho_ss)?;
    if residual > STATIONARITY_TOL {
        return Err(Error::Precondition(format!("state is not stationary (|drho/dt| = {residual:.3e})")));
    }
    let seed = b.matrix() * rho_ss.matrix();
    let states = propagate(model, &seed, tau_grid)?;
    let values = states.iter().map(|x| (a.matrix() * x).trace()).collect();
    TimeTrace::new(*tau_grid, values, "correlation")
}

/// Power spectral density on the FFT grid implied by the delay grid
/// (zero-padded four-fold, covering the full Nyquist band).
pub fn psd(corr: &TimeTrace) -> Result<SpectrumTrace> {
    check_decay(corr)?;
    let n = corr.values.len();
    let h = corr.grid.step();
    let n_fft = (4 * n).next_power_of_two();

    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n_fft];
    for (k, (slot, c)) in buf.iter_mut().zip(&corr.values).enumerate() {
        *slot = c * trapezoid_weight(k, n);
    }
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);

    let df = 1.0 / (n_fft as f64 * h);
    let half = n_fft / 2;
    let grid = UniformGrid::new(-(half as f64) * df, df, n_fft)?;
    let values = (0..n_fft)
        .map(|m| {
            // grid index m is frequency bin (m - half) mod n_fft
            let bin = (m + n_fft - half) % n_fft;
            h * buf[bin].re / PI
        })
        .collect();
    SpectrumTrace::new(grid, values, corr.label.clone())
}

/// Power spectral density evaluated directly at arbitrary frequencies (MHz).
pub fn psd_on(corr: &TimeTrace, freqs: &UniformGrid) -> Result<SpectrumTrace> {
    check_decay(corr)?;
    let values = freqs.points().into_iter().map(|nu| psd_at(corr, nu)).collect();
    SpectrumTrace::new(*freqs, values, corr.label.clone())
}

/// Single-frequency evaluation of the discrete one-sided transform.
pub fn psd_at(corr: &TimeTrace, nu: f64) -> f64 {
    let n = corr.values.len();
    let h = corr.grid.step();
    let w = -2.0 * PI * nu;
    let sum: Complex64 = corr
        .values
        .iter()
        .enumerate()
        .map(|(k, c)| c * Complex64::from_polar(trapezoid_weight(k, n), w * corr.grid.at(k)))
        .sum();
    h * sum.re / PI
}

/// Spectrum of the fluctuations `<dA(tau) dB(0)>` computed from the
/// Liouvillian resolvent, without time stepping.
///
/// The constant part `<A><B>` is excluded (it would contribute a delta peak).
pub fn fluctuation_spectrum(
    model: &LindbladModel,
    rho_ss: &DensityMatrix,
    a: &Operator,
    b: &Operator,
    freqs: &UniformGrid,
) -> Result<SpectrumTrace> {
    check_inputs(model, rho_ss, a, b)?;
    let d = model.dim();
    let rho = rho_ss.matrix();
    let mean_b = (b.matrix() * rho).trace();
    let seed: CMatrix = b.matrix() * rho - rho * mean_b;
    let seed = DVector::from_column_slice(seed.as_slice());

    // s - L + |rho>><<I| is invertible on the whole space when the steady
    // state is unique, and maps traceless vectors to traceless solutions
    let mut base = -model.liouvillian();
    for col in 0..d {
        for row in 0..d * d {
            base[(row, col * (d + 1))] += rho.as_slice()[row];
        }
    }
    let a_t = a.matrix().transpose();
    let a_vec = a_t.as_slice();

    let mut values = Vec::with_capacity(freqs.len());
    for nu in freqs.points() {
        let mut m = base.clone();
        let s = Complex64::new(0.0, 2.0 * PI * nu);
        for k in 0..d * d {
            m[(k, k)] += s;
        }
        let y = m.lu().solve(&seed).ok_or_else(|| Error::Precondition(format!("resolvent is singular at {nu} MHz")))?;
        // Tr(A Y) = sum_{ij} A_ij Y_ji = <vec(A^T), vec(Y)> without conjugation
        let tr: Complex64 = a_vec.iter().zip(y.iter()).map(|(x, y)| x * y).sum();
        values.push(tr.re / PI);
    }
    SpectrumTrace::new(*freqs, values, "fluctuation spectrum")
}

fn trapezoid_weight(k: usize, n: usize) -> f64 {
    if k == 0 || k + 1 == n {
        0.5
    } else {
        1.0
    }
}

fn check_inputs(model: &LindbladModel, rho: &DensityMatrix, a: &Operator, b: &Operator) -> Result<()> {
    if rho.space() != model.space() || a.space() != model.space() || b.space() != model.space() {
        return Err(Error::Dimension("model, state and operators must share one space".into()));
    }
    Ok(())
}

fn check_decay(corr: &TimeTrace) -> Result<()> {
    if corr.grid.start() != 0.0 {
        return Err(Error::Argument("correlation must start at zero delay".into()));
    }
    let reference = corr.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if reference == 0.0 {
        return Ok(());
    }
    let end = corr.values.last().map(|z| z.norm()).unwrap_or(0.0);
    let ratio = end / reference;
    if ratio >= DECAY_TOL {
        return Err(Error::Truncation { ratio });
    }
    Ok(())
}
