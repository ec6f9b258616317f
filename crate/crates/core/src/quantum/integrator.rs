//! Dormand–Prince 5(4) embedded Runge–Kutta pair with adaptive step size,
//! specialised to complex matrix-valued states.

use num_complex::Complex64;

use super::space::CMatrix;
use crate::error::{Error, Result};
use crate::grid::UniformGrid;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_steps: 10_000_000 }
    }
}

/// Adaptive explicit integrator for `dy/dt = f(t, y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dopri5 {
    pub tol: Tolerances,
}

/// Per-run statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol }
    }

    /// Integrates from `grid.start()` and returns the state at every grid point.
    pub fn integrate<F>(&self, f: F, y0: &CMatrix, grid: &UniformGrid) -> Result<(Vec<CMatrix>, Stats)>
    where
        F: Fn(f64, &CMatrix) -> CMatrix,
    {
        let mut stats = Stats::default();
        let mut out = Vec::with_capacity(grid.len());
        out.push(y0.clone());
        if grid.len() == 1 {
            return Ok((out, stats));
        }

        let mut t = grid.start();
        let mut y = y0.clone();
        let mut k1 = f(t, &y);
        stats.evaluations += 1;
        let mut h = self.initial_step(&y, &k1, grid.step());

        for k in 1..grid.len() {
            let t_end = grid.at(k);
            while t < t_end {
                if stats.accepted + stats.rejected >= self.tol.max_steps {
                    return Err(Error::Integration { time: t, reason: "step budget exhausted".into() });
                }
                let remaining = t_end - t;
                let last = h >= remaining * (1.0 - 1e-12);
                let h_try = if last { remaining } else { h };
                if h_try <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Integration { time: t, reason: format!("step size underflow ({h_try:.3e})") });
                }

                let (y_new, k7, err) = self.step(&f, t, &y, &k1, h_try);
                stats.evaluations += 6;
                if !err.is_finite() {
                    return Err(Error::Integration { time: t, reason: "non-finite state".into() });
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if err <= 1.0 {
                    stats.accepted += 1;
                    t = if last { t_end } else { t + h_try };
                    y = y_new;
                    k1 = k7;
                    // do not let the clipped final step shrink the next proposal
                    if !last || h_try * factor > h {
                        h = h_try * factor;
                    }
                } else {
                    stats.rejected += 1;
                    h = h_try * factor.min(1.0);
                }
            }
            out.push(y.clone());
        }
        Ok((out, stats))
    }

    fn step<F>(&self, f: &F, t: f64, y: &CMatrix, k1: &CMatrix, h: f64) -> (CMatrix, CMatrix, f64)
    where
        F: Fn(f64, &CMatrix) -> CMatrix,
    {
        let c = |x: f64| Complex64::new(x * h, 0.0);
        let k2 = f(t + C2 * h, &(y + k1 * c(A21)));
        let k3 = f(t + C3 * h, &(y + k1 * c(A31) + &k2 * c(A32)));
        let k4 = f(t + C4 * h, &(y + k1 * c(A41) + &k2 * c(A42) + &k3 * c(A43)));
        let k5 = f(t + C5 * h, &(y + k1 * c(A51) + &k2 * c(A52) + &k3 * c(A53) + &k4 * c(A54)));
        let k6 = f(t + h, &(y + k1 * c(A61) + &k2 * c(A62) + &k3 * c(A63) + &k4 * c(A64) + &k5 * c(A65)));
        let y_new = y + k1 * c(A71) + &k3 * c(A73) + &k4 * c(A74) + &k5 * c(A75) + &k6 * c(A76);
        let k7 = f(t + h, &y_new);
        let err_vec = k1 * c(E1) + &k3 * c(E3) + &k4 * c(E4) + &k5 * c(E5) + &k6 * c(E6) + &k7 * c(E7);

        let n = err_vec.len() as f64;
        let sum: f64 = err_vec
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| {
                let sc = self.tol.atol + self.tol.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (y_new, k7, (sum / n).sqrt())
    }

    fn initial_step(&self, y: &CMatrix, f0: &CMatrix, span: f64) -> f64 {
        let scaled = |m: &CMatrix| {
            let n = m.len() as f64;
            (m.iter()
                .zip(y.iter())
                .map(|(v, yy)| (v.norm() / (self.tol.atol + self.tol.rtol * yy.norm())).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = scaled(y);
        let d1 = scaled(f0);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, Complex64::new(x, 0.0))
    }

    #[test]
    fn exponential_decay() {
        let grid = UniformGrid::linspace(0.0, 2.0, 21).unwrap();
        let (ys, stats) =
            Dopri5::default().integrate(|_, y| -y * Complex64::new(3.0, 0.0), &scalar(1.0), &grid).unwrap();
        for (k, y) in ys.iter().enumerate() {
            let exact = (-3.0 * grid.at(k)).exp();
            assert!((y[(0, 0)].re - exact).abs() < 1e-10, "t={} {} vs {}", grid.at(k), y[(0, 0)].re, exact);
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        // y' = i w y -> e^{i w t}
        let w = 7.0;
        let grid = UniformGrid::linspace(0.0, 3.0, 301).unwrap();
        let (ys, _) = Dopri5::default().integrate(|_, y| y * Complex64::new(0.0, w), &scalar(1.0), &grid).unwrap();
        let last = ys.last().unwrap()[(0, 0)];
        let exact = Complex64::new(0.0, w * 3.0).exp();
        assert!((last - exact).norm() < 1e-8);
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = 2t -> t^2
        let grid = UniformGrid::linspace(0.0, 1.5, 4).unwrap();
        let (ys, _) = Dopri5::default().integrate(|t, _| scalar(2.0 * t), &scalar(0.0), &grid).unwrap();
        assert!((ys[3][(0, 0)].re - 2.25).abs() < 1e-12);
    }

    #[test]
    fn step_budget_reports_time() {
        let grid = UniformGrid::linspace(0.0, 1.0, 2).unwrap();
        let tol = Tolerances { max_steps: 3, ..Default::default() };
        let err = Dopri5::new(tol).integrate(|_, y| y * Complex64::new(0.0, 500.0), &scalar(1.0), &grid).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }
}
