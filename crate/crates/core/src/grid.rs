//! Uniform sampling grids and the traces sampled on them.
//!
//! Time axes are in microseconds, frequency axes in MHz.

use num_complex::Complex64;

use crate::error::{Error, Result};

const UNIFORM_REL_TOL: f64 = 1e-12;

/// A strictly increasing, uniformly spaced grid `start + k * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl UniformGrid {
    /// Grid of `len` points starting at `start` spaced by `step`.
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Argument("grid must contain at least one point".into()));
        }
        if !start.is_finite() || !step.is_finite() || (len > 1 && step <= 0.0) {
            return Err(Error::Argument(format!("grid step must be positive and finite (start {start}, step {step})")));
        }
        Ok(Self { start, step, len })
    }

    /// `len` points evenly covering `[start, stop]`, both ends included.
    pub fn linspace(start: f64, stop: f64, len: usize) -> Result<Self> {
        if len == 1 {
            return Self::new(start, 1.0, 1);
        }
        if len == 0 || stop <= start {
            return Err(Error::Argument(format!(
                "linspace needs stop > start and at least one point (got [{start}, {stop}], {len})"
            )));
        }
        Self::new(start, (stop - start) / (len - 1) as f64, len)
    }

    /// Validates an explicit list of sample positions and returns the grid it describes.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        match points {
            [] => Err(Error::Argument("grid must contain at least one point".into())),
            [x] => Self::new(*x, 1.0, 1),
            _ => {
                let n = points.len();
                let step = (points[n - 1] - points[0]) / (n - 1) as f64;
                let scale = points[0].abs().max(points[n - 1].abs()).max(step.abs());
                for (k, &x) in points.iter().enumerate() {
                    let expected = points[0] + k as f64 * step;
                    if (x - expected).abs() > UNIFORM_REL_TOL * scale * n as f64 {
                        return Err(Error::Argument(format!("grid is not uniform at index {k} ({x} vs {expected})")));
                    }
                }
                Self::new(points[0], step, n)
            }
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stop(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.at(k)).collect()
    }

    /// True when both grids sample the same positions.
    pub fn matches(&self, other: &UniformGrid) -> bool {
        let tol = 1e-12 * self.start.abs().max(self.stop().abs()).max(self.step);
        self.len == other.len && (self.start - other.start).abs() <= tol && (self.step - other.step).abs() <= tol
    }
}

/// Complex samples on a time grid (microseconds).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub grid: UniformGrid,
    pub values: Vec<Complex64>,
    pub label: String,
}

impl TimeTrace {
    pub fn new(grid: UniformGrid, values: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} samples for a grid of {} points", values.len(), grid.len())));
        }
        Ok(Self { grid, values, label: label.into() })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: UniformGrid, label: impl Into<String>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values, label: label.into() }
    }

    /// Trapezoidal integral of `|values|^2` over the grid.
    pub fn energy(&self) -> f64 {
        trapezoid(self.grid.step(), self.values.iter().map(|z| z.norm_sqr()))
    }
}

/// Real samples on a frequency grid (MHz).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub label: String,
}

impl SpectrumTrace {
    pub fn new(grid: UniformGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} samples for a grid of {} points", values.len(), grid.len())));
        }
        Ok(Self { grid, values, label: label.into() })
    }

    /// Trapezoidal integral over the MHz axis.
    pub fn integral(&self) -> f64 {
        trapezoid(self.grid.step(), self.values.iter().copied())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Positions (MHz) of strict interior local maxima, with their values.
    pub fn local_maxima(&self) -> Vec<(f64, f64)> {
        self.values
            .windows(3)
            .enumerate()
            .filter(|(_, w)| w[1] > w[0] && w[1] >= w[2])
            .map(|(k, w)| (self.grid.at(k + 1), w[1]))
            .collect()
    }
}

pub(crate) fn trapezoid(step: f64, values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    match first {
        None => 0.0,
        Some(f) => step * (sum - 0.5 * (f + last)),
    }
}
