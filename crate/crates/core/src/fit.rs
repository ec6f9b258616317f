//! Least-squares fitting: a damped Gauss–Newton (Levenberg–Marquardt)
//! solver with a finite-difference Jacobian, and straight-line regression.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative reduction of the residual sum of squares treated as converged.
    pub ftol: f64,
    /// Relative parameter step treated as converged.
    pub xtol: f64,
    pub initial_lambda: f64,
    /// Scale the covariance by `rss / dof`. Disable when residuals are
    /// already normalised by their standard deviations.
    pub scale_covariance: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, ftol: 1e-12, xtol: 1e-10, initial_lambda: 1e-3, scale_covariance: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub rss: f64,
    pub dof: usize,
    pub iterations: usize,
}

/// Minimises `sum r_i(x)^2` starting from `x0`.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], opts: &LmOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = DVector::from_vec(residuals(&x)?);
    let m = r.len();
    if m < n {
        return Err(Error::Argument(format!("{m} residuals cannot constrain {n} parameters")));
    }
    let mut rss = r.norm_squared();
    let mut lambda = opts.initial_lambda;

    for iteration in 1..=opts.max_iterations {
        let jac = jacobian(&residuals, &x, &r)?;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;

        let mut accepted = None;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = match residuals(&trial) {
                Ok(v) if v.iter().all(|z| z.is_finite()) => DVector::from_vec(v),
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let rss_trial = r_trial.norm_squared();
            if rss_trial <= rss {
                accepted = Some((trial, r_trial, rss_trial, step));
                break;
            }
            lambda *= 10.0;
        }

        let Some((trial, r_trial, rss_trial, step)) = accepted else {
            // no downhill step at any damping: stationary point
            return finish(&residuals, x, r, rss, iteration, opts.scale_covariance);
        };
        let rel_f = (rss - rss_trial) / rss.max(f64::MIN_POSITIVE);
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_x = step.norm() / (x_norm + opts.xtol);
        x = trial;
        r = r_trial;
        rss = rss_trial;
        lambda = (lambda / 10.0).max(1e-12);
        if rel_f < opts.ftol || rel_x < opts.xtol || rss == 0.0 {
            return finish(&residuals, x, r, rss, iteration, opts.scale_covariance);
        }
    }
    Err(Error::Fit { iterations: opts.max_iterations, rss })
}

fn jacobian<F>(residuals: &F, x: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1e-3);
        probe[k] = x[k] + h;
        let up = residuals(&probe)?;
        probe[k] = x[k] - h;
        let down = residuals(&probe)?;
        probe[k] = x[k];
        for i in 0..r0.len() {
            jac[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn finish<F>(
    residuals: &F,
    x: Vec<f64>,
    r: DVector<f64>,
    rss: f64,
    iterations: usize,
    scaled: bool,
) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let jac = jacobian(residuals, &x, &r)?;
    let dof = r.len().saturating_sub(x.len()).max(1);
    let jtj = jac.transpose() * &jac;
    let eps = 1e-14 * jtj.amax();
    let covariance = jtj.pseudo_inverse(eps).map_err(|_| Error::Fit { iterations, rss })?
        * if scaled { rss / dof as f64 } else { 1.0 };
    let std_errors = (0..x.len()).map(|k| covariance[(k, k)].max(0.0).sqrt()).collect();
    Ok(FitResult { params: x, std_errors, covariance, rss, dof, iterations })
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub rss: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} abscissae vs {} ordinates", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Argument(format!("a line fit needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= (1e-12 * scale).powi(2) * nf {
        return Err(Error::Argument("all abscissae are equal; slope is undetermined".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Ok(LineFit {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exponential_round_trip() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp() + 0.2).collect();
        let fit = levenberg_marquardt(
            |p| Ok(t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y).collect()),
            &[1.0, 0.5, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        for (got, want) in fit.params.iter().zip([2.5, 1.3, 0.2]) {
            assert!((got - want).abs() < 1e-7, "{got} vs {want}");
        }
        assert!(fit.rss < 1e-18);
    }

    #[test]
    fn rosenbrock_minimum() {
        let fit = levenberg_marquardt(
            |p| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]),
            &[-1.2, 1.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert!((fit.params[0] - 1.0).abs() < 1e-6 && (fit.params[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn standard_errors_match_linear_theory() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..40).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 0.7 * x - 3.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let line = linear_fit(&x, &y).unwrap();
        let lm = levenberg_marquardt(
            |p| Ok(x.iter().zip(&y).map(|(x, y)| p[0] * x + p[1] - y).collect()),
            &[0.0, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert!((lm.params[0] - line.slope).abs() < 1e-8);
        assert!((lm.std_errors[0] - line.slope_se).abs() < 1e-6 * line.slope_se);
        assert!((lm.std_errors[1] - line.intercept_se).abs() < 1e-6 * line.intercept_se);
    }

    #[test]
    fn too_few_residuals() {
        let err = levenberg_marquardt(|_| Ok(vec![0.0]), &[1.0, 2.0], &LmOptions::default());
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn iteration_budget_reports_fit_error() {
        let opts = LmOptions { max_iterations: 1, ftol: 0.0, xtol: 0.0, ..Default::default() };
        let err = levenberg_marquardt(|p| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]), &[-1.2, 1.0], &opts);
        assert!(matches!(err, Err(Error::Fit { iterations: 1, .. })));
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|x| -4.8 * x + 6475.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 4.8).abs() < 1e-12);
        assert!((f.intercept - 6475.0).abs() < 1e-9);
    }

    #[test]
    fn line_fit_rejects_degenerate_abscissae() {
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
