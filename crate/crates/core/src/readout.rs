//! Single-shot readout statistics of the integrated readout quadrature.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::grid::UniformGrid;

/// Two-component Gaussian model of the readout quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMixture {
    pub mu_g: f64,
    pub mu_e: f64,
    pub sigma_g: f64,
    pub sigma_e: f64,
    /// Weight of the excited component.
    pub w_e: f64,
}

impl GaussianMixture {
    pub fn new(mu_g: f64, mu_e: f64, sigma: f64, w_e: f64) -> Result<Self> {
        Self::with_widths(mu_g, mu_e, sigma, sigma, w_e)
    }

    pub fn with_widths(mu_g: f64, mu_e: f64, sigma_g: f64, sigma_e: f64, w_e: f64) -> Result<Self> {
        let mix = Self { mu_g, mu_e, sigma_g, sigma_e, w_e };
        mix.validate()?;
        Ok(mix)
    }

    /// Mixture with `mu_g = 0`, `sigma = 1` and the given separation.
    pub fn from_snr(snr: f64, w_e: f64) -> Result<Self> {
        Self::new(0.0, snr, 1.0, w_e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_g > 0.0 && self.sigma_e > 0.0) {
            return Err(Error::Argument(format!("widths must be positive, got {} and {}", self.sigma_g, self.sigma_e)));
        }
        if self.mu_g == self.mu_e {
            return Err(Error::Argument("component means coincide".into()));
        }
        if !(0.0..=1.0).contains(&self.w_e) {
            return Err(Error::Argument(format!("excited weight {} outside [0, 1]", self.w_e)));
        }
        Ok(())
    }

    pub fn separation(&self) -> f64 {
        (self.mu_e - self.mu_g).abs()
    }

    /// Root-mean-square width of the two components.
    pub fn sigma(&self) -> f64 {
        (0.5 * (self.sigma_g.powi(2) + self.sigma_e.powi(2))).sqrt()
    }

    pub fn snr(&self) -> f64 {
        self.separation() / self.sigma()
    }

    pub fn with_weight(&self, w_e: f64) -> Self {
        Self { w_e, ..*self }
    }

    /// Probability mass in `[lo, hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let g = normal_cdf((hi - self.mu_g) / self.sigma_g) - normal_cdf((lo - self.mu_g) / self.sigma_g);
        let e = normal_cdf((hi - self.mu_e) / self.sigma_e) - normal_cdf((lo - self.mu_e) / self.sigma_e);
        (1.0 - self.w_e) * g + self.w_e * e
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Values above the threshold are assigned `e`.
    ExcitedAbove,
    ExcitedBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub q_star: f64,
    pub orientation: Orientation,
}

impl Threshold {
    pub fn new(q_star: f64, orientation: Orientation) -> Result<Self> {
        if !q_star.is_finite() {
            return Err(Error::Argument("threshold must be finite".into()));
        }
        Ok(Self { q_star, orientation })
    }

    fn orientation_of(mix: &GaussianMixture) -> Orientation {
        if mix.mu_e > mix.mu_g {
            Orientation::ExcitedAbove
        } else {
            Orientation::ExcitedBelow
        }
    }

    pub fn midpoint(mix: &GaussianMixture) -> Self {
        Self { q_star: 0.5 * (mix.mu_g + mix.mu_e), orientation: Self::orientation_of(mix) }
    }

    /// Threshold `n_sigma` ground-state widths from `mu_g`, towards `mu_e`.
    pub fn conservative(mix: &GaussianMixture, n_sigma: f64) -> Self {
        let orientation = Self::orientation_of(mix);
        let sign = if orientation == Orientation::ExcitedAbove { 1.0 } else { -1.0 };
        Self { q_star: mix.mu_g + sign * n_sigma * mix.sigma_g, orientation }
    }

    pub fn is_excited(&self, q: f64) -> bool {
        match self.orientation {
            Orientation::ExcitedAbove => q > self.q_star,
            Orientation::ExcitedBelow => q < self.q_star,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    pub values: Vec<f64>,
    pub label: String,
    pub seed: u64,
}

impl ShotSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Draws `n` shots, each from the excited component with probability `p_e`.
pub fn sample_shots(mix: &GaussianMixture, p_e: f64, n: usize, seed: u64, label: &str) -> Result<ShotSet> {
    if n == 0 {
        return Err(Error::Argument("at least one shot is required".into()));
    }
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::Argument(format!("p_e = {p_e} outside [0, 1]")));
    }
    let g = Normal::new(mix.mu_g, mix.sigma_g).map_err(|e| Error::Argument(e.to_string()))?;
    let e = Normal::new(mix.mu_e, mix.sigma_e).map_err(|e| Error::Argument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| {
            let excited = rng.random::<f64>() < p_e;
            if excited {
                e.sample(&mut rng)
            } else {
                g.sample(&mut rng)
            }
        })
        .collect();
    Ok(ShotSet { values, label: label.to_string(), seed })
}

/// Fraction of shots assigned to `e`; zero for an empty set.
pub fn assign(shots: &ShotSet, thr: &Threshold) -> f64 {
    if shots.is_empty() {
        return 0.0;
    }
    shots.values.iter().filter(|&&q| thr.is_excited(q)).count() as f64 / shots.len() as f64
}

/// Keeps the shots assigned to `g`; returns them with the discarded fraction.
pub fn preselect(shots: &ShotSet, thr: &Threshold) -> (ShotSet, f64) {
    let values: Vec<f64> = shots.values.iter().copied().filter(|&q| !thr.is_excited(q)).collect();
    let discard = if shots.is_empty() { 0.0 } else { 1.0 - values.len() as f64 / shots.len() as f64 };
    (ShotSet { values, label: format!("{} (preselected)", shots.label), seed: shots.seed }, discard)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Bin centres.
    pub centers: UniformGrid,
    pub counts: Vec<u64>,
}

pub const DEFAULT_BINS: usize = 101;

impl Histogram {
    /// `bins` uniform bins spanning the sample mean ± 6 standard deviations.
    pub fn from_shots(shots: &ShotSet, bins: usize) -> Result<Self> {
        let n = shots.len() as f64;
        if shots.len() < 2 {
            return Err(Error::Argument("a histogram needs at least two shots".into()));
        }
        let mean = shots.values.iter().sum::<f64>() / n;
        let std = (shots.values.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if std == 0.0 {
            return Err(Error::Argument("all shots are identical".into()));
        }
        Self::from_range(&shots.values, mean - 6.0 * std, mean + 6.0 * std, bins)
    }

    /// Values outside `[lo, hi)` are dropped.
    pub fn from_range(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::Argument(format!("invalid binning [{lo}, {hi}) with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &q in values {
            let k = ((q - lo) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            }
        }
        Ok(Self { centers: UniformGrid::new(lo + 0.5 * width, width, bins)?, counts })
    }

    pub fn width(&self) -> f64 {
        self.centers.step()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let c = self.centers.at(k);
        (c - 0.5 * self.width(), c + 0.5 * self.width())
    }
}

/// Whether the fit shares one width between the components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WidthModel {
    #[default]
    Shared,
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureFit {
    pub mixture: GaussianMixture,
    /// Standard errors of `mu_g`, `mu_e`, `sigma_g`, `sigma_e`, `w_e`. For a
    /// shared width both sigma entries hold the same value.
    pub std_errors: [f64; 5],
    /// Pearson chi-square of the fitted counts.
    pub rss: f64,
    pub iterations: usize,
}

pub fn fit_double_gaussian(hist: &Histogram) -> Result<MixtureFit> {
    fit_double_gaussian_with(hist, WidthModel::Shared)
}

/// Least-squares fit of the bin-integrated mixture to a histogram.
///
/// The lower-mean component is labelled `g`.
pub fn fit_double_gaussian_with(hist: &Histogram, widths: WidthModel) -> Result<MixtureFit> {
    let bins = hist.counts.len();
    let total = hist.total();
    if bins < 20 || total < 100 {
        return Err(Error::Argument(format!("need at least 20 bins and 100 counts, got {bins} and {total}")));
    }
    let n = total as f64;
    let edges: Vec<(f64, f64)> = (0..bins).map(|k| hist.edges(k)).collect();
    let counts: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();

    let unpack = |p: &[f64]| -> Option<GaussianMixture> {
        let (sg, se, w) = match widths {
            WidthModel::Shared => (p[2], p[2], p[3]),
            WidthModel::Separate => (p[2], p[3], p[4]),
        };
        (sg > 0.0 && se > 0.0).then_some(GaussianMixture { mu_g: p[0], mu_e: p[1], sigma_g: sg, sigma_e: se, w_e: w })
    };
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let mix = unpack(p).ok_or_else(|| Error::Argument("non-positive width".into()))?;
        Ok(edges
            .iter()
            .zip(&counts)
            .map(|(&(lo, hi), &c)| {
                let m = n * mix.mass(lo, hi);
                (c - m) / m.max(1.0).sqrt()
            })
            .collect())
    };

    let guess = initial_guess(hist);
    let x0: Vec<f64> = match widths {
        WidthModel::Shared => vec![guess.mu_g, guess.mu_e, guess.sigma_g, guess.w_e],
        WidthModel::Separate => vec![guess.mu_g, guess.mu_e, guess.sigma_g, guess.sigma_e, guess.w_e],
    };
    let opts = LmOptions { scale_covariance: false, ..Default::default() };
    let fit = levenberg_marquardt(residuals, &x0, &opts)?;
    let mut mix = unpack(&fit.params).ok_or(Error::Fit { iterations: fit.iterations, rss: fit.rss })?;
    let se = &fit.std_errors;
    let mut errors = match widths {
        WidthModel::Shared => [se[0], se[1], se[2], se[2], se[3]],
        WidthModel::Separate => [se[0], se[1], se[2], se[3], se[4]],
    };
    if mix.mu_e < mix.mu_g {
        mix = GaussianMixture {
            mu_g: mix.mu_e,
            mu_e: mix.mu_g,
            sigma_g: mix.sigma_e,
            sigma_e: mix.sigma_g,
            w_e: 1.0 - mix.w_e,
        };
        errors = [errors[1], errors[0], errors[3], errors[2], errors[4]];
    }
    mix.w_e = mix.w_e.clamp(0.0, 1.0);
    mix.validate().map_err(|_| Error::Fit { iterations: fit.iterations, rss: fit.rss })?;
    Ok(MixtureFit { mixture: mix, std_errors: errors, rss: fit.rss, iterations: fit.iterations })
}

/// Starting point from the dominant peak and the mass left outside it.
fn initial_guess(hist: &Histogram) -> GaussianMixture {
    let counts = &hist.counts;
    let n = hist.total() as f64;
    let (peak, &peak_count) = counts.iter().enumerate().max_by_key(|(_, &c)| c).unwrap_or((0, &0));
    let mu_a = hist.centers.at(peak);

    // half width at half maximum of the dominant peak
    let half = peak_count as f64 / 2.0;
    let walk = |dir: isize| {
        let mut k = peak as isize;
        while k + dir >= 0 && ((k + dir) as usize) < counts.len() && counts[(k + dir) as usize] as f64 > half {
            k += dir;
        }
        (k - peak as isize).unsigned_abs() as f64 + 0.5
    };
    let hwhm = 0.5 * (walk(-1) + walk(1)) * hist.width();
    let sigma = (hwhm / (2.0 * 2f64.ln()).sqrt()).max(hist.width());

    let (mut mass, mut moment) = (0.0, 0.0);
    for (k, &c) in counts.iter().enumerate() {
        let q = hist.centers.at(k);
        if (q - mu_a).abs() > 3.0 * sigma {
            mass += c as f64;
            moment += c as f64 * q;
        }
    }
    let w_other = mass / n;
    if w_other < 0.01 {
        return GaussianMixture { mu_g: mu_a, mu_e: mu_a + 6.0 * sigma, sigma_g: sigma, sigma_e: sigma, w_e: 0.0 };
    }
    let mu_b = moment / mass;
    if mu_b > mu_a {
        GaussianMixture { mu_g: mu_a, mu_e: mu_b, sigma_g: sigma, sigma_e: sigma, w_e: w_other }
    } else {
        GaussianMixture { mu_g: mu_b, mu_e: mu_a, sigma_g: sigma, sigma_e: sigma, w_e: 1.0 - w_other }
    }
}

/// Misassignment probability at the midpoint threshold for equal weights.
pub fn overlap_error(mix: &GaussianMixture) -> f64 {
    let d = mix.separation();
    let tail = |s: f64| 0.5 * erfc(d / (2.0 * SQRT_2 * s));
    0.5 * (tail(mix.sigma_g) + tail(mix.sigma_e))
}

/// `1 - P(g|e) - P(e|g)`.
pub fn assignment_fidelity(eps_ge: f64, eps_eg: f64) -> Result<f64> {
    for eps in [eps_ge, eps_eg] {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Argument(format!("error probability {eps} outside [0, 1]")));
        }
    }
    Ok(1.0 - eps_ge - eps_eg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn pure_components_have_the_right_mean() {
        let mix = GaussianMixture::new(0.0, 6.0, 1.0, 0.5).unwrap();
        let n = 100_000;
        let g = sample_shots(&mix, 0.0, n, 1, "g").unwrap();
        let e = sample_shots(&mix, 1.0, n, 2, "e").unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        assert!(mean(&g.values).abs() < tol);
        assert!((mean(&e.values) - 6.0).abs() < tol);
    }

    #[test]
    fn balanced_mixture_splits_evenly() {
        let mix = GaussianMixture::new(0.0, 6.0, 1.0, 0.5).unwrap();
        let n = 12_500;
        let shots = sample_shots(&mix, 0.5, n, 7, "half").unwrap();
        let f = assign(&shots, &Threshold::midpoint(&mix));
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn zero_shots_rejected() {
        let mix = GaussianMixture::from_snr(5.75, 0.0).unwrap();
        assert!(sample_shots(&mix, 0.5, 0, 0, "").is_err());
    }

    #[test]
    fn assignment_limits() {
        let shots = ShotSet { values: vec![-1.0, -2.0, 0.5], label: "x".into(), seed: 0 };
        let thr = Threshold::new(1.0, Orientation::ExcitedAbove).unwrap();
        assert_eq!(assign(&shots, &thr), 0.0);
        let flipped = Threshold::new(1.0, Orientation::ExcitedBelow).unwrap();
        assert_eq!(assign(&shots, &flipped), 1.0);
    }

    #[test]
    fn misassignment_at_reference_snr() {
        let mix = GaussianMixture::from_snr(5.75, 0.5).unwrap();
        let n = 12_500;
        let g = sample_shots(&mix, 0.0, n, 11, "g").unwrap();
        let e = sample_shots(&mix, 1.0, n, 12, "e").unwrap();
        let thr = Threshold::midpoint(&mix);
        let err = 0.5 * (assign(&g, &thr) + 1.0 - assign(&e, &thr));
        assert!(err <= 0.002 + 3.0 * (0.002 / (2.0 * n as f64)).sqrt(), "{err}");
    }

    #[test]
    fn preselection_discards_thermal_population() {
        let mix = GaussianMixture::from_snr(5.75, 0.0).unwrap();
        let n = 12_500;
        let shots = sample_shots(&mix, 0.06, n, 5, "thermal").unwrap();
        let thr = Threshold::conservative(&mix, 3.0);
        let (kept, discard) = preselect(&shots, &thr);
        assert!((discard - 0.06).abs() < 3.0 * (0.06 * 0.94 / n as f64).sqrt(), "{discard}");
        assert!(kept.values.iter().all(|&q| !thr.is_excited(q)));
        assert_eq!(kept.len() + (discard * n as f64).round() as usize, n);

        let cold = sample_shots(&mix, 0.0, n, 6, "cold").unwrap();
        assert!(preselect(&cold, &thr).1 < 0.002);

        let empty = ShotSet { values: vec![], label: String::new(), seed: 0 };
        let (kept, discard) = preselect(&empty, &thr);
        assert!(kept.is_empty());
        assert_eq!(discard, 0.0);
    }

    #[test]
    fn histogram_spans_six_sigma() {
        let mix = GaussianMixture::from_snr(6.0, 0.0).unwrap();
        let shots = sample_shots(&mix, 0.0, 12_500, 3, "g").unwrap();
        let h = Histogram::from_shots(&shots, DEFAULT_BINS).unwrap();
        assert_eq!(h.counts.len(), 101);
        assert!((h.total() as i64 - 12_500).abs() <= 2);
        assert!((h.width() * 101.0 / 12.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_recovers_balanced_mixture() {
        let mix = GaussianMixture::new(0.0, 6.0, 1.0, 0.5).unwrap();
        let shots = sample_shots(&mix, 0.5, 12_500, 42, "mix").unwrap();
        let fit = fit_double_gaussian(&Histogram::from_shots(&shots, DEFAULT_BINS).unwrap()).unwrap();
        let m = fit.mixture;
        let truth = [0.0, 6.0, 1.0, 1.0, 0.5];
        let got = [m.mu_g, m.mu_e, m.sigma_g, m.sigma_e, m.w_e];
        for k in 0..5 {
            assert!((got[k] - truth[k]).abs() < 3.0 * fit.std_errors[k], "{k}: {} ± {}", got[k], fit.std_errors[k]);
        }
    }

    #[test]
    fn fit_single_component() {
        let mix = GaussianMixture::from_snr(6.0, 0.0).unwrap();
        let shots = sample_shots(&mix, 0.0, 12_500, 9, "g").unwrap();
        let fit = fit_double_gaussian(&Histogram::from_shots(&shots, DEFAULT_BINS).unwrap()).unwrap();
        assert!(fit.mixture.w_e < 0.01, "{}", fit.mixture.w_e);
        assert!(fit.mixture.mu_g.abs() < 0.05);
    }

    #[test]
    fn fit_protocol_weight() {
        let w = 0.624;
        let n = 12_500;
        let mix = GaussianMixture::from_snr(5.75, w).unwrap();
        let shots = sample_shots(&mix, w, n, 21, "theta=pi").unwrap();
        let fit = fit_double_gaussian(&Histogram::from_shots(&shots, DEFAULT_BINS).unwrap()).unwrap();
        assert!((fit.mixture.w_e - w).abs() < 3.0 * (w * (1.0 - w) / n as f64).sqrt());
    }

    #[test]
    fn fit_separate_widths() {
        let mix = GaussianMixture::with_widths(0.0, 6.0, 1.0, 1.3, 0.4).unwrap();
        let shots = sample_shots(&mix, 0.4, 50_000, 4, "wide").unwrap();
        let h = Histogram::from_shots(&shots, DEFAULT_BINS).unwrap();
        let fit = fit_double_gaussian_with(&h, WidthModel::Separate).unwrap();
        assert!((fit.mixture.sigma_e - 1.3).abs() < 3.0 * fit.std_errors[3]);
        assert!((fit.mixture.sigma_g - 1.0).abs() < 3.0 * fit.std_errors[2]);
    }

    #[test]
    fn fit_preconditions() {
        let h = Histogram::from_range(&[0.0; 50], -1.0, 1.0, 30).unwrap();
        assert!(fit_double_gaussian(&h).is_err());
        let h = Histogram::from_range(&[0.0; 500], -1.0, 1.0, 10).unwrap();
        assert!(fit_double_gaussian(&h).is_err());
    }

    #[test]
    fn overlap_error_values() {
        let at = |snr: f64| overlap_error(&GaussianMixture::from_snr(snr, 0.5).unwrap());
        assert!((at(5.75) - 2.0e-3).abs() < 0.1 * 2.0e-3);
        assert!(at(20.0) < 1e-20);
        let same = GaussianMixture { mu_g: 0.0, mu_e: 0.0, sigma_g: 1.0, sigma_e: 1.0, w_e: 0.5 };
        assert_eq!(overlap_error(&same), 0.5);
    }

    #[test]
    fn assignment_fidelity_values() {
        assert!((assignment_fidelity(0.063, 0.022).unwrap() - 0.915).abs() < 1e-12);
        assert_eq!(assignment_fidelity(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(assignment_fidelity(0.5, 0.5).unwrap(), 0.0);
        assert!(assignment_fidelity(1.5, 0.0).is_err());
    }

    #[test]
    fn mixture_invariants() {
        assert!(GaussianMixture::new(0.0, 1.0, 0.0, 0.5).is_err());
        assert!(GaussianMixture::new(1.0, 1.0, 1.0, 0.5).is_err());
        assert!(GaussianMixture::new(0.0, 1.0, 1.0, 1.5).is_err());
    }
}
