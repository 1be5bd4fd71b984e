use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::hdr::HdrImage;
use crate::error::{Error, Result};

/// Sampled 1D intensity profile, positions in µm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Profile {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: (x.len(), 1),
                found: (y.len(), 1),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("profile", "positions must be strictly increasing"));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Samples whose value is finite.
    fn finite(&self) -> (Vec<f64>, Vec<f64>) {
        self.x
            .iter()
            .zip(&self.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| (*x, *y))
            .unzip()
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.x.len();
        if n == 0 {
            return f64::NAN;
        }
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= x) - 1;
        let f = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.y[i] * (1.0 - f) + self.y[i + 1] * f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row(usize),
    Column(usize),
}

pub const DEFAULT_BAND: usize = 3;

/// Row or column of `img` averaged over `band` pixels centred on it.
/// Masked pixels are skipped; a position with no valid pixel is NaN.
pub fn line_profile(img: &HdrImage, axis: Axis, band: usize) -> Result<Profile> {
    let band = band.max(1);
    let (len, across, centre) = match axis {
        Axis::Row(r) => (img.width, img.height, r),
        Axis::Column(c) => (img.height, img.width, c),
    };
    if centre >= across {
        return Err(Error::invalid("axis", format!("index {centre} outside 0..{across}")));
    }
    let lo = centre.saturating_sub((band - 1) / 2);
    let hi = (lo + band).min(across);
    let mut y = Vec::with_capacity(len);
    for i in 0..len {
        let (mut sum, mut count) = (0.0, 0usize);
        for j in lo..hi {
            let v = match axis {
                Axis::Row(_) => img.at(i, j),
                Axis::Column(_) => img.at(j, i),
            };
            if let Some(v) = v {
                sum += v;
                count += 1;
            }
        }
        y.push(if count > 0 { sum / count as f64 } else { f64::NAN });
    }
    let x = (0..len).map(|i| i as f64 * img.pixel_size).collect();
    Profile::new(x, y)
}

/// One Gaussian peak `A·exp(−2(x−c)²/w²)`; `waist` is the 1/e² intensity
/// radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub amplitude: f64,
    pub center: f64,
    pub waist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussFit {
    /// Sorted by centre.
    pub peaks: Vec<Peak>,
    pub background: f64,
    /// One-sigma uncertainties in the same layout as `peaks`.
    pub uncertainties: Vec<Peak>,
    pub background_uncertainty: f64,
    pub residual_rms: f64,
    /// Ratio of extreme singular values of the column-scaled Jacobian.
    pub condition_number: f64,
    pub ill_conditioned: bool,
    pub iterations: usize,
}

impl GaussFit {
    pub fn mean_waist(&self) -> f64 {
        self.peaks.iter().map(|p| p.waist).sum::<f64>() / self.peaks.len() as f64
    }

    /// Mean centre-to-centre distance of adjacent peaks.
    pub fn mean_pitch(&self) -> Option<f64> {
        let n = self.peaks.len();
        (n >= 2).then(|| (self.peaks[n - 1].center - self.peaks[0].center) / (n - 1) as f64)
    }

    pub fn model(&self, x: f64) -> f64 {
        self.background + self.peaks.iter().map(|p| gauss(p, x)).sum::<f64>()
    }
}

fn gauss(p: &Peak, x: f64) -> f64 {
    let d = x - p.center;
    p.amplitude * (-2.0 * d * d / (p.waist * p.waist)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative cost change that ends the iteration.
    pub tolerance: f64,
    /// Condition number above which the fit is flagged.
    pub condition_limit: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-10,
            condition_limit: 100.0,
        }
    }
}

pub fn multi_gauss_fit(profile: &Profile, n_peaks: usize, init: Option<&[Peak]>) -> Result<GaussFit> {
    multi_gauss_fit_with(profile, n_peaks, init, &FitOptions::default())
}

/// Levenberg-Marquardt fit of `n_peaks` Gaussians plus a constant.
pub fn multi_gauss_fit_with(
    profile: &Profile,
    n_peaks: usize,
    init: Option<&[Peak]>,
    opts: &FitOptions,
) -> Result<GaussFit> {
    if n_peaks == 0 {
        return Err(Error::invalid("n_peaks", "must be at least 1"));
    }
    let (x, y) = profile.finite();
    if x.len() < 4 * n_peaks {
        return Err(Error::invalid(
            "profile",
            format!("{} samples cannot constrain {n_peaks} peaks", x.len()),
        ));
    }
    let start = match init {
        Some(p) if p.len() == n_peaks => p.to_vec(),
        Some(p) => {
            return Err(Error::invalid(
                "init",
                format!("{} initial peaks for n_peaks = {n_peaks}", p.len()),
            ))
        }
        None => initial_peaks(&x, &y, n_peaks),
    };
    let background0 = percentile(&y, 0.1);
    let mut params = Vec::with_capacity(1 + 3 * n_peaks);
    params.push(background0);
    for p in &start {
        params.extend([p.amplitude - background0, p.center, p.waist]);
    }

    let m = x.len();
    let np = params.len();
    let residuals = |p: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&y)
            .map(|(&xi, &yi)| {
                let mut model = p[0];
                for k in 0..n_peaks {
                    let (a, c, w) = (p[1 + 3 * k], p[2 + 3 * k], p[3 + 3 * k]);
                    let d = xi - c;
                    model += a * (-2.0 * d * d / (w * w)).exp();
                }
                model - yi
            })
            .collect()
    };
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(m, np);
        for (i, &xi) in x.iter().enumerate() {
            j[(i, 0)] = 1.0;
            for k in 0..n_peaks {
                let (a, c, w) = (p[1 + 3 * k], p[2 + 3 * k], p[3 + 3 * k]);
                let d = xi - c;
                let e = (-2.0 * d * d / (w * w)).exp();
                j[(i, 1 + 3 * k)] = e;
                j[(i, 2 + 3 * k)] = a * e * 4.0 * d / (w * w);
                j[(i, 3 + 3 * k)] = a * e * 4.0 * d * d / (w * w * w);
            }
        }
        j
    };
    let cost_of = |r: &[f64]| 0.5 * r.iter().map(|v| v * v).sum::<f64>();

    let mut r = residuals(&params);
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = cost == 0.0;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let j = jacobian(&params);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let tr = residuals(&trial);
            let tc = cost_of(&tr);
            if tc.is_finite() && tc <= cost {
                let change = (cost - tc) / cost.max(f64::MIN_POSITIVE);
                params = trial;
                r = tr;
                cost = tc;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                converged = change < opts.tolerance || cost == 0.0;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: the iterate is a local minimum
            converged = true;
        }
    }
    if !converged {
        return Err(Error::FitFailed {
            reason: format!("no convergence after {iterations} iterations"),
            last_params: params,
        });
    }

    for k in 0..n_peaks {
        params[3 + 3 * k] = params[3 + 3 * k].abs();
    }
    let (x_lo, x_hi) = (x[0], x[m - 1]);
    for k in 0..n_peaks {
        let c = params[2 + 3 * k];
        if !(c >= x_lo && c <= x_hi) || !(params[3 + 3 * k] > 0.0) {
            return Err(Error::FitFailed {
                reason: format!("peak {k} left the data range (centre {c})"),
                last_params: params,
            });
        }
    }

    let j = jacobian(&params);
    let scales: Vec<f64> = (0..np).map(|c| j.column(c).norm().max(f64::MIN_POSITIVE)).collect();
    let scaled = DMatrix::from_fn(m, np, |i, c| j[(i, c)] / scales[c]);
    let sv = scaled.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let dof = (m - np).max(1) as f64;
    let variance = 2.0 * cost / dof;
    let jtj = j.transpose() * &j;
    let cov = jtj.clone().try_inverse().ok_or_else(|| Error::FitFailed {
        reason: "singular normal equations".into(),
        last_params: params.clone(),
    })?;
    let sigma = |i: usize| (variance * cov[(i, i)]).max(0.0).sqrt();

    let mut peaks: Vec<(Peak, Peak)> = (0..n_peaks)
        .map(|k| {
            (
                Peak {
                    amplitude: params[1 + 3 * k],
                    center: params[2 + 3 * k],
                    waist: params[3 + 3 * k],
                },
                Peak {
                    amplitude: sigma(1 + 3 * k),
                    center: sigma(2 + 3 * k),
                    waist: sigma(3 + 3 * k),
                },
            )
        })
        .collect();
    peaks.sort_by(|a, b| a.0.center.total_cmp(&b.0.center));
    let (peaks, uncertainties) = peaks.into_iter().unzip();
    Ok(GaussFit {
        peaks,
        background: params[0],
        uncertainties,
        background_uncertainty: sigma(0),
        residual_rms: (2.0 * cost / m as f64).sqrt(),
        condition_number,
        ill_conditioned: condition_number > opts.condition_limit,
        iterations,
    })
}

fn percentile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[((s.len() - 1) as f64 * q).round() as usize]
}

/// Starting peaks from the `n` tallest local maxima that are at least one
/// estimated half-width apart; missing peaks are spread over the range.
fn initial_peaks(x: &[f64], y: &[f64], n: usize) -> Vec<Peak> {
    let base = percentile(y, 0.1);
    let m = x.len();
    let mut maxima: Vec<usize> = (0..m)
        .filter(|&i| {
            let left = i == 0 || y[i] > y[i - 1];
            let right = i + 1 == m || y[i] >= y[i + 1];
            left && right
        })
        .collect();
    maxima.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    let half_width = |i: usize| {
        let half = base + 0.5 * (y[i] - base);
        let mut l = i;
        while l > 0 && y[l] > half {
            l -= 1;
        }
        let mut r = i;
        while r + 1 < m && y[r] > half {
            r += 1;
        }
        0.5 * (x[r] - x[l]).max(x[1] - x[0])
    };
    let mut chosen: Vec<(usize, f64)> = Vec::with_capacity(n);
    for i in maxima {
        if chosen.len() == n {
            break;
        }
        let hw = half_width(i);
        if chosen.iter().all(|&(j, hj)| (x[i] - x[j]).abs() >= hw.min(hj)) {
            chosen.push((i, hw));
        }
    }
    let mut peaks: Vec<Peak> = chosen
        .iter()
        .map(|&(i, hw)| Peak {
            amplitude: y[i],
            center: x[i],
            // FWHM = w·√(2 ln 2)
            waist: 2.0 * hw / (2.0 * 2f64.ln()).sqrt(),
        })
        .collect();
    let span = x[m - 1] - x[0];
    while peaks.len() < n {
        let k = peaks.len();
        peaks.push(Peak {
            amplitude: y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - base,
            center: x[0] + span * (k as f64 + 0.5) / n as f64,
            waist: span / (4.0 * n as f64),
        });
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synth(peaks: &[Peak], bg: f64, lo: f64, hi: f64, dx: f64) -> Profile {
        let n = ((hi - lo) / dx).round() as usize + 1;
        let x: Vec<f64> = (0..n).map(|i| lo + i as f64 * dx).collect();
        let y = x.iter().map(|&xi| bg + peaks.iter().map(|p| gauss(p, xi)).sum::<f64>()).collect();
        Profile::new(x, y).unwrap()
    }

    #[test]
    fn single_noiseless_gaussian_is_exact() {
        let truth = Peak { amplitude: 1.0, center: 0.0, waist: 0.67 };
        let f = multi_gauss_fit(&synth(&[truth], 0.0, -3.0, 3.0, 0.05), 1, None).unwrap();
        let p = f.peaks[0];
        assert!((p.amplitude - 1.0).abs() < 1e-6 && p.center.abs() < 1e-6 && (p.waist - 0.67).abs() < 1e-6);
        assert!(f.background.abs() < 1e-6);
    }

    #[test]
    fn eight_noisy_peaks_recover_waist_and_pitch() {
        let truth: Vec<Peak> = (0..8)
            .map(|k| Peak { amplitude: 1.0, center: (k as f64 - 3.5) * 3.95, waist: 0.67 })
            .collect();
        let clean = synth(&truth, 0.0, -18.0, 18.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let y = clean.y.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let noisy = Profile::new(clean.x.clone(), y).unwrap();
        let f = multi_gauss_fit(&noisy, 8, None).unwrap();
        assert!((f.mean_waist() - 0.67).abs() < 0.03, "{}", f.mean_waist());
        assert!((f.mean_pitch().unwrap() - 3.95).abs() < 0.02);
        assert!(!f.ill_conditioned);
    }

    #[test]
    fn overlapping_pair_is_flagged() {
        let w = 0.67;
        let apart = [
            Peak { amplitude: 1.0, center: -2.0, waist: w },
            Peak { amplitude: 0.8, center: 2.0, waist: w },
        ];
        let close = [
            Peak { amplitude: 1.0, center: -0.25 * w, waist: w },
            Peak { amplitude: 0.8, center: 0.25 * w, waist: w },
        ];
        let a = multi_gauss_fit(&synth(&apart, 0.0, -5.0, 5.0, 0.05), 2, None).unwrap();
        let init = [
            Peak { amplitude: 0.9, center: -0.3, waist: 0.6 },
            Peak { amplitude: 0.9, center: 0.3, waist: 0.6 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut noisy = synth(&close, 0.0, -5.0, 5.0, 0.05);
        noisy.y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        let b = multi_gauss_fit(&noisy, 2, Some(&init)).unwrap();
        assert!(!a.ill_conditioned);
        assert!(b.ill_conditioned, "cond {} vs {}", b.condition_number, a.condition_number);
        assert!(b.uncertainties[0].center > 10.0 * a.uncertainties[0].center.max(1e-12));
    }

    #[test]
    fn translation_shifts_centres() {
        let truth = [
            Peak { amplitude: 1.0, center: -1.3, waist: 0.7 },
            Peak { amplitude: 0.5, center: 2.1, waist: 0.9 },
        ];
        let p = synth(&truth, 0.02, -5.0, 5.0, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 0.005).unwrap();
        let y: Vec<f64> = p.y.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let a = multi_gauss_fit(&Profile::new(p.x.clone(), y.clone()).unwrap(), 2, None).unwrap();
        let shift = 0.75;
        let xs = p.x.iter().map(|x| x + shift).collect();
        let b = multi_gauss_fit(&Profile::new(xs, y).unwrap(), 2, None).unwrap();
        for (pa, pb) in a.peaks.iter().zip(&b.peaks) {
            assert!((pb.center - pa.center - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn refitting_the_model_is_a_fixed_point() {
        let truth = [
            Peak { amplitude: 1.0, center: -1.3, waist: 0.7 },
            Peak { amplitude: 0.5, center: 2.1, waist: 0.9 },
        ];
        let p = synth(&truth, 0.02, -5.0, 5.0, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let y = p.y.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let first = multi_gauss_fit(&Profile::new(p.x.clone(), y).unwrap(), 2, None).unwrap();
        let model = Profile::new(p.x.clone(), p.x.iter().map(|&x| first.model(x)).collect()).unwrap();
        let again = multi_gauss_fit(&model, 2, None).unwrap();
        for (a, b) in first.peaks.iter().zip(&again.peaks) {
            assert!((a.center - b.center).abs() < 1e-9);
            assert!((a.waist - b.waist).abs() < 1e-9);
            assert!((a.amplitude - b.amplitude).abs() < 1e-9);
        }
    }

    #[test]
    fn band_average_of_band_invariant_spot_is_its_midline() {
        let img = HdrImage::from_image(&super::super::hdr::Image::from_fn(30, 9, |c, _| {
            (-((c as f64 - 15.0) / 4.0).powi(2)).exp()
        }));
        let p = line_profile(&img, Axis::Row(4), DEFAULT_BAND).unwrap();
        for (c, v) in p.y.iter().enumerate() {
            assert!((v - img.at(c, 4).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let p = synth(&[Peak { amplitude: 1.0, center: 0.0, waist: 1.0 }], 0.0, -1.0, 1.0, 0.5);
        assert!(multi_gauss_fit(&p, 2, None).is_err());
    }
}
