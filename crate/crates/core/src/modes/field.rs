use num_complex::Complex64;
use serde::Serialize;

use crate::chip::Grid2;

/// Sampled transverse field of a guided mode.
///
/// 1D modes use a grid with `ny == 1`; their norm integrates over `x` only.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub grid: Grid2,
    pub amplitude: Vec<Complex64>,
    pub n_eff: f64,
    /// Vacuum wavelength, µm.
    pub wavelength: f64,
}

/// One-line description of a mode for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeSummary {
    pub n_eff: f64,
    pub mfd_x_um: f64,
    pub mfd_y_um: Option<f64>,
    pub wavelength_um: f64,
}

impl ModeField {
    pub fn is_1d(&self) -> bool {
        self.grid.ny == 1
    }

    fn cell(&self) -> f64 {
        if self.is_1d() {
            self.grid.dx
        } else {
            self.grid.cell_area()
        }
    }

    /// A field sampled from `f(x, y)` on `grid`, scaled to unit norm.
    pub fn from_fn(grid: Grid2, wavelength: f64, n_eff: f64, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut amplitude = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny {
            let y = if grid.ny == 1 { 0.0 } else { grid.y(iy) };
            for ix in 0..grid.nx {
                amplitude.push(f(grid.x(ix), y));
            }
        }
        let mut m = Self {
            grid,
            amplitude,
            n_eff,
            wavelength,
        };
        m.normalize();
        m
    }

    /// Gaussian field with 1/e² intensity radius `w` (1D when `grid.ny == 1`).
    pub fn gaussian(grid: Grid2, wavelength: f64, w: f64) -> Self {
        Self::from_fn(grid, wavelength, f64::NAN, |x, y| {
            Complex64::new((-(x * x + y * y) / (w * w)).exp(), 0.0)
        })
    }

    pub fn norm(&self) -> f64 {
        (self.amplitude.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.cell()).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitude.iter_mut().for_each(|c| *c /= n);
        }
    }

    /// `⟨self, other⟩` on a shared grid.
    pub fn inner(&self, other: &ModeField) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        self.amplitude
            .iter()
            .zip(&other.amplitude)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.cell()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Largest edge intensity relative to the peak intensity.
    pub fn boundary_intensity_ratio(&self) -> f64 {
        let g = &self.grid;
        let peak = self.amplitude.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let at = |ix: usize, iy: usize| self.amplitude[iy * g.nx + ix].norm_sqr();
        let mut edge: f64 = 0.0;
        for iy in 0..g.ny {
            edge = edge.max(at(0, iy)).max(at(g.nx - 1, iy));
        }
        if g.ny > 1 {
            for ix in 0..g.nx {
                edge = edge.max(at(ix, 0)).max(at(ix, g.ny - 1));
            }
        }
        edge / peak
    }

    /// Bilinear value at `(x, y)`, zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> Complex64 {
        let g = &self.grid;
        let zero = Complex64::new(0.0, 0.0);
        let tx = (x - g.x0) / g.dx;
        if tx < 0.0 || tx > (g.nx - 1) as f64 {
            return zero;
        }
        let ix = (tx.floor() as usize).min(g.nx.saturating_sub(2));
        let fx = tx - ix as f64;
        let row = |iy: usize| {
            let base = iy * g.nx;
            if g.nx == 1 {
                self.amplitude[base]
            } else {
                self.amplitude[base + ix] * (1.0 - fx) + self.amplitude[base + ix + 1] * fx
            }
        };
        if g.ny == 1 {
            return row(0);
        }
        let ty = (y - g.y0) / g.dy;
        if ty < 0.0 || ty > (g.ny - 1) as f64 {
            return zero;
        }
        let iy = (ty.floor() as usize).min(g.ny - 2);
        let fy = ty - iy as f64;
        row(iy) * (1.0 - fy) + row(iy + 1) * fy
    }

    /// Intensity-weighted centre `(x, y)`.
    pub fn centroid(&self) -> (f64, f64) {
        let g = &self.grid;
        let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let i = self.amplitude[iy * g.nx + ix].norm_sqr();
                w += i;
                sx += i * g.x(ix);
                if g.ny > 1 {
                    sy += i * g.y(iy);
                }
            }
        }
        if w == 0.0 {
            (0.0, 0.0)
        } else {
            (sx / w, sy / w)
        }
    }

    pub fn summary(&self) -> ModeSummary {
        let (x, y) = mfd(self);
        ModeSummary {
            n_eff: self.n_eff,
            mfd_x_um: x,
            mfd_y_um: y,
            wavelength_um: self.wavelength,
        }
    }
}

/// 1/e² intensity full widths through the intensity centroid. The `y`
/// width is `None` for 1D modes.
pub fn mfd(m: &ModeField) -> (f64, Option<f64>) {
    let g = m.grid;
    let (cx, cy) = m.centroid();
    let along_x: Vec<f64> = (0..g.nx).map(|ix| m.sample(g.x(ix), cy).norm_sqr()).collect();
    let wx = full_width_e2(&along_x, g.dx);
    if m.is_1d() {
        return (wx, None);
    }
    let along_y: Vec<f64> = (0..g.ny).map(|iy| m.sample(cx, g.y(iy)).norm_sqr()).collect();
    (wx, Some(full_width_e2(&along_y, g.dy)))
}

/// Width between the outermost 1/e² crossings around the maximum. Each
/// crossing is located on a parabola through the log-intensity of the three
/// nearest samples, which is exact for Gaussian profiles.
fn full_width_e2(values: &[f64], dx: f64) -> f64 {
    let Some((imax, &peak)) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return 0.0;
    };
    if !(peak > 0.0) {
        return 0.0;
    }
    let level = peak * (-2.0f64).exp();
    let n = values.len();
    let left = (0..imax).rev().find(|&i| values[i] < level).map(|i| crossing(values, i, i + 1, level));
    let right = (imax + 1..n).find(|&i| values[i] < level).map(|i| crossing(values, i - 1, i, level));
    let l = left.unwrap_or(0.0);
    let r = right.unwrap_or((n - 1) as f64);
    (r - l) * dx
}

/// Fractional index where the profile crosses `level` between samples
/// `lo` and `hi = lo + 1`.
fn crossing(values: &[f64], lo: usize, hi: usize, level: f64) -> f64 {
    let n = values.len();
    let linear = || lo as f64 + (values[lo] - level) / (values[lo] - values[hi]);
    // centre a three-point stencil on the pair
    let c = if lo == 0 { 1 } else if hi + 1 >= n { lo } else if values[lo] > values[hi] { hi } else { lo };
    if c == 0 || c + 1 >= n || values[c - 1] <= 0.0 || values[c] <= 0.0 || values[c + 1] <= 0.0 {
        return linear();
    }
    let (a, b, d) = (values[c - 1].ln(), values[c].ln(), values[c + 1].ln());
    // ln I(c + t) ≈ b + p t + q t²
    let p = 0.5 * (d - a);
    let q = 0.5 * (d - 2.0 * b + a);
    let target = level.ln() - b;
    let t = if q.abs() < 1e-14 {
        if p.abs() < 1e-300 {
            return linear();
        }
        target / p
    } else {
        let disc = p * p + 4.0 * q * target;
        if disc < 0.0 {
            return linear();
        }
        let s = disc.sqrt();
        let (t1, t2) = ((-p + s) / (2.0 * q), (-p - s) / (2.0 * q));
        let lo_t = lo as f64 - c as f64;
        let hi_t = hi as f64 - c as f64;
        let inside = |t: f64| t >= lo_t - 1e-9 && t <= hi_t + 1e-9;
        match (inside(t1), inside(t2)) {
            (true, _) => t1,
            (_, true) => t2,
            _ => return linear(),
        }
    };
    c as f64 + t
}

/// Power coupling between `a` displaced by `(dx, dy)` and `b`.
///
/// `a` is resampled onto `b`'s lattice by bilinear interpolation; the
/// result is normalised by both field norms so it lies in [0, 1].
pub fn overlap_efficiency(a: &ModeField, b: &ModeField, dx: f64, dy: f64) -> f64 {
    let g = &b.grid;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut na = 0.0;
    let mut nb = 0.0;
    for iy in 0..g.ny {
        let y = if g.ny == 1 { 0.0 } else { g.y(iy) };
        for ix in 0..g.nx {
            let fb = b.amplitude[iy * g.nx + ix];
            let fa = a.sample(g.x(ix) - dx, y - dy);
            cross += fa.conj() * fb;
            na += fa.norm_sqr();
            nb += fb.norm_sqr();
        }
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (cross.norm_sqr() / (na * nb)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::Grid1;

    fn gauss2(w: f64) -> ModeField {
        ModeField::gaussian(Grid2::centered(8.0, 8.0, 0.05), 0.532, w)
    }

    #[test]
    fn gaussian_mfd_is_twice_the_radius() {
        for w in [0.67, 0.95, 1.75] {
            let m = gauss2(w);
            let (x, y) = mfd(&m);
            assert!((x - 2.0 * w).abs() < 1e-9, "{x}");
            assert!((y.unwrap() - 2.0 * w).abs() < 1e-9);
        }
        let g1 = Grid2::from_axes(Grid1::centered(6.0, 0.05), Grid1 { x0: 0.0, dx: 1.0, nx: 1 });
        let m = ModeField::gaussian(g1, 0.532, 1.1);
        let (x, y) = mfd(&m);
        assert!((x - 2.2).abs() < 1e-9 && y.is_none());
    }

    #[test]
    fn offset_gaussian_mfd_uses_centroid() {
        let g = Grid2::centered(8.0, 8.0, 0.05);
        let m = ModeField::from_fn(g, 0.532, f64::NAN, |x, y| {
            Complex64::new((-((x - 0.33).powi(2) + (y + 0.71).powi(2)) / 1.0).exp(), 0.0)
        });
        let (x, y) = mfd(&m);
        assert!((x - 2.0).abs() < 1e-3 && (y.unwrap() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn self_overlap_is_one_and_phase_invariant() {
        let a = gauss2(1.2);
        assert!((overlap_efficiency(&a, &a, 0.0, 0.0) - 1.0).abs() < 1e-12);
        let mut b = a.clone();
        b.amplitude.iter_mut().for_each(|c| *c *= Complex64::from_polar(1.0, 0.7));
        assert!((overlap_efficiency(&a, &b, 0.0, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_is_symmetric() {
        let a = gauss2(1.75);
        let b = gauss2(0.95);
        let ab = overlap_efficiency(&a, &b, 0.3, -0.2);
        let ba = overlap_efficiency(&b, &a, -0.3, 0.2);
        assert!((ab - ba).abs() < 1e-3, "{ab} {ba}");
    }

    #[test]
    fn far_offset_gives_zero() {
        let a = gauss2(0.5);
        assert!(overlap_efficiency(&a, &a, 100.0, 0.0) == 0.0);
    }
}
