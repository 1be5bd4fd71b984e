use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform 1D sampling: `x_i = x0 + i * dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1 {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
}

impl Grid1 {
    pub fn new(x0: f64, dx: f64, nx: usize) -> Result<Self> {
        if !(dx > 0.0) || nx == 0 {
            return Err(Error::invalid("grid", "spacing must be positive and size non-zero"));
        }
        Ok(Self { x0, dx, nx })
    }

    /// Grid covering `[-half_width, half_width]` with spacing close to `dx`
    /// and a sample at 0 when the count is odd.
    pub fn centered(half_width: f64, dx: f64) -> Self {
        let half = (half_width / dx).round() as usize;
        Self {
            x0: -(half as f64) * dx,
            dx,
            nx: 2 * half + 1,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
}

/// Uniform 2D sampling, row-major with `x` fastest: index `iy * nx + ix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2 {
    pub fn new(x0: f64, y0: f64, dx: f64, dy: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::invalid("grid", "spacings must be positive and sizes non-zero"));
        }
        Ok(Self { x0, y0, dx, dy, nx, ny })
    }

    pub fn centered(half_x: f64, half_y: f64, d: f64) -> Self {
        let gx = Grid1::centered(half_x, d);
        let gy = Grid1::centered(half_y, d);
        Self::from_axes(gx, gy)
    }

    pub fn from_axes(gx: Grid1, gy: Grid1) -> Self {
        Self {
            x0: gx.x0,
            y0: gy.x0,
            dx: gx.dx,
            dy: gy.dx,
            nx: gx.nx,
            ny: gy.nx,
        }
    }

    pub fn x_axis(&self) -> Grid1 {
        Grid1 { x0: self.x0, dx: self.dx, nx: self.nx }
    }

    pub fn y_axis(&self) -> Grid1 {
        Grid1 { x0: self.y0, dx: self.dy, nx: self.ny }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Same spacing, extended by `pad_x`/`pad_y` samples on every side.
    pub fn padded(&self, pad_x: usize, pad_y: usize) -> Self {
        Self {
            x0: self.x0 - pad_x as f64 * self.dx,
            y0: self.y0 - pad_y as f64 * self.dy,
            dx: self.dx,
            dy: self.dy,
            nx: self.nx + 2 * pad_x,
            ny: self.ny + 2 * pad_y,
        }
    }
}

/// Sampled refractive index along one transverse axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiProfile1 {
    pub grid: Grid1,
    pub n_clad: f64,
    pub samples: Vec<f64>,
}

impl RiProfile1 {
    pub fn new(grid: Grid1, n_clad: f64, samples: Vec<f64>) -> Result<Self> {
        validate(n_clad, &samples, grid.nx)?;
        Ok(Self { grid, n_clad, samples })
    }

    pub fn uniform(grid: Grid1, n: f64) -> Self {
        Self {
            grid,
            n_clad: n,
            samples: vec![n; grid.nx],
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation, clamped to the cladding outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        let t = (x - self.grid.x0) / self.grid.dx;
        if t < 0.0 || t > (self.grid.nx - 1) as f64 {
            return self.n_clad;
        }
        let i = (t.floor() as usize).min(self.grid.nx.saturating_sub(2));
        let f = t - i as f64;
        if self.grid.nx == 1 {
            return self.samples[0];
        }
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }
}

/// Sampled refractive index over a transverse cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiProfile2 {
    pub grid: Grid2,
    pub n_clad: f64,
    pub samples: Vec<f64>,
}

impl RiProfile2 {
    pub fn new(grid: Grid2, n_clad: f64, samples: Vec<f64>) -> Result<Self> {
        validate(n_clad, &samples, grid.len())?;
        Ok(Self { grid, n_clad, samples })
    }

    pub fn uniform(grid: Grid2, n: f64) -> Self {
        Self {
            grid,
            n_clad: n,
            samples: vec![n; grid.len()],
        }
    }

    pub fn at_index(&self, ix: usize, iy: usize) -> f64 {
        self.samples[iy * self.grid.nx + ix]
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        &self.samples[iy * self.grid.nx..(iy + 1) * self.grid.nx]
    }

    pub fn column(&self, ix: usize) -> Vec<f64> {
        (0..self.grid.ny).map(|iy| self.at_index(ix, iy)).collect()
    }

    /// Extends the profile with cladding on every side.
    pub fn padded(&self, pad_x: usize, pad_y: usize) -> Self {
        let grid = self.grid.padded(pad_x, pad_y);
        let mut samples = vec![self.n_clad; grid.len()];
        for iy in 0..self.grid.ny {
            let dst = (iy + pad_y) * grid.nx + pad_x;
            samples[dst..dst + self.grid.nx].copy_from_slice(self.row(iy));
        }
        Self {
            grid,
            n_clad: self.n_clad,
            samples,
        }
    }

    /// Full width at half maximum of the index contrast along the row
    /// through the peak, linearly interpolated at the crossings.
    pub fn horizontal_fwhm(&self) -> f64 {
        let (imax, _) = self
            .samples
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        let row = self.row(imax / self.grid.nx);
        let contrast: Vec<f64> = row.iter().map(|v| v - self.n_clad).collect();
        fwhm(&contrast, self.grid.dx)
    }

    /// RMS width of the index contrast along `x`, weighted by contrast.
    pub fn horizontal_second_moment(&self) -> f64 {
        let mut w = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                let c = (self.at_index(ix, iy) - self.n_clad).max(0.0);
                let x = self.grid.x(ix);
                w += c;
                m1 += c * x;
                m2 += c * x * x;
            }
        }
        if w == 0.0 {
            return 0.0;
        }
        let mean = m1 / w;
        (m2 / w - mean * mean).max(0.0).sqrt()
    }
}

pub(crate) fn fwhm(values: &[f64], dx: f64) -> f64 {
    let (imax, peak) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    if !(peak > 0.0) {
        return 0.0;
    }
    let half = 0.5 * peak;
    let mut left = 0.0;
    let mut i = imax;
    while i > 0 {
        if values[i - 1] < half {
            let f = (values[i] - half) / (values[i] - values[i - 1]);
            left = i as f64 - f;
            break;
        }
        i -= 1;
    }
    let mut right = (values.len() - 1) as f64;
    let mut i = imax;
    while i + 1 < values.len() {
        if values[i + 1] < half {
            let f = (values[i] - half) / (values[i] - values[i + 1]);
            right = i as f64 + f;
            break;
        }
        i += 1;
    }
    (right - left) * dx
}

fn validate(n_clad: f64, samples: &[f64], expected: usize) -> Result<()> {
    if !(n_clad > 1.0) {
        return Err(Error::invalid("n_clad", format!("{n_clad} must exceed 1")));
    }
    if samples.len() != expected {
        return Err(Error::invalid(
            "samples",
            format!("{} samples for a grid of {expected}", samples.len()),
        ));
    }
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("samples", format!("non-finite sample {v}")));
    }
    if let Some(v) = samples.iter().find(|&&v| v < n_clad - 1e-9) {
        return Err(Error::invalid("samples", format!("{v} lies below the cladding index {n_clad}")));
    }
    Ok(())
}
