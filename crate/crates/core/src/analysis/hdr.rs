use serde::Serialize;

use crate::error::{Error, Result};

/// Fraction of the saturation level above which a sample is distrusted.
pub const SATURATION_FRACTION: f64 = 0.95;

/// Row-major image; `pixel_size` is in µm per pixel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub pixel_size: f64,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (data.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            pixel_size: 1.0,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(c, r));
            }
        }
        Self {
            width,
            height,
            data,
            pixel_size: 1.0,
        }
    }

    pub fn with_pixel_size(mut self, pixel_size: f64) -> Self {
        self.pixel_size = pixel_size;
        self
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// One exposure of a stack: `image` recorded with light level `scale·I₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureFrame {
    pub image: Image,
    pub scale: f64,
    pub saturation_level: f64,
}

impl ExposureFrame {
    pub fn new(image: Image, scale: f64, saturation_level: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid("scale", format!("{scale} must be positive")));
        }
        if !(saturation_level > 0.0) {
            return Err(Error::invalid(
                "saturation_level",
                format!("{saturation_level} must be positive"),
            ));
        }
        if image.data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("image", "samples must be finite and non-negative"));
        }
        Ok(Self {
            image,
            scale,
            saturation_level,
        })
    }
}

/// Composite in units of I₀ with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    pub composite: Vec<f64>,
    pub valid: Vec<bool>,
    pub pixel_size: f64,
}

impl HdrImage {
    pub fn at(&self, col: usize, row: usize) -> Option<f64> {
        let i = row * self.width + col;
        self.valid[i].then_some(self.composite[i])
    }

    pub fn from_image(img: &Image) -> Self {
        Self {
            width: img.width,
            height: img.height,
            composite: img.data.clone(),
            valid: vec![true; img.data.len()],
            pixel_size: img.pixel_size,
        }
    }
}

pub fn hdr_compose(frames: &[ExposureFrame]) -> Result<HdrImage> {
    hdr_compose_with(frames, SATURATION_FRACTION)
}

/// Per pixel, takes the highest-scale frame whose sample sits below
/// `fraction·saturation_level` and divides by its scale. Pixels saturated
/// in every frame are masked.
pub fn hdr_compose_with(frames: &[ExposureFrame], fraction: f64) -> Result<HdrImage> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("frames", "at least one exposure is required"))?;
    let (w, h) = (first.image.width, first.image.height);
    for f in frames {
        if (f.image.width, f.image.height) != (w, h) {
            return Err(Error::DimensionMismatch {
                expected: (w, h),
                found: (f.image.width, f.image.height),
            });
        }
    }
    let mut order: Vec<&ExposureFrame> = frames.iter().collect();
    order.sort_by(|a, b| b.scale.total_cmp(&a.scale));
    let mut composite = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for i in 0..w * h {
        if let Some(f) = order.iter().find(|f| f.image.data[i] < fraction * f.saturation_level) {
            composite[i] = f.image.data[i] / f.scale;
            valid[i] = true;
        }
    }
    Ok(HdrImage {
        width: w,
        height: h,
        composite,
        valid,
        pixel_size: first.image.pixel_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spot(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |c, r| {
            let (x, y) = (c as f64 - 20.0, r as f64 - 12.0);
            (-(x * x + y * y) / 18.0).exp() + 1e-4
        })
    }

    fn render(truth: &Image, scale: f64, sat: f64) -> ExposureFrame {
        let data = truth.data.iter().map(|v| (v * scale).min(sat)).collect();
        ExposureFrame::new(Image::new(truth.width, truth.height, data).unwrap(), scale, sat).unwrap()
    }

    #[test]
    fn single_frame_passes_through() {
        let img = spot(40, 24);
        let out = hdr_compose(&[render(&img, 1.0, 10.0)]).unwrap();
        assert_eq!(out.composite, img.data);
        assert!(out.valid.iter().all(|&v| v));
    }

    #[test]
    fn three_exposures_recover_the_truth() {
        let truth = spot(40, 24);
        let sat = 4.0;
        let frames: Vec<_> = [1.0, 100.0, 2000.0].iter().map(|&s| render(&truth, s, sat)).collect();
        let out = hdr_compose(&frames).unwrap();
        for (i, (&v, &t)) in out.composite.iter().zip(&truth.data).enumerate() {
            assert!(out.valid[i]);
            assert!((v - t).abs() <= 1e-12 * t.max(1.0));
        }
        let range = out.composite.iter().cloned().fold(0.0, f64::max) / out.composite.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(range >= 2000.0);
    }

    #[test]
    fn pixel_saturated_everywhere_is_masked() {
        let truth = spot(40, 24);
        let mut frames: Vec<_> = [1.0, 100.0].iter().map(|&s| render(&truth, s, 0.5)).collect();
        // the spot centre exceeds 0.95·sat even at scale 1
        let i = 12 * 40 + 20;
        assert!(frames.iter().all(|f| f.image.data[i] >= 0.95 * 0.5));
        frames.swap(0, 1);
        let out = hdr_compose(&frames).unwrap();
        assert!(!out.valid[i]);
        assert!(out.at(20, 12).is_none());
    }

    #[test]
    fn scale_equivariance() {
        let truth = spot(40, 24);
        let frames: Vec<_> = [1.0, 100.0, 2000.0].iter().map(|&s| render(&truth, s, 4.0)).collect();
        let scaled: Vec<_> = frames
            .iter()
            .map(|f| {
                let mut g = f.clone();
                g.image.data.iter_mut().for_each(|v| *v *= 3.0);
                g.saturation_level *= 3.0;
                g
            })
            .collect();
        let a = hdr_compose(&frames).unwrap();
        let b = hdr_compose(&scaled).unwrap();
        assert_eq!(a.valid, b.valid);
        for (x, y) in a.composite.iter().zip(&b.composite) {
            assert!((3.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let a = render(&spot(40, 24), 1.0, 4.0);
        let b = render(&spot(41, 24), 1.0, 4.0);
        assert!(matches!(hdr_compose(&[a, b]), Err(Error::DimensionMismatch { .. })));
    }
}
