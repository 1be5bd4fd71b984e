//! Exposure stack of an 8-spot camera image: compose, take a line profile,
//! fit the spots and read off the neighbour ratios.

use ion_addressing::analysis::{crosstalk_metrics, hdr_compose, line_profile, multi_gauss_fit, Axis, ExposureFrame, Image};
use ion_addressing::io::{load_exposures, write_pgm16};

const PIXEL_UM: f64 = 0.1;

fn scene(col: usize, row: usize) -> f64 {
    let (x, y) = (col as f64 * PIXEL_UM, row as f64 * PIXEL_UM);
    let y2 = (y - 2.0).powi(2);
    (0..8)
        .map(|k| {
            let amp = if k == 3 { 1.0 } else if k == 2 || k == 4 { 5e-4 } else { 1e-5 };
            let cx = 2.0 + 4.0 * k as f64;
            amp * (-2.0 * ((x - cx).powi(2) + y2) / (0.67 * 0.67)).exp()
        })
        .sum()
}

fn main() -> ion_addressing::Result<()> {
    let dir = std::env::temp_dir().join("hdr_profile_example");
    std::fs::create_dir_all(&dir)?;
    let mut manifest = String::from("path,scale,saturation_level\n");
    for scale in [1.0, 100.0, 2000.0] {
        // camera counts for a peak of 50000 at unit scale, clipped at 16 bits
        let img = Image::from_fn(340, 40, |c, r| (50_000.0 * scale * scene(c, r)).min(65535.0));
        let name = format!("exp_{scale}.pgm");
        write_pgm16(&dir.join(&name), &img)?;
        manifest.push_str(&format!("{name},{scale},65535\n"));
    }
    let manifest_path = dir.join("stack.csv");
    std::fs::write(&manifest_path, manifest)?;

    let frames: Vec<ExposureFrame> = load_exposures(&manifest_path, PIXEL_UM)?;
    let hdr = hdr_compose(&frames)?;
    let profile = line_profile(&hdr, Axis::Row(20), 3)?;
    let fit = multi_gauss_fit(&profile, 8, None)?;
    println!("mean waist {:.3} um, pitch {:.3} um", fit.mean_waist(), fit.mean_pitch().unwrap_or(f64::NAN));

    let centers: Vec<f64> = fit.peaks.iter().map(|p| p.center).collect();
    let m = crosstalk_metrics(&profile, &centers, 3)?;
    for c in m.nearest() {
        println!("ch{}: peak {:.2e}, integrated {:.2e}", c.channel, c.peak_ratio, c.integrated_ratio);
    }
    Ok(())
}
