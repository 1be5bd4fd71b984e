use super::profile::{RiProfile1, RiProfile2};
use crate::linalg::tridiagonal_max_eigenvalue;

/// Collapses a cross-section to a lateral index profile by solving the
/// fundamental vertical slab mode of every column.
///
/// The slab problem uses zero-slope ends so a column of constant index
/// reproduces that index. Columns whose slab index would fall below the
/// cladding are clamped to it.
pub fn effective_index_reduce(p: &RiProfile2, wavelength: f64) -> RiProfile1 {
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    let k0sq = k0 * k0;
    let ny = p.grid.ny;
    let inv = 1.0 / (p.grid.dy * p.grid.dy);
    let off = vec![inv; ny.saturating_sub(1)];
    let mut diag = vec![0.0; ny];
    let samples = (0..p.grid.nx)
        .map(|ix| {
            let column = p.column(ix);
            let (lo, hi) = column
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if hi - lo <= f64::EPSILON * hi {
                return hi.max(p.n_clad);
            }
            for (iy, d) in diag.iter_mut().enumerate() {
                let neighbours = if ny == 1 {
                    0.0
                } else if iy == 0 || iy == ny - 1 {
                    1.0
                } else {
                    2.0
                };
                *d = k0sq * column[iy] * column[iy] - neighbours * inv;
            }
            let beta_sq = tridiagonal_max_eigenvalue(&diag, &off);
            (beta_sq.max(0.0).sqrt() / k0).max(p.n_clad)
        })
        .collect();
    RiProfile1 {
        grid: p.grid.x_axis(),
        n_clad: p.n_clad,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::{build_cross_section, window_for, ChannelCrossSection, Grid2};

    #[test]
    fn uniform_profile_reduces_to_cladding() {
        let p = RiProfile2::uniform(Grid2::centered(3.0, 3.0, 0.1), 1.51);
        let r = effective_index_reduce(&p, 0.532);
        assert!(r.samples.iter().all(|&v| v == 1.51));
    }

    #[test]
    fn y_invariant_profile_reproduces_midline() {
        let g = Grid2::centered(3.0, 4.0, 0.05);
        let mut samples = vec![0.0; g.len()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let x = g.x(ix);
                samples[iy * g.nx + ix] = 1.51 + 0.01 * (-x * x).exp();
            }
        }
        // keep every column off the constant-column shortcut
        for v in samples[..g.nx].iter_mut() {
            *v += 1e-13;
        }
        let p = RiProfile2::new(g, 1.51, samples).unwrap();
        let r = effective_index_reduce(&p, 0.532);
        let mid = p.row(g.ny / 2);
        for (a, b) in r.samples.iter().zip(mid) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn spim_reduction_is_bounded_by_extremes() {
        let cs = ChannelCrossSection::spim_output();
        let p = build_cross_section(&cs, &window_for(&cs, 3.0, 0.05)).unwrap();
        let r = effective_index_reduce(&p, 0.532);
        let peak = r.peak();
        assert!(peak > 1.51 && peak < p.peak(), "{peak}");
    }
}
