use ion_addressing::chip::{ChannelCrossSection, Grid1, RiProfile1};
use ion_addressing::modes::solve_modes_1d;
use ion_addressing::propagation::{coupler_crosstalk_with, propagate_invariant, BpmOptions, ReducedGuide, BPM_DX};
use num_complex::Complex64;

const LAMBDA: f64 = 0.532;

fn lossless(dz: f64) -> BpmOptions {
    BpmOptions {
        dz,
        absorber: None,
        ..Default::default()
    }
}

struct Pair {
    profile: RiProfile1,
    left: Vec<Complex64>,
    right: Vec<Complex64>,
}

fn pair(cs: &ChannelCrossSection, pitch: f64) -> Pair {
    let g = ReducedGuide::single_mode(cs, LAMBDA).unwrap();
    let grid = Grid1::centered(0.5 * pitch + g.half_width + 15.0, BPM_DX);
    let mut n = vec![g.n_clad(); grid.nx];
    g.add_to(&grid, -0.5 * pitch, 1.0, &mut n);
    g.add_to(&grid, 0.5 * pitch, 1.0, &mut n);
    Pair {
        profile: RiProfile1::new(grid, g.n_clad(), n).unwrap(),
        left: g.fundamental_on(&grid, -0.5 * pitch, LAMBDA).unwrap(),
        right: g.fundamental_on(&grid, 0.5 * pitch, LAMBDA).unwrap(),
    }
}

/// Transfer into the right guide sampled every `step` µm up to `length`.
fn transfer_curve(p: &Pair, step: f64, length: f64) -> Vec<(f64, f64)> {
    let mut field = p.left.clone();
    let mut out = vec![(0.0, 0.0)];
    let launched: f64 = field.iter().map(|c| c.norm_sqr()).sum();
    let mut z = 0.0;
    while z < length {
        let r = propagate_invariant(&p.profile, step, &field, LAMBDA, &lossless(0.25)).unwrap();
        field = r.field.clone();
        z += step;
        let scale: f64 = field.iter().map(|c| c.norm_sqr()).sum::<f64>() / launched;
        out.push((z, r.fraction_in(&p.right) * scale));
    }
    out
}

#[test]
fn transfer_peak_matches_supermode_beat_length() {
    let cs = ChannelCrossSection::conventional();
    let p = pair(&cs, 4.0);
    let modes = solve_modes_1d(&p.profile, LAMBDA, 2).unwrap();
    assert_eq!(modes.len(), 2);
    let l_pi = LAMBDA / (2.0 * (modes[0].n_eff - modes[1].n_eff));
    let curve = transfer_curve(&p, 5.0, 1.4 * l_pi);
    let k = (1..curve.len() - 1).max_by(|&a, &b| curve[a].1.total_cmp(&curve[b].1)).unwrap();
    // parabola through the three samples around the maximum
    let (y0, y1, y2) = (curve[k - 1].1, curve[k].1, curve[k + 1].1);
    let z_peak = curve[k].0 + 5.0 * 0.5 * (y0 - y2) / (y0 - 2.0 * y1 + y2);
    assert!((z_peak / l_pi - 1.0).abs() < 0.05, "peak {z_peak}, L_pi {l_pi}");
    assert!(curve[k].1 > 0.95, "peak transfer {}", curve[k].1);
}

#[test]
fn power_is_conserved_over_a_millimetre() {
    let p = pair(&ChannelCrossSection::spim_output(), 8.0);
    let r = propagate_invariant(&p.profile, 1000.0, &p.left, LAMBDA, &lossless(0.25)).unwrap();
    let drift = r.power_history.iter().map(|(_, q)| (q - 1.0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-3, "{drift}");
    assert!((r.final_power() - 1.0).abs() <= 1e-3);
}

#[test]
fn halving_dz_changes_transfer_by_less_than_1e3() {
    let cs = ChannelCrossSection::conventional();
    let at = |dz: f64| {
        let opts = BpmOptions {
            dz,
            ..Default::default()
        };
        coupler_crosstalk_with(&cs, 5.0, 200.0, LAMBDA, &opts).unwrap()
    };
    let (a, b, c) = (at(0.5), at(0.25), at(0.125));
    assert!((a - b).abs() < 1e-3 && (b - c).abs() < 1e-3, "{a} {b} {c}");
    assert!((b - c).abs() <= (a - b).abs());
}

#[test]
fn crosstalk_falls_log_linearly_with_pitch() {
    let cs = ChannelCrossSection::conventional();
    let opts = BpmOptions::default();
    let pts: Vec<(f64, f64)> = (6..=14)
        .step_by(2)
        .map(|p| {
            let x = coupler_crosstalk_with(&cs, p as f64, 200.0, LAMBDA, &opts).unwrap();
            (p as f64, x.log10())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let range = pts[0].1 - pts[pts.len() - 1].1;
    let worst = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).abs()).fold(0.0, f64::max);
    assert!(slope < 0.0);
    assert!(worst < 0.15 * range, "residual {worst} of range {range}: {pts:?}");
}
