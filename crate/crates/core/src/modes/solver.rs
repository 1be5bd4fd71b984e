use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::ModeField;
use crate::chip::{Grid1, Grid2, RiProfile1, RiProfile2};
use crate::error::{Error, Result};
use crate::linalg::{dot, orthonormalize, SymBanded};

/// Knobs of the shift-invert eigen iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative eigenvalue change that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Minimum cladding margin between the index structure and the
    /// Dirichlet wall, µm.
    pub padding: f64,
    /// How many times the cladding margin may be doubled when a mode still
    /// touches the wall.
    pub max_padding_doublings: usize,
    /// Largest admissible edge-to-peak intensity ratio of a returned mode.
    pub boundary_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            padding: 3.0,
            max_padding_doublings: 2,
            boundary_ratio: 1e-6,
        }
    }
}

/// Guided modes of a cross-section, in decreasing effective index.
pub fn solve_modes(p: &RiProfile2, wavelength: f64, max_modes: usize) -> Result<Vec<ModeField>> {
    solve_modes_with(p, wavelength, max_modes, &SolverOptions::default())
}

pub fn solve_modes_with(
    p: &RiProfile2,
    wavelength: f64,
    max_modes: usize,
    opts: &SolverOptions,
) -> Result<Vec<ModeField>> {
    check_resolution(p.grid.dx.max(p.grid.dy), wavelength)?;
    let mut padding = opts.padding;
    let mut attempt = 0;
    loop {
        let (px, py) = required_padding(p, padding);
        let profile = p.padded(px, py);
        let problem = Problem::from_2d(&profile, wavelength);
        let modes = problem.solve(max_modes, opts)?;
        let worst = modes.iter().map(|m| m.boundary_intensity_ratio()).fold(0.0, f64::max);
        if worst <= opts.boundary_ratio || attempt >= opts.max_padding_doublings {
            return Ok(modes);
        }
        padding *= 2.0;
        attempt += 1;
    }
}

/// Guided modes of a lateral index profile.
pub fn solve_modes_1d(p: &RiProfile1, wavelength: f64, max_modes: usize) -> Result<Vec<ModeField>> {
    solve_modes_1d_with(p, wavelength, max_modes, &SolverOptions::default())
}

pub fn solve_modes_1d_with(
    p: &RiProfile1,
    wavelength: f64,
    max_modes: usize,
    opts: &SolverOptions,
) -> Result<Vec<ModeField>> {
    check_resolution(p.grid.dx, wavelength)?;
    let as_2d = RiProfile2 {
        grid: Grid2 {
            x0: p.grid.x0,
            y0: 0.0,
            dx: p.grid.dx,
            dy: 1.0,
            nx: p.grid.nx,
            ny: 1,
        },
        n_clad: p.n_clad,
        samples: p.samples.clone(),
    };
    let mut padding = opts.padding;
    let mut attempt = 0;
    loop {
        let (px, _) = required_padding(&as_2d, padding);
        let profile = pad_1d(p, px);
        let problem = Problem::from_1d(&profile, wavelength);
        let modes = problem.solve(max_modes, opts)?;
        let worst = modes.iter().map(|m| m.boundary_intensity_ratio()).fold(0.0, f64::max);
        if worst <= opts.boundary_ratio || attempt >= opts.max_padding_doublings {
            return Ok(modes);
        }
        padding *= 2.0;
        attempt += 1;
    }
}

/// Number of guided modes (effective index above cladding) of a profile,
/// counted exactly from the inertia of the shifted operator.
pub fn count_guided_modes(p: &RiProfile2, wavelength: f64) -> usize {
    Problem::from_2d(p, wavelength).count_guided()
}

pub fn count_guided_modes_1d(p: &RiProfile1, wavelength: f64) -> usize {
    Problem::from_1d(p, wavelength).count_guided()
}

fn check_resolution(d: f64, wavelength: f64) -> Result<()> {
    if d > wavelength / 8.0 + 1e-12 {
        return Err(Error::invalid(
            "grid",
            format!("spacing {d} um is coarser than lambda/8 = {} um", wavelength / 8.0),
        ));
    }
    Ok(())
}

fn pad_1d(p: &RiProfile1, px: usize) -> RiProfile1 {
    let mut samples = vec![p.n_clad; p.grid.nx + 2 * px];
    samples[px..px + p.grid.nx].copy_from_slice(&p.samples);
    RiProfile1 {
        grid: Grid1 {
            x0: p.grid.x0 - px as f64 * p.grid.dx,
            dx: p.grid.dx,
            nx: p.grid.nx + 2 * px,
        },
        n_clad: p.n_clad,
        samples,
    }
}

/// Extra samples per side so the index structure sits at least `padding`
/// µm away from the wall. Contrast below 1e-7 counts as cladding.
fn required_padding(p: &RiProfile2, padding: f64) -> (usize, usize) {
    let g = &p.grid;
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (usize::MAX, 0, usize::MAX, 0);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            if p.at_index(ix, iy) - p.n_clad > 1e-7 {
                x_lo = x_lo.min(ix);
                x_hi = x_hi.max(ix);
                y_lo = y_lo.min(iy);
                y_hi = y_hi.max(iy);
            }
        }
    }
    if x_lo == usize::MAX {
        return (0, 0);
    }
    let need = |have: usize, d: f64| {
        let want = (padding / d).ceil() as usize;
        want.saturating_sub(have)
    };
    let px = need(x_lo.min(g.nx - 1 - x_hi), g.dx);
    let py = if g.ny == 1 { 0 } else { need(y_lo.min(g.ny - 1 - y_hi), g.dy) };
    (px, py)
}

/// Discrete scalar Helmholtz operator `A = ∇²_h + k0² n²` with Dirichlet
/// walls, on a lattice ordered with the shorter axis fastest.
struct Problem {
    grid: Grid2,
    one_d: bool,
    k0: f64,
    n_clad: f64,
    n_max: f64,
    /// k0² n² per lattice site, in solver ordering
    potential: Vec<f64>,
    nf: usize,
    ns: usize,
    hf: f64,
    hs: f64,
    x_fast: bool,
}

impl Problem {
    fn from_2d(p: &RiProfile2, wavelength: f64) -> Self {
        let g = p.grid;
        let k0 = 2.0 * std::f64::consts::PI / wavelength;
        let x_fast = g.nx <= g.ny;
        let (nf, ns, hf, hs) = if x_fast { (g.nx, g.ny, g.dx, g.dy) } else { (g.ny, g.nx, g.dy, g.dx) };
        let mut potential = vec![0.0; g.len()];
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let n = p.at_index(ix, iy);
                let k = if x_fast { iy * nf + ix } else { ix * nf + iy };
                potential[k] = k0 * k0 * n * n;
            }
        }
        Self {
            grid: g,
            one_d: g.ny == 1,
            k0,
            n_clad: p.n_clad,
            n_max: p.peak(),
            potential,
            nf,
            ns,
            hf,
            hs,
            x_fast,
        }
    }

    fn from_1d(p: &RiProfile1, wavelength: f64) -> Self {
        let k0 = 2.0 * std::f64::consts::PI / wavelength;
        Self {
            grid: Grid2 {
                x0: p.grid.x0,
                y0: 0.0,
                dx: p.grid.dx,
                dy: 1.0,
                nx: p.grid.nx,
                ny: 1,
            },
            one_d: true,
            k0,
            n_clad: p.n_clad,
            n_max: p.peak(),
            potential: p.samples.iter().map(|n| k0 * k0 * n * n).collect(),
            nf: p.grid.nx,
            ns: 1,
            hf: p.grid.dx,
            hs: 1.0,
            x_fast: true,
        }
    }

    fn len(&self) -> usize {
        self.nf * self.ns
    }

    fn bandwidth(&self) -> usize {
        if self.one_d {
            1
        } else {
            self.nf
        }
    }

    /// `shift·I − A` in banded storage.
    fn shifted(&self, shift: f64) -> SymBanded {
        let n = self.len();
        let mut m = SymBanded::zeros(n, self.bandwidth());
        let cf = 1.0 / (self.hf * self.hf);
        let cs = if self.one_d { 0.0 } else { 1.0 / (self.hs * self.hs) };
        for k in 0..n {
            m.set(k, k, shift - self.potential[k] + 2.0 * cf + 2.0 * cs);
            if k % self.nf != 0 {
                m.set(k, k - 1, -cf);
            }
            if !self.one_d && k >= self.nf {
                m.set(k, k - self.nf, -cs);
            }
        }
        m
    }

    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let cf = 1.0 / (self.hf * self.hf);
        let cs = if self.one_d { 0.0 } else { 1.0 / (self.hs * self.hs) };
        let n = self.len();
        for k in 0..n {
            let i = k % self.nf;
            let mut v = (self.potential[k] - 2.0 * cf - 2.0 * cs) * x[k];
            if i > 0 {
                v += cf * x[k - 1];
            }
            if i + 1 < self.nf {
                v += cf * x[k + 1];
            }
            if !self.one_d {
                if k >= self.nf {
                    v += cs * x[k - self.nf];
                }
                if k + self.nf < n {
                    v += cs * x[k + self.nf];
                }
            }
            y[k] = v;
        }
    }

    fn threshold(&self) -> f64 {
        self.k0 * self.k0 * self.n_clad * self.n_clad
    }

    fn count_guided(&self) -> usize {
        self.shifted(self.threshold()).negative_inertia()
    }

    fn solve(&self, max_modes: usize, opts: &SolverOptions) -> Result<Vec<ModeField>> {
        let guided = self.count_guided().min(max_modes);
        if guided == 0 {
            return Ok(Vec::new());
        }
        let n = self.len();
        let block = (guided + 3).min(n);
        // the Dirichlet Laplacian is negative definite, so this shift keeps
        // shift·I − A positive definite while sitting just above the top mode
        let shift = self.k0 * self.k0 * self.n_max * self.n_max;
        let factor = self.shifted(shift).cholesky()?;

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let envelope: Vec<f64> = self.potential.iter().map(|&v| (v - self.threshold()).max(0.0)).collect();
        let env_max = envelope.iter().copied().fold(0.0, f64::max).max(1e-300);
        let mut basis: Vec<Vec<f64>> = (0..block)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let e = envelope[k] / env_max;
                        if j == 0 {
                            e + 1e-3
                        } else {
                            (e + 0.05) * rng.random_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        orthonormalize(&mut basis);

        let mut previous = vec![f64::NAN; block];
        let mut applied = vec![vec![0.0; n]; block];
        for iteration in 1..=opts.max_iterations {
            for v in basis.iter_mut() {
                factor.solve_in_place(v);
            }
            let kept = orthonormalize(&mut basis);
            basis.truncate(kept);
            let b = basis.len();
            for (v, av) in basis.iter().zip(applied.iter_mut()) {
                self.apply(v, av);
            }
            let h = DMatrix::from_fn(b, b, |i, j| dot(&basis[i], &applied[j]));
            let h = (&h + h.transpose()) * 0.5;
            let eig = SymmetricEigen::new(h);
            let mut order: Vec<usize> = (0..b).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let ritz: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let rotated: Vec<Vec<f64>> = order
                .iter()
                .map(|&c| {
                    let mut out = vec![0.0; n];
                    for (r, v) in basis.iter().enumerate() {
                        let coeff = eig.eigenvectors[(r, c)];
                        for (o, x) in out.iter_mut().zip(v) {
                            *o += coeff * x;
                        }
                    }
                    out
                })
                .collect();
            basis = rotated;

            let converged = (0..guided.min(b))
                .all(|i| (ritz[i] - previous[i]).abs() <= opts.tolerance * ritz[i].abs());
            previous = ritz.clone();
            if converged {
                return Ok(self.collect_modes(&basis, &ritz, guided));
            }
            if iteration == opts.max_iterations {
                let mut av = vec![0.0; n];
                self.apply(&basis[0], &mut av);
                let residual = av
                    .iter()
                    .zip(&basis[0])
                    .map(|(a, x)| (a - ritz[0] * x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                return Err(Error::NotConverged {
                    iterations: iteration,
                    residual,
                });
            }
        }
        unreachable!("loop returns on the last iteration")
    }

    fn collect_modes(&self, basis: &[Vec<f64>], ritz: &[f64], guided: usize) -> Vec<ModeField> {
        let g = self.grid;
        let area = if self.one_d { g.dx } else { g.cell_area() };
        let threshold = self.threshold();
        (0..guided)
            .filter(|&i| ritz[i] > threshold)
            .map(|i| {
                let v = &basis[i];
                let mut amplitude = vec![Complex64::new(0.0, 0.0); g.len()];
                for iy in 0..g.ny {
                    for ix in 0..g.nx {
                        let k = if self.x_fast { iy * self.nf + ix } else { ix * self.nf + iy };
                        amplitude[iy * g.nx + ix] = Complex64::new(v[k], 0.0);
                    }
                }
                // sign convention: largest-magnitude sample is positive
                let pivot = amplitude
                    .iter()
                    .max_by(|a, b| a.re.abs().total_cmp(&b.re.abs()))
                    .map(|c| c.re.signum())
                    .unwrap_or(1.0);
                let norm = (amplitude.iter().map(|c| c.norm_sqr()).sum::<f64>() * area).sqrt();
                amplitude.iter_mut().for_each(|c| *c *= pivot / norm);
                ModeField {
                    grid: g,
                    amplitude,
                    n_eff: ritz[i].sqrt() / self.k0,
                    wavelength: 2.0 * std::f64::consts::PI / self.k0,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::{circular_step_profile, Grid1};

    fn slab(width: f64, dn: f64, dx: f64, half: f64) -> RiProfile1 {
        let g = Grid1::centered(half, dx);
        let samples = g
            .coords()
            .iter()
            .map(|x| if x.abs() < 0.5 * width { 1.51 + dn } else { 1.51 })
            .collect();
        RiProfile1::new(g, 1.51, samples).unwrap()
    }

    #[test]
    fn uniform_profile_has_no_modes() {
        let p = RiProfile2::uniform(Grid2::centered(4.0, 4.0, 0.05), 1.51);
        assert!(solve_modes(&p, 0.532, 3).unwrap().is_empty());
        let p = RiProfile1::uniform(Grid1::centered(4.0, 0.05), 1.51);
        assert!(solve_modes_1d(&p, 0.532, 3).unwrap().is_empty());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = RiProfile1::uniform(Grid1::centered(4.0, 0.1), 1.51);
        assert!(solve_modes_1d(&p, 0.532, 1).is_err());
    }

    #[test]
    fn slab_modes_are_normalised_ordered_and_orthogonal() {
        let p = slab(4.0, 0.015, 0.025, 6.0);
        let modes = solve_modes_1d(&p, 0.532, 4).unwrap();
        assert!(modes.len() >= 2);
        for w in modes.windows(2) {
            assert!(w[0].n_eff > w[1].n_eff);
        }
        for (i, a) in modes.iter().enumerate() {
            assert!((a.norm() - 1.0).abs() < 1e-10);
            assert!(a.n_eff > 1.51 && a.n_eff < 1.525);
            for b in &modes[i + 1..] {
                assert!(a.inner(b).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn step_core_mode_counts_follow_v_number() {
        // V = 2.27 single mode, V = 2.77 supports LP11 (two-fold)
        let w = Grid2::centered(1.1, 1.1, 0.05);
        let small = circular_step_profile(1.8, 1.525, 1.51, &w);
        let modes = solve_modes(&small, 0.532, 4).unwrap();
        assert_eq!(modes.len(), 1);
        let large = circular_step_profile(2.2, 1.525, 1.51, &Grid2::centered(1.3, 1.3, 0.05));
        let modes = solve_modes(&large, 0.532, 4).unwrap();
        assert!(modes.len() >= 2, "{}", modes.len());
    }

    #[test]
    fn counted_modes_match_solved_modes() {
        let p = slab(6.0, 0.015, 0.025, 8.0);
        let count = count_guided_modes_1d(&pad_1d(&p, 0), 0.532);
        let modes = solve_modes_1d(&p, 0.532, 20).unwrap();
        assert_eq!(count, modes.len());
    }
}
