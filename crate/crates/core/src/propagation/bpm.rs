use num_complex::Complex64;
use serde::Serialize;

use crate::chip::{Grid1, RiProfile1};
use crate::error::{Error, Result};
use crate::modes::ModeField;

/// Quartic-ramp absorbing strips at both transverse edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Absorber {
    /// Strip width, µm.
    pub width: f64,
    /// Field attenuation rate at the wall, µm⁻¹.
    pub strength: f64,
}

impl Default for Absorber {
    fn default() -> Self {
        Self {
            width: 5.0,
            strength: 6.0,
        }
    }
}

impl Absorber {
    /// Attenuation rate at transverse sample `i` of `grid`.
    pub fn rate(&self, grid: &Grid1, i: usize) -> f64 {
        let x = grid.x(i);
        let depth = (grid.x0 + self.width - x).max(x - (grid.x_max() - self.width)).max(0.0);
        self.strength * (depth / self.width).powi(4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpmOptions {
    /// Longitudinal step, µm.
    pub dz: f64,
    pub absorber: Option<Absorber>,
    /// Record the power every this many steps.
    pub history_stride: usize,
}

impl Default for BpmOptions {
    fn default() -> Self {
        Self {
            dz: 0.25,
            absorber: Some(Absorber::default()),
            history_stride: 4,
        }
    }
}

/// Largest phase `k0·|n − n_ref|·dz` a single step may apply.
pub const MAX_STEP_PHASE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationResult {
    pub grid: Grid1,
    #[serde(skip)]
    pub field: Vec<Complex64>,
    /// `(z, P(z)/P(0))` samples.
    pub power_history: Vec<(f64, f64)>,
    /// Power fraction in each output channel mode, when channels were given.
    pub per_channel_power: Vec<f64>,
    pub launched_power: f64,
}

impl PropagationResult {
    pub fn intensity(&self) -> Vec<(f64, f64)> {
        self.field.iter().enumerate().map(|(i, e)| (self.grid.x(i), e.norm_sqr())).collect()
    }

    pub fn final_power(&self) -> f64 {
        power(&self.field, self.grid.dx) / self.launched_power
    }

    /// Fraction of the launched power carried by `mode` (sampled on the
    /// same grid).
    pub fn fraction_in(&self, mode: &[Complex64]) -> f64 {
        projection(mode, &self.field, self.grid.dx) / self.launched_power
    }
}

pub(crate) fn power(field: &[Complex64], dx: f64) -> f64 {
    field.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx
}

/// `|⟨m, e⟩|² / ‖m‖²`.
pub(crate) fn projection(mode: &[Complex64], field: &[Complex64], dx: f64) -> f64 {
    let cross: Complex64 = mode.iter().zip(field).map(|(m, e)| m.conj() * e).sum::<Complex64>() * dx;
    let norm = power(mode, dx);
    if norm == 0.0 {
        0.0
    } else {
        cross.norm_sqr() / norm
    }
}

/// Samples a 1D mode onto `grid` by linear interpolation.
pub fn mode_on_grid(mode: &ModeField, grid: &Grid1) -> Vec<Complex64> {
    (0..grid.nx).map(|i| mode.sample(grid.x(i), 0.0)).collect()
}

/// Paraxial split-step BPM.
///
/// `index(z, n)` fills the index at every transverse sample for plane `z`;
/// it is evaluated at the centre of each step. The transverse operator is
/// a Crank-Nicolson half step on either side of the index phase screen,
/// followed by the absorber mask.
pub fn propagate<F>(
    grid: Grid1,
    n_ref: f64,
    length: f64,
    mut index: F,
    input: &[Complex64],
    wavelength: f64,
    opts: &BpmOptions,
) -> Result<PropagationResult>
where
    F: FnMut(f64, &mut [f64]),
{
    if input.len() != grid.nx {
        return Err(Error::invalid(
            "input",
            format!("{} samples for a grid of {}", input.len(), grid.nx),
        ));
    }
    if !(length >= 0.0) {
        return Err(Error::invalid("length", "must be non-negative"));
    }
    if !(opts.dz > 0.0 && opts.dz <= 1.0) {
        return Err(Error::Stability {
            dz: opts.dz,
            reason: "dz must lie in (0, 1] um".into(),
        });
    }
    if let Some(a) = opts.absorber {
        if 2.0 * a.width >= grid.x_max() - grid.x0 {
            return Err(Error::invalid("absorber", "strips cover the whole window"));
        }
    }
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    let steps = (length / opts.dz).ceil() as usize;
    let dz = if steps == 0 { 0.0 } else { length / steps as f64 };
    let nx = grid.nx;
    let mut n = vec![n_ref; nx];
    for z in [0.0, 0.5 * length, length] {
        index(z, &mut n);
        let worst = n.iter().map(|v| (v - n_ref).abs()).fold(0.0, f64::max);
        if k0 * worst * opts.dz > MAX_STEP_PHASE {
            return Err(Error::Stability {
                dz: opts.dz,
                reason: format!(
                    "index phase per step {:.3} rad exceeds {MAX_STEP_PHASE}",
                    k0 * worst * opts.dz
                ),
            });
        }
    }

    let cn = CrankNicolson::new(nx, grid.dx, k0 * n_ref, 0.5 * dz);
    let mask: Vec<f64> = match opts.absorber {
        Some(a) => (0..nx).map(|i| (-a.rate(&grid, i) * dz).exp()).collect(),
        None => vec![1.0; nx],
    };
    let mut field = input.to_vec();
    let mut work = vec![Complex64::new(0.0, 0.0); nx];
    let p0 = power(&field, grid.dx);
    let launched = if p0 > 0.0 { p0 } else { 1.0 };
    let stride = opts.history_stride.max(1);
    let mut history = vec![(0.0, p0 / launched)];
    for s in 0..steps {
        let z = s as f64 * dz;
        cn.step(&mut field, &mut work);
        index(z + 0.5 * dz, &mut n);
        for (e, &v) in field.iter_mut().zip(&n) {
            let dn = v - n_ref;
            if dn != 0.0 {
                *e *= Complex64::from_polar(1.0, k0 * dn * dz);
            }
        }
        cn.step(&mut field, &mut work);
        if opts.absorber.is_some() {
            for (e, m) in field.iter_mut().zip(&mask) {
                *e *= *m;
            }
        }
        if (s + 1) % stride == 0 || s + 1 == steps {
            history.push((z + dz, power(&field, grid.dx) / launched));
        }
    }
    Ok(PropagationResult {
        grid,
        field,
        power_history: history,
        per_channel_power: Vec::new(),
        launched_power: launched,
    })
}

/// Propagation through a z-invariant profile.
pub fn propagate_invariant(
    profile: &RiProfile1,
    length: f64,
    input: &[Complex64],
    wavelength: f64,
    opts: &BpmOptions,
) -> Result<PropagationResult> {
    let samples = profile.samples.clone();
    propagate(
        profile.grid,
        profile.n_clad,
        length,
        |_, n| n.copy_from_slice(&samples),
        input,
        wavelength,
        opts,
    )
}

/// Pre-factored Crank-Nicolson step for `∂E/∂z = (i/2k) ∂²E/∂x²` with
/// zero field beyond the grid.
struct CrankNicolson {
    r: Complex64,
    /// forward-elimination multipliers and inverse pivots
    c_prime: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl CrankNicolson {
    fn new(n: usize, dx: f64, k: f64, dz: f64) -> Self {
        let r = Complex64::new(0.0, dz / (4.0 * k * dx * dx));
        let a = -r;
        let b = Complex64::new(1.0, 0.0) + 2.0 * r;
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let m = if i == 0 { b } else { b - a * prev };
            inv_pivot[i] = 1.0 / m;
            c_prime[i] = if i + 1 < n { -r * inv_pivot[i] } else { Complex64::new(0.0, 0.0) };
            prev = c_prime[i];
        }
        Self { r, c_prime, inv_pivot }
    }

    fn step(&self, e: &mut [Complex64], rhs: &mut [Complex64]) {
        let n = e.len();
        if n == 0 {
            return;
        }
        let r = self.r;
        let diag = Complex64::new(1.0, 0.0) - 2.0 * r;
        for i in 0..n {
            let left = if i > 0 { e[i - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if i + 1 < n { e[i + 1] } else { Complex64::new(0.0, 0.0) };
            rhs[i] = diag * e[i] + r * (left + right);
        }
        // sub-diagonal entries are -r
        e[0] = rhs[0] * self.inv_pivot[0];
        for i in 1..n {
            e[i] = (rhs[i] + r * e[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            let next = e[i + 1];
            e[i] -= self.c_prime[i] * next;
        }
    }
}
