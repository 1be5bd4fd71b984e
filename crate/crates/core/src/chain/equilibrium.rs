use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::AxialPotential;
use crate::error::{Error, Result};

pub const MAX_NEWTON_ITERATIONS: usize = 10_000;
const GRADIENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainConfig {
    /// µm, ascending.
    pub positions: Vec<f64>,
    /// Positions in units of the potential's length scale.
    pub dimensionless: Vec<f64>,
    pub spacings: Vec<f64>,
    /// RMS deviation of the spacings from their mean, µm.
    pub spacing_rms: f64,
    pub length_scale: f64,
    /// Total energy in `κ/µm`.
    pub energy: f64,
    pub iterations: usize,
}

impl ChainConfig {
    pub fn mean_spacing(&self) -> f64 {
        mean(&self.spacings)
    }
}

pub(super) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub(super) fn rms_deviation(v: &[f64]) -> f64 {
    let m = mean(v);
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|s| (s - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

pub fn equilibrium_positions(n: usize, pot: &AxialPotential) -> Result<ChainConfig> {
    pot.validate()?;
    let u = pot.length_scale();
    let (a, b) = pot.dimensionless();
    let (xi, iterations) = equilibrium_dimensionless(n, a, b)?;
    let positions: Vec<f64> = xi.iter().map(|v| v * u).collect();
    let spacings: Vec<f64> = positions.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(ChainConfig {
        spacing_rms: rms_deviation(&spacings),
        energy: energy(&xi, a, b) / u,
        dimensionless: xi,
        positions,
        spacings,
        length_scale: u,
        iterations,
    })
}

fn energy(xi: &[f64], a: f64, b: f64) -> f64 {
    let mut e = 0.0;
    for (i, &x) in xi.iter().enumerate() {
        let x2 = x * x;
        e += a * x2 + b * x2 * x2;
        for &y in &xi[i + 1..] {
            e += 1.0 / (y - x).abs();
        }
    }
    e
}

fn gradient(xi: &[f64], a: f64, b: f64) -> DVector<f64> {
    let n = xi.len();
    DVector::from_fn(n, |i, _| {
        let x = xi[i];
        let mut g = 2.0 * a * x + 4.0 * b * x * x * x;
        for (j, &y) in xi.iter().enumerate() {
            if j != i {
                let d = x - y;
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn hessian(xi: &[f64], a: f64, b: f64) -> DMatrix<f64> {
    let n = xi.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 2.0 * a + 12.0 * b * xi[i] * xi[i];
        for j in 0..n {
            if j != i {
                let c = 2.0 / (xi[i] - xi[j]).abs().powi(3);
                h[(i, i)] += c;
                h[(i, j)] = -c;
            }
        }
    }
    h
}

/// Equispaced seed whose spacing minimises the energy.
fn seed(n: usize, a: f64, b: f64) -> Vec<f64> {
    let place = |s: f64| -> Vec<f64> { (0..n).map(|i| s * (i as f64 - 0.5 * (n as f64 - 1.0))).collect() };
    let f = |t: f64| energy(&place(t.exp()), a, b);
    let (mut lo, mut hi) = (-8.0_f64, 4.0_f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    place((0.5 * (lo + hi)).exp())
}

/// Minimises `Σ(aξ² + bξ⁴) + Σ 1/|ξᵢ−ξⱼ|` by damped Newton iteration.
/// Returns the sorted positions and the iteration count.
pub fn equilibrium_dimensionless(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, usize)> {
    if n == 0 {
        return Err(Error::invalid("n", "at least one ion is required"));
    }
    if !(b > 0.0 || (b == 0.0 && a > 0.0)) {
        return Err(Error::invalid("potential", "not confining"));
    }
    if n == 1 && a >= 0.0 {
        return Ok((vec![0.0], 0));
    }
    let mut xi = seed(n, a, b);
    let mut e = energy(&xi, a, b);
    let mut g = gradient(&xi, a, b);
    let mut mu = 0.0;
    for it in 0..MAX_NEWTON_ITERATIONS {
        if g.norm() < GRADIENT_TOLERANCE {
            return Ok((xi, it));
        }
        let mut h = hessian(&xi, a, b);
        let scale = h.diagonal().amax();
        for i in 0..n {
            h[(i, i)] += mu * scale;
        }
        let step = match h.cholesky() {
            Some(c) => -c.solve(&g),
            None => {
                mu = if mu == 0.0 { 1e-8 } else { mu * 10.0 };
                continue;
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered {
                let et = energy(&trial, a, b);
                // energies are O(n²); allow rounding-level increases near the minimum
                if et <= e + 1e-14 * e.abs().max(1.0) {
                    xi = trial;
                    e = et;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if accepted {
            mu *= 0.1;
            if mu < 1e-12 {
                mu = 0.0;
            }
            g = gradient(&xi, a, b);
        } else {
            mu = if mu == 0.0 { 1e-6 } else { mu * 10.0 };
            if mu > 1e12 {
                return Err(Error::Equilibrium {
                    iterations: it,
                    gradient: g.norm(),
                });
            }
        }
    }
    Err(Error::Equilibrium {
        iterations: MAX_NEWTON_ITERATIONS,
        gradient: g.norm(),
    })
}
