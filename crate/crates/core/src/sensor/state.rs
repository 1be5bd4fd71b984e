use num_complex::Complex64;

use std::f64::consts::FRAC_PI_2;

pub(crate) type Mat2 = [[Complex64; 2]; 2];

pub(crate) const IDENTITY: Mat2 = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

pub(crate) fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `exp(−i·angle/2·(cos φ σx + sin φ σy))`.
pub(crate) fn rotation_matrix(angle: f64, phase: f64) -> Mat2 {
    let (s, c) = (0.5 * angle).sin_cos();
    let mi = Complex64::new(0.0, -s);
    [
        [Complex64::new(c, 0.0), mi * Complex64::from_polar(1.0, -phase)],
        [mi * Complex64::from_polar(1.0, phase), Complex64::new(c, 0.0)],
    ]
}

/// Amplitudes on `|0⟩, |1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amp: [Complex64; 2],
}

impl QubitState {
    pub fn ground() -> Self {
        Self {
            amp: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        }
    }

    pub fn excited() -> Self {
        Self {
            amp: [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        }
    }

    /// Equal superposition prepared by a π/2 pulse about x from `|0⟩`.
    pub fn prepared() -> Self {
        apply_rotation(&Self::ground(), FRAC_PI_2, 0.0)
    }

    pub fn norm(&self) -> f64 {
        (self.amp[0].norm_sqr() + self.amp[1].norm_sqr()).sqrt()
    }

    pub(crate) fn apply(&self, m: &Mat2) -> Self {
        Self {
            amp: [
                m[0][0] * self.amp[0] + m[0][1] * self.amp[1],
                m[1][0] * self.amp[0] + m[1][1] * self.amp[1],
            ],
        }
    }

    /// Population of `|1⟩`.
    pub fn excited_population(&self) -> f64 {
        self.amp[1].norm_sqr()
    }

    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        (self.amp[0].conj() * other.amp[0] + self.amp[1].conj() * other.amp[1]).norm()
    }
}

pub fn apply_rotation(s: &QubitState, angle: f64, phase: f64) -> QubitState {
    s.apply(&rotation_matrix(angle, phase))
}

/// Relative phase `e^{−iδt}` on `|1⟩`.
pub fn free_evolve(s: &QubitState, duration: f64, delta: f64) -> QubitState {
    QubitState {
        amp: [s.amp[0], s.amp[1] * Complex64::from_polar(1.0, -delta * duration)],
    }
}

/// Phase of the physical analysis π/2 pulse that reads out basis `phi` in
/// the convention `p₁ = (1 + sin(θ − φ))/2`.
pub fn analysis_phase(phi: f64) -> f64 {
    -phi - FRAC_PI_2
}

/// Probability of outcome 1 after the analysis pulse for basis `phi`.
///
/// For the prepared state after a free phase θ this is
/// `(1 + sin(θ − φ))/2`.
pub fn measure(s: &QubitState, phi: f64) -> f64 {
    apply_rotation(s, FRAC_PI_2, analysis_phase(phi)).excited_population()
}

/// Closed form of [`measure`] after a free phase `theta`.
pub fn convention_probability(theta: f64, phi: f64) -> f64 {
    0.5 * (1.0 + (theta - phi).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pi_pulse_flips_the_ground_state() {
        let s = apply_rotation(&QubitState::ground(), PI, 0.0);
        assert!((s.fidelity(&QubitState::excited()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_pi_gives_the_expected_amplitudes() {
        let s = QubitState::prepared();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amp[0] - Complex64::new(r, 0.0)).norm() < 1e-12);
        assert!((s.amp[1] - Complex64::new(0.0, -r)).norm() < 1e-12);
    }

    #[test]
    fn two_half_pulses_make_a_pi_pulse() {
        for phase in [0.0, 0.3, FRAC_PI_2, 2.0] {
            let a = mat_mul(&rotation_matrix(FRAC_PI_2, phase), &rotation_matrix(FRAC_PI_2, phase));
            let b = rotation_matrix(PI, phase);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn free_evolution_is_a_ramsey_fringe() {
        let s = QubitState::prepared();
        assert_eq!(free_evolve(&s, 5.0, 0.0), s);
        let back = free_evolve(&s, 1.0, 2.0 * PI);
        assert!((back.fidelity(&s) - 1.0).abs() < 1e-12);
        // θ = π reverses the fringe
        let p0 = measure(&free_evolve(&s, 1.0, 0.3), 0.0);
        let p1 = measure(&free_evolve(&s, 1.0, 0.3 + PI), 0.0);
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_follows_the_convention() {
        let s = QubitState::prepared();
        assert!((measure(&s, 0.0) - 0.5).abs() < 1e-12);
        assert!((measure(&free_evolve(&s, 1.0, FRAC_PI_2), 0.0) - 1.0).abs() < 1e-12);
        for k in 0..40 {
            let theta = 0.17 * k as f64;
            let t = free_evolve(&s, 1.0, theta);
            for phi in [0.0, 0.4, FRAC_PI_2, PI, 4.0] {
                let p = measure(&t, phi);
                assert!((p - convention_probability(theta, phi)).abs() < 1e-12);
                assert!((p + measure(&t, phi + PI) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotations_preserve_norm() {
        let mut s = QubitState::ground();
        for k in 0..200 {
            s = apply_rotation(&s, 0.37 * k as f64, 1.1 * k as f64);
            s = free_evolve(&s, 0.5, 0.9);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}
