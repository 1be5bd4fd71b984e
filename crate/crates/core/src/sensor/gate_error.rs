use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the gate beams reach the ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AddressingMode {
    /// One addressed beam with a global partner: Rabi ratio `√ε`.
    SingleGlobal,
    /// Both beams addressed: Rabi ratio `ε`.
    BothAddressed,
}

/// Flip probability of a neighbour during a target π pulse,
/// `sin²(π·r/2)`.
pub fn pulse_error(eps: f64, mode: AddressingMode) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("crosstalk", format!("{eps} outside [0, 1]")));
    }
    let r = match mode {
        AddressingMode::SingleGlobal => eps.sqrt(),
        AddressingMode::BothAddressed => eps,
    };
    Ok((FRAC_PI_2 * r).sin().powi(2))
}

/// Error per channel from its nearest neighbours. `pairs[i]` is the
/// cross-talk between channels `i` and `i + 1`, so edge channels collect a
/// single term.
pub fn neighbor_error(pairs: &[f64], mode: AddressingMode) -> Result<Vec<f64>> {
    let terms = pairs.iter().map(|&e| pulse_error(e, mode)).collect::<Result<Vec<_>>>()?;
    let n = pairs.len() + 1;
    Ok((0..n)
        .map(|i| {
            let left = if i > 0 { terms[i - 1] } else { 0.0 };
            let right = terms.get(i).copied().unwrap_or(0.0);
            left + right
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_orders() {
        assert_eq!(pulse_error(0.0, AddressingMode::SingleGlobal).unwrap(), 0.0);
        let s = pulse_error(1e-3, AddressingMode::SingleGlobal).unwrap();
        let b = pulse_error(1e-3, AddressingMode::BothAddressed).unwrap();
        assert!((s - 2.4649e-3).abs() < 1e-6, "{s}");
        assert!((b - 2.4674e-6).abs() < 1e-9, "{b}");
    }

    #[test]
    fn monotone_and_ordered() {
        let mut last = (0.0, 0.0);
        for k in 1..=100 {
            let e = k as f64 / 100.0;
            let s = pulse_error(e, AddressingMode::SingleGlobal).unwrap();
            let b = pulse_error(e, AddressingMode::BothAddressed).unwrap();
            assert!(s >= last.0 && b >= last.1);
            assert!(b <= s);
            last = (s, b);
        }
    }

    #[test]
    fn edges_have_one_neighbour() {
        let e = neighbor_error(&[1e-3; 7], AddressingMode::SingleGlobal).unwrap();
        assert_eq!(e.len(), 8);
        assert!((e[0] - e[1] / 2.0).abs() < 1e-15);
        assert!((e[7] - e[6] / 2.0).abs() < 1e-15);
        assert!(neighbor_error(&[1.5], AddressingMode::BothAddressed).is_err());
    }
}
