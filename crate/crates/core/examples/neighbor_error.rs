//! Error on neighbouring qubits during a target pi pulse.

use ion_addressing::sensor::{neighbor_error, pulse_error, AddressingMode};

fn main() -> ion_addressing::Result<()> {
    println!("eps      single+global  both addressed");
    for eps in [1e-5, 1e-4, 5e-4, 1e-3, 1e-2] {
        println!(
            "{eps:<8.0e} {:<14.3e} {:.3e}",
            pulse_error(eps, AddressingMode::SingleGlobal)?,
            pulse_error(eps, AddressingMode::BothAddressed)?
        );
    }
    let pairs = [4e-4, 6e-4, 5e-4, 3e-4, 7e-4, 5e-4, 2e-4];
    for mode in [AddressingMode::SingleGlobal, AddressingMode::BothAddressed] {
        let e: Vec<String> = neighbor_error(&pairs, mode)?.iter().map(|v| format!("{v:.2e}")).collect();
        println!("{mode:?}: {}", e.join(" "));
    }
    Ok(())
}
