//! Unit conventions.
//!
//! Every quantity in the crate is dimensionless:
//!
//! | quantity | unit |
//! |----------|------|
//! | length   | resonant wavelength λ |
//! | rate     | single-atom decay rate Γ |
//! | time     | 1/Γ |
//! | momentum | ħk |
//! | energy   | recoil energy E_r = ħ²k²/2m |
//!
//! Physical constants only appear in [`Species`], which bridges recoil
//! energies to absolute frequencies.

use std::f64::consts::PI;

/// Resonant wavelength.
pub const WAVELENGTH: f64 = 1.0;

/// Resonant wavenumber, `k = 2π/λ`.
pub const K: f64 = 2.0 * PI / WAVELENGTH;

/// Single-atom decay rate.
pub const GAMMA: f64 = 1.0;

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Atom species data needed to convert recoil energies to absolute units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Species {
    pub mass_kg: f64,
    pub wavelength_m: f64,
}

impl Species {
    /// ⁸⁷Rb on the 780 nm D2 line.
    pub const RB87_D2: Species = Species {
        mass_kg: 86.909_180_527 * ATOMIC_MASS_UNIT,
        wavelength_m: 780.241e-9,
    };

    /// Recoil energy expressed as a frequency, `E_r / h = h / (2 m λ²)`, in Hz.
    pub fn recoil_frequency_hz(&self) -> f64 {
        PLANCK / (2.0 * self.mass_kg * self.wavelength_m * self.wavelength_m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_times_wavelength_is_two_pi() {
        assert_eq!(K * WAVELENGTH, 2.0 * PI);
    }

    #[test]
    fn rubidium_recoil_frequency() {
        // 3.77 kHz is the textbook value for the Rb D2 line.
        let f = Species::RB87_D2.recoil_frequency_hz();
        assert!((f - 3771.0).abs() < 5.0, "{f}");
    }
}
