//! Collective dipole-dipole decay and photon recoil in sub-wavelength atomic
//! arrays.
//!
//! The crate models two-level atoms in the low-intensity (single-excitation)
//! limit. Atoms couple through the free-space dyadic Green's function; the
//! density matrix is split into the ground coefficient `rho_gg`, the optical
//! coherences `w`, `w_tilde` and the excited block `rho_tilde`, each of which
//! depends on an unprimed (ket) and a primed (bra) copy of the atomic
//! coordinates. Recoil momentum and kinetic energy follow from finite
//! differences of `rho_gg` with respect to the primed coordinates.
//!
//! Units are fixed throughout: lengths in resonant wavelengths (so `k = 2π`),
//! rates in single-atom decay rates `Γ = 1`, time in `1/Γ`, momenta in `ħk`
//! and energies in recoil energies `E_r = ħ²k²/2m`.

pub mod analytic;
pub mod eigenmodes;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod greens;
pub mod observables;
pub mod recoil;
pub mod units;

pub use error::{Error, ErrorKind, Result};

/// Complex scalar used everywhere in the crate.
pub type C64 = num_complex::Complex64;

/// Real 3-vector (positions, offsets), in wavelengths.
pub type Vec3 = [f64; 3];

/// Complex 3-vector (dipole orientations).
pub type CVec3 = [C64; 3];

pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub(crate) fn dot_c(a: &CVec3, b: &CVec3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn conj3(a: &CVec3) -> CVec3 {
    [a[0].conj(), a[1].conj(), a[2].conj()]
}

#[inline]
pub(crate) fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn norm3(a: &Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}
