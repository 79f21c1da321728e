//! Summary quantities built on the recoil and steady-state machinery.

use std::f64::consts::PI;

use serde::Serialize;

use crate::analytic::{steady_coefficients, GroundPopulation, SteadyRoute};
use crate::eigenmodes::{mode_contribution, EigenmodeSet};
use crate::evolution::{DriveSpec, ShiftedConfiguration, Trajectory};
use crate::geometry::{build_cavity, AtomArray, CavitySpec};
use crate::recoil::{RecoilMode, RecoilResult};
use crate::units::{Species, PLANCK};
use crate::{Error, Result, C64};

/// Photons incident per lattice site per `1/Γ` for a plane wave of Rabi
/// frequency `Ω` on a lattice of spacing `d`: `(2π/3) d² Ω²`.
pub fn photon_flux(spacing: f64, rabi: f64) -> Result<f64> {
    if !(spacing.is_finite() && spacing > 0.0 && rabi.is_finite() && rabi >= 0.0) {
        return Err(Error::InvalidArgument(format!("flux needs d > 0 and Ω ≥ 0 (d = {spacing}, Ω = {rabi})")));
    }
    Ok(2.0 * PI / 3.0 * spacing * spacing * rabi * rabi)
}

/// Rabi frequency giving a target flux per site.
pub fn rabi_for_flux(spacing: f64, flux: f64) -> Result<f64> {
    if !(spacing > 0.0 && flux >= 0.0) {
        return Err(Error::InvalidArgument(format!("d = {spacing}, flux = {flux}")));
    }
    Ok((flux * 3.0 / (2.0 * PI)).sqrt() / spacing)
}

/// Photons per site delivered by a Gaussian pulse `Ω₀ exp(−t²/t_w²)`:
/// `(2π/3) d² Ω₀² t_w √(π/2)`.
pub fn pulse_photons(spacing: f64, rabi: f64, width: f64) -> Result<f64> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::InvalidArgument(format!("pulse width {width}")));
    }
    Ok(photon_flux(spacing, rabi)? * width * (PI / 2.0).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct Reflectance {
    pub per_atom: Vec<f64>,
    pub average: f64,
    /// Average with the outermost ring of the lattice removed.
    pub interior_average: Option<f64>,
}

/// `ṗ_z / (2ħk ν)` per atom from a rate-mode recoil map.
pub fn reflectance(recoil: &RecoilResult, flux: f64, array: &AtomArray) -> Result<Reflectance> {
    if recoil.mode != RecoilMode::Rate {
        return Err(Error::InvalidArgument("reflectance needs steady-state recoil rates".into()));
    }
    if !(flux.is_finite() && flux > 0.0) {
        return Err(Error::InvalidArgument(format!("photon flux {flux} must be positive")));
    }
    let per_atom: Vec<f64> = recoil.momentum.iter().map(|p| p[2] / (2.0 * flux)).collect();
    let average = mean(per_atom.iter().copied());
    let interior: Vec<f64> = per_atom.iter().enumerate().filter(|(i, _)| !array.is_edge(*i)).map(|(_, r)| *r).collect();
    let interior_average = (!interior.is_empty() && interior.len() < per_atom.len()).then(|| mean(interior.into_iter()));
    Ok(Reflectance { per_atom, average, interior_average })
}

/// Kinetic energy (summed over axes) per incident photon, per atom.
pub fn energy_per_photon(recoil: &RecoilResult, photons: f64) -> Result<Vec<f64>> {
    if !(photons.is_finite() && photons > 0.0) {
        return Err(Error::InvalidArgument(format!("photon count {photons} must be positive")));
    }
    Ok((0..recoil.kinetic.len()).map(|i| recoil.kinetic_total(i) / photons).collect())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Pearson correlation of two equally long samples.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let (ma, mb) = (mean(a.iter().copied()), mean(b.iter().copied()));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Trapezoidal `∫ ρ̃_ii dt` per atom.
pub fn excitation_integral(trajectory: &Trajectory) -> Result<Vec<f64>> {
    let t = &trajectory.times;
    if t.len() < 2 || trajectory.populations.len() != t.len() {
        return Err(Error::InvalidArgument("excitation integral needs a sampled trajectory".into()));
    }
    let n = trajectory.populations[0].len();
    let mut out = vec![0.0; n];
    for k in 1..t.len() {
        let h = 0.5 * (t[k] - t[k - 1]);
        for (i, o) in out.iter_mut().enumerate() {
            *o += h * (trajectory.populations[k][i] + trajectory.populations[k - 1][i]);
        }
    }
    Ok(out)
}

/// `⟨n⟩ = ΔK / (h f_t)` for a trap frequency `f_t` in Hz.
pub fn vibrational_quantum(kinetic: f64, trap_hz: f64, species: Option<&Species>) -> Result<f64> {
    let species = species.ok_or_else(|| Error::MissingSpecies("an atom mass and wavelength are required".into()))?;
    if !(trap_hz.is_finite() && trap_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("trap frequency {trap_hz}")));
    }
    if !(species.mass_kg > 0.0 && species.wavelength_m > 0.0) {
        return Err(Error::MissingSpecies(format!("invalid species {species:?}")));
    }
    Ok(kinetic * species.recoil_frequency_hz() * PLANCK / (PLANCK * trap_hz))
}

/// Mode weights `|Σ_i Ω_i V_iα / (𝒢_α − iδ)|²` on a detuning grid;
/// `out[α][k]` belongs to `detunings[k]`.
pub fn mode_curves(modes: &EigenmodeSet, drive: &[C64], detunings: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(detunings.len()); modes.len()];
    for &d in detunings {
        for w in mode_contribution(modes, drive, d)? {
            out[w.mode].push(w.weight);
        }
    }
    Ok(out)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximise `f` on `[lo, hi]`: coarse scan, then golden-section refinement
/// of the best bracket.
pub fn maximize<F>(f: F, lo: f64, hi: f64, coarse: usize, tolerance: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || coarse < 3 {
        return Err(Error::InvalidArgument(format!("scan [{lo}, {hi}] with {coarse} points")));
    }
    let xs: Vec<f64> = (0..coarse).map(|k| lo + (hi - lo) * k as f64 / (coarse - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let best = argmax(&ys);
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(coarse - 1)]);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tolerance {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let (y, yb) = (f(x)?, ys[best]);
    Ok(if y >= yb { (x, y) } else { (xs[best], yb) })
}

/// Detuning maximising `score` (e.g. the total scattering rate).
pub fn peak_detuning<F>(score: F, lo: f64, hi: f64, coarse: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    maximize(score, lo, hi, coarse, 1e-6).map(|(x, _)| x)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct FinesseSweep {
    pub detuning: f64,
    pub separations: Vec<f64>,
    /// Steady `Σ ρ̃_ii` at each separation.
    pub intensity: Vec<f64>,
    pub peak_separation: f64,
    pub fwhm: f64,
    /// `(λ/2) / FWHM`.
    pub finesse: f64,
}

/// Steady total excited population of a cavity under a weak axial drive.
pub fn cavity_intensity(template: &CavitySpec, separation: f64, drive: &DriveSpec) -> Result<f64> {
    let cavity = std::sync::Arc::new(build_cavity(&template.with_separation(separation))?);
    let sol = steady_coefficients(&ShiftedConfiguration::new(cavity), drive, SteadyRoute::LinearSolve, GroundPopulation::Unity)?;
    Ok(sol.populations().iter().map(|p| p.re).sum())
}

/// FWHM of sampled data by linear interpolation around the global maximum.
pub fn fwhm(xs: &[f64], ys: &[f64]) -> Result<(usize, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Resonance("need at least three samples".into()));
    }
    let peak = argmax(ys);
    if ys[peak] <= 0.0 {
        return Err(Error::Resonance("no peak in range".into()));
    }
    if peak == 0 || peak == ys.len() - 1 {
        return Err(Error::Resonance(format!("peak at grid edge (x = {})", xs[peak])));
    }
    let half = 0.5 * ys[peak];
    let cross = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    let left = (1..=peak).rev().find(|&i| ys[i - 1] < half).map(|i| cross(i - 1, i));
    let right = (peak..ys.len() - 1).find(|&i| ys[i + 1] < half).map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok((peak, r - l)),
        _ => Err(Error::Resonance("half maximum not bracketed by the grid".into())),
    }
}

/// Finesse from an explicit separation grid.
pub fn finesse(template: &CavitySpec, drive: &DriveSpec, separations: &[f64]) -> Result<FinesseSweep> {
    let intensity: Vec<f64> = separations.iter().map(|&l| cavity_intensity(template, l, drive)).collect::<Result<_>>()?;
    let (peak, width) = fwhm(separations, &intensity)?;
    Ok(FinesseSweep {
        detuning: drive.detuning,
        separations: separations.to_vec(),
        peak_separation: separations[peak],
        intensity,
        fwhm: width,
        finesse: 0.5 / width,
    })
}

/// Finesse without a preset grid: locate the peak in `[lo, hi]`, bisect for
/// the half-maximum points, then measure on a uniform grid of `points`
/// samples spanning twice the estimated width.
pub fn finesse_adaptive(template: &CavitySpec, drive: &DriveSpec, lo: f64, hi: f64, coarse: usize, points: usize) -> Result<FinesseSweep> {
    let f = |l: f64| cavity_intensity(template, l, drive);
    let (peak_l, peak_i) = maximize(f, lo, hi, coarse, 1e-9 * hi.abs().max(1.0))?;
    if peak_l <= lo || peak_l >= hi {
        return Err(Error::Resonance(format!("peak at scan edge (L = {peak_l})")));
    }
    let half = 0.5 * peak_i;
    let crossing = |dir: f64| -> Result<f64> {
        let mut step = 1e-6_f64.max(1e-7 * peak_l.abs());
        let mut inside = peak_l;
        loop {
            let x = peak_l + dir * step;
            if (dir < 0.0 && x < lo) || (dir > 0.0 && x > hi) {
                return Err(Error::Resonance("half maximum outside the scan range".into()));
            }
            if f(x)? < half {
                let mut outside = x;
                for _ in 0..60 {
                    let m = 0.5 * (inside + outside);
                    if f(m)? < half {
                        outside = m;
                    } else {
                        inside = m;
                    }
                    if (outside - inside).abs() < 1e-4 * step {
                        break;
                    }
                }
                return Ok(0.5 * (inside + outside));
            }
            inside = x;
            step *= 2.0;
        }
    };
    let (l, r) = (crossing(-1.0)?, crossing(1.0)?);
    let width = r - l;
    let grid_lo = (peak_l - 2.0 * width).max(lo);
    let grid_hi = (peak_l + 2.0 * width).min(hi);
    let n = points.max(11);
    let mut grid: Vec<f64> = (0..n).map(|k| grid_lo + (grid_hi - grid_lo) * k as f64 / (n - 1) as f64).collect();
    grid.push(peak_l);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    finesse(template, drive, &grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{propagate, CoefficientState, Rk2, StopCondition};
    use crate::geometry::{build_planar_array, e_plus};
    use std::sync::Arc;

    #[test]
    fn flux_law() {
        let nu = photon_flux(0.68, 1.364e-2).unwrap();
        assert!((nu - 1.8e-4).abs() < 1e-6, "{nu}");
        assert!((rabi_for_flux(0.68, 1.8e-4).unwrap() - 1.364e-2).abs() < 1e-5);
        assert_eq!(photon_flux(0.68, 0.0).unwrap(), 0.0);
        let r = photon_flux(0.8, 0.02).unwrap() / photon_flux(0.8, 0.01).unwrap();
        assert!((r - 4.0).abs() < 1e-12);
        assert!(photon_flux(-1.0, 0.1).is_err());
    }

    #[test]
    fn pulse_photon_count() {
        // Direct quadrature of (2π/3) d² Ω₀² ∫ exp(−2t²/t_w²) dt.
        let (d, om, tw) = (0.68, 0.02, 16.0);
        let h = 1e-3;
        let integral: f64 = (-200_000..=200_000).map(|k| (-2.0 * (k as f64 * h / tw).powi(2)).exp() * h).sum();
        let expected = 2.0 * PI / 3.0 * d * d * om * om * integral;
        assert!((pulse_photons(d, om, tw).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn vibrational_numbers() {
        let rb = Species::RB87_D2;
        assert!((vibrational_quantum(4.0, 10e3, Some(&rb)).unwrap() - 1.5).abs() < 0.05);
        assert!((vibrational_quantum(4.0, 100e3, Some(&rb)).unwrap() - 0.15).abs() < 0.005);
        assert!((vibrational_quantum(900.0, 100e3, Some(&rb)).unwrap() - 35.0).abs() < 2.0);
        assert!(matches!(vibrational_quantum(1.0, 1e4, None), Err(Error::MissingSpecies(_))));
    }

    #[test]
    fn single_atom_excitation_integral() {
        let a = Arc::new(build_planar_array(1, 1, 0.5, e_plus()).unwrap());
        let cfg = ShiftedConfiguration::new(a);
        let s = CoefficientState::pure_excitation(&[C64::new(1.0, 0.0)], 0.0).unwrap();
        let stop = StopCondition::Decayed { epsilon: 1e-9, max_time: 1e3 };
        let p = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 1e-3 }, &stop, Some(5)).unwrap();
        let integral = excitation_integral(p.trajectory.as_ref().unwrap()).unwrap();
        assert!((integral[0] - 1.0).abs() < 1e-4, "{integral:?}");
        assert!(excitation_integral(&Trajectory::default()).is_err());
    }

    #[test]
    fn fwhm_of_a_lorentzian() {
        let xs: Vec<f64> = (0..2001).map(|k| -1.0 + k as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + (x / 0.05).powi(2))).collect();
        let (peak, w) = fwhm(&xs, &ys).unwrap();
        assert_eq!(peak, 1000);
        assert!((w - 0.1).abs() < 1e-4);
        let edge: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!(fwhm(&xs, &edge).is_err());
        let wide: Vec<f64> = xs.iter().map(|x| 1.0 / (1.0 + (x / 5.0).powi(2))).collect();
        assert!(fwhm(&xs, &wide).is_err());
    }

    #[test]
    fn golden_section_finds_maximum() {
        let (x, y) = maximize(|x| Ok(-(x - 0.3137).powi(2) + 2.0), -1.0, 1.0, 21, 1e-9).unwrap();
        assert!((x - 0.3137).abs() < 1e-7);
        assert!((y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_limits() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((correlation(&a, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlation(&a, &[-1.0, -2.0, -3.0, -4.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn mode_curve_peaks_near_shift() {
        let a = build_planar_array(3, 3, 0.4, e_plus()).unwrap();
        let g = crate::greens::assemble_greens(
            crate::greens::Coordinates::Unprimed(a.positions()),
            crate::greens::Coordinates::Unprimed(a.positions()),
            a.orientations(),
        )
        .unwrap();
        let modes = crate::eigenmodes::decompose(&g).unwrap();
        let drive = DriveSpec::cw(0.01, 0.0).spatial(a.positions()).unwrap();
        let grid: Vec<f64> = (0..4001).map(|k| -4.0 + k as f64 * 2e-3).collect();
        let curves = mode_curves(&modes, &drive, &grid).unwrap();
        let alpha = (0..9).max_by(|&x, &y| curves[x].iter().cloned().fold(0.0, f64::max).partial_cmp(&curves[y].iter().cloned().fold(0.0, f64::max)).unwrap()).unwrap();
        let peak = grid[argmax(&curves[alpha])];
        assert!((peak - modes.shift(alpha)).abs() < 2e-3);
    }
}
