//! Closed-form evaluators.
//!
//! * [`EigenDecay`]: `rho_gg(∞)` after an undriven decay, from the eigenmodes
//!   of the unprimed and primed coupling matrices.
//! * [`kz_closed_form`]: out-of-plane recoil energy of an eigenstate decay.
//! * [`steady_coefficients`] / [`steady_rho_gg_dot`]: weak cw drive steady
//!   state and the linear growth rate of `rho_gg`.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenmodes::{decompose, EigenmodeSet};
use crate::evolution::{Couplings, DriveSpec, ShiftedConfiguration, TemporalProfile};
use crate::geometry::AtomArray;
use crate::greens::{assemble_greens, mixed_decay_kernel, Coordinates};
use crate::recoil::{EvaluatorKind, RhoGGEvaluator};
use crate::{Error, Result, C64, I};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Poles `|𝒢_α − iδ|` below this are reported as singular.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// `ΔK_z / E_r = (2/5) Γ/γ`.
pub fn kz_closed_form(gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Domain(format!("decay rate {gamma} must be positive")));
    }
    Ok(0.4 / gamma)
}

fn unprimed_modes(config: &ShiftedConfiguration) -> Result<EigenmodeSet> {
    let u = config.unprimed();
    decompose(&assemble_greens(Coordinates::Unprimed(&u), Coordinates::Unprimed(&u), config.base().orientations())?)
}

fn primed_modes(config: &ShiftedConfiguration) -> Result<EigenmodeSet> {
    let p = config.primed();
    decompose(&assemble_greens(Coordinates::Primed(&p), Coordinates::Primed(&p), config.base().orientations())?)
}

fn to_complex(m: &Mat<f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

fn conj(m: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

/// Per-shift pieces shared by every initial state.
struct DecayKernel {
    /// `K = Vᵀ (2Re G′) U*`.
    k: Mat<C64>,
    /// `1 / (𝒢_α + 𝒢″*_α′)`.
    inv_denominator: Mat<C64>,
    u: Mat<C64>,
}

fn decay_kernel(v_modes: &EigenmodeSet, config: &ShiftedConfiguration) -> Result<DecayKernel> {
    let u_modes = primed_modes(config)?;
    let mixed = to_complex(&mixed_decay_kernel(&config.unprimed(), &config.primed(), config.base().orientations())?);
    let u_conj = conj(u_modes.vectors());
    let k = v_modes.vectors().transpose() * &mixed * &u_conj;
    let n = v_modes.len();
    let (gv, gu) = (v_modes.values(), u_modes.values());
    let min_gamma = gv.iter().chain(gu).map(|v| v.re).fold(f64::INFINITY, f64::min);
    let mut inv_denominator = Mat::zeros(n, n);
    for b in 0..n {
        for a in 0..n {
            let den = gv[a] + gu[b].conj();
            if den.re < min_gamma - 1e-10 || den.re <= 0.0 {
                return Err(Error::Numerical(format!("decay denominator {den} for modes ({a}, {b}) has no positive real part")));
            }
            inv_denominator[(a, b)] = den.inv();
        }
    }
    Ok(DecayKernel { k, inv_denominator, u: u_modes.vectors().clone() })
}

/// `rho_gg(∞)` for an undriven decay from a given excited block.
#[derive(Debug, Clone)]
pub struct EigenDecay {
    base: Arc<AtomArray>,
    modes: EigenmodeSet,
    initial: Mat<C64>,
    rho_gg0: C64,
}

impl EigenDecay {
    /// Start from an arbitrary excited block `ρ̃(0)`, `rho_gg(0) = 0`.
    pub fn new(base: Arc<AtomArray>, initial: Mat<C64>) -> Result<Self> {
        let n = base.len();
        if initial.nrows() != n || initial.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: initial.nrows() });
        }
        let modes = unprimed_modes(&ShiftedConfiguration::new(base.clone()))?;
        Ok(EigenDecay { base, modes, initial, rho_gg0: ZERO })
    }

    /// Start from `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(base: Arc<AtomArray>, psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        if psi.len() != base.len() || norm == 0.0 {
            return Err(Error::InvalidArgument("pure state must be non-zero with one amplitude per atom".into()));
        }
        let rho = Mat::from_fn(psi.len(), psi.len(), |i, j| psi[i] * psi[j].conj() / norm);
        Self::new(base, rho)
    }

    /// Start from eigenmode `β` of the unprimed coupling matrix.
    pub fn eigenstate(base: Arc<AtomArray>, beta: usize) -> Result<Self> {
        let modes = unprimed_modes(&ShiftedConfiguration::new(base.clone()))?;
        if beta >= modes.len() {
            return Err(Error::InvalidArgument(format!("mode {beta} out of range")));
        }
        let v = modes.vector(beta);
        let s = modes.excitation_normalization(beta);
        let rho = Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj() * s);
        Ok(EigenDecay { base, modes, initial: rho, rho_gg0: ZERO })
    }

    pub fn modes(&self) -> &EigenmodeSet {
        &self.modes
    }

    fn modes_for(&self, config: &ShiftedConfiguration) -> Result<std::borrow::Cow<'_, EigenmodeSet>> {
        if config.unprimed().as_slice() == self.base.positions() {
            Ok(std::borrow::Cow::Borrowed(&self.modes))
        } else {
            Ok(std::borrow::Cow::Owned(unprimed_modes(config)?))
        }
    }
}

impl RhoGGEvaluator for EigenDecay {
    fn evaluate(&self, config: &ShiftedConfiguration) -> Result<C64> {
        if !Arc::ptr_eq(config.base(), &self.base) && config.base().positions() != self.base.positions() {
            return Err(Error::InvalidArgument("configuration built on a different array".into()));
        }
        let modes = self.modes_for(config)?;
        let dk = decay_kernel(&modes, config)?;
        // C = Vᵀ ρ̃(0) U*.
        let c = modes.vectors().transpose() * &self.initial * conj(&dk.u);
        let n = modes.len();
        let mut acc = self.rho_gg0;
        for b in 0..n {
            for a in 0..n {
                acc += dk.k[(a, b)] * c[(a, b)] * dk.inv_denominator[(a, b)];
            }
        }
        Ok(acc)
    }

    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::FinalState
    }

    fn base(&self) -> &Arc<AtomArray> {
        &self.base
    }
}

/// `rho_gg(∞)` for every eigenstate start at once, sharing one primed
/// eigendecomposition per configuration.
#[derive(Debug, Clone)]
pub struct EigenstateDecay {
    base: Arc<AtomArray>,
    modes: EigenmodeSet,
    /// Keep only the `α = α′ = β` term.
    pub dominant_only: bool,
}

impl EigenstateDecay {
    pub fn new(base: Arc<AtomArray>) -> Result<Self> {
        let modes = unprimed_modes(&ShiftedConfiguration::new(base.clone()))?;
        Ok(EigenstateDecay { base, modes, dominant_only: false })
    }

    pub fn modes(&self) -> &EigenmodeSet {
        &self.modes
    }

    pub fn base(&self) -> &Arc<AtomArray> {
        &self.base
    }

    /// One value per mode `β`, in the order of [`Self::modes`].
    pub fn evaluate_all(&self, config: &ShiftedConfiguration) -> Result<Vec<C64>> {
        if config.unprimed().as_slice() != self.base.positions() {
            return Err(Error::InvalidArgument("eigenstate decay supports primed shifts only".into()));
        }
        let dk = decay_kernel(&self.modes, config)?;
        let v = self.modes.vectors();
        // Q_{α′β} = conj((Uᵀ V_β)_{α′}).
        let q = conj(&(dk.u.transpose() * v));
        let n = self.modes.len();
        Ok((0..n)
            .map(|beta| {
                let norm = self.modes.excitation_normalization(beta);
                let sum: C64 = if self.dominant_only {
                    dk.k[(beta, beta)] * q[(beta, beta)] * dk.inv_denominator[(beta, beta)]
                } else {
                    (0..n).map(|ap| dk.k[(beta, ap)] * q[(ap, beta)] * dk.inv_denominator[(beta, ap)]).sum()
                };
                sum * norm
            })
            .collect())
    }

    /// Total (summed over atoms) recoil energy along `axis` for every
    /// eigenstate start, in `E_r`.
    pub fn kinetic_totals(&self, axis: usize, delta_r: f64) -> Result<Vec<f64>> {
        crate::recoil::check_step(delta_r)?;
        let n = self.base.len();
        let center = self.evaluate_all(&ShiftedConfiguration::new(self.base.clone()))?;
        let per_atom: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| -> Result<Vec<f64>> {
                let plus = self.evaluate_all(&ShiftedConfiguration::primed_shift(self.base.clone(), j, axis, delta_r)?)?;
                let minus =
                    self.evaluate_all(&ShiftedConfiguration::primed_shift(self.base.clone(), j, axis, -delta_r)?)?;
                Ok((0..n).map(|b| crate::recoil::kinetic_from_values(plus[b], center[b], minus[b], delta_r).re).collect())
            })
            .collect::<Result<_>>()?;
        Ok((0..n).map(|b| per_atom.iter().map(|row| row[b]).sum()).collect())
    }
}

/// What to use for `rho_gg` on the right-hand side of the steady equations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundPopulation {
    /// Low-intensity limit `rho_gg = 1`.
    #[default]
    Unity,
    Fixed { re: f64, im: f64 },
}

impl GroundPopulation {
    fn value(&self) -> C64 {
        match *self {
            GroundPopulation::Unity => C64::new(1.0, 0.0),
            GroundPopulation::Fixed { re, im } => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyRoute {
    /// Modal expansion over the eigenmodes of `G` and `G″`.
    #[default]
    Eigen,
    /// Direct LU solves of `(G − iδ) w = …` and `(G″* + iδ) w̃ = …`.
    LinearSolve,
}

#[derive(Debug, Clone)]
pub struct SteadyStateSolution {
    pub rho_gg: C64,
    pub w: Vec<C64>,
    pub w_tilde: Vec<C64>,
    /// Modal amplitudes `w′_α`, `w̃′_α` (eigen route only).
    pub mode_amplitudes: Option<(Vec<C64>, Vec<C64>)>,
    couplings: Couplings,
}

impl SteadyStateSolution {
    /// `ρ̃ = w w̃ᵀ / rho_gg`.
    pub fn excited_matrix(&self) -> Mat<C64> {
        let n = self.w.len();
        Mat::from_fn(n, n, |i, j| self.w[i] * self.w_tilde[j] / self.rho_gg)
    }

    pub fn populations(&self) -> Vec<C64> {
        self.w.iter().zip(&self.w_tilde).map(|(a, b)| a * b / self.rho_gg).collect()
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    /// Largest relative residual of the stationary equations.
    pub fn stationary_residual(&self, drive: &DriveSpec) -> Result<f64> {
        let state = crate::evolution::CoefficientState {
            t: 0.0,
            rho_gg: self.rho_gg,
            w: self.w.clone(),
            w_tilde: self.w_tilde.clone(),
            excited: crate::evolution::ExcitedBlock::Full(self.excited_matrix()),
        };
        let d = crate::evolution::coefficient_rhs(&state, 0.0, drive, &self.couplings)?;
        let rel = |dv: &[C64], v: &[C64]| {
            let s = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            dv.iter().map(|x| x.norm()).fold(0.0, f64::max) / s.max(f64::MIN_POSITIVE)
        };
        let rho = self.excited_matrix();
        let n = self.w.len();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                num = num.max(d.excited[(i, j)].norm());
                den = den.max(rho[(i, j)].norm());
            }
        }
        Ok(rel(&d.w, &self.w).max(rel(&d.w_tilde, &self.w_tilde)).max(num / den.max(f64::MIN_POSITIVE)))
    }
}

fn check_cw(drive: &DriveSpec) -> Result<()> {
    drive.validate()?;
    if drive.profile != TemporalProfile::Cw {
        return Err(Error::InvalidArgument("steady state needs a cw drive".into()));
    }
    Ok(())
}

/// Weak-drive steady state of the coherences for one configuration.
pub fn steady_coefficients(
    config: &ShiftedConfiguration,
    drive: &DriveSpec,
    route: SteadyRoute,
    ground: GroundPopulation,
) -> Result<SteadyStateSolution> {
    check_cw(drive)?;
    let couplings = Couplings::new(config, drive)?;
    let rho_gg = ground.value();
    let delta = drive.detuning;
    let (om, omp) = (couplings.omega().to_vec(), couplings.omega_primed().to_vec());
    let n = om.len();
    match route {
        SteadyRoute::Eigen => {
            let v = unprimed_modes(config)?;
            let u = if config.is_coincident() { v.clone() } else { primed_modes(config)? };
            let mut wp = vec![ZERO; n];
            let mut wtp = vec![ZERO; n];
            for a in 0..n {
                let den = v.values()[a] - I * delta;
                if den.norm() < POLE_TOLERANCE {
                    return Err(Error::Singularity { mode: a, magnitude: den.norm() });
                }
                let overlap: C64 = (0..n).map(|i| om[i] * v.vectors()[(i, a)]).sum();
                wp[a] = -I * rho_gg * 0.5 * overlap / den;
                let den_p = u.values()[a].conj() + I * delta;
                if den_p.norm() < POLE_TOLERANCE {
                    return Err(Error::Singularity { mode: a, magnitude: den_p.norm() });
                }
                let overlap_p: C64 = (0..n).map(|i| omp[i].conj() * u.vectors()[(i, a)].conj()).sum();
                wtp[a] = I * rho_gg * 0.5 * overlap_p / den_p;
            }
            let w = (0..n).map(|i| (0..n).map(|a| v.vectors()[(i, a)] * wp[a]).sum()).collect();
            let w_tilde = (0..n).map(|i| (0..n).map(|a| u.vectors()[(i, a)].conj() * wtp[a]).sum()).collect();
            Ok(SteadyStateSolution { rho_gg, w, w_tilde, mode_amplitudes: Some((wp, wtp)), couplings })
        }
        SteadyRoute::LinearSolve => {
            let a = Mat::from_fn(n, n, |i, j| {
                couplings.unprimed_matrix()[(i, j)] - if i == j { I * delta } else { ZERO }
            });
            let b = Mat::from_fn(n, n, |i, j| {
                couplings.primed_conj_matrix()[(i, j)] + if i == j { I * delta } else { ZERO }
            });
            let rhs_w = Mat::from_fn(n, 1, |i, _| -I * om[i] * 0.5 * rho_gg);
            let rhs_wt = Mat::from_fn(n, 1, |i, _| I * omp[i].conj() * 0.5 * rho_gg);
            let w = a.partial_piv_lu().solve(&rhs_w);
            let wt = b.partial_piv_lu().solve(&rhs_wt);
            let w: Vec<C64> = (0..n).map(|i| w[(i, 0)]).collect();
            let w_tilde: Vec<C64> = (0..n).map(|i| wt[(i, 0)]).collect();
            if w.iter().chain(&w_tilde).any(|x| !x.is_finite()) {
                return Err(Error::Singularity { mode: 0, magnitude: 0.0 });
            }
            Ok(SteadyStateSolution { rho_gg, w, w_tilde, mode_amplitudes: None, couplings })
        }
    }
}

/// `ρ̇_gg` of a steady solution: emission into the mixed kernel plus the
/// drive terms.
pub fn steady_rho_gg_dot(solution: &SteadyStateSolution) -> C64 {
    let c = &solution.couplings;
    let emission = c.mixed_bilinear(&solution.w, &solution.w_tilde) / solution.rho_gg;
    let drive: C64 = (0..solution.w.len())
        .map(|j| -I * c.omega()[j].conj() * 0.5 * solution.w[j] + I * c.omega_primed()[j] * 0.5 * solution.w_tilde[j])
        .sum();
    emission + drive
}

/// Photon emission rate `Σ_ij 2Re{G′_ij} ρ̃_ij`; at coincidence this is the
/// total scattering rate.
pub fn scattering_rate(solution: &SteadyStateSolution) -> C64 {
    solution.couplings.mixed_bilinear(&solution.w, &solution.w_tilde) / solution.rho_gg
}

/// `ρ̇_gg` of the steady state as a recoil evaluator.
#[derive(Debug, Clone)]
pub struct SteadyEvaluator {
    pub base: Arc<AtomArray>,
    pub drive: DriveSpec,
    pub route: SteadyRoute,
    pub ground: GroundPopulation,
}

impl SteadyEvaluator {
    pub fn new(base: Arc<AtomArray>, drive: DriveSpec) -> Self {
        SteadyEvaluator { base, drive, route: SteadyRoute::LinearSolve, ground: GroundPopulation::Unity }
    }
}

impl RhoGGEvaluator for SteadyEvaluator {
    fn evaluate(&self, config: &ShiftedConfiguration) -> Result<C64> {
        Ok(steady_rho_gg_dot(&steady_coefficients(config, &self.drive, self.route, self.ground)?))
    }

    fn kind(&self) -> EvaluatorKind {
        EvaluatorKind::SteadyRate
    }

    fn base(&self) -> &Arc<AtomArray> {
        &self.base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{propagate, CoefficientState, Rk2, StopCondition};
    use crate::geometry::{build_planar_array, e_plus};
    use crate::greens::greens_scalar;

    fn array(nx: usize, ny: usize, d: f64) -> Arc<AtomArray> {
        Arc::new(build_planar_array(nx, ny, d, e_plus()).unwrap())
    }

    #[test]
    fn closed_form_law() {
        assert!((kz_closed_form(1.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((kz_closed_form(1e-4).unwrap() - 4000.0).abs() < 1e-9);
        assert!(kz_closed_form(0.0).is_err());
        assert!(kz_closed_form(-1.0).is_err());
    }

    #[test]
    fn zero_shift_returns_everything_to_ground() {
        let a = array(3, 3, 0.7);
        let psi: Vec<C64> = (0..9).map(|j| C64::new((j as f64).sin(), (j as f64 * 0.7).cos())).collect();
        let e = EigenDecay::pure(a.clone(), &psi).unwrap();
        let v = e.evaluate(&ShiftedConfiguration::new(a)).unwrap();
        assert!((v - 1.0).norm() < 1e-10, "{v}");
    }

    #[test]
    fn single_atom_collapse() {
        let a = array(1, 1, 0.5);
        let e = EigenDecay::eigenstate(a.clone(), 0).unwrap();
        let dz = 0.003;
        let v = e.evaluate(&ShiftedConfiguration::primed_shift(a, 0, 2, dz).unwrap()).unwrap();
        let q = e_plus();
        let expected = 2.0 * greens_scalar(&[0.0; 3], &[0.0, 0.0, dz], &q, &q).re;
        assert!((v - expected).norm() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn agrees_with_propagation_on_two_atoms() {
        let a = array(2, 1, 0.8);
        let psi = [C64::new(1.0, 0.0), C64::new(0.2, -0.5)];
        let e = EigenDecay::pure(a.clone(), &psi).unwrap();
        let cfg = ShiftedConfiguration::primed_shift(a, 0, 0, 0.01).unwrap();
        let analytic = e.evaluate(&cfg).unwrap();
        let s = CoefficientState::pure_excitation(&psi, 0.0).unwrap();
        let stop = StopCondition::Decayed { epsilon: 1e-11, max_time: 1e4 };
        let p = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 1e-3 }, &stop, None).unwrap();
        assert!(((p.state.rho_gg - analytic) / analytic).norm() < 1e-5, "{} vs {analytic}", p.state.rho_gg);
    }

    #[test]
    fn eigenstate_batch_matches_single_evaluator() {
        let a = array(3, 2, 0.65);
        let batch = EigenstateDecay::new(a.clone()).unwrap();
        let cfg = ShiftedConfiguration::primed_shift(a.clone(), 4, 1, -0.004).unwrap();
        let all = batch.evaluate_all(&cfg).unwrap();
        for beta in [0, 3, 5] {
            let one = EigenDecay::eigenstate(a.clone(), beta).unwrap().evaluate(&cfg).unwrap();
            assert!((one - all[beta]).norm() < 1e-12);
        }
    }

    #[test]
    fn single_atom_out_of_plane_energy() {
        let batch = EigenstateDecay::new(array(1, 1, 0.5)).unwrap();
        let kz = batch.kinetic_totals(2, 1e-3).unwrap();
        assert!((kz[0] - 0.4).abs() < 1e-5, "{kz:?}");
        let kx = batch.kinetic_totals(0, 1e-3).unwrap();
        assert!((kx[0] - 0.3).abs() < 1e-5, "{kx:?}");
    }

    fn residual_steady(route: SteadyRoute) {
        let a = array(3, 3, 0.7);
        let drive = DriveSpec::cw(0.02, 0.1);
        let cfg = ShiftedConfiguration::primed_shift(a, 2, 2, 1e-3).unwrap();
        let sol = steady_coefficients(&cfg, &drive, route, GroundPopulation::Unity).unwrap();
        assert!(sol.stationary_residual(&drive).unwrap() < 1e-8);
    }

    #[test]
    fn steady_routes_are_stationary() {
        residual_steady(SteadyRoute::Eigen);
        residual_steady(SteadyRoute::LinearSolve);
    }

    #[test]
    fn steady_routes_agree() {
        let a = array(3, 3, 0.7);
        let drive = DriveSpec::cw(0.02, -0.2);
        let cfg = ShiftedConfiguration::primed_shift(a, 4, 0, 2e-3).unwrap();
        let e = steady_coefficients(&cfg, &drive, SteadyRoute::Eigen, GroundPopulation::Unity).unwrap();
        let l = steady_coefficients(&cfg, &drive, SteadyRoute::LinearSolve, GroundPopulation::Unity).unwrap();
        let (re, rl) = (steady_rho_gg_dot(&e), steady_rho_gg_dot(&l));
        assert!((re - rl).norm() < 1e-8 * rl.norm().max(1e-300) + 1e-18, "{re} vs {rl}");
        for (x, y) in e.w.iter().zip(&l.w) {
            assert!((x - y).norm() < 1e-8 * 0.02);
        }
    }

    #[test]
    fn single_atom_steady_state() {
        let a = array(1, 1, 0.5);
        let om = 0.01;
        let drive = DriveSpec::cw(om, 0.0);
        let sol = steady_coefficients(&ShiftedConfiguration::new(a), &drive, SteadyRoute::Eigen, GroundPopulation::Unity)
            .unwrap();
        assert!((sol.w[0] - C64::new(0.0, -om)).norm() < 1e-15);
        assert!((sol.populations()[0] - om * om).norm() < 1e-15);
        // Coincidence: rho_gg is stationary, emission balances absorption.
        assert!(steady_rho_gg_dot(&sol).norm() < 1e-16);
        assert!((scattering_rate(&sol) - om * om).norm() < 1e-15);
    }

    #[test]
    fn single_atom_absorption_kick() {
        // Rate-mode momentum: ṗ_z = ħk × scattering rate.
        let a = array(1, 1, 0.5);
        let om = 0.01;
        let ev = SteadyEvaluator::new(a.clone(), DriveSpec::cw(om, 0.0));
        let dr = 1e-3;
        let fp = ev.evaluate(&ShiftedConfiguration::primed_shift(a.clone(), 0, 2, dr).unwrap()).unwrap();
        let fm = ev.evaluate(&ShiftedConfiguration::primed_shift(a, 0, 2, -dr).unwrap()).unwrap();
        let pz = crate::recoil::momentum_from_values(fp, fm, dr).re;
        assert!(((pz - om * om) / (om * om)).abs() < 1e-4, "{pz}");
    }

    #[test]
    fn pulsed_drive_rejected() {
        let a = array(1, 1, 0.5);
        let mut drive = DriveSpec::cw(0.01, 0.0);
        drive.profile = TemporalProfile::Gaussian { width: 1.0 };
        assert!(steady_coefficients(&ShiftedConfiguration::new(a), &drive, SteadyRoute::Eigen, GroundPopulation::Unity)
            .is_err());
    }
}
