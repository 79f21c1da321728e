//! Time propagation of the single-excitation density-matrix coefficients.
//!
//! The density matrix is kept in coefficient form: `rho_gg`, the coherences
//! `w_j = ρ_{e_j g}` and `w̃_j = ρ_{g e_j}`, and the excited block
//! `ρ̃_ij = ρ_{e_i e_j}`. Each element depends on an unprimed (ket) and a
//! primed (bra) copy of the atomic positions, so the same equations produce
//! both the physical state (coincident coordinates) and the shifted values
//! that recoil observables are differentiated from.

use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use serde::{Deserialize, Serialize};

use crate::eigenmodes::EigenmodeSet;
use crate::geometry::AtomArray;
use crate::greens::{assemble_greens, mixed_decay_kernel, Coordinates, Flavor, GreensMatrix};
use crate::units::K;
use crate::{Error, Result, Vec3, C64, I};

/// Largest primed-coordinate offset accepted, in wavelengths.
pub const MAX_OFFSET: f64 = 0.05;

/// Pulses start this many widths before their peak.
pub const PULSE_START_WIDTHS: f64 = 5.0;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_EPSILON_DECAY: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemporalProfile {
    Off,
    Cw,
    /// `f(t) = exp(−t²/t_w²)`, peak at `t = 0`.
    Gaussian { width: f64 },
}

/// Transverse amplitude envelope `s(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    Uniform,
    /// `s = exp(−(x² + y²)/waist²)` about the `z` axis.
    Gaussian { waist: f64 },
    /// One real factor per atom.
    PerAtom { factors: Vec<f64> },
}

/// Plane-wave drive along `+z`: `Ω(r_j) = Ω₀ f(t) s(r_j) e^{ik z_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub rabi: f64,
    pub detuning: f64,
    pub profile: TemporalProfile,
    pub envelope: Envelope,
}

impl DriveSpec {
    pub fn off() -> Self {
        DriveSpec { rabi: 0.0, detuning: 0.0, profile: TemporalProfile::Off, envelope: Envelope::Uniform }
    }

    pub fn cw(rabi: f64, detuning: f64) -> Self {
        DriveSpec { rabi, detuning, profile: TemporalProfile::Cw, envelope: Envelope::Uniform }
    }

    pub fn gaussian(rabi: f64, detuning: f64, width: f64) -> Self {
        DriveSpec { rabi, detuning, profile: TemporalProfile::Gaussian { width }, envelope: Envelope::Uniform }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi.is_finite() && self.rabi >= 0.0) {
            return Err(Error::InvalidArgument(format!("Rabi frequency {}", self.rabi)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidArgument(format!("detuning {}", self.detuning)));
        }
        if let TemporalProfile::Gaussian { width } = self.profile {
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::InvalidArgument(format!("pulse width {width}")));
            }
        }
        match &self.envelope {
            Envelope::Uniform => {}
            Envelope::Gaussian { waist } => {
                if !(waist.is_finite() && *waist > 0.0) {
                    return Err(Error::InvalidArgument(format!("beam waist {waist}")));
                }
            }
            Envelope::PerAtom { factors } => {
                if factors.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
                    return Err(Error::InvalidArgument("per-atom envelope factors must satisfy |s| <= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// True when the drive can never act.
    pub fn is_off(&self) -> bool {
        self.rabi == 0.0 || self.profile == TemporalProfile::Off
    }

    /// Temporal factor `f(t)`.
    pub fn temporal(&self, t: f64) -> f64 {
        match self.profile {
            TemporalProfile::Off => 0.0,
            TemporalProfile::Cw => 1.0,
            TemporalProfile::Gaussian { width } => (-(t / width).powi(2)).exp(),
        }
    }

    /// Natural start time: `−5 t_w` for pulses, `0` otherwise.
    pub fn start_time(&self) -> f64 {
        match self.profile {
            TemporalProfile::Gaussian { width } => -PULSE_START_WIDTHS * width,
            _ => 0.0,
        }
    }

    /// Time after which the drive is considered over (`+∞` for cw).
    pub fn end_time(&self) -> f64 {
        match self.profile {
            TemporalProfile::Off => f64::NEG_INFINITY,
            TemporalProfile::Cw => f64::INFINITY,
            TemporalProfile::Gaussian { width } => PULSE_START_WIDTHS * width,
        }
    }

    /// `Ω₀ s(r_j) e^{ik z_j}` for each position (no temporal factor).
    pub fn spatial(&self, positions: &[Vec3]) -> Result<Vec<C64>> {
        if let Envelope::PerAtom { factors } = &self.envelope {
            if factors.len() != positions.len() {
                return Err(Error::DimensionMismatch { expected: positions.len(), found: factors.len() });
            }
        }
        Ok(positions
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let s = match &self.envelope {
                    Envelope::Uniform => 1.0,
                    Envelope::Gaussian { waist } => (-(r[0] * r[0] + r[1] * r[1]) / (waist * waist)).exp(),
                    Envelope::PerAtom { factors } => factors[j],
                };
                C64::from_polar(self.rabi * s, K * r[2])
            })
            .collect())
    }
}

/// Atom positions with independent unprimed and primed displacements.
#[derive(Debug, Clone)]
pub struct ShiftedConfiguration {
    base: Arc<AtomArray>,
    unprimed_offsets: Vec<Vec3>,
    primed_offsets: Vec<Vec3>,
}

fn check_offsets(offsets: &[Vec3], n: usize) -> Result<()> {
    if offsets.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: offsets.len() });
    }
    for (j, o) in offsets.iter().enumerate() {
        if o.iter().any(|c| !c.is_finite()) || crate::norm3(o) > MAX_OFFSET {
            return Err(Error::InvalidArgument(format!("offset {o:?} of atom {j} outside |offset| <= {MAX_OFFSET}")));
        }
    }
    Ok(())
}

impl ShiftedConfiguration {
    /// Coincident coordinates.
    pub fn new(base: Arc<AtomArray>) -> Self {
        let n = base.len();
        ShiftedConfiguration { base, unprimed_offsets: vec![[0.0; 3]; n], primed_offsets: vec![[0.0; 3]; n] }
    }

    pub fn with_primed_offsets(base: Arc<AtomArray>, offsets: Vec<Vec3>) -> Result<Self> {
        check_offsets(&offsets, base.len())?;
        let n = base.len();
        Ok(ShiftedConfiguration { base, unprimed_offsets: vec![[0.0; 3]; n], primed_offsets: offsets })
    }

    /// Displace the primed coordinate of one atom along one axis.
    pub fn primed_shift(base: Arc<AtomArray>, atom: usize, axis: usize, amount: f64) -> Result<Self> {
        if atom >= base.len() || axis > 2 {
            return Err(Error::InvalidArgument(format!("atom {atom} axis {axis} out of range")));
        }
        let mut offsets = vec![[0.0; 3]; base.len()];
        offsets[atom][axis] = amount;
        Self::with_primed_offsets(base, offsets)
    }

    /// Exchange the roles of primed and unprimed coordinates.
    pub fn swapped(&self) -> Self {
        ShiftedConfiguration {
            base: self.base.clone(),
            unprimed_offsets: self.primed_offsets.clone(),
            primed_offsets: self.unprimed_offsets.clone(),
        }
    }

    pub fn base(&self) -> &Arc<AtomArray> {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn is_coincident(&self) -> bool {
        self.unprimed_offsets == self.primed_offsets
    }

    fn displaced(&self, offsets: &[Vec3]) -> Vec<Vec3> {
        self.base
            .positions()
            .iter()
            .zip(offsets)
            .map(|(p, o)| [p[0] + o[0], p[1] + o[1], p[2] + o[2]])
            .collect()
    }

    pub fn unprimed(&self) -> Vec<Vec3> {
        self.displaced(&self.unprimed_offsets)
    }

    pub fn primed(&self) -> Vec<Vec3> {
        self.displaced(&self.primed_offsets)
    }
}

fn row_major(m: &Mat<C64>, conjugate: bool) -> Vec<C64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * m.ncols());
    for i in 0..n {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            out.push(if conjugate { v.conj() } else { v });
        }
    }
    out
}

/// Everything the right-hand side needs for one configuration and drive.
#[derive(Debug, Clone)]
pub struct Couplings {
    n: usize,
    g: Mat<C64>,
    gpp_conj: Mat<C64>,
    g_rows: Vec<C64>,
    gpp_conj_rows: Vec<C64>,
    /// `2 Re{G′}`, row-major.
    mixed: Vec<f64>,
    omega: Vec<C64>,
    omega_primed: Vec<C64>,
    detuning: f64,
    coincident: bool,
}

impl Couplings {
    pub fn new(config: &ShiftedConfiguration, drive: &DriveSpec) -> Result<Self> {
        drive.validate()?;
        let (u, p) = (config.unprimed(), config.primed());
        let q = config.base.orientations();
        let g = assemble_greens(Coordinates::Unprimed(&u), Coordinates::Unprimed(&u), q)?;
        let gpp = assemble_greens(Coordinates::Primed(&p), Coordinates::Primed(&p), q)?;
        let mixed = mixed_decay_kernel(&u, &p, q)?;
        let mut c = Self::from_parts(&g, &gpp, &mixed, drive.spatial(&u)?, drive.spatial(&p)?, drive.detuning)?;
        c.coincident = config.is_coincident();
        Ok(c)
    }

    /// Assemble from explicit matrices; `mixed` is `2 Re{G′}`.
    pub fn from_parts(
        g: &GreensMatrix,
        gpp: &GreensMatrix,
        mixed: &Mat<f64>,
        omega: Vec<C64>,
        omega_primed: Vec<C64>,
        detuning: f64,
    ) -> Result<Self> {
        let n = g.dim();
        for found in [gpp.dim(), mixed.nrows(), mixed.ncols(), omega.len(), omega_primed.len()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        if g.flavor() != Flavor::Unprimed || gpp.flavor() != Flavor::Primed {
            return Err(Error::InvalidArgument("expected unprimed and primed coupling matrices".into()));
        }
        let gpp_conj = Mat::from_fn(n, n, |i, j| gpp.entries()[(i, j)].conj());
        let mut mixed_rows = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                mixed_rows.push(mixed[(i, j)]);
            }
        }
        let coincident = omega == omega_primed && g.entries() == gpp.entries();
        Ok(Couplings {
            n,
            g_rows: row_major(g.entries(), false),
            gpp_conj_rows: row_major(&gpp_conj, false),
            g: g.entries().clone(),
            gpp_conj,
            mixed: mixed_rows,
            omega,
            omega_primed,
            detuning,
            coincident,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn unprimed_matrix(&self) -> &Mat<C64> {
        &self.g
    }

    /// `G″*`.
    pub fn primed_conj_matrix(&self) -> &Mat<C64> {
        &self.gpp_conj
    }

    pub fn omega(&self) -> &[C64] {
        &self.omega
    }

    pub fn omega_primed(&self) -> &[C64] {
        &self.omega_primed
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn is_coincident(&self) -> bool {
        self.coincident
    }

    /// `Σ_ij 2Re{G′_ij} a_i b_j`.
    pub fn mixed_bilinear(&self, a: &[C64], b: &[C64]) -> C64 {
        let n = self.n;
        let mut acc = ZERO;
        if n == 0 {
            return acc;
        }
        for (row, ai) in self.mixed.chunks_exact(n).zip(a) {
            let s: C64 = row.iter().zip(b).map(|(m, bj)| bj * *m).sum();
            acc += ai * s;
        }
        acc
    }

    /// `Σ_ij 2Re{G′_ij} ρ̃_ij`.
    pub fn mixed_trace(&self, rho: &Mat<C64>) -> C64 {
        let n = self.n;
        let mut acc = ZERO;
        for j in 0..n {
            for i in 0..n {
                acc += rho[(i, j)] * self.mixed[i * n + j];
            }
        }
        acc
    }
}

fn matvec(rows: &[C64], n: usize, x: &[C64], out: &mut [C64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = rows[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// The excited block `ρ̃`, either dense or as an outer product `left · rightᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExcitedBlock {
    Full(Mat<C64>),
    Factored { left: Vec<C64>, right: Vec<C64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    pub t: f64,
    pub rho_gg: C64,
    pub w: Vec<C64>,
    pub w_tilde: Vec<C64>,
    pub excited: ExcitedBlock,
}

impl CoefficientState {
    /// All atoms in the ground state.
    pub fn ground(n: usize, t: f64) -> Self {
        CoefficientState {
            t,
            rho_gg: ONE,
            w: vec![ZERO; n],
            w_tilde: vec![ZERO; n],
            excited: ExcitedBlock::Factored { left: vec![ZERO; n], right: vec![ZERO; n] },
        }
    }

    /// The pure single-excitation state `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure_excitation(psi: &[C64], t: f64) -> Result<Self> {
        let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidArgument("excitation amplitudes must be finite and non-zero".into()));
        }
        let s = norm.sqrt().recip();
        let n = psi.len();
        Ok(CoefficientState {
            t,
            rho_gg: ZERO,
            w: vec![ZERO; n],
            w_tilde: vec![ZERO; n],
            excited: ExcitedBlock::Factored {
                left: psi.iter().map(|v| v * s).collect(),
                right: psi.iter().map(|v| v.conj() * s).collect(),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn excited_matrix(&self) -> Mat<C64> {
        match &self.excited {
            ExcitedBlock::Full(m) => m.clone(),
            ExcitedBlock::Factored { left, right } => Mat::from_fn(left.len(), right.len(), |i, j| left[i] * right[j]),
        }
    }

    /// Diagonal `ρ̃_ii`.
    pub fn populations(&self) -> Vec<C64> {
        match &self.excited {
            ExcitedBlock::Full(m) => (0..m.nrows()).map(|i| m[(i, i)]).collect(),
            ExcitedBlock::Factored { left, right } => left.iter().zip(right).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn excited_trace(&self) -> C64 {
        self.populations().iter().sum()
    }

    pub fn trace(&self) -> C64 {
        self.rho_gg + self.excited_trace()
    }

    /// `‖ρ̃ − ρ̃†‖_max`.
    pub fn hermiticity_error(&self) -> f64 {
        let m = self.excited_matrix();
        let n = m.nrows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        err
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let (a, b) = match &self.excited {
            ExcitedBlock::Full(m) => (m.nrows(), m.ncols()),
            ExcitedBlock::Factored { left, right } => (left.len(), right.len()),
        };
        for found in [self.w.len(), self.w_tilde.len(), a, b] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        Ok(())
    }
}

/// `ρ̃ = 𝒩_β V_β V_β†` with `𝒩_β = 1/Σ|V_iβ|²`.
pub fn init_eigenstate(modes: &EigenmodeSet, beta: usize) -> Result<CoefficientState> {
    if beta >= modes.len() {
        return Err(Error::InvalidArgument(format!("mode {beta} out of range for {} modes", modes.len())));
    }
    CoefficientState::pure_excitation(&modes.vector(beta), 0.0)
}

/// Time derivative of every coefficient block.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub rho_gg: C64,
    pub w: Vec<C64>,
    pub w_tilde: Vec<C64>,
    pub excited: Mat<C64>,
}

struct Full {
    gg: C64,
    w: Vec<C64>,
    wt: Vec<C64>,
    rho: Mat<C64>,
}

fn full_rhs(c: &Couplings, f: f64, s: &Full) -> Full {
    let n = c.n;
    let delta = c.detuning;
    let om: Vec<C64> = c.omega.iter().map(|o| o * f).collect();
    let omp: Vec<C64> = c.omega_primed.iter().map(|o| o * f).collect();
    let mut gw = vec![ZERO; n];
    let mut gwt = vec![ZERO; n];
    matvec(&c.g_rows, n, &s.w, &mut gw);
    matvec(&c.gpp_conj_rows, n, &s.wt, &mut gwt);
    let w: Vec<C64> = (0..n).map(|j| -I * om[j] * 0.5 * s.gg + I * delta * s.w[j] - gw[j]).collect();
    let wt: Vec<C64> = (0..n).map(|j| I * omp[j].conj() * 0.5 * s.gg - I * delta * s.wt[j] - gwt[j]).collect();
    let mut rho = Mat::from_fn(n, n, |i, j| -I * om[i] * 0.5 * s.wt[j] + I * s.w[i] * omp[j].conj() * 0.5);
    matmul(rho.as_mut(), Accum::Add, c.g.as_ref(), s.rho.as_ref(), -ONE, Par::Seq);
    matmul(rho.as_mut(), Accum::Add, s.rho.as_ref(), c.gpp_conj.as_ref(), -ONE, Par::Seq);
    let drive: C64 = (0..n).map(|j| -I * om[j].conj() * 0.5 * s.w[j] + I * omp[j] * 0.5 * s.wt[j]).sum();
    Full { gg: c.mixed_trace(&s.rho) + drive, w, wt, rho }
}

/// Right-hand side of the coefficient equations at time `t`.
pub fn coefficient_rhs(state: &CoefficientState, t: f64, drive: &DriveSpec, couplings: &Couplings) -> Result<StateDerivative> {
    state.check_dim(couplings.n)?;
    let s = Full {
        gg: state.rho_gg,
        w: state.w.clone(),
        wt: state.w_tilde.clone(),
        rho: state.excited_matrix(),
    };
    let d = full_rhs(couplings, drive.temporal(t), &s);
    Ok(StateDerivative { rho_gg: d.gg, w: d.w, w_tilde: d.wt, excited: d.rho })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rk2 {
    pub dt: f64,
}

impl Default for Rk2 {
    fn default() -> Self {
        Rk2 { dt: DEFAULT_DT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopCondition {
    /// Run until `Σ|ρ̃_ii| < epsilon` after the drive is over. Past
    /// `max_time` the remaining exponential tail is added in closed form.
    Decayed { epsilon: f64, max_time: f64 },
    /// Run until the coherences are stationary up to the common drift of
    /// `rho_gg`.
    Steady { tolerance: f64, max_time: f64 },
    Horizon { t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    Decayed,
    Extrapolated { tail: C64 },
    Steady,
    Unconverged,
    Horizon,
}

/// Sampled `rho_gg(t)` and per-atom `Re ρ̃_ii(t)`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho_gg: Vec<C64>,
    pub populations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: CoefficientState,
    /// `ρ̇_gg` at the final state.
    pub rho_gg_rate: C64,
    pub steps: usize,
    pub reason: StopReason,
    pub trajectory: Option<Trajectory>,
}

trait Integrator {
    fn advance(&mut self, c: &Couplings, drive: &DriveSpec, t: f64, dt: f64);
    fn rho_gg(&self) -> C64;
    fn add_rho_gg(&mut self, v: C64);
    fn populations(&self) -> Vec<C64>;
    /// `(ρ̇_gg, stationarity residual)`.
    fn rates(&self, c: &Couplings, drive: &DriveSpec, t: f64) -> (C64, f64);
    fn finite(&self) -> bool;
    fn into_state(self, t: f64) -> CoefficientState;
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn drift_residual(dv: &[C64], v: &[C64], lambda: C64) -> f64 {
    let scale = vec_norm(v);
    let r = dv.iter().zip(v).map(|(d, x)| (d - lambda * x).norm_sqr()).sum::<f64>().sqrt();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

impl Integrator for Full {
    fn advance(&mut self, c: &Couplings, drive: &DriveSpec, t: f64, dt: f64) {
        let k1 = full_rhs(c, drive.temporal(t), self);
        let h = 0.5 * dt;
        let mid = Full {
            gg: self.gg + k1.gg * h,
            w: self.w.iter().zip(&k1.w).map(|(a, b)| a + b * h).collect(),
            wt: self.wt.iter().zip(&k1.wt).map(|(a, b)| a + b * h).collect(),
            rho: &self.rho + &k1.rho * faer::Scale(C64::new(h, 0.0)),
        };
        let k2 = full_rhs(c, drive.temporal(t + h), &mid);
        self.gg += k2.gg * dt;
        self.w.iter_mut().zip(&k2.w).for_each(|(a, b)| *a += b * dt);
        self.wt.iter_mut().zip(&k2.wt).for_each(|(a, b)| *a += b * dt);
        self.rho += &k2.rho * faer::Scale(C64::new(dt, 0.0));
    }

    fn rho_gg(&self) -> C64 {
        self.gg
    }

    fn add_rho_gg(&mut self, v: C64) {
        self.gg += v;
    }

    fn populations(&self) -> Vec<C64> {
        (0..self.rho.nrows()).map(|i| self.rho[(i, i)]).collect()
    }

    fn rates(&self, c: &Couplings, drive: &DriveSpec, t: f64) -> (C64, f64) {
        let d = full_rhs(c, drive.temporal(t), self);
        let lambda = if self.gg.norm() > 0.0 { d.gg / self.gg } else { ZERO };
        (d.gg, drift_residual(&d.w, &self.w, lambda).max(drift_residual(&d.wt, &self.wt, lambda)))
    }

    fn finite(&self) -> bool {
        self.gg.is_finite()
            && self.w.iter().chain(&self.wt).all(|v| v.is_finite())
            && (0..self.rho.nrows()).all(|i| self.rho[(i, i)].is_finite())
    }

    fn into_state(self, t: f64) -> CoefficientState {
        CoefficientState { t, rho_gg: self.gg, w: self.w, w_tilde: self.wt, excited: ExcitedBlock::Full(self.rho) }
    }
}

/// Factorised propagation. `Coherent`: ground start, `ρ̃ = w w̃ᵀ / ρ_gg`.
/// `Pure`: undriven single excitation, `ρ̃ = a ãᵀ`.
enum FastKind {
    Coherent,
    Pure,
}

struct Fast {
    kind: FastKind,
    gg: C64,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl Fast {
    /// Derivatives `(ρ̇_gg, ȧ, ḃ)`.
    fn rhs(&self, c: &Couplings, f: f64, gg: C64, a: &[C64], b: &[C64]) -> (C64, Vec<C64>, Vec<C64>) {
        let n = c.n;
        let mut ga = vec![ZERO; n];
        let mut gb = vec![ZERO; n];
        matvec(&c.g_rows, n, a, &mut ga);
        matvec(&c.gpp_conj_rows, n, b, &mut gb);
        match self.kind {
            FastKind::Pure => {
                let dgg = c.mixed_bilinear(a, b);
                (dgg, ga.iter().map(|v| -v).collect(), gb.iter().map(|v| -v).collect())
            }
            FastKind::Coherent => {
                let delta = c.detuning;
                let da = (0..n).map(|j| -I * c.omega[j] * f * 0.5 * gg + I * delta * a[j] - ga[j]).collect();
                let db = (0..n)
                    .map(|j| I * c.omega_primed[j].conj() * f * 0.5 * gg - I * delta * b[j] - gb[j])
                    .collect();
                let emission = if gg.norm() > 0.0 { c.mixed_bilinear(a, b) / gg } else { ZERO };
                let drive: C64 = (0..n)
                    .map(|j| -I * c.omega[j].conj() * f * 0.5 * a[j] + I * c.omega_primed[j] * f * 0.5 * b[j])
                    .sum();
                (emission + drive, da, db)
            }
        }
    }
}

impl Integrator for Fast {
    fn advance(&mut self, c: &Couplings, drive: &DriveSpec, t: f64, dt: f64) {
        let h = 0.5 * dt;
        let (g1, a1, b1) = self.rhs(c, drive.temporal(t), self.gg, &self.a, &self.b);
        let gm = self.gg + g1 * h;
        let am: Vec<C64> = self.a.iter().zip(&a1).map(|(x, d)| x + d * h).collect();
        let bm: Vec<C64> = self.b.iter().zip(&b1).map(|(x, d)| x + d * h).collect();
        let (g2, a2, b2) = self.rhs(c, drive.temporal(t + h), gm, &am, &bm);
        self.gg += g2 * dt;
        self.a.iter_mut().zip(&a2).for_each(|(x, d)| *x += d * dt);
        self.b.iter_mut().zip(&b2).for_each(|(x, d)| *x += d * dt);
    }

    fn rho_gg(&self) -> C64 {
        self.gg
    }

    fn add_rho_gg(&mut self, v: C64) {
        self.gg += v;
    }

    fn populations(&self) -> Vec<C64> {
        let scale = match self.kind {
            FastKind::Pure => ONE,
            FastKind::Coherent if self.gg.norm() > 0.0 => self.gg.inv(),
            FastKind::Coherent => ZERO,
        };
        self.a.iter().zip(&self.b).map(|(x, y)| x * y * scale).collect()
    }

    fn rates(&self, c: &Couplings, drive: &DriveSpec, t: f64) -> (C64, f64) {
        let (dgg, da, db) = self.rhs(c, drive.temporal(t), self.gg, &self.a, &self.b);
        let lambda = match self.kind {
            FastKind::Coherent if self.gg.norm() > 0.0 => dgg / self.gg,
            _ => ZERO,
        };
        (dgg, drift_residual(&da, &self.a, lambda).max(drift_residual(&db, &self.b, lambda)))
    }

    fn finite(&self) -> bool {
        self.gg.is_finite() && self.a.iter().chain(&self.b).all(|v| v.is_finite())
    }

    fn into_state(self, t: f64) -> CoefficientState {
        let n = self.a.len();
        match self.kind {
            FastKind::Pure => CoefficientState {
                t,
                rho_gg: self.gg,
                w: vec![ZERO; n],
                w_tilde: vec![ZERO; n],
                excited: ExcitedBlock::Factored { left: self.a, right: self.b },
            },
            FastKind::Coherent => {
                let inv = if self.gg.norm() > 0.0 { self.gg.inv() } else { ZERO };
                let right = self.b.iter().map(|v| v * inv).collect();
                CoefficientState {
                    t,
                    rho_gg: self.gg,
                    excited: ExcitedBlock::Factored { left: self.a.clone(), right },
                    w: self.a,
                    w_tilde: self.b,
                }
            }
        }
    }
}

fn validate_run(dt: f64, stop: &StopCondition, drive: &DriveSpec, t0: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt}")));
    }
    match *stop {
        StopCondition::Decayed { epsilon, max_time } => {
            if !(epsilon > 0.0 && max_time > t0) {
                return Err(Error::InvalidArgument(format!("decay stop epsilon {epsilon}, max_time {max_time}")));
            }
            if !drive.is_off() && drive.profile == TemporalProfile::Cw {
                return Err(Error::InvalidArgument("a continuous drive never decays; use a steady or horizon stop".into()));
            }
        }
        StopCondition::Steady { tolerance, max_time } => {
            if !(tolerance > 0.0 && max_time > t0) {
                return Err(Error::InvalidArgument(format!("steady stop tolerance {tolerance}, max_time {max_time}")));
            }
        }
        StopCondition::Horizon { t_end } => {
            if !t_end.is_finite() {
                return Err(Error::InvalidArgument(format!("horizon {t_end}")));
            }
        }
    }
    Ok(())
}

const STEADY_CHECK_EVERY: usize = 16;

fn drive_loop<S: Integrator>(
    mut s: S,
    t0: f64,
    c: &Couplings,
    drive: &DriveSpec,
    stepper: &Rk2,
    stop: &StopCondition,
    stride: Option<usize>,
) -> Result<Propagation> {
    let dt = stepper.dt;
    validate_run(dt, stop, drive, t0)?;
    let mut trajectory = stride.map(|_| Trajectory::default());
    let record = |traj: &mut Option<Trajectory>, s: &S, t: f64| {
        if let Some(tr) = traj {
            tr.times.push(t);
            tr.rho_gg.push(s.rho_gg());
            tr.populations.push(s.populations().iter().map(|p| p.re).collect());
        }
    };
    let weight = |s: &S| s.populations().iter().map(|p| p.norm()).sum::<f64>();
    let mut steps = 0usize;
    let mut t = t0;
    let mut prev_weight = weight(&s);
    let mut last_recorded = usize::MAX;
    let reason = loop {
        match *stop {
            StopCondition::Horizon { t_end } => {
                if t >= t_end - 0.5 * dt {
                    break StopReason::Horizon;
                }
            }
            StopCondition::Decayed { epsilon, max_time } => {
                if t >= drive.end_time() {
                    let wgt = weight(&s);
                    if wgt < epsilon {
                        break StopReason::Decayed;
                    }
                    if t >= max_time {
                        let (rate, _) = s.rates(c, drive, t);
                        let kappa = if prev_weight > wgt && wgt > 0.0 { (prev_weight / wgt).ln() / dt } else { 0.0 };
                        if kappa <= 0.0 {
                            return Err(Error::Numerical(format!(
                                "excited population {wgt:.3e} is not decaying at t = {t}; cannot extrapolate the tail"
                            )));
                        }
                        let tail = rate / kappa;
                        s.add_rho_gg(tail);
                        break StopReason::Extrapolated { tail };
                    }
                    prev_weight = wgt;
                }
            }
            StopCondition::Steady { tolerance, max_time } => {
                if steps.is_multiple_of(STEADY_CHECK_EVERY) && steps > 0 {
                    let (_, resid) = s.rates(c, drive, t);
                    if resid < tolerance {
                        break StopReason::Steady;
                    }
                }
                if t >= max_time {
                    break StopReason::Unconverged;
                }
            }
        }
        if let Some(k) = stride {
            if steps.is_multiple_of(k.max(1)) {
                record(&mut trajectory, &s, t);
                last_recorded = steps;
            }
        }
        s.advance(c, drive, t, dt);
        steps += 1;
        t = t0 + steps as f64 * dt;
        if !s.finite() {
            return Err(Error::Instability { t, dt });
        }
    };
    if last_recorded != steps {
        record(&mut trajectory, &s, t);
    }
    let (rate, _) = s.rates(c, drive, t);
    Ok(Propagation { state: s.into_state(t), rho_gg_rate: rate, steps, reason, trajectory })
}

/// Full-matrix midpoint RK2 propagation of the coefficient equations.
pub fn propagate(
    state: &CoefficientState,
    drive: &DriveSpec,
    config: &ShiftedConfiguration,
    stepper: &Rk2,
    stop: &StopCondition,
    sample_stride: Option<usize>,
) -> Result<Propagation> {
    let c = Couplings::new(config, drive)?;
    propagate_with(state, drive, &c, stepper, stop, sample_stride)
}

/// As [`propagate`], with prebuilt couplings.
pub fn propagate_with(
    state: &CoefficientState,
    drive: &DriveSpec,
    couplings: &Couplings,
    stepper: &Rk2,
    stop: &StopCondition,
    sample_stride: Option<usize>,
) -> Result<Propagation> {
    state.check_dim(couplings.n)?;
    let s = Full { gg: state.rho_gg, w: state.w.clone(), wt: state.w_tilde.clone(), rho: state.excited_matrix() };
    drive_loop(s, state.t, couplings, drive, stepper, stop, sample_stride)
}

fn is_zero(v: &[C64]) -> bool {
    v.iter().all(|x| *x == ZERO)
}

/// Split a dense rank-one `ρ̃` into `left · rightᵀ`.
fn factor_rank_one(m: &Mat<C64>) -> Option<(Vec<C64>, Vec<C64>)> {
    let n = m.nrows();
    let mut best = (0, 0, 0.0);
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)].norm() > best.2 {
                best = (i, j, m[(i, j)].norm());
            }
        }
    }
    let (p, q, mag) = best;
    if mag == 0.0 {
        return Some((vec![ZERO; n], vec![ZERO; n]));
    }
    let left: Vec<C64> = (0..n).map(|i| m[(i, q)]).collect();
    let right: Vec<C64> = (0..n).map(|j| m[(p, j)] / m[(p, q)]).collect();
    let scale = m.norm_l2();
    let ok = (0..n).all(|i| (0..n).all(|j| (m[(i, j)] - left[i] * right[j]).norm() <= 1e-10 * scale));
    ok.then_some((left, right))
}

/// `O(N²)`-per-step propagation of a factorised state.
///
/// A ground-state start may be driven; `ρ̃` is then carried as
/// `w w̃ᵀ / ρ_gg`. A pure single-excitation start must be undriven and is
/// carried as `a ãᵀ`.
pub fn pure_state_fast_path(
    state: &CoefficientState,
    drive: &DriveSpec,
    config: &ShiftedConfiguration,
    stepper: &Rk2,
    stop: &StopCondition,
    sample_stride: Option<usize>,
) -> Result<Propagation> {
    let c = Couplings::new(config, drive)?;
    fast_path_with(state, drive, &c, stepper, stop, sample_stride)
}

/// As [`pure_state_fast_path`], with prebuilt couplings.
pub fn fast_path_with(
    state: &CoefficientState,
    drive: &DriveSpec,
    couplings: &Couplings,
    stepper: &Rk2,
    stop: &StopCondition,
    sample_stride: Option<usize>,
) -> Result<Propagation> {
    state.check_dim(couplings.n)?;
    let (left, right) = match &state.excited {
        ExcitedBlock::Factored { left, right } => (left.clone(), right.clone()),
        ExcitedBlock::Full(m) => factor_rank_one(m)
            .ok_or_else(|| Error::UnsupportedState("mixed excited block; the fast path needs a pure state".into()))?,
    };
    let excited_zero = is_zero(&left) || is_zero(&right);
    let coherent_zero = is_zero(&state.w) && is_zero(&state.w_tilde);
    let fast = if excited_zero && coherent_zero {
        Fast { kind: FastKind::Coherent, gg: state.rho_gg, a: state.w.clone(), b: state.w_tilde.clone() }
    } else if coherent_zero && !excited_zero {
        if !drive.is_off() {
            return Err(Error::UnsupportedState("the fast path cannot drive an excited initial state".into()));
        }
        Fast { kind: FastKind::Pure, gg: state.rho_gg, a: left, b: right }
    } else {
        let consistent = state.rho_gg.norm() > 0.0
            && left.iter().zip(&state.w).all(|(x, y)| (x - y).norm() <= 1e-12 * (1.0 + y.norm()))
            && right
                .iter()
                .zip(&state.w_tilde)
                .all(|(x, y)| (x * state.rho_gg - y).norm() <= 1e-12 * (1.0 + y.norm()));
        if !consistent {
            return Err(Error::UnsupportedState("excited block is not the coherent product w w̃ᵀ / ρ_gg".into()));
        }
        Fast { kind: FastKind::Coherent, gg: state.rho_gg, a: state.w.clone(), b: state.w_tilde.clone() }
    };
    drive_loop(fast, state.t, couplings, drive, stepper, stop, sample_stride)
}

/// Integration scheme used by [`PropagationEvaluator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Full,
    Fast,
}

/// `rho_gg` at the end of a propagation (or its final rate, for a `Steady`
/// stop) as a recoil evaluator.
#[derive(Debug, Clone)]
pub struct PropagationEvaluator {
    pub base: Arc<AtomArray>,
    pub initial: CoefficientState,
    pub drive: DriveSpec,
    pub stepper: Rk2,
    pub stop: StopCondition,
    pub method: Method,
}

impl PropagationEvaluator {
    pub fn run(&self, config: &ShiftedConfiguration) -> Result<Propagation> {
        match self.method {
            Method::Full => propagate(&self.initial, &self.drive, config, &self.stepper, &self.stop, None),
            Method::Fast => pure_state_fast_path(&self.initial, &self.drive, config, &self.stepper, &self.stop, None),
        }
    }
}

impl crate::recoil::RhoGGEvaluator for PropagationEvaluator {
    fn evaluate(&self, config: &ShiftedConfiguration) -> Result<C64> {
        let p = self.run(config)?;
        match self.stop {
            StopCondition::Steady { .. } => Ok(p.rho_gg_rate),
            _ => Ok(p.state.rho_gg),
        }
    }

    fn kind(&self) -> crate::recoil::EvaluatorKind {
        match self.stop {
            StopCondition::Steady { .. } => crate::recoil::EvaluatorKind::SteadyRate,
            _ => crate::recoil::EvaluatorKind::Propagation,
        }
    }

    fn base(&self) -> &Arc<AtomArray> {
        &self.base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenmodes::decompose;
    use crate::geometry::{build_planar_array, e_plus};

    fn array(nx: usize, ny: usize, d: f64) -> Arc<AtomArray> {
        Arc::new(build_planar_array(nx, ny, d, e_plus()).unwrap())
    }

    fn decay(epsilon: f64) -> StopCondition {
        StopCondition::Decayed { epsilon, max_time: 1e4 }
    }

    #[test]
    fn single_atom_rhs() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let c = Couplings::new(&cfg, &DriveSpec::off()).unwrap();
        let s = CoefficientState::pure_excitation(&[ONE], 0.0).unwrap();
        let d = coefficient_rhs(&s, 0.0, &DriveSpec::off(), &c).unwrap();
        assert!((d.excited[(0, 0)] + 1.0).norm() < 1e-14);
        assert!((d.rho_gg - 1.0).norm() < 1e-14);
    }

    #[test]
    fn trace_is_conserved_under_drive() {
        let cfg = ShiftedConfiguration::new(array(3, 2, 0.6));
        let drive = DriveSpec::cw(0.3, 0.2);
        let c = Couplings::new(&cfg, &drive).unwrap();
        let n = 6;
        let w: Vec<C64> = (0..n).map(|j| C64::new(0.1 * j as f64, -0.05)).collect();
        let rho = Mat::from_fn(n, n, |i, j| w[i] * w[j].conj() + if i == j { C64::new(0.01, 0.0) } else { ZERO });
        let s = CoefficientState {
            t: 0.0,
            rho_gg: C64::new(0.7, 0.0),
            w_tilde: w.iter().map(|v| v.conj()).collect(),
            w,
            excited: ExcitedBlock::Full(rho),
        };
        let d = coefficient_rhs(&s, 0.0, &drive, &c).unwrap();
        let dtr = d.rho_gg + (0..n).map(|i| d.excited[(i, i)]).sum::<C64>();
        assert!(dtr.norm() < 1e-12, "{dtr}");
    }

    #[test]
    fn single_atom_decay() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let s = CoefficientState::pure_excitation(&[ONE], 0.0).unwrap();
        let stop = StopCondition::Horizon { t_end: 2.0 };
        let p = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 1e-3 }, &stop, None).unwrap();
        assert!((p.state.excited_trace().re - (-2.0f64).exp()).abs() < 1e-6);
        let p = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 1e-3 }, &decay(1e-8), None).unwrap();
        assert!((p.state.rho_gg - 1.0).norm() < 1e-7);
        assert_eq!(p.reason, StopReason::Decayed);
    }

    #[test]
    fn symmetric_pair_decays_at_collective_rate() {
        let a = array(2, 1, 0.8);
        let modes = decompose(&assemble_greens(
            Coordinates::Unprimed(a.positions()),
            Coordinates::Unprimed(a.positions()),
            a.orientations(),
        )
        .unwrap())
        .unwrap();
        let cfg = ShiftedConfiguration::new(a);
        let s = CoefficientState::pure_excitation(&[ONE, ONE], 0.0).unwrap();
        let stop = StopCondition::Horizon { t_end: 1.5 };
        let p = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 1e-3 }, &stop, None).unwrap();
        let sym = (0..2).find(|&m| (modes.vector(m)[0] - modes.vector(m)[1]).norm() < 1e-8).unwrap();
        let expected = (-modes.gamma(sym) * 1.5).exp();
        assert!((p.state.excited_trace().re - expected).abs() < 1e-6);
    }

    #[test]
    fn eigenstate_initialisation() {
        let a = array(2, 1, 0.8);
        let g = assemble_greens(Coordinates::Unprimed(a.positions()), Coordinates::Unprimed(a.positions()), a.orientations())
            .unwrap();
        let modes = decompose(&g).unwrap();
        for beta in 0..2 {
            let s = init_eigenstate(&modes, beta).unwrap();
            assert!((s.excited_trace() - 1.0).norm() < 1e-15);
            let m = s.excited_matrix();
            if (modes.vector(beta)[0] + modes.vector(beta)[1]).norm() < 1e-8 {
                let expected = [[0.5, -0.5], [-0.5, 0.5]];
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((m[(i, j)] - expected[i][j]).norm() < 1e-12);
                    }
                }
            }
        }
        assert!(init_eigenstate(&modes, 2).is_err());
    }

    #[test]
    fn driven_single_atom_reaches_lorentzian() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let drive = DriveSpec::cw(0.01, 0.0);
        let stop = StopCondition::Steady { tolerance: 1e-10, max_time: 100.0 };
        let p = propagate(&CoefficientState::ground(1, 0.0), &drive, &cfg, &Rk2 { dt: 1e-2 }, &stop, None).unwrap();
        assert_eq!(p.reason, StopReason::Steady);
        // w = −iΩ/2 ρ_gg / (Γ/2) on resonance.
        let w = p.state.w[0] / p.state.rho_gg;
        assert!((w - C64::new(0.0, -0.01)).norm() < 1e-9, "{w}");
        assert!(p.state.hermiticity_error() < 1e-12);
        assert!((p.state.trace() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn fast_path_matches_full_matrix_without_drive() {
        let a = array(2, 1, 0.8);
        let cfg = ShiftedConfiguration::primed_shift(a, 1, 2, 1e-3).unwrap();
        let s = CoefficientState::pure_excitation(&[ONE, C64::new(0.3, 0.4)], 0.0).unwrap();
        let stop = decay(1e-9);
        let step = Rk2 { dt: 1e-5 };
        let full = propagate(&s, &DriveSpec::off(), &cfg, &step, &stop, None).unwrap();
        let fast = pure_state_fast_path(&s, &DriveSpec::off(), &cfg, &step, &stop, None).unwrap();
        assert!((full.state.rho_gg - fast.state.rho_gg).norm() < 1e-10);
    }

    #[test]
    fn fast_path_rejects_driven_excitation() {
        let cfg = ShiftedConfiguration::new(array(2, 1, 0.8));
        let s = CoefficientState::pure_excitation(&[ONE, ONE], 0.0).unwrap();
        let err = pure_state_fast_path(&s, &DriveSpec::cw(0.01, 0.0), &cfg, &Rk2::default(), &decay(1e-8), None);
        assert!(matches!(err, Err(Error::UnsupportedState(_))));
        let mut mixed = CoefficientState::ground(2, 0.0);
        mixed.excited = ExcitedBlock::Full(Mat::from_fn(2, 2, |i, j| if i == j { C64::new(0.5, 0.0) } else { ZERO }));
        mixed.rho_gg = ZERO;
        let err = pure_state_fast_path(&mixed, &DriveSpec::off(), &cfg, &Rk2::default(), &decay(1e-8), None);
        assert!(matches!(err, Err(Error::UnsupportedState(_))));
    }

    #[test]
    fn cw_cannot_stop_on_decay() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let r = propagate(&CoefficientState::ground(1, 0.0), &DriveSpec::cw(0.1, 0.0), &cfg, &Rk2::default(), &decay(1e-8), None);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn instability_is_reported() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let s = CoefficientState::pure_excitation(&[ONE], 0.0).unwrap();
        let stop = StopCondition::Horizon { t_end: 1e5 };
        let r = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 10.0 }, &stop, None);
        assert!(matches!(r, Err(Error::Instability { .. })), "{r:?}");
    }

    #[test]
    fn tail_extrapolation() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let s = CoefficientState::pure_excitation(&[ONE], 0.0).unwrap();
        let stop = StopCondition::Decayed { epsilon: 1e-12, max_time: 5.0 };
        let p = pure_state_fast_path(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 1e-3 }, &stop, None).unwrap();
        assert!(matches!(p.reason, StopReason::Extrapolated { .. }));
        assert!((p.state.rho_gg - 1.0).norm() < 1e-6);
    }

    #[test]
    fn trajectory_sampling() {
        let cfg = ShiftedConfiguration::new(array(1, 1, 0.5));
        let s = CoefficientState::pure_excitation(&[ONE], 0.0).unwrap();
        let stop = StopCondition::Horizon { t_end: 1.0 };
        let p = propagate(&s, &DriveSpec::off(), &cfg, &Rk2 { dt: 0.01 }, &stop, Some(10)).unwrap();
        let tr = p.trajectory.unwrap();
        assert_eq!(tr.times.len(), 11);
        assert!((tr.times[10] - 1.0).abs() < 1e-12);
        assert!((tr.populations[5][0] - (-0.5f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn pulse_timing() {
        let d = DriveSpec::gaussian(0.02, 0.0, 16.0);
        assert_eq!(d.start_time(), -80.0);
        assert!(d.temporal(-80.0) < 2e-11);
        assert_eq!(d.temporal(0.0), 1.0);
    }

    #[test]
    fn offsets_are_bounded() {
        let a = array(2, 1, 0.8);
        assert!(ShiftedConfiguration::primed_shift(a.clone(), 0, 0, 0.06).is_err());
        assert!(ShiftedConfiguration::primed_shift(a.clone(), 2, 0, 0.01).is_err());
        let c = ShiftedConfiguration::primed_shift(a, 0, 2, 0.01).unwrap();
        assert!(!c.is_coincident());
        assert_eq!(c.swapped().unprimed()[0][2], 0.01);
    }
}
