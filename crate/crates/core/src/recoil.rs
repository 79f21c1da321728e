//! Recoil momentum and kinetic energy from finite differences of `rho_gg`
//! over shifted primed coordinates.
//!
//! With `F(δ) = rho_gg` evaluated after displacing one atom's primed
//! coordinate by `δ` along an axis:
//!
//! * `Δp / ħk = Re{ i (F(+δ) − F(−δ)) / (2kδ) }`
//! * `ΔK / E_r = Re{ −(F(+δ) − 2F(0) + F(−δ)) / (kδ)² }`
//!
//! For a final-state evaluator these are total kicks; for a steady-state
//! evaluator (`F = ρ̇_gg`) they are rates per `1/Γ`.
//!
//! Because `F = 1` (or `ρ̇_gg = 0`) for every coincident configuration and
//! `ρ` is Hermitian, `Re ∂F` vanishes and the momentum is real up to stencil
//! error. The second derivative has no such constraint: only its real part
//! is the kinetic energy, its imaginary part is reported but not checked.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::evolution::ShiftedConfiguration;
use crate::geometry::AtomArray;
use crate::units::K;
use crate::{Error, Result, C64, I};

pub const DEFAULT_DELTA_R: f64 = 1e-3;
pub const MIN_DELTA_R: f64 = 1e-4;
pub const MAX_DELTA_R: f64 = 1e-2;

/// Relative difference between the `δr` and `δr/2` estimates above which a
/// Richardson report is flagged.
pub const RICHARDSON_FLAG: f64 = 1e-3;

/// Absolute floor for the imaginary-part check.
const IMAG_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    /// `rho_gg(∞)` from time propagation.
    Propagation,
    /// `rho_gg(∞)` from the eigenmode closed form.
    FinalState,
    /// Steady `ρ̇_gg`.
    SteadyRate,
}

impl EvaluatorKind {
    pub fn is_rate(&self) -> bool {
        matches!(self, EvaluatorKind::SteadyRate)
    }
}

/// A deterministic map from a shifted configuration to `rho_gg`.
pub trait RhoGGEvaluator: Sync {
    fn evaluate(&self, config: &ShiftedConfiguration) -> Result<C64>;
    fn kind(&self) -> EvaluatorKind;
    fn base(&self) -> &Arc<AtomArray>;
}

pub fn check_step(delta_r: f64) -> Result<()> {
    if !(MIN_DELTA_R..=MAX_DELTA_R).contains(&delta_r) {
        return Err(Error::InvalidArgument(format!(
            "stencil step {delta_r} outside [{MIN_DELTA_R}, {MAX_DELTA_R}]"
        )));
    }
    Ok(())
}

/// `i (F₊ − F₋) / (2kδ)`, before taking the real part.
pub fn momentum_from_values(plus: C64, minus: C64, delta_r: f64) -> C64 {
    I * (plus - minus) / (2.0 * K * delta_r)
}

/// `−(F₊ − 2F₀ + F₋) / (kδ)²`, before taking the real part.
pub fn kinetic_from_values(plus: C64, center: C64, minus: C64, delta_r: f64) -> C64 {
    -(plus - 2.0 * center + minus) / (K * delta_r).powi(2)
}

/// Imaginary parts allowed relative to the kick scale. The stencil's own
/// truncation error leaves `O((kδ)²)` imaginary residue.
pub fn imaginary_limit(delta_r: f64) -> f64 {
    (10.0 * (K * delta_r).powi(2)).max(1e-6)
}

fn check_imaginary(what: &str, v: C64, scale: f64, delta_r: f64) -> Result<f64> {
    let bound = imaginary_limit(delta_r) * scale.max(v.re.abs()) + IMAG_FLOOR;
    if v.im.abs() > bound {
        return Err(Error::ImaginaryResidual { what: what.to_string(), real: v.re, imag: v.im });
    }
    Ok(v.im.abs() / (scale.max(v.re.abs())).max(IMAG_FLOOR))
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

fn shifted(eval: &dyn RhoGGEvaluator, atom: usize, axis: usize, amount: f64) -> Result<C64> {
    eval.evaluate(&ShiftedConfiguration::primed_shift(eval.base().clone(), atom, axis, amount)?)
}

fn stencil(eval: &dyn RhoGGEvaluator, atom: usize, axis: usize, delta_r: f64) -> Result<(C64, C64, C64)> {
    let center = eval.evaluate(&ShiftedConfiguration::new(eval.base().clone()))?;
    Ok((shifted(eval, atom, axis, delta_r)?, center, shifted(eval, atom, axis, -delta_r)?))
}

/// Momentum kick (or rate) on one atom along one axis, in `ħk`.
pub fn momentum_kick(eval: &dyn RhoGGEvaluator, atom: usize, axis: usize, delta_r: f64) -> Result<f64> {
    check_step(delta_r)?;
    let (p, c, m) = stencil(eval, atom, axis, delta_r)?;
    let v = momentum_from_values(p, m, delta_r);
    let scale = kinetic_from_values(p, c, m, delta_r).norm();
    check_imaginary(&format!("momentum of atom {atom} along {}", AXIS_NAMES[axis]), v, scale, delta_r)?;
    Ok(v.re)
}

/// Kinetic energy kick (or rate) on one atom along one axis, in `E_r`.
pub fn kinetic_kick(eval: &dyn RhoGGEvaluator, atom: usize, axis: usize, delta_r: f64) -> Result<f64> {
    check_step(delta_r)?;
    let (p, c, m) = stencil(eval, atom, axis, delta_r)?;
    Ok(kinetic_from_values(p, c, m, delta_r).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoilMode {
    /// Integrated kicks from a final-state evaluator.
    Total,
    /// Kick rates from a steady-state evaluator.
    Rate,
}

/// Which atoms and axes a map covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapSelection {
    pub atoms: Option<Vec<usize>>,
    pub axes: [bool; 3],
}

impl Default for MapSelection {
    fn default() -> Self {
        MapSelection { atoms: None, axes: [true; 3] }
    }
}

impl MapSelection {
    pub fn axis(axis: usize) -> Self {
        let mut axes = [false; 3];
        axes[axis] = true;
        MapSelection { atoms: None, axes }
    }
}

/// Per-atom recoil. Entries not covered by the selection are `NaN`.
#[derive(Debug, Clone, Serialize)]
pub struct RecoilResult {
    pub mode: RecoilMode,
    pub delta_r: f64,
    /// `Δp` (or `ṗ`) per atom, `ħk`.
    pub momentum: Vec<[f64; 3]>,
    /// `ΔK` (or `K̇`) per atom, `E_r`.
    pub kinetic: Vec<[f64; 3]>,
    /// Unshifted evaluator value.
    pub baseline: C64,
    pub evaluations: usize,
    /// Largest `|Im Δp| / scale` (checked against [`imaginary_limit`]).
    pub max_imag_ratio: f64,
    /// Largest `|Im ΔK| / |Re ΔK|` (diagnostic only).
    pub max_kinetic_imag_ratio: f64,
    /// Smallest kinetic component (should be ≥ −1e−8).
    pub min_kinetic: f64,
}

impl RecoilResult {
    pub fn kinetic_total(&self, atom: usize) -> f64 {
        self.kinetic[atom].iter().filter(|v| !v.is_nan()).sum()
    }

    /// Sum over atoms of one kinetic component.
    pub fn kinetic_axis_sum(&self, axis: usize) -> f64 {
        self.kinetic.iter().map(|k| k[axis]).filter(|v| !v.is_nan()).sum()
    }

    pub fn momentum_axis_sum(&self, axis: usize) -> f64 {
        self.momentum.iter().map(|p| p[axis]).filter(|v| !v.is_nan()).sum()
    }

    pub fn kinetic_column(&self, axis: usize) -> Vec<f64> {
        self.kinetic.iter().map(|k| k[axis]).collect()
    }

    pub fn momentum_column(&self, axis: usize) -> Vec<f64> {
        self.momentum.iter().map(|p| p[axis]).collect()
    }
}

/// Recoil on every selected atom and axis: `2·(atoms·axes) + 1` evaluations
/// run in parallel and are reduced in a fixed order.
pub fn recoil_map(eval: &dyn RhoGGEvaluator, delta_r: f64, mode: RecoilMode, selection: &MapSelection) -> Result<RecoilResult> {
    check_step(delta_r)?;
    match (mode, eval.kind().is_rate()) {
        (RecoilMode::Rate, false) => {
            return Err(Error::InvalidArgument("rate mode needs a steady-state evaluator".into()));
        }
        (RecoilMode::Total, true) => {
            return Err(Error::InvalidArgument("total mode needs a final-state evaluator".into()));
        }
        _ => {}
    }
    let base = eval.base().clone();
    let n = base.len();
    let atoms: Vec<usize> = selection.atoms.clone().unwrap_or_else(|| (0..n).collect());
    if let Some(&bad) = atoms.iter().find(|&&a| a >= n) {
        return Err(Error::InvalidArgument(format!("atom {bad} out of range")));
    }
    let axes: Vec<usize> = (0..3).filter(|&a| selection.axes[a]).collect();
    let mut jobs = Vec::with_capacity(atoms.len() * axes.len() * 2);
    for &atom in &atoms {
        for &axis in &axes {
            jobs.push((atom, axis, delta_r));
            jobs.push((atom, axis, -delta_r));
        }
    }
    let baseline = eval.evaluate(&ShiftedConfiguration::new(base.clone()))?;
    let values: Vec<C64> = jobs
        .par_iter()
        .map(|&(atom, axis, amount)| shifted(eval, atom, axis, amount))
        .collect::<Result<_>>()?;

    let mut momentum = vec![[f64::NAN; 3]; n];
    let mut kinetic = vec![[f64::NAN; 3]; n];
    let mut max_ratio: f64 = 0.0;
    let mut max_kinetic_ratio: f64 = 0.0;
    let mut min_kinetic = f64::INFINITY;
    for (k, pair) in values.chunks(2).enumerate() {
        let (atom, axis, _) = jobs[2 * k];
        let p = momentum_from_values(pair[0], pair[1], delta_r);
        let e = kinetic_from_values(pair[0], baseline, pair[1], delta_r);
        let what = format!("momentum of atom {atom} along {}", AXIS_NAMES[axis]);
        max_ratio = max_ratio.max(check_imaginary(&what, p, e.norm(), delta_r)?);
        if e.re != 0.0 {
            max_kinetic_ratio = max_kinetic_ratio.max(e.im.abs() / e.re.abs());
        }
        momentum[atom][axis] = p.re;
        kinetic[atom][axis] = e.re;
        min_kinetic = min_kinetic.min(e.re);
    }
    Ok(RecoilResult {
        mode,
        delta_r,
        momentum,
        kinetic,
        baseline,
        evaluations: values.len() + 1,
        max_imag_ratio: max_ratio,
        max_kinetic_imag_ratio: max_kinetic_ratio,
        min_kinetic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StencilConvergence {
    /// Estimates at `δr`, `δr/2`, `δr/4`.
    pub estimates: [f64; 3],
    /// `(4·E(δr/2) − E(δr)) / 3`.
    pub extrapolated: f64,
    /// `|E(δr/2) − extrapolated|`.
    pub error_estimate: f64,
    /// `log₂ |E(δr) − E(δr/2)| / |E(δr/2) − E(δr/4)|`.
    pub observed_order: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RichardsonReport {
    pub atom: usize,
    pub axis: usize,
    pub delta_r: f64,
    pub momentum: StencilConvergence,
    pub kinetic: StencilConvergence,
}

fn convergence(e: [f64; 3]) -> StencilConvergence {
    let extrapolated = (4.0 * e[1] - e[0]) / 3.0;
    let (d1, d2) = ((e[0] - e[1]).abs(), (e[1] - e[2]).abs());
    let observed_order = if d1 > 0.0 && d2 > 0.0 { (d1 / d2).log2() } else { f64::NAN };
    let scale = e[1].abs().max(f64::MIN_POSITIVE);
    StencilConvergence {
        estimates: e,
        extrapolated,
        error_estimate: (e[1] - extrapolated).abs(),
        observed_order,
        flagged: d1 > RICHARDSON_FLAG * scale,
    }
}

/// Repeat a kick at `δr`, `δr/2` and `δr/4` and report the convergence.
pub fn richardson_check(eval: &dyn RhoGGEvaluator, atom: usize, axis: usize, delta_r: f64) -> Result<RichardsonReport> {
    check_step(delta_r)?;
    let center = eval.evaluate(&ShiftedConfiguration::new(eval.base().clone()))?;
    let mut p = [0.0; 3];
    let mut k = [0.0; 3];
    for (level, h) in [delta_r, delta_r / 2.0, delta_r / 4.0].into_iter().enumerate() {
        let (fp, fm) = (shifted(eval, atom, axis, h)?, shifted(eval, atom, axis, -h)?);
        p[level] = momentum_from_values(fp, fm, h).re;
        k[level] = kinetic_from_values(fp, center, fm, h).re;
    }
    Ok(RichardsonReport { atom, axis, delta_r, momentum: convergence(p), kinetic: convergence(k) })
}
