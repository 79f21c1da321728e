//! Free-space dyadic Green's function between two dipoles and the coupling
//! matrices built from it.
//!
//! For atoms `a`, `b` with separation `r` and orientations `q_a`, `q_b`:
//!
//! ```text
//! g = Γ/2 [ (3 (r̂·q_a)(r̂·q_b*) − q_a·q_b*)/2 · h₂(kr) + (q_a·q_b*) · h₀(kr) ]
//! ```
//!
//! with `h_l` the outgoing spherical Hankel functions. At coincidence only the
//! real part survives and `g = Γ/2 · Re(q_a·q_b*)`.

use faer::Mat;

use crate::units::{GAMMA, K};
use crate::{conj3, dot_c, norm3, sub3, CVec3, Error, Result, Vec3, C64};

/// Separations below this (in λ) use the coincidence value.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;

/// Below this argument the regular Bessel parts come from their power series.
const SERIES_CUTOFF: f64 = 1.0;

fn series_j(order: i32, x: f64) -> f64 {
    // j_n(x) = x^n Σ_m (−x²/2)^m / (m! (2n+2m+1)!!)
    let mut double_fact = 1.0;
    for k in (1..=(2 * order + 1)).step_by(2) {
        double_fact *= k as f64;
    }
    let mut term = x.powi(order) / double_fact;
    let mut sum = term;
    let h = -0.5 * x * x;
    for m in 1..30 {
        term *= h / (m as f64 * (2 * order + 2 * m + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn bessel_j0(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        series_j(0, x)
    } else {
        x.sin() / x
    }
}

fn bessel_j2(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        series_j(2, x)
    } else {
        let (s, c) = x.sin_cos();
        (3.0 / (x * x * x) - 1.0 / x) * s - 3.0 * c / (x * x)
    }
}

fn bessel_y0(x: f64) -> f64 {
    -x.cos() / x
}

fn bessel_y2(x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    (-3.0 / (x * x * x) + 1.0 / x) * c - 3.0 * s / (x * x)
}

/// Outgoing spherical Hankel function `h_l⁽¹⁾(x) = j_l(x) + i y_l(x)` for
/// `l ∈ {0, 2}`.
pub fn spherical_hankel(order: u32, x: f64) -> Result<C64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("spherical Hankel argument {x}")));
    }
    match order {
        0 => Ok(C64::new(bessel_j0(x), bessel_y0(x))),
        2 => Ok(C64::new(bessel_j2(x), bessel_y2(x))),
        _ => Err(Error::Domain(format!("spherical Hankel order {order} not supported"))),
    }
}

/// Angular factors `((3(r̂·q_a)(r̂·q_b*) − q_a·q_b*)/2, q_a·q_b*)`.
#[inline]
fn angular(rhat: &Vec3, qa: &CVec3, qb_conj: &CVec3) -> (C64, C64) {
    let ra = rhat[0] * qa[0] + rhat[1] * qa[1] + rhat[2] * qa[2];
    let rb = rhat[0] * qb_conj[0] + rhat[1] * qb_conj[1] + rhat[2] * qb_conj[2];
    let p = dot_c(qa, qb_conj);
    ((3.0 * ra * rb - p) * 0.5, p)
}

/// Coupling `g(r_a − r_b)` between a dipole `q_a` at `r_a` and `q_b` at `r_b`.
pub fn greens_scalar(ra: &Vec3, rb: &Vec3, qa: &CVec3, qb: &CVec3) -> C64 {
    let qb_conj = conj3(qb);
    let r = sub3(ra, rb);
    let dist = norm3(&r);
    if dist < COINCIDENCE_TOLERANCE {
        return C64::new(0.5 * GAMMA * dot_c(qa, &qb_conj).re, 0.0);
    }
    let rhat = [r[0] / dist, r[1] / dist, r[2] / dist];
    let x = K * dist;
    let (a2, a0) = angular(&rhat, qa, &qb_conj);
    let h0 = C64::new(bessel_j0(x), bessel_y0(x));
    let h2 = C64::new(bessel_j2(x), bessel_y2(x));
    0.5 * GAMMA * (a2 * h2 + a0 * h0)
}

/// `Re{g(r_a − r_b)}`, cheaper than the full value and well defined at
/// arbitrarily small separations.
pub fn greens_real(ra: &Vec3, rb: &Vec3, qa: &CVec3, qb: &CVec3) -> f64 {
    let qb_conj = conj3(qb);
    let r = sub3(ra, rb);
    let dist = norm3(&r);
    if dist < COINCIDENCE_TOLERANCE {
        return 0.5 * GAMMA * dot_c(qa, &qb_conj).re;
    }
    let rhat = [r[0] / dist, r[1] / dist, r[2] / dist];
    let x = K * dist;
    let (a2, a0) = angular(&rhat, qa, &qb_conj);
    let mut re = a2.re * bessel_j2(x) + a0.re * bessel_j0(x);
    // Imaginary angular parts only arise for unequal orientations.
    if a2.im != 0.0 || a0.im != 0.0 {
        re -= a2.im * bessel_y2(x) + a0.im * bessel_y0(x);
    }
    0.5 * GAMMA * re
}

/// Which pair of coordinate sets a matrix couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// `G_ij = g(r_i − r_j)`.
    Unprimed,
    /// `G″_ij = g(r′_i − r′_j)`.
    Primed,
    /// `G′_ij = g(r_i − r′_j)`.
    Mixed,
}

#[derive(Debug, Clone, Copy)]
pub enum Coordinates<'a> {
    Unprimed(&'a [Vec3]),
    Primed(&'a [Vec3]),
}

impl<'a> Coordinates<'a> {
    fn positions(&self) -> &'a [Vec3] {
        match *self {
            Coordinates::Unprimed(p) | Coordinates::Primed(p) => p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreensMatrix {
    entries: Mat<C64>,
    flavor: Flavor,
}

impl GreensMatrix {
    pub fn entries(&self) -> &Mat<C64> {
        &self.entries
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.norm_l2()
    }

    /// The jump kernel `2 Re{G}`.
    pub fn decay_kernel(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| 2.0 * self.entries[(i, j)].re)
    }

    /// Wrap a raw matrix (used by tests and synthetic problems).
    pub fn from_entries(entries: Mat<C64>, flavor: Flavor) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        Ok(GreensMatrix { entries, flavor })
    }
}

/// Dense `N × N` coupling matrix between two coordinate sets.
pub fn assemble_greens(left: Coordinates<'_>, right: Coordinates<'_>, orientations: &[CVec3]) -> Result<GreensMatrix> {
    let flavor = match (left, right) {
        (Coordinates::Unprimed(_), Coordinates::Unprimed(_)) => Flavor::Unprimed,
        (Coordinates::Primed(_), Coordinates::Primed(_)) => Flavor::Primed,
        _ => Flavor::Mixed,
    };
    let (l, r) = (left.positions(), right.positions());
    let n = l.len();
    if r.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: r.len() });
    }
    if orientations.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: orientations.len() });
    }
    let entries = Mat::from_fn(n, n, |i, j| greens_scalar(&l[i], &r[j], &orientations[i], &orientations[j]));
    Ok(GreensMatrix { entries, flavor })
}

/// `2 Re{g(r_i − r′_j)}` for the mixed coordinate pairing.
pub fn mixed_decay_kernel(unprimed: &[Vec3], primed: &[Vec3], orientations: &[CVec3]) -> Result<Mat<f64>> {
    let n = unprimed.len();
    if primed.len() != n || orientations.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: primed.len().min(orientations.len()) });
    }
    Ok(Mat::from_fn(n, n, |i, j| {
        2.0 * greens_real(&unprimed[i], &primed[j], &orientations[i], &orientations[j])
    }))
}
