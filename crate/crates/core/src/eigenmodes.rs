//! Eigenmodes of complex-symmetric coupling matrices.
//!
//! `G` is symmetric but not Hermitian, so eigenvectors are orthogonal under
//! the unconjugated bilinear form `uᵀv` rather than the usual inner product.
//! After [`normalize_bilinear`] the eigenvector matrix satisfies `VᵀV = 1`,
//! which makes `V⁻¹ = Vᵀ` and `G = V diag(𝒢) Vᵀ`.

use faer::Mat;
use serde::Serialize;

use crate::greens::{Flavor, GreensMatrix};
use crate::{Error, Result, C64};

/// Relative (to ‖G‖) eigenvalue distance below which modes are treated as
/// degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Bilinear self-norms below this (relative to the Euclidean norm²) are
/// considered self-orthogonal.
pub const SELF_ORTHOGONAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenmodeSet {
    values: Vec<C64>,
    vectors: Mat<C64>,
    flavor: Flavor,
    matrix_norm: f64,
    normalized: bool,
}

impl EigenmodeSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues `𝒢_α = γ_α/2 + iΔ_α`.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Eigenvectors as columns.
    pub fn vectors(&self) -> &Mat<C64> {
        &self.vectors
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Decay rate `γ_α = 2 Re 𝒢_α`.
    pub fn gamma(&self, alpha: usize) -> f64 {
        2.0 * self.values[alpha].re
    }

    /// Line shift `Δ_α = Im 𝒢_α`.
    pub fn shift(&self, alpha: usize) -> f64 {
        self.values[alpha].im
    }

    pub fn vector(&self, alpha: usize) -> Vec<C64> {
        self.vectors.col(alpha).iter().copied().collect()
    }

    /// `1 / Σ_i |V_iα|²`.
    pub fn excitation_normalization(&self, alpha: usize) -> f64 {
        1.0 / self.vectors.col(alpha).iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Largest entry of `|VᵀV − 1|`.
    pub fn bilinear_gram_error(&self) -> f64 {
        let n = self.len();
        let gram = self.vectors.transpose() * &self.vectors;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                err = err.max((gram[(i, j)] - target).norm());
            }
        }
        err
    }

    /// Largest column residual `‖G V_α − 𝒢_α V_α‖` relative to ‖G‖.
    pub fn residual(&self, g: &GreensMatrix) -> f64 {
        let gv = g.entries() * &self.vectors;
        let mut worst: f64 = 0.0;
        for a in 0..self.len() {
            let col_norm = self.vectors.col(a).norm_l2();
            let r: f64 = (0..self.len())
                .map(|i| (gv[(i, a)] - self.values[a] * self.vectors[(i, a)]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r / (col_norm * g.norm()));
        }
        worst
    }

    /// Rescale the time unit of the eigenvalues (used by invariance checks).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.matrix_norm *= factor;
        out
    }
}

/// Full dense eigendecomposition, modes sorted by ascending decay rate and
/// bilinearly normalised.
pub fn decompose(g: &GreensMatrix) -> Result<EigenmodeSet> {
    let n = g.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty coupling matrix".into()));
    }
    let evd = g.entries().eigen().map_err(|e| Error::EigenFailure {
        context: format!("{:?} coupling matrix of size {n} ({e:?})", g.flavor()),
    })?;
    let raw_values: Vec<C64> = evd.S().column_vector().iter().copied().collect();
    if raw_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure { context: format!("{:?} matrix of size {n}: non-finite eigenvalue", g.flavor()) });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_values[a]
            .re
            .partial_cmp(&raw_values[b].re)
            .unwrap()
            .then(raw_values[a].im.abs().partial_cmp(&raw_values[b].im.abs()).unwrap())
    });
    let u = evd.U();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    let values = order.iter().map(|&k| raw_values[k]).collect();
    normalize_bilinear(EigenmodeSet { values, vectors, flavor: g.flavor(), matrix_norm: g.norm(), normalized: false })
}

fn bilinear(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Group modes whose eigenvalues lie within the degeneracy tolerance
/// (transitively).
fn degenerate_clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_of[r]].push(i);
    }
    clusters
}

/// Scale every eigenvector to `VᵀV = 1` and orthogonalise degenerate clusters
/// under the bilinear form (modified Gram–Schmidt).
pub fn normalize_bilinear(modes: EigenmodeSet) -> Result<EigenmodeSet> {
    let n = modes.len();
    let tol = DEGENERACY_TOLERANCE * modes.matrix_norm.max(f64::MIN_POSITIVE);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|a| modes.vector(a)).collect();
    for cluster in degenerate_clusters(&modes.values, tol) {
        for (k, &a) in cluster.iter().enumerate() {
            for &b in &cluster[..k] {
                let overlap = bilinear(&cols[b], &cols[a]);
                let (done, cur) = if b < a {
                    let (lo, hi) = cols.split_at_mut(a);
                    (&lo[b], &mut hi[0])
                } else {
                    let (lo, hi) = cols.split_at_mut(b);
                    (&hi[0], &mut lo[a])
                };
                cur.iter_mut().zip(done).for_each(|(c, d)| *c -= overlap * d);
            }
            let self_norm = bilinear(&cols[a], &cols[a]);
            let euclid: f64 = cols[a].iter().map(|v| v.norm_sqr()).sum();
            if self_norm.norm() < SELF_ORTHOGONAL_TOLERANCE * euclid {
                return Err(Error::DefectiveMode { cluster: cluster.clone(), norm: self_norm.norm() / euclid });
            }
            let scale = self_norm.sqrt().inv();
            cols[a].iter_mut().for_each(|v| *v *= scale);
        }
    }
    let vectors = Mat::from_fn(n, n, |i, j| cols[j][i]);
    Ok(EigenmodeSet { vectors, normalized: true, ..modes })
}

/// Index of the slowest-decaying mode; ties go to the smaller `|Δ|`.
pub fn most_subradiant(modes: &EigenmodeSet) -> usize {
    (0..modes.len())
        .min_by(|&a, &b| {
            let (va, vb) = (modes.values[a], modes.values[b]);
            va.re.partial_cmp(&vb.re).unwrap().then(va.im.abs().partial_cmp(&vb.im.abs()).unwrap())
        })
        .expect("non-empty mode set")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeWeight {
    pub mode: usize,
    pub gamma: f64,
    pub shift: f64,
    /// `Σ_i Ω_i V_iα`.
    pub overlap: C64,
    /// `|overlap / (𝒢_α − iδ)|²`.
    pub weight: f64,
}

/// Steady-state weight of each mode under a spatial drive profile `Ω_i` at
/// detuning `δ`.
pub fn mode_contribution(modes: &EigenmodeSet, drive: &[C64], detuning: f64) -> Result<Vec<ModeWeight>> {
    if drive.len() != modes.vectors.nrows() {
        return Err(Error::DimensionMismatch { expected: modes.vectors.nrows(), found: drive.len() });
    }
    Ok((0..modes.len())
        .map(|a| {
            let overlap: C64 = modes.vectors.col(a).iter().zip(drive).map(|(v, o)| v * o).sum();
            let denom = modes.values[a] - crate::I * detuning;
            ModeWeight {
                mode: a,
                gamma: modes.gamma(a),
                shift: modes.shift(a),
                overlap,
                weight: (overlap / denom).norm_sqr(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_planar_array, e_plus};
    use crate::greens::{assemble_greens, greens_scalar, Coordinates};

    fn unprimed(nx: usize, ny: usize, d: f64) -> GreensMatrix {
        let a = build_planar_array(nx, ny, d, e_plus()).unwrap();
        assemble_greens(Coordinates::Unprimed(a.positions()), Coordinates::Unprimed(a.positions()), a.orientations())
            .unwrap()
    }

    #[test]
    fn single_atom() {
        let m = decompose(&unprimed(1, 1, 0.5)).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.values()[0] - C64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((m.gamma(0) - 1.0).abs() < 1e-15);
        assert_eq!(most_subradiant(&m), 0);
    }

    #[test]
    fn two_atom_modes() {
        let q = e_plus();
        let g = greens_scalar(&[0.8, 0.0, 0.0], &[0.0; 3], &q, &q);
        let m = decompose(&unprimed(2, 1, 0.8)).unwrap();
        // Analytic 2×2 eigenvalues Γ/2 ± g.
        let mut expected = [C64::new(0.5, 0.0) + g, C64::new(0.5, 0.0) - g];
        expected.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (v, e) in m.values().iter().zip(&expected) {
            assert!((v - e).norm() < 1e-12);
        }
        // For 0.5λ < d < λ the slow mode is the in-phase one.
        let s = most_subradiant(&m);
        assert!(g.re < 0.0);
        let v = m.vector(s);
        assert!((v[0] - v[1]).norm() < 1e-10, "{v:?}");
    }

    #[test]
    fn trace_identities_eight_by_eight() {
        let g = unprimed(8, 8, 0.68);
        let m = decompose(&g).unwrap();
        assert_eq!(m.len(), 64);
        let sum_gamma: f64 = (0..64).map(|a| m.gamma(a)).sum();
        let sum_shift: f64 = (0..64).map(|a| m.shift(a)).sum();
        assert!((sum_gamma - 64.0).abs() < 1e-6 * 64.0);
        assert!(sum_shift.abs() < 1e-8 * 64.0);
        assert!((0..64).all(|a| m.gamma(a) > 0.0));
        assert!(m.residual(&g) < 1e-8);
        assert!(m.bilinear_gram_error() < 1e-8);
        for a in 1..64 {
            assert!(m.gamma(a) >= m.gamma(a - 1));
        }
    }

    #[test]
    fn degenerate_pairs_are_orthogonalised() {
        let g = unprimed(3, 3, 0.6);
        let m = decompose(&g).unwrap();
        let tol = DEGENERACY_TOLERANCE * g.norm();
        let clusters = degenerate_clusters(m.values(), tol);
        assert!(clusters.iter().any(|c| c.len() == 2), "expected a degenerate pair: {:?}", m.values());
        assert!(m.bilinear_gram_error() < 1e-8);
    }

    #[test]
    fn spectral_reconstruction() {
        let g = unprimed(4, 3, 0.7);
        let m = decompose(&g).unwrap();
        let v = m.vectors();
        let d = Mat::from_fn(12, 12, |i, j| if i == j { m.values()[i] } else { C64::new(0.0, 0.0) });
        let rebuilt = v * &d * v.transpose();
        for i in 0..12 {
            for j in 0..12 {
                assert!((rebuilt[(i, j)] - g.entries()[(i, j)]).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        let m = decompose(&unprimed(3, 3, 0.6)).unwrap();
        let again = normalize_bilinear(m.clone()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert!((m.vectors()[(i, j)] - again.vectors()[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn self_orthogonal_vector_is_reported() {
        // [[1, i], [i, −1]] is complex symmetric and nilpotent: its only
        // eigenvector (1, i) has (1, i)ᵀ(1, i) = 0.
        let m = EigenmodeSet {
            values: vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            vectors: Mat::from_fn(2, 2, |i, _| if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) }),
            flavor: Flavor::Unprimed,
            matrix_norm: 2.0,
            normalized: false,
        };
        let err = normalize_bilinear(m).unwrap_err();
        assert!(matches!(err, Error::DefectiveMode { .. }));
    }

    #[test]
    fn mode_weights() {
        // Single atom on resonance: |Ω|² / (Γ/2)².
        let m = decompose(&unprimed(1, 1, 0.5)).unwrap();
        let w = mode_contribution(&m, &[C64::new(0.3, 0.0)], 0.0).unwrap();
        assert!((w[0].weight - 0.09 / 0.25).abs() < 1e-14);

        // A drive bilinearly orthogonal to a mode has zero overlap with it.
        let m = decompose(&unprimed(2, 1, 0.8)).unwrap();
        let v0 = m.vector(0);
        let drive = m.vector(1);
        let w = mode_contribution(&m, &drive, 0.3).unwrap();
        assert!(w[0].overlap.norm() < 1e-12, "{:?} {v0:?}", w[0]);
        assert!((w[1].overlap - 1.0).norm() < 1e-12);
    }

    #[test]
    fn scaling_keeps_argmin() {
        let m = decompose(&unprimed(4, 4, 0.7)).unwrap();
        assert_eq!(most_subradiant(&m), most_subradiant(&m.scaled(3.7)));
    }

    #[test]
    fn translated_primed_set_has_same_spectrum() {
        let a = build_planar_array(3, 3, 0.7, e_plus()).unwrap();
        let moved: Vec<_> = a.positions().iter().map(|p| [p[0] + 0.3, p[1], p[2] - 1.1]).collect();
        let g = assemble_greens(Coordinates::Unprimed(a.positions()), Coordinates::Unprimed(a.positions()), a.orientations())
            .unwrap();
        let gpp = assemble_greens(Coordinates::Primed(&moved), Coordinates::Primed(&moved), a.orientations()).unwrap();
        let (m1, m2) = (decompose(&g).unwrap(), decompose(&gpp).unwrap());
        for (x, y) in m1.values().iter().zip(m2.values()) {
            assert!((x - y).norm() < 1e-10);
        }
    }
}
