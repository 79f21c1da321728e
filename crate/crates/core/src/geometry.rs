//! Atom array construction: planar lattices, curved mirrors, two-mirror
//! cavities and arrays with missing sites.
//!
//! Lattice sites are addressed by `(row, col)` with `(0, 0)` at the corner of
//! most negative `x` and `y`; `col` runs along `x` and `row` along `y`. Planar
//! lattices are centred on the origin. Cavity mirrors carry a mirror index
//! (0 for the mirror at `z = 0`, 1 for the mirror at `z = L`).

use serde::{Deserialize, Serialize};

use crate::{conj3, dot_c, norm3, sub3, CVec3, Error, Result, Vec3, C64};

/// Pairs of atoms closer than this are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-9;

const UNIT_TOLERANCE: f64 = 1e-12;

/// Circular polarisation `ê₊ = −(x̂ + iŷ)/√2`.
pub fn e_plus() -> CVec3 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(-s, 0.0), C64::new(0.0, -s), C64::new(0.0, 0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub mirror: u8,
    pub row: usize,
    pub col: usize,
}

impl Site {
    pub const fn new(row: usize, col: usize) -> Self {
        Site { mirror: 0, row, col }
    }

    pub const fn on_mirror(mirror: u8, row: usize, col: usize) -> Self {
        Site { mirror, row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureKind {
    Flat,
    Spherical { radius: f64 },
    Parabolic { focus: f64 },
}

impl CurvatureKind {
    /// Axial displacement of a point at transverse radius² `rho2` from the
    /// vertex plane.
    pub fn sagitta(&self, rho2: f64) -> Result<f64> {
        match *self {
            CurvatureKind::Flat => Ok(0.0),
            CurvatureKind::Spherical { radius } => {
                if rho2 >= radius * radius {
                    return Err(Error::GeometryOutOfRange(format!(
                        "transverse radius {:.6} exceeds spherical radius {radius}",
                        rho2.sqrt()
                    )));
                }
                // R - sqrt(R² - ρ²) without cancellation.
                Ok(rho2 / (radius + (radius * radius - rho2).sqrt()))
            }
            CurvatureKind::Parabolic { focus } => Ok(rho2 / (4.0 * focus)),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CurvatureKind::Flat => Ok(()),
            CurvatureKind::Spherical { radius } if radius.is_finite() && radius > 0.0 => Ok(()),
            CurvatureKind::Parabolic { focus } if focus.is_finite() && focus > 0.0 => Ok(()),
            other => Err(Error::InvalidArgument(format!("invalid curvature {other:?}"))),
        }
    }
}

/// Direction in which the rim of a curved mirror is displaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bow {
    TowardPositiveZ,
    TowardNegativeZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub kind: CurvatureKind,
    pub bow: Bow,
}

impl CurvatureProfile {
    pub fn flat() -> Self {
        CurvatureProfile { kind: CurvatureKind::Flat, bow: Bow::TowardPositiveZ }
    }

    pub fn spherical(radius: f64, bow: Bow) -> Self {
        CurvatureProfile { kind: CurvatureKind::Spherical { radius }, bow }
    }

    pub fn parabolic(focus: f64, bow: Bow) -> Self {
        CurvatureProfile { kind: CurvatureKind::Parabolic { focus }, bow }
    }
}

/// Two identical mirrors facing each other along `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub curvature: CurvatureKind,
    /// Vertex-to-vertex distance.
    pub separation: f64,
}

impl CavitySpec {
    /// Spherical mirrors in the confocal arrangement, `R = L`.
    pub fn confocal(nx: usize, ny: usize, spacing: f64, separation: f64) -> Self {
        CavitySpec {
            nx,
            ny,
            spacing,
            curvature: CurvatureKind::Spherical { radius: separation },
            separation,
        }
    }

    pub fn with_separation(&self, separation: f64) -> Self {
        CavitySpec { separation, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Planar { nx: usize, ny: usize },
    Cavity { nx: usize, ny: usize, separation: f64 },
    Custom,
}

/// How an array was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub layout: Layout,
    pub curvature: Option<CurvatureKind>,
    pub removed: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomArray {
    positions: Vec<Vec3>,
    orientations: Vec<CVec3>,
    sites: Vec<Site>,
    spacing: f64,
    provenance: Provenance,
}

fn check_unit(q: &CVec3) -> Result<()> {
    let n = dot_c(q, &conj3(q)).re;
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::InvalidArgument(format!("dipole orientation has q·q* = {n}")));
    }
    Ok(())
}

fn check_separations(positions: &[Vec3]) -> Result<()> {
    for (i, a) in positions.iter().enumerate() {
        for (j, b) in positions.iter().enumerate().skip(i + 1) {
            if norm3(&sub3(a, b)) <= MIN_SEPARATION {
                return Err(Error::InvalidGeometry(format!("atoms {i} and {j} coincide")));
            }
        }
    }
    Ok(())
}

fn lattice(nx: usize, ny: usize, d: f64, mirror: u8) -> (Vec<Vec3>, Vec<Site>) {
    let cx = (nx as f64 - 1.0) / 2.0;
    let cy = (ny as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(nx * ny);
    let mut sites = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        for col in 0..nx {
            positions.push([(col as f64 - cx) * d, (row as f64 - cy) * d, 0.0]);
            sites.push(Site::on_mirror(mirror, row, col));
        }
    }
    (positions, sites)
}

/// Square or rectangular lattice in the `z = 0` plane, centred on the origin.
pub fn build_planar_array(nx: usize, ny: usize, spacing: f64, polarization: CVec3) -> Result<AtomArray> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("lattice dimensions {nx}x{ny}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidArgument(format!("lattice spacing {spacing}")));
    }
    check_unit(&polarization)?;
    let (positions, sites) = lattice(nx, ny, spacing, 0);
    Ok(AtomArray {
        orientations: vec![polarization; positions.len()],
        positions,
        sites,
        spacing,
        provenance: Provenance { layout: Layout::Planar { nx, ny }, curvature: None, removed: Vec::new() },
    })
}

/// Displace atoms along `z` by the sagitta of the profile; `x` and `y` are
/// left untouched.
pub fn apply_curvature(array: &AtomArray, profile: CurvatureProfile) -> Result<AtomArray> {
    profile.kind.validate()?;
    let sign = match profile.bow {
        Bow::TowardPositiveZ => 1.0,
        Bow::TowardNegativeZ => -1.0,
    };
    let mut out = array.clone();
    for p in out.positions.iter_mut() {
        let rho2 = p[0] * p[0] + p[1] * p[1];
        p[2] += sign * profile.kind.sagitta(rho2)?;
    }
    if profile.kind != CurvatureKind::Flat {
        out.provenance.curvature = Some(profile.kind);
    }
    Ok(out)
}

/// Two mirrors: mirror 0 with its vertex at `z = 0` bowing toward `+z`, mirror 1
/// with its vertex at `z = L` bowing toward `−z`. All dipoles are `ê₊`.
pub fn build_cavity(spec: &CavitySpec) -> Result<AtomArray> {
    if !(spec.separation.is_finite() && spec.separation > 0.0) {
        return Err(Error::InvalidGeometry(format!("mirror separation {}", spec.separation)));
    }
    let mirror = build_planar_array(spec.nx, spec.ny, spec.spacing, e_plus())?;
    let near = apply_curvature(&mirror, CurvatureProfile { kind: spec.curvature, bow: Bow::TowardPositiveZ })?;
    let max_sag = near.positions.iter().map(|p| p[2]).fold(0.0, f64::max);
    if max_sag >= spec.separation / 2.0 {
        return Err(Error::InvalidGeometry(format!(
            "mirrors overlap: sagitta {max_sag:.4} against separation {}",
            spec.separation
        )));
    }

    let n = near.len();
    let mut positions = Vec::with_capacity(2 * n);
    let mut sites = Vec::with_capacity(2 * n);
    positions.extend_from_slice(&near.positions);
    sites.extend_from_slice(&near.sites);
    for (p, s) in near.positions.iter().zip(&near.sites) {
        positions.push([p[0], p[1], spec.separation - p[2]]);
        sites.push(Site::on_mirror(1, s.row, s.col));
    }
    Ok(AtomArray {
        orientations: vec![e_plus(); 2 * n],
        positions,
        sites,
        spacing: spec.spacing,
        provenance: Provenance {
            layout: Layout::Cavity { nx: spec.nx, ny: spec.ny, separation: spec.separation },
            curvature: (spec.curvature != CurvatureKind::Flat).then_some(spec.curvature),
            removed: Vec::new(),
        },
    })
}

/// Delete atoms at the given lattice sites; remaining atoms keep their order.
pub fn remove_atoms(array: &AtomArray, sites: &[Site]) -> Result<AtomArray> {
    let mut doomed = Vec::with_capacity(sites.len());
    for (k, site) in sites.iter().enumerate() {
        if sites[..k].contains(site) {
            return Err(Error::InvalidArgument(format!("site {site:?} listed twice")));
        }
        let idx = array
            .site_index(site)
            .ok_or_else(|| Error::InvalidArgument(format!("no atom at site {site:?}")))?;
        doomed.push(idx);
    }
    if doomed.len() == array.len() {
        return Err(Error::InvalidArgument("removing every atom leaves an empty array".into()));
    }
    let mut out = array.clone();
    let keep: Vec<bool> = (0..array.len()).map(|i| !doomed.contains(&i)).collect();
    let mut it = keep.iter();
    out.positions.retain(|_| *it.next().unwrap());
    let mut it = keep.iter();
    out.orientations.retain(|_| *it.next().unwrap());
    let mut it = keep.iter();
    out.sites.retain(|_| *it.next().unwrap());
    out.provenance.removed.extend_from_slice(sites);
    Ok(out)
}

impl AtomArray {
    /// Arbitrary positions sharing one dipole orientation.
    pub fn from_positions(positions: Vec<Vec3>, polarization: CVec3) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("empty array".into()));
        }
        check_unit(&polarization)?;
        check_separations(&positions)?;
        let n = positions.len();
        Ok(AtomArray {
            orientations: vec![polarization; n],
            sites: (0..n).map(|i| Site::new(0, i)).collect(),
            positions,
            spacing: 0.0,
            provenance: Provenance { layout: Layout::Custom, curvature: None, removed: Vec::new() },
        })
    }

    /// Replace the dipole orientation of every atom.
    pub fn with_orientations(mut self, orientations: Vec<CVec3>) -> Result<Self> {
        if orientations.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: orientations.len() });
        }
        orientations.iter().try_for_each(check_unit)?;
        self.orientations = orientations;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn orientations(&self) -> &[CVec3] {
        &self.orientations
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn site_index(&self, site: &Site) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    /// Lattice extent `(nx, ny)` of one mirror, if the array came from a lattice.
    pub fn lattice_shape(&self) -> Option<(usize, usize)> {
        match self.provenance.layout {
            Layout::Planar { nx, ny } | Layout::Cavity { nx, ny, .. } => Some((nx, ny)),
            Layout::Custom => None,
        }
    }

    /// Whether atom `i` sits on the outermost ring of its lattice.
    pub fn is_edge(&self, i: usize) -> bool {
        match self.lattice_shape() {
            Some((nx, ny)) => {
                let s = self.sites[i];
                s.row == 0 || s.col == 0 || s.row + 1 == ny || s.col + 1 == nx
            }
            None => false,
        }
    }

    /// Index of the atom nearest the optical axis on the given mirror.
    pub fn center_atom(&self, mirror: u8) -> Option<usize> {
        self.positions
            .iter()
            .zip(&self.sites)
            .enumerate()
            .filter(|(_, (_, s))| s.mirror == mirror)
            .min_by(|(_, (a, _)), (_, (b, _))| {
                (a[0].hypot(a[1])).partial_cmp(&b[0].hypot(b[1])).unwrap()
            })
            .map(|(i, _)| i)
    }

    /// Index of the corner atom `(0, 0)` on the given mirror.
    pub fn corner_atom(&self, mirror: u8) -> Option<usize> {
        self.site_index(&Site::on_mirror(mirror, 0, 0))
    }

    /// Lay per-atom values of one mirror out as `rows × cols`; removed sites
    /// are `None`.
    pub fn to_grid(&self, values: &[f64], mirror: u8) -> Vec<Vec<Option<f64>>> {
        let (nx, ny) = self.lattice_shape().unwrap_or((self.len(), 1));
        let mut grid = vec![vec![None; nx]; ny];
        for (v, s) in values.iter().zip(&self.sites) {
            if s.mirror == mirror && s.row < ny && s.col < nx {
                grid[s.row][s.col] = Some(*v);
            }
        }
        grid
    }

    /// Index map for a 90° rotation of a square lattice, `(row, col) → (col, n−1−row)`.
    pub fn quarter_turn(&self) -> Option<Vec<usize>> {
        let (nx, ny) = self.lattice_shape()?;
        if nx != ny {
            return None;
        }
        self.sites
            .iter()
            .map(|s| self.site_index(&Site::on_mirror(s.mirror, s.col, nx - 1 - s.row)))
            .collect()
    }
}
