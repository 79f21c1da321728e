//! Run configuration: one JSON document fully specifies a run.

use std::path::PathBuf;

use arrayrecoil::evolution::{DriveSpec, Envelope, TemporalProfile};
use arrayrecoil::geometry::{
    apply_curvature, build_cavity, build_planar_array, e_plus, remove_atoms, AtomArray, Bow, CavitySpec, CurvatureKind,
    CurvatureProfile, Site,
};
use arrayrecoil::recoil::{MAX_DELTA_R, MIN_DELTA_R};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Eigenmodes,
    Decay,
    Pulse,
    Steady,
    Cavity,
    Sweep,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Eigenmodes => "eigenmodes",
            Experiment::Decay => "decay",
            Experiment::Pulse => "pulse",
            Experiment::Steady => "steady",
            Experiment::Cavity => "cavity",
            Experiment::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub geometry: GeometryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavityOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    /// One square-lattice mirror in the `xy` plane.
    Array {
        nx: usize,
        ny: usize,
        spacing: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curvature: Option<CurvatureConfig>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        defects: Vec<SiteConfig>,
    },
    /// Two facing mirrors separated along `z`.
    Cavity {
        nx: usize,
        ny: usize,
        spacing: f64,
        separation: f64,
        curvature: CurvatureConfig,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        defects: Vec<SiteConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureConfig {
    Flat,
    Spherical { radius: f64 },
    Parabolic { focus: f64 },
    /// Spherical with radius equal to the mirror separation (cavities only).
    Confocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(default)]
    pub mirror: u8,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Peak Rabi frequency `Ω₀` in units of `Γ`.
    pub rabi: f64,
    #[serde(default)]
    pub detuning: f64,
    pub profile: ProfileConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Cw,
    Gaussian { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeConfig {
    Uniform,
    Gaussian { waist: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    /// Closed forms where available, otherwise the factorised propagator.
    #[default]
    Auto,
    Analytic,
    Full,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub dt: f64,
    pub delta_r: f64,
    pub epsilon_decay: f64,
    pub max_time: f64,
    pub steady_tolerance: f64,
    pub threads: usize,
    pub method: MethodConfig,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            dt: arrayrecoil::evolution::DEFAULT_DT,
            delta_r: arrayrecoil::recoil::DEFAULT_DELTA_R,
            epsilon_decay: arrayrecoil::evolution::DEFAULT_EPSILON_DECAY,
            max_time: 1000.0,
            steady_tolerance: 1e-10,
            threads: 1,
            method: MethodConfig::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Eigenstate { mode: usize },
    MostSubradiant,
    Atom { index: usize },
    /// Equal-amplitude symmetric superposition.
    Dicke,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub initial: InitialConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CavityOptions {
    /// Half-width of the separation window searched for the finesse peak;
    /// no finesse scan when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finesse_window: Option<f64>,
    /// Drive detuning for the scan; defaults to the shift of the most
    /// subradiant mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
    #[serde(default = "default_coarse")]
    pub coarse_points: usize,
    #[serde(default = "default_fine")]
    pub fine_points: usize,
}

fn default_coarse() -> usize {
    81
}

fn default_fine() -> usize {
    201
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Detuning,
    Separation,
    Spacing,
    Rabi,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Detuning => "detuning",
            SweepParameter::Separation => "separation",
            SweepParameter::Spacing => "spacing",
            SweepParameter::Rabi => "rabi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub parameter: SweepParameter,
    /// Explicit grid; alternatively `start`, `stop`, `points`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl AxisConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let name = self.parameter.name();
        let grid = match (self.values.is_empty(), self.start, self.stop, self.points) {
            (false, None, None, None) => self.values.clone(),
            (true, Some(a), Some(b), Some(n)) if n >= 1 => {
                if n == 1 {
                    vec![a]
                } else {
                    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                }
            }
            _ => {
                return Err(CliError::Schema(format!(
                    "sweep axis {name}: give either `values` or all of `start`, `stop`, `points` (≥ 1)"
                )))
            }
        };
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Schema(format!("sweep axis {name}: non-finite grid value")));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SweepQuantity {
    /// Steady-state weight of each eigenmode.
    ModeWeights,
    /// Total steady excitation and scattering rate.
    Steady,
    /// Steady total excitation of a cavity.
    CavityIntensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
    pub quantity: SweepQuantity,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Schema(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Schema(format!("config: {e}")))
    }

    /// JSON schema of the configuration format.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serialises")
    }

    /// Pick the experiment from the subcommand and/or the config field.
    pub fn resolve_experiment(&self, requested: Option<Experiment>) -> Result<Experiment, CliError> {
        match (requested, self.experiment) {
            (Some(a), Some(b)) if a != b => Err(CliError::Schema(format!(
                "subcommand `{}` conflicts with config experiment `{}`",
                a.name(),
                b.name()
            ))),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(CliError::Schema("no experiment selected".into())),
        }
    }

    pub fn validate(&self, experiment: Experiment) -> Result<(), CliError> {
        self.validate_geometry()?;
        let n = &self.numerics;
        positive("numerics.dt", n.dt)?;
        positive("numerics.epsilon_decay", n.epsilon_decay)?;
        positive("numerics.max_time", n.max_time)?;
        positive("numerics.steady_tolerance", n.steady_tolerance)?;
        if !(MIN_DELTA_R..=MAX_DELTA_R).contains(&n.delta_r) {
            return Err(CliError::Schema(format!(
                "numerics.delta_r must lie in [{MIN_DELTA_R}, {MAX_DELTA_R}], got {}",
                n.delta_r
            )));
        }
        if n.threads == 0 {
            return Err(CliError::Schema("numerics.threads must be at least 1".into()));
        }
        if let Some(d) = &self.drive {
            if !(d.rabi.is_finite() && d.rabi >= 0.0) {
                return Err(CliError::Schema(format!("drive.rabi must be non-negative, got {}", d.rabi)));
            }
            if !d.detuning.is_finite() {
                return Err(CliError::Schema("drive.detuning must be finite".into()));
            }
            if let ProfileConfig::Gaussian { width } = d.profile {
                positive("drive.profile.width", width)?;
            }
            if let Some(EnvelopeConfig::Gaussian { waist }) = d.envelope {
                positive("drive.envelope.waist", waist)?;
            }
        }
        let is_cavity = matches!(self.geometry, GeometryConfig::Cavity { .. });
        let need_drive = |profile: Option<&str>| -> Result<&DriveConfig, CliError> {
            let d = self
                .drive
                .as_ref()
                .ok_or_else(|| CliError::Schema(format!("experiment `{}` needs a drive block", experiment.name())))?;
            match (profile, d.profile) {
                (Some("cw"), ProfileConfig::Gaussian { .. }) => {
                    Err(CliError::Schema(format!("experiment `{}` needs a cw drive", experiment.name())))
                }
                (Some("gaussian"), ProfileConfig::Cw) => {
                    Err(CliError::Schema("experiment `pulse` needs a gaussian drive profile".into()))
                }
                _ => Ok(d),
            }
        };
        match experiment {
            Experiment::Eigenmodes => {}
            Experiment::Decay => {
                if self.decay.is_none() {
                    return Err(CliError::Schema("experiment `decay` needs a decay block".into()));
                }
                if let Some(d) = &self.drive {
                    if d.rabi != 0.0 {
                        return Err(CliError::Schema("experiment `decay` is undriven; drop the drive block".into()));
                    }
                }
            }
            Experiment::Pulse => {
                need_drive(Some("gaussian"))?;
                if n.method == MethodConfig::Analytic {
                    return Err(CliError::Schema("pulsed runs have no closed form; use method full or fast".into()));
                }
            }
            Experiment::Steady => {
                need_drive(Some("cw"))?;
            }
            Experiment::Cavity => {
                if !is_cavity {
                    return Err(CliError::Schema("experiment `cavity` needs a cavity geometry".into()));
                }
                if let Some(c) = &self.cavity {
                    if let Some(w) = c.finesse_window {
                        positive("cavity.finesse_window", w)?;
                    }
                    if c.coarse_points < 3 || c.fine_points < 3 {
                        return Err(CliError::Schema("cavity scan needs at least 3 points".into()));
                    }
                }
            }
            Experiment::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| CliError::Schema("experiment `sweep` needs a sweep block".into()))?;
                if s.axes.is_empty() || s.axes.len() > 2 {
                    return Err(CliError::Schema("a sweep has one or two axes".into()));
                }
                if s.axes.len() == 2 && s.axes[0].parameter == s.axes[1].parameter {
                    return Err(CliError::Schema("sweep axes must differ".into()));
                }
                for a in &s.axes {
                    let grid = a.grid()?;
                    if a.parameter == SweepParameter::Separation && !is_cavity {
                        return Err(CliError::Schema("a separation sweep needs a cavity geometry".into()));
                    }
                    if matches!(a.parameter, SweepParameter::Separation | SweepParameter::Spacing) {
                        for v in &grid {
                            positive(a.parameter.name(), *v)?;
                        }
                    }
                    if a.parameter == SweepParameter::Rabi && grid.iter().any(|v| *v < 0.0) {
                        return Err(CliError::Schema("rabi grid values must be non-negative".into()));
                    }
                }
                if s.quantity == SweepQuantity::CavityIntensity && !is_cavity {
                    return Err(CliError::Schema("cavity_intensity needs a cavity geometry".into()));
                }
                need_drive(Some("cw"))?;
            }
        }
        Ok(())
    }

    fn validate_geometry(&self) -> Result<(), CliError> {
        let (nx, ny, spacing) = match &self.geometry {
            GeometryConfig::Array { nx, ny, spacing, .. } => (*nx, *ny, *spacing),
            GeometryConfig::Cavity { nx, ny, spacing, separation, .. } => {
                positive("geometry.separation", *separation)?;
                (*nx, *ny, *spacing)
            }
        };
        if nx == 0 || ny == 0 {
            return Err(CliError::Schema(format!("geometry is empty ({nx} × {ny})")));
        }
        positive("geometry.spacing", spacing)?;
        let curvature = match &self.geometry {
            GeometryConfig::Array { curvature, .. } => {
                if matches!(curvature, Some(CurvatureConfig::Confocal)) {
                    return Err(CliError::Schema("confocal curvature applies to cavities only".into()));
                }
                *curvature
            }
            GeometryConfig::Cavity { curvature, .. } => Some(*curvature),
        };
        match curvature {
            Some(CurvatureConfig::Spherical { radius }) => positive("curvature.radius", radius)?,
            Some(CurvatureConfig::Parabolic { focus }) => positive("curvature.focus", focus)?,
            _ => {}
        }
        Ok(())
    }

    /// The drive as the library expects it (`off` when absent).
    pub fn drive_spec(&self) -> DriveSpec {
        match &self.drive {
            None => DriveSpec::off(),
            Some(d) => DriveSpec {
                rabi: d.rabi,
                detuning: d.detuning,
                profile: match d.profile {
                    ProfileConfig::Cw => TemporalProfile::Cw,
                    ProfileConfig::Gaussian { width } => TemporalProfile::Gaussian { width },
                },
                envelope: match d.envelope {
                    None | Some(EnvelopeConfig::Uniform) => Envelope::Uniform,
                    Some(EnvelopeConfig::Gaussian { waist }) => Envelope::Gaussian { waist },
                },
            },
        }
    }

    pub fn cavity_spec(&self) -> Option<CavitySpec> {
        match &self.geometry {
            GeometryConfig::Cavity { nx, ny, spacing, separation, curvature, .. } => Some(CavitySpec {
                nx: *nx,
                ny: *ny,
                spacing: *spacing,
                separation: *separation,
                curvature: match *curvature {
                    CurvatureConfig::Flat => CurvatureKind::Flat,
                    CurvatureConfig::Spherical { radius } => CurvatureKind::Spherical { radius },
                    CurvatureConfig::Parabolic { focus } => CurvatureKind::Parabolic { focus },
                    CurvatureConfig::Confocal => CurvatureKind::Spherical { radius: *separation },
                },
            }),
            GeometryConfig::Array { .. } => None,
        }
    }

    pub fn build_array(&self) -> arrayrecoil::Result<AtomArray> {
        let (array, defects) = match &self.geometry {
            GeometryConfig::Array { nx, ny, spacing, curvature, defects } => {
                let flat = build_planar_array(*nx, *ny, *spacing, e_plus())?;
                let kind = match curvature {
                    None | Some(CurvatureConfig::Flat) => None,
                    Some(CurvatureConfig::Spherical { radius }) => Some(CurvatureKind::Spherical { radius: *radius }),
                    Some(CurvatureConfig::Parabolic { focus }) => Some(CurvatureKind::Parabolic { focus: *focus }),
                    Some(CurvatureConfig::Confocal) => None,
                };
                let a = match kind {
                    Some(kind) => apply_curvature(&flat, CurvatureProfile { kind, bow: Bow::TowardPositiveZ })?,
                    None => flat,
                };
                (a, defects)
            }
            GeometryConfig::Cavity { defects, .. } => (build_cavity(&self.cavity_spec().expect("cavity geometry"))?, defects),
        };
        if defects.is_empty() {
            Ok(array)
        } else {
            let sites: Vec<Site> = defects.iter().map(|d| Site::on_mirror(d.mirror, d.row, d.col)).collect();
            remove_atoms(&array, &sites)
        }
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_parameter(&self, p: SweepParameter, v: f64) -> RunConfig {
        let mut c = self.clone();
        match p {
            SweepParameter::Detuning => {
                if let Some(d) = c.drive.as_mut() {
                    d.detuning = v;
                }
            }
            SweepParameter::Rabi => {
                if let Some(d) = c.drive.as_mut() {
                    d.rabi = v;
                }
            }
            SweepParameter::Spacing => match &mut c.geometry {
                GeometryConfig::Array { spacing, .. } | GeometryConfig::Cavity { spacing, .. } => *spacing = v,
            },
            SweepParameter::Separation => {
                if let GeometryConfig::Cavity { separation, curvature, .. } = &mut c.geometry {
                    // Keep the mirror shape fixed while the separation moves.
                    if *curvature == CurvatureConfig::Confocal {
                        *curvature = CurvatureConfig::Spherical { radius: *separation };
                    }
                    *separation = v;
                }
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig::from_json_str(
            r#"{"geometry": {"kind": "array", "nx": 3, "ny": 3, "spacing": 0.5},
                "drive": {"rabi": 0.02, "profile": {"kind": "cw"}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = base();
        assert_eq!(c.numerics, NumericsConfig::default());
        assert_eq!(c.drive.as_ref().unwrap().detuning, 0.0);
        c.validate(Experiment::Steady).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_json_str(r#"{"geometry": {"kind": "array", "nx": 1, "ny": 1, "spacing": 0.5}, "colour": 1}"#);
        assert!(matches!(e, Err(CliError::Schema(_))));
        let e = RunConfig::from_json_str(r#"{"geometry": {"kind": "array", "nx": 1, "ny": 1, "spacing": 0.5, "pitch": 2}}"#);
        assert!(matches!(e, Err(CliError::Schema(_))));
    }

    #[test]
    fn empty_geometry_is_a_schema_error() {
        let c = RunConfig::from_json_str(r#"{"geometry": {"kind": "array", "nx": 0, "ny": 4, "spacing": 0.5}}"#).unwrap();
        assert!(matches!(c.validate(Experiment::Eigenmodes), Err(CliError::Schema(_))));
    }

    #[test]
    fn experiment_requirements() {
        let c = base();
        assert!(c.validate(Experiment::Pulse).is_err());
        assert!(c.validate(Experiment::Decay).is_err());
        assert!(c.validate(Experiment::Cavity).is_err());
        assert!(c.validate(Experiment::Sweep).is_err());
        assert!(c.resolve_experiment(None).is_err());
        let mut c2 = c.clone();
        c2.experiment = Some(Experiment::Steady);
        assert_eq!(c2.resolve_experiment(None).unwrap(), Experiment::Steady);
        assert!(c2.resolve_experiment(Some(Experiment::Pulse)).is_err());
    }

    #[test]
    fn axis_grids() {
        let a = AxisConfig { parameter: SweepParameter::Detuning, values: vec![], start: Some(-1.0), stop: Some(1.0), points: Some(5) };
        assert_eq!(a.grid().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let single = AxisConfig { points: Some(1), ..a.clone() };
        assert_eq!(single.grid().unwrap(), vec![-1.0]);
        let both = AxisConfig { values: vec![0.0], ..a };
        assert!(both.grid().is_err());
    }

    #[test]
    fn round_trip() {
        let c = base();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json_str(&text).unwrap(), c);
    }

    #[test]
    fn schema_lists_experiments() {
        let s = RunConfig::schema().to_string();
        for name in ["eigenmodes", "decay", "pulse", "steady", "cavity", "sweep"] {
            assert!(s.contains(name));
        }
    }

    #[test]
    fn confocal_separation_sweep_keeps_radius() {
        let c = RunConfig::from_json_str(
            r#"{"geometry": {"kind": "cavity", "nx": 3, "ny": 3, "spacing": 0.75, "separation": 19.75, "curvature": {"kind": "confocal"}}}"#,
        )
        .unwrap();
        let moved = c.with_parameter(SweepParameter::Separation, 19.8).cavity_spec().unwrap();
        assert_eq!(moved.curvature, CurvatureKind::Spherical { radius: 19.75 });
        assert_eq!(moved.separation, 19.8);
    }
}
