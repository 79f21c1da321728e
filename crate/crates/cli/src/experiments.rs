//! One function per experiment. Every table is CSV with `{:.12e}` floats.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use arrayrecoil::analytic::{
    kz_closed_form, scattering_rate, steady_coefficients, EigenDecay, EigenstateDecay, GroundPopulation, SteadyEvaluator,
    SteadyRoute,
};
use arrayrecoil::eigenmodes::{decompose, mode_contribution, most_subradiant, EigenmodeSet};
use arrayrecoil::evolution::{
    pure_state_fast_path, CoefficientState, Method, PropagationEvaluator, Rk2, ShiftedConfiguration, StopCondition,
};
use arrayrecoil::geometry::AtomArray;
use arrayrecoil::greens::{assemble_greens, Coordinates};
use arrayrecoil::observables::{
    cavity_intensity, correlation, energy_per_photon, excitation_integral, finesse_adaptive, fwhm, photon_flux,
    pulse_photons, reflectance,
};
use arrayrecoil::recoil::{recoil_map, MapSelection, RecoilMode, RecoilResult, RhoGGEvaluator};
use arrayrecoil::C64;
use serde_json::{json, Value};

use crate::config::{Experiment, InitialConfig, MethodConfig, RunConfig, SweepParameter, SweepQuantity};
use crate::manifest::Manifest;
use crate::{io_err, CliError};

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub verbose: bool,
}

impl Context<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write(&self, manifest: &mut Manifest, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        manifest.record_file(self.out, name)
    }

    fn write_json(&self, manifest: &mut Manifest, name: &str, value: &Value) -> Result<(), CliError> {
        self.write(manifest, name, &(serde_json::to_string_pretty(value).expect("json") + "\n"))
    }
}

pub fn dispatch(experiment: Experiment, ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    match experiment {
        Experiment::Eigenmodes => eigenmodes(ctx, manifest),
        Experiment::Decay => decay(ctx, manifest),
        Experiment::Pulse => pulse(ctx, manifest),
        Experiment::Steady => steady(ctx, manifest),
        Experiment::Cavity => cavity(ctx, manifest),
        Experiment::Sweep => sweep(ctx, manifest),
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

fn modes_of(a: &AtomArray) -> Result<EigenmodeSet, CliError> {
    let g = assemble_greens(Coordinates::Unprimed(a.positions()), Coordinates::Unprimed(a.positions()), a.orientations())?;
    Ok(decompose(&g)?)
}

fn recoil_csv(a: &AtomArray, r: &RecoilResult) -> String {
    let mut s = String::from("atom,mirror,row,col,x,y,z,p_x,p_y,p_z,k_x,k_y,k_z,k_total\n");
    for (i, (pos, site)) in a.positions().iter().zip(a.sites()).enumerate() {
        let p = r.momentum[i];
        let k = r.kinetic[i];
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            site.mirror,
            site.row,
            site.col,
            fmt(pos[0]),
            fmt(pos[1]),
            fmt(pos[2]),
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(k[0]),
            fmt(k[1]),
            fmt(k[2]),
            fmt(r.kinetic_total(i))
        );
    }
    s
}

fn heatmap(a: &AtomArray, quantity: &str, values: &[f64]) -> Value {
    let mirrors: BTreeSet<u8> = a.sites().iter().map(|s| s.mirror).collect();
    let maps: Vec<Value> = mirrors
        .into_iter()
        .map(|m| json!({ "mirror": m, "values": a.to_grid(values, m) }))
        .collect();
    let (nx, ny) = a.lattice_shape().unwrap_or((a.len(), 1));
    json!({ "quantity": quantity, "rows": ny, "cols": nx, "maps": maps })
}

fn recoil_summary(r: &RecoilResult) -> Value {
    json!({
        "delta_r": r.delta_r,
        "evaluations": r.evaluations,
        "momentum_total": [r.momentum_axis_sum(0), r.momentum_axis_sum(1), r.momentum_axis_sum(2)],
        "kinetic_total": [r.kinetic_axis_sum(0), r.kinetic_axis_sum(1), r.kinetic_axis_sum(2)],
        "max_momentum_imag_ratio": r.max_imag_ratio,
        "max_kinetic_imag_ratio": r.max_kinetic_imag_ratio,
        "min_kinetic": r.min_kinetic,
    })
}

fn eigenmodes(ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    let a = Arc::new(ctx.config.build_array()?);
    ctx.log(format!("eigenmodes: {} atoms", a.len()));
    let ed = EigenstateDecay::new(a.clone())?;
    let kz = ed.kinetic_totals(2, ctx.config.numerics.delta_r)?;
    let m = ed.modes();
    let mut s = String::from("mode,gamma,shift,kinetic_z,kinetic_z_law\n");
    for (b, k) in kz.iter().enumerate() {
        let _ = writeln!(s, "{b},{},{},{},{}", fmt(m.gamma(b)), fmt(m.shift(b)), fmt(*k), fmt(kz_closed_form(m.gamma(b))?));
    }
    ctx.write(manifest, "modes.csv", &s)?;
    let beta = most_subradiant(m);
    ctx.write_json(
        manifest,
        "summary.json",
        &json!({
            "atoms": a.len(),
            "gamma_sum": (0..m.len()).map(|b| m.gamma(b)).sum::<f64>(),
            "most_subradiant": { "mode": beta, "gamma": m.gamma(beta), "shift": m.shift(beta) },
            "bilinear_gram_error": m.bilinear_gram_error(),
        }),
    )
}

fn initial_amplitudes(init: InitialConfig, modes: &EigenmodeSet, n: usize) -> Result<(Vec<C64>, Option<usize>), CliError> {
    match init {
        InitialConfig::Eigenstate { mode } => {
            if mode >= n {
                return Err(CliError::Schema(format!("mode {mode} out of range for {n} atoms")));
            }
            Ok((modes.vector(mode), Some(mode)))
        }
        InitialConfig::MostSubradiant => {
            let b = most_subradiant(modes);
            Ok((modes.vector(b), Some(b)))
        }
        InitialConfig::Atom { index } => {
            if index >= n {
                return Err(CliError::Schema(format!("atom {index} out of range for {n} atoms")));
            }
            let mut v = vec![C64::new(0.0, 0.0); n];
            v[index] = C64::new(1.0, 0.0);
            Ok((v, None))
        }
        InitialConfig::Dicke => Ok((vec![C64::new(1.0, 0.0); n], None)),
    }
}

fn decay(ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    let cfg = ctx.config;
    let a = Arc::new(cfg.build_array()?);
    let modes = modes_of(&a)?;
    let init = cfg.decay.expect("validated").initial;
    let (psi, beta) = initial_amplitudes(init, &modes, a.len())?;
    let n = &cfg.numerics;
    let eval: Box<dyn RhoGGEvaluator> = match n.method {
        MethodConfig::Auto | MethodConfig::Analytic => match beta {
            Some(b) => Box::new(EigenDecay::eigenstate(a.clone(), b)?),
            None => Box::new(EigenDecay::pure(a.clone(), &psi)?),
        },
        m => Box::new(PropagationEvaluator {
            base: a.clone(),
            initial: CoefficientState::pure_excitation(&psi, 0.0)?,
            drive: cfg.drive_spec(),
            stepper: Rk2 { dt: n.dt },
            stop: StopCondition::Decayed { epsilon: n.epsilon_decay, max_time: n.max_time },
            method: if m == MethodConfig::Full { Method::Full } else { Method::Fast },
        }),
    };
    ctx.log(format!("decay: {} atoms, {} evaluations", a.len(), 6 * a.len() + 1));
    let r = recoil_map(eval.as_ref(), n.delta_r, RecoilMode::Total, &MapSelection::default())?;
    ctx.write(manifest, "recoil.csv", &recoil_csv(&a, &r))?;
    let kin: Vec<f64> = (0..a.len()).map(|i| r.kinetic_total(i)).collect();
    ctx.write_json(manifest, "kinetic_heatmap.json", &heatmap(&a, "kinetic_total", &kin))?;
    let mut summary = json!({ "atoms": a.len(), "initial": init, "recoil": recoil_summary(&r) });
    if let Some(b) = beta {
        summary["mode"] = json!({
            "index": b,
            "gamma": modes.gamma(b),
            "shift": modes.shift(b),
            "kinetic_z_law": kz_closed_form(modes.gamma(b))?,
        });
    }
    ctx.write_json(manifest, "summary.json", &summary)
}

fn pulse(ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    let cfg = ctx.config;
    let a = Arc::new(cfg.build_array()?);
    let drive = cfg.drive_spec();
    let n = &cfg.numerics;
    let ground = CoefficientState::ground(a.len(), drive.start_time());
    let stepper = Rk2 { dt: n.dt };
    let stop = StopCondition::Decayed { epsilon: n.epsilon_decay, max_time: n.max_time };
    let method = if n.method == MethodConfig::Full { Method::Full } else { Method::Fast };
    ctx.log("pulse: excitation trajectory");
    let coincident = ShiftedConfiguration::new(a.clone());
    let traj = match method {
        Method::Full => arrayrecoil::evolution::propagate(&ground, &drive, &coincident, &stepper, &stop, Some(1))?,
        Method::Fast => pure_state_fast_path(&ground, &drive, &coincident, &stepper, &stop, Some(1))?,
    };
    let exc = excitation_integral(traj.trajectory.as_ref().expect("sampled"))?;
    ctx.write_json(manifest, "excitation_heatmap.json", &heatmap(&a, "excitation_integral", &exc))?;
    let eval = PropagationEvaluator { base: a.clone(), initial: ground, drive: drive.clone(), stepper, stop, method };
    ctx.log(format!("pulse: recoil map, {} evaluations", 6 * a.len() + 1));
    let r = recoil_map(&eval, n.delta_r, RecoilMode::Total, &MapSelection::default())?;
    ctx.write(manifest, "recoil.csv", &recoil_csv(&a, &r))?;
    let kz = r.kinetic_column(2);
    ctx.write_json(manifest, "kinetic_z_heatmap.json", &heatmap(&a, "kinetic_z", &kz))?;
    let width = match drive.profile {
        arrayrecoil::evolution::TemporalProfile::Gaussian { width } => width,
        _ => unreachable!("validated"),
    };
    let kmax = kz.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let corner = a.corner_atom(0).map(|c| kz[c] / kmax);
    ctx.write_json(
        manifest,
        "summary.json",
        &json!({
            "atoms": a.len(),
            "photons_per_site": pulse_photons(a.spacing(), drive.rabi, width)?,
            "ground_population_final": traj.state.rho_gg.re,
            "corner_over_max_kinetic_z": corner,
            "kinetic_z_excitation_correlation": correlation(&kz, &exc).ok(),
            "recoil": recoil_summary(&r),
        }),
    )
}

fn steady(ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    let cfg = ctx.config;
    let a = Arc::new(cfg.build_array()?);
    let drive = cfg.drive_spec();
    let n = &cfg.numerics;
    let eval: Box<dyn RhoGGEvaluator> = match n.method {
        MethodConfig::Auto | MethodConfig::Analytic => Box::new(SteadyEvaluator::new(a.clone(), drive.clone())),
        m => Box::new(PropagationEvaluator {
            base: a.clone(),
            initial: CoefficientState::ground(a.len(), 0.0),
            drive: drive.clone(),
            stepper: Rk2 { dt: n.dt },
            stop: StopCondition::Steady { tolerance: n.steady_tolerance, max_time: n.max_time },
            method: if m == MethodConfig::Full { Method::Full } else { Method::Fast },
        }),
    };
    ctx.log(format!("steady: recoil rates, {} evaluations", 6 * a.len() + 1));
    let r = recoil_map(eval.as_ref(), n.delta_r, RecoilMode::Rate, &MapSelection::default())?;
    ctx.write(manifest, "recoil_rate.csv", &recoil_csv(&a, &r))?;
    let kin: Vec<f64> = (0..a.len()).map(|i| r.kinetic_total(i)).collect();
    ctx.write_json(manifest, "kinetic_rate_heatmap.json", &heatmap(&a, "kinetic_rate_total", &kin))?;
    let sol = steady_coefficients(&ShiftedConfiguration::new(a.clone()), &drive, SteadyRoute::LinearSolve, GroundPopulation::Unity)?;
    let mut summary = json!({
        "atoms": a.len(),
        "scattering_rate": scattering_rate(&sol).re,
        "total_excitation": sol.populations().iter().map(|p| p.re).sum::<f64>(),
        "recoil": recoil_summary(&r),
    });
    if drive.rabi > 0.0 {
        let flux = photon_flux(a.spacing(), drive.rabi)?;
        let refl = reflectance(&r, flux, &a)?;
        let e = energy_per_photon(&r, flux)?;
        summary["photon_flux_per_site"] = json!(flux);
        summary["reflectance"] = json!(refl.average);
        summary["reflectance_without_edges"] = json!(refl.interior_average);
        summary["energy_per_photon"] = json!({
            "mean": e.iter().sum::<f64>() / e.len() as f64,
            "min": e.iter().cloned().fold(f64::INFINITY, f64::min),
            "max": e.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    ctx.write_json(manifest, "summary.json", &summary)
}

fn cavity(ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    let cfg = ctx.config;
    let spec = cfg.cavity_spec().expect("validated");
    let a = Arc::new(cfg.build_array()?);
    let modes = modes_of(&a)?;
    let mut s = String::from("mode,gamma,shift\n");
    for b in 0..modes.len() {
        let _ = writeln!(s, "{b},{},{}", fmt(modes.gamma(b)), fmt(modes.shift(b)));
    }
    ctx.write(manifest, "modes.csv", &s)?;
    let beta = most_subradiant(&modes);
    ctx.log(format!("cavity: most subradiant mode {beta}, gamma {:.3e}", modes.gamma(beta)));
    let eval = EigenDecay::eigenstate(a.clone(), beta)?;
    let center = a.center_atom(0).expect("non-empty mirror");
    let selection = MapSelection { atoms: Some(vec![center]), axes: [true; 3] };
    let r = recoil_map(&eval, cfg.numerics.delta_r, RecoilMode::Total, &selection)?;
    let mut summary = json!({
        "atoms": a.len(),
        "most_subradiant": { "mode": beta, "gamma": modes.gamma(beta), "shift": modes.shift(beta) },
        "center_atom": { "index": center, "momentum": r.momentum[center], "kinetic": r.kinetic[center] },
    });
    if let Some(opts) = cfg.cavity {
        if let Some(window) = opts.finesse_window {
            let mut drive = cfg.drive_spec();
            if drive.is_off() {
                drive = arrayrecoil::evolution::DriveSpec::cw(1e-3, 0.0);
            }
            drive.detuning = opts.detuning.unwrap_or(modes.shift(beta));
            ctx.log("cavity: finesse scan");
            let scan = finesse_adaptive(
                &spec,
                &drive,
                spec.separation - window,
                spec.separation + window,
                opts.coarse_points,
                opts.fine_points,
            );
            summary["finesse"] = match scan {
                Ok(f) => {
                    let mut t = String::from("separation,intensity\n");
                    for (l, i) in f.separations.iter().zip(&f.intensity) {
                        let _ = writeln!(t, "{},{}", fmt(*l), fmt(*i));
                    }
                    ctx.write(manifest, "finesse_scan.csv", &t)?;
                    json!({ "detuning": f.detuning, "peak_separation": f.peak_separation, "fwhm": f.fwhm, "finesse": f.finesse })
                }
                Err(e) => json!({ "error": e.to_string() }),
            };
        }
    }
    ctx.write_json(manifest, "summary.json", &summary)
}

const SWEEP_FILE: &str = "sweep.csv";

fn sweep_point(cfg: &RunConfig, quantity: SweepQuantity) -> Result<Vec<(String, Option<usize>, f64)>, CliError> {
    let drive = cfg.drive_spec();
    match quantity {
        SweepQuantity::ModeWeights => {
            let a = cfg.build_array()?;
            let modes = modes_of(&a)?;
            let omega = drive.spatial(a.positions())?;
            let mut rows = Vec::new();
            for w in mode_contribution(&modes, &omega, drive.detuning)? {
                rows.push(("weight".to_string(), Some(w.mode), w.weight));
                rows.push(("gamma".to_string(), Some(w.mode), w.gamma));
                rows.push(("shift".to_string(), Some(w.mode), w.shift));
            }
            Ok(rows)
        }
        SweepQuantity::Steady => {
            let a = Arc::new(cfg.build_array()?);
            let sol = steady_coefficients(&ShiftedConfiguration::new(a), &drive, SteadyRoute::LinearSolve, GroundPopulation::Unity)?;
            Ok(vec![
                ("excitation".to_string(), None, sol.populations().iter().map(|p| p.re).sum()),
                ("scattering_rate".to_string(), None, scattering_rate(&sol).re),
            ])
        }
        SweepQuantity::CavityIntensity => {
            let spec = cfg.cavity_spec().expect("validated");
            Ok(vec![("intensity".to_string(), None, cavity_intensity(&spec, spec.separation, &drive)?)])
        }
    }
}

fn sweep(ctx: &Context<'_>, manifest: &mut Manifest) -> Result<(), CliError> {
    let cfg = ctx.config;
    let sw = cfg.sweep.as_ref().expect("validated");
    let grids: Vec<Vec<f64>> = sw.axes.iter().map(|a| a.grid()).collect::<Result<_, _>>()?;
    let points: Vec<Vec<f64>> = match grids.len() {
        1 => grids[0].iter().map(|v| vec![*v]).collect(),
        _ => grids[0].iter().flat_map(|u| grids[1].iter().map(move |v| vec![*u, *v])).collect(),
    };
    let mut header = String::from("point");
    for a in &sw.axes {
        header.push(',');
        header.push_str(a.parameter.name());
    }
    header.push_str(",quantity,index,value\n");

    // Keep rows of points finished by an earlier, interrupted run.
    let path = ctx.out.join(SWEEP_FILE);
    let done: BTreeSet<usize> = manifest.completed_points.iter().copied().collect();
    let mut kept = header.clone();
    if !done.is_empty() {
        match std::fs::read_to_string(&path) {
            Ok(old) => {
                for line in old.lines().skip(1) {
                    let idx = line.split(',').next().and_then(|t| t.parse::<usize>().ok());
                    if idx.is_some_and(|i| done.contains(&i)) {
                        kept.push_str(line);
                        kept.push('\n');
                    }
                }
            }
            Err(_) => manifest.completed_points.clear(),
        }
    }
    let done: BTreeSet<usize> = manifest.completed_points.iter().copied().collect();
    std::fs::write(&path, &kept).map_err(|e| io_err(&path, e))?;
    let mut file = std::fs::OpenOptions::new().append(true).open(&path).map_err(|e| io_err(&path, e))?;
    ctx.log(format!("sweep: {} points, {} already done", points.len(), done.len()));

    for (k, values) in points.iter().enumerate() {
        if done.contains(&k) {
            continue;
        }
        let mut point_cfg = cfg.clone();
        for (axis, v) in sw.axes.iter().zip(values) {
            point_cfg = point_cfg.with_parameter(axis.parameter, *v);
        }
        let rows = sweep_point(&point_cfg, sw.quantity)?;
        let mut chunk = String::new();
        for (q, idx, val) in rows {
            let _ = write!(chunk, "{k}");
            for v in values {
                let _ = write!(chunk, ",{}", fmt(*v));
            }
            let idx = idx.map(|i| i.to_string()).unwrap_or_default();
            let _ = writeln!(chunk, ",{q},{idx},{}", fmt(val));
        }
        file.write_all(chunk.as_bytes()).map_err(|e| io_err(&path, e))?;
        file.flush().map_err(|e| io_err(&path, e))?;
        manifest.completed_points.push(k);
        manifest.record_file(ctx.out, SWEEP_FILE)?;
        manifest.write(ctx.out)?;
    }
    manifest.completed_points.sort_unstable();
    manifest.record_file(ctx.out, SWEEP_FILE)?;

    let mut summary = json!({ "points": points.len(), "quantity": sw.quantity });
    if sw.axes.len() == 1 {
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        let series = |quantity: &str, index: &str| -> (Vec<f64>, Vec<f64>) {
            let mut pairs: Vec<(usize, f64, f64)> = rows
                .iter()
                .filter(|r| r[2] == quantity && r[3] == index)
                .map(|r| (r[0].parse().unwrap_or(0), r[1].parse().unwrap_or(f64::NAN), r[4].parse().unwrap_or(f64::NAN)))
                .collect();
            pairs.sort_by_key(|p| p.0);
            (pairs.iter().map(|p| p.1).collect(), pairs.iter().map(|p| p.2).collect())
        };
        match (sw.quantity, sw.axes[0].parameter) {
            (SweepQuantity::CavityIntensity, SweepParameter::Separation) => {
                let (x, y) = series("intensity", "");
                summary["finesse"] = match fwhm(&x, &y) {
                    Ok((peak, w)) => json!({ "peak_separation": x[peak], "fwhm": w, "finesse": 0.5 / w }),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
            (SweepQuantity::ModeWeights, SweepParameter::Detuning) => {
                let nmodes = rows.iter().filter(|r| r[0] == "0" && r[2] == "weight").count();
                let mut peaks = Vec::new();
                for m in 0..nmodes {
                    let (x, y) = series("weight", &m.to_string());
                    let (_, shift) = series("shift", &m.to_string());
                    let best = (0..y.len()).max_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap_or(0);
                    peaks.push(json!({ "mode": m, "shift": shift.first(), "peak_detuning": x.get(best), "peak_weight": y.get(best) }));
                }
                summary["mode_peaks"] = json!(peaks);
            }
            _ => {}
        }
    }
    ctx.write_json(manifest, "summary.json", &summary)
}
