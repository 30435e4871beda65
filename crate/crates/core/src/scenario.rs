//! Seeded, self-contained runs that regenerate each experiment's data
//! products, plus concurrent parameter sweeps over them.
//!
//! A [`Scenario`] carries its whole parameter set. [`run_scenario`] writes the
//! outputs and a `manifest.toml` holding the scenario, the code version and a
//! sha256 per output; running the manifest's scenario again reproduces every
//! file bit for bit.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    AnalysisSection, Arrangement, CameraSection, Config, DriveSection, LaserSection, ProbeSection,
    SimSection, TrapSection,
};
use crate::constants::{BOLTZMANN, MG_LINEWIDTH_HZ};
use crate::dynamics::{
    amplitude_for_coupling, coupling_rate, decompose, doppler_limit, linearized_damping_rates,
    radiation_pressure_offset, run_observed, IonState, LinearRates, PhotonRecord, RunStats, Scene,
    Trajectory,
};
use crate::envelope::{
    classify_regime, default_tolerance, envelope_eigenvalues, envelope_series,
    find_stable_orbit_radius, find_stable_orbit_radius_resolved, magnetron_overlap_factor,
    overlap_envelope_series, overlap_factor, EnvelopeParams, EnvelopeState, OverlapModel,
};
use crate::error::{Error, Result};
use crate::imaging::{count_lobes, measure_spot_size, Image};
use crate::io;
use crate::photon_stats::{
    correlated_fraction, detrend_and_fft_with, fraction_at, phase_of, phase_response_scan,
    waiting_time_histogram, PhaseMeasurement, SpectrumPeaks,
};
use crate::trap::{field_for_cyclotron_frequency, ModeFrequencies};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// File written next to the outputs of every run.
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Fig2Cycling,
    Fig2Axialise,
    Fig2Orbit,
    Fig4Sweep,
    Fig5PhaseScan,
    Fig6OrbitCorrelation,
    DopplerEquilibrium,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::Fig2Cycling,
        ScenarioKind::Fig2Axialise,
        ScenarioKind::Fig2Orbit,
        ScenarioKind::Fig4Sweep,
        ScenarioKind::Fig5PhaseScan,
        ScenarioKind::Fig6OrbitCorrelation,
        ScenarioKind::DopplerEquilibrium,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Fig2Cycling => "fig2-cycling",
            ScenarioKind::Fig2Axialise => "fig2-axialise",
            ScenarioKind::Fig2Orbit => "fig2-orbit",
            ScenarioKind::Fig4Sweep => "fig4-sweep",
            ScenarioKind::Fig5PhaseScan => "fig5-phase-scan",
            ScenarioKind::Fig6OrbitCorrelation => "fig6-orbit-correlation",
            ScenarioKind::DopplerEquilibrium => "doppler-equilibrium",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown scenario {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// What a scenario does with its base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Plan {
    /// Envelope model beside the full dynamics of one ion.
    Envelope {
        /// Use radius-dependent rates from the beam overlap in the model.
        overlap: bool,
        envelope_dt_s: f64,
        /// Keep every n-th recorded sample in the trajectory CSV.
        trajectory_stride: usize,
        /// Trailing window over which the orbit radius is judged.
        final_window_s: f64,
    },
    /// One run per drive frequency, imaged after `image_after_s`.
    DriveSweep {
        drive_frequencies_hz: Vec<f64>,
        image_after_s: f64,
    },
    /// rf-photon phase scans across the magnetron resonance, one per drive
    /// amplitude.
    PhaseScan {
        amplitudes_v: Vec<f64>,
        points: usize,
        /// Scan half-width in units of the predicted damping rate.
        span_rates: f64,
        /// Settling time in units of the inverse predicted rate.
        settle_rates: f64,
        window_s: f64,
        /// Driven magnetron amplitude the probe strength is set for, m.
        response_m: f64,
    },
    /// Photon-photon correlation of a coherent orbit plus an incoherent control.
    Correlation {
        trajectory_stride: usize,
        control_count: usize,
        control_coulomb: bool,
    },
    /// Laser-cooling equilibrium of one ion.
    Equilibrium {
        settle_s: f64,
        trajectory_stride: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioKind,
    pub seed: u64,
    pub plan: Plan,
    /// Resolved base configuration.
    pub config: Config,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.config.resolve()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub outputs: Vec<OutputFile>,
    /// Headline numbers of the run, keyed by name with unit suffixes.
    pub metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

fn linewidth_hz() -> f64 {
    MG_LINEWIDTH_HZ
}

/// Beam in the x-z plane, `tilt_deg` above the radial plane.
fn tilted(tilt_deg: f64) -> [f64; 3] {
    let t = tilt_deg.to_radians();
    [t.cos(), 0.0, t.sin()]
}

fn base(seed: u64, duration: f64) -> Config {
    Config {
        trap: Some(TrapSection {
            b_tesla: 1.0,
            v_volts: None,
            magnetron_hz: Some(31.6e3),
            r0_m: 5e-3,
            z0_m: None,
        }),
        sim: Some(SimSection {
            dt_s: None,
            duration_s: duration,
            seed,
            detection_efficiency: 1e-3,
            coulomb: true,
            scattering_mode: "monte-carlo".into(),
            sample_stride: 10,
            background_rate_hz: 0.0,
        }),
        ..Config::default()
    }
}

fn laser(detuning_linewidths: f64, saturation: f64, waist: f64, offset: f64, dir: [f64; 3]) -> LaserSection {
    LaserSection {
        detuning_hz: detuning_linewidths * linewidth_hz(),
        saturation,
        waist_m: waist,
        offset_m: offset,
        direction: dir,
    }
}

fn sim_mut(c: &mut Config) -> &mut SimSection {
    c.sim.as_mut().expect("scenario configs have a sim section")
}

/// Rates of the config's beam at the trap centre.
fn rates_of(c: &Config) -> Result<Option<LinearRates>> {
    let Some(l) = c.laser_params()? else {
        return Ok(None);
    };
    Ok(Some(linearized_damping_rates(&l, &c.particle()?, &c.frequencies()?)))
}

/// Set the drive amplitude (with gradient factor `kappa`) giving coupling `delta`.
fn set_coupling(c: &mut Config, delta: f64, kappa: f64) -> Result<()> {
    let species = c.particle()?;
    let scene = c.scene()?;
    let f = c.frequencies()?;
    let amplitude = amplitude_for_coupling(delta, kappa, &species, &scene.geometry, &f);
    c.drive = Some(DriveSection {
        amplitude_v: amplitude,
        frequency_hz: Some(f.omega_c / (2.0 * PI)),
        phase_rad: 0.0,
        kappa,
    });
    Ok(())
}

/// Default parameter set of a named scenario.
pub fn preset(kind: ScenarioKind, seed: u64) -> Result<Scenario> {
    let (mut config, plan) = match kind {
        ScenarioKind::Fig2Cycling => {
            let mut c = base(seed, 6.5e-3);
            sim_mut(&mut c).scattering_mode = "continuous-drag".into();
            c.ions.magnetron_radius_m = 10e-6;
            c.resolve()?;
            set_coupling(&mut c, 1000.0, 0.5)?;
            (c, envelope_plan(false, 10e-3 / 2.0))
        }
        ScenarioKind::Fig2Axialise => {
            let mut c = base(seed, 10e-3);
            sim_mut(&mut c).scattering_mode = "continuous-drag".into();
            c.laser = Some(laser(-5.0, 1.0, 50e-6, 0.0, [1.0, 0.0, 0.0]));
            c.ions.magnetron_radius_m = 2e-6;
            c.resolve()?;
            set_coupling(&mut c, 1000.0, 0.5)?;
            (c, envelope_plan(false, 5e-3))
        }
        ScenarioKind::Fig2Orbit => {
            let mut c = base(seed, 80e-3);
            let s = sim_mut(&mut c);
            s.scattering_mode = "continuous-drag".into();
            s.sample_stride = 100;
            c.laser = Some(laser(-5.0, 5.0, 20e-6, 0.0, [1.0, 0.0, 0.0]));
            c.ions.magnetron_radius_m = 7e-6;
            c.resolve()?;
            let r = rates_of(&c)?.expect("laser present");
            // half the coupling that would axialise at full overlap
            set_coupling(&mut c, 0.5 * (-r.gamma_c * r.gamma_m).sqrt(), 0.5)?;
            (c, envelope_plan(true, 50e-3))
        }
        ScenarioKind::Fig4Sweep => {
            let mut c = base(seed, 30e-3);
            let species = c.particle()?;
            let t = c.trap.as_mut().expect("trap");
            t.b_tesla = field_for_cyclotron_frequency(&species, 627e3);
            sim_mut(&mut c).coulomb = false;
            c.laser = Some(laser(-5.0, 5.0, 20e-6, 0.0, tilted(10.0)));
            // independent ions; an interacting crystal holds its radius by
            // repulsion whatever the drive does
            c.ions.count = 5;
            c.ions.arrangement = Arrangement::Incoherent;
            c.ions.magnetron_radius_m = 10e-6;
            c.camera = Some(CameraSection {
                width_px: 129,
                height_px: 129,
                exposure_s: 20e-3,
                ..CameraSection::default()
            });
            c.resolve()?;
            set_coupling(&mut c, 2200.0, 0.5)?;
            let plan = Plan::DriveSweep {
                drive_frequencies_hz: (0..6).map(|k| 621e3 + 2e3 * k as f64).collect(),
                image_after_s: 10e-3,
            };
            (c, plan)
        }
        ScenarioKind::Fig5PhaseScan => {
            let mut c = base(seed, 0.0);
            let s = sim_mut(&mut c);
            s.detection_efficiency = 1.0;
            s.sample_stride = 1000;
            s.coulomb = false;
            c.laser = Some(laser(-0.5, 0.02, 20e-6, 0.35 * 20e-6, tilted(10.0)));
            c.resolve()?;
            // gradient factor that gives 1200 s^-1 of coupling per volt
            let species = c.particle()?;
            let f = c.frequencies()?;
            let geometry = c.scene()?.geometry;
            let kappa = amplitude_for_coupling(1200.0, 1.0, &species, &geometry, &f);
            c.drive = Some(DriveSection {
                amplitude_v: 0.0,
                frequency_hz: Some(f.omega_c / (2.0 * PI)),
                phase_rad: 0.0,
                kappa,
            });
            let plan = Plan::PhaseScan {
                amplitudes_v: vec![0.0, 0.5, 1.0, 1.5],
                points: 11,
                span_rates: 2.5,
                settle_rates: 3.0,
                window_s: 160e-3,
                response_m: 3e-6,
            };
            (c, plan)
        }
        ScenarioKind::Fig6OrbitCorrelation => {
            let mut c = base(seed, 0.2);
            let s = sim_mut(&mut c);
            s.background_rate_hz = 2e4;
            c.laser = Some(laser(-5.0, 5.0, 100e-6, 0.0, tilted(10.0)));
            c.ions.count = 3;
            c.ions.magnetron_radius_m = 75e-6;
            c.ions.cyclotron_radius_m = 7.5e-6;
            c.ions.crystal_rotation = 0.5;
            c.camera = Some(CameraSection {
                exposure_s: 0.2,
                ..CameraSection::default()
            });
            c.analysis = Some(AnalysisSection {
                bin_width_s: 5e-8,
                max_lag_s: 1e-4,
                ..AnalysisSection::default()
            });
            c.resolve()?;
            let r = rates_of(&c)?.expect("laser present");
            set_coupling(&mut c, 0.5 * (-r.gamma_c * r.gamma_m).sqrt(), 0.5)?;
            let plan = Plan::Correlation {
                trajectory_stride: 100,
                control_count: 5,
                control_coulomb: false,
            };
            (c, plan)
        }
        ScenarioKind::DopplerEquilibrium => {
            let mut c = base(seed, 30e-3);
            // cos^2(t)/2 = sin^2(t): the beam couples equally to x, y and z
            let tilt = (0.5f64).sqrt().atan().to_degrees();
            c.laser = Some(laser(-0.5, 0.5, 50e-6, 25e-6, tilted(tilt)));
            c.resolve()?;
            let plan = Plan::Equilibrium {
                settle_s: 10e-3,
                trajectory_stride: 100,
            };
            (c, plan)
        }
    };
    config.resolve()?;
    Ok(Scenario {
        name: kind,
        seed,
        plan,
        config,
    })
}

fn envelope_plan(overlap: bool, final_window_s: f64) -> Plan {
    Plan::Envelope {
        overlap,
        envelope_dt_s: 1e-5,
        trajectory_stride: 10,
        final_window_s,
    }
}

/// Collects output files and metrics of one run.
struct Run<'a> {
    dir: &'a Path,
    outputs: Vec<String>,
    metrics: BTreeMap<String, f64>,
}

impl<'a> Run<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }
}

/// Run a scenario into `out_dir` and write its manifest there.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunManifest> {
    let wrap = |e: Error| match e {
        Error::Scenario { .. } => e,
        other => Error::Scenario {
            scenario: s.name.name().to_string(),
            source: Box::new(other),
        },
    };
    std::fs::create_dir_all(out_dir)
        .map_err(|e| wrap(Error::Io(format!("{}: {e}", out_dir.display()))))?;
    let mut run = Run {
        dir: out_dir,
        outputs: Vec::new(),
        metrics: BTreeMap::new(),
    };
    match &s.plan {
        Plan::Envelope {
            overlap,
            envelope_dt_s,
            trajectory_stride,
            final_window_s,
        } => run_envelope(
            &s.config,
            *overlap,
            *envelope_dt_s,
            *trajectory_stride,
            *final_window_s,
            &mut run,
        ),
        Plan::DriveSweep {
            drive_frequencies_hz,
            image_after_s,
        } => run_drive_sweep(&s.config, drive_frequencies_hz, *image_after_s, &mut run),
        Plan::PhaseScan { .. } => run_phase_scan(&s.config, &s.plan, &mut run),
        Plan::Correlation {
            trajectory_stride,
            control_count,
            control_coulomb,
        } => run_correlation(
            &s.config,
            *trajectory_stride,
            *control_count,
            *control_coulomb,
            &mut run,
        ),
        Plan::Equilibrium {
            settle_s,
            trajectory_stride,
        } => run_equilibrium(&s.config, *settle_s, *trajectory_stride, &mut run),
    }
    .map_err(wrap)?;
    let outputs = run
        .outputs
        .iter()
        .map(|p| {
            Ok(OutputFile {
                path: p.clone(),
                sha256: io::sha256_file(&out_dir.join(p))?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)?;
    let manifest = RunManifest {
        code_version: CODE_VERSION.to_string(),
        seed: s.seed,
        scenario: s.clone(),
        outputs,
        metrics: run.metrics,
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), manifest.to_toml())
        .map_err(|e| wrap(Error::Io(e.to_string())))?;
    Ok(manifest)
}

/// Re-run the scenario recorded in a manifest into `out_dir` and report
/// whether every output checksum matches.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<(RunManifest, bool)> {
    let again = run_scenario(&manifest.scenario, out_dir)?;
    let same = again.outputs == manifest.outputs;
    Ok((again, same))
}

/// Run `config`, handing each recorded sample to `observe`.
fn simulate<F>(config: &Config, observe: F) -> Result<(Scene, PhotonRecord, RunStats)>
where
    F: FnMut(f64, &[IonState]),
{
    let scene = config.scene()?;
    let sim = config.sim_config()?;
    let (photons, stats) = run_observed(&sim, &scene, observe)?;
    Ok((scene, photons, stats))
}

/// Least-squares slope of `ln y` against `t`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, y)| (t, y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    sxy / sxx
}

/// Coefficient of determination of a straight-line fit.
pub fn linear_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

/// Decay rate of the envelope norm `sqrt(r_c^2 + r_m^2)` while it stays above
/// 2% of its start value.
pub fn envelope_decay_rate(series: &[(f64, EnvelopeState)]) -> f64 {
    let norm = |s: &EnvelopeState| s.r_c().hypot(s.r_m());
    let Some(first) = series.first() else {
        return f64::NAN;
    };
    let floor = 0.02 * norm(&first.1);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .take_while(|(_, s)| norm(s) > floor)
        .map(|(t, s)| (*t, norm(s)))
        .collect();
    -log_slope(&pts)
}

/// Largest relative departure of `r_c^2 + r_m^2` from its start value.
pub fn conservation_error(series: &[(f64, EnvelopeState)]) -> f64 {
    let n2 = |s: &EnvelopeState| s.r_c().powi(2) + s.r_m().powi(2);
    let Some(first) = series.first() else {
        return f64::NAN;
    };
    let n0 = n2(&first.1);
    series
        .iter()
        .map(|(_, s)| (n2(s) / n0 - 1.0).abs())
        .fold(0.0, f64::max)
}

fn run_envelope(
    config: &Config,
    overlap: bool,
    envelope_dt: f64,
    trajectory_stride: usize,
    final_window: f64,
    run: &mut Run<'_>,
) -> Result<()> {
    let scene = config.scene()?;
    let f = scene.frequencies()?;
    let duration = config.sim_config()?.duration;
    let rates = rates_of(config)?.unwrap_or(LinearRates {
        gamma_c: 0.0,
        gamma_m: 0.0,
        gamma_z: 0.0,
    });
    let delta = scene
        .drive
        .as_ref()
        .map(|d| coupling_rate(d, &scene.species, &scene.geometry, &f))
        .unwrap_or(0.0);
    let params = EnvelopeParams::new(delta, rates.gamma_c, rates.gamma_m)?;
    let centre = radiation_pressure_offset(&scene.lasers, &scene.species, &f);
    let start = decompose(&shifted(&scene.ions[0], &centre), &f);
    let s0 = EnvelopeState::new(start.r_c(), start.r_m())?;
    run.metric("delta_per_s", delta);
    run.metric("gamma_c_per_s", rates.gamma_c);
    run.metric("gamma_m_per_s", rates.gamma_m);
    run.metric("slow_rate_per_s", -envelope_eigenvalues(&params).0.re);
    if delta > 0.0 {
        run.metric("quarter_period_s", PI / (2.0 * delta));
    }

    let (model, regime) = if overlap {
        let laser = scene
            .lasers
            .first()
            .ok_or_else(|| Error::Config("overlap envelope needs a laser".into()))?;
        let om = OverlapModel::new(laser.waist, laser.offset, rates.gamma_c, rates.gamma_m)?;
        let resolved = find_stable_orbit_radius_resolved(&om, delta)?;
        run.metric("predicted_radius_m", resolved.radius);
        run.metric(
            "predicted_radius_scalar_m",
            find_stable_orbit_radius(&om, delta)?.radius,
        );
        let at = EnvelopeParams::new(
            delta,
            rates.gamma_c * overlap_factor(&om, resolved.radius)?,
            rates.gamma_m * magnetron_overlap_factor(&om, resolved.radius)?,
        )?;
        let regime = classify_regime(&at, default_tolerance(&at))?.kind;
        let series = overlap_envelope_series(&om, delta, &s0, duration, envelope_dt)?;
        if let Some((_, last)) = series.last() {
            run.metric("model_final_radius_m", last.r_m());
        }
        (series, regime)
    } else {
        let regime = classify_regime(&params, default_tolerance(&params))?.kind;
        (envelope_series(&params, &s0, duration, envelope_dt)?, regime)
    };
    run.metric("model_decay_rate_per_s", envelope_decay_rate(&model));
    run.metric("model_conservation_error", conservation_error(&model));
    io::save_envelope(&run.path("envelope.csv"), &model, regime)?;

    let mut sim_series: Vec<(f64, EnvelopeState)> = Vec::new();
    let mut traj = Trajectory::default();
    let mut k = 0usize;
    let mut bad = None;
    simulate(config, |t, states| {
        let m = decompose(&shifted(&states[0], &centre), &f);
        match EnvelopeState::new(m.r_c(), m.r_m()) {
            Ok(s) => sim_series.push((t, s)),
            Err(e) => bad = Some(e),
        }
        if k % trajectory_stride.max(1) == 0 {
            traj.times.push(t);
            traj.n_ions = states.len();
            traj.states.extend_from_slice(states);
        }
        k += 1;
    })?;
    if let Some(e) = bad {
        return Err(e);
    }
    io::save_envelope(&run.path("dynamics_envelope.csv"), &sim_series, regime)?;
    io::save_trajectory(&run.path("trajectory.csv"), &traj)?;

    run.metric("sim_decay_rate_per_s", envelope_decay_rate(&sim_series));
    run.metric("sim_conservation_error", conservation_error(&sim_series));
    if let Some(&(_, first)) = sim_series.first() {
        let r0 = first.r_c().hypot(first.r_m());
        if delta > 0.0 {
            // one full exchange takes half a period of the rotation
            let half = PI / delta;
            let early = sim_series.iter().filter(|(t, _)| *t <= half);
            let (t_min, min_rm) = early
                .clone()
                .map(|(t, s)| (*t, s.r_m()))
                .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            let max_rc = early.map(|(_, s)| s.r_c()).fold(0.0, f64::max);
            run.metric("sim_min_r_m_ratio", min_rm / r0);
            run.metric("sim_max_r_c_ratio", max_rc / r0);
            run.metric("sim_exchange_time_s", t_min);
        }
    }
    let (mean, spread) = final_radius(&sim_series, final_window);
    run.metric("sim_final_radius_m", mean);
    run.metric("sim_final_radius_spread", spread);
    Ok(())
}

fn shifted(s: &IonState, centre: &Vector3<f64>) -> IonState {
    IonState::new(s.position - centre, s.velocity)
}

/// Mean magnetron radius over the trailing `window` and the relative spread
/// `(max - min) / mean` of its 1 ms block averages.
pub fn final_radius(series: &[(f64, EnvelopeState)], window: f64) -> (f64, f64) {
    let Some(&(t_end, _)) = series.last() else {
        return (f64::NAN, f64::NAN);
    };
    let tail: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= t_end - window)
        .map(|(t, s)| (*t, s.r_m()))
        .collect();
    if tail.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64;
    let t0 = tail[0].0;
    let mut blocks: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (t, r) in &tail {
        let e = blocks.entry(((t - t0) / 1e-3) as i64).or_insert((0.0, 0));
        e.0 += r;
        e.1 += 1;
    }
    let avgs: Vec<f64> = blocks.values().map(|(s, n)| s / *n as f64).collect();
    let hi = avgs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = avgs.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, (hi - lo) / mean)
}

/// Run `config` and image the fluorescence recorded after `after` seconds.
fn imaged_run(
    config: &Config,
    after: f64,
) -> Result<(Image, PhotonRecord, Scene, Trajectory, usize)> {
    let scene = config.scene()?;
    let sim = config.sim_config()?;
    let camera = config.camera_model()?;
    let interval = sim.dt * sim.sample_stride as f64;
    let mut img = Image::blank(&camera);
    let stride = 100;
    let mut traj = Trajectory::default();
    let mut k = 0usize;
    let (photons, _) = run_observed(&sim, &scene, |t, states| {
        if t >= after {
            for s in states {
                let rate: f64 = scene
                    .lasers
                    .iter()
                    .map(|l| crate::dynamics::scattering_rate(s, l, &scene.species))
                    .sum();
                let (x, z) = camera.project(&s.position);
                img.deposit(&camera, x, z, rate * sim.detection_efficiency * interval);
            }
        }
        if k % stride == 0 {
            traj.times.push(t);
            traj.n_ions = states.len();
            traj.states.extend_from_slice(states);
        }
        k += 1;
    })?;
    Ok((img, photons, scene, traj, stride))
}

fn run_drive_sweep(
    config: &Config,
    frequencies: &[f64],
    after: f64,
    run: &mut Run<'_>,
) -> Result<()> {
    if frequencies.is_empty() {
        return Err(Error::Config("drive sweep needs at least one frequency".into()));
    }
    let f = config.frequencies()?;
    let seed = config.sim_config()?.rng_seed;
    let results: Vec<Result<Image>> = frequencies
        .par_iter()
        .enumerate()
        .map(|(k, &fd)| {
            let mut c = config.clone();
            c.drive
                .as_mut()
                .ok_or_else(|| Error::Config("drive sweep needs a [drive] section".into()))?
                .frequency_hz = Some(fd);
            sim_mut(&mut c).seed = seed.wrapping_add(k as u64);
            imaged_run(&c, after).map(|r| r.0)
        })
        .collect();
    let mut rows = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for (k, (fd, res)) in frequencies.iter().zip(results).enumerate() {
        let sizes = res.and_then(|img| {
            io::save_image(&run.path(&format!("image_{k}.pgm")), &img)?;
            run.outputs.push(format!("image_{k}.pgm.txt"));
            measure_spot_size(&img)
        });
        let (row, size) = match sizes {
            Ok(s) => {
                let size = s.rms_x.hypot(s.rms_z);
                (
                    vec![
                        fd.to_string(),
                        s.rms_x.to_string(),
                        s.rms_z.to_string(),
                        s.fwhm_x.to_string(),
                        s.fwhm_z.to_string(),
                        size.to_string(),
                        String::new(),
                    ],
                    size,
                )
            }
            Err(e) => (
                vec![
                    fd.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("{}: {e}", e.kind()),
                ],
                f64::NAN,
            ),
        };
        rows.push(row);
        run.metric(format!("point{k}_drive_hz"), *fd);
        run.metric(format!("point{k}_size_m"), size);
        if size.is_finite() && best.is_none_or(|b| size < b.1) {
            best = Some((*fd, size));
        }
    }
    run.metric("true_cyclotron_hz", f.omega_c / (2.0 * PI));
    run.metric("best_drive_hz", best.map_or(f64::NAN, |b| b.0));
    io::save_table(
        &run.path("sizes.csv"),
        &["drive_hz", "rms_x_m", "rms_z_m", "fwhm_x_m", "fwhm_z_m", "size_m", "error"],
        &rows,
    )
}

/// Slowest decay rate of the coupled modes for the config's beam and drive.
fn predicted_magnetron_rate(c: &Config) -> Result<(f64, f64, ModeFrequencies)> {
    let scene = c.scene()?;
    let f = scene.frequencies()?;
    let r = rates_of(c)?.ok_or_else(|| Error::Config("phase scan needs a laser".into()))?;
    let delta = scene
        .drive
        .as_ref()
        .map(|d| coupling_rate(d, &scene.species, &scene.geometry, &f))
        .unwrap_or(0.0);
    let p = EnvelopeParams::new(delta, r.gamma_c, r.gamma_m)?;
    Ok((-envelope_eigenvalues(&p).0.re, delta, f))
}

fn run_phase_scan(config: &Config, plan: &Plan, run: &mut Run<'_>) -> Result<()> {
    let Plan::PhaseScan {
        amplitudes_v,
        points,
        span_rates,
        settle_rates,
        window_s,
        response_m,
    } = plan
    else {
        unreachable!("called with a phase-scan plan");
    };
    if amplitudes_v.is_empty() || *points < 3 {
        return Err(Error::Config(
            "phase scan needs at least one amplitude and three points".into(),
        ));
    }
    let seed = config.sim_config()?.rng_seed;
    let species = config.particle()?;
    // one config per scan point, all independent
    let mut jobs: Vec<(usize, usize, Config, f64, f64)> = Vec::new();
    let mut predicted = Vec::new();
    for (j, &amp) in amplitudes_v.iter().enumerate() {
        let mut c = config.clone();
        c.drive
            .as_mut()
            .ok_or_else(|| Error::Config("phase scan needs a [drive] section".into()))?
            .amplitude_v = amp;
        let (gamma, delta, f) = predicted_magnetron_rate(&c)?;
        if !(gamma > 0.0) {
            return Err(Error::Unreachable(format!(
                "magnetron motion is not damped at {amp} V (rate {gamma})"
            )));
        }
        predicted.push((gamma, delta));
        let field = 2.0 * species.mass() * f.radial_splitting() * gamma * response_m
            / species.charge();
        let settle = settle_rates / gamma;
        for k in 0..*points {
            let x = -1.0 + 2.0 * k as f64 / (*points - 1) as f64;
            let omega = f.omega_m + span_rates * gamma * x;
            let mut p = c.clone();
            p.probe = Some(ProbeSection {
                amplitude_v_per_m: field,
                frequency_hz: omega / (2.0 * PI),
                phase_rad: 0.0,
                direction: [1.0, 0.0, 0.0],
            });
            let s = sim_mut(&mut p);
            s.duration_s = settle + window_s;
            s.seed = seed.wrapping_add((j * points + k) as u64);
            jobs.push((j, k, p, omega, settle));
        }
    }
    let measured: Vec<Result<PhaseMeasurement>> = jobs
        .par_iter()
        .map(|(_, _, p, omega, settle)| {
            let (_, photons, _) = simulate(p, |_, _| {})?;
            let ts: Vec<f64> = photons
                .timestamps
                .iter()
                .copied()
                .filter(|&t| t >= *settle)
                .collect();
            phase_of(&ts, *omega, photons.reference_phase)
        })
        .collect();
    let mut fitted = Vec::new();
    for (j, &amp) in amplitudes_v.iter().enumerate() {
        let scan: Vec<PhaseMeasurement> = jobs
            .iter()
            .zip(&measured)
            .filter(|((jj, ..), _)| *jj == j)
            .filter_map(|(_, m)| m.as_ref().ok().copied())
            .collect();
        io::save_phase_scan(&run.path(&format!("phase_scan_{j}.csv")), &scan)?;
        let (gamma_pred, delta) = predicted[j];
        run.metric(format!("amplitude_{j}_v"), amp);
        run.metric(format!("delta_{j}_per_s"), delta);
        run.metric(format!("predicted_gamma_{j}_per_s"), gamma_pred);
        run.metric(format!("points_{j}"), scan.len() as f64);
        let fit = phase_response_scan(&scan)?;
        std::fs::write(
            run.path(&format!("phase_fit_{j}.txt")),
            io::phase_fit_lines(&fit),
        )?;
        run.metric(format!("gamma_{j}_per_s"), fit.gamma);
        run.metric(
            format!("omega_0_offset_{j}_per_s"),
            fit.omega_0 - config.frequencies()?.omega_m,
        );
        run.metric(format!("residual_{j}"), fit.residual);
        fitted.push((amp, fit.gamma));
    }
    let first = fitted[0].1;
    let last = fitted[fitted.len() - 1].1;
    run.metric("gamma_ratio", last / first);
    run.metric("linear_r2", linear_r2(&fitted));
    run.metric(
        "monotonic",
        if fitted.windows(2).all(|w| w[1].1 > w[0].1) { 1.0 } else { 0.0 },
    );
    Ok(())
}

fn peak_metrics(run: &mut Run<'_>, prefix: &str, spectrum: &SpectrumPeaks, targets: &[(&str, f64)]) {
    let df = spectrum.bin_spacing();
    run.metric(format!("{prefix}bin_hz"), df);
    for &(name, freq) in targets {
        let near = spectrum.peak_near(freq, 1.0 * df + 1e-9);
        run.metric(
            format!("{prefix}peak_{name}_offset_bins"),
            near.map_or(f64::NAN, |p| (p.frequency - freq) / df),
        );
        match correlated_fraction(spectrum, freq) {
            Ok(c) => {
                run.metric(format!("{prefix}fraction_{name}"), c.fraction);
                run.metric(format!("{prefix}fraction_{name}_sigma"), c.sigma);
            }
            Err(_) => {
                let c = fraction_at(spectrum, freq);
                run.metric(format!("{prefix}fraction_{name}"), c.fraction);
                run.metric(format!("{prefix}fraction_{name}_sigma"), c.sigma);
            }
        }
    }
}

fn run_correlation(
    config: &Config,
    trajectory_stride: usize,
    control_count: usize,
    control_coulomb: bool,
    run: &mut Run<'_>,
) -> Result<()> {
    let _ = trajectory_stride;
    let analysis = config.analysis_settings();
    let f = config.frequencies()?;
    let targets = [
        ("2fm", 2.0 * f.omega_m / (2.0 * PI)),
        ("fc_prime", f.omega_c_prime / (2.0 * PI)),
    ];
    for (name, freq) in targets {
        run.metric(format!("{name}_hz"), freq);
    }

    let (img, photons, _, traj, _) = imaged_run(config, 0.0)?;
    io::save_image(&run.path("image.pgm"), &img)?;
    run.outputs.push("image.pgm.txt".into());
    run.metric("image_lobes", count_lobes(&img) as f64);
    io::save_trajectory(&run.path("trajectory.csv"), &traj)?;
    io::save_photons(&run.path("photons.bin"), &photons)?;
    run.metric("photons", photons.len() as f64);
    let h = waiting_time_histogram(&photons, analysis.bin_width_s, analysis.max_lag_s)?;
    let spectrum = detrend_and_fft_with(&h, analysis.snr_threshold)?;
    io::save_histogram(&run.path("histogram.csv"), &spectrum)?;
    io::save_spectrum(&run.path("spectrum.csv"), &spectrum)?;
    run.metric(
        "chi2_per_dof",
        spectrum.fit.map_or(f64::NAN, |fit| fit.chi2_per_dof),
    );
    run.metric("peaks", spectrum.peaks.len() as f64);
    peak_metrics(run, "", &spectrum, &targets);

    // same beam and drive, ions with unrelated phases
    let mut c = config.clone();
    c.ions.count = control_count;
    c.ions.arrangement = Arrangement::Incoherent;
    let s = sim_mut(&mut c);
    s.coulomb = control_coulomb;
    s.seed = s.seed.wrapping_add(1);
    let (_, photons, _) = simulate(&c, |_, _| {})?;
    io::save_photons(&run.path("control_photons.bin"), &photons)?;
    let h = waiting_time_histogram(&photons, analysis.bin_width_s, analysis.max_lag_s)?;
    let spectrum = detrend_and_fft_with(&h, analysis.snr_threshold)?;
    io::save_spectrum(&run.path("control_spectrum.csv"), &spectrum)?;
    run.metric("control_count", control_count as f64);
    run.metric("control_peaks", spectrum.peaks.len() as f64);
    peak_metrics(run, "control_", &spectrum, &targets);
    Ok(())
}

fn run_equilibrium(
    config: &Config,
    settle: f64,
    trajectory_stride: usize,
    run: &mut Run<'_>,
) -> Result<()> {
    let scene = config.scene()?;
    let f = scene.frequencies()?;
    let centre = radiation_pressure_offset(&scene.lasers, &scene.species, &f);
    let (mut vc2, mut vz2, mut n) = (0.0, 0.0, 0usize);
    let mut traj = Trajectory::default();
    let mut k = 0usize;
    let (scene, photons, stats) = simulate(config, |t, states| {
        if t >= settle {
            for s in states {
                let m = decompose(&shifted(s, &centre), &f);
                vc2 += (f.omega_c_prime * m.cyclotron.norm()).powi(2);
                vz2 += s.velocity.z * s.velocity.z;
                n += 1;
            }
        }
        if k % trajectory_stride.max(1) == 0 {
            traj.times.push(t);
            traj.n_ions = states.len();
            traj.states.extend_from_slice(states);
        }
        k += 1;
    })?;
    if n == 0 {
        return Err(Error::Config("settle time leaves no samples".into()));
    }
    io::save_trajectory(&run.path("trajectory.csv"), &traj)?;
    io::save_photons(&run.path("photons.bin"), &photons)?;
    let m = scene.species.mass();
    let (vc2, vz2) = (vc2 / n as f64, vz2 / n as f64);
    // two cyclotron degrees of freedom and one axial
    let t = m * (vc2 + vz2) / (3.0 * BOLTZMANN);
    let limit = doppler_limit(&scene.species);
    run.metric("temperature_k", t);
    run.metric("cyclotron_temperature_k", m * vc2 / (2.0 * BOLTZMANN));
    run.metric("axial_temperature_k", m * vz2 / BOLTZMANN);
    run.metric("doppler_limit_k", limit);
    run.metric("temperature_ratio", t / limit);
    run.metric("scattered", stats.scattered as f64);
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub index: usize,
    /// `(key, value)` pairs set on the template.
    pub values: Vec<(String, f64)>,
    pub dir: PathBuf,
    pub result: Result<RunManifest>,
}

/// Cartesian product of `grid` applied to `template`, one run per point in
/// `out_dir/point-NNN`, executed concurrently. Point `k` runs with seed
/// `template.seed + k` unless the grid sets `seed` itself. A summary CSV keyed
/// by grid point goes to `out_dir/summary.csv`. Failures are recorded per point.
///
/// Keys are dotted paths into the scenario, e.g. `config.laser.saturation` or
/// `plan.amplitudes_v` (a scalar assigned to a list becomes a one-element list).
pub fn sweep(template: &Scenario, grid: &[(String, Vec<f64>)], out_dir: &Path) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (key, values) in grid {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v));
                    c
                })
            })
            .collect();
    }
    // reject bad keys before running anything
    for (k, combo) in combos.iter().enumerate() {
        point_scenario(template, k, combo)?;
    }
    std::fs::create_dir_all(out_dir)?;
    let points: Vec<SweepPoint> = combos
        .into_par_iter()
        .enumerate()
        .map(|(k, values)| {
            let dir = out_dir.join(format!("point-{k:03}"));
            let result =
                point_scenario(template, k, &values).and_then(|s| run_scenario(&s, &dir));
            SweepPoint {
                index: k,
                values,
                dir,
                result,
            }
        })
        .collect();
    write_sweep_summary(&out_dir.join("summary.csv"), grid, &points)?;
    Ok(points)
}

fn point_scenario(template: &Scenario, k: usize, values: &[(String, f64)]) -> Result<Scenario> {
    let mut s = template.clone();
    s.seed = template.seed.wrapping_add(k as u64);
    if let Some(sim) = s.config.sim.as_mut() {
        sim.seed = s.seed;
    }
    let mut tree = toml::Value::try_from(&s).map_err(|e| Error::Config(e.to_string()))?;
    for (key, v) in values {
        set_path(&mut tree, key, *v)?;
    }
    let mut s: Scenario = tree
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if values.iter().any(|(k, _)| k == "seed") {
        if let Some(sim) = s.config.sim.as_mut() {
            sim.seed = s.seed;
        }
    }
    s.config.resolve()?;
    Ok(s)
}

fn set_path(tree: &mut toml::Value, key: &str, v: f64) -> Result<()> {
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("sweep key {key:?} does not name a value")))?;
        if i + 1 == parts.len() {
            let slot = table
                .get_mut(*part)
                .ok_or_else(|| Error::Config(format!("unknown sweep key {key:?}")))?;
            *slot = match slot {
                toml::Value::Integer(_) if v.fract() == 0.0 => toml::Value::Integer(v as i64),
                toml::Value::Array(_) => toml::Value::Array(vec![toml::Value::Float(v)]),
                toml::Value::Float(_) | toml::Value::Integer(_) => toml::Value::Float(v),
                _ => {
                    return Err(Error::Config(format!(
                        "sweep key {key:?} is not numeric"
                    )))
                }
            };
            return Ok(());
        }
        node = table
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown sweep key {key:?}")))?;
    }
    Err(Error::Config(format!("empty sweep key {key:?}")))
}

fn write_sweep_summary(path: &Path, grid: &[(String, Vec<f64>)], points: &[SweepPoint]) -> Result<()> {
    let metric_names: std::collections::BTreeSet<&String> = points
        .iter()
        .filter_map(|p| p.result.as_ref().ok())
        .flat_map(|m| m.metrics.keys())
        .collect();
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(grid.iter().map(|(k, _)| k.clone()));
    header.push("status".into());
    header.push("error".into());
    header.extend(metric_names.iter().map(|s| s.to_string()));
    let mut order: Vec<&SweepPoint> = points.iter().collect();
    order.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.1.total_cmp(&y.1))
            .find(|o| o.is_ne())
            .unwrap_or(a.index.cmp(&b.index))
    });
    let rows: Vec<Vec<String>> = order
        .into_iter()
        .map(|p| {
            let mut row = vec![p.index.to_string()];
            row.extend(p.values.iter().map(|(_, v)| v.to_string()));
            match &p.result {
                Ok(m) => {
                    row.push("ok".into());
                    row.push(String::new());
                    row.extend(
                        metric_names
                            .iter()
                            .map(|k| m.metrics.get(*k).map_or(String::new(), |v| v.to_string())),
                    );
                }
                Err(e) => {
                    row.push("error".into());
                    row.push(format!("{}: {e}", e.kind()));
                    row.extend(metric_names.iter().map(|_| String::new()));
                }
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::save_table(path, &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!(matches!("fig7".parse::<ScenarioKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn presets_are_resolved_and_serialise() {
        for k in ScenarioKind::ALL {
            let s = preset(k, 1).unwrap();
            let mut again = s.config.clone();
            again.resolve().unwrap();
            assert_eq!(again, s.config, "{k}");
            let text = toml::to_string(&s).unwrap();
            let back: Scenario = toml::from_str(&text).unwrap();
            assert_eq!(back, s, "{k}");
            s.config.scene().unwrap();
            s.config.sim_config().unwrap();
        }
    }

    #[test]
    fn fig4_tunes_the_cyclotron_frequency() {
        let s = preset(ScenarioKind::Fig4Sweep, 1).unwrap();
        let f = s.config.frequencies().unwrap();
        assert!((f.omega_c / (2.0 * PI) - 627e3).abs() < 1e-6);
        let Plan::DriveSweep { drive_frequencies_hz, .. } = &s.plan else {
            panic!()
        };
        assert_eq!(drive_frequencies_hz.len(), 6);
        assert!((drive_frequencies_hz[3] - 627e3).abs() < 1e-6);
    }

    #[test]
    fn sweep_keys_are_checked() {
        let s = preset(ScenarioKind::Fig2Cycling, 1).unwrap();
        assert!(point_scenario(&s, 0, &[("config.laser.nope".into(), 1.0)]).is_err());
        let p = point_scenario(&s, 2, &[("config.ions.magnetron_radius_m".into(), 5e-6)]).unwrap();
        assert_eq!(p.config.ions.magnetron_radius_m, 5e-6);
        assert_eq!(p.seed, 3);
        assert_eq!(p.config.sim.unwrap().seed, 3);
        let t = preset(ScenarioKind::Fig5PhaseScan, 1).unwrap();
        let p = point_scenario(&t, 0, &[("plan.amplitudes_v".into(), 0.5)]).unwrap();
        assert!(matches!(p.plan, Plan::PhaseScan { ref amplitudes_v, .. } if amplitudes_v == &[0.5]));
    }

    #[test]
    fn empty_grid_is_an_error() {
        let s = preset(ScenarioKind::Fig2Cycling, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(sweep(&s, &[], dir.path()), Err(Error::Config(_))));
        assert!(matches!(
            sweep(&s, &[("seed".into(), vec![])], dir.path()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn r2_of_a_line_is_one() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)];
        assert!((linear_r2(&pts) - 1.0).abs() < 1e-12);
        assert!(linear_r2(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]) < 1e-12);
    }

    #[test]
    fn log_slope_of_exponential() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 1e-3, (-300.0 * k as f64 * 1e-3).exp())).collect();
        assert!((log_slope(&pts) + 300.0).abs() < 1e-9);
    }
}
