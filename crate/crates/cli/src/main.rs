//! `penning`: command-line front end for the Penning-trap simulator.
//!
//! Every subcommand prints `key=value` lines on success. On failure it prints
//! one `error kind=<Kind> msg=<text>` line to stderr and exits with status 1.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use penning::config::Config;
use penning::envelope::{classify_regime, default_tolerance, envelope_eigenvalues, envelope_series};
use penning::imaging::{accumulate_image, estimate_temperature, fluorescence_weights, measure_spot_size};
use penning::photon_stats::{detrend_and_fft_with, phase_of, phase_response_scan, waiting_times_from};
use penning::scenario::{self, RunManifest, Scenario, ScenarioKind, MANIFEST_FILE};
use penning::{io, Error, Result};

#[derive(Parser)]
#[command(name = "penning", version, about = "Penning-trap ion dynamics, fluorescence statistics and imaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the trap's eigenfrequencies.
    Frequencies(ConfigArg),
    /// Integrate the mode-amplitude envelope from the [envelope] section.
    Envelope {
        #[command(flatten)]
        config: ConfigArg,
        /// Output CSV: t_s, r_c_m, r_m_m, regime.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full dynamics; writes trajectory.csv and photons.bin.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Waiting-time histogram and its spectrum from a photon stream.
    Correlate {
        /// Photon file: u64 LE count, then f64 LE timestamps.
        #[arg(long)]
        photons: PathBuf,
        /// Analysis settings come from the [analysis] section when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a probe scan across a resonance and fit its phase response.
    PhaseScan {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        from_hz: f64,
        #[arg(long)]
        to_hz: f64,
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Photons before this time are discarded at every point.
        #[arg(long, default_value_t = 0.0)]
        settle_s: f64,
        /// Output CSV: drive_hz, phase_rad, depth, sigma.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a trajectory CSV through the camera model into a 16-bit PGM.
    Image {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure rms and FWHM sizes of a PGM image.
    SpotSize {
        #[arg(long)]
        image: PathBuf,
        /// Also report a temperature from the rms size at this frequency.
        #[arg(long)]
        temperature_hz: Option<f64>,
        #[arg(long, default_value_t = 8e-6)]
        psf_m: f64,
    },
    /// Run a named scenario, or replay one from its manifest.
    Scenario {
        /// One of fig2-cycling, fig2-axialise, fig2-orbit, fig4-sweep,
        /// fig5-phase-scan, fig6-orbit-correlation, doppler-equilibrium.
        name: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Replay the scenario recorded in this manifest and compare checksums.
        #[arg(long, conflicts_with = "name")]
        manifest: Option<PathBuf>,
        /// Write the resolved scenario to this TOML file instead of running it.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario over the Cartesian product of parameter values.
    Sweep {
        /// Scenario name, or a TOML file written by `scenario --dump`.
        template: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `dotted.key=v1,v2,...`, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUES")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
}

impl ConfigArg {
    fn load(&self) -> Result<Config> {
        let mut c = Config::load(&self.config)?;
        c.resolve()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error kind={} msg={msg}", e.kind())
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Frequencies(c) => frequencies(&c.load()?),
        Command::Envelope { config, out } => envelope(&config.load()?, &out),
        Command::Simulate { config, out } => simulate(&config.load()?, &out),
        Command::Correlate {
            photons,
            config,
            out,
        } => correlate(&photons, config.as_deref(), &out),
        Command::PhaseScan {
            config,
            from_hz,
            to_hz,
            points,
            settle_s,
            out,
        } => phase_scan(&config.load()?, from_hz, to_hz, points, settle_s, &out),
        Command::Image {
            config,
            trajectory,
            out,
        } => image(&config.load()?, &trajectory, &out),
        Command::SpotSize {
            image,
            temperature_hz,
            psf_m,
        } => spot_size(&image, temperature_hz, psf_m),
        Command::Scenario {
            name,
            seed,
            manifest,
            dump,
            out,
        } => scenario_cmd(name, seed, manifest, dump, out),
        Command::Sweep {
            template,
            seed,
            sets,
            out,
        } => sweep(&template, seed, &sets, &out),
    }
}

fn frequencies(c: &Config) -> Result<()> {
    let f = c.frequencies()?;
    let [fc, fz, f1, fcp, fm] = f.in_hz();
    println!("f_c_hz={fc}");
    println!("f_z_hz={fz}");
    println!("f_1_hz={f1}");
    println!("f_c_prime_hz={fcp}");
    println!("f_m_hz={fm}");
    if let Some(t) = &c.trap {
        if let Some(v) = t.v_volts {
            println!("v_volts={v}");
        }
    }
    Ok(())
}

fn envelope(c: &Config, out: &Path) -> Result<()> {
    let e = c
        .envelope
        .as_ref()
        .ok_or_else(|| Error::Config("missing [envelope] section".into()))?;
    let (p, s0) = e.params()?;
    let regime = classify_regime(&p, default_tolerance(&p))?;
    let series = envelope_series(&p, &s0, e.duration_s, e.dt_s)?;
    io::save_envelope(out, &series, regime.kind)?;
    let (l1, l2) = envelope_eigenvalues(&p);
    println!("regime={}", regime.kind.as_str());
    println!("lambda_1_re={}", l1.re);
    println!("lambda_1_im={}", l1.im);
    println!("lambda_2_re={}", l2.re);
    println!("lambda_2_im={}", l2.im);
    println!("samples={}", series.len());
    Ok(())
}

fn simulate(c: &Config, out: &Path) -> Result<()> {
    mkdir(out)?;
    let scene = c.scene()?;
    let sim = c.sim_config()?;
    let (traj, photons) = penning::dynamics::run(&sim, &scene)?;
    io::save_trajectory(&out.join("trajectory.csv"), &traj)?;
    io::save_photons(&out.join("photons.bin"), &photons)?;
    println!("samples={}", traj.len());
    println!("photons={}", photons.len());
    println!("photon_rate_hz={}", photons.rate());
    Ok(())
}

fn correlate(photons: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let a = match config {
        Some(p) => Config::load(p)?.analysis_settings(),
        None => Config::default().analysis_settings(),
    };
    mkdir(out)?;
    let ts = io::load_photons(photons)?;
    let h = waiting_times_from(&ts, a.bin_width_s, a.max_lag_s)?;
    let s = detrend_and_fft_with(&h, a.snr_threshold)?;
    io::save_histogram(&out.join("histogram.csv"), &s)?;
    io::save_spectrum(&out.join("spectrum.csv"), &s)?;
    println!("photons={}", ts.len());
    if let Some(fit) = s.fit {
        println!("rate_per_s={}", fit.rate);
        println!("chi2_per_dof={}", fit.chi2_per_dof);
    }
    println!("bin_hz={}", s.bin_spacing());
    for p in &s.peaks {
        println!("peak_hz={} snr={}", p.frequency, p.snr);
    }
    Ok(())
}

fn phase_scan(c: &Config, from: f64, to: f64, points: usize, settle: f64, out: &Path) -> Result<()> {
    if points < 2 || to.is_nan() || from.is_nan() || to <= from {
        return Err(Error::InvalidParameter(
            "phase scan needs --to-hz > --from-hz and at least 2 points".into(),
        ));
    }
    if c.probe.is_none() {
        return Err(Error::Config("phase scan needs a [probe] section".into()));
    }
    let mut scan = Vec::new();
    for k in 0..points {
        let hz = from + (to - from) * k as f64 / (points - 1) as f64;
        let mut p = c.clone();
        if let Some(pr) = p.probe.as_mut() {
            pr.frequency_hz = hz;
        }
        if let Some(s) = p.sim.as_mut() {
            s.seed = s.seed.wrapping_add(k as u64);
        }
        let (_, photons) = penning::dynamics::run(&p.sim_config()?, &p.scene()?)?;
        let ts: Vec<f64> = photons.timestamps.iter().copied().filter(|&t| t >= settle).collect();
        match phase_of(&ts, 2.0 * PI * hz, photons.reference_phase) {
            Ok(m) => scan.push(m),
            Err(e) => eprintln!("skip drive_hz={hz} kind={}", e.kind()),
        }
    }
    io::save_phase_scan(out, &scan)?;
    let fit = phase_response_scan(&scan)?;
    print!("{}", io::phase_fit_lines(&fit));
    Ok(())
}

fn image(c: &Config, trajectory: &Path, out: &Path) -> Result<()> {
    let traj = io::load_trajectory(trajectory)?;
    let camera = c.camera_model()?;
    let lasers: Vec<_> = c.laser_params()?.into_iter().collect();
    let weights = if lasers.is_empty() {
        vec![1.0; traj.states.len()]
    } else {
        let interval = match traj.times.as_slice() {
            [a, b, ..] => b - a,
            _ => 1.0,
        };
        let eps = c.sim.as_ref().map_or(1.0, |s| s.detection_efficiency);
        fluorescence_weights(&traj, &lasers, &c.particle()?, eps, interval)
    };
    let img = accumulate_image(&traj, &weights, &camera)?;
    io::save_image(out, &img)?;
    println!("width_px={}", img.width);
    println!("height_px={}", img.height);
    println!("total={}", img.sum());
    Ok(())
}

fn spot_size(path: &Path, temperature_hz: Option<f64>, psf: f64) -> Result<()> {
    let img = io::load_image(path)?;
    let s = measure_spot_size(&img)?;
    println!("rms_x_m={}", s.rms_x);
    println!("rms_z_m={}", s.rms_z);
    println!("fwhm_x_m={}", s.fwhm_x);
    println!("fwhm_z_m={}", s.fwhm_z);
    println!("fwhm_x_direct_m={}", s.fwhm_x_direct);
    println!("fwhm_z_direct_m={}", s.fwhm_z_direct);
    if let Some(hz) = temperature_hz {
        let species = Config::default().particle()?;
        let t = estimate_temperature(s.rms_x, 2.0 * PI * hz, &species, psf)?;
        println!("temperature_k={}", t.kelvin);
        println!("upper_limit={}", t.upper_limit);
    }
    Ok(())
}

fn print_manifest(m: &RunManifest, dir: &Path) {
    println!("manifest={}", dir.join(MANIFEST_FILE).display());
    for o in &m.outputs {
        println!("output={} sha256={}", o.path, o.sha256);
    }
    for (k, v) in &m.metrics {
        println!("{k}={v}");
    }
}

fn scenario_cmd(
    name: Option<String>,
    seed: u64,
    manifest: Option<PathBuf>,
    dump: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    if let Some(path) = manifest {
        let m = RunManifest::load(&path)?;
        let out = out.ok_or_else(|| Error::Config("--out is required".into()))?;
        let (again, same) = scenario::replay(&m, &out)?;
        print_manifest(&again, &out);
        println!("reproduced={same}");
        if !same {
            return Err(Error::Io("outputs differ from the manifest checksums".into()));
        }
        return Ok(());
    }
    let name = name.ok_or_else(|| Error::Config("give a scenario name or --manifest".into()))?;
    let s = scenario::preset(name.parse::<ScenarioKind>()?, seed)?;
    if let Some(path) = dump {
        std::fs::write(&path, s.to_toml())?;
        println!("scenario={}", path.display());
        return Ok(());
    }
    let out = out.ok_or_else(|| Error::Config("--out is required".into()))?;
    let m = scenario::run_scenario(&s, &out)?;
    print_manifest(&m, &out);
    Ok(())
}

fn parse_set(s: &str) -> Result<(String, Vec<f64>)> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set {s:?} is not KEY=VALUES")))?;
    let values = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("--set {key}: {v:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((key.trim().to_string(), values))
}

fn sweep(template: &str, seed: u64, sets: &[String], out: &Path) -> Result<()> {
    let s: Scenario = match template.parse::<ScenarioKind>() {
        Ok(kind) => scenario::preset(kind, seed)?,
        Err(_) => Scenario::load(Path::new(template))?,
    };
    let grid = sets.iter().map(|s| parse_set(s)).collect::<Result<Vec<_>>>()?;
    let points = scenario::sweep(&s, &grid, out)?;
    let failed = points.iter().filter(|p| p.result.is_err()).count();
    println!("summary={}", out.join("summary.csv").display());
    println!("points={}", points.len());
    println!("failed={failed}");
    for p in &points {
        if let Err(e) = &p.result {
            println!("point={} {}", p.index, error_line(e));
        }
    }
    Ok(())
}
