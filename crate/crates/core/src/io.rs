//! File formats: trajectory and analysis CSVs, the binary photon stream,
//! 16-bit PGM images with a scale sidecar, and output checksums.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::dynamics::{IonState, PhotonRecord, Trajectory};
use crate::envelope::{EnvelopeState, RegimeKind};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::photon_stats::{PhaseFit, PhaseMeasurement, SpectrumPeaks};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub const TRAJECTORY_HEADER: [&str; 8] = ["t_s", "ion_id", "x_m", "y_m", "z_m", "vx", "vy", "vz"];

pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for (k, &t) in traj.times.iter().enumerate() {
        for (i, s) in traj.sample(k).iter().enumerate() {
            let (p, v) = (s.position, s.velocity);
            w.write_record(&[
                t.to_string(),
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                v.x.to_string(),
                v.y.to_string(),
                v.z.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows must be grouped by time with ion ids `0..n` in order, as written by
/// [`write_trajectory_csv`].
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::Io(format!(
            "unexpected trajectory header {header:?}"
        )));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut states = Vec::new();
    let mut n_ions = 0usize;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Io(format!("row {}: bad field {k}", line + 2)))
        };
        let t = num(0)?;
        let id = num(1)? as usize;
        if id == 0 {
            times.push(t);
        } else if times.is_empty() || times.last() != Some(&t) {
            return Err(Error::Io(format!(
                "row {}: ion {id} out of order",
                line + 2
            )));
        }
        if times.len() == 1 {
            n_ions = n_ions.max(id + 1);
        }
        states.push(IonState::new(
            Vector3::new(num(2)?, num(3)?, num(4)?),
            Vector3::new(num(5)?, num(6)?, num(7)?),
        ));
    }
    if n_ions == 0 || states.len() != times.len() * n_ions {
        return Err(Error::Io(
            "ragged trajectory: every sample needs every ion".into(),
        ));
    }
    Ok(Trajectory {
        times,
        n_ions,
        states,
    })
}

pub fn write_envelope_csv<W: Write>(
    out: W,
    series: &[(f64, EnvelopeState)],
    regime: RegimeKind,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "r_c_m", "r_m_m", "regime"])
        .map_err(csv_err)?;
    for (t, s) in series {
        w.write_record(&[
            t.to_string(),
            s.r_c().to_string(),
            s.r_m().to_string(),
            regime.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Little-endian `u64` count followed by that many `f64` timestamps.
pub fn write_photons<W: Write>(mut out: W, timestamps: &[f64]) -> Result<()> {
    check_increasing(timestamps)?;
    out.write_all(&(timestamps.len() as u64).to_le_bytes())?;
    for t in timestamps {
        out.write_all(&t.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_photons<R: Read>(mut input: R) -> Result<Vec<f64>> {
    let mut word = [0u8; 8];
    input
        .read_exact(&mut word)
        .map_err(|_| Error::Io("photon file is missing its count header".into()))?;
    let n = u64::from_le_bytes(word) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != n * 8 {
        return Err(Error::Io(format!(
            "photon file declares {n} timestamps but holds {} bytes",
            bytes.len()
        )));
    }
    let ts: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    check_increasing(&ts)?;
    Ok(ts)
}

fn check_increasing(ts: &[f64]) -> Result<()> {
    if let Some(k) = ts.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Io(format!(
            "timestamps not strictly increasing at index {}",
            k + 1
        )));
    }
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::Io("non-finite timestamp".into()));
    }
    Ok(())
}

pub fn save_photons(path: &Path, photons: &PhotonRecord) -> Result<()> {
    write_photons(create(path)?, &photons.timestamps)
}

pub fn load_photons(path: &Path) -> Result<Vec<f64>> {
    read_photons(open(path)?)
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory_csv(create(path)?, traj)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_csv(open(path)?)
}

pub fn save_envelope(
    path: &Path,
    series: &[(f64, EnvelopeState)],
    regime: RegimeKind,
) -> Result<()> {
    write_envelope_csv(create(path)?, series, regime)
}

/// Histogram and its background model: `lag_s, counts, detrended`.
pub fn save_histogram(path: &Path, s: &SpectrumPeaks) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["lag_s", "counts", "detrended"])
        .map_err(csv_err)?;
    for k in 0..s.lags.len() {
        w.write_record(&[
            s.lags[k].to_string(),
            s.counts[k].to_string(),
            s.detrended[k].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Power spectrum: `freq_hz, power`.
pub fn save_spectrum(path: &Path, s: &SpectrumPeaks) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["freq_hz", "power"]).map_err(csv_err)?;
    for (f, p) in s.frequencies.iter().zip(&s.power) {
        w.write_record(&[f.to_string(), p.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Phase scan: `drive_hz, phase_rad, depth, sigma`.
pub fn save_phase_scan(path: &Path, scan: &[PhaseMeasurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["drive_hz", "phase_rad", "depth", "sigma"])
        .map_err(csv_err)?;
    for m in scan {
        w.write_record(&[
            (m.drive_frequency / (2.0 * std::f64::consts::PI)).to_string(),
            m.phase.to_string(),
            m.depth.to_string(),
            m.uncertainty.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `key=value` lines for a phase fit, angular quantities in s^-1.
pub fn phase_fit_lines(fit: &PhaseFit) -> String {
    format!(
        "gamma={}\nomega_0={}\nphi_0={}\nresidual={}\nswing={}\n",
        fit.gamma, fit.omega_0, fit.phi_0, fit.residual, fit.swing
    )
}

/// Plain CSV table with a header row.
pub fn save_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Path of the scale sidecar written next to an image.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Binary 16-bit PGM, scaled so the brightest pixel is 65535. Rows run from
/// the top of the image (largest z) down.
pub fn write_pgm<W: Write>(mut out: W, img: &Image) -> Result<()> {
    let max = img.pixels.iter().copied().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    write!(out, "P5\n{} {}\n65535\n", img.width, img.height)?;
    let mut buf = Vec::with_capacity(2 * img.pixels.len());
    for row in (0..img.height).rev() {
        for col in 0..img.width {
            let v = (img.get(col, row) * scale).round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&v.to_be_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_pgm<R: Read>(mut input: R, meters_per_pixel: f64) -> Result<Image> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Io("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let parse = |s: String| {
        s.parse::<usize>()
            .map_err(|_| Error::Io(format!("bad PGM header field {s:?}")))
    };
    let width = parse(token()?)?;
    let height = parse(token()?)?;
    let maxval = parse(token()?)?;
    if magic != "P5" || maxval == 0 || maxval > 65535 {
        return Err(Error::Io(format!(
            "not a binary PGM ({magic}, maxval {maxval})"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = &bytes[pos + 1..];
    let wide = maxval > 255;
    let need = width * height * if wide { 2 } else { 1 };
    if data.len() < need {
        return Err(Error::Io(format!(
            "PGM raster has {} bytes, need {need}",
            data.len()
        )));
    }
    let mut pixels = vec![0.0; width * height];
    for r in 0..height {
        for c in 0..width {
            let k = r * width + c;
            let v = if wide {
                u16::from_be_bytes([data[2 * k], data[2 * k + 1]]) as f64
            } else {
                data[k] as f64
            };
            pixels[(height - 1 - r) * width + c] = v;
        }
    }
    let total_input = pixels.iter().sum();
    Ok(Image {
        width,
        height,
        pixels,
        meters_per_pixel,
        spill: 0.0,
        total_input,
    })
}

pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    write_pgm(create(path)?, img)?;
    let mut side = create(&sidecar_path(path))?;
    writeln!(side, "meters_per_pixel={}", img.meters_per_pixel)?;
    side.flush()?;
    Ok(())
}

/// Load a PGM and its `meters_per_pixel` sidecar.
pub fn load_image(path: &Path) -> Result<Image> {
    let side = std::fs::read_to_string(sidecar_path(path))
        .map_err(|e| Error::Io(format!("{}: {e}", sidecar_path(path).display())))?;
    let mpp = side
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "meters_per_pixel")
        .and_then(|(_, v)| v.trim().parse::<f64>().ok())
        .ok_or_else(|| Error::Io("sidecar has no meters_per_pixel".into()))?;
    read_pgm(open(path)?, mpp)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{gaussian_cloud_image, CameraModel};

    #[test]
    fn photon_round_trip() {
        let ts = vec![1e-6, 2.5e-6, 0.1];
        let mut buf = Vec::new();
        write_photons(&mut buf, &ts).unwrap();
        assert_eq!(buf.len(), 8 + 24);
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        assert_eq!(read_photons(&buf[..]).unwrap(), ts);
    }

    #[test]
    fn photon_rejects_disorder_and_truncation() {
        let mut buf = Vec::new();
        write_photons(&mut buf, &[1.0, 2.0]).unwrap();
        assert!(read_photons(&buf[..buf.len() - 1]).is_err());
        let mut bad = 2u64.to_le_bytes().to_vec();
        bad.extend_from_slice(&2.0f64.to_le_bytes());
        bad.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(read_photons(&bad[..]).is_err());
        assert!(write_photons(Vec::new(), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let s = |x: f64| IonState::new(Vector3::new(x, -x, 0.5 * x), Vector3::new(1.0, 2.0, x));
        let traj = Trajectory {
            times: vec![0.0, 1e-7],
            n_ions: 2,
            states: vec![s(1e-6), s(2e-6), s(3e-6), s(4e-6)],
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,ion_id,x_m,y_m,z_m,vx,vy,vz\n"));
        assert_eq!(read_trajectory_csv(&buf[..]).unwrap(), traj);
    }

    #[test]
    fn pgm_round_trip_keeps_shape() {
        let cam = CameraModel::default();
        let img = gaussian_cloud_image((20e-6, -10e-6), 10e-6, 1.0, &cam);
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert!(buf.starts_with(b"P5\n65 65\n65535\n"));
        let back = read_pgm(&buf[..], img.meters_per_pixel).unwrap();
        let max = back.pixels.iter().copied().fold(0.0, f64::max);
        assert_eq!(max, 65535.0);
        let peak = |im: &Image| {
            (0..im.pixels.len())
                .max_by(|&a, &b| im.pixels[a].total_cmp(&im.pixels[b]))
                .unwrap()
        };
        assert_eq!(peak(&back), peak(&img));
    }

    #[test]
    fn image_files_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("spot.pgm");
        let cam = CameraModel::default();
        let img = gaussian_cloud_image((0.0, 0.0), 5e-6, 1.0, &cam);
        save_image(&p, &img).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!(back.meters_per_pixel, img.meters_per_pixel);
        let a = sha256_file(&p).unwrap();
        save_image(&p, &img).unwrap();
        assert_eq!(a, sha256_file(&p).unwrap());
        assert_eq!(a.len(), 64);
    }
}
