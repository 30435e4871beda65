//! Synthetic camera: projection, Gaussian blur, pixelation, spot sizes and an
//! equivalent temperature.

use nalgebra::Vector3;
use statrs::function::erf::erf;

use crate::constants::BOLTZMANN;
use crate::dynamics::{scattering_rate, IonState, LaserParams, Trajectory};
use crate::error::{ensure, Error, Result};
use crate::trap::ParticleSpecies;

/// Imaging optics and sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Sensor pixel pitch, m.
    pub pixel_pitch: f64,
    pub magnification: f64,
    /// Point-spread-function sigma in the object plane, m.
    pub psf_sigma: f64,
    pub width: usize,
    pub height: usize,
    /// Exposure time, s. Informational only; weights carry the time integral.
    pub exposure: f64,
    view_axis: Vector3<f64>,
    horizontal: Vector3<f64>,
    vertical: Vector3<f64>,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::new(13e-6, 1.0, 8e-6, 65, 65, 0.1, Vector3::y()).expect("valid default camera")
    }
}

impl CameraModel {
    pub fn new(
        pixel_pitch: f64,
        magnification: f64,
        psf_sigma: f64,
        width: usize,
        height: usize,
        exposure: f64,
        view_axis: Vector3<f64>,
    ) -> Result<Self> {
        ensure(pixel_pitch > 0.0, || {
            format!("pixel pitch must be positive, got {pixel_pitch}")
        })?;
        ensure(magnification > 0.0, || {
            format!("magnification must be positive, got {magnification}")
        })?;
        ensure(psf_sigma >= 0.0, || {
            format!("PSF sigma must be non-negative, got {psf_sigma}")
        })?;
        ensure(width > 0 && height > 0, || "sensor must have pixels".into())?;
        let n = view_axis.norm();
        ensure(n > 0.0 && n.is_finite(), || {
            "view axis must be non-zero".into()
        })?;
        let view = view_axis / n;
        let h = view.cross(&Vector3::z());
        // looking along the trap axis: fall back to x as the horizontal
        let horizontal = if h.norm() > 1e-12 {
            h.normalize()
        } else {
            Vector3::x()
        };
        let vertical = horizontal.cross(&view);
        Ok(Self {
            pixel_pitch,
            magnification,
            psf_sigma,
            width,
            height,
            exposure,
            view_axis: view,
            horizontal,
            vertical,
        })
    }

    pub fn view_axis(&self) -> Vector3<f64> {
        self.view_axis
    }

    /// Pixel size referred to the object plane, m.
    pub fn meters_per_pixel(&self) -> f64 {
        self.pixel_pitch / self.magnification
    }

    /// Object-plane coordinates `(horizontal, vertical)` of a point, m.
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (p.dot(&self.horizontal), p.dot(&self.vertical))
    }
}

/// Expected counts per pixel, row-major with row 0 at the most negative
/// vertical coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub meters_per_pixel: f64,
    /// Weight that landed outside the sensor.
    pub spill: f64,
    /// Total weight deposited, on and off the sensor.
    pub total_input: f64,
}

impl Image {
    pub fn blank(camera: &CameraModel) -> Self {
        Self {
            width: camera.width,
            height: camera.height,
            pixels: vec![0.0; camera.width * camera.height],
            meters_per_pixel: camera.meters_per_pixel(),
            spill: 0.0,
            total_input: 0.0,
        }
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// Object-plane coordinate of the centre of column `col`, m.
    pub fn x_of(&self, col: usize) -> f64 {
        (col as f64 - 0.5 * (self.width as f64 - 1.0)) * self.meters_per_pixel
    }

    /// Object-plane coordinate of the centre of row `row`, m.
    pub fn z_of(&self, row: usize) -> f64 {
        (row as f64 - 0.5 * (self.height as f64 - 1.0)) * self.meters_per_pixel
    }

    /// Add another partial image of the same camera.
    pub fn merge(&mut self, other: &Image) {
        for (a, b) in self.pixels.iter_mut().zip(&other.pixels) {
            *a += b;
        }
        self.spill += other.spill;
        self.total_input += other.total_input;
    }

    /// Deposit `weight` from an emitter at object-plane point `(x, z)`.
    pub fn deposit(&mut self, camera: &CameraModel, x: f64, z: f64, weight: f64) {
        if weight == 0.0 {
            return;
        }
        self.total_input += weight;
        let px = self.meters_per_pixel;
        let sigma = camera.psf_sigma;
        let cols = axis_weights(x, sigma, px, self.width);
        let rows = axis_weights(z, sigma, px, self.height);
        let mut landed = 0.0;
        for &(r, wr) in &rows {
            let base = r * self.width;
            for &(c, wc) in &cols {
                let v = weight * wr * wc;
                self.pixels[base + c] += v;
                landed += v;
            }
        }
        self.spill += weight - landed;
    }
}

/// Fraction of a 1-D Gaussian falling in each sensor pixel within 8 sigma.
fn axis_weights(centre: f64, sigma: f64, px: f64, n: usize) -> Vec<(usize, f64)> {
    let origin = -0.5 * n as f64 * px;
    let pos = (centre - origin) / px;
    if sigma == 0.0 {
        let k = pos.floor();
        return if k >= 0.0 && (k as usize) < n {
            vec![(k as usize, 1.0)]
        } else {
            Vec::new()
        };
    }
    let reach = 8.0 * sigma / px;
    let lo = (pos - reach).floor().max(0.0);
    let hi = (pos + reach).ceil().min(n as f64);
    if hi <= lo {
        return Vec::new();
    }
    let scale = 1.0 / (std::f64::consts::SQRT_2 * sigma);
    let cdf = |edge: f64| 0.5 * erf((origin + edge * px - centre) * scale);
    let mut out = Vec::with_capacity((hi - lo) as usize);
    let mut prev = cdf(lo);
    for k in lo as usize..hi as usize {
        let next = cdf(k as f64 + 1.0);
        out.push((k, next - prev));
        prev = next;
    }
    out
}

/// Deposit every trajectory sample with its own weight (expected detected
/// photons for that sample).
pub fn accumulate_image(traj: &Trajectory, weights: &[f64], camera: &CameraModel) -> Result<Image> {
    if traj.is_empty() || traj.states.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    ensure(weights.len() == traj.states.len(), || {
        format!("{} weights for {} states", weights.len(), traj.states.len())
    })?;
    Ok(accumulate_states(
        traj.states.iter().zip(weights.iter().copied()),
        camera,
    ))
}

/// Expected detected photons of each trajectory sample: the instantaneous
/// scattering rate summed over `lasers`, times `efficiency` and the sample
/// `interval`. Ordered like `traj.states`.
pub fn fluorescence_weights(
    traj: &Trajectory,
    lasers: &[LaserParams],
    species: &ParticleSpecies,
    efficiency: f64,
    interval: f64,
) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| {
            let rate: f64 = lasers.iter().map(|l| scattering_rate(s, l, species)).sum();
            rate * efficiency * interval
        })
        .collect()
}

/// Fold `(state, weight)` pairs into an image.
pub fn accumulate_states<'a, I>(samples: I, camera: &CameraModel) -> Image
where
    I: IntoIterator<Item = (&'a IonState, f64)>,
{
    let mut img = Image::blank(camera);
    for (s, w) in samples {
        let (x, z) = camera.project(&s.position);
        img.deposit(camera, x, z, w);
    }
    img
}

/// Sizes of a fluorescence spot, m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotSize {
    pub rms_x: f64,
    pub rms_z: f64,
    /// Gaussian-equivalent `2 sqrt(2 ln 2) rms`.
    pub fwhm_x: f64,
    pub fwhm_z: f64,
    /// Half-maximum crossings of the projected profiles.
    pub fwhm_x_direct: f64,
    pub fwhm_z_direct: f64,
    pub centroid_x: f64,
    pub centroid_z: f64,
    pub background: f64,
}

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Background-subtracted second moments with the pixel-width correction
/// `pitch^2 / 12`, plus direct half-maximum widths.
pub fn measure_spot_size(img: &Image) -> Result<SpotSize> {
    let (w, h) = (img.width, img.height);
    let mut border: Vec<f64> = Vec::with_capacity(2 * (w + h));
    for c in 0..w {
        border.push(img.get(c, 0));
        border.push(img.get(c, h - 1));
    }
    for r in 1..h.saturating_sub(1) {
        border.push(img.get(0, r));
        border.push(img.get(w - 1, r));
    }
    border.sort_by(f64::total_cmp);
    let background = border[border.len() / 2];
    let peak = img.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(img.sum() > 0.0) || !(peak > 5.0 * background) || peak <= 0.0 {
        return Err(Error::NoSignal { peak, background });
    }

    let mut px = vec![0.0; w];
    let mut pz = vec![0.0; h];
    for (r, pz_r) in pz.iter_mut().enumerate() {
        for (c, px_c) in px.iter_mut().enumerate() {
            let v = (img.get(c, r) - background).max(0.0);
            *px_c += v;
            *pz_r += v;
        }
    }
    let xs: Vec<f64> = (0..w).map(|c| img.x_of(c)).collect();
    let zs: Vec<f64> = (0..h).map(|r| img.z_of(r)).collect();
    let (cx, vx) = moments(&xs, &px);
    let (cz, vz) = moments(&zs, &pz);
    let sheppard = img.meters_per_pixel * img.meters_per_pixel / 12.0;
    let rms_x = (vx - sheppard).max(0.0).sqrt();
    let rms_z = (vz - sheppard).max(0.0).sqrt();
    Ok(SpotSize {
        rms_x,
        rms_z,
        fwhm_x: FWHM_PER_SIGMA * rms_x,
        fwhm_z: FWHM_PER_SIGMA * rms_z,
        fwhm_x_direct: half_max_width(&px) * img.meters_per_pixel,
        fwhm_z_direct: half_max_width(&pz) * img.meters_per_pixel,
        centroid_x: cx,
        centroid_z: cz,
        background,
    })
}

/// Number of separate bright regions along the horizontal image axis.
///
/// Local maxima of the column profile above `0.2` of the global maximum count
/// as lobes; neighbours not separated by a dip below half the fainter of the
/// two are merged.
pub fn count_lobes(img: &Image) -> usize {
    let profile: Vec<f64> = (0..img.width)
        .map(|c| (0..img.height).map(|r| img.get(c, r)).sum())
        .collect();
    let max = profile.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let n = profile.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = profile[i];
            let left = if i > 0 { profile[i - 1] } else { 0.0 };
            let right = if i + 1 < n { profile[i + 1] } else { 0.0 };
            v >= 0.2 * max && v > left && v >= right
        })
        .collect();
    let mut k = 1;
    while k < peaks.len() {
        let (a, b) = (peaks[k - 1], peaks[k]);
        let dip = profile[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        if dip >= 0.5 * profile[a].min(profile[b]) {
            // keep the brighter of the two
            if profile[a] >= profile[b] {
                peaks.remove(k);
            } else {
                peaks.remove(k - 1);
            }
        } else {
            k += 1;
        }
    }
    peaks.len()
}

fn moments(x: &[f64], w: &[f64]) -> (f64, f64) {
    let s: f64 = w.iter().sum();
    let m = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / s;
    let v = x
        .iter()
        .zip(w)
        .map(|(x, w)| (x - m) * (x - m) * w)
        .sum::<f64>()
        / s;
    (m, v)
}

/// Width in pixels between the outermost half-maximum crossings, by linear
/// interpolation. A single bright pixel gives a width of one pixel.
fn half_max_width(p: &[f64]) -> f64 {
    let (imax, &max) = p
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty profile");
    if max <= 0.0 {
        return 0.0;
    }
    let half = 0.5 * max;
    let first = p.iter().position(|&v| v >= half).unwrap_or(imax);
    let last = p.iter().rposition(|&v| v >= half).unwrap_or(imax);
    let left = if first == 0 {
        -0.5
    } else {
        let (a, b) = (p[first - 1], p[first]);
        first as f64 - 1.0 + (half - a) / (b - a)
    };
    let right = if last + 1 >= p.len() {
        p.len() as f64 - 0.5
    } else {
        let (a, b) = (p[last], p[last + 1]);
        last as f64 + (a - half) / (a - b)
    };
    (right - left).max(1.0)
}

/// Equivalent temperature of a harmonically bound spot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureEstimate {
    pub kelvin: f64,
    /// Spot size after removing the PSF in quadrature, m.
    pub sigma_ion: f64,
    /// The measured size did not exceed the resolution: `kelvin` is only a bound.
    pub upper_limit: bool,
}

/// `T = m omega^2 sigma_ion^2 / k_B` with `sigma_ion^2 = rms^2 - psf^2`,
/// the single-mode equipartition convention.
pub fn estimate_temperature(
    rms: f64,
    omega: f64,
    species: &ParticleSpecies,
    psf_sigma: f64,
) -> Result<TemperatureEstimate> {
    ensure(rms > 0.0 && rms.is_finite(), || {
        format!("rms must be positive, got {rms}")
    })?;
    let var = rms * rms - psf_sigma * psf_sigma;
    let upper_limit = var <= 0.0;
    let var = var.max(0.0);
    Ok(TemperatureEstimate {
        kelvin: species.mass() * omega * omega * var / BOLTZMANN,
        sigma_ion: var.sqrt(),
        upper_limit,
    })
}

/// Gaussian cloud of `sigma` (object plane) imaged directly, without sampling.
pub fn gaussian_cloud_image(
    centre: (f64, f64),
    sigma: f64,
    total: f64,
    camera: &CameraModel,
) -> Image {
    let blur = CameraModel {
        psf_sigma: (sigma * sigma + camera.psf_sigma * camera.psf_sigma).sqrt(),
        ..*camera
    };
    let mut img = Image::blank(camera);
    img.deposit(&blur, centre.0, centre.1, total);
    img
}
