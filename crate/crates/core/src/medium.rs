//! Gaussian atomic cloud: position sampling, optical-depth calibration,
//! and complex attenuation of rays through the oriented medium.
//!
//! Lengths are in units of 1/k, densities in k³. Column densities use the
//! closed-form error-function expression for a Gaussian profile; the
//! numerical quadrature equivalent lives in the tests as an oracle.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

use crate::atom::LevelScheme;
use crate::scatter;

#[derive(Debug, Error)]
pub enum MediumError {
    #[error("total cross section underflowed at this detuning")]
    ZeroCrossSection,
}

/// Plain 3-vector, lengths in 1/k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const EZ: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn unit(self) -> Vec3 {
        self.scale(1.0 / self.norm())
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Which attenuation factors the path evaluation applies. `full()` is the
/// physical model; `ideal()` switches both off for the ideal-conditions
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttenuationModel {
    pub external: bool,
    pub interatomic: bool,
}

impl AttenuationModel {
    pub const fn full() -> Self {
        AttenuationModel {
            external: true,
            interatomic: true,
        }
    }

    pub const fn ideal() -> Self {
        AttenuationModel {
            external: false,
            interatomic: false,
        }
    }
}

impl Default for AttenuationModel {
    fn default() -> Self {
        AttenuationModel::full()
    }
}

/// Gaussian cloud geometry and calibration target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloudConfig {
    /// Gaussian rms radii, units of 1/k.
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
    /// On-axis optical depth to calibrate the density to, per detuning.
    pub target_b: f64,
    /// Mass-scaled velocity variance (γ/k)²; only the beat spectra use it.
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub attenuation: AttenuationModel,
}

impl CloudConfig {
    /// Spherical cloud with the given rms radius.
    pub fn sphere(sigma: f64, target_b: f64) -> Self {
        CloudConfig {
            sigma_x: sigma,
            sigma_y: sigma,
            sigma_z: sigma,
            target_b,
            temperature: 0.0,
            attenuation: AttenuationModel::full(),
        }
    }

    /// Cigar stretched along the probe (z) axis.
    pub fn cigar(sigma_perp: f64, sigma_z: f64, target_b: f64) -> Self {
        CloudConfig {
            sigma_x: sigma_perp,
            sigma_y: sigma_perp,
            sigma_z,
            target_b,
            temperature: 0.0,
            attenuation: AttenuationModel::full(),
        }
    }

    /// Density profile relative to the peak: n(r)/n₀.
    pub fn profile(&self, r: Vec3) -> f64 {
        (-0.5
            * ((r.x / self.sigma_x).powi(2)
                + (r.y / self.sigma_y).powi(2)
                + (r.z / self.sigma_z).powi(2)))
        .exp()
    }

    /// Total atom number for peak density n₀: N = n₀ (2π)^{3/2} σx σy σz.
    pub fn atom_number(&self, n0: f64) -> f64 {
        n0 * (2.0 * std::f64::consts::PI).powf(1.5) * self.sigma_x * self.sigma_y * self.sigma_z
    }
}

/// Peak density n₀ such that the on-axis optical depth
/// b = n₀ √(2π) σ_z σ_tot(q, Δ) equals the configured target.
pub fn calibrate_density(
    cloud: &CloudConfig,
    scheme: &LevelScheme,
    delta: f64,
    probe_mode: i32,
) -> Result<f64, MediumError> {
    let sigma_tot = scatter::total_cross_section(scheme, probe_mode, delta);
    let column = (2.0 * std::f64::consts::PI).sqrt() * cloud.sigma_z * sigma_tot;
    if column.is_nan() || column <= 0.0 || column.is_infinite() {
        return Err(MediumError::ZeroCrossSection);
    }
    Ok(cloud.target_b / column)
}

/// Position drawn from the normalized Gaussian density.
pub fn sample_position<R: Rng + ?Sized>(cloud: &CloudConfig, rng: &mut R) -> Vec3 {
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    let gz: f64 = rng.sample(StandardNormal);
    Vec3::new(
        gx * cloud.sigma_x,
        gy * cloud.sigma_y,
        gz * cloud.sigma_z,
    )
}

/// Far end of an attenuated ray.
#[derive(Debug, Clone, Copy)]
pub enum RayEnd {
    /// Segment to a point.
    Point(Vec3),
    /// Half-line to the cloud boundary at infinity along a unit direction.
    HalfLine(Vec3),
}

/// Propagation eigenmode label for a ray through the oriented medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationMode {
    /// Helicity eigenmode driving Δm = +1 (external rays along ±z).
    SigmaPlus,
    /// Helicity eigenmode driving Δm = −1.
    SigmaMinus,
    /// Linear π mode along the quantization axis.
    Pi,
    /// Polarization-averaged scalar extinction (χ₊ + χ_π + χ₋)/3 used for
    /// interatomic rays.
    ScalarAverage,
}

/// Forward scattering amplitude entering χ for the given mode.
pub fn mode_amplitude(scheme: &LevelScheme, mode: PropagationMode, delta: f64) -> Complex64 {
    match mode {
        PropagationMode::SigmaPlus => scatter::forward_amplitude(scheme, 1, delta),
        PropagationMode::SigmaMinus => scatter::forward_amplitude(scheme, -1, delta),
        PropagationMode::Pi => scatter::forward_amplitude(scheme, 0, delta),
        PropagationMode::ScalarAverage => {
            (scatter::forward_amplitude(scheme, 1, delta)
                + scatter::forward_amplitude(scheme, 0, delta)
                + scatter::forward_amplitude(scheme, -1, delta))
                / 3.0
        }
    }
}

/// Gaussian column ∫ n(r(t))/n₀ dt along r(t) = from + t·dir for
/// t ∈ [0, t_max] (t_max may be ∞). `dir` must be a unit vector.
pub fn gaussian_column(cloud: &CloudConfig, from: Vec3, dir: Vec3, t_max: f64) -> f64 {
    let s2 = [
        cloud.sigma_x * cloud.sigma_x,
        cloud.sigma_y * cloud.sigma_y,
        cloud.sigma_z * cloud.sigma_z,
    ];
    let p = [from.x, from.y, from.z];
    let u = [dir.x, dir.y, dir.z];
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for i in 0..3 {
        a += u[i] * u[i] / s2[i];
        b += p[i] * u[i] / s2[i];
        c += p[i] * p[i] / s2[i];
    }
    // exponent −(a t² + 2 b t + c)/2; completing the square gives an erf
    let prefactor = (-0.5 * c + 0.5 * b * b / a).exp() * (std::f64::consts::PI / (2.0 * a)).sqrt();
    let lower = erf(b / (2.0 * a).sqrt());
    let upper = if t_max.is_infinite() {
        1.0
    } else {
        erf((a * t_max + b) / (2.0 * a).sqrt())
    };
    prefactor * (upper - lower)
}

/// Complex field transmission exp(i(k/2)∫χ dl) along a ray in the given
/// mode; modulus ≤ 1 whenever n₀ ≥ 0.
pub fn ray_attenuation(
    cloud: &CloudConfig,
    scheme: &LevelScheme,
    n0: f64,
    from: Vec3,
    to: RayEnd,
    mode: PropagationMode,
    delta: f64,
) -> Complex64 {
    let (dir, t_max) = match to {
        RayEnd::Point(p) => {
            let d = p - (from);
            let len = d.norm();
            if len == 0.0 {
                return Complex64::ONE;
            }
            (d.scale(1.0 / len), len)
        }
        RayEnd::HalfLine(u) => (u, f64::INFINITY),
    };
    let column = n0 * gaussian_column(cloud, from, dir, t_max);
    let amp = mode_amplitude(scheme, mode, delta);
    // χ = −C·n·A  ⇒  exponent i(1/2)∫χ = −i(C/2)·A·column
    let exponent = Complex64::new(0.0, -0.5 * scatter::cross_section_norm(scheme)) * amp * column;
    exponent.exp()
}
