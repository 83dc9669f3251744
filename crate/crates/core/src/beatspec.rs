//! Doppler-broadened heterodyne (light-beating) spectral profiles of the
//! Raman-scattered light for single and double scattering.
//!
//! The beat note sits at the Zeeman carrier ω_R; atomic motion broadens
//! it. For single scattering the phase is 2(ω_L/c)·z(τ) with ballistic
//! z(τ) = z(0) + v_z τ; for double scattering it is (ω_L/c)·s₁₂(τ) where
//! s₁₂ is the loop path length in → 1 → 2 → out. The Maxwell velocity
//! average is done analytically per geometry (the phase is linear in the
//! two velocities); the geometry average is Monte Carlo over the supplied
//! pair sampler. Everything here is for the optically thin regime.

use crate::medium::Vec3;

/// Maxwell velocity model: per-axis rms velocity, units γ/k.
#[derive(Debug, Clone, Copy)]
pub struct VelocityModel {
    pub v_rms: f64,
}

impl VelocityModel {
    pub fn new(v_rms: f64) -> Self {
        debug_assert!(v_rms >= 0.0);
        VelocityModel { v_rms }
    }

    /// From the mass-scaled velocity variance (k_B T / m in (γ/k)²).
    pub fn from_temperature(temperature: f64) -> Self {
        VelocityModel {
            v_rms: temperature.max(0.0).sqrt(),
        }
    }
}

/// Beat-note spectrum on a grid of offsets from the carrier ω_R,
/// normalized to unit area (trapezoid rule over the grid).
#[derive(Debug, Clone)]
pub struct BeatSpectrum {
    /// Offsets from ω_R, units γ.
    pub omega_grid: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Carrier (Zeeman beat) frequency ω_R, units γ.
    pub carrier: f64,
}

impl BeatSpectrum {
    fn delta_spike(grid: &[f64], carrier: f64) -> Self {
        // all weight in the bin containing ω_R (offset zero)
        let idx = grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut intensity = vec![0.0; grid.len()];
        let d_lo = if idx > 0 { grid[idx] - grid[idx - 1] } else { 0.0 };
        let d_hi = if idx + 1 < grid.len() {
            grid[idx + 1] - grid[idx]
        } else {
            0.0
        };
        let bin = 0.5 * (d_lo + d_hi);
        intensity[idx] = if bin > 0.0 { 1.0 / bin } else { 1.0 };
        BeatSpectrum {
            omega_grid: grid.to_vec(),
            intensity,
            carrier,
        }
    }

    fn from_gaussian_mixture(grid: &[f64], widths: &[f64], carrier: f64) -> Self {
        let mut intensity = vec![0.0; grid.len()];
        let norm = 1.0 / (widths.len() as f64);
        for &w in widths {
            for (i, &omega) in grid.iter().enumerate() {
                intensity[i] += norm * (-0.5 * (omega / w).powi(2)).exp()
                    / (w * (2.0 * std::f64::consts::PI).sqrt());
            }
        }
        let mut spec = BeatSpectrum {
            omega_grid: grid.to_vec(),
            intensity,
            carrier,
        };
        spec.renormalize();
        spec
    }

    fn renormalize(&mut self) {
        let area = self.trapezoid_area();
        if area > 0.0 {
            for v in &mut self.intensity {
                *v /= area;
            }
        }
    }

    pub fn trapezoid_area(&self) -> f64 {
        self.omega_grid
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(w, i)| 0.5 * (i[0] + i[1]) * (w[1] - w[0]))
            .sum()
    }

    /// RMS width about the carrier by quadrature over the grid.
    pub fn rms_width(&self) -> f64 {
        let second: f64 = self
            .omega_grid
            .windows(2)
            .zip(self.intensity.windows(2))
            .map(|(w, i)| {
                0.5 * (i[0] * w[0] * w[0] + i[1] * w[1] * w[1]) * (w[1] - w[0])
            })
            .sum();
        (second / self.trapezoid_area()).sqrt()
    }

    /// Full width at half maximum by linear interpolation; zero for a
    /// single-bin spike.
    pub fn fwhm(&self) -> f64 {
        let (peak_idx, &peak) = self
            .intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let half = 0.5 * peak;
        let above = self.intensity.iter().filter(|&&v| v > half).count();
        if above <= 1 {
            return 0.0;
        }
        let mut left = self.omega_grid[0];
        for i in (1..=peak_idx).rev() {
            if self.intensity[i - 1] <= half && self.intensity[i] > half {
                let t = (half - self.intensity[i - 1])
                    / (self.intensity[i] - self.intensity[i - 1]);
                left = self.omega_grid[i - 1] + t * (self.omega_grid[i] - self.omega_grid[i - 1]);
                break;
            }
        }
        let mut right = *self.omega_grid.last().unwrap();
        for i in peak_idx..self.omega_grid.len() - 1 {
            if self.intensity[i] > half && self.intensity[i + 1] <= half {
                let t = (self.intensity[i] - half) / (self.intensity[i] - self.intensity[i + 1]);
                right = self.omega_grid[i] + t * (self.omega_grid[i + 1] - self.omega_grid[i]);
                break;
            }
        }
        right - left
    }
}

/// Single-scattering beat profile: for Maxwell velocities the τ-integral
/// is a Gaussian centered at ω_R with rms width 2(ω_L/c)·v_rms.
pub fn single_profile(
    vmodel: &VelocityModel,
    omega_l_over_c: f64,
    omega_r: f64,
    grid: &[f64],
) -> BeatSpectrum {
    debug_assert!(grid.windows(2).all(|w| w[1] > w[0]), "grid must be sorted");
    let width = 2.0 * omega_l_over_c * vmodel.v_rms;
    if width == 0.0 {
        return BeatSpectrum::delta_spike(grid, omega_r);
    }
    BeatSpectrum::from_gaussian_mixture(grid, &[width], omega_r)
}

/// Double-scattering beat profile. Per pair geometry with interatomic
/// unit direction n̂, the loop phase rate is linear in the two atomic
/// velocities with sensitivity vectors (ẑ − n̂) and (ẑ + n̂); the Maxwell
/// average per geometry is then a Gaussian of rms width
/// (ω_L/c)·v_rms·√(|ẑ−n̂|² + |ẑ+n̂|²). The geometry ensemble is averaged
/// by Monte Carlo over the supplied sampler.
pub fn double_profile<F>(
    vmodel: &VelocityModel,
    omega_l_over_c: f64,
    omega_r: f64,
    mut pair_geometry_sampler: F,
    n_geometries: usize,
    grid: &[f64],
) -> BeatSpectrum
where
    F: FnMut() -> Vec3,
{
    debug_assert!(grid.windows(2).all(|w| w[1] > w[0]), "grid must be sorted");
    if vmodel.v_rms == 0.0 {
        return BeatSpectrum::delta_spike(grid, omega_r);
    }
    let widths: Vec<f64> = (0..n_geometries.max(1))
        .map(|_| {
            let n = pair_geometry_sampler().unit();
            let in_sens = Vec3::new(-n.x, -n.y, 1.0 - n.z); // ẑ − n̂
            let out_sens = Vec3::new(n.x, n.y, 1.0 + n.z); // ẑ + n̂
            let rate_sq = in_sens.dot(in_sens) + out_sens.dot(out_sens);
            omega_l_over_c * vmodel.v_rms * rate_sq.sqrt()
        })
        .collect();
    BeatSpectrum::from_gaussian_mixture(grid, &widths, omega_r)
}

/// Declared resolvability criterion: the profile's FWHM must be below a
/// third of the Zeeman beat frequency. Returns the verdict and the margin
/// FWHM/ω_beat (resolvable iff margin < 1/3).
pub fn channel_resolvability(spectrum: &BeatSpectrum, zeeman_beat: f64) -> (bool, f64) {
    let fwhm = spectrum.fwhm();
    if zeeman_beat <= 0.0 {
        return (fwhm == 0.0, if fwhm == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let margin = fwhm / zeeman_beat;
    (margin < 1.0 / 3.0, margin)
}
