//! JSON run configuration: scheme overrides, cloud geometry, detection
//! channel, scan grid, and output paths.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angmom::HalfInt;
use crate::atom::LevelScheme;
use crate::cbs::{ChannelSpec, CbsError, DiagramSet};
use crate::medium::{AttenuationModel, CloudConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub cloud: CloudSection,
    #[serde(default)]
    pub channel: ChannelSection,
    pub delta_grid: DeltaGrid,
    pub n_samples: u64,
    #[serde(default = "default_max_order")]
    pub n_max_order: usize,
    /// Required: reproducibility contract forbids a wall-clock default.
    pub seed: u64,
    pub outputs: Outputs,
    #[serde(default)]
    pub beat: BeatSection,
}

fn default_max_order() -> usize {
    2
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CbsError> {
        if self.delta_grid.steps < 2 {
            return Err(CbsError::Config("delta_grid.steps must be ≥ 2".into()));
        }
        if self.delta_grid.start >= self.delta_grid.stop {
            return Err(CbsError::Config(
                "delta_grid.start must be below delta_grid.stop".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(CbsError::Config("n_samples must be ≥ 1".into()));
        }
        if self.n_max_order == 0 {
            return Err(CbsError::Config("n_max_order must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn build_scheme(&self) -> Result<LevelScheme, CbsError> {
        self.scheme.build()
    }

    pub fn build_cloud(&self) -> Result<CloudConfig, CbsError> {
        self.cloud.build()
    }

    pub fn build_channel(&self, scheme: &LevelScheme) -> Result<ChannelSpec, CbsError> {
        self.channel.build(scheme)
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.delta_grid.points()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl DeltaGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        (0..n)
            .map(|i| {
                self.start + (self.stop - self.start) * (i as f64) / ((n - 1) as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// "rb85" (default) or "classical_dipole".
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub zeeman_ground_splitting: Option<f64>,
    #[serde(default)]
    pub zeeman_quadratic: Option<f64>,
    /// Full custom scheme; overrides the preset entirely.
    #[serde(default)]
    pub custom: Option<LevelScheme>,
}

impl SchemeConfig {
    pub fn build(&self) -> Result<LevelScheme, CbsError> {
        let mut scheme = if let Some(custom) = &self.custom {
            custom.clone()
        } else {
            match self.preset.as_deref() {
                None | Some("rb85") => LevelScheme::rb85_default(),
                Some("classical_dipole") => LevelScheme::classical_dipole(),
                Some(other) => {
                    return Err(CbsError::Config(format!("unknown scheme preset '{other}'")))
                }
            }
        };
        if let Some(dz) = self.zeeman_ground_splitting {
            if dz < 0.0 {
                return Err(CbsError::Config("zeeman splitting must be ≥ 0".into()));
            }
            scheme.zeeman_ground_splitting = dz;
        }
        if let Some(quad) = self.zeeman_quadratic {
            scheme.zeeman_quadratic = quad;
        }
        Ok(scheme)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSection {
    /// "sphere" (default) or "cigar".
    #[serde(default)]
    pub shape: Option<String>,
    /// rms radius for the sphere preset, units 1/k.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// transverse/axial radii for the cigar preset.
    #[serde(default)]
    pub sigma_perp: Option<f64>,
    #[serde(default)]
    pub sigma_z: Option<f64>,
    /// explicit radii override the presets.
    #[serde(default)]
    pub radii: Option<[f64; 3]>,
    #[serde(default = "default_b")]
    pub target_b: f64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub attenuation: AttenuationModel,
}

fn default_b() -> f64 {
    1.0
}

impl Default for CloudSection {
    fn default() -> Self {
        CloudSection {
            shape: None,
            sigma: None,
            sigma_perp: None,
            sigma_z: None,
            radii: None,
            target_b: 1.0,
            temperature: 0.0,
            attenuation: AttenuationModel::full(),
        }
    }
}

impl CloudSection {
    pub fn build(&self) -> Result<CloudConfig, CbsError> {
        let mut cloud = if let Some([sx, sy, sz]) = self.radii {
            CloudConfig {
                sigma_x: sx,
                sigma_y: sy,
                sigma_z: sz,
                target_b: self.target_b,
                temperature: self.temperature,
                attenuation: self.attenuation,
            }
        } else {
            match self.shape.as_deref() {
                None | Some("sphere") => {
                    CloudConfig::sphere(self.sigma.unwrap_or(1000.0), self.target_b)
                }
                Some("cigar") => CloudConfig::cigar(
                    self.sigma_perp.unwrap_or(500.0),
                    self.sigma_z.unwrap_or(2000.0),
                    self.target_b,
                ),
                Some(other) => {
                    return Err(CbsError::Config(format!("unknown cloud shape '{other}'")))
                }
            }
        };
        cloud.temperature = self.temperature;
        cloud.attenuation = self.attenuation;
        if cloud.sigma_x <= 0.0 || cloud.sigma_y <= 0.0 || cloud.sigma_z <= 0.0 {
            return Err(CbsError::Config("cloud radii must be positive".into()));
        }
        if cloud.target_b <= 0.0 {
            return Err(CbsError::Config("target_b must be positive".into()));
        }
        Ok(cloud)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default)]
    pub pol_in: Option<i32>,
    #[serde(default)]
    pub pol_out: Option<i32>,
    /// Detected final Zeeman sublevel; defaults to −F0 + 2.
    #[serde(default)]
    pub final_m: Option<HalfInt>,
    /// "sigma_only" or "full" (default).
    #[serde(default)]
    pub diagram_set: Option<String>,
}

impl ChannelSection {
    pub fn build(&self, scheme: &LevelScheme) -> Result<ChannelSpec, CbsError> {
        let diagram_set = match self.diagram_set.as_deref() {
            None | Some("full") => DiagramSet::Full,
            Some("sigma_only") => DiagramSet::SigmaOnly,
            Some(other) => {
                return Err(CbsError::Config(format!("unknown diagram set '{other}'")))
            }
        };
        let channel = ChannelSpec {
            pol_in: self.pol_in.unwrap_or(1),
            pol_out: self.pol_out.unwrap_or(1),
            final_m: self
                .final_m
                .unwrap_or(scheme.stretched_m() + HalfInt::new(2)),
            diagram_set,
        };
        channel.validate(scheme)?;
        Ok(channel)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv_path: PathBuf,
    #[serde(default)]
    pub plot_path: Option<PathBuf>,
}

/// Beat-spectrum settings; all optional with physically sensible defaults.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BeatSection {
    /// rms velocity (γ/k); defaults to √temperature from the cloud.
    #[serde(default)]
    pub v_rms: Option<f64>,
    /// Carrier ω_R (γ); defaults to the Zeeman beat of the channel.
    #[serde(default)]
    pub omega_r: Option<f64>,
    /// Offset grid (γ); defaults to ±8 widths around the carrier.
    #[serde(default)]
    pub grid: Option<DeltaGrid>,
    #[serde(default = "default_geometries")]
    pub n_geometries: usize,
}

fn default_geometries() -> usize {
    4096
}

/// SHA-256 of the raw configuration file, truncated to 16 hex digits;
/// stamped into every output file together with the seed.
pub fn config_hash(raw: &[u8]) -> String {
    let digest = Sha256::digest(raw);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
