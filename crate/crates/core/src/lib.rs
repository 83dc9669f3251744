//! Monte-Carlo simulation of coherent backscattering of polarized light
//! from a spin-oriented, multilevel ultracold atomic gas.
//!
//! The simulator computes helicity-resolved single, ladder, and
//! interference cross sections at exact backscattering, the
//! enhancement-factor spectra built from them (which dip below unity in
//! the off-resonance windows between hyperfine transitions), and the
//! Doppler-broadened light-beating profiles proposed for detecting the
//! Raman-shifted channel.
//!
//! Units: frequencies in the natural width γ, lengths in 1/k, densities
//! in k³, cross sections in 1/k².

pub mod angmom;
pub mod atom;
pub mod beatspec;
pub mod cbs;
pub mod config;
pub mod medium;
pub mod oracles;
pub mod output;
pub(crate) mod quadrule;
pub mod scatter;

pub use angmom::HalfInt;
pub use atom::LevelScheme;
pub use cbs::{ChannelSpec, DiagramSet, SpectrumRecord};
pub use medium::{CloudConfig, Vec3};
