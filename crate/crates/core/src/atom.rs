//! Model atom: hyperfine level structure, transition detunings, and the
//! ground-state Zeeman ladder.
//!
//! All frequencies are in units of the natural width γ ≡ 1. Excited
//! energies are offsets from the reference line (highest excited level
//! reached from the populated ground level), so a laser detuning Δ means
//! ω_L = ω_ref + Δ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angmom::HalfInt;

#[derive(Debug, Error)]
pub enum AtomError {
    #[error("level F={0} is not part of the scheme")]
    UnknownLevel(HalfInt),
    #[error("invalid level scheme: {0}")]
    InvalidScheme(String),
}

/// Hyperfine level energies, angular momenta, and Zeeman parameters of the
/// model atom. Immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelScheme {
    pub nuclear_spin: HalfInt,
    pub jg: HalfInt,
    pub je: HalfInt,
    /// (F0, energy) pairs, energies relative to the populated ground level.
    pub ground_levels: Vec<(HalfInt, f64)>,
    /// (Fe, energy) pairs, energies relative to the reference line.
    pub excited_levels: Vec<(HalfInt, f64)>,
    /// Natural width; the frequency unit, fixed to 1.
    pub gamma: f64,
    /// Uniform adjacent-sublevel Zeeman spacing δ_Z in the ground state.
    pub zeeman_ground_splitting: f64,
    /// Optional quadratic correction making the ladder non-equidistant.
    pub zeeman_quadratic: f64,
    /// The ground level that carries the population (atoms sit in the
    /// stretched sublevel m = −F0 of this level).
    pub populated_f0: HalfInt,
}

impl LevelScheme {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nuclear_spin: HalfInt,
        jg: HalfInt,
        je: HalfInt,
        ground_levels: Vec<(HalfInt, f64)>,
        excited_levels: Vec<(HalfInt, f64)>,
        zeeman_ground_splitting: f64,
        zeeman_quadratic: f64,
        populated_f0: HalfInt,
    ) -> Result<Self, AtomError> {
        let scheme = LevelScheme {
            nuclear_spin,
            jg,
            je,
            ground_levels,
            excited_levels,
            gamma: 1.0,
            zeeman_ground_splitting,
            zeeman_quadratic,
            populated_f0,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    fn validate(&self) -> Result<(), AtomError> {
        let check_range = |f: HalfInt, j: HalfInt, i: HalfInt| {
            let lo = (j.twice() - i.twice()).abs();
            let hi = j.twice() + i.twice();
            f.twice() >= lo && f.twice() <= hi && (f.twice() - hi) % 2 == 0
        };
        for &(f0, _) in &self.ground_levels {
            if !check_range(f0, self.jg, self.nuclear_spin) {
                return Err(AtomError::InvalidScheme(format!(
                    "ground F={f0} outside |Jg−I|..Jg+I"
                )));
            }
        }
        for &(fe, _) in &self.excited_levels {
            if !check_range(fe, self.je, self.nuclear_spin) {
                return Err(AtomError::InvalidScheme(format!(
                    "excited F={fe} outside |Je−I|..Je+I"
                )));
            }
        }
        for levels in [&self.ground_levels, &self.excited_levels] {
            for pair in levels.windows(2) {
                if pair[1].1 <= pair[0].1 {
                    return Err(AtomError::InvalidScheme(
                        "level energies must be strictly increasing".into(),
                    ));
                }
            }
        }
        if self.gamma <= 0.0 {
            return Err(AtomError::InvalidScheme("gamma must be positive".into()));
        }
        if self.zeeman_ground_splitting < 0.0 {
            return Err(AtomError::InvalidScheme(
                "zeeman splitting must be non-negative".into(),
            ));
        }
        if !self.has_ground(self.populated_f0) {
            return Err(AtomError::UnknownLevel(self.populated_f0));
        }
        Ok(())
    }

    /// The ⁸⁵Rb D2 scheme. Excited energies are offsets from the
    /// F0=3 → Fe=4 line computed from the 5P₃/₂ hyperfine splittings
    /// (120.64 MHz and 63.40 MHz between adjacent levels) in units of
    /// γ/2π = 6.066 MHz; ground F0=2 sits 499.2γ below F0=3.
    pub fn rb85_default() -> Self {
        LevelScheme::new(
            HalfInt::from_twice(5),
            HalfInt::from_twice(1),
            HalfInt::from_twice(3),
            vec![(HalfInt::new(2), -499.2), (HalfInt::new(3), 0.0)],
            vec![
                (HalfInt::new(1), -35.18),
                (HalfInt::new(2), -30.34),
                (HalfInt::new(3), -19.89),
                (HalfInt::new(4), 0.0),
            ],
            0.1,
            0.0,
            HalfInt::new(3),
        )
        .expect("rb85 scheme is valid")
    }

    /// Single-line F0=0 → Fe=1 scatterer (I = 0, Jg = 0, Je = 1): the
    /// classical-dipole reference atom used by the reciprocity oracle.
    pub fn classical_dipole() -> Self {
        LevelScheme::new(
            HalfInt::new(0),
            HalfInt::new(0),
            HalfInt::new(1),
            vec![(HalfInt::new(0), 0.0)],
            vec![(HalfInt::new(1), 0.0)],
            0.0,
            0.0,
            HalfInt::new(0),
        )
        .expect("classical dipole scheme is valid")
    }

    pub fn has_ground(&self, f0: HalfInt) -> bool {
        self.ground_levels.iter().any(|&(f, _)| f == f0)
    }

    pub fn has_excited(&self, fe: HalfInt) -> bool {
        self.excited_levels.iter().any(|&(f, _)| f == fe)
    }

    pub fn ground_energy(&self, f0: HalfInt) -> Result<f64, AtomError> {
        self.ground_levels
            .iter()
            .find(|&&(f, _)| f == f0)
            .map(|&(_, e)| e)
            .ok_or(AtomError::UnknownLevel(f0))
    }

    pub fn excited_energy(&self, fe: HalfInt) -> Result<f64, AtomError> {
        self.excited_levels
            .iter()
            .find(|&&(f, _)| f == fe)
            .map(|&(_, e)| e)
            .ok_or(AtomError::UnknownLevel(fe))
    }

    pub fn ground_f_values(&self) -> impl Iterator<Item = HalfInt> + '_ {
        self.ground_levels.iter().map(|&(f, _)| f)
    }

    pub fn excited_f_values(&self) -> impl Iterator<Item = HalfInt> + '_ {
        self.excited_levels.iter().map(|&(f, _)| f)
    }

    /// Stretched sublevel m = −F0 of the populated ground level.
    pub fn stretched_m(&self) -> HalfInt {
        -self.populated_f0
    }
}

/// Laser detuning from the specific F0 → Fe resonance when the laser is
/// detuned `delta` from the reference line.
pub fn detuning(
    scheme: &LevelScheme,
    f0: HalfInt,
    fe: HalfInt,
    delta: f64,
) -> Result<f64, AtomError> {
    let ge = scheme.ground_energy(f0)?;
    let ee = scheme.excited_energy(fe)?;
    Ok(delta - ee + ge)
}

/// Ground-state Zeeman energy of sublevel m, measured from the populated
/// stretched state m = −F0:
/// E(m) = δ_Z·(m + F0) + κ·(m + F0)².
pub fn zeeman_energy(scheme: &LevelScheme, f0: HalfInt, m: HalfInt) -> Result<f64, AtomError> {
    if !scheme.has_ground(f0) {
        return Err(AtomError::UnknownLevel(f0));
    }
    debug_assert!(f0.admits_projection(m));
    let steps = (m + f0).value();
    Ok(scheme.zeeman_ground_splitting * steps + scheme.zeeman_quadratic * steps * steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rb85_structure() {
        let s = LevelScheme::rb85_default();
        assert_eq!(s.excited_levels.len(), 4);
        assert_eq!(s.ground_levels.len(), 2);
        assert_eq!(s.populated_f0, HalfInt::new(3));
        assert_eq!(s.stretched_m(), HalfInt::new(-3));
    }

    #[test]
    fn rb85_splittings_from_spectroscopy() {
        // Independent recomputation from the 5P₃/₂ hyperfine constants
        // A = 25.0020 MHz, B = 25.790 MHz with I = 5/2, J = 3/2:
        // E_F = A·K/2 + B·[3K(K+1)/2 − 2I(I+1)J(J+1)] / [2I(2I−1)·2J(2J−1)],
        // K = F(F+1) − I(I+1) − J(J+1); splittings then divided by
        // γ/2π = 6.066 MHz.
        let (a, b) = (25.0020, 25.790);
        let (ii, jj) = (8.75, 3.75); // I(I+1), J(J+1)
        let denom = 20.0 * 6.0; // 2I(2I−1)·2J(2J−1)
        let e = |f: f64| {
            let k = f * (f + 1.0) - ii - jj;
            a * k / 2.0 + b * (1.5 * k * (k + 1.0) - 2.0 * ii * jj) / denom
        };
        let gamma_mhz = 6.066;
        let s = LevelScheme::rb85_default();

        let e4 = s.excited_energy(HalfInt::new(4)).unwrap();
        let e3 = s.excited_energy(HalfInt::new(3)).unwrap();
        let e2 = s.excited_energy(HalfInt::new(2)).unwrap();
        let e1 = s.excited_energy(HalfInt::new(1)).unwrap();

        assert_eq!(e4, 0.0);
        // 120.64 MHz / 6.066 MHz = 19.888…
        assert_relative_eq!(e3 - e4, -(e(4.0) - e(3.0)) / gamma_mhz, epsilon = 5e-3);
        // 63.40 MHz / 6.066 MHz = 10.452…
        assert_relative_eq!(e2 - e3, -(e(3.0) - e(2.0)) / gamma_mhz, epsilon = 5e-3);
        assert_relative_eq!(e1 - e2, -(e(2.0) - e(1.0)) / gamma_mhz, epsilon = 5e-3);
    }

    #[test]
    fn detuning_reference_transition() {
        let s = LevelScheme::rb85_default();
        let f3 = HalfInt::new(3);
        assert_eq!(detuning(&s, f3, HalfInt::new(4), 0.0).unwrap(), 0.0);
        assert_eq!(detuning(&s, f3, HalfInt::new(4), -5.0).unwrap(), -5.0);
        // on the Fe=3 line when delta equals its stored offset
        assert_relative_eq!(
            detuning(&s, f3, HalfInt::new(3), -19.89).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            detuning(&s, f3, HalfInt::new(7), 0.0),
            Err(AtomError::UnknownLevel(_))
        ));
    }

    #[test]
    fn zeeman_ladder() {
        let mut s = LevelScheme::rb85_default();
        let f3 = HalfInt::new(3);
        assert_eq!(zeeman_energy(&s, f3, HalfInt::new(-3)).unwrap(), 0.0);
        assert_relative_eq!(
            zeeman_energy(&s, f3, HalfInt::new(-1)).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        s.zeeman_quadratic = 0.05;
        assert_relative_eq!(
            zeeman_energy(&s, f3, HalfInt::new(-1)).unwrap(),
            0.4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zeeman_monotone_when_positive() {
        let mut s = LevelScheme::rb85_default();
        s.zeeman_quadratic = 0.02;
        let f3 = HalfInt::new(3);
        let energies: Vec<f64> = f3
            .projections()
            .map(|m| zeeman_energy(&s, f3, m).unwrap())
            .collect();
        for w in energies.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn invalid_schemes_rejected() {
        // F out of range
        let bad = LevelScheme::new(
            HalfInt::from_twice(5),
            HalfInt::from_twice(1),
            HalfInt::from_twice(3),
            vec![(HalfInt::new(5), 0.0)],
            vec![(HalfInt::new(4), 0.0)],
            0.1,
            0.0,
            HalfInt::new(5),
        );
        assert!(bad.is_err());
        // unsorted energies
        let bad = LevelScheme::new(
            HalfInt::from_twice(5),
            HalfInt::from_twice(1),
            HalfInt::from_twice(3),
            vec![(HalfInt::new(2), 0.0), (HalfInt::new(3), -1.0)],
            vec![(HalfInt::new(4), 0.0)],
            0.1,
            0.0,
            HalfInt::new(3),
        );
        assert!(bad.is_err());
    }
}
