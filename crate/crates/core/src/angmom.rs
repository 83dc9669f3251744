//! Exact angular-momentum algebra: Wigner 3j/6j symbols and hyperfine
//! dipole matrix elements.
//!
//! Symbols are evaluated by the Racah sum over exact big-integer rationals
//! and converted to `f64` only at the boundary, so alternating-sum
//! cancellation never degrades the result. Condon–Shortley phases
//! throughout; reduced matrix elements are real.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::atom::{AtomError, LevelScheme};

/// Angular momentum or projection stored as twice its value, so
/// half-integers are exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };

    /// Builds from a doubled value (`from_twice(3)` is 3/2).
    pub const fn from_twice(twice: i32) -> Self {
        HalfInt { twice }
    }

    /// Builds from an integer value.
    pub const fn new(value: i32) -> Self {
        HalfInt { twice: 2 * value }
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// Multiplicity 2j + 1.
    pub fn multiplicity(self) -> i32 {
        self.twice + 1
    }

    /// Whether `m` is a valid projection of this magnitude: |m| ≤ j and
    /// m ≡ j (mod 1).
    pub fn admits_projection(self, m: HalfInt) -> bool {
        m.twice.abs() <= self.twice && (self.twice - m.twice) % 2 == 0
    }

    /// Iterates projections −j, −j+1, …, +j.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        (-self.twice..=self.twice)
            .step_by(2)
            .map(HalfInt::from_twice)
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt::from_twice(self.twice + rhs.twice)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt::from_twice(self.twice - rhs.twice)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt::from_twice(-self.twice)
    }
}

impl std::fmt::Debug for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Display::fmt(self, f)
    }
}

// JSON carries angular momenta as plain numbers (2.5 for 5/2).
impl serde::Serialize for HalfInt {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_integer() {
            serializer.serialize_i32(self.twice / 2)
        } else {
            serializer.serialize_f64(self.value())
        }
    }
}

impl<'de> serde::Deserialize<'de> for HalfInt {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        let twice = (2.0 * v).round();
        if (2.0 * v - twice).abs() > 1e-9 || twice.abs() > i32::MAX as f64 {
            return Err(serde::de::Error::custom(format!(
                "{v} is not an integer or half-integer"
            )));
        }
        Ok(HalfInt::from_twice(twice as i32))
    }
}

impl std::fmt::Display for HalfInt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

fn triangle_ok(tj1: i32, tj2: i32, tj3: i32) -> bool {
    tj3 <= tj1 + tj2
        && tj1 <= tj2 + tj3
        && tj2 <= tj3 + tj1
        && (tj1 + tj2 + tj3) % 2 == 0
}

/// Δ(j1 j2 j3) = (j1+j2−j3)!(j1−j2+j3)!(−j1+j2+j3)! / (j1+j2+j3+1)! as an
/// exact rational. Arguments are doubled j's with the triangle rule already
/// satisfied.
fn triangle_coefficient(tj1: i32, tj2: i32, tj3: i32) -> BigRational {
    let num = factorial((tj1 + tj2 - tj3) / 2)
        * factorial((tj1 - tj2 + tj3) / 2)
        * factorial((-tj1 + tj2 + tj3) / 2);
    let den = factorial((tj1 + tj2 + tj3) / 2 + 1);
    BigRational::new(num, den)
}

/// sign(s) · sqrt(s² · r), with s and r exact rationals. Keeps the whole
/// computation exact up to a single square root.
fn signed_sqrt_product(s: &BigRational, r: &BigRational) -> f64 {
    if s.is_zero() || r.is_zero() {
        return 0.0;
    }
    let square = s * s * r;
    let magnitude = square.to_f64().expect("wigner symbol out of f64 range").sqrt();
    if s.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

/// Wigner 3j symbol by the Racah formula.
///
/// Returns exactly 0 when the triangle rule or the projection sum rule
/// fails; invalid (j, m) pairings also give 0 rather than an error.
pub fn wigner3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> f64 {
    let (tj1, tj2, tj3) = (j1.twice(), j2.twice(), j3.twice());
    let (tm1, tm2, tm3) = (m1.twice(), m2.twice(), m3.twice());

    if tj1 < 0 || tj2 < 0 || tj3 < 0 {
        return 0.0;
    }
    if !j1.admits_projection(m1) || !j2.admits_projection(m2) || !j3.admits_projection(m3) {
        return 0.0;
    }
    if tm1 + tm2 + tm3 != 0 || !triangle_ok(tj1, tj2, tj3) {
        return 0.0;
    }

    // Sum limits of the Racah series, all plain integers.
    let b1 = (tj1 + tj2 - tj3) / 2;
    let b2 = (tj1 - tm1) / 2;
    let b3 = (tj2 + tm2) / 2;
    let a1 = (tj2 - tj3 - tm1) / 2;
    let a2 = (tj1 - tj3 + tm2) / 2;
    let k_min = a1.max(a2).max(0);
    let k_max = b1.min(b2).min(b3);
    if k_min > k_max {
        return 0.0;
    }

    let mut series = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(b1 - k)
            * factorial(b2 - k)
            * factorial(b3 - k)
            * factorial(k - a1)
            * factorial(k - a2);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            series += term;
        } else {
            series -= term;
        }
    }

    let mut radical = triangle_coefficient(tj1, tj2, tj3);
    for (tj, tm) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        radical *= BigRational::from(factorial((tj + tm) / 2) * factorial((tj - tm) / 2));
    }

    // Overall phase (−1)^(j1 − j2 − m3); the exponent is an integer here.
    let phase_exp = (tj1 - tj2 - tm3) / 2;
    let sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * signed_sqrt_product(&series, &radical)
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} by the Racah formula.
///
/// Returns 0 when any of the four triads violates the triangle rule.
pub fn wigner6j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    j4: HalfInt,
    j5: HalfInt,
    j6: HalfInt,
) -> f64 {
    let (tj1, tj2, tj3) = (j1.twice(), j2.twice(), j3.twice());
    let (tj4, tj5, tj6) = (j4.twice(), j5.twice(), j6.twice());

    if [tj1, tj2, tj3, tj4, tj5, tj6].iter().any(|&t| t < 0) {
        return 0.0;
    }
    let triads = [
        (tj1, tj2, tj3),
        (tj1, tj5, tj6),
        (tj4, tj2, tj6),
        (tj4, tj5, tj3),
    ];
    if triads.iter().any(|&(a, b, c)| !triangle_ok(a, b, c)) {
        return 0.0;
    }

    let a: Vec<i32> = triads.iter().map(|&(x, y, z)| (x + y + z) / 2).collect();
    let b1 = (tj1 + tj2 + tj4 + tj5) / 2;
    let b2 = (tj1 + tj3 + tj4 + tj6) / 2;
    let b3 = (tj2 + tj3 + tj5 + tj6) / 2;

    let k_min = *a.iter().max().unwrap();
    let k_max = b1.min(b2).min(b3);
    if k_min > k_max {
        return 0.0;
    }

    let mut series = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k - a[0])
            * factorial(k - a[1])
            * factorial(k - a[2])
            * factorial(k - a[3])
            * factorial(b1 - k)
            * factorial(b2 - k)
            * factorial(b3 - k);
        let term = BigRational::new(factorial(k + 1), den);
        if k % 2 == 0 {
            series += term;
        } else {
            series -= term;
        }
    }

    let mut radical = BigRational::one();
    for &(x, y, z) in &triads {
        radical *= triangle_coefficient(x, y, z);
    }

    signed_sqrt_product(&series, &radical)
}

/// Hyperfine dipole matrix element ⟨Fe me|d_q|F0 m0⟩ in units of the
/// fine-structure reduced element ⟨Je‖d‖Jg⟩ = 1.
///
/// Zero unless me = m0 + q and the (F0, 1, Fe) triangle holds; electric
/// dipole only, so ΔF ∈ {−1, 0, +1} with no 0→0.
pub fn dipole_element(
    f0: HalfInt,
    m0: HalfInt,
    q: i32,
    fe: HalfInt,
    me: HalfInt,
    scheme: &LevelScheme,
) -> Result<f64, AtomError> {
    if !scheme.has_ground(f0) {
        return Err(AtomError::UnknownLevel(f0));
    }
    if !scheme.has_excited(fe) {
        return Err(AtomError::UnknownLevel(fe));
    }
    debug_assert!(q.abs() <= 1);

    if !f0.admits_projection(m0) || !fe.admits_projection(me) {
        return Ok(0.0);
    }
    if me.twice() != m0.twice() + 2 * q {
        return Ok(0.0);
    }

    let one = HalfInt::new(1);
    let projection = wigner3j(f0, one, fe, m0, HalfInt::new(q), -me);
    if projection == 0.0 {
        return Ok(0.0);
    }
    let reduced = hyperfine_reduced_element(f0, fe, scheme);

    // CG⟨F0 m0; 1 q|Fe me⟩ = (−1)^(F0−1+me) √(2Fe+1) · 3j(F0 1 Fe; m0 q −me);
    // the √(2Fe+1) cancels against the Wigner–Eckart denominator.
    let phase_exp = (f0.twice() - 2 + me.twice()) / 2;
    let sign = if phase_exp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(sign * projection * reduced)
}

/// ⟨Fe‖d‖F0⟩ from the fine-structure element via the 6j reduction, with
/// ⟨Je‖d‖Jg⟩ = 1.
fn hyperfine_reduced_element(f0: HalfInt, fe: HalfInt, scheme: &LevelScheme) -> f64 {
    let (i, jg, je) = (scheme.nuclear_spin, scheme.jg, scheme.je);
    let six = wigner6j(je, fe, i, f0, jg, HalfInt::new(1));
    let weight = f64::from(fe.multiplicity() * f0.multiplicity());
    let phase_twice = je.twice() + i.twice() + f0.twice() + 2;
    debug_assert!(phase_twice % 2 == 0);
    let sign = if (phase_twice / 2).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    sign * weight.sqrt() * six
}
