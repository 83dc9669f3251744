//! Single-atom quasi-elastic Kramers–Heisenberg amplitudes over the
//! hyperfine manifold, and the per-helicity-mode forward response of the
//! oriented medium.
//!
//! Conventions: spherical basis ê₊₁ = −(x̂+iŷ)/√2, ê₀ = ẑ,
//! ê₋₁ = (x̂−iŷ)/√2 with quantization along +z. The rotating-wave
//! (resonant) term only; every excited level carries the same width γ = 1.
//!
//! Normalization is anchored once: the isolated stretched σ₋ two-level
//! transition has peak total cross section σ₀ = 6π/k² (k = 1). That fixes
//! the cross-section constant at 3πγ(2Je+1) and the scattering-amplitude
//! constant at −3γ(2Je+1)/4 per scatterer.

use num_complex::Complex64;

use crate::angmom::{dipole_element, HalfInt};
use crate::atom::{detuning, LevelScheme};

/// Complex polarization/amplitude triple in the spherical (helicity) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalVector {
    components: [Complex64; 3], // index 0,1,2 ↔ q = −1, 0, +1
}

impl SphericalVector {
    pub fn new(minus: Complex64, pi: Complex64, plus: Complex64) -> Self {
        SphericalVector {
            components: [minus, pi, plus],
        }
    }

    /// Component e_q = ê_q* · e.
    pub fn component(&self, q: i32) -> Complex64 {
        debug_assert!((-1..=1).contains(&q));
        self.components[(q + 1) as usize]
    }

    /// σ₊ unit helicity vector (drives Δm = +1).
    pub fn sigma_plus() -> Self {
        SphericalVector::new(Complex64::ZERO, Complex64::ZERO, Complex64::ONE)
    }

    /// σ₋ unit helicity vector (drives Δm = −1).
    pub fn sigma_minus() -> Self {
        SphericalVector::new(Complex64::ONE, Complex64::ZERO, Complex64::ZERO)
    }

    /// π unit vector (linear along the quantization axis).
    pub fn pi() -> Self {
        SphericalVector::new(Complex64::ZERO, Complex64::ONE, Complex64::ZERO)
    }

    /// From Cartesian components (vx, vy, vz), possibly complex.
    pub fn from_cartesian(vx: Complex64, vy: Complex64, vz: Complex64) -> Self {
        let sqrt2 = std::f64::consts::SQRT_2;
        SphericalVector::new(
            (vx + Complex64::i() * vy) / sqrt2,
            vz,
            -(vx - Complex64::i() * vy) / sqrt2,
        )
    }

    /// Back to Cartesian components.
    pub fn to_cartesian(&self) -> (Complex64, Complex64, Complex64) {
        let sqrt2 = std::f64::consts::SQRT_2;
        let (em, e0, ep) = (
            self.component(-1),
            self.component(0),
            self.component(1),
        );
        let vx = (em - ep) / sqrt2;
        let vy = -Complex64::i() * (em + ep) / sqrt2;
        (vx, vy, e0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        SphericalVector {
            components: self.components.map(|c| c * factor),
        }
    }

    pub fn add(&self, other: &SphericalVector) -> Self {
        let mut components = self.components;
        for (c, o) in components.iter_mut().zip(other.components) {
            *c += o;
        }
        SphericalVector { components }
    }

    /// |e · n̂|² for a real unit direction, i.e. the longitudinal share;
    /// zero for a transverse polarization.
    pub fn longitudinal_share(&self, dir: (f64, f64, f64)) -> f64 {
        let (vx, vy, vz) = self.to_cartesian();
        (vx * dir.0 + vy * dir.1 + vz * dir.2).norm_sqr()
    }
}

/// Kramers–Heisenberg amplitude for one polarization channel,
/// A = Σ_{Fe} ⟨Fe me|d_{q_out}|F0 m_out⟩ ⟨Fe me|d_{q_in}|F0 m_in⟩
///       / (Δ_{Fe} + iγ/2),  me = m_in + q_in,
/// in units of ⟨Je‖d‖Jg⟩² / γ. Zero unless m_out = m_in + q_in − q_out.
pub fn kh_amplitude(
    scheme: &LevelScheme,
    m_in: HalfInt,
    m_out: HalfInt,
    q_in: i32,
    q_out: i32,
    delta: f64,
) -> Complex64 {
    let f0 = scheme.populated_f0;
    debug_assert!(f0.admits_projection(m_in));
    if m_out.twice() != m_in.twice() + 2 * (q_in - q_out) {
        return Complex64::ZERO;
    }
    if !f0.admits_projection(m_out) {
        return Complex64::ZERO;
    }
    let me = m_in + HalfInt::new(q_in);

    let mut sum = Complex64::ZERO;
    for fe in scheme.excited_f_values() {
        if !fe.admits_projection(me) {
            continue;
        }
        let absorb = dipole_element(f0, m_in, q_in, fe, me, scheme).expect("levels validated");
        let emit = dipole_element(f0, m_out, q_out, fe, me, scheme).expect("levels validated");
        let strength = emit * absorb;
        if strength == 0.0 {
            continue;
        }
        let det = detuning(scheme, f0, fe, delta).expect("levels validated");
        sum += strength / Complex64::new(det, scheme.gamma / 2.0);
    }
    sum
}

/// Bilinear contraction of the KH tensor over arbitrary polarizations:
/// A(e_in, e_out) = Σ_{q_in, q_out} (e_out)*_{q_out} M_{q_out, q_in} (e_in)_{q_in}.
pub fn amplitude_lab_frame(
    scheme: &LevelScheme,
    m_in: HalfInt,
    m_out: HalfInt,
    e_in: &SphericalVector,
    e_out: &SphericalVector,
    delta: f64,
) -> Complex64 {
    let mut total = Complex64::ZERO;
    for q_out in -1..=1 {
        let w_out = e_out.component(q_out).conj();
        if w_out == Complex64::ZERO {
            continue;
        }
        for q_in in -1..=1 {
            let w_in = e_in.component(q_in);
            if w_in == Complex64::ZERO {
                continue;
            }
            total += w_out * kh_amplitude(scheme, m_in, m_out, q_in, q_out, delta) * w_in;
        }
    }
    total
}

/// Cross-section normalization constant: σ_tot = −C · Im A with
/// C = 3πγ(2Je+1) in units of 1/k², anchored to σ₀ = 6π/k² for the
/// stretched two-level line.
pub fn cross_section_norm(scheme: &LevelScheme) -> f64 {
    3.0 * std::f64::consts::PI * scheme.gamma * f64::from(scheme.je.multiplicity())
}

/// Per-scatter amplitude normalization: f = κ·A with κ = −3γ(2Je+1)/(4k),
/// so that |f|² is a differential cross section (units 1/k²) and the
/// optical theorem σ = (4π/k)·Im f_forward reproduces `total_cross_section`.
pub fn amplitude_norm(scheme: &LevelScheme) -> f64 {
    -3.0 * scheme.gamma * f64::from(scheme.je.multiplicity()) / 4.0
}

/// Forward elastic KH amplitude of the stretched state for helicity mode q.
pub fn forward_amplitude(scheme: &LevelScheme, q: i32, delta: f64) -> Complex64 {
    let m = scheme.stretched_m();
    kh_amplitude(scheme, m, m, q, q, delta)
}

/// Complex susceptibility of the oriented medium for helicity mode q at
/// atom density `density` (units k³): χ_q = −C·n·A_q(Δ). Im χ > 0 always.
pub fn susceptibility(scheme: &LevelScheme, q: i32, delta: f64, density: f64) -> Complex64 {
    -cross_section_norm(scheme) * density * forward_amplitude(scheme, q, delta)
}

/// Total cross section of a stretched-state atom for mode q via the
/// optical theorem (units 1/k²).
pub fn total_cross_section(scheme: &LevelScheme, q: i32, delta: f64) -> f64 {
    -cross_section_norm(scheme) * forward_amplitude(scheme, q, delta).im
}

/// Locates a zero of Re χ_q (equivalently of the real part of the forward
/// amplitude) by bisection on [lo, hi] to the given tolerance. The
/// endpoints must bracket a sign change.
pub fn find_re_chi_zero(
    scheme: &LevelScheme,
    q: i32,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Option<f64> {
    let re = |d: f64| susceptibility(scheme, q, d, 1.0).re;
    let (mut f_lo, f_hi) = (re(lo), re(hi));
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = re(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn rb85() -> LevelScheme {
        LevelScheme::rb85_default()
    }

    fn m(v: i32) -> HalfInt {
        HalfInt::new(v)
    }

    #[test]
    fn channel_conservation_exact() {
        let s = rb85();
        for m_in in [-3, -1, 2] {
            for m_out in -3..=3 {
                for q_in in -1..=1 {
                    for q_out in -1..=1 {
                        if m_out != m_in + q_in - q_out {
                            let a = kh_amplitude(&s, m(m_in), m(m_out), q_in, q_out, -3.0);
                            assert_eq!(a, Complex64::ZERO);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn stretched_sigma_minus_has_only_fe4_pole() {
        let s = rb85();
        // On the Fe=3 resonance the σ₋ Rayleigh amplitude shows no
        // enhancement: it must equal a single-pole form exactly.
        let a_res = kh_amplitude(&s, m(-3), m(-3), -1, -1, -19.89);
        let a_far = kh_amplitude(&s, m(-3), m(-3), -1, -1, 0.0);
        // reconstruct the strength from the on-resonance point of Fe=4
        let c = a_far * Complex64::new(0.0, 0.5);
        assert!(c.im.abs() < 1e-12);
        let single_pole = c / Complex64::new(-19.89, 0.5);
        assert_relative_eq!(a_res.re, single_pole.re, max_relative = 1e-10);
        assert_relative_eq!(a_res.im, single_pole.im, max_relative = 1e-10);
        // no resonant enhancement: the σ₊ extinction is resonant there
        // while σ₋ stays far-detuned
        let on = total_cross_section(&s, 1, -19.89);
        let off = total_cross_section(&s, -1, -19.89);
        assert!(on > 10.0 * off);
    }

    #[test]
    fn sigma_plus_dispersion_zero_between_lines() {
        let s = rb85();
        let zero = find_re_chi_zero(&s, 1, -19.0, -1.0, 1e-9)
            .expect("Re A₊₊ changes sign between the Fe=4 and Fe=3 lines");
        assert!(zero > -19.89 && zero < 0.0);
        let a = kh_amplitude(&s, m(-3), m(-3), 1, 1, zero);
        assert!(a.re.abs() < 1e-8);
    }

    #[test]
    fn far_detuned_asymptote() {
        let s = rb85();
        let a6 = kh_amplitude(&s, m(-3), m(-3), 1, 1, -1e6);
        let a7 = kh_amplitude(&s, m(-3), m(-3), 1, 1, -1e7);
        assert!(a6.norm() < 1e-5);
        assert_relative_eq!(a6.norm() / a7.norm(), 10.0, max_relative = 1e-3);
    }

    #[test]
    fn pole_positions_show_as_local_maxima() {
        let s = rb85();
        // |A₊₊| along a fine grid: local maxima within 0.5γ of each
        // coupled resonance (Fe ∈ {2,3,4} — Fe=1 is not reachable from
        // the stretched state with σ₊).
        let grid: Vec<f64> = (0..4200).map(|i| -40.0 + 0.01 * f64::from(i)).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&d| kh_amplitude(&s, m(-3), m(-3), 1, 1, d).norm())
            .collect();
        for pole in [-30.34, -19.89, 0.0] {
            let found = grid
                .windows(3)
                .zip(vals.windows(3))
                .any(|(g, v)| v[1] > v[0] && v[1] > v[2] && (g[1] - pole).abs() < 0.5);
            assert!(found, "no |A| maximum near {pole}");
        }
    }

    #[test]
    fn lab_frame_reduces_to_helicity_channels() {
        let s = rb85();
        let a_tensor = kh_amplitude(&s, m(-3), m(-3), 1, 1, -7.0);
        let a_lab = amplitude_lab_frame(
            &s,
            m(-3),
            m(-3),
            &SphericalVector::sigma_plus(),
            &SphericalVector::sigma_plus(),
            -7.0,
        );
        assert_eq!(a_tensor, a_lab);
    }

    #[test]
    fn lab_frame_bilinearity() {
        let s = rb85();
        let (alpha, beta) = (Complex64::new(0.3, 0.4), Complex64::new(-0.7, 0.2));
        let e1 = SphericalVector::sigma_plus();
        let e2 = SphericalVector::pi();
        let combo = e1.scaled(alpha).add(&e2.scaled(beta));
        let e_out = SphericalVector::sigma_minus();
        let lhs = amplitude_lab_frame(&s, m(-3), m(-2), &combo, &e_out, -7.0);
        let rhs = alpha * amplitude_lab_frame(&s, m(-3), m(-2), &e1, &e_out, -7.0)
            + beta * amplitude_lab_frame(&s, m(-3), m(-2), &e2, &e_out, -7.0);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn passivity_and_sign_opposition_window() {
        let s = rb85();
        // Im χ > 0 everywhere, for every mode
        for q in [-1, 0, 1] {
            for delta in [-50.0, -25.0, -19.89, -10.0, 0.0, 4.0] {
                assert!(susceptibility(&s, q, delta, 0.01).im > 0.0);
            }
        }
        // a window strictly between the Fe=4 and Fe=3 lines where
        // Re χ₊ < 0 < Re χ₋
        let zero = find_re_chi_zero(&s, 1, -19.0, -1.0, 1e-6).unwrap();
        let probe = zero - 1.0; // between the lines, below the σ₊ dispersion zero
        assert!(probe > -19.89 && probe < 0.0);
        let chi_plus = susceptibility(&s, 1, probe, 0.01);
        let chi_minus = susceptibility(&s, -1, probe, 0.01);
        assert!(
            chi_plus.re < 0.0 && chi_minus.re > 0.0,
            "χ₊ = {chi_plus}, χ₋ = {chi_minus} at Δ = {probe}"
        );
    }

    #[test]
    fn sigma_plus_dispersion_zero_regression() {
        // Bisection to 1e−6 γ; value frozen as a regression constant.
        let s = rb85();
        let zero = find_re_chi_zero(&s, 1, -19.0, -1.0, 1e-7).unwrap();
        assert!((zero - ZERO_CROSSING_REGRESSION).abs() < 1e-5, "zero = {zero}");
    }

    /// Regression constant for the Re χ₊ zero between the Fe=4 and Fe=3
    /// lines (pinned from the first verified run).
    pub(crate) const ZERO_CROSSING_REGRESSION: f64 = -2.509878;

    #[test]
    fn stretched_peak_cross_section_is_6pi() {
        let s = rb85();
        // σ₋ on resonance from the stretched state is the textbook
        // two-level peak: 6π/k².
        let sigma = total_cross_section(&s, -1, 0.0);
        assert_relative_eq!(sigma, 6.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn cross_section_positive_and_mode_contrast() {
        let s = rb85();
        for q in [-1, 0, 1] {
            for delta in [-40.0, -25.0, -19.89, -5.0, 0.0, 3.0] {
                assert!(total_cross_section(&s, q, delta) > 0.0);
            }
        }
        // On the Fe=3 line the σ₊ mode is resonant while σ₋ is 19.89γ
        // detuned: more than a factor 10 apart.
        let on = total_cross_section(&s, 1, -19.89);
        let off = total_cross_section(&s, -1, -19.89);
        assert!(on > 10.0 * off, "σ₊ = {on}, σ₋ = {off}");
    }

    #[test]
    fn kramers_kronig_consistency() {
        // Re χ(Δ₀) = (1/π) P∫ Im χ(Δ')/(Δ' − Δ₀) dΔ' over [−200, 200],
        // principal value handled by symmetric excision plus the local
        // derivative correction.
        let s = rb85();
        let chi = |d: f64| susceptibility(&s, 1, d, 1.0);
        for delta0 in [-25.0, -8.0, 3.0] {
            let eps = 0.05;
            let h = 0.005;
            let mut integral = 0.0;
            let mut x = -200.0f64;
            while x < 200.0 {
                let xm = x + 0.5 * h;
                if (xm - delta0).abs() > eps {
                    integral += chi(xm).im / (xm - delta0) * h;
                }
                x += h;
            }
            let slope = (chi(delta0 + eps).im - chi(delta0 - eps).im) / (2.0 * eps);
            integral += 2.0 * eps * slope;
            let reconstructed = integral / PI;
            let direct = chi(delta0).re;
            assert!(
                (reconstructed - direct).abs() <= 0.01 * direct.abs().max(0.01),
                "KK mismatch at {delta0}: {reconstructed} vs {direct}"
            );
        }
    }

    #[test]
    fn phase_opposition_window_exists() {
        let s = rb85();
        let mut found = false;
        for i in 0..200 {
            let delta = -19.5 + 19.0 * f64::from(i) / 199.0;
            let a_plus = kh_amplitude(&s, m(-3), m(-3), 1, 1, delta);
            let a_minus = kh_amplitude(&s, m(-3), m(-3), -1, -1, delta);
            let mut dphi = a_plus.arg() - a_minus.arg();
            while dphi > PI {
                dphi -= 2.0 * PI;
            }
            while dphi < -PI {
                dphi += 2.0 * PI;
            }
            if dphi.abs() > 0.9 * PI {
                found = true;
                break;
            }
        }
        assert!(found, "no Δ with |arg A₊₊ − arg A₋₋| > 0.9π");
    }

    // ------- rotational covariance oracle -------

    /// Wigner small-d matrix element d^j_{m'm}(β) by the factorial sum
    /// (arguments doubled): the convention ⟨m'|e^{−iβJ_y}|m⟩.
    fn small_d(tj: i32, tmp: i32, tm: i32, beta: f64) -> f64 {
        let fact = |n: i32| -> f64 { (1..=n).map(f64::from).product() };
        let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        let jpm = (tj + tm) / 2;
        let jmm = (tj - tm) / 2;
        let jpmp = (tj + tmp) / 2;
        let jmmp = (tj - tmp) / 2;
        let norm = (fact(jpmp) * fact(jmmp) * fact(jpm) * fact(jmm)).sqrt();
        let dm = (tmp - tm) / 2;
        let mut sum = 0.0;
        for k in 0.max(-dm)..=jpm.min(jmmp) {
            let sign = if (dm + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let denom = fact(jpm - k) * fact(k) * fact(dm + k) * fact(jmmp - k);
            sum += sign / denom * c.powi(jpm - k + jmmp - k) * s.powi(dm + 2 * k);
        }
        norm * sum
    }

    #[test]
    fn small_d_matches_vector_rotation() {
        // d¹_{q,0}(β) must reproduce the spherical components of
        // R_y(β)·ẑ = (sinβ, 0, cosβ).
        let beta = 0.37f64;
        let rotated = SphericalVector::from_cartesian(
            Complex64::new(beta.sin(), 0.0),
            Complex64::ZERO,
            Complex64::new(beta.cos(), 0.0),
        );
        for q in [-1i32, 0, 1] {
            let expect = rotated.component(q);
            let d = small_d(2, 2 * q, 0, beta);
            assert!(
                (expect.re - d).abs() < 1e-12 && expect.im.abs() < 1e-12,
                "d¹_{{{q},0}} = {d} vs {expect}"
            );
        }
    }

    #[test]
    fn rotational_covariance_of_kh_tensor() {
        // D† A(Re_in, Re_out) D = A(e_in, e_out) for rotations about y,
        // using the test-local Wigner-d oracle for both the F=3 sublevel
        // basis and the rank-1 polarization components.
        let s = rb85();
        let delta = -7.3;
        let f0 = s.populated_f0;
        let dim = f0.multiplicity() as usize;

        let build = |e_in: &SphericalVector, e_out: &SphericalVector| -> Vec<Vec<Complex64>> {
            f0.projections()
                .map(|mo| {
                    f0.projections()
                        .map(|mi| amplitude_lab_frame(&s, mi, mo, e_in, e_out, delta))
                        .collect()
                })
                .collect()
        };

        let rotate_pol = |e: &SphericalVector, beta: f64| -> SphericalVector {
            let mut out = [Complex64::ZERO; 3];
            for p in -1..=1i32 {
                let mut acc = Complex64::ZERO;
                for q in -1..=1i32 {
                    acc += small_d(2, 2 * p, 2 * q, beta) * e.component(q);
                }
                out[(p + 1) as usize] = acc;
            }
            SphericalVector::new(out[0], out[1], out[2])
        };

        for beta in [0.21, 0.55] {
            let e_in = SphericalVector::sigma_plus();
            let e_out = SphericalVector::sigma_minus();
            let a = build(&e_in, &e_out);
            let a_rot = build(&rotate_pol(&e_in, beta), &rotate_pol(&e_out, beta));

            // D matrix for F=3 on the projection basis
            let ms: Vec<HalfInt> = f0.projections().collect();
            let d_big: Vec<Vec<f64>> = ms
                .iter()
                .map(|mp| {
                    ms.iter()
                        .map(|mm| small_d(f0.twice(), mp.twice(), mm.twice(), beta))
                        .collect()
                })
                .collect();

            // check A_rot = D A D†  ⇔  D† A_rot D = A
            let mut max_err: f64 = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let mut acc = Complex64::ZERO;
                    for k in 0..dim {
                        for l in 0..dim {
                            acc += d_big[i][k] * a[k][l] * d_big[j][l];
                        }
                    }
                    max_err = max_err.max((acc - a_rot[i][j]).norm());
                }
            }
            assert!(max_err < 1e-10, "covariance error {max_err} at β = {beta}");
        }
    }
}
