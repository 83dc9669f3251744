//! Monte-Carlo accumulation of single-scattering, ladder, and interference
//! cross sections at exact backscattering, and the enhancement-factor
//! spectra built from them.
//!
//! Geometry: the probe propagates along +z with helicity `pol_in`; the
//! detector sits at z = −∞ and selects helicity `pol_out` (helicity
//! preserving means the lab circular polarization is reversed). Atoms are
//! prepared in the stretched sublevel m = −F0 of the populated ground
//! level; every scatterer in a chain is a fresh atom.
//!
//! A chain amplitude is the contraction
//!   row(q_e = −pol_out) · T⁽ⁿ⁾ · G(n̂) … G(n̂) · col(q_a = pol_in)
//! of per-atom Kramers–Heisenberg tensors T(q_emit, q_absorb) with the
//! far-field transverse propagator in the spherical basis,
//!   G_{q'p}(n̂) = δ_{q'p} − n_{q'} n_p*,
//! times e^{ikr}/(kr) and attenuation per hop, external attenuations in
//! the σ± eigenmodes, and one amplitude-normalization factor per scatter.
//! The interference term pairs each sampled ordering with its reversal.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angmom::HalfInt;
use crate::atom::{zeeman_energy, LevelScheme};
use crate::medium::{self, CloudConfig, PropagationMode, Vec3};
use crate::scatter;

/// Minimum interatomic distance, units 1/k. Below this the far-field
/// propagator is invalid (dependent-scattering regime); chain sampling
/// resamples and reports the violation count.
pub const R_MIN: f64 = 0.5;

/// Frequency-channel matching tolerance for the Zeeman filter, units γ.
const CHANNEL_TOL: f64 = 1e-9;

const MC_BATCH: u32 = 2048;
const MAX_RESAMPLE_TRIES: u32 = 10_000;

#[derive(Debug, Error)]
pub enum CbsError {
    #[error("degenerate path: atoms closer than r_min = {R_MIN}")]
    DegeneratePath,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Medium(#[from] medium::MediumError),
}

/// Which interference diagram families enter the channel sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagramSet {
    /// σ-mode vertices only: the destructively interfering
    /// Rayleigh/Raman combinations.
    SigmaOnly,
    /// All transverse vertices, adding the π-mediated successive-Raman
    /// combinations.
    Full,
}

/// Detection channel: probe/detector helicities, the Raman frequency
/// channel selected by the heterodyne beat, and the diagram family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Probe helicity along +z (σ₊ drive for +1).
    pub pol_in: i32,
    /// Detected helicity along −z (+1 is the helicity-preserving channel).
    pub pol_out: i32,
    /// Final Zeeman sublevel whose beat frequency defines the detected
    /// channel.
    pub final_m: HalfInt,
    pub diagram_set: DiagramSet,
}

impl ChannelSpec {
    /// Helicity-preserving Raman channel ending in m = −F0 + 2.
    pub fn helicity_preserving(scheme: &LevelScheme, diagram_set: DiagramSet) -> Self {
        ChannelSpec {
            pol_in: 1,
            pol_out: 1,
            final_m: scheme.stretched_m() + HalfInt::new(2),
            diagram_set,
        }
    }

    /// Helicity-preserving elastic channel (final state unchanged); the
    /// classical-dipole reference configuration.
    pub fn helicity_preserving_elastic(scheme: &LevelScheme) -> Self {
        ChannelSpec {
            pol_in: 1,
            pol_out: 1,
            final_m: scheme.stretched_m(),
            diagram_set: DiagramSet::Full,
        }
    }

    pub fn validate(&self, scheme: &LevelScheme) -> Result<(), CbsError> {
        if self.pol_in.abs() != 1 || self.pol_out.abs() != 1 {
            return Err(CbsError::Config(
                "pol_in and pol_out must be ±1 helicities".into(),
            ));
        }
        if !scheme.populated_f0.admits_projection(self.final_m) {
            return Err(CbsError::Config(format!(
                "final_m = {} is not a sublevel of F0 = {}",
                self.final_m, scheme.populated_f0
            )));
        }
        Ok(())
    }

    /// Lab spherical component of the detected polarization vector.
    fn detected_lab_q(&self) -> i32 {
        -self.pol_out
    }
}

/// Ordered scattering path: atom positions plus per-atom (m_in, m_out).
#[derive(Debug, Clone)]
pub struct ScatteringPath {
    pub atoms: Vec<Vec3>,
    pub assignments: Vec<(HalfInt, HalfInt)>,
}

impl ScatteringPath {
    pub fn order(&self) -> usize {
        self.atoms.len()
    }
}

/// Accumulated cross sections and enhancement factors at one detuning.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRecord {
    pub delta: f64,
    pub sigma_single: f64,
    /// Ladder sum over orders 2..n_max.
    pub sigma_ladder: f64,
    /// Signed interference sum over the same orders.
    pub sigma_interf: f64,
    pub x_ef: f64,
    /// Pure double-scattering interference ratio σ_I⁽²⁾/σ_L⁽²⁾.
    pub r2: f64,
    pub stderr_single: f64,
    pub stderr_ladder: f64,
    pub stderr_interf: f64,
    pub stderr_x_ef: f64,
    pub stderr_r2: f64,
    /// Ladder/interference split per order (index 0 ↔ order 2).
    pub per_order_ladder: Vec<f64>,
    pub per_order_interf: Vec<f64>,
    pub resampled_paths: u64,
}

/// Probability factor for a σ-emitted photon to drive a σ transition on
/// the next atom at polar angle θ: ¼(cos²θ + 1)².
pub fn angular_factor_sigma(theta: f64) -> f64 {
    let c = theta.cos();
    0.25 * (c * c + 1.0).powi(2)
}

/// Probability factor for a π-emitted photon to drive a π transition at
/// polar angle θ: sin⁴θ.
pub fn angular_factor_pi(theta: f64) -> f64 {
    theta.sin().powi(4)
}

type Cvec = [Complex64; 3];
type Cmat = [[Complex64; 3]; 3];

const ZERO_VEC: Cvec = [Complex64::ZERO; 3];

fn q_index(q: i32) -> usize {
    (q + 1) as usize
}

/// Spherical-basis transverse projector G_{q'p}(n̂) = δ_{q'p} − n_{q'} n_p*
/// for the unit direction n̂ (rows: absorption index of the next atom,
/// columns: emission index of the previous one). The corrupted variant
/// flips the sign of the imaginary part of the n̂n̂ correction (drops the
/// conjugation), which destroys the transpose symmetry that reciprocity
/// rests on — the mutation fixture for the oracle suite.
fn transverse_projector(n: Vec3, corrupted: bool) -> Cmat {
    let sqrt2 = std::f64::consts::SQRT_2;
    let nq: Cvec = [
        Complex64::new(n.x / sqrt2, n.y / sqrt2),  // q = −1: (x + iy)/√2
        Complex64::new(n.z, 0.0),                  // q = 0
        Complex64::new(-n.x / sqrt2, n.y / sqrt2), // q = +1: −(x − iy)/√2
    ];
    let mut g = [[Complex64::ZERO; 3]; 3];
    for (r, row) in g.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let delta = if r == c { Complex64::ONE } else { Complex64::ZERO };
            let correction = if corrupted {
                nq[r] * nq[c]
            } else {
                nq[r] * nq[c].conj()
            };
            *entry = delta - correction;
        }
    }
    g
}

/// Everything fixed at one detuning, shared read-only across workers.
pub(crate) struct DeltaContext<'a> {
    cloud: &'a CloudConfig,
    channel: ChannelSpec,
    pub(crate) n0: f64,
    atom_number: f64,
    kappa: f64,
    xsec_norm: f64,
    /// Per-atom KH tensors indexed by Δm ∈ {0, 1, 2}: [q_emit][q_absorb].
    tensors: [Cmat; 3],
    ext_in_amp: Complex64,
    ext_out_amp: Complex64,
    int_amp: Complex64,
    /// Allowed Δm-vector configurations per order (index 0 ↔ order 1).
    configs: Vec<Vec<Vec<u8>>>,
    /// Spherical indices participating in vertex sums.
    q_indices: Vec<usize>,
    /// Mutation fixture: true breaks the projector's transpose symmetry.
    projector_corrupted: bool,
}

impl<'a> DeltaContext<'a> {
    pub(crate) fn new(
        channel: &ChannelSpec,
        scheme: &'a LevelScheme,
        cloud: &'a CloudConfig,
        delta: f64,
        max_order: usize,
    ) -> Result<Self, CbsError> {
        Self::with_fixture(channel, scheme, cloud, delta, max_order, false)
    }

    pub(crate) fn with_fixture(
        channel: &ChannelSpec,
        scheme: &'a LevelScheme,
        cloud: &'a CloudConfig,
        delta: f64,
        max_order: usize,
        projector_corrupted: bool,
    ) -> Result<Self, CbsError> {
        channel.validate(scheme)?;
        let probe_mode = if channel.pol_in == 1 {
            PropagationMode::SigmaPlus
        } else {
            PropagationMode::SigmaMinus
        };
        let detect_mode = if channel.detected_lab_q() == -1 {
            PropagationMode::SigmaMinus
        } else {
            PropagationMode::SigmaPlus
        };
        let n0 = medium::calibrate_density(cloud, scheme, delta, channel.pol_in)?;

        let m_in = scheme.stretched_m();
        let mut tensors = [[[Complex64::ZERO; 3]; 3]; 3];
        for (dm, tensor) in tensors.iter_mut().enumerate() {
            let m_out = m_in + HalfInt::new(dm as i32);
            if !scheme.populated_f0.admits_projection(m_out) {
                continue;
            }
            for qe in -1..=1 {
                for qa in -1..=1 {
                    tensor[q_index(qe)][q_index(qa)] =
                        scatter::kh_amplitude(scheme, m_in, m_out, qa, qe, delta);
                }
            }
        }

        let q_indices = match channel.diagram_set {
            DiagramSet::SigmaOnly => vec![0usize, 2],
            DiagramSet::Full => vec![0usize, 1, 2],
        };

        Ok(DeltaContext {
            cloud,
            channel: *channel,
            n0,
            atom_number: cloud.atom_number(n0),
            kappa: scatter::amplitude_norm(scheme),
            xsec_norm: scatter::cross_section_norm(scheme),
            tensors,
            ext_in_amp: medium::mode_amplitude(scheme, probe_mode, delta),
            ext_out_amp: medium::mode_amplitude(scheme, detect_mode, delta),
            int_amp: medium::mode_amplitude(scheme, PropagationMode::ScalarAverage, delta),
            configs: enumerate_configs(scheme, channel, max_order)?,
            q_indices,
            projector_corrupted,
        })
    }

    fn attenuation(&self, column: f64, amp: Complex64) -> Complex64 {
        (Complex64::new(0.0, -0.5 * self.xsec_norm) * amp * (self.n0 * column)).exp()
    }

    /// External attenuations (probe in, detected out) for an atom at `p`;
    /// both rays run from the atom toward z = −∞.
    fn external_attenuations(&self, p: Vec3) -> (Complex64, Complex64) {
        if !self.cloud.attenuation.external {
            return (Complex64::ONE, Complex64::ONE);
        }
        let column =
            medium::gaussian_column(self.cloud, p, Vec3::new(0.0, 0.0, -1.0), f64::INFINITY);
        (
            self.attenuation(column, self.ext_in_amp),
            self.attenuation(column, self.ext_out_amp),
        )
    }

    /// Propagation factor for the hop a → b: transverse projector,
    /// spherical wave e^{ikr}/(kr), and scalar interatomic attenuation.
    fn hop(&self, a: Vec3, b: Vec3) -> (Cmat, Complex64) {
        let d = b - (a);
        let r = d.norm();
        let g = transverse_projector(d.scale(1.0 / r), self.projector_corrupted);
        let mut factor = Complex64::new(0.0, r).exp() / r;
        if self.cloud.attenuation.interatomic {
            let column = medium::gaussian_column(self.cloud, a, d.scale(1.0 / r), r);
            factor *= self.attenuation(column, self.int_amp);
        }
        (g, factor)
    }
}

/// Geometry-dependent factors of one sampled chain, computed once and
/// reused for every configuration and both orderings.
struct ChainGeometry {
    positions: Vec<Vec3>,
    att_in: Vec<Complex64>,
    att_out: Vec<Complex64>,
    /// hops[j] connects positions j and j+1 (direction-independent).
    hops: Vec<(Cmat, Complex64)>,
    /// Common external plane-wave phase e^{ik(z_first + z_last)} — equal
    /// for both orderings at exact backscattering.
    external_phase: Complex64,
}

impl ChainGeometry {
    fn build(ctx: &DeltaContext, positions: &[Vec3]) -> Self {
        let (att_in, att_out): (Vec<_>, Vec<_>) = positions
            .iter()
            .map(|&p| ctx.external_attenuations(p))
            .unzip();
        let hops = positions
            .windows(2)
            .map(|w| ctx.hop(w[0], w[1]))
            .collect();
        let z_sum = positions.first().map_or(0.0, |p| p.z)
            + if positions.len() > 1 {
                positions.last().unwrap().z
            } else {
                0.0
            };
        ChainGeometry {
            positions: positions.to_vec(),
            att_in,
            att_out,
            hops,
            external_phase: Complex64::new(0.0, z_sum).exp(),
        }
    }

    fn order(&self) -> usize {
        self.positions.len()
    }
}

/// Amplitude of one ordering of the chain for the Δm assignment `dms`
/// (attached to atom indices in sampled order). `reversed` walks the
/// chain last-to-first.
fn chain_amplitude(
    ctx: &DeltaContext,
    geo: &ChainGeometry,
    dms: &[u8],
    reversed: bool,
) -> Complex64 {
    let n = geo.order();
    debug_assert_eq!(dms.len(), n);
    let atom = |step: usize| if reversed { n - 1 - step } else { step };

    let col = q_index(ctx.channel.pol_in);
    let row = q_index(ctx.channel.detected_lab_q());

    // first atom: absorb the probe
    let mut v: Cvec = ZERO_VEC;
    let t0 = &ctx.tensors[dms[atom(0)] as usize];
    for &qe in &ctx.q_indices {
        v[qe] = t0[qe][col];
    }
    let mut scalar = geo.att_in[atom(0)] * geo.external_phase;

    for step in 1..n {
        let hop_idx = if reversed { n - 1 - step } else { step - 1 };
        let (g, factor) = &geo.hops[hop_idx];
        scalar *= *factor;
        // propagate: absorption components at the next atom
        let mut w: Cvec = ZERO_VEC;
        for &qa in &ctx.q_indices {
            let mut acc = Complex64::ZERO;
            for &qe in &ctx.q_indices {
                acc += g[qa][qe] * v[qe];
            }
            w[qa] = acc;
        }
        // scatter on the next atom
        let t = &ctx.tensors[dms[atom(step)] as usize];
        let mut v_next: Cvec = ZERO_VEC;
        for &qe in &ctx.q_indices {
            let mut acc = Complex64::ZERO;
            for &qa in &ctx.q_indices {
                acc += t[qe][qa] * w[qa];
            }
            v_next[qe] = acc;
        }
        v = v_next;
    }

    let kappa_total = ctx.kappa.powi(n as i32);
    scalar * geo.att_out[atom(n - 1)] * v[row] * kappa_total
}

/// Enumerates the per-atom Δm assignments compatible with the detected
/// frequency channel for each order 1..max_order. The detected channel
/// fixes the total Zeeman energy release; assignments are filtered
/// against it exactly, which is what removes the π-mediated diagrams
/// when the ladder is non-equidistant.
fn enumerate_configs(
    scheme: &LevelScheme,
    channel: &ChannelSpec,
    max_order: usize,
) -> Result<Vec<Vec<Vec<u8>>>, CbsError> {
    let f0 = scheme.populated_f0;
    let m_in = scheme.stretched_m();
    let e_target = zeeman_energy(scheme, f0, channel.final_m)
        .map_err(|e| CbsError::Config(e.to_string()))?;

    let mut allowed: Vec<(u8, f64)> = Vec::new();
    for dm in 0..=2u8 {
        if channel.diagram_set == DiagramSet::SigmaOnly && dm == 1 {
            continue;
        }
        let m_out = m_in + HalfInt::new(i32::from(dm));
        if !f0.admits_projection(m_out) {
            continue;
        }
        let e = zeeman_energy(scheme, f0, m_out).map_err(|e| CbsError::Config(e.to_string()))?;
        allowed.push((dm, e));
    }

    let mut per_order = Vec::with_capacity(max_order);
    let mut partial: Vec<(Vec<u8>, f64)> = vec![(Vec::new(), 0.0)];
    for _order in 1..=max_order {
        let mut extended = Vec::with_capacity(partial.len() * allowed.len());
        for (dms, e_sum) in &partial {
            for &(dm, e) in &allowed {
                let mut next = dms.clone();
                next.push(dm);
                extended.push((next, e_sum + e));
            }
        }
        partial = extended;
        per_order.push(
            partial
                .iter()
                .filter(|(_, e)| (e - e_target).abs() < CHANNEL_TOL)
                .map(|(dms, _)| dms.clone())
                .collect(),
        );
    }
    Ok(per_order)
}

/// Amplitude of one ordered path with explicit per-atom assignments.
pub fn path_amplitude(
    path: &ScatteringPath,
    channel: &ChannelSpec,
    scheme: &LevelScheme,
    cloud: &CloudConfig,
    n0: f64,
    delta: f64,
) -> Result<Complex64, CbsError> {
    if path.order() == 0 {
        return Err(CbsError::Config("empty path".into()));
    }
    for pair in path.atoms.windows(2) {
        if (pair[0] - pair[1]).norm() < R_MIN {
            return Err(CbsError::DegeneratePath);
        }
    }
    let mut ctx = DeltaContext::new(channel, scheme, cloud, delta, path.order())?;
    ctx.n0 = n0;
    ctx.atom_number = cloud.atom_number(n0);
    let m_in = scheme.stretched_m();
    let dms: Vec<u8> = path
        .assignments
        .iter()
        .map(|&(mi, mo)| {
            debug_assert_eq!(mi, m_in, "atoms start in the stretched state");
            (mo - mi).twice() as u8 / 2
        })
        .collect();
    let geo = ChainGeometry::build(&ctx, &path.atoms);
    Ok(chain_amplitude(&ctx, &geo, &dms, false))
}

/// Ladder and interference contributions of one ordered pair, summed over
/// all channel-compatible configurations:
/// ladder = Σ (|A_d|² + |A_r|²), interf = Σ 2 Re(A_d A_r*).
pub fn pair_contribution(
    r1: Vec3,
    r2: Vec3,
    channel: &ChannelSpec,
    scheme: &LevelScheme,
    cloud: &CloudConfig,
    n0: f64,
    delta: f64,
) -> Result<(f64, f64), CbsError> {
    if (r1 - r2).norm() < R_MIN {
        return Err(CbsError::DegeneratePath);
    }
    let mut ctx = DeltaContext::new(channel, scheme, cloud, delta, 2)?;
    ctx.n0 = n0;
    ctx.atom_number = cloud.atom_number(n0);
    let geo = ChainGeometry::build(&ctx, &[r1, r2]);
    let (ladder, interf) = pair_terms(&ctx, &geo);
    Ok((2.0 * ladder, 2.0 * interf))
}

/// (Σ (|A_d|²+|A_r|²)/2, Σ Re(A_d A_r*)) over order-2 configurations.
fn pair_terms(ctx: &DeltaContext, geo: &ChainGeometry) -> (f64, f64) {
    let mut ladder = 0.0;
    let mut interf = 0.0;
    for dms in &ctx.configs[1] {
        let a_d = chain_amplitude(ctx, geo, dms, false);
        let a_r = chain_amplitude(ctx, geo, dms, true);
        ladder += 0.5 * (a_d.norm_sqr() + a_r.norm_sqr());
        interf += (a_d * a_r.conj()).re;
    }
    (ladder, interf)
}

/// Per-batch accumulator; merged in deterministic batch order.
#[derive(Clone)]
struct Accum {
    n: u64,
    s: f64,
    l2: f64,
    i2: f64,
    lt: f64,
    it: f64,
    s_sq: f64,
    l2_sq: f64,
    i2_sq: f64,
    lt_sq: f64,
    it_sq: f64,
    s_lt: f64,
    s_it: f64,
    lt_it: f64,
    l2_i2: f64,
    per_order_l: Vec<f64>,
    per_order_i: Vec<f64>,
    resampled: u64,
}

impl Accum {
    fn new(max_order: usize) -> Self {
        let orders = max_order.saturating_sub(1);
        Accum {
            n: 0,
            s: 0.0,
            l2: 0.0,
            i2: 0.0,
            lt: 0.0,
            it: 0.0,
            s_sq: 0.0,
            l2_sq: 0.0,
            i2_sq: 0.0,
            lt_sq: 0.0,
            it_sq: 0.0,
            s_lt: 0.0,
            s_it: 0.0,
            lt_it: 0.0,
            l2_i2: 0.0,
            per_order_l: vec![0.0; orders],
            per_order_i: vec![0.0; orders],
            resampled: 0,
        }
    }

    fn push(&mut self, s: f64, l2: f64, i2: f64, lt: f64, it: f64) {
        self.n += 1;
        self.s += s;
        self.l2 += l2;
        self.i2 += i2;
        self.lt += lt;
        self.it += it;
        self.s_sq += s * s;
        self.l2_sq += l2 * l2;
        self.i2_sq += i2 * i2;
        self.lt_sq += lt * lt;
        self.it_sq += it * it;
        self.s_lt += s * lt;
        self.s_it += s * it;
        self.lt_it += lt * it;
        self.l2_i2 += l2 * i2;
    }

    fn merge(&mut self, o: &Accum) {
        self.n += o.n;
        self.s += o.s;
        self.l2 += o.l2;
        self.i2 += o.i2;
        self.lt += o.lt;
        self.it += o.it;
        self.s_sq += o.s_sq;
        self.l2_sq += o.l2_sq;
        self.i2_sq += o.i2_sq;
        self.lt_sq += o.lt_sq;
        self.it_sq += o.it_sq;
        self.s_lt += o.s_lt;
        self.s_it += o.s_it;
        self.lt_it += o.lt_it;
        self.l2_i2 += o.l2_i2;
        for (a, b) in self.per_order_l.iter_mut().zip(&o.per_order_l) {
            *a += b;
        }
        for (a, b) in self.per_order_i.iter_mut().zip(&o.per_order_i) {
            *a += b;
        }
        self.resampled += o.resampled;
    }
}

fn sample_chain<R: Rng + ?Sized>(
    cloud: &CloudConfig,
    rng: &mut R,
    order: usize,
    resampled: &mut u64,
) -> Result<Vec<Vec3>, CbsError> {
    let mut positions: Vec<Vec3> = Vec::with_capacity(order);
    for _ in 0..order {
        let mut tries = 0;
        loop {
            let p = medium::sample_position(cloud, rng);
            if positions.iter().all(|q| (*q - p).norm() >= R_MIN) {
                positions.push(p);
                break;
            }
            *resampled += 1;
            tries += 1;
            if tries > MAX_RESAMPLE_TRIES {
                return Err(CbsError::DegeneratePath);
            }
        }
    }
    Ok(positions)
}

fn run_batch(
    ctx: &DeltaContext,
    seed: u64,
    stream: u64,
    n_samples: u32,
    max_order: usize,
) -> Result<Accum, CbsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut acc = Accum::new(max_order);
    let n_big = ctx.atom_number;

    for _ in 0..n_samples {
        let positions = sample_chain(ctx.cloud, &mut rng, max_order, &mut acc.resampled)?;
        let geo = ChainGeometry::build(ctx, &positions);

        // order 1
        let mut s = 0.0;
        for dms in &ctx.configs[0] {
            let sub_geo = ChainGeometry {
                positions: vec![positions[0]],
                att_in: vec![geo.att_in[0]],
                att_out: vec![geo.att_out[0]],
                hops: Vec::new(),
                external_phase: Complex64::new(0.0, 2.0 * positions[0].z).exp(),
            };
            let a = chain_amplitude(ctx, &sub_geo, dms, false);
            s += n_big * a.norm_sqr();
        }

        let mut l2 = 0.0;
        let mut i2 = 0.0;
        let mut lt = 0.0;
        let mut it = 0.0;
        for order in 2..=max_order {
            let prefix = ChainGeometry {
                positions: positions[..order].to_vec(),
                att_in: geo.att_in[..order].to_vec(),
                att_out: geo.att_out[..order].to_vec(),
                hops: geo.hops[..order - 1].to_vec(),
                external_phase: Complex64::new(
                    0.0,
                    positions[0].z + positions[order - 1].z,
                )
                .exp(),
            };
            let scale = n_big.powi(order as i32);
            let mut l_ord = 0.0;
            let mut i_ord = 0.0;
            for dms in &ctx.configs[order - 1] {
                let a_d = chain_amplitude(ctx, &prefix, dms, false);
                let a_r = chain_amplitude(ctx, &prefix, dms, true);
                l_ord += 0.5 * (a_d.norm_sqr() + a_r.norm_sqr()) * scale;
                i_ord += (a_d * a_r.conj()).re * scale;
            }
            if order == 2 {
                l2 = l_ord;
                i2 = i_ord;
            }
            lt += l_ord;
            it += i_ord;
            acc.per_order_l[order - 2] += l_ord;
            acc.per_order_i[order - 2] += i_ord;
        }
        acc.push(s, l2, i2, lt, it);
    }
    Ok(acc)
}

fn finalize(delta: f64, acc: &Accum) -> SpectrumRecord {
    let n = acc.n as f64;
    let mean = |sum: f64| sum / n;
    let var = |sum: f64, sq: f64| ((sq - sum * sum / n) / (n - 1.0)).max(0.0);
    let cov = |sum_a: f64, sum_b: f64, sum_ab: f64| (sum_ab - sum_a * sum_b / n) / (n - 1.0);

    let (s, l2, i2, lt, it) = (
        mean(acc.s),
        mean(acc.l2),
        mean(acc.i2),
        mean(acc.lt),
        mean(acc.it),
    );
    let var_s = var(acc.s, acc.s_sq);
    let var_l2 = var(acc.l2, acc.l2_sq);
    let var_i2 = var(acc.i2, acc.i2_sq);
    let var_lt = var(acc.lt, acc.lt_sq);
    let var_it = var(acc.it, acc.it_sq);
    let cov_s_lt = cov(acc.s, acc.lt, acc.s_lt);
    let cov_s_it = cov(acc.s, acc.it, acc.s_it);
    let cov_lt_it = cov(acc.lt, acc.it, acc.lt_it);
    let cov_l2_i2 = cov(acc.l2, acc.i2, acc.l2_i2);

    let denom = s + lt;
    let x_ef = if denom > 0.0 {
        (s + lt + it) / denom
    } else {
        1.0
    };
    // delta method for X_EF = 1 + it/(s + lt)
    let stderr_x_ef = if denom > 0.0 {
        let gd = -it / (denom * denom); // ∂/∂s = ∂/∂lt
        let gi = 1.0 / denom;
        let v = gd * gd * (var_s + var_lt + 2.0 * cov_s_lt)
            + gi * gi * var_it
            + 2.0 * gd * gi * (cov_s_it + cov_lt_it);
        (v / n).max(0.0).sqrt()
    } else {
        0.0
    };
    let r2 = if l2 > 0.0 { i2 / l2 } else { 0.0 };
    let stderr_r2 = if l2 > 0.0 {
        let gl = -i2 / (l2 * l2);
        let gi = 1.0 / l2;
        let v = gl * gl * var_l2 + gi * gi * var_i2 + 2.0 * gl * gi * cov_l2_i2;
        (v / n).max(0.0).sqrt()
    } else {
        0.0
    };

    SpectrumRecord {
        delta,
        sigma_single: s,
        sigma_ladder: lt,
        sigma_interf: it,
        x_ef,
        r2,
        stderr_single: (var_s / n).sqrt(),
        stderr_ladder: (var_lt / n).sqrt(),
        stderr_interf: (var_it / n).sqrt(),
        stderr_x_ef,
        stderr_r2,
        per_order_ladder: acc.per_order_l.iter().map(|v| v / n).collect(),
        per_order_interf: acc.per_order_i.iter().map(|v| v / n).collect(),
        resampled_paths: acc.resampled,
    }
}

/// Monte-Carlo spectrum scan. Per detuning the density is recalibrated to
/// the configured optical depth, positions are sampled sequentially from
/// the cloud density, and the ladder/interference terms accumulate over
/// orders 2..n_max_order (order 1 fills sigma_single). Reproducible for a
/// fixed seed regardless of worker count: samples are partitioned into
/// fixed batches, each with its own counter-derived random stream, and
/// merged in batch order.
pub fn mc_spectrum(
    channel: &ChannelSpec,
    scheme: &LevelScheme,
    cloud: &CloudConfig,
    deltas: &[f64],
    n_samples: u64,
    n_max_order: usize,
    seed: u64,
) -> Result<Vec<SpectrumRecord>, CbsError> {
    mc_spectrum_with_fixture(
        channel, scheme, cloud, deltas, n_samples, n_max_order, seed, false,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mc_spectrum_with_fixture(
    channel: &ChannelSpec,
    scheme: &LevelScheme,
    cloud: &CloudConfig,
    deltas: &[f64],
    n_samples: u64,
    n_max_order: usize,
    seed: u64,
    projector_corrupted: bool,
) -> Result<Vec<SpectrumRecord>, CbsError> {
    if deltas.is_empty() {
        return Err(CbsError::Config("empty detuning list".into()));
    }
    if n_samples == 0 || n_max_order == 0 {
        return Err(CbsError::Config(
            "n_samples and n_max_order must be at least 1".into(),
        ));
    }

    deltas
        .iter()
        .enumerate()
        .map(|(delta_idx, &delta)| {
            let ctx = DeltaContext::with_fixture(
                channel,
                scheme,
                cloud,
                delta,
                n_max_order,
                projector_corrupted,
            )?;
            let n_batches = n_samples.div_ceil(u64::from(MC_BATCH));
            let batches: Result<Vec<Accum>, CbsError> = (0..n_batches)
                .into_par_iter()
                .map(|b| {
                    let in_batch = (n_samples - b * u64::from(MC_BATCH)).min(u64::from(MC_BATCH));
                    let stream = ((delta_idx as u64) << 32) | b;
                    run_batch(&ctx, seed, stream, in_batch as u32, n_max_order)
                })
                .collect();
            let mut total = Accum::new(n_max_order);
            for b in &batches? {
                total.merge(b);
            }
            let record = finalize(delta, &total);
            // per-order Cauchy–Schwarz is structural; violation is a bug
            for (l, i) in record
                .per_order_ladder
                .iter()
                .zip(&record.per_order_interf)
            {
                if i.abs() > l * (1.0 + 1e-9) + 1e-300 {
                    return Err(CbsError::Config(format!(
                        "interference exceeds ladder at delta {delta}: {i} vs {l}"
                    )));
                }
            }
            Ok(record)
        })
        .collect()
}

/// Grid point minimizing X_EF and its value.
pub fn xef_minimum(records: &[SpectrumRecord]) -> Option<(f64, f64)> {
    records
        .iter()
        .min_by(|a, b| a.x_ef.partial_cmp(&b.x_ef).unwrap())
        .map(|r| (r.delta, r.x_ef))
}

/// Deterministic quadrature of the order-2 pair integral: the independent
/// check of the MC estimator's sampling weights. Returns (σ_L⁽²⁾, σ_I⁽²⁾)
/// in the same normalization as `mc_spectrum`.
///
/// Variables: V = midpoint of the pair (three-axis Gauss–Hermite against
/// the combined Gaussian weight), u = separation vector in spherical
/// coordinates (the u² Jacobian cancels the |propagator|² singularity).
/// Axially symmetric clouds reduce the azimuth to a single node.
pub fn pair_quadrature(
    channel: &ChannelSpec,
    scheme: &LevelScheme,
    cloud: &CloudConfig,
    delta: f64,
    n_hermite: usize,
    n_radial: usize,
    n_polar: usize,
) -> Result<(f64, f64), CbsError> {
    let ctx = DeltaContext::new(channel, scheme, cloud, delta, 2)?;
    let n0 = ctx.n0;

    let (gh_nodes, gh_weights) = crate::quadrule::gauss_hermite(n_hermite);
    let (gl_nodes, gl_weights) = crate::quadrule::gauss_legendre(n_radial);
    let (th_nodes, th_weights) = crate::quadrule::gauss_legendre(n_polar);

    let sig = [cloud.sigma_x, cloud.sigma_y, cloud.sigma_z];
    let axially_symmetric = (cloud.sigma_x - cloud.sigma_y).abs() < 1e-12;
    let n_phi = if axially_symmetric { 1 } else { 24 };

    let u_max = 8.0 * sig.iter().cloned().fold(f64::MIN, f64::max);
    let u_scale = 0.5 * (u_max - R_MIN);
    let u_mid = 0.5 * (u_max + R_MIN);

    let mut ladder = 0.0;
    let mut interf = 0.0;

    for (iu, &xu) in gl_nodes.iter().enumerate() {
        let u = u_mid + u_scale * xu;
        let wu = gl_weights[iu] * u_scale;
        for (it_, &xt) in th_nodes.iter().enumerate() {
            let cos_t = xt;
            let sin_t = (1.0 - cos_t * cos_t).sqrt();
            let wt = th_weights[it_];
            for ip in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * (ip as f64) / (n_phi as f64);
                let w_phi = 2.0 * std::f64::consts::PI / (n_phi as f64);
                let u_vec = Vec3::new(u * sin_t * phi.cos(), u * sin_t * phi.sin(), u * cos_t);
                // Gaussian factor of the separation
                let sep_gauss = (-(u_vec.x * u_vec.x) / (4.0 * sig[0] * sig[0])
                    - (u_vec.y * u_vec.y) / (4.0 * sig[1] * sig[1])
                    - (u_vec.z * u_vec.z) / (4.0 * sig[2] * sig[2]))
                    .exp();
                if sep_gauss < 1e-300 {
                    continue;
                }

                for (ix, &tx) in gh_nodes.iter().enumerate() {
                    for (iy, &ty) in gh_nodes.iter().enumerate() {
                        for (iz, &tz) in gh_nodes.iter().enumerate() {
                            let v = Vec3::new(tx * sig[0], ty * sig[1], tz * sig[2]);
                            let w_v = gh_weights[ix]
                                * gh_weights[iy]
                                * gh_weights[iz]
                                * sig[0]
                                * sig[1]
                                * sig[2];
                            let r1 = v - u_vec.scale(0.5);
                            let r2 = v + u_vec.scale(0.5);
                            let geo = ChainGeometry::build(&ctx, &[r1, r2]);
                            let (l, i) = pair_terms(&ctx, &geo);
                            let w = wu * wt * w_phi * w_v * u * u * sep_gauss * n0 * n0;
                            ladder += w * l;
                            interf += w * i;
                        }
                    }
                }
            }
        }
    }
    Ok((ladder, interf))
}
