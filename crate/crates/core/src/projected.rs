//! Leading-order generator on the doubled η-pseudospin space and the
//! single-qubit toy model.
//!
//! Each site carries a ket pseudospin and a bra pseudospin, both resolved in
//! the η^y eigenbasis. Per site the local label is `(m, m̃)` with `m` the ket
//! eigenvalue and `m̃` the bra eigenvalue; labels are ordered `+½` before
//! `−½`, ket before bra, sites lexicographic with site 1 most significant.
//!
//! Row-major vectorization stores the bra factor complex-conjugated, so the
//! slot vector of a bra `⟨+y|` is `|+y⟩* = |−y⟩`. [`BraLabel`] selects whether
//! `m̃` names the physical bra eigenvalue or the eigenvalue of the conjugated
//! slot vector; the generator is triangular only for the former.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sparse::{SparseOp, C64, ONE, ZERO};
use crate::superop::{self, DensityState, SteadyStateOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BraLabel {
    /// `m̃` is the η^y eigenvalue of the bra `⟨m̃|`.
    Physical,
    /// `m̃` is the η^y eigenvalue of the conjugated slot vector `|m̃⟩*`.
    Vectorized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PseudospinSpace {
    pub n_sites: usize,
    pub dim: usize,
    pub bra_label: BraLabel,
}

impl PseudospinSpace {
    pub fn new(n_sites: usize, bra_label: BraLabel) -> Result<Self> {
        if n_sites == 0 || n_sites > 10 {
            return Err(Error::InvalidParameter(format!("pseudospin chain of {n_sites} sites")));
        }
        Ok(PseudospinSpace { n_sites, dim: 1 << (2 * n_sites), bra_label })
    }

    /// Index of the product label `[(m_1, m̃_1), …]`, `true` meaning `+½`.
    pub fn index(&self, labels: &[(bool, bool)]) -> usize {
        labels.iter().fold(0, |acc, &(m, mt)| acc << 2 | (!m as usize) << 1 | !mt as usize)
    }

    /// Per-site `(m, m̃)` eigenvalues of basis vector `k`.
    pub fn labels(&self, k: usize) -> Vec<(f64, f64)> {
        let half = |bit: usize| if bit == 0 { 0.5 } else { -0.5 };
        (0..self.n_sites)
            .map(|s| {
                let local = k >> (2 * (self.n_sites - 1 - s)) & 3;
                (half(local >> 1), half(local & 1))
            })
            .collect()
    }
}

// Local 2×2 matrices in the doublet basis (|⇑⟩, |⇓⟩), row-major.
type M2 = [C64; 4];

fn m2(a: f64, b: f64, c: f64, d: f64) -> M2 {
    [C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)]
}

fn m2_mul(x: &M2, y: &M2) -> M2 {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn m2_adjoint(x: &M2) -> M2 {
    [x[0].conj(), x[2].conj(), x[1].conj(), x[3].conj()]
}

fn m2_conj(x: &M2) -> M2 {
    x.map(|v| v.conj())
}

fn eta_minus() -> M2 {
    m2(0.0, 0.0, 1.0, 0.0)
}

fn eta_x() -> M2 {
    m2(0.0, 0.5, 0.5, 0.0)
}

fn eta_y() -> M2 {
    [ZERO, C64::new(0.0, -0.5), C64::new(0.0, 0.5), ZERO]
}

fn eta_z() -> M2 {
    m2(0.5, 0.0, 0.0, -0.5)
}

/// `exp(iθ η^x) = cos(θ/2) + 2i sin(θ/2) η^x`.
fn rotation(theta: f64) -> M2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [C64::new(c, 0.0), C64::new(0.0, s), C64::new(0.0, s), C64::new(c, 0.0)]
}

/// `K = η^− exp(iπ/2 η^x)`.
fn k_local() -> M2 {
    m2_mul(&eta_minus(), &rotation(FRAC_PI_2))
}

/// Columns `|+y⟩, |−y⟩`.
fn y_basis() -> M2 {
    let s = FRAC_1_SQRT_2;
    [C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, s), C64::new(0.0, -s)]
}

/// `U†·X·U` for a change of basis with columns `u`.
fn m2_in_basis(x: &M2, u: &M2) -> M2 {
    m2_mul(&m2_adjoint(u), &m2_mul(x, u))
}

/// `K` in the ordered basis `{|+y⟩, |−y⟩}`.
pub fn local_k_in_y_basis() -> [C64; 4] {
    m2_in_basis(&k_local(), &y_basis())
}

/// Change of basis of the bra slot: column `k` is the slot vector labelled by
/// the `k`-th label (`+` then `−`).
fn bra_slot_basis(label: BraLabel) -> M2 {
    let u = y_basis();
    match label {
        BraLabel::Vectorized => u,
        // ⟨+y| occupies the slot as |+y⟩* = |−y⟩ and vice versa.
        BraLabel::Physical => m2_conj(&u),
    }
}

fn kron2(a: &M2, b: &M2) -> [C64; 16] {
    let mut out = [ZERO; 16];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k) * 4 + 2 * j + l] = a[2 * i + j] * b[2 * k + l];
                }
            }
        }
    }
    out
}

fn m4_mul(x: &[C64; 16], y: &[C64; 16]) -> [C64; 16] {
    let mut out = [ZERO; 16];
    for i in 0..4 {
        for k in 0..4 {
            let v = x[i * 4 + k];
            if v != ZERO {
                for j in 0..4 {
                    out[i * 4 + j] += v * y[k * 4 + j];
                }
            }
        }
    }
    out
}

fn m4_adjoint(x: &[C64; 16]) -> [C64; 16] {
    let mut out = [ZERO; 16];
    for i in 0..4 {
        for j in 0..4 {
            out[j * 4 + i] = x[i * 4 + j].conj();
        }
    }
    out
}

/// Per-driven-site generator `−γ/2 + γ[½(η^y − η̃^y) + K K̃]` on
/// `ket ⊗ bra-slot`, in the labelled y-basis (row-major 4×4).
///
/// Written with exact entries: `√2·K = [[0, −i], [0, i]]` on the ket, and on
/// the slot `K̃ = K*`, whose matrix in a conjugated basis is the conjugate of
/// `K`'s. With physical labels the slot basis is `(|+y⟩*, |−y⟩*)`, where
/// `η^y = −(η^y)*` has eigenvalues `(−½, +½)`.
pub fn local_generator(gamma: f64, bra_label: BraLabel) -> [C64; 16] {
    let i = C64::new(0.0, 1.0);
    let ket_k = [ZERO, -i, ZERO, i];
    let (slot_k, slot_y) = match bra_label {
        BraLabel::Physical => ([ZERO, i, ZERO, -i], [-0.5, 0.5]),
        BraLabel::Vectorized => ([-i, ZERO, i, ZERO], [0.5, -0.5]),
    };
    let ket_y = [0.5, -0.5];
    let jump = kron2(&ket_k, &slot_k);
    let mut gen = [ZERO; 16];
    for (t, g) in gen.iter_mut().enumerate() {
        *g = jump[t] * (0.5 * gamma);
    }
    for a in 0..2 {
        for b in 0..2 {
            let k = 2 * a + b;
            gen[k * 4 + k] += C64::new(-gamma / 2.0 + gamma / 2.0 * (ket_y[a] - slot_y[b]), 0.0);
        }
    }
    gen
}

/// The same generator obtained by rotating the doublet-basis matrices; an
/// independent construction used to cross-check [`local_generator`].
pub fn local_generator_by_rotation(gamma: f64, bra_label: BraLabel) -> [C64; 16] {
    let id = m2(1.0, 0.0, 0.0, 1.0);
    let g = C64::new(gamma, 0.0);
    let eye4 = kron2(&id, &id);
    let ket_y = kron2(&eta_y(), &id);
    let slot_y = kron2(&id, &eta_y());
    let k = k_local();
    let jump = kron2(&k, &m2_conj(&k));
    let mut gen = [ZERO; 16];
    for t in 0..16 {
        gen[t] = -g * 0.5 * eye4[t] + g * (0.5 * (ket_y[t] - slot_y[t]) + jump[t]);
    }
    let u = kron2(&y_basis(), &bra_slot_basis(bra_label));
    m4_mul(&m4_adjoint(&u), &m4_mul(&gen, &u))
}

fn check_driven(n_sites: usize, driven: &[usize]) -> Result<()> {
    if driven.is_empty() {
        return Err(Error::InvalidParameter("driven set J must be nonempty".into()));
    }
    for (k, &j) in driven.iter().enumerate() {
        if j == 0 || j > n_sites {
            return Err(Error::SiteOutOfRange { site: j, n_sites });
        }
        if driven[..k].contains(&j) {
            return Err(Error::InvalidParameter(format!("site {j} listed twice in J")));
        }
    }
    Ok(())
}

/// Sum over driven sites of the local generator embedded at its site.
pub fn build_effective_generator_in(space: &PseudospinSpace, driven: &[usize], gamma: f64) -> Result<SparseOp> {
    check_driven(space.n_sites, driven)?;
    let local = SparseOp::from_dense(4, 4, &local_generator(gamma, space.bra_label));
    let mut total = SparseOp::zeros(space.dim, space.dim);
    for &j in driven {
        let left = SparseOp::identity(1 << (2 * (j - 1)));
        let right = SparseOp::identity(1 << (2 * (space.n_sites - j)));
        total = &total + &left.kron(&local).kron(&right);
    }
    Ok(total)
}

/// Generator in the triangular ordering (physical bra labels).
pub fn build_effective_generator(n_sites: usize, driven: &[usize], gamma: f64) -> Result<SparseOp> {
    build_effective_generator_in(&PseudospinSpace::new(n_sites, BraLabel::Physical)?, driven, gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangularReport {
    pub is_strictly_triangular_below_diagonal: bool,
    pub max_violation: f64,
}

pub const TRIANGULAR_TOL: f64 = 1e-14;

/// Largest entry strictly below the diagonal.
pub fn verify_triangular(op: &SparseOp) -> TriangularReport {
    let max_violation = op.triplets().filter(|(i, j, _)| i > j).map(|(_, _, v)| v.norm()).fold(0.0, f64::max);
    TriangularReport { is_strictly_triangular_below_diagonal: max_violation <= TRIANGULAR_TOL, max_violation }
}

fn sort_spectrum(vals: &mut [C64]) {
    vals.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
}

/// Eigenvalues from the diagonal of the triangular representation: a driven
/// site contributes 0 when ket and bra are both `+y`, and `−γ/2` otherwise;
/// undriven sites contribute 0. Sorted by descending real part.
pub fn effective_spectrum(n_sites: usize, driven: &[usize], gamma: f64) -> Result<Vec<C64>> {
    check_driven(n_sites, driven)?;
    let space = PseudospinSpace::new(n_sites, BraLabel::Physical)?;
    let mut vals: Vec<C64> = (0..space.dim)
        .map(|k| {
            let labels = space.labels(k);
            let re: f64 = driven
                .iter()
                .map(|&j| {
                    let (m, mt) = labels[j - 1];
                    if m > 0.0 && mt > 0.0 {
                        0.0
                    } else {
                        -gamma / 2.0
                    }
                })
                .sum();
            C64::new(re, 0.0)
        })
        .collect();
    sort_spectrum(&mut vals);
    Ok(vals)
}

/// Diagonal of `−γ|J|/2 + γ Σ_j ½(η_j^y − η̃_j^y)` alone, i.e. without the
/// recycling term, in the labels of `space`.
pub fn anticommutator_diagonal(space: &PseudospinSpace, driven: &[usize], gamma: f64) -> Result<Vec<f64>> {
    check_driven(space.n_sites, driven)?;
    let sign = match space.bra_label {
        BraLabel::Vectorized => 1.0,
        BraLabel::Physical => -1.0,
    };
    Ok((0..space.dim)
        .map(|k| {
            let labels = space.labels(k);
            driven
                .iter()
                .map(|&j| {
                    let (m, mt) = labels[j - 1];
                    -gamma / 2.0 + gamma / 2.0 * (m - sign * mt)
                })
                .sum()
        })
        .collect())
}

/// Dense eigenvalues of a generator, sorted by descending real part.
pub fn numeric_spectrum(op: &SparseOp) -> Result<Vec<C64>> {
    let mut vals = linalg::sparse_eigenvalues_dense(op)?;
    sort_spectrum(&mut vals);
    Ok(vals)
}

/// Largest distance between two spectra after matching in sorted order.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let key = |v: &C64| ((v.re * 1e8).round() as i64, (v.im * 1e8).round() as i64);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by_key(key);
    b.sort_by_key(key);
    a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `vec(⊗_j |+y⟩⟨+y|)` in `space`.
pub fn dark_state_vector(space: &PseudospinSpace) -> Vec<C64> {
    let mut v = vec![ZERO; space.dim];
    let plus = match space.bra_label {
        BraLabel::Physical => true,
        BraLabel::Vectorized => false,
    };
    v[space.index(&vec![(true, plus); space.n_sites])] = ONE;
    v
}

/// Single qubit in the basis `(|↑⟩, |↓⟩)` with jump `√γ s⁻ exp(iθ s^x)`.
#[derive(Clone, Debug)]
pub struct ToyQubit {
    pub theta: f64,
    pub gamma: f64,
    pub hamiltonian: SparseOp,
    pub jump: SparseOp,
    pub s_minus: SparseOp,
    pub sx: SparseOp,
    pub sy: SparseOp,
    pub sz: SparseOp,
}

/// The qubit with `|↑⟩ ↔ |⇑⟩`, `|↓⟩ ↔ |⇓⟩` shares the doublet matrices.
pub fn toy_qubit(theta: f64, gamma: f64) -> Result<ToyQubit> {
    if !theta.is_finite() || !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!("toy qubit θ = {theta}, γ = {gamma}")));
    }
    let op = |m: M2| SparseOp::from_dense(2, 2, &m);
    let jump = m2_mul(&eta_minus(), &rotation(theta)).map(|v| v * gamma.sqrt());
    Ok(ToyQubit {
        theta,
        gamma,
        hamiltonian: SparseOp::zeros(2, 2),
        jump: op(jump),
        s_minus: op(eta_minus()),
        sx: op(eta_x()),
        sy: op(eta_y()),
        sz: op(eta_z()),
    })
}

/// `exp(−iθ s^x)|↓⟩`.
pub fn toy_dark_state(theta: f64) -> Vec<C64> {
    let r = rotation(-theta);
    vec![r[1], r[3]]
}

#[derive(Clone, Debug)]
pub struct ToyQubitSuite {
    /// Row-major 4×4 generator on `(ρ↑↑, ρ↑↓, ρ↓↑, ρ↓↓)`.
    pub liouvillian: Vec<C64>,
    /// Stationary state reached from `|↓⟩⟨↓|`.
    pub steady_state: DensityState,
    pub spectrum: Vec<C64>,
    /// Number of eigenvalues with |λ| < 1e-10.
    pub kernel_dim: usize,
    pub dark_state: Vec<C64>,
    /// `‖L vec(|dark⟩⟨dark|)‖₂`.
    pub dark_residual: f64,
    /// Entrywise distance between the steady state and `|dark⟩⟨dark|`.
    pub dark_deviation: f64,
    pub dark_fidelity: f64,
}

pub fn toy_qubit_suite(theta: f64, gamma: f64) -> Result<ToyQubitSuite> {
    let q = toy_qubit(theta, gamma)?;
    let l = superop::vectorize(&q.hamiltonian, &[q.jump.clone()])?;
    let mut spectrum = linalg::sparse_eigenvalues_dense(&l.matrix)?;
    sort_spectrum(&mut spectrum);
    let kernel_dim = spectrum.iter().filter(|v| v.norm() < 1e-10).count();
    let ss = superop::steady_state_of(&l, &DensityState::basis_projector(2, 1), &SteadyStateOptions::default())?;
    let dark_state = toy_dark_state(theta);
    let dark = DensityState::pure(&dark_state);
    let dark_residual = crate::sparse::vecops::norm(&l.matrix.apply(&dark.vec));
    Ok(ToyQubitSuite {
        liouvillian: l.matrix.to_dense(),
        dark_deviation: ss.rho.max_abs_diff(&dark),
        dark_fidelity: ss.rho.fidelity_pure(&dark_state),
        steady_state: ss.rho,
        spectrum,
        kernel_dim,
        dark_state,
        dark_residual,
    })
}

/// Rotation identity residual `‖e^{−iπ/2 η^x} η^z e^{iπ/2 η^x} + η^y‖_max`.
pub fn rotation_identity_residual() -> f64 {
    let lhs = m2_mul(&rotation(-FRAC_PI_2), &m2_mul(&eta_z(), &rotation(FRAC_PI_2)));
    lhs.iter().zip(eta_y()).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max)
}

/// `‖L†L − (γ/2 − γη^y)‖_max` for the rotated jump on one doublet.
pub fn compact_dissipator_residual(gamma: f64) -> f64 {
    let l = k_local().map(|v| v * gamma.sqrt());
    let ldl = m2_mul(&m2_adjoint(&l), &l);
    let y = eta_y();
    let expected = [
        C64::new(gamma / 2.0, 0.0) - y[0] * gamma,
        -y[1] * gamma,
        -y[2] * gamma,
        C64::new(gamma / 2.0, 0.0) - y[3] * gamma,
    ];
    ldl.iter().zip(expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::vecops;

    const G: f64 = 1.0;

    fn all_subsets(n: usize) -> Vec<Vec<usize>> {
        (1..1usize << n).map(|mask| (1..=n).filter(|j| mask >> (j - 1) & 1 == 1).collect()).collect()
    }

    #[test]
    fn k_is_upper_triangular_in_the_y_basis() {
        let k = local_k_in_y_basis();
        let s = FRAC_1_SQRT_2;
        let expected = [ZERO, C64::new(0.0, -s), ZERO, C64::new(0.0, s)];
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).norm() < 1e-15, "{k:?}");
        }
    }

    #[test]
    fn exact_and_rotated_generators_agree() {
        for label in [BraLabel::Physical, BraLabel::Vectorized] {
            for g in [1.0, 0.4] {
                let a = local_generator(g, label);
                let b = local_generator_by_rotation(g, label);
                assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-15), "{label:?}");
            }
        }
    }

    #[test]
    fn single_site_generator_in_physical_labels() {
        let g = local_generator(G, BraLabel::Physical);
        let diag: Vec<f64> = (0..4).map(|i| g[i * 4 + i].re).collect();
        assert_eq!(diag, vec![0.0, -0.5, -0.5, -0.5]);
        assert!((0..4).all(|i| g[i * 4 + i].im.abs() < 1e-15));
        for i in 0..4 {
            for j in 0..i {
                assert!(g[i * 4 + j].norm() < 1e-15, "({i},{j}) = {}", g[i * 4 + j]);
            }
        }
    }

    #[test]
    fn vectorized_labels_break_triangularity() {
        for n in 1..=3 {
            let space = PseudospinSpace::new(n, BraLabel::Vectorized).unwrap();
            let l = build_effective_generator_in(&space, &[1], G).unwrap();
            let report = verify_triangular(&l);
            assert!(!report.is_strictly_triangular_below_diagonal);
            assert!(report.max_violation > 0.1);
        }
    }

    #[test]
    fn triangular_for_every_driven_set() {
        for n in 1..=4 {
            for j in all_subsets(n) {
                let l = build_effective_generator(n, &j, G).unwrap();
                let report = verify_triangular(&l);
                assert_eq!(report.max_violation, 0.0, "N={n} J={j:?}");
            }
        }
    }

    #[test]
    fn spectrum_is_the_diagonal() {
        for n in 1..=4 {
            for j in all_subsets(n) {
                let l = build_effective_generator(n, &j, G).unwrap();
                let closed = effective_spectrum(n, &j, G).unwrap();
                let mut diag: Vec<C64> = (0..l.nrows()).map(|i| l.get(i, i)).collect();
                sort_spectrum(&mut diag);
                assert!(spectrum_distance(&closed, &diag) < 1e-15, "N={n} J={j:?}");
                let numeric = numeric_spectrum(&l).unwrap();
                assert!(spectrum_distance(&closed, &numeric) < 1e-10, "N={n} J={j:?}");
                let gap = superop::spectral_gap(&closed, 1e-12).unwrap();
                assert_eq!(gap, 0.5 * G);
            }
        }
    }

    #[test]
    fn single_driven_site_multiset() {
        for n in 1..=3 {
            let vals = effective_spectrum(n, &[1], G).unwrap();
            let m = 1 << (2 * (n - 1));
            assert_eq!(vals.iter().filter(|v| v.re == 0.0).count(), m);
            assert_eq!(vals.iter().filter(|v| v.re == -0.5).count(), 3 * m);
        }
        // Trace oracle: Tr L_eff per driven site = −2γ + γ |Tr K|².
        let k = local_k_in_y_basis();
        let tr_k = k[0] + k[3];
        let l = build_effective_generator(1, &[1], G).unwrap();
        assert!((l.trace().re - (-2.0 * G + G * tr_k.norm_sqr())).abs() < 1e-15);
        assert!((l.trace().re + 1.5).abs() < 1e-15);
    }

    #[test]
    fn two_driven_sites_keep_the_gap() {
        let vals = effective_spectrum(3, &[1, 3], G).unwrap();
        assert_eq!(superop::spectral_gap(&vals, 1e-12), Some(0.5));
        assert_eq!(vals.last().unwrap().re, -1.0);
    }

    #[test]
    fn recycling_shifts_only_one_diagonal_entry() {
        // Without K K̃ the diagonal is −γ/2 + γ/2 (m − m̃) in slot labels.
        let space = PseudospinSpace::new(1, BraLabel::Vectorized).unwrap();
        let anti = anticommutator_diagonal(&space, &[1], G).unwrap();
        assert_eq!(anti, vec![-0.5, 0.0, -1.0, -0.5]);
        let full = local_generator(G, BraLabel::Vectorized);
        let shift: Vec<f64> = (0..4).map(|i| full[i * 4 + i].re - anti[i]).collect();
        assert_eq!(shift, vec![0.0, 0.0, 0.5, 0.0]);
        // The same statement in physical labels.
        let phys = PseudospinSpace::new(1, BraLabel::Physical).unwrap();
        assert_eq!(anticommutator_diagonal(&phys, &[1], G).unwrap(), vec![0.0, -0.5, -0.5, -1.0]);
    }

    #[test]
    fn dark_state_is_annihilated() {
        for n in 1..=4 {
            for label in [BraLabel::Physical, BraLabel::Vectorized] {
                let space = PseudospinSpace::new(n, label).unwrap();
                for j in all_subsets(n) {
                    let l = build_effective_generator_in(&space, &j, G).unwrap();
                    let out = l.apply(&dark_state_vector(&space));
                    assert!(vecops::norm(&out) < 1e-15, "N={n} J={j:?} {label:?}");
                }
            }
        }
    }

    #[test]
    fn labels_round_trip() {
        let space = PseudospinSpace::new(3, BraLabel::Physical).unwrap();
        for k in 0..space.dim {
            let l: Vec<(bool, bool)> = space.labels(k).iter().map(|&(a, b)| (a > 0.0, b > 0.0)).collect();
            assert_eq!(space.index(&l), k);
        }
        assert_eq!(space.labels(0), vec![(0.5, 0.5); 3]);
    }

    #[test]
    fn rejects_bad_driven_sets() {
        assert!(build_effective_generator(3, &[], G).is_err());
        assert!(build_effective_generator(3, &[4], G).is_err());
        assert!(build_effective_generator(3, &[2, 2], G).is_err());
    }

    #[test]
    fn doublet_identities() {
        assert!(rotation_identity_residual() < 1e-15);
        for g in [0.3, 1.0, 2.5] {
            assert!(compact_dissipator_residual(g) < 1e-15);
        }
    }

    #[test]
    fn toy_liouvillian_matches_reference() {
        let q = C64::new(0.0, 0.25);
        let h = C64::new(0.5, 0.0);
        #[rustfmt::skip]
        let reference = [
            -h,  q,  -q,  ZERO,
            -q, -h,  ZERO, -q,
             q, ZERO, -h,  q,
             h, -q,   q,  ZERO,
        ];
        for g in [1.0, 0.7] {
            let s = toy_qubit_suite(FRAC_PI_2, g).unwrap();
            for (a, b) in s.liouvillian.iter().zip(reference.iter()) {
                assert!((a - b * g).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn toy_steady_states() {
        let s = toy_qubit_suite(FRAC_PI_2, G).unwrap();
        assert_eq!(s.kernel_dim, 1);
        let rho = &s.steady_state;
        let want = [C64::new(0.5, 0.0), C64::new(0.0, -0.5), C64::new(0.0, 0.5), C64::new(0.5, 0.0)];
        assert!(vecops::max_abs_diff(&rho.vec, &want) < 1e-12);
        // ⟨s^+⟩ = ρ↓↑
        assert!((rho.element(1, 0) - C64::new(0.0, 0.5)).norm() < 1e-12);
        for theta in [0.0, std::f64::consts::FRAC_PI_4, FRAC_PI_2, 1.0] {
            let s = toy_qubit_suite(theta, G).unwrap();
            assert!(s.dark_deviation < 1e-10, "θ={theta}: {}", s.dark_deviation);
            assert!(s.dark_residual < 1e-14);
        }
        let down = toy_qubit_suite(0.0, G).unwrap();
        assert!((down.steady_state.element(1, 1).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toy_at_theta_pi_is_pure_dephasing() {
        // s⁻ e^{iπ s^x} = i|↓⟩⟨↓|: populations are conserved and the
        // kernel is two-dimensional.
        let s = toy_qubit_suite(std::f64::consts::PI, G).unwrap();
        assert_eq!(s.kernel_dim, 2);
        assert!(s.dark_residual < 1e-14);
        assert!((s.steady_state.element(1, 1).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toy_spectrum() {
        let s = toy_qubit_suite(FRAC_PI_2, G).unwrap();
        assert!(s.spectrum[0].norm() < 1e-12);
        assert!(s.spectrum[1..].iter().all(|v| v.re < -1e-3));
    }
}
