//! Hubbard Hamiltonian, η-pseudospin and spin operators, and jump channels.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, LatticeSpec, Spin};
use crate::sparse::{SparseOp, C64, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaComponent {
    Plus,
    Minus,
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinComponent {
    X,
    Y,
    Z,
}

/// Hamiltonian parameters in units of γ. Empty per-site/per-bond arrays
/// mean "uniform": hoppings default to `t`, interactions to `u`, and the
/// remaining fields to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianParams {
    pub t: f64,
    pub u: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_bonds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_sites: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bx: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hx: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hy: Vec<f64>,
}

impl HamiltonianParams {
    pub fn clean(t: f64, u: f64) -> Self {
        HamiltonianParams {
            t,
            u,
            t_bonds: Vec::new(),
            u_sites: Vec::new(),
            mu: Vec::new(),
            bz: Vec::new(),
            bx: Vec::new(),
            hx: Vec::new(),
            hy: Vec::new(),
        }
    }

    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        let n = lattice.n_sites;
        let check = |name: &str, v: &[f64], expected: usize| -> Result<()> {
            if !v.is_empty() && v.len() != expected {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, lattice needs {expected}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        if !self.t.is_finite() || !self.u.is_finite() {
            return Err(Error::InvalidParameter("t and U must be finite".into()));
        }
        check("t_bonds", &self.t_bonds, lattice.n_bonds())?;
        check("u_sites", &self.u_sites, n)?;
        check("mu", &self.mu, n)?;
        check("bz", &self.bz, n)?;
        check("bx", &self.bx, n)?;
        check("hx", &self.hx, n)?;
        check("hy", &self.hy, n)?;
        Ok(())
    }

    pub fn hopping(&self, bond: usize) -> f64 {
        self.t_bonds.get(bond).copied().unwrap_or(self.t)
    }

    pub fn interaction(&self, site: usize) -> f64 {
        self.u_sites.get(site - 1).copied().unwrap_or(self.u)
    }

    fn site_value(v: &[f64], site: usize) -> f64 {
        v.get(site - 1).copied().unwrap_or(0.0)
    }

    /// Energy of the empty lattice, `Σ_i U_i / 4`: in the particle–hole
    /// symmetric form every holon/doublon site carries `U_i/4`.
    pub fn vacuum_energy(&self, lattice: &LatticeSpec) -> f64 {
        (1..=lattice.n_sites).map(|i| self.interaction(i) / 4.0).sum::<f64>()
            - (1..=lattice.n_sites).map(|i| Self::site_value(&self.mu, i)).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    RotatedEta,
    ParticleLoss,
    Dephasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpChannel {
    pub kind: JumpKind,
    pub site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<Spin>,
    pub rate: f64,
    #[serde(default)]
    pub angle: f64,
}

impl JumpChannel {
    pub fn rotated_eta(site: usize, gamma: f64, theta: f64) -> Self {
        JumpChannel { kind: JumpKind::RotatedEta, site, spin: None, rate: gamma, angle: theta }
    }

    pub fn loss(site: usize, spin: Spin, kappa: f64) -> Self {
        JumpChannel { kind: JumpKind::ParticleLoss, site, spin: Some(spin), rate: kappa, angle: 0.0 }
    }

    pub fn dephasing(site: usize, spin: Spin, kappa_phi: f64) -> Self {
        JumpChannel { kind: JumpKind::Dephasing, site, spin: Some(spin), rate: kappa_phi, angle: 0.0 }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(Error::InvalidParameter(format!("negative or non-finite rate {}", self.rate)));
        }
        if !self.angle.is_finite() {
            return Err(Error::InvalidParameter("non-finite jump angle".into()));
        }
        if self.site == 0 || self.site > n_sites {
            return Err(Error::SiteOutOfRange { site: self.site, n_sites });
        }
        if self.kind != JumpKind::RotatedEta && self.spin.is_none() {
            return Err(Error::InvalidParameter("loss/dephasing channels need a spin".into()));
        }
        Ok(())
    }
}

/// Everything needed to assemble one realization of the open system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub lattice: LatticeSpec,
    pub hamiltonian: HamiltonianParams,
    pub jumps: Vec<JumpChannel>,
}

impl ModelSpec {
    /// Clean chain with rotated η jumps of rate `gamma` and angle `theta`
    /// on the 1-based `driven` sites.
    pub fn clean(lattice: LatticeSpec, t: f64, u: f64, driven: &[usize], gamma: f64, theta: f64) -> Self {
        ModelSpec {
            lattice,
            hamiltonian: HamiltonianParams::clean(t, u),
            jumps: driven.iter().map(|&j| JumpChannel::rotated_eta(j, gamma, theta)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.hamiltonian.validate(&self.lattice)?;
        for ch in &self.jumps {
            ch.validate(self.lattice.n_sites)?;
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<FockBasis> {
        FockBasis::new(&self.lattice)
    }

    pub fn hamiltonian_op(&self, basis: &FockBasis) -> Result<SparseOp> {
        build_hubbard(basis, &self.hamiltonian)
    }

    pub fn jump_ops(&self, basis: &FockBasis) -> Result<Vec<SparseOp>> {
        self.jumps.iter().map(|ch| build_jump(basis, ch)).collect()
    }

    pub fn driven_sites(&self) -> Vec<usize> {
        self.jumps
            .iter()
            .filter(|ch| ch.kind == JumpKind::RotatedEta)
            .map(|ch| ch.site)
            .collect()
    }
}

fn check_basis(basis: &FockBasis, params: &HamiltonianParams) -> Result<()> {
    params.validate(&basis.lattice).map_err(|e| match e {
        Error::InvalidParameter(msg) => Error::InvalidParameter(msg),
        other => other,
    })
}

pub fn build_hubbard(basis: &FockBasis, params: &HamiltonianParams) -> Result<SparseOp> {
    check_basis(basis, params)?;
    let lattice = &basis.lattice;
    let n = lattice.n_sites;
    let mut h = SparseOp::zeros(basis.dim, basis.dim);

    for (b, &(i, j)) in lattice.bonds().iter().enumerate() {
        let t = params.hopping(b);
        if t == 0.0 {
            continue;
        }
        for s in Spin::BOTH {
            let hop = basis.creator(i, s)?.matmul(&basis.annihilator(j, s)?);
            let term = &hop + &hop.adjoint();
            h = h.lincomb(ONE, &term, C64::new(-t, 0.0));
        }
    }

    // Onsite terms are diagonal in the occupation basis.
    let onsite = basis.diagonal(|state| {
        (1..=n)
            .map(|i| {
                let (up, dn) = basis.site_occupation(state, i);
                let (nu, nd) = (up as u8 as f64, dn as u8 as f64);
                params.interaction(i) * (nu - 0.5) * (nd - 0.5)
                    + HamiltonianParams::site_value(&params.mu, i) * (nu + nd - 1.0)
                    + HamiltonianParams::site_value(&params.bz, i) * 0.5 * (nu - nd)
            })
            .sum()
    });
    h = &h + &onsite;

    for i in 1..=n {
        let bx = HamiltonianParams::site_value(&params.bx, i);
        if bx != 0.0 {
            h = h.lincomb(ONE, &build_spin(basis, i, SpinComponent::X)?, C64::new(bx, 0.0));
        }
        let hx = HamiltonianParams::site_value(&params.hx, i);
        if hx != 0.0 {
            h = h.lincomb(ONE, &build_eta(basis, i, EtaComponent::X)?, C64::new(hx, 0.0));
        }
        let hy = HamiltonianParams::site_value(&params.hy, i);
        if hy != 0.0 {
            h = h.lincomb(ONE, &build_eta(basis, i, EtaComponent::Y)?, C64::new(hy, 0.0));
        }
    }
    Ok(h)
}

/// Local pseudospin operator on one site. η_i^+ = (-1)^i c†_{i↑} c†_{i↓}.
pub fn build_eta(basis: &FockBasis, site: usize, component: EtaComponent) -> Result<SparseOp> {
    basis.check_site(site)?;
    let plus = || -> Result<SparseOp> {
        let pair = basis.creator(site, Spin::Up)?.matmul(&basis.creator(site, Spin::Down)?);
        Ok(pair.scale(C64::new(basis.lattice.parity(site), 0.0)))
    };
    Ok(match component {
        EtaComponent::Plus => plus()?,
        EtaComponent::Minus => plus()?.adjoint(),
        EtaComponent::X => {
            let p = plus()?;
            (&p + &p.adjoint()).scale(C64::new(0.5, 0.0))
        }
        EtaComponent::Y => {
            let p = plus()?;
            (&p - &p.adjoint()).scale(C64::new(0.0, -0.5))
        }
        EtaComponent::Z => basis.diagonal(|state| {
            let (up, dn) = basis.site_occupation(state, site);
            0.5 * (up as u8 as f64 + dn as u8 as f64 - 1.0)
        }),
    })
}

/// Global pseudospin component `Σ_i η_i^α`.
pub fn build_eta_total(basis: &FockBasis, component: EtaComponent) -> Result<SparseOp> {
    let mut total = SparseOp::zeros(basis.dim, basis.dim);
    for i in 1..=basis.n_sites() {
        total = &total + &build_eta(basis, i, component)?;
    }
    Ok(total)
}

/// Casimir `η² = (η^x)² + (η^y)² + (η^z)²` of the global pseudospin.
pub fn build_eta_squared(basis: &FockBasis) -> Result<SparseOp> {
    let mut sq = SparseOp::zeros(basis.dim, basis.dim);
    for c in [EtaComponent::X, EtaComponent::Y, EtaComponent::Z] {
        let e = build_eta_total(basis, c)?;
        sq = &sq + &e.matmul(&e);
    }
    Ok(sq)
}

pub fn build_spin(basis: &FockBasis, site: usize, component: SpinComponent) -> Result<SparseOp> {
    basis.check_site(site)?;
    let flip = || -> Result<SparseOp> {
        Ok(basis.creator(site, Spin::Up)?.matmul(&basis.annihilator(site, Spin::Down)?))
    };
    Ok(match component {
        SpinComponent::Z => basis.diagonal(|state| {
            let (up, dn) = basis.site_occupation(state, site);
            0.5 * (up as u8 as f64 - dn as u8 as f64)
        }),
        SpinComponent::X => {
            let f = flip()?;
            (&f + &f.adjoint()).scale(C64::new(0.5, 0.0))
        }
        SpinComponent::Y => {
            let f = flip()?;
            (&f - &f.adjoint()).scale(C64::new(0.0, -0.5))
        }
    })
}

/// Projector onto the local holon–doublon doublet of `site`.
pub fn local_hd_projector(basis: &FockBasis, site: usize) -> Result<SparseOp> {
    basis.check_site(site)?;
    Ok(basis.diagonal(|state| {
        let (up, dn) = basis.site_occupation(state, site);
        if up == dn {
            1.0
        } else {
            0.0
        }
    }))
}

/// Projector onto the tensor-product holon–doublon space (no singlons).
pub fn hd_projector(basis: &FockBasis) -> SparseOp {
    let n = basis.n_sites();
    basis.diagonal(|state| {
        let hd = (1..=n).all(|i| {
            let (up, dn) = basis.site_occupation(state, i);
            up == dn
        });
        if hd {
            1.0
        } else {
            0.0
        }
    })
}

/// Exact `exp(iθ η^x)` on one site: the doublet rotates as a spin-½ while
/// singlons, which η^x annihilates, pass through unchanged.
pub fn local_rotation(basis: &FockBasis, site: usize, theta: f64) -> Result<SparseOp> {
    let p_hd = local_hd_projector(basis, site)?;
    let p_singlon = &basis.identity() - &p_hd;
    let ex = build_eta(basis, site, EtaComponent::X)?;
    let half = theta / 2.0;
    let rot = p_hd
        .scale(C64::new(half.cos(), 0.0))
        .lincomb(ONE, &ex, C64::new(0.0, 2.0 * half.sin()));
    Ok(&rot + &p_singlon)
}

pub fn build_jump(basis: &FockBasis, channel: &JumpChannel) -> Result<SparseOp> {
    channel.validate(basis.n_sites())?;
    let amp = C64::new(channel.rate.sqrt(), 0.0);
    let op = match channel.kind {
        JumpKind::RotatedEta => build_eta(basis, channel.site, EtaComponent::Minus)?
            .matmul(&local_rotation(basis, channel.site, channel.angle)?),
        JumpKind::ParticleLoss => basis.annihilator(channel.site, channel.spin.unwrap())?,
        JumpKind::Dephasing => basis.number(channel.site, channel.spin.unwrap())?,
    };
    Ok(op.scale(amp))
}

/// Normalized `(η^+)^M |vac⟩`.
pub fn build_multiplet_state(basis: &FockBasis, m: usize) -> Result<Vec<C64>> {
    let n = basis.n_sites();
    if m > n {
        return Err(Error::InvalidParameter(format!("multiplet index {m} exceeds N = {n}")));
    }
    let mut psi = unnormalized_multiplet(basis, m)?;
    let norm = crate::sparse::vecops::norm(&psi);
    psi.iter_mut().for_each(|v| *v /= norm);
    Ok(psi)
}

pub fn unnormalized_multiplet(basis: &FockBasis, m: usize) -> Result<Vec<C64>> {
    let eta_plus = build_eta_total(basis, EtaComponent::Plus)?;
    let mut psi = basis.basis_state(0);
    for _ in 0..m {
        psi = eta_plus.apply(&psi);
    }
    Ok(psi)
}

/// Local pseudospin doublet vector of site `site` inside a product state:
/// amplitudes `(a, b)` on `(η_i^+|0⟩, |0⟩)`.
type Doublet = (C64, C64);

/// Product state `⊗_i (a_i |⇑⟩_i + b_i |⇓⟩_i)` with `|⇑⟩_i = η_i^+|0⟩_i`.
pub fn doublet_product_state(basis: &FockBasis, local: &[Doublet]) -> Result<Vec<C64>> {
    let n = basis.n_sites();
    if local.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: local.len() });
    }
    let mut psi = vec![ZERO; basis.dim];
    for pattern in 0..(1usize << n) {
        let mut state = 0usize;
        let mut amp = ONE;
        for i in 1..=n {
            if pattern >> (i - 1) & 1 == 1 {
                state |= 1 << basis.mode(i, Spin::Up) | 1 << basis.mode(i, Spin::Down);
                // η_i^+ carries the staggering sign and no net string.
                amp *= local[i - 1].0 * basis.lattice.parity(i);
            } else {
                amp *= local[i - 1].1;
            }
        }
        psi[state] = amp;
    }
    Ok(psi)
}

/// `⊗_j |η_j^y = +½⟩` with `|+y⟩ = (|⇑⟩ + i|⇓⟩)/√2`.
pub fn plus_y_product_state(basis: &FockBasis) -> Result<Vec<C64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    doublet_product_state(basis, &vec![(C64::new(s, 0.0), I * s); basis.n_sites()])
}

/// Default jump angle of the protocol.
pub const THETA_DEFAULT: f64 = FRAC_PI_2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::vecops;
    use approx::assert_abs_diff_eq;

    fn chain(n: usize) -> FockBasis {
        FockBasis::new(&LatticeSpec::chain(n).unwrap()).unwrap()
    }

    #[test]
    fn hamiltonian_is_hermitian_with_every_term() {
        let b = chain(3);
        let mut p = HamiltonianParams::clean(1.0, 4.0);
        p.t_bonds = vec![0.7, 1.3];
        p.u_sites = vec![3.0, 5.0, 4.5];
        p.mu = vec![0.2, -0.4, 0.1];
        p.bz = vec![0.3, 0.0, -0.5];
        p.bx = vec![0.1, 0.2, 0.3];
        p.hx = vec![0.05, -0.1, 0.2];
        p.hy = vec![-0.3, 0.1, 0.0];
        let h = build_hubbard(&b, &p).unwrap();
        assert!(h.is_hermitian(1e-15));
    }

    #[test]
    fn vacuum_energy_is_the_constant_quarter_u() {
        for n in 1..=4 {
            let b = chain(n);
            let p = HamiltonianParams::clean(1.0, 8.0);
            let h = build_hubbard(&b, &p).unwrap();
            let vac = b.basis_state(0);
            let hv = h.apply(&vac);
            let e = p.vacuum_energy(&b.lattice);
            assert_abs_diff_eq!(e, 2.0 * n as f64, epsilon = 1e-15);
            let resid: Vec<C64> = hv.iter().zip(&vac).map(|(a, v)| a - v * e).collect();
            assert!(vecops::norm(&resid) < 1e-14);
        }
    }

    #[test]
    fn hd_states_carry_quarter_u_per_site_without_hopping() {
        let b = chain(2);
        let h = build_hubbard(&b, &HamiltonianParams::clean(0.0, 8.0)).unwrap();
        let p_hd = hd_projector(&b);
        for s in 0..b.dim {
            if p_hd.get(s, s) == ONE {
                assert_eq!(h.get(s, s), C64::new(4.0, 0.0));
            }
        }
    }

    #[test]
    fn strong_eta_symmetry_on_bipartite_chains() {
        for (n, pbc) in [(2, false), (3, false), (4, false), (4, true)] {
            let lattice = if pbc { LatticeSpec::ring(n) } else { LatticeSpec::chain(n) }.unwrap();
            let b = FockBasis::new(&lattice).unwrap();
            let h = build_hubbard(&b, &HamiltonianParams::clean(1.0, 4.0)).unwrap();
            for c in [EtaComponent::Plus, EtaComponent::Minus, EtaComponent::Z] {
                assert!(h.commutator(&build_eta_total(&b, c).unwrap()).max_abs() < 1e-12);
            }
            assert!(h.commutator(&build_eta_squared(&b).unwrap()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn odd_ring_breaks_eta_symmetry_at_the_wrap_bond() {
        let b = FockBasis::new(&LatticeSpec::ring(3).unwrap()).unwrap();
        let h = build_hubbard(&b, &HamiltonianParams::clean(1.0, 4.0)).unwrap();
        let comm = h.commutator(&build_eta_total(&b, EtaComponent::Plus).unwrap());
        assert!(comm.max_abs() > 0.1);
    }

    #[test]
    fn pseudospin_algebra() {
        let b = chain(2);
        for i in 1..=2 {
            for j in 1..=2 {
                let x = build_eta(&b, i, EtaComponent::X).unwrap();
                let y = build_eta(&b, j, EtaComponent::Y).unwrap();
                let comm = x.commutator(&y);
                let expected = if i == j {
                    build_eta(&b, i, EtaComponent::Z).unwrap().scale(I)
                } else {
                    SparseOp::zeros(b.dim, b.dim)
                };
                assert!(comm.max_abs_diff(&expected) < 1e-15);
            }
        }
    }

    #[test]
    fn singlons_are_eta_inert_and_spin_singlets_are_spin_inert() {
        let b = chain(1);
        let singlons = [0b01, 0b10];
        let hd = [0b00, 0b11];
        for c in [EtaComponent::Plus, EtaComponent::Minus, EtaComponent::X, EtaComponent::Y, EtaComponent::Z] {
            let e = build_eta(&b, 1, c).unwrap();
            for s in singlons {
                assert!(vecops::norm(&e.apply(&b.basis_state(s))) == 0.0);
            }
        }
        for c in [SpinComponent::X, SpinComponent::Y, SpinComponent::Z] {
            let s_op = build_spin(&b, 1, c).unwrap();
            for s in hd {
                assert!(vecops::norm(&s_op.apply(&b.basis_state(s))) == 0.0);
            }
        }
        let sz = build_spin(&b, 1, SpinComponent::Z).unwrap();
        assert_eq!(sz.get(0b01, 0b01), C64::new(0.5, 0.0));
        let jump = build_jump(&b, &JumpChannel::rotated_eta(1, 1.0, 0.7)).unwrap();
        for s in singlons {
            assert!(vecops::norm(&jump.apply(&b.basis_state(s))) == 0.0);
        }
    }

    #[test]
    fn spin_and_eta_commute() {
        let b = chain(2);
        for i in 1..=2 {
            for j in 1..=2 {
                for sa in [SpinComponent::X, SpinComponent::Y, SpinComponent::Z] {
                    for eb in [EtaComponent::Plus, EtaComponent::Minus, EtaComponent::X, EtaComponent::Y, EtaComponent::Z] {
                        let s = build_spin(&b, i, sa).unwrap();
                        let e = build_eta(&b, j, eb).unwrap();
                        assert_eq!(s.commutator(&e).nnz(), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn raising_lowering_identity_on_the_doublet() {
        let b = chain(2);
        for i in 1..=2 {
            let p = build_eta(&b, i, EtaComponent::Plus).unwrap();
            let m = build_eta(&b, i, EtaComponent::Minus).unwrap();
            let z = build_eta(&b, i, EtaComponent::Z).unwrap();
            let phd = local_hd_projector(&b, i).unwrap();
            let half = phd.scale(C64::new(0.5, 0.0));
            let z_hd = phd.matmul(&z).matmul(&phd);
            // Raising after lowering measures the doublon weight ½ + η^z;
            // the reverse order gives ½ − η^z.
            let pm = phd.matmul(&p.matmul(&m)).matmul(&phd);
            assert!(pm.max_abs_diff(&half.lincomb(ONE, &z_hd, ONE)) < 1e-15);
            let mp = phd.matmul(&m.matmul(&p)).matmul(&phd);
            assert!(mp.max_abs_diff(&half.lincomb(ONE, &z_hd, -ONE)) < 1e-15);
        }
    }

    #[test]
    fn rotated_jump_on_the_doublet() {
        let b = chain(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for site in 1..=2 {
            let l = build_jump(&b, &JumpChannel::rotated_eta(site, 1.0, FRAC_PI_2)).unwrap();
            let vac = b.basis_state(0);
            let up = build_eta(&b, site, EtaComponent::Plus).unwrap().apply(&vac);
            // Columns of the 2×2 doublet block in the (|⇑⟩, |⇓⟩) basis.
            let l_up = l.apply(&up);
            let l_dn = l.apply(&vac);
            assert_abs_diff_eq!(vecops::dot(&up, &l_up).re, 0.0, epsilon = 1e-15);
            assert!((vecops::dot(&vac, &l_up) - C64::new(s, 0.0)).norm() < 1e-15);
            assert!(vecops::dot(&up, &l_dn).norm() < 1e-15);
            assert!((vecops::dot(&vac, &l_dn) - C64::new(0.0, s)).norm() < 1e-15);
        }
        // On an even site |⇑⟩ is literally |↑↓⟩.
        let up_even = build_eta(&b, 2, EtaComponent::Plus).unwrap().apply(&b.basis_state(0));
        assert_eq!(up_even[0b1100], ONE);
    }

    #[test]
    fn unrotated_jump_is_amplitude_damping() {
        let b = chain(2);
        let l = build_jump(&b, &JumpChannel::rotated_eta(1, 2.0, 0.0)).unwrap();
        let m = build_eta(&b, 1, EtaComponent::Minus).unwrap().scale(C64::new(2f64.sqrt(), 0.0));
        assert!(l.max_abs_diff(&m) < 1e-15);
        assert!(vecops::norm(&l.apply(&b.basis_state(0))) == 0.0);
    }

    #[test]
    fn rotated_jump_annihilates_plus_y_product() {
        for n in 1..=3 {
            let b = chain(n);
            let psi = plus_y_product_state(&b).unwrap();
            assert_abs_diff_eq!(vecops::norm(&psi), 1.0, epsilon = 1e-14);
            for j in 1..=n {
                let l = build_jump(&b, &JumpChannel::rotated_eta(j, 1.0, FRAC_PI_2)).unwrap();
                assert!(vecops::norm(&l.apply(&psi)) < 1e-15);
                let ey = build_eta(&b, j, EtaComponent::Y).unwrap();
                assert_abs_diff_eq!(ey.expectation(&psi, &psi).re, 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn multiplet_norms_and_energies() {
        fn factorial(k: usize) -> f64 {
            (1..=k).map(|x| x as f64).product()
        }
        fn binom(n: usize, k: usize) -> f64 {
            factorial(n) / (factorial(k) * factorial(n - k))
        }
        for n in 1..=4 {
            let b = chain(n);
            let p = HamiltonianParams::clean(1.0, 8.0);
            let h = build_hubbard(&b, &p).unwrap();
            let e = p.vacuum_energy(&b.lattice);
            for m in 0..=n {
                let raw = unnormalized_multiplet(&b, m).unwrap();
                let nsq = vecops::dot(&raw, &raw).re;
                assert_abs_diff_eq!(nsq, factorial(m).powi(2) * binom(n, m), epsilon = 1e-9);
                let psi = build_multiplet_state(&b, m).unwrap();
                let hpsi = h.apply(&psi);
                let resid: Vec<C64> = hpsi.iter().zip(&psi).map(|(a, v)| a - v * e).collect();
                assert!(vecops::norm(&resid) < 1e-10);
            }
            assert!(build_multiplet_state(&b, n + 1).is_err());
        }
    }

    #[test]
    fn zeeman_and_interaction_structure() {
        let b = chain(3);
        let mut p = HamiltonianParams::clean(0.0, 0.0);
        p.bz = vec![0.3, -0.2, 0.9];
        p.bx = vec![0.5, 0.1, -0.4];
        let hz = build_hubbard(&b, &p).unwrap();
        for i in 1..=3 {
            for c in [EtaComponent::Plus, EtaComponent::Minus, EtaComponent::Z] {
                assert_eq!(hz.commutator(&build_eta(&b, i, c).unwrap()).max_abs(), 0.0);
            }
        }
        let mut pu = HamiltonianParams::clean(0.0, 0.0);
        pu.u_sites = vec![3.0, 8.5, 6.25];
        let hu = build_hubbard(&b, &pu).unwrap();
        let phd = hd_projector(&b);
        let proj = phd.matmul(&hu).matmul(&phd);
        let expected = phd.scale(C64::new((3.0 + 8.5 + 6.25) / 4.0, 0.0));
        assert!(proj.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = chain(2);
        let mut p = HamiltonianParams::clean(1.0, 1.0);
        p.mu = vec![1.0];
        assert!(build_hubbard(&b, &p).is_err());
        assert!(build_jump(&b, &JumpChannel::rotated_eta(1, -1.0, 0.0)).is_err());
        assert!(build_jump(&b, &JumpChannel::rotated_eta(3, 1.0, 0.0)).is_err());
        assert!(build_eta(&b, 0, EtaComponent::X).is_err());
    }
}
