//! Fermionic Fock space of a Hubbard chain.
//!
//! Modes are ordered site-major with ↑ before ↓: `mode(i, ↑) = 2(i-1)`,
//! `mode(i, ↓) = 2(i-1) + 1` for 1-based site `i`. A basis index is the
//! occupation bitmask itself, and fermionic signs follow the Jordan–Wigner
//! string over all lower modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseOp, C64, ONE};

pub const DEFAULT_MAX_SITES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Obc,
    Pbc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_sites: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, boundary: Boundary) -> Result<Self> {
        let lattice = LatticeSpec { n_sites, boundary };
        lattice.validate()?;
        Ok(lattice)
    }

    pub fn chain(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Obc)
    }

    pub fn ring(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Pbc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::Lattice("a chain needs at least one site".into()));
        }
        Ok(())
    }

    /// Staggering sign `(-1)^i` for 1-based site `i`.
    pub fn parity(&self, site: usize) -> f64 {
        if site % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn sublattice_parity(&self) -> Vec<f64> {
        (1..=self.n_sites).map(|i| self.parity(i)).collect()
    }

    /// True for odd rings, where the wrap bond joins two same-parity sites.
    pub fn bipartite_frustrated(&self) -> bool {
        self.boundary == Boundary::Pbc && self.n_sites % 2 == 1
    }

    /// Nearest-neighbour bonds `(i, j)` with 1-based sites, in a fixed order.
    /// A two-site ring has a single bond.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut bonds: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Pbc && n > 2 {
            bonds.push((n, 1));
        }
        bonds
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds().len()
    }

    /// Site `i + r` with wraparound (PBC) or `None` past the edge (OBC).
    pub fn shift(&self, site: usize, r: usize) -> Option<usize> {
        let target = site + r;
        if target <= self.n_sites {
            Some(target)
        } else if self.boundary == Boundary::Pbc {
            Some((target - 1) % self.n_sites + 1)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    pub lattice: LatticeSpec,
    pub n_modes: usize,
    pub dim: usize,
}

impl FockBasis {
    pub fn new(lattice: &LatticeSpec) -> Result<Self> {
        Self::with_max_sites(lattice, DEFAULT_MAX_SITES)
    }

    pub fn with_max_sites(lattice: &LatticeSpec, max_sites: usize) -> Result<Self> {
        lattice.validate()?;
        if lattice.n_sites > max_sites {
            return Err(Error::TooManySites { n_sites: lattice.n_sites, max: max_sites });
        }
        let n_modes = 2 * lattice.n_sites;
        Ok(FockBasis { lattice: lattice.clone(), n_modes, dim: 1usize << n_modes })
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.n_sites() {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_sites() });
        }
        Ok(())
    }

    pub fn mode(&self, site: usize, spin: Spin) -> usize {
        2 * (site - 1)
            + match spin {
                Spin::Up => 0,
                Spin::Down => 1,
            }
    }

    pub fn occupied(&self, state: usize, mode: usize) -> bool {
        state >> mode & 1 == 1
    }

    /// Jordan–Wigner sign: `(-1)^(occupied modes below `mode`)`.
    pub fn jw_sign(&self, state: usize, mode: usize) -> f64 {
        let below = state & ((1usize << mode) - 1);
        if below.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn annihilator(&self, site: usize, spin: Spin) -> Result<SparseOp> {
        self.check_site(site)?;
        let m = self.mode(site, spin);
        Ok(SparseOp::from_triplets(
            self.dim,
            self.dim,
            (0..self.dim)
                .filter(|&s| self.occupied(s, m))
                .map(|s| (s ^ (1 << m), s, C64::new(self.jw_sign(s, m), 0.0))),
        ))
    }

    pub fn creator(&self, site: usize, spin: Spin) -> Result<SparseOp> {
        self.check_site(site)?;
        let m = self.mode(site, spin);
        Ok(SparseOp::from_triplets(
            self.dim,
            self.dim,
            (0..self.dim)
                .filter(|&s| !self.occupied(s, m))
                .map(|s| (s | (1 << m), s, C64::new(self.jw_sign(s, m), 0.0))),
        ))
    }

    pub fn number(&self, site: usize, spin: Spin) -> Result<SparseOp> {
        self.check_site(site)?;
        let m = self.mode(site, spin);
        Ok(self.diagonal(|s| if self.occupied(s, m) { 1.0 } else { 0.0 }))
    }

    /// Diagonal operator with entries `f(bitmask)`.
    pub fn diagonal(&self, f: impl Fn(usize) -> f64) -> SparseOp {
        SparseOp::diagonal(&(0..self.dim).map(|s| C64::new(f(s), 0.0)).collect::<Vec<_>>())
    }

    pub fn identity(&self) -> SparseOp {
        SparseOp::identity(self.dim)
    }

    /// Local occupation pattern at a site: (n_up, n_down).
    pub fn site_occupation(&self, state: usize, site: usize) -> (bool, bool) {
        (
            self.occupied(state, self.mode(site, Spin::Up)),
            self.occupied(state, self.mode(site, Spin::Down)),
        )
    }

    /// Basis vector for a bitmask.
    pub fn basis_state(&self, state: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim];
        v[state] = ONE;
        v
    }
}
