//! Pairing diagnostics: one-point amplitudes, two-point correlators, the
//! structure factor and disorder-averaged steady-state estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Boundary, FockBasis};
use crate::model::{build_eta, EtaComponent};
use crate::sparse::{SparseOp, C64, ZERO};
use crate::superop::DensityState;

/// Slack allowed on the pseudospin-length bounds.
pub const BOUND_TOL: f64 = 1e-8;

/// Cached `η_i^+` and `η_i^+ η_j^−` for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PairOperators {
    pub n_sites: usize,
    pub boundary: Boundary,
    eta_plus: Vec<SparseOp>,
    /// `pairs[(i-1)·N + (j-1)]` for `i ≠ j`.
    pairs: Vec<Option<SparseOp>>,
}

impl PairOperators {
    pub fn new(basis: &FockBasis) -> Result<Self> {
        let n = basis.n_sites();
        let eta_plus: Vec<SparseOp> = (1..=n).map(|i| build_eta(basis, i, EtaComponent::Plus)).collect::<Result<_>>()?;
        let eta_minus: Vec<SparseOp> = eta_plus.iter().map(|p| p.adjoint()).collect();
        let mut pairs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                pairs.push((i != j).then(|| eta_plus[i].matmul(&eta_minus[j])));
            }
        }
        Ok(PairOperators { n_sites: n, boundary: basis.lattice.boundary, eta_plus, pairs })
    }

    pub fn eta_plus(&self, site: usize) -> &SparseOp {
        &self.eta_plus[site - 1]
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&SparseOp> {
        self.pairs[(i - 1) * self.n_sites + (j - 1)].as_ref()
    }

    fn check_sites(&self, i: usize, j: usize) -> Result<()> {
        for s in [i, j] {
            if s == 0 || s > self.n_sites {
                return Err(Error::SiteOutOfRange { site: s, n_sites: self.n_sites });
            }
        }
        Ok(())
    }

    /// `(Φ_i, Φ)` with `Φ_i = Tr(ρ η_i^+)` and `Φ = (1/N) Σ_i Φ_i`.
    pub fn pair_amplitude(&self, rho: &DensityState) -> (Vec<C64>, C64) {
        let phi_i: Vec<C64> = self.eta_plus.iter().map(|p| rho.expectation(p)).collect();
        let phi = phi_i.iter().sum::<C64>() / self.n_sites as f64;
        (phi_i, phi)
    }

    /// `C_ij = Tr(ρ η_i^+ η_j^−)`; for `i = j` this is the doublon weight.
    pub fn pair_correlator(&self, rho: &DensityState, i: usize, j: usize) -> Result<C64> {
        self.check_sites(i, j)?;
        Ok(match self.pair(i, j) {
            Some(op) => rho.expectation(op),
            None => {
                let p = &self.eta_plus[i - 1];
                rho.expectation(&p.matmul(&p.adjoint()))
            }
        })
    }

    fn check_separation(&self, r: usize) -> Result<()> {
        if r == 0 || r >= self.n_sites {
            return Err(Error::InvalidParameter(format!("separation r = {r} outside 1..{}", self.n_sites - 1)));
        }
        Ok(())
    }

    /// Index pairs `(i, i + r)` entering the separation-`r` sums: every site
    /// with wraparound under PBC, the in-range ones under OBC.
    pub fn separation_pairs(&self, r: usize) -> Result<Vec<(usize, usize)>> {
        self.check_separation(r)?;
        let n = self.n_sites;
        Ok(match self.boundary {
            Boundary::Pbc => (1..=n).map(|i| (i, (i - 1 + r) % n + 1)).collect(),
            Boundary::Obc => (1..=n - r).map(|i| (i, i + r)).collect(),
        })
    }

    /// `C(r)`: the translational average `(1/N) Σ_i C_{i,i+r}` under PBC and
    /// the fixed-origin profile `C_{1,1+r}` under OBC.
    pub fn corr_r(&self, rho: &DensityState, r: usize) -> Result<C64> {
        self.check_separation(r)?;
        match self.boundary {
            Boundary::Pbc => {
                let sum: C64 = self
                    .separation_pairs(r)?
                    .into_iter()
                    .map(|(i, j)| rho.expectation(self.pair(i, j).expect("i ≠ j")))
                    .sum();
                Ok(sum / self.n_sites as f64)
            }
            Boundary::Obc => Ok(rho.expectation(self.pair(1, 1 + r).expect("r ≥ 1"))),
        }
    }

    /// `S_η = 2/(N(N−1)) Σ_{i<j} C_ij`.
    pub fn structure_factor(&self, rho: &DensityState) -> Result<C64> {
        let n = self.n_sites;
        if n < 2 {
            return Err(Error::InvalidParameter("structure factor needs N ≥ 2".into()));
        }
        let mut sum = ZERO;
        for i in 1..=n {
            for j in i + 1..=n {
                sum += rho.expectation(self.pair(i, j).expect("i ≠ j"));
            }
        }
        Ok(sum * (2.0 / (n * (n - 1)) as f64))
    }

    pub fn snapshot(&self, rho: &DensityState) -> Snapshot {
        let n = self.n_sites;
        let (phi_i, phi) = self.pair_amplitude(rho);
        let mut c_ij = vec![ZERO; n * n];
        for i in 1..=n {
            for j in 1..=n {
                if let Some(op) = self.pair(i, j) {
                    c_ij[(i - 1) * n + (j - 1)] = rho.expectation(op);
                }
            }
        }
        let corr_r = (1..n)
            .map(|r| match self.boundary {
                Boundary::Pbc => {
                    (1..=n).map(|i| c_ij[(i - 1) * n + (i - 1 + r) % n]).sum::<C64>() / n as f64
                }
                Boundary::Obc => c_ij[r],
            })
            .collect();
        let s_eta = if n >= 2 {
            let mut sum = ZERO;
            for i in 0..n {
                for j in i + 1..n {
                    sum += c_ij[i * n + j];
                }
            }
            sum * (2.0 / (n * (n - 1)) as f64)
        } else {
            ZERO
        };
        Snapshot { phi_i, phi, c_ij, corr_r, s_eta }
    }
}

/// All diagnostics of one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub phi_i: Vec<C64>,
    pub phi: C64,
    /// Row-major `N×N`, zero on the diagonal.
    pub c_ij: Vec<C64>,
    /// `C(r)` for `r = 1..N−1`.
    pub corr_r: Vec<C64>,
    pub s_eta: C64,
}

impl Snapshot {
    /// Checks `|Φ_i| ≤ ½` and `|C_ij| ≤ ¼` (i ≠ j) up to `tol`.
    pub fn check_bounds(&self, tol: f64) -> Result<()> {
        if let Some((i, v)) = self.phi_i.iter().enumerate().find(|(_, v)| v.norm() > 0.5 + tol) {
            return Err(Error::Numerical(format!("|Φ_{}| = {} exceeds 1/2", i + 1, v.norm())));
        }
        if let Some((k, v)) = self.c_ij.iter().enumerate().find(|(_, v)| v.norm() > 0.25 + tol) {
            let n = self.phi_i.len();
            return Err(Error::Numerical(format!("|C_{},{}| = {} exceeds 1/4", k / n + 1, k % n + 1, v.norm())));
        }
        Ok(())
    }
}

/// Time series of diagnostics with provenance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub model_hash: u64,
    pub seed: Option<u64>,
}

/// One `(time, index, observable, value)` record of a series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub time: f64,
    pub index: usize,
    pub observable: &'static str,
    pub value: C64,
}

impl ObservableSeries {
    pub fn new(model_hash: u64, seed: Option<u64>) -> Self {
        ObservableSeries { model_hash, seed, ..Default::default() }
    }

    pub fn push(&mut self, time: f64, snapshot: Snapshot) {
        self.times.push(time);
        self.snapshots.push(snapshot);
    }

    /// Flattened records in a stable order: `Phi_i` (index = site), `Phi`
    /// (index 0), `C_r` (index = r), `C_ij` (index = (i−1)·N + j for i < j),
    /// `S_eta` (index 0).
    pub fn rows(&self) -> Vec<SeriesRow> {
        let mut rows = Vec::new();
        for (&time, s) in self.times.iter().zip(&self.snapshots) {
            let n = s.phi_i.len();
            let mut push = |index: usize, observable: &'static str, value: C64| {
                rows.push(SeriesRow { time, index, observable, value })
            };
            for (i, v) in s.phi_i.iter().enumerate() {
                push(i + 1, "Phi_i", *v);
            }
            push(0, "Phi", s.phi);
            for (r, v) in s.corr_r.iter().enumerate() {
                push(r + 1, "C_r", *v);
            }
            for i in 0..n {
                for j in i + 1..n {
                    push(i * n + j + 1, "C_ij", s.c_ij[i * n + j]);
                }
            }
            push(0, "S_eta", s.s_eta);
        }
        rows
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Per-realization steady-state magnitudes `(1/N)|Σ_i Φ_i|` and
/// `(1/N)|Σ_i C_{i,i+r}|`.
pub fn realization_values(ops: &PairOperators, rho: &DensityState, r: usize) -> Result<(f64, f64)> {
    let n = ops.n_sites as f64;
    let (phi_i, _) = ops.pair_amplitude(rho);
    let phi = phi_i.iter().sum::<C64>().norm() / n;
    let c: C64 = ops
        .separation_pairs(r)?
        .into_iter()
        .map(|(i, j)| rho.expectation(ops.pair(i, j).expect("i ≠ j")))
        .sum();
    Ok((phi, c.norm() / n))
}

/// Sample mean with standard error `s/√n` (zero for `n ≤ 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty ensemble".into()));
        }
        // Welford: identical samples give an exact mean and zero spread.
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, &v) in values.iter().enumerate() {
            let d = v - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (v - mean);
        }
        let se = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        Ok(Estimate { mean, se, n })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderEstimates {
    pub phi_m: Estimate,
    pub c_m: Estimate,
    pub r: usize,
}

/// `|Φ_m|_ss = (1/N) E|Σ_i Tr(ρ η_i^+)|` and
/// `|C_m(r)|_ss = (1/N) E|Σ_i Tr(ρ η_i^+ η_{i+r}^−)|` over an ensemble.
pub fn disorder_estimators(ops: &PairOperators, ensemble: &[DensityState], r: usize) -> Result<DisorderEstimates> {
    let values: Vec<(f64, f64)> = ensemble.iter().map(|rho| realization_values(ops, rho, r)).collect::<Result<_>>()?;
    estimates_from_values(&values, r)
}

pub fn estimates_from_values(values: &[(f64, f64)], r: usize) -> Result<DisorderEstimates> {
    let phi: Vec<f64> = values.iter().map(|v| v.0).collect();
    let c: Vec<f64> = values.iter().map(|v| v.1).collect();
    Ok(DisorderEstimates { phi_m: Estimate::from_samples(&phi)?, c_m: Estimate::from_samples(&c)?, r })
}

/// The long-distance separation `⌊N/2⌋`.
pub fn half_separation(n_sites: usize) -> usize {
    n_sites / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::LatticeSpec;
    use crate::model::{build_multiplet_state, plus_y_product_state};

    fn ops(n: usize, boundary: Boundary) -> (FockBasis, PairOperators) {
        let b = FockBasis::new(&LatticeSpec::new(n, boundary).unwrap()).unwrap();
        let o = PairOperators::new(&b).unwrap();
        (b, o)
    }

    #[test]
    fn vacuum_has_no_coherence() {
        let (b, o) = ops(3, Boundary::Obc);
        let rho = DensityState::vacuum(b.dim);
        let s = o.snapshot(&rho);
        assert!(s.phi_i.iter().all(|v| *v == ZERO));
        assert!(s.c_ij.iter().all(|v| *v == ZERO));
        assert_eq!(s.s_eta, ZERO);
    }

    #[test]
    fn plus_y_product_saturates_the_bounds() {
        for boundary in [Boundary::Obc, Boundary::Pbc] {
            let (b, o) = ops(4, boundary);
            let rho = DensityState::pure(&plus_y_product_state(&b).unwrap());
            let s = o.snapshot(&rho);
            for v in &s.phi_i {
                assert!((v.norm() - 0.5).abs() < 1e-14);
            }
            for (k, v) in s.c_ij.iter().enumerate() {
                if k / 4 != k % 4 {
                    assert!((v.norm() - 0.25).abs() < 1e-14);
                }
            }
            // Equal phases: every term adds coherently.
            assert!((s.s_eta.norm() - 0.25).abs() < 1e-14);
            assert!((s.phi.norm() - 0.5).abs() < 1e-14);
            assert!(s.check_bounds(BOUND_TOL).is_ok());
            for r in 1..4 {
                assert!((o.corr_r(&rho, r).unwrap().norm() - 0.25).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fixed_multiplet_has_no_one_point_amplitude() {
        let (b, o) = ops(3, Boundary::Obc);
        for m in 1..=2 {
            let rho = DensityState::pure(&build_multiplet_state(&b, m).unwrap());
            let (phi_i, _) = o.pair_amplitude(&rho);
            assert!(phi_i.iter().all(|v| v.norm() < 1e-15));
        }
    }

    #[test]
    fn correlator_is_hermitian_paired() {
        let (b, o) = ops(3, Boundary::Obc);
        let psi: Vec<C64> = (0..b.dim).map(|k| C64::new(((k * 37) % 11) as f64 - 5.0, ((k * 13) % 7) as f64 - 3.0)).collect();
        let nrm = crate::sparse::vecops::norm(&psi);
        let psi: Vec<C64> = psi.iter().map(|v| v / nrm).collect();
        let mut rho = DensityState::pure(&psi);
        let other = DensityState::basis_projector(b.dim, 5);
        for (a, c) in rho.vec.iter_mut().zip(&other.vec) {
            *a = *a * 0.7 + c * 0.3;
        }
        for i in 1..=3 {
            for j in 1..=3 {
                let cij = o.pair_correlator(&rho, i, j).unwrap();
                let cji = o.pair_correlator(&rho, j, i).unwrap();
                assert!((cij - cji.conj()).norm() < 1e-14);
            }
        }
        // Diagonal: doublon weight equals Tr(ρ(½ + η^z)) on doublet states.
        let d = DensityState::pure(&plus_y_product_state(&b).unwrap());
        assert!((o.pair_correlator(&d, 2, 2).unwrap().re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn separation_pairs_wrap_only_on_rings() {
        let (_, o) = ops(5, Boundary::Pbc);
        assert_eq!(o.separation_pairs(2).unwrap(), vec![(1, 3), (2, 4), (3, 5), (4, 1), (5, 2)]);
        let (_, o) = ops(5, Boundary::Obc);
        assert_eq!(o.separation_pairs(2).unwrap(), vec![(1, 3), (2, 4), (3, 5)]);
        assert!(o.separation_pairs(0).is_err());
        assert!(o.separation_pairs(5).is_err());
        assert_eq!(half_separation(5), 2);
    }

    #[test]
    fn estimators_of_identical_realizations() {
        let (b, o) = ops(4, Boundary::Pbc);
        let rho = DensityState::pure(&plus_y_product_state(&b).unwrap());
        let e = disorder_estimators(&o, &vec![rho; 5], 2).unwrap();
        assert!((e.phi_m.mean - 0.5).abs() < 1e-14);
        assert!((e.c_m.mean - 0.25).abs() < 1e-14);
        assert!(e.phi_m.se < 1e-15 && e.c_m.se < 1e-15);
        assert_eq!(e.phi_m.n, 5);
    }

    #[test]
    fn standard_error_oracle() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        // s² = 5/3, SE = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(Estimate::from_samples(&[]).is_err());
        assert_eq!(Estimate::from_samples(&[0.3]).unwrap().se, 0.0);
    }

    #[test]
    fn structure_factor_needs_two_sites() {
        let (b, o) = ops(1, Boundary::Obc);
        assert!(o.structure_factor(&DensityState::vacuum(b.dim)).is_err());
    }

    #[test]
    fn series_rows_are_ordered() {
        let (b, o) = ops(2, Boundary::Obc);
        let mut s = ObservableSeries::new(7, Some(1));
        s.push(0.0, o.snapshot(&DensityState::vacuum(b.dim)));
        let names: Vec<&str> = s.rows().iter().map(|r| r.observable).collect();
        assert_eq!(names, vec!["Phi_i", "Phi_i", "Phi", "C_r", "C_ij", "S_eta"]);
    }
}
