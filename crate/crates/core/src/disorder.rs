//! Quenched-disorder ensembles: deterministic per-realization sampling, the
//! per-realization steady-state pipeline and sweep aggregation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{detect_plateau, evolve_reduced, mix_seed, EvolutionConfig, Method};
use crate::fock::Spin;
use crate::model::{JumpChannel, JumpKind, ModelSpec};
use crate::observables::{estimates_from_values, realization_values, DisorderEstimates, PairOperators};
use crate::superop::{steady_state_reduced, DensityState, LindbladParts, SteadyStateOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DisorderKind {
    #[serde(rename = "interaction_WU", alias = "interaction")]
    Interaction,
    #[serde(rename = "gamma_Wgamma", alias = "gamma")]
    Gamma,
    #[serde(rename = "zeeman_WZ", alias = "zeeman")]
    Zeeman,
    #[serde(rename = "bond_Wt", alias = "bond")]
    Bond,
    #[serde(rename = "potential_Wmu", alias = "potential")]
    Potential,
    #[serde(rename = "transverse_Wperp", alias = "transverse")]
    Transverse,
    #[serde(rename = "angle_Wtheta", alias = "angle")]
    Angle,
    #[serde(rename = "loss_kappa", alias = "loss")]
    Loss,
    #[serde(rename = "dephasing_kappa_phi", alias = "dephasing")]
    Dephasing,
}

impl DisorderKind {
    pub const ALL: [DisorderKind; 9] = [
        DisorderKind::Interaction,
        DisorderKind::Gamma,
        DisorderKind::Zeeman,
        DisorderKind::Bond,
        DisorderKind::Potential,
        DisorderKind::Transverse,
        DisorderKind::Angle,
        DisorderKind::Loss,
        DisorderKind::Dephasing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DisorderKind::Interaction => "interaction_WU",
            DisorderKind::Gamma => "gamma_Wgamma",
            DisorderKind::Zeeman => "zeeman_WZ",
            DisorderKind::Bond => "bond_Wt",
            DisorderKind::Potential => "potential_Wmu",
            DisorderKind::Transverse => "transverse_Wperp",
            DisorderKind::Angle => "angle_Wtheta",
            DisorderKind::Loss => "loss_kappa",
            DisorderKind::Dephasing => "dephasing_kappa_phi",
        }
    }

    /// Uniform-rate channels rather than random draws.
    pub fn is_deterministic(self) -> bool {
        matches!(self, DisorderKind::Loss | DisorderKind::Dephasing)
    }

    fn tag(self) -> u64 {
        DisorderKind::ALL.iter().position(|&k| k == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for DisorderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_realizations() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    /// Sweep grid of widths (or rates for loss/dephasing).
    pub widths: Vec<f64>,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(kind: DisorderKind, widths: Vec<f64>, n_realizations: usize, seed: u64) -> Self {
        DisorderSpec { kind, widths, n_realizations, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::InvalidParameter("disorder sweep needs at least one width".into()));
        }
        if let Some(w) = self.widths.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("disorder width {w} must be finite and ≥ 0")));
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidParameter("n_realizations must be at least 1".into()));
        }
        Ok(())
    }

    /// Loss and dephasing add fixed channels, so one realization suffices.
    pub fn effective_realizations(&self) -> usize {
        if self.kind.is_deterministic() {
            1
        } else {
            self.n_realizations
        }
    }
}

/// `hash(master, kind, width, index)` as a chain of splitmix64 finalizers.
pub fn realization_seed(master: u64, kind: DisorderKind, width: f64, index: usize) -> u64 {
    let mut h = mix_seed(master);
    h = mix_seed(h ^ kind.tag());
    h = mix_seed(h ^ width.to_bits());
    mix_seed(h ^ index as u64)
}

fn uniform(rng: &mut ChaCha8Rng, center: f64, w: f64) -> f64 {
    center + w * (2.0 * rng.random::<f64>() - 1.0)
}

/// One realization of `base` at the given width. Widths of zero return the
/// base model unchanged.
pub fn sample_realization(spec: &DisorderSpec, base: &ModelSpec, width: f64, index: usize) -> Result<ModelSpec> {
    spec.validate()?;
    base.validate()?;
    if !(width >= 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("disorder width {width} must be finite and ≥ 0")));
    }
    if index >= spec.effective_realizations() {
        return Err(Error::InvalidParameter(format!(
            "realization index {index} out of range for {} realizations",
            spec.effective_realizations()
        )));
    }
    if width == 0.0 {
        return Ok(base.clone());
    }
    let n = base.lattice.n_sites;
    let mut model = base.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(realization_seed(spec.seed, spec.kind, width, index));
    let h = &mut model.hamiltonian;
    let site_val = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    match spec.kind {
        DisorderKind::Interaction => {
            let centers: Vec<f64> = (1..=n).map(|i| h.interaction(i)).collect();
            h.u_sites = centers.iter().map(|&c| uniform(&mut rng, c, width)).collect();
        }
        DisorderKind::Gamma => {
            for ch in model.jumps.iter_mut().filter(|c| c.kind == JumpKind::RotatedEta) {
                if width > ch.rate {
                    return Err(Error::InvalidParameter(format!(
                        "W_γ = {width} exceeds γ_j = {} and would allow negative rates",
                        ch.rate
                    )));
                }
                ch.rate = uniform(&mut rng, ch.rate, width);
            }
        }
        DisorderKind::Zeeman => {
            let (bz, bx) = (h.bz.clone(), h.bx.clone());
            h.bz = (0..n).map(|i| uniform(&mut rng, site_val(&bz, i), width)).collect();
            h.bx = (0..n).map(|i| uniform(&mut rng, site_val(&bx, i), width)).collect();
        }
        DisorderKind::Bond => {
            let centers: Vec<f64> = (0..base.lattice.n_bonds()).map(|b| h.hopping(b)).collect();
            h.t_bonds = centers.iter().map(|&c| uniform(&mut rng, c, width)).collect();
        }
        DisorderKind::Potential => {
            let mu = h.mu.clone();
            h.mu = (0..n).map(|i| uniform(&mut rng, site_val(&mu, i), width)).collect();
        }
        DisorderKind::Transverse => {
            let (hx, hy) = (h.hx.clone(), h.hy.clone());
            h.hx = (0..n).map(|i| uniform(&mut rng, site_val(&hx, i), width)).collect();
            h.hy = (0..n).map(|i| uniform(&mut rng, site_val(&hy, i), width)).collect();
        }
        DisorderKind::Angle => {
            for ch in model.jumps.iter_mut().filter(|c| c.kind == JumpKind::RotatedEta) {
                ch.angle = uniform(&mut rng, ch.angle, width);
            }
        }
        DisorderKind::Loss | DisorderKind::Dephasing => {
            for i in 1..=n {
                for s in Spin::BOTH {
                    model.jumps.push(if spec.kind == DisorderKind::Loss {
                        JumpChannel::loss(i, s, width)
                    } else {
                        JumpChannel::dephasing(i, s, width)
                    });
                }
            }
        }
    }
    model.validate()?;
    Ok(model)
}

/// How each realization's stationary state is obtained: a direct solve when
/// the vacuum's invariant sector fits the LU budget, otherwise long-time
/// evolution with plateau detection on both estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    pub lu_max_dim: usize,
    pub evolution: EvolutionConfig,
    /// Correlator separation; defaults to `⌊N/2⌋` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<usize>,
    /// Worker threads for concurrent realizations (0 = rayon default).
    pub workers: usize,
}

impl Default for Pipeline {
    fn default() -> Self {
        let mut evolution = EvolutionConfig::new(150.0);
        evolution.method = Method::KrylovExpm;
        evolution.n_samples = 31;
        evolution.atol = 1e-8;
        evolution.plateau.tolerance = 5e-3;
        Pipeline { lu_max_dim: SteadyStateOptions::default().lu_max_dim, evolution, separation: None, workers: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Direct,
    Evolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub width: f64,
    pub index: usize,
    pub seed: u64,
    pub phi: f64,
    pub c: f64,
    pub method: Option<SolveMethod>,
    pub reduced_dim: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl RealizationResult {
    pub fn ok(&self) -> bool {
        self.converged && self.error.is_none()
    }
}

/// Stationary `(|Φ|, |C(r)|)` of one model, reached from the vacuum.
pub fn solve_realization(model: &ModelSpec, pipeline: &Pipeline, r: usize) -> Result<(f64, f64, SolveMethod, usize, bool)> {
    let basis = model.basis()?;
    let ops = PairOperators::new(&basis)?;
    let parts = LindbladParts::new(&model.hamiltonian_op(&basis)?, &model.jump_ops(&basis)?)?;
    let seed = DensityState::vacuum(basis.dim);
    let reduced = parts.assemble_reachable(&seed.support());
    if reduced.dim() <= pipeline.lu_max_dim {
        let opts = SteadyStateOptions { lu_max_dim: pipeline.lu_max_dim, ..Default::default() };
        let ss = steady_state_reduced(&reduced, &seed, &opts)?;
        let (phi, c) = realization_values(&ops, &ss.rho, r)?;
        return Ok((phi, c, SolveMethod::Direct, reduced.dim(), ss.converged));
    }
    let cfg = &pipeline.evolution;
    let mut times = Vec::new();
    let mut phis = Vec::new();
    let mut cs = Vec::new();
    let mut failure = None;
    let run = evolve_reduced(&reduced, &seed, cfg, &mut |t, rho| match realization_values(&ops, rho, r) {
        Ok((phi, c)) => {
            times.push(t);
            phis.push(phi);
            cs.push(c);
        }
        Err(e) => failure = Some(e),
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let p_phi = detect_plateau(&times, &phis, &cfg.plateau);
    let p_c = detect_plateau(&times, &cs, &cfg.plateau);
    let converged = p_phi.converged && p_c.converged && run.report.passes();
    Ok((*phis.last().unwrap(), *cs.last().unwrap(), SolveMethod::Evolution, run.reduced_dim, converged))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub width: f64,
    pub estimator: &'static str,
    pub mean: f64,
    pub se: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub kind: DisorderKind,
    pub separation: usize,
    pub rows: Vec<SweepRow>,
    pub realizations: Vec<RealizationResult>,
}

impl SweepResult {
    /// `(|Φ_m|, |C_m|)` estimates at one grid width, if any realization succeeded.
    pub fn estimates_at(&self, width: f64) -> Option<DisorderEstimates> {
        let values: Vec<(f64, f64)> = self
            .realizations
            .iter()
            .filter(|r| r.width == width && r.ok())
            .map(|r| (r.phi, r.c))
            .collect();
        estimates_from_values(&values, self.separation).ok()
    }
}

/// Runs every realization on the grid and aggregates the estimators.
/// Realizations run concurrently on a bounded pool; results keep grid and
/// index order regardless of scheduling. A zero width solves the base model
/// once, since every realization is identical to it.
pub fn run_sweep(spec: &DisorderSpec, base: &ModelSpec, pipeline: &Pipeline) -> Result<SweepResult> {
    spec.validate()?;
    base.validate()?;
    let n_real = spec.effective_realizations();
    let r = pipeline.separation.unwrap_or(crate::observables::half_separation(base.lattice.n_sites));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(pipeline.workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;

    let mut realizations = Vec::new();
    for &w in &spec.widths {
        let tasks: Vec<usize> = if w == 0.0 { vec![0] } else { (0..n_real).collect() };
        let solved: Vec<RealizationResult> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&index| {
                    let seed = realization_seed(spec.seed, spec.kind, w, index);
                    let outcome = sample_realization(spec, base, w, index).and_then(|m| solve_realization(&m, pipeline, r));
                    match outcome {
                        Ok((phi, c, method, dim, converged)) => RealizationResult {
                            width: w,
                            index,
                            seed,
                            phi,
                            c,
                            method: Some(method),
                            reduced_dim: dim,
                            converged,
                            error: None,
                        },
                        Err(e) => RealizationResult {
                            width: w,
                            index,
                            seed,
                            phi: f64::NAN,
                            c: f64::NAN,
                            method: None,
                            reduced_dim: 0,
                            converged: false,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        });
        if w == 0.0 {
            let first = &solved[0];
            realizations.extend((0..n_real).map(|index| RealizationResult {
                index,
                seed: realization_seed(spec.seed, spec.kind, w, index),
                ..first.clone()
            }));
        } else {
            realizations.extend(solved);
        }
    }

    let mut rows = Vec::new();
    for &w in &spec.widths {
        let at_w: Vec<&RealizationResult> = realizations.iter().filter(|x| x.width == w).collect();
        let ok: Vec<(f64, f64)> = at_w.iter().filter(|x| x.ok()).map(|x| (x.phi, x.c)).collect();
        let n_failed = at_w.len() - ok.len();
        let est = estimates_from_values(&ok, r).ok();
        for (name, pick) in [("phi_m", 0usize), ("c_m", 1)] {
            let e = est.map(|e| if pick == 0 { e.phi_m } else { e.c_m });
            rows.push(SweepRow {
                width: w,
                estimator: name,
                mean: e.map_or(f64::NAN, |e| e.mean),
                se: e.map_or(f64::NAN, |e| e.se),
                n_ok: ok.len(),
                n_failed,
            });
        }
    }
    Ok(SweepResult { kind: spec.kind, separation: r, rows, realizations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{FockBasis, LatticeSpec};
    use crate::model::{build_eta, build_hubbard, hd_projector, EtaComponent, HamiltonianParams};
    use crate::sparse::C64;

    fn base(n: usize) -> ModelSpec {
        ModelSpec::clean(LatticeSpec::ring(n).unwrap(), 1.0, 8.0, &[1], 1.0, std::f64::consts::FRAC_PI_2)
    }

    #[test]
    fn zero_width_returns_base_for_every_index() {
        for kind in DisorderKind::ALL {
            let spec = DisorderSpec::new(kind, vec![0.0, 1.0], 5, 7);
            for index in 0..spec.effective_realizations() {
                assert_eq!(sample_realization(&spec, &base(3), 0.0, index).unwrap(), base(3));
            }
        }
    }

    #[test]
    fn draws_stay_in_declared_ranges() {
        let b = base(4);
        let w = 0.7;
        for index in 0..50 {
            let u = sample_realization(&DisorderSpec::new(DisorderKind::Interaction, vec![w], 50, 1), &b, w, index).unwrap();
            assert!(u.hamiltonian.u_sites.iter().all(|&x| (8.0 - w..=8.0 + w).contains(&x)));
            let t = sample_realization(&DisorderSpec::new(DisorderKind::Bond, vec![w], 50, 1), &b, w, index).unwrap();
            assert_eq!(t.hamiltonian.t_bonds.len(), 4);
            assert!(t.hamiltonian.t_bonds.iter().all(|&x| (1.0 - w..=1.0 + w).contains(&x)));
            let m = sample_realization(&DisorderSpec::new(DisorderKind::Potential, vec![w], 50, 1), &b, w, index).unwrap();
            assert!(m.hamiltonian.mu.iter().all(|&x| x.abs() <= w));
            let g = sample_realization(&DisorderSpec::new(DisorderKind::Gamma, vec![w], 50, 1), &b, w, index).unwrap();
            assert!(g.jumps.iter().all(|c| (1.0 - w..=1.0 + w).contains(&c.rate)));
        }
    }

    #[test]
    fn angle_draws_bracket_the_quarter_turn() {
        let b = ModelSpec::clean(LatticeSpec::ring(5).unwrap(), 1.0, 8.0, &[1, 2, 3], 1.0, std::f64::consts::FRAC_PI_2);
        let w = 0.3 * std::f64::consts::PI;
        let spec = DisorderSpec::new(DisorderKind::Angle, vec![w], 100, 42);
        let mut spread = 0.0f64;
        for index in 0..100 {
            let m = sample_realization(&spec, &b, w, index).unwrap();
            for ch in &m.jumps {
                let d = ch.angle - std::f64::consts::FRAC_PI_2;
                assert!(d.abs() <= w);
                spread = spread.max(d.abs());
            }
        }
        assert!(spread > 0.8 * w);
    }

    #[test]
    fn gamma_width_beyond_rate_is_rejected() {
        let spec = DisorderSpec::new(DisorderKind::Gamma, vec![1.5], 3, 0);
        assert!(sample_realization(&spec, &base(2), 1.5, 0).is_err());
    }

    #[test]
    fn loss_adds_channels_on_every_mode_once() {
        let spec = DisorderSpec::new(DisorderKind::Loss, vec![0.5], 100, 0);
        assert_eq!(spec.effective_realizations(), 1);
        let m = sample_realization(&spec, &base(3), 0.5, 0).unwrap();
        let loss: Vec<_> = m.jumps.iter().filter(|c| c.kind == JumpKind::ParticleLoss).collect();
        assert_eq!(loss.len(), 6);
        assert!(loss.iter().all(|c| c.rate == 0.5));
        assert!(sample_realization(&spec, &base(3), 0.5, 1).is_err());
    }

    #[test]
    fn seeds_are_distinct_and_reproducible() {
        let mut seen = std::collections::HashSet::new();
        for kind in DisorderKind::ALL {
            for w in [0.5, 1.0] {
                for i in 0..20 {
                    assert!(seen.insert(realization_seed(3, kind, w, i)));
                }
            }
        }
        let spec = DisorderSpec::new(DisorderKind::Zeeman, vec![1.0], 4, 99);
        assert_eq!(sample_realization(&spec, &base(3), 1.0, 2).unwrap(), sample_realization(&spec, &base(3), 1.0, 2).unwrap());
        assert_ne!(sample_realization(&spec, &base(3), 1.0, 2).unwrap(), sample_realization(&spec, &base(3), 1.0, 3).unwrap());
    }

    #[test]
    fn interaction_disorder_is_constant_on_the_doublet_space() {
        let lattice = LatticeSpec::chain(3).unwrap();
        let basis = FockBasis::new(&lattice).unwrap();
        let p = hd_projector(&basis);
        let b = ModelSpec::clean(lattice, 1.0, 8.0, &[1], 1.0, std::f64::consts::FRAC_PI_2);
        let spec = DisorderSpec::new(DisorderKind::Interaction, vec![4.0], 10, 5);
        for index in 0..10 {
            let m = sample_realization(&spec, &b, 4.0, index).unwrap();
            let mut only_u = HamiltonianParams::clean(0.0, 0.0);
            only_u.u_sites = m.hamiltonian.u_sites.clone();
            let hu = build_hubbard(&basis, &only_u).unwrap();
            let shift: f64 = only_u.u_sites.iter().sum::<f64>() / 4.0;
            let php = p.matmul(&hu).matmul(&p);
            assert_eq!(php.max_abs_diff(&p.scale(C64::new(shift, 0.0))), 0.0);
        }
    }

    #[test]
    fn zeeman_disorder_commutes_with_every_pseudospin() {
        let lattice = LatticeSpec::chain(3).unwrap();
        let basis = FockBasis::new(&lattice).unwrap();
        let b = ModelSpec::clean(lattice, 1.0, 8.0, &[1], 1.0, std::f64::consts::FRAC_PI_2);
        let spec = DisorderSpec::new(DisorderKind::Zeeman, vec![2.0], 10, 5);
        for index in 0..10 {
            let m = sample_realization(&spec, &b, 2.0, index).unwrap();
            let mut only_z = HamiltonianParams::clean(0.0, 0.0);
            only_z.bz = m.hamiltonian.bz.clone();
            only_z.bx = m.hamiltonian.bx.clone();
            let hz = build_hubbard(&basis, &only_z).unwrap();
            for i in 1..=3 {
                for c in [EtaComponent::Plus, EtaComponent::Minus, EtaComponent::X, EtaComponent::Y, EtaComponent::Z] {
                    let eta = build_eta(&basis, i, c).unwrap();
                    assert_eq!(hz.commutator(&eta).max_abs(), 0.0);
                }
            }
        }
    }

    #[test]
    fn clean_sweep_replicates_the_base_solution() {
        let b = ModelSpec::clean(LatticeSpec::ring(2).unwrap(), 1.0, 4.0, &[1], 1.0, std::f64::consts::FRAC_PI_2);
        let spec = DisorderSpec::new(DisorderKind::Interaction, vec![0.0], 6, 11);
        let res = run_sweep(&spec, &b, &Pipeline::default()).unwrap();
        assert_eq!(res.realizations.len(), 6);
        let est = res.estimates_at(0.0).unwrap();
        assert_eq!(est.phi_m.se, 0.0);
        assert_eq!(est.c_m.se, 0.0);
        assert!((est.phi_m.mean - 0.5).abs() < 1e-8);
        assert!((est.c_m.mean - 0.25).abs() < 1e-8);
        assert_eq!(res.rows.len(), 2);
        assert!(res.rows.iter().all(|r| r.n_ok == 6 && r.n_failed == 0));
    }

    #[test]
    fn sweep_is_order_stable_and_flags_failures() {
        let b = ModelSpec::clean(LatticeSpec::chain(2).unwrap(), 1.0, 4.0, &[1], 1.0, std::f64::consts::FRAC_PI_2);
        let spec = DisorderSpec::new(DisorderKind::Gamma, vec![0.5, 2.0], 4, 3);
        let p = Pipeline { workers: 2, ..Pipeline::default() };
        let a = run_sweep(&spec, &b, &p).unwrap();
        let again = run_sweep(&spec, &b, &p).unwrap();
        assert_eq!(format!("{:?}", a.rows), format!("{:?}", again.rows));
        let idx: Vec<usize> = a.realizations.iter().map(|r| r.index).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 0, 1, 2, 3]);
        let bad = a.rows.iter().find(|r| r.width == 2.0).unwrap();
        assert_eq!((bad.n_ok, bad.n_failed), (0, 4));
        let good = a.rows.iter().find(|r| r.width == 0.5).unwrap();
        assert_eq!((good.n_ok, good.n_failed), (4, 0));
    }

    #[test]
    fn interaction_disorder_relaxes_to_the_dark_product_state() {
        // Nonuniform U_i is constant on every doublet space, so the rotated
        // product state stays exactly dark; the slowest modes then sit far
        // below γ and make single-shift solves unreliable.
        use crate::model::plus_y_product_state;
        use crate::superop::{steady_state, DensityState, LindbladParts, SteadyStateOptions};
        let ring = ModelSpec::clean(LatticeSpec::ring(4).unwrap(), 1.0, 8.0, &[1], 1.0, std::f64::consts::FRAC_PI_2);
        let spec = DisorderSpec::new(DisorderKind::Interaction, vec![1.0, 2.0], 25, 1);
        for (w, idx) in [(2.0, 2), (2.0, 13), (1.0, 14)] {
            let m = sample_realization(&spec, &ring, w, idx).unwrap();
            let basis = m.basis().unwrap();
            let parts = LindbladParts::new(&m.hamiltonian_op(&basis).unwrap(), &m.jump_ops(&basis).unwrap()).unwrap();
            let ss = steady_state(&parts, &DensityState::vacuum(basis.dim), &SteadyStateOptions::default()).unwrap();
            assert!(ss.converged, "W={w} #{idx}");
            let f = ss.rho.fidelity_pure(&plus_y_product_state(&basis).unwrap());
            assert!((1.0 - f).abs() < 1e-6, "W={w} #{idx}: 1 - F = {}", 1.0 - f);
        }
    }
}
