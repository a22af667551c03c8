//! Experiment drivers. Each returns its series rows plus a JSON summary;
//! writing is left to the caller's single output writer.

use std::f64::consts::FRAC_1_SQRT_2;

use etapair_core::disorder::{run_sweep, SweepResult};
use etapair_core::evolve::{detect_plateau, evolve_master_parts, evolve_master_with, ConservationReport, EvolutionConfig};
use etapair_core::observables::{ObservableSeries, PairOperators, Snapshot};
use etapair_core::projected::{
    anticommutator_diagonal, build_effective_generator, numeric_spectrum, spectrum_distance, toy_qubit, toy_qubit_suite,
    verify_triangular, BraLabel, PseudospinSpace,
};
use etapair_core::superop::{hash_operator, spectral_gap, vectorize};
use etapair_core::{DensityState, LindbladParts, ModelSpec, C64};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::output::SeriesRecord;
use crate::verify::algebra_checks;

#[derive(Debug)]
pub struct Outcome {
    pub series: Vec<SeriesRecord>,
    pub sweep: Option<SweepResult>,
    pub results: Value,
    pub seeds: Value,
    /// False when any run missed a conservation bound, a plateau or a
    /// realization failed.
    pub converged: bool,
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::ToyQubit => toy(cfg),
        Experiment::CleanDynamics => clean_dynamics(cfg),
        Experiment::FiniteSize => finite_size(cfg),
        Experiment::ProjectedSpectrum => projected(cfg),
        Experiment::DisorderSweep => sweep(cfg),
        Experiment::SymmetrySuite => symmetry(cfg),
    }
}

fn c(v: C64) -> Value {
    json!([v.re, v.im])
}

/// Suffix distinguishing runs that share one `series.csv`.
fn tagged(name: &str, label: Option<&str>) -> String {
    match label {
        Some(l) => format!("{name}@{l}"),
        None => name.to_string(),
    }
}

fn driven_label(set: &[usize]) -> String {
    let sites: Vec<String> = set.iter().map(|s| s.to_string()).collect();
    format!("J={}", sites.join(","))
}

fn toy(cfg: &ExperimentConfig) -> Result<Outcome> {
    let thetas = if cfg.runs.thetas.is_empty() { vec![cfg.model.theta] } else { cfg.runs.thetas.clone() };
    let gamma = cfg.model.gamma;
    let evo = cfg.evolution_or_default();
    let multi = thetas.len() > 1;
    let mut series = Vec::new();
    let mut runs = Vec::new();
    let mut converged = true;
    for &theta in &thetas {
        let label = multi.then(|| format!("theta={theta}"));
        let suite = toy_qubit_suite(theta, gamma)?;
        let q = toy_qubit(theta, gamma)?;
        let l = vectorize(&q.hamiltonian, std::slice::from_ref(&q.jump))?;
        let s_plus = q.s_minus.adjoint();
        let observables = [("s_plus", &s_plus), ("s_x", &q.sx), ("s_y", &q.sy), ("s_z", &q.sz)];
        let run = evolve_master_with(&l, &DensityState::basis_projector(2, 1), &evo, &mut |t, rho| {
            for (name, op) in &observables {
                series.push(SeriesRecord::new(t, 0, tagged(name, label.as_deref()), rho.expectation(op)));
            }
        })?;
        converged &= run.report.passes();
        let equator = [C64::new(0.0, -FRAC_1_SQRT_2), C64::new(FRAC_1_SQRT_2, 0.0)];
        runs.push(json!({
            "theta": theta,
            "gamma": gamma,
            "kernel_dim": suite.kernel_dim,
            "steady_state_fidelity": suite.dark_fidelity,
            "steady_state_deviation": suite.dark_deviation,
            "equator_fidelity": suite.steady_state.fidelity_pure(&equator),
            "dark_state_residual": suite.dark_residual,
            "s_plus_ss": c(suite.steady_state.expectation(&s_plus)),
            "spectrum": suite.spectrum.iter().map(|v| c(*v)).collect::<Vec<_>>(),
            "conservation": run.report,
        }));
    }
    Ok(Outcome { series, sweep: None, results: json!({ "runs": runs }), seeds: json!({}), converged })
}

struct DynamicsRun {
    series: ObservableSeries,
    report: ConservationReport,
    reduced_dim: usize,
}

fn evolve_from_vacuum(model: &ModelSpec, evo: &EvolutionConfig) -> Result<DynamicsRun> {
    let basis = model.basis()?;
    let h = model.hamiltonian_op(&basis)?;
    let parts = LindbladParts::new(&h, &model.jump_ops(&basis)?)?;
    let ops = PairOperators::new(&basis)?;
    let mut series = ObservableSeries::new(hash_operator(&h), None);
    let run = evolve_master_parts(&parts, &DensityState::vacuum(basis.dim), evo, &mut |t, rho| {
        series.push(t, ops.snapshot(rho));
    })?;
    Ok(DynamicsRun { series, report: run.report, reduced_dim: run.reduced_dim })
}

fn push_rows(out: &mut Vec<SeriesRecord>, series: &ObservableSeries, label: Option<&str>) {
    out.extend(
        series
            .rows()
            .into_iter()
            .map(|r| SeriesRecord::new(r.time, r.index, tagged(r.observable, label), r.value)),
    );
}

fn final_summary(s: &Snapshot) -> Value {
    json!({
        "abs_phi_i": s.phi_i.iter().map(|v| v.norm()).collect::<Vec<_>>(),
        "abs_phi": s.phi.norm(),
        "abs_corr_r": s.corr_r.iter().map(|v| v.norm()).collect::<Vec<_>>(),
        "abs_s_eta": s.s_eta.norm(),
    })
}

fn clean_dynamics(cfg: &ExperimentConfig) -> Result<Outcome> {
    let evo = cfg.evolution_or_default();
    let sets = cfg.driven_sets();
    let multi = sets.len() > 1;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut converged = true;
    for set in &sets {
        let model = cfg.model.spec_with(cfg.model.n_sites, set)?;
        let run = evolve_from_vacuum(&model, &evo)?;
        let label = multi.then(|| driven_label(set));
        push_rows(&mut rows, &run.series, label.as_deref());
        converged &= run.report.passes();
        let phis: Vec<f64> = run.series.snapshots.iter().map(|s| s.phi.norm()).collect();
        let plateau = detect_plateau(&run.series.times, &phis, &evo.plateau);
        runs.push(json!({
            "driven": set,
            "reduced_dim": run.reduced_dim,
            "conservation": run.report,
            "final_time": run.series.times.last(),
            "final": run.series.last().map(final_summary),
            "abs_phi_plateau": plateau,
        }));
    }
    Ok(Outcome { series: rows, sweep: None, results: json!({ "runs": runs }), seeds: json!({}), converged })
}

fn finite_size(cfg: &ExperimentConfig) -> Result<Outcome> {
    let evo = cfg.evolution_or_default();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut converged = true;
    let (mut phi_lo, mut phi_hi, mut s_lo, mut s_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for n in cfg.sizes() {
        let model = cfg.model.spec_with(n, &cfg.model.driven)?;
        let run = evolve_from_vacuum(&model, &evo)?;
        push_rows(&mut rows, &run.series, Some(&format!("N={n}")));
        converged &= run.report.passes();
        let phis: Vec<f64> = run.series.snapshots.iter().map(|s| s.phi.norm()).collect();
        let ss: Vec<f64> = run.series.snapshots.iter().map(|s| s.s_eta.norm()).collect();
        let p_phi = detect_plateau(&run.series.times, &phis, &evo.plateau);
        let p_s = detect_plateau(&run.series.times, &ss, &evo.plateau);
        let (phi_end, s_end) = (*phis.last().unwrap(), *ss.last().unwrap());
        phi_lo = phi_lo.min(phi_end);
        phi_hi = phi_hi.max(phi_end);
        s_lo = s_lo.min(s_end);
        s_hi = s_hi.max(s_end);
        runs.push(json!({
            "n_sites": n,
            "reduced_dim": run.reduced_dim,
            "conservation": run.report,
            "abs_phi_final": phi_end,
            "abs_s_eta_final": s_end,
            "abs_phi_plateau": p_phi,
            "abs_s_eta_plateau": p_s,
        }));
    }
    let results = json!({
        "runs": runs,
        "abs_phi_spread": phi_hi - phi_lo,
        "abs_s_eta_spread": s_hi - s_lo,
    });
    Ok(Outcome { series: rows, sweep: None, results, seeds: json!({}), converged })
}

fn projected(cfg: &ExperimentConfig) -> Result<Outcome> {
    let n = cfg.model.n_sites;
    let gamma = cfg.model.gamma;
    let sets = cfg.driven_sets();
    let multi = sets.len() > 1;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for set in &sets {
        let label = multi.then(|| driven_label(set));
        let op = build_effective_generator(n, set, gamma)?;
        let tri = verify_triangular(&op);
        let spectrum = numeric_spectrum(&op)?;
        let diagonal: Vec<C64> = (0..op.nrows()).map(|k| op.get(k, k)).collect();
        let printed: Vec<C64> = anticommutator_diagonal(&PseudospinSpace::new(n, BraLabel::Vectorized)?, set, gamma)?
            .into_iter()
            .map(|v| C64::new(v, 0.0))
            .collect();
        for (k, v) in spectrum.iter().enumerate() {
            rows.push(SeriesRecord::new(0.0, k, tagged("lambda", label.as_deref()), *v));
        }
        runs.push(json!({
            "driven": set,
            "dim": op.nrows(),
            "max_subdiagonal": tri.max_violation,
            "triangular": tri.is_strictly_triangular_below_diagonal,
            "spectrum_vs_diagonal": spectrum_distance(&spectrum, &diagonal),
            "spectrum_vs_anticommutator_formula": spectrum_distance(&spectrum, &printed),
            "gap": spectral_gap(&spectrum, 1e-10),
            "trace": diagonal.iter().sum::<C64>().re,
        }));
    }
    Ok(Outcome { series: rows, sweep: None, results: json!({ "runs": runs }), seeds: json!({}), converged: true })
}

fn symmetry(cfg: &ExperimentConfig) -> Result<Outcome> {
    let model = cfg.model.spec()?;
    let checks = algebra_checks(&model.lattice, &model.hamiltonian)?;
    let rows = checks
        .iter()
        .enumerate()
        .map(|(k, ch)| SeriesRecord::new(0.0, k, ch.name.clone(), C64::new(ch.value, 0.0)))
        .collect();
    let converged = checks.iter().all(|ch| ch.passed);
    Ok(Outcome { series: rows, sweep: None, results: json!({ "checks": checks }), seeds: json!({}), converged })
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = cfg.disorder.as_ref().expect("validated");
    let base = cfg.model.spec()?;
    let pipeline = cfg.pipeline_or_default();
    let res = run_sweep(spec, &base, &pipeline)?;

    // Stationary per-realization values; the time column carries τ = ∞.
    let mut rows = Vec::new();
    for r in &res.realizations {
        let label = format!("W={}", r.width);
        rows.push(SeriesRecord::new(f64::INFINITY, r.index, tagged("abs_phi", Some(&label)), C64::new(r.phi, 0.0)));
        rows.push(SeriesRecord::new(f64::INFINITY, r.index, tagged("abs_c", Some(&label)), C64::new(r.c, 0.0)));
    }

    let mut deviation = Value::Null;
    if let Some(desk) = &cfg.desk_variant {
        let phi_dev = res.rows.iter().filter(|r| r.estimator == "phi_m").map(|r| (r.mean - 0.5).abs()).fold(0.0, f64::max);
        let c_dev = res.rows.iter().filter(|r| r.estimator == "c_m").map(|r| (r.mean - 0.25).abs()).fold(0.0, f64::max);
        deviation = json!({
            "max_abs_phi_deviation": phi_dev,
            "max_abs_c_deviation": c_dev,
            "within_budget": phi_dev <= desk.phi_budget && c_dev <= desk.c_budget,
        });
    }
    let failed: usize = res.realizations.iter().filter(|r| !r.ok()).count();
    let seeds: Vec<Value> = res
        .realizations
        .iter()
        .map(|r| json!({ "width": r.width, "index": r.index, "seed": r.seed }))
        .collect();
    let results = json!({
        "kind": spec.kind,
        "separation": res.separation,
        "effective_realizations": spec.effective_realizations(),
        "rows": res.rows,
        "n_failed": failed,
        "desk_variant_deviation": deviation,
    });
    Ok(Outcome {
        series: rows,
        results,
        seeds: json!({ "master": spec.seed, "realizations": seeds }),
        converged: failed == 0,
        sweep: Some(res),
    })
}
