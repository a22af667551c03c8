//! Experiment configuration: one TOML file per run, unknown keys rejected,
//! command-line overrides applied on top.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use etapair_core::disorder::{DisorderKind, DisorderSpec, Pipeline};
use etapair_core::evolve::{EvolutionConfig, Method};
use etapair_core::{Boundary, LatticeSpec, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Largest chain the runner accepts.
pub const MAX_SITES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    ToyQubit,
    CleanDynamics,
    FiniteSize,
    ProjectedSpectrum,
    DisorderSweep,
    SymmetrySuite,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::ToyQubit,
        Experiment::CleanDynamics,
        Experiment::FiniteSize,
        Experiment::ProjectedSpectrum,
        Experiment::DisorderSweep,
        Experiment::SymmetrySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ToyQubit => "toy_qubit",
            Experiment::CleanDynamics => "clean_dynamics",
            Experiment::FiniteSize => "finite_size",
            Experiment::ProjectedSpectrum => "projected_spectrum",
            Experiment::DisorderSweep => "disorder_sweep",
            Experiment::SymmetrySuite => "symmetry_suite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::ToyQubit => "single qubit under a rotated lowering jump: dynamics, spectrum, dark-state fidelity",
            Experiment::CleanDynamics => "pair amplitudes and correlators from the vacuum for one or more driven sets",
            Experiment::FiniteSize => "global amplitude and structure factor versus chain length",
            Experiment::ProjectedSpectrum => "projected pseudospin generator: triangularity, spectrum, gap",
            Experiment::DisorderSweep => "disorder-averaged steady-state estimators over a width grid",
            Experiment::SymmetrySuite => "commutator norms of the pseudospin algebra for the configured model",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

fn d_sites() -> usize {
    4
}
fn d_boundary() -> Boundary {
    Boundary::Obc
}
fn d_one() -> f64 {
    1.0
}
fn d_u() -> f64 {
    8.0
}
fn d_theta() -> f64 {
    FRAC_PI_2
}
fn d_driven() -> Vec<usize> {
    vec![1]
}

/// Clean-model parameters, in units of γ where applicable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_sites")]
    pub n_sites: usize,
    #[serde(default = "d_boundary")]
    pub boundary: Boundary,
    #[serde(default = "d_one")]
    pub t: f64,
    #[serde(default = "d_u")]
    pub u: f64,
    #[serde(default = "d_one")]
    pub gamma: f64,
    #[serde(default = "d_theta")]
    pub theta: f64,
    /// 1-based driven sites.
    #[serde(default = "d_driven")]
    pub driven: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_sites: d_sites(),
            boundary: d_boundary(),
            t: 1.0,
            u: d_u(),
            gamma: 1.0,
            theta: FRAC_PI_2,
            driven: d_driven(),
        }
    }
}

impl ModelConfig {
    pub fn spec(&self) -> Result<ModelSpec> {
        self.spec_with(self.n_sites, &self.driven)
    }

    pub fn spec_with(&self, n_sites: usize, driven: &[usize]) -> Result<ModelSpec> {
        if n_sites > MAX_SITES {
            return Err(CliError::Config(format!("n_sites = {n_sites} exceeds the limit of {MAX_SITES}")));
        }
        if driven.is_empty() {
            return Err(CliError::Config("the driven set must not be empty".into()));
        }
        let mut sorted = driven.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != driven.len() {
            return Err(CliError::Config(format!("driven set {driven:?} repeats a site")));
        }
        let lattice = LatticeSpec::new(n_sites, self.boundary).map_err(config_err)?;
        let spec = ModelSpec::clean(lattice, self.t, self.u, driven, self.gamma, self.theta);
        spec.validate().map_err(config_err)?;
        Ok(spec)
    }
}

fn config_err(e: etapair_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Optional lists that turn one experiment into several runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunsConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub driven_sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thetas: Vec<f64>,
}

impl RunsConfig {
    fn is_empty(&self) -> bool {
        self.driven_sets.is_empty() && self.sizes.is_empty() && self.thetas.is_empty()
    }
}

/// A reduced sweep standing in for a larger reference ensemble, with the
/// deviation it is allowed from the projected values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskVariant {
    pub reference_n_sites: usize,
    pub reference_realizations: usize,
    pub phi_budget: f64,
    pub c_budget: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Relative paths resolve against the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default, skip_serializing_if = "RunsConfig::is_empty")]
    pub runs: RunsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<Pipeline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desk_variant: Option<DeskVariant>,
}

/// Command-line overrides; `None` leaves the file value in place.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub theta: Option<f64>,
    pub n_sites: Option<usize>,
    pub boundary: Option<Boundary>,
    pub t: Option<f64>,
    pub u: Option<f64>,
    pub gamma: Option<f64>,
    pub driven: Option<Vec<usize>>,
    pub t_final: Option<f64>,
    pub realizations: Option<usize>,
    pub widths: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub name: Option<String>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Built-in defaults mirroring the corresponding figure parameters.
    pub fn default_for(experiment: Experiment) -> Self {
        let mut cfg = ExperimentConfig {
            experiment,
            name: None,
            seed: 0,
            output_dir: None,
            model: ModelConfig::default(),
            evolution: None,
            runs: RunsConfig::default(),
            disorder: None,
            pipeline: None,
            desk_variant: None,
        };
        match experiment {
            Experiment::ToyQubit => {
                cfg.model.n_sites = 1;
                let mut evo = EvolutionConfig::new(20.0);
                evo.n_samples = 101;
                cfg.evolution = Some(evo);
            }
            Experiment::CleanDynamics => {
                let mut evo = EvolutionConfig::new(60.0);
                evo.n_samples = 121;
                cfg.evolution = Some(evo);
                cfg.runs.driven_sets = vec![vec![1], vec![1, 4]];
            }
            Experiment::FiniteSize => {
                cfg.model.u = 4.0;
                let mut evo = EvolutionConfig::new(300.0);
                evo.n_samples = 151;
                evo.method = Method::KrylovExpm;
                cfg.evolution = Some(evo);
                cfg.runs.sizes = vec![2, 3, 4, 5];
            }
            Experiment::ProjectedSpectrum => {
                cfg.runs.driven_sets = vec![vec![1], vec![1, 3]];
            }
            Experiment::DisorderSweep => {
                cfg.model.n_sites = 5;
                cfg.model.boundary = Boundary::Pbc;
                cfg.disorder = Some(DisorderSpec::new(DisorderKind::Interaction, vec![0.0, 1.0, 2.0, 3.0, 4.0], 100, 1));
            }
            Experiment::SymmetrySuite => {}
        }
        cfg
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        let m = &mut self.model;
        if let Some(v) = o.theta {
            m.theta = v;
            self.runs.thetas.clear();
        }
        if let Some(v) = o.n_sites {
            m.n_sites = v;
            self.runs.sizes.clear();
        }
        if let Some(v) = o.boundary {
            m.boundary = v;
        }
        if let Some(v) = o.t {
            m.t = v;
        }
        if let Some(v) = o.u {
            m.u = v;
        }
        if let Some(v) = o.gamma {
            m.gamma = v;
        }
        if let Some(v) = &o.driven {
            m.driven = v.clone();
            self.runs.driven_sets.clear();
        }
        if let Some(v) = o.t_final {
            let evo = self.evolution.get_or_insert_with(|| EvolutionConfig::new(v));
            evo.t_final = v;
        }
        if let Some(d) = self.disorder.as_mut() {
            if let Some(v) = o.realizations {
                d.n_realizations = v;
            }
            if let Some(v) = &o.widths {
                d.widths = v.clone();
            }
            if let Some(v) = o.seed {
                d.seed = v;
            }
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.workers {
            self.pipeline.get_or_insert_with(Pipeline::default).workers = v;
        }
        if let Some(v) = &o.name {
            self.name = Some(v.clone());
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = Some(v.clone());
        }
    }

    pub fn evolution_or_default(&self) -> EvolutionConfig {
        self.evolution.clone().unwrap_or_else(|| EvolutionConfig::new(20.0))
    }

    pub fn pipeline_or_default(&self) -> Pipeline {
        self.pipeline.clone().unwrap_or_default()
    }

    /// Driven sets to run: the `runs` list, or the model's own set.
    pub fn driven_sets(&self) -> Vec<Vec<usize>> {
        if self.runs.driven_sets.is_empty() {
            vec![self.model.driven.clone()]
        } else {
            self.runs.driven_sets.clone()
        }
    }

    /// Chain lengths to run: the `runs` list, or the model's own size.
    pub fn sizes(&self) -> Vec<usize> {
        if self.runs.sizes.is_empty() {
            vec![self.model.n_sites]
        } else {
            self.runs.sizes.clone()
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.name().to_string())
    }

    /// Checks everything that can be checked before any work or output.
    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed 64-bit; larger seeds would not round-trip.
        let max_seed = i64::MAX as u64;
        if self.seed > max_seed || self.disorder.as_ref().is_some_and(|d| d.seed > max_seed) {
            return Err(CliError::Config(format!("seeds must not exceed {max_seed}")));
        }
        if let Some(evo) = &self.evolution {
            evo.validate().map_err(config_err)?;
        }
        if let Some(p) = &self.pipeline {
            p.evolution.validate().map_err(config_err)?;
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(CliError::Config(format!("name `{name}` must be a non-empty single path component")));
            }
        }
        if self.desk_variant.is_some() && self.experiment != Experiment::DisorderSweep {
            return Err(CliError::Config("desk_variant only applies to disorder_sweep".into()));
        }
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(format!("{} requires {what}", self.experiment)))
            }
        };
        match self.experiment {
            Experiment::ToyQubit => {
                let thetas = if self.runs.thetas.is_empty() { vec![self.model.theta] } else { self.runs.thetas.clone() };
                if thetas.iter().any(|t| !t.is_finite()) || !(self.model.gamma >= 0.0) {
                    return Err(CliError::Config("toy qubit needs finite θ and γ ≥ 0".into()));
                }
            }
            Experiment::CleanDynamics | Experiment::ProjectedSpectrum => {
                if self.experiment == Experiment::CleanDynamics {
                    need(self.evolution.is_some(), "an [evolution] section")?;
                }
                for set in self.driven_sets() {
                    self.model.spec_with(self.model.n_sites, &set)?;
                }
                if self.experiment == Experiment::ProjectedSpectrum && self.model.n_sites > 5 {
                    return Err(CliError::Config("projected_spectrum is dense; use n_sites ≤ 5".into()));
                }
            }
            Experiment::FiniteSize => {
                need(self.evolution.is_some(), "an [evolution] section")?;
                for n in self.sizes() {
                    self.model.spec_with(n, &self.model.driven)?;
                }
            }
            Experiment::DisorderSweep => {
                let d = self.disorder.as_ref().ok_or_else(|| CliError::Config("disorder_sweep requires a [disorder] section".into()))?;
                d.validate().map_err(config_err)?;
                self.model.spec()?;
            }
            Experiment::SymmetrySuite => {
                self.model.spec()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for e in Experiment::ALL {
            let cfg = ExperimentConfig::default_for(e);
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap(), cfg);
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let mut cfg = ExperimentConfig::default_for(Experiment::CleanDynamics);
        cfg.seed = u64::MAX;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(Experiment::CleanDynamics);
        cfg.runs.driven_sets = vec![vec![1, 1]];
        assert!(cfg.validate().is_err());
        cfg.runs.driven_sets = vec![vec![]];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(Experiment::CleanDynamics);
        cfg.model.n_sites = MAX_SITES + 1;
        cfg.runs.driven_sets.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(Experiment::ToyQubit);
        cfg.desk_variant = Some(DeskVariant {
            reference_n_sites: 5,
            reference_realizations: 100,
            phi_budget: 0.03,
            c_budget: 0.03,
            note: String::new(),
        });
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(Experiment::DisorderSweep);
        cfg.disorder = None;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default_for(Experiment::ToyQubit);
        cfg.name = Some("a/b".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_replace_run_lists() {
        let mut cfg = ExperimentConfig::default_for(Experiment::ToyQubit);
        cfg.runs.thetas = vec![0.0, 1.0];
        cfg.apply(&Overrides { theta: Some(0.5), ..Default::default() });
        assert!(cfg.runs.thetas.is_empty());
        assert_eq!(cfg.model.theta, 0.5);

        let mut cfg = ExperimentConfig::default_for(Experiment::FiniteSize);
        cfg.apply(&Overrides { n_sites: Some(3), ..Default::default() });
        assert_eq!(cfg.sizes(), vec![3]);
        cfg.validate().unwrap();

        let mut cfg = ExperimentConfig::default_for(Experiment::DisorderSweep);
        cfg.apply(&Overrides { seed: Some(9), realizations: Some(3), widths: Some(vec![0.5]), ..Default::default() });
        let d = cfg.disorder.unwrap();
        assert_eq!((cfg.seed, d.seed, d.n_realizations, d.widths), (9, 9, 3, vec![0.5]));
    }
}
