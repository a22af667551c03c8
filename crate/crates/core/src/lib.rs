//! Lindblad dynamics of the particle–hole symmetric Hubbard chain under
//! locally rotated η-pair dissipation.

pub mod disorder;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod projected;
pub mod sparse;
pub mod superop;

pub use error::{Error, Result};
pub use fock::{Boundary, FockBasis, LatticeSpec, Spin};
pub use model::{
    EtaComponent, HamiltonianParams, JumpChannel, JumpKind, ModelSpec, SpinComponent,
};
pub use sparse::{SparseOp, C64};
pub use disorder::{DisorderKind, DisorderSpec, Pipeline, SweepResult, SweepRow};
pub use evolve::{ConservationReport, EvolutionConfig, Method, TrajectoryConfig, TrajectoryEnsemble};
pub use observables::{DisorderEstimates, Estimate, ObservableSeries, PairOperators, Snapshot};
pub use superop::{DensityState, LindbladParts, SteadyState, SteadyStateOptions, Superoperator};
