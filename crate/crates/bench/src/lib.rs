//! Shared fixtures for the criterion benches.

use std::f64::consts::FRAC_PI_2;

use etapair_core::superop::Reduced;
use etapair_core::{DensityState, FockBasis, LatticeSpec, LindbladParts, ModelSpec};

/// Clean ring at the disorder-figure parameters (t = γ = 1, U = 8, site 1 driven).
pub fn clean_ring(n: usize) -> ModelSpec {
    ModelSpec::clean(LatticeSpec::ring(n).expect("valid ring"), 1.0, 8.0, &[1], 1.0, FRAC_PI_2)
}

pub fn parts(model: &ModelSpec) -> (FockBasis, LindbladParts) {
    let basis = model.basis().expect("basis");
    let h = model.hamiltonian_op(&basis).expect("hamiltonian");
    let parts = LindbladParts::new(&h, &model.jump_ops(&basis).expect("jumps")).expect("parts");
    (basis, parts)
}

/// The sector reachable from the vacuum, with the vacuum itself.
pub fn vacuum_sector(model: &ModelSpec) -> (Reduced, DensityState) {
    let (basis, parts) = parts(model);
    let vac = DensityState::vacuum(basis.dim);
    (parts.assemble_reachable(&vac.support()), vac)
}
