//! Vectorized Lindblad generators, density states and stationary solvers.
//!
//! Vectorization is row-major: `ρ_ab ↦ vec[a·d + b]`, so that
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)` and
//!
//! `L = -i(H⊗I − I⊗Hᵀ) + Σ_k [L_k⊗L_k* − ½ L_k†L_k⊗I − ½ I⊗(L_k†L_k)ᵀ]`.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ArnoldiOptions, ShiftedLu, Which};
use crate::sparse::{vecops, ColumnBuilder, SparseOp, C64, I, ONE, ZERO};

/// Generator pieces from which any column of the superoperator can be built
/// without assembling the whole matrix.
///
/// With `A = -iH − ½Σ L_k†L_k` the generator is
/// `A⊗I + I⊗A* + Σ_k L_k⊗L_k*`.
#[derive(Clone, Debug)]
pub struct LindbladParts {
    d: usize,
    a: SparseOp,
    a_conj: SparseOp,
    jumps: Vec<SparseOp>,
    jumps_conj: Vec<SparseOp>,
}

impl LindbladParts {
    pub fn new(h: &SparseOp, jumps: &[SparseOp]) -> Result<Self> {
        let d = h.nrows();
        if !h.is_square() {
            return Err(Error::DimensionMismatch { expected: d, got: h.ncols() });
        }
        let mut a = h.scale(-I);
        for l in jumps {
            if l.nrows() != d || l.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: l.nrows() });
            }
            a = a.lincomb(ONE, &l.adjoint().matmul(l), C64::new(-0.5, 0.0));
        }
        let jumps: Vec<SparseOp> = jumps.iter().filter(|l| l.nnz() > 0).cloned().collect();
        Ok(LindbladParts {
            d,
            a_conj: a.conj(),
            a,
            jumps_conj: jumps.iter().map(|l| l.conj()).collect(),
            jumps,
        })
    }

    pub fn dim_hilbert(&self) -> usize {
        self.d
    }

    /// Column `c·d + e` (the image of `|c⟩⟨e|`) as sorted `(row, value)` pairs.
    fn column_into(&self, col: usize, acc: &mut SparseAccumulator) {
        let d = self.d;
        let (c, e) = (col / d, col % d);
        for (a, v) in self.a.column(c) {
            acc.add(a * d + e, v);
        }
        for (b, v) in self.a_conj.column(e) {
            acc.add(c * d + b, v);
        }
        for (l, lc) in self.jumps.iter().zip(&self.jumps_conj) {
            for (a, va) in l.column(c) {
                for (b, vb) in lc.column(e) {
                    acc.add(a * d + b, va * vb);
                }
            }
        }
    }

    pub fn assemble(&self) -> SparseOp {
        let n = self.d * self.d;
        let mut acc = SparseAccumulator::new(n);
        let mut builder = ColumnBuilder::new(n, n);
        for col in 0..n {
            self.column_into(col, &mut acc);
            builder.push_sorted_column(acc.drain_sorted());
        }
        builder.finish()
    }

    /// Smallest index set containing `seeds` that the generator maps into
    /// itself, together with the generator restricted to it. Evolution started
    /// inside the set never leaves it, so the restriction is exact.
    pub fn assemble_reachable(&self, seeds: &[usize]) -> Reduced {
        let n = self.d * self.d;
        let mut acc = SparseAccumulator::new(n);
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        let mut columns: HashMap<usize, Vec<(u32, C64)>> = HashMap::new();
        while let Some(col) = queue.pop_front() {
            self.column_into(col, &mut acc);
            let entries: Vec<(u32, C64)> = acc.drain_sorted().collect();
            for &(r, _) in &entries {
                if !seen[r as usize] {
                    seen[r as usize] = true;
                    queue.push_back(r as usize);
                }
            }
            columns.insert(col, entries);
        }
        let keep: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        let mut position = vec![u32::MAX; n];
        for (k, &i) in keep.iter().enumerate() {
            position[i] = k as u32;
        }
        let mut builder = ColumnBuilder::new(keep.len(), keep.len());
        for &col in &keep {
            let entries = &columns[&col];
            builder.push_sorted_column(entries.iter().map(|&(r, v)| (position[r as usize], v)));
        }
        Reduced { full_dim: n, keep, matrix: builder.finish() }
    }
}

/// Dense scatter buffer with a touched-index list.
struct SparseAccumulator {
    values: Vec<C64>,
    touched: Vec<bool>,
    pattern: Vec<u32>,
}

impl SparseAccumulator {
    fn new(n: usize) -> Self {
        SparseAccumulator { values: vec![ZERO; n], touched: vec![false; n], pattern: Vec::new() }
    }

    fn add(&mut self, i: usize, v: C64) {
        if !self.touched[i] {
            self.touched[i] = true;
            self.pattern.push(i as u32);
        }
        self.values[i] += v;
    }

    fn drain_sorted(&mut self) -> impl Iterator<Item = (u32, C64)> + '_ {
        self.pattern.sort_unstable();
        let values = &mut self.values;
        let touched = &mut self.touched;
        self.pattern.drain(..).map(move |i| {
            let k = i as usize;
            touched[k] = false;
            let v = values[k];
            values[k] = ZERO;
            (i, v)
        })
    }
}

/// Generator restricted to an invariant index subset of the doubled space.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub full_dim: usize,
    pub keep: Vec<usize>,
    pub matrix: SparseOp,
}

impl Reduced {
    pub fn dim(&self) -> usize {
        self.keep.len()
    }

    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        self.keep.iter().map(|&i| full[i]).collect()
    }

    pub fn embed(&self, reduced: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.full_dim];
        for (&i, &v) in self.keep.iter().zip(reduced) {
            out[i] = v;
        }
        out
    }

    /// True when `full` has no weight outside the kept indices.
    pub fn contains(&self, full: &[C64]) -> bool {
        let mut inside = vec![false; self.full_dim];
        self.keep.iter().for_each(|&i| inside[i] = true);
        full.iter().enumerate().all(|(i, v)| inside[i] || *v == ZERO)
    }
}

#[derive(Clone, Debug)]
pub struct Superoperator {
    pub dim_hilbert: usize,
    pub matrix: SparseOp,
    pub channels: Vec<String>,
    pub hamiltonian_hash: u64,
}

pub fn hash_operator(op: &SparseOp) -> u64 {
    let mut hasher = DefaultHasher::new();
    (op.nrows(), op.ncols()).hash(&mut hasher);
    for (i, j, v) in op.triplets() {
        (i, j, v.re.to_bits(), v.im.to_bits()).hash(&mut hasher);
    }
    hasher.finish()
}

/// Assembles the vectorized Lindblad generator.
pub fn vectorize(h: &SparseOp, jumps: &[SparseOp]) -> Result<Superoperator> {
    let parts = LindbladParts::new(h, jumps)?;
    Ok(Superoperator {
        dim_hilbert: h.nrows(),
        matrix: parts.assemble(),
        channels: (0..jumps.len()).map(|k| format!("jump[{k}]")).collect(),
        hamiltonian_hash: hash_operator(h),
    })
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, rho: &DensityState) -> DensityState {
        DensityState { dim: rho.dim, vec: self.matrix.apply(&rho.vec) }
    }

    /// `max_j |Σ_a L[a·d+a, j]|`: the deviation of `(vec I)† L` from zero.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.dim_hilbert;
        (0..self.dim())
            .map(|j| {
                self.matrix
                    .column(j)
                    .filter(|(i, _)| i / d == i % d)
                    .map(|(_, v)| v)
                    .sum::<C64>()
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    /// Indices reachable from `seeds` and the generator restricted to them.
    pub fn reduce(&self, seeds: &[usize]) -> Reduced {
        let n = self.dim();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = seeds.iter().copied().collect();
        seeds.iter().for_each(|&s| seen[s] = true);
        while let Some(col) = queue.pop_front() {
            for (r, _) in self.matrix.column(col) {
                if !seen[r] {
                    seen[r] = true;
                    queue.push_back(r);
                }
            }
        }
        let keep: Vec<usize> = (0..n).filter(|&i| seen[i]).collect();
        Reduced { full_dim: n, matrix: self.matrix.submatrix(&keep), keep }
    }
}

/// Vectorized density matrix, `vec[a·d + b] = ρ_ab`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityState {
    pub dim: usize,
    pub vec: Vec<C64>,
}

impl DensityState {
    pub fn from_vec(dim: usize, vec: Vec<C64>) -> Result<Self> {
        if vec.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: vec.len() });
        }
        Ok(DensityState { dim, vec })
    }

    pub fn pure(psi: &[C64]) -> Self {
        let d = psi.len();
        let mut vec = vec![ZERO; d * d];
        for (a, pa) in psi.iter().enumerate() {
            if *pa == ZERO {
                continue;
            }
            for (b, pb) in psi.iter().enumerate() {
                vec[a * d + b] = pa * pb.conj();
            }
        }
        DensityState { dim: d, vec }
    }

    /// `|k⟩⟨k|` for a basis index `k`.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut vec = vec![ZERO; dim * dim];
        vec[k * dim + k] = ONE;
        DensityState { dim, vec }
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis_projector(dim, 0)
    }

    pub fn element(&self, a: usize, b: usize) -> C64 {
        self.vec[a * self.dim + b]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|a| self.element(a, a)).sum()
    }

    pub fn normalize_trace(&mut self) {
        let tr = self.trace();
        vecops::scale(ONE / tr, &mut self.vec);
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in a..d {
                worst = worst.max((self.element(a, b) - self.element(b, a).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part; dense, so limited to `d ≤ 256`.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.dim > 256 {
            return Err(Error::InvalidParameter(format!(
                "dense positivity check limited to d ≤ 256, got {}",
                self.dim
            )));
        }
        let d = self.dim;
        let herm: Vec<C64> = (0..d * d)
            .map(|k| {
                let (a, b) = (k / d, k % d);
                (self.element(a, b) + self.element(b, a).conj()) * 0.5
            })
            .collect();
        Ok(linalg::hermitian_eigenvalues(d, &herm)?[0])
    }

    /// `Tr(ρ O) = Σ_{c,r} ρ_cr O_rc`.
    pub fn expectation(&self, op: &SparseOp) -> C64 {
        op.triplets().map(|(r, c, v)| self.element(c, r) * v).sum()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_pure(&self, psi: &[C64]) -> f64 {
        let d = self.dim;
        let mut acc = ZERO;
        for a in 0..d {
            if psi[a] == ZERO {
                continue;
            }
            for b in 0..d {
                acc += psi[a].conj() * self.element(a, b) * psi[b];
            }
        }
        acc.re
    }

    pub fn max_abs_diff(&self, other: &DensityState) -> f64 {
        vecops::max_abs_diff(&self.vec, &other.vec)
    }

    pub fn support(&self) -> Vec<usize> {
        self.vec.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(i, _)| i).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteadyStateOptions {
    /// Positive real shift `s` in `(L + s)^{-1}`.
    pub shift: f64,
    /// Further shifts, tried in order. A shift that lands near a slow
    /// eigenvalue amplifies that mode, so a state is only accepted once two
    /// shifts agree.
    pub fallback_shifts: Vec<f64>,
    pub iterations: usize,
    /// Iterative-refinement passes per linear solve.
    pub refinement_steps: usize,
    /// Acceptance threshold on `‖L x‖₂ / max(‖L‖_F, 1)` for a trace-one iterate.
    pub residual_tol: f64,
    /// Largest entrywise difference between two shifts' states for agreement.
    pub agreement_tol: f64,
    /// Largest reduced dimension factorized directly; above it the solver
    /// integrates to stationarity instead.
    pub lu_max_dim: usize,
    pub degeneracy_tol: f64,
    pub check_degeneracy: bool,
    pub require_unique: bool,
    /// Stationarity threshold on ‖dρ/dτ‖₁ for the integration fallback.
    pub integration_tol: f64,
    pub integration_max_time: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions {
            shift: 1e-11,
            fallback_shifts: vec![1e-12, 1e-10, 1e-9, 1e-8],
            iterations: 3,
            refinement_steps: 2,
            residual_tol: 1e-12,
            agreement_tol: 1e-6,
            lu_max_dim: 12_000,
            degeneracy_tol: 1e-10,
            check_degeneracy: false,
            require_unique: false,
            integration_tol: 1e-10,
            integration_max_time: 2000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyStateMethod {
    ShiftInvert,
    Integration,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityState,
    /// ‖L vec(ρ)‖₂ on the solved subspace.
    pub residual: f64,
    /// Number of eigenvalues with |λ| below the degeneracy tolerance on the
    /// seed's invariant subspace, when checked.
    pub zero_modes: Option<usize>,
    pub method: SteadyStateMethod,
    pub reduced_dim: usize,
    pub converged: bool,
}

/// Stationary state reached from `seed`.
///
/// The generator is first restricted to the smallest invariant index set
/// containing the seed's support. On that subspace shifted inverse iteration
/// with `(L + s)^{-1}` converges to the spectral projection of the seed onto
/// the kernel, i.e. the state the dynamics actually relaxes to. Too large a
/// subspace falls back to long-time integration.
pub fn steady_state(parts: &LindbladParts, seed: &DensityState, opts: &SteadyStateOptions) -> Result<SteadyState> {
    let reduced = parts.assemble_reachable(&seed.support());
    steady_state_reduced(&reduced, seed, opts)
}

/// As [`steady_state`] for an already assembled superoperator.
pub fn steady_state_of(l: &Superoperator, seed: &DensityState, opts: &SteadyStateOptions) -> Result<SteadyState> {
    let reduced = l.reduce(&seed.support());
    steady_state_reduced(&reduced, seed, opts)
}

pub fn steady_state_reduced(reduced: &Reduced, seed: &DensityState, opts: &SteadyStateOptions) -> Result<SteadyState> {
    let d = seed.dim;
    let scale = reduced.matrix.frobenius_norm().max(1.0);
    if reduced.dim() > opts.lu_max_dim {
        let (x, converged) = crate::evolve::integrate_to_stationarity(
            &reduced.matrix,
            &reduced.restrict(&seed.vec),
            opts.integration_tol,
            opts.integration_max_time,
        )?;
        let mut rho = DensityState { dim: d, vec: reduced.embed(&x) };
        rho.normalize_trace();
        let residual = vecops::norm(&reduced.matrix.apply(&reduced.restrict(&rho.vec)));
        return Ok(SteadyState {
            rho,
            residual,
            zero_modes: None,
            method: SteadyStateMethod::Integration,
            reduced_dim: reduced.dim(),
            converged,
        });
    }

    // (lu, shift, iterate, residual) of every candidate passing the residual test.
    let mut passing: Vec<(ShiftedLu, f64, Vec<C64>, f64)> = Vec::new();
    let mut fallback: Option<(ShiftedLu, f64, Vec<C64>, f64)> = None;
    let mut agreed = None;
    for &shift in std::iter::once(&opts.shift).chain(&opts.fallback_shifts) {
        let lu = ShiftedLu::new(&reduced.matrix, C64::new(shift, 0.0))?;
        let x = shift_invert(reduced, &lu, shift, &reduced.restrict(&seed.vec), d, opts)?;
        let residual = vecops::norm(&reduced.matrix.apply(&x));
        if residual > opts.residual_tol * scale {
            if fallback.as_ref().map_or(true, |b| residual < b.3) {
                fallback = Some((lu, shift, x, residual));
            }
            continue;
        }
        let matches = passing.iter().position(|p| {
            p.2.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) <= opts.agreement_tol
        });
        passing.push((lu, shift, x, residual));
        if let Some(k) = matches {
            let last = passing.len() - 1;
            agreed = Some(if passing[k].3 <= passing[last].3 { k } else { last });
            break;
        }
    }
    let converged = agreed.is_some();
    let (lu, shift, x, residual) = match agreed {
        Some(k) => passing.swap_remove(k),
        None => passing
            .into_iter()
            .chain(fallback)
            .min_by(|a, b| a.3.total_cmp(&b.3))
            .expect("at least one shift"),
    };

    let zero_modes = if opts.check_degeneracy || opts.require_unique {
        Some(count_zero_modes(reduced, &lu, shift, opts)?)
    } else {
        None
    };
    if opts.require_unique {
        if let Some(count) = zero_modes.filter(|&c| c > 1) {
            return Err(Error::Degenerate { count, tol: opts.degeneracy_tol });
        }
    }

    let mut rho = DensityState { dim: d, vec: reduced.embed(&x) };
    // Symmetrize away round-off in the Hermitian structure.
    let herm: Vec<C64> = (0..d * d)
        .map(|k| (rho.vec[k] + rho.vec[(k % d) * d + k / d].conj()) * 0.5)
        .collect();
    rho.vec = herm;
    Ok(SteadyState {
        rho,
        residual,
        zero_modes,
        method: SteadyStateMethod::ShiftInvert,
        reduced_dim: reduced.dim(),
        converged,
    })
}

/// Shifted inverse iteration from `x0`, renormalized to unit trace after
/// every refined solve.
fn shift_invert(reduced: &Reduced, lu: &ShiftedLu, shift: f64, x0: &[C64], d: usize, opts: &SteadyStateOptions) -> Result<Vec<C64>> {
    let s = C64::new(shift, 0.0);
    let mut x = x0.to_vec();
    for _ in 0..opts.iterations.max(1) {
        let mut y = lu.solve(&x);
        for _ in 0..opts.refinement_steps {
            let ay = reduced.matrix.apply(&y);
            let r: Vec<C64> = x.iter().zip(&ay).zip(&y).map(|((b, a), v)| b - a - v * s).collect();
            for (v, dv) in y.iter_mut().zip(lu.solve(&r)) {
                *v += dv;
            }
        }
        let tr: C64 = reduced
            .keep
            .iter()
            .zip(&y)
            .filter(|(&i, _)| i / d == i % d)
            .map(|(_, v)| *v)
            .sum();
        if tr.norm() == 0.0 || !tr.re.is_finite() {
            return Err(Error::Numerical("steady-state iterate has zero trace".into()));
        }
        vecops::scale(ONE / tr, &mut y);
        x = y;
    }
    Ok(x)
}

/// Eigenvalues of `L` with |λ| < tol on the reduced space, found as the
/// dominant eigenvalues `1/(λ + s)` of the shift-inverted operator.
fn count_zero_modes(reduced: &Reduced, lu: &ShiftedLu, shift: f64, opts: &SteadyStateOptions) -> Result<usize> {
    let n = reduced.dim();
    let nev = 6.min(n);
    let start: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i % 5) as f64 * 0.1, (i % 3) as f64 * 0.05)).collect();
    let mu = linalg::arnoldi(
        n,
        |x, y| y.copy_from_slice(&lu.solve(x)),
        &start,
        &ArnoldiOptions::new(nev, Which::LargestMagnitude),
    )?;
    let s = C64::new(shift, 0.0);
    Ok(mu.iter().filter(|m| (ONE / **m - s).norm() < opts.degeneracy_tol).count())
}

/// The `k` eigenvalues of largest real part, sorted by descending real part.
/// Dense for `d² ≤ 4096`, implicitly restarted Arnoldi otherwise.
pub fn liouvillian_spectrum(l: &SparseOp, k: usize) -> Result<Vec<C64>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n = l.nrows();
    let mut vals = if n <= 4096 {
        linalg::sparse_eigenvalues_dense(l)?
    } else {
        let start: Vec<C64> = (0..n).map(|i| C64::new(1.0, (i % 7) as f64 * 0.01)).collect();
        let mut opts = ArnoldiOptions::new(k, Which::LargestReal);
        opts.tol = 1e-10;
        opts.ncv = (4 * k + 40).min(n);
        opts.max_restarts = 5000;
        linalg::arnoldi(n, |x, y| l.apply_into(x, y), &start, &opts)?
    };
    vals.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    vals.truncate(k);
    Ok(vals)
}

/// Smallest nonzero decay rate `min{-Re λ : Re λ < -tol}` among `vals`.
pub fn spectral_gap(vals: &[C64], tol: f64) -> Option<f64> {
    vals.iter().map(|v| -v.re).filter(|&r| r > tol).fold(None, |acc, r| {
        Some(acc.map_or(r, |a: f64| a.min(r)))
    })
}
