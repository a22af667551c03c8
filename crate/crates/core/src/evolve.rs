//! Time evolution: master equation on the vectorized state and a
//! wavefunction Monte Carlo unraveling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{vecops, SparseOp, C64, I, ONE, ZERO};
use crate::superop::{DensityState, LindbladParts, Reduced, Superoperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AdaptiveRk,
    KrylovExpm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    /// Trailing fraction of the run averaged for the steady value.
    pub window_fraction: f64,
    /// Largest allowed deviation from the window mean.
    pub tolerance: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig { window_fraction: 0.2, tolerance: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub t_final: f64,
    /// Sample times; empty means `n_samples` evenly spaced points.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default)]
    pub plateau: PlateauConfig,
    /// Restrict the dynamics to the invariant subspace reached from ρ0.
    #[serde(default = "default_true")]
    pub reduce: bool,
}

fn default_samples() -> usize {
    201
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_method() -> Method {
    Method::AdaptiveRk
}
fn default_krylov_dim() -> usize {
    30
}
fn default_true() -> bool {
    true
}

impl EvolutionConfig {
    pub fn new(t_final: f64) -> Self {
        EvolutionConfig {
            t_final,
            times: Vec::new(),
            n_samples: default_samples(),
            rtol: default_rtol(),
            atol: default_atol(),
            method: default_method(),
            krylov_dim: default_krylov_dim(),
            plateau: PlateauConfig::default(),
            reduce: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter("t_final must be positive".into()));
        }
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.times.is_empty() && self.n_samples < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        if self.times.iter().any(|&t| t < 0.0 || t > self.t_final) {
            return Err(Error::InvalidParameter("sample times must lie in [0, t_final]".into()));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("sample times must be sorted".into()));
        }
        if !(self.plateau.window_fraction > 0.0 && self.plateau.window_fraction <= 1.0) {
            return Err(Error::InvalidParameter("plateau window fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        if !self.times.is_empty() {
            return self.times.clone();
        }
        let n = self.n_samples;
        (0..n).map(|k| self.t_final * k as f64 / (n - 1) as f64).collect()
    }
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince integrator for a linear ODE `x' = f(x)`.
pub struct Dopri5<F: FnMut(&[C64], &mut [C64])> {
    f: F,
    n: usize,
    pub rtol: f64,
    pub atol: f64,
    pub h: f64,
    pub steps: usize,
    pub rejected: usize,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    fsal_valid: bool,
}

impl<F: FnMut(&[C64], &mut [C64])> Dopri5<F> {
    pub fn new(n: usize, f: F, rtol: f64, atol: f64) -> Self {
        Dopri5 {
            f,
            n,
            rtol,
            atol,
            h: 0.0,
            steps: 0,
            rejected: 0,
            k: std::array::from_fn(|_| vec![ZERO; n]),
            tmp: vec![ZERO; n],
            fsal_valid: false,
        }
    }

    fn stage(&mut self, x: &[C64], h: f64, coeffs: &[f64], out: usize) {
        for i in 0..self.n {
            let mut acc = x[i];
            for (s, &a) in coeffs.iter().enumerate() {
                if a != 0.0 {
                    acc += self.k[s][i] * (h * a);
                }
            }
            self.tmp[i] = acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k);
        (self.f)(tmp, &mut k[out]);
    }

    /// Single explicit step of size `h` without error control, writing the
    /// fifth-order solution into `out`. Does not touch the FSAL cache.
    pub fn fixed_step(&mut self, x: &[C64], h: f64, out: &mut [C64]) {
        let k0 = {
            let mut k0 = vec![ZERO; self.n];
            (self.f)(x, &mut k0);
            k0
        };
        self.k[0] = k0;
        self.stage(x, h, &[A21], 1);
        self.stage(x, h, &[A31, A32], 2);
        self.stage(x, h, &[A41, A42, A43], 3);
        self.stage(x, h, &[A51, A52, A53, A54], 4);
        self.stage(x, h, &[A61, A62, A63, A64, A65], 5);
        for i in 0..self.n {
            out[i] = x[i]
                + (self.k[0][i] * B1 + self.k[2][i] * B3 + self.k[3][i] * B4 + self.k[4][i] * B5 + self.k[5][i] * B6)
                    * h;
        }
        self.fsal_valid = false;
    }

    fn initial_step(&mut self, x: &[C64]) -> f64 {
        let mut fx = vec![ZERO; self.n];
        (self.f)(x, &mut fx);
        let sc: Vec<f64> = x.iter().map(|v| self.atol + self.rtol * v.norm()).collect();
        let d0 = (x.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / self.n as f64).sqrt();
        let d1 = (fx.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / self.n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(1.0)
    }

    /// Integrates `x` from `t` to `t_end` in place.
    pub fn advance(&mut self, x: &mut Vec<C64>, t: f64, t_end: f64) -> Result<()> {
        let mut t = t;
        if self.h <= 0.0 {
            self.h = self.initial_step(x);
        }
        let mut xnew = vec![ZERO; self.n];
        while t < t_end {
            let remaining = t_end - t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h < 1e-14 * t.abs().max(1.0) {
                if last {
                    break;
                }
                return Err(Error::StepUnderflow { t });
            }
            if !self.fsal_valid {
                let (k, xs) = (&mut self.k, &*x);
                (self.f)(xs, &mut k[0]);
                self.fsal_valid = true;
            }
            self.stage(x, h, &[A21], 1);
            self.stage(x, h, &[A31, A32], 2);
            self.stage(x, h, &[A41, A42, A43], 3);
            self.stage(x, h, &[A51, A52, A53, A54], 4);
            self.stage(x, h, &[A61, A62, A63, A64, A65], 5);
            for i in 0..self.n {
                xnew[i] = x[i]
                    + (self.k[0][i] * B1
                        + self.k[2][i] * B3
                        + self.k[3][i] * B4
                        + self.k[4][i] * B5
                        + self.k[5][i] * B6)
                        * h;
            }
            {
                let (k, xs) = (&mut self.k, &xnew);
                (self.f)(xs, &mut k[6]);
            }
            let mut err = 0.0;
            for i in 0..self.n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let sc = self.atol + self.rtol * x[i].norm().max(xnew[i].norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / self.n as f64).sqrt();
            if err <= 1.0 {
                t = if last { t_end } else { t + h };
                std::mem::swap(x, &mut xnew);
                self.k.swap(0, 6);
                self.steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac).min(self.h * 5.0);
                }
            } else {
                if !err.is_finite() {
                    self.h = h * 0.1;
                } else {
                    self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                }
                self.rejected += 1;
            }
        }
        Ok(())
    }
}

/// `exp(A)` for a small dense matrix by scaling and squaring with a Taylor
/// polynomial.
pub fn dense_expm(n: usize, a: &[C64]) -> Vec<C64> {
    let norm1 = (0..n).map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a_s: Vec<C64> = a.iter().map(|v| v * scale).collect();
    let mul = |x: &[C64], y: &[C64]| -> Vec<C64> {
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let xik = x[i * n + k];
                if xik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += xik * y[k * n + j];
                }
            }
        }
        out
    };
    let mut result = vec![ZERO; n * n];
    let mut term = vec![ZERO; n * n];
    for i in 0..n {
        result[i * n + i] = ONE;
        term[i * n + i] = ONE;
    }
    for k in 1..=20 {
        term = mul(&term, &a_s);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv);
        result.iter_mut().zip(&term).for_each(|(r, t)| *r += t);
    }
    for _ in 0..s {
        result = mul(&result, &result);
    }
    result
}

/// Krylov propagation of `x' = A x` over `dt`, sub-stepping until the
/// a-posteriori error estimate is below `tol` per step.
pub fn krylov_advance(a: &SparseOp, x: &mut Vec<C64>, dt: f64, m: usize, tol: f64) -> Result<usize> {
    let n = x.len();
    let m = m.min(n).max(1);
    let mut t = 0.0;
    let mut tau = dt;
    let mut steps = 0;
    while t < dt {
        tau = tau.min(dt - t);
        let beta = vecops::norm(x);
        if beta == 0.0 {
            return Ok(steps);
        }
        let mut v: Vec<Vec<C64>> = vec![x.iter().map(|c| c / beta).collect()];
        let mut h = vec![ZERO; (m + 1) * m];
        let mut dim = m;
        let mut w = vec![ZERO; n];
        let mut breakdown = false;
        for j in 0..m {
            a.apply_into(&v[j], &mut w);
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = vecops::dot(vi, &w);
                    h[i * m + j] += c;
                    vecops::axpy(-c, vi, &mut w);
                }
            }
            let hn = vecops::norm(&w);
            h[(j + 1) * m + j] = C64::new(hn, 0.0);
            if hn < 1e-13 * beta.max(1.0) {
                dim = j + 1;
                breakdown = true;
                break;
            }
            v.push(w.iter().map(|c| c / hn).collect());
        }
        loop {
            let hs: Vec<C64> = (0..dim * dim).map(|k| h[(k / dim) * m + k % dim] * tau).collect();
            let e = dense_expm(dim, &hs);
            let err = if breakdown {
                0.0
            } else {
                beta * h[dim * m + dim - 1].norm() * tau * e[(dim - 1) * dim].norm()
            };
            if err <= tol || tau < 1e-12 {
                let mut out = vec![ZERO; n];
                for (j, vj) in v.iter().enumerate().take(dim) {
                    vecops::axpy(e[j * dim] * beta, vj, &mut out);
                }
                *x = out;
                t += tau;
                steps += 1;
                if err < tol * 0.1 {
                    tau *= 1.5;
                }
                break;
            }
            tau *= 0.5;
        }
    }
    Ok(steps)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    /// Smallest eigenvalue seen across samples when positivity was checked.
    pub min_eigenvalue: Option<f64>,
    pub renormalizations: usize,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl ConservationReport {
    pub fn passes(&self) -> bool {
        self.max_trace_drift <= 1e-8
            && self.max_hermiticity_error <= 1e-8
            && self.min_eigenvalue.map_or(true, |m| m >= -1e-8)
    }
}

/// Snapshot observer: receives `(time, state)` at every sample time.
pub type Observer<'a> = dyn FnMut(f64, &DensityState) + 'a;

pub struct MasterRun {
    pub times: Vec<f64>,
    pub report: ConservationReport,
    pub reduced_dim: usize,
}

/// Evolves `rho0` under an assembled superoperator, calling `observe` at the
/// sample times.
pub fn evolve_master_with(
    l: &Superoperator,
    rho0: &DensityState,
    cfg: &EvolutionConfig,
    observe: &mut Observer<'_>,
) -> Result<MasterRun> {
    cfg.validate()?;
    let reduced = if cfg.reduce {
        l.reduce(&rho0.support())
    } else {
        Reduced { full_dim: l.dim(), keep: (0..l.dim()).collect(), matrix: l.matrix.clone() }
    };
    evolve_reduced(&reduced, rho0, cfg, observe)
}

/// As [`evolve_master_with`], building only the invariant subspace reached
/// from `rho0` (never assembling the full generator).
pub fn evolve_master_parts(
    parts: &LindbladParts,
    rho0: &DensityState,
    cfg: &EvolutionConfig,
    observe: &mut Observer<'_>,
) -> Result<MasterRun> {
    cfg.validate()?;
    let reduced = parts.assemble_reachable(&rho0.support());
    evolve_reduced(&reduced, rho0, cfg, observe)
}

/// Convenience wrapper returning every snapshot; meant for small systems.
pub fn evolve_master(l: &Superoperator, rho0: &DensityState, cfg: &EvolutionConfig) -> Result<(Vec<DensityState>, MasterRun)> {
    let mut snaps = Vec::new();
    let run = evolve_master_with(l, rho0, cfg, &mut |_, s| snaps.push(s.clone()))?;
    Ok((snaps, run))
}

pub fn evolve_reduced(
    reduced: &Reduced,
    rho0: &DensityState,
    cfg: &EvolutionConfig,
    observe: &mut Observer<'_>,
) -> Result<MasterRun> {
    let d = rho0.dim;
    if reduced.full_dim != d * d {
        return Err(Error::DimensionMismatch { expected: reduced.full_dim, got: d * d });
    }
    if !reduced.contains(&rho0.vec) {
        return Err(Error::InvalidParameter("initial state leaves the reduced subspace".into()));
    }
    let diag: Vec<usize> = reduced
        .keep
        .iter()
        .enumerate()
        .filter(|(_, &i)| i / d == i % d)
        .map(|(k, _)| k)
        .collect();
    let trace_of = |x: &[C64]| -> C64 { diag.iter().map(|&k| x[k]).sum() };
    let tr0 = trace_of(&reduced.restrict(&rho0.vec));
    let check_positivity = d <= 256;

    let mut x = reduced.restrict(&rho0.vec);
    let mut report = ConservationReport::default();
    let times = cfg.sample_times();
    let a = &reduced.matrix;
    let mut rk = Dopri5::new(x.len(), |u: &[C64], out: &mut [C64]| a.apply_into(u, out), cfg.rtol, cfg.atol);
    let mut t = 0.0;
    for &ts in &times {
        if ts > t {
            match cfg.method {
                Method::AdaptiveRk => rk.advance(&mut x, t, ts)?,
                Method::KrylovExpm => {
                    report.steps += krylov_advance(a, &mut x, ts - t, cfg.krylov_dim, cfg.atol)?;
                }
            }
            t = ts;
        }
        let drift = (trace_of(&x) - tr0).norm();
        report.max_trace_drift = report.max_trace_drift.max(drift);
        if drift > 1e-10 {
            let scale = tr0 / trace_of(&x);
            vecops::scale(scale, &mut x);
            report.renormalizations += 1;
        }
        let state = DensityState { dim: d, vec: reduced.embed(&x) };
        report.max_hermiticity_error = report.max_hermiticity_error.max(state.hermiticity_error());
        if check_positivity {
            let m = state.min_eigenvalue()?;
            report.min_eigenvalue = Some(report.min_eigenvalue.map_or(m, |v: f64| v.min(m)));
        }
        observe(ts, &state);
    }
    if cfg.method == Method::AdaptiveRk {
        report.steps = rk.steps;
        report.rejected_steps = rk.rejected;
    }
    Ok(MasterRun { times, report, reduced_dim: reduced.dim() })
}

/// Integrates `x' = A x` until the entrywise 1-norm of `A x` (an upper bound
/// on the trace norm of dρ/dτ) drops below `tol`, or `t_max` is reached.
pub fn integrate_to_stationarity(a: &SparseOp, x0: &[C64], tol: f64, t_max: f64) -> Result<(Vec<C64>, bool)> {
    let mut x = x0.to_vec();
    let mut rk = Dopri5::new(x.len(), |u: &[C64], out: &mut [C64]| a.apply_into(u, out), 1e-10, 1e-12);
    let mut t = 0.0;
    let chunk = 5.0;
    let mut deriv = vec![ZERO; x.len()];
    while t < t_max {
        rk.advance(&mut x, t, t + chunk)?;
        t += chunk;
        a.apply_into(&x, &mut deriv);
        if deriv.iter().map(|v| v.norm()).sum::<f64>() < tol {
            return Ok((x, true));
        }
    }
    Ok((x, false))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Plateau {
    pub mean: f64,
    pub max_deviation: f64,
    pub converged: bool,
}

/// Mean of the trailing window and whether it stays within tolerance.
pub fn detect_plateau(times: &[f64], values: &[f64], cfg: &PlateauConfig) -> Plateau {
    let t_end = *times.last().unwrap_or(&0.0);
    let t_start = t_end * (1.0 - cfg.window_fraction);
    let window: Vec<f64> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= t_start)
        .map(|(_, &v)| v)
        .collect();
    if window.is_empty() {
        return Plateau { mean: f64::NAN, max_deviation: f64::INFINITY, converged: false };
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let max_deviation = window.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    Plateau { mean, max_deviation, converged: max_deviation < cfg.tolerance }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub n_trajectories: usize,
    pub seed: u64,
    /// Resolution of the jump-time search.
    #[serde(default = "default_jump_resolution")]
    pub jump_time_resolution: f64,
    #[serde(default = "default_traj_rtol")]
    pub rtol: f64,
    #[serde(default = "default_traj_atol")]
    pub atol: f64,
}

fn default_jump_resolution() -> f64 {
    1e-8
}
fn default_traj_rtol() -> f64 {
    1e-8
}
fn default_traj_atol() -> f64 {
    1e-10
}

impl TrajectoryConfig {
    pub fn new(n_trajectories: usize, seed: u64) -> Self {
        TrajectoryConfig {
            n_trajectories,
            seed,
            jump_time_resolution: default_jump_resolution(),
            rtol: default_traj_rtol(),
            atol: default_traj_atol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        if !(self.jump_time_resolution > 0.0) {
            return Err(Error::InvalidParameter("jump-time resolution must be positive".into()));
        }
        Ok(())
    }
}

/// Ensemble means and standard errors, indexed `[observable][time]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<C64>>,
    pub se_re: Vec<Vec<f64>>,
    pub se_im: Vec<Vec<f64>>,
    pub n_trajectories: usize,
    pub total_jumps: usize,
}

/// splitmix64 finalizer, used to derive independent per-task seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trajectory_seed(seed: u64, index: usize) -> u64 {
    mix_seed(mix_seed(seed) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Wavefunction Monte Carlo: each trajectory evolves under
/// `H_eff = H − (i/2)Σ L_k†L_k` until its squared norm falls to a uniform
/// random target, then jumps through channel `k` with probability
/// `∝ ‖L_k ψ‖²`.
pub fn evolve_trajectories(
    h: &SparseOp,
    jumps: &[SparseOp],
    psi0: &[C64],
    cfg: &TrajectoryConfig,
    times: &[f64],
    observables: &[SparseOp],
) -> Result<TrajectoryEnsemble> {
    cfg.validate()?;
    let d = h.nrows();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi0.len() });
    }
    if (vecops::norm(psi0) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("initial state must be normalized".into()));
    }
    // x' = -i H_eff x
    let mut gen = h.scale(-I);
    for l in jumps {
        gen = gen.lincomb(ONE, &l.adjoint().matmul(l), C64::new(-0.5, 0.0));
    }

    let per_traj: Vec<Result<(Vec<Vec<C64>>, usize)>> = (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|idx| run_trajectory(&gen, jumps, psi0, cfg, times, observables, trajectory_seed(cfg.seed, idx)))
        .collect();

    // Welford updates in trajectory order keep the result schedule-independent.
    let n_obs = observables.len();
    let nt = times.len();
    let mut mean = vec![vec![ZERO; nt]; n_obs];
    let mut m2_re = vec![vec![0.0; nt]; n_obs];
    let mut m2_im = vec![vec![0.0; nt]; n_obs];
    let mut total_jumps = 0;
    for (k, r) in per_traj.into_iter().enumerate() {
        let (vals, nj) = r?;
        total_jumps += nj;
        let count = (k + 1) as f64;
        for o in 0..n_obs {
            for t in 0..nt {
                let v = vals[o][t];
                let delta = v - mean[o][t];
                mean[o][t] += delta / count;
                let after = v - mean[o][t];
                m2_re[o][t] += delta.re * after.re;
                m2_im[o][t] += delta.im * after.im;
            }
        }
    }
    let m = cfg.n_trajectories as f64;
    let se = |m2: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        m2.iter()
            .map(|row| {
                row.iter()
                    .map(|&s| if cfg.n_trajectories < 2 { 0.0 } else { (s.max(0.0) / (m - 1.0) / m).sqrt() })
                    .collect()
            })
            .collect()
    };
    Ok(TrajectoryEnsemble {
        times: times.to_vec(),
        se_re: se(&m2_re),
        se_im: se(&m2_im),
        mean,
        n_trajectories: cfg.n_trajectories,
        total_jumps,
    })
}

fn run_trajectory(
    gen: &SparseOp,
    jumps: &[SparseOp],
    psi0: &[C64],
    cfg: &TrajectoryConfig,
    times: &[f64],
    observables: &[SparseOp],
    seed: u64,
) -> Result<(Vec<Vec<C64>>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = psi0.to_vec();
    let mut target: f64 = rng.random();
    let mut rk = Dopri5::new(psi.len(), |u: &[C64], out: &mut [C64]| gen.apply_into(u, out), cfg.rtol, cfg.atol);
    let mut out = vec![vec![ZERO; times.len()]; observables.len()];
    let mut n_jumps = 0;
    let mut t = 0.0;
    let norm_sq = |x: &[C64]| x.iter().map(|v| v.norm_sqr()).sum::<f64>();

    for (ti, &ts) in times.iter().enumerate() {
        while t < ts {
            // Advance one adaptive step (clipped to the sample time).
            let start = psi.clone();
            let t0 = t;
            let h_try = if rk.h > 0.0 { rk.h.min(ts - t) } else { ts - t };
            let t1 = if rk.h > 0.0 { t0 + h_try } else { ts };
            rk.advance(&mut psi, t0, t1)?;
            if norm_sq(&psi) > target {
                t = t1;
                continue;
            }
            // The norm crossed the target inside [t0, t1]: bisect.
            let (mut lo, mut hi) = (0.0, t1 - t0);
            let mut trial = vec![ZERO; psi.len()];
            let mut at_hi = psi.clone();
            while hi - lo > cfg.jump_time_resolution {
                let mid = 0.5 * (lo + hi);
                sub_step(&mut rk, &start, mid, &mut trial);
                if norm_sq(&trial) > target {
                    lo = mid;
                } else {
                    hi = mid;
                    at_hi.copy_from_slice(&trial);
                }
            }
            psi = at_hi;
            t = t0 + hi;
            if norm_sq(&psi) < 1e-300 {
                return Err(Error::Numerical("trajectory norm collapsed".into()));
            }
            // Channel choice ∝ ‖L_k ψ‖².
            let weights: Vec<(Vec<C64>, f64)> = jumps
                .iter()
                .map(|l| {
                    let v = l.apply(&psi);
                    let w = norm_sq(&v);
                    (v, w)
                })
                .collect();
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                let mut chosen = weights.len() - 1;
                for (k, (_, w)) in weights.iter().enumerate() {
                    if r < *w {
                        chosen = k;
                        break;
                    }
                    r -= w;
                }
                let (v, w) = &weights[chosen];
                let s = 1.0 / w.sqrt();
                psi = v.iter().map(|c| c * s).collect();
                n_jumps += 1;
            } else {
                let s = 1.0 / norm_sq(&psi).sqrt();
                psi.iter_mut().for_each(|c| *c *= s);
            }
            target = rng.random();
            rk.h = 0.0;
        }
        let nrm = norm_sq(&psi);
        for (o, op) in observables.iter().enumerate() {
            out[o][ti] = op.expectation(&psi, &psi) / nrm;
        }
    }
    Ok((out, n_jumps))
}

/// Fixed sub-step of length `h` from `start` used in the jump-time search;
/// `h` never exceeds an accepted adaptive step, so its error is controlled.
fn sub_step<F: FnMut(&[C64], &mut [C64])>(rk: &mut Dopri5<F>, start: &[C64], h: f64, out: &mut [C64]) {
    let saved_h = rk.h;
    rk.fixed_step(start, h, out);
    rk.h = saved_h;
}

/// Expectation of each observable along a pure-state unitary evolution; used
/// as the zero-rate limit of the unraveling.
pub fn evolve_schrodinger(h: &SparseOp, psi0: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
    let gen = h.scale(-I);
    let mut psi = psi0.to_vec();
    let mut rk = Dopri5::new(psi.len(), |u: &[C64], out: &mut [C64]| gen.apply_into(u, out), 1e-10, 1e-12);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &ts in times {
        rk.advance(&mut psi, t, ts)?;
        t = ts;
        out.push(psi.clone());
    }
    Ok(out)
}
