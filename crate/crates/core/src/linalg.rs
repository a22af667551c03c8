//! Dense helpers and an implicitly restarted Arnoldi eigensolver.

use faer::prelude::*;
use faer::Mat;

use crate::error::{Error, Result};
use crate::sparse::{vecops, SparseOp, C64, ONE, ZERO};

/// Eigenvalues of a small dense matrix given in row-major order.
pub fn dense_eigenvalues(n: usize, data: &[C64]) -> Result<Vec<C64>> {
    let m = Mat::<C64>::from_fn(n, n, |i, j| data[i * n + j]);
    m.eigenvalues().map_err(|e| Error::Numerical(format!("dense eigensolver: {e:?}")))
}

pub fn sparse_eigenvalues_dense(op: &SparseOp) -> Result<Vec<C64>> {
    op.to_faer()
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("dense eigensolver: {e:?}")))
}

/// Eigenvalues of a Hermitian matrix (row-major), ascending.
pub fn hermitian_eigenvalues(n: usize, data: &[C64]) -> Result<Vec<f64>> {
    let m = Mat::<C64>::from_fn(n, n, |i, j| data[i * n + j]);
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver: {e:?}")))
}

/// Dense solve `A x = b` with partial pivoting.
pub fn dense_solve(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let m = Mat::<C64>::from_fn(n, n, |i, j| a[i * n + j]);
    let rhs = Mat::<C64>::from_fn(n, 1, |i, _| b[i]);
    let x = m.partial_piv_lu().solve(&rhs);
    (0..n).map(|i| x[(i, 0)]).collect()
}

/// Sparse LU of `A + shift·I`, reusable across right-hand sides.
pub struct ShiftedLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
}

impl ShiftedLu {
    pub fn new(a: &SparseOp, shift: C64) -> Result<Self> {
        let m = a.to_faer_shifted(shift)?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(ShiftedLu { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let rhs = Mat::<C64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    LargestReal,
    LargestMagnitude,
}

#[derive(Clone, Debug)]
pub struct ArnoldiOptions {
    pub nev: usize,
    pub ncv: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub which: Which,
}

impl ArnoldiOptions {
    pub fn new(nev: usize, which: Which) -> Self {
        ArnoldiOptions { nev, ncv: (2 * nev + 20).max(30), tol: 1e-12, max_restarts: 500, which }
    }
}

fn wanted_order(which: Which, vals: &[C64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    match which {
        Which::LargestReal => idx.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re)),
        Which::LargestMagnitude => idx.sort_by(|&a, &b| vals[b].norm().total_cmp(&vals[a].norm())),
    }
    idx
}

/// Implicitly restarted Arnoldi with exact shifts for `nev` eigenvalues of the
/// linear map `op` selected by `which`. Returns converged Ritz values sorted
/// in the `which` order.
pub fn arnoldi(
    n: usize,
    mut op: impl FnMut(&[C64], &mut [C64]),
    start: &[C64],
    opts: &ArnoldiOptions,
) -> Result<Vec<C64>> {
    let nev = opts.nev.min(n);
    let m = opts.ncv.min(n);
    if nev == 0 {
        return Ok(Vec::new());
    }
    if m <= nev + 1 || n <= 64 {
        // Small problems: a full Krylov basis is the dense problem.
        return small_dense(n, &mut op, nev, opts.which);
    }
    let k = (nev + (m - nev) / 2).min(m - 1);

    let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut h = vec![ZERO; (m + 1) * m];
    let hidx = |i: usize, j: usize| i * m + j;

    let mut v0 = start.to_vec();
    let nrm = vecops::norm(&v0);
    if nrm == 0.0 {
        return Err(Error::InvalidParameter("Arnoldi start vector is zero".into()));
    }
    vecops::scale(C64::new(1.0 / nrm, 0.0), &mut v0);
    v.push(v0);
    let mut kk = 0;
    let mut w = vec![ZERO; n];

    for _restart in 0..opts.max_restarts {
        // Extend the factorization from kk to m columns.
        for j in kk..m {
            op(&v[j], &mut w);
            for _pass in 0..2 {
                for (i, vi) in v.iter().enumerate().take(j + 1) {
                    let c = vecops::dot(vi, &w);
                    h[hidx(i, j)] += c;
                    vecops::axpy(-c, vi, &mut w);
                }
            }
            let beta = vecops::norm(&w);
            h[hidx(j + 1, j)] = C64::new(beta, 0.0);
            if beta < 1e-300 {
                // Invariant subspace: restart with a random-ish direction.
                let mut r: Vec<C64> = (0..n)
                    .map(|i| C64::new(((i * 7919 + j * 104729) % 1009) as f64 - 504.0, 0.0))
                    .collect();
                for vi in &v {
                    let c = vecops::dot(vi, &r);
                    vecops::axpy(-c, vi, &mut r);
                }
                let rn = vecops::norm(&r);
                vecops::scale(C64::new(1.0 / rn, 0.0), &mut r);
                h[hidx(j + 1, j)] = ZERO;
                if v.len() > j + 1 {
                    v[j + 1] = r;
                } else {
                    v.push(r);
                }
                continue;
            }
            let mut next = w.clone();
            vecops::scale(C64::new(1.0 / beta, 0.0), &mut next);
            if v.len() > j + 1 {
                v[j + 1] = next;
            } else {
                v.push(next);
            }
        }

        // Ritz pairs of the m×m Hessenberg matrix.
        let hm = Mat::<C64>::from_fn(m, m, |i, j| h[hidx(i, j)]);
        let eig = hm.eigen().map_err(|e| Error::Numerical(format!("Hessenberg eigensolver: {e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let vals: Vec<C64> = (0..m).map(|i| s[i]).collect();
        let order = wanted_order(opts.which, &vals);
        let beta = h[hidx(m, m - 1)].norm();
        let scale = h.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let converged = order[..nev].iter().all(|&i| {
            let col_norm: f64 = (0..m).map(|r| u[(r, i)].norm_sqr()).sum::<f64>().sqrt();
            let resid = beta * u[(m - 1, i)].norm() / col_norm;
            resid <= opts.tol * vals[i].norm().max(scale)
        });
        if converged {
            return Ok(order[..nev].iter().map(|&i| vals[i]).collect());
        }

        // Exact shifts: the unwanted Ritz values.
        let mut q = vec![ZERO; m * m];
        for i in 0..m {
            q[i * m + i] = ONE;
        }
        let mut hh: Vec<C64> = (0..m * m).map(|t| h[hidx(t / m, t % m)]).collect();
        for &ui in &order[k..] {
            shifted_qr_step(m, &mut hh, &mut q, vals[ui]);
        }

        // f_k = v_{m+1} β Q[m-1, k-1] + V Q[:, k] H[k, k-1]
        let fm: Vec<C64> = v[m].iter().map(|x| x * h[hidx(m, m - 1)]).collect();
        let mut new_v: Vec<Vec<C64>> = (0..=k)
            .map(|c| {
                let mut acc = vec![ZERO; n];
                for (r, vr) in v.iter().enumerate().take(m) {
                    let coeff = q[r * m + c];
                    if coeff != ZERO {
                        vecops::axpy(coeff, vr, &mut acc);
                    }
                }
                acc
            })
            .collect();
        let mut f = new_v.pop().unwrap();
        let hk = hh[k * m + k - 1];
        vecops::scale(hk, &mut f);
        vecops::axpy(q[(m - 1) * m + k - 1], &fm, &mut f);

        h.iter_mut().for_each(|x| *x = ZERO);
        for i in 0..k {
            for j in 0..k {
                h[hidx(i, j)] = hh[i * m + j];
            }
        }
        v = new_v;
        // Orthonormalize f against the kept basis and append it.
        let mut fv = f.clone();
        for _pass in 0..2 {
            for vi in &v {
                let c = vecops::dot(vi, &fv);
                vecops::axpy(-c, vi, &mut fv);
            }
        }
        let fvn = vecops::norm(&fv);
        if fvn > 1e-300 {
            vecops::scale(C64::new(1.0 / fvn, 0.0), &mut fv);
        }
        h[hidx(k, k - 1)] = C64::new(fvn, 0.0);
        v.push(fv);
        kk = k;
    }
    Err(Error::NotConverged(format!("Arnoldi did not converge after {} restarts", opts.max_restarts)))
}

fn small_dense(n: usize, op: &mut impl FnMut(&[C64], &mut [C64]), nev: usize, which: Which) -> Result<Vec<C64>> {
    let mut data = vec![ZERO; n * n];
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = ZERO);
        e[j] = ONE;
        op(&e, &mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
    let vals = dense_eigenvalues(n, &data)?;
    let order = wanted_order(which, &vals);
    Ok(order[..nev].iter().map(|&i| vals[i]).collect())
}

/// One shifted QR step `H - μI = QR, H ← RQ + μI` on an upper Hessenberg
/// matrix (row-major m×m), accumulating the unitary into `q`.
fn shifted_qr_step(m: usize, h: &mut [C64], q: &mut [C64], mu: C64) {
    for i in 0..m {
        h[i * m + i] -= mu;
    }
    let mut rots = Vec::with_capacity(m - 1);
    for j in 0..m - 1 {
        let a = h[j * m + j];
        let b = h[(j + 1) * m + j];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (ONE, ZERO) } else { (a / r, b / r) };
        // G = [[c̄, s̄], [-s, c]] acting on rows j, j+1.
        for col in 0..m {
            let x = h[j * m + col];
            let y = h[(j + 1) * m + col];
            h[j * m + col] = c.conj() * x + s.conj() * y;
            h[(j + 1) * m + col] = -s * x + c * y;
        }
        rots.push((c, s));
    }
    for (j, &(c, s)) in rots.iter().enumerate() {
        // Right-multiply by G† on columns j, j+1.
        for mat in [&mut *h, &mut *q] {
            for row in 0..m {
                let x = mat[row * m + j];
                let y = mat[row * m + j + 1];
                mat[row * m + j] = x * c + y * s;
                mat[row * m + j + 1] = -x * s.conj() + y * c.conj();
            }
        }
    }
    for i in 0..m {
        h[i * m + i] += mu;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> SparseOp {
        // Diagonal spectrum -0.01·k with an upper bidiagonal coupling: eigenvalues are the diagonal.
        SparseOp::from_triplets(
            n,
            n,
            (0..n)
                .map(|k| (k, k, C64::new(-0.01 * k as f64, 0.3 * ((k % 7) as f64 - 3.0))))
                .chain((0..n - 1).map(|k| (k, k + 1, C64::new(0.5, 0.1)))),
        )
    }

    #[test]
    fn largest_real_part_of_triangular_matrix() {
        let n = 300;
        let a = test_matrix(n);
        let start: Vec<C64> = (0..n).map(|i| C64::new(1.0, (i % 3) as f64)).collect();
        let vals = arnoldi(n, |x, y| a.apply_into(x, y), &start, &ArnoldiOptions::new(4, Which::LargestReal)).unwrap();
        for (k, v) in vals.iter().enumerate() {
            assert!((v.re + 0.01 * k as f64).abs() < 1e-9, "{k}: {v}");
        }
    }

    #[test]
    fn shift_invert_finds_eigenvalues_near_origin() {
        let n = 200;
        let a = test_matrix(n);
        let lu = ShiftedLu::new(&a, C64::new(1e-3, 0.0)).unwrap();
        let start = vec![ONE; n];
        let mu = arnoldi(n, |x, y| y.copy_from_slice(&lu.solve(x)), &start, &ArnoldiOptions::new(3, Which::LargestMagnitude)).unwrap();
        let lam: Vec<C64> = mu.iter().map(|m| ONE / m - C64::new(1e-3, 0.0)).collect();
        // Closest to the origin: the real eigenvalues −0.01k with k ≡ 3 (mod 7).
        for (l, k) in lam.iter().zip([3.0, 10.0, 17.0]) {
            assert!((l - C64::new(-0.01 * k, 0.0)).norm() < 1e-9, "{l}");
        }
    }

    #[test]
    fn qr_step_preserves_spectrum() {
        let m = 6;
        let mut h = vec![ZERO; m * m];
        for i in 0..m {
            for j in 0..m {
                if i <= j + 1 {
                    h[i * m + j] = C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.2);
                }
            }
        }
        let before = dense_eigenvalues(m, &h).unwrap();
        let mut q = vec![ZERO; m * m];
        for i in 0..m {
            q[i * m + i] = ONE;
        }
        shifted_qr_step(m, &mut h, &mut q, C64::new(0.3, -0.1));
        let after = dense_eigenvalues(m, &h).unwrap();
        for b in &before {
            assert!(after.iter().any(|a| (a - b).norm() < 1e-10));
        }
    }
}
