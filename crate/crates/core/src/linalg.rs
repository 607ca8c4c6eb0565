//! Small dense and banded kernels: symmetric band inertia, banded LU with
//! partial pivoting, cyclic Jacobi for tiny symmetric problems, and
//! preconditioned conjugate gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dot, sqrt};
use crate::{Error, Result};

/// Symmetric matrix with half-bandwidth `p`; stores the lower band
/// `a[i][i−k]`, `k = 0..=p`, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * (p + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.p {
            0.0
        } else {
            self.data[i * (self.p + 1) + k]
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        assert!(k <= self.p, "entry ({i}, {j}) outside the band");
        self.data[i * (self.p + 1) + k] += v;
    }

    /// Number of eigenvalues strictly below `sigma`, via the signs of the
    /// `LDLᵀ` pivots of `A − σI` (Sylvester's law of inertia).
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.n;
        let p = self.p;
        let w = p + 1;
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let tiny = f64::EPSILON * scale;
        // l[i*w + k] holds L(i, i−k) for k ≥ 1; d[i] the pivots.
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut count = 0;
        for j in 0..n {
            let lo = j.saturating_sub(p);
            let mut dj = self.data[j * w] - sigma;
            for k in lo..j {
                let ljk = l[j * w + (j - k)];
                dj -= ljk * ljk * d[k];
            }
            if dj == 0.0 {
                dj = -tiny;
            }
            d[j] = dj;
            if dj < 0.0 {
                count += 1;
            }
            for i in (j + 1)..n.min(j + p + 1) {
                let mut s = self.data[i * w + (i - j)];
                let lo_i = i.saturating_sub(p).max(lo);
                for k in lo_i..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)] * d[k];
                }
                l[i * w + (i - j)] = s / dj;
            }
        }
        count
    }

    /// Banded LU factorization of `A − σI`.
    pub fn shifted_lu(&self, sigma: f64) -> BandLu {
        let mut lu = BandLu::zeros(self.n, self.p, self.p);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.p);
            let hi = (i + self.p).min(self.n - 1);
            for j in lo..=hi {
                let v = self.get(i, j) - if i == j { sigma } else { 0.0 };
                lu.set(i, j, v);
            }
        }
        lu.factor();
        lu
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.p);
            let hi = (i + self.p).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let a = (i.saturating_sub(self.p)..=(i + self.p).min(self.n - 1))
                .filter(|&j| j != i)
                .map(|j| self.get(i, j).abs())
                .sum::<f64>();
            let c = self.get(i, i);
            lo = lo.min(c - a);
            hi = hi.max(c + a);
        }
        (lo, hi)
    }
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, factored as
/// `PA = LU` with row pivoting. Row `i` stores columns `i−kl ..= i+ku+kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * w],
            pivots: (0..n).collect(),
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width() + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    /// In-place factorization; zero pivots are replaced by `ε‖A‖` so that
    /// inverse iteration at an exact eigenvalue still proceeds.
    pub fn factor(&mut self) {
        let n = self.n;
        let span = self.ku + self.kl;
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in (k + 1)..=last {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.pivots[k] = p;
            let hi = (k + span).min(n - 1);
            if p != k {
                for j in k..=hi {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            if self.at(k, k) == 0.0 {
                self.set(k, k, f64::EPSILON * scale);
            }
            let pivot = self.at(k, k);
            for i in (k + 1)..=last {
                let f = self.at(i, k) / pivot;
                self.set(i, k, f);
                if f != 0.0 {
                    for j in (k + 1)..=hi {
                        let v = self.at(i, j) - f * self.at(k, j);
                        self.set(i, j, v);
                    }
                }
            }
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let span = self.ku + self.kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            for i in (k + 1)..=last {
                b[i] -= self.at(i, k) * b[k];
            }
        }
        for k in (0..n).rev() {
            let hi = (k + span).min(n - 1);
            let mut s = b[k];
            for j in (k + 1)..=hi {
                s -= self.at(k, j) * b[j];
            }
            b[k] = s / self.at(k, k);
        }
    }
}

/// Eigen-decomposition of a small dense symmetric matrix (row-major `n×n`)
/// by cyclic Jacobi rotations. Returns ascending eigenvalues and the
/// matching eigenvectors as columns of a row-major matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= 1e-32 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + col] = v[k * n + src];
        }
    }
    (values, vectors)
}

/// A symmetric linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Approximate inverse `z ≈ A⁻¹ r` for preconditioned CG.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Diagonal (Jacobi) preconditioner.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag
                .iter()
                .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖` (absolute when `b = 0`).
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

/// Preconditioned conjugate gradients from the initial guess in `x`.
pub fn conjugate_gradient<A, P>(
    a: &A,
    pc: &P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = a.dim();
    let bnorm = sqrt(dot(b, b));
    let denom = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    let mut res = sqrt(dot(&r, &r)) / denom;
    history.push(res);
    if res <= tol {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: res,
            history,
        });
    }
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
                history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = sqrt(dot(&r, &r)) / denom;
        history.push(res);
        if res <= tol {
            // Confirm with the true residual to guard against drift.
            a.apply(x, &mut ap);
            let true_res = sqrt(
                b.iter()
                    .zip(&ap)
                    .map(|(bi, ai)| (bi - ai) * (bi - ai))
                    .sum::<f64>(),
            ) / denom;
            if true_res <= tol {
                return Ok(CgOutcome {
                    iterations: it,
                    relative_residual: true_res,
                    history,
                });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: res,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, p: usize, seed: u64) -> SymBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBand::zeros(n, p);
        for i in 0..n {
            for k in 0..=p.min(i) {
                a.add(i, i - k, rng.gen_range(-1.0..1.0));
            }
        }
        a
    }

    fn dense(a: &SymBand) -> Vec<f64> {
        let n = a.dim();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = a.get(i, j);
            }
        }
        d
    }

    #[test]
    fn inertia_matches_jacobi() {
        for seed in 0..5 {
            let a = random_band(24, 2, seed);
            let (vals, _) = jacobi_eigen(&dense(&a), 24);
            for sigma in [-1.5, -0.3, 0.0, 0.4, 1.1, 2.5] {
                let want = vals.iter().filter(|v| **v < sigma).count();
                assert_eq!(a.count_below(sigma), want, "seed {seed} sigma {sigma}");
            }
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = random_band(10, 3, 9);
        let d = dense(&a);
        let (vals, vecs) = jacobi_eigen(&d, 10);
        for c in 0..10 {
            let v: Vec<f64> = (0..10).map(|k| vecs[k * 10 + c]).collect();
            let mut av = vec![0.0; 10];
            a.mul_vec(&v, &mut av);
            for k in 0..10 {
                assert!((av[k] - vals[c] * v[k]).abs() < 1e-12);
            }
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn band_lu_solves() {
        let a = random_band(40, 2, 4);
        let lu = a.shifted_lu(0.123);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; 40];
        a.mul_vec(&x, &mut b);
        for (bi, xi) in b.iter_mut().zip(&x) {
            *bi -= 0.123 * xi;
        }
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    struct Dense(Vec<f64>, usize);
    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.1
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.1 {
                y[i] = (0..self.1).map(|j| self.0[i * self.1 + j] * x[j]).sum();
            }
        }
    }

    #[test]
    fn cg_on_spd() {
        let n = 30;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0 + i as f64;
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
                a[(i + 1) * n + i] = -1.0;
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        let op = Dense(a, n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let out = conjugate_gradient(&op, &Jacobi::new(&diag), &b, &mut x, 1e-12, 200).unwrap();
        assert!(out.relative_residual <= 1e-12);
        let mut ax = vec![0.0; n];
        op.apply(&x, &mut ax);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let mut x = vec![0.0; n];
        let err = conjugate_gradient(&op, &Jacobi::new(&diag), &b, &mut x, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 2, .. }));
    }
}
