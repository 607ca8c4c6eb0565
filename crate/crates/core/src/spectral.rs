//! The weighted eigenvalue problem `−(κu')' = λκu` on the circle.
//!
//! The operator is discretized in conservative flux form on a uniform
//! cell-centered grid. Eigenvalues come from bisection on inertia counts of
//! the symmetrically scaled matrix (reordered to bandwidth two), eigenvectors
//! from block inverse iteration followed by a Rayleigh–Ritz cleanup.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::geometry::WeightSpec;
use crate::linalg::{jacobi_eigen, SymBand};
use crate::math::{cos, dot, sqrt, TAU};
use crate::{Error, Result};

/// Relative tolerance for grouping eigenvalues into one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Projected norm above which a symmetry sector counts as nontrivial.
pub const PARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleGrid {
    pub n: usize,
    pub theta_centers: Vec<f64>,
    pub theta_faces: Vec<f64>,
}

impl CircleGrid {
    /// `n` cells with centers `(i + ½)h` and faces `(i + 1)h`, `h = 2π/n`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 {
            return Err(invalid!("circle grid needs n ≥ 16 cells, got {n}"));
        }
        let h = TAU / n as f64;
        Ok(Self {
            n,
            theta_centers: (0..n).map(|i| (i as f64 + 0.5) * h).collect(),
            theta_faces: (0..n).map(|i| (i as f64 + 1.0) * h).collect(),
        })
    }

    pub fn h(&self) -> f64 {
        TAU / self.n as f64
    }
}

/// `K` (periodic tridiagonal, flux form) and `M = diag(κ at centers)`.
///
/// `face_kappa[i]` is `κ` on the face between cells `i` and `i + 1 (mod n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedOperator {
    pub grid: CircleGrid,
    pub face_kappa: Vec<f64>,
    pub center_kappa: Vec<f64>,
    /// `κ` is invariant under both coordinate reflections on this grid.
    pub even: bool,
}

pub fn assemble_operator(spec: &WeightSpec, grid: &CircleGrid) -> Result<WeightedOperator> {
    if spec.d != 3 {
        return Err(Error::UnsupportedDimension(spec.d));
    }
    WeightedOperator::from_fn(grid, |t| spec.angular(t))
}

impl WeightedOperator {
    /// Operator for an arbitrary positive weight `κ(θ)`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &CircleGrid, kappa: F) -> Result<Self> {
        let face_kappa: Vec<f64> = grid.theta_faces.iter().map(|&t| kappa(t)).collect();
        let center_kappa: Vec<f64> = grid.theta_centers.iter().map(|&t| kappa(t)).collect();
        if let Some(v) = face_kappa
            .iter()
            .chain(&center_kappa)
            .find(|v| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::Domain(format!(
                "weight must be positive and finite, found {v}"
            )));
        }
        let even = grid.n.is_multiple_of(2) && is_even(&face_kappa, &center_kappa);
        Ok(Self {
            grid: grid.clone(),
            face_kappa,
            center_kappa,
            even,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    fn inv_h2(&self) -> f64 {
        let h = self.grid.h();
        1.0 / (h * h)
    }

    /// `(K u)_i`.
    pub fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n();
        let s = self.inv_h2();
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let right = self.face_kappa[i] * (u[ip] - u[i]);
            let left = self.face_kappa[im] * (u[i] - u[im]);
            out[i] = -(right - left) * s;
        }
    }

    /// `uᵀ K v` summed face by face.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        for i in 0..n {
            let ip = (i + 1) % n;
            total += self.face_kappa[i] * (u[ip] - u[i]) * (v[ip] - v[i]);
        }
        total * self.inv_h2()
    }

    /// `uᵀ M v`.
    pub fn mass(&self, u: &[f64], v: &[f64]) -> f64 {
        self.center_kappa
            .iter()
            .zip(u.iter().zip(v))
            .map(|(k, (a, b))| k * a * b)
            .sum()
    }

    /// `⟨u, v⟩ = (1/n) Σ κ u v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass(u, v) / self.n() as f64
    }

    /// Dense `K` (row-major), for inspection and small-size tests.
    pub fn dense_stiffness(&self) -> Vec<f64> {
        let n = self.n();
        let s = self.inv_h2();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            let ip = (i + 1) % n;
            let c = self.face_kappa[i] * s;
            k[i * n + i] += c;
            k[ip * n + ip] += c;
            k[i * n + ip] -= c;
            k[ip * n + i] -= c;
        }
        k
    }

    /// `(R₂u)_j = u(−θ_j)`: the reflection `ξ₂ → −ξ₂`.
    pub fn reflect_second(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|j| u[n - 1 - j]).collect()
    }

    /// `(R₁u)_j = u(π − θ_j)`: the reflection `ξ₁ → −ξ₁` (even `n`).
    pub fn reflect_first(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        let half = n / 2;
        (0..n).map(|j| u[(half + n - 1 - j) % n]).collect()
    }

    /// Bandwidth-two reordering of the scaled matrix `M^{−½} K M^{−½}`:
    /// position `2k` holds cell `k`, position `2k+1` holds cell `n−1−k`.
    fn scaled_band(&self) -> (SymBand, Vec<usize>) {
        let n = self.n();
        let mut order = Vec::with_capacity(n);
        for k in 0..n.div_ceil(2) {
            order.push(k);
            if n - 1 - k != k {
                order.push(n - 1 - k);
            }
        }
        order.truncate(n);
        let mut pos = vec![0usize; n];
        for (p, &c) in order.iter().enumerate() {
            pos[c] = p;
        }
        let s = self.inv_h2();
        let mut band = SymBand::zeros(n, 2);
        for i in 0..n {
            let ip = (i + 1) % n;
            let c = self.face_kappa[i] * s;
            let (mi, mp) = (self.center_kappa[i], self.center_kappa[ip]);
            band.add(pos[i], pos[i], c / mi);
            band.add(pos[ip], pos[ip], c / mp);
            band.add(pos[i], pos[ip], -c / sqrt(mi * mp));
        }
        (band, order)
    }
}

fn is_even(face: &[f64], center: &[f64]) -> bool {
    let n = center.len();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let half = n / 2;
    (0..n).all(|j| {
        close(center[j], center[n - 1 - j])
            && close(center[j], center[(half + n - 1 - j) % n])
            && close(face[j], face[(2 * n - 2 - j) % n])
            && close(face[j], face[(half + 2 * n - 2 - j) % n])
    })
}

/// Parity row for one eigenvalue: entry `j` tells whether the eigenspace has
/// a member odd in `ξ_{j+1}` and even in the other coordinate.
pub type ParityRow = Vec<bool>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// κ-orthonormal grid functions, `⟨Y_a, Y_b⟩ = δ_ab`.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// Sizes of consecutive eigenvalue clusters.
    pub multiplicities: Vec<usize>,
    /// Per eigenvalue; empty when the weight is not reflection-even.
    pub parity: Vec<ParityRow>,
    /// `‖KY − λMY‖ / ‖MY‖` per pair.
    pub residuals: Vec<f64>,
    pub center_kappa: Vec<f64>,
    pub even: bool,
}

impl Spectrum {
    /// Index range of the cluster containing eigenvalue `index`.
    pub fn cluster(&self, index: usize) -> core::ops::Range<usize> {
        let mut start = 0;
        for &size in &self.multiplicities {
            if index < start + size {
                return start..start + size;
            }
            start += size;
        }
        index..index + 1
    }

    /// Multiplicity of the first nonzero eigenvalue.
    pub fn lambda1_multiplicity(&self) -> usize {
        self.multiplicities.get(1).copied().unwrap_or(0)
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.center_kappa.len() as f64;
        self.center_kappa
            .iter()
            .zip(u.iter().zip(v))
            .map(|(k, (a, b))| k * a * b)
            .sum::<f64>()
            / n
    }
}

/// First `k` generalized eigenpairs of `K u = λ M u`, ascending.
///
/// `k` is raised if needed so that the last cluster is complete.
pub fn solve_spectrum(op: &WeightedOperator, k: usize) -> Result<Spectrum> {
    let n = op.n();
    if k == 0 || k > n {
        return Err(invalid!(
            "requested {k} eigenpairs from an operator of size {n}"
        ));
    }
    let (band, order) = op.scaled_band();
    let (_, upper) = band.gershgorin();

    let bisect = |t: usize| -> f64 {
        let mut lo = -1.0;
        let mut hi = upper + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if band.count_below(mid) > t {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-13 * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let mut approx: Vec<f64> = (0..k).map(bisect).collect();
    while approx.len() < n {
        let last = *approx.last().unwrap();
        let next = bisect(approx.len());
        if next - last <= CLUSTER_TOL * last.abs().max(1.0) {
            approx.push(next);
        } else {
            break;
        }
    }
    let k = approx.len();
    let clusters = cluster_sizes(&approx);

    // Block inverse iteration in the scaled, reordered variables.
    let mut seed = 0x9E37_79B9_7F4A_7C15u64;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut start = 0;
    for &size in &clusters {
        let sigma = approx[start..start + size].iter().sum::<f64>() / size as f64;
        let lu = band.shifted_lu(sigma);
        let mut block: Vec<Vec<f64>> = (0..size)
            .map(|_| (0..n).map(|_| next_uniform(&mut seed)).collect())
            .collect();
        for _ in 0..6 {
            for v in block.iter_mut() {
                lu.solve(v);
            }
            orthonormalize(&mut block, dot);
        }
        vectors.extend(block);
        start += size;
    }

    // Back to grid functions u = √n M^{−½} y in the natural cell order.
    let mut funcs: Vec<Vec<f64>> = vectors
        .iter()
        .map(|y| {
            let mut u = vec![0.0; n];
            for (p, &cell) in order.iter().enumerate() {
                u[cell] = y[p] / sqrt(op.center_kappa[cell]);
            }
            u
        })
        .collect();

    // Rayleigh–Ritz over the whole computed subspace.
    orthonormalize(&mut funcs, |a, b| op.inner(a, b));
    orthonormalize(&mut funcs, |a, b| op.inner(a, b));
    let mut h = vec![0.0; k * k];
    let nf = n as f64;
    for a in 0..k {
        for b in a..k {
            let e = op.energy(&funcs[a], &funcs[b]) / nf;
            h[a * k + b] = e;
            h[b * k + a] = e;
        }
    }
    let (_, rot) = jacobi_eigen(&h, k);
    let mut funcs = rotate(&funcs, &rot, k);

    if op.even {
        let mut start = 0;
        for &size in &clusters {
            if size > 1 {
                align_with_reflections(op, &mut funcs[start..start + size]);
            }
            start += size;
        }
    }
    for u in funcs.iter_mut() {
        fix_sign(u);
    }

    let eigenvalues: Vec<f64> = funcs
        .iter()
        .map(|u| op.energy(u, u) / op.mass(u, u))
        .collect();
    let mut residuals = Vec::with_capacity(k);
    let mut ku = vec![0.0; n];
    for (u, &lam) in funcs.iter().zip(&eigenvalues) {
        op.apply_stiffness(u, &mut ku);
        let mut r2 = 0.0;
        let mut m2 = 0.0;
        for i in 0..n {
            let mu = op.center_kappa[i] * u[i];
            let r = ku[i] - lam * mu;
            r2 += r * r;
            m2 += mu * mu;
        }
        residuals.push(sqrt(r2 / m2));
    }
    if let Some((i, r)) = residuals.iter().enumerate().find(|(_, r)| !(**r <= 1e-8)) {
        return Err(Error::NoConvergence {
            iterations: 6,
            residual: *r,
            history: vec![i as f64, *r],
        });
    }

    let mut spectrum = Spectrum {
        multiplicities: cluster_sizes(&eigenvalues),
        eigenvalues,
        eigenfunctions: funcs,
        parity: Vec::new(),
        residuals,
        center_kappa: op.center_kappa.clone(),
        even: op.even,
    };
    if op.even {
        let rows = (0..k)
            .map(|i| {
                parity_analysis_with(op, &spectrum, i)
                    .map(|r| r.sectors.iter().map(|s| s.nontrivial).collect())
            })
            .collect::<Result<Vec<ParityRow>>>()?;
        spectrum.parity = rows;
    }
    Ok(spectrum)
}

fn cluster_sizes(values: &[f64]) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i + 1;
        while j < values.len()
            && values[j] - values[j - 1] <= CLUSTER_TOL * values[j - 1].abs().max(1.0)
        {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

fn next_uniform(state: &mut u64) -> f64 {
    // xorshift64*, only used for deterministic start vectors.
    *state ^= *state >> 12;
    *state ^= *state << 25;
    *state ^= *state >> 27;
    let x = state.wrapping_mul(0x2545_F491_4F6C_DD1D);
    (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn orthonormalize<F: Fn(&[f64], &[f64]) -> f64>(vs: &mut [Vec<f64>], ip: F) {
    for i in 0..vs.len() {
        for j in 0..i {
            let (done, rest) = vs.split_at_mut(i);
            let c = ip(&rest[0], &done[j]);
            for (a, b) in rest[0].iter_mut().zip(&done[j]) {
                *a -= c * b;
            }
        }
        let len = sqrt(ip(&vs[i], &vs[i]));
        for a in vs[i].iter_mut() {
            *a /= len;
        }
    }
}

/// Columns of `rot` (row-major `k×k`) applied to the basis `vs`.
fn rotate(vs: &[Vec<f64>], rot: &[f64], k: usize) -> Vec<Vec<f64>> {
    let n = vs[0].len();
    (0..k)
        .map(|c| {
            let mut out = vec![0.0; n];
            for (a, v) in vs.iter().enumerate() {
                let w = rot[a * k + c];
                if w != 0.0 {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += w * x;
                    }
                }
            }
            out
        })
        .collect()
}

/// Rotates a degenerate cluster onto joint eigenvectors of the two
/// reflections, ordered (odd,odd), (odd in ξ₁), (odd in ξ₂), (even,even).
fn align_with_reflections(op: &WeightedOperator, block: &mut [Vec<f64>]) {
    let c = block.len();
    let images: Vec<Vec<f64>> = block
        .iter()
        .map(|u| {
            let r1 = op.reflect_first(u);
            let r2 = op.reflect_second(u);
            r1.iter().zip(&r2).map(|(a, b)| a + 0.5 * b).collect()
        })
        .collect();
    let mut s = vec![0.0; c * c];
    for a in 0..c {
        for b in 0..c {
            s[a * c + b] =
                0.5 * (op.inner(&block[a], &images[b]) + op.inner(&block[b], &images[a]));
        }
    }
    let (_, rot) = jacobi_eigen(&s, c);
    let rotated = rotate(block, &rot, c);
    for (dst, src) in block.iter_mut().zip(rotated) {
        *dst = src;
    }
}

/// Makes the first entry with at least half the maximal magnitude positive.
fn fix_sign(u: &mut [f64]) {
    let max = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(v) = u.iter().find(|v| v.abs() >= 0.5 * max) {
        if *v < 0.0 {
            for x in u.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// `(uᵀKu)/(uᵀMu)`.
pub fn rayleigh_quotient(u: &[f64], op: &WeightedOperator) -> Result<f64> {
    if u.len() != op.n() {
        return Err(invalid!(
            "grid function has {} entries, expected {}",
            u.len(),
            op.n()
        ));
    }
    let m = op.mass(u, u);
    if !(m > 0.0) {
        return Err(invalid!("trial function has zero weighted norm"));
    }
    Ok(op.energy(u, u) / m)
}

/// One step of Richardson extrapolation for an error `∝ h^order`, where
/// `fine` uses a grid `ratio` times finer than `coarse`.
pub fn richardson(coarse: f64, fine: f64, ratio: f64, order: f64) -> f64 {
    let f = libm::pow(ratio, order);
    (f * fine - coarse) / (f - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorResult {
    /// 1-based coordinate index `j`.
    pub coordinate: usize,
    /// Largest norm of the projection of a unit eigenspace member.
    pub projected_norm: f64,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub eigen_index: usize,
    pub eigenvalue: f64,
    pub cluster: (usize, usize),
    pub sectors: Vec<SectorResult>,
    pub property_o: bool,
}

/// Projects the eigenspace of eigenvalue `eigen_index` onto the sectors
/// "odd in `ξ_j`, even in the other coordinate" by reflection averaging.
pub fn parity_analysis(spectrum: &Spectrum, eigen_index: usize) -> Result<ParityReport> {
    if !spectrum.even {
        return Err(Error::Precondition(
            "weight is not even in every coordinate; reflections do not commute with the operator"
                .into(),
        ));
    }
    let n = spectrum.center_kappa.len();
    let grid = CircleGrid::new(n)?;
    let op = WeightedOperator {
        face_kappa: spectrum.center_kappa.clone(),
        center_kappa: spectrum.center_kappa.clone(),
        grid,
        even: true,
    };
    parity_analysis_with(&op, spectrum, eigen_index)
}

fn parity_analysis_with(
    op: &WeightedOperator,
    spectrum: &Spectrum,
    eigen_index: usize,
) -> Result<ParityReport> {
    if eigen_index >= spectrum.eigenvalues.len() {
        return Err(invalid!(
            "eigen index {eigen_index} beyond the {} computed pairs",
            spectrum.eigenvalues.len()
        ));
    }
    let range = spectrum.cluster(eigen_index);
    let block = &spectrum.eigenfunctions[range.clone()];
    let c = block.len();
    let mut sectors = Vec::with_capacity(2);
    for coordinate in 1..=2 {
        // Sector projector: ½(1 − R_j) · ½(1 + R_other).
        let projected: Vec<Vec<f64>> = block
            .iter()
            .map(|u| {
                let (odd, even) = if coordinate == 1 {
                    (op.reflect_first(u), op.reflect_second(u))
                } else {
                    (op.reflect_second(u), op.reflect_first(u))
                };
                let even_odd = if coordinate == 1 {
                    op.reflect_second(&odd)
                } else {
                    op.reflect_first(&odd)
                };
                (0..u.len())
                    .map(|i| 0.25 * (u[i] - odd[i] + even[i] - even_odd[i]))
                    .collect()
            })
            .collect();
        let mut g = vec![0.0; c * c];
        for a in 0..c {
            for b in 0..c {
                g[a * c + b] = spectrum.inner(&projected[a], &projected[b]);
            }
        }
        let (vals, _) = jacobi_eigen(&g, c);
        let norm = sqrt(vals.last().copied().unwrap_or(0.0).max(0.0));
        sectors.push(SectorResult {
            coordinate,
            projected_norm: norm,
            nontrivial: norm > PARITY_TOL,
        });
    }
    let property_o = sectors.iter().any(|s| s.nontrivial);
    Ok(ParityReport {
        eigen_index,
        eigenvalue: spectrum.eigenvalues[eigen_index],
        cluster: (range.start, range.end),
        sectors,
        property_o,
    })
}

/// The perturbation `b` built from a weight with `A = ∅` (`d = 3`):
/// `b = 2[κ₁|ξ₁|^m − (1 − (1 − ξ₁²)^{m/2})κ₂] / (ε₀κ₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedWeight {
    pub spec: WeightSpec,
    pub eps0: f64,
    pub sup_norm: f64,
}

impl PerturbedWeight {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        let m = self.spec.m;
        let k = &self.spec.kappa;
        let last = k[k.len() - 1];
        let head = &xi[..xi.len() - 1];
        let s2: f64 = head.iter().map(|x| x * x).sum();
        let sm: f64 = head
            .iter()
            .zip(k)
            .map(|(x, ki)| ki * libm::pow(x.abs(), m))
            .sum();
        let tail = 1.0 - libm::pow((1.0 - s2).max(0.0), m / 2.0);
        2.0 * (sm - tail * last) / (self.eps0 * last)
    }

    pub fn eval_angle(&self, theta: f64) -> f64 {
        self.eval(&[cos(theta), libm::sin(theta)])
    }

    /// `μ = ε₀/2`, at which `1 + μb = κ/κ_{d−1}`.
    pub fn matching_mu(&self) -> f64 {
        0.5 * self.eps0
    }
}

pub fn perturbed_weight_b(spec: &WeightSpec, eps0: f64) -> Result<PerturbedWeight> {
    if !spec.set_a.is_empty() {
        return Err(Error::Unsupported(
            "the perturbation b requires setA = ∅".into(),
        ));
    }
    if spec.d != 3 {
        return Err(Error::UnsupportedDimension(spec.d));
    }
    if !(eps0 > 0.0) {
        return Err(invalid!("eps0 = {eps0} must be positive"));
    }
    if spec.kappa.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Precondition(
            "coordinates must be ordered with κ_i ≥ κ_{i+1}".into(),
        ));
    }
    let mut pw = PerturbedWeight {
        spec: spec.clone(),
        eps0,
        sup_norm: 0.0,
    };
    let last = spec.kappa[spec.kappa.len() - 1];
    let samples = 100_000;
    let mut sup: f64 = 0.0;
    for i in 0..samples {
        let t = TAU * i as f64 / samples as f64;
        let xi = [cos(t), libm::sin(t)];
        let b = pw.eval(&xi);
        sup = sup.max(b.abs());
        let lhs = 1.0 + 0.5 * eps0 * b;
        let rhs = spec.kappa_at(&xi) / last;
        if (lhs - rhs).abs() > 1e-12 * rhs.max(1.0) {
            return Err(Error::Degenerate(format!(
                "1 + (ε₀/2)b = {lhs} differs from κ/κ_(d−1) = {rhs} at θ = {t}"
            )));
        }
    }
    pw.sup_norm = sup;
    Ok(pw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPoint {
    pub mu: f64,
    pub lambda1: Option<f64>,
    pub property_o: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub points: Vec<ContinuationPoint>,
    /// Largest run of consecutive swept `μ` containing the value closest to
    /// zero on which property O holds; `None` if it fails there.
    pub persistent_interval: Option<(f64, f64)>,
}

/// Spectrum and parity of the weight `1 + μb(θ)` on an `n`-cell grid.
pub fn continuation_point<B: Fn(f64) -> f64>(
    b: &B,
    mu: f64,
    n: usize,
) -> Result<ContinuationPoint> {
    let grid = CircleGrid::new(n)?;
    let op = match WeightedOperator::from_fn(&grid, |t| 1.0 + mu * b(t)) {
        Ok(op) => op,
        Err(Error::Domain(msg)) => {
            return Ok(ContinuationPoint {
                mu,
                lambda1: None,
                property_o: None,
                note: Some(format!("skipped: {msg}")),
            })
        }
        Err(e) => return Err(e),
    };
    let spectrum = solve_spectrum(&op, 3)?;
    let lambda1 = spectrum.eigenvalues[1];
    if !op.even {
        return Ok(ContinuationPoint {
            mu,
            lambda1: Some(lambda1),
            property_o: None,
            note: Some("weight not even; parity undefined".into()),
        });
    }
    let report = parity_analysis_with(&op, &spectrum, 1)?;
    Ok(ContinuationPoint {
        mu,
        lambda1: Some(lambda1),
        property_o: Some(report.property_o),
        note: None,
    })
}

/// Summarizes per-`μ` results (sorted by `μ`).
pub fn summarize_continuation(mut points: Vec<ContinuationPoint>) -> ContinuationReport {
    points.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    let holds = |p: &ContinuationPoint| p.property_o == Some(true);
    let anchor = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mu.abs().total_cmp(&b.1.mu.abs()))
        .map(|(i, _)| i);
    let persistent_interval = anchor.filter(|&i| holds(&points[i])).map(|i| {
        let mut lo = i;
        while lo > 0 && holds(&points[lo - 1]) {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < points.len() && holds(&points[hi + 1]) {
            hi += 1;
        }
        (points[lo].mu, points[hi].mu)
    });
    ContinuationReport {
        points,
        persistent_interval,
    }
}

/// Runs the continuation sequentially over `mu_values`.
pub fn property_o_continuation<B: Fn(f64) -> f64>(
    b: &B,
    mu_values: &[f64],
    n: usize,
) -> Result<ContinuationReport> {
    let points = mu_values
        .iter()
        .map(|&mu| continuation_point(b, mu, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_continuation(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sin;

    fn cube4() -> WeightSpec {
        WeightSpec::sum_of_powers(4.0, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_weight_is_the_periodic_laplacian() {
        let grid = CircleGrid::new(32).unwrap();
        let op = WeightedOperator::from_fn(&grid, |_| 1.0).unwrap();
        let k = op.dense_stiffness();
        let h2 = grid.h() * grid.h();
        for i in 0..32 {
            assert!((k[i * 32 + i] * h2 - 2.0).abs() < 1e-14);
            assert!((k[i * 32 + (i + 1) % 32] * h2 + 1.0).abs() < 1e-14);
            let row: f64 = (0..32).map(|j| k[i * 32 + j]).sum();
            assert_eq!(row, 0.0);
        }
        assert!(op.even);
    }

    #[test]
    fn symmetric_assembly() {
        let grid = CircleGrid::new(512).unwrap();
        let op = assemble_operator(&cube4(), &grid).unwrap();
        let k = op.dense_stiffness();
        for i in 0..512 {
            for j in 0..512 {
                assert_eq!(k[i * 512 + j], k[j * 512 + i]);
            }
        }
    }

    #[test]
    fn rejects_other_dimensions() {
        let grid = CircleGrid::new(32).unwrap();
        let spec = WeightSpec::sum_of_powers(2.0, vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(
            assemble_operator(&spec, &grid).unwrap_err(),
            Error::UnsupportedDimension(4)
        );
        assert!(CircleGrid::new(8).is_err());
    }

    #[test]
    fn circle_harmonics() {
        let grid = CircleGrid::new(256).unwrap();
        let op = WeightedOperator::from_fn(&grid, |_| 1.0).unwrap();
        let s = solve_spectrum(&op, 5).unwrap();
        assert_eq!(&s.multiplicities[..3], &[1, 2, 2]);
        let h = grid.h();
        for (i, k) in [(1, 1.0), (2, 1.0), (3, 2.0), (4, 2.0)] {
            let exact = (2.0 - 2.0 * cos(k * h)) / (h * h);
            assert!((s.eigenvalues[i] - exact).abs() < 1e-10 * exact);
        }
        assert!(s.eigenvalues[0].abs() < 1e-10);
        // Y₁ is aligned with cos θ (odd in ξ₁, even in ξ₂).
        let c: Vec<f64> = grid.theta_centers.iter().map(|&t| cos(t)).collect();
        let proj = s.inner(&s.eigenfunctions[1], &c);
        assert!((proj - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        for a in 0..5 {
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s.inner(&s.eigenfunctions[a], &s.eigenfunctions[b]) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rayleigh_examples() {
        let grid = CircleGrid::new(1024).unwrap();
        let op = WeightedOperator::from_fn(&grid, |_| 1.0).unwrap();
        let c: Vec<f64> = grid.theta_centers.iter().map(|&t| cos(t)).collect();
        let h = grid.h();
        let exact = (2.0 - 2.0 * cos(h)) / (h * h);
        assert!((rayleigh_quotient(&c, &op).unwrap() - exact).abs() < 1e-11);
        assert!((exact - 1.0).abs() < 1e-5);
        // Quadrature oracle for cos θ + 0.1 cos 2θ: (1 + 4·0.01)/(1 + 0.01).
        let u: Vec<f64> = grid
            .theta_centers
            .iter()
            .map(|&t| cos(t) + 0.1 * cos(2.0 * t))
            .collect();
        let q = rayleigh_quotient(&u, &op).unwrap();
        assert!((q - 1.04 / 1.01).abs() < 2e-5 && q > 1.0);
        assert!(rayleigh_quotient(&vec![0.0; 1024], &op).is_err());
    }

    #[test]
    fn perturbation_b_examples() {
        let s2 = WeightSpec::sum_of_powers(2.0, vec![1.0, 1.0]).unwrap();
        let pw = perturbed_weight_b(&s2, 0.1).unwrap();
        for i in 0..1000 {
            assert!(pw.eval_angle(i as f64 * 0.00628).abs() < 1e-12);
        }
        let pw = perturbed_weight_b(&cube4(), 0.1).unwrap();
        assert!((pw.sup_norm - 10.0).abs() < 1e-6);
        let t = core::f64::consts::FRAC_PI_4;
        assert!((pw.eval_angle(t).abs() - 10.0).abs() < 1e-12);
        let coupled = WeightSpec::isotropic(3, 2.0, 1.0).unwrap();
        assert!(perturbed_weight_b(&coupled, 0.1).is_err());
        let unordered = WeightSpec::sum_of_powers(4.0, vec![1.0, 2.0]).unwrap();
        assert!(perturbed_weight_b(&unordered, 0.1).is_err());
    }

    #[test]
    fn parity_for_constant_weight() {
        let grid = CircleGrid::new(128).unwrap();
        let op = WeightedOperator::from_fn(&grid, |_| 1.0).unwrap();
        let s = solve_spectrum(&op, 3).unwrap();
        let r = parity_analysis(&s, 1).unwrap();
        assert!(r.property_o && r.sectors.iter().all(|x| x.nontrivial));
        let r0 = parity_analysis(&s, 0).unwrap();
        assert!(!r0.property_o);
        assert_eq!(s.parity[1], vec![true, true]);
    }

    #[test]
    fn uneven_weight_rejects_parity() {
        let grid = CircleGrid::new(64).unwrap();
        let op = WeightedOperator::from_fn(&grid, |t| 2.0 + sin(t)).unwrap();
        assert!(!op.even);
        let s = solve_spectrum(&op, 3).unwrap();
        assert!(matches!(
            parity_analysis(&s, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn continuation_summary() {
        let b = |t: f64| cos(4.0 * t);
        let rep = property_o_continuation(&b, &[0.0, 0.2, 0.5, 1.5], 64).unwrap();
        assert!(rep.points[3].note.is_some());
        assert_eq!(rep.persistent_interval, Some((0.0, 0.5)));
    }
}
