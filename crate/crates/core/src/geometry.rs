//! Inclusion geometry: the angular weight, gap height, explicit constants,
//! weighted norms/averages, curvilinear cubes and the thin-gap change of
//! variables.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::math::{cos, norm, powf, sin, sqrt, PI, TAU};
use crate::quadrature::GaussLegendre;
use crate::regression::linear_fit;
use crate::{Error, Result};

fn default_kappa0() -> f64 {
    1.0
}

/// Convexity configuration of the two inclusions near the contact point.
///
/// `set_a` and `set_b` hold 1-based coordinate indices partitioning
/// `{1, …, d−1}`. Coordinates in `set_a` enter through the coupled term
/// `κ₀(Σ κᵢ ξᵢ²)^{m/2}`, those in `set_b` through `Σ κⱼ |ξⱼ|^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub d: usize,
    pub m: f64,
    #[serde(default = "default_kappa0")]
    pub kappa0: f64,
    pub kappa: Vec<f64>,
    #[serde(rename = "setA", default)]
    pub set_a: Vec<usize>,
    #[serde(rename = "setB", default)]
    pub set_b: Vec<usize>,
}

impl WeightSpec {
    pub fn new(
        d: usize,
        m: f64,
        kappa0: f64,
        kappa: Vec<f64>,
        set_a: Vec<usize>,
        set_b: Vec<usize>,
    ) -> Result<Self> {
        let spec = Self {
            d,
            m,
            kappa0,
            kappa,
            set_a,
            set_b,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `κ(ξ) = Σⱼ κⱼ |ξⱼ|^m` with every coordinate in `B` (curvilinear cubes).
    pub fn sum_of_powers(m: f64, kappa: Vec<f64>) -> Result<Self> {
        let d = kappa.len() + 1;
        Self::new(d, m, 1.0, kappa, Vec::new(), (1..d).collect())
    }

    /// `κ(ξ) = κ₀ (Σ ξᵢ²)^{m/2} ≡ κ₀`, the rotationally symmetric case.
    pub fn isotropic(d: usize, m: f64, kappa0: f64) -> Result<Self> {
        Self::new(
            d,
            m,
            kappa0,
            alloc::vec![1.0; d.saturating_sub(1)],
            (1..d).collect(),
            Vec::new(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(invalid!("d = {} must be at least 3", self.d));
        }
        if !(self.m >= 2.0) || !self.m.is_finite() {
            return Err(invalid!("m = {} must be a finite real ≥ 2", self.m));
        }
        if !(self.kappa0 > 0.0) || !self.kappa0.is_finite() {
            return Err(invalid!("kappa0 = {} must be positive", self.kappa0));
        }
        let n = self.d - 1;
        if self.kappa.len() != n {
            return Err(invalid!(
                "kappa has {} entries, expected d−1 = {}",
                self.kappa.len(),
                n
            ));
        }
        if let Some(k) = self.kappa.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
            return Err(invalid!("kappa entry {k} must be positive"));
        }
        let mut seen = alloc::vec![false; n];
        for &i in self.set_a.iter().chain(&self.set_b) {
            if i == 0 || i > n {
                return Err(invalid!("coordinate index {i} outside 1..={n}"));
            }
            if seen[i - 1] {
                return Err(invalid!("coordinate index {i} listed twice in setA/setB"));
            }
            seen[i - 1] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(invalid!(
                "coordinate index {} missing from setA ∪ setB",
                i + 1
            ));
        }
        Ok(())
    }

    /// Number of tangential coordinates, `d − 1`.
    pub fn dim(&self) -> usize {
        self.d - 1
    }

    /// The homogeneous extension `κ(x/|x|)|x|^m`, valid for any `x`.
    pub fn homogeneous(&self, x: &[f64]) -> f64 {
        let m = self.m;
        let mut total = 0.0;
        if !self.set_a.is_empty() {
            let s: f64 = self
                .set_a
                .iter()
                .map(|&i| self.kappa[i - 1] * x[i - 1] * x[i - 1])
                .sum();
            total += self.kappa0 * powf(s, m / 2.0);
        }
        for &j in &self.set_b {
            total += self.kappa[j - 1] * powf(x[j - 1].abs(), m);
        }
        total
    }

    /// `κ(ξ)` without the unit-length check.
    #[inline]
    pub fn kappa_at(&self, xi: &[f64]) -> f64 {
        self.homogeneous(xi)
    }

    /// `κ(cos θ, sin θ)` for `d = 3`.
    #[inline]
    pub fn angular(&self, theta: f64) -> f64 {
        self.homogeneous(&[cos(theta), sin(theta)])
    }

    /// `true` when `κ` does not depend on the direction: `B = ∅` with equal
    /// `κᵢ`, or `m = 2` with all effective quadratic coefficients equal.
    pub fn is_constant(&self) -> bool {
        let a_equal = self
            .set_a
            .windows(2)
            .all(|w| self.kappa[w[0] - 1] == self.kappa[w[1] - 1]);
        if self.set_b.is_empty() {
            return a_equal;
        }
        if self.m == 2.0 {
            let mut coef = self
                .set_a
                .iter()
                .map(|&i| self.kappa0 * self.kappa[i - 1])
                .chain(self.set_b.iter().map(|&j| self.kappa[j - 1]));
            let first = coef.next().unwrap_or(0.0);
            return coef.all(|c| c == first);
        }
        false
    }
}

/// `κ(ξ)` for a unit vector `ξ ∈ S^{d−2}`.
pub fn kappa_weight(spec: &WeightSpec, xi: &[f64]) -> Result<f64> {
    if xi.len() != spec.dim() {
        return Err(invalid!(
            "xi has {} components, expected {}",
            xi.len(),
            spec.dim()
        ));
    }
    let len = norm(xi);
    if (len - 1.0).abs() > 1e-12 {
        return Err(invalid!("xi is not a unit vector (|xi| = {len})"));
    }
    Ok(spec.kappa_at(xi))
}

/// The explicit constants used for the height equivalence and the sandwich
/// bound `varrho ≤ κ ≤ theta1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub c0: f64,
    pub cbar0: f64,
    pub varrho: f64,
}

impl DerivedConstants {
    /// The lower bound `θ₃^{m/(1−m)}` on `κ` (equal to `varrho`).
    pub fn lower_bound(&self) -> f64 {
        self.varrho
    }
}

/// Evaluates `θ₁, θ₂, θ₃, c₀, c̄₀` and `ϱ = θ₃^{−m/(m−1)}`.
///
/// `θ₃` uses the exponent `(1/m) − 1`, so that `ϱ` equals the lower bound
/// `2^{−(m−2)/2} min{2^{−(m−2)(b−1)/2}, 1} min{κ₀ minᵢ κᵢ^{m/2}, minⱼ κⱼ}`.
pub fn derived_constants(spec: &WeightSpec) -> DerivedConstants {
    let ka: Vec<f64> = spec.set_a.iter().map(|&i| spec.kappa[i - 1]).collect();
    let kb: Vec<f64> = spec.set_b.iter().map(|&j| spec.kappa[j - 1]).collect();
    constants_from_parts(spec.m, spec.kappa0, &ka, &kb)
}

fn constants_from_parts(m: f64, k0: f64, ka: &[f64], kb: &[f64]) -> DerivedConstants {
    let a2: f64 = ka.iter().map(|k| k * k).sum();
    let a4: f64 = ka.iter().map(|k| k * k * k * k).sum();
    let b2: f64 = kb.iter().map(|k| k * k).sum();
    let b4: f64 = kb.iter().map(|k| k * k * k * k).sum();

    let a_term1 = if ka.is_empty() {
        0.0
    } else {
        k0 * k0 * powf(a2, m / 2.0)
    };
    let theta1 = sqrt(a_term1 + b2);

    let a_term2 = if ka.is_empty() {
        0.0
    } else {
        k0 * k0 * k0 * k0 * a4 * powf(a2, m - 2.0)
    };
    let theta2 = powf(a_term2 + b4, 0.25);

    let lower = kappa_lower_bound(m, k0, ka, kb);
    let theta3 = powf(lower, 1.0 / m - 1.0);
    let varrho = powf(theta3, -m / (m - 1.0));

    let c0 = f64::min(
        1.0 / (4.0 * powf(1.0 + theta1, 1.0 / m)),
        1.0 / (powf(2.0, m) * m * theta2.max(1.0) * theta3.max(1.0)),
    );
    let cbar0 = 2.0 * c0 * powf(1.0 + theta1, 1.0 / m);
    DerivedConstants {
        theta1,
        theta2,
        theta3,
        c0,
        cbar0,
        varrho,
    }
}

fn kappa_lower_bound(m: f64, k0: f64, ka: &[f64], kb: &[f64]) -> f64 {
    let b = kb.len() as f64;
    let min_a = ka
        .iter()
        .map(|k| k0 * powf(*k, m / 2.0))
        .fold(f64::INFINITY, f64::min);
    let min_b = kb.iter().copied().fold(f64::INFINITY, f64::min);
    let card = if kb.is_empty() {
        1.0
    } else {
        f64::min(powf(2.0, -(m - 2.0) * (b - 1.0) / 2.0), 1.0)
    };
    powf(2.0, -(m - 2.0) / 2.0) * card * f64::min(min_a, min_b)
}

/// Gap height `δ(x') = ε + κ(x'/|x'|)|x'|^m`; `δ(0) = ε`.
pub fn delta(spec: &WeightSpec, eps: f64, x: &[f64]) -> f64 {
    eps + spec.homogeneous(x)
}

/// Analytic gradient of `δ` with respect to `x'`.
pub fn delta_gradient(spec: &WeightSpec, x: &[f64]) -> Vec<f64> {
    let m = spec.m;
    let mut g = alloc::vec![0.0; spec.dim()];
    if !spec.set_a.is_empty() {
        let s: f64 = spec
            .set_a
            .iter()
            .map(|&i| spec.kappa[i - 1] * x[i - 1] * x[i - 1])
            .sum();
        if s > 0.0 {
            let f = m * spec.kappa0 * powf(s, m / 2.0 - 1.0);
            for &i in &spec.set_a {
                g[i - 1] = f * spec.kappa[i - 1] * x[i - 1];
            }
        }
    }
    for &j in &spec.set_b {
        let xj = x[j - 1];
        g[j - 1] = m * spec.kappa[j - 1] * powf(xj.abs(), m - 1.0) * xj.signum();
    }
    g
}

/// Two curvilinear cubes `Σ|xᵢ|^m + |x_d ∓ r|^m = r^m` touching at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    pub r1: f64,
    pub r2: f64,
    pub m: f64,
}

/// Exact gap `h₁ − h₂` between two curvilinear cubes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeGap {
    pub cube: CubeSpec,
}

impl CubeGap {
    /// Gap as a function of `S = Σ|xᵢ|^m`.
    pub fn of_power_sum(&self, s: f64) -> f64 {
        cap_height(self.cube.r1, self.cube.m, s) + cap_height(self.cube.r2, self.cube.m, s)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.of_power_sum(power_sum(x, self.cube.m))
    }

    /// `gap − κ̄ S`, evaluated without cancellation for small `S`.
    pub fn remainder_of_power_sum(&self, s: f64) -> f64 {
        cap_remainder(self.cube.r1, self.cube.m, s) + cap_remainder(self.cube.r2, self.cube.m, s)
    }
}

fn power_sum(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| powf(v.abs(), m)).sum()
}

/// Height of the cap `r − (r^m − S)^{1/m}` of one cube.
fn cap_height(r: f64, m: f64, s: f64) -> f64 {
    let u = s / powf(r, m);
    if u < 0.1 {
        r * (u / m + cap_series_tail(m, u))
    } else {
        r * (1.0 - powf(1.0 - u, 1.0 / m))
    }
}

fn cap_remainder(r: f64, m: f64, s: f64) -> f64 {
    let u = s / powf(r, m);
    if u < 0.1 {
        r * cap_series_tail(m, u)
    } else {
        r * (1.0 - powf(1.0 - u, 1.0 / m) - u / m)
    }
}

/// `Σ_{k≥2} −C(1/m, k)(−u)^k`, the part of `1 − (1−u)^{1/m}` beyond `u/m`.
fn cap_series_tail(m: f64, u: f64) -> f64 {
    let a = 1.0 / m;
    // c = C(a, k) (−1)^k, built recursively from C(a, 1)(−1) = −a.
    let mut c = -a;
    let mut upow = u;
    let mut sum = 0.0;
    for k in 2..60 {
        c *= -(a - (k as f64 - 1.0)) / k as f64;
        upow *= u;
        let term = -c * upow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Leading coefficient, exact gap and a sampled Taylor-remainder constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeProfile {
    pub kappabar: f64,
    pub gap: CubeGap,
    /// `C` with `|gap − κ̄ Σ|xᵢ|^m| ≤ C|x'|^{2m}` on `|x'| ≤ min(r₁, r₂)/2`.
    pub remainder_bound: f64,
}

impl CubeProfile {
    /// The equivalent `WeightSpec` (`A = ∅`, `κᵢ = κ̄`) in dimension `d`.
    pub fn weight_spec(&self, d: usize) -> Result<WeightSpec> {
        WeightSpec::sum_of_powers(self.gap.cube.m, alloc::vec![self.kappabar; d - 1])
    }
}

pub fn cube_profile(cube: CubeSpec) -> Result<CubeProfile> {
    if !(cube.r1 > 0.0 && cube.r2 > 0.0) {
        return Err(invalid!(
            "cube radii must be positive (r1 = {}, r2 = {})",
            cube.r1,
            cube.r2
        ));
    }
    if !(cube.m >= 2.0) {
        return Err(invalid!("cube exponent m = {} must be ≥ 2", cube.m));
    }
    let m = cube.m;
    let kappabar = (powf(cube.r1, 1.0 - m) + powf(cube.r2, 1.0 - m)) / m;
    let gap = CubeGap { cube };
    // |gap − κ̄S| is a function of S alone and S ≤ |x'|^m for m ≥ 2, so the
    // sup of |rem(S)|/S² over S ≤ (rmin/2)^m bounds the constant.
    let s_max = powf(cube.r1.min(cube.r2) / 2.0, m);
    let samples = 400;
    let mut bound: f64 = 0.0;
    for k in 0..=samples {
        let s = s_max * powf(10.0, -6.0 * (k as f64) / samples as f64);
        bound = bound.max(gap.remainder_of_power_sum(s).abs() / (s * s));
    }
    Ok(CubeProfile {
        kappabar,
        gap,
        remainder_bound: bound,
    })
}

/// Indices of the weighted sup norm `sup |x'|^{−σ}(ε + |x'|^m)^{τ−1}|F(x')|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub eps: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl NormSpec {
    pub fn weight(&self, radius: f64, m: f64) -> f64 {
        powf(radius, -self.sigma) * powf(self.eps + powf(radius, m), self.tau - 1.0)
    }
}

/// Weighted sup norm of a sampled field given as `(|x'|, |F(x')|)` pairs.
pub fn weighted_norm<I>(samples: I, norm: &NormSpec, m: f64) -> Result<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    if !(norm.eps >= 0.0) {
        return Err(invalid!("eps = {} must be nonnegative", norm.eps));
    }
    let mut best: Option<f64> = None;
    for (radius, magnitude) in samples {
        let w = norm.weight(radius, m);
        let value = if magnitude == 0.0 {
            0.0
        } else {
            w * magnitude.abs()
        };
        if !value.is_finite() {
            return Err(invalid!("norm weight is singular at |x'| = {radius}"));
        }
        best = Some(best.map_or(value, |b: f64| b.max(value)));
    }
    best.ok_or_else(|| invalid!("weighted norm of an empty sample set"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Sphere,
    Ball,
}

/// κ-weighted mean `(f)^κ` over `∂B'_ρ` or `B'_ρ` (`d = 3`).
///
/// The circle uses the trapezoid rule on `nodes` equispaced angles; the ball
/// adds Gauss–Legendre panels in the radius.
pub fn weighted_average<F>(
    f: F,
    spec: &WeightSpec,
    rho: f64,
    r0: f64,
    surface: Surface,
    nodes: usize,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if spec.d != 3 {
        return Err(Error::UnsupportedDimension(spec.d));
    }
    if !(rho > 0.0 && rho < r0) {
        return Err(Error::Domain(format!(
            "rho = {rho} must lie in (0, R0 = {r0})"
        )));
    }
    if nodes < 4 {
        return Err(invalid!("at least 4 quadrature nodes are required"));
    }
    let h = TAU / nodes as f64;
    let ring = |radius: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..nodes {
            let t = (j as f64 + 0.5) * h;
            let (c, s) = (cos(t), sin(t));
            let k = spec.angular(t);
            num += k * f(&[radius * c, radius * s]);
            den += k;
        }
        (num, den)
    };
    match surface {
        Surface::Sphere => {
            let (num, den) = ring(rho);
            Ok(num / den)
        }
        Surface::Ball => {
            let gl = GaussLegendre::new(16);
            let panels = 8;
            let mut num = 0.0;
            let mut den = 0.0;
            for p in 0..panels {
                let a = rho * p as f64 / panels as f64;
                let b = rho * (p + 1) as f64 / panels as f64;
                for (x, w) in gl.nodes_on(a, b) {
                    let (n, d) = ring(x);
                    num += w * x * n;
                    den += w * x * d;
                }
            }
            Ok(num / den)
        }
    }
}

/// One of the two boundary graphs `x_d = ±ε/2 + h(x')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeightField {
    /// Cap of a curvilinear cube of radius `radius`, sign `+` for `h₁`.
    Cube { radius: f64, m: f64, upper: bool },
    /// `coef · |x'|^exponent`.
    Power { coef: f64, exponent: f64 },
    /// `scale · κ(x'/|x'|)|x'|^m` for the given weight.
    Weight { spec: WeightSpec, scale: f64 },
    /// Samples on a uniform square grid (`d = 3`), Catmull–Rom interpolated.
    Sampled(SampledHeight),
}

/// Heights on the grid `x = −half + i·step`, `y = −half + j·step`,
/// `i, j = 0..n`, stored row-major in `values[i * n + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledHeight {
    pub half_width: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl SampledHeight {
    pub fn from_fn<F: Fn(&[f64]) -> f64>(half_width: f64, n: usize, f: F) -> Self {
        let step = 2.0 * half_width / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(&[
                    -half_width + i as f64 * step,
                    -half_width + j as f64 * step,
                ]));
            }
        }
        Self {
            half_width,
            n,
            values,
        }
    }

    fn at(&self, i: isize, j: isize) -> f64 {
        let clamp = |k: isize| k.clamp(0, self.n as isize - 1) as usize;
        self.values[clamp(i) * self.n + clamp(j)]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let step = 2.0 * self.half_width / (self.n - 1) as f64;
        let u = (x[0] + self.half_width) / step;
        let v = (x[1] + self.half_width) / step;
        let (iu, fu) = split_cell(u, self.n);
        let (iv, fv) = split_cell(v, self.n);
        let wu = catmull_rom_weights(fu);
        let wv = catmull_rom_weights(fv);
        let mut total = 0.0;
        for (a, wa) in wu.iter().enumerate() {
            for (b, wb) in wv.iter().enumerate() {
                total += wa * wb * self.at(iu + a as isize - 1, iv + b as isize - 1);
            }
        }
        total
    }
}

fn split_cell(u: f64, n: usize) -> (isize, f64) {
    let i = (libm::floor(u) as isize).clamp(0, n as isize - 2);
    (i, u - i as f64)
}

fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

impl HeightField {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            HeightField::Cube { radius, m, upper } => {
                let h = cap_height(*radius, *m, power_sum(x, *m));
                if *upper {
                    h
                } else {
                    -h
                }
            }
            HeightField::Power { coef, exponent } => coef * powf(norm(x), *exponent),
            HeightField::Weight { spec, scale } => scale * spec.homogeneous(x),
            HeightField::Sampled(s) => s.eval(x),
        }
    }

    /// Central-difference gradient.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-6 * norm(x).max(1e-3);
        let mut p = x.to_vec();
        (0..x.len())
            .map(|i| {
                p[i] = x[i] + h;
                let fp = self.value(&p);
                p[i] = x[i] - h;
                let fm = self.value(&p);
                p[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// Frobenius norm of the central-difference Hessian.
    pub fn hessian_norm(&self, x: &[f64]) -> f64 {
        let h = 1e-4 * norm(x).max(1e-2);
        let n = x.len();
        let mut p = x.to_vec();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut eval = |di: f64, dj: f64| {
                    p.copy_from_slice(x);
                    p[i] += di;
                    p[j] += dj;
                    self.value(&p)
                };
                let hij = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
                total += hij * hij;
            }
        }
        sqrt(total)
    }
}

/// Local description of the gap between the two inclusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub eps: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub h1: HeightField,
    pub h2: HeightField,
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl GapProfile {
    /// Two curvilinear cubes of radii `r1`, `r2`.
    pub fn cubes(cube: CubeSpec, eps: f64, r0: f64, gamma: f64, tau1: f64, tau2: f64) -> Self {
        Self {
            eps,
            r0,
            h1: HeightField::Cube {
                radius: cube.r1,
                m: cube.m,
                upper: true,
            },
            h2: HeightField::Cube {
                radius: cube.r2,
                m: cube.m,
                upper: false,
            },
            gamma,
            tau1,
            tau2,
        }
    }

    pub fn gap(&self, x: &[f64]) -> f64 {
        self.h1.value(x) - self.h2.value(x)
    }
}

/// Maps a point of the thin gap onto the slab `|y_d| ≤ δ₀`:
/// `y' = x'`, `y_d = 2δ₀((x_d − h₂ + ε/2)/(ε + h₁ − h₂) − 1/2)`.
pub fn gap_transform(profile: &GapProfile, delta0: f64, x: &[f64]) -> Result<Vec<f64>> {
    let (xp, xd) = x.split_at(x.len() - 1);
    let xd = xd[0];
    let eps = profile.eps;
    let h1 = profile.h1.value(xp);
    let h2 = profile.h2.value(xp);
    let top = eps / 2.0 + h1;
    let bottom = h2 - eps / 2.0;
    let height = top - bottom;
    let slack = 1e-12 * height.abs().max(1e-300);
    if !(height > 0.0) {
        return Err(Error::Domain(format!(
            "the gap has zero height at x' = {xp:?}"
        )));
    }
    if xd < bottom - slack || xd > top + slack {
        return Err(Error::Domain(format!(
            "x_d = {xd} outside the gap [{bottom}, {top}]"
        )));
    }
    let mut y = xp.to_vec();
    y.push(2.0 * delta0 * ((xd - h2 + eps / 2.0) / (eps + h1 - h2) - 0.5));
    Ok(y)
}

/// Outcome of sampling the m-convexity conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HConditionReport {
    /// Largest `|h₁ − h₂ − κ(ξ)|x'|^m|` seen.
    pub h1_max_remainder: f64,
    /// `max |remainder| / |x'|^{m+γ}`.
    pub h1_constant: f64,
    /// Log-log slope of the remainder; `None` when it vanishes identically.
    pub h1_fitted_exponent: Option<f64>,
    pub h1_ok: bool,
    /// `max_j max |∇h_j| / |x'|^{m−1}`.
    pub h2_worst_ratio: f64,
    pub h2_ok: bool,
    /// Sampled `‖h₁‖_{C²} + ‖h₂‖_{C²}`.
    pub h3_estimate: f64,
    pub h3_ok: bool,
}

impl HConditionReport {
    pub fn passed(&self) -> bool {
        self.h1_ok && self.h2_ok && self.h3_ok
    }
}

/// Checks the three m-convexity conditions on a set of sample points.
pub fn validate_h_conditions(
    profile: &GapProfile,
    spec: &WeightSpec,
    samples: &[Vec<f64>],
) -> HConditionReport {
    let m = spec.m;
    let gamma = profile.gamma;
    let mut max_rem: f64 = 0.0;
    let mut constant: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    let mut sup = [[0.0f64; 3]; 2];
    let mut log_r = Vec::new();
    let mut log_rem = Vec::new();
    let mut scale: f64 = 0.0;
    for x in samples {
        let r = norm(x);
        if r == 0.0 {
            continue;
        }
        let model = spec.homogeneous(x);
        scale = scale.max(model.abs());
        let rem = (profile.gap(x) - model).abs();
        max_rem = max_rem.max(rem);
        constant = constant.max(rem / powf(r, m + gamma));
        if rem > 0.0 {
            log_r.push(libm::log(r));
            log_rem.push(libm::log(rem));
        }
        for (k, h) in [&profile.h1, &profile.h2].into_iter().enumerate() {
            let g = norm(&h.gradient(x));
            worst_grad = worst_grad.max(g / powf(r, m - 1.0));
            sup[k][0] = sup[k][0].max(h.value(x).abs());
            sup[k][1] = sup[k][1].max(g);
            sup[k][2] = sup[k][2].max(h.hessian_norm(x));
        }
    }
    let exact = max_rem <= 1e-13 * scale.max(1e-300) || log_r.len() < 2;
    let fitted = if exact {
        None
    } else {
        linear_fit(&log_r, &log_rem).ok().map(|f| f.slope)
    };
    let h1_ok = exact || fitted.is_some_and(|e| e >= m + gamma - 0.05);
    let h3 = sup.iter().map(|s| s.iter().sum::<f64>()).sum::<f64>();
    HConditionReport {
        h1_max_remainder: max_rem,
        h1_constant: constant,
        h1_fitted_exponent: fitted,
        h1_ok,
        h2_worst_ratio: worst_grad,
        h2_ok: worst_grad <= profile.tau1 * (1.0 + 1e-6),
        h3_estimate: h3,
        h3_ok: h3 <= profile.tau2,
    }
}

/// Deterministic sample points in `B'_R` (`d = 3`): `rings × spokes` points
/// on log-spaced radii from `R·10^{−decades}` to `R`.
pub fn polar_samples(radius: f64, rings: usize, spokes: usize, decades: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(rings * spokes);
    for i in 0..rings {
        let t = if rings > 1 {
            i as f64 / (rings - 1) as f64
        } else {
            1.0
        };
        let r = radius * powf(10.0, -decades * (1.0 - t));
        for j in 0..spokes {
            let a = 2.0 * PI * (j as f64 + 0.37) / spokes as f64;
            out.push(alloc::vec![r * cos(a), r * sin(a)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube4() -> WeightSpec {
        WeightSpec::sum_of_powers(4.0, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn kappa_examples() {
        for m in [2.0, 3.0, 4.0, 7.5] {
            let s = WeightSpec::sum_of_powers(m, vec![1.0, 1.0]).unwrap();
            assert_eq!(kappa_weight(&s, &[1.0, 0.0]).unwrap(), 1.0);
            let iso = WeightSpec::new(3, m, 2.0, vec![1.0, 1.0], vec![1, 2], vec![]).unwrap();
            let t: f64 = 0.3;
            assert!((kappa_weight(&iso, &[t.cos(), t.sin()]).unwrap() - 2.0).abs() < 1e-14);
        }
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((kappa_weight(&cube4(), &[h, h]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kappa_rejects_non_unit() {
        assert!(kappa_weight(&cube4(), &[1.0, 1e-5]).is_err());
        assert!(kappa_weight(&cube4(), &[1.0]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(WeightSpec::new(3, 2.0, 1.0, vec![1.0, 1.0], vec![1], vec![1]).is_err());
        assert!(WeightSpec::new(3, 2.0, 1.0, vec![1.0, 1.0], vec![1], vec![]).is_err());
        assert!(WeightSpec::new(3, 1.5, 1.0, vec![1.0, 1.0], vec![], vec![1, 2]).is_err());
        assert!(WeightSpec::new(2, 2.0, 1.0, vec![1.0], vec![], vec![1]).is_err());
        assert!(WeightSpec::new(3, 2.0, 0.0, vec![1.0, 1.0], vec![1, 2], vec![]).is_err());
        assert!(WeightSpec::new(3, 2.0, 1.0, vec![1.0, -1.0], vec![], vec![1, 2]).is_err());
        assert!(WeightSpec::new(4, 3.0, 1.0, vec![1.0, 2.0, 3.0], vec![2], vec![1, 3]).is_ok());
    }

    #[test]
    fn constants_cube_weight() {
        // Frozen from a 40-digit mpmath evaluation of the closed forms.
        let c = derived_constants(&cube4());
        assert!((c.theta1 - 2f64.sqrt()).abs() < 1e-15);
        assert!((c.theta2 - 2f64.powf(0.25)).abs() < 1e-15);
        assert!((c.theta3 - 2.828_427_124_746_19).abs() < 1e-14);
        assert!((c.varrho - 0.25).abs() < 1e-15);
        assert!((c.c0 - 4.645340292979379e-3).abs() < 1e-16);
        assert!((c.cbar0 - 1.158087704234014e-2).abs() < 1e-16);
    }

    #[test]
    fn theta1_single_b_term() {
        // B = {1} alone is not a full partition for d = 3, so check the formula directly.
        let c = constants_from_parts(3.0, 1.0, &[], &[1.0]);
        assert_eq!(c.theta1, 1.0);
        assert_eq!(c.theta2, 1.0);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&cube4(), 1e-4, &[0.0, 0.0]), 1e-4);
        assert!((delta(&cube4(), 0.0, &[0.5, 0.0]) - 0.0625).abs() < 1e-16);
    }

    fn random_spec(rng: &mut ChaCha8Rng) -> WeightSpec {
        let d = rng.gen_range(3..=6);
        let m = rng.gen_range(2.0..6.0);
        let n = d - 1;
        let kappa: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 1..=n {
            if rng.gen_bool(0.5) {
                a.push(i)
            } else {
                b.push(i)
            }
        }
        WeightSpec::new(d, m, rng.gen_range(0.2..3.0), kappa, a, b).unwrap()
    }

    fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = norm(&v);
            if r > 1e-3 && r <= 1.0 {
                return v.iter().map(|x| x / r).collect();
            }
        }
    }

    #[test]
    fn delta_sandwich_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let spec = random_spec(&mut rng);
            let c = derived_constants(&spec);
            for _ in 0..2000 {
                let xi = random_unit(&mut rng, spec.dim());
                let r = rng.gen_range(0.0..1.0);
                let x: Vec<f64> = xi.iter().map(|v| v * r).collect();
                let eps = 1e-3;
                let d = delta(&spec, eps, &x);
                let rm = powf(r, spec.m);
                assert!(eps + c.varrho * rm <= d * (1.0 + 1e-12));
                assert!(d <= (eps + c.theta1 * rm) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn gradient_bound_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let spec = random_spec(&mut rng);
            let c = derived_constants(&spec);
            for _ in 0..200 {
                let xi = random_unit(&mut rng, spec.dim());
                let r = rng.gen_range(0.05..1.0);
                let x: Vec<f64> = xi.iter().map(|v| v * r).collect();
                let h = 1e-6;
                let mut fd = Vec::new();
                for i in 0..x.len() {
                    let mut p = x.clone();
                    p[i] += h;
                    let mut q = x.clone();
                    q[i] -= h;
                    fd.push((delta(&spec, 0.0, &p) - delta(&spec, 0.0, &q)) / (2.0 * h));
                }
                let analytic = delta_gradient(&spec, &x);
                let bound = spec.m * c.theta2 * powf(r, spec.m - 1.0);
                assert!(norm(&fd) <= bound * (1.0 + 1e-6));
                for (a, b) in analytic.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-5 * (1.0 + bound));
                }
            }
        }
    }

    #[test]
    fn height_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..6 {
            let spec = random_spec(&mut rng);
            let c = derived_constants(&spec);
            let eps = 1e-3;
            for _ in 0..100 {
                let xi = random_unit(&mut rng, spec.dim());
                let r0 = rng.gen_range(powf(eps, 1.0 / spec.m)..1.0);
                let x0: Vec<f64> = xi.iter().map(|v| v * r0).collect();
                let d0 = delta(&spec, eps, &x0);
                let s = 2.0 * c.c0 * powf(d0, 1.0 / spec.m);
                for _ in 0..20 {
                    let dir = random_unit(&mut rng, spec.dim());
                    let t = rng.gen_range(0.0..=1.0) * s;
                    let x: Vec<f64> = x0.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                    let dx = delta(&spec, eps, &x);
                    assert!(dx >= 0.5 * d0 && dx <= 1.5 * d0);
                }
            }
            assert!(c.cbar0 <= 0.5);
        }
    }

    #[test]
    fn degenerate_quadratic_with_coupled_set() {
        // m = 2 with A ≠ ∅ is a plain quadratic form.
        let s = WeightSpec::new(3, 2.0, 2.0, vec![1.0, 3.0], vec![1], vec![2]).unwrap();
        let t: f64 = 0.7;
        let expect = 2.0 * t.cos().powi(2) + 3.0 * t.sin().powi(2);
        assert!((s.angular(t) - expect).abs() < 1e-14);
        assert!(!s.is_constant());
        let s = WeightSpec::new(3, 2.0, 2.0, vec![1.0, 2.0], vec![1], vec![2]).unwrap();
        assert!(s.is_constant());
    }

    #[test]
    fn cube_profile_examples() {
        let p = cube_profile(CubeSpec {
            r1: 1.0,
            r2: 1.0,
            m: 4.0,
        })
        .unwrap();
        assert!((p.kappabar - 0.5).abs() < 1e-15);
        let p = cube_profile(CubeSpec {
            r1: 1.0,
            r2: 2.0,
            m: 2.0,
        })
        .unwrap();
        assert!((p.kappabar - 0.75).abs() < 1e-15);

        let p = cube_profile(CubeSpec {
            r1: 1.0,
            r2: 1.0,
            m: 2.0,
        })
        .unwrap();
        let g = p.gap.eval(&[0.1, 0.0]);
        assert!((g - 2.0 * (1.0 - 0.99f64.sqrt())).abs() < 1e-16);
        assert!((g - 0.01).abs() <= 1e-4 * p.remainder_bound);
        assert!(cube_profile(CubeSpec {
            r1: 0.0,
            r2: 1.0,
            m: 2.0
        })
        .is_err());
    }

    #[test]
    fn cube_remainder_bound_holds_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r1, r2, m) in [(1.0, 1.0, 2.0), (1.0, 2.5, 4.0), (0.7, 1.3, 3.0)] {
            let p = cube_profile(CubeSpec { r1, r2, m }).unwrap();
            let rmax = f64::min(r1, r2) / 2.0;
            for _ in 0..2000 {
                let x = [rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax)];
                let r = norm(&x);
                if r > rmax || r < 1e-3 {
                    continue;
                }
                let rem = (p.gap.eval(&x) - p.kappabar * power_sum(&x, m)).abs();
                assert!(rem <= p.remainder_bound * powf(r, 2.0 * m) * (1.0 + 1e-6) + 1e-16);
            }
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let radii: Vec<f64> = (1..=200).map(|i| i as f64 / 200.0).collect();
        let n = NormSpec {
            eps: 0.0,
            sigma: 0.5,
            tau: 0.0,
        };
        let m = 2.0;
        let v = weighted_norm(radii.iter().map(|&r| (r, powf(r, 0.5 + m))), &n, m).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let zero = weighted_norm(radii.iter().map(|&r| (r, 0.0)), &n, m).unwrap();
        assert_eq!(zero, 0.0);
        let n = NormSpec {
            eps: 0.0,
            sigma: 0.0,
            tau: 1.0,
        };
        let v = weighted_norm(radii.iter().map(|&r| (r, r)), &n, m).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(weighted_norm(core::iter::empty(), &n, m).is_err());
    }

    #[test]
    fn weighted_average_examples() {
        let spec = cube4();
        let avg = weighted_average(|_| 3.25, &spec, 0.3, 1.0, Surface::Sphere, 256).unwrap();
        assert!((avg - 3.25).abs() < 1e-14);
        let avg = weighted_average(|_| 3.25, &spec, 0.3, 1.0, Surface::Ball, 128).unwrap();
        assert!((avg - 3.25).abs() < 1e-14);
        for surface in [Surface::Sphere, Surface::Ball] {
            let odd = weighted_average(|x| x[0] / norm(x), &spec, 0.3, 1.0, surface, 256).unwrap();
            assert!(odd.abs() <= 1e-12);
        }
        let iso = WeightSpec::isotropic(3, 2.0, 1.0).unwrap();
        let sq = weighted_average(
            |x| (x[0] / norm(x)).powi(2),
            &iso,
            0.5,
            1.0,
            Surface::Sphere,
            64,
        )
        .unwrap();
        assert!((sq - 0.5).abs() < 1e-14);
        assert!(weighted_average(|_| 1.0, &iso, 1.2, 1.0, Surface::Sphere, 64).is_err());
    }

    #[test]
    fn gap_transform_anchors() {
        let cube = CubeSpec {
            r1: 1.0,
            r2: 1.5,
            m: 4.0,
        };
        let prof = GapProfile::cubes(cube, 1e-2, 0.5, 0.5, 10.0, 100.0);
        let xp = [0.2, -0.1];
        let h1 = prof.h1.value(&xp);
        let h2 = prof.h2.value(&xp);
        let d0 = 0.03;
        let top = gap_transform(&prof, d0, &[xp[0], xp[1], 0.005 + h1]).unwrap();
        let bot = gap_transform(&prof, d0, &[xp[0], xp[1], -0.005 + h2]).unwrap();
        let mid = gap_transform(&prof, d0, &[xp[0], xp[1], 0.5 * (h1 + h2)]).unwrap();
        assert!((top[2] - d0).abs() < 1e-15);
        assert!((bot[2] + d0).abs() < 1e-15);
        assert!(mid[2].abs() < 1e-15);
        assert_eq!(&top[..2], &xp);
        assert!(gap_transform(&prof, d0, &[xp[0], xp[1], 1.0]).is_err());
    }

    #[test]
    fn h_conditions() {
        let samples = polar_samples(0.4, 12, 16, 1.5);
        let cube = CubeSpec {
            r1: 1.0,
            r2: 1.0,
            m: 4.0,
        };
        let p = cube_profile(cube).unwrap();
        let spec = p.weight_spec(3).unwrap();
        let prof = GapProfile::cubes(cube, 0.0, 0.2, 0.9, 1.0, 50.0);
        let rep = validate_h_conditions(&prof, &spec, &samples);
        assert!(rep.passed(), "{rep:?}");
        let e = rep.h1_fitted_exponent.unwrap();
        assert!(e >= 2.0 * 4.0 - 0.05, "remainder exponent {e}");

        let iso = WeightSpec::isotropic(3, 3.0, 1.0).unwrap();
        let exact = GapProfile {
            eps: 0.0,
            r0: 0.2,
            h1: HeightField::Power {
                coef: 0.5,
                exponent: 3.0,
            },
            h2: HeightField::Power {
                coef: -0.5,
                exponent: 3.0,
            },
            gamma: 0.5,
            tau1: 2.0,
            tau2: 50.0,
        };
        let rep = validate_h_conditions(&exact, &iso, &samples);
        assert!(rep.h1_max_remainder <= 1e-15);
        assert!(rep.h1_fitted_exponent.is_none() && rep.h1_ok);

        // |∇h₁| = 2τ₁|x'|^{m−1}: coef·m = 2τ₁.
        let bad = GapProfile {
            h1: HeightField::Power {
                coef: 2.0 * 2.0 / 3.0,
                exponent: 3.0,
            },
            ..exact
        };
        let rep = validate_h_conditions(&bad, &iso, &samples);
        assert!(!rep.h2_ok);
        assert!((rep.h2_worst_ratio - 4.0).abs() < 1e-4);
    }

    #[test]
    fn sampled_height_interpolates_smooth_fields() {
        let f = |x: &[f64]| 0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1]);
        let s = SampledHeight::from_fn(0.5, 101, f);
        let h = HeightField::Sampled(s);
        for p in [[0.1, 0.2], [-0.33, 0.01], [0.0, 0.0]] {
            assert!((h.value(&p) - f(&p)).abs() < 1e-6);
        }
    }

    #[test]
    fn serde_keys() {
        let json = serde_json::to_string(&cube4()).unwrap();
        assert!(json.contains("\"setA\"") && json.contains("\"setB\""));
        let back: WeightSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cube4());
        let p: WeightSpec =
            serde_json::from_str(r#"{"d":3,"m":2,"kappa":[1,1],"setA":[1,2]}"#).unwrap();
        assert_eq!(p.kappa0, 1.0);
    }
}
