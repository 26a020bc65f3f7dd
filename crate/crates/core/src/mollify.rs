//! Admissible mollifiers and convolution by node quadrature.
//!
//! A [`Kernel`] is a finite node set `z_i ∈ B₁` with weights `w_i`, values
//! `ρ(z_i)` and analytic gradients `∇ρ(z_i)`. Node sets are symmetric under
//! `z ↦ -z` and values are divided by the discrete mass, so `Σ w_i ρ(z_i) = 1`
//! up to rounding. Scaled convolution uses `ρ_ℓ = ℓ^{-d} ρ(·/ℓ)`:
//!
//! ```text
//! u_ℓ(x) = Σ_i w_i ρ(z_i) u(x − ℓ z_i)
//! ∂_k u_ℓ(x) = ℓ^{-1} Σ_i w_i ∂_kρ(z_i) u(x − ℓ z_i)
//! ```

use std::sync::OnceLock;

use crate::error::{LabError, Result};
use crate::grid::{check_scale, check_scale_spacing, norm, Field, Grid, Mat2, SampledField, Vec2};
use crate::testfn::TestFunction;

pub const MIN_RESOLUTION: usize = 17;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelProfile {
    /// Radial `c·exp(−1/(1−|z/R|²))` supported in `B_R`, `R ∈ (0, 1]`.
    StandardBump { radius: f64 },
    /// `ρ₀(A z)` with `ρ₀` the standard bump, `A` rescaled so the ellipse
    /// `{|Az| < 1}` fits in `B₁` (smallest singular value 1).
    AnisotropicBump { a: Mat2 },
    /// Affine image of a kernel that is spread along the hyperbolas
    /// `w₁w₂ = s` for `ln s ∈ [log_s_lo, log_s_hi]`, filling a fraction
    /// `fill` of each hyperbola's arc inside the unit disk. Its mass is
    /// transported by the linear flow `ẇ = diag(1,−1) w`, which is what makes
    /// the anisotropy functional small for saddle-type matrices.
    HyperbolicCross { a: Mat2, log_s_lo: f64, log_s_hi: f64, fill: f64 },
}

impl KernelProfile {
    pub fn standard() -> Self {
        KernelProfile::StandardBump { radius: 1.0 }
    }

    pub fn half() -> Self {
        KernelProfile::StandardBump { radius: 0.5 }
    }

    pub fn tag(&self) -> String {
        match self {
            KernelProfile::StandardBump { radius } if *radius == 1.0 => "bump".into(),
            KernelProfile::StandardBump { radius } => format!("bump-r{radius}"),
            KernelProfile::AnisotropicBump { a } => {
                format!("aniso[{},{};{},{}]", a[0][0], a[0][1], a[1][0], a[1][1])
            }
            KernelProfile::HyperbolicCross { log_s_lo, log_s_hi, .. } => {
                format!("hyperbolic[{log_s_lo:.3},{log_s_hi:.3}]")
            }
        }
    }

    /// Parses the CLI spelling: `bump`, `half-bump`, `aniso:a11,a12,a21,a22`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "bump" | "standard" | "standard-bump" => return Ok(Self::standard()),
            "half-bump" | "half" => return Ok(Self::half()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("aniso:") {
            let v: Vec<f64> = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| LabError::Input(format!("bad anisotropy matrix `{rest}`: {e}")))?;
            if v.len() != 4 {
                return Err(LabError::Input("anisotropy matrix needs 4 entries".into()));
            }
            return Ok(KernelProfile::AnisotropicBump { a: [[v[0], v[1]], [v[2], v[3]]] });
        }
        Err(LabError::Input(format!("unknown kernel profile `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub z: Vec2,
    pub weight: f64,
    pub value: f64,
    pub grad: Vec2,
}

/// Integer lattice bookkeeping for tensor-grid kernels:
/// `z = (k + shift) ⊙ h` with `shift` 1/2 (midpoint nodes) or 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub h: Vec2,
    pub shift: f64,
    pub index: Vec<[i64; 2]>,
}

#[derive(Debug, Clone)]
pub struct Kernel {
    pub id: String,
    pub dim: usize,
    pub profile: Option<KernelProfile>,
    pub nodes: Vec<Node>,
    pub radial: bool,
    pub half_support: bool,
    pub lattice: Option<Lattice>,
    alpha_bar: OnceLock<f64>,
}

/// `ψ(q) = exp(−1/(1−q))` and `ψ'(q)`.
fn bump_q(q: f64) -> (f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - q;
    let v = (-1.0 / d).exp();
    (v, -v / (d * d))
}

fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn inverse(a: &Mat2) -> Mat2 {
    let d = det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

fn mat_vec(a: &Mat2, v: Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn mat_t_vec(a: &Mat2, v: Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[1][0] * v[1], a[0][1] * v[0] + a[1][1] * v[1]]
}

/// Singular values `(σ_max, σ_min)` of a 2x2 matrix.
pub fn singular_values(a: &Mat2) -> (f64, f64) {
    let p = a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1];
    let d = det(a).abs();
    let disc = (p * p - 4.0 * d * d).max(0.0).sqrt();
    let smax = ((p + disc) / 2.0).sqrt();
    let smin = if smax > 0.0 { d / smax } else { 0.0 };
    (smax, smin)
}

/// Checks the anisotropy matrix and rescales it so its smallest singular
/// value is 1, which puts `{|Az| < 1}` inside the unit ball.
pub fn normalize_anisotropy(a: &Mat2) -> Result<Mat2> {
    let d = det(a);
    if !d.is_finite() || d <= 0.0 {
        return Err(LabError::Parameter(format!("anisotropy matrix must have det > 0, got {d}")));
    }
    let (smax, smin) = singular_values(a);
    if smin <= 1e-12 * smax {
        return Err(LabError::Parameter("anisotropy matrix is numerically singular".into()));
    }
    Ok([[a[0][0] / smin, a[0][1] / smin], [a[1][0] / smin, a[1][1] / smin]])
}

impl Kernel {
    fn finish(
        id: String,
        dim: usize,
        profile: Option<KernelProfile>,
        mut nodes: Vec<Node>,
        radial: bool,
        half_support: bool,
        lattice: Option<Lattice>,
    ) -> Result<Self> {
        let mass: f64 = nodes.iter().map(|n| n.weight * n.value).sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(LabError::Parameter(format!("kernel has non-positive discrete mass {mass}")));
        }
        for n in &mut nodes {
            n.value /= mass;
            n.grad = [n.grad[0] / mass, n.grad[1] / mass];
        }
        Ok(Self { id, dim, profile, nodes, radial, half_support, lattice, alpha_bar: OnceLock::new() })
    }

    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight * n.value).sum()
    }

    /// `Σ w ρ z_a²`.
    pub fn second_moment(&self, axis: usize) -> f64 {
        self.nodes.iter().map(|n| n.weight * n.value * n.z[axis] * n.z[axis]).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nodes.iter().all(|n| n.value >= 0.0)
    }

    /// `∫ |ρ|`.
    pub fn l1_norm(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight * n.value.abs()).sum()
    }

    pub fn support_radius(&self) -> f64 {
        self.nodes.iter().map(|n| norm(n.z)).fold(0.0, f64::max)
    }

    pub(crate) fn alpha_bar_cell(&self) -> &OnceLock<f64> {
        &self.alpha_bar
    }

    pub fn require_radial(&self, what: &str) -> Result<()> {
        if self.radial {
            Ok(())
        } else {
            Err(LabError::Precondition(format!("{what} requires a radial kernel, `{}` is not", self.id)))
        }
    }
}

/// Tensor midpoint nodes over the box `[-ext_0, ext_0] × [-ext_1, ext_1]`
/// with `resolution` nodes per half-extent.
fn midpoint_nodes(dim: usize, ext: Vec2, resolution: usize, eval: impl Fn(Vec2) -> (f64, Vec2)) -> (Vec<Node>, Lattice) {
    let r = resolution as i64;
    let h = [ext[0] / resolution as f64, if dim == 2 { ext[1] / resolution as f64 } else { 1.0 }];
    let weight = if dim == 2 { h[0] * h[1] } else { h[0] };
    let mut nodes = Vec::new();
    let mut index = Vec::new();
    let jrange = if dim == 2 { -r..r } else { 0..1 };
    for j in jrange {
        for i in -r..r {
            let z = [(i as f64 + 0.5) * h[0], if dim == 2 { (j as f64 + 0.5) * h[1] } else { 0.0 }];
            let (v, g) = eval(z);
            if v > 0.0 {
                nodes.push(Node { z, weight, value: v, grad: g });
                index.push([i, if dim == 2 { j } else { 0 }]);
            }
        }
    }
    (nodes, Lattice { h, shift: 0.5, index })
}

/// Discretizes an admissible kernel. `resolution` counts nodes per support
/// radius per axis.
pub fn build_kernel(profile: &KernelProfile, dim: usize, resolution: usize) -> Result<Kernel> {
    if !(1..=2).contains(&dim) {
        return Err(LabError::Parameter(format!("kernel dimension {dim} not in {{1, 2}}")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(LabError::Resolution(format!("kernel resolution {resolution} below {MIN_RESOLUTION}")));
    }
    match profile {
        KernelProfile::StandardBump { radius } => {
            let radius = *radius;
            if !(radius > 0.0 && radius <= 1.0) {
                return Err(LabError::Parameter(format!("bump radius {radius} not in (0, 1]")));
            }
            let r2 = radius * radius;
            let (nodes, lattice) = midpoint_nodes(dim, [radius, radius], resolution, |z| {
                let q = (z[0] * z[0] + z[1] * z[1]) / r2;
                let (v, dv) = bump_q(q);
                (v, [dv * 2.0 * z[0] / r2, dv * 2.0 * z[1] / r2])
            });
            Kernel::finish(
                format!("{}-d{dim}-n{resolution}", profile.tag()),
                dim,
                Some(profile.clone()),
                nodes,
                true,
                radius <= 0.5,
                Some(lattice),
            )
        }
        KernelProfile::AnisotropicBump { a } => {
            if dim != 2 {
                return Err(LabError::Parameter("anisotropic kernels are two-dimensional".into()));
            }
            let an = normalize_anisotropy(a)?;
            let inv = inverse(&an);
            let ext = [(inv[0][0] * inv[0][0] + inv[0][1] * inv[0][1]).sqrt(), (inv[1][0] * inv[1][0] + inv[1][1] * inv[1][1]).sqrt()];
            let (nodes, lattice) = midpoint_nodes(2, ext, resolution, |z| {
                let w = mat_vec(&an, z);
                let (v, dv) = bump_q(w[0] * w[0] + w[1] * w[1]);
                let g = mat_t_vec(&an, [2.0 * dv * w[0], 2.0 * dv * w[1]]);
                (v, g)
            });
            // radial iff AᵀA is a multiple of the identity
            let ata = [
                an[0][0] * an[0][0] + an[1][0] * an[1][0],
                an[0][0] * an[0][1] + an[1][0] * an[1][1],
                an[0][1] * an[0][1] + an[1][1] * an[1][1],
            ];
            let radial = (ata[0] - ata[2]).abs() < 1e-12 * ata[0] && ata[1].abs() < 1e-12 * ata[0];
            Kernel::finish(format!("{}-n{resolution}", profile.tag()), 2, Some(profile.clone()), nodes, radial, false, Some(lattice))
        }
        KernelProfile::HyperbolicCross { a, log_s_lo, log_s_hi, fill } => {
            if dim != 2 {
                return Err(LabError::Parameter("hyperbolic kernels are two-dimensional".into()));
            }
            build_hyperbolic(profile, a, *log_s_lo, *log_s_hi, *fill, resolution)
        }
    }
}

fn build_hyperbolic(profile: &KernelProfile, a: &Mat2, s_lo: f64, s_hi: f64, fill: f64, resolution: usize) -> Result<Kernel> {
    if !(s_lo < s_hi && s_hi < 0.5f64.ln() && s_lo.is_finite()) {
        return Err(LabError::Parameter(format!("hyperbolic level range [{s_lo}, {s_hi}] must be increasing and below ln(1/2)")));
    }
    if !(fill > 0.0 && fill < 1.0) {
        return Err(LabError::Parameter(format!("fill fraction {fill} not in (0, 1)")));
    }
    let an = normalize_anisotropy(a)?;
    let det_an = det(&an);
    let n_sigma = 2 * resolution;
    let n_tau = 4 * resolution;
    let mid = 0.5 * (s_lo + s_hi);
    let half = 0.5 * (s_hi - s_lo);
    let d_sigma = (s_hi - s_lo) / n_sigma as f64;
    let mut nodes = Vec::with_capacity(4 * n_sigma * n_tau);
    for is in 0..n_sigma {
        let sigma = s_lo + (is as f64 + 0.5) * d_sigma;
        let s = sigma.exp();
        let y = 1.0 / (2.0 * s);
        let tmax = 0.5 * y.acosh();
        let span = fill * tmax;
        // d tmax / d sigma
        let dtmax = -1.0 / (4.0 * s * (y * y - 1.0).sqrt()) * s;
        let (g, dg) = {
            let u = (sigma - mid) / half;
            let (v, dv) = bump_q(u * u);
            (v, dv * 2.0 * u / half)
        };
        let d_tau = 2.0 * span / n_tau as f64;
        for it in 0..n_tau {
            let tau = -span + (it as f64 + 0.5) * d_tau;
            let v = tau / span;
            let (b, db_dq) = bump_q(v * v);
            let db = db_dq * 2.0 * v;
            let kappa = g * b;
            if kappa <= 0.0 {
                continue;
            }
            let dk_dtau = g * db / span;
            // v = tau / (fill * tmax(sigma))
            let dk_dsigma = dg * b + g * db * (-tau * fill * dtmax / (span * span));
            let weight_w = s * d_sigma * d_tau;
            let r = s.sqrt();
            for (e1, e2) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                let w = [e1 * r * tau.exp(), e2 * r * (-tau).exp()];
                let gw = [dk_dsigma / w[0] + dk_dtau / (2.0 * w[0]), dk_dsigma / w[1] - dk_dtau / (2.0 * w[1])];
                let z = mat_vec(&inverse(&an), w);
                nodes.push(Node { z, weight: weight_w / det_an, value: kappa, grad: mat_t_vec(&an, gw) });
            }
        }
    }
    Kernel::finish(format!("{}-n{resolution}", profile.tag()), 2, Some(profile.clone()), nodes, false, false, None)
}

/// `η = ρ ∗ ρ` by discrete convolution on the node lattice, so that double
/// mollification with `ρ` and single mollification with `η` use exactly the
/// same point set.
pub fn self_convolve(rho: &Kernel) -> Result<Kernel> {
    if !rho.half_support {
        return Err(LabError::Precondition(format!("self-convolution needs support in B_1/2, `{}` is wider", rho.id)));
    }
    let lat = rho.lattice.as_ref().ok_or_else(|| LabError::Precondition("self-convolution needs a lattice kernel".into()))?;
    let dim = rho.dim;
    let (min, max) = lat
        .index
        .iter()
        .fold(([i64::MAX; 2], [i64::MIN; 2]), |(lo, hi), k| ([lo[0].min(k[0]), lo[1].min(k[1])], [hi[0].max(k[0]), hi[1].max(k[1])]));
    let nx = (max[0] - min[0] + 1) as usize;
    let ny = (max[1] - min[1] + 1) as usize;
    let mut dense: Vec<Option<usize>> = vec![None; nx * ny];
    for (n, k) in lat.index.iter().enumerate() {
        dense[(k[0] - min[0]) as usize + nx * (k[1] - min[1]) as usize] = Some(n);
    }
    let lookup = |k: [i64; 2]| -> Option<usize> {
        if k[0] < min[0] || k[0] > max[0] || k[1] < min[1] || k[1] > max[1] {
            return None;
        }
        dense[(k[0] - min[0]) as usize + nx * (k[1] - min[1]) as usize]
    };
    // (k1 + 1/2) + (k2 + 1/2) = m for midpoint lattices
    let carry = if lat.shift == 0.5 { 1 } else { 0 };
    let weight = rho.nodes[0].weight;
    let mut nodes = Vec::new();
    let mut index = Vec::new();
    let my = if dim == 2 { (2 * min[1] + carry)..=(2 * max[1] + carry) } else { 0..=0 };
    for m1 in my {
        for m0 in (2 * min[0] + carry)..=(2 * max[0] + carry) {
            let mut v = 0.0;
            let mut g = [0.0; 2];
            for (n, k) in lat.index.iter().enumerate() {
                let other = [m0 - carry - k[0], if dim == 2 { m1 - carry - k[1] } else { 0 }];
                if let Some(o) = lookup(other) {
                    let a = &rho.nodes[n];
                    let b = &rho.nodes[o];
                    v += weight * a.value * b.value;
                    g[0] += weight * a.value * b.grad[0];
                    g[1] += weight * a.value * b.grad[1];
                }
            }
            if v > 0.0 {
                let z = [m0 as f64 * lat.h[0], if dim == 2 { m1 as f64 * lat.h[1] } else { 0.0 }];
                nodes.push(Node { z, weight, value: v, grad: g });
                index.push([m0, m1]);
            }
        }
    }
    Kernel::finish(format!("{}*self", rho.id), dim, None, nodes, rho.radial, false, Some(Lattice { h: lat.h, shift: 0.0, index }))
}

fn require_kernel_dim(u: &dyn Field, rho: &Kernel) -> Result<()> {
    if u.dim() != rho.dim {
        return Err(LabError::Parameter(format!("field dimension {} does not match kernel dimension {}", u.dim(), rho.dim)));
    }
    Ok(())
}

/// `u_ℓ(x)`.
pub fn mollify_at(u: &dyn Field, rho: &Kernel, ell: f64, x: Vec2, t: f64) -> Result<Vec2> {
    let mut acc = [0.0; 2];
    for n in &rho.nodes {
        let v = u.eval([x[0] - ell * n.z[0], x[1] - ell * n.z[1]], t)?;
        let c = n.weight * n.value;
        acc[0] += c * v[0];
        acc[1] += c * v[1];
    }
    Ok(acc)
}

/// `(u_ℓ)_ℓ(x)` by nested quadrature.
pub fn double_mollify_at(u: &dyn Field, rho: &Kernel, ell: f64, x: Vec2, t: f64) -> Result<Vec2> {
    let mut acc = [0.0; 2];
    for n in &rho.nodes {
        let inner = mollify_at(u, rho, ell, [x[0] - ell * n.z[0], x[1] - ell * n.z[1]], t)?;
        let c = n.weight * n.value;
        acc[0] += c * inner[0];
        acc[1] += c * inner[1];
    }
    Ok(acc)
}

/// Window of `grid` on which a convolution at scale `ell` is valid.
pub fn scale_window(u: &dyn Field, rho: &Kernel, grid: &Grid, ell: f64, reach: f64) -> Result<Grid> {
    require_kernel_dim(u, rho)?;
    check_scale(u, ell)?;
    check_scale_spacing(grid.max_spacing(), ell)?;
    Ok(grid.interior(ell * reach)?.grid)
}

/// `u ∗ ρ_ℓ` on the interior window of `grid` with margin `ℓ`.
pub fn mollify(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, t: f64) -> Result<SampledField> {
    let window = scale_window(u, rho, grid, ell, rho.support_radius().max(1.0))?;
    let m = u.components();
    let mut values = Vec::with_capacity(window.len() * m);
    for idx in 0..window.len() {
        let v = mollify_at(u, rho, ell, window.node(idx), t)?;
        values.extend_from_slice(&v[..m]);
    }
    SampledField::new(window, m, values, t)
}

/// `sup |(φ u_ℓ)_ℓ − φ (u_ℓ)_ℓ|` over the doubly shrunk window of `grid`.
///
/// `u_ℓ` is sampled on the first window and re-mollified from its samples.
pub fn commutator_norm(phi: &TestFunction, u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, t: f64) -> Result<f64> {
    let u_ell = mollify(u, rho, ell, grid, t)?;
    let w1 = u_ell.grid.clone();
    let m = u_ell.components;
    let phi_u = SampledField::from_fn(&w1, m, t, |x| {
        let idx = nearest_index(&w1, x);
        let v = u_ell.at(idx);
        let p = phi.value(x);
        [p * v[0], p * v[1]]
    })?;
    let a = mollify(&phi_u, rho, ell, &w1, t)?;
    let b = mollify(&u_ell, rho, ell, &w1, t)?;
    let mut sup: f64 = 0.0;
    for idx in 0..a.grid.len() {
        let x = a.grid.node(idx);
        let p = phi.value(x);
        let va = a.at(idx);
        let vb = b.at(idx);
        sup = sup.max(norm([va[0] - p * vb[0], va[1] - p * vb[1]]));
    }
    Ok(sup)
}

fn nearest_index(g: &Grid, x: Vec2) -> usize {
    let i = (((x[0] - g.origin[0]) / g.spacing[0]) - 0.5).round() as usize;
    let j = if g.dim == 2 { (((x[1] - g.origin[1]) / g.spacing[1]) - 0.5).round() as usize } else { 0 };
    i.min(g.counts[0] - 1) + g.counts[0] * j.min(g.counts[1] - 1)
}
