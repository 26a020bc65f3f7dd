//! Blow-ups at a point: Lebesgue/jump classification, one-sided traces, the
//! half-space profile `α` and the constant `ᾱ`, and the limit Reynolds stress.
//!
//! Everything is expressed through the kernel's node quadrature. In
//! particular `α` is the discrete half-space mass
//!
//! ```text
//! α_ν(y) = Σ_i w_i ρ(z_i) H((y − z_i)·ν),   H(0) = 1/2,
//! ```
//!
//! which is what the shifted averages of an exact jump converge to, and
//! satisfies `α(y) + α(−y) = 1` exactly for symmetric node sets.

use std::fmt::Write as _;

use crate::error::{LabError, Result};
use crate::flux::local_moments;
use crate::grid::{dot, norm, Field, Mat2, Vec2};
use crate::mollify::Kernel;

/// `ν` points from the minus side to the plus side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpProfile {
    pub x0: Vec2,
    pub u_plus: Vec2,
    pub u_minus: Vec2,
    pub nu: Vec2,
}

impl JumpProfile {
    pub fn new(x0: Vec2, u_plus: Vec2, u_minus: Vec2, nu: Vec2) -> Result<Self> {
        let n = norm(nu);
        if !(n > 0.0 && n.is_finite()) {
            return Err(LabError::Parameter("jump normal must be nonzero".into()));
        }
        Ok(Self { x0, u_plus, u_minus, nu: [nu[0] / n, nu[1] / n] })
    }

    pub fn jump(&self) -> Vec2 {
        [self.u_plus[0] - self.u_minus[0], self.u_plus[1] - self.u_minus[1]]
    }

    /// Flips `ν` (and swaps the traces) so the first nonzero component of `ν` is positive.
    pub fn canonical(self) -> Self {
        let flip = if self.nu[0].abs() > 1e-12 { self.nu[0] < 0.0 } else { self.nu[1] < 0.0 };
        if flip {
            Self { x0: self.x0, u_plus: self.u_minus, u_minus: self.u_plus, nu: [-self.nu[0], -self.nu[1]] }
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlowupTag {
    Lebesgue(Vec2),
    Jump(JumpProfile),
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupClass {
    pub x0: Vec2,
    pub tag: BlowupTag,
    pub ells: Vec<f64>,
    /// RMS misfit of the shifted averages to a constant, per ℓ.
    pub constant_residuals: Vec<f64>,
    /// RMS misfit to the best two-sided profile, per ℓ.
    pub jump_residuals: Vec<f64>,
    pub scale: f64,
}

impl BlowupClass {
    pub fn tag_name(&self) -> &'static str {
        match self.tag {
            BlowupTag::Lebesgue(_) => "lebesgue",
            BlowupTag::Jump(_) => "jump",
            BlowupTag::Unresolved => "unresolved",
        }
    }
}

/// `Σ w ρ(z) u(x₀ + ℓ(y − z))`.
pub fn shifted_average(u: &dyn Field, x0: Vec2, ell: f64, y: Vec2, rho: &Kernel, t: f64) -> Result<Vec2> {
    rho.require_radial("shifted_average")?;
    let mut acc = [0.0; 2];
    for n in &rho.nodes {
        let v = u.eval([x0[0] + ell * (y[0] - n.z[0]), x0[1] + ell * (y[1] - n.z[1])], t)?;
        let c = n.weight * n.value;
        acc[0] += c * v[0];
        acc[1] += c * v[1];
    }
    Ok(acc)
}

/// Node masses sorted by their projection on a direction, for fast `α_ν`.
struct Projection {
    keys: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Projection {
    fn new(rho: &Kernel, nu: Vec2) -> Self {
        let mut pairs: Vec<(f64, f64)> = rho.nodes.iter().map(|n| (dot(n.z, nu), n.weight * n.value)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cumulative = Vec::with_capacity(pairs.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for p in &pairs {
            acc += p.1;
            cumulative.push(acc);
        }
        Self { keys: pairs.into_iter().map(|p| p.0).collect(), cumulative }
    }

    /// Mass strictly below `s` plus half the mass at `s`.
    fn alpha(&self, s: f64) -> f64 {
        let below = self.keys.partition_point(|k| *k < s);
        let upto = self.keys.partition_point(|k| *k <= s);
        let total = self.cumulative[self.keys.len()];
        (self.cumulative[below] + 0.5 * (self.cumulative[upto] - self.cumulative[below])) / total
    }
}

fn require_alpha_kernel(rho: &Kernel) -> Result<()> {
    rho.require_radial("alpha_profile")?;
    if !rho.is_nonnegative() {
        return Err(LabError::Precondition("alpha_profile needs a nonnegative kernel".into()));
    }
    Ok(())
}

/// Discrete `α_ν(y)` for the half-space `{z·ν > 0}`.
pub fn alpha_profile_dir(rho: &Kernel, y: Vec2, nu: Vec2) -> Result<f64> {
    require_alpha_kernel(rho)?;
    Ok(Projection::new(rho, nu).alpha(dot(y, nu)))
}

fn last_axis(rho: &Kernel) -> Vec2 {
    if rho.dim == 1 {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    }
}

/// `α(y)` for the half-space `ℝ^d_+ = {z_d > 0}`.
pub fn alpha_profile(rho: &Kernel, y: Vec2) -> Result<f64> {
    alpha_profile_dir(rho, y, last_axis(rho))
}

/// `ᾱ = Σ w ρ(y) α(y)(1 − α(y))`, cached on the kernel.
pub fn alpha_bar(rho: &Kernel) -> Result<f64> {
    require_alpha_kernel(rho)?;
    if let Some(v) = rho.alpha_bar_cell().get() {
        return Ok(*v);
    }
    let proj = Projection::new(rho, last_axis(rho));
    let nu = last_axis(rho);
    let v = rho
        .nodes
        .iter()
        .map(|n| {
            let a = proj.alpha(dot(n.z, nu));
            n.weight * n.value * a * (1.0 - a)
        })
        .sum();
    Ok(*rho.alpha_bar_cell().get_or_init(|| v))
}

/// `ᾱ (u⁺ − u⁻) ⊗ (u⁺ − u⁻)`.
pub fn limit_reynolds(profile: &JumpProfile, rho: &Kernel) -> Result<Mat2> {
    let a = alpha_bar(rho)?;
    let j = profile.jump();
    Ok([[a * j[0] * j[0], a * j[0] * j[1]], [a * j[1] * j[0], a * j[1] * j[1]]])
}

/// `ᾱ |u⁺ − u⁻|² ⟨u⁺ − u⁻, ν⟩`.
pub fn jump_flux_density(profile: &JumpProfile, rho: &Kernel) -> Result<f64> {
    let a = alpha_bar(rho)?;
    let j = profile.jump();
    Ok(a * dot(j, j) * dot(j, profile.nu))
}

/// `((u⊗u)_ℓ − u_ℓ⊗u_ℓ)_ℓ(x₀)` as `[11, 12, 22]`, by nested node quadrature.
///
/// `outer` discretizes the same kernel for the outer convolution. With a node
/// lattice incommensurate with `rho`'s (odd vs even resolution) the nested sum
/// never lands exactly on a jump through `x₀`, a null set in the continuum.
pub fn double_mollified_stress(u: &dyn Field, rho: &Kernel, outer: &Kernel, ell: f64, x0: Vec2, t: f64) -> Result<[f64; 3]> {
    let mut acc = [0.0; 3];
    for n in &outer.nodes {
        let r = local_moments(u, rho, ell, [x0[0] - ell * n.z[0], x0[1] - ell * n.z[1]], t)?.reynolds();
        let c = n.weight * n.value;
        for k in 0..3 {
            acc[k] += c * r[k];
        }
    }
    Ok(acc)
}

pub fn precise_representative(class: &BlowupClass) -> Result<Vec2> {
    match &class.tag {
        BlowupTag::Lebesgue(v) => Ok(*v),
        BlowupTag::Jump(p) => Ok([0.5 * (p.u_plus[0] + p.u_minus[0]), 0.5 * (p.u_plus[1] + p.u_minus[1])]),
        BlowupTag::Unresolved => {
            Err(LabError::Classification(format!("no precise representative at ({}, {}): blow-up unresolved", class.x0[0], class.x0[1])))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    /// Reference magnitude for the thresholds; defaults to the largest shifted average seen.
    pub scale: Option<f64>,
    pub lebesgue_tol: f64,
    pub jump_tol: f64,
    /// Coarse directions over the half circle before refinement.
    pub directions: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { scale: None, lebesgue_tol: 1e-3, jump_tol: 1e-2, directions: 180 }
    }
}

/// Probe offsets `y`: the origin plus rings at radii 1/4, 1/2, 3/4 (16 angles each).
pub fn probes(dim: usize) -> Vec<Vec2> {
    if dim == 1 {
        return (-9..=9).map(|k| [k as f64 / 10.0, 0.0]).collect();
    }
    let mut out = vec![[0.0, 0.0]];
    for r in [0.25, 0.5, 0.75] {
        for k in 0..16 {
            let th = std::f64::consts::PI * k as f64 / 8.0;
            out.push([r * th.cos(), r * th.sin()]);
        }
    }
    out
}

fn constant_fit(samples: &[Vec2]) -> (Vec2, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().fold([0.0; 2], |a, s| [a[0] + s[0] / n, a[1] + s[1] / n]);
    let ss: f64 = samples.iter().map(|s| (s[0] - mean[0]).powi(2) + (s[1] - mean[1]).powi(2)).sum();
    (mean, (ss / n).sqrt())
}

/// Least-squares `S ≈ b + α d` per component; returns `(u⁺, u⁻, rms)`.
fn two_sided_fit(samples: &[Vec2], alpha: &[f64]) -> (Vec2, Vec2, f64) {
    let n = samples.len() as f64;
    let ma = alpha.iter().sum::<f64>() / n;
    let saa: f64 = alpha.iter().map(|a| (a - ma) * (a - ma)).sum();
    let mut b = [0.0; 2];
    let mut d = [0.0; 2];
    for c in 0..2 {
        let ms = samples.iter().map(|s| s[c]).sum::<f64>() / n;
        let sas: f64 = alpha.iter().zip(samples).map(|(a, s)| (a - ma) * (s[c] - ms)).sum();
        d[c] = if saa > 0.0 { sas / saa } else { 0.0 };
        b[c] = ms - d[c] * ma;
    }
    let ss: f64 = samples.iter().zip(alpha).map(|(s, a)| (s[0] - b[0] - a * d[0]).powi(2) + (s[1] - b[1] - a * d[1]).powi(2)).sum();
    ([b[0] + d[0], b[1] + d[1]], b, (ss / n).sqrt())
}

/// Best two-sided fit over directions `ν = (cos θ, sin θ)`, `θ ∈ [0, π)`.
fn fit_direction(rho: &Kernel, ys: &[Vec2], samples: &[Vec2], directions: usize) -> (f64, Vec2, Vec2, f64) {
    let eval = |theta: f64| -> (Vec2, Vec2, f64) {
        let nu = [theta.cos(), theta.sin()];
        let proj = Projection::new(rho, nu);
        let alpha: Vec<f64> = ys.iter().map(|y| proj.alpha(dot(*y, nu))).collect();
        two_sided_fit(samples, &alpha)
    };
    if rho.dim == 1 {
        let (p, m, r) = eval(0.0);
        return (0.0, p, m, r);
    }
    let step = std::f64::consts::PI / directions as f64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..directions {
        let th = k as f64 * step;
        let r = eval(th).2;
        if r < best.1 {
            best = (th, r);
        }
    }
    // Fine scan of the bracket around the coarse minimum. The discrete α is
    // piecewise constant in θ, so the misfit has plateaus; return the middle
    // of the plateau that holds the minimum.
    let fine = 400;
    let (a, b) = (best.0 - step, best.0 + step);
    let thetas: Vec<f64> = (0..=fine).map(|k| a + (b - a) * k as f64 / fine as f64).collect();
    let res: Vec<f64> = thetas.iter().map(|&th| eval(th).2).collect();
    let (imin, rmin) = res.iter().enumerate().fold((0, f64::INFINITY), |m, (i, r)| if *r < m.1 { (i, *r) } else { m });
    let flat = |r: f64| r <= rmin + 1e-12 * (1.0 + rmin);
    let mut lo = imin;
    while lo > 0 && flat(res[lo - 1]) {
        lo -= 1;
    }
    let mut hi = imin;
    while hi < fine && flat(res[hi + 1]) {
        hi += 1;
    }
    let th = 0.5 * (thetas[lo] + thetas[hi]);
    let (p, m, r) = eval(th);
    (th.rem_euclid(std::f64::consts::PI), p, m, r)
}

/// Classifies the blow-up of `u` at `x₀` from shifted averages over the ladder.
pub fn classify_point(u: &dyn Field, x0: Vec2, ladder: &[f64], rho: &Kernel, t: f64, opts: &ClassifyOptions) -> Result<BlowupClass> {
    rho.require_radial("classify_point")?;
    if ladder.len() < 4 {
        return Err(LabError::Precondition(format!("classification needs ≥ 4 scales, got {}", ladder.len())));
    }
    let ys = probes(rho.dim);
    let mut all = Vec::with_capacity(ladder.len());
    for &ell in ladder {
        crate::grid::check_scale(u, ell)?;
        let s = ys.iter().map(|y| shifted_average(u, x0, ell, *y, rho, t)).collect::<Result<Vec<_>>>()?;
        all.push(s);
    }
    let scale = opts.scale.unwrap_or_else(|| all.iter().flatten().map(|v| norm(*v)).fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
    let mut constant_residuals = Vec::new();
    let mut jump_residuals = Vec::new();
    let mut fits = Vec::new();
    for s in &all {
        let (mean, rc) = constant_fit(s);
        let (th, up, um, rj) = fit_direction(rho, &ys, s, opts.directions);
        constant_residuals.push(rc);
        jump_residuals.push(rj);
        fits.push((mean, th, up, um));
    }
    let n = ladder.len();
    let finest = n - 1;
    let tag = if constant_residuals[n - 2..].iter().all(|r| *r < opts.lebesgue_tol * scale) {
        BlowupTag::Lebesgue(fits[finest].0)
    } else if jump_residuals[n - 3..].iter().all(|r| *r < opts.jump_tol * scale) {
        let (th, up, um) = (fits[finest].1, fits[finest].2, fits[finest].3);
        let nu = if rho.dim == 1 { [1.0, 0.0] } else { [th.cos(), th.sin()] };
        let p = JumpProfile::new(x0, up, um, nu)?.canonical();
        if norm(p.jump()) > 10.0 * jump_residuals[finest] {
            BlowupTag::Jump(p)
        } else {
            BlowupTag::Unresolved
        }
    } else {
        BlowupTag::Unresolved
    };
    Ok(BlowupClass { x0, tag, ells: ladder.to_vec(), constant_residuals, jump_residuals, scale })
}

/// Structured-text classification report, one block per probe point.
pub fn report(classes: &[BlowupClass]) -> String {
    let mut out = String::new();
    let f = |v: f64| format!("{v:.6e}");
    for c in classes {
        let _ = writeln!(out, "point {} {}", f(c.x0[0]), f(c.x0[1]));
        let _ = writeln!(out, "  tag {}", c.tag_name());
        match &c.tag {
            BlowupTag::Lebesgue(v) => {
                let _ = writeln!(out, "  value {} {}", f(v[0]), f(v[1]));
            }
            BlowupTag::Jump(p) => {
                let _ = writeln!(out, "  u_plus {} {}", f(p.u_plus[0]), f(p.u_plus[1]));
                let _ = writeln!(out, "  u_minus {} {}", f(p.u_minus[0]), f(p.u_minus[1]));
                let _ = writeln!(out, "  nu {} {}", f(p.nu[0]), f(p.nu[1]));
            }
            BlowupTag::Unresolved => {}
        }
        let join = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "  ells {}", join(&c.ells));
        let _ = writeln!(out, "  constant_residuals {}", join(&c.constant_residuals));
        let _ = writeln!(out, "  jump_residuals {}", join(&c.jump_residuals));
    }
    out
}
