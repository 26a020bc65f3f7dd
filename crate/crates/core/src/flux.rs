//! Approximate dissipation fluxes and their weak pairings.
//!
//! All mollified quantities at a point come from one pass over the kernel
//! nodes ([`local_moments`]); gradients of `u_ℓ` use `∇ρ`, never differences.

use crate::error::{LabError, Result};
use crate::grid::{check_scale, check_scale_spacing, Field, Grid, Mat2, SampledField, Vec2};
use crate::mollify::Kernel;
use crate::testfn::{SpaceTimeTest, TestFunction};

/// Which local energy balance the fields satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// `∂_t |u|²/2 + div(u(|u|²/2 + p)) = −D + f·u`
    Euler,
    /// `∂_t u²/2 + ∂_x(u³/3) = D` in one dimension; `D` is the entropy defect.
    Burgers,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Euler => "euler",
            Model::Burgers => "burgers",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    Cet,
    Dr,
    Bd,
    Energy,
}

impl FluxKind {
    pub fn name(self) -> &'static str {
        match self {
            FluxKind::Cet => "cet",
            FluxKind::Dr => "dr",
            FluxKind::Bd => "bd",
            FluxKind::Energy => "energy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cet" => Ok(FluxKind::Cet),
            "dr" => Ok(FluxKind::Dr),
            "bd" => Ok(FluxKind::Bd),
            "energy" => Ok(FluxKind::Energy),
            _ => Err(LabError::Input(format!("unknown flux kind `{s}`"))),
        }
    }
}

/// Kernel moments of the increments `δ = u(x − ℓz) − u(x)` at one point,
/// with `grad[i][k] = ∂_k (u_i)_ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMoments {
    pub base: Vec2,
    pub increment_mean: Vec2,
    /// `(δ⊗δ)_ℓ` as `[11, 12, 22]`.
    pub increment_second: [f64; 3],
    pub grad: Mat2,
}

impl LocalMoments {
    /// `u_ℓ(x)`.
    pub fn mean(&self) -> Vec2 {
        [self.base[0] + self.increment_mean[0], self.base[1] + self.increment_mean[1]]
    }

    /// `R^ℓ = (u⊗u)_ℓ − u_ℓ⊗u_ℓ = (δ⊗δ)_ℓ − δ_ℓ⊗δ_ℓ` as `[11, 12, 22]`.
    pub fn reynolds(&self) -> [f64; 3] {
        let m = self.increment_mean;
        let s = self.increment_second;
        [s[0] - m[0] * m[0], s[1] - m[0] * m[1], s[2] - m[1] * m[1]]
    }
}

pub fn local_moments(u: &dyn Field, rho: &Kernel, ell: f64, x: Vec2, t: f64) -> Result<LocalMoments> {
    // Accumulate increments δ = u(x − ℓz) − u(x): constants cancel exactly and
    // the stress is computed from a Galilean-invariant quantity.
    let u0 = u.eval(x, t)?;
    let mut mean = [0.0; 2];
    let mut second = [0.0; 3];
    let mut grad = [[0.0; 2]; 2];
    for n in &rho.nodes {
        let v = u.eval([x[0] - ell * n.z[0], x[1] - ell * n.z[1]], t)?;
        let d = [v[0] - u0[0], v[1] - u0[1]];
        let c = n.weight * n.value;
        mean[0] += c * d[0];
        mean[1] += c * d[1];
        second[0] += c * d[0] * d[0];
        second[1] += c * d[0] * d[1];
        second[2] += c * d[1] * d[1];
        for i in 0..2 {
            for k in 0..2 {
                grad[i][k] += n.weight * n.grad[k] * d[i];
            }
        }
    }
    for row in &mut grad {
        row[0] /= ell;
        row[1] /= ell;
    }
    Ok(LocalMoments { increment_mean: mean, increment_second: second, base: u0, grad })
}

/// Symmetric tensor field stored as `[R11, R12, R22]` per window node.
#[derive(Debug, Clone, PartialEq)]
pub struct ReynoldsStress {
    pub grid: Grid,
    pub ell: f64,
    pub values: Vec<[f64; 3]>,
}

impl ReynoldsStress {
    pub fn at(&self, idx: usize) -> Mat2 {
        let r = self.values[idx];
        [[r[0], r[1]], [r[1], r[2]]]
    }
}

fn window(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid) -> Result<Grid> {
    crate::mollify::scale_window(u, rho, grid, ell, rho.support_radius().max(1.0))
}

pub fn reynolds_stress(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, t: f64) -> Result<ReynoldsStress> {
    let w = window(u, rho, ell, grid)?;
    let values = crate::par::try_map(w.len(), |idx| local_moments(u, rho, ell, w.node(idx), t).map(|m| m.reynolds()))?;
    Ok(ReynoldsStress { grid: w, ell, values })
}

/// `R^ℓ : ∇u_ℓ` at one point.
pub fn cet_at(u: &dyn Field, rho: &Kernel, ell: f64, x: Vec2, t: f64) -> Result<f64> {
    let m = local_moments(u, rho, ell, x, t)?;
    let r = m.reynolds();
    let g = m.grad;
    Ok(r[0] * g[0][0] + r[1] * (g[0][1] + g[1][0]) + r[2] * g[1][1])
}

fn scalar_on_window(w: Grid, t: f64, f: impl Fn(Vec2) -> Result<f64> + Sync) -> Result<SampledField> {
    let values = crate::par::try_map(w.len(), |idx| f(w.node(idx)))?;
    SampledField::new(w, 1, values, t)
}

pub fn cet_flux(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, t: f64) -> Result<SampledField> {
    let w = window(u, rho, ell, grid)?;
    scalar_on_window(w, t, |x| cet_at(u, rho, ell, x, t))
}

/// Duchon–Robert flux at one point.
///
/// Euler: `(4ℓ)⁻¹ Σ w ∇ρ(z)·δ|δ|²`. Burgers: `−(12ℓ)⁻¹ Σ w ρ'(z) δ³`, signed
/// so that its limit is the entropy defect `(1/12)[u]³` of the balance
/// `∂_t u²/2 + ∂_x(u³/3) = D`.
pub fn dr_at(u: &dyn Field, rho: &Kernel, ell: f64, x: Vec2, t: f64, model: Model) -> Result<f64> {
    let u0 = u.eval(x, t)?;
    let mut acc = 0.0;
    for n in &rho.nodes {
        let v = u.eval([x[0] + ell * n.z[0], x[1] + ell * n.z[1]], t)?;
        let d = [v[0] - u0[0], v[1] - u0[1]];
        let q = d[0] * d[0] + d[1] * d[1];
        acc += n.weight * (n.grad[0] * d[0] + n.grad[1] * d[1]) * q;
    }
    Ok(match model {
        Model::Euler => acc / (4.0 * ell),
        Model::Burgers => -acc / (12.0 * ell),
    })
}

pub fn dr_flux(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, t: f64, model: Model) -> Result<SampledField> {
    if model == Model::Burgers && u.dim() != 1 {
        return Err(LabError::Parameter("Burgers mode is one-dimensional".into()));
    }
    let w = window(u, rho, ell, grid)?;
    scalar_on_window(w, t, |x| dr_at(u, rho, ell, x, t, model))
}

/// Checks that `supp φ` sits inside the window of `grid` with margin `margin`.
fn require_support(phi: &TestFunction, grid: &Grid, margin: f64) -> Result<()> {
    let (lo, hi) = phi.support_box();
    let glo = grid.lo();
    let ghi = grid.hi();
    for a in 0..grid.dim {
        if grid.periodic[a] {
            continue;
        }
        if lo[a] < glo[a] + margin || hi[a] > ghi[a] - margin {
            return Err(LabError::Domain(format!(
                "test function support [{}, {}] on axis {a} leaves the window at margin {margin}",
                lo[a], hi[a]
            )));
        }
    }
    Ok(())
}

/// `Σ_x φ(x) f(x) ΔV` over grid nodes in `supp φ`.
pub fn pair(phi: &TestFunction, grid: &Grid, f: impl Fn(Vec2) -> Result<f64> + Sync) -> Result<f64> {
    let (lo, hi) = phi.support_box();
    let dv = grid.cell_volume();
    let nodes = grid.nodes_in_box(lo, hi);
    let terms = crate::par::try_map(nodes.len(), |k| -> Result<f64> {
        let x = grid.node(nodes[k]);
        let p = phi.value(x);
        if p == 0.0 {
            Ok(0.0)
        } else {
            Ok(p * f(x)? * dv)
        }
    })?;
    Ok(terms.iter().sum())
}

fn pair_checked(
    u: &dyn Field,
    rho: &Kernel,
    ell: f64,
    grid: &Grid,
    phi: &TestFunction,
    margin: f64,
    f: impl Fn(Vec2) -> Result<f64> + Sync,
) -> Result<f64> {
    check_scale(u, ell)?;
    check_scale_spacing(grid.max_spacing(), ell)?;
    if u.dim() != rho.dim || phi.dim != rho.dim {
        return Err(LabError::Parameter("field, kernel and test function dimensions differ".into()));
    }
    require_support(phi, grid, margin * ell)?;
    pair(phi, grid, f)
}

/// `⟨D_ℓ^{CET}, φ⟩`.
pub fn cet_pair(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, phi: &TestFunction, t: f64) -> Result<f64> {
    pair_checked(u, rho, ell, grid, phi, 1.0, |x| cet_at(u, rho, ell, x, t))
}

/// `⟨D_ℓ^{DR}, φ⟩`.
pub fn dr_pair(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, phi: &TestFunction, t: f64, model: Model) -> Result<f64> {
    pair_checked(u, rho, ell, grid, phi, 1.0, |x| dr_at(u, rho, ell, x, t, model))
}

/// `∫ φ (R^ℓ)_ℓ : Eu`, realized as `−Σ u_i ∂_j(φ S_ij) ΔV` with `S = (R^ℓ)_ℓ`.
///
/// `R^ℓ` is sampled on an auxiliary grid of spacing `min(Δx, ℓ/8)` covering
/// `supp φ` plus one kernel radius; `S` and `∇S` are kernel quadratures over
/// its multilinear interpolant.
pub fn bd_flux_pair(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, phi: &TestFunction, t: f64) -> Result<f64> {
    bd_flux_pair_detail(u, rho, ell, grid, phi, t).map(|(v, _)| v)
}

/// [`bd_flux_pair`] together with `Σ |u_i ∂_j(φ S_ij)| ΔV`, the magnitude
/// against which cancellation in the pairing is judged.
pub fn bd_flux_pair_detail(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, phi: &TestFunction, t: f64) -> Result<(f64, f64)> {
    rho.require_radial("bd_flux_pair")?;
    if u.dim() != 2 || u.components() != 2 {
        return Err(LabError::Parameter("bd_flux_pair needs a 2D vector field".into()));
    }
    check_scale(u, ell)?;
    check_scale_spacing(grid.max_spacing(), ell)?;
    require_support(phi, grid, 2.0 * ell)?;
    let (lo, hi) = phi.support_box();
    let h = grid.min_spacing().min(ell / 8.0);
    let pad = ell * 1.02 + h;
    let n = [(((hi[0] - lo[0]) + 2.0 * pad) / h).ceil() as usize, (((hi[1] - lo[1]) + 2.0 * pad) / h).ceil() as usize];
    let aux = Grid::new(2, [lo[0] - pad, lo[1] - pad], [h, h], n, [false, false])?;
    let rs = crate::par::try_map(aux.len(), |idx| local_moments(u, rho, ell, aux.node(idx), t).map(|m| m.reynolds()))?;
    let r_a: Vec<f64> = rs.iter().flat_map(|r| [r[0], r[1]]).collect();
    let r_b: Vec<f64> = rs.iter().flat_map(|r| [r[2], 0.0]).collect();
    let ra = SampledField::new(aux.clone(), 2, r_a, t)?;
    let rb = SampledField::new(aux, 2, r_b, t)?;
    let dv = grid.cell_volume();
    let nodes = grid.nodes_in_box(lo, hi);
    let terms = crate::par::try_map(nodes.len(), |k| -> Result<f64> {
        let x = grid.node(nodes[k]);
        let p = phi.value(x);
        let gp = phi.gradient(x);
        if p == 0.0 && gp == [0.0, 0.0] {
            return Ok(0.0);
        }
        // S and the kernel derivative of each of its three entries
        let mut s = [0.0; 3];
        let mut ds = [[0.0; 2]; 3];
        for nd in &rho.nodes {
            let y = [x[0] - ell * nd.z[0], x[1] - ell * nd.z[1]];
            let a = ra.eval(y, t)?;
            let b = rb.eval(y, t)?;
            let r = [a[0], a[1], b[0]];
            let c = nd.weight * nd.value;
            for k in 0..3 {
                s[k] += c * r[k];
                ds[k][0] += nd.weight * nd.grad[0] * r[k];
                ds[k][1] += nd.weight * nd.grad[1] * r[k];
            }
        }
        for row in &mut ds {
            row[0] /= ell;
            row[1] /= ell;
        }
        // ∂_j(φ S_ij) for i = 0, 1
        let div0 = gp[0] * s[0] + gp[1] * s[1] + p * (ds[0][0] + ds[1][1]);
        let div1 = gp[0] * s[1] + gp[1] * s[2] + p * (ds[1][0] + ds[2][1]);
        let v = u.eval(x, t)?;
        Ok(-(v[0] * div0 + v[1] * div1) * dv)
    })?;
    let magnitude = terms.iter().map(|v| v.abs()).sum();
    Ok((terms.iter().sum(), magnitude))
}

/// `∫ φ (Λu_ℓ) : (u_ℓ ⊗ u_ℓ)` with `Λv = ∇v − ∇vᵀ`.
pub fn vorticity_form_residual(u: &dyn Field, rho: &Kernel, ell: f64, grid: &Grid, phi: &TestFunction, t: f64) -> Result<f64> {
    if !rho.half_support {
        return Err(LabError::Precondition("vorticity form needs a half-support kernel".into()));
    }
    if u.dim() != 2 {
        return Err(LabError::Parameter("vorticity form is two-dimensional".into()));
    }
    pair_checked(u, rho, ell, grid, phi, 1.0, |x| {
        let m = local_moments(u, rho, ell, x, t)?;
        let g = m.grad;
        let v = m.mean();
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let a = g[i][j] - g[j][i];
                acc += a * (v[i] * v[j]);
            }
        }
        Ok(acc)
    })
}

/// How the time derivative in the energy balance is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSampling {
    /// `∂_t = 0`; the space-time pairing is the spatial one times `∫ψ`.
    Stationary,
    /// Centered differences of slices at `t ± dt`, at `nodes` Gauss points
    /// spread over the time support of `ψ`.
    Slices { dt: f64, nodes: usize },
}

/// Fields entering the local energy balance.
pub struct BalanceInput<'a> {
    pub model: Model,
    pub u: &'a dyn Field,
    pub p: Option<&'a dyn Field>,
    pub f: Option<&'a dyn Field>,
    pub time: TimeSampling,
}

/// `⟨∂_t e(u_ℓ) + div F(u_ℓ, p_ℓ), φ⟩ − ⟨f_ℓ·u_ℓ, φ⟩` with the energy and flux
/// of the chosen model, the divergence taken weakly against `∇φ`.
pub fn energy_balance_residual(input: &BalanceInput, phi: &SpaceTimeTest, rho: &Kernel, ell: f64, grid: &Grid) -> Result<f64> {
    let u = input.u;
    let space = &phi.space;
    if input.model == Model::Euler && input.p.is_none() {
        return Err(LabError::Input("Euler energy balance needs a pressure field".into()));
    }
    if input.model == Model::Burgers && u.dim() != 1 {
        return Err(LabError::Parameter("Burgers mode is one-dimensional".into()));
    }
    check_scale(u, ell)?;
    check_scale_spacing(grid.max_spacing(), ell)?;
    require_support(space, grid, ell)?;
    let (lo, hi) = space.support_box();
    let nodes = grid.nodes_in_box(lo, hi);
    let dv = grid.cell_volume();
    let moll = |fld: &dyn Field, x: Vec2, t: f64| crate::mollify::mollify_at(fld, rho, ell, x, t);

    let spatial = |t: f64| -> Result<f64> {
        let mut acc = 0.0;
        for &idx in &nodes {
            let x = grid.node(idx);
            let gp = space.gradient(x);
            let pv = space.value(x);
            if pv == 0.0 && gp == [0.0, 0.0] {
                continue;
            }
            let ul = moll(u, x, t)?;
            let flux = match input.model {
                Model::Euler => {
                    let pl = moll(input.p.unwrap(), x, t)?[0];
                    let e = 0.5 * (ul[0] * ul[0] + ul[1] * ul[1]) + pl;
                    [ul[0] * e, ul[1] * e]
                }
                Model::Burgers => [ul[0] * ul[0] * ul[0] / 3.0, 0.0],
            };
            let mut local = -(flux[0] * gp[0] + flux[1] * gp[1]);
            if let Some(f) = input.f {
                let fl = moll(f, x, t)?;
                local -= pv * (fl[0] * ul[0] + fl[1] * ul[1]);
            }
            acc += local * dv;
        }
        Ok(acc)
    };
    let energy_rate = |t: f64, dt: f64| -> Result<f64> {
        let mut acc = 0.0;
        for &idx in &nodes {
            let x = grid.node(idx);
            let pv = space.value(x);
            if pv == 0.0 {
                continue;
            }
            let a = moll(u, x, t + dt)?;
            let b = moll(u, x, t - dt)?;
            let ea = 0.5 * (a[0] * a[0] + a[1] * a[1]);
            let eb = 0.5 * (b[0] * b[0] + b[1] * b[1]);
            acc += pv * (ea - eb) / (2.0 * dt) * dv;
        }
        Ok(acc)
    };

    match input.time {
        TimeSampling::Stationary => Ok(spatial(phi.t_center)? * phi.time_mass()),
        TimeSampling::Slices { dt, nodes: nt } => {
            if !(dt > 0.0) || nt == 0 {
                return Err(LabError::Parameter("time slices need dt > 0 and at least one node".into()));
            }
            let (ta, tb) = phi.time_support();
            let (gx, gw) = crate::quad::gauss_legendre(nt);
            let mut acc = 0.0;
            for (xi, wi) in gx.iter().zip(&gw) {
                let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * xi;
                let psi = phi.time_profile(t).0;
                if psi == 0.0 {
                    continue;
                }
                acc += 0.5 * (tb - ta) * wi * psi * (spatial(t)? + energy_rate(t, dt)?);
            }
            Ok(acc)
        }
    }
}
