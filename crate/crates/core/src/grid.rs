//! Uniform grids, sampled fields and the pointwise field diagnostics
//! (increments, weak divergence, difference-quotient norms).
//!
//! Grids are cell-centered: node `i` along an axis sits at
//! `origin + (i + 1/2) * spacing`, so the physical extent of an axis is
//! `[origin, origin + counts * spacing]`. Sampled fields are evaluated
//! off-node by multilinear interpolation.

use crate::error::{LabError, Result};
use crate::testfn::TestFunction;

/// A point or vector in at most two dimensions. One-dimensional objects use
/// the first slot and keep the second at zero.
pub type Vec2 = [f64; 2];
/// Row-major 2x2 matrix, `m[i][j]`.
pub type Mat2 = [[f64; 2]; 2];

pub const MIN_COUNTS: usize = 8;

/// Anything that can be evaluated at a point and time.
///
/// Scenarios implement this with closed-form evaluation; [`SampledField`]
/// implements it by interpolation and reports its grid spacing so that
/// scale-dependent operations can enforce the grid/scale coupling rule.
pub trait Field: Sync {
    fn dim(&self) -> usize;
    fn components(&self) -> usize;
    fn eval(&self, x: Vec2, t: f64) -> Result<Vec2>;
    /// Sampling resolution, `None` for exact (closed-form) fields.
    fn spacing(&self) -> Option<f64> {
        None
    }
}

/// Closed-form field backed by a function pointer or closure.
pub struct FnField<F> {
    dim: usize,
    components: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(Vec2, f64) -> Vec2 + Sync,
{
    pub fn new(dim: usize, components: usize, f: F) -> Self {
        Self { dim, components, f }
    }
}

impl<F> Field for FnField<F>
where
    F: Fn(Vec2, f64) -> Vec2 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn components(&self) -> usize {
        self.components
    }
    fn eval(&self, x: Vec2, t: f64) -> Result<Vec2> {
        Ok((self.f)(x, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub origin: Vec2,
    pub spacing: Vec2,
    pub counts: [usize; 2],
    pub periodic: [bool; 2],
}

impl Grid {
    pub fn new(dim: usize, origin: Vec2, spacing: Vec2, counts: [usize; 2], periodic: [bool; 2]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(LabError::Parameter(format!("grid dimension {dim} not in {{1, 2}}")));
        }
        let mut counts = counts;
        let mut spacing = spacing;
        let mut periodic = periodic;
        if dim == 1 {
            counts[1] = 1;
            spacing[1] = 1.0;
            periodic[1] = false;
        }
        for a in 0..dim {
            if !(spacing[a] > 0.0 && spacing[a].is_finite()) {
                return Err(LabError::Parameter(format!("spacing must be positive, got {}", spacing[a])));
            }
            if counts[a] < MIN_COUNTS {
                return Err(LabError::Resolution(format!("need at least {MIN_COUNTS} points per axis, got {}", counts[a])));
            }
            if !origin[a].is_finite() {
                return Err(LabError::Parameter("non-finite origin".into()));
            }
        }
        Ok(Self { dim, origin: if dim == 1 { [origin[0], 0.0] } else { origin }, spacing, counts, periodic })
    }

    /// Square (or interval) grid covering `[lo, hi]^dim` with `n` cells per axis.
    pub fn uniform(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(LabError::Parameter(format!("empty extent [{lo}, {hi}]")));
        }
        let h = (hi - lo) / n as f64;
        Self::new(dim, [lo, lo], [h, h], [n, n], [false, false])
    }

    /// Grid covering an axis-aligned box with `n` cells along each axis.
    pub fn boxed(lo: Vec2, hi: Vec2, n: [usize; 2]) -> Result<Self> {
        let h = [(hi[0] - lo[0]) / n[0] as f64, (hi[1] - lo[1]) / n[1] as f64];
        Self::new(2, lo, h, n, [false, false])
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates for the flat index (axis 0 fastest).
    pub fn node(&self, idx: usize) -> Vec2 {
        let i = idx % self.counts[0];
        let j = idx / self.counts[0];
        self.node_ij(i, j)
    }

    pub fn node_ij(&self, i: usize, j: usize) -> Vec2 {
        let x = self.origin[0] + (i as f64 + 0.5) * self.spacing[0];
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + (j as f64 + 0.5) * self.spacing[1]]
        }
    }

    pub fn lo(&self) -> Vec2 {
        self.origin
    }

    pub fn hi(&self) -> Vec2 {
        [self.origin[0] + self.counts[0] as f64 * self.spacing[0], self.origin[1] + self.counts[1] as f64 * self.spacing[1]]
    }

    /// Quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0] * self.spacing[1]
        }
    }

    pub fn max_spacing(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0].max(self.spacing[1])
        }
    }

    pub fn min_spacing(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0].min(self.spacing[1])
        }
    }

    pub fn half_extent(&self) -> f64 {
        (0..self.dim).map(|a| 0.5 * self.counts[a] as f64 * self.spacing[a]).fold(f64::INFINITY, f64::min)
    }

    /// Points at distance greater than `margin` from every non-periodic boundary.
    pub fn interior(&self, margin: f64) -> Result<InteriorWindow> {
        if margin < 0.0 {
            return Err(LabError::Parameter("negative margin".into()));
        }
        let mut start = [0usize; 2];
        let mut counts = self.counts;
        for a in 0..self.dim {
            if self.periodic[a] {
                continue;
            }
            let n = self.counts[a];
            let lo = self.origin[a];
            let hi = lo + n as f64 * self.spacing[a];
            let first = (0..n).find(|&i| lo + (i as f64 + 0.5) * self.spacing[a] - lo > margin);
            let last = (0..n).rev().find(|&i| hi - (lo + (i as f64 + 0.5) * self.spacing[a]) > margin);
            match (first, last) {
                (Some(f), Some(l)) if f <= l => {
                    start[a] = f;
                    counts[a] = l - f + 1;
                }
                _ => return Err(LabError::Resolution(format!("interior window with margin {margin} is empty"))),
            }
        }
        let origin = [self.origin[0] + start[0] as f64 * self.spacing[0], self.origin[1] + start[1] as f64 * self.spacing[1]];
        // The window may hold fewer than MIN_COUNTS points; it is a view, not a new
        // sampling grid, so it bypasses Grid::new validation.
        let grid = Grid { dim: self.dim, origin, spacing: self.spacing, counts, periodic: self.periodic };
        Ok(InteriorWindow { margin, grid, offset: start })
    }

    pub fn contains(&self, x: Vec2) -> bool {
        let hi = self.hi();
        (0..self.dim).all(|a| self.periodic[a] || (x[a] >= self.origin[a] && x[a] <= hi[a]))
    }

    /// Flat indices of nodes inside the closed box `[lo, hi]`.
    pub fn nodes_in_box(&self, lo: Vec2, hi: Vec2) -> Vec<usize> {
        let range = |a: usize| -> (usize, usize) {
            if a >= self.dim {
                return (0, 1);
            }
            let h = self.spacing[a];
            let s = ((lo[a] - self.origin[a]) / h - 0.5).ceil().max(0.0) as usize;
            let e = (((hi[a] - self.origin[a]) / h - 0.5).floor() + 1.0).max(0.0) as usize;
            (s.min(self.counts[a]), e.min(self.counts[a]))
        };
        let (i0, i1) = range(0);
        let (j0, j1) = range(1);
        let mut out = Vec::with_capacity((i1.saturating_sub(i0)) * (j1.saturating_sub(j0)));
        for j in j0..j1 {
            for i in i0..i1 {
                out.push(i + self.counts[0] * j);
            }
        }
        out
    }
}

/// The part of a grid on which mollified quantities at a given scale are valid.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorWindow {
    pub margin: f64,
    pub grid: Grid,
    /// Index of the window's first node in the parent grid, per axis.
    pub offset: [usize; 2],
}

impl InteriorWindow {
    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: Grid,
    pub components: usize,
    /// `values[idx * components + c]`, flat index with axis 0 fastest.
    pub values: Vec<f64>,
    pub time: f64,
}

impl SampledField {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>, time: f64) -> Result<Self> {
        if components == 0 || components > 2 {
            return Err(LabError::Parameter(format!("unsupported component count {components}")));
        }
        if values.len() != grid.len() * components {
            return Err(LabError::Input(format!("expected {} values, got {}", grid.len() * components, values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::Input(format!("non-finite sample at position {i}")));
        }
        Ok(Self { grid, components, values, time })
    }

    /// Samples a field at every grid node.
    pub fn sample(field: &dyn Field, grid: &Grid, time: f64) -> Result<Self> {
        let m = field.components();
        let mut values = Vec::with_capacity(grid.len() * m);
        for idx in 0..grid.len() {
            let v = field.eval(grid.node(idx), time)?;
            values.extend_from_slice(&v[..m]);
        }
        Self::new(grid.clone(), m, values, time)
    }

    pub fn from_fn(grid: &Grid, components: usize, time: f64, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * components);
        for idx in 0..grid.len() {
            let v = f(grid.node(idx));
            values.extend_from_slice(&v[..components]);
        }
        Self::new(grid.clone(), components, values, time)
    }

    pub fn at(&self, idx: usize) -> Vec2 {
        let base = idx * self.components;
        if self.components == 1 {
            [self.values[base], 0.0]
        } else {
            [self.values[base], self.values[base + 1]]
        }
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.len()).map(|i| norm(self.at(i))).fold(0.0, f64::max)
    }

    fn axis_coord(&self, a: usize, x: f64) -> Result<(usize, usize, f64)> {
        let g = &self.grid;
        let n = g.counts[a];
        let h = g.spacing[a];
        let s = (x - g.origin[a]) / h - 0.5;
        if g.periodic[a] {
            let s = s.rem_euclid(n as f64);
            let i = (s.floor() as usize).min(n - 1);
            return Ok((i, (i + 1) % n, s - i as f64));
        }
        let tol = 1e-12 * h.max(1.0);
        let lo = g.origin[a];
        let hi = lo + n as f64 * h;
        if x < lo - tol || x > hi + tol || !x.is_finite() {
            return Err(LabError::Domain(format!("coordinate {x} outside [{lo}, {hi}] on axis {a}")));
        }
        let s = s.clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        Ok((i, i + 1, s - i as f64))
    }
}

impl Field for SampledField {
    fn dim(&self) -> usize {
        self.grid.dim
    }
    fn components(&self) -> usize {
        self.components
    }
    fn spacing(&self) -> Option<f64> {
        Some(self.grid.max_spacing())
    }

    fn eval(&self, x: Vec2, _t: f64) -> Result<Vec2> {
        let (i0, i1, fx) = self.axis_coord(0, x[0])?;
        if self.grid.dim == 1 {
            let a = self.at(i0);
            let b = self.at(i1);
            return Ok([a[0] + fx * (b[0] - a[0]), a[1] + fx * (b[1] - a[1])]);
        }
        let (j0, j1, fy) = self.axis_coord(1, x[1])?;
        let n0 = self.grid.counts[0];
        let v00 = self.at(i0 + n0 * j0);
        let v10 = self.at(i1 + n0 * j0);
        let v01 = self.at(i0 + n0 * j1);
        let v11 = self.at(i1 + n0 * j1);
        let mut out = [0.0; 2];
        for c in 0..self.components {
            let bottom = v00[c] + fx * (v10[c] - v00[c]);
            let top = v01[c] + fx * (v11[c] - v01[c]);
            out[c] = bottom + fy * (top - bottom);
        }
        Ok(out)
    }
}

pub fn norm(v: Vec2) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Grid/scale coupling: at least eight samples across the mollifier diameter.
pub fn check_scale(field: &dyn Field, ell: f64) -> Result<()> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(LabError::Resolution(format!("scale must be positive, got {ell}")));
    }
    if let Some(h) = field.spacing() {
        check_scale_spacing(h, ell)?;
    }
    Ok(())
}

pub fn check_scale_spacing(h: f64, ell: f64) -> Result<()> {
    if ell < 4.0 * h * (1.0 - 1e-12) {
        return Err(LabError::Resolution(format!("scale {ell} below 4 grid spacings ({})", 4.0 * h)));
    }
    Ok(())
}

/// `u(x + ell z) - u(x)`.
pub fn increment(u: &dyn Field, x: Vec2, ell: f64, z: Vec2, t: f64) -> Result<Vec2> {
    let a = u.eval(x, t)?;
    let b = u.eval([x[0] + ell * z[0], x[1] + ell * z[1]], t)?;
    Ok([b[0] - a[0], b[1] - a[1]])
}

/// Weak divergence `∫ u · ∇φ dx` by cell-centered quadrature on `grid`.
pub fn divergence_residual(u: &dyn Field, grid: &Grid, phi: &TestFunction, t: f64) -> Result<f64> {
    let (lo, hi) = phi.support_box();
    let glo = grid.lo();
    let ghi = grid.hi();
    for a in 0..grid.dim {
        if !grid.periodic[a] && (lo[a] <= glo[a] || hi[a] >= ghi[a]) {
            return Err(LabError::Domain("test function support touches the grid boundary".into()));
        }
    }
    let dv = grid.cell_volume();
    let mut acc = 0.0;
    for idx in grid.nodes_in_box(lo, hi) {
        let x = grid.node(idx);
        let g = phi.gradient(x);
        if g == [0.0, 0.0] {
            continue;
        }
        let v = u.eval(x, t)?;
        acc += (v[0] * g[0] + v[1] * g[1]) * dv;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureMode {
    /// `‖u(·+h) − u(·)‖_{L¹} / |h|`
    Absolute,
    /// `‖⟨h, u(·+h) − u(·)⟩‖_{L¹} / |h|²`
    Longitudinal,
}

/// Difference-quotient norm over the nodes `x` of `grid` for which `x + h`
/// stays inside the extent.
pub fn structure_norm(u: &dyn Field, grid: &Grid, h: Vec2, mode: StructureMode, t: f64) -> Result<f64> {
    let hn = norm(h);
    if hn < grid.min_spacing() * (1.0 - 1e-12) {
        return Err(LabError::Resolution(format!("shift |h| = {hn} below grid spacing {}", grid.min_spacing())));
    }
    let dv = grid.cell_volume();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let x = grid.node(idx);
        let xh = [x[0] + h[0], x[1] + h[1]];
        if !grid.contains(xh) {
            continue;
        }
        let d = {
            let a = u.eval(x, t)?;
            let b = u.eval(xh, t)?;
            [b[0] - a[0], b[1] - a[1]]
        };
        acc += match mode {
            StructureMode::Absolute => norm(d),
            StructureMode::Longitudinal => dot(h, d).abs() / hn,
        } * dv;
    }
    Ok(acc / hn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::TestFunction;

    fn shear() -> impl Field {
        FnField::new(2, 2, |x: Vec2, _| [x[1].signum() * (x[1] != 0.0) as i32 as f64, 0.0])
    }

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(Grid::uniform(2, 0.0, 1.0, 4), Err(LabError::Resolution(_))));
        assert!(Grid::uniform(1, 0.0, 1.0, 8).is_ok());
    }

    #[test]
    fn constant_increment_vanishes() {
        let g = Grid::uniform(2, -1.0, 1.0, 16).unwrap();
        let u = SampledField::from_fn(&g, 2, 0.0, |_| [3.0, -2.0]).unwrap();
        let d = increment(&u, [0.1, 0.2], 0.3, [0.6, -0.5], 0.0).unwrap();
        assert_eq!(d, [0.0, 0.0]);
    }

    #[test]
    fn linear_increment_exact() {
        let g = Grid::uniform(1, -1.0, 1.0, 64).unwrap();
        let u = SampledField::from_fn(&g, 1, 0.0, |x| [x[0], 0.0]).unwrap();
        let d = increment(&u, [0.0, 0.0], 0.1, [1.0, 0.0], 0.0).unwrap();
        assert!((d[0] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn shear_increment_across_line() {
        let g = Grid::uniform(2, -1.0, 1.0, 64).unwrap();
        let u = SampledField::sample(&shear(), &g, 0.0).unwrap();
        let d = increment(&u, [0.0, 0.05], 0.2, [0.0, -1.0], 0.0).unwrap();
        assert!((d[0] + 2.0).abs() < 1e-14 && d[1] == 0.0);
    }

    #[test]
    fn out_of_domain_is_error() {
        let g = Grid::uniform(1, 0.0, 1.0, 16).unwrap();
        let u = SampledField::from_fn(&g, 1, 0.0, |x| [x[0], 0.0]).unwrap();
        assert!(matches!(u.eval([1.5, 0.0], 0.0), Err(LabError::Domain(_))));
        let p = Grid::new(1, [0.0, 0.0], [1.0 / 16.0, 1.0], [16, 1], [true, false]).unwrap();
        let v = SampledField::from_fn(&p, 1, 0.0, |x| [(2.0 * std::f64::consts::PI * x[0]).sin(), 0.0]).unwrap();
        let a = v.eval([0.3, 0.0], 0.0).unwrap();
        let b = v.eval([1.3, 0.0], 0.0).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn increment_antisymmetry_on_dyadic_probes() {
        let g = Grid::uniform(2, -1.0, 1.0, 32).unwrap();
        let u = SampledField::from_fn(&g, 2, 0.0, |x| [(3.0 * x[0]).sin() * x[1], x[0] * x[0]]).unwrap();
        for &(x, z) in &[([0.125, -0.25], [0.5, 0.25]), ([-0.375, 0.5], [-0.75, 0.0]), ([0.0, 0.0], [0.25, -0.5])] {
            let ell = 0.25;
            let a = increment(&u, x, ell, z, 0.0).unwrap();
            let xz = [x[0] + ell * z[0], x[1] + ell * z[1]];
            let b = increment(&u, xz, ell, [-z[0], -z[1]], 0.0).unwrap();
            assert_eq!(a, [-b[0], -b[1]]);
        }
    }

    #[test]
    fn interior_window_shrinks_nonperiodic_axes() {
        let g = Grid::uniform(2, 0.0, 1.0, 20).unwrap();
        let w = g.interior(0.2).unwrap();
        assert_eq!(w.offset, [4, 4]);
        assert_eq!(w.grid.counts, [12, 12]);
        assert_eq!(w.grid.node(0), g.node_ij(4, 4));
        assert!(g.interior(0.6).is_err());
    }

    #[test]
    fn divergence_of_shear_vanishes() {
        let g = Grid::uniform(2, -1.0, 1.0, 128).unwrap();
        // centered on a node column so the x-sums cancel pairwise
        let phi = TestFunction::bump(2, [g.node_ij(64, 0)[0], 0.05], 0.5);
        let r = divergence_residual(&shear(), &g, &phi, 0.0).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }

    #[test]
    fn divergence_of_stretching_field() {
        let g = Grid::uniform(2, -1.0, 1.0, 256).unwrap();
        let phi = TestFunction::bump(2, [0.0, 0.0], 0.6);
        let mass = phi.integral();
        let u = FnField::new(2, 2, |x: Vec2, _| [x[0], 0.0]);
        let r = divergence_residual(&u, &g, &phi, 0.0).unwrap();
        assert!((r + mass).abs() < 1e-9 * mass, "{r} vs {mass}");
    }

    #[test]
    fn divergence_support_touching_boundary() {
        let g = Grid::uniform(2, -1.0, 1.0, 32).unwrap();
        let phi = TestFunction::bump(2, [0.8, 0.0], 0.5);
        assert!(matches!(divergence_residual(&shear(), &g, &phi, 0.0), Err(LabError::Domain(_))));
    }

    #[test]
    fn shear_structure_norms() {
        let g = Grid::uniform(2, -1.0, 1.0, 64).unwrap();
        let u = SampledField::sample(&shear(), &g, 0.0).unwrap();
        for k in 1..5 {
            let t = k as f64 * g.spacing[1];
            let abs = structure_norm(&u, &g, [0.0, t], StructureMode::Absolute, 0.0).unwrap();
            let lon = structure_norm(&u, &g, [0.0, t], StructureMode::Longitudinal, 0.0).unwrap();
            // every window row spans the full x-extent of length 2
            assert!((abs - 4.0).abs() < 1e-12, "{abs}");
            assert_eq!(lon, 0.0);
        }
        assert!(matches!(structure_norm(&u, &g, [0.0, 0.5 * g.spacing[1]], StructureMode::Absolute, 0.0), Err(LabError::Resolution(_))));
    }
}
