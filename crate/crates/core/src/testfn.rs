//! Closed-form compactly supported test functions.
//!
//! The library is intentionally small: a smooth bump, a polynomial bump
//! `(1 - q)^p`, and either multiplied by a coordinate. Everything is
//! evaluated in closed form, including gradients.

use rand::Rng;

use crate::grid::Vec2;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `exp(-1 / (1 - q))` for `q < 1`, the `C^∞` bump.
    Smooth,
    /// `(1 - q)^p`.
    Poly(u32),
}

/// `φ(x) = amplitude · [x_axis] · ψ(q)`, `q = Σ ((x_k - c_k) / r_k)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub center: Vec2,
    pub radii: Vec2,
    pub profile: Profile,
    pub coordinate: Option<usize>,
    pub amplitude: f64,
    pub name: String,
    lipschitz: f64,
}

impl TestFunction {
    pub fn new(
        dim: usize,
        center: Vec2,
        radii: Vec2,
        profile: Profile,
        coordinate: Option<usize>,
        amplitude: f64,
        name: impl Into<String>,
    ) -> Self {
        let mut radii = radii;
        let mut center = center;
        if dim == 1 {
            radii[1] = 1.0;
            center[1] = 0.0;
        }
        let mut f = Self { dim, center, radii, profile, coordinate, amplitude, name: name.into(), lipschitz: 0.0 };
        f.lipschitz = f.estimate_lipschitz();
        f
    }

    /// Centered smooth bump with round support.
    pub fn bump(dim: usize, center: Vec2, radius: f64) -> Self {
        Self::new(dim, center, [radius, radius], Profile::Smooth, None, 1.0, "bump")
    }

    pub fn poly_bump(dim: usize, center: Vec2, radius: f64, power: u32) -> Self {
        Self::new(dim, center, [radius, radius], Profile::Poly(power), None, 1.0, "poly_bump")
    }

    /// `x_axis · bump`.
    pub fn bump_times_coordinate(dim: usize, center: Vec2, radius: f64, axis: usize) -> Self {
        Self::new(dim, center, [radius, radius], Profile::Smooth, Some(axis), 1.0, "bump_x")
    }

    /// A random smooth or polynomial bump whose support lies in `[lo, hi]`.
    pub fn random(rng: &mut impl Rng, dim: usize, lo: Vec2, hi: Vec2) -> Self {
        let span = (0..dim).map(|a| hi[a] - lo[a]).fold(f64::INFINITY, f64::min);
        let r = span * rng.gen_range(0.1..0.45);
        let mut c = [0.0; 2];
        for a in 0..dim {
            c[a] = rng.gen_range(lo[a] + r..hi[a] - r);
        }
        let profile = if rng.gen_bool(0.5) { Profile::Smooth } else { Profile::Poly(rng.gen_range(3..6)) };
        let coordinate = if rng.gen_bool(0.3) { Some(rng.gen_range(0..dim)) } else { None };
        let amp = rng.gen_range(0.5..2.0);
        Self::new(dim, c, [r, r], profile, coordinate, amp, "random")
    }

    fn q_and_grad(&self, x: Vec2) -> (f64, Vec2) {
        let mut q = 0.0;
        let mut dq = [0.0; 2];
        for a in 0..self.dim {
            let s = (x[a] - self.center[a]) / self.radii[a];
            q += s * s;
            dq[a] = 2.0 * s / self.radii[a];
        }
        (q, dq)
    }

    /// `ψ(q)` and `ψ'(q)`.
    fn psi(&self, q: f64) -> (f64, f64) {
        if q >= 1.0 {
            return (0.0, 0.0);
        }
        match self.profile {
            Profile::Smooth => {
                let d = 1.0 - q;
                let v = (-1.0 / d).exp();
                (v, -v / (d * d))
            }
            Profile::Poly(p) => {
                let d = 1.0 - q;
                (d.powi(p as i32), -(p as f64) * d.powi(p as i32 - 1))
            }
        }
    }

    pub fn value(&self, x: Vec2) -> f64 {
        let (q, _) = self.q_and_grad(x);
        let (v, _) = self.psi(q);
        let f = self.coordinate.map_or(1.0, |a| x[a]);
        self.amplitude * f * v
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        let (q, dq) = self.q_and_grad(x);
        if q >= 1.0 {
            return [0.0, 0.0];
        }
        let (v, dv) = self.psi(q);
        let f = self.coordinate.map_or(1.0, |a| x[a]);
        let mut g = [self.amplitude * f * dv * dq[0], self.amplitude * f * dv * dq[1]];
        if let Some(a) = self.coordinate {
            g[a] += self.amplitude * v;
        }
        if self.dim == 1 {
            g[1] = 0.0;
        }
        g
    }

    /// Closed support box `[lo, hi]`.
    pub fn support_box(&self) -> (Vec2, Vec2) {
        let mut lo = self.center;
        let mut hi = self.center;
        for a in 0..self.dim {
            lo[a] -= self.radii[a];
            hi[a] += self.radii[a];
        }
        (lo, hi)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn estimate_lipschitz(&self) -> f64 {
        let (lo, hi) = self.support_box();
        let n = if self.dim == 1 { 4001 } else { 301 };
        let mut best: f64 = 0.0;
        let ny = if self.dim == 1 { 1 } else { n };
        for j in 0..ny {
            for i in 0..n {
                let x = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64,
                    if self.dim == 1 { 0.0 } else { lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64 },
                ];
                let g = self.gradient(x);
                best = best.max((g[0] * g[0] + g[1] * g[1]).sqrt());
            }
        }
        // sampled maximum, inflated to cover the gap between samples
        best * 1.02
    }

    /// `∫ φ dx` by tensor Gauss–Legendre quadrature over the support box.
    pub fn integral(&self) -> f64 {
        let (lo, hi) = self.support_box();
        if self.dim == 1 {
            return quad::integrate(|x| self.value([x, 0.0]), lo[0], hi[0], 64, 12);
        }
        quad::integrate(|y| quad::integrate(|x| self.value([x, y]), lo[0], hi[0], 48, 10), lo[1], hi[1], 48, 10)
    }
}

/// Separable space-time test function `φ(x) ψ(t)`, `ψ` a smooth bump in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeTest {
    pub space: TestFunction,
    pub t_center: f64,
    pub t_radius: f64,
}

impl SpaceTimeTest {
    pub fn new(space: TestFunction, t_center: f64, t_radius: f64) -> Self {
        Self { space, t_center, t_radius }
    }

    /// `ψ(t)` and `ψ'(t)`.
    pub fn time_profile(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t_center) / self.t_radius;
        let q = s * s;
        if q >= 1.0 {
            return (0.0, 0.0);
        }
        let d = 1.0 - q;
        let v = (-1.0 / d).exp();
        (v, -v / (d * d) * 2.0 * s / self.t_radius)
    }

    pub fn time_support(&self) -> (f64, f64) {
        (self.t_center - self.t_radius, self.t_center + self.t_radius)
    }

    /// `∫ ψ dt`.
    pub fn time_mass(&self) -> f64 {
        let (a, b) = self.time_support();
        quad::integrate(|t| self.time_profile(t).0, a, b, 64, 12)
    }

    pub fn value(&self, x: Vec2, t: f64) -> f64 {
        self.space.value(x) * self.time_profile(t).0
    }

    /// `(∇_x φ, ∂_t φ)`.
    pub fn derivatives(&self, x: Vec2, t: f64) -> (Vec2, f64) {
        let (psi, dpsi) = self.time_profile(t);
        let g = self.space.gradient(x);
        ([g[0] * psi, g[1] * psi], self.space.value(x) * dpsi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &TestFunction, x: Vec2) {
        let h = 1e-6;
        let g = f.gradient(x);
        for a in 0..f.dim {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-6 * (1.0 + g[a].abs()), "{fd} vs {}", g[a]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let fs = [
            TestFunction::bump(2, [0.1, -0.2], 0.5),
            TestFunction::poly_bump(2, [0.0, 0.0], 0.7, 4),
            TestFunction::bump_times_coordinate(2, [0.3, 0.1], 0.4, 0),
            TestFunction::bump(1, [0.2, 0.0], 0.3),
        ];
        for f in &fs {
            for x in [[0.15, -0.1], [0.3, 0.2], [0.05, 0.0]] {
                fd_check(f, x);
            }
        }
    }

    #[test]
    fn support_and_lipschitz() {
        let f = TestFunction::bump(2, [0.0, 0.0], 0.5);
        assert_eq!(f.value([0.6, 0.0]), 0.0);
        assert!(f.value([0.0, 0.0]) > 0.0);
        // ψ(q) = exp(-1/(1-q)) has max slope well below 1/r
        assert!(f.lipschitz() > 0.0 && f.lipschitz() < 2.0 / 0.5);
    }

    #[test]
    fn one_dimensional_bump_mass() {
        // ∫_{-1}^{1} exp(-1/(1-x²)) dx = 0.443993816...
        let f = TestFunction::bump(1, [0.0, 0.0], 1.0);
        assert!((f.integral() - 0.443_993_816_168_079_4).abs() < 1e-10);
    }
}
