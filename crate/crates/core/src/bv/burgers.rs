//! Entropy defect of a single Burgers shock and the closed-form weak residual
//! `−∫∫ (u²/2 ∂_tφ + u³/3 ∂ₓφ)` that serves as its oracle.

use crate::error::{LabError, Result};
use crate::quad;
use crate::testfn::SpaceTimeTest;

use super::measure::SignedMeasure1D;
use super::poly::{Poly, Scalar};

/// A straight shock `x = position + speed·t`. With `nu_x = +1`, `u_minus` is the
/// left state; `nu_x = −1` swaps the sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockDescription<S> {
    pub u_minus: S,
    pub u_plus: S,
    pub speed: S,
    pub position: S,
    pub nu_x: S,
}

impl<S: Scalar> ShockDescription<S> {
    /// Shock with `ν_x = +1` through `x = 0` at `t = 0`.
    pub fn new(u_minus: S, u_plus: S, speed: S) -> Self {
        Self { u_minus, u_plus, speed, position: S::zero(), nu_x: S::ratio(1, 1) }
    }

    pub fn check_rankine_hugoniot(&self) -> Result<()> {
        let one = S::ratio(1, 1);
        if self.nu_x != one && self.nu_x != -one {
            return Err(LabError::Input(format!("shock orientation ν_x = {} is not ±1", self.nu_x)));
        }
        let rh = self.speed.clone() - (self.u_minus.clone() + self.u_plus.clone()) * S::ratio(1, 2);
        if !rh.negligible() {
            return Err(LabError::Input(format!(
                "Rankine–Hugoniot violated: s = {} but (u⁻ + u⁺)/2 = {}",
                self.speed,
                (self.u_minus.clone() + self.u_plus.clone()) * S::ratio(1, 2)
            )));
        }
        Ok(())
    }

    /// `(u_left, u_right)`.
    pub fn states(&self) -> (S, S) {
        if self.nu_x == S::ratio(1, 1) {
            (self.u_minus.clone(), self.u_plus.clone())
        } else {
            (self.u_plus.clone(), self.u_minus.clone())
        }
    }
}

/// Time rate of `∂_t u²/2 + ∂ₓ u³/3` concentrated on the shock: one atom of
/// weight `(1/12)(u⁺ − u⁻)³ ν_x` at the shock position, on `position ± 1`.
pub fn burgers_entropy_defect<S: Scalar>(shock: &ShockDescription<S>) -> Result<SignedMeasure1D<S>> {
    shock.check_rankine_hugoniot()?;
    let j = shock.u_plus.clone() - shock.u_minus.clone();
    let w = j.clone() * j.clone() * j * shock.nu_x.clone() * S::ratio(1, 12);
    let one = S::ratio(1, 1);
    Ok(SignedMeasure1D {
        lo: shock.position.clone() - one.clone(),
        hi: shock.position.clone() + one,
        breakpoints: vec![shock.position.clone()],
        density: vec![Poly::zero(), Poly::zero()],
        atom_weights: vec![w],
    })
}

/// `−∫∫ (u²/2 ∂_tφ + u³/3 ∂ₓφ) dx dt` for the piecewise-constant solution
/// carried by `shock`, with the spatial integral split at the shock line.
pub fn burgers_weak_residual(shock: &ShockDescription<f64>, phi: &SpaceTimeTest) -> Result<f64> {
    shock.check_rankine_hugoniot()?;
    if phi.space.dim != 1 {
        return Err(LabError::Parameter("Burgers residual needs a one-dimensional test function".into()));
    }
    let (ul, ur) = shock.states();
    let (a, b) = {
        let (lo, hi) = phi.space.support_box();
        (lo[0], hi[0])
    };
    let (t0, t1) = phi.time_support();
    let integrand = |x: f64, t: f64, u: f64| {
        let (g, dt) = phi.derivatives([x, 0.0], t);
        0.5 * u * u * dt + u * u * u / 3.0 * g[0]
    };
    let at_time = |t: f64| -> f64 {
        let xs = shock.position + shock.speed * t;
        let mut s = 0.0;
        if xs > a {
            s += quad::integrate(|x| integrand(x, t, ul), a, xs.min(b), 48, 12);
        }
        if xs < b {
            s += quad::integrate(|x| integrand(x, t, ur), xs.max(a), b, 48, 12);
        }
        s
    };
    Ok(-quad::integrate(at_time, t0, t1, 48, 12))
}
