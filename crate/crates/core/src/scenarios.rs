//! Registry of closed-form weak solutions with known dissipation.
//!
//! Scenario fields evaluate exactly (no interpolation), which keeps jump sets
//! sharp at every scale; [`Scenario::sample`] produces grid realizations for
//! export and for the sampled-field code paths.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{LabError, Result};
use crate::flux::Model;
use crate::grid::{divergence_residual, Field, Grid, SampledField, Vec2};
use crate::testfn::TestFunction;

pub const REGISTRY: [&str; 6] =
    ["flat_shear", "circular_vortex_sheet", "taylor_green", "burgers_stationary_shock", "burgers_moving_shock", "sawtooth_shear"];

pub const SAWTOOTH_PERIOD: f64 = 0.5;
pub const AUDIT_RESOLUTION: usize = 512;
const AUDIT_TOLERANCE: f64 = 1e-2;

type FieldFn = fn(Vec2, f64) -> Vec2;

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    /// `D ≡ 0`.
    NoDissipation,
    /// Burgers shock carrying the atom `(1/12)(u⁺ − u⁻)³` per unit time.
    ShockAtom { u_minus: f64, u_plus: f64, speed: f64 },
}

impl GroundTruth {
    /// Time rate of the dissipation atom (zero for conservative scenarios).
    pub fn defect_rate(&self) -> f64 {
        match self {
            GroundTruth::NoDissipation => 0.0,
            GroundTruth::ShockAtom { u_minus, u_plus, .. } => (u_plus - u_minus).powi(3) / 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpSet {
    None,
    /// `{y = 0}`.
    HorizontalLine,
    /// `{y = λ(k − 1/2)}`, `k ∈ ℤ`.
    HorizontalLines {
        period: f64,
    },
    Circle {
        center: Vec2,
        radius: f64,
    },
    /// `{x = x₀ + s t}` in one dimension.
    Point {
        x0: f64,
        speed: f64,
    },
}

/// One-sided traces at a jump point; `u_plus` lies on the side `nu` points to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub u_plus: Vec2,
    pub u_minus: Vec2,
    pub nu: Vec2,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: &'static str,
    pub dim: usize,
    pub model: Model,
    pub divergence_free: bool,
    pub stationary: bool,
    pub truth: GroundTruth,
    pub jump_set: JumpSet,
    /// Reference box on which the scenario is audited and sampled.
    pub domain: (Vec2, Vec2),
    velocity: FieldFn,
    pressure: Option<FieldFn>,
}

/// Closed-form scalar or vector field of a scenario.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioField {
    dim: usize,
    components: usize,
    f: FieldFn,
}

impl Field for ScenarioField {
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

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn flat_shear(x: Vec2, _: f64) -> Vec2 {
    [sgn(x[1]), 0.0]
}

fn zero(_: Vec2, _: f64) -> Vec2 {
    [0.0, 0.0]
}

fn vortex_sheet(x: Vec2, _: f64) -> Vec2 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let s = if r2 < 1.0 {
        1.0
    } else if r2 > 1.0 {
        0.0
    } else {
        0.5
    };
    // u_θ e_θ with u_θ = r
    [-s * x[1], s * x[0]]
}

fn vortex_pressure(x: Vec2, _: f64) -> Vec2 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    [if r2 < 1.0 { 0.5 * (r2 - 1.0) } else { 0.0 }, 0.0]
}

fn taylor_green(x: Vec2, _: f64) -> Vec2 {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [sx * cy, -cx * sy]
}

fn taylor_green_pressure(x: Vec2, _: f64) -> Vec2 {
    [0.25 * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()), 0.0]
}

fn burgers_stationary(x: Vec2, _: f64) -> Vec2 {
    [-sgn(x[0]), 0.0]
}

fn burgers_moving(x: Vec2, t: f64) -> Vec2 {
    let xi = x[0] - 0.5 * t;
    [
        if xi < 0.0 {
            1.0
        } else if xi > 0.0 {
            0.0
        } else {
            0.5
        },
        0.0,
    ]
}

fn sawtooth(x: Vec2, _: f64) -> Vec2 {
    let s = x[1] / SAWTOOTH_PERIOD + 0.5;
    let fr = s - s.floor();
    [if fr == 0.0 { 0.0 } else { 2.0 * fr - 1.0 }, 0.0]
}

/// Builds a registered scenario. Every scenario has passed its audit on the
/// reference grid before it is handed out.
pub fn generate_scenario(id: &str) -> Result<Scenario> {
    let s = lookup(id)?;
    let audits = audit_cache();
    let idx = REGISTRY.iter().position(|r| *r == s.id).unwrap();
    let report = audits[idx].get_or_init(|| audit(&s, AUDIT_RESOLUTION));
    match report {
        Ok(r) if r.passed => Ok(s),
        Ok(r) => Err(LabError::Precondition(format!("scenario `{id}` failed its audit: {}", r.summary()))),
        Err(e) => Err(e.clone()),
    }
}

fn audit_cache() -> &'static [OnceLock<Result<AuditReport>>; 6] {
    static CACHE: OnceLock<[OnceLock<Result<AuditReport>>; 6]> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// The scenario definition without running the audit.
pub fn lookup(id: &str) -> Result<Scenario> {
    let euler2 = |id, velocity, pressure, jump_set, domain| Scenario {
        id,
        dim: 2,
        model: Model::Euler,
        divergence_free: true,
        stationary: true,
        truth: GroundTruth::NoDissipation,
        jump_set,
        domain,
        velocity,
        pressure: Some(pressure),
    };
    let burgers = |id, velocity, u_minus, u_plus, speed: f64| Scenario {
        id,
        dim: 1,
        model: Model::Burgers,
        divergence_free: false,
        stationary: speed == 0.0,
        truth: GroundTruth::ShockAtom { u_minus, u_plus, speed },
        jump_set: JumpSet::Point { x0: 0.0, speed },
        domain: ([-1.0, 0.0], [1.0, 0.0]),
        velocity,
        pressure: None,
    };
    Ok(match id {
        "flat_shear" => euler2("flat_shear", flat_shear as FieldFn, zero as FieldFn, JumpSet::HorizontalLine, ([-1.0, -1.0], [1.0, 1.0])),
        "circular_vortex_sheet" => euler2(
            "circular_vortex_sheet",
            vortex_sheet,
            vortex_pressure,
            JumpSet::Circle { center: [0.0, 0.0], radius: 1.0 },
            ([-1.5, -1.5], [1.5, 1.5]),
        ),
        "taylor_green" => euler2("taylor_green", taylor_green, taylor_green_pressure, JumpSet::None, ([-1.0, -1.0], [1.0, 1.0])),
        "sawtooth_shear" => {
            euler2("sawtooth_shear", sawtooth, zero, JumpSet::HorizontalLines { period: SAWTOOTH_PERIOD }, ([-1.0, -1.0], [1.0, 1.0]))
        }
        "burgers_stationary_shock" => burgers("burgers_stationary_shock", burgers_stationary as FieldFn, 1.0, -1.0, 0.0),
        "burgers_moving_shock" => burgers("burgers_moving_shock", burgers_moving, 1.0, 0.0, 0.5),
        _ => return Err(LabError::Registry(id.to_string())),
    })
}

impl Scenario {
    pub fn velocity(&self) -> ScenarioField {
        ScenarioField { dim: self.dim, components: self.dim, f: self.velocity }
    }

    pub fn pressure(&self) -> Option<ScenarioField> {
        self.pressure.map(|f| ScenarioField { dim: self.dim, components: 1, f })
    }

    /// Velocity samples on `grid` at time `t`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<SampledField> {
        if grid.dim != self.dim {
            return Err(LabError::Parameter(format!(
                "scenario `{}` is {}-dimensional, grid is {}-dimensional",
                self.id, self.dim, grid.dim
            )));
        }
        SampledField::sample(&self.velocity(), grid, t)
    }

    pub fn sample_pressure(&self, grid: &Grid, t: f64) -> Result<Option<SampledField>> {
        self.pressure().map(|p| SampledField::sample(&p, grid, t)).transpose()
    }

    /// Reference grid with `n` cells per axis on the scenario's box.
    pub fn reference_grid(&self, n: usize) -> Result<Grid> {
        let (lo, hi) = self.domain;
        if self.dim == 1 {
            Grid::uniform(1, lo[0], hi[0], n)
        } else {
            Grid::boxed(lo, hi, [n, n])
        }
    }

    /// Exact traces when `x` lies on the jump set at time `t`.
    pub fn jump_at(&self, x: Vec2, t: f64) -> Option<Jump> {
        let eps = 1e-9;
        let side = |nu: Vec2| -> Jump {
            let f = self.velocity;
            let p = [x[0] + eps * nu[0], x[1] + eps * nu[1]];
            let m = [x[0] - eps * nu[0], x[1] - eps * nu[1]];
            Jump { u_plus: f(p, t), u_minus: f(m, t), nu }
        };
        match self.jump_set {
            JumpSet::None => None,
            JumpSet::HorizontalLine => (x[1].abs() < 1e-12).then(|| side([0.0, 1.0])),
            JumpSet::HorizontalLines { period } => {
                let s = x[1] / period + 0.5;
                ((s - s.round()).abs() < 1e-12).then(|| side([0.0, 1.0]))
            }
            JumpSet::Circle { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
                ((r - radius).abs() < 1e-12).then(|| side([d[0] / r, d[1] / r]))
            }
            JumpSet::Point { x0, speed } => ((x[0] - x0 - speed * t).abs() < 1e-12).then(|| side([1.0, 0.0])),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
}

impl AuditCheck {
    pub fn passed(&self) -> bool {
        self.measured.is_finite() && self.measured <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub scenario: String,
    pub resolution: usize,
    pub checks: Vec<AuditCheck>,
    pub passed: bool,
}

impl AuditReport {
    pub fn summary(&self) -> String {
        self.checks.iter().map(|c| format!("{}={:.3e} (tol {:.1e})", c.name, c.measured, c.tolerance)).collect::<Vec<_>>().join(", ")
    }
}

/// Test functions used by the audit, placed across the jump sets.
fn audit_tests(s: &Scenario) -> Vec<TestFunction> {
    let c = |x, y, r| TestFunction::bump(2, [x, y], r);
    match s.id {
        "circular_vortex_sheet" => {
            vec![c(0.9, 0.2, 0.4), c(-0.3, -0.8, 0.5), c(0.0, 0.0, 1.2), TestFunction::bump_times_coordinate(2, [0.6, 0.6], 0.5, 1)]
        }
        "taylor_green" => vec![c(0.1, 0.2, 0.5), c(-0.4, 0.3, 0.4), TestFunction::bump_times_coordinate(2, [0.0, -0.3], 0.6, 0)],
        _ => vec![c(0.1, 0.05, 0.5), c(-0.3, 0.26, 0.4), TestFunction::bump_times_coordinate(2, [0.2, -0.2], 0.6, 1)],
    }
}

/// `|residual| / Σ|terms|`, the weak residual relative to its own scale.
fn relative(res: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        res.abs()
    } else {
        res.abs() / scale
    }
}

/// Weak stationary momentum residual `−∫ (u_i u_j ∂_jφ + p ∂_iφ)` for `i = 0, 1`,
/// relative to `∫ (|u|²+|p|)|∇φ|`.
fn momentum_residual(u: &dyn Field, p: &dyn Field, grid: &Grid, phi: &TestFunction) -> Result<f64> {
    let (lo, hi) = phi.support_box();
    let dv = grid.cell_volume();
    let mut res = [0.0; 2];
    let mut scale = 0.0;
    for idx in grid.nodes_in_box(lo, hi) {
        let x = grid.node(idx);
        let g = phi.gradient(x);
        if g == [0.0, 0.0] {
            continue;
        }
        let v = u.eval(x, 0.0)?;
        let q = p.eval(x, 0.0)?[0];
        for i in 0..2 {
            res[i] -= (v[i] * (v[0] * g[0] + v[1] * g[1]) + q * g[i]) * dv;
        }
        scale += ((v[0] * v[0] + v[1] * v[1]) + q.abs()) * (g[0] * g[0] + g[1] * g[1]).sqrt() * dv;
    }
    Ok(relative(res[0].abs().max(res[1].abs()), scale))
}

/// Weak Burgers residual `−∫∫ (u ∂_tφ + u²/2 ∂_xφ)` on the grid times Gauss
/// nodes in `t ∈ [0, 1]`, relative to `∫∫ (|u| |∂_tφ| + u²/2 |∂_xφ|)`.
fn burgers_mass_residual(u: &dyn Field, grid: &Grid) -> Result<f64> {
    let phi = crate::testfn::SpaceTimeTest::new(TestFunction::bump(1, [0.1, 0.0], 0.6), 0.5, 0.45);
    let (gx, gw) = crate::quad::gauss_legendre(24);
    let dv = grid.cell_volume();
    let mut res = 0.0;
    let mut scale = 0.0;
    for (xi, wi) in gx.iter().zip(&gw) {
        let t = 0.5 + 0.5 * xi;
        for idx in 0..grid.len() {
            let x = grid.node(idx);
            let (g, dt) = phi.derivatives(x, t);
            let v = u.eval(x, t)?[0];
            let w = 0.5 * wi * dv;
            res -= (v * dt + 0.5 * v * v * g[0]) * w;
            scale += (v.abs() * dt.abs() + 0.5 * v * v * g[0].abs()) * w;
        }
    }
    Ok(relative(res, scale))
}

/// Self-consistency audit on a reference grid with `n` cells per axis:
/// weak divergence and momentum balance for Euler scenarios, Rankine–Hugoniot
/// and the weak Burgers equation for shocks.
pub fn audit(s: &Scenario, n: usize) -> Result<AuditReport> {
    let grid = s.reference_grid(n)?;
    let u = s.velocity();
    let mut checks = Vec::new();
    match s.model {
        Model::Euler => {
            let p = s.pressure().ok_or_else(|| LabError::Input(format!("scenario `{}` lacks a pressure", s.id)))?;
            let mut div: f64 = 0.0;
            let mut mom: f64 = 0.0;
            for phi in audit_tests(s) {
                let scale = {
                    let (lo, hi) = phi.support_box();
                    grid.nodes_in_box(lo, hi)
                        .into_iter()
                        .map(|i| {
                            let x = grid.node(i);
                            let g = phi.gradient(x);
                            let v = u.eval(x, 0.0).unwrap_or([0.0, 0.0]);
                            (v[0] * g[0]).abs() + (v[1] * g[1]).abs()
                        })
                        .sum::<f64>()
                        * grid.cell_volume()
                };
                if s.divergence_free {
                    div = div.max(relative(divergence_residual(&u, &grid, &phi, 0.0)?, scale));
                }
                mom = mom.max(momentum_residual(&u, &p, &grid, &phi)?);
            }
            if s.divergence_free {
                checks.push(AuditCheck { name: "divergence".into(), measured: div, tolerance: AUDIT_TOLERANCE });
            }
            checks.push(AuditCheck { name: "momentum".into(), measured: mom, tolerance: AUDIT_TOLERANCE });
        }
        Model::Burgers => {
            if let GroundTruth::ShockAtom { u_minus, u_plus, speed } = s.truth {
                let rh = (speed - 0.5 * (u_minus + u_plus)).abs();
                checks.push(AuditCheck { name: "rankine_hugoniot".into(), measured: rh, tolerance: 1e-14 });
            }
            checks.push(AuditCheck {
                name: "weak_burgers".into(),
                measured: burgers_mass_residual(&u, &grid)?,
                tolerance: AUDIT_TOLERANCE,
            });
        }
    }
    let passed = checks.iter().all(AuditCheck::passed);
    Ok(AuditReport { scenario: s.id.to_string(), resolution: n, checks, passed })
}
