//! Experiment configuration (TOML), orchestration and result emission.
//!
//! A config holds any number of `[[scan]]`, `[[classify]]` and
//! `[[kernel_opt]]` tables plus optional `[bv]` and `[audit]` tables. Every
//! task produces verdicts against the scenario's ground truth; the run passes
//! when all verdicts pass.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::bv::{self, ChainRule, ChainRuleOptions, CubicForm, ShockDescription};
use crate::error::{LabError, Result};
use crate::flux::{FluxKind, Model, TimeSampling};
use crate::grid::{dot, norm, Grid, Mat2, Vec2};
use crate::kernel_opt::{self, AnisotropyProblem, KernelFamily, Optimization};
use crate::local::{self, BlowupClass, BlowupTag, ClassifyOptions};
use crate::mollify::{build_kernel, KernelProfile, MIN_RESOLUTION};
use crate::quad;
use crate::scan::{flux_scan, FluxScan, Ladder, ScanSetup};
use crate::scenarios::{self, AuditReport, GroundTruth, JumpSet, Scenario};
use crate::testfn::{Profile, SpaceTimeTest, TestFunction};

/// Pairings below this magnitude count as zero in no-dissipation verdicts.
pub const ZERO_FLOOR: f64 = 1e-6;
/// Extrapolated limits must fall below this fraction of the coarsest pairing.
pub const LIMIT_FRACTION: f64 = 0.02;
/// Relative tolerance on the Burgers shock atom.
pub const ATOM_TOLERANCE: f64 = 0.02;
pub const TRACE_TOLERANCE: f64 = 2e-2;
pub const NORMAL_TOLERANCE_DEG: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Text,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(LabError::Input(format!("unknown format `{other}` (csv, text)"))),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub scan: Vec<ScanConfig>,
    #[serde(default)]
    pub classify: Vec<ClassifyConfig>,
    #[serde(default)]
    pub kernel_opt: Vec<KernelOptConfig>,
    #[serde(default)]
    pub bv: Option<BvConfig>,
    #[serde(default)]
    pub audit: Option<AuditConfig>,
}

fn default_kernel() -> String {
    "bump".into()
}
fn default_resolution() -> usize {
    MIN_RESOLUTION
}
fn default_fluxes() -> Vec<String> {
    vec!["cet".into()]
}
fn default_t_center() -> f64 {
    0.5
}
fn default_t_radius() -> f64 {
    0.4
}
fn default_time_nodes() -> usize {
    16
}
fn default_classify_ladder() -> Vec<f64> {
    vec![0.002, 0.001, 0.0005, 0.00025]
}
fn default_probe_count() -> usize {
    8
}
fn default_family() -> String {
    "hyperbolic".into()
}
fn default_budget() -> usize {
    500
}
fn default_opt_resolution() -> usize {
    kernel_opt::OPT_RESOLUTION
}
fn default_fraction() -> f64 {
    0.2
}
fn default_cubic() -> String {
    "energy".into()
}
fn default_audit_resolution() -> usize {
    scenarios::AUDIT_RESOLUTION
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per axis; 512 in 2D and 4096 in 1D when absent.
    pub n: Option<usize>,
    /// Box corners; the scenario's reference box when absent.
    pub lo: Option<Vec2>,
    pub hi: Option<Vec2>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub center: Vec2,
    pub radius: f64,
    /// `smooth` or `poly:P`.
    #[serde(default)]
    pub profile: Option<String>,
    /// Multiply by this coordinate (0 or 1).
    #[serde(default)]
    pub coordinate: Option<usize>,
    #[serde(default = "default_t_center")]
    pub t_center: f64,
    #[serde(default = "default_t_radius")]
    pub t_radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub scenario: String,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// `"max,ratio,count"`.
    pub ladder: String,
    #[serde(default)]
    pub grid: GridConfig,
    pub test_function: TestFunctionConfig,
    #[serde(default = "default_fluxes")]
    pub fluxes: Vec<String>,
    #[serde(default)]
    pub skip_sup: bool,
    /// Gauss nodes in time for non-stationary scenarios.
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    /// Half-step of the centered time difference; `ℓ_min / 16` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub scenario: String,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_classify_ladder")]
    pub ladder: Vec<f64>,
    /// Explicit probe points; generated from the scenario when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec2>>,
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    /// Threshold scale; the sup of `u` over the reference box when absent.
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub time: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelOptConfig {
    pub m: Mat2,
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_opt_resolution")]
    pub resolution: usize,
    /// Required `best − |tr M| ≤ fraction · (J_radial − |tr M|)`.
    #[serde(default = "default_fraction")]
    pub target_fraction: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvConfig {
    /// Fixture file; the built-in suite when absent.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    /// `energy` or `burgers`.
    #[serde(default = "default_cubic")]
    pub cubic: String,
    #[serde(default)]
    pub drop_jump_correction: bool,
}

impl Default for BvConfig {
    fn default() -> Self {
        Self { fixtures: None, cubic: default_cubic(), drop_jump_correction: false }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Registry ids; all scenarios when empty.
    #[serde(default)]
    pub scenarios: Vec<String>,
    #[serde(default = "default_audit_resolution")]
    pub resolution: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { scenarios: Vec::new(), resolution: default_audit_resolution() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
            LabError::Parse { line, msg: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn is_empty(&self) -> bool {
        self.scan.is_empty() && self.classify.is_empty() && self.kernel_opt.is_empty() && self.bv.is_none() && self.audit.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub stage: String,
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub scenario: String,
    pub classes: Vec<BlowupClass>,
}

#[derive(Debug, Clone, Default)]
pub struct Bundle {
    pub scans: Vec<FluxScan>,
    pub classifications: Vec<Classification>,
    pub optimizations: Vec<Optimization>,
    pub bv_report: Option<String>,
    pub audits: Vec<AuditReport>,
    pub verdicts: Vec<Verdict>,
}

impl Bundle {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Runs every task in `config`; the first failure aborts with the stage named.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Bundle> {
    match run_experiment_partial(config) {
        (b, None) => Ok(b),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`run_experiment`], but keeps whatever finished before a failure.
pub fn run_experiment_partial(config: &ExperimentConfig) -> (Bundle, Option<LabError>) {
    let mut b = Bundle::default();
    let r = (|| -> Result<()> {
        if let Some(a) = &config.audit {
            run_audit(a, &mut b).map_err(|e| e.in_stage("audit"))?;
        }
        for (i, s) in config.scan.iter().enumerate() {
            run_scan(s, &mut b).map_err(|e| e.in_stage(format!("scan[{i}]:{}", s.scenario)))?;
        }
        for (i, c) in config.classify.iter().enumerate() {
            run_classify(c, config.seed, &mut b).map_err(|e| e.in_stage(format!("classify[{i}]:{}", c.scenario)))?;
        }
        for (i, k) in config.kernel_opt.iter().enumerate() {
            run_kernel_opt(k, config.seed.wrapping_add(i as u64), i, &mut b).map_err(|e| e.in_stage(format!("kernel_opt[{i}]")))?;
        }
        if let Some(c) = &config.bv {
            run_bv(c, &mut b).map_err(|e| e.in_stage("bv"))?;
        }
        Ok(())
    })();
    (b, r.err())
}

fn verdict(stage: &str, name: impl Into<String>, measured: f64, expected: f64, tolerance: f64, passed: bool) -> Verdict {
    Verdict { stage: stage.to_string(), name: name.into(), measured, expected, tolerance, passed }
}

fn run_audit(cfg: &AuditConfig, b: &mut Bundle) -> Result<()> {
    let ids: Vec<String> =
        if cfg.scenarios.is_empty() { scenarios::REGISTRY.iter().map(|s| s.to_string()).collect() } else { cfg.scenarios.clone() };
    for id in ids {
        let s = scenarios::lookup(&id)?;
        let r = scenarios::audit(&s, cfg.resolution)?;
        for c in &r.checks {
            b.verdicts.push(verdict("audit", format!("{id}/{}", c.name), c.measured, 0.0, c.tolerance, c.passed()));
        }
        b.audits.push(r);
    }
    Ok(())
}

fn scan_grid(s: &Scenario, g: &GridConfig) -> Result<Grid> {
    let (dlo, dhi) = s.domain;
    let lo = g.lo.unwrap_or(dlo);
    let hi = g.hi.unwrap_or(dhi);
    let n = g.n.unwrap_or(if s.dim == 1 { 4096 } else { 512 });
    if s.dim == 1 {
        Grid::uniform(1, lo[0], hi[0], n)
    } else {
        Grid::boxed(lo, hi, [n, n])
    }
}

pub fn build_test_function(dim: usize, c: &TestFunctionConfig) -> Result<SpaceTimeTest> {
    if !(c.radius > 0.0) || !(c.t_radius > 0.0) {
        return Err(LabError::Parameter("test function radii must be positive".into()));
    }
    let profile = match c.profile.as_deref() {
        None | Some("smooth") => Profile::Smooth,
        Some(p) => match p.strip_prefix("poly:").and_then(|k| k.parse::<u32>().ok()) {
            Some(k) if k >= 2 => Profile::Poly(k),
            _ => return Err(LabError::Input(format!("unknown test function profile `{p}` (smooth, poly:P with P ≥ 2)"))),
        },
    };
    if c.coordinate.is_some_and(|a| a >= dim) {
        return Err(LabError::Parameter("test function coordinate exceeds the dimension".into()));
    }
    let space = TestFunction::new(dim, c.center, [c.radius, c.radius], profile, c.coordinate, 1.0, "config");
    Ok(SpaceTimeTest::new(space, c.t_center, c.t_radius))
}

/// `∫ φ(x_s(t)) ψ(t) dt` along the shock line of a Burgers scenario.
pub fn shock_mass(phi: &SpaceTimeTest, x0: f64, speed: f64) -> f64 {
    let (a, b) = phi.time_support();
    quad::integrate(|t| phi.value([x0 + speed * t, 0.0], t), a, b, 64, 12)
}

fn run_scan(cfg: &ScanConfig, b: &mut Bundle) -> Result<()> {
    let s = scenarios::generate_scenario(&cfg.scenario)?;
    let grid = scan_grid(&s, &cfg.grid)?;
    let ladder = Ladder::parse(&cfg.ladder)?;
    let rho = build_kernel(&KernelProfile::parse(&cfg.kernel)?, s.dim, cfg.resolution)?;
    let phi = build_test_function(s.dim, &cfg.test_function)?;
    let kinds: Vec<FluxKind> = cfg.fluxes.iter().map(|k| FluxKind::parse(k)).collect::<Result<_>>()?;
    if s.model == Model::Burgers {
        if let Some(k) = kinds.iter().find(|k| matches!(k, FluxKind::Cet | FluxKind::Bd)) {
            return Err(LabError::Parameter(format!("flux `{}` is only defined for Euler scenarios", k.name())));
        }
    }
    let time = if s.stationary {
        TimeSampling::Stationary
    } else {
        TimeSampling::Slices { dt: cfg.dt.unwrap_or(ladder.min() / 16.0), nodes: cfg.time_nodes }
    };
    let u = s.velocity();
    let p = s.pressure();
    let setup = ScanSetup {
        scenario: s.id,
        model: s.model,
        u: &u,
        p: p.as_ref().map(|p| p as &dyn crate::grid::Field),
        f: None,
        grid: &grid,
        phi: &phi,
        time,
        skip_sup: cfg.skip_sup,
    };
    for kind in kinds {
        let scan = flux_scan(&setup, &rho, kind, &ladder).map_err(|e| e.in_stage(kind.name()))?;
        let stage = format!("scan:{}:{}", s.id, kind.name());
        match s.truth {
            GroundTruth::NoDissipation => {
                let p0 = scan.pairings.first().copied().unwrap_or(0.0).abs();
                let peak = scan.pairings.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if peak <= ZERO_FLOOR {
                    b.verdicts.push(verdict(&stage, "pairings_below_zero_floor", peak, 0.0, ZERO_FLOOR, true));
                } else {
                    b.verdicts.push(verdict(
                        &stage,
                        "monotone_decrease",
                        scan.pairings.last().unwrap().abs(),
                        0.0,
                        p0,
                        scan.monotone_decreasing(),
                    ));
                    let tol = LIMIT_FRACTION * p0;
                    b.verdicts.push(verdict(&stage, "limit_vanishes", scan.limit, 0.0, tol, scan.limit.abs() < tol));
                }
            }
            GroundTruth::ShockAtom { speed, .. } => {
                let x0 = match s.jump_set {
                    JumpSet::Point { x0, .. } => x0,
                    _ => 0.0,
                };
                let expected = s.truth.defect_rate() * shock_mass(&phi, x0, speed);
                let tol = ATOM_TOLERANCE * expected.abs();
                b.verdicts.push(verdict(&stage, "shock_atom", scan.limit, expected, tol, (scan.limit - expected).abs() <= tol));
            }
        }
        b.scans.push(scan);
    }
    Ok(())
}

/// Probe points for a scenario: on the jump set when there is one, otherwise
/// scattered through the interior.
pub fn probe_points(s: &Scenario, n: usize, t: f64, seed: u64) -> Vec<Vec2> {
    let along = |k: usize| if n > 1 { -0.7 + 1.4 * k as f64 / (n - 1) as f64 } else { 0.0 };
    match s.jump_set {
        JumpSet::HorizontalLine => (0..n).map(|k| [along(k), 0.0]).collect(),
        JumpSet::HorizontalLines { period } => (0..n).map(|k| [along(k), if k % 2 == 0 { 0.5 } else { -0.5 } * period]).collect(),
        JumpSet::Circle { center, radius } => (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * (k as f64 + 0.3) / n as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect(),
        JumpSet::Point { x0, speed } => {
            let xs = x0 + speed * t;
            let mut pts = vec![[xs, 0.0]];
            let mut k = 0;
            while pts.len() < n && k < 4 * n {
                let x = along(k % n) + 0.013 * (k / n) as f64;
                if (x - xs).abs() > 0.05 {
                    pts.push([x, 0.0]);
                }
                k += 1;
            }
            pts
        }
        JumpSet::None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| [rng.gen_range(-0.7..0.7), if s.dim == 2 { rng.gen_range(-0.7..0.7) } else { 0.0 }]).collect()
        }
    }
}

fn run_classify(cfg: &ClassifyConfig, seed: u64, b: &mut Bundle) -> Result<()> {
    let s = scenarios::generate_scenario(&cfg.scenario)?;
    let rho = build_kernel(&KernelProfile::parse(&cfg.kernel)?, s.dim, cfg.resolution)?;
    let u = s.velocity();
    let scale = match cfg.scale {
        Some(v) => v,
        None => s.sample(&s.reference_grid(128)?, cfg.time)?.sup_norm(),
    };
    let opts = ClassifyOptions { scale: Some(scale), ..ClassifyOptions::default() };
    let points = cfg.points.clone().unwrap_or_else(|| probe_points(&s, cfg.probe_count, cfg.time, seed));
    let classes = crate::par::try_map(points.len(), |k| local::classify_point(&u, points[k], &cfg.ladder, &rho, cfg.time, &opts))?;
    let stage = format!("classify:{}", s.id);
    for c in &classes {
        let at = format!("({:.4},{:.4})", c.x0[0], c.x0[1]);
        match (s.jump_at(c.x0, cfg.time), &c.tag) {
            (Some(truth), BlowupTag::Jump(p)) => {
                // align orientation with the ground truth before comparing traces
                let p = if dot(p.nu, truth.nu) < 0.0 {
                    local::JumpProfile { u_plus: p.u_minus, u_minus: p.u_plus, nu: [-p.nu[0], -p.nu[1]], ..*p }
                } else {
                    *p
                };
                let err = |a: Vec2, b: Vec2| norm([a[0] - b[0], a[1] - b[1]]);
                let trace_err = err(p.u_plus, truth.u_plus).max(err(p.u_minus, truth.u_minus));
                let angle = dot(p.nu, truth.nu).clamp(-1.0, 1.0).acos().to_degrees();
                b.verdicts.push(verdict(&stage, format!("{at}/traces"), trace_err, 0.0, TRACE_TOLERANCE, trace_err <= TRACE_TOLERANCE));
                b.verdicts.push(verdict(
                    &stage,
                    format!("{at}/normal_deg"),
                    angle,
                    0.0,
                    NORMAL_TOLERANCE_DEG,
                    angle <= NORMAL_TOLERANCE_DEG,
                ));
                if s.divergence_free {
                    let j = p.jump();
                    let normal_jump = dot(j, p.nu).abs();
                    b.verdicts.push(verdict(
                        &stage,
                        format!("{at}/normal_jump"),
                        normal_jump,
                        0.0,
                        TRACE_TOLERANCE,
                        normal_jump <= TRACE_TOLERANCE,
                    ));
                }
            }
            (Some(_), _) => b.verdicts.push(verdict(&stage, format!("{at}/expected_jump"), f64::NAN, 0.0, 0.0, false)),
            (None, BlowupTag::Lebesgue(_)) => {
                let r = c.constant_residuals.last().copied().unwrap_or(f64::NAN) / c.scale;
                b.verdicts.push(verdict(&stage, format!("{at}/lebesgue_residual"), r, 0.0, opts.lebesgue_tol, r < opts.lebesgue_tol));
            }
            (None, _) => b.verdicts.push(verdict(&stage, format!("{at}/expected_lebesgue"), f64::NAN, 0.0, 0.0, false)),
        }
    }
    b.classifications.push(Classification { scenario: s.id.to_string(), classes });
    Ok(())
}

fn run_kernel_opt(cfg: &KernelOptConfig, seed: u64, idx: usize, b: &mut Bundle) -> Result<()> {
    let family = KernelFamily::parse(&cfg.family)?;
    let problem = AnisotropyProblem { m: cfg.m, family, budget: cfg.budget, seed, resolution: cfg.resolution };
    let o = kernel_opt::optimize_kernel(&problem)?;
    let lb = kernel_opt::trace_lower_bound(&cfg.m);
    let stage = format!("kernel_opt[{idx}]:{}", family.name());
    let min_j = o.trace.iter().map(|r| r.j).fold(f64::INFINITY, f64::min);
    b.verdicts.push(verdict(
        &stage,
        "trace_bound",
        min_j - lb,
        0.0,
        kernel_opt::LOWER_BOUND_TOLERANCE,
        min_j >= lb - kernel_opt::LOWER_BOUND_TOLERANCE,
    ));
    let room = o.baseline - lb;
    if room > kernel_opt::LOWER_BOUND_TOLERANCE {
        let target = cfg.target_fraction * room;
        b.verdicts.push(verdict(&stage, "reaches_fraction_of_radial", o.best_j - lb, 0.0, target, o.best_j - lb <= target));
    }
    b.optimizations.push(o);
    Ok(())
}

fn run_bv(cfg: &BvConfig, b: &mut Bundle) -> Result<()> {
    let fixtures = match &cfg.fixtures {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))?;
            bv::parse_fixtures(&text)?
        }
        None => bv::builtin_fixtures(),
    };
    let cubic = match cfg.cubic.as_str() {
        "energy" => CubicForm::Energy,
        "burgers" => CubicForm::Burgers,
        other => return Err(LabError::Input(format!("unknown cubic form `{other}` (energy, burgers)"))),
    };
    let opts = ChainRuleOptions { cubic, drop_jump_correction: cfg.drop_jump_correction };
    let q = |n: i64, d: i64| -> BigRational { bv::Scalar::ratio(n, d) };
    for f in &fixtures {
        for rule in ChainRule::ALL {
            let r = bv::chain_rule_check(&f.u, rule, opts);
            let name = format!("{}/{}", f.name, rule.name());
            if opts.drop_jump_correction && rule == ChainRule::Cr3 {
                // the residual is exactly the dropped correction: k Σ |[u]|³
                let k = match cubic {
                    CubicForm::Energy => q(1, 8),
                    CubicForm::Burgers => q(1, 12),
                };
                let expected = (0..f.u.breakpoints.len()).fold(q(0, 1), |acc, i| {
                    let j = bv::Scalar::abs(&f.u.jump(i));
                    acc + k.clone() * j.clone() * j.clone() * j
                });
                let ok = r.atoms == expected && r.diffuse == 0.0;
                b.verdicts.push(verdict("bv", format!("{name}/dropped_correction"), r.total(), bv::Scalar::to_f64(&expected), 0.0, ok));
            } else {
                b.verdicts.push(verdict("bv", name, r.total(), 0.0, 0.0, r.is_zero()));
            }
        }
    }
    // Burgers defect: exact atom and the weak-residual oracle
    let stationary = ShockDescription::new(q(1, 1), q(-1, 1), q(0, 1));
    let atom = bv::burgers_entropy_defect(&stationary)?.atom_weights[0].clone();
    b.verdicts.push(verdict("bv", "stationary_shock_atom", bv::Scalar::to_f64(&atom), -2.0 / 3.0, 0.0, atom == q(-2, 3)));
    let moving = ShockDescription::new(1.0, 0.0, 0.5);
    let phi = SpaceTimeTest::new(TestFunction::bump(1, [0.2, 0.0], 0.6), 0.5, 0.4);
    let rate = bv::burgers_weak_residual(&moving, &phi)? / shock_mass(&phi, 0.0, 0.5);
    b.verdicts.push(verdict("bv", "moving_shock_rate", rate, -1.0 / 12.0, 1e-6, (rate + 1.0 / 12.0).abs() <= 1e-6));
    b.bv_report = Some(bv::ledger_report(&fixtures, opts));
    Ok(())
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12e}")
    }
}

pub fn verdicts_csv(verdicts: &[Verdict]) -> String {
    let mut s = String::from("stage,name,measured,expected,tolerance,passed\n");
    for v in verdicts {
        let _ = writeln!(s, "{},{},{},{},{},{}", v.stage, v.name, num(v.measured), num(v.expected), num(v.tolerance), v.passed);
    }
    s
}

fn audit_csv(audits: &[AuditReport]) -> String {
    let mut s = String::from("scenario,resolution,check,measured,tolerance,passed\n");
    for a in audits {
        for c in &a.checks {
            let _ = writeln!(s, "{},{},{},{},{},{}", a.scenario, a.resolution, c.name, num(c.measured), num(c.tolerance), c.passed());
        }
    }
    s
}

/// Structured-text rendering of the whole bundle.
pub fn bundle_text(b: &Bundle) -> String {
    let mut s = String::from("# fluxlab report\n");
    let _ = writeln!(s, "passed {}", b.all_passed());
    s += "\n[verdicts]\n";
    for v in &b.verdicts {
        let _ = writeln!(
            s,
            "{} {} measured={} expected={} tolerance={} {}",
            v.stage,
            v.name,
            num(v.measured),
            num(v.expected),
            num(v.tolerance),
            if v.passed { "PASS" } else { "FAIL" }
        );
    }
    for (i, a) in b.audits.iter().enumerate() {
        let _ = writeln!(s, "\n[audit {i}]\nscenario {}\nresolution {}\npassed {}", a.scenario, a.resolution, a.passed);
        for c in &a.checks {
            let _ = writeln!(s, "{} {} tolerance {}", c.name, num(c.measured), num(c.tolerance));
        }
    }
    for (i, sc) in b.scans.iter().enumerate() {
        let _ = writeln!(s, "\n[scan {i}]\nkind {}\nscenario {}\nkernel {}", sc.kind.name(), sc.scenario, sc.kernel);
        let _ = writeln!(
            s,
            "fit_exponent {}\npairing_order {}\nlimit {}\nextrapolated {}",
            num(sc.fit_exponent),
            num(sc.pairing_order),
            num(sc.limit),
            sc.extrapolated
        );
        for k in 0..sc.ells.len() {
            let _ = writeln!(s, "ell {} pairing {} sup {}", num(sc.ells[k]), num(sc.pairings[k]), num(sc.sup_stats[k]));
        }
    }
    for (i, c) in b.classifications.iter().enumerate() {
        let _ = writeln!(s, "\n[classify {i}]\nscenario {}", c.scenario);
        s += &local::report(&c.classes);
    }
    for (i, o) in b.optimizations.iter().enumerate() {
        let _ = writeln!(
            s,
            "\n[kernel_opt {i}]\nfamily {}\nbest_j {}\ntrace_gap {}\nbaseline {}\nevaluations {}",
            o.family.name(),
            num(o.best_j),
            num(o.trace_gap),
            num(o.baseline),
            o.trace.len()
        );
        let p: Vec<String> = o.params.iter().map(|v| num(*v)).collect();
        let _ = writeln!(s, "params {}", p.join(" "));
    }
    if let Some(r) = &b.bv_report {
        s += "\n[bv]\n";
        s += r;
    }
    s
}

/// Writes the bundle under `out` and returns the files written, in order.
/// Output is byte-stable for identical bundles.
pub fn emit_results(b: &Bundle, format: Format, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| LabError::Io(format!("{}: {e}", out.display())))?;
    let mut files: Vec<(String, String)> = Vec::new();
    match format {
        Format::Text => files.push(("report.txt".into(), bundle_text(b))),
        Format::Csv => {
            files.push(("verdicts.csv".into(), verdicts_csv(&b.verdicts)));
            if !b.audits.is_empty() {
                files.push(("audit.csv".into(), audit_csv(&b.audits)));
            }
            for (i, sc) in b.scans.iter().enumerate() {
                files.push((format!("scan_{i:02}_{}_{}.csv", sc.scenario, sc.kind.name()), sc.to_csv()));
            }
            for (i, c) in b.classifications.iter().enumerate() {
                files.push((format!("classify_{i:02}_{}.txt", c.scenario), local::report(&c.classes)));
            }
            for (i, o) in b.optimizations.iter().enumerate() {
                files.push((format!("kernel_opt_{i:02}.csv"), o.to_csv()));
            }
            if let Some(r) = &b.bv_report {
                files.push(("bv_ledger.csv".into(), r.clone()));
            }
        }
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        std::fs::write(&p, body).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
seed = 3
format = "text"

[[scan]]
scenario = "flat_shear"
ladder = "0.2,2,3"
fluxes = ["cet", "dr"]
grid = { n = 128 }
test_function = { center = [0.1, 0.05], radius = 0.4 }

[[classify]]
scenario = "taylor_green"
probe_count = 2

[[kernel_opt]]
m = [[1.0, 0.0], [0.0, -1.0]]

[bv]
cubic = "burgers"

[audit]
scenarios = ["flat_shear"]
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.format, Format::Text);
        assert_eq!(c.scan[0].fluxes, vec!["cet", "dr"]);
        assert_eq!(c.classify[0].ladder, default_classify_ladder());
        assert_eq!(c.kernel_opt[0].budget, 500);
        assert!(c.bv.is_some() && c.audit.is_some());
    }

    #[test]
    fn config_errors_carry_lines() {
        let e = ExperimentConfig::from_toml("seed = 1\n[[scan]]\nscenario = 4\n").unwrap_err();
        assert!(matches!(e, LabError::Parse { line: 3, .. }), "{e:?}");
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn flat_shear_scan_passes_with_zero_pairings() {
        let c = ExperimentConfig::from_toml(
            r#"
[[scan]]
scenario = "flat_shear"
ladder = "0.2,2,3"
fluxes = ["dr"]
grid = { n = 256 }
test_function = { center = [0.1, 0.05], radius = 0.4 }
"#,
        )
        .unwrap();
        let b = run_experiment(&c).unwrap();
        assert!(b.all_passed(), "{:?}", b.verdicts);
        assert!(b.scans[0].pairings.iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn failures_name_the_stage() {
        let c = ExperimentConfig::from_toml(
            r#"
[bv]
[[scan]]
scenario = "burgers_stationary_shock"
ladder = "0.1,2,2"
fluxes = ["bd"]
test_function = { center = [0.0, 0.0], radius = 0.5 }
"#,
        )
        .unwrap();
        let (b, e) = run_experiment_partial(&c);
        match e {
            Some(LabError::Stage { stage, .. }) => assert_eq!(stage, "scan[0]:burgers_stationary_shock"),
            other => panic!("{other:?}"),
        }
        // scans run before the bv stage, so nothing else finished
        assert!(b.scans.is_empty());
        let missing = ExperimentConfig::from_toml(
            "[[scan]]\nscenario = \"nope\"\nladder = \"0.1,2,2\"\ntest_function = { center = [0.0, 0.0], radius = 0.5 }\n",
        )
        .unwrap();
        assert!(matches!(run_experiment(&missing), Err(LabError::Stage { .. })));
    }

    #[test]
    fn bv_stage_verdicts() {
        let mut b = Bundle::default();
        run_bv(&BvConfig { cubic: "burgers".into(), drop_jump_correction: true, fixtures: None }, &mut b).unwrap();
        assert!(b.all_passed(), "{:?}", b.verdicts.iter().filter(|v| !v.passed).collect::<Vec<_>>());
        let h = b.verdicts.iter().find(|v| v.name == "heaviside/cr3/dropped_correction").unwrap();
        assert_eq!(h.expected, 1.0 / 12.0);
    }

    #[test]
    fn empty_bundle_emits_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&Bundle::default(), Format::Csv, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap(), "stage,name,measured,expected,tolerance,passed\n");
    }

    #[test]
    fn probe_points_lie_on_jump_sets() {
        for id in ["flat_shear", "sawtooth_shear", "circular_vortex_sheet", "burgers_moving_shock"] {
            let s = scenarios::lookup(id).unwrap();
            let pts = probe_points(&s, 8, 0.5, 0);
            assert_eq!(pts.len(), 8);
            let on = pts.iter().filter(|p| s.jump_at(**p, 0.5).is_some()).count();
            if s.dim == 1 {
                assert_eq!(on, 1);
            } else {
                assert_eq!(on, 8, "{id}");
            }
        }
    }
}
