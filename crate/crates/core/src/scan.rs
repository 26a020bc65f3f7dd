//! Scale scans: pairings and sup-statistics of a flux over a geometric ℓ ladder.

use std::fmt::Write as _;

use crate::error::{LabError, Result};
use crate::flux::{self, BalanceInput, FluxKind, Model, TimeSampling};
use crate::grid::{check_scale_spacing, Field, Grid};
use crate::mollify::Kernel;
use crate::testfn::SpaceTimeTest;

pub const SCHEMA_VERSION: u32 = 1;

/// Strictly decreasing geometric sequence of scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub max: f64,
    pub ratio: f64,
    pub values: Vec<f64>,
}

impl Ladder {
    pub fn geometric(max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(max > 0.0 && max.is_finite()) || !(ratio > 1.0) || count == 0 {
            return Err(LabError::Parameter(format!("ladder needs max > 0, ratio > 1, count ≥ 1 (got {max}, {ratio}, {count})")));
        }
        let values = (0..count).map(|k| max / ratio.powi(k as i32)).collect();
        Ok(Self { max, ratio, values })
    }

    /// Parses `"max,ratio,count"`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(LabError::Input(format!("ladder `{s}` is not `max,ratio,count`")));
        }
        let bad = |e: String| LabError::Input(format!("ladder `{s}`: {e}"));
        let max = parts[0].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        let ratio = parts[1].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        let count = parts[2].parse::<usize>().map_err(|e| bad(e.to_string()))?;
        Self::geometric(max, ratio, count)
    }

    pub fn min(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Every rung must resolve at least four grid spacings.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        check_scale_spacing(grid.max_spacing(), self.min())
    }
}

/// Least-squares slope of `log v` against `log ℓ`; NaN when any value is not
/// strictly positive or fewer than two points are given.
pub fn fit_exponent(ells: &[f64], values: &[f64]) -> f64 {
    if ells.len() < 2 || ells.len() != values.len() || values.iter().any(|v| !(*v > 0.0)) {
        return f64::NAN;
    }
    let xs: Vec<f64> = ells.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Observed convergence order of a sequence on a ratio-2 ladder, from the
/// last three entries: `log₂ |P₋₃ − P₋₂| / |P₋₂ − P₋₁|`.
pub fn observed_order(pairings: &[f64]) -> f64 {
    let n = pairings.len();
    if n < 3 {
        return f64::NAN;
    }
    let d1 = (pairings[n - 3] - pairings[n - 2]).abs();
    let d2 = (pairings[n - 2] - pairings[n - 1]).abs();
    if d1 == 0.0 || d2 == 0.0 {
        return f64::NAN;
    }
    (d1 / d2).log2()
}

/// First-order Richardson extrapolation `2P(ℓ) − P(2ℓ)` on the two finest
/// rungs of a ratio-2 ladder.
pub fn richardson(pairings: &[f64]) -> f64 {
    let n = pairings.len();
    match n {
        0 => f64::NAN,
        1 => pairings[0],
        _ => 2.0 * pairings[n - 1] - pairings[n - 2],
    }
}

/// Limit estimate for a pairing sequence. Extrapolates only when the observed
/// order is at least 3/4 (the first-order assumption is then conservative);
/// sequences that are already constant return their last value.
pub fn limit_estimate(pairings: &[f64]) -> (f64, bool) {
    let n = pairings.len();
    if n == 0 {
        return (f64::NAN, false);
    }
    let last = pairings[n - 1];
    if n >= 2 && pairings[n - 2] == last {
        return (last, false);
    }
    let p = observed_order(pairings);
    if p.is_finite() && p >= 0.75 {
        (richardson(pairings), true)
    } else {
        (last, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxScan {
    pub kind: FluxKind,
    pub scenario: String,
    pub kernel: String,
    pub ells: Vec<f64>,
    pub pairings: Vec<f64>,
    /// `max |D_ℓ|` on the interior window; NaN for fluxes without a pointwise density.
    pub sup_stats: Vec<f64>,
    pub fit_exponent: f64,
    pub pairing_order: f64,
    pub limit: f64,
    pub extrapolated: bool,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "nan".into()
    }
}

impl FluxScan {
    pub fn csv_header() -> &'static str {
        "kind,scenario,kernel,ell,pairing,sup_stat,fit_exponent"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fluxscan schema {SCHEMA_VERSION}");
        let _ = writeln!(out, "# pairing_order {}", num(self.pairing_order));
        let _ = writeln!(out, "# limit {} extrapolated {}", num(self.limit), self.extrapolated);
        out.push_str(Self::csv_header());
        out.push('\n');
        for k in 0..self.ells.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.kind.name(),
                self.scenario,
                self.kernel,
                num(self.ells[k]),
                num(self.pairings[k]),
                num(self.sup_stats[k]),
                num(self.fit_exponent)
            );
        }
        out
    }

    /// Monotone decrease of `|pairing|` along the ladder.
    pub fn monotone_decreasing(&self) -> bool {
        self.pairings.windows(2).all(|w| w[1].abs() <= w[0].abs())
    }
}

/// Inputs shared by all rungs of a scan.
pub struct ScanSetup<'a> {
    pub scenario: &'a str,
    pub model: Model,
    pub u: &'a dyn Field,
    pub p: Option<&'a dyn Field>,
    pub f: Option<&'a dyn Field>,
    pub grid: &'a Grid,
    pub phi: &'a SpaceTimeTest,
    pub time: TimeSampling,
    /// Skip the full-window sup statistic (it dominates runtime on fine grids).
    pub skip_sup: bool,
}

/// `∫ ψ(t) g(t) dt` under the setup's time sampling.
fn time_integral(setup: &ScanSetup, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    match setup.time {
        TimeSampling::Stationary => Ok(g(setup.phi.t_center)? * setup.phi.time_mass()),
        TimeSampling::Slices { nodes, .. } => {
            let (ta, tb) = setup.phi.time_support();
            let (gx, gw) = crate::quad::gauss_legendre(nodes.max(1));
            let mut acc = 0.0;
            for (xi, wi) in gx.iter().zip(&gw) {
                let t = 0.5 * (ta + tb) + 0.5 * (tb - ta) * xi;
                let psi = setup.phi.time_profile(t).0;
                if psi != 0.0 {
                    acc += 0.5 * (tb - ta) * wi * psi * g(t)?;
                }
            }
            Ok(acc)
        }
    }
}

/// One rung: the space-time pairing and the sup statistic at `t_center`.
pub fn scan_rung(setup: &ScanSetup, rho: &Kernel, kind: FluxKind, ell: f64) -> Result<(f64, f64)> {
    let u = setup.u;
    let grid = setup.grid;
    let space = &setup.phi.space;
    let t0 = setup.phi.t_center;
    let sup = |s: crate::grid::SampledField| s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(match kind {
        FluxKind::Cet => {
            let pairing = time_integral(setup, |t| flux::cet_pair(u, rho, ell, grid, space, t))?;
            let s = if setup.skip_sup { f64::NAN } else { sup(flux::cet_flux(u, rho, ell, grid, t0)?) };
            (pairing, s)
        }
        FluxKind::Dr => {
            let pairing = time_integral(setup, |t| flux::dr_pair(u, rho, ell, grid, space, t, setup.model))?;
            let s = if setup.skip_sup { f64::NAN } else { sup(flux::dr_flux(u, rho, ell, grid, t0, setup.model)?) };
            (pairing, s)
        }
        FluxKind::Bd => {
            let pairing = time_integral(setup, |t| flux::bd_flux_pair(u, rho, ell, grid, space, t))?;
            (pairing, f64::NAN)
        }
        FluxKind::Energy => {
            let input = BalanceInput { model: setup.model, u, p: setup.p, f: setup.f, time: setup.time };
            (flux::energy_balance_residual(&input, setup.phi, rho, ell, grid)?, f64::NAN)
        }
    })
}

pub fn flux_scan(setup: &ScanSetup, rho: &Kernel, kind: FluxKind, ladder: &Ladder) -> Result<FluxScan> {
    if (ladder.ratio - 2.0).abs() > 1e-12 {
        return Err(LabError::Parameter(format!("flux scans use ratio-2 ladders, got {}", ladder.ratio)));
    }
    ladder.check_grid(setup.grid)?;
    let mut pairings = Vec::with_capacity(ladder.values.len());
    let mut sups = Vec::with_capacity(ladder.values.len());
    for &ell in &ladder.values {
        let (p, s) = scan_rung(setup, rho, kind, ell)?;
        pairings.push(p);
        sups.push(s);
    }
    let fit = fit_exponent(&ladder.values, &sups);
    let (limit, extrapolated) = limit_estimate(&pairings);
    Ok(FluxScan {
        kind,
        scenario: setup.scenario.to_string(),
        kernel: rho.id.clone(),
        ells: ladder.values.clone(),
        pairings: pairings.clone(),
        sup_stats: sups,
        fit_exponent: fit,
        pairing_order: observed_order(&pairings),
        limit,
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FnField;
    use crate::mollify::{build_kernel, KernelProfile};
    use crate::testfn::TestFunction;

    #[test]
    fn ladder_parsing_and_validation() {
        let l = Ladder::parse("0.2, 2, 5").unwrap();
        assert_eq!(l.values.len(), 5);
        assert!((l.min() - 0.0125).abs() < 1e-15);
        assert!(Ladder::parse("0.2,1,5").is_err());
        assert!(Ladder::parse("0.2,2").is_err());
        let g = Grid::uniform(2, -1.0, 1.0, 64).unwrap();
        assert!(matches!(l.check_grid(&g), Err(LabError::Resolution(_))));
    }

    #[test]
    fn exponent_fit_recovers_power_law() {
        let ells = [0.2, 0.1, 0.05, 0.025];
        let v: Vec<f64> = ells.iter().map(|e| 3.0 * e * e).collect();
        assert!((fit_exponent(&ells, &v) - 2.0).abs() < 1e-12);
        assert!(fit_exponent(&ells, &[1.0, 0.0, 1.0, 1.0]).is_nan());
    }

    #[test]
    fn richardson_removes_first_order_error() {
        let p: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|e| -0.5 + 0.7 * e).collect();
        let (l, ex) = limit_estimate(&p);
        assert!(ex);
        assert!((l + 0.5).abs() < 1e-12);
        let flat = [0.0, 0.0, 0.0];
        assert_eq!(limit_estimate(&flat), (0.0, false));
    }

    #[test]
    fn shear_dr_scan_is_zero_and_csv_is_stable() {
        let rho = build_kernel(&KernelProfile::standard(), 2, 17).unwrap();
        let g = Grid::uniform(2, -1.0, 1.0, 128).unwrap();
        let u = FnField::new(2, 2, |x: crate::grid::Vec2, _| {
            [
                if x[1] > 0.0 {
                    1.0
                } else if x[1] < 0.0 {
                    -1.0
                } else {
                    0.0
                },
                0.0,
            ]
        });
        let phi = SpaceTimeTest::new(TestFunction::bump(2, [0.0, 0.0], 0.3), 0.0, 1.0);
        let setup = ScanSetup {
            scenario: "flat_shear",
            model: Model::Euler,
            u: &u,
            p: None,
            f: None,
            grid: &g,
            phi: &phi,
            time: TimeSampling::Stationary,
            skip_sup: false,
        };
        let ladder = Ladder::geometric(0.4, 2.0, 3).unwrap();
        let a = flux_scan(&setup, &rho, FluxKind::Dr, &ladder).unwrap();
        assert!(a.pairings.iter().all(|p| p.abs() < 1e-12));
        let b = flux_scan(&setup, &rho, FluxKind::Dr, &ladder).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("# fluxscan schema 1\n"));
        assert_eq!(a.to_csv().lines().filter(|l| l.starts_with("dr,")).count(), 3);
    }
}
