//! Piecewise-polynomial BV functions on an interval, their derivative
//! measures and the chain-rule identities with jump corrections.

use std::fmt;

use crate::error::{LabError, Result};
use crate::quad;

use super::poly::{Poly, Scalar};

/// `u = pieces[k]` on `(b_{k−1}, b_k)` with `b_{−1} = lo`, `b_K = hi`.
/// At a breakpoint the precise value is the midpoint of the one-sided limits.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseBV<S> {
    pub lo: S,
    pub hi: S,
    pub breakpoints: Vec<S>,
    pub pieces: Vec<Poly<S>>,
}

impl<S: Scalar> PiecewiseBV<S> {
    pub fn new(lo: S, hi: S, breakpoints: Vec<S>, pieces: Vec<Poly<S>>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(LabError::Input(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        let mut prev = lo.clone();
        for b in breakpoints.iter().chain(std::iter::once(&hi)) {
            if *b <= prev {
                return Err(LabError::Input(format!("breakpoints must increase strictly inside ({lo}, {hi})")));
            }
            prev = b.clone();
        }
        Ok(Self { lo, hi, breakpoints, pieces })
    }

    /// Limit from the left at breakpoint `i`.
    pub fn left(&self, i: usize) -> S {
        self.pieces[i].eval(&self.breakpoints[i])
    }

    pub fn right(&self, i: usize) -> S {
        self.pieces[i + 1].eval(&self.breakpoints[i])
    }

    /// `u⁺ − u⁻` at breakpoint `i`.
    pub fn jump(&self, i: usize) -> S {
        self.right(i) - self.left(i)
    }

    /// `ũ = (u⁺ + u⁻)/2` at breakpoint `i`.
    pub fn precise(&self, i: usize) -> S {
        (self.right(i) + self.left(i)) * S::ratio(1, 2)
    }

    /// Same breakpoints, `f` applied to every piece.
    pub fn map(&self, f: impl Fn(&Poly<S>) -> Poly<S>) -> Self {
        Self { pieces: self.pieces.iter().map(f).collect(), ..self.clone() }
    }

    /// Interval endpoints `[lo, b_0, …, hi]`.
    pub fn knots(&self) -> Vec<S> {
        let mut k = vec![self.lo.clone()];
        k.extend(self.breakpoints.iter().cloned());
        k.push(self.hi.clone());
        k
    }

    /// Pointwise value; precise representative at breakpoints.
    pub fn eval_f64(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|b| b.to_f64() < x);
        if k < self.breakpoints.len() && self.breakpoints[k].to_f64() == x {
            return self.precise(k).to_f64();
        }
        self.pieces[k].eval_f64(x)
    }

    /// `∫ u g` over `[lo, hi]`, splitting at breakpoints and at `extra` points.
    pub fn integrate_against(&self, g: impl Fn(f64) -> f64, extra: &[f64]) -> f64 {
        let knots = self.knots();
        (0..self.pieces.len())
            .map(|k| {
                let p = &self.pieces[k];
                integrate_split(|x| p.eval_f64(x) * g(x), knots[k].to_f64(), knots[k + 1].to_f64(), extra)
            })
            .sum()
    }
}

fn integrate_split(f: impl Fn(f64) -> f64, a: f64, b: f64, extra: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = extra.iter().copied().filter(|&c| c > a && c < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut pts = vec![a];
    pts.extend(cuts);
    pts.push(b);
    pts.windows(2).map(|w| quad::integrate(&f, w[0], w[1], 64, 12)).sum()
}

/// `μ = density · dx + Σ atoms[i] δ_{b_i}` on `[lo, hi]`, with one density
/// polynomial per interval between breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure1D<S> {
    pub lo: S,
    pub hi: S,
    pub breakpoints: Vec<S>,
    pub density: Vec<Poly<S>>,
    pub atom_weights: Vec<S>,
}

/// Total variation of a measure, split into atomic and diffuse parts.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalVariation<S> {
    /// `Σ |atom|`, exact for rationals.
    pub atoms: S,
    /// `∫ |density|`; exactly 0 when every density piece vanishes.
    pub diffuse: f64,
}

impl<S: Scalar> TotalVariation<S> {
    pub fn total(&self) -> f64 {
        self.atoms.to_f64() + self.diffuse
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.negligible() && self.diffuse == 0.0
    }
}

impl<S: Scalar> fmt::Display for TotalVariation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "atoms={} diffuse={:.6e}", self.atoms, self.diffuse)
    }
}

impl<S: Scalar> SignedMeasure1D<S> {
    /// Nonzero atoms as `(location, weight)`.
    pub fn atoms(&self) -> Vec<(S, S)> {
        self.breakpoints.iter().zip(&self.atom_weights).filter(|(_, w)| **w != S::zero()).map(|(b, w)| (b.clone(), w.clone())).collect()
    }

    fn zip_with(&self, o: &Self, fd: impl Fn(&Poly<S>, &Poly<S>) -> Poly<S>, fa: impl Fn(&S, &S) -> S) -> Self {
        assert_eq!(self.breakpoints, o.breakpoints, "measures on different partitions");
        Self {
            density: self.density.iter().zip(&o.density).map(|(a, b)| fd(a, b)).collect(),
            atom_weights: self.atom_weights.iter().zip(&o.atom_weights).map(|(a, b)| fa(a, b)).collect(),
            ..self.clone()
        }
    }

    pub fn plus(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a + b, |a, b| a.clone() + b.clone())
    }

    pub fn minus(&self, o: &Self) -> Self {
        self.zip_with(o, |a, b| a - b, |a, b| a.clone() - b.clone())
    }

    pub fn scale(&self, s: &S) -> Self {
        Self {
            density: self.density.iter().map(|p| p.scale(s)).collect(),
            atom_weights: self.atom_weights.iter().map(|w| w.clone() * s.clone()).collect(),
            ..self.clone()
        }
    }

    /// `f μ`: densities multiply by `f`'s pieces, atoms by `at_atoms[i]`.
    pub fn times(&self, f: &PiecewiseBV<S>, at_atoms: &[S]) -> Self {
        assert_eq!(self.breakpoints, f.breakpoints, "function and measure on different partitions");
        Self {
            density: self.density.iter().zip(&f.pieces).map(|(d, p)| d * p).collect(),
            atom_weights: self.atom_weights.iter().zip(at_atoms).map(|(w, v)| w.clone() * v.clone()).collect(),
            ..self.clone()
        }
    }

    /// `μʲ`, the atomic part.
    pub fn jump_part(&self) -> Self {
        Self { density: vec![Poly::zero(); self.density.len()], ..self.clone() }
    }

    pub fn total_variation(&self) -> TotalVariation<S> {
        let atoms = self.atom_weights.iter().fold(S::zero(), |acc, w| acc + w.abs());
        let mut knots = vec![self.lo.to_f64()];
        knots.extend(self.breakpoints.iter().map(Scalar::to_f64));
        knots.push(self.hi.to_f64());
        let diffuse = self
            .density
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(k, p)| quad::integrate(|x| p.eval_f64(x).abs(), knots[k], knots[k + 1], 64, 8))
            .sum();
        TotalVariation { atoms, diffuse }
    }

    /// `⟨μ, φ⟩`.
    pub fn pair(&self, phi: impl Fn(f64) -> f64, extra: &[f64]) -> f64 {
        let mut knots = vec![self.lo.to_f64()];
        knots.extend(self.breakpoints.iter().map(Scalar::to_f64));
        knots.push(self.hi.to_f64());
        let diffuse: f64 =
            self.density.iter().enumerate().map(|(k, p)| integrate_split(|x| p.eval_f64(x) * phi(x), knots[k], knots[k + 1], extra)).sum();
        let atomic: f64 = self.breakpoints.iter().zip(&self.atom_weights).map(|(b, w)| w.to_f64() * phi(b.to_f64())).sum();
        diffuse + atomic
    }
}

/// `Du`: classical derivative on the pieces plus `(u⁺ − u⁻) δ` at breakpoints.
pub fn derivative_measure<S: Scalar>(u: &PiecewiseBV<S>) -> SignedMeasure1D<S> {
    SignedMeasure1D {
        lo: u.lo.clone(),
        hi: u.hi.clone(),
        breakpoints: u.breakpoints.clone(),
        density: u.pieces.iter().map(Poly::derivative).collect(),
        atom_weights: (0..u.breakpoints.len()).map(|i| u.jump(i)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainRule {
    /// `∂ₓ(u²) = ũ ∂ₓu + ũ ∂ₓu`.
    Cr1,
    /// `∂ₓ(u²/2) = ũ ∂ₓu`.
    Cr2,
    /// `∂ₓ(u³/2) = ũ ∂ₓ(u²/2) + (ũ²/2) ∂ₓu + (1/8)[u]² ∂ₓʲu`.
    Cr3,
}

impl ChainRule {
    pub const ALL: [ChainRule; 3] = [ChainRule::Cr1, ChainRule::Cr2, ChainRule::Cr3];

    pub fn name(&self) -> &'static str {
        match self {
            ChainRule::Cr1 => "cr1",
            ChainRule::Cr2 => "cr2",
            ChainRule::Cr3 => "cr3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "cr1" => Ok(ChainRule::Cr1),
            "cr2" => Ok(ChainRule::Cr2),
            "cr3" => Ok(ChainRule::Cr3),
            other => Err(LabError::Input(format!("unknown chain-rule identity `{other}` (cr1, cr2, cr3)"))),
        }
    }
}

/// Normalization of the cubic identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CubicForm {
    /// Energy flux `u|u|²/2`.
    #[default]
    Energy,
    /// Burgers entropy flux `u³/3`, i.e. the energy form times 2/3.
    Burgers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChainRuleOptions {
    pub cubic: CubicForm,
    /// Leave out the `(1/8)[u]² ∂ₓʲu` correction in cr3.
    pub drop_jump_correction: bool,
}

/// Both sides of `rule` as measures.
pub fn chain_rule_sides<S: Scalar>(
    u: &PiecewiseBV<S>,
    rule: ChainRule,
    opts: ChainRuleOptions,
) -> (SignedMeasure1D<S>, SignedMeasure1D<S>) {
    let half = S::ratio(1, 2);
    let du = derivative_measure(u);
    let n = u.breakpoints.len();
    let tilde: Vec<S> = (0..n).map(|i| u.precise(i)).collect();
    let u_dot_du = du.times(u, &tilde);
    match rule {
        ChainRule::Cr1 => (derivative_measure(&u.map(|p| p.powi(2))), u_dot_du.plus(&u_dot_du)),
        ChainRule::Cr2 => (derivative_measure(&u.map(|p| p.powi(2).scale(&half))), u_dot_du),
        ChainRule::Cr3 => {
            let energy = u.map(|p| p.powi(2).scale(&half));
            let lhs = derivative_measure(&u.map(|p| p.powi(3).scale(&half)));
            let half_tilde_sq: Vec<S> = tilde.iter().map(|t| t.clone() * t.clone() * half.clone()).collect();
            let mut rhs = derivative_measure(&energy).times(u, &tilde).plus(&du.times(&energy, &half_tilde_sq));
            if !opts.drop_jump_correction {
                let corr: Vec<S> = (0..n).map(|i| u.jump(i) * u.jump(i) * S::ratio(1, 8)).collect();
                let ones = u.map(|_| Poly::constant(S::ratio(1, 1)));
                rhs = rhs.plus(&du.jump_part().times(&ones, &corr));
            }
            match opts.cubic {
                CubicForm::Energy => (lhs, rhs),
                CubicForm::Burgers => {
                    let k = S::ratio(2, 3);
                    (lhs.scale(&k), rhs.scale(&k))
                }
            }
        }
    }
}

/// Total variation of `lhs − rhs` for the identity `rule`.
pub fn chain_rule_check<S: Scalar>(u: &PiecewiseBV<S>, rule: ChainRule, opts: ChainRuleOptions) -> TotalVariation<S> {
    let (lhs, rhs) = chain_rule_sides(u, rule, opts);
    lhs.minus(&rhs).total_variation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::ratio(n, d)
    }

    fn pc(vals: &[i64]) -> Poly<BigRational> {
        Poly::new(vals.iter().map(|&v| q(v, 1)).collect())
    }

    fn heaviside() -> PiecewiseBV<BigRational> {
        PiecewiseBV::new(q(-1, 1), q(1, 1), vec![q(0, 1)], vec![pc(&[0]), pc(&[1])]).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let d = derivative_measure(&heaviside());
        assert_eq!(d.atoms(), vec![(q(0, 1), q(1, 1))]);
        assert!(d.density.iter().all(Poly::is_zero));
        let abs = PiecewiseBV::new(q(-1, 1), q(1, 1), vec![q(0, 1)], vec![pc(&[0, -1]), pc(&[0, 1])]).unwrap();
        let d = derivative_measure(&abs);
        assert!(d.atoms().is_empty());
        assert_eq!(d.density, vec![pc(&[-1]), pc(&[1])]);
    }

    #[test]
    fn heaviside_identities() {
        let h = heaviside();
        let (l, r) = chain_rule_sides(&h, ChainRule::Cr2, ChainRuleOptions::default());
        assert_eq!((l.atom_weights[0].clone(), r.atom_weights[0].clone()), (q(1, 2), q(1, 2)));
        let (l, r) = chain_rule_sides(&h, ChainRule::Cr3, ChainRuleOptions::default());
        assert_eq!((l.atom_weights[0].clone(), r.atom_weights[0].clone()), (q(1, 2), q(1, 2)));
        for rule in ChainRule::ALL {
            assert!(chain_rule_check(&h, rule, ChainRuleOptions::default()).is_zero());
        }
    }

    #[test]
    fn dropping_the_correction() {
        let h = heaviside();
        let drop = |cubic| ChainRuleOptions { cubic, drop_jump_correction: true };
        assert_eq!(chain_rule_check(&h, ChainRule::Cr3, drop(CubicForm::Energy)).atoms, q(1, 8));
        assert_eq!(chain_rule_check(&h, ChainRule::Cr3, drop(CubicForm::Burgers)).atoms, q(1, 12));
        // the first two identities have no correction to drop
        assert!(chain_rule_check(&h, ChainRule::Cr2, drop(CubicForm::Burgers)).is_zero());
    }

    #[test]
    fn sign_function_cr1() {
        let s = PiecewiseBV::new(q(-1, 1), q(1, 1), vec![q(0, 1)], vec![pc(&[-1]), pc(&[1])]).unwrap();
        let (l, r) = chain_rule_sides(&s, ChainRule::Cr1, ChainRuleOptions::default());
        assert_eq!(l.atom_weights[0], q(0, 1));
        assert_eq!(r.atom_weights[0], q(0, 1));
    }

    #[test]
    fn rejects_bad_partitions() {
        assert!(PiecewiseBV::new(q(0, 1), q(1, 1), vec![q(2, 1)], vec![pc(&[0]), pc(&[1])]).is_err());
        assert!(PiecewiseBV::new(q(0, 1), q(1, 1), vec![q(1, 2)], vec![pc(&[0])]).is_err());
        assert!(matches!(ChainRule::parse("cr4"), Err(LabError::Input(_))));
    }

    #[test]
    fn float_fallback_matches() {
        let sq2 = std::f64::consts::SQRT_2 / 2.0;
        let u = PiecewiseBV::new(-1.0, 1.0, vec![sq2], vec![Poly::new(vec![0.3, 1.0]), Poly::new(vec![-1.0, 0.0, 2.0])]).unwrap();
        for rule in ChainRule::ALL {
            let r = chain_rule_check(&u, rule, ChainRuleOptions::default());
            assert!(r.total() < 1e-12, "{rule:?} {r}");
        }
    }
}
