//! One-dimensional BV calculus with exact rational arithmetic: derivative
//! measures, the chain rules with jump corrections, and the Burgers defect.

mod burgers;
mod fixtures;
mod measure;
mod poly;

pub use burgers::{burgers_entropy_defect, burgers_weak_residual, ShockDescription};
pub use fixtures::{builtin_fixtures, parse_fixtures, write_fixtures, Fixture, BUILTIN};
pub use measure::{
    chain_rule_check, chain_rule_sides, derivative_measure, ChainRule, ChainRuleOptions, CubicForm, PiecewiseBV, SignedMeasure1D,
    TotalVariation,
};
pub use poly::{parse_rational, Poly, Scalar};

use num::BigRational;

/// Residual of every identity on every fixture, one line each:
/// `fixture identity residual_atoms residual_diffuse`.
pub fn ledger_report(fixtures: &[Fixture], opts: ChainRuleOptions) -> String {
    let mut s = format!(
        "# bv ledger cubic={} drop_jump_correction={}\nfixture,identity,atoms,diffuse\n",
        match opts.cubic {
            CubicForm::Energy => "energy",
            CubicForm::Burgers => "burgers",
        },
        opts.drop_jump_correction
    );
    for f in fixtures {
        for rule in ChainRule::ALL {
            let r: TotalVariation<BigRational> = chain_rule_check(&f.u, rule, opts);
            // diffuse residuals are quadrature sums, exactly zero when the identity holds
            let diffuse = if r.diffuse == 0.0 { "0".to_string() } else { format!("{:.6e}", r.diffuse) };
            s += &format!("{},{},{},{}\n", f.name, rule.name(), r.atoms, diffuse);
        }
    }
    s
}
