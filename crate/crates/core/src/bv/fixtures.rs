//! Text format for BV fixtures.
//!
//! ```text
//! fixture heaviside
//! interval -1 1
//! breaks 0
//! piece 0
//! piece 1
//! end
//! ```
//!
//! Numbers are integers, `p/q` or terminating decimals, all read exactly.
//! `piece` lines list polynomial coefficients in ascending degree; `#` starts
//! a comment.

use num::BigRational;

use crate::error::{LabError, Result};

use super::measure::PiecewiseBV;
use super::poly::{parse_rational, Poly};

pub const BUILTIN: &str = include_str!("../../fixtures/bv_fixtures.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub u: PiecewiseBV<BigRational>,
}

pub fn builtin_fixtures() -> Vec<Fixture> {
    parse_fixtures(BUILTIN).expect("built-in fixtures parse")
}

pub fn parse_fixtures(text: &str) -> Result<Vec<Fixture>> {
    let mut out = Vec::new();
    let mut current: Option<(String, usize, Option<(BigRational, BigRational)>, Vec<BigRational>, Vec<Poly<BigRational>>)> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let err = |msg: String| LabError::Parse { line, msg };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut words = body.split_whitespace();
        let key = words.next().unwrap();
        let nums = |words: std::str::SplitWhitespace| -> Result<Vec<BigRational>> {
            words.map(|w| parse_rational(w).ok_or_else(|| err(format!("bad number `{w}`")))).collect()
        };
        match (key, current.as_mut()) {
            ("fixture", None) => {
                let name = words.next().ok_or_else(|| err("fixture needs a name".into()))?;
                current = Some((name.to_string(), line, None, Vec::new(), Vec::new()));
            }
            ("fixture", Some(_)) => return Err(err("`fixture` before `end`".into())),
            (_, None) => return Err(err(format!("`{key}` outside a fixture block"))),
            ("interval", Some(c)) => {
                let v = nums(words)?;
                if v.len() != 2 {
                    return Err(err("interval needs two numbers".into()));
                }
                c.2 = Some((v[0].clone(), v[1].clone()));
            }
            ("breaks", Some(c)) => c.3 = nums(words)?,
            ("piece", Some(c)) => c.4.push(Poly::new(nums(words)?)),
            ("end", Some(_)) => {
                let (name, start, interval, breaks, pieces) = current.take().unwrap();
                let (lo, hi) =
                    interval.ok_or_else(|| LabError::Parse { line: start, msg: format!("fixture `{name}` lacks an interval") })?;
                let u = PiecewiseBV::new(lo, hi, breaks, pieces).map_err(|e| err(format!("fixture `{name}`: {e}")))?;
                out.push(Fixture { name, u });
            }
            (other, Some(_)) => return Err(err(format!("unknown keyword `{other}`"))),
        }
    }
    if let Some((name, start, ..)) = current {
        return Err(LabError::Parse { line: start, msg: format!("fixture `{name}` is not closed by `end`") });
    }
    Ok(out)
}

pub fn write_fixtures(fixtures: &[Fixture]) -> String {
    let mut s = String::new();
    for f in fixtures {
        let breaks: Vec<String> = f.u.breakpoints.iter().map(|b| b.to_string()).collect();
        s += &format!("fixture {}\ninterval {} {}\nbreaks {}\n", f.name, f.u.lo, f.u.hi, breaks.join(" "));
        for p in &f.u.pieces {
            s += &format!("piece {p}\n");
        }
        s += "end\n\n";
    }
    s
}
