//! Text formats: sampled-field snapshots and kernel node dumps.
//!
//! A field file is a `key value…` header followed by `data` and one row per
//! grid node (axis 0 fastest), one column per component:
//!
//! ```text
//! # fluxlab field 1
//! dim 2
//! origin -1 -1
//! spacing 0.0078125 0.0078125
//! counts 256 256
//! periodic 0 0
//! components 2
//! time 0
//! data
//! 1e0 0e0
//! …
//! ```
//!
//! Samples sit at cell centers `origin + (i + 1/2) spacing`. Floats are
//! written in shortest round-trip form, so read(write(f)) == f bit for bit.

use std::path::Path;

use crate::error::{LabError, Result};
use crate::grid::{Grid, SampledField};
use crate::mollify::Kernel;

pub const FIELD_MAGIC: &str = "# fluxlab field 1";

pub fn write_field(f: &SampledField) -> String {
    let g = &f.grid;
    let d = g.dim;
    let join = |v: &[String]| v.join(" ");
    let axes = |x: [f64; 2]| join(&x[..d].iter().map(|v| format!("{v:e}")).collect::<Vec<_>>());
    let mut s = String::with_capacity(32 * f.values.len() + 256);
    s += FIELD_MAGIC;
    s += "\n";
    s += &format!("dim {d}\norigin {}\nspacing {}\n", axes(g.origin), axes(g.spacing));
    s += &format!("counts {}\n", join(&g.counts[..d].iter().map(|c| c.to_string()).collect::<Vec<_>>()));
    s += &format!("periodic {}\n", join(&g.periodic[..d].iter().map(|p| (*p as u8).to_string()).collect::<Vec<_>>()));
    s += &format!("components {}\ntime {:e}\ndata\n", f.components, f.time);
    for row in f.values.chunks(f.components) {
        s += &join(&row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>());
        s += "\n";
    }
    s
}

pub fn read_field(text: &str) -> Result<SampledField> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let perr = |line: usize, msg: String| LabError::Parse { line, msg };
    match lines.next() {
        Some((_, l)) if l == FIELD_MAGIC => {}
        _ => return Err(perr(1, format!("missing `{FIELD_MAGIC}` header"))),
    }
    let mut dim = None;
    let mut origin = None;
    let mut spacing = None;
    let mut counts = None;
    let mut periodic = None;
    let mut components = None;
    let mut time = 0.0;
    let mut data_line = 0;
    for (line, l) in lines.by_ref() {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut w = l.split_whitespace();
        let key = w.next().unwrap();
        let rest: Vec<&str> = w.collect();
        let floats =
            || -> Result<Vec<f64>> { rest.iter().map(|t| t.parse::<f64>().map_err(|_| perr(line, format!("bad number `{t}`")))).collect() };
        let ints = || -> Result<Vec<usize>> {
            rest.iter().map(|t| t.parse::<usize>().map_err(|_| perr(line, format!("bad integer `{t}`")))).collect()
        };
        match key {
            "dim" => dim = Some((line, ints()?)),
            "origin" => origin = Some((line, floats()?)),
            "spacing" => spacing = Some((line, floats()?)),
            "counts" => counts = Some((line, ints()?)),
            "periodic" => periodic = Some((line, ints()?)),
            "components" => components = Some((line, ints()?)),
            "time" => {
                let v = floats()?;
                time = *v.first().ok_or_else(|| perr(line, "time needs a value".into()))?;
            }
            "data" => {
                data_line = line;
                break;
            }
            other => return Err(perr(line, format!("unknown header key `{other}`"))),
        }
    }
    if data_line == 0 {
        return Err(perr(text.lines().count().max(1), "missing `data` section".into()));
    }
    let need = |name: &str| perr(data_line, format!("header lacks `{name}`"));
    let (dl, dim) = dim.ok_or_else(|| need("dim"))?;
    let d = match dim.as_slice() {
        [1] => 1,
        [2] => 2,
        _ => return Err(perr(dl, "dim must be 1 or 2".into())),
    };
    let axes_f = |o: Option<(usize, Vec<f64>)>, name: &str, default: f64| -> Result<[f64; 2]> {
        let (l, v) = o.ok_or_else(|| need(name))?;
        if v.len() != d {
            return Err(perr(l, format!("`{name}` needs {d} values")));
        }
        Ok([v[0], if d == 2 { v[1] } else { default }])
    };
    let axes_i = |o: Option<(usize, Vec<usize>)>, name: &str, default: usize| -> Result<[usize; 2]> {
        let (l, v) = o.ok_or_else(|| need(name))?;
        if v.len() != d {
            return Err(perr(l, format!("`{name}` needs {d} values")));
        }
        Ok([v[0], if d == 2 { v[1] } else { default }])
    };
    let origin = axes_f(origin, "origin", 0.0)?;
    let spacing = axes_f(spacing, "spacing", 1.0)?;
    let counts = axes_i(counts, "counts", 1)?;
    let periodic = axes_i(periodic.or(Some((data_line, vec![0; d]))), "periodic", 0)?;
    let (cl, comps) = components.ok_or_else(|| need("components"))?;
    let m = match comps.as_slice() {
        [m @ 1..=2] => *m,
        _ => return Err(perr(cl, "components must be 1 or 2".into())),
    };
    let grid = Grid::new(d, origin, spacing, counts, [periodic[0] != 0, periodic[1] != 0])?;
    let mut values = Vec::with_capacity(grid.len() * m);
    for (line, l) in lines {
        if l.is_empty() {
            continue;
        }
        let row: Vec<&str> = l.split_whitespace().collect();
        if row.len() != m {
            return Err(perr(line, format!("expected {m} values, got {}", row.len())));
        }
        for t in row {
            values.push(t.parse::<f64>().map_err(|_| perr(line, format!("bad number `{t}`")))?);
        }
    }
    SampledField::new(grid, m, values, time)
}

pub fn save_field(f: &SampledField, path: &Path) -> Result<()> {
    std::fs::write(path, write_field(f)).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}

pub fn load_field(path: &Path) -> Result<SampledField> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    read_field(&text)
}

/// Node table `z0,z1,rho,grad0,grad1,weight`, one row per quadrature node.
pub fn kernel_table(k: &Kernel) -> String {
    let mut s = format!("# kernel {} dim={} nodes={}\nz0,z1,rho,grad0,grad1,weight\n", k.id, k.dim, k.nodes.len());
    for n in &k.nodes {
        s += &format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", n.z[0], n.z[1], n.value, n.grad[0], n.grad[1], n.weight);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollify::{build_kernel, KernelProfile};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn header_errors() {
        assert!(matches!(read_field("nope"), Err(LabError::Parse { line: 1, .. })));
        let missing = format!("{FIELD_MAGIC}\ndim 1\norigin 0\nspacing 0.1\ncounts 8\ndata\n");
        assert!(matches!(read_field(&missing), Err(LabError::Parse { line: 6, .. })));
        let short = format!("{FIELD_MAGIC}\ndim 1\norigin 0\nspacing 0.1\ncounts 8\ncomponents 1\ndata\n1\n2\n");
        assert!(matches!(read_field(&short), Err(LabError::Input(_))));
        let bad = format!("{FIELD_MAGIC}\ndim 1\norigin 0\nspacing 0.1\ncounts 8\ncomponents 1\ndata\n1\nx\n");
        assert!(matches!(read_field(&bad), Err(LabError::Parse { line: 9, .. })));
    }

    #[test]
    fn file_round_trip() {
        let g = Grid::uniform(2, -1.0, 1.0, 8).unwrap();
        let f = SampledField::from_fn(&g, 2, 0.25, |x| [x[0] * x[1], 1.0 / 3.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        save_field(&f, &p).unwrap();
        assert_eq!(load_field(&p).unwrap(), f);
        assert!(matches!(load_field(&dir.path().join("missing")), Err(LabError::Io(_))));
    }

    #[test]
    fn kernel_dump_matches_nodes() {
        let k = build_kernel(&KernelProfile::standard(), 2, 17).unwrap();
        let t = kernel_table(&k);
        let rows: Vec<&str> = t.lines().skip(2).collect();
        assert_eq!(rows.len(), k.nodes.len());
        // independent re-summation of the mass from the text
        let mass: f64 = rows
            .iter()
            .map(|r| {
                let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
                v[2] * v[5]
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip(
            dim in 1usize..=2,
            n0 in 8usize..12,
            n1 in 8usize..12,
            comps in 1usize..=2,
            origin in prop::array::uniform2(-10.0f64..10.0),
            h in prop::array::uniform2(1e-4f64..1.0),
            per in prop::array::uniform2(any::<bool>()),
            time in -5.0f64..5.0,
            seed in any::<u64>(),
        ) {
            let g = Grid::new(dim, origin, h, [n0, n1], per).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // wide dynamic range, so shortest round-trip printing is exercised
            let values: Vec<f64> = (0..g.len() * comps).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-300..300))).collect();
            let f = SampledField::new(g, comps, values, time).unwrap();
            let back = read_field(&write_field(&f)).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
