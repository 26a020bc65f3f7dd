//! Nelder–Mead downhill simplex. Evaluation-only, deterministic.

/// Outcome of a minimization; `history[k]` is the value of evaluation `k`.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evaluations: usize,
    pub history: Vec<f64>,
}

struct Counter<F> {
    f: F,
    budget: usize,
    history: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.history.len() >= self.budget {
            return None;
        }
        let v = (self.f)(x);
        // infeasible points come back as NaN or +∞ and must never win a comparison
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.history.push(v);
        Some(v)
    }
}

/// Minimizes `f` from the simplex `x0, x0 + steps[i] e_i`, using at most
/// `budget` evaluations. Stops early once the simplex values agree to `ftol`.
pub fn minimize(f: impl FnMut(&[f64]) -> f64, x0: &[f64], steps: &[f64], budget: usize, ftol: f64) -> Minimum {
    let n = x0.len();
    assert_eq!(steps.len(), n);
    let mut c = Counter { f, budget, history: Vec::new() };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut x = x0.to_vec();
        if i > 0 {
            x[i - 1] += steps[i - 1];
        }
        match c.eval(&x) {
            Some(v) => simplex.push((x, v)),
            None => break,
        }
    }
    let finish = |simplex: Vec<(Vec<f64>, f64)>, c: Counter<_>| {
        let (x, fx) = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((x0.to_vec(), f64::INFINITY));
        Minimum { x, fx, evaluations: c.history.len(), history: c.history }
    };
    if simplex.len() <= n {
        return finish(simplex, c);
    }
    let along = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if worst.is_finite() && (worst - best).abs() <= ftol * (best.abs() + ftol) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let xw = simplex[n].0.clone();
        let xr = along(&centroid, &xw, -1.0);
        let Some(fr) = c.eval(&xr) else { break };
        if fr < simplex[0].1 {
            let xe = along(&centroid, &xw, -2.0);
            let Some(fe) = c.eval(&xe) else {
                simplex[n] = (xr, fr);
                break;
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        // contraction, outside if the reflection beat the worst point
        let (xc, fc) = if fr < simplex[n].1 {
            let xc = along(&centroid, &xw, -0.5);
            let Some(fc) = c.eval(&xc) else { break };
            if fc <= fr {
                (xc, fc)
            } else {
                simplex[n] = (xr, fr);
                (Vec::new(), f64::NAN)
            }
        } else {
            let xc = along(&centroid, &xw, 0.5);
            let Some(fc) = c.eval(&xc) else { break };
            (xc, fc)
        };
        if fc.is_nan() {
            continue;
        }
        if fc < simplex[n].1 {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let x0 = simplex[0].0.clone();
        let mut out_of_budget = false;
        for v in simplex.iter_mut().skip(1) {
            let x = along(&x0, &v.0, 0.5);
            match c.eval(&x) {
                Some(fx) => *v = (x, fx),
                None => {
                    out_of_budget = true;
                    break;
                }
            }
        }
        if out_of_budget {
            break;
        }
    }
    finish(simplex, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &[0.5, 0.5], 2000, 1e-14);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert_eq!(m.history.len(), m.evaluations);
    }

    #[test]
    fn respects_budget_and_infeasibility() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.3).powi(2) + x[1].abs() };
        let m = minimize(f, &[1.0, 1.0], &[0.4, 0.4], 37, 0.0);
        assert!(m.evaluations <= 37);
        assert!(m.fx.is_finite());
        assert!(m.fx <= m.history[0]);
    }
}
