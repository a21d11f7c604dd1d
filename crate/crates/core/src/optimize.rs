//! Derivative-free minimization on the unit box.

/// Outcome of a minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Settings of the simplex search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMead {
    /// Initial simplex edge.
    pub step: f64,
    /// Stop when the simplex diameter falls below this (box units).
    pub x_tol: f64,
    /// Stop when the value spread falls below this.
    pub f_tol: f64,
    pub max_evaluations: usize,
    /// Fresh simplices started from the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { step: 0.05, x_tol: 1e-11, f_tol: 1e-22, max_evaluations: 40_000, restarts: 3 }
    }
}

fn project(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

impl NelderMead {
    /// Minimizes `f` over `[0,1]^d` starting at `x0`; trial points are projected onto the box.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let mut best = x0.to_vec();
        project(&mut best);
        let mut best_val = f(&best);
        let mut evals = 1;
        let mut converged = false;
        for round in 0..=self.restarts {
            let step = self.step / (1 << round.min(8)) as f64;
            let (x, v, n, ok) = self.run(&f, &best, step, self.max_evaluations.saturating_sub(evals));
            evals += n;
            let improved = v < best_val;
            if v <= best_val {
                best = x;
                best_val = v;
            }
            converged = ok;
            if !ok || (!improved && round > 0) || evals >= self.max_evaluations {
                break;
            }
        }
        Minimum { x: best, value: best_val, evaluations: evals, converged }
    }

    fn run(&self, f: &impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, budget: usize) -> (Vec<f64>, f64, usize, bool) {
        let d = x0.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        simplex.push(x0.to_vec());
        for i in 0..d {
            let mut v = x0.to_vec();
            v[i] = if v[i] + step <= 1.0 { v[i] + step } else { v[i] - step };
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        let mut evals = d + 1;
        let eval = |x: &mut Vec<f64>, evals: &mut usize| {
            project(x);
            *evals += 1;
            f(x)
        };
        loop {
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            let diameter = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if diameter < self.x_tol && (vals[d] - vals[0]).abs() <= self.f_tol.max(vals[0].abs() * 1e-12) {
                return (simplex.swap_remove(0), vals[0], evals, true);
            }
            if evals >= budget {
                return (simplex.swap_remove(0), vals[0], evals, false);
            }
            let centroid: Vec<f64> =
                (0..d).map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (c - w)).collect() };
            let mut xr = along(1.0);
            let fr = eval(&mut xr, &mut evals);
            if fr < vals[0] {
                let mut xe = along(2.0);
                let fe = eval(&mut xe, &mut evals);
                if fe < fr {
                    simplex[d] = xe;
                    vals[d] = fe;
                } else {
                    simplex[d] = xr;
                    vals[d] = fr;
                }
                continue;
            }
            if fr < vals[d - 1] {
                simplex[d] = xr;
                vals[d] = fr;
                continue;
            }
            let (xc, fc) = if fr < vals[d] {
                let mut x = along(0.5);
                let v = eval(&mut x, &mut evals);
                (x, v)
            } else {
                let mut x = along(-0.5);
                let v = eval(&mut x, &mut evals);
                (x, v)
            };
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
                continue;
            }
            for i in 1..=d {
                let mut v: Vec<f64> = simplex[i].iter().zip(&simplex[0]).map(|(a, b)| b + 0.5 * (a - b)).collect();
                vals[i] = eval(&mut v, &mut evals);
                simplex[i] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_and_boundary_minima() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0] - 0.3).powi(2) + 10.0 * (x[1] - 0.7).powi(2), &[0.5, 0.5]);
        assert!(m.converged);
        assert!((m.x[0] - 0.3).abs() < 1e-8 && (m.x[1] - 0.7).abs() < 1e-8);
        let m = nm.minimize(|x| (x[0] + 1.0).powi(2), &[0.5]);
        assert!(m.x[0].abs() < 1e-9);
    }
}
