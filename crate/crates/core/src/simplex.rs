//! Nelder-Mead simplex minimization with dimension-adapted coefficients.

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    /// Objective evaluation budget.
    pub max_evaluations: usize,
    /// Convergence threshold on the spread of objective values.
    pub tolerance: f64,
    /// Edge lengths of the initial simplex, one per coordinate.
    pub initial_step: Vec<f64>,
    /// Stop as soon as the objective drops to this value.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// Best value seen after each iteration.
    pub history: Vec<f64>,
}

struct Counted<F> {
    f: F,
    budget: usize,
    evaluations: usize,
    best: f64,
    best_x: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        if self.evaluations >= self.budget {
            return f64::INFINITY;
        }
        self.evaluations += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best {
            self.best = v;
            self.best_x = x.to_vec();
        }
        v
    }
}

/// Minimizes `f` from `x0`. When the simplex collapses before the budget is
/// spent, it is rebuilt around the best point with half the previous edge.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &SimplexOptions) -> Minimum {
    let n = x0.len();
    assert!(n > 0, "cannot minimize over zero dimensions");
    assert_eq!(opts.initial_step.len(), n, "one initial step per coordinate");
    let nf = n as f64;
    let (rho, chi, gamma, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let budget = opts.max_evaluations.max(1);
    let mut obj = Counted {
        f,
        budget,
        evaluations: 0,
        best: f64::INFINITY,
        best_x: x0.to_vec(),
    };
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut step_scale = 1.0;

    let done = |obj: &Counted<F>| obj.evaluations >= budget || obj.best <= opts.target;

    obj.eval(x0);
    'restart: while !done(&obj) {
        let base = obj.best_x.clone();
        let base_value = obj.best;
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(base.clone(), base_value)];
        for i in 0..n {
            if done(&obj) {
                break 'restart;
            }
            let mut v = base.clone();
            v[i] += opts.initial_step[i] * step_scale;
            let fv = obj.eval(&v);
            simplex.push((v, fv));
        }

        while !done(&obj) {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            if spread.is_finite() && spread <= opts.tolerance {
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let toward = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect()
            };
            let worst = simplex[n].0.clone();
            let fw = simplex[n].1;
            let fbest = simplex[0].1;
            let fnext = simplex[n - 1].1;

            let xr = toward(rho, &worst);
            let fr = obj.eval(&xr);
            if fr < fbest {
                let xe = toward(rho * chi, &worst);
                let fe = obj.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < fnext {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < fw {
                    let xc = toward(rho * gamma, &worst);
                    let fc = obj.eval(&xc);
                    (xc, fc)
                } else {
                    let xc = toward(-gamma, &worst);
                    let fc = obj.eval(&xc);
                    (xc, fc)
                };
                if fc < fr.min(fw) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        if done(&obj) {
                            break;
                        }
                        let v: Vec<f64> = best.iter().zip(&item.0).map(|(b, x)| b + sigma * (x - b)).collect();
                        let fv = obj.eval(&v);
                        *item = (v, fv);
                    }
                }
            }
            history.push(obj.best);
        }

        if obj.best > base_value - opts.tolerance && step_scale < 1.0 {
            break;
        }
        step_scale *= 0.5;
    }

    Minimum {
        x: obj.best_x,
        value: obj.best,
        evaluations: obj.evaluations,
        iterations,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(n: usize, budget: usize) -> SimplexOptions {
        SimplexOptions {
            max_evaluations: budget,
            tolerance: 1e-14,
            initial_step: vec![0.5; n],
            target: f64::NEG_INFINITY,
        }
    }

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 0.3).powi(2)).sum();
        let m = minimize(f, &[0.0; 4], &opts(4, 4000));
        assert!(m.value < 1e-10, "{}", m.value);
        assert!(m.x.iter().all(|v| (v - 0.3).abs() < 1e-4));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &opts(2, 2000));
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn budget_is_respected_and_history_monotone() {
        let f = |x: &[f64]| x.iter().map(|v| v.abs().sqrt()).sum::<f64>();
        let m = minimize(f, &[1.0; 6], &opts(6, 150));
        assert!(m.evaluations <= 150);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stops_at_target() {
        let f = |x: &[f64]| x[0] * x[0];
        let mut o = opts(1, 1000);
        o.target = 0.0;
        let m = minimize(f, &[0.0], &o);
        assert_eq!(m.evaluations, 1);
    }
}
