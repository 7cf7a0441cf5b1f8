//! Bounded Nelder–Mead simplex minimizer.

/// Box constraint for one coordinate. Candidate points are projected onto the
/// box before evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub fn new(lower: f64, upper: f64) -> Self {
        assert!(lower <= upper, "bound lower {lower} above upper {upper}");
        Self { lower, upper }
    }

    pub fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tolerance: f64,
    pub initial_step: Vec<f64>,
    pub bounds: Vec<Bound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl NelderMead {
    pub fn new(initial_step: Vec<f64>) -> Self {
        let dim = initial_step.len();
        Self {
            max_iterations: 2000,
            diameter_tolerance: 1e-9,
            initial_step,
            bounds: vec![Bound::unbounded(); dim],
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<Bound>) -> Self {
        assert_eq!(bounds.len(), self.initial_step.len());
        self.bounds = bounds;
        self
    }

    pub fn with_tolerance(mut self, diameter_tolerance: f64, max_iterations: usize) -> Self {
        self.diameter_tolerance = diameter_tolerance;
        self.max_iterations = max_iterations;
        self
    }

    fn project(&self, x: &mut [f64]) {
        for (xi, b) in x.iter_mut().zip(&self.bounds) {
            *xi = b.clamp(*xi);
        }
    }

    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let dim = x0.len();
        assert_eq!(dim, self.initial_step.len(), "x0 dimension mismatch");
        assert!(dim >= 1);

        let mut start = x0.to_vec();
        self.project(&mut start);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let v0 = f(&start);
        simplex.push((start.clone(), v0));
        for i in 0..dim {
            let mut p = start.clone();
            p[i] += self.initial_step[i];
            self.project(&mut p);
            if p[i] == start[i] {
                // pinned against a bound: step the other way
                p[i] -= self.initial_step[i];
                self.project(&mut p);
            }
            let v = f(&p);
            simplex.push((p, v));
        }

        let mut iterations = 0;
        let mut converged = false;
        let mut centroid = vec![0.0; dim];
        let mut trial = vec![0.0; dim];

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if diameter(&simplex) < self.diameter_tolerance {
                converged = true;
                break;
            }
            if iterations >= self.max_iterations {
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for (p, _) in &simplex[..dim] {
                for (c, pi) in centroid.iter_mut().zip(p) {
                    *c += pi / dim as f64;
                }
            }
            let worst = simplex[dim].clone();

            along(&centroid, &worst.0, -REFLECT, &mut trial);
            self.project(&mut trial);
            let reflected = f(&trial);

            if reflected < simplex[0].1 {
                let reflected_point = trial.clone();
                along(&centroid, &worst.0, -EXPAND, &mut trial);
                self.project(&mut trial);
                let expanded = f(&trial);
                simplex[dim] = if expanded < reflected {
                    (trial.clone(), expanded)
                } else {
                    (reflected_point, reflected)
                };
                continue;
            }
            if reflected < simplex[dim - 1].1 {
                simplex[dim] = (trial.clone(), reflected);
                continue;
            }

            // contraction, outside if the reflection improved on the worst
            let (coef, threshold) = if reflected < worst.1 {
                (-CONTRACT, reflected)
            } else {
                (CONTRACT, worst.1)
            };
            along(&centroid, &worst.0, coef, &mut trial);
            self.project(&mut trial);
            let contracted = f(&trial);
            if contracted < threshold {
                simplex[dim] = (trial.clone(), contracted);
                continue;
            }

            let best = simplex[0].0.clone();
            for (p, v) in simplex.iter_mut().skip(1) {
                for (pi, bi) in p.iter_mut().zip(&best) {
                    *pi = bi + SHRINK * (*pi - bi);
                }
                self.project(p);
                *v = f(p);
            }
        }

        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            iterations,
            converged,
        }
    }
}

/// `out = centroid + coef * (point - centroid)`
fn along(centroid: &[f64], point: &[f64], coef: f64, out: &mut [f64]) {
    for ((o, c), p) in out.iter_mut().zip(centroid).zip(point) {
        *o = c + coef * (p - c);
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(p, _)| {
            p.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead::new(vec![0.5, 0.5]).with_tolerance(1e-10, 5000);
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6);
        assert!((m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_bounds() {
        let nm = NelderMead::new(vec![1.0, 1.0])
            .with_bounds(vec![Bound::new(2.0, 5.0), Bound::unbounded()]);
        let m = nm.minimize(|x| x[0] * x[0] + (x[1] - 3.0).powi(2), &[4.0, 0.0]);
        assert!((m.x[0] - 2.0).abs() < 1e-8);
        assert!((m.x[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let nm = NelderMead::new(vec![1.0]).with_tolerance(0.0, 10);
        let m = nm.minimize(|x| (x[0] - 1.0).powi(2), &[0.0]);
        assert!(!m.converged);
        assert_eq!(m.iterations, 10);
    }
}
