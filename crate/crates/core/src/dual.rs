//! Finite-dimensional dual ascent for entropy minimization under linear
//! constraints.
//!
//! Primal problem over densities `f >= 0` against a base measure `nu`:
//! minimize the nu-integral of `f ln f` subject to
//! `sum_x a_i(x) f(x) nu(x) = b_i` for `i = 1..n`. The dual is the concave
//! unconstrained problem
//!
//! ```text
//! maximize  lambda . b - sum_x exp(-1 + sum_i lambda_i a_i(x)) nu(x)
//! ```
//!
//! whose stationarity conditions reproduce the constraints, and whose
//! maximizer gives the primal solution `f*(x) = exp(-1 + sum_i lambda_i a_i(x))`.
//! The sign convention is fixed by that stationarity requirement and is
//! validated against the finite-atom closed form in the tests.
//!
//! Ascent is damped Newton with backtracking; when the Hessian factorization
//! fails the step falls back to the raw gradient. Conditioning problems
//! (an indicator constraint forcing mass onto a subset) have their optimum at
//! infinity in `lambda`; the iterates then follow the recession direction and
//! the residuals still converge geometrically, so the stopping rule is on the
//! constraint residuals rather than on step size.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numeric::pairwise_sum;

/// One linear constraint: node values `a_i(x)` and the target `b_i`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub values: Vec<f64>,
    pub target: f64,
}

impl Constraint {
    /// The normalization constraint `sum f nu = 1`.
    pub fn normalization(n: usize) -> Self {
        Self { values: vec![1.0; n], target: 1.0 }
    }

    /// Mass constraint on an indicator subset.
    pub fn subset_mass(members: &[bool], target: f64) -> Self {
        Self {
            values: members.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
            target,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub stagnation_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            residual_tolerance: 1e-12,
            stagnation_window: 60,
        }
    }
}

/// Multipliers and both optimal values of the primal/dual pair.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub lambda: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Density `f*` against the base measure, per node.
    pub density: Vec<f64>,
    /// The measure `f* nu`, per node.
    pub posterior: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl DualSolution {
    /// Assemble the solution quantities at a given multiplier vector.
    /// Exposed so tests can examine perturbed multipliers.
    pub fn from_lambda(
        nu: &DiscreteMeasure,
        constraints: &[Constraint],
        lambda: &[f64],
    ) -> Self {
        let state = Evaluation::at(nu, constraints, lambda);
        let posterior: Vec<f64> = state
            .density
            .iter()
            .zip(&nu.weights)
            .map(|(&f, &w)| f * w)
            .collect();
        // primal objective: integral of f ln f d nu, with ln f = exponent
        let primal_terms: Vec<f64> = state
            .density
            .iter()
            .zip(state.exponents.iter().zip(&nu.weights))
            .map(|(&f, (&e, &w))| if f > 0.0 { f * e * w } else { 0.0 })
            .collect();
        DualSolution {
            lambda: lambda.to_vec(),
            primal_value: pairwise_sum(&primal_terms),
            dual_value: state.objective,
            density: state.density,
            posterior,
            residuals: state.residuals,
            iterations: 0,
        }
    }
}

struct Evaluation {
    exponents: Vec<f64>,
    density: Vec<f64>,
    objective: f64,
    gradient: Vec<f64>,
    residuals: Vec<f64>,
}

impl Evaluation {
    fn at(nu: &DiscreteMeasure, constraints: &[Constraint], lambda: &[f64]) -> Self {
        let n_nodes = nu.len();
        let mut exponents = vec![-1.0; n_nodes];
        for (c, &l) in constraints.iter().zip(lambda) {
            for (e, &a) in exponents.iter_mut().zip(&c.values) {
                *e += l * a;
            }
        }
        let density: Vec<f64> = exponents.iter().map(|&e| e.exp()).collect();
        let mass_terms: Vec<f64> = density
            .iter()
            .zip(&nu.weights)
            .map(|(&f, &w)| f * w)
            .collect();
        let lambda_b: f64 = constraints
            .iter()
            .zip(lambda)
            .map(|(c, &l)| l * c.target)
            .sum();
        let objective = lambda_b - pairwise_sum(&mass_terms);
        let mut gradient = Vec::with_capacity(constraints.len());
        let mut residuals = Vec::with_capacity(constraints.len());
        for c in constraints {
            let moment_terms: Vec<f64> = c
                .values
                .iter()
                .zip(&mass_terms)
                .map(|(&a, &fw)| a * fw)
                .collect();
            let moment = pairwise_sum(&moment_terms);
            gradient.push(c.target - moment);
            residuals.push((moment - c.target).abs());
        }
        Self { exponents, density, objective, gradient, residuals }
    }
}

/// Cholesky factorization of a small SPD matrix; `None` if a pivot fails.
fn cholesky_solve(mut m: Vec<f64>, n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    for j in 0..n {
        for k in 0..j {
            let l = m[j * n + k];
            for i in j..n {
                m[i * n + j] -= m[i * n + k] * l;
            }
        }
        let pivot = m[j * n + j];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None;
        }
        let root = pivot.sqrt();
        for i in j..n {
            m[i * n + j] /= root;
        }
    }
    // forward then backward substitution on L L^T x = rhs
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= m[i * n + k] * y[k];
        }
        y[i] /= m[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= m[k * n + i] * y[k];
        }
        y[i] /= m[i * n + i];
    }
    Some(y)
}

/// Maximize the dual objective and return the primal/dual pair at the
/// optimum. Starts from `lambda = 0`, the prior-proportional density.
pub fn solve_dual(
    nu: &DiscreteMeasure,
    constraints: &[Constraint],
    options: &SolverOptions,
) -> Result<DualSolution> {
    let n = constraints.len();
    if n == 0 || n > 16 {
        return Err(Error::Parameter {
            name: "constraints",
            reason: format!("expected between 1 and 16 constraints, got {n}"),
        });
    }
    for c in constraints {
        if c.values.len() != nu.len() {
            return Err(Error::Alignment(c.values.len(), nu.len()));
        }
    }
    if nu.total <= 0.0 {
        return Err(Error::DegeneratePrior);
    }

    let target_scale = constraints
        .iter()
        .map(|c| c.target.abs())
        .fold(1.0f64, f64::max);
    let mut lambda = vec![0.0; n];
    let mut state = Evaluation::at(nu, constraints, &lambda);
    let mut best_residual = f64::INFINITY;
    let mut last_improvement = 0usize;

    for iter in 0..options.max_iterations {
        let max_residual = state.residuals.iter().cloned().fold(0.0, f64::max);
        if max_residual <= options.residual_tolerance {
            let mut sol = DualSolution::from_lambda(nu, constraints, &lambda);
            sol.iterations = iter;
            return Ok(sol);
        }
        if max_residual < best_residual * (1.0 - 1e-3) {
            best_residual = max_residual;
            last_improvement = iter;
        } else if iter - last_improvement >= options.stagnation_window
            && best_residual > 1e-9 * target_scale
        {
            return Err(Error::Infeasible {
                iterations: iter,
                max_residual,
                residuals: state.residuals.clone(),
            });
        }

        // negative Hessian of the dual: the Gram matrix sum_x a a^T f nu
        let mut gram = vec![0.0; n * n];
        for (x, (&f, &w)) in state.density.iter().zip(&nu.weights).enumerate() {
            let fw = f * w;
            if fw == 0.0 {
                continue;
            }
            for i in 0..n {
                let ai = constraints[i].values[x];
                if ai == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    gram[i * n + j] += ai * constraints[j].values[x] * fw;
                }
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                gram[i * n + j] = gram[j * n + i];
            }
        }

        let direction = cholesky_solve(gram, n, &state.gradient)
            .unwrap_or_else(|| state.gradient.clone());
        let slope: f64 = direction
            .iter()
            .zip(&state.gradient)
            .map(|(&d, &g)| d * g)
            .sum();
        let (direction, slope) = if slope > 0.0 {
            (direction, slope)
        } else {
            let s: f64 = state.gradient.iter().map(|g| g * g).sum();
            (state.gradient.clone(), s)
        };

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = lambda
                .iter()
                .zip(&direction)
                .map(|(&l, &d)| l + step * d)
                .collect();
            let trial_state = Evaluation::at(nu, constraints, &trial);
            if trial_state.objective.is_finite()
                && trial_state.objective >= state.objective + 1e-4 * step * slope
            {
                lambda = trial;
                state = trial_state;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // flat to machine precision: report what we have
            let max_residual = state.residuals.iter().cloned().fold(0.0, f64::max);
            if max_residual <= options.residual_tolerance.max(1e-10) {
                let mut sol = DualSolution::from_lambda(nu, constraints, &lambda);
                sol.iterations = iter;
                return Ok(sol);
            }
            return Err(Error::SolverStalled {
                iterations: iter,
                max_residual,
                residuals: state.residuals.clone(),
            });
        }
    }

    let max_residual = state.residuals.iter().cloned().fold(0.0, f64::max);
    if max_residual <= options.residual_tolerance {
        let mut sol = DualSolution::from_lambda(nu, constraints, &lambda);
        sol.iterations = options.max_iterations;
        return Ok(sol);
    }
    Err(Error::SolverStalled {
        iterations: options.max_iterations,
        max_residual,
        residuals: state.residuals,
    })
}

/// Optimality certificate: primal/dual gap and residuals both at most 1e-8.
pub fn verify_duality(solution: &DualSolution) -> bool {
    let gap = (solution.primal_value - solution.dual_value).abs();
    let max_residual = solution.residuals.iter().cloned().fold(0.0, f64::max);
    gap <= 1e-8 && max_residual <= 1e-8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms() -> DiscreteMeasure {
        DiscreteMeasure::probability(vec![0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    #[test]
    fn normalization_alone_returns_the_prior() {
        let nu = atoms();
        let sol = solve_dual(
            &nu,
            &[Constraint::normalization(4)],
            &SolverOptions::default(),
        )
        .unwrap();
        for &f in &sol.density {
            assert!((f - 1.0).abs() < 1e-12, "density {f}");
        }
        assert!(sol.primal_value.abs() < 1e-12);
        assert!(verify_duality(&sol));
    }

    #[test]
    fn conditioning_constraint_recovers_the_closed_form() {
        // mass forced onto atoms {1, 2}: posterior (p1, p2)/(p1+p2) on them,
        // zero elsewhere
        let nu = atoms();
        let constraints = [
            Constraint::normalization(4),
            Constraint::subset_mass(&[true, true, false, false], 1.0),
        ];
        let sol = solve_dual(&nu, &constraints, &SolverOptions::default()).unwrap();
        let expected = [1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0];
        for (q, e) in sol.posterior.iter().zip(expected) {
            assert!((q - e).abs() <= 1e-10, "q = {q}, expected {e}");
        }
        assert!(verify_duality(&sol));
        assert!((sol.primal_value - sol.dual_value).abs() <= 1e-8);
    }

    #[test]
    fn mean_constraint_on_two_atoms() {
        // X in {0, 1}, prior (0.5, 0.5), E[X] = 0.8 pins q = (0.2, 0.8)
        let nu = DiscreteMeasure::probability(vec![0.5, 0.5]).unwrap();
        let constraints = [
            Constraint::normalization(2),
            Constraint { values: vec![0.0, 1.0], target: 0.8 },
        ];
        let sol = solve_dual(&nu, &constraints, &SolverOptions::default()).unwrap();
        assert!((sol.posterior[0] - 0.2).abs() < 1e-10);
        assert!((sol.posterior[1] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn perturbed_multipliers_fail_verification() {
        let nu = atoms();
        let constraints = [
            Constraint::normalization(4),
            Constraint::subset_mass(&[true, true, false, false], 1.0),
        ];
        let sol = solve_dual(&nu, &constraints, &SolverOptions::default()).unwrap();
        let mut perturbed = sol.lambda.clone();
        perturbed[0] += 0.1;
        let bad = DualSolution::from_lambda(&nu, &constraints, &perturbed);
        assert!(!verify_duality(&bad));
    }

    #[test]
    fn incompatible_mass_targets_are_flagged_infeasible() {
        // subset mass 2 cannot coexist with total mass 1
        let nu = atoms();
        let constraints = [
            Constraint::normalization(4),
            Constraint::subset_mass(&[true, false, false, false], 2.0),
        ];
        let err = solve_dual(&nu, &constraints, &SolverOptions::default());
        assert!(
            matches!(err, Err(Error::Infeasible { .. })),
            "expected infeasibility, got {err:?}"
        );
    }
}
