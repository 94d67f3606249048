//! Time-ordered propagation `U(t) = T exp(−i ∫ H dt)` for small dense Hamiltonians.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::expm::{expi_hermitian2, mat_exp};
use super::matrix::ComplexMatrix;
use crate::error::{GeoError, Result};

/// Steps per segment used when nothing else is requested.
pub const DEFAULT_STEPS: usize = 2000;

/// Hermiticity tolerance applied to every sampled Hamiltonian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// How a [`TimeGrid`] is subdivided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepPolicy {
    Fixed(usize),
    /// Doubles the step count from `min_steps` until successive propagators
    /// differ by less than `tol` in max norm.
    Adaptive {
        tol: f64,
        min_steps: usize,
        max_steps: usize,
    },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Fixed(DEFAULT_STEPS)
    }
}

/// Single-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Integrator {
    /// Exponential midpoint, second order.
    #[default]
    Midpoint,
    /// Two-exponential commutator-free Magnus scheme, fourth order.
    Magnus4,
}

impl Integrator {
    pub fn order(self) -> u32 {
        match self {
            Integrator::Midpoint => 2,
            Integrator::Magnus4 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub policy: StepPolicy,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, policy: StepPolicy) -> Result<Self> {
        let g = Self {
            t_start,
            t_end,
            policy,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn fixed(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        Self::new(t_start, t_end, StepPolicy::Fixed(steps))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(GeoError::Domain(format!(
                "time grid needs t_end > t_start, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        match self.policy {
            StepPolicy::Fixed(0) => Err(GeoError::Domain("step count must be >= 1".into())),
            StepPolicy::Adaptive {
                tol,
                min_steps,
                max_steps,
            } if tol <= 0.0 || min_steps == 0 || max_steps < min_steps => Err(GeoError::Domain(
                "adaptive policy needs tol > 0 and 1 <= min_steps <= max_steps".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Propagator options beyond the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub integrator: Integrator,
    /// Combine step counts `n` and `2n` by Richardson extrapolation.
    pub richardson: bool,
}

/// Time-ordered propagator over `grid` using the exponential midpoint rule.
pub fn propagate<F>(sampler: F, grid: &TimeGrid) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    propagate_with(sampler, grid, PropagateOptions::default())
}

pub fn propagate_with<F>(sampler: F, grid: &TimeGrid, opts: PropagateOptions) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    grid.validate()?;
    let run = |n: usize| -> Result<ComplexMatrix> {
        if opts.richardson {
            let coarse = fixed_steps(&sampler, grid, n, opts.integrator, &mut |_, _| {})?;
            let fine = fixed_steps(&sampler, grid, 2 * n, opts.integrator, &mut |_, _| {})?;
            let p = opts.integrator.order() as i32;
            let w = 2f64.powi(p);
            Ok((&fine.scale_re(w) - &coarse).scale_re(1.0 / (w - 1.0)))
        } else {
            fixed_steps(&sampler, grid, n, opts.integrator, &mut |_, _| {})
        }
    };
    match grid.policy {
        StepPolicy::Fixed(n) => run(n),
        StepPolicy::Adaptive {
            tol,
            min_steps,
            max_steps,
        } => {
            let mut n = min_steps;
            let mut prev = run(n)?;
            loop {
                let next_n = n * 2;
                if next_n > max_steps {
                    return Err(GeoError::Convergence(format!(
                        "propagator did not converge to {tol:e} within {max_steps} steps"
                    )));
                }
                let next = run(next_n)?;
                if (&next - &prev).max_norm() < tol {
                    return Ok(next);
                }
                prev = next;
                n = next_n;
            }
        }
    }
}

/// Fixed-step propagation that reports `(t, U(t))` after every step.
pub fn propagate_observed<F, O>(
    sampler: F,
    grid: &TimeGrid,
    integrator: Integrator,
    mut observer: O,
) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
    O: FnMut(f64, &ComplexMatrix),
{
    grid.validate()?;
    let n = match grid.policy {
        StepPolicy::Fixed(n) => n,
        StepPolicy::Adaptive { max_steps, .. } => max_steps,
    };
    fixed_steps(&sampler, grid, n, integrator, &mut observer)
}

fn sample_checked<F>(sampler: &F, t: f64) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    let h = sampler(t)?;
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL * (1.0 + h.max_norm()) {
        return Err(GeoError::Model(format!(
            "Hamiltonian sample at t = {t} is not Hermitian (defect {defect:e})"
        )));
    }
    Ok(h)
}

fn step_exp(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    if h.dim() == 2 {
        Ok(expi_hermitian2(h, dt))
    } else {
        mat_exp(&h.scale(C64::new(0.0, -dt)))
    }
}

fn fixed_steps<F, O>(
    sampler: &F,
    grid: &TimeGrid,
    n: usize,
    integrator: Integrator,
    observer: &mut O,
) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
    O: FnMut(f64, &ComplexMatrix),
{
    let dt = grid.duration() / n as f64;
    let first = sample_checked(sampler, grid.t_start + 0.5 * dt)?;
    let mut u = ComplexMatrix::identity(first.dim());
    let sq3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - sq3 / 6.0, 0.5 + sq3 / 6.0);
    let (a1, a2) = ((3.0 - 2.0 * sq3) / 12.0, (3.0 + 2.0 * sq3) / 12.0);
    for k in 0..n {
        let t0 = grid.t_start + k as f64 * dt;
        let step = match integrator {
            Integrator::Midpoint => {
                let h = if k == 0 {
                    first.clone()
                } else {
                    sample_checked(sampler, t0 + 0.5 * dt)?
                };
                step_exp(&h, dt)?
            }
            Integrator::Magnus4 => {
                let h1 = sample_checked(sampler, t0 + c1 * dt)?;
                let h2 = sample_checked(sampler, t0 + c2 * dt)?;
                let first_half = &h1.scale_re(2.0 * a2) + &h2.scale_re(2.0 * a1);
                let second_half = &h1.scale_re(2.0 * a1) + &h2.scale_re(2.0 * a2);
                let e1 = step_exp(&first_half, 0.5 * dt)?;
                let e2 = step_exp(&second_half, 0.5 * dt)?;
                e2.matmul(&e1)
            }
        };
        u = step.matmul(&u);
        observer(t0 + dt, &u);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::matrix::pauli;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_hamiltonian_matches_exponential() {
        let h = ComplexMatrix::mat2(c(0.3, 0.0), c(0.5, -0.2), c(0.5, 0.2), c(-0.1, 0.0));
        let tau = 2.7;
        let grid = TimeGrid::fixed(0.0, tau, 10).unwrap();
        let u = propagate(|_| Ok(h.clone()), &grid).unwrap();
        let want = mat_exp(&h.scale(c(0.0, -tau))).unwrap();
        assert!((&u - &want).max_norm() < 1e-13);
    }

    #[test]
    fn non_hermitian_sample_is_model_error() {
        let bad = ComplexMatrix::mat2(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let grid = TimeGrid::fixed(0.0, 1.0, 4).unwrap();
        assert!(matches!(propagate(|_| Ok(bad.clone()), &grid), Err(GeoError::Model(_))));
    }

    #[test]
    fn adaptive_cap_is_convergence_error() {
        // rapidly varying field cannot converge to 1e-14 within 16 steps
        let grid = TimeGrid::new(
            0.0,
            10.0,
            StepPolicy::Adaptive {
                tol: 1e-14,
                min_steps: 4,
                max_steps: 16,
            },
        )
        .unwrap();
        let r = propagate(|t| Ok(pauli::x().scale_re((5.0 * t).cos())), &grid);
        assert!(matches!(r, Err(GeoError::Convergence(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::fixed(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::fixed(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn magnus_beats_midpoint_on_chirp() {
        let sampler = |t: f64| Ok(&pauli::x().scale_re(t.sin()) + &pauli::z().scale_re(0.5 * t));
        let reference = propagate_with(
            sampler,
            &TimeGrid::fixed(0.0, 3.0, 4000).unwrap(),
            PropagateOptions {
                integrator: Integrator::Magnus4,
                richardson: false,
            },
        )
        .unwrap();
        let grid = TimeGrid::fixed(0.0, 3.0, 50).unwrap();
        let mid = propagate(sampler, &grid).unwrap();
        let mag = propagate_with(
            sampler,
            &grid,
            PropagateOptions {
                integrator: Integrator::Magnus4,
                richardson: false,
            },
        )
        .unwrap();
        assert!((&mag - &reference).max_norm() < (&mid - &reference).max_norm() / 10.0);
    }
}
