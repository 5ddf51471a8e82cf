//! Incremental Newton-Raphson with adaptive step halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::assembly::{assemble_with_external, external_force};
use super::{LoadSpec, MaterialParams, Mesh2D};
use crate::error::FemError;

/// Newton controls. Quadrature is always the 2x2 Gauss rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub load_increments: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub max_step_halvings: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            load_increments: 10,
            newton_tol: 1e-10,
            max_newton_iters: 25,
            max_step_halvings: 8,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<(), FemError> {
        if self.load_increments == 0 || !(self.newton_tol > 0.0) || self.max_newton_iters == 0 {
            return Err(FemError::InvalidLoad(format!("invalid solve settings {self:?}")));
        }
        Ok(())
    }
}

/// Linear solve inside the Newton loop.
pub trait LinearSolver {
    fn solve(&self, matrix: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>>;
}

/// Dense Cholesky, falling back to partial-pivot LU when the tangent loses
/// positive definiteness.
#[derive(Debug, Default, Clone, Copy)]
pub struct DenseSolver;

impl LinearSolver for DenseSolver {
    fn solve(&self, matrix: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match matrix.clone().cholesky() {
            Some(ch) => Some(ch.solve(rhs)),
            None => matrix.lu().solve(rhs),
        }
    }
}

/// Nodal displacements `(u_x0, u_y0, u_x1, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub values: DVector<f64>,
}

impl DisplacementField {
    pub fn zeros(dof_count: usize) -> Self {
        Self {
            values: DVector::zeros(dof_count),
        }
    }

    /// Largest nodal displacement magnitude.
    pub fn max_nodal(&self) -> f64 {
        max_nodal_displacement(self.values.as_slice())
    }
}

pub fn max_nodal_displacement(values: &[f64]) -> f64 {
    values
        .chunks_exact(2)
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub newton_iterations: usize,
    pub increments: usize,
    pub halvings: usize,
    pub final_relative_residual: f64,
    /// Residual norms of the Newton iterates in the last load increment.
    pub last_increment_residuals: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub displacement: DisplacementField,
    pub stats: SolveStats,
}

enum StepFailure {
    Stalled,
    Inverted(FemError),
}

#[allow(clippy::too_many_arguments)]
fn newton(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    fext: &DVector<f64>,
    load_factor: f64,
    u: &mut DVector<f64>,
    settings: &SolveSettings,
    solver: &dyn LinearSolver,
    history: &mut Vec<f64>,
) -> Result<(usize, f64), StepFailure> {
    history.clear();
    let reference = (fext * load_factor).norm();
    for it in 1..=settings.max_newton_iters {
        let asm = match assemble_with_external(mesh, mat, u, fext, load_factor) {
            Ok(a) => a,
            Err(e @ FemError::InvertedElement { .. }) => return Err(StepFailure::Inverted(e)),
            Err(_) => return Err(StepFailure::Stalled),
        };
        let norm = asm.residual.norm();
        history.push(norm);
        if !norm.is_finite() {
            return Err(StepFailure::Stalled);
        }
        let converged = if reference > 0.0 {
            norm <= settings.newton_tol * reference
        } else {
            norm == 0.0
        };
        if converged {
            let rel = if reference > 0.0 { norm / reference } else { 0.0 };
            return Ok((it, rel));
        }
        let du = solver.solve(asm.tangent, &(-asm.residual)).ok_or(StepFailure::Stalled)?;
        *u += du;
    }
    Err(StepFailure::Stalled)
}

/// Solves the static equilibrium problem at full load.
pub fn solve_static(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    load: &LoadSpec,
    settings: &SolveSettings,
) -> Result<Solution, FemError> {
    solve_static_with(mesh, mat, load, settings, &DenseSolver)
}

pub fn solve_static_with(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    load: &LoadSpec,
    settings: &SolveSettings,
    solver: &dyn LinearSolver,
) -> Result<Solution, FemError> {
    settings.validate()?;
    let fext = external_force(mesh, mat, load)?;
    let mut stats = SolveStats::default();
    let mut u = DVector::zeros(mesh.dof_count());
    let mut history = Vec::new();

    if fext.iter().all(|&v| v == 0.0) {
        let (it, rel) = newton(mesh, mat, &fext, 0.0, &mut u, settings, solver, &mut history)
            .map_err(|_| FemError::NonConvergence { load_factor: 0.0 })?;
        stats.newton_iterations = it;
        stats.final_relative_residual = rel;
        stats.last_increment_residuals = history;
        return Ok(Solution {
            displacement: DisplacementField { values: u },
            stats,
        });
    }

    let mut load_factor = 0.0;
    let mut step = 1.0 / settings.load_increments as f64;
    while load_factor < 1.0 {
        let target = if load_factor + step >= 1.0 - 1e-12 { 1.0 } else { load_factor + step };
        let mut trial = u.clone();
        match newton(mesh, mat, &fext, target, &mut trial, settings, solver, &mut history) {
            Ok((it, rel)) => {
                u = trial;
                load_factor = target;
                stats.newton_iterations += it;
                stats.increments += 1;
                stats.final_relative_residual = rel;
            }
            Err(failure) => {
                stats.halvings += 1;
                if stats.halvings > settings.max_step_halvings {
                    return Err(match failure {
                        StepFailure::Inverted(e) => e,
                        StepFailure::Stalled => FemError::NonConvergence { load_factor },
                    });
                }
                step *= 0.5;
            }
        }
    }
    stats.last_increment_residuals = history;
    Ok(Solution {
        displacement: DisplacementField { values: u },
        stats,
    })
}
