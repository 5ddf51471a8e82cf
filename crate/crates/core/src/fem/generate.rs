//! Seeded FEM sampling of (load, displacement) pairs.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::{solve_static, LoadKind, LoadSpec, MaterialParams, Mesh2D, SolveSettings};
use crate::dataset::Dataset;
use crate::error::FemError;
use crate::rng::keyed_rng;

/// Attempts per sample before generation is abandoned.
const MAX_ATTEMPTS_PER_SAMPLE: usize = 16;

/// A mesh, its material and Newton controls.
#[derive(Debug, Clone)]
pub struct FemProblem {
    pub mesh: Mesh2D,
    pub material: MaterialParams,
    pub settings: SolveSettings,
}

impl FemProblem {
    pub fn solve(&self, load: &LoadSpec) -> Result<super::Solution, FemError> {
        solve_static(&self.mesh, &self.material, load, &self.settings)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSpec {
    pub kind: LoadKind,
    /// Half-width `a` of the symmetric interval `[-a, a]` for each force component.
    pub force_range: [f64; 2],
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    /// Samples that failed to converge and were redrawn.
    pub failures: usize,
}

/// Draws one load for sample `index` on attempt `attempt`.
pub fn draw_load(mesh: &Mesh2D, spec: &GenerationSpec, index: usize, attempt: usize) -> LoadSpec {
    let mut rng = keyed_rng(spec.seed, &[index as u64, attempt as u64]);
    let mut component = |a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
    let c0 = component(spec.force_range[0]);
    let c1 = component(spec.force_range[1]);
    match spec.kind {
        LoadKind::PointLoad => {
            let edge = mesh.loadable_edge();
            let node = edge[rng.random_range(0..edge.len())];
            LoadSpec::PointLoad { fx: c0, fy: c1, d: node.arc }
        }
        LoadKind::BodyForce => LoadSpec::BodyForce { bx: c0, by: c1 },
    }
}

pub fn generate_dataset(problem: &FemProblem, spec: &GenerationSpec) -> Result<Generated, FemError> {
    if spec.n_samples == 0 {
        return Err(FemError::InvalidLoad("n_samples must be at least 1".into()));
    }
    if spec.force_range.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(FemError::InvalidLoad(format!("invalid force range {:?}", spec.force_range)));
    }
    if spec.kind == LoadKind::PointLoad && problem.mesh.loadable_edge().is_empty() {
        return Err(FemError::InvalidLoad("mesh has no loadable edge".into()));
    }
    problem.settings.validate()?;

    let rows: Vec<Option<(LoadSpec, Vec<f64>, usize)>> = (0..spec.n_samples)
        .into_par_iter()
        .map(|i| {
            (0..MAX_ATTEMPTS_PER_SAMPLE).find_map(|attempt| {
                let load = draw_load(&problem.mesh, spec, i, attempt);
                problem
                    .solve(&load)
                    .ok()
                    .map(|s| (load, s.displacement.values.as_slice().to_vec(), attempt))
            })
        })
        .collect();

    let exhausted = rows.iter().filter(|r| r.is_none()).count();
    let failures: usize = rows
        .iter()
        .map(|r| r.as_ref().map_or(MAX_ATTEMPTS_PER_SAMPLE, |(_, _, a)| *a))
        .sum();
    if exhausted > 0 || failures > spec.n_samples {
        return Err(FemError::TooManyFailures {
            failures,
            requested: spec.n_samples,
        });
    }

    let dim = spec.kind.input_dim();
    let dofs = problem.mesh.dof_count();
    let mut forces = DMatrix::zeros(spec.n_samples, dim);
    let mut displacements = DMatrix::zeros(spec.n_samples, dofs);
    for (i, row) in rows.into_iter().enumerate() {
        let (load, u, _) = row.expect("checked above");
        for (c, v) in load.to_vec().into_iter().enumerate() {
            forces[(i, c)] = v;
        }
        for (c, v) in u.into_iter().enumerate() {
            displacements[(i, c)] = v;
        }
    }
    let dataset = Dataset::new(spec.kind, forces, displacements)
        .map_err(|e| FemError::Shape(e.to_string()))?;
    Ok(Generated { dataset, failures })
}
