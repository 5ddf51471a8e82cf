use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::LoadKind;

/// Paired load vectors and full-field displacements, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: LoadKind,
    /// `n_samples × D`.
    pub forces: DMatrix<f64>,
    /// `n_samples × dof_count`.
    pub displacements: DMatrix<f64>,
}

impl Dataset {
    pub fn new(kind: LoadKind, forces: DMatrix<f64>, displacements: DMatrix<f64>) -> Result<Self> {
        if forces.nrows() != displacements.nrows() {
            return Err(Error::Shape(format!(
                "{} force rows vs {} displacement rows",
                forces.nrows(),
                displacements.nrows()
            )));
        }
        if forces.ncols() != kind.input_dim() {
            return Err(Error::Shape(format!(
                "{} loads have {} components, got {}",
                kind.as_str(),
                kind.input_dim(),
                forces.ncols()
            )));
        }
        Ok(Self {
            kind,
            forces,
            displacements,
        })
    }

    pub fn empty(kind: LoadKind, field_dim: usize) -> Self {
        Self {
            kind,
            forces: DMatrix::zeros(0, kind.input_dim()),
            displacements: DMatrix::zeros(0, field_dim),
        }
    }

    pub fn len(&self) -> usize {
        self.forces.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.forces.ncols()
    }

    pub fn field_dim(&self) -> usize {
        self.displacements.ncols()
    }

    pub fn force(&self, i: usize) -> Vec<f64> {
        self.forces.row(i).iter().copied().collect()
    }

    pub fn displacement(&self, i: usize) -> DVector<f64> {
        self.displacements.row(i).transpose()
    }

    /// Rows in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            forces: self.forces.select_rows(indices),
            displacements: self.displacements.select_rows(indices),
        }
    }

    /// First `n` rows and the remainder.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    /// Displacements as columns (`dof_count × n_samples`).
    pub fn displacement_columns(&self) -> DMatrix<f64> {
        self.displacements.transpose()
    }

    /// Largest nodal displacement magnitude over all samples.
    pub fn max_nodal_displacement(&self) -> f64 {
        (0..self.len())
            .map(|i| crate::fem::max_nodal_displacement(self.displacement(i).as_slice()))
            .fold(0.0, f64::max)
    }
}
