//! Total-Lagrangian assembly of internal forces and the consistent tangent.

use nalgebra::{DMatrix, DVector};

use super::constitutive::{material_tangent, piola_stress, DeformationState};
use super::{LoadSpec, MaterialParams, Mesh2D};
use crate::error::FemError;

/// Residual and tangent after constraint elimination.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub residual: DVector<f64>,
    pub tangent: DMatrix<f64>,
}

fn check_len(mesh: &Mesh2D, u: &DVector<f64>) -> Result<(), FemError> {
    if u.len() != mesh.dof_count() {
        return Err(FemError::Shape(format!(
            "displacement has {} entries, mesh has {} dofs",
            u.len(),
            mesh.dof_count()
        )));
    }
    Ok(())
}

/// Displacement gradient `∇u` at a quadrature point.
fn element_gradient(conn: &[usize; 4], dn_dx: &[[f64; 2]; 4], u: &DVector<f64>) -> [[f64; 2]; 2] {
    let mut h = [[0.0; 2]; 2];
    for a in 0..4 {
        let ua = [u[2 * conn[a]], u[2 * conn[a] + 1]];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] += ua[i] * dn_dx[a][j];
            }
        }
    }
    h
}

fn tag_element(e: FemError, element: usize) -> FemError {
    match e {
        FemError::InvertedElement { jacobian, .. } => FemError::InvertedElement {
            element: Some(element),
            jacobian,
        },
        other => other,
    }
}

/// Internal nodal forces `∫ P : ∇δu dV` without constraint elimination.
pub fn internal_forces(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    u: &DVector<f64>,
) -> Result<DVector<f64>, FemError> {
    check_len(mesh, u)?;
    let mut fint = DVector::zeros(mesh.dof_count());
    for (ei, conn) in mesh.elements().iter().enumerate() {
        for qp in mesh.quadrature(ei) {
            let h = element_gradient(conn, &qp.dn_dx, u);
            let p = piola_stress(&DeformationState::from_displacement_gradient(h), mat).map_err(|e| tag_element(e, ei))?;
            for a in 0..4 {
                for i in 0..2 {
                    let v = p[i][0] * qp.dn_dx[a][0] + p[i][1] * qp.dn_dx[a][1];
                    fint[2 * conn[a] + i] += v * qp.weight;
                }
            }
        }
    }
    Ok(fint)
}

/// Internal forces and the unconstrained tangent stiffness.
pub fn internal_forces_and_tangent(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), FemError> {
    check_len(mesh, u)?;
    let n = mesh.dof_count();
    let mut fint = DVector::zeros(n);
    let mut k = DMatrix::zeros(n, n);
    for (ei, conn) in mesh.elements().iter().enumerate() {
        let mut ke = [[0.0; 8]; 8];
        let mut fe = [0.0; 8];
        for qp in mesh.quadrature(ei) {
            let h = element_gradient(conn, &qp.dn_dx, u);
            let state = DeformationState::from_displacement_gradient(h);
            let p = piola_stress(&state, mat).map_err(|e| tag_element(e, ei))?;
            let a4 = material_tangent(&state, mat).map_err(|e| tag_element(e, ei))?;
            let w = qp.weight;
            for a in 0..4 {
                let ga = qp.dn_dx[a];
                for i in 0..2 {
                    fe[2 * a + i] += (p[i][0] * ga[0] + p[i][1] * ga[1]) * w;
                    for b in 0..4 {
                        let gb = qp.dn_dx[b];
                        for kk in 0..2 {
                            let mut s = 0.0;
                            for jj in 0..2 {
                                for l in 0..2 {
                                    s += ga[jj] * a4[i][jj][kk][l] * gb[l];
                                }
                            }
                            ke[2 * a + i][2 * b + kk] += s * w;
                        }
                    }
                }
            }
        }
        for a in 0..4 {
            for i in 0..2 {
                let r = 2 * conn[a] + i;
                fint[r] += fe[2 * a + i];
                for b in 0..4 {
                    for kk in 0..2 {
                        k[(r, 2 * conn[b] + kk)] += ke[2 * a + i][2 * b + kk];
                    }
                }
            }
        }
    }
    Ok((fint, k))
}

/// External force vector at full load (load factor one).
pub fn external_force(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    load: &LoadSpec,
) -> Result<DVector<f64>, FemError> {
    let mut fext = DVector::zeros(mesh.dof_count());
    match *load {
        LoadSpec::PointLoad { fx, fy, d } => {
            if fx == 0.0 && fy == 0.0 {
                return Ok(fext);
            }
            let node = mesh.snap_to_edge(d)?.node;
            fext[2 * node] += fx;
            fext[2 * node + 1] += fy;
        }
        LoadSpec::BodyForce { bx, by } => {
            for (ei, conn) in mesh.elements().iter().enumerate() {
                for qp in mesh.quadrature(ei) {
                    for a in 0..4 {
                        let s = mat.density * qp.n[a] * qp.weight;
                        fext[2 * conn[a]] += s * bx;
                        fext[2 * conn[a] + 1] += s * by;
                    }
                }
            }
        }
    }
    Ok(fext)
}

/// Zeroes constrained entries of a nodal vector.
pub fn apply_constraints_vec(mesh: &Mesh2D, v: &mut DVector<f64>) {
    for &d in mesh.fixed_dofs() {
        v[d] = 0.0;
    }
}

/// Row/column elimination with unit diagonal.
pub fn apply_constraints_mat(mesh: &Mesh2D, k: &mut DMatrix<f64>) {
    for &d in mesh.fixed_dofs() {
        k.row_mut(d).fill(0.0);
        k.column_mut(d).fill(0.0);
        k[(d, d)] = 1.0;
    }
}

/// Residual `f_int(u) − load_factor · f_ext` and its exact derivative, with
/// constrained dofs eliminated.
pub fn assemble(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    u: &DVector<f64>,
    load: &LoadSpec,
    load_factor: f64,
) -> Result<Assembly, FemError> {
    if !(0.0..=1.0).contains(&load_factor) {
        return Err(FemError::InvalidLoad(format!("load factor {load_factor} outside [0, 1]")));
    }
    let fext = external_force(mesh, mat, load)?;
    assemble_with_external(mesh, mat, u, &fext, load_factor)
}

pub(crate) fn assemble_with_external(
    mesh: &Mesh2D,
    mat: &MaterialParams,
    u: &DVector<f64>,
    fext: &DVector<f64>,
    load_factor: f64,
) -> Result<Assembly, FemError> {
    let (fint, mut tangent) = internal_forces_and_tangent(mesh, mat, u)?;
    let mut residual = fint - fext * load_factor;
    apply_constraints_vec(mesh, &mut residual);
    apply_constraints_mat(mesh, &mut tangent);
    Ok(Assembly { residual, tangent })
}
