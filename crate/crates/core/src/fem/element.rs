//! Bilinear quadrilateral with 2x2 Gauss quadrature.

use crate::error::FemError;

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Reference-square Gauss points, all with unit weight.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

/// Corner coordinates of the reference square in counter-clockwise order.
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

pub fn shape_functions(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
    }
    n
}

fn shape_derivatives_ref(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        d[a][0] = 0.25 * c[0] * (1.0 + c[1] * eta);
        d[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi);
    }
    d
}

/// Quadrature data for one Gauss point in the reference configuration.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    /// Shape function values.
    pub n: [f64; 4],
    /// Material gradients dN_a/dX_J.
    pub dn_dx: [[f64; 2]; 4],
    /// det(dX/dξ) times the Gauss weight.
    pub weight: f64,
}

/// Precomputes the four quadrature points of an element from its nodal coordinates.
pub fn quad_points(coords: &[[f64; 2]; 4]) -> Result<[QuadPoint; 4], FemError> {
    let mut out = [QuadPoint {
        n: [0.0; 4],
        dn_dx: [[0.0; 2]; 4],
        weight: 0.0,
    }; 4];
    for (q, gp) in GAUSS_POINTS.iter().enumerate() {
        let d = shape_derivatives_ref(gp[0], gp[1]);
        // jac[i][j] = dX_i / dξ_j
        let mut jac = [[0.0; 2]; 2];
        for a in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    jac[i][j] += coords[a][i] * d[a][j];
                }
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(FemError::InvertedElement {
                element: None,
                jacobian: det,
            });
        }
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        let mut dn_dx = [[0.0; 2]; 4];
        for a in 0..4 {
            for jj in 0..2 {
                dn_dx[a][jj] = d[a][0] * inv[0][jj] + d[a][1] * inv[1][jj];
            }
        }
        out[q] = QuadPoint {
            n: shape_functions(gp[0], gp[1]),
            dn_dx,
            weight: det,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partition_of_unity_and_area() {
        let coords = [[0.0, 0.0], [2.0, 0.0], [2.3, 1.0], [0.1, 1.2]];
        let qps = quad_points(&coords).unwrap();
        let area: f64 = qps.iter().map(|q| q.weight).sum();
        // shoelace
        let shoelace = 0.5
            * (0..4)
                .map(|a| {
                    let b = (a + 1) % 4;
                    coords[a][0] * coords[b][1] - coords[b][0] * coords[a][1]
                })
                .sum::<f64>();
        assert_relative_eq!(area, shoelace, max_relative = 1e-14);
        for q in &qps {
            assert_relative_eq!(q.n.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
            for j in 0..2 {
                let s: f64 = q.dn_dx.iter().map(|d| d[j]).sum();
                assert!(s.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_field_gradient_is_exact() {
        let coords = [[0.0, 0.0], [2.0, 0.0], [2.3, 1.0], [0.1, 1.2]];
        let field = |x: &[f64; 2]| 3.0 * x[0] - 2.0 * x[1] + 1.0;
        for q in quad_points(&coords).unwrap() {
            let mut g = [0.0; 2];
            for a in 0..4 {
                for j in 0..2 {
                    g[j] += field(&coords[a]) * q.dn_dx[a][j];
                }
            }
            assert_relative_eq!(g[0], 3.0, max_relative = 1e-13);
            assert_relative_eq!(g[1], -2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn clockwise_element_is_rejected() {
        let coords = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(quad_points(&coords).is_err());
    }
}
