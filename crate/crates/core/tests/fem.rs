mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{beam_problem, linear_fe_solve, piola_fd_error, tangent_fd_error};
use fieldgp::fem::{
    assemble, external_force, internal_forces, lame_from_engineering, strain_energy, BeamGeometry, DeformationState,
    LoadSpec, MaterialParams, Mesh2D, SolveSettings,
};

fn gradient() -> impl Strategy<Value = [[f64; 2]; 2]> {
    prop::array::uniform4(-0.35f64..0.35)
        .prop_map(|h| [[1.0 + h[0], h[1]], [h[2], 1.0 + h[3]]])
        .prop_filter("admissible", |f| f[0][0] * f[1][1] - f[0][1] * f[1][0] >= 0.3)
}

fn material() -> impl Strategy<Value = MaterialParams> {
    (1.0f64..5000.0, 0.0f64..0.45).prop_map(|(e, nu)| MaterialParams::new(e, nu, 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn piola_is_energy_gradient(f in gradient(), mat in material()) {
        prop_assert!(piola_fd_error(&f, &mat) < 1e-6);
    }

    #[test]
    fn tangent_is_stress_gradient_with_major_symmetry(f in gradient(), mat in material()) {
        let (err, sym) = tangent_fd_error(&f, &mat);
        prop_assert!(err < 1e-5, "rel err {err}");
        prop_assert!(sym <= 1e-12 * (mat.mu + mat.lambda) * 10.0, "symmetry defect {sym}");
    }

    #[test]
    fn energy_is_non_negative(f in gradient(), mat in material()) {
        prop_assert!(strain_energy(&DeformationState::new(f), &mat).unwrap() >= -1e-12 * mat.mu);
    }
}

#[test]
fn lame_parameters_by_hand() {
    let (mu, lambda) = lame_from_engineering(500.0, 0.4).unwrap();
    assert!((mu - 500.0 / 2.8).abs() < 1e-12);
    assert!((lambda - 200.0 / (1.4 * 0.2)).abs() < 1e-10);
    let (mu, lambda) = lame_from_engineering(5000.0, 0.45).unwrap();
    assert!((mu - 5000.0 / 2.9).abs() < 1e-9);
    assert!((lambda - 2250.0 / (1.45 * 0.1)).abs() < 1e-8);
    assert!(lame_from_engineering(1.0, 0.5).is_err());
}

#[test]
fn simple_shear_values() {
    let mat = MaterialParams { mu: 1.0, lambda: 1.0, ..MaterialParams::new(2.5, 0.25, 1.0).unwrap() };
    let f = [[1.0, 0.3], [0.0, 1.0]];
    let w = strain_energy(&DeformationState::new(f), &mat).unwrap();
    assert!((w - 0.045).abs() < 1e-15);
    assert!(piola_fd_error(&f, &mat) < 1e-8);
}

#[test]
fn assembled_tangent_is_symmetric_and_matches_fd() {
    let p = beam_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut u = DVector::from_fn(p.mesh.dof_count(), |_, _| rng.random_range(-0.01..0.01));
    for &d in p.mesh.fixed_dofs() {
        u[d] = 0.0;
    }
    let load = LoadSpec::PointLoad { fx: 0.3, fy: -1.0, d: 1.5 };
    let a = assemble(&p.mesh, &p.material, &u, &load, 0.7).unwrap();
    let k = &a.tangent;
    let asym = (k - k.transpose()).amax();
    assert!(asym <= 1e-10 * k.amax(), "asymmetry {asym}");

    let h = 1e-6;
    let mut worst = 0.0f64;
    for d in (0..p.mesh.dof_count()).filter(|&d| !p.mesh.is_fixed(d)) {
        let mut up = u.clone();
        let mut um = u.clone();
        up[d] += h;
        um[d] -= h;
        let rp = assemble(&p.mesh, &p.material, &up, &load, 0.7).unwrap().residual;
        let rm = assemble(&p.mesh, &p.material, &um, &load, 0.7).unwrap().residual;
        let col = (rp - rm) / (2.0 * h);
        worst = worst.max((col - k.column(d)).norm() / k.column(d).norm());
    }
    assert!(worst < 1e-5, "tangent vs FD {worst}");
}

#[test]
fn rigid_translation_leaves_internal_forces_unchanged() {
    let p = beam_problem();
    let load = LoadSpec::PointLoad { fx: 0.0, fy: -2.0, d: 2.0 };
    let u = p.solve(&load).unwrap().displacement.values;
    let base = internal_forces(&p.mesh, &p.material, &u).unwrap();
    let shifted = DVector::from_fn(u.len(), |i, _| u[i] + if i % 2 == 0 { 0.37 } else { -1.2 });
    let moved = internal_forces(&p.mesh, &p.material, &shifted).unwrap();
    assert!((moved - &base).amax() <= 1e-10 * base.amax().max(1.0));
}

#[test]
fn unloaded_beam_stays_put() {
    let p = beam_problem();
    for load in [LoadSpec::PointLoad { fx: 0.0, fy: 0.0, d: 1.0 }, LoadSpec::BodyForce { bx: 0.0, by: 0.0 }] {
        let s = p.solve(&load).unwrap();
        assert!(s.displacement.values.iter().all(|&v| v == 0.0));
        assert!(s.stats.newton_iterations <= 1);
    }
    let a = assemble(&p.mesh, &p.material, &DVector::zeros(p.mesh.dof_count()), &LoadSpec::zero(fieldgp::LoadKind::PointLoad), 0.0).unwrap();
    assert_eq!(a.residual.amax(), 0.0);
}

fn tip_load(fy: f64) -> LoadSpec {
    LoadSpec::PointLoad { fx: 0.0, fy, d: 2.0 }
}

#[test]
fn small_tip_load_matches_linear_elasticity() {
    let p = beam_problem();
    let load = tip_load(-2.5e-3);
    let u = p.solve(&load).unwrap().displacement.values;
    let fext = external_force(&p.mesh, &p.material, &load).unwrap();
    let lin = linear_fe_solve(&p.mesh, p.material.youngs_modulus, p.material.poisson_ratio, &fext);
    let tip = 2 * p.mesh.loadable_edge().last().unwrap().node + 1;
    let err = (u[tip] - lin[tip]).abs() / lin[tip].abs();
    assert!(err < 0.01, "tip {} vs linear {} ({err})", u[tip], lin[tip]);
    assert!((&u - &lin).amax() < 0.01 * lin.amax());
}

#[test]
fn response_is_linear_for_tiny_loads() {
    let p = beam_problem();
    let a = p.solve(&tip_load(-2.5e-4)).unwrap().displacement.values;
    let b = p.solve(&tip_load(-5e-4)).unwrap().displacement.values;
    let err = (&b - &a * 2.0).amax() / b.amax();
    assert!(err < 0.005, "nonlinearity {err}");
}

#[test]
fn converged_solution_satisfies_equilibrium() {
    let p = beam_problem();
    let load = LoadSpec::PointLoad { fx: 1.5, fy: -2.5, d: 1.25 };
    let s = p.solve(&load).unwrap();
    let u = &s.displacement.values;
    for &d in p.mesh.fixed_dofs() {
        assert_eq!(u[d], 0.0);
    }
    let r = assemble(&p.mesh, &p.material, u, &load, 1.0).unwrap().residual;
    let f = external_force(&p.mesh, &p.material, &load).unwrap();
    assert!(r.norm() < SolveSettings::default().newton_tol * f.norm() * 10.0, "{}", r.norm());
    assert!(s.stats.final_relative_residual < SolveSettings::default().newton_tol);
    assert!(s.displacement.max_nodal() > 0.1, "moderate load bends the beam visibly");
}

#[test]
fn unit_element_body_force_is_lumped_evenly() {
    let mesh = Mesh2D::cantilever(&BeamGeometry { length: 1.0, height: 1.0, elements_x: 1, elements_y: 1 }).unwrap();
    let mat = MaterialParams::new(1.0, 0.0, 1.0).unwrap();
    let f = external_force(&mesh, &mat, &LoadSpec::BodyForce { bx: 0.0, by: -1.0 }).unwrap();
    for n in 0..4 {
        assert_eq!(f[2 * n], 0.0);
        assert!((f[2 * n + 1] + 0.25).abs() < 1e-15);
    }
}
