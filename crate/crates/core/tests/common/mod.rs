//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fieldgp::autoencoder::{encode_dataset, Activation, AutoencoderModel, AutoencoderSpec, DenseLayer};

use fieldgp::fem::{
    material_tangent, piola_stress, strain_energy, BeamGeometry, DeformationState, FemProblem, MaterialParams,
    Mesh2D, SolveSettings, Tensor2,
};
use fieldgp::gpr::{GPModel, Hyperparams, LatentGPBundle};
use fieldgp::surrogate::{McConfig, SurrogateModel};
use fieldgp::{Dataset, LoadKind};

pub fn beam_problem() -> FemProblem {
    FemProblem {
        mesh: Mesh2D::cantilever(&BeamGeometry::default()).unwrap(),
        material: MaterialParams::beam_default(),
        settings: SolveSettings::default(),
    }
}

/// `F = I + H` with `H` entries in `[-0.35, 0.35]` and `J ≥ 0.3`.
pub fn random_gradient<R: Rng>(rng: &mut R) -> Tensor2 {
    loop {
        let mut f = [[0.0; 2]; 2];
        for (i, row) in f.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 1.0 } else { 0.0 } + rng.random_range(-0.35..0.35);
            }
        }
        if f[0][0] * f[1][1] - f[0][1] * f[1][0] >= 0.3 {
            return f;
        }
    }
}

fn perturbed(f: &Tensor2, i: usize, j: usize, h: f64) -> DeformationState {
    let mut g = *f;
    g[i][j] += h;
    DeformationState::new(g)
}

fn norm2(t: &Tensor2) -> f64 {
    t.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative Frobenius error between `P` and central differences of `W`.
pub fn piola_fd_error(f: &Tensor2, mat: &MaterialParams) -> f64 {
    let h = 1e-6;
    let p = piola_stress(&DeformationState::new(*f), mat).unwrap();
    let mut diff = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let wp = strain_energy(&perturbed(f, i, j, h), mat).unwrap();
            let wm = strain_energy(&perturbed(f, i, j, -h), mat).unwrap();
            diff[i][j] = p[i][j] - (wp - wm) / (2.0 * h);
        }
    }
    norm2(&diff) / norm2(&p).max(mat.mu)
}

/// Relative error between the tangent and central differences of `P`, and
/// the largest major-symmetry defect.
pub fn tangent_fd_error(f: &Tensor2, mat: &MaterialParams) -> (f64, f64) {
    let h = 1e-6;
    let a = material_tangent(&DeformationState::new(*f), mat).unwrap();
    let (mut num, mut den, mut sym) = (0.0, 0.0, 0.0f64);
    for k in 0..2 {
        for l in 0..2 {
            let pp = piola_stress(&perturbed(f, k, l, h), mat).unwrap();
            let pm = piola_stress(&perturbed(f, k, l, -h), mat).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (pp[i][j] - pm[i][j]) / (2.0 * h);
                    num += (a[i][j][k][l] - fd).powi(2);
                    den += fd * fd;
                    sym = sym.max((a[i][j][k][l] - a[k][l][i][j]).abs());
                }
            }
        }
    }
    (num.sqrt() / den.sqrt(), sym)
}

/// Small-strain plane-strain stiffness of bilinear quads with 2x2 Gauss
/// quadrature, including every dof.
pub fn linear_stiffness(mesh: &Mesh2D, e: f64, nu: f64) -> DMatrix<f64> {
    let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let d = [[c * (1.0 - nu), c * nu, 0.0], [c * nu, c * (1.0 - nu), 0.0], [0.0, 0.0, c * (1.0 - 2.0 * nu) / 2.0]];
    let g = 1.0 / 3f64.sqrt();
    let xi_n = [-1.0, 1.0, 1.0, -1.0];
    let eta_n = [-1.0, -1.0, 1.0, 1.0];
    let n = mesh.dof_count();
    let mut k = DMatrix::zeros(n, n);
    for conn in mesh.elements() {
        let xy: Vec<[f64; 2]> = conn.iter().map(|&a| mesh.node_coords()[a]).collect();
        for (xi, eta) in [(-g, -g), (g, -g), (g, g), (-g, g)] {
            let dxi: Vec<f64> = (0..4).map(|a| 0.25 * xi_n[a] * (1.0 + eta_n[a] * eta)).collect();
            let deta: Vec<f64> = (0..4).map(|a| 0.25 * eta_n[a] * (1.0 + xi_n[a] * xi)).collect();
            let (mut j11, mut j12, mut j21, mut j22) = (0.0, 0.0, 0.0, 0.0);
            for a in 0..4 {
                j11 += dxi[a] * xy[a][0];
                j12 += dxi[a] * xy[a][1];
                j21 += deta[a] * xy[a][0];
                j22 += deta[a] * xy[a][1];
            }
            let det = j11 * j22 - j12 * j21;
            let mut b = [[0.0; 8]; 3];
            for a in 0..4 {
                let dx = (j22 * dxi[a] - j12 * deta[a]) / det;
                let dy = (-j21 * dxi[a] + j11 * deta[a]) / det;
                b[0][2 * a] = dx;
                b[1][2 * a + 1] = dy;
                b[2][2 * a] = dy;
                b[2][2 * a + 1] = dx;
            }
            for p in 0..8 {
                for q in 0..8 {
                    let mut s = 0.0;
                    for r in 0..3 {
                        for t in 0..3 {
                            s += b[r][p] * d[r][t] * b[t][q];
                        }
                    }
                    let (gp, gq) = (2 * conn[p / 2] + p % 2, 2 * conn[q / 2] + q % 2);
                    k[(gp, gq)] += s * det;
                }
            }
        }
    }
    k
}

/// Linear-elastic displacement under nodal forces, fixed dofs removed by
/// deleting their rows and columns.
pub fn linear_fe_solve(mesh: &Mesh2D, e: f64, nu: f64, fext: &DVector<f64>) -> DVector<f64> {
    let k = linear_stiffness(mesh, e, nu);
    let free: Vec<usize> = (0..mesh.dof_count()).filter(|d| !mesh.fixed_dofs().contains(d)).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let ff = DVector::from_fn(free.len(), |i, _| fext[free[i]]);
    let uf = kf.lu().solve(&ff).expect("stiffness is nonsingular");
    let mut u = DVector::zeros(mesh.dof_count());
    for (i, &d) in free.iter().enumerate() {
        u[d] = uf[i];
    }
    u
}

pub fn matern52_reference(r: f64, variance: f64, length: f64) -> f64 {
    let a = 5f64.sqrt() * r / length;
    variance * (1.0 + a + a * a / 3.0) * (-a).exp()
}

/// GP quantities from an explicit (refined) inverse and LU determinant.
pub struct DenseGp {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub hp: Hyperparams,
    pub kinv: DMatrix<f64>,
    pub lml: f64,
}

fn row_distance(a: &DMatrix<f64>, i: usize, b: &[f64]) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[c]).powi(2)).sum::<f64>().sqrt()
}

impl DenseGp {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, hp: Hyperparams) -> Self {
        let n = x.nrows();
        let k = DMatrix::from_fn(n, n, |i, j| {
            let xj: Vec<f64> = x.row(j).iter().copied().collect();
            matern52_reference(row_distance(x, i, &xj), hp.variance, hp.length_scale) + if i == j { hp.noise } else { 0.0 }
        });
        let x0 = k.clone().try_inverse().expect("invertible");
        // One Newton-Schulz step X(2I − KX) restores the digits lost to conditioning.
        let kinv = &x0 * (DMatrix::identity(n, n) * 2.0 - &k * &x0);
        let det = k.determinant();
        let quad = (y.transpose() * &kinv * y)[(0, 0)];
        let lml = -0.5 * quad - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Self { x: x.clone(), y: y.clone(), hp, kinv, lml }
    }

    pub fn predict(&self, xs: &[f64]) -> (f64, f64) {
        let ks = DVector::from_fn(self.x.nrows(), |i, _| {
            matern52_reference(row_distance(&self.x, i, xs), self.hp.variance, self.hp.length_scale)
        });
        let mean = (ks.transpose() * &self.kinv * &self.y)[(0, 0)];
        let var = self.hp.variance - (ks.transpose() * &self.kinv * &ks)[(0, 0)];
        (mean, var)
    }
}

/// Population mean and standard deviation.
pub fn population_stats(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `n × d` inputs uniform in `[-2, 2]` spaced apart by at least 0.05.
pub fn random_inputs<R: Rng>(rng: &mut R, n: usize, d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, d);
    let mut i = 0;
    while i < n {
        let cand: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        if (0..i).all(|k| row_distance(&x, k, &cand) > 0.05) {
            for (c, v) in cand.into_iter().enumerate() {
                x[(i, c)] = v;
            }
            i += 1;
        }
    }
    x
}

pub fn random_hyperparams<R: Rng>(rng: &mut R) -> Hyperparams {
    Hyperparams {
        variance: rng.random_range(0.5..2.0),
        length_scale: rng.random_range(0.4..2.0),
        noise: 10f64.powf(rng.random_range(-3.0..-1.0)),
    }
}

/// Random autoencoder with GPs fitted at fixed hyperparameters on its latents.
pub fn mock_model() -> (SurrogateModel, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ae = AutoencoderModel::init(AutoencoderSpec::new(8, vec![6], 2), &mut rng).unwrap();
    let forces = DMatrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
    let fields = DMatrix::from_fn(20, 8, |i, j| (forces[(i, 0)] * (j + 1) as f64).sin() + forces[(i, 1)] * 0.1 * j as f64);
    let ds = Dataset::new(LoadKind::PointLoad, forces, fields).unwrap();
    let lat = encode_dataset(&ae, &ds).unwrap();
    let hp = Hyperparams { variance: 1.0, length_scale: 0.8, noise: 1e-3 };
    let gps = (0..2)
        .map(|c| GPModel::from_hyperparams(lat.forces.clone(), lat.latents.column(c).into_owned(), hp).unwrap())
        .collect();
    let model = SurrogateModel::new(ae, LatentGPBundle::new(gps).unwrap(), McConfig { sample_count: 50, mc_seed: 3 }).unwrap();
    (model, ds)
}

/// Random GP problem with N ≤ 10 inputs in D ≤ 3 dimensions.
pub fn gp_problem(seed: u64) -> (DMatrix<f64>, DVector<f64>, Hyperparams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=10);
    let d = rng.random_range(1..=3);
    let x = random_inputs(&mut rng, n, d);
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    (x, y, random_hyperparams(&mut rng))
}

/// Smallest |pre-activation| over every ReLU unit for the batch.
fn kink_margin(model: &AutoencoderModel, x: &DMatrix<f64>) -> f64 {
    let mut margin = f64::INFINITY;
    let mut h = x.clone();
    let mut visit = |layer: &DenseLayer, h: &mut DMatrix<f64>| {
        let z = layer.pre_activation(h);
        if layer.activation == Activation::Relu {
            margin = margin.min(z.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min));
        }
        z.map(|v| if layer.activation == Activation::Relu { v.max(0.0) } else { v })
    };
    for b in &model.encoder_blocks {
        let a = visit(&b.layer_a, &mut h);
        let c = visit(&b.layer_b, &mut a.clone());
        h = a + c;
    }
    h = visit(&model.latent_layer, &mut h);
    for b in &model.decoder_blocks {
        let a = visit(&b.layer_a, &mut h);
        let c = visit(&b.layer_b, &mut a.clone());
        h = a + c;
    }
    margin
}

/// Relative error of backprop against central differences on a 6-4-2-4-6 net
/// whose pre-activations stay away from the ReLU kink.
pub fn toy_gradient_error() -> f64 {
    let spec = AutoencoderSpec::new(6, vec![4], 2);
    let (mut model, x) = (0..1000)
        .find_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = AutoencoderModel::init(spec.clone(), &mut rng).unwrap();
            for l in m.layers_mut() {
                l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
            }
            let x = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
            (kink_margin(&m, &x) > 1e-3).then_some((m, x))
        })
        .expect("some seed stays away from kinks");

    let (_, grads) = model.backprop(&x).unwrap();
    let h = 1e-6;
    let (mut num, mut den) = (0.0, 0.0);
    let n_layers = model.layers().len();
    for li in 0..n_layers {
        let n_w = model.layers()[li].weights.len();
        let n_b = model.layers()[li].bias.len();
        for k in 0..n_w + n_b {
            let fd = {
                let mut eval = |delta: f64| {
                    let layer = &mut model.layers_mut()[li];
                    let slot = if k < n_w { &mut layer.weights.as_mut_slice()[k] } else { &mut layer.bias[k - n_w] };
                    *slot += delta;
                    let l = model.mse_loss(&x).unwrap();
                    let layer = &mut model.layers_mut()[li];
                    let slot = if k < n_w { &mut layer.weights.as_mut_slice()[k] } else { &mut layer.bias[k - n_w] };
                    *slot -= delta;
                    l
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            };
            let g = if k < n_w { grads.layers[li].weights.as_slice()[k] } else { grads.layers[li].bias[k - n_w] };
            num += (g - fd).powi(2);
            den += fd * fd;
        }
    }
    (num / den).sqrt()
}
