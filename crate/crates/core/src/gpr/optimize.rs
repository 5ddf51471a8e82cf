//! Box-constrained BFGS with a backtracking Armijo line search.

/// Objective to minimise; `None` marks an infeasible point.
pub trait Objective {
    fn value_and_gradient(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl<F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>> Objective for F {
    fn value_and_gradient(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self(x)
    }
}

/// Relative step below which the line search gives up.
const MIN_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-7,
            f_tol: 1e-13,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// Gradient with components pointing out of the active bounds removed.
fn projected(g: &[f64], x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(i, &gi)| {
            if (x[i] <= lower[i] && gi > 0.0) || (x[i] >= upper[i] && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Minimises `f` from `x0` inside `[lower, upper]`. Returns `None` if `x0` is infeasible.
pub fn minimize<O: Objective>(
    f: &mut O,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BfgsOptions,
) -> Option<Minimum> {
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut h = identity(n);
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        let pg = projected(&g, &x, lower, upper);
        if pg.iter().all(|v| v.abs() <= opts.grad_tol) {
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i], &pg)).collect();
        if dot(&p, &pg) >= 0.0 {
            h = identity(n);
            p = pg.iter().map(|v| -v).collect();
        }
        let norm = dot(&p, &p).sqrt();
        if norm > opts.max_step {
            p.iter_mut().for_each(|v| *v *= opts.max_step / norm);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] + t * p[i]).collect();
            clamp(&mut xn, lower, upper);
            let step: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
            if step.iter().zip(&x).all(|(s, xi)| s.abs() <= MIN_STEP * (1.0 + xi.abs())) {
                break;
            }
            if let Some((fn_, gn)) = f.value_and_gradient(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * dot(&g, &step) {
                    accepted = Some((xn, fn_, gn, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            bfgs_update(&mut h, &s, &y, sy);
        }
        let done = (fx - fn_).abs() <= opts.f_tol * (1.0 + fx.abs());
        x = xn;
        fx = fn_;
        g = gn;
        if done {
            break;
        }
    }
    Some(Minimum {
        gradient: g,
        x,
        value: fx,
        iterations,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Inverse-Hessian update `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
