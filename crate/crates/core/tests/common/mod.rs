//! Independent oracles shared by the test targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Matrix3x2, Vector2, Vector3};
use parking_scvx::discretization::{discretize_foh, discretize_with, FohConfig};
use parking_scvx::vehicle::{Dynamics, Linearization};
use parking_scvx::{CarControl, CarState, ModelParams, SegmentTrajectory};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `dx/dtau = sigma (A x + B u)`.
pub struct Lti {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
}

impl Dynamics for Lti {
    fn derivative(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Vector3<f64> {
        (self.a * x + self.b * u) * sigma
    }

    fn linearize(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Linearization {
        let s = self.a * x + self.b * u;
        Linearization { a: self.a * sigma, b: self.b * sigma, s, w: -s * sigma }
    }
}

/// Exact FOH interval map from the exponential of the augmented generator
/// over `[x, u, du/dtau]`. Returns `(Ad, E12, E13)` so that
/// `x+ = Ad x + E12 u_k + E13 (u_k+1 - u_k) / h`, plus the same blocks of
/// the sigma-derivative via the block upper-triangular trick.
pub fn exact_foh(sys: &Lti, sigma: f64, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let gen = |scale: f64| {
        let mut m = DMatrix::<f64>::zeros(7, 7);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = scale * sys.a[(i, j)];
            }
            for j in 0..2 {
                m[(i, 3 + j)] = scale * sys.b[(i, j)];
            }
        }
        m
    };
    let mut m = gen(sigma);
    for j in 0..2 {
        m[(3 + j, 5 + j)] = 1.0;
    }
    let e = (&m * h).exp();
    let mut big = DMatrix::<f64>::zeros(14, 14);
    big.view_mut((0, 0), (7, 7)).copy_from(&m);
    big.view_mut((7, 7), (7, 7)).copy_from(&m);
    big.view_mut((0, 7), (7, 7)).copy_from(&gen(1.0));
    let de = (big * h).exp().view((0, 7), (7, 7)).into_owned();
    (e, de)
}

/// Classical RK4 on the car with FOH controls, many fine steps.
pub fn fine_integrate(model: &ModelParams, x0: Vector3<f64>, u0: Vector2<f64>, u1: Vector2<f64>, sigma: f64, h: f64) -> Vector3<f64> {
    let n = 4000;
    let dt = h / n as f64;
    let f = |t: f64, x: &Vector3<f64>| {
        let u = u0 + (u1 - u0) * (t / h);
        Vector3::new(sigma * x[2].cos() * u[0], sigma * x[2].sin() * u[0], sigma * model.kappa_max * u[1])
    };
    let mut x = x0;
    for i in 0..n {
        let t = i as f64 * dt;
        let k1 = f(t, &x);
        let k2 = f(t + dt / 2.0, &(x + k1 * (dt / 2.0)));
        let k3 = f(t + dt / 2.0, &(x + k2 * (dt / 2.0)));
        let k4 = f(t + dt, &(x + k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}

/// Worst entry error of the FOH model against the exact exponential.
pub fn lti_worst_error(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let knots = 20;
    let h = 1.0 / (knots - 1) as f64;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let sys = Lti {
            a: Matrix3::from_fn(|_, _| uniform(&mut rng, -1.0, 1.0)),
            b: Matrix3x2::from_fn(|_, _| uniform(&mut rng, -1.0, 1.0)),
        };
        let sigma = uniform(&mut rng, 0.5, 3.0);
        let states: Vec<_> = (0..knots).map(|_| Vector3::from_fn(|_, _| uniform(&mut rng, -2.0, 2.0))).collect();
        let controls: Vec<_> = (0..knots).map(|_| Vector2::from_fn(|_, _| uniform(&mut rng, -1.0, 1.0))).collect();
        let ltv = discretize_with(&sys, &states, &controls, sigma, &FohConfig::default()).unwrap();
        let (e, de) = exact_foh(&sys, sigma, h);
        let ad = e.view((0, 0), (3, 3));
        let (e12, e13) = (e.view((0, 3), (3, 2)), e.view((0, 5), (3, 2)));
        for (k, m) in ltv.intervals.iter().enumerate() {
            let b_minus = e12 - e13 / h;
            let b_plus = e13 / h;
            let du = (controls[k + 1] - controls[k]) / h;
            let x_next = ad * states[k] + e12 * controls[k] + e13 * du;
            let dx_dsigma = de.view((0, 0), (3, 3)) * states[k] + de.view((0, 3), (3, 2)) * controls[k]
                + de.view((0, 5), (3, 2)) * du;
            worst = worst
                .max((m.a - ad).abs().max())
                .max((m.b_minus - b_minus).abs().max())
                .max((m.b_plus - b_plus).abs().max())
                .max((m.propagated - &x_next).abs().max())
                .max((m.s - &dx_dsigma).abs().max());
            // The affine model reproduces the map it was built from.
            let step = m.step(&states[k], &controls[k], &controls[k + 1], sigma);
            worst = worst.max((step - &x_next).abs().max());
        }
    }
    worst
}

/// Worst knot error of the rolled-out linear model against a fine
/// nonlinear integration along a dynamically feasible reference, K = 20.
pub fn propagation_worst_error(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = ModelParams::default();
    let knots = 20;
    let h = 1.0 / (knots - 1) as f64;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let sigma = uniform(&mut rng, 1.0, 8.0);
        let controls: Vec<Vector2<f64>> =
            (0..knots).map(|_| Vector2::new(uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0))).collect();
        let mut states = vec![Vector3::new(uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, -3.0, 3.0), uniform(&mut rng, -3.0, 3.0))];
        for k in 0..knots - 1 {
            let next = fine_integrate(&model, states[k], controls[k], controls[k + 1], sigma, h);
            states.push(next);
        }
        let seg = SegmentTrajectory {
            states: states.iter().map(CarState::from_vector).collect(),
            controls: controls.iter().map(CarControl::from_vector).collect(),
            sigma,
        };
        let ltv = discretize_foh(&seg, &model, &FohConfig::default()).unwrap();
        let rolled = ltv.propagate(&states[0], &controls, sigma);
        for (k, (a, b)) in rolled.iter().zip(&states).enumerate() {
            worst = worst.max((a - b).abs().max());
            if k + 1 < knots {
                worst = worst.max((ltv.intervals[k].propagated - states[k + 1]).abs().max());
            }
        }
    }
    worst
}


/// Worst entry error of `A`, `B`, `S` against central finite differences
/// of the dilated dynamics, plus the defect identity `w = -A x - B u`.
pub fn jacobian_worst_error(seed: u64, samples: usize) -> f64 {
    use parking_scvx::vehicle::{dynamics, jacobians, LinearizationPoint};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let model = ModelParams { kappa_max: uniform(&mut rng, 0.2, 2.0) };
        let x = Vector3::new(uniform(&mut rng, -10.0, 10.0), uniform(&mut rng, -10.0, 10.0), uniform(&mut rng, -7.0, 7.0));
        let u = Vector2::new(uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0));
        let sigma = uniform(&mut rng, 0.1, 60.0);
        let f = |x: &Vector3<f64>, u: &Vector2<f64>, s: f64| {
            dynamics(&CarState::from_vector(x), &CarControl::from_vector(u), s, &model).to_vector()
        };
        let lin = jacobians(
            &LinearizationPoint { sigma_bar: sigma, x_bar: CarState::from_vector(&x), u_bar: CarControl::from_vector(&u) },
            &model,
        );
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = h;
            let col = (f(&(x + e), &u, sigma) - f(&(x - e), &u, sigma)) / (2.0 * h);
            worst = worst.max((col - lin.a.column(j)).abs().max());
        }
        for j in 0..2 {
            let mut e = Vector2::zeros();
            e[j] = h;
            let col = (f(&x, &(u + e), sigma) - f(&x, &(u - e), sigma)) / (2.0 * h);
            worst = worst.max((col - lin.b.column(j)).abs().max());
        }
        let ds = (f(&x, &u, sigma + h) - f(&x, &u, sigma - h)) / (2.0 * h);
        worst = worst.max((ds - lin.s).abs().max());
        worst = worst.max((lin.w + lin.a * x + lin.b * u).abs().max());
    }
    worst
}

/// Grid points where `residual <= 0` disagrees with the implication
/// "some trigger fires => c <= 0", over the given STC. Returns
/// `(points checked, mismatches)`.
pub fn stc_truth_table(stc: &parking_scvx::stc::Stc, xs: &[f64], ys: &[f64], thetas: &[f64]) -> (usize, usize) {
    let mut checked = 0;
    let mut bad = 0;
    for &x in xs {
        for &y in ys {
            for &t in thetas {
                let z = CarState::new(x, y, t);
                let fires = stc.triggers().iter().any(|g| g.eval(&z) < 0.0);
                let holds = !fires || stc.constraint().eval(&z) <= 0.0;
                checked += 1;
                if (stc.residual(&z) <= 0.0) != holds {
                    bad += 1;
                }
            }
        }
    }
    (checked, bad)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Sweep of `g` over `n` points in [-5, 5] (zero included) plus random
/// draws; counts failures of `eta >= 0` and `eta (g + eta) == 0`.
pub fn complementarity_failures(n: usize) -> usize {
    use parking_scvx::stc::eta_star;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sweep = linspace(-5.0, 5.0, n / 2 * 2 + 1);
    let random = (0..n).map(|_| uniform(&mut rng, -1e3, 1e3));
    sweep
        .into_iter()
        .chain(random)
        .filter(|&g| {
            let e = eta_star(g);
            !(e >= 0.0 && e * (g + e) == 0.0)
        })
        .count()
}

/// Costs of the accepted iterates in order, starting with the initial
/// reference.
pub fn accepted_costs(history: &[parking_scvx::scvx::IterationRecord]) -> Vec<f64> {
    let mut out: Vec<f64> = history.first().map(|h| h.reference_cost).into_iter().collect();
    out.extend(history.iter().filter(|h| h.accepted).map(|h| h.candidate_cost.total));
    out
}

/// Iterations whose recorded accept flag or next radius disagrees with the
/// update rule replayed on the recorded decreases. The converging
/// iteration keeps the radius and accepts any non-increase.
pub fn trust_replay_mismatches(history: &[parking_scvx::scvx::IterationRecord], params: &parking_scvx::ScvxParams) -> usize {
    use parking_scvx::scvx::trust_region_update;
    let mut radius = params.trust.radius0;
    let mut bad = 0;
    for h in history {
        let (accept, next) = if h.converged {
            (h.actual_decrease >= 0.0, radius)
        } else {
            let d = trust_region_update(h.predicted_decrease, h.actual_decrease, radius, params);
            (d.accept, d.radius)
        };
        if h.trust_radius != radius || h.accepted != accept || h.next_trust_radius != next {
            bad += 1;
        }
        radius = next;
    }
    bad
}
