use minmin_core::minmin::{minmin_solve, mixed_oracle_eval, InnerSlice, MinMinConfig, MinMinObjective, MinMinProblem};
use minmin_core::model::delta_l_sandwich;
use minmin_core::tensor::{atmi3_restarted, TensorConfig};
use minmin_core::zoo::{make_instance, InstanceSpec, QuadQuarticMinMin};
use minmin_core::{Oracle, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn instance_with_sigma(seed: u64, sigma: f64) -> QuadQuarticMinMin {
    let mut spec = InstanceSpec::new(seed, 12, 6, 0.5, 0.05, 0.05, sigma);
    spec.linear_scale = 0.3;
    make_instance(&spec).unwrap()
}

fn instance(seed: u64) -> QuadQuarticMinMin {
    instance_with_sigma(seed, 0.05)
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Uniform-ish point in the centered ball of the given radius.
fn in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vector {
    let g = gaussian(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    let norm = g.norm();
    g * (r / norm)
}

#[test]
fn inexact_minimizer_gradient_is_almost_antilinear() {
    let inst = instance(1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = inst.constants;
    for _ in 0..3 {
        let x = in_ball(&mut rng, 12, 1.0);
        let (ys, fstar) = inst.inner_reference(&x, 1e-13).unwrap();
        let slice = InnerSlice::new(&inst, x.clone());
        let oracle = Oracle::new(&slice);
        let y0 = Vector::zeros(6);
        let r = (&y0 - &ys).norm() * 1.01 + 1e-6;
        let run = atmi3_restarted(&oracle, &y0, c.l3_y, c.mu_y, 1e-6, r, &TensorConfig::default()).unwrap();
        let eps = (run.value - fstar).max(1e-16);
        assert!(eps <= 1e-6);
        let g = inst.grad_y(&x, &run.y);
        for _ in 0..100 {
            let y = &ys + in_ball(&mut rng, 6, 2.0);
            let d = (&run.y - &y).norm();
            let lhs = g.dot(&(&run.y - &y));
            let rhs = c.l_y * d * (2.0 * eps / c.mu_y).sqrt();
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }
}

#[test]
fn mixed_oracle_sandwich_and_lipschitz_gradient() {
    for seed in 1..=3 {
        let inst = instance(seed);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let l_xy = inst.constants.l_xy;
        let cfg = TensorConfig::default();
        let eps_tilde = 1e-9;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vector> = (0..4).map(|_| in_ball(&mut rng, 12, 1.0)).collect();
        let records: Vec<_> = points.iter().map(|x| mixed_oracle_eval(&prob, x, eps_tilde, None, &cfg).unwrap()).collect();
        for (x, rec) in points.iter().zip(&records) {
            let out = rec.oracle_output(l_xy).unwrap();
            let probes: Vec<Vector> = (0..20).map(|_| in_ball(&mut rng, 12, 1.0)).collect();
            let rep = delta_l_sandwich(|p| inst.outer_value(p).unwrap(), &out, x, &probes, 1e-10);
            assert!(rep.passed(), "seed {seed}: {rep:?}");
        }
        let slack = 10.0 * (2.0 * eps_tilde / inst.constants.mu_y).sqrt() * l_xy;
        for i in 0..points.len() {
            for j in 0..i {
                let dg = (&records[i].g_delta - &records[j].g_delta).norm();
                let dx = (&points[i] - &points[j]).norm();
                assert!(dg <= l_xy * dx + slack, "seed {seed}: {dg} > {}", l_xy * dx + slack);
            }
        }
    }
}

#[test]
fn warm_start_does_not_increase_inner_stages() {
    let mut warm = Vec::new();
    let mut cold = Vec::new();
    for seed in 1..=5 {
        let inst = instance_with_sigma(seed, 0.001);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let (x0, y0) = (Vector::zeros(12), Vector::zeros(6));
        for (flag, sink) in [(true, &mut warm), (false, &mut cold)] {
            let cfg = MinMinConfig { warm_start: flag, ..MinMinConfig::default() };
            let out = minmin_solve(&prob, &x0, &y0, 1e-5, &cfg).unwrap();
            sink.push(out.inner_stages);
        }
    }
    warm.sort_unstable();
    cold.sort_unstable();
    assert!(warm[2] <= cold[2], "warm {warm:?} cold {cold:?}");
}

#[test]
fn certified_constants_dominate_sampled_ratios() {
    for seed in 1..=2 {
        let inst = instance(seed);
        let c = inst.constants;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let ball = c.trust_radius;
        let (mut ly, mut lxy, mut l3) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..10_000 {
            let (x, x2) = (in_ball(&mut rng, 12, 1.0), in_ball(&mut rng, 12, 1.0));
            let (y, y2) = (in_ball(&mut rng, 6, ball), in_ball(&mut rng, 6, ball));
            let dy = (&y - &y2).norm();
            ly = ly.max((inst.grad_y(&x, &y) - inst.grad_y(&x, &y2)).norm() / dy);
            let dz = ((&x - &x2).norm_squared() + dy * dy).sqrt();
            let dgx = inst.grad_x(&x, &y) - inst.grad_x(&x2, &y2);
            let dgy = inst.grad_y(&x, &y) - inst.grad_y(&x2, &y2);
            lxy = lxy.max((dgx.norm_squared() + dgy.norm_squared()).sqrt() / dz);
            let h = gaussian(&mut rng, 6).normalize();
            let t1 = inst.third_y(&x, &y, &h).unwrap();
            let t2 = inst.third_y(&x, &y2, &h).unwrap();
            l3 = l3.max((t1 - t2).norm() / dy);
        }
        assert!(ly <= c.l_y * (1.0 + 1e-9), "L_y {ly} > {}", c.l_y);
        assert!(lxy <= c.l_xy * (1.0 + 1e-9), "L_xy {lxy} > {}", c.l_xy);
        assert!(l3 <= c.l3_y * (1.0 + 1e-9), "L3 {l3} > {}", c.l3_y);
    }
}
