//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits with a failure status if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use safe_cmaes::cmaes::{minimize, DistributionState, StrategyParams};
use safe_cmaes::gpr::GprModel;
use safe_cmaes::harness::{quartiles, run_experiment, Algorithm, ExperimentConfig};
use safe_cmaes::mathkit::{chi2_ppf, dist, norm, Matrix, NormalSource, RngStream, SymMatrix};
use safe_cmaes::problems::{Benchmark, ProblemInstance, SafetyKind};
use safe_cmaes::safe::{
    init_lipschitz, project, update_rho, update_tau, Anchor, EvaluatedSolution, SafeCmaes,
    SafeParams, SafeRegion, SafetyConstraint,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Outcome, failures: &mut Vec<String>) {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    let tag = if out.pass { "PASS" } else { "FAIL" };
    println!("{tag} {name}: {} [{secs:.1}s]", out.detail);
    if !out.pass {
        failures.push(name.to_string());
    }
}

fn median(v: &[f64]) -> f64 {
    quartiles(v)[1]
}

fn cmaes_sphere() -> Outcome {
    let start = Instant::now();
    let params = StrategyParams::new(10).unwrap();
    let sphere = |x: &[f64]| Benchmark::Sphere.eval(x);
    let mut hits = 0;
    let mut evals = Vec::new();
    for trial in 0..10 {
        let init = DistributionState::new(vec![3.0; 10], 2.0, SymMatrix::identity(10)).unwrap();
        let mut rng = RngStream::derive(2024, trial, 1);
        let out = minimize(sphere, init, &params, &mut rng, 6000).unwrap();
        if out.best_f <= 1e-8 {
            hits += 1;
        }
        evals.push(out.evaluations as f64);
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: hits >= 9 && elapsed < Duration::from_secs(10),
        detail: format!(
            "{hits}/10 trials reached 1e-8 within 6000 evals (median {} evals)",
            median(&evals)
        ),
    }
}

fn exp2() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        problem: Benchmark::Sphere,
        dim: 5,
        safety: SafetyKind::FirstCoordinate,
        algorithm: Algorithm::SafeCmaes,
        budget: 50_000,
        trials: 20,
        seed: 7,
        ..ExperimentConfig::default()
    };
    let safe = run_experiment(&cfg).unwrap();
    let naive = run_experiment(&ExperimentConfig {
        algorithm: Algorithm::Cmaes,
        ..cfg.clone()
    })
    .unwrap();
    let reached = safe.final_best().iter().filter(|&&f| f <= 1e-8).count();
    let m_safe = safe.median_unsafe();
    let m_naive = naive.median_unsafe();
    let elapsed = start.elapsed();
    Outcome {
        pass: m_safe == 0.0 && reached >= 15 && m_naive > 0.0 && elapsed < Duration::from_secs(300),
        detail: format!(
            "median unsafe {m_safe}, {reached}/20 reached 1e-8, naive median unsafe {m_naive}"
        ),
    }
}

fn exp1_config(problem: Benchmark, algorithm: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        dim: 5,
        safety: SafetyKind::ObjectiveMedian,
        algorithm,
        budget: 1000,
        trials: 20,
        seed: 11,
        ..ExperimentConfig::default()
    }
}

fn exp1() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for b in Benchmark::ALL {
        let r = run_experiment(&exp1_config(b, Algorithm::SafeCmaes)).unwrap();
        let clean = r.logs.iter().filter(|l| l.unsafe_count() == 0).count();
        pass &= clean * 4 >= 3 * r.logs.len();
        parts.push(format!("{b} {clean}/20 clean"));
        if b == Benchmark::Sphere {
            let initial: Vec<f64> = r.logs.iter().map(|l| l.best_seed_f).collect();
            let ratio = median(&initial) / median(&r.final_best());
            pass &= ratio >= 100.0;
            parts.push(format!("sphere improvement x{ratio:.1e}"));
        }
    }
    pass &= start.elapsed() < Duration::from_secs(900);
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn avoidance_contrast() -> Outcome {
    let safe = run_experiment(&exp1_config(Benchmark::Sphere, Algorithm::SafeCmaes)).unwrap();
    let avoid = run_experiment(&exp1_config(Benchmark::Sphere, Algorithm::Avoidance)).unwrap();
    let (ms, ma) = (safe.median_unsafe(), avoid.median_unsafe());
    Outcome {
        pass: ma > ms,
        detail: format!("avoidance median unsafe {ma} vs safe CMA-ES {ms}"),
    }
}

fn gpr_gradient() -> Outcome {
    let mut rng = RngStream::new(99);
    let dims = [2, 5, 20];
    let mut worst: f64 = 0.0;
    for m in 0..50 {
        let d = dims[m % 3];
        let n = 2 + (rng.uniform(0.0, 59.0) as usize);
        let model = random_model(&mut rng, d, n, (d as f64).sqrt());
        for _ in 0..20 {
            let z = rng.standard_normal(d);
            let g = model.posterior_mean_grad(&z);
            let fd = fd_gradient_rbf(&model, &z, 1e-5);
            let err = dist(&g, &fd) / norm(&g).max(1e-300);
            worst = worst.max(err);
        }
    }
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("worst relative error {worst:.2e} over 50 models x 20 probes"),
    }
}

fn chi2() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in [1, 2, 5, 20] {
        for p in percentile_grid() {
            let err = (chi2_ppf(p, k).unwrap() - chi2_ppf_quadrature(p, k)).abs();
            worst = worst.max(err);
        }
    }
    let mut worst_k2: f64 = 0.0;
    for p in percentile_grid() {
        let exact = -2.0 * (1.0 - p).ln();
        worst_k2 = worst_k2.max((chi2_ppf(p, 2).unwrap() - exact).abs());
    }
    Outcome {
        pass: worst <= 1e-8 && worst_k2 <= 1e-12,
        detail: format!("max |ppf - quadrature| {worst:.2e}, max k=2 closed-form error {worst_k2:.2e}"),
    }
}

fn projection_suite() -> Outcome {
    let mut rng = RngStream::new(5);
    let mut failures = 0;
    for _ in 0..10_000 {
        let d = 1 + rng.uniform(0.0, 6.0) as usize;
        let k = 1 + rng.uniform(0.0, 8.0) as usize;
        let anchors: Vec<Anchor> = (0..k)
            .map(|_| Anchor {
                center: rng.standard_normal(d).iter().map(|v| 2.0 * v).collect(),
                radius: if rng.uniform(0.0, 1.0) < 0.1 { 0.0 } else { rng.uniform(0.0, 2.0) },
            })
            .collect();
        let region = SafeRegion { anchors };
        let z: Vec<f64> = rng.standard_normal(d).iter().map(|v| 3.0 * v).collect();
        let p = project(&z, &region).unwrap();
        let a = &region.anchors[p.anchor];
        let inside = region.contains(&z);
        let ok = dist(&p.z, &a.center) <= a.radius + 1e-12
            && (0.0..=1.0).contains(&p.xi)
            && (!inside || (p.xi == 1.0 && p.z == z))
            && (p.xi < 1.0 || inside)
            && Some(p.anchor) == brute_force_anchor(&z, &region);
        if !ok {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("{failures} of 10000 randomized cases violated a property"),
    }
}

fn rotate_solution(s: &EvaluatedSolution, r: &Matrix, h: &[f64]) -> EvaluatedSolution {
    EvaluatedSolution::from_values(r.mul_vec(&s.x), s.f, s.s.clone(), h)
}

fn affine_equivariance() -> Outcome {
    let d = 5;
    let mut prng = RngStream::new(31);
    let r = random_orthogonal(&mut prng, d);
    let rt = r.transpose();
    let inst = ProblemInstance::generate(Benchmark::Rosenbrock, d, SafetyKind::FirstCoordinate, 10, &mut prng).unwrap();
    let h = inst.thresholds();
    let rt2 = rt.clone();
    let rotated_constraint = SafetyConstraint::new(move |x: &[f64]| rt2.mul_vec(x)[0], h[0]);
    let rotated_seeds: Vec<EvaluatedSolution> = inst.seeds.iter().map(|s| rotate_solution(s, &r, &h)).collect();

    let strategy = StrategyParams::new(d).unwrap();
    let params = SafeParams::default();
    let init = DistributionState::new(vec![0.0; d], 2.0, SymMatrix::identity(d)).unwrap();
    let mut base_rng = RngStream::new(77);
    let mut rot_rng = RotatedNormals {
        inner: RngStream::new(77),
        rotation: r.clone(),
    };
    let mut a = SafeCmaes::new(inst.seeds.clone(), init.clone(), strategy.clone(), params.clone(), &mut base_rng).unwrap();
    let mut b = SafeCmaes::new(rotated_seeds, init, strategy, params, &mut rot_rng).unwrap();
    let rot_constraints = [rotated_constraint];
    let f_rot = |x: &[f64]| Benchmark::Rosenbrock.eval(&rt.mul_vec(x));

    let mut worst: f64 = 0.0;
    let mut projected = 0;
    let mut l_gap: f64 = 0.0;
    for _ in 0..10 {
        let pa = a.ask(&mut base_rng).unwrap();
        let pb = b.ask(&mut rot_rng).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            worst = worst.max(max_abs_diff(&r.mul_vec(&x.z), &y.z));
            projected += usize::from(x.xi < 1.0);
        }
        let ea: Vec<EvaluatedSolution> = pa.iter().map(|p| inst.evaluate(p.x.clone())).collect();
        let eb: Vec<EvaluatedSolution> = pb
            .iter()
            .map(|p| EvaluatedSolution::evaluate(p.x.clone(), f_rot, &rot_constraints))
            .collect();
        a.tell(&pa, &ea, &mut base_rng).unwrap();
        b.tell(&pb, &eb, &mut rot_rng).unwrap();
        let (la, lb) = (a.lipschitz().estimates[0], b.lipschitz().estimates[0]);
        l_gap = l_gap.max((la - lb).abs() / la);
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!(
            "max |R z - z'| over 10 iterations {worst:.2e} ({projected} projected samples, Lipschitz estimates differ by up to {:.1}%)",
            100.0 * l_gap
        ),
    }
}

fn lipschitz_soundness() -> Outcome {
    let d = 2;
    let mut rng = RngStream::new(3);
    let seeds: Vec<EvaluatedSolution> = (0..40)
        .map(|_| {
            let x = vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
            let s = 3.0 * x[0];
            EvaluatedSolution::from_values(x, 0.0, vec![s], &[100.0])
        })
        .collect();
    let state = DistributionState::new(vec![0.0; d], 1.0, SymMatrix::identity(d)).unwrap();
    let params = SafeParams::default();
    let lambda = StrategyParams::new(d).unwrap().lambda;
    let raw = init_lipschitz(&seeds, &state, &params, lambda, &mut rng).unwrap().raw[0];

    let values: Vec<f64> = seeds.iter().map(|s| s.s[0]).collect();
    let mean = values.iter().sum::<f64>() / 40.0;
    let spread = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 40.0).sqrt();
    let model = GprModel::fit(
        seeds.iter().map(|s| s.x.clone()).collect(),
        values.iter().map(|v| (v - mean) / spread).collect(),
        8.0 * d as f64,
    )
    .unwrap();
    let oracle = spread * grid_max_grad_norm_2d(&model, 3.0, 601);
    Outcome {
        pass: (1.5..=6.0).contains(&raw) && raw >= oracle * (1.0 - 1e-6) && raw <= oracle * (1.0 + 1e-3),
        detail: format!("raw estimate {raw:.6}, dense-grid surrogate maximum {oracle:.6}"),
    }
}

fn coefficient_dynamics() -> Outcome {
    let (lambda, t, zeta) = (8, 5, 10.0_f64);
    let mut ok = true;
    for n in 1..60 {
        let expected = if n < lambda * t { zeta.powf(1.0 / n as f64) } else { 1.0 };
        ok &= update_tau(n, lambda, t, zeta) == expected;
    }
    let (alpha, d) = (10.0_f64, 5);
    ok &= update_rho(1.0, 0.5, alpha, d) == alpha.powf(0.5);
    ok &= update_rho(4.0, 0.25, alpha, d) == 4.0 * alpha.powf(0.25);
    ok &= update_rho(4.0, 0.0, alpha, d) == 4.0 / alpha.powf(1.0 / d as f64);
    ok &= update_rho(1.2, 0.0, alpha, d) == 1.0;
    ok &= update_rho(1.0, 0.0, alpha, d) == 1.0;
    Outcome {
        pass: ok,
        detail: "tau switch at lambda*T_data, rho growth, decay and floor".into(),
    }
}

fn main() {
    let mut failures = Vec::new();
    check("cmaes-sphere-10d", cmaes_sphere, &mut failures);
    check("exp2-sphere-first-coordinate-d5", exp2, &mut failures);
    check("exp1-four-benchmarks-d5", exp1, &mut failures);
    check("avoidance-contrast", avoidance_contrast, &mut failures);
    check("gpr-gradient-oracle", gpr_gradient, &mut failures);
    check("chi2-ppf-oracle", chi2, &mut failures);
    check("projection-suite", projection_suite, &mut failures);
    check("affine-equivariance", affine_equivariance, &mut failures);
    check("lipschitz-soundness", lipschitz_soundness, &mut failures);
    check("coefficient-dynamics", coefficient_dynamics, &mut failures);
    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", failures.len(), failures.join(", "));
        std::process::exit(1);
    }
}
