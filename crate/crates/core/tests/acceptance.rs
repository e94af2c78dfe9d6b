//! Acceptance suite. Runs every primary criterion, prints one PASS/FAIL line
//! per criterion and exits nonzero if any of them fails.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use entsdp::dualsolve::{
    minorizer_exact, solve_diagonal, solve_trace, DiagonalProblem, SolveConfig, SolveMode, TraceProblem, TraceSpectrum,
};
use entsdp::embed::{
    clustered_graph, default_k_tilde, factor_at, gram_validation, normalized_laplacian, run_embed_experiment,
    ClusteredGraphConfig, EmbedConfig,
};
use entsdp::linop::{DualShiftedOperator, SparseSymMatrix, SpectralInterval};
use entsdp::matfunc::{expmv, fermi_dirac_sqrt, sqrt_fermi_dirac_approx, GibbsFactorOperator};
use entsdp::maxcut::{erdos_renyi, run_maxcut, run_maxcut_experiment, MaxCutConfig, MaxCutInstance};
use entsdp::sketch::{
    covariance_check, diag_estimate, draw_probes, estimator_bench, trace_pair_estimate, ProbeDistribution,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn matrix_functions() -> Outcome {
    let mut worst_expmv = 0.0f64;
    let mut worst_cheb = 0.0f64;
    for inst in 0..20u64 {
        let c = random_sparse(64, 4.0, 0.5, 100 + inst);
        let dense = c.to_dense();
        let v = gaussian_block(64, 4, 200 + inst);

        let beta = 10.0;
        let op = DualShiftedOperator::unshifted(Arc::new(c.clone()));
        let got = expmv(&op, &v, -0.5 * beta, 1e-8).unwrap();
        let want = matfun(&dense, |w| (-0.5 * beta * w).exp()) * &v;
        worst_expmv = worst_expmv.max((&got - &want).norm() / want.norm());

        let g = c.gershgorin_interval();
        let scale = 2.0 / g.lower.abs().max(g.upper.abs());
        let scaled = Arc::new(c.scaled(scale));
        let scaled_dense = dense.clone() * scale;
        for beta in [5.0, 10.0] {
            let y = GibbsFactorOperator::sqrt_fermi_dirac(
                DualShiftedOperator::unshifted(scaled.clone()),
                beta,
                SpectralInterval::new(-2.0, 2.0).unwrap(),
                1e-5,
            )
            .unwrap();
            let got = y.apply(&v).unwrap();
            let want = matfun(&scaled_dense, |w| 1.0 / (1.0 + (beta * w).exp()).sqrt()) * &v;
            worst_cheb = worst_cheb.max((&got - &want).norm() / v.norm());
        }
    }
    let mut worst_fit = 0.0f64;
    for beta in [5.0, 10.0] {
        let approx = sqrt_fermi_dirac_approx(beta, SpectralInterval::new(-2.0, 2.0).unwrap(), 1e-5).unwrap();
        for i in 0..10_000 {
            let x = -2.0 + 4.0 * i as f64 / 9_999.0;
            let f = (1.0 / (1.0 + (beta * x).exp())).sqrt();
            worst_fit = worst_fit.max((approx.eval(x) - f).abs());
        }
        worst_fit = worst_fit.max((approx.eval(0.0) - fermi_dirac_sqrt(0.0, beta)).abs());
    }
    outcome(
        worst_expmv <= 1e-8 && worst_cheb <= 1e-4 && worst_fit <= 1e-5,
        format!("expmv rel err {worst_expmv:.2e} (<=1e-8), cheb apply err {worst_cheb:.2e} (<=1e-4), fit sup err {worst_fit:.2e} (<=1e-5)"),
    )
}

fn estimator_statistics() -> Outcome {
    // Unbiasedness at n = 16.
    let n = 16;
    let c = random_sparse(n, 4.0, 0.5, 7);
    let x = matfun(&c.to_dense(), |w| (-2.0 * w).exp());
    let y = GibbsFactorOperator::half_exponential(DualShiftedOperator::unshifted(Arc::new(c.clone())), 2.0).unwrap();
    let batches = 10_000;
    let mut sum = vec![0.0; n + 2];
    let mut sq = vec![0.0; n + 2];
    for b in 0..batches {
        let z = draw_probes(n, 8, 31, b as u64, ProbeDistribution::Gaussian).unwrap();
        let d = diag_estimate(&y, &z).unwrap().diag;
        let t = trace_pair_estimate(&y, &z).unwrap();
        let vals: Vec<f64> = d.into_iter().chain([t.t1, t.t2]).collect();
        for (i, v) in vals.iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    let truth: Vec<f64> = (0..n)
        .map(|i| x[(i, i)])
        .chain([x.trace(), (&x * &x).trace()])
        .collect();
    let bf = batches as f64;
    let worst_z = (0..n + 2)
        .map(|i| {
            let mean = sum[i] / bf;
            let var = (sq[i] - sum[i] * sum[i] / bf) / (bf - 1.0);
            (mean - truth[i]).abs() / (var / bf).sqrt()
        })
        .fold(0.0, f64::max);

    // Covariance against 2 X_ij².
    let cov = covariance_check(&y, 100_000, 57, 64).unwrap();
    let mut worst_cov = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let analytic = 2.0 * x[(i, j)] * x[(i, j)];
            worst_cov = worst_cov.max((cov.empirical[(i, j)] - analytic).abs() / cov.standard_error[(i, j)]);
        }
    }

    // Quadrupling N at n = 256.
    let big = random_sparse(256, 4.0, 0.3, 9);
    let d_big: Vec<f64> = {
        let xb = matfun(&big.to_dense(), |w| (-10.0 * w).exp());
        (0..256).map(|i| xb[(i, i)]).collect()
    };
    let y_big = GibbsFactorOperator::half_exponential(DualShiftedOperator::unshifted(Arc::new(big)), 10.0).unwrap();
    let d_norm = d_big.iter().map(|v| v * v).sum::<f64>().sqrt();
    let median_error = |batch: usize| {
        let errs: Vec<f64> = (0..50)
            .map(|t| {
                let z = draw_probes(256, batch, 77 + batch as u64, t, ProbeDistribution::Gaussian).unwrap();
                let a = diag_estimate(&y_big, &z).unwrap().diag;
                a.iter().zip(&d_big).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / d_norm
            })
            .collect();
        median(&errs)
    };
    let ratio = median_error(32) / median_error(8);

    outcome(
        worst_z <= 3.0 && worst_cov <= 5.0 && (0.35..=0.7).contains(&ratio),
        format!("max bias z {worst_z:.2} (<=3), max covariance z {worst_cov:.2} (<=5), error ratio N=32/N=8 {ratio:.3} (in [0.35,0.7])"),
    )
}

fn minorization() -> Outcome {
    let mut worst_drop = f64::NEG_INFINITY;
    let mut worst_feas = 0.0f64;
    for inst in 0..10u64 {
        let c = random_sparse(64, 4.0, 0.3, 300 + inst);
        let dense = c.to_dense();
        let mut r = rng(400 + inst);
        let b: Vec<f64> = (0..64).map(|_| 0.5 + 1.5 * r.random::<f64>()).collect();
        let c = Arc::new(c);
        for beta in [1.0, 10.0] {
            let p = DiagonalProblem::new(c.clone(), b.clone(), beta).unwrap();
            let cfg = SolveConfig {
                iters: 500,
                mode: SolveMode::Exact,
                keep_snapshots: true,
                ..SolveConfig::default()
            };
            let traj = solve_diagonal(&p, &cfg, None).unwrap();
            let mut prev = diagonal_dual(&dense, &b, beta, &vec![0.0; 64]);
            for lam in traj.snapshots.as_ref().unwrap() {
                let g = diagonal_dual(&dense, &b, beta, lam);
                worst_drop = worst_drop.max(prev - g);
                prev = g;
            }
            let diag = gibbs_diag(&dense, beta, traj.final_lambda().unwrap());
            let feas = diag.iter().zip(&b).map(|(d, t)| (d - t).abs()).fold(0.0, f64::max);
            worst_feas = worst_feas.max(feas);
        }
    }

    let mut worst_gt = f64::NEG_INFINITY;
    for pair in 0..1000u64 {
        let c = random_sparse(16, 4.0, 0.5, 1000 + pair % 20);
        let dense = c.to_dense();
        let mut r = rng(5000 + pair);
        let b: Vec<f64> = (0..16).map(|_| 0.5 + r.random::<f64>()).collect();
        let beta = [1.0, 3.0, 10.0][(pair % 3) as usize];
        let l0: Vec<f64> = (0..16).map(|_| r.random::<f64>() - 0.5).collect();
        let l: Vec<f64> = (0..16).map(|_| 2.0 * (r.random::<f64>() - 0.5)).collect();
        let p = DiagonalProblem::new(Arc::new(c), b.clone(), beta).unwrap();
        let minor = minorizer_exact(&p, &l0, &l, 64).unwrap();
        let g = diagonal_dual(&dense, &b, beta, &l);
        worst_gt = worst_gt.max((minor - g) / g.abs().max(1.0));
    }

    outcome(
        worst_drop <= 1e-10 && worst_feas <= 1e-8 && worst_gt <= 1e-10,
        format!("max decrease {worst_drop:.2e} (<=1e-10), max |diag X - b| after 500 its {worst_feas:.2e} (<=1e-8), max g0-g {worst_gt:.2e} (<=1e-10)"),
    )
}

fn newton() -> Outcome {
    let mut worst_mu = 0.0f64;
    let mut cases: Vec<(SparseSymMatrix, f64, f64)> = Vec::new();
    cases.push((
        SparseSymMatrix::from_diagonal(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
        3.0,
        10.0,
    ));
    for s in 0..4u64 {
        let mut r = rng(600 + s);
        let d: Vec<f64> = (0..50).map(|_| r.random::<f64>() * 3.0 - 1.0).collect();
        cases.push((
            SparseSymMatrix::from_diagonal(&d),
            1.0 + (r.random::<f64>() * 48.0).floor(),
            [1.0, 10.0][s as usize % 2],
        ));
    }
    for (s, n) in [32usize, 64, 128, 128].into_iter().enumerate() {
        let mut r = rng(700 + s as u64);
        let k = 1.0 + (r.random::<f64>() * (n as f64 - 2.0)).floor();
        cases.push((random_sparse(n, 4.0, 0.5, 800 + s as u64), k, [1.0, 10.0][s % 2]));
    }
    let mut worst_fd = 0.0f64;
    for (c, k, beta) in &cases {
        let (eigs, _) = eig(&c.to_dense());
        let oracle = bisect_mu(&eigs, *k, *beta);
        let p = TraceProblem::with_gershgorin(Arc::new(c.clone()), *k, *beta).unwrap();
        let cfg = SolveConfig {
            iters: 100,
            mode: SolveMode::Exact,
            ..SolveConfig::default()
        };
        let mu = solve_trace(&p, &cfg, None).unwrap().final_mu().unwrap();
        worst_mu = worst_mu.max((mu - oracle).abs());

        let spectrum = TraceSpectrum::new(&p, 512).unwrap();
        let h = 1e-5;
        for dm in [-0.3, 0.0, 0.2] {
            let m = oracle + dm;
            let d = spectrum.derivatives(m);
            let fd1 = (trace_dual(&eigs, *k, *beta, m + h) - trace_dual(&eigs, *k, *beta, m - h)) / (2.0 * h);
            let fd2 = {
                let gp = *k - trace_x(&eigs, *beta, m + h);
                let gm = *k - trace_x(&eigs, *beta, m - h);
                (gp - gm) / (2.0 * h)
            };
            let e1 = (d.grad - fd1).abs() / fd1.abs().max(1.0);
            let e2 = (d.hess - fd2).abs() / fd2.abs().max(1e-300);
            worst_fd = worst_fd.max(e1).max(if d.hess.abs() > 1e-8 { e2 } else { 0.0 });
        }
    }

    let mut all_negative = true;
    let mut batches = 0usize;
    for s in 0..3u64 {
        let c = random_sparse(128, 4.0, 0.5, 900 + s);
        let p = TraceProblem::with_gershgorin(Arc::new(c), 40.0, 5.0).unwrap();
        let cfg = SolveConfig {
            iters: 200,
            seed: s,
            ..SolveConfig::default()
        };
        let traj = solve_trace(&p, &cfg, None).unwrap();
        for r in &traj.records {
            batches += 1;
            all_negative &= r.curvature.unwrap() < 0.0;
        }
    }

    outcome(
        worst_mu <= 1e-8 && all_negative && worst_fd <= 1e-6,
        format!("max |mu - mu_bisect| {worst_mu:.2e} (<=1e-8) over {} problems, a2<0 on {batches} batches: {all_negative}, max rel finite-difference error {worst_fd:.2e} (<=1e-6)", cases.len()),
    )
}

fn maxcut() -> Outcome {
    let mut sound = 0usize;
    let mut r = rng(1234);
    for inst in 0..50u64 {
        let n = 6 + (inst as usize % 9);
        let p = 0.2 + 0.4 * r.random::<f64>();
        let instance = erdos_renyi(n, p, 2000 + inst).unwrap();
        if instance.edge_count() == 0 {
            sound += 1;
            continue;
        }
        let cfg = MaxCutConfig {
            beta: [10.0, 32.0, 100.0][inst as usize % 3],
            solve: SolveConfig {
                iters: 200,
                seed: inst,
                ..SolveConfig::default()
            },
            samples: 200,
            ..MaxCutConfig::default()
        };
        let rep = run_maxcut(&instance, &cfg).unwrap().report;
        let opt = brute_force_min(&instance.cost().to_dense());
        // Rounding often recovers the optimum itself; allow for summation order.
        let eps = 1e-12 * opt.abs().max(1.0);
        if rep.lower <= opt + eps && opt <= rep.upper_best + eps {
            sound += 1;
        }
    }

    let mut lines = Vec::new();
    let mut ratios_ok = true;
    let mut monotone_ok = true;
    for n in [256usize, 1024] {
        let mut med = Vec::new();
        for (beta, iters) in [(10.0, 400usize), (32.0, 400), (100.0, 1000)] {
            let ratios: Vec<f64> = (0..5u64)
                .map(|seed| {
                    let cfg = MaxCutConfig {
                        beta,
                        solve: SolveConfig {
                            iters,
                            seed,
                            ..SolveConfig::default()
                        },
                        samples: 1000,
                        ..MaxCutConfig::default()
                    };
                    run_maxcut_experiment(n, 3.0 / n as f64, seed, &cfg)
                        .unwrap()
                        .report
                        .ratio
                })
                .collect();
            med.push(median(&ratios));
        }
        ratios_ok &= med[1] > 0.5 && med[2] > 0.5;
        monotone_ok &= med[2] >= med[0];
        lines.push(format!(
            "n={n}: median ratio b10 {:.3}, b32 {:.3}, b100 {:.3}",
            med[0], med[1], med[2]
        ));
    }
    outcome(
        sound == 50 && ratios_ok && monotone_ok,
        format!(
            "certificates sound on {sound}/50; {}; >0.5 at b32,b100: {ratios_ok}; b100>=b10: {monotone_ok}",
            lines.join("; ")
        ),
    )
}

/// First iteration at which `xs` is within 1% of its last value.
fn iterations_to_one_percent(xs: &[f64]) -> usize {
    let last = *xs.last().unwrap();
    xs.iter().position(|x| (x - last).abs() <= 0.01 * last.abs()).unwrap() + 1
}

fn seed_average(runs: &[Vec<f64>]) -> Vec<f64> {
    (0..runs[0].len())
        .map(|t| runs.iter().map(|r| r[t]).sum::<f64>() / runs.len() as f64)
        .collect()
}

fn convergence() -> Outcome {
    let mut maxcut_counts = Vec::new();
    let mut embed_counts = Vec::new();
    for n in [256usize, 1024] {
        let mut objectives = Vec::new();
        let mut mus = Vec::new();
        for seed in 0..3u64 {
            let cfg = MaxCutConfig {
                beta: 10.0,
                solve: SolveConfig {
                    iters: 400,
                    seed,
                    ..SolveConfig::default()
                },
                samples: 1,
                ..MaxCutConfig::default()
            };
            let traj = run_maxcut_experiment(n, 3.0 / n as f64, seed, &cfg).unwrap().trajectory;
            let raw = traj.objectives();
            objectives.push(
                (1..=raw.len())
                    .map(|t| entsdp::dualsolve::smooth_trajectory(&raw, t).unwrap())
                    .collect::<Vec<_>>(),
            );

            let mut ecfg = EmbedConfig::new(n, 8, 10.0, seed);
            ecfg.validate_gram = false;
            ecfg.verify_probes = 1;
            mus.push(run_embed_experiment(&ecfg).unwrap().trajectory.smoothed_mus());
        }
        maxcut_counts.push(iterations_to_one_percent(&seed_average(&objectives)));
        embed_counts.push(iterations_to_one_percent(&seed_average(&mus)));
    }
    let spread = |c: &[usize]| c.iter().copied().max().unwrap() as f64 / c.iter().copied().min().unwrap() as f64;
    let (sm, se) = (spread(&maxcut_counts), spread(&embed_counts));
    outcome(
        sm < 2.0 && se < 2.0,
        format!(
            "iterations to 1% (n=256, n=1024): maxcut {:?} spread {sm:.2}, embed {:?} spread {se:.2} (each <2)",
            maxcut_counts, embed_counts
        ),
    )
}

fn embedding() -> Outcome {
    let cfg = EmbedConfig::new(1000, 10, 10.0, 0);
    let out = run_embed_experiment(&cfg).unwrap();
    let trace_err = out.summary.trace_relative_error;

    let mut small = EmbedConfig::new(100, 10, 10.0, 1);
    small.validate_gram = false;
    let small_out = run_embed_experiment(&small).unwrap();
    let mu = small_out.summary.mu_star;
    let adjacency = clustered_graph(&ClusteredGraphConfig::new(100, 10, 1)).unwrap();
    let l = normalized_laplacian(&adjacency).unwrap();
    let mut shifted = l.to_dense();
    for i in 0..100 {
        shifted[(i, i)] -= mu;
    }
    let x = matfun(&shifted, |w| logistic(10.0 * w));
    let problem = TraceProblem::new(Arc::new(l), 10.0, 10.0, SpectralInterval::new(0.0, 2.0).unwrap()).unwrap();
    let k0 = default_k_tilde(10, 100);
    let y = factor_at(&problem, mu, 1e-5).unwrap();
    let med = |kt: usize| {
        let errs: Vec<f64> = (0..50u64)
            .map(|t| {
                let e = entsdp::embed::embedding_from_factor(&y, mu, kt, 9000 + t).unwrap();
                gram_validation(&e, &x).unwrap().relative_frobenius
            })
            .collect();
        median(&errs)
    };
    let ratio = med(4 * k0) / med(k0);
    outcome(
        trace_err <= 0.01 && (0.35..=0.7).contains(&ratio),
        format!("n=1000 trace rel err {trace_err:.4} (<=0.01); n=100 Frobenius error ratio k~={}/{k0} {ratio:.3} (in [0.35,0.7])", 4 * k0),
    )
}

fn determinism() -> Outcome {
    let strip = |t: &entsdp::dualsolve::SolveTrajectory| {
        t.records
            .iter()
            .map(|r| {
                (
                    r.t,
                    r.objective.to_bits(),
                    r.residual.to_bits(),
                    r.dual_norm.to_bits(),
                    r.smoothed_mu.map(f64::to_bits),
                )
            })
            .collect::<Vec<_>>()
    };
    let run_all = || {
        let mc = MaxCutConfig {
            beta: 32.0,
            solve: SolveConfig {
                iters: 100,
                seed: 5,
                ..SolveConfig::default()
            },
            samples: 100,
            ..MaxCutConfig::default()
        };
        let m = run_maxcut_experiment(256, 3.0 / 256.0, 5, &mc).unwrap();
        let mut ec = EmbedConfig::new(200, 10, 5.0, 5);
        ec.solve.iters = 200;
        ec.verify_probes = 100;
        let e = run_embed_experiment(&ec).unwrap();
        let inst = MaxCutInstance::from_adjacency(random_graph(64)).unwrap();
        let y =
            GibbsFactorOperator::half_exponential(DualShiftedOperator::unshifted(inst.cost().clone()), 10.0).unwrap();
        let bench = estimator_bench(&y, &[1, 4, 16], 20, 5, ProbeDistribution::Gaussian, 512).unwrap();
        (
            format!("{:?}", m.report),
            strip(&m.trajectory),
            format!("{:?}", e.summary),
            strip(&e.trajectory),
            e.embedding
                .psi
                .as_slice()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>(),
            format!("{bench:?}"),
        )
    };
    let first = run_all();
    let second = run_all();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run_all);
    outcome(
        first == second && first == single,
        format!(
            "rerun identical: {}, single-thread identical: {}",
            first == second,
            first == single
        ),
    )
}

fn random_graph(n: usize) -> SparseSymMatrix {
    erdos_renyi(n, 0.1, 77).unwrap().adjacency().as_ref().clone()
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("matrix-function correctness", matrix_functions),
        ("estimator statistics", estimator_statistics),
        ("minorization monotonicity", minorization),
        ("newton correctness", newton),
        ("max-cut certificates", maxcut),
        ("convergence n-independence", convergence),
        ("spectral embedding", embedding),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|q| name.contains(q.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {name}: {} [{secs:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
