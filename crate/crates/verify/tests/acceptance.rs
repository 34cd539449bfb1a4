//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails. Run with
//! `cargo test -p rild-verify --test acceptance`.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rild::dynamics::{derivative_free_drift, exact_preconditioned_drift, Preconditioner};
use rild::ensemble::{weighted_covariance, weighted_mean};
use rild::problems::{
    ackley, ackley_initial, affine_oracle_problem, elliptic_bvp_problem, elliptic_initial,
    quadratic, rosenbrock_initial, rosenbrock_map_problem, ACKLEY_A, ACKLEY_B, ACKLEY_C,
};
use rild::reweight::{multinomial_resample, update_weights};
use rild::rng::RngStream;
use rild::spectral::{
    assemble_langevin_operator, concentration_curve, double_well, leading_eigenpairs,
    leading_eigenvalues, smooth_periodize, spectral_gap_curve, PeriodicGrid,
    CONCENTRATION_INTERVAL, DEFAULT_BLEND_WIDTH, DEFAULT_GRID_POINTS,
};
use rild::{
    pass_rate_sweep, run_eki, run_eks, run_gld_chain, run_rild, CovarianceMode, DriftMode,
    Ensemble, FitnessSource, Potential, RunConfig, RunRecord, SweepAlgorithm, SweepSpec,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn periodized_well(m: usize) -> Vec<f64> {
    smooth_periodize(
        double_well,
        &PeriodicGrid::new(m).unwrap(),
        DEFAULT_BLEND_WIDTH,
    )
    .unwrap()
}

fn spectral_gap_enhancement() -> Verdict {
    let start = Instant::now();
    let eps = [0.0, 0.02, 0.04, 0.06, 0.08, 0.1];
    let rows = spectral_gap_curve(&periodized_well(DEFAULT_GRID_POINTS), &eps).unwrap();
    let elapsed = start.elapsed();
    let diffs: Vec<f64> = rows.windows(2).map(|w| w[1].gap - w[0].gap).collect();
    let increasing = diffs.iter().all(|&d| d > 1e-6);
    let gaps: Vec<String> = rows.iter().map(|r| format!("{:.6}", r.gap)).collect();
    let diffs: Vec<String> = diffs.iter().map(|d| format!("{d:+.2e}")).collect();
    verdict(
        increasing && within(elapsed, 30),
        format!(
            "gaps [{}], differences [{}], {:.2?}",
            gaps.join(", "),
            diffs.join(", "),
            elapsed
        ),
    )
}

fn gradient_free_concentration() -> Verdict {
    let start = Instant::now();
    let w: Vec<f64> = periodized_well(DEFAULT_GRID_POINTS)
        .iter()
        .map(|v| -v)
        .collect();
    let sigmas = [1.0, 0.5, 0.25, 0.125];
    let rows = concentration_curve(&w, &sigmas, CONCENTRATION_INTERVAL).unwrap();
    let elapsed = start.elapsed();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let increasing = ratios.windows(2).all(|p| p[1] > p[0]);
    let last = *ratios.last().unwrap();
    let shown: Vec<String> = sigmas
        .iter()
        .zip(&ratios)
        .map(|(s, r)| format!("σ={s}: {r:.4}"))
        .collect();
    verdict(
        increasing && last > 0.9 && within(elapsed, 30),
        format!(
            "ratios [{}], increasing: {increasing}, smallest-σ ratio > 0.9: {}, {:.2?}",
            shown.join(", "),
            last > 0.9,
            elapsed
        ),
    )
}

fn gibbs_sup_error(m: usize) -> f64 {
    let v = periodized_well(m);
    let op = assemble_langevin_operator(&v, 0.0).unwrap();
    let phi = &leading_eigenpairs(&op, 1).unwrap()[0].eigenfunction;
    let gibbs = DVector::from_iterator(m, v.iter().map(|x| (-x).exp()));
    let gibbs = &gibbs / (gibbs.sum() / m as f64);
    (phi - gibbs).amax()
}

fn eigen_oracle() -> Verdict {
    // The blended seam needs M = 512 to reach 1e-6; the default grid is reported alongside.
    let err_512 = gibbs_sup_error(512);
    let err_256 = gibbs_sup_error(256);
    let op = assemble_langevin_operator(&vec![0.0; DEFAULT_GRID_POINTS], 0.0).unwrap();
    let l = leading_eigenvalues(&op, 21).unwrap();
    let mut lap_err: f64 = l[0].norm();
    for k in 1..=10 {
        let expect = -4.0 * PI * PI * (k * k) as f64;
        for idx in [2 * k - 1, 2 * k] {
            lap_err = lap_err.max((l[idx].re - expect).abs() / expect.abs());
        }
    }
    verdict(
        err_512 < 1e-6 && lap_err < 1e-8,
        format!("Gibbs sup error {err_512:.2e} at M=512 ({err_256:.2e} at M=256); Laplacian max rel error {lap_err:.2e}"),
    )
}

fn affine_exactness() -> Verdict {
    let start = Instant::now();
    let mut rng = RngStream::new(31, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = 1 + (rng.uniform() * 10.0) as usize % 10;
        let k = 1 + (rng.uniform() * 10.0) as usize % 10;
        let n = 2 + (rng.uniform() * 19.0) as usize % 19;
        let mut g = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.standard_normal());
        let (a, b, y) = (
            g(k, d),
            g(k, 1).column(0).into_owned(),
            g(k, 1).column(0).into_owned(),
        );
        let (lo, lp) = (g(k, k), g(d, d));
        let obs = &lo * lo.transpose() + DMatrix::identity(k, k);
        let prior = &lp * lp.transpose() + DMatrix::identity(d, d);
        let p = affine_oracle_problem(a, b, y, obs, prior).unwrap();
        let pos = g(d, n);
        let raw = DVector::from_fn(n, |_, _| rng.uniform() + 1e-3);
        let e = Ensemble::new(pos, &raw / raw.sum()).unwrap();
        let gv = DMatrix::from_columns(
            &e.particles()
                .map(|x| p.forward(&x.into_owned()).unwrap())
                .collect::<Vec<_>>(),
        );
        let pre = Preconditioner::from_ensemble(&e);
        let c = pre.matrix(d);
        for i in 0..n {
            let exact = exact_preconditioned_drift(&e, i, &p, &pre).unwrap();
            let free = derivative_free_drift(&e, &gv, i, &p, &c).unwrap();
            worst = worst.max((&free - &exact).norm() / exact.norm().max(1e-300));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-10 && within(elapsed, 5),
        format!("worst relative error {worst:.2e} over 50 problems, {elapsed:.2?}"),
    )
}

fn trajectories_equal(a: &RunRecord, b: &RunRecord) -> bool {
    a.iterations == b.iterations
        && a.final_ensemble == b.final_ensemble
        && a.snapshots == b.snapshots
}

fn reduction_identities() -> Verdict {
    let iters = 100;
    let all: Vec<usize> = (0..=iters).collect();

    let p = ackley(5, ACKLEY_A, ACKLEY_B, ACKLEY_C);
    let n = 8;
    let initial = ackley_initial(5).sample(n, 3).unwrap();
    let cfg = RunConfig {
        particles: n,
        tau: 0.05,
        sigma: 1.0,
        max_iters: iters,
        threshold: f64::INFINITY,
        seed: 3,
        snapshot_iters: all.clone(),
        ..Default::default()
    };
    let rild = run_rild(&p, &FitnessSource::zero(), &cfg, &initial).unwrap();
    let gld_ok = (0..n).all(|i| {
        let chain = run_gld_chain(&p, &cfg, &initial.particle(i).into_owned(), i).unwrap();
        all.iter().all(|&t| {
            let ens = rild.snapshot(t).unwrap();
            let single = chain.snapshot(t).unwrap();
            ens.particle(i) == single.particle(0)
        })
    });

    let ls = elliptic_bvp_problem();
    let initial = elliptic_initial().sample(20, 4).unwrap();
    let cfg = RunConfig {
        particles: 20,
        tau: 0.1,
        sigma: 2f64.sqrt(),
        max_iters: iters,
        threshold: f64::INFINITY,
        seed: 4,
        covariance: CovarianceMode::WeightedCovariance,
        drift: DriftMode::DerivativeFree,
        adaptive_step: true,
        snapshot_iters: all,
        ..Default::default()
    };
    let a = run_rild(&ls, &FitnessSource::zero(), &cfg, &initial).unwrap();
    let b = run_eks(&ls, &cfg, &initial).unwrap();
    let eks_ok = trajectories_equal(&a, &b);
    verdict(gld_ok && eks_ok, format!("RILD = {n} GLD chains bitwise: {gld_ok}; RILD = EKS bitwise: {eks_ok} ({iters} iterations)"))
}

fn mean_losses(rec: &RunRecord, at: &[usize]) -> Vec<f64> {
    at.iter()
        .map(|&i| rec.mean_potential_at(i).unwrap_or(f64::NAN))
        .collect()
}

fn elliptic_comparison() -> Verdict {
    let start = Instant::now();
    let p = elliptic_bvp_problem();
    let checkpoints = [15, 30];
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let initial = elliptic_initial().sample(1000, seed).unwrap();
        let cfg = RunConfig {
            particles: 1000,
            tau: 0.1,
            sigma: 2f64.sqrt(),
            max_iters: 30,
            seed,
            covariance: CovarianceMode::WeightedCovariance,
            drift: DriftMode::DerivativeFree,
            adaptive_step: true,
            ..Default::default()
        };
        let r = mean_losses(
            &run_rild(&p, &FitnessSource::neg_misfit(), &cfg, &initial).unwrap(),
            &checkpoints,
        );
        let s = mean_losses(&run_eks(&p, &cfg, &initial).unwrap(), &checkpoints);
        let k = mean_losses(&run_eki(&p, &cfg, &initial).unwrap(), &checkpoints);
        let win = (0..2).all(|i| r[i] < s[i] && r[i] < k[i]);
        wins += win as usize;
        lines.push(format!(
            "seed {seed}: RILD {:.3}/{:.3} EKS {:.3}/{:.3} EKI {:.3}/{:.3}",
            r[0], r[1], s[0], s[1], k[0], k[1]
        ));
    }
    let elapsed = start.elapsed();
    verdict(
        wins >= 4 && within(elapsed, 120),
        format!(
            "RILD lowest at iterations 15 and 30 in {wins}/5 seeds, {elapsed:.2?}; {}",
            lines.join("; ")
        ),
    )
}

fn ackley_escape() -> Verdict {
    let start = Instant::now();
    let p = ackley(100, ACKLEY_A, ACKLEY_B, ACKLEY_C);
    let initial = ackley_initial(100).sample(50, 2024).unwrap();
    let spec = |algorithm| SweepSpec {
        algorithm,
        taus: vec![10.0],
        sigmas: vec![5.0],
        trials: 3,
        target: 17.0,
        template: RunConfig {
            particles: 50,
            max_iters: 50_000,
            max_evals: Some(50_000),
            seed: 2024,
            ..Default::default()
        },
    };
    let w = FitnessSource::neg_potential();
    let rild = pass_rate_sweep(&p, &w, &spec(SweepAlgorithm::Rild), &initial).unwrap();
    let gld = pass_rate_sweep(&p, &w, &spec(SweepAlgorithm::Gld), &initial).unwrap();
    let (rp, gp) = (rild.cells[0].passes, gld.cells[0].passes);

    // Best value of one RILD trial, for the record.
    let probe_cfg = RunConfig {
        tau: 10.0,
        sigma: 5.0,
        ..spec(SweepAlgorithm::Rild).template
    };
    let best = run_rild(&p, &w, &probe_cfg, &initial)
        .map(|r| r.best_potential())
        .unwrap_or(f64::NAN);
    let elapsed = start.elapsed();
    verdict(
        rp >= 2 && gp == 0 && within(elapsed, 300),
        format!(
            "RILD {rp}/3 trials below 17, GLD {gp}/3; sample RILD best {best:.3}; {elapsed:.2?}"
        ),
    )
}

fn fd_gradient_error(p: &dyn Potential, x: &DVector<f64>) -> f64 {
    let g = p.gradient(x).unwrap();
    let h = 1e-6;
    let fd = DVector::from_fn(x.len(), |i, _| {
        let mut a = x.clone();
        let mut b = x.clone();
        let step = h * (1.0 + x[i].abs());
        a[i] += step;
        b[i] -= step;
        (p.value(&a).unwrap() - p.value(&b).unwrap()) / (2.0 * step)
    });
    (fd - &g).norm() / g.norm().max(1.0)
}

fn property_suites() -> Verdict {
    let mut rng = RngStream::new(77, 1);
    let mut failures = Vec::new();

    let (mut shift_err, mut simplex_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let n = 1 + (rng.uniform() * 12.0) as usize;
        let raw = DVector::from_fn(n, |_, _| rng.uniform() + 1e-3);
        let w = &raw / raw.sum();
        let fit = DVector::from_fn(n, |_, _| 20.0 * rng.standard_normal());
        let tau = 2.0 * rng.uniform();
        let a = update_weights(&w, &fit, tau).unwrap();
        let b = update_weights(&w, &fit.add_scalar(100.0 * rng.standard_normal()), tau).unwrap();
        shift_err = shift_err.max((&a - b).amax());
        simplex_err = simplex_err.max((a.sum() - 1.0).abs());
        if a.iter().any(|&v| v < 0.0) {
            simplex_err = f64::INFINITY;
        }
    }
    if shift_err >= 1e-12 {
        failures.push(format!("shift invariance {shift_err:.1e}"));
    }
    if simplex_err >= 1e-12 {
        failures.push(format!("simplex {simplex_err:.1e}"));
    }

    let e = Ensemble::new(
        DMatrix::from_row_slice(1, 4, &[-1.0, 0.5, 2.0, 7.0]),
        DVector::from_vec(vec![0.4, 0.3, 0.2, 0.1]),
    )
    .unwrap();
    let target = weighted_mean(&e)[0];
    let reps = 2000;
    let mut resample_rng = RngStream::new(5, 0);
    let means: Vec<f64> = (0..reps)
        .map(|_| weighted_mean(&multinomial_resample(&e, &mut resample_rng).unwrap())[0])
        .collect();
    let avg = means.iter().sum::<f64>() / reps as f64;
    let se =
        (means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (reps - 1) as f64 / reps as f64)
            .sqrt();
    if (avg - target).abs() >= 4.0 * se {
        failures.push(format!("resample mean {avg} vs {target}"));
    }

    for _ in 0..50 {
        let (d, n) = (
            1 + (rng.uniform() * 6.0) as usize,
            1 + (rng.uniform() * 10.0) as usize,
        );
        let raw = DVector::from_fn(n, |_, _| rng.uniform() + 1e-3);
        let e = Ensemble::new(
            DMatrix::from_fn(d, n, |_, _| 5.0 * rng.standard_normal()),
            &raw / raw.sum(),
        )
        .unwrap();
        let c = weighted_covariance(&e).matrix;
        let min = SymmetricEigen::new(c.clone()).eigenvalues.min();
        if min < -1e-10 * (1.0 + c.amax()) || (&c - c.transpose()).amax() > 1e-12 * (1.0 + c.amax())
        {
            failures.push(format!(
                "covariance not symmetric PSD (min eigenvalue {min:.1e})"
            ));
            break;
        }
    }

    let ros = rosenbrock_map_problem(6).unwrap();
    let problems: Vec<(Box<dyn Potential>, f64)> = vec![
        (Box::new(ackley(100, ACKLEY_A, ACKLEY_B, ACKLEY_C)), 3.0),
        (Box::new(elliptic_bvp_problem()), 2.0),
        (Box::new(ros), 1.0),
        (Box::new(quadratic(7)), 3.0),
    ];
    let mut fd_worst: f64 = 0.0;
    for (p, scale) in &problems {
        for _ in 0..5 {
            let x = DVector::from_fn(p.dim(), |_, _| scale * rng.standard_normal());
            fd_worst = fd_worst.max(fd_gradient_error(p.as_ref(), &x));
        }
    }
    if fd_worst >= 1e-4 {
        failures.push(format!("finite differences {fd_worst:.1e}"));
    }

    let run = || {
        let p = elliptic_bvp_problem();
        let initial = elliptic_initial().sample(100, 8).unwrap();
        let cfg = RunConfig {
            particles: 100,
            sigma: 2f64.sqrt(),
            max_iters: 20,
            seed: 8,
            covariance: CovarianceMode::WeightedCovariance,
            drift: DriftMode::DerivativeFree,
            adaptive_step: true,
            ..Default::default()
        };
        run_rild(&p, &FitnessSource::neg_misfit(), &cfg, &initial).unwrap()
    };
    let pool = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
    };
    let deterministic = pool(1).install(run) == pool(4).install(run);
    if !deterministic {
        failures.push("thread-count determinism".into());
    }

    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("shift {shift_err:.1e}, simplex {simplex_err:.1e}, resample mean within 4 SE, covariance PSD, FD gradient {fd_worst:.1e}, 1 vs 4 threads identical")
        } else {
            failures.join("; ")
        },
    )
}

fn rosenbrock_comparison() -> Verdict {
    let start = Instant::now();
    let d = 20;
    let p = rosenbrock_map_problem(d).unwrap();
    let iters = 150;
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let initial = rosenbrock_initial(d).sample(200, seed).unwrap();
        let cfg = RunConfig {
            particles: 200,
            tau: 0.1,
            sigma: 2f64.sqrt(),
            max_iters: iters,
            seed,
            covariance: CovarianceMode::WeightedCovariance,
            drift: DriftMode::DerivativeFree,
            adaptive_step: true,
            ..Default::default()
        };
        let r = run_rild(&p, &FitnessSource::scaled_neg_misfit(5e-3), &cfg, &initial).unwrap();
        let s = run_eks(&p, &cfg, &initial).unwrap();
        let (rl, sl) = (
            r.final_mean_potential().unwrap(),
            s.final_mean_potential().unwrap(),
        );
        wins += (rl < sl) as usize;
        lines.push(format!("seed {seed}: RILD {rl:.2} EKS {sl:.2}"));
    }
    verdict(
        wins >= 4,
        format!(
            "RILD below EKS at iteration {iters} in {wins}/5 seeds, {:.2?}; {}",
            start.elapsed(),
            lines.join("; ")
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "spectral gap of L - eps V increasing in eps",
            spectral_gap_enhancement,
        ),
        (
            "gradient-free mass concentration as sigma decreases",
            gradient_free_concentration,
        ),
        (
            "principal eigenfunction matches Gibbs density; Laplacian spectrum",
            eigen_oracle,
        ),
        (
            "derivative-free drift exact for affine maps",
            affine_exactness,
        ),
        ("reduction to GLD chains and to EKS", reduction_identities),
        (
            "elliptic inverse problem: RILD beats EKS and EKI",
            elliptic_comparison,
        ),
        (
            "Ackley d=100 escape: RILD passes, GLD does not",
            ackley_escape,
        ),
        ("property suites", property_suites),
        ("Rosenbrock d=20: RILD beats EKS", rosenbrock_comparison),
    ];
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += !v.pass as usize;
        let status = if v.pass { "PASS" } else { "FAIL" };
        writeln!(out, "acceptance {} [{status}] {name}: {}", i + 1, v.detail).unwrap();
        out.flush().unwrap();
    }
    writeln!(
        out,
        "acceptance summary: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    )
    .unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
