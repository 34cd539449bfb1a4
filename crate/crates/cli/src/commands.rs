use std::time::Instant;

use rand::Rng;
use rild::rng::{RngStream, START_PICK_STREAM};
use rild::spectral::{
    assemble_langevin_operator, concentration_curve, double_well, leading_eigenpairs,
    smooth_periodize, spectral_gap_curve, PeriodicGrid,
};
use rild::{
    pass_rate_sweep, run_eki, run_eks, run_gld, run_rild, run_rild_gradfree, Error, RunRecord,
    SweepSpec,
};
use serde::Serialize;

use crate::config::{AlgorithmName, ExperimentFile};
use crate::output::{OutputDir, VERSION};
use crate::CliError;

#[derive(Serialize)]
struct RunSummary {
    iterations: usize,
    evaluations: u64,
    best_v: f64,
    final_mean_v: Option<f64>,
    resamples: usize,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    status: &'static str,
    error: Option<String>,
    seed: u64,
    init_seed: u64,
    algorithm: &'static str,
    fitness: String,
    gld_start_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adaptive_step_rule: Option<&'static str>,
    config: &'a ExperimentFile,
    summary: RunSummary,
    wall_time_s: f64,
}

const ADAPTIVE_STEP_RULE: &str =
    "tau_n = tau / (||drift||_F / sqrt(N) + 1e-8), clamped to [1e-6 tau, 10 tau]";

/// Outcome reported back to `main`.
pub struct Report {
    pub message: String,
    pub failure: Option<CliError>,
}

pub fn run(file: &ExperimentFile) -> Result<Report, CliError> {
    let start = Instant::now();
    let alg = file.algorithm_section()?;
    let problem = file.build_problem()?;
    let potential = problem.potential();
    let fitness = file.fitness()?;
    let cfg = alg.run_config();
    cfg.validate()?;
    let initial = file.initial_ensemble(potential.dim(), cfg.particles)?;
    let out = OutputDir::create(&file.output.dir, cfg.seed, file)?;

    let least_squares = || {
        problem.least_squares().ok_or_else(|| {
            CliError::Config(format!(
                "{} needs a least-squares problem (elliptic or rosenbrock)",
                alg.name.as_str()
            ))
        })
    };
    let mut gld_start_index = None;
    let result = match alg.name {
        AlgorithmName::Rild => run_rild(potential, &fitness, &cfg, &initial),
        AlgorithmName::RildGradfree => run_rild_gradfree(potential, &fitness, &cfg, &initial),
        AlgorithmName::Eks => run_eks(least_squares()?, &cfg, &initial),
        AlgorithmName::Eki => run_eki(least_squares()?, &cfg, &initial),
        AlgorithmName::Gld => {
            let i = RngStream::new(cfg.seed, START_PICK_STREAM).random_range(0..initial.len());
            gld_start_index = Some(i);
            run_gld(potential, &cfg, &initial.particle(i).into_owned())
        }
    };
    let (record, failure) = match result {
        Ok(rec) => (rec, None),
        Err(Error::Divergence {
            iteration,
            reason,
            partial,
        }) => {
            let msg = format!("diverged at iteration {iteration}: {reason}");
            (*partial, Some(CliError::Numerical(msg)))
        }
        Err(e) => return Err(e.into()),
    };

    out.trace(&record)?;
    for (iteration, ensemble) in &record.snapshots {
        out.ensemble(*iteration, ensemble)?;
    }
    let summary = summarize(&record);
    let message = format!(
        "{} on {}: {} iterations, {} evaluations, best V {}, output in {}",
        alg.name.as_str(),
        potential.name(),
        summary.iterations,
        summary.evaluations,
        summary.best_v,
        file.output.dir.display()
    );
    out.meta(&RunMeta {
        tool: "rild",
        version: VERSION,
        command: "run",
        status: if failure.is_some() { "diverged" } else { "ok" },
        error: failure.as_ref().map(|f| f.to_string()),
        seed: cfg.seed,
        init_seed: file.init_seed()?,
        algorithm: alg.name.as_str(),
        fitness: format!("{:?}", fitness.kind()),
        gld_start_index,
        adaptive_step_rule: cfg.adaptive_step.then_some(ADAPTIVE_STEP_RULE),
        config: file,
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    })?;
    Ok(Report { message, failure })
}

fn summarize(rec: &RunRecord) -> RunSummary {
    RunSummary {
        iterations: rec.iterations.last().map_or(0, |s| s.iteration),
        evaluations: rec.evaluations(),
        best_v: rec.best_potential(),
        final_mean_v: rec.final_mean_potential(),
        resamples: rec.resample_count(),
    }
}

#[derive(Serialize)]
struct SweepMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    init_seed: u64,
    config: &'a ExperimentFile,
    wall_time_s: f64,
}

pub fn sweep(file: &ExperimentFile) -> Result<Report, CliError> {
    let start = Instant::now();
    let alg = file.algorithm_section()?;
    let section = file
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    if section.algorithms.is_empty() {
        return Err(CliError::Config("sweep.algorithms is empty".into()));
    }
    let problem = file.build_problem()?;
    let potential = problem.potential();
    let fitness = file.fitness()?;
    let template = alg.run_config();
    template.validate()?;
    let initial = file.initial_ensemble(potential.dim(), template.particles)?;
    let out = OutputDir::create(&file.output.dir, template.seed, file)?;

    let results = section
        .algorithms
        .iter()
        .map(|&algorithm| {
            let spec = SweepSpec {
                algorithm,
                taus: section.taus.clone(),
                sigmas: section.sigmas.clone(),
                trials: section.trials,
                target: section.target,
                template: template.clone(),
            };
            pass_rate_sweep(potential, &fitness, &spec, &initial)
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.passrate(&results)?;
    out.meta(&SweepMeta {
        tool: "rild",
        version: VERSION,
        command: "sweep",
        seed: template.seed,
        init_seed: file.init_seed()?,
        config: file,
        wall_time_s: start.elapsed().as_secs_f64(),
    })?;
    let cells: usize = results.iter().map(|r| r.cells.len()).sum();
    let passing: usize = results
        .iter()
        .map(|r| r.cells.iter().filter(|c| c.passes > 0).count())
        .sum();
    Ok(Report {
        message: format!(
            "{cells} cells, {passing} with at least one pass, output in {}",
            file.output.dir.display()
        ),
        failure: None,
    })
}

#[derive(Serialize)]
struct SpectralMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentFile,
    wall_time_s: f64,
}

pub fn spectral(file: &ExperimentFile) -> Result<Report, CliError> {
    let start = Instant::now();
    let section = file
        .spectral
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [spectral] section".into()))?;
    let grid = PeriodicGrid::new(section.grid_points)?;
    let v = smooth_periodize(double_well, &grid, section.blend_width)?;
    let nodes = grid.nodes();
    let out = OutputDir::create(&file.output.dir, 0, file)?;
    out.grid_function("potential.csv", "V", &nodes, &v)?;

    if !section.epsilons.is_empty() {
        out.gaps(&spectral_gap_curve(&v, &section.epsilons)?)?;
        let principal = |eps: f64| -> Result<Vec<f64>, CliError> {
            let pair = leading_eigenpairs(&assemble_langevin_operator(&v, eps)?, 1)?.remove(0);
            Ok(pair.eigenfunction.as_slice().to_vec())
        };
        for (i, &eps) in section.epsilons.iter().enumerate() {
            out.grid_function(
                &format!("eigfun_eps_{i}.csv"),
                "eigfun_value",
                &nodes,
                &principal(eps)?,
            )?;
        }
        // mu / nu: principal eigenfunction at the largest epsilon over the unperturbed one.
        let eps_max = section
            .epsilons
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let nu = principal(0.0)?;
        let mu = principal(eps_max)?;
        let quotient: Vec<f64> = mu.iter().zip(&nu).map(|(m, n)| m / n).collect();
        out.columns(
            "quotient.csv",
            &["x", "V", "nu", "mu", "mu_over_nu"],
            &[&nodes, &v, &nu, &mu, &quotient],
        )?;
    }
    if !section.sigmas.is_empty() {
        let w: Vec<f64> = v.iter().map(|x| -x).collect();
        let rows = concentration_curve(
            &w,
            &section.sigmas,
            (section.interval[0], section.interval[1]),
        )?;
        out.concentration(&rows)?;
        for (i, row) in rows.iter().enumerate() {
            out.grid_function(
                &format!("eigfun_sigma_{i}.csv"),
                "eigfun_value",
                &nodes,
                row.eigenfunction.as_slice(),
            )?;
        }
    }
    out.meta(&SpectralMeta {
        tool: "rild",
        version: VERSION,
        command: "spectral",
        config: file,
        wall_time_s: start.elapsed().as_secs_f64(),
    })?;
    Ok(Report {
        message: format!(
            "{} epsilon values, {} sigma values, output in {}",
            section.epsilons.len(),
            section.sigmas.len(),
            file.output.dir.display()
        ),
        failure: None,
    })
}
