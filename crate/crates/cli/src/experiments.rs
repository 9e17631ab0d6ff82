//! Experiment drivers binding configs to chains, diagnostics, and NMF
//! training, and writing the report files.
//!
//! Summary CSVs contain no wall-clock columns, so a re-run with the same
//! config and seed reproduces them byte for byte; timings live in the
//! per-replicate detail files and in the benchmark tables, which are
//! inherently non-deterministic.

use crate::config::{CliError, ExperimentConfig, ExperimentKind, NmfSource, Result, SamplerConfig};
use crate::report::{write_manifest, Cell, Csv};
use crate::svg;
use corv::diagnostics::{
    histogram_vs_density, instability_probe, weak_error_experiment, WeakErrorReport,
};
use corv::nmf::{
    generate_synthetic, load_ratings_csv, measure_step_seconds, train_nmf, write_factors,
    NmfSamplerKind, RatingsDataset, TrainConfig, TrainOutcome,
};
use corv::samplers::{run_chain, run_chain_partial, SamplerKind};
use corv::targets::{GradientOracle, NoiseMode};
use std::path::PathBuf;

#[derive(Debug)]
pub struct RunOutputs {
    pub out_dir: PathBuf,
    pub summary_path: PathBuf,
    pub files: Vec<PathBuf>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut files = vec![write_manifest(cfg, &cfg.out_dir)?];
    let summary_path = cfg.out_dir.join("summary.csv");
    match cfg.kind {
        ExperimentKind::Fig1Density => run_fig1(cfg, &mut files)?,
        ExperimentKind::Fig2WeakError => run_fig2(cfg, &mut files)?,
        ExperimentKind::Theorem1Instability => run_probe(cfg, &mut files)?,
        ExperimentKind::NmfTrain => run_nmf(cfg, &mut files)?,
        ExperimentKind::BenchmarkOverhead => run_benchmark(cfg, &mut files)?,
    }
    files.push(summary_path.clone());
    Ok(RunOutputs { out_dir: cfg.out_dir.clone(), summary_path, files })
}

fn oracle_for(cfg: &ExperimentConfig) -> GradientOracle {
    let target = cfg.target.expect("validated");
    if cfg.experiment.noise_std > 0.0 {
        GradientOracle { target, mode: NoiseMode::AdditiveNoise { std: cfg.experiment.noise_std } }
    } else {
        GradientOracle::exact(target)
    }
}

/// Density recovery: one long chain per sampler, histogram against the
/// exact density.
fn run_fig1(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let target = cfg.target.expect("validated");
    let oracle = oracle_for(cfg);
    let mut summary = Csv::new(&[
        "method",
        "transform",
        "stepsize",
        "n_samples",
        "tv_distance",
        "boundary_mass_error",
        "boundary_events",
        "diverged_at",
    ]);
    for sampler in &cfg.samplers {
        let (trace, failure) =
            run_chain_partial(&sampler.spec(), &oracle, cfg.experiment.n_samples, cfg.seed)
                .map_err(|e| CliError::Run(format!("{}: {e}", sampler.label())))?;
        let diverged_at = failure.as_ref().and_then(|e| match e {
            corv::Error::Divergence { step, .. } => Some(*step),
            _ => None,
        });
        if let Some(err) = &failure {
            eprintln!("note: {} stopped early: {err}", sampler.label());
        }
        if trace.thetas.is_empty() {
            summary.row(vec![
                Cell::from(sampler.kind.name()),
                transform_cell(sampler),
                Cell::from(sampler.stepsize),
                Cell::from(0usize),
                Cell::Empty,
                Cell::Empty,
                Cell::from(trace.n_boundary_events),
                diverged_at.map(Cell::from).unwrap_or(Cell::Empty),
            ]);
            continue;
        }
        let report = histogram_vs_density(&trace.thetas, &target, cfg.experiment.n_bins)?;

        let mut detail = Csv::new(&["bin_lo", "bin_hi", "count", "sample_mass", "exact_mass"]);
        for i in 0..report.counts.len() {
            detail.row(vec![
                Cell::from(report.bin_edges[i]),
                Cell::from(report.bin_edges[i + 1]),
                Cell::from(report.counts[i]),
                Cell::from(report.sample_masses[i]),
                Cell::from(report.exact_masses[i]),
            ]);
        }
        let path = cfg.out_dir.join(format!("hist_{}.csv", sampler.label()));
        detail.write(&path)?;
        files.push(path);

        if cfg.emit_svg {
            let svg_text = svg::histogram_overlay(
                &format!("{} on {}", sampler.label(), target.name()),
                &report.bin_edges,
                &report.sample_masses,
                &report.exact_masses,
            );
            let path = cfg.out_dir.join(format!("hist_{}.svg", sampler.label()));
            std::fs::write(&path, svg_text)?;
            files.push(path);
        }

        summary.row(vec![
            Cell::from(sampler.kind.name()),
            transform_cell(sampler),
            Cell::from(sampler.stepsize),
            Cell::from(trace.thetas.len()),
            Cell::from(report.tv_distance),
            Cell::from(report.boundary_mass_error),
            Cell::from(trace.n_boundary_events),
            diverged_at.map(Cell::from).unwrap_or(Cell::Empty),
        ]);
    }
    summary.write(&cfg.out_dir.join("summary.csv"))?;
    Ok(())
}

fn transform_cell(sampler: &SamplerConfig) -> Cell {
    match &sampler.transform_name {
        Some(name) => Cell::from(name.as_str()),
        None => Cell::Empty,
    }
}

/// Fixed-horizon expectation error across the stepsize grid, one report
/// per sampler, plus fitted log-log slopes.
fn run_fig2(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let oracle = oracle_for(cfg);
    let mut detail = Csv::new(&[
        "method",
        "transform",
        "stepsize",
        "replicate",
        "h_value",
        "diverged",
        "wall_ms",
    ]);
    let mut errors_csv = Csv::new(&[
        "method",
        "transform",
        "stepsize",
        "error",
        "std_error",
        "n_ok",
        "divergences",
    ]);
    let mut summary = Csv::new(&["method", "transform", "fitted_slope", "slope_points"]);
    let mut series = Vec::new();

    for sampler in &cfg.samplers {
        let report: WeakErrorReport = weak_error_experiment(
            &sampler.spec(),
            &oracle,
            cfg.experiment.horizon,
            &cfg.stepsize_grid,
            cfg.experiment.n_replicates,
            cfg.experiment.test_function,
            cfg.seed,
        )?;
        for rep in &report.replicates {
            detail.row(vec![
                Cell::from(sampler.kind.name()),
                transform_cell(sampler),
                Cell::from(rep.stepsize),
                Cell::from(rep.index),
                rep.value.map(Cell::from).unwrap_or(Cell::Empty),
                Cell::from(u64::from(rep.value.is_none())),
                Cell::from(rep.wall.as_secs_f64() * 1e3),
            ]);
        }
        for (i, &eps) in report.stepsizes.iter().enumerate() {
            errors_csv.row(vec![
                Cell::from(sampler.kind.name()),
                transform_cell(sampler),
                Cell::from(eps),
                Cell::from(report.errors[i]),
                Cell::from(report.std_errors[i]),
                Cell::from(report.n_replicates - report.divergences[i]),
                Cell::from(report.divergences[i]),
            ]);
        }
        summary.row(vec![
            Cell::from(sampler.kind.name()),
            transform_cell(sampler),
            report.fitted_slope.map(Cell::from).unwrap_or(Cell::Empty),
            Cell::from(report.slope_points),
        ]);
        series.push((
            sampler.label(),
            report
                .stepsizes
                .iter()
                .zip(report.errors.iter())
                .map(|(&e, &err)| (e, err))
                .collect::<Vec<_>>(),
        ));
    }

    let detail_path = cfg.out_dir.join("replicates.csv");
    detail.write(&detail_path)?;
    files.push(detail_path);
    let errors_path = cfg.out_dir.join("errors.csv");
    errors_csv.write(&errors_path)?;
    files.push(errors_path);
    if cfg.emit_svg {
        let path = cfg.out_dir.join("weak_error.svg");
        std::fs::write(&path, svg::loglog_lines("expectation error vs stepsize", &series))?;
        files.push(path);
    }
    summary.write(&cfg.out_dir.join("summary.csv"))?;
    Ok(())
}

/// Single-step displacement probe approaching the boundary.
fn run_probe(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let target = cfg.target.expect("validated");
    let transform = cfg
        .samplers
        .iter()
        .find_map(|s| s.transform)
        .ok_or_else(|| CliError::Run("probe needs a sampler with a transform".into()))?;
    let eps = cfg.samplers.first().map(|s| s.stepsize).unwrap_or(1e-3);
    let rows = instability_probe(
        &target,
        &transform,
        eps,
        &cfg.boundary_distances,
        cfg.experiment.n_probe_draws,
        cfg.seed,
    );
    let mut summary = Csv::new(&[
        "theta",
        "ito_median_abs_step",
        "corv_median_abs_step",
        "corv_drift_abs",
        "stepsize",
    ]);
    for row in &rows {
        summary.row(vec![
            Cell::from(row.theta),
            Cell::from(row.ito_median_abs_step),
            Cell::from(row.corv_median_abs_step),
            Cell::from(row.corv_drift_abs),
            Cell::from(eps),
        ]);
    }
    if cfg.emit_svg {
        let series = vec![
            (
                "ito".to_string(),
                rows.iter().map(|r| (r.theta, r.ito_median_abs_step)).collect::<Vec<_>>(),
            ),
            (
                "corv".to_string(),
                rows.iter().map(|r| (r.theta, r.corv_median_abs_step)).collect::<Vec<_>>(),
            ),
        ];
        let path = cfg.out_dir.join("instability.svg");
        std::fs::write(
            &path,
            svg::loglog_lines("median |proxy step| vs distance to boundary", &series),
        )?;
        files.push(path);
    }
    summary.write(&cfg.out_dir.join("summary.csv"))?;
    Ok(())
}

pub fn load_nmf_dataset(cfg: &ExperimentConfig) -> Result<RatingsDataset> {
    let settings = cfg.nmf.as_ref().expect("validated");
    match &settings.source {
        NmfSource::Synthetic { n_users, n_items, rank_true, density } => Ok(generate_synthetic(
            *n_users,
            *n_items,
            *rank_true,
            settings.lambda,
            *density,
            cfg.seed,
        )?),
        NmfSource::Csv { path, format } => {
            let loaded = load_ratings_csv(path, *format, cfg.seed)?;
            if loaded.duplicates_replaced > 0 {
                eprintln!(
                    "warning: {} duplicate (user, item) pairs replaced by their last occurrence",
                    loaded.duplicates_replaced
                );
            }
            Ok(loaded.dataset)
        }
    }
}

pub fn nmf_train_config(
    cfg: &ExperimentConfig,
    sampler: &SamplerConfig,
    n_iters: usize,
) -> Result<TrainConfig> {
    let settings = cfg.nmf.as_ref().expect("validated");
    let kind = match sampler.kind {
        SamplerKind::MirrorSgld => NmfSamplerKind::Mirror,
        SamplerKind::CorvSgld => NmfSamplerKind::Corv(
            sampler
                .transform
                .ok_or_else(|| CliError::Run("corv sampler needs a transform".into()))?,
        ),
        other => return Err(CliError::Run(format!("{} is not an NMF sampler", other.name()))),
    };
    Ok(TrainConfig {
        sampler: kind,
        rank: settings.rank,
        lambda_w: settings.lambda,
        lambda_h: settings.lambda,
        batch_size: settings.batch_size,
        n_iters,
        stepsize: sampler.stepsize,
        eval_interval: settings.eval_interval,
        burn_in: (settings.burn_in_frac * n_iters as f64) as usize,
        seed: cfg.seed,
    })
}

/// First evaluated iteration whose test RMSE drops to `threshold`.
pub fn first_iteration_reaching(outcome: &TrainOutcome, threshold: f64) -> Option<usize> {
    outcome
        .curve
        .iter()
        .find(|p| p.test_rmse <= threshold)
        .map(|p| p.iteration)
}

fn run_nmf(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let settings = cfg.nmf.as_ref().expect("validated");
    let dataset = load_nmf_dataset(cfg)?;
    let mut summary = Csv::new(&[
        "method",
        "transform",
        "stepsize",
        "final_test_rmse",
        "best_test_rmse",
        "iters_to_1p1_floor",
        "noise_floor_rmse",
    ]);
    for sampler in &cfg.samplers {
        let tc = nmf_train_config(cfg, sampler, settings.n_iters)?;
        let outcome =
            train_nmf(&dataset, &tc).map_err(|e| CliError::Run(format!("{}: {e}", sampler.label())))?;

        let mut curve = Csv::new(&["iteration", "train_rmse", "valid_rmse", "test_rmse", "wall_time"]);
        for p in &outcome.curve {
            curve.row(vec![
                Cell::from(p.iteration),
                Cell::from(p.train_rmse),
                Cell::from(p.valid_rmse),
                Cell::from(p.test_rmse),
                Cell::from(p.wall.as_secs_f64()),
            ]);
        }
        let curve_path = cfg.out_dir.join(format!("rmse_curve_{}.csv", sampler.label()));
        curve.write(&curve_path)?;
        files.push(curve_path);

        let snapshot = cfg.out_dir.join(format!("factors_{}.bin", sampler.label()));
        write_factors(&outcome.state, &snapshot)?;
        files.push(snapshot);

        let final_rmse = outcome.curve.last().map(|p| p.test_rmse).unwrap_or(f64::NAN);
        let best = outcome.curve.iter().map(|p| p.test_rmse).fold(f64::INFINITY, f64::min);
        let reach = outcome
            .noise_floor_rmse
            .and_then(|floor| first_iteration_reaching(&outcome, 1.1 * floor));
        summary.row(vec![
            Cell::from(sampler.kind.name()),
            transform_cell(sampler),
            Cell::from(sampler.stepsize),
            Cell::from(final_rmse),
            Cell::from(best),
            reach.map(Cell::from).unwrap_or(Cell::Empty),
            outcome.noise_floor_rmse.map(Cell::from).unwrap_or(Cell::Empty),
        ]);
    }
    summary.write(&cfg.out_dir.join("summary.csv"))?;
    Ok(())
}

/// Per-step wall time of each sampler at each batch size, with the
/// overhead relative to the reflected sampler at the same batch size.
/// Timing output is inherently non-reproducible byte for byte.
fn run_benchmark(cfg: &ExperimentConfig, files: &mut Vec<PathBuf>) -> Result<()> {
    let settings = cfg.nmf.as_ref().expect("validated");
    let dataset = load_nmf_dataset(cfg)?;
    let batch_sizes: Vec<usize> =
        if cfg.batch_sizes.is_empty() { vec![settings.batch_size] } else { cfg.batch_sizes.clone() };

    let mut summary = Csv::new(&[
        "method",
        "transform",
        "batch_size",
        "rank",
        "per_step_us",
        "overhead_vs_mirror",
    ]);
    for &batch in &batch_sizes {
        let mut mirror_time = None;
        for sampler in &cfg.samplers {
            let mut tc = nmf_train_config(cfg, sampler, 1)?;
            tc.batch_size = batch;
            let secs = measure_step_seconds(
                &dataset,
                &tc,
                cfg.experiment.warmup_steps,
                cfg.experiment.timed_steps,
            )?;
            if sampler.kind == SamplerKind::MirrorSgld {
                mirror_time = Some(secs);
            }
            let overhead = mirror_time.map(|m| secs / m - 1.0);
            summary.row(vec![
                Cell::from(sampler.kind.name()),
                transform_cell(sampler),
                Cell::from(batch),
                Cell::from(settings.rank),
                Cell::from(secs * 1e6),
                overhead.map(Cell::from).unwrap_or(Cell::Empty),
            ]);
        }
    }
    let timing_path = cfg.out_dir.join("timing.csv");
    summary.write(&timing_path)?;
    files.push(timing_path);
    summary.write(&cfg.out_dir.join("summary.csv"))?;
    Ok(())
}
