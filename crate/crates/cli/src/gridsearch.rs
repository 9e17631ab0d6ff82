//! Deterministic stepsize selection over a candidate grid: every
//! candidate runs under the same seed, the argmin wins, and ties break
//! toward the smaller stepsize.

use crate::config::{CliError, ExperimentConfig, ExperimentKind, Result};
use crate::experiments::{load_nmf_dataset, nmf_train_config};
use crate::report::{Cell, Csv};
use corv::diagnostics::histogram_vs_density;
use corv::nmf::{predict_rmse, train_nmf, Split};
use corv::samplers::run_chain;
use corv::targets::{GradientOracle, NoiseMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    TvDistance,
    ValidationRmse,
}

impl Objective {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tv_distance" => Ok(Self::TvDistance),
            "validation_rmse" => Ok(Self::ValidationRmse),
            other => Err(CliError::Run(format!("unknown objective {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::TvDistance => "tv_distance",
            Self::ValidationRmse => "validation_rmse",
        }
    }

    /// The natural objective for an experiment kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::NmfTrain | ExperimentKind::BenchmarkOverhead => Self::ValidationRmse,
            _ => Self::TvDistance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub stepsize: f64,
    /// objective value; None when the candidate diverged
    pub objective: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub objective: Objective,
    pub best_stepsize: f64,
    pub best_objective: f64,
    pub table: Vec<GridPoint>,
    /// argmin sits on the grid edge: widen the grid
    pub edge_warning: bool,
}

pub fn grid_search_stepsize(
    cfg: &ExperimentConfig,
    grid: &[f64],
    objective: Objective,
) -> Result<GridSearchOutcome> {
    if grid.is_empty() {
        return Err(CliError::Run("grid search needs at least one candidate".into()));
    }
    if cfg.samplers.len() != 1 {
        return Err(CliError::Run(format!(
            "grid search tunes exactly one sampler; the config has {}",
            cfg.samplers.len()
        )));
    }

    let mut table = Vec::with_capacity(grid.len());
    for &eps in grid {
        let mut candidate = cfg.clone();
        candidate.samplers[0].stepsize = eps;
        let point = match objective {
            Objective::TvDistance => tv_objective(&candidate, eps),
            Objective::ValidationRmse => rmse_objective(&candidate, eps),
        };
        table.push(point);
    }

    let mut best: Option<(f64, f64)> = None;
    for p in &table {
        if let Some(obj) = p.objective {
            let better = match best {
                None => true,
                Some((_, b)) => obj < b || (obj == b && p.stepsize < best.unwrap().0),
            };
            if better {
                best = Some((p.stepsize, obj));
            }
        }
    }
    let (best_stepsize, best_objective) = best.ok_or_else(|| {
        let details: Vec<String> =
            table.iter().map(|p| format!("{:e}: {}", p.stepsize, p.detail)).collect();
        CliError::Run(format!("every stepsize candidate diverged: {}", details.join("; ")))
    })?;

    let finite: Vec<&GridPoint> = table.iter().filter(|p| p.objective.is_some()).collect();
    let edge_warning = grid.len() >= 3
        && (best_stepsize == finite.first().unwrap().stepsize
            || best_stepsize == finite.last().unwrap().stepsize);

    Ok(GridSearchOutcome { objective, best_stepsize, best_objective, table, edge_warning })
}

fn tv_objective(cfg: &ExperimentConfig, eps: f64) -> GridPoint {
    let target = match cfg.target {
        Some(t) => t,
        None => {
            return GridPoint {
                stepsize: eps,
                objective: None,
                detail: "no target".into(),
            }
        }
    };
    let oracle = if cfg.experiment.noise_std > 0.0 {
        GradientOracle { target, mode: NoiseMode::AdditiveNoise { std: cfg.experiment.noise_std } }
    } else {
        GradientOracle::exact(target)
    };
    match run_chain(&cfg.samplers[0].spec(), &oracle, cfg.experiment.n_samples, cfg.seed)
        .and_then(|trace| histogram_vs_density(&trace.thetas, &target, cfg.experiment.n_bins))
    {
        Ok(report) => GridPoint {
            stepsize: eps,
            objective: Some(report.tv_distance),
            detail: format!("tv={}", report.tv_distance),
        },
        Err(e) => GridPoint { stepsize: eps, objective: None, detail: e.to_string() },
    }
}

fn rmse_objective(cfg: &ExperimentConfig, eps: f64) -> GridPoint {
    let inner = || -> Result<f64> {
        let settings = cfg.nmf.as_ref().ok_or_else(|| CliError::Run("no [nmf] table".into()))?;
        let dataset = load_nmf_dataset(cfg)?;
        let tc = nmf_train_config(cfg, &cfg.samplers[0], settings.n_iters)?;
        let outcome = train_nmf(&dataset, &tc)?;
        if outcome.accumulator.n_accumulated() > 0 {
            Ok(predict_rmse(&outcome.accumulator, &dataset, Split::Validation)?)
        } else {
            outcome
                .curve
                .last()
                .map(|p| p.valid_rmse)
                .ok_or_else(|| CliError::Run("empty curve".into()))
        }
    };
    match inner() {
        Ok(rmse) => {
            GridPoint { stepsize: eps, objective: Some(rmse), detail: format!("rmse={rmse}") }
        }
        Err(e) => GridPoint { stepsize: eps, objective: None, detail: e.to_string() },
    }
}

/// Write the gridsearch table next to the other run outputs.
pub fn write_table(outcome: &GridSearchOutcome, cfg: &ExperimentConfig) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = Csv::new(&["stepsize", "objective", "diverged", "detail"]);
    for p in &outcome.table {
        csv.row(vec![
            Cell::from(p.stepsize),
            p.objective.map(Cell::from).unwrap_or(Cell::Empty),
            Cell::from(u64::from(p.objective.is_none())),
            Cell::from(p.detail.clone()),
        ]);
    }
    let path = cfg.out_dir.join("gridsearch.csv");
    csv.write(&path)?;
    Ok(path)
}
