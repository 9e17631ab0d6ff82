//! Experiment configuration: a single TOML file with nested tables.
//! Parsing is permissive; semantic validation collects every problem at
//! once with its field path.

use corv::samplers::{SamplerKind, SamplerSpec};
use corv::targets::{make_target, TargetDensity};
use corv::transforms::Transform;
use corv::Interval;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration ({} issue(s))", .0.len())]
    InvalidConfig(Vec<Issue>),
    #[error(transparent)]
    Core(#[from] corv::Error),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------- raw form

#[derive(Debug, Deserialize)]
struct RawConfig {
    kind: Option<String>,
    seed: Option<u64>,
    out_dir: Option<String>,
    emit_svg: Option<bool>,
    target: Option<RawTarget>,
    /// single-sampler shorthand; merged ahead of `samplers`
    sampler: Option<RawSampler>,
    #[serde(default)]
    samplers: Vec<RawSampler>,
    grids: Option<RawGrids>,
    experiment: Option<RawExperiment>,
    nmf: Option<RawNmf>,
}

#[derive(Debug, Deserialize)]
struct RawTarget {
    name: String,
    #[serde(flatten)]
    params: BTreeMap<String, toml::Value>,
}

#[derive(Debug, Deserialize)]
struct RawSampler {
    kind: String,
    transform: Option<String>,
    stepsize: Option<f64>,
    burn_in: Option<u64>,
    thinning: Option<u64>,
    initial: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
struct RawGrids {
    stepsizes: Option<Vec<f64>>,
    boundary_distances: Option<Vec<f64>>,
    batch_sizes: Option<Vec<u64>>,
}

#[derive(Debug, Deserialize, Default)]
struct RawExperiment {
    n_samples: Option<u64>,
    n_bins: Option<u64>,
    noise_std: Option<f64>,
    horizon: Option<f64>,
    n_replicates: Option<u64>,
    test_function: Option<String>,
    n_probe_draws: Option<u64>,
    warmup_steps: Option<u64>,
    timed_steps: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct RawNmf {
    source: String,
    path: Option<String>,
    format: Option<String>,
    n_users: Option<u64>,
    n_items: Option<u64>,
    rank_true: Option<u64>,
    density: Option<f64>,
    rank: Option<u64>,
    lambda: Option<f64>,
    batch_size: Option<u64>,
    n_iters: Option<u64>,
    eval_interval: Option<u64>,
    burn_in_frac: Option<f64>,
}

// -------------------------------------------------------------- typed form

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Fig1Density,
    Fig2WeakError,
    Theorem1Instability,
    NmfTrain,
    BenchmarkOverhead,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "fig1_density" => Some(Self::Fig1Density),
            "fig2_weak_error" => Some(Self::Fig2WeakError),
            "theorem1_instability" => Some(Self::Theorem1Instability),
            "nmf_train" => Some(Self::NmfTrain),
            "benchmark_overhead" => Some(Self::BenchmarkOverhead),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1Density => "fig1_density",
            Self::Fig2WeakError => "fig2_weak_error",
            Self::Theorem1Instability => "theorem1_instability",
            Self::NmfTrain => "nmf_train",
            Self::BenchmarkOverhead => "benchmark_overhead",
        }
    }
}

/// One sampler entry, with the transform already resolved against the
/// target domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub transform_name: Option<String>,
    pub transform: Option<Transform>,
    pub stepsize: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub initial: Option<f64>,
}

impl SamplerConfig {
    pub fn label(&self) -> String {
        match &self.transform_name {
            Some(t) if self.kind != SamplerKind::MirrorSgld => {
                format!("{}_{}", self.kind.name(), t)
            }
            _ => self.kind.name().to_string(),
        }
    }

    pub fn spec(&self) -> SamplerSpec {
        SamplerSpec {
            kind: self.kind,
            transform: self.transform,
            stepsize: self.stepsize,
            burn_in: self.burn_in,
            thinning: self.thinning,
            initial: self.initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub n_samples: usize,
    pub n_bins: usize,
    pub noise_std: f64,
    pub horizon: f64,
    pub n_replicates: usize,
    pub test_function: corv::diagnostics::TestFunction,
    pub n_probe_draws: usize,
    pub warmup_steps: usize,
    pub timed_steps: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            n_bins: 50,
            noise_std: 1.0,
            horizon: 10.0,
            n_replicates: 200,
            test_function: corv::diagnostics::TestFunction::Identity,
            n_probe_draws: 1000,
            warmup_steps: 200,
            timed_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NmfSource {
    Synthetic { n_users: usize, n_items: usize, rank_true: usize, density: f64 },
    Csv { path: PathBuf, format: corv::nmf::RatingsFormat },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfSettings {
    pub source: NmfSource,
    pub rank: usize,
    pub lambda: f64,
    pub batch_size: usize,
    pub n_iters: usize,
    pub eval_interval: usize,
    pub burn_in_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
    pub target_name: Option<String>,
    pub target_params: BTreeMap<String, f64>,
    pub target: Option<TargetDensity>,
    pub samplers: Vec<SamplerConfig>,
    pub stepsize_grid: Vec<f64>,
    pub boundary_distances: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub experiment: ExperimentSettings,
    pub nmf: Option<NmfSettings>,
}

/// Resolve a named transform against a target domain, rescaling the
/// unit-codomain family onto bounded domains.
pub fn resolve_transform(name: &str, domain: &Interval) -> std::result::Result<Transform, String> {
    let base = Transform::by_name(name).map_err(|e| e.to_string())?;
    if base.codomain() == *domain {
        return Ok(base);
    }
    if base.codomain() == Interval::unit() && domain.is_bounded() {
        return base.rescaled_to(domain.lower, domain.upper).map_err(|e| e.to_string());
    }
    Err(format!(
        "transform {name:?} maps onto {} which cannot cover the target domain {domain}",
        base.codomain()
    ))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)?;
    let mut issues: Vec<Issue> = Vec::new();
    let mut push = |path: &str, message: String| {
        issues.push(Issue { path: path.to_string(), message });
    };

    let kind = match raw.kind.as_deref() {
        None => {
            push("kind", "missing experiment kind".into());
            None
        }
        Some(k) => match ExperimentKind::parse(k) {
            Some(kind) => Some(kind),
            None => {
                push("kind", format!("unknown experiment kind {k:?}"));
                None
            }
        },
    };

    // target
    let mut target_params = BTreeMap::new();
    let mut target = None;
    let mut target_name = None;
    if let Some(rt) = &raw.target {
        target_name = Some(rt.name.clone());
        for (key, value) in &rt.params {
            match value.as_float().or_else(|| value.as_integer().map(|i| i as f64)) {
                Some(v) => {
                    target_params.insert(key.clone(), v);
                }
                None => {
                    // accept "inf"-style strings for unbounded truncation
                    let parsed = value.as_str().and_then(|s| s.parse::<f64>().ok());
                    match parsed {
                        Some(v) => {
                            target_params.insert(key.clone(), v);
                        }
                        None => push(
                            &format!("target.{key}"),
                            format!("expected a number, got {value}"),
                        ),
                    }
                }
            }
        }
        match make_target(&rt.name, &target_params) {
            Ok(t) => target = Some(t),
            Err(e) => push("target.name", e.to_string()),
        }
    }

    let needs_target = matches!(
        kind,
        Some(ExperimentKind::Fig1Density)
            | Some(ExperimentKind::Fig2WeakError)
            | Some(ExperimentKind::Theorem1Instability)
    );
    if needs_target && raw.target.is_none() {
        push("target", "this experiment kind needs a [target] table".into());
    }

    // samplers ([[samplers]] array, with `sampler = {...}` accepted as a
    // single-entry shorthand)
    let mut raw_samplers: Vec<&RawSampler> = Vec::new();
    if let Some(s) = &raw.sampler {
        raw_samplers.push(s);
    }
    raw_samplers.extend(raw.samplers.iter());
    let mut samplers = Vec::new();
    for (i, rs) in raw_samplers.iter().enumerate() {
        let at = |field: &str| format!("samplers[{i}].{field}");
        let s_kind = match SamplerKind::parse(&rs.kind) {
            Ok(k) => Some(k),
            Err(e) => {
                push(&at("kind"), e.to_string());
                None
            }
        };
        let mut transform = None;
        if let Some(name) = &rs.transform {
            match kind {
                Some(ExperimentKind::NmfTrain) | Some(ExperimentKind::BenchmarkOverhead) => {
                    match resolve_transform(name, &Interval::positive_half_line()) {
                        Ok(t) => transform = Some(t),
                        Err(e) => push(&at("transform"), e),
                    }
                }
                _ => {
                    if let Some(t) = &target {
                        match resolve_transform(name, &t.domain()) {
                            Ok(tr) => transform = Some(tr),
                            Err(e) => push(&at("transform"), e),
                        }
                    }
                }
            }
        }
        if let Some(k) = s_kind {
            if k.uses_proxy() && rs.transform.is_none() {
                push(&at("transform"), format!("{} requires a transform", k.name()));
            }
            let stepsize = rs.stepsize.unwrap_or(1e-3);
            if !(stepsize > 0.0 && stepsize.is_finite()) {
                push(&at("stepsize"), format!("stepsize must be positive, got {stepsize}"));
            }
            samplers.push(SamplerConfig {
                kind: k,
                transform_name: rs.transform.clone(),
                transform,
                stepsize,
                burn_in: rs.burn_in.unwrap_or(0) as usize,
                thinning: rs.thinning.unwrap_or(1).max(1) as usize,
                initial: rs.initial,
            });
        }
    }
    if samplers.is_empty() && kind != Some(ExperimentKind::Theorem1Instability) {
        push("samplers", "at least one [[samplers]] entry is required".into());
    }

    // grids
    let grids = raw.grids.unwrap_or_default();
    let stepsize_grid = grids.stepsizes.unwrap_or_default();
    if kind == Some(ExperimentKind::Fig2WeakError) {
        if stepsize_grid.len() < 2 {
            push("grids.stepsizes", "weak-error experiments need a stepsize grid".into());
        } else if stepsize_grid.windows(2).any(|w| w[1] >= w[0]) {
            push("grids.stepsizes", "stepsizes must be strictly decreasing".into());
        }
    }
    let boundary_distances = grids
        .boundary_distances
        .unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]);
    let batch_sizes: Vec<usize> =
        grids.batch_sizes.map(|v| v.iter().map(|&b| b as usize).collect()).unwrap_or_default();

    // experiment settings
    let re = raw.experiment.unwrap_or_default();
    let defaults = ExperimentSettings::default();
    let mut settings = ExperimentSettings {
        n_samples: re.n_samples.map(|v| v as usize).unwrap_or(defaults.n_samples),
        n_bins: re.n_bins.map(|v| v as usize).unwrap_or(defaults.n_bins),
        noise_std: re.noise_std.unwrap_or(defaults.noise_std),
        horizon: re.horizon.unwrap_or(defaults.horizon),
        n_replicates: re.n_replicates.map(|v| v as usize).unwrap_or(defaults.n_replicates),
        test_function: defaults.test_function,
        n_probe_draws: re.n_probe_draws.map(|v| v as usize).unwrap_or(defaults.n_probe_draws),
        warmup_steps: re.warmup_steps.map(|v| v as usize).unwrap_or(defaults.warmup_steps),
        timed_steps: re.timed_steps.map(|v| v as usize).unwrap_or(defaults.timed_steps),
    };
    if let Some(tf) = &re.test_function {
        match corv::diagnostics::TestFunction::parse(tf) {
            Ok(f) => settings.test_function = f,
            Err(e) => push("experiment.test_function", e.to_string()),
        }
    }
    if settings.noise_std < 0.0 {
        push("experiment.noise_std", "noise level cannot be negative".into());
    }

    // nmf settings
    let mut nmf = None;
    let needs_nmf = matches!(
        kind,
        Some(ExperimentKind::NmfTrain) | Some(ExperimentKind::BenchmarkOverhead)
    );
    if let Some(rn) = &raw.nmf {
        let source = match rn.source.as_str() {
            "synthetic" => Some(NmfSource::Synthetic {
                n_users: rn.n_users.unwrap_or(200) as usize,
                n_items: rn.n_items.unwrap_or(100) as usize,
                rank_true: rn.rank_true.unwrap_or(5) as usize,
                density: rn.density.unwrap_or(1.0),
            }),
            "csv" => {
                let path = rn.path.clone();
                let format = rn.format.as_deref().unwrap_or("ml_tab");
                match (path, corv::nmf::RatingsFormat::parse(format)) {
                    (Some(p), Ok(f)) => Some(NmfSource::Csv { path: PathBuf::from(p), format: f }),
                    (None, _) => {
                        push("nmf.path", "csv source needs a path".into());
                        None
                    }
                    (_, Err(e)) => {
                        push("nmf.format", e.to_string());
                        None
                    }
                }
            }
            other => {
                push("nmf.source", format!("unknown source {other:?}"));
                None
            }
        };
        let burn_in_frac = rn.burn_in_frac.unwrap_or(0.2);
        if !(0.0..1.0).contains(&burn_in_frac) {
            push("nmf.burn_in_frac", format!("must lie in [0,1), got {burn_in_frac}"));
        }
        if let Some(source) = source {
            nmf = Some(NmfSettings {
                source,
                rank: rn.rank.unwrap_or(5) as usize,
                lambda: rn.lambda.unwrap_or(1.0),
                batch_size: rn.batch_size.unwrap_or(2000) as usize,
                n_iters: rn.n_iters.unwrap_or(5000) as usize,
                eval_interval: rn.eval_interval.unwrap_or(100) as usize,
                burn_in_frac,
            });
        }
    } else if needs_nmf {
        push("nmf", "this experiment kind needs an [nmf] table".into());
    }
    if needs_nmf {
        for (i, s) in samplers.iter().enumerate() {
            if !matches!(s.kind, SamplerKind::MirrorSgld | SamplerKind::CorvSgld) {
                push(
                    &format!("samplers[{i}].kind"),
                    format!("{} is not available for NMF training", s.kind.name()),
                );
            }
        }
    }

    if !issues.is_empty() {
        return Err(CliError::InvalidConfig(issues));
    }
    Ok(ExperimentConfig {
        kind: kind.unwrap(),
        seed: raw.seed.unwrap_or(0),
        out_dir: PathBuf::from(raw.out_dir.unwrap_or_else(|| "out".into())),
        emit_svg: raw.emit_svg.unwrap_or(false),
        target_name,
        target_params,
        target,
        samplers,
        stepsize_grid,
        boundary_distances,
        batch_sizes,
        experiment: settings,
        nmf,
    })
}

/// Deterministic canonical rendering of a validated config; also the byte
/// stream hashed into the run manifest.
pub fn canonical_toml(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind = \"{}\"", cfg.kind.name());
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "out_dir = \"{}\"", cfg.out_dir.display());
    let _ = writeln!(s, "emit_svg = {}", cfg.emit_svg);
    if let Some(name) = &cfg.target_name {
        let _ = writeln!(s, "\n[target]\nname = \"{name}\"");
        for (k, v) in &cfg.target_params {
            let _ = writeln!(s, "{k} = {v:?}");
        }
    }
    for sampler in &cfg.samplers {
        let _ = writeln!(s, "\n[[samplers]]\nkind = \"{}\"", sampler.kind.name());
        if let Some(t) = &sampler.transform_name {
            let _ = writeln!(s, "transform = \"{t}\"");
        }
        let _ = writeln!(s, "stepsize = {:?}", sampler.stepsize);
        let _ = writeln!(s, "burn_in = {}", sampler.burn_in);
        let _ = writeln!(s, "thinning = {}", sampler.thinning);
        if let Some(init) = sampler.initial {
            let _ = writeln!(s, "initial = {init:?}");
        }
    }
    let _ = writeln!(s, "\n[grids]");
    let fmt_vec = |v: &[f64]| {
        let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        format!("[{}]", items.join(", "))
    };
    let _ = writeln!(s, "stepsizes = {}", fmt_vec(&cfg.stepsize_grid));
    let _ = writeln!(s, "boundary_distances = {}", fmt_vec(&cfg.boundary_distances));
    let batch: Vec<String> = cfg.batch_sizes.iter().map(|b| b.to_string()).collect();
    let _ = writeln!(s, "batch_sizes = [{}]", batch.join(", "));
    let e = &cfg.experiment;
    let _ = writeln!(s, "\n[experiment]");
    let _ = writeln!(s, "n_samples = {}", e.n_samples);
    let _ = writeln!(s, "n_bins = {}", e.n_bins);
    let _ = writeln!(s, "noise_std = {:?}", e.noise_std);
    let _ = writeln!(s, "horizon = {:?}", e.horizon);
    let _ = writeln!(s, "n_replicates = {}", e.n_replicates);
    let _ = writeln!(s, "test_function = \"{}\"", e.test_function.name());
    let _ = writeln!(s, "n_probe_draws = {}", e.n_probe_draws);
    let _ = writeln!(s, "warmup_steps = {}", e.warmup_steps);
    let _ = writeln!(s, "timed_steps = {}", e.timed_steps);
    if let Some(n) = &cfg.nmf {
        let _ = writeln!(s, "\n[nmf]");
        match &n.source {
            NmfSource::Synthetic { n_users, n_items, rank_true, density } => {
                let _ = writeln!(s, "source = \"synthetic\"");
                let _ = writeln!(s, "n_users = {n_users}");
                let _ = writeln!(s, "n_items = {n_items}");
                let _ = writeln!(s, "rank_true = {rank_true}");
                let _ = writeln!(s, "density = {density:?}");
            }
            NmfSource::Csv { path, format } => {
                let _ = writeln!(s, "source = \"csv\"");
                let _ = writeln!(s, "path = \"{}\"", path.display());
                let name = match format {
                    corv::nmf::RatingsFormat::MlTab => "ml_tab",
                    corv::nmf::RatingsFormat::CsvHeader => "csv_header",
                };
                let _ = writeln!(s, "format = \"{name}\"");
            }
        }
        let _ = writeln!(s, "rank = {}", n.rank);
        let _ = writeln!(s, "lambda = {:?}", n.lambda);
        let _ = writeln!(s, "batch_size = {}", n.batch_size);
        let _ = writeln!(s, "n_iters = {}", n.n_iters);
        let _ = writeln!(s, "eval_interval = {}", n.eval_interval);
        let _ = writeln!(s, "burn_in_frac = {:?}", n.burn_in_frac);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"
kind = "fig2_weak_error"
seed = 7
out_dir = "out/test"

[target]
name = "gamma"
shape = 0.5
scale = 0.5

[[samplers]]
kind = "corv_sgld"
transform = "softplus"

[grids]
stepsizes = [1e-1, 3e-2, 1e-2]

[experiment]
n_replicates = 8
horizon = 2.0
"#;

    #[test]
    fn parses_a_weak_error_config() {
        let cfg = parse_config(FIG2).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Fig2WeakError);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.samplers.len(), 1);
        assert_eq!(cfg.samplers[0].label(), "corv_sgld_softplus");
        assert_eq!(cfg.stepsize_grid, vec![1e-1, 3e-2, 1e-2]);
        assert_eq!(cfg.experiment.n_replicates, 8);
        assert_eq!(cfg.target.unwrap().exact_mean(), Some(0.25));
    }

    #[test]
    fn collects_every_issue_with_field_paths() {
        let bad = r#"
kind = "fig1_density"

[target]
name = "zeta"
shape = 0.5

[[samplers]]
kind = "warp_drive"

[[samplers]]
kind = "corv_sgld"
"#;
        let err = parse_config(bad).unwrap_err();
        match err {
            CliError::InvalidConfig(issues) => {
                let paths: Vec<&str> = issues.iter().map(|i| i.path.as_str()).collect();
                assert!(paths.contains(&"target.name"), "{paths:?}");
                assert!(paths.contains(&"samplers[0].kind"), "{paths:?}");
                assert!(paths.contains(&"samplers[1].transform"), "{paths:?}");
            }
            other => panic!("expected invalid-config, got {other}"),
        }
    }

    #[test]
    fn canonical_round_trip_is_semantically_identical() {
        let cfg = parse_config(FIG2).unwrap();
        let rendered = canonical_toml(&cfg);
        let back = parse_config(&rendered).unwrap();
        assert_eq!(cfg, back);
        // and the canonical form is a fixed point
        assert_eq!(rendered, canonical_toml(&back));
    }

    #[test]
    fn transform_resolution_rescales_bounded_domains() {
        let tn = Interval::new(-1.0, 1.0).unwrap();
        let t = resolve_transform("sigmoid", &tn).unwrap();
        assert_eq!(t.codomain(), tn);
        assert!(resolve_transform("softplus", &tn).is_err());
        let pos = Interval::positive_half_line();
        assert!(resolve_transform("softplus", &pos).is_ok());
        assert!(resolve_transform("sigmoid", &pos).is_err());
    }

    #[test]
    fn integer_parameters_coerce_to_floats() {
        let text = r#"
kind = "fig1_density"
[target]
name = "beta"
alpha = 2
beta = 2
[[samplers]]
kind = "mirror_sgld"
stepsize = 1e-3
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.target.unwrap().exact_mean(), Some(0.5));
    }

    #[test]
    fn infinite_truncation_bounds_parse() {
        let text = r#"
kind = "fig1_density"
[target]
name = "truncated_normal"
lower = -inf
upper = inf
[[samplers]]
kind = "sgld"
stepsize = 1e-2
"#;
        let cfg = parse_config(text).unwrap();
        assert!(cfg.target.unwrap().domain().is_unbounded());
    }
}

#[cfg(test)]
mod sampler_shorthand {
    use super::*;

    #[test]
    fn singular_sampler_table_accepted() {
        let cfg = parse_config(
            r#"
kind = "fig1_density"
target = { name = "gamma", shape = 0.5, scale = 0.5 }
sampler = { kind = "corv_sgld", transform = "softplus", stepsize = 1e-3, burn_in = 0, thinning = 1 }
"#,
        )
        .unwrap();
        assert_eq!(cfg.samplers.len(), 1);
        assert_eq!(cfg.samplers[0].label(), "corv_sgld_softplus");
        assert_eq!(cfg.samplers[0].stepsize, 1e-3);
    }
}
