//! Seeded experiment harness behind the command-line tool: oracle bound
//! checks, the noise-level sweep, and the three comparisons against the
//! Tikhonov path (variable selection, matrix completion, deblurring).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linops::{op_norm_default, EntryMask, LinearOperator};
use crate::problems::{self, InverseProblem};
use crate::regularizers::{tv, InnerSchedule, Penalty, Regularizer};
use crate::solvers::{self, IterateView, Metric, SolverConfig, SolverTrace, StepSize, Variant};
use crate::stopping::{self, StoppingCertificate};
use crate::tikhonov::{self, PathConfig};

const SPLIT_SEED_SALT: u64 = 0x5f11_7000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    OracleBounds,
    RateSweep,
    VariableSelection,
    MatrixCompletion,
    Deblurring,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::OracleBounds,
        Experiment::RateSweep,
        Experiment::VariableSelection,
        Experiment::MatrixCompletion,
        Experiment::Deblurring,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::OracleBounds => "oracle_bounds",
            Experiment::RateSweep => "rate_sweep",
            Experiment::VariableSelection => "variable_selection",
            Experiment::MatrixCompletion => "matrix_completion",
            Experiment::Deblurring => "deblurring",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Problem parameters; unset fields take the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemParams {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub sparsity: Option<usize>,
    /// Noise parameter of the sparse regression generator.
    pub noise: Option<f64>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub rank: Option<usize>,
    pub ratio: Option<f64>,
    pub sigma: Option<f64>,
    /// Grayscale text matrix with values in [0, 1]; the built-in phantom
    /// otherwise.
    pub image: Option<PathBuf>,
    pub image_size: Option<usize>,
    pub noise_var: Option<f64>,
    pub alpha: Option<f64>,
    /// Penalty of oracle problems: "zero" or "l1".
    pub penalty: Option<String>,
    /// Norm of the dual certificate of oracle problems.
    pub v_norm: Option<f64>,
    /// Exact noise norm of oracle problems.
    pub delta: Option<f64>,
    /// Noise levels of the sweep.
    pub deltas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub variant: Option<Variant>,
    pub max_iterations: Option<usize>,
    pub record_every: Option<usize>,
    /// Scale of the a-priori stopping index.
    pub c: Option<f64>,
    /// Fixed dual step instead of the norm-based one.
    pub step: Option<f64>,
    /// Inner steps of the TV prox.
    pub inner_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub enabled: Option<bool>,
    pub lambda0: Option<f64>,
    pub grid_factor: Option<f64>,
    pub num_lambdas: Option<usize>,
    pub inner_tol_scale: Option<f64>,
    pub inner_max_iter: Option<usize>,
    /// Least-squares refit on the support before validation.
    pub refit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub trials: usize,
    pub output_dir: Option<PathBuf>,
    /// Fraction of observations held out for validation.
    pub holdout_fraction: f64,
    /// Run trials on the rayon pool.
    pub parallel: bool,
    pub problem: ProblemParams,
    pub solver: SolverParams,
    pub baseline: BaselineParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: 0,
            trials: 1,
            output_dir: None,
            holdout_fraction: 0.1,
            parallel: true,
            problem: ProblemParams::default(),
            solver: SolverParams::default(),
            baseline: BaselineParams::default(),
        }
    }
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment: Some(experiment),
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment
            .ok_or_else(|| Error::Config("no experiment selected".into()))
    }

    /// Checks every parameter before any trial runs.
    pub fn validate(&self) -> Result<()> {
        let exp = self.experiment()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout_fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        let s = Settings::resolve(self, exp)?;
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("alpha", s.alpha)?;
        if s.max_iterations == 0 || s.record_every == 0 {
            return Err(Error::Config("max_iterations and record_every must be >= 1".into()));
        }
        if let Some(c) = s.c {
            pos("c", c)?;
        }
        if let Some(g) = s.step {
            pos("step", g)?;
        }
        match exp {
            Experiment::OracleBounds | Experiment::RateSweep => {
                pos("v_norm", s.v_norm)?;
                let deltas = if exp == Experiment::RateSweep { s.deltas.clone() } else { vec![s.delta] };
                if deltas.is_empty() {
                    return Err(Error::Config("rate sweep needs at least one noise level".into()));
                }
                for d in deltas {
                    if !(d > 0.0 && d <= 1.0) {
                        return Err(Error::Config(format!("noise levels must lie in (0, 1], got {d}")));
                    }
                }
                if !matches!(s.penalty.as_str(), "zero" | "l1") {
                    return Err(Error::Config(format!("oracle penalty must be zero or l1, got {:?}", s.penalty)));
                }
            }
            Experiment::VariableSelection => {
                if s.sparsity > s.p {
                    return Err(Error::Config("sparsity exceeds p".into()));
                }
                if s.n < 2 {
                    return Err(Error::Config("variable selection needs n >= 2".into()));
                }
                pos("noise", s.noise)?;
            }
            Experiment::MatrixCompletion => {
                if s.rank > s.rows.min(s.cols) {
                    return Err(Error::Config("rank exceeds the matrix size".into()));
                }
                if !(s.ratio > 0.0 && s.ratio <= 1.0) {
                    return Err(Error::Config(format!("ratio must lie in (0, 1], got {}", s.ratio)));
                }
                pos("sigma", s.sigma)?;
            }
            Experiment::Deblurring => {
                pos("noise_var", s.noise_var)?;
                if s.image.is_none() && s.image_size < 2 {
                    return Err(Error::Config("image_size must be >= 2".into()));
                }
                if s.inner_steps == 0 {
                    return Err(Error::Config("inner_steps must be >= 1".into()));
                }
            }
        }
        let b = &s.baseline;
        if !(b.grid_factor > 0.0 && b.grid_factor < 1.0) {
            return Err(Error::Config(format!("grid_factor must lie in (0, 1), got {}", b.grid_factor)));
        }
        if b.num_lambdas == 0 || b.inner_max_iter == 0 {
            return Err(Error::Config("num_lambdas and inner_max_iter must be >= 1".into()));
        }
        pos("inner_tol_scale", b.inner_tol_scale)?;
        if let Some(l) = b.lambda0 {
            pos("lambda0", l)?;
        }
        Ok(())
    }
}

/// Fully resolved parameters of one experiment.
#[derive(Debug, Clone)]
struct Settings {
    n: usize,
    p: usize,
    sparsity: usize,
    noise: f64,
    rows: usize,
    cols: usize,
    rank: usize,
    ratio: f64,
    sigma: f64,
    image: Option<PathBuf>,
    image_size: usize,
    noise_var: f64,
    alpha: f64,
    penalty: String,
    v_norm: f64,
    delta: f64,
    deltas: Vec<f64>,
    variant: Variant,
    max_iterations: usize,
    record_every: usize,
    c: Option<f64>,
    step: Option<f64>,
    inner_steps: usize,
    baseline_enabled: bool,
    refit: bool,
    baseline: BaselineSettings,
    holdout_fraction: f64,
}

#[derive(Debug, Clone)]
struct BaselineSettings {
    lambda0: Option<f64>,
    grid_factor: f64,
    num_lambdas: usize,
    inner_tol_scale: f64,
    inner_max_iter: usize,
}

impl Settings {
    fn resolve(cfg: &RunConfig, exp: Experiment) -> Result<Self> {
        let pp = &cfg.problem;
        let sp = &cfg.solver;
        let bp = &cfg.baseline;
        let alpha_default = match exp {
            Experiment::OracleBounds | Experiment::RateSweep => 1.0,
            Experiment::VariableSelection => 0.03,
            Experiment::MatrixCompletion => 5e-4,
            Experiment::Deblurring => 3.0,
        };
        let max_default = match exp {
            Experiment::OracleBounds => 2000,
            Experiment::RateSweep => 0,
            Experiment::VariableSelection => 500,
            Experiment::MatrixCompletion => 1000,
            Experiment::Deblurring => 100,
        };
        let variant_default = match exp {
            Experiment::RateSweep => Variant::Dgd,
            _ => Variant::Adgd,
        };
        let (lambda0_default, factor_default, num_default) = match exp {
            Experiment::Deblurring => (Some(1e5), 0.8, 60),
            _ => (None, 0.5, 20),
        };
        Ok(Self {
            n: pp.n.unwrap_or(match exp {
                Experiment::OracleBounds | Experiment::RateSweep => 30,
                _ => 100,
            }),
            p: pp.p.unwrap_or(match exp {
                Experiment::OracleBounds | Experiment::RateSweep => 50,
                _ => 400,
            }),
            sparsity: pp.sparsity.unwrap_or(10),
            noise: pp.noise.unwrap_or(0.1),
            rows: pp.rows.unwrap_or(100),
            cols: pp.cols.unwrap_or(100),
            rank: pp.rank.unwrap_or(5),
            ratio: pp.ratio.unwrap_or(0.3),
            sigma: pp.sigma.unwrap_or(0.01),
            image: pp.image.clone(),
            image_size: pp.image_size.unwrap_or(64),
            noise_var: pp.noise_var.unwrap_or(0.01),
            alpha: pp.alpha.unwrap_or(alpha_default),
            penalty: pp.penalty.clone().unwrap_or_else(|| "l1".into()),
            v_norm: pp.v_norm.unwrap_or(8.0),
            delta: pp.delta.unwrap_or(0.01),
            deltas: pp.deltas.clone().unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]),
            variant: sp.variant.unwrap_or(variant_default),
            // rate sweeps stop at t_delta; the cap only has to be positive
            max_iterations: sp.max_iterations.unwrap_or(max_default.max(1)),
            record_every: sp.record_every.unwrap_or(1),
            c: sp.c,
            step: sp.step,
            inner_steps: sp.inner_steps.unwrap_or(crate::regularizers::DEFAULT_TV_INNER_STEPS),
            baseline_enabled: bp.enabled.unwrap_or(matches!(
                exp,
                Experiment::VariableSelection | Experiment::MatrixCompletion
            )),
            refit: bp.refit.unwrap_or(exp == Experiment::VariableSelection),
            baseline: BaselineSettings {
                lambda0: bp.lambda0.or(lambda0_default),
                grid_factor: bp.grid_factor.unwrap_or(factor_default),
                num_lambdas: bp.num_lambdas.unwrap_or(num_default),
                inner_tol_scale: bp.inner_tol_scale.unwrap_or(1e-3),
                inner_max_iter: bp.inner_max_iter.unwrap_or(5000),
            },
            holdout_fraction: cfg.holdout_fraction,
        })
    }

    fn path_config(&self, delta: f64) -> PathConfig {
        PathConfig {
            lambda0: self.baseline.lambda0,
            grid_factor: self.baseline.grid_factor,
            num_lambdas: self.baseline.num_lambdas,
            inner_tol_scale: self.baseline.inner_tol_scale,
            inner_max_iter: self.baseline.inner_max_iter,
            delta,
        }
    }

    fn solver_config(&self, variant: Variant, max_iterations: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(variant, max_iterations).recording_every(self.record_every);
        if let Some(g) = self.step {
            cfg.step = StepSize::Fixed(g);
        }
        cfg
    }
}

/// One result row: a trial, or a (trial, noise level) pair for sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub level: Option<f64>,
    /// Error message of a failed trial.
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub config: RunConfig,
    pub rows: Vec<TrialRow>,
    pub aggregates: BTreeMap<String, Aggregate>,
    /// Sum over successful rows of every `<method>_iterations` metric.
    pub iteration_totals: BTreeMap<String, f64>,
    /// Experiment-level results such as the fitted sweep slope.
    pub summary: BTreeMap<String, f64>,
    pub certificates: Vec<StoppingCertificate>,
    #[serde(skip)]
    pub traces: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().flat_map(|r| r.metrics.keys().cloned()).collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.metrics.get(metric).copied()).collect()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregates.get(metric).map(|a| a.mean)
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with a versioned header comment, one line per row.
    pub fn metrics_csv(&self) -> String {
        let names = self.metric_names();
        let mut out = format!("# iterreg-metrics v1 experiment={}\n", self.experiment.name());
        out.push_str("trial,seed,level,status");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for r in &self.rows {
            let level = r.level.map(|l| l.to_string()).unwrap_or_default();
            let status = if r.error.is_some() { "failed" } else { "ok" };
            let _ = write!(out, "{},{},{level},{status}", r.trial, r.seed);
            for n in &names {
                out.push(',');
                if let Some(v) = r.metrics.get(n) {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `metrics.csv`, `report.json` and `traces/*.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
        let write = |path: PathBuf, text: &str| fs::write(&path, text).map_err(|e| Error::io(&path, e));
        write(dir.join("metrics.csv"), &self.metrics_csv())?;
        write(dir.join("report.json"), &serde_json::to_string_pretty(self)?)?;
        for (name, csv) in &self.traces {
            write(traces.join(format!("{name}.csv")), csv)?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Default)]
struct TrialOutput {
    metrics: BTreeMap<String, f64>,
    traces: Vec<(String, String)>,
    certificates: Vec<StoppingCertificate>,
}

impl TrialOutput {
    fn set(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn trace(&mut self, name: String, trace: &SolverTrace) {
        let mut buf = Vec::new();
        if trace.write_csv(&mut buf).is_ok() {
            self.traces.push((name, String::from_utf8_lossy(&buf).into_owned()));
        }
    }
}

/// Runs every trial with seeds `seed + trial` and assembles the report.
pub fn run(config: &RunConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let exp = config.experiment()?;
    let settings = Settings::resolve(config, exp)?;
    let trial = |i: usize| {
        let seed = config.seed.wrapping_add(i as u64);
        (i, seed, run_trial(exp, &settings, seed))
    };
    let results: Vec<_> = if config.parallel {
        (0..config.trials).into_par_iter().map(trial).collect()
    } else {
        (0..config.trials).map(trial).collect()
    };

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut certificates = Vec::new();
    for (i, seed, res) in results {
        match res {
            Ok(outputs) => {
                for (level, out) in outputs {
                    let tag = level.map(|l| format!("_level{l:e}")).unwrap_or_default();
                    traces.extend(out.traces.into_iter().map(|(n, c)| (format!("trial{i}{tag}_{n}"), c)));
                    certificates.extend(out.certificates);
                    rows.push(TrialRow {
                        trial: i,
                        seed,
                        level,
                        error: None,
                        metrics: out.metrics,
                    });
                }
            }
            Err(e) => rows.push(TrialRow {
                trial: i,
                seed,
                level: None,
                error: Some(e.to_string()),
                metrics: BTreeMap::new(),
            }),
        }
    }

    let mut report = ExperimentReport {
        experiment: exp,
        config: config.clone(),
        rows,
        aggregates: BTreeMap::new(),
        iteration_totals: BTreeMap::new(),
        summary: BTreeMap::new(),
        certificates,
        traces,
    };
    for name in report.metric_names() {
        if let Some(a) = Aggregate::of(&report.values(&name)) {
            report.aggregates.insert(name.clone(), a);
        }
        if name.ends_with("_iterations") {
            report.iteration_totals.insert(name.clone(), report.values(&name).iter().sum());
        }
    }
    if exp == Experiment::RateSweep {
        summarize_sweep(&mut report);
    }
    if exp == Experiment::OracleBounds {
        let all = report.rows.iter().all(|r| {
            r.error.is_none()
                && r.metrics.get("dgd_bound_satisfied") == Some(&1.0)
                && r.metrics.get("adgd_bound_satisfied") == Some(&1.0)
        });
        report.summary.insert("bound_satisfied".into(), f64::from(u8::from(all)));
    }
    Ok(report)
}

type LevelOutputs = Vec<(Option<f64>, TrialOutput)>;

fn run_trial(exp: Experiment, s: &Settings, seed: u64) -> Result<LevelOutputs> {
    Ok(match exp {
        Experiment::OracleBounds => vec![(None, oracle_bounds_trial(s, seed)?)],
        Experiment::RateSweep => rate_sweep_trial(s, seed)?,
        Experiment::VariableSelection => vec![(None, variable_selection_trial(s, seed)?)],
        Experiment::MatrixCompletion => vec![(None, matrix_completion_trial(s, seed)?)],
        Experiment::Deblurring => vec![(None, deblurring_trial(s, seed)?)],
    })
}

fn oracle_regularizer(s: &Settings) -> Result<Regularizer> {
    match s.penalty.as_str() {
        "zero" => Regularizer::zero(s.alpha),
        _ => Regularizer::elastic_net(s.alpha),
    }
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The norm that defines the dual step actually taken, `sqrt(alpha / gamma)`.
/// Bound constants built from it hold for that step.
pub fn step_norm(trace: &SolverTrace) -> f64 {
    (trace.alpha / trace.gamma).sqrt()
}

/// Certificate for an oracle problem and the step of `trace`.
pub fn oracle_certificate(
    problem: &InverseProblem,
    trace: &SolverTrace,
    c: Option<f64>,
) -> Result<StoppingCertificate> {
    let v = problem
        .dual_certificate
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("problem has no dual certificate".into()))?;
    stopping::make_certificate(trace.variant, step_norm(trace), norm(v.view()), trace.alpha, problem.delta, c)
}

/// Runs `variant` on an oracle problem with an error-to-truth metric named
/// `error`.
pub fn run_with_error(
    problem: &InverseProblem,
    reg: &Regularizer,
    cfg: &SolverConfig,
    exact: bool,
) -> Result<SolverTrace> {
    let truth = problem
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("problem has no ground truth".into()))?;
    let y = if exact {
        problem.y_exact.as_ref().ok_or_else(|| Error::InvalidArgument("problem has no exact data".into()))?
    } else {
        &problem.y_obs
    };
    let mut reg = reg.clone();
    reg.reset();
    let mut metrics = [Metric::new("error", |it: &IterateView| distance(it.output(), truth.view()))];
    solvers::run(&problem.op, y.view(), &mut reg, cfg, &mut metrics)
}

fn oracle_bounds_trial(s: &Settings, seed: u64) -> Result<TrialOutput> {
    let reg = oracle_regularizer(s)?;
    let pb = problems::random_oracle(s.n, s.p, &reg, s.v_norm, s.delta, seed)?;
    let mut out = TrialOutput::default();

    let mut dgd_stopped = f64::NAN;
    let mut dgd_t = 0;
    for variant in [Variant::Dgd, Variant::Adgd] {
        let name = variant.name();
        // certificate first, to size the run past the stopping index
        let probe = run_with_error(&pb, &reg, &s.solver_config(variant, 1), false)?;
        let cert = oracle_certificate(&pb, &probe, s.c)?;
        let max_it = s.max_iterations.max(2 * cert.t_delta);
        let trace = run_with_error(&pb, &reg, &s.solver_config(variant, max_it), false)?;
        let errors = trace.metric("error").unwrap_or_default();
        let satisfied = errors
            .iter()
            .filter(|(t, _)| *t >= cert.first_valid())
            .all(|&(t, e)| e <= cert.bound_real(t as f64));
        let stopped = trace
            .record_at(cert.t_delta)
            .map(|r| r.metrics[0])
            .unwrap_or(f64::NAN);
        out.set(format!("{name}_t_delta"), cert.t_delta as f64);
        out.set(format!("{name}_stopped_error"), stopped);
        out.set(format!("{name}_final_bound"), cert.final_bound);
        out.set(format!("{name}_bound_satisfied"), f64::from(u8::from(satisfied)));
        out.set(
            format!("{name}_final_bound_satisfied"),
            f64::from(u8::from(stopped <= cert.final_bound)),
        );
        out.set(format!("{name}_iterations"), (cert.t_delta + 1) as f64);
        match variant {
            Variant::Dgd => {
                dgd_stopped = stopped;
                dgd_t = cert.t_delta;
            }
            Variant::Adgd => {
                let reach = errors.iter().find(|(_, e)| *e <= dgd_stopped).map(|&(t, _)| t);
                if let Some(t) = reach {
                    out.set("adgd_iterations_to_dgd_error", t as f64);
                    out.set("adgd_to_dgd_iteration_ratio", t as f64 / dgd_t.max(1) as f64);
                }
            }
        }
        out.certificates.push(cert);
        out.trace(name.to_string(), &trace);
    }
    Ok(out)
}

fn rate_sweep_trial(s: &Settings, seed: u64) -> Result<LevelOutputs> {
    let reg = oracle_regularizer(s)?;
    let mut outs = Vec::new();
    let mut points = Vec::new();
    for &delta in &s.deltas {
        let pb = problems::random_oracle(s.n, s.p, &reg, s.v_norm, delta, seed)?;
        let probe = run_with_error(&pb, &reg, &s.solver_config(s.variant, 1), false)?;
        let cert = oracle_certificate(&pb, &probe, s.c)?;
        let cfg = s.solver_config(s.variant, cert.t_delta).without_dual_objective();
        let trace = run_with_error(&pb, &reg, &cfg, false)?;
        let stopped = trace.record_at(cert.t_delta).map(|r| r.metrics[0]).unwrap_or(f64::NAN);
        let mut out = TrialOutput::default();
        out.set("delta", delta);
        out.set("t_delta", cert.t_delta as f64);
        out.set("stopped_error", stopped);
        out.set("final_bound", cert.final_bound);
        out.set("within_bound", f64::from(u8::from(stopped <= cert.final_bound)));
        out.set(format!("{}_iterations", s.variant.name()), (cert.t_delta + 1) as f64);
        out.certificates.push(cert);
        points.push((delta, stopped));
        outs.push((Some(delta), out));
    }
    let slope = loglog_slope(&points);
    for (_, o) in &mut outs {
        o.set("slope", slope);
    }
    Ok(outs)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn summarize_sweep(report: &mut ExperimentReport) {
    let mut by_level: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in report.rows.iter().filter(|r| r.error.is_none()) {
        if let (Some(l), Some(e)) = (r.level, r.metrics.get("stopped_error")) {
            by_level.entry(l.to_bits()).or_insert((l, Vec::new())).1.push(*e);
        }
    }
    let points: Vec<(f64, f64)> = by_level
        .values()
        .map(|(l, e)| (*l, e.iter().sum::<f64>() / e.len() as f64))
        .collect();
    report.summary.insert("slope".into(), loglog_slope(&points));
    let within = report.values("within_bound").iter().all(|&v| v == 1.0);
    report.summary.insert("within_bound".into(), f64::from(u8::from(within)));
}

fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), idx)
}

fn select(v: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Holdout stopping on a metric named `validation`, returning the trace and
/// the output at the chosen iteration.
fn holdout_run(
    op: &LinearOperator,
    y: ArrayView1<f64>,
    reg: &mut Regularizer,
    cfg: SolverConfig,
    validation: impl FnMut(ArrayView1<f64>) -> f64,
) -> Result<(SolverTrace, stopping::HoldoutChoice, Array1<f64>)> {
    let mut validation = validation;
    let mut best: Option<(f64, Array1<f64>)> = None;
    let mut metrics = [Metric::new("validation", |it: &IterateView| {
        let score = validation(it.output());
        // the strict comparison keeps the earliest minimizer, as holdout_stop does
        if !score.is_nan() && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, it.output().to_owned()));
        }
        score
    })];
    let trace = solvers::run(op, y, reg, &cfg, &mut metrics)?;
    drop(metrics);
    let choice = stopping::holdout_stop_by_metric(&trace, "validation")?;
    let estimate = best.map(|b| b.1).unwrap_or_else(|| trace.final_output().clone());
    Ok((trace, choice, estimate))
}

fn variable_selection_trial(s: &Settings, seed: u64) -> Result<TrialOutput> {
    let pb = problems::gen_sparse_regression(s.n, s.p, s.sparsity, s.noise, seed)?;
    let LinearOperator::Dense(x) = &pb.op else { unreachable!() };
    let (train, val) = problems::holdout_split(s.n, s.holdout_fraction, seed ^ SPLIT_SEED_SALT)?;
    let x_train = LinearOperator::Dense(select_rows(x, &train));
    let y_train = select(&pb.y_obs, &train);
    let x_val = select_rows(x, &val);
    let y_val = select(&pb.y_obs, &val);
    let score = |w: ArrayView1<f64>| {
        let r = x_val.dot(&w) - &y_val;
        r.dot(&r)
    };

    let mut out = TrialOutput::default();
    let mut reg = Regularizer::elastic_net(s.alpha)?;
    let (trace, choice, w) = holdout_run(&x_train, y_train.view(), &mut reg, s.solver_config(s.variant, s.max_iterations), score)?;
    record_estimate(&mut out, "iterative", &pb, w.view())?;
    out.set("iterative_iterations", (choice.t_star + 1) as f64);
    out.set("iterative_t_star", choice.t_star as f64);
    out.set("iterative_validation", choice.score);
    out.trace(s.variant.name().to_string(), &trace);

    if s.baseline_enabled {
        let mut reg = Regularizer::elastic_net(s.alpha)?;
        let path = tikhonov::solve_path(&x_train, y_train.view(), &mut reg, &s.path_config(s.noise))?;
        let path = tikhonov::select_and_refit(path, |w| score(w.view()), s.refit, &x_train, y_train.view())?;
        let w = path.estimate().cloned().unwrap_or_else(|| Array1::zeros(s.p));
        record_estimate(&mut out, "tikhonov", &pb, w.view())?;
        record_path(&mut out, &path);
    }
    Ok(out)
}

fn record_estimate(out: &mut TrialOutput, prefix: &str, pb: &InverseProblem, w: ArrayView1<f64>) -> Result<()> {
    let m = problems::metrics(pb, w)?;
    let fields = [
        ("prediction_error", m.prediction_error_percent),
        ("false_positives", m.false_positives.map(|v| v as f64)),
        ("false_negatives", m.false_negatives.map(|v| v as f64)),
        ("rmse", m.rmse),
        ("rmse_conventional", m.rmse_conventional),
        ("psnr", m.psnr),
    ];
    for (name, v) in fields {
        if let Some(v) = v {
            out.set(format!("{prefix}_{name}"), v);
        }
    }
    Ok(())
}

fn record_path(out: &mut TrialOutput, path: &tikhonov::PathResult) {
    out.set("tikhonov_iterations", path.total_iterations as f64);
    if let Some(i) = path.selected {
        out.set("tikhonov_lambda", path.points[i].lambda);
        if let Some(v) = path.points[i].validation {
            out.set("tikhonov_validation", v);
        }
    }
    out.set("tikhonov_lambda0_warning", f64::from(u8::from(path.lambda0_warning)));
    if let (Some(a), Some(b)) = (out.metrics.get("iterative_iterations"), out.metrics.get("tikhonov_iterations")) {
        let ratio = a / b;
        out.set("iteration_ratio", ratio);
    }
}

fn matrix_completion_trial(s: &Settings, seed: u64) -> Result<TrialOutput> {
    let pb = problems::gen_matrix_completion(s.rows, s.cols, s.rank, s.ratio, s.sigma, seed)?;
    let LinearOperator::EntryMask(mask) = &pb.op else { unreachable!() };
    let known = mask.indices().to_vec();
    let (train, val) = problems::holdout_split(known.len(), s.holdout_fraction, seed ^ SPLIT_SEED_SALT)?;
    let train_idx: Vec<usize> = train.iter().map(|&i| known[i]).collect();
    let val_idx: Vec<usize> = val.iter().map(|&i| known[i]).collect();
    let train_op = LinearOperator::EntryMask(EntryMask::from_flat(s.rows, s.cols, train_idx.clone())?);
    let mut y_train = Array1::zeros(s.rows * s.cols);
    for &k in &train_idx {
        y_train[k] = pb.y_obs[k];
    }
    let score = |w: ArrayView1<f64>| val_idx.iter().map(|&k| (w[k] - pb.y_obs[k]).powi(2)).sum::<f64>();
    let penalty = Penalty::Nuclear {
        rows: s.rows,
        cols: s.cols,
    };

    let mut out = TrialOutput::default();
    let mut reg = Regularizer::new(s.alpha, penalty)?;
    let (trace, choice, w) = holdout_run(&train_op, y_train.view(), &mut reg, s.solver_config(s.variant, s.max_iterations), score)?;
    record_estimate(&mut out, "iterative", &pb, w.view())?;
    out.set("iterative_iterations", (choice.t_star + 1) as f64);
    out.set("iterative_t_star", choice.t_star as f64);
    out.set("iterative_validation", choice.score);
    out.trace(s.variant.name().to_string(), &trace);

    if s.baseline_enabled {
        let mut reg = Regularizer::new(s.alpha, penalty)?;
        let path = tikhonov::solve_path(&train_op, y_train.view(), &mut reg, &s.path_config(s.sigma))?;
        let path = tikhonov::select_and_refit(path, |w| score(w.view()), s.refit, &train_op, y_train.view())?;
        let w = path.estimate().cloned().unwrap_or_else(|| Array1::zeros(s.rows * s.cols));
        record_estimate(&mut out, "tikhonov", &pb, w.view())?;
        record_path(&mut out, &path);
    }
    Ok(out)
}

/// The grayscale image of a deblurring run.
fn deblur_image(s: &Settings) -> Result<Array2<f64>> {
    match &s.image {
        Some(p) => io::read_matrix(p),
        None => Ok(problems::phantom(s.image_size)),
    }
}

fn deblurring_trial(s: &Settings, seed: u64) -> Result<TrialOutput> {
    let image = deblur_image(s)?;
    let (rows, cols) = image.dim();
    let pb = problems::gen_deblur(&image, s.noise_var, seed)?;
    let truth = pb.ground_truth.clone().unwrap_or_default();
    let size = rows * cols;
    let (train, val) = problems::holdout_split(size, s.holdout_fraction, seed ^ SPLIT_SEED_SALT)?;
    let train_mask = LinearOperator::EntryMask(EntryMask::from_flat(rows, cols, train.clone())?);
    let train_op = LinearOperator::compose(train_mask, pb.op.clone())?;
    let mut y_train = Array1::zeros(size);
    for &k in &train {
        y_train[k] = pb.y_obs[k];
    }
    let blur = pb.op.clone();
    let score = |w: ArrayView1<f64>| {
        let bw = blur.apply(w).unwrap_or_else(|_| Array1::from_elem(size, f64::NAN));
        val.iter().map(|&k| (bw[k] - pb.y_obs[k]).powi(2)).sum::<f64>()
    };
    let penalty = Penalty::Tv {
        rows,
        cols,
        inner: InnerSchedule::Fixed(s.inner_steps),
    };

    let mut out = TrialOutput::default();
    let input_psnr = problems::psnr(pb.y_obs.view(), truth.view())?;
    out.set("input_psnr", input_psnr);

    let mut reg = Regularizer::new(s.alpha, penalty)?;
    let (trace, choice, w) = holdout_run(&train_op, y_train.view(), &mut reg, s.solver_config(s.variant, s.max_iterations), score)?;
    record_estimate(&mut out, "iterative", &pb, w.view())?;
    out.set("iterative_iterations", (choice.t_star + 1) as f64);
    out.set("iterative_t_star", choice.t_star as f64);
    out.set("iterative_inner_iterations", trace.inner_iterations as f64);
    if let Some(p) = out.metrics.get("iterative_psnr").copied() {
        out.set("psnr_gain", p - input_psnr);
    }
    out.trace(s.variant.name().to_string(), &trace);

    // inner solver check on the prox argument of the final dual iterate
    let arg = -train_op.adjoint(trace.final_dual.view())? / s.alpha;
    let inner = tv::denoise(arg.view(), rows, cols, 1.0 / s.alpha, None, s.inner_steps);
    let first = inner.history[0];
    let last = *inner.history.last().unwrap_or(&first);
    out.set("tv_inner_start_objective", first);
    out.set("tv_inner_final_objective", last);
    out.set("tv_inner_decreased", f64::from(u8::from(last < first)));

    if s.baseline_enabled {
        let mut reg = Regularizer::new(s.alpha, penalty)?;
        let path = tikhonov::solve_path(&train_op, y_train.view(), &mut reg, &s.path_config(s.noise_var.sqrt()))?;
        let path = tikhonov::select_and_refit(path, |w| score(w.view()), false, &train_op, y_train.view())?;
        let w = path.estimate().cloned().unwrap_or_else(|| Array1::zeros(size));
        record_estimate(&mut out, "tikhonov", &pb, w.view())?;
        record_path(&mut out, &path);
    }
    Ok(out)
}

/// Side-by-side table of two reports of the same experiment:
/// `metric, a_mean, a_std, b_mean, b_std, delta, ratio` with
/// `delta = b - a` and `ratio = b / a`.
pub fn compare(a: &ExperimentReport, b: &ExperimentReport) -> Result<String> {
    if a.experiment != b.experiment {
        return Err(Error::InvalidArgument(format!(
            "cannot compare {} with {}",
            a.experiment.name(),
            b.experiment.name()
        )));
    }
    let mut names: Vec<&String> = a.aggregates.keys().chain(b.aggregates.keys()).collect();
    names.sort();
    names.dedup();
    let mut out = format!("# iterreg-compare v1 experiment={}\n", a.experiment.name());
    out.push_str("metric,a_mean,a_std,b_mean,b_std,delta,ratio\n");
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for n in names {
        let (x, y) = (a.aggregates.get(n), b.aggregates.get(n));
        let delta = x.zip(y).map(|(x, y)| y.mean - x.mean);
        let ratio = x.zip(y).and_then(|(x, y)| (x.mean != 0.0).then(|| y.mean / x.mean));
        let _ = writeln!(
            out,
            "{n},{},{},{},{},{},{}",
            cell(x.map(|v| v.mean)),
            cell(x.map(|v| v.std)),
            cell(y.map(|v| v.mean)),
            cell(y.map(|v| v.std)),
            cell(delta),
            cell(ratio)
        );
    }
    Ok(out)
}

/// Estimated `||X||` of a problem's operator, for reports.
pub fn operator_norm(problem: &InverseProblem) -> Result<f64> {
    Ok(op_norm_default(&problem.op)?.value)
}
