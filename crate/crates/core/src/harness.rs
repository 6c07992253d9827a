//! Experiment runner behind the `pdr-anpg` binary: JSON configs, seeded
//! batches, per-seed CSV traces, summary JSON and the property suite.
//!
//! Trace CSV columns: `k, optimality_gap, violation, phi_surrogate,
//! omega_norm, lambda, samples_cumulative`. Sweep CSV columns:
//! `epsilon, samples, final_gap, final_violation`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmdp::{load_cmdp, CmdpSpec};
use crate::error::{Error, Result};
use crate::oracle::{max_cost_value, solve_constrained_optimum, solve_regularized_saddle, ConstrainedOptimum};
use crate::outer::{
    anchor_parameters, calibrate, cap_iterations, derive_schedule, epsilon_bias_proxy, pilot_parameters,
    run_pdr_anpg, Calibration, Instrumentation, RunMode, RunOptions, RunRecord, Schedule, ScheduleConfig,
    ScheduleOverrides,
};
use crate::policy::{FeatureTable, PolicyParams};
use crate::rng::stream_rng;
use crate::verify::{run_suite, CheckOutcome, VerifySettings};

pub const DEFAULT_MU_FLOOR: f64 = 1e-3;
pub const DEFAULT_SAMPLE_CAP: u64 = 100_000_000;
const CALIBRATION_STREAM: u64 = 0xCA1B;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Stochastic,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    #[default]
    Tabular,
    /// Requires `features` in the CMDP file.
    LogLinear,
}

/// Schedule inputs; measured constants are filled in when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon_bias: f64,
    /// Defaults to `min(max_pi J_c, 1/(1-gamma))`.
    #[serde(default)]
    pub c_slat: Option<f64>,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub mu_f: Option<f64>,
    #[serde(default = "default_c_bar")]
    pub c_bar: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub overrides: ScheduleOverrides,
}

fn default_c_bar() -> f64 {
    4.0
}

fn default_c() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub probes: Option<usize>,
    pub mc_samples: Option<usize>,
    pub unbiased_tuples: Option<usize>,
    pub variance_tuples: Option<usize>,
    pub policy_pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative paths resolve against the config file's directory.
    pub cmdp_path: PathBuf,
    pub schedule: ScheduleSection,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub record_stride: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub parameterization: ParamKind,
    #[serde(default)]
    pub mu_floor: Option<f64>,
    /// Expected transitions per run in stochastic mode.
    #[serde(default)]
    pub sample_cap: Option<u64>,
    #[serde(default = "default_true")]
    pub instrumentation: bool,
    #[serde(default)]
    pub verify: VerifySection,
}

/// Command-line adjustments applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub seed_offset: u64,
    pub output_dir: Option<PathBuf>,
    pub exact: bool,
    pub k_override: Option<u64>,
    pub record_stride: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })
    }

    /// Reads `path` and resolves `cmdp_path` and `output_dir` against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json_str(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if config.cmdp_path.is_relative() {
            config.cmdp_path = base.join(&config.cmdp_path);
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "must be nonempty"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("seeds", "must be distinct"));
        }
        if self.record_stride == 0 {
            return Err(Error::validation("record_stride", "must be positive"));
        }
        if let Some(floor) = self.mu_floor {
            if !(floor > 0.0) {
                return Err(Error::validation("mu_floor", format!("{floor} must be positive")));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, cli: &CliOverrides) -> Result<()> {
        if cli.seed_offset != 0 {
            for s in &mut self.seeds {
                *s = s
                    .checked_add(cli.seed_offset)
                    .ok_or_else(|| Error::validation("seeds", "seed offset overflows"))?;
            }
        }
        if let Some(dir) = &cli.output_dir {
            self.output_dir = dir.clone();
        }
        if cli.exact {
            self.mode = Mode::Exact;
        }
        if let Some(k) = cli.k_override {
            self.schedule.overrides.k = Some(k);
        }
        if let Some(stride) = cli.record_stride {
            self.record_stride = stride;
        }
        self.validate()
    }
}

/// Everything a run needs that does not depend on the seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: CmdpSpec,
    pub base: PolicyParams,
    pub schedule: Schedule,
    /// `K` after the stochastic sample cap.
    pub k_effective: u64,
    pub c_slat: f64,
    pub calibration: Calibration,
    pub optimum: ConstrainedOptimum,
    pub instrumentation: Instrumentation,
    pub warnings: Vec<String>,
}

fn base_params(kind: ParamKind, spec: &CmdpSpec, features: Option<FeatureTable>) -> Result<PolicyParams> {
    match kind {
        ParamKind::Tabular => Ok(PolicyParams::tabular(spec.n_states(), spec.n_actions())),
        ParamKind::LogLinear => features
            .map(|f| PolicyParams::log_linear(Arc::new(f)))
            .ok_or_else(|| Error::validation("features", "log_linear parameterization needs features in the CMDP file")),
    }
}

/// Loads the CMDP, solves the oracles, measures constants and derives the schedule.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let file = load_cmdp(&config.cmdp_path)?;
    let spec = file.spec;
    let base = base_params(config.parameterization, &spec, file.features)?;
    let gamma = spec.gamma();
    let sec = &config.schedule;
    let mut warnings = Vec::new();

    let c_slat = match sec.c_slat {
        Some(c) => c,
        None => max_cost_value(&spec)?.min(1.0 / (1.0 - gamma)),
    };
    if !(c_slat > 0.0) {
        return Err(Error::ScheduleInfeasible(format!(
            "no strictly feasible policy: max J_c = {c_slat}"
        )));
    }
    let optimum = solve_constrained_optimum(&spec)?;

    // tau and lambda_max do not depend on the measured constants, so the
    // regularized saddle can anchor the calibration points.
    let probe = derive_schedule(
        &ScheduleConfig {
            epsilon: sec.epsilon,
            epsilon_bias: sec.epsilon_bias,
            c_slat,
            g: 1.0,
            b: 1.0,
            mu_f: 1.0,
            c_bar: sec.c_bar,
            c: sec.c,
            overrides: sec.overrides.clone(),
        },
        gamma,
    )?;
    let saddle = solve_regularized_saddle(&spec, probe.tau, probe.lambda_max)?;
    let mut rng = stream_rng(CALIBRATION_STREAM, 0);
    let anchor = anchor_parameters(&base, &saddle);
    let points = pilot_parameters(&base, anchor.as_ref(), 8, 0.1, &mut rng)?;
    let mu_floor = config.mu_floor.unwrap_or(DEFAULT_MU_FLOOR);
    let calibration = calibrate(&spec, &points, mu_floor, &mut rng)?;
    if calibration.clamped {
        warnings.push(format!(
            "measured Fisher floor {:.3e} clamped to {mu_floor:.1e}",
            calibration.mu_f_measured
        ));
    }
    let g = sec.g.unwrap_or(calibration.g);
    let schedule = derive_schedule(
        &ScheduleConfig {
            epsilon: sec.epsilon,
            epsilon_bias: sec.epsilon_bias,
            c_slat,
            g: if g > 0.0 { g } else { 1.0 },
            b: sec.b.unwrap_or(calibration.b).max(f64::MIN_POSITIVE),
            mu_f: sec.mu_f.unwrap_or(calibration.mu_f),
            c_bar: sec.c_bar,
            c: sec.c,
            overrides: sec.overrides.clone(),
        },
        gamma,
    )?;
    if !schedule.overridden.is_empty() {
        warnings.push(format!(
            "overridden schedule values {:?}: the convergence guarantee does not apply verbatim",
            schedule.overridden
        ));
    }
    if optimum.lambda_star > schedule.lambda_max {
        warnings.push(format!(
            "lambda* = {:.6} exceeds lambda_max = {:.6}",
            optimum.lambda_star, schedule.lambda_max
        ));
    }
    let k_effective = match config.mode {
        Mode::Exact => schedule.k,
        Mode::Stochastic => {
            let cap = config.sample_cap.unwrap_or(DEFAULT_SAMPLE_CAP);
            let k = cap_iterations(schedule.k, schedule.h, spec.n_actions(), gamma, cap);
            if k < schedule.k {
                warnings.push(format!("sample cap {cap} limits K from {} to {k}", schedule.k));
            }
            k
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Prepared {
        instrumentation: Instrumentation {
            j_r_star: optimum.j_r_star,
            saddle,
        },
        spec,
        base,
        schedule,
        k_effective,
        c_slat,
        calibration,
        optimum,
        warnings,
    })
}

/// Writes through a sibling temporary file and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn records_to_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub csv: PathBuf,
    pub final_gap: f64,
    pub final_violation: f64,
    pub final_lambda: f64,
    pub samples: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean_final_gap: f64,
    pub mean_final_violation: f64,
    pub median_final_gap: f64,
    pub median_final_violation: f64,
    pub mean_samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEcho {
    pub j_r_star: f64,
    pub lambda_star: f64,
    pub max_jc: f64,
    pub lambda_star_tau: f64,
    pub regularized_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleEcho {
    pub epsilon: f64,
    pub epsilon_bias: f64,
    pub c_slat: f64,
    pub tau: f64,
    pub eta: f64,
    pub k: u64,
    pub k_effective: u64,
    pub h: usize,
    pub lambda_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
    pub delta: f64,
    pub g: f64,
    pub b: f64,
    pub mu_f: f64,
    pub overridden: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub cmdp_path: PathBuf,
    pub record_stride: u64,
    pub schedule: ScheduleEcho,
    pub calibration: Calibration,
    pub oracle: OracleEcho,
    /// Transferred compatible error at the first seed's final iterate.
    pub epsilon_bias_proxy: f64,
    pub warnings: Vec<String>,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Aggregate,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn aggregate(seeds: &[SeedResult]) -> Aggregate {
    let n = seeds.len() as f64;
    let mut gaps: Vec<f64> = seeds.iter().map(|s| s.final_gap).collect();
    let mut viols: Vec<f64> = seeds.iter().map(|s| s.final_violation).collect();
    Aggregate {
        mean_final_gap: gaps.iter().sum::<f64>() / n,
        mean_final_violation: viols.iter().sum::<f64>() / n,
        median_final_gap: median(&mut gaps),
        median_final_violation: median(&mut viols),
        mean_samples: seeds.iter().map(|s| s.samples as f64).sum::<f64>() / n,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every seed of an already-adjusted config and writes its artifacts.
pub fn run_config(config: &ExperimentConfig) -> Result<RunSummary> {
    let prepared = prepare(config)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut schedule = prepared.schedule.clone();
    schedule.k = prepared.k_effective;

    let outputs: Vec<Result<(SeedResult, PolicyParams, f64)>> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mode = match config.mode {
                Mode::Exact => RunMode::Exact,
                Mode::Stochastic => RunMode::Stochastic { seed },
            };
            let options = RunOptions {
                record_stride: config.record_stride,
                instrumentation: config.instrumentation.then(|| prepared.instrumentation.clone()),
                ..RunOptions::default()
            };
            let out = run_pdr_anpg(&prepared.spec, &prepared.base, &schedule, mode, &options)?;
            let path = dir.join(format!("seed_{seed}.csv"));
            write_atomic(&path, &records_to_csv(&out.records)?)?;
            let last = out.records.last();
            Ok((
                SeedResult {
                    seed,
                    csv: path,
                    final_gap: last.map_or(f64::NAN, |r| r.optimality_gap),
                    final_violation: last.map_or(f64::NAN, |r| r.violation),
                    final_lambda: out.dual.lambda,
                    samples: last.map_or(0, |r| r.samples_cumulative),
                    rows: out.records.len(),
                },
                out.params,
                out.dual.lambda,
            ))
        })
        .collect();
    let mut seeds = Vec::with_capacity(outputs.len());
    let mut first_final = None;
    for o in outputs {
        let (result, params, lambda) = o?;
        first_final.get_or_insert((params, lambda));
        seeds.push(result);
    }
    let (final_params, final_lambda) = first_final.expect("seeds are nonempty");
    let saddle = &prepared.instrumentation.saddle;
    let proxy = epsilon_bias_proxy(&prepared.spec, &final_params, final_lambda, schedule.tau, &saddle.pi_star_tau)?;

    let s = &prepared.schedule;
    let summary = RunSummary {
        mode: config.mode,
        cmdp_path: config.cmdp_path.clone(),
        record_stride: config.record_stride,
        schedule: ScheduleEcho {
            epsilon: config.schedule.epsilon,
            epsilon_bias: config.schedule.epsilon_bias,
            c_slat: prepared.c_slat,
            tau: s.tau,
            eta: s.eta,
            k: s.k,
            k_effective: prepared.k_effective,
            h: s.h,
            lambda_max: s.lambda_max,
            alpha: s.rates.alpha,
            beta: s.rates.beta,
            xi: s.rates.xi,
            delta: s.rates.delta,
            g: config.schedule.g.unwrap_or(prepared.calibration.g),
            b: config.schedule.b.unwrap_or(prepared.calibration.b),
            mu_f: config.schedule.mu_f.unwrap_or(prepared.calibration.mu_f),
            overridden: s.overridden.clone(),
        },
        calibration: prepared.calibration,
        oracle: OracleEcho {
            j_r_star: prepared.optimum.j_r_star,
            lambda_star: prepared.optimum.lambda_star,
            max_jc: prepared.optimum.max_jc,
            lambda_star_tau: saddle.lambda_star_tau,
            regularized_value: saddle.lagrangian_value,
        },
        epsilon_bias_proxy: proxy,
        warnings: prepared.warnings.clone(),
        aggregate: aggregate(&seeds),
        seeds,
    };
    let json = serde_json::to_vec_pretty(&summary).map_err(|source| Error::Json {
        path: dir.join("summary.json"),
        source,
    })?;
    write_atomic(&dir.join("summary.json"), &json)?;
    Ok(summary)
}

pub fn cmd_run(config_path: &Path, cli: &CliOverrides) -> Result<RunSummary> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.apply(cli)?;
    run_config(&config)
}

/// Runs the property suite on the configured CMDP with the first seed.
pub fn cmd_verify(config_path: &Path, cli: &CliOverrides) -> Result<Vec<CheckOutcome>> {
    let mut config = ExperimentConfig::load(config_path)?;
    config.apply(cli)?;
    let file = load_cmdp(&config.cmdp_path)?;
    let base = base_params(config.parameterization, &file.spec, file.features)?;
    let spec = file.spec;
    let mut settings = VerifySettings::for_spec(&spec, config.seeds[0])?;
    if let Some(c) = config.schedule.c_slat {
        settings.c_slat = c;
        settings.lambda_max = 4.0 / ((1.0 - spec.gamma()) * c);
    }
    settings.saddle_tau = config.schedule.epsilon.max(config.schedule.epsilon_bias.powf(1.0 / 6.0));
    let v = &config.verify;
    settings.probes = v.probes.unwrap_or(settings.probes);
    settings.mc_samples = v.mc_samples.unwrap_or(settings.mc_samples);
    settings.unbiased_tuples = v.unbiased_tuples.unwrap_or(settings.unbiased_tuples);
    settings.variance_tuples = v.variance_tuples.unwrap_or(settings.variance_tuples);
    settings.policy_pairs = v.policy_pairs.unwrap_or(settings.policy_pairs);
    run_suite(&spec, &base, &settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub samples: f64,
    pub final_gap: f64,
    pub final_violation: f64,
}

/// One run per epsilon under `output_dir/eps_<epsilon>`, then `sweep.csv` with seed means.
pub fn cmd_sweep(config_path: &Path, epsilons: &[f64], cli: &CliOverrides) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(Error::validation("epsilons", "must be nonempty"));
    }
    let mut config = ExperimentConfig::load(config_path)?;
    config.apply(cli)?;
    let root = config.output_dir.clone();
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut c = config.clone();
        c.schedule.epsilon = eps;
        c.output_dir = root.join(format!("eps_{eps}"));
        let summary = run_config(&c)?;
        rows.push(SweepRow {
            epsilon: eps,
            samples: summary.aggregate.mean_samples,
            final_gap: summary.aggregate.mean_final_gap,
            final_violation: summary.aggregate.mean_final_violation,
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    fs::create_dir_all(&root).map_err(io_err(&root))?;
    write_atomic(&root.join("sweep.csv"), &bytes)?;
    Ok(rows)
}

/// Process exit code for an error: 2 config, 3 schedule, 4 divergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_)
        | Error::Validation { .. }
        | Error::Dimension(_)
        | Error::Domain(_)
        | Error::Io { .. }
        | Error::Json { .. }
        | Error::Csv(_) => 2,
        Error::ScheduleInfeasible(_) | Error::Infeasible { .. } => 3,
        Error::Diverged(_) => 4,
        Error::NonConvergence { .. } | Error::LinearProgram(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json(cmdp: &str) -> String {
        format!(
            r#"{{"cmdp_path": "{cmdp}", "schedule": {{"epsilon": 0.2}}, "mode": "exact",
                "seeds": [1, 2], "record_stride": 10, "output_dir": "out"}}"#
        )
    }

    #[test]
    fn config_defaults_and_overrides() {
        let mut c = ExperimentConfig::from_json_str(&sample_json("m.json"), Path::new("c.json")).unwrap();
        assert_eq!(c.parameterization, ParamKind::Tabular);
        assert!(c.instrumentation);
        assert_eq!(c.schedule.c_bar, 4.0);
        c.apply(&CliOverrides {
            seed_offset: 10,
            k_override: Some(7),
            record_stride: Some(3),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.seeds, vec![11, 12]);
        assert_eq!(c.schedule.overrides.k, Some(7));
        assert_eq!(c.record_stride, 3);
    }

    #[test]
    fn config_rejects_duplicates_and_unknown_fields() {
        let mut c = ExperimentConfig::from_json_str(&sample_json("m.json"), Path::new("c.json")).unwrap();
        c.seeds = vec![3, 3];
        assert!(matches!(c.validate(), Err(Error::Validation { .. })));
        let bad = sample_json("m.json").replace("\"mode\"", "\"bogus\": 1, \"mode\"");
        assert!(ExperimentConfig::from_json_str(&bad, Path::new("c.json")).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Diverged("x".into())), 4);
        assert_eq!(exit_code(&Error::ScheduleInfeasible("x".into())), 3);
        assert_eq!(exit_code(&Error::validation("seeds", "x")), 2);
    }
}
