//! Batch runner behind the `flagcheck` binary: property sweeps, violation
//! searches and regularization probes, each producing a deterministic report.

pub mod config;

use std::collections::BTreeMap;

use flagcheck_core::checks::{CheckResult, Checker, Property, Regularization, Trend, Verdict};
use flagcheck_core::exec::Executor;
use flagcheck_core::format::{digest, read_qstate, write_qstate};
use flagcheck_core::instances::{Instance, InstanceGen};
use flagcheck_core::measures::MeasureId;
use flagcheck_core::rng::stream;
use flagcheck_core::search::{search_violation, SearchOptions, SearchOutcome};
use flagcheck_core::sweep::{sweep, tally, trial_instance, Counts, SweepSpec};
use serde::{Deserialize, Serialize};

pub use config::{CommandKind, OutputFormat, RunConfig, UsageError};
use config::usage;

pub const SCHEMA_VERSION: &str = "1";
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "FLAGCHECK_THREADS";

/// Violations of these properties contradict flag additivity (directly or
/// through the bridges) or the measure axioms; violations of the copy
/// properties only show that a measure is not fully additive.
pub fn violation_is_unexpected(id: MeasureId, property: Property) -> bool {
    id.descriptor().known_flag_additive
        && !matches!(property, Property::TwoCopy | Property::NCopy | Property::FullAdditivity)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub measure_id: MeasureId,
    pub property: Property,
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationRow {
    pub measure_id: MeasureId,
    pub state_digest: String,
    pub values: Vec<(usize, f64)>,
    pub trend: Trend,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub config_echo: RunConfig,
    pub results: Vec<CheckResult>,
    pub summaries: Vec<Summary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub searches: Vec<SearchOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regularization: Vec<RegularizationRow>,
    /// Instance text of every violated result, keyed by instance digest.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub witnesses: BTreeMap<String, String>,
    /// Only present when timing was requested, so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

impl Report {
    fn new(config: &RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            config_echo: config.clone(),
            results: Vec::new(),
            summaries: Vec::new(),
            searches: Vec::new(),
            regularization: Vec::new(),
            witnesses: BTreeMap::new(),
            wall_ms: None,
        }
    }

    pub fn unexpected_violations(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.verdict == Verdict::Violated && violation_is_unexpected(r.measure_id, r.property))
            .count()
    }

    /// 0 when clean, 2 when a violation contradicts a flag-additive label.
    pub fn exit_code(&self) -> i32 {
        if self.unexpected_violations() > 0 {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// CheckResult rows, or the per-copy table for a regularization report.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.config_echo.command == CommandKind::Regularize {
            w.write_record(["measure_id", "n", "per_copy"]).expect("in-memory write");
            for row in &self.regularization {
                for (n, v) in &row.values {
                    w.write_record([row.measure_id.as_str(), &n.to_string(), &v.to_string()])
                        .expect("in-memory write");
                }
            }
        } else {
            w.write_record([
                "measure_id",
                "property",
                "lhs",
                "rhs",
                "residual",
                "violation",
                "tol",
                "verdict",
                "instance_digest",
                "seed",
                "index",
                "reason",
            ])
            .expect("in-memory write");
            for r in &self.results {
                w.write_record([
                    r.measure_id.as_str().to_string(),
                    r.property.to_string(),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.residual.to_string(),
                    r.violation.to_string(),
                    r.tol.to_string(),
                    r.verdict.to_string(),
                    r.instance_digest.clone(),
                    r.seed.to_string(),
                    r.index.to_string(),
                    r.reason.clone().unwrap_or_default(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn render(&self) -> String {
        match self.config_echo.format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }

    fn push_results(&mut self, id: MeasureId, property: Property, results: Vec<CheckResult>, witnesses: Vec<(String, String)>) {
        self.witnesses.extend(witnesses);
        self.summaries.push(Summary { measure_id: id, property, counts: tally(&results) });
        self.results.extend(results);
    }
}

/// Worker pool sized by `FLAGCHECK_THREADS` (all cores when unset or 0).
pub fn executor_from_env() -> Executor {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    Executor::with_threads(threads)
}

fn checker(config: &RunConfig, id: MeasureId) -> Checker {
    Checker::for_measure(id).with_tol(config.tol_for(id))
}

fn spec(config: &RunConfig, property: Property) -> SweepSpec {
    SweepSpec {
        property,
        trials: config.trials,
        dims: config.dims.clone(),
        seed: config.master_seed,
        copies: config.copies,
        delta_typ: config.delta_typ,
    }
}

fn core_err(e: flagcheck_core::Error) -> UsageError {
    UsageError(e.to_string())
}

fn read_file(path: &str) -> Result<String, UsageError> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read `{path}`: {e}")))
}

/// Property sweep over every configured (measure, property) cell, or a
/// replay of one instance file.
pub fn cmd_check(config: &RunConfig, exec: &Executor) -> Result<Report, UsageError> {
    config.validate()?;
    let mut report = Report::new(config);
    if let Some(path) = &config.instance {
        let inst = Instance::from_text(&read_file(path)?).map_err(core_err)?;
        let (id, property) = (config.measures[0], config.properties[0]);
        let r = checker(config, id).with_seed(config.master_seed, 0).run(property, &inst).map_err(core_err)?;
        let w = if r.is_violated() { vec![(r.instance_digest.clone(), inst.to_text())] } else { Vec::new() };
        report.push_results(id, property, vec![r], w);
        return Ok(report);
    }
    for &id in &config.measures {
        let c = checker(config, id);
        for &property in &config.properties {
            let s = spec(config, property);
            let results = sweep(&c, &s, exec).map_err(core_err)?;
            let w = witnesses(&c, &s, &results)?;
            report.push_results(id, property, results, w);
        }
    }
    Ok(report)
}

/// (digest, instance text) for every violated trial.
fn witnesses(c: &Checker, s: &SweepSpec, results: &[CheckResult]) -> Result<Vec<(String, String)>, UsageError> {
    results
        .iter()
        .filter(|r| r.is_violated())
        .map(|r| {
            let inst = trial_instance(c, s, r.index as usize).map_err(core_err)?;
            Ok((r.instance_digest.clone(), inst.to_text()))
        })
        .collect()
}

/// Maximise one property's violation; the witness replays through `check --instance`.
pub fn cmd_search(config: &RunConfig, exec: &Executor) -> Result<Report, UsageError> {
    config.validate()?;
    let mut report = Report::new(config);
    let (id, property) = (config.measures[0], config.properties[0]);
    let c = checker(config, id);
    let outcome = search_violation(
        &c,
        property,
        config.dims[0],
        config.budget,
        config.master_seed,
        &SearchOptions::default(),
        exec,
    )
    .map_err(core_err)?;
    let inst = Instance::from_text(&outcome.instance).map_err(core_err)?;
    let r = c.with_seed(config.master_seed, 0).run(property, &inst).map_err(core_err)?;
    let w = if r.is_violated() { vec![(r.instance_digest.clone(), inst.to_text())] } else { Vec::new() };
    report.push_results(id, property, vec![r], w);
    report.summaries.clear();
    report.searches.push(outcome);
    Ok(report)
}

/// Per-copy values M(ρ^⊗N)/N for N ≤ nmax, plus sandwich checks on request.
pub fn cmd_regularize(config: &RunConfig, exec: &Executor) -> Result<Report, UsageError> {
    config.validate()?;
    let mut report = Report::new(config);
    let given = match &config.state {
        Some(path) => Some(read_qstate(&read_file(path)?).map_err(core_err)?),
        None => None,
    };
    for &id in &config.measures {
        let c = checker(config, id);
        let rho = match &given {
            Some(r) => r.clone(),
            None => {
                let gen = InstanceGen::new(id.descriptor().theory, config.dims[0]);
                gen.state(&mut stream(config.master_seed, 0))
            }
        };
        let reg: Regularization = c.regularization(&rho, config.n_max).map_err(core_err)?;
        report.regularization.push(RegularizationRow {
            measure_id: id,
            state_digest: digest(&[&write_qstate(&rho)]),
            values: reg.values,
            trend: reg.trend,
            converged: reg.converged,
        });
        if config.sandwich {
            let s = spec(config, Property::Sandwich);
            let results = sweep(&c, &s, exec).map_err(core_err)?;
            let w = witnesses(&c, &s, &results)?;
            report.push_results(id, Property::Sandwich, results, w);
        }
    }
    Ok(report)
}

pub fn run(config: &RunConfig, exec: &Executor) -> Result<Report, UsageError> {
    match config.command {
        CommandKind::Check => cmd_check(config, exec),
        CommandKind::Search => cmd_search(config, exec),
        CommandKind::Regularize => cmd_regularize(config, exec),
    }
}

/// Recover the configuration echoed in a JSON report, or read a bare JSON config.
pub fn config_from_json(text: &str) -> Result<RunConfig, UsageError> {
    #[derive(Deserialize)]
    struct Echo {
        config_echo: RunConfig,
    }
    if let Ok(e) = serde_json::from_str::<Echo>(text) {
        return Ok(e.config_echo);
    }
    serde_json::from_str::<RunConfig>(text).map_err(|e| UsageError(format!("bad JSON configuration: {e}")))
}

/// Load a configuration file: JSON (a report or a config) or `key = value` lines.
pub fn load_config(command: CommandKind, text: &str) -> Result<RunConfig, UsageError> {
    if text.trim_start().starts_with('{') {
        let mut c = config_from_json(text)?;
        if c.command != command {
            return usage(format!(
                "configuration is for `{}`, not `{}`",
                c.command.as_str(),
                command.as_str()
            ));
        }
        c.command = command;
        return Ok(c);
    }
    let mut c = RunConfig::new(command);
    c.apply_kv(text)?;
    Ok(c)
}
