//! Run configuration: command-line flags layered over an optional flat
//! `key = value` file.
//!
//! ```text
//! # sweep two measures over two dimensions
//! measure = c_l1, c_rel_ent
//! property = flag_additivity
//! dim = 2, 3
//! trials = 100
//! seed = 7
//! tol = 1e-9, c_tr=1e-6
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use flagcheck_core::checks::{default_tol, Property};
use flagcheck_core::measures::MeasureId;
use flagcheck_core::search::SEARCHABLE;
use serde::{Deserialize, Serialize};

/// Largest local dimension accepted from a configuration.
pub const MAX_DIM: usize = 16;
/// Key of the tolerance applied to every measure without its own override.
pub const DEFAULT_TOL_KEY: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Check,
    Search,
    Regularize,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Check => "check",
            CommandKind::Search => "search",
            CommandKind::Regularize => "regularize",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => usage(format!("unknown format `{s}` (expected json or csv)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub master_seed: u64,
    /// Per-measure verdict tolerances; `default` applies to the rest.
    pub tolerances: BTreeMap<String, f64>,
    pub trials: usize,
    pub dims: Vec<usize>,
    pub measures: Vec<MeasureId>,
    pub properties: Vec<Property>,
    /// Objective-evaluation cap for searches.
    pub budget: usize,
    pub n_max: usize,
    /// N for n_copy and sandwich instances.
    pub copies: usize,
    pub delta_typ: f64,
    /// Also run sandwich checks in `regularize`.
    pub sandwich: bool,
    /// Instance file replayed by `check` instead of a random sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    /// QSTATE file probed by `regularize` instead of a random state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            master_seed: 0,
            tolerances: BTreeMap::new(),
            trials: 100,
            dims: vec![3],
            measures: Vec::new(),
            properties: Vec::new(),
            budget: 100_000,
            n_max: 5,
            copies: 3,
            delta_typ: 0.3,
            sandwich: false,
            instance: None,
            state: None,
            output_path: None,
            format: OutputFormat::Json,
        }
    }

    pub fn tol_for(&self, id: MeasureId) -> f64 {
        self.tolerances
            .get(id.as_str())
            .or_else(|| self.tolerances.get(DEFAULT_TOL_KEY))
            .copied()
            .unwrap_or_else(|| default_tol(id))
    }

    /// Apply one `key = value` setting; keys mirror the command-line flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let value = value.trim();
        match key.trim() {
            "measure" | "measures" => self.measures = parse_list(value)?,
            "property" | "properties" => self.properties = parse_list(value)?,
            "dim" | "dims" => self.dims = parse_list(value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "seed" | "master_seed" => self.master_seed = parse_one(key, value)?,
            "budget" => self.budget = parse_one(key, value)?,
            "nmax" | "n_max" => self.n_max = parse_one(key, value)?,
            "copies" => self.copies = parse_one(key, value)?,
            "delta" | "delta_typ" => self.delta_typ = parse_one(key, value)?,
            "sandwich" => self.sandwich = parse_one(key, value)?,
            "tol" | "tolerances" => {
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    self.set_tol(item)?;
                }
            }
            "instance" => self.instance = Some(value.to_string()),
            "state" => self.state = Some(value.to_string()),
            "out" | "output_path" => self.output_path = Some(value.to_string()),
            "format" => self.format = value.parse()?,
            other => return usage(format!("unknown configuration key `{other}`")),
        }
        Ok(())
    }

    /// `1e-7` sets the default; `c_tr=1e-6` overrides one measure.
    pub fn set_tol(&mut self, item: &str) -> Result<(), UsageError> {
        let (key, v) = match item.split_once('=') {
            Some((m, v)) => {
                let id: MeasureId = m.trim().parse().map_err(|e| UsageError(format!("{e}")))?;
                (id.as_str().to_string(), v)
            }
            None => (DEFAULT_TOL_KEY.to_string(), item),
        };
        let tol: f64 = parse_one("tol", v)?;
        if !(tol >= 0.0 && tol.is_finite()) {
            return usage(format!("tolerance must be finite and non-negative, got {tol}"));
        }
        self.tolerances.insert(key, tol);
        Ok(())
    }

    /// Apply every setting of a flat `key = value` document.
    pub fn apply_kv(&mut self, text: &str) -> Result<(), UsageError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected `key = value`", no + 1));
            };
            self.set(k, v).map_err(|e| UsageError(format!("config line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    /// The configuration as a `key = value` document accepted by [`apply_kv`](Self::apply_kv).
    pub fn to_kv(&self) -> String {
        let join = |items: Vec<String>| items.join(", ");
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("measure", join(self.measures.iter().map(|m| m.to_string()).collect()));
        put("property", join(self.properties.iter().map(|p| p.to_string()).collect()));
        put("dim", join(self.dims.iter().map(|d| d.to_string()).collect()));
        put("trials", self.trials.to_string());
        put("seed", self.master_seed.to_string());
        put("budget", self.budget.to_string());
        put("nmax", self.n_max.to_string());
        put("copies", self.copies.to_string());
        put("delta", self.delta_typ.to_string());
        put("sandwich", self.sandwich.to_string());
        if !self.tolerances.is_empty() {
            let items = self
                .tolerances
                .iter()
                .map(|(k, v)| if k == DEFAULT_TOL_KEY { v.to_string() } else { format!("{k}={v}") })
                .collect();
            put("tol", join(items));
        }
        if let Some(p) = &self.instance {
            put("instance", p.clone());
        }
        if let Some(p) = &self.state {
            put("state", p.clone());
        }
        if let Some(p) = &self.output_path {
            put("out", p.clone());
        }
        put("format", match self.format {
            OutputFormat::Json => "json".into(),
            OutputFormat::Csv => "csv".into(),
        });
        out
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if self.measures.is_empty() {
            return usage("no measure given (use --measure)");
        }
        if self.trials == 0 {
            return usage("trials must be at least 1");
        }
        if self.dims.is_empty() {
            return usage("no dimension given (use --dim)");
        }
        if let Some(d) = self.dims.iter().find(|&&d| !(2..=MAX_DIM).contains(&d)) {
            return usage(format!("dimension {d} outside 2..={MAX_DIM}"));
        }
        if !(self.delta_typ >= 0.0 && self.delta_typ.is_finite()) {
            return usage("delta must be finite and non-negative");
        }
        match self.command {
            CommandKind::Check => {
                if self.properties.is_empty() {
                    return usage("no property given (use --property)");
                }
                if self.instance.is_some() && (self.measures.len() != 1 || self.properties.len() != 1) {
                    return usage("replaying an instance needs exactly one measure and one property");
                }
            }
            CommandKind::Search => {
                if self.measures.len() != 1 || self.properties.len() != 1 {
                    return usage("search needs exactly one measure and one property");
                }
                if !SEARCHABLE.contains(&self.properties[0]) {
                    return usage(format!("search does not support property {}", self.properties[0]));
                }
                if self.budget == 0 {
                    return usage("budget must be at least 1");
                }
            }
            CommandKind::Regularize => {
                if self.n_max == 0 {
                    return usage("nmax must be at least 1");
                }
            }
        }
        Ok(())
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, UsageError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| UsageError(format!("`{s}`: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut c = RunConfig::new(CommandKind::Check);
        c.apply_kv("# comment\nmeasure = c_l1, c_tr\nproperty = convexity\ndim = 2,4\ntrials = 12\nseed = 9\ntol = 1e-8, c_tr=2e-6\nformat = csv\n")
            .unwrap();
        assert_eq!(c.measures, vec![MeasureId::CL1, MeasureId::CTr]);
        assert_eq!(c.tol_for(MeasureId::CTr), 2e-6);
        assert_eq!(c.tol_for(MeasureId::CL1), 1e-8);
        let mut back = RunConfig::new(CommandKind::Check);
        back.apply_kv(&c.to_kv()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = RunConfig::new(CommandKind::Check);
        assert!(c.validate().is_err());
        c.measures = vec![MeasureId::CL1];
        c.properties = vec![Property::Convexity];
        c.validate().unwrap();
        c.dims = vec![1];
        assert!(c.validate().is_err());
        c.dims = vec![2];
        c.trials = 0;
        assert!(c.validate().is_err());
        assert!(c.set("measure", "c_l7").is_err());
        assert!(c.set("colour", "red").is_err());
        let mut s = RunConfig::new(CommandKind::Search);
        s.measures = vec![MeasureId::CTr];
        s.properties = vec![Property::Sandwich];
        assert!(s.validate().is_err());
    }
}
