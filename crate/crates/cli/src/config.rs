//! Config-file loading and the flag/config merge.
//!
//! Every subcommand has a table in the config file whose keys are the flag
//! names with dashes replaced by underscores. When a key appears in both
//! places the file wins and a warning goes to stderr.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{EffectsArgs, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs, TrainArgs};

/// Bad flags, bad config or unusable inputs; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub simulate: Option<SimulateArgs>,
    pub fit: Option<FitArgs>,
    pub train_makeprob: Option<TrainArgs>,
    pub predict: Option<PredictArgs>,
    pub effects: Option<EffectsArgs>,
    pub evaluate: Option<EvaluateArgs>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    /// Parse errors from `toml` carry the line and column of the problem.
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

fn non_null(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

/// Overlay `file` on `cli`. Returns the merged flags plus one warning for
/// every key the two disagree on.
pub fn merge<T: Serialize + DeserializeOwned>(section: &str, cli: T, file: Option<T>) -> anyhow::Result<(T, Vec<String>)> {
    let Some(file) = file else { return Ok((cli, Vec::new())) };
    let mut merged = non_null(serde_json::to_value(&cli)?);
    let mut warnings = Vec::new();
    for (key, value) in non_null(serde_json::to_value(&file)?) {
        if let Some(old) = merged.get(&key) {
            if *old != value {
                warnings.push(format!(
                    "--{} {old} overridden by [{section}] {key} = {value} from the config file",
                    key.replace('_', "-")
                ));
            }
        }
        merged.insert(key, value);
    }
    Ok((serde_json::from_value(Value::Object(merged))?, warnings))
}

/// Snapshot of the effective settings for the manifest, with unset keys dropped.
pub fn snapshot<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).map(|v| Value::Object(non_null(v))).unwrap_or(Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_value_wins() {
        let cli = SimulateArgs { seed: Some(1), n_games: Some(3), ..Default::default() };
        let file = SimulateArgs { seed: Some(9), ..Default::default() };
        let (m, warnings) = merge("simulate", cli, Some(file)).unwrap();
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.n_games, Some(3));
        assert_eq!(warnings, ["--seed 1 overridden by [simulate] seed = 9 from the config file"]);
        let (_, quiet) = merge("simulate", SimulateArgs { seed: Some(9), ..Default::default() }, Some(m)).unwrap();
        assert!(quiet.is_empty());
    }

    #[test]
    fn parse_error_reports_line() {
        let err = ConfigFile::parse("[simulate]\nseed = 1\nn_games = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ConfigFile::parse("[simulate]\nseeds = 1\n").is_err());
        assert!(ConfigFile::parse("[simulat]\n").is_err());
    }

    #[test]
    fn nested_library_table_parses() {
        let c = ConfigFile::parse("[simulate]\nseed = 4\n[simulate.sim]\nnoise_sd = 0.01\n").unwrap();
        let s = c.simulate.unwrap();
        assert_eq!(s.sim.unwrap().noise_sd, 0.01);
    }
}
