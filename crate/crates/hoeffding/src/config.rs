//! Flat `key = value` experiment files; saving one and replaying it reproduces a run.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Bounds,
    Compare,
    Simulate,
    Verify,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Bounds => "bounds",
            CommandKind::Compare => "compare",
            CommandKind::Simulate => "simulate",
            CommandKind::Verify => "verify",
        }
    }
}

impl FromStr for CommandKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "bounds" => CommandKind::Bounds,
            "compare" => CommandKind::Compare,
            "simulate" => CommandKind::Simulate,
            "verify" => CommandKind::Verify,
            other => return Err(ConfigError::new(format!("unknown command {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    /// Human-readable report; `verify` only.
    Text,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Text => "text",
        }
    }
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(ConfigError::new(format!(
                "unknown format {other:?}, expected csv, json or text"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError(message.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every parameter of one run, with defaults already resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub x: Option<f64>,
    pub v: Option<f64>,
    pub n: Option<u64>,
    pub b: Option<f64>,
    pub y: Option<f64>,
    pub law: Option<String>,
    pub event: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub grid: Option<String>,
    pub suite: Option<String>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub inject_fault: bool,
}

impl ExperimentConfig {
    pub fn new(command: CommandKind, format: Format) -> Self {
        ExperimentConfig {
            command,
            x: None,
            v: None,
            n: None,
            b: None,
            y: None,
            law: None,
            event: None,
            trials: None,
            seed: None,
            gamma: None,
            grid: None,
            suite: None,
            format,
            out: None,
            inject_fault: false,
        }
    }

    /// Serializes in a fixed key order; floats use the shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            "# hoeffding experiment".to_string(),
            format!("command = {}", self.command.as_str()),
        ];
        let mut push = |key: &str, value: Option<String>| {
            if let Some(value) = value {
                lines.push(format!("{key} = {value}"));
            }
        };
        let real = |v: Option<f64>| v.map(|v| format!("{v:?}"));
        push("x", real(self.x));
        push("v", real(self.v));
        push("n", self.n.map(|n| n.to_string()));
        push("b", real(self.b));
        push("y", real(self.y));
        push("law", self.law.clone());
        push("event", self.event.clone());
        push("trials", self.trials.map(|t| t.to_string()));
        push("seed", self.seed.map(|s| s.to_string()));
        push("gamma", real(self.gamma));
        push("grid", self.grid.clone());
        push("suite", self.suite.clone());
        push("format", Some(self.format.as_str().to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push(
            "inject_fault",
            self.inject_fault.then(|| "true".to_string()),
        );
        lines.push(String::new());
        lines.join("\n")
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(format!("line {}: expected `key = value`", i + 1))
            })?;
            entries.push((i + 1, key.trim(), value.trim()));
        }
        let command = entries
            .iter()
            .find(|(_, k, _)| *k == "command")
            .ok_or_else(|| ConfigError::new("missing `command`"))?
            .2
            .parse()?;
        let mut config = ExperimentConfig::new(command, Format::Json);
        for (line, key, value) in entries {
            let bad = |what: &str| {
                ConfigError::new(format!("line {line}: {key} = {value:?} is not {what}"))
            };
            let real = || value.parse::<f64>().map_err(|_| bad("a number"));
            let count = || {
                value
                    .parse::<u64>()
                    .map_err(|_| bad("a nonnegative integer"))
            };
            match key {
                "command" => {}
                "x" => config.x = Some(real()?),
                "v" => config.v = Some(real()?),
                "n" => config.n = Some(count()?),
                "b" => config.b = Some(real()?),
                "y" => config.y = Some(real()?),
                "law" => config.law = Some(value.to_string()),
                "event" => config.event = Some(value.to_string()),
                "trials" => config.trials = Some(count()?),
                "seed" => config.seed = Some(count()?),
                "gamma" => config.gamma = Some(real()?),
                "grid" => config.grid = Some(value.to_string()),
                "suite" => config.suite = Some(value.to_string()),
                "format" => config.format = value.parse()?,
                "out" => config.out = Some(PathBuf::from(value)),
                "inject_fault" => {
                    config.inject_fault = value.parse().map_err(|_| bad("true or false"))?
                }
                other => {
                    return Err(ConfigError::new(format!(
                        "line {line}: unknown key {other:?}"
                    )))
                }
            }
        }
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::new(CommandKind::Simulate, Format::Json);
        c.x = Some(0.1 + 0.2);
        c.v = Some(2f64.sqrt());
        c.n = Some(2);
        c.law = Some("atoms:-1.0@0.5;1.0@0.5".into());
        c.event = Some("stopped".into());
        c.trials = Some(1000);
        c.seed = Some(u64::MAX);
        c.gamma = Some(0.95);
        c.out = Some("a.json".into());
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(ExperimentConfig::from_text("x = 1\n").is_err());
        assert!(ExperimentConfig::from_text("command = bounds\nx = one\n").is_err());
        assert!(ExperimentConfig::from_text("command = bounds\nwat = 1\n").is_err());
        assert!(ExperimentConfig::from_text("command = bounds\nno equals sign\n").is_err());
        let c = ExperimentConfig::from_text("# c\ncommand = bounds # trailing\nx = 1\n").unwrap();
        assert_eq!((c.command, c.x), (CommandKind::Bounds, Some(1.0)));
    }
}
