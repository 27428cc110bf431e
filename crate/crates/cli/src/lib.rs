//! Batch front end: validate scenarios, run them, render metrics.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mulenet::simkit::{run_with, Metrics, RunOptions, Scenario, SimError, METRIC_FIELDS};
use serde_json::Value;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INVALID: u8 = 1;
    pub const IO: u8 = 2;
    pub const AUDIT: u8 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: parse error at line {line}, column {column}: {message}", path.display())]
    Metrics {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Sim(SimError::Io { .. }) | CliError::Io { .. } => exit::IO,
            CliError::Sim(SimError::Audit { .. }) => exit::AUDIT,
            CliError::Sim(_) | CliError::Metrics { .. } => exit::INVALID,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Summary,
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub audit: bool,
}

/// Loads and checks a scenario. `Err(Invalid)` carries every finding.
pub fn validate(path: &Path) -> Result<Scenario, CliError> {
    let s = Scenario::load(path)?;
    let diags = s.diagnostics();
    if diags.is_empty() {
        Ok(s)
    } else {
        Err(SimError::Invalid(diags).into())
    }
}

/// Makes sure `dir` exists and accepts new files.
fn writable(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(".mulenet-write-check");
    fs::write(&probe, b"").map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))
}

pub const OUTPUT_FILES: [&str; 3] = ["metrics.json", "transfers.csv", "events.csv"];

/// Runs a scenario and writes the three output files into `config.out`.
pub fn run_command(config: &RunConfig) -> Result<Metrics, CliError> {
    let mut s = validate(&config.scenario)?;
    if let Some(seed) = config.seed {
        s.seed = seed;
    }
    writable(&config.out)?;
    let out = run_with(&s, RunOptions { audit: config.audit }, None)?;
    let files = [out.metrics_json(), out.transfers_csv(), out.events_csv()];
    for (name, body) in OUTPUT_FILES.iter().zip(files) {
        let path = config.out.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
    }
    Ok(out.metrics)
}

pub fn read_metrics(path: &Path) -> Result<Metrics, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Metrics {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Field values in declaration order, printed the way the JSON document
/// prints them.
fn values(m: &Metrics) -> Vec<(&'static str, String)> {
    let v = serde_json::to_value(m).expect("metrics serialize");
    METRIC_FIELDS
        .iter()
        .map(|k| {
            let x = &v[*k];
            debug_assert!(matches!(x, Value::Number(_)));
            (*k, x.to_string())
        })
        .collect()
}

pub fn render(m: &Metrics, format: Format) -> String {
    match format {
        Format::Json => mulenet::simkit::metrics_json(m),
        Format::Csv => {
            let (keys, vals): (Vec<_>, Vec<_>) = values(m).into_iter().unzip();
            format!("{}\n{}\n", keys.join(","), vals.join(","))
        }
        Format::Summary => values(m).into_iter().map(|(k, v)| format!("{k} {v}\n")).collect(),
    }
}

/// Reads a summary or csv rendering back into metrics.
pub fn parse_rendered(text: &str, format: Format) -> Option<Metrics> {
    let pairs: Vec<(String, String)> = match format {
        Format::Json => return serde_json::from_str(text).ok(),
        Format::Csv => {
            let mut lines = text.lines();
            let keys = lines.next()?.split(',');
            let vals = lines.next()?.split(',');
            keys.zip(vals).map(|(k, v)| (k.to_string(), v.to_string())).collect()
        }
        Format::Summary => text
            .lines()
            .map(|l| l.split_once(' ').map(|(k, v)| (k.to_string(), v.to_string())))
            .collect::<Option<_>>()?,
    };
    let mut obj = serde_json::Map::new();
    for (k, v) in pairs {
        obj.insert(k, serde_json::from_str(&v).ok()?);
    }
    serde_json::from_value(Value::Object(obj)).ok()
}
