//! Result envelopes and output routing.

use std::io::Write;
use std::path::PathBuf;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Format, GlobalArgs};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// The resolved configuration echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub options: Value,
}

pub struct Ctx {
    pub config: RunConfig,
    pub generated_at: String,
}

/// `SOURCE_DATE_EPOCH` (seconds) pins the timestamp for reproducible output.
fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    now.to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl Ctx {
    pub fn new(command: &'static str, global: &GlobalArgs, format: Format, options: Value) -> Ctx {
        Ctx {
            config: RunConfig {
                command,
                seed: global.seed,
                threads: global.threads,
                output: global.output.clone(),
                format,
                options,
            },
            generated_at: timestamp(),
        }
    }

    pub fn envelope<T: Serialize>(&self, schema: &str, result: &T) -> Result<Value, CliError> {
        Ok(json!({
            "schema": format!("tobit/{schema}"),
            "schema_version": SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "generated_at": self.generated_at,
            "config": self.config,
            "result": serde_json::to_value(result)?,
        }))
    }

    fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.config.output {
            Some(path) => std::fs::write(path, text)?,
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
            }
        }
        Ok(())
    }

    pub fn emit_json<T: Serialize>(&self, schema: &str, result: &T) -> Result<(), CliError> {
        let env = self.envelope(schema, result)?;
        self.write(&(serde_json::to_string_pretty(&env)? + "\n"))
    }

    /// CSV body plus metadata: a JSON sidecar next to a file output, or a
    /// leading `# ` comment line on standard output.
    pub fn emit_csv<T: Serialize>(&self, schema: &str, csv: &str, meta: &T) -> Result<(), CliError> {
        let env = self.envelope(schema, meta)?;
        match &self.config.output {
            Some(path) => {
                std::fs::write(path, csv)?;
                std::fs::write(sidecar(path), serde_json::to_string_pretty(&env)? + "\n")?;
                Ok(())
            }
            None => self.write(&format!("# {}\n{csv}", serde_json::to_string(&env)?)),
        }
    }
}

pub fn sidecar(path: &std::path::Path) -> PathBuf {
    path.with_extension("json")
}
