use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const RUN_LOG: &str = "run_log.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warn,
    Error,
}

#[derive(Serialize)]
struct Entry<'a> {
    command: &'a str,
    level: Level,
    message: &'a str,
}

/// Append-only JSON-lines log under the output directory. Entries carry no
/// wall-clock time so reruns stay byte-identical.
pub struct RunLog {
    path: PathBuf,
    command: String,
}

impl RunLog {
    pub fn open(out: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(RunLog {
            path: out.join(RUN_LOG),
            command: command.to_string(),
        })
    }

    pub fn record(&self, level: Level, message: &str) -> Result<()> {
        let line = serde_json::to_string(&Entry {
            command: &self.command,
            level,
            message,
        })?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .with_context(|| format!("opening {}", self.path.display()))?;
        writeln!(f, "{line}").with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn info(&self, message: impl AsRef<str>) -> Result<()> {
        println!("{}", message.as_ref());
        self.record(Level::Info, message.as_ref())
    }

    pub fn warn(&self, message: impl AsRef<str>) -> Result<()> {
        eprintln!("warning: {}", message.as_ref());
        self.record(Level::Warn, message.as_ref())
    }
}
