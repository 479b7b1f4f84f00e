use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use floqeels_core::model::ConfigFile;

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Accumulates CSV text with `#` header comments.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(comments: &[String], columns: &[&str]) -> Self {
        let mut text = String::new();
        for c in comments {
            let _ = writeln!(text, "# {c}");
        }
        let _ = writeln!(text, "{}", columns.join(","));
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Output directory that remembers what it wrote.
pub struct OutDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> std::io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Default)]
pub struct Timings {
    stages: BTreeMap<String, f64>,
}

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.stages.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }
}

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: String,
    pub command: &'a [String],
    pub subcommand: &'static str,
    /// Resolved configuration after flag overrides.
    pub config: Option<ConfigFile>,
    /// Subcommand parameters not carried by the configuration.
    pub parameters: serde_json::Value,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub timings: &'a BTreeMap<String, f64>,
}

/// Writes `manifest.json` listing every file already written plus itself.
pub fn write_manifest(
    out: &mut OutDir,
    argv: &[String],
    subcommand: &'static str,
    config: Option<ConfigFile>,
    parameters: serde_json::Value,
    timings: &Timings,
) -> std::io::Result<()> {
    let mut outputs = out.files().to_vec();
    outputs.push("manifest.json".to_string());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        command: argv,
        subcommand,
        config,
        parameters,
        threads: rayon::current_num_threads(),
        outputs,
        timings: &timings.stages,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.write("manifest.json", text + "\n")
}
