//! Artifact writing. Every file carries the tool version and config hash, and
//! nothing else that could differ between two runs of the same config.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Params;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Artifacts {
    dir: PathBuf,
    stem: String,
    hash: String,
    subcommand: String,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: PathBuf, params: &Params) -> Self {
        let stem = params.raw("name").unwrap_or(&params.subcommand).to_string();
        Self {
            dir,
            stem,
            hash: params.hash(),
            subcommand: params.subcommand.clone(),
            written: vec![],
        }
    }

    fn header(&self, comment: &str) -> String {
        format!(
            "{comment} fraclab {VERSION} {} config-sha256 {}\n",
            self.subcommand, self.hash
        )
    }

    fn write(&mut self, ext: &str, body: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}.{ext}", self.stem));
        std::fs::write(&path, body)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// CSV with a leading `#` provenance line.
    pub fn csv(&mut self, body: &str) -> std::io::Result<PathBuf> {
        let text = self.header("#") + body;
        self.write("csv", &text)
    }

    /// A single JSON object with `tool`, `version` and `config_sha256` added.
    pub fn json<T: Serialize>(&mut self, result: &T) -> std::io::Result<PathBuf> {
        let text = self.json_text(result)?;
        self.write("json", &text)
    }

    pub fn json_text<T: Serialize>(&self, result: &T) -> std::io::Result<String> {
        let mut v = serde_json::to_value(result)?;
        if !v.is_object() {
            v = json!({ "result": v });
        }
        if let Value::Object(map) = &mut v {
            map.insert("tool".into(), json!("fraclab"));
            map.insert("version".into(), json!(VERSION));
            map.insert("config_sha256".into(), json!(self.hash));
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    pub fn text(&mut self, body: &str) -> std::io::Result<PathBuf> {
        let text = self.header("#") + body;
        self.write("txt", &text)
    }

    /// A gnuplot script reading the CSV written alongside it.
    pub fn plot(&mut self, script: &str) -> std::io::Result<PathBuf> {
        let text = format!(
            "{}# usage: gnuplot {stem}.gp  (writes {stem}.png)\nset datafile separator ','\nset terminal pngcairo size 900,600\nset output '{stem}.png'\nset key top left\n{script}",
            self.header("#"),
            stem = self.stem
        );
        self.write("gp", &text)
    }

    pub fn csv_name(&self) -> String {
        format!("{}.csv", self.stem)
    }
}

/// Output directory: `out`, else `$FRACLAB_OUT`, else `./fraclab-out`.
pub fn output_dir(params: &Params) -> PathBuf {
    if let Some(d) = params.raw("out") {
        return PathBuf::from(d);
    }
    match std::env::var_os("FRACLAB_OUT") {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => Path::new("fraclab-out").to_path_buf(),
    }
}
