use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Writes artifacts into one directory, each stamped with the tool version
/// and config hash.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    header: Header<'a>,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Header<'a> {
    tool: &'static str,
    version: &'static str,
    config_hash: &'a str,
}

impl Artifacts {
    pub fn new(dir: &Path, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), hash: hash.to_string(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn header_line(&self) -> String {
        header_line(&self.hash)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }

    /// CSV with a `#` header line, a column row and one row per record.
    pub fn csv(&mut self, name: &str, columns: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.header_line())?;
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns).map_err(|e| CliError::Io(e.to_string()))?;
            for r in rows {
                w.write_record(r.iter().map(|v| v.to_string())).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        self.put(name, &buf)
    }

    /// Pretty JSON object; `body` must serialize to a map.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let s = Stamped { header: Header { tool: "flapmech", version: flapmech::VERSION, config_hash: &self.hash }, body };
        let mut text = serde_json::to_string_pretty(&s).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    pub fn svg(&mut self, name: &str, svg: String) -> Result<(), CliError> {
        let text = format!("<!-- {} -->\n{svg}", self.header_line().trim_start_matches("# "));
        self.put(name, text.as_bytes())
    }

    pub fn raw(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.put(name, text.as_bytes())
    }
}

pub fn header_line(hash: &str) -> String {
    format!("# flapmech {} config={hash}", flapmech::VERSION)
}
