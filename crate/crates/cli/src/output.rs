//! Result tables and where they go.
//!
//! Tables are CSV preceded by `#` metadata lines: software version, command,
//! seed, the parameter echo, optionally the wall clock, then
//! command-specific facts. An interrupted run ends with `# TRUNCATED`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dsod_core::snapshot::{write_snapshot, SnapshotKind};
use dsod_core::torus::RealGrid;

use crate::error::CliError;

pub const VERSION: &str = concat!("dsod ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub truncated: bool,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    /// Looks up a metadata value.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// A snapshot grid produced instead of (or alongside) a table.
pub struct Snapshot {
    pub grid: RealGrid,
    pub kind: SnapshotKind,
}

/// Shared header lines for every artifact.
#[derive(Debug, Clone)]
pub struct Header {
    pub command: String,
    pub seed: Option<u64>,
    pub echo: String,
    pub stamp: bool,
}

impl Header {
    pub fn render(&self, table: &Table) -> String {
        let mut s = String::new();
        writeln!(s, "# version: {VERSION}").unwrap();
        writeln!(s, "# command: {}", self.command).unwrap();
        match self.seed {
            Some(seed) => writeln!(s, "# seed: {seed}").unwrap(),
            None => writeln!(s, "# seed: none").unwrap(),
        }
        for line in self.echo.lines() {
            writeln!(s, "# config: {line}").unwrap();
        }
        if self.stamp {
            let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
            writeln!(s, "# wall_clock_unix: {t:.3}").unwrap();
        }
        for (k, v) in &table.meta {
            writeln!(s, "# {k}: {v}").unwrap();
        }
        s
    }
}

pub fn render_csv(header: &Header, table: &Table) -> String {
    let mut s = header.render(table);
    s.push_str(&table.columns.join(","));
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    if table.truncated {
        s.push_str("# TRUNCATED\n");
    }
    s
}

/// Where output goes: `--out` (under OUTPUT_DIR if relative and set),
/// else `OUTPUT_DIR/<command>.<ext>`, else standard output.
pub fn destination(out: Option<&Path>, output_dir: Option<&Path>, command: &str, ext: &str) -> Option<PathBuf> {
    match (out, output_dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(format!("{command}.{ext}"))),
        (None, None) => None,
    }
}

pub fn output_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("OUTPUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn create(path: &Path) -> Result<std::fs::File, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(std::fs::File::create(path)?)
}

pub fn emit_table(header: &Header, table: &Table, dest: Option<&Path>) -> Result<(), CliError> {
    let text = render_csv(header, table);
    match dest {
        Some(path) => create(path)?.write_all(text.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Binary snapshot at `path` plus a `<path>.meta` text sidecar holding the header.
pub fn emit_snapshot(header: &Header, table: &Table, snap: &Snapshot, path: &Path) -> Result<(), CliError> {
    let mut file = std::io::BufWriter::new(create(path)?);
    write_snapshot(&mut file, &snap.grid, snap.kind)?;
    file.flush()?;
    let mut meta = header.render(table);
    if table.truncated {
        meta.push_str("# TRUNCATED\n");
    }
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".meta");
    create(Path::new(&sidecar))?.write_all(meta.as_bytes())?;
    Ok(())
}
