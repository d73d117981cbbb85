//! Snapshot files and file-backed run sinks.
//!
//! A snapshot is a `#`-prefixed header line, a column line and one row per
//! element:
//!
//! ```text
//! # model=filament t=0.25 N=3 kernel=rosenhead gamma=1 mu=0.5
//! alpha,x,y,z
//! 0,1,0,0
//! ...
//! ```
//!
//! Blob rows add `xi_x,xi_y,xi_z` and loop rows add `m_x,m_y,m_z`. Numbers
//! are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{io_error, Result, VortexError};
use crate::kernel::Vec3;
use crate::sim::{DiagnosticsRecord, RefineEvent, Sink, State};

pub const CSV_HEADER: &str = "t,H,L,A,sup_u,rate_total,gronwall_L";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub model: String,
    pub t: f64,
    pub kernel: String,
    pub positions: Vec<Vec3>,
    pub vectors: Option<Vec<Vec3>>,
}

fn columns(model: &str) -> &'static str {
    match model {
        "blobs" => "alpha,x,y,z,xi_x,xi_y,xi_z",
        "loops" => "alpha,x,y,z,m_x,m_y,m_z",
        _ => "alpha,x,y,z",
    }
}

impl Snapshot {
    pub fn of_state(state: &State, t: f64) -> Self {
        Snapshot {
            model: state.model().to_string(),
            t,
            kernel: state.kernel_description(),
            positions: state.positions().to_vec(),
            vectors: state.vectors().map(|v| v.to_vec()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# model={} t={} N={} kernel={}",
            self.model,
            self.t,
            self.positions.len(),
            self.kernel
        );
        let _ = writeln!(s, "{}", columns(&self.model));
        for (a, x) in self.positions.iter().enumerate() {
            let _ = write!(s, "{a},{},{},{}", x.x, x.y, x.z);
            if let Some(v) = &self.vectors {
                let _ = write!(s, ",{},{},{}", v[a].x, v[a].y, v[a].z);
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, what: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| VortexError::Malformed {
            what: what.to_string(),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| bad(1, "empty snapshot".into()))?;
        let head = head
            .strip_prefix('#')
            .ok_or_else(|| bad(1, "expected a '#' header line".into()))?
            .trim();
        let (fields, kernel) = match head.split_once("kernel=") {
            Some((f, k)) => (f, k.trim().to_string()),
            None => (head, String::new()),
        };
        let mut model = None;
        let mut t = None;
        let mut n = None;
        for tok in fields.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| bad(1, format!("header token {tok:?} is not key=value")))?;
            match k {
                "model" => model = Some(v.to_string()),
                "t" => t = Some(v.parse::<f64>().map_err(|e| bad(1, format!("t: {e}")))?),
                "N" => n = Some(v.parse::<usize>().map_err(|e| bad(1, format!("N: {e}")))?),
                _ => return Err(bad(1, format!("unknown header key {k:?}"))),
            }
        }
        let model = model.ok_or_else(|| bad(1, "header lacks model=".into()))?;
        if !matches!(model.as_str(), "filament" | "blobs" | "loops") {
            return Err(bad(1, format!("unknown model {model:?}")));
        }
        let t = t.ok_or_else(|| bad(1, "header lacks t=".into()))?;
        let (cl, cols) = lines.next().ok_or_else(|| bad(2, "missing column line".into()))?;
        if cols.trim() != columns(&model) {
            return Err(bad(cl + 1, format!("expected columns {:?}", columns(&model))));
        }
        let width = if model == "filament" { 4 } else { 7 };
        let mut positions = Vec::new();
        let mut vectors = Vec::new();
        for (i, line) in lines {
            let vals: Vec<&str> = line.split(',').map(str::trim).collect();
            if vals.len() != width {
                return Err(bad(i + 1, format!("expected {width} fields, found {}", vals.len())));
            }
            let alpha: usize = vals[0].parse().map_err(|e| bad(i + 1, format!("alpha: {e}")))?;
            if alpha != positions.len() {
                return Err(bad(i + 1, format!("expected alpha {}, found {alpha}", positions.len())));
            }
            let mut num = [0.0f64; 6];
            for (j, v) in vals[1..].iter().enumerate() {
                num[j] = v.parse().map_err(|e| bad(i + 1, format!("field {}: {e}", j + 2)))?;
                if !num[j].is_finite() {
                    return Err(bad(i + 1, format!("field {} is not finite", j + 2)));
                }
            }
            positions.push(Vec3::new(num[0], num[1], num[2]));
            if width == 7 {
                vectors.push(Vec3::new(num[3], num[4], num[5]));
            }
        }
        if positions.is_empty() {
            return Err(bad(cl + 2, "no rows".into()));
        }
        if let Some(n) = n {
            if n != positions.len() {
                return Err(bad(1, format!("header says N={n} but {} rows follow", positions.len())));
            }
        }
        Ok(Snapshot {
            vectors: (width == 7).then_some(vectors),
            model,
            t,
            kernel,
            positions,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Snapshot::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| io_error(path, e))
    }
}

pub fn csv_line(r: &DiagnosticsRecord) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.t, r.energy, r.length, r.variation, r.sup_u, r.rate_total, r.gronwall_l
    )
}

/// Writes the diagnostics CSV, refinement JSONL and numbered snapshots
/// into one directory.
pub struct DirectorySink {
    dir: PathBuf,
    csv: Option<BufWriter<File>>,
    events: Option<BufWriter<File>>,
    snapshots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub csv: bool,
    pub events: bool,
    pub snapshots: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            csv: true,
            events: true,
            snapshots: true,
        }
    }
}

pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "refinements.jsonl";

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:06}.csv")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_error(path, e))?))
}

impl DirectorySink {
    pub fn new(dir: &Path, outputs: Outputs) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let csv = if outputs.csv {
            let path = dir.join(TRACE_FILE);
            let mut w = create(&path)?;
            writeln!(w, "{CSV_HEADER}").map_err(|e| io_error(&path, e))?;
            Some(w)
        } else {
            None
        };
        let events = if outputs.events {
            Some(create(&dir.join(EVENTS_FILE))?)
        } else {
            None
        };
        Ok(DirectorySink {
            dir: dir.to_path_buf(),
            csv,
            events,
            snapshots: outputs.snapshots,
        })
    }

    pub fn finish(&mut self) -> Result<()> {
        if let Some(w) = &mut self.csv {
            w.flush().map_err(|e| io_error(&self.dir.join(TRACE_FILE), e))?;
        }
        if let Some(w) = &mut self.events {
            w.flush().map_err(|e| io_error(&self.dir.join(EVENTS_FILE), e))?;
        }
        Ok(())
    }
}

impl Sink for DirectorySink {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        if let Some(w) = &mut self.csv {
            writeln!(w, "{}", csv_line(record)).map_err(|e| io_error(&self.dir.join(TRACE_FILE), e))?;
        }
        Ok(())
    }

    fn event(&mut self, event: &RefineEvent) -> Result<()> {
        if let Some(w) = &mut self.events {
            let line = serde_json::to_string(event).expect("event serializes");
            writeln!(w, "{line}").map_err(|e| io_error(&self.dir.join(EVENTS_FILE), e))?;
        }
        Ok(())
    }

    fn snapshot(&mut self, index: usize, t: f64, state: &State) -> Result<()> {
        if self.snapshots {
            Snapshot::of_state(state, t).write(&self.dir.join(snapshot_name(index)))?;
        }
        Ok(())
    }
}
