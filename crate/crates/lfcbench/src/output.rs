//! Run artifacts on disk.
//!
//! A run with stem `S` writes, into the output directory:
//!
//! * `S.csv`: one row per step (see [`log_header`]); no wall times, so two
//!   identical runs produce identical bytes.
//! * `S.timing.csv`: controller wall time per step.
//! * `S.summary.txt`: `key = value` lines with the metrics of the run.
//! * `S.toml`: the resolved configuration.
//!
//! Every file is written to a temporary name first and renamed into place
//! once complete.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lfcbench_core::dynamics::ModelVariant;
use lfcbench_core::model::{AreaId, Quantity};
use lfcbench_core::qp::QpStatus;
use lfcbench_core::sim::{LogSink, MetricsReport, StepRecord};
use tempfile::NamedTempFile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn temp_beside(path: &Path) -> Result<NamedTempFile, OutputError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    tempfile::Builder::new()
        .prefix(".lfcbench-")
        .tempfile_in(dir)
        .map_err(io_err(dir))
}

fn persist(tmp: NamedTempFile, path: &Path) -> Result<(), OutputError> {
    // temporary files start private; artifacts are meant to be shared
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(io_err(path))?;
    }
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| OutputError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes `bytes` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let mut tmp = temp_beside(path)?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    persist(tmp, path)
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Column names of the step log for `n` areas of `variant`. Per-area
/// columns are grouped by quantity: `ddelta_AT, ddelta_BE, ..., df_AT, ...`.
pub fn log_header(variant: ModelVariant, n: usize) -> Vec<String> {
    let mut groups: Vec<&str> = vec!["ddelta", "df", "e"];
    match variant {
        ModelVariant::Augmented => groups.extend(["pdisp", "ptie"]),
        ModelVariant::Turbine => groups.extend(["xdisp", "xc", "xd"]),
        ModelVariant::Linear | ModelVariant::PwaEss => {}
    }
    groups.extend(["udisp", "uc", "ud", "tie"]);
    let mut cols = vec!["k".to_string()];
    for g in groups {
        cols.extend((0..n).map(|i| format!("{g}_{}", iso(i))));
    }
    cols.extend(
        [
            "stage_cost",
            "cumulative_cost",
            "violations",
            "softened",
            "qp_status",
            "qp_iterations",
            "factorizations",
        ]
        .map(String::from),
    );
    cols
}

fn iso(i: usize) -> &'static str {
    AreaId::new(i).map_or("??", |a| a.iso_code())
}

pub fn status_name(s: Option<QpStatus>) -> &'static str {
    match s {
        None => "none",
        Some(QpStatus::Optimal) => "optimal",
        Some(QpStatus::MaxIter) => "max_iter",
        Some(QpStatus::Infeasible) => "infeasible",
        Some(QpStatus::Unbounded) => "unbounded",
    }
}

fn log_row(rec: &StepRecord) -> Vec<String> {
    let x = &rec.state;
    let mut row = vec![rec.k.to_string()];
    let mut push = |it: &mut dyn Iterator<Item = f64>| row.extend(it.map(fmt_f64));
    push(&mut x.areas.iter().map(|a| a.d_delta));
    push(&mut x.areas.iter().map(|a| a.d_f));
    push(&mut x.areas.iter().map(|a| a.e));
    if let Some(aug) = &x.augmented {
        push(&mut aug.iter().map(|a| a.p_disp));
        push(&mut aug.iter().map(|a| a.p_tie));
    }
    if let Some(t) = &x.turbine {
        push(&mut t.iter().map(|a| a.d_p_disp));
        push(&mut t.iter().map(|a| a.p_c));
        push(&mut t.iter().map(|a| a.p_d));
    }
    let u = &rec.input.areas;
    push(&mut u.iter().map(|a| a.d_p_disp));
    push(&mut u.iter().map(|a| a.p_c));
    push(&mut u.iter().map(|a| a.p_d));
    push(&mut rec.tie.iter().copied());
    let d = &rec.diagnostics;
    row.extend([
        fmt_f64(rec.stage_cost),
        fmt_f64(rec.cumulative_cost),
        rec.violations.len().to_string(),
        d.softened.to_string(),
        status_name(d.status).to_string(),
        d.iterations.to_string(),
        d.factorizations.to_string(),
    ]);
    row
}

/// Streams step records into a CSV that appears under its final name only
/// after [`CsvLog::finish`]. Wall times are kept aside for the timing file.
pub struct CsvLog {
    writer: csv::Writer<BufWriter<NamedTempFile>>,
    path: PathBuf,
    columns: usize,
    wall_times: Vec<f64>,
}

impl CsvLog {
    pub fn create(path: &Path, variant: ModelVariant, n_areas: usize) -> Result<Self, OutputError> {
        let tmp = temp_beside(path)?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(tmp));
        let header = log_header(variant, n_areas);
        writer.write_record(&header).map_err(|e| csv_err(path, e))?;
        Ok(CsvLog {
            writer,
            path: path.to_path_buf(),
            columns: header.len(),
            wall_times: Vec::new(),
        })
    }

    pub fn finish(self) -> Result<Vec<f64>, OutputError> {
        let path = self.path;
        let buf = self.writer.into_inner().map_err(|e| OutputError::Io {
            path: path.display().to_string(),
            source: e.into_error(),
        })?;
        let tmp = buf.into_inner().map_err(|e| OutputError::Io {
            path: path.display().to_string(),
            source: e.into_error(),
        })?;
        persist(tmp, &path)?;
        Ok(self.wall_times)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> OutputError {
    OutputError::Corrupt {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl LogSink for CsvLog {
    fn record(&mut self, rec: &StepRecord) -> Result<(), String> {
        let row = log_row(rec);
        if row.len() != self.columns {
            return Err(format!(
                "row of {} cells under a {}-column header",
                row.len(),
                self.columns
            ));
        }
        self.writer.write_record(&row).map_err(|e| e.to_string())?;
        self.wall_times.push(rec.wall_time);
        Ok(())
    }
}

pub fn write_timing(path: &Path, wall_times: &[f64]) -> Result<(), OutputError> {
    let mut text = String::from("k,wall_time_s\n");
    for (k, t) in wall_times.iter().enumerate() {
        text.push_str(&format!("{k},{}\n", fmt_f64(*t)));
    }
    write_atomic(path, text.as_bytes())
}

/// Ordered `key = value` pairs of a summary file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Summary {
        Summary {
            entries: text
                .lines()
                .filter_map(|l| l.split_once(" = "))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Summary, OutputError> {
        Ok(Summary::parse(&std::fs::read_to_string(path).map_err(io_err(path))?))
    }

    /// Adds every field of `m`.
    pub fn add_metrics(&mut self, m: &MetricsReport) {
        self.push("steps", m.steps);
        self.push("cumulative_cost", fmt_f64(m.cumulative_cost));
        self.push("wall_time_mean_s", fmt_f64(m.wall_time_mean));
        self.push("wall_time_max_s", fmt_f64(m.wall_time_max));
        self.push("total_wall_time_s", fmt_f64(m.total_wall_time));
        self.push("time_outside_band_s", fmt_f64(m.time_outside_band()));
        self.push("max_abs_frequency_hz", fmt_f64(m.max_abs_frequency));
        self.push("max_abs_angle_deg", fmt_f64(m.max_abs_angle));
        self.push("softened_steps", m.softened_steps);
        self.push("violations_total", m.total_violations());
        for q in Quantity::ALL {
            self.push(format!("violations_{}", q.name()), m.violation_count(q));
        }
        for (i, b) in m.bands.iter().enumerate() {
            let code = iso(i);
            self.push(format!("outside_band_total_s_{code}"), fmt_f64(b.total_outside));
            self.push(format!("outside_band_average_s_{code}"), fmt_f64(b.average_outside));
            self.push(format!("outside_band_excursions_{code}"), b.excursions);
        }
    }
}

/// A step log read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTable {
    pub header: Vec<String>,
    index: BTreeMap<String, usize>,
    pub rows: Vec<Vec<String>>,
}

impl LogTable {
    pub fn read(path: &Path) -> Result<LogTable, OutputError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut rdr = csv::Reader::from_reader(file);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(String::from)
            .collect();
        if header.first().map(String::as_str) != Some("k") || !header.iter().any(|h| h == "cumulative_cost") {
            return Err(OutputError::Corrupt {
                path: path.display().to_string(),
                message: "not a step log (missing `k` or `cumulative_cost` column)".into(),
            });
        }
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| csv_err(path, e))?;
        let index = header.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        Ok(LogTable { header, index, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Numeric column `name`; `None` if absent or not numeric.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = *self.index.get(name)?;
        self.rows.iter().map(|r| r.get(i)?.parse().ok()).collect()
    }

    /// Per-area columns `prefix_XX`, in header order, with their ISO codes.
    pub fn group(&self, prefix: &str) -> Vec<(String, Vec<f64>)> {
        let lead = format!("{prefix}_");
        self.header
            .iter()
            .filter_map(|h| {
                let code = h.strip_prefix(&lead)?;
                Some((code.to_string(), self.column(h)?))
            })
            .collect()
    }
}

/// Paths of the files belonging to one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFiles {
    pub log: PathBuf,
    pub timing: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
}

impl RunFiles {
    pub fn new(dir: &Path, stem: &str) -> RunFiles {
        RunFiles {
            log: dir.join(format!("{stem}.csv")),
            timing: dir.join(format!("{stem}.timing.csv")),
            summary: dir.join(format!("{stem}.summary.txt")),
            config: dir.join(format!("{stem}.toml")),
        }
    }

    /// Sibling files of a step log `.../S.csv`.
    pub fn from_log(log: &Path) -> RunFiles {
        let dir = log.parent().unwrap_or(Path::new(""));
        let name = log
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let stem = name.strip_suffix(".csv").unwrap_or(&name);
        RunFiles::new(dir, stem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_shapes() {
        assert_eq!(log_header(ModelVariant::Linear, 26).len(), 1 + 7 * 26 + 7);
        assert_eq!(log_header(ModelVariant::Augmented, 26).len(), 1 + 9 * 26 + 7);
        assert_eq!(log_header(ModelVariant::Turbine, 2).len(), 1 + 10 * 2 + 7);
        assert_eq!(log_header(ModelVariant::Linear, 2)[1..3], ["ddelta_AT", "ddelta_BE"]);
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.0, -0.0, 1e-300, 0.1 + 0.2, 123456.789, f64::MAX] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::default();
        s.push("a", 1);
        s.push("cumulative_cost", fmt_f64(0.1 + 0.2));
        let back = Summary::parse(&s.to_text());
        assert_eq!(back, s);
        assert_eq!(back.get_f64("cumulative_cost"), Some(0.1 + 0.2));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn run_files_from_log() {
        let f = RunFiles::new(Path::new("out"), "run-a");
        assert_eq!(RunFiles::from_log(&f.log), f);
    }
}
