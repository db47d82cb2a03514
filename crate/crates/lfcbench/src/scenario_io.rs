//! Scenario CSV files and step-signal exports.
//!
//! A scenario file has the header `iso,kind,p_disp_max,h01,...,h24` and one
//! row per (area, series kind). Empty hour cells mark missing values.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use lfcbench_core::model::{AreaId, EEA_AREAS};
use lfcbench_core::signals::{HourlySeries, Scenario, SeriesKind, StepSignals, HOURS};
use thiserror::Error;

pub const FIXED_COLUMNS: [&str; 3] = ["iso", "kind", "p_disp_max"];
pub const EXPECTED_ROWS: usize = 4 * EEA_AREAS;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: malformed header: {detail}")]
    Header { line: u64, detail: String },
    #[error("line {line}: expected {expected} cells, found {found}")]
    FieldCount { line: u64, expected: usize, found: usize },
    #[error("line {line}: unknown ISO code `{code}`")]
    UnknownIso { line: u64, code: String },
    #[error("line {line}: unknown series kind `{kind}`")]
    UnknownKind { line: u64, kind: String },
    #[error("line {line}, column {column}: `{value}` is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("scenario lacks area {0}")]
    MissingArea(&'static str),
    #[error("area {iso} lacks the {kind} series")]
    MissingSeries { iso: &'static str, kind: SeriesKind },
    #[error("expected {expected} data rows, found {found} (line {line} repeats {iso} {kind})")]
    RowCount {
        expected: usize,
        found: usize,
        line: u64,
        iso: &'static str,
        kind: SeriesKind,
    },
    #[error("line {line}: p_disp_max {found} of {iso} disagrees with {first} given earlier")]
    CapacityMismatch {
        line: u64,
        iso: &'static str,
        first: f64,
        found: f64,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

fn hour_column(h: usize) -> String {
    format!("h{:02}", h + 1)
}

pub fn header() -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..HOURS).map(hour_column))
        .collect()
}

fn parse_number(line: u64, column: &str, cell: &str) -> Result<f64, ScenarioError> {
    let v: f64 = cell.trim().parse().map_err(|_| ScenarioError::NonNumeric {
        line,
        column: column.to_string(),
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(ScenarioError::NonNumeric {
            line,
            column: column.to_string(),
            value: cell.to_string(),
        });
    }
    Ok(v)
}

pub fn read_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let file = std::fs::File::open(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut sc = parse_scenario(file)?;
    sc.provenance = format!("file {}", path.display());
    Ok(sc)
}

/// Parses a scenario; missing cells stay `None` for a later repair.
pub fn parse_scenario<R: Read>(input: R) -> Result<Scenario, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = rdr.records();
    let expected = header();

    let first = match records.next() {
        Some(r) => r?,
        None => {
            return Err(ScenarioError::Header {
                line: 1,
                detail: "file is empty".into(),
            })
        }
    };
    let got: Vec<&str> = first.iter().map(str::trim).collect();
    if got.len() != expected.len() {
        return Err(ScenarioError::Header {
            line: 1,
            detail: format!("expected {} columns, found {}", expected.len(), got.len()),
        });
    }
    if let Some((want, have)) = expected.iter().zip(&got).find(|(w, h)| w.as_str() != **h) {
        return Err(ScenarioError::Header {
            line: 1,
            detail: format!("expected column `{want}`, found `{have}`"),
        });
    }

    let mut rows: BTreeMap<(usize, usize), Vec<Option<f64>>> = BTreeMap::new();
    let mut capacities: Vec<Option<f64>> = vec![None; EEA_AREAS];
    let mut found = 0;
    let mut repeat = None;
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        found += 1;
        if rec.len() != expected.len() {
            return Err(ScenarioError::FieldCount {
                line,
                expected: expected.len(),
                found: rec.len(),
            });
        }
        let code = rec[0].trim();
        let area = AreaId::from_iso(code).ok_or_else(|| ScenarioError::UnknownIso {
            line,
            code: code.to_string(),
        })?;
        let kind_name = rec[1].trim();
        let kind = SeriesKind::from_name(kind_name).ok_or_else(|| ScenarioError::UnknownKind {
            line,
            kind: kind_name.to_string(),
        })?;
        let cap = parse_number(line, "p_disp_max", &rec[2])?;
        match capacities[area.index()] {
            Some(first) if first != cap => {
                return Err(ScenarioError::CapacityMismatch {
                    line,
                    iso: area.iso_code(),
                    first,
                    found: cap,
                })
            }
            _ => capacities[area.index()] = Some(cap),
        }
        let values = (0..HOURS)
            .map(|h| {
                let cell = rec[3 + h].trim();
                if cell.is_empty() {
                    Ok(None)
                } else {
                    parse_number(line, &hour_column(h), cell).map(Some)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rows.insert((area.index(), kind.index()), values).is_some() && repeat.is_none() {
            repeat = Some((line, area, kind));
        }
    }

    for area in AreaId::all() {
        let present: Vec<SeriesKind> = SeriesKind::ALL
            .into_iter()
            .filter(|k| rows.contains_key(&(area.index(), k.index())))
            .collect();
        if present.is_empty() {
            return Err(ScenarioError::MissingArea(area.iso_code()));
        }
        if let Some(kind) = SeriesKind::ALL.into_iter().find(|k| !present.contains(k)) {
            return Err(ScenarioError::MissingSeries {
                iso: area.iso_code(),
                kind,
            });
        }
    }
    if let Some((line, area, kind)) = repeat {
        return Err(ScenarioError::RowCount {
            expected: EXPECTED_ROWS,
            found,
            line,
            iso: area.iso_code(),
            kind,
        });
    }

    let series = AreaId::all()
        .flat_map(|area| SeriesKind::ALL.into_iter().map(move |kind| (area, kind)))
        .map(|(area, kind)| HourlySeries {
            area,
            kind,
            values: rows.remove(&(area.index(), kind.index())).unwrap_or_default(),
        })
        .collect();
    Ok(Scenario {
        series,
        capacities: capacities.into_iter().map(|c| c.unwrap_or(0.0)).collect(),
        provenance: String::new(),
        seed: None,
    })
}

pub fn write_scenario<W: Write>(scenario: &Scenario, out: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for s in &scenario.series {
        let mut row = vec![
            s.area.iso_code().to_string(),
            s.kind.name().to_string(),
            scenario.capacities[s.area.index()].to_string(),
        ];
        row.extend(s.values.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `k,iso,d_load_meas,d_load_for,d_ren_meas,d_ren_for`, ordered by
/// step and then by area.
pub fn write_signals<W: Write>(signals: &StepSignals, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "iso", "d_load_meas", "d_load_for", "d_ren_meas", "d_ren_for"])?;
    for k in 0..signals.len() {
        for (i, a) in signals.areas.iter().enumerate() {
            let iso = AreaId::new(i).map_or("??", |id| id.iso_code());
            w.write_record([
                k.to_string(),
                iso.to_string(),
                a.load_meas[k].to_string(),
                a.load_for[k].to_string(),
                a.ren_meas[k].to_string(),
                a.ren_for[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
