use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use super::{CorpusSummary, DataError, Result, TimeSeries};

pub const YAHOO_HEADER: [&str; 3] = ["timestamp", "value", "is_anomaly"];
pub const KPI_HEADER: [&str; 4] = ["timestamp", "value", "label", "KPI ID"];

/// Series loaded from disk plus files that were skipped as corrupt.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub series: Vec<TimeSeries>,
    pub summary: CorpusSummary,
    pub skipped: Vec<DataError>,
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    DataError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn open_reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_err(path, e))?;
    let matches = headers.len() == expected.len() && headers.iter().zip(expected).all(|(h, e)| h == *e);
    if !matches {
        return Err(DataError::MissingHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
        });
    }
    Ok(reader)
}

fn parse_cell<T: std::str::FromStr>(path: &Path, line: u64, column: &'static str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| DataError::BadCell {
        path: path.to_path_buf(),
        line,
        column,
        value: raw.to_string(),
    })
}

fn parse_label(path: &Path, line: u64, column: &'static str, raw: &str) -> Result<bool> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(DataError::BadCell {
            path: path.to_path_buf(),
            line,
            column,
            value: raw.to_string(),
        }),
    }
}

fn parse_value(path: &Path, line: u64, raw: &str) -> Result<f64> {
    let v: f64 = parse_cell(path, line, "value", raw)?;
    if !v.is_finite() {
        return Err(DataError::BadCell {
            path: path.to_path_buf(),
            line,
            column: "value",
            value: raw.to_string(),
        });
    }
    Ok(v)
}

fn check_order(path: &Path, line: u64, prev: Option<i64>, ts: i64) -> Result<()> {
    match prev {
        Some(p) if ts == p => Err(DataError::DuplicateTimestamp {
            path: path.to_path_buf(),
            line,
            timestamp: ts,
        }),
        Some(p) if ts < p => Err(DataError::NonMonotone {
            path: path.to_path_buf(),
            line,
            timestamp: ts,
        }),
        _ => Ok(()),
    }
}

/// One Yahoo-format file (`timestamp,value,is_anomaly`). The series id is
/// the file stem.
pub fn load_yahoo_file(path: &Path) -> Result<TimeSeries> {
    let mut reader = open_reader(path, &YAHOO_HEADER)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (mut ts, mut vs, mut ls) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let t: i64 = parse_cell(path, line, "timestamp", &record[0])?;
        check_order(path, line, ts.last().copied(), t)?;
        ts.push(t);
        vs.push(parse_value(path, line, &record[1])?);
        ls.push(parse_label(path, line, "is_anomaly", &record[2])?);
    }
    TimeSeries::new(id, ts, vs, Some(ls))
}

fn series_sort_key(path: &Path) -> (String, u64, String) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let digits_at = stem.rfind(|c: char| !c.is_ascii_digit()).map_or(0, |i| i + 1);
    let number = stem[digits_at..].parse().unwrap_or(u64::MAX);
    (stem[..digits_at].to_string(), number, stem)
}

/// Every `*.csv` in `dir`, ordered by name with numeric suffixes compared
/// numerically (`real_2` before `real_10`). Corrupt files are skipped and
/// reported in `skipped`.
pub fn load_yahoo_dir(dir: &Path) -> Result<LoadedCorpus> {
    let entries = fs::read_dir(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort_by_key(|p| series_sort_key(p));
    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        match load_yahoo_file(&path) {
            Ok(s) => series.push(s),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped.push(e);
            }
        }
    }
    let summary = CorpusSummary::of(&series);
    Ok(LoadedCorpus {
        series,
        summary,
        skipped,
    })
}

/// KPI-format file (`timestamp,value,label,KPI ID`), one series per KPI ID in
/// order of first appearance.
pub fn load_kpi_csv(path: &Path) -> Result<LoadedCorpus> {
    let mut reader = open_reader(path, &KPI_HEADER)?;
    let mut groups: IndexMap<String, (Vec<i64>, Vec<f64>, Vec<bool>)> = IndexMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let t: i64 = parse_cell(path, line, "timestamp", &record[0])?;
        let v = parse_value(path, line, &record[1])?;
        let l = parse_label(path, line, "label", &record[2])?;
        let (ts, vs, ls) = groups.entry(record[3].to_string()).or_default();
        check_order(path, line, ts.last().copied(), t)?;
        ts.push(t);
        vs.push(v);
        ls.push(l);
    }
    let series = groups
        .into_iter()
        .map(|(id, (ts, vs, ls))| TimeSeries::new(id, ts, vs, Some(ls)))
        .collect::<Result<Vec<_>>>()?;
    let summary = CorpusSummary::of(&series);
    Ok(LoadedCorpus {
        series,
        summary,
        skipped: Vec::new(),
    })
}

/// Writes the Yahoo format. Values use Rust's shortest round-trip float
/// formatting so parse → write is byte-stable.
pub fn write_yahoo_file(series: &TimeSeries, path: &Path) -> Result<()> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::with_capacity(series.len() * 24);
    out.push_str(&YAHOO_HEADER.join(","));
    out.push('\n');
    for i in 0..series.len() {
        let label = series.labels.as_ref().is_some_and(|l| l[i]);
        out.push_str(&format!("{},{},{}\n", series.timestamps[i], series.values[i], u8::from(label)));
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}

/// Writes each series as `<dir>/<id>.csv`.
pub fn write_yahoo_dir(series: &[TimeSeries], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    series
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.csv", s.id));
            write_yahoo_file(s, &path).map(|_| path)
        })
        .collect()
}
