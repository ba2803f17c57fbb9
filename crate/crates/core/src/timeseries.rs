//! Step-aligned ingestion of `timestamp,value` CSV files.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::domain::TimeGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Solar,
    Temperature,
    Price,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads a CSV with a header row and columns `(timestamp, value)` and returns
/// one value per step of `grid`.
///
/// Timestamps are ISO-8601 and are converted to hours since midnight of the
/// first row's date. Rows falling inside a step are averaged. A step without
/// rows takes the value of the last row before it, so hourly data is
/// forward-filled. The rows must cover the horizon: the first timestamp may
/// not be later than the grid start, and the last timestamp plus the final
/// row spacing must reach the grid end.
pub fn load_timeseries(path: &Path, kind: SeriesKind, grid: &TimeGrid) -> Result<Vec<f64>> {
    let io_err = |e: std::io::Error| Error::Io { path: path.to_path_buf(), source: e };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let parse_err = |row: usize, message: String| Error::Parse { path: path.to_path_buf(), row, message };

    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut day0 = None;
    for (k, rec) in reader.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = k + 2;
        let rec = rec.map_err(|e| parse_err(row, e.to_string()))?;
        if rec.len() < 2 {
            return Err(parse_err(row, format!("expected 2 columns, found {}", rec.len())));
        }
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| parse_err(row, format!("invalid timestamp {:?}", &rec[0])))?;
        let value: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(row, format!("non-numeric value {:?}", &rec[1])))?;
        if !value.is_finite() {
            return Err(parse_err(row, format!("non-finite value {value}")));
        }
        match kind {
            SeriesKind::Solar if value < 0.0 => return Err(parse_err(row, format!("negative solar value {value}"))),
            SeriesKind::Price if value < 0.0 => return Err(parse_err(row, format!("negative price {value}"))),
            _ => {}
        }
        let day = *day0.get_or_insert(ts.date());
        let days = (ts.date() - day).num_days() as f64;
        let hour = days * 24.0 + ts.num_seconds_from_midnight() as f64 / 3600.0 + ts.nanosecond() as f64 * 1e-9 / 3600.0;
        if let Some(&(prev, _)) = rows.last() {
            if hour <= prev {
                return Err(parse_err(row, "timestamps must be strictly increasing".into()));
            }
        }
        rows.push((hour, value));
    }
    resample(&rows, grid).ok_or_else(|| {
        let first = rows.first().map_or(f64::NAN, |r| r.0);
        let last = rows.last().map_or(f64::NAN, |r| r.0);
        Error::HorizonNotCovered { path: path.to_path_buf(), first, last, start: grid.start_hour, end: grid.end_hour() }
    })
}

/// Averages or forward-fills `(hour, value)` rows onto the grid. Returns `None`
/// when the rows do not cover the horizon.
pub fn resample(rows: &[(f64, f64)], grid: &TimeGrid) -> Option<Vec<f64>> {
    const EPS: f64 = 1e-9;
    let (first, last) = (rows.first()?.0, rows.last()?.0);
    let spacing = if rows.len() >= 2 { last - rows[rows.len() - 2].0 } else { 0.0 };
    if first > grid.start_hour + EPS || last + spacing < grid.end_hour() - EPS {
        return None;
    }
    let mut out = Vec::with_capacity(grid.n_steps);
    let mut k = 0;
    for t in 0..grid.n_steps {
        let (h0, h1) = (grid.hour_of(t), grid.hour_of(t + 1));
        while k < rows.len() && rows[k].0 < h0 - EPS {
            k += 1;
        }
        let inside: Vec<f64> = rows[k..].iter().take_while(|r| r.0 < h1 - EPS).map(|r| r.1).collect();
        if inside.is_empty() {
            // Coarser data: carry the last row at or before the step start.
            let prev = rows.iter().rev().find(|r| r.0 <= h0 + EPS)?;
            out.push(prev.1);
        } else {
            out.push(inside.iter().sum::<f64>() / inside.len() as f64);
        }
    }
    Some(out)
}

/// Writes a profile in the format read by [`load_timeseries`], timestamps on
/// the given calendar date.
pub fn write_timeseries(path: &Path, date: &str, grid: &TimeGrid, values: &[f64]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io { path: path.to_path_buf(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(e.into()))?;
    let rec_err = |e: csv::Error| io_err(e.into());
    w.write_record(["timestamp", "value"]).map_err(rec_err)?;
    for (t, v) in values.iter().enumerate() {
        let minutes = (grid.hour_of(t) * 60.0).round() as u32;
        let ts = format!("{date}T{:02}:{:02}:00", minutes / 60, minutes % 60);
        w.write_record([ts, format!("{v}")]).map_err(rec_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn csv_file(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "timestamp,value").unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn rows_every(half_minutes: u32, count: usize, value: impl Fn(usize) -> f64) -> Vec<String> {
        (0..count)
            .map(|k| {
                let m = 7 * 60 * 60 + k as u32 * half_minutes * 30;
                let (h, rest) = (m / 3600, m % 3600);
                format!("2023-11-21T{:02}:{:02}:{:02},{}", h, rest / 60, rest % 60, value(k))
            })
            .collect()
    }

    #[test]
    fn exact_grid_is_identity() {
        let f = csv_file(&rows_every(30, 60, |k| k as f64 * 0.5));
        let v = load_timeseries(f.path(), SeriesKind::Temperature, &TimeGrid::default()).unwrap();
        assert_eq!(v, (0..60).map(|k| k as f64 * 0.5).collect::<Vec<_>>());
    }

    #[test]
    fn finer_data_is_averaged() {
        // 7.5-minute spacing: two rows per step.
        let f = csv_file(&rows_every(15, 120, |k| k as f64));
        let v = load_timeseries(f.path(), SeriesKind::Solar, &TimeGrid::default()).unwrap();
        assert_eq!(v.len(), 60);
        for (t, x) in v.iter().enumerate() {
            assert_eq!(*x, (2 * t) as f64 + 0.5);
        }
    }

    #[test]
    fn coarser_data_is_forward_filled() {
        // Hourly rows 7:00..21:00.
        let f = csv_file(&rows_every(120, 15, |k| k as f64));
        let v = load_timeseries(f.path(), SeriesKind::Price, &TimeGrid::default()).unwrap();
        for (t, x) in v.iter().enumerate() {
            assert_eq!(*x, (t / 4) as f64);
        }
    }

    #[test]
    fn half_horizon_is_rejected() {
        let f = csv_file(&rows_every(30, 30, |_| 1.0));
        let err = load_timeseries(f.path(), SeriesKind::Solar, &TimeGrid::default()).unwrap_err();
        assert!(err.to_string().contains("horizon not covered"), "{err}");
    }

    #[test]
    fn parse_errors_name_the_row() {
        let mut lines = rows_every(30, 60, |_| 1.0);
        lines[4] = "2023-11-21T08:00:00,abc".into();
        let f = csv_file(&lines);
        let err = load_timeseries(f.path(), SeriesKind::Solar, &TimeGrid::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 6, .. }), "{err}");
        assert!(err.to_string().contains("non-numeric"));
        let missing = load_timeseries(Path::new("/nonexistent/x.csv"), SeriesKind::Solar, &TimeGrid::default());
        assert!(matches!(missing, Err(Error::Io { .. })));
    }

    #[test]
    fn write_then_read_round_trips() {
        let grid = TimeGrid::default();
        let values: Vec<f64> = (0..60).map(|t| (t as f64 * 0.37).sin()).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("temp.csv");
        write_timeseries(&path, "2023-11-21", &grid, &values).unwrap();
        assert_eq!(load_timeseries(&path, SeriesKind::Temperature, &grid).unwrap(), values);
    }
}
