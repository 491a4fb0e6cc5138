//! On-disk formats: multichannel signal CSV, spectrogram header plus
//! payload, ECG pieces and traces.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::MultiChannelSignal;
use crate::spectral::{Method, Spectrogram};

/// Payload encoding for tabular artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
    Bin,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "bin" => Ok(Format::Bin),
            other => Err(Error::invalid(format!("unknown format `{other}` (csv, json or bin)"))),
        }
    }
}

/// Lossless decimal rendering: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

/// `# sample_rate=..,start_time=..` then `t,ch0,ch1,...`.
pub fn write_signal_csv(path: &Path, sig: &MultiChannelSignal) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(
        file,
        "# sample_rate={},start_time={}",
        fmt_f64(sig.sample_rate),
        fmt_f64(sig.start_time)
    )?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["t".to_string()];
    header.extend((0..sig.channels()).map(|c| format!("ch{c}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..sig.len() {
        let mut row = Vec::with_capacity(sig.channels() + 1);
        row.push(fmt_f64(sig.time(i)));
        row.extend(sig.data.iter().map(|ch| fmt_f64(ch[i])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{}: `{s}` is not a number", path.display())))
}

/// Reads a signal CSV. Without the comment line the sample rate is taken
/// from the time column.
pub fn read_signal_csv(path: &Path) -> Result<MultiChannelSignal> {
    let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    let mut meta = (None, None);
    let mut body = text.as_str();
    if let Some(rest) = text.strip_prefix('#') {
        let (line, after) = rest.split_once('\n').unwrap_or((rest, ""));
        for kv in line.trim().split(',') {
            match kv.split_once('=') {
                Some(("sample_rate", v)) => meta.0 = Some(parse_f64(path, v)?),
                Some(("start_time", v)) => meta.1 = Some(parse_f64(path, v)?),
                _ => {}
            }
        }
        body = after;
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let channels = r.headers().map_err(|e| csv_err(path, e))?.len().saturating_sub(1);
    if channels == 0 {
        return Err(Error::invalid(format!("{}: no channel columns", path.display())));
    }
    let mut times = Vec::new();
    let mut data = vec![Vec::new(); channels];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        times.push(parse_f64(path, &rec[0])?);
        for (c, ch) in data.iter_mut().enumerate() {
            ch.push(parse_f64(path, &rec[c + 1])?);
        }
    }
    let start = meta.1.or(times.first().copied()).unwrap_or(0.0);
    let rate = match meta.0 {
        Some(fs) => fs,
        None if times.len() >= 2 => (times.len() - 1) as f64 / (times[times.len() - 1] - times[0]),
        None => return Err(Error::invalid(format!("{}: cannot infer the sample rate", path.display()))),
    };
    MultiChannelSignal::new(rate, start, data)
}

/// Spectrogram metadata stored next to its payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramHeader {
    pub method: Method,
    pub rows: usize,
    pub cols: usize,
    pub freqs: Vec<f64>,
    pub times: Vec<f64>,
    pub format: Format,
    /// Payload file name, relative to the header; absent when the power is inline.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub power: Option<Vec<f64>>,
}

pub fn f64_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f64_from_le_bytes(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::invalid("binary payload length is not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// Writes `<stem>.json` and, for csv/bin, `<stem>.csv` / `<stem>.bin`
/// (row-major, frequency rows). Returns the files written.
pub fn write_spectrogram(dir: &Path, stem: &str, s: &Spectrogram, format: Format) -> Result<Vec<PathBuf>> {
    let header_path = dir.join(format!("{stem}.json"));
    let mut header = SpectrogramHeader {
        method: s.method,
        rows: s.rows(),
        cols: s.cols(),
        freqs: s.freqs.clone(),
        times: s.times.clone(),
        format,
        payload: None,
        power: None,
    };
    let mut written = vec![header_path.clone()];
    match format {
        Format::Json => header.power = Some(s.power.clone()),
        Format::Bin => {
            let name = format!("{stem}.bin");
            fs::write(dir.join(&name), f64_le_bytes(&s.power))?;
            written.push(dir.join(&name));
            header.payload = Some(name);
        }
        Format::Csv => {
            let name = format!("{stem}.csv");
            let mut w = csv::Writer::from_path(dir.join(&name)).map_err(|e| csv_err(&dir.join(&name), e))?;
            for r in 0..s.rows() {
                let row: Vec<String> = s.row(r).iter().map(|v| fmt_f64(*v)).collect();
                w.write_record(&row).map_err(|e| csv_err(&dir.join(&name), e))?;
            }
            w.flush()?;
            written.push(dir.join(&name));
            header.payload = Some(name);
        }
    }
    write_json(&header_path, &header)?;
    Ok(written)
}

pub fn read_spectrogram(header_path: &Path) -> Result<Spectrogram> {
    let header: SpectrogramHeader = read_json(header_path)?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let power = match (header.format, &header.power, &header.payload) {
        (Format::Json, Some(p), _) => p.clone(),
        (Format::Bin, _, Some(name)) => f64_from_le_bytes(&fs::read(dir.join(name))?)?,
        (Format::Csv, _, Some(name)) => {
            let path = dir.join(name);
            let mut r = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_path(&path)
                .map_err(|e| csv_err(&path, e))?;
            let mut out = Vec::with_capacity(header.rows * header.cols);
            for rec in r.records() {
                for v in rec.map_err(|e| csv_err(&path, e))?.iter() {
                    out.push(parse_f64(&path, v)?);
                }
            }
            out
        }
        _ => return Err(Error::invalid(format!("{}: payload missing", header_path.display()))),
    };
    Spectrogram::new(power, header.freqs, header.times, header.method)
}

/// Single ECG piece as `index,z`.
pub fn write_piece_csv(path: &Path, piece: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["index", "z"]).map_err(|e| csv_err(path, e))?;
    for (i, v) in piece.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the last column of a CSV with a header row.
pub fn read_column_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let last = rec.iter().next_back().ok_or_else(|| Error::invalid("empty CSV row"))?;
        out.push(parse_f64(path, last)?);
    }
    Ok(out)
}

/// Reads the column called `name` of a CSV with a header row.
pub fn read_named_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let idx = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::invalid(format!("{}: no column `{name}`", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let v = rec.get(idx).ok_or_else(|| Error::invalid("short CSV row"))?;
        out.push(parse_f64(path, v)?);
    }
    Ok(out)
}

/// Columns of equal length under a header, written losslessly.
pub fn write_columns_csv(path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) || names.len() != columns.len() {
        return Err(Error::invalid("columns must have equal lengths and one name each"));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(names).map_err(|e| csv_err(path, e))?;
    for i in 0..n {
        w.write_record(columns.iter().map(|c| fmt_f64(c[i]))).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let sig = MultiChannelSignal::new(
            200.0,
            0.0,
            vec![vec![0.1, -2.5e-7, std::f64::consts::PI], vec![1.0 / 3.0, 0.0, -1e300]],
        )
        .unwrap();
        let p = dir.path().join("s.csv");
        write_signal_csv(&p, &sig).unwrap();
        assert_eq!(read_signal_csv(&p).unwrap(), sig);
    }

    #[test]
    fn rate_inferred_without_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "t,a\n0,1\n0.5,2\n1.0,3\n").unwrap();
        let sig = read_signal_csv(&p).unwrap();
        assert_eq!(sig.sample_rate, 2.0);
        assert_eq!(sig.data[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spectrogram_round_trips_in_every_format() {
        let dir = tempfile::tempdir().unwrap();
        let s = Spectrogram::new(
            vec![0.5, 1.0 / 7.0, 2.0, 0.0, 3.25, 1e-300],
            vec![1.0, 2.0],
            vec![0.0, 0.1, 0.2],
            Method::Sst,
        )
        .unwrap();
        for (i, f) in [Format::Json, Format::Csv, Format::Bin].into_iter().enumerate() {
            let files = write_spectrogram(dir.path(), &format!("s{i}"), &s, f).unwrap();
            assert_eq!(files.len(), if f == Format::Json { 1 } else { 2 });
            assert_eq!(read_spectrogram(&files[0]).unwrap(), s);
        }
    }

    #[test]
    fn piece_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("piece.csv");
        let piece: Vec<f64> = (0..200).map(|i| (i as f64 / 17.0).sin()).collect();
        write_piece_csv(&p, &piece).unwrap();
        assert_eq!(read_column_csv(&p).unwrap(), piece);
        assert!(fs::read_to_string(&p).unwrap().starts_with("index,z\n0,"));
    }

    #[test]
    fn format_names() {
        assert_eq!("bin".parse::<Format>().unwrap(), Format::Bin);
        assert!("xml".parse::<Format>().is_err());
    }
}
