//! File formats.
//!
//! Text files open with `#`-prefixed `key = value` header lines that carry
//! the tool version, config hash and seed, followed by a column line and
//! comma-separated rows. Binary time series start with the magic
//! `PSQTS001`, a little-endian u32 header length, the UTF-8 header text,
//! a u64 sample count and the f64 samples.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::spectral::Spectrum;
use crate::tomography::{Sinogram, WignerGrid};

pub const BINARY_MAGIC: &[u8; 8] = b"PSQTS001";

/// Provenance and metadata lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(version: &str, config_hash: &str, seed: u64) -> Self {
        let mut h = Self::default();
        h.set("version", version);
        h.set("config_hash", config_hash);
        h.set("seed", seed);
        h
    }

    /// Inserts or replaces a key.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Parse(format!("header has no '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::Parse(format!("header '{key}' is not a number: {raw}")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }

    fn parse_line(&mut self, line: &str) {
        if let Some((k, v)) = line.trim_start_matches('#').split_once('=') {
            self.set(k.trim(), v.trim());
        }
    }
}

/// Splits a text file into header, column names and data rows.
fn read_table(reader: impl Read, expected: &[&str]) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut header = Header::default();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            header.parse_line(line);
            continue;
        }
        if columns.is_none() {
            let names: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if names != expected {
                return Err(Error::Parse(format!(
                    "expected columns {}, found {line}",
                    expected.join(",")
                )));
            }
            columns = Some(names);
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        if row.len() != expected.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                n + 1,
                expected.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    if columns.is_none() {
        return Err(Error::Parse(format!("missing column line {}", expected.join(","))));
    }
    Ok((header, rows))
}

/// Uniformly sampled series with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub header: Header,
    pub dt: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    #[default]
    Binary,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(Error::Usage(format!("unknown format '{other}' (expected csv or binary)"))),
        }
    }
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Binary => "bin",
        }
    }
}

impl TimeSeries {
    pub fn new(header: Header, dt: f64, values: Vec<f64>) -> Self {
        let header = header.with("dt", dt);
        Self { header, dt, values }
    }

    pub fn write(&self, w: &mut impl Write, format: Format) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Binary => self.write_binary(w),
        }
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        w.write_all(self.header.render().as_bytes())?;
        writeln!(w, "t,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", k as f64 * self.dt, v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let text = self.header.render();
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads either format, detected from the first bytes.
    pub fn read(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes)
        } else {
            Self::from_csv(&bytes[..])
        }
    }

    fn from_binary(bytes: &[u8]) -> Result<Self> {
        let short = || Error::Parse("binary time series is truncated".into());
        let mut at = BINARY_MAGIC.len();
        let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
            let s = bytes.get(*at..*at + n).ok_or_else(short)?;
            *at += n;
            Ok(s)
        };
        let hlen = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let text = std::str::from_utf8(take(&mut at, hlen)?)
            .map_err(|_| Error::Parse("binary header is not UTF-8".into()))?;
        let mut header = Header::default();
        text.lines().for_each(|l| header.parse_line(l));
        let n = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
        let body = take(&mut at, n.checked_mul(8).ok_or_else(short)?)?;
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let dt = header.get_f64("dt")?;
        Ok(Self { header, dt, values })
    }

    fn from_csv(bytes: &[u8]) -> Result<Self> {
        let (header, rows) = read_table(bytes, &["t", "value"])?;
        let dt = match header.get_f64("dt") {
            Ok(dt) => dt,
            Err(_) if rows.len() >= 2 => rows[1][0] - rows[0][0],
            Err(e) => return Err(e),
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Parse(format!("time step must be positive, got {dt}")));
        }
        let values = rows.into_iter().map(|r| r[1]).collect();
        Ok(Self { header, dt, values })
    }
}

pub fn write_spectrum(w: &mut impl Write, header: &Header, s: &Spectrum) -> Result<()> {
    let mut h = header.clone();
    if let Some(t) = s.theta_inferred {
        h.set("theta", t);
    }
    if let Some(k) = s.averages {
        h.set("averages", k);
    }
    let mut w = std::io::BufWriter::new(w);
    w.write_all(h.render().as_bytes())?;
    writeln!(w, "freq_hz,psd_sn_units")?;
    for (f, v) in s.freqs.iter().zip(&s.values) {
        writeln!(w, "{f},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a spectrum; a `theta` header entry becomes the inferred angle.
pub fn read_spectrum(r: impl Read) -> Result<(Header, Spectrum)> {
    let (header, rows) = read_table(r, &["freq_hz", "psd_sn_units"])?;
    let (freqs, values) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    let mut s = Spectrum::new(freqs, values)?;
    if let Ok(theta) = header.get_f64("theta") {
        s = s.with_theta(theta);
    }
    if let Some(k) = header.get("averages").and_then(|k| k.parse().ok()) {
        s.averages = Some(k);
    }
    Ok((header, s))
}

pub fn write_sinogram(w: &mut impl Write, header: &Header, s: &Sinogram) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let h = header
        .clone()
        .with("angles", s.angles.len())
        .with("bins", s.bin_count())
        .with("half_range", s.half_range());
    w.write_all(h.render().as_bytes())?;
    writeln!(w, "angle_rad,bin_center,density")?;
    let centers = s.bin_centers();
    for (theta, col) in s.angles.iter().zip(&s.density) {
        for (c, d) in centers.iter().zip(col) {
            writeln!(w, "{theta},{c},{d}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a sinogram written by [`write_sinogram`]; sample counts are not
/// stored and come back as zero.
pub fn read_sinogram(r: impl Read) -> Result<(Header, Sinogram)> {
    let (header, rows) = read_table(r, &["angle_rad", "bin_center", "density"])?;
    let bins = header.get_f64("bins")? as usize;
    let half_range = header.get_f64("half_range")?;
    if bins == 0 || rows.len() % bins != 0 {
        return Err(Error::Parse(format!("{} rows do not form columns of {bins} bins", rows.len())));
    }
    let angles = rows.chunks(bins).map(|c| c[0][0]).collect();
    let mut s = Sinogram::layout(angles, bins, half_range)?;
    for (col, chunk) in s.density.iter_mut().zip(rows.chunks(bins)) {
        *col = chunk.iter().map(|r| r[2]).collect();
    }
    Ok((header, s))
}

/// Dense text grid: header with size and extent, then one line per y row
/// (lowest y first).
pub fn write_wigner(w: &mut impl Write, header: &Header, g: &WignerGrid) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let h = header
        .clone()
        .with("size", g.size)
        .with("extent", g.extent)
        .with("pixel", g.pixel());
    w.write_all(h.render().as_bytes())?;
    for row in g.values.chunks(g.size) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_wigner(r: impl Read) -> Result<(Header, WignerGrid)> {
    let mut header = Header::default();
    let mut values = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        let line = line.trim();
        if line.starts_with('#') {
            header.parse_line(line);
        } else if !line.is_empty() {
            for c in line.split(',') {
                values.push(
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("grid value '{c}': {e}")))?,
                );
            }
        }
    }
    let size = header.get_f64("size")? as usize;
    let extent = header.get_f64("extent")?;
    if values.len() != size * size {
        return Err(Error::Parse(format!("expected {} grid values, found {}", size * size, values.len())));
    }
    Ok((header, WignerGrid { size, extent, values }))
}

/// `key = value` or `key = value ± err` lines, grouped in `[sections]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub header: Header,
    lines: Vec<String>,
}

impl Report {
    pub fn new(header: Header) -> Self {
        Self {
            header,
            lines: Vec::new(),
        }
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        if !self.lines.is_empty() {
            self.lines.push(String::new());
        }
        self.lines.push(format!("[{name}]"));
        self
    }

    pub fn value(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.lines.push(format!("{key} = {value}"));
        self
    }

    pub fn estimate(&mut self, key: &str, value: f64, err: f64) -> &mut Self {
        self.lines.push(format!("{key} = {value} ± {err}"));
        self
    }

    pub fn render(&self) -> String {
        let mut out = self.header.render();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    /// Looks up `section.key` (or a bare key before any section) and
    /// returns the value with its uncertainty, if one was written.
    pub fn parse_value(text: &str, path: &str) -> Option<(f64, Option<f64>)> {
        let (want_section, key) = path.rsplit_once('.').unwrap_or(("", path));
        let mut section = "";
        for line in text.lines().map(str::trim) {
            if line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name;
                continue;
            }
            let Some((k, v)) = line.split_once('=') else { continue };
            if section == want_section && k.trim() == key {
                let mut parts = v.split('±');
                let value = parts.next()?.trim().parse().ok()?;
                let err = parts.next().and_then(|e| e.trim().parse().ok());
                return Some((value, err));
            }
        }
        None
    }
}
