//! Loading inputs and writing outputs with paths in error messages.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ponderomotive::io::{read_spectrum, Header, TimeSeries, BINARY_MAGIC};
use ponderomotive::spectral::{infer_angle, CalibrationModel, Spectrum};
use ponderomotive::{Error, Result};

pub const ROLE_PHOTOCURRENT: &str = "photocurrent";
pub const ROLE_REFERENCE: &str = "shot_reference";

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| io_error(path, e))?;
    w.flush().map_err(|e| io_error(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

/// Replaces directories by their `.bin` and `.csv` files, sorted by name.
pub fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_error(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| {
                    e.is_file() && matches!(e.extension().and_then(|x| x.to_str()), Some("bin" | "csv"))
                })
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub enum Input {
    Series(TimeSeries),
    Spectrum(Header, Spectrum),
}

impl Input {
    pub fn header(&self) -> &Header {
        match self {
            Input::Series(s) => &s.header,
            Input::Spectrum(h, _) => h,
        }
    }

    pub fn is_reference(&self) -> bool {
        self.header().get("role") == Some(ROLE_REFERENCE)
    }
}

/// Reads a time series (binary or CSV) or a spectrum CSV.
pub fn load(path: &Path) -> Result<Input> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    let context = |e: Error| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    };
    if bytes.starts_with(BINARY_MAGIC) {
        return TimeSeries::read(&bytes[..]).map(Input::Series).map_err(context);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::Parse(format!("{}: not a text file", path.display())))?;
    let columns = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    match columns.replace(' ', "").as_str() {
        "t,value" => TimeSeries::read(&bytes[..]).map(Input::Series).map_err(context),
        "freq_hz,psd_sn_units" => read_spectrum(&bytes[..])
            .map(|(h, s)| Input::Spectrum(h, s))
            .map_err(context),
        _ => Err(Error::Parse(format!(
            "{}: neither a time series (t,value) nor a spectrum (freq_hz,psd_sn_units)",
            path.display()
        ))),
    }
}

/// Homodyne angle of a record: inferred from its DC monitor reading when a
/// calibration is configured, otherwise the nominal `theta` entry.
pub fn record_angle(header: &Header, calib: Option<&CalibrationModel>, path: &Path) -> Result<f64> {
    if let (Some(c), Ok(v)) = (calib, header.get_f64("v_dc")) {
        return infer_angle(v, c);
    }
    header
        .get_f64("theta")
        .map_err(|_| Error::Usage(format!("{}: no homodyne angle in the header", path.display())))
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string()
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string()
}

/// Label for a mode frequency, e.g. `70.1khz`.
pub fn mode_tag(freq_hz: f64) -> String {
    format!("{:.1}khz", freq_hz / 1e3)
}
