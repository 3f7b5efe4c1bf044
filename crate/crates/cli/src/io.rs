//! File ingestion and atomic output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nvdephase::budget::SampleSet;
use nvdephase::{DecayCurve, OdmrSpectrum};

use crate::CliError;

/// Leading `# key: value` lines become metadata; everything after is CSV.
fn split_metadata(text: &str) -> (BTreeMap<String, String>, usize, &str) {
    let mut meta = BTreeMap::new();
    let mut offset = 0;
    let mut skipped = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        let Some(rest) = trimmed.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.split_once(':') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        offset += line.len();
        skipped += 1;
    }
    (meta, skipped, &text[offset..])
}

fn read(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::Usage(format!("{}: empty file", path.display())));
    }
    Ok(text)
}

/// Parses numeric columns `required[..] [optional]` and returns them column-wise.
fn numeric_columns(
    path: &Path,
    text: &str,
    line_offset: usize,
    required: &[&str],
    optional: &str,
) -> Result<Vec<Vec<f64>>, CliError> {
    let where_ = |line: u64| format!("{}:{}", path.display(), line as usize + line_offset);
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| CliError::Usage(format!("{}: {e}", where_(1))))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let mut expect: Vec<&str> = required.to_vec();
    if names.len() == required.len() + 1 {
        expect.push(optional);
    }
    if names != expect {
        return Err(CliError::Usage(format!(
            "{}: header must be '{}[,{optional}]', got '{}'",
            where_(1),
            required.join(","),
            names.join(",")
        )));
    }
    let mut cols = vec![Vec::new(); expect.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != expect.len() {
            return Err(CliError::Usage(format!("{}: expected {} columns, found {}", where_(line), expect.len(), rec.len())));
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: column '{}' is not a number: '{field}'", where_(line), expect[i])))?;
            cols[i].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", path.display())));
    }
    if cols.len() == required.len() {
        cols.push(vec![0.0; cols[0].len()]);
    }
    Ok(cols)
}

/// Reads `t_us,signal[,sigma]`.
pub fn ingest_decay_csv(path: &Path) -> Result<DecayCurve, CliError> {
    let text = read(path)?;
    let (metadata, skipped, body) = split_metadata(&text);
    let mut c = numeric_columns(path, body, skipped, &["t_us", "signal"], "sigma")?;
    let sigma = c.pop().expect("three columns");
    let signal = c.pop().expect("three columns");
    let t = c.pop().expect("three columns");
    let mut curve = DecayCurve::new(t, signal, sigma).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    curve.metadata = metadata;
    Ok(curve)
}

/// Reads `freq_mhz,contrast[,sigma]`.
pub fn ingest_spectrum_csv(path: &Path) -> Result<OdmrSpectrum, CliError> {
    let text = read(path)?;
    let (_, skipped, body) = split_metadata(&text);
    let mut c = numeric_columns(path, body, skipped, &["freq_mhz", "contrast"], "sigma")?;
    let sigma = c.pop().expect("three columns");
    let contrast = c.pop().expect("three columns");
    let freq = c.pop().expect("three columns");
    OdmrSpectrum::new(freq, contrast, sigma).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Reads a sample set (`{"samples": [...]}` with `SampleRecord` fields).
pub fn ingest_samples_json(path: &Path) -> Result<SampleSet, CliError> {
    let text = read(path)?;
    SampleSet::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn decay_csv(c: &DecayCurve) -> String {
    let mut s = String::new();
    for (k, v) in &c.metadata {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str("t_us,signal,sigma\n");
    for i in 0..c.len() {
        s.push_str(&format!("{},{},{}\n", c.t[i], c.signal[i], c.sigma[i]));
    }
    s
}

pub fn spectrum_csv(sp: &OdmrSpectrum) -> String {
    let mut s = String::from("freq_mhz,contrast,sigma\n");
    for i in 0..sp.len() {
        s.push_str(&format!("{},{},{}\n", sp.freq[i], sp.contrast[i], sp.sigma[i]));
    }
    s
}

/// Rows of plain CSV from a header and pre-formatted records.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Usage(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("results serialize");
    s.push('\n');
    s
}

/// Writes to stdout for `-`, otherwise through a temp file renamed into place.
pub fn emit(out: &str, content: &str) -> Result<(), CliError> {
    if out == "-" {
        let mut so = std::io::stdout().lock();
        return so.write_all(content.as_bytes()).map_err(|e| CliError::Usage(format!("stdout: {e}")));
    }
    let path = Path::new(out);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| CliError::Usage(format!("{out}: {e}"));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(content.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
