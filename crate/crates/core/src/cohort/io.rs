//! Cohort and feature file formats.
//!
//! Cohort: CSV with header `id,age,predicted_age,sex,race`.
//!
//! Features, either
//! * CSV: header `id,f0,...,f{d-1}`, one subject per row, or
//! * binary: magic `FEATMAT1`, little-endian `u64` rows, `u64` cols, then
//!   `rows * cols` little-endian `f32` in row-major order. Row ids come from a
//!   sidecar text file with one id per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Sex, SubjectRecord};
use crate::error::{AuditError, Result};
use crate::featspace::FeatureMatrix;

pub const FEATURE_MAGIC: &[u8; 8] = b"FEATMAT1";

const COHORT_COLUMNS: [&str; 5] = ["id", "age", "predicted_age", "sex", "race"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| AuditError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AuditError::io(path, e))
}

fn csv_error(source: &str, e: csv::Error) -> AuditError {
    match e.position() {
        Some(pos) => AuditError::Data(format!("{source}: line {}: {e}", pos.line())),
        None => AuditError::Data(format!("{source}: {e}")),
    }
}

pub fn read_cohort_csv(path: &Path) -> Result<Vec<SubjectRecord>> {
    parse_cohort_csv(open(path)?, &path.display().to_string())
}

/// Parses cohort CSV from any reader. `source` names the input in errors.
pub fn parse_cohort_csv<R: Read>(reader: R, source: &str) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(COHORT_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AuditError::Data(format!("{source}: missing column {name:?} in header")))?;
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let line = row + 2;
        let field = |i: usize| rec.get(index[i]).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            let raw = field(i);
            let v: f64 = raw.parse().map_err(|_| {
                AuditError::Data(format!(
                    "{source}: line {line}: column {:?} is not a number: {raw:?}",
                    COHORT_COLUMNS[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(AuditError::Data(format!(
                    "{source}: line {line}: column {:?} is not finite",
                    COHORT_COLUMNS[i]
                )));
            }
            Ok(v)
        };
        let id = field(0);
        if id.is_empty() {
            return Err(AuditError::Data(format!("{source}: line {line}: empty id")));
        }
        let age = number(1)?;
        if age <= 0.0 {
            return Err(AuditError::Data(format!(
                "{source}: line {line}: age must be positive, got {age}"
            )));
        }
        let predicted_age = number(2)?;
        let sex_raw = field(3);
        let sex = Sex::parse(sex_raw);
        if sex.is_none() && !matches!(sex_raw.to_ascii_lowercase().as_str(), "" | "na" | "n/a") {
            return Err(AuditError::Data(format!(
                "{source}: line {line}: unrecognized sex {sex_raw:?}"
            )));
        }
        out.push(SubjectRecord::new(id, age, predicted_age, sex, field(4)));
    }
    Ok(out)
}

pub fn write_cohort_csv(path: &Path, records: &[SubjectRecord]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| AuditError::io(path, e);
    writeln!(w, "{}", COHORT_COLUMNS.join(",")).map_err(io)?;
    for r in records {
        let sex = r.sex.map_or("", Sex::as_str);
        writeln!(w, "{},{},{},{},{}", r.id, r.age, r.predicted_age, sex, r.race_raw).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let source = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_error(&source, e))?.clone();
    if headers.get(0) != Some("id") || headers.len() < 2 {
        return Err(AuditError::Data(format!(
            "{source}: feature header must be `id,f0,...`"
        )));
    }
    let cols = headers.len() - 1;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(&source, e))?;
        ids.push(rec[0].to_string());
        for (j, raw) in rec.iter().skip(1).enumerate() {
            let v: f64 = raw.parse().map_err(|_| {
                AuditError::Data(format!(
                    "{source}: line {}: feature f{j} is not a number: {raw:?}",
                    row + 2
                ))
            })?;
            data.push(v);
        }
    }
    FeatureMatrix::new(ids, cols, data).map_err(|e| e.context(source))
}

pub fn write_feature_csv(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| AuditError::io(path, e);
    write!(w, "id").map_err(io)?;
    for j in 0..m.cols() {
        write!(w, ",f{j}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for i in 0..m.rows() {
        write!(w, "{}", m.ids()[i]).map_err(io)?;
        for v in m.row(i) {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_bin(path: &Path, ids_path: &Path) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| AuditError::io(path, e))?;
    let source = path.display().to_string();
    if bytes.len() < 24 || &bytes[..8] != FEATURE_MAGIC {
        return Err(AuditError::Data(format!("{source}: missing FEATMAT1 header")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let expected = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(24));
    if expected != Some(bytes.len() as u64) {
        return Err(AuditError::Data(format!(
            "{source}: header says {rows} x {cols} but file has {} bytes",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();

    let ids: Vec<String> = BufReader::new(open(ids_path)?)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| AuditError::io(ids_path, e))?
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    if ids.len() as u64 != rows {
        return Err(AuditError::Data(format!(
            "{}: {} ids for {rows} feature rows",
            ids_path.display(),
            ids.len()
        )));
    }
    FeatureMatrix::new(ids, cols as usize, data).map_err(|e| e.context(source))
}

/// Writes the binary layout. Values are narrowed to `f32`.
pub fn write_feature_bin(path: &Path, ids_path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| AuditError::io(path, e);
    w.write_all(FEATURE_MAGIC).map_err(io)?;
    w.write_all(&(m.rows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.cols() as u64).to_le_bytes()).map_err(io)?;
    for v in m.data() {
        w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let mut ids = create(ids_path)?;
    let io = |e| AuditError::io(ids_path, e);
    for id in m.ids() {
        writeln!(ids, "{id}").map_err(io)?;
    }
    ids.flush().map_err(io)
}

/// Reads either feature format, sniffing the binary magic.
///
/// Binary input needs `ids_path`; when absent, `<path>.ids` is tried.
pub fn read_features(path: &Path, ids_path: Option<&Path>) -> Result<FeatureMatrix> {
    let mut head = [0u8; 8];
    let is_bin = {
        let mut f = open(path)?;
        matches!(f.read_exact(&mut head), Ok(())) && &head == FEATURE_MAGIC
    };
    if is_bin {
        let fallback = path.with_extension(match path.extension() {
            Some(ext) => format!("{}.ids", ext.to_string_lossy()),
            None => "ids".to_string(),
        });
        read_feature_bin(path, ids_path.unwrap_or(&fallback))
    } else {
        read_feature_csv(path)
    }
}

/// Links each record to its feature row by id. Returns how many records have
/// no features.
pub fn attach_features(records: &mut [SubjectRecord], features: &FeatureMatrix) -> usize {
    let by_id: HashMap<&str, usize> = features
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut missing = 0;
    for r in records.iter_mut() {
        r.feature_row = by_id.get(r.id.as_str()).copied();
        if r.feature_row.is_none() {
            missing += 1;
        }
    }
    missing
}
