//! File formats: matrix CSV, schedule and assignment JSON, result tables and
//! run manifests. Every writer goes through a temporary file and a rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arm::{Arm, Family};
use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::schedule::PotentialOutcomeSchedule;

/// Shortest `{:e}` form with 17 significant digits; parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn matrix_header(horizon: usize) -> Vec<String> {
    std::iter::once("unit".to_string())
        .chain((1..=horizon).map(|t| format!("t{t}")))
        .collect()
}

/// Matrix CSV with header `unit,t1,...,tT` and 1-based unit ids.
pub fn matrix_csv_bytes(m: &Array2<f64>) -> Vec<u8> {
    let mut out = matrix_header(m.ncols()).join(",");
    out.push('\n');
    for (i, row) in m.outer_iter().enumerate() {
        out.push_str(&(i + 1).to_string());
        for v in row {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    write_atomic(path, &matrix_csv_bytes(m))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    parse_matrix_csv(fs::File::open(path)?)
}

/// Parse a matrix CSV. The unit column must hold the ids `1..=N` in order.
pub fn parse_matrix_csv(reader: impl Read) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::EmptyInput("CSV file has no header".into())),
        Some(r) => r.map_err(csv_error)?,
    };
    let width = header.len();
    if width < 2 || header.get(0).map(str::trim) != Some("unit") {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "header must be unit,t1,...,tT".into(),
        });
    }
    for (c, name) in header.iter().enumerate().skip(1) {
        if name.trim() != format!("t{c}") {
            return Err(Error::Parse {
                line: 1,
                column: c + 1,
                message: format!("expected column t{c}, found {name:?}"),
            });
        }
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Ragged {
                line,
                found: record.len(),
                expected: width,
            });
        }
        let unit: usize = record[0].trim().parse().map_err(|_| Error::Parse {
            line,
            column: 1,
            message: format!("bad unit id {:?}", &record[0]),
        })?;
        if unit != rows + 1 {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("expected unit id {}, found {unit}", rows + 1),
            });
        }
        for (c, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                message: format!("not a number: {field:?}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("CSV file has a header but no rows".into()));
    }
    Array2::from_shape_vec((rows, width - 1), values).map_err(|e| Error::Shape(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            column: 0,
            message: format!("{kind:?}"),
        },
    }
}

/// Assignments as 0/1 matrices in the matrix CSV layout.
pub fn write_assignment_csv(path: impl AsRef<Path>, z: &AssignmentMatrix) -> Result<()> {
    write_matrix_csv(path, &z.to_bits().mapv(f64::from))
}

pub fn read_assignment_csv(path: impl AsRef<Path>) -> Result<AssignmentMatrix> {
    let m = read_matrix_csv(path)?;
    let mut bits = Array2::zeros(m.dim());
    for ((i, t), &v) in m.indexed_iter() {
        bits[[i, t]] = match v {
            0.0 => 0,
            1.0 => 1,
            _ => {
                return Err(Error::Parse {
                    line: i as u64 + 2,
                    column: t + 2,
                    message: format!("assignment entries must be 0 or 1, found {v}"),
                })
            }
        };
    }
    AssignmentMatrix::from_bits(&bits)
}

#[derive(Serialize, Deserialize)]
struct AssignmentDoc {
    #[serde(rename = "T")]
    horizon: usize,
    family: Family,
    labels: Vec<Arm>,
}

pub fn assignment_to_json(z: &AssignmentMatrix) -> Result<String> {
    canonical_json(&AssignmentDoc {
        horizon: z.horizon(),
        family: z.family(),
        labels: z.labels().to_vec(),
    })
}

pub fn assignment_from_json(s: &str) -> Result<AssignmentMatrix> {
    let doc: AssignmentDoc = serde_json::from_str(s)?;
    AssignmentMatrix::new(doc.labels, doc.horizon, doc.family)
}

#[derive(Serialize, Deserialize)]
struct ScheduleDoc {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    horizon: usize,
    arms: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Single JSON document with arms keyed `always0`, `always1`, `pulse_t`.
/// Floats use the shortest round-tripping representation.
pub fn schedule_to_json(sched: &PotentialOutcomeSchedule) -> Result<String> {
    let arms = sched
        .arms()
        .map(|(arm, m)| (arm.key(), m.outer_iter().map(|r| r.to_vec()).collect()))
        .collect();
    canonical_json(&ScheduleDoc {
        n: sched.n_units(),
        horizon: sched.horizon(),
        arms,
    })
}

pub fn schedule_from_json(s: &str) -> Result<PotentialOutcomeSchedule> {
    let doc: ScheduleDoc = serde_json::from_str(s)?;
    let mut arms = Vec::with_capacity(doc.horizon + 1);
    for arm in Arm::all(doc.horizon) {
        let rows = doc.arms.get(&arm.key()).ok_or(Error::MissingArm(arm))?;
        if rows.len() != doc.n || rows.iter().any(|r| r.len() != doc.horizon) {
            return Err(Error::Shape(format!("arm {arm} is not {}x{}", doc.n, doc.horizon)));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        arms.push(Array2::from_shape_vec((doc.n, doc.horizon), flat).map_err(|e| Error::Shape(e.to_string()))?);
    }
    if doc.arms.len() != arms.len() {
        return Err(Error::Shape(format!(
            "schedule lists {} arms, T={} needs {}",
            doc.arms.len(),
            doc.horizon,
            arms.len()
        )));
    }
    PotentialOutcomeSchedule::from_arms(arms)
}

/// One matrix CSV per arm, named `<key>.csv`, in `dir`.
pub fn write_schedule_csv_dir(dir: impl AsRef<Path>, sched: &PotentialOutcomeSchedule) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&dir)?;
    sched
        .arms()
        .map(|(arm, m)| {
            let path = dir.as_ref().join(format!("{}.csv", arm.key()));
            write_matrix_csv(&path, m)?;
            Ok(path)
        })
        .collect()
}

pub fn read_schedule_csv_dir(dir: impl AsRef<Path>, horizon: usize) -> Result<PotentialOutcomeSchedule> {
    let arms = Arm::all(horizon)
        .map(|arm| {
            let path = dir.as_ref().join(format!("{}.csv", arm.key()));
            if !path.exists() {
                return Err(Error::MissingArm(arm));
            }
            read_matrix_csv(path)
        })
        .collect::<Result<Vec<_>>>()?;
    PotentialOutcomeSchedule::from_arms(arms)
}

/// Sorted keys, shortest round-tripping floats, two-space indentation.
pub fn canonical_json(value: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::InvalidParameter(format!("unknown format {s:?}"))),
        }
    }
}

/// Render rows as a JSON array or a CSV table with a header row.
pub fn table_bytes<R: Serialize>(rows: &[R], format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => Ok(canonical_json(&rows)?.into_bytes()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
    }
}

pub fn write_table<R: Serialize>(path: impl AsRef<Path>, rows: &[R], format: Format) -> Result<()> {
    write_atomic(path, &table_bytes(rows, format)?)
}

/// Write to a temporary file beside `path`, then rename over it.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Record of one command run: enough to reproduce and check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub params: serde_json::Value,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output path to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn start(command: Vec<String>, seed: Option<u64>, params: serde_json::Value) -> Self {
        let now = unix_now();
        Self {
            command,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now,
            finished_unix: now,
            params,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let digest = sha256_file(&path)?;
        self.inputs.insert(path.as_ref().display().to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let digest = sha256_file(&path)?;
        self.outputs.insert(path.as_ref().display().to_string(), digest);
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, canonical_json(self)?.as_bytes())
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
