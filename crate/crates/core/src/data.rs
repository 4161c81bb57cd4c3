//! CSV datasets: `s` feature columns followed by a `-1`/`+1` label column,
//! optionally headed by `f1,...,fs,label`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dual::{Label, LabeledPoint, Sample};
use crate::error::{Error, Result};
use crate::kernel::{dot, KernelSpec, NORM_SLACK};
use crate::planted::PlantedConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    File { path: String },
    Generated { config: PlantedConfig },
    Inline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<LabeledPoint>,
    pub dim: usize,
    pub provenance: Provenance,
    /// Factor the raw encodings were divided by during ingestion.
    pub scale: f64,
}

impl Dataset {
    pub fn new(points: Vec<LabeledPoint>, provenance: Provenance) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.encoding.len());
        for (i, p) in points.iter().enumerate() {
            if p.encoding.len() != dim {
                return Err(Error::Input(format!(
                    "row {}: expected {dim} features, found {}",
                    i + 1,
                    p.encoding.len()
                )));
            }
            if p.encoding.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("row {}: non-finite feature", i + 1)));
            }
        }
        Ok(Dataset { points, dim, provenance, scale: 1.0 })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample(&self, kernel: KernelSpec) -> Result<Sample> {
        Sample::new(kernel, self.points.clone())
    }

    pub fn encodings(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.encoding.clone()).collect()
    }

    /// Divides every encoding by the maximum norm if that exceeds 1.
    pub fn autoscale(&mut self) {
        let max_norm = self.points.iter().map(|p| dot(&p.encoding, &p.encoding).sqrt()).fold(0.0, f64::max);
        if max_norm > 1.0 {
            for p in &mut self.points {
                for v in &mut p.encoding {
                    *v /= max_norm;
                }
            }
            self.scale *= max_norm;
        }
    }

    /// Checks the unit-ball constraint under `kernel`.
    pub fn check_unit_ball(&self, kernel: &KernelSpec) -> Result<()> {
        let slack = if kernel.is_linear() { NORM_SLACK } else { crate::dual::UNIT_BALL_SLACK };
        for (i, p) in self.points.iter().enumerate() {
            let k = kernel.eval(&p.encoding, &p.encoding);
            if k > 1.0 + slack {
                return Err(Error::Input(format!(
                    "row {}: K(x, x) = {k} exceeds 1; rescale the data (or pass --autoscale for linear kernels)",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

fn is_header(record: &csv::StringRecord) -> bool {
    let n = record.len();
    n >= 2
        && record.iter().take(n - 1).enumerate().all(|(i, f)| f == format!("f{}", i + 1))
        && &record[n - 1] == "label"
}

fn parse_field(field: &str, row: usize, col: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Input(format!("row {row}, column {col}: cannot parse {field:?} as a finite number")))
}

fn records(reader: impl Read) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut row = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if row == 0 && is_header(&rec) {
            continue;
        }
        row += 1;
        out.push((row, rec));
    }
    Ok(out)
}

/// Parses labelled rows.
pub fn parse_labeled(reader: impl Read) -> Result<Vec<LabeledPoint>> {
    let rows = records(reader)?;
    let mut points = Vec::with_capacity(rows.len());
    let mut width = None;
    for (row, rec) in rows {
        if rec.len() < 2 {
            return Err(Error::Input(format!("row {row}: need at least one feature and a label")));
        }
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Input(format!("row {row}: expected {} columns, found {}", width.unwrap(), rec.len())));
        }
        let n = rec.len();
        let encoding = (0..n - 1).map(|c| parse_field(&rec[c], row, c + 1)).collect::<Result<Vec<_>>>()?;
        let raw = &rec[n - 1];
        let label = raw
            .parse::<f64>()
            .ok()
            .and_then(Label::from_value)
            .ok_or_else(|| Error::Input(format!("row {row}: label must be -1 or +1, found {raw:?}")))?;
        points.push(LabeledPoint::new(encoding, label));
    }
    Ok(points)
}

/// Parses query rows of `dim` features, ignoring a trailing label column if
/// present.
pub fn parse_features(reader: impl Read, dim: usize) -> Result<Vec<Vec<f64>>> {
    records(reader)?
        .into_iter()
        .map(|(row, rec)| {
            if rec.len() != dim && rec.len() != dim + 1 {
                return Err(Error::Input(format!(
                    "row {row}: expected {dim} or {} columns, found {}",
                    dim + 1,
                    rec.len()
                )));
            }
            (0..dim).map(|c| parse_field(&rec[c], row, c + 1)).collect()
        })
        .collect()
}

/// Reads a labelled CSV. With `autoscale` and a linear kernel the encodings
/// are divided by their maximum norm when it exceeds 1; otherwise any point
/// outside the unit ball (in feature space) is an error.
pub fn ingest_csv(path: &Path, kernel: &KernelSpec, autoscale: bool) -> Result<Dataset> {
    let points = parse_labeled(File::open(path)?)?;
    let mut ds = Dataset::new(points, Provenance::File { path: path.display().to_string() })?;
    if autoscale && kernel.is_linear() {
        ds.autoscale();
    }
    ds.check_unit_ball(kernel)?;
    Ok(ds)
}

/// Writes `f1..fs,label` then one row per point; values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_labeled(mut w: impl Write, points: &[LabeledPoint]) -> Result<()> {
    let dim = points.first().map_or(0, |p| p.encoding.len());
    let header: Vec<String> = (1..=dim).map(|i| format!("f{i}")).chain(["label".to_string()]).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in points {
        let row: Vec<String> = p.encoding.iter().map(|v| v.to_string()).chain([p.label.as_i8().to_string()]).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_csv(path: &Path, points: &[LabeledPoint]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    write_labeled(&mut f, points)?;
    f.flush()?;
    Ok(())
}
