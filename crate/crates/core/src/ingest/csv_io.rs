//! Native CSV format (`id,strategy,t,y_r,y_c,f0..f{d-1}`) and arbitrary
//! column maps, plus the JSON provenance sidecar.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, Strategy, UserSample};
use crate::error::{Error, Result};

/// Maps dataset fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub strategy: Option<String>,
    pub t: String,
    pub y_r: String,
    pub y_c: String,
    /// Feature columns in order. `None` takes every unmapped column in file order.
    #[serde(default)]
    pub features: Option<Vec<String>>,
}

impl ColumnMap {
    pub fn native() -> Self {
        Self {
            id: Some("id".into()),
            strategy: Some("strategy".into()),
            t: "t".into(),
            y_r: "y_r".into(),
            y_c: "y_c".into(),
            features: None,
        }
    }
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self::native()
    }
}

fn find(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
}

fn parse_num(field: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse { row, msg: format!("column {col:?}: cannot parse {field:?} as a number") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, msg: format!("column {col:?}: non-finite value {field:?}") });
    }
    Ok(v)
}

/// Reads a dataset from any reader. Row numbers in errors are 1-based file
/// lines (the header is line 1).
pub fn read_csv<R: Read>(reader: R, schema: &ColumnMap, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = schema.id.as_deref().map(|c| find(&headers, c)).transpose()?;
    let strategy_col = schema.strategy.as_deref().map(|c| find(&headers, c)).transpose()?;
    let t_col = find(&headers, &schema.t)?;
    let yr_col = find(&headers, &schema.y_r)?;
    let yc_col = find(&headers, &schema.y_c)?;

    let feature_cols: Vec<usize> = match &schema.features {
        Some(names) => names.iter().map(|n| find(&headers, n)).collect::<Result<_>>()?,
        None => {
            let mapped = [id_col, strategy_col, Some(t_col), Some(yr_col), Some(yc_col)];
            (0..headers.len()).filter(|i| !mapped.contains(&Some(*i))).collect()
        }
    };
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }

    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(Error::Parse { row, msg: format!("expected {} fields, got {}", headers.len(), rec.len()) });
        }
        let t = parse_num(&rec[t_col], row, &schema.t)?;
        let t = if t == 0.0 {
            0
        } else if t == 1.0 {
            1
        } else {
            return Err(Error::Parse { row, msg: format!("treatment must be 0 or 1, got {t}") });
        };
        let strategy = match strategy_col {
            Some(c) => rec[c].parse::<Strategy>().map_err(|msg| Error::Parse { row, msg })?,
            None => Strategy::Explore,
        };
        samples.push(UserSample {
            id: id_col.map(|c| rec[c].to_string()).unwrap_or_else(|| (row - 2).to_string()),
            x: feature_cols.iter().map(|&c| parse_num(&rec[c], row, &headers[c])).collect::<Result<_>>()?,
            t,
            y_r: parse_num(&rec[yr_col], row, &schema.y_r)?,
            y_c: parse_num(&rec[yc_col], row, &schema.y_c)?,
            strategy,
        });
    }
    Dataset::new(samples, DatasetMeta { name: name.to_string(), provenance: "csv".into() })
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnMap) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let mut ds = read_csv(File::open(path)?, schema, name)?;
    ds.meta.provenance = path.display().to_string();
    Ok(ds)
}

pub fn native_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["id", "strategy", "t", "y_r", "y_c"].iter().map(|s| s.to_string()).collect();
    h.extend((0..d).map(|j| format!("f{j}")));
    h
}

/// Writes the native format. Reals use the shortest round-trip representation.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(native_header(ds.dim()))?;
    for s in ds.samples() {
        let mut rec =
            vec![s.id.clone(), s.strategy.as_str().into(), s.t.to_string(), s.y_r.to_string(), s.y_c.to_string()];
        rec.extend(s.x.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, std::io::BufWriter::new(File::create(path)?))
}

/// Where a dataset file came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: String,
    pub recipe: String,
    pub seed: Option<u64>,
    pub split: Option<String>,
    pub n: usize,
    pub d: usize,
}

/// `dataset.csv` → `dataset.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_sidecar(csv_path: &Path, prov: &Provenance) -> Result<()> {
    let mut f = File::create(sidecar_path(csv_path))?;
    serde_json::to_writer_pretty(&mut f, prov)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_sidecar(csv_path: &Path) -> Result<Provenance> {
    Ok(serde_json::from_reader(File::open(sidecar_path(csv_path))?)?)
}
