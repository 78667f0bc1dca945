//! Treatment/outcome constructions over the public US Census 1990 and
//! Covertype tables.
//!
//! Both recipes are deterministic functions of the raw table. Median
//! thresholds use strict comparisons, so ties land on the 0 side. The
//! retained feature columns come from an editable [`RecipeManifest`]; a
//! mismatch with the documented sample count or width is logged, not fatal.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, Strategy, UserSample};
use crate::error::{Error, Result};
use crate::util::median;

pub const CENSUS_EXPECTED_N: usize = 225_814;
pub const CENSUS_EXPECTED_D: usize = 46;
pub const COVTYPE_EXPECTED_N: usize = 244_365;
pub const COVTYPE_EXPECTED_D: usize = 51;

/// Column-major numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    data: Vec<Vec<f32>>,
}

impl RawTable {
    pub fn new(columns: Vec<String>) -> Self {
        let data = vec![Vec::new(); columns.len()];
        Self { columns, data }
    }

    pub fn push_row(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::ShapeMismatch { expected: self.columns.len(), got: row.len() });
        }
        self.data.iter_mut().zip(row).for_each(|(c, v)| c.push(*v));
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f32]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
            .ok_or_else(|| Error::Schema(format!("raw table lacks column {name:?}")))
    }

    /// Reads comma-separated numbers. With `columns = None` the first line is
    /// the header. `.gz` paths are decompressed on the fly.
    pub fn read(path: impl AsRef<Path>, columns: Option<Vec<String>>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        let reader: Box<dyn Read> =
            if path.extension().is_some_and(|e| e == "gz") { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
        Self::from_reader(BufReader::new(reader), columns)
    }

    pub fn from_reader<R: BufRead>(reader: R, columns: Option<Vec<String>>) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let columns = match columns {
            Some(c) => c,
            None => {
                let (_, header) = lines.next().ok_or_else(|| Error::Schema("empty raw table".into()))?;
                header?.split(',').map(|s| s.trim().to_string()).collect()
            }
        };
        let mut table = Self::new(columns);
        let mut row = Vec::with_capacity(table.columns.len());
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            row.clear();
            for field in line.split(',') {
                let v: f32 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse { row: i + 1, msg: format!("cannot parse {field:?}") })?;
                row.push(v);
            }
            table.push_row(&row).map_err(|e| Error::Parse { row: i + 1, msg: e.to_string() })?;
        }
        Ok(table)
    }
}

/// Ordered list of raw columns kept as model features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeManifest {
    pub features: Vec<String>,
}

impl RecipeManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    /// Census: all columns except the identifier, the filter, treatment and
    /// outcome columns, other income and earnings fields, marital status,
    /// age, ancestry, and the hours/weeks worked proxies of the treatment.
    pub fn census_default() -> Self {
        const DROP: &[&str] = &[
            "caseid",
            "dAge",
            "dAncstry1",
            "dAncstry2",
            "iCitizen",
            "iFertil",
            "dHours",
            "dHour89",
            "dWeek89",
            "iWork89",
            "iYearwrk",
            "iMarital",
            "dRearning",
            "dRpincome",
            "dPoverty",
            "dIncome1",
            "dIncome2",
            "dIncome3",
            "dIncome4",
            "dIncome5",
            "dIncome6",
            "dIncome7",
            "dIncome8",
        ];
        Self { features: CENSUS_COLUMNS.iter().filter(|c| !DROP.contains(c)).map(|c| c.to_string()).collect() }
    }

    /// Covertype: all 54 attributes except the treatment (hydrology
    /// distances) and outcome (fire-point distance) columns.
    pub fn covtype_default() -> Self {
        const DROP: &[&str] = &[
            "Horizontal_Distance_To_Hydrology",
            "Vertical_Distance_To_Hydrology",
            "Horizontal_Distance_To_Fire_Points",
        ];
        Self {
            features: covtype_columns()
                .into_iter()
                .filter(|c| c != "Cover_Type" && !DROP.contains(&c.as_str()))
                .collect(),
        }
    }
}

/// Header of `USCensus1990.data.txt`.
pub const CENSUS_COLUMNS: &[&str] = &[
    "caseid",
    "dAge",
    "dAncstry1",
    "dAncstry2",
    "iAvail",
    "iCitizen",
    "iClass",
    "dDepart",
    "iDisabl1",
    "iDisabl2",
    "iEnglish",
    "iFeb55",
    "iFertil",
    "dHispanic",
    "dHour89",
    "dHours",
    "iImmigr",
    "dIncome1",
    "dIncome2",
    "dIncome3",
    "dIncome4",
    "dIncome5",
    "dIncome6",
    "dIncome7",
    "dIncome8",
    "dIndustry",
    "iKorean",
    "iLang1",
    "iLooking",
    "iMarital",
    "iMay75880",
    "iMeans",
    "iMilitary",
    "iMobility",
    "iMobillim",
    "dOccup",
    "iOthrserv",
    "iPerscare",
    "dPOB",
    "dPoverty",
    "dPwgt1",
    "iRagechld",
    "dRearning",
    "iRelat1",
    "iRelat2",
    "iRemplpar",
    "iRiders",
    "iRlabor",
    "iRownchld",
    "dRpincome",
    "iRPOB",
    "iRrelchld",
    "iRspouse",
    "iRvetserv",
    "iSchool",
    "iSept80",
    "iSex",
    "iSubfam1",
    "iSubfam2",
    "iTmpabsnt",
    "dTravtime",
    "iVietnam",
    "dWeek89",
    "iWork89",
    "iWorklwk",
    "iWWII",
    "iYearsch",
    "iYearwrk",
    "dYrsserv",
];

/// Column names for the header-less `covtype.data` file.
pub fn covtype_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "Elevation",
        "Aspect",
        "Slope",
        "Horizontal_Distance_To_Hydrology",
        "Vertical_Distance_To_Hydrology",
        "Horizontal_Distance_To_Roadways",
        "Hillshade_9am",
        "Hillshade_Noon",
        "Hillshade_3pm",
        "Horizontal_Distance_To_Fire_Points",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=4).map(|i| format!("Wilderness_Area{i}")));
    cols.extend((1..=40).map(|i| format!("Soil_Type{i}")));
    cols.push("Cover_Type".into());
    cols
}

const SPRUCE_FIR: f32 = 1.0;
const LODGEPOLE_PINE: f32 = 2.0;

fn feature_columns<'a>(raw: &'a RawTable, manifest: &RecipeManifest) -> Result<Vec<&'a [f32]>> {
    manifest.features.iter().map(|c| raw.column(c)).collect()
}

fn assemble(
    raw: &RawTable,
    manifest: &RecipeManifest,
    keep: &[usize],
    t: impl Fn(usize) -> u8,
    y_r: impl Fn(usize) -> f64,
    y_c: impl Fn(usize) -> f64,
    name: &str,
) -> Result<Dataset> {
    let cols = feature_columns(raw, manifest)?;
    let samples = keep
        .iter()
        .map(|&i| UserSample {
            id: i.to_string(),
            x: cols.iter().map(|c| f64::from(c[i])).collect(),
            t: t(i),
            y_r: y_r(i),
            y_c: y_c(i),
            strategy: Strategy::Explore,
        })
        .collect();
    Dataset::new(samples, DatasetMeta { name: name.into(), provenance: format!("recipe={name}") })
}

fn check_expected(name: &str, ds: &Dataset, n: usize, d: usize) {
    if ds.len() != n || ds.dim() != d {
        log::warn!("{name}: built n={} d={}, documented n={n} d={d}", ds.len(), ds.dim());
    }
}

/// Census: adults with one or more children, U.S.-born, under 50. Treatment
/// is working more hours than the filtered median; value is `dIncome1`; cost
/// is minus the child count (`iFertil - 1`).
pub fn build_census(raw: &RawTable, manifest: &RecipeManifest) -> Result<Dataset> {
    let fertil = raw.column("iFertil")?;
    let citizen = raw.column("iCitizen")?;
    let age = raw.column("dAge")?;
    let hours = raw.column("dHours")?;
    let income = raw.column("dIncome1")?;
    feature_columns(raw, manifest)?;

    let keep: Vec<usize> =
        (0..raw.n_rows()).filter(|&i| fertil[i] >= 1.5 && citizen[i] == 0.0 && age[i] < 5.0).collect();
    let h: Vec<f64> = keep.iter().map(|&i| f64::from(hours[i])).collect();
    let med = median(&h);
    let ds = assemble(
        raw,
        manifest,
        &keep,
        |i| u8::from(f64::from(hours[i]) > med),
        |i| f64::from(income[i]),
        |i| -(f64::from(fertil[i]) - 1.0),
        "census",
    )?;
    check_expected("census", &ds, CENSUS_EXPECTED_N, CENSUS_EXPECTED_D);
    Ok(ds)
}

/// Covertype: Spruce-Fir and Lodgepole Pine stands strictly above the median
/// elevation of those two classes. Treatment is hydrology distance below the
/// filtered median; value is fire-point distance below its filtered median;
/// cost is 1 for Lodgepole Pine and 0 for Spruce-Fir.
pub fn build_covtype(raw: &RawTable, manifest: &RecipeManifest) -> Result<Dataset> {
    let cover = raw.column("Cover_Type")?;
    let elev = raw.column("Elevation")?;
    let hydro = raw.column("Horizontal_Distance_To_Hydrology")?;
    let fire = raw.column("Horizontal_Distance_To_Fire_Points")?;
    feature_columns(raw, manifest)?;

    let two: Vec<usize> = (0..raw.n_rows()).filter(|&i| cover[i] == SPRUCE_FIR || cover[i] == LODGEPOLE_PINE).collect();
    let med_elev = median(&two.iter().map(|&i| f64::from(elev[i])).collect::<Vec<_>>());
    let keep: Vec<usize> = two.into_iter().filter(|&i| f64::from(elev[i]) > med_elev).collect();
    let med_hydro = median(&keep.iter().map(|&i| f64::from(hydro[i])).collect::<Vec<_>>());
    let med_fire = median(&keep.iter().map(|&i| f64::from(fire[i])).collect::<Vec<_>>());
    let ds = assemble(
        raw,
        manifest,
        &keep,
        |i| u8::from(f64::from(hydro[i]) < med_hydro),
        |i| f64::from(u8::from(f64::from(fire[i]) < med_fire)),
        |i| f64::from(u8::from(cover[i] == LODGEPOLE_PINE)),
        "covtype",
    )?;
    check_expected("covtype", &ds, COVTYPE_EXPECTED_N, COVTYPE_EXPECTED_D);
    Ok(ds)
}
