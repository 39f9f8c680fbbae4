//! Shared domain types: slab measurements, datasets, chronologies and the
//! 210Pb decay constants, plus the CSV dataset format.
//!
//! Units throughout: depths and thicknesses in cm, dry bulk densities in
//! g/cm³, activities in Bq/kg, areal activities in Bq/m², ages in years
//! before sampling (age zero is the core surface).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of the dataset CSV format.
pub const DATASET_HEADER: [&str; 8] = [
    "label",
    "depth",
    "density",
    "pb210",
    "sd_pb210",
    "thickness",
    "ra226",
    "sd_ra226",
];

/// 1 g/cm² expressed in kg/m².
const G_PER_CM2_IN_KG_PER_M2: f64 = 10.0;

/// Decay constant of 210Pb and its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    /// yr⁻¹
    pub lambda: f64,
    /// yr⁻¹
    pub lambda_sd: f64,
    /// yr
    pub half_life: f64,
}

impl DecayConstants {
    pub const PB210: DecayConstants = DecayConstants {
        lambda: 0.03118,
        lambda_sd: 0.00017,
        half_life: 22.23,
    };
}

impl Default for DecayConstants {
    fn default() -> Self {
        Self::PB210
    }
}

/// One sediment slab spanning `[depth - thickness, depth)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub label: String,
    /// Bottom of the slab, cm.
    pub depth: f64,
    /// Dry bulk density, g/cm³.
    pub density: f64,
    /// Total 210Pb activity, Bq/kg. May be below the supported level.
    pub pb210: f64,
    pub pb210_sd: f64,
    /// cm
    pub thickness: f64,
    /// 226Ra activity (supported 210Pb proxy), Bq/kg.
    pub ra226: f64,
    pub ra226_sd: f64,
}

impl Measurement {
    /// Top of the slab, cm.
    pub fn top(&self) -> f64 {
        self.depth - self.thickness
    }

    pub fn midpoint(&self) -> f64 {
        self.depth - 0.5 * self.thickness
    }

    /// Dry mass per unit area of the slab, kg/m².
    pub fn mass_per_area(&self) -> f64 {
        self.density * self.thickness * G_PER_CM2_IN_KG_PER_M2
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("depth", self.depth),
            ("density", self.density),
            ("pb210", self.pb210),
            ("sd_pb210", self.pb210_sd),
            ("thickness", self.thickness),
            ("ra226", self.ra226),
            ("sd_ra226", self.ra226_sd),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                out.push(format!("{}: {name} is not finite", self.label));
            }
        }
        let positive = [
            ("depth", self.depth),
            ("density", self.density),
            ("thickness", self.thickness),
            ("sd_pb210", self.pb210_sd),
            ("sd_ra226", self.ra226_sd),
        ];
        for (name, value) in positive {
            if value.is_finite() && value <= 0.0 {
                out.push(format!("{}: {name} must be > 0 (got {value})", self.label));
            }
        }
        out
    }
}

/// Validated, depth-ordered set of slab measurements from one core.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    core_id: String,
    sampling_year: Option<i32>,
    measurements: Vec<Measurement>,
}

impl Dataset {
    /// Builds a dataset, checking every row and the ordering invariants.
    pub fn new(core_id: impl Into<String>, measurements: Vec<Measurement>) -> Result<Self> {
        let mut problems = Vec::new();
        if measurements.is_empty() {
            problems.push("dataset is empty".to_string());
        }
        for m in &measurements {
            problems.extend(m.problems());
        }
        for pair in measurements.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.depth <= prev.depth {
                problems.push(format!(
                    "depths not increasing: {} ({}) follows {} ({})",
                    next.label, next.depth, prev.label, prev.depth
                ));
            } else if next.top() < prev.depth - 1e-9 {
                problems.push(format!(
                    "slabs overlap: {} starts at {} above the bottom of {} ({})",
                    next.label,
                    next.top(),
                    prev.label,
                    prev.depth
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            core_id: core_id.into(),
            sampling_year: None,
            measurements,
        })
    }

    pub fn with_sampling_year(mut self, year: i32) -> Self {
        self.sampling_year = Some(year);
        self
    }

    pub fn core_id(&self) -> &str {
        &self.core_id
    }

    pub fn sampling_year(&self) -> Option<i32> {
        self.sampling_year
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn deepest(&self) -> &Measurement {
        self.measurements.last().expect("datasets are non-empty")
    }

    /// Rebuilds the dataset from a subset of rows, keeping the core metadata.
    pub fn with_measurements(&self, measurements: Vec<Measurement>) -> Result<Self> {
        let mut out = Dataset::new(self.core_id.clone(), measurements)?;
        out.sampling_year = self.sampling_year;
        Ok(out)
    }

    /// Same rows with the total 210Pb and 226Ra columns replaced.
    pub(crate) fn with_activities(&self, pb210: &[f64], ra226: &[f64]) -> Self {
        let measurements = self
            .measurements
            .iter()
            .zip(pb210.iter().zip(ra226))
            .map(|(m, (&pb, &ra))| Measurement {
                pb210: pb,
                ra226: ra,
                ..m.clone()
            })
            .collect();
        Self {
            core_id: self.core_id.clone(),
            sampling_year: self.sampling_year,
            measurements,
        }
    }
}

/// Converts a per-mass concentration on a slab to an areal activity.
///
/// `concentration` in Bq/kg, `density` in g/cm³, `thickness` in cm; returns Bq/m².
pub fn slab_areal_activity(concentration: f64, density: f64, thickness: f64) -> Result<f64> {
    if !(density > 0.0) {
        return Err(Error::domain(format!("density must be > 0 (got {density})")));
    }
    if !(thickness > 0.0) {
        return Err(Error::domain(format!(
            "thickness must be > 0 (got {thickness})"
        )));
    }
    Ok(concentration * density * thickness * G_PER_CM2_IN_KG_PER_M2)
}

/// Dating method that produced a chronology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CI-CRS")]
    CiCrs,
    #[serde(rename = "R-CRS")]
    RCrs,
    #[serde(rename = "Plum")]
    Plum,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CiCrs, Method::RCrs, Method::Plum];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::CiCrs => "CI-CRS",
            Method::RCrs => "R-CRS",
            Method::Plum => "Plum",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ci-crs" | "cicrs" | "ci" | "crs" => Ok(Method::CiCrs),
            "r-crs" | "rcrs" | "mc" => Ok(Method::RCrs),
            "plum" => Ok(Method::Plum),
            other => Err(Error::domain(format!("unknown method '{other}'"))),
        }
    }
}

/// Age estimate at one depth, in years before sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeEstimate {
    pub depth: f64,
    pub age_mean: f64,
    pub lower95: f64,
    pub upper95: f64,
    /// Standard deviation used to normalize offsets. Propagated or Monte Carlo
    /// sd for the CRS variants, a quarter of the 95% interval for Plum.
    pub sd_proxy: f64,
}

impl AgeEstimate {
    pub fn interval_length(&self) -> f64 {
        self.upper95 - self.lower95
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chronology {
    pub method: Method,
    /// Ordered by depth.
    pub estimates: Vec<AgeEstimate>,
    /// Measured depths that could not be dated (truncated or undefined).
    pub undated: Vec<f64>,
}

impl Chronology {
    pub fn new(method: Method, estimates: Vec<AgeEstimate>) -> Self {
        Self {
            method,
            estimates,
            undated: Vec::new(),
        }
    }

    pub fn depths(&self) -> impl Iterator<Item = f64> + '_ {
        self.estimates.iter().map(|e| e.depth)
    }

    /// Mean age at `depth`, interpolated linearly between estimates.
    /// `None` outside the dated range.
    pub fn age_at(&self, depth: f64) -> Option<f64> {
        let est = &self.estimates;
        let first = est.first()?;
        let last = est.last()?;
        if depth < first.depth || depth > last.depth {
            return None;
        }
        let idx = est.partition_point(|e| e.depth < depth);
        let hi = &est[idx];
        if hi.depth == depth || idx == 0 {
            return Some(hi.age_mean);
        }
        let lo = &est[idx - 1];
        let f = (depth - lo.depth) / (hi.depth - lo.depth);
        Some(lo.age_mean + f * (hi.age_mean - lo.age_mean))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    label: String,
    depth: f64,
    density: f64,
    pb210: f64,
    sd_pb210: f64,
    thickness: f64,
    ra226: f64,
    sd_ra226: f64,
}

/// Reads a dataset CSV. Lines starting with `#` are comments. The core id is
/// taken from the file stem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let core_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(file, core_id, path)
}

pub fn read_dataset(reader: impl Read, core_id: impl Into<String>, source: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let format_err = |row: usize, column: &str, message: String| Error::Format {
        path: source.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };

    let headers = rdr.headers()?.clone();
    if headers.len() != DATASET_HEADER.len() {
        return Err(format_err(
            0,
            "header",
            format!("expected {} columns, found {}", DATASET_HEADER.len(), headers.len()),
        ));
    }
    for (found, expected) in headers.iter().zip(DATASET_HEADER) {
        if found != expected {
            return Err(format_err(0, expected, format!("header is '{found}'")));
        }
    }

    let mut measurements = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| format_err(row, "*", e.to_string()))?;
        if record.len() != DATASET_HEADER.len() {
            return Err(format_err(
                row,
                "*",
                format!("expected {} fields, found {}", DATASET_HEADER.len(), record.len()),
            ));
        }
        let num = |col: usize| -> Result<f64> {
            record[col].parse::<f64>().map_err(|e| {
                format_err(row, DATASET_HEADER[col], format!("'{}': {e}", &record[col]))
            })
        };
        measurements.push(Measurement {
            label: record[0].to_string(),
            depth: num(1)?,
            density: num(2)?,
            pb210: num(3)?,
            pb210_sd: num(4)?,
            thickness: num(5)?,
            ra226: num(6)?,
            ra226_sd: num(7)?,
        });
    }
    Dataset::new(core_id, measurements)
}

/// Writes a dataset CSV, creating or truncating `path`.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset_to(dataset, file, None)
}

/// Writes a dataset in CSV form, optionally preceded by a `# comment` line.
pub fn write_dataset_to(dataset: &Dataset, mut writer: impl Write, comment: Option<&str>) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Validation(vec!["dataset is empty".into()]));
    }
    if let Some(c) = comment {
        writeln!(writer, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(writer);
    for m in dataset.measurements() {
        wtr.serialize(Row {
            label: m.label.clone(),
            depth: m.depth,
            density: m.density,
            pb210: m.pb210,
            sd_pb210: m.pb210_sd,
            thickness: m.thickness,
            ra226: m.ra226,
            sd_ra226: m.ra226_sd,
        })?;
    }
    wtr.flush()?;
    Ok(())
}
