//! CSV ingestion and export, feature standardization and the planted-blob
//! generator used by the recovery experiments.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelspace::DataMatrix;

/// Label column by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub label_column: Option<LabelColumn>,
    pub delimiter: char,
    pub has_header: bool,
    pub standardize: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            label_column: None,
            delimiter: ',',
            has_header: true,
            standardize: true,
        }
    }
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            ..Default::default()
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        if self.delimiter.is_ascii() {
            Ok(self.delimiter as u8)
        } else {
            Err(Error::Config(format!(
                "delimiter {:?} is not a single byte",
                self.delimiter
            )))
        }
    }
}

/// Reads a numeric CSV. Row and column numbers in parse errors are 1-based
/// positions in the file. Labels that all parse as nonnegative integers are
/// kept as is; otherwise they are numbered by first appearance. Applies
/// [`standardize`] when `spec.standardize` is set.
pub fn load_csv(spec: &DatasetSpec) -> Result<DataMatrix> {
    let file = File::open(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter_byte()?)
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = reader.records();

    let header: Option<Vec<String>> = if spec.has_header {
        match records.next() {
            Some(r) => Some(r?.iter().map(|s| s.trim().to_string()).collect()),
            None => return Err(Error::Format("file is empty".into())),
        }
    } else {
        None
    };

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for r in records {
        rows.push(r?);
    }
    let width = header
        .as_ref()
        .map(|h| h.len())
        .or_else(|| rows.first().map(|r| r.len()))
        .ok_or_else(|| Error::Format("file has no data rows".into()))?;
    let first_row = usize::from(spec.has_header) + 1;
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {width}",
                first_row + i,
                r.len()
            )));
        }
    }

    let label_idx = match &spec.label_column {
        None => None,
        Some(LabelColumn::Index(i)) if *i < width => Some(*i),
        Some(LabelColumn::Index(i)) => {
            return Err(Error::Config(format!(
                "label column {i} out of range for {width} columns"
            )))
        }
        Some(LabelColumn::Name(name)) => {
            let h = header.as_ref().ok_or_else(|| {
                Error::Config("a named label column needs a header row".into())
            })?;
            Some(h.iter().position(|c| c == name).ok_or_else(|| {
                Error::Config(format!("label column {name:?} not found in header"))
            })?)
        }
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&c| Some(c) != label_idx).collect();

    let n = rows.len();
    let mut values = Array2::<f64>::zeros((n, feature_cols.len()));
    for (i, r) in rows.iter().enumerate() {
        for (j, &c) in feature_cols.iter().enumerate() {
            let cell = r[c].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: first_row + i,
                column: c + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: first_row + i,
                    column: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values[[i, j]] = v;
        }
    }

    let names = match &header {
        Some(h) => feature_cols.iter().map(|&c| h[c].clone()).collect(),
        None => (0..feature_cols.len()).map(|j| format!("f{j}")).collect(),
    };
    let labels =
        label_idx.map(|c| label_ids(rows.iter().map(|r| r[c].trim().to_string()).collect()));
    let data = DataMatrix::new(values, names, labels)?;
    Ok(if spec.standardize {
        standardize(&data)
    } else {
        data
    })
}

fn label_ids(raw: Vec<String>) -> Vec<usize> {
    if let Ok(ids) = raw.iter().map(|s| s.parse::<usize>()).collect() {
        return ids;
    }
    let mut map: HashMap<String, usize> = HashMap::new();
    raw.into_iter()
        .map(|s| {
            let next = map.len();
            *map.entry(s).or_insert(next)
        })
        .collect()
}

/// Formats a real with 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the features (and a trailing `label` column when labels exist)
/// with a header row and 17-significant-digit reals.
pub fn write_csv(data: &DataMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    if data.labels().is_some() {
        header.push("label");
    }
    w.write_record(&header)?;
    for (i, row) in data.values().rows().into_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
        if let Some(labels) = data.labels() {
            rec.push(labels[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Centers every feature and scales it to unit population standard
/// deviation. Features whose spread is negligible become all zeros.
pub fn standardize(data: &DataMatrix) -> DataMatrix {
    let mut values = data.values().clone();
    let n = values.nrows() as f64;
    for mut col in values.axis_iter_mut(Axis(1)) {
        let scale = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mean = col.sum() / n;
        col.mapv_inplace(|v| v - mean);
        let std = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if std <= 1e-12 * scale || std == 0.0 {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| v / std);
        }
    }
    data.with_values(values)
}

/// Parameters of the planted-blob generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedSpec {
    pub n: usize,
    pub d_informative: usize,
    pub d_noise: usize,
    pub classes: usize,
    /// Smallest distance between two blob centers.
    pub separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n: 200,
            d_informative: 10,
            d_noise: 90,
            classes: 3,
            separation: 10.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.n < self.classes {
            return Err(Error::Parameter(format!(
                "need n >= classes >= 2, got n = {}, classes = {}",
                self.n, self.classes
            )));
        }
        if self.d_informative < 1 {
            return Err(Error::Parameter("need at least one informative feature".into()));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::Parameter(format!("separation must be > 0, got {}", self.separation)));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Parameter(format!("noise_sigma must be > 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// Parses `key=value` pairs separated by commas, e.g.
    /// `n=200,d_informative=10,classes=3`. Unnamed keys keep their defaults.
    pub fn parse_pairs(s: &str) -> Result<Self> {
        let mut spec = Self::default();
        for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
            let bad = |_: std::num::ParseIntError| Error::Config(format!("invalid value for {key}: {value:?}"));
            let badf = |_: std::num::ParseFloatError| Error::Config(format!("invalid value for {key}: {value:?}"));
            let value = value.trim();
            match key.trim() {
                "n" => spec.n = value.parse().map_err(bad)?,
                "d_informative" => spec.d_informative = value.parse().map_err(bad)?,
                "d_noise" => spec.d_noise = value.parse().map_err(bad)?,
                "classes" | "c" => spec.classes = value.parse().map_err(bad)?,
                "separation" => spec.separation = value.parse().map_err(badf)?,
                "noise_sigma" => spec.noise_sigma = value.parse().map_err(badf)?,
                "seed" => spec.seed = value.parse().map_err(bad)?,
                other => return Err(Error::Config(format!("unknown planted parameter {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Gaussian blobs in the first `d_informative` columns followed by pure
/// noise columns. Sample `i` belongs to class `i % classes`. Blob centers
/// are standard normal draws rescaled so that the closest pair sits exactly
/// `separation` apart; every coordinate then gets `N(0, noise_sigma²)` noise.
pub fn generate_planted(spec: &PlantedSpec) -> Result<DataMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (c, di) = (spec.classes, spec.d_informative);
    let mut centers = Array2::<f64>::zeros((c, di));
    let mut min_dist = 0.0;
    // Redraw in the (measure-zero) event of coincident centers.
    while min_dist == 0.0 {
        centers = Array2::from_shape_fn((c, di), |_| StandardNormal.sample(&mut rng));
        min_dist = f64::INFINITY;
        for a in 0..c {
            for b in a + 1..c {
                let d = (&centers.row(a) - &centers.row(b)).mapv(|v| v * v).sum().sqrt();
                min_dist = min_dist.min(d);
            }
        }
    }
    centers *= spec.separation / min_dist;

    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::Parameter(format!("noise_sigma: {e}")))?;
    let d = di + spec.d_noise;
    let labels: Vec<usize> = (0..spec.n).map(|i| i % c).collect();
    let mut values = Array2::<f64>::zeros((spec.n, d));
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        for j in 0..d {
            let base = if j < di { centers[[labels[i], j]] } else { 0.0 };
            row[j] = base + noise.sample(&mut rng);
        }
    }
    let names = (0..di)
        .map(|j| format!("informative_{j}"))
        .chain((0..spec.d_noise).map(|j| format!("noise_{j}")))
        .collect();
    DataMatrix::new(values, names, Some(labels))
}

/// Writes a generated dataset, creating parent directories.
pub fn write_planted(spec: &PlantedSpec, path: &Path) -> Result<DataMatrix> {
    let data = generate_planted(spec)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_csv(&data, path)?;
    Ok(data)
}
