//! Synthetic row-aligned datasets and their CSV + JSON sidecar format.
//!
//! A dataset is a table: each row presents one sample per modality plus an
//! optional class label. Samples in the same row are the ones an
//! associative layer sees together.
//!
//! `data.csv` has one column per scalar, named `<modality>.<index>`, then
//! an optional `label` column holding the class index. `data.json` declares
//! the grid, the row count, the modality shapes and the label encoding.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{check_grid, Sample, Shape, DEFAULT_GRID};
use crate::set::FiniteSet;

pub const CSV_FILE: &str = "data.csv";
pub const SIDECAR_FILE: &str = "data.json";
pub const LABEL_SLOT: &str = "label";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalitySpec {
    pub name: String,
    pub shape: Shape,
    pub classes: usize,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    /// Samples of the same class share a row.
    Correlated,
    /// Each modality column is shuffled on its own.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelEncoding {
    Scalar,
    OneHot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub modalities: Vec<ModalitySpec>,
    pub correlation: Correlation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_slot: Option<LabelEncoding>,
    #[serde(default = "default_grid")]
    pub grid: f64,
}

fn default_grid() -> f64 {
    DEFAULT_GRID
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        check_grid(self.grid)?;
        let first = self
            .modalities
            .first()
            .ok_or_else(|| Error::Dataset("at least one modality is required".into()))?;
        for m in &self.modalities {
            if m.name.is_empty() || m.name.contains(['.', ',', '=']) || m.name == LABEL_SLOT {
                return Err(Error::Dataset(format!("invalid modality name {:?}", m.name)));
            }
            if m.classes < 2 {
                return Err(Error::Dataset(format!("{}: classes must be >= 2", m.name)));
            }
            if m.samples_per_class < 1 {
                return Err(Error::Dataset(format!("{}: samples_per_class must be >= 1", m.name)));
            }
            if !(m.noise_std.is_finite() && m.noise_std >= 0.0) {
                return Err(Error::Dataset(format!("{}: noise_std must be >= 0", m.name)));
            }
            if m.classes != first.classes || m.samples_per_class != first.samples_per_class {
                return Err(Error::Dataset(format!(
                    "{}: rows must align, classes and samples_per_class must match {}",
                    m.name, first.name
                )));
            }
        }
        let mut names: Vec<&str> = self.modalities.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.modalities.len() {
            return Err(Error::Dataset("modality names must be unique".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.modalities.first().map_or(0, |m| m.classes * m.samples_per_class)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityInfo {
    pub name: String,
    pub shape: Shape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelInfo {
    pub encoding: LabelEncoding,
    pub classes: usize,
}

/// Contents of `data.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub grid: f64,
    pub rows: usize,
    pub modalities: Vec<ModalityInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelInfo>,
}

/// Row-aligned columns of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    sidecar: Sidecar,
    /// `columns[m][r]`
    columns: Vec<Vec<Sample>>,
    labels: Option<Vec<usize>>,
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let rows = spec.rows();
    let mut columns = Vec::with_capacity(spec.modalities.len());
    for m in &spec.modalities {
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        let protos = prototypes(m, &mut rng)?;
        let noise = Normal::new(0.0, m.noise_std).map_err(|e| Error::Dataset(e.to_string()))?;
        let mut col = Vec::with_capacity(rows);
        for proto in &protos {
            for _ in 0..m.samples_per_class {
                let values = proto.iter().map(|&p| p + noise.sample(&mut rng)).collect();
                col.push(Sample::new(m.shape.clone(), values)?.quantize(spec.grid)?);
            }
        }
        if spec.correlation == Correlation::Independent {
            col.shuffle(&mut rng);
        }
        columns.push(col);
    }
    let spc = spec.modalities[0].samples_per_class;
    let labels = spec
        .label_slot
        .map(|_| (0..rows).map(|r| r / spc).collect::<Vec<_>>());
    let sidecar = Sidecar {
        grid: spec.grid,
        rows,
        modalities: spec
            .modalities
            .iter()
            .map(|m| ModalityInfo {
                name: m.name.clone(),
                shape: m.shape.clone(),
            })
            .collect(),
        label: spec.label_slot.map(|encoding| LabelInfo {
            encoding,
            classes: spec.modalities[0].classes,
        }),
    };
    Dataset::new(sidecar, columns, labels)
}

// Uniform in [0,1]^d, rejecting candidates closer than 4·noise_std to an
// accepted prototype (or equal to one when noise is zero).
fn prototypes(m: &ModalitySpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let d = m.shape.element_count();
    let min_dist = 4.0 * m.noise_std;
    let mut protos: Vec<Vec<f64>> = Vec::with_capacity(m.classes);
    let mut attempts = 0;
    while protos.len() < m.classes {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Dataset(format!(
                "{}: cannot place {} prototypes at distance >= {min_dist} in [0,1]^{d}",
                m.name, m.classes
            )));
        }
        let cand: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let ok = protos.iter().all(|p| {
            let dist = p.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            dist >= min_dist && dist > 0.0
        });
        if ok {
            protos.push(cand);
        }
    }
    Ok(protos)
}

impl Dataset {
    pub fn new(sidecar: Sidecar, columns: Vec<Vec<Sample>>, labels: Option<Vec<usize>>) -> Result<Self> {
        check_grid(sidecar.grid)?;
        if columns.len() != sidecar.modalities.len() {
            return Err(Error::Dataset("column count does not match modalities".into()));
        }
        for (col, info) in columns.iter().zip(&sidecar.modalities) {
            if col.len() != sidecar.rows {
                return Err(Error::Dataset(format!("{}: expected {} rows", info.name, sidecar.rows)));
            }
            for s in col {
                s.ensure_shape(&info.shape)?;
            }
        }
        match (&sidecar.label, &labels) {
            (Some(info), Some(ls)) => {
                if ls.len() != sidecar.rows || ls.iter().any(|&l| l >= info.classes) {
                    return Err(Error::Dataset("labels out of range or wrong length".into()));
                }
            }
            (None, None) => {}
            _ => return Err(Error::Dataset("label column and sidecar disagree".into())),
        }
        Ok(Dataset {
            sidecar,
            columns,
            labels,
        })
    }

    pub fn sidecar(&self) -> &Sidecar {
        &self.sidecar
    }

    pub fn grid(&self) -> f64 {
        self.sidecar.grid
    }

    pub fn rows(&self) -> usize {
        self.sidecar.rows
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Modality names followed by `label` when present.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.sidecar.modalities.iter().map(|m| m.name.clone()).collect();
        if self.sidecar.label.is_some() {
            names.push(LABEL_SLOT.to_string());
        }
        names
    }

    pub fn slot_shape(&self, name: &str) -> Result<Shape> {
        if name == LABEL_SLOT {
            let info = self
                .sidecar
                .label
                .ok_or_else(|| Error::Dataset("dataset has no label column".into()))?;
            return Shape::vector(match info.encoding {
                LabelEncoding::Scalar => 1,
                LabelEncoding::OneHot => info.classes,
            });
        }
        self.modality_index(name).map(|i| self.sidecar.modalities[i].shape.clone())
    }

    fn modality_index(&self, name: &str) -> Result<usize> {
        self.sidecar
            .modalities
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::Dataset(format!("unknown slot {name:?}")))
    }

    /// Encodes a class index as a label sample.
    pub fn label_sample(&self, class: usize) -> Result<Sample> {
        let info = self
            .sidecar
            .label
            .ok_or_else(|| Error::Dataset("dataset has no label column".into()))?;
        match info.encoding {
            LabelEncoding::Scalar => Sample::vector(vec![class as f64]),
            LabelEncoding::OneHot => {
                let mut v = vec![0.0; info.classes];
                *v.get_mut(class)
                    .ok_or_else(|| Error::Dataset(format!("label {class} out of range")))? = 1.0;
                Sample::vector(v)
            }
        }
    }

    /// One sample per row for the named slot.
    pub fn slot_values(&self, name: &str) -> Result<Vec<Sample>> {
        if name == LABEL_SLOT {
            let labels = self
                .labels
                .as_ref()
                .ok_or_else(|| Error::Dataset("dataset has no label column".into()))?;
            return labels.iter().map(|&c| self.label_sample(c)).collect();
        }
        Ok(self.columns[self.modality_index(name)?].clone())
    }

    /// Deduplicated samples of one slot.
    pub fn slot_set(&self, name: &str) -> Result<FiniteSet> {
        FiniteSet::from_samples(self.slot_shape(name)?, self.grid(), self.slot_values(name)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = Vec::new();
        for m in &self.sidecar.modalities {
            header.extend((0..m.shape.element_count()).map(|i| format!("{}.{i}", m.name)));
        }
        if self.labels.is_some() {
            header.push(LABEL_SLOT.to_string());
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for r in 0..self.rows() {
            let mut cells: Vec<String> = Vec::new();
            for col in &self.columns {
                cells.extend(col[r].values().iter().map(|v| v.to_string()));
            }
            if let Some(ls) = &self.labels {
                cells.push(ls[r].to_string());
            }
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Stable 64-bit FNV-1a digest of the CSV text.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_csv_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CSV_FILE), self.to_csv_string())?;
        let mut json = serde_json::to_string_pretty(&self.sidecar)?;
        json.push('\n');
        fs::write(dir.join(SIDECAR_FILE), json)?;
        Ok(())
    }
}

/// Resolves `path` (a directory or the CSV file) to the CSV and sidecar paths.
fn resolve(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(CSV_FILE), path.join(SIDECAR_FILE))
    } else {
        (path.to_path_buf(), path.with_extension("json"))
    }
}

pub fn load_rows(path: &Path) -> Result<Dataset> {
    let (csv_path, sidecar_path) = resolve(path);
    let sidecar_text = fs::read_to_string(&sidecar_path)
        .map_err(|e| Error::Io(format!("{}: {e}", sidecar_path.display())))?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_text)?;
    let file = fs::File::open(&csv_path).map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
    parse_rows(sidecar, file)
}

pub fn parse_rows<R: std::io::Read>(sidecar: Sidecar, reader: R) -> Result<Dataset> {
    let mut expected: Vec<String> = Vec::new();
    for m in &sidecar.modalities {
        expected.extend((0..m.shape.element_count()).map(|i| format!("{}.{i}", m.name)));
    }
    if sidecar.label.is_some() {
        expected.push(LABEL_SLOT.to_string());
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Dataset(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != expected {
        return Err(Error::Dataset(format!("header {header:?} does not match sidecar {expected:?}")));
    }

    let mut columns: Vec<Vec<Sample>> = vec![Vec::new(); sidecar.modalities.len()];
    let mut labels = sidecar.label.map(|_| Vec::new());
    let mut count = 0;
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Dataset(format!("row {row}: {e}")))?;
        if record.len() != expected.len() {
            return Err(Error::Dataset(format!(
                "row {row}: expected {} columns, found {}",
                expected.len(),
                record.len()
            )));
        }
        let mut cells = record.iter().enumerate();
        for (m, info) in sidecar.modalities.iter().enumerate() {
            let mut values = Vec::with_capacity(info.shape.element_count());
            for _ in 0..info.shape.element_count() {
                let (c, cell) = cells.next().expect("length checked");
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::Dataset(format!("row {row}, column {}: bad number {cell:?}", expected[c])))?;
                if !v.is_finite() {
                    return Err(Error::Dataset(format!("row {row}, column {}: non-finite value", expected[c])));
                }
                values.push(v);
            }
            columns[m].push(Sample::new(info.shape.clone(), values)?.quantize(sidecar.grid)?);
        }
        if let Some(ls) = labels.as_mut() {
            let (_, cell) = cells.next().expect("length checked");
            let l: usize = cell
                .trim()
                .parse()
                .map_err(|_| Error::Dataset(format!("row {row}, column label: bad class {cell:?}")))?;
            let classes = sidecar.label.map_or(0, |info| info.classes);
            if l >= classes {
                return Err(Error::Dataset(format!("row {row}, column label: class {l} out of range")));
            }
            ls.push(l);
        }
        count += 1;
    }
    if count != sidecar.rows {
        return Err(Error::Dataset(format!("sidecar declares {} rows, file has {count}", sidecar.rows)));
    }
    Dataset::new(sidecar, columns, labels)
}

/// Two correlated modalities plus a one-hot label, `classes × per_class`
/// rows.
pub fn paired_spec(classes: usize, per_class: usize, noise_std: f64, seed: u64) -> DatasetSpec {
    let modality = |name: &str, d: usize, offset: u64| ModalitySpec {
        name: name.to_string(),
        shape: Shape::vector(d).expect("d > 0"),
        classes,
        samples_per_class: per_class,
        noise_std,
        seed: seed.wrapping_add(offset),
    };
    DatasetSpec {
        modalities: vec![modality("digit", 8, 0), modality("hand", 6, 1)],
        correlation: Correlation::Correlated,
        label_slot: Some(LabelEncoding::OneHot),
        grid: DEFAULT_GRID,
    }
}
