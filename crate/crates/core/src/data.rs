//! Datasets loaded from CSV, z-scoring and train/test splits.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_space::{FeatureKind, FeatureSpace, Point};

/// Cell contents treated as missing (case-insensitive), besides blanks.
pub const MISSING_TOKENS: [&str; 4] = ["na", "nan", "null", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Continuous,
    Binary,
    Target,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
}

/// Role of every CSV column, matched by header name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: impl IntoIterator<Item = (impl Into<String>, ColumnRole)>) -> Self {
        Self {
            columns: columns
                .into_iter()
                .map(|(name, role)| ColumnSpec { name: name.into(), role })
                .collect(),
        }
    }

    /// Reads a JSON or TOML sidecar.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
        } else {
            serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
        }
    }

    fn role(&self, column: &str) -> Option<ColumnRole> {
        self.columns.iter().find(|c| c.name == column).map(|c| c.role)
    }
}

/// Per-dimension affine map `z = (v - mean) / std`; identity on binary dims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn apply(&self, x: &Point) -> Point {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.std[j])
            .collect::<Vec<_>>()
            .into()
    }

    pub fn invert(&self, z: &Point) -> Point {
        z.iter()
            .enumerate()
            .map(|(j, v)| v * self.std[j] + self.mean[j])
            .collect::<Vec<_>>()
            .into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Rows of a feature space, optional targets, split and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    space: FeatureSpace,
    rows: Vec<Point>,
    targets: Option<Vec<f64>>,
    split: Option<Split>,
    normalization: Option<Normalization>,
    dropped: usize,
}

impl Dataset {
    pub fn new(space: FeatureSpace, rows: Vec<Point>, targets: Option<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset has no rows"));
        }
        for r in &rows {
            space.validate(r)?;
        }
        if let Some(t) = &targets {
            if t.len() != rows.len() {
                return Err(Error::DimensionMismatch {
                    expected: rows.len(),
                    found: t.len(),
                });
            }
        }
        Ok(Self {
            space,
            rows,
            targets,
            split: None,
            normalization: None,
            dropped: 0,
        })
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn rows(&self) -> &[Point] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Point {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// Rows dropped at load time for missing values.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    /// Training rows, or every row when there is no split.
    pub fn train_indices(&self) -> Vec<usize> {
        match &self.split {
            Some(s) => s.train.clone(),
            None => (0..self.len()).collect(),
        }
    }

    /// Held-out rows, or every row when there is no split.
    pub fn test_indices(&self) -> Vec<usize> {
        match &self.split {
            Some(s) => s.test.clone(),
            None => (0..self.len()).collect(),
        }
    }

    /// Z-scores the continuous dimensions using all rows; constant columns
    /// are only centred.
    pub fn normalize(&mut self) {
        if self.normalization.is_some() {
            return;
        }
        let n = self.n();
        let count = self.len() as f64;
        let mut norm = Normalization {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        };
        for j in self.space.continuous_indices() {
            let col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / count;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / count;
            norm.mean[j] = m;
            if var > 0.0 {
                norm.std[j] = var.sqrt();
            }
        }
        for r in &mut self.rows {
            *r = norm.apply(r);
        }
        self.normalization = Some(norm);
    }

    /// Shuffles rows into train and test with `round(test_fraction · len)`
    /// test rows (at least one of each when possible).
    pub fn split_train_test(&mut self, test_fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
            return Err(Error::config(
                "test_fraction",
                format!("must lie in (0, 1), got {test_fraction}"),
            ));
        }
        if self.len() < 2 {
            return Err(Error::invalid("need at least two rows to split"));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = ((test_fraction * self.len() as f64).round() as usize).clamp(1, self.len() - 1);
        let test = idx[..n_test].to_vec();
        let train = idx[n_test..].to_vec();
        self.split = Some(Split { train, test });
        Ok(())
    }

    /// Replaces every row (used by degradation experiments).
    pub fn with_rows(&self, rows: Vec<Point>) -> Result<Self> {
        if rows.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                found: rows.len(),
            });
        }
        let mut d = self.clone();
        d.rows = rows;
        Ok(d)
    }
}

/// Loads a CSV with a header row. Rows with a missing cell in a used
/// column are dropped and counted; z-scoring is optional.
pub fn load_csv(path: &Path, schema: &Schema, normalize: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let data_err = |row: usize, column: &str, message: String| Error::Data {
        path: PathBuf::from(path),
        row,
        column: column.to_string(),
        message,
    };

    let mut roles = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        let role = schema
            .role(h)
            .ok_or_else(|| Error::config(format!("schema.columns.{h}"), "column missing from schema"))?;
        roles.push(role);
    }
    for c in &schema.columns {
        if !headers.iter().any(|h| h == c.name) {
            return Err(Error::config(
                format!("schema.columns.{}", c.name),
                "no such column in the CSV header",
            ));
        }
    }
    if roles.iter().filter(|r| **r == ColumnRole::Target).count() > 1 {
        return Err(Error::config("schema", "at most one target column"));
    }
    let kinds: Vec<FeatureKind> = roles
        .iter()
        .filter_map(|r| match r {
            ColumnRole::Continuous => Some(FeatureKind::Continuous),
            ColumnRole::Binary => Some(FeatureKind::Binary),
            _ => None,
        })
        .collect();
    let names: Vec<String> = headers
        .iter()
        .zip(&roles)
        .filter(|(_, r)| matches!(r, ColumnRole::Continuous | ColumnRole::Binary))
        .map(|(h, _)| h.to_string())
        .collect();
    let space = FeatureSpace::new(kinds)?.with_names(names)?;
    let has_target = roles.contains(&ColumnRole::Target);

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut dropped = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // Line numbers count the header as line 1.
        let line = i + 2;
        let mut values = Vec::with_capacity(space.n());
        let mut target = None;
        let mut missing = false;
        for ((cell, role), name) in record.iter().zip(&roles).zip(headers.iter()) {
            if *role == ColumnRole::Ignore {
                continue;
            }
            if cell.is_empty() || MISSING_TOKENS.iter().any(|t| cell.eq_ignore_ascii_case(t)) {
                missing = true;
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| data_err(line, name, format!("cannot parse '{cell}' as a number")))?;
            if !v.is_finite() {
                return Err(data_err(line, name, format!("non-finite value '{cell}'")));
            }
            match role {
                ColumnRole::Binary if v != 0.0 && v != 1.0 => {
                    return Err(data_err(line, name, format!("binary column holds {cell}")));
                }
                ColumnRole::Target => target = Some(v),
                _ => values.push(v),
            }
        }
        if missing {
            dropped += 1;
            continue;
        }
        rows.push(Point::new(values));
        if let Some(t) = target {
            targets.push(t);
        }
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no complete rows (dropped {dropped})",
            path.display()
        )));
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} incomplete rows", path.display());
    }
    let mut ds = Dataset::new(space, rows, has_target.then_some(targets))?;
    ds.dropped = dropped;
    if normalize {
        ds.normalize();
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    fn schema() -> Schema {
        Schema::new([
            ("a", ColumnRole::Continuous),
            ("b", ColumnRole::Binary),
            ("y", ColumnRole::Target),
            ("id", ColumnRole::Ignore),
        ])
    }

    #[test]
    fn drops_incomplete_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "id,a,b,y\nr1,1.5,0,3\nr2,,1,4\nr3,2.5,1,5\n");
        let ds = load_csv(&p, &schema(), false).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dropped(), 1);
        assert_eq!(ds.row(1).values(), &[2.5, 1.0]);
        assert_eq!(ds.targets().unwrap(), &[3.0, 5.0]);
        assert_eq!(ds.space().names().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn binary_violation_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "id,a,b,y\nr1,1.5,0,3\nr2,1,2,4\n");
        let err = load_csv(&p, &schema(), false).unwrap_err();
        match err {
            Error::Data { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_columns_and_bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,b,extra\n1,0,1\n");
        assert!(matches!(load_csv(&p, &schema(), false), Err(Error::Config { .. })));
        let p = write(&dir, "e.csv", "id,a,b,y\nr1,abc,0,3\n");
        assert!(matches!(load_csv(&p, &schema(), false), Err(Error::Data { .. })));
        let p = write(&dir, "f.csv", "id,a,b,y\nr1,NA,0,3\n");
        assert!(load_csv(&p, &schema(), false).is_err());
    }

    #[test]
    fn zscore_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "id,a,b,y\nr1,1.5,0,3\nr2,-2,1,4\nr3,7.25,1,5\n");
        let raw = load_csv(&p, &schema(), false).unwrap();
        let z = load_csv(&p, &schema(), true).unwrap();
        let norm = z.normalization().unwrap();
        let col: Vec<f64> = z.rows().iter().map(|r| r[0]).collect();
        assert!(col.iter().sum::<f64>().abs() < 1e-12);
        for (a, b) in raw.rows().iter().zip(z.rows()) {
            let back = norm.invert(b);
            for (u, v) in a.iter().zip(back.iter()) {
                assert!((u - v).abs() < 1e-12);
            }
            assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn split_is_seeded_partition() {
        let space = FeatureSpace::continuous(1).unwrap();
        let rows = (0..10).map(|i| Point::from([i as f64])).collect();
        let mut a = Dataset::new(space, rows, None).unwrap();
        let mut b = a.clone();
        a.split_train_test(0.3, 4).unwrap();
        b.split_train_test(0.3, 4).unwrap();
        assert_eq!(a.split(), b.split());
        let s = a.split().unwrap();
        assert_eq!(s.test.len(), 3);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(a.split_train_test(1.5, 0).is_err());
    }

    #[test]
    fn toml_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "s.toml",
            "[[columns]]\nname = \"a\"\nrole = \"continuous\"\n[[columns]]\nname = \"y\"\nrole = \"target\"\n",
        );
        let s = Schema::load(&p).unwrap();
        assert_eq!(s.columns.len(), 2);
        let p = write(&dir, "bad.toml", "[[columns]]\nname = \"a\"\nrole = \"weird\"\n");
        assert!(Schema::load(&p).is_err());
    }
}
