//! Datasets, labelling and missing-value handling.

mod ecpm;
mod ingest;
mod missing;
mod synth;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ecpm::{compute_ecpm, label, BatteryState, StateRow, CRITICAL_ABOVE, SAFE_BELOW};
pub use ingest::{ingest, Encoding, FeatureKind, FeatureSpec, IngestOutput, IngestReport, Schema};
pub use missing::{inject_missing, missing_count, MAX_MISSING_RATE};
pub use synth::synthesize;

/// Energy-consumption class, encoded 0/1/2 in datasets and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyClass {
    Safe = 0,
    Warning = 1,
    Critical = 2,
}

impl EnergyClass {
    pub const ALL: [EnergyClass; 3] = [EnergyClass::Safe, EnergyClass::Warning, EnergyClass::Critical];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| Error::invalid(format!("class index {i} outside 0..3")))
    }

    pub fn name(self) -> &'static str {
        match self {
            EnergyClass::Safe => "safe",
            EnergyClass::Warning => "warning",
            EnergyClass::Critical => "critical",
        }
    }
}

impl fmt::Display for EnergyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnergyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Ok(i) = t.parse::<usize>() {
            return Self::from_index(i);
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::invalid(format!("unknown class `{s}`")))
    }
}

/// Fully observed feature matrix with class labels (0 = safe, 1 = warning, 2 = critical).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, y: Vec<usize>, feature_names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", x.nrows(), y.len())));
        }
        if x.ncols() != feature_names.len() {
            return Err(Error::Shape(format!("{} columns but {} names", x.ncols(), feature_names.len())));
        }
        if let Some(&c) = y.iter().find(|&&c| c >= EnergyClass::ALL.len()) {
            return Err(Error::invalid(format!("label {c} outside 0..3")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(LabeledDataset { x, y, feature_names })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for &l in &self.y {
            c[l] += 1;
        }
        c
    }

    /// The same data with every entry observed.
    pub fn fully_observed(&self) -> MaskedDataset {
        MaskedDataset {
            x: self.x.clone(),
            mask: Array2::ones(self.x.dim()),
            y: self.y.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.feature_names.clone();
        header.push("label".into());
        out.write_record(&header)?;
        for (row, &label) in self.x.rows().into_iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a processed dataset: feature columns followed by `label`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let label_col =
            headers.iter().position(|h| h == "label").ok_or_else(|| Error::MissingColumn { column: "label".into() })?;
        let feature_names: Vec<String> =
            headers.iter().enumerate().filter(|(i, _)| *i != label_col).map(|(_, h)| h.to_string()).collect();
        let mut values = Vec::new();
        let mut y = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            for (i, field) in rec.iter().enumerate() {
                if i == label_col {
                    let c: EnergyClass =
                        field.parse().map_err(|e: Error| Error::Row { line, message: e.to_string() })?;
                    y.push(c.index());
                } else {
                    values.push(parse_number(field, line)?);
                }
            }
        }
        let x =
            Array2::from_shape_vec((y.len(), feature_names.len()), values).map_err(|e| Error::Shape(e.to_string()))?;
        LabeledDataset::new(x, y, feature_names)
    }
}

/// Dataset with a binary observation mask; missing entries of `x` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    pub x: Array2<f64>,
    pub mask: Array2<u8>,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl MaskedDataset {
    pub fn new(x: Array2<f64>, mask: Array2<u8>, y: Vec<usize>, feature_names: Vec<String>) -> Result<Self> {
        if x.dim() != mask.dim() {
            return Err(Error::Shape(format!("data {:?} vs mask {:?}", x.dim(), mask.dim())));
        }
        LabeledDataset::new(x.clone(), y.clone(), feature_names.clone())?;
        for (v, m) in x.iter().zip(mask.iter()) {
            if *m > 1 {
                return Err(Error::invalid(format!("mask value {m} is not binary")));
            }
            if *m == 0 && *v != 0.0 {
                return Err(Error::invalid("masked entry with a non-zero value"));
            }
        }
        Ok(MaskedDataset { x, mask, y, feature_names })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn missing_entries(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 0).count()
    }

    pub fn mask_f64(&self) -> Array2<f64> {
        self.mask.mapv(f64::from)
    }

    pub fn write_mask_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.feature_names)?;
        for row in self.mask.rows() {
            out.write_record(row.iter().map(|m| m.to_string()))?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_data_csv<W: Write>(&self, w: W) -> Result<()> {
        LabeledDataset { x: self.x.clone(), y: self.y.clone(), feature_names: self.feature_names.clone() }.write_csv(w)
    }

    /// Pairs a processed dataset with a 0/1 mask file of identical shape.
    pub fn from_csv<R1: Read, R2: Read>(data: R1, mask: R2) -> Result<Self> {
        let ds = LabeledDataset::read_csv(data)?;
        let mut rdr = csv::Reader::from_reader(mask);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers != ds.feature_names {
            return Err(Error::Shape("mask header does not match the dataset's feature columns".into()));
        }
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            for field in rec.iter() {
                match field.trim() {
                    "0" => values.push(0u8),
                    "1" => values.push(1u8),
                    other => return Err(Error::Row { line, message: format!("mask value `{other}` is not 0/1") }),
                }
            }
        }
        let mask = Array2::from_shape_vec(ds.x.dim(), values)
            .map_err(|_| Error::Shape("mask file shape differs from dataset".into()))?;
        let mut x = ds.x;
        ndarray::Zip::from(&mut x).and(&mask).for_each(|v, &m| {
            if m == 0 {
                *v = 0.0;
            }
        });
        MaskedDataset::new(x, mask, ds.y, ds.feature_names)
    }
}

pub(crate) fn parse_number(field: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Row { line, message: format!("cannot parse `{field}` as a number") })?;
    if !v.is_finite() {
        return Err(Error::Row { line, message: format!("non-finite value `{field}`") });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn class_names_and_indices() {
        assert_eq!("warning".parse::<EnergyClass>().unwrap(), EnergyClass::Warning);
        assert_eq!("2".parse::<EnergyClass>().unwrap(), EnergyClass::Critical);
        assert!("3".parse::<EnergyClass>().is_err());
        assert_eq!(EnergyClass::Safe.index(), 0);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let ds =
            LabeledDataset::new(array![[0.5, 1.25], [3.0, -1.0]], vec![0, 2], vec!["a".into(), "b".into()]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,b,label\n0.5,1.25,0\n3,-1,2\n");
        assert_eq!(LabeledDataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn mask_csv_round_trip() {
        let ds = MaskedDataset::new(
            array![[0.0, 1.0], [2.0, 0.0]],
            array![[0, 1], [1, 0]],
            vec![1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let (mut d, mut m) = (Vec::new(), Vec::new());
        ds.write_data_csv(&mut d).unwrap();
        ds.write_mask_csv(&mut m).unwrap();
        assert_eq!(String::from_utf8(m.clone()).unwrap(), "a,b\n0,1\n1,0\n");
        assert_eq!(MaskedDataset::from_csv(d.as_slice(), m.as_slice()).unwrap(), ds);
    }

    #[test]
    fn masked_dataset_invariants_enforced() {
        let bad = MaskedDataset::new(array![[1.0]], array![[0]], vec![0], vec!["a".into()]);
        assert!(bad.is_err());
        let bad = MaskedDataset::new(array![[1.0]], array![[2]], vec![0], vec!["a".into()]);
        assert!(bad.is_err());
    }

    #[test]
    fn unparseable_cell_reports_line() {
        let err = LabeledDataset::read_csv("a,label\n1,0\nx,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Row { line: 3, .. }), "{err}");
    }
}
