//! Prediction and label tables (CSV with a header row).
//!
//! Predictions: `sample_id,prediction[,score][,label]`, prediction as 0/1.
//! Labels: `sample_id,label`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uda_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub sample_id: String,
    #[serde(with = "bit")]
    pub prediction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, with = "opt_bit", skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub sample_id: String,
    #[serde(with = "bit")]
    pub label: bool,
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected 0 or 1, found {other}"))),
        }
    }
}

mod opt_bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_u8(*b as u8),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
        match Option::<u8>::deserialize(d)? {
            None => Ok(None),
            Some(0) => Ok(Some(false)),
            Some(1) => Ok(Some(true)),
            Some(other) => Err(serde::de::Error::custom(format!("expected 0 or 1, found {other}"))),
        }
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let malformed = |e: csv::Error| Error::Malformed {
        what: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(malformed)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(malformed)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let fail = |e: csv::Error| Error::Malformed {
        what: path.display().to_string(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn check_unique<'a>(path: &Path, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Malformed {
                what: path.display().to_string(),
                reason: format!("sample `{id}` listed twice"),
            });
        }
    }
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let rows: Vec<PredictionRow> = read_rows(path)?;
    check_unique(path, rows.iter().map(|r| r.sample_id.as_str()))?;
    Ok(rows)
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn read_labels(path: &Path) -> Result<HashMap<String, bool>> {
    let rows: Vec<LabelRow> = read_rows(path)?;
    check_unique(path, rows.iter().map(|r| r.sample_id.as_str()))?;
    Ok(rows.into_iter().map(|r| (r.sample_id, r.label)).collect())
}

pub fn write_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    write_rows(path, rows)
}

/// Labels for `rows` in row order; every row must have one.
pub fn labels_for(rows: &[PredictionRow], labels: &HashMap<String, bool>, what: &Path) -> Result<Vec<bool>> {
    rows.iter()
        .map(|r| {
            labels.get(&r.sample_id).copied().ok_or_else(|| Error::Malformed {
                what: what.display().to_string(),
                reason: format!("no label for sample `{}`", r.sample_id),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_optional_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let rows = vec![
            PredictionRow {
                sample_id: "a".into(),
                prediction: true,
                score: Some(0.75),
                label: Some(false),
            },
            PredictionRow {
                sample_id: "b".into(),
                prediction: false,
                score: Some(0.125),
                label: Some(true),
            },
        ];
        write_predictions(&p, &rows).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), rows);
        std::fs::write(&p, "sample_id,prediction\na,1\nb,0\n").unwrap();
        let bare = read_predictions(&p).unwrap();
        assert_eq!(bare[1].score, None);
        assert!(bare[0].prediction);
    }

    #[test]
    fn rejects_duplicates_and_bad_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        std::fs::write(&p, "sample_id,prediction\na,1\na,0\n").unwrap();
        assert!(matches!(read_predictions(&p), Err(Error::Malformed { .. })));
        std::fs::write(&p, "sample_id,label\na,2\n").unwrap();
        assert!(matches!(read_labels(&p), Err(Error::Malformed { .. })));
    }
}
