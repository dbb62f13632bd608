//! Delimited MOAKS table ingestion.
//!
//! One row per knee. Required columns: `subject_id`, `knee_side`
//! (`left`/`right`). Optional metadata columns: `age`, `bmi`, `sex`
//! (`male`/`female`). Every other column must be a sub-grade name from the
//! vocabulary (`cartilage.cMF`, `meniscus.medial`, `bml.PL`, ...). Empty
//! cells are missing values.

use std::path::Path;

use super::{vocabulary, KneeSide, MoaksRecord, Sex, SubGrade, SubjectMeta};
use crate::error::{Error, Result};

/// A parsed table row: grades plus optional demographic metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MoaksRow {
    pub record: MoaksRecord,
    pub meta: SubjectMeta,
}

enum Column {
    SubjectId,
    Side,
    Age,
    Bmi,
    Sex,
    Grade(String),
}

fn parse_side(s: &str) -> Option<KneeSide> {
    match s.to_ascii_lowercase().as_str() {
        "left" | "l" => Some(KneeSide::Left),
        "right" | "r" => Some(KneeSide::Right),
        _ => None,
    }
}

fn parse_sex(s: &str) -> Option<Sex> {
    match s.to_ascii_lowercase().as_str() {
        "male" | "m" => Some(Sex::Male),
        "female" | "f" => Some(Sex::Female),
        _ => None,
    }
}

/// Read a MOAKS table with the given single-byte delimiter.
pub fn read_moaks_table(path: &Path, delimiter: u8) -> Result<Vec<MoaksRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_moaks_table(file, delimiter)
}

pub(crate) fn parse_moaks_table<R: std::io::Read>(input: R, delimiter: u8) -> Result<Vec<MoaksRow>> {
    let bad = |reason: String| Error::malformed("MOAKS table", reason);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let columns: Vec<Column> = headers
        .iter()
        .map(|h| match h {
            "subject_id" => Ok(Column::SubjectId),
            "knee_side" => Ok(Column::Side),
            "age" => Ok(Column::Age),
            "bmi" => Ok(Column::Bmi),
            "sex" => Ok(Column::Sex),
            name if SubGrade::parse(name).is_some() => Ok(Column::Grade(name.to_string())),
            other => Err(bad(format!("unknown column `{other}`"))),
        })
        .collect::<Result<_>>()?;
    if !headers.iter().any(|h| h == "subject_id") || !headers.iter().any(|h| h == "knee_side") {
        return Err(bad("missing subject_id or knee_side column".into()));
    }

    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let mut subject = None;
        let mut side = None;
        let mut meta = SubjectMeta::default();
        let mut grades = Vec::new();
        for (col, cell) in columns.iter().zip(rec.iter()) {
            if cell.is_empty() {
                continue;
            }
            let row_err = |what: &str| bad(format!("row {}: bad {what} `{cell}`", line + 1));
            match col {
                Column::SubjectId => subject = Some(cell.to_string()),
                Column::Side => side = Some(parse_side(cell).ok_or_else(|| row_err("knee_side"))?),
                Column::Age => meta.age = Some(cell.parse().map_err(|_| row_err("age"))?),
                Column::Bmi => meta.bmi = Some(cell.parse().map_err(|_| row_err("bmi"))?),
                Column::Sex => meta.sex = Some(parse_sex(cell).ok_or_else(|| row_err("sex"))?),
                Column::Grade(name) => {
                    let g: u8 = cell.parse().map_err(|_| row_err(name))?;
                    grades.push((name.as_str(), g));
                }
            }
        }
        let subject = subject.ok_or_else(|| bad(format!("row {}: missing subject_id", line + 1)))?;
        let side = side.ok_or_else(|| bad(format!("row {}: missing knee_side", line + 1)))?;
        meta.side = Some(side);
        let mut record = MoaksRecord::new(subject, side);
        for (name, g) in grades {
            record.set(name, g)?;
        }
        rows.push(MoaksRow { record, meta });
    }
    Ok(rows)
}

/// Write records with the full vocabulary as columns (missing grades empty).
pub fn write_moaks_table(path: &Path, rows: &[MoaksRow], delimiter: u8) -> Result<()> {
    let map_csv = |e: csv::Error| Error::malformed("MOAKS table", e.to_string());
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(map_csv)?;
    let vocab = vocabulary();
    let mut header: Vec<String> = ["subject_id", "knee_side", "age", "bmi", "sex"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(vocab.iter().map(|sg| sg.name()));
    w.write_record(&header).map_err(map_csv)?;
    for row in rows {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut cells = vec![
            row.record.subject_id.clone(),
            match row.record.knee_side {
                KneeSide::Left => "left".into(),
                KneeSide::Right => "right".into(),
            },
            opt(row.meta.age.map(|v| v.to_string())),
            opt(row.meta.bmi.map(|v| v.to_string())),
            opt(row.meta.sex.map(|s| match s {
                Sex::Male => "male".to_string(),
                Sex::Female => "female".to_string(),
            })),
        ];
        cells.extend(
            vocab
                .iter()
                .map(|sg| opt(row.record.get(&sg.name()).map(|g| g.to_string()))),
        );
        w.write_record(&cells).map_err(map_csv)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
