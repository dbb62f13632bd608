use serde::{Deserialize, Serialize};

use super::{KneeSide, PhenotypeLabel};
use crate::ratio::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

/// Per-knee metadata feeding the demographics table. Every field may be
/// missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub age: Option<f64>,
    pub bmi: Option<f64>,
    pub sex: Option<Sex>,
    pub side: Option<KneeSide>,
    pub phenotypes: PhenotypeLabel,
}

/// One row of the demographics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemographicRow {
    /// Mean and sample standard deviation over `n` non-missing values.
    MeanSd {
        name: String,
        mean: f64,
        sd: f64,
        n: u64,
    },
    Percentage {
        name: String,
        ratio: Ratio,
    },
}

impl DemographicRow {
    pub fn name(&self) -> &str {
        match self {
            DemographicRow::MeanSd { name, .. } | DemographicRow::Percentage { name, .. } => name,
        }
    }

    /// Table cell text, e.g. `61.08 ± 8.97` or `39.92 (1244/3116)`.
    pub fn cell(&self) -> String {
        match self {
            DemographicRow::MeanSd { mean, sd, .. } => format!("{mean:.2} ± {sd:.2}"),
            DemographicRow::Percentage { ratio, .. } => ratio.to_string(),
        }
    }
}

fn mean_sd(name: &str, values: impl Iterator<Item = f64>) -> Option<DemographicRow> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(DemographicRow::MeanSd {
        name: name.to_string(),
        mean,
        sd,
        n: v.len() as u64,
    })
}

fn percentage<T>(
    name: &str,
    records: &[SubjectMeta],
    field: impl Fn(&SubjectMeta) -> Option<T>,
    hit: impl Fn(&T) -> bool,
) -> Option<DemographicRow> {
    let present: Vec<T> = records.iter().filter_map(field).collect();
    if present.is_empty() {
        return None;
    }
    let num = present.iter().filter(|v| hit(v)).count() as u64;
    Some(DemographicRow::Percentage {
        name: name.to_string(),
        ratio: Ratio::new(num, present.len() as u64),
    })
}

/// Summarize age/BMI (mean ± sd) and sex/side/phenotype percentages. Each
/// row's denominator counts only records where that field is present; rows
/// with no present values are omitted.
pub fn demographics_summary(records: &[SubjectMeta]) -> Vec<DemographicRow> {
    [
        mean_sd("Age (y)", records.iter().filter_map(|r| r.age)),
        mean_sd("BMI (kg/m2)", records.iter().filter_map(|r| r.bmi)),
        percentage("Male (%)", records, |r| r.sex, |s| *s == Sex::Male),
        percentage("Female (%)", records, |r| r.sex, |s| *s == Sex::Female),
        percentage("Left knee (%)", records, |r| r.side, |s| *s == KneeSide::Left),
        percentage("Right knee (%)", records, |r| r.side, |s| *s == KneeSide::Right),
        percentage(
            "Cartilage/meniscus (%)",
            records,
            |r| r.phenotypes.cartilage_meniscus,
            |b| *b,
        ),
        percentage(
            "Subchondral bone (%)",
            records,
            |r| r.phenotypes.subchondral_bone,
            |b| *b,
        ),
    ]
    .into_iter()
    .flatten()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row<'a>(rows: &'a [DemographicRow], name: &str) -> &'a DemographicRow {
        rows.iter().find(|r| r.name() == name).unwrap()
    }

    #[test]
    fn empty_input_gives_empty_table() {
        assert!(demographics_summary(&[]).is_empty());
    }

    #[test]
    fn sex_percentage_matches_published_source_row() {
        let records: Vec<SubjectMeta> = (0..3116)
            .map(|i| SubjectMeta {
                sex: Some(if i < 1244 { Sex::Male } else { Sex::Female }),
                ..Default::default()
            })
            .collect();
        let rows = demographics_summary(&records);
        assert_eq!(row(&rows, "Male (%)").cell(), "39.92 (1244/3116)");
        assert_eq!(row(&rows, "Female (%)").cell(), "60.08 (1872/3116)");
    }

    #[test]
    fn single_record_has_zero_sd() {
        let rows = demographics_summary(&[SubjectMeta {
            age: Some(61.5),
            ..Default::default()
        }]);
        assert_eq!(
            rows[0],
            DemographicRow::MeanSd {
                name: "Age (y)".into(),
                mean: 61.5,
                sd: 0.0,
                n: 1
            }
        );
    }

    #[test]
    fn missing_fields_are_excluded_from_denominators() {
        // ages 50, missing, 60, missing, 70 -> mean 60, sd 10, n 3
        // sides L, R, missing, L, L -> left 3/4
        let ages = [Some(50.0), None, Some(60.0), None, Some(70.0)];
        let sides = [
            Some(KneeSide::Left),
            Some(KneeSide::Right),
            None,
            Some(KneeSide::Left),
            Some(KneeSide::Left),
        ];
        let records: Vec<SubjectMeta> = ages
            .iter()
            .zip(&sides)
            .map(|(a, s)| SubjectMeta {
                age: *a,
                side: *s,
                ..Default::default()
            })
            .collect();
        let rows = demographics_summary(&records);
        match row(&rows, "Age (y)") {
            DemographicRow::MeanSd { mean, sd, n, .. } => {
                assert_eq!(*n, 3);
                assert!((mean - 60.0).abs() < 1e-12);
                assert!((sd - 10.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(row(&rows, "Left knee (%)").cell(), "75 (3/4)");
        assert!(rows.iter().all(|r| r.name() != "BMI (kg/m2)"));
    }
}
