//! MOAKS sub-grades to binary phenotype labels.
//!
//! Sub-grades are addressed by flat names of the form `<feature>.<region>`,
//! e.g. `cartilage.cMF`, `meniscus.medial`, `bml.PL`. A phenotype predicate
//! is a tree of `at_least` thresholds combined with `all` / `any`.

mod balance;
mod demographics;
mod table;

pub use balance::{balance_dataset, Fraction};
pub use demographics::{demographics_summary, DemographicRow, Sex, SubjectMeta};
pub use table::{read_moaks_table, write_moaks_table, MoaksRow};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Medial tibiofemoral cartilage / BML subregions.
pub const MEDIAL_TFJ: [&str; 5] = ["cMF", "pMF", "aMT", "cMT", "pMT"];
/// Lateral tibiofemoral cartilage / BML subregions.
pub const LATERAL_TFJ: [&str; 5] = ["cLF", "pLF", "aLT", "cLT", "pLT"];
/// Patellofemoral subregions (patella medial/lateral, trochlea medial/lateral).
pub const PFJ: [&str; 4] = ["PM", "PL", "TrM", "TrL"];
pub const MENISCI: [&str; 2] = ["medial", "lateral"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Cartilage,
    Meniscus,
    Bml,
}

impl Feature {
    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Cartilage => "cartilage",
            Feature::Meniscus => "meniscus",
            Feature::Bml => "bml",
        }
    }

    /// Highest legal ordinal grade.
    pub fn max_grade(self) -> u8 {
        match self {
            Feature::Cartilage | Feature::Bml => 3,
            Feature::Meniscus => 4,
        }
    }

    fn regions(self) -> Vec<&'static str> {
        match self {
            Feature::Cartilage | Feature::Bml => {
                MEDIAL_TFJ.iter().chain(&LATERAL_TFJ).chain(&PFJ).copied().collect()
            }
            Feature::Meniscus => MENISCI.to_vec(),
        }
    }
}

/// One entry of the fixed sub-grade vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubGrade {
    pub feature: Feature,
    pub region: &'static str,
}

impl SubGrade {
    pub fn name(&self) -> String {
        format!("{}.{}", self.feature.as_str(), self.region)
    }

    /// Resolve a flat name against the vocabulary.
    pub fn parse(name: &str) -> Option<SubGrade> {
        let (feat, region) = name.split_once('.')?;
        let feature = match feat {
            "cartilage" => Feature::Cartilage,
            "meniscus" => Feature::Meniscus,
            "bml" => Feature::Bml,
            _ => return None,
        };
        let region = feature.regions().into_iter().find(|r| *r == region)?;
        Some(SubGrade { feature, region })
    }
}

/// The full sub-grade vocabulary in canonical order.
pub fn vocabulary() -> Vec<SubGrade> {
    [Feature::Cartilage, Feature::Meniscus, Feature::Bml]
        .into_iter()
        .flat_map(|feature| {
            feature
                .regions()
                .into_iter()
                .map(move |region| SubGrade { feature, region })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KneeSide {
    Left,
    Right,
}

/// Ordinal MOAKS sub-grades for one knee. Absent keys are missing grades.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoaksRecord {
    pub subject_id: String,
    pub knee_side: KneeSide,
    grades: BTreeMap<SubGrade, u8>,
}

impl MoaksRecord {
    pub fn new(subject_id: impl Into<String>, knee_side: KneeSide) -> Self {
        MoaksRecord {
            subject_id: subject_id.into(),
            knee_side,
            grades: BTreeMap::new(),
        }
    }

    /// A record with every vocabulary grade present and set to zero.
    pub fn all_zero(subject_id: impl Into<String>, knee_side: KneeSide) -> Self {
        let mut r = Self::new(subject_id, knee_side);
        for sg in vocabulary() {
            r.grades.insert(sg, 0);
        }
        r
    }

    /// Set a grade by flat name, validating name and range.
    pub fn set(&mut self, name: &str, grade: u8) -> Result<()> {
        let sg = SubGrade::parse(name)
            .ok_or_else(|| Error::malformed("MOAKS record", format!("unknown sub-grade `{name}`")))?;
        if grade > sg.feature.max_grade() {
            return Err(Error::malformed(
                "MOAKS record",
                format!(
                    "grade {grade} for `{name}` outside 0..={}",
                    sg.feature.max_grade()
                ),
            ));
        }
        self.grades.insert(sg, grade);
        Ok(())
    }

    pub fn clear(&mut self, name: &str) {
        if let Some(sg) = SubGrade::parse(name) {
            self.grades.remove(&sg);
        }
    }

    pub fn get(&self, name: &str) -> Option<u8> {
        SubGrade::parse(name).and_then(|sg| self.grades.get(&sg).copied())
    }

    pub fn grades(&self) -> impl Iterator<Item = (SubGrade, u8)> + '_ {
        self.grades.iter().map(|(k, v)| (*k, *v))
    }
}

/// Threshold predicate over named sub-grades.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    AtLeast { grade: String, min: u8 },
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
}

impl Predicate {
    pub fn at_least(grade: impl Into<String>, min: u8) -> Self {
        Predicate::AtLeast {
            grade: grade.into(),
            min,
        }
    }

    fn any_of(feature: &str, regions: &[&str], min: u8) -> Self {
        Predicate::Any(
            regions
                .iter()
                .map(|r| Predicate::at_least(format!("{feature}.{r}"), min))
                .collect(),
        )
    }

    fn referenced<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Predicate::AtLeast { grade, .. } => {
                out.insert(grade.as_str());
            }
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().for_each(|p| p.referenced(out)),
        }
    }

    /// `None` when any referenced grade is missing from `record`.
    fn eval(&self, record: &MoaksRecord) -> Option<bool> {
        match self {
            Predicate::AtLeast { grade, min } => record.get(grade).map(|g| g >= *min),
            Predicate::All(ps) => {
                let vals: Option<Vec<bool>> = ps.iter().map(|p| p.eval(record)).collect();
                vals.map(|v| v.into_iter().all(|b| b))
            }
            Predicate::Any(ps) => {
                let vals: Option<Vec<bool>> = ps.iter().map(|p| p.eval(record)).collect();
                vals.map(|v| v.into_iter().any(|b| b))
            }
        }
    }
}

/// Per-phenotype predicates.
///
/// The default thresholds are placeholders for the published clinical
/// definitions and every threshold can be replaced from a JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenotypeRuleSet {
    pub cartilage_meniscus: Predicate,
    pub subchondral_bone: Predicate,
}

impl Default for PhenotypeRuleSet {
    fn default() -> Self {
        PhenotypeRuleSet {
            // meniscal damage >= 2 in either meniscus AND cartilage damage
            // >= 2 in at least one medial and one lateral TFJ subregion
            cartilage_meniscus: Predicate::All(vec![
                Predicate::any_of("meniscus", &MENISCI, 2),
                Predicate::any_of("cartilage", &MEDIAL_TFJ, 2),
                Predicate::any_of("cartilage", &LATERAL_TFJ, 2),
            ]),
            // BML >= 2 anywhere in the TFJ or PFJ
            subchondral_bone: Predicate::any_of(
                "bml",
                &MEDIAL_TFJ
                    .iter()
                    .chain(&LATERAL_TFJ)
                    .chain(&PFJ)
                    .copied()
                    .collect::<Vec<_>>(),
                2,
            ),
        }
    }
}

impl PhenotypeRuleSet {
    /// Check every referenced name against the vocabulary.
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        self.cartilage_meniscus.referenced(&mut names);
        self.subchondral_bone.referenced(&mut names);
        for name in names {
            let sg = SubGrade::parse(name)
                .ok_or_else(|| Error::Config(format!("rule references unknown sub-grade `{name}`")))?;
            if let Some(min) = self.threshold_of(name) {
                if min > sg.feature.max_grade() {
                    return Err(Error::Config(format!(
                        "threshold {min} for `{name}` exceeds max grade {}",
                        sg.feature.max_grade()
                    )));
                }
            }
        }
        Ok(())
    }

    fn threshold_of(&self, name: &str) -> Option<u8> {
        fn find(p: &Predicate, name: &str) -> Option<u8> {
            match p {
                Predicate::AtLeast { grade, min } if grade == name => Some(*min),
                Predicate::AtLeast { .. } => None,
                Predicate::All(ps) | Predicate::Any(ps) => ps.iter().find_map(|p| find(p, name)),
            }
        }
        find(&self.cartilage_meniscus, name).or_else(|| find(&self.subchondral_bone, name))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rules: PhenotypeRuleSet = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("rule set: {e}")))?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule set serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Binary phenotype labels; `None` means the label could not be derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenotypeLabel {
    pub cartilage_meniscus: Option<bool>,
    pub subchondral_bone: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phenotype {
    CartilageMeniscus,
    SubchondralBone,
}

impl PhenotypeLabel {
    pub fn get(&self, p: Phenotype) -> Option<bool> {
        match p {
            Phenotype::CartilageMeniscus => self.cartilage_meniscus,
            Phenotype::SubchondralBone => self.subchondral_bone,
        }
    }

    pub fn set(&mut self, p: Phenotype, v: Option<bool>) {
        match p {
            Phenotype::CartilageMeniscus => self.cartilage_meniscus = v,
            Phenotype::SubchondralBone => self.subchondral_bone = v,
        }
    }
}

impl Phenotype {
    pub const ALL: [Phenotype; 2] = [Phenotype::CartilageMeniscus, Phenotype::SubchondralBone];

    pub fn as_str(self) -> &'static str {
        match self {
            Phenotype::CartilageMeniscus => "cartilage_meniscus",
            Phenotype::SubchondralBone => "subchondral_bone",
        }
    }
}

impl std::fmt::Display for Phenotype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phenotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartilage_meniscus" | "cartilage-meniscus" => Ok(Phenotype::CartilageMeniscus),
            "subchondral_bone" | "subchondral-bone" => Ok(Phenotype::SubchondralBone),
            other => Err(Error::arg("phenotype", format!("unknown phenotype `{other}`"))),
        }
    }
}

/// Apply `rules` to one record.
pub fn to_phenotypes(record: &MoaksRecord, rules: &PhenotypeRuleSet) -> Result<PhenotypeLabel> {
    rules.validate()?;
    Ok(PhenotypeLabel {
        cartilage_meniscus: rules.cartilage_meniscus.eval(record),
        subchondral_bone: rules.subchondral_bone.eval(record),
    })
}
