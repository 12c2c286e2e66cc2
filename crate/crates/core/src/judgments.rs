//! Grade scales, judgment sets, aggregation and assessor agreement.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterIndex;
use crate::collection::{ItemSpace, QrelRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradeScale {
    /// Single NTCIR assessor: N(0) < P(1) < R(2).
    Ntcir3,
    /// Sum of two NTCIR assessors: 0..=4.
    NtcirAgg,
    /// N(0) < P-(1) < P+(2) < R(3).
    Arqmath,
    Binary,
}

impl GradeScale {
    pub const ALL: [GradeScale; 4] = [
        GradeScale::Ntcir3,
        GradeScale::NtcirAgg,
        GradeScale::Arqmath,
        GradeScale::Binary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradeScale::Ntcir3 => "ntcir3",
            GradeScale::NtcirAgg => "ntcir-agg",
            GradeScale::Arqmath => "arqmath",
            GradeScale::Binary => "binary",
        }
    }

    pub fn max_code(self) -> u8 {
        match self {
            GradeScale::Ntcir3 => 2,
            GradeScale::NtcirAgg => 4,
            GradeScale::Arqmath => 3,
            GradeScale::Binary => 1,
        }
    }

    /// Lowest code counted as relevant after binarization.
    pub fn threshold(self) -> u8 {
        match self {
            GradeScale::Ntcir3 => 2,
            GradeScale::NtcirAgg => 3,
            GradeScale::Arqmath => 2,
            GradeScale::Binary => 1,
        }
    }

    pub fn is_relevant(self, code: u8) -> bool {
        code >= self.threshold()
    }

    /// Level names, worst first.
    pub fn levels(self) -> &'static [&'static str] {
        match self {
            GradeScale::Ntcir3 => &["N", "P", "R"],
            GradeScale::NtcirAgg => &["0", "1", "2", "3", "4"],
            GradeScale::Arqmath => &["N", "P-", "P+", "R"],
            GradeScale::Binary => &["0", "1"],
        }
    }

    pub fn label(self, code: u8) -> Option<&'static str> {
        self.levels().get(code as usize).copied()
    }

    pub fn code_of(self, label: &str) -> Option<u8> {
        self.levels().iter().position(|l| *l == label).map(|p| p as u8)
    }

    pub fn check(self, grade: i64) -> Result<u8> {
        if (0..=self.max_code() as i64).contains(&grade) {
            Ok(grade as u8)
        } else {
            Err(Error::GradeOutOfRange {
                grade,
                scale: self.name().to_string(),
            })
        }
    }
}

impl FromStr for GradeScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GradeScale::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownScale(s.to_string()))
    }
}

impl fmt::Display for GradeScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Graded records on one scale, in one item space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentSet {
    scale: GradeScale,
    space: ItemSpace,
    records: Vec<QrelRecord>,
}

impl JudgmentSet {
    /// Validates grades and the one-record-per-(topic, item, assessor) rule.
    /// A verbatim repeat of a record is dropped; a conflicting repeat is an
    /// error.
    pub fn new(scale: GradeScale, space: ItemSpace, records: Vec<QrelRecord>) -> Result<Self> {
        let mut seen: HashMap<(&str, &str, Option<&str>), u8> = HashMap::new();
        let mut keep = vec![true; records.len()];
        for (i, r) in records.iter().enumerate() {
            scale.check(r.grade as i64)?;
            let key = (r.topic_id.as_str(), r.item_id.as_str(), r.assessor.as_deref());
            match seen.get(&key) {
                None => {
                    seen.insert(key, r.grade);
                }
                Some(&g) if g == r.grade => keep[i] = false,
                Some(_) => {
                    return Err(Error::DuplicateJudgment {
                        topic: r.topic_id.clone(),
                        item: r.item_id.clone(),
                    })
                }
            }
        }
        let records = records
            .into_iter()
            .zip(keep)
            .filter_map(|(r, k)| k.then_some(r))
            .collect();
        Ok(JudgmentSet { scale, space, records })
    }

    pub fn scale(&self) -> GradeScale {
        self.scale
    }

    pub fn space(&self) -> ItemSpace {
        self.space
    }

    pub fn records(&self) -> &[QrelRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn topics(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.topic_id.as_str()).collect()
    }

    pub fn assessors(&self) -> BTreeSet<&str> {
        self.records.iter().filter_map(|r| r.assessor.as_deref()).collect()
    }

    /// Records of one assessor (or the unattributed ones for `None`).
    pub fn for_assessor(&self, assessor: Option<&str>) -> JudgmentSet {
        JudgmentSet {
            scale: self.scale,
            space: self.space,
            records: self
                .records
                .iter()
                .filter(|r| r.assessor.as_deref() == assessor)
                .cloned()
                .collect(),
        }
    }

    /// topic → item → grade. Errors if an item carries several records.
    pub fn grade_map(&self) -> Result<BTreeMap<&str, BTreeMap<&str, u8>>> {
        let mut out: BTreeMap<&str, BTreeMap<&str, u8>> = BTreeMap::new();
        for r in &self.records {
            if out
                .entry(r.topic_id.as_str())
                .or_default()
                .insert(r.item_id.as_str(), r.grade)
                .is_some()
            {
                return Err(Error::AmbiguousJudgment {
                    topic: r.topic_id.clone(),
                    item: r.item_id.clone(),
                });
            }
        }
        Ok(out)
    }
}

fn require_scale(set: &JudgmentSet, expected: GradeScale) -> Result<()> {
    if set.scale == expected {
        Ok(())
    } else {
        Err(Error::ScaleMismatch {
            expected: expected.name().to_string(),
            found: set.scale.name().to_string(),
        })
    }
}

/// Pairs records of two sets by (topic, item), requiring identical key sets.
fn pair<'a>(a: &'a JudgmentSet, b: &'a JudgmentSet) -> Result<Vec<(&'a str, &'a str, u8, u8)>> {
    let ma = a.grade_map()?;
    let mb = b.grade_map()?;
    let missing = |topic: &str, item: &str| (topic.to_string(), item.to_string());
    let mut out = Vec::new();
    for (topic, items) in &ma {
        for (item, &ga) in items {
            match mb.get(topic).and_then(|m| m.get(item)) {
                Some(&gb) => out.push((*topic, *item, ga, gb)),
                None => {
                    let (topic, item) = missing(topic, item);
                    return Err(Error::UnpairedRecords { topic, item });
                }
            }
        }
    }
    for (topic, items) in &mb {
        for item in items.keys() {
            if !ma.get(topic).is_some_and(|m| m.contains_key(item)) {
                let (topic, item) = missing(topic, item);
                return Err(Error::UnpairedRecords { topic, item });
            }
        }
    }
    Ok(out)
}

/// Per item, the sum of two single-assessor ntcir3 grades.
pub fn aggregate_sum_ntcir(a: &JudgmentSet, b: &JudgmentSet) -> Result<JudgmentSet> {
    require_scale(a, GradeScale::Ntcir3)?;
    require_scale(b, GradeScale::Ntcir3)?;
    let pairs = pair(a, b).map_err(|e| match e {
        Error::UnpairedRecords { topic, item } => Error::MissingCounterpart { topic, item },
        other => other,
    })?;
    let records = pairs
        .into_iter()
        .map(|(t, i, ga, gb)| QrelRecord::new(t, i, ga + gb))
        .collect();
    JudgmentSet::new(GradeScale::NtcirAgg, a.space, records)
}

/// 1 iff grade meets the scale's threshold. Binary input is returned as is.
pub fn binarize(set: &JudgmentSet) -> JudgmentSet {
    let scale = set.scale;
    JudgmentSet {
        scale: GradeScale::Binary,
        space: set.space,
        records: set
            .records
            .iter()
            .map(|r| QrelRecord {
                grade: scale.is_relevant(r.grade) as u8,
                ..r.clone()
            })
            .collect(),
    }
}

/// Per (topic, visual id), the maximum grade over its judged instances.
pub fn aggregate_max_visual(set: &JudgmentSet, index: &ClusterIndex) -> Result<JudgmentSet> {
    let mut best: BTreeMap<(&str, &str), u8> = BTreeMap::new();
    for r in &set.records {
        let visual = index.visual_id_of(&r.item_id)?;
        let g = best.entry((r.topic_id.as_str(), visual)).or_insert(r.grade);
        *g = (*g).max(r.grade);
    }
    let records = best.into_iter().map(|((t, v), g)| QrelRecord::new(t, v, g)).collect();
    JudgmentSet::new(set.scale, ItemSpace::Visual, records)
}

/// Unweighted Cohen's kappa over paired (topic, item) judgments.
pub fn cohen_kappa(a: &JudgmentSet, b: &JudgmentSet) -> Result<f64> {
    require_scale(b, a.scale)?;
    let pairs = pair(a, b)?;
    if pairs.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let k = a.scale.max_code() as usize + 1;
    let n = pairs.len() as f64;
    let mut agree = 0usize;
    let mut ma = vec![0usize; k];
    let mut mb = vec![0usize; k];
    for &(_, _, ga, gb) in &pairs {
        agree += (ga == gb) as usize;
        ma[ga as usize] += 1;
        mb[gb as usize] += 1;
    }
    let po = agree as f64 / n;
    let pe: f64 = ma.iter().zip(&mb).map(|(&x, &y)| (x as f64 / n) * (y as f64 / n)).sum();
    if (1.0 - pe).abs() < 1e-12 {
        // both assessors used a single identical label throughout
        return Ok(1.0);
    }
    Ok(((po - pe) / (1.0 - pe)).clamp(-1.0, 1.0))
}
