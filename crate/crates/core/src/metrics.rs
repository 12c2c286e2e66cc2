//! Ranked-list measures and the two scoring pipelines.
//!
//! `ntcir-instance`: instance ids, unjudged counted as non-relevant.
//! `arqmath-visual`: instances mapped to visual ids, greedy dedup, then the
//! prime measures drop unjudged items before scoring.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::hash::Hash;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterIndex;
use crate::collection::{ItemSpace, RankedRun};
use crate::error::{Error, Result};
use crate::judgments::JudgmentSet;

// ---------------------------------------------------------------- list ops

/// Keep the first occurrence of each key, in order.
pub fn dedup_first<T: Eq + Hash + Clone>(items: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|x| seen.insert(x.clone())).collect()
}

/// Map instances to visual ids and keep each visual id at its best rank.
pub fn dedup_visual<S: AsRef<str>>(ranked: &[S], index: &ClusterIndex) -> Result<Vec<String>> {
    let visual: Vec<&str> = ranked
        .iter()
        .map(|i| index.visual_id_of(i.as_ref()))
        .collect::<Result<_>>()?;
    Ok(dedup_first(visual).into_iter().map(str::to_string).collect())
}

/// The judged subsequence of `ranked`; position in the result is the new rank.
pub fn prime_filter<S: AsRef<str> + Clone>(ranked: &[S], is_judged: impl Fn(&str) -> bool) -> Vec<S> {
    ranked.iter().filter(|i| is_judged(i.as_ref())).cloned().collect()
}

// ---------------------------------------------------------------- measures

/// Relevant items in the top `k` over `k`; missing positions are non-relevant.
pub fn precision_at_k(relevant: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    relevant.iter().take(k).filter(|&&r| r).count() as f64 / k as f64
}

/// Precision over the whole returned list (0 for an empty list).
pub fn precision_at_hit(relevant: &[bool]) -> f64 {
    precision_at_k(relevant, relevant.len())
}

pub fn average_precision(relevant: &[bool], total_relevant: usize) -> Result<f64> {
    if total_relevant == 0 {
        return Err(Error::ZeroRelevant);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / total_relevant as f64)
}

pub fn reciprocal_rank(relevant: &[bool]) -> f64 {
    relevant.iter().position(|&r| r).map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains.enumerate().map(|(i, g)| g / ((i + 2) as f64).log2()).sum()
}

/// DCG of `gains` over DCG of `ideal_pool` sorted descending, both truncated
/// to `cutoff` when given. 0 when the ideal DCG is 0.
pub fn ndcg(gains: &[f64], ideal_pool: &[f64], cutoff: Option<usize>) -> f64 {
    let depth = cutoff.unwrap_or(usize::MAX);
    let mut ideal = ideal_pool.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter().take(depth));
    if idcg <= 0.0 {
        return 0.0;
    }
    dcg(gains.iter().copied().take(depth)) / idcg
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Measure {
    PAt(usize),
    PHit,
    Map,
    Mrr,
    Ndcg,
    NdcgPrime,
    MapPrime,
    PPrimeAt(usize),
}

impl Measure {
    pub fn is_prime(self) -> bool {
        matches!(self, Measure::NdcgPrime | Measure::MapPrime | Measure::PPrimeAt(_))
    }

    /// Parse a comma-separated list such as `ndcg-prime,map-prime,p-prime@10`.
    pub fn parse_list(s: &str) -> Result<Vec<Measure>> {
        s.split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let cutoff = |k: &str| k.parse::<usize>().ok().filter(|&k| k > 0);
        let m = match lower.as_str() {
            "p@hit" => Some(Measure::PHit),
            "map" => Some(Measure::Map),
            "mrr" => Some(Measure::Mrr),
            "ndcg" => Some(Measure::Ndcg),
            "ndcg-prime" | "ndcg'" => Some(Measure::NdcgPrime),
            "map-prime" | "map'" => Some(Measure::MapPrime),
            other => {
                if let Some(k) = other.strip_prefix("p-prime@").or_else(|| other.strip_prefix("p'@")) {
                    cutoff(k).map(Measure::PPrimeAt)
                } else if let Some(k) = other.strip_prefix("p@") {
                    cutoff(k).map(Measure::PAt)
                } else {
                    None
                }
            }
        };
        m.ok_or_else(|| Error::UnknownMeasure(s.to_string()))
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::PAt(k) => write!(f, "p@{k}"),
            Measure::PHit => f.write_str("p@hit"),
            Measure::Map => f.write_str("map"),
            Measure::Mrr => f.write_str("mrr"),
            Measure::Ndcg => f.write_str("ndcg"),
            Measure::NdcgPrime => f.write_str("ndcg-prime"),
            Measure::MapPrime => f.write_str("map-prime"),
            Measure::PPrimeAt(k) => write!(f, "p-prime@{k}"),
        }
    }
}

impl TryFrom<String> for Measure {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Measure> for String {
    fn from(m: Measure) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    NtcirInstance,
    ArqmathVisual,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::NtcirInstance => "ntcir-instance",
            Convention::ArqmathVisual => "arqmath-visual",
        }
    }
}

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ntcir-instance" => Ok(Convention::NtcirInstance),
            "arqmath-visual" => Ok(Convention::ArqmathVisual),
            other => Err(format!(
                "unknown convention `{other}` (expected ntcir-instance or arqmath-visual)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gain {
    #[default]
    Linear,
    /// 2^g - 1
    Exponential,
}

impl Gain {
    pub fn apply(self, grade: u8) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

impl FromStr for Gain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exponential" => Ok(Gain::Exponential),
            other => Err(format!("unknown gain `{other}` (expected linear or exponential)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub convention: Convention,
    pub gain: Gain,
    pub ndcg_cutoff: Option<usize>,
    /// Namespace of run item ids; visual runs skip the instance lookup.
    pub run_space: ItemSpace,
}

impl EvalOptions {
    pub fn ntcir() -> Self {
        EvalOptions::default()
    }

    pub fn arqmath() -> Self {
        EvalOptions {
            convention: Convention::ArqmathVisual,
            ..EvalOptions::default()
        }
    }
}

// ---------------------------------------------------------------- results

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    /// Nothing judged left after the prime filter.
    NoJudgedRetrieved,
    /// AP is undefined.
    ZeroRelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub measure: Measure,
    pub per_topic: BTreeMap<String, f64>,
    /// Mean over `per_topic`; `None` when no topic was evaluable.
    pub mean: Option<f64>,
    pub excluded: BTreeMap<String, ExclusionReason>,
}

impl MeasureResult {
    pub fn evaluable_topics(&self) -> impl Iterator<Item = &str> {
        self.per_topic.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub run_tag: String,
    pub convention: Convention,
    pub measures: Vec<MeasureResult>,
}

impl EvalResult {
    pub fn get(&self, measure: Measure) -> Option<&MeasureResult> {
        self.measures.iter().find(|m| m.measure == measure)
    }

    pub fn mean(&self, measure: Measure) -> Option<f64> {
        self.get(measure).and_then(|m| m.mean)
    }

    /// `run_tag \t measure \t topic|ALL \t value`, 4 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for m in &self.measures {
            for (topic, v) in &m.per_topic {
                let _ = writeln!(out, "{}\t{}\t{topic}\t{v:.4}", self.run_tag, m.measure);
            }
            if let Some(mean) = m.mean {
                let _ = writeln!(out, "{}\t{}\tALL\t{mean:.4}", self.run_tag, m.measure);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("eval result serializes")
    }
}

// ---------------------------------------------------------------- pipeline

struct TopicScores {
    topic: String,
    values: Vec<std::result::Result<f64, ExclusionReason>>,
}

/// Score `run` against `judgments` for every topic in the judgments.
pub fn evaluate_run(
    run: &RankedRun,
    judgments: &JudgmentSet,
    measures: &[Measure],
    clusters: Option<&ClusterIndex>,
    opts: EvalOptions,
) -> Result<EvalResult> {
    let index = match opts.convention {
        Convention::NtcirInstance => {
            if judgments.space() != ItemSpace::Instance {
                return Err(Error::ConventionMismatch(
                    "ntcir-instance scoring needs instance-space judgments".into(),
                ));
            }
            if opts.run_space != ItemSpace::Instance {
                return Err(Error::ConventionMismatch(
                    "ntcir-instance scoring needs an instance-space run".into(),
                ));
            }
            None
        }
        Convention::ArqmathVisual => {
            if judgments.space() != ItemSpace::Visual {
                return Err(Error::ConventionMismatch(
                    "arqmath-visual scoring needs visual-space judgments (#space=visual)".into(),
                ));
            }
            match (clusters, opts.run_space) {
                (Some(c), ItemSpace::Instance) => Some(c),
                (_, ItemSpace::Visual) => None,
                (None, ItemSpace::Instance) => {
                    return Err(Error::ConventionMismatch(
                        "arqmath-visual scoring of an instance run needs a cluster map".into(),
                    ))
                }
            }
        }
    };

    let grades = judgments.grade_map()?;
    let scale = judgments.scale();

    let rows: Vec<TopicScores> = grades
        .par_iter()
        .map(|(&topic, judged)| -> Result<TopicScores> {
            let ranked: Vec<String> = match (opts.convention, index) {
                (Convention::ArqmathVisual, Some(ix)) => dedup_visual(&run.items(topic), ix)?,
                (Convention::ArqmathVisual, None) => {
                    dedup_first(run.items(topic)).into_iter().map(str::to_string).collect()
                }
                (Convention::NtcirInstance, _) => run.items(topic).into_iter().map(str::to_string).collect(),
            };
            let filtered = prime_filter(&ranked, |i| judged.contains_key(i));
            let total_relevant = judged.values().filter(|&&g| scale.is_relevant(g)).count();
            let ideal: Vec<f64> = judged.values().map(|&g| opts.gain.apply(g)).collect();

            let rel = |list: &[String]| -> Vec<bool> {
                list.iter()
                    .map(|i| judged.get(i.as_str()).is_some_and(|&g| scale.is_relevant(g)))
                    .collect()
            };
            let gains = |list: &[String]| -> Vec<f64> {
                list.iter()
                    .map(|i| judged.get(i.as_str()).map_or(0.0, |&g| opts.gain.apply(g)))
                    .collect()
            };

            let values = measures
                .iter()
                .map(|&m| {
                    let list = if m.is_prime() {
                        if filtered.is_empty() {
                            return Err(ExclusionReason::NoJudgedRetrieved);
                        }
                        &filtered
                    } else {
                        &ranked
                    };
                    let ap =
                        || average_precision(&rel(list), total_relevant).map_err(|_| ExclusionReason::ZeroRelevant);
                    match m {
                        Measure::PAt(k) | Measure::PPrimeAt(k) => Ok(precision_at_k(&rel(list), k)),
                        Measure::PHit => Ok(precision_at_hit(&rel(list))),
                        Measure::Map | Measure::MapPrime => ap(),
                        Measure::Mrr => Ok(reciprocal_rank(&rel(list))),
                        Measure::Ndcg | Measure::NdcgPrime => Ok(ndcg(&gains(list), &ideal, opts.ndcg_cutoff)),
                    }
                })
                .collect();
            Ok(TopicScores {
                topic: topic.to_string(),
                values,
            })
        })
        .collect::<Result<_>>()?;

    let measures = measures
        .iter()
        .enumerate()
        .map(|(j, &measure)| {
            let mut per_topic = BTreeMap::new();
            let mut excluded = BTreeMap::new();
            for row in &rows {
                match &row.values[j] {
                    Ok(v) => {
                        per_topic.insert(row.topic.clone(), *v);
                    }
                    Err(reason) => {
                        excluded.insert(row.topic.clone(), reason.clone());
                    }
                }
            }
            let mean = (!per_topic.is_empty()).then(|| per_topic.values().sum::<f64>() / per_topic.len() as f64);
            MeasureResult {
                measure,
                per_topic,
                mean,
                excluded,
            }
        })
        .collect();

    Ok(EvalResult {
        run_tag: run.run_tag.clone(),
        convention: opts.convention,
        measures,
    })
}
