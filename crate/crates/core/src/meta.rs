//! Comparing system orderings: rank correlation, swaps, gaps and
//! per-complexity strata.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterIndex;
use crate::collection::{Complexity, RankedRun, Topic};
use crate::error::{Error, Result};
use crate::judgments::JudgmentSet;
use crate::metrics::{evaluate_run, EvalOptions, EvalResult, Measure};

/// (run_tag, value) pairs, best first.
pub type Ordering = Vec<(String, f64)>;

/// Runs ordered by mean `measure`, descending; ties by run tag ascending.
pub fn rank_systems(results: &[EvalResult], measure: Measure) -> Result<Ordering> {
    let mut out = results
        .iter()
        .map(|r| {
            r.mean(measure)
                .map(|v| (r.run_tag.clone(), v))
                .ok_or_else(|| Error::MissingMeasure {
                    run: r.run_tag.clone(),
                    measure: measure.to_string(),
                })
        })
        .collect::<Result<Ordering>>()?;
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Paired values per system; both orderings must cover the same systems.
fn paired(a: &[(String, f64)], b: &[(String, f64)]) -> Result<Vec<(f64, f64)>> {
    let mb: HashMap<&str, f64> = b.iter().map(|(s, v)| (s.as_str(), *v)).collect();
    let sa: BTreeSet<&str> = a.iter().map(|(s, _)| s.as_str()).collect();
    let sb: BTreeSet<&str> = mb.keys().copied().collect();
    if sa != sb || sa.len() != a.len() || sb.len() != b.len() {
        let only_a: Vec<&str> = sa.difference(&sb).copied().collect();
        let only_b: Vec<&str> = sb.difference(&sa).copied().collect();
        return Err(Error::MismatchedSystems(format!(
            "only in first: [{}]; only in second: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    Ok(a.iter().map(|(s, v)| (*v, mb[s.as_str()])).collect())
}

struct PairCounts {
    concordant: u64,
    discordant: u64,
    tied_a_only: u64,
    tied_b_only: u64,
}

fn count_pairs(xy: &[(f64, f64)]) -> PairCounts {
    let mut c = PairCounts {
        concordant: 0,
        discordant: 0,
        tied_a_only: 0,
        tied_b_only: 0,
    };
    for i in 0..xy.len() {
        for j in i + 1..xy.len() {
            let da = xy[i].0.total_cmp(&xy[j].0);
            let db = xy[i].1.total_cmp(&xy[j].1);
            use std::cmp::Ordering::Equal;
            match (da, db) {
                (Equal, Equal) => {}
                (Equal, _) => c.tied_a_only += 1,
                (_, Equal) => c.tied_b_only += 1,
                _ if da == db => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

/// Kendall's tau-b between two orderings of the same systems, comparing values.
pub fn kendall_tau_b(a: &[(String, f64)], b: &[(String, f64)]) -> Result<f64> {
    let xy = paired(a, b)?;
    if xy.len() < 2 {
        return Err(Error::TooFewSystems);
    }
    let c = count_pairs(&xy);
    let cd = (c.concordant + c.discordant) as f64;
    let denom = ((cd + c.tied_a_only as f64) * (cd + c.tied_b_only as f64)).sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(((c.concordant as f64 - c.discordant as f64) / denom).clamp(-1.0, 1.0))
}

/// Pairs of systems ordered oppositely by the two orderings.
pub fn count_swaps(a: &[(String, f64)], b: &[(String, f64)]) -> Result<u64> {
    Ok(count_pairs(&paired(a, b)?).discordant)
}

/// Mean difference between adjacent values once sorted.
pub fn mean_gap(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewSystems);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max - min) / (values.len() - 1) as f64)
}

// ---------------------------------------------------------------- strata

/// Topic ids per complexity level. Every judged topic needs an L/M/H label.
pub fn strata<'a>(
    topics: &'a [Topic],
    judged: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<Complexity, BTreeSet<String>>> {
    let label: HashMap<&str, Complexity> = topics.iter().map(|t| (t.topic_id.as_str(), t.complexity)).collect();
    let mut out: BTreeMap<Complexity, BTreeSet<String>> =
        Complexity::STRATA.iter().map(|&c| (c, BTreeSet::new())).collect();
    for topic in judged {
        match label.get(topic) {
            Some(c) if *c != Complexity::Unknown => {
                out.get_mut(c).expect("stratum present").insert(topic.to_string());
            }
            _ => return Err(Error::UnknownComplexity(topic.to_string())),
        }
    }
    Ok(out)
}

/// The subset of `set` whose topic is in `topics`.
pub fn restrict_judgments(set: &JudgmentSet, topics: &BTreeSet<String>) -> JudgmentSet {
    let records = set
        .records()
        .iter()
        .filter(|r| topics.contains(&r.topic_id))
        .cloned()
        .collect();
    JudgmentSet::new(set.scale(), set.space(), records).expect("subset of a valid set")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEval {
    pub complexity: Complexity,
    pub topics: BTreeSet<String>,
    pub results: Vec<EvalResult>,
}

/// Evaluate every run separately on the L, M and H topics. An empty stratum
/// yields results with no evaluable topics.
pub fn stratify_by_complexity(
    runs: &[RankedRun],
    judgments: &JudgmentSet,
    measures: &[Measure],
    clusters: Option<&ClusterIndex>,
    opts: EvalOptions,
    topics: &[Topic],
) -> Result<Vec<StratumEval>> {
    strata(topics, judgments.topics())?
        .into_iter()
        .map(|(complexity, ids)| {
            let subset = restrict_judgments(judgments, &ids);
            let results = runs
                .iter()
                .map(|run| evaluate_run(run, &subset, measures, clusters, opts))
                .collect::<Result<_>>()?;
            Ok(StratumEval {
                complexity,
                topics: ids,
                results,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub first: String,
    pub second: String,
    /// `None` when undefined (fewer than two systems or a fully tied side).
    pub tau_b: Option<f64>,
    pub swaps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOrdering {
    pub name: String,
    pub ordering: Ordering,
    pub mean_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub measure: Measure,
    pub orderings: Vec<NamedOrdering>,
    pub pairs: Vec<PairComparison>,
}

/// Compare every pair of orderings (i < j, input order), e.g. the L, M, H
/// strata give Low:Medium, Low:High, Medium:High.
pub fn compare_orderings(measure: Measure, named: Vec<(String, Ordering)>) -> Result<ComparisonReport> {
    let mut pairs = Vec::new();
    for i in 0..named.len() {
        for j in i + 1..named.len() {
            let (a, b) = (&named[i].1, &named[j].1);
            let tau_b = match kendall_tau_b(a, b) {
                Ok(t) => Some(t),
                Err(Error::TooFewSystems | Error::UndefinedCorrelation) => None,
                Err(e) => return Err(e),
            };
            pairs.push(PairComparison {
                first: named[i].0.clone(),
                second: named[j].0.clone(),
                tau_b,
                swaps: count_swaps(a, b)?,
            });
        }
    }
    let orderings = named
        .into_iter()
        .map(|(name, ordering)| {
            let values: Vec<f64> = ordering.iter().map(|(_, v)| *v).collect();
            NamedOrdering {
                name,
                mean_gap: mean_gap(&values).ok(),
                ordering,
            }
        })
        .collect();
    Ok(ComparisonReport {
        measure,
        orderings,
        pairs,
    })
}

/// Orderings of each stratum by `measure`, compared pairwise. Strata with no
/// evaluable topics are left out.
pub fn compare_strata(strata: &[StratumEval], measure: Measure) -> Result<ComparisonReport> {
    let named = strata
        .iter()
        .filter(|s| !s.topics.is_empty())
        .map(|s| Ok((s.complexity.name().to_string(), rank_systems(&s.results, measure)?)))
        .collect::<Result<Vec<_>>>()?;
    compare_orderings(measure, named)
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

impl ComparisonReport {
    /// Two TSV blocks: pairwise `tau_b`/`swaps`, then per-ordering mean gap.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("pair\ttau_b\tswaps\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{}:{}\t{}\t{}", p.first, p.second, opt4(p.tau_b), p.swaps);
        }
        out.push_str("\nordering\tsystems\tmean_gap\n");
        for o in &self.orderings {
            let _ = writeln!(out, "{}\t{}\t{}", o.name, o.ordering.len(), opt4(o.mean_gap));
        }
        out
    }

    /// `run_tag \t ordering \t rank \t value`, one line per system and ordering,
    /// for plotting rank trajectories.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("run_tag\tordering\trank\tvalue\n");
        let mut systems: BTreeSet<&str> = BTreeSet::new();
        for o in &self.orderings {
            systems.extend(o.ordering.iter().map(|(s, _)| s.as_str()));
        }
        for s in systems {
            for o in &self.orderings {
                if let Some(pos) = o.ordering.iter().position(|(t, _)| t == s) {
                    let _ = writeln!(out, "{s}\t{}\t{}\t{:.4}", o.name, pos + 1, o.ordering[pos].1);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
