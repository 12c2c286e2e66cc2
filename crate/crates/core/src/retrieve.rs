//! A small structural baseline: SLT pair features scored with Dice, plus
//! wildcard matching for queries with `*n*` slots.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterIndex, FormulaInstance};
use crate::collection::{RankedRun, RunEntry, Topic};
use crate::error::{Error, Result};
use crate::formula::{
    canonical_key_with, normalize_tokens_with, parse_slt, slt_to_opt, tokenize_latex, CanonicalKey, EdgeLabel,
    NormalizationTables, OperatorTree, OptLabel, SltLabel, SymbolLayoutTree,
};

pub const RUN_TAG: &str = "baseline-dice";

/// One feature: a node label alone, or an (ancestor, descendant, edge path)
/// pair with a path of one or two edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureTuple {
    pub ancestor: String,
    pub descendant: Option<String>,
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SltFeatureSet {
    pub tuples: BTreeMap<FeatureTuple, usize>,
}

impl SltFeatureSet {
    pub fn len(&self) -> usize {
        self.tuples.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    fn add(&mut self, t: FeatureTuple) {
        *self.tuples.entry(t).or_default() += 1;
    }
}

pub fn slt_features(slt: &SymbolLayoutTree) -> SltFeatureSet {
    let mut set = SltFeatureSet::default();
    let label = |id: usize| slt.node(id).label.canonical();
    for (id, node) in slt.nodes.iter().enumerate() {
        let a = label(id);
        set.add(FeatureTuple {
            ancestor: a.clone(),
            descendant: None,
            path: String::new(),
        });
        for &(e1, c1) in &node.edges {
            set.add(FeatureTuple {
                ancestor: a.clone(),
                descendant: Some(label(c1)),
                path: e1.as_str().to_string(),
            });
            for &(e2, c2) in &slt.node(c1).edges {
                set.add(FeatureTuple {
                    ancestor: a.clone(),
                    descendant: Some(label(c2)),
                    path: format!("{}.{}", e1.as_str(), e2.as_str()),
                });
            }
        }
    }
    set
}

/// 2|q ∩ c| / (|q| + |c|) over multisets.
pub fn score_dice(q: &SltFeatureSet, c: &SltFeatureSet) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let overlap: usize = q
        .tuples
        .iter()
        .map(|(t, &n)| n.min(c.tuples.get(t).copied().unwrap_or(0)))
        .sum();
    Ok(2.0 * overlap as f64 / (q.len() + c.len()) as f64)
}

// ---------------------------------------------------------------- wildcards

fn opt_match(q: &OperatorTree, qid: usize, c: &OperatorTree, cid: usize, bound: &mut HashMap<u32, String>) -> bool {
    let qn = q.node(qid);
    let cn = c.node(cid);
    if let OptLabel::Wildcard(slot) = qn.label {
        let text = c.serialize_from(cid);
        return match bound.get(&slot) {
            Some(prev) => *prev == text,
            None => {
                bound.insert(slot, text);
                true
            }
        };
    }
    qn.label == cn.label
        && qn.children.len() == cn.children.len()
        && qn
            .children
            .iter()
            .zip(&cn.children)
            .all(|(&qc, &cc)| opt_match(q, qc, c, cc, bound))
}

/// A candidate node and its non-NEXT subtrees, as text.
fn slt_item_text(slt: &SymbolLayoutTree, id: usize) -> String {
    let node = slt.node(id);
    let mut out = node.label.canonical();
    let mut edges = node.edges.clone();
    edges.sort_by_key(|&(e, _)| e);
    for (e, child) in edges {
        if e != EdgeLabel::Next {
            out.push_str(&format!("[{}:{}]", e.as_str(), slt.serialize_from(child)));
        }
    }
    out
}

fn slt_match(
    q: &SymbolLayoutTree,
    qid: usize,
    c: &SymbolLayoutTree,
    cid: usize,
    bound: &mut HashMap<u32, String>,
) -> bool {
    let qn = q.node(qid);
    let cn = c.node(cid);
    let next_ok = |bound: &mut HashMap<u32, String>| match (qn.child(EdgeLabel::Next), cn.child(EdgeLabel::Next)) {
        (None, None) => true,
        (Some(qc), Some(cc)) => slt_match(q, qc, c, cc, bound),
        _ => false,
    };
    if let SltLabel::Wildcard(slot) = qn.label {
        let text = slt_item_text(c, cid);
        let ok = match bound.get(&slot) {
            Some(prev) => *prev == text,
            None => {
                bound.insert(slot, text);
                true
            }
        };
        return ok && next_ok(bound);
    }
    if qn.label != cn.label || qn.edges.len() != cn.edges.len() {
        return false;
    }
    for &(e, qc) in &qn.edges {
        if e == EdgeLabel::Next {
            continue;
        }
        match cn.child(e) {
            Some(cc) if slt_match(q, qc, c, cc, bound) => {}
            _ => return false,
        }
    }
    next_ok(bound)
}

/// True iff the query's wildcard slots can each be bound to a candidate
/// subtree so that both trees are equal; a slot used twice must bind equal
/// subtrees. Matching is done on operator trees, falling back to layout
/// trees (a slot then binds one symbol with its scripts) when either side
/// has no operator tree.
pub fn wildcard_match(query: &SymbolLayoutTree, candidate: &SymbolLayoutTree) -> bool {
    if candidate.has_wildcards() {
        return false;
    }
    if !query.has_wildcards() {
        return query.serialize() == candidate.serialize();
    }
    let mut bound = HashMap::new();
    match (slt_to_opt(query), slt_to_opt(candidate)) {
        (Ok(q), Ok(c)) => opt_match(&q, q.root, &c, c.root, &mut bound),
        _ => slt_match(query, query.root, candidate, candidate.root, &mut bound),
    }
}

// ---------------------------------------------------------------- index

#[derive(Debug, Clone)]
struct IndexedCluster {
    visual_id: String,
    key: CanonicalKey,
    slt: Option<SymbolLayoutTree>,
    features: SltFeatureSet,
}

/// One representative formula per visual cluster.
#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    clusters: Vec<IndexedCluster>,
    tables: NormalizationTables,
}

fn parse_with(latex: &str, tables: &NormalizationTables) -> Option<SymbolLayoutTree> {
    let toks = tokenize_latex(latex).ok()?;
    parse_slt(&normalize_tokens_with(&toks, tables)).ok()
}

impl RetrievalIndex {
    pub fn build(corpus: &[FormulaInstance], clusters: &ClusterIndex) -> Result<Self> {
        Self::build_with(corpus, clusters, NormalizationTables::builtin())
    }

    /// The representative of a cluster is its first member found in `corpus`.
    pub fn build_with(
        corpus: &[FormulaInstance],
        clusters: &ClusterIndex,
        tables: &NormalizationTables,
    ) -> Result<Self> {
        let latex: HashMap<&str, &str> = corpus
            .iter()
            .map(|i| (i.instance_id.as_str(), i.latex.as_str()))
            .collect();
        let reps: Vec<(&str, &str)> = clusters
            .clusters()
            .iter()
            .map(|c| {
                c.members
                    .iter()
                    .find_map(|m| latex.get(m.as_str()).copied())
                    .map(|l| (c.visual_id.as_str(), l))
                    .ok_or_else(|| Error::UnknownInstance(c.members.first().cloned().unwrap_or_default()))
            })
            .collect::<Result<_>>()?;
        let clusters = reps
            .par_iter()
            .map(|&(visual_id, latex)| {
                let slt = parse_with(latex, tables);
                IndexedCluster {
                    visual_id: visual_id.to_string(),
                    key: canonical_key_with(latex, tables),
                    features: slt.as_ref().map(slt_features).unwrap_or_default(),
                    slt,
                }
            })
            .collect();
        Ok(RetrievalIndex {
            clusters,
            tables: tables.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Top `limit` visual ids for `query_latex`. A cluster with the query's
    /// canonical key ranks first; wildcard matches follow with score 1; the
    /// rest are ordered by Dice score, ties by visual id ascending. A query
    /// that does not parse only retrieves its exact cluster.
    pub fn retrieve(&self, query_latex: &str, limit: usize) -> Result<Vec<RunEntry>> {
        if query_latex.trim().is_empty() {
            return Err(Error::EmptyQuery);
        }
        let key = canonical_key_with(query_latex, &self.tables);
        let slt = parse_with(query_latex, &self.tables);
        let features = slt.as_ref().map(slt_features);
        let wild = slt.as_ref().is_some_and(SymbolLayoutTree::has_wildcards);

        // (tier, score, visual id); tier 2 = same key, 1 = wildcard match
        let mut scored: Vec<(u8, f64, &str)> = self
            .clusters
            .par_iter()
            .filter_map(|c| {
                if c.key.kind == key.kind && c.key.serialized == key.serialized {
                    return Some(Ok((2, 1.0, c.visual_id.as_str())));
                }
                let (q_slt, q_feat) = (slt.as_ref()?, features.as_ref()?);
                if wild && c.slt.as_ref().is_some_and(|cs| wildcard_match(q_slt, cs)) {
                    return Some(Ok((1, 1.0, c.visual_id.as_str())));
                }
                Some(score_dice(q_feat, &c.features).map(|s| (0, s, c.visual_id.as_str())))
            })
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then_with(|| b.1.total_cmp(&a.1))
                .then_with(|| a.2.cmp(b.2))
        });
        Ok(scored
            .into_iter()
            .take(limit)
            .enumerate()
            .map(|(i, (_, score, vid))| RunEntry {
                item_id: vid.to_string(),
                rank: i as u32 + 1,
                score,
            })
            .collect())
    }

    /// A run over every topic, in visual-id space.
    pub fn retrieve_topics(&self, topics: &[Topic], limit: usize) -> Result<RankedRun> {
        let mut run = RankedRun::new(RUN_TAG);
        for t in topics {
            run.topics
                .insert(t.topic_id.clone(), self.retrieve(&t.query_latex, limit)?);
        }
        Ok(run)
    }
}
