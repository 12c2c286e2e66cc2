//! Visual clustering: instances with equal canonical keys share a visual id.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collection::{read_text, write_text};
use crate::error::{Error, Result};
use crate::formula::{canonical_key_with, CanonicalKey, NormalizationTables};

/// One occurrence of a formula in a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaInstance {
    pub instance_id: String,
    pub doc_id: String,
    pub latex: String,
}

impl FormulaInstance {
    pub fn new(instance_id: &str, doc_id: &str, latex: &str) -> Self {
        FormulaInstance {
            instance_id: instance_id.to_string(),
            doc_id: doc_id.to_string(),
            latex: latex.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualCluster {
    pub visual_id: String,
    pub key: CanonicalKey,
    /// Instance ids in corpus order.
    pub members: Vec<String>,
}

pub fn cluster_corpus(instances: &[FormulaInstance]) -> Result<Vec<VisualCluster>> {
    cluster_corpus_with(instances, NormalizationTables::builtin())
}

/// Group instances by canonical key. Visual ids are `V` plus a zero-padded
/// index (at least four digits) in order of first appearance.
pub fn cluster_corpus_with(instances: &[FormulaInstance], tables: &NormalizationTables) -> Result<Vec<VisualCluster>> {
    let mut seen = HashMap::with_capacity(instances.len());
    for inst in instances {
        if seen.insert(inst.instance_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateInstanceId(inst.instance_id.clone()));
        }
    }

    let keys: Vec<CanonicalKey> = instances
        .par_iter()
        .map(|inst| canonical_key_with(&inst.latex, tables))
        .collect();

    let mut slot_of: HashMap<(crate::formula::KeyKind, &str), usize> = HashMap::new();
    let mut groups: Vec<(CanonicalKey, Vec<String>)> = Vec::new();
    for (inst, key) in instances.iter().zip(&keys) {
        let slot = *slot_of.entry((key.kind, key.serialized.as_str())).or_insert_with(|| {
            groups.push((key.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(inst.instance_id.clone());
    }

    let width = visual_id_width(groups.len());
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, (key, members))| VisualCluster {
            visual_id: format!("V{i:0width$}"),
            key,
            members,
        })
        .collect())
}

fn visual_id_width(count: usize) -> usize {
    let digits = count.saturating_sub(1).to_string().len();
    digits.max(4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub visual_id: String,
    pub digest: String,
    pub members: Vec<String>,
}

/// Immutable instance → visual id lookup.
#[derive(Debug, Clone, Default)]
pub struct ClusterIndex {
    clusters: Vec<ClusterEntry>,
    by_instance: HashMap<String, usize>,
    by_visual: HashMap<String, usize>,
}

impl ClusterIndex {
    pub fn from_clusters(clusters: &[VisualCluster]) -> Result<Self> {
        Self::from_entries(
            clusters
                .iter()
                .map(|c| ClusterEntry {
                    visual_id: c.visual_id.clone(),
                    digest: c.key.digest.clone(),
                    members: c.members.clone(),
                })
                .collect(),
        )
    }

    pub fn from_entries(clusters: Vec<ClusterEntry>) -> Result<Self> {
        let mut by_instance = HashMap::new();
        let mut by_visual = HashMap::new();
        for (i, c) in clusters.iter().enumerate() {
            if by_visual.insert(c.visual_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(c.visual_id.clone()));
            }
            for m in &c.members {
                if by_instance.insert(m.clone(), i).is_some() {
                    return Err(Error::DuplicateInstanceId(m.clone()));
                }
            }
        }
        Ok(ClusterIndex {
            clusters,
            by_instance,
            by_visual,
        })
    }

    /// Every instance in a cluster of its own, visual id = instance id.
    pub fn singletons<'a>(instance_ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        Self::from_entries(
            instance_ids
                .into_iter()
                .map(|id| ClusterEntry {
                    visual_id: id.to_string(),
                    digest: String::new(),
                    members: vec![id.to_string()],
                })
                .collect(),
        )
    }

    pub fn visual_id_of(&self, instance_id: &str) -> Result<&str> {
        self.by_instance
            .get(instance_id)
            .map(|&i| self.clusters[i].visual_id.as_str())
            .ok_or_else(|| Error::UnknownInstance(instance_id.to_string()))
    }

    pub fn contains_instance(&self, instance_id: &str) -> bool {
        self.by_instance.contains_key(instance_id)
    }

    pub fn cluster(&self, visual_id: &str) -> Option<&ClusterEntry> {
        self.by_visual.get(visual_id).map(|&i| &self.clusters[i])
    }

    pub fn clusters(&self) -> &[ClusterEntry] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn instance_count(&self) -> usize {
        self.by_instance.len()
    }
}

/// `visual_id \t digest \t instance_id` per member, sorted by visual id then
/// instance id.
pub fn render_cluster_map(index: &ClusterIndex) -> String {
    let mut rows: Vec<(&str, &str, &str)> = index
        .clusters
        .iter()
        .flat_map(|c| {
            c.members
                .iter()
                .map(move |m| (c.visual_id.as_str(), c.digest.as_str(), m.as_str()))
        })
        .collect();
    rows.sort_by(|a, b| (a.0, a.2).cmp(&(b.0, b.2)));
    let mut out = String::new();
    for (v, d, m) in rows {
        let _ = writeln!(out, "{v}\t{d}\t{m}");
    }
    out
}

pub fn write_cluster_map(index: &ClusterIndex, path: &Path) -> Result<()> {
    write_text(path, &render_cluster_map(index))
}

pub fn parse_cluster_map(text: &str, source: &str) -> Result<ClusterIndex> {
    let mut clusters: BTreeMap<String, ClusterEntry> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedLine {
            path: source.to_string(),
            line: n + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [visual, digest, instance] = fields[..] else {
            return Err(malformed("expected `visual_id \\t digest \\t instance_id`"));
        };
        if visual.is_empty() || instance.is_empty() {
            return Err(malformed("empty id"));
        }
        let entry = clusters.entry(visual.to_string()).or_insert_with(|| ClusterEntry {
            visual_id: visual.to_string(),
            digest: digest.to_string(),
            members: Vec::new(),
        });
        if entry.digest != digest {
            return Err(malformed("visual id listed with two digests"));
        }
        entry.members.push(instance.to_string());
    }
    ClusterIndex::from_entries(clusters.into_values().collect())
}

pub fn read_cluster_map(path: &Path) -> Result<ClusterIndex> {
    let text = read_text(path)?;
    parse_cluster_map(&text, &path.display().to_string())
}

/// `visual_id \t kind \t digest \t serialized`, one line per cluster, so two
/// clusterings can be diffed by key.
pub fn render_key_map(clusters: &[VisualCluster]) -> String {
    let mut out = String::new();
    for c in clusters {
        let kind = match c.key.kind {
            crate::formula::KeyKind::Slt => "slt",
            crate::formula::KeyKind::LatexFallback => "latex-fallback",
        };
        let serialized = c
            .key
            .serialized
            .replace('\\', "\\\\")
            .replace('\t', "\\t")
            .replace('\n', "\\n");
        let _ = writeln!(out, "{}\t{kind}\t{}\t{serialized}", c.visual_id, c.key.digest);
    }
    out
}
