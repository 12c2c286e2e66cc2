//! Judgment pools built from submitted runs.
//!
//! Every procedure picks a cut rank per run and then walks the runs
//! rank-major (rank 1 of every run, then rank 2, ...) up to those cuts, so
//! pool order is first-seen order of that walk.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterIndex;
use crate::collection::{read_text, write_text, RankedRun};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    pub item_id: String,
    /// (run_tag, rank) of every run position that contributed the item.
    pub provenance: BTreeSet<(String, u32)>,
}

impl PoolItem {
    pub fn run_count(&self) -> usize {
        self.provenance.iter().map(|(r, _)| r).collect::<HashSet<_>>().len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub topic_id: String,
    pub items: Vec<PoolItem>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item_ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.item_id.as_str()).collect()
    }
}

fn topics_of(runs: &[RankedRun]) -> Vec<&str> {
    runs.iter()
        .flat_map(|r| r.topic_ids())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Rank-major walk of `runs` for one topic, taking ranks `1..=cuts[i]` of run i.
fn walk(topic: &str, runs: &[RankedRun], cuts: &[usize]) -> Pool {
    let lists: Vec<Vec<&str>> = runs.iter().map(|r| r.items(topic)).collect();
    let depth = lists.iter().zip(cuts).map(|(l, &c)| l.len().min(c)).max().unwrap_or(0);
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut items: Vec<PoolItem> = Vec::new();
    for rank in 0..depth {
        for ((run, list), &cut) in runs.iter().zip(&lists).zip(cuts) {
            if rank >= cut || rank >= list.len() {
                continue;
            }
            let id = list[rank];
            let i = *slot.entry(id).or_insert_with(|| {
                items.push(PoolItem {
                    item_id: id.to_string(),
                    provenance: BTreeSet::new(),
                });
                items.len() - 1
            });
            items[i].provenance.insert((run.run_tag.clone(), rank as u32 + 1));
        }
    }
    Pool {
        topic_id: topic.to_string(),
        items,
    }
}

fn per_topic(runs: &[RankedRun], f: impl Fn(&str) -> Result<Pool> + Sync + Send) -> Result<Vec<Pool>> {
    if runs.is_empty() {
        return Err(Error::EmptyRuns);
    }
    topics_of(runs).into_par_iter().map(f).collect()
}

/// Whole rounds across all runs until at least `min_unique` distinct items
/// are pooled or every run is exhausted. The completing round is kept whole.
pub fn pool_round_robin_min_unique(runs: &[RankedRun], min_unique: usize) -> Result<Vec<Pool>> {
    per_topic(runs, |topic| {
        let lists: Vec<Vec<&str>> = runs.iter().map(|r| r.items(topic)).collect();
        let longest = lists.iter().map(Vec::len).max().unwrap_or(0);
        let mut seen = HashSet::new();
        let mut rounds = 0;
        while rounds < longest && seen.len() < min_unique {
            for list in &lists {
                if let Some(id) = list.get(rounds) {
                    seen.insert(*id);
                }
            }
            rounds += 1;
        }
        Ok(walk(topic, runs, &vec![rounds; runs.len()]))
    })
}

/// Union of every run's top `k`.
pub fn pool_top_k(runs: &[RankedRun], k: usize) -> Result<Vec<Pool>> {
    per_topic(runs, |topic| Ok(walk(topic, runs, &vec![k; runs.len()])))
}

/// Number of leading entries of `ranked` needed to cover `depth` distinct
/// visual ids (the whole list if it has fewer).
pub fn visual_cut(ranked: &[&str], index: &ClusterIndex, depth: usize) -> Result<usize> {
    let mut distinct = HashSet::new();
    for (i, id) in ranked.iter().enumerate() {
        if distinct.len() >= depth {
            return Ok(i);
        }
        distinct.insert(index.visual_id_of(id)?);
    }
    Ok(ranked.len())
}

/// Each run is cut right after the first instance of its `d`-th distinct
/// visual id; `d` is `primary_depth` for runs tagged in `primary_tags`,
/// `other_depth` otherwise. Duplicates above the cut are pooled.
pub fn pool_visually_distinct(
    runs: &[RankedRun],
    index: &ClusterIndex,
    primary_depth: usize,
    other_depth: usize,
    primary_tags: &BTreeSet<String>,
) -> Result<Vec<Pool>> {
    per_topic(runs, |topic| {
        let cuts = runs
            .iter()
            .map(|r| {
                let d = if primary_tags.contains(&r.run_tag) {
                    primary_depth
                } else {
                    other_depth
                };
                visual_cut(&r.items(topic), index, d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(walk(topic, runs, &cuts))
    })
}

// ---------------------------------------------------------------- per-cluster caps

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "strategy")]
pub enum Selection {
    /// Number of distinct runs that returned the instance.
    Frequency,
    /// Sum over runs of 1 / (k + rank).
    Rrf { k: f64 },
}

impl Selection {
    pub const DEFAULT_RRF_K: f64 = 60.0;

    pub fn score(self, provenance: &BTreeSet<(String, u32)>) -> f64 {
        match self {
            Selection::Frequency => provenance.iter().map(|(r, _)| r).collect::<HashSet<_>>().len() as f64,
            Selection::Rrf { k } => provenance.iter().map(|(_, rank)| 1.0 / (k + *rank as f64)).sum(),
        }
    }
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "frequency" => Ok(Selection::Frequency),
            "rrf" => Ok(Selection::Rrf {
                k: Selection::DEFAULT_RRF_K,
            }),
            other => Err(format!(
                "unknown selection strategy `{other}` (expected frequency or rrf)"
            )),
        }
    }
}

/// Up to `cap` instances of one cluster, best score first, ties by id.
pub fn select_instances(cluster_items: &[&PoolItem], cap: usize, strategy: Selection) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = cluster_items
        .iter()
        .map(|i| (strategy.score(&i.provenance), i.item_id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored
        .into_iter()
        .take(cap.max(1))
        .map(|(_, id)| id.to_string())
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapReport {
    pub clusters: usize,
    pub clusters_over_cap: usize,
    pub instances_pooled: usize,
    pub instances_selected: usize,
}

impl CapReport {
    pub fn over_cap_fraction(&self) -> f64 {
        if self.clusters == 0 {
            0.0
        } else {
            self.clusters_over_cap as f64 / self.clusters as f64
        }
    }
}

/// Apply the per-cluster cap to every pool. Kept items stay in pool order.
pub fn cap_pools(
    pools: &[Pool],
    index: &ClusterIndex,
    cap: usize,
    strategy: Selection,
) -> Result<(Vec<Pool>, CapReport)> {
    let mut report = CapReport::default();
    let mut out = Vec::with_capacity(pools.len());
    for pool in pools {
        let mut by_cluster: BTreeMap<&str, Vec<&PoolItem>> = BTreeMap::new();
        for item in &pool.items {
            by_cluster
                .entry(index.visual_id_of(&item.item_id)?)
                .or_default()
                .push(item);
        }
        let mut keep = HashSet::new();
        for members in by_cluster.values() {
            report.clusters += 1;
            if members.len() > cap {
                report.clusters_over_cap += 1;
            }
            keep.extend(select_instances(members, cap, strategy));
        }
        report.instances_pooled += pool.items.len();
        report.instances_selected += keep.len();
        out.push(Pool {
            topic_id: pool.topic_id.clone(),
            items: pool
                .items
                .iter()
                .filter(|i| keep.contains(&i.item_id))
                .cloned()
                .collect(),
        });
    }
    Ok((out, report))
}

// ---------------------------------------------------------------- pool file

/// `topic_id \t item_id \t run:rank,run:rank`
pub fn render_pools(pools: &[Pool]) -> String {
    let mut out = String::new();
    for pool in pools {
        for item in &pool.items {
            let prov: Vec<String> = item.provenance.iter().map(|(r, k)| format!("{r}:{k}")).collect();
            let _ = writeln!(out, "{}\t{}\t{}", pool.topic_id, item.item_id, prov.join(","));
        }
    }
    out
}

pub fn write_pools(pools: &[Pool], path: &Path) -> Result<()> {
    write_text(path, &render_pools(pools))
}

pub fn parse_pools(text: &str, source: &str) -> Result<Vec<Pool>> {
    let mut pools: Vec<Pool> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| Error::MalformedLine {
            path: source.to_string(),
            line: n + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [topic, item, prov] = fields[..] else {
            return Err(malformed("expected `topic_id \\t item_id \\t provenance`".into()));
        };
        let mut provenance = BTreeSet::new();
        for p in prov.split(',').filter(|p| !p.is_empty()) {
            let parsed = p
                .rsplit_once(':')
                .and_then(|(r, k)| Some((r.to_string(), k.parse::<u32>().ok().filter(|&k| k > 0)?)));
            provenance.insert(parsed.ok_or_else(|| malformed(format!("bad provenance entry `{p}`")))?);
        }
        if provenance.is_empty() {
            return Err(malformed("empty provenance".into()));
        }
        if !seen.insert((topic.to_string(), item.to_string())) {
            return Err(Error::DuplicateId(format!("{topic}/{item}")));
        }
        let i = *slot.entry(topic.to_string()).or_insert_with(|| {
            pools.push(Pool {
                topic_id: topic.to_string(),
                items: Vec::new(),
            });
            pools.len() - 1
        });
        pools[i].items.push(PoolItem {
            item_id: item.to_string(),
            provenance,
        });
    }
    Ok(pools)
}

pub fn read_pools(path: &Path) -> Result<Vec<Pool>> {
    parse_pools(&read_text(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(tag: &str, items: &[&str]) -> RankedRun {
        RankedRun::from_lists(tag, [("1", items.to_vec())])
    }

    #[test]
    fn empty_runs_rejected() {
        assert!(matches!(pool_top_k(&[], 20), Err(Error::EmptyRuns)));
    }

    #[test]
    fn round_robin_keeps_completing_round() {
        let runs = [run("a", &["x", "y", "z"]), run("b", &["p", "q", "r"])];
        // 2 after round 1, 4 after round 2
        let pools = pool_round_robin_min_unique(&runs, 3).unwrap();
        assert_eq!(pools[0].item_ids(), ["x", "p", "y", "q"]);
    }

    #[test]
    fn round_robin_exhaustion() {
        let items: Vec<String> = (0..50).map(|i| format!("f{i}")).collect();
        let refs: Vec<&str> = items.iter().map(String::as_str).collect();
        let pools = pool_round_robin_min_unique(&[run("a", &refs)], 100).unwrap();
        assert_eq!(pools[0].len(), 50);
    }

    #[test]
    fn top_k_union_and_provenance() {
        let runs = [run("a", &["x", "y", "z"]), run("b", &["y", "w"])];
        let pools = pool_top_k(&runs, 2).unwrap();
        assert_eq!(pools[0].item_ids(), ["x", "y", "w"]);
        let y = &pools[0].items[1];
        assert_eq!(
            y.provenance,
            BTreeSet::from([("a".to_string(), 2), ("b".to_string(), 1)])
        );
        assert_eq!(y.run_count(), 2);
    }

    #[test]
    fn visual_depth_includes_duplicates_above_cut() {
        let index = ClusterIndex::from_entries(
            ["a", "b", "c"]
                .iter()
                .map(|l| crate::cluster::ClusterEntry {
                    visual_id: l.to_string(),
                    digest: String::new(),
                    members: (1..=3).map(|i| format!("{l}{i}")).collect(),
                })
                .collect(),
        )
        .unwrap();
        let runs = [
            run("p", &["a1", "a2", "b1", "a3", "c1", "b2"]),
            run("o", &["c2", "c3", "a1"]),
        ];
        assert_eq!(visual_cut(&runs[0].items("1"), &index, 2).unwrap(), 3);
        let pools = pool_visually_distinct(&runs, &index, 2, 1, &BTreeSet::from(["p".to_string()])).unwrap();
        assert_eq!(pools[0].item_ids(), ["a1", "c2", "a2", "b1"]);
        assert!(matches!(
            pool_visually_distinct(&[run("p", &["zz"])], &index, 2, 1, &BTreeSet::new()),
            Err(Error::UnknownInstance(_))
        ));
    }

    fn item(id: &str, prov: &[(&str, u32)]) -> PoolItem {
        PoolItem {
            item_id: id.to_string(),
            provenance: prov.iter().map(|&(r, k)| (r.to_string(), k)).collect(),
        }
    }

    #[test]
    fn rrf_scores() {
        let two = item("m", &[("a", 1), ("b", 1)]);
        let one = item("n", &[("c", 1)]);
        let rrf = Selection::Rrf { k: 60.0 };
        assert!((rrf.score(&two.provenance) - 2.0 / 61.0).abs() < 1e-12);
        assert!((rrf.score(&one.provenance) - 1.0 / 61.0).abs() < 1e-12);
        assert_eq!(select_instances(&[&one, &two], 1, rrf), ["m"]);
    }

    #[test]
    fn frequency_cap_and_ties() {
        let items: Vec<PoolItem> = (0..7)
            .map(|i| {
                let prov: Vec<(String, u32)> = (0..i % 4).map(|r| (format!("r{r}"), 1)).collect();
                PoolItem {
                    item_id: format!("i{i}"),
                    provenance: prov.into_iter().collect(),
                }
            })
            .collect();
        let refs: Vec<&PoolItem> = items.iter().collect();
        // counts: i0=0 i1=1 i2=2 i3=3 i4=0 i5=1 i6=2
        assert_eq!(
            select_instances(&refs, 5, Selection::Frequency),
            ["i3", "i2", "i6", "i1", "i5"]
        );
        assert_eq!(select_instances(&refs[..3], 5, Selection::Frequency).len(), 3);
    }

    #[test]
    fn pool_file_round_trip() {
        let runs = [run("a", &["x", "y"]), run("b:2", &["y"])];
        let pools = pool_top_k(&runs, 2).unwrap();
        let text = render_pools(&pools);
        assert_eq!(text, "1\tx\ta:1\n1\ty\ta:2,b:2:1\n");
        assert_eq!(parse_pools(&text, "p").unwrap(), pools);
    }
}
