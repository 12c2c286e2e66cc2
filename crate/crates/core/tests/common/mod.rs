//! Synthetic collections and direct-definition oracles shared by the
//! integration tests. The `oracle_*` functions are written from the
//! definitions and never call the library's measure or pooling code; the
//! `check_*` harnesses compare the two.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use mfr_core::cluster::{ClusterEntry, ClusterIndex};
use mfr_core::collection::{ItemSpace, QrelRecord, RankedRun, RunEntry};
use mfr_core::judgments::{aggregate_max_visual, GradeScale, JudgmentSet};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Synthetic {
    pub topics: Vec<String>,
    pub instances: Vec<String>,
    pub clusters: ClusterIndex,
    /// instance -> visual id
    pub visual_of: BTreeMap<String, String>,
    /// arqmath grades per instance
    pub arq_instance: JudgmentSet,
    /// arqmath grades per visual id (max over instances)
    pub arq_visual: JudgmentSet,
    /// ntcir-agg grades per instance
    pub ntcir: JudgmentSet,
    pub runs: Vec<RankedRun>,
}

/// A random collection: `n_topics` topics over at most 500 instances in
/// random clusters, random judgments, and `n_runs` random runs. Runs may
/// contain ties in score, unjudged items and empty topics.
pub fn synthetic(rng: &mut ChaCha8Rng, n_topics: usize, n_runs: usize) -> Synthetic {
    let n_items = rng.gen_range(20..=500);
    let n_clusters = rng.gen_range(1..=n_items);
    let instances: Vec<String> = (0..n_items).map(|i| format!("i{i:03}")).collect();
    let mut members: Vec<Vec<String>> = vec![Vec::new(); n_clusters];
    // every cluster gets one member, the rest land anywhere
    for (i, id) in instances.iter().enumerate() {
        let c = if i < n_clusters {
            i
        } else {
            rng.gen_range(0..n_clusters)
        };
        members[c].push(id.clone());
    }
    let entries: Vec<ClusterEntry> = members
        .into_iter()
        .enumerate()
        .map(|(c, m)| ClusterEntry {
            visual_id: format!("V{c:04}"),
            digest: String::new(),
            members: m,
        })
        .collect();
    let visual_of = entries
        .iter()
        .flat_map(|e| e.members.iter().map(move |m| (m.clone(), e.visual_id.clone())))
        .collect();
    let clusters = ClusterIndex::from_entries(entries).unwrap();

    let topics: Vec<String> = (0..n_topics).map(|t| format!("T{t:02}")).collect();
    let mut arq = Vec::new();
    let mut ntc = Vec::new();
    for t in &topics {
        let n_judged = rng.gen_range(1..=n_items.min(60));
        let judged: Vec<&String> = instances.choose_multiple(rng, n_judged).collect();
        // some topics have nothing relevant at all
        let hopeless = rng.gen_bool(0.1);
        for id in judged {
            let g: u8 = if hopeless {
                rng.gen_range(0..=1)
            } else {
                rng.gen_range(0..=3)
            };
            arq.push(QrelRecord::new(t, id, g));
            let n: u8 = if hopeless {
                rng.gen_range(0..=2)
            } else {
                rng.gen_range(0..=4)
            };
            ntc.push(QrelRecord::new(t, id, n));
        }
    }
    let arq_instance = JudgmentSet::new(GradeScale::Arqmath, ItemSpace::Instance, arq).unwrap();
    let arq_visual = aggregate_max_visual(&arq_instance, &clusters).unwrap();
    let ntcir = JudgmentSet::new(GradeScale::NtcirAgg, ItemSpace::Instance, ntc).unwrap();

    let runs = (0..n_runs)
        .map(|r| {
            let mut run = RankedRun::new(&format!("run{r}"));
            for t in &topics {
                if rng.gen_bool(0.05) {
                    continue;
                }
                let len = rng.gen_range(0..=n_items.min(80));
                let picked: Vec<&String> = instances.choose_multiple(rng, len).collect();
                let entries: Vec<RunEntry> = picked
                    .into_iter()
                    .enumerate()
                    .map(|(i, id)| RunEntry {
                        item_id: id.clone(),
                        rank: i as u32 + 1,
                        // coarse scores so ties occur
                        score: (100 - i as i64 / 3) as f64,
                    })
                    .collect();
                run.topics.insert(t.clone(), entries);
            }
            run.canonicalize();
            run
        })
        .collect();

    Synthetic {
        topics,
        instances,
        clusters,
        visual_of,
        arq_instance,
        arq_visual,
        ntcir,
        runs,
    }
}

// ---------------------------------------------------------------- metric oracle

/// Per-topic values of one measure, plus topics left out of the mean.
#[derive(Debug, Default, Clone)]
pub struct OracleMeasure {
    pub per_topic: BTreeMap<String, f64>,
    pub excluded: BTreeSet<String>,
}

impl OracleMeasure {
    pub fn mean(&self) -> Option<f64> {
        if self.per_topic.is_empty() {
            None
        } else {
            Some(self.per_topic.values().sum::<f64>() / self.per_topic.len() as f64)
        }
    }
}

fn o_precision(rels: &[bool], k: usize) -> f64 {
    let mut hits = 0;
    for i in 0..k {
        if i < rels.len() && rels[i] {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

fn o_ap(rels: &[bool], total: usize) -> Option<f64> {
    if total == 0 {
        return None;
    }
    let mut sum = 0.0;
    for r in 0..rels.len() {
        if rels[r] {
            sum += o_precision(&rels[..=r], r + 1);
        }
    }
    Some(sum / total as f64)
}

fn o_rr(rels: &[bool]) -> f64 {
    for (i, &r) in rels.iter().enumerate() {
        if r {
            return 1.0 / (i as f64 + 1.0);
        }
    }
    0.0
}

fn o_dcg(gains: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, g) in gains.iter().enumerate() {
        let rank = (i + 1) as f64;
        s += g / (rank + 1.0).log2();
    }
    s
}

fn o_ndcg(gains: &[f64], pool: &[f64]) -> f64 {
    let mut ideal = pool.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let idcg = o_dcg(&ideal);
    if idcg == 0.0 {
        0.0
    } else {
        o_dcg(gains) / idcg
    }
}

/// Which scoring pipeline the oracle follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleConvention {
    Ntcir,
    /// instance run mapped through the cluster map, deduplicated
    Arqmath,
}

/// Direct-definition evaluation. `measure` uses the same names as the CLI.
pub fn oracle_eval(
    run: &RankedRun,
    qrels: &JudgmentSet,
    visual_of: &BTreeMap<String, String>,
    convention: OracleConvention,
    measure: &str,
) -> OracleMeasure {
    let threshold = qrels.scale().threshold();
    let mut judged: BTreeMap<String, BTreeMap<String, u8>> = BTreeMap::new();
    for r in qrels.records() {
        judged
            .entry(r.topic_id.clone())
            .or_default()
            .insert(r.item_id.clone(), r.grade);
    }
    let mut out = OracleMeasure::default();
    for (topic, grades) in &judged {
        let raw: Vec<String> = run
            .topics
            .get(topic)
            .map(|e| e.iter().map(|x| x.item_id.clone()).collect())
            .unwrap_or_default();
        let mut list: Vec<String> = Vec::new();
        match convention {
            OracleConvention::Ntcir => list = raw,
            OracleConvention::Arqmath => {
                for id in raw {
                    let v = visual_of[&id].clone();
                    if !list.contains(&v) {
                        list.push(v);
                    }
                }
            }
        }
        let prime = measure.contains("prime");
        if prime {
            list.retain(|i| grades.contains_key(i));
            if list.is_empty() {
                out.excluded.insert(topic.clone());
                continue;
            }
        }
        let rels: Vec<bool> = list
            .iter()
            .map(|i| grades.get(i).is_some_and(|&g| g >= threshold))
            .collect();
        let gains: Vec<f64> = list.iter().map(|i| grades.get(i).map_or(0.0, |&g| g as f64)).collect();
        let pool: Vec<f64> = grades.values().map(|&g| g as f64).collect();
        let total = grades.values().filter(|&&g| g >= threshold).count();
        let value = match measure {
            "map" | "map-prime" => o_ap(&rels, total),
            "mrr" => Some(o_rr(&rels)),
            "ndcg" | "ndcg-prime" => Some(o_ndcg(&gains, &pool)),
            "p@hit" => Some(if rels.is_empty() {
                0.0
            } else {
                o_precision(&rels, rels.len())
            }),
            m => {
                let k: usize = m.rsplit('@').next().unwrap().parse().unwrap();
                Some(o_precision(&rels, k))
            }
        };
        match value {
            Some(v) => {
                out.per_topic.insert(topic.clone(), v);
            }
            None => {
                out.excluded.insert(topic.clone());
            }
        }
    }
    out
}

// ---------------------------------------------------------------- pooling oracles

pub type Provenance = BTreeMap<String, BTreeSet<(String, u32)>>;

fn lists(runs: &[RankedRun], topic: &str) -> Vec<(String, Vec<String>)> {
    runs.iter()
        .map(|r| {
            let items = r
                .topics
                .get(topic)
                .map(|e| e.iter().map(|x| x.item_id.clone()).collect())
                .unwrap_or_default();
            (r.run_tag.clone(), items)
        })
        .collect()
}

fn take_prefixes(lists: &[(String, Vec<String>)], cuts: &[usize]) -> Provenance {
    let mut out: Provenance = BTreeMap::new();
    for ((tag, items), &cut) in lists.iter().zip(cuts) {
        for (i, id) in items.iter().take(cut).enumerate() {
            out.entry(id.clone()).or_default().insert((tag.clone(), i as u32 + 1));
        }
    }
    out
}

/// Simulate the round-robin walk one item at a time, stopping only at the
/// end of a round.
pub fn oracle_round_robin(runs: &[RankedRun], topic: &str, min_unique: usize) -> Provenance {
    let ls = lists(runs, topic);
    let mut seen: HashSet<String> = HashSet::new();
    let mut round = 0usize;
    loop {
        let any_left = ls.iter().any(|(_, l)| l.len() > round);
        if !any_left || seen.len() >= min_unique {
            break;
        }
        for (_, l) in &ls {
            if let Some(id) = l.get(round) {
                seen.insert(id.clone());
            }
        }
        round += 1;
    }
    take_prefixes(&ls, &vec![round; ls.len()])
}

pub fn oracle_top_k(runs: &[RankedRun], topic: &str, k: usize) -> Provenance {
    let ls = lists(runs, topic);
    take_prefixes(&ls, &vec![k; ls.len()])
}

/// Cut each run at the position where its d-th new visual id shows up.
pub fn oracle_visual(
    runs: &[RankedRun],
    topic: &str,
    visual_of: &BTreeMap<String, String>,
    primary_depth: usize,
    other_depth: usize,
    primary: &BTreeSet<String>,
) -> Provenance {
    let ls = lists(runs, topic);
    let cuts: Vec<usize> = ls
        .iter()
        .map(|(tag, items)| {
            let d = if primary.contains(tag) {
                primary_depth
            } else {
                other_depth
            };
            let mut new_at = Vec::new();
            let mut seen = Vec::new();
            for (pos, id) in items.iter().enumerate() {
                let v = &visual_of[id];
                if !seen.contains(v) {
                    seen.push(v.clone());
                    new_at.push(pos);
                }
            }
            if d == 0 {
                0
            } else if new_at.len() >= d {
                new_at[d - 1] + 1
            } else {
                items.len()
            }
        })
        .collect();
    take_prefixes(&ls, &cuts)
}

pub fn provenance_of(pool: &mfr_core::pool::Pool) -> Provenance {
    pool.items
        .iter()
        .map(|i| (i.item_id.clone(), i.provenance.clone()))
        .collect()
}

/// Random runs over a small item vocabulary so overlap is common.
pub fn random_runs(rng: &mut ChaCha8Rng, vocab: &[String], n_runs: usize, topics: &[&str]) -> Vec<RankedRun> {
    (0..n_runs)
        .map(|r| {
            let lists: Vec<(&str, Vec<&str>)> = topics
                .iter()
                .map(|&t| {
                    let len = rng.gen_range(0..=vocab.len());
                    let items: Vec<&str> = vocab.choose_multiple(rng, len).map(String::as_str).collect();
                    (t, items)
                })
                .collect();
            RankedRun::from_lists(&format!("r{r}"), lists)
        })
        .collect()
}

// ---------------------------------------------------------------- harnesses

use mfr_core::metrics::{evaluate_run, EvalOptions, Measure};
use mfr_core::pool::{pool_round_robin_min_unique, pool_top_k, pool_visually_distinct};

pub const ORACLE_MEASURES: [&str; 10] = [
    "ndcg-prime",
    "map-prime",
    "p-prime@10",
    "p@5",
    "p@10",
    "p@hit",
    "map",
    "mrr",
    "ndcg",
    "p-prime@5",
];

fn compare_one(label: &str, got: &mfr_core::metrics::MeasureResult, want: &OracleMeasure) -> Result<(), String> {
    let got_ex: BTreeSet<String> = got.excluded.keys().cloned().collect();
    if got_ex != want.excluded {
        return Err(format!("{label}: excluded {got_ex:?} vs oracle {:?}", want.excluded));
    }
    if got.per_topic.len() != want.per_topic.len() {
        return Err(format!("{label}: topic count differs"));
    }
    for (t, v) in &want.per_topic {
        let g = got.per_topic.get(t).copied().unwrap_or(f64::NAN);
        if g.is_nan() || (g - v).abs() > 1e-9 {
            return Err(format!("{label} topic {t}: {g} vs oracle {v}"));
        }
        if !(0.0..=1.0).contains(&g) {
            return Err(format!("{label} topic {t}: {g} outside [0,1]"));
        }
    }
    match (got.mean, want.mean()) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if (a - b).abs() <= 1e-9 => Ok(()),
        (a, b) => Err(format!("{label}: mean {a:?} vs oracle {b:?}")),
    }
}

/// Evaluate every run of `n` synthetic collections under both conventions
/// and compare against the oracle. Returns the number of comparisons.
pub fn check_metric_oracle(seed: u64, n: usize, n_topics: usize) -> Result<usize, String> {
    let measures: Vec<Measure> = ORACLE_MEASURES.iter().map(|m| m.parse().unwrap()).collect();
    let mut compared = 0;
    for c in 0..n {
        let mut r = rng(seed + c as u64);
        let s = synthetic(&mut r, n_topics, 3);
        let setups = [
            (
                "ntcir-agg/instance",
                &s.ntcir,
                EvalOptions::ntcir(),
                OracleConvention::Ntcir,
            ),
            (
                "arqmath/instance",
                &s.arq_instance,
                EvalOptions::ntcir(),
                OracleConvention::Ntcir,
            ),
            (
                "arqmath/visual",
                &s.arq_visual,
                EvalOptions::arqmath(),
                OracleConvention::Arqmath,
            ),
        ];
        for run in &s.runs {
            for (name, qrels, opts, conv) in &setups {
                let res = evaluate_run(run, qrels, &measures, Some(&s.clusters), *opts)
                    .map_err(|e| format!("collection {c} {name}: {e}"))?;
                for (m, mname) in measures.iter().zip(ORACLE_MEASURES) {
                    let want = oracle_eval(run, qrels, &s.visual_of, *conv, mname);
                    let label = format!("collection {c} {} {name} {mname}", run.run_tag);
                    compare_one(&label, res.get(*m).unwrap(), &want)?;
                    compared += 1;
                }
            }
        }
    }
    Ok(compared)
}

/// Run all three pooling procedures on random run sets and compare with the
/// oracles. Returns the number of cases.
pub fn check_pooling_oracle(seed: u64, cases: usize) -> Result<usize, String> {
    for case in 0..cases {
        let mut r = rng(seed + case as u64);
        let vocab_size = r.gen_range(1..=60);
        let vocab: Vec<String> = (0..vocab_size).map(|i| format!("f{i:02}")).collect();
        let n_clusters = r.gen_range(1..=vocab_size);
        let visual_of: BTreeMap<String, String> = vocab
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let c = if i < n_clusters { i } else { r.gen_range(0..n_clusters) };
                (id.clone(), format!("V{c:03}"))
            })
            .collect();
        let mut by_cluster: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (id, v) in &visual_of {
            by_cluster.entry(v.clone()).or_default().push(id.clone());
        }
        let index = ClusterIndex::from_entries(
            by_cluster
                .into_iter()
                .map(|(v, m)| ClusterEntry {
                    visual_id: v,
                    digest: String::new(),
                    members: m,
                })
                .collect(),
        )
        .unwrap();
        let topics = ["a", "b", "c"];
        let n_runs = r.gen_range(1..=8);
        let runs = random_runs(&mut r, &vocab, n_runs, &topics);
        let min_unique = r.gen_range(1..=80);
        let k = r.gen_range(1..=25);
        let (pd, od) = (r.gen_range(1..=25), r.gen_range(1..=12));
        let primary: BTreeSet<String> = runs
            .iter()
            .filter(|_| r.gen_bool(0.4))
            .map(|run| run.run_tag.clone())
            .collect();

        let rr = pool_round_robin_min_unique(&runs, min_unique).map_err(|e| e.to_string())?;
        let tk = pool_top_k(&runs, k).map_err(|e| e.to_string())?;
        let vd = pool_visually_distinct(&runs, &index, pd, od, &primary).map_err(|e| e.to_string())?;
        let present: BTreeSet<&str> = runs.iter().flat_map(|r| r.topic_ids()).collect();
        for (name, pools) in [("round-robin", &rr), ("top-k", &tk), ("visually-distinct", &vd)] {
            let got_topics: BTreeSet<&str> = pools.iter().map(|p| p.topic_id.as_str()).collect();
            if got_topics != present {
                return Err(format!("case {case} {name}: topics {got_topics:?} vs {present:?}"));
            }
            for pool in pools.iter() {
                let want = match name {
                    "round-robin" => oracle_round_robin(&runs, &pool.topic_id, min_unique),
                    "top-k" => oracle_top_k(&runs, &pool.topic_id, k),
                    _ => oracle_visual(&runs, &pool.topic_id, &visual_of, pd, od, &primary),
                };
                let got = provenance_of(pool);
                if got.len() != pool.items.len() {
                    return Err(format!("case {case} {name}: duplicate pool items"));
                }
                if got != want {
                    return Err(format!(
                        "case {case} {name} topic {}: pool differs from oracle ({} vs {} items)",
                        pool.topic_id,
                        got.len(),
                        want.len()
                    ));
                }
            }
        }
    }
    Ok(cases)
}

use mfr_core::judgments::cohen_kappa;
use mfr_core::meta::{count_swaps, kendall_tau_b};
use mfr_core::metrics::{average_precision, dedup_first, ndcg, precision_at_k, prime_filter, reciprocal_rank};

fn ensure(cond: bool, case: usize, what: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(format!("case {case}: {what}"))
    }
}

fn labelled(grades: &[u8]) -> JudgmentSet {
    let records = grades
        .iter()
        .enumerate()
        .map(|(i, &g)| QrelRecord::new("t", &format!("x{i}"), g))
        .collect();
    JudgmentSet::new(GradeScale::Ntcir3, ItemSpace::Instance, records).unwrap()
}

fn distinct_values(r: &mut ChaCha8Rng, n: usize) -> Vec<(String, f64)> {
    let mut vals: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    vals.shuffle(r);
    vals.into_iter()
        .enumerate()
        .map(|(i, v)| (format!("s{i}"), v))
        .collect()
}

/// The measure and meta-analysis invariants over `cases` random inputs.
pub fn check_invariants(seed: u64, cases: usize) -> Result<usize, String> {
    let eps = 1e-12;
    for case in 0..cases {
        let mut r = rng(seed + case as u64);
        let threshold = 2u8;

        // promotion never hurts
        let len = r.gen_range(2..30);
        let grades: Vec<u8> = (0..len).map(|_| r.gen_range(0..=3)).collect();
        let extra: Vec<u8> = (0..r.gen_range(0..10)).map(|_| r.gen_range(0..=3)).collect();
        let pool: Vec<f64> = grades.iter().chain(&extra).map(|&g| g as f64).collect();
        let total = grades.iter().chain(&extra).filter(|&&g| g >= threshold).count();
        let score = |g: &[u8]| {
            let rel: Vec<bool> = g.iter().map(|&x| x >= threshold).collect();
            let gains: Vec<f64> = g.iter().map(|&x| x as f64).collect();
            let ps: Vec<f64> = (1..=g.len() + 1).map(|k| precision_at_k(&rel, k)).collect();
            (
                average_precision(&rel, total).ok(),
                reciprocal_rank(&rel),
                ndcg(&gains, &pool, None),
                ps,
            )
        };
        if let Some(i) = (0..len - 1).find(|&i| grades[i + 1] >= threshold && grades[i + 1] >= grades[i]) {
            let mut promoted = grades.clone();
            promoted.swap(i, i + 1);
            let (ap0, rr0, nd0, p0) = score(&grades);
            let (ap1, rr1, nd1, p1) = score(&promoted);
            ensure(
                ap1.unwrap_or(0.0) + eps >= ap0.unwrap_or(0.0),
                case,
                "promotion lowered AP",
            )?;
            ensure(rr1 + eps >= rr0, case, "promotion lowered RR")?;
            ensure(nd1 + eps >= nd0, case, "promotion lowered nDCG")?;
            ensure(
                p1.iter().zip(&p0).all(|(a, b)| a + eps >= *b),
                case,
                "promotion lowered P@k",
            )?;
        }

        // appending non-relevant items
        let mut longer = grades.clone();
        longer.extend(std::iter::repeat_n(0, r.gen_range(1..5)));
        let (ap0, _, nd0, _) = score(&grades);
        let (ap1, _, nd1, _) = score(&longer);
        ensure(ap0 == ap1, case, "appending non-relevant changed AP")?;
        ensure(nd1 <= nd0 + eps, case, "appending non-relevant raised nDCG")?;

        // ideal ordering
        let mut ideal = pool.clone();
        ideal.sort_by(|a, b| b.total_cmp(a));
        if ideal.iter().any(|&g| g > 0.0) {
            ensure(
                (ndcg(&ideal, &pool, None) - 1.0).abs() < eps,
                case,
                "ideal ordering nDCG != 1",
            )?;
        }

        // prime filter and dedup are idempotent
        let ids: Vec<String> = (0..len).map(|_| format!("d{}", r.gen_range(0..20))).collect();
        let judged: BTreeSet<String> = (0..r.gen_range(0..20)).map(|i| format!("d{i}")).collect();
        let once = prime_filter(&ids, |i| judged.contains(i));
        ensure(
            prime_filter(&once, |i| judged.contains(i)) == once,
            case,
            "prime filter not idempotent",
        )?;
        let dd = dedup_first(ids.clone());
        ensure(dedup_first(dd.clone()) == dd, case, "dedup not idempotent")?;
        ensure(
            dd.iter().collect::<HashSet<_>>().len() == dd.len(),
            case,
            "dedup left repeats",
        )?;

        // kappa symmetry, identity, relabelling
        let n = r.gen_range(1..40);
        let a: Vec<u8> = (0..n).map(|_| r.gen_range(0..=2)).collect();
        let b: Vec<u8> = (0..n).map(|_| r.gen_range(0..=2)).collect();
        let (sa, sb) = (labelled(&a), labelled(&b));
        let kab = cohen_kappa(&sa, &sb).map_err(|e| e.to_string())?;
        let kba = cohen_kappa(&sb, &sa).map_err(|e| e.to_string())?;
        ensure((kab - kba).abs() < eps, case, "kappa not symmetric")?;
        ensure(
            cohen_kappa(&sa, &sa).map_err(|e| e.to_string())? == 1.0,
            case,
            "kappa(a,a) != 1",
        )?;
        let mut perm = [0u8, 1, 2];
        perm.shuffle(&mut r);
        let ra: Vec<u8> = a.iter().map(|&g| perm[g as usize]).collect();
        let rb: Vec<u8> = b.iter().map(|&g| perm[g as usize]).collect();
        let krel = cohen_kappa(&labelled(&ra), &labelled(&rb)).map_err(|e| e.to_string())?;
        ensure((krel - kab).abs() < 1e-9, case, "kappa changed under relabelling")?;
        ensure((-1.0..=1.0).contains(&kab), case, "kappa outside [-1,1]")?;

        // tau-b identity, reversal, symmetry; swaps against tau on tie-free data
        let m = r.gen_range(2..15);
        let x = distinct_values(&mut r, m);
        let rev: Vec<(String, f64)> = x.iter().map(|(s, v)| (s.clone(), -v)).collect();
        let tau = |p: &[(String, f64)], q: &[(String, f64)]| kendall_tau_b(p, q).map_err(|e| e.to_string());
        ensure(tau(&x, &x)? == 1.0, case, "tau(x,x) != 1")?;
        ensure(tau(&x, &rev)? == -1.0, case, "tau(x,rev x) != -1")?;
        let mut y = x.clone();
        let mut yv: Vec<f64> = y.iter().map(|p| p.1).collect();
        yv.shuffle(&mut r);
        for (p, v) in y.iter_mut().zip(yv) {
            p.1 = v;
        }
        let t = tau(&x, &y)?;
        ensure((t - tau(&y, &x)?).abs() < eps, case, "tau not symmetric")?;
        let swaps = count_swaps(&x, &y).map_err(|e| e.to_string())?;
        ensure(
            swaps == count_swaps(&y, &x).map_err(|e| e.to_string())?,
            case,
            "swaps not symmetric",
        )?;
        let pairs = (m * (m - 1) / 2) as u64;
        ensure(swaps <= pairs, case, "swaps above n(n-1)/2")?;
        let from_swaps = 1.0 - 4.0 * swaps as f64 / (m * (m - 1)) as f64;
        ensure((t - from_swaps).abs() < 1e-9, case, "tau disagrees with swap count")?;
    }
    Ok(cases)
}
