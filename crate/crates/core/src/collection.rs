//! Text formats for corpora, topics, runs and qrels.
//!
//! All files are UTF-8 with `#` comment lines; writers emit LF endings.
//!
//! | file    | line format                                  |
//! |---------|----------------------------------------------|
//! | corpus  | `instance_id \t doc_id \t latex`             |
//! | topics  | `topic_id \t complexity \t latex [\t doc_id]`|
//! | run     | `topic Q0 item rank score tag`               |
//! | qrels   | `topic 0 item grade [assessor]`              |
//!
//! Qrels files start with `#scale=<name>` and optionally `#space=visual`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::FormulaInstance;
use crate::error::{Error, Result};
use crate::judgments::{GradeScale, JudgmentSet};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn malformed(source: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: source.to_string(),
        line,
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------- corpus

pub fn parse_corpus(text: &str, source: &str) -> Result<Vec<FormulaInstance>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, doc, latex] = fields[..] else {
            return Err(malformed(
                source,
                n,
                "expected `instance_id \\t doc_id \\t latex` (tabs are not allowed in LaTeX)",
            ));
        };
        if id.is_empty() || doc.is_empty() {
            return Err(malformed(source, n, "empty id"));
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        out.push(FormulaInstance::new(id, doc, latex));
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<FormulaInstance>> {
    parse_corpus(&read_text(path)?, &path.display().to_string())
}

pub fn render_corpus(instances: &[FormulaInstance]) -> String {
    let mut out = String::new();
    for i in instances {
        let _ = writeln!(out, "{}\t{}\t{}", i.instance_id, i.doc_id, i.latex);
    }
    out
}

pub fn write_corpus(instances: &[FormulaInstance], path: &Path) -> Result<()> {
    write_text(path, &render_corpus(instances))
}

// ---------------------------------------------------------------- topics

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Complexity {
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "M")]
    Medium,
    #[serde(rename = "H")]
    High,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Complexity {
    pub const STRATA: [Complexity; 3] = [Complexity::Low, Complexity::Medium, Complexity::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Complexity::Low => "L",
            Complexity::Medium => "M",
            Complexity::High => "H",
            Complexity::Unknown => "unknown",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Complexity::Low => "Low",
            Complexity::Medium => "Medium",
            Complexity::High => "High",
            Complexity::Unknown => "Unknown",
        }
    }
}

impl FromStr for Complexity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "L" => Ok(Complexity::Low),
            "M" => Ok(Complexity::Medium),
            "H" => Ok(Complexity::High),
            "unknown" => Ok(Complexity::Unknown),
            other => Err(format!("unknown complexity `{other}` (expected L, M, H or unknown)")),
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub query_latex: String,
    pub complexity: Complexity,
    pub context_doc_id: Option<String>,
}

pub fn parse_topics(text: &str, source: &str) -> Result<Vec<Topic>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (n, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let (id, complexity, latex, context) = match fields[..] {
            [id, c, latex] => (id, c, latex, None),
            [id, c, latex, doc] => (id, c, latex, Some(doc.to_string()).filter(|d| !d.is_empty())),
            _ => {
                return Err(malformed(
                    source,
                    n,
                    "expected `topic_id \\t complexity \\t latex [\\t context_doc_id]`",
                ))
            }
        };
        if id.is_empty() {
            return Err(malformed(source, n, "empty topic id"));
        }
        let complexity = complexity.parse().map_err(|e: String| malformed(source, n, e))?;
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        out.push(Topic {
            topic_id: id.to_string(),
            query_latex: latex.to_string(),
            complexity,
            context_doc_id: context,
        });
    }
    Ok(out)
}

pub fn read_topics(path: &Path) -> Result<Vec<Topic>> {
    parse_topics(&read_text(path)?, &path.display().to_string())
}

pub fn render_topics(topics: &[Topic]) -> String {
    let mut out = String::new();
    for t in topics {
        let _ = write!(out, "{}\t{}\t{}", t.topic_id, t.complexity, t.query_latex);
        if let Some(doc) = &t.context_doc_id {
            let _ = write!(out, "\t{doc}");
        }
        out.push('\n');
    }
    out
}

pub fn write_topics(topics: &[Topic], path: &Path) -> Result<()> {
    write_text(path, &render_topics(topics))
}

// ---------------------------------------------------------------- runs

/// Namespace of the item column in runs and qrels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemSpace {
    #[default]
    Instance,
    Visual,
}

impl FromStr for ItemSpace {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "instance" => Ok(ItemSpace::Instance),
            "visual" => Ok(ItemSpace::Visual),
            other => Err(format!("unknown item space `{other}` (expected instance or visual)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub item_id: String,
    pub rank: u32,
    pub score: f64,
}

/// A system's ranked results, per topic, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRun {
    pub run_tag: String,
    pub topics: BTreeMap<String, Vec<RunEntry>>,
}

impl RankedRun {
    pub fn new(run_tag: &str) -> Self {
        RankedRun {
            run_tag: run_tag.to_string(),
            topics: BTreeMap::new(),
        }
    }

    /// Build a run from already-ordered item lists; scores descend with rank.
    pub fn from_lists<'a, I, T>(run_tag: &str, lists: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, T)>,
        T: IntoIterator<Item = &'a str>,
    {
        let mut run = RankedRun::new(run_tag);
        for (topic, items) in lists {
            let entries: Vec<RunEntry> = items
                .into_iter()
                .enumerate()
                .map(|(i, item)| RunEntry {
                    item_id: item.to_string(),
                    rank: i as u32 + 1,
                    score: -(i as f64),
                })
                .collect();
            run.topics.insert(topic.to_string(), entries);
        }
        run
    }

    /// Sort each topic by score descending, ties by item id descending,
    /// then renumber ranks from 1.
    pub fn canonicalize(&mut self) {
        for entries in self.topics.values_mut() {
            entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| b.item_id.cmp(&a.item_id)));
            for (i, e) in entries.iter_mut().enumerate() {
                e.rank = i as u32 + 1;
            }
        }
    }

    pub fn entries(&self, topic: &str) -> &[RunEntry] {
        self.topics.get(topic).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Item ids of a topic in rank order.
    pub fn items(&self, topic: &str) -> Vec<&str> {
        self.entries(topic).iter().map(|e| e.item_id.as_str()).collect()
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }
}

pub fn parse_run(text: &str, source: &str) -> Result<RankedRun> {
    let mut tag: Option<String> = None;
    let mut topics: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (n, line) in data_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [topic, _q0, item, rank, score, run_tag] = fields[..] else {
            return Err(malformed(
                source,
                n,
                format!(
                    "expected 6 columns `topic Q0 item rank score tag`, found {}",
                    fields.len()
                ),
            ));
        };
        let rank: u32 = rank
            .parse()
            .ok()
            .filter(|&r| r > 0)
            .ok_or_else(|| malformed(source, n, format!("rank `{rank}` is not a positive integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| malformed(source, n, format!("score `{score}` is not a finite number")))?;
        match &tag {
            None => tag = Some(run_tag.to_string()),
            Some(t) if t != run_tag => return Err(Error::MixedRunTags(t.clone(), run_tag.to_string())),
            Some(_) => {}
        }
        if !seen.insert((topic.to_string(), item.to_string())) {
            return Err(Error::DuplicateId(format!("{topic}/{item}")));
        }
        topics.entry(topic.to_string()).or_default().push(RunEntry {
            item_id: item.to_string(),
            rank,
            score,
        });
    }
    let mut run = RankedRun {
        run_tag: tag.unwrap_or_default(),
        topics,
    };
    run.canonicalize();
    Ok(run)
}

pub fn read_run(path: &Path) -> Result<RankedRun> {
    parse_run(&read_text(path)?, &path.display().to_string())
}

pub fn render_run(run: &RankedRun) -> String {
    let mut out = String::new();
    for (topic, entries) in &run.topics {
        for e in entries {
            let _ = writeln!(out, "{topic} Q0 {} {} {} {}", e.item_id, e.rank, e.score, run.run_tag);
        }
    }
    out
}

pub fn write_run(run: &RankedRun, path: &Path) -> Result<()> {
    write_text(path, &render_run(run))
}

// ---------------------------------------------------------------- qrels

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QrelRecord {
    pub topic_id: String,
    pub item_id: String,
    pub grade: u8,
    pub assessor: Option<String>,
}

impl QrelRecord {
    pub fn new(topic: &str, item: &str, grade: u8) -> Self {
        QrelRecord {
            topic_id: topic.to_string(),
            item_id: item.to_string(),
            grade,
            assessor: None,
        }
    }

    pub fn by(mut self, assessor: &str) -> Self {
        self.assessor = Some(assessor.to_string());
        self
    }
}

pub fn parse_qrels(text: &str, source: &str) -> Result<JudgmentSet> {
    let mut scale: Option<GradeScale> = None;
    let mut space = ItemSpace::Instance;
    let mut records = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let n = n + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(name) = comment.trim().strip_prefix("scale=") {
                scale = Some(name.trim().parse()?);
            } else if let Some(name) = comment.trim().strip_prefix("space=") {
                space = name.trim().parse().map_err(|e: String| malformed(source, n, e))?;
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(scale) = scale else {
            return Err(malformed(source, n, "record before the `#scale=<name>` header"));
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (topic, item, grade, assessor) = match fields[..] {
            [t, _, i, g] => (t, i, g, None),
            [t, _, i, g, a] => (t, i, g, Some(a)),
            _ => {
                return Err(malformed(
                    source,
                    n,
                    format!(
                        "expected `topic 0 item grade [assessor]`, found {} columns",
                        fields.len()
                    ),
                ))
            }
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| malformed(source, n, format!("grade `{grade}` is not an integer")))?;
        let grade = scale.check(grade)?;
        records.push(QrelRecord {
            topic_id: topic.to_string(),
            item_id: item.to_string(),
            grade,
            assessor: assessor.map(str::to_string),
        });
    }
    let Some(scale) = scale else {
        return Err(malformed(source, 1, "missing `#scale=<name>` header"));
    };
    JudgmentSet::new(scale, space, records)
}

pub fn read_qrels(path: &Path) -> Result<JudgmentSet> {
    parse_qrels(&read_text(path)?, &path.display().to_string())
}

pub fn render_qrels(set: &JudgmentSet) -> String {
    let mut out = format!("#scale={}\n", set.scale());
    if set.space() == ItemSpace::Visual {
        out.push_str("#space=visual\n");
    }
    for r in set.records() {
        let _ = write!(out, "{} 0 {} {}", r.topic_id, r.item_id, r.grade);
        if let Some(a) = &r.assessor {
            let _ = write!(out, " {a}");
        }
        out.push('\n');
    }
    out
}

pub fn write_qrels(set: &JudgmentSet, path: &Path) -> Result<()> {
    write_text(path, &render_qrels(set))
}

// ---------------------------------------------------------------- validation

/// A run or qrel item that does not resolve against the known id space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Unresolved {
    pub topic_id: String,
    pub item_id: String,
}

pub fn unresolved_run_items(run: &RankedRun, known: impl Fn(&str) -> bool) -> Vec<Unresolved> {
    run.topics
        .iter()
        .flat_map(|(t, entries)| entries.iter().map(move |e| (t, e)))
        .filter(|(_, e)| !known(&e.item_id))
        .map(|(t, e)| Unresolved {
            topic_id: t.clone(),
            item_id: e.item_id.clone(),
        })
        .collect()
}

pub fn unresolved_qrel_items(set: &JudgmentSet, known: impl Fn(&str) -> bool) -> Vec<Unresolved> {
    set.records()
        .iter()
        .filter(|r| !known(&r.item_id))
        .map(|r| Unresolved {
            topic_id: r.topic_id.clone(),
            item_id: r.item_id.clone(),
        })
        .collect()
}
