//! Assessment backend: serves pooled items to assessors in pool-file order and
//! records their ARQMath-scale grades in an append-only journal.
//!
//! Every judgment is flushed and synced to the journal before it is
//! acknowledged. On start the journal is replayed latest-wins, so the export
//! after a restart equals the export before it.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mfr_core::cluster::{ClusterIndex, FormulaInstance};
use mfr_core::collection::{render_qrels, ItemSpace, QrelRecord, Topic};
use mfr_core::judgments::{GradeScale, JudgmentSet};
use mfr_core::pool::Pool;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod journal;

pub use journal::{latest_wins, parse_journal, Journal, JudgmentEvent, Latest};

pub const DEFAULT_PORT: u16 = 8391;
pub const SCALE: GradeScale = GradeScale::Arqmath;

#[derive(Debug, Error)]
pub enum AssessError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("item `{item}` is not in the pool of topic `{topic}`")]
    UnknownItem { topic: String, item: String },
    #[error("an assessor name is required")]
    MissingAssessor,
    #[error(transparent)]
    Core(#[from] mfr_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AssessError {
    pub fn is_io(&self) -> bool {
        match self {
            AssessError::Io { .. } => true,
            AssessError::Core(e) => e.is_io(),
            _ => false,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            AssessError::UnknownTopic(_) => "UnknownTopic",
            AssessError::UnknownItem { .. } => "UnknownItem",
            AssessError::MissingAssessor => "MissingAssessor",
            AssessError::Core(mfr_core::Error::GradeOutOfRange { .. }) => "GradeOutOfRange",
            AssessError::Core(_) | AssessError::Io { .. } => "Internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            AssessError::UnknownTopic(_) | AssessError::UnknownItem { .. } => StatusCode::NOT_FOUND,
            AssessError::MissingAssessor => StatusCode::BAD_REQUEST,
            AssessError::Core(mfr_core::Error::GradeOutOfRange { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            AssessError::Core(_) | AssessError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for AssessError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string(), "kind": self.kind() });
        (self.status(), Json(body)).into_response()
    }
}

/// Everything the service reads at start-up. Only the pools are required.
#[derive(Debug, Clone, Default)]
pub struct AssessData {
    pub pools: Vec<Pool>,
    pub topics: Vec<Topic>,
    pub corpus: Vec<FormulaInstance>,
    pub clusters: Option<ClusterIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentTask {
    pub topic_id: String,
    pub query_latex: Option<String>,
    pub item_id: String,
    pub item_latex: Option<String>,
    pub context_doc_id: Option<String>,
    pub context: Option<String>,
    pub instances_in_cluster: usize,
    /// 0-based position in the topic's pool.
    pub position: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextResponse {
    pub done: bool,
    pub task: Option<AssessmentTask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: String,
    pub query_latex: Option<String>,
    pub complexity: Option<String>,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub topic_id: String,
    pub item_id: String,
    pub assessor: String,
    /// Signed so that out-of-range values reach validation instead of failing decode.
    pub grade: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub acknowledged: bool,
    /// Position of the event in the journal, 1-based.
    pub seq: u64,
    pub topic_id: String,
    pub item_id: String,
    pub assessor: String,
    pub grade: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicProgress {
    pub topic_id: String,
    pub pool_size: usize,
    pub judged: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub pool_items: usize,
    /// Pooled items judged, per assessor.
    pub assessors: BTreeMap<String, usize>,
    pub topics: Vec<TopicProgress>,
}

struct TopicPool {
    items: Vec<String>,
    position: HashMap<String, usize>,
}

struct Judged {
    latest: Latest,
    seq: u64,
}

pub struct Assessment {
    order: Vec<String>,
    pools: HashMap<String, TopicPool>,
    topics: HashMap<String, Topic>,
    instances: HashMap<String, FormulaInstance>,
    clusters: Option<ClusterIndex>,
    journal: Mutex<Journal>,
    judged: RwLock<Judged>,
}

impl Assessment {
    /// Load the pool and replay the journal at `journal_path`.
    pub fn open(data: AssessData, journal_path: &Path) -> Result<Self, AssessError> {
        let (journal, events) = Journal::open(journal_path)?;
        let mut order = Vec::new();
        let mut pools = HashMap::new();
        for pool in data.pools {
            let items: Vec<String> = pool.items.into_iter().map(|i| i.item_id).collect();
            let position = items.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
            order.push(pool.topic_id.clone());
            pools.insert(pool.topic_id, TopicPool { items, position });
        }
        Ok(Assessment {
            order,
            pools,
            topics: data.topics.into_iter().map(|t| (t.topic_id.clone(), t)).collect(),
            instances: data.corpus.into_iter().map(|f| (f.instance_id.clone(), f)).collect(),
            clusters: data.clusters,
            journal: Mutex::new(journal),
            judged: RwLock::new(Judged {
                latest: latest_wins(&events),
                seq: events.len() as u64,
            }),
        })
    }

    pub fn topics(&self) -> Vec<TopicSummary> {
        self.order
            .iter()
            .map(|t| {
                let topic = self.topics.get(t);
                TopicSummary {
                    topic_id: t.clone(),
                    query_latex: topic.map(|x| x.query_latex.clone()),
                    complexity: topic.map(|x| x.complexity.as_str().to_string()),
                    pool_size: self.pools[t].items.len(),
                }
            })
            .collect()
    }

    /// First unjudged pool item for `assessor`, in pool-file order. Without a
    /// topic, topics are visited in pool-file order. `None` means done.
    pub fn next_item(&self, assessor: &str, topic: Option<&str>) -> Result<Option<AssessmentTask>, AssessError> {
        if assessor.trim().is_empty() {
            return Err(AssessError::MissingAssessor);
        }
        let topics: Vec<&str> = match topic {
            Some(t) if self.pools.contains_key(t) => vec![t],
            Some(t) => return Err(AssessError::UnknownTopic(t.to_string())),
            None => self.order.iter().map(String::as_str).collect(),
        };
        let judged = self.judged.read().unwrap_or_else(PoisonError::into_inner);
        for t in topics {
            let pool = &self.pools[t];
            let key = |item: &str| (assessor.to_string(), t.to_string(), item.to_string());
            if let Some((pos, item)) = pool
                .items
                .iter()
                .enumerate()
                .find(|(_, item)| !judged.latest.contains_key(&key(item)))
            {
                return Ok(Some(self.task(t, item, pos)));
            }
        }
        Ok(None)
    }

    fn task(&self, topic_id: &str, item_id: &str, position: usize) -> AssessmentTask {
        let topic = self.topics.get(topic_id);
        // a visual-space pool names clusters; show the first member
        let (formula, cluster_size) = match &self.clusters {
            Some(idx) => match idx.cluster(item_id) {
                Some(c) => (c.members.first().and_then(|m| self.instances.get(m)), c.members.len()),
                None => {
                    let size = idx
                        .visual_id_of(item_id)
                        .ok()
                        .and_then(|v| idx.cluster(v))
                        .map_or(1, |c| c.members.len());
                    (self.instances.get(item_id), size)
                }
            },
            None => (self.instances.get(item_id), 1),
        };
        AssessmentTask {
            topic_id: topic_id.to_string(),
            query_latex: topic.map(|t| t.query_latex.clone()),
            item_id: item_id.to_string(),
            item_latex: formula.map(|f| f.latex.clone()),
            context_doc_id: formula.map(|f| f.doc_id.clone()),
            context: None,
            instances_in_cluster: cluster_size,
            position,
            pool_size: self.pools[topic_id].items.len(),
        }
    }

    /// Validate, journal (flushed and synced), then acknowledge.
    pub fn submit(&self, s: &Submission) -> Result<Ack, AssessError> {
        if s.assessor.trim().is_empty() || s.assessor.chars().any(char::is_whitespace) {
            return Err(AssessError::MissingAssessor);
        }
        let pool = self
            .pools
            .get(&s.topic_id)
            .ok_or_else(|| AssessError::UnknownTopic(s.topic_id.clone()))?;
        if !pool.position.contains_key(&s.item_id) {
            return Err(AssessError::UnknownItem {
                topic: s.topic_id.clone(),
                item: s.item_id.clone(),
            });
        }
        let grade = SCALE.check(s.grade)?;
        let event = JudgmentEvent::now(&s.topic_id, &s.item_id, &s.assessor, grade);
        // the writer lock orders acknowledgments; readers only see the map
        let mut journal = self.journal.lock().unwrap_or_else(PoisonError::into_inner);
        journal.append(&event)?;
        let mut judged = self.judged.write().unwrap_or_else(PoisonError::into_inner);
        judged.latest.insert(
            (event.assessor.clone(), event.topic_id.clone(), event.item_id.clone()),
            grade,
        );
        judged.seq += 1;
        Ok(Ack {
            acknowledged: true,
            seq: judged.seq,
            topic_id: event.topic_id,
            item_id: event.item_id,
            assessor: event.assessor,
            grade,
        })
    }

    pub fn progress(&self) -> Progress {
        let judged = self.judged.read().unwrap_or_else(PoisonError::into_inner);
        let mut assessors: BTreeMap<String, usize> = BTreeMap::new();
        let mut per_topic: HashMap<&str, BTreeMap<String, usize>> = HashMap::new();
        for (assessor, topic, item) in judged.latest.keys() {
            let pooled = self.pools.get(topic).is_some_and(|p| p.position.contains_key(item));
            if pooled {
                *assessors.entry(assessor.clone()).or_default() += 1;
                *per_topic.entry(topic).or_default().entry(assessor.clone()).or_default() += 1;
            }
        }
        Progress {
            pool_items: self.pools.values().map(|p| p.items.len()).sum(),
            assessors,
            topics: self
                .order
                .iter()
                .map(|t| TopicProgress {
                    topic_id: t.clone(),
                    pool_size: self.pools[t].items.len(),
                    judged: per_topic.remove(t.as_str()).unwrap_or_default(),
                })
                .collect(),
        }
    }

    /// Latest judgments as a qrels set, in pool order then assessor order.
    /// Judgments of items no longer pooled follow, sorted by id.
    pub fn judgments(&self, assessor: Option<&str>) -> Result<JudgmentSet, AssessError> {
        let judged = self.judged.read().unwrap_or_else(PoisonError::into_inner);
        let topic_rank: HashMap<&str, usize> = self.order.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut rows: Vec<_> = judged
            .latest
            .iter()
            .filter(|((a, _, _), _)| assessor.is_none_or(|want| a == want))
            .map(|((a, t, i), &g)| {
                let tr = topic_rank.get(t.as_str()).copied().unwrap_or(usize::MAX);
                let ir = self
                    .pools
                    .get(t)
                    .and_then(|p| p.position.get(i).copied())
                    .unwrap_or(usize::MAX);
                ((tr, t, ir, i, a), g)
            })
            .collect();
        rows.sort();
        let records = rows
            .into_iter()
            .map(|((_, t, _, i, a), g)| QrelRecord::new(t, i, g).by(a))
            .collect();
        let space = match &self.clusters {
            Some(idx)
                if self
                    .pools
                    .values()
                    .flat_map(|p| &p.items)
                    .any(|i| idx.cluster(i).is_some()) =>
            {
                ItemSpace::Visual
            }
            _ => ItemSpace::Instance,
        };
        Ok(JudgmentSet::new(SCALE, space, records)?)
    }

    pub fn export_qrels(&self, assessor: Option<&str>) -> Result<String, AssessError> {
        Ok(render_qrels(&self.judgments(assessor)?))
    }

    pub fn journal_path(&self) -> PathBuf {
        self.journal
            .lock()
            .unwrap_or_else(PoisonError::into_inner)
            .path()
            .to_path_buf()
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    assessor: Option<String>,
    topic: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    assessor: Option<String>,
}

type Shared = Arc<Assessment>;

async fn topics(State(s): State<Shared>) -> Json<Vec<TopicSummary>> {
    Json(s.topics())
}

async fn next(State(s): State<Shared>, Query(q): Query<NextQuery>) -> Result<Json<NextResponse>, AssessError> {
    let assessor = q.assessor.ok_or(AssessError::MissingAssessor)?;
    let task = s.next_item(&assessor, q.topic.as_deref().filter(|t| !t.is_empty()))?;
    Ok(Json(NextResponse {
        done: task.is_none(),
        task,
    }))
}

async fn submit(State(s): State<Shared>, Json(body): Json<Submission>) -> Result<Json<Ack>, AssessError> {
    s.submit(&body).map(Json)
}

async fn progress(State(s): State<Shared>) -> Json<Progress> {
    Json(s.progress())
}

async fn export(State(s): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, AssessError> {
    let text = s.export_qrels(q.assessor.as_deref().filter(|a| !a.is_empty()))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

/// JSON API plus, when given, the UI bundle served from `static_dir`.
pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/topics", get(topics))
        .route("/next", get(next))
        .route("/judgments", post(submit))
        .route("/progress", get(progress))
        .route("/export/qrels", get(export))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: Shared, addr: SocketAddr, static_dir: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking entry point: builds a runtime and serves until Ctrl-C.
pub fn run(state: Assessment, addr: SocketAddr, static_dir: Option<&Path>) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(Arc::new(state), addr, static_dir))
}
