use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unbalanced braces at byte {offset}")]
    UnbalancedBraces { offset: usize },
    #[error("unknown escape `\\{found}` at byte {offset}")]
    UnknownEscape { offset: usize, found: String },
    #[error("cannot build symbol layout tree: {0}")]
    ParseFailure(String),
    #[error("cannot build operator tree: {0}")]
    OptFailure(String),

    #[error("duplicate instance id `{0}`")]
    DuplicateInstanceId(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),

    #[error("{path}:{line}: {reason}")]
    MalformedLine { path: String, line: usize, reason: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("run file mixes tags `{0}` and `{1}`")]
    MixedRunTags(String, String),
    #[error("unknown grade scale `{0}`")]
    UnknownScale(String),
    #[error("grade {grade} is out of range for scale `{scale}`")]
    GradeOutOfRange { grade: i64, scale: String },
    #[error("duplicate judgment for topic `{topic}`, item `{item}`")]
    DuplicateJudgment { topic: String, item: String },

    #[error("no runs to pool")]
    EmptyRuns,

    #[error("item `{item}` of topic `{topic}` was judged by only one assessor")]
    MissingCounterpart { topic: String, item: String },
    #[error("expected grade scale `{expected}`, found `{found}`")]
    ScaleMismatch { expected: String, found: String },
    #[error("item `{item}` of topic `{topic}` is not judged in both sets")]
    UnpairedRecords { topic: String, item: String },
    #[error("judgment sets share no (topic, item) pairs")]
    EmptyIntersection,

    #[error("topic has no relevant items")]
    ZeroRelevant,
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("{0}")]
    ConventionMismatch(String),
    #[error("topic `{topic}` has several judgments for item `{item}`")]
    AmbiguousJudgment { topic: String, item: String },

    #[error("topic `{0}` has no complexity label")]
    UnknownComplexity(String),
    #[error("system sets differ: {0}")]
    MismatchedSystems(String),
    #[error("need at least two systems")]
    TooFewSystems,
    #[error("correlation undefined: one ordering is entirely tied")]
    UndefinedCorrelation,
    #[error("run `{run}` has no value for measure `{measure}`")]
    MissingMeasure { run: String, measure: String },

    #[error("query has no features")]
    EmptyQuery,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
