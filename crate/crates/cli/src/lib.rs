//! `mfr` command line. Every subcommand reads its inputs from files, writes
//! its outputs to `--out` (or stdout), and is deterministic.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 filesystem failure.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use mfr_assess::{AssessData, Assessment};
use mfr_core::cluster::{
    cluster_corpus, read_cluster_map, render_cluster_map, render_key_map, ClusterIndex, FormulaInstance,
};
use mfr_core::collection::{
    read_corpus, read_qrels, read_run, read_topics, render_qrels, render_run, ItemSpace, RankedRun,
};
use mfr_core::formula::{canonical_key, parse_formula, slt_to_opt, KeyKind};
use mfr_core::judgments::{aggregate_max_visual, aggregate_sum_ntcir, binarize, cohen_kappa};
use mfr_core::meta::{compare_orderings, compare_strata, rank_systems, stratify_by_complexity, ComparisonReport};
use mfr_core::metrics::{evaluate_run, Convention, EvalOptions, Gain, Measure};
use mfr_core::pool::{
    cap_pools, pool_round_robin_min_unique, pool_top_k, pool_visually_distinct, render_pools, CapReport, Selection,
};
use mfr_core::retrieve::RetrievalIndex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mfr",
    version,
    about = "Build and evaluate formula retrieval test collections"
)]
struct Cli {
    /// Worker threads for per-topic work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    /// key=value defaults; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Canonical key, layout tree and operator tree of formulas.
    Parse(ParseArgs),
    /// Group a corpus into visual clusters.
    Cluster(ClusterArgs),
    /// Build per-topic pools from runs.
    Pool(PoolArgs),
    /// Combine or binarize judgments.
    JudgeAggregate(AggregateArgs),
    /// Cohen's kappa between two assessors.
    Kappa(KappaArgs),
    /// Score one run.
    Eval(EvalArgs),
    /// Compare system orderings across strata or evaluation variants.
    Compare(CompareArgs),
    /// Run the structural baseline retriever.
    Retrieve(RetrieveArgs),
    /// Start the assessment service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ParseArgs {
    /// Formula to parse (repeatable).
    #[arg(long, required_unless_present = "corpus")]
    latex: Vec<String>,
    #[arg(long, conflicts_with = "latex")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Cluster map output (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write visual id -> canonical key.
    #[arg(long)]
    keys: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoolStyle {
    RoundRobin,
    TopK,
    VisuallyDistinct,
}

#[derive(Debug, Args)]
struct PoolArgs {
    /// Run files (repeatable or comma-separated).
    #[arg(long = "runs", alias = "run", required = true, num_args = 1.., value_delimiter = ',')]
    runs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    style: PoolStyle,
    /// round-robin: keep taking whole rounds until this many unique items.
    #[arg(long)]
    min_unique: Option<usize>,
    /// top-k: depth per run.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 25)]
    primary_depth: usize,
    #[arg(long, default_value_t = 10)]
    other_depth: usize,
    #[arg(long, value_delimiter = ',')]
    primary_tags: Vec<String>,
    /// Cluster map; needed for visually-distinct pooling and for --cap.
    #[arg(long)]
    clusters: Option<PathBuf>,
    /// At most this many instances per visual cluster.
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value = "frequency")]
    selection: Selection,
    #[arg(long, default_value_t = Selection::DEFAULT_RRF_K)]
    rrf_k: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the cap report (default stderr).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregateMode {
    /// Two ntcir3 sets -> ntcir-agg sums.
    Sum,
    /// Instance grades -> per-cluster maximum.
    Max,
    /// Any scale -> binary at the scale threshold.
    Binarize,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(long, value_enum)]
    mode: AggregateMode,
    #[arg(long, required = true, num_args = 1..=2, value_delimiter = ',')]
    qrels: Vec<PathBuf>,
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[arg(long)]
    a: PathBuf,
    /// Second assessor's file (default: same as --a, split by --assessor-*).
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long)]
    assessor_a: Option<String>,
    #[arg(long)]
    assessor_b: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalSetup {
    #[arg(long, default_value = "ntcir-instance")]
    convention: Convention,
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long, default_value = "linear")]
    gain: Gain,
    /// nDCG rank cutoff (default: full list).
    #[arg(long)]
    cutoff: Option<usize>,
    /// Namespace of run item ids.
    #[arg(long, default_value = "instance")]
    run_space: ItemSpace,
}

impl EvalSetup {
    fn options(&self, convention: Convention) -> EvalOptions {
        EvalOptions {
            convention,
            gain: self.gain,
            ndcg_cutoff: self.cutoff,
            run_space: self.run_space,
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value = "ndcg-prime,map-prime,p-prime@10")]
    measures: String,
    #[command(flatten)]
    setup: EvalSetup,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long = "runs", alias = "run", required = true, num_args = 1.., value_delimiter = ',')]
    runs: Vec<PathBuf>,
    #[arg(long, default_value = "ndcg-prime")]
    measure: String,
    /// Stratify by the complexity labels of these topics.
    #[arg(long, requires = "qrels")]
    topics: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// NAME:CONVENTION:QRELS, one ordering per variant (repeatable).
    #[arg(long, conflicts_with = "topics")]
    variant: Vec<String>,
    #[command(flatten)]
    setup: EvalSetup,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rank trajectories for plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Precomputed cluster map (default: cluster the corpus).
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long, required_unless_present = "query")]
    topics: Option<PathBuf>,
    /// Single query, reported as topic `q`.
    #[arg(long, conflicts_with = "topics")]
    query: Option<String>,
    #[arg(long, default_value_t = 1000)]
    limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    topics: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long, default_value = "judgments.jsonl")]
    journal: PathBuf,
    /// UI bundle directory.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = mfr_assess::DEFAULT_PORT)]
    port: u16,
}

// ---------------------------------------------------------------- errors

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
}

impl From<mfr_core::Error> for Failure {
    fn from(e: mfr_core::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<mfr_assess::AssessError> for Failure {
    fn from(e: mfr_assess::AssessError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

type Outcome = Result<(), Failure>;

// ---------------------------------------------------------------- config

const GLOBAL_VALUED: [&str; 3] = ["--threads", "--format", "--config"];

fn flag_given(args: &[String], long: &str) -> bool {
    let flag = format!("--{long}");
    args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

fn subcommand_name(args: &[String]) -> Option<&str> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if GLOBAL_VALUED.contains(&a.as_str()) {
            it.next();
        } else if !a.starts_with('-') {
            return Some(a);
        }
    }
    None
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

/// Append config entries as flags unless the command line already sets them.
/// Keys that belong to another subcommand are ignored; unknown keys fail.
fn apply_config(mut args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let entries = parse_config(&text).map_err(Failure::Invalid)?;
    let root = Cli::command();
    let longs = |cmd: &clap::Command| -> BTreeMap<String, bool> {
        cmd.get_arguments()
            .filter_map(|a| {
                let takes_value = a.get_action().takes_values();
                a.get_long().map(|l| (l.to_string(), takes_value))
            })
            .collect()
    };
    let global = longs(&root);
    let sub_name = subcommand_name(&args).map(str::to_string);
    let sub = sub_name
        .as_deref()
        .and_then(|n| root.find_subcommand(n))
        .map(longs)
        .unwrap_or_default();
    let anywhere: BTreeSet<String> = root.get_subcommands().flat_map(|s| longs(s).into_keys()).collect();
    for (key, value) in entries {
        if key == "config" {
            return Err(invalid("config files cannot include other config files"));
        }
        let takes_value = match (global.get(&key), sub.get(&key)) {
            (Some(&t), _) | (None, Some(&t)) => t,
            (None, None) if anywhere.contains(&key) => continue,
            (None, None) => return Err(invalid(format!("unknown config key `{key}` in {}", path.display()))),
        };
        if flag_given(&args, &key) {
            continue;
        }
        if takes_value {
            args.push(format!("--{key}={value}"));
        } else if matches!(value.as_str(), "true" | "yes" | "1") {
            args.push(format!("--{key}"));
        }
    }
    Ok(args)
}

// ---------------------------------------------------------------- entry

/// Run with `argv` (including the program name), writing reports to `stdout`
/// and diagnostics to `stderr`. Returns the exit code.
pub fn run_cli<I, T>(argv: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(f) => return report(f, stderr),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return report(invalid("--threads must be at least 1"), stderr);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return report(invalid(format!("cannot start thread pool: {e}")), stderr),
    };
    match pool.install(|| dispatch(&cli, stdout, stderr)) {
        Ok(()) => EXIT_OK,
        Err(f) => report(f, stderr),
    }
}

fn report(f: Failure, stderr: &mut (dyn Write + Send)) -> i32 {
    let (code, msg) = match f {
        Failure::Invalid(m) => (EXIT_INVALID, m),
        Failure::Io(m) => (EXIT_IO, m),
    };
    let _ = writeln!(stderr, "mfr: error: {msg}");
    code
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut (dyn Write + Send)) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn dispatch(cli: &Cli, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Outcome {
    let fmt = cli.format;
    match &cli.cmd {
        Cmd::Parse(a) => parse(a, fmt, stdout),
        Cmd::Cluster(a) => cluster(a, stdout, stderr),
        Cmd::Pool(a) => pool(a, fmt, stdout, stderr),
        Cmd::JudgeAggregate(a) => aggregate(a, stdout),
        Cmd::Kappa(a) => kappa(a, fmt, stdout),
        Cmd::Eval(a) => eval(a, fmt, stdout),
        Cmd::Compare(a) => compare(a, fmt, stdout),
        Cmd::Retrieve(a) => retrieve(a, stdout),
        Cmd::Serve(a) => serve(a, stderr),
    }
}

// ---------------------------------------------------------------- subcommands

fn key_kind(k: KeyKind) -> &'static str {
    match k {
        KeyKind::Slt => "slt",
        KeyKind::LatexFallback => "latex-fallback",
    }
}

fn tsv_cell(s: &str) -> String {
    s.replace(['\t', '\n'], " ")
}

fn parse(a: &ParseArgs, fmt: Format, stdout: &mut (dyn Write + Send)) -> Outcome {
    let formulas: Vec<FormulaInstance> = match &a.corpus {
        Some(p) => read_corpus(p)?,
        None => a
            .latex
            .iter()
            .enumerate()
            .map(|(i, l)| FormulaInstance::new(&(i + 1).to_string(), "-", l))
            .collect(),
    };
    let rows: Vec<serde_json::Value> = formulas
        .iter()
        .map(|f| {
            let key = canonical_key(&f.latex);
            let slt = parse_formula(&f.latex).ok();
            let opt = slt.as_ref().and_then(|s| slt_to_opt(s).ok()).map(|o| o.render());
            serde_json::json!({
                "id": f.instance_id,
                "latex": f.latex,
                "key_kind": key_kind(key.kind),
                "digest": key.digest,
                "slt": slt.map(|s| s.serialize()),
                "opt": opt,
            })
        })
        .collect();
    let text = match fmt {
        Format::Json => serde_json::to_string_pretty(&rows).expect("json") + "\n",
        Format::Tsv => {
            let mut out = String::from("id\tkey_kind\tdigest\tslt\topt\n");
            for r in &rows {
                let cell = |k: &str| r[k].as_str().map_or_else(|| "NA".to_string(), tsv_cell);
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    cell("id"),
                    cell("key_kind"),
                    cell("digest"),
                    cell("slt"),
                    cell("opt")
                );
            }
            out
        }
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn cluster(a: &ClusterArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Outcome {
    let corpus = read_corpus(&a.corpus)?;
    let clusters = cluster_corpus(&corpus)?;
    let index = ClusterIndex::from_clusters(&clusters)?;
    emit(a.out.as_deref(), &render_cluster_map(&index), stdout)?;
    if let Some(k) = &a.keys {
        emit(Some(k), &render_key_map(&clusters), stdout)?;
    }
    let _ = writeln!(
        stderr,
        "{} instances in {} visual clusters",
        corpus.len(),
        clusters.len()
    );
    Ok(())
}

fn read_runs(paths: &[PathBuf]) -> Result<Vec<RankedRun>, Failure> {
    let runs: Vec<RankedRun> = paths.iter().map(|p| read_run(p)).collect::<Result<_, _>>()?;
    let mut tags = BTreeSet::new();
    for r in &runs {
        if !tags.insert(r.run_tag.as_str()) {
            return Err(invalid(format!(
                "run tag `{}` appears in more than one run file",
                r.run_tag
            )));
        }
    }
    Ok(runs)
}

fn clusters_opt(p: &Option<PathBuf>) -> Result<Option<ClusterIndex>, Failure> {
    p.as_deref().map(read_cluster_map).transpose().map_err(Failure::from)
}

fn cap_report_text(r: &CapReport, fmt: Format) -> String {
    match fmt {
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "clusters": r.clusters,
            "clusters_over_cap": r.clusters_over_cap,
            "over_cap_fraction": r.over_cap_fraction(),
            "instances_pooled": r.instances_pooled,
            "instances_selected": r.instances_selected,
        }))
        .expect("json")
            + "\n",
        Format::Tsv => format!(
            "clusters\tclusters_over_cap\tover_cap_fraction\tinstances_pooled\tinstances_selected\n{}\t{}\t{:.4}\t{}\t{}\n",
            r.clusters,
            r.clusters_over_cap,
            r.over_cap_fraction(),
            r.instances_pooled,
            r.instances_selected
        ),
    }
}

fn pool(a: &PoolArgs, fmt: Format, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Outcome {
    let runs = read_runs(&a.runs)?;
    let clusters = clusters_opt(&a.clusters)?;
    let pools = match a.style {
        PoolStyle::RoundRobin => {
            let n = a
                .min_unique
                .ok_or_else(|| invalid("--style round-robin needs --min-unique"))?;
            pool_round_robin_min_unique(&runs, n)?
        }
        PoolStyle::TopK => pool_top_k(&runs, a.k.ok_or_else(|| invalid("--style top-k needs --k"))?)?,
        PoolStyle::VisuallyDistinct => {
            let index = clusters
                .as_ref()
                .ok_or_else(|| invalid("--style visually-distinct needs --clusters"))?;
            let known: BTreeSet<&str> = runs.iter().map(|r| r.run_tag.as_str()).collect();
            if let Some(t) = a.primary_tags.iter().find(|t| !known.contains(t.as_str())) {
                return Err(invalid(format!("primary tag `{t}` names no loaded run")));
            }
            let tags: BTreeSet<String> = a.primary_tags.iter().cloned().collect();
            pool_visually_distinct(&runs, index, a.primary_depth, a.other_depth, &tags)?
        }
    };
    let pools = match a.cap {
        Some(cap) => {
            let index = clusters.as_ref().ok_or_else(|| invalid("--cap needs --clusters"))?;
            let strategy = match a.selection {
                Selection::Rrf { .. } => Selection::Rrf { k: a.rrf_k },
                s => s,
            };
            let (capped, rep) = cap_pools(&pools, index, cap, strategy)?;
            let text = cap_report_text(&rep, fmt);
            match &a.report {
                Some(p) => emit(Some(p), &text, stdout)?,
                None => {
                    let _ = stderr.write_all(text.as_bytes());
                }
            }
            capped
        }
        None => pools,
    };
    emit(a.out.as_deref(), &render_pools(&pools), stdout)
}

fn aggregate(a: &AggregateArgs, stdout: &mut (dyn Write + Send)) -> Outcome {
    let sets = a.qrels.iter().map(|p| read_qrels(p)).collect::<Result<Vec<_>, _>>()?;
    let out = match (a.mode, &sets[..]) {
        (AggregateMode::Sum, [x, y]) => aggregate_sum_ntcir(x, y)?,
        (AggregateMode::Sum, _) => return Err(invalid("--mode sum needs two --qrels files")),
        (AggregateMode::Max, [x]) => {
            let index = clusters_opt(&a.clusters)?.ok_or_else(|| invalid("--mode max needs --clusters"))?;
            aggregate_max_visual(x, &index)?
        }
        (AggregateMode::Binarize, [x]) => binarize(x),
        (_, _) => return Err(invalid("this mode takes exactly one --qrels file")),
    };
    emit(a.out.as_deref(), &render_qrels(&out), stdout)
}

fn kappa(a: &KappaArgs, fmt: Format, stdout: &mut (dyn Write + Send)) -> Outcome {
    let first = read_qrels(&a.a)?;
    let second = match &a.b {
        Some(p) => read_qrels(p)?,
        None => first.clone(),
    };
    if a.b.is_none() && (a.assessor_a.is_none() || a.assessor_b.is_none()) {
        return Err(invalid("with a single file, name both --assessor-a and --assessor-b"));
    }
    let pick = |set: &mfr_core::judgments::JudgmentSet, who: &Option<String>| match who {
        Some(w) => set.for_assessor(Some(w)),
        None => set.clone(),
    };
    let k = cohen_kappa(&pick(&first, &a.assessor_a), &pick(&second, &a.assessor_b))?;
    let text = match fmt {
        Format::Json => format!("{}\n", serde_json::json!({ "kappa": k })),
        Format::Tsv => format!("kappa\n{k:.4}\n"),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn eval(a: &EvalArgs, fmt: Format, stdout: &mut (dyn Write + Send)) -> Outcome {
    let measures = Measure::parse_list(&a.measures)?;
    let run = read_run(&a.run)?;
    let qrels = read_qrels(&a.qrels)?;
    let clusters = clusters_opt(&a.setup.clusters)?;
    let opts = a.setup.options(a.setup.convention);
    let result = evaluate_run(&run, &qrels, &measures, clusters.as_ref(), opts)?;
    let text = match fmt {
        Format::Json => result.to_json() + "\n",
        Format::Tsv => result.to_tsv(),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn parse_variant(spec: &str) -> Result<(String, Convention, PathBuf), Failure> {
    let mut parts = spec.splitn(3, ':');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(name), Some(conv), Some(path)) if !name.is_empty() && !path.is_empty() => Ok((
            name.to_string(),
            conv.parse().map_err(Failure::Invalid)?,
            PathBuf::from(path),
        )),
        _ => Err(invalid(format!("--variant `{spec}`: expected NAME:CONVENTION:QRELS"))),
    }
}

fn compare(a: &CompareArgs, fmt: Format, stdout: &mut (dyn Write + Send)) -> Outcome {
    let measure: Measure = a.measure.parse()?;
    let runs = read_runs(&a.runs)?;
    let clusters = clusters_opt(&a.setup.clusters)?;
    let report: ComparisonReport = if let Some(topics) = &a.topics {
        let qrels = read_qrels(a.qrels.as_deref().expect("clap enforces --qrels"))?;
        let topics = read_topics(topics)?;
        let strata = stratify_by_complexity(
            &runs,
            &qrels,
            &[measure],
            clusters.as_ref(),
            a.setup.options(a.setup.convention),
            &topics,
        )?;
        compare_strata(&strata, measure)?
    } else {
        if a.variant.len() < 2 {
            return Err(invalid(
                "compare needs --topics, or at least two --variant NAME:CONVENTION:QRELS",
            ));
        }
        let mut named = Vec::new();
        for spec in &a.variant {
            let (name, convention, path) = parse_variant(spec)?;
            let qrels = read_qrels(&path)?;
            let results = runs
                .iter()
                .map(|r| evaluate_run(r, &qrels, &[measure], clusters.as_ref(), a.setup.options(convention)))
                .collect::<Result<Vec<_>, _>>()?;
            named.push((name, rank_systems(&results, measure)?));
        }
        compare_orderings(measure, named)?
    };
    if let Some(p) = &a.plot_data {
        emit(Some(p), &report.plot_data(), stdout)?;
    }
    let text = match fmt {
        Format::Json => report.to_json() + "\n",
        Format::Tsv => report.to_tsv(),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn retrieve(a: &RetrieveArgs, stdout: &mut (dyn Write + Send)) -> Outcome {
    let corpus = read_corpus(&a.corpus)?;
    let index = match &a.clusters {
        Some(p) => read_cluster_map(p)?,
        None => ClusterIndex::from_clusters(&cluster_corpus(&corpus)?)?,
    };
    let engine = RetrievalIndex::build(&corpus, &index)?;
    let run = match (&a.topics, &a.query) {
        (Some(t), _) => engine.retrieve_topics(&read_topics(t)?, a.limit)?,
        (None, Some(q)) => {
            let mut run = RankedRun::new(mfr_core::retrieve::RUN_TAG);
            run.topics.insert("q".to_string(), engine.retrieve(q, a.limit)?);
            run
        }
        (None, None) => unreachable!("clap requires --topics or --query"),
    };
    emit(a.out.as_deref(), &render_run(&run), stdout)
}

fn serve(a: &ServeArgs, stderr: &mut (dyn Write + Send)) -> Outcome {
    let data = AssessData {
        pools: mfr_core::pool::read_pools(&a.pool)?,
        topics: a.topics.as_deref().map(read_topics).transpose()?.unwrap_or_default(),
        corpus: a.corpus.as_deref().map(read_corpus).transpose()?.unwrap_or_default(),
        clusters: clusters_opt(&a.clusters)?,
    };
    let state = Assessment::open(data, &a.journal)?;
    let addr = SocketAddr::new(a.host, a.port);
    let _ = writeln!(
        stderr,
        "assessment service on http://{addr} (journal {})",
        a.journal.display()
    );
    mfr_assess::run(state, addr, a.static_dir.as_deref()).map_err(|e| Failure::Io(format!("{addr}: {e}")))
}
