use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use mfr::{run_cli, EXIT_INVALID, EXIT_IO, EXIT_OK};

const CORPUS: &str = "\
f1\td1\ta^2+b^2=c^2
f2\td2\t{a^2}+b^2=c^{2}
f3\td3\tx^2+y^2=z^2
f4\td4\t\\frac{n}{m}
f5\td5\tn \\over m
f6\td6\t\\sqrt{x}
f7\td7\te^{i\\pi}+1=0
f8\td8\t\\sum_{i=1}^{n} i
";

const TOPICS: &str = "\
T1\tL\ta^2+b^2=c^2
T2\tM\t\\frac{n}{m}
T3\tH\te^{i\\pi}
";

const QRELS: &str = "\
#scale=arqmath
T1 0 f1 3
T1 0 f2 3
T1 0 f3 2
T1 0 f6 0
T2 0 f4 3
T2 0 f5 3
T2 0 f8 1
T3 0 f7 2
T3 0 f6 0
";

type RunList<'a> = (&'a str, &'a [&'a str]);

fn run_file(tag: &str, lists: &[RunList]) -> String {
    let mut out = String::new();
    for (topic, items) in lists {
        for (i, item) in items.iter().enumerate() {
            out.push_str(&format!("{topic} Q0 {item} {} {} {tag}\n", i + 1, 100 - i));
        }
    }
    out
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("corpus.tsv"), CORPUS).unwrap();
        fs::write(p.join("topics.tsv"), TOPICS).unwrap();
        fs::write(p.join("qrels.tsv"), QRELS).unwrap();
        let runs: [(&str, &[RunList]); 3] = [
            (
                "A",
                &[
                    ("T1", &["f1", "f2", "f3", "f6"]),
                    ("T2", &["f4", "f8", "f5"]),
                    ("T3", &["f7", "f6"]),
                ],
            ),
            (
                "B",
                &[
                    ("T1", &["f3", "f6", "f1"]),
                    ("T2", &["f8", "f4"]),
                    ("T3", &["f6", "f7"]),
                ],
            ),
            ("C", &[("T1", &["f6", "f3"]), ("T2", &["f5", "f4"]), ("T3", &["f7"])]),
        ];
        for (tag, lists) in runs {
            fs::write(p.join(format!("{tag}.run")), run_file(tag, lists)).unwrap();
        }
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Run with `args`; returns (code, stdout, stderr).
    fn mfr(&self, args: &[&str]) -> (i32, String, String) {
        let mut argv = vec!["mfr"];
        argv.extend_from_slice(args);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_cli(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn ok(&self, args: &[&str]) -> String {
        let (code, out, err) = self.mfr(args);
        assert_eq!(code, EXIT_OK, "{args:?}: {err}");
        out
    }

    fn clusters(&self) -> String {
        let out = self.p("clusters.tsv");
        self.ok(&["cluster", "--corpus", &self.p("corpus.tsv"), "--out", &out]);
        out
    }

    /// Per-cluster qrels derived from the instance qrels.
    fn visual_qrels(&self) -> String {
        let clusters = self.clusters();
        let out = self.p("vqrels.tsv");
        self.ok(&[
            "judge-aggregate",
            "--mode",
            "max",
            "--qrels",
            &self.p("qrels.tsv"),
            "--clusters",
            &clusters,
            "--out",
            &out,
        ]);
        out
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn cluster_writes_a_map_and_key_file() {
    let f = Fixture::new();
    let (code, _, err) = f.mfr(&[
        "cluster",
        "--corpus",
        &f.p("corpus.tsv"),
        "--out",
        &f.p("c.tsv"),
        "--keys",
        &f.p("k.tsv"),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("8 instances in 6 visual clusters"), "{err}");
    let map = read(&f.path("c.tsv"));
    let visual = |id: &str| {
        map.lines()
            .find(|l| l.ends_with(&format!("\t{id}")))
            .unwrap()
            .split('\t')
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(visual("f1"), visual("f2"));
    assert_eq!(visual("f4"), visual("f5"));
    assert_ne!(visual("f1"), visual("f3"));
    assert_eq!(read(&f.path("k.tsv")).lines().count(), 6);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let f = Fixture::new();
    let clusters = f.clusters();
    let first = read(Path::new(&clusters));
    f.ok(&[
        "--threads",
        "3",
        "cluster",
        "--corpus",
        &f.p("corpus.tsv"),
        "--out",
        &f.p("c2.tsv"),
    ]);
    assert_eq!(read(&f.path("c2.tsv")), first);

    let eval = |threads: &str| {
        f.ok(&[
            "--threads",
            threads,
            "eval",
            "--run",
            &f.p("A.run"),
            "--qrels",
            &f.p("qrels.tsv"),
            "--measures",
            "ndcg-prime,map,p@5,mrr",
        ])
    };
    assert_eq!(eval("1"), eval("4"));

    let pool = |threads: &str| {
        f.ok(&[
            "--threads",
            threads,
            "pool",
            "--runs",
            &format!("{},{},{}", f.p("A.run"), f.p("B.run"), f.p("C.run")),
            "--style",
            "top-k",
            "--k",
            "2",
        ])
    };
    assert_eq!(pool("1"), pool("8"));
}

#[test]
fn eval_reports_tsv_and_json() {
    let f = Fixture::new();
    let vqrels = f.visual_qrels();
    let clusters = f.p("clusters.tsv");
    let out = f.ok(&[
        "eval",
        "--run",
        &f.p("A.run"),
        "--qrels",
        &vqrels,
        "--convention",
        "arqmath-visual",
        "--clusters",
        &clusters,
        "--measures",
        "ndcg-prime,map-prime,p-prime@10",
    ]);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 4 && r[0] == "A"), "{out}");
    for m in ["ndcg-prime", "map-prime", "p-prime@10"] {
        assert!(rows.iter().any(|r| r[1] == m && r[2] == "ALL"), "{out}");
    }

    let json = f.ok(&[
        "--format",
        "json",
        "eval",
        "--run",
        &f.p("A.run"),
        "--qrels",
        &f.p("qrels.tsv"),
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["run_tag"], "A");
}

#[test]
fn eval_ndcg_prime_matches_hand_computation() {
    // run C on T1 under ntcir-instance: f6 (0), f3 (2); ideal 3,3,2,0
    let f = Fixture::new();
    let dir = f.dir.path();
    fs::write(
        dir.join("q1.tsv"),
        "#scale=arqmath\nT1 0 f1 3\nT1 0 f2 3\nT1 0 f3 2\nT1 0 f6 0\n",
    )
    .unwrap();
    let json = f.ok(&[
        "--format",
        "json",
        "eval",
        "--run",
        &f.p("C.run"),
        "--qrels",
        &f.p("q1.tsv"),
        "--measures",
        "ndcg-prime",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let got = v["measures"][0]["mean"].as_f64().unwrap();
    let dcg = 0.0 / 2f64.log2() + 2.0 / 3f64.log2();
    let idcg = 3.0 / 2f64.log2() + 3.0 / 3f64.log2() + 2.0 / 4f64.log2();
    assert!((got - dcg / idcg).abs() < 1e-9, "{got}");
}

#[test]
fn pool_visually_distinct_with_cap_and_config() {
    let f = Fixture::new();
    let clusters = f.clusters();
    fs::write(
        f.path("pool.conf"),
        format!(
            "# pooling defaults\nruns = {},{},{}\nclusters={clusters}\nprimary_tags=A\nstyle=top-k\nk=1\nmeasures=map\n",
            f.p("A.run"),
            f.p("B.run"),
            f.p("C.run")
        ),
    )
    .unwrap();
    // flags override the config's style
    let out = f.ok(&[
        "--config",
        &f.p("pool.conf"),
        "pool",
        "--style",
        "visually-distinct",
        "--primary-depth",
        "25",
        "--other-depth",
        "1",
    ]);
    let t1: Vec<&str> = out
        .lines()
        .filter(|l| l.starts_with("T1\t"))
        .map(|l| l.split('\t').nth(1).unwrap())
        .collect();
    // A is primary (whole list); B and C stop at their first distinct cluster
    assert_eq!(t1, ["f1", "f3", "f6", "f2"]);

    let (code, capped, err) = f.mfr(&[
        "--config",
        &f.p("pool.conf"),
        "pool",
        "--style",
        "visually-distinct",
        "--cap",
        "1",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(err.starts_with("clusters\tclusters_over_cap"), "{err}");
    assert!(!capped.contains("\tf2\t"), "{capped}");

    // config style applies when no flag is given
    let topk = f.ok(&["--config", &f.p("pool.conf"), "pool"]);
    assert_eq!(topk.lines().filter(|l| l.starts_with("T1\t")).count(), 3);
}

#[test]
fn pool_style_needs_its_parameters() {
    let f = Fixture::new();
    let (code, _, err) = f.mfr(&["pool", "--runs", &f.p("A.run"), "--style", "round-robin"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--min-unique"));
    let (code, _, _) = f.mfr(&["pool", "--runs", &f.p("A.run"), "--style", "visually-distinct"]);
    assert_eq!(code, EXIT_INVALID);
    let out = f.ok(&[
        "pool",
        "--runs",
        &f.p("A.run"),
        "--style",
        "round-robin",
        "--min-unique",
        "2",
    ]);
    assert_eq!(out.lines().filter(|l| l.starts_with("T1\t")).count(), 2);
}

#[test]
fn judge_aggregate_modes() {
    let f = Fixture::new();
    fs::write(f.path("a.tsv"), "#scale=ntcir3\nT1 0 f1 2\nT1 0 f2 0\n").unwrap();
    fs::write(f.path("b.tsv"), "#scale=ntcir3\nT1 0 f1 2\nT1 0 f2 1\n").unwrap();
    let sum = f.ok(&[
        "judge-aggregate",
        "--mode",
        "sum",
        "--qrels",
        &f.p("a.tsv"),
        "--qrels",
        &f.p("b.tsv"),
    ]);
    assert_eq!(sum, "#scale=ntcir-agg\nT1 0 f1 4\nT1 0 f2 1\n");

    let bin = f.ok(&["judge-aggregate", "--mode", "binarize", "--qrels", &f.p("a.tsv")]);
    assert_eq!(bin, "#scale=binary\nT1 0 f1 1\nT1 0 f2 0\n");

    let clusters = f.clusters();
    let max = f.ok(&[
        "judge-aggregate",
        "--mode",
        "max",
        "--qrels",
        &f.p("qrels.tsv"),
        "--clusters",
        &clusters,
    ]);
    assert!(max.starts_with("#scale=arqmath\n#space=visual\n"), "{max}");
    assert_eq!(max.lines().filter(|l| l.starts_with("T1 ")).count(), 3);

    let (code, _, err) = f.mfr(&["judge-aggregate", "--mode", "sum", "--qrels", &f.p("a.tsv")]);
    assert_eq!(code, EXIT_INVALID, "{err}");
}

#[test]
fn kappa_from_two_files_and_one_combined_file() {
    let f = Fixture::new();
    fs::write(f.path("a.tsv"), "#scale=arqmath\nT1 0 x 3 ann\nT1 0 y 0 ann\n").unwrap();
    fs::write(f.path("b.tsv"), "#scale=arqmath\nT1 0 x 3 bo\nT1 0 y 0 bo\n").unwrap();
    assert_eq!(
        f.ok(&["kappa", "--a", &f.p("a.tsv"), "--b", &f.p("b.tsv")]),
        "kappa\n1.0000\n"
    );
    fs::write(
        f.path("both.tsv"),
        "#scale=arqmath\nT1 0 x 3 ann\nT1 0 y 0 ann\nT1 0 x 0 bo\nT1 0 y 3 bo\n",
    )
    .unwrap();
    let json = f.ok(&[
        "--format",
        "json",
        "kappa",
        "--a",
        &f.p("both.tsv"),
        "--assessor-a",
        "ann",
        "--assessor-b",
        "bo",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!((v["kappa"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn compare_strata_and_variants() {
    let f = Fixture::new();
    let runs = format!("{},{},{}", f.p("A.run"), f.p("B.run"), f.p("C.run"));
    let out = f.ok(&[
        "compare",
        "--runs",
        &runs,
        "--qrels",
        &f.p("qrels.tsv"),
        "--topics",
        &f.p("topics.tsv"),
        "--measure",
        "ndcg-prime",
        "--plot-data",
        &f.p("plot.tsv"),
    ]);
    assert!(out.starts_with("pair\ttau_b\tswaps\n"), "{out}");
    for pair in ["Low:Medium", "Low:High", "Medium:High"] {
        assert!(out.contains(pair), "{out}");
    }
    let plot = read(&f.path("plot.tsv"));
    assert_eq!(plot.lines().count(), 1 + 3 * 3, "{plot}");

    let vqrels = f.visual_qrels();
    let clusters = f.p("clusters.tsv");
    let out = f.ok(&[
        "compare",
        "--runs",
        &runs,
        "--clusters",
        &clusters,
        "--variant",
        &format!("inst:ntcir-instance:{}", f.p("qrels.tsv")),
        "--variant",
        &format!("vis:arqmath-visual:{vqrels}"),
    ]);
    assert!(out.contains("inst:vis\t"), "{out}");

    let (code, _, _) = f.mfr(&["compare", "--runs", &runs, "--variant", "only:ntcir-instance:x"]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn retrieve_query_and_topics() {
    let f = Fixture::new();
    let out = f.ok(&[
        "retrieve",
        "--corpus",
        &f.p("corpus.tsv"),
        "--query",
        "a^2+b^2=c^2",
        "--limit",
        "3",
    ]);
    let first: Vec<&str> = out.lines().next().unwrap().split(' ').collect();
    assert_eq!(first[0], "q");
    assert_eq!(first[3], "1");
    assert_eq!(first[5], "baseline-dice");
    assert!(out.lines().count() <= 3);

    let clusters = f.clusters();
    let run = f.ok(&[
        "retrieve",
        "--corpus",
        &f.p("corpus.tsv"),
        "--clusters",
        &clusters,
        "--topics",
        &f.p("topics.tsv"),
        "--out",
        &f.p("base.run"),
    ]);
    assert!(run.is_empty());
    let text = read(&f.path("base.run"));
    for t in ["T1 ", "T2 ", "T3 "] {
        assert!(text.lines().any(|l| l.starts_with(t)), "{text}");
    }
    // the query's own cluster ranks first
    let top_t2 = text
        .lines()
        .find(|l| l.starts_with("T2 "))
        .unwrap()
        .split(' ')
        .nth(2)
        .unwrap();
    let map = read(Path::new(&clusters));
    assert!(map
        .lines()
        .any(|l| l.starts_with(&format!("{top_t2}\t")) && l.ends_with("\tf4")));
}

#[test]
fn parse_reports_keys_and_trees() {
    let f = Fixture::new();
    let out = f.ok(&["parse", "--latex", "a^2+b^2=c^2", "--latex", "{a^2}+b^2=c^{2}"]);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "slt");
    assert_eq!(rows[0][2], rows[1][2]);
    assert_eq!(rows[0][4], "=(+(^(a,2),^(b,2)),^(c,2))");

    let json = f.ok(&["--format", "json", "parse", "--corpus", &f.p("corpus.tsv")]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
    assert_eq!(v[3]["id"], "f4");
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let (code, _, err) = f.mfr(&["cluster", "--corpus", &f.p("missing.tsv")]);
    assert_eq!(code, EXIT_IO, "{err}");

    fs::write(f.path("bad.tsv"), "T1 0 f1 2\n").unwrap();
    let (code, _, err) = f.mfr(&["judge-aggregate", "--mode", "binarize", "--qrels", &f.p("bad.tsv")]);
    assert_eq!(code, EXIT_INVALID, "{err}");
    assert!(err.contains("#scale"), "{err}");

    let (code, _, err) = f.mfr(&["frobnicate"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("Usage"), "{err}");

    let (code, _, err) = f.mfr(&["eval", "--run", &f.p("A.run")]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--qrels") && err.contains("Usage"), "{err}");

    let (code, _, err) = f.mfr(&[
        "eval",
        "--run",
        &f.p("A.run"),
        "--qrels",
        &f.p("qrels.tsv"),
        "--measures",
        "bogus",
    ]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("bogus"));

    fs::write(f.path("typo.conf"), "clusterz=x\n").unwrap();
    let (code, _, err) = f.mfr(&["--config", &f.p("typo.conf"), "parse", "--latex", "x"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("clusterz"));

    let (code, out, _) = f.mfr(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("judge-aggregate"));
}

#[test]
fn binary_exit_status() {
    let f = Fixture::new();
    let bin = env!("CARGO_BIN_EXE_mfr");
    let status = Command::new(bin)
        .args(["cluster", "--corpus", &f.p("nope.tsv")])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_IO));
    let ok = Command::new(bin).args(["parse", "--latex", "x^2"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("id\tkey_kind"));
}
