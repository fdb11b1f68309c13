use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_mannlab");

const TINY: &str = r#"
task = "mirror"
seed = 3

[data]
seed = 11
train_size = 64
dev_size = 16
test_size = 40
max_len = 3
test_max_len = 5
probe_len = 3

[model]
variant = "sann"
memory_cells = 8
controller_dim = 12
cell_dim = 6

[train]
batch_size = 8
max_steps = 20
eval_every = 10
"#;

fn mannlab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = mannlab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON line")
}

/// Runs a failing command and returns its exit code and parsed stderr line.
fn fails(args: &[&str]) -> (i32, Value) {
    let out = mannlab(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "stderr: {stderr}");
    (out.status.code().unwrap(), serde_json::from_str(stderr.trim_end()).expect("stderr is JSON"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Resolved configs of two runs differ only in their `out` line.
fn same_config_except_out(a: &Path, b: &Path) {
    let strip = |p: &Path| -> Vec<String> {
        let text = String::from_utf8(bytes(p.join("config.toml"))).unwrap();
        text.lines().filter(|l| !l.starts_with("out = ")).map(str::to_string).collect()
    };
    assert_eq!(strip(a), strip(b));
}

fn bytes(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

struct Fixture {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("tiny.toml");
        std::fs::write(&config, TINY).unwrap();
        Self { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, out: &str, args: &[&str]) -> Value {
        let out = self.path(out);
        let mut all = vec!["--config", s(&self.config), "--out", s(&out)];
        all.extend_from_slice(args);
        ok(&all)
    }

    fn train(&self, out: &str) -> PathBuf {
        self.run(out, &["train", "--data", s(&self.path("data"))]);
        self.path(out)
    }
}

#[test]
fn gen_writes_datasets_and_is_reproducible() {
    let f = Fixture::new();
    let line = f.run("a", &["gen"]);
    assert_eq!(line["train"], 64);
    assert_eq!(line["test"], 40);
    f.run("b", &["gen"]);
    for name in ["train.txt", "dev.txt", "test.txt"] {
        assert_eq!(bytes(f.path("a").join(name)), bytes(f.path("b").join(name)), "{name}");
    }
    same_config_except_out(&f.path("a"), &f.path("b"));
    let line = f.run("c", &["gen", "--task", "m10ae", "--lmax", "3", "--test-lmax", "4", "--train-size", "30"]);
    assert_eq!(line["task"], "m10ae");
    assert_eq!(line["train"], 30);
}

#[test]
fn train_eval_trace_pipeline_is_byte_identical_on_rerun() {
    let f = Fixture::new();
    f.run("data", &["gen"]);
    let a = f.train("a");
    let b = f.train("b");
    for name in ["metrics.csv", "checkpoint.json", "summary.json"] {
        assert_eq!(bytes(a.join(name)), bytes(b.join(name)), "{name}");
    }
    same_config_except_out(&a, &b);
    let metrics = String::from_utf8(bytes(a.join("metrics.csv"))).unwrap();
    assert!(metrics.starts_with("step,split,loss,accuracy\n"));
    assert_eq!(metrics.lines().count(), 1 + 4);

    // Rerunning from the config copied into the output is identical too.
    let copy = f.path("a").join("config.toml");
    ok(&["--config", s(&copy), "--out", s(&f.path("c")), "train"]);
    assert_eq!(bytes(a.join("checkpoint.json")), bytes(f.path("c").join("checkpoint.json")));

    let ckpt = a.join("checkpoint.json");
    for out in ["ea", "eb"] {
        let line = f.run(out, &["eval", "--checkpoint", s(&ckpt), "--data", s(&f.path("data/test.txt"))]);
        assert_eq!(line["count"], 40);
    }
    assert_eq!(bytes(f.path("ea/eval.csv")), bytes(f.path("eb/eval.csv")));
    let eval = String::from_utf8(bytes(f.path("ea/eval.csv"))).unwrap();
    assert!(eval.starts_with("bucket,count,accuracy\n"));
    assert!(eval.contains("\n5,"));

    let line = f.run("eg", &["eval", "--checkpoint", s(&ckpt), "--lmax", "6"]);
    assert_eq!(line["count"], 40);
    assert!(String::from_utf8(bytes(f.path("eg/eval.csv"))).unwrap().contains("\n6,"));

    for out in ["ta", "tb"] {
        let line = f.run(out, &["trace", "--checkpoint", s(&ckpt)]);
        assert_eq!(line["samples"], 500);
    }
    assert_eq!(bytes(f.path("ta/trace.jsonl")), bytes(f.path("tb/trace.jsonl")));
    for name in ["config.toml", "trace.jsonl"] {
        assert!(f.path("ta").join(name).exists());
    }
}

#[test]
fn probe_sets_have_500_samples() {
    let f = Fixture::new();
    let line = f.run("p", &["probe"]);
    assert_eq!(line["samples"], 500);
    let text = String::from_utf8(bytes(f.path("p/probes.txt"))).unwrap();
    assert_eq!(text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count(), 500);
    f.run("q", &["probe"]);
    assert_eq!(bytes(f.path("p/probes.txt")), bytes(f.path("q/probes.txt")));
    let line = f.run("m", &["probe", "--task", "m10ae"]);
    assert_eq!(line["samples"], 500);
}

#[test]
fn verify_writes_reports_and_scatters_deterministically() {
    let f = Fixture::new();
    f.run("data", &["gen"]);
    let run = f.train("run");
    f.run("probes", &["probe"]);
    let spec = f.path("stores_x1.toml");
    std::fs::write(
        &spec,
        "name = \"(1,0) stores x_1\"\ntask = \"mirror\"\ncheckpoint = \"run/checkpoint.json\"\n\
         probes = \"probes/probes.txt\"\nt = 1\naddr = 0\nlabel = \"x_1\"\n\n[analysis]\nmethod = \"pca\"\n",
    )
    .unwrap();
    let line = f.run("va", &["verify", "--spec", s(&spec)]);
    let report = &line["reports"][0];
    assert_eq!(report["spec"], "stores_x1");
    assert_eq!(report["count"], 500);
    assert!(["supported", "rejected", "inconclusive"].contains(&report["verdict"].as_str().unwrap()));
    assert!(f.path("va/stores_x1.svg").exists());

    f.run(
        "trace",
        &["trace", "--checkpoint", s(&run.join("checkpoint.json")), "--probes", s(&f.path("probes/probes.txt"))],
    );
    f.run("vb", &["verify", "--spec", s(&spec), "--traces", s(&f.path("trace/trace.jsonl"))]);
    assert_eq!(bytes(f.path("va/stores_x1.report.json")), bytes(f.path("vb/stores_x1.report.json")));
    assert_eq!(bytes(f.path("va/stores_x1.svg")), bytes(f.path("vb/stores_x1.svg")));
}

#[test]
fn plots_render_from_every_input_kind() {
    let f = Fixture::new();
    f.run("data", &["gen"]);
    let run = f.train("run");
    let ckpt = run.join("checkpoint.json");
    f.run("eval", &["eval", "--checkpoint", s(&ckpt)]);
    f.run("trace", &["trace", "--checkpoint", s(&ckpt)]);
    let trace = f.path("trace/trace.jsonl");
    let cases: [(&str, PathBuf, &[&str]); 5] = [
        ("learning", run.join("metrics.csv"), &["learning.svg"]),
        ("accuracy", f.path("eval/eval.csv"), &["accuracy.svg"]),
        ("saturation", trace.clone(), &["saturation.svg", "saturation.csv"]),
        ("policy", trace.clone(), &["policy.svg", "policy.csv"]),
        ("heatmap", trace, &["heatmap_t00.svg", "heatmap_t06.svg"]),
    ];
    for (kind, input, files) in cases {
        let out = format!("plot_{kind}");
        f.run(&out, &["plot", kind, "--input", s(&input)]);
        for file in files {
            let content = String::from_utf8(bytes(f.path(&out).join(file))).unwrap();
            if file.ends_with(".svg") {
                assert!(content.starts_with("<svg") && content.trim_end().ends_with("</svg>"), "{kind}/{file}");
            }
        }
    }
    let policy = String::from_utf8(bytes(f.path("plot_policy/policy.csv"))).unwrap();
    assert!(policy.lines().next().unwrap().ends_with("push,pops"));
}

#[test]
fn plot_of_empty_metrics_fails_without_writing_svg() {
    let f = Fixture::new();
    let empty = f.path("metrics.csv");
    std::fs::write(&empty, "step,split,loss,accuracy\n").unwrap();
    let out = f.path("plot");
    let (code, err) = fails(&["--out", s(&out), "plot", "learning", "--input", s(&empty)]);
    assert_eq!(code, 3);
    assert_eq!(err["error"], "data");
    assert_eq!(err["code"], 3);
    let written: Vec<_> = std::fs::read_dir(&out).map(|d| d.flatten().map(|e| e.path()).collect()).unwrap_or_default();
    assert!(written.iter().all(|p| p.extension().is_none_or(|e| e != "svg" && e != "partial")), "{written:?}");
}

#[test]
fn config_errors_exit_with_code_2() {
    let f = Fixture::new();
    let bad = f.path("bad.toml");
    std::fs::write(&bad, "bogus = 1\n").unwrap();
    let (code, err) = fails(&["--config", s(&bad), "--out", s(&f.path("o")), "gen"]);
    assert_eq!((code, err["error"].as_str()), (2, Some("config")));

    let (code, _) = fails(&["--config", s(&f.path("missing.toml")), "gen"]);
    assert_eq!(code, 2);

    let (code, _) = fails(&["gen", "--no-such-flag"]);
    assert_eq!(code, 2);

    let (code, _) = fails(&["--out", s(&f.path("o")), "gen", "--lmax", "0"]);
    assert_eq!(code, 2);

    let (code, err) = fails(&["--out", s(&f.path("o")), "eval"]);
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("checkpoint"));
}

#[test]
fn data_errors_exit_with_code_3() {
    let f = Fixture::new();
    let (code, err) =
        fails(&["--config", s(&f.config), "--out", s(&f.path("o")), "train", "--data", s(&f.path("nowhere"))]);
    assert_eq!((code, err["error"].as_str()), (3, Some("data")));

    let garbage = f.path("checkpoint.json");
    std::fs::write(&garbage, "{not json").unwrap();
    let (code, _) = fails(&["--out", s(&f.path("o")), "eval", "--checkpoint", s(&garbage)]);
    assert_eq!(code, 3);

    // Mirror data handed to an M10AE run.
    f.run("data", &["gen"]);
    let (code, err) = fails(&[
        "--config",
        s(&f.config),
        "--out",
        s(&f.path("o")),
        "train",
        "--task",
        "m10ae",
        "--data",
        s(&f.path("data")),
    ]);
    assert_eq!(code, 3);
    assert!(err["message"].as_str().unwrap().contains("mirror"));
}

#[test]
fn divergence_exits_with_code_4_and_keeps_outputs() {
    let f = Fixture::new();
    f.run("data", &["gen"]);
    let wild = f.path("wild.toml");
    std::fs::write(
        &wild,
        TINY.replace("max_steps = 20", "max_steps = 20\nlr = 1e30\nskip_budget = 0\nclip_norm = 1e30"),
    )
    .unwrap();
    let out = f.path("o");
    let (code, err) = fails(&["--config", s(&wild), "--out", s(&out), "train", "--data", s(&f.path("data"))]);
    assert_eq!((code, err["error"].as_str()), (4, Some("numerical")));
    assert!(out.join("checkpoint.json").exists());
    assert!(out.join("config.toml").exists());
}

#[test]
fn help_lists_every_subcommand() {
    let out = mannlab(&["--help"]);
    assert!(out.status.success());
    let help = String::from_utf8(out.stdout).unwrap();
    for cmd in ["gen", "train", "eval", "trace", "probe", "verify", "plot"] {
        assert!(help.contains(cmd), "{cmd}");
    }
}
