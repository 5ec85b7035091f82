use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ms2embed::spectra::serialize_mgf;
use ms2embed::synthetic::{library, SyntheticConfig};

const BIN: &str = env!("CARGO_BIN_EXE_ms2embed");

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(extra: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let lib = library(&SyntheticConfig {
            structures: 12,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let p = dir.path();
        std::fs::write(p.join("lib.mgf"), serialize_mgf(&lib.spectra)).unwrap();
        std::fs::write(p.join("fp.tsv"), lib.labels.fingerprint_text()).unwrap();
        std::fs::write(p.join("props.tsv"), lib.labels.property_text()).unwrap();
        let d = p.display();
        std::fs::write(
            p.join("run.cfg"),
            format!(
                "schema_version = 1\n\
                 data.spectra = {d}/lib.mgf\n\
                 data.fingerprints = {d}/fp.tsv\n\
                 data.properties = {d}/props.tsv\n\
                 output_dir = {d}/out\n\
                 split.novel_structures = 2\n\
                 split.known_spectra = 4\n\
                 encoder.d = 16\n\
                 encoder.layers = 1\n\
                 encoder.heads = 2\n\
                 encoder.hidden = 32\n\
                 train.epochs = 2\n\
                 train.batch_size = 8\n\
                 train.pairs_per_epoch = 16\n\
                 train.eval_pairs = 40\n\
                 baseline.bin_width = 1.0\n\
                 {extra}"
            ),
        )
        .unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .arg("--config")
            .arg(self.path("run.cfg"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path("out").join(name)).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn siamese_pipeline_writes_every_artifact() {
    let ws = Workspace::new("");
    ws.ok(&["prepare"]);
    for f in ["manifest.tsv", "rejections.tsv", "cleaned.mgf", "label_audit.tsv"] {
        assert!(ws.path("out").join(f).is_file(), "{f}");
    }
    ws.ok(&["train"]);
    let log = ws.read("train_log.tsv");
    assert!(log.starts_with("# eval_pairs"));
    assert_eq!(log.lines().count(), 4);
    assert!(ws.path("out/model.ckpt.cfg").is_file());
    ws.ok(&["eval", "--set", "eval.modified_cosine=true"]);
    let report = ws.read("eval_report.tsv");
    assert!(report.starts_with("query_set\tmatch\taccuracy\tquery_structures\n"));
    assert!(report.contains("known\texact"));
    assert!(report.contains("novel\tapproximate"));
    assert!(report.contains("known_modified_cosine\texact"));
    let queries = ws.path("lib.mgf");
    ws.ok(&["search", "--set", &format!("search.queries={}", queries.display()), "--set", "search.k=2"]);
    let hits = ws.read("search_results.tsv");
    assert_eq!(hits.lines().next().unwrap(), "query_id\trank\thit_id\tstructure_id\tscore");
    assert!(hits.lines().count() > 2);
}

#[test]
fn property_modes_train_eval_and_predict() {
    let ws = Workspace::new("");
    ws.ok(&["prepare"]);
    let input = format!("predict.input={}", ws.path("lib.mgf").display());
    for mode in ["properties", "properties-baseline"] {
        ws.ok(&["--mode", mode, "train"]);
        assert!(ws.read("property_report.tsv").contains(&format!("# model={mode}")));
        ws.ok(&["--mode", mode, "eval"]);
        assert!(ws.read("eval_report.tsv").contains("average"));
        ws.ok(&["--mode", mode, "--set", &input, "predict"]);
        let preds = ws.read("predictions.tsv");
        assert!(preds.starts_with("spectrum_id\tlogp"));
        assert_eq!(preds.lines().count(), 49);
    }
}

#[test]
fn token_embedding_and_half_precision_train() {
    let ws = Workspace::new("");
    ws.ok(&["prepare"]);
    ws.ok(&["--embedding", "token", "train"]);
    ws.ok(&["--embedding", "token", "eval"]);
    ws.ok(&["--precision", "16", "train"]);
    ws.ok(&["--precision", "16", "eval"]);
}

#[test]
fn checkpoint_from_another_config_is_refused() {
    let ws = Workspace::new("");
    ws.ok(&["prepare"]);
    ws.ok(&["train"]);
    let out = ws.run(&["--precision", "16", "eval"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest mismatch"));
    let out = ws.run(&["--mode", "properties", "eval"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn configuration_errors_exit_with_2() {
    let ws = Workspace::new("");
    let missing = Command::new(BIN).args(["--config", "/nonexistent.cfg", "prepare"]).output().unwrap();
    assert_eq!(code(&missing), 2);
    assert_eq!(code(&ws.run(&["--set", "bogus.key=1", "prepare"])), 2);
    assert_eq!(code(&ws.run(&["--precision", "8", "prepare"])), 2);
    assert_eq!(code(&ws.run(&["--set", "schema_version=2", "prepare"])), 2);
    assert_eq!(code(&ws.run(&["--set", "encoder.heads=3", "prepare"])), 2);
    // Commands that need a prepared dataset or checkpoint.
    assert_eq!(code(&ws.run(&["train"])), 2);
    assert_eq!(code(&ws.run(&["eval"])), 2);
    ws.ok(&["prepare"]);
    ws.ok(&["train"]);
    let input = format!("predict.input={}", ws.path("lib.mgf").display());
    assert_eq!(code(&ws.run(&["--set", &input, "predict"])), 2);
}

#[test]
fn malformed_inputs_exit_with_2() {
    let ws = Workspace::new("");
    std::fs::write(ws.path("lib.mgf"), "BEGIN IONS\nTITLE=x\nPEPMASS=abc\nEND IONS\n").unwrap();
    let out = ws.run(&["prepare"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lib.mgf"));

    let ws = Workspace::new("");
    ws.ok(&["prepare"]);
    ws.ok(&["train"]);
    let ckpt = ws.path("out/model.ckpt");
    let mut bytes = std::fs::read(&ckpt).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0xff;
    bytes.truncate(n - 1);
    std::fs::write(&ckpt, bytes).unwrap();
    assert_eq!(code(&ws.run(&["eval"])), 2);
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .filter(|(n, _)| n != "train_log.tsv")
        .collect();
    v.sort();
    v
}

#[test]
fn thread_count_does_not_change_results() {
    let a = Workspace::new("");
    let b = Workspace::new("");
    for (ws, threads) in [(&a, "1"), (&b, "3")] {
        ws.ok(&["--threads", threads, "--seed", "4", "prepare"]);
        ws.ok(&["--threads", threads, "--seed", "4", "train"]);
        ws.ok(&["--threads", threads, "--seed", "4", "eval"]);
    }
    let (x, y) = (outputs(&a.path("out")), outputs(&b.path("out")));
    assert_eq!(x.len(), y.len());
    for (p, q) in x.iter().zip(&y) {
        assert_eq!(p, q, "{} differs", p.0);
    }
}

#[test]
fn export_writes_grid_rows() {
    let ws = Workspace::new("export.count = 100\nexport.end = 500\n");
    ws.ok(&["--precision", "16", "export-embeddings"]);
    let text = ws.read("embeddings.csv");
    assert_eq!(text.lines().count(), 101);
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("mz,frac_mz,precision,e0,e1"));
    assert!(text.lines().nth(1).unwrap().contains("binary16"));
    ws.ok(&["prepare"]);
    ws.ok(&["--mode", "properties", "train"]);
    ws.ok(&["--mode", "properties", "--set", "export.source=learned", "export-embeddings"]);
    assert_eq!(code(&ws.run(&["--set", "export.source=learned", "export-embeddings"])), 2);
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let out = Command::new(BIN).arg(flag).output().unwrap();
        assert!(out.status.success());
    }
}
