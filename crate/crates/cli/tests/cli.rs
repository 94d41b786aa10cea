use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mars_cli::cli::{resolve, Common};
use mars_cli::commands::{self, Query, BUILD_REPORT, PATHS_FILE, RECORDS_FILE, SPLIT_FILE, TRAIN_LOG, VOCAB_FILE};
use mars_cli::{CliError, RunConfig, SplitName};
use mars_core::jsonl::Header;
use mars_model::eval::PredictionRow;
use mars_model::{load_checkpoint, Flavor};

const SILYL_ESTER: &str = "[CH3:1][C:2](=[O:3])Cl.[OH:4][Si:5]([CH3:6])([CH3:7])[CH3:8]>>\
                           [CH3:1][C:2](=[O:3])[O:4][Si:5]([CH3:6])([CH3:7])[CH3:8]";

fn desk_path() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/desk_corpus.csv"))
}

fn mars(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mars")).args(args).output().expect("binary runs")
}

/// The first `n` desk rows as a reaction file.
fn desk_head(dir: &Path, n: usize) -> PathBuf {
    let text = fs::read_to_string(desk_path()).unwrap();
    let head: Vec<&str> = text.lines().take(n + 1).collect();
    let path = dir.join("head.csv");
    fs::write(&path, head.join("\n") + "\n").unwrap();
    path
}

fn tiny_config(dir: &Path, input: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.data.input = Some(input.to_path_buf());
    cfg.data.out_dir = dir.join("run");
    cfg.model.encoder.layers = 2;
    cfg.model.encoder.heads = 2;
    cfg.model.encoder.dim = 16;
    cfg.model.decoder.motif_embed = 16;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 8;
    cfg
}

fn header(path: &Path) -> Header {
    let first = fs::read_to_string(path).unwrap().lines().next().unwrap().to_string();
    serde_json::from_str(&first).unwrap()
}

#[test]
fn run_config_round_trips_through_toml() {
    let mut cfg = RunConfig::default();
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    cfg.data.input = Some("in.csv".into());
    cfg.data.max_train_records = Some(50);
    cfg.model.encoder.flavor = Flavor::Conv;
    cfg.model.use_class = true;
    cfg.train.lr = 1e-3;
    cfg.beam.max_steps = Some(12);
    cfg.eval.split = SplitName::Valid;
    cfg.eval.limit = Some(3);
    let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn unknown_keys_are_rejected() {
    for doc in ["colour = 1", "[data]\nouput = \"x\"", "[model.encoder]\ndims = 8", "[beam]\nwidth = 3"] {
        assert!(matches!(RunConfig::from_toml(doc), Err(CliError::Usage(_))), "{doc}");
    }
    assert_eq!(RunConfig::from_toml("[beam]\nk = 3").unwrap().beam.k, 3);
}

#[test]
fn defaults_and_hash() {
    let cfg = RunConfig::default();
    assert_eq!(cfg.beam.k, 10);
    assert_eq!(cfg.hash(), RunConfig::default().hash());
    assert_eq!(cfg.hash().len(), 64);
    let mut other = cfg.clone();
    other.beam.fan_out = 21;
    assert_ne!(other.hash(), cfg.hash());
}

#[test]
fn overrides_apply_in_precedence_order() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    fs::write(&file, "[beam]\nk = 5\n[train]\nseed = 1\nworkers = 2\n").unwrap();
    let common = Common {
        config: Some(file.clone()),
        set: vec!["beam.k=7".into(), "model.encoder.flavor=\"conv\"".into(), "train.seed=3".into()],
        seed: Some(9),
        ..Common::default()
    };
    let cfg = resolve(&common).unwrap();
    assert_eq!(cfg.beam.k, 7);
    assert_eq!(cfg.model.encoder.flavor, Flavor::Conv);
    assert_eq!((cfg.train.seed, cfg.model.seed, cfg.data.split_seed), (9, 9, 9));
    assert_eq!(cfg.train.workers, 2);

    let bare = Common { set: vec!["data.out_dir=elsewhere".into()], ..Common::default() };
    assert_eq!(resolve(&bare).unwrap().data.out_dir, PathBuf::from("elsewhere"));
    for bad in ["beam.width=3", "beam.k", "beam.k=\"ten\""] {
        let c = Common { set: vec![bad.into()], ..Common::default() };
        assert!(matches!(resolve(&c), Err(CliError::Usage(_))), "{bad}");
    }
}

#[test]
fn pipeline_stamps_the_config_hash_and_rebuilds_identically() {
    let dir = tempfile::tempdir().unwrap();
    let input = desk_head(dir.path(), 60);
    let cfg = tiny_config(dir.path(), &input);
    let hash = cfg.hash();

    let ingest = commands::ingest(&cfg).unwrap();
    assert_eq!(ingest.accepted + ingest.rejected.values().sum::<usize>(), 60);
    assert_eq!(ingest.train + ingest.valid + ingest.test, ingest.accepted);
    let build = commands::build(&cfg).unwrap();
    assert_eq!(build.replayed, build.splits["train"].built);
    assert!(build.mismatches.is_empty());
    let snapshot: Vec<Vec<u8>> =
        [RECORDS_FILE, SPLIT_FILE, VOCAB_FILE, PATHS_FILE, BUILD_REPORT].iter().map(|f| fs::read(cfg.out(f)).unwrap()).collect();
    commands::ingest(&cfg).unwrap();
    commands::build(&cfg).unwrap();
    for (f, bytes) in [RECORDS_FILE, SPLIT_FILE, VOCAB_FILE, PATHS_FILE, BUILD_REPORT].iter().zip(&snapshot) {
        assert_eq!(&fs::read(cfg.out(f)).unwrap(), bytes, "{f}");
    }

    let train = commands::train(&cfg, false).unwrap();
    assert_eq!(train.epochs, 2);
    let ck = load_checkpoint::<f32>(&train.checkpoint).unwrap();

    let mut ecfg = cfg.clone();
    ecfg.eval.split = SplitName::Train;
    ecfg.eval.limit = Some(6);
    let eval = commands::eval(&ecfg, &train.checkpoint).unwrap();
    let keys: Vec<&str> = eval.top_k_accuracy.keys().map(String::as_str).collect();
    assert_eq!(keys, ["1", "10", "3", "5"]);
    assert_eq!(eval.records, 6);
    assert_eq!(eval.checkpoint_config_hash, hash);
    let acc: Vec<f64> = ["1", "3", "5", "10"].iter().map(|n| eval.top_k_accuracy[*n]).collect();
    assert!(acc.windows(2).all(|w| w[0] <= w[1]));
    assert!(eval.table().contains("top-10"));

    for f in [RECORDS_FILE, VOCAB_FILE, PATHS_FILE] {
        assert_eq!(header(&cfg.out(f)).get::<String>("config_hash").as_deref(), Some(hash.as_str()), "{f}");
    }
    for f in [SPLIT_FILE, BUILD_REPORT, "ingest_report.json"] {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(cfg.out(f)).unwrap()).unwrap();
        assert_eq!(v["config_hash"], hash.as_str(), "{f}");
    }
    assert_eq!(ck.config_hash, hash);
    for line in fs::read_to_string(cfg.out(TRAIN_LOG)).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config_hash"], hash.as_str());
    }
    let eval_json: serde_json::Value = serde_json::from_slice(&fs::read(ecfg.out("eval-train.json")).unwrap()).unwrap();
    assert_eq!(eval_json["config_hash"], ecfg.hash().as_str());
    let rows: Vec<PredictionRow> = fs::read_to_string(ecfg.out("predictions-train.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.config_hash == ecfg.hash() && r.rank >= 1 && r.rank <= 10 && r.log_prob <= 0.0));

    let mut parallel = ecfg.clone();
    parallel.eval.workers = 3;
    let again = commands::eval(&parallel, &train.checkpoint).unwrap();
    assert_eq!(again.top_k_accuracy, eval.top_k_accuracy);
    let rows_again: Vec<PredictionRow> = fs::read_to_string(parallel.out("predictions-train.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let strip = |rs: &[PredictionRow]| rs.iter().map(|r| (r.id.clone(), r.rank, r.reactants.clone(), r.log_prob)).collect::<Vec<_>>();
    assert_eq!(strip(&rows_again), strip(&rows));
}

#[test]
fn resumed_training_matches_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = desk_head(dir.path(), 30);
    let mut cfg = tiny_config(dir.path(), &input);
    cfg.train.epochs = 3;
    commands::ingest(&cfg).unwrap();
    commands::build(&cfg).unwrap();
    commands::train(&cfg, false).unwrap();
    let full = load_checkpoint::<f32>(&cfg.out("checkpoints/last.ckpt")).unwrap();

    let mut short = cfg.clone();
    short.train.epochs = 1;
    commands::train(&short, false).unwrap();
    commands::train(&cfg, true).unwrap();
    let resumed = load_checkpoint::<f32>(&cfg.out("checkpoints/last.ckpt")).unwrap();
    assert_eq!(resumed.model.params, full.model.params);
    assert_eq!(resumed.state, full.state);
}

#[test]
fn predict_after_overfitting_one_record_ranks_its_reactants_first() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("one.csv");
    fs::write(&input, format!("id,class,rxn\nsilyl,,{SILYL_ESTER}\n")).unwrap();
    let mut cfg = RunConfig::default();
    cfg.data.input = Some(input);
    cfg.data.out_dir = dir.path().join("run");
    cfg.model.encoder.layers = 2;
    cfg.model.encoder.heads = 2;
    cfg.model.encoder.dim = 32;
    cfg.model.decoder = cfg.model.decoder.without_dropout();
    cfg.model.decoder.motif_embed = 32;
    cfg.model.seed = 7;
    cfg.train.epochs = 150;
    cfg.train.batch_size = 1;
    cfg.train.lr = 1e-3;
    cfg.train.restart_epochs = 1e9;
    commands::ingest(&cfg).unwrap();
    commands::build(&cfg).unwrap();
    let ck = commands::train(&cfg, false).unwrap().checkpoint;

    let queries = [Query { id: "q".into(), smiles: "CC(=O)O[Si](C)(C)C".into(), class: None }];
    let mut out = Vec::new();
    let rows = commands::predict(&cfg, &ck, None, &queries, &mut out).unwrap();
    assert_eq!(rows[0].rank, 1);
    assert_eq!(rows[0].reactants, "CC(=O)Cl.C[Si](C)(C)O");
    assert!(rows.len() <= 10);
    let written: Vec<PredictionRow> = String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(written, rows);

    let file = dir.path().join("queries.txt");
    fs::write(&file, "# products\nfirst\tCC(=O)O[Si](C)(C)C\n\nC[Si](C)(C)OC(C)=O\n").unwrap();
    let qs = commands::read_queries(&file, None).unwrap();
    assert_eq!(qs.iter().map(|q| q.id.as_str()).collect::<Vec<_>>(), ["first", "line4"]);
    let both = commands::predict(&cfg, &ck, None, &qs, &mut Vec::new()).unwrap();
    let firsts: BTreeMap<&str, &str> = both.iter().filter(|r| r.rank == 1).map(|r| (r.id.as_str(), r.reactants.as_str())).collect();
    assert_eq!(firsts["first"], firsts["line4"]);

    let bad = [Query { id: "bad".into(), smiles: "C1CC".into(), class: None }];
    assert!(matches!(commands::predict(&cfg, &ck, None, &bad, &mut Vec::new()), Err(CliError::Data(_))));
}

#[test]
fn canon_lists_every_line_and_never_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("smiles.txt");
    fs::write(&input, "OCC\n\nC(C)(C)(C)(C)C\nc1ccccc1O\nnot a smiles\n").unwrap();
    let rows = commands::canon(&input).unwrap();
    assert_eq!(rows.iter().map(|r| r.line).collect::<Vec<_>>(), [1, 3, 4, 5]);
    assert_eq!(rows[0].canonical, "CCO");
    assert!(rows[0].error.is_empty());
    assert!(rows[1].canonical.is_empty() && !rows[1].error.is_empty());
    assert_eq!(rows[2].canonical, mars_chem::canonicalize("Oc1ccccc1").unwrap());
    assert!(!rows[3].error.is_empty());
    let mut csv_out = Vec::new();
    commands::write_canon_csv(&rows, &mut csv_out).unwrap();
    let text = String::from_utf8(csv_out).unwrap();
    assert_eq!(text.lines().next(), Some("line,input,canonical,error"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(mars(&["--help"]).status.code(), Some(0));
    assert_eq!(mars(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mars(&["eval", "--split", "nowhere"]).status.code(), Some(1));

    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "[beam]\nwidth = 3\n").unwrap();
    assert_eq!(mars(&["build", "-c", bad_cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(mars(&["ingest", "--out-dir", d]).status.code(), Some(1));

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = mars(&["ingest", "--input", empty.to_str().unwrap(), "--out-dir", d]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
    let missing = dir.path().join("missing");
    assert_eq!(mars(&["build", "--out-dir", missing.to_str().unwrap()]).status.code(), Some(2));

    let input = desk_head(dir.path(), 40);
    let run = dir.path().join("run");
    let run = run.to_str().unwrap();
    assert_eq!(mars(&["ingest", "--input", input.to_str().unwrap(), "--out-dir", run]).status.code(), Some(0));
    let clean = mars(&["roundtrip", "--out-dir", run]);
    assert_eq!(clean.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&clean.stdout).contains("replayed"));

    // An extra unmapped reactant cannot be produced by any path.
    let store = Path::new(run).join(RECORDS_FILE);
    let text = fs::read_to_string(&store).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
    let id = rec["id"].as_str().unwrap().to_string();
    rec["reactants"].as_array_mut().unwrap().push("O".into());
    lines[1] = rec.to_string();
    fs::write(&store, lines.join("\n") + "\n").unwrap();
    let corrupt = mars(&["roundtrip", "--out-dir", run]);
    assert_eq!(corrupt.status.code(), Some(3));
    let stdout = String::from_utf8_lossy(&corrupt.stdout);
    assert!(stdout.contains(&id) && stdout.contains("  - O"), "{stdout}");
}
