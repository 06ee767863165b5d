use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use coverage_core::eval::fit_document;
use coverage_core::features::{column_index, extract_corpus_features, feature_names, FeatureKind, FeatureTable, FeatureVector, Window};
use coverage_core::gmm::{FitConfig, ModelDocument};
use coverage_core::ingest::{write_plays_csv, PlayCorpus, PlayMeta};
use coverage_core::report::{predict, read_predictions_csv, write_predictions_csv, Prediction};
use coverage_core::synth::{self, generate_corpus, SimConfig};
use coverage_core::Id;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

fn coverage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coverage"))
        .args(args)
        .env_remove(coverage_cli::SEED_ENV)
        .env_remove(coverage_cli::THREADS_ENV)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = coverage(args);
    assert!(out.status.success(), "coverage {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = coverage(args);
    assert_eq!(out.status.code(), Some(code), "coverage {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn with_suffix(p: &Path, suffix: &str) -> String {
    format!("{}{suffix}", s(p))
}

fn rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_owned).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(str::to_owned)).collect()).collect()
}

/// Synthesizes and extracts a corpus into `dir`, returning the feature CSV.
fn corpus(dir: &Path, name: &str, flags: &[&str]) -> PathBuf {
    let tracking = dir.join(format!("{name}.csv"));
    let features = dir.join(format!("{name}.features.csv"));
    let mut args = vec!["synth", "--output", s(&tracking)];
    args.extend(flags);
    ok(&args);
    ok(&["extract", "--input", s(&tracking), "--config", &with_suffix(&tracking, ".ingest.toml"), "--output", s(&features)]);
    features
}

/// Default corpus features plus per-window models, built once.
fn default_fixture() -> &'static (TempDir, PathBuf, PathBuf) {
    static FIXTURE: OnceLock<(TempDir, PathBuf, PathBuf)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let features = corpus(dir.path(), "default", &[]);
        let models = dir.path().join("models");
        ok(&["fit-windows", "--input", s(&features), "--output", s(&models)]);
        (dir, features, models)
    })
}

fn prediction(i: usize, man: bool, quarter: u8) -> Prediction {
    Prediction {
        game_id: Id::from(1 + i as u64 / 50),
        play_id: Id::from(i as u64),
        player_id: Id::from(100 + i as u64 % 30),
        week: 1,
        p_man: if man { 1.0 } else { 0.0 },
        p_zone: if man { 0.0 } else { 1.0 },
        label: if man { "MAN" } else { "ZONE" }.into(),
        meta: PlayMeta { defense_team: Some(format!("T{}", i % 7)), quarter: Some(quarter), down: Some(1 + (i % 3) as u8) },
        window: "ALL".into(),
    }
}

fn write_preds(path: &Path, preds: &[Prediction]) {
    write_predictions_csv(File::create(path).unwrap(), preds).unwrap();
}

// ---------------------------------------------------------------------------
// exit codes

#[test]
fn help_succeeds_and_bad_usage_exits_one() {
    assert!(ok(&["--help"]).contains("select-g"));
    fails(&["no-such-command"], 1);
    fails(&["fit", "--input", "x.csv"], 1);
}

#[test]
fn unreadable_input_exits_two() {
    let dir = TempDir::new().unwrap();
    fails(&["extract", "--input", s(&dir.path().join("absent.csv")), "--output", s(&dir.path().join("f.csv"))], 2);
    fails(&["fit", "--input", s(&dir.path().join("absent.csv")), "--model", s(&dir.path().join("m.json"))], 2);
}

#[test]
fn thread_override_must_be_positive() {
    let out = Command::new(env!("CARGO_BIN_EXE_coverage"))
        .args(["report", "--input", "x", "--group-by", "team", "--output", "y"])
        .env(coverage_cli::THREADS_ENV, "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

// ---------------------------------------------------------------------------
// synth and extract

#[test]
fn seed_comes_from_flag_or_environment() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    ok(&["synth", "--n-plays", "6", "--seed", "7", "--output", s(&a)]);
    let env = Command::new(env!("CARGO_BIN_EXE_coverage"))
        .args(["synth", "--n-plays", "6", "--output", s(&b)])
        .env(coverage_cli::SEED_ENV, "7")
        .output()
        .unwrap();
    assert!(env.status.success());
    ok(&["synth", "--n-plays", "6", "--output", s(&c)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn empty_input_reports_no_plays() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    File::create(&empty).unwrap();
    let err = fails(&["extract", "--input", s(&empty), "--output", s(&dir.path().join("f.csv"))], 2);
    assert!(err.contains("no plays parsed"), "{err}");
}

#[test]
fn extract_writes_one_row_per_cornerback_and_is_repeatable() {
    let dir = TempDir::new().unwrap();
    let features = corpus(dir.path(), "small", &["--n-plays", "30"]);
    let first = fs::read(&features).unwrap();
    let quality = fs::read_to_string(with_suffix(&features, ".quality.txt")).unwrap();
    assert!(!quality.is_empty());

    let table = FeatureTable::read_csv(BufReader::new(File::open(&features).unwrap())).unwrap();
    assert_eq!(table.names, feature_names());
    assert_eq!(table.len(), 60);

    let tracking = dir.path().join("small.csv");
    ok(&["extract", "--input", s(&tracking), "--config", &with_suffix(&tracking, ".ingest.toml"), "--output", s(&features)]);
    assert_eq!(fs::read(&features).unwrap(), first);
}

// ---------------------------------------------------------------------------
// fit and predict

#[test]
fn fit_names_two_components_and_leaves_one_unnamed() {
    let (dir, features, _) = default_fixture();
    let two = dir.path().join("fit2.json");
    let one = dir.path().join("fit1.json");
    ok(&["fit", "--input", s(features), "--model", s(&two), "--restarts", "3"]);
    ok(&["fit", "--input", s(features), "--model", s(&one), "--g", "1"]);

    let doc2 = ModelDocument::read(File::open(&two).unwrap()).unwrap();
    let labels = doc2.labels.unwrap();
    assert_eq!(labels.status, "heuristic");
    let mut names = labels.labels.clone();
    names.sort();
    assert_eq!(names, ["MAN", "ZONE"]);

    let doc1 = ModelDocument::read(File::open(&one).unwrap()).unwrap();
    assert_eq!(doc1.model.n_components(), 1);
    assert_eq!(doc1.labels.unwrap().status, "none");
    fails(&["predict", "--input", s(features), "--model", s(&one), "--output", s(&dir.path().join("p1.csv"))], 2);
}

#[test]
fn invalid_fit_settings_exit_one_and_too_few_rows_exit_three() {
    let dir = TempDir::new().unwrap();
    let tiny = dir.path().join("tiny.csv");
    let rows = (0..2u64)
        .map(|i| FeatureVector {
            game_id: Id::from(1u64),
            play_id: Id::from(i),
            player_id: Id::from(1u64),
            week: 1,
            values: vec![i as f64; 55],
            missing: vec![false; 55],
        })
        .collect();
    FeatureTable::standard(rows).write_csv(File::create(&tiny).unwrap()).unwrap();
    let model = dir.path().join("m.json");
    fails(&["fit", "--input", s(&tiny), "--model", s(&model), "--restarts", "0"], 1);
    fails(&["fit", "--input", s(&tiny), "--model", s(&model), "--window", "HALFTIME"], 1);
    fails(&["fit", "--input", s(&tiny), "--model", s(&model), "--g", "2"], 3);
}

#[test]
fn cli_pipeline_matches_library_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = SimConfig { n_plays: 120, ..SimConfig::default() };
    let features = corpus(dir.path(), "c", &["--n-plays", "120"]);
    let model = dir.path().join("m.json");
    let preds_path = dir.path().join("p.csv");
    ok(&["fit", "--input", s(&features), "--model", s(&model), "--restarts", "4"]);
    ok(&["predict", "--input", s(&features), "--model", s(&model), "--output", s(&preds_path)]);
    let from_cli = read_predictions_csv(File::open(&preds_path).unwrap()).unwrap();

    let labeled = generate_corpus(&cfg).unwrap();
    let corpus = PlayCorpus::new(synth::plays(&labeled));
    let table = FeatureTable::standard(extract_corpus_features(&corpus, &["CB".to_string()].into()));
    let fit_cfg = FitConfig { n_restarts: 4, ..FitConfig::default() };
    let doc = fit_document(&table, &fit_cfg, None).unwrap();
    let meta = corpus.plays().iter().map(|p| ((p.game_id.clone(), p.play_id.clone()), p.meta.clone())).collect();
    let in_process = predict(&doc, &table, &meta).unwrap();

    assert_eq!(from_cli, in_process);
}

// ---------------------------------------------------------------------------
// select-g and influence

#[test]
fn select_g_needs_two_weeks() {
    let dir = TempDir::new().unwrap();
    let features = corpus(dir.path(), "one_week", &["--n-plays", "30", "--weeks", "1"]);
    let err = fails(&["select-g", "--input", s(&features), "--output", s(&dir.path().join("cv"))], 2);
    assert!(err.contains("2 weeks"), "{err}");
    fails(&["select-g", "--input", s(&features), "--g-min", "4", "--g-max", "3", "--output", s(&dir.path().join("cv"))], 1);
}

#[test]
fn select_g_singleton_range_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let features = corpus(dir.path(), "three_weeks", &["--n-plays", "90", "--weeks", "3"]);
    let out_dir = dir.path().join("cv");
    let stdout = ok(&["select-g", "--input", s(&features), "--g-min", "2", "--g-max", "2", "--restarts", "2", "--output", s(&out_dir)]);
    assert!(stdout.contains("G* = 2"), "{stdout}");
    let summary = rows(&out_dir.join("cv_summary.csv"));
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0]["g"], "2");
    assert_eq!(rows(&out_dir.join("cv_folds.csv")).len(), 3);
    assert_eq!(rows(&out_dir.join("cv_series.csv")).len(), 1);
}

fn planted_table(path: &Path) {
    // The class split is carried by all five OFF_DIR_VAR columns, so any one
    // of them is redundant while the family as a whole is not.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let planted: Vec<usize> = Window::ALL.iter().map(|&w| column_index(w, FeatureKind::OffDirVar)).collect();
    let rows = (0..900u64)
        .map(|i| {
            let mut values: Vec<f64> = (0..55).map(|_| rng.sample(StandardNormal)).collect();
            for &c in &planted {
                values[c] += if i % 2 == 0 { 3.0 } else { -3.0 };
            }
            FeatureVector {
                game_id: Id::from(i / 300 + 1),
                play_id: Id::from(i),
                player_id: Id::from(1u64),
                week: (i / 300 + 1) as u32,
                values,
                missing: vec![false; 55],
            }
        })
        .collect();
    FeatureTable::standard(rows).write_csv(File::create(path).unwrap()).unwrap();
}

#[test]
fn influence_writes_top_and_full_views() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("planted.csv");
    planted_table(&input);
    let fit = ["--restarts", "1", "--max-iter", "50"];

    let cols = dir.path().join("cols");
    let mut args = vec!["influence", "--input", s(&input), "--output", s(&cols)];
    args.extend(fit);
    ok(&args);
    let top = rows(&cols.join("influence_top.csv"));
    let full = rows(&cols.join("influence_full.csv"));
    assert_eq!(top.len(), 9);
    assert_eq!(full.len(), 55);
    assert_eq!(rows(&cols.join("influence_series.csv")).len(), 9);
    let influence: Vec<f64> = full.iter().map(|r| r["influence"].parse().unwrap()).collect();
    assert!(influence.iter().all(|v| v.abs() < 0.05), "{influence:?}");
    assert!(influence.windows(2).all(|w| w[0] >= w[1]));
    // equal influence keeps column order
    let names = feature_names();
    let tied: Vec<&str> = full.iter().take_while(|r| r["influence"] == full[0]["influence"]).map(|r| r["feature"].as_str()).collect();
    assert!(tied.windows(2).all(|w| names.iter().position(|n| n == w[0]) < names.iter().position(|n| n == w[1])), "{tied:?}");

    let fams = dir.path().join("families");
    let mut args = vec!["influence", "--input", s(&input), "--output", s(&fams), "--ablation-mode", "family"];
    args.extend(fit);
    ok(&args);
    let full = rows(&fams.join("influence_full.csv"));
    assert_eq!(full.len(), 11);
    assert_eq!(full[0]["feature"], "OFF_DIR_VAR");
    assert_eq!(full[0]["removed_columns"].split(';').count(), 5);
    assert!(full[0]["influence"].parse::<f64>().unwrap() > 0.9, "{:?}", full[0]);
    assert!(full[1..].iter().all(|r| r["influence"].parse::<f64>().unwrap().abs() < 0.05));

    fails(&["influence", "--input", s(&input), "--output", s(&fams), "--ablation-mode", "row"], 1);
}

// ---------------------------------------------------------------------------
// timeline

#[test]
fn timeline_requires_every_window_model() {
    let (dir, _, models) = default_fixture();
    let partial = dir.path().join("partial_models");
    fs::create_dir_all(&partial).unwrap();
    for w in [Window::PreSnap, Window::SnapToMid, Window::MidToThrow, Window::SnapToThrow] {
        fs::copy(models.join(format!("{}.json", w.name())), partial.join(format!("{}.json", w.name()))).unwrap();
    }
    let tracking = dir.path().join("default.csv");
    let err = fails(&["timeline", "--input", s(&tracking), "--model", s(&partial), "--output", s(&dir.path().join("tl_partial"))], 2);
    assert!(err.contains("THROW_TO_END"), "{err}");
}

#[test]
fn noiseless_man_coverage_reads_as_man_after_the_snap() {
    let (_, _, models) = default_fixture();
    let dir = TempDir::new().unwrap();
    // Straight routes only: cuts make a lagged mirror briefly run the other way.
    let config = dir.path().join("go.toml");
    fs::write(&config, "routes = [\"go\"]\n").unwrap();
    let tracking = dir.path().join("man.csv");
    ok(&[
        "synth", "--config", s(&config), "--output", s(&tracking), "--n-plays", "20", "--man-fraction", "1", "--noise-std", "0",
        "--seed", "5",
    ]);
    let out = dir.path().join("tl");
    ok(&["timeline", "--input", s(&tracking), "--config", &with_suffix(&tracking, ".ingest.toml"), "--model", s(models), "--output", s(&out)]);
    let entries = rows(&out.join("timeline.csv"));
    assert_eq!(entries.len(), 20 * 2 * 5);
    for e in entries.iter().filter(|e| e["window"] != "PRE_SNAP") {
        let p: f64 = e["p_man"].parse().unwrap();
        assert!(p >= 0.9, "{e:?}");
    }
}

#[test]
fn timeline_marks_missing_windows_and_single_selection_prints_table() {
    let (_, _, models) = default_fixture();
    let dir = TempDir::new().unwrap();
    let mut labeled = generate_corpus(&SimConfig { n_plays: 2, ..SimConfig::default() }).unwrap();
    // Start the play at the snap so PRE_SNAP has a single frame.
    let play = &mut labeled[0].play;
    let snap = play.snap_frame;
    for t in &mut play.tracks {
        t.frames.retain(|f| f.frame_index >= snap);
    }
    let plays = synth::plays(&labeled);
    let ingest = synth::ingest_config(&labeled);
    let tracking = dir.path().join("cut.csv");
    write_plays_csv(File::create(&tracking).unwrap(), &plays, &ingest).unwrap();
    let config = dir.path().join("cut.toml");
    fs::write(&config, ingest.to_toml_string()).unwrap();

    let (game, play_id) = (plays[0].game_id.to_string(), plays[0].play_id.to_string());
    let cb = plays[0].tracks.iter().find(|t| t.position == "CB").unwrap().player_id.to_string();
    let out = dir.path().join("tl");
    let stdout = ok(&[
        "timeline", "--input", s(&tracking), "--config", s(&config), "--model", s(models), "--output", s(&out),
        "--game", &game, "--play", &play_id, "--player", &cb,
    ]);
    assert!(stdout.contains("PRE_SNAP") && stdout.contains("missing"), "{stdout}");
    let entries = rows(&out.join("timeline.csv"));
    assert_eq!(entries.len(), 5);
    let pre = &entries[0];
    assert_eq!((pre["window"].as_str(), pre["missing"].as_str(), pre["p_man"].as_str()), ("PRE_SNAP", "1", ""));
    for e in &entries[1..] {
        let sum: f64 = e["p_man"].parse::<f64>().unwrap() + e["p_zone"].parse::<f64>().unwrap();
        assert!((sum - 1.0).abs() < 2e-6);
    }
    let series = rows(&out.join("timeline_series.csv"));
    assert_eq!(series.len(), 4);

    fails(&["timeline", "--input", s(&tracking), "--config", s(&config), "--model", s(models), "--output", s(&out), "--player", "nobody"], 2);
}

#[test]
fn sliding_timeline_gives_one_entry_per_frame() {
    let (_, _, models) = default_fixture();
    let dir = TempDir::new().unwrap();
    let tracking = dir.path().join("one.csv");
    ok(&["synth", "--output", s(&tracking), "--n-plays", "1"]);
    let out = dir.path().join("tl");
    ok(&["timeline", "--input", s(&tracking), "--config", &with_suffix(&tracking, ".ingest.toml"), "--model", s(models), "--output", s(&out), "--sliding"]);
    let entries = rows(&out.join("timeline.csv"));
    assert!(entries.len() > 20);
    let mut last_frame: BTreeMap<String, u32> = BTreeMap::new();
    for e in &entries {
        let frame: u32 = e["frame"].parse().unwrap();
        if let Some(prev) = last_frame.insert(e["player_id"].clone(), frame) {
            assert!(frame > prev);
        }
        if e["missing"] == "0" {
            let sum: f64 = e["p_man"].parse::<f64>().unwrap() + e["p_zone"].parse::<f64>().unwrap();
            assert!((sum - 1.0).abs() < 2e-6);
        }
    }
}

// ---------------------------------------------------------------------------
// report and hist

#[test]
fn quarter_shares_follow_the_generated_split() {
    let dir = TempDir::new().unwrap();
    let labeled = generate_corpus(&SimConfig { n_plays: 2000, ..SimConfig::default() }).unwrap();
    let preds: Vec<Prediction> = labeled
        .iter()
        .flat_map(|lp| {
            lp.truth.iter().map(move |(cb, t)| {
                let man = t.label == coverage_core::Coverage::Man;
                Prediction {
                    player_id: cb.clone(),
                    game_id: lp.play.game_id.clone(),
                    play_id: lp.play.play_id.clone(),
                    meta: lp.play.meta.clone(),
                    ..prediction(0, man, 1)
                }
            })
        })
        .collect();
    let input = dir.path().join("preds.csv");
    write_preds(&input, &preds);
    let out = dir.path().join("quarters.csv");
    ok(&["report", "--input", s(&input), "--group-by", "quarter", "--output", s(&out)]);
    let groups = rows(&out);
    assert_eq!(groups.len(), 4);
    let mut total = 0;
    for g in &groups {
        let n: usize = g["total"].parse().unwrap();
        let share: f64 = g["man_share"].parse().unwrap();
        let zone: f64 = g["zone_share"].parse().unwrap();
        total += n;
        assert!((share + zone - 1.0).abs() < 1e-9);
        let se = (0.6 * 0.4 / n as f64).sqrt();
        assert!((share - 0.6).abs() < 4.0 * se, "quarter {}: {share} over {n}", g["quarter"]);
    }
    assert_eq!(total, preds.len());
}

#[test]
fn small_groups_are_flagged_and_players_sort_by_man_share() {
    let dir = TempDir::new().unwrap();
    let mut preds: Vec<Prediction> = (0..40).map(|i| prediction(i, i % 2 == 0, 5)).collect();
    preds.extend((40..400).map(|i| prediction(i, i % 3 == 0, 1)));
    let input = dir.path().join("preds.csv");
    write_preds(&input, &preds);

    let out = dir.path().join("q.csv");
    ok(&["report", "--input", s(&input), "--group-by", "quarter", "--min-count", "50", "--output", s(&out)]);
    let groups = rows(&out);
    let ot = groups.iter().find(|g| g["quarter"] == "5").unwrap();
    assert_eq!(ot["total"], "40");
    assert_eq!(ot["flag"], "insufficient sample");
    let q1 = groups.iter().find(|g| g["quarter"] == "1").unwrap();
    assert_eq!(q1["flag"], "");

    let out = dir.path().join("players.csv");
    ok(&["report", "--input", s(&input), "--group-by", "player", "--min-count", "0", "--top", "10", "--output", s(&out)]);
    let players = rows(&out);
    assert_eq!(players.len(), 10);
    let shares: Vec<f64> = players.iter().map(|p| p["man_share"].parse().unwrap()).collect();
    assert!(shares.windows(2).all(|w| w[0] >= w[1]), "{shares:?}");

    fails(&["report", "--input", s(&input), "--group-by", "stadium", "--output", s(&out)], 1);
}

#[test]
fn histograms_conserve_counts() {
    let dir = TempDir::new().unwrap();
    let hard: Vec<Prediction> = (0..100).map(|i| prediction(i, i % 4 == 0, 1)).collect();
    let hard_path = dir.path().join("hard.csv");
    write_preds(&hard_path, &hard);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let uniform: Vec<Prediction> = (0..4000)
        .map(|i| {
            let z: f64 = rng.random_range(0.0..1.0);
            Prediction { p_zone: z, p_man: 1.0 - z, window: "PRE_SNAP".into(), ..prediction(i, z < 0.5, 1) }
        })
        .collect();
    let uniform_path = dir.path().join("uniform.csv");
    write_preds(&uniform_path, &uniform);

    let out = dir.path().join("hist.csv");
    ok(&["hist", "--input", s(&hard_path), s(&uniform_path), "--output", s(&out)]);
    let bins = rows(&out);
    let count = |w: &str| -> Vec<usize> { bins.iter().filter(|b| b["window"] == w).map(|b| b["count"].parse().unwrap()).collect() };

    let all = count("ALL");
    assert_eq!(all.len(), 20);
    assert_eq!(all.iter().sum::<usize>(), 100);
    assert_eq!((all[0], all[19]), (25, 75));

    let flat = count("PRE_SNAP");
    assert_eq!(flat.iter().sum::<usize>(), 4000);
    // 200 expected per bin, sd about 13.8.
    assert!(flat.iter().all(|&c| (c as f64 - 200.0).abs() < 60.0), "{flat:?}");
}
