use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use coverage_core::eval::{feature_influence, fit_document, select_g, AblationMode};
use coverage_core::features::{extract_corpus_features, extract_features, FeatureTable, Window};
use coverage_core::gmm::{FitConfig, ModelDocument};
use coverage_core::ingest::{parse_files, select_cornerbacks, write_plays_csv, IngestConfig, PlayCorpus, PlayMeta};
use coverage_core::report::{
    aggregate, membership_histograms, predict, read_meta_csv, read_predictions_csv, sliding_timeline,
    window_timeline, write_histograms_csv, write_meta_csv, write_predictions_csv, write_timeline_csv,
    write_timeline_series_csv, GroupBy, WindowModels,
};
use coverage_core::rng::DEFAULT_SEED;
use coverage_core::synth::{self, generate_corpus, SimConfig};
use coverage_core::Id;

use crate::*;

pub(crate) fn dispatch(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth_cmd(a, seed),
        Command::Extract(a) => extract(a),
        Command::Fit(a) => fit(a, seed),
        Command::FitWindows(a) => fit_windows(a, seed),
        Command::Predict(a) => predict_cmd(a),
        Command::SelectG(a) => select_g_cmd(a, seed),
        Command::Influence(a) => influence(a, seed),
        Command::Timeline(a) => timeline(a),
        Command::Report(a) => report(a),
        Command::Hist(a) => hist(a),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Writes through `f` and flushes, mapping any error to a data error.
fn write_file<E: std::fmt::Display>(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), E>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn fit_config(flags: &FitFlags, g: usize, seed: Option<u64>) -> Result<FitConfig, CliError> {
    let d = FitConfig::default();
    let cfg = FitConfig {
        components: g,
        max_iterations: flags.max_iter.unwrap_or(d.max_iterations),
        tolerance: flags.tol.unwrap_or(d.tolerance),
        n_restarts: flags.restarts.unwrap_or(d.n_restarts),
        reg_floor: flags.reg_floor.unwrap_or(d.reg_floor),
        seed: seed.unwrap_or(DEFAULT_SEED),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_table(path: &Path) -> Result<FeatureTable, CliError> {
    let table = FeatureTable::read_csv(open(path)?)?;
    if table.is_empty() {
        return Err(CliError::Data(format!("{}: feature table has no rows", path.display())));
    }
    Ok(table)
}

fn load_ingest_config(path: Option<&Path>) -> Result<IngestConfig, CliError> {
    path.map_or_else(|| Ok(IngestConfig::default()), |p| IngestConfig::load(p).map_err(CliError::from))
}

fn parse_window(s: &str) -> Result<Window, CliError> {
    s.parse().map_err(CliError::Usage)
}

fn window_model_path(dir: &Path, w: Window) -> PathBuf {
    dir.join(format!("{}.json", w.name()))
}

fn synth_cmd(a: SynthArgs, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            SimConfig::from_toml_str(&text)?
        }
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.n_plays = a.n_plays.unwrap_or(cfg.n_plays);
    cfg.man_fraction = a.man_fraction.unwrap_or(cfg.man_fraction);
    cfg.hybrid_fraction = a.hybrid_fraction.unwrap_or(cfg.hybrid_fraction);
    cfg.disguise_fraction = a.disguise_fraction.unwrap_or(cfg.disguise_fraction);
    cfg.noise_std = a.noise_std.unwrap_or(cfg.noise_std);
    cfg.weeks = a.weeks.unwrap_or(cfg.weeks);
    let corpus = generate_corpus(&cfg)?;
    let ingest = synth::ingest_config(&corpus);

    write_file(&a.output, |w| write_plays_csv(w, &synth::plays(&corpus), &ingest))?;
    let truth = a.truth.unwrap_or_else(|| with_suffix(&a.output, ".truth.csv"));
    write_file(&truth, |w| synth::write_truth_csv(w, &corpus))?;
    let ingest_path = a.ingest_config.unwrap_or_else(|| with_suffix(&a.output, ".ingest.toml"));
    write_file(&ingest_path, |w| w.write_all(ingest.to_toml_string().as_bytes()))?;
    println!("wrote {} plays to {}", corpus.len(), a.output.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<(), CliError> {
    let cfg = load_ingest_config(a.config.as_deref())?;
    let outcome = parse_files(&a.input, &cfg)?;
    let quality = a.quality.unwrap_or_else(|| with_suffix(&a.output, ".quality.txt"));
    write_file(&quality, |w| write!(w, "{}", outcome.quality))?;
    if outcome.plays.is_empty() {
        return Err(CliError::Data("no plays parsed".into()));
    }
    let corpus = PlayCorpus::new(outcome.plays);
    let vectors = extract_corpus_features(&corpus, &cfg.cornerbacks.positions);
    if vectors.is_empty() {
        return Err(CliError::Data("no cornerbacks found in the parsed plays".into()));
    }
    let table = FeatureTable::standard(vectors);
    write_file(&a.output, |w| table.write_csv(w))?;
    let meta = a.meta.unwrap_or_else(|| with_suffix(&a.output, ".meta.csv"));
    write_file(&meta, |w| write_meta_csv(w, corpus.plays()))?;
    println!("{} plays, {} cornerback vectors -> {}", corpus.len(), table.len(), a.output.display());
    Ok(())
}

fn describe(doc: &ModelDocument) -> String {
    let labels = doc.labels.as_ref();
    format!(
        "G = {}, log-likelihood {:.4}, {} iterations, labels {:?} ({})",
        doc.model.n_components(),
        doc.model.log_likelihood,
        doc.model.n_iterations,
        labels.map(|l| l.labels.clone()).unwrap_or_default(),
        labels.map_or("none", |l| l.status.as_str()),
    )
}

fn fit(a: FitArgs, seed: Option<u64>) -> Result<(), CliError> {
    let mut table = read_table(&a.input)?;
    if let Some(w) = &a.window {
        let cols = table.window_columns(parse_window(w)?);
        if cols.is_empty() {
            return Err(CliError::Data(format!("feature table has no {w} columns")));
        }
        table = table.select(&cols);
    }
    let cfg = fit_config(&a.fit, a.g, seed)?;
    let doc = fit_document(&table, &cfg, a.labels.as_deref())?;
    write_file(&a.model, |w| doc.write(w))?;
    println!("{}", describe(&doc));
    Ok(())
}

fn fit_windows(a: FitWindowsArgs, seed: Option<u64>) -> Result<(), CliError> {
    let table = read_table(&a.input)?;
    let cfg = fit_config(&a.fit, 2, seed)?;
    create_dir(&a.output)?;
    for w in Window::ALL {
        let cols = table.window_columns(w);
        if cols.is_empty() {
            return Err(CliError::Data(format!("feature table has no {w} columns")));
        }
        let doc = fit_document(&table.select(&cols), &cfg, None)?;
        write_file(&window_model_path(&a.output, w), |f| doc.write(f))?;
        println!("{w}: {}", describe(&doc));
    }
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelDocument, CliError> {
    Ok(ModelDocument::read(open(path)?)?)
}

fn predict_cmd(a: PredictArgs) -> Result<(), CliError> {
    let table = read_table(&a.input)?;
    let doc = read_model(&a.model)?;
    let meta_path = a.meta.clone().or_else(|| Some(with_suffix(&a.input, ".meta.csv")).filter(|p| p.exists()));
    let meta: BTreeMap<(Id, Id), PlayMeta> = match meta_path {
        Some(p) => read_meta_csv(open(&p)?)?,
        None => BTreeMap::new(),
    };
    let preds = predict(&doc, &table, &meta)?;
    write_file(&a.output, |w| write_predictions_csv(w, &preds))?;
    println!("{} predictions -> {}", preds.len(), a.output.display());
    Ok(())
}

fn select_g_cmd(a: SelectGArgs, seed: Option<u64>) -> Result<(), CliError> {
    if a.g_min == 0 || a.g_min > a.g_max {
        return Err(CliError::Usage(format!("invalid range --g-min {} --g-max {}", a.g_min, a.g_max)));
    }
    let table = read_table(&a.input)?;
    let cfg = fit_config(&a.fit, a.g_min, seed)?;
    let gs: Vec<usize> = (a.g_min..=a.g_max).collect();
    let rep = select_g(&table, &gs, &cfg)?;
    create_dir(&a.output)?;
    write_file(&a.output.join("cv_summary.csv"), |w| rep.write_summary_csv(w))?;
    write_file(&a.output.join("cv_folds.csv"), |w| rep.write_folds_csv(w))?;
    write_file(&a.output.join("cv_series.csv"), |w| rep.write_series_csv(w))?;
    for r in &rep.rows {
        println!("G = {}: mean ARI {:.4} over {} folds", r.g, r.mean_ari, r.defined_folds());
    }
    println!("G* = {}", rep.g_star);
    Ok(())
}

fn influence(a: InfluenceArgs, seed: Option<u64>) -> Result<(), CliError> {
    let mode = match a.ablation_mode.to_ascii_lowercase().as_str() {
        "column" => AblationMode::Column,
        "family" => AblationMode::Family,
        other => return Err(CliError::Usage(format!("unknown ablation mode {other:?}; expected column or family"))),
    };
    let table = read_table(&a.input)?;
    let cfg = fit_config(&a.fit, a.g, seed)?;
    let rep = feature_influence(&table, a.g, &cfg, mode)?;
    create_dir(&a.output)?;
    write_file(&a.output.join("influence_top.csv"), |w| rep.write_csv(w, Some(a.top)))?;
    write_file(&a.output.join("influence_full.csv"), |w| rep.write_csv(w, None))?;
    write_file(&a.output.join("influence_series.csv"), |w| rep.write_series_csv(w, Some(a.top)))?;
    println!("baseline mean ARI {:.4}", rep.baseline);
    for (i, e) in rep.entries.iter().take(a.top).enumerate() {
        println!("{:>2}. {:<32} {:+.4}", i + 1, e.name, e.influence);
    }
    Ok(())
}

fn timeline(a: TimelineArgs) -> Result<(), CliError> {
    let docs = Window::ALL
        .into_iter()
        .map(|w| {
            let p = window_model_path(&a.model, w);
            if !p.exists() {
                return Err(CliError::Data(format!("missing window model {}", p.display())));
            }
            read_model(&p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let models = WindowModels::new(docs)?;
    let cfg = load_ingest_config(a.config.as_deref())?;
    let corpus = PlayCorpus::new(parse_files(&a.input, &cfg)?.plays);
    let keep = |want: &Option<String>, id: &Id| want.as_deref().is_none_or(|w| w == id.as_str());
    let mut timelines = Vec::new();
    for play in corpus.plays().iter().filter(|p| keep(&a.game, &p.game_id) && keep(&a.play, &p.play_id)) {
        for cb in select_cornerbacks(play, &cfg.cornerbacks.positions).iter().filter(|c| keep(&a.player, c)) {
            let tl = if a.sliding {
                sliding_timeline(&models, play, cb)?
            } else {
                let v = extract_features(play, cb).map_err(|e| CliError::Data(e.to_string()))?;
                window_timeline(&models, &v)?
            };
            timelines.push(tl);
        }
    }
    if timelines.is_empty() {
        return Err(CliError::Data("no cornerback matches the selection".into()));
    }
    create_dir(&a.output)?;
    write_file(&a.output.join("timeline.csv"), |w| write_timeline_csv(w, &timelines))?;
    write_file(&a.output.join("timeline_series.csv"), |w| write_timeline_series_csv(w, &timelines))?;
    if timelines.len() == 1 {
        for e in &timelines[0].entries {
            let at = e.frame.map_or(String::new(), |f| format!(" @ frame {f}"));
            if e.missing {
                println!("{:<14}{at} missing", e.window.name());
            } else {
                println!("{:<14}{at} P(MAN) {:.3}  P(ZONE) {:.3}", e.window.name(), e.p_man, e.p_zone);
            }
        }
    } else {
        println!("{} timelines -> {}", timelines.len(), a.output.display());
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let by: GroupBy = a.group_by.parse()?;
    let preds = read_predictions_csv(open(&a.input)?)?;
    let rep = aggregate(&preds, by, a.min_count);
    write_file(&a.output, |w| rep.write_csv(w, a.top))?;
    println!("{} groups over {} predictions -> {}", rep.rows.len(), preds.len(), a.output.display());
    Ok(())
}

fn hist(a: HistArgs) -> Result<(), CliError> {
    let mut preds = Vec::new();
    for p in &a.input {
        preds.extend(read_predictions_csv(open(p)?)?);
    }
    let hists = membership_histograms(&preds);
    write_file(&a.output, |w| write_histograms_csv(w, &hists))?;
    println!("{} windows, {} predictions -> {}", hists.len(), preds.len(), a.output.display());
    Ok(())
}
