//! Scoring fitted models into man/zone predictions, per-window coverage
//! timelines, grouped proportions and membership histograms.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::eval::{man_component, LABEL_MAN, LABEL_ZONE};
use crate::features::{compute_features, feature_names, FeatureKind, FeatureTable, FeatureVector, TableError, TimeWindow, Window};
use crate::gmm::{GmmError, ModelDocument};
use crate::ingest::{Play, PlayMeta};
use crate::Id;

pub const HIST_BINS: usize = 20;
pub const INSUFFICIENT_SAMPLE: &str = "insufficient sample";
/// Window tag for models fitted on columns from more than one window.
pub const ALL_WINDOWS: &str = "ALL";
const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("model components are not labelled MAN/ZONE (status {0:?}); fit with G = 2 or supply labels")]
    NoSemantics(String),
    #[error("no model for window {0}")]
    MissingWindowModel(Window),
    #[error("model for window {0} given twice")]
    DuplicateWindowModel(Window),
    #[error("model features do not belong to a single window")]
    MixedWindows,
    #[error("unknown grouping {0:?}; expected team, player, quarter or down")]
    UnknownGrouping(String),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Turns raw feature rows into P(MAN), P(ZONE) under one model.
pub struct ManZoneScorer<'a> {
    doc: &'a ModelDocument,
    man: usize,
}

impl<'a> ManZoneScorer<'a> {
    pub fn new(doc: &'a ModelDocument) -> Result<Self, ReportError> {
        let labels = doc.labels.as_ref().ok_or_else(|| ReportError::NoSemantics("none".into()))?;
        let man = man_component(labels).ok_or_else(|| ReportError::NoSemantics(labels.status.clone()))?;
        Ok(ManZoneScorer { doc, man })
    }

    pub fn document(&self) -> &ModelDocument {
        self.doc
    }

    /// Missing cells take the model's fill values. P(ZONE) is `1 - P(MAN)`.
    pub fn score(&self, values: &[f64], missing: &[bool]) -> Result<(f64, f64), ReportError> {
        let x: Vec<f64> = values
            .iter()
            .zip(missing)
            .zip(&self.doc.fill_values)
            .map(|((&v, &m), &f)| if m { f } else { v })
            .collect();
        let p = self.doc.model.predict_proba(&x)?;
        Ok((p[self.man], 1.0 - p[self.man]))
    }
}

/// The window all `names` belong to, `None` if they span several.
pub fn window_of(names: &[String]) -> Option<Window> {
    let first = names.first()?.split_once("__")?.0;
    let window: Window = first.parse().ok()?;
    names.iter().all(|n| n.split_once("__").is_some_and(|(w, _)| w == first)).then_some(window)
}

/// One scored cornerback.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub game_id: Id,
    pub play_id: Id,
    pub player_id: Id,
    pub week: u32,
    pub p_man: f64,
    pub p_zone: f64,
    pub label: String,
    pub meta: PlayMeta,
    /// Window the model was fitted on, or `ALL`.
    pub window: String,
}

/// Scores every row of `table`; metadata is looked up by (game, play).
pub fn predict(doc: &ModelDocument, table: &FeatureTable, meta: &BTreeMap<(Id, Id), PlayMeta>) -> Result<Vec<Prediction>, ReportError> {
    let scorer = ManZoneScorer::new(doc)?;
    let sub = table.select_names(&doc.feature_names)?;
    let window = window_of(&doc.feature_names).map_or(ALL_WINDOWS.to_owned(), |w| w.name().to_owned());
    sub.rows
        .iter()
        .map(|r| {
            let (p_man, p_zone) = scorer.score(&r.values, &r.missing)?;
            Ok(Prediction {
                game_id: r.game_id.clone(),
                play_id: r.play_id.clone(),
                player_id: r.player_id.clone(),
                week: r.week,
                p_man,
                p_zone,
                label: if p_man >= 0.5 { LABEL_MAN } else { LABEL_ZONE }.to_owned(),
                meta: meta.get(&(r.game_id.clone(), r.play_id.clone())).cloned().unwrap_or_default(),
                window: window.clone(),
            })
        })
        .collect()
}

const PREDICTION_HEADER: [&str; 11] =
    ["game_id", "play_id", "player_id", "week", "p_man", "p_zone", "assigned_label", "defense_team", "quarter", "down", "window"];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(NA.to_owned(), T::to_string)
}

fn parse_opt<T: FromStr>(s: &str, line: u64, what: &str) -> Result<Option<T>, ReportError> {
    if s.is_empty() || s == NA {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| ReportError::Malformed { line, message: format!("bad {what} {s:?}") })
}

fn parse_num<T: FromStr>(s: &str, line: u64, what: &str) -> Result<T, ReportError> {
    s.trim().parse().map_err(|_| ReportError::Malformed { line, message: format!("bad {what} {s:?}") })
}

pub fn write_predictions_csv<W: Write>(sink: W, preds: &[Prediction]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PREDICTION_HEADER)?;
    for p in preds {
        w.write_record([
            p.game_id.to_string(),
            p.play_id.to_string(),
            p.player_id.to_string(),
            p.week.to_string(),
            crate::format_float(p.p_man),
            crate::format_float(p.p_zone),
            p.label.clone(),
            opt(&p.meta.defense_team),
            opt(&p.meta.quarter),
            opt(&p.meta.down),
            p.window.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads predictions; `window` may be absent, in which case it is `ALL`.
pub fn read_predictions_csv<R: Read>(source: R) -> Result<Vec<Prediction>, ReportError> {
    let mut r = csv::Reader::from_reader(source);
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| ReportError::Malformed { line: 1, message: format!("missing column {name:?}") })
    };
    let idx: Vec<usize> = PREDICTION_HEADER[..10].iter().map(|n| required(n)).collect::<Result<_, _>>()?;
    let window_col = col("window");
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(idx[i]).unwrap_or("");
        out.push(Prediction {
            game_id: Id::new(f(0)),
            play_id: Id::new(f(1)),
            player_id: Id::new(f(2)),
            week: parse_num(f(3), line, "week")?,
            p_man: parse_num(f(4), line, "p_man")?,
            p_zone: parse_num(f(5), line, "p_zone")?,
            label: f(6).to_owned(),
            meta: PlayMeta {
                defense_team: parse_opt(f(7), line, "defense_team")?,
                quarter: parse_opt(f(8), line, "quarter")?,
                down: parse_opt(f(9), line, "down")?,
            },
            window: window_col.and_then(|c| rec.get(c)).unwrap_or(ALL_WINDOWS).to_owned(),
        });
    }
    Ok(out)
}

/// Play metadata sidecar: `game_id,play_id,week,defense_team,quarter,down`.
pub fn write_meta_csv<W: Write>(sink: W, plays: &[Play]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["game_id", "play_id", "week", "defense_team", "quarter", "down"])?;
    for p in plays {
        w.write_record([
            p.game_id.to_string(),
            p.play_id.to_string(),
            p.week.to_string(),
            opt(&p.meta.defense_team),
            opt(&p.meta.quarter),
            opt(&p.meta.down),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_meta_csv<R: Read>(source: R) -> Result<BTreeMap<(Id, Id), PlayMeta>, ReportError> {
    let mut r = csv::Reader::from_reader(source);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 6 {
            return Err(ReportError::Malformed { line, message: format!("expected 6 fields, found {}", rec.len()) });
        }
        let meta = PlayMeta {
            defense_team: parse_opt(&rec[3], line, "defense_team")?,
            quarter: parse_opt(&rec[4], line, "quarter")?,
            down: parse_opt(&rec[5], line, "down")?,
        };
        out.insert((Id::new(&rec[0]), Id::new(&rec[1])), meta);
    }
    Ok(out)
}

/// One fitted, man/zone-labelled model per window.
pub struct WindowModels {
    models: BTreeMap<Window, ModelDocument>,
}

impl WindowModels {
    /// Requires exactly one model per window, each with MAN/ZONE labels.
    pub fn new(docs: Vec<ModelDocument>) -> Result<Self, ReportError> {
        let mut models = BTreeMap::new();
        for doc in docs {
            let w = window_of(&doc.feature_names).ok_or(ReportError::MixedWindows)?;
            ManZoneScorer::new(&doc)?;
            if models.insert(w, doc).is_some() {
                return Err(ReportError::DuplicateWindowModel(w));
            }
        }
        if let Some(w) = Window::ALL.into_iter().find(|w| !models.contains_key(w)) {
            return Err(ReportError::MissingWindowModel(w));
        }
        Ok(WindowModels { models })
    }

    pub fn get(&self, window: Window) -> &ModelDocument {
        &self.models[&window]
    }

    fn scorer(&self, window: Window) -> ManZoneScorer<'_> {
        ManZoneScorer::new(&self.models[&window]).expect("checked on construction")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineEntry {
    pub window: Window,
    /// Last frame of the recomputed window in sliding mode.
    pub frame: Option<u32>,
    /// NaN when `missing`.
    pub p_man: f64,
    pub p_zone: f64,
    pub missing: bool,
}

/// Man/zone probabilities of one cornerback through the play.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageTimeline {
    pub game_id: Id,
    pub play_id: Id,
    pub player_id: Id,
    pub entries: Vec<TimelineEntry>,
}

/// Values of `kinds` in the order a window model expects them.
fn model_kinds(doc: &ModelDocument) -> Vec<FeatureKind> {
    doc.feature_names
        .iter()
        .map(|n| {
            let suffix = n.split_once("__").map_or(n.as_str(), |(_, k)| k);
            FeatureKind::ALL.into_iter().find(|k| k.name() == suffix).expect("window model columns are standard features")
        })
        .collect()
}

fn score_window(scorer: &ManZoneScorer<'_>, values: &[f64], missing: &[bool], window: Window, frame: Option<u32>) -> Result<TimelineEntry, ReportError> {
    // a window with no observed feature is reported, not imputed
    if missing.iter().all(|&m| m) {
        return Ok(TimelineEntry { window, frame, p_man: f64::NAN, p_zone: f64::NAN, missing: true });
    }
    let (p_man, p_zone) = scorer.score(values, missing)?;
    Ok(TimelineEntry { window, frame, p_man, p_zone, missing: false })
}

/// One entry per window from a full 55-feature vector.
pub fn window_timeline(models: &WindowModels, v: &FeatureVector) -> Result<CoverageTimeline, ReportError> {
    let names = feature_names();
    let entries = Window::ALL
        .into_iter()
        .map(|w| {
            let scorer = models.scorer(w);
            let cols: Vec<usize> = scorer
                .document()
                .feature_names
                .iter()
                .map(|n| names.iter().position(|m| m == n).ok_or_else(|| TableError::UnknownColumn(n.clone())))
                .collect::<Result<_, _>>()?;
            let values: Vec<f64> = cols.iter().map(|&c| v.values[c]).collect();
            let missing: Vec<bool> = cols.iter().map(|&c| v.missing[c]).collect();
            score_window(&scorer, &values, &missing, w, None)
        })
        .collect::<Result<_, ReportError>>()?;
    Ok(CoverageTimeline { game_id: v.game_id.clone(), play_id: v.play_id.clone(), player_id: v.player_id.clone(), entries })
}

/// Frame-by-frame probabilities: at frame `t` features are recomputed over
/// the growing window from the phase start to `t` and scored with that
/// phase's model (`PRE_SNAP` before the snap, `SNAP_TO_THROW` until the
/// throw, `THROW_TO_END` after it).
pub fn sliding_timeline(models: &WindowModels, play: &Play, cb: &Id) -> Result<CoverageTimeline, ReportError> {
    let frames = play.frame_indices();
    let first = frames.first().copied().unwrap_or(play.snap_frame);
    let mut entries = Vec::new();
    for &t in frames.iter().filter(|&&t| t > first) {
        let (window, start) = if t <= play.snap_frame {
            (Window::PreSnap, first)
        } else if t <= play.throw_frame {
            (Window::SnapToThrow, play.snap_frame)
        } else {
            (Window::ThrowToEnd, play.throw_frame)
        };
        let tw = TimeWindow { window, start_frame: start, end_frame: t, degenerate: t <= start };
        let wf = compute_features(play, cb, &tw).map_err(|e| ReportError::Malformed { line: 0, message: e.to_string() })?;
        let scorer = models.scorer(window);
        let kinds = model_kinds(scorer.document());
        let values: Vec<f64> = kinds.iter().map(|k| wf.values[k.index()]).collect();
        let missing: Vec<bool> = kinds.iter().map(|k| wf.missing[k.index()]).collect();
        entries.push(score_window(&scorer, &values, &missing, window, Some(t))?);
    }
    Ok(CoverageTimeline { game_id: play.game_id.clone(), play_id: play.play_id.clone(), player_id: cb.clone(), entries })
}

fn prob(v: f64, missing: bool) -> String {
    if missing { String::new() } else { format!("{v:.6}") }
}

/// Table form: `game_id,play_id,player_id,window,frame,p_man,p_zone,missing`.
pub fn write_timeline_csv<W: Write>(sink: W, timelines: &[CoverageTimeline]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["game_id", "play_id", "player_id", "window", "frame", "p_man", "p_zone", "missing"])?;
    for tl in timelines {
        for e in &tl.entries {
            w.write_record([
                tl.game_id.to_string(),
                tl.play_id.to_string(),
                tl.player_id.to_string(),
                e.window.name().to_owned(),
                e.frame.map_or(String::new(), |f| f.to_string()),
                prob(e.p_man, e.missing),
                prob(e.p_zone, e.missing),
                u8::from(e.missing).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plot series of P(MAN): `series,x,y`, x the window index or frame.
pub fn write_timeline_series_csv<W: Write>(sink: W, timelines: &[CoverageTimeline]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["series", "x", "y"])?;
    for tl in timelines {
        let series = format!("{}/{}/{}", tl.game_id, tl.play_id, tl.player_id);
        for e in tl.entries.iter().filter(|e| !e.missing) {
            let x = e.frame.unwrap_or(e.window.index() as u32);
            w.write_record([series.clone(), x.to_string(), format!("{:.6}", e.p_man)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupBy {
    Team,
    Player,
    Quarter,
    Down,
}

impl FromStr for GroupBy {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "team" => Ok(GroupBy::Team),
            "player" => Ok(GroupBy::Player),
            "quarter" => Ok(GroupBy::Quarter),
            "down" => Ok(GroupBy::Down),
            _ => Err(ReportError::UnknownGrouping(s.to_owned())),
        }
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupBy::Team => "team",
            GroupBy::Player => "player",
            GroupBy::Quarter => "quarter",
            GroupBy::Down => "down",
        })
    }
}

impl GroupBy {
    fn key(self, p: &Prediction) -> String {
        match self {
            GroupBy::Team => opt(&p.meta.defense_team),
            GroupBy::Player => p.player_id.to_string(),
            GroupBy::Quarter => opt(&p.meta.quarter),
            GroupBy::Down => opt(&p.meta.down),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupRow {
    pub key: String,
    pub man: usize,
    pub zone: usize,
    pub man_share: f64,
    pub zone_share: f64,
    /// Fewer than `min_count` predictions.
    pub insufficient: bool,
}

impl GroupRow {
    pub fn total(&self) -> usize {
        self.man + self.zone
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub group_by: GroupBy,
    pub min_count: usize,
    /// Sorted by man share descending, then size descending, then key.
    pub rows: Vec<GroupRow>,
}

/// Man/zone counts by group from the assigned labels. Rows whose label is
/// neither MAN nor ZONE are counted by their larger probability.
pub fn aggregate(preds: &[Prediction], group_by: GroupBy, min_count: usize) -> AggregateReport {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in preds {
        let man = match p.label.as_str() {
            LABEL_MAN => true,
            LABEL_ZONE => false,
            _ => p.p_man >= p.p_zone,
        };
        let e = counts.entry(group_by.key(p)).or_default();
        if man { e.0 += 1 } else { e.1 += 1 }
    }
    let mut rows: Vec<GroupRow> = counts
        .into_iter()
        .map(|(key, (man, zone))| {
            let total = (man + zone) as f64;
            GroupRow {
                key,
                man,
                zone,
                man_share: man as f64 / total,
                zone_share: zone as f64 / total,
                insufficient: man + zone < min_count,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.man_share.total_cmp(&a.man_share).then(b.total().cmp(&a.total())).then_with(|| a.key.cmp(&b.key))
    });
    AggregateReport { group_by, min_count, rows }
}

impl AggregateReport {
    /// `group,man,zone,total,man_share,zone_share,flag`; `top` keeps the first rows.
    pub fn write_csv<W: Write>(&self, sink: W, top: Option<usize>) -> Result<(), ReportError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([self.group_by.to_string().as_str(), "man", "zone", "total", "man_share", "zone_share", "flag"])?;
        for r in self.rows.iter().take(top.unwrap_or(usize::MAX)) {
            w.write_record([
                r.key.clone(),
                r.man.to_string(),
                r.zone.to_string(),
                r.total().to_string(),
                format!("{:.6}", r.man_share),
                format!("{:.6}", r.zone_share),
                if r.insufficient { INSUFFICIENT_SAMPLE.to_owned() } else { String::new() },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts over `HIST_BINS` equal bins of [0, 1]; 1 falls in the last bin and
/// values outside the interval are clamped.
pub fn histogram(values: impl IntoIterator<Item = f64>) -> [u64; HIST_BINS] {
    let mut bins = [0u64; HIST_BINS];
    for v in values {
        let i = ((v.clamp(0.0, 1.0) * HIST_BINS as f64).floor() as usize).min(HIST_BINS - 1);
        bins[i] += 1;
    }
    bins
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipHistogram {
    pub window: String,
    pub counts: [u64; HIST_BINS],
}

/// Histogram of P(ZONE) per window tag, windows in first-appearance order.
pub fn membership_histograms(preds: &[Prediction]) -> Vec<MembershipHistogram> {
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in preds {
        if !values.contains_key(&p.window) {
            order.push(p.window.clone());
        }
        values.entry(p.window.clone()).or_default().push(p.p_zone);
    }
    order
        .into_iter()
        .map(|w| {
            let counts = histogram(values[&w].iter().copied());
            MembershipHistogram { window: w, counts }
        })
        .collect()
}

/// `window,bin,lower,upper,count`.
pub fn write_histograms_csv<W: Write>(sink: W, hists: &[MembershipHistogram]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["window", "bin", "lower", "upper", "count"])?;
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            let lo = i as f64 / HIST_BINS as f64;
            let hi = (i + 1) as f64 / HIST_BINS as f64;
            w.write_record([h.window.clone(), i.to_string(), format!("{lo:.2}"), format!("{hi:.2}"), c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
