//! Movement features for one cornerback on one play.
//!
//! Eleven features are computed over each of five phases of the play, giving
//! a 55-entry vector ordered window-major:
//! `PRE_SNAP__VAR_X, PRE_SNAP__VAR_Y, ..., THROW_TO_END__RAT_VAR`.
//!
//! All variances are population variances (divide by the frame count of the
//! window). Distances to the nearest opponent/teammate are recomputed every
//! frame; ties go to the smaller player id.

mod table;

pub use table::{FeatureTable, TableError, MISSING_PREFIX};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::ingest::{select_cornerbacks, Play, PlayCorpus, PlayerTrack, TeamSide};
use crate::Id;

/// Floor applied to the receiver-to-teammate distance in the ratio features.
pub const RATIO_EPSILON: f64 = 1e-6;

pub const FEATURES_PER_WINDOW: usize = 11;
pub const WINDOW_COUNT: usize = 5;
pub const FEATURE_DIM: usize = FEATURES_PER_WINDOW * WINDOW_COUNT;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("player {0} is not a defender in this play")]
    NotDefender(Id),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Window {
    PreSnap,
    SnapToMid,
    MidToThrow,
    SnapToThrow,
    ThrowToEnd,
}

impl Window {
    pub const ALL: [Window; WINDOW_COUNT] =
        [Window::PreSnap, Window::SnapToMid, Window::MidToThrow, Window::SnapToThrow, Window::ThrowToEnd];

    pub fn name(self) -> &'static str {
        match self {
            Window::PreSnap => "PRE_SNAP",
            Window::SnapToMid => "SNAP_TO_MID",
            Window::MidToThrow => "MID_TO_THROW",
            Window::SnapToThrow => "SNAP_TO_THROW",
            Window::ThrowToEnd => "THROW_TO_END",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Window::ALL
            .into_iter()
            .find(|w| w.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown window {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    VarX,
    VarY,
    SpeedVar,
    OffVar,
    DefVar,
    OffMean,
    DefMean,
    OffDirVar,
    OffDirMean,
    RatMean,
    RatVar,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; FEATURES_PER_WINDOW] = [
        FeatureKind::VarX,
        FeatureKind::VarY,
        FeatureKind::SpeedVar,
        FeatureKind::OffVar,
        FeatureKind::DefVar,
        FeatureKind::OffMean,
        FeatureKind::DefMean,
        FeatureKind::OffDirVar,
        FeatureKind::OffDirMean,
        FeatureKind::RatMean,
        FeatureKind::RatVar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::VarX => "VAR_X",
            FeatureKind::VarY => "VAR_Y",
            FeatureKind::SpeedVar => "SPEED_VAR",
            FeatureKind::OffVar => "OFF_VAR",
            FeatureKind::DefVar => "DEF_VAR",
            FeatureKind::OffMean => "OFF_MEAN",
            FeatureKind::DefMean => "DEF_MEAN",
            FeatureKind::OffDirVar => "OFF_DIR_VAR",
            FeatureKind::OffDirMean => "OFF_DIR_MEAN",
            FeatureKind::RatMean => "RAT_MEAN",
            FeatureKind::RatVar => "RAT_VAR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_angular(self) -> bool {
        matches!(self, FeatureKind::OffDirVar | FeatureKind::OffDirMean)
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn column_name(window: Window, kind: FeatureKind) -> String {
    format!("{}__{}", window.name(), kind.name())
}

pub fn column_index(window: Window, kind: FeatureKind) -> usize {
    window.index() * FEATURES_PER_WINDOW + kind.index()
}

/// The 55 column names in vector order.
pub fn feature_names() -> Vec<String> {
    Window::ALL
        .iter()
        .flat_map(|&w| FeatureKind::ALL.iter().map(move |&k| column_name(w, k)))
        .collect()
}

/// Inclusive frame range of one play phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub window: Window,
    pub start_frame: u32,
    pub end_frame: u32,
    /// Fewer than two frames; features over it are missing.
    pub degenerate: bool,
}

impl TimeWindow {
    fn new(window: Window, start_frame: u32, end_frame: u32) -> Self {
        TimeWindow { window, start_frame, end_frame, degenerate: end_frame <= start_frame }
    }
}

/// The five phases anchored on first frame, snap, midpoint, throw and last frame.
pub fn build_windows(play: &Play) -> [TimeWindow; WINDOW_COUNT] {
    let first = play.first_frame().unwrap_or(play.snap_frame);
    let last = play.last_frame().unwrap_or(play.throw_frame);
    let (snap, throw) = (play.snap_frame, play.throw_frame);
    let mid = ((snap as u64 + throw as u64) / 2) as u32;
    [
        TimeWindow::new(Window::PreSnap, first, snap),
        TimeWindow::new(Window::SnapToMid, snap, mid),
        TimeWindow::new(Window::MidToThrow, mid, throw),
        TimeWindow::new(Window::SnapToThrow, snap, throw),
        TimeWindow::new(Window::ThrowToEnd, throw, last),
    ]
}

/// Nearest opponent and teammate of the cornerback at one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborFrame {
    pub frame_index: u32,
    pub nearest_offense: Id,
    pub dist_to_offense: f64,
    /// `None` when the cornerback has no defensive teammate.
    pub nearest_defense: Option<Id>,
    pub dist_to_defense: Option<f64>,
    /// Distance from the nearest offensive player to the nearest teammate.
    pub offense_to_defense: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NearestNeighborTrace {
    pub frames: Vec<NeighborFrame>,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Wraps an angle difference in degrees into `(-180, 180]`.
pub fn wrap_degrees(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

fn nearest<'a>(candidates: &[&'a PlayerTrack], pos: usize, from: (f64, f64)) -> Option<(&'a PlayerTrack, f64)> {
    let mut best: Option<(&PlayerTrack, f64)> = None;
    for &t in candidates {
        let f = &t.frames[pos];
        let d = dist(from, (f.x, f.y));
        best = match best {
            Some((b, bd)) if bd < d || (bd == d && b.player_id < t.player_id) => Some((b, bd)),
            _ => Some((t, d)),
        };
    }
    best
}

struct Roles<'a> {
    cb: &'a PlayerTrack,
    offense: Vec<&'a PlayerTrack>,
    teammates: Vec<&'a PlayerTrack>,
}

fn roles<'a>(play: &'a Play, cb: &Id) -> Result<Roles<'a>, FeatureError> {
    let cb_track = play
        .track(cb)
        .filter(|t| t.side == TeamSide::Defense)
        .ok_or_else(|| FeatureError::NotDefender(cb.clone()))?;
    let offense = play.tracks.iter().filter(|t| t.side == TeamSide::Offense).collect();
    let teammates = play
        .tracks
        .iter()
        .filter(|t| t.side == TeamSide::Defense && &t.player_id != cb)
        .collect();
    Ok(Roles { cb: cb_track, offense, teammates })
}

fn trace_frame(r: &Roles<'_>, pos: usize) -> Option<NeighborFrame> {
    let me = &r.cb.frames[pos];
    let at = (me.x, me.y);
    let (j, dj) = nearest(&r.offense, pos, at)?;
    let jf = &j.frames[pos];
    let k = nearest(&r.teammates, pos, at);
    Some(NeighborFrame {
        frame_index: me.frame_index,
        nearest_offense: j.player_id.clone(),
        dist_to_offense: dj,
        nearest_defense: k.map(|(k, _)| k.player_id.clone()),
        dist_to_defense: k.map(|(_, d)| d),
        offense_to_defense: k.map(|(k, _)| {
            let kf = &k.frames[pos];
            dist((jf.x, jf.y), (kf.x, kf.y))
        }),
    })
}

/// Per-frame nearest offensive player and nearest defensive teammate of `cb`.
pub fn nearest_neighbor_trace(play: &Play, cb: &Id) -> Result<NearestNeighborTrace, FeatureError> {
    let r = roles(play, cb)?;
    let frames = (0..r.cb.frames.len()).filter_map(|pos| trace_frame(&r, pos)).collect();
    Ok(NearestNeighborTrace { frames })
}

/// Feature values for one window; missing entries hold NaN.
#[derive(Clone, Copy, Debug)]
pub struct WindowFeatures {
    pub values: [f64; FEATURES_PER_WINDOW],
    pub missing: [bool; FEATURES_PER_WINDOW],
}

impl WindowFeatures {
    fn all_missing() -> Self {
        WindowFeatures { values: [f64::NAN; FEATURES_PER_WINDOW], missing: [true; FEATURES_PER_WINDOW] }
    }

    pub fn get(&self, kind: FeatureKind) -> Option<f64> {
        (!self.missing[kind.index()]).then_some(self.values[kind.index()])
    }
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Frame positions covered by `window`, or `None` if fewer than two.
fn window_positions(play: &Play, window: &TimeWindow) -> Option<std::ops::Range<usize>> {
    if window.degenerate {
        return None;
    }
    let idx = play.frame_indices();
    let start = idx.partition_point(|&f| f < window.start_frame);
    let end = idx.partition_point(|&f| f <= window.end_frame);
    (end >= start + 2).then_some(start..end)
}

/// `tr` holds the trace for exactly `positions`, or is empty when the play has
/// no offensive track.
fn features_over(r: &Roles<'_>, tr: &[NeighborFrame], positions: std::ops::Range<usize>) -> WindowFeatures {
    use FeatureKind::*;
    let mut out = WindowFeatures::all_missing();
    let mut set = |k: FeatureKind, v: f64| {
        out.values[k.index()] = v;
        out.missing[k.index()] = false;
    };
    let frames = &r.cb.frames[positions.clone()];
    let (_, var_x) = mean_var(frames.iter().map(|f| f.x));
    let (_, var_y) = mean_var(frames.iter().map(|f| f.y));
    let (_, var_s) = mean_var(frames.iter().map(|f| f.speed));
    set(VarX, var_x);
    set(VarY, var_y);
    set(SpeedVar, var_s);

    if tr.is_empty() {
        return out;
    }
    let (off_mean, off_var) = mean_var(tr.iter().map(|t| t.dist_to_offense));
    set(OffMean, off_mean);
    set(OffVar, off_var);

    let dir_diffs = tr.iter().zip(positions.clone()).map(|(t, pos)| {
        let j = r.offense.iter().find(|o| o.player_id == t.nearest_offense).expect("trace refers to offense");
        wrap_degrees(j.frames[pos].direction - r.cb.frames[pos].direction)
    });
    let (dir_mean, dir_var) = mean_var(dir_diffs);
    set(OffDirMean, dir_mean);
    set(OffDirVar, dir_var);

    if tr.iter().all(|t| t.dist_to_defense.is_some()) {
        let (def_mean, def_var) = mean_var(tr.iter().map(|t| t.dist_to_defense.unwrap_or(0.0)));
        set(DefMean, def_mean);
        set(DefVar, def_var);
        let ratios = tr
            .iter()
            .map(|t| t.dist_to_offense / t.offense_to_defense.unwrap_or(0.0).max(RATIO_EPSILON));
        let (rat_mean, rat_var) = mean_var(ratios);
        set(RatMean, rat_mean);
        set(RatVar, rat_var);
    }
    out
}

/// The 11 features of `cb` over one window.
pub fn compute_features(play: &Play, cb: &Id, window: &TimeWindow) -> Result<WindowFeatures, FeatureError> {
    let r = roles(play, cb)?;
    let Some(positions) = window_positions(play, window) else {
        return Ok(WindowFeatures::all_missing());
    };
    let trace: Vec<NeighborFrame> = positions.clone().filter_map(|pos| trace_frame(&r, pos)).collect();
    Ok(features_over(&r, &trace, positions))
}

/// Feature vector of one cornerback on one play.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureVector {
    pub game_id: Id,
    pub play_id: Id,
    pub player_id: Id,
    pub week: u32,
    /// NaN where `missing` is set.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl FeatureVector {
    pub fn key(&self) -> (&Id, &Id, &Id) {
        (&self.game_id, &self.play_id, &self.player_id)
    }

    pub fn window_features(&self, window: Window) -> WindowFeatures {
        let mut wf = WindowFeatures::all_missing();
        let base = window.index() * FEATURES_PER_WINDOW;
        wf.values.copy_from_slice(&self.values[base..base + FEATURES_PER_WINDOW]);
        wf.missing.copy_from_slice(&self.missing[base..base + FEATURES_PER_WINDOW]);
        wf
    }

    pub fn any_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }
}

/// All 55 features of `cb` on `play`.
pub fn extract_features(play: &Play, cb: &Id) -> Result<FeatureVector, FeatureError> {
    let trace = nearest_neighbor_trace(play, cb)?;
    let r = roles(play, cb)?;
    let mut values = Vec::with_capacity(FEATURE_DIM);
    let mut missing = Vec::with_capacity(FEATURE_DIM);
    for w in build_windows(play) {
        let wf = match window_positions(play, &w) {
            Some(pos) if trace.frames.is_empty() => features_over(&r, &[], pos),
            Some(pos) => features_over(&r, &trace.frames[pos.clone()], pos),
            None => WindowFeatures::all_missing(),
        };
        values.extend_from_slice(&wf.values);
        missing.extend_from_slice(&wf.missing);
    }
    Ok(FeatureVector {
        game_id: play.game_id.clone(),
        play_id: play.play_id.clone(),
        player_id: cb.clone(),
        week: play.week,
        values,
        missing,
    })
}

/// One vector per (play, cornerback), sorted by (game, play, player).
pub fn extract_corpus_features(corpus: &PlayCorpus, cornerbacks: &BTreeSet<String>) -> Vec<FeatureVector> {
    let mut out: Vec<FeatureVector> = corpus
        .plays()
        .par_iter()
        .flat_map_iter(|play| {
            select_cornerbacks(play, cornerbacks)
                .into_iter()
                .map(move |cb| extract_features(play, &cb).expect("selected cornerbacks are defenders"))
        })
        .collect();
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    out
}
