//! Tracking-data ingestion: CSV → validated [`Play`]s grouped into a
//! week-indexed [`PlayCorpus`].

mod config;
mod csv_io;

pub use config::{ColumnMapping, CornerbackSet, IngestConfig, TeamValues};
pub use csv_io::{parse_files, parse_tracking_csv, write_plays_csv, ParseOutcome, QualityReport, Reject};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::Id;

pub const BALL_SNAP: &str = "ball_snap";
pub const PASS_FORWARD: &str = "pass_forward";

/// Field extent in yards.
pub const FIELD_LENGTH: f64 = 120.0;
pub const FIELD_WIDTH: f64 = 58.0;

/// Frames per second of the tracking feed.
pub const FRAME_RATE_HZ: f64 = 10.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: mapped column {logical} -> {column:?} not found in header")]
    MissingColumn { logical: &'static str, column: String },
    #[error("line {line}: column {column:?} has malformed value {value:?}")]
    MalformedRow { line: u64, column: String, value: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("config error: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TeamSide {
    Offense,
    Defense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedFrame {
    pub frame_index: u32,
    pub x: f64,
    pub y: f64,
    /// yards per second
    pub speed: f64,
    /// degrees in `[0, 360)`
    pub direction: f64,
    pub event: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerTrack {
    pub player_id: Id,
    pub side: TeamSide,
    pub position: String,
    pub frames: Vec<TrackedFrame>,
}

/// Play-level context carried through to reports.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayMeta {
    pub defense_team: Option<String>,
    pub quarter: Option<u8>,
    pub down: Option<u8>,
}

/// One pass play: aligned tracks for every player plus the snap and throw
/// anchors. All tracks share the same frame index sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Play {
    pub game_id: Id,
    pub play_id: Id,
    pub week: u32,
    pub tracks: Vec<PlayerTrack>,
    pub snap_frame: u32,
    pub throw_frame: u32,
    pub meta: PlayMeta,
}

impl Play {
    pub fn frame_indices(&self) -> Vec<u32> {
        self.tracks
            .first()
            .map(|t| t.frames.iter().map(|f| f.frame_index).collect())
            .unwrap_or_default()
    }

    pub fn frame_count(&self) -> usize {
        self.tracks.first().map_or(0, |t| t.frames.len())
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.tracks.first().and_then(|t| t.frames.first()).map(|f| f.frame_index)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.tracks.first().and_then(|t| t.frames.last()).map(|f| f.frame_index)
    }

    pub fn track(&self, player_id: &Id) -> Option<&PlayerTrack> {
        self.tracks.iter().find(|t| &t.player_id == player_id)
    }

    /// Earliest frame whose event tag equals `tag` on any track.
    pub fn event_frame(&self, tag: &str) -> Option<u32> {
        self.tracks
            .iter()
            .flat_map(|t| t.frames.iter())
            .filter(|f| f.event.as_deref() == Some(tag))
            .map(|f| f.frame_index)
            .min()
    }

    /// True when both event tags are present, agree with the stored anchors
    /// and the snap precedes the throw.
    pub fn has_pass_anchors(&self) -> bool {
        matches!(
            (self.event_frame(BALL_SNAP), self.event_frame(PASS_FORWARD)),
            (Some(s), Some(t)) if s == self.snap_frame && t == self.throw_frame && s < t
        )
    }

    /// Checks the structural invariants a parsed play guarantees.
    pub fn validate(&self) -> Result<(), String> {
        if self.snap_frame >= self.throw_frame {
            return Err("ball_snap not before pass_forward".into());
        }
        if !self.tracks.iter().any(|t| t.side == TeamSide::Offense) {
            return Err("no offensive track".into());
        }
        if !self.tracks.iter().any(|t| t.side == TeamSide::Defense) {
            return Err("no defensive track".into());
        }
        let frames = self.frame_indices();
        if frames.len() < 2 {
            return Err("fewer than 2 aligned frames".into());
        }
        if frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err("frames not strictly ordered".into());
        }
        for t in &self.tracks {
            if t.frames.len() != frames.len() || t.frames.iter().zip(&frames).any(|(f, &i)| f.frame_index != i) {
                return Err(format!("track {} not aligned with the play's frames", t.player_id));
            }
            for f in &t.frames {
                let in_bounds = (0.0..=FIELD_LENGTH).contains(&f.x) && (0.0..=FIELD_WIDTH).contains(&f.y);
                if !in_bounds || f.speed < 0.0 || !(0.0..360.0).contains(&f.direction) {
                    return Err(format!("track {} frame {} out of range", t.player_id, f.frame_index));
                }
            }
        }
        if !frames.contains(&self.snap_frame) || !frames.contains(&self.throw_frame) {
            return Err("event frame outside aligned frame range".into());
        }
        Ok(())
    }
}

/// Keeps the plays that carry both pass anchors.
pub fn filter_pass_plays(plays: Vec<Play>) -> Vec<Play> {
    plays.into_iter().filter(Play::has_pass_anchors).collect()
}

/// Defensive players whose position code is in `positions`, in id order.
pub fn select_cornerbacks(play: &Play, positions: &BTreeSet<String>) -> Vec<Id> {
    let mut ids: Vec<Id> = play
        .tracks
        .iter()
        .filter(|t| t.side == TeamSide::Defense && positions.contains(&t.position))
        .map(|t| t.player_id.clone())
        .collect();
    ids.sort();
    ids
}

/// Immutable set of plays indexed by week.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlayCorpus {
    plays: Vec<Play>,
    week_index: BTreeMap<u32, Vec<(Id, Id)>>,
}

impl PlayCorpus {
    /// Builds a corpus sorted by (game, play). A (game, play) key seen twice
    /// keeps its first occurrence.
    pub fn new(mut plays: Vec<Play>) -> Self {
        plays.sort_by(|a, b| (&a.game_id, &a.play_id).cmp(&(&b.game_id, &b.play_id)));
        plays.dedup_by(|b, a| a.game_id == b.game_id && a.play_id == b.play_id);
        let mut week_index: BTreeMap<u32, Vec<(Id, Id)>> = BTreeMap::new();
        for p in &plays {
            week_index.entry(p.week).or_default().push((p.game_id.clone(), p.play_id.clone()));
        }
        PlayCorpus { plays, week_index }
    }

    pub fn plays(&self) -> &[Play] {
        &self.plays
    }

    pub fn weeks(&self) -> Vec<u32> {
        self.week_index.keys().copied().collect()
    }

    pub fn plays_in_week(&self, week: u32) -> &[(Id, Id)] {
        self.week_index.get(&week).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn into_plays(self) -> Vec<Play> {
        self.plays
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn frame(i: u32, x: f64, y: f64, event: Option<&str>) -> TrackedFrame {
        TrackedFrame { frame_index: i, x, y, speed: 0.0, direction: 0.0, event: event.map(str::to_owned) }
    }

    /// A stationary track over frames `1..=n` with the given events.
    pub fn track(id: u64, side: TeamSide, pos: &str, x: f64, y: f64, n: u32, events: &[(u32, &str)]) -> PlayerTrack {
        let frames = (1..=n)
            .map(|i| frame(i, x, y, events.iter().find(|(f, _)| *f == i).map(|(_, e)| *e)))
            .collect();
        PlayerTrack { player_id: Id::from(id), side, position: pos.into(), frames }
    }

    pub fn play(play_id: u64, tracks: Vec<PlayerTrack>, snap: u32, throw: u32) -> Play {
        Play {
            game_id: Id::from("1"),
            play_id: Id::from(play_id),
            week: 1,
            tracks,
            snap_frame: snap,
            throw_frame: throw,
            meta: PlayMeta::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn anchored(play_id: u64, with_throw: bool) -> Play {
        let mut events = vec![(1, BALL_SNAP)];
        if with_throw {
            events.push((3, PASS_FORWARD));
        }
        play(
            play_id,
            vec![
                track(1, TeamSide::Offense, "WR", 10.0, 10.0, 4, &events),
                track(2, TeamSide::Defense, "CB", 12.0, 10.0, 4, &events),
            ],
            1,
            3,
        )
    }

    #[test]
    fn filter_keeps_only_anchored_plays() {
        assert!(filter_pass_plays(vec![]).is_empty());
        let kept = filter_pass_plays(vec![anchored(1, true), anchored(2, false), anchored(3, true)]);
        let ids: Vec<&str> = kept.iter().map(|p| p.play_id.as_str()).collect();
        assert_eq!(ids, ["1", "3"]);
        let all = vec![anchored(1, true), anchored(2, true)];
        assert_eq!(filter_pass_plays(all.clone()), all);
    }

    #[test]
    fn cornerback_selection_uses_configured_positions() {
        let tracks = vec![
            track(5, TeamSide::Defense, "CB", 0.0, 0.0, 2, &[]),
            track(3, TeamSide::Defense, "CB", 0.0, 0.0, 2, &[]),
            track(4, TeamSide::Defense, "SS", 0.0, 0.0, 2, &[]),
            track(6, TeamSide::Defense, "FS", 0.0, 0.0, 2, &[]),
            track(7, TeamSide::Offense, "WR", 0.0, 0.0, 2, &[]),
            track(8, TeamSide::Defense, "DB", 0.0, 0.0, 2, &[]),
        ];
        let p = play(1, tracks, 1, 2);
        let cb: BTreeSet<String> = ["CB".to_string()].into();
        assert_eq!(select_cornerbacks(&p, &cb), vec![Id::from(3), Id::from(5)]);

        let no_cb = play(2, vec![track(4, TeamSide::Defense, "SS", 0.0, 0.0, 2, &[])], 1, 2);
        assert!(select_cornerbacks(&no_cb, &cb).is_empty());

        let cb_db: BTreeSet<String> = ["CB".to_string(), "DB".to_string()].into();
        let only_db = play(3, vec![track(8, TeamSide::Defense, "DB", 0.0, 0.0, 2, &[])], 1, 2);
        assert_eq!(select_cornerbacks(&only_db, &cb_db), vec![Id::from(8)]);
    }

    #[test]
    fn corpus_indexes_each_play_under_one_week() {
        let mut a = anchored(1, true);
        a.week = 2;
        let mut b = anchored(2, true);
        b.week = 1;
        let corpus = PlayCorpus::new(vec![a, b.clone(), b]);
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.weeks(), vec![1, 2]);
        assert_eq!(corpus.plays_in_week(1).len(), 1);
        assert_eq!(corpus.plays()[0].play_id.as_str(), "1");
    }

    #[test]
    fn validate_catches_misordered_anchors() {
        let mut p = anchored(1, true);
        assert!(p.validate().is_ok());
        p.snap_frame = 3;
        assert_eq!(p.validate().unwrap_err(), "ball_snap not before pass_forward");
    }
}
