use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;

use super::*;

/// A play that could not be accepted, with the reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reject {
    pub game_id: Id,
    pub play_id: Id,
    pub reason: String,
}

/// Data-quality counters collected while parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QualityReport {
    pub rows_read: u64,
    pub rows_skipped_team: u64,
    pub duplicate_frames: u64,
    pub clamped_frames: u64,
    pub negative_speed_frames: u64,
    pub plays_trimmed: u64,
    pub repeated_event_tags: u64,
    pub plays_accepted: u64,
    pub rejects: Vec<Reject>,
}

impl QualityReport {
    fn absorb(&mut self, other: QualityReport) {
        self.rows_read += other.rows_read;
        self.rows_skipped_team += other.rows_skipped_team;
        self.duplicate_frames += other.duplicate_frames;
        self.clamped_frames += other.clamped_frames;
        self.negative_speed_frames += other.negative_speed_frames;
        self.plays_trimmed += other.plays_trimmed;
        self.repeated_event_tags += other.repeated_event_tags;
        self.plays_accepted += other.plays_accepted;
        self.rejects.extend(other.rejects);
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows read: {}", self.rows_read)?;
        writeln!(f, "rows skipped (team not offense/defense): {}", self.rows_skipped_team)?;
        writeln!(f, "duplicate frames dropped: {}", self.duplicate_frames)?;
        writeln!(f, "frames clamped to field bounds: {}", self.clamped_frames)?;
        writeln!(f, "frames with negative speed set to 0: {}", self.negative_speed_frames)?;
        writeln!(f, "plays trimmed to common frames: {}", self.plays_trimmed)?;
        writeln!(f, "repeated event tags ignored: {}", self.repeated_event_tags)?;
        writeln!(f, "plays accepted: {}", self.plays_accepted)?;
        writeln!(f, "plays rejected: {}", self.rejects.len())?;
        for r in &self.rejects {
            writeln!(f, "  game {} play {}: {}", r.game_id, r.play_id, r.reason)?;
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub plays: Vec<Play>,
    pub quality: QualityReport,
}

impl ParseOutcome {
    pub fn rejects(&self) -> &[Reject] {
        &self.quality.rejects
    }
}

struct Columns {
    game: usize,
    play: usize,
    player: usize,
    frame: usize,
    x: usize,
    y: usize,
    speed: usize,
    direction: usize,
    event: usize,
    team: usize,
    position: usize,
    quarter: Option<usize>,
    down: Option<usize>,
    defense_team: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, m: &ColumnMapping) -> Result<Self, IngestError> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let req = |logical: &'static str, name: &str| {
            find(name).ok_or_else(|| IngestError::MissingColumn { logical, column: name.to_owned() })
        };
        let opt = |name: &Option<String>| name.as_deref().and_then(find);
        Ok(Columns {
            game: req("game", &m.game)?,
            play: req("play", &m.play)?,
            player: req("player", &m.player)?,
            frame: req("frame", &m.frame)?,
            x: req("x", &m.x)?,
            y: req("y", &m.y)?,
            speed: req("speed", &m.speed)?,
            direction: req("direction", &m.direction)?,
            event: req("event", &m.event)?,
            team: req("team", &m.team)?,
            position: req("position", &m.position)?,
            quarter: opt(&m.quarter),
            down: opt(&m.down),
            defense_team: opt(&m.defense_team),
        })
    }
}

struct RawTrack {
    side: TeamSide,
    position: String,
    frames: BTreeMap<u32, TrackedFrame>,
}

#[derive(Default)]
struct RawPlay {
    tracks: BTreeMap<Id, RawTrack>,
    meta: PlayMeta,
}

fn is_null(s: &str) -> bool {
    matches!(s.trim(), "" | "None" | "NA" | "NaN" | "null")
}

fn normalize_direction(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Parses tracking CSV into plays anchored on `ball_snap`/`pass_forward`.
///
/// Plays missing an anchor, lacking a side, with fewer than two common frames
/// or with no week mapping are returned as rejects in the quality report.
/// Malformed numeric cells and missing mapped columns are errors. An empty
/// source, without even a header, yields no plays.
pub fn parse_tracking_csv<R: Read>(source: R, config: &IngestConfig) -> Result<ParseOutcome, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(source);
    if reader.headers()?.is_empty() {
        return Ok(ParseOutcome::default());
    }
    let cols = Columns::resolve(reader.headers()?, &config.columns)?;
    let headers = reader.headers()?.clone();
    let mut quality = QualityReport::default();
    let mut raw: BTreeMap<(Id, Id), RawPlay> = BTreeMap::new();

    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        quality.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let malformed = |i: usize| IngestError::MalformedRow {
            line,
            column: headers.get(i).unwrap_or("?").to_owned(),
            value: cell(i).to_owned(),
        };
        let num = |i: usize| -> Result<f64, IngestError> {
            cell(i).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| malformed(i))
        };

        let team = cell(cols.team);
        let side = if config.teams.offense.iter().any(|v| v == team) {
            TeamSide::Offense
        } else if config.teams.defense.iter().any(|v| v == team) {
            TeamSide::Defense
        } else {
            quality.rows_skipped_team += 1;
            continue;
        };

        let frame_index = num(cols.frame)
            .ok()
            .filter(|v| v.fract() == 0.0 && *v >= 0.0 && *v <= u32::MAX as f64)
            .map(|v| v as u32)
            .ok_or_else(|| malformed(cols.frame))?;
        let mut x = num(cols.x)?;
        let mut y = num(cols.y)?;
        let mut speed = num(cols.speed)?;
        let direction = normalize_direction(num(cols.direction)?);
        let event = Some(cell(cols.event)).filter(|e| !is_null(e)).map(str::to_owned);

        let (cx, cy) = (x.clamp(0.0, FIELD_LENGTH), y.clamp(0.0, FIELD_WIDTH));
        if cx != x || cy != y {
            quality.clamped_frames += 1;
            x = cx;
            y = cy;
        }
        if speed < 0.0 {
            quality.negative_speed_frames += 1;
            speed = 0.0;
        }

        let key = (Id::new(cell(cols.game)), Id::new(cell(cols.play)));
        let entry = raw.entry(key).or_default();
        let small_int = |idx: Option<usize>| -> Result<Option<u8>, IngestError> {
            match idx {
                Some(i) if !is_null(cell(i)) => {
                    let v = num(i)?;
                    if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                        return Err(malformed(i));
                    }
                    Ok(Some(v as u8))
                }
                _ => Ok(None),
            }
        };
        if entry.meta.quarter.is_none() {
            entry.meta.quarter = small_int(cols.quarter)?;
        }
        if entry.meta.down.is_none() {
            entry.meta.down = small_int(cols.down)?;
        }
        if entry.meta.defense_team.is_none() {
            entry.meta.defense_team =
                cols.defense_team.map(cell).filter(|s| !is_null(s)).map(str::to_owned);
        }

        let track = entry.tracks.entry(Id::new(cell(cols.player))).or_insert_with(|| RawTrack {
            side,
            position: cell(cols.position).to_owned(),
            frames: BTreeMap::new(),
        });
        if track.frames.contains_key(&frame_index) {
            quality.duplicate_frames += 1;
            continue;
        }
        track.frames.insert(frame_index, TrackedFrame { frame_index, x, y, speed, direction, event });
    }

    let mut plays = Vec::new();
    for ((game_id, play_id), rp) in raw {
        match assemble(&game_id, &play_id, rp, config, &mut quality) {
            Ok(play) => plays.push(play),
            Err(reason) => quality.rejects.push(Reject { game_id, play_id, reason }),
        }
    }
    quality.plays_accepted = plays.len() as u64;
    Ok(ParseOutcome { plays, quality })
}

fn assemble(
    game_id: &Id,
    play_id: &Id,
    rp: RawPlay,
    config: &IngestConfig,
    quality: &mut QualityReport,
) -> Result<Play, String> {
    // First occurrence wins; later duplicates of the same tag on other frames are noise.
    let mut first: BTreeMap<&str, u32> = BTreeMap::new();
    let mut tagged: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for t in rp.tracks.values() {
        for f in t.frames.values() {
            if let Some(ev) = f.event.as_deref() {
                if ev == BALL_SNAP || ev == PASS_FORWARD {
                    let tag = if ev == BALL_SNAP { BALL_SNAP } else { PASS_FORWARD };
                    tagged.entry(tag).or_default().insert(f.frame_index);
                    let e = first.entry(tag).or_insert(f.frame_index);
                    *e = (*e).min(f.frame_index);
                }
            }
        }
    }
    quality.repeated_event_tags += tagged.values().map(|s| s.len().saturating_sub(1) as u64).sum::<u64>();

    let (snap, throw) = match (first.get(BALL_SNAP), first.get(PASS_FORWARD)) {
        (Some(&s), Some(&t)) => (s, t),
        (None, None) => return Err("missing ball_snap and pass_forward".into()),
        (None, _) => return Err("missing ball_snap".into()),
        (_, None) => return Err("missing pass_forward".into()),
    };
    if snap >= throw {
        return Err("ball_snap not before pass_forward".into());
    }
    if !rp.tracks.values().any(|t| t.side == TeamSide::Offense) {
        return Err("no offensive track".into());
    }
    if !rp.tracks.values().any(|t| t.side == TeamSide::Defense) {
        return Err("no defensive track".into());
    }

    let mut common: Option<BTreeSet<u32>> = None;
    for t in rp.tracks.values() {
        let keys: BTreeSet<u32> = t.frames.keys().copied().collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.len() < 2 {
        return Err("fewer than 2 aligned frames".into());
    }
    if !common.contains(&snap) || !common.contains(&throw) {
        return Err("event frame outside aligned frame range".into());
    }
    let trimmed = rp.tracks.values().any(|t| t.frames.len() != common.len());
    if trimmed {
        quality.plays_trimmed += 1;
    }

    let week = config
        .week_of(game_id.as_str())
        .ok_or_else(|| format!("no week mapping for game {game_id}"))?;

    let tracks = rp
        .tracks
        .into_iter()
        .map(|(player_id, t)| PlayerTrack {
            player_id,
            side: t.side,
            position: t.position,
            frames: t.frames.into_values().filter(|f| common.contains(&f.frame_index)).collect(),
        })
        .collect();

    Ok(Play {
        game_id: game_id.clone(),
        play_id: play_id.clone(),
        week,
        tracks,
        snap_frame: snap,
        throw_frame: throw,
        meta: rp.meta,
    })
}

/// Parses several files in parallel. A (game, play) key that appears in more
/// than one file is kept from the first file and rejected elsewhere.
pub fn parse_files(paths: &[PathBuf], config: &IngestConfig) -> Result<ParseOutcome, IngestError> {
    let outcomes: Vec<Result<ParseOutcome, IngestError>> = paths
        .par_iter()
        .map(|p| {
            let file = std::fs::File::open(p)
                .map_err(|e| IngestError::Io { path: p.display().to_string(), message: e.to_string() })?;
            parse_tracking_csv(std::io::BufReader::new(file), config)
        })
        .collect();

    let mut merged = ParseOutcome::default();
    let mut seen = BTreeSet::new();
    for outcome in outcomes {
        let outcome = outcome?;
        merged.quality.absorb(outcome.quality);
        for play in outcome.plays {
            if seen.insert((play.game_id.clone(), play.play_id.clone())) {
                merged.plays.push(play);
            } else {
                merged.quality.plays_accepted -= 1;
                merged.quality.rejects.push(Reject {
                    game_id: play.game_id,
                    play_id: play.play_id,
                    reason: "duplicate play across inputs".into(),
                });
            }
        }
    }
    merged.plays.sort_by(|a, b| (&a.game_id, &a.play_id).cmp(&(&b.game_id, &b.play_id)));
    Ok(merged)
}

/// Writes plays in the column layout described by `config`, one row per
/// player-frame. Output parses back into structurally equal plays.
pub fn write_plays_csv<W: Write>(sink: W, plays: &[Play], config: &IngestConfig) -> Result<(), IngestError> {
    let m = &config.columns;
    let side_value = |side: TeamSide| -> Result<&str, IngestError> {
        let values = match side {
            TeamSide::Offense => &config.teams.offense,
            TeamSide::Defense => &config.teams.defense,
        };
        values
            .first()
            .map(String::as_str)
            .ok_or_else(|| IngestError::Config(format!("no team value configured for {side:?}")))
    };
    let mut header: Vec<&str> = vec![
        &m.game, &m.play, &m.player, &m.frame, &m.x, &m.y, &m.speed, &m.direction, &m.event, &m.team, &m.position,
    ];
    let optional: Vec<&str> = [&m.quarter, &m.down, &m.defense_team].iter().filter_map(|c| c.as_deref()).collect();
    header.extend(&optional);

    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&header)?;
    for play in plays {
        let mut meta_cells: Vec<String> = Vec::new();
        if m.quarter.is_some() {
            meta_cells.push(play.meta.quarter.map_or_else(|| "NA".into(), |q| q.to_string()));
        }
        if m.down.is_some() {
            meta_cells.push(play.meta.down.map_or_else(|| "NA".into(), |d| d.to_string()));
        }
        if m.defense_team.is_some() {
            meta_cells.push(play.meta.defense_team.clone().unwrap_or_else(|| "NA".into()));
        }
        for t in &play.tracks {
            let team = side_value(t.side)?;
            for f in &t.frames {
                let mut row = vec![
                    play.game_id.to_string(),
                    play.play_id.to_string(),
                    t.player_id.to_string(),
                    f.frame_index.to_string(),
                    f.x.to_string(),
                    f.y.to_string(),
                    f.speed.to_string(),
                    f.direction.to_string(),
                    f.event.clone().unwrap_or_else(|| "None".into()),
                    team.to_owned(),
                    t.position.clone(),
                ];
                row.extend(meta_cells.iter().cloned());
                w.write_record(&row)?;
            }
        }
    }
    w.flush().map_err(|e| IngestError::Io { path: "<csv sink>".into(), message: e.to_string() })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::fixtures;

    fn cfg() -> IngestConfig {
        let mut c = IngestConfig::default();
        c.weeks.insert("2017090700".into(), 1);
        c
    }

    const HEADER: &str = "gameId,playId,nflId,frame.id,x,y,s,dir,event,team,position\n";

    fn minimal_csv(with_throw: bool) -> String {
        let mut s = HEADER.to_string();
        for (player, team, pos) in [(11, "offense", "WR"), (22, "defense", "CB")] {
            for f in 1..=3 {
                let ev = match f {
                    1 => "ball_snap",
                    3 if with_throw => "pass_forward",
                    _ => "None",
                };
                s += &format!("2017090700,55,{player},{f},{},20.5,1.5,90,{ev},{team},{pos}\n", 10 + f);
            }
        }
        s
    }

    #[test]
    fn minimal_play_parses_with_anchors() {
        let out = parse_tracking_csv(minimal_csv(true).as_bytes(), &cfg()).unwrap();
        assert_eq!(out.plays.len(), 1);
        assert!(out.rejects().is_empty());
        let p = &out.plays[0];
        assert_eq!((p.snap_frame, p.throw_frame), (1, 3));
        assert_eq!(p.tracks.len(), 2);
        assert_eq!(p.frame_count(), 3);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn empty_source_has_no_plays() {
        let out = parse_tracking_csv(&b""[..], &cfg()).unwrap();
        assert!(out.plays.is_empty() && out.rejects().is_empty());
        assert!(matches!(parse_tracking_csv(&b"x,y\n"[..], &cfg()), Err(IngestError::MissingColumn { .. })));
    }

    #[test]
    fn missing_pass_forward_is_rejected_with_reason() {
        let out = parse_tracking_csv(minimal_csv(false).as_bytes(), &cfg()).unwrap();
        assert!(out.plays.is_empty());
        assert_eq!(out.rejects().len(), 1);
        assert_eq!(out.rejects()[0].reason, "missing pass_forward");
    }

    #[test]
    fn direction_is_wrapped_into_range() {
        let text = minimal_csv(true).replacen(",90,ball_snap", ",365.0,ball_snap", 1);
        let out = parse_tracking_csv(text.as_bytes(), &cfg()).unwrap();
        let f = &out.plays[0].tracks[0].frames[0];
        assert!((f.direction - 365.0f64.rem_euclid(360.0)).abs() < 1e-12);
        assert_eq!(f.direction, 5.0);
        assert_eq!(normalize_direction(-90.0), 270.0);
        assert_eq!(normalize_direction(-1e-300), 0.0);
    }

    #[test]
    fn non_numeric_coordinate_reports_line() {
        let text = minimal_csv(true).replacen("2017090700,55,22,2,12,", "2017090700,55,22,2,abc,", 1);
        match parse_tracking_csv(text.as_bytes(), &cfg()) {
            Err(IngestError::MalformedRow { line, column, value }) => {
                assert_eq!(line, 6);
                assert_eq!(column, "x");
                assert_eq!(value, "abc");
            }
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn missing_mapped_column_is_fatal() {
        let text = minimal_csv(true).replacen("position", "pos", 1);
        assert!(matches!(
            parse_tracking_csv(text.as_bytes(), &cfg()),
            Err(IngestError::MissingColumn { logical: "position", .. })
        ));
    }

    #[test]
    fn out_of_bounds_coordinates_are_clamped_and_counted() {
        let text = minimal_csv(true).replacen(",11,20.5,", ",-3,60,", 1);
        let out = parse_tracking_csv(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(out.quality.clamped_frames, 1);
        let f = &out.plays[0].tracks[0].frames[0];
        assert_eq!((f.x, f.y), (0.0, FIELD_WIDTH));
    }

    #[test]
    fn mismatched_frame_ranges_are_trimmed() {
        let mut text = minimal_csv(true);
        text += "2017090700,55,11,4,14,20.5,1.5,90,None,offense,WR\n";
        let out = parse_tracking_csv(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(out.quality.plays_trimmed, 1);
        assert_eq!(out.plays[0].frame_indices(), vec![1, 2, 3]);

        let mut short = HEADER.to_string();
        short += "2017090700,9,1,1,1,1,0,0,ball_snap,offense,WR\n";
        short += "2017090700,9,1,2,1,1,0,0,pass_forward,offense,WR\n";
        short += "2017090700,9,2,2,1,1,0,0,pass_forward,defense,CB\n";
        short += "2017090700,9,2,3,1,1,0,0,None,defense,CB\n";
        let out = parse_tracking_csv(short.as_bytes(), &cfg()).unwrap();
        assert_eq!(out.rejects()[0].reason, "fewer than 2 aligned frames");
    }

    #[test]
    fn repeated_tags_use_first_occurrence() {
        let text = minimal_csv(true).replacen(
            "2017090700,55,22,2,12,20.5,1.5,90,None",
            "2017090700,55,22,2,12,20.5,1.5,90,ball_snap",
            1,
        );
        let out = parse_tracking_csv(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(out.plays[0].snap_frame, 1);
        assert_eq!(out.quality.repeated_event_tags, 1);
    }

    #[test]
    fn unmapped_week_and_ball_rows() {
        let mut text = minimal_csv(true);
        text += "2017090700,55,,1,10,20,0,0,ball_snap,football,\n";
        let out = parse_tracking_csv(text.as_bytes(), &IngestConfig::default()).unwrap();
        assert_eq!(out.quality.rows_skipped_team, 1);
        assert_eq!(out.rejects()[0].reason, "no week mapping for game 2017090700");
    }

    #[test]
    fn written_plays_parse_back_equal() {
        let mut config = cfg();
        config.weeks.insert("1".into(), 1);
        let mut p = fixtures::play(
            7,
            vec![
                fixtures::track(3, TeamSide::Offense, "WR", 10.125, 3.0, 4, &[(2, BALL_SNAP), (4, PASS_FORWARD)]),
                fixtures::track(4, TeamSide::Defense, "CB", 11.0, 3.3, 4, &[(2, BALL_SNAP), (4, PASS_FORWARD)]),
            ],
            2,
            4,
        );
        p.tracks[0].frames[1].direction = 359.999_999_7;
        p.tracks[1].frames[0].speed = 0.1 + 0.2;
        p.meta = PlayMeta { defense_team: Some("NE".into()), quarter: Some(2), down: Some(3) };
        let mut buf = Vec::new();
        write_plays_csv(&mut buf, std::slice::from_ref(&p), &config).unwrap();
        let out = parse_tracking_csv(buf.as_slice(), &config).unwrap();
        assert_eq!(out.plays, vec![p]);
    }
}
