//! Labeled synthetic pass plays.
//!
//! Receivers run randomized route templates from the line of scrimmage. A
//! cornerback in man coverage mirrors its receiver with a lag; one in zone
//! coverage moves to a region of the field and reacts only weakly to nearby
//! receivers. Hybrid zone defenders lock onto a receiver that enters their
//! zone; disguised zone defenders line up in press before bailing to a zone.
//!
//! Play `p` draws from its own generator seeded by `(seed, p)`, so corpora are
//! identical regardless of how generation is scheduled.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use thiserror::Error;

use crate::eval::Partition;
use crate::ingest::{IngestConfig, Play, PlayMeta, PlayerTrack, TeamSide, TrackedFrame, BALL_SNAP, PASS_FORWARD};
use crate::rng::{seeded, DEFAULT_SEED};
use crate::{Coverage, Id};

const FIELD_X: (f64, f64) = (0.5, 119.5);
const FIELD_Y: (f64, f64) = (0.5, 52.8);
const CENTER_Y: f64 = 26.65;
/// Pre-snap position jitter as a fraction of `noise_std`.
const PRE_SNAP_JITTER: f64 = 0.1;
const AR_COEFFICIENT: f64 = 0.95;
/// Closest a non-cornerback defender gets to a receiver, yards.
const HELP_SEPARATION: f64 = 3.0;
/// Per-frame pull toward a receiver inside the zone radius.
const ZONE_PULL: f64 = 0.03;
const HYBRID_PULL: f64 = 0.3;
const ZONE_MAX_STEP: f64 = 0.55;
const HYBRID_MAX_STEP: f64 = 0.8;
/// Frames a man defender takes to close on the receiver after the throw.
const CLOSE_FRAMES: f64 = 5.0;
/// Fraction of the press offset removed once closed.
const CLOSE_OFFSET_SHRINK: f64 = 0.6;

const TEAMS: [&str; 32] = [
    "ARI", "ATL", "BAL", "BUF", "CAR", "CHI", "CIN", "CLE", "DAL", "DEN", "DET", "GB", "HOU", "IND", "JAX", "KC",
    "LA", "LAC", "MIA", "MIN", "NE", "NO", "NYG", "NYJ", "OAK", "PHI", "PIT", "SEA", "SF", "TB", "TEN", "WAS",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("truth csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("truth csv line {line}: {message}")]
    Malformed { line: u64, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_plays: usize,
    /// Probability that a cornerback plays man coverage, drawn per cornerback.
    pub man_fraction: f64,
    /// Receivers per play; the two outermost face the cornerbacks.
    pub n_receivers: usize,
    pub frame_rate: f64,
    /// Inclusive range of stationary frames before the snap.
    pub pre_snap_frames: (u32, u32),
    /// Inclusive range of frames from snap to throw.
    pub snap_to_throw_frames: (u32, u32),
    /// Inclusive range of frames after the throw.
    pub after_throw_frames: (u32, u32),
    /// Stationary standard deviation of defender tracking noise, yards.
    pub noise_std: f64,
    /// Frames by which a man defender trails its receiver.
    pub man_lag: u32,
    /// Routes receivers draw from uniformly.
    pub routes: Vec<Route>,
    /// Distance at which a zone defender starts reacting to a receiver, yards.
    pub zone_radius: f64,
    /// Fraction of zone defenders that converge on a receiver entering their zone.
    pub hybrid_fraction: f64,
    /// Fraction of zone defenders that show press alignment before the snap.
    pub disguise_fraction: f64,
    pub seed: u64,
    /// Plays are assigned to weeks round-robin.
    pub weeks: u32,
    pub plays_per_game: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_plays: 600,
            man_fraction: 0.6,
            n_receivers: 3,
            frame_rate: 10.0,
            pre_snap_frames: (10, 30),
            snap_to_throw_frames: (25, 45),
            after_throw_frames: (8, 15),
            noise_std: 0.3,
            man_lag: 3,
            routes: Route::ALL.to_vec(),
            zone_radius: 6.0,
            hybrid_fraction: 0.15,
            disguise_fraction: 0.0,
            seed: DEFAULT_SEED,
            weeks: 6,
            plays_per_game: 25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_owned()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.n_plays == 0 || self.weeks == 0 || self.plays_per_game == 0 {
            return bad("n_plays, weeks and plays_per_game must be positive");
        }
        if !unit(self.man_fraction) || !unit(self.hybrid_fraction) || !unit(self.disguise_fraction) {
            return bad("fractions must lie in [0, 1]");
        }
        if self.routes.is_empty() {
            return bad("routes must not be empty");
        }
        if !(2..=5).contains(&self.n_receivers) {
            return bad("n_receivers must be between 2 and 5");
        }
        if !(self.frame_rate > 0.0) {
            return bad("frame_rate must be positive");
        }
        for (name, (lo, hi)) in [
            ("pre_snap_frames", self.pre_snap_frames),
            ("snap_to_throw_frames", self.snap_to_throw_frames),
            ("after_throw_frames", self.after_throw_frames),
        ] {
            if lo < 1 || lo > hi {
                return bad(&format!("{name} must be a range with 1 <= lo <= hi"));
            }
        }
        if !(self.noise_std >= 0.0) || !(self.zone_radius >= 0.0) {
            return bad("noise_std and zone_radius must be non-negative");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generator ground truth for one cornerback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageTruth {
    pub label: Coverage,
    /// The receiver a man defender mirrors, or the one a zone defender aligns on.
    pub receiver: Id,
    pub disguised: bool,
    pub hybrid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPlay {
    pub play: Play,
    pub truth: BTreeMap<Id, CoverageTruth>,
}

type Path = Vec<[f64; 2]>;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo { rng.random_range(lo..hi) } else { lo }
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 }
}

fn frames_in(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> usize {
    rng.random_range(lo..=hi) as usize
}

fn clamp_field(p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(FIELD_X.0, FIELD_X.1), p[1].clamp(FIELD_Y.0, FIELD_Y.1)]
}

/// AR(1) noise with stationary standard deviation `sd`, zero through the
/// snap so the pre-snap period stays still.
fn ar_noise(rng: &mut ChaCha8Rng, n: usize, snap: usize, sd: f64) -> Path {
    let innovation = sd * (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
    let mut e = [0.0, 0.0];
    (0..n)
        .map(|i| {
            if i > snap {
                e = [AR_COEFFICIENT * e[0] + gauss(rng, innovation), AR_COEFFICIENT * e[1] + gauss(rng, innovation)];
            }
            e
        })
        .collect()
}

/// Receiver route after the snap: straight upfield, or a cut at depth toward
/// the sideline, toward the middle, or back toward the line of scrimmage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Go,
    Out,
    In,
    Curl,
}

impl Route {
    pub const ALL: [Route; 4] = [Route::Go, Route::Out, Route::In, Route::Curl];
}

/// Receiver path. `outside` is +1 when the near sideline is at large y.
fn receiver_path(rng: &mut ChaCha8Rng, routes: &[Route], jitter: f64, start: [f64; 2], outside: f64, snap: usize, n: usize) -> Path {
    let route = routes[rng.random_range(0..routes.len())];
    let speed = uniform(rng, 0.6, 0.85);
    let depth = uniform(rng, 5.0, 12.0);
    let cut = uniform(rng, 60.0, 100.0).to_radians();
    let mut path = Vec::with_capacity(n);
    let mut pos = start;
    let mut heading: f64 = 0.0;
    let mut cut_at: Option<usize> = None;
    for t in 0..n {
        if t <= snap {
            path.push([start[0] + gauss(rng, jitter), start[1] + gauss(rng, jitter)]);
            continue;
        }
        let since = (t - snap) as f64;
        let mut v = speed * (since / 5.0).min(1.0);
        if cut_at.is_none() && pos[0] - start[0] >= depth {
            cut_at = Some(t);
            heading = match route {
                Route::Go => heading,
                Route::Out => outside * cut,
                Route::In => -outside * cut,
                Route::Curl => PI,
            };
        }
        if let (Route::Curl, Some(c)) = (route, cut_at) {
            if t - c == 4 {
                heading = outside * PI / 2.0;
            }
            v = if t - c < 4 { 0.5 * speed } else { 0.25 };
        }
        heading += gauss(rng, 0.03);
        pos = [pos[0] + v * heading.cos(), pos[1] + v * heading.sin()];
        if pos[1] < 1.0 || pos[1] > 52.3 {
            pos[1] = pos[1].clamp(1.0, 52.3);
            heading = 0.0;
        }
        pos = clamp_field(pos);
        path.push(pos);
    }
    path
}

/// A player who holds `start` before the snap, then moves with `velocity`
/// until `max_travel` yards from the start.
fn drift_path(rng: &mut ChaCha8Rng, jitter: f64, start: [f64; 2], velocity: [f64; 2], max_travel: f64, snap: usize, n: usize) -> Path {
    let mut pos = start;
    (0..n)
        .map(|t| {
            if t > snap {
                let next = [pos[0] + velocity[0], pos[1] + velocity[1]];
                if ((next[0] - start[0]).powi(2) + (next[1] - start[1]).powi(2)).sqrt() <= max_travel {
                    pos = next;
                }
            }
            clamp_field([pos[0] + gauss(rng, jitter), pos[1] + gauss(rng, jitter)])
        })
        .collect()
}

/// Mirror of `receiver` delayed by `lag` frames at `offset`. After the throw
/// the defender closes: lag and offset shrink over `CLOSE_FRAMES` frames.
fn man_path(receiver: &Path, offset: [f64; 2], lag: usize, throw: usize, noise: &Path) -> Path {
    (0..receiver.len())
        .map(|t| {
            let close = (t.saturating_sub(throw) as f64 / CLOSE_FRAMES).min(1.0);
            let lag_t = (lag as f64 * (1.0 - close)).round() as usize;
            let scale = 1.0 - CLOSE_OFFSET_SHRINK * close;
            let r = receiver[t.saturating_sub(lag_t)];
            clamp_field([r[0] + scale * offset[0] + noise[t][0], r[1] + scale * offset[1] + noise[t][1]])
        })
        .collect()
}

struct ZonePlan {
    start: [f64; 2],
    anchor: [f64; 2],
    radius: f64,
    pull: f64,
}

/// Zone defender: moves toward its anchor with a slowly varying drift, pulled
/// toward any receiver inside `radius`.
fn zone_path(rng: &mut ChaCha8Rng, jitter: f64, plan: &ZonePlan, receivers: &[Path], snap: usize, noise: &Path) -> Path {
    let n = noise.len();
    let mut pos = plan.start;
    let mut drift = [0.0, 0.0];
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        if t > snap {
            let ramp = (((t - snap) as f64) / 4.0).min(1.0);
            let to = [plan.anchor[0] - pos[0], plan.anchor[1] - pos[1]];
            let d = (to[0] * to[0] + to[1] * to[1]).sqrt();
            let step = (ZONE_MAX_STEP * ramp).min(d);
            if d > 0.0 {
                pos = [pos[0] + step * to[0] / d, pos[1] + step * to[1] / d];
            }
            drift = [0.85 * drift[0] + gauss(rng, 0.04), 0.85 * drift[1] + gauss(rng, 0.04)];
            pos = [pos[0] + drift[0], pos[1] + drift[1]];
            let nearest = receivers
                .iter()
                .map(|r| r[t])
                .min_by(|a, b| dist(*a, pos).total_cmp(&dist(*b, pos)))
                .expect("at least one receiver");
            let gap = dist(nearest, pos);
            if gap < plan.radius && gap > 0.0 {
                let step = (plan.pull * gap).min(HYBRID_MAX_STEP);
                pos = [pos[0] + step * (nearest[0] - pos[0]) / gap, pos[1] + step * (nearest[1] - pos[1]) / gap];
            }
            pos = clamp_field(pos);
            out.push(clamp_field([pos[0] + noise[t][0], pos[1] + noise[t][1]]));
        } else {
            out.push(clamp_field([
                pos[0] + noise[t][0] + gauss(rng, jitter),
                pos[1] + noise[t][1] + gauss(rng, jitter),
            ]));
        }
    }
    out
}

/// Pushes `path` out to `HELP_SEPARATION` from every receiver, frame by frame.
fn keep_clear(path: &mut Path, receivers: &[Path]) {
    for (t, p) in path.iter_mut().enumerate() {
        for r in receivers {
            let d = dist(*p, r[t]);
            if d < HELP_SEPARATION {
                let (ux, uy) = if d > 0.0 { ((p[0] - r[t][0]) / d, (p[1] - r[t][1]) / d) } else { (1.0, 0.0) };
                *p = clamp_field([r[t][0] + HELP_SEPARATION * ux, r[t][1] + HELP_SEPARATION * uy]);
            }
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Frames with speed and direction from finite differences; direction is the
/// compass angle of motion, clockwise from +y, in `[0, 360)`.
fn to_frames(path: &Path, frame_rate: f64, snap: usize, throw: usize) -> Vec<TrackedFrame> {
    (0..path.len())
        .map(|t| {
            let (a, b) = if t == 0 { (path[0], path[1.min(path.len() - 1)]) } else { (path[t - 1], path[t]) };
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let speed = (dx * dx + dy * dy).sqrt() * frame_rate;
            let direction = round2(dx.atan2(dy).to_degrees().rem_euclid(360.0)).rem_euclid(360.0);
            let event = if t == snap {
                Some(BALL_SNAP.to_owned())
            } else if t == throw {
                Some(PASS_FORWARD.to_owned())
            } else {
                None
            };
            TrackedFrame {
                frame_index: t as u32 + 1,
                x: round2(path[t][0]),
                y: round2(path[t][1]),
                speed: round2(speed),
                direction,
                event,
            }
        })
        .collect()
}

/// Game id for play `p`: week and game number within the week.
fn game_of(config: &SimConfig, p: usize) -> (u32, u64) {
    let week = (p % config.weeks as usize) as u32 + 1;
    let game = (p / config.weeks as usize) / config.plays_per_game;
    (week, week as u64 * 1000 + game as u64 + 1)
}

fn generate_play(config: &SimConfig, p: usize) -> LabeledPlay {
    let (week, game_id) = game_of(config, p);
    let mut game_rng = seeded(config.seed, &[0x6761_6d65, game_id]);
    let home = game_rng.random_range(0..TEAMS.len());
    let away = (home + 1 + game_rng.random_range(0..TEAMS.len() - 1)) % TEAMS.len();
    let (def_team, off_team) = if p % 2 == 0 { (home, away) } else { (away, home) };

    let rng = &mut seeded(config.seed, &[p as u64]);
    let pre = frames_in(rng, config.pre_snap_frames);
    let snap = pre; // zero-based offset; frame index = offset + 1
    let throw = snap + frames_in(rng, config.snap_to_throw_frames);
    let n = throw + frames_in(rng, config.after_throw_frames) + 1;
    let los = uniform(rng, 25.0, 55.0);
    let jitter = PRE_SNAP_JITTER * config.noise_std;

    let off_id = |slot: u64| Id::from((off_team as u64 + 1) * 100 + 50 + slot);
    let def_id = |slot: u64| Id::from((def_team as u64 + 1) * 100 + slot);
    let mut tracks: Vec<(Id, TeamSide, &str, Path)> = Vec::new();

    // receivers: two wide, the rest in the slots
    let wide_lo = [los - uniform(rng, 0.5, 1.5), uniform(rng, 5.0, 12.0)];
    let wide_hi = [los - uniform(rng, 0.5, 1.5), 53.3 - uniform(rng, 5.0, 12.0)];
    let mut receivers: Vec<Path> = vec![
        receiver_path(rng, &config.routes, jitter, wide_lo, -1.0, snap, n),
        receiver_path(rng, &config.routes, jitter, wide_hi, 1.0, snap, n),
    ];
    for k in 2..config.n_receivers {
        let lo_side = k % 2 == 0;
        let y = if lo_side { wide_lo[1] + uniform(rng, 5.0, 9.0) } else { wide_hi[1] - uniform(rng, 5.0, 9.0) };
        let start = [los - uniform(rng, 0.5, 1.5), y];
        receivers.push(receiver_path(rng, &config.routes, jitter, start, if lo_side { -1.0 } else { 1.0 }, snap, n));
    }
    for (k, r) in receivers.iter().enumerate() {
        tracks.push((off_id(10 + k as u64), TeamSide::Offense, "WR", r.clone()));
    }

    let qb = drift_path(rng, jitter, [los - 5.0, CENTER_Y], [-0.35, 0.0], 3.0, snap, n);
    tracks.push((off_id(1), TeamSide::Offense, "QB", qb));
    let rb_y = CENTER_Y + uniform(rng, -2.0, 2.0);
    tracks.push((off_id(2), TeamSide::Offense, "RB", drift_path(rng, jitter, [los - 6.5, rb_y], [0.05, 0.0], 1.5, snap, n)));
    for (i, dy) in [-3.0, 0.0, 3.0].into_iter().enumerate() {
        let pos = if i == 1 { "C" } else { "G" };
        let path = drift_path(rng, jitter, [los - 1.0, CENTER_Y + dy], [-0.15, 0.0], 1.5, snap, n);
        tracks.push((off_id(3 + i as u64), TeamSide::Offense, pos, path));
    }
    let te_y = CENTER_Y + if rng.random_bool(0.5) { 5.0 } else { -5.0 };
    tracks.push((off_id(6), TeamSide::Offense, "TE", drift_path(rng, jitter, [los - 1.0, te_y], [-0.1, 0.0], 1.0, snap, n)));

    for (i, dy) in [-2.0, 2.0].into_iter().enumerate() {
        let path = drift_path(rng, jitter, [los + 1.0, CENTER_Y + dy], [-0.1, 0.0], 2.0, snap, n);
        tracks.push((def_id(20 + i as u64), TeamSide::Defense, "DT", path));
    }
    for (i, dy) in [-4.0, 4.0].into_iter().enumerate() {
        let start = [los + uniform(rng, 4.0, 6.0), CENTER_Y + dy + uniform(rng, -1.0, 1.0)];
        let travel = uniform(rng, 3.0, 7.0);
        let path = drift_path(rng, jitter, start, [0.3, 0.0], travel, snap, n);
        tracks.push((def_id(10 + i as u64), TeamSide::Defense, if i == 0 { "MLB" } else { "OLB" }, path));
    }
    for (i, (pos, y)) in [("FS", CENTER_Y - uniform(rng, 6.0, 12.0)), ("SS", CENTER_Y + uniform(rng, 6.0, 12.0))]
        .into_iter()
        .enumerate()
    {
        let start = [los + uniform(rng, 10.0, 15.0), y];
        let vel = [uniform(rng, 0.1, 0.3), uniform(rng, -0.1, 0.1)];
        tracks.push((def_id(5 + i as u64), TeamSide::Defense, pos, drift_path(rng, jitter, start, vel, 6.0, snap, n)));
    }

    for (_, side, _, path) in tracks.iter_mut() {
        if *side == TeamSide::Defense {
            keep_clear(path, &receivers);
        }
    }

    let mut truth = BTreeMap::new();
    for side in 0..2 {
        let receiver = &receivers[side];
        let outside = if side == 0 { -1.0 } else { 1.0 };
        let cb_id = def_id(1 + side as u64);
        let man = rng.random_bool(config.man_fraction);
        let disguised = !man && rng.random_bool(config.disguise_fraction);
        let hybrid = !man && !disguised && rng.random_bool(config.hybrid_fraction);
        let noise = ar_noise(rng, n, snap, config.noise_std);
        let press = [uniform(rng, 1.0, 2.5), uniform(rng, -1.0, 1.0)];
        let path = if man {
            man_path(receiver, press, config.man_lag as usize, throw, &noise)
        } else {
            let r0 = receiver[0];
            let start = if disguised {
                [r0[0] + press[0], r0[1] + press[1]]
            } else {
                [r0[0] + uniform(rng, 5.0, 9.0), r0[1] + outside * uniform(rng, -1.0, 1.5)]
            };
            let anchor = [los + uniform(rng, 8.0, 16.0), start[1] - outside * uniform(rng, 0.0, 4.0)];
            let plan = ZonePlan {
                start,
                anchor,
                radius: config.zone_radius,
                pull: if hybrid { HYBRID_PULL } else { ZONE_PULL },
            };
            zone_path(rng, jitter, &plan, &receivers, snap, &noise)
        };
        tracks.push((cb_id.clone(), TeamSide::Defense, "CB", path));
        let label = if man { Coverage::Man } else { Coverage::Zone };
        truth.insert(cb_id, CoverageTruth { label, receiver: off_id(10 + side as u64), disguised, hybrid });
    }

    let tracks = tracks
        .into_iter()
        .map(|(player_id, side, position, path)| PlayerTrack {
            player_id,
            side,
            position: position.to_owned(),
            frames: to_frames(&path, config.frame_rate, snap, throw),
        })
        .collect();
    let play = Play {
        game_id: Id::from(game_id),
        play_id: Id::from(p as u64 + 1),
        week,
        tracks,
        snap_frame: snap as u32 + 1,
        throw_frame: throw as u32 + 1,
        meta: PlayMeta {
            defense_team: Some(TEAMS[def_team].to_owned()),
            quarter: Some(rng.random_range(1..=4)),
            down: Some(rng.random_range(1..=3)),
        },
    };
    LabeledPlay { play, truth }
}

/// Generates `config.n_plays` labeled plays, ordered by (game, play).
pub fn generate_corpus(config: &SimConfig) -> Result<Vec<LabeledPlay>, SynthError> {
    config.validate()?;
    let mut plays: Vec<LabeledPlay> = (0..config.n_plays).into_par_iter().map(|p| generate_play(config, p)).collect();
    plays.sort_by(|a, b| (&a.play.game_id, &a.play.play_id).cmp(&(&b.play.game_id, &b.play.play_id)));
    Ok(plays)
}

/// `(game, play, player)` → label for every generated cornerback, in feature
/// vector order.
pub fn truth_labels(corpus: &[LabeledPlay]) -> Vec<((Id, Id, Id), Coverage)> {
    let mut out: Vec<((Id, Id, Id), Coverage)> = corpus
        .iter()
        .flat_map(|lp| {
            lp.truth
                .iter()
                .map(|(cb, t)| ((lp.play.game_id.clone(), lp.play.play_id.clone(), cb.clone()), t.label))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Item id used when comparing partitions over cornerback vectors.
pub fn item_id(game: &Id, play: &Id, player: &Id) -> String {
    format!("{game}/{play}/{player}")
}

/// Ground-truth partition over every generated cornerback.
pub fn truth_partition(corpus: &[LabeledPlay]) -> Partition {
    let labels = truth_labels(corpus);
    let ids = labels.iter().map(|((g, p, c), _)| item_id(g, p, c)).collect();
    let values: Vec<Coverage> = labels.iter().map(|(_, l)| *l).collect();
    Partition::new(ids, &values).expect("generated ids are unique")
}

/// Ingest configuration that reads the generator's CSV output, including
/// the game → week mapping.
pub fn ingest_config(corpus: &[LabeledPlay]) -> IngestConfig {
    let mut cfg = IngestConfig::default();
    for lp in corpus {
        cfg.weeks.insert(lp.play.game_id.to_string(), lp.play.week);
    }
    cfg
}

pub fn plays(corpus: &[LabeledPlay]) -> Vec<Play> {
    corpus.iter().map(|lp| lp.play.clone()).collect()
}

/// Truth sidecar: `game_id,play_id,player_id,label`.
pub fn write_truth_csv<W: Write>(sink: W, corpus: &[LabeledPlay]) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["game_id", "play_id", "player_id", "label"])?;
    for ((g, p, c), label) in truth_labels(corpus) {
        w.write_record([g.to_string(), p.to_string(), c.to_string(), label.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_truth_csv<R: Read>(source: R) -> Result<BTreeMap<(Id, Id, Id), Coverage>, SynthError> {
    let mut r = csv::Reader::from_reader(source);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(SynthError::Malformed { line, message: format!("expected 4 fields, found {}", rec.len()) });
        }
        let label: Coverage = rec[3].parse().map_err(|e: String| SynthError::Malformed { line, message: e })?;
        out.insert((Id::new(&rec[0]), Id::new(&rec[1]), Id::new(&rec[2])), label);
    }
    Ok(out)
}
