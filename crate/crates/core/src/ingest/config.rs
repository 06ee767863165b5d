use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::IngestError;

/// Logical field → CSV column name.
///
/// Defaults follow the public 2019 Big Data Bowl tracking files. `position`
/// and the play-level metadata columns are not part of those files and must
/// be joined in upstream; metadata columns are optional and ignored when the
/// header lacks them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub game: String,
    pub play: String,
    pub player: String,
    pub frame: String,
    pub x: String,
    pub y: String,
    pub speed: String,
    pub direction: String,
    pub event: String,
    pub team: String,
    pub position: String,
    pub quarter: Option<String>,
    pub down: Option<String>,
    pub defense_team: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            game: "gameId".into(),
            play: "playId".into(),
            player: "nflId".into(),
            frame: "frame.id".into(),
            x: "x".into(),
            y: "y".into(),
            speed: "s".into(),
            direction: "dir".into(),
            event: "event".into(),
            team: "team".into(),
            position: "position".into(),
            quarter: Some("quarter".into()),
            down: Some("down".into()),
            defense_team: Some("defenseTeam".into()),
        }
    }
}

/// Values of the team column that identify each side. Rows whose team value
/// matches neither list (the football row, for example) are skipped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeamValues {
    pub offense: Vec<String>,
    pub defense: Vec<String>,
}

impl Default for TeamValues {
    fn default() -> Self {
        TeamValues { offense: vec!["offense".into()], defense: vec!["defense".into()] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CornerbackSet {
    pub positions: BTreeSet<String>,
}

impl Default for CornerbackSet {
    fn default() -> Self {
        CornerbackSet { positions: ["CB".to_string()].into_iter().collect() }
    }
}

/// Ingest configuration, stored as TOML:
///
/// ```toml
/// [columns]
/// game = "gameId"
///
/// [teams]
/// offense = ["offense"]
/// defense = ["defense"]
///
/// [cornerbacks]
/// positions = ["CB"]
///
/// [weeks]
/// 2017090700 = 1
/// ```
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub columns: ColumnMapping,
    pub teams: TeamValues,
    pub cornerbacks: CornerbackSet,
    /// game id → week number
    pub weeks: BTreeMap<String, u32>,
}

impl IngestConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, IngestError> {
        toml::from_str(s).map_err(|e| IngestError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("ingest config is always representable as TOML")
    }

    pub fn week_of(&self, game_id: &str) -> Option<u32> {
        self.weeks.get(game_id).copied()
    }
}
