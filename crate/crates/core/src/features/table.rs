use std::collections::BTreeMap;
use std::io::{Read, Write};
use thiserror::Error;

use super::{feature_names, FeatureVector, Window};
use crate::Id;

/// Prefix of the missing-flag column paired with each feature column.
pub const MISSING_PREFIX: &str = "missing__";

const ID_COLUMNS: [&str; 4] = ["game_id", "play_id", "player_id", "week"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("feature table header must start with game_id,play_id,player_id,week")]
    BadHeader,
    #[error("line {line}: column {column:?} has malformed value {value:?}")]
    Malformed { line: u64, column: String, value: String },
    #[error("unknown feature column {0:?}")]
    UnknownColumn(String),
}

/// Named feature columns plus one row per (play, cornerback).
///
/// CSV layout: `game_id,play_id,player_id,week`, then one column per feature
/// (empty cell when missing), then `missing__<feature>` flags as 0/1.
#[derive(Clone, Debug)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    /// Table over the standard 55 columns.
    pub fn standard(rows: Vec<FeatureVector>) -> Self {
        FeatureTable { names: feature_names(), rows }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Distinct weeks in ascending order.
    pub fn weeks(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.rows.iter().map(|r| r.week).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    /// Family of a column: the part after the window prefix
    /// (`THROW_TO_END__OFF_DIR_VAR` → `OFF_DIR_VAR`); columns without a
    /// prefix form their own family.
    pub fn family_of(name: &str) -> &str {
        name.split_once("__").map_or(name, |(_, f)| f)
    }

    /// Family name → column indices, in first-appearance order.
    pub fn families(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<String> = Vec::new();
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.names.iter().enumerate() {
            let fam = Self::family_of(n).to_owned();
            if !map.contains_key(&fam) {
                order.push(fam.clone());
            }
            map.entry(fam).or_default().push(i);
        }
        order.into_iter().map(|f| {
            let cols = map.remove(&f).unwrap_or_default();
            (f, cols)
        }).collect()
    }

    /// Columns belonging to one window.
    pub fn window_columns(&self, window: Window) -> Vec<usize> {
        let prefix = format!("{}__", window.name());
        self.names.iter().enumerate().filter(|(_, n)| n.starts_with(&prefix)).map(|(i, _)| i).collect()
    }

    /// New table restricted to `columns`, in the given order.
    pub fn select(&self, columns: &[usize]) -> FeatureTable {
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| FeatureVector {
                values: columns.iter().map(|&c| r.values[c]).collect(),
                missing: columns.iter().map(|&c| r.missing[c]).collect(),
                ..r.clone()
            })
            .collect();
        FeatureTable { names, rows }
    }

    pub fn select_names(&self, names: &[String]) -> Result<FeatureTable, TableError> {
        let cols = names
            .iter()
            .map(|n| self.column(n).ok_or_else(|| TableError::UnknownColumn(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.select(&cols))
    }

    pub fn append_column(&mut self, name: impl Into<String>, values: &[f64]) {
        assert_eq!(values.len(), self.rows.len(), "one value per row");
        self.names.push(name.into());
        for (r, &v) in self.rows.iter_mut().zip(values) {
            r.values.push(v);
            r.missing.push(!v.is_finite());
        }
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(sink);
        let header: Vec<String> = ID_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.names.iter().cloned())
            .chain(self.names.iter().map(|n| format!("{MISSING_PREFIX}{n}")))
            .collect();
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for r in &self.rows {
            row.clear();
            row.extend([r.game_id.to_string(), r.play_id.to_string(), r.player_id.to_string(), r.week.to_string()]);
            row.extend(r.values.iter().zip(&r.missing).map(|(v, &m)| if m { String::new() } else { crate::format_float(*v) }));
            row.extend(r.missing.iter().map(|&m| if m { "1".to_string() } else { "0".to_string() }));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`FeatureTable::write_csv`]. Missing-flag
    /// columns are optional; an empty value cell also marks a feature missing.
    pub fn read_csv<R: Read>(source: R) -> Result<FeatureTable, TableError> {
        let mut rdr = csv::Reader::from_reader(source);
        let header = rdr.headers()?.clone();
        if header.len() < ID_COLUMNS.len() || header.iter().zip(ID_COLUMNS).any(|(h, e)| h.trim() != e) {
            return Err(TableError::BadHeader);
        }
        let mut names = Vec::new();
        let mut value_cols = Vec::new();
        let mut flag_cols: BTreeMap<String, usize> = BTreeMap::new();
        for (i, h) in header.iter().enumerate().skip(ID_COLUMNS.len()) {
            match h.trim().strip_prefix(MISSING_PREFIX) {
                Some(base) => {
                    flag_cols.insert(base.to_owned(), i);
                }
                None => {
                    names.push(h.trim().to_owned());
                    value_cols.push(i);
                }
            }
        }
        let flag_for: Vec<Option<usize>> = names.iter().map(|n| flag_cols.get(n).copied()).collect();

        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let cell = |i: usize| rec.get(i).unwrap_or("").trim();
            let bad = |i: usize| TableError::Malformed {
                line,
                column: header.get(i).unwrap_or("?").to_owned(),
                value: cell(i).to_owned(),
            };
            let week: u32 = cell(3).parse().map_err(|_| bad(3))?;
            let mut values = Vec::with_capacity(names.len());
            let mut missing = Vec::with_capacity(names.len());
            for (&vc, fc) in value_cols.iter().zip(&flag_for) {
                let flagged = match fc {
                    Some(i) => match cell(*i) {
                        "1" => true,
                        "0" => false,
                        _ => return Err(bad(*i)),
                    },
                    None => false,
                };
                let raw = cell(vc);
                if flagged || raw.is_empty() {
                    values.push(f64::NAN);
                    missing.push(true);
                } else {
                    let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| bad(vc))?;
                    values.push(v);
                    missing.push(false);
                }
            }
            rows.push(FeatureVector {
                game_id: Id::new(cell(0)),
                play_id: Id::new(cell(1)),
                player_id: Id::new(cell(2)),
                week,
                values,
                missing,
            });
        }
        Ok(FeatureTable { names, rows })
    }
}
