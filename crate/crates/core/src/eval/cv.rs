use rayon::prelude::*;
use std::io::Write;

use super::{ari_labels, design_matrix, fill_values, EvalError};
use crate::features::FeatureTable;
use crate::gmm::{fit, FitConfig, GmmError};
use crate::rng::derive_seed;

/// Result of one held-out week.
#[derive(Clone, Debug, PartialEq)]
pub enum FoldOutcome {
    Ari(f64),
    /// Both partitions disagree but the index has a zero denominator.
    Undefined,
    /// The fold could not be fitted; the reason is kept for reporting.
    Skipped(String),
}

impl FoldOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            FoldOutcome::Ari(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub week: u32,
    pub outcome: FoldOutcome,
}

/// Cross-validation result for one G.
#[derive(Clone, Debug, PartialEq)]
pub struct CvRow {
    pub g: usize,
    /// One entry per distinct week, ascending.
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean over folds with a defined ARI.
    pub mean_ari: f64,
}

impl CvRow {
    pub fn defined_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.outcome.value().is_some()).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub rows: Vec<CvRow>,
    pub g_star: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationMode {
    /// Remove one column at a time.
    Column,
    /// Remove every column of a feature family (all windows) at once.
    Family,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceEntry {
    /// Column or family name.
    pub name: String,
    pub removed: Vec<String>,
    pub mean_ari_without: f64,
    /// Baseline average ARI minus the average ARI without this feature.
    pub influence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceReport {
    pub g: usize,
    pub mode: AblationMode,
    pub baseline: f64,
    /// Sorted by influence, descending; ties keep column order.
    pub entries: Vec<InfluenceEntry>,
}

/// Rows grouped by week, weeks ascending, rows within a week ordered by key so
/// results do not depend on input order.
fn weeks_of(table: &FeatureTable) -> Vec<(u32, Vec<usize>)> {
    let mut idx: Vec<usize> = (0..table.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&table.rows[a], &table.rows[b]);
        ra.week.cmp(&rb.week).then_with(|| ra.key().cmp(&rb.key()))
    });
    let mut out: Vec<(u32, Vec<usize>)> = Vec::new();
    for i in idx {
        let w = table.rows[i].week;
        match out.last_mut() {
            Some((lw, rows)) if *lw == w => rows.push(i),
            _ => out.push((w, vec![i])),
        }
    }
    out
}

fn fit_and_label(table: &FeatureTable, fit_rows: &[usize], label_rows: &[usize], config: &FitConfig) -> Result<Vec<usize>, GmmError> {
    let fill = fill_values(table, fit_rows);
    let model = fit(&design_matrix(table, fit_rows, &fill), config)?;
    model.assign_labels(&design_matrix(table, label_rows, &fill))
}

fn run_fold(table: &FeatureTable, weeks: &[(u32, Vec<usize>)], k: usize, g: usize, ablation: u64, config: &FitConfig) -> FoldResult {
    let (week, test) = &weeks[k];
    let train: Vec<usize> = weeks.iter().filter(|(w, _)| w != week).flat_map(|(_, r)| r.iter().copied()).collect();
    let seed = derive_seed(config.seed, &[g as u64, *week as u64, ablation]);
    let cfg = FitConfig { components: g, seed, ..config.clone() };
    let skip = |reason: String| FoldResult { week: *week, outcome: FoldOutcome::Skipped(reason) };
    if test.len() <= g {
        return skip(format!("week {week} has {} vectors, need more than G = {g}", test.len()));
    }
    let train_labels = match fit_and_label(table, &train, test, &cfg) {
        Ok(l) => l,
        Err(e) => return skip(format!("training fit failed: {e}")),
    };
    let test_cfg = FitConfig { seed: derive_seed(seed, &[1]), ..cfg };
    let test_labels = match fit_and_label(table, test, test, &test_cfg) {
        Ok(l) => l,
        Err(e) => return skip(format!("held-out fit failed: {e}")),
    };
    let outcome = match ari_labels(&train_labels, &test_labels) {
        Ok(v) => FoldOutcome::Ari(v),
        Err(_) => FoldOutcome::Undefined,
    };
    FoldResult { week: *week, outcome }
}

fn cv_with_ablation(table: &FeatureTable, g: usize, config: &FitConfig, ablation: u64) -> Result<CvRow, EvalError> {
    let weeks = weeks_of(table);
    if weeks.len() < 2 {
        return Err(EvalError::TooFewWeeks(weeks.len()));
    }
    let folds: Vec<FoldResult> =
        (0..weeks.len()).into_par_iter().map(|k| run_fold(table, &weeks, k, g, ablation, config)).collect();
    for f in &folds {
        if let FoldOutcome::Skipped(reason) = &f.outcome {
            log::warn!("G = {g}: skipped week {}: {reason}", f.week);
        }
    }
    let defined: Vec<f64> = folds.iter().filter_map(|f| f.outcome.value()).collect();
    if defined.is_empty() {
        return Err(EvalError::NoDefinedFolds(g));
    }
    let mean_ari = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(CvRow { g, folds, mean_ari })
}

/// Leave-one-week-out agreement for one G: for each week, a model fitted on
/// the other weeks and a model fitted on that week alone both label the
/// week's vectors, and the two labelings are compared by ARI.
///
/// Missing cells are imputed with the fit set's column means. Fold seeds are
/// derived from `(config.seed, G, week)`.
pub fn lowo_cv_ari(table: &FeatureTable, g: usize, config: &FitConfig) -> Result<CvRow, EvalError> {
    cv_with_ablation(table, g, config, 0)
}

/// Cross-validates every G in `gs` and picks the highest average ARI; ties go
/// to the smaller G.
pub fn select_g(table: &FeatureTable, gs: &[usize], config: &FitConfig) -> Result<CvReport, EvalError> {
    if gs.is_empty() {
        return Err(EvalError::InvalidArgument("empty range of G".into()));
    }
    let mut gs = gs.to_vec();
    gs.sort_unstable();
    gs.dedup();
    let rows = gs.iter().map(|&g| lowo_cv_ari(table, g, config)).collect::<Result<Vec<_>, _>>()?;
    let mut best = &rows[0];
    for r in &rows[1..] {
        if r.mean_ari > best.mean_ari {
            best = r;
        }
    }
    let g_star = best.g;
    Ok(CvReport { rows, g_star })
}

/// Drop in average LOWO-CV ARI when each feature is removed.
pub fn feature_influence(table: &FeatureTable, g: usize, config: &FitConfig, mode: AblationMode) -> Result<InfluenceReport, EvalError> {
    if table.dim() < 2 {
        return Err(EvalError::InvalidArgument("feature influence needs at least 2 columns".into()));
    }
    let groups: Vec<(String, Vec<usize>)> = match mode {
        AblationMode::Column => table.names.iter().enumerate().map(|(i, n)| (n.clone(), vec![i])).collect(),
        AblationMode::Family => table.families(),
    };
    if groups.iter().any(|(_, cols)| cols.len() == table.dim()) {
        return Err(EvalError::InvalidArgument("cannot remove every column".into()));
    }
    let baseline = cv_with_ablation(table, g, config, 0)?.mean_ari;
    let without: Vec<Result<f64, EvalError>> = groups
        .par_iter()
        .enumerate()
        .map(|(m, (_, cols))| {
            let keep: Vec<usize> = (0..table.dim()).filter(|c| !cols.contains(c)).collect();
            cv_with_ablation(&table.select(&keep), g, config, m as u64 + 1).map(|r| r.mean_ari)
        })
        .collect();
    let mut entries = Vec::with_capacity(groups.len());
    for ((name, cols), res) in groups.into_iter().zip(without) {
        let mean_ari_without = res?;
        entries.push(InfluenceEntry {
            name,
            removed: cols.iter().map(|&c| table.names[c].clone()).collect(),
            mean_ari_without,
            influence: baseline - mean_ari_without,
        });
    }
    entries.sort_by(|a, b| b.influence.total_cmp(&a.influence));
    Ok(InfluenceReport { g, mode, baseline, entries })
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

impl CvReport {
    /// One row per G: `g,mean_ari,defined_folds,skipped_folds`.
    pub fn write_summary_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["g", "mean_ari", "defined_folds", "skipped_folds"])?;
        for r in &self.rows {
            let skipped = r.folds.len() - r.defined_folds();
            w.write_record([r.g.to_string(), fmt_f(r.mean_ari), r.defined_folds().to_string(), skipped.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per (G, week): `g,week,status,ari,detail`.
    pub fn write_folds_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["g", "week", "status", "ari", "detail"])?;
        for r in &self.rows {
            for f in &r.folds {
                let (status, ari, detail) = match &f.outcome {
                    FoldOutcome::Ari(v) => ("ok", fmt_f(*v), String::new()),
                    FoldOutcome::Undefined => ("undefined", String::new(), String::new()),
                    FoldOutcome::Skipped(why) => ("skipped", String::new(), why.clone()),
                };
                w.write_record([r.g.to_string(), f.week.to_string(), status.into(), ari, detail])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Plot series `x,y` = G, average ARI.
    pub fn write_series_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["x", "y"])?;
        for r in &self.rows {
            w.write_record([r.g.to_string(), fmt_f(r.mean_ari)])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl InfluenceReport {
    /// Ranked table: `rank,feature,removed_columns,mean_ari_without,influence`.
    pub fn write_csv<W: Write>(&self, sink: W, top: Option<usize>) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["rank", "feature", "removed_columns", "mean_ari_without", "influence"])?;
        for (i, e) in self.entries.iter().take(top.unwrap_or(usize::MAX)).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                e.name.clone(),
                e.removed.join(";"),
                fmt_f(e.mean_ari_without),
                fmt_f(e.influence),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plot series `x,y` = feature name, influence.
    pub fn write_series_csv<W: Write>(&self, sink: W, top: Option<usize>) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["x", "y"])?;
        for e in self.entries.iter().take(top.unwrap_or(usize::MAX)) {
            w.write_record([e.name.clone(), fmt_f(e.influence)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::testdata::two_class_table;

    fn cfg() -> FitConfig {
        FitConfig { n_restarts: 3, ..FitConfig::default() }
    }

    #[test]
    fn separated_clusters_agree_in_every_fold() {
        let (t, _) = two_class_table(2, 60, 2, 8.0, 1);
        let row = lowo_cv_ari(&t, 2, &cfg()).unwrap();
        assert_eq!(row.folds.len(), 2);
        for f in &row.folds {
            assert_eq!(f.outcome, FoldOutcome::Ari(1.0));
        }
        assert_eq!(row.mean_ari, 1.0);
    }

    #[test]
    fn isotropic_noise_gives_low_agreement() {
        let (t, _) = two_class_table(6, 50, 3, 0.0, 2);
        let row = lowo_cv_ari(&t, 2, &cfg()).unwrap();
        assert!(row.mean_ari < 0.2, "{}", row.mean_ari);
    }

    #[test]
    fn one_ari_per_week() {
        let (t, _) = two_class_table(6, 20, 2, 6.0, 3);
        let row = lowo_cv_ari(&t, 2, &cfg()).unwrap();
        assert_eq!(row.folds.iter().map(|f| f.week).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
        for f in &row.folds {
            let v = f.outcome.value().unwrap();
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn needs_two_weeks() {
        let (t, _) = two_class_table(1, 20, 2, 6.0, 4);
        assert!(matches!(lowo_cv_ari(&t, 2, &cfg()), Err(EvalError::TooFewWeeks(1))));
    }

    #[test]
    fn small_weeks_are_skipped_and_reported() {
        let (mut t, _) = two_class_table(3, 30, 2, 6.0, 5);
        let mut kept = 0;
        t.rows.retain(|r| {
            kept += usize::from(r.week == 2);
            r.week != 2 || kept <= 2
        });
        let row = lowo_cv_ari(&t, 2, &cfg()).unwrap();
        assert!(matches!(row.folds[1].outcome, FoldOutcome::Skipped(_)));
        assert_eq!(row.defined_folds(), 2);
    }

    #[test]
    fn result_ignores_row_order() {
        let (t, _) = two_class_table(3, 24, 2, 2.0, 6);
        let mut rev = t.clone();
        rev.rows.reverse();
        assert_eq!(lowo_cv_ari(&t, 2, &cfg()).unwrap(), lowo_cv_ari(&rev, 2, &cfg()).unwrap());
    }

    #[test]
    fn selection_prefers_planted_g_and_breaks_ties_low() {
        let (t, _) = two_class_table(4, 40, 2, 8.0, 7);
        let r = select_g(&t, &[2], &cfg()).unwrap();
        assert_eq!((r.rows.len(), r.g_star), (1, 2));
        let r = select_g(&t, &[4, 2, 3], &cfg()).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.g).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(r.g_star, 2);
        assert!(select_g(&t, &[], &cfg()).is_err());
    }

    #[test]
    fn influence_ranks_the_signal_column_first() {
        let (mut t, _) = two_class_table(4, 60, 3, 6.0, 8);
        let dup: Vec<f64> = t.rows.iter().map(|r| r.values[0]).collect();
        t.append_column("W__F0_COPY", &dup);
        let cfg = FitConfig { n_restarts: 10, ..cfg() };
        let rep = feature_influence(&t, 2, &cfg, AblationMode::Column).unwrap();
        assert_eq!(rep.entries.len(), 4);
        let noise = rep.entries.iter().filter(|e| e.name == "W__F1" || e.name == "W__F2");
        for e in noise {
            assert!(e.influence.abs() < 0.05, "{e:?}");
        }
        // either copy alone carries the signal
        let copy = rep.entries.iter().find(|e| e.name == "W__F0_COPY").unwrap();
        assert!(copy.influence.abs() < 0.05, "{rep:#?}");
        for w in rep.entries.windows(2) {
            assert!(w[0].influence >= w[1].influence);
        }
    }

    #[test]
    fn family_ablation_removes_all_windows() {
        let (mut t, _) = two_class_table(3, 30, 2, 6.0, 9);
        t.names = vec!["A__SIG".into(), "A__NOISE".into()];
        let sig: Vec<f64> = t.rows.iter().map(|r| r.values[0]).collect();
        t.append_column("B__SIG", &sig);
        let rep = feature_influence(&t, 2, &cfg(), AblationMode::Family).unwrap();
        assert_eq!(rep.entries.len(), 2);
        assert_eq!(rep.entries[0].name, "SIG");
        assert_eq!(rep.entries[0].removed, vec!["A__SIG".to_string(), "B__SIG".to_string()]);
        assert!(rep.entries[0].influence > 0.0, "{rep:#?}");
    }

    #[test]
    fn reports_serialize() {
        let (t, _) = two_class_table(2, 30, 2, 6.0, 10);
        let r = select_g(&t, &[2, 3], &cfg()).unwrap();
        let mut s = Vec::new();
        r.write_series_csv(&mut s).unwrap();
        let text = String::from_utf8(s).unwrap();
        assert!(text.starts_with("x,y\n2,"));
        assert_eq!(text.lines().count(), 3);
        let mut f = Vec::new();
        r.write_folds_csv(&mut f).unwrap();
        assert_eq!(String::from_utf8(f).unwrap().lines().count(), 5);
    }
}
