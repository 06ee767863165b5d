use crate::features::{column_name, FeatureKind, Window};
use crate::gmm::{ComponentLabels, GmmModel};

pub const LABEL_MAN: &str = "MAN";
pub const LABEL_ZONE: &str = "ZONE";

/// Column the naming heuristic reads: a defender in man coverage stays much
/// closer to its receiver than the nearest help defender does.
pub const RATIO_COLUMN: &str = "SNAP_TO_THROW__RAT_MEAN";

const TIE_MARGIN: f64 = 1e-6;

fn cluster_labels(g: usize) -> Vec<String> {
    (0..g).map(|i| format!("CLUSTER_{i}")).collect()
}

/// The ratio column used by the heuristic: the snap-to-throw one, else the
/// only `*RAT_MEAN` column (single-window models).
fn ratio_column(feature_names: &[String]) -> Option<usize> {
    debug_assert_eq!(RATIO_COLUMN, column_name(Window::SnapToThrow, FeatureKind::RatMean));
    if let Some(i) = feature_names.iter().position(|n| n == RATIO_COLUMN) {
        return Some(i);
    }
    let suffix = FeatureKind::RatMean.name();
    let mut hits = feature_names.iter().enumerate().filter(|(_, n)| n.ends_with(suffix));
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

/// Names the components of a fitted model.
///
/// With two components the one whose de-standardized mean ratio is lower is
/// `MAN`, the other `ZONE`; means within 1e-6 are `ambiguous` and keep
/// `CLUSTER_i` names. Any other G, or a missing ratio column, gives
/// `CLUSTER_i`. A manual override with one label per component always wins.
pub fn semantic_labels(model: &GmmModel, feature_names: &[String], manual: Option<&[String]>) -> ComponentLabels {
    let g = model.n_components();
    let heuristic = format!("lower {RATIO_COLUMN} mean is {LABEL_MAN}");
    let column = ratio_column(feature_names);
    let margin = match (g, column) {
        (2, Some(c)) => {
            let means = model.raw_means();
            Some((means[0][c] - means[1][c]).abs())
        }
        _ => None,
    };

    if let Some(labels) = manual {
        if labels.len() == g {
            log::info!("component labels overridden manually: {labels:?}");
            return ComponentLabels { labels: labels.to_vec(), status: "override".into(), heuristic, margin };
        }
        log::warn!("ignoring label override with {} labels for {g} components", labels.len());
    }

    let (labels, status) = match (g, column, margin) {
        (2, Some(c), Some(m)) if m >= TIE_MARGIN => {
            let means = model.raw_means();
            let man = if means[0][c] < means[1][c] { 0 } else { 1 };
            let mut labels = vec![LABEL_ZONE.to_string(); 2];
            labels[man] = LABEL_MAN.to_string();
            (labels, "heuristic")
        }
        (2, Some(_), Some(_)) => (cluster_labels(g), "ambiguous"),
        (2, None, _) => (cluster_labels(g), "unavailable"),
        _ => (cluster_labels(g), "none"),
    };
    ComponentLabels { labels, status: status.into(), heuristic, margin }
}

/// Index of the `MAN` component, if the labels carry man/zone semantics.
pub fn man_component(labels: &ComponentLabels) -> Option<usize> {
    let man = labels.labels.iter().position(|l| l == LABEL_MAN)?;
    labels.labels.iter().any(|l| l == LABEL_ZONE).then_some(man)
}
