use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, MALIGNANT};
use crate::error::{Error, Result};
use crate::featnet::{predict_proba, WeightBundle};
use crate::image::Image;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    /// (id, malignant-analog probability) in manifest order.
    pub scores: Vec<(String, f64)>,
    /// (id, reason) for images that could not be scored.
    pub errors: Vec<(String, String)>,
}

/// Scores every synthetic record with the classifier head of `bundle`.
pub fn pseudo_label_scores(bundle: &WeightBundle, synthetic: &DatasetManifest) -> Result<ScoreOutcome> {
    if bundle.spec.num_outputs() != Some(2) {
        return Err(Error::InvalidArgument("pseudo-labelling needs a two-way classifier head".into()));
    }
    let mut out = ScoreOutcome::default();
    let mut loaded: Vec<(String, Image)> = Vec::new();
    for rec in synthetic.synthetics() {
        match synthetic.load_image(&rec.id) {
            Ok(img) => loaded.push((rec.id.clone(), img)),
            Err(e) => {
                log::warn!("cannot score `{}`: {e}", rec.id);
                out.errors.push((rec.id.clone(), e.to_string()));
            }
        }
    }
    for chunk in loaded.chunks(64) {
        let imgs: Vec<&Image> = chunk.iter().map(|(_, i)| i).collect();
        match predict_proba(bundle, &imgs) {
            Ok(p) => {
                for ((id, _), row) in chunk.iter().zip(p.chunks_exact(2)) {
                    out.scores.push((id.clone(), row[usize::from(MALIGNANT)]));
                }
            }
            Err(e) => {
                for (id, _) in chunk {
                    out.errors.push((id.clone(), e.to_string()));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelReport {
    pub threshold: f64,
    /// Images with score below / at or above the threshold.
    pub counts: [usize; 2],
}

/// Threshold that splits `scores` into classes whose sizes differ by at most
/// one: the midpoint of the two scores around the median.
pub fn balance_threshold(scores: &[f64]) -> Result<PseudoLabelReport> {
    if scores.len() < 2 {
        return Err(Error::InvalidArgument("balancing needs at least two scores".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    // Cut after the top `k` scores; prefer the larger half when n is odd.
    for k in [n.div_ceil(2), n / 2] {
        let (hi, lo) = (sorted[k - 1], sorted[k]);
        if hi > lo {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid > lo { mid } else { hi };
            return Ok(PseudoLabelReport { threshold, counts: [n - k, k] });
        }
    }
    if sorted[0] == sorted[n - 1] {
        return Err(Error::InvalidArgument(format!("all {n} scores equal {}; no balancing threshold exists", sorted[0])));
    }
    Err(Error::InvalidArgument(format!(
        "scores tie across the median ({}); no threshold balances the classes",
        sorted[n / 2]
    )))
}

/// Fallback when no threshold balances: rank by score (ties by position)
/// and give the upper half the malignant-analog label.
pub fn rank_split_labels(scores: &[f64]) -> Vec<u8> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; scores.len()];
    for &i in &order[..scores.len().div_ceil(2)] {
        labels[i] = MALIGNANT;
    }
    labels
}

/// Labels every scored image, falling back to [`rank_split_labels`] when no
/// balancing threshold exists. Returns the report, with `threshold` NaN on
/// fallback.
pub fn apply_pseudo_labels(manifest: &mut DatasetManifest, scores: &[(String, f64)]) -> Result<PseudoLabelReport> {
    let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let (labels, report) = match balance_threshold(&values) {
        Ok(rep) => (values.iter().map(|&s| u8::from(s >= rep.threshold)).collect::<Vec<u8>>(), rep),
        Err(e) => {
            log::warn!("{e}; falling back to rank split");
            let labels = rank_split_labels(&values);
            let ones = labels.iter().filter(|&&l| l == 1).count();
            (labels, PseudoLabelReport { threshold: f64::NAN, counts: [values.len() - ones, ones] })
        }
    };
    for ((id, s), l) in scores.iter().zip(labels) {
        manifest.set_pseudo_label(id, l, *s)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every candidate cut: each distinct score and the value above the max.
    fn sweep_best_gap(scores: &[f64]) -> usize {
        let mut cands: Vec<f64> = scores.to_vec();
        cands.push(f64::INFINITY);
        cands
            .iter()
            .map(|&t| {
                let hi = scores.iter().filter(|&&s| s >= t).count();
                hi.abs_diff(scores.len() - hi)
            })
            .min()
            .unwrap()
    }

    #[test]
    fn examples() {
        let r = balance_threshold(&[0.9, 0.8, 0.6, 0.4, 0.2, 0.1]).unwrap();
        assert!((r.threshold - 0.5).abs() < 1e-15);
        assert_eq!(r.counts, [3, 3]);
        let r = balance_threshold(&[0.2, 0.8]).unwrap();
        assert!((r.threshold - 0.5).abs() < 1e-15);
        assert_eq!(r.counts, [1, 1]);
        let r = balance_threshold(&[0.5, 0.1, 0.9, 0.3, 0.7]).unwrap();
        assert_eq!(r.counts, [2, 3]);
        assert!(balance_threshold(&[0.4; 4]).is_err());
        assert!(balance_threshold(&[0.4]).is_err());
    }

    #[test]
    fn rank_split_balances_ties() {
        let l = rank_split_labels(&[0.5; 5]);
        assert_eq!(l, vec![1, 1, 1, 0, 0]);
        let l = rank_split_labels(&[0.1, 0.5, 0.5, 0.5]);
        assert_eq!(l.iter().filter(|&&x| x == 1).count(), 2);
        assert_eq!(l[0], 0);
    }

    proptest! {
        #[test]
        fn threshold_balances_like_the_sweep(raw in prop::collection::vec(0u16..1000, 2..40)) {
            let scores: Vec<f64> = raw.iter().map(|&v| f64::from(v) / 1000.0).collect();
            match balance_threshold(&scores) {
                Ok(r) => {
                    let hi = scores.iter().filter(|&&s| s >= r.threshold).count();
                    prop_assert_eq!(hi, r.counts[1]);
                    prop_assert!(hi.abs_diff(scores.len() - hi) <= 1);
                    prop_assert_eq!(hi.abs_diff(scores.len() - hi), sweep_best_gap(&scores));
                }
                Err(_) => prop_assert!(sweep_best_gap(&scores) > 1),
            }
        }
    }
}
