use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, BENIGN, MALIGNANT};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub content_id: String,
    pub style_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPlan {
    pub entries: Vec<PairEntry>,
}

impl PairPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that every id is a real record and no pair repeats.
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            for id in [&e.content_id, &e.style_id] {
                if !manifest.get(id).is_some_and(|r| r.is_real()) {
                    return Err(Error::InvalidArgument(format!("plan references `{id}`, which is not a real image")));
                }
            }
            if !seen.insert((&e.content_id, &e.style_id)) {
                return Err(Error::InvalidArgument(format!("pair ({}, {}) repeats", e.content_id, e.style_id)));
            }
        }
        Ok(())
    }
}

/// Picks `budget` distinct (benign content, malignant style) pairs. Content
/// ids are visited round-robin in shuffled order, so every content image is
/// used once before any is reused.
pub fn plan_pairs(manifest: &DatasetManifest, budget: usize, seed: u64) -> Result<PairPlan> {
    let mut contents = manifest.real_ids(BENIGN);
    let mut styles = manifest.real_ids(MALIGNANT);
    if contents.is_empty() || styles.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "pairing needs real images of both classes, got {} benign and {} malignant",
            contents.len(),
            styles.len()
        )));
    }
    let max = contents.len() * styles.len();
    if budget > max {
        return Err(Error::InvalidArgument(format!(
            "budget {budget} exceeds the {max} distinct pairs available"
        )));
    }
    contents.shuffle(&mut seeds::rng(seed, &[seeds::tag("pairs"), 0]));
    styles.shuffle(&mut seeds::rng(seed, &[seeds::tag("pairs"), 1]));
    let (nc, ns) = (contents.len(), styles.len());
    let entries = (0..budget)
        .map(|k| {
            let (round, i) = (k / nc, k % nc);
            let content_id = contents[i].clone();
            let style_id = styles[(i + round) % ns].clone();
            let seed = seeds::derive(seed, &[seeds::tag(&content_id), seeds::tag(&style_id)]);
            PairEntry { content_id, style_id, seed }
        })
        .collect();
    Ok(PairPlan { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::manifest::ManifestRecord;

    fn manifest(nb: usize, nm: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new("/tmp");
        for i in 0..nb {
            m.push(ManifestRecord::real(format!("b{i}"), format!("b{i}.png"), BENIGN)).unwrap();
        }
        for i in 0..nm {
            m.push(ManifestRecord::real(format!("m{i}"), format!("m{i}.png"), MALIGNANT)).unwrap();
        }
        m
    }

    #[test]
    fn exhaustive_budget_covers_all_pairs() {
        let m = manifest(3, 2);
        let p = plan_pairs(&m, 6, 1).unwrap();
        let set: HashSet<_> = p.entries.iter().map(|e| (e.content_id.clone(), e.style_id.clone())).collect();
        assert_eq!(set.len(), 6);
        p.validate(&m).unwrap();
        assert!(plan_pairs(&m, 7, 1).unwrap_err().to_string().contains('6'));
    }

    #[test]
    fn contents_covered_before_repeats() {
        let m = manifest(3, 2);
        let p = plan_pairs(&m, 4, 9).unwrap();
        let first: HashSet<_> = p.entries[..3].iter().map(|e| e.content_id.clone()).collect();
        assert_eq!(first.len(), 3);
        assert_eq!(p, plan_pairs(&m, 4, 9).unwrap());
        assert!(plan_pairs(&manifest(0, 2), 1, 1).is_err());
    }
}
