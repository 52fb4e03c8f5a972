use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, BENIGN, MALIGNANT};
use crate::error::{Error, Result};
use crate::seeds;

/// Which real images a fold's training synthetics must not derive from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageScope {
    Test,
    TestAndVal,
}

impl LeakageScope {
    pub fn tag(self) -> &'static str {
        match self {
            LeakageScope::Test => "test",
            LeakageScope::TestAndVal => "test_and_val",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "test" => Some(LeakageScope::Test),
            "test_and_val" => Some(LeakageScope::TestAndVal),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<String>,
    pub validation: Vec<String>,
    pub training: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub scope: LeakageScope,
    pub folds: Vec<Fold>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub fold: usize,
    pub synthetic_id: String,
    pub real_id: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.synthetic_id == self.real_id {
            write!(f, "fold {}: `{}` is not a synthetic image but sits in training", self.fold, self.real_id)
        } else {
            write!(f, "fold {}: training image `{}` derives from `{}`", self.fold, self.synthetic_id, self.real_id)
        }
    }
}

impl FoldPlan {
    fn scope_set(&self, fold: usize) -> HashSet<&str> {
        let f = &self.folds[fold];
        let mut set: HashSet<&str> = f.test.iter().map(String::as_str).collect();
        if self.scope == LeakageScope::TestAndVal {
            set.extend(f.validation.iter().map(String::as_str));
        }
        set
    }

    /// Structural checks: test and validation hold disjoint real images that
    /// together cover `real`, test sets partition it, training holds only
    /// synthetic images.
    pub fn check_structure(&self, real: &DatasetManifest, synthetic: &DatasetManifest) -> Result<()> {
        let bad = |msg: String| Err(Error::Leakage(msg));
        if self.folds.len() != self.k {
            return bad(format!("plan declares {} folds but holds {}", self.k, self.folds.len()));
        }
        let all: HashSet<&str> = real.reals().map(|r| r.id.as_str()).collect();
        let mut tested = HashSet::new();
        for (i, f) in self.folds.iter().enumerate() {
            let test: HashSet<&str> = f.test.iter().map(String::as_str).collect();
            let val: HashSet<&str> = f.validation.iter().map(String::as_str).collect();
            if let Some(id) = test.intersection(&val).next() {
                return bad(format!("fold {i}: `{id}` is in both test and validation"));
            }
            if test.union(&val).copied().collect::<HashSet<_>>() != all {
                return bad(format!("fold {i}: test ∪ validation does not equal the real set"));
            }
            for id in &test {
                if !tested.insert(*id) {
                    return bad(format!("`{id}` is a test image in more than one fold"));
                }
            }
            if let Some(id) = f.training.iter().find(|id| !synthetic.get(id).is_some_and(|r| !r.is_real())) {
                return bad(format!("fold {i}: training id `{id}` is not a synthetic image"));
            }
        }
        if tested != all {
            return bad("fold test sets do not cover every real image".into());
        }
        Ok(())
    }
}

/// Partitions the real images into `k` stratified folds and fills each
/// fold's training set with the labelled synthetic images whose sources lie
/// outside that fold's leakage scope.
pub fn split_folds(
    real: &DatasetManifest,
    synthetic: &DatasetManifest,
    k: usize,
    seed: u64,
    scope: LeakageScope,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let mut fold_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut offset = 0;
    for label in [BENIGN, MALIGNANT] {
        let mut ids = real.real_ids(label);
        if ids.len() < k {
            return Err(Error::InvalidArgument(format!(
                "class {label} has {} real images; {k} folds need at least {k}",
                ids.len()
            )));
        }
        ids.shuffle(&mut seeds::rng(seed, &[seeds::tag("folds"), u64::from(label)]));
        for (i, id) in ids.iter().enumerate() {
            fold_of.insert(id.clone(), (i + offset) % k);
        }
        offset += ids.len();
    }
    let order: Vec<&str> = real.reals().map(|r| r.id.as_str()).collect();
    let labelled: Vec<_> = synthetic.synthetics().filter(|r| r.pseudo_label.is_some()).collect();
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let (test, validation): (Vec<&str>, Vec<&str>) = order.iter().partition(|id| fold_of[**id] == f);
        let banned: HashSet<&str> = match scope {
            LeakageScope::Test => test.iter().copied().collect(),
            LeakageScope::TestAndVal => order.iter().copied().collect(),
        };
        let training: Vec<String> = labelled
            .iter()
            .filter(|r| {
                let p = r.provenance.as_ref().expect("synthetic records carry provenance");
                !banned.contains(p.content_id.as_str()) && !banned.contains(p.style_id.as_str())
            })
            .map(|r| r.id.clone())
            .collect();
        if training.is_empty() {
            return Err(Error::Leakage(format!(
                "fold {f}: leakage filtering (scope {}) left 0 of {} labelled synthetic images",
                scope.tag(),
                labelled.len()
            )));
        }
        folds.push(Fold {
            test: test.into_iter().map(String::from).collect(),
            validation: validation.into_iter().map(String::from).collect(),
            training,
        });
    }
    Ok(FoldPlan { k, scope, folds })
}

/// Every (fold, training image, real source) whose source lies in the
/// fold's leakage scope, plus real images placed in training.
pub fn leakage_check(plan: &FoldPlan, synthetic: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, f) in plan.folds.iter().enumerate() {
        let scope = plan.scope_set(i);
        for id in &f.training {
            match synthetic.get(id) {
                Some(rec) if !rec.is_real() => {
                    if let Some(p) = &rec.provenance {
                        for src in [&p.content_id, &p.style_id] {
                            if scope.contains(src.as_str()) {
                                out.push(Violation { fold: i, synthetic_id: id.clone(), real_id: src.clone() });
                            }
                        }
                    }
                }
                _ => {
                    if scope.contains(id.as_str()) || synthetic.get(id).is_some_and(|r| r.is_real()) {
                        out.push(Violation { fold: i, synthetic_id: id.clone(), real_id: id.clone() });
                    }
                }
            }
        }
    }
    out
}

/// Adds one synthetic image to a fold whose scope contains one of its
/// sources. Returns the violation it creates.
pub fn inject_leakage(plan: &mut FoldPlan, synthetic: &DatasetManifest, seed: u64) -> Result<Violation> {
    let mut rng = seeds::rng(seed, &[seeds::tag("inject")]);
    let mut candidates = Vec::new();
    for (i, f) in plan.folds.iter().enumerate() {
        let scope = plan.scope_set(i);
        let present: HashSet<&str> = f.training.iter().map(String::as_str).collect();
        for rec in synthetic.synthetics() {
            if present.contains(rec.id.as_str()) {
                continue;
            }
            let p = rec.provenance.as_ref().expect("synthetic records carry provenance");
            if let Some(src) = [&p.content_id, &p.style_id].into_iter().find(|s| scope.contains(s.as_str())) {
                candidates.push(Violation { fold: i, synthetic_id: rec.id.clone(), real_id: src.clone() });
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no synthetic image can be injected as a leak".into()));
    }
    let v = candidates.swap_remove(rng.random_range(0..candidates.len()));
    plan.folds[v.fold].training.push(v.synthetic_id.clone());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::manifest::{ManifestRecord, SourceIds};

    fn real(n: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new("/tmp");
        for i in 0..n {
            m.push(ManifestRecord::real(format!("b{i}"), "x.png", BENIGN)).unwrap();
            m.push(ManifestRecord::real(format!("m{i}"), "x.png", MALIGNANT)).unwrap();
        }
        m
    }

    fn synth(n: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new("/tmp");
        for i in 0..n {
            for j in 0..n {
                let id = format!("s{i}_{j}");
                let p = SourceIds { content_id: format!("b{i}"), style_id: format!("m{j}"), seed: 0 };
                m.push(ManifestRecord::synthetic(id.clone(), "x.png", p)).unwrap();
                m.set_pseudo_label(&id, ((i + j) % 2) as u8, 0.5).unwrap();
            }
        }
        m
    }

    #[test]
    fn five_folds_of_ten() {
        let (r, s) = (real(5), synth(5));
        let plan = split_folds(&r, &s, 5, 3, LeakageScope::Test).unwrap();
        for f in &plan.folds {
            assert_eq!(f.test.len(), 2);
            assert_eq!(f.validation.len(), 8);
            let labels: HashSet<u8> = f.test.iter().map(|id| r.get(id).unwrap().label.unwrap()).collect();
            assert_eq!(labels.len(), 2);
        }
        plan.check_structure(&r, &s).unwrap();
        assert!(leakage_check(&plan, &s).is_empty());
    }

    #[test]
    fn filter_is_per_fold() {
        let (r, s) = (real(5), synth(5));
        let plan = split_folds(&r, &s, 5, 3, LeakageScope::Test).unwrap();
        let b = &plan.folds[0].test.iter().find(|id| id.starts_with('b')).unwrap().clone();
        let consumer = format!("s{}_0", &b[1..]);
        assert!(!plan.folds[0].training.contains(&consumer));
        assert!(plan.folds[1..].iter().any(|f| f.training.contains(&consumer)));
    }

    #[test]
    fn hand_built_leak_reported_once() {
        let (r, s) = (real(5), synth(5));
        let mut plan = split_folds(&r, &s, 5, 3, LeakageScope::Test).unwrap();
        let v = inject_leakage(&mut plan, &s, 8).unwrap();
        let found = leakage_check(&plan, &s);
        assert_eq!(found, vec![v.clone()]);
        assert!(found[0].to_string().contains(&v.synthetic_id) && found[0].to_string().contains(&v.real_id));
    }

    #[test]
    fn all_training_from_fold_zero_tests_flagged() {
        let (r, s) = (real(5), synth(5));
        let mut plan = split_folds(&r, &s, 5, 3, LeakageScope::Test).unwrap();
        let test0: HashSet<&str> = plan.folds[0].test.iter().map(String::as_str).collect();
        let leaky: Vec<String> = s
            .synthetics()
            .filter(|rec| test0.contains(rec.provenance.as_ref().unwrap().content_id.as_str()))
            .map(|rec| rec.id.clone())
            .collect();
        plan.folds[0].training = leaky.clone();
        let flagged: HashSet<String> = leakage_check(&plan, &s).into_iter().map(|v| v.synthetic_id).collect();
        assert_eq!(flagged, leaky.into_iter().collect());
    }

    #[test]
    fn emptied_fold_and_bad_k_rejected() {
        let (r, s) = (real(5), synth(5));
        assert!(matches!(split_folds(&r, &s, 5, 3, LeakageScope::TestAndVal), Err(Error::Leakage(_))));
        assert!(split_folds(&r, &s, 1, 3, LeakageScope::Test).is_err());
        assert!(split_folds(&r, &s, 6, 3, LeakageScope::Test).is_err());
    }
}
