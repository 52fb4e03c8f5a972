//! Corpus generation, content/style pairing, batch synthesis,
//! pseudo-labelling and leakage-aware fold splitting.

mod corpus;
mod folds;
mod label;
mod manifest;
mod pairs;
mod synth;

pub use corpus::{benign_image, corpus_image, gen_corpus, laplacian_energy, malignant_image, real_id};
pub use folds::{inject_leakage, leakage_check, split_folds, Fold, FoldPlan, LeakageScope, Violation};
pub use label::{apply_pseudo_labels, balance_threshold, pseudo_label_scores, rank_split_labels, PseudoLabelReport, ScoreOutcome};
pub use manifest::{class_name, DatasetManifest, ManifestRecord, Source, SourceIds, BENIGN, MALIGNANT};
pub use pairs::{plan_pairs, PairEntry, PairPlan};
pub use synth::{run_synthesis_batch, synthetic_id, BatchOutcome, SynthesisFailure, MAX_FAILURE_RATE};
