//! The desk experiment as a chain of file-producing stages:
//! gen-data → train-featnet → synth → pseudo-label → split → train →
//! evaluate → report. Every stage reads the previous stages' files under
//! the dataset root, so stages can be run one at a time or all together.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::featnet::{load_weights, save_weights, train_feature_extractor, NetworkSpec, WeightBundle};
use crate::image::Image;
use crate::pipeline::{
    apply_pseudo_labels, gen_corpus, inject_leakage, leakage_check, plan_pairs, pseudo_label_scores,
    run_synthesis_batch, split_folds, DatasetManifest, FoldPlan, LeakageScope, PseudoLabelReport, SynthesisFailure,
    BENIGN, MALIGNANT,
};
use crate::seeds;
use crate::trainer::{aggregate_results, score_metrics, train_classifier, ClassifierModel, ExperimentReport, Metrics, Regime, TrainConfig};

pub const STAGES: [&str; 8] = ["gen-data", "train-featnet", "synth", "pseudo-label", "split", "train", "evaluate", "report"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    /// Outputs already existed for this configuration.
    UpToDate,
}

/// Digest and seed recorded next to, or inside, every output.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_digest: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatnetSummary {
    pub held_out_accuracy: f64,
    pub epochs_run: usize,
    pub pool_size: usize,
    #[serde(flatten)]
    pub stamp: Stamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub planned: usize,
    pub produced: usize,
    pub failures: Vec<(usize, String, String, String)>,
    #[serde(flatten)]
    pub stamp: Stamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub balanced: bool,
    pub report: PseudoLabelReport,
    pub errors: Vec<(String, String)>,
    #[serde(flatten)]
    pub stamp: Stamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldsFile {
    pub plan: FoldPlan,
    /// Real images reserved for feature-net and baseline training.
    pub pool: Vec<String>,
    #[serde(flatten)]
    pub stamp: Stamp,
}

/// One experiment directory driven by one configuration.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub root: PathBuf,
    pub jobs: usize,
    pub force: bool,
    stamp: Stamp,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}; run the earlier stage first", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

impl Run {
    pub fn new(cfg: ExperimentConfig, jobs: usize, force: bool) -> Result<Self> {
        cfg.validate()?;
        let stamp = Stamp { config_digest: cfg.digest(), seed: cfg.seed };
        Ok(Run { root: cfg.dataset_root.clone(), cfg, jobs: jobs.max(1), force, stamp })
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn png_text(&self) -> Vec<(&str, String)> {
        vec![("config_digest", self.stamp.config_digest.clone()), ("seed", self.stamp.seed.to_string())]
    }

    fn marker(&self, stage: &str) -> PathBuf {
        self.root.join(".stages").join(format!("{stage}.json"))
    }

    fn up_to_date(&self, stage: &str, outputs: &[&str]) -> bool {
        if self.force {
            return false;
        }
        let fresh = read_json::<Stamp>(&self.marker(stage)).is_ok_and(|s| s == self.stamp);
        fresh && outputs.iter().all(|o| self.path(o).exists())
    }

    /// Records `stage` as complete and invalidates every later stage.
    fn finish(&self, stage: &str) -> Result<()> {
        let dir = self.root.join(".stages");
        fs::create_dir_all(&dir)?;
        let pos = STAGES.iter().position(|s| *s == stage).expect("known stage");
        for later in &STAGES[pos + 1..] {
            let _ = fs::remove_file(self.marker(later));
        }
        write_json(&self.marker(stage), &self.stamp)
    }

    fn write_meta(&self, file: &str) -> Result<()> {
        write_json(&self.path(&format!("{file}.meta.json")), &self.stamp)
    }

    fn seed(&self, stage: &str, path: &[u64]) -> u64 {
        let mut p = vec![seeds::tag(stage)];
        p.extend_from_slice(path);
        seeds::derive(self.cfg.seed, &p)
    }

    pub fn real_manifest(&self) -> Result<DatasetManifest> {
        DatasetManifest::load(&self.path("real.jsonl"))
    }

    /// Real images reserved for the feature net and the baseline regime.
    pub fn pool_ids(&self, real: &DatasetManifest) -> BTreeSet<String> {
        let mut pool = BTreeSet::new();
        for label in [BENIGN, MALIGNANT] {
            let mut ids = real.real_ids(label);
            ids.shuffle(&mut seeds::rng(self.seed("pool", &[u64::from(label)]), &[]));
            pool.extend(ids.into_iter().take(self.cfg.featnet.pool_per_class));
        }
        pool
    }

    pub fn gen_data(&self) -> Result<StageStatus> {
        if self.up_to_date("gen-data", &["real.jsonl"]) {
            return Ok(StageStatus::UpToDate);
        }
        let c = &self.cfg.corpus;
        fs::create_dir_all(&self.root)
            .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", self.root.display())))?;
        let text = self.png_text();
        let text: Vec<(&str, &str)> = text.iter().map(|(k, v)| (*k, v.as_str())).collect();
        let m = gen_corpus(&self.root, c.per_class, (c.height, c.width), self.seed("corpus", &[]), &text)?;
        m.save(&self.path("real.jsonl"))?;
        self.write_meta("real.jsonl")?;
        log::info!("gen-data: {} real images", m.len());
        self.finish("gen-data")?;
        Ok(StageStatus::Ran)
    }

    pub fn train_featnet(&self) -> Result<StageStatus> {
        if self.up_to_date("train-featnet", &["featnet.sfwb", "featnet.json"]) {
            return Ok(StageStatus::UpToDate);
        }
        let real = self.real_manifest()?;
        let pool = self.pool_ids(&real);
        let images = load_images(&real, pool.iter().map(String::as_str))?;
        let samples: Vec<(&Image, u8)> =
            pool.iter().map(|id| (&images[id.as_str()], real.get(id).and_then(|r| r.label).expect("real label"))).collect();
        let c = &self.cfg.corpus;
        let spec = NetworkSpec::feature_net(c.height, c.width);
        let seed = self.seed("featnet", &[self.cfg.featnet.train.seed]);
        let mut trained = train_feature_extractor(&samples, &spec, &self.cfg.featnet.train, seed)?;
        trained.bundle.digest = self.stamp.config_digest.clone();
        if trained.held_out_accuracy < 0.9 {
            log::warn!("feature net held-out accuracy {:.3} is below 0.90", trained.held_out_accuracy);
        }
        save_weights(&trained.bundle, &self.path("featnet.sfwb"))?;
        self.write_meta("featnet.sfwb")?;
        let summary = FeatnetSummary {
            held_out_accuracy: trained.held_out_accuracy,
            epochs_run: trained.epochs_run,
            pool_size: pool.len(),
            stamp: self.stamp.clone(),
        };
        write_json(&self.path("featnet.json"), &summary)?;
        log::info!("train-featnet: held-out accuracy {:.3} after {} epochs", summary.held_out_accuracy, summary.epochs_run);
        self.finish("train-featnet")?;
        Ok(StageStatus::Ran)
    }

    pub fn featnet(&self) -> Result<WeightBundle> {
        load_weights(&self.path("featnet.sfwb"))
    }

    pub fn synth(&self) -> Result<StageStatus> {
        if self.up_to_date("synth", &["synthetic.jsonl", "synth.json"]) {
            return Ok(StageStatus::UpToDate);
        }
        let real = self.real_manifest()?;
        let pool = self.pool_ids(&real);
        let sources = match self.cfg.split.leakage_scope {
            LeakageScope::Test => real.filtered(|r| !pool.contains(&r.id)),
            LeakageScope::TestAndVal => real.filtered(|r| pool.contains(&r.id)),
        };
        let plan = plan_pairs(&sources, self.cfg.synthesis.budget, self.seed("pairs", &[]))?;
        let bundle = self.featnet()?;
        let text = self.png_text();
        let text: Vec<(&str, &str)> = text.iter().map(|(k, v)| (*k, v.as_str())).collect();
        log::info!("synth: {} pairs on {} threads", plan.len(), self.jobs);
        let out = run_synthesis_batch(&plan, &real, &bundle, &self.cfg.nst, self.jobs, &self.root, &text)?;
        let manifest = DatasetManifest::from_records(&self.root, out.records)?;
        manifest.save(&self.path("synthetic.jsonl"))?;
        self.write_meta("synthetic.jsonl")?;
        let summary = SynthSummary {
            planned: plan.len(),
            produced: manifest.len(),
            failures: out
                .failures
                .into_iter()
                .map(|SynthesisFailure { index, content_id, style_id, reason }| (index, content_id, style_id, reason))
                .collect(),
            stamp: self.stamp.clone(),
        };
        write_json(&self.path("synth.json"), &summary)?;
        self.finish("synth")?;
        Ok(StageStatus::Ran)
    }

    pub fn pseudo_label(&self) -> Result<StageStatus> {
        if self.up_to_date("pseudo-label", &["labeled.jsonl", "pseudo_label.json"]) {
            return Ok(StageStatus::UpToDate);
        }
        let mut synthetic = DatasetManifest::load(&self.path("synthetic.jsonl"))?;
        let bundle = self.featnet()?;
        let scored = pseudo_label_scores(&bundle, &synthetic)?;
        let report = if self.cfg.pseudo_label.balance {
            apply_pseudo_labels(&mut synthetic, &scored.scores)?
        } else {
            let mut counts = [0, 0];
            for (id, s) in &scored.scores {
                let l = u8::from(*s >= 0.5);
                counts[usize::from(l)] += 1;
                synthetic.set_pseudo_label(id, l, *s)?;
            }
            PseudoLabelReport { threshold: 0.5, counts }
        };
        synthetic.save(&self.path("labeled.jsonl"))?;
        self.write_meta("labeled.jsonl")?;
        log::info!("pseudo-label: threshold {} counts {:?}", report.threshold, report.counts);
        let summary = LabelSummary {
            balanced: self.cfg.pseudo_label.balance,
            report,
            errors: scored.errors,
            stamp: self.stamp.clone(),
        };
        write_json(&self.path("pseudo_label.json"), &summary)?;
        self.finish("pseudo-label")?;
        Ok(StageStatus::Ran)
    }

    /// Builds and audits the fold plan. `inject` adds one deliberate leak
    /// chosen by that seed, which the audit then reports.
    pub fn split(&self, inject: Option<u64>) -> Result<StageStatus> {
        if inject.is_none() && self.up_to_date("split", &["folds.json"]) {
            return Ok(StageStatus::UpToDate);
        }
        let real = self.real_manifest()?;
        let pool = self.pool_ids(&real);
        let fold_real = real.filtered(|r| !pool.contains(&r.id));
        let labeled = DatasetManifest::load(&self.path("labeled.jsonl"))?;
        let mut plan =
            split_folds(&fold_real, &labeled, self.cfg.split.k, self.seed("folds", &[]), self.cfg.split.leakage_scope)?;
        if let Some(s) = inject {
            let v = inject_leakage(&mut plan, &labeled, s)?;
            log::warn!("injected leak: {v}");
        }
        plan.check_structure(&fold_real, &labeled)?;
        let violations = leakage_check(&plan, &labeled);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Leakage(format!("{} violation(s):\n  {}", list.len(), list.join("\n  "))));
        }
        for (i, f) in plan.folds.iter().enumerate() {
            log::info!("split: fold {i} test {} validation {} training {}", f.test.len(), f.validation.len(), f.training.len());
        }
        let file = FoldsFile { plan, pool: pool.into_iter().collect(), stamp: self.stamp.clone() };
        write_json(&self.path("folds.json"), &file)?;
        self.finish("split")?;
        Ok(StageStatus::Ran)
    }

    pub fn folds(&self) -> Result<FoldsFile> {
        read_json(&self.path("folds.json"))
    }

    fn job_name(arch: &str, regime: Regime, fold: usize) -> String {
        format!("{arch}__{}__fold{fold}", regime.tag())
    }

    fn jobs_list(&self) -> Vec<(String, Regime, usize)> {
        let mut v = Vec::new();
        for arch in &self.cfg.classifier.architectures {
            for regime in [Regime::WithoutDa, Regime::WithDa] {
                for fold in 0..self.cfg.split.k {
                    v.push((arch.clone(), regime, fold));
                }
            }
        }
        v
    }

    pub fn metrics_path(&self, arch: &str, regime: Regime, fold: usize) -> PathBuf {
        self.root.join("metrics").join(format!("{}.json", Self::job_name(arch, regime, fold)))
    }

    pub fn model_path(&self, arch: &str, regime: Regime, fold: usize) -> PathBuf {
        self.root.join("models").join(format!("{}.sfwb", Self::job_name(arch, regime, fold)))
    }

    pub fn train(&self) -> Result<StageStatus> {
        let jobs = self.jobs_list();
        let outputs: Vec<String> = jobs
            .iter()
            .map(|(a, r, f)| format!("metrics/{}.json", Self::job_name(a, *r, *f)))
            .collect();
        let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        if self.up_to_date("train", &refs) {
            return Ok(StageStatus::UpToDate);
        }
        let real = self.real_manifest()?;
        let labeled = DatasetManifest::load(&self.path("labeled.jsonl"))?;
        let folds = self.folds()?;
        let mut images = load_images(&real, real.reals().map(|r| r.id.as_str()))?;
        images.extend(load_images(&labeled, labeled.synthetics().map(|r| r.id.as_str()))?);
        fs::create_dir_all(self.root.join("metrics"))?;
        fs::create_dir_all(self.root.join("models"))?;
        let c = &self.cfg.corpus;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        let results: Vec<Result<()>> = pool.install(|| {
            jobs.par_iter()
                .map(|(arch, regime, fold)| {
                    let f = &folds.plan.folds[*fold];
                    let label_of = |id: &String| -> u8 {
                        real.get(id).or_else(|| labeled.get(id)).and_then(|r| r.training_label()).expect("labelled")
                    };
                    let train_ids: &[String] = match regime {
                        Regime::WithDa => &f.training,
                        Regime::WithoutDa => &folds.pool,
                    };
                    let train: Vec<(&Image, u8)> = train_ids.iter().map(|id| (&images[id.as_str()], label_of(id))).collect();
                    let val: Vec<(&Image, u8)> = f.validation.iter().map(|id| (&images[id.as_str()], label_of(id))).collect();
                    let base = match regime {
                        Regime::WithDa => &self.cfg.classifier.with_da,
                        Regime::WithoutDa => &self.cfg.classifier.without_da,
                    };
                    let tcfg = TrainConfig {
                        seed: self.seed("train", &[seeds::tag(arch), seeds::tag(regime.tag()), *fold as u64, base.seed]),
                        ..base.clone()
                    };
                    let spec = NetworkSpec::classifier(arch, c.height, c.width)?;
                    let (mut model, outcome, val_auc, val_accuracy) = train_classifier(arch, &spec, &train, &val, &tcfg)?;
                    model.bundle.digest = self.stamp.config_digest.clone();
                    model.bundle.seed = tcfg.seed;
                    save_weights(&model.bundle, &self.model_path(arch, *regime, *fold))?;
                    let m = Metrics {
                        architecture: arch.clone(),
                        regime: *regime,
                        fold: *fold,
                        val_auc,
                        val_accuracy,
                        test_auc: None,
                        test_accuracy: None,
                        best_epoch: outcome.best_epoch,
                        epochs_run: outcome.epochs_run,
                        train_loss: outcome.train_loss,
                        val_loss: outcome.val_loss,
                        config_digest: self.stamp.config_digest.clone(),
                        seed: self.stamp.seed,
                    };
                    log::info!(
                        "train: {arch} {} fold {fold}: {} images, val AUC {val_auc:.4}, {} epochs",
                        regime.tag(),
                        train.len(),
                        m.epochs_run
                    );
                    write_json(&self.metrics_path(arch, *regime, *fold), &m)
                })
                .collect()
        });
        results.into_iter().collect::<Result<Vec<()>>>()?;
        self.finish("train")?;
        Ok(StageStatus::Ran)
    }

    /// Scores every trained model on its fold's real test images.
    pub fn evaluate(&self) -> Result<StageStatus> {
        if self.up_to_date("evaluate", &[]) {
            return Ok(StageStatus::UpToDate);
        }
        let real = self.real_manifest()?;
        let folds = self.folds()?;
        let images = load_images(&real, real.reals().map(|r| r.id.as_str()))?;
        for (arch, regime, fold) in self.jobs_list() {
            let mpath = self.metrics_path(&arch, regime, fold);
            let mut m: Metrics = read_json(&mpath)?;
            let model = ClassifierModel { architecture: arch.clone(), bundle: load_weights(&self.model_path(&arch, regime, fold))? };
            let test: Vec<(&Image, u8)> = folds.plan.folds[fold]
                .test
                .iter()
                .map(|id| (&images[id.as_str()], real.get(id).and_then(|r| r.label).expect("real label")))
                .collect();
            let (a, acc) = score_metrics(&model, &test)?;
            m.test_auc = Some(a);
            m.test_accuracy = Some(acc);
            log::info!("evaluate: {arch} {} fold {fold}: test AUC {a:.4}", regime.tag());
            write_json(&mpath, &m)?;
        }
        self.finish("evaluate")?;
        Ok(StageStatus::Ran)
    }

    pub fn metrics(&self) -> Result<Vec<Metrics>> {
        self.jobs_list().into_iter().map(|(a, r, f)| read_json(&self.metrics_path(&a, r, f))).collect()
    }

    pub fn report(&self) -> Result<ExperimentReport> {
        let mut report = emit_report(&self.metrics()?)?;
        report.leakage_scope = self.cfg.split.leakage_scope.tag().to_string();
        write_json(&self.path("report.json"), &report)?;
        fs::write(self.path("report.txt"), report.render_text(Some(3)))?;
        self.finish("report")?;
        Ok(report)
    }

    pub fn run_all(&self) -> Result<ExperimentReport> {
        self.gen_data()?;
        self.train_featnet()?;
        self.synth()?;
        self.pseudo_label()?;
        self.split(None)?;
        self.train()?;
        self.evaluate()?;
        self.report()
    }
}

fn load_images<'a>(m: &DatasetManifest, ids: impl Iterator<Item = &'a str>) -> Result<HashMap<String, Image>> {
    let mut out = HashMap::new();
    for id in ids {
        if !out.contains_key(id) {
            out.insert(id.to_string(), m.load_image(id)?);
        }
    }
    Ok(out)
}

/// (architecture, regime, [(fold, test AUC)]).
type AucRow = (String, Regime, Vec<(usize, f64)>);

/// Table of test AUCs from evaluated metrics. Architectures keep their
/// first-seen order; folds are sorted.
pub fn emit_report(metrics: &[Metrics]) -> Result<ExperimentReport> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics to report".into()));
    }
    let mut rows: Vec<AucRow> = Vec::new();
    for m in metrics {
        let auc = m.test_auc.ok_or_else(|| {
            Error::InvalidArgument(format!("{} {} fold {} has no test AUC; run evaluate", m.architecture, m.regime.tag(), m.fold))
        })?;
        match rows.iter_mut().find(|r| r.0 == m.architecture && r.1 == m.regime) {
            Some(r) => r.2.push((m.fold, auc)),
            None => rows.push((m.architecture.clone(), m.regime, vec![(m.fold, auc)])),
        }
    }
    let entries: Vec<_> = rows
        .into_iter()
        .map(|(a, r, mut v)| {
            v.sort_by_key(|x| x.0);
            (a, r, v.into_iter().map(|x| x.1).collect())
        })
        .collect();
    let mut report = aggregate_results(&entries)?;
    report.config_digest = metrics[0].config_digest.clone();
    report.seed = metrics[0].seed;
    Ok(report)
}
