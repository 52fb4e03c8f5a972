use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::manifest::{DatasetManifest, ManifestRecord, SourceIds};
use super::pairs::PairPlan;
use crate::error::{Error, Result};
use crate::featnet::WeightBundle;
use crate::image::{write_png, Image};
use crate::nst::{synthesize, StyleTransferConfig};

/// Fraction of failed jobs above which a batch is aborted.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisFailure {
    pub index: usize,
    pub content_id: String,
    pub style_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchOutcome {
    /// In plan order, failed entries omitted.
    pub records: Vec<ManifestRecord>,
    pub failures: Vec<SynthesisFailure>,
}

pub fn synthetic_id(index: usize) -> String {
    format!("syn-{index:05}")
}

/// Runs `job` for every plan entry on `parallelism` threads and gathers the
/// results in plan order.
pub(crate) fn run_jobs<F>(plan: &PairPlan, parallelism: usize, job: F) -> Result<BatchOutcome>
where
    F: Fn(usize) -> Result<ManifestRecord> + Sync + Send,
{
    if parallelism == 0 {
        return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<ManifestRecord>> = pool.install(|| (0..plan.len()).into_par_iter().map(&job).collect());
    let mut out = BatchOutcome::default();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(e) => {
                let entry = &plan.entries[index];
                log::warn!("synthesis {index} ({} × {}) failed: {e}", entry.content_id, entry.style_id);
                out.failures.push(SynthesisFailure {
                    index,
                    content_id: entry.content_id.clone(),
                    style_id: entry.style_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if !plan.is_empty() && out.failures.len() as f64 > MAX_FAILURE_RATE * plan.len() as f64 {
        return Err(Error::InvalidArgument(format!(
            "{} of {} syntheses failed (limit {:.0}%); first: {}",
            out.failures.len(),
            plan.len(),
            MAX_FAILURE_RATE * 100.0,
            out.failures[0].reason
        )));
    }
    Ok(out)
}

/// Synthesises every plan entry into `out_dir/synth/` and returns one
/// synthetic record per successful entry, rooted at `out_dir`.
pub fn run_synthesis_batch(
    plan: &PairPlan,
    real: &DatasetManifest,
    bundle: &WeightBundle,
    cfg: &StyleTransferConfig,
    parallelism: usize,
    out_dir: &Path,
    png_text: &[(&str, &str)],
) -> Result<BatchOutcome> {
    plan.validate(real)?;
    cfg.validate_for(bundle)?;
    let mut images: HashMap<&str, Image> = HashMap::new();
    for e in &plan.entries {
        for id in [e.content_id.as_str(), e.style_id.as_str()] {
            if !images.contains_key(id) {
                images.insert(id, real.load_image(id)?);
            }
        }
    }
    if !plan.is_empty() {
        fs::create_dir_all(out_dir.join("synth"))?;
    }
    let digest = cfg.digest();
    run_jobs(plan, parallelism, |index| {
        let e = &plan.entries[index];
        let result = synthesize(&images[e.content_id.as_str()], &images[e.style_id.as_str()], bundle, cfg, e.seed)?;
        let id = synthetic_id(index);
        let rel = format!("synth/{id}.png");
        let seed = e.seed.to_string();
        let mut text = vec![("content_id", e.content_id.as_str()), ("style_id", e.style_id.as_str()), ("pair_seed", &seed), ("nst_digest", &digest)];
        text.extend_from_slice(png_text);
        write_png(&out_dir.join(&rel), &result.image, &text)?;
        Ok(ManifestRecord::synthetic(
            id,
            rel,
            SourceIds { content_id: e.content_id.clone(), style_id: e.style_id.clone(), seed: e.seed },
        ))
    })
}
