//! Complementary vocabulary sizing: a joint run measures `|joint|` and
//! `|base|`, the auxiliary tokenizers are retrained at `|joint| - |base|`,
//! and the disjoint pipeline is run with them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::{prepare_output, with_workers, Artifacts};
use super::{run_experiment, ExperimentManifest, PipelineError, RunOptions, RunSummary, Stage};
use crate::overlap::complementary_size;

pub const COMP_SIZE_REPORT: &str = "comp_size.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompSizeEntry {
    pub auxiliary: String,
    /// Pairwise joint vocabulary size from the joint run.
    pub joint_size: usize,
    /// Source-language vocabulary size from the joint run.
    pub base_size: usize,
    /// Retraining target for the auxiliary tokenizer.
    pub target: usize,
    /// Extracted (prefixed) auxiliary vocabulary size in the disjoint run.
    pub achieved: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompSizeReport {
    pub source: String,
    pub entries: Vec<CompSizeEntry>,
}

fn size(summary: &RunSummary, rel: &str) -> Result<usize, PipelineError> {
    summary
        .vocab_sizes
        .get(rel)
        .copied()
        .ok_or_else(|| PipelineError::new(Stage::Vocab, format!("missing {rel}")))
}

/// Runs the joint pipeline into `<out>/joint`, then the disjoint pipeline
/// with retrained auxiliary tokenizers into `<out>/disjoint`, and writes
/// `<out>/comp_size.json`.
pub fn comp_size_experiment(
    manifest: &ExperimentManifest,
    opts: &RunOptions,
) -> Result<CompSizeReport, PipelineError> {
    manifest.validate()?;
    if manifest.auxiliaries.is_empty() {
        return Err(PipelineError::new(
            Stage::Config,
            "complementary sizing needs at least one auxiliary language",
        ));
    }
    let root = manifest.output_path();
    prepare_output(
        &root,
        &["joint", "disjoint", COMP_SIZE_REPORT],
        opts.overwrite,
    )?;
    with_workers(opts.workers, || {
        let inner = RunOptions {
            overwrite: opts.overwrite,
            workers: None,
        };
        let src = &manifest.source;

        let mut joint = manifest.clone();
        joint.disjoint = false;
        joint.output_dir = manifest.output_dir.join("joint");
        let joint_run = run_experiment(&joint, &inner)?;
        let base_size = size(&joint_run, &format!("vocab/{src}.vocab"))?;

        let mut disjoint = manifest.clone();
        disjoint.disjoint = true;
        disjoint.output_dir = manifest.output_dir.join("disjoint");
        let mut targets = BTreeMap::new();
        for aux in &manifest.auxiliaries {
            let joint_size = size(&joint_run, &format!("vocab/joint.{src}-{aux}.vocab"))?;
            let target = complementary_size(joint_size, base_size)
                .map_err(|e| PipelineError::new(Stage::Config, format!("{aux}: {e}")))?;
            log::info!("{aux}: retraining tokenizer at {joint_size} - {base_size} = {target}");
            disjoint.vocab_size.insert(aux.clone(), target);
            targets.insert(aux.clone(), (joint_size, target));
        }
        let disjoint_run = run_experiment(&disjoint, &inner)?;

        let mut entries = Vec::new();
        for aux in &manifest.auxiliaries {
            let (joint_size, target) = targets[aux];
            let achieved = size(&disjoint_run, &format!("vocab/{aux}.vocab"))?;
            if achieved > target {
                return Err(PipelineError::new(
                    Stage::Vocab,
                    format!("{aux}: extracted vocabulary of {achieved} exceeds target {target}"),
                ));
            }
            entries.push(CompSizeEntry {
                auxiliary: aux.clone(),
                joint_size,
                base_size,
                target,
                achieved,
            });
        }
        let report = CompSizeReport {
            source: src.clone(),
            entries,
        };
        let mut arts = Artifacts::new(root.clone());
        arts.write_json(COMP_SIZE_REPORT, &report)?;
        Ok(report)
    })?
}
