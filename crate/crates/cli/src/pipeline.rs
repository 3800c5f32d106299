//! End-to-end adaptation: build vocabulary, train CBOW, project and swap,
//! for the encoder and the decoder independently.
//!
//! Files are staged in `<out>/.partial` and moved into `<out>` only when
//! every stage succeeds. On failure the staging directory is renamed to
//! `<out>/quarantine`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use vocadapt_core::checkpoint::with_source_specials;
use vocadapt_core::projection::project_with_anchors;
use vocadapt_core::vocab::{read_vocab, write_vocab};
use vocadapt_core::{
    build_vocab, compute_shared, read_checkpoint, save_embeddings, semantic_shift_report,
    swap_embeddings, train_cbow, validate_checkpoint, vocab_overlap_stats, CbowConfig, Error,
    Method, ProjectionConfig, SharedAnchorSet, Side,
};

use crate::config::PipelineConfig;
use crate::error::{stage, CliError};
use crate::files::{read_anchor_tokens, read_lines, sha256_file, write_file};

pub const ADAPTED_CHECKPOINT: &str = "adapted.vack";
pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const STAGING_DIR: &str = ".partial";
pub const QUARANTINE_DIR: &str = "quarantine";

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideSummary {
    pub cbow: CbowConfig,
    pub projection: ProjectionConfig,
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
    pub adapted_vocab_size: usize,
    pub shared_anchors: usize,
}

/// Written as `run_manifest.json`. Holds no timestamps or absolute output
/// paths so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub sides: BTreeMap<String, SideSummary>,
    pub inputs: BTreeMap<String, FileRecord>,
    /// File name in the output directory -> sha256.
    pub outputs: BTreeMap<String, String>,
}

/// Runs the pipeline. Relative paths in `config` are resolved against
/// `base_dir`; outputs go to `output_dir`.
pub fn run_pipeline(
    config: &PipelineConfig,
    base_dir: &Path,
    output_dir: &Path,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(output_dir).map_err(|e| CliError::io(output_dir, e))?;
    let staging = output_dir.join(STAGING_DIR);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| CliError::io(&staging, e))?;

    match stage_outputs(config, base_dir, &staging) {
        Ok(manifest) => {
            for name in manifest.outputs.keys().map(String::as_str).chain([RUN_MANIFEST]) {
                let (from, to) = (staging.join(name), output_dir.join(name));
                fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
            }
            fs::remove_dir(&staging).map_err(|e| CliError::io(&staging, e))?;
            Ok(manifest)
        }
        Err(err) => {
            let quarantine = output_dir.join(QUARANTINE_DIR);
            if quarantine.exists() {
                let _ = fs::remove_dir_all(&quarantine);
            }
            match fs::rename(&staging, &quarantine) {
                Ok(()) => warn!("partial outputs quarantined in {}", quarantine.display()),
                Err(e) => warn!("could not quarantine {}: {e}", staging.display()),
            }
            Err(err)
        }
    }
}

fn stage_outputs(
    config: &PipelineConfig,
    base_dir: &Path,
    staging: &Path,
) -> Result<RunManifest, CliError> {
    let resolve = |p: &Path| base_dir.join(p);
    let checkpoint_path = resolve(&config.checkpoint);
    let original = read_checkpoint(&checkpoint_path).map_err(stage("load-checkpoint"))?;

    // Check every side's settings before any training starts.
    let mut plans = Vec::new();
    for side in Side::BOTH {
        let name = format!("{side}/config");
        let width = original.embedding_width(side).map_err(stage(&name))?;
        let cbow = config.cbow_for(side, width);
        if cbow.dim != width {
            return Err(CliError::Stage {
                stage: name,
                source: Error::DimensionMismatch {
                    context: format!("{side} CBOW dim vs checkpoint embedding width"),
                    expected: width,
                    found: cbow.dim,
                },
            });
        }
        cbow.validate().map_err(stage(&name))?;
        let projection = config.side(side).projection.resolve();
        projection.validate().map_err(stage(&name))?;
        plans.push((side, cbow, projection));
    }

    let mut inputs = BTreeMap::new();
    let mut record = |key: String, rel: &Path| -> Result<(), CliError> {
        let sha256 = sha256_file(&resolve(rel))?;
        inputs.insert(key, FileRecord { path: rel.to_owned(), sha256 });
        Ok(())
    };
    record("checkpoint".into(), &config.checkpoint)?;

    let mut outputs = Vec::new();
    let mut sides = BTreeMap::new();
    let mut cp = original.clone();
    for (side, cbow, projection) in plans {
        let sc = config.side(side);
        let st = |s: &str| format!("{side}/{s}");
        record(format!("{side}.vocab"), &sc.vocab)?;
        record(format!("{side}.corpus"), &sc.corpus)?;
        if let Some(a) = &sc.anchors {
            record(format!("{side}.anchors"), a)?;
        }

        let source_vocab = read_vocab(resolve(&sc.vocab)).map_err(stage(st("read-vocab")))?;
        let corpus = read_lines(&resolve(&sc.corpus))?;
        let target_vocab = build_vocab(&corpus, cbow.min_count, cbow.max_vocab)
            .map_err(stage(st("build-vocab")))?;
        info!("{side}: target vocabulary {} tokens", target_vocab.len());
        let target = train_cbow(&corpus, &target_vocab, &cbow).map_err(stage(st("train-cbow")))?;
        let source = original
            .embedding_matrix(side, &source_vocab)
            .map_err(stage(st("load-embeddings")))?;

        let shared = match &sc.anchors {
            Some(path) => {
                let tokens = read_anchor_tokens(&resolve(path))?;
                SharedAnchorSet::from_tokens(tokens, &target_vocab, &source_vocab).map(Some)
            }
            None => compute_shared(&target_vocab, &source_vocab).map(Some),
        };
        // cbow-as-is needs no anchors; reports that depend on them are skipped.
        let shared = match (shared, projection.method) {
            (Err(Error::NoSharedAnchors), Method::CbowAsIs) => None,
            (r, _) => r.map_err(stage(st("compute-shared")))?,
        };
        info!(
            "{side}: {} shared anchors",
            shared.as_ref().map_or(0, SharedAnchorSet::len)
        );

        let projected = project_with_anchors(&target, &source, shared.as_ref(), &projection)
            .map_err(stage(st("project")))?;
        let adapted = with_source_specials(&source_vocab, &projected).map_err(stage(st("swap")))?;
        let vocab_file = format!("{side}.vocab.txt");
        cp = swap_embeddings(&cp, side, adapted.vocab(), &adapted, &source_vocab, &vocab_file)
            .map_err(stage(st("swap")))?;

        let out = |name: String| (staging.join(&name), name);
        let (p, n) = out(vocab_file);
        write_vocab(adapted.vocab(), &p).map_err(stage(st("write")))?;
        outputs.push(n);
        let (p, n) = out(format!("{side}.cbow.vec"));
        save_embeddings(&target, &p).map_err(stage(st("write")))?;
        outputs.push(n);
        let (p, n) = out(format!("{side}.projected.vec"));
        save_embeddings(&projected, &p).map_err(stage(st("write")))?;
        outputs.push(n);
        if let Some(shared) = &shared {
            let shift = semantic_shift_report(shared, &source, &projected)
                .map_err(stage(st("shift-report")))?;
            for (ext, body) in [("txt", shift.to_table()), ("jsonl", shift.to_jsonl())] {
                let (p, n) = out(format!("{side}.shift.{ext}"));
                write_file(&p, body)?;
                outputs.push(n);
            }
        }
        let overlap = vocab_overlap_stats(&source_vocab, &target_vocab, Some(&corpus));
        for (ext, body) in [("txt", overlap.to_table()), ("jsonl", overlap.to_jsonl())] {
            let (p, n) = out(format!("{side}.overlap.{ext}"));
            write_file(&p, body)?;
            outputs.push(n);
        }

        sides.insert(
            side.to_string(),
            SideSummary {
                cbow,
                projection,
                source_vocab_size: source_vocab.len(),
                target_vocab_size: target_vocab.len(),
                adapted_vocab_size: adapted.len(),
                shared_anchors: shared.as_ref().map_or(0, SharedAnchorSet::len),
            },
        );
    }

    let report = validate_checkpoint(&cp);
    if !report.passed() {
        return Err(CliError::Data(format!("stage validate failed: {report}")));
    }
    let cp_path = staging.join(ADAPTED_CHECKPOINT);
    vocadapt_core::write_checkpoint(&cp, &cp_path).map_err(stage("write-checkpoint"))?;
    outputs.push(ADAPTED_CHECKPOINT.to_owned());

    let mut hashes = BTreeMap::new();
    for name in outputs {
        let h = sha256_file(&staging.join(&name))?;
        hashes.insert(name, h);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: config.seed,
        config: config.clone(),
        sides,
        inputs,
        outputs: hashes,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&staging.join(RUN_MANIFEST), json)?;
    Ok(manifest)
}
