//! Subcommand execution. Each command returns a JSON report for stdout.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bshape_core::eval::{evaluate, ground_truths, parse_detections};
use bshape_core::io::{read_target, write_atomic, write_binary, write_target};
use bshape_core::maskgen::generate_target;
use bshape_core::reconstruct::{bbox_from_mask, reconstruct_instance};
use bshape_core::{parse_dataset, Dataset, MaskFormat, PixelBox};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{EvaluateConfig, GenTargetsConfig, LossCheckConfig, ReconstructConfig};
use crate::loss_check;

fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dataset(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Serialize)]
struct Written {
    image_id: u64,
    annotation_id: u64,
    path: PathBuf,
}

pub fn gen_targets(cfg: &GenTargetsConfig) -> Result<Value> {
    let dataset = load_dataset(&cfg.annotations)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut written = dataset
        .annotations()
        .par_iter()
        .map(|ann| {
            let image = dataset.image(ann.image_id).expect("validated at parse");
            let target = generate_target(ann, image, &cfg.spec)
                .with_context(|| format!("annotation {}", ann.id))?;
            let path = cfg
                .out
                .join(format!("{}_{}.{}", ann.image_id, ann.id, cfg.format.extension()));
            write_target(&path, &target, cfg.format)
                .with_context(|| format!("writing {}", path.display()))?;
            Ok(Written {
                image_id: ann.image_id,
                annotation_id: ann.id,
                path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    written.sort_by_key(|w| (w.image_id, w.annotation_id));
    log::info!("wrote {} targets to {}", written.len(), cfg.out.display());
    Ok(serde_json::json!({
        "spec": cfg.spec,
        "format": cfg.format,
        "written": written,
    }))
}

/// Mask files directly inside `dir`, sorted by name.
fn mask_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && MaskFormat::from_path(&path).is_some() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Serialize)]
struct Reconstructed {
    input: PathBuf,
    output: PathBuf,
    area: u64,
    bbox: Option<PixelBox>,
}

pub fn reconstruct(cfg: &ReconstructConfig) -> Result<Value> {
    let inputs = mask_files(&cfg.masks)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let results = inputs
        .par_iter()
        .map(|input| {
            let pred = read_target(input).with_context(|| format!("reading {}", input.display()))?;
            let mask = reconstruct_instance(&pred, &cfg.params)?;
            let stem = input.file_stem().expect("listed files have names");
            let output = cfg.out.join(stem).with_extension(cfg.format.extension());
            write_binary(&output, &mask, cfg.format)
                .with_context(|| format!("writing {}", output.display()))?;
            Ok(Reconstructed {
                input: input.clone(),
                output,
                area: mask.count() as u64,
                bbox: bbox_from_mask(&mask).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::json!({
        "params": cfg.params,
        "format": cfg.format,
        "masks": results,
    }))
}

pub fn evaluate_cmd(cfg: &EvaluateConfig) -> Result<Value> {
    let dataset = load_dataset(&cfg.gt)?;
    let gts = ground_truths(&dataset, cfg.iou_type)?;
    let text = fs::read_to_string(&cfg.dets).with_context(|| format!("reading {}", cfg.dets.display()))?;
    let dets = parse_detections(&text, &dataset, cfg.iou_type)
        .with_context(|| format!("parsing {}", cfg.dets.display()))?;
    let categories: Vec<(u64, String)> = dataset
        .categories()
        .iter()
        .map(|c| (c.id, c.name.clone()))
        .collect();
    let report = evaluate(&dets, &gts, &categories, cfg.iou_type)?;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &cfg.out {
        let mut bytes = serde_json::to_vec_pretty(&value)?;
        bytes.push(b'\n');
        write_atomic(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(value)
}

pub fn loss_check(cfg: &LossCheckConfig) -> Result<(Value, bool)> {
    let report = loss_check::run(cfg)?;
    Ok((serde_json::to_value(&report)?, report.pass()))
}
