//! Command-line flags. Every option is optional here so that a value missing
//! on the command line can come from the config file, then from defaults.

use std::path::PathBuf;

use bshape_core::{IouType, MaskFormat, MaskKind, MaskVariant, Profile};
use clap::{Args, Parser, Subcommand};
use serde::de::{DeserializeOwned, IntoDeserializer};

/// Parses a lowercase keyword the same way the config file does.
fn keyword<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(s.into_deserializer()).map_err(|e: serde::de::value::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "bshape", version, about = "Boundary-shape mask targets, reconstruction and evaluation")]
pub struct Cli {
    /// TOML file whose kebab-case keys mirror the flags; flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one target mask per annotation
    GenTargets(GenTargetsArgs),
    /// Turn predicted boundary masks into filled instance masks
    Reconstruct(ReconstructArgs),
    /// Compute the AP family for detections against ground truth
    Evaluate(EvaluateArgs),
    /// Compare analytic loss gradients with finite differences
    LossCheck(LossCheckArgs),
}

#[derive(Debug, Args, Default)]
pub struct GenTargetsArgs {
    /// Annotation file (JSON)
    #[arg(long, value_name = "PATH")]
    pub annotations: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// bshape | bbox [default: bshape]
    #[arg(long, value_parser = keyword::<MaskKind>)]
    pub kind: Option<MaskKind>,
    /// thick | scored [default: scored]
    #[arg(long, value_parser = keyword::<MaskVariant>)]
    pub variant: Option<MaskVariant>,
    /// Boundary half-thickness [default: from profile]
    #[arg(long)]
    pub k: Option<u32>,
    /// Score step [default: 0.05]
    #[arg(long)]
    pub s: Option<f64>,
    /// bsmk | png [default: bsmk]
    #[arg(long, value_parser = keyword::<MaskFormat>)]
    pub format: Option<MaskFormat>,
    /// coco (k = 7) | cityscapes (k = 3) [default: coco]
    #[arg(long, value_parser = keyword::<Profile>)]
    pub profile: Option<Profile>,
}

#[derive(Debug, Args, Default)]
pub struct ReconstructArgs {
    /// Directory of predicted masks (.bsmk or .png)
    #[arg(long, value_name = "DIR")]
    pub masks: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Binarization threshold [default: 0.5]
    #[arg(long)]
    pub threshold: Option<f32>,
    /// Longest bridge drawn between fragments, in pixels [default: 32]
    #[arg(long)]
    pub max_bridge: Option<f64>,
    /// Half-thickness of the predicted band [default: from profile]
    #[arg(long)]
    pub k: Option<u32>,
    /// bsmk | png [default: bsmk]
    #[arg(long, value_parser = keyword::<MaskFormat>)]
    pub format: Option<MaskFormat>,
    /// coco (k = 7) | cityscapes (k = 3) [default: coco]
    #[arg(long, value_parser = keyword::<Profile>)]
    pub profile: Option<Profile>,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    /// Ground-truth annotation file (JSON)
    #[arg(long, value_name = "PATH")]
    pub gt: Option<PathBuf>,
    /// Detections file (JSON array)
    #[arg(long, value_name = "PATH")]
    pub dets: Option<PathBuf>,
    /// bbox | mask [default: bbox]
    #[arg(long, value_parser = keyword::<IouType>)]
    pub iou_type: Option<IouType>,
    /// Also write the report here
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct LossCheckArgs {
    /// Number of random instances per loss [default: 100]
    #[arg(long)]
    pub seeds: Option<u32>,
    /// First seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Finite-difference step [default: 1e-5]
    #[arg(long)]
    pub step: Option<f64>,
    /// Side length of the square instances [default: 8]
    #[arg(long)]
    pub size: Option<usize>,
}
