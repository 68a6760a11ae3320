//! Config-file loading and the merge of flags, file values and defaults.

use std::path::{Path, PathBuf};

use bshape_core::maskgen::DEFAULT_SCORE_STEP;
use bshape_core::reconstruct::{DEFAULT_MAX_BRIDGE, DEFAULT_THRESHOLD};
use bshape_core::{IouType, MaskFormat, MaskKind, MaskSpec, MaskVariant, Profile, ReconstructionParams};
use serde::Deserialize;

use crate::args::{Command, EvaluateArgs, GenTargetsArgs, LossCheckArgs, ReconstructArgs};
use crate::CliError;

/// Keys of the TOML config file. One flat table shared by all subcommands;
/// each subcommand reads the keys it understands.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub annotations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kind: Option<MaskKind>,
    pub variant: Option<MaskVariant>,
    pub k: Option<u32>,
    pub s: Option<f64>,
    pub format: Option<MaskFormat>,
    pub profile: Option<Profile>,
    pub masks: Option<PathBuf>,
    pub threshold: Option<f32>,
    pub max_bridge: Option<f64>,
    pub gt: Option<PathBuf>,
    pub dets: Option<PathBuf>,
    pub iou_type: Option<IouType>,
    pub seeds: Option<u32>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub size: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenTargetsConfig {
    pub annotations: PathBuf,
    pub out: PathBuf,
    pub spec: MaskSpec,
    pub format: MaskFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructConfig {
    pub masks: PathBuf,
    pub out: PathBuf,
    pub params: ReconstructionParams,
    pub format: MaskFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateConfig {
    pub gt: PathBuf,
    pub dets: PathBuf,
    pub iou_type: IouType,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCheckConfig {
    pub seeds: u32,
    pub seed: u64,
    pub step: f64,
    pub size: usize,
}

/// A fully resolved subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    GenTargets(GenTargetsConfig),
    Reconstruct(ReconstructConfig),
    Evaluate(EvaluateConfig),
    LossCheck(LossCheckConfig),
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("--{name} is required")))
}

fn invalid(e: bshape_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn resolve(command: Command, file: FileConfig) -> Result<RunConfig, CliError> {
    Ok(match command {
        Command::GenTargets(a) => RunConfig::GenTargets(gen_targets(a, file)?),
        Command::Reconstruct(a) => RunConfig::Reconstruct(reconstruct(a, file)?),
        Command::Evaluate(a) => RunConfig::Evaluate(evaluate(a, file)?),
        Command::LossCheck(a) => RunConfig::LossCheck(loss_check(a, file)?),
    })
}

fn gen_targets(a: GenTargetsArgs, f: FileConfig) -> Result<GenTargetsConfig, CliError> {
    let profile = a.profile.or(f.profile).unwrap_or(Profile::Coco);
    let spec = MaskSpec::new(
        a.kind.or(f.kind).unwrap_or(MaskKind::Bshape),
        a.variant.or(f.variant).unwrap_or(MaskVariant::Scored),
        a.k.or(f.k).unwrap_or(profile.half_thickness()),
        a.s.or(f.s).unwrap_or(DEFAULT_SCORE_STEP),
    )
    .map_err(invalid)?;
    Ok(GenTargetsConfig {
        annotations: required(a.annotations, f.annotations, "annotations")?,
        out: required(a.out, f.out, "out")?,
        spec,
        format: a.format.or(f.format).unwrap_or(MaskFormat::Bsmk),
    })
}

fn reconstruct(a: ReconstructArgs, f: FileConfig) -> Result<ReconstructConfig, CliError> {
    let profile = a.profile.or(f.profile).unwrap_or(Profile::Coco);
    let params = ReconstructionParams {
        binarize_threshold: a.threshold.or(f.threshold).unwrap_or(DEFAULT_THRESHOLD),
        max_bridge_distance: a.max_bridge.or(f.max_bridge).unwrap_or(DEFAULT_MAX_BRIDGE),
        boundary_half_thickness: a.k.or(f.k).unwrap_or(profile.half_thickness()),
    };
    params.validate().map_err(invalid)?;
    Ok(ReconstructConfig {
        masks: required(a.masks, f.masks, "masks")?,
        out: required(a.out, f.out, "out")?,
        params,
        format: a.format.or(f.format).unwrap_or(MaskFormat::Bsmk),
    })
}

fn evaluate(a: EvaluateArgs, f: FileConfig) -> Result<EvaluateConfig, CliError> {
    Ok(EvaluateConfig {
        gt: required(a.gt, f.gt, "gt")?,
        dets: required(a.dets, f.dets, "dets")?,
        iou_type: a.iou_type.or(f.iou_type).unwrap_or(IouType::Bbox),
        out: a.out.or(f.out),
    })
}

fn loss_check(a: LossCheckArgs, f: FileConfig) -> Result<LossCheckConfig, CliError> {
    let cfg = LossCheckConfig {
        seeds: a.seeds.or(f.seeds).unwrap_or(100),
        seed: a.seed.or(f.seed).unwrap_or(0),
        step: a.step.or(f.step).unwrap_or(1e-5),
        size: a.size.or(f.size).unwrap_or(8),
    };
    if !(cfg.step > 0.0 && cfg.step < 0.05) {
        return Err(CliError::Usage(format!("--step {} not in (0, 0.05)", cfg.step)));
    }
    if cfg.size == 0 {
        return Err(CliError::Usage("--size must be positive".into()));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(a: GenTargetsArgs, f: FileConfig) -> GenTargetsConfig {
        gen_targets(a, f).unwrap()
    }

    fn paths() -> GenTargetsArgs {
        GenTargetsArgs {
            annotations: Some("a.json".into()),
            out: Some("d".into()),
            ..Default::default()
        }
    }

    #[test]
    fn gen_targets_defaults() {
        let c = gen(paths(), FileConfig::default());
        assert_eq!(c.spec.s, 0.05);
        assert_eq!(c.spec.k, 7);
        assert_eq!(c.spec.kind, MaskKind::Bshape);
        assert_eq!(c.spec.variant, MaskVariant::Scored);
        assert_eq!(c.format, MaskFormat::Bsmk);
    }

    #[test]
    fn cityscapes_profile() {
        let a = GenTargetsArgs {
            profile: Some(Profile::Cityscapes),
            ..paths()
        };
        assert_eq!(gen(a, FileConfig::default()).spec.k, 3);
        let f = FileConfig::parse("profile = \"cityscapes\"").unwrap();
        assert_eq!(gen(paths(), f).spec.k, 3);
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let f = FileConfig::parse("k = 5\ns = 0.1\nvariant = \"thick\"").unwrap();
        let a = GenTargetsArgs {
            k: Some(11),
            ..paths()
        };
        let c = gen(a, f);
        assert_eq!(c.spec.k, 11);
        assert_eq!(c.spec.s, 0.1);
        assert_eq!(c.spec.variant, MaskVariant::Thick);
    }

    #[test]
    fn explicit_k_overrides_profile() {
        let f = FileConfig::parse("profile = \"cityscapes\"\nk = 9").unwrap();
        assert_eq!(gen(paths(), f).spec.k, 9);
    }

    #[test]
    fn paths_from_file() {
        let f = FileConfig::parse("annotations = \"x.json\"\nout = \"o\"").unwrap();
        let c = gen(GenTargetsArgs::default(), f);
        assert_eq!(c.annotations, PathBuf::from("x.json"));
        assert!(matches!(
            gen_targets(GenTargetsArgs::default(), FileConfig::default()),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let a = GenTargetsArgs {
            s: Some(1.5),
            ..paths()
        };
        assert!(matches!(gen_targets(a, FileConfig::default()), Err(CliError::Usage(_))));
        assert!(matches!(FileConfig::parse("bogus = 1"), Err(CliError::Usage(_))));
        assert!(matches!(FileConfig::parse("kind = \"circle\""), Err(CliError::Usage(_))));
    }

    #[test]
    fn reconstruct_defaults() {
        let a = ReconstructArgs {
            masks: Some("m".into()),
            out: Some("r".into()),
            ..Default::default()
        };
        let c = reconstruct(a, FileConfig::default()).unwrap();
        assert_eq!(c.params.binarize_threshold, 0.5);
        assert_eq!(c.params.max_bridge_distance, 32.0);
        assert_eq!(c.params.boundary_half_thickness, 7);
        let f = FileConfig::parse("profile = \"cityscapes\"\nthreshold = 0.6").unwrap();
        let a = ReconstructArgs {
            masks: Some("m".into()),
            out: Some("r".into()),
            ..Default::default()
        };
        let c = reconstruct(a, f).unwrap();
        assert_eq!(c.params.boundary_half_thickness, 3);
        assert_eq!(c.params.binarize_threshold, 0.6);
    }

    #[test]
    fn loss_check_defaults() {
        let c = loss_check(LossCheckArgs::default(), FileConfig::default()).unwrap();
        assert_eq!(c, LossCheckConfig { seeds: 100, seed: 0, step: 1e-5, size: 8 });
    }
}
