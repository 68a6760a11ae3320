//! Boundary-shape target masks for instance segmentation.
//!
//! - [`annotations`]: COCO-style annotation files, polygon and RLE rasters.
//! - [`maskgen`]: true boundaries and Thick/Scored bshape and bbox targets.
//! - [`reconstruct`]: connect-then-fill recovery of instances from predicted
//!   boundary masks, box decoding.
//! - [`losses`]: mask losses with analytic gradients and a finite-difference
//!   verifier.
//! - [`eval`]: COCO-style AP for boxes and masks.
//! - [`io`]: BSMK and PNG mask files.

pub mod annotations;
pub mod error;
pub mod eval;
pub mod io;
pub mod losses;
pub mod mask;
pub mod maskgen;
pub mod raster;
pub mod reconstruct;
pub mod rle;

pub use annotations::{parse_dataset, Category, Dataset, ImageRecord, InstanceAnnotation, Segmentation};
pub use error::{Error, Result};
pub use eval::{EvalReport, EvalResult, IouType};
pub use io::MaskFormat;
pub use losses::{LossKind, LossWeights, PredictionMask};
pub use mask::{BinaryMask, PixelBox, TargetMask};
pub use maskgen::{BoundarySet, MaskKind, MaskSpec, MaskVariant, Profile};
pub use reconstruct::ReconstructionParams;
