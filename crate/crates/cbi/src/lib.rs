//! Composite biomarker imaging for histopathology stains.
//!
//! Pathologists diagnose diseases such as classical Hodgkin lymphoma by
//! cross-referencing several immunohistochemistry (IHC) stains of the same
//! tissue, hunting for regions where the markers co-express. This crate
//! automates that workflow on ordinary rasters:
//!
//! 1. a trainable neuro-fuzzy classifier ([`anfis`]) filters each stain
//!    image at pixel level into diagnostically relevant tissue classes,
//! 2. morphological cleanup ([`filter`], [`morph`]) removes stain specks
//!    and fills nuclei holes,
//! 3. the filtered layers are fused into a single pseudo-colored composite
//!    ([`composite`]), and
//! 4. an attention mask marks regions where every marker's filtered tissue
//!    population is simultaneously dense ([`attention`]).
//!
//! Images can be aligned into a common frame first ([`align`]), and every
//! per-pixel stage is tile-parallel with bit-identical output regardless of
//! worker count ([`raster`], [`pipeline`]).
//!
//! The `cbi` command-line tool in this workspace drives the full pipeline;
//! the library exposes each stage for direct use:
//!
//! ```
//! use cbi::anfis::{train, AnfisModel, TrainConfig};
//! use cbi::samples::{synth_samples, split_per_class, ClassRangeTable};
//!
//! let table = ClassRangeTable::builtin();
//! let samples = synth_samples(&table, 30, 7);
//! let (train_set, _test_set) = split_per_class(&samples, 25);
//!
//! let init = AnfisModel::init_from_samples(&train_set, AnfisModel::default_class_targets(6))?;
//! let (model, report) = train(&train_set, &TrainConfig::default(), &init)?;
//! assert!(report.final_rmse <= report.initial_rmse);
//!
//! // A trained model maps a pixel to a gray level near its class target.
//! let gray = model.evaluate([70, 30, 20]);
//! assert!((0.0..=255.0 + 1e-6).contains(&gray));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod align;
pub mod anfis;
pub mod attention;
pub mod composite;
pub mod filter;
pub mod morph;
pub mod pipeline;
pub mod raster;
pub mod samples;
pub mod synth;

mod font;

// pub use align::AffineTransform;
pub use anfis::AnfisModel;
// pub use attention::{AttentionConfig, AttentionMask};
// pub use filter::{BiomarkerProfile, MorphConfig};
// pub use raster::{GrayImage, RasterImage, TileGrid};
pub use samples::{ClassRangeTable, ClassSample};
