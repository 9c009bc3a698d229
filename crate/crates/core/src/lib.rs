//! Layout-guided image synthesis benchmark: scene sampling, rendering,
//! iterative inpainting, training export and layout-accuracy evaluation.
//!
//! Pixel geometry is integer throughout. Metrics are generic over
//! [`Scalar`]; the aliases below fix them to `f64`.

pub mod backend;
pub mod codec;
pub mod engine;
pub mod eval;
pub mod model;
pub mod render;
pub mod sampler;
pub mod scalar;
pub mod training;

pub use backend::{bbox_of_mask, BackendConfig, BackendError, BackendKind, InpaintBackend};
pub use engine::{generate, order_regions, EngineError, EngineOptions, Mode, OrderPolicy, Session, StepTrace};
pub use eval::{Detection, Detector, EvalError, GroundTruth};
pub use model::{BBox, Canvas, Image, Layout, Mask, ModelError, ObjectSpec, Region, Scene, Skill};
pub use render::{render_scene, Palette};
pub use sampler::{generate_bench, sample_scene, ManifestEntry, SamplerError};
pub use scalar::Scalar;

pub type EvalReport = eval::EvalReport<f64>;
pub type ApParams = eval::ApParams<f64>;
pub type ClassAp = eval::ClassAp<f64>;
pub type ReportEntry = eval::ReportEntry<f64>;
