//! The `inpaint(context, prompt, mask) -> image` contract and its backends.

mod perturb;
mod procedural;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodecError;
use crate::model::{BBox, Image, Mask, ModelError};

pub use perturb::PerturbBackend;
pub use procedural::ProceduralBackend;
pub use remote::{InpaintRequest, InpaintResponse, RemoteBackend, WireError};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("backend timed out")]
    Timeout,
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("context is {ctx:?} but mask is {mask:?}")]
    Dimension { ctx: (u32, u32), mask: (u32, u32) },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] CodecError),
    #[error(transparent)]
    Image(#[from] ModelError),
}

/// Generates an image from a context, a text prompt and an update mask.
///
/// Only the output dimensions are constrained; callers composite to keep
/// pixels outside the mask.
pub trait InpaintBackend: Send + Sync {
    fn inpaint(&self, ctx: &Image, prompt: &str, mask: &Mask) -> Result<Image, BackendError>;
}

impl<B: InpaintBackend + ?Sized> InpaintBackend for Arc<B> {
    fn inpaint(&self, ctx: &Image, prompt: &str, mask: &Mask) -> Result<Image, BackendError> {
        (**self).inpaint(ctx, prompt, mask)
    }
}

impl<B: InpaintBackend + ?Sized> InpaintBackend for Box<B> {
    fn inpaint(&self, ctx: &Image, prompt: &str, mask: &Mask) -> Result<Image, BackendError> {
        (**self).inpaint(ctx, prompt, mask)
    }
}

/// Tightest box around the set pixels.
pub fn bbox_of_mask(mask: &Mask) -> Result<BBox, BackendError> {
    mask.bounding_box().ok_or(BackendError::EmptyMask)
}

pub(crate) fn check_dims(ctx: &Image, mask: &Mask) -> Result<(), BackendError> {
    if ctx.canvas() != mask.canvas() {
        return Err(BackendError::Dimension {
            ctx: (ctx.width(), ctx.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Procedural,
    Remote,
    Perturb,
}

impl std::str::FromStr for BackendKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "procedural" => Ok(Self::Procedural),
            "remote" => Ok(Self::Remote),
            "perturb" => Ok(Self::Perturb),
            other => Err(BackendError::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub guidance_scale: f64,
    pub steps: u32,
    pub jitter_px: u32,
    /// Seed of the perturbation offsets.
    pub seed: u64,
    pub timeout_ms: u64,
    pub max_inflight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Procedural,
            endpoint: None,
            guidance_scale: 4.0,
            steps: 50,
            jitter_px: 0,
            seed: 0,
            timeout_ms: 120_000,
            max_inflight: 4,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::Config(m.to_string()));
        if self.guidance_scale.is_nan() || self.guidance_scale <= 0.0 {
            return bad("guidance_scale must be positive");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if self.jitter_px > 0 && self.kind != BackendKind::Perturb {
            return bad("jitter_px only applies to the perturb backend");
        }
        if self.kind == BackendKind::Remote && self.endpoint.is_none() {
            return bad("the remote backend needs an endpoint");
        }
        if self.max_inflight == 0 {
            return bad("max_inflight must be at least 1");
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Arc<dyn InpaintBackend>, BackendError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Procedural => Arc::new(ProceduralBackend::default()),
            BackendKind::Perturb => {
                Arc::new(PerturbBackend::new(ProceduralBackend::default(), self.jitter_px, self.seed))
            }
            BackendKind::Remote => Arc::new(RemoteBackend::new(self)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mask_from_box, Canvas};

    #[test]
    fn bbox_of_mask_cases() {
        let c = Canvas::new(50, 40);
        let b = BBox::new(3, 4, 20, 30).unwrap();
        assert_eq!(bbox_of_mask(&mask_from_box(&b, c)).unwrap(), b);
        let mut m = Mask::zeros(c);
        m.set(7, 9, true);
        assert_eq!(bbox_of_mask(&m).unwrap(), BBox::new(7, 9, 8, 10).unwrap());
        m.set(30, 2, true);
        assert_eq!(bbox_of_mask(&m).unwrap(), BBox::new(7, 2, 31, 10).unwrap());
        assert!(matches!(bbox_of_mask(&Mask::zeros(c)), Err(BackendError::EmptyMask)));
    }

    #[test]
    fn config_validation() {
        assert!(BackendConfig::default().validate().is_ok());
        let c = BackendConfig { jitter_px: 3, ..BackendConfig::default() };
        assert!(c.validate().is_err());
        let c = BackendConfig { kind: BackendKind::Remote, ..BackendConfig::default() };
        assert!(c.validate().is_err());
        let c = BackendConfig { guidance_scale: 0.0, ..BackendConfig::default() };
        assert!(c.validate().is_err());
        let c = BackendConfig { steps: 0, ..BackendConfig::default() };
        assert!(c.validate().is_err());
        assert_eq!("perturb".parse::<BackendKind>().unwrap(), BackendKind::Perturb);
    }
}
