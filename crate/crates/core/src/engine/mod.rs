//! Iterative inpainting: one foreground step per region, then background.

mod session;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, InpaintBackend};
use crate::codec::{iterinpaint_prompt, BACKGROUND_PROMPT};
use crate::model::{background_mask, composite, mask_from_box, Canvas, Image, Layout, Mask, ModelError};
use crate::render::Palette;

pub use session::Session;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("step {step}: {source}")]
    Step { step: usize, source: BackendError },
    #[error("backend output at step {step} is {got:?}, expected {want:?}")]
    OutputSize { step: usize, got: (u32, u32), want: (u32, u32) },
    #[error("initial canvas is {got:?} but the layout is {want:?}")]
    InitialCanvas { got: (u32, u32), want: (u32, u32) },
    #[error("nothing to undo")]
    HistoryEmpty,
    #[error("unknown order policy {0:?}")]
    UnknownOrder(String),
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Keep the backend output only inside the step's mask.
    #[default]
    Paste,
    /// Commit the whole backend output.
    Repaint,
}

impl FromStr for Mode {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paste" => Ok(Self::Paste),
            "repaint" => Ok(Self::Repaint),
            other => Err(EngineError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    #[default]
    Given,
    Random { seed: u64 },
    TopToBottom,
    BottomToTop,
}

impl OrderPolicy {
    /// Parses a policy name; `random` takes `seed`.
    pub fn parse(name: &str, seed: u64) -> Result<Self, EngineError> {
        match name {
            "given" => Ok(Self::Given),
            "random" => Ok(Self::Random { seed }),
            "top_to_bottom" => Ok(Self::TopToBottom),
            "bottom_to_top" => Ok(Self::BottomToTop),
            other => Err(EngineError::UnknownOrder(other.to_string())),
        }
    }
}

impl fmt::Display for OrderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Given => f.write_str("given"),
            Self::Random { seed } => write!(f, "random({seed})"),
            Self::TopToBottom => f.write_str("top_to_bottom"),
            Self::BottomToTop => f.write_str("bottom_to_top"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialCanvas {
    /// Uniform background gray.
    #[default]
    BlankGray,
    Provided(Image),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub mode: Mode,
    pub order: OrderPolicy,
    pub background_prompt: String,
    pub initial_canvas: InitialCanvas,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Paste,
            order: OrderPolicy::Given,
            background_prompt: BACKGROUND_PROMPT.to_string(),
            initial_canvas: InitialCanvas::BlankGray,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step_index: usize,
    pub prompt: String,
    pub mask: Mask,
    pub backend_output: Image,
    pub committed: Image,
}

/// Processing order of the layout's regions as input indices.
pub fn order_regions(layout: &Layout, policy: OrderPolicy) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..layout.len()).collect();
    let key = |i: &usize| {
        let b = layout.regions()[*i].bbox;
        (b.y1(), b.x1(), *i)
    };
    match policy {
        OrderPolicy::Given => {}
        OrderPolicy::Random { seed } => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        OrderPolicy::TopToBottom => idx.sort_by_key(key),
        OrderPolicy::BottomToTop => {
            idx.sort_by_key(key);
            idx.reverse();
        }
    }
    idx
}

pub(crate) fn blank(canvas: Canvas) -> Image {
    Image::filled(canvas, Palette::default().background)
}

/// Runs one inpainting step and commits it according to `mode`.
pub(crate) fn apply_step<B: InpaintBackend + ?Sized>(
    backend: &B,
    prev: &Image,
    prompt: String,
    mask: Mask,
    mode: Mode,
    step_index: usize,
) -> Result<StepTrace, EngineError> {
    let out = backend.inpaint(prev, &prompt, &mask).map_err(|source| EngineError::Step { step: step_index, source })?;
    if out.canvas() != prev.canvas() {
        return Err(EngineError::OutputSize {
            step: step_index,
            got: (out.width(), out.height()),
            want: (prev.width(), prev.height()),
        });
    }
    let committed = match mode {
        Mode::Paste => composite(prev, &out, &mask)?,
        Mode::Repaint => out.clone(),
    };
    Ok(StepTrace { step_index, prompt, mask, backend_output: out, committed })
}

/// Generates an image for `layout`, returning it with the trace of all
/// `N + 1` steps.
pub fn generate<B: InpaintBackend + ?Sized>(
    layout: &Layout,
    backend: &B,
    opts: &EngineOptions,
) -> Result<(Image, Vec<StepTrace>), EngineError> {
    let canvas = layout.canvas();
    let mut current = match &opts.initial_canvas {
        InitialCanvas::BlankGray => blank(canvas),
        InitialCanvas::Provided(img) if img.canvas() == canvas => img.clone(),
        InitialCanvas::Provided(img) => {
            return Err(EngineError::InitialCanvas { got: (img.width(), img.height()), want: (canvas.w, canvas.h) })
        }
    };
    let mut trace = Vec::with_capacity(layout.len() + 1);
    for (k, i) in order_regions(layout, opts.order).into_iter().enumerate() {
        let region = &layout.regions()[i];
        let prompt = iterinpaint_prompt(&region.caption);
        let step = apply_step(backend, &current, prompt, mask_from_box(&region.bbox, canvas), opts.mode, k)?;
        current = step.committed.clone();
        trace.push(step);
    }
    let k = trace.len();
    let step = apply_step(backend, &current, opts.background_prompt.clone(), background_mask(layout), opts.mode, k)?;
    current = step.committed.clone();
    trace.push(step);
    Ok((current, trace))
}

#[derive(Serialize)]
struct TraceLine<'a> {
    step: usize,
    prompt: &'a str,
    mask_file: String,
    image_file: String,
}

/// Writes `step_{k}.png`, `mask_{k}.png` and `trace.jsonl` into `dir`.
pub fn export_trace(dir: &Path, trace: &[StepTrace]) -> Result<(), EngineError> {
    fs::create_dir_all(dir)?;
    let mut lines = String::new();
    for s in trace {
        let image_file = format!("step_{}.png", s.step_index);
        let mask_file = format!("mask_{}.png", s.step_index);
        fs::write(dir.join(&image_file), s.committed.encode_png()?)?;
        fs::write(dir.join(&mask_file), s.mask.encode_png()?)?;
        let line = TraceLine { step: s.step_index, prompt: &s.prompt, mask_file, image_file };
        lines.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
        lines.push('\n');
    }
    fs::write(dir.join("trace.jsonl"), lines)?;
    Ok(())
}
