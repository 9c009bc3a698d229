//! Foreground/background inpainting examples for training an external model.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{iterinpaint_prompt, parse_add_prompt, AddPrompt, BACKGROUND_PROMPT};
use crate::model::{background_mask, mask_from_box, Image, Mask, ModelError, Scene};
use crate::render::{render_objects, Palette};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("scene has no objects to add")]
    NoObject,
    #[error("no scene with objects to draw foreground examples from")]
    NoScenes,
    #[error("fg_ratio {0} outside [0, 1]")]
    InvalidRatio(f64),
    #[error("example {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("manifest line {line}: {source}")]
    Manifest { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingTask {
    Foreground,
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub context: Image,
    pub mask: Mask,
    pub prompt: String,
    pub target: Image,
    pub task: TrainingTask,
}

/// Which object is added and which others are already visible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FgChoice {
    pub target: usize,
    pub context: Vec<usize>,
}

/// Uniform target, then each other object shown independently with p = 0.5.
pub fn sample_fg_choice<R: Rng + ?Sized>(n_objects: usize, rng: &mut R) -> Result<FgChoice, TrainingError> {
    if n_objects == 0 {
        return Err(TrainingError::NoObject);
    }
    let target = rng.random_range(0..n_objects);
    let context = (0..n_objects).filter(|i| *i != target && rng.random_bool(0.5)).collect();
    Ok(FgChoice { target, context })
}

pub fn make_fg_example<R: Rng + ?Sized>(
    scene: &Scene,
    palette: &Palette,
    rng: &mut R,
) -> Result<TrainingExample, TrainingError> {
    let choice = sample_fg_choice(scene.objects.len(), rng)?;
    Ok(fg_example_for(scene, palette, &choice))
}

pub fn fg_example_for(scene: &Scene, palette: &Palette, choice: &FgChoice) -> TrainingExample {
    let shown: Vec<_> = choice.context.iter().map(|i| scene.objects[*i].clone()).collect();
    let with_target: Vec<_> = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(i, _)| *i == choice.target || choice.context.contains(i))
        .map(|(_, o)| o.clone())
        .collect();
    let target = &scene.objects[choice.target];
    TrainingExample {
        context: render_objects(palette, scene.canvas, &shown),
        mask: mask_from_box(&target.bbox, scene.canvas),
        prompt: iterinpaint_prompt(&target.caption()),
        target: render_objects(palette, scene.canvas, &with_target),
        task: TrainingTask::Foreground,
    }
}

pub fn make_bg_example(scene: &Scene, palette: &Palette) -> TrainingExample {
    let full = render_objects(palette, scene.canvas, &scene.objects);
    TrainingExample {
        context: full.clone(),
        mask: background_mask(&scene.layout()),
        prompt: BACKGROUND_PROMPT.to_string(),
        target: full,
        task: TrainingTask::Background,
    }
}

impl TrainingExample {
    /// Structural checks that hold for every well-formed example.
    pub fn validate(&self) -> Result<(), String> {
        let canvas = self.context.canvas();
        if self.target.canvas() != canvas || self.mask.canvas() != canvas {
            return Err("context, mask and target differ in size".into());
        }
        let prompt = parse_add_prompt(&self.prompt).map_err(|e| e.to_string())?;
        match (self.task, prompt) {
            (TrainingTask::Foreground, AddPrompt::Object(_)) => {
                let bbox = self.mask.bounding_box().ok_or("foreground mask is empty")?;
                if self.mask.popcount() != bbox.area() {
                    return Err("foreground mask is not a box".into());
                }
                for y in 0..canvas.h {
                    for x in 0..canvas.w {
                        if !self.mask.get(x, y) && self.context.get(x, y) != self.target.get(x, y) {
                            return Err(format!("context and target differ outside the mask at ({x}, {y})"));
                        }
                    }
                }
                if self.context == self.target {
                    return Err("target adds nothing to the context".into());
                }
                Ok(())
            }
            (TrainingTask::Background, AddPrompt::Background) => {
                if self.context != self.target {
                    return Err("background context and target differ".into());
                }
                Ok(())
            }
            _ => Err("prompt does not match the task".into()),
        }
    }
}

/// One line of `manifest.jsonl`; paths are relative to the export root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportLine {
    pub id: String,
    pub context: String,
    pub mask: String,
    pub target: String,
    pub prompt: String,
    pub task: TrainingTask,
    /// Scene the example was drawn from.
    pub scene: String,
}

fn example_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Task assignment of example `index`, independent of every other example.
pub fn draw_task(seed: u64, index: usize, fg_ratio: f64) -> TrainingTask {
    let mut rng = example_rng(seed, index);
    if rng.random_bool(fg_ratio) {
        TrainingTask::Foreground
    } else {
        TrainingTask::Background
    }
}

fn build_example(
    scenes: &[Scene],
    with_objects: &[usize],
    palette: &Palette,
    fg_ratio: f64,
    seed: u64,
    index: usize,
) -> Result<(usize, TrainingExample), TrainingError> {
    let task = draw_task(seed, index, fg_ratio);
    let mut rng = example_rng(seed, index);
    rng.next_u64();
    match task {
        TrainingTask::Foreground => {
            let s = with_objects[rng.random_range(0..with_objects.len())];
            Ok((s, make_fg_example(&scenes[s], palette, &mut rng)?))
        }
        TrainingTask::Background => {
            let s = rng.random_range(0..scenes.len());
            Ok((s, make_bg_example(&scenes[s], palette)))
        }
    }
}

/// Writes `n` examples under `out_dir` and returns the manifest path.
pub fn export_manifest(
    scenes: &[Scene],
    n: usize,
    fg_ratio: f64,
    out_dir: &Path,
    seed: u64,
) -> Result<PathBuf, TrainingError> {
    if !(0.0..=1.0).contains(&fg_ratio) {
        return Err(TrainingError::InvalidRatio(fg_ratio));
    }
    let with_objects: Vec<usize> = (0..scenes.len()).filter(|i| !scenes[*i].objects.is_empty()).collect();
    if scenes.is_empty() || (fg_ratio > 0.0 && with_objects.is_empty()) {
        return Err(TrainingError::NoScenes);
    }
    for sub in ["context", "mask", "target"] {
        fs::create_dir_all(out_dir.join(sub))?;
    }
    let palette = Palette::default();
    let width = n.max(1).to_string().len();
    let lines: Vec<ExportLine> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (s, ex) = build_example(scenes, &with_objects, &palette, fg_ratio, seed, i)?;
            let id = format!("{i:0width$}");
            let rel = |sub: &str| format!("{sub}/{id}.png");
            fs::write(out_dir.join(rel("context")), ex.context.encode_png()?)?;
            fs::write(out_dir.join(rel("mask")), ex.mask.encode_png()?)?;
            fs::write(out_dir.join(rel("target")), ex.target.encode_png()?)?;
            Ok(ExportLine {
                context: rel("context"),
                mask: rel("mask"),
                target: rel("target"),
                prompt: ex.prompt,
                task: ex.task,
                scene: scenes[s].id(),
                id,
            })
        })
        .collect::<Result<_, TrainingError>>()?;
    let path = out_dir.join("manifest.jsonl");
    let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
    for line in &lines {
        writeln!(f, "{}", serde_json::to_string(line).expect("export line serializes"))?;
    }
    f.flush()?;
    log::info!("exported {n} examples to {}", out_dir.display());
    Ok(path)
}

pub fn read_export(manifest: &Path) -> Result<Vec<ExportLine>, TrainingError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(manifest)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| TrainingError::Manifest { line: i + 1, source })?);
    }
    Ok(out)
}

/// Loads every exported triple and runs [`TrainingExample::validate`].
pub fn validate_export(manifest: &Path) -> Result<Vec<ExportLine>, TrainingError> {
    let root = manifest.parent().unwrap_or(Path::new("."));
    let lines = read_export(manifest)?;
    lines.par_iter().try_for_each(|l| {
        let ex = TrainingExample {
            context: Image::decode_png(&fs::read(root.join(&l.context))?)?,
            mask: Mask::decode_png(&fs::read(root.join(&l.mask))?)?,
            prompt: l.prompt.clone(),
            target: Image::decode_png(&fs::read(root.join(&l.target))?)?,
            task: l.task,
        };
        ex.validate().map_err(|reason| TrainingError::Invalid { id: l.id.clone(), reason })
    })?;
    Ok(lines)
}
