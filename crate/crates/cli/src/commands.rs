use std::collections::HashMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use layoutlab_core::engine::{export_trace, generate, EngineOptions};
use layoutlab_core::eval::{
    evaluate_run, read_detections, report_table, shuffled_baseline, write_detections, Detection, Detector,
};
use layoutlab_core::render::{render_scene, Palette};
use layoutlab_core::sampler::{generate_bench as sample_bench, read_manifest, write_manifest, ManifestEntry, OOD_SPLITS};
use layoutlab_core::training::{export_manifest, read_export, TrainingTask};
use layoutlab_core::{ApParams, Image, ReportEntry, Skill};
use rayon::prelude::*;

use crate::service::{self, AppState};
use crate::{
    CliError, EvalArgs, ExportTrainingArgs, GenerateBenchArgs, RenderGtArgs, ReportArgs, RunArgs, ServeArgs,
};

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    fs::File::open(path).map(BufReader::new).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CliError> {
    Ok(read_manifest(open(path)?)?)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<ManifestEntry>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(load_manifest(p)?);
    }
    Ok(out)
}

/// The `(skill, split)` pairs selected by optional flags.
fn selected_splits(skill: Option<&str>, split: Option<&str>) -> Result<Vec<(Skill, String)>, CliError> {
    let parse_skill = |s: &str| s.parse::<Skill>().map_err(|_| CliError::Usage(format!("unknown skill {s:?}")));
    match (skill, split) {
        (None, None) => Ok(OOD_SPLITS.iter().map(|(k, s)| (*k, s.to_string())).collect()),
        (None, Some(_)) => Err(CliError::Usage("--split needs --skill".into())),
        (Some(k), Some(s)) => Ok(vec![(parse_skill(k)?, s.to_string())]),
        (Some(k), None) => {
            let skill = parse_skill(k)?;
            if skill == Skill::Id {
                return Ok(vec![(skill, layoutlab_core::sampler::ID_SPLIT.to_string())]);
            }
            Ok(OOD_SPLITS.iter().filter(|(sk, _)| *sk == skill).map(|(k, s)| (*k, s.to_string())).collect())
        }
    }
}

pub fn manifest_name(skill: Skill, split: &str) -> String {
    format!("{skill}_{split}.jsonl")
}

pub fn generate_bench(a: &GenerateBenchArgs) -> Result<(), CliError> {
    let splits = selected_splits(a.skill.as_deref(), a.split.as_deref())?;
    create_dir(&a.out)?;
    for (skill, split) in splits {
        let entries = sample_bench(skill, &split, a.n, a.seed)?;
        let path = a.out.join(manifest_name(skill, &split));
        let mut w = BufWriter::new(fs::File::create(&path).map_err(|source| CliError::File { path: path.clone(), source })?);
        write_manifest(&mut w, &entries)?;
        w.flush()?;
        println!("{} scenes -> {}", entries.len(), path.display());
    }
    Ok(())
}

pub fn render_gt(a: &RenderGtArgs) -> Result<(), CliError> {
    let entries = load_all(&a.manifests)?;
    create_dir(&a.out)?;
    let palette = Palette::default();
    entries.par_iter().try_for_each(|e| {
        let (img, _) = render_scene(&palette, &e.scene);
        let id = e.image_id();
        write_file(&a.out.join(format!("{id}.png")), &img.encode_png()?)?;
        let json = serde_json::to_vec_pretty(&e.scene).expect("scene serializes");
        write_file(&a.out.join(format!("{id}.json")), &json)
    })?;
    println!("rendered {} scenes -> {}", entries.len(), a.out.display());
    Ok(())
}

pub fn run(a: &RunArgs) -> Result<(), CliError> {
    let entries = load_all(&a.manifests)?;
    let backend = a.backend.config(a.seed)?.build()?;
    let mode = a.engine.mode()?;
    create_dir(&a.out)?;
    entries.par_iter().try_for_each(|e| {
        let opts = EngineOptions { mode, order: a.engine.order(a.seed, e.seed)?, ..EngineOptions::default() };
        let (img, trace) = generate(&e.scene.layout(), &backend, &opts)?;
        let id = e.image_id();
        write_file(&a.out.join(format!("{id}.png")), &img.encode_png()?)?;
        if a.trace {
            export_trace(&a.out.join("traces").join(&id), &trace)?;
        }
        Ok::<_, CliError>(())
    })?;
    println!("generated {} images -> {}", entries.len(), a.out.display());
    Ok(())
}

fn detect_dir(dir: &Path, entries: &[ManifestEntry]) -> Result<Vec<Detection>, CliError> {
    let det = Detector::default();
    let per_image: Vec<Vec<Detection>> = entries
        .par_iter()
        .map(|e| {
            let id = e.image_id();
            let path = dir.join(format!("{id}.png"));
            let bytes = fs::read(&path).map_err(|source| CliError::File { path, source })?;
            Ok(det.detect(&id, &Image::decode_png(&bytes)?))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(per_image.into_iter().flatten().collect())
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let manifests: Vec<(PathBuf, Vec<ManifestEntry>)> =
        a.manifests.iter().map(|p| Ok((p.clone(), load_manifest(p)?))).collect::<Result<_, CliError>>()?;
    let all: Vec<ManifestEntry> = manifests.iter().flat_map(|(_, m)| m.iter().cloned()).collect();
    let detections = match (&a.images, &a.detections) {
        (Some(dir), _) => {
            let dets = detect_dir(dir, &all)?;
            if let Some(path) = &a.write_detections {
                let mut w = BufWriter::new(fs::File::create(path).map_err(|source| CliError::File { path: path.clone(), source })?);
                write_detections(&mut w, &dets)?;
                w.flush()?;
            }
            dets
        }
        (None, Some(path)) => read_detections(open(path)?)?,
        (None, None) => return Err(CliError::Usage("one of --images or --detections is required".into())),
    };
    let owner: HashMap<String, usize> =
        manifests.iter().enumerate().flat_map(|(i, (_, m))| m.iter().map(move |e| (e.image_id(), i))).collect();
    let mut grouped: Vec<Vec<Detection>> = vec![Vec::new(); manifests.len()];
    for d in detections {
        let Some(&i) = owner.get(&d.image_id) else {
            return Err(layoutlab_core::EvalError::ManifestMismatch(d.image_id).into());
        };
        grouped[i].push(d);
    }

    let params = ApParams::default();
    let mut entries = Vec::new();
    for ((path, manifest), dets) in manifests.iter().zip(grouped) {
        let Some(first) = manifest.first() else {
            return Err(CliError::Usage(format!("{} has no scenes", path.display())));
        };
        let report = if a.shuffled {
            shuffled_baseline(manifest, &dets, a.seed, &params)?
        } else {
            evaluate_run(manifest, &dets, &params)?
        };
        entries.push(ReportEntry { method: a.method.clone(), split: first.split.clone(), report });
    }
    write_reports(&a.out, &entries)?;
    print!("{}", report_table(&entries).to_text());
    Ok(())
}

fn write_reports(path: &Path, entries: &[ReportEntry]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e).expect("report serializes"));
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

pub fn read_reports(path: &Path) -> Result<Vec<ReportEntry>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|source| CliError::Json { path: path.to_path_buf(), source }))
        .collect()
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for p in &a.inputs {
        entries.extend(read_reports(p)?);
    }
    if entries.is_empty() {
        return Err(CliError::Usage("no reports in the given inputs".into()));
    }
    let table = report_table(&entries);
    let text = table.to_text();
    print!("{text}");
    if let Some(p) = &a.out {
        write_file(p, text.as_bytes())?;
    }
    if let Some(p) = &a.csv {
        write_file(p, table.to_csv().as_bytes())?;
    }
    Ok(())
}

pub fn export_training(a: &ExportTrainingArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.fg_ratio) {
        return Err(CliError::Usage(format!("--fg-ratio {} outside [0, 1]", a.fg_ratio)));
    }
    let scenes: Vec<_> = load_all(&a.manifests)?.into_iter().map(|e| e.scene).collect();
    let path = export_manifest(&scenes, a.n, a.fg_ratio, &a.out, a.seed)?;
    let lines = read_export(&path)?;
    let fg = lines.iter().filter(|l| l.task == TrainingTask::Foreground).count();
    println!("{} examples ({fg} foreground) -> {}", lines.len(), path.display());
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let backend = a.backend.config(a.seed)?.build()?;
    let state = AppState::new(Arc::clone(&backend), Duration::from_secs(a.ttl_secs));
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        service::serve(listener, state).await
    })?;
    Ok(())
}
