//! Batch subcommands. Each returns a JSON summary that `main` prints.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use jpt_core::analysis::{
    clear_mot, clear_mot_chunked, frames_from_hypothesis, hypothesis_from_tracks, match_modes, total_variation,
    tv_curve, Hypothesis, MotReport,
};
use jpt_core::bed::{ground_truth_oracle, run_bed_loop, write_rounds, BedConfig, Planner};
use jpt_core::io::{
    generate_k33, generate_teaser, load_ground_truth, load_labels, load_observations, load_samples, save_ground_truth,
    save_labels, save_observations, save_samples, SampleWriter,
};
use jpt_core::parallel::map_indexed;
use jpt_core::rng::derive_seed;
use jpt_core::sampler::{run_chain_with, SampleRecord};
use jpt_core::{ChainState, GroundTruth, Scene};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SceneKind {
    K33,
    Teaser,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn generate(kind: SceneKind, seed: u64, noise: f64, out_dir: &Path) -> Result<Value> {
    ensure!(noise >= 0.0 && noise.is_finite(), jpt_core::Error::Parameter("noise must be a finite non-negative number".into()));
    let s = match kind {
        SceneKind::K33 => generate_k33(seed, noise),
        SceneKind::Teaser => generate_teaser(seed, noise),
    };
    create_dir(out_dir)?;
    save_observations(out_dir.join("observations.csv"), &s.obs)?;
    save_ground_truth(out_dir.join("ground_truth.csv"), &s.truth)?;
    if let Some(labels) = &s.truth.labels {
        save_labels(out_dir.join("labels.csv"), labels)?;
    }
    let scene = Scene::new(s.obs.clone(), s.params.clone())?;
    let modes: Vec<SampleRecord> = s
        .modes
        .iter()
        .enumerate()
        .map(|(i, tracks)| {
            let state = ChainState::from_tracks(&scene, tracks.clone(), Arc::from(vec![]));
            SampleRecord {
                iteration: i,
                chain: 0,
                log_joint: state.log_joint(),
                kind: jpt_core::proposals::MoveKind::Ffbs,
                accepted: true,
                z: state.association().clone(),
                tracks: state.tracks().to_vec(),
                counts: state.counts().clone(),
            }
        })
        .collect();
    save_samples(out_dir.join("modes.jsonl"), &modes)?;
    RunConfig::new(s.params).save(&out_dir.join("config.json"))?;
    Ok(json!({
        "out_dir": out_dir,
        "horizon": s.obs.horizon(),
        "observations": s.obs.total(),
        "objects": s.truth.object_ids().len(),
        "modes": modes.len(),
    }))
}

/// Everything needed to rerun `sample` bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub observations: PathBuf,
    pub observations_sha256: String,
    pub config: RunConfig,
    pub chains: Vec<ChainEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainEntry {
    pub chain: usize,
    pub file: String,
    pub records: usize,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct SampleArgs {
    pub obs: PathBuf,
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

/// Loads `--manifest` and checks the observation file is unchanged.
pub fn from_manifest(path: &Path, out_dir: PathBuf) -> Result<SampleArgs> {
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
        .map_err(jpt_core::Error::from)?;
    let digest = sha256_file(&m.observations)?;
    if digest != m.observations_sha256 {
        bail!(jpt_core::Error::Parameter(format!(
            "{} has changed since the manifest was written",
            m.observations.display()
        )));
    }
    m.config.validate()?;
    Ok(SampleArgs {
        obs: m.observations,
        config: m.config,
        out_dir,
    })
}

pub fn sample(args: &SampleArgs) -> Result<Value> {
    args.config.validate()?;
    let obs = load_observations(&args.obs)?;
    let scene = Scene::new(obs, args.config.model.clone())?;
    create_dir(&args.out_dir)?;
    let cfg = &args.config.sampler;
    let counts = map_indexed(cfg.execution, cfg.replicates, |c| -> Result<usize> {
        let path = args.out_dir.join(format!("chain-{c}.jsonl"));
        let mut writer = SampleWriter::create(&path)?;
        let mut n = 0;
        run_chain_with(&scene, cfg, c, Arc::from(vec![]), |r| {
            n += 1;
            writer.write(&r)
        })?;
        writer.finish()?;
        Ok(n)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        observations: std::path::absolute(&args.obs)?,
        observations_sha256: sha256_file(&args.obs)?,
        config: args.config.clone(),
        chains: counts
            .iter()
            .enumerate()
            .map(|(chain, &records)| ChainEntry {
                chain,
                file: format!("chain-{chain}.jsonl"),
                records,
            })
            .collect(),
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    Ok(json!({ "out_dir": args.out_dir, "chains": counts.len(), "records": counts.iter().sum::<usize>() }))
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<(usize, SampleRecord)>> {
    ensure!(!paths.is_empty(), jpt_core::Error::Parameter("no sample files given".into()));
    let mut out = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let records = load_samples(p).with_context(|| format!("reading {}", p.display()))?;
        out.extend(records.into_iter().map(|r| (i, r)));
    }
    Ok(out)
}

fn hypotheses(records: &[(usize, SampleRecord)], config: &RunConfig) -> Vec<Hypothesis> {
    records
        .iter()
        .map(|(_, r)| hypothesis_from_tracks(&r.tracks, &config.model.observation))
        .collect()
}

pub struct MetricsArgs<'a> {
    pub samples: &'a [PathBuf],
    pub truth: &'a Path,
    pub config: &'a RunConfig,
    pub radius: Option<f64>,
    pub chunk: Option<usize>,
    pub out: Option<&'a Path>,
}

pub fn metrics(args: &MetricsArgs) -> Result<Value> {
    let radius = args.radius.unwrap_or_else(|| args.config.default_radius());
    ensure!(radius > 0.0 && radius.is_finite(), jpt_core::Error::Parameter("radius must be positive".into()));
    if args.chunk == Some(0) {
        bail!(jpt_core::Error::Parameter("chunk must be positive".into()));
    }
    let truth = load_ground_truth(args.truth)?;
    let records = load_all(args.samples)?;
    let horizon = truth.horizon();
    let reports: Vec<MotReport> = hypotheses(&records, args.config)
        .iter()
        .map(|h| {
            let frames = frames_from_hypothesis(h, horizon);
            match args.chunk {
                Some(k) => clear_mot_chunked(&frames, &truth.frames, radius, k),
                None => clear_mot(&frames, &truth.frames, radius),
            }
        })
        .collect();
    if let Some(path) = args.out {
        let mut w = csv_writer(path)?;
        w.write_record(["file", "chain", "iteration", "mota", "misses", "false_positives", "id_switches", "fragmentations", "truth_count"])?;
        for ((file, r), m) in records.iter().zip(&reports) {
            w.write_record(&[
                args.samples[*file].display().to_string(),
                r.chain.to_string(),
                r.iteration.to_string(),
                m.mota.to_string(),
                m.misses.to_string(),
                m.false_positives.to_string(),
                m.id_switches.to_string(),
                m.fragmentations.to_string(),
                m.truth_count.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MotReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(json!({
        "samples": reports.len(),
        "radius": radius,
        "chunk": args.chunk,
        "mean_mota": mean(|m| m.mota),
        "mean_misses": mean(|m| m.misses as f64),
        "mean_false_positives": mean(|m| m.false_positives as f64),
        "mean_id_switches": mean(|m| m.id_switches as f64),
        "mean_fragmentations": mean(|m| m.fragmentations as f64),
    }))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub struct ModesArgs<'a> {
    pub samples: &'a [PathBuf],
    pub modes: &'a Path,
    pub obs: &'a Path,
    pub config: &'a RunConfig,
    pub out_dir: &'a Path,
}

pub fn modes(args: &ModesArgs) -> Result<Value> {
    let obs = load_observations(args.obs)?;
    let stlc = args.config.stlc_for(&obs);
    let records = load_all(args.samples)?;
    let modes = load_all(&[args.modes.to_path_buf()])?;
    ensure!(!modes.is_empty(), jpt_core::Error::Parameter("mode file is empty".into()));
    let exec = args.config.sampler.execution;
    let hist = match_modes(&hypotheses(&records, args.config), &hypotheses(&modes, args.config), &stlc, exec)?;
    let target = vec![1.0 / modes.len() as f64; modes.len()];
    let tv = total_variation(&hist.distribution(), &target);
    // sample counts at powers of two, then the total
    let n = hist.assignments.len();
    let mut checkpoints: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|&k| k < n).collect();
    checkpoints.push(n);
    let curve = tv_curve(&hist.assignments, &target, &checkpoints);

    create_dir(args.out_dir)?;
    let mut w = csv_writer(&args.out_dir.join("tv_curve.csv"))?;
    w.write_record(["samples", "tv"])?;
    for (k, v) in &curve {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    let summary = json!({
        "samples": n,
        "modes": modes.len(),
        "covered": hist.covered(),
        "tv": tv,
        "counts": hist.counts,
    });
    write_json(&args.out_dir.join("histogram.json"), &summary)?;
    Ok(summary)
}

pub struct BedArgs<'a> {
    pub obs: &'a Path,
    pub truth: &'a Path,
    pub labels: &'a Path,
    pub config: BedConfig,
    pub model: jpt_core::ModelParams,
    pub replicates: usize,
    pub out_dir: &'a Path,
}

pub fn bed(args: &BedArgs) -> Result<Value> {
    args.config.validate()?;
    ensure!(args.replicates > 0, jpt_core::Error::Parameter("replicates must be positive".into()));
    let obs = load_observations(args.obs)?;
    let labels = load_labels(args.labels, &obs)?;
    let truth = GroundTruth {
        labels: Some(labels),
        ..load_ground_truth(args.truth)?
    };
    let scene = Scene::new(obs, args.model.clone())?;
    create_dir(args.out_dir)?;
    let mut finals = Vec::new();
    for rep in 0..args.replicates {
        let base = args.config.sampler.seed;
        let mut config = args.config.clone();
        config.sampler.seed = derive_seed(&[base, rep as u64]);
        let oracle = ground_truth_oracle(&truth, config.reliability, derive_seed(&[base, rep as u64, 7]));
        let records = run_bed_loop(&scene, Some(&truth), &config, oracle, |_, _| {})?;
        let path = args.out_dir.join(format!("rounds-{rep}.csv"));
        write_rounds(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?), &records)?;
        let last = records.last().expect("round 0 is always recorded");
        finals.push(json!({ "replicate": rep, "rounds": last.round, "uncertainty": last.uncertainty, "distance": last.distance }));
    }
    Ok(json!({
        "planner": match args.config.planner { Planner::Mi => "mi", Planner::Random => "random" },
        "replicates": finals,
        "out_dir": args.out_dir,
    }))
}
