use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use codim_mpm::geometry::{load_mesh_with, load_sequence, write_vertices, DegeneratePolicy};
use codim_mpm::inverse::fit_parameters;
use codim_mpm::metrics::{chamfer_distance, f_score, penetration_depth, sample_surface};
use codim_mpm::mpm::rest_frames;
use codim_mpm::{MeshSequence, Real, Simulation, TriMesh};
use serde::Serialize;
use serde_json::json;

use crate::config::{ParamsSection, RunConfig};
use crate::error::CliError;

fn load_cloth(cfg: &RunConfig) -> Result<TriMesh, CliError> {
    let path = cfg.require("cloth", &cfg.inputs.cloth)?;
    load_mesh_with(path, cfg.degenerate_faces).map_err(|e| CliError::runtime_at(e, path))
}

/// A single OBJ file is a static mesh; anything else is a frame sequence.
fn load_frames(path: &Path, frame_dt: Real) -> Result<MeshSequence, CliError> {
    let single = path.is_file()
        && path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    let seq = if single {
        load_mesh_with(path, DegeneratePolicy::Warn)
            .and_then(|m| MeshSequence::constant(&m, 1, frame_dt))
    } else {
        load_sequence(path, frame_dt)
    };
    seq.map_err(|e| CliError::runtime_at(e, path))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config {
        message: format!("cannot create output directory: {e}"),
        path: Some(dir.to_path_buf()),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    fs::write(path, text + "\n").map_err(|e| CliError::runtime_at(e, path))
}

#[derive(Serialize)]
struct FrameRecord {
    index: usize,
    file: String,
    wall_seconds: Real,
    substeps: usize,
}

pub fn simulate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let cloth = load_cloth(cfg)?;
    let collider = match &cfg.inputs.collider {
        Some(p) => Some(load_frames(p, cfg.sim.frame_dt)?),
        None => None,
    };
    let params = cfg.phys_params();
    let rest = rest_frames(&cloth, params.alpha, &cfg.sim.gravity).map_err(CliError::runtime)?;
    let mut sim = Simulation::new(&cloth, &rest, collider.as_ref(), &params, &cfg.sim)
        .map_err(CliError::runtime)?;
    sim.check_collider_covers(cfg.frames).map_err(CliError::runtime)?;

    let out = &cfg.output.dir;
    let frames_dir = out.join("frames");
    create_dir(&frames_dir)?;
    let ext = cfg.output.format.extension();
    let write = |i: usize, verts: &[codim_mpm::Vec3]| -> Result<String, CliError> {
        let name = format!("frame_{i:05}.{ext}");
        let path = frames_dir.join(&name);
        write_vertices(&path, verts, &cloth.faces, cfg.output.format).map_err(CliError::runtime)?;
        Ok(format!("frames/{name}"))
    };

    let mut records = vec![FrameRecord {
        index: 0,
        file: write(0, &cloth.vertices)?,
        wall_seconds: 0.0,
        substeps: 0,
    }];
    let started = Instant::now();
    for i in 1..=cfg.frames {
        let t0 = Instant::now();
        sim.step_frame()
            .map_err(|e| CliError::runtime(format!("frame {i}: {e}")))?;
        let wall_seconds = t0.elapsed().as_secs_f64();
        log::info!("frame {i}/{} in {wall_seconds:.3}s", cfg.frames);
        records.push(FrameRecord {
            index: i,
            file: write(i, sim.vertex_positions())?,
            wall_seconds,
            substeps: cfg.sim.substeps,
        });
    }
    let spec = sim.grid_spec();
    let manifest = json!({
        "command": "simulate",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "grid": {
            "origin": spec.origin,
            "cell_size": spec.cell_size,
            "resolution": spec.resolution,
        },
        "particles": sim.state.particle_count(),
        "frames": records,
        "total_substeps": sim.stats.substeps,
        "wall_seconds": started.elapsed().as_secs_f64(),
        "stats": sim.stats,
    });
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn fit(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.optim.validate().map_err(|e| CliError::Config {
        message: e.to_string(),
        path: None,
    })?;
    let cloth = load_cloth(cfg)?;
    let target_path = cfg.require("target", &cfg.inputs.target)?;
    let target = load_frames(target_path, cfg.sim.frame_dt)?;
    let collider = match &cfg.inputs.collider {
        Some(p) => Some(load_frames(p, cfg.sim.frame_dt)?),
        None => None,
    };
    create_dir(&cfg.output.dir)?;
    let result = fit_parameters(&cloth, collider.as_ref(), &target, &cfg.optim, &cfg.sim)
        .map_err(CliError::runtime)?;
    let report = json!({
        "command": "fit",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "params": ParamsSection::from(result.params),
        "best_loss": result.best_loss,
        "initial_loss": result.loss_history.first(),
        "loss_history": result.loss_history,
        "trajectory": result.trajectory,
        "iterations": cfg.optim.iterations,
        "rollouts": result.rollouts,
        "wall_seconds": result.wall_seconds,
        "config": cfg,
    });
    let path = cfg.output.dir.join("fit.json");
    write_json(&path, &report)?;
    Ok(path)
}

#[derive(Serialize)]
struct EvalRecord {
    frame: usize,
    chamfer: Real,
    f_score: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    penetration_depth: Option<Real>,
    seconds: Real,
}

pub fn eval(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dt = cfg.sim.frame_dt;
    let sim_path = cfg.require("simulated", &cfg.inputs.simulated)?;
    let ref_path = cfg.require("target", &cfg.inputs.target)?;
    let simulated = load_frames(sim_path, dt)?;
    let reference = load_frames(ref_path, dt)?;
    if simulated.len() != reference.len() {
        return Err(CliError::runtime(format!(
            "simulated sequence has {} frames, reference has {}",
            simulated.len(),
            reference.len()
        )));
    }
    let body = match &cfg.inputs.body {
        Some(p) => {
            let b = load_frames(p, dt)?;
            if b.len() != 1 && b.len() != simulated.len() {
                return Err(CliError::runtime_at(
                    format!("body has {} frames, expected 1 or {}", b.len(), simulated.len()),
                    p,
                ));
            }
            Some(b)
        }
        None => None,
    };
    create_dir(&cfg.output.dir)?;

    let mesh = |seq: &MeshSequence, i: usize| seq.mesh(i).expect("frame index checked");
    let mut lines = Vec::with_capacity(simulated.len() + 1);
    let mut records = Vec::with_capacity(simulated.len());
    for i in 0..simulated.len() {
        let t0 = Instant::now();
        // one seed per frame for both sides, so identical meshes sample identically
        let seed = cfg.seed.wrapping_add(i as u64);
        let a = sample_surface(&mesh(&simulated, i), cfg.metrics.samples, seed)
            .map_err(|e| CliError::runtime(format!("simulated frame {i}: {e}")))?;
        let b = sample_surface(&mesh(&reference, i), cfg.metrics.samples, seed)
            .map_err(|e| CliError::runtime(format!("reference frame {i}: {e}")))?;
        let chamfer = chamfer_distance(&a, &b);
        let f = f_score(&a, &b, cfg.metrics.tau).map_err(CliError::runtime)?;
        let penetration = match &body {
            Some(seq) => Some(
                penetration_depth(&mesh(&simulated, i), &mesh(seq, i.min(seq.len() - 1)))
                    .map_err(CliError::runtime)?,
            ),
            None => None,
        };
        let rec = EvalRecord {
            frame: i,
            chamfer,
            f_score: f,
            penetration_depth: penetration,
            seconds: t0.elapsed().as_secs_f64(),
        };
        lines.push(serde_json::to_string(&rec).map_err(CliError::runtime)?);
        records.push(rec);
    }
    let n = records.len() as Real;
    let mean = |f: &dyn Fn(&EvalRecord) -> Real| records.iter().map(f).sum::<Real>() / n;
    let aggregate = json!({
        "aggregate": {
            "frames": records.len(),
            "chamfer": mean(&|r| r.chamfer),
            "f_score": mean(&|r| r.f_score),
            "penetration_depth": body.as_ref().map(|_| mean(&|r| r.penetration_depth.unwrap_or(0.0))),
            "tau": cfg.metrics.tau,
            "samples": cfg.metrics.samples,
            "seed": cfg.seed,
        }
    });
    lines.push(aggregate.to_string());
    let path = cfg.output.dir.join("eval.jsonl");
    fs::write(&path, lines.join("\n") + "\n").map_err(|e| CliError::runtime_at(e, &path))?;
    Ok(path)
}
