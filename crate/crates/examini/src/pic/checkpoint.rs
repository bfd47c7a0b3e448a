//! Particle/field checkpoints: one binary blob plus a JSON header.
//!
//! Layout: the six node lattices (e then b, full aliased (nx+1)·(ny+1)
//! grids) as f64 LE, followed by each species' seven particle arrays in
//! x, y, vx, vy, vz, qm, weight order. Counts live in the header.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::{FieldGrid, NodeField};
use super::particles::ParticleSet;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SpeciesMeta {
    pub count: usize,
    pub charge: f64,
    pub mass: f64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub cells: [usize; 2],
    pub extent: [f64; 2],
    pub species: Vec<SpeciesMeta>,
    pub data_file: String,
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("json"), base.with_extension("bin"))
}

fn push_f64s(buf: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_checkpoint(
    base: &Path,
    fields: &FieldGrid,
    particles: &[ParticleSet],
) -> io::Result<(PathBuf, PathBuf)> {
    let (header_path, data_path) = paths(base);
    let mut buf = Vec::new();
    for comp in fields.e.iter().chain(fields.b.iter()) {
        push_f64s(&mut buf, comp.raw());
    }
    for set in particles {
        for arr in [&set.x, &set.y, &set.vx, &set.vy, &set.vz, &set.qm, &set.weight] {
            push_f64s(&mut buf, arr);
        }
    }
    fs::write(&data_path, &buf)?;

    let header = CheckpointHeader {
        version: 1,
        cells: fields.cells,
        extent: fields.extent,
        species: particles
            .iter()
            .map(|s| SpeciesMeta { count: s.x.len(), charge: s.charge, mass: s.mass })
            .collect(),
        data_file: data_path.file_name().unwrap().to_string_lossy().into_owned(),
    };
    fs::write(&header_path, serde_json::to_string_pretty(&header)?)?;
    Ok((header_path, data_path))
}

pub fn load_checkpoint(
    base: &Path,
) -> io::Result<(CheckpointHeader, FieldGrid, Vec<ParticleSet>)> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let (header_path, _) = paths(base);
    let header: CheckpointHeader = serde_json::from_slice(&fs::read(&header_path)?)
        .map_err(|e| bad(format!("checkpoint header: {e}")))?;
    if header.version != 1 {
        return Err(bad(format!("unsupported checkpoint version {}", header.version)));
    }
    let raw = fs::read(header_path.with_file_name(&header.data_file))?;
    let nodes = (header.cells[0] + 1) * (header.cells[1] + 1);
    let want = (6 * nodes + header.species.iter().map(|s| 7 * s.count).sum::<usize>()) * 8;
    if raw.len() != want {
        return Err(bad(format!("data file holds {} bytes, expected {want}", raw.len())));
    }

    let mut at = 0usize;
    let mut take = |n: usize| {
        let v: Vec<f64> = raw[at..at + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        at += 8 * n;
        v
    };
    let mut node = || NodeField::from_raw(header.cells, take(nodes));
    let e = [node(), node(), node()];
    let b = [node(), node(), node()];
    let grid = FieldGrid { cells: header.cells, extent: header.extent, e, b };

    let mut particles = Vec::with_capacity(header.species.len());
    for meta in &header.species {
        let n = meta.count;
        particles.push(ParticleSet {
            x: take(n),
            y: take(n),
            vx: take(n),
            vy: take(n),
            vz: take(n),
            qm: take(n),
            weight: take(n),
            charge: meta.charge,
            mass: meta.mass,
        });
    }
    Ok((header, grid, particles))
}

#[cfg(test)]
mod tests {
    use super::super::tests::maxwellian_config;
    use super::super::run_pic;
    use super::*;

    fn small_run() -> (FieldGrid, Vec<ParticleSet>) {
        let cfg = maxwellian_config([8, 8], 4, 0.05);
        let out = run_pic(&cfg, 1, 2).unwrap();
        let r = out.results.into_iter().next().unwrap();
        (r.fields, r.particles)
    }

    #[test]
    fn checkpoint_round_trips_bitwise() {
        let (fields, particles) = small_run();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("checkpoint");
        save_checkpoint(&base, &fields, &particles).unwrap();
        let (header, grid, parts) = load_checkpoint(&base).unwrap();
        assert_eq!(header.species.len(), 2);
        assert_eq!(grid, fields);
        assert_eq!(parts, particles);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let (fields, particles) = small_run();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("checkpoint");
        let (_, data_path) = save_checkpoint(&base, &fields, &particles).unwrap();
        let raw = fs::read(&data_path).unwrap();
        fs::write(&data_path, &raw[..raw.len() - 1]).unwrap();
        let err = load_checkpoint(&base).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::InvalidData);
    }
}
