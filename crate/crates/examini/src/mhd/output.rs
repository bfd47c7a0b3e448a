//! Field dumps (binary + JSON header) and conserved-series CSV.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ConservedSample, MhdConfig, MhdRankResult};

pub const COMPONENT_NAMES: [&str; 9] =
    ["rho", "mx", "my", "mz", "energy", "bx", "by", "bz", "psi"];

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FieldHeader {
    pub version: u32,
    /// Global cells per axis, z-major component arrays in the data file.
    pub shape: [usize; 3],
    pub extent: [[f64; 2]; 3],
    pub time: f64,
    pub components: Vec<String>,
    pub data_file: String,
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("json"), base.with_extension("bin"))
}

/// Stitches per-rank interiors back into global z-major component grids.
pub fn assemble_global(cfg: &MhdConfig, results: &[MhdRankResult]) -> Vec<Vec<f64>> {
    let n = cfg.cells;
    let ncomp = results[0].interior.len();
    let mut global = vec![vec![0.0; n[0] * n[1] * n[2]]; ncomp];
    for r in results {
        let bc = r.block_cells;
        let origin = [r.coords[0] * bc[0], r.coords[1] * bc[1], r.coords[2] * bc[2]];
        for c in 0..ncomp {
            for k in 0..bc[2] {
                for j in 0..bc[1] {
                    for i in 0..bc[0] {
                        let src = (k * bc[1] + j) * bc[0] + i;
                        let dst =
                            ((origin[2] + k) * n[1] + (origin[1] + j)) * n[0] + origin[0] + i;
                        global[c][dst] = r.interior[c][src];
                    }
                }
            }
        }
    }
    global
}

/// Writes `<base>.bin` (components concatenated, f64 LE) plus `<base>.json`.
pub fn save_fields(
    cfg: &MhdConfig,
    results: &[MhdRankResult],
    base: &Path,
) -> io::Result<(PathBuf, PathBuf)> {
    let global = assemble_global(cfg, results);
    let (header_path, data_path) = paths(base);

    let mut buf = Vec::with_capacity(global.len() * global[0].len() * 8);
    for comp in &global {
        for v in comp {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&data_path, &buf)?;

    let header = FieldHeader {
        version: 1,
        shape: cfg.cells,
        extent: cfg.extent,
        time: results[0].t_final,
        components: COMPONENT_NAMES[..global.len()].iter().map(|s| s.to_string()).collect(),
        data_file: data_path.file_name().unwrap().to_string_lossy().into_owned(),
    };
    fs::write(&header_path, serde_json::to_string_pretty(&header)?)?;
    Ok((header_path, data_path))
}

pub fn load_fields(base: &Path) -> io::Result<(FieldHeader, Vec<Vec<f64>>)> {
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
    let (header_path, _) = paths(base);
    let header: FieldHeader = serde_json::from_slice(&fs::read(&header_path)?)
        .map_err(|e| bad(format!("field header: {e}")))?;
    if header.version != 1 {
        return Err(bad(format!("unsupported field dump version {}", header.version)));
    }
    let data_path = header_path.with_file_name(&header.data_file);
    let raw = fs::read(&data_path)?;
    let cells = header.shape.iter().product::<usize>();
    let want = header.components.len() * cells * 8;
    if raw.len() != want {
        return Err(bad(format!("data file holds {} bytes, expected {want}", raw.len())));
    }
    let mut comps = Vec::with_capacity(header.components.len());
    for c in 0..header.components.len() {
        let mut v = Vec::with_capacity(cells);
        for i in 0..cells {
            let at = (c * cells + i) * 8;
            v.push(f64::from_le_bytes(raw[at..at + 8].try_into().unwrap()));
        }
        comps.push(v);
    }
    Ok((header, comps))
}

pub fn write_series_csv(path: &Path, series: &[ConservedSample]) -> io::Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "step,t,mass,mx,my,mz,energy,divb_max_normalized,psi_l2")?;
    for s in series {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.step,
            s.t,
            s.mass,
            s.momentum[0],
            s.momentum[1],
            s.momentum[2],
            s.energy,
            s.divb_max_normalized,
            s.psi_l2
        )?;
    }
    Ok(())
}
