//! Snapshot and report files: bodies as packed little-endian records
//! next to a JSON header, and the force accuracy comparison as CSV.

use super::{Body, GravityError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const RECORD_BYTES: usize = 7 * 8 + 1 + 8; // position, mass, velocity | active | key

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    version: u32,
    count: usize,
    record_bytes: usize,
    fields: Vec<String>,
    data_file: String,
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("json"), base.with_extension("bin"))
}

/// Writes `base.bin` (packed records) and `base.json` (header).
pub fn save_bodies(base: &Path, bodies: &[Body]) -> Result<(), GravityError> {
    let (header_path, data_path) = paths(base);
    let mut buf = Vec::with_capacity(bodies.len() * RECORD_BYTES);
    for b in bodies {
        for d in 0..3 {
            buf.extend_from_slice(&b.position[d].to_le_bytes());
        }
        buf.extend_from_slice(&b.mass.to_le_bytes());
        for d in 0..3 {
            buf.extend_from_slice(&b.velocity[d].to_le_bytes());
        }
        buf.push(b.active as u8);
        buf.extend_from_slice(&b.hilbert_key.to_le_bytes());
    }
    fs::write(&data_path, &buf)?;

    let header = SnapshotHeader {
        version: 1,
        count: bodies.len(),
        record_bytes: RECORD_BYTES,
        fields: ["position", "mass", "velocity", "active", "hilbert_key"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        data_file: data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let json = serde_json::to_string_pretty(&header)
        .map_err(|e| GravityError::MalformedHeader(e.to_string()))?;
    fs::write(&header_path, json)?;
    Ok(())
}

pub fn load_bodies(base: &Path) -> Result<Vec<Body>, GravityError> {
    let (header_path, data_path) = paths(base);
    let header: SnapshotHeader = serde_json::from_slice(&fs::read(&header_path)?)
        .map_err(|e| GravityError::MalformedHeader(e.to_string()))?;
    if header.version != 1 {
        return Err(GravityError::MalformedHeader(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.record_bytes != RECORD_BYTES {
        return Err(GravityError::MalformedHeader(format!(
            "record size {} does not match this layout ({})",
            header.record_bytes, RECORD_BYTES
        )));
    }
    let data = fs::read(&data_path)?;
    if data.len() != header.count * RECORD_BYTES {
        return Err(GravityError::MalformedHeader(format!(
            "{} bytes of data for {} records of {}",
            data.len(),
            header.count,
            RECORD_BYTES
        )));
    }

    let f64_at = |chunk: &[u8], k: usize| {
        f64::from_le_bytes(chunk[8 * k..8 * k + 8].try_into().unwrap())
    };
    let mut bodies = Vec::with_capacity(header.count);
    for chunk in data.chunks_exact(RECORD_BYTES) {
        bodies.push(Body {
            position: [f64_at(chunk, 0), f64_at(chunk, 1), f64_at(chunk, 2)],
            mass: f64_at(chunk, 3),
            velocity: [f64_at(chunk, 4), f64_at(chunk, 5), f64_at(chunk, 6)],
            active: chunk[56] != 0,
            hilbert_key: u64::from_le_bytes(chunk[57..65].try_into().unwrap()),
        });
    }
    Ok(bodies)
}

/// Per-body accuracy table comparing a tree walk against the direct
/// oracle. Columns: body id, |a| from each route, relative error.
pub fn write_force_comparison_csv(
    path: &Path,
    walk: &[[f64; 3]],
    direct: &[[f64; 3]],
) -> Result<(), GravityError> {
    assert_eq!(walk.len(), direct.len());
    let norm = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let mut out = fs::File::create(path)?;
    writeln!(out, "body,accel_tree,accel_direct,rel_error")?;
    for (i, (w, o)) in walk.iter().zip(direct).enumerate() {
        let diff = [w[0] - o[0], w[1] - o[1], w[2] - o[2]];
        let rel = norm(&diff) / norm(o).max(f64::MIN_POSITIVE);
        writeln!(out, "{i},{:.12e},{:.12e},{:.6e}", norm(w), norm(o), rel)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_cloud;
    use super::*;

    fn tmp_base(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("examini-gravity-{}-{}", std::process::id(), name));
        p
    }

    #[test]
    fn snapshots_round_trip_bitwise() {
        let mut bodies = random_cloud(257, 19);
        bodies[13].active = false;
        bodies[200].hilbert_key = 0xDEAD_BEEF_CAFE;
        let base = tmp_base("roundtrip");
        save_bodies(&base, &bodies).unwrap();
        let back = load_bodies(&base).unwrap();
        assert_eq!(bodies, back);
        let _ = fs::remove_file(base.with_extension("json"));
        let _ = fs::remove_file(base.with_extension("bin"));
    }

    #[test]
    fn truncated_data_is_rejected() {
        let bodies = random_cloud(20, 4);
        let base = tmp_base("truncated");
        save_bodies(&base, &bodies).unwrap();
        let data_path = base.with_extension("bin");
        let mut data = fs::read(&data_path).unwrap();
        data.truncate(data.len() - 5);
        fs::write(&data_path, &data).unwrap();
        assert!(matches!(
            load_bodies(&base),
            Err(GravityError::MalformedHeader(_))
        ));
        let _ = fs::remove_file(base.with_extension("json"));
        let _ = fs::remove_file(data_path);
    }

    #[test]
    fn comparison_csv_has_one_row_per_body() {
        let walk = vec![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let direct = vec![[1.0, 0.0, 1e-6], [0.0, 2.0, 0.0]];
        let path = tmp_base("forces").with_extension("csv");
        write_force_comparison_csv(&path, &walk, &direct).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "body,accel_tree,accel_direct,rel_error");
        assert!(lines[2].starts_with("1,"));
        let rel: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(rel, 0.0);
        let _ = fs::remove_file(path);
    }
}
