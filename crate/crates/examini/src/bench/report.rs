//! Plot-ready campaign reports and per-cycle kernel timing tables.

use super::{BenchError, CampaignResult, Mode};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes `<stem>.csv` and `<stem>.json` under `dir`. The CSV carries an
/// ideal-speedup column for dashed-line references; grouped strong
/// results are split into sections tagged with the group id and its base
/// resolution. The JSON is the full result and round-trips losslessly.
pub fn emit_report(
    result: &CampaignResult,
    dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf), BenchError> {
    assert!(!result.records.is_empty(), "nothing to report");
    fs::create_dir_all(dir)?;

    let csv_path = dir.join(format!("{stem}.csv"));
    let mut csv = fs::File::create(&csv_path)?;
    writeln!(csv, "group,app,mode,ranks,resolution,walltime_s,speedup,efficiency,ideal")?;
    let grouped = result.spec.mode == Mode::GroupedStrong;
    let mut current_group = usize::MAX;
    for p in &result.points {
        if grouped && p.group != current_group {
            current_group = p.group;
            let base_ranks = result
                .points
                .iter()
                .filter(|q| q.group == p.group)
                .map(|q| q.rank_count)
                .min()
                .unwrap();
            writeln!(csv, "# group {} base_ranks {} base_resolution {}", p.group, base_ranks, p.resolution)?;
        }
        writeln!(
            csv,
            "{},{},{},{},{},{:.9e},{:.6},{:.6},{:.6}",
            p.group,
            result.spec.app,
            result.spec.mode,
            p.rank_count,
            p.resolution,
            p.walltime_s,
            p.speedup,
            p.efficiency,
            p.ideal_speedup
        )?;
    }

    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(result)?)?;
    Ok((csv_path, json_path))
}

/// One timed kernel invocation, the row format shared with the PIC
/// driver's per-cycle log.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct KernelSample {
    pub cycle: usize,
    pub kernel: String,
    pub rank: usize,
    pub seconds: f64,
}

impl From<&crate::pic::KernelRow> for KernelSample {
    fn from(row: &crate::pic::KernelRow) -> Self {
        KernelSample {
            cycle: row.cycle,
            kernel: row.kernel.to_string(),
            rank: row.rank,
            seconds: row.seconds,
        }
    }
}

pub fn write_kernel_csv(path: &Path, rows: &[KernelSample]) -> Result<(), BenchError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "cycle,kernel,rank,seconds")?;
    for r in rows {
        writeln!(out, "{},{},{},{:.9e}", r.cycle, r.kernel, r.rank, r.seconds)?;
    }
    Ok(())
}

pub fn read_kernel_csv(path: &Path) -> Result<Vec<KernelSample>, BenchError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "cycle,kernel,rank,seconds" => {}
        other => {
            return Err(BenchError::MalformedCsv {
                line: 1,
                message: format!("expected the kernel header, got {:?}", other.map(|(_, l)| l)),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(BenchError::MalformedCsv {
                line: idx + 1,
                message: format!("{} fields, expected 4", parts.len()),
            });
        }
        let parse = |what: &str, s: &str| -> Result<f64, BenchError> {
            s.trim().parse::<f64>().map_err(|e| BenchError::MalformedCsv {
                line: idx + 1,
                message: format!("{what}: {e}"),
            })
        };
        rows.push(KernelSample {
            cycle: parse("cycle", parts[0])? as usize,
            kernel: parts[1].trim().to_string(),
            rank: parse("rank", parts[2])? as usize,
            seconds: parse("seconds", parts[3])?,
        });
    }
    Ok(rows)
}

/// Total seconds per kernel, in first-appearance order.
pub fn kernel_totals(rows: &[KernelSample]) -> Vec<(String, f64)> {
    let mut totals: Vec<(String, f64)> = Vec::new();
    for r in rows {
        match totals.iter_mut().find(|(n, _)| *n == r.kernel) {
            Some((_, acc)) => *acc += r.seconds,
            None => totals.push((r.kernel.clone(), r.seconds)),
        }
    }
    totals
}

#[derive(Clone, PartialEq, Debug, Serialize)]
pub struct KernelComparisonRow {
    pub kernel: String,
    pub t_ref: f64,
    pub t_new: f64,
    pub speedup: f64,
}

/// Per-kernel speedup table between two recorded runs, with a Total row
/// appended — the layout of published CPU/GPU module comparisons.
pub fn kernel_speedup_table(
    reference: &[KernelSample],
    new: &[KernelSample],
) -> Result<Vec<KernelComparisonRow>, BenchError> {
    let ref_totals = kernel_totals(reference);
    let new_totals = kernel_totals(new);
    let mut rows = Vec::new();
    let mut sum_ref = 0.0;
    let mut sum_new = 0.0;
    for (name, t_ref) in &ref_totals {
        let t_new = new_totals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| BenchError::InvalidSpec(vec![format!("kernel {name} missing from the new run")]))?;
        rows.push(KernelComparisonRow {
            kernel: name.clone(),
            t_ref: *t_ref,
            t_new,
            speedup: super::compute_speedup(*t_ref, t_new)?,
        });
        sum_ref += t_ref;
        sum_new += t_new;
    }
    rows.push(KernelComparisonRow {
        kernel: "Total".to_string(),
        t_ref: sum_ref,
        t_new: sum_new,
        speedup: super::compute_speedup(sum_ref, sum_new)?,
    });
    Ok(rows)
}
