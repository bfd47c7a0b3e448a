//! CI-style baseline comparison: a directory of JSON records, one per
//! (app, mode, group, ranks, resolution, machine fingerprint) key.

use super::{App, BenchError, CampaignResult, Mode};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub app: App,
    pub mode: Mode,
    pub group: usize,
    pub rank_count: usize,
    pub resolution: u64,
    pub fingerprint: String,
    pub walltime_s: f64,
}

impl BaselineRecord {
    fn file_name(&self) -> String {
        format!(
            "{}-{}-g{}-r{}-n{}-{}.json",
            self.app, self.mode, self.group, self.rank_count, self.resolution, self.fingerprint
        )
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RegressionStatus {
    /// Within tolerance of the stored baseline.
    Pass { baseline_s: f64, delta_pct: f64 },
    /// Slower than baseline by more than the tolerance.
    Fail { baseline_s: f64, delta_pct: f64 },
    /// No baseline for this key; a candidate file was written next to
    /// the store so the next update run can promote it.
    Missing { candidate_s: f64 },
    /// Baseline (re)written because updates were requested.
    Updated { walltime_s: f64 },
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RegressionEntry {
    pub app: App,
    pub mode: Mode,
    pub group: usize,
    pub rank_count: usize,
    pub resolution: u64,
    pub status: RegressionStatus,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RegressionReport {
    pub tolerance_pct: f64,
    pub entries: Vec<RegressionEntry>,
    /// False only when at least one entry regressed; missing baselines
    /// are informative, not failures.
    pub passed: bool,
}

/// Compares each configuration's median walltime against the stored
/// baseline for the same key. `update` rewrites the store from this
/// result instead of judging it.
pub fn regression_check(
    result: &CampaignResult,
    baseline_dir: &Path,
    tolerance_pct: f64,
    update: bool,
) -> Result<RegressionReport, BenchError> {
    assert!(tolerance_pct >= 0.0);
    fs::create_dir_all(baseline_dir)?;
    let fingerprint = result.machine.fingerprint();
    let mut entries = Vec::with_capacity(result.records.len());

    for rec in &result.records {
        let key = BaselineRecord {
            app: rec.app,
            mode: rec.mode,
            group: rec.group,
            rank_count: rec.rank_count,
            resolution: rec.resolution,
            fingerprint: fingerprint.clone(),
            walltime_s: rec.walltime_s,
        };
        let path = baseline_dir.join(key.file_name());

        let status = if update {
            fs::write(&path, serde_json::to_string_pretty(&key)?)?;
            RegressionStatus::Updated { walltime_s: rec.walltime_s }
        } else {
            match read_baseline(&path)? {
                Some(base) => {
                    let delta_pct = (rec.walltime_s - base.walltime_s) / base.walltime_s * 100.0;
                    if delta_pct > tolerance_pct {
                        RegressionStatus::Fail { baseline_s: base.walltime_s, delta_pct }
                    } else {
                        RegressionStatus::Pass { baseline_s: base.walltime_s, delta_pct }
                    }
                }
                None => {
                    let candidate = candidate_path(&path);
                    fs::write(&candidate, serde_json::to_string_pretty(&key)?)?;
                    RegressionStatus::Missing { candidate_s: rec.walltime_s }
                }
            }
        };
        entries.push(RegressionEntry {
            app: rec.app,
            mode: rec.mode,
            group: rec.group,
            rank_count: rec.rank_count,
            resolution: rec.resolution,
            status,
        });
    }

    let passed = !entries.iter().any(|e| matches!(e.status, RegressionStatus::Fail { .. }));
    Ok(RegressionReport { tolerance_pct, entries, passed })
}

fn candidate_path(path: &Path) -> PathBuf {
    path.with_extension("candidate.json")
}

fn read_baseline(path: &Path) -> Result<Option<BaselineRecord>, BenchError> {
    match fs::read(path) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{CampaignSpec, MachineProfile, TimingRecord};
    use super::*;

    fn fixture_result(walltimes: &[f64]) -> CampaignResult {
        let spec = CampaignSpec {
            app: App::Synthetic,
            mode: Mode::Strong,
            rank_counts: (1..=walltimes.len()).map(|i| 1 << (i - 1)).collect(),
            size: 100,
            repetitions: 3,
            seed: 1,
            baseline_ref: None,
        };
        let machine = MachineProfile {
            cpu_model: "fixture-cpu".into(),
            workers: 4,
            artifact_version: "0.0-test".into(),
        };
        let records: Vec<TimingRecord> = walltimes
            .iter()
            .enumerate()
            .map(|(i, &w)| TimingRecord {
                app: spec.app,
                mode: spec.mode,
                group: 0,
                rank_count: 1 << i,
                resolution: 100,
                walltime_s: w,
                repetition_s: vec![w; 3],
                breakdown: Vec::new(),
                trace_path: None,
            })
            .collect();
        CampaignResult::assemble(spec, machine, records).unwrap()
    }

    fn temp_store(name: &str) -> PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("examini-baselines-{}-{}", std::process::id(), name));
        let _ = fs::remove_dir_all(&p);
        p
    }

    #[test]
    fn identical_result_passes_and_doubling_fails() {
        let dir = temp_store("roundtrip");
        let result = fixture_result(&[10.0, 6.0]);
        let seeded = regression_check(&result, &dir, 10.0, true).unwrap();
        assert!(seeded.passed);
        assert!(seeded.entries.iter().all(|e| matches!(e.status, RegressionStatus::Updated { .. })));

        let same = regression_check(&result, &dir, 10.0, false).unwrap();
        assert!(same.passed);
        for e in &same.entries {
            match &e.status {
                RegressionStatus::Pass { delta_pct, .. } => assert!(delta_pct.abs() < 1e-12),
                other => panic!("expected pass, got {other:?}"),
            }
        }

        let slow = fixture_result(&[20.0, 12.0]);
        let report = regression_check(&slow, &dir, 10.0, false).unwrap();
        assert!(!report.passed);
        for e in &report.entries {
            match &e.status {
                RegressionStatus::Fail { delta_pct, .. } => assert!((delta_pct - 100.0).abs() < 1e-9),
                other => panic!("expected fail, got {other:?}"),
            }
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn only_the_regressed_configuration_is_flagged() {
        let dir = temp_store("mixed");
        let base = fixture_result(&[10.0, 6.0, 4.0]);
        regression_check(&base, &dir, 10.0, true).unwrap();

        let mixed = fixture_result(&[10.1, 6.05, 8.0]); // only the 4-rank config regressed
        let report = regression_check(&mixed, &dir, 10.0, false).unwrap();
        assert!(!report.passed);
        let failed: Vec<usize> = report
            .entries
            .iter()
            .filter(|e| matches!(e.status, RegressionStatus::Fail { .. }))
            .map(|e| e.rank_count)
            .collect();
        assert_eq!(failed, vec![4]);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn missing_baselines_are_informative_not_fatal() {
        let dir = temp_store("missing");
        let result = fixture_result(&[5.0]);
        let report = regression_check(&result, &dir, 10.0, false).unwrap();
        assert!(report.passed);
        match &report.entries[0].status {
            RegressionStatus::Missing { candidate_s } => assert_eq!(*candidate_s, 5.0),
            other => panic!("expected missing, got {other:?}"),
        }
        // a candidate record was left behind for later promotion
        let candidates: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("candidate"))
            .collect();
        assert_eq!(candidates.len(), 1);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn baselines_are_scoped_to_the_machine_fingerprint() {
        let dir = temp_store("fingerprint");
        let result = fixture_result(&[5.0]);
        regression_check(&result, &dir, 10.0, true).unwrap();

        let mut other = result.clone();
        other.machine.workers += 1;
        let report = regression_check(&other, &dir, 10.0, false).unwrap();
        assert!(matches!(report.entries[0].status, RegressionStatus::Missing { .. }));
        let _ = fs::remove_dir_all(&dir);
    }
}
