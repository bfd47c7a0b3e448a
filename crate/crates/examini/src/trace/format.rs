//! JSON-lines trace files: one header line, then one event per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{clip_to_roi, TraceError, TraceEvent, TraceTimeline};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema: u32,
    ranks: usize,
    threads_per_rank: usize,
    roi_start: i64,
    roi_end: i64,
}

pub fn save_trace(path: &Path, trace: &TraceTimeline) -> Result<(), TraceError> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        schema: SCHEMA_VERSION,
        ranks: trace.ranks(),
        threads_per_rank: trace.threads_per_rank(),
        roi_start: trace.roi().0,
        roi_end: trace.roi().1,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for ev in trace.iter_events() {
        writeln!(w, "{}", serde_json::to_string(ev).expect("event serializes"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<TraceTimeline, TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header: Header = match lines.next() {
        None => return Err(TraceError::EmptyTrace),
        Some((_, line)) => {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| TraceError::MalformedEvent {
                line: 1,
                msg: format!("bad header: {e}"),
            })?
        }
    };
    if header.schema != SCHEMA_VERSION {
        return Err(TraceError::MalformedEvent {
            line: 1,
            msg: format!("unsupported schema version {}", header.schema),
        });
    }
    if header.ranks == 0 {
        return Err(TraceError::EmptyTrace);
    }

    let roi = (header.roi_start, header.roi_end);
    let mut tl = TraceTimeline::new(header.ranks, header.threads_per_rank, roi);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(&line).map_err(|e| TraceError::MalformedEvent {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if let Some(ev) = clip_to_roi(ev, roi) {
            tl.push(ev).map_err(|e| match e {
                TraceError::MalformedEvent { msg, .. } => {
                    TraceError::MalformedEvent { line: idx + 1, msg }
                }
                other => other,
            })?;
        }
    }
    Ok(tl)
}

#[cfg(test)]
mod tests {
    use super::super::State;
    use super::*;

    fn sample() -> TraceTimeline {
        let mut tl = TraceTimeline::new(2, 1, (0, 10));
        tl.push(TraceEvent {
            rank: 0,
            thread: 0,
            state: State::Useful,
            t_start: 0,
            t_end: 8,
            peer: None,
            bytes: None,
            region: Some("step".into()),
            instructions: Some(123),
        })
        .unwrap();
        tl.push(TraceEvent {
            rank: 1,
            thread: 0,
            state: State::Send,
            t_start: 2,
            t_end: 3,
            peer: Some(0),
            bytes: Some(64),
            region: None,
            instructions: None,
        })
        .unwrap();
        tl
    }

    #[test]
    fn round_trips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let tl = sample();
        save_trace(&path, &tl).unwrap();
        let back = load_trace(&path).unwrap();
        assert_eq!(back, tl);
    }

    #[test]
    fn empty_file_is_empty_trace() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_trace(&path), Err(TraceError::EmptyTrace)));
    }

    #[test]
    fn malformed_event_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"schema\":1,\"ranks\":1,\"threads_per_rank\":1,\"roi_start\":0,\"roi_end\":9}\nnot json\n",
        )
        .unwrap();
        match load_trace(&path) {
            Err(TraceError::MalformedEvent { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed event, got {other:?}"),
        }
    }

    #[test]
    fn overlapping_events_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("overlap.jsonl");
        let header = "{\"schema\":1,\"ranks\":1,\"threads_per_rank\":1,\"roi_start\":0,\"roi_end\":9}";
        let a = "{\"rank\":0,\"thread\":0,\"state\":\"USEFUL\",\"t_start\":0,\"t_end\":5}";
        let b = "{\"rank\":0,\"thread\":0,\"state\":\"SEND\",\"t_start\":3,\"t_end\":6,\"peer\":0}";
        std::fs::write(&path, format!("{header}\n{a}\n{b}\n")).unwrap();
        assert!(matches!(load_trace(&path), Err(TraceError::OverlapViolation { .. })));
    }
}
