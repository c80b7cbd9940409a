//! Score-file ingestion: the seam where an external pair scorer plugs in.

use super::PairObservation;
use crate::error::{Error, Result};
use crate::ids::{FrameId, PersonId};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Raw record shape shared by the JSONL and CSV forms.
#[derive(Debug, Deserialize)]
struct ScoreRecord {
    frame: u32,
    a: u32,
    b: u32,
    p_i: f64,
    p_g: f64,
}

impl ScoreRecord {
    fn into_observation(self, line: usize) -> Result<PairObservation> {
        let obs = PairObservation {
            frame: FrameId(self.frame),
            a: PersonId(self.a),
            b: PersonId(self.b),
            p_i: self.p_i,
            p_g: self.p_g,
        };
        obs.check()
            .map_err(|e| Error::parse(line, e.to_string()))?;
        Ok(obs)
    }
}

/// Read pair scores from a file: JSON Lines with fields
/// `{frame, a, b, p_i, p_g}`, or CSV with that header when the path ends in
/// `.csv`. Every record is validated; errors carry the offending line
/// number, and a duplicated `(frame, a, b)` key names both lines involved.
pub fn ingest_scores(path: &Path) -> Result<Vec<PairObservation>> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let records = if is_csv { read_csv(path)? } else { read_jsonl(path)? };

    let mut seen: BTreeMap<(FrameId, PersonId, PersonId), usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, record) in records {
        let obs = record.into_observation(line)?;
        if let Some(&first) = seen.get(&(obs.frame, obs.a, obs.b)) {
            return Err(Error::parse(
                line,
                format!(
                    "duplicate pair (frame {}, {}, {}), first seen at line {first}",
                    obs.frame, obs.a, obs.b
                ),
            ));
        }
        seen.insert((obs.frame, obs.a, obs.b), line);
        out.push(obs);
    }
    Ok(out)
}

fn read_jsonl(path: &Path) -> Result<Vec<(usize, ScoreRecord)>> {
    let reader =
        BufReader::new(File::open(path).map_err(|e| crate::io::file_error(path, e))?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: ScoreRecord = serde_json::from_str(&text)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        records.push((line_no, record));
    }
    Ok(records)
}

fn read_csv(path: &Path) -> Result<Vec<(usize, ScoreRecord)>> {
    let file = File::open(path).map_err(|e| crate::io::file_error(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut records = Vec::new();
    for (idx, result) in reader.deserialize::<ScoreRecord>().enumerate() {
        // Header sits on line 1; records are single-line in this schema.
        let line = idx + 2;
        let record = result.map_err(|e| Error::parse(line, e.to_string()))?;
        records.push((line, record));
    }
    Ok(records)
}
