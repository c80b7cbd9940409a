//! Interchange files: JSON Lines and CSV forms of every pipeline artifact.
//!
//! All formats are line-oriented so partial files are inspectable and
//! parse errors carry a line number. Floats go through `serde_json`'s
//! shortest-round-trip encoding, so reading a file back reproduces the
//! exact written values.
//!
//! Formats:
//! - scenario: header line `{"seed":N}`, then per-frame records
//!   `{"frame":F,"states":[...],"groups":[[ids],...]}`
//! - temporal links: one `{"frame":F,"a":A,"b":B,"p_t":P}` per line
//! - pair scores: one `{"frame":F,"a":A,"b":B,"p_i":PI,"p_g":PG}` per
//!   line, or CSV with the same columns (see [`crate::groupness`] for the
//!   reader)
//! - head weights: one JSON document `{"W":[[...],[...]],"b":[...]}`
//! - graph: node records `{"frame":F,"person":P}` followed by edge records
//!   `{"kind":"spatial|temporal","u":node,"v":node,"w":W}`
//! - partition: `{"frame":F,"person":P,"community":C}` per line, or CSV
//! - dynamic groups: `{"frame":F,"groups":[[ids],...]}` per line
//! - static groups: a single `{"groups":[[ids],...]}` line
//! - evaluation report: a JSON document, plus CSV rows for comparison
//!   tables and a per-frame CSV for plotting

use crate::clustering::Partition;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::graph::{EdgeKind, GraphEdge, NodeId, StaticGroupnessGraph, TemporalGroupnessGraph};
use crate::groupness::{HeadWeights, PairObservation};
use crate::groups::{DynamicGroups, StaticGroups};
use crate::ids::{FrameId, PersonId};
use crate::sim::{PersonState, Scenario, TemporalLink, TemporalLinkSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub use crate::groupness::ingest_scores as read_scores;

/// Wrap an io error with the path it concerns.
pub(crate) fn file_error(path: &Path, err: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| file_error(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| file_error(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = create(path)?;
    for record in records {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parse every non-blank line; each record keeps its 1-based line number so
/// callers can point validation errors at the offending line.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut records = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T =
            serde_json::from_str(&line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

// ---------------------------------------------------------------- scenario

#[derive(Serialize, Deserialize)]
struct ScenarioHeader {
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    frame: FrameId,
    states: Vec<PersonState>,
    groups: Vec<BTreeSet<PersonId>>,
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer(&mut out, &ScenarioHeader { seed: scenario.seed })?;
    out.write_all(b"\n")?;
    for (frame, states) in &scenario.states {
        let record = FrameRecord {
            frame: *frame,
            states: states.values().copied().collect(),
            groups: scenario.gt_partitions.get(frame).cloned().unwrap_or_default(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let mut lines = open(path)?.lines().enumerate();
    let header: ScenarioHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?)
            .map_err(|e| Error::parse(1, format!("expected scenario header: {e}")))?,
        None => return Err(Error::parse(1, "empty scenario file")),
    };
    let mut states = BTreeMap::new();
    let mut gt_partitions = BTreeMap::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        let by_person: BTreeMap<PersonId, PersonState> =
            record.states.into_iter().map(|s| (s.person_id, s)).collect();
        if states.insert(record.frame, by_person).is_some() {
            return Err(Error::parse(idx + 1, format!("frame {} appears twice", record.frame)));
        }
        gt_partitions.insert(record.frame, record.groups);
    }
    let scenario = Scenario { states, gt_partitions, seed: header.seed };
    scenario.check_consistency()?;
    Ok(scenario)
}

// ------------------------------------------------------------------- links

pub fn write_links(path: &Path, links: &TemporalLinkSet) -> Result<()> {
    write_jsonl(path, &links.links)
}

pub fn read_links(path: &Path) -> Result<TemporalLinkSet> {
    let records: Vec<(usize, TemporalLink)> = read_jsonl(path)?;
    let links = TemporalLinkSet { links: records.into_iter().map(|(_, l)| l).collect() };
    links.check_consistency()?;
    Ok(links)
}

// ------------------------------------------------------------------ scores

pub fn write_scores_jsonl(path: &Path, scores: &[PairObservation]) -> Result<()> {
    write_jsonl(path, scores)
}

pub fn write_scores_csv(path: &Path, scores: &[PairObservation]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    for obs in scores {
        writer.serialize(obs)?;
    }
    writer.flush()?;
    Ok(())
}

// ----------------------------------------------------------------- weights

pub fn write_weights(path: &Path, weights: &HeadWeights) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, weights)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_weights(path: &Path) -> Result<HeadWeights> {
    let weights: HeadWeights = serde_json::from_reader(open(path)?)?;
    if !weights.is_finite() {
        return Err(Error::InvalidInput(format!(
            "weights in {} contain non-finite values",
            path.display()
        )));
    }
    Ok(weights)
}

// ------------------------------------------------------------------- graph

/// One line of a graph file. Untagged: edge records are recognized by
/// their `kind` field, everything else must parse as a node.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GraphRecord {
    Edge { kind: EdgeKind, u: NodeId, v: NodeId, w: f64 },
    Node { frame: FrameId, person: PersonId },
}

pub fn write_graph(path: &Path, graph: &TemporalGroupnessGraph) -> Result<()> {
    let nodes = graph.nodes.iter().map(|n| GraphRecord::Node { frame: n.frame, person: n.person });
    let edges = graph.edges().map(|(e, kind)| GraphRecord::Edge { kind, u: e.u, v: e.v, w: e.w });
    write_jsonl(path, nodes.chain(edges))
}

pub fn read_graph(path: &Path) -> Result<TemporalGroupnessGraph> {
    let mut graph = TemporalGroupnessGraph::default();
    for (line, record) in read_jsonl::<GraphRecord>(path)? {
        match record {
            GraphRecord::Node { frame, person } => {
                if !graph.nodes.insert(NodeId { frame, person }) {
                    return Err(Error::parse(
                        line,
                        format!("node ({frame}, {person}) appears twice"),
                    ));
                }
            }
            GraphRecord::Edge { kind, u, v, w } => {
                let edge = GraphEdge { u, v, w };
                match kind {
                    EdgeKind::Spatial => graph.spatial_edges.push(edge),
                    EdgeKind::Temporal => graph.temporal_edges.push(edge),
                }
            }
        }
    }
    graph.audit()?;
    Ok(graph)
}

// ------------------------------------------------------------ static graph

/// One line of a static graph file: person records, then weighted edges.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StaticGraphRecord {
    Edge { a: PersonId, b: PersonId, w: f64 },
    Person { person: PersonId },
}

pub fn write_static_graph(path: &Path, graph: &StaticGroupnessGraph) -> Result<()> {
    let persons = graph.persons.iter().map(|p| StaticGraphRecord::Person { person: *p });
    let edges =
        graph.edges.iter().map(|(a, b, w)| StaticGraphRecord::Edge { a: *a, b: *b, w: *w });
    write_jsonl(path, persons.chain(edges))
}

pub fn read_static_graph(path: &Path) -> Result<StaticGroupnessGraph> {
    let mut graph = StaticGroupnessGraph::default();
    for (line, record) in read_jsonl::<StaticGraphRecord>(path)? {
        match record {
            StaticGraphRecord::Person { person } => {
                if !graph.persons.insert(person) {
                    return Err(Error::parse(line, format!("person {person} appears twice")));
                }
            }
            StaticGraphRecord::Edge { a, b, w } => {
                if a >= b {
                    return Err(Error::parse(line, format!("edge ({a}, {b}) is not canonical")));
                }
                for p in [a, b] {
                    if !graph.persons.contains(&p) {
                        return Err(Error::parse(
                            line,
                            format!("edge endpoint {p} is not a listed person"),
                        ));
                    }
                }
                graph.edges.push((a, b, w));
            }
        }
    }
    Ok(graph)
}

// --------------------------------------------------------------- partition

#[derive(Serialize, Deserialize)]
struct PartitionRecord {
    frame: FrameId,
    person: PersonId,
    community: usize,
}

fn partition_records(partition: &Partition) -> impl Iterator<Item = PartitionRecord> + '_ {
    partition.assignment.iter().map(|(node, community)| PartitionRecord {
        frame: node.frame,
        person: node.person,
        community: *community,
    })
}

pub fn write_partition_jsonl(path: &Path, partition: &Partition) -> Result<()> {
    write_jsonl(path, partition_records(partition))
}

pub fn write_partition_csv(path: &Path, partition: &Partition) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    for record in partition_records(partition) {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    let mut assignment = BTreeMap::new();
    for (line, record) in read_jsonl::<PartitionRecord>(path)? {
        let node = NodeId { frame: record.frame, person: record.person };
        if assignment.insert(node, record.community).is_some() {
            return Err(Error::parse(line, format!("node {node} assigned twice")));
        }
    }
    Ok(Partition { assignment })
}

// ------------------------------------------------------------------ groups

#[derive(Serialize, Deserialize)]
struct DynamicGroupsRecord {
    frame: FrameId,
    groups: Vec<BTreeSet<PersonId>>,
}

pub fn write_dynamic_groups(path: &Path, groups: &DynamicGroups) -> Result<()> {
    write_jsonl(
        path,
        groups
            .per_frame
            .iter()
            .map(|(frame, gs)| DynamicGroupsRecord { frame: *frame, groups: gs.clone() }),
    )
}

pub fn read_dynamic_groups(path: &Path) -> Result<DynamicGroups> {
    let mut per_frame = BTreeMap::new();
    for (line, record) in read_jsonl::<DynamicGroupsRecord>(path)? {
        if per_frame.insert(record.frame, record.groups).is_some() {
            return Err(Error::parse(line, format!("frame {} appears twice", record.frame)));
        }
    }
    let groups = DynamicGroups { per_frame };
    groups.check_consistency()?;
    Ok(groups)
}

pub fn write_static_groups(path: &Path, groups: &StaticGroups) -> Result<()> {
    write_jsonl(path, std::iter::once(groups))
}

pub fn read_static_groups(path: &Path) -> Result<StaticGroups> {
    let records: Vec<(usize, StaticGroups)> = read_jsonl(path)?;
    match records.as_slice() {
        [(_, groups)] => {
            groups.check_consistency()?;
            Ok(groups.clone())
        }
        [] => Err(Error::parse(1, "empty static groups file")),
        [_, (line, _), ..] => Err(Error::parse(*line, "expected a single record")),
    }
}

// ----------------------------------------------------------------- reports

pub fn write_report_json(path: &Path, report: &EvalReport) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<EvalReport> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Per-frame breakdown as CSV (`frame,tp,fp,fn,precision,recall,f1`), for
/// plotting F1-over-time curves. Reports without a breakdown produce just
/// the header.
pub fn write_per_frame_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    writer.write_record(["frame", "tp", "fp", "fn", "precision", "recall", "f1"])?;
    for frame in report.per_frame.iter().flatten() {
        writer.write_record([
            frame.frame.to_string(),
            frame.tp.to_string(),
            frame.fp.to_string(),
            frame.fn_.to_string(),
            frame.precision.to_string(),
            frame.recall.to_string(),
            frame.f1.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate_dynamic, EvalConfig};
    use crate::graph::{build_framewise, link_temporal};
    use crate::sim::{simulate, ground_truth_links, SimConfig};
    use std::fs;
    use tempfile::TempDir;

    fn tiny_scenario() -> (Scenario, TemporalLinkSet) {
        let config = SimConfig {
            num_people: 4,
            num_frames: 6,
            initial_groups: vec![
                [PersonId(1), PersonId(2)].into_iter().collect(),
                [PersonId(3), PersonId(4)].into_iter().collect(),
            ],
            ..SimConfig::default()
        };
        let scenario = simulate(&config, 7).unwrap();
        let links = ground_truth_links(&scenario);
        (scenario, links)
    }

    #[test]
    fn scenario_round_trips_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("scenario.jsonl");
        let (scenario, _) = tiny_scenario();
        write_scenario(&path, &scenario).unwrap();
        let back = read_scenario(&path).unwrap();
        assert_eq!(back, scenario);
    }

    #[test]
    fn links_round_trip_exactly() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("links.jsonl");
        let (_, links) = tiny_scenario();
        write_links(&path, &links).unwrap();
        assert_eq!(read_links(&path).unwrap(), links);
    }

    #[test]
    fn scores_round_trip_in_both_formats() {
        let dir = TempDir::new().unwrap();
        let scores = vec![
            PairObservation {
                frame: FrameId(1),
                a: PersonId(1),
                b: PersonId(2),
                p_i: 0.125,
                p_g: 0.875,
            },
            PairObservation {
                frame: FrameId(2),
                a: PersonId(1),
                b: PersonId(3),
                p_i: 0.6,
                p_g: 0.4,
            },
        ];
        let jsonl = dir.path().join("scores.jsonl");
        write_scores_jsonl(&jsonl, &scores).unwrap();
        assert_eq!(read_scores(&jsonl).unwrap(), scores);

        let csv = dir.path().join("scores.csv");
        write_scores_csv(&csv, &scores).unwrap();
        assert_eq!(read_scores(&csv).unwrap(), scores);
    }

    #[test]
    fn weights_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("weights.json");
        let mut weights = HeadWeights::zeros();
        weights.w[1][2] = -2.4;
        weights.b[1] = 6.0;
        write_weights(&path, &weights).unwrap();
        assert_eq!(read_weights(&path).unwrap(), weights);
        // The document must use the documented field names.
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"W\""));
        assert!(text.contains("\"b\""));
    }

    #[test]
    fn graph_round_trips_and_validates() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("graph.jsonl");
        let (scenario, links) = tiny_scenario();
        let framewise: Vec<TemporalGroupnessGraph> = scenario
            .states
            .iter()
            .map(|(frame, states)| {
                let persons: BTreeSet<PersonId> = states.keys().copied().collect();
                let obs: Vec<PairObservation> = states
                    .keys()
                    .collect::<Vec<_>>()
                    .windows(2)
                    .map(|w| PairObservation {
                        frame: *frame,
                        a: *w[0],
                        b: *w[1],
                        p_i: 0.25,
                        p_g: 0.75,
                    })
                    .collect();
                build_framewise(*frame, &obs, &persons).unwrap()
            })
            .collect();
        let graph = link_temporal(&framewise, &links, 1.0).unwrap();
        write_graph(&path, &graph).unwrap();
        assert_eq!(read_graph(&path).unwrap(), graph);
    }

    #[test]
    fn graph_reader_rejects_dangling_edges() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("graph.jsonl");
        fs::write(
            &path,
            concat!(
                "{\"frame\":1,\"person\":1}\n",
                "{\"kind\":\"spatial\",\"u\":{\"frame\":1,\"person\":1},\"v\":{\"frame\":1,\"person\":2},\"w\":0.5}\n",
            ),
        )
        .unwrap();
        assert!(read_graph(&path).is_err());
    }

    #[test]
    fn static_graph_round_trips() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("static_graph.jsonl");
        let graph = StaticGroupnessGraph {
            persons: [PersonId(1), PersonId(2), PersonId(3)].into_iter().collect(),
            edges: vec![(PersonId(1), PersonId(2), 0.75), (PersonId(2), PersonId(3), 0.125)],
        };
        write_static_graph(&path, &graph).unwrap();
        assert_eq!(read_static_graph(&path).unwrap(), graph);
    }

    #[test]
    fn partition_round_trips_and_writes_csv() {
        let dir = TempDir::new().unwrap();
        let mut assignment = BTreeMap::new();
        assignment.insert(NodeId::new(FrameId(1), PersonId(1)), 0);
        assignment.insert(NodeId::new(FrameId(1), PersonId(2)), 0);
        assignment.insert(NodeId::new(FrameId(2), PersonId(1)), 1);
        let partition = Partition { assignment };

        let jsonl = dir.path().join("partition.jsonl");
        write_partition_jsonl(&jsonl, &partition).unwrap();
        assert_eq!(read_partition(&jsonl).unwrap(), partition);

        let csv = dir.path().join("partition.csv");
        write_partition_csv(&csv, &partition).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("frame,person,community"));
        assert_eq!(lines.next(), Some("1,1,0"));
    }

    #[test]
    fn group_files_round_trip() {
        let dir = TempDir::new().unwrap();
        let (scenario, _) = tiny_scenario();
        let dynamic = DynamicGroups::from_scenario(&scenario);
        let dyn_path = dir.path().join("dynamic.jsonl");
        write_dynamic_groups(&dyn_path, &dynamic).unwrap();
        assert_eq!(read_dynamic_groups(&dyn_path).unwrap(), dynamic);

        let stat = crate::groups::dynamic_to_static(&dynamic).unwrap();
        let stat_path = dir.path().join("static.jsonl");
        write_static_groups(&stat_path, &stat).unwrap();
        assert_eq!(read_static_groups(&stat_path).unwrap(), stat);
    }

    #[test]
    fn report_round_trips_and_emits_per_frame_csv() {
        let dir = TempDir::new().unwrap();
        let (scenario, _) = tiny_scenario();
        let truth = DynamicGroups::from_scenario(&scenario);
        let report = evaluate_dynamic(&truth, &truth, &EvalConfig::default()).unwrap();

        let json = dir.path().join("report.json");
        write_report_json(&json, &report).unwrap();
        assert_eq!(read_report_json(&json).unwrap(), report);

        let csv = dir.path().join("per_frame.csv");
        write_per_frame_csv(&csv, &report).unwrap();
        let text = fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("frame,tp,fp,fn,precision,recall,f1"));
        assert_eq!(lines.count(), report.per_frame.as_ref().unwrap().len());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("links.jsonl");
        fs::write(
            &path,
            "{\"frame\":1,\"a\":1,\"b\":2,\"p_t\":1.0}\n{\"frame\":1,\"a\":2}\n",
        )
        .unwrap();
        match read_links(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_files_name_the_path() {
        let err = read_scenario(Path::new("/nonexistent/scenario.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/scenario.jsonl"));
    }

    #[test]
    fn duplicate_frames_are_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("dynamic.jsonl");
        fs::write(
            &path,
            "{\"frame\":1,\"groups\":[[1,2]]}\n{\"frame\":1,\"groups\":[[1],[2]]}\n",
        )
        .unwrap();
        match read_dynamic_groups(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
