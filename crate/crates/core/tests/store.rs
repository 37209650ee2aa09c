mod common;

use std::fs;

use setcse::store::{
    load_adapter, load_corpus, load_sets, parse_sets, read_embeddings, save_adapter, write_embeddings,
};
use setcse::{AdapterCheckpoint, EmbeddingMatrix, Error, TrainConfig};

/// Builds an embedding file by hand, the way an external exporter would.
fn hand_built(rows: &[(&str, &[f32])]) -> Vec<u8> {
    let dim = rows[0].1.len() as u32;
    let mut out = b"SCSE".to_vec();
    out.extend(1u32.to_le_bytes());
    out.extend(dim.to_le_bytes());
    out.extend((rows.len() as u64).to_le_bytes());
    for (id, values) in rows {
        out.extend((id.len() as u16).to_le_bytes());
        out.extend(id.as_bytes());
        for v in *values {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

#[test]
fn reads_externally_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.scse");
    let bytes = hand_built(&[("s1", &[0.5, -1.0, 3.25]), ("é2", &[1.0, 0.0, f32::MIN_POSITIVE])]);
    fs::write(&path, &bytes).unwrap();
    let m = read_embeddings(&path).unwrap();
    assert_eq!(m.ids(), ["s1", "é2"]);
    assert_eq!(m.get("s1").unwrap(), [0.5, -1.0, 3.25]);
    // Loading leaves the file untouched, and writing reproduces it exactly.
    assert_eq!(fs::read(&path).unwrap(), bytes);
    let out = dir.path().join("out.scse");
    write_embeddings(&m, &out).unwrap();
    assert_eq!(fs::read(out).unwrap(), bytes);
}

#[test]
fn rejects_zero_rows_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.scse");
    fs::write(&path, hand_built(&[("z", &[0.0, 0.0])])).unwrap();
    assert!(matches!(read_embeddings(&path), Err(Error::Validation(_))));
    let mut bytes = hand_built(&[("a", &[1.0, 0.0])]);
    bytes.pop();
    fs::write(&path, bytes).unwrap();
    assert!(matches!(read_embeddings(&path), Err(Error::Truncated(_))));
}

#[test]
fn fixture_sets_resolve_against_corpus() {
    let dir = common::fixture_dir("multilabel");
    let corpus = load_corpus(dir.join("corpus.jsonl")).unwrap();
    let sets = load_sets(dir.join("sets.json"), &corpus).unwrap();
    assert_eq!(sets.len(), 3);
    // The both-labeled sentences sit in c0 and c1.
    assert_eq!(sets.warnings().len(), 20);
    for s in sets.sets() {
        assert!(s.members().iter().all(|m| corpus.contains(m)));
    }
}

#[test]
fn set_file_errors_name_set_and_id() {
    let (corpus, _) = common::load("orthogonal");
    let err = parse_sets(r#"{"A": ["s0000"], "B": ["missing"]}"#, &corpus).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("\"B\"") && msg.contains("\"missing\""), "{msg}");
    assert!(parse_sets(r#"{"A": []}"#, &corpus).is_err());
}

#[test]
fn adapter_file_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("adapter.json");
    let ckpt = AdapterCheckpoint::from_rows(2, vec![vec![1.5, -0.25], vec![0.0, 2.0]], vec![0.1, 0.2])
        .unwrap()
        .with_metadata(TrainConfig::default());
    save_adapter(&ckpt, &path).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(json["dim"], 2);
    assert_eq!(json["weights"][0][1], -0.25);
    assert_eq!(json["bias"][1], 0.2);
    assert_eq!(json["metadata"]["tau"], 0.05);
    assert_eq!(load_adapter(&path).unwrap(), ckpt);
}

#[test]
fn embeddings_round_trip_through_files() {
    let (_, emb) = common::load("clusters");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.scse");
    write_embeddings(&emb, &path).unwrap();
    let back: EmbeddingMatrix = read_embeddings(&path).unwrap();
    assert_eq!(back.ids(), emb.ids());
    assert!(back.values().iter().zip(emb.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
}
