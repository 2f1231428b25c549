mod common;

use std::fs;

use labrag::chunking::ChunkingConfig;
use labrag::config::ProviderSpec;
use labrag::exec::Execution;
use labrag::index::{load_index, read_manifest, save_index, IndexBundle, IndexError, INDEX_VERSION};

fn bundle() -> IndexBundle {
    let (corpus, _) = common::toy();
    IndexBundle::build(
        corpus,
        &ChunkingConfig::recursive(64, 16),
        &ProviderSpec::Hash { dimension: 384, seed: 0 },
        Execution::Parallel,
    )
    .unwrap()
}

#[test]
fn round_trip_is_bit_exact() {
    let original = bundle();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_index(&original, dir.path()).unwrap();
    assert_eq!(manifest.version, INDEX_VERSION);
    assert_eq!(manifest.num_chunks, original.vectors.len());
    assert_eq!(manifest.num_docs, 10);
    assert_eq!(manifest.chunking, Some(ChunkingConfig::recursive(64, 16)));

    let (loaded, loaded_manifest) = load_index(dir.path()).unwrap();
    assert_eq!(loaded_manifest, manifest);
    assert_eq!(loaded, original);
    let bits = |b: &IndexBundle| b.vectors.vectors().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&loaded), bits(&original));
    assert_eq!(loaded.bm25.avg_len().to_bits(), original.bm25.avg_len().to_bits());

    // Saving the loaded bundle reproduces every file byte for byte.
    let again = tempfile::tempdir().unwrap();
    save_index(&loaded, again.path()).unwrap();
    for name in ["manifest.json", "chunks.jsonl", "vectors.f32", "bm25.json", "documents.jsonl"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(again.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

fn saved() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    save_index(&bundle(), dir.path()).unwrap();
    dir
}

#[test]
fn truncated_vectors_are_corrupt() {
    let dir = saved();
    let path = dir.path().join("vectors.f32");
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_index(dir.path()), Err(IndexError::CorruptIndex(_))));
}

#[test]
fn dimension_disagreement_is_corrupt() {
    let dir = saved();
    // Manifest says 384, file holds 128-dimensional rows.
    let manifest = read_manifest(dir.path()).unwrap();
    let rows = vec![0u8; manifest.num_chunks * 128 * 4];
    fs::write(dir.path().join("vectors.f32"), rows).unwrap();
    assert!(matches!(load_index(dir.path()), Err(IndexError::CorruptIndex(_))));
}

#[test]
fn flipped_byte_fails_checksum() {
    let dir = saved();
    for name in ["chunks.jsonl", "bm25.json", "vectors.f32", "documents.jsonl"] {
        let path = dir.path().join(name);
        let original = fs::read(&path).unwrap();
        let mut bytes = original.clone();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_index(dir.path()), Err(IndexError::CorruptIndex(_))), "{name}");
        fs::write(&path, original).unwrap();
    }
    assert!(load_index(dir.path()).is_ok());
}

#[test]
fn version_mismatch() {
    let dir = saved();
    let path = dir.path().join("manifest.json");
    let mut manifest: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    manifest["version"] = serde_json::json!(INDEX_VERSION + 1);
    fs::write(&path, serde_json::to_vec(&manifest).unwrap()).unwrap();
    match load_index(dir.path()) {
        Err(IndexError::VersionMismatch { found, expected }) => {
            assert_eq!((found, expected), (INDEX_VERSION + 1, INDEX_VERSION));
        }
        other => panic!("expected VersionMismatch, got {other:?}"),
    }
}

#[test]
fn missing_directory_is_io() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_index(dir.path().join("nope")), Err(IndexError::Io { .. })));
}
