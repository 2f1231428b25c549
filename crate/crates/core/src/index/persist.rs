//! On-disk index layout.
//!
//! ```text
//! manifest.json    version, provider, dimension, num_chunks, k1, b, checksum
//! chunks.jsonl     chunk dump, one chunk per line, index order
//! vectors.f32      little-endian f32, row-major, num_chunks × dimension
//! bm25.json        doc_freq, doc_lengths, avg_len, postings
//! documents.jsonl  source documents (titles and metadata for citations)
//! ```
//!
//! The checksum is SHA-256 over the four data files in the order above.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Bm25Index, IndexError, VectorIndex};
use crate::chunking::{chunk_corpus, write_chunks_jsonl, Chunk, ChunkingConfig};
use crate::config::ProviderSpec;
use crate::corpus::{parse_corpus, Corpus, Document};
use crate::embedding::EmbeddingProvider;
use crate::exec::Execution;

pub const INDEX_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const CHUNKS: &str = "chunks.jsonl";
const VECTORS: &str = "vectors.f32";
const BM25: &str = "bm25.json";
const DOCUMENTS: &str = "documents.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub provider: String,
    pub dimension: usize,
    pub num_chunks: usize,
    pub k1: f64,
    pub b: f64,
    pub checksum: String,
    #[serde(default)]
    pub num_docs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunking: Option<ChunkingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_spec: Option<ProviderSpec>,
}

/// Everything a served or evaluated index needs.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexBundle {
    pub vectors: VectorIndex,
    pub bm25: Bm25Index,
    pub corpus: Corpus,
    pub chunking: Option<ChunkingConfig>,
    pub provider_spec: Option<ProviderSpec>,
}

#[derive(Serialize, Deserialize)]
struct Bm25File {
    doc_freq: BTreeMap<String, u32>,
    doc_lengths: BTreeMap<String, u32>,
    avg_len: f64,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn checksum(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    hex::encode(hasher.finalize())
}

fn encode(bundle: &IndexBundle) -> Result<[Vec<u8>; 4], IndexError> {
    let to_io = |e: std::io::Error| IndexError::CorruptIndex(e.to_string());
    let mut chunks = Vec::new();
    write_chunks_jsonl(bundle.vectors.chunks(), &mut chunks).map_err(to_io)?;
    let vectors: Vec<u8> = bundle
        .vectors
        .vectors()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let bm25 = &bundle.bm25;
    let file = Bm25File {
        doc_freq: bm25.doc_freq().clone(),
        doc_lengths: bm25
            .chunk_ids()
            .iter()
            .cloned()
            .zip(bm25.doc_lengths().iter().copied())
            .collect(),
        avg_len: bm25.avg_len(),
        postings: bm25.postings().clone(),
    };
    let bm25 = serde_json::to_vec(&file).map_err(|e| IndexError::CorruptIndex(e.to_string()))?;
    let mut documents = Vec::new();
    bundle.corpus.write_jsonl(&mut documents).map_err(to_io)?;
    Ok([chunks, vectors, bm25, documents])
}

pub fn save_index(bundle: &IndexBundle, dir: impl AsRef<Path>) -> Result<Manifest, IndexError> {
    let dir = dir.as_ref();
    if bundle.vectors.chunks().iter().map(|c| &c.chunk_id).ne(bundle.bm25.chunk_ids().iter()) {
        return Err(IndexError::CorruptIndex(
            "dense and sparse indices cover different chunk sets".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let [chunks, vectors, bm25, documents] = encode(bundle)?;
    let manifest = Manifest {
        version: INDEX_VERSION,
        provider: bundle.vectors.provider_name().to_string(),
        dimension: bundle.vectors.dimension(),
        num_chunks: bundle.vectors.len(),
        k1: bundle.bm25.k1(),
        b: bundle.bm25.b(),
        checksum: checksum(&[&chunks, &vectors, &bm25, &documents]),
        num_docs: bundle.corpus.len(),
        chunking: bundle.chunking.clone(),
        provider_spec: bundle.provider_spec.clone(),
    };
    for (name, bytes) in [(CHUNKS, &chunks), (VECTORS, &vectors), (BM25, &bm25), (DOCUMENTS, &documents)] {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    let path = dir.join(MANIFEST);
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| IndexError::CorruptIndex(e.to_string()))?;
    json.push(b'\n');
    std::fs::write(&path, json).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest, IndexError> {
    let path = dir.as_ref().join(MANIFEST);
    let bytes = std::fs::read(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| IndexError::CorruptIndex(format!("{MANIFEST}: {e}")))?;
    if manifest.version != INDEX_VERSION {
        return Err(IndexError::VersionMismatch {
            found: manifest.version,
            expected: INDEX_VERSION,
        });
    }
    Ok(manifest)
}

pub fn load_index(dir: impl AsRef<Path>) -> Result<(IndexBundle, Manifest), IndexError> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read(&path).map_err(io_err(&path))
    };
    let vectors = read(VECTORS)?;
    let expected = manifest.num_chunks * manifest.dimension * 4;
    if vectors.len() != expected {
        return Err(IndexError::CorruptIndex(format!(
            "{VECTORS} holds {} bytes, manifest implies {expected} ({} × {} × 4)",
            vectors.len(),
            manifest.num_chunks,
            manifest.dimension
        )));
    }
    let chunks = read(CHUNKS)?;
    let bm25 = read(BM25)?;
    let documents = read(DOCUMENTS)?;
    if checksum(&[&chunks, &vectors, &bm25, &documents]) != manifest.checksum {
        return Err(IndexError::CorruptIndex("checksum mismatch".into()));
    }

    let chunk_list = parse_chunks(&chunks)?;
    if chunk_list.len() != manifest.num_chunks {
        return Err(IndexError::CorruptIndex(format!(
            "{CHUNKS} has {} chunks, manifest says {}",
            chunk_list.len(),
            manifest.num_chunks
        )));
    }
    let floats: Vec<f32> = vectors
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let bm25: Bm25File =
        serde_json::from_slice(&bm25).map_err(|e| IndexError::CorruptIndex(format!("{BM25}: {e}")))?;
    let chunk_ids: Vec<String> = chunk_list.iter().map(|c| c.chunk_id.clone()).collect();
    let doc_lengths = chunk_ids
        .iter()
        .map(|id| {
            bm25.doc_lengths
                .get(id)
                .copied()
                .ok_or_else(|| IndexError::CorruptIndex(format!("no doc length for `{id}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if bm25.doc_lengths.len() != chunk_ids.len() {
        return Err(IndexError::CorruptIndex("doc_lengths has extra chunk ids".into()));
    }
    let bm25 = Bm25Index::from_parts(
        chunk_ids,
        bm25.doc_freq,
        doc_lengths,
        bm25.avg_len,
        bm25.postings,
        manifest.k1,
        manifest.b,
    )?;
    let corpus = parse_corpus(&documents)
        .map_err(|e| IndexError::CorruptIndex(format!("{DOCUMENTS}: {e}")))?;
    let vectors = VectorIndex::from_parts(chunk_list, floats, manifest.dimension, manifest.provider.clone())?;
    let bundle = IndexBundle {
        vectors,
        bm25,
        corpus,
        chunking: manifest.chunking.clone(),
        provider_spec: manifest.provider_spec.clone(),
    };
    Ok((bundle, manifest))
}

fn parse_chunks(bytes: &[u8]) -> Result<Vec<Chunk>, IndexError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IndexError::CorruptIndex(format!("{CHUNKS}: {e}")))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| IndexError::CorruptIndex(format!("{CHUNKS} line {}: {e}", i + 1)))
        })
        .collect()
}

impl IndexBundle {
    /// Chunks the corpus and builds both indices with the provider `spec` describes.
    pub fn build(
        corpus: Corpus,
        chunking: &ChunkingConfig,
        spec: &ProviderSpec,
        exec: Execution,
    ) -> Result<Self, IndexError> {
        let provider = spec.build();
        Self::build_with(corpus, chunking, provider.as_ref(), Some(spec.clone()), exec)
    }

    /// Like [`IndexBundle::build`] for an already constructed provider.
    pub fn build_with(
        corpus: Corpus,
        chunking: &ChunkingConfig,
        provider: &dyn EmbeddingProvider,
        provider_spec: Option<ProviderSpec>,
        exec: Execution,
    ) -> Result<Self, IndexError> {
        let chunks = chunk_corpus(&corpus, chunking, Some(provider), exec)?;
        let bm25 = Bm25Index::build(&chunks)?;
        let vectors = VectorIndex::build(chunks, provider)?;
        Ok(Self {
            vectors,
            bm25,
            corpus,
            chunking: Some(chunking.clone()),
            provider_spec,
        })
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.corpus.get(id)
    }

    pub fn chunks(&self) -> &[Chunk] {
        self.vectors.chunks()
    }
}
