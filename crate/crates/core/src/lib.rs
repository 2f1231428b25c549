//! Retrieval-augmented question answering over laboratory protocol documents.
//!
//! The pipeline runs corpus loading, chunking, embedding, dense and BM25
//! indexing, retrieval (naive, rerank, hybrid), grounded generation and
//! evaluation. [`engine::Engine`] is the query entry point shared by the CLI
//! and the HTTP service.

pub mod chunking;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod engine;
pub mod evaluation;
pub mod exec;
pub mod generation;
mod http;
pub mod index;
pub mod retrieval;

pub use http::HttpError;
