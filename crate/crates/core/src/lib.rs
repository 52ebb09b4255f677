pub mod extractor;
pub mod ingest;
pub mod llm;
pub mod parse_core;
pub mod pipeline;
pub mod rag;
pub mod metrics;
pub mod cli;
