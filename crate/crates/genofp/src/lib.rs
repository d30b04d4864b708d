//! Fingerprinting for SNP relational databases.
//!
//! The crate covers the full sharing-and-leak lifecycle: a keyed bit-level
//! fingerprinting scheme (insertion, extraction, traitor ranking), the
//! correlation attacks a malicious recipient can mount using Mendel's law
//! and linkage disequilibrium, owner-side mitigations that repair those
//! correlations without touching any marked cell, utility and robustness
//! metrics, a synthetic trio-structured data generator, and an experiment
//! pipeline driving all of it from the command line.

pub mod attack;
pub mod io;
pub mod keyed;
pub mod metrics;
pub mod mitigate;
pub mod pipeline;
pub mod scheme;
pub mod snp;
pub mod synth;
pub mod transport;

pub use keyed::{gen_fingerprint, u_select, Fingerprint, SecretKey, SelectionChannel};
pub use scheme::{
    detect_traitor, extract_fingerprint, insert_fingerprint, ExtractedBit, ExtractedFingerprint,
    ExtractionParams, InsertionParams,
};
pub use snp::{
    decode_count, empirical_models, mendel_consistent, FingerprintMask, JointModel, PairPolicy,
    Pedigree, SimilarityModel, SnpCode, SnpDatabase, Trio,
};
