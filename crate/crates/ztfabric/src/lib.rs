//! Zero-trust message fabric for multi-agent pipelines, plus a deterministic
//! simulator for two failure modes of agentic systems: poisoning of shared
//! knowledge and per-hop rewrite degradation.
//!
//! The fabric side provides:
//!
//! * [`identity`] — Ed25519 agent identities, signed identity documents, and
//!   a mutual-authentication handshake;
//! * [`policy`] — default-deny micro-segmentation, blast-radius analysis,
//!   escalating sanctions, and behavioral anomaly detection;
//! * [`integrity`] — hash-linked provenance chains and a quorum-gated shared
//!   knowledge base;
//! * [`packet`] — dual-cluster packets whose protected half is byte-frozen
//!   behind a per-hop guard chain;
//! * [`auditlog`] — an append-only Merkle event log with inclusion and
//!   consistency proofs, redundant-log cross-validation, and self-documenting
//!   run manifests.
//!
//! The simulator side ([`sim`]) models downstream rewriting as a per-assertion
//! Markov channel, scores grounding/exactness/verifiability per hop, and runs
//! the false-fact injection attack with defenses on or off.
//!
//! [`config`] and [`commands`] provide the scenario file format and the four
//! CLI entry points (`simulate`, `attack`, `verify-log`, `blast-radius`); see
//! the `examples/` directory for one runnable program per capability.

pub mod auditlog;
pub mod canonical;
pub mod commands;
pub mod config;
pub mod identity;
pub mod integrity;
pub mod packet;
pub mod policy;
pub mod sim;
