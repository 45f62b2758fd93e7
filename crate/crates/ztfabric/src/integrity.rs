//! Provenance chains and the quorum-gated shared knowledge base.
//!
//! Every fact carries a hash-linked, signed lineage back to the agent that
//! created it, and nothing enters the shared store without endorsements from
//! a quorum of distinct authenticated agents. A quorum-backed proposal that
//! contradicts already-accepted knowledge is flagged, never merged.
//!
//! Record hashes commit to `canonical(parent_hash, content_hash, agent_id,
//! transform, tick)` with an absent parent encoded as a zero-length field;
//! endorsement signatures cover `canonical(key, value, origin_record)`, so
//! an endorsement cannot be transplanted onto a different fact.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::canonical::{sha256, CanonicalWriter, Digest, SignatureBytes};
use crate::identity::{verify_signature, AgentIdentity, KeyDirectory, KeyPair, Tick};

/// How a record's content relates to its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Created,
    ToolOutput,
    VerbatimForward,
    Rewrite,
}

impl Transform {
    pub fn as_str(&self) -> &'static str {
        match self {
            Transform::Created => "created",
            Transform::ToolOutput => "tool_output",
            Transform::VerbatimForward => "verbatim_forward",
            Transform::Rewrite => "rewrite",
        }
    }
}

/// One link in a fact's lineage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceRecord {
    pub record_hash: Digest,
    /// `None` marks a chain origin.
    pub parent_hash: Option<Digest>,
    pub content_hash: Digest,
    pub agent_id: String,
    pub transform: Transform,
    pub tick: Tick,
    /// Signature over `record_hash` under the agent's key.
    pub signature: SignatureBytes,
}

fn record_hash(
    parent_hash: Option<&Digest>,
    content_hash: &Digest,
    agent_id: &str,
    transform: Transform,
    tick: Tick,
) -> Digest {
    let mut w = CanonicalWriter::new();
    w.field_opt_bytes(parent_hash.map(|d| d.as_slice()))
        .field_bytes(content_hash)
        .field_str(agent_id)
        .field_str(transform.as_str())
        .field_u64(tick);
    sha256(&w.finish())
}

/// Append a new record to a lineage (or start one with `parent = None`).
///
/// Deterministic: identical inputs produce bit-identical records.
pub fn append_provenance(
    parent: Option<&ProvenanceRecord>,
    agent: &AgentIdentity,
    keys: &KeyPair,
    transform: Transform,
    content: &[u8],
    tick: Tick,
) -> ProvenanceRecord {
    let parent_hash = parent.map(|p| p.record_hash);
    let content_hash = sha256(content);
    let hash = record_hash(
        parent_hash.as_ref(),
        &content_hash,
        &agent.agent_id,
        transform,
        tick,
    );
    ProvenanceRecord {
        record_hash: hash,
        parent_hash,
        content_hash,
        agent_id: agent.agent_id.clone(),
        transform,
        tick,
        signature: keys.sign(&hash),
    }
}

/// Where and why a chain broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakReason {
    HashMismatch,
    BadSignature,
    DanglingParent,
    UnknownAgent,
}

impl std::fmt::Display for BreakReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BreakReason::HashMismatch => "hash mismatch",
            BreakReason::BadSignature => "bad signature",
            BreakReason::DanglingParent => "dangling parent",
            BreakReason::UnknownAgent => "unknown agent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("provenance chain is empty")]
    Empty,
    #[error("chain broken at record {index}: {reason}")]
    Broken { index: usize, reason: BreakReason },
}

/// Walk a chain from origin to tip and return the origin agent id.
///
/// The first record must be a true origin (no parent); every later record
/// must link to the hash of its predecessor; every record hash must
/// recompute; and every signature must verify under a key known to
/// `key_lookup`. The first failing 0-based index is reported.
pub fn verify_provenance(
    chain: &[ProvenanceRecord],
    key_lookup: &KeyDirectory,
) -> Result<String, ChainError> {
    if chain.is_empty() {
        return Err(ChainError::Empty);
    }
    let mut previous: Option<&ProvenanceRecord> = None;
    for (index, record) in chain.iter().enumerate() {
        let broken = |reason| ChainError::Broken { index, reason };
        match (previous, record.parent_hash) {
            (None, None) => {}
            (Some(prev), Some(parent)) if parent == prev.record_hash => {}
            _ => return Err(broken(BreakReason::DanglingParent)),
        }
        let expected = record_hash(
            record.parent_hash.as_ref(),
            &record.content_hash,
            &record.agent_id,
            record.transform,
            record.tick,
        );
        if expected != record.record_hash {
            return Err(broken(BreakReason::HashMismatch));
        }
        let key = key_lookup
            .get(&record.agent_id)
            .ok_or(broken(BreakReason::UnknownAgent))?;
        if !verify_signature(key, &record.record_hash, &record.signature) {
            return Err(broken(BreakReason::BadSignature));
        }
        previous = Some(record);
    }
    Ok(chain[0].agent_id.clone())
}

/// A claim proposed for the shared knowledge base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub key: String,
    pub value: String,
    /// Hash of the provenance record this fact originates from.
    pub origin_record: Digest,
}

impl Fact {
    /// The bytes an endorsement signature covers.
    pub fn endorsement_bytes(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        w.field_str(&self.key)
            .field_str(&self.value)
            .field_bytes(&self.origin_record);
        w.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalStatus {
    Pending,
    Accepted,
    Rejected,
    Flagged,
}

impl std::fmt::Display for ProposalStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProposalStatus::Pending => "pending",
            ProposalStatus::Accepted => "accepted",
            ProposalStatus::Rejected => "rejected",
            ProposalStatus::Flagged => "flagged",
        })
    }
}

/// A fact plus the endorsements collected for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub fact: Fact,
    pub proposer: String,
    /// Distinct endorser ids with their signatures over the fact.
    pub endorsements: Vec<(String, SignatureBytes)>,
    pub status: ProposalStatus,
}

/// The quorum-protected shared store. Updates are functional: operations
/// return a new store and never mutate in place.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub accepted: BTreeMap<String, Fact>,
    pub flagged: Vec<Proposal>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("fact key must be non-empty")]
    EmptyKey,
    #[error("proposal is {0}, not pending")]
    NotPending(ProposalStatus),
    #[error("quorum must be at least 1")]
    InvalidQuorum,
}

/// Open a pending proposal for `fact`. Endorsements, including the
/// proposer's own, are added separately via [`endorse_fact`].
pub fn propose_fact(fact: Fact, proposer: &AgentIdentity) -> Result<Proposal, IntegrityError> {
    if fact.key.is_empty() {
        return Err(IntegrityError::EmptyKey);
    }
    Ok(Proposal {
        fact,
        proposer: proposer.agent_id.clone(),
        endorsements: Vec::new(),
        status: ProposalStatus::Pending,
    })
}

/// Add an endorsement to a pending proposal. A second endorsement by the
/// same agent id is a no-op.
pub fn endorse_fact(
    proposal: &Proposal,
    agent: &AgentIdentity,
    keys: &KeyPair,
) -> Result<Proposal, IntegrityError> {
    if proposal.status != ProposalStatus::Pending {
        return Err(IntegrityError::NotPending(proposal.status));
    }
    let mut next = proposal.clone();
    if !next.endorsements.iter().any(|(id, _)| *id == agent.agent_id) {
        let signature = keys.sign(&proposal.fact.endorsement_bytes());
        next.endorsements.push((agent.agent_id.clone(), signature));
    }
    Ok(next)
}

/// Resolve a proposal against the store under quorum `q`.
///
/// Endorsements count only if their signature verifies under the endorser's
/// directory key. With fewer than `q` valid endorsements the proposal stays
/// pending and the store is untouched. At quorum, the fact is accepted when
/// its key is free or already holds the same value, and flagged when it
/// contradicts accepted knowledge. Nothing is ever auto-rejected.
pub fn finalize(
    kb: &KnowledgeBase,
    proposal: &Proposal,
    quorum: usize,
    key_lookup: &KeyDirectory,
) -> Result<(KnowledgeBase, ProposalStatus), IntegrityError> {
    if quorum < 1 {
        return Err(IntegrityError::InvalidQuorum);
    }
    if proposal.status != ProposalStatus::Pending {
        return Err(IntegrityError::NotPending(proposal.status));
    }
    let message = proposal.fact.endorsement_bytes();
    let valid = proposal
        .endorsements
        .iter()
        .filter(|(id, sig)| {
            key_lookup
                .get(id)
                .is_some_and(|key| verify_signature(key, &message, sig))
        })
        .count();
    if valid < quorum {
        return Ok((kb.clone(), ProposalStatus::Pending));
    }

    let mut next = kb.clone();
    match kb.accepted.get(&proposal.fact.key) {
        Some(existing) if existing.value != proposal.fact.value => {
            let mut flagged = proposal.clone();
            flagged.status = ProposalStatus::Flagged;
            next.flagged.push(flagged);
            Ok((next, ProposalStatus::Flagged))
        }
        _ => {
            next.accepted
                .insert(proposal.fact.key.clone(), proposal.fact.clone());
            Ok((next, ProposalStatus::Accepted))
        }
    }
}

/// Why an output fact was flagged by the audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditFinding {
    ContradictsAccepted { accepted_value: String },
}

/// Screen agent outputs against accepted knowledge. Facts whose key is
/// accepted with a different value are returned; unknown keys pass.
pub fn plausibility_audit(kb: &KnowledgeBase, outputs: &[Fact]) -> Vec<(Fact, AuditFinding)> {
    outputs
        .iter()
        .filter_map(|fact| match kb.accepted.get(&fact.key) {
            Some(existing) if existing.value != fact.value => Some((
                fact.clone(),
                AuditFinding::ContradictsAccepted {
                    accepted_value: existing.value.clone(),
                },
            )),
            _ => None,
        })
        .collect()
}
