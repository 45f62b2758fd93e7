//! Cryptographic agent identities and mutual authentication.
//!
//! Every agent owns an Ed25519 keypair derived from a 32-byte seed. Identity
//! documents play the certificate role: an issuer signs the subject's id,
//! public key, and validity window, and peers verify documents against a flat
//! set of trust anchors before any message is exchanged. Time is a simulated
//! integer tick throughout; validity windows are inclusive at both ends.
//!
//! Signed material uses the canonical encoding from [`crate::canonical`]:
//!
//! * document signature: `canonical(subject_id, subject_public_key,
//!   issuer_id, not_before, not_after)`
//! * handshake challenge: `canonical(peer_nonce, own_fingerprint)`

use std::collections::BTreeMap;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::RngCore;
use thiserror::Error;

use crate::canonical::{sha256, CanonicalWriter, Digest, SignatureBytes};

/// Simulated clock value.
pub type Tick = u64;

/// The role an agent plays in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Orchestrator,
    Delegator,
    Specialist,
    Auditor,
    Adversary,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Orchestrator => "orchestrator",
            Role::Delegator => "delegator",
            Role::Specialist => "specialist",
            Role::Auditor => "auditor",
            Role::Adversary => "adversary",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        Some(match s {
            "orchestrator" => Role::Orchestrator,
            "delegator" => Role::Delegator,
            "specialist" => Role::Specialist,
            "auditor" => Role::Auditor,
            "adversary" => Role::Adversary,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ed25519 signing/verification keypair, deterministically derived from a
/// 32-byte seed.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl KeyPair {
    /// Derive a keypair from exactly 32 bytes of seed material.
    pub fn from_seed(seed: &[u8]) -> Result<Self, IdentityError> {
        let seed: [u8; 32] = seed
            .try_into()
            .map_err(|_| IdentityError::SeedLength(seed.len()))?;
        Ok(Self {
            signing: SigningKey::from_bytes(&seed),
        })
    }

    /// The 32-byte public verification key.
    pub fn public_key(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    /// Sign a message, returning the raw 64 signature bytes.
    pub fn sign(&self, message: &[u8]) -> SignatureBytes {
        self.signing.sign(message).to_bytes()
    }
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never expose the secret half.
        f.debug_struct("KeyPair")
            .field("public", &hex::encode(self.public_key()))
            .finish()
    }
}

/// Verify `signature` over `message` under a raw 32-byte public key.
///
/// Returns `false` for malformed keys as well as for bad signatures.
pub fn verify_signature(public_key: &[u8; 32], message: &[u8], signature: &SignatureBytes) -> bool {
    match VerifyingKey::from_bytes(public_key) {
        Ok(vk) => vk
            .verify_strict(message, &Signature::from_bytes(signature))
            .is_ok(),
        Err(_) => false,
    }
}

/// Public identity of an agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentIdentity {
    pub agent_id: String,
    pub public_key: [u8; 32],
    /// SHA-256 of `public_key`.
    pub fingerprint: Digest,
    pub segment_id: String,
    pub role: Role,
}

/// Signed credential binding an agent id to its public key for a tick window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityDocument {
    pub subject_id: String,
    pub subject_public_key: [u8; 32],
    pub issuer_id: String,
    pub not_before: Tick,
    pub not_after: Tick,
    pub signature: SignatureBytes,
}

impl IdentityDocument {
    /// The bytes covered by the issuer signature.
    pub fn signed_bytes(&self) -> Vec<u8> {
        document_signed_bytes(
            &self.subject_id,
            &self.subject_public_key,
            &self.issuer_id,
            self.not_before,
            self.not_after,
        )
    }
}

fn document_signed_bytes(
    subject_id: &str,
    subject_public_key: &[u8; 32],
    issuer_id: &str,
    not_before: Tick,
    not_after: Tick,
) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    w.field_str(subject_id)
        .field_bytes(subject_public_key)
        .field_str(issuer_id)
        .field_u64(not_before)
        .field_u64(not_after);
    w.finish()
}

/// Proof that a two-way handshake completed; only constructed by
/// [`mutual_authenticate`] on success.
#[derive(Debug, Clone)]
pub struct SessionToken {
    pub initiator_id: String,
    pub responder_id: String,
    pub initiator_nonce: [u8; 32],
    pub responder_nonce: [u8; 32],
    pub initiator_signature: SignatureBytes,
    pub responder_signature: SignatureBytes,
}

/// Lookup table from id to raw public key. Doubles as the trust-anchor set
/// (issuer id to issuer key) and as the agent key directory used by
/// provenance, packet, and quorum verification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyDirectory {
    keys: BTreeMap<String, [u8; 32]>,
}

impl KeyDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, public_key: [u8; 32]) {
        self.keys.insert(id.into(), public_key);
    }

    pub fn get(&self, id: &str) -> Option<&[u8; 32]> {
        self.keys.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.keys.contains_key(id)
    }
}

impl FromIterator<(String, [u8; 32])> for KeyDirectory {
    fn from_iter<T: IntoIterator<Item = (String, [u8; 32])>>(iter: T) -> Self {
        Self {
            keys: iter.into_iter().collect(),
        }
    }
}

/// Construction errors for identities and documents.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("agent id must be non-empty")]
    EmptyAgentId,
    #[error("seed must be exactly 32 bytes, got {0}")]
    SeedLength(usize),
    #[error("validity window inverted: not_before {not_before} > not_after {not_after}")]
    InvalidWindow { not_before: Tick, not_after: Tick },
}

/// Why a document (or a handshake leg) failed verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidityReason {
    UnknownIssuer,
    BadSignature,
    Expired,
    NotYetValid,
}

impl std::fmt::Display for InvalidityReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InvalidityReason::UnknownIssuer => "unknown issuer",
            InvalidityReason::BadSignature => "bad signature",
            InvalidityReason::Expired => "expired",
            InvalidityReason::NotYetValid => "not yet valid",
        };
        f.write_str(s)
    }
}

/// Outcome of [`verify_document`]. Invalidity is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentStatus {
    Valid,
    Invalid(InvalidityReason),
}

impl DocumentStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, DocumentStatus::Valid)
    }
}

/// Which side of a handshake failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Initiator,
    Responder,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Initiator => "initiator",
            Side::Responder => "responder",
        })
    }
}

/// The only failure surface of [`mutual_authenticate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("authentication failed: {side} {reason}")]
pub struct AuthError {
    pub side: Side,
    pub reason: InvalidityReason,
}

/// Source of 32-byte handshake nonces. Blanket-implemented for any RNG so
/// tests and the simulator can pass a seeded stream.
pub trait NonceSource {
    fn next_nonce(&mut self) -> [u8; 32];
}

impl<R: RngCore> NonceSource for R {
    fn next_nonce(&mut self) -> [u8; 32] {
        let mut nonce = [0u8; 32];
        self.fill_bytes(&mut nonce);
        nonce
    }
}

/// Create an agent identity and its keypair from 32 bytes of seed entropy.
///
/// Deterministic: the same inputs always yield byte-identical outputs.
pub fn generate_identity(
    seed: &[u8],
    agent_id: &str,
    segment_id: &str,
    role: Role,
) -> Result<(AgentIdentity, KeyPair), IdentityError> {
    if agent_id.is_empty() {
        return Err(IdentityError::EmptyAgentId);
    }
    let keys = KeyPair::from_seed(seed)?;
    let public_key = keys.public_key();
    let identity = AgentIdentity {
        agent_id: agent_id.to_string(),
        public_key,
        fingerprint: sha256(&public_key),
        segment_id: segment_id.to_string(),
        role,
    };
    Ok((identity, keys))
}

/// Derive a 32-byte identity seed from a label and a small counter.
///
/// Convenience for scenario configs that declare per-agent seeds as plain
/// integers: `sha256(canonical(label, n))`.
pub fn seed_from_label(label: &str, n: u64) -> [u8; 32] {
    let mut w = CanonicalWriter::new();
    w.field_str(label).field_u64(n);
    sha256(&w.finish())
}

/// Sign an identity document for `subject`, valid for the inclusive tick
/// window `[not_before, not_after]`.
pub fn issue_document(
    issuer: &KeyPair,
    issuer_id: &str,
    subject: &AgentIdentity,
    not_before: Tick,
    not_after: Tick,
) -> Result<IdentityDocument, IdentityError> {
    if not_before > not_after {
        return Err(IdentityError::InvalidWindow {
            not_before,
            not_after,
        });
    }
    let signed = document_signed_bytes(
        &subject.agent_id,
        &subject.public_key,
        issuer_id,
        not_before,
        not_after,
    );
    Ok(IdentityDocument {
        subject_id: subject.agent_id.clone(),
        subject_public_key: subject.public_key,
        issuer_id: issuer_id.to_string(),
        not_before,
        not_after,
        signature: issuer.sign(&signed),
    })
}

/// Check a document against the trust anchors at tick `now`.
///
/// Valid iff the issuer is a known anchor, the signature verifies under the
/// anchor key, and `not_before <= now <= not_after`. A pure function of its
/// inputs.
pub fn verify_document(
    doc: &IdentityDocument,
    trust_anchors: &KeyDirectory,
    now: Tick,
) -> DocumentStatus {
    let issuer_key = match trust_anchors.get(&doc.issuer_id) {
        Some(key) => key,
        None => return DocumentStatus::Invalid(InvalidityReason::UnknownIssuer),
    };
    if !verify_signature(issuer_key, &doc.signed_bytes(), &doc.signature) {
        return DocumentStatus::Invalid(InvalidityReason::BadSignature);
    }
    if now < doc.not_before {
        return DocumentStatus::Invalid(InvalidityReason::NotYetValid);
    }
    if now > doc.not_after {
        return DocumentStatus::Invalid(InvalidityReason::Expired);
    }
    DocumentStatus::Valid
}

/// One party to a handshake: the identity it claims, the keys it actually
/// holds, and the document it presents.
pub type Party<'a> = (&'a AgentIdentity, &'a KeyPair, &'a IdentityDocument);

/// Two-way authentication: both documents must verify and both challenge
/// signatures (over `peer_nonce || own_fingerprint`) must verify under the
/// public keys stated in the presented documents. There is no other path to
/// a [`SessionToken`].
///
/// Challenge signatures are checked against the *document's* key, so a party
/// presenting someone else's document while signing with its own key fails
/// with `BadSignature` on its side.
pub fn mutual_authenticate(
    initiator: Party<'_>,
    responder: Party<'_>,
    nonce_source: &mut dyn NonceSource,
    trust_anchors: &KeyDirectory,
    now: Tick,
) -> Result<SessionToken, AuthError> {
    let (init_identity, init_keys, init_doc) = initiator;
    let (resp_identity, resp_keys, resp_doc) = responder;

    if let DocumentStatus::Invalid(reason) = verify_document(init_doc, trust_anchors, now) {
        return Err(AuthError {
            side: Side::Initiator,
            reason,
        });
    }
    if let DocumentStatus::Invalid(reason) = verify_document(resp_doc, trust_anchors, now) {
        return Err(AuthError {
            side: Side::Responder,
            reason,
        });
    }

    let initiator_nonce = nonce_source.next_nonce();
    let responder_nonce = nonce_source.next_nonce();

    // Each side signs the peer's nonce bound to the fingerprint it claims
    // (derived from the presented document, not from the keys in hand).
    let init_fingerprint = sha256(&init_doc.subject_public_key);
    let resp_fingerprint = sha256(&resp_doc.subject_public_key);

    let initiator_signature = init_keys.sign(&challenge_bytes(&responder_nonce, &init_fingerprint));
    let responder_signature = resp_keys.sign(&challenge_bytes(&initiator_nonce, &resp_fingerprint));

    if !verify_signature(
        &init_doc.subject_public_key,
        &challenge_bytes(&responder_nonce, &init_fingerprint),
        &initiator_signature,
    ) {
        return Err(AuthError {
            side: Side::Initiator,
            reason: InvalidityReason::BadSignature,
        });
    }
    if !verify_signature(
        &resp_doc.subject_public_key,
        &challenge_bytes(&initiator_nonce, &resp_fingerprint),
        &responder_signature,
    ) {
        return Err(AuthError {
            side: Side::Responder,
            reason: InvalidityReason::BadSignature,
        });
    }

    Ok(SessionToken {
        initiator_id: init_identity.agent_id.clone(),
        responder_id: resp_identity.agent_id.clone(),
        initiator_nonce,
        responder_nonce,
        initiator_signature,
        responder_signature,
    })
}

fn challenge_bytes(peer_nonce: &[u8; 32], own_fingerprint: &Digest) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    w.field_bytes(peer_nonce).field_bytes(own_fingerprint);
    w.finish()
}
