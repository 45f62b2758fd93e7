//! Dual-cluster packets with a tamper-evident hop guard chain.
//!
//! A packet carries two clusters: a protected cluster whose bytes are frozen
//! at seal time, and a rewritable cluster that downstream agents may
//! reinterpret freely. Each hop extends a guard chain that binds the hop
//! index, the forwarding agent, and the protected content hash:
//!
//! ```text
//! g0 = SHA-256(packet_id || content_hash)
//! gi = SHA-256(g(i-1) || be32(i) || agent_id || content_hash)
//! ```
//!
//! Every guard value is additionally signed by its hop agent. Any tamper of
//! the protected bytes, any skipped or reordered hop, and any forged entry
//! makes verification fail, and agents refuse to forward packets that fail
//! verification. The rewritable cluster is deliberately outside the guard:
//! its degradation is measured statistically by the simulator, not enforced.

use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::canonical::{sha256, Digest, SignatureBytes};
use crate::identity::{verify_signature, AgentIdentity, KeyDirectory, KeyPair};

/// Assertion payload kind carried in the rewritable cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssertionKind {
    Term,
    Numeric,
}

impl AssertionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssertionKind::Term => "term",
            AssertionKind::Numeric => "numeric",
        }
    }
}

/// One key/value claim in the rewritable cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewritableAssertion {
    pub key: String,
    pub value: String,
    pub kind: AssertionKind,
}

/// Content downstream agents are allowed to reinterpret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewritableCluster {
    Assertions(Vec<RewritableAssertion>),
    Text(Vec<u8>),
}

/// Byte-frozen content. Never re-encoded or transformed after sealing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedCluster {
    pub payload: Vec<u8>,
    /// SHA-256 of `payload`.
    pub content_hash: Digest,
    /// Origin signature over `content_hash`.
    pub origin_signature: SignatureBytes,
}

/// One link of the guard chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardEntry {
    pub hop: u32,
    pub agent_id: String,
    pub guard_value: Digest,
    /// Signature over `guard_value` under the hop agent's key.
    pub signature: SignatureBytes,
}

/// The two-cluster message with its hop chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualClusterPacket {
    pub packet_id: [u8; 16],
    pub protected: ProtectedCluster,
    pub rewritable: RewritableCluster,
    /// Entries ordered by hop, starting at hop 0 (the sealer).
    pub guard_chain: Vec<GuardEntry>,
}

impl DualClusterPacket {
    /// Number of forwards since sealing.
    pub fn hop_count(&self) -> usize {
        self.guard_chain.len() - 1
    }
}

fn seal_guard_value(packet_id: &[u8; 16], content_hash: &Digest) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(packet_id);
    hasher.update(content_hash);
    hasher.finalize().into()
}

fn hop_guard_value(
    previous: &Digest,
    hop: u32,
    agent_id: &str,
    content_hash: &Digest,
) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(previous);
    hasher.update(hop.to_be_bytes());
    hasher.update(agent_id.as_bytes());
    hasher.update(content_hash);
    hasher.finalize().into()
}

/// Freeze `protected_payload` and start the guard chain at hop 0.
///
/// Deterministic: identical inputs yield a bit-identical packet.
pub fn seal(
    origin: &AgentIdentity,
    origin_keys: &KeyPair,
    protected_payload: &[u8],
    rewritable: RewritableCluster,
    packet_id: [u8; 16],
) -> DualClusterPacket {
    let content_hash = sha256(protected_payload);
    let guard_value = seal_guard_value(&packet_id, &content_hash);
    DualClusterPacket {
        packet_id,
        protected: ProtectedCluster {
            payload: protected_payload.to_vec(),
            content_hash,
            origin_signature: origin_keys.sign(&content_hash),
        },
        rewritable,
        guard_chain: vec![GuardEntry {
            hop: 0,
            agent_id: origin.agent_id.clone(),
            guard_value,
            signature: origin_keys.sign(&guard_value),
        }],
    }
}

/// What failed and at which chain position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    TamperedProtected,
    GuardMismatch,
    BadSignature,
    SkippedHop,
}

impl std::fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViolationReason::TamperedProtected => "tampered protected cluster",
            ViolationReason::GuardMismatch => "guard value mismatch",
            ViolationReason::BadSignature => "bad signature",
            ViolationReason::SkippedHop => "skipped hop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("guard violation at hop {hop}: {reason}")]
pub struct Violation {
    pub hop: usize,
    pub reason: ViolationReason,
}

/// Full packet verification.
///
/// Checks, in order: the protected payload still hashes to `content_hash`;
/// the origin signature verifies; hops are consecutive from 0; every guard
/// value recomputes under the chain rule; and every entry signature verifies
/// under the hop agent's directory key (an unknown agent reads as a bad
/// signature). The first failure wins.
pub fn verify_guard(packet: &DualClusterPacket, key_lookup: &KeyDirectory) -> Result<(), Violation> {
    let content_hash = &packet.protected.content_hash;
    if sha256(&packet.protected.payload) != *content_hash {
        return Err(Violation {
            hop: 0,
            reason: ViolationReason::TamperedProtected,
        });
    }
    if packet.guard_chain.is_empty() {
        return Err(Violation {
            hop: 0,
            reason: ViolationReason::SkippedHop,
        });
    }

    let origin = &packet.guard_chain[0];
    let origin_key_ok = key_lookup
        .get(&origin.agent_id)
        .is_some_and(|key| verify_signature(key, content_hash, &packet.protected.origin_signature));
    if !origin_key_ok {
        return Err(Violation {
            hop: 0,
            reason: ViolationReason::BadSignature,
        });
    }

    let mut previous_guard: Option<Digest> = None;
    for (position, entry) in packet.guard_chain.iter().enumerate() {
        let violation = |reason| Violation {
            hop: position,
            reason,
        };
        if entry.hop as usize != position {
            return Err(violation(ViolationReason::SkippedHop));
        }
        let expected = match previous_guard {
            None => seal_guard_value(&packet.packet_id, content_hash),
            Some(prev) => hop_guard_value(&prev, entry.hop, &entry.agent_id, content_hash),
        };
        if expected != entry.guard_value {
            return Err(violation(ViolationReason::GuardMismatch));
        }
        let signer_ok = key_lookup
            .get(&entry.agent_id)
            .is_some_and(|key| verify_signature(key, &entry.guard_value, &entry.signature));
        if !signer_ok {
            return Err(violation(ViolationReason::BadSignature));
        }
        previous_guard = Some(entry.guard_value);
    }
    Ok(())
}

/// Verify, rewrite only the rewritable cluster, and extend the guard chain.
///
/// Forwarding refuses packets that fail [`verify_guard`]; refusing to
/// forward is the containment behavior. The protected bytes pass through
/// untouched.
pub fn forward(
    packet: &DualClusterPacket,
    agent: &AgentIdentity,
    keys: &KeyPair,
    rewrite: impl FnOnce(RewritableCluster) -> RewritableCluster,
    key_lookup: &KeyDirectory,
) -> Result<DualClusterPacket, Violation> {
    verify_guard(packet, key_lookup)?;
    let mut next = packet.clone();
    next.rewritable = rewrite(packet.rewritable.clone());
    let hop = packet.guard_chain.len() as u32;
    let previous = packet
        .guard_chain
        .last()
        .expect("verified packet has at least the seal entry")
        .guard_value;
    let guard_value = hop_guard_value(
        &previous,
        hop,
        &agent.agent_id,
        &packet.protected.content_hash,
    );
    next.guard_chain.push(GuardEntry {
        hop,
        agent_id: agent.agent_id.clone(),
        guard_value,
        signature: keys.sign(&guard_value),
    });
    Ok(next)
}

/// Return the exact sealed bytes, refusing on any verification failure.
pub fn extract_protected(
    packet: &DualClusterPacket,
    key_lookup: &KeyDirectory,
) -> Result<Vec<u8>, Violation> {
    verify_guard(packet, key_lookup)?;
    Ok(packet.protected.payload.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{generate_identity, seed_from_label};
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn agent(id: &str) -> (AgentIdentity, KeyPair) {
        generate_identity(
            &seed_from_label(id, 2),
            id,
            "pipeline",
            crate::identity::Role::Specialist,
        )
        .unwrap()
    }

    fn pipeline(n: usize) -> (Vec<(AgentIdentity, KeyPair)>, KeyDirectory) {
        let agents: Vec<(AgentIdentity, KeyPair)> =
            (0..n).map(|i| agent(&format!("hop{i}"))).collect();
        let keys = agents
            .iter()
            .map(|(identity, kp)| (identity.agent_id.clone(), kp.public_key()))
            .collect();
        (agents, keys)
    }

    fn forwarded(
        hops: usize,
        payload: &[u8],
    ) -> (DualClusterPacket, Vec<(AgentIdentity, KeyPair)>, KeyDirectory) {
        let (agents, keys) = pipeline(hops + 1);
        let mut packet = seal(
            &agents[0].0,
            &agents[0].1,
            payload,
            RewritableCluster::Text(b"initial".to_vec()),
            [7u8; 16],
        );
        for (identity, kp) in &agents[1..] {
            packet = forward(&packet, identity, kp, |r| r, &keys).unwrap();
        }
        (packet, agents, keys)
    }

    #[test]
    fn seal_then_verify_is_ok() {
        let (agents, keys) = pipeline(1);
        let packet = seal(
            &agents[0].0,
            &agents[0].1,
            b"NEC 110.26 clearance = 3 ft",
            RewritableCluster::Text(Vec::new()),
            [1u8; 16],
        );
        assert!(verify_guard(&packet, &keys).is_ok());
        assert_eq!(packet.hop_count(), 0);
    }

    #[test]
    fn empty_protected_payload_is_valid() {
        let (agents, keys) = pipeline(1);
        let packet = seal(
            &agents[0].0,
            &agents[0].1,
            b"",
            RewritableCluster::Text(Vec::new()),
            [2u8; 16],
        );
        assert_eq!(packet.protected.content_hash, sha256(b""));
        assert_eq!(extract_protected(&packet, &keys).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn seal_is_deterministic() {
        let (agents, _) = pipeline(1);
        let mk = || {
            seal(
                &agents[0].0,
                &agents[0].1,
                b"payload",
                RewritableCluster::Text(b"t".to_vec()),
                [3u8; 16],
            )
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn protected_bytes_survive_five_forwards() {
        let payload = b"NEC 110.26 clearance = 3 ft";
        let (agents, keys) = pipeline(6);
        let mut packet = seal(
            &agents[0].0,
            &agents[0].1,
            payload,
            RewritableCluster::Text(b"will be mangled".to_vec()),
            [4u8; 16],
        );
        for (i, (identity, kp)) in agents[1..].iter().enumerate() {
            packet = forward(&packet, identity, kp, |_| {
                RewritableCluster::Text(format!("rewrite #{i}").into_bytes())
            }, &keys)
            .unwrap();
        }
        assert_eq!(extract_protected(&packet, &keys).unwrap(), payload);
        assert_eq!(packet.hop_count(), 5);
    }

    #[test]
    fn hop_indices_are_consecutive() {
        let (packet, _, _) = forwarded(4, b"x");
        let hops: Vec<u32> = packet.guard_chain.iter().map(|e| e.hop).collect();
        assert_eq!(hops, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn tampered_payload_is_refused_at_forward() {
        let (mut packet, agents, keys) = forwarded(2, b"data");
        packet.protected.payload[0] ^= 0x01;
        let err = forward(&packet, &agents[1].0, &agents[1].1, |r| r, &keys).unwrap_err();
        assert_eq!(
            err,
            Violation {
                hop: 0,
                reason: ViolationReason::TamperedProtected
            }
        );
        assert_eq!(extract_protected(&packet, &keys).unwrap_err(), err);
    }

    #[test]
    fn single_bit_flip_in_payload_reports_hop_zero() {
        let (mut packet, _, keys) = forwarded(3, b"payload bytes");
        packet.protected.payload[5] ^= 0x20;
        assert_eq!(
            verify_guard(&packet, &keys).unwrap_err(),
            Violation {
                hop: 0,
                reason: ViolationReason::TamperedProtected
            }
        );
    }

    #[test]
    fn deleted_guard_entry_is_a_skipped_hop() {
        let (mut packet, _, keys) = forwarded(4, b"x");
        packet.guard_chain.remove(2);
        assert_eq!(
            verify_guard(&packet, &keys).unwrap_err(),
            Violation {
                hop: 2,
                reason: ViolationReason::SkippedHop
            }
        );
    }

    #[test]
    fn guard_value_recomputation_cross_check() {
        // Recompute g0 and g1 with raw concatenation, independent of the
        // helper functions.
        let (packet, agents, _) = forwarded(1, b"abc");
        let mut h = Sha256::new();
        h.update(packet.packet_id);
        h.update(packet.protected.content_hash);
        let g0: Digest = h.finalize().into();
        assert_eq!(packet.guard_chain[0].guard_value, g0);

        let mut h = Sha256::new();
        h.update(g0);
        h.update(1u32.to_be_bytes());
        h.update(agents[1].0.agent_id.as_bytes());
        h.update(packet.protected.content_hash);
        let g1: Digest = h.finalize().into();
        assert_eq!(packet.guard_chain[1].guard_value, g1);
    }

    #[test]
    fn guard_chain_commits_to_agent_order() {
        let (mut packet, agents, keys) = forwarded(4, b"ordered");
        // Swap the two middle agents' entries and let each agent re-sign its
        // (stale) guard value at its new hop index. The guard values were
        // computed in the old order, so verification must still fail.
        packet.guard_chain.swap(1, 2);
        packet.guard_chain[1].hop = 1;
        packet.guard_chain[2].hop = 2;
        let signer = |id: &str| {
            agents
                .iter()
                .find(|(identity, _)| identity.agent_id == id)
                .map(|(_, kp)| kp)
                .unwrap()
        };
        for position in [1usize, 2] {
            let entry = &packet.guard_chain[position];
            let sig = signer(&entry.agent_id).sign(&entry.guard_value);
            packet.guard_chain[position].signature = sig;
        }
        let err = verify_guard(&packet, &keys).unwrap_err();
        assert_eq!(err.reason, ViolationReason::GuardMismatch);
        assert_eq!(err.hop, 1);
    }

    #[test]
    fn rewritable_mutations_do_not_affect_the_guard() {
        let (mut packet, _, keys) = forwarded(3, b"frozen");
        packet.rewritable = RewritableCluster::Assertions(vec![RewritableAssertion {
            key: "k".to_string(),
            value: "anything at all".to_string(),
            kind: AssertionKind::Term,
        }]);
        assert!(verify_guard(&packet, &keys).is_ok());
        packet.rewritable = RewritableCluster::Text(vec![0xFF; 256]);
        assert!(verify_guard(&packet, &keys).is_ok());
    }

    #[test]
    fn unknown_forwarder_reads_as_bad_signature() {
        let (packet, _, _) = forwarded(2, b"x");
        let empty = KeyDirectory::new();
        assert_eq!(
            verify_guard(&packet, &empty).unwrap_err(),
            Violation {
                hop: 0,
                reason: ViolationReason::BadSignature
            }
        );
    }

    /// Round-trip fidelity and tamper completeness over randomized packets.
    #[test]
    fn randomized_round_trip_and_tamper_property() {
        let mut rng = ChaCha20Rng::seed_from_u64(0xBEEF);
        for trial in 0..1000 {
            let hops = rng.gen_range(1..=10);
            let len = rng.gen_range(1..=4096);
            let mut payload = vec![0u8; len];
            rng.fill_bytes(&mut payload);
            let (agents, keys) = pipeline(hops + 1);
            let mut packet = seal(
                &agents[0].0,
                &agents[0].1,
                &payload,
                RewritableCluster::Text(Vec::new()),
                {
                    let mut id = [0u8; 16];
                    rng.fill_bytes(&mut id);
                    id
                },
            );
            for (identity, kp) in &agents[1..] {
                let mut noise = vec![0u8; rng.gen_range(0..32)];
                rng.fill_bytes(&mut noise);
                packet =
                    forward(&packet, identity, kp, |_| RewritableCluster::Text(noise), &keys)
                        .unwrap();
            }
            assert_eq!(
                extract_protected(&packet, &keys).unwrap(),
                payload,
                "trial {trial}: protected bytes changed"
            );

            // One random bit flip in payload, a guard value, a signature, or
            // a hop index must be detected.
            let mut tampered = packet.clone();
            match rng.gen_range(0..5) {
                0 => {
                    let bit = rng.gen_range(0..tampered.protected.payload.len() * 8);
                    tampered.protected.payload[bit / 8] ^= 1 << (bit % 8);
                }
                1 => {
                    let e = rng.gen_range(0..tampered.guard_chain.len());
                    let bit = rng.gen_range(0..256);
                    tampered.guard_chain[e].guard_value[bit / 8] ^= 1 << (bit % 8);
                }
                2 => {
                    let e = rng.gen_range(0..tampered.guard_chain.len());
                    let bit = rng.gen_range(0..512);
                    tampered.guard_chain[e].signature[bit / 8] ^= 1 << (bit % 8);
                }
                3 => {
                    let bit = rng.gen_range(0..512);
                    tampered.protected.origin_signature[bit / 8] ^= 1 << (bit % 8);
                }
                _ => {
                    let e = rng.gen_range(0..tampered.guard_chain.len());
                    tampered.guard_chain[e].hop ^= 1 << rng.gen_range(0..31);
                }
            }
            assert!(
                verify_guard(&tampered, &keys).is_err(),
                "trial {trial}: tamper went undetected"
            );
        }
    }
}
