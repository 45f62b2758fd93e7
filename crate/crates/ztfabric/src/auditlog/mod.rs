//! Tamper-evident append-only event log and the self-documenting run manifest.
//!
//! [`MerkleLog`] assigns strictly consecutive sequence numbers, hashes each
//! entry into an append-only Merkle tree, and can prove inclusion of any
//! entry and consistency between any two log sizes. The public surface has
//! no operation that mutates or deletes an existing entry — the root over
//! any prefix is fixed forever at append time.
//!
//! Redundant logging is realized as two independent logs fed the same event
//! stream by different writers; [`cross_validate`] matches entries on
//! `(agent_id, event_kind, payload_hash)` and reports suppressed entries and
//! timestamp skew.

pub mod manifest;
pub mod merkle;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::canonical::{CanonicalWriter, Digest};
use crate::identity::Tick;

pub use manifest::{
    emit_manifest, verify_manifest, ArtifactSet, KpiSample, ManifestSetup, RunManifest,
};

/// Event data as submitted by a writer; the log assigns the sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub tick: Tick,
    pub agent_id: String,
    pub event_kind: String,
    pub payload_hash: Digest,
    pub geo_tag: Option<String>,
}

/// A stored event with its log-assigned sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub seq: u64,
    pub tick: Tick,
    pub agent_id: String,
    pub event_kind: String,
    pub payload_hash: Digest,
    pub geo_tag: Option<String>,
}

impl LogEntry {
    /// Canonical bytes the leaf hash commits to.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        w.field_u64(self.seq)
            .field_u64(self.tick)
            .field_str(&self.agent_id)
            .field_str(&self.event_kind)
            .field_bytes(&self.payload_hash)
            .field_opt_bytes(self.geo_tag.as_deref().map(str::as_bytes));
        w.finish()
    }

    /// `SHA-256(0x00 || canonical_bytes)`.
    pub fn leaf_hash(&self) -> Digest {
        merkle::leaf_hash(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("seq {seq} out of range for tree size {tree_size}")]
    SeqOutOfRange { seq: u64, tree_size: u64 },
    #[error("tree size {size} out of range for log of {leaf_count} leaves")]
    SizeOutOfRange { size: u64, leaf_count: u64 },
}

/// Audit path for one entry against the root of a stated tree size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionProof {
    pub path: Vec<Digest>,
}

/// Proof that a smaller log state is a prefix of a larger one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyProof {
    pub path: Vec<Digest>,
}

/// Append-only Merkle event log.
///
/// The only state-changing operation is [`MerkleLog::append`]; everything
/// else is a pure read.
#[derive(Debug, Clone, Default)]
pub struct MerkleLog {
    entries: Vec<LogEntry>,
    leaves: Vec<Digest>,
    /// Roots of the maximal perfect subtrees, as (height, hash), used to
    /// fold the current root in O(log n).
    peaks: Vec<(u32, Digest)>,
}

impl MerkleLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn entry(&self, seq: u64) -> Option<&LogEntry> {
        self.entries.get(seq as usize)
    }

    /// Append an event, assigning the next sequence number. Returns the
    /// assigned seq and the root over all leaves including the new one.
    pub fn append(&mut self, event: EventRecord) -> (u64, Digest) {
        let seq = self.len();
        let entry = LogEntry {
            seq,
            tick: event.tick,
            agent_id: event.agent_id,
            event_kind: event.event_kind,
            payload_hash: event.payload_hash,
            geo_tag: event.geo_tag,
        };
        let leaf = entry.leaf_hash();
        self.entries.push(entry);
        self.leaves.push(leaf);
        self.peaks.push((0, leaf));
        while self.peaks.len() >= 2 {
            let [.., (ha, a), (hb, b)] = self.peaks[..] else {
                unreachable!()
            };
            if ha != hb {
                break;
            }
            self.peaks.truncate(self.peaks.len() - 2);
            self.peaks.push((ha + 1, merkle::node_hash(&a, &b)));
        }
        (seq, self.root())
    }

    /// Root over the current leaves.
    pub fn root(&self) -> Digest {
        match self.peaks.split_last() {
            None => merkle::subtree_root(&[]),
            Some(((_, last), rest)) => rest
                .iter()
                .rev()
                .fold(*last, |acc, (_, peak)| merkle::node_hash(peak, &acc)),
        }
    }

    /// Root over the first `size` leaves; a pure function of that prefix.
    pub fn root_at(&self, size: u64) -> Result<Digest, AuditError> {
        if size > self.len() {
            return Err(AuditError::SizeOutOfRange {
                size,
                leaf_count: self.len(),
            });
        }
        Ok(merkle::subtree_root(&self.leaves[..size as usize]))
    }

    /// Prove that entry `seq` is included in the tree over the first
    /// `tree_size` leaves.
    pub fn prove_inclusion(&self, seq: u64, tree_size: u64) -> Result<InclusionProof, AuditError> {
        if tree_size > self.len() {
            return Err(AuditError::SizeOutOfRange {
                size: tree_size,
                leaf_count: self.len(),
            });
        }
        if seq >= tree_size {
            return Err(AuditError::SeqOutOfRange { seq, tree_size });
        }
        Ok(InclusionProof {
            path: merkle::inclusion_path(seq as usize, &self.leaves[..tree_size as usize]),
        })
    }

    /// Prove that the log at `size1` leaves is a prefix of the log at
    /// `size2` leaves.
    pub fn prove_consistency(
        &self,
        size1: u64,
        size2: u64,
    ) -> Result<ConsistencyProof, AuditError> {
        if size2 > self.len() {
            return Err(AuditError::SizeOutOfRange {
                size: size2,
                leaf_count: self.len(),
            });
        }
        if size1 == 0 || size1 > size2 {
            return Err(AuditError::SizeOutOfRange {
                size: size1,
                leaf_count: size2,
            });
        }
        Ok(ConsistencyProof {
            path: merkle::consistency_path(size1 as usize, &self.leaves[..size2 as usize]),
        })
    }

    /// Stable line-oriented export. One entry per line with fields in
    /// canonical order (tab-separated, hashes hex-encoded, the root after
    /// that entry last), framed by a header line and a final root trailer.
    ///
    /// Entry fields must not contain tabs or newlines; scenario configs
    /// enforce this for agent ids, and event kinds are fixed identifiers.
    pub fn export(&self) -> String {
        let mut out = String::from("# ztfabric audit log v1\n");
        let mut replay = MerkleLog::new();
        for entry in &self.entries {
            let (_, root) = replay.append(EventRecord {
                tick: entry.tick,
                agent_id: entry.agent_id.clone(),
                event_kind: entry.event_kind.clone(),
                payload_hash: entry.payload_hash,
                geo_tag: entry.geo_tag.clone(),
            });
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                entry.seq,
                entry.tick,
                entry.agent_id,
                entry.event_kind,
                hex::encode(entry.payload_hash),
                entry.geo_tag.as_deref().unwrap_or(""),
                hex::encode(root),
            ));
        }
        out.push_str(&format!("# root {}\n", hex::encode(self.root())));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ExportError {
    pub line: usize,
    pub message: String,
}

/// A parsed log export: the entries, the declared per-line roots, and the
/// declared final root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedExport {
    pub entries: Vec<LogEntry>,
    pub line_roots: Vec<Digest>,
    pub final_root: Digest,
}

/// Parse the export format produced by [`MerkleLog::export`]. Structural
/// problems are reported with their 1-based line number; hash and root
/// mismatches are the caller's job to detect.
pub fn parse_export(text: &str) -> Result<ParsedExport, ExportError> {
    let err = |line: usize, message: &str| ExportError {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "# ztfabric audit log v1")) => {}
        _ => return Err(err(1, "missing or unrecognized header")),
    }

    let mut entries = Vec::new();
    let mut line_roots = Vec::new();
    let mut final_root: Option<Digest> = None;
    for (index, raw) in lines {
        let line_no = index + 1;
        if let Some(rest) = raw.strip_prefix("# root ") {
            let root = parse_digest(rest).ok_or_else(|| err(line_no, "malformed root trailer"))?;
            final_root = Some(root);
            continue;
        }
        if final_root.is_some() {
            return Err(err(line_no, "content after root trailer"));
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 7 {
            return Err(err(line_no, "expected 7 tab-separated fields"));
        }
        let seq: u64 = fields[0]
            .parse()
            .map_err(|_| err(line_no, "malformed seq"))?;
        let tick: u64 = fields[1]
            .parse()
            .map_err(|_| err(line_no, "malformed tick"))?;
        let payload_hash =
            parse_digest(fields[4]).ok_or_else(|| err(line_no, "malformed payload hash"))?;
        let root = parse_digest(fields[6]).ok_or_else(|| err(line_no, "malformed entry root"))?;
        if seq != entries.len() as u64 {
            return Err(err(line_no, "sequence numbers are not consecutive"));
        }
        entries.push(LogEntry {
            seq,
            tick,
            agent_id: fields[2].to_string(),
            event_kind: fields[3].to_string(),
            payload_hash,
            geo_tag: if fields[5].is_empty() {
                None
            } else {
                Some(fields[5].to_string())
            },
        });
        line_roots.push(root);
    }
    let final_root = final_root.ok_or_else(|| err(text.lines().count(), "missing root trailer"))?;
    Ok(ParsedExport {
        entries,
        line_roots,
        final_root,
    })
}

fn parse_digest(s: &str) -> Option<Digest> {
    let bytes = hex::decode(s).ok()?;
    bytes.try_into().ok()
}

/// Verify that `entry` sits at `seq` in the tree of `tree_size` leaves with
/// the given `root`. False for any altered entry, seq, size, or proof node.
pub fn verify_inclusion(
    root: &Digest,
    entry: &LogEntry,
    seq: u64,
    tree_size: u64,
    proof: &InclusionProof,
) -> bool {
    merkle::verify_inclusion_path(root, &entry.leaf_hash(), seq, tree_size, &proof.path)
}

/// Verify that the log state with `size1` leaves and `root1` is a prefix of
/// the state with `size2` leaves and `root2`.
pub fn verify_consistency(
    root1: &Digest,
    root2: &Digest,
    size1: u64,
    size2: u64,
    proof: &ConsistencyProof,
) -> bool {
    merkle::verify_consistency_path(root1, root2, size1, size2, &proof.path)
}

/// How two redundant logs disagree about one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscrepancyKind {
    MissingInA,
    MissingInB,
    TimestampSkew { tick_a: Tick, tick_b: Tick },
}

impl std::fmt::Display for DiscrepancyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiscrepancyKind::MissingInA => f.write_str("missing in A"),
            DiscrepancyKind::MissingInB => f.write_str("missing in B"),
            DiscrepancyKind::TimestampSkew { tick_a, tick_b } => {
                write!(f, "timestamp skew: {tick_a} vs {tick_b}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discrepancy {
    pub agent_id: String,
    pub event_kind: String,
    pub payload_hash: Digest,
    pub kind: DiscrepancyKind,
}

/// Compare two redundant logs of the same event stream.
///
/// Entries are matched on `(agent_id, event_kind, payload_hash)`; sequence
/// numbers are writer-local and ignored. Matched pairs whose ticks differ by
/// more than `skew` are reported, as is every unmatched entry on either side.
pub fn cross_validate(log_a: &[LogEntry], log_b: &[LogEntry], skew: u64) -> Vec<Discrepancy> {
    type Key = (String, String, Digest);
    let group = |entries: &[LogEntry]| {
        let mut by_key: BTreeMap<Key, Vec<Tick>> = BTreeMap::new();
        for e in entries {
            by_key
                .entry((e.agent_id.clone(), e.event_kind.clone(), e.payload_hash))
                .or_default()
                .push(e.tick);
        }
        for ticks in by_key.values_mut() {
            ticks.sort_unstable();
        }
        by_key
    };
    let a = group(log_a);
    let b = group(log_b);

    let mut discrepancies = Vec::new();
    let keys: std::collections::BTreeSet<&Key> = a.keys().chain(b.keys()).collect();
    for key in keys {
        let empty = Vec::new();
        let ticks_a = a.get(key).unwrap_or(&empty);
        let ticks_b = b.get(key).unwrap_or(&empty);
        let (agent_id, event_kind, payload_hash) = key;
        let push = |discrepancies: &mut Vec<Discrepancy>, kind| {
            discrepancies.push(Discrepancy {
                agent_id: agent_id.clone(),
                event_kind: event_kind.clone(),
                payload_hash: *payload_hash,
                kind,
            });
        };
        for pair in 0..ticks_a.len().max(ticks_b.len()) {
            match (ticks_a.get(pair), ticks_b.get(pair)) {
                (Some(&tick_a), Some(&tick_b)) => {
                    if tick_a.abs_diff(tick_b) > skew {
                        push(
                            &mut discrepancies,
                            DiscrepancyKind::TimestampSkew { tick_a, tick_b },
                        );
                    }
                }
                (Some(_), None) => push(&mut discrepancies, DiscrepancyKind::MissingInB),
                (None, Some(_)) => push(&mut discrepancies, DiscrepancyKind::MissingInA),
                (None, None) => unreachable!(),
            }
        }
    }
    discrepancies
}
