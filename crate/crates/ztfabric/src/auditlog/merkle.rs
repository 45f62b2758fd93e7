//! Merkle tree hashing, inclusion proofs, and consistency proofs.
//!
//! Fixed construction: `leaf = SHA-256(0x00 || data)`, interior node
//! `SHA-256(0x01 || left || right)`, trees split at the largest power of two
//! strictly less than the leaf count, and the empty tree hashes to
//! `SHA-256("")`. All functions here operate on already-hashed leaves.

use sha2::{Digest as _, Sha256};

use crate::canonical::{sha256, Digest};

/// `SHA-256(0x00 || data)`.
pub fn leaf_hash(data: &[u8]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update([0x00]);
    hasher.update(data);
    hasher.finalize().into()
}

/// `SHA-256(0x01 || left || right)`.
pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update([0x01]);
    hasher.update(left);
    hasher.update(right);
    hasher.finalize().into()
}

/// Largest power of two strictly less than `n`. Requires `n >= 2`.
fn split_point(n: usize) -> usize {
    let mut k = 1;
    while k * 2 < n {
        k *= 2;
    }
    k
}

/// Root over a slice of leaf hashes.
pub fn subtree_root(leaves: &[Digest]) -> Digest {
    match leaves.len() {
        0 => sha256(b""),
        1 => leaves[0],
        n => {
            let k = split_point(n);
            node_hash(&subtree_root(&leaves[..k]), &subtree_root(&leaves[k..]))
        }
    }
}

/// Audit path for the leaf at `index`; sibling subtree roots from the leaf
/// up to the root.
pub fn inclusion_path(index: usize, leaves: &[Digest]) -> Vec<Digest> {
    debug_assert!(index < leaves.len());
    if leaves.len() <= 1 {
        return Vec::new();
    }
    let k = split_point(leaves.len());
    if index < k {
        let mut path = inclusion_path(index, &leaves[..k]);
        path.push(subtree_root(&leaves[k..]));
        path
    } else {
        let mut path = inclusion_path(index - k, &leaves[k..]);
        path.push(subtree_root(&leaves[..k]));
        path
    }
}

/// Proof that the first `old_size` leaves are a prefix of `leaves`.
pub fn consistency_path(old_size: usize, leaves: &[Digest]) -> Vec<Digest> {
    debug_assert!(0 < old_size && old_size <= leaves.len());
    subproof(old_size, leaves, true)
}

fn subproof(m: usize, leaves: &[Digest], old_root_known: bool) -> Vec<Digest> {
    let n = leaves.len();
    if m == n {
        return if old_root_known {
            Vec::new()
        } else {
            vec![subtree_root(leaves)]
        };
    }
    let k = split_point(n);
    if m <= k {
        let mut path = subproof(m, &leaves[..k], old_root_known);
        path.push(subtree_root(&leaves[k..]));
        path
    } else {
        let mut path = subproof(m - k, &leaves[k..], false);
        path.push(subtree_root(&leaves[..k]));
        path
    }
}

/// Check an inclusion proof against a root, given the leaf hash, its index,
/// and the tree size the proof was generated for.
pub fn verify_inclusion_path(
    root: &Digest,
    leaf: &Digest,
    index: u64,
    tree_size: u64,
    path: &[Digest],
) -> bool {
    if index >= tree_size {
        return false;
    }
    let mut fnode = index;
    let mut snode = tree_size - 1;
    let mut hash = *leaf;
    for sibling in path {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            hash = node_hash(sibling, &hash);
            if fnode & 1 == 0 {
                while fnode & 1 == 0 && fnode != 0 {
                    fnode >>= 1;
                    snode >>= 1;
                }
            }
        } else {
            hash = node_hash(&hash, sibling);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && hash == *root
}

/// Check a consistency proof between the roots of two tree sizes.
pub fn verify_consistency_path(
    old_root: &Digest,
    new_root: &Digest,
    old_size: u64,
    new_size: u64,
    path: &[Digest],
) -> bool {
    if old_size == 0 || old_size > new_size {
        return false;
    }
    if old_size == new_size {
        return path.is_empty() && old_root == new_root;
    }

    // When the old size is a power of two, the old root itself is the first
    // node of the walk and is not repeated in the proof.
    let mut nodes = path.iter();
    let first = if old_size.is_power_of_two() {
        *old_root
    } else {
        match nodes.next() {
            Some(node) => *node,
            None => return false,
        }
    };

    let mut fnode = old_size - 1;
    let mut snode = new_size - 1;
    while fnode & 1 == 1 {
        fnode >>= 1;
        snode >>= 1;
    }
    let mut old_hash = first;
    let mut new_hash = first;
    for sibling in nodes {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            old_hash = node_hash(sibling, &old_hash);
            new_hash = node_hash(sibling, &new_hash);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            new_hash = node_hash(&new_hash, sibling);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && old_hash == *old_root && new_hash == *new_root
}
